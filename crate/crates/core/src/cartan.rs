//! Parity decomposition of `su(3^n)` by the number of `σ`-type tensor factors.
//!
//! Each site contributes a Hermitian factor from `{iσ_x, iσ_y, iσ_z}` (σ-type)
//! or `{iR, iQ, iT, iV, iU, 𝟏}` (S-type). A word's class is the parity of its
//! σ-count. Algebra elements are `i · word`, so both classes are real spans of
//! skew-Hermitian matrices. For two spins the even class (`σ⊗σ`, `S⊗S`) is the
//! drift's home `i𝓘` and the odd class (mixed words) is `i𝓘⊥`.
//!
//! Brackets and anticommutators shift σ-parity by a fixed amount: a commutator
//! of classes `p` and `q` lands in class `p + q + 1`, an anticommutator in
//! `p + q` (mod 2).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{
    anti_bracket, bracket, random_gaussian, tensor, tensor_all, ComplexMatrix, OperatorSpan, C64,
    DEFAULT_SPAN_TOL, I,
};
use crate::su3::{build_su3_basis, Label};

/// Forbidden-class projections above this count as violations.
pub const CARTAN_TOL: f64 = 1e-10;

/// Default sampled pairs per class pair when `n = 3`.
pub const DEFAULT_SAMPLE_PAIRS: usize = 2000;

const SIGMA_LABELS: [Label; 3] = [Label::Sx, Label::Sy, Label::Sz];
const S_LABELS: [Label; 6] = [Label::R, Label::Q, Label::T, Label::V, Label::U, Label::I1];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn of(sigma_count: usize) -> Self {
        if sigma_count % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    fn add(self, other: Self) -> Self {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Per-site factors of one basis word. [`Label::I1`] stands for `𝟏`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WordLabel(pub Vec<Label>);

impl WordLabel {
    pub fn sigma_count(&self) -> usize {
        self.0.iter().filter(|l| SIGMA_LABELS.contains(l)).count()
    }

    pub fn parity(&self) -> Parity {
        Parity::of(self.sigma_count())
    }
}

impl std::fmt::Display for WordLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|l| match l {
                Label::I1 => "1".to_string(),
                other => other.to_string(),
            })
            .collect();
        f.write_str(&parts.join("⊗"))
    }
}

#[derive(Clone, Debug)]
pub struct ParityDecomposition {
    pub n_spins: usize,
    pub even_space: OperatorSpan,
    pub odd_space: OperatorSpan,
    pub even_labels: Vec<WordLabel>,
    pub odd_labels: Vec<WordLabel>,
}

/// Hermitian site factor for `label`.
fn site_factor(label: Label) -> ComplexMatrix {
    build_su3_basis().get(label).scale(-I)
}

fn words(n: usize) -> Vec<WordLabel> {
    let all: Vec<Label> = SIGMA_LABELS.iter().chain(S_LABELS.iter()).copied().collect();
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|w: Vec<Label>| {
                all.iter().map(move |&l| {
                    let mut w = w.clone();
                    w.push(l);
                    w
                })
            })
            .collect();
    }
    out.into_iter()
        .filter(|w| w.iter().any(|&l| l != Label::I1))
        .map(WordLabel)
        .collect()
}

fn word_element(word: &WordLabel, factors: &[(Label, ComplexMatrix)]) -> ComplexMatrix {
    let mats = word
        .0
        .iter()
        .map(|l| &factors.iter().find(|(k, _)| k == l).expect("known label").1);
    tensor_all(mats).scale(I)
}

pub fn build_parity_decomposition(n_spins: usize) -> Result<ParityDecomposition> {
    build_with_order(n_spins, false)
}

/// Same decomposition with the words inserted in reverse order.
pub fn build_parity_decomposition_reversed(n_spins: usize) -> Result<ParityDecomposition> {
    build_with_order(n_spins, true)
}

fn build_with_order(n_spins: usize, reversed: bool) -> Result<ParityDecomposition> {
    if !(1..=3).contains(&n_spins) {
        return Err(Error::UnsupportedSpins(n_spins));
    }
    let factors: Vec<(Label, ComplexMatrix)> = SIGMA_LABELS
        .iter()
        .chain(S_LABELS.iter())
        .map(|&l| (l, site_factor(l)))
        .collect();
    let mut list = words(n_spins);
    if reversed {
        list.reverse();
    }
    let dim = 3usize.pow(n_spins as u32);
    let mut decomp = ParityDecomposition {
        n_spins,
        even_space: OperatorSpan::new(dim),
        odd_space: OperatorSpan::new(dim),
        even_labels: Vec::new(),
        odd_labels: Vec::new(),
    };
    for w in list {
        let x = word_element(&w, &factors);
        let (space, labels) = match w.parity() {
            Parity::Even => (&mut decomp.even_space, &mut decomp.even_labels),
            Parity::Odd => (&mut decomp.odd_space, &mut decomp.odd_labels),
        };
        if space.insert(&x, DEFAULT_SPAN_TOL)? {
            labels.push(w);
        }
    }
    Ok(decomp)
}

/// Result of [`ParityDecomposition::project`].
#[derive(Clone, Debug)]
pub struct ParityParts {
    pub even: ComplexMatrix,
    pub odd: ComplexMatrix,
    /// Coefficient along `𝟏 / √dim`.
    pub identity: C64,
}

impl ParityParts {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.even.dim();
        let mut x = &self.even + &self.odd;
        x.axpy(self.identity / (n as f64).sqrt(), &ComplexMatrix::identity(n));
        x
    }
}

impl ParityDecomposition {
    pub fn ambient_dim(&self) -> usize {
        self.even_space.ambient_dim()
    }

    pub fn space(&self, p: Parity) -> &OperatorSpan {
        match p {
            Parity::Even => &self.even_space,
            Parity::Odd => &self.odd_space,
        }
    }

    /// Orthogonal split of any complex matrix into even, odd and identity parts.
    pub fn project(&self, x: &ComplexMatrix) -> Result<ParityParts> {
        let n = self.ambient_dim();
        if x.dim() != n {
            return Err(Error::DimensionMismatch {
                left: n,
                right: x.dim(),
            });
        }
        Ok(ParityParts {
            even: self.even_space.project(x),
            odd: self.odd_space.project(x),
            identity: x.trace() / (n as f64).sqrt(),
        })
    }

    /// Largest `|Re Tr(e^† o)|` over even/odd basis pairs.
    pub fn cross_orthogonality(&self) -> f64 {
        self.even_space
            .basis()
            .par_iter()
            .map(|e| {
                self.odd_space
                    .basis()
                    .iter()
                    .map(|o| e.inner_complex(o).norm())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Operation {
    Commutator,
    Anticommutator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyMode {
    Exhaustive,
    Sampled { pairs: usize, seed: u64 },
}

/// Outcome of one operation on one class pair, before any labeling is applied.
#[derive(Clone, Debug, Serialize)]
pub struct ClassPairResult {
    pub operation: Operation,
    pub lhs: Parity,
    pub rhs: Parity,
    /// Class predicted by the parity rule.
    pub predicted: Parity,
    pub pairs_checked: usize,
    /// Pairs whose projection onto the other class exceeds the tolerance.
    pub violations: usize,
    pub max_outside_predicted: f64,
    /// Largest projection onto the predicted class, for context.
    pub max_inside_predicted: f64,
}

/// One printed inclusion, e.g. `[i𝓘_o, i𝓘_o] ⊆ i𝓘_o`, under a labeling.
#[derive(Clone, Debug, Serialize)]
pub struct Inclusion {
    pub name: String,
    pub operation: Operation,
    pub lhs: Parity,
    pub rhs: Parity,
    pub claimed: Parity,
    pub max_forbidden: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LabelingOutcome {
    /// Which σ-parity the `o` label is assigned to.
    pub o_class: Parity,
    pub description: String,
    pub inclusions: Vec<Inclusion>,
    pub commutator_triple_holds: bool,
    pub anticommutator_triple_holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub samples: usize,
    pub max_residual: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CartanReport {
    pub n_spins: usize,
    pub even_dim: usize,
    pub odd_dim: usize,
    pub exhaustive: bool,
    pub tolerance: f64,
    pub cross_orthogonality: f64,
    pub class_pairs: Vec<ClassPairResult>,
    /// The two-spin triple with `𝓘⊥` = odd class; absent for `n ≠ 2`.
    pub two_spin_triple: Option<Vec<Inclusion>>,
    pub labelings: Vec<LabelingOutcome>,
    pub tensor_identity: IdentityCheck,
    /// Violations of the parity rule over all class pairs.
    pub total_violations: usize,
    pub pass: bool,
}

fn apply(op: Operation, x: &ComplexMatrix, y: &ComplexMatrix) -> ComplexMatrix {
    match op {
        Operation::Commutator => bracket(x, y),
        // i{X, Y} is skew-Hermitian for skew-Hermitian X, Y.
        Operation::Anticommutator => anti_bracket(x, y).scale(I),
    }
}

fn predicted(op: Operation, p: Parity, q: Parity) -> Parity {
    match op {
        Operation::Commutator => p.add(q).flip(),
        Operation::Anticommutator => p.add(q),
    }
}

fn index_pairs(
    decomp: &ParityDecomposition,
    p: Parity,
    q: Parity,
    mode: VerifyMode,
    op: Operation,
) -> Vec<(usize, usize)> {
    let np = decomp.space(p).dimension();
    let nq = decomp.space(q).dimension();
    match mode {
        VerifyMode::Exhaustive => {
            let mut out = Vec::with_capacity(np * nq);
            for i in 0..np {
                // Both operations are (anti)symmetric, so same-class pairs need
                // only one ordering.
                let start = if p == q { i } else { 0 };
                for j in start..nq {
                    if p == q && i == j && op == Operation::Commutator {
                        continue;
                    }
                    out.push((i, j));
                }
            }
            out
        }
        VerifyMode::Sampled { pairs, seed } => {
            let salt = (p == Parity::Odd) as u64 * 2 + (q == Parity::Odd) as u64;
            let salt = salt * 2 + (op == Operation::Anticommutator) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (salt << 56));
            (0..pairs)
                .map(|_| (rng.random_range(0..np), rng.random_range(0..nq)))
                .collect()
        }
    }
}

fn check_class_pair(
    decomp: &ParityDecomposition,
    op: Operation,
    p: Parity,
    q: Parity,
    mode: VerifyMode,
) -> ClassPairResult {
    let target = predicted(op, p, q);
    let pairs = index_pairs(decomp, p, q, mode, op);
    let (bp, bq) = (decomp.space(p).basis(), decomp.space(q).basis());
    let (inside, outside) = (decomp.space(target), decomp.space(target.flip()));
    let norms: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let z = apply(op, &bp[i], &bq[j]);
            (outside.projection_norm(&z), inside.projection_norm(&z))
        })
        .collect();
    ClassPairResult {
        operation: op,
        lhs: p,
        rhs: q,
        predicted: target,
        pairs_checked: pairs.len(),
        violations: norms.iter().filter(|(o, _)| *o > CARTAN_TOL).count(),
        max_outside_predicted: norms.iter().map(|n| n.0).fold(0.0, f64::max),
        max_inside_predicted: norms.iter().map(|n| n.1).fold(0.0, f64::max),
    }
}

fn inclusion(
    results: &[ClassPairResult],
    name: String,
    op: Operation,
    lhs: Parity,
    rhs: Parity,
    claimed: Parity,
) -> Inclusion {
    let r = results
        .iter()
        .find(|r| r.operation == op && ((r.lhs, r.rhs) == (lhs, rhs) || (r.lhs, r.rhs) == (rhs, lhs)))
        .expect("every class pair is checked");
    // The measured weight in the claimed-forbidden class.
    let max_forbidden = if claimed == r.predicted {
        r.max_outside_predicted
    } else {
        r.max_inside_predicted
    };
    Inclusion {
        name,
        operation: op,
        lhs,
        rhs,
        claimed,
        max_forbidden,
        holds: max_forbidden <= CARTAN_TOL,
    }
}

fn labeling(results: &[ClassPairResult], o: Parity) -> LabelingOutcome {
    let e = o.flip();
    let c = Operation::Commutator;
    let a = Operation::Anticommutator;
    let inclusions = vec![
        inclusion(results, "[iI_o, iI_o] ⊆ iI_o".into(), c, o, o, o),
        inclusion(results, "[iI_o, iI_e] ⊆ iI_e".into(), c, o, e, e),
        inclusion(results, "[iI_e, iI_e] ⊆ iI_o".into(), c, e, e, o),
        inclusion(results, "{I_o, I_o} ⊆ I_e".into(), a, o, o, e),
        inclusion(results, "{I_o, I_e} ⊆ I_o".into(), a, o, e, o),
        inclusion(results, "{I_e, I_e} ⊆ I_e".into(), a, e, e, e),
    ];
    let holds = |op: Operation| inclusions.iter().filter(|i| i.operation == op).all(|i| i.holds);
    LabelingOutcome {
        o_class: o,
        description: match o {
            Parity::Odd => "I_o = words with an odd number of sigma factors".into(),
            Parity::Even => "I_o = words with an even number of sigma factors".into(),
        },
        commutator_triple_holds: holds(c),
        anticommutator_triple_holds: holds(a),
        inclusions,
    }
}

fn two_spin_triple(results: &[ClassPairResult]) -> Vec<Inclusion> {
    let (perp, main) = (Parity::Odd, Parity::Even);
    let c = Operation::Commutator;
    vec![
        inclusion(results, "[iI⊥, iI⊥] ⊆ iI⊥".into(), c, perp, perp, perp),
        inclusion(results, "[iI⊥, iI] ⊆ iI".into(), c, perp, main, main),
        inclusion(results, "[iI, iI] ⊆ iI⊥".into(), c, main, main, perp),
    ]
}

/// Checks `[A⊗B, C⊗D] = ½({A,C}⊗[B,D] + [A,C]⊗{B,D})` on random `3 x 3` blocks.
pub fn check_tensor_identity(samples: usize, seed: u64) -> IdentityCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let [a, b, c, d] = [0; 4].map(|_| random_gaussian(3, &mut rng));
        let lhs = bracket(&tensor(&a, &b), &tensor(&c, &d));
        let rhs = (&tensor(&anti_bracket(&a, &c), &bracket(&b, &d))
            + &tensor(&bracket(&a, &c), &anti_bracket(&b, &d)))
            .scale_re(0.5);
        worst = worst.max((&lhs - &rhs).norm() / lhs.norm().max(1.0));
    }
    IdentityCheck {
        samples,
        max_residual: worst,
        pass: worst <= 1e-12,
    }
}

/// Exhaustive for `n ≤ 2`, sampled with defaults for `n = 3`.
pub fn default_mode(n_spins: usize, seed: u64) -> VerifyMode {
    if n_spins <= 2 {
        VerifyMode::Exhaustive
    } else {
        VerifyMode::Sampled {
            pairs: DEFAULT_SAMPLE_PAIRS,
            seed,
        }
    }
}

pub fn verify_cartan_relations(decomp: &ParityDecomposition, mode: VerifyMode) -> CartanReport {
    let classes = [(Parity::Odd, Parity::Odd), (Parity::Odd, Parity::Even), (Parity::Even, Parity::Even)];
    let mut class_pairs = Vec::new();
    for op in [Operation::Commutator, Operation::Anticommutator] {
        for &(p, q) in &classes {
            class_pairs.push(check_class_pair(decomp, op, p, q, mode));
        }
    }
    let identity_seed = match mode {
        VerifyMode::Sampled { seed, .. } => seed,
        VerifyMode::Exhaustive => 0,
    };
    let tensor_identity = check_tensor_identity(100, identity_seed);
    let total_violations = class_pairs.iter().map(|r| r.violations).sum();
    let cross = decomp.cross_orthogonality();
    let labelings = vec![labeling(&class_pairs, Parity::Odd), labeling(&class_pairs, Parity::Even)];
    let two_spin = (decomp.n_spins == 2).then(|| two_spin_triple(&class_pairs));
    let full = decomp.ambient_dim().pow(2) - 1;
    let pass = total_violations == 0
        && tensor_identity.pass
        && cross <= CARTAN_TOL
        && decomp.even_space.dimension() + decomp.odd_space.dimension() == full
        && two_spin.as_ref().is_none_or(|t| t.iter().all(|i| i.holds));
    CartanReport {
        n_spins: decomp.n_spins,
        even_dim: decomp.even_space.dimension(),
        odd_dim: decomp.odd_space.dimension(),
        exhaustive: mode == VerifyMode::Exhaustive,
        tolerance: CARTAN_TOL,
        cross_orthogonality: cross,
        class_pairs,
        two_spin_triple: two_spin,
        labelings,
        tensor_identity,
        total_violations,
        pass,
    }
}
