//! The named `u(3)` basis and its structure-constant tables.
//!
//! `𝒮 = span{σ_x, σ_y, σ_z}` is the spin-1 image of `su(2)`; its orthogonal
//! complement in `u(3)` is `𝒮⊥ = span{R, Q, T, V, U, i𝟏}`. The tabulated
//! commutators and anticommutators are kept as data and re-derived by direct
//! multiplication in [`verify_structure_tables`]; nothing else in the crate
//! reads them.

use std::fmt;

use serde::Serialize;

use crate::error::Result;
use crate::lie;
use crate::operator::{anti_bracket, bracket, ComplexMatrix, OperatorSpan, C64, DEFAULT_SPAN_TOL, I};

/// Pass threshold for a recomputed table cell.
pub const TABLE_TOL: f64 = 1e-12;

/// Pass threshold for subspace containment checks.
pub const SUBSPACE_TOL: f64 = 1e-10;

/// Labels of the nine reference directions of `u(3)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Label {
    #[serde(rename = "sigma_x")]
    Sx,
    #[serde(rename = "sigma_y")]
    Sy,
    #[serde(rename = "sigma_z")]
    Sz,
    R,
    Q,
    T,
    V,
    U,
    /// `i𝟏`
    #[serde(rename = "i1")]
    I1,
}

impl Label {
    pub const ALL: [Label; 9] = [
        Label::Sx,
        Label::Sy,
        Label::Sz,
        Label::R,
        Label::Q,
        Label::T,
        Label::V,
        Label::U,
        Label::I1,
    ];
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::Sx => "σx",
            Label::Sy => "σy",
            Label::Sz => "σz",
            Label::R => "R",
            Label::Q => "Q",
            Label::T => "T",
            Label::V => "V",
            Label::U => "U",
            Label::I1 => "i1",
        };
        f.write_str(s)
    }
}

/// Named `3 x 3` constants.
#[derive(Clone, Debug)]
pub struct Su3Basis {
    pub sigma_x: ComplexMatrix,
    pub sigma_y: ComplexMatrix,
    pub sigma_z: ComplexMatrix,
    pub r: ComplexMatrix,
    pub q: ComplexMatrix,
    pub t: ComplexMatrix,
    pub v: ComplexMatrix,
    pub u: ComplexMatrix,
    /// Spin-1 matrices `σ̄_v` (skew-Hermitian; `-i σ̄_v` are the Hermitian spin operators).
    pub sbar_x: ComplexMatrix,
    pub sbar_y: ComplexMatrix,
    pub sbar_z: ComplexMatrix,
    pub identity: ComplexMatrix,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn mat(rows: [[C64; 3]; 3]) -> ComplexMatrix {
    ComplexMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
}

pub fn build_su3_basis() -> Su3Basis {
    let o = c(0.0, 0.0);
    let i = c(0.0, 1.0);
    let one = c(1.0, 0.0);
    let h = std::f64::consts::FRAC_1_SQRT_2;

    Su3Basis {
        sigma_x: mat([[o, i, o], [i, o, i], [o, i, o]]),
        sigma_y: mat([[o, one, o], [-one, o, one], [o, -one, o]]),
        sigma_z: mat([[-i, o, o], [o, o, o], [o, o, i]]),
        r: mat([[o, o, i], [o, o, o], [i, o, o]]),
        q: mat([[o, o, one], [o, o, o], [-one, o, o]]),
        t: mat([[i, o, o], [o, -i * 2.0, o], [o, o, i]]),
        v: mat([[o, one, o], [-one, o, -one], [o, one, o]]),
        u: mat([[o, i, o], [i, o, -i], [o, -i, o]]),
        // i/2 · √2 · [[0,1,0],[1,0,1],[0,1,0]]
        sbar_x: mat([[o, c(0.0, h), o], [c(0.0, h), o, c(0.0, h)], [o, c(0.0, h), o]]),
        // i/2 · √2 · [[0,-i,0],[i,0,-i],[0,i,0]]
        sbar_y: mat([[o, c(h, 0.0), o], [c(-h, 0.0), o, c(h, 0.0)], [o, c(-h, 0.0), o]]),
        sbar_z: mat([[-i, o, o], [o, o, o], [o, o, i]]),
        identity: ComplexMatrix::identity(3),
    }
}

impl Su3Basis {
    pub fn get(&self, label: Label) -> ComplexMatrix {
        match label {
            Label::Sx => self.sigma_x.clone(),
            Label::Sy => self.sigma_y.clone(),
            Label::Sz => self.sigma_z.clone(),
            Label::R => self.r.clone(),
            Label::Q => self.q.clone(),
            Label::T => self.t.clone(),
            Label::V => self.v.clone(),
            Label::U => self.u.clone(),
            Label::I1 => self.identity.scale(I),
        }
    }

    pub fn sigmas(&self) -> [&ComplexMatrix; 3] {
        [&self.sigma_x, &self.sigma_y, &self.sigma_z]
    }

    pub fn sbars(&self) -> [&ComplexMatrix; 3] {
        [&self.sbar_x, &self.sbar_y, &self.sbar_z]
    }

    /// `R, Q, T, V, U`.
    pub fn traceless_complement(&self) -> [&ComplexMatrix; 5] {
        [&self.r, &self.q, &self.t, &self.v, &self.u]
    }

    /// Hermitian spin-1 operators `j_v = -i σ̄_v`.
    pub fn spin_operators(&self) -> [ComplexMatrix; 3] {
        self.sbars().map(|s| s.scale(-I))
    }

    /// `𝒮`.
    pub fn s_span(&self) -> OperatorSpan {
        OperatorSpan::from_matrices(3, self.sigmas(), DEFAULT_SPAN_TOL).expect("skew constants")
    }

    /// `𝒮⊥` inside `u(3)`, including `i𝟏`.
    pub fn s_perp_span(&self) -> OperatorSpan {
        let mut items: Vec<ComplexMatrix> = self.traceless_complement().map(Clone::clone).to_vec();
        items.push(self.get(Label::I1));
        OperatorSpan::from_matrices(3, &items, DEFAULT_SPAN_TOL).expect("skew constants")
    }

    /// Coefficients of `x` in the orthogonal (not normalized) basis
    /// `{σx, σy, σz, R, Q, T, V, U, i1}`, with the reconstruction residual.
    pub fn expand(&self, x: &ComplexMatrix) -> (Vec<(Label, f64)>, f64) {
        let mut rebuilt = ComplexMatrix::zeros(3);
        let mut coeffs = Vec::new();
        for label in Label::ALL {
            let b = self.get(label);
            let coef = b.inner(x) / b.inner(&b);
            rebuilt.axpy_re(coef, &b);
            if coef.abs() > 1e-13 {
                coeffs.push((label, coef));
            }
        }
        (coeffs, (&rebuilt - x).norm())
    }

    /// Evaluates a real linear combination of labelled directions.
    pub fn combine(&self, terms: &[(Label, f64)]) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(3);
        for &(label, coef) in terms {
            out.axpy_re(coef, &self.get(label));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableId {
    /// `[σ_a, σ_b]`
    CommutatorSS,
    /// `[S⊥, S⊥]` (traceless part)
    CommutatorSperpSperp,
    /// `[S⊥, S]`
    CommutatorSperpS,
    /// `-i{S⊥, S⊥}`
    AnticommutatorSperpSperp,
    /// `-i{S, S⊥}`
    AnticommutatorSSperp,
    /// `-i{S, S}`
    AnticommutatorSS,
}

impl TableId {
    pub fn is_commutator(self) -> bool {
        matches!(
            self,
            TableId::CommutatorSS | TableId::CommutatorSperpSperp | TableId::CommutatorSperpS
        )
    }
}

/// One tabulated cell. For commutator tables the cell `(row, col)` claims
/// `[lhs, rhs] = expected`; anticommutator cells claim `-i{lhs, rhs} = expected`.
#[derive(Clone, Debug)]
pub struct TableCell {
    pub lhs: Label,
    pub rhs: Label,
    pub expected: &'static [(Label, f64)],
}

use Label::{Sx, Sy, Sz, I1, Q, R, T, U, V};

const fn cell(lhs: Label, rhs: Label, expected: &'static [(Label, f64)]) -> TableCell {
    TableCell { lhs, rhs, expected }
}

/// Reference structure tables. Commutator cells of the `[S⊥,·]` tables are
/// listed as `[column, row]`, the reading under which most cells agree with
/// direct multiplication; the remaining cells are reported as mismatches.
pub fn reference_tables() -> Vec<(TableId, Vec<TableCell>)> {
    vec![
        (
            TableId::CommutatorSS,
            vec![
                cell(Sx, Sy, &[(Sz, 2.0)]),
                cell(Sy, Sz, &[(Sx, 1.0)]),
                cell(Sz, Sx, &[(Sy, 1.0)]),
                cell(Sx, Sx, &[]),
                cell(Sy, Sy, &[]),
                cell(Sz, Sz, &[]),
            ],
        ),
        (
            TableId::CommutatorSperpSperp,
            vec![
                cell(R, Q, &[(Sz, -2.0)]),
                cell(R, T, &[]),
                cell(Q, T, &[]),
                cell(R, V, &[(Sx, 1.0)]),
                cell(Q, V, &[(Sy, 1.0)]),
                cell(T, V, &[(Sx, 3.0)]),
                cell(R, U, &[(Sy, 1.0)]),
                cell(Q, U, &[(Sx, -1.0)]),
                cell(T, U, &[(Sy, -3.0)]),
                cell(V, U, &[(Sz, 2.0)]),
            ],
        ),
        (
            TableId::CommutatorSperpS,
            vec![
                cell(R, Sx, &[(V, -1.0)]),
                cell(Q, Sx, &[(U, 1.0)]),
                cell(T, Sx, &[(V, -3.0)]),
                cell(V, Sx, &[(T, 2.0), (R, 2.0)]),
                cell(U, Sx, &[(Q, -2.0)]),
                cell(R, Sy, &[(U, -1.0)]),
                cell(Q, Sy, &[(V, -1.0)]),
                cell(T, Sy, &[(U, 3.0)]),
                cell(V, Sy, &[(Q, 2.0)]),
                cell(U, Sy, &[(T, -2.0), (R, 2.0)]),
                cell(R, Sz, &[(Q, 2.0)]),
                cell(Q, Sz, &[(R, -2.0)]),
                cell(T, Sz, &[]),
                cell(V, Sz, &[(U, -1.0)]),
                cell(U, Sz, &[(V, 1.0)]),
            ],
        ),
        (
            TableId::AnticommutatorSperpSperp,
            vec![
                cell(R, R, &[(I1, 4.0 / 3.0), (T, 2.0 / 3.0)]),
                cell(Q, R, &[]),
                cell(Q, Q, &[(I1, 4.0 / 3.0), (T, 2.0 / 3.0)]),
                cell(T, R, &[(R, 2.0)]),
                cell(T, Q, &[(Q, 2.0)]),
                cell(T, T, &[(I1, 4.0), (T, -2.0)]),
                cell(V, R, &[(V, 1.0)]),
                cell(V, Q, &[(U, -1.0)]),
                cell(V, T, &[(V, -1.0)]),
                cell(V, V, &[(I1, 8.0 / 3.0), (T, -2.0 / 3.0), (R, 2.0)]),
                cell(U, R, &[(U, -1.0)]),
                cell(U, Q, &[(V, -1.0)]),
                cell(U, T, &[(U, -1.0)]),
                cell(U, V, &[(Q, -2.0)]),
                cell(U, U, &[(I1, 8.0 / 3.0), (T, -2.0 / 3.0), (R, -2.0)]),
            ],
        ),
        (
            TableId::AnticommutatorSSperp,
            vec![
                cell(Sx, R, &[(Sx, 1.0)]),
                cell(Sx, Q, &[(Sy, 1.0)]),
                cell(Sx, T, &[(Sx, -1.0)]),
                cell(Sx, V, &[]),
                cell(Sx, U, &[(Sz, 2.0)]),
                cell(Sy, R, &[(Sy, -1.0)]),
                cell(Sy, Q, &[(Sx, 1.0)]),
                cell(Sy, T, &[(Sy, -1.0)]),
                cell(Sy, V, &[(Sz, 2.0)]),
                cell(Sy, U, &[]),
                cell(Sz, R, &[]),
                cell(Sz, Q, &[]),
                cell(Sz, T, &[(Sz, 2.0)]),
                cell(Sz, V, &[(Sy, 1.0)]),
                cell(Sz, U, &[(Sx, 1.0)]),
            ],
        ),
        (
            TableId::AnticommutatorSS,
            vec![
                cell(Sx, Sx, &[(I1, 8.0 / 3.0), (T, -2.0 / 3.0), (R, 2.0)]),
                cell(Sy, Sx, &[(Q, 2.0)]),
                cell(Sy, Sy, &[(I1, 8.0 / 3.0), (T, -2.0 / 3.0), (R, -2.0)]),
                cell(Sz, Sx, &[(U, 1.0)]),
                cell(Sz, Sy, &[(V, 1.0)]),
                cell(Sz, Sz, &[(I1, 4.0 / 3.0), (T, 2.0 / 3.0)]),
            ],
        ),
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct TableEntry {
    pub lhs: Label,
    pub rhs: Label,
    pub expected: Vec<(Label, f64)>,
    /// `‖computed - expected‖`.
    pub residual: f64,
    /// Computed value expanded in `{σx, σy, σz, R, Q, T, V, U, i1}`.
    pub recomputed: Vec<(Label, f64)>,
    /// Reconstruction residual of `recomputed`.
    pub recompute_residual: f64,
    /// For commutators: residual with the operands swapped.
    pub swapped_residual: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TableReport {
    pub table_id: TableId,
    pub entries: Vec<TableEntry>,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl TableReport {
    pub fn mismatches(&self) -> impl Iterator<Item = &TableEntry> {
        self.entries.iter().filter(|e| !e.pass)
    }
}

fn evaluate(id: TableId, a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    if id.is_commutator() {
        bracket(a, b)
    } else {
        anti_bracket(a, b).scale(-I)
    }
}

/// Recomputes every reference cell with tolerance [`TABLE_TOL`].
pub fn verify_structure_tables() -> Vec<TableReport> {
    verify_structure_tables_with(TABLE_TOL)
}

pub fn verify_structure_tables_with(tol: f64) -> Vec<TableReport> {
    let basis = build_su3_basis();
    reference_tables()
        .into_iter()
        .map(|(id, cells)| {
            let entries: Vec<TableEntry> = cells
                .into_iter()
                .map(|cell| {
                    let a = basis.get(cell.lhs);
                    let b = basis.get(cell.rhs);
                    let computed = evaluate(id, &a, &b);
                    let expected = basis.combine(cell.expected);
                    let residual = (&computed - &expected).norm();
                    let swapped_residual = id
                        .is_commutator()
                        .then(|| (&evaluate(id, &b, &a) - &expected).norm());
                    let (recomputed, recompute_residual) = basis.expand(&computed);
                    TableEntry {
                        lhs: cell.lhs,
                        rhs: cell.rhs,
                        expected: cell.expected.to_vec(),
                        residual,
                        recomputed,
                        recompute_residual,
                        swapped_residual,
                        pass: residual <= tol,
                    }
                })
                .collect();
            let max_residual = entries.iter().map(|e| e.residual).fold(0.0, f64::max);
            TableReport {
                table_id: id,
                entries,
                max_residual,
                tolerance: tol,
                pass: max_residual <= tol,
            }
        })
        .collect()
}

/// `Σ_j (-i σ̄_j)^2`, which should be `2 · 𝟏`.
pub fn casimir() -> ComplexMatrix {
    let basis = build_su3_basis();
    let mut sum = ComplexMatrix::zeros(3);
    for s in basis.sbars() {
        let j = s.scale(-I);
        sum += &(&j * &j);
    }
    sum
}

#[derive(Clone, Debug, Serialize)]
pub struct RelationCheck {
    pub relation: String,
    pub computed_dim: usize,
    pub expected_dim: usize,
    /// Largest distance of a computed spanning element from the claimed space.
    pub computed_outside_claimed: f64,
    /// Largest distance of a claimed basis element from the computed span.
    pub claimed_outside_computed: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubspaceReport {
    pub checks: Vec<RelationCheck>,
    pub pass: bool,
}

fn compare_spans(relation: String, computed: &OperatorSpan, claimed: &OperatorSpan) -> RelationCheck {
    let a = computed
        .basis()
        .iter()
        .map(|x| claimed.distance(x))
        .fold(0.0, f64::max);
    let b = claimed
        .basis()
        .iter()
        .map(|x| computed.distance(x))
        .fold(0.0, f64::max);
    RelationCheck {
        relation,
        computed_dim: computed.dimension(),
        expected_dim: claimed.dimension(),
        computed_outside_claimed: a,
        claimed_outside_computed: b,
        pass: computed.dimension() == claimed.dimension() && a <= SUBSPACE_TOL && b <= SUBSPACE_TOL,
    }
}

fn pairwise_span(
    left: &[ComplexMatrix],
    right: &[ComplexMatrix],
    op: impl Fn(&ComplexMatrix, &ComplexMatrix) -> ComplexMatrix,
) -> Result<OperatorSpan> {
    let mut span = OperatorSpan::new(3);
    for a in left {
        for b in right {
            span.insert(&op(a, b), DEFAULT_SPAN_TOL)?;
        }
    }
    Ok(span)
}

/// Checks the bracket/anticommutator relations between `𝒮` and `𝒮⊥` and the
/// `ad_𝒮` orbits of `R, Q, T, V, U`.
pub fn verify_subspace_relations() -> Result<SubspaceReport> {
    let basis = build_su3_basis();
    let s: Vec<ComplexMatrix> = basis.sigmas().map(Clone::clone).to_vec();
    let traceless: Vec<ComplexMatrix> = basis.traceless_complement().map(Clone::clone).to_vec();
    let mut perp = traceless.clone();
    perp.push(basis.get(Label::I1));

    let s_span = basis.s_span();
    let perp_span = basis.s_perp_span();
    let traceless_span = OperatorSpan::from_matrices(3, &traceless, DEFAULT_SPAN_TOL)?;

    let comm = |a: &ComplexMatrix, b: &ComplexMatrix| bracket(a, b);
    // i{X, Y} for skew X, Y is skew-Hermitian again.
    let acomm = |a: &ComplexMatrix, b: &ComplexMatrix| anti_bracket(a, b).scale(I);

    let mut checks = vec![
        compare_spans("[S,S] = S".into(), &pairwise_span(&s, &s, comm)?, &s_span),
        compare_spans(
            "[S⊥,S] = S⊥/span{i1}".into(),
            &pairwise_span(&perp, &s, comm)?,
            &traceless_span,
        ),
        compare_spans("[S⊥,S⊥] = S".into(), &pairwise_span(&perp, &perp, comm)?, &s_span),
        compare_spans("i{S,S} = S⊥".into(), &pairwise_span(&s, &s, acomm)?, &perp_span),
        compare_spans("i{S⊥,S} = S".into(), &pairwise_span(&perp, &s, acomm)?, &s_span),
        compare_spans(
            "i{S⊥,S⊥} = S⊥".into(),
            &pairwise_span(&perp, &perp, acomm)?,
            &perp_span,
        ),
    ];

    for (label, l) in [Label::R, Label::Q, Label::T, Label::V, Label::U]
        .into_iter()
        .zip(&traceless)
    {
        let orbit = lie::ad_orbit(&s_span, l, DEFAULT_SPAN_TOL)?;
        checks.push(compare_spans(
            format!("ad_S orbit of {label} = S⊥/span{{i1}}"),
            &orbit,
            &traceless_span,
        ));
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(SubspaceReport { checks, pass })
}
