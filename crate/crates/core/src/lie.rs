//! Lie-algebra closures, adjoint orbits, and the controllability and
//! observability verdicts built on them.
//!
//! Both closures follow the same breadth-first sweep: every element accepted
//! in the previous sweep is bracketed against the whole current span (or the
//! acting algebra, for orbits), and the brackets are offered to
//! [`OperatorSpan::insert`]. A sweep that accepts nothing is a fixpoint.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{build_controls, build_drift, Couplings, ObservableSet, DIM};
use crate::operator::{bracket, su_basis, ComplexMatrix, OperatorSpan, DEFAULT_SPAN_TOL};

/// Equality threshold for the parameter-condition cross-check.
pub const PARAM_EQ_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosureOptions {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for ClosureOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_SPAN_TOL,
            max_sweeps: 20,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosureReport {
    pub generators: Vec<String>,
    pub ambient_dim: usize,
    pub dimension: usize,
    pub controllable: bool,
    pub iterations: usize,
    pub per_iteration_dims: Vec<usize>,
    pub tolerance_used: f64,
    /// `γ1 ≠ γ2` and `J12 ≠ 0`, when the report comes from a model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameter_condition: Option<bool>,
    pub notes: Vec<String>,
}

fn check_generator(g: &ComplexMatrix, n: usize) -> Result<()> {
    if g.dim() != n {
        return Err(Error::DimensionMismatch {
            left: n,
            right: g.dim(),
        });
    }
    let scale = g.norm().max(1.0);
    let deviation = g.skew_deviation();
    if deviation > 1e-10 * scale {
        return Err(Error::NotSkewHermitian { deviation });
    }
    let trace = g.trace().norm();
    if trace > 1e-10 * scale {
        return Err(Error::NotTraceless { trace });
    }
    Ok(())
}

/// Runs sweeps until nothing new is accepted. `new_elems` holds the frontier;
/// `partners` yields what each frontier element is bracketed with.
fn sweep_to_fixpoint(
    span: &mut OperatorSpan,
    mut frontier: Vec<ComplexMatrix>,
    fixed_partners: Option<&OperatorSpan>,
    opts: ClosureOptions,
) -> Result<(usize, Vec<usize>)> {
    let mut dims = vec![span.dimension()];
    let mut sweeps = 0;
    loop {
        if sweeps == opts.max_sweeps {
            return Err(Error::IterationCap {
                cap: opts.max_sweeps,
                dimension: span.dimension(),
            });
        }
        sweeps += 1;
        let partners: Vec<ComplexMatrix> = match fixed_partners {
            Some(alg) => alg.basis().to_vec(),
            None => span.basis().to_vec(),
        };
        let candidates: Vec<ComplexMatrix> = frontier
            .par_iter()
            .flat_map_iter(|x| partners.iter().map(move |y| bracket(y, x)))
            .collect();
        let mut next = Vec::new();
        for z in &candidates {
            if span.dimension() == span.ambient_dim() * span.ambient_dim() {
                break;
            }
            if span.insert_unchecked(z, z.norm(), opts.tol) {
                next.push(span.basis().last().expect("just inserted").clone());
            }
        }
        dims.push(span.dimension());
        if next.is_empty() {
            return Ok((sweeps, dims));
        }
        frontier = next;
    }
}

/// Real Lie algebra generated by skew-Hermitian traceless `generators`.
pub fn lie_closure(
    generators: &[ComplexMatrix],
    opts: ClosureOptions,
) -> Result<(OperatorSpan, ClosureReport)> {
    let labels: Vec<String> = (0..generators.len()).map(|k| format!("g{k}")).collect();
    lie_closure_labeled(generators, &labels, opts)
}

pub fn lie_closure_labeled(
    generators: &[ComplexMatrix],
    labels: &[String],
    opts: ClosureOptions,
) -> Result<(OperatorSpan, ClosureReport)> {
    let n = generators.first().map(ComplexMatrix::dim).unwrap_or(1);
    let mut span = OperatorSpan::new(n);
    let mut frontier = Vec::new();
    for g in generators {
        check_generator(g, n)?;
        let nrm = g.norm();
        if nrm == 0.0 {
            continue;
        }
        // Normalized first so the tolerance does not depend on γ or J scales.
        let unit = g.scale_re(1.0 / nrm);
        if span.insert_unchecked(&unit, 1.0, opts.tol) {
            frontier.push(span.basis().last().expect("just inserted").clone());
        }
    }
    let (iterations, per_iteration_dims) = sweep_to_fixpoint(&mut span, frontier, None, opts)?;
    let dimension = span.dimension();
    let report = ClosureReport {
        generators: labels.to_vec(),
        ambient_dim: n,
        dimension,
        controllable: dimension == n * n - 1,
        iterations,
        per_iteration_dims,
        tolerance_used: opts.tol,
        parameter_condition: None,
        notes: Vec::new(),
    };
    Ok((span, report))
}

/// Smallest subspace containing `seeds` and closed under `ad_X` for every `X`
/// in `algebra`.
pub fn ad_orbit_many(
    algebra: &OperatorSpan,
    seeds: &[ComplexMatrix],
    opts: ClosureOptions,
) -> Result<OperatorSpan> {
    let n = algebra.ambient_dim();
    let mut span = OperatorSpan::new(n);
    let mut frontier = Vec::new();
    for s in seeds {
        check_generator(s, n)?;
        let nrm = s.norm();
        if nrm == 0.0 {
            continue;
        }
        if span.insert_unchecked(&s.scale_re(1.0 / nrm), 1.0, opts.tol) {
            frontier.push(span.basis().last().expect("just inserted").clone());
        }
    }
    sweep_to_fixpoint(&mut span, frontier, Some(algebra), opts)?;
    Ok(span)
}

/// `⊕_k ad_algebra^k seed` with default sweep options.
pub fn ad_orbit(algebra: &OperatorSpan, seed: &ComplexMatrix, tol: f64) -> Result<OperatorSpan> {
    ad_orbit_many(
        algebra,
        std::slice::from_ref(seed),
        ClosureOptions {
            tol,
            ..Default::default()
        },
    )
}

/// `γ1 ≠ γ2` and `J12 ≠ 0` at [`PARAM_EQ_TOL`].
pub fn parameter_condition(c: &Couplings) -> bool {
    (c.gamma1 - c.gamma2).abs() > PARAM_EQ_TOL && c.j12.abs() > PARAM_EQ_TOL
}

/// `A, B_x, B_y, B_z` with their labels.
pub fn model_generators(c: &Couplings) -> (Vec<ComplexMatrix>, Vec<String>) {
    let mut gens = vec![build_drift(c)];
    gens.extend(build_controls(c));
    let labels = ["A", "B_x", "B_y", "B_z"].map(String::from).to_vec();
    (gens, labels)
}

fn model_notes(c: &Couplings, dimension: usize, controllable: bool) -> Vec<String> {
    let mut notes = Vec::new();
    let cond = parameter_condition(c);
    if cond != controllable {
        notes.push(format!(
            "WARNING: closure dimension {dimension} disagrees with the parameter condition \
             (gamma1 != gamma2 and J12 != 0 is {cond})"
        ));
    }
    let gap = (c.gamma1 - c.gamma2).abs();
    let scale = c.gamma1.abs().max(c.gamma2.abs()).max(1.0);
    if gap > PARAM_EQ_TOL && gap < 1e-6 * scale {
        notes.push(format!("WARNING: near-degenerate gyromagnetic ratios (|gamma1 - gamma2| = {gap:.3e})"));
    }
    if c.j12.abs() > PARAM_EQ_TOL && c.j12.abs() < 1e-6 * scale {
        notes.push(format!("WARNING: near-zero exchange constant (|J12| = {:.3e})", c.j12.abs()));
    }
    if c.j12.abs() <= PARAM_EQ_TOL && gap > PARAM_EQ_TOL && dimension != 3 {
        notes.push(format!(
            "J12 = 0 with distinct gyromagnetic ratios: the closure has dimension {dimension} \
             (independent su(2) on each spin), not the dimension 3 of a single su(2)"
        ));
    }
    notes
}

/// Closure of `{A, B_x, B_y, B_z}` plus the parameter cross-check.
pub fn controllability_verdict(c: &Couplings) -> Result<ClosureReport> {
    controllability_verdict_with(c, ClosureOptions::default()).map(|(_, r)| r)
}

pub fn controllability_verdict_with(
    c: &Couplings,
    opts: ClosureOptions,
) -> Result<(OperatorSpan, ClosureReport)> {
    let (gens, labels) = model_generators(c);
    let (span, mut report) = lie_closure_labeled(&gens, &labels, opts)?;
    report.parameter_condition = Some(parameter_condition(c));
    report.notes = model_notes(c, report.dimension, report.controllable);
    Ok((span, report))
}

#[derive(Clone, Debug, Serialize)]
pub struct ObservabilityReport {
    pub algebra_dim: usize,
    pub space_dim: usize,
    pub observable: bool,
    pub vperp_dim: usize,
    /// Orthonormal skew-Hermitian basis of the complement of `𝒱` in `su(9)`;
    /// [`OperatorSpan::hermitian_basis`] gives the state perturbations.
    #[serde(skip)]
    pub vperp_basis: OperatorSpan,
}

/// `𝒱 = ⊕_k ad_ℒ^k span{σ̄_v ⊗ 𝟏 + 𝟏 ⊗ σ̄_v}`; observable iff `𝒱 = su(9)`.
pub fn observability_verdict(c: &Couplings) -> Result<ObservabilityReport> {
    let opts = ClosureOptions::default();
    let (algebra, _) = controllability_verdict_with(c, opts)?;
    let seeds = ObservableSet::new().collective_generators();
    let v = ad_orbit_many(&algebra, &seeds, opts)?;
    let vperp = v.complement_in(&su_basis(DIM), opts.tol);
    let full = DIM * DIM - 1;
    Ok(ObservabilityReport {
        algebra_dim: algebra.dimension(),
        space_dim: v.dimension(),
        observable: v.dimension() == full,
        vperp_dim: vperp.dimension(),
        vperp_basis: vperp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::random_su;
    use crate::su3::build_su3_basis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cp(g1: f64, g2: f64, j: f64) -> Couplings {
        Couplings::new(g1, g2, j)
    }

    #[test]
    fn single_generator_is_abelian() {
        let bz = build_controls(&cp(1.0, 2.0, 0.5))[2].clone();
        let (span, report) = lie_closure(&[bz], ClosureOptions::default()).unwrap();
        assert_eq!(span.dimension(), 1);
        assert_eq!(report.per_iteration_dims, vec![1, 1]);
        assert!(!report.controllable);
    }

    #[test]
    fn equal_ratios_give_u2() {
        let r = controllability_verdict(&cp(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(r.dimension, 4);
        assert!(!r.controllable);
        assert_eq!(r.parameter_condition, Some(false));
    }

    #[test]
    fn controllable_case() {
        let r = controllability_verdict(&cp(1.0, 2.0, 0.5)).unwrap();
        assert_eq!(r.dimension, 80);
        assert!(r.controllable);
        assert!(r.notes.is_empty(), "{:?}", r.notes);
        let d = &r.per_iteration_dims;
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(d[d.len() - 1], d[d.len() - 2]);
    }

    #[test]
    fn zero_exchange_cases() {
        let distinct = controllability_verdict(&cp(1.0, 2.0, 0.0)).unwrap();
        assert_eq!(distinct.dimension, 6);
        assert!(!distinct.controllable);
        assert!(distinct.notes.iter().any(|n| n.contains("dimension 6")));
        let equal = controllability_verdict(&cp(1.0, 1.0, 0.0)).unwrap();
        assert_eq!(equal.dimension, 3);
        assert!(equal.notes.is_empty());
    }

    #[test]
    fn rejects_bad_generators() {
        let h = ComplexMatrix::identity(3);
        assert!(matches!(
            lie_closure(&[h], ClosureOptions::default()),
            Err(Error::NotSkewHermitian { .. })
        ));
        let i1 = ComplexMatrix::identity(3).scale(crate::operator::I);
        assert!(matches!(
            lie_closure(&[i1], ClosureOptions::default()),
            Err(Error::NotTraceless { .. })
        ));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let (gens, _) = model_generators(&cp(1.0, 2.0, 0.5));
        let err = lie_closure(&gens, ClosureOptions { tol: 1e-9, max_sweeps: 1 }).unwrap_err();
        assert!(matches!(err, Error::IterationCap { cap: 1, .. }));
    }

    #[test]
    fn closure_is_bracket_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // Two random elements of su(3) generate all of su(3).
        let gens = [random_su(3, &mut rng), random_su(3, &mut rng)];
        let (span, report) = lie_closure(&gens, ClosureOptions::default()).unwrap();
        assert_eq!(report.dimension, 8);
        for a in span.basis() {
            for b in span.basis() {
                assert!(span.distance(&bracket(a, b)) <= 1e-8);
            }
        }
    }

    #[test]
    fn orbit_of_r_under_s() {
        let b = build_su3_basis();
        let orbit = ad_orbit(&b.s_span(), &b.r, DEFAULT_SPAN_TOL).unwrap();
        assert_eq!(orbit.dimension(), 5);
    }

    #[test]
    fn orbit_under_full_algebra_is_everything() {
        let full = su_basis(9);
        let seed = full.basis()[17].clone();
        assert_eq!(ad_orbit(&full, &seed, DEFAULT_SPAN_TOL).unwrap().dimension(), 80);
    }

    #[test]
    fn observability_controllable() {
        let r = observability_verdict(&cp(1.0, 2.0, 0.5)).unwrap();
        assert!(r.observable);
        assert_eq!(r.space_dim, 80);
        assert_eq!(r.vperp_dim, 0);
    }

    #[test]
    fn observability_equal_ratios() {
        let r = observability_verdict(&cp(1.0, 1.0, 0.5)).unwrap();
        assert!(!r.observable);
        assert!(r.vperp_dim > 0);
        assert_eq!(r.space_dim + r.vperp_dim, 80);
    }
}
