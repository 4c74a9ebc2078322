//! Parameter identification from magnetization records.
//!
//! The fit is a separable least-squares problem. For fixed couplings the
//! outputs are linear in the initial state, `M_v(t) = Tr(O_v(t) ρ0)` with the
//! Heisenberg-picture observable `O_v(t) = U(t)^† S_v U(t)`. Writing
//! `ρ0 = 𝟏/9 + Σ_k c_k H_k` over an orthonormal Hermitian basis adapted to the
//! parity split, the coordinates `c` are solved exactly at every trial
//! `(γ1, γ2, J12)` and only those three numbers are searched, by
//! Levenberg–Marquardt from several starts. The search runs separately for
//! `J12 > 0` and `J12 < 0`, so both members of an equivalence class come out
//! as explicit candidates.
//!
//! The state is not constrained to be positive semidefinite: a partner state
//! with the even component negated is usually not a valid density matrix, and
//! a constrained fit could not reach it. Each candidate reports whether its
//! state is physical.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::cartan::{build_parity_decomposition, ParityDecomposition};
use crate::dynamics::{flip_partner_state, propagate_matrix, sample_propagators, ControlSchedule, MagnetizationTrace};
use crate::error::{Error, Result};
use crate::lie::controllability_verdict;
use crate::model::{Couplings, ObservableSet, DIM, STATE_TOL};
use crate::operator::{ComplexMatrix, I};

/// Relative threshold of [`vandermonde_distinguishability`].
pub const VANDERMONDE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VandermondeResult {
    pub det: f64,
    /// `Π_{i<j} (|x_i| + |x_j|)`.
    pub scale: f64,
    pub indistinguishable: bool,
    /// Whether the determinant came from exact integer elimination.
    pub exact: bool,
}

/// Fraction-free elimination; `None` on overflow or non-integer input.
fn det_integer(x: [f64; 4]) -> Option<i128> {
    if x.iter().any(|v| v.fract() != 0.0 || v.abs() > 1e6) {
        return None;
    }
    let mut m = [[0i128; 4]; 4];
    for (r, &v) in x.iter().enumerate() {
        let v = v as i128;
        m[r] = [1, v, v * v, v * v * v];
    }
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..3 {
        if m[k][k] == 0 {
            match (k + 1..4).find(|&r| m[r][k] != 0) {
                Some(r) => {
                    m.swap(k, r);
                    sign = -sign;
                }
                None => return Some(0),
            }
        }
        for i in k + 1..4 {
            for j in k + 1..4 {
                let num = m[i][j].checked_mul(m[k][k])?.checked_sub(m[i][k].checked_mul(m[k][j])?)?;
                m[i][j] = num / prev;
            }
        }
        prev = m[k][k];
    }
    Some(sign * m[3][3])
}

/// Determinant of the `4 x 4` matrix with rows `(1, x, x², x³)` for
/// `x ∈ {g1, g2, g1p, g2p}`; zero exactly when two arguments coincide.
pub fn vandermonde_distinguishability(g1: f64, g2: f64, g1p: f64, g2p: f64) -> VandermondeResult {
    let x = [g1, g2, g1p, g2p];
    let mut scale = 1.0;
    for i in 0..4 {
        for j in i + 1..4 {
            scale *= x[i].abs() + x[j].abs();
        }
    }
    let (det, exact) = match det_integer(x) {
        Some(d) => (d as f64, true),
        None => (Matrix4::from_fn(|r, c| x[r].powi(c as i32)).determinant(), false),
    };
    VandermondeResult {
        det,
        scale,
        indistinguishable: det.abs() <= VANDERMONDE_TOL * scale,
        exact,
    }
}

/// Schedules with their measured traces on the schedules' sample grids.
#[derive(Clone, Debug)]
pub struct ExperimentRecord {
    schedules: Vec<ControlSchedule>,
    traces: Vec<MagnetizationTrace>,
    samples_per_segment: usize,
}

impl ExperimentRecord {
    pub fn new(schedules: Vec<ControlSchedule>, traces: Vec<MagnetizationTrace>) -> Result<Self> {
        if schedules.is_empty() {
            return Err(Error::InvalidRecord("no schedules".into()));
        }
        if schedules.len() != traces.len() {
            return Err(Error::InvalidRecord(format!(
                "{} schedules but {} traces",
                schedules.len(),
                traces.len()
            )));
        }
        let first = schedules[0].segments().len();
        if traces[0].len() % first != 0 || traces[0].is_empty() {
            return Err(Error::InvalidRecord(format!(
                "trace 0 has {} rows, not a multiple of its {first} segments",
                traces[0].len()
            )));
        }
        let spp = traces[0].len() / first;
        for (k, (s, t)) in schedules.iter().zip(&traces).enumerate() {
            let grid = s.sample_times(spp);
            if grid.len() != t.len() {
                return Err(Error::InvalidRecord(format!(
                    "trace {k} has {} rows, expected {} ({spp} per segment)",
                    t.len(),
                    grid.len()
                )));
            }
            if let Some((a, b)) = grid.iter().zip(&t.times).find(|(a, b)| (*a - *b).abs() > 1e-9 * (1.0 + a.abs())) {
                return Err(Error::InvalidRecord(format!(
                    "trace {k}: sample time {b} does not match schedule grid time {a}"
                )));
            }
        }
        Ok(Self {
            schedules,
            traces,
            samples_per_segment: spp,
        })
    }

    /// Noiseless record from a model; `rho0` need only be Hermitian with unit trace.
    pub fn simulate(
        couplings: &Couplings,
        rho0: &ComplexMatrix,
        schedules: Vec<ControlSchedule>,
        samples_per_segment: usize,
    ) -> Result<Self> {
        let traces = schedules
            .par_iter()
            .map(|s| propagate_matrix(couplings, rho0, s, samples_per_segment).map(|(t, _)| t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(schedules, traces)
    }

    /// Copy with independent `N(0, sigma²)` noise on every output sample.
    pub fn with_noise(&self, sigma: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for t in &mut out.traces {
            for col in [&mut t.mx, &mut t.my, &mut t.mz] {
                for x in col.iter_mut() {
                    *x += sigma * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
        out
    }

    pub fn schedules(&self) -> &[ControlSchedule] {
        &self.schedules
    }

    pub fn traces(&self) -> &[MagnetizationTrace] {
        &self.traces
    }

    pub fn samples_per_segment(&self) -> usize {
        self.samples_per_segment
    }

    /// Samples stacked as `(schedule, time, component)`.
    fn observations(&self) -> DVector<f64> {
        let data: Vec<f64> = self
            .traces
            .iter()
            .flat_map(|t| (0..t.len()).flat_map(move |i| t.sample(i)))
            .collect();
        DVector::from_vec(data)
    }
}

/// Length-81 real vector with `vech(H) · vech(O) = Tr(H O)` for Hermitian `H`, `O`.
fn vech(h: &ComplexMatrix, out: &mut [f64]) {
    let s = std::f64::consts::SQRT_2;
    let mut k = 0;
    for i in 0..DIM {
        out[k] = h.get(i, i).re;
        k += 1;
    }
    for i in 0..DIM {
        for j in i + 1..DIM {
            let z = h.get(i, j);
            out[k] = s * z.re;
            out[k + 1] = s * z.im;
            k += 2;
        }
    }
}

/// Orthonormal traceless Hermitian basis, even class first.
struct StateBasis {
    decomp: ParityDecomposition,
    herm: Vec<ComplexMatrix>,
    /// Rows are `vech(H_k)`.
    transform: DMatrix<f64>,
}

impl StateBasis {
    fn new() -> Result<Self> {
        let decomp = build_parity_decomposition(2)?;
        let herm: Vec<ComplexMatrix> = decomp
            .even_space
            .basis()
            .iter()
            .chain(decomp.odd_space.basis())
            .map(|b| b.scale(-I))
            .collect();
        let mut transform = DMatrix::zeros(herm.len(), DIM * DIM);
        let mut row = vec![0.0; DIM * DIM];
        for (k, h) in herm.iter().enumerate() {
            vech(h, &mut row);
            transform.row_mut(k).copy_from_slice(&row);
        }
        Ok(Self {
            decomp,
            herm,
            transform,
        })
    }

    fn state(&self, coords: &DVector<f64>) -> ComplexMatrix {
        let mut rho = ComplexMatrix::identity(DIM).scale_re(1.0 / DIM as f64);
        for (c, h) in coords.iter().zip(&self.herm) {
            rho.axpy_re(*c, h);
        }
        rho
    }
}

struct Fit {
    coords: DVector<f64>,
    residual: DVector<f64>,
    cost: f64,
    rank: usize,
}

struct Problem<'a> {
    record: &'a ExperimentRecord,
    basis: &'a StateBasis,
    y: DVector<f64>,
    obs: ObservableSet,
}

impl<'a> Problem<'a> {
    fn new(record: &'a ExperimentRecord, basis: &'a StateBasis) -> Self {
        Self {
            record,
            basis,
            y: record.observations(),
            obs: ObservableSet::new(),
        }
    }

    /// Transposed design matrix, `80 x (3 · samples)`.
    fn design_t(&self, c: &Couplings) -> Result<DMatrix<f64>> {
        let n = self.y.len();
        let mut v = DMatrix::zeros(DIM * DIM, n);
        let mut col = 0;
        let mut buf = vec![0.0; DIM * DIM];
        for s in &self.record.schedules {
            let (props, _) = sample_propagators(c, s, self.record.samples_per_segment)?;
            for u in &props {
                let ud = u.adjoint();
                for sv in &self.obs.s_tot {
                    let o = &ud * &(sv * u);
                    vech(&o, &mut buf);
                    v.column_mut(col).copy_from_slice(&buf);
                    col += 1;
                }
            }
        }
        Ok(&self.basis.transform * v)
    }

    fn fit(&self, c: &Couplings) -> Result<Fit> {
        let dt = self.design_t(c)?;
        // Householder QR of the design, then a rank-revealing SVD of the small
        // triangular factor: D = Q R, R = U S Vᵀ, c = V S⁺ Uᵀ Qᵀ y.
        let design = dt.transpose();
        let qr = design.clone().qr();
        let mut qty = self.y.clone();
        qr.q_tr_mul(&mut qty);
        let m = dt.nrows().min(design.nrows());
        let r = qr.r();
        let svd = r.svd(true, true);
        let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
        let smax = svd.singular_values.max();
        let uty = u.transpose() * qty.rows(0, m);
        let mut scaled = DVector::zeros(uty.len());
        let mut rank = 0;
        for (k, &sk) in svd.singular_values.iter().enumerate() {
            if sk > 1e-12 * smax && sk > 0.0 {
                scaled[k] = uty[k] / sk;
                rank += 1;
            }
        }
        let coords = vt.transpose() * scaled;
        let residual = &self.y - &design * &coords;
        let cost = residual.norm_squared();
        Ok(Fit {
            coords,
            residual,
            cost,
            rank,
        })
    }
}

fn couplings_of(theta: &Vector3<f64>, sign: f64) -> Couplings {
    Couplings::new(theta[0], theta[1], sign * theta[2].exp())
}

/// Settings for [`identify`].
#[derive(Clone, Debug, PartialEq)]
pub struct IdentifyConfig {
    /// Seeded random starts, in addition to those built on the moment estimate.
    pub starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Range of the log-uniform random starts for each `γ`.
    pub gamma_range: (f64, f64),
    /// Range of the log-uniform random starts for `|J12|`.
    pub j_range: (f64, f64),
    /// `|J12|` values paired with the moment estimate of `γ`.
    pub moment_j_starts: Vec<f64>,
    /// Stop launching new batches of starts once a sign has a fit this good
    /// (relative to `‖y‖²`).
    pub early_exit: Option<f64>,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        Self {
            starts: 8,
            seed: 0,
            max_iterations: 200,
            gamma_range: (0.2, 5.0),
            j_range: (0.05, 5.0),
            moment_j_starts: vec![0.3, 1.0, 3.0],
            early_exit: Some(1e-20),
        }
    }
}

/// Starts are launched in fixed-size batches so the result does not depend on
/// the thread count.
const BATCH: usize = 4;

#[derive(Clone, Debug)]
struct LmOutcome {
    theta: Vector3<f64>,
    cost: f64,
    iterations: usize,
    converged: bool,
    start_index: usize,
}

fn lm(problem: &Problem, theta0: Vector3<f64>, sign: f64, cfg: &IdentifyConfig, start_index: usize) -> LmOutcome {
    let eval = |t: &Vector3<f64>| -> Option<Fit> {
        if !t.iter().all(|x| x.is_finite()) || t[2] > 10.0 {
            return None;
        }
        problem.fit(&couplings_of(t, sign)).ok()
    };
    let ynorm = problem.y.norm_squared().max(1.0);
    let floor = 1e-28 * ynorm;
    let mut theta = theta0;
    let Some(mut fit) = eval(&theta) else {
        return LmOutcome {
            theta,
            cost: f64::INFINITY,
            iterations: 0,
            converged: false,
            start_index,
        };
    };
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        if fit.cost <= floor {
            converged = true;
            break;
        }
        let mut jac = DMatrix::zeros(fit.residual.len(), 3);
        let mut ok = true;
        for k in 0..3 {
            let h = 1e-6 * theta[k].abs().max(1.0);
            let mut tp = theta;
            let mut tm = theta;
            tp[k] += h;
            tm[k] -= h;
            match (eval(&tp), eval(&tm)) {
                (Some(p), Some(m)) => jac.set_column(k, &((&p.residual - &m.residual) / (2.0 * h))),
                _ => ok = false,
            }
        }
        if !ok {
            break;
        }
        let jtj: Matrix3<f64> = (jac.transpose() * &jac).fixed_view::<3, 3>(0, 0).into();
        let g: Vector3<f64> = (jac.transpose() * &fit.residual).fixed_rows::<3>(0).into();
        // r = y - D c, so ∂r/∂θ = jac and the Gauss–Newton step solves (JᵀJ) δ = -Jᵀ r.
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for k in 0..3 {
                a[(k, k)] += lambda * (jtj[(k, k)] + 1e-12);
            }
            let Some(step) = a.lu().solve(&(-g)) else {
                lambda *= 4.0;
                continue;
            };
            let trial = theta + step;
            match eval(&trial) {
                Some(f) if f.cost < fit.cost => {
                    let small_step = step.norm() <= 1e-12 * (1.0 + theta.norm());
                    let small_gain = fit.cost - f.cost <= 1e-15 * fit.cost;
                    theta = trial;
                    fit = f;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    if small_step || small_gain {
                        converged = true;
                    }
                    break;
                }
                _ => lambda *= 4.0,
            }
        }
        if !improved {
            // No descent direction at any damping: a stationary point.
            converged = true;
        }
        if converged {
            break;
        }
    }
    LmOutcome {
        theta,
        cost: fit.cost,
        iterations,
        converged,
        start_index,
    }
}

/// One member of the fitted equivalence class.
#[derive(Clone, Debug, Serialize)]
pub struct Candidate {
    pub gamma1: f64,
    pub gamma2: f64,
    pub j_signed: f64,
    /// Hermitian, unit trace; not necessarily positive semidefinite.
    pub rho0_hat: ComplexMatrix,
    /// Sum of squared output misfits.
    pub residual: f64,
    pub min_eigenvalue: f64,
    pub physical: bool,
    pub converged: bool,
    pub iterations: usize,
    pub start_index: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentificationResult {
    pub gamma1_hat: f64,
    pub gamma2_hat: f64,
    pub abs_j_hat: f64,
    /// Positive-`J12` candidate first.
    pub candidates: Vec<Candidate>,
    pub permutation_note: String,
    pub moment_estimate: Option<MomentEstimate>,
    /// `‖ρ̂₋ - flip(ρ̂₊)‖_F` between the two candidates' states.
    pub flip_mismatch: f64,
    pub design_rank: usize,
    pub runs: usize,
    pub warnings: Vec<String>,
}

/// Sum of squared misfits after solving for the best initial state at fixed couplings.
pub fn residual_at(record: &ExperimentRecord, couplings: &Couplings) -> Result<f64> {
    let basis = StateBasis::new()?;
    Problem::new(record, &basis).fit(couplings).map(|f| f.cost)
}

fn log_uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    (rng.random_range(lo.ln()..=hi.ln())).exp()
}

fn canonical(theta: Vector3<f64>) -> (Vector3<f64>, bool) {
    if theta[0] > theta[1] {
        (Vector3::new(theta[1], theta[0], theta[2]), true)
    } else {
        (theta, false)
    }
}

pub fn identify(record: &ExperimentRecord, cfg: &IdentifyConfig) -> Result<IdentificationResult> {
    let basis = StateBasis::new()?;
    let problem = Problem::new(record, &basis);
    let ynorm = problem.y.norm_squared().max(1.0);
    let mut warnings = Vec::new();

    let moment = match moment_gamma_estimate(record) {
        Ok(m) => Some(m),
        Err(e) => {
            warnings.push(format!("moment estimate unavailable ({e}); using random starts only"));
            None
        }
    };
    let mut starts: Vec<Vector3<f64>> = Vec::new();
    if let Some(m) = &moment {
        for &j in &cfg.moment_j_starts {
            starts.push(Vector3::new(m.gamma1, m.gamma2, j.ln()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.starts {
        let g1 = log_uniform(&mut rng, cfg.gamma_range);
        let g2 = log_uniform(&mut rng, cfg.gamma_range);
        let j = log_uniform(&mut rng, cfg.j_range);
        starts.push(Vector3::new(g1, g2, j.ln()));
    }

    let mut best: [Option<LmOutcome>; 2] = [None, None];
    let mut runs = 0;
    for (si, sign) in [1.0, -1.0].into_iter().enumerate() {
        for (b, batch) in starts.chunks(BATCH).enumerate() {
            let outcomes: Vec<LmOutcome> = batch
                .par_iter()
                .enumerate()
                .map(|(k, t)| lm(&problem, *t, sign, cfg, b * BATCH + k))
                .collect();
            runs += outcomes.len();
            for o in outcomes {
                let better = match &best[si] {
                    None => true,
                    Some(cur) => o.cost < cur.cost,
                };
                if better {
                    best[si] = Some(o);
                }
            }
            let done = cfg
                .early_exit
                .zip(best[si].as_ref())
                .is_some_and(|(tol, o)| o.cost <= tol * ynorm);
            if done {
                break;
            }
        }
    }
    let [Some(pos), Some(neg)] = best else {
        return Err(Error::NonConvergence("no optimizer start was evaluated".into()));
    };
    if !pos.cost.is_finite() || !neg.cost.is_finite() {
        return Err(Error::NonConvergence(format!(
            "every start failed to produce a finite residual (J > 0: {:.3e}, J < 0: {:.3e})",
            pos.cost, neg.cost
        )));
    }
    if !pos.converged && !neg.converged {
        return Err(Error::NonConvergence(format!(
            "no start converged within {} iterations; best residuals {:.3e} (J > 0) and {:.3e} (J < 0)",
            cfg.max_iterations, pos.cost, neg.cost
        )));
    }

    let mut swapped = false;
    let mut candidates = Vec::with_capacity(2);
    let mut ranks = Vec::with_capacity(2);
    for (o, sign) in [(&pos, 1.0), (&neg, -1.0)] {
        let (theta, sw) = canonical(o.theta);
        swapped |= sw;
        let c = couplings_of(&theta, sign);
        let fit = problem.fit(&c)?;
        ranks.push(fit.rank);
        let rho = basis.state(&fit.coords).hermitian_part();
        let min_eigenvalue = rho.hermitian_eigenvalues()[0];
        candidates.push(Candidate {
            gamma1: c.gamma1,
            gamma2: c.gamma2,
            j_signed: c.j12,
            rho0_hat: rho,
            residual: fit.cost,
            min_eigenvalue,
            physical: min_eigenvalue >= -STATE_TOL,
            converged: o.converged,
            iterations: o.iterations,
            start_index: o.start_index,
        });
    }
    let lead = if candidates[0].residual <= candidates[1].residual { 0 } else { 1 };
    let (g1, g2, absj) = (
        candidates[lead].gamma1,
        candidates[lead].gamma2,
        candidates[lead].j_signed.abs(),
    );
    let flipped = flip_partner_state(&candidates[0].rho0_hat, &basis.decomp)?;
    let flip_mismatch = (&flipped - &candidates[1].rho0_hat).norm();

    let design_rank = ranks[lead];
    if design_rank < basis.herm.len() {
        warnings.push(format!(
            "design rank {design_rank} < {}: the initial state is underdetermined by these schedules",
            basis.herm.len()
        ));
    }
    let sens = sensitivity(&problem, &canonical(best_theta(&pos, &neg)).0, if lead == 0 { 1.0 } else { -1.0 })?;
    let insensitive = |s: f64| s <= 1e-8 * ynorm.sqrt();
    if insensitive(sens[2]) {
        warnings.push("outputs are insensitive to J12: the exchange constant is underdetermined".into());
    }
    if insensitive(sens[0]) || insensitive(sens[1]) {
        warnings.push("outputs are insensitive to a gyromagnetic ratio: gamma is underdetermined".into());
    }
    let verdict = controllability_verdict(&Couplings::new(g1, g2, absj))?;
    if !verdict.controllable {
        warnings.push(format!(
            "estimate lies in a non-controllable regime (closure dimension {}): identifiability is not guaranteed",
            verdict.dimension
        ));
    }

    Ok(IdentificationResult {
        gamma1_hat: g1,
        gamma2_hat: g2,
        abs_j_hat: absj,
        candidates,
        permutation_note: format!(
            "gyromagnetic ratios are identifiable only up to exchanging the two spins; reported in increasing order{}",
            if swapped { " (the optimizer's labels were swapped)" } else { "" }
        ),
        moment_estimate: moment,
        flip_mismatch,
        design_rank,
        runs,
        warnings,
    })
}

fn best_theta(pos: &LmOutcome, neg: &LmOutcome) -> Vector3<f64> {
    if pos.cost <= neg.cost {
        pos.theta
    } else {
        neg.theta
    }
}

/// Norms of the central-difference residual derivatives.
fn sensitivity(problem: &Problem, theta: &Vector3<f64>, sign: f64) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let h = 1e-6 * theta[k].abs().max(1.0);
        let mut tp = *theta;
        let mut tm = *theta;
        tp[k] += h;
        tm[k] -= h;
        let rp = problem.fit(&couplings_of(&tp, sign))?.residual;
        let rm = problem.fit(&couplings_of(&tm, sign))?.residual;
        *o = (rp - rm).norm() / (2.0 * h);
    }
    Ok(out)
}

/// Settings for [`moment_gamma_estimate_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentConfig {
    /// Highest derivative order used in the moment structure (2 or 3).
    pub max_order: usize,
    /// Early samples of the first segment used for the derivative fit.
    pub window: usize,
    /// Degree of the local polynomial fit.
    pub degree: usize,
}

impl Default for MomentConfig {
    fn default() -> Self {
        Self {
            max_order: 2,
            window: 12,
            degree: 6,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentEstimate {
    pub gamma1: f64,
    pub gamma2: f64,
    /// `γ1 + γ2`.
    pub sum: f64,
    /// `γ1 γ2`.
    pub product: f64,
    pub orders_used: usize,
    pub schedules_used: usize,
    /// Singular values of the recurrence system; a small ratio flags `γ1 ≈ γ2`.
    pub recurrence_singular_values: [f64; 2],
}

/// Derivatives of orders `0..=3` at the start of the first segment.
fn early_derivatives(trace: &MagnetizationTrace, t0: f64, dt0: f64, cfg: &MomentConfig) -> Result<[Vector3<f64>; 4]> {
    let idx: Vec<usize> = (0..trace.len())
        .filter(|&i| trace.times[i] < t0 + dt0 - 1e-12)
        .take(cfg.window)
        .collect();
    if idx.len() < 4 {
        return Err(Error::IllConditioned(format!(
            "only {} samples in the first segment; at least 4 are needed for derivatives",
            idx.len()
        )));
    }
    let deg = cfg.degree.min(idx.len() - 1).max(3);
    let span = trace.times[*idx.last().expect("nonempty")] - t0;
    let vander = DMatrix::from_fn(idx.len(), deg + 1, |r, c| ((trace.times[idx[r]] - t0) / span).powi(c as i32));
    let rhs = DMatrix::from_fn(idx.len(), 3, |r, c| trace.sample(idx[r])[c]);
    let coef = vander
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::IllConditioned(e.to_string()))?;
    let mut out = [Vector3::zeros(); 4];
    let mut fact = 1.0;
    for (k, d) in out.iter_mut().enumerate() {
        if k > 0 {
            fact *= k as f64;
        }
        let scale = fact / span.powi(k as i32);
        *d = Vector3::new(coef[(k, 0)], coef[(k, 1)], coef[(k, 2)]) * scale;
    }
    Ok(out)
}

fn cross_matrix(u: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -u[2], u[1], u[2], 0.0, -u[0], -u[1], u[0], 0.0)
}

fn monomials(degree: usize) -> Vec<[i32; 3]> {
    let d = degree as i32;
    let mut out = Vec::new();
    for a in (0..=d).rev() {
        for b in (0..=d - a).rev() {
            out.push([a, b, d - a - b]);
        }
    }
    out
}

pub fn moment_gamma_estimate(record: &ExperimentRecord) -> Result<MomentEstimate> {
    moment_gamma_estimate_with(record, &MomentConfig::default())
}

/// Estimates `(γ1, γ2)` from short-time derivatives of the outputs.
///
/// With a constant control `u` from the start, the `k`-th time derivative of
/// the magnetization is a polynomial in `u` whose top-degree part is
/// `(u×)^k P_k`, where `P_k = γ1^k w1 + γ2^k w2` and `w_j` is spin `j`'s
/// initial spin vector; lower degrees involve the exchange coupling and are
/// fitted as nuisance terms. The `P_k` then obey the two-term recurrence
/// `P_{k+2} = (γ1 + γ2) P_{k+1} - γ1 γ2 P_k`, whose coefficients give the pair.
pub fn moment_gamma_estimate_with(record: &ExperimentRecord, cfg: &MomentConfig) -> Result<MomentEstimate> {
    let mut derivs = Vec::new();
    let mut controls = Vec::new();
    for (s, t) in record.schedules.iter().zip(&record.traces) {
        let seg = s.segments()[0];
        derivs.push(early_derivatives(t, s.t_start(), seg.dt, cfg)?);
        controls.push(Vector3::from(seg.u));
    }
    let n = derivs.len();
    let mut p = vec![derivs.iter().map(|d| d[0]).sum::<Vector3<f64>>() / n as f64];
    for k in 1..=cfg.max_order.clamp(2, 3) {
        let nuisance: Vec<[i32; 3]> = (1..k).flat_map(monomials).collect();
        let unknowns = 3 + 3 * nuisance.len();
        if 3 * n < unknowns {
            if k <= 2 {
                return Err(Error::IllConditioned(format!(
                    "derivative order {k} needs at least {} schedules, got {n}",
                    unknowns.div_ceil(3)
                )));
            }
            break;
        }
        let mut a = DMatrix::zeros(3 * n, unknowns);
        let mut b = DVector::zeros(3 * n);
        for (i, (d, u)) in derivs.iter().zip(&controls).enumerate() {
            let top = cross_matrix(u).pow(k as u32);
            for v in 0..3 {
                let r = 3 * i + v;
                for w in 0..3 {
                    a[(r, w)] = top[(v, w)];
                }
                for (m, e) in nuisance.iter().enumerate() {
                    a[(r, 3 + 3 * m + v)] = u[0].powi(e[0]) * u[1].powi(e[1]) * u[2].powi(e[2]);
                }
                b[r] = d[k][v];
            }
        }
        let svd = a.svd(true, true);
        let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
        if smin <= 1e-8 * smax {
            return Err(Error::IllConditioned(format!(
                "order-{k} moment system is rank deficient; use schedules with more distinct control directions"
            )));
        }
        let x = svd.solve(&b, 0.0).map_err(|e| Error::IllConditioned(e.to_string()))?;
        p.push(Vector3::new(x[0], x[1], x[2]));
    }
    let orders_used = p.len() - 1;
    let rows = 3 * (p.len() - 2);
    let mut a = DMatrix::zeros(rows, 2);
    let mut b = DVector::zeros(rows);
    for k in 0..p.len() - 2 {
        for v in 0..3 {
            a[(3 * k + v, 0)] = p[k + 1][v];
            a[(3 * k + v, 1)] = -p[k][v];
            b[3 * k + v] = p[k + 2][v];
        }
    }
    let svd = a.svd(true, true);
    let sv = [svd.singular_values[0], svd.singular_values[1]];
    let (s_hi, s_lo) = (sv[0].max(sv[1]), sv[0].min(sv[1]));
    if s_lo <= 1e-3 * s_hi {
        return Err(Error::IllConditioned(format!(
            "degenerate recurrence (singular values {s_hi:.3e}, {s_lo:.3e}): the two ratios coincide or the state carries no transverse spin"
        )));
    }
    let e = svd.solve(&b, 0.0).map_err(|e| Error::IllConditioned(e.to_string()))?;
    let (sum, product) = (e[0], e[1]);
    let disc = sum * sum - 4.0 * product;
    if disc < 0.0 {
        return Err(Error::IllConditioned(format!(
            "recurrence has complex roots (sum {sum:.4}, product {product:.4}); use richer schedules"
        )));
    }
    let root = disc.sqrt();
    Ok(MomentEstimate {
        gamma1: (sum - root) / 2.0,
        gamma2: (sum + root) / 2.0,
        sum,
        product,
        orders_used,
        schedules_used: n,
        recurrence_singular_values: [s_hi, s_lo],
    })
}
