//! Exact propagation under piecewise-constant controls, magnetization traces,
//! and the checks built on them: output equivalence of partner models, the
//! parity-split equations of motion, and the adjoint derivative identity.
//!
//! Within a segment with control `u` the state evolves as `ρ ← U ρ U^†` with
//! `U = exp((A + Σ u_v B_v) Δt)`, computed by [`expm_skew`]. Outputs are sampled
//! at the left end of each of the `samples_per_segment` equal sub-steps, so a
//! trace has `samples_per_segment × segments` rows; the state after the last
//! sub-step is returned separately.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cartan::ParityDecomposition;
use crate::error::{Error, Result};
use crate::model::{
    build_controls, build_drift, generator_at, traceless_part, Couplings, DensityMatrix,
    ObservableSet, SpinPairModel, DIM, STATE_TOL,
};
use crate::operator::{bracket, expm_skew, ComplexMatrix, C64};

/// Default output resolution.
pub const DEFAULT_SAMPLES_PER_SEGMENT: usize = 16;

/// Pass threshold for trace agreement between equivalent models.
pub const EQUIVALENCE_TOL: f64 = 1e-8;

/// Pass threshold for the adjoint derivative identity.
pub const ADJOINT_TOL: f64 = 1e-6;

/// Default step of the central difference in [`verify_adjoint_identity`].
pub const ADJOINT_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub dt: f64,
    pub u: [f64; 3],
}

#[derive(Deserialize)]
struct RawSchedule {
    #[serde(default)]
    t_start: f64,
    segments: Vec<Segment>,
}

/// Piecewise-constant control `u(t)` starting at `t_start`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub struct ControlSchedule {
    t_start: f64,
    segments: Vec<Segment>,
}

impl TryFrom<RawSchedule> for ControlSchedule {
    type Error = Error;

    fn try_from(raw: RawSchedule) -> Result<Self> {
        ControlSchedule::new(raw.t_start, raw.segments)
    }
}

/// Ranges for [`ControlSchedule::random`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomScheduleSpec {
    pub segments: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Each control component is uniform in `[-amplitude, amplitude]`.
    pub amplitude: f64,
}

impl Default for RandomScheduleSpec {
    fn default() -> Self {
        Self {
            segments: 6,
            dt_min: 0.2,
            dt_max: 0.6,
            amplitude: 2.0,
        }
    }
}

impl ControlSchedule {
    pub fn new(t_start: f64, segments: Vec<Segment>) -> Result<Self> {
        if !t_start.is_finite() {
            return Err(Error::InvalidSchedule("t_start is not finite".into()));
        }
        if segments.is_empty() {
            return Err(Error::InvalidSchedule("no segments".into()));
        }
        for (k, s) in segments.iter().enumerate() {
            if !(s.dt.is_finite() && s.dt > 0.0) {
                return Err(Error::InvalidSchedule(format!(
                    "segment {k}: duration {} is not positive and finite",
                    s.dt
                )));
            }
            if s.u.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidSchedule(format!("segment {k}: non-finite control")));
            }
        }
        Ok(Self { t_start, segments })
    }

    /// One segment of constant control.
    pub fn constant(u: [f64; 3], duration: f64) -> Result<Self> {
        Self::new(0.0, vec![Segment { dt: duration, u }])
    }

    pub fn random<R: Rng + ?Sized>(spec: RandomScheduleSpec, rng: &mut R) -> Self {
        let segments = (0..spec.segments.max(1))
            .map(|_| Segment {
                dt: rng.random_range(spec.dt_min..=spec.dt_max),
                u: [0; 3].map(|_| rng.random_range(-spec.amplitude..=spec.amplitude)),
            })
            .collect();
        Self::new(0.0, segments).expect("spec ranges are positive")
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.dt).sum()
    }

    pub fn end_time(&self) -> f64 {
        self.t_start + self.total_duration()
    }

    /// Same timing with every control multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let segments = self
            .segments
            .iter()
            .map(|s| Segment {
                dt: s.dt,
                u: s.u.map(|x| c * x),
            })
            .collect();
        Self::new(self.t_start, segments)
    }

    /// Replaces segment `k` by two halves with the same control.
    pub fn split_segment(&self, k: usize) -> Self {
        let mut segments = self.segments.clone();
        let half = Segment {
            dt: segments[k].dt / 2.0,
            u: segments[k].u,
        };
        segments[k] = half;
        segments.insert(k, half);
        Self {
            t_start: self.t_start,
            segments,
        }
    }

    /// Sample times for a given resolution.
    pub fn sample_times(&self, samples_per_segment: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.segments.len() * samples_per_segment);
        let mut t0 = self.t_start;
        for s in &self.segments {
            let h = s.dt / samples_per_segment as f64;
            out.extend((0..samples_per_segment).map(|j| t0 + j as f64 * h));
            t0 += s.dt;
        }
        out
    }
}

/// Sampled `(M_x, M_y, M_z)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MagnetizationTrace {
    pub times: Vec<f64>,
    pub mx: Vec<f64>,
    pub my: Vec<f64>,
    pub mz: Vec<f64>,
}

/// Largest magnitude any `M_v` can take for two spin-1 particles, plus slack.
pub const MAGNETIZATION_BOUND: f64 = 2.0 + 1e-6;

impl MagnetizationTrace {
    pub fn from_columns(times: Vec<f64>, mx: Vec<f64>, my: Vec<f64>, mz: Vec<f64>) -> Result<Self> {
        let n = times.len();
        if mx.len() != n || my.len() != n || mz.len() != n {
            return Err(Error::InvalidRecord("trace columns differ in length".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidRecord("trace times are not increasing".into()));
        }
        if mx.iter().chain(&my).chain(&mz).any(|x| !x.is_finite()) {
            return Err(Error::InvalidRecord("non-finite magnetization value".into()));
        }
        Ok(Self { times, mx, my, mz })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `|M_v(t)|`; at most [`MAGNETIZATION_BOUND`] for noiseless data.
    pub fn max_abs(&self) -> f64 {
        self.mx.iter().chain(&self.my).chain(&self.mz).fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn sample(&self, i: usize) -> [f64; 3] {
        [self.mx[i], self.my[i], self.mz[i]]
    }

    fn push(&mut self, t: f64, m: [f64; 3]) {
        self.times.push(t);
        self.mx.push(m[0]);
        self.my.push(m[1]);
        self.mz.push(m[2]);
    }

    /// `max_{t,v} |M_v(t) - M'_v(t)|`; infinite when the grids differ in length.
    pub fn max_deviation(&self, other: &Self) -> f64 {
        if self.len() != other.len() {
            return f64::INFINITY;
        }
        (0..self.len())
            .flat_map(|i| {
                let (a, b) = (self.sample(i), other.sample(i));
                (0..3).map(move |v| (a[v] - b[v]).abs())
            })
            .fold(0.0, f64::max)
    }
}

fn check_resolution(samples_per_segment: usize) -> Result<()> {
    if samples_per_segment == 0 {
        return Err(Error::InvalidSchedule("samples_per_segment must be at least 1".into()));
    }
    Ok(())
}

/// Propagators `U(t_k)` at every sample time, plus the final propagator.
pub fn sample_propagators(
    c: &Couplings,
    schedule: &ControlSchedule,
    samples_per_segment: usize,
) -> Result<(Vec<ComplexMatrix>, ComplexMatrix)> {
    check_resolution(samples_per_segment)?;
    let mut u_total = ComplexMatrix::identity(DIM);
    let mut out = Vec::with_capacity(schedule.segments.len() * samples_per_segment);
    for s in &schedule.segments {
        let h = s.dt / samples_per_segment as f64;
        let step = expm_skew(&generator_at(c, s.u).scale_re(h))?;
        for _ in 0..samples_per_segment {
            out.push(u_total.clone());
            u_total = &step * &u_total;
        }
    }
    Ok((out, u_total))
}

/// Propagates an arbitrary Hermitian matrix (not necessarily a state).
pub fn propagate_matrix(
    c: &Couplings,
    rho0: &ComplexMatrix,
    schedule: &ControlSchedule,
    samples_per_segment: usize,
) -> Result<(MagnetizationTrace, ComplexMatrix)> {
    if rho0.dim() != DIM {
        return Err(Error::DimensionMismatch {
            left: DIM,
            right: rho0.dim(),
        });
    }
    let obs = ObservableSet::new();
    let times = schedule.sample_times(samples_per_segment);
    let (props, last) = sample_propagators(c, schedule, samples_per_segment)?;
    let mut trace = MagnetizationTrace::default();
    for (t, u) in times.into_iter().zip(&props) {
        let rho = &(u * rho0) * &u.adjoint();
        trace.push(t, obs.expectations(&rho));
    }
    let final_state = &(&last * rho0) * &last.adjoint();
    Ok((trace, final_state))
}

pub fn propagate(
    model: &SpinPairModel,
    schedule: &ControlSchedule,
    samples_per_segment: usize,
) -> Result<(MagnetizationTrace, DensityMatrix)> {
    let (trace, rho) =
        propagate_matrix(&model.couplings, model.rho0.matrix(), schedule, samples_per_segment)?;
    Ok((trace, DensityMatrix::from_trusted(&rho)))
}

fn require_two_spins(decomp: &ParityDecomposition) -> Result<()> {
    if decomp.n_spins != 2 {
        return Err(Error::DimensionMismatch {
            left: DIM,
            right: decomp.ambient_dim(),
        });
    }
    Ok(())
}

/// `𝟏/9 + P_odd(ρ̃) - P_even(ρ̃)` with `ρ̃` the traceless part of `rho`.
pub fn flip_partner_state(rho: &ComplexMatrix, decomp: &ParityDecomposition) -> Result<ComplexMatrix> {
    require_two_spins(decomp)?;
    let parts = decomp.project(&traceless_part(rho))?;
    let mut out = &parts.odd - &parts.even;
    out.axpy_re(1.0 / DIM as f64, &ComplexMatrix::identity(DIM));
    Ok(out.hermitian_part())
}

/// The partner couplings and initial matrix, whether or not the matrix is a state.
#[derive(Clone, Debug, Serialize)]
pub struct PartnerConstruction {
    pub couplings: Couplings,
    pub rho0: ComplexMatrix,
    pub min_eigenvalue: f64,
    pub physical: bool,
}

pub fn partner_construction(
    couplings: &Couplings,
    rho0: &ComplexMatrix,
    decomp: &ParityDecomposition,
) -> Result<PartnerConstruction> {
    let flipped = flip_partner_state(rho0, decomp)?;
    let min_eigenvalue = flipped.hermitian_eigenvalues()[0];
    Ok(PartnerConstruction {
        couplings: couplings.with_flipped_exchange(),
        rho0: flipped,
        min_eigenvalue,
        physical: min_eigenvalue >= -STATE_TOL,
    })
}

/// Partner model with `J12 → -J12` and the even component of the state negated.
///
/// Fails with [`Error::UnphysicalPartner`] when the flipped matrix is not
/// positive semidefinite.
pub fn equivalent_partner(model: &SpinPairModel, decomp: &ParityDecomposition) -> Result<SpinPairModel> {
    let p = partner_construction(&model.couplings, model.rho0.matrix(), decomp)?;
    if !p.physical {
        return Err(Error::UnphysicalPartner {
            min_eigenvalue: p.min_eigenvalue,
        });
    }
    SpinPairModel::new(p.couplings, DensityMatrix::new(p.rho0)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub schedules: usize,
    pub samples_per_segment: usize,
    pub per_schedule_max: Vec<f64>,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares outputs of two (couplings, initial matrix) pairs over `schedules`.
pub fn verify_equivalence_raw(
    a: (&Couplings, &ComplexMatrix),
    b: (&Couplings, &ComplexMatrix),
    schedules: &[ControlSchedule],
    samples_per_segment: usize,
) -> Result<EquivalenceReport> {
    let per_schedule_max = schedules
        .par_iter()
        .map(|s| {
            let (ta, _) = propagate_matrix(a.0, a.1, s, samples_per_segment)?;
            let (tb, _) = propagate_matrix(b.0, b.1, s, samples_per_segment)?;
            Ok(ta.max_deviation(&tb))
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_deviation = per_schedule_max.iter().copied().fold(0.0, f64::max);
    Ok(EquivalenceReport {
        schedules: schedules.len(),
        samples_per_segment,
        per_schedule_max,
        max_deviation,
        tolerance: EQUIVALENCE_TOL,
        pass: !schedules.is_empty() && max_deviation <= EQUIVALENCE_TOL,
    })
}

pub fn verify_equivalence(
    a: &SpinPairModel,
    b: &SpinPairModel,
    schedules: &[ControlSchedule],
) -> Result<EquivalenceReport> {
    verify_equivalence_raw(
        (&a.couplings, a.rho0.matrix()),
        (&b.couplings, b.rho0.matrix()),
        schedules,
        DEFAULT_SAMPLES_PER_SEGMENT,
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct SplitDynamicsReport {
    /// Grid step `Δ` of the coarse sample grid.
    pub step: f64,
    /// Worst forward-difference mismatch with step `Δ`, at the coarse grid points.
    pub residual_coarse: f64,
    /// Same points, step `Δ/2`.
    pub residual_fine: f64,
    pub ratio: f64,
    /// `ratio` within 20% of 2.
    pub first_order: bool,
    /// `max_t ‖ρ_odd(t) - ρ'_odd(t)‖` for the partner trajectory.
    pub partner_odd_deviation: f64,
    /// `max_t ‖ρ_even(t) + ρ'_even(t)‖` for the partner trajectory.
    pub partner_even_deviation: f64,
    pub partner_pass: bool,
    pub pass: bool,
}

/// Right-hand sides `[B, ρ_odd] + [A, ρ_even]` and `[B, ρ_even] + [A, ρ_odd]`.
fn split_rhs(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    odd: &ComplexMatrix,
    even: &ComplexMatrix,
) -> (ComplexMatrix, ComplexMatrix) {
    (
        &bracket(b, odd) + &bracket(a, even),
        &bracket(b, even) + &bracket(a, odd),
    )
}

/// Checks the parity-split equations of motion by forward differences and
/// the partner identity `ρ_odd = ρ'_odd`, `ρ_even = -ρ'_even` along the
/// trajectory. `Δ` is each segment's duration over `samples_per_segment`;
/// the smallest segment sets the reported step.
pub fn verify_split_dynamics(
    model: &SpinPairModel,
    schedule: &ControlSchedule,
    decomp: &ParityDecomposition,
    samples_per_segment: usize,
) -> Result<SplitDynamicsReport> {
    require_two_spins(decomp)?;
    check_resolution(samples_per_segment)?;
    let c = &model.couplings;
    let a = build_drift(c);
    let controls = build_controls(c);
    let split = |rho: &ComplexMatrix| -> Result<(ComplexMatrix, ComplexMatrix)> {
        let p = decomp.project(rho)?;
        Ok((p.odd, p.even))
    };
    let mut rho = model.rho0.matrix().clone();
    let (mut coarse, mut fine): (f64, f64) = (0.0, 0.0);
    let mut step_min = f64::INFINITY;
    for s in schedule.segments() {
        let h = s.dt / samples_per_segment as f64;
        step_min = step_min.min(h);
        let g = generator_at(c, s.u);
        let full = expm_skew(&g.scale_re(h))?;
        let half = expm_skew(&g.scale_re(h / 2.0))?;
        let mut b = ComplexMatrix::zeros(DIM);
        for (bv, uv) in controls.iter().zip(s.u) {
            b.axpy_re(uv, bv);
        }
        for _ in 0..samples_per_segment {
            let (odd, even) = split(&rho)?;
            let (r_odd, r_even) = split_rhs(&a, &b, &odd, &even);
            let next = &(&full * &rho) * &full.adjoint();
            let mid = &(&half * &rho) * &half.adjoint();
            for (target, dt, state) in [(&mut coarse, h, &next), (&mut fine, h / 2.0, &mid)] {
                let (o2, e2) = split(state)?;
                let d_odd = (&o2 - &odd).scale_re(1.0 / dt);
                let d_even = (&e2 - &even).scale_re(1.0 / dt);
                let err = ((&d_odd - &r_odd).norm().powi(2) + (&d_even - &r_even).norm().powi(2)).sqrt();
                *target = target.max(err);
            }
            rho = next.hermitian_part();
        }
    }

    let partner = partner_construction(c, model.rho0.matrix(), decomp)?;
    let (props, _) = sample_propagators(c, schedule, samples_per_segment)?;
    let (props_p, _) = sample_propagators(&partner.couplings, schedule, samples_per_segment)?;
    let (mut odd_dev, mut even_dev): (f64, f64) = (0.0, 0.0);
    for (u, up) in props.iter().zip(&props_p) {
        let r = &(u * model.rho0.matrix()) * &u.adjoint();
        let rp = &(up * &partner.rho0) * &up.adjoint();
        let (o, e) = split(&r)?;
        let (op, ep) = split(&rp)?;
        odd_dev = odd_dev.max((&o - &op).norm());
        even_dev = even_dev.max((&e + &ep).norm());
    }
    let ratio = coarse / fine;
    let first_order = (ratio - 2.0).abs() <= 0.4;
    let partner_pass = odd_dev <= EQUIVALENCE_TOL && even_dev <= EQUIVALENCE_TOL;
    Ok(SplitDynamicsReport {
        step: step_min,
        residual_coarse: coarse,
        residual_fine: fine,
        ratio,
        first_order,
        partner_odd_deviation: odd_dev,
        partner_even_deviation: even_dev,
        partner_pass,
        pass: first_order && partner_pass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AdjointReport {
    pub step: f64,
    /// Central difference of `t ↦ Tr(F e^{At} ρ e^{-At})` at `t = 0`.
    pub finite_difference: C64,
    /// `Tr([F, A] ρ)`, the derivative for `dρ/dt = [A, ρ]`.
    pub trace_fa: C64,
    /// `Tr([A, F] ρ)`, the opposite ordering.
    pub trace_af: C64,
    pub deviation: f64,
    pub deviation_opposite_order: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn verify_adjoint_identity(
    c: &Couplings,
    f: &ComplexMatrix,
    rho: &ComplexMatrix,
    step: f64,
) -> Result<AdjointReport> {
    if f.dim() != rho.dim() || f.dim() != DIM {
        return Err(Error::DimensionMismatch {
            left: f.dim(),
            right: rho.dim(),
        });
    }
    let a = build_drift(c);
    let value = |t: f64| -> Result<C64> {
        let u = expm_skew(&a.scale_re(t))?;
        Ok((f * &(&(&u * rho) * &u.adjoint())).trace())
    };
    let finite_difference = (value(step)? - value(-step)?) / (2.0 * step);
    let trace_fa = (&bracket(f, &a) * rho).trace();
    let trace_af = (&bracket(&a, f) * rho).trace();
    let deviation = (finite_difference - trace_fa).norm();
    Ok(AdjointReport {
        step,
        finite_difference,
        trace_fa,
        trace_af,
        deviation,
        deviation_opposite_order: (finite_difference - trace_af).norm(),
        tolerance: ADJOINT_TOL,
        pass: deviation <= ADJOINT_TOL,
    })
}
