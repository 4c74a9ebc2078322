//! Randomized invariants across modules.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spinlie::cartan::{build_parity_decomposition, build_parity_decomposition_reversed, ParityDecomposition};
use spinlie::dynamics::{
    equivalent_partner, propagate, propagate_matrix, ControlSchedule, RandomScheduleSpec,
};
use spinlie::ident::{residual_at, vandermonde_distinguishability, ExperimentRecord};
use spinlie::lie::{lie_closure, model_generators, ClosureOptions};
use spinlie::model::{
    build_controls, build_drift, magnetization, random_density_matrix, thermal_state, Couplings, DensityMatrix,
    ObservableSet, SpinPairModel,
};
use spinlie::operator::{
    anticommutator, commutator, expm_skew, random_gaussian, random_skew_hermitian, random_su, span_insert,
    ComplexMatrix, OperatorSpan, C64, DEFAULT_SPAN_TOL, I,
};

use std::sync::OnceLock;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn decomposition() -> &'static ParityDecomposition {
    static D: OnceLock<ParityDecomposition> = OnceLock::new();
    D.get_or_init(|| build_parity_decomposition(2).unwrap())
}

fn reversed_decomposition() -> &'static ParityDecomposition {
    static D: OnceLock<ParityDecomposition> = OnceLock::new();
    D.get_or_init(|| build_parity_decomposition_reversed(2).unwrap())
}

fn coupling() -> impl Strategy<Value = f64> {
    prop_oneof![-3.0..-0.1f64, 0.1..3.0f64]
}

fn gamma() -> impl Strategy<Value = f64> {
    0.2..3.0f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_product_is_real_symmetric_bilinear(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let mut r = rng(seed);
        let [x, y, z] = [0; 3].map(|_| random_gaussian(4, &mut r));
        prop_assert!((x.inner(&y) - y.inner(&x)).abs() <= 1e-12);
        let mut lin = x.scale_re(a);
        lin.axpy_re(b, &y);
        let expected = a * x.inner(&z) + b * y.inner(&z);
        prop_assert!((lin.inner(&z) - expected).abs() <= 1e-10 * (1.0 + expected.abs()));
        prop_assert!(x.inner(&x) > 0.0);
        prop_assert!((x.inner(&x) - x.norm().powi(2)).abs() <= 1e-10 * x.inner(&x));
    }

    #[test]
    fn brackets_preserve_symmetry_class(seed in any::<u64>(), n in 2usize..6) {
        let mut r = rng(seed);
        let (x, y) = (random_skew_hermitian(n, &mut r), random_skew_hermitian(n, &mut r));
        prop_assert!(commutator(&x, &y).unwrap().skew_deviation() <= 1e-12);
        let (h, k) = (x.scale(I), y.scale(I));
        prop_assert!(anticommutator(&h, &k).unwrap().hermitian_deviation() <= 1e-12);
    }

    #[test]
    fn span_insert_of_combination_is_idempotent(seed in any::<u64>(), k in 1usize..6) {
        let mut r = rng(seed);
        let items: Vec<ComplexMatrix> = (0..k).map(|_| random_su(3, &mut r)).collect();
        let span = OperatorSpan::from_matrices(3, &items, DEFAULT_SPAN_TOL).unwrap();
        let dim = span.dimension();
        let mut combo = ComplexMatrix::zeros(3);
        for (j, x) in items.iter().enumerate() {
            combo.axpy_re(j as f64 - 1.5, x);
        }
        let (span, added) = span_insert(span, &combo, DEFAULT_SPAN_TOL).unwrap();
        prop_assert!(!added);
        prop_assert_eq!(span.dimension(), dim);
    }

    #[test]
    fn exponential_of_skew_is_unitary(seed in any::<u64>(), n in 2usize..10, scale in 0.01..20.0f64) {
        let x = random_skew_hermitian(n, &mut rng(seed)).scale_re(scale);
        let u = expm_skew(&x).unwrap();
        for s in u.singular_values() {
            prop_assert!((s - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn model_generators_are_in_su9(g1 in gamma(), g2 in gamma(), j in coupling()) {
        let c = Couplings::new(g1, g2, j);
        let a = build_drift(&c);
        for x in std::iter::once(&a).chain(build_controls(&c).iter()) {
            prop_assert!(x.skew_deviation() <= 1e-12);
            prop_assert!(x.trace().norm() <= 1e-12);
        }
        for s in ObservableSet::new().collective_generators() {
            prop_assert!(commutator(&a, &s).unwrap().max_abs() <= 1e-12);
        }
    }

    #[test]
    fn magnetization_is_affine_in_the_state(s1 in any::<u64>(), s2 in any::<u64>(), alpha in 0.0..1.0f64) {
        let (r1, r2) = (random_density_matrix(s1), random_density_matrix(s2));
        let mut mix = r1.matrix().scale_re(alpha);
        mix.axpy_re(1.0 - alpha, r2.matrix());
        let m = magnetization(&DensityMatrix::new(mix).unwrap());
        let (m1, m2) = (magnetization(&r1), magnetization(&r2));
        for k in 0..3 {
            prop_assert!((m[k] - (alpha * m1[k] + (1.0 - alpha) * m2[k])).abs() <= 1e-12);
        }
    }

    #[test]
    fn parity_projections_are_orthogonal_projectors(seed in any::<u64>()) {
        let d = decomposition();
        let mut r = rng(seed);
        let (x, y) = (random_gaussian(9, &mut r), random_gaussian(9, &mut r));
        let px = d.project(&x).unwrap();
        let py = d.project(&y).unwrap();
        let again = d.project(&px.even).unwrap();
        prop_assert!((&again.even - &px.even).norm() <= 1e-10);
        prop_assert!(again.odd.norm() <= 1e-10);
        prop_assert!((px.even.inner(&y) - x.inner(&py.even)).abs() <= 1e-10);
        prop_assert!((px.odd.inner(&y) - x.inner(&py.odd)).abs() <= 1e-10);
        prop_assert!((&px.reconstruct() - &x).norm() <= 1e-10 * x.norm());
    }

    #[test]
    fn parity_split_ignores_basis_order(seed in any::<u64>()) {
        let x = random_gaussian(9, &mut rng(seed));
        let a = decomposition().project(&x).unwrap();
        let b = reversed_decomposition().project(&x).unwrap();
        prop_assert!((&a.even - &b.even).norm() <= 1e-10);
        prop_assert!((&a.odd - &b.odd).norm() <= 1e-10);
    }

    #[test]
    fn vandermonde_symmetric_under_swaps(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64, d in -5.0..5.0f64) {
        let base = vandermonde_distinguishability(a, b, c, d).det;
        for det in [
            vandermonde_distinguishability(b, a, c, d).det,
            vandermonde_distinguishability(a, b, d, c).det,
        ] {
            prop_assert!((det.abs() - base.abs()).abs() <= 1e-9 * (1.0 + base.abs()));
        }
    }
}

fn random_schedules(seed: u64, count: usize) -> Vec<ControlSchedule> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| ControlSchedule::random(RandomScheduleSpec::default(), &mut r))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn propagation_preserves_spectrum(g1 in gamma(), g2 in gamma(), j in coupling(), seed in any::<u64>()) {
        let model = SpinPairModel::new(Couplings::new(g1, g2, j), random_density_matrix(seed)).unwrap();
        let s = &random_schedules(seed, 1)[0];
        let (_, rho) = propagate(&model, s, 16).unwrap();
        let before = model.rho0.eigenvalues();
        let after = rho.eigenvalues();
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn propagation_is_bit_deterministic(seed in any::<u64>()) {
        let c = Couplings::new(1.0, 2.0, 0.5);
        let rho = random_density_matrix(seed);
        let s = &random_schedules(seed, 1)[0];
        let (a, fa) = propagate_matrix(&c, rho.matrix(), s, 16).unwrap();
        let (b, fb) = propagate_matrix(&c, rho.matrix(), s, 16).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(fa, fb);
    }

    #[test]
    fn splitting_a_segment_changes_nothing(seed in any::<u64>(), k in 0usize..6) {
        let c = Couplings::new(0.9, 1.6, -0.4);
        let rho = random_density_matrix(seed);
        let s = &random_schedules(seed, 1)[0];
        let split = s.split_segment(k);
        let (a, fa) = propagate_matrix(&c, rho.matrix(), s, 16).unwrap();
        let (b, fb) = propagate_matrix(&c, rho.matrix(), &split, 16).unwrap();
        prop_assert!((&fa - &fb).max_abs() <= 1e-12);
        // Every original sample time reappears in the refined grid.
        let mut j = 0;
        for i in 0..a.len() {
            while (b.times[j] - a.times[i]).abs() > 1e-12 {
                j += 1;
            }
            let (ma, mb) = (a.sample(i), b.sample(j));
            for q in 0..3 {
                prop_assert!((ma[q] - mb[q]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn partner_of_partner_is_the_model(g1 in gamma(), g2 in gamma(), j in coupling(), beta in 0.0..0.1f64) {
        let c = Couplings::new(g1, g2, j);
        let model = SpinPairModel::new(c, thermal_state(&c, beta).unwrap()).unwrap();
        let d = decomposition();
        let Ok(partner) = equivalent_partner(&model, d) else {
            return Ok(());
        };
        let back = equivalent_partner(&partner, d).unwrap();
        prop_assert_eq!(back.couplings, model.couplings);
        prop_assert!((back.rho0.matrix() - model.rho0.matrix()).max_abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn closure_dimension_ignores_order_and_scale(g1 in gamma(), g2 in gamma(), j in coupling(), w in 0.1..10.0f64) {
        let c = Couplings::new(g1, g2, j);
        let (gens, _) = model_generators(&c);
        let opts = ClosureOptions::default();
        let (_, base) = lie_closure(&gens, opts).unwrap();
        let permuted: Vec<ComplexMatrix> = gens.iter().rev().enumerate().map(|(k, g)| g.scale_re(w.powi(k as i32))).collect();
        let (_, other) = lie_closure(&permuted, opts).unwrap();
        prop_assert_eq!(base.dimension, other.dimension);
    }

    #[test]
    fn closure_is_monotone_and_traceless(g1 in gamma(), g2 in gamma(), j in coupling(), drop in 0usize..4) {
        let c = Couplings::new(g1, g2, j);
        let (gens, _) = model_generators(&c);
        let opts = ClosureOptions::default();
        let (full, report) = lie_closure(&gens, opts).unwrap();
        let fewer: Vec<ComplexMatrix> = gens.iter().enumerate().filter(|(k, _)| *k != drop).map(|(_, g)| g.clone()).collect();
        let (_, sub) = lie_closure(&fewer, opts).unwrap();
        prop_assert!(sub.dimension <= report.dimension);
        let i1 = ComplexMatrix::identity(9).scale(C64::new(0.0, 1.0));
        prop_assert!(full.projection_norm(&i1) <= 1e-12);
    }

    #[test]
    fn su3_closures_are_bracket_closed(seed in any::<u64>()) {
        let mut r = rng(seed);
        // A rank-one pair generates su(3); a commuting pair stays abelian.
        let x = random_su(3, &mut r);
        let gens = [x.clone(), random_su(3, &mut r)];
        for g in [&gens[..], &[x.clone(), x.scale_re(2.0)][..]] {
            let (span, _) = lie_closure(g, ClosureOptions::default()).unwrap();
            for a in span.basis() {
                for b in span.basis() {
                    prop_assert!(span.distance(&commutator(a, b).unwrap()) <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn fit_is_exact_at_the_truth_and_grows_with_data(g1 in gamma(), g2 in gamma(), j in coupling(), seed in any::<u64>()) {
        let c = Couplings::new(g1, g2, j);
        let rho = random_density_matrix(seed);
        let schedules = random_schedules(seed, 3);
        let small = ExperimentRecord::simulate(&c, rho.matrix(), schedules[..2].to_vec(), 8).unwrap();
        let large = ExperimentRecord::simulate(&c, rho.matrix(), schedules, 8).unwrap();
        prop_assert!(residual_at(&small, &c).unwrap() <= 1e-10);
        prop_assert!(residual_at(&large, &c).unwrap() <= 1e-10);
        // Away from the truth the optimum over states can only grow with more data.
        let wrong = Couplings::new(g1 * 1.1, g2, j);
        let (rs, rl) = (residual_at(&small, &wrong).unwrap(), residual_at(&large, &wrong).unwrap());
        prop_assert!(rl >= rs * (1.0 - 1e-9));
    }
}
