use lsnm::bench::{audrc, corpus, generate, Family, GeneratorSpec, VerdictRecord};
use lsnm::concave::{fit_concave_design, log_likelihood_hessian, ConcaveFitConfig, LinearLSNMWeights};
use lsnm::features::{build_spline_map, DesignMatrix, SplineFeatureMap};
use lsnm::ifgls::{fit_ifgls, IFGLSConfig};
use lsnm::independence::hsic_statistic;
use lsnm::inference::{infer, Estimator, InferenceConfig, Method};
use lsnm::model::loglik_point;
use lsnm::{NaturalParams, SamplePair};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn sample(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, len)
}

fn natural() -> impl Strategy<Value = NaturalParams> {
    (-10.0..10.0f64, -20.0..-0.01f64).prop_map(|(e1, e2)| NaturalParams::new(e1, e2).unwrap())
}

/// Design with nonnegative `φ` and `y`, all of one length.
fn instance() -> impl Strategy<Value = (DesignMatrix, DesignMatrix, Vec<f64>, LinearLSNMWeights)> {
    (1usize..30, 1usize..5, 1usize..5).prop_flat_map(|(t, d1, d2)| {
        (
            prop::collection::vec(-3.0..3.0f64, t * d1),
            prop::collection::vec(0.0..2.0f64, t * d2),
            prop::collection::vec(-5.0..5.0f64, t),
            prop::collection::vec(-3.0..3.0f64, d1),
            prop::collection::vec(0.01..3.0f64, d2),
        )
            .prop_map(move |(psi, phi, y, w1, w2)| {
                let psi = DesignMatrix::from_fn(t, d1, |i, j| psi[i * d1 + j]);
                // A positive first column keeps every φᵀw₂ > 0.
                let phi = DesignMatrix::from_fn(t, d2, |i, j| if j == 0 { 0.1 + phi[i * d2] } else { phi[i * d2 + j] });
                (psi, phi, y, LinearLSNMWeights { w1, w2 })
            })
    })
}

fn pair_strategy(t: usize) -> impl Strategy<Value = SamplePair> {
    (prop::collection::vec(-3.0..3.0f64, t), prop::collection::vec(-1.0..1.0f64, t), 0.1..1.0f64)
        .prop_map(|(x, e, s)| {
            let y = x.iter().zip(&e).map(|(x, e)| x.sin() + s * (1.0 + x.abs()) * e).collect();
            SamplePair::new(x, y).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn density_integrates_to_one(p in natural()) {
        let mv = p.to_mean_var();
        let (lo, hi) = (mv.mu() - 12.0 * mv.sd(), mv.mu() + 12.0 * mv.sd());
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let mass: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * loglik_point(lo + i as f64 * h, p).exp()
            })
            .sum::<f64>()
            * h;
        prop_assert!((mass - 1.0).abs() < 1e-6, "mass {}", mass);
    }

    #[test]
    fn spline_basis_is_a_nonnegative_local_partition(x in sample(30..80), order in 0usize..6, knots in 2usize..10) {
        let map = build_spline_map(&x, order, knots).unwrap().with_bias(false);
        let (lo, hi) = map.range();
        let design = map.evaluate(&x);
        for i in 0..design.rows {
            let row = design.row(i);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        }
        // Scan a fine grid and count the knot intervals where each function is nonzero.
        let k = &map.knot_positions;
        let grid: Vec<f64> = (0..=2000).map(|i| lo + (hi - lo) * i as f64 / 2000.0).collect();
        let gd = map.evaluate(&grid);
        for j in 0..gd.cols {
            let mut intervals: Vec<usize> = grid
                .iter()
                .enumerate()
                .filter(|&(i, _)| gd.get(i, j) > 0.0)
                .map(|(_, &g)| k.partition_point(|&kn| kn <= g).clamp(1, k.len() - 1) - 1)
                .collect();
            intervals.dedup();
            prop_assert!(intervals.len() <= order + 1, "basis {} spans {:?}", j, intervals);
        }
    }

    #[test]
    fn hessian_is_negative_semidefinite((psi, phi, y, w) in instance()) {
        let h: DMatrix<f64> = log_likelihood_hessian(&psi, &phi, &y, &w);
        let top = SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(top <= 1e-8, "max eigenvalue {}", top);
    }

    #[test]
    fn concave_fit_ascends((x, e) in (prop::collection::vec(0.0..1.0f64, 40..120), prop::collection::vec(-1.0..1.0f64, 120))) {
        let map = SplineFeatureMap::from_knots(vec![0.0, 0.5, 1.0], 3, false).unwrap();
        let design = map.evaluate(&x);
        let y: Vec<f64> = x.iter().zip(&e).map(|(x, e)| 2.0 * x + (0.2 + x) * e).collect();
        let fit = fit_concave_design(&design, &design, &y, &ConcaveFitConfig::default(), None).unwrap();
        for pair in fit.objective_trace.windows(2) {
            prop_assert!(pair[1] >= pair[0] - 1e-9, "trace {:?}", fit.objective_trace);
        }
    }

    #[test]
    fn ifgls_variance_respects_floor(pair in pair_strategy(60)) {
        let map = build_spline_map(&pair.x, 3, 6).unwrap();
        let cfg = IFGLSConfig { variance_floor: 1e-3, ..IFGLSConfig::default() };
        let fit = fit_ifgls(&pair, &map, &map, &cfg).unwrap();
        prop_assert!(fit.sigma_hat.iter().all(|s| s * s >= 1e-3 * (1.0 - 1e-12)));
    }

    #[test]
    fn hsic_invariant_to_shift_and_joint_permutation(
        (a, b, perm) in (20usize..60).prop_flat_map(|t| (
            prop::collection::vec(-3.0..3.0f64, t),
            prop::collection::vec(-3.0..3.0f64, t),
            Just((0..t).collect::<Vec<usize>>()).prop_shuffle(),
        )),
        shift in -100.0..100.0f64,
    ) {
        let base = hsic_statistic(&a, &b).unwrap();
        let shifted: Vec<f64> = a.iter().map(|v| v + shift).collect();
        let moved = hsic_statistic(&shifted, &b).unwrap();
        prop_assert!((moved - base).abs() <= 1e-8 * (1.0 + base.abs()));
        let pa: Vec<f64> = perm.iter().map(|&i| a[i]).collect();
        let pb: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
        let permuted = hsic_statistic(&pa, &pb).unwrap();
        prop_assert!((permuted - base).abs() <= 1e-10 * (1.0 + base.abs()));
    }

    #[test]
    fn ranked_certainty_never_hurts_audrc(correct in prop::collection::vec(any::<bool>(), 1..50)) {
        let records: Vec<VerdictRecord> = correct
            .iter()
            .enumerate()
            .map(|(i, &c)| VerdictRecord { pair_id: format!("p{i:02}"), certainty: if c { 2.0 } else { 1.0 } + i as f64 * 1e-3, correct: c })
            .collect();
        let curve = audrc(&records);
        prop_assert!(curve.audrc >= curve.accuracy);
        prop_assert!((0.0..=1.0).contains(&curve.audrc));
    }

    #[test]
    fn generation_is_reproducible(seed in any::<u64>(), family in prop::sample::select(vec![Family::An, Family::AnS, Family::Ls, Family::LsS, Family::Mnu])) {
        let spec = GeneratorSpec::new(family, 50, seed);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        prop_assert_eq!(format!("{:?}", a.pair), format!("{:?}", b.pair));
        prop_assert_eq!(a.true_direction, b.true_direction);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn swapping_mirrors_the_verdict(pair in pair_strategy(80), method in prop::sample::select(vec![Method::LociM, Method::LociH])) {
        let cfg = InferenceConfig::default();
        let fwd = infer(&pair, method, Estimator::SplineConcave, &cfg).unwrap();
        let back = infer(&pair.swapped(), method, Estimator::SplineConcave, &cfg).unwrap();
        prop_assert_eq!(format!("{:?}", back), format!("{:?}", fwd.mirrored()));
    }

    #[test]
    fn rescaling_keeps_the_verdict(pair in pair_strategy(80), c in prop::sample::select(vec![-7.5, -0.01, 0.3, 42.0])) {
        let cfg = InferenceConfig::default();
        let base = infer(&pair, Method::LociM, Estimator::SplineConcave, &cfg).unwrap();
        let scaled_x = SamplePair::new(pair.x.iter().map(|v| c * v).collect(), pair.y.clone()).unwrap();
        let scaled_y = SamplePair::new(pair.x.clone(), pair.y.iter().map(|v| c * v).collect()).unwrap();
        for p in [scaled_x, scaled_y] {
            prop_assert_eq!(infer(&p, Method::LociM, Estimator::SplineConcave, &cfg).unwrap().direction, base.direction);
        }
    }
}

#[test]
fn flipping_a_corpus_keeps_its_metrics() {
    let pairs = corpus(Family::Ls, 12, 80, 3, true).unwrap();
    let flipped: Vec<_> = pairs.iter().map(|p| p.flipped()).collect();
    let cfg = lsnm::bench::BenchmarkConfig::new(Method::LociM, Estimator::SplineConcave);
    let a = lsnm::bench::run_benchmark(&pairs, &cfg).unwrap().remove(0);
    let b = lsnm::bench::run_benchmark(&flipped, &cfg).unwrap().remove(0);
    assert_eq!(a.metrics.accuracy, b.metrics.accuracy);
    assert_eq!(a.metrics.audrc, b.metrics.audrc);
}
