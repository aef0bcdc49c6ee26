use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use entropy_core::domain::phi_unchecked;
use entropy_core::estimators::{
    build_poly_table, miller_madow, phi_approximation, plugin_bias_probe, plugin_entropy,
    wu_yang_estimate, AdaptiveZeroing, EstimatorConfig, PolyEstimator, PolyEstimatorTable,
};
use entropy_core::polyapprox::ChebApprox;
use entropy_core::sampling::{sample_multinomial, sample_poissonized, Seed};
use entropy_core::{Distribution, Histogram};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use proptest::prelude::*;

fn approx(degree: usize) -> Arc<ChebApprox> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<ChebApprox>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(a) = cache.lock().unwrap().get(&degree) {
        return a.clone();
    }
    let a = Arc::new(phi_approximation(degree).unwrap());
    cache.lock().unwrap().insert(degree, a.clone());
    a
}

fn table(k: usize, n: u64, cfg: &EstimatorConfig) -> PolyEstimatorTable {
    build_poly_table(k, n, cfg, &approx(cfg.degree(k, n).unwrap())).unwrap()
}

/// `sum_j g(j) poi(lambda, j)`, continued until the Poisson tail is below
/// 1e-14 and the summand is negligible.
fn poisson_expectation(t: &PolyEstimatorTable, lambda: f64) -> f64 {
    let mut pmf = (-lambda).exp();
    let mut cdf = 0.0;
    let mut sum = 0.0;
    let mut j = 0u64;
    loop {
        let term = t.g(j) * pmf;
        sum += term;
        cdf += pmf;
        if j as f64 > lambda && 1.0 - cdf < 1e-14 && term.abs() < 1e-20 {
            return sum;
        }
        j += 1;
        pmf *= lambda / j as f64;
    }
}

#[test]
fn unbiased_for_implied_polynomial() {
    let cfg = EstimatorConfig::default();
    for (k, n) in [(10_000, 1_000), (100_000, 5_000), (1_000, 50)] {
        let t = table(k, n, &cfg);
        let right = t.scale() / n as f64;
        for i in 0..=40 {
            let p = right * i as f64 / 40.0;
            let e = poisson_expectation(&t, n as f64 * p);
            let implied = t.implied_poly(p);
            assert!(
                (e - implied).abs() <= 1e-8,
                "k={k} n={n} p={p}: {e} vs {implied}"
            );
            // Bias is bounded by the rescaled approximation error.
            assert!(
                (e - phi_unchecked(p)).abs() <= t.uniform_error() + 1e-8,
                "p={p}"
            );
        }
    }
}

#[test]
fn small_quadratic_table_is_unbiased() {
    // a = (0, 0, 1), c1 log k = 2, n = 4 gives P(p) = 2 p^2 + p log 2.
    let k = 10_000usize;
    let cfg = EstimatorConfig {
        c0: 2.5 / (k as f64).ln(),
        c1: 2.0 / (k as f64).ln(),
        ..Default::default()
    };
    let quad = entropy_core::polyapprox::remez(|x: f64| x * x, (0.0, 1.0), 2, &Default::default())
        .unwrap();
    let t = build_poly_table(k, 4, &cfg, &quad).unwrap();
    for p in [0.05, 0.2] {
        let e = poisson_expectation(&t, 4.0 * p);
        let exact = 2.0 * p * p + p * 2f64.ln();
        assert!((e - exact).abs() < 1e-10, "{e} vs {exact}");
    }
}

fn rational(x: f64) -> BigRational {
    BigRational::from_f64(x).unwrap()
}

/// `(1/n)[sum_m a_m (j)_m / S^(m-1) + linear j]` in exact arithmetic.
fn exact_g(a: &[f64], scale: f64, linear: f64, n: u64, j: u64) -> BigRational {
    let s = rational(scale);
    let mut sum = BigRational::zero();
    let mut falling = BigRational::from_integer(BigInt::from(1));
    let mut s_pow = s.clone().recip();
    for (m, &am) in a.iter().enumerate() {
        sum += rational(am) * &falling / &s_pow;
        falling *= BigRational::from_integer(BigInt::from(j as i64 - m as i64));
        s_pow *= &s;
    }
    sum += rational(linear) * BigRational::from_integer(BigInt::from(j));
    sum / BigRational::from_integer(BigInt::from(n))
}

#[test]
fn g_matches_exact_rational_evaluation() {
    let k = 10_000usize;
    let n = 2_000;
    let ln_k = (k as f64).ln();
    for degree in [4usize, 12, 20, 30] {
        let cfg = EstimatorConfig {
            c0: (degree as f64 + 0.5) / ln_k,
            ..Default::default()
        };
        let t = table(k, n, &cfg);
        assert_eq!(t.degree(), degree);
        let a = t.source().coeffs();
        for j in (0..=200).step_by(7).chain([1, 2, 3, 199, 200]) {
            let exact = exact_g(a, t.scale(), t.linear_term(), n, j);
            let got = t.g(j);
            let diff = (rational(got) - &exact).abs().to_f64().unwrap();
            let mag = exact.abs().to_f64().unwrap();
            assert!(
                diff <= 1e-9 * mag,
                "L={degree} j={j}: {got} vs {mag}, diff {diff}"
            );
        }
    }
}

#[test]
fn table_constant_term() {
    let cfg = EstimatorConfig::default();
    let t = table(100_000, 1_000, &cfg);
    assert_eq!(t.degree(), 18);
    assert!((t.scale() - 3.5 * (100_000f64).ln()).abs() < 1e-12);
    assert!((t.scale() - 40.0).abs() < 0.3);
    let a0 = t.source().coeffs()[0];
    assert!((t.g(0) - a0 * t.scale() / 1_000.0).abs() < 1e-15);

    for zeroing in [AdaptiveZeroing::Coefficient, AdaptiveZeroing::ZeroCountOnly] {
        let cfg = EstimatorConfig {
            adaptive: true,
            zeroing,
            ..Default::default()
        };
        let t = table(100_000, 1_000, &cfg);
        assert_eq!(t.g(0), 0.0);
        assert_eq!(t.degree(), (1.6 * 1_000f64.ln()).floor() as usize);
    }
}

#[test]
fn degree_mismatch_is_rejected() {
    let cfg = EstimatorConfig::default();
    assert!(build_poly_table(10_000, 100, &cfg, &approx(5)).is_err());
}

#[test]
fn plugin_examples() {
    assert_eq!(plugin_entropy(&Histogram::new(vec![5, 0])).unwrap(), 0.0);
    let h = Histogram::new(vec![3, 2]);
    let direct = phi_unchecked(0.6) + phi_unchecked(0.4);
    assert!((plugin_entropy(&h).unwrap() - direct).abs() < 1e-15);
    assert!((plugin_entropy(&h).unwrap() - 0.6730117).abs() < 1e-7);
    assert!((miller_madow(&h).unwrap() - 0.7730117).abs() < 1e-7);
    assert!((plugin_entropy(&Histogram::new(vec![1; 4])).unwrap() - 4f64.ln()).abs() < 1e-15);
    assert!(
        (miller_madow(&Histogram::new(vec![1, 1])).unwrap() - (2f64.ln() + 0.25)).abs() < 1e-15
    );
    assert!(plugin_entropy(&Histogram::zeros(3)).is_err());
    assert!(miller_madow(&Histogram::zeros(3)).is_err());
}

fn arb_case() -> impl Strategy<Value = (Vec<u64>, usize)> {
    (
        prop::collection::vec(prop_oneof![3 => 0u64..4, 1 => 0u64..200], 2..80),
        0usize..500,
    )
        .prop_map(|(counts, extra)| {
            let k = counts.len() + extra;
            (counts, k.max(2))
        })
        .prop_filter("non-empty sample", |(c, _)| c.iter().sum::<u64>() > 0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn estimate_in_range((counts, k) in arb_case(), c2 in 0.1f64..4.0) {
        let h = Histogram::new(counts).padded(k).unwrap();
        let cfg = EstimatorConfig { c2, ..Default::default() };
        let t = table(k, h.n(), &cfg);
        let v = wu_yang_estimate(&h, None, k, &cfg, &t).unwrap();
        prop_assert!(v >= 0.0 && v <= (k as f64).ln(), "{}", v);
    }

    #[test]
    fn estimates_are_permutation_invariant((counts, k) in arb_case(), rot in 0usize..1000) {
        let h = Histogram::new(counts).padded(k).unwrap();
        let mut permuted = h.counts().to_vec();
        permuted.rotate_left(rot % k);
        permuted.reverse();
        let g = Histogram::new(permuted);
        let cfg = EstimatorConfig::default();
        let t = table(k, h.n(), &cfg);
        prop_assert_eq!(
            wu_yang_estimate(&h, None, k, &cfg, &t).unwrap().to_bits(),
            wu_yang_estimate(&g, None, k, &cfg, &t).unwrap().to_bits()
        );
        prop_assert_eq!(plugin_entropy(&h).unwrap().to_bits(), plugin_entropy(&g).unwrap().to_bits());
        prop_assert_eq!(miller_madow(&h).unwrap().to_bits(), miller_madow(&g).unwrap().to_bits());
    }

    #[test]
    fn miller_madow_adds_support_correction(counts in prop::collection::vec(0u64..30, 1..50)) {
        let h = Histogram::new(counts);
        prop_assume!(h.n() > 0);
        let correction = (h.distinct() as f64 - 1.0) / (2.0 * h.n() as f64);
        prop_assert_eq!(miller_madow(&h).unwrap(), plugin_entropy(&h).unwrap() + correction);
    }
}

#[test]
fn branch_selection_examples() {
    let k = 50;
    let cfg = EstimatorConfig::default();
    // All counts empty: every symbol takes g(0).
    let t = table(k, 10, &cfg);
    let v = wu_yang_estimate(&Histogram::zeros(k), None, k, &cfg, &t).unwrap();
    assert_eq!(v, (k as f64 * t.g(0)).clamp(0.0, (k as f64).ln()));
    let adaptive = EstimatorConfig {
        adaptive: true,
        ..cfg
    };
    let ta = table(k, 10, &adaptive);
    assert_eq!(
        wu_yang_estimate(&Histogram::zeros(k), None, k, &adaptive, &ta).unwrap(),
        0.0
    );

    // Every count above the threshold: bias-corrected plug-in for all symbols.
    let counts = Histogram::new(vec![100; 2]);
    let t = table(2, 200, &cfg);
    let v = wu_yang_estimate(
        &counts,
        None,
        2,
        &EstimatorConfig {
            clamp_upper: false,
            ..cfg
        },
        &t,
    )
    .unwrap();
    assert!((v - (2f64.ln() + 2.0 / 400.0)).abs() < 1e-15);
}

#[test]
fn split_mode_uses_selection_histogram() {
    let k = 100;
    let cfg = EstimatorConfig {
        split: true,
        clamp_upper: false,
        ..Default::default()
    };
    let t = table(k, 1_000, &cfg);
    let est = Histogram::new(vec![10; k]);
    let all_low = Histogram::zeros(k);
    let all_high = Histogram::new(vec![1_000; k]);
    let poly = wu_yang_estimate(&est, Some(&all_low), k, &cfg, &t).unwrap();
    let plug = wu_yang_estimate(&est, Some(&all_high), k, &cfg, &t).unwrap();
    assert!((poly - (k as f64 * t.g(10)).max(0.0)).abs() < 1e-12);
    assert!((plug - k as f64 * (phi_unchecked(0.01) + 0.0005)).abs() < 1e-12);
    assert!(wu_yang_estimate(&est, None, k, &cfg, &t).is_err());
    assert!(wu_yang_estimate(&est, Some(&Histogram::zeros(k + 1)), k, &cfg, &t).is_err());
}

#[test]
fn data_rich_uniform_is_accurate() {
    let k = 10_000;
    let n = 1_000_000u64;
    let d = Distribution::uniform(k).unwrap();
    let est = PolyEstimator::new(k, n, EstimatorConfig::default()).unwrap();
    let mean = (0..50)
        .map(|t| {
            let h = sample_poissonized(&d, n as f64, Seed::new(21, t)).unwrap();
            est.estimate(&h, None).unwrap()
        })
        .sum::<f64>()
        / 50.0;
    assert!((mean - (k as f64).ln()).abs() < 0.01, "{mean}");
}

#[test]
fn plugin_bias_examples() {
    let point = Distribution::point_mass(10, 3).unwrap();
    assert_eq!(
        plugin_bias_probe(&point, 100, 100, Seed::new(1, 0)).unwrap(),
        0.0
    );
    assert!(plugin_bias_probe(&point, 100, 99, Seed::new(1, 0)).is_err());

    let d = Distribution::uniform(2).unwrap();
    let n = 1_000_000;
    let trials = 400;
    let seed = Seed::new(4, 0);
    let bias = plugin_bias_probe(&d, n, trials, seed).unwrap();
    let samples: Vec<f64> = (0..trials)
        .map(|t| {
            plugin_entropy(&sample_multinomial(&d, n, Seed::new(4, t as u64))).unwrap() - 2f64.ln()
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / trials as f64;
    assert!((mean - bias).abs() < 1e-15, "probe uses stream + t");
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
    assert!(
        bias.abs() <= 1e-6 + 5.0 * sd / (trials as f64).sqrt(),
        "{bias}"
    );
}
