use dcorkit::combiner::{
    bootstrap_sweep, combine_with_lambda, dcor_combo, silverman_bandwidth, smoothed_bootstrap_moments, BandwidthRule,
    BootstrapConfig, MomentSource, DEFAULT_BANDWIDTH_GRID,
};
use dcorkit::distance::{dcor_u, dcor_v, NegativePolicy, VCentering};
use dcorkit::fast::Dispatch;
use dcorkit::models::{sample_model, ModelSpec};
use dcorkit::rng::stream;
use dcorkit::sim::{metrics, rep_bootstrap_seed, rep_seed};
use dcorkit::PairedSample;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn fgm(theta: f64, n: usize, seed: u64) -> PairedSample {
    sample_model(ModelSpec::Fgm { theta }, n, seed).unwrap()
}

fn quick_cfg(seed: u64) -> BootstrapConfig {
    BootstrapConfig { replications: 100, seed, dispatch: Dispatch::always_fast(), ..Default::default() }
}

#[test]
fn endpoints_reproduce_components() {
    let s = fgm(0.3, 40, 1);
    for policy in NegativePolicy::ALL {
        let v = combine_with_lambda(&s, policy, 0.0, VCentering::Classic, Dispatch::default()).unwrap();
        assert_eq!(v.value, dcor_v(&s, VCentering::Classic).unwrap().value);
        let u = combine_with_lambda(&s, policy, 1.0, VCentering::Classic, Dispatch::default()).unwrap();
        assert_eq!(u.value, dcor_u(&s, policy).unwrap().value);
    }
    assert!(combine_with_lambda(&s, NegativePolicy::Signed, 1.5, VCentering::Classic, Dispatch::default()).is_err());
}

#[test]
fn bootstrap_is_deterministic_across_thread_counts() {
    let s = fgm(0.5, 60, 2);
    let cfg = quick_cfg(99);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = one.install(|| smoothed_bootstrap_moments(&s, &cfg).unwrap());
    let b = three.install(|| smoothed_bootstrap_moments(&s, &cfg).unwrap());
    assert_eq!(a, b);
    assert_eq!(a, smoothed_bootstrap_moments(&s, &cfg).unwrap());
    assert_ne!(a, smoothed_bootstrap_moments(&s, &quick_cfg(100)).unwrap());
}

#[test]
fn degenerate_margin_still_bootstraps() {
    let x = vec![1.0; 30];
    let y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
    let s = PairedSample::from_columns(x, y).unwrap();
    let m = smoothed_bootstrap_moments(&s, &quick_cfg(3)).unwrap();
    assert!(m.var_u.is_finite() && m.var_v.is_finite() && m.var_u > 0.0);
    assert!((0.0..=1.0).contains(&m.lambda0));
    assert_eq!(m.source, MomentSource::Bootstrap);
}

#[test]
fn summaries_respect_cauchy_schwarz() {
    for seed in 0..10 {
        let s = fgm(0.25 * (seed % 5) as f64, 50, seed);
        let m = smoothed_bootstrap_moments(&s, &quick_cfg(seed)).unwrap();
        assert!(m.var_u >= 0.0 && m.var_v >= 0.0);
        assert!(m.cov_uv.abs() <= (m.var_u * m.var_v).sqrt() + 1e-12);
    }
}

#[test]
fn multivariate_sample_uses_pooled_bandwidth() {
    let mut rng = stream(4, 0);
    let xs = Array2::from_shape_fn((40, 2), |_| rng.sample::<f64, _>(StandardNormal));
    let ys = Array2::from_shape_fn((40, 1), |(i, _)| xs[[i, 0]] - xs[[i, 1]] + rng.sample::<f64, _>(StandardNormal));
    let s = PairedSample::new(xs.clone(), ys).unwrap();
    let cfg = quick_cfg(5);
    let pooled: Vec<f64> = xs.iter().copied().collect();
    assert_eq!(cfg.bandwidths_for(&s)[0].0, silverman_bandwidth(&pooled));
    let c = dcor_combo(&s, &cfg).unwrap();
    assert!(c.estimate.value >= c.u.value.min(c.v.value) && c.estimate.value <= c.u.value.max(c.v.value));
}

#[test]
fn fixed_bandwidth_is_used_as_given() {
    let s = fgm(0.0, 30, 6);
    let cfg = BootstrapConfig { bandwidth: BandwidthRule::Fixed { h1: 0.01, h2: 0.02 }, ..quick_cfg(7) };
    assert_eq!(smoothed_bootstrap_moments(&s, &cfg).unwrap().bandwidth, Some((0.01, 0.02)));
}

#[test]
fn silverman_on_standard_normal() {
    let mut rng = stream(8, 0);
    let n = 200_000;
    let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let h = silverman_bandwidth(&v);
    let expected = 0.9 * (n as f64).powf(-0.2);
    assert!((h / expected - 1.0).abs() < 0.01, "h = {h}, expected ≈ {expected}");
}

#[test]
fn silverman_uniform_hand_evaluation() {
    let mut rng = stream(9, 0);
    let v: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
    // sample sd and R-style (type 7) quartiles, evaluated independently
    let mean = v.iter().sum::<f64>() / 100.0;
    let sd = (v.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / 99.0).sqrt();
    let mut s = v.clone();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| {
        let h = 99.0 * p;
        let i = h as usize;
        s[i] + (h - i as f64) * (s[i + 1] - s[i])
    };
    let iqr = q(0.75) - q(0.25);
    let expected = 0.9 * sd.min(iqr / 1.34) / 100f64.powf(0.2);
    assert!((silverman_bandwidth(&v) - expected).abs() < 1e-14);
}

#[test]
fn oracle_weight_beats_both_estimators_under_independence() {
    let reps = 1000;
    let (mut u, mut v) = (Vec::new(), Vec::new());
    for r in 0..reps {
        let s = fgm(0.0, 100, rep_seed(21, r));
        u.push(combine_with_lambda(&s, NegativePolicy::Signed, 1.0, VCentering::Classic, Dispatch::always_fast()).unwrap().value);
        v.push(combine_with_lambda(&s, NegativePolicy::Signed, 0.0, VCentering::Classic, Dispatch::always_fast()).unwrap().value);
    }
    let m = dcorkit::combiner::moments_from_draws(&u, &v, 0.0, 0);
    let lambda = dcorkit::combiner::lambda_opt(&m).unwrap();
    assert!((lambda - 0.7167).abs() <= 0.1, "λ0 = {lambda}");
    let c: Vec<f64> = u.iter().zip(&v).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
    let (mc, mu, mv) = (metrics(&c, 0.0), metrics(&u, 0.0), metrics(&v, 0.0));
    let diff: Vec<f64> = c.iter().zip(&u).map(|(a, b)| a * a - b * b).collect();
    let se = (metrics(&diff, 0.0).variance / reps as f64).sqrt();
    assert!(mc.mse <= mv.mse);
    assert!(mc.mse <= mu.mse + 2.0 * se);
}

#[test]
fn smaller_bandwidth_is_no_worse_under_independence() {
    let reps = 200;
    let grid = [DEFAULT_BANDWIDTH_GRID[0], DEFAULT_BANDWIDTH_GRID[7]];
    let bandwidths: Vec<(f64, f64)> = grid.iter().map(|&h| (h, h)).collect();
    let mut diff = Vec::with_capacity(reps);
    let mut sq = [0.0; 2];
    for r in 0..reps {
        let s = fgm(0.0, 100, rep_seed(31, r));
        let cfg = BootstrapConfig { replications: 200, seed: rep_bootstrap_seed(31, r), ..quick_cfg(0) };
        let u = combine_with_lambda(&s, NegativePolicy::Signed, 1.0, VCentering::Classic, Dispatch::always_fast()).unwrap().value;
        let v = combine_with_lambda(&s, NegativePolicy::Signed, 0.0, VCentering::Classic, Dispatch::always_fast()).unwrap().value;
        let errs: Vec<f64> = bootstrap_sweep(&s, &cfg, &bandwidths)
            .unwrap()
            .iter()
            .map(|m| (m.lambda0 * u + (1.0 - m.lambda0) * v).powi(2))
            .collect();
        sq[0] += errs[0];
        sq[1] += errs[1];
        diff.push(errs[0] - errs[1]);
    }
    let d = metrics(&diff, 0.0);
    let se = (d.variance / reps as f64).sqrt();
    assert!(d.mean <= 2.0 * se, "MSE(h small) {} vs MSE(h large) {}", sq[0] / reps as f64, sq[1] / reps as f64);
}

#[test]
fn gridded_combo_mse_near_table_value() {
    // ldCor column, FGM θ = 0, n = 100: MSE 0.0142 within 25%
    let reps = 300;
    let cfg = BootstrapConfig {
        replications: 1000,
        bandwidth: BandwidthRule::Grid(DEFAULT_BANDWIDTH_GRID.to_vec()),
        dispatch: Dispatch::always_fast(),
        ..Default::default()
    };
    let mut sim = dcorkit::sim::SimConfig::new(
        ModelSpec::Fgm { theta: 0.0 },
        100,
        reps,
        vec![dcorkit::sim::EstimatorKind::Combo(NegativePolicy::Signed)],
        41,
    );
    sim.bootstrap = cfg;
    sim.dispatch = Dispatch::always_fast();
    let r = dcorkit::sim::run_simulation(&sim).unwrap();
    let mse = r.rows[0].mse;
    assert!((mse - 0.0142).abs() <= 0.25 * 0.0142, "MSE {mse}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn combination_is_convex(seed in any::<u64>(), n in 5usize..40, policy in prop::sample::select(NegativePolicy::ALL.to_vec())) {
        let s = fgm(0.5, n, seed);
        let cfg = BootstrapConfig { replications: 20, policy, seed, ..Default::default() };
        let c = dcor_combo(&s, &cfg).unwrap();
        let (lo, hi) = (c.u.value.min(c.v.value), c.u.value.max(c.v.value));
        prop_assert!(c.estimate.value >= lo - 1e-15 && c.estimate.value <= hi + 1e-15);
        prop_assert!((0.0..=1.0).contains(&c.moments.lambda0));
    }
}
