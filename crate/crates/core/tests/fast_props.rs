use dcorkit::distance::{dcov2_v, pairwise_distances, u_center, ucov2, v_center, NegativePolicy, VCentering};
use dcorkit::fast::{dcor_auto, fast_dcov2_v_1d, fast_dcov2_v_1d_mode, fast_ucov2_1d, Dispatch, Path, PointEstimator, SortedWorkspace};
use dcorkit::rng::stream;
use dcorkit::PairedSample;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

fn column(v: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((v.len(), 1), v.to_vec()).unwrap()
}

fn naive_u(x: &[f64], y: &[f64]) -> f64 {
    let a = u_center(&pairwise_distances(column(x).view()).unwrap()).unwrap();
    let b = u_center(&pairwise_distances(column(y).view()).unwrap()).unwrap();
    ucov2(&a, &b).unwrap()
}

fn naive_v(x: &[f64], y: &[f64], mode: VCentering) -> f64 {
    let a = v_center(&pairwise_distances(column(x).view()).unwrap(), mode);
    let b = v_center(&pairwise_distances(column(y).view()).unwrap(), mode);
    dcov2_v(&a, &b).unwrap()
}

fn agree(fast: f64, naive: f64) -> bool {
    (fast - naive).abs() <= 1e-10 * naive.abs().max(1.0)
}

#[test]
fn gaussian_pairs_match_naive() {
    let mut ws = SortedWorkspace::default();
    let mut rng = stream(11, 0);
    for &n in &[5usize, 17, 64, 500] {
        for _ in 0..50 {
            let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let y: Vec<f64> = x.iter().map(|v| v * v + rng.sample::<f64, _>(StandardNormal)).collect();
            assert!(agree(fast_ucov2_1d(&x, &y, &mut ws).unwrap(), naive_u(&x, &y)), "n = {n}");
            assert!(agree(fast_dcov2_v_1d(&x, &y, &mut ws).unwrap(), naive_v(&x, &y, VCentering::Classic)));
        }
    }
}

#[test]
fn ties_match_naive() {
    let mut ws = SortedWorkspace::default();
    let x = [1.0, 1.0, 2.0, 2.0, 3.0];
    let y = [0.5, -1.0, 0.5, 2.0, 2.0];
    assert!(agree(fast_ucov2_1d(&x, &y, &mut ws).unwrap(), naive_u(&x, &y)));
    assert!(agree(fast_ucov2_1d(&x, &x, &mut ws).unwrap(), naive_u(&x, &x)));
    for mode in [VCentering::Classic, VCentering::ZeroDiagonal] {
        assert!(agree(fast_dcov2_v_1d_mode(&x, &y, mode, &mut ws).unwrap(), naive_v(&x, &y, mode)));
    }
}

#[test]
fn constant_column_and_two_points() {
    let mut ws = SortedWorkspace::default();
    assert_eq!(fast_dcov2_v_1d(&[2.5; 9], &[1.0, 3.0, 0.0, 4.0, 5.0, 2.0, 2.0, 7.0, 1.0], &mut ws).unwrap(), 0.0);
    assert!((fast_dcov2_v_1d(&[0.0, 1.0], &[0.0, 1.0], &mut ws).unwrap() - 0.25).abs() < 1e-15);
}

#[test]
fn v_zero_diagonal_reconciliation_n300() {
    let mut ws = SortedWorkspace::default();
    let mut rng = stream(12, 0);
    let x: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
    let y: Vec<f64> = x.iter().map(|v| (v * 6.0).sin() + 0.3 * rng.random::<f64>()).collect();
    for mode in [VCentering::Classic, VCentering::ZeroDiagonal] {
        assert!(agree(fast_dcov2_v_1d_mode(&x, &y, mode, &mut ws).unwrap(), naive_v(&x, &y, mode)));
    }
}

#[test]
fn rejects_short_input() {
    let mut ws = SortedWorkspace::default();
    assert!(fast_ucov2_1d(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &mut ws).is_err());
    assert!(fast_ucov2_1d(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0], &mut ws).is_err());
    assert!(fast_dcov2_v_1d(&[1.0, f64::NAN], &[1.0, 2.0], &mut ws).is_err());
}

#[test]
fn dispatch_routes_by_size_and_dimension() {
    let mut rng = stream(13, 0);
    let sample = |n: usize, p: usize, rng: &mut dcorkit::rng::StreamRng| {
        let xs = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal));
        let ys = Array2::from_shape_fn((n, 1), |(i, _)| xs[[i, 0]] + rng.sample::<f64, _>(StandardNormal));
        PairedSample::new(xs, ys).unwrap()
    };
    let small = sample(100, 1, &mut rng);
    let large = sample(1000, 1, &mut rng);
    let wide = sample(1000, 2, &mut rng);
    let auto = Dispatch::default();
    for est in [PointEstimator::V(VCentering::Classic), PointEstimator::U(NegativePolicy::Signed)] {
        assert_eq!(dcor_auto(&small, est, auto).unwrap().1, Path::Naive);
        assert_eq!(dcor_auto(&wide, est, auto).unwrap().1, Path::Naive);
        let (fast, path) = dcor_auto(&large, est, auto).unwrap();
        assert_eq!(path, Path::Fast);
        let (naive, _) = dcor_auto(&large, est, Dispatch::force_naive()).unwrap();
        assert!((fast.value - naive.value).abs() <= 1e-9);
    }
}
