use floquet_topo::disorder::{empirical_covariance, sample_field, DisorderField, DisorderSpec};
use floquet_topo::LatticeSpec;
use proptest::prelude::*;

fn fields(lat: &LatticeSpec, spec: &DisorderSpec, n: u64) -> Vec<DisorderField> {
    (0..n).map(|s| sample_field(lat, spec, s).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn uniform_values_are_bounded(w in 0.0..1.0f64, seed in any::<u64>(), sample in 0u64..1000) {
        let lat = LatticeSpec::torus(6, 6, 1.0).unwrap();
        let f = sample_field(&lat, &DisorderSpec::uncorrelated(w, seed), sample).unwrap();
        let bound = 3f64.sqrt() * w;
        prop_assert!(f.values.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn field_scales_linearly_in_strength(w in 0.01..1.0f64, sigma in 0.3..2.0f64, seed in any::<u64>()) {
        let lat = LatticeSpec::torus(6, 6, 1.0).unwrap();
        let one = sample_field(&lat, &DisorderSpec::correlated(1.0, sigma, seed), 0).unwrap();
        let scaled = sample_field(&lat, &DisorderSpec::correlated(w, sigma, seed), 0).unwrap();
        for (a, b) in one.values.iter().zip(&scaled.values) {
            prop_assert!((a * w - b).abs() < 1e-12);
        }
    }

    #[test]
    fn target_covariance_is_decreasing(w in 0.0..1.0f64, sigma in 0.1..3.0f64, d1 in 0.0..5.0f64, d2 in 0.0..5.0f64) {
        let spec = DisorderSpec::correlated(w, sigma, 0);
        prop_assert!((spec.covariance(0.0) - w * w).abs() < 1e-15);
        let (near, far) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(spec.covariance(near) >= spec.covariance(far));
    }
}

#[test]
fn same_seed_same_field() {
    let lat = LatticeSpec::torus(8, 8, 1.0).unwrap();
    for spec in [DisorderSpec::uncorrelated(0.2, 11), DisorderSpec::correlated(0.2, 1.0, 11)] {
        let a = sample_field(&lat, &spec, 4).unwrap();
        // drawing other samples in between must not matter
        let _ = sample_field(&lat, &spec, 3).unwrap();
        let b = sample_field(&lat, &spec, 4).unwrap();
        assert_eq!(a.values, b.values);
        let c = sample_field(&lat, &spec, 5).unwrap();
        assert_ne!(a.values, c.values);
        let other = DisorderSpec { seed: 12, ..spec };
        assert_ne!(a.values, sample_field(&lat, &other, 4).unwrap().values);
    }
}

#[test]
fn ribbon_fields() {
    let lat = LatticeSpec::ribbon(10, 6, 1.0).unwrap();
    assert!(sample_field(&lat, &DisorderSpec::correlated(0.1, 1.0, 2), 0).is_err());
    let f = sample_field(&lat, &DisorderSpec::uncorrelated(0.1, 2), 0).unwrap();
    assert_eq!(f.values.len(), lat.n_sites());
}

#[test]
fn invalid_specs_rejected() {
    let lat = LatticeSpec::torus(4, 4, 1.0).unwrap();
    assert!(sample_field(&lat, &DisorderSpec::uncorrelated(-0.1, 0), 0).is_err());
    assert!(sample_field(&lat, &DisorderSpec::correlated(0.1, 0.0, 0), 0).is_err());
    assert!(sample_field(&lat, &DisorderSpec::correlated(0.1, f64::NAN, 0), 0).is_err());
}

#[test]
fn zero_mean() {
    let lat = LatticeSpec::torus(12, 12, 1.0).unwrap();
    for spec in [DisorderSpec::uncorrelated(1.0, 5), DisorderSpec::correlated(1.0, 1.0, 5)] {
        let means: Vec<f64> =
            fields(&lat, &spec, 60).iter().map(|f| f.values.iter().sum::<f64>() / f.values.len() as f64).collect();
        let n = means.len() as f64;
        let m = means.iter().sum::<f64>() / n;
        let se = (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        assert!(m.abs() < 3.0 * se, "mean {m} se {se}");
    }
}

// Gaussian covariance W^2 exp(-r^2 / 2 sigma^2) at a few lattice displacements
#[test]
fn correlated_covariance_matches_gaussian() {
    let lat = LatticeSpec::torus(16, 16, 1.0).unwrap();
    let s3 = 3f64.sqrt();
    for sigma in [0.5, 1.0, 2.0] {
        let spec = DisorderSpec::correlated(1.0, sigma, 17);
        let fs = fields(&lat, &spec, 80);
        for d in [[0.0, 0.0], [0.0, 1.0], [s3, 0.0], [0.0, -2.0], [0.0, 4.0]] {
            let r2: f64 = d[0] * d[0] + d[1] * d[1];
            let expect = (-r2 / (2.0 * sigma * sigma)).exp();
            let est = empirical_covariance(&fs, d).unwrap();
            let err = (est.mean - expect).abs();
            assert!(err < 3.0 * est.std_err, "sigma {sigma} d {d:?}: {} vs {expect} (se {})", est.mean, est.std_err);
        }
    }
}

#[test]
fn uncorrelated_neighbours_independent() {
    let lat = LatticeSpec::torus(16, 16, 1.0).unwrap();
    let fs = fields(&lat, &DisorderSpec::uncorrelated(0.5, 8), 40);
    let var = empirical_covariance(&fs, [0.0, 0.0]).unwrap();
    assert!((var.mean - 0.25).abs() < 3.0 * var.std_err);
    let nn = empirical_covariance(&fs, [0.0, 1.0]).unwrap();
    assert!(nn.mean.abs() < 3.0 * nn.std_err);
}

#[test]
fn empty_input_is_error() {
    assert!(empirical_covariance(&[], [0.0, 0.0]).is_err());
}
