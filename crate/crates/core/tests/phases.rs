use floquet_topo::lattice::dirac_k;
use floquet_topo::phases::{
    analytic_boundary_curves, analytic_crossings, classify_clean, dirac_boundary_exact, gamma_boundary_a,
    haldane_effective, locate_closing, sweep_phase_diagram, Classification, ClosingPoint, DriveAxis, GapRef,
    PhaseLabel,
};
use floquet_topo::ModelParams;
use proptest::prelude::*;

fn equal(a: f64) -> ModelParams {
    ModelParams::new(a, a, 0.0)
}

// At Gamma the three drive phases cancel, so the sectors decouple and the
// closings are exact for any truncation.
#[test]
fn gamma_closings_located_numerically() {
    let half = locate_closing(equal, [0.0, 0.0], 0.5, 3, 0.1, 0.25, 1e-10).unwrap();
    let zero = locate_closing(equal, [0.0, 0.0], 0.0, 3, 0.25, 0.4, 1e-10).unwrap();
    assert!((half - 1.0 / 6.0).abs() < 1e-8, "{half}");
    assert!((zero - 1.0 / 3.0).abs() < 1e-8, "{zero}");
    assert!((gamma_boundary_a(0.0, 0.5, 1.0).unwrap() - half).abs() < 1e-8);
    assert!((gamma_boundary_a(0.0, 1.0, 1.0).unwrap() - zero).abs() < 1e-8);
}

fn dirac_closing(lambda: f64) -> f64 {
    let k = dirac_k(1.0);
    let make = |b: f64| ModelParams::new(0.2, b, lambda);
    locate_closing(make, k, 0.0, 4, 0.01, 0.5, 1e-10)
        .or_else(|_| locate_closing(make, [-k[0], -k[1]], 0.0, 4, 0.01, 0.5, 1e-10))
        .unwrap()
}

#[test]
fn dirac_closing_matches_exact_form() {
    for lambda in [0.04, 0.1, 0.2] {
        let b = dirac_closing(lambda);
        assert!((b - dirac_boundary_exact(lambda, 1.0)).abs() < 1e-7, "Lambda {lambda}: {b}");
    }
}

#[test]
fn haldane_critical_stagger() {
    let b = 0.1;
    let h = haldane_effective(&ModelParams::new(b, b, 0.0));
    let make = |l: f64| ModelParams::new(b, b, l);
    let k = dirac_k(1.0);
    let lc = locate_closing(make, k, 0.0, 4, 0.001, 0.1, 1e-10)
        .or_else(|_| locate_closing(make, [-k[0], -k[1]], 0.0, 4, 0.001, 0.1, 1e-10))
        .unwrap();
    // 4 Lc (1 - Lc) / 9 = B^2
    assert!((4.0 * lc * (1.0 - lc) / 9.0 - b * b).abs() < 1e-9);
    assert!((lc - h.critical_lambda).abs() / lc < 0.03);
}

#[test]
fn curves_contain_gamma_boundaries() {
    let curves = analytic_boundary_curves(&[0.0, 0.04], 0.5, 1.0);
    let at = |gap: GapRef| {
        curves
            .iter()
            .filter(|c| c.point == ClosingPoint::Gamma && c.gap == gap)
            .flat_map(|c| c.points.iter().copied())
            .filter(|p| p[0] == 0.0)
            .map(|p| p[1])
            .collect::<Vec<_>>()
    };
    assert!(at(GapRef::Half).iter().any(|a| (a - 1.0 / 6.0).abs() < 1e-12));
    assert!(at(GapRef::Zero).iter().any(|a| (a - 1.0 / 3.0).abs() < 1e-12));
    let dirac: Vec<[f64; 2]> = curves
        .iter()
        .filter(|c| c.point == ClosingPoint::K && c.gap == GapRef::Zero && c.h == 0.5)
        .flat_map(|c| c.points.iter().copied())
        .collect();
    let at_004 = dirac.iter().find(|p| p[0] == 0.04).unwrap();
    assert!((at_004[1] - dirac_boundary_exact(0.04, 1.0)).abs() < 1e-12);
}

#[test]
fn single_crossing_changes_phase() {
    let (p0, p1) = (equal(0.12), equal(0.2));
    let c = analytic_crossings(&p0, &p1);
    assert_eq!(c.len(), 1);
    assert_eq!((c[0].point, c[0].gap), (ClosingPoint::Gamma, GapRef::Half));
    assert_eq!(classify_clean(&p0, 3, 24).unwrap().label(), Some(PhaseLabel::FtiMinus));
    assert_eq!(classify_clean(&p1, 3, 24).unwrap().label(), Some(PhaseLabel::Afti));
}

fn gapped(p: &ModelParams) -> Option<PhaseLabel> {
    match classify_clean(p, 3, 24).ok()? {
        Classification::Phase { indices, gap0, gap_half } if gap0.min(gap_half) > 0.02 => Some(indices.label),
        _ => None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // no analytic closing on the segment means no change of phase
    #[test]
    fn phase_constant_without_crossings(a0 in 0.03..0.45f64, a1 in 0.03..0.45f64, l in 0.0..0.4f64) {
        let (p0, p1) = (ModelParams::new(a0, a0, l), ModelParams::new(a1, a1, l));
        let (Some(x), Some(y)) = (gapped(&p0), gapped(&p1)) else {
            return Ok(());
        };
        if analytic_crossings(&p0, &p1).is_empty() {
            prop_assert_eq!(x, y);
        }
    }
}

#[test]
fn gap_closing_reported_as_boundary() {
    match classify_clean(&equal(1.0 / 6.0), 3, 24).unwrap() {
        Classification::Boundary { point, eps, .. } => {
            assert_eq!(point, ClosingPoint::Gamma);
            assert_eq!(eps, 0.5);
        }
        other => panic!("expected a boundary, got {other:?}"),
    }
}

#[test]
fn sweep_covers_grid() {
    let pts =
        sweep_phase_diagram(&ModelParams::new(0.0, 0.0, 0.0), &[0.12, 0.2], &[0.0, 0.3], DriveAxis::EqualsA, 2, 24);
    assert_eq!(pts.len(), 4);
    let p = pts.iter().find(|p| p.i_a == 1 && p.i_lambda == 0).unwrap();
    assert_eq!(p.params.drive, 0.2);
    assert_eq!(p.result.as_ref().unwrap().label(), Some(PhaseLabel::Afti));
    let fixed =
        sweep_phase_diagram(&ModelParams::new(0.0, 0.0, 0.0), &[0.4], &[0.3], DriveAxis::Fixed { value: 0.25 }, 3, 24);
    assert_eq!(fixed[0].result.as_ref().unwrap().label(), Some(PhaseLabel::Sfti));
}

#[test]
fn open_gap_is_not_a_closing() {
    assert!(locate_closing(equal, [0.0, 0.0], 0.5, 3, 0.2, 0.3, 1e-10).is_err());
}
