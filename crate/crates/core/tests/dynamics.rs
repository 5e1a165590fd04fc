use std::f64::consts::PI;

use floquet_topo::disorder::{sample_field, DisorderField, DisorderSpec};
use floquet_topo::dynamics::{
    chirality_metric, eigenphase_quasienergies, evolve_wavepacket, evolve_wavepacket_with, floquet_consistency,
    period_propagator, period_propagator_with, ribbon_bloch_propagator, ribbon_bloch_propagator_with, ribbon_momenta,
    top_edge_red_site, Integrator, DEFAULT_STEPS,
};
use floquet_topo::io::{edge_density_rows, total_density_rows};
use floquet_topo::model::instantaneous_hamiltonian;
use floquet_topo::spectrum::{exp_hermitian, unitarity_defect};
use floquet_topo::{CMat, LatticeSpec, ModelParams};

const AFTI: (f64, f64, f64) = (0.25, 0.25, 0.0);
const SFTI: (f64, f64, f64) = (0.4, 0.25, 0.3);

fn params((a, b, l): (f64, f64, f64)) -> ModelParams {
    ModelParams::new(a, b, l)
}

fn frobenius(m: &CMat) -> f64 {
    let mut s = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            s += m.read(i, j).norm_sqr();
        }
    }
    s.sqrt()
}

#[test]
fn static_limit_is_exponential() {
    let lat = LatticeSpec::ribbon(4, 3, 1.0).unwrap();
    let p = ModelParams::new(0.3, 0.0, 0.1);
    let u = period_propagator(&lat, &p, None, 32).unwrap();
    let h = instantaneous_hamiltonian(0.0, &lat, &p, None).unwrap();
    let exact = exp_hermitian(&h, p.period());
    let d = &u - &exact;
    let mut worst: f64 = 0.0;
    for i in 0..d.nrows() {
        for j in 0..d.ncols() {
            worst = worst.max(d.read(i, j).norm());
        }
    }
    assert!(worst < 1e-9, "{worst:e}");
}

#[test]
fn propagators_are_unitary() {
    let lat = LatticeSpec::ribbon(4, 3, 1.0).unwrap();
    let v = sample_field(&lat, &DisorderSpec::uncorrelated(0.1, 1), 0).unwrap();
    for integrator in [Integrator::Midpoint, Integrator::CommutatorFree4] {
        let u = period_propagator_with(&lat, &params(AFTI), Some(&v), 64, integrator).unwrap();
        assert!(unitarity_defect(&u) < 1e-10);
    }
}

#[test]
fn default_steps_self_converge() {
    for pt in [AFTI, SFTI] {
        let p = params(pt);
        let u1 = ribbon_bloch_propagator(0.7, 8, &p, DEFAULT_STEPS).unwrap();
        let u2 = ribbon_bloch_propagator(0.7, 8, &p, 2 * DEFAULT_STEPS).unwrap();
        let d = frobenius(&(&u1 - &u2));
        assert!(d < 1e-6, "{d:e}");
    }
}

// Richardson: errors of a method of order q shrink by 2^q per halving of the step
#[test]
fn integrator_orders() {
    let p = params(AFTI);
    for (integrator, order) in [(Integrator::Midpoint, 2.0), (Integrator::CommutatorFree4, 4.0)] {
        let u = |n| ribbon_bloch_propagator_with(0.7, 6, &p, n, integrator).unwrap();
        let (a, b, c) = (u(32), u(64), u(128));
        let ratio = frobenius(&(&a - &b)) / frobenius(&(&b - &c));
        let expect = 2f64.powf(order);
        assert!((ratio / expect - 1.0).abs() < 0.1, "{integrator:?}: ratio {ratio}");
    }
}

#[test]
fn eigenphases_match_truncated_operator() {
    for pt in [AFTI, SFTI] {
        let p = params(pt);
        for kx in [0.0, 0.9, 2.1, PI] {
            let d = floquet_consistency(kx, 6, &p, 4, DEFAULT_STEPS).unwrap();
            assert!(d < 1e-3, "{pt:?} kx {kx}: {d:e}");
        }
    }
}

// the dense ribbon propagator decomposes into the Bloch blocks at the allowed kx
#[test]
fn dense_and_bloch_propagators_share_eigenphases() {
    let lat = LatticeSpec::ribbon(6, 3, 1.0).unwrap();
    let p = params(SFTI);
    let dense = eigenphase_quasienergies(&period_propagator(&lat, &p, None, 64).unwrap(), &p).unwrap();
    let mut blocks = Vec::new();
    for kx in ribbon_momenta(&lat) {
        blocks.extend(eigenphase_quasienergies(&ribbon_bloch_propagator(kx, lat.ny, &p, 64).unwrap(), &p).unwrap());
    }
    blocks.sort_by(|a, b| a.total_cmp(b));
    assert_eq!(dense.len(), blocks.len());
    let worst = dense.iter().zip(&blocks).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst:e}");
}

#[test]
fn clean_and_dense_evolutions_agree() {
    let lat = LatticeSpec::ribbon(8, 4, 1.0).unwrap();
    let p = params(AFTI);
    let start = top_edge_red_site(&lat, 3);
    let bloch = evolve_wavepacket_with(start, 4, &lat, &p, None, 64, 2).unwrap();
    let dense = evolve_wavepacket_with(start, 4, &lat, &p, Some(&DisorderField::zeros(&lat)), 64, 2).unwrap();
    assert_eq!(bloch.times, dense.times);
    for (a, b) in bloch.rho.iter().zip(&dense.rho) {
        let worst = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst:e}");
    }
}

#[test]
fn norm_conserved_over_fifty_periods() {
    let lat = LatticeSpec::ribbon(30, 8, 1.0).unwrap();
    let p = params(AFTI);
    let h = evolve_wavepacket(top_edge_red_site(&lat, 15), 50, &lat, &p, None, DEFAULT_STEPS).unwrap();
    for f in 0..h.n_frames() {
        assert!((h.norm(f) - 1.0).abs() < 1e-8);
    }
    let small = LatticeSpec::ribbon(10, 4, 1.0).unwrap();
    let v = sample_field(&small, &DisorderSpec::uncorrelated(0.1, 4), 0).unwrap();
    let hd = evolve_wavepacket(top_edge_red_site(&small, 5), 50, &small, &p, Some(&v), DEFAULT_STEPS).unwrap();
    assert!((hd.norm(hd.n_frames() - 1) - 1.0).abs() < 1e-8);
}

#[test]
fn snapshots_refine_stroboscopic_record() {
    let lat = LatticeSpec::ribbon(8, 4, 1.0).unwrap();
    let p = params(AFTI);
    let start = top_edge_red_site(&lat, 2);
    let coarse = evolve_wavepacket(start, 3, &lat, &p, None, 64).unwrap();
    let fine = evolve_wavepacket_with(start, 3, &lat, &p, None, 64, 4).unwrap();
    assert_eq!(fine.n_frames(), 13);
    let strobe = fine.stroboscopic_frames();
    assert_eq!(strobe, vec![0, 4, 8, 12]);
    for (i, &f) in strobe.iter().enumerate() {
        let worst = coarse.rho[i].iter().zip(&fine.rho[f]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-12);
    }
    assert_eq!(edge_density_rows(&fine).len(), 13 * 2 * lat.nx);
    assert_eq!(total_density_rows(&fine).len(), 13 * 2 * lat.nx);
    assert!(evolve_wavepacket_with(start, 3, &lat, &p, None, 64, 65).is_err());
}

#[test]
fn afti_packet_stays_on_edge() {
    let lat = LatticeSpec::ribbon(60, 17, 1.0).unwrap();
    let h = evolve_wavepacket(top_edge_red_site(&lat, 30), 20, &lat, &params(AFTI), None, DEFAULT_STEPS).unwrap();
    let w = h.edge_weight(h.n_frames() - 1);
    assert!(w >= 0.6, "edge weight {w}");
}

#[test]
fn afti_chirality_is_stable() {
    let lat = LatticeSpec::ribbon(120, 17, 1.0).unwrap();
    let start = top_edge_red_site(&lat, 60);
    let short = evolve_wavepacket(start, 25, &lat, &params(AFTI), None, DEFAULT_STEPS).unwrap();
    let long = evolve_wavepacket(start, 50, &lat, &params(AFTI), None, DEFAULT_STEPS).unwrap();
    let (a, b) = (chirality_metric(&short).unwrap(), chirality_metric(&long).unwrap());
    assert!(a.metric.abs() > 0.1 && b.metric.abs() > 0.1);
    assert_eq!(a.metric.signum(), b.metric.signum());
    assert!(!a.degenerate && b.wrapped < 0.01);
}

#[test]
fn chirality_needs_ten_frames() {
    let lat = LatticeSpec::ribbon(8, 4, 1.0).unwrap();
    let h = evolve_wavepacket(top_edge_red_site(&lat, 0), 5, &lat, &params(AFTI), None, 32).unwrap();
    assert!(chirality_metric(&h).is_err());
}

#[test]
fn evolution_needs_ribbon() {
    let lat = LatticeSpec::torus(4, 4, 1.0).unwrap();
    assert!(evolve_wavepacket(0, 2, &lat, &params(AFTI), None, 32).is_err());
}
