//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=1,2,8` restricts the run to the listed criteria. The
//! disorder sweeps (4 and 6) take a few hours on one core.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use floquet_topo::born::{
    born_critical_disorder, born_shifted_boundaries, effective_coefficients, mass_correction, CriticalDisorder,
};
use floquet_topo::disorder::{empirical_covariance, sample_field, DisorderField, DisorderSpec};
use floquet_topo::dynamics::{
    chirality_metric, evolve_wavepacket, floquet_consistency, top_edge_red_site, DEFAULT_STEPS,
};
use floquet_topo::invariants::{bott_below, disorder_averaged_bott, topo_indices};
use floquet_topo::lattice::dirac_k;
use floquet_topo::model::build_realspace_floquet;
use floquet_topo::phases::{
    classify_clean, dirac_boundary_exact, dirac_boundary_perturbative, gamma_boundary_a, locate_closing, PhaseLabel,
};
use floquet_topo::presets::preset;
use floquet_topo::{LatticeSpec, ModelParams};

struct Check {
    pass: bool,
    detail: String,
}

impl Check {
    fn new() -> Self {
        Check { pass: true, detail: String::new() }
    }

    fn require(&mut self, ok: bool, what: String) {
        if !ok {
            self.pass = false;
        }
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(&what);
        if !ok {
            self.detail.push_str(" [failed]");
        }
    }

    fn within(&mut self, elapsed: Duration, limit: Duration) {
        self.require(elapsed <= limit, format!("{:.1} s (limit {} s)", elapsed.as_secs_f64(), limit.as_secs()));
    }
}

fn equal(a: f64) -> ModelParams {
    ModelParams::new(a, a, 0.0)
}

fn clean_sequence() -> Check {
    let t = Instant::now();
    let mut c = Check::new();
    let expect =
        [(0.12, PhaseLabel::FtiMinus), (0.20, PhaseLabel::Afti), (0.30, PhaseLabel::Afti), (0.36, PhaseLabel::FtiRing)];
    for (a, want) in expect {
        let got = classify_clean(&equal(a), 4, 48).ok().and_then(|r| r.label());
        c.require(got == Some(want), format!("A={a}: {got:?}"));
    }
    c.within(t.elapsed(), Duration::from_secs(120));
    c
}

fn analytic_boundaries() -> Check {
    let t = Instant::now();
    let mut c = Check::new();
    let gamma = [(0.5, 0.1, 0.25, 1.0 / 6.0), (0.0, 0.25, 0.4, 1.0 / 3.0)];
    for (eps, lo, hi, want) in gamma {
        let formula = gamma_boundary_a(0.0, if eps == 0.0 { 1.0 } else { 0.5 }, 1.0).unwrap();
        match locate_closing(equal, [0.0, 0.0], eps, 4, lo, hi, 1e-8) {
            Ok(a) => c.require(
                (a - want).abs() < 1e-3 && (a - formula).abs() < 1e-3,
                format!("Gamma closing eps={eps} at A={a:.6}"),
            ),
            Err(e) => c.require(false, format!("Gamma closing eps={eps}: {e}")),
        }
    }
    let lambda = 0.04;
    let exact = dirac_boundary_exact(lambda, 1.0);
    let pert = dirac_boundary_perturbative(lambda, 1.0);
    let rel = (exact - pert).abs() / pert;
    c.require(rel < 0.03, format!("Dirac B exact {exact:.5} vs perturbative {pert:.5} ({:.1}%)", 100.0 * rel));
    let k = dirac_k(1.0);
    let make = |b: f64| ModelParams::new(0.2, b, lambda);
    let found = locate_closing(make, k, 0.0, 4, 0.01, 0.5, 1e-10)
        .or_else(|_| locate_closing(make, [-k[0], -k[1]], 0.0, 4, 0.01, 0.5, 1e-10));
    match found {
        Ok(b) => c.require((b - exact).abs() < 1e-6, format!("located Dirac closing B={b:.6}")),
        Err(e) => c.require(false, format!("Dirac closing: {e}")),
    }
    c.within(t.elapsed(), Duration::from_secs(60));
    c
}

fn bott_equals_winding() -> Check {
    let t = Instant::now();
    let mut c = Check::new();
    let lat = LatticeSpec::torus(12, 12, 1.0).unwrap();
    let points = [
        (ModelParams::new(0.1, 0.1, 0.3), PhaseLabel::Ni),
        (equal(0.12), PhaseLabel::FtiMinus),
        (equal(0.25), PhaseLabel::Afti),
        (equal(0.36), PhaseLabel::FtiRing),
    ];
    for (p, want) in points {
        let idx = match topo_indices(&p, 2, 48) {
            Ok(i) => i,
            Err(e) => {
                c.require(false, format!("{want:?}: {e}"));
                continue;
            }
        };
        let op = build_realspace_floquet(&lat, &p, None, 2).unwrap();
        let bott = bott_below(&op, &lat, &[0.0, 0.5]);
        let ok = match &bott {
            Ok(b) => idx.label == want && b[0].rounded == Some(idx.w0) && b[1].rounded == Some(idx.w_half),
            Err(_) => false,
        };
        let shown = bott.map(|b| format!("{:?}/{:?}", b[0].rounded, b[1].rounded)).unwrap_or_else(|e| e.to_string());
        c.require(ok, format!("{want:?} W=({},{}) Bott={shown}", idx.w0, idx.w_half));
    }
    c.within(t.elapsed(), Duration::from_secs(600));
    c
}

/// First `W` on an ascending grid where the averaged Bott index at `eps`
/// drops below `level`, linearly interpolated between grid points.
fn bott_crossing(p: &ModelParams, eps: f64, sigma: f64, step: f64, w_max: f64, level: f64) -> (Option<f64>, String) {
    let lat = LatticeSpec::torus(20, 20, 1.0).unwrap();
    let mut log = Vec::new();
    let (mut prev_w, mut prev) = (0.0, None::<f64>);
    let mut i = 1;
    loop {
        let w = step * i as f64;
        if w > w_max + 1e-12 {
            return (None, log.join(" "));
        }
        let spec = DisorderSpec::with_sigma(w, sigma, 1);
        let mean = match disorder_averaged_bott(p, &lat, &spec, &[eps], 10, 2, false) {
            Ok(r) => r[0].mean,
            Err(e) => {
                log.push(format!("W={w:.3}: {e}"));
                return (None, log.join(" "));
            }
        };
        log.push(format!("{w:.3}:{mean:.2}"));
        if mean < level {
            let before = prev.unwrap_or_else(|| {
                let clean = build_realspace_floquet(&lat, p, None, 2).unwrap();
                bott_below(&clean, &lat, &[eps]).unwrap()[0].value
            });
            let wc = prev_w + (w - prev_w) * (before - level) / (before - mean);
            return (Some(wc), log.join(" "));
        }
        prev_w = w;
        prev = Some(mean);
        i += 1;
    }
}

fn disorder_transition_p1() -> Check {
    let t = Instant::now();
    let mut c = Check::new();
    let pt = preset("P1").unwrap();
    let (w0, log0) = bott_crossing(&pt.params, pt.eps_ref, 0.0, 0.025, 0.3, -0.5);
    c.require(w0.is_some_and(|w| w <= 0.3), format!("sigma=0 W_c={w0:.4?} [{log0}]"));
    // no need to look past the uncorrelated crossing
    let (w1, log1) = bott_crossing(&pt.params, pt.eps_ref, 1.0, 0.025, w0.unwrap_or(0.3), -0.5);
    let ordered = matches!((w0, w1), (Some(a), Some(b)) if b < a);
    c.require(ordered, format!("sigma=a W_c={w1:.4?} [{log1}]"));
    c.within(t.elapsed(), Duration::from_secs(4 * 3600));
    c
}

fn born_coefficients() -> Check {
    let t = Instant::now();
    let mut c = Check::new();
    let rel = |x: f64, want: f64| (x - want).abs() / want.abs();
    let mut entry = |name: &str, x: f64, want: f64, tol: f64| {
        let r = rel(x, want);
        c.require(r < tol, format!("{name} {x:.3} vs {want} ({:.1}%)", 100.0 * r));
    };
    let coef = |name: &str| {
        let pt = preset(name).unwrap();
        effective_coefficients(&pt.params, pt.eps_ref, 4, 1e-6).unwrap()
    };
    let p1 = coef("P1");
    entry("P1 dOmega", p1.d_omega, -5.42, 0.1);
    entry("P1 dA", p1.d_a, 1.01, 0.1);
    entry("P1 dB", p1.d_b, -1.37, 0.1);
    let p1p = coef("P1'");
    entry("P1' dB", p1p.d_b, -1.39, 0.2);
    let p3 = coef("P3");
    entry("P3 dLambda", p3.d_lambda, -1.04, 0.1);
    entry("P3 dOmega", p3.d_omega, -1.54, 0.1);
    entry("P3 dB", p3.d_b, 0.08, 0.2);
    c.require(p1.d_lambda.abs() < 1e-6, format!("P1 dLambda {:.1e}", p1.d_lambda));
    c.within(t.elapsed(), Duration::from_secs(1800));
    c
}

fn born_boundaries() -> Check {
    let t = Instant::now();
    let mut c = Check::new();
    let sigmas = [0.0, 0.25, 0.5, 0.75, 1.0, 1.5];

    let mut worst = f64::NEG_INFINITY;
    for a in [0.05, 0.1, 0.15, preset("P1").unwrap().params.hop] {
        for &s in &sigmas {
            for w in [0.05, 0.1, 0.2] {
                let d = mass_correction(&equal(a), &DisorderSpec::with_sigma(w, s, 0), 1e-8).unwrap();
                worst = worst.max(d.delta);
            }
        }
    }
    c.require(worst < 0.0, format!("largest delta {worst:.3e}"));

    let a = preset("P1").unwrap().params.hop;
    let wc: Vec<f64> = sigmas
        .iter()
        .map(|&s| match born_critical_disorder(a, s, 1.0, 1e-8).unwrap() {
            CriticalDisorder::Found { w_c } => w_c,
            CriticalDisorder::NoTransitionInRange { .. } => f64::INFINITY,
        })
        .collect();
    let monotone = wc.windows(2).all(|p| p[1] <= p[0] + 1e-9) && wc[4] < wc[0];
    c.require(monotone, format!("W_c(sigma) {:.4?}", wc));

    for name in ["P1", "P1'", "P2", "P3"] {
        let pt = preset(name).unwrap();
        let coef = effective_coefficients(&pt.params, pt.eps_ref, 4, 1e-6).unwrap();
        for s in [0.0, 1.0] {
            let scan = born_shifted_boundaries(&pt.params, &coef, s, 0.2, 40);
            let found = scan.crossing.map(|(w, _)| w);
            let ok = if name == "P2" { found.is_none() } else { found.is_some() };
            c.require(ok, format!("{name} sigma={s} Born crossing {found:.4?}"));
        }
    }

    // the Born picture misses this one
    let p2 = preset("P2").unwrap();
    let (w, log) = bott_crossing(&p2.params, p2.eps_ref, 0.0, 0.05, 0.3, -0.5);
    c.require(w.is_some(), format!("P2 Bott W0 crossing {w:.4?} [{log}]"));
    c.require(true, format!("{:.0} s", t.elapsed().as_secs_f64()));
    c
}

fn dynamics() -> Check {
    let t = Instant::now();
    let mut c = Check::new();
    let afti = ModelParams::new(0.25, 0.25, 0.0);
    let sfti = ModelParams::new(0.4, 0.25, 0.3);
    let lat = LatticeSpec::ribbon(200, 17, 1.0).unwrap();
    let start = top_edge_red_site(&lat, 100);
    let run = |p: &ModelParams, n: usize| evolve_wavepacket(start, n, &lat, p, None, DEFAULT_STEPS).unwrap();

    let a50 = run(&afti, 50);
    let a25 = run(&afti, 25);
    let s50 = run(&sfti, 50);
    let (ma, ma25, ms) =
        (chirality_metric(&a50).unwrap(), chirality_metric(&a25).unwrap(), chirality_metric(&s50).unwrap());
    let afti_ok = !ma.degenerate && ma.metric.abs() > 0.05 && ma.metric.signum() == ma25.metric.signum();
    c.require(afti_ok, format!("AFTI metric {:.3} (25 periods {:.3})", ma.metric, ma25.metric));
    let ratio = ms.metric.abs() / ma.metric.abs();
    c.require(ratio <= 0.1, format!("SFTI metric {:.3}, ratio {ratio:.3}", ms.metric));

    let small = LatticeSpec::ribbon(20, 8, 1.0).unwrap();
    let v: DisorderField = sample_field(&small, &DisorderSpec::uncorrelated(0.1, 3), 0).unwrap();
    let d = evolve_wavepacket(top_edge_red_site(&small, 10), 50, &small, &afti, Some(&v), DEFAULT_STEPS).unwrap();
    let mut drift: f64 = 0.0;
    for h in [&a50, &s50, &d] {
        for f in 0..h.n_frames() {
            drift = drift.max((h.norm(f) - 1.0).abs());
        }
    }
    c.require(drift < 1e-8, format!("norm drift {drift:.1e}"));

    let mut phase_err: f64 = 0.0;
    for p in [&afti, &sfti] {
        for kx in [0.0, 0.9, 2.1, std::f64::consts::PI] {
            phase_err = phase_err.max(floquet_consistency(kx, 17, p, 4, DEFAULT_STEPS).unwrap());
        }
    }
    c.require(phase_err < 1e-3, format!("eigenphase mismatch {phase_err:.1e} omega"));
    c.within(t.elapsed(), Duration::from_secs(900));
    c
}

fn disorder_statistics() -> Check {
    let t = Instant::now();
    let mut c = Check::new();
    let lat = LatticeSpec::torus(24, 24, 1.0).unwrap();
    let fields = |spec: &DisorderSpec| -> Vec<DisorderField> {
        (0..100).map(|s| sample_field(&lat, spec, s).unwrap()).collect()
    };
    for sigma in [0.5, 1.0] {
        let spec = DisorderSpec::correlated(0.2, sigma, 11);
        let fs = fields(&spec);
        // 0, a, 2a along the bond direction; 2 sigma is one of a or 2a here
        for (label, d) in [("0", 0.0), ("a", 1.0), ("2a", 2.0), ("2sigma", 2.0 * sigma)] {
            let est = empirical_covariance(&fs, [0.0, -d]).unwrap();
            let want = spec.covariance(d);
            let ok = (est.mean - want).abs() < 3.0 * est.std_err;
            c.require(ok, format!("sigma={sigma} r={label}: {:.5} vs {want:.5} (se {:.1e})", est.mean, est.std_err));
        }
    }
    let spec = DisorderSpec::uncorrelated(0.2, 12);
    let est = empirical_covariance(&fields(&spec), [0.0, 0.0]).unwrap();
    let ok = (est.mean - 0.04).abs() < 3.0 * est.std_err;
    c.require(ok, format!("uncorrelated variance {:.5} vs 0.04 (se {:.1e})", est.mean, est.std_err));
    c.within(t.elapsed(), Duration::from_secs(60));
    c
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("clean phase sequence", clean_sequence),
        ("analytic boundaries", analytic_boundaries),
        ("Bott equals winding", bott_equals_winding),
        ("disorder-driven transition at P1", disorder_transition_p1),
        ("Born coefficient table", born_coefficients),
        ("Born boundaries", born_boundaries),
        ("edge dynamics", dynamics),
        ("disorder statistics", disorder_statistics),
    ];
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let c = run();
        if !c.pass {
            failed += 1;
        }
        println!("{} criterion {n} ({name}): {}", if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
