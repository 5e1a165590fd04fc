//! One runner per subcommand. Each writes its tables into `dir` and returns
//! the file names plus free-form notes for the manifest.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use floquet_topo::born::{
    born_critical_disorder, born_shifted_boundaries, effective_coefficients, mass_correction, CriticalDisorder,
};
use floquet_topo::disorder::{empirical_covariance, sample_field, DisorderMode, DisorderSpec};
use floquet_topo::dynamics::{chirality_metric, evolve_wavepacket_with, top_edge_red_site};
use floquet_topo::invariants::disorder_averaged_bott;
use floquet_topo::io::{edge_density_rows, total_density_rows, write_csv, write_field_csv, BottRow, PhaseRow};
use floquet_topo::model::build_ribbon_bloch;
use floquet_topo::phases::{analytic_boundary_curves, sweep_phase_diagram, Classification};
use floquet_topo::presets::preset;
use floquet_topo::spectrum::quasienergy_spectrum;
use floquet_topo::{Error, LatticeSpec, Result};

use crate::config::{Command, RunConfig};

pub struct Outcome {
    pub files: Vec<String>,
    pub notes: Value,
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn run(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    match cfg.command {
        Command::PhaseDiagram => phase_diagram(cfg, dir),
        Command::BottSweep => bott_sweep(cfg, dir),
        Command::BornReport => born_report(cfg, dir),
        Command::RibbonSpectrum => ribbon_spectrum(cfg, dir),
        Command::Dynamics => dynamics(cfg, dir),
        Command::DisorderStats => disorder_stats(cfg, dir),
    }
}

fn phase_diagram(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let pts = sweep_phase_diagram(&cfg.params, &cfg.axes.a, &cfg.axes.lambda, cfg.axes.drive, cfg.m_max, cfg.grid);
    let mut rows = Vec::with_capacity(pts.len());
    let mut failures = Vec::new();
    for p in &pts {
        let q = p.params;
        let (c, w0, w_half, label, gap0, gap_half) = match &p.result {
            Ok(Classification::Phase { indices, gap0, gap_half }) => {
                (Some(indices.c), Some(indices.w0), Some(indices.w_half), indices.label.to_string(), *gap0, *gap_half)
            }
            Ok(Classification::Boundary { eps, gap, point, .. }) => {
                let (g0, gh) = if *eps == 0.0 { (*gap, f64::NAN) } else { (f64::NAN, *gap) };
                (None, None, None, format!("boundary-{point:?}"), g0, gh)
            }
            Err(e) => {
                failures.push(json!({"A": q.hop, "Lambda": q.stagger, "error": e}));
                (None, None, None, "failed".to_string(), f64::NAN, f64::NAN)
            }
        };
        rows.push(PhaseRow { a: q.hop, b: q.drive, lambda: q.stagger, c, w0, w_half, label, gap0, gap_half });
    }
    write_csv(&dir.join("phase_map.csv"), &rows)?;
    let a_max = cfg.axes.a.iter().fold(0.0f64, |m, x| m.max(*x));
    let curves = analytic_boundary_curves(&cfg.axes.lambda, a_max, cfg.params.omega);
    write_json(&dir.join("boundaries.json"), &curves)?;
    if !failures.is_empty() && failures.len() == pts.len() {
        return Err(Error::InvalidParameter(format!("every phase point failed; first: {}", failures[0])));
    }
    Ok(Outcome {
        files: vec!["phase_map.csv".into(), "boundaries.json".into()],
        notes: json!({"points": pts.len(), "failed_points": failures}),
    })
}

#[derive(Serialize)]
struct BottMeanRow {
    #[serde(rename = "W")]
    w: f64,
    sigma: f64,
    eps_ref: f64,
    mean: f64,
    std_err: f64,
    n: usize,
}

fn spec_for(w: f64, sigma: f64, seed: u64, a: f64) -> DisorderSpec {
    DisorderSpec::with_sigma(w, sigma * a, seed)
}

fn bott_sweep(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let mut rows = Vec::new();
    let mut means = Vec::new();
    for &sigma in &cfg.axes.sigma {
        for &w in &cfg.axes.w {
            let spec = spec_for(w, sigma, cfg.seed, cfg.lattice.a);
            log::info!("bott-sweep W={w} sigma={sigma}");
            let avg = disorder_averaged_bott(
                &cfg.params,
                &cfg.lattice,
                &spec,
                &cfg.eps_refs,
                cfg.n_samples,
                cfg.m_max,
                false,
            )?;
            for s in 0..cfg.n_samples {
                rows.push(BottRow {
                    w,
                    sigma,
                    sample: s,
                    bott_eps0: avg[0].samples[s],
                    bott_eps_half: avg[1].samples[s],
                });
            }
            for b in &avg {
                means.push(BottMeanRow {
                    w,
                    sigma,
                    eps_ref: b.eps_ref,
                    mean: b.mean,
                    std_err: b.std_err,
                    n: b.samples.len(),
                });
            }
        }
    }
    write_csv(&dir.join("bott.csv"), &rows)?;
    write_csv(&dir.join("bott_mean.csv"), &means)?;
    Ok(Outcome {
        files: vec!["bott.csv".into(), "bott_mean.csv".into()],
        notes: json!({"sample_streams": format!("ChaCha8 seed {} stream = sample index 0..{}", cfg.seed, cfg.n_samples)}),
    })
}

fn born_report(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let p = cfg.params;
    let coef = effective_coefficients(&p, cfg.born.eps, cfg.m_max, cfg.born.tol)?;
    let mut per_sigma = Vec::new();
    for &sigma in &cfg.axes.sigma {
        let scan = born_shifted_boundaries(&p, &coef, sigma * p.a, cfg.born.w_max, cfg.born.steps);
        let mut entry = json!({
            "sigma": sigma,
            "F": if sigma > 0.0 { (-1.0 / (2.0 * sigma * sigma)).exp() } else { 0.0 },
            "shifted_crossing": scan.crossing.map(|(w, c)| json!({"W": w, "point": c.point, "gap": c.gap})),
        });
        if p.stagger == 0.0 && p.hop == p.drive {
            let spec = DisorderSpec::with_sigma(1.0, sigma * p.a, 0);
            let d = mass_correction(&p, &spec, cfg.born.tol)?;
            entry["mass_correction_per_W2"] = json!({"delta": d.delta, "error": d.error});
            entry["critical_disorder"] = match born_critical_disorder(p.hop, sigma * p.a, p.omega, cfg.born.tol)? {
                CriticalDisorder::Found { w_c } => json!({"W_c": w_c}),
                CriticalDisorder::NoTransitionInRange { w_max } => json!({"none_below": w_max}),
            };
        }
        per_sigma.push(entry);
    }
    let report = json!({
        "inputs": {"params": p, "eps": cfg.born.eps, "m_max": cfg.m_max, "tol": cfg.born.tol},
        "coefficients": {
            "dLambda_per_W2": coef.d_lambda,
            "dOmega_per_W2": coef.d_omega,
            "dA_per_W2F": coef.d_a,
            "dB_per_W2F": coef.d_b,
            "dB_complex_per_W2F": [coef.d_b_complex.re, coef.d_b_complex.im],
            "quadrature_error": coef.error,
        },
        "by_sigma": per_sigma,
    });
    write_json(&dir.join("born_report.json"), &report)?;
    Ok(Outcome { files: vec!["born_report.json".into()], notes: json!({}) })
}

#[derive(Serialize)]
struct RibbonRow {
    kx: f64,
    band: usize,
    epsilon: f64,
    /// Weight on the top (red-terminated) row.
    top_weight: f64,
    bottom_weight: f64,
}

fn ribbon_spectrum(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let width = cfg.lattice.ny;
    let strip = LatticeSpec::ribbon(1, width, cfg.lattice.a)?;
    let period_k = 2.0 * std::f64::consts::PI / strip.lx();
    let half = 0.5 * cfg.params.omega;
    let per_k: Vec<Vec<RibbonRow>> = (0..cfg.n_k)
        .into_par_iter()
        .map(|ik| -> Result<Vec<RibbonRow>> {
            let kx = period_k * ik as f64 / cfg.n_k as f64;
            let op = build_ribbon_bloch(kx, &strip, &cfg.params, cfg.m_max)?;
            let spec = quasienergy_spectrum(&op)?;
            let norb = op.n_orb();
            let mut out = Vec::new();
            for (n, &e) in spec.values.iter().enumerate() {
                if e < -half || e >= half {
                    continue;
                }
                let (mut top, mut bottom) = (0.0, 0.0);
                for r in 0..op.dim() {
                    let w = spec.vectors.read(r, n).norm_sqr();
                    let row = (r % norb) / 2;
                    if row == width - 1 {
                        top += w;
                    } else if row == 0 {
                        bottom += w;
                    }
                }
                out.push(RibbonRow { kx, band: out.len(), epsilon: e, top_weight: top, bottom_weight: bottom });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<RibbonRow> = per_k.into_iter().flatten().collect();
    write_csv(&dir.join("ribbon_spectrum.csv"), &rows)?;
    Ok(Outcome { files: vec!["ribbon_spectrum.csv".into()], notes: json!({"width": width}) })
}

fn dynamics(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let d = cfg.dynamics;
    let site = top_edge_red_site(&cfg.lattice, d.start_cell);
    if d.integrator != floquet_topo::dynamics::Integrator::default() {
        log::warn!("wave-packet runs use the default integrator; the configured one applies to propagator checks only");
    }
    let h = evolve_wavepacket_with(site, d.n_periods, &cfg.lattice, &cfg.params, None, d.n_steps, d.snapshots)?;
    write_csv(&dir.join("rho_edge.csv"), &edge_density_rows(&h))?;
    write_csv(&dir.join("rho_total.csv"), &total_density_rows(&h))?;
    let norm_drift = (0..h.n_frames()).map(|f| (h.norm(f) - 1.0).abs()).fold(0.0f64, f64::max);
    let chir = if h.stroboscopic_frames().len() >= 10 { Some(chirality_metric(&h)?) } else { None };
    let summary = json!({
        "initial_site": site,
        "edge_chain": {"row": h.edge_row, "sites": h.edge_sites.len(), "definition": "outermost zigzag row of the top (red-terminated) edge"},
        "chirality": chir,
        "max_norm_drift": norm_drift,
        "edge_weight_final": h.edge_weight(h.n_frames() - 1),
        "integrator": {"kind": floquet_topo::dynamics::Integrator::default(), "n_steps": d.n_steps, "snapshots": d.snapshots},
    });
    write_json(&dir.join("dynamics.json"), &summary)?;
    Ok(Outcome { files: vec!["rho_edge.csv".into(), "rho_total.csv".into(), "dynamics.json".into()], notes: summary })
}

#[derive(Serialize)]
struct CovRow {
    dx: f64,
    dy: f64,
    distance: f64,
    mean: f64,
    std_err: f64,
    expected: f64,
    z: f64,
    n_pairs: usize,
    n_fields: usize,
}

fn disorder_stats(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let spec = cfg.disorder;
    let fields = (0..cfg.n_samples)
        .into_par_iter()
        .map(|s| sample_field(&cfg.lattice, &spec, s as u64))
        .collect::<Result<Vec<_>>>()?;
    let a = cfg.lattice.a;
    let mut rows = Vec::new();
    for d in &cfg.displacements {
        let disp = [d[0] * a, d[1] * a];
        let est = empirical_covariance(&fields, disp)?;
        let r = disp[0].hypot(disp[1]);
        let expected = spec.covariance(r);
        let z = if est.std_err > 0.0 { (est.mean - expected) / est.std_err } else { 0.0 };
        rows.push(CovRow {
            dx: d[0],
            dy: d[1],
            distance: r / a,
            mean: est.mean,
            std_err: est.std_err,
            expected,
            z,
            n_pairs: est.n_pairs,
            n_fields: est.n_fields,
        });
    }
    write_csv(&dir.join("covariance.csv"), &rows)?;
    write_field_csv(&fields[0], &dir.join("field_0.csv"))?;
    let mode = match spec.mode {
        DisorderMode::Uncorrelated => "uncorrelated",
        DisorderMode::Correlated => "correlated",
    };
    Ok(Outcome { files: vec!["covariance.csv".into(), "field_0.csv".into()], notes: json!({"mode": mode}) })
}

/// Notes recorded for a preset, including the solved boundary it is measured from.
pub fn preset_notes(cfg: &RunConfig) -> Value {
    let Some(name) = cfg.preset.as_deref() else {
        return Value::Null;
    };
    let point = name.split("-b").next().unwrap_or(name);
    match preset(point) {
        Ok(p) => json!({
            "point": p.name,
            "boundary": p.boundary,
            "offset": p.offset,
            "eps_ref": p.eps_ref,
        }),
        Err(_) => json!({"preset": name}),
    }
}
