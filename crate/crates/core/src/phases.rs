//! Phase labels, analytic gap-closing conditions at `Gamma` and the Dirac
//! points, the high-frequency Haldane limit, and clean phase diagrams.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::invariants::{central_band, chern_on_grid, BandSelector, BlochGrid, TopoIndices};
use crate::lattice::{dirac_k, nnn_vectors, reciprocal_vectors};
use crate::model::{build_bloch_blocks, static_bloch, ModelParams};
use crate::spectrum::eigvalsh;
use crate::{CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "phase")]
pub enum PhaseLabel {
    /// `(0, 0)`
    #[serde(rename = "NI")]
    Ni,
    /// `(-1, 0)`
    #[serde(rename = "FTI(-1,0)")]
    FtiMinus,
    /// `(1, 0)`
    #[serde(rename = "FTI(1,0)")]
    FtiPlus,
    /// `(1, -1)`
    #[serde(rename = "FTI(1,-1)")]
    FtiRing,
    /// `(0, -1)`
    #[serde(rename = "AFTI")]
    Afti,
    /// `(2, -1)`
    #[serde(rename = "SFTI")]
    Sfti,
    #[serde(rename = "other")]
    Other { c: i64, w_half: i64 },
}

impl PhaseLabel {
    /// Label of the index pair `(C, W_half)`.
    pub fn from_indices(c: i64, w_half: i64) -> Self {
        match (c, w_half) {
            (0, 0) => PhaseLabel::Ni,
            (-1, 0) => PhaseLabel::FtiMinus,
            (1, 0) => PhaseLabel::FtiPlus,
            (1, -1) => PhaseLabel::FtiRing,
            (0, -1) => PhaseLabel::Afti,
            (2, -1) => PhaseLabel::Sfti,
            (c, w_half) => PhaseLabel::Other { c, w_half },
        }
    }

    pub fn indices(&self) -> (i64, i64) {
        match *self {
            PhaseLabel::Ni => (0, 0),
            PhaseLabel::FtiMinus => (-1, 0),
            PhaseLabel::FtiPlus => (1, 0),
            PhaseLabel::FtiRing => (1, -1),
            PhaseLabel::Afti => (0, -1),
            PhaseLabel::Sfti => (2, -1),
            PhaseLabel::Other { c, w_half } => (c, w_half),
        }
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (c, w) = self.indices();
        match self {
            PhaseLabel::Ni => write!(f, "NI({c},{w})"),
            PhaseLabel::Afti => write!(f, "AFTI({c},{w})"),
            PhaseLabel::Sfti => write!(f, "SFTI({c},{w})"),
            PhaseLabel::Other { .. } => write!(f, "other({c},{w})"),
            _ => write!(f, "FTI({c},{w})"),
        }
    }
}

/// `g_pm(m) = m pm sqrt((Lambda/omega)^2 + 9 (A/omega)^2)`.
pub fn gamma_boundary_g(m: i64, p: &ModelParams) -> (f64, f64) {
    let r = gamma_radius(p);
    (m as f64 + r, m as f64 - r)
}

fn gamma_radius(p: &ModelParams) -> f64 {
    ((p.stagger / p.omega).powi(2) + 9.0 * (p.hop / p.omega).powi(2)).sqrt()
}

/// The four Dirac-point values `(m - 1/2) s1 sqrt((1/2 s2 Lambda/omega)^2 + 9 B^2 / 4 omega^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiracValues {
    /// `s1 = +`, `s2 = +`
    pub pp: f64,
    /// `s1 = +`, `s2 = -`
    pub pm: f64,
    /// `s1 = -`, `s2 = +`
    pub mp: f64,
    /// `s1 = -`, `s2 = -`
    pub mm: f64,
}

impl DiracValues {
    pub fn all(&self) -> [f64; 4] {
        [self.pp, self.pm, self.mp, self.mm]
    }
}

fn dirac_radii(p: &ModelParams) -> (f64, f64) {
    let (l, b) = (p.stagger / p.omega, p.drive / p.omega);
    let d = 2.25 * b * b;
    (((0.5 + l).powi(2) + d).sqrt(), ((0.5 - l).powi(2) + d).sqrt())
}

pub fn dirac_boundary_f(m: i64, p: &ModelParams) -> DiracValues {
    let (rp, rm) = dirac_radii(p);
    let c = m as f64 - 0.5;
    DiracValues { pp: c + rp, pm: c + rm, mp: c - rp, mm: c - rm }
}

/// Which reference gap a boundary closes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapRef {
    Zero,
    Half,
}

impl GapRef {
    pub fn energy(self, omega: f64) -> f64 {
        match self {
            GapRef::Zero => 0.0,
            GapRef::Half => 0.5 * omega,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosingPoint {
    Gamma,
    K,
    KPrime,
    Elsewhere,
}

/// Boundary values `(g+, g-, f..)` within `[from, to]` that pass through 0 or 1/2
/// (mod 1) between two parameter sets. Each radius is monotone along the
/// straight segment whenever the segment changes a single parameter, so the
/// count of half-integers crossed is exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub point: ClosingPoint,
    pub gap: GapRef,
}

fn half_steps(r0: f64, r1: f64) -> Vec<f64> {
    let (lo, hi) = if r0 <= r1 { (r0, r1) } else { (r1, r0) };
    let first = (2.0 * lo).floor() as i64 + 1;
    let last = (2.0 * hi).floor() as i64;
    (first..=last).map(|j| 0.5 * j as f64).collect()
}

/// Analytic gap closings between two parameter sets.
pub fn analytic_crossings(p0: &ModelParams, p1: &ModelParams) -> Vec<Crossing> {
    let mut out = Vec::new();
    // Gamma: g = 0 or 1/2 mod 1 when 2 r is an integer; r integer closes eps = 0.
    for h in half_steps(gamma_radius(p0), gamma_radius(p1)) {
        let gap = if h.fract() == 0.0 { GapRef::Zero } else { GapRef::Half };
        out.push(Crossing { point: ClosingPoint::Gamma, gap });
    }
    // Dirac: f = (m - 1/2) pm r; r half-odd closes eps = 0, r integer closes omega/2.
    let (a0, b0) = dirac_radii(p0);
    let (a1, b1) = dirac_radii(p1);
    for (r0, r1) in [(a0, a1), (b0, b1)] {
        for h in half_steps(r0, r1) {
            let gap = if h.fract() == 0.0 { GapRef::Half } else { GapRef::Zero };
            out.push(Crossing { point: ClosingPoint::K, gap });
        }
    }
    out
}

/// Effective static Hamiltonian of the high-frequency limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaldaneEffective {
    pub params: ModelParams,
    /// Next-nearest-neighbour amplitude `sqrt(3) B^2 / 4 omega`.
    pub t2: f64,
    /// Staggering at which the gap at `K` closes, `9 B^2 / 4 omega`.
    pub critical_lambda: f64,
}

impl HaldaneEffective {
    /// `H_00(k) - (sqrt(3) B^2 / 2 omega) sum_lambda sin(k.b_lambda) sigma_z`.
    pub fn bloch(&self, k: [f64; 2]) -> CMat {
        let h0 = static_bloch(k, &self.params);
        let s: f64 = nnn_vectors(self.params.a).iter().map(|b| (k[0] * b[0] + k[1] * b[1]).sin()).sum();
        let dz = -2.0 * self.t2 * s;
        CMat::from_fn(2, 2, |i, j| {
            let sz = if i == j {
                if i == 0 {
                    dz
                } else {
                    -dz
                }
            } else {
                0.0
            };
            h0[i][j] + C64::new(sz, 0.0)
        })
    }

    /// Chern number of the lower band of the effective model.
    pub fn lower_band_chern(&self, n: usize) -> Result<i64> {
        let grid = BlochGrid::with_builder(&self.params, 0, n, |k| Ok(self.bloch(k)))?;
        chern_on_grid(&grid, &BandSelector::Below { eps: 0.0 })
    }
}

pub fn haldane_effective(p: &ModelParams) -> HaldaneEffective {
    if p.hop > 0.2 * p.omega || p.drive > 0.2 * p.omega {
        log::warn!("high-frequency expansion used outside A, B << omega");
    }
    let t2 = 3f64.sqrt() * p.drive * p.drive / (4.0 * p.omega);
    HaldaneEffective { params: *p, t2, critical_lambda: 9.0 * p.drive * p.drive / (4.0 * p.omega) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum Classification {
    Phase { indices: TopoIndices, gap0: f64, gap_half: f64 },
    Boundary { eps: f64, gap: f64, k: [f64; 2], point: ClosingPoint },
}

impl Classification {
    pub fn label(&self) -> Option<PhaseLabel> {
        match self {
            Classification::Phase { indices, .. } => Some(indices.label),
            Classification::Boundary { .. } => None,
        }
    }
}

/// High-symmetry point nearest to `k` (modulo reciprocal vectors), if within `tol`.
pub fn identify_point(k: [f64; 2], a: f64, tol: f64) -> ClosingPoint {
    let [g1, g2] = reciprocal_vectors(a);
    let kd = dirac_k(a);
    let targets = [(ClosingPoint::Gamma, [0.0, 0.0]), (ClosingPoint::K, kd), (ClosingPoint::KPrime, [-kd[0], -kd[1]])];
    for (label, t) in targets {
        for i in -2i32..=2 {
            for j in -2i32..=2 {
                let x = t[0] + i as f64 * g1[0] + j as f64 * g2[0] - k[0];
                let y = t[1] + i as f64 * g1[1] + j as f64 * g2[1] - k[1];
                if x.hypot(y) < tol {
                    return label;
                }
            }
        }
    }
    ClosingPoint::Elsewhere
}

/// Gap below which a reference energy counts as closed during classification.
pub const CLOSED_GAP: f64 = 1e-6;

/// `(C, W_0, W_half)` and label, or the closing point when a reference gap closes.
pub fn classify_clean(p: &ModelParams, m_max: usize, n: usize) -> Result<Classification> {
    let grid = BlochGrid::new(p, m_max, n)?;
    let (gap0, k0) = grid.min_gap(0.0);
    let (gap_half, kh) = grid.min_gap(0.5 * p.omega);
    for (eps, gap, k) in [(0.0, gap0, k0), (0.5 * p.omega, gap_half, kh)] {
        if gap < CLOSED_GAP * p.omega {
            let tol = 1.5 * reciprocal_vectors(p.a)[0].iter().map(|x| x * x).sum::<f64>().sqrt() / n as f64;
            return Ok(Classification::Boundary { eps, gap, k, point: identify_point(k, p.a, tol) });
        }
    }
    let c = chern_on_grid(&grid, &central_band(p))?;
    let w0 = chern_on_grid(&grid, &BandSelector::Below { eps: 0.0 })?;
    let w_half = chern_on_grid(&grid, &BandSelector::Below { eps: 0.5 * p.omega })?;
    let indices = TopoIndices { c, w0, w_half, label: PhaseLabel::from_indices(c, w_half) };
    Ok(Classification::Phase { indices, gap0, gap_half })
}

/// Direct gap around `eps` at `k`: lowest level at or above `eps` minus highest below.
pub fn direct_gap(k: [f64; 2], p: &ModelParams, m_max: usize, eps: f64) -> Result<f64> {
    let op = build_bloch_blocks(k, p, m_max)?;
    let ev = eigvalsh(op.matrix());
    let above = ev.iter().copied().filter(|&e| e >= eps).fold(f64::INFINITY, f64::min);
    let below = ev.iter().copied().filter(|&e| e < eps).fold(f64::NEG_INFINITY, f64::max);
    Ok(above - below)
}

const SCAN_POINTS: usize = 64;

/// Parameter value in `[lo, hi]` where the direct gap at `eps` and momentum `k`
/// closes. A coarse scan brackets the smallest gap, golden-section search
/// narrows it to `tol`, and the minimum must lie below [`CLOSED_GAP`].
///
/// Band exchanges at `Gamma` and `K` keep the number of levels below `eps`
/// fixed, so the minimum of the gap is located rather than a change of count.
pub fn locate_closing(
    make: impl Fn(f64) -> ModelParams,
    k: [f64; 2],
    eps: f64,
    m_max: usize,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    if !(hi > lo) {
        return Err(Error::InvalidParameter(format!("empty interval [{lo}, {hi}]")));
    }
    let gap = |x: f64| direct_gap(k, &make(x), m_max, eps);
    let step = (hi - lo) / SCAN_POINTS as f64;
    let mut best = (0, f64::INFINITY);
    for i in 0..=SCAN_POINTS {
        let g = gap(lo + i as f64 * step)?;
        if g < best.1 {
            best = (i, g);
        }
    }
    let mut a = lo + best.0.saturating_sub(1) as f64 * step;
    let mut b = (lo + (best.0 + 1) as f64 * step).min(hi);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - r * (b - a), a + r * (b - a));
    let (mut g1, mut g2) = (gap(x1)?, gap(x2)?);
    while b - a > tol {
        if g1 <= g2 {
            b = x2;
            (x2, g2) = (x1, g1);
            x1 = b - r * (b - a);
            g1 = gap(x1)?;
        } else {
            a = x1;
            (x1, g1) = (x2, g2);
            x2 = a + r * (b - a);
            g2 = gap(x2)?;
        }
    }
    let x = 0.5 * (a + b);
    let g = gap(x)?;
    let omega = make(x).omega;
    if g > CLOSED_GAP * omega {
        return Err(Error::InvalidParameter(format!(
            "no gap closing between {lo} and {hi} (smallest gap {g:.3e} at {x})"
        )));
    }
    Ok(x)
}

/// Exact `eps = 0` Dirac-point boundary `B^2 = 4 Lambda (omega - Lambda) / 9`.
pub fn dirac_boundary_exact(lambda: f64, omega: f64) -> f64 {
    (4.0 * lambda * (omega - lambda) / 9.0).max(0.0).sqrt()
}

/// Small-`Lambda` form `(B/omega)^2 = 4 Lambda / 9 omega`.
pub fn dirac_boundary_perturbative(lambda: f64, omega: f64) -> f64 {
    (4.0 * lambda * omega / 9.0).max(0.0).sqrt()
}

/// `A` on the `A = B` slice where `sqrt(Lambda^2 + 9 A^2) = h omega`.
pub fn gamma_boundary_a(lambda: f64, h: f64, omega: f64) -> Option<f64> {
    let s = (h * omega).powi(2) - lambda * lambda;
    (s >= 0.0).then(|| s.sqrt() / 3.0)
}

/// `B` where `sqrt((1/2 + s Lambda/omega)^2 + 9 B^2/4 omega^2) = h`, `s = pm 1`.
pub fn dirac_boundary_b(lambda: f64, h: f64, sign: f64, omega: f64) -> Option<f64> {
    let s = h * h - (0.5 + sign * lambda / omega).powi(2);
    (s >= 0.0).then(|| omega * 2.0 * s.sqrt() / 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub point: ClosingPoint,
    pub gap: GapRef,
    /// Radius value `h` (in units of omega) that the boundary function reaches.
    pub h: f64,
    /// `(Lambda, A)` samples on the `A = B` slice.
    pub points: Vec<[f64; 2]>,
}

/// Analytic boundary curves on the `A = B` slice for the given `Lambda` values,
/// limited to `A <= a_max`.
pub fn analytic_boundary_curves(lambdas: &[f64], a_max: f64, omega: f64) -> Vec<BoundaryCurve> {
    let mut out = Vec::new();
    let hmax = (lambdas.iter().fold(0.0f64, |m, l| m.max(l.abs())) / omega + 0.5) + 3.0 * a_max / omega + 0.5;
    let nh = (2.0 * hmax).ceil() as i64;
    for j in 1..=nh {
        let h = 0.5 * j as f64;
        let g: Vec<[f64; 2]> = lambdas
            .iter()
            .filter_map(|&l| gamma_boundary_a(l, h, omega).map(|a| [l, a]))
            .filter(|x| x[1] <= a_max)
            .collect();
        if !g.is_empty() {
            let gap = if j % 2 == 0 { GapRef::Zero } else { GapRef::Half };
            out.push(BoundaryCurve { point: ClosingPoint::Gamma, gap, h, points: g });
        }
        for sign in [1.0, -1.0] {
            let d: Vec<[f64; 2]> = lambdas
                .iter()
                .filter_map(|&l| dirac_boundary_b(l, h, sign, omega).map(|b| [l, b]))
                .filter(|x| x[1] > 0.0 && x[1] <= a_max)
                .collect();
            if !d.is_empty() {
                let gap = if j % 2 == 0 { GapRef::Half } else { GapRef::Zero };
                out.push(BoundaryCurve { point: ClosingPoint::K, gap, h, points: d });
            }
        }
    }
    out
}

/// How `B` is set across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DriveAxis {
    EqualsA,
    Fixed { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub i_a: usize,
    pub i_lambda: usize,
    pub params: ModelParams,
    pub result: std::result::Result<Classification, String>,
}

impl PhasePoint {
    pub fn params_at(base: &ModelParams, a: f64, lambda: f64, drive: DriveAxis) -> ModelParams {
        let b = match drive {
            DriveAxis::EqualsA => a,
            DriveAxis::Fixed { value } => value,
        };
        ModelParams { hop: a, drive: b, stagger: lambda, ..*base }
    }
}

/// Classify every `(A, Lambda)` grid point; failures are recorded per point.
pub fn sweep_phase_diagram(
    base: &ModelParams,
    a_axis: &[f64],
    lambda_axis: &[f64],
    drive: DriveAxis,
    m_max: usize,
    n: usize,
) -> Vec<PhasePoint> {
    let tasks: Vec<(usize, usize)> =
        (0..lambda_axis.len()).flat_map(|l| (0..a_axis.len()).map(move |a| (a, l))).collect();
    tasks
        .into_par_iter()
        .map(|(ia, il)| {
            let params = PhasePoint::params_at(base, a_axis[ia], lambda_axis[il], drive);
            let result = classify_clean(&params, m_max, n).map_err(|e| e.to_string());
            PhasePoint { i_a: ia, i_lambda: il, params, result }
        })
        .collect()
}
