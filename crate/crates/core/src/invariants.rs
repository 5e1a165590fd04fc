//! Chern and winding numbers on a momentum grid, projectors of real-space
//! operators, and the Bott index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::disorder::{sample_field, DisorderSpec};
use crate::error::{Error, Result};
use crate::lattice::{orbital_offsets, reciprocal_vectors, Boundary, LatticeSpec};
use crate::model::{build_bloch_blocks, build_realspace_floquet, FloquetOperator, ModelParams};
use crate::phases::PhaseLabel;
use crate::spectrum::{eigh, hermiticity_defect, quasienergy_spectrum, Spectrum, HERMITIAN_TOL};
use crate::{CMat, C64};

/// Links with `|det| <` this are treated as a gap closure.
pub const LINK_TOL: f64 = 1e-10;
/// Accepted distance of a Chern flux from the nearest integer.
pub const FLUX_TOL: f64 = 0.01;
/// Accepted distance of a Bott value from the nearest integer.
pub const BOTT_TOL: f64 = 0.15;
/// Default momentum grid.
pub const DEFAULT_GRID: usize = 48;

/// Which eigenstates a projector keeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BandSelector {
    /// Every state of the truncated operator below `eps`.
    Below { eps: f64 },
    /// States with `lo < e < hi`.
    Window { lo: f64, hi: f64 },
    /// All states.
    All,
}

impl BandSelector {
    pub fn keeps(&self, e: f64) -> bool {
        match *self {
            BandSelector::Below { eps } => e < eps,
            BandSelector::Window { lo, hi } => e > lo && e < hi,
            BandSelector::All => true,
        }
    }

    /// Energies at which the selection must be gapped.
    fn edges(&self) -> Vec<f64> {
        match *self {
            BandSelector::Below { eps } => vec![eps],
            BandSelector::Window { lo, hi } => vec![lo, hi],
            BandSelector::All => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoIndices {
    #[serde(rename = "C")]
    pub c: i64,
    #[serde(rename = "W0")]
    pub w0: i64,
    #[serde(rename = "Whalf")]
    pub w_half: i64,
    pub label: PhaseLabel,
}

/// Momentum `(i/N) G1 + (j/N) G2`.
pub fn grid_k(i: usize, j: usize, n: usize, a: f64) -> [f64; 2] {
    let [g1, g2] = reciprocal_vectors(a);
    let (s, t) = (i as f64 / n as f64, j as f64 / n as f64);
    [s * g1[0] + t * g2[0], s * g1[1] + t * g2[1]]
}

/// Eigen-decompositions of the Bloch operator on an `N x N` grid.
pub struct BlochGrid {
    pub n: usize,
    pub params: ModelParams,
    pub m_max: usize,
    /// Row-major in `(j, i)`.
    pub spectra: Vec<Spectrum>,
}

impl BlochGrid {
    pub fn new(p: &ModelParams, m_max: usize, n: usize) -> Result<Self> {
        let grid = Self::with_builder(p, m_max, n, |k| Ok(build_bloch_blocks(k, p, m_max)?.into_matrix()))?;
        Ok(grid)
    }

    /// Grid over an arbitrary Bloch Hamiltonian in the `(blue, red)` basis
    /// (repeated per Floquet sector).
    pub fn with_builder(
        p: &ModelParams,
        m_max: usize,
        n: usize,
        build: impl Fn([f64; 2]) -> Result<CMat> + Sync,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("momentum grid {n} too small")));
        }
        let spectra = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let h = build(grid_k(idx % n, idx / n, n, p.a))?;
                let defect = hermiticity_defect(&h);
                if defect > HERMITIAN_TOL * h.norm_max().max(1.0) {
                    return Err(Error::NotHermitian(defect));
                }
                Ok(eigh(&h))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BlochGrid { n, params: *p, m_max, spectra })
    }

    fn at(&self, i: usize, j: usize) -> &Spectrum {
        &self.spectra[(j % self.n) * self.n + (i % self.n)]
    }

    /// Smallest direct gap straddling `eps` and the momentum where it occurs.
    pub fn min_gap(&self, eps: f64) -> (f64, [f64; 2]) {
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for j in 0..self.n {
            for i in 0..self.n {
                let v = &self.at(i, j).values;
                let below = v.iter().filter(|&&e| e < eps).fold(f64::NEG_INFINITY, |m, &e| m.max(e));
                let above = v.iter().filter(|&&e| e >= eps).fold(f64::INFINITY, |m, &e| m.min(e));
                let gap = above - below;
                if gap < best.0 {
                    best = (gap, grid_k(i, j, self.n, self.params.a));
                }
            }
        }
        best
    }

    /// Selected eigenvectors at grid point `(i, j)`, with `i = N` or `j = N`
    /// mapped back through the periodic gauge `psi(k + G) = V psi(k)`.
    fn frame(&self, i: usize, j: usize, sel: &BandSelector) -> CMat {
        let spec = self.at(i, j);
        let mut psi = spec.select(|e| sel.keeps(e));
        let wrap_i = i == self.n;
        let wrap_j = j == self.n;
        if wrap_i || wrap_j {
            let [g1, g2] = reciprocal_vectors(self.params.a);
            let mut g = [0.0, 0.0];
            if wrap_i {
                g = [g[0] + g1[0], g[1] + g1[1]];
            }
            if wrap_j {
                g = [g[0] + g2[0], g[1] + g2[1]];
            }
            let tau = orbital_offsets(self.params.a);
            let phase: Vec<C64> = tau.iter().map(|t| C64::from_polar(1.0, -(g[0] * t[0] + g[1] * t[1]))).collect();
            for r in 0..psi.nrows() {
                let ph = phase[r % 2];
                for c in 0..psi.ncols() {
                    psi.write(r, c, psi.read(r, c) * ph);
                }
            }
        }
        psi
    }
}

#[derive(Debug, Clone)]
pub struct CurvatureMap {
    pub n: usize,
    /// Berry flux per plaquette, row-major in `(j, i)`.
    pub flux: Vec<f64>,
    /// Total flux divided by `2 pi`.
    pub total: f64,
}

fn link(a: &CMat, b: &CMat) -> Option<C64> {
    if a.ncols() != b.ncols() {
        return None;
    }
    if a.ncols() == 0 {
        return Some(C64::new(1.0, 0.0));
    }
    let ov = a.adjoint() * b;
    let d = ov.determinant();
    if d.norm() < LINK_TOL {
        None
    } else {
        Some(d / d.norm())
    }
}

fn check_gap(grid: &BlochGrid, sel: &BandSelector) -> Result<()> {
    for eps in sel.edges() {
        let (gap, k) = grid.min_gap(eps);
        if gap < 1e-6 * grid.params.omega {
            return Err(Error::Gapless { eps, gap, kx: k[0], ky: k[1] });
        }
    }
    Ok(())
}

/// Plaquette Berry fluxes of the selected band group (link-variable method).
pub fn curvature_on_grid(grid: &BlochGrid, sel: &BandSelector) -> Result<CurvatureMap> {
    check_gap(grid, sel)?;
    let n = grid.n;
    let frames: Vec<CMat> =
        (0..(n + 1) * (n + 1)).into_par_iter().map(|idx| grid.frame(idx % (n + 1), idx / (n + 1), sel)).collect();
    let f = |i: usize, j: usize| &frames[j * (n + 1) + i];
    let flux = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % n, idx / n);
            let u1 = link(f(i, j), f(i + 1, j));
            let u2 = link(f(i + 1, j), f(i + 1, j + 1));
            let u3 = link(f(i, j + 1), f(i + 1, j + 1));
            let u4 = link(f(i, j), f(i, j + 1));
            match (u1, u2, u3, u4) {
                (Some(u1), Some(u2), Some(u3), Some(u4)) => Ok((u1 * u2 * u3.conj() * u4.conj()).arg()),
                _ => Err(Error::SingularLink { i, j }),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let total = flux.iter().sum::<f64>() / (2.0 * PI);
    Ok(CurvatureMap { n, flux, total })
}

pub fn berry_curvature_map(p: &ModelParams, m_max: usize, n: usize, sel: &BandSelector) -> Result<CurvatureMap> {
    if n < 12 {
        return Err(Error::InvalidParameter(format!("Berry curvature grid {n} < 12")));
    }
    curvature_on_grid(&BlochGrid::new(p, m_max, n)?, sel)
}

fn round_flux(total: f64) -> Result<i64> {
    let r = total.round();
    if (total - r).abs() > FLUX_TOL {
        return Err(Error::NonIntegerFlux { flux: total, tol: FLUX_TOL });
    }
    Ok(r as i64)
}

pub fn chern_on_grid(grid: &BlochGrid, sel: &BandSelector) -> Result<i64> {
    round_flux(curvature_on_grid(grid, sel)?.total)
}

/// Chern number of the band group picked by `sel`.
pub fn chern_number(p: &ModelParams, m_max: usize, n: usize, sel: &BandSelector) -> Result<i64> {
    round_flux(berry_curvature_map(p, m_max, n, sel)?.total)
}

/// Chern number of the central band just below zero, in `(-omega/2, 0)`.
pub fn central_band(p: &ModelParams) -> BandSelector {
    BandSelector::Window { lo: -0.5 * p.omega, hi: 0.0 }
}

/// Total Chern number of all truncated-space states below `eps_ref`.
pub fn winding_number(p: &ModelParams, m_max: usize, n: usize, eps_ref: f64) -> Result<i64> {
    chern_number(p, m_max, n, &BandSelector::Below { eps: eps_ref })
}

/// `(C, W_0, W_half)` from a single set of eigen-decompositions.
pub fn topo_indices(p: &ModelParams, m_max: usize, n: usize) -> Result<TopoIndices> {
    let grid = BlochGrid::new(p, m_max, n)?;
    topo_indices_on_grid(&grid)
}

pub fn topo_indices_on_grid(grid: &BlochGrid) -> Result<TopoIndices> {
    let p = &grid.params;
    let c = chern_on_grid(grid, &central_band(p))?;
    let w0 = chern_on_grid(grid, &BandSelector::Below { eps: 0.0 })?;
    let w_half = chern_on_grid(grid, &BandSelector::Below { eps: 0.5 * p.omega })?;
    Ok(TopoIndices { c, w0, w_half, label: PhaseLabel::from_indices(c, w_half) })
}

/// Projector onto selected eigenstates of a real-space operator, stored as
/// an orthonormal frame.
#[derive(Debug, Clone)]
pub struct BandProjector {
    pub frame: CMat,
    pub selection: BandSelector,
    /// Number of orbitals per Floquet sector (sites).
    pub n_orb: usize,
    /// False when no clear spectral gap separates the selection.
    pub gapped: bool,
}

impl BandProjector {
    pub fn rank(&self) -> usize {
        self.frame.ncols()
    }

    pub fn dim(&self) -> usize {
        self.frame.nrows()
    }

    /// Dense `P = Psi Psi^dagger`.
    pub fn matrix(&self) -> CMat {
        &self.frame * self.frame.adjoint()
    }
}

/// Whether the spectrum has a gap of at least ten mean level spacings at `eps`.
fn has_gap(values: &[f64], eps: f64) -> bool {
    if values.len() < 2 {
        return true;
    }
    let mean = (values[values.len() - 1] - values[0]) / (values.len() - 1) as f64;
    let below = values.iter().filter(|&&e| e < eps).fold(f64::NEG_INFINITY, |m, &e| m.max(e));
    let above = values.iter().filter(|&&e| e >= eps).fold(f64::INFINITY, |m, &e| m.min(e));
    !(above - below).is_finite() || above - below > 10.0 * mean
}

pub fn projector_from_spectrum(spec: &Spectrum, n_orb: usize, sel: BandSelector) -> BandProjector {
    let gapped = sel.edges().iter().all(|&e| has_gap(&spec.values, e));
    if !gapped {
        log::warn!("no clear spectral gap for selection {sel:?}; projector kept");
    }
    BandProjector { frame: spec.select(|e| sel.keeps(e)), selection: sel, n_orb, gapped }
}

pub fn band_projector(op: &FloquetOperator, sel: BandSelector) -> Result<BandProjector> {
    let spec = quasienergy_spectrum(op)?;
    Ok(projector_from_spectrum(&spec, op.n_orb(), sel))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BottValue {
    pub value: f64,
    /// `None` when the value is further than [`BOTT_TOL`] from an integer.
    pub rounded: Option<i64>,
}

impl BottValue {
    fn new(value: f64) -> Self {
        let r = value.round();
        BottValue { value, rounded: ((value - r).abs() < BOTT_TOL).then_some(r as i64) }
    }
}

/// `Psi^dagger diag(phase) Psi`.
fn projected_phase(frame: &CMat, phase: &[C64]) -> CMat {
    let n = frame.nrows();
    let scaled = CMat::from_fn(n, frame.ncols(), |i, j| frame.read(i, j) * phase[i]);
    frame.adjoint() * scaled
}

/// Bott index `(1/2 pi) Im Tr log(U_x U_y U_x^dagger U_y^dagger)` with
/// `U_alpha = P exp(-2 pi i alpha / L_alpha) P` restricted to the range of `P`.
pub fn bott_index(proj: &BandProjector, lat: &LatticeSpec) -> Result<BottValue> {
    if lat.boundary != Boundary::Torus {
        return Err(Error::LatticeMismatch("Bott index needs a torus".into()));
    }
    if proj.n_orb != lat.n_sites() || !proj.dim().is_multiple_of(lat.n_sites()) {
        return Err(Error::LatticeMismatch(format!(
            "projector acts on {} orbitals per sector, lattice has {} sites",
            proj.n_orb,
            lat.n_sites()
        )));
    }
    let positions: Vec<[f64; 2]> = lat.sites().iter().map(|s| s.pos).collect();
    bott_index_at(proj, &positions, lat.lx(), lat.ly())
}

/// Bott index for explicit site positions on an `lx x ly` torus.
pub fn bott_index_at(proj: &BandProjector, positions: &[[f64; 2]], lx: f64, ly: f64) -> Result<BottValue> {
    if proj.rank() == 0 {
        return Ok(BottValue::new(0.0));
    }
    let n_orb = positions.len();
    let px: Vec<C64> =
        (0..proj.dim()).map(|i| C64::from_polar(1.0, -2.0 * PI * positions[i % n_orb][0] / lx)).collect();
    let py: Vec<C64> =
        (0..proj.dim()).map(|i| C64::from_polar(1.0, -2.0 * PI * positions[i % n_orb][1] / ly)).collect();
    let ux = projected_phase(&proj.frame, &px);
    let uy = projected_phase(&proj.frame, &py);
    let m = (&ux * &uy) * (ux.adjoint() * uy.adjoint());
    let ev: Vec<C64> = m.eigenvalues::<C64>();
    let smallest = ev.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if smallest < 1e-12 {
        return Err(Error::SingularBott(smallest));
    }
    let value = ev.iter().map(|z| z.arg()).sum::<f64>() / (2.0 * PI);
    Ok(BottValue::new(value))
}

/// Bott indices of one operator for several `Below` energies.
pub fn bott_below(op: &FloquetOperator, lat: &LatticeSpec, eps_refs: &[f64]) -> Result<Vec<BottValue>> {
    let spec = quasienergy_spectrum(op)?;
    eps_refs
        .iter()
        .map(|&eps| bott_index(&projector_from_spectrum(&spec, op.n_orb(), BandSelector::Below { eps }), lat))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottAverage {
    pub eps_ref: f64,
    pub mean: f64,
    pub std_err: f64,
    /// Per-sample values in sample order (`NaN` for excluded failures).
    pub samples: Vec<f64>,
    pub failed: Vec<usize>,
}

/// Disorder-averaged Bott index at each `eps_ref`, one eigen-decomposition per sample.
///
/// A failing sample aborts with its index unless `skip_failures` is set, in
/// which case it is left out of the mean and listed in `failed`.
pub fn disorder_averaged_bott(
    p: &ModelParams,
    lat: &LatticeSpec,
    spec: &DisorderSpec,
    eps_refs: &[f64],
    n_samples: usize,
    m_max: usize,
    skip_failures: bool,
) -> Result<Vec<BottAverage>> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    spec.validate()?;
    let run = |s: usize| -> Result<Vec<f64>> {
        let v = if spec.w == 0.0 { None } else { Some(sample_field(lat, spec, s as u64)?) };
        let op = build_realspace_floquet(lat, p, v.as_ref(), m_max)?;
        Ok(bott_below(&op, lat, eps_refs)?.iter().map(|b| b.value).collect())
    };
    let per: Vec<Result<Vec<f64>>> = if spec.w == 0.0 {
        // every sample is the clean system
        let clean = run(0).map_err(|e| Error::Sample { index: 0, source: Box::new(e) })?;
        (0..n_samples).map(|_| Ok(clean.clone())).collect()
    } else {
        (0..n_samples).into_par_iter().map(run).collect()
    };
    let mut failed = Vec::new();
    let mut rows: Vec<Option<Vec<f64>>> = Vec::with_capacity(n_samples);
    for (s, r) in per.into_iter().enumerate() {
        match r {
            Ok(v) => rows.push(Some(v)),
            Err(e) if skip_failures => {
                log::warn!("sample {s} excluded: {e}");
                failed.push(s);
                rows.push(None);
            }
            Err(e) => return Err(Error::Sample { index: s, source: Box::new(e) }),
        }
    }
    let good: Vec<&Vec<f64>> = rows.iter().flatten().collect();
    if good.is_empty() {
        return Err(Error::InvalidParameter("every disorder sample failed".into()));
    }
    Ok(eps_refs
        .iter()
        .enumerate()
        .map(|(e, &eps_ref)| {
            let vals: Vec<f64> = good.iter().map(|v| v[e]).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let std_err = if vals.len() > 1 {
                (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            let samples = rows.iter().map(|r| r.as_ref().map_or(f64::NAN, |v| v[e])).collect();
            BottAverage { eps_ref, mean, std_err, samples, failed: failed.clone() }
        })
        .collect())
}
