//! Lowest-order (non-self-consistent) Born self-energy `Sigma_ij = G_ij <V_i V_j>`
//! with `G = (eps - H + i eta)^-1` of the clean extended-Floquet operator, the
//! drive-parameter corrections it implies, and the low-energy two-band model
//! near `Gamma` with its disorder-induced mass shift.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::disorder::{DisorderMode, DisorderSpec};
use crate::error::{Error, Result};
use crate::lattice::{cell_area, nn_vectors, reciprocal_vectors, Boundary, LatticeSpec, Sublattice};
use crate::model::{build_bloch_blocks, build_realspace_floquet, ModelParams};
use crate::phases::{analytic_crossings, Crossing};
use crate::quadrature::{adaptive_2d, GaussLegendre, Integral};
use crate::spectrum::eigh;
use crate::{CMat, C64};

/// Eigenvalues closer than this (times omega) to `eps` make the resolvent singular.
pub const SINGULAR_DIST: f64 = 1e-6;
/// Gaussian weights below this are dropped from momentum integrals.
pub const WEIGHT_CUTOFF: f64 = 1e-16;

/// Sector-`{0, 1}` blocks of a translation-invariant self-energy (or resolvent):
/// on-site per sublattice, and nearest-neighbour blocks per bond direction.
/// Index order is `[sublattice or lambda][m][n]` with `m, n` in `{0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalBlocks {
    pub onsite: [[[C64; 2]; 2]; 2],
    /// Row on the blue site, column on the red site.
    pub bond_blue_red: [[[C64; 2]; 2]; 3],
    /// Row on the red site, column on the blue site.
    pub bond_red_blue: [[[C64; 2]; 2]; 3],
}

impl LocalBlocks {
    fn zero() -> Self {
        let z = [[C64::new(0.0, 0.0); 2]; 2];
        LocalBlocks { onsite: [z; 2], bond_blue_red: [z; 3], bond_red_blue: [z; 3] }
    }

    fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(64);
        let blocks = self.onsite.iter().chain(&self.bond_blue_red).chain(&self.bond_red_blue);
        for b in blocks {
            for row in b {
                for z in row {
                    out.push(z.re);
                    out.push(z.im);
                }
            }
        }
        out
    }

    fn from_vec(v: &[f64]) -> Self {
        let mut lb = Self::zero();
        let mut it = v.chunks(2).map(|c| C64::new(c[0], c[1]));
        let blocks = lb.onsite.iter_mut().chain(lb.bond_blue_red.iter_mut()).chain(lb.bond_red_blue.iter_mut());
        for b in blocks {
            for row in b.iter_mut() {
                for z in row.iter_mut() {
                    *z = it.next().unwrap_or_default();
                }
            }
        }
        lb
    }

    /// On-site blocks scaled by `onsite`, bond blocks by `bond`.
    pub fn scaled(&self, onsite: f64, bond: f64) -> Self {
        let mut out = *self;
        for b in out.onsite.iter_mut() {
            for row in b.iter_mut() {
                for z in row.iter_mut() {
                    *z *= onsite;
                }
            }
        }
        for b in out.bond_blue_red.iter_mut().chain(out.bond_red_blue.iter_mut()) {
            for row in b.iter_mut() {
                for z in row.iter_mut() {
                    *z *= bond;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelfEnergyRepr {
    /// Bloch blocks at momentum `q`, dimension `2 (2 m_max + 1)`.
    Momentum { q: [f64; 2], blocks: CMat },
    /// Full real-space matrix on a torus.
    Sites { lattice: LatticeSpec, matrix: CMat },
    /// Local blocks of the infinite lattice.
    Local(LocalBlocks),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfEnergy {
    pub eps: f64,
    pub eta: f64,
    pub spec: DisorderSpec,
    pub m_max: usize,
    pub repr: SelfEnergyRepr,
    /// Quadrature error estimate (0 for exact sums).
    pub error: f64,
}

fn check_eps(p: &ModelParams, eps: f64) -> Result<()> {
    if !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("reference energy {eps}")));
    }
    if eps.abs() > 1e-12 && (eps - 0.5 * p.omega).abs() > 1e-12 {
        log::warn!("self-energy at eps = {eps}, away from 0 and omega/2");
    }
    Ok(())
}

/// Resolvent `(eps + i eta - H(k))^-1` of the Bloch operator.
pub fn bloch_resolvent(k: [f64; 2], p: &ModelParams, m_max: usize, eps: f64, eta: f64) -> Result<CMat> {
    let op = build_bloch_blocks(k, p, m_max)?;
    resolvent(op.matrix(), eps, eta, p.omega, k)
}

fn resolvent(h: &CMat, eps: f64, eta: f64, omega: f64, k: [f64; 2]) -> Result<CMat> {
    let spec = eigh(h);
    let dist = spec.values.iter().map(|e| (e - eps).abs()).fold(f64::INFINITY, f64::min);
    if dist < SINGULAR_DIST * omega && eta == 0.0 {
        return Err(Error::NearSingular { eps, dist, kx: k[0], ky: k[1] });
    }
    let n = h.nrows();
    let w: Vec<C64> = spec.values.iter().map(|&e| C64::new(1.0, 0.0) / C64::new(eps - e, eta)).collect();
    let scaled = CMat::from_fn(n, n, |i, j| spec.vectors.read(i, j) * w[j]);
    Ok(&scaled * spec.vectors.adjoint())
}

fn cexp(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

/// Local resolvent blocks at one momentum (integrand of the BZ average).
fn local_integrand(g: &CMat, k: [f64; 2], p: &ModelParams, m_max: usize) -> LocalBlocks {
    let idx = |m: usize, s: usize| (m + m_max) * 2 + s;
    let (b, r) = (Sublattice::Blue.orbital(), Sublattice::Red.orbital());
    let nn = nn_vectors(p.a);
    let mut lb = LocalBlocks::zero();
    for m in 0..2 {
        for n in 0..2 {
            for s in 0..2 {
                lb.onsite[s][m][n] = g.read(idx(m, s), idx(n, s));
            }
            for (l, av) in nn.iter().enumerate() {
                let ph = cexp(k[0] * av[0] + k[1] * av[1]);
                lb.bond_blue_red[l][m][n] = g.read(idx(m, b), idx(n, r)) * ph;
                lb.bond_red_blue[l][m][n] = g.read(idx(m, r), idx(n, b)) * ph.conj();
            }
        }
    }
    lb
}

/// Integral over the Brillouin zone normalised to the zone area, using the
/// reduced coordinates `k = s G1 + t G2`, `s, t in [-1/2, 1/2]`.
fn bz_average(f: &(dyn Fn([f64; 2]) -> Result<Vec<f64>> + Sync), a: f64, tol: f64) -> Result<Integral> {
    let [g1, g2] = reciprocal_vectors(a);
    let failure = std::sync::Mutex::new(None);
    let g = |s: f64, t: f64| -> Vec<f64> {
        let k = [s * g1[0] + t * g2[0], s * g1[1] + t * g2[1]];
        match f(k) {
            Ok(v) => v,
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                vec![f64::NAN]
            }
        }
    };
    let rule = GaussLegendre::new(10);
    let out = adaptive_2d(&g, (-0.5, 0.5), (-0.5, 0.5), &rule, tol, tol);
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    out
}

/// Local resolvent blocks of the infinite clean lattice,
/// `G_ij = (A_c / 4 pi^2) int_BZ G(k) exp(i k.(r_i - r_j))`.
pub fn local_resolvent(p: &ModelParams, m_max: usize, eps: f64, eta: f64, tol: f64) -> Result<(LocalBlocks, f64)> {
    check_eps(p, eps)?;
    let f = |k: [f64; 2]| -> Result<Vec<f64>> {
        let g = bloch_resolvent(k, p, m_max, eps, eta)?;
        Ok(local_integrand(&g, k, p, m_max).to_vec())
    };
    let r = bz_average(&f, p.a, tol)?;
    Ok((LocalBlocks::from_vec(&r.value), r.error))
}

/// Self-energy of the infinite lattice restricted to on-site and
/// nearest-neighbour blocks: on-site scaled by `W^2`, bonds by `W^2 F`.
pub fn self_energy_local(
    eps: f64,
    p: &ModelParams,
    spec: &DisorderSpec,
    m_max: usize,
    eta: f64,
    tol: f64,
) -> Result<SelfEnergy> {
    spec.validate()?;
    let (g, error) = local_resolvent(p, m_max, eps, eta, tol)?;
    let w2 = spec.w * spec.w;
    let f = bond_factor(spec, p.a);
    Ok(SelfEnergy {
        eps,
        eta,
        spec: *spec,
        m_max,
        repr: SelfEnergyRepr::Local(g.scaled(w2, w2 * f)),
        error: error * w2,
    })
}

/// `F = exp(-a^2 / 2 sigma^2)` (0 for uncorrelated disorder).
pub fn bond_factor(spec: &DisorderSpec, a: f64) -> f64 {
    match spec.mode {
        DisorderMode::Uncorrelated => 0.0,
        DisorderMode::Correlated => (-a * a / (2.0 * spec.sigma * spec.sigma)).exp(),
    }
}

/// Momentum grid for [`self_energy_momentum`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentumGrid {
    /// Discrete momenta of a torus (exact counterpart of the real-space route).
    Torus(LatticeSpec),
    /// Adaptive quadrature of the infinite-lattice integral with the given tolerance.
    Continuum { tol: f64 },
}

fn flatten(m: &CMat) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 * m.nrows() * m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m.read(i, j);
            v.push(z.re);
            v.push(z.im);
        }
    }
    v
}

fn unflatten(v: &[f64], n: usize) -> CMat {
    CMat::from_fn(n, n, |i, j| C64::new(v[2 * (j * n + i)], v[2 * (j * n + i) + 1]))
}

fn sublattice_diagonal(g: &CMat) -> CMat {
    CMat::from_fn(g.nrows(), g.ncols(), |i, j| if i % 2 == j % 2 { g.read(i, j) } else { C64::new(0.0, 0.0) })
}

/// Allowed torus momenta `(2 pi n / Lx, 2 pi m / Ly)` inside the disk `|k| <= kmax`.
fn torus_momenta(lat: &LatticeSpec, kmax: f64) -> Vec<[f64; 2]> {
    let (dkx, dky) = (2.0 * PI / lat.lx(), 2.0 * PI / lat.ly());
    let (nx, ny) = ((kmax / dkx).ceil() as i64, (kmax / dky).ceil() as i64);
    let mut out = Vec::new();
    for m in -ny..=ny {
        for n in -nx..=nx {
            let k = [n as f64 * dkx, m as f64 * dky];
            if k[0].hypot(k[1]) <= kmax {
                out.push(k);
            }
        }
    }
    out
}

/// Allowed torus momenta, one per class modulo the reciprocal lattice.
fn torus_bz(lat: &LatticeSpec) -> Vec<[f64; 2]> {
    let (dkx, dky) = (2.0 * PI / lat.lx(), 2.0 * PI / lat.ly());
    (0..lat.ny).flat_map(|m| (0..lat.nx).map(move |n| [n as f64 * dkx, m as f64 * dky])).collect()
}

fn gaussian_kmax(sigma: f64) -> f64 {
    (-2.0 * WEIGHT_CUTOFF.ln()).sqrt() / sigma
}

/// Self-energy at `q = Gamma` in the Bloch basis.
///
/// Uncorrelated disorder keeps only the sublattice-diagonal part of the
/// zone-averaged resolvent (the real-space self-energy is purely on-site);
/// correlated disorder integrates `(W^2 sigma^2 / 2 pi) exp(-sigma^2 k^2 / 2) G(k)`
/// over the whole plane.
pub fn self_energy_momentum(
    eps: f64,
    p: &ModelParams,
    spec: &DisorderSpec,
    m_max: usize,
    grid: MomentumGrid,
    eta: f64,
) -> Result<SelfEnergy> {
    spec.validate()?;
    check_eps(p, eps)?;
    let dim = 2 * (2 * m_max + 1);
    let w2 = spec.w * spec.w;
    let (blocks, error) = match (spec.mode, grid) {
        (DisorderMode::Uncorrelated, MomentumGrid::Torus(lat)) => {
            let ks = torus_bz(&lat);
            let parts =
                ks.par_iter().map(|&k| bloch_resolvent(k, p, m_max, eps, eta)).collect::<Result<Vec<CMat>>>()?;
            let mut sum = CMat::zeros(dim, dim);
            for g in &parts {
                sum += g;
            }
            let scale = C64::new(w2 / ks.len() as f64, 0.0);
            (sublattice_diagonal(&sum) * faer::scale(scale), 0.0)
        }
        (DisorderMode::Uncorrelated, MomentumGrid::Continuum { tol }) => {
            let f = |k: [f64; 2]| -> Result<Vec<f64>> { Ok(flatten(&bloch_resolvent(k, p, m_max, eps, eta)?)) };
            let r = bz_average(&f, p.a, tol)?;
            let g = unflatten(&r.value, dim);
            (sublattice_diagonal(&g) * faer::scale(C64::new(w2, 0.0)), r.error * w2)
        }
        (DisorderMode::Correlated, MomentumGrid::Torus(lat)) => {
            let sigma = spec.sigma;
            let ks = torus_momenta(&lat, gaussian_kmax(sigma));
            let parts = ks
                .par_iter()
                .map(|&k| {
                    let w = (-sigma * sigma * (k[0] * k[0] + k[1] * k[1]) / 2.0).exp();
                    Ok(bloch_resolvent(k, p, m_max, eps, eta)? * faer::scale(C64::new(w, 0.0)))
                })
                .collect::<Result<Vec<CMat>>>()?;
            let mut sum = CMat::zeros(dim, dim);
            for g in &parts {
                sum += g;
            }
            let dk2 = 4.0 * PI * PI / (lat.lx() * lat.ly());
            let scale = dk2 * w2 * sigma * sigma / (2.0 * PI);
            (sum * faer::scale(C64::new(scale, 0.0)), 0.0)
        }
        (DisorderMode::Correlated, MomentumGrid::Continuum { tol }) => {
            let sigma = spec.sigma;
            let kmax = gaussian_kmax(sigma);
            let failure = std::sync::Mutex::new(None);
            // polar coordinates; the Jacobian k is part of the integrand
            let f = |r: f64, th: f64| -> Vec<f64> {
                let k = [r * th.cos(), r * th.sin()];
                match bloch_resolvent(k, p, m_max, eps, eta) {
                    Ok(g) => {
                        let w = r * (-sigma * sigma * r * r / 2.0).exp();
                        flatten(&g).into_iter().map(|x| x * w).collect()
                    }
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                        vec![f64::NAN; 2 * dim * dim]
                    }
                }
            };
            let rule = GaussLegendre::new(10);
            let r = adaptive_2d(&f, (0.0, kmax), (0.0, 2.0 * PI), &rule, tol, tol);
            if let Some(e) = failure.into_inner().unwrap() {
                return Err(e);
            }
            let r = r?;
            let scale = w2 * sigma * sigma / (2.0 * PI);
            (unflatten(&r.value, dim) * faer::scale(C64::new(scale, 0.0)), r.error * scale)
        }
    };
    Ok(SelfEnergy { eps, eta, spec: *spec, m_max, repr: SelfEnergyRepr::Momentum { q: [0.0, 0.0], blocks }, error })
}

/// Periodised covariance `sum_images W^2 exp(-|d + R|^2 / 2 sigma^2)` on the torus.
fn torus_covariance(spec: &DisorderSpec, lat: &LatticeSpec, d: [f64; 2]) -> f64 {
    match spec.mode {
        DisorderMode::Uncorrelated => spec.covariance(d[0].hypot(d[1])),
        DisorderMode::Correlated => {
            let (lx, ly) = (lat.lx(), lat.ly());
            let reach = (gaussian_kmax(1.0 / spec.sigma) * spec.sigma).max(1.0);
            let (ni, nj) = ((reach * spec.sigma / lx).ceil() as i64 + 1, (reach * spec.sigma / ly).ceil() as i64 + 1);
            let mut c = 0.0;
            for i in -ni..=ni {
                for j in -nj..=nj {
                    c += spec.covariance((d[0] + i as f64 * lx).hypot(d[1] + j as f64 * ly));
                }
            }
            c
        }
    }
}

/// Real-space self-energy on a torus, `Sigma^{ij}_mn = G^{ij}_mn(eps) C(r_i - r_j)`.
pub fn self_energy_realspace(
    eps: f64,
    lat: &LatticeSpec,
    p: &ModelParams,
    spec: &DisorderSpec,
    m_max: usize,
    eta: f64,
) -> Result<SelfEnergy> {
    spec.validate()?;
    check_eps(p, eps)?;
    if lat.boundary != Boundary::Torus {
        return Err(Error::LatticeMismatch("real-space self-energy needs a torus".into()));
    }
    let op = build_realspace_floquet(lat, p, None, m_max)?;
    let g = resolvent(op.matrix(), eps, eta, p.omega, [f64::NAN, f64::NAN])?;
    let ns = lat.n_sites();
    let sites = lat.sites();
    let cov: Vec<f64> = (0..ns * ns)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % ns, idx / ns);
            torus_covariance(spec, lat, lat.displacement(sites[j].pos, sites[i].pos))
        })
        .collect();
    let dim = op.dim();
    let matrix = CMat::from_fn(dim, dim, |a, b| g.read(a, b) * cov[(b % ns) * ns + a % ns]);
    Ok(SelfEnergy { eps, eta, spec: *spec, m_max, repr: SelfEnergyRepr::Sites { lattice: *lat, matrix }, error: 0.0 })
}

/// Bloch transform of a real-space self-energy at momentum `q`, averaged over
/// the unit cells of the row index.
pub fn bloch_transform(s: &SelfEnergy, q: [f64; 2]) -> Result<CMat> {
    let (lat, matrix) = match &s.repr {
        SelfEnergyRepr::Sites { lattice, matrix } => (lattice, matrix),
        _ => return Err(Error::LatticeMismatch("Bloch transform needs a real-space self-energy".into())),
    };
    let ns = lat.n_sites();
    let nsec = 2 * s.m_max + 1;
    let sites = lat.sites();
    let mut out = CMat::zeros(2 * nsec, 2 * nsec);
    for i in 0..ns {
        for j in 0..ns {
            let d = lat.displacement(sites[j].pos, sites[i].pos);
            let ph = cexp(-(q[0] * d[0] + q[1] * d[1]));
            let (si, sj) = (i % 2, j % 2);
            for m in 0..nsec {
                for n in 0..nsec {
                    let v = matrix.read(m * ns + i, n * ns + j) * ph;
                    let (r, c) = (m * 2 + si, n * 2 + sj);
                    out.write(r, c, out.read(r, c) + v);
                }
            }
        }
    }
    Ok(out * faer::scale(C64::new(1.0 / lat.n_cells() as f64, 0.0)))
}

/// Sector-`{0,1}` local blocks of a real-space self-energy, averaged over sites and bonds.
pub fn local_blocks(s: &SelfEnergy, lat: &LatticeSpec) -> Result<LocalBlocks> {
    let matrix = match &s.repr {
        SelfEnergyRepr::Sites { lattice, matrix } if lattice == lat => matrix,
        SelfEnergyRepr::Local(lb) => return Ok(*lb),
        _ => return Err(Error::LatticeMismatch("self-energy representation does not match lattice".into())),
    };
    let ns = lat.n_sites();
    let at = |m: usize, i: usize, n: usize, j: usize| matrix.read((m + s.m_max) * ns + i, (n + s.m_max) * ns + j);
    let mut lb = LocalBlocks::zero();
    let per_sub = (ns / 2) as f64;
    for i in 0..ns {
        let sub = i % 2;
        for m in 0..2 {
            for n in 0..2 {
                lb.onsite[sub][m][n] += at(m, i, n, i) / per_sub;
            }
        }
    }
    let bonds = lat.bonds();
    let mut count = [0usize; 3];
    for b in &bonds {
        count[b.lambda] += 1;
        for m in 0..2 {
            for n in 0..2 {
                lb.bond_blue_red[b.lambda][m][n] += at(m, b.blue, n, b.red);
                lb.bond_red_blue[b.lambda][m][n] += at(m, b.red, n, b.blue);
            }
        }
    }
    for l in 0..3 {
        let c = count[l].max(1) as f64;
        for m in 0..2 {
            for n in 0..2 {
                lb.bond_blue_red[l][m][n] /= c;
                lb.bond_red_blue[l][m][n] /= c;
            }
        }
    }
    Ok(lb)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    #[serde(rename = "dLambda")]
    pub d_lambda: f64,
    #[serde(rename = "dOmega")]
    pub d_omega: f64,
    #[serde(rename = "dA")]
    pub d_a: f64,
    /// Real part of the phase-weighted average.
    #[serde(rename = "dB")]
    pub d_b: f64,
    #[serde(rename = "dB_complex")]
    pub d_b_complex: C64,
    /// `delta B` from blue-to-red and red-to-blue bond blocks separately.
    #[serde(rename = "dB_split")]
    pub d_b_split: [C64; 2],
    #[serde(rename = "F")]
    pub f: f64,
}

/// Parameter shifts implied by local self-energy blocks:
/// `dOmega = <Sigma_11 - Sigma_00>_sites`, `dLambda = (Sigma_00^blue - Sigma_00^red)/2`,
/// `dA = -<Sigma_00^ij>_bonds`, `dB = -2 <exp(-i phi_lambda) Sigma_10^ij>_bonds`.
pub fn effective_from_blocks(lb: &LocalBlocks, p: &ModelParams, f: f64) -> EffectiveParams {
    let (b, r) = (Sublattice::Blue.orbital(), Sublattice::Red.orbital());
    let d_omega = 0.5 * (lb.onsite[b][1][1] - lb.onsite[b][0][0] + lb.onsite[r][1][1] - lb.onsite[r][0][0]).re;
    let d_lambda = 0.5 * (lb.onsite[b][0][0] - lb.onsite[r][0][0]).re;
    let mut a_sum = C64::new(0.0, 0.0);
    let mut split = [C64::new(0.0, 0.0); 2];
    for l in 0..3 {
        a_sum += lb.bond_blue_red[l][0][0] + lb.bond_red_blue[l][0][0];
        let ph = cexp(-p.phi[l]);
        split[0] += ph * lb.bond_blue_red[l][1][0];
        split[1] += ph * lb.bond_red_blue[l][1][0];
    }
    let d_a = -(a_sum / 6.0).re;
    let d_b_split = [split[0] * (-2.0 / 3.0), split[1] * (-2.0 / 3.0)];
    let d_b_complex = (d_b_split[0] + d_b_split[1]) * 0.5;
    EffectiveParams { d_lambda, d_omega, d_a, d_b: d_b_complex.re, d_b_complex, d_b_split, f }
}

/// Parameter shifts from a real-space or local self-energy.
pub fn effective_parameters(s: &SelfEnergy, lat: &LatticeSpec, p: &ModelParams) -> Result<EffectiveParams> {
    let lb = local_blocks(s, lat)?;
    Ok(effective_from_blocks(&lb, p, bond_factor(&s.spec, p.a)))
}

/// Shifts per unit disorder: `dLambda / W^2`, `dOmega / W^2`, `dA / (W^2 F)`, `dB / (W^2 F)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCoefficients {
    pub eps: f64,
    #[serde(rename = "dLambda")]
    pub d_lambda: f64,
    #[serde(rename = "dOmega")]
    pub d_omega: f64,
    #[serde(rename = "dA")]
    pub d_a: f64,
    #[serde(rename = "dB")]
    pub d_b: f64,
    #[serde(rename = "dB_complex")]
    pub d_b_complex: C64,
    #[serde(rename = "dB_split")]
    pub d_b_split: [C64; 2],
    /// Quadrature error estimate of the local resolvent.
    pub error: f64,
}

impl EffectiveCoefficients {
    /// Shifts for disorder strength `w` and correlation half-length `sigma`.
    pub fn at(&self, w: f64, sigma: f64, a: f64) -> EffectiveParams {
        let f = if sigma > 0.0 { (-a * a / (2.0 * sigma * sigma)).exp() } else { 0.0 };
        let (w2, w2f) = (w * w, w * w * f);
        EffectiveParams {
            d_lambda: self.d_lambda * w2,
            d_omega: self.d_omega * w2,
            d_a: self.d_a * w2f,
            d_b: self.d_b * w2f,
            d_b_complex: self.d_b_complex * w2f,
            d_b_split: [self.d_b_split[0] * w2f, self.d_b_split[1] * w2f],
            f,
        }
    }
}

/// Infinite-lattice coefficients of the parameter shifts at reference energy `eps`.
pub fn effective_coefficients(p: &ModelParams, eps: f64, m_max: usize, tol: f64) -> Result<EffectiveCoefficients> {
    let (g, error) = local_resolvent(p, m_max, eps, 0.0, tol)?;
    let e = effective_from_blocks(&g, p, 1.0);
    Ok(EffectiveCoefficients {
        eps,
        d_lambda: e.d_lambda,
        d_omega: e.d_omega,
        d_a: e.d_a,
        d_b: e.d_b,
        d_b_complex: e.d_b_complex,
        d_b_split: e.d_b_split,
        error,
    })
}

/// Two-band model near `Gamma` for the gap at `omega/2`:
/// `H(k) - omega/2 ~ [[M0, M1], [M1*, -M0]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowEnergyModel {
    pub k: [f64; 2],
    pub m0: f64,
    pub m1: C64,
    pub mt2: f64,
    /// `M = omega/2 - 3A`.
    pub mass: f64,
}

impl LowEnergyModel {
    pub fn matrix(&self) -> [[C64; 2]; 2] {
        [[C64::new(self.m0, 0.0), self.m1], [self.m1.conj(), C64::new(-self.m0, 0.0)]]
    }
}

/// Basis rotation `exp(-i pi sigma_y / 4)` applied to both Floquet sectors
/// before the two-band reduction; it diagonalises the `-3A sigma_x` term at `Gamma`.
pub fn low_energy_rotation() -> [[f64; 2]; 2] {
    let c = std::f64::consts::FRAC_1_SQRT_2;
    [[c, -c], [c, c]]
}

/// `M0 = omega/2 - 3A + (3/4) A a^2 k^2`, `M1 = (3 B a / 8)(1 - sqrt(3) i)(kx + i ky)`,
/// `Mt^2 = M0^2 + (9 B^2 / 16) a^2 k^2`.
pub fn low_energy_blocks(k: [f64; 2], p: &ModelParams) -> Result<LowEnergyModel> {
    if p.stagger != 0.0 {
        return Err(Error::InvalidParameter("low-energy model derived for Lambda = 0 only".into()));
    }
    let k2 = k[0] * k[0] + k[1] * k[1];
    if k2.sqrt() * p.a > 1.0 {
        log::warn!("low-energy model evaluated at |k| a = {:.3} > 1", k2.sqrt() * p.a);
    }
    let mass = 0.5 * p.omega - 3.0 * p.hop;
    let m0 = mass + 0.75 * p.hop * p.a * p.a * k2;
    let m1 = C64::new(1.0, -3f64.sqrt()) * C64::new(k[0], k[1]) * (3.0 * p.drive * p.a / 8.0);
    let mt2 = m0 * m0 + 9.0 * p.drive * p.drive * p.a * p.a * k2 / 16.0;
    Ok(LowEnergyModel { k, m0, m1, mt2, mass })
}

fn m0_over_mt2(kr: f64, p: &ModelParams) -> f64 {
    let k2 = kr * kr;
    let mass = 0.5 * p.omega - 3.0 * p.hop;
    let m0 = mass + 0.75 * p.hop * p.a * p.a * k2;
    m0 / (m0 * m0 + 9.0 * p.drive * p.drive * p.a * p.a * k2 / 16.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassCorrection {
    pub delta: f64,
    pub error: f64,
}

/// Correlation kernel folded onto the Brillouin zone,
/// `K(k) = (sigma^2 / 2 pi) sum_G exp(-sigma^2 |k + G|^2 / 2)`, evaluated either
/// as the reciprocal-lattice sum or, when shorter, as its Poisson dual
/// `(A_c / 4 pi^2) sum_R exp(-|R|^2 / 2 sigma^2) cos(k.R)`. For `sigma = 0`
/// it is the constant `A_c / 4 pi^2`.
pub fn folded_kernel(k: [f64; 2], sigma: f64, a: f64) -> f64 {
    let ac = cell_area(a);
    if sigma == 0.0 {
        return ac / (4.0 * PI * PI);
    }
    // exp(-x^2 / 2) < 1e-18 beyond x = 9.1
    let reach = 9.1;
    let g = reciprocal_vectors(a);
    let t = crate::lattice::primitive_vectors(a);
    let g_len = g[1][1].abs();
    let t_len = t[0][0].abs();
    let n_recip = (reach / sigma / g_len).ceil() as i64 + 1;
    let n_real = (reach * sigma / t_len).ceil() as i64 + 1;
    let mut sum = 0.0;
    if n_recip <= n_real {
        for i in -n_recip..=n_recip {
            for j in -n_recip..=n_recip {
                let x = k[0] + i as f64 * g[0][0] + j as f64 * g[1][0];
                let y = k[1] + i as f64 * g[0][1] + j as f64 * g[1][1];
                sum += (-sigma * sigma * (x * x + y * y) / 2.0).exp();
            }
        }
        sum * sigma * sigma / (2.0 * PI)
    } else {
        for i in -n_real..=n_real {
            for j in -n_real..=n_real {
                let x = i as f64 * t[0][0] + j as f64 * t[1][0];
                let y = i as f64 * t[0][1] + j as f64 * t[1][1];
                sum += (-(x * x + y * y) / (2.0 * sigma * sigma)).exp() * (k[0] * x + k[1] * y).cos();
            }
        }
        sum * ac / (4.0 * PI * PI)
    }
}

/// Disorder-induced mass shift `delta = -W^2 int_BZ d^2k K(k) M0 / Mt^2`, with
/// the zone-folded Gaussian kernel [`folded_kernel`]. Because the potential is
/// sampled on lattice sites, momenta differing by a reciprocal vector are
/// equivalent; folding makes `sigma -> 0` agree with the uncorrelated form
/// `-(A_c W^2 / 4 pi^2) int_BZ M0 / Mt^2`, and for `sigma >> a` it reduces to
/// `-(W^2 sigma^2 / 2 pi) int d^2k exp(-sigma^2 k^2 / 2) M0 / Mt^2`.
///
/// The hexagonal zone is integrated as twelve mirror-equivalent wedges in polar
/// coordinates.
pub fn mass_correction(p: &ModelParams, spec: &DisorderSpec, tol: f64) -> Result<MassCorrection> {
    spec.validate()?;
    if p.stagger != 0.0 {
        return Err(Error::InvalidParameter("mass correction derived for Lambda = 0 only".into()));
    }
    let mass = 0.5 * p.omega - 3.0 * p.hop;
    if mass <= 0.0 {
        return Err(Error::InvalidParameter(format!("mass omega/2 - 3A = {mass} must be positive")));
    }
    let w2 = spec.w * spec.w;
    let sigma = spec.effective_sigma();
    let rule = GaussLegendre::new(10);
    let apothem = 2.0 * PI / (3.0 * p.a);
    // wedge between the directions to an edge midpoint (along G2, the y axis)
    // and to a corner; k = u * apothem / cos(theta)
    let g = |th: f64, u: f64| {
        let kr = apothem / th.cos();
        let r = u * kr;
        let k = [r * th.sin(), r * th.cos()];
        vec![r * kr * m0_over_mt2(r, p) * folded_kernel(k, sigma, p.a)]
    };
    let r = adaptive_2d(&g, (0.0, PI / 6.0), (0.0, 1.0), &rule, 1e-14, tol)?;
    Ok(MassCorrection { delta: -12.0 * w2 * r.value[0], error: 12.0 * w2 * r.error })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum CriticalDisorder {
    Found { w_c: f64 },
    NoTransitionInRange { w_max: f64 },
}

/// Disorder strength where `M + delta(W) = 0` on the `A = B`, `Lambda = 0` line.
/// `delta` is exactly quadratic in `W`, so the root is `sqrt(M / |delta(W = 1)|)`.
pub fn born_critical_disorder(a: f64, sigma: f64, omega: f64, tol: f64) -> Result<CriticalDisorder> {
    let p = ModelParams::new(a, a, 0.0).with_omega(omega);
    let spec = DisorderSpec::with_sigma(1.0, sigma, 0);
    let d1 = mass_correction(&p, &spec, tol)?.delta;
    let mass = 0.5 * omega - 3.0 * a;
    let w_max = 0.5 * omega;
    if d1 >= 0.0 {
        return Ok(CriticalDisorder::NoTransitionInRange { w_max });
    }
    let w_c = (mass / -d1).sqrt();
    Ok(if w_c <= w_max { CriticalDisorder::Found { w_c } } else { CriticalDisorder::NoTransitionInRange { w_max } })
}

/// Parameters corrected by the shifts.
pub fn shifted_params(p: &ModelParams, e: &EffectiveParams) -> ModelParams {
    ModelParams {
        hop: p.hop + e.d_a,
        drive: p.drive + e.d_b,
        stagger: p.stagger + e.d_lambda,
        omega: p.omega + e.d_omega,
        ..*p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedScan {
    /// `(W, g-(1), f values at m = 1)` along the scan.
    pub samples: Vec<ShiftedSample>,
    /// First `W` where a boundary function crosses 0 or 1/2, refined by bisection.
    pub crossing: Option<(f64, Crossing)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedSample {
    #[serde(rename = "W")]
    pub w: f64,
    pub params: ModelParams,
    pub g_minus_1: f64,
    pub f: [f64; 4],
}

/// Boundary functions under the Born-corrected parameters for `W` in `[0, w_max]`.
pub fn born_shifted_boundaries(
    p: &ModelParams,
    coef: &EffectiveCoefficients,
    sigma: f64,
    w_max: f64,
    steps: usize,
) -> ShiftedScan {
    let at = |w: f64| shifted_params(p, &coef.at(w, sigma, p.a));
    let sample = |w: f64| {
        let q = at(w);
        ShiftedSample {
            w,
            params: q,
            g_minus_1: crate::phases::gamma_boundary_g(1, &q).1,
            f: crate::phases::dirac_boundary_f(1, &q).all(),
        }
    };
    let samples: Vec<ShiftedSample> = (0..=steps).map(|i| sample(w_max * i as f64 / steps as f64)).collect();
    let mut crossing = None;
    for pair in samples.windows(2) {
        let found = analytic_crossings(&pair[0].params, &pair[1].params);
        if let Some(&c) = found.first() {
            let (mut lo, mut hi) = (pair[0].w, pair[1].w);
            let base = at(lo);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if analytic_crossings(&base, &at(mid)).is_empty() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            crossing = Some((0.5 * (lo + hi), c));
            break;
        }
    }
    ShiftedScan { samples, crossing }
}
