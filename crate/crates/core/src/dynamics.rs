//! Time evolution on zigzag ribbons: one-period propagators, wave-packet
//! densities and an edge chirality metric.
//!
//! The propagator is a time-ordered product of short-step exponentials with
//! later times on the left. The default step is the fourth-order
//! commutator-free pair at the two Gauss points of each step; the plain
//! midpoint exponential `exp(-i H(t_s + dt/2) dt)` is kept as an option. A clean
//! ribbon is block diagonal in `kx`, so it is evolved one `2 * width` block at a
//! time; a disordered one uses the dense site-basis propagator.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::disorder::DisorderField;
use crate::error::{Error, Result};
use crate::lattice::{Boundary, LatticeSpec};
use crate::model::{build_ribbon_bloch, instantaneous_hamiltonian, instantaneous_ribbon_bloch, ModelParams};
use crate::spectrum::{exp_hermitian, quasienergy_spectrum, unitarity_defect};
use crate::{CMat, C64};

pub const DEFAULT_STEPS: usize = 128;
pub const MIN_STEPS: usize = 16;
pub const UNITARITY_TOL: f64 = 1e-10;

/// Rows within this many unit cells of the starting edge count as "near the edge".
pub const EDGE_ROWS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Second order, one exponential per step.
    Midpoint,
    /// Fourth order, two exponentials per step.
    #[default]
    CommutatorFree4,
}

fn step_product(
    h_at: &dyn Fn(f64) -> Result<CMat>,
    t0: f64,
    dt: f64,
    n_steps: usize,
    dim: usize,
    integrator: Integrator,
) -> Result<CMat> {
    let mut u = CMat::identity(dim, dim);
    let r = 3f64.sqrt() / 6.0;
    let (c1, c2) = (0.5 - r, 0.5 + r);
    let (a1, a2) = (0.25 + r, 0.25 - r);
    for s in 0..n_steps {
        let t = t0 + s as f64 * dt;
        match integrator {
            Integrator::Midpoint => {
                let h = h_at(t + 0.5 * dt)?;
                u = exp_hermitian(&h, dt) * &u;
            }
            Integrator::CommutatorFree4 => {
                let (h1, h2) = (h_at(t + c1 * dt)?, h_at(t + c2 * dt)?);
                let first = CMat::from_fn(dim, dim, |i, j| h1.read(i, j) * a1 + h2.read(i, j) * a2);
                let second = CMat::from_fn(dim, dim, |i, j| h1.read(i, j) * a2 + h2.read(i, j) * a1);
                u = exp_hermitian(&first, dt) * &u;
                u = exp_hermitian(&second, dt) * &u;
            }
        }
    }
    Ok(u)
}

fn check_steps(n_steps: usize) -> Result<()> {
    if n_steps < MIN_STEPS {
        return Err(Error::InvalidParameter(format!("n_steps must be >= {MIN_STEPS} (got {n_steps})")));
    }
    Ok(())
}

fn checked(u: CMat) -> Result<CMat> {
    let d = unitarity_defect(&u);
    if d > UNITARITY_TOL {
        return Err(Error::Unitarity(d));
    }
    Ok(u)
}

/// Segment propagators: step indices `0..n_steps` split into `segments` runs.
fn segment_propagators(
    h_at: &dyn Fn(f64) -> Result<CMat>,
    period: f64,
    n_steps: usize,
    segments: usize,
    dim: usize,
    integrator: Integrator,
) -> Result<Vec<CMat>> {
    let dt = period / n_steps as f64;
    let bounds: Vec<usize> = (0..=segments).map(|s| (s * n_steps + segments / 2) / segments).collect();
    bounds
        .windows(2)
        .map(|w| step_product(h_at, w[0] as f64 * dt, dt, w[1] - w[0], dim, integrator).and_then(checked))
        .collect()
}

/// One-period propagator in the site basis with the default integrator.
pub fn period_propagator(
    lat: &LatticeSpec,
    p: &ModelParams,
    v: Option<&DisorderField>,
    n_steps: usize,
) -> Result<CMat> {
    period_propagator_with(lat, p, v, n_steps, Integrator::default())
}

pub fn period_propagator_with(
    lat: &LatticeSpec,
    p: &ModelParams,
    v: Option<&DisorderField>,
    n_steps: usize,
    integrator: Integrator,
) -> Result<CMat> {
    check_steps(n_steps)?;
    p.validate()?;
    let h_at = |t: f64| instantaneous_hamiltonian(t, lat, p, v);
    let dt = p.period() / n_steps as f64;
    checked(step_product(&h_at, 0.0, dt, n_steps, lat.n_sites(), integrator)?)
}

/// One-period propagator of the ribbon block at longitudinal momentum `kx`.
pub fn ribbon_bloch_propagator(kx: f64, width: usize, p: &ModelParams, n_steps: usize) -> Result<CMat> {
    ribbon_bloch_propagator_with(kx, width, p, n_steps, Integrator::default())
}

pub fn ribbon_bloch_propagator_with(
    kx: f64,
    width: usize,
    p: &ModelParams,
    n_steps: usize,
    integrator: Integrator,
) -> Result<CMat> {
    check_steps(n_steps)?;
    p.validate()?;
    let h_at = |t: f64| instantaneous_ribbon_bloch(t, kx, width, p);
    let dt = p.period() / n_steps as f64;
    checked(step_product(&h_at, 0.0, dt, n_steps, 2 * width, integrator)?)
}

/// Allowed `kx = 2 pi n / Lx` of a ribbon with `nx` cells.
pub fn ribbon_momenta(lat: &LatticeSpec) -> Vec<f64> {
    (0..lat.nx).map(|n| 2.0 * PI * n as f64 / lat.lx()).collect()
}

/// Quasienergies `-arg(lambda) / T` folded into `[-omega/2, omega/2)`.
pub fn eigenphase_quasienergies(u: &CMat, p: &ModelParams) -> Result<Vec<f64>> {
    let ev = u.eigenvalues::<C64>();
    let mut out: Vec<f64> = ev.iter().map(|z| fold(-z.arg() / p.period(), p.omega)).collect();
    out.sort_by(|a, b| a.total_cmp(b));
    Ok(out)
}

fn fold(e: f64, omega: f64) -> f64 {
    (e + 0.5 * omega).rem_euclid(omega) - 0.5 * omega
}

fn circular_distance(a: f64, b: f64, omega: f64) -> f64 {
    let d = (a - b).rem_euclid(omega);
    d.min(omega - d)
}

/// Largest mismatch, in units of `omega`, between the eigenphases of the ribbon
/// propagator at `kx` and the folded central quasienergies of the truncated
/// operator at `-kx`. The truncated operator's harmonics carry
/// `exp(+i m omega t)`, which reverses the sign of `kx` relative to the forward
/// propagator.
pub fn floquet_consistency(kx: f64, width: usize, p: &ModelParams, m_max: usize, n_steps: usize) -> Result<f64> {
    let u = ribbon_bloch_propagator(kx, width, p, n_steps)?;
    let from_u = eigenphase_quasienergies(&u, p)?;
    let lat = LatticeSpec::ribbon(1, width, p.a)?;
    let op = build_ribbon_bloch(-kx, &lat, p, m_max)?;
    let spec = quasienergy_spectrum(&op)?;
    let half = 0.5 * p.omega;
    let central: Vec<f64> = spec.values.iter().copied().filter(|e| *e >= -half && *e < half).collect();
    let nearest =
        |x: f64, set: &[f64]| set.iter().map(|y| circular_distance(x, *y, p.omega)).fold(f64::INFINITY, f64::min);
    let mut worst: f64 = 0.0;
    for &e in &from_u {
        worst = worst.max(nearest(e, &central));
    }
    for &e in &central {
        worst = worst.max(nearest(e, &from_u));
    }
    Ok(worst / p.omega)
}

/// Site-resolved densities recorded during an evolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityHistory {
    pub lattice: LatticeSpec,
    pub period: f64,
    pub times: Vec<f64>,
    /// `rho[frame][site]`.
    pub rho: Vec<Vec<f64>>,
    pub initial_site: usize,
    /// Sites of the edge chain the packet starts on.
    pub edge_sites: Vec<usize>,
    /// Row index of that edge chain.
    pub edge_row: usize,
}

impl DensityHistory {
    pub fn n_frames(&self) -> usize {
        self.times.len()
    }

    pub fn norm(&self, frame: usize) -> f64 {
        self.rho[frame].iter().sum()
    }

    /// Frames at integer multiples of the period.
    pub fn stroboscopic_frames(&self) -> Vec<usize> {
        (0..self.n_frames())
            .filter(|&f| {
                let r = self.times[f] / self.period;
                (r - r.round()).abs() < 1e-9
            })
            .collect()
    }

    /// `(x, rho)` for every edge-chain site.
    pub fn rho_edge(&self, frame: usize) -> Vec<(f64, f64)> {
        self.edge_sites.iter().map(|&s| (self.lattice.site(s).pos[0], self.rho[frame][s])).collect()
    }

    /// `sum_y rho(x, y)` on the grid of site columns (spacing `sqrt(3) a / 2`).
    pub fn rho_total(&self, frame: usize) -> Vec<(f64, f64)> {
        let dx = 3f64.sqrt() * self.lattice.a / 2.0;
        let ncol = 2 * self.lattice.nx;
        let mut cols = vec![0.0; ncol];
        for (s, r) in self.rho[frame].iter().enumerate() {
            let x = self.lattice.site(s).pos[0];
            let c = ((x / dx).round() as usize) % ncol;
            cols[c] += r;
        }
        cols.into_iter().enumerate().map(|(c, r)| (c as f64 * dx, r)).collect()
    }

    /// Fraction of the density within [`EDGE_ROWS`] unit cells of the starting edge.
    pub fn edge_weight(&self, frame: usize) -> f64 {
        let near = |row: usize| row.abs_diff(self.edge_row) < EDGE_ROWS;
        self.rho[frame].iter().enumerate().filter(|(s, _)| near(self.lattice.site(*s).cell.1)).map(|(_, r)| r).sum()
    }

    /// Edge-chain sites as `(d, rho)`, with `d` the minimum-image x offset from the starting site.
    fn edge_offsets(&self, frame: usize) -> Vec<(f64, f64)> {
        let x0 = self.lattice.site(self.initial_site).pos[0];
        let lx = self.lattice.lx();
        self.rho_edge(frame)
            .into_iter()
            .map(|(x, r)| {
                let d = x - x0;
                (d - lx * (d / lx).round(), r)
            })
            .collect()
    }

    /// Centre of mass of the edge density relative to the starting site, or
    /// `None` if the edge chain carries no weight.
    pub fn edge_center(&self, frame: usize) -> Option<f64> {
        let (mut m, mut w) = (0.0, 0.0);
        for (d, r) in self.edge_offsets(frame) {
            m += d * r;
            w += r;
        }
        (w > 1e-14).then(|| m / w)
    }

    /// Fraction of the edge density farther than `0.4 Lx` from the starting
    /// site; a sizeable value means the packet has wrapped around the ring.
    pub fn far_edge_fraction(&self, frame: usize) -> f64 {
        let lim = 0.4 * self.lattice.lx();
        let (mut far, mut w) = (0.0, 0.0);
        for (d, r) in self.edge_offsets(frame) {
            if d.abs() > lim {
                far += r;
            }
            w += r;
        }
        if w > 0.0 {
            far / w
        } else {
            0.0
        }
    }
}

fn check_ribbon(lat: &LatticeSpec, initial_site: usize) -> Result<()> {
    if lat.boundary != Boundary::RibbonZigzag {
        return Err(Error::LatticeMismatch("wave-packet evolution needs a ribbon lattice".into()));
    }
    if initial_site >= lat.n_sites() {
        return Err(Error::InvalidParameter(format!(
            "initial site {initial_site} outside a lattice of {} sites",
            lat.n_sites()
        )));
    }
    Ok(())
}

/// Red site of the top edge chain at cell `i`, the usual starting point.
pub fn top_edge_red_site(lat: &LatticeSpec, i: usize) -> usize {
    lat.site_index(i % lat.nx, lat.ny - 1, crate::lattice::Sublattice::Red)
}

/// Stroboscopic evolution of a packet starting on `initial_site`.
pub fn evolve_wavepacket(
    initial_site: usize,
    n_periods: usize,
    lat: &LatticeSpec,
    p: &ModelParams,
    v: Option<&DisorderField>,
    n_steps: usize,
) -> Result<DensityHistory> {
    evolve_wavepacket_with(initial_site, n_periods, lat, p, v, n_steps, 1)
}

/// As [`evolve_wavepacket`], recording `snapshots` equally spaced frames per period.
pub fn evolve_wavepacket_with(
    initial_site: usize,
    n_periods: usize,
    lat: &LatticeSpec,
    p: &ModelParams,
    v: Option<&DisorderField>,
    n_steps: usize,
    snapshots: usize,
) -> Result<DensityHistory> {
    check_ribbon(lat, initial_site)?;
    check_steps(n_steps)?;
    p.validate()?;
    if snapshots == 0 || snapshots > n_steps {
        return Err(Error::InvalidParameter(format!("snapshots per period must lie in 1..={n_steps}")));
    }
    let period = p.period();
    let mut times = Vec::with_capacity(n_periods * snapshots + 1);
    for n in 0..n_periods {
        for s in 0..snapshots {
            let step = (s * n_steps + snapshots / 2) / snapshots;
            times.push(period * (n as f64 + step as f64 / n_steps as f64));
        }
    }
    times.push(period * n_periods as f64);
    let rho = match v {
        None => evolve_bloch(initial_site, n_periods, lat, p, n_steps, snapshots)?,
        Some(field) => evolve_dense(initial_site, n_periods, lat, p, field, n_steps, snapshots)?,
    };
    let edge_row = lat.site(initial_site).cell.1;
    let edge_sites = (0..lat.nx)
        .flat_map(|i| {
            [
                lat.site_index(i, edge_row, crate::lattice::Sublattice::Blue),
                lat.site_index(i, edge_row, crate::lattice::Sublattice::Red),
            ]
        })
        .collect();
    Ok(DensityHistory { lattice: *lat, period, times, rho, initial_site, edge_sites, edge_row })
}

fn apply(u: &CMat, psi: &[C64]) -> Vec<C64> {
    let n = u.nrows();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        let x = psi[j];
        if x.norm_sqr() == 0.0 {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += u.read(i, j) * x;
        }
    }
    out
}

fn evolve_dense(
    initial_site: usize,
    n_periods: usize,
    lat: &LatticeSpec,
    p: &ModelParams,
    v: &DisorderField,
    n_steps: usize,
    snapshots: usize,
) -> Result<Vec<Vec<f64>>> {
    let h_at = |t: f64| instantaneous_hamiltonian(t, lat, p, Some(v));
    let segs = segment_propagators(&h_at, p.period(), n_steps, snapshots, lat.n_sites(), Integrator::default())?;
    let mut psi = vec![C64::new(0.0, 0.0); lat.n_sites()];
    psi[initial_site] = C64::new(1.0, 0.0);
    let mut frames = vec![psi.iter().map(|z| z.norm_sqr()).collect::<Vec<f64>>()];
    for _ in 0..n_periods {
        for u in &segs {
            psi = apply(u, &psi);
            frames.push(psi.iter().map(|z| z.norm_sqr()).collect());
        }
    }
    Ok(frames)
}

fn evolve_bloch(
    initial_site: usize,
    n_periods: usize,
    lat: &LatticeSpec,
    p: &ModelParams,
    n_steps: usize,
    snapshots: usize,
) -> Result<Vec<Vec<f64>>> {
    let width = lat.ny;
    let norb = 2 * width;
    let ks = ribbon_momenta(lat);
    let nk = ks.len();
    let segs: Vec<Vec<CMat>> = ks
        .iter()
        .map(|&kx| {
            let h_at = |t: f64| instantaneous_ribbon_bloch(t, kx, width, p);
            segment_propagators(&h_at, p.period(), n_steps, snapshots, norb, Integrator::default())
        })
        .collect::<Result<_>>()?;
    // strip orbital of site (i, j, sub) is 2 j + sub; its x coordinate fixes the Bloch phase
    let xs: Vec<f64> = (0..lat.n_sites()).map(|s| lat.site(s).pos[0]).collect();
    let o0 = initial_site % 2 + 2 * lat.site(initial_site).cell.1;
    let norm = 1.0 / (nk as f64).sqrt();
    let mut phi: Vec<Vec<C64>> = ks
        .iter()
        .map(|&k| {
            let mut v = vec![C64::new(0.0, 0.0); norb];
            v[o0] = C64::from_polar(norm, -k * xs[initial_site]);
            v
        })
        .collect();
    let density = |phi: &[Vec<C64>]| -> Vec<f64> {
        let mut rho = vec![0.0; lat.n_sites()];
        for (s, r) in rho.iter_mut().enumerate() {
            let j = lat.site(s).cell.1;
            let o = s % 2 + 2 * j;
            let mut amp = C64::new(0.0, 0.0);
            for (ik, &k) in ks.iter().enumerate() {
                amp += C64::from_polar(norm, k * xs[s]) * phi[ik][o];
            }
            *r = amp.norm_sqr();
        }
        rho
    };
    let mut frames = vec![density(&phi)];
    for _ in 0..n_periods {
        for s in 0..snapshots {
            for (ik, f) in phi.iter_mut().enumerate() {
                *f = apply(&segs[ik][s], f);
            }
            frames.push(density(&phi));
        }
    }
    Ok(frames)
}

/// Least-squares drift of the edge centre of mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chirality {
    /// Slope in units of `a` per period; its sign is the chirality.
    pub metric: f64,
    /// Set when every frame has the same centre of mass (or no edge weight).
    pub degenerate: bool,
    pub frames: usize,
    /// Largest [`DensityHistory::far_edge_fraction`] over the fitted frames.
    pub wrapped: f64,
}

pub fn chirality_metric(h: &DensityHistory) -> Result<Chirality> {
    let frames = h.stroboscopic_frames();
    if frames.len() < 10 {
        return Err(Error::InvalidParameter(format!(
            "chirality fit needs >= 10 stroboscopic frames (got {})",
            frames.len()
        )));
    }
    let wrapped = frames.iter().map(|&f| h.far_edge_fraction(f)).fold(0.0f64, f64::max);
    let mut xs = Vec::with_capacity(frames.len());
    for &f in &frames {
        match h.edge_center(f) {
            Some(x) => xs.push(x),
            None => return Ok(Chirality { metric: 0.0, degenerate: true, frames: frames.len(), wrapped }),
        }
    }
    let ts: Vec<f64> = frames.iter().map(|&f| h.times[f] / h.period).collect();
    let n = xs.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let xm = xs.iter().sum::<f64>() / n;
    let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    let sxy: f64 = ts.iter().zip(&xs).map(|(t, x)| (t - tm) * (x - xm)).sum();
    let spread = xs.iter().fold(0.0f64, |m, x| m.max((x - xm).abs()));
    if spread < 1e-12 * h.lattice.a {
        return Ok(Chirality { metric: 0.0, degenerate: true, frames: frames.len(), wrapped });
    }
    if wrapped > 0.01 {
        log::warn!("edge density reached the far side of the ring ({wrapped:.3}); the drift fit is unreliable");
    }
    Ok(Chirality { metric: sxy / sxx / h.lattice.a, degenerate: false, frames: frames.len(), wrapped })
}
