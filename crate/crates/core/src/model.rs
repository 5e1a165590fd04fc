//! Drive parameters and assembly of the truncated extended-Floquet operator.
//!
//! The bond along direction `lambda` carries `J_lambda(t) = A + B cos(omega t - phi_lambda)`
//! and enters the Hamiltonian as `-J_lambda(t)`. Its Fourier components give
//! the block structure
//!
//! ```text
//! H_mm      = m omega + Lambda sigma_z + V - A T
//! H_{m,m-1} = -(B/2) sum_lambda exp(+i phi_lambda) T_lambda
//! H_{m-1,m} = H_{m,m-1}^dagger
//! ```
//!
//! where `T_lambda` is the hopping operator of the `lambda` bonds. Blocks are
//! indexed by `m in [-m_max, m_max]` and the global basis index is
//! `(m + m_max) * n_orb + orbital`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::disorder::DisorderField;
use crate::error::{Error, Result};
use crate::lattice::{nn_vectors, Boundary, LatticeSpec, Sublattice};
use crate::{CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Mean hopping `A`.
    #[serde(rename = "A")]
    pub hop: f64,
    /// Drive amplitude `B`.
    #[serde(rename = "B")]
    pub drive: f64,
    /// Staggered potential `Lambda` (`+Lambda` on blue sites).
    #[serde(rename = "Lambda")]
    pub stagger: f64,
    pub omega: f64,
    /// Nearest-neighbour distance.
    pub a: f64,
    /// Drive phases, `2 pi lambda / 3` by default.
    pub phi: [f64; 3],
}

pub fn default_phases() -> [f64; 3] {
    [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0]
}

impl ModelParams {
    /// Parameters in units `omega = 1`, `a = 1`.
    pub fn new(hop: f64, drive: f64, stagger: f64) -> Self {
        ModelParams { hop, drive, stagger, omega: 1.0, a: 1.0, phi: default_phases() }
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega must be > 0 (got {})", self.omega)));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidParameter(format!("a must be > 0 (got {})", self.a)));
        }
        if self.hop < 0.0 || self.drive < 0.0 || self.stagger < 0.0 {
            log::warn!(
                "negative model parameter (A={}, B={}, Lambda={}); accepted",
                self.hop,
                self.drive,
                self.stagger
            );
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }
}

/// `J_lambda(t) = A + B cos(omega t - phi_lambda)`.
pub fn hopping_amplitude(t: f64, lambda: usize, p: &ModelParams) -> f64 {
    p.hop + p.drive * (p.omega * t - p.phi[lambda]).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Basis {
    /// Bloch basis `(blue, red)` at crystal momentum `k`.
    Momentum { k: [f64; 2] },
    /// One orbital per lattice site.
    Sites { n_sites: usize },
    /// Zigzag ribbon at longitudinal momentum `kx`, `2 * width` orbitals.
    Ribbon { kx: f64, width: usize },
}

/// Truncated extended-Floquet operator.
#[derive(Debug, Clone)]
pub struct FloquetOperator {
    m_max: usize,
    omega: f64,
    basis: Basis,
    sigma_z: Vec<f64>,
    matrix: CMat,
}

impl FloquetOperator {
    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn n_sectors(&self) -> usize {
        2 * self.m_max + 1
    }

    /// Orbitals per Floquet sector.
    pub fn n_orb(&self) -> usize {
        self.sigma_z.len()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn index(&self, m: i64, orbital: usize) -> usize {
        (m + self.m_max as i64) as usize * self.n_orb() + orbital
    }

    /// `sigma_z` of every basis vector of the full operator.
    pub fn sigma_z_diagonal(&self) -> Vec<f64> {
        (0..self.n_sectors()).flat_map(|_| self.sigma_z.iter().copied()).collect()
    }

    /// Copy of block `H_mn`.
    pub fn block(&self, m: i64, n: i64) -> CMat {
        let no = self.n_orb();
        let (r0, c0) = (self.index(m, 0), self.index(n, 0));
        CMat::from_fn(no, no, |i, j| self.matrix.read(r0 + i, c0 + j))
    }

    /// `max |H_{m+1,n+1} - H_mn - omega delta_mn|` over all admissible blocks.
    pub fn ladder_defect(&self) -> f64 {
        let mm = self.m_max as i64;
        let no = self.n_orb();
        let mut worst: f64 = 0.0;
        for m in -mm..mm {
            for n in -mm..mm {
                for i in 0..no {
                    for j in 0..no {
                        let lo = self.matrix.read(self.index(m, i), self.index(n, j));
                        let hi = self.matrix.read(self.index(m + 1, i), self.index(n + 1, j));
                        let shift = if m == n && i == j { self.omega } else { 0.0 };
                        worst = worst.max((hi - lo - C64::new(shift, 0.0)).norm());
                    }
                }
            }
        }
        worst
    }

    /// Largest entry outside the `|m - n| <= 1` band.
    pub fn far_block_norm(&self) -> f64 {
        let mm = self.m_max as i64;
        let no = self.n_orb();
        let mut worst: f64 = 0.0;
        for m in -mm..=mm {
            for n in -mm..=mm {
                if (m - n).abs() <= 1 {
                    continue;
                }
                for i in 0..no {
                    for j in 0..no {
                        worst = worst.max(self.matrix.read(self.index(m, i), self.index(n, j)).norm());
                    }
                }
            }
        }
        worst
    }
}

/// One directed hopping matrix element `row <- col` along bond direction `lambda`,
/// with its Bloch phase (1 in real space).
#[derive(Debug, Clone, Copy)]
struct Hop {
    row: usize,
    col: usize,
    lambda: usize,
    phase: C64,
}

fn assemble(
    p: &ModelParams,
    m_max: usize,
    onsite: &[f64],
    sigma_z: Vec<f64>,
    hops: &[Hop],
    basis: Basis,
) -> FloquetOperator {
    let no = onsite.len();
    let ns = 2 * m_max + 1;
    let mut h = CMat::zeros(no * ns, no * ns);
    let mm = m_max as i64;
    let idx = |m: i64, o: usize| (m + mm) as usize * no + o;
    let drive: Vec<C64> = (0..3).map(|l| C64::from_polar(-0.5 * p.drive, p.phi[l])).collect();
    for m in -mm..=mm {
        for (o, &e) in onsite.iter().enumerate() {
            let d = idx(m, o);
            h.write(d, d, C64::new(m as f64 * p.omega + e, 0.0));
        }
        for hop in hops {
            let (r, c) = (idx(m, hop.row), idx(m, hop.col));
            let v = h.read(r, c) - hop.phase * p.hop;
            h.write(r, c, v);
            if m > -mm {
                let (r, c) = (idx(m, hop.row), idx(m - 1, hop.col));
                let v = drive[hop.lambda] * hop.phase;
                h.write(r, c, h.read(r, c) + v);
                h.write(c, r, h.read(c, r) + v.conj());
            }
        }
    }
    FloquetOperator { m_max, omega: p.omega, basis, sigma_z, matrix: h }
}

fn check_m_max(m_max: usize) -> Result<()> {
    if m_max < 1 {
        return Err(Error::Truncation(m_max));
    }
    Ok(())
}

fn dot(k: [f64; 2], v: [f64; 2]) -> f64 {
    k[0] * v[0] + k[1] * v[1]
}

/// Bloch-basis hops `(blue <- red)` with phase `exp(-i k.a_lambda)` and the reverse.
fn bloch_hops(k: [f64; 2], a: f64) -> Vec<Hop> {
    let nn = nn_vectors(a);
    let mut hops = Vec::with_capacity(6);
    for (lambda, av) in nn.iter().enumerate() {
        let ph = C64::from_polar(1.0, -dot(k, *av));
        hops.push(Hop { row: 0, col: 1, lambda, phase: ph });
        hops.push(Hop { row: 1, col: 0, lambda, phase: ph.conj() });
    }
    hops
}

/// Momentum-space operator of dimension `2 (2 m_max + 1)`.
pub fn build_bloch_blocks(k: [f64; 2], p: &ModelParams, m_max: usize) -> Result<FloquetOperator> {
    check_m_max(m_max)?;
    p.validate()?;
    let onsite = [p.stagger, -p.stagger];
    Ok(assemble(p, m_max, &onsite, vec![1.0, -1.0], &bloch_hops(k, p.a), Basis::Momentum { k }))
}

fn site_hops(lat: &LatticeSpec) -> Vec<Hop> {
    let mut hops = Vec::with_capacity(6 * lat.n_cells());
    for b in lat.bonds() {
        let one = C64::new(1.0, 0.0);
        hops.push(Hop { row: b.blue, col: b.red, lambda: b.lambda, phase: one });
        hops.push(Hop { row: b.red, col: b.blue, lambda: b.lambda, phase: one });
    }
    hops
}

fn site_onsite(lat: &LatticeSpec, p: &ModelParams, v: Option<&DisorderField>) -> Result<Vec<f64>> {
    let mut onsite: Vec<f64> = lat.sublattices().iter().map(|s| s.sigma_z() * p.stagger).collect();
    if let Some(field) = v {
        if field.values.len() != lat.n_sites() {
            return Err(Error::LatticeMismatch(format!(
                "disorder field has {} values, lattice has {} sites",
                field.values.len(),
                lat.n_sites()
            )));
        }
        for (o, x) in onsite.iter_mut().zip(&field.values) {
            *o += x;
        }
    }
    Ok(onsite)
}

/// Real-space operator of dimension `2 Nx Ny (2 m_max + 1)`; disorder enters every
/// diagonal Floquet block identically.
pub fn build_realspace_floquet(
    lat: &LatticeSpec,
    p: &ModelParams,
    v: Option<&DisorderField>,
    m_max: usize,
) -> Result<FloquetOperator> {
    check_m_max(m_max)?;
    p.validate()?;
    let onsite = site_onsite(lat, p, v)?;
    let sz = lat.sublattices().iter().map(|s| s.sigma_z()).collect();
    Ok(assemble(p, m_max, &onsite, sz, &site_hops(lat), Basis::Sites { n_sites: lat.n_sites() }))
}

fn ribbon_hops(kx: f64, width: usize, a: f64) -> Result<(LatticeSpec, Vec<Hop>)> {
    let strip = LatticeSpec::ribbon(1, width, a)?;
    let nn = nn_vectors(a);
    let mut hops = Vec::with_capacity(6 * width);
    for b in strip.bonds() {
        let ph = C64::from_polar(1.0, -kx * nn[b.lambda][0]);
        hops.push(Hop { row: b.blue, col: b.red, lambda: b.lambda, phase: ph });
        hops.push(Hop { row: b.red, col: b.blue, lambda: b.lambda, phase: ph.conj() });
    }
    Ok((strip, hops))
}

/// Zigzag-ribbon operator at longitudinal momentum `kx`; only `lat.ny` (the width) is used.
pub fn build_ribbon_bloch(kx: f64, lat: &LatticeSpec, p: &ModelParams, m_max: usize) -> Result<FloquetOperator> {
    check_m_max(m_max)?;
    p.validate()?;
    if lat.boundary != Boundary::RibbonZigzag {
        return Err(Error::LatticeMismatch("ribbon operator needs a ribbon lattice".into()));
    }
    let (strip, hops) = ribbon_hops(kx, lat.ny, lat.a)?;
    let onsite: Vec<f64> = strip.sublattices().iter().map(|s| s.sigma_z() * p.stagger).collect();
    let sz = strip.sublattices().into_iter().map(Sublattice::sigma_z).collect();
    Ok(assemble(p, m_max, &onsite, sz, &hops, Basis::Ribbon { kx, width: lat.ny }))
}

/// Real-space `H(t)`: bonds carry `-J_lambda(t)`, sites `Lambda sigma_z + V_i`.
pub fn instantaneous_hamiltonian(
    t: f64,
    lat: &LatticeSpec,
    p: &ModelParams,
    v: Option<&DisorderField>,
) -> Result<CMat> {
    let onsite = site_onsite(lat, p, v)?;
    let n = lat.n_sites();
    let mut h = CMat::zeros(n, n);
    for (i, e) in onsite.iter().enumerate() {
        h.write(i, i, C64::new(*e, 0.0));
    }
    let j: Vec<f64> = (0..3).map(|l| hopping_amplitude(t, l, p)).collect();
    for b in lat.bonds() {
        let amp = C64::new(-j[b.lambda], 0.0);
        h.write(b.blue, b.red, h.read(b.blue, b.red) + amp);
        h.write(b.red, b.blue, h.read(b.red, b.blue) + amp);
    }
    Ok(h)
}

/// Ribbon Bloch Hamiltonian `H(t; kx)` of dimension `2 * width`.
pub fn instantaneous_ribbon_bloch(t: f64, kx: f64, width: usize, p: &ModelParams) -> Result<CMat> {
    let (strip, hops) = ribbon_hops(kx, width, p.a)?;
    let n = strip.n_sites();
    let mut h = CMat::zeros(n, n);
    for (i, s) in strip.sublattices().iter().enumerate() {
        h.write(i, i, C64::new(s.sigma_z() * p.stagger, 0.0));
    }
    let j: Vec<f64> = (0..3).map(|l| hopping_amplitude(t, l, p)).collect();
    for hop in hops {
        let v = h.read(hop.row, hop.col) - hop.phase * j[hop.lambda];
        h.write(hop.row, hop.col, v);
    }
    Ok(h)
}

/// Static Bloch Hamiltonian `-A sum f_lambda(k) + Lambda sigma_z` (the `H_00` block).
pub fn static_bloch(k: [f64; 2], p: &ModelParams) -> [[C64; 2]; 2] {
    let mut off = C64::new(0.0, 0.0);
    for av in nn_vectors(p.a) {
        off += C64::from_polar(1.0, -dot(k, av));
    }
    off *= -p.hop;
    [[C64::new(p.stagger, 0.0), off], [off.conj(), C64::new(-p.stagger, 0.0)]]
}
