//! Honeycomb geometry with zigzag chains running along `x`.
//!
//! Unit cell `(i, j)`: a blue site at `R = (sqrt(3) a (i + j/2), 3a j / 2)` and
//! a red site at `R + (sqrt(3) a / 2, a / 2)`. Each row `j` is one complete
//! zigzag chain, so a ribbon that is open along `y` terminates on a
//! blue-only chain at the bottom and a red-only chain at the top.
//!
//! On the torus the rows are identified with a half-cell shift,
//! `(i, j + Ny) ~ (i + Ny/2, j)`, which makes the sample a rectangle of size
//! `Lx = sqrt(3) a Nx` by `Ly = 3 a Ny / 2`. `Ny` must therefore be even.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sublattice {
    /// `sigma_z = +1`, orbital index 0.
    Blue,
    /// `sigma_z = -1`, orbital index 1.
    Red,
}

impl Sublattice {
    pub fn sigma_z(self) -> f64 {
        match self {
            Sublattice::Blue => 1.0,
            Sublattice::Red => -1.0,
        }
    }

    pub fn orbital(self) -> usize {
        match self {
            Sublattice::Blue => 0,
            Sublattice::Red => 1,
        }
    }

    pub fn from_orbital(o: usize) -> Self {
        if o.is_multiple_of(2) {
            Sublattice::Blue
        } else {
            Sublattice::Red
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Torus,
    RibbonZigzag,
}

/// Nearest-neighbour bond types: vector `a_lambda` from a red site to its
/// blue neighbour, and the cell offset `(di, dj)` of that blue site.
const BONDS: [([f64; 2], (i64, i64)); 3] =
    [([0.0, 1.0], (0, 1)), ([-SQRT3 / 2.0, -0.5], (0, 0)), ([SQRT3 / 2.0, -0.5], (1, 0))];

/// The three nearest-neighbour vectors `a_lambda` (red to blue), `|a_lambda| = a`.
pub fn nn_vectors(a: f64) -> [[f64; 2]; 3] {
    let mut out = [[0.0; 2]; 3];
    for (o, (v, _)) in out.iter_mut().zip(BONDS.iter()) {
        *o = [v[0] * a, v[1] * a];
    }
    out
}

/// Next-nearest-neighbour vectors `b_lambda = a_lambda - a_{lambda+1}`.
pub fn nnn_vectors(a: f64) -> [[f64; 2]; 3] {
    let nn = nn_vectors(a);
    let mut out = [[0.0; 2]; 3];
    for l in 0..3 {
        let n = (l + 1) % 3;
        out[l] = [nn[l][0] - nn[n][0], nn[l][1] - nn[n][1]];
    }
    out
}

/// Primitive translations `t1 = (sqrt(3) a, 0)`, `t2 = (sqrt(3) a / 2, 3a/2)`.
pub fn primitive_vectors(a: f64) -> [[f64; 2]; 2] {
    [[SQRT3 * a, 0.0], [SQRT3 * a / 2.0, 1.5 * a]]
}

/// Reciprocal vectors with `G_i . t_j = 2 pi delta_ij`.
pub fn reciprocal_vectors(a: f64) -> [[f64; 2]; 2] {
    let [t1, t2] = primitive_vectors(a);
    let det = t1[0] * t2[1] - t1[1] * t2[0];
    let s = 2.0 * std::f64::consts::PI / det;
    [[s * t2[1], -s * t2[0]], [-s * t1[1], s * t1[0]]]
}

/// Position of each orbital inside the unit cell, indexed by orbital.
pub fn orbital_offsets(a: f64) -> [[f64; 2]; 2] {
    [[0.0, 0.0], [SQRT3 * a / 2.0, 0.5 * a]]
}

/// Unit-cell area `3 sqrt(3) a^2 / 2`.
pub fn cell_area(a: f64) -> f64 {
    1.5 * SQRT3 * a * a
}

/// Dirac point `K` (a zero of `sum_lambda exp(i k . a_lambda)`).
pub fn dirac_k(a: f64) -> [f64; 2] {
    [4.0 * std::f64::consts::PI / (3.0 * SQRT3 * a), 0.0]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Site {
    pub cell: (usize, usize),
    pub sub: Sublattice,
    pub pos: [f64; 2],
}

/// A nearest-neighbour bond; `a_lambda` points from `red` to `blue`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub red: usize,
    pub blue: usize,
    pub lambda: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub nx: usize,
    pub ny: usize,
    pub boundary: Boundary,
    pub a: f64,
}

impl LatticeSpec {
    pub fn torus(nx: usize, ny: usize, a: f64) -> Result<Self> {
        if nx == 0 || ny < 2 || !ny.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("torus needs nx >= 1 and an even ny >= 2 (got {nx} x {ny})")));
        }
        check_a(a)?;
        Ok(LatticeSpec { nx, ny, boundary: Boundary::Torus, a })
    }

    pub fn ribbon(nx: usize, ny: usize, a: f64) -> Result<Self> {
        if nx == 0 || ny < 2 {
            return Err(Error::InvalidParameter(format!("ribbon needs nx >= 1 and width ny >= 2 (got {nx} x {ny})")));
        }
        check_a(a)?;
        Ok(LatticeSpec { nx, ny, boundary: Boundary::RibbonZigzag, a })
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_sites(&self) -> usize {
        2 * self.n_cells()
    }

    pub fn lx(&self) -> f64 {
        SQRT3 * self.a * self.nx as f64
    }

    pub fn ly(&self) -> f64 {
        1.5 * self.a * self.ny as f64
    }

    pub fn site_index(&self, i: usize, j: usize, sub: Sublattice) -> usize {
        2 * (j * self.nx + i) + sub.orbital()
    }

    pub fn site(&self, idx: usize) -> Site {
        let cell = idx / 2;
        let (i, j) = (cell % self.nx, cell / self.nx);
        let sub = Sublattice::from_orbital(idx);
        let off = orbital_offsets(self.a)[sub.orbital()];
        let x = SQRT3 * self.a * (i as f64 + 0.5 * j as f64) + off[0];
        let y = 1.5 * self.a * j as f64 + off[1];
        Site { cell: (i, j), sub, pos: [x.rem_euclid(self.lx()), y] }
    }

    pub fn sites(&self) -> Vec<Site> {
        (0..self.n_sites()).map(|s| self.site(s)).collect()
    }

    pub fn sublattices(&self) -> Vec<Sublattice> {
        (0..self.n_sites()).map(Sublattice::from_orbital).collect()
    }

    /// Wrap cell coordinates; `None` if the cell lies outside an open ribbon.
    fn wrap_cell(&self, i: i64, j: i64) -> Option<(usize, usize)> {
        let (nx, ny) = (self.nx as i64, self.ny as i64);
        let (mut i, mut j) = (i, j);
        match self.boundary {
            Boundary::Torus => {
                let shift = j.div_euclid(ny);
                j -= shift * ny;
                i += shift * ny / 2;
            }
            Boundary::RibbonZigzag => {
                if j < 0 || j >= ny {
                    return None;
                }
            }
        }
        Some((i.rem_euclid(nx) as usize, j as usize))
    }

    /// All nearest-neighbour bonds, one entry per bond.
    pub fn bonds(&self) -> Vec<Bond> {
        let mut out = Vec::with_capacity(3 * self.n_cells());
        for j in 0..self.ny {
            for i in 0..self.nx {
                let red = self.site_index(i, j, Sublattice::Red);
                for (lambda, (_, (di, dj))) in BONDS.iter().enumerate() {
                    if let Some((bi, bj)) = self.wrap_cell(i as i64 + di, j as i64 + dj) {
                        let blue = self.site_index(bi, bj, Sublattice::Blue);
                        out.push(Bond { red, blue, lambda });
                    }
                }
            }
        }
        out
    }

    /// Minimum-image displacement `r_to - r_from` (x always periodic, y only on the torus).
    pub fn displacement(&self, from: [f64; 2], to: [f64; 2]) -> [f64; 2] {
        let mut dx = to[0] - from[0];
        let lx = self.lx();
        dx -= lx * (dx / lx).round();
        let mut dy = to[1] - from[1];
        if self.boundary == Boundary::Torus {
            let ly = self.ly();
            dy -= ly * (dy / ly).round();
        }
        [dx, dy]
    }

    /// Rows of the top (red-terminated) zigzag edge chain.
    pub fn top_edge_sites(&self) -> Vec<usize> {
        let j = self.ny - 1;
        (0..self.nx)
            .flat_map(|i| [self.site_index(i, j, Sublattice::Blue), self.site_index(i, j, Sublattice::Red)])
            .collect()
    }
}

fn check_a(a: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("lattice constant must be > 0 (got {a})")));
    }
    Ok(())
}
