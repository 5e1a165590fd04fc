//! Dense Hermitian eigensolver wrapper with a reproducible eigenvector gauge.

use faer::Side;
use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::FloquetOperator;
use crate::{CMat, C64};

/// Maximum asymmetry accepted by [`quasienergy_spectrum`].
pub const HERMITIAN_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: CMat,
}

impl Spectrum {
    /// Columns whose eigenvalue satisfies `keep`.
    pub fn select(&self, keep: impl Fn(f64) -> bool) -> CMat {
        let cols: Vec<usize> = (0..self.values.len()).filter(|&c| keep(self.values[c])).collect();
        let n = self.vectors.nrows();
        CMat::from_fn(n, cols.len(), |i, j| self.vectors.read(i, cols[j]))
    }

    pub fn count(&self, keep: impl Fn(f64) -> bool) -> usize {
        self.values.iter().filter(|&&e| keep(e)).count()
    }
}

/// `max_ij |M_ij - conj(M_ji)|`.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m.read(i, j) - m.read(j, i).conj()).norm());
        }
    }
    worst
}

/// Eigen-decomposition of a Hermitian matrix (lower triangle is used).
///
/// Eigenvalues ascend; each eigenvector has its first non-negligible
/// component real and positive.
pub fn eigh(m: &CMat) -> Spectrum {
    let n = m.nrows();
    if n == 0 {
        return Spectrum { values: vec![], vectors: CMat::zeros(0, 0) };
    }
    let evd = m.selfadjoint_eigendecomposition(Side::Lower);
    let s = evd.s().column_vector();
    let u = evd.u();
    let mut order: Vec<usize> = (0..n).collect();
    let values_raw: Vec<f64> = (0..n).map(|i| s.read(i).re).collect();
    order.sort_by(|&a, &b| values_raw[a].partial_cmp(&values_raw[b]).unwrap_or(Ordering::Equal));
    let mut vectors = CMat::from_fn(n, n, |i, j| u.read(i, order[j]));
    let values: Vec<f64> = order.iter().map(|&o| values_raw[o]).collect();
    for j in 0..n {
        fix_phase(&mut vectors, j);
    }
    Spectrum { values, vectors }
}

/// Eigenvalues only.
pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return vec![];
    }
    let mut v: Vec<f64> = m.selfadjoint_eigenvalues(Side::Lower);
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    v
}

fn fix_phase(v: &mut CMat, col: usize) {
    let n = v.nrows();
    let scale = (0..n).map(|i| v.read(i, col).norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return;
    }
    if let Some(i) = (0..n).find(|&i| v.read(i, col).norm() > 1e-8 * scale) {
        let c = v.read(i, col);
        let rot = c.conj() / c.norm();
        for r in 0..n {
            let x = v.read(r, col) * rot;
            v.write(r, col, x);
        }
        v.write(i, col, C64::new(c.norm(), 0.0));
    }
}

/// Sorted quasienergies and eigenvectors of a Floquet operator.
///
/// Degenerate eigenvalues (within `1e-10` relative) are ordered by ascending
/// `<sigma_z>` and then lexicographically by their components.
pub fn quasienergy_spectrum(op: &FloquetOperator) -> Result<Spectrum> {
    let m = op.matrix();
    let scale = m.norm_max().max(1.0);
    let defect = hermiticity_defect(m);
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(defect));
    }
    let mut spec = eigh(m);
    let sz = op.sigma_z_diagonal();
    order_degenerate(&mut spec, &sz);
    Ok(spec)
}

fn order_degenerate(spec: &mut Spectrum, sigma_z: &[f64]) {
    let n = spec.values.len();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        let tol = 1e-10 * spec.values[start].abs().max(1.0);
        while end < n && (spec.values[end] - spec.values[start]).abs() < tol {
            end += 1;
        }
        if end - start > 1 {
            let mut cols: Vec<usize> = (start..end).collect();
            let key = |c: usize| -> f64 {
                (0..spec.vectors.nrows()).map(|i| spec.vectors.read(i, c).norm_sqr() * sigma_z[i]).sum()
            };
            let lex = |a: usize, b: usize| -> Ordering {
                for i in 0..spec.vectors.nrows() {
                    let (x, y) = (spec.vectors.read(i, a), spec.vectors.read(i, b));
                    let o =
                        x.re.partial_cmp(&y.re)
                            .unwrap_or(Ordering::Equal)
                            .then(x.im.partial_cmp(&y.im).unwrap_or(Ordering::Equal));
                    if o != Ordering::Equal && (x - y).norm() > 1e-12 {
                        return o;
                    }
                }
                Ordering::Equal
            };
            cols.sort_by(|&a, &b| {
                let (ka, kb) = (key(a), key(b));
                if (ka - kb).abs() > 1e-10 {
                    ka.partial_cmp(&kb).unwrap_or(Ordering::Equal)
                } else {
                    lex(a, b)
                }
            });
            let block = CMat::from_fn(spec.vectors.nrows(), cols.len(), |i, j| spec.vectors.read(i, cols[j]));
            for (j, _) in cols.iter().enumerate() {
                for i in 0..spec.vectors.nrows() {
                    spec.vectors.write(i, start + j, block.read(i, j));
                }
            }
        }
        start = end;
    }
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn exp_hermitian(h: &CMat, t: f64) -> CMat {
    let spec = eigh(h);
    let n = h.nrows();
    let phases: Vec<C64> = spec.values.iter().map(|&e| C64::from_polar(1.0, -e * t)).collect();
    let scaled = CMat::from_fn(n, n, |i, j| spec.vectors.read(i, j) * phases[j]);
    &scaled * spec.vectors.adjoint()
}

/// `max_ij |(U^dagger U - 1)_ij|`.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let p = u.adjoint() * u;
    let n = p.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((p.read(i, j) - C64::new(want, 0.0)).norm());
        }
    }
    worst
}
