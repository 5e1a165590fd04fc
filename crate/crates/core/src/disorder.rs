//! On-site disorder: i.i.d. uniform, and Gaussian-correlated fields built by
//! Fourier synthesis on the torus.
//!
//! A correlated field is
//!
//! ```text
//! V(r) = (dk^2 / 2 pi) [ u_0 + 2 sum_{k in half plane} (u_k cos k.r + v_k sin k.r) ]
//! ```
//!
//! with `k = (2 pi n / Lx, 2 pi m / Ly)`, `dk^2 = (2 pi)^2 / (Lx Ly)`, and
//! `u_k, v_k` uniform with variance `D_k^2 = pi W^2 sigma^2 exp(-sigma^2 k^2 / 2) / dk^2`
//! (`u_0` has variance `2 D_0^2`). The covariance is then
//! `W^2 exp(-|r - r'|^2 / 2 sigma^2)` up to periodic images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{Boundary, LatticeSpec};

/// Modes with `D_k < MODE_CUTOFF * D_0` are dropped.
pub const MODE_CUTOFF: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisorderMode {
    Uncorrelated,
    Correlated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    #[serde(rename = "W")]
    pub w: f64,
    /// Half the correlation length.
    pub sigma: f64,
    pub seed: u64,
    pub mode: DisorderMode,
}

impl DisorderSpec {
    pub fn uncorrelated(w: f64, seed: u64) -> Self {
        DisorderSpec { w, sigma: 0.0, seed, mode: DisorderMode::Uncorrelated }
    }

    pub fn correlated(w: f64, sigma: f64, seed: u64) -> Self {
        DisorderSpec { w, sigma, seed, mode: DisorderMode::Correlated }
    }

    /// Uncorrelated when `sigma == 0`, correlated otherwise.
    pub fn with_sigma(w: f64, sigma: f64, seed: u64) -> Self {
        if sigma > 0.0 {
            Self::correlated(w, sigma, seed)
        } else {
            Self::uncorrelated(w, seed)
        }
    }

    /// Effective correlation half-length (0 for uncorrelated disorder).
    pub fn effective_sigma(&self) -> f64 {
        match self.mode {
            DisorderMode::Uncorrelated => 0.0,
            DisorderMode::Correlated => self.sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w >= 0.0 && self.w.is_finite()) {
            return Err(Error::InvalidParameter(format!("W must be >= 0 (got {})", self.w)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0 (got {})", self.sigma)));
        }
        if self.mode == DisorderMode::Correlated && self.sigma == 0.0 {
            return Err(Error::InvalidParameter(
                "correlated disorder needs sigma > 0; use uncorrelated sampling".into(),
            ));
        }
        Ok(())
    }

    /// Target covariance `<V(r) V(r')>` at separation `|r - r'| = dist`.
    pub fn covariance(&self, dist: f64) -> f64 {
        let w2 = self.w * self.w;
        match self.mode {
            DisorderMode::Uncorrelated => {
                if dist.abs() < 1e-9 {
                    w2
                } else {
                    0.0
                }
            }
            DisorderMode::Correlated => w2 * (-dist * dist / (2.0 * self.sigma * self.sigma)).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderField {
    /// Potential per site, in lattice site order.
    pub values: Vec<f64>,
    pub spec: DisorderSpec,
    pub lattice: LatticeSpec,
    pub sample: u64,
}

impl DisorderField {
    pub fn zeros(lat: &LatticeSpec) -> Self {
        DisorderField {
            values: vec![0.0; lat.n_sites()],
            spec: DisorderSpec::uncorrelated(0.0, 0),
            lattice: *lat,
            sample: 0,
        }
    }

    pub fn constant(lat: &LatticeSpec, c: f64) -> Self {
        DisorderField { values: vec![c; lat.n_sites()], ..Self::zeros(lat) }
    }
}

fn rng_for(seed: u64, sample: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample);
    rng
}

fn uniform(rng: &mut ChaCha8Rng, half_width: f64) -> f64 {
    (2.0 * rng.gen::<f64>() - 1.0) * half_width
}

/// I.i.d. values uniform on `[-sqrt(3) W, sqrt(3) W]` (variance `W^2`), sample 0.
pub fn sample_uncorrelated(lat: &LatticeSpec, w: f64, seed: u64) -> DisorderField {
    sample_uncorrelated_indexed(lat, w, seed, 0)
}

pub fn sample_uncorrelated_indexed(lat: &LatticeSpec, w: f64, seed: u64, sample: u64) -> DisorderField {
    let mut rng = rng_for(seed, sample);
    let hw = 3f64.sqrt() * w;
    let values = (0..lat.n_sites()).map(|_| uniform(&mut rng, hw)).collect();
    DisorderField { values, spec: DisorderSpec::uncorrelated(w, seed), lattice: *lat, sample }
}

/// Correlated field for sample 0.
pub fn sample_correlated_field(lat: &LatticeSpec, spec: &DisorderSpec) -> Result<DisorderField> {
    sample_correlated_indexed(lat, spec, 0)
}

/// Synthesis momenta `(n, m)` in the half plane `m > 0 or (m == 0, n > 0)` whose
/// amplitude exceeds the cutoff.
fn synthesis_modes(lat: &LatticeSpec, sigma: f64) -> Vec<(i64, i64)> {
    let (dkx, dky) = (2.0 * PI / lat.lx(), 2.0 * PI / lat.ly());
    // exp(-sigma^2 k^2 / 4) < MODE_CUTOFF
    let kmax = 2.0 * (-MODE_CUTOFF.ln()).sqrt() / sigma;
    let nmax = (kmax / dkx).ceil() as i64;
    let mmax = (kmax / dky).ceil() as i64;
    let mut modes = Vec::new();
    for m in 0..=mmax {
        for n in -nmax..=nmax {
            if m == 0 && n <= 0 {
                continue;
            }
            let (kx, ky) = (n as f64 * dkx, m as f64 * dky);
            if kx * kx + ky * ky <= kmax * kmax {
                modes.push((n, m));
            }
        }
    }
    modes
}

/// Correlated field for a given sample index. Each mode's amplitudes come from
/// a fixed position of the `(seed, sample)` stream, so the result does not
/// depend on evaluation order.
pub fn sample_correlated_indexed(lat: &LatticeSpec, spec: &DisorderSpec, sample: u64) -> Result<DisorderField> {
    spec.validate()?;
    if spec.mode != DisorderMode::Correlated {
        return Err(Error::InvalidParameter("sample_correlated_field needs correlated mode".into()));
    }
    if lat.boundary != Boundary::Torus {
        return Err(Error::LatticeMismatch("correlated synthesis needs a torus".into()));
    }
    let sigma = spec.sigma;
    let (dkx, dky) = (2.0 * PI / lat.lx(), 2.0 * PI / lat.ly());
    let dk2 = dkx * dky;
    let d2 = |k2: f64| PI * spec.w * spec.w * sigma * sigma * (-sigma * sigma * k2 / 2.0).exp() / dk2;
    let sites = lat.sites();
    let mut rng = rng_for(spec.seed, sample);
    let s3 = 3f64.sqrt();

    // zero mode: u_0 uniform with variance 2 D_0^2
    rng.set_word_pos(0);
    let u0 = uniform(&mut rng, s3 * (2.0 * d2(0.0)).sqrt());

    // u cos(kx x + ky y) + v sin(kx x + ky y)
    //   = cos(ky y) [u cos kx x + v sin kx x] + sin(ky y) [v cos kx x - u sin kx x],
    // so each row m of modes reduces to two functions of x alone
    let xs = distinct_coords(sites.iter().map(|s| s.pos[0]));
    let ys = distinct_coords(sites.iter().map(|s| s.pos[1]));
    let site_x: Vec<usize> = sites.iter().map(|s| xs.index(s.pos[0])).collect();
    let site_y: Vec<usize> = sites.iter().map(|s| ys.index(s.pos[1])).collect();
    let mut rows: std::collections::BTreeMap<i64, (Vec<f64>, Vec<f64>)> = std::collections::BTreeMap::new();
    for (n, m) in synthesis_modes(lat, sigma) {
        let (kx, ky) = (n as f64 * dkx, m as f64 * dky);
        let dk = d2(kx * kx + ky * ky).sqrt();
        rng.set_word_pos(mode_word_pos(n, m));
        let u = uniform(&mut rng, s3 * dk);
        let v = uniform(&mut rng, s3 * dk);
        let (p, q) = rows.entry(m).or_insert_with(|| (vec![0.0; xs.values.len()], vec![0.0; xs.values.len()]));
        for (i, &x) in xs.values.iter().enumerate() {
            let (sn, cs) = (kx * x).sin_cos();
            p[i] += u * cs + v * sn;
            q[i] += v * cs - u * sn;
        }
    }
    let mut values = vec![u0; sites.len()];
    for (m, (p, q)) in &rows {
        let ky = *m as f64 * dky;
        let trig: Vec<(f64, f64)> = ys.values.iter().map(|&y| (ky * y).sin_cos()).collect();
        for (s, val) in values.iter_mut().enumerate() {
            let (sn, cs) = trig[site_y[s]];
            let ix = site_x[s];
            *val += 2.0 * (cs * p[ix] + sn * q[ix]);
        }
    }
    let norm = dk2 / (2.0 * PI);
    for v in &mut values {
        *v *= norm;
    }
    Ok(DisorderField { values, spec: *spec, lattice: *lat, sample })
}

struct Coords {
    values: Vec<f64>,
    index: HashMap<i64, usize>,
}

impl Coords {
    fn index(&self, x: f64) -> usize {
        self.index[&coord_key(x)]
    }
}

fn coord_key(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

fn distinct_coords(it: impl Iterator<Item = f64>) -> Coords {
    let mut values = Vec::new();
    let mut index = HashMap::new();
    for x in it {
        index.entry(coord_key(x)).or_insert_with(|| {
            values.push(x);
            values.len() - 1
        });
    }
    Coords { values, index }
}

/// Word offset of mode `(n, m)` in the ChaCha stream: four 32-bit words per mode.
fn mode_word_pos(n: i64, m: i64) -> u128 {
    // bijection Z x N -> N, offset by one so that slot 0 holds the zero mode
    let zig = if n >= 0 { 2 * n as u128 } else { 2 * (-n) as u128 - 1 };
    let m = m as u128;
    let s = zig + m;
    let cantor = s * (s + 1) / 2 + m;
    4 * (cantor + 1)
}

/// Field of either kind for one sample index.
pub fn sample_field(lat: &LatticeSpec, spec: &DisorderSpec, sample: u64) -> Result<DisorderField> {
    spec.validate()?;
    match spec.mode {
        DisorderMode::Uncorrelated => Ok(sample_uncorrelated_indexed(lat, spec.w, spec.seed, sample)),
        DisorderMode::Correlated => sample_correlated_indexed(lat, spec, sample),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub mean: f64,
    pub std_err: f64,
    /// Site pairs per field.
    pub n_pairs: usize,
    pub n_fields: usize,
}

/// Site index for every site reached from another by `displacement`.
pub fn displaced_pairs(lat: &LatticeSpec, displacement: [f64; 2]) -> Vec<(usize, usize)> {
    let key = |p: [f64; 2]| -> (i64, i64) { ((p[0] * 1e6).round() as i64, (p[1] * 1e6).round() as i64) };
    let (lx, ly) = (lat.lx(), lat.ly());
    let sites = lat.sites();
    let mut index = HashMap::with_capacity(sites.len());
    for (i, s) in sites.iter().enumerate() {
        index.insert(key(s.pos), i);
    }
    let mut pairs = Vec::new();
    for (i, s) in sites.iter().enumerate() {
        let mut x = (s.pos[0] + displacement[0]).rem_euclid(lx);
        let mut y = s.pos[1] + displacement[1];
        if lat.boundary == Boundary::Torus {
            y = y.rem_euclid(ly);
        }
        // positions that land on the seam within rounding
        if (x - lx).abs() < 1e-7 {
            x = 0.0;
        }
        if (y - ly).abs() < 1e-7 && lat.boundary == Boundary::Torus {
            y = 0.0;
        }
        if let Some(&j) = index.get(&key([x, y])) {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Sample average of `V(r) V(r + dr)` over sites and fields.
///
/// With two or more fields the standard error comes from the spread of the
/// per-field averages; for a single field it comes from the per-pair spread.
pub fn empirical_covariance(fields: &[DisorderField], displacement: [f64; 2]) -> Result<CovarianceEstimate> {
    let first = fields.first().ok_or_else(|| Error::InvalidParameter("no fields given".into()))?;
    let lat = first.lattice;
    if fields.iter().any(|f| f.lattice != lat || f.values.len() != lat.n_sites()) {
        return Err(Error::LatticeMismatch("fields live on different lattices".into()));
    }
    let pairs = displaced_pairs(&lat, displacement);
    if pairs.is_empty() {
        return Err(Error::LatticeMismatch(format!(
            "displacement ({:.4}, {:.4}) maps no site onto a site",
            displacement[0], displacement[1]
        )));
    }
    let per_field: Vec<f64> = fields
        .iter()
        .map(|f| pairs.iter().map(|&(i, j)| f.values[i] * f.values[j]).sum::<f64>() / pairs.len() as f64)
        .collect();
    let nf = fields.len() as f64;
    let mean = per_field.iter().sum::<f64>() / nf;
    let std_err = if fields.len() >= 2 {
        let var = per_field.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        (var / nf).sqrt()
    } else {
        let vals = &first.values;
        let n = pairs.len() as f64;
        let var = pairs.iter().map(|&(i, j)| (vals[i] * vals[j] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (var / n).sqrt()
    };
    Ok(CovarianceEstimate { mean, std_err, n_pairs: pairs.len(), n_fields: fields.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_strength_gives_zero_field() {
        let lat = LatticeSpec::torus(4, 4, 1.0).unwrap();
        assert!(sample_uncorrelated(&lat, 0.0, 9).values.iter().all(|&v| v == 0.0));
        let f = sample_correlated_field(&lat, &DisorderSpec::correlated(0.0, 1.0, 9)).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn correlated_mode_rejects_zero_sigma() {
        let lat = LatticeSpec::torus(4, 4, 1.0).unwrap();
        let spec = DisorderSpec { w: 0.1, sigma: 0.0, seed: 1, mode: DisorderMode::Correlated };
        assert!(sample_correlated_field(&lat, &spec).is_err());
    }

    #[test]
    fn constant_field_covariance_is_square() {
        let lat = LatticeSpec::torus(4, 4, 1.0).unwrap();
        let f = DisorderField::constant(&lat, 0.3);
        let est = empirical_covariance(&[f], [0.0, 1.0]).unwrap();
        assert!((est.mean - 0.09).abs() < 1e-15);
        assert!(est.std_err < 1e-15);
    }

    #[test]
    fn distinct_displacements_exist() {
        let lat = LatticeSpec::torus(6, 6, 1.0).unwrap();
        for d in [[0.0, 0.0], [0.0, 1.0], [0.0, 2.0], [3f64.sqrt(), 0.0]] {
            assert!(!displaced_pairs(&lat, d).is_empty(), "{d:?}");
        }
        assert!(displaced_pairs(&lat, [0.3, 0.0]).is_empty());
    }

    #[test]
    fn mode_slots_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for m in 0..30 {
            for n in -30..30 {
                assert!(seen.insert(mode_word_pos(n, m)));
            }
        }
        assert!(!seen.contains(&0));
    }
}
