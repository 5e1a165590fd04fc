//! File formats: dense operators in a binary container, and CSV tables for
//! disorder fields, phase maps, Bott sweeps and density histories.
//!
//! Operator file layout: the 8 bytes `FQOP0001`, a little-endian `u64` header
//! length, the JSON [`OperatorHeader`], then `dim * dim` entries as
//! `(re, im)` little-endian `f64` pairs in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::disorder::{DisorderField, DisorderSpec};
use crate::dynamics::DensityHistory;
use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, Sublattice};
use crate::model::{Basis, FloquetOperator};
use crate::{CMat, C64};

const MAGIC: &[u8; 8] = b"FQOP0001";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorHeader {
    pub dim: usize,
    pub m_max: usize,
    pub omega: f64,
    pub basis: Basis,
    pub sigma_z: Vec<f64>,
}

pub fn write_matrix(w: &mut impl Write, m: &CMat) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m.read(i, j);
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix(r: &mut impl Read, rows: usize, cols: usize) -> Result<CMat> {
    let mut buf = vec![0u8; rows * cols * 16];
    r.read_exact(&mut buf)?;
    let f = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    Ok(CMat::from_fn(rows, cols, |i, j| {
        let o = 16 * (i * cols + j);
        C64::new(f(o), f(o + 8))
    }))
}

pub fn save_operator(op: &FloquetOperator, path: &Path) -> Result<()> {
    let header = OperatorHeader {
        dim: op.dim(),
        m_max: op.m_max(),
        omega: op.omega(),
        basis: op.basis(),
        sigma_z: op.sigma_z_diagonal()[..op.n_orb()].to_vec(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    write_matrix(&mut w, op.matrix())?;
    w.flush()?;
    Ok(())
}

/// Header and matrix of a saved operator.
pub fn load_operator(path: &Path) -> Result<(OperatorHeader, CMat)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::InvalidParameter(format!("{} is not an operator file", path.display())));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
    r.read_exact(&mut json)?;
    let header: OperatorHeader = serde_json::from_slice(&json)?;
    let m = read_matrix(&mut r, header.dim, header.dim)?;
    Ok((header, m))
}

/// Serialize `rows` as CSV with a header line taken from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub site: usize,
    pub x: f64,
    pub y: f64,
    pub sublattice: Sublattice,
    #[serde(rename = "V")]
    pub v: f64,
}

pub fn field_rows(field: &DisorderField) -> Vec<FieldRow> {
    field
        .values
        .iter()
        .enumerate()
        .map(|(s, &v)| {
            let site = field.lattice.site(s);
            FieldRow { site: s, x: site.pos[0], y: site.pos[1], sublattice: site.sub, v }
        })
        .collect()
}

pub fn write_field_csv(field: &DisorderField, path: &Path) -> Result<()> {
    write_csv(path, &field_rows(field))
}

/// Rebuild a field from its CSV export; site order and positions must match `lat`.
pub fn read_field_csv(path: &Path, lat: &LatticeSpec, spec: DisorderSpec, sample: u64) -> Result<DisorderField> {
    let rows: Vec<FieldRow> = read_csv(path)?;
    if rows.len() != lat.n_sites() {
        return Err(Error::LatticeMismatch(format!("{} rows for {} sites", rows.len(), lat.n_sites())));
    }
    let mut values = vec![0.0; rows.len()];
    for r in &rows {
        let site = lat.site(r.site.min(lat.n_sites() - 1));
        if r.site >= lat.n_sites()
            || site.sub != r.sublattice
            || (site.pos[0] - r.x).abs() > 1e-6
            || (site.pos[1] - r.y).abs() > 1e-6
        {
            return Err(Error::LatticeMismatch(format!("row for site {} does not match the lattice", r.site)));
        }
        values[r.site] = r.v;
    }
    Ok(DisorderField { values, spec, lattice: *lat, sample })
}

/// One row of a clean phase map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    #[serde(rename = "C")]
    pub c: Option<i64>,
    #[serde(rename = "W0")]
    pub w0: Option<i64>,
    #[serde(rename = "Whalf")]
    pub w_half: Option<i64>,
    pub label: String,
    pub gap0: f64,
    #[serde(rename = "gapHalf")]
    pub gap_half: f64,
}

/// Per-sample Bott indices at the two reference gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottRow {
    #[serde(rename = "W")]
    pub w: f64,
    pub sigma: f64,
    pub sample: usize,
    pub bott_eps0: f64,
    pub bott_eps_half: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDensityRow {
    pub t: f64,
    pub x: f64,
    pub rho_edge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalDensityRow {
    pub t: f64,
    pub x: f64,
    pub rho_total: f64,
}

pub fn edge_density_rows(h: &DensityHistory) -> Vec<EdgeDensityRow> {
    let mut out = Vec::new();
    for (f, &t) in h.times.iter().enumerate() {
        let mut e = h.rho_edge(f);
        e.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.extend(e.into_iter().map(|(x, rho_edge)| EdgeDensityRow { t, x, rho_edge }));
    }
    out
}

pub fn total_density_rows(h: &DensityHistory) -> Vec<TotalDensityRow> {
    let mut out = Vec::new();
    for (f, &t) in h.times.iter().enumerate() {
        out.extend(h.rho_total(f).into_iter().map(|(x, rho_total)| TotalDensityRow { t, x, rho_total }));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::sample_uncorrelated;
    use crate::model::{build_bloch_blocks, ModelParams};

    #[test]
    fn operator_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("op.bin");
        let op = build_bloch_blocks([0.3, -0.2], &ModelParams::new(0.2, 0.1, 0.05), 2).unwrap();
        save_operator(&op, &path).unwrap();
        let (h, m) = load_operator(&path).unwrap();
        assert_eq!(h.dim, op.dim());
        assert_eq!(h.m_max, 2);
        assert_eq!(h.basis, op.basis());
        assert_eq!(h.sigma_z, vec![1.0, -1.0]);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                assert_eq!(m.read(i, j), op.matrix().read(i, j));
            }
        }
    }

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        let lat = LatticeSpec::torus(4, 4, 1.0).unwrap();
        let f = sample_uncorrelated(&lat, 0.1, 9);
        write_field_csv(&f, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("site,x,y,sublattice,V\n"));
        let g = read_field_csv(&path, &lat, f.spec, f.sample).unwrap();
        assert_eq!(f.values, g.values);
    }

    #[test]
    fn wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        std::fs::write(&path, b"not an operator").unwrap();
        assert!(load_operator(&path).is_err());
    }
}
