//! Named parameter points near the AFTI region and the lattice scales used
//! to study them under disorder.
//!
//! Each point sits a fixed distance from a clean phase boundary on the
//! `A = B` slice. The boundary is solved here rather than hard-coded, and the
//! solved value is carried along so it can be logged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::model::ModelParams;
use crate::phases::{dirac_boundary_exact, gamma_boundary_a, ClosingPoint, GapRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// 20 x 20 torus, 10 samples.
    Desk,
    /// 29 x 34 torus, 30 samples.
    Paper,
}

impl Scale {
    pub fn dims(self) -> (usize, usize) {
        match self {
            Scale::Desk => (20, 20),
            Scale::Paper => (29, 34),
        }
    }

    pub fn n_samples(self) -> usize {
        match self {
            Scale::Desk => 10,
            Scale::Paper => 30,
        }
    }

    pub fn lattice(self, a: f64) -> Result<LatticeSpec> {
        let (nx, ny) = self.dims();
        LatticeSpec::torus(nx, ny, a)
    }
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => Err(Error::InvalidParameter(format!("unknown scale '{s}' (desk|paper)"))),
        }
    }
}

/// The clean boundary a preset is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRef {
    pub point: ClosingPoint,
    pub gap: GapRef,
    /// `A = B` value on the boundary, in units of omega.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub params: ModelParams,
    /// Gap whose winding number tracks the disorder-driven transition.
    pub eps_ref: f64,
    pub boundary: BoundaryRef,
    /// Signed distance `A - boundary` in units of omega.
    pub offset: f64,
}

pub const PRESET_NAMES: [&str; 4] = ["P1", "P1'", "P2", "P3"];

fn canonical(name: &str) -> Option<&'static str> {
    match name.trim() {
        "P1" | "p1" => Some("P1"),
        "P1'" | "p1'" | "P1p" | "p1p" | "P1\u{2032}" | "P1prime" => Some("P1'"),
        "P2" | "p2" => Some("P2"),
        "P3" | "p3" => Some("P3"),
        _ => None,
    }
}

/// Resolve a point with `omega = a = 1`.
pub fn preset(name: &str) -> Result<Preset> {
    let Some(name) = canonical(name) else {
        return Err(Error::UnknownPreset(name.to_string()));
    };
    let (lambda, boundary, offset, eps_ref) = match name {
        "P1" => (
            0.0,
            BoundaryRef {
                point: ClosingPoint::Gamma,
                gap: GapRef::Half,
                value: gamma_boundary_a(0.0, 0.5, 1.0).unwrap(),
            },
            -0.005,
            0.5,
        ),
        "P1'" => (
            0.04,
            BoundaryRef {
                point: ClosingPoint::Gamma,
                gap: GapRef::Half,
                value: gamma_boundary_a(0.04, 0.5, 1.0).unwrap(),
            },
            -0.005,
            0.5,
        ),
        "P2" => (
            0.0,
            BoundaryRef {
                point: ClosingPoint::Gamma,
                gap: GapRef::Zero,
                value: gamma_boundary_a(0.0, 1.0, 1.0).unwrap(),
            },
            0.01,
            0.0,
        ),
        // Dirac-point closing at eps = 0 bounding the AFTI region from below at Lambda = 0.2
        "P3" => (
            0.2,
            BoundaryRef { point: ClosingPoint::K, gap: GapRef::Zero, value: dirac_boundary_exact(0.2, 1.0) },
            -0.005,
            0.0,
        ),
        _ => unreachable!(),
    };
    let a = boundary.value + offset;
    Ok(Preset { name: name.to_string(), params: ModelParams::new(a, a, lambda), eps_ref, boundary, offset })
}

pub fn all_presets() -> Vec<Preset> {
    PRESET_NAMES.iter().map(|n| preset(n).unwrap()).collect()
}
