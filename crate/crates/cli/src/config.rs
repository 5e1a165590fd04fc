//! Versioned run configuration and named presets.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use floquet_topo::disorder::DisorderSpec;
use floquet_topo::dynamics::{Integrator, DEFAULT_STEPS};
use floquet_topo::phases::DriveAxis;
use floquet_topo::presets::{preset, Preset, Scale, PRESET_NAMES};
use floquet_topo::{LatticeSpec, ModelParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    PhaseDiagram,
    BottSweep,
    BornReport,
    RibbonSpectrum,
    Dynamics,
    DisorderStats,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::PhaseDiagram => "phase-diagram",
            Command::BottSweep => "bott-sweep",
            Command::BornReport => "born-report",
            Command::RibbonSpectrum => "ribbon-spectrum",
            Command::Dynamics => "dynamics",
            Command::DisorderStats => "disorder-stats",
        }
    }
}

/// Sweep axes; each command reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axes {
    /// `A` values of a phase diagram.
    #[serde(rename = "A", default)]
    pub a: Vec<f64>,
    #[serde(rename = "Lambda", default)]
    pub lambda: Vec<f64>,
    pub drive: DriveAxis,
    /// Disorder strengths.
    #[serde(rename = "W", default)]
    pub w: Vec<f64>,
    /// Correlation lengths in units of `a`.
    #[serde(default)]
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSettings {
    pub n_periods: usize,
    pub n_steps: usize,
    /// Frames per period (1 = stroboscopic).
    pub snapshots: usize,
    /// Cell index along the top edge where the packet starts on the red site.
    pub start_cell: usize,
    pub integrator: Integrator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BornSettings {
    /// Reference quasienergy of the self-energy.
    pub eps: f64,
    pub tol: f64,
    /// Upper end of the shifted-boundary scan.
    pub w_max: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema_version: u32,
    pub command: Command,
    pub preset: Option<String>,
    pub scale: Option<Scale>,
    pub params: ModelParams,
    pub lattice: LatticeSpec,
    /// Template for the disorder; its seed always equals `seed`.
    pub disorder: DisorderSpec,
    pub m_max: usize,
    /// Momentum grid per side for Chern and winding numbers.
    pub grid: usize,
    pub n_samples: usize,
    /// Master seed; sample `s` uses ChaCha8 stream `s` of this seed.
    pub seed: u64,
    /// Reference energies of the Bott index.
    pub eps_refs: Vec<f64>,
    pub axes: Axes,
    pub dynamics: DynamicsSettings,
    pub born: BornSettings,
    /// Momenta of a ribbon spectrum.
    pub n_k: usize,
    /// Displacements `[dx, dy]` (units of `a`) for disorder statistics.
    pub displacements: Vec<[f64; 2]>,
    /// Output directory; not part of the config hash.
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn cfg_err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

fn range(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| ((lo + step * i as f64) * 1e9).round() / 1e9).collect()
}

impl RunConfig {
    /// Defaults for a command without a preset.
    pub fn base(command: Command) -> Self {
        let lattice = match command {
            Command::RibbonSpectrum | Command::Dynamics => LatticeSpec::ribbon(60, 17, 1.0),
            _ => LatticeSpec::torus(20, 20, 1.0),
        }
        .expect("default lattice");
        RunConfig {
            schema_version: SCHEMA_VERSION,
            command,
            preset: None,
            scale: None,
            params: ModelParams::new(0.25, 0.25, 0.0),
            lattice,
            disorder: DisorderSpec::uncorrelated(0.1, 1),
            m_max: if command == Command::PhaseDiagram || command == Command::RibbonSpectrum { 4 } else { 2 },
            grid: 48,
            n_samples: 10,
            seed: 1,
            eps_refs: vec![0.0, 0.5],
            axes: Axes {
                a: range(0.02, 0.5, 0.02),
                lambda: range(0.0, 0.5, 0.05),
                drive: DriveAxis::EqualsA,
                w: range(0.0, 0.3, 0.05),
                sigma: vec![0.0, 1.0],
            },
            dynamics: DynamicsSettings {
                n_periods: 50,
                n_steps: DEFAULT_STEPS,
                snapshots: 1,
                start_cell: 30,
                integrator: Integrator::default(),
            },
            born: BornSettings { eps: 0.5, tol: 1e-6, w_max: 0.2, steps: 40 },
            n_k: 120,
            displacements: vec![[0.0, 0.0], [0.0, 1.0], [0.0, -2.0]],
            out: PathBuf::from("out"),
        }
    }

    /// Copy the master seed into the disorder template.
    pub fn normalise(&mut self) {
        self.disorder.seed = self.seed;
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(cfg_err(format!(
                "config schema version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.params.validate().map_err(|e| cfg_err(e.to_string()))?;
        if self.m_max < 1 {
            return Err(cfg_err("m_max must be >= 1"));
        }
        let nonempty = |v: &[f64], what: &str| {
            if v.is_empty() {
                Err(cfg_err(format!("sweep axis '{what}' is empty")))
            } else {
                Ok(())
            }
        };
        let torus = self.lattice.boundary == floquet_topo::Boundary::Torus;
        match self.command {
            Command::PhaseDiagram => {
                nonempty(&self.axes.a, "A")?;
                nonempty(&self.axes.lambda, "Lambda")?;
                if self.grid < 12 {
                    return Err(cfg_err("grid must be >= 12"));
                }
            }
            Command::BottSweep => {
                nonempty(&self.axes.w, "W")?;
                nonempty(&self.axes.sigma, "sigma")?;
                if !torus {
                    return Err(cfg_err("bott-sweep needs a torus lattice"));
                }
                if self.n_samples == 0 {
                    return Err(cfg_err("n_samples must be >= 1"));
                }
                if self.eps_refs.len() != 2 {
                    return Err(cfg_err("bott-sweep takes exactly two reference energies (eps0, eps_half)"));
                }
            }
            Command::BornReport => {
                nonempty(&self.axes.sigma, "sigma")?;
                if !(self.born.tol > 0.0) || self.born.steps == 0 || !(self.born.w_max > 0.0) {
                    return Err(cfg_err("born settings need tol > 0, steps >= 1 and w_max > 0"));
                }
            }
            Command::RibbonSpectrum => {
                if torus {
                    return Err(cfg_err("ribbon-spectrum needs a ribbon lattice"));
                }
                if self.n_k == 0 {
                    return Err(cfg_err("n_k must be >= 1"));
                }
            }
            Command::Dynamics => {
                if torus {
                    return Err(cfg_err("dynamics needs a ribbon lattice"));
                }
                let d = &self.dynamics;
                if d.n_steps < floquet_topo::dynamics::MIN_STEPS || d.snapshots == 0 || d.snapshots > d.n_steps {
                    return Err(cfg_err("dynamics needs n_steps >= 16 and 1 <= snapshots <= n_steps"));
                }
                if d.n_periods == 0 {
                    return Err(cfg_err("n_periods must be >= 1"));
                }
            }
            Command::DisorderStats => {
                if self.displacements.is_empty() {
                    return Err(cfg_err("sweep axis 'displacements' is empty"));
                }
                if !torus {
                    return Err(cfg_err("disorder-stats needs a torus lattice"));
                }
                if self.n_samples == 0 {
                    return Err(cfg_err("n_samples must be >= 1"));
                }
                self.disorder.validate().map_err(|e| cfg_err(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of everything except `out`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }
}

/// Named run presets besides the bare points.
pub const RUN_PRESETS: [&str; 6] = [
    "clean-phase-diagram",
    "afti-dynamics",
    "sfti-dynamics",
    "afti-ribbon-spectrum",
    "sfti-ribbon-spectrum",
    "disorder-stats",
];

pub fn preset_names() -> Vec<String> {
    let mut out: Vec<String> = RUN_PRESETS.iter().map(|s| s.to_string()).collect();
    for p in PRESET_NAMES {
        out.push(p.to_string());
        out.push(format!("{p}-bott-sweep"));
        out.push(format!("{p}-born-report"));
    }
    out
}

fn apply_point(cfg: &mut RunConfig, pt: &Preset, scale: Scale) {
    cfg.params = pt.params;
    cfg.born.eps = pt.eps_ref;
    if cfg.command == Command::BottSweep {
        cfg.lattice = scale.lattice(1.0).expect("scale lattice");
        cfg.n_samples = scale.n_samples();
    }
    if cfg.command == Command::BornReport {
        cfg.m_max = 4;
        cfg.axes.sigma = vec![0.0, 0.5, 1.0];
    }
}

/// Configuration for a preset name. A bare point (`P1`, `P1'`, `P2`, `P3`)
/// takes its command from `command`; `<point>-<command>` and the run presets
/// fix the command themselves.
pub fn resolve_preset(name: &str, scale: Scale, command: Option<Command>) -> Result<RunConfig, ConfigError> {
    let unknown = || cfg_err(format!("unknown preset '{name}' (see `preset list`)"));
    let (cfg_cmd, point): (Command, Option<Preset>) = if let Ok(pt) = preset(name) {
        (command.unwrap_or(Command::BottSweep), Some(pt))
    } else if let Some((pt, cmd)) = name
        .rsplit_once("-bott-sweep")
        .filter(|(_, rest)| rest.is_empty())
        .map(|(p, _)| (p, Command::BottSweep))
        .or_else(|| {
            name.rsplit_once("-born-report").filter(|(_, rest)| rest.is_empty()).map(|(p, _)| (p, Command::BornReport))
        })
    {
        (cmd, Some(preset(pt).map_err(|_| unknown())?))
    } else {
        let cmd = match name {
            "clean-phase-diagram" => Command::PhaseDiagram,
            "afti-dynamics" | "sfti-dynamics" => Command::Dynamics,
            "afti-ribbon-spectrum" | "sfti-ribbon-spectrum" => Command::RibbonSpectrum,
            "disorder-stats" => Command::DisorderStats,
            _ => return Err(unknown()),
        };
        (cmd, None)
    };
    if let Some(c) = command {
        if c != cfg_cmd {
            return Err(cfg_err(format!("preset '{name}' is a {} preset, not {}", cfg_cmd.name(), c.name())));
        }
    }
    if matches!(cfg_cmd, Command::PhaseDiagram | Command::RibbonSpectrum | Command::Dynamics | Command::DisorderStats)
        && point.is_some()
    {
        return Err(cfg_err(format!("point preset '{name}' does not apply to {}", cfg_cmd.name())));
    }
    let mut cfg = RunConfig::base(cfg_cmd);
    cfg.preset = Some(name.to_string());
    cfg.scale = Some(scale);
    if let Some(pt) = point {
        apply_point(&mut cfg, &pt, scale);
    }
    match name {
        "clean-phase-diagram" => {
            let step = if scale == Scale::Paper { 0.01 } else { 0.02 };
            cfg.axes.a = range(step, 0.5, step);
            cfg.axes.lambda = range(0.0, 0.5, if scale == Scale::Paper { 0.025 } else { 0.05 });
            cfg.grid = if scale == Scale::Paper { 48 } else { 24 };
        }
        "afti-ribbon-spectrum" => cfg.params = ModelParams::new(0.25, 0.25, 0.0),
        "sfti-ribbon-spectrum" => cfg.params = ModelParams::new(0.4, 0.25, 0.3),
        "afti-dynamics" | "sfti-dynamics" => {
            cfg.params = if name == "afti-dynamics" {
                ModelParams::new(0.25, 0.25, 0.0)
            } else {
                ModelParams::new(0.4, 0.25, 0.3)
            };
            // long enough that neither edge front wraps around the ring within 50 periods
            cfg.lattice = LatticeSpec::ribbon(200, 17, 1.0).expect("ribbon");
            cfg.dynamics.start_cell = 100;
        }
        "disorder-stats" => {
            cfg.disorder = DisorderSpec::correlated(0.1, 1.0, 1);
            cfg.n_samples = if scale == Scale::Paper { 200 } else { 50 };
        }
        _ => {}
    }
    cfg.normalise();
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_preset_resolves() {
        for n in preset_names() {
            let c = resolve_preset(&n, Scale::Desk, None).unwrap();
            c.validate().unwrap();
        }
    }

    #[test]
    fn hash_ignores_output_dir() {
        let mut a = RunConfig::base(Command::BottSweep);
        let h = a.hash();
        a.out = PathBuf::from("/elsewhere");
        assert_eq!(a.hash(), h);
        a.seed = 2;
        assert_ne!(a.hash(), h);
    }

    #[test]
    fn json_round_trip() {
        let c = resolve_preset("P3-born-report", Scale::Paper, None).unwrap();
        let s = serde_json::to_string_pretty(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn command_mismatch_is_rejected() {
        assert!(resolve_preset("P1-bott-sweep", Scale::Desk, Some(Command::Dynamics)).is_err());
        assert!(resolve_preset("P1", Scale::Desk, Some(Command::Dynamics)).is_err());
        assert!(resolve_preset("nope", Scale::Desk, None).is_err());
    }

    #[test]
    fn empty_axis_is_a_config_error() {
        let mut c = RunConfig::base(Command::BottSweep);
        c.axes.w.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn ranges_are_clean() {
        assert_eq!(range(0.0, 0.3, 0.05), vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3]);
    }
}
