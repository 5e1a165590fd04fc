//! `floquet-topo`: batch front end for phase diagrams, Bott sweeps, Born
//! reports, ribbon spectra, wave-packet dynamics and disorder statistics.

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use floquet_topo::presets::Scale;

use config::{resolve_preset, Command, ConfigError, RunConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "floquet-topo", version, about = "Topology of a driven honeycomb lattice with disorder")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Clean phase map over (A, Lambda).
    PhaseDiagram(RunArgs),
    /// Disorder-averaged Bott indices versus W and sigma.
    BottSweep(RunArgs),
    /// Born self-energy shifts and critical disorder.
    BornReport(RunArgs),
    /// Quasienergy spectrum of a zigzag ribbon.
    RibbonSpectrum(RunArgs),
    /// Edge wave-packet evolution on a ribbon.
    Dynamics(RunArgs),
    /// Empirical covariance of sampled disorder fields.
    DisorderStats(RunArgs),
    /// List or show presets.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Show {
        name: String,
        #[arg(long, default_value = "desk")]
        scale: String,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    scale: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    code_version: String,
    config_hash: String,
    config: RunConfig,
    seeds: Seeds,
    started_unix: u64,
    wall_time_s: f64,
    status: String,
    error: Option<ManifestError>,
    outputs: Vec<String>,
    notes: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Seeds {
    master: u64,
    rng: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestError {
    module: String,
    message: String,
}

fn parse_scale(s: Option<&str>) -> Result<Scale, ConfigError> {
    s.unwrap_or("desk").parse().map_err(|e: floquet_topo::Error| ConfigError(e.to_string()))
}

fn build_config(cmd: Command, args: &RunArgs) -> Result<RunConfig, ConfigError> {
    let scale = parse_scale(args.scale.as_deref())?;
    let mut cfg = match (&args.config, &args.preset) {
        (Some(_), Some(_)) => return Err(ConfigError("--config and --preset are mutually exclusive".into())),
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            let c: RunConfig =
                serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            if c.command != cmd {
                return Err(ConfigError(format!("config is for {}, not {}", c.command.name(), cmd.name())));
            }
            c
        }
        (None, Some(name)) => resolve_preset(name, scale, Some(cmd))?,
        (None, None) => RunConfig::base(cmd),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    cfg.normalise();
    cfg.validate()?;
    Ok(cfg)
}

fn module_of(e: &floquet_topo::Error) -> &'static str {
    use floquet_topo::Error::*;
    match e {
        Gapless { .. } | SingularLink { .. } | NonIntegerFlux { .. } | SingularBott(_) => "invariants",
        NearSingular { .. } | Quadrature(_) => "born",
        Unitarity(_) => "dynamics",
        Sample { .. } => "invariants",
        Io(_) | Csv(_) | Json(_) => "io",
        NotHermitian(_) | Truncation(_) => "model",
        _ => "core",
    }
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn up_to_date(dir: &Path, hash: &str) -> bool {
    let Ok(text) = std::fs::read_to_string(dir.join("manifest.json")) else {
        return false;
    };
    let Ok(m) = serde_json::from_str::<Manifest>(&text) else {
        return false;
    };
    m.config_hash == hash && m.status == "ok" && m.outputs.iter().all(|f| dir.join(f).exists())
}

fn execute(cfg: RunConfig) -> ExitCode {
    let dir = cfg.out.clone();
    let hash = cfg.hash();
    if up_to_date(&dir, &hash) {
        println!("{}: up to date (config {})", dir.display(), &hash[..12]);
        return ExitCode::SUCCESS;
    }
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("error: cannot create {}: {e}", dir.display());
        return ExitCode::from(EXIT_CONFIG);
    }
    let started_unix = now_unix();
    let t0 = Instant::now();
    let result = commands::run(&cfg, &dir);
    let wall = t0.elapsed().as_secs_f64();
    let notes = commands::preset_notes(&cfg);
    let (status, error, outputs, notes, code) = match result {
        Ok(o) => {
            let notes = serde_json::json!({"preset": notes, "run": o.notes});
            ("ok", None, o.files, notes, ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let err = ManifestError { module: module_of(&e).to_string(), message: e.to_string() };
            ("error", Some(err), Vec::new(), serde_json::json!({"preset": notes}), ExitCode::from(EXIT_NUMERICAL))
        }
    };
    let manifest = Manifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: hash,
        seeds: Seeds { master: cfg.seed, rng: "ChaCha8, stream = sample index".into() },
        config: cfg,
        started_unix,
        wall_time_s: wall,
        status: status.to_string(),
        error,
        outputs,
        notes,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n";
    if let Err(e) = std::fs::write(dir.join("manifest.json"), text) {
        eprintln!("error: cannot write manifest: {e}");
        return ExitCode::from(EXIT_NUMERICAL);
    }
    println!("{}: {status} in {wall:.1} s", dir.display());
    code
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::PhaseDiagram(a) => (Command::PhaseDiagram, a),
        Cmd::BottSweep(a) => (Command::BottSweep, a),
        Cmd::BornReport(a) => (Command::BornReport, a),
        Cmd::RibbonSpectrum(a) => (Command::RibbonSpectrum, a),
        Cmd::Dynamics(a) => (Command::Dynamics, a),
        Cmd::DisorderStats(a) => (Command::DisorderStats, a),
        Cmd::Preset { action } => return preset_action(action),
    };
    if let Some(n) = args.workers {
        if n == 0 {
            eprintln!("error: --workers must be >= 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool");
    }
    match build_config(cmd, &args) {
        Ok(cfg) => execute(cfg),
        Err(e) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn preset_action(action: PresetAction) -> ExitCode {
    match action {
        PresetAction::List => {
            let mut out = std::io::stdout().lock();
            for n in config::preset_names() {
                // a closed pipe (e.g. `| head`) just ends the listing
                if writeln!(out, "{n}").is_err() {
                    break;
                }
            }
            ExitCode::SUCCESS
        }
        PresetAction::Show { name, scale } => {
            let cfg = parse_scale(Some(&scale)).and_then(|s| resolve_preset(&name, s, None));
            match cfg {
                Ok(c) => {
                    println!("{}", serde_json::to_string_pretty(&c).expect("config serialises"));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("config error: {e}");
                    ExitCode::from(EXIT_CONFIG)
                }
            }
        }
    }
}
