//! Command-line front end: `phaseprobe <subcommand> --config <path> [--out <dir>] [--seed <n>]`.
//!
//! Exit codes: 0 on success, 1 when the analysis fails, 2 for I/O or
//! configuration problems.

mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use commands::{execute, Command, StageError};
pub use config::RunConfig;
pub use output::{Manifest, OutputDir};

#[derive(Debug, Parser)]
#[command(name = "phaseprobe", version, about = "Phase analysis for nitride trilayer junctions")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `output_dir` from the config, else `phaseprobe_out` next to it).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Double-hit pair separations, box plots, KDE and the Mann-Whitney test.
    Pairs(Common),
    /// PCA of pair features followed by DBSCAN.
    Cluster(Common),
    /// Phase fraction against depth.
    Zseg(Common),
    /// Projected ratio map and depth profile.
    Concmap(Common),
    /// Lattice-fringe d-spacing per window, clustered.
    Fringe(Common),
    /// Gap, normal resistance and supercurrent from an I-V sweep.
    Iv(Common),
    /// Resistance-area product fit.
    Ra(Common),
    /// Synthetic datasets with planted ground truth.
    Synth(Common),
}

impl Sub {
    fn split(self) -> (Command, Common) {
        match self {
            Sub::Pairs(c) => (Command::Pairs, c),
            Sub::Cluster(c) => (Command::Cluster, c),
            Sub::Zseg(c) => (Command::Zseg, c),
            Sub::Concmap(c) => (Command::Concmap, c),
            Sub::Fringe(c) => (Command::Fringe, c),
            Sub::Iv(c) => (Command::Iv, c),
            Sub::Ra(c) => (Command::Ra, c),
            Sub::Synth(c) => (Command::Synth, c),
        }
    }
}

/// Loads the config, applies the command-line overrides and runs `command`.
pub fn run_command(
    command: Command,
    config_path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<Manifest, StageError> {
    let at_config = |source| StageError { stage: "config", source };
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| at_config(crate::Error::io(config_path, e)))?;
    let mut cfg = RunConfig::from_json(&text).map_err(|e| match e {
        crate::Error::Config(m) => at_config(crate::Error::Config(format!("{}: {m}", config_path.display()))),
        other => at_config(other),
    })?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    let hash = cfg.hash();
    let base = config_path.parent().unwrap_or(Path::new("")).to_path_buf();
    cfg.resolve_paths(&base);
    // synth creates files, so its config may name inputs that do not exist yet
    if command != Command::Synth {
        cfg.check_inputs_exist().map_err(at_config)?;
    }
    let out_dir = match (out, &cfg.output_dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => o.clone(),
        (None, None) => base.join("phaseprobe_out"),
    };
    execute(command, &cfg, &hash, &base, &out_dir)
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (command, common) = cli.command.split();
    match run_command(command, &common.config, common.out.as_deref(), common.seed) {
        Ok(m) => {
            log::info!("{}: wrote {} files", command.name(), m.outputs.len() + 1);
            0
        }
        Err(e) => {
            eprintln!("phaseprobe {}: {e}", command.name());
            e.exit_code()
        }
    }
}
