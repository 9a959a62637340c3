use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use phaseshift::commands::{self, Identification};
use phaseshift::config::PotentialSpec;
use phaseshift::{Mode, PoolRunner, Preset, RunConfig};

/// Fixed-energy phase shifts of layered potentials and their inversion.
#[derive(Debug, Parser)]
#[command(name = "phaseshift", version)]
struct Cli {
    /// JSON configuration document; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Replaces the search parameters with a named set.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Threads for local searches (0 = all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the phase shifts of a potential.
    Forward(Overrides),
    /// Perturb a shift table with relative noise.
    Noise(Overrides),
    /// Recover a potential from phase shifts.
    Identify(Overrides),
    /// Identify over a grid of wave numbers and noise levels.
    Sweep(Overrides),
}

#[derive(Debug, Args)]
struct Overrides {
    /// Reference name (q1..q4) or `{"radii": [...], "values": [...]}`.
    #[arg(long)]
    potential: Option<String>,
    /// Shift table to read instead of computing one from the potential.
    #[arg(long, value_name = "PATH")]
    targets: Option<PathBuf>,
    #[arg(long)]
    k: Option<f64>,
    /// Relative noise level.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    l_max: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    k_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    h_list: Option<Vec<f64>>,
    /// Also report the misfit at the configured potential.
    #[arg(long)]
    planted: bool,
}

fn parse_potential(text: &str) -> anyhow::Result<PotentialSpec> {
    if text.trim_start().starts_with('{') {
        Ok(PotentialSpec::Layers(
            serde_json::from_str(text).context("bad --potential layers")?,
        ))
    } else {
        Ok(PotentialSpec::Named(text.to_string()))
    }
}

fn build_config(cli: &Cli, mode: Mode, o: &Overrides) -> anyhow::Result<RunConfig> {
    let mut c = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    c.mode = Some(mode);
    if let Some(p) = &o.potential {
        c.potential = Some(parse_potential(p)?);
    }
    if o.targets.is_some() {
        c.targets.clone_from(&o.targets);
    }
    c.k = o.k.or(c.k);
    c.h = o.h.unwrap_or(c.h);
    c.l_max = o.l_max.or(c.l_max);
    if let Some(k) = &o.k_list {
        c.k_list.clone_from(k);
    }
    if let Some(h) = &o.h_list {
        c.h_list.clone_from(h);
    }
    c.planted |= o.planted;
    if let Some(seed) = cli.seed {
        c.seed = seed;
    }
    if let Some(preset) = cli.preset {
        c.irrs = preset.irrs(c.seed);
    }
    c.irrs.seed = c.seed;
    if cli.out.is_some() {
        c.out.clone_from(&cli.out);
    }
    c.workers = cli.workers.or(c.workers);
    c.validate(mode)?;
    Ok(c)
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (mode, overrides) = match &cli.command {
        Command::Forward(o) => (Mode::Forward, o),
        Command::Noise(o) => (Mode::Noise, o),
        Command::Identify(o) => (Mode::Identify, o),
        Command::Sweep(o) => (Mode::Sweep, o),
    };
    let config = build_config(&cli, mode, overrides)?;
    let out = config.out.as_deref();
    match mode {
        Mode::Forward => emit(out, &commands::forward(&config)?),
        Mode::Noise => emit(out, &commands::noise(&config)?),
        Mode::Identify => {
            let runner = PoolRunner::new(config.workers)?;
            let id = commands::identify(&config, &runner)?;
            report(out, &id)
        }
        Mode::Sweep => {
            let runner = PoolRunner::new(config.workers)?;
            let sweep = commands::sweep(&config, &runner)?;
            if let Some(path) = out {
                let dir = commands::cell_dir(path);
                std::fs::create_dir_all(&dir)?;
                for cell in &sweep.cells {
                    emit(
                        Some(&dir.join(commands::cell_file_name(cell))),
                        &commands::report_json(cell)?,
                    )?;
                }
            }
            emit(out, &commands::sweep_matrix(&config, &sweep)?)
        }
    }
}

fn report(out: Option<&Path>, id: &Identification) -> anyhow::Result<()> {
    let json = commands::report_json(id)?;
    match out {
        Some(_) => {
            emit(out, &json)?;
            print!("{}", commands::summary(id));
        }
        None => {
            eprint!("{}", commands::summary(id));
            emit(None, &json)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
