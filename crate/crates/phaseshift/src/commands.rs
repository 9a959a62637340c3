//! The four commands: forward, noise, identify, sweep.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use phaseshift_core::forward::{phase_shift_range, phase_shifts, DEFAULT_SHIFT_CAP};
use phaseshift_core::{
    add_noise, irrs, InverseProblem, NoiseSpec, PhaseShiftSet, SlotRunner, StabilityReport,
};
use serde::{Deserialize, Serialize};

use crate::config::{Mode, RunConfig};
use crate::io::{diameter_matrix, fingerprint, num, parse_shift_table, shift_table};

/// Shifts of the configured potential, up to `l_max` or the automatic cutoff.
pub fn forward_shifts(config: &RunConfig) -> anyhow::Result<PhaseShiftSet> {
    let k = config.require_k()?;
    let p = config.require_potential()?;
    let set = match config.l_max {
        Some(l_max) => PhaseShiftSet::new(k, phase_shift_range(&p, k, l_max)?)?,
        None => phase_shifts(&p, k, DEFAULT_SHIFT_CAP)?,
    };
    Ok(set)
}

/// `forward`: the `l,delta` table.
pub fn forward(config: &RunConfig) -> anyhow::Result<String> {
    let set = forward_shifts(config)?;
    shift_table(
        &[("fingerprint", fingerprint(config)), ("k", num(set.k))],
        &set.shifts,
    )
}

/// Clean targets: read from `targets` or computed from `potential`.
pub fn clean_targets(config: &RunConfig) -> anyhow::Result<PhaseShiftSet> {
    match &config.targets {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            let table =
                parse_shift_table(&text).with_context(|| format!("in {}", path.display()))?;
            let k = match (config.k, table.k()?) {
                (Some(k), _) | (None, Some(k)) => k,
                (None, None) => bail!("{} records no k; pass --k", path.display()),
            };
            Ok(PhaseShiftSet::new(k, table.shifts)?)
        }
        None => forward_shifts(&RunConfig {
            l_max: None,
            ..config.clone()
        }),
    }
}

/// `noise`: the perturbed table with its provenance.
pub fn noise(config: &RunConfig) -> anyhow::Result<String> {
    let clean = clean_targets(config)?;
    let noisy = add_noise(
        &clean,
        NoiseSpec {
            h: config.h,
            seed: config.seed,
        },
    )?;
    let meta = [
        ("fingerprint", fingerprint(config)),
        ("k", num(clean.k)),
        ("h", num(config.h)),
        ("seed", config.seed.to_string()),
        ("delta_max", num(clean.max_abs())),
    ];
    shift_table(&meta, &noisy.shifts)
}

/// Everything `identify` writes, one sweep cell included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub fingerprint: String,
    pub config: RunConfig,
    pub k: f64,
    pub h: f64,
    pub delta_max: f64,
    pub targets: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted_phi: Option<f64>,
    pub report: StabilityReport,
}

/// `identify`: targets, optional noise, random search.
pub fn identify<R: SlotRunner>(config: &RunConfig, runner: &R) -> anyhow::Result<Identification> {
    let clean = clean_targets(config)?;
    let targets = add_noise(
        &clean,
        NoiseSpec {
            h: config.h,
            seed: config.seed,
        },
    )?;
    let problem = InverseProblem::new(targets.clone(), config.admissible, config.include_l0)?;
    let planted_phi = if config.planted {
        Some(problem.phi(&config.require_potential()?)?)
    } else {
        None
    };
    let report = irrs(&problem, &config.irrs_params(), &config.local, runner)?;
    Ok(Identification {
        fingerprint: fingerprint(config),
        config: config.canonical(),
        k: targets.k,
        h: config.h,
        delta_max: clean.max_abs(),
        targets: targets.shifts,
        planted_phi,
        report,
    })
}

pub fn report_json(id: &Identification) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(id)? + "\n")
}

/// Human-readable digest of an identification.
pub fn summary(id: &Identification) -> String {
    let r = &id.report;
    let mut s = String::new();
    let _ = writeln!(s, "fingerprint {}", id.fingerprint);
    let _ = writeln!(
        s,
        "k = {}, h = {}, {} target shifts",
        num(id.k),
        num(id.h),
        id.targets.len()
    );
    let _ = writeln!(s, "verdict: {}", verdict_name(r));
    let diameters: Vec<String> = r.diameters().iter().map(|d| format!("{d:.6e}")).collect();
    let _ = writeln!(s, "diameter by iteration: {}", diameters.join(", "));
    let _ = writeln!(s, "best phi: {}", num(r.best.phi));
    let _ = writeln!(
        s,
        "best potential ({} layers):",
        r.best.potential.layer_count()
    );
    let mut inner = 0.0;
    for (rr, q) in r
        .best
        .potential
        .radii()
        .iter()
        .zip(r.best.potential.values())
    {
        let _ = writeln!(s, "  [{inner:.6}, {rr:.6})  q = {q:.6}");
        inner = *rr;
    }
    if let Some(phi) = id.planted_phi {
        let _ = writeln!(s, "phi at planted potential: {}", num(phi));
    }
    s
}

fn verdict_name(r: &StabilityReport) -> String {
    serde_json::to_value(r.verdict)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Result of a sweep: diameters by `(k, h)` plus every cell's identification.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub k_list: Vec<f64>,
    pub h_list: Vec<f64>,
    pub diameters: Vec<Vec<f64>>,
    pub cells: Vec<Identification>,
}

/// Configuration of cell `(i, j)`; cell `c = i·|h| + j` runs with seed `seed + c`.
pub fn cell_config(config: &RunConfig, i: usize, j: usize) -> RunConfig {
    let c = (i * config.h_list.len() + j) as u64;
    RunConfig {
        mode: Some(Mode::Identify),
        k: Some(config.k_list[i]),
        h: config.h_list[j],
        seed: config.seed.wrapping_add(c),
        targets: None,
        ..config.clone()
    }
}

/// `sweep`: one identification per `(k, h)` cell, in row-major order.
pub fn sweep<R: SlotRunner>(config: &RunConfig, runner: &R) -> anyhow::Result<Sweep> {
    let mut diameters = Vec::with_capacity(config.k_list.len());
    let mut cells = Vec::new();
    for i in 0..config.k_list.len() {
        let mut row = Vec::with_capacity(config.h_list.len());
        for j in 0..config.h_list.len() {
            let cell = cell_config(config, i, j);
            let id = identify(&cell, runner).with_context(|| {
                format!(
                    "cell k = {}, h = {}",
                    num(config.k_list[i]),
                    num(config.h_list[j])
                )
            })?;
            row.push(id.report.final_diameter());
            cells.push(id);
        }
        diameters.push(row);
    }
    Ok(Sweep {
        k_list: config.k_list.clone(),
        h_list: config.h_list.clone(),
        diameters,
        cells,
    })
}

pub fn sweep_matrix(config: &RunConfig, sweep: &Sweep) -> anyhow::Result<String> {
    diameter_matrix(
        &[("fingerprint", fingerprint(config))],
        &sweep.k_list,
        &sweep.h_list,
        &sweep.diameters,
    )
}

/// Directory holding per-cell reports next to a matrix file.
pub fn cell_dir(matrix: &Path) -> PathBuf {
    let stem = matrix
        .file_stem()
        .map_or_else(|| "sweep".into(), |s| s.to_string_lossy().into_owned());
    matrix.with_file_name(format!("{stem}_cells"))
}

pub fn cell_file_name(id: &Identification) -> String {
    format!("k={}_h={}.json", num(id.k), num(id.h))
}
