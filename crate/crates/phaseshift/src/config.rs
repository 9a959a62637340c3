//! Run configuration: one JSON document, overridable from the command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use phaseshift_core::{AdmissibleSet, IrrsParams, LocalParams, PotentialConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Forward,
    Identify,
    Sweep,
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Batch of 5000, six iterations.
    Paper,
    /// Batch of 500, three iterations.
    Desk,
}

impl Preset {
    pub fn irrs(self, seed: u64) -> IrrsParams {
        let base = match self {
            Preset::Paper => IrrsParams::default(),
            Preset::Desk => IrrsParams::desk(),
        };
        IrrsParams { seed, ..base }
    }
}

/// A potential given by name (`q1`..`q4`) or by its layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    Named(String),
    Layers(PotentialConfig),
}

impl PotentialSpec {
    pub fn resolve(&self) -> anyhow::Result<PotentialConfig> {
        match self {
            PotentialSpec::Layers(p) => Ok(p.clone()),
            PotentialSpec::Named(name) => reference_potential(name)
                .with_context(|| format!("unknown reference potential `{name}`")),
        }
    }
}

/// The layered test potentials `q1`..`q4`.
pub fn reference_potential(name: &str) -> Option<PotentialConfig> {
    let four_layers =
        || PotentialConfig::new(vec![0.5, 1.0, 1.5, 2.0], vec![2.0, 1.0, 2.0, 1.0]).ok();
    match name {
        "q1" => PotentialConfig::new(
            vec![0.3, 1.0, 1.9, 2.2, 2.4],
            vec![4.0, 1.0, -2.0, 3.5, 1.0],
        )
        .ok(),
        "q2" => four_layers(),
        "q3" => four_layers().map(|p| p.scaled(0.1)),
        "q4" => four_layers().map(|p| p.scaled(0.01)),
        _ => None,
    }
}

fn default_admissible() -> AdmissibleSet {
    AdmissibleSet {
        radius: 3.0,
        max_layers: 8,
        q_low: -5.0,
        q_high: 5.0,
    }
}

fn default_k_list() -> Vec<f64> {
    (3..=9).map(f64::from).collect()
}

fn default_h_list() -> Vec<f64> {
    vec![0.0, 1e-4, 1e-3]
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    /// Source of synthetic targets, and the planted point for `identify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    /// Shift table to read instead of computing targets from `potential`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default = "default_k_list")]
    pub k_list: Vec<f64>,
    /// Relative noise level applied to targets.
    #[serde(default)]
    pub h: f64,
    #[serde(default = "default_h_list")]
    pub h_list: Vec<f64>,
    /// Highest order written by `forward`; the automatic cutoff when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_max: Option<usize>,
    #[serde(default = "default_true")]
    pub include_l0: bool,
    #[serde(default = "default_admissible")]
    pub admissible: AdmissibleSet,
    #[serde(default)]
    pub irrs: IrrsParams,
    #[serde(default)]
    pub local: LocalParams,
    #[serde(default)]
    pub seed: u64,
    /// Report `Φ` at `potential` alongside an identification.
    #[serde(default)]
    pub planted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Thread count for local searches; never affects results.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: None,
            potential: None,
            targets: None,
            k: None,
            k_list: default_k_list(),
            h: 0.0,
            h_list: default_h_list(),
            l_max: None,
            include_l0: true,
            admissible: default_admissible(),
            irrs: IrrsParams::default(),
            local: LocalParams::default(),
            seed: 0,
            planted: false,
            out: None,
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let mut config: RunConfig =
            serde_json::from_str(text).context("invalid configuration document")?;
        config.irrs.seed = config.seed;
        Ok(config)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    /// The configuration with the output location dropped and the seed
    /// propagated; two runs with equal canonical forms produce equal results.
    pub fn canonical(&self) -> RunConfig {
        let mut c = self.clone();
        c.irrs.seed = c.seed;
        c.out = None;
        c.workers = None;
        c
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.canonical()).unwrap_or_default()
    }

    pub fn irrs_params(&self) -> IrrsParams {
        IrrsParams {
            seed: self.seed,
            ..self.irrs
        }
    }

    pub fn require_k(&self) -> anyhow::Result<f64> {
        match self.k {
            Some(k) if k > 0.0 && k.is_finite() => Ok(k),
            Some(k) => bail!("wave number must be positive and finite, got {k}"),
            None => bail!("no wave number given (set `k` or pass --k)"),
        }
    }

    pub fn require_potential(&self) -> anyhow::Result<PotentialConfig> {
        self.potential
            .as_ref()
            .context("no potential given (set `potential` or pass --potential)")?
            .resolve()
    }

    /// Checks the fields a mode needs.
    pub fn validate(&self, mode: Mode) -> anyhow::Result<()> {
        self.admissible.validate()?;
        self.local.validate()?;
        if !(self.h >= 0.0) || self.h_list.iter().any(|h| !(*h >= 0.0)) {
            bail!("noise levels must be nonnegative");
        }
        match mode {
            Mode::Forward => {
                self.require_k()?;
                self.require_potential()?;
            }
            Mode::Noise => {
                if self.targets.is_none() {
                    self.require_k()?;
                    self.require_potential()?;
                }
            }
            Mode::Identify => {
                self.irrs_params().validate()?;
                if self.targets.is_none() {
                    self.require_potential()?;
                }
                if self.targets.is_none() || self.k.is_some() {
                    self.check_regime(self.require_k()?)?;
                }
                if self.planted {
                    self.require_potential()?;
                }
            }
            Mode::Sweep => {
                self.irrs_params().validate()?;
                self.require_potential()?;
                if self.k_list.is_empty() || self.h_list.is_empty() {
                    bail!("sweep needs at least one k and one h");
                }
                let k_min = self.k_list.iter().copied().fold(f64::INFINITY, f64::min);
                if !(k_min > 0.0) {
                    bail!("wave numbers must be positive");
                }
                self.check_regime(k_min)?;
            }
        }
        Ok(())
    }

    fn check_regime(&self, k: f64) -> anyhow::Result<()> {
        if !(self.admissible.q_high < k * k) {
            bail!(
                "q_high = {} must stay below k^2 = {} so that every admissible layer is classically allowed",
                self.admissible.q_high,
                k * k
            );
        }
        Ok(())
    }
}
