//! Iterative reduced random search (IRRS).
//!
//! Each iteration samples a batch of uniform configurations, keeps the best
//! fraction of them, polishes each survivor with [`lmm`], and pools the
//! results with the previous iteration's. The spread of the best few pooled
//! minimizers, measured as a normalized diameter, decides whether the inverse
//! problem looks stable.

use alloc::vec::Vec;

use libm::ceil;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::local::{lmm, LocalParams, SearchPoint};
use crate::objective::InverseProblem;
use crate::potential::{distance, l2_norm, sample_uniform, PotentialConfig};
use crate::{Error, Result};

const MAX_RESAMPLES: usize = 1000;

/// Parameters of the random search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrrsParams {
    /// Points sampled per iteration (`L`).
    pub batch_size: usize,
    /// Fraction of each batch passed to local search (`γ`).
    pub gamma: f64,
    /// Fraction of the reduced sample forming the minimizing set (`ν`).
    pub nu: f64,
    /// Required contraction of the diameter between iterations (`β`).
    pub beta: f64,
    /// Diameter at or below which the search is declared stable (`ε`).
    pub epsilon: f64,
    pub j_max: usize,
    pub seed: u64,
}

impl Default for IrrsParams {
    fn default() -> Self {
        IrrsParams {
            batch_size: 5000,
            gamma: 0.01,
            nu: 0.1,
            beta: 0.95,
            epsilon: 0.01,
            j_max: 6,
            seed: 0,
        }
    }
}

/// `⌈x⌉`, forgiving products like `0.05 · 500` that land a hair above an integer.
fn ceil_count(x: f64) -> usize {
    let nearest = libm::round(x);
    if (x - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) {
        nearest as usize
    } else {
        ceil(x) as usize
    }
}

impl IrrsParams {
    /// Smaller batches and fewer iterations, for quick runs.
    pub fn desk() -> Self {
        IrrsParams {
            batch_size: 500,
            gamma: 0.05,
            nu: 0.1,
            j_max: 3,
            ..IrrsParams::default()
        }
    }

    /// Size of the reduced sample, `⌈γL⌉`.
    pub fn reduced_count(&self) -> usize {
        ceil_count(self.gamma * self.batch_size as f64)
    }

    /// Size of the minimizing set, `⌈νγL⌉`.
    pub fn minimizing_count(&self) -> usize {
        ceil_count(self.nu * self.gamma * self.batch_size as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let fraction = |x: f64| x > 0.0 && x < 1.0;
        if !(fraction(self.gamma) && fraction(self.nu) && fraction(self.beta)) {
            return Err(Error::Validation(
                "gamma, nu and beta must lie in (0, 1)".into(),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Validation("epsilon must be positive".into()));
        }
        if self.j_max == 0 {
            return Err(Error::Validation("j_max must be at least 1".into()));
        }
        let reduced = self.gamma * self.batch_size as f64;
        if reduced < 1.0 - 1e-9 || self.nu * reduced < 1.0 - 1e-9 {
            return Err(Error::Validation("batch too small for gamma and nu".into()));
        }
        if self.reduced_count() > self.batch_size {
            return Err(Error::Validation(
                "reduced sample larger than the batch".into(),
            ));
        }
        Ok(())
    }
}

/// A local minimizer with its objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimizer {
    pub potential: PotentialConfig,
    pub phi: f64,
}

/// The lowest-`Φ` minimizers of a pool and their normalized diameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizingSet {
    pub members: Vec<Minimizer>,
    pub diameter: f64,
    pub d_av: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Stable,
    Unstable,
    IterationCapped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration number.
    pub iteration: usize,
    pub diameter: f64,
    pub d_av: f64,
    pub best_phi: f64,
    pub members: Vec<Minimizer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub best: Minimizer,
    pub iterations: Vec<IterationRecord>,
    pub verdict: Verdict,
}

impl StabilityReport {
    /// The diameter sequence `D^1, D^2, ...`.
    pub fn diameters(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.diameter).collect()
    }

    /// Diameter of the last iteration.
    pub fn final_diameter(&self) -> f64 {
        self.iterations.last().map_or(f64::NAN, |r| r.diameter)
    }
}

/// Runs independent tasks indexed by slot and returns results in slot order.
pub trait SlotRunner {
    fn run<T, F>(&self, slots: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Runs every slot on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl SlotRunner for Sequential {
    fn run<T, F>(&self, slots: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..slots).map(task).collect()
    }
}

/// Indices of the `count` smallest keys, ties kept in input order.
fn lowest<T>(items: &[T], count: usize, key: impl Fn(&T) -> f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| key(&items[a]).total_cmp(&key(&items[b])));
    order.truncate(count);
    order
}

/// The `count` lowest-value points of a batch, ties broken by batch order.
pub fn reduced_sample(batch: &[SearchPoint], count: usize) -> Vec<SearchPoint> {
    lowest(batch, count, |p| p.value)
        .into_iter()
        .map(|i| batch[i].clone())
        .collect()
}

fn max_pairwise(members: &[Minimizer]) -> f64 {
    let mut widest = 0.0f64;
    for (i, a) in members.iter().enumerate() {
        for b in &members[i + 1..] {
            widest = widest.max(distance(&a.potential, &b.potential));
        }
    }
    widest
}

/// Minimizing set of `pool`: its `size` lowest members, normalized by the mean
/// norm of the `averaged` lowest members.
pub fn minimizing_set(pool: &[Minimizer], size: usize, averaged: usize) -> Result<MinimizingSet> {
    if pool.is_empty() || size == 0 || averaged == 0 {
        return Err(Error::Validation(
            "minimizing set needs a nonempty pool".into(),
        ));
    }
    let order = lowest(pool, size.max(averaged), |m| m.phi);
    let averaged = averaged.min(order.len());
    let d_av = order[..averaged]
        .iter()
        .map(|&i| l2_norm(&pool[i].potential))
        .sum::<f64>()
        / averaged as f64;
    if !(d_av > 0.0) {
        return Err(Error::DegeneratePool);
    }
    let members: Vec<Minimizer> = order.iter().take(size).map(|&i| pool[i].clone()).collect();
    let diameter = max_pairwise(&members) / d_av;
    Ok(MinimizingSet {
        members,
        diameter,
        d_av,
    })
}

/// Minimizing set of `size` members with `d_av` averaged over every candidate.
pub fn diameter(candidates: &[Minimizer], size: usize) -> Result<MinimizingSet> {
    if candidates.len() < size {
        return Err(Error::Validation(
            "fewer candidates than minimizing-set members".into(),
        ));
    }
    minimizing_set(candidates, size, candidates.len())
}

/// Stopping rule after iteration `j` (1-based) with diameter `d`; `None` continues.
pub fn stopping_branch(d: f64, d_prev: f64, j: usize, params: &IrrsParams) -> Option<Verdict> {
    if d <= params.epsilon {
        Some(Verdict::Stable)
    } else if d <= params.beta * d_prev {
        (j >= params.j_max).then_some(Verdict::IterationCapped)
    } else {
        Some(Verdict::Unstable)
    }
}

/// Verdict implied by a diameter history, or `None` if it would not have stopped.
pub fn replay_verdict(diameters: &[f64], params: &IrrsParams) -> Option<Verdict> {
    let mut prev = f64::INFINITY;
    for (i, &d) in diameters.iter().enumerate() {
        if let Some(v) = stopping_branch(d, prev, i + 1, params) {
            return (i + 1 == diameters.len()).then_some(v);
        }
        prev = d;
    }
    None
}

fn sample_batch<R: SlotRunner>(
    prob: &InverseProblem,
    params: &IrrsParams,
    j: usize,
    runner: &R,
) -> Result<Vec<SearchPoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(j as u64);
    let adm = prob.admissible();
    let configs: Vec<PotentialConfig> = (0..params.batch_size)
        .map(|_| sample_uniform(adm, &mut rng))
        .collect();
    let values = runner.run(configs.len(), |i| prob.phi(&configs[i]).ok());
    // Rejected points are replaced in slot order, after the rest of the batch
    // is drawn, so the common case never depends on the rejections.
    let mut batch = Vec::with_capacity(configs.len());
    for (p, v) in configs.into_iter().zip(values) {
        let (mut p, mut v) = (p, v);
        let mut tries = 0;
        while v.is_none() {
            tries += 1;
            if tries > MAX_RESAMPLES {
                return Err(Error::Validation(
                    "admissible set yields no evaluable configuration".into(),
                ));
            }
            p = sample_uniform(adm, &mut rng);
            v = prob.phi(&p).ok();
        }
        batch.push(SearchPoint::from_config(&p, v.unwrap_or(f64::INFINITY)));
    }
    Ok(batch)
}

/// Runs the random search to one of its stopping branches.
pub fn irrs<R: SlotRunner>(
    prob: &InverseProblem,
    params: &IrrsParams,
    local: &LocalParams,
    runner: &R,
) -> Result<StabilityReport> {
    params.validate()?;
    local.validate()?;
    let adm = prob.admissible();
    let (n_red, n_min) = (params.reduced_count(), params.minimizing_count());

    let mut previous: Vec<Minimizer> = Vec::new();
    let mut iterations = Vec::new();
    let mut d_prev = f64::INFINITY;
    let verdict = loop {
        let j = iterations.len() + 1;
        let batch = sample_batch(prob, params, j, runner)?;
        let starts = reduced_sample(&batch, n_red);
        let polished = runner.run(starts.len(), |slot| {
            let eval = prob.evaluator();
            let f = |p: &PotentialConfig| eval.value(p);
            lmm(&f, &starts[slot], adm, local)
        });
        let current: Vec<Minimizer> = polished
            .into_iter()
            .filter_map(|p| {
                p.to_config().ok().map(|potential| Minimizer {
                    potential,
                    phi: p.value,
                })
            })
            .collect();

        let mut pool = current.clone();
        pool.extend(previous.iter().cloned());
        let set = minimizing_set(&pool, n_min, n_red)?;
        let best_phi = set.members.first().map_or(f64::INFINITY, |m| m.phi);
        iterations.push(IterationRecord {
            iteration: j,
            diameter: set.diameter,
            d_av: set.d_av,
            best_phi,
            members: set.members,
        });
        if let Some(v) = stopping_branch(set.diameter, d_prev, j, params) {
            break v;
        }
        d_prev = set.diameter;
        previous = current;
    };

    let best = iterations
        .iter()
        .flat_map(|r| r.members.iter())
        .fold(None::<&Minimizer>, |acc, m| match acc {
            Some(a) if a.phi <= m.phi => Some(a),
            _ => Some(m),
        })
        .cloned()
        .ok_or(Error::DegeneratePool)?;
    Ok(StabilityReport {
        best,
        iterations,
        verdict,
    })
}
