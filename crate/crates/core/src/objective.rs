//! Best-fit functional and the noise model for target shifts.
//!
//! `Φ(q) = Σ |δ(k,l) - δ̃(k,l)|^2 / Σ |δ̃(k,l)|^2`, summed over `l = 0..=N`
//! (or `1..=N` when `include_l0` is off), where `δ̃` are the target shifts.

use alloc::vec::Vec;
use core::cell::RefCell;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::forward::{shifts_into, PhaseShiftSet, ShiftWorkspace};
use crate::potential::{unit_uniform, AdmissibleSet, PotentialConfig};
use crate::{Error, Result};

/// Targets, search box and summation range of one identification.
#[derive(Debug, Clone)]
pub struct InverseProblem {
    k: f64,
    targets: PhaseShiftSet,
    adm: AdmissibleSet,
    include_l0: bool,
    denominator: f64,
}

impl InverseProblem {
    /// Validates the box against the solver regime (`q_high < k^2`) and the
    /// targets against a zero denominator.
    pub fn new(targets: PhaseShiftSet, adm: AdmissibleSet, include_l0: bool) -> Result<Self> {
        adm.validate()?;
        let k = targets.k;
        if !(adm.q_high < k * k) {
            return Err(Error::UnsupportedRegime {
                layer: 0,
                value: adm.q_high,
                energy: k * k,
            });
        }
        let first = usize::from(!include_l0);
        let denominator: f64 = targets.shifts.iter().skip(first).map(|d| d * d).sum();
        if !(denominator > 0.0) {
            return Err(Error::Validation(
                "target shifts vanish on the summation range".into(),
            ));
        }
        Ok(InverseProblem {
            k,
            targets,
            adm,
            include_l0,
            denominator,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn targets(&self) -> &PhaseShiftSet {
        &self.targets
    }

    pub fn admissible(&self) -> &AdmissibleSet {
        &self.adm
    }

    pub fn include_l0(&self) -> bool {
        self.include_l0
    }

    /// `Φ(p)`.
    pub fn phi(&self, p: &PotentialConfig) -> Result<f64> {
        let mut ws = ShiftWorkspace::default();
        let mut buf = Vec::new();
        self.phi_with(p, &mut ws, &mut buf)
    }

    pub(crate) fn phi_with(
        &self,
        p: &PotentialConfig,
        ws: &mut ShiftWorkspace,
        buf: &mut Vec<f64>,
    ) -> Result<f64> {
        shifts_into(p, self.k, self.targets.cutoff, ws, buf)?;
        let first = usize::from(!self.include_l0);
        let numerator: f64 = buf
            .iter()
            .zip(&self.targets.shifts)
            .skip(first)
            .map(|(d, t)| (d - t) * (d - t))
            .sum();
        Ok(numerator / self.denominator)
    }

    /// A reusable evaluator that keeps its scratch buffers between calls.
    pub fn evaluator(&self) -> PhiEvaluator<'_> {
        PhiEvaluator {
            problem: self,
            scratch: RefCell::new((ShiftWorkspace::default(), Vec::new())),
        }
    }
}

/// `Φ` with cached buffers; not shared between threads.
#[derive(Debug)]
pub struct PhiEvaluator<'a> {
    problem: &'a InverseProblem,
    scratch: RefCell<(ShiftWorkspace, Vec<f64>)>,
}

impl PhiEvaluator<'_> {
    pub fn phi(&self, p: &PotentialConfig) -> Result<f64> {
        let mut guard = self.scratch.borrow_mut();
        let (ws, buf) = &mut *guard;
        self.problem.phi_with(p, ws, buf)
    }

    /// `Φ(p)`, with configurations the solver rejects mapped to `+∞`.
    pub fn value(&self, p: &PotentialConfig) -> f64 {
        self.phi(p).unwrap_or(f64::INFINITY)
    }
}

/// `Φ(p)` for `prob`.
pub fn phi(p: &PotentialConfig, prob: &InverseProblem) -> Result<f64> {
    prob.phi(p)
}

/// Relative noise level `h` and the seed of its random stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub h: f64,
    pub seed: u64,
}

/// `δ_h(k,l) = δ(k,l) + (0.5 - z_l) · h · δ_max`, with independent uniform
/// `z_l` and `δ_max` the largest clean shift magnitude.
pub fn add_noise(targets: &PhaseShiftSet, spec: NoiseSpec) -> Result<PhaseShiftSet> {
    if !(spec.h >= 0.0) || !spec.h.is_finite() {
        return Err(Error::Domain {
            what: "noise level",
            value: spec.h,
        });
    }
    if spec.h == 0.0 {
        return Ok(targets.clone());
    }
    let delta_max = targets.max_abs();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shifts = targets
        .shifts
        .iter()
        .map(|d| d + (0.5 - unit_uniform(&mut rng)) * spec.h * delta_max)
        .collect();
    Ok(PhaseShiftSet {
        k: targets.k,
        cutoff: targets.cutoff,
        shifts,
    })
}
