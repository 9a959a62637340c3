//! Piecewise-constant, spherically symmetric potentials.
//!
//! A [`PotentialConfig`] with radii `r_1 <= ... <= r_M` and values
//! `q_1..q_M` is the function `q(r) = q_m` on `[r_{m-1}, r_m)`, with `r_0 = 0`
//! and `q = 0` for `r >= r_M`. Layers of zero width are allowed and have no
//! effect.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Layered potential. Serializes as `{"radii": [...], "values": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPotential")]
pub struct PotentialConfig {
    radii: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPotential {
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawPotential> for PotentialConfig {
    type Error = Error;

    fn try_from(raw: RawPotential) -> Result<Self> {
        make_potential(raw.radii, raw.values, false)
    }
}

/// Direction of a layer merge, see [`merge_layers`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeDirection {
    /// Layer `i-1` takes the value of layer `i`.
    Down,
    /// Layer `i+1` takes the value of layer `i`.
    Up,
}

/// Builds a potential from radii and layer values.
///
/// With `sort` set, unsorted radii are reordered and the values follow their
/// radius; otherwise unsorted radii are rejected.
pub fn make_potential(radii: Vec<f64>, values: Vec<f64>, sort: bool) -> Result<PotentialConfig> {
    if radii.len() != values.len() {
        return Err(Error::Validation(format!(
            "{} radii but {} values",
            radii.len(),
            values.len()
        )));
    }
    if radii.is_empty() {
        return Err(Error::Validation(String::from(
            "a potential needs at least one layer",
        )));
    }
    if let Some(r) = radii.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
        return Err(Error::Validation(format!(
            "radius {r} is not a finite nonnegative number"
        )));
    }
    if let Some(q) = values.iter().find(|q| !q.is_finite()) {
        return Err(Error::Validation(format!("layer value {q} is not finite")));
    }
    let sorted = radii.windows(2).all(|w| w[0] <= w[1]);
    if sorted {
        return Ok(PotentialConfig { radii, values });
    }
    if !sort {
        return Err(Error::Validation(String::from(
            "radii must be nondecreasing",
        )));
    }
    let mut pairs: Vec<(f64, f64)> = radii.into_iter().zip(values).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (radii, values) = pairs.into_iter().unzip();
    Ok(PotentialConfig { radii, values })
}

impl PotentialConfig {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        make_potential(radii, values, false)
    }

    /// Single layer of value `value` on `[0, radius)`.
    pub fn single(radius: f64, value: f64) -> Result<Self> {
        make_potential(alloc::vec![radius], alloc::vec![value], false)
    }

    /// The zero potential, represented as one zero-valued layer.
    pub fn zero() -> Self {
        PotentialConfig {
            radii: alloc::vec![0.0],
            values: alloc::vec![0.0],
        }
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn layer_count(&self) -> usize {
        self.radii.len()
    }

    /// Outer radius `r_M` of the support.
    pub fn support(&self) -> f64 {
        *self.radii.last().expect("potential has at least one layer")
    }

    /// Pointwise value `q(r)`.
    pub fn value_at(&self, r: f64) -> f64 {
        self.radii
            .iter()
            .position(|&ri| r < ri)
            .map_or(0.0, |i| self.values[i])
    }

    /// Same potential with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        PotentialConfig {
            radii: self.radii.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Splits layer `index` (0-based) at `at`, duplicating its value.
    pub fn split_layer(&self, index: usize, at: f64) -> Result<Self> {
        let len = self.layer_count();
        if index >= len {
            return Err(Error::IndexOutOfRange { index, len });
        }
        let inner = if index == 0 {
            0.0
        } else {
            self.radii[index - 1]
        };
        if !(at >= inner && at <= self.radii[index]) {
            return Err(Error::Validation(format!(
                "split point {at} outside layer {index}"
            )));
        }
        let mut out = self.clone();
        out.radii.insert(index, at);
        out.values.insert(index, self.values[index]);
        Ok(out)
    }
}

/// Box bounds of the search space: radii in `[0, radius]`, at most
/// `max_layers` layers, values in `[q_low, q_high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSet {
    pub radius: f64,
    pub max_layers: usize,
    pub q_low: f64,
    pub q_high: f64,
}

impl AdmissibleSet {
    pub fn new(radius: f64, max_layers: usize, q_low: f64, q_high: f64) -> Result<Self> {
        let adm = AdmissibleSet {
            radius,
            max_layers,
            q_low,
            q_high,
        };
        adm.validate()?;
        Ok(adm)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::Validation(format!(
                "support radius {} must be positive",
                self.radius
            )));
        }
        if self.max_layers == 0 {
            return Err(Error::Validation(String::from(
                "max_layers must be at least 1",
            )));
        }
        if !(self.q_low <= self.q_high) || !self.q_low.is_finite() || !self.q_high.is_finite() {
            return Err(Error::Validation(format!(
                "value bounds [{}, {}] are not an interval",
                self.q_low, self.q_high
            )));
        }
        Ok(())
    }

    /// Whether `p` lies in the box (layer count, radii and values).
    pub fn contains(&self, p: &PotentialConfig) -> bool {
        p.layer_count() <= self.max_layers
            && p.radii().iter().all(|&r| (0.0..=self.radius).contains(&r))
            && p.values()
                .iter()
                .all(|&q| (self.q_low..=self.q_high).contains(&q))
    }
}

/// Uniform draw on `[0, 1)` with 53 random bits.
pub(crate) fn unit_uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform sample from the admissible box.
///
/// Draws `M` radii on `[0, R]`, then `M` values on `[q_low, q_high]`, and sorts
/// the radii ascending with their values attached by draw index.
pub fn sample_uniform<R: RngCore + ?Sized>(adm: &AdmissibleSet, rng: &mut R) -> PotentialConfig {
    let m = adm.max_layers;
    let mut radii: Vec<f64> = (0..m).map(|_| adm.radius * unit_uniform(rng)).collect();
    let values: Vec<f64> = (0..m)
        .map(|_| adm.q_low + (adm.q_high - adm.q_low) * unit_uniform(rng))
        .collect();
    radii.sort_by(f64::total_cmp);
    PotentialConfig { radii, values }
}

/// `L2(R^3)` distance `(4π ∫ (p(r) - q(r))^2 r^2 dr)^(1/2)`, evaluated exactly
/// as a sum of shell integrals over the merged breakpoints.
pub fn distance(p: &PotentialConfig, q: &PotentialConfig) -> f64 {
    let (pr, pv) = (p.radii(), p.values());
    let (qr, qv) = (q.radii(), q.values());
    let (mut i, mut j) = (0usize, 0usize);
    let mut inner = 0.0f64;
    let mut sum = 0.0f64;
    while i < pr.len() || j < qr.len() {
        let next_p = pr.get(i).copied().unwrap_or(f64::INFINITY);
        let next_q = qr.get(j).copied().unwrap_or(f64::INFINITY);
        let outer = next_p.min(next_q);
        let a = pv.get(i).copied().unwrap_or(0.0);
        let b = qv.get(j).copied().unwrap_or(0.0);
        if outer > inner {
            let diff = a - b;
            sum += diff * diff * (outer * outer * outer - inner * inner * inner);
            inner = outer;
        }
        if next_p <= outer {
            i += 1;
        }
        if next_q <= outer {
            j += 1;
        }
    }
    libm::sqrt(4.0 * PI / 3.0 * sum)
}

/// `L2(R^3)` norm of `p`.
pub fn l2_norm(p: &PotentialConfig) -> f64 {
    distance(p, &PotentialConfig::zero())
}

/// Fuses two adjacent layers.
///
/// Layers are numbered from 1; layer `M+1` is the virtual zero layer on
/// `[r_M, support_radius]`. `Down` at `i` (`2 <= i <= M+1`) gives layer `i-1`
/// the value of layer `i`; `Up` at `i` (`1 <= i <= M`) gives layer `i+1` the
/// value of layer `i`. Merging down into the virtual layer drops layer `M`;
/// merging up into it extends layer `M` to `support_radius`.
pub fn merge_layers(
    p: &PotentialConfig,
    i: usize,
    direction: MergeDirection,
    support_radius: f64,
) -> Result<PotentialConfig> {
    let m = p.layer_count();
    let mut radii = p.radii.clone();
    let mut values = p.values.clone();
    match direction {
        MergeDirection::Down => {
            if !(2..=m + 1).contains(&i) {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: m + 1,
                });
            }
            if i == m + 1 {
                if m == 1 {
                    return Err(Error::Validation(String::from(
                        "cannot remove the only layer",
                    )));
                }
                radii.pop();
                values.pop();
            } else {
                radii.remove(i - 2);
                values.remove(i - 2);
            }
        }
        MergeDirection::Up => {
            if !(1..=m).contains(&i) {
                return Err(Error::IndexOutOfRange { index: i, len: m });
            }
            if i == m {
                radii[m - 1] = radii[m - 1].max(support_radius);
            } else {
                radii.remove(i - 1);
                values.remove(i);
            }
        }
    }
    Ok(PotentialConfig { radii, values })
}
