//! Phase shifts of layered potentials by interface matching.
//!
//! Inside layer `i` the regular radial solution is `A_i j_l(κ_i r) + B_i n_l(κ_i r)`
//! with `κ_i^2 = k^2 - q_i`. Continuity of the solution and its derivative at
//! `r_i` maps `(A_i, B_i)` to `(A_{i+1}, B_{i+1})` through a 2x2 matrix; starting
//! from `B_1 = 0` and ending outside the support with `κ = k`, the phase shift
//! is `δ(k, l) = -arctan(B/A)`.
//!
//! The recursion is carried in homogeneous coordinates `(A, B)`, renormalized
//! after every interface, so a vanishing denominator `α_11 + α_12 x` is a
//! regular point rather than a division by zero.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use libm::{atan2, scalbn, sqrt};
use serde::{Deserialize, Serialize};

use crate::potential::PotentialConfig;
use crate::special::{scaled_row, RowWorkspace, ScaledEntry, SCALE_BITS};
use crate::{Error, Result};

/// Default upper bound on the cutoff index returned by [`shift_count`].
pub const DEFAULT_SHIFT_CAP: usize = 128;
/// Relative size below which a shift counts as part of the negligible tail.
pub const TAIL_THRESHOLD: f64 = 1e-7;
/// Consecutive tail shifts required before the cutoff is declared.
pub const TAIL_RUN: usize = 3;
/// Layers whose outer radius is below this are treated as having zero width.
const NEGLIGIBLE_RADIUS: f64 = 1e-100;

/// Interface matrix `α` with its `1/κ_{i+1}` prefactor kept separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    /// `1/κ_{i+1}`.
    pub scale: f64,
}

impl TransferMatrix {
    pub fn determinant(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    /// `(A_{i+1}, B_{i+1}) = scale · α · (A_i, B_i)`.
    pub fn apply(&self, a: f64, b: f64) -> (f64, f64) {
        (
            self.scale * (self.a11 * a + self.a12 * b),
            self.scale * (self.a21 * a + self.a22 * b),
        )
    }
}

/// Phase shifts `δ(k, l)` for `l = 0..=cutoff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseShiftSet {
    pub k: f64,
    pub cutoff: usize,
    pub shifts: Vec<f64>,
}

impl PhaseShiftSet {
    pub fn new(k: f64, shifts: Vec<f64>) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::Domain {
                what: "wave number",
                value: k,
            });
        }
        if shifts.is_empty() {
            return Err(Error::Validation(
                "a phase-shift set needs at least l = 0".into(),
            ));
        }
        Ok(PhaseShiftSet {
            k,
            cutoff: shifts.len() - 1,
            shifts,
        })
    }

    /// `max_l |δ(k, l)|`.
    pub fn max_abs(&self) -> f64 {
        self.shifts.iter().fold(0.0f64, |m, d| m.max(d.abs()))
    }
}

/// Entries of `α` from scaled rows at `κ_i r` and `κ_{i+1} r`. The true
/// entries are
/// `a11·B^(ea-eb)`, `a12·B^(-ea-eb)`, `a21·B^(ea+eb)`, `a22·B^(eb-ea)`.
fn scaled_alpha(ka: f64, kb: f64, fa: &ScaledEntry, fb: &ScaledEntry) -> [f64; 4] {
    [
        kb * fa.j * fb.dn - ka * fa.dj * fb.n,
        kb * fa.n * fb.dn - ka * fa.dn * fb.n,
        ka * fa.dj * fb.j - kb * fa.j * fb.dj,
        ka * fa.dn * fb.j - kb * fa.n * fb.dj,
    ]
}

/// The interface matrix at radius `r` between local wave numbers
/// `kappa_prev` (inside) and `kappa_next` (outside).
pub fn transfer_matrix(
    l: usize,
    kappa_prev: f64,
    kappa_next: f64,
    r: f64,
) -> Result<TransferMatrix> {
    for (what, v) in [
        ("kappa_prev", kappa_prev),
        ("kappa_next", kappa_next),
        ("interface radius", r),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain { what, value: v });
        }
    }
    let mut ws = RowWorkspace::default();
    let (mut ra, mut rb) = (Vec::new(), Vec::new());
    scaled_row(l, kappa_prev * r, &mut ws, &mut ra)?;
    scaled_row(l, kappa_next * r, &mut ws, &mut rb)?;
    let (fa, fb) = (ra[l], rb[l]);
    let s = scaled_alpha(kappa_prev, kappa_next, &fa, &fb);
    let (ea, eb) = (fa.exp, fb.exp);
    Ok(TransferMatrix {
        a11: scalbn(s[0], SCALE_BITS * (ea - eb)),
        a12: scalbn(s[1], -SCALE_BITS * (ea + eb)),
        a21: scalbn(s[2], SCALE_BITS * (ea + eb)),
        a22: scalbn(s[3], SCALE_BITS * (eb - ea)),
        scale: 1.0 / kappa_next,
    })
}

/// One interface of the reduced layer list.
#[derive(Debug, Clone, Copy)]
struct Interface {
    radius: f64,
    kappa_in: f64,
    kappa_out: f64,
}

/// Local wave numbers, checking `k^2 - q_i > 0` in every layer.
fn kappas(p: &PotentialConfig, k: f64) -> Result<Vec<f64>> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain {
            what: "wave number",
            value: k,
        });
    }
    let energy = k * k;
    p.values()
        .iter()
        .enumerate()
        .map(|(layer, &q)| {
            let kappa2 = energy - q;
            if kappa2 > 0.0 {
                Ok(sqrt(kappa2))
            } else {
                Err(Error::UnsupportedRegime {
                    layer,
                    value: q,
                    energy,
                })
            }
        })
        .collect()
}

/// Interfaces that actually change the local wave number: zero-width layers
/// are dropped and equal-valued neighbours (the exterior included) are fused.
fn interfaces(p: &PotentialConfig, k: f64) -> Result<Vec<Interface>> {
    let kap = kappas(p, k)?;
    let mut layers: Vec<(f64, f64, f64)> = Vec::with_capacity(p.layer_count());
    let mut inner = 0.0f64;
    for ((&r, &q), &kappa) in p.radii().iter().zip(p.values()).zip(&kap) {
        if r <= inner || r < NEGLIGIBLE_RADIUS {
            continue;
        }
        inner = r;
        match layers.last_mut() {
            Some(last) if last.1 == q => last.0 = r,
            _ => layers.push((r, q, kappa)),
        }
    }
    while layers.last().is_some_and(|l| l.1 == 0.0) {
        layers.pop();
    }
    let mut out = Vec::with_capacity(layers.len());
    for (i, &(radius, _, kappa_in)) in layers.iter().enumerate() {
        let kappa_out = layers.get(i + 1).map_or(k, |next| next.2);
        out.push(Interface {
            radius,
            kappa_in,
            kappa_out,
        });
    }
    Ok(out)
}

/// Reusable buffers for repeated shift evaluations.
#[derive(Debug, Default)]
pub(crate) struct ShiftWorkspace {
    rows: RowWorkspace,
    inside: Vec<ScaledEntry>,
    outside: Vec<ScaledEntry>,
    state: Vec<(f64, f64, i32)>,
}

/// Writes `δ(k, l)` for `l = 0..=l_max` into `out`.
pub(crate) fn shifts_into(
    p: &PotentialConfig,
    k: f64,
    l_max: usize,
    ws: &mut ShiftWorkspace,
    out: &mut Vec<f64>,
) -> Result<()> {
    let faces = interfaces(p, k)?;
    out.clear();
    if faces.is_empty() {
        out.resize(l_max + 1, 0.0);
        return Ok(());
    }
    // (A, B, e): x = B/A · 2^(512 e), e being the scale exponent of the
    // outer argument at the previous interface.
    ws.state.clear();
    ws.state.resize(l_max + 1, (1.0, 0.0, 0));
    for face in &faces {
        let (ka, kb) = (face.kappa_in, face.kappa_out);
        scaled_row(l_max, ka * face.radius, &mut ws.rows, &mut ws.inside)?;
        scaled_row(l_max, kb * face.radius, &mut ws.rows, &mut ws.outside)?;
        for (l, st) in ws.state.iter_mut().enumerate() {
            let (fa, fb) = (&ws.inside[l], &ws.outside[l]);
            let (a, mut b, e_prev) = *st;
            if b != 0.0 {
                b = scalbn(b, 2 * SCALE_BITS * (e_prev - fa.exp));
            }
            let m = scaled_alpha(ka, kb, fa, fb);
            let na = m[0] * a + m[1] * b;
            let nb = m[2] * a + m[3] * b;
            let norm = na.abs().max(nb.abs());
            *st = if norm > 0.0 && norm.is_finite() {
                (na / norm, nb / norm, fb.exp)
            } else {
                (na, nb, fb.exp)
            };
        }
    }
    out.extend(
        ws.state
            .iter()
            .map(|&(a, b, e)| principal_shift(a, scalbn(b, 2 * SCALE_BITS * e))),
    );
    Ok(())
}

/// `-arctan(b/a)` in `(-π/2, π/2]`, well defined for `a = 0`.
fn principal_shift(a: f64, b: f64) -> f64 {
    let (a, b) = if a < 0.0 { (-a, -b) } else { (a, b) };
    let theta = atan2(b, a);
    let delta = -theta;
    if delta <= -FRAC_PI_2 {
        delta + core::f64::consts::PI
    } else {
        delta
    }
}

/// `δ(k, l)` for a single angular momentum.
pub fn phase_shift(p: &PotentialConfig, k: f64, l: usize) -> Result<f64> {
    let mut ws = ShiftWorkspace::default();
    let mut out = Vec::new();
    shifts_into(p, k, l, &mut ws, &mut out)?;
    Ok(out[l])
}

/// `δ(k, l)` for every `l = 0..=l_max`, without cutoff detection.
pub fn phase_shift_range(p: &PotentialConfig, k: f64, l_max: usize) -> Result<Vec<f64>> {
    let mut ws = ShiftWorkspace::default();
    let mut out = Vec::new();
    shifts_into(p, k, l_max, &mut ws, &mut out)?;
    Ok(out)
}

/// The shifts up to the cutoff chosen by [`shift_count`], truncated at `l_max`.
pub fn phase_shifts(p: &PotentialConfig, k: f64, l_max: usize) -> Result<PhaseShiftSet> {
    let n = shift_count(p, k)?.min(l_max);
    PhaseShiftSet::new(k, phase_shift_range(p, k, n)?)
}

/// Cutoff index `N` for the best-fit functional.
///
/// Scanning upward from `l = 0`, the tail begins once three consecutive shifts
/// satisfy `|δ(k, l)| < 1e-7 |δ(k, 0)|`; `N` is the last index before the third
/// of them. If `δ(k, 0) = 0` the largest shift up to the cap is the reference,
/// and a potential with no nonzero shift gets `N = 0`.
pub fn shift_count(p: &PotentialConfig, k: f64) -> Result<usize> {
    shift_count_with_cap(p, k, DEFAULT_SHIFT_CAP)
}

pub fn shift_count_with_cap(p: &PotentialConfig, k: f64, cap: usize) -> Result<usize> {
    let all = phase_shift_range(p, k, cap)?;
    Ok(cutoff_from_tail(&all, cap))
}

fn cutoff_from_tail(shifts: &[f64], cap: usize) -> usize {
    let reference = if shifts[0] != 0.0 {
        shifts[0].abs()
    } else {
        shifts
            .iter()
            .take(cap + 1)
            .fold(0.0f64, |m, d| m.max(d.abs()))
    };
    if reference == 0.0 {
        return 0;
    }
    let threshold = TAIL_THRESHOLD * reference;
    let mut run = 0;
    for (l, d) in shifts.iter().enumerate().take(cap + 1) {
        if d.abs() < threshold {
            run += 1;
            if run == TAIL_RUN {
                return l - 1;
            }
        } else {
            run = 0;
        }
    }
    cap
}

/// Shifts and cutoff of a reference potential, as used for targets.
///
/// The row is recomputed at its own length so that evaluating `Φ` at `p`
/// against these targets reproduces them bit for bit.
pub fn target_shifts(p: &PotentialConfig, k: f64) -> Result<PhaseShiftSet> {
    phase_shifts(p, k, DEFAULT_SHIFT_CAP)
}

/// Homogeneous state after each interface; exposed for tests of the recursion.
pub fn recursion_states(p: &PotentialConfig, k: f64, l: usize) -> Result<Vec<(f64, f64)>> {
    let faces = interfaces(p, k)?;
    let mut state = (1.0, 0.0);
    let mut out = vec![state];
    for f in faces {
        let t = transfer_matrix(l, f.kappa_in, f.kappa_out, f.radius)?;
        state = t.apply(state.0, state.1);
        out.push(state);
    }
    Ok(out)
}
