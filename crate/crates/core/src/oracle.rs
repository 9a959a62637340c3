//! Variable-phase cross-check for the transfer-matrix solver.
//!
//! The phase function obeys
//! `δ_l'(r) = -(q(r)/k) [j_l(kr) cos δ_l - n_l(kr) sin δ_l]^2`, `δ_l(0) = 0`,
//! and `δ_l(r_M)` is the phase shift. It is integrated layer by layer with an
//! adaptive Dormand–Prince 5(4) scheme, restarting at every discontinuity of
//! `q`. Slow compared to [`crate::forward`]; meant for verification only.

use alloc::format;
use core::f64::consts::{FRAC_PI_2, PI};

use libm::{cos, fabs, floor, pow, sin};

use crate::potential::PotentialConfig;
use crate::special::{riccati_j, riccati_n, Range};
use crate::{Error, Result};

const REL_TOL: f64 = 1e-11;
const ABS_TOL: f64 = 1e-14;
const MAX_STEPS: usize = 200_000;

fn rhs(q: f64, k: f64, l: usize, r: f64, delta: f64) -> Result<f64> {
    let x = k * r;
    let j = riccati_j(l, x)?;
    let n = riccati_n(l, x)?;
    let s = sin(delta);
    // n_l can overflow only where sin δ has underflowed to zero.
    let n_term = if s == 0.0 || n.range == Range::Overflow && fabs(s) < f64::MIN_POSITIVE {
        0.0
    } else {
        n.value * s
    };
    let u = j.value * cos(delta) - n_term;
    Ok(-q / k * u * u)
}

/// Integrates `δ' = f(r, δ)` across `[a, b]` with constant `q`.
fn integrate_layer(q: f64, k: f64, l: usize, a: f64, b: f64, mut delta: f64) -> Result<f64> {
    // Dormand–Prince tableau.
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    if q == 0.0 || b <= a {
        return Ok(delta);
    }
    let mut r = a;
    let mut h = ((b - a) / 16.0).min(0.05 / k);
    let mut stages = [0.0f64; 7];
    for _ in 0..MAX_STEPS {
        if r >= b {
            return Ok(delta);
        }
        if r + h > b {
            h = b - r;
        }
        for s in 0..7 {
            let mut y = delta;
            for (m, coeff) in A[s].iter().enumerate().take(s) {
                y += h * coeff * stages[m];
            }
            stages[s] = rhs(q, k, l, r + C[s] * h, y)?;
        }
        let mut high = delta;
        let mut low = delta;
        for s in 0..7 {
            high += h * B5[s] * stages[s];
            low += h * B4[s] * stages[s];
        }
        let err = fabs(high - low);
        let tol = ABS_TOL + REL_TOL * fabs(high).max(fabs(delta));
        if err <= tol {
            r += h;
            delta = high;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            0.9 * pow(tol / err, 0.2)
        };
        h *= factor.clamp(0.2, 5.0);
        if h < 1e-14 * (b - a) {
            return Err(Error::Oracle(format!("step size collapsed at r = {r}")));
        }
    }
    Err(Error::Oracle(format!(
        "more than {MAX_STEPS} steps in layer [{a}, {b}]"
    )))
}

/// `δ(k, l)` by the variable-phase equation, reduced modulo `π` into
/// `(-π/2, π/2]`.
pub fn oracle_phase_shift(p: &PotentialConfig, k: f64, l: usize) -> Result<f64> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain {
            what: "wave number",
            value: k,
        });
    }
    for (layer, &q) in p.values().iter().enumerate() {
        if !(k * k - q > 0.0) {
            return Err(Error::UnsupportedRegime {
                layer,
                value: q,
                energy: k * k,
            });
        }
    }
    let support = p.support();
    if support <= 0.0 {
        return Ok(0.0);
    }
    // The phase near the origin is O(r^(2l+3)); starting slightly off zero
    // avoids the singular n_l(0).
    let start = 1e-6 * support;
    let mut delta = 0.0;
    let mut inner = start;
    for (&r, &q) in p.radii().iter().zip(p.values()) {
        if r > inner {
            delta = integrate_layer(q, k, l, inner, r, delta)?;
            inner = r;
        }
    }
    Ok(wrap_half_open(delta))
}

/// Reduces an angle modulo `π` into `(-π/2, π/2]`.
pub fn wrap_half_open(delta: f64) -> f64 {
    if delta > -FRAC_PI_2 && delta <= FRAC_PI_2 {
        return delta;
    }
    let shifted = delta + FRAC_PI_2;
    // in [0, π), with 0 sent to π
    let mut w = shifted - PI * floor(shifted / PI);
    if w == 0.0 {
        w = PI;
    }
    w - FRAC_PI_2
}

/// Distance between two phases modulo `π`.
pub fn phase_gap(a: f64, b: f64) -> f64 {
    let d = fabs(wrap_half_open(a - b));
    d.min(PI - d)
}
