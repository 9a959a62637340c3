//! Riccati–Bessel functions.
//!
//! `j_l(x) = sqrt(πx/2) J_{l+1/2}(x)` and `n_l(x) = sqrt(πx/2) N_{l+1/2}(x)`,
//! normalized so that `j_l(x) ~ sin(x - lπ/2)` and `n_l(x) ~ -cos(x - lπ/2)`
//! for large `x`, with Wronskian `j_l n_l' - j_l' n_l = 1`.
//!
//! `n_l` is generated by upward recurrence. `j_l` is generated by Miller's
//! downward recurrence whenever the row reaches past `x/2`; otherwise both
//! run upward, which is stable in the oscillatory region.
//!
//! Internally every row is produced in scaled form: the true values are
//! `j = ĵ·2^(256e)` and `n = n̂·2^(-256e)` with one integer exponent `e` per
//! order. Because `j` and `n` carry opposite exponents, the products that
//! appear in the transfer matrices stay finite even when `j_l` underflows and
//! `n_l` overflows.

use alloc::vec::Vec;
use libm::{cbrt, ceil, cos, scalbn, sin, sqrt};

use crate::{Error, Result};

/// Binary exponent carried by one unit of the scale exponent.
pub(crate) const SCALE_BITS: i32 = 256;
/// `2^256`; recurrences are renormalized once a value exceeds this.
const RESCALE_ABOVE: f64 = 1.157_920_892_373_162e77;
/// Smallest argument accepted; below this the recurrence factors `(2l+1)/x`
/// themselves leave the floating-point range.
pub const MIN_ARGUMENT: f64 = 1e-150;

/// Whether a returned value is representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Range {
    Normal,
    /// The true value is below the normal floating-point range; value and
    /// derivative were flushed to zero.
    Underflow,
    /// The true value exceeds `f64::MAX`; value and derivative are signed
    /// infinities.
    Overflow,
}

/// A single Riccati–Bessel value with its derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiValue {
    pub value: f64,
    pub derivative: f64,
    pub range: Range,
}

/// `j_l`, `n_l` and their derivatives at one order and argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiPair {
    pub order: usize,
    pub argument: f64,
    pub value_j: f64,
    pub deriv_j: f64,
    pub value_n: f64,
    pub deriv_n: f64,
    /// `Normal` only when all four numbers are representable.
    pub range: Range,
}

/// Scaled row entry: `j = j·2^(256 exp)`, `n = n·2^(-256 exp)`, derivatives alike.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ScaledEntry {
    pub j: f64,
    pub dj: f64,
    pub n: f64,
    pub dn: f64,
    pub exp: i32,
}

/// Scratch buffers reused across rows.
#[derive(Debug, Default)]
pub(crate) struct RowWorkspace {
    g: Vec<f64>,
    gc: Vec<i32>,
    m: Vec<f64>,
    md: Vec<i32>,
}

fn check_argument(x: f64) -> Result<()> {
    if !(x >= MIN_ARGUMENT) || !x.is_finite() {
        return Err(Error::Domain {
            what: "Riccati-Bessel argument",
            value: x,
        });
    }
    Ok(())
}

/// Top order of the downward recurrence.
fn start_order(l_max: usize, x: f64) -> usize {
    let span = if (l_max as f64) > x {
        l_max as f64
    } else {
        ceil(x)
    };
    let offset = ceil(2.0 * sqrt(span)).max(20.0) + ceil(8.0 * cbrt(x));
    (span + offset) as usize
}

/// Fills `out` with scaled entries for `l = 0..=l_max`.
pub(crate) fn scaled_row(
    l_max: usize,
    x: f64,
    ws: &mut RowWorkspace,
    out: &mut Vec<ScaledEntry>,
) -> Result<()> {
    check_argument(x)?;
    let len = l_max + 1;
    let (s, c) = (sin(x), cos(x));

    ws.g.clear();
    ws.g.resize(len, 0.0);
    ws.gc.clear();
    ws.gc.resize(len, 0);
    ws.m.clear();
    ws.m.resize(len, 0.0);
    ws.md.clear();
    ws.md.resize(len, 0);

    // n_l, upward.
    ws.m[0] = -c;
    if l_max >= 1 {
        ws.m[1] = -c / x - s;
        let (mut prev, mut cur, mut d) = (ws.m[0], ws.m[1], 0i32);
        for l in 1..l_max {
            let next = (2 * l + 1) as f64 / x * cur - prev;
            prev = cur;
            cur = next;
            while cur.abs() > RESCALE_ABOVE {
                cur = scalbn(cur, -SCALE_BITS);
                prev = scalbn(prev, -SCALE_BITS);
                d += 1;
            }
            ws.m[l + 1] = cur;
            ws.md[l + 1] = d;
        }
    }

    // j_l: upward inside the oscillatory region, Miller's recurrence otherwise.
    if (l_max as f64) <= 0.5 * x {
        ws.g[0] = s;
        if l_max >= 1 {
            ws.g[1] = s / x - c;
        }
        for l in 1..l_max {
            ws.g[l + 1] = (2 * l + 1) as f64 / x * ws.g[l] - ws.g[l - 1];
        }
    } else {
        let top = start_order(l_max, x);
        let (mut above, mut cur, mut count) = (0.0f64, 1.0f64, 0i32);
        let mut l = top;
        loop {
            if l <= l_max {
                ws.g[l] = cur;
                ws.gc[l] = count;
            }
            if l == 0 {
                break;
            }
            let below = (2 * l + 1) as f64 / x * cur - above;
            above = cur;
            cur = below;
            l -= 1;
            while cur.abs() > RESCALE_ABOVE {
                cur = scalbn(cur, -SCALE_BITS);
                above = scalbn(above, -SCALE_BITS);
                count += 1;
            }
        }
        // Normalize against j_0 = sin x, or j_1 when sin x is near a node.
        let j1 = s / x - c;
        let reference = if x < 1.0 || s.abs() >= j1.abs() || l_max == 0 {
            0
        } else {
            1
        };
        let (target, base) = if reference == 0 { (s, 0) } else { (j1, 1) };
        let factor = target / ws.g[base];
        let base_count = ws.gc[base];
        for l in 0..len {
            ws.g[l] *= factor;
            ws.gc[l] -= base_count;
        }
    }

    out.clear();
    out.reserve(len);
    for l in 0..len {
        let exp = ws.gc[l];
        let j = ws.g[l];
        let n = scalbn(ws.m[l], SCALE_BITS * (ws.md[l] + exp));
        let (dj, dn) = if l == 0 {
            (scalbn(c, -SCALE_BITS * exp), scalbn(s, SCALE_BITS * exp))
        } else {
            let lx = l as f64 / x;
            let j_below = scalbn(ws.g[l - 1], SCALE_BITS * (ws.gc[l - 1] - exp));
            let n_below = scalbn(ws.m[l - 1], SCALE_BITS * (ws.md[l - 1] + exp));
            (j_below - lx * j, n_below - lx * n)
        };
        out.push(ScaledEntry { j, dj, n, dn, exp });
    }
    Ok(())
}

fn unscale(value: f64, derivative: f64, bits: i32) -> RiccatiValue {
    let (v, d) = (scalbn(value, bits), scalbn(derivative, bits));
    let tiny = |u: f64, orig: f64| orig != 0.0 && u.abs() < f64::MIN_POSITIVE;
    if !v.is_finite() || !d.is_finite() {
        let inf = |u: f64| {
            if u < 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        };
        RiccatiValue {
            value: inf(value),
            derivative: inf(derivative),
            range: Range::Overflow,
        }
    } else if tiny(v, value) || (v == 0.0 && tiny(d, derivative)) {
        RiccatiValue {
            value: 0.0,
            derivative: 0.0,
            range: Range::Underflow,
        }
    } else {
        RiccatiValue {
            value: v,
            derivative: d,
            range: Range::Normal,
        }
    }
}

impl ScaledEntry {
    pub(crate) fn j_value(&self) -> RiccatiValue {
        unscale(self.j, self.dj, SCALE_BITS * self.exp)
    }

    pub(crate) fn n_value(&self) -> RiccatiValue {
        unscale(self.n, self.dn, -SCALE_BITS * self.exp)
    }
}

fn entry(l: usize, x: f64) -> Result<ScaledEntry> {
    let mut ws = RowWorkspace::default();
    let mut row = Vec::new();
    scaled_row(l, x, &mut ws, &mut row)?;
    Ok(row[l])
}

/// `j_l(x)` and `dj_l/dx`.
pub fn riccati_j(l: usize, x: f64) -> Result<RiccatiValue> {
    Ok(entry(l, x)?.j_value())
}

/// `n_l(x)` and `dn_l/dx`.
pub fn riccati_n(l: usize, x: f64) -> Result<RiccatiValue> {
    Ok(entry(l, x)?.n_value())
}

/// Both functions for every order `0..=l_max` at one argument.
pub fn riccati_row(l_max: usize, x: f64) -> Result<Vec<RiccatiPair>> {
    let mut ws = RowWorkspace::default();
    let mut row = Vec::new();
    scaled_row(l_max, x, &mut ws, &mut row)?;
    Ok(row
        .iter()
        .enumerate()
        .map(|(order, e)| {
            let (j, n) = (e.j_value(), e.n_value());
            let range = match (j.range, n.range) {
                (Range::Normal, Range::Normal) => Range::Normal,
                (Range::Overflow, _) | (_, Range::Overflow) => Range::Overflow,
                _ => Range::Underflow,
            };
            RiccatiPair {
                order,
                argument: x,
                value_j: j.value,
                deriv_j: j.derivative,
                value_n: n.value,
                deriv_n: n.derivative,
                range,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn order_zero_closed_forms() {
        let j = riccati_j(0, FRAC_PI_2).unwrap();
        assert_relative_eq!(j.value, 1.0, epsilon = 1e-15);
        assert!(j.derivative.abs() < 1e-15);
        let n = riccati_n(0, PI).unwrap();
        assert_relative_eq!(n.value, 1.0, epsilon = 1e-15);
        assert!(n.derivative.abs() < 1e-15);
    }

    #[test]
    fn order_one_closed_forms() {
        let x = 1.0f64;
        let j = riccati_j(1, x).unwrap();
        assert_relative_eq!(j.value, x.sin() / x - x.cos(), max_relative = 1e-14);
        // d/dx [sin x / x - cos x] = cos x / x - sin x / x^2 + sin x
        let dj = x.cos() / x - x.sin() / (x * x) + x.sin();
        assert_relative_eq!(j.derivative, dj, max_relative = 1e-13);
        assert_relative_eq!(j.value, 0.301_168_678_939_756_8, max_relative = 1e-14);

        let n = riccati_n(1, x).unwrap();
        assert_relative_eq!(n.value, -x.cos() / x - x.sin(), max_relative = 1e-14);
        let dn = x.sin() / x + x.cos() / (x * x) - x.cos();
        assert_relative_eq!(n.derivative, dn, max_relative = 1e-13);
    }

    // Reference values computed with mpmath at 40 digits from
    // sqrt(pi x / 2) J_{l+1/2}(x) and sqrt(pi x / 2) Y_{l+1/2}(x).
    #[test]
    fn high_precision_reference_values() {
        let j = riccati_j(15, 27.0).unwrap();
        assert_relative_eq!(j.value, 1.090_413_060_255_024_3, max_relative = 1e-13);
        assert_relative_eq!(
            j.derivative,
            -0.153_488_106_225_243_64,
            max_relative = 1e-12
        );
        let n = riccati_n(15, 27.0).unwrap();
        assert_relative_eq!(n.value, 0.175_294_090_315_441_38, max_relative = 1e-12);
        assert_relative_eq!(n.derivative, 0.892_409_012_248_459_4, max_relative = 1e-13);

        let n = riccati_n(20, 5.0).unwrap();
        assert_relative_eq!(n.value, -4_633_975_701.528_771_7, max_relative = 1e-13);
        assert_relative_eq!(n.derivative, 17_931_114_349.398_524, max_relative = 1e-13);
        let j = riccati_j(20, 5.0).unwrap();
        assert_relative_eq!(j.value, 2.713_863_380_396_604e-11, max_relative = 1e-13);
        assert_relative_eq!(
            j.derivative,
            1.107_847_962_615_056_4e-10,
            max_relative = 1e-13
        );

        let j = riccati_j(40, 30.0).unwrap();
        assert_relative_eq!(j.value, 0.001_636_410_705_910_725_1, max_relative = 1e-12);
        let j = riccati_j(5, 100.0).unwrap();
        assert_relative_eq!(j.value, -0.929_014_893_490_756_6, max_relative = 1e-13);
        assert_relative_eq!(j.derivative, -0.371_495_438_986_972, max_relative = 1e-12);
    }

    #[test]
    fn extreme_small_argument_stays_finite() {
        let j = riccati_j(64, 1e-3).unwrap();
        assert_eq!(j.range, Range::Normal);
        assert_relative_eq!(j.value, 4.705_294_539_345_53e-305, max_relative = 1e-10);
        let n = riccati_n(64, 1e-3).unwrap();
        assert_eq!(n.range, Range::Normal);
        assert_relative_eq!(n.value, -1.647_492_610_846_472e299, max_relative = 1e-12);
        assert_relative_eq!(
            n.derivative,
            1.054_395_270_812_018_3e304,
            max_relative = 1e-12
        );
    }

    #[test]
    fn out_of_range_values_are_flagged_not_nan() {
        let j = riccati_j(128, 1e-3).unwrap();
        assert_eq!(j.range, Range::Underflow);
        assert_eq!((j.value, j.derivative), (0.0, 0.0));
        let n = riccati_n(128, 1e-3).unwrap();
        assert_eq!(n.range, Range::Overflow);
        assert_eq!(n.value, f64::NEG_INFINITY);
        assert!(!n.derivative.is_nan());
    }

    #[test]
    fn nonpositive_argument_is_a_domain_error() {
        assert!(matches!(riccati_j(3, 0.0), Err(Error::Domain { .. })));
        assert!(matches!(riccati_n(3, -1.0), Err(Error::Domain { .. })));
        assert!(riccati_row(3, f64::NAN).is_err());
    }

    #[test]
    fn row_matches_scalar_calls() {
        let row = riccati_row(0, 1.0).unwrap();
        assert_eq!(row.len(), 1);
        let p = row[0];
        let s = 1.0f64.sin();
        let c = 1.0f64.cos();
        assert_relative_eq!(p.value_j, s, max_relative = 1e-15);
        assert_relative_eq!(p.value_n, -c, max_relative = 1e-15);
        assert_relative_eq!(p.deriv_j, c, max_relative = 1e-15);
        assert_relative_eq!(p.deriv_n, s, max_relative = 1e-15);

        for &(l_max, x) in &[(2usize, 2.0f64), (32, 27.0), (40, 0.7), (10, 60.0)] {
            let row = riccati_row(l_max, x).unwrap();
            assert_eq!(row.len(), l_max + 1);
            for (l, p) in row.iter().enumerate() {
                let j = riccati_j(l, x).unwrap();
                let n = riccati_n(l, x).unwrap();
                assert_relative_eq!(p.value_j, j.value, max_relative = 1e-12);
                assert_relative_eq!(p.deriv_j, j.derivative, max_relative = 1e-12);
                assert_relative_eq!(p.value_n, n.value, max_relative = 1e-12);
                assert_relative_eq!(p.deriv_n, n.derivative, max_relative = 1e-12);
            }
        }
        let row = riccati_row(32, 27.0).unwrap();
        assert_relative_eq!(
            row[32].value_j,
            0.058_670_850_911_340_01,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            row[32].value_n,
            -12.927_124_846_690_144,
            max_relative = 1e-12
        );
    }
}
