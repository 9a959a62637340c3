//! Deterministic local phase of the search.
//!
//! - [`line_minimize`]: golden-section search over the whole feasible segment
//!   of a line through the box.
//! - [`basic_powell`]: Powell's method with the direction set reset to the
//!   coordinate axes on every sweep. Trial minimizations along each axis
//!   decide the order of the sweep, and a final search along the net
//!   displacement closes it.
//! - [`reduce`]: greedy merging of adjacent layers while `Φ` barely changes.
//! - [`lmm`]: reduce, minimize in the reduced space, reduce again.
//!
//! A layered configuration with `m` layers is the coordinate vector
//! `(r_1..r_m, q_1..q_m)`; see [`SearchPoint`].

use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, sqrt};
use serde::{Deserialize, Serialize};

use crate::potential::{
    make_potential, merge_layers, AdmissibleSet, MergeDirection, PotentialConfig,
};
use crate::{Error, Result};

const INV_GOLDEN: f64 = 0.618_033_988_749_894_9;
const MAX_GOLDEN_STEPS: usize = 200;
const SCAN_POINTS: usize = 12;

/// A function minimized over a box.
pub trait Objective {
    fn eval(&self, x: &[f64]) -> f64;

    /// Maps `x` to an equivalent canonical representative after a move.
    fn canonicalize(&self, _x: &mut [f64]) {}
}

impl<F: Fn(&[f64]) -> f64> Objective for F {
    fn eval(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

fn eval_finite<F: Objective + ?Sized>(f: &F, x: &[f64]) -> f64 {
    let v = f.eval(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Per-coordinate box.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Validation(
                "bounds must be matching intervals".into(),
            ));
        }
        Ok(Bounds { lower, upper })
    }

    /// Box of an `m`-layer configuration: radii in `[0, R]`, values in `[q_low, q_high]`.
    pub fn layers(adm: &AdmissibleSet, m: usize) -> Self {
        let mut lower = vec![0.0; m];
        let mut upper = vec![adm.radius; m];
        lower.extend(core::iter::repeat_n(adm.q_low, m));
        upper.extend(core::iter::repeat_n(adm.q_high, m));
        Bounds { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((v, l), u)| v >= l && v <= u)
    }

    fn clamp(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    /// Parameter interval `[lo, hi]` (containing 0) of `x + t d` inside the box.
    fn segment(&self, x: &[f64], d: &[f64]) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..x.len() {
            let (a, b) = ((self.lower[i] - x[i]) / d[i], (self.upper[i] - x[i]) / d[i]);
            if d[i] > 0.0 {
                lo = lo.max(a);
                hi = hi.min(b);
            } else if d[i] < 0.0 {
                lo = lo.max(b);
                hi = hi.min(a);
            }
        }
        (lo.min(0.0), hi.max(0.0))
    }
}

/// A point of the search space with its cached objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPoint {
    pub coords: Vec<f64>,
    pub value: f64,
}

impl SearchPoint {
    pub fn evaluate<F: Objective + ?Sized>(f: &F, coords: Vec<f64>) -> Self {
        let value = eval_finite(f, &coords);
        SearchPoint { coords, value }
    }

    /// `(r_1..r_m, q_1..q_m)` of a configuration.
    pub fn from_config(p: &PotentialConfig, value: f64) -> Self {
        let mut coords = p.radii().to_vec();
        coords.extend_from_slice(p.values());
        SearchPoint { coords, value }
    }

    /// Number of layers `m` encoded in the coordinates.
    pub fn layers(&self) -> usize {
        self.coords.len() / 2
    }

    /// Decodes the coordinates, sorting radii with their values attached.
    pub fn to_config(&self) -> Result<PotentialConfig> {
        decode(&self.coords)
    }
}

fn decode(coords: &[f64]) -> Result<PotentialConfig> {
    let m = coords.len() / 2;
    make_potential(coords[..m].to_vec(), coords[m..2 * m].to_vec(), true)
}

/// Sorts the radii block ascending, carrying each value with its radius.
fn sort_layers(coords: &mut [f64]) {
    let m = coords.len() / 2;
    if coords[..m].windows(2).all(|w| w[0] <= w[1]) {
        return;
    }
    let mut pairs: Vec<(f64, f64)> = (0..m).map(|i| (coords[i], coords[m + i])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (i, (r, q)) in pairs.into_iter().enumerate() {
        coords[i] = r;
        coords[m + i] = q;
    }
}

/// Adapts a functional on potentials to the coordinate space.
pub struct LayeredObjective<'a, G: ?Sized> {
    f: &'a G,
}

impl<'a, G: Fn(&PotentialConfig) -> f64 + ?Sized> LayeredObjective<'a, G> {
    pub fn new(f: &'a G) -> Self {
        LayeredObjective { f }
    }
}

impl<G: Fn(&PotentialConfig) -> f64 + ?Sized> Objective for LayeredObjective<'_, G> {
    fn eval(&self, x: &[f64]) -> f64 {
        match decode(x) {
            Ok(p) => (self.f)(&p),
            Err(_) => f64::INFINITY,
        }
    }

    fn canonicalize(&self, x: &mut [f64]) {
        sort_layers(x);
    }
}

/// Tuning of the local phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalParams {
    /// Relative tolerance of the layer-merge test.
    pub eps_r: f64,
    /// Final bracket width of each golden-section search, in coordinate units.
    pub line_tol: f64,
    /// Fractional-decrease stopping tolerance of the Powell sweeps.
    pub powell_ftol: f64,
    pub max_powell_iters: usize,
}

impl Default for LocalParams {
    fn default() -> Self {
        LocalParams {
            eps_r: 0.1,
            line_tol: 1e-6,
            powell_ftol: 1e-8,
            max_powell_iters: 200,
        }
    }
}

impl LocalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_r >= 0.0 && self.line_tol > 0.0 && self.powell_ftol > 0.0) {
            return Err(Error::Validation(
                "local-search tolerances must be positive".into(),
            ));
        }
        if self.max_powell_iters == 0 {
            return Err(Error::Validation(
                "max_powell_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Minimizes `f` along `origin + t·direction` within the box.
///
/// The feasible `t` interval is scanned at a few equispaced points, then
/// golden-section search narrows the bracket around the best of them to
/// width `tol`. The origin is returned unless some candidate is strictly
/// better.
pub fn line_minimize<F: Objective + ?Sized>(
    f: &F,
    origin: &SearchPoint,
    direction: &[f64],
    bounds: &Bounds,
    tol: f64,
) -> SearchPoint {
    let norm = sqrt(direction.iter().map(|d| d * d).sum::<f64>());
    if !(norm > 0.0) || !norm.is_finite() {
        return origin.clone();
    }
    let dir: Vec<f64> = direction.iter().map(|d| d / norm).collect();
    let (lo, hi) = bounds.segment(&origin.coords, &dir);
    if !(hi - lo > 0.0) {
        return origin.clone();
    }
    let mut scratch = origin.coords.clone();
    let at = |t: f64, buf: &mut Vec<f64>| {
        for ((b, x), d) in buf.iter_mut().zip(&origin.coords).zip(&dir) {
            *b = x + t * d;
        }
        bounds.clamp(buf);
    };
    let mut value_at = |t: f64| {
        at(t, &mut scratch);
        eval_finite(f, &scratch)
    };

    // Coarse scan of the whole segment picks the bracket for golden section.
    let step = (hi - lo) / (SCAN_POINTS + 1) as f64;
    let grid: Vec<(f64, f64)> = (0..=SCAN_POINTS + 1)
        .map(|i| {
            let t = if i == SCAN_POINTS + 1 {
                hi
            } else {
                lo + i as f64 * step
            };
            (t, if t == 0.0 { origin.value } else { value_at(t) })
        })
        .collect();
    let mut centre = 0;
    for (i, g) in grid.iter().enumerate() {
        if g.1 < grid[centre].1 {
            centre = i;
        }
    }
    let mut best = (0.0f64, origin.value);
    let consider = |t: f64, v: f64, best: &mut (f64, f64)| {
        if v < best.1 {
            *best = (t, v);
        }
    };
    for &(t, v) in &grid {
        consider(t, v, &mut best);
    }

    let (mut a, mut b) = (
        grid[centre.saturating_sub(1)].0,
        grid[(centre + 1).min(SCAN_POINTS + 1)].0,
    );
    let mut c = b - INV_GOLDEN * (b - a);
    let mut d = a + INV_GOLDEN * (b - a);
    let (mut fc, mut fd) = (value_at(c), value_at(d));
    for _ in 0..MAX_GOLDEN_STEPS {
        if b - a <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_GOLDEN * (b - a);
            fc = value_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_GOLDEN * (b - a);
            fd = value_at(d);
        }
    }
    consider(c, fc, &mut best);
    consider(d, fd, &mut best);
    if best.0 == 0.0 || best.1 >= origin.value {
        return origin.clone();
    }
    let mut coords = origin.coords.clone();
    at(best.0, &mut coords);
    f.canonicalize(&mut coords);
    SearchPoint {
        coords,
        value: best.1,
    }
}

/// Powell-type minimization with coordinate directions, ordered by trial
/// line minimizations and closed by a search along the net step.
pub fn basic_powell<F: Objective + ?Sized>(
    f: &F,
    start: SearchPoint,
    bounds: &Bounds,
    params: &LocalParams,
) -> SearchPoint {
    let n = start.coords.len();
    if n == 0 {
        return start;
    }
    let axis = |i: usize| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    };
    let mut base = start;
    for _ in 0..params.max_powell_iters {
        let trials: Vec<SearchPoint> = (0..n)
            .map(|i| line_minimize(f, &base, &axis(i), bounds, params.line_tol))
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| trials[a].value.total_cmp(&trials[b].value));

        // The first sequential move from the base equals its trial.
        let mut swept = trials[order[0]].clone();
        for &i in &order[1..] {
            swept = line_minimize(f, &swept, &axis(i), bounds, params.line_tol);
        }
        let net: Vec<f64> = swept
            .coords
            .iter()
            .zip(&base.coords)
            .map(|(a, b)| a - b)
            .collect();
        let mut next = line_minimize(f, &base, &net, bounds, params.line_tol);
        if swept.value < next.value {
            next = swept;
        }

        let (before, after) = (base.value, next.value);
        base = next;
        if !after.is_finite() {
            break;
        }
        if 2.0 * fabs(before - after) <= params.powell_ftol * (fabs(before) + fabs(after) + 1e-25) {
            break;
        }
    }
    base
}

/// Greedy layer merging.
///
/// Each pass evaluates every downward merge (`i = 2..=m+1`, the last one into
/// the virtual zero layer) and every upward merge (`i = 1..=m`), and applies
/// the one that changes `Φ` least if that change is at most `eps_r·Φ` of the
/// pass's starting configuration. Passes repeat until nothing qualifies or a
/// single layer is left.
pub fn reduce<G: Fn(&PotentialConfig) -> f64 + ?Sized>(
    f: &G,
    start: &SearchPoint,
    support_radius: f64,
    eps_r: f64,
) -> SearchPoint {
    let Ok(mut current) = start.to_config() else {
        return start.clone();
    };
    let mut value = start.value;
    loop {
        let m = current.layer_count();
        if m <= 1 {
            break;
        }
        let mut moves: Vec<(usize, MergeDirection)> =
            (2..=m + 1).map(|i| (i, MergeDirection::Down)).collect();
        moves.extend((1..=m).map(|i| (i, MergeDirection::Up)));
        let outer_open = current.support() < support_radius;

        let mut best: Option<(f64, PotentialConfig, f64)> = None;
        for (i, dir) in moves {
            if dir == MergeDirection::Up && i == m && !outer_open {
                continue;
            }
            let Ok(candidate) = merge_layers(&current, i, dir, support_radius) else {
                continue;
            };
            let v = f(&candidate);
            let change = fabs(value - v);
            if best.as_ref().is_none_or(|b| change < b.0) {
                best = Some((change, candidate, v));
            }
        }
        match best {
            Some((change, candidate, v)) if change <= eps_r * value => {
                current = candidate;
                value = v;
            }
            _ => break,
        }
    }
    SearchPoint::from_config(&current, value)
}

/// Local minimization method: reduce, Powell in the reduced space, reduce.
///
/// `start.value` must be `f` at `start`. The result never has a larger value
/// than the start: if the final merges cost more than the minimization gained,
/// the unreduced minimizer (or, failing that, the start) is returned.
pub fn lmm<G: Fn(&PotentialConfig) -> f64 + ?Sized>(
    f: &G,
    start: &SearchPoint,
    adm: &AdmissibleSet,
    params: &LocalParams,
) -> SearchPoint {
    let reduced = reduce(f, start, adm.radius, params.eps_r);
    let bounds = Bounds::layers(adm, reduced.layers());
    let polished = basic_powell(&LayeredObjective::new(f), reduced, &bounds, params);
    let merged = reduce(f, &polished, adm.radius, params.eps_r);
    [merged, polished]
        .into_iter()
        .find(|p| p.value <= start.value)
        .unwrap_or_else(|| start.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::target_shifts;
    use crate::objective::InverseProblem;
    use crate::potential::sample_uniform;
    use rand_chacha::ChaCha8Rng;
    use rand_core::SeedableRng;

    fn unit_box(n: usize, lo: f64, hi: f64) -> Bounds {
        Bounds::new(vec![lo; n], vec![hi; n]).unwrap()
    }

    #[test]
    fn line_search_finds_quadratic_minimum() {
        let c = [0.3, -0.7];
        let f = |x: &[f64]| (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
        let origin = SearchPoint::evaluate(&f, vec![-1.5, 1.9]);
        let dir = [c[0] - origin.coords[0], c[1] - origin.coords[1]];
        let p = line_minimize(&f, &origin, &dir, &unit_box(2, -2.0, 2.0), 1e-6);
        assert!((p.coords[0] - c[0]).abs() < 1e-6 && (p.coords[1] - c[1]).abs() < 1e-6);
        assert!(p.value <= origin.value);
    }

    #[test]
    fn line_search_clips_to_boundary() {
        let f = |x: &[f64]| x[0] + 0.5 * x[1];
        let origin = SearchPoint::evaluate(&f, vec![0.2, 0.1]);
        let p = line_minimize(&f, &origin, &[1.0, 0.0], &unit_box(2, -1.0, 1.0), 1e-6);
        assert_eq!(p.coords, vec![-1.0, 0.1]);
        // A zero direction or a degenerate segment leaves the point alone.
        assert_eq!(
            line_minimize(&f, &origin, &[0.0, 0.0], &unit_box(2, -1.0, 1.0), 1e-6),
            origin
        );
        let flat = Bounds::new(vec![0.2, -1.0], vec![0.2, 1.0]).unwrap();
        assert_eq!(line_minimize(&f, &origin, &[1.0, 0.0], &flat, 1e-6), origin);
    }

    #[test]
    fn line_search_on_multimodal_slice_matches_grid_scan() {
        let f = |x: &[f64]| (3.0 * x[0]).sin() + 0.1 * (x[0] - 1.0).powi(2) + 0.0 * x[1];
        let origin = SearchPoint::evaluate(&f, vec![0.0, 0.5]);
        let b = unit_box(2, -4.0, 4.0);
        let tol = 1e-6;
        let p = line_minimize(&f, &origin, &[1.0, 0.0], &b, tol);
        let (lo_v, hi_v) = (f(&[-4.0, 0.5]), f(&[4.0, 0.5]));
        assert!(p.value <= origin.value.min(lo_v).min(hi_v));
        // Grid oracle over the segment.
        let n = 10_000;
        let (mut best_t, mut best_v) = (0.0, f64::INFINITY);
        for i in 0..=n {
            let t = -4.0 + 8.0 * i as f64 / n as f64;
            let v = f(&[t, 0.5]);
            if v < best_v {
                best_v = v;
                best_t = t;
            }
        }
        assert!(p.value <= best_v + 1e-9);
        assert!((p.coords[0] - best_t).abs() <= 8.0 / n as f64 + 2.0 * tol);
    }

    #[test]
    fn powell_solves_convex_quadratic() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0] - 0.4, x[1] + 0.9);
            2.0 * a * a + 1.2 * a * b + b * b
        };
        let start = SearchPoint::evaluate(&f, vec![1.7, 1.1]);
        let p = basic_powell(&f, start, &unit_box(2, -2.0, 2.0), &LocalParams::default());
        assert!(
            (p.coords[0] - 0.4).abs() < 1e-4 && (p.coords[1] + 0.9).abs() < 1e-4,
            "{p:?}"
        );
    }

    #[test]
    fn powell_leaves_a_minimum_alone() {
        let f = |x: &[f64]| (x[0] - 0.5).powi(2) + (x[1] - 0.25).powi(2);
        let start = SearchPoint::evaluate(&f, vec![0.5, 0.25]);
        let p = basic_powell(
            &f,
            start.clone(),
            &unit_box(2, -1.0, 1.0),
            &LocalParams::default(),
        );
        assert_eq!(p, start);
    }

    #[test]
    fn powell_beats_random_search_on_rosenbrock() {
        let f = |x: &[f64]| {
            (0..3)
                .map(|i| 100.0 * (x[i + 1] - x[i] * x[i]).powi(2) + (1.0 - x[i]).powi(2))
                .sum::<f64>()
        };
        let b = unit_box(4, -2.0, 2.0);
        let start = SearchPoint::evaluate(&f, vec![-1.2, 1.0, -0.5, 0.8]);
        let p = basic_powell(&f, start.clone(), &b, &LocalParams::default());
        assert!(p.value <= start.value);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut best = f64::INFINITY;
        let mut x = [0.0; 4];
        for _ in 0..1_000_000 {
            for v in x.iter_mut() {
                *v = -2.0 + 4.0 * crate::potential::unit_uniform(&mut rng);
            }
            best = best.min(f(&x));
        }
        assert!(p.value <= best, "powell {} vs random {}", p.value, best);
    }

    fn layered<'a>(prob: &'a InverseProblem) -> impl Fn(&PotentialConfig) -> f64 + 'a {
        move |p: &PotentialConfig| prob.phi(p).unwrap_or(f64::INFINITY)
    }

    fn q1() -> PotentialConfig {
        PotentialConfig::new(
            vec![0.3, 1.0, 1.9, 2.2, 2.4],
            vec![4.0, 1.0, -2.0, 3.5, 1.0],
        )
        .unwrap()
    }

    fn adm() -> AdmissibleSet {
        AdmissibleSet::new(3.0, 8, -5.0, 5.0).unwrap()
    }

    #[test]
    fn reduce_merges_equal_neighbours() {
        let f = |p: &PotentialConfig| p.values().iter().sum::<f64>().abs() + 1.0;
        let p = PotentialConfig::new(vec![1.0, 2.0, 2.5], vec![2.0, 2.0, -1.0]).unwrap();
        let start = SearchPoint::from_config(&p, f(&p));
        // The only zero-change move fuses the two 2.0 layers.
        let r = reduce(
            &|q: &PotentialConfig| {
                if q.layer_count() == 2 && q.values() == [2.0, -1.0] {
                    f(&p)
                } else {
                    f(&p) + 10.0
                }
            },
            &start,
            3.0,
            0.1,
        );
        assert_eq!(r.layers(), 2);
        assert_eq!(r.to_config().unwrap().values(), &[2.0, -1.0]);
    }

    #[test]
    fn reduce_with_zero_threshold_keeps_distinct_layers() {
        let p = PotentialConfig::new(vec![1.0, 2.0], vec![2.0, 3.0]).unwrap();
        let f =
            |q: &PotentialConfig| 1.0 + q.layer_count() as f64 * 0.0 + crate::potential::l2_norm(q);
        let start = SearchPoint::from_config(&p, f(&p));
        let r = reduce(&f, &start, 3.0, 0.0);
        assert_eq!(r, start);
    }

    #[test]
    fn reduce_restores_split_reference() {
        let t = target_shifts(&q1(), 9.0).unwrap();
        let prob = InverseProblem::new(t, adm(), true).unwrap();
        let f = layered(&prob);
        for i in 0..5 {
            let inner = if i == 0 { 0.0 } else { q1().radii()[i - 1] };
            let split = q1()
                .split_layer(i, 0.5 * (inner + q1().radii()[i]))
                .unwrap();
            let start = SearchPoint::from_config(&split, f(&split));
            assert_eq!(start.value, f(&q1()));
            let r = reduce(&f, &start, 3.0, 0.1);
            assert_eq!(r.layers(), 5);
            assert_eq!(r.to_config().unwrap(), q1());
        }
    }

    #[test]
    fn lmm_keeps_exact_solution() {
        let t = target_shifts(&q1(), 9.0).unwrap();
        let prob = InverseProblem::new(t, adm(), true).unwrap();
        let f = layered(&prob);
        let start = SearchPoint::from_config(&q1(), f(&q1()));
        assert_eq!(start.value, 0.0);
        let out = lmm(&f, &start, &adm(), &LocalParams::default());
        assert_eq!(out.value, 0.0);
        assert_eq!(out.to_config().unwrap(), q1());
    }

    #[test]
    fn lmm_is_monotone_and_deterministic() {
        let truth =
            PotentialConfig::new(vec![0.5, 1.0, 1.5, 2.0], vec![2.0, 1.0, 2.0, 1.0]).unwrap();
        let t = target_shifts(&truth, 6.0).unwrap();
        let prob = InverseProblem::new(t, adm(), true).unwrap();
        let f = layered(&prob);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = LocalParams {
            max_powell_iters: 5,
            ..LocalParams::default()
        };
        for _ in 0..6 {
            let p = sample_uniform(&adm(), &mut rng);
            let start = SearchPoint::from_config(&p, f(&p));
            let a = lmm(&f, &start, &adm(), &params);
            let b = lmm(&f, &start, &adm(), &params);
            assert_eq!(a, b);
            assert!(a.value <= start.value);
            assert!(a.layers() <= start.layers());
            assert_eq!(a.value, f(&a.to_config().unwrap()));
        }
    }
}
