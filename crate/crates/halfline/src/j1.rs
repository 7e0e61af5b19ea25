//! Piecewise-linear cadlag paths and a computable Skorokhod-style distance.
//!
//! Convergence of the scaled processes is a statement about cadlag paths
//! under time deformations: two paths are close when an increasing
//! homeomorphism close to the identity aligns them. [`j1_distance`] builds
//! such a warp by matching jumps above a floor in order of occurrence,
//! pinning matched jump times to each other, pinning the endpoints, and
//! interpolating linearly between pins. It reports both the time modulus
//! `sup |warp(t) - t|` and the value modulus `sup |w1(warp(t)) - w2(t)|`;
//! the distance is their maximum. With the jump floor at the synthesis
//! truncation, every retained jump participates in the matching.
//!
//! The warp is a heuristic, not the Skorokhod infimum: it upper-bounds the
//! true distance, exactly reproduces it on step paths with equal jump
//! counts, and satisfies the triangle inequality within a factor-two slack
//! from the warp-composition bound.

use crate::error::{Error, Result};
use crate::synthesis::{Staircase, SyntheticPath};

/// A cadlag path on `[0, end_time]`, linear between knots, constant after
/// the last knot. Each knot carries its left limit and right value; they
/// differ exactly at jumps.
#[derive(Debug, Clone)]
pub struct CadlagPath {
    times: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl CadlagPath {
    /// Builds a path from `(time, left limit, right value)` knots; times
    /// must start at 0 (where the two values coincide) and strictly
    /// increase.
    pub fn new(knots: Vec<(f64, f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Param("a cadlag path needs at least one knot".into()));
        }
        if knots[0].0 != 0.0 || knots[0].1 != knots[0].2 {
            return Err(Error::Param(
                "the first knot must sit at time 0 with equal limits".into(),
            ));
        }
        let mut times = Vec::with_capacity(knots.len());
        let mut left = Vec::with_capacity(knots.len());
        let mut right = Vec::with_capacity(knots.len());
        for (t, l, r) in knots {
            if !t.is_finite() || !l.is_finite() || !r.is_finite() {
                return Err(Error::Param("cadlag knots must be finite".into()));
            }
            if let Some(&last) = times.last() {
                if t <= last {
                    return Err(Error::Param("cadlag knot times must increase".into()));
                }
            }
            times.push(t);
            left.push(l);
            right.push(r);
        }
        Ok(CadlagPath { times, left, right })
    }

    /// A continuous path through `(times, values)`.
    pub fn from_polyline(times: &[f64], values: &[f64]) -> Result<Self> {
        CadlagPath::new(
            times
                .iter()
                .zip(values)
                .map(|(&t, &v)| (t, v, v))
                .collect(),
        )
    }

    /// A piecewise-constant path starting at `start`, jumping to each new
    /// level at its time, extended to `t_end`.
    pub fn step_path(start: f64, jumps: &[(f64, f64)], t_end: f64) -> Result<Self> {
        let mut knots = vec![(0.0, start, start)];
        let mut level = start;
        for &(t, new_level) in jumps {
            knots.push((t, level, new_level));
            level = new_level;
        }
        if t_end > knots.last().unwrap().0 {
            knots.push((t_end, level, level));
        }
        CadlagPath::new(knots)
    }

    /// The staircase as a cadlag path on `[0, s_horizon]`; linear drift
    /// stretches are reproduced exactly by the knot interpolation.
    pub fn from_staircase(eta: &Staircase, s_horizon: f64) -> Result<Self> {
        let mut knots = vec![(0.0, 0.0, 0.0)];
        for (&s, _) in eta
            .jump_times()
            .iter()
            .zip(eta.jump_sizes())
            .filter(|&(&s, _)| s <= s_horizon)
        {
            knots.push((s, eta.value_left(s), eta.value(s)));
        }
        if s_horizon > knots.last().unwrap().0 {
            let v = eta.value(s_horizon);
            knots.push((s_horizon, v, v));
        }
        CadlagPath::new(knots)
    }

    /// The synthesized path as a cadlag path on `[0, t_horizon]`: an upward
    /// jump to the entry level at each excursion start, the excursion
    /// polyline inside, zero on the drift stretches.
    pub fn from_synthetic(sp: &SyntheticPath) -> Result<Self> {
        let t_end = sp.t_horizon;
        let mut knots: Vec<(f64, f64, f64)> = vec![(0.0, 0.0, 0.0)];
        for (p, &start) in sp.points.iter().zip(&sp.starts) {
            if start >= t_end {
                break;
            }
            let v0 = p.e.values()[0];
            if start > knots.last().unwrap().0 {
                knots.push((start, 0.0, v0));
            } else {
                // Excursion beginning exactly at the previous knot: merge
                // into it instead of duplicating the time.
                let n = knots.len();
                knots[n - 1].2 = v0;
                if n == 1 {
                    knots[0].1 = v0;
                }
            }
            for (&dt, &v) in p.e.times().iter().zip(p.e.values()).skip(1) {
                let t = start + dt;
                if t >= t_end {
                    let v_end = p.e.value_at(t_end - start);
                    knots.push((t_end, v_end, v_end));
                    return CadlagPath::new(knots);
                }
                knots.push((t, v, v));
            }
        }
        if t_end > knots.last().unwrap().0 {
            knots.push((t_end, 0.0, 0.0));
        }
        CadlagPath::new(knots)
    }

    /// The path with time multiplied by `t_factor` and values by `v_factor`.
    pub fn scaled(&self, t_factor: f64, v_factor: f64) -> Result<Self> {
        if !t_factor.is_finite() || t_factor <= 0.0 || !v_factor.is_finite() {
            return Err(Error::Param(format!(
                "bad scale factors ({t_factor}, {v_factor})"
            )));
        }
        CadlagPath::new(
            self.times
                .iter()
                .zip(self.left.iter().zip(&self.right))
                .map(|(&t, (&l, &r))| (t * t_factor, l * v_factor, r * v_factor))
                .collect(),
        )
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn knot_times(&self) -> &[f64] {
        &self.times
    }

    /// Right-continuous value at `t`, constant beyond the last knot.
    pub fn value(&self, t: f64) -> f64 {
        if t <= self.times[0] {
            return self.right[0];
        }
        let k = self.times.partition_point(|&u| u <= t);
        if k == self.times.len() {
            return *self.right.last().unwrap();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (v0, v1) = (self.right[k - 1], self.left[k]);
        v0 + (v1 - v0) * ((t - t0) / (t1 - t0))
    }

    /// Left limit at `t`; equals the value except at jump knots.
    pub fn left_limit(&self, t: f64) -> f64 {
        if t <= self.times[0] {
            return self.left[0];
        }
        let k = self.times.partition_point(|&u| u < t);
        if k == self.times.len() {
            return *self.right.last().unwrap();
        }
        if self.times[k] == t {
            return self.left[k];
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (v0, v1) = (self.right[k - 1], self.left[k]);
        v0 + (v1 - v0) * ((t - t0) / (t1 - t0))
    }

    /// Jump times and signed sizes with `|size| >= floor`.
    pub fn jumps(&self, floor: f64) -> Vec<(f64, f64)> {
        self.times
            .iter()
            .zip(self.left.iter().zip(&self.right))
            .skip(1)
            .filter_map(|(&t, (&l, &r))| {
                if (r - l).abs() >= floor {
                    Some((t, r - l))
                } else {
                    None
                }
            })
            .collect()
    }
}

/// Outcome of the warp construction between two cadlag paths.
#[derive(Debug, Clone)]
pub struct J1Report {
    /// Matched jump time pairs `(time in w1, time in w2)`.
    pub matched: Vec<(f64, f64)>,
    /// Floor-exceeding jumps of w1 left unmatched.
    pub surplus_1: usize,
    /// Floor-exceeding jumps of w2 left unmatched.
    pub surplus_2: usize,
    /// Warp pins `(t in w2, warped t in w1)`, including both endpoints.
    pub pins: Vec<(f64, f64)>,
    /// `sup |warp(t) - t|` over the evaluation window.
    pub time_modulus: f64,
    /// `sup |w1(warp(t)) - w2(t)|` over one-sided limits on the window.
    pub value_modulus: f64,
}

impl J1Report {
    pub fn distance(&self) -> f64 {
        self.time_modulus.max(self.value_modulus)
    }
}

/// Piecewise-linear warp through `pins`, slope 1 beyond the last pin;
/// segments whose pins lie on the diagonal map exactly to the identity.
fn warp(pins: &[(f64, f64)], t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let k = pins.partition_point(|&(x, _)| x < t);
    if k == pins.len() {
        let (x, y) = pins[pins.len() - 1];
        return y + (t - x);
    }
    if pins[k].0 == t {
        return pins[k].1;
    }
    let (x0, y0) = pins[k - 1];
    let (x1, y1) = pins[k];
    if x0 == y0 && x1 == y1 {
        return t;
    }
    y0 + (y1 - y0) * ((t - x0) / (x1 - x0))
}

/// Matches floor-exceeding jumps of the two paths in order, pins matched
/// times and the endpoints `min(end knot, t_max)`, and measures both warp
/// moduli on `[0, t_max]`.
pub fn j1_distance(
    w1: &CadlagPath,
    w2: &CadlagPath,
    t_max: f64,
    jump_floor: f64,
) -> Result<J1Report> {
    if !t_max.is_finite() || t_max <= 0.0 {
        return Err(Error::Param(format!(
            "comparison window must be positive, got {t_max}"
        )));
    }
    if !jump_floor.is_finite() || jump_floor <= 0.0 {
        return Err(Error::Param(format!(
            "jump floor must be positive, got {jump_floor}"
        )));
    }
    let e1 = w1.end_time().min(t_max);
    let e2 = w2.end_time().min(t_max);
    let j1: Vec<(f64, f64)> = w1
        .jumps(jump_floor)
        .into_iter()
        .filter(|&(t, _)| t < e1)
        .collect();
    let j2: Vec<(f64, f64)> = w2
        .jumps(jump_floor)
        .into_iter()
        .filter(|&(t, _)| t < e2)
        .collect();
    let n_match = j1.len().min(j2.len());
    let mut matched = Vec::with_capacity(n_match);
    let mut pins = vec![(0.0, 0.0)];
    for k in 0..n_match {
        let (t1, _) = j1[k];
        let (t2, _) = j2[k];
        let &(lx, ly) = pins.last().unwrap();
        // Keep the warp strictly increasing; drop pairs that would bend it
        // backwards (they still count as matched for bookkeeping).
        if t2 > lx && t1 > ly {
            pins.push((t2, t1));
        }
        matched.push((t1, t2));
    }
    pins.push((e2, e1));
    // A straight-line warp's deviation from the diagonal on each segment is
    // maximal at the segment ends, so the pins carry the time modulus; the
    // slope-one extension beyond the last pin keeps the deviation constant.
    let mut time_modulus = pins
        .iter()
        .map(|&(x, y)| (y - x).abs())
        .fold(0.0f64, f64::max);
    if t_max > e2 {
        time_modulus = time_modulus.max((e1 - e2).abs());
    }
    // The difference t -> w1(warp(t)) - w2(t) is piecewise linear between
    // breakpoints, so its sup lives on the breakpoint set: knots of w2,
    // preimages of knots of w1, and the pins, capped at t_max.
    let mut eval: Vec<f64> = Vec::new();
    for &t in w2.knot_times() {
        if t <= t_max {
            eval.push(t);
        }
    }
    let inv_pins: Vec<(f64, f64)> = pins.iter().map(|&(x, y)| (y, x)).collect();
    for &u in w1.knot_times() {
        let t = warp(&inv_pins, u);
        if t <= t_max {
            eval.push(t);
        }
    }
    for &(x, _) in &pins {
        eval.push(x);
    }
    eval.push(t_max);
    eval.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eval.dedup();
    let mut value_modulus = 0.0f64;
    for &t in &eval {
        let u = warp(&pins, t);
        let d_right = (w1.value(u) - w2.value(t)).abs();
        let d_left = (w1.left_limit(u) - w2.left_limit(t)).abs();
        value_modulus = value_modulus.max(d_right).max(d_left);
    }
    Ok(J1Report {
        matched,
        surplus_1: j1.len() - n_match,
        surplus_2: j2.len() - n_match,
        pins,
        time_modulus,
        value_modulus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn parabola_polyline(n: usize) -> CadlagPath {
        let times: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let values: Vec<f64> = times.iter().map(|&t| t * (1.0 - t)).collect();
        CadlagPath::from_polyline(&times, &values).unwrap()
    }

    #[test]
    fn identity_distance_is_exactly_zero() {
        let w = parabola_polyline(64);
        let r = j1_distance(&w, &w, 1.0, 0.05).unwrap();
        assert_eq!(r.time_modulus, 0.0);
        assert_eq!(r.value_modulus, 0.0);
        let s = CadlagPath::step_path(0.0, &[(0.25, 1.0), (0.7, 0.4)], 1.0).unwrap();
        let rs = j1_distance(&s, &s, 1.0, 0.05).unwrap();
        assert_eq!(rs.distance(), 0.0);
        assert_eq!(rs.matched.len(), 2);
    }

    #[test]
    fn dilation_warp_recovers_the_time_modulus() {
        // w2(t) = w1(1.1 t): ends pin the warp to t -> 1.1 t, so the time
        // modulus is 0.1/1.1 and the values align along the warp.
        let n = 64;
        let w1 = parabola_polyline(n);
        let times2: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64 / 1.1).collect();
        let values2: Vec<f64> = (0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                t * (1.0 - t)
            })
            .collect();
        let w2 = CadlagPath::from_polyline(&times2, &values2).unwrap();
        let r = j1_distance(&w1, &w2, 1.0, 0.05).unwrap();
        assert_relative_eq!(r.time_modulus, 0.1 / 1.1, max_relative = 1e-9);
        assert!(r.value_modulus < 1e-9, "value modulus {}", r.value_modulus);
    }

    #[test]
    fn single_step_alignment() {
        let w1 = CadlagPath::step_path(0.0, &[(0.5, 1.0)], 1.0).unwrap();
        let w2 = CadlagPath::step_path(0.0, &[(0.55, 1.0)], 1.0).unwrap();
        let r = j1_distance(&w1, &w2, 1.0, 0.1).unwrap();
        assert_relative_eq!(r.distance(), 0.05, max_relative = 1e-12);
        assert!(r.value_modulus < 1e-12);
        assert_eq!(r.matched.len(), 1);
        assert_eq!((r.surplus_1, r.surplus_2), (0, 0));
    }

    #[test]
    fn surplus_jump_charges_the_value_modulus() {
        let w1 = CadlagPath::step_path(0.0, &[(0.3, 1.0), (0.6, 2.0)], 1.0).unwrap();
        let w2 = CadlagPath::step_path(0.0, &[(0.3, 1.0)], 1.0).unwrap();
        let r = j1_distance(&w1, &w2, 1.0, 0.1).unwrap();
        assert_eq!(r.matched.len(), 1);
        assert_eq!(r.surplus_1, 1);
        assert!(r.value_modulus >= 1.0 - 1e-12);
    }

    #[test]
    fn evaluation_beyond_short_paths_compares_extensions() {
        // Paths of different knot spans: both are constant extensions past
        // their last knot, and the window cap drives the end pin.
        let w1 = CadlagPath::step_path(0.0, &[(0.2, 1.0)], 0.5).unwrap();
        let w2 = CadlagPath::step_path(0.0, &[(0.25, 1.0)], 1.0).unwrap();
        let r = j1_distance(&w1, &w2, 1.0, 0.1).unwrap();
        assert_relative_eq!(r.time_modulus, 0.5, max_relative = 1e-12);
        assert!(r.value_modulus < 1e-12);
        let capped = j1_distance(&w1, &w2, 0.5, 0.1).unwrap();
        assert_relative_eq!(capped.time_modulus, 0.05, max_relative = 1e-9);
    }

    #[test]
    fn value_and_left_limit_semantics() {
        let w = CadlagPath::new(vec![
            (0.0, 0.0, 0.0),
            (1.0, 0.5, 2.0),
            (2.0, 1.0, 1.0),
        ])
        .unwrap();
        assert_eq!(w.value(0.5), 0.25);
        assert_eq!(w.left_limit(1.0), 0.5);
        assert_eq!(w.value(1.0), 2.0);
        assert_eq!(w.value(1.5), 1.5);
        assert_eq!(w.value(5.0), 1.0);
        assert_eq!(w.left_limit(0.0), 0.0);
        assert_eq!(w.jumps(0.1), vec![(1.0, 1.5)]);
        let sc = w.scaled(2.0, 3.0).unwrap();
        assert_eq!(sc.value(2.0), 6.0);
        assert_eq!(sc.end_time(), 4.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]

        #[test]
        fn symmetry_and_relaxed_triangle_on_step_paths(
            raw in proptest::collection::vec((0.02f64..0.2, -1.5f64..1.5), 1..5),
            shift_b in -0.05f64..0.05,
            shift_c in -0.05f64..0.05,
            bump_b in -0.3f64..0.3,
            bump_c in -0.3f64..0.3,
        ) {
            // Three step paths with a common jump count and jitter in both
            // time and level keep the order matching total.
            let mk = |shift: f64, bump: f64| {
                let mut t = 0.05f64;
                let mut level = 0.0f64;
                let mut jumps = Vec::new();
                for &(gap, size) in &raw {
                    t += gap;
                    // Offset keeps every jump above the floor even after
                    // the per-path level bump.
                    let sz = if size >= 0.0 { size + 0.45 } else { size - 0.45 };
                    level += sz + bump;
                    jumps.push(((t + shift).clamp(0.01, 2.0), level));
                }
                CadlagPath::step_path(0.0, &jumps, 2.5).unwrap()
            };
            let a = mk(0.0, 0.0);
            let b = mk(shift_b, bump_b);
            let c = mk(shift_c, bump_c);
            let dab = j1_distance(&a, &b, 2.5, 0.1).unwrap();
            let dba = j1_distance(&b, &a, 2.5, 0.1).unwrap();
            prop_assert!((dab.distance() - dba.distance()).abs() < 1e-12);
            let dac = j1_distance(&a, &c, 2.5, 0.1).unwrap().distance();
            let dbc = j1_distance(&b, &c, 2.5, 0.1).unwrap().distance();
            prop_assert!(dac <= 2.0 * (dab.distance() + dbc) + 1e-9);
        }
    }
}
