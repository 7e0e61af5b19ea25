//! Time change of excursions by a speed measure.
//!
//! For a Brownian-scaled path `e` the additive clock is
//! `A(t) = (1/2) integral_0^t m'(e(s)) ds` plus, for every atom of `dm` at a
//! level `a`, half the atom mass times the occupation density the path has
//! accumulated at `a`. The time-changed path is `e_m(u) = e(A^{-1}(u))`,
//! which preserves values (and therefore maxima and hitting levels) and only
//! redistributes time.
//!
//! The clock is evaluated segment-exactly on the piecewise linear path: a
//! sloped segment contributes `(dt/2) * (m(v1) - m(v0)) / (v1 - v0)` from
//! the density part and `(mass/2) * dt/|dv|` for every atom level it
//! strictly crosses, a flat segment contributes `(dt/2) * m'(v)`. A
//! bin-resolution Riemann sum over a [`LocalTimeField`] is provided as an
//! independent cross-check; the segment-exact form avoids its `O(dx)` bias.
//!
//! When `m(0+) = -inf` the polyline clock diverges at the origin (the
//! discretized path hits 0 linearly and overweights small levels), so a
//! positive level cut must be supplied: density mass below the cut is
//! dropped, mirroring the boundary-bin convention of the local-time field.
//! Zero cut is exact whenever `m(0+)` is finite.

use crate::error::{Error, Result};
use crate::excursion::{path_stats, sample_absorbed_bm, sample_excursion_above, Excursion};
use crate::local_time::LocalTimeField;
use crate::measure::SpeedMeasure;
use crate::rng::RngStream;

/// The clock `A` sampled at the knots of the path it was built from.
/// Atom contributions from level crossings interior to a segment are folded
/// into the segment's right knot, so knot values are exact.
#[derive(Debug, Clone)]
pub struct Clock {
    times: Vec<f64>,
    a_values: Vec<f64>,
}

impl Clock {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn a_values(&self) -> &[f64] {
        &self.a_values
    }

    pub fn total(&self) -> f64 {
        *self.a_values.last().unwrap()
    }

    /// Linear interpolation between knots; clamped outside.
    pub fn value_at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let n = self.times.len();
        if t >= self.times[n - 1] {
            return self.a_values[n - 1];
        }
        let i = self.times.partition_point(|&u| u <= t);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (a0, a1) = (self.a_values[i - 1], self.a_values[i]);
        a0 + (a1 - a0) * (t - t0) / (t1 - t0)
    }

    /// Right-continuous inverse `inf { t : A(t) > u }`, clamped to the
    /// lifetime.
    pub fn inverse(&self, u: f64) -> f64 {
        let n = self.times.len();
        if u >= self.a_values[n - 1] {
            return self.times[n - 1];
        }
        if u < 0.0 {
            return 0.0;
        }
        let i = self.a_values.partition_point(|&a| a <= u);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (a0, a1) = (self.a_values[i - 1], self.a_values[i]);
        if a1 == a0 {
            return t1;
        }
        t0 + (t1 - t0) * (u - a0) / (a1 - a0)
    }
}

fn segment_increment(
    m: &SpeedMeasure,
    atoms: &[(f64, f64)],
    x_cut: f64,
    dt: f64,
    v0: f64,
    v1: f64,
) -> f64 {
    let (lo, hi) = if v0 <= v1 { (v0, v1) } else { (v1, v0) };
    let mut inc = 0.0;
    if lo == hi {
        if lo > x_cut {
            inc += 0.5 * dt * m.density(lo);
        }
    } else if hi > x_cut {
        let lo_eff = lo.max(x_cut);
        inc += 0.5 * dt * m.density_integral(lo_eff, hi) / (hi - lo);
        for &(loc, mass) in atoms {
            if loc > lo && loc < hi {
                inc += 0.5 * mass * dt / (hi - lo);
            }
        }
    }
    inc
}

/// Builds the clock of `e` under `m` with the given level cut.
///
/// Errors when `x_cut = 0` while `m(0+) = -inf`: the polyline clock would
/// overflow at every return to the origin.
pub fn clock(e: &Excursion, m: &SpeedMeasure, x_cut: f64) -> Result<Clock> {
    if !x_cut.is_finite() || x_cut < 0.0 {
        return Err(Error::Param(format!(
            "level cut must be nonnegative, got {x_cut}"
        )));
    }
    if x_cut == 0.0 && !m.m_zero_finite() {
        return Err(Error::Model(
            "m(0+) = -inf makes the clock diverge on the discretized path; \
             pass a positive level cut"
                .into(),
        ));
    }
    let atoms = m.atoms();
    let times = e.times();
    let values = e.values();
    let mut a_values = Vec::with_capacity(times.len());
    a_values.push(0.0);
    let mut acc = 0.0;
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        acc += segment_increment(m, &atoms, x_cut, dt, values[i - 1], values[i]);
        if !acc.is_finite() {
            return Err(Error::Model(format!(
                "clock overflowed near t = {}: the speed density is not \
                 integrable along the path",
                times[i]
            )));
        }
        a_values.push(acc);
    }
    Ok(Clock {
        times: times.to_vec(),
        a_values,
    })
}

/// Riemann-sum clock over a local-time field: for each snapshot time,
/// `sum_k l(t, k dx) m'(k dx) dx` plus interpolated atom contributions.
/// Carries the field's `O(dx)` bias; used to cross-check [`clock`].
pub fn clock_from_field(field: &LocalTimeField, m: &SpeedMeasure) -> Vec<f64> {
    let dx = field.dx();
    let levels = field.levels();
    let atoms = m.atoms();
    let densities: Vec<f64> = levels.iter().map(|&x| m.density(x)).collect();
    field
        .times()
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let row = field.row(i);
            let mut a = 0.0;
            for k in 1..levels.len() {
                a += row[k] * densities[k] * dx;
            }
            for &(loc, mass) in &atoms {
                let k = (loc / dx).floor() as usize;
                if k + 1 < levels.len() {
                    let w = loc / dx - k as f64;
                    a += mass * (row[k] * (1.0 - w) + row[k + 1] * w);
                }
            }
            a
        })
        .collect()
}

/// The time-changed path `e_m(u) = e(A^{-1}(u))`: same values on the clock's
/// knot times, with zero-length clock runs collapsed to their last knot
/// (right continuity of the inverse).
pub fn time_change_excursion(e: &Excursion, m: &SpeedMeasure, x_cut: f64) -> Result<Excursion> {
    let a = clock(e, m, x_cut)?;
    if a.total() <= 0.0 {
        return Err(Error::Model(
            "time change is degenerate: the path never rises above the level cut".into(),
        ));
    }
    let values = e.values();
    let mut new_times = Vec::with_capacity(values.len());
    let mut new_values = Vec::with_capacity(values.len());
    for (&v, &u) in values.iter().zip(&a.a_values) {
        if let Some(&last) = new_times.last() {
            if u <= last {
                *new_values.last_mut().unwrap() = v;
                continue;
            }
        }
        new_times.push(u);
        new_values.push(v);
    }
    Excursion::new(new_times, new_values)
}

/// The shifted path `e(tau_x + .)` started from the first chord-interpolated
/// hit of `x`; the zero path when `x` is never reached.
pub fn shift_above(e: &Excursion, x: f64) -> Excursion {
    let stats = path_stats(e);
    let tau = match stats.tau(x) {
        Some(t) => t,
        None => return Excursion::zero(),
    };
    let times = e.times();
    let values = e.values();
    let mut new_times = vec![0.0];
    let mut new_values = vec![x];
    for i in 0..times.len() {
        if times[i] > tau {
            new_times.push(times[i] - tau);
            new_values.push(values[i]);
        }
    }
    if new_times.len() == 1 {
        // tau is the final absorption instant, only possible for x = 0.
        return Excursion::zero();
    }
    Excursion::new(new_times, new_values).expect("shifted path is a valid excursion")
}

/// Samples the time-changed law of Brownian motion started at `x > 0` and
/// absorbed at the origin.
pub fn sample_q_mx(
    x: f64,
    m: &SpeedMeasure,
    x_cut: f64,
    dt: f64,
    rng: &mut RngStream,
) -> Result<Excursion> {
    let e = sample_absorbed_bm(x, dt, rng)?;
    time_change_excursion(&e, m, x_cut)
}

/// Samples the time-changed excursion law conditioned on maximum above
/// `eps`.
pub fn sample_nm_above(
    eps: f64,
    m: &SpeedMeasure,
    x_cut: f64,
    dt: f64,
    rng: &mut RngStream,
) -> Result<Excursion> {
    let e = sample_excursion_above(eps, dt, rng)?;
    time_change_excursion(&e, m, x_cut)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_time::estimate_local_time;
    use crate::measure::DensityTerm;
    use crate::stats::ks_two_sample;
    use approx::assert_relative_eq;

    fn triangle() -> Excursion {
        Excursion::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 0.0]).unwrap()
    }

    fn eq_one_two_measure() -> SpeedMeasure {
        SpeedMeasure::from_terms(
            vec![DensityTerm::power(2.0, 0.0), DensityTerm::power(1.0, -1.0)],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn flat_density_clock_is_the_identity() {
        let m = SpeedMeasure::canonical(0.5).unwrap();
        let e = triangle();
        let a = clock(&e, &m, 0.0).unwrap();
        for (t, u) in a.times().iter().zip(a.a_values()) {
            assert_relative_eq!(t, u);
        }

        let mut rng = RngStream::new(41, 7);
        let e = sample_excursion_above(0.4, 1e-3, &mut rng).unwrap();
        let a = clock(&e, &m, 0.0).unwrap();
        assert_relative_eq!(a.total(), e.lifetime(), max_relative = 1e-12);
        let em = time_change_excursion(&e, &m, 0.0).unwrap();
        assert_relative_eq!(em.lifetime(), e.lifetime(), max_relative = 1e-12);
    }

    #[test]
    fn lebesgue_clock_halves_the_triangle() {
        // dm = dx gives A(1) = 1/2 on the unit triangle and e_m(t) = e(2t).
        let m = SpeedMeasure::from_terms(vec![DensityTerm::power(1.0, 0.0)], vec![]).unwrap();
        let e = triangle();
        let a = clock(&e, &m, 0.0).unwrap();
        assert_relative_eq!(a.total(), 0.5);
        assert_relative_eq!(a.value_at(0.5), 0.25);

        let em = time_change_excursion(&e, &m, 0.0).unwrap();
        assert_eq!(em.times(), &[0.0, 0.25, 0.5]);
        assert_eq!(em.values(), &[0.0, 0.5, 0.0]);
        for u in [0.1, 0.2, 0.4] {
            assert_relative_eq!(em.value_at(u), e.value_at(2.0 * u));
        }
    }

    #[test]
    fn atom_contribution_is_linear_in_mass() {
        // The unit triangle crosses level 0.3 twice with unit slopes; its
        // halved occupation density there is (1/2)(1/1 + 1/1) = 1, so an
        // atom of mass w at 0.3 adds exactly w to the clock, w/2 at each
        // crossing's right knot.
        let base = clock(&triangle(), &SpeedMeasure::canonical(0.5).unwrap(), 0.0)
            .unwrap()
            .total();
        for w in [0.25, 1.0] {
            let m = SpeedMeasure::from_terms(
                vec![DensityTerm::power(2.0, 0.0)],
                vec![(0.3, w)],
            )
            .unwrap();
            let a = clock(&triangle(), &m, 0.0).unwrap();
            assert_relative_eq!(a.total(), base + w, max_relative = 1e-12);
            // Up-crossing happens in the first segment, down-crossing in
            // the second; each contributes w/2 at its right knot.
            assert_relative_eq!(a.a_values()[1], 0.5 + 0.5 * w, max_relative = 1e-12);
        }
    }

    #[test]
    fn values_and_maxima_survive_the_time_change() {
        let m = eq_one_two_measure();
        let mut rng = RngStream::new(42, 0);
        let e = sample_excursion_above(0.5, 2e-3, &mut rng).unwrap();
        let em = time_change_excursion(&e, &m, 1e-3).unwrap();
        let stats_before = path_stats(&e);
        let stats_after = path_stats(&em);
        assert_eq!(stats_before.max, stats_after.max);
        assert!(em.lifetime() > 0.0);
    }

    #[test]
    fn level_cut_guard() {
        let m = eq_one_two_measure();
        let e = triangle();
        assert!(matches!(clock(&e, &m, 0.0), Err(Error::Model(_))));
        assert!(clock(&e, &m, 1e-3).is_ok());
        assert!(clock(&e, &m, -0.1).is_err());
    }

    #[test]
    fn shift_inserts_the_hit_knot() {
        let e = triangle();
        let s = shift_above(&e, 0.2);
        assert_eq!(s.times(), &[0.0, 0.3, 0.8]);
        assert_eq!(s.values(), &[0.2, 0.5, 0.0]);

        assert!(shift_above(&e, 0.7).is_zero());
        let full = shift_above(&e, 0.0);
        assert_eq!(full.values(), e.values());
    }

    #[test]
    fn shift_and_time_change_commute() {
        let m = eq_one_two_measure();
        let cut = 1e-3;
        let level = 0.7;
        let mut rng = RngStream::new(2024, 3);
        let mut checked = 0;
        for _ in 0..30 {
            let e = sample_excursion_above(0.5, 2e-3, &mut rng).unwrap();
            let one = time_change_excursion(&shift_above(&e, level), &m, cut);
            let em = time_change_excursion(&e, &m, cut).unwrap();
            let two = shift_above(&em, level);
            match one {
                Err(_) => {
                    assert!(two.is_zero());
                    continue;
                }
                Ok(one) => {
                    checked += 1;
                    let tol = 0.01 * one.lifetime() + 1e-6;
                    assert!(
                        (one.lifetime() - two.lifetime()).abs() <= tol,
                        "lifetimes {} vs {}",
                        one.lifetime(),
                        two.lifetime()
                    );
                    let u = 0.45 * one.lifetime().min(two.lifetime());
                    assert!(
                        (one.value_at(u) - two.value_at(u)).abs() <= 0.02 + 1e-9,
                        "values at {u}: {} vs {}",
                        one.value_at(u),
                        two.value_at(u)
                    );
                }
            }
        }
        assert!(checked >= 10, "only {checked} paths reached the shift level");
    }

    #[test]
    fn field_riemann_sum_agrees_with_the_exact_clock() {
        let m = eq_one_two_measure();
        let dx = 2e-3;
        let mut rng = RngStream::new(7, 11);
        let e = sample_excursion_above(0.5, 2e-3, &mut rng).unwrap();
        let field = estimate_local_time(&e, dx).unwrap();
        let exact = clock(&e, &m, dx).unwrap();
        let riemann = clock_from_field(&field, &m);
        let times = field.times();
        let last = riemann.len() - 1;
        for idx in [last / 2, last] {
            let want = exact.value_at(times[idx]);
            let got = riemann[idx];
            assert!(
                (got - want).abs() <= 0.05 * want.max(0.2),
                "clock at t = {}: field {} vs exact {}",
                times[idx],
                got,
                want
            );
        }
    }

    #[test]
    fn time_changed_absorbed_law_round_trips() {
        // dm = 2dx leaves time untouched, so lifetimes of the time-changed
        // absorbed motion must match plain absorbed motion in law.
        let m = SpeedMeasure::canonical(0.5).unwrap();
        let n = 2000;
        let mut rng_a = RngStream::new(5150, 0);
        let mut rng_b = RngStream::new(5151, 0);
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let mut hits = 0usize;
        for _ in 0..n {
            let q = sample_q_mx(1.0, &m, 0.0, 0.05, &mut rng_a).unwrap();
            assert_eq!(q.values()[0], 1.0);
            if path_stats(&q).max > 2.0 {
                hits += 1;
            }
            a.push(q.lifetime());
            b.push(sample_absorbed_bm(1.0, 0.05, &mut rng_b).unwrap().lifetime());
        }
        let ks = ks_two_sample(&a, &b).unwrap();
        assert!(ks.p_value > 0.01, "KS p = {}", ks.p_value);
        // Started at 1, the maximum exceeds 2 with probability 1/2.
        let phat = hits as f64 / n as f64;
        assert!(
            (phat - 0.5).abs() < 4.0 * (0.25f64 / n as f64).sqrt(),
            "P(max > 2) estimate {phat}"
        );
    }

    #[test]
    fn conditioned_law_survives_the_time_change() {
        let m = SpeedMeasure::canonical(0.5).unwrap();
        let n = 2000;
        let mut rng = RngStream::new(99, 4);
        let mut above = 0usize;
        for _ in 0..n {
            let e = sample_nm_above(0.3, &m, 0.0, 1e-3, &mut rng).unwrap();
            let stats = path_stats(&e);
            assert!(stats.max > 0.3);
            if stats.max > 0.6 {
                above += 1;
            }
        }
        // P(M > 0.6 | M > 0.3) = 0.3/0.6 = 1/2.
        let phat = above as f64 / n as f64;
        assert!(
            (phat - 0.5).abs() < 4.0 * (0.25f64 / n as f64).sqrt(),
            "conditional tail estimate {phat}"
        );
    }
}
