//! Occupation-density (local time) estimation for excursion paths.
//!
//! The field `ell(t, x)` is estimated by exact segment-bin occupation on the
//! piecewise-linear interpolant: the time the interpolant spends in the level
//! band `[x, x+dx)` up to `t`, divided by `2 dx`. Computing the band time
//! exactly (rather than counting samples) removes the `O(dt)` counting bias
//! and makes flat test paths exact.
//!
//! The factor 2 lives inside `ell`, so the occupation identity reads
//! `time in [a,b) up to t = 2 * integral_a^b ell(t,x) dx`, and the speed
//! measure with density 2 induces the identity time change downstream.
//!
//! The level at the origin is special: the true field vanishes there, while a
//! naive bin estimate over `[0, dx)` would not. The row at level 0 is pinned
//! to zero; the occupation mass of `(0, dx)` (quadratically small for paths
//! absorbed at the boundary) is deliberately left out of the field.

use crate::error::{Error, Result};
use crate::excursion::Excursion;

/// Cap on stored time rows; longer paths are thinned (first and last grid
/// points always kept) to bound memory on long heavy-tailed excursions.
const MAX_ROWS: usize = 257;

/// A cumulative local-time field on a rectangular grid: `value(i, k)` is the
/// estimate of `ell(times[i], levels[k])`, with `levels[k] = k * dx`.
#[derive(Debug, Clone)]
pub struct LocalTimeField {
    dx: f64,
    levels: Vec<f64>,
    times: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl LocalTimeField {
    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn value(&self, time_index: usize, level_index: usize) -> f64 {
        self.rows[time_index][level_index]
    }

    pub fn row(&self, time_index: usize) -> &[f64] {
        &self.rows[time_index]
    }

    /// The row at the lifetime, `ell(zeta, .)`.
    pub fn final_row(&self) -> &[f64] {
        self.rows.last().unwrap()
    }

    /// `integral_a^b ell(times[i], x) dx`, reading the field as piecewise
    /// constant on its bins. The boundary bin `[0, dx)` contributes zero.
    pub fn level_integral(&self, time_index: usize, a: f64, b: f64) -> f64 {
        let row = &self.rows[time_index];
        let mut total = 0.0;
        for (k, &v) in row.iter().enumerate().skip(1) {
            let lo = self.levels[k];
            let hi = lo + self.dx;
            let overlap = (hi.min(b) - lo.max(a)).max(0.0);
            total += v * overlap;
        }
        total
    }
}

/// Estimates the local-time field of `e` with level spacing `dx`.
///
/// Time rows are the grid points of `e` (thinned to at most a few hundred
/// rows for long paths); each row is cumulative, so `t -> ell(t, x)` is
/// non-decreasing by construction.
pub fn estimate_local_time(e: &Excursion, dx: f64) -> Result<LocalTimeField> {
    if !dx.is_finite() || dx <= 0.0 {
        return Err(Error::Param(format!("dx must be positive, got {dx}")));
    }
    let max = e.values().iter().cloned().fold(0.0f64, f64::max);
    if dx > max {
        return Err(Error::DegenerateGrid(format!(
            "dx = {dx} exceeds the path maximum {max}; no level band is resolvable"
        )));
    }
    let kmax = (max / dx).ceil() as usize;
    let levels: Vec<f64> = (0..=kmax).map(|k| k as f64 * dx).collect();
    let snapshots = thin_indices(e.len(), MAX_ROWS);

    let mut occ = vec![0.0f64; kmax + 1];
    let mut times = Vec::with_capacity(snapshots.len());
    let mut rows = Vec::with_capacity(snapshots.len());
    let mut snap = snapshots.iter().copied().peekable();

    let push_row = |occ: &[f64], rows: &mut Vec<Vec<f64>>| {
        let mut row: Vec<f64> = occ.iter().map(|&o| o / (2.0 * dx)).collect();
        row[0] = 0.0;
        rows.push(row);
    };

    if snap.peek() == Some(&0) {
        snap.next();
        times.push(e.times()[0]);
        push_row(&occ, &mut rows);
    }
    for i in 1..e.len() {
        add_segment(
            &mut occ,
            dx,
            e.times()[i] - e.times()[i - 1],
            e.values()[i - 1],
            e.values()[i],
        );
        if snap.peek() == Some(&i) {
            snap.next();
            times.push(e.times()[i]);
            push_row(&occ, &mut rows);
        }
    }
    Ok(LocalTimeField {
        dx,
        levels,
        times,
        rows,
    })
}

fn add_segment(occ: &mut [f64], dx: f64, dt: f64, v0: f64, v1: f64) {
    if v0 == v1 {
        let k = ((v0 / dx) as usize).min(occ.len() - 1);
        occ[k] += dt;
        return;
    }
    let (lo, hi) = if v0 < v1 { (v0, v1) } else { (v1, v0) };
    let k0 = (lo / dx) as usize;
    let k1 = ((hi / dx) as usize).min(occ.len() - 1);
    let span = hi - lo;
    for (k, slot) in occ.iter_mut().enumerate().take(k1 + 1).skip(k0) {
        let y0 = k as f64 * dx;
        let overlap = (hi.min(y0 + dx) - lo.max(y0)).max(0.0);
        *slot += dt * overlap / span;
    }
}

fn thin_indices(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut out: Vec<usize> = (0..cap)
        .map(|j| (j as f64 * (n - 1) as f64 / (cap - 1) as f64).round() as usize)
        .collect();
    out.dedup();
    out
}

/// Exact Lebesgue time the interpolant of `e` spends in `[a, b)` up to `t`.
pub fn occupation(e: &Excursion, a: f64, b: f64, t: f64) -> f64 {
    let mut total = 0.0;
    for i in 1..e.len() {
        let t0 = e.times()[i - 1];
        if t0 >= t {
            break;
        }
        let t1 = e.times()[i].min(t);
        let v0 = e.values()[i - 1];
        // Clip the segment in time before measuring its band time.
        let v1 = if e.times()[i] > t1 {
            v0 + (e.values()[i] - v0) * (t1 - t0) / (e.times()[i] - t0)
        } else {
            e.values()[i]
        };
        let dt = t1 - t0;
        if v0 == v1 {
            if v0 >= a && v0 < b {
                total += dt;
            }
        } else {
            let (lo, hi) = if v0 < v1 { (v0, v1) } else { (v1, v0) };
            let overlap = (hi.min(b) - lo.max(a)).max(0.0);
            total += dt * overlap / (hi - lo);
        }
    }
    total
}

/// Relative defect of the occupation identity on the band `[a, b)`:
/// `|occupation - 2 * integral_a^b ell(zeta, x) dx| / max(occupation, floor)`.
pub fn occupation_residual(
    e: &Excursion,
    field: &LocalTimeField,
    a: f64,
    b: f64,
) -> Result<f64> {
    if !(a >= 0.0 && b > a) {
        return Err(Error::Param(format!(
            "band must satisfy 0 <= a < b, got [{a}, {b})"
        )));
    }
    let occ = occupation(e, a, b, e.lifetime());
    let est = 2.0 * field.level_integral(field.times().len() - 1, a, b);
    Ok((occ - est).abs() / occ.max(1e-12))
}
