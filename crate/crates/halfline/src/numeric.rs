//! Small numeric helpers shared across the crate: interpolation, bisection,
//! adaptive quadrature and a ladder-based probe that classifies improper
//! integrals as convergent or divergent.

/// Linear interpolation of `y` at `x` on a sorted knot sequence.
///
/// Outside the knot range the nearest endpoint value is returned.
pub fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    if xs.is_empty() {
        return 0.0;
    }
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => return ys[i],
        Err(i) => i,
    };
    let (x0, x1) = (xs[i - 1], xs[i]);
    let (y0, y1) = (ys[i - 1], ys[i]);
    if x1 == x0 {
        return y1;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Bisection root bracket for a monotone nondecreasing predicate.
///
/// Returns the infimum of `{x in [lo, hi] : pred(x)}` to absolute precision
/// `tol`, assuming `pred(hi)` holds. If `pred(lo)` already holds, `lo` is
/// returned.
pub fn bisect_inf<F: Fn(f64) -> bool>(mut lo: f64, mut hi: f64, tol: f64, pred: F) -> f64 {
    if pred(lo) {
        return lo;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    simpson_rec(f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 48)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Quadrature on `(a, b)` for integrands with possible endpoint singularities,
/// performed in log space: substitute x = e^u so that dx = x du.
pub fn integrate_log<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    assert!(a > 0.0 && b > a);
    let g = |u: f64| {
        let x = u.exp();
        f(x) * x
    };
    integrate(&g, a.ln(), b.ln(), tol)
}

/// Verdict of a [`limit_probe`] run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeVerdict {
    /// The ladder converged; the payload is the extrapolated limit.
    Finite(f64),
    /// The ladder blew past the divergence threshold or its increments kept
    /// growing (or failed to decay), so the improper integral is declared
    /// divergent.
    Divergent,
}

impl ProbeVerdict {
    pub fn is_finite(&self) -> bool {
        matches!(self, ProbeVerdict::Finite(_))
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            ProbeVerdict::Finite(v) => Some(*v),
            ProbeVerdict::Divergent => None,
        }
    }
}

/// Divergence threshold for the refinement ladder.
pub const PROBE_BLOWUP: f64 = 1e8;

/// Classifies `lim_{d -> 0+} F(d)` where `F(d)` is nondecreasing as `d`
/// decreases (a truncated improper integral, cut off at `d`).
///
/// `F` is evaluated on the ladder `d_k = d0 * shrink^k`. Successive increments
/// `F(d_{k+1}) - F(d_k)` of a convergent integral decay geometrically, while a
/// power-law divergence makes them grow and a logarithmic divergence keeps
/// them flat. The classifier looks at the tail increment ratios: a geometric
/// mean below `0.98` is read as convergence (with a geometric-series tail
/// correction), anything else as divergence. Values above [`PROBE_BLOWUP`]
/// short-circuit to divergent.
pub fn limit_probe<F: Fn(f64) -> f64>(f: F, d0: f64, shrink: f64, steps: usize) -> ProbeVerdict {
    assert!(d0 > 0.0 && shrink > 0.0 && shrink < 1.0 && steps >= 4);
    let mut values = Vec::with_capacity(steps);
    let mut d = d0;
    for _ in 0..steps {
        let v = f(d);
        if !v.is_finite() || v.abs() > PROBE_BLOWUP {
            return ProbeVerdict::Divergent;
        }
        values.push(v);
        d *= shrink;
    }
    let incs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let scale = values.last().unwrap().abs().max(1.0);
    let tail: Vec<f64> = incs.iter().rev().take(3).rev().copied().collect();
    // All tail increments already negligible: converged outright.
    if tail.iter().all(|i| i.abs() <= 1e-9 * scale) {
        return ProbeVerdict::Finite(*values.last().unwrap());
    }
    let mut ratios = Vec::new();
    for w in incs.windows(2) {
        if w[0].abs() > 1e-12 * scale {
            ratios.push((w[1] / w[0]).abs());
        }
    }
    if ratios.is_empty() {
        return ProbeVerdict::Finite(*values.last().unwrap());
    }
    let tail_ratios: Vec<f64> = ratios.iter().rev().take(3).rev().copied().collect();
    let gm = tail_ratios.iter().map(|r| r.ln()).sum::<f64>() / tail_ratios.len() as f64;
    let gm = gm.exp();
    if gm < 0.98 {
        // Geometric tail: add the extrapolated remainder of the increments.
        let last_inc = *incs.last().unwrap();
        let rest = last_inc * gm / (1.0 - gm);
        ProbeVerdict::Finite(values.last().unwrap() + rest)
    } else {
        ProbeVerdict::Divergent
    }
}

/// SplitMix64 finalizer, used to derive child RNG stream identifiers.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
