//! Synthesis of the process and its inverse local time from a marked
//! Poisson point process of excursions.
//!
//! A boundary triple with jump-size function `J` and delay `r` turns into a
//! path on the half line in three steps. First, marks `z` arrive on the
//! local-time axis at rate `1/max(J(z), eps)` per unit local time, where
//! `eps > 0` truncates the (typically infinite) excursion intensity. Second,
//! each mark receives a Brownian excursion conditioned to exceed
//! `max(J(z), eps)`, cut at its first passage of the entry level `J(z)` and
//! run through the speed-measure time change; its lifetime is the real-time
//! cost of that excursion. Third, the inverse local time `eta` is the
//! drift-plus-jumps staircase of those lifetimes, and the path itself is
//! pasted from the excursions into the jump intervals of `eta`.
//!
//! Truncation policy: excursions whose maximum stays at or below
//! `max(J(z), eps)` are dropped, not compensated, so `eta` underestimates
//! real time by the omitted small-lifetime mass. Consumers either study
//! jump-size laws above the truncation (unaffected by it) or extrapolate
//! statistics over an `eps` ladder. When the mark space is unbounded, the
//! far z-tail beyond the sampling grid is cut once its mass falls below a
//! configured fraction of the total intensity; the cut mass estimate is
//! reported in [`Intensity::tail_cut`].

use crate::error::{Error, Result};
use crate::excursion::{sample_excursion_above, Excursion};
use crate::measure::{check_existence, BoundaryTriple, ExistenceVerdict, JumpFunction};
use crate::numeric::integrate_log;
use crate::rng::RngStream;
use crate::time_change::{shift_above, time_change_excursion};
use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use std::io::Write;

/// Numerical policy for the synthesis samplers.
#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    /// Step size of the excursion sampler relative to the squared
    /// conditioning level; must stay at or below 0.25.
    pub dt_rel: f64,
    /// Origin cut for the time-change clock, as a fraction of `eps`, applied
    /// only when the speed measure diverges at the origin.
    pub x_cut_frac: f64,
    /// Knot count of the logarithmic z-grid behind inverse-cdf mark sampling.
    pub grid_knots: usize,
    /// Relative intensity mass below which the unbounded z-tail is cut.
    pub tail_mass_frac: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dt_rel: 0.01,
            x_cut_frac: 1e-3,
            grid_knots: 1 << 12,
            tail_mass_frac: 1e-5,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if !self.dt_rel.is_finite() || self.dt_rel <= 0.0 || self.dt_rel > 0.25 {
            return Err(Error::Param(format!(
                "dt_rel must lie in (0, 0.25], got {}",
                self.dt_rel
            )));
        }
        if !self.x_cut_frac.is_finite() || self.x_cut_frac < 0.0 || self.x_cut_frac >= 1.0 {
            return Err(Error::Param(format!(
                "x_cut_frac must lie in [0, 1), got {}",
                self.x_cut_frac
            )));
        }
        if self.grid_knots < 16 {
            return Err(Error::Param("grid_knots must be at least 16".into()));
        }
        if !self.tail_mass_frac.is_finite() || self.tail_mass_frac <= 0.0 || self.tail_mass_frac > 0.1
        {
            return Err(Error::Param(format!(
                "tail_mass_frac must lie in (0, 0.1], got {}",
                self.tail_mass_frac
            )));
        }
        Ok(())
    }

    fn x_cut(&self, b: &BoundaryTriple, eps: f64) -> f64 {
        if b.m.m_zero_finite() {
            0.0
        } else {
            self.x_cut_frac * eps
        }
    }
}

/// Integrated arrival intensity `I(eps) = integral dz / max(J(z), eps)` over
/// the mark space `(0, d(J))`, split into the exactly handled flat region
/// where `J <= eps` and the grid-sampled remainder.
#[derive(Debug, Clone, Copy)]
pub struct Intensity {
    /// Total intensity actually sampled (excludes `tail_cut`).
    pub total: f64,
    /// Upper end of the region where `J(z) <= eps` (arrival density `1/eps`).
    pub z_flat: f64,
    /// Upper end of the sampled mark range.
    pub z_hi: f64,
    /// Estimated intensity mass dropped beyond `z_hi` (zero when the mark
    /// space is bounded).
    pub tail_cut: f64,
}

/// Inverse-cdf sampler for marks with density proportional to
/// `1/max(J(z), eps)`.
///
/// The region `J <= eps` is flat and inverted in closed form; the rest uses
/// trapezoid cumulative masses on a logarithmic z-grid. A vanishing strip at
/// the very bottom of the grid (present when `J` jumps above `eps` right at
/// `0`, e.g. for a single entry atom) is treated as flat at its midpoint
/// density, which is exact whenever `J` is constant there.
#[derive(Debug, Clone)]
pub struct MarkSampler {
    intensity: Intensity,
    eps: f64,
    z_low: f64,
    low_mass: f64,
    grid_z: Vec<f64>,
    grid_cum: Vec<f64>,
}

impl MarkSampler {
    pub fn new(jump: &JumpFunction, eps: f64, cfg: &SynthConfig) -> Result<Self> {
        cfg.validate()?;
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::Param(format!("eps must be positive, got {eps}")));
        }
        let d = jump.d();
        let z_flat = jump.inverse(eps).min(d);
        let flat_mass = z_flat / eps;
        let g = |z: f64| 1.0 / jump.eval(z).max(eps);
        // Strip between the flat region and the first usable grid knot.
        let anchor = if d.is_finite() { d } else { z_flat.max(1.0) };
        let z_low = z_flat.max(anchor * 1e-9);
        let low_mass = if z_low > z_flat {
            (z_low - z_flat) * g(0.5 * (z_flat + z_low))
        } else {
            0.0
        };
        let (z_hi, tail_cut) = if d.is_finite() {
            (d, 0.0)
        } else {
            // Grow the sampled range by doubling until a block adds less
            // than the configured fraction of the accumulated intensity and
            // the blocks decay geometrically; extrapolate the cut mass.
            let mut hi = 2.0 * z_low.max(z_flat).max(1.0);
            let mut acc = flat_mass + low_mass + integrate_log(&g, z_low, hi, 1e-9);
            let mut prev_block = f64::INFINITY;
            let mut guard = 0;
            loop {
                let block = integrate_log(&g, hi, 2.0 * hi, 1e-9);
                if block < cfg.tail_mass_frac * acc && block < 0.75 * prev_block {
                    let ratio = (block / prev_block).min(0.9);
                    break (hi, block * ratio / (1.0 - ratio) + block);
                }
                acc += block;
                prev_block = block;
                hi *= 2.0;
                guard += 1;
                if guard > 60 {
                    return Err(Error::Synthesis(
                        "arrival intensity integral does not converge on the mark space"
                            .into(),
                    ));
                }
            }
        };
        let (grid_z, grid_cum) = if z_hi > z_low * (1.0 + 1e-12) {
            let n = cfg.grid_knots;
            let lr = (z_hi / z_low).ln();
            let zs: Vec<f64> = (0..n)
                .map(|i| z_low * (lr * i as f64 / (n - 1) as f64).exp())
                .collect();
            let mut cum = Vec::with_capacity(n);
            let mut acc = 0.0;
            let mut prev_g = g(zs[0]);
            cum.push(0.0);
            for w in zs.windows(2) {
                let gz = g(w[1]);
                acc += 0.5 * (w[1] - w[0]) * (prev_g + gz);
                cum.push(acc);
                prev_g = gz;
            }
            (zs, cum)
        } else {
            (Vec::new(), Vec::new())
        };
        let grid_mass = grid_cum.last().copied().unwrap_or(0.0);
        let total = flat_mass + low_mass + grid_mass;
        if !total.is_finite() {
            return Err(Error::Synthesis(
                "arrival intensity is not finite; the triple admits no truncated synthesis"
                    .into(),
            ));
        }
        Ok(MarkSampler {
            intensity: Intensity {
                total,
                z_flat,
                z_hi,
                tail_cut,
            },
            eps,
            z_low,
            low_mass,
            grid_z,
            grid_cum,
        })
    }

    pub fn intensity(&self) -> Intensity {
        self.intensity
    }

    /// Draws one mark from the normalized density `1/max(J(z), eps)`.
    pub fn sample_z(&self, rng: &mut RngStream) -> f64 {
        let u: f64 = rng.gen();
        let mut target = u * self.intensity.total;
        let flat_mass = self.intensity.z_flat / self.eps;
        if target < flat_mass {
            return (target * self.eps).max(f64::MIN_POSITIVE);
        }
        target -= flat_mass;
        if target < self.low_mass {
            let frac = target / self.low_mass;
            return self.intensity.z_flat + frac * (self.z_low - self.intensity.z_flat);
        }
        target -= self.low_mass;
        let k = self
            .grid_cum
            .partition_point(|&c| c <= target)
            .clamp(1, self.grid_z.len().saturating_sub(1));
        let cell = self.grid_cum[k] - self.grid_cum[k - 1];
        let frac = if cell > 0.0 {
            ((target - self.grid_cum[k - 1]) / cell).clamp(0.0, 1.0)
        } else {
            0.5
        };
        self.grid_z[k - 1] + frac * (self.grid_z[k] - self.grid_z[k - 1])
    }
}

/// Integrated arrival intensity of the truncated point process.
pub fn intensity(jump: &JumpFunction, eps: f64, cfg: &SynthConfig) -> Result<Intensity> {
    Ok(MarkSampler::new(jump, eps, cfg)?.intensity())
}

/// One marked arrival: local-time coordinate, mark, entry level `J(z)` and
/// the excursion already cut at its entry passage and time-changed by the
/// speed measure, so its lifetime is exactly the real-time jump it causes.
#[derive(Debug, Clone)]
pub struct MarkedPoint {
    pub s: f64,
    pub z: f64,
    pub entry: f64,
    pub e: Excursion,
}

/// A realization of the truncated marked point process on `(0, horizon]`.
#[derive(Debug, Clone)]
pub struct MarkedPointProcess {
    pub horizon: f64,
    pub eps: f64,
    pub intensity: Intensity,
    /// Points sorted by local-time coordinate.
    pub points: Vec<MarkedPoint>,
}

/// Samples the marked point process for `b` on the local-time window
/// `(0, s_horizon]` at truncation `eps`.
///
/// The count is Poisson with mean `s_horizon * I(eps)`; each point draws its
/// coordinate uniformly, its mark from [`MarkSampler`], and its excursion
/// from the Brownian excursion law conditioned above `max(J(z), eps)`.
/// Points are generated on disjoint child streams of `rng`, so the result is
/// reproducible under any parallel schedule.
pub fn sample_point_process(
    b: &BoundaryTriple,
    s_horizon: f64,
    eps: f64,
    cfg: &SynthConfig,
    rng: &RngStream,
) -> Result<MarkedPointProcess> {
    if !s_horizon.is_finite() || s_horizon <= 0.0 {
        return Err(Error::Param(format!(
            "local-time horizon must be positive, got {s_horizon}"
        )));
    }
    let report = check_existence(&b.m, &b.j, b.c, b.r);
    if report.verdict != ExistenceVerdict::Exists {
        return Err(Error::Synthesis(format!(
            "boundary data admits no process: {:?}",
            report.verdict
        )));
    }
    let sampler = MarkSampler::new(&b.jump, eps, cfg)?;
    let intens = sampler.intensity();
    let n = if intens.total > 0.0 {
        let mut count_rng = rng.child(0);
        Poisson::new(s_horizon * intens.total)
            .map_err(|e| Error::Synthesis(format!("poisson parameter: {e}")))?
            .sample(&mut count_rng) as usize
    } else {
        0
    };
    let x_cut = cfg.x_cut(b, eps);
    let mut points = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut r = rng.child(k as u64 + 1);
            let s = s_horizon * (1.0 - r.gen::<f64>());
            let z = sampler.sample_z(&mut r);
            let entry = b.jump.eval(z);
            let level = entry.max(eps);
            let raw = sample_excursion_above(level, cfg.dt_rel * level * level, &mut r)?;
            let at_entry = if entry > 0.0 {
                shift_above(&raw, entry)
            } else {
                raw
            };
            let e = time_change_excursion(&at_entry, &b.m, x_cut)?;
            Ok(MarkedPoint { s, z, entry, e })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| (a.s, a.z).partial_cmp(&(b.s, b.z)).unwrap());
    Ok(MarkedPointProcess {
        horizon: s_horizon,
        eps,
        intensity: intens,
        points,
    })
}

/// A nondecreasing drift-plus-jumps staircase, right-continuous in `s`.
#[derive(Debug, Clone)]
pub struct Staircase {
    drift: f64,
    times: Vec<f64>,
    sizes: Vec<f64>,
    cum: Vec<f64>,
}

impl Staircase {
    /// Builds a staircase from a drift rate and `(time, size)` jumps with
    /// strictly increasing times and nonnegative sizes.
    pub fn new(drift: f64, jumps: Vec<(f64, f64)>) -> Result<Self> {
        if !drift.is_finite() || drift < 0.0 {
            return Err(Error::Param(format!(
                "drift must be nonnegative, got {drift}"
            )));
        }
        let mut times = Vec::with_capacity(jumps.len());
        let mut sizes = Vec::with_capacity(jumps.len());
        let mut cum = Vec::with_capacity(jumps.len());
        let mut acc = 0.0;
        for (t, w) in jumps {
            if !t.is_finite() || t <= 0.0 || !w.is_finite() || w < 0.0 {
                return Err(Error::Param(format!("bad staircase jump ({t}, {w})")));
            }
            if let Some(&last) = times.last() {
                if t <= last {
                    return Err(Error::Param("staircase jump times must increase".into()));
                }
            }
            acc += w;
            times.push(t);
            sizes.push(w);
            cum.push(acc);
        }
        Ok(Staircase {
            drift,
            times,
            sizes,
            cum,
        })
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.times
    }

    pub fn jump_sizes(&self) -> &[f64] {
        &self.sizes
    }

    /// Right-continuous value at `s`.
    pub fn value(&self, s: f64) -> f64 {
        let k = self.times.partition_point(|&t| t <= s);
        self.drift * s.max(0.0) + if k > 0 { self.cum[k - 1] } else { 0.0 }
    }

    /// Left limit at `s`.
    pub fn value_left(&self, s: f64) -> f64 {
        let k = self.times.partition_point(|&t| t < s);
        self.drift * s.max(0.0) + if k > 0 { self.cum[k - 1] } else { 0.0 }
    }

    /// Right-continuous inverse `inf { s >= 0 : value(s) > t }`; infinite
    /// when the staircase never exceeds `t` (zero drift beyond the jumps).
    pub fn inverse(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        // First jump whose post-jump value exceeds t.
        let k = {
            let mut lo = 0usize;
            let mut hi = self.times.len();
            while lo < hi {
                let mid = (lo + hi) / 2;
                if self.drift * self.times[mid] + self.cum[mid] <= t {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let base = if k > 0 { self.cum[k - 1] } else { 0.0 };
        if self.drift > 0.0 {
            let s0 = (t - base) / self.drift;
            if k == self.times.len() || s0 < self.times[k] {
                return s0.max(0.0);
            }
            return self.times[k];
        }
        if k == self.times.len() {
            f64::INFINITY
        } else {
            self.times[k]
        }
    }
}

/// Builds the inverse local time staircase: drift `r` plus one jump per
/// point, of size equal to the point's time-changed post-entry lifetime.
pub fn build_eta(pp: &MarkedPointProcess, b: &BoundaryTriple) -> Result<Staircase> {
    let jumps = pp
        .points
        .iter()
        .map(|p| (p.s, p.e.lifetime()))
        .collect::<Vec<_>>();
    Staircase::new(b.r, jumps)
}

/// The assembled path: zero off the jump intervals of `eta`, the stored
/// excursion inside each.
#[derive(Debug, Clone)]
pub struct SyntheticPath {
    pub eta: Staircase,
    pub points: Vec<MarkedPoint>,
    /// Real-time start of each excursion interval, `eta(s_i-)`.
    pub starts: Vec<f64>,
    pub s_horizon: f64,
    pub t_horizon: f64,
    pub eps: f64,
    pub r: f64,
    pub intensity: Intensity,
}

impl SyntheticPath {
    /// Path value at real time `t`.
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.t_horizon {
            return 0.0;
        }
        let k = self.starts.partition_point(|&u| u <= t);
        if k == 0 {
            return 0.0;
        }
        let p = &self.points[k - 1];
        let local = t - self.starts[k - 1];
        if local < p.e.lifetime() {
            p.e.value_at(local)
        } else {
            0.0
        }
    }
}

/// Pastes the excursions of `pp` into the jump intervals of its staircase,
/// producing the path on `[0, t_horizon]`.
///
/// Fails with a horizon error when the staircase does not reach `t_horizon`
/// by the end of the local-time window; callers then enlarge the window (see
/// [`synthesize`]).
pub fn build_path(
    pp: MarkedPointProcess,
    b: &BoundaryTriple,
    t_horizon: f64,
) -> Result<SyntheticPath> {
    if !t_horizon.is_finite() || t_horizon <= 0.0 {
        return Err(Error::Param(format!(
            "time horizon must be positive, got {t_horizon}"
        )));
    }
    let eta = build_eta(&pp, b)?;
    let reach = eta.value(pp.horizon);
    if reach < t_horizon {
        return Err(Error::Horizon(format!(
            "eta({}) = {reach} < requested horizon {t_horizon}; enlarge the local-time window",
            pp.horizon
        )));
    }
    let starts = pp.points.iter().map(|p| eta.value_left(p.s)).collect();
    Ok(SyntheticPath {
        eta,
        starts,
        s_horizon: pp.horizon,
        t_horizon,
        eps: pp.eps,
        r: b.r,
        intensity: pp.intensity,
        points: pp.points,
    })
}

/// Output of [`synthesize`]: the path plus bookkeeping about the local-time
/// window search.
#[derive(Debug, Clone)]
pub struct SynthesisRun {
    pub path: SyntheticPath,
    pub s_used: f64,
    pub doublings: u32,
}

/// Samples a path covering `[0, t_horizon]`, growing the local-time window
/// by doubling until the staircase reaches the horizon. Each attempt uses a
/// fresh child stream, so the result is a deterministic function of the
/// seed, the horizon and the configuration.
pub fn synthesize(
    b: &BoundaryTriple,
    t_horizon: f64,
    eps: f64,
    s_init: Option<f64>,
    cfg: &SynthConfig,
    rng: &RngStream,
) -> Result<SynthesisRun> {
    let mut s = s_init.unwrap_or(1.0);
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::Param(format!(
            "initial local-time window must be positive, got {s}"
        )));
    }
    for attempt in 0..48u32 {
        let pp = sample_point_process(b, s, eps, cfg, &rng.child(attempt as u64))?;
        match build_path(pp, b, t_horizon) {
            Ok(path) => {
                return Ok(SynthesisRun {
                    path,
                    s_used: s,
                    doublings: attempt,
                })
            }
            Err(Error::Horizon(_)) => s *= 2.0,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Horizon(format!(
        "staircase did not reach {t_horizon} within 48 doublings of the local-time window"
    )))
}

/// The boundary local time: the right-continuous inverse of the staircase,
/// clamped at the sampled window and optionally rescaled by a normalization
/// constant.
#[derive(Debug, Clone)]
pub struct LocalTimeAtZero {
    eta: Staircase,
    s_horizon: f64,
    scale: f64,
}

impl LocalTimeAtZero {
    pub fn value(&self, t: f64) -> f64 {
        self.eta.inverse(t).min(self.s_horizon) / self.scale
    }
}

/// Extracts the boundary local time of a synthetic path. `c_scale` divides
/// the clock (the normalization constant of the drift-plus-excursion-mass
/// convention); `None` keeps the staircase's own scale.
pub fn boundary_local_time(sp: &SyntheticPath, c_scale: Option<f64>) -> Result<LocalTimeAtZero> {
    let scale = c_scale.unwrap_or(1.0);
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::Param(format!(
            "normalization constant must be positive, got {scale}"
        )));
    }
    Ok(LocalTimeAtZero {
        eta: sp.eta.clone(),
        s_horizon: sp.s_horizon,
        scale,
    })
}

/// Streams `n` independent staircase jump sizes (time-changed post-entry
/// lifetimes under the truncated mark law) without retaining the paths.
pub fn sample_eta_jump_sizes(
    b: &BoundaryTriple,
    eps: f64,
    n: usize,
    cfg: &SynthConfig,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    let sampler = MarkSampler::new(&b.jump, eps, cfg)?;
    if sampler.intensity().total <= 0.0 {
        return Err(Error::Synthesis(
            "the triple has no excursion arrivals; jump sizes are undefined".into(),
        ));
    }
    let x_cut = cfg.x_cut(b, eps);
    (0..n)
        .into_par_iter()
        .map(|k| {
            let mut r = rng.child(k as u64);
            let z = sampler.sample_z(&mut r);
            let entry = b.jump.eval(z);
            let level = entry.max(eps);
            let raw = sample_excursion_above(level, cfg.dt_rel * level * level, &mut r)?;
            let at_entry = if entry > 0.0 {
                shift_above(&raw, entry)
            } else {
                raw
            };
            Ok(time_change_excursion(&at_entry, &b.m, x_cut)?.lifetime())
        })
        .collect()
}

/// Truncated Laplace exponent estimates on a grid of arguments, sharing one
/// excursion sample: `psi(xi) ~= xi r + I(eps) * mean(1 - exp(-xi * zeta))`.
///
/// Sharing the sample makes monotonicity and concavity in `xi` hold exactly
/// for the estimates, not just in expectation.
pub fn laplace_profile(
    b: &BoundaryTriple,
    xis: &[f64],
    eps: f64,
    n: usize,
    cfg: &SynthConfig,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    if xis.iter().any(|&x| !x.is_finite() || x <= 0.0) {
        return Err(Error::Param("laplace arguments must be positive".into()));
    }
    let sampler = MarkSampler::new(&b.jump, eps, cfg)?;
    let total = sampler.intensity().total;
    if total <= 0.0 {
        return Ok(xis.iter().map(|&xi| xi * b.r).collect());
    }
    if n == 0 {
        return Err(Error::Param("laplace needs a positive sample size".into()));
    }
    let zetas = sample_eta_jump_sizes(b, eps, n, cfg, rng)?;
    Ok(xis
        .iter()
        .map(|&xi| {
            let mean = zetas.iter().map(|&t| 1.0 - (-xi * t).exp()).sum::<f64>() / n as f64;
            xi * b.r + total * mean
        })
        .collect())
}

/// Truncated Laplace exponent at a single argument.
pub fn laplace_exponent(
    b: &BoundaryTriple,
    xi: f64,
    eps: f64,
    n: usize,
    cfg: &SynthConfig,
    rng: &RngStream,
) -> Result<f64> {
    Ok(laplace_profile(b, &[xi], eps, n, cfg, rng)?[0])
}

/// Estimates the local-time normalization constant `r` plus the mean
/// `1 - exp(-lifetime)` excursion mass, which coincides with the Laplace
/// exponent at argument 1.
pub fn estimate_c(
    b: &BoundaryTriple,
    eps: f64,
    n: usize,
    cfg: &SynthConfig,
    rng: &RngStream,
) -> Result<f64> {
    laplace_exponent(b, 1.0, eps, n, cfg, rng)
}

/// Draws one marginal value of the path at real time `t_star` by unrolling
/// arrivals in local-time order until real time passes `t_star`. Returns 0
/// when `t_star` falls in a drift stretch, the in-flight excursion value
/// otherwise. Far cheaper than assembling a full path per replicate.
pub fn sample_marginal(
    b: &BoundaryTriple,
    t_star: f64,
    eps: f64,
    cfg: &SynthConfig,
    rng: &mut RngStream,
) -> Result<f64> {
    if !t_star.is_finite() || t_star <= 0.0 {
        return Err(Error::Param(format!(
            "marginal time must be positive, got {t_star}"
        )));
    }
    let sampler = MarkSampler::new(&b.jump, eps, cfg)?;
    let total = sampler.intensity().total;
    if total <= 0.0 {
        return Ok(0.0);
    }
    let x_cut = cfg.x_cut(b, eps);
    let gap = Exp::new(total).map_err(|e| Error::Param(format!("exp rate: {e}")))?;
    let mut t_acc = 0.0f64;
    for _ in 0..100_000_000u64 {
        if b.r > 0.0 {
            let ds: f64 = gap.sample(rng);
            if t_acc + b.r * ds > t_star {
                return Ok(0.0);
            }
            t_acc += b.r * ds;
        }
        let z = sampler.sample_z(rng);
        let entry = b.jump.eval(z);
        let level = entry.max(eps);
        let raw = sample_excursion_above(level, cfg.dt_rel * level * level, rng)?;
        let at_entry = if entry > 0.0 {
            shift_above(&raw, entry)
        } else {
            raw
        };
        let e = time_change_excursion(&at_entry, &b.m, x_cut)?;
        let zeta = e.lifetime();
        if t_acc + zeta > t_star {
            return Ok(e.value_at(t_star - t_acc));
        }
        t_acc += zeta;
    }
    Err(Error::Synthesis(
        "marginal sampler exhausted its arrival budget before the target time".into(),
    ))
}

/// Writes the path as `t,x` rows: every excursion knot, with doubled rows at
/// the entry jumps and explicit zeros on the drift stretches, truncated at
/// the horizon.
pub fn write_path_csv<W: Write>(sp: &SyntheticPath, mut w: W) -> Result<()> {
    writeln!(w, "t,x")?;
    let t_end = sp.t_horizon;
    let mut cursor = 0.0f64;
    writeln!(w, "0,0")?;
    for (p, &start) in sp.points.iter().zip(&sp.starts) {
        if start >= t_end {
            break;
        }
        if start > cursor {
            writeln!(w, "{start},0")?;
        }
        for (&dt, &v) in p.e.times().iter().zip(p.e.values()) {
            let t = start + dt;
            if t > t_end {
                let prev = p.e.value_at(t_end - start);
                writeln!(w, "{t_end},{prev}")?;
                return Ok(());
            }
            writeln!(w, "{t},{v}")?;
        }
        cursor = start + p.e.lifetime();
    }
    if cursor < t_end {
        writeln!(w, "{t_end},0")?;
    }
    Ok(())
}

/// Writes the staircase as `s,eta` rows with doubled rows at jumps.
pub fn write_eta_csv<W: Write>(eta: &Staircase, s_horizon: f64, mut w: W) -> Result<()> {
    writeln!(w, "s,eta")?;
    writeln!(w, "0,0")?;
    for &s in eta.jump_times() {
        if s > s_horizon {
            break;
        }
        let left = eta.value_left(s);
        let right = eta.value(s);
        writeln!(w, "{s},{left}")?;
        writeln!(w, "{s},{right}")?;
    }
    let end = eta.value(s_horizon);
    writeln!(w, "{s_horizon},{end}")?;
    Ok(())
}
