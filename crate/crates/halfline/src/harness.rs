//! Scaling experiments: the exact space-time identity check, convergence
//! ladders toward the self-similar limit processes, and plumbing for
//! reproducible experiment runs.
//!
//! The space-time identity says that `(1/lambda) X(u(lambda) t)` built from
//! the native boundary data equals in law the process built from the
//! rescaled data, exactly and at every `lambda`. [`scaling_identity_check`]
//! samples both sides and runs a two-sample KS test; persistent failure
//! indicates a construction bug, not an approximation error.
//!
//! The convergence checks ([`verify_convergent`], [`verify_divergent`])
//! sample marginals of the scaled process along an increasing `lambda`
//! ladder, compare each rung against simulated marginals of the limit
//! process, and report the KS distance trend. A marginal comparison cannot
//! certify functional convergence, so the divergent check also reports a
//! small sample of path distances (see [`crate::j1`]) as a diagnostic.
//!
//! Truncation policy: ladder rungs sample the native process at the finest
//! configured truncation, so the effective truncation of the scaled values
//! shrinks like `eps/lambda` along the ladder. The identity check instead
//! couples the two truncations (`eps_native = lambda * eps_scaled`), which
//! the space scaling maps onto each other exactly; anything else would
//! break the exactness of the law.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::j1::{j1_distance, CadlagPath};
use crate::measure::{limit_triple, scale_triple, BoundaryTriple, ScalingRegime};
use crate::rng::RngStream;
use crate::stats::{ks_two_sample, KsResult};
use crate::synthesis::{sample_marginal, synthesize, SynthConfig};

/// Which self-similar limit an experiment targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeKind {
    Convergent,
    Divergent,
}

impl RegimeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RegimeKind::Convergent => "convergent",
            RegimeKind::Divergent => "divergent",
        }
    }
}

/// Parameters of one scaling experiment: the ladder of scale factors, the
/// observation time, the replicate count per rung, the truncation ladder
/// (coarse to fine), and the seed.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub regime: RegimeKind,
    pub lambdas: Vec<f64>,
    pub t_star: f64,
    pub n: usize,
    pub eps_ladder: Vec<f64>,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty()
            || self.lambdas.windows(2).any(|w| w[1] <= w[0])
            || self.lambdas.iter().any(|&l| !l.is_finite() || l <= 0.0)
        {
            return Err(Error::Param(format!(
                "scale ladder must be positive, finite and increasing, got {:?}",
                self.lambdas
            )));
        }
        if !self.t_star.is_finite() || self.t_star <= 0.0 {
            return Err(Error::Param(format!(
                "observation time must be positive, got {}",
                self.t_star
            )));
        }
        if self.n < 100 {
            return Err(Error::Param(format!(
                "need at least 100 replicates per rung, got {}",
                self.n
            )));
        }
        if self.eps_ladder.is_empty()
            || self.eps_ladder.windows(2).any(|w| w[1] >= w[0])
            || self.eps_ladder.iter().any(|&e| !e.is_finite() || e <= 0.0)
        {
            return Err(Error::Param(format!(
                "truncation ladder must be positive and decreasing, got {:?}",
                self.eps_ladder
            )));
        }
        Ok(())
    }

    pub fn finest_eps(&self) -> f64 {
        *self.eps_ladder.last().unwrap()
    }
}

/// `n` independent marginals `X(t_star)` at truncation `eps`, one child
/// stream per replicate, reduced in replicate order.
pub fn marginal_sample(
    b: &BoundaryTriple,
    t_star: f64,
    eps: f64,
    n: usize,
    cfg: &SynthConfig,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    (0..n)
        .into_par_iter()
        .map(|k| {
            let mut r = rng.child(k as u64);
            sample_marginal(b, t_star, eps, cfg, &mut r)
        })
        .collect()
}

/// `n` independent marginals of `(1/lambda) X(u(lambda) t_star)` with the
/// native process truncated at `eps`.
#[allow(clippy::too_many_arguments)]
pub fn scaled_marginals(
    b: &BoundaryTriple,
    regime: &ScalingRegime,
    lambda: f64,
    t_star: f64,
    eps: f64,
    n: usize,
    cfg: &SynthConfig,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::Param(format!(
            "scale factor must be positive, got {lambda}"
        )));
    }
    let horizon = regime.u(lambda) * t_star;
    Ok(marginal_sample(b, horizon, eps, n, cfg, rng)?
        .into_iter()
        .map(|x| x / lambda)
        .collect())
}

/// Two-sample KS check of the exact scaling identity at one `lambda`: side
/// one scales down native marginals, side two samples the rescaled
/// boundary data directly. The native truncation is `lambda * eps_scaled`
/// so that the two truncated laws coincide exactly; the returned p-value
/// is uniform under a correct construction.
#[allow(clippy::too_many_arguments)]
pub fn scaling_identity_check(
    b: &BoundaryTriple,
    regime: &ScalingRegime,
    lambda: f64,
    t_star: f64,
    eps_scaled: f64,
    n: usize,
    cfg: &SynthConfig,
    rng: &RngStream,
) -> Result<KsResult> {
    let native = scaled_marginals(
        b,
        regime,
        lambda,
        t_star,
        lambda * eps_scaled,
        n,
        cfg,
        &rng.child(0),
    )?;
    let scaled_b = scale_triple(b, regime, lambda)?;
    let direct = marginal_sample(&scaled_b, t_star, eps_scaled, n, cfg, &rng.child(1))?;
    ks_two_sample(&native, &direct)
}

/// One rung of a convergence ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderRow {
    pub lambda: f64,
    pub stat: f64,
    pub pvalue: f64,
    pub n: usize,
}

/// Ladder outcome. `trend_ok` compares the KS distance at the largest and
/// smallest scale; `pass` additionally requires the largest scale to be
/// statistically compatible with the limit at the Bonferroni-adjusted
/// `level`. `j1_distances` is a small path-distance sample produced by the
/// divergent check (independent draws, diagnostic only, never gated).
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub rows: Vec<LadderRow>,
    pub trend_ok: bool,
    pub level: f64,
    pub pass: bool,
    pub j1_distances: Vec<f64>,
}

fn ladder_rows(
    b: &BoundaryTriple,
    regime: &ScalingRegime,
    limit: &BoundaryTriple,
    spec: &ExperimentSpec,
    cfg: &SynthConfig,
    rng: &RngStream,
) -> Result<Vec<LadderRow>> {
    let eps = spec.finest_eps();
    let mut rows = Vec::with_capacity(spec.lambdas.len());
    for (i, &lambda) in spec.lambdas.iter().enumerate() {
        let native = scaled_marginals(
            b,
            regime,
            lambda,
            spec.t_star,
            eps,
            spec.n,
            cfg,
            &rng.child(2 * i as u64),
        )?;
        let lim = marginal_sample(
            limit,
            spec.t_star,
            eps,
            spec.n,
            cfg,
            &rng.child(2 * i as u64 + 1),
        )?;
        let ks = ks_two_sample(&native, &lim)?;
        rows.push(LadderRow {
            lambda,
            stat: ks.stat,
            pvalue: ks.p_value,
            n: spec.n,
        });
    }
    Ok(rows)
}

fn finish_report(rows: Vec<LadderRow>, j1_distances: Vec<f64>) -> VerifyReport {
    let trend_ok = rows.len() < 2 || rows.last().unwrap().stat < rows[0].stat;
    let level = 0.01 / rows.len() as f64;
    let pass = trend_ok && rows.last().unwrap().pvalue > level;
    VerifyReport {
        rows,
        trend_ok,
        level,
        pass,
        j1_distances,
    }
}

/// Ladder comparison against the continuous-entry limit process. Requires
/// the regime to carry no jump tail index, the speed density to match its
/// declared regular variation, and a finite entry-level bound (checked by
/// the limit construction).
pub fn verify_convergent(
    b: &BoundaryTriple,
    regime: &ScalingRegime,
    spec: &ExperimentSpec,
    cfg: &SynthConfig,
) -> Result<VerifyReport> {
    spec.validate()?;
    if spec.regime != RegimeKind::Convergent {
        return Err(Error::Regime(
            "experiment is not marked convergent".into(),
        ));
    }
    if regime.beta.is_some() {
        return Err(Error::Regime(
            "a declared jump tail index contradicts the convergent regime".into(),
        ));
    }
    regime.certify_m(&b.m)?;
    let limit = limit_triple(b, regime)?;
    let rng = RngStream::new(spec.seed, 0);
    let rows = ladder_rows(b, regime, &limit, spec, cfg, &rng)?;
    Ok(finish_report(rows, Vec::new()))
}

/// Ladder comparison against the power-tail limit process, plus a small
/// path-distance diagnostic at the largest scale. Requires a declared jump
/// tail index below both 1 and `1/alpha`; at or beyond that boundary the
/// limit process does not exist.
pub fn verify_divergent(
    b: &BoundaryTriple,
    regime: &ScalingRegime,
    spec: &ExperimentSpec,
    cfg: &SynthConfig,
) -> Result<VerifyReport> {
    spec.validate()?;
    if spec.regime != RegimeKind::Divergent {
        return Err(Error::Regime("experiment is not marked divergent".into()));
    }
    let beta = regime.beta.ok_or_else(|| {
        Error::Regime("divergent regime needs a declared jump tail index".into())
    })?;
    if beta >= 1.0 / regime.alpha {
        return Err(Error::Regime(format!(
            "jump tail index {beta} is not below 1/alpha = {}; the limit \
             process does not exist",
            1.0 / regime.alpha
        )));
    }
    regime.certify_m(&b.m)?;
    let limit = limit_triple(b, regime)?;
    let rng = RngStream::new(spec.seed, 0);
    let rows = ladder_rows(b, regime, &limit, spec, cfg, &rng)?;
    let eps = spec.finest_eps();
    let lambda = *spec.lambdas.last().unwrap();
    let horizon = regime.u(lambda) * spec.t_star;
    let diag = rng.child(u64::MAX);
    let mut j1_distances = Vec::with_capacity(4);
    for k in 0..4u64 {
        let native = synthesize(b, horizon, eps, None, cfg, &diag.child(2 * k))?;
        let scaled = CadlagPath::from_synthetic(&native.path)?
            .scaled(1.0 / regime.u(lambda), 1.0 / lambda)?;
        let fresh = synthesize(&limit, spec.t_star, eps, None, cfg, &diag.child(2 * k + 1))?;
        let lim_path = CadlagPath::from_synthetic(&fresh.path)?;
        let report = j1_distance(&lim_path, &scaled, spec.t_star, eps)?;
        j1_distances.push(report.distance());
    }
    Ok(finish_report(rows, j1_distances))
}

/// Writes ladder rows as `lambda,stat,pvalue,n` CSV; the shortest
/// round-trip float format keeps reruns byte-identical.
pub fn write_results_csv<W: Write>(rows: &[LadderRow], mut w: W) -> Result<()> {
    writeln!(w, "lambda,stat,pvalue,n")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.lambda, r.stat, r.pvalue, r.n)?;
    }
    Ok(())
}
