//! On-disk model and experiment descriptions.
//!
//! Both formats are TOML with an explicit `version = 1` field. A model
//! file declares the boundary data through a small closed grammar: the
//! speed measure is either a canonical power form or a sum of density
//! terms `coef * x^a * ln(e+x)^b * ln(e+1/x)^g` plus point atoms, and the
//! jump measure likewise (or a pure power tail). An optional regime block
//! declares the regular-variation data used by the scaling maps. An
//! experiment file points at a model (relative to its own directory) and
//! fixes the ladder parameters of one verification run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::{ExperimentSpec, RegimeKind};
use crate::measure::{
    BoundaryTriple, DensityTerm, JumpMeasure, ScalingRegime, SlowlyVarying, SpeedMeasure,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    name: String,
    #[serde(default)]
    r: f64,
    #[serde(default)]
    c: f64,
    speed: SpeedSection,
    jump: Option<JumpSection>,
    regime: Option<RegimeSection>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum SpeedSection {
    Canonical {
        alpha: f64,
    },
    Density {
        terms: Vec<TermSpec>,
        #[serde(default)]
        atoms: Vec<AtomSpec>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum JumpSection {
    None,
    Power {
        beta: f64,
    },
    Density {
        terms: Vec<TermSpec>,
        #[serde(default)]
        atoms: Vec<AtomSpec>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermSpec {
    coef: f64,
    x_pow: f64,
    #[serde(default)]
    log_pow: f64,
    #[serde(default)]
    inv_log_pow: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomSpec {
    at: f64,
    mass: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegimeSection {
    alpha: f64,
    #[serde(default = "one")]
    k: f64,
    #[serde(default)]
    p: f64,
    beta: Option<f64>,
    #[serde(default = "one")]
    l_k: f64,
    #[serde(default)]
    l_p: f64,
}

fn one() -> f64 {
    1.0
}

impl TermSpec {
    fn term(&self) -> DensityTerm {
        DensityTerm {
            coef: self.coef,
            x_pow: self.x_pow,
            log_pow: self.log_pow,
            inv_log_pow: self.inv_log_pow,
        }
    }
}

/// A parsed model: named boundary data, an optional regime declaration,
/// and the content hash recorded by run manifests.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub triple: BoundaryTriple,
    pub regime: Option<ScalingRegime>,
    pub hash: String,
}

/// Lowercase hex SHA-256 of the raw file bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_model(text: &str) -> Result<Model> {
    let mf: ModelFile =
        toml::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))?;
    if mf.version != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported model format version {}, this build reads version {FORMAT_VERSION}",
            mf.version
        )));
    }
    let m = match mf.speed {
        SpeedSection::Canonical { alpha } => SpeedMeasure::canonical(alpha)?,
        SpeedSection::Density { terms, atoms } => SpeedMeasure::from_terms(
            terms.iter().map(TermSpec::term).collect(),
            atoms.iter().map(|a| (a.at, a.mass)).collect(),
        )?,
    };
    let j = match mf.jump.unwrap_or(JumpSection::None) {
        JumpSection::None => JumpMeasure::empty(),
        JumpSection::Power { beta } => JumpMeasure::canonical(beta)?,
        JumpSection::Density { terms, atoms } => JumpMeasure::from_terms(
            terms.iter().map(TermSpec::term).collect(),
            atoms.iter().map(|a| (a.at, a.mass)).collect(),
        )?,
    };
    let triple = BoundaryTriple::new(m, j, mf.c, mf.r)?;
    let regime = mf.regime.map(build_regime).transpose()?;
    Ok(Model {
        name: mf.name,
        triple,
        regime,
        hash: content_hash(text.as_bytes()),
    })
}

fn build_regime(r: RegimeSection) -> Result<ScalingRegime> {
    let k_slow = SlowlyVarying { k: r.k, p: r.p };
    match r.beta {
        None => ScalingRegime::convergent(r.alpha, k_slow),
        Some(beta) => ScalingRegime::divergent(
            r.alpha,
            k_slow,
            beta,
            SlowlyVarying { k: r.l_k, p: r.l_p },
        ),
    }
}

pub fn load_model(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read model {}: {e}", path.display())))?;
    parse_model(&text)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    version: u32,
    model: String,
    regime: String,
    lambdas: Vec<f64>,
    t_star: f64,
    n: usize,
    eps: Vec<f64>,
    seed: u64,
    out_dir: String,
}

/// A loaded experiment: the model it points at, the validated run
/// parameters, and the output directory (taken verbatim, so relative
/// paths resolve against the working directory).
#[derive(Debug)]
pub struct Experiment {
    pub model: Model,
    pub model_path: PathBuf,
    pub spec: ExperimentSpec,
    pub out_dir: PathBuf,
}

pub fn load_experiment(path: &Path) -> Result<Experiment> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read experiment {}: {e}", path.display())))?;
    let raw: ExperimentFile =
        toml::from_str(&text).map_err(|e| Error::Parse(format!("experiment file: {e}")))?;
    if raw.version != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported experiment format version {}, this build reads version {FORMAT_VERSION}",
            raw.version
        )));
    }
    let regime = match raw.regime.as_str() {
        "convergent" => RegimeKind::Convergent,
        "divergent" => RegimeKind::Divergent,
        other => {
            return Err(Error::Parse(format!(
                "unknown regime '{other}', want 'convergent' or 'divergent'"
            )))
        }
    };
    let model_path = path.parent().unwrap_or(Path::new(".")).join(&raw.model);
    let model = load_model(&model_path)?;
    let spec = ExperimentSpec {
        regime,
        lambdas: raw.lambdas,
        t_star: raw.t_star,
        n: raw.n,
        eps_ladder: raw.eps,
        seed: raw.seed,
    };
    spec.validate()?;
    Ok(Experiment {
        model,
        model_path,
        spec,
        out_dir: PathBuf::from(raw.out_dir),
    })
}
