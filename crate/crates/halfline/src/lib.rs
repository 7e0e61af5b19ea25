//! Construction and statistical verification of strong Markov processes on
//! the half-line built from point processes of time-changed excursions.
//!
//! The crate is organized bottom-up:
//!
//! * [`excursion`]: samplers for conditioned Brownian excursions and
//!   absorbed Brownian motion, on height-adaptive grids with exact
//!   within-step maxima.
//! * [`local_time`]: occupation-density estimation on space-time grids.
//! * [`measure`]: speed measures on the half-line, jump-size functions, the
//!   existence test for the resulting processes, and the scaling maps used
//!   by the limit checks.
//! * [`time_change`]: the additive clock of an excursion under a speed
//!   measure, its right-continuous inverse, and path surgery (shifts and
//!   time changes).
//! * [`synthesis`]: Poisson sampling of marked excursions, the jump-time
//!   staircase, and assembly of the synthesized process path.
//! * [`j1`]: piecewise-linear cadlag paths and a Skorokhod distance
//!   surrogate between them.
//! * [`harness`]: end-to-end statistical checks (distributional gates,
//!   scaling identities, convergence ladders) and experiment plumbing.
//! * [`model`]: on-disk model and experiment descriptions.
//!
//! Supporting modules: [`error`], [`numeric`], [`rng`], [`stats`].

pub mod error;
pub mod excursion;
pub mod harness;
pub mod j1;
pub mod local_time;
pub mod measure;
pub mod model;
pub mod synthesis;
pub mod time_change;
pub mod numeric;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use excursion::{path_stats, sample_absorbed_bm, sample_excursion_above, Excursion};
pub use harness::{
    marginal_sample, scaled_marginals, scaling_identity_check, verify_convergent,
    verify_divergent, write_results_csv, ExperimentSpec, LadderRow, RegimeKind, VerifyReport,
};
pub use j1::{j1_distance, CadlagPath, J1Report};
pub use measure::{
    check_existence, j_c_to_j_fn, j_fn_to_j_c, limit_triple, scale_triple, BoundaryTriple,
    DensityTerm, ExistenceVerdict, JumpFunction, JumpMeasure, ScalingRegime, SlowlyVarying,
    SpeedMeasure,
};
pub use model::{content_hash, load_experiment, load_model, parse_model, Experiment, Model};
pub use synthesis::{
    boundary_local_time, build_eta, build_path, estimate_c, intensity, laplace_exponent,
    laplace_profile, sample_eta_jump_sizes, sample_marginal, sample_point_process, synthesize,
    write_eta_csv, write_path_csv, Intensity, LocalTimeAtZero, MarkSampler, MarkedPoint,
    MarkedPointProcess, Staircase, SynthConfig, SynthesisRun, SyntheticPath,
};
pub use time_change::{
    clock, clock_from_field, sample_nm_above, sample_q_mx, shift_above, time_change_excursion,
    Clock,
};
pub use rng::RngStream;
