//! Sparse signal recovery with approximate message passing.
//!
//! The crate provides AMP with soft thresholding, Bayesian AMP with MMSE
//! denoisers for spike-and-slab priors, and BOSSAMP, which exchanges
//! extrinsic L-values between the members of a group (or across jointly
//! sparse blocks) after every iteration to refine the per-entry zero
//! probabilities.
//!
//! ```
//! use bossamp::{make_instance, bossamp_group, nmse, PriorKind, StoppingRule};
//!
//! let inst = make_instance(120, 256, 32, 4, PriorKind::SparseBinary, 30.0, 7).unwrap();
//! let out = bossamp_group(&inst.y, &inst.a, &inst.prior, &inst.groups, StoppingRule::default()).unwrap();
//! assert!(nmse(&inst.x_true, &out.x_hat).unwrap() < 1e-4);
//! ```

pub mod denoise;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod quadrature;
pub mod recover;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::SensingMatrix;
pub use metrics::{fanmse, nmse, success_indicator};
pub use model::{
    make_instance, make_joint_instance, GroupStructure, JointInstance, PriorKind, ProblemInstance,
    SignalPrior,
};
pub use recover::{
    amp, bamp, bossamp_group, bossamp_joint, RecoveryResult, SolverOptions, StoppingRule,
};
pub use experiment::{run_experiment, run_phase_transition, write_csv, ExperimentConfig, Family};
