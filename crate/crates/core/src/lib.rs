//! Joint embedding of incomplete multi-view features and weak labels into a
//! shared nonnegative latent space.
//!
//! Every view `X^v` is reconstructed as `F U^v` under a masked, robust
//! L2,1 loss weighted by adaptive view weights α. Observed labels are fit
//! through `σ(F U^{m+1})` with a focal loss. An HSIC penalty, weighted per
//! pair by β, pushes the weight matrices apart. Missing labels are then
//! predicted by thresholding `σ(F U^{m+1})`.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the
//! experiment harness and the command-line tool are in the `nail` crate.

#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
mod descent;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod solver;

pub use data::{synthesize, MaskSpec, MultiViewDataset, PlantedModel, SyntheticSpec};
pub use error::{Error, Result};
pub use kernels::{Bandwidth, Kernel, KernelKind, KernelSpec};
pub use linalg::{Mask, Mat};
pub use losses::{LossConfig, ObjectiveBreakdown, ObjectiveSpec};
pub use metrics::{average_precision, hamming_score, EvalMask};
pub use model::ModelState;
pub use solver::{fit, predict, FitTrace, Prediction, SolverConfig, SolverError, Variant};
