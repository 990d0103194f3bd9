//! Subject-invariant stress sensing, built from scratch.
//!
//! The crate implements the full training procedure for learning stress
//! classifiers that hold up on people never seen during training:
//!
//! 1. an over-parameterized feed-forward network trained with an IRM
//!    (invariant risk minimization) penalty, treating each subject as a
//!    training domain ([`trainer::train_irm_stage1`]);
//! 2. person-wise gradient pruning whose per-subject retention masks are
//!    intersected into a subject-invariant sub-network ([`pruning`]);
//! 3. sparse-to-sparse rounds that alternate mask re-identification with
//!    dense fine-tuning so the intersection can regrow ([`trainer::hhiss_train`]);
//! 4. soft continuous labels from the frozen stage-1 model, without
//!    temperature scaling ([`losses::soft_label_loss`]).
//!
//! Around the optimizer sits everything needed to exercise it at desk scale:
//! the wearable feature-extraction pipeline ([`features`]), dataset and
//! person-disjoint split handling ([`data`]), evaluation metrics
//! ([`metrics`]), ablation baselines ([`trainer`]), and a seeded synthetic
//! domain-shift generator with a closed-form Bayes oracle ([`synthgen`]).

pub mod data;
pub mod error;
pub mod features;
pub mod losses;
pub mod metrics;
pub mod net;
pub mod pruning;
pub mod rng;
pub mod synthgen;
pub mod trainer;

pub use error::{Error, Result};
pub use net::{NetworkArch, NetworkParams};
pub use trainer::TrainConfig;
