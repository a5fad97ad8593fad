//! Dataset distillation: learn a handful of synthetic training images and
//! per-step learning rates so that a few gradient steps from an initial
//! network reproduce the effect of training on a full dataset.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. File formats and the command-line harness live in the `distill`
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod baselines;
pub mod data;
pub mod distillation;
pub mod error;
pub mod linear_case;
pub mod models;
pub mod objectives;
pub mod rng;
pub mod tensor;

pub use autodiff::{Graph, Var};
pub use data::{LabeledDataset, LinearProblem};
pub use distillation::{DistillConfig, DistilledData, DistilledStep, StepTargets};
pub use error::{Error, Result};
pub use models::{InitKind, InitSpec, ModelSpec, ParamVector};
pub use objectives::Objective;
pub use tensor::Tensor;
