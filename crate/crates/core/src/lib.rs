//! Functional extreme partial least-squares (FEPLS).
//!
//! Dimension reduction for a functional covariate `X` paired with a
//! heavy-tailed scalar response `Y`, driven by the tail of `Y`. The crate
//! contains the building blocks (discrete function space, heavy-tail
//! toolkit, synthetic inverse single-index model), the estimator itself,
//! kernel estimators of conditional extremes, a Monte Carlo harness and the
//! data pipeline that turns two price series into functional observations.

// Guards are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cond_extremes;
pub mod error;
pub mod estimator;
pub mod func_space;
pub mod heavy_tails;
pub mod integrate;
pub mod io;
pub mod mc;
pub mod pipeline;
pub mod seeding;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use estimator::{
    cov_direction, fepls_direction, select_k, FeplsFit, FeplsPath, RateOptions, Selection,
    SelectionMode, SelectionOptions, TestFunction,
};
pub use func_space::{inner_product, norm, normalize, orthogonalize, FunctionSample, Grid};
pub use heavy_tails::{hill, BurrLaw, SortedSample};
pub use synth::{generate, Dataset, ModelSpec, SigmaRule};
