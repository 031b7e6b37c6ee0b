//! Binary-classification losses built from a prescribed Bregman divergence,
//! and kernel density-ratio estimation with them.
//!
//! The core is generic over `f32`/`f64` through [`Scalar`]; the `*64` aliases
//! below are what most callers want.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x >= 0)` is how NaN gets rejected

pub mod dre;
pub mod error;
pub mod generators;
pub mod iw;
pub mod kernel;
pub mod linalg;
pub mod losses;
pub mod optim;
pub mod quadrature;
pub mod scalar;
pub mod synth;
pub mod verify;

pub use dre::{
    cross_validate_alpha, empirical_risk, fit, kulsif_closed_form, population_fit_parametric, predict_ratio,
    CvResult, FitConfig, FitDiagnostics, ParametricFit, RatioModel, SampleSet,
};
pub use error::{Error, Result};
pub use generators::{
    bregman_term, builtin_generator, diamond_transform, divergence_discrete, divergence_quadrature,
    weight_representation, BinaryNegEntropy, BregmanGenerator, DiamondGenerator, DiscretePair, FnGenerator,
    Generator, GeneratorFamily,
};
pub use iw::{iwa_aggregate, iwv_select, weighted_krr, weighted_sq_risk, CandidateSet, KrrModel, Predictor};
pub use kernel::{gram, kernel_eval, median_heuristic, KernelSpec, Point};
pub use linalg::Matrix;
pub use losses::{construct_loss, family_loss, loss_for, CompositeLoss, RatioMap};
pub use optim::{bfgs, BfgsConfig, Objective, OptimResult, Status};
pub use scalar::Scalar;
pub use synth::{gaussian_pair, regression_task, GaussianPair, PiecewisePairSpec, RegressionTask, Rng, Which};

pub type Family64 = GeneratorFamily<f64>;
pub type Generator64 = BregmanGenerator<f64>;
pub type Loss64 = CompositeLoss<f64>;
pub type Kernel64 = KernelSpec<f64>;
pub type Model64 = RatioModel<f64>;
pub type Matrix64 = Matrix<f64>;
pub type Samples64 = SampleSet<f64>;

pub type Family32 = GeneratorFamily<f32>;
pub type Generator32 = BregmanGenerator<f32>;
pub type Loss32 = CompositeLoss<f32>;
pub type Kernel32 = KernelSpec<f32>;
pub type Model32 = RatioModel<f32>;
