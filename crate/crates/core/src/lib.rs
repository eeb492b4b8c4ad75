//! Sign-restricted (∞,1) norms of kernel operators.
//!
//! A positive-definite kernel `K` on `ℝ₊ × ℝ₊` (or `ℕ × ℕ`) induces a
//! stable RKHS exactly when its integral operator maps bounded inputs to
//! integrable outputs, i.e. when
//!
//! ```text
//! ‖K‖∞,1 = sup_{‖u‖∞ = 1} ∫ | ∫ K(t, τ) u(τ) dτ | dt < ∞,
//! ```
//!
//! and the supremum may be restricted to inputs with `|u(t)| = 1`. This
//! crate discretizes the operator on a midpoint grid (or takes the matrix
//! directly in discrete time), estimates the norm over sign patterns, turns
//! arbitrary box-valued inputs into sign patterns without losing objective,
//! and tracks the norm of truncated kernels to flag unbounded growth.
//!
//! ```
//! use kstab_core::{discretize, build_grid, make_evaluator, norm_restarts, KernelSpec, TimeMode};
//!
//! let spec = KernelSpec::tc(1.0).unwrap();
//! let grid = build_grid(10.0, 0.05, TimeMode::Continuous).unwrap();
//! let op = discretize(&make_evaluator(&spec).unwrap(), &grid);
//! let est = norm_restarts(&op, 4, 1).unwrap();
//! assert!((est.lower - 2.0).abs() < 0.01);
//! ```

pub mod constructive;
pub mod error;
pub mod io;
pub mod kernels;
pub mod matrix;
pub mod norms;
pub mod operator;
pub mod rng;
pub mod truncation;

pub use constructive::{
    bibo_single, lemma2_boost, lemma3_signify, lemma3_signify_detailed, level_set,
    maximize_sign, maximize_sign_traced, sign_of, BoostStep, BoostTrace, Signification,
};
pub use error::{Error, Result};
pub use kernels::{
    load_spec, make_evaluator, make_matrix, parse_spec, parse_spec_in, Family, KernelEvaluator,
    KernelParams, KernelSpec, TimeMode,
};
pub use matrix::SquareMatrix;
pub use norms::{
    alternate, box_sample_max, norm_alternating, norm_bound_only, norm_exact,
    norm_exact_with_limit, norm_restarts, norm_restarts_from, norm_upper, AscentRun, Method,
    NormEstimate, ENUMERATION_LIMIT,
};
pub use operator::{
    build_grid, discretize, discretize_matrix, l1_norm, output_l1, DiscreteOperator, Grid,
    SignPattern, TestFunction,
};
pub use truncation::{
    classify, doubling_ratios, extend_sign, truncation_norms, Classification, ClassifyOptions,
    FitResiduals, GrowthFit, GrowthModel, TruncationConfig, TruncationReport, Verdict,
};
