//! Ordinal pattern dependence for bivariate long-range dependent Gaussian series.
//!
//! The numerical core is generic over the floating-point type (`f32` or `f64`)
//! through [`Scalar`]; the covariance and Monte Carlo layers work in `f64`.

// `!(x < 1.0)` also rejects NaN; indexed loops follow the triangular algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod estimators;
pub mod hermite;
pub mod mc;
pub mod ordinal;
pub mod processgen;
pub mod rosenblatt;
pub mod scalar;
pub mod seed;

pub use error::{OpdError, Result};
pub use estimators::{
    c2_constant, estimate_opd, estimate_opd_increments, estimate_opd_kind, estimate_p,
    estimate_p_increments, estimate_q, estimate_q_increments, normalize_lrd, normalize_srd,
    signed_opd, theoretical_p_h1, OpdEstimate, SeriesKind,
};
pub use hermite::{
    alpha_tilde_h1_closed_form, alpha_weights, coincidence_probability_mc, hermite_coeff_matrix,
    hermite_poly, limit_weights, srd_variance, HermiteCoefficients, LimitWeights, SrdVariance,
};
pub use mc::{
    ks_statistic, moments, qq_data, run_limit_experiment, Diagnostics, ExperimentConfig,
    McSampleSet, Moments, Regime, TrueP, TruePMode,
};
pub use ordinal::{
    all_patterns, canonical_half, encode_increments, encode_pattern, OrdinalPattern,
    PatternHalfSet,
};
pub use processgen::{
    extended_covariance, fgn_autocovariance, simulate_bivariate, simulate_fgn,
    BivariateLrdModel, BivariatePath, BivariateSimulator, ExtendedCovariance, FgnGenerator,
    SecondInnovation,
};
pub use rosenblatt::{
    limit_coefficients, rosenblatt_cov, sample_rosenblatt, sample_rosenblatt_batch,
    sample_rosenblatt_pair, weighted_limit_sample, RosenblattPair, RosenblattPairSampler,
    RosenblattSample, RosenblattSampler, WeightedLimitSampler,
};
pub use scalar::Scalar;
pub use seed::Seed;

pub type Path64 = BivariatePath<f64>;
pub type Path32 = BivariatePath<f32>;
pub type FgnGenerator64 = FgnGenerator<f64>;
pub type FgnGenerator32 = FgnGenerator<f32>;
pub type Simulator64 = BivariateSimulator<f64>;
pub type Simulator32 = BivariateSimulator<f32>;
pub type RosenblattSampler64 = RosenblattSampler<f64>;
pub type RosenblattSampler32 = RosenblattSampler<f32>;
