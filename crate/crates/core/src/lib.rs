//! Bayes-risk calibration of goodness-of-fit rejection thresholds.
//!
//! Under a sub-Gaussian null tail `P(sqrt(n) T_n > t) ~ exp(-2 rho t^2)` and an
//! alternative prior with local mass `eps^kappa` near the null, the Bayes risk
//! of the threshold test at `t = sqrt(a ln n)` behaves like
//!
//! ```text
//! B_n(a) = n^(-2 rho a) + (a ln n / n)^(kappa / 2)
//! ```
//!
//! which is minimised at `a* = kappa / (4 rho)`. The crate is organised around
//! that template:
//!
//! - [`risk`]: the two-term template, its closed-form optimum and a
//!   deterministic numeric minimiser.
//! - [`special`]: Kolmogorov distribution, incomplete gamma / chi-squared,
//!   normal CDF and KL divergences.
//! - [`stats`]: test statistics computed from raw samples and counts.
//! - [`calibrate`]: per-setting calibrators (KS, sign, chi-squared,
//!   contingency, Fisher) and the threshold tables.
//! - [`sanov`]: half-space KL rates by exponential tilting and related
//!   information rates.
//! - [`triangulation`]: multinomial evidence measures and their identities.
//! - [`mc`]: seeded Monte-Carlo Bayes risk and prior-exponent estimation.
//! - [`rng`]: the counter-based generator used by [`mc`].

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod calibrate;
pub mod error;
pub mod mc;
pub mod optim;
pub mod output;
pub mod rng;
pub mod risk;
pub mod sanov;
pub mod special;
pub mod stats;
pub mod triangulation;

pub use calibrate::{
    calibrate_chi2, calibrate_contingency, calibrate_fisher, calibrate_ks, calibrate_sign,
    emit_tables, Chi2Calibration, FisherCalibration, SignCalibration, TableBundle,
};
pub use error::{Error, Result};
pub use mc::{
    estimate_prior_exponent, mc_bayes_risk, plugin_threshold, McConfig, McRiskResult, PriorSpec,
    Statistic,
};
pub use risk::{
    analytic_optimum, numeric_minimiser, regime_series, template_risk, CalibrationProblem,
    RiskCurve, RiskTerms, ThresholdReport,
};
pub use sanov::{bahadur_slopes, distinguishability_radius, half_space_rate, Decay, TiltedHalfSpace};
pub use stats::{CountVector, SampleBatch};
pub use triangulation::{evidence_bundle, wilks_gap, MultinomialEvidence};
