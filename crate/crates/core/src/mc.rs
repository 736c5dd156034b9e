//! Monte-Carlo validation of the closed-form statistics: the first-order
//! SOC mean/variance from voltage lookup, the two-point capacity variance,
//! and the additive error-budget combination.
//!
//! Each check draws synthetic observations with a counter-based RNG
//! (ChaCha12, 64-bit seeds, identical streams on every platform), runs the
//! estimator under test, and compares empirical moments against the
//! analytic formula in a [`McReport`].

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{
    estimate_capacity_unchecked, invert_monotone, OcvObservation, MONOTONE_GRID,
};
use crate::model::{OcvModel, SocFraction, Voltage};
use crate::real::{to_f64, Real};
use crate::stats::Welford;
use crate::uncertainty::ErrorBudget;

/// Absolute tolerance on the empirical SOC mean.
pub const SOC_MEAN_TOL_ABS: f64 = 0.002;
/// Relative tolerance on the empirical SOC variance.
pub const SOC_VARIANCE_TOL_REL: f64 = 0.05;
/// Relative tolerance on the empirical capacity mean.
pub const CAPACITY_MEAN_TOL_REL: f64 = 0.01;
/// Relative tolerance on the empirical capacity variance.
pub const CAPACITY_VARIANCE_TOL_REL: f64 = 0.10;
/// Relative tolerance on the empirical budget variance.
pub const BUDGET_VARIANCE_TOL_REL: f64 = 0.02;
/// Floor applied to `|analytic|` in the relative-error denominator.
pub const REL_ERROR_FLOOR: f64 = 1e-15;

/// Which statistic a report validates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McQuantity {
    SocMean,
    SocVariance,
    CapacityMean,
    CapacityVariance,
    BudgetMoments,
}

impl std::fmt::Display for McQuantity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            McQuantity::SocMean => "soc_mean",
            McQuantity::SocVariance => "soc_variance",
            McQuantity::CapacityMean => "capacity_mean",
            McQuantity::CapacityVariance => "capacity_variance",
            McQuantity::BudgetMoments => "budget_moments",
        };
        f.write_str(name)
    }
}

/// Outcome of one analytic-vs-empirical comparison.
///
/// `rel_error = |empirical - analytic| / max(|analytic|, 1e-15)` and
/// `passed` holds exactly when `rel_error <= tolerance`. Runs where more
/// than 1% of inversions saturated at a domain end are flagged
/// `reliable: false`; diagnostic runs outside the first-order regime carry
/// `enforced: false` so campaign verdicts can skip them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub quantity: McQuantity,
    /// Human-readable run parameters.
    pub label: String,
    pub analytic: f64,
    pub empirical: f64,
    /// Trials contributing to `empirical` (after drops).
    pub n_samples: u64,
    pub rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Inversions clamped at a domain end.
    pub n_saturated: u64,
    /// Trials discarded as ill-conditioned.
    pub n_dropped: u64,
    pub reliable: bool,
    pub enforced: bool,
}

impl McReport {
    fn new(
        quantity: McQuantity,
        label: String,
        analytic: f64,
        empirical: f64,
        n_samples: u64,
        tolerance: f64,
    ) -> Self {
        let rel_error = (empirical - analytic).abs() / analytic.abs().max(REL_ERROR_FLOOR);
        Self {
            quantity,
            label,
            analytic,
            empirical,
            n_samples,
            rel_error,
            tolerance,
            passed: rel_error <= tolerance,
            n_saturated: 0,
            n_dropped: 0,
            reliable: true,
            enforced: true,
        }
    }

    fn with_counts(mut self, n_saturated: u64, n_dropped: u64, trials: u64) -> Self {
        self.n_saturated = n_saturated;
        self.n_dropped = n_dropped;
        self.reliable = n_saturated * 100 <= trials;
        self
    }

    /// Marks the report as informational: still emitted, never gating.
    pub fn with_enforced(mut self, enforced: bool) -> Self {
        self.enforced = enforced;
        self
    }
}

/// Maps an absolute mean tolerance onto the relative scale `rel_error`
/// lives on, so `passed` keeps its single definition.
fn mean_tolerance(analytic: f64) -> f64 {
    SOC_MEAN_TOL_ABS / analytic.abs().max(REL_ERROR_FLOOR)
}

/// Derives an independent 64-bit sub-seed for a numbered stream
/// (splitmix64-style mixing).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn require_monotone<T: Real>(model: &OcvModel<T>) -> Result<()> {
    if model.is_monotone(MONOTONE_GRID) {
        Ok(())
    } else {
        Err(Error::AmbiguousInverse)
    }
}

fn require_samples(n_samples: u64) -> Result<()> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {n_samples}")));
    }
    Ok(())
}

/// Validates the first-order SOC lookup statistics: draws
/// `E_hat = f(s_true) + N(0, sigma_e^2)`, inverts each draw, and compares
/// the empirical mean to `s_true` (0.002 absolute) and the empirical
/// variance to `(1/f'(s_true))^2 * sigma_e^2` (5% relative).
///
/// Draws falling outside the curve's range saturate and are counted; runs
/// with more than 1% saturation are flagged unreliable. Trustworthy
/// verdicts need on the order of 10^4 samples or more.
pub fn validate_soc_lemma<T: Real>(
    model: &OcvModel<T>,
    s_true: SocFraction<T>,
    sigma_e: T,
    n_samples: u64,
    seed: u64,
) -> Result<(McReport, McReport)>
where
    StandardNormal: Distribution<T>,
{
    if !sigma_e.is_finite() || sigma_e < T::zero() {
        return Err(Error::InvalidArgument(format!(
            "sigma_e {sigma_e} V must be finite and non-negative"
        )));
    }
    require_samples(n_samples)?;
    require_monotone(model)?;

    let truth_v = model.evaluate(s_true).volts();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut moments = Welford::<f64>::default();
    let mut n_saturated = 0u64;
    for _ in 0..n_samples {
        let z: T = StandardNormal.sample(&mut rng);
        let inversion = invert_monotone(model, truth_v + sigma_e * z);
        if inversion.saturated {
            n_saturated += 1;
        }
        moments.push(to_f64(inversion.soc));
    }

    let slope = to_f64(model.derivative(s_true));
    let sigma = to_f64(sigma_e);
    let analytic_mean = to_f64(s_true.value());
    let analytic_variance = (sigma / slope) * (sigma / slope);
    let label = format!("soc lemma: s={}, sigma_e={} V", s_true.value(), sigma_e);

    let mean = McReport::new(
        McQuantity::SocMean,
        label.clone(),
        analytic_mean,
        moments.mean(),
        n_samples,
        mean_tolerance(analytic_mean),
    )
    .with_counts(n_saturated, 0, n_samples);
    let variance = McReport::new(
        McQuantity::SocVariance,
        label,
        analytic_variance,
        moments.variance(),
        n_samples,
        SOC_VARIANCE_TOL_REL,
    )
    .with_counts(n_saturated, 0, n_samples);
    Ok((mean, variance))
}

/// Validates the two-point capacity statistics: perturbs both endpoint
/// OCVs independently with `N(0, sigma_e^2)`, runs the capacity estimator
/// with the true transferred charge `C = q_true * |s1 - s2|`, and compares
/// the empirical mean of `q_hat` to `q_true` (1% relative) and its
/// empirical variance to the first-order formula at the truth
/// (10% relative).
///
/// Trials whose perturbed SOCs collapse within the ill-conditioning
/// threshold are dropped and counted.
pub fn validate_capacity<T: Real>(
    model: &OcvModel<T>,
    s1: SocFraction<T>,
    s2: SocFraction<T>,
    q_true_ah: T,
    sigma_e: T,
    n_samples: u64,
    seed: u64,
) -> Result<(McReport, McReport)>
where
    StandardNormal: Distribution<T>,
{
    if !q_true_ah.is_finite() || q_true_ah <= T::zero() {
        return Err(Error::InvalidArgument(format!(
            "true capacity {q_true_ah} Ah must be finite and positive"
        )));
    }
    if !sigma_e.is_finite() || sigma_e < T::zero() {
        return Err(Error::InvalidArgument(format!(
            "sigma_e {sigma_e} V must be finite and non-negative"
        )));
    }
    let delta = (s1.value() - s2.value()).abs();
    if to_f64(delta) < 0.1 {
        return Err(Error::InvalidArgument(format!(
            "|s1 - s2| = {delta} is too small; endpoints must differ by at least 0.1"
        )));
    }
    require_samples(n_samples)?;
    require_monotone(model)?;

    let coulombs = q_true_ah * delta;
    let v1 = model.evaluate(s1).volts();
    let v2 = model.evaluate(s2).volts();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut moments = Welford::<f64>::default();
    let mut n_saturated = 0u64;
    let mut n_dropped = 0u64;
    for _ in 0..n_samples {
        let z1: T = StandardNormal.sample(&mut rng);
        let z2: T = StandardNormal.sample(&mut rng);
        let obs1 = OcvObservation::new(Voltage::new(v1 + sigma_e * z1)?, sigma_e)?;
        let obs2 = OcvObservation::new(Voltage::new(v2 + sigma_e * z2)?, sigma_e)?;
        match estimate_capacity_unchecked(model, &obs1, &obs2, coulombs) {
            Ok(estimate) => {
                if estimate.saturated {
                    n_saturated += 1;
                }
                moments.push(to_f64(estimate.q_ah));
            }
            Err(Error::IllConditionedDelta(_)) => n_dropped += 1,
            Err(other) => return Err(other),
        }
    }
    let used = moments.count as u64;
    if used < 2 {
        return Err(Error::InsufficientData { needed: 2, got: used as usize });
    }

    // First-order variance at the truth, all in f64 for reporting.
    let sigma = to_f64(sigma_e);
    let q_true = to_f64(q_true_ah);
    let c = to_f64(coulombs);
    let var_s1 = (sigma / to_f64(model.derivative(s1))).powi(2);
    let var_s2 = (sigma / to_f64(model.derivative(s2))).powi(2);
    let q_inv_true = to_f64(delta) / c;
    let analytic_variance = (var_s1 + var_s2) / (c * c * q_inv_true.powi(4));
    let label = format!(
        "capacity: s1={}, s2={}, q_true={} Ah, sigma_e={} V",
        s1.value(),
        s2.value(),
        q_true_ah,
        sigma_e
    );

    let mean = McReport::new(
        McQuantity::CapacityMean,
        label.clone(),
        q_true,
        moments.mean(),
        used,
        CAPACITY_MEAN_TOL_REL,
    )
    .with_counts(n_saturated, n_dropped, n_samples);
    let variance = McReport::new(
        McQuantity::CapacityVariance,
        label,
        analytic_variance,
        moments.variance(),
        used,
        CAPACITY_VARIANCE_TOL_REL,
    )
    .with_counts(n_saturated, n_dropped, n_samples);
    Ok((mean, variance))
}

/// Validates the additive budget combination: the empirical variance of
/// `budget.sample(s, ...)` must match `combined_sd(s)^2` within 2%.
pub fn validate_budget<T: Real>(
    budget: &ErrorBudget<T>,
    s: SocFraction<T>,
    n_samples: u64,
    seed: u64,
) -> Result<McReport>
where
    StandardNormal: Distribution<T>,
{
    require_samples(n_samples)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut moments = Welford::<f64>::default();
    for _ in 0..n_samples {
        moments.push(to_f64(budget.sample(s, &mut rng)));
    }
    let label = format!("budget moments: {} channels at s={}", budget.sources().len(), s.value());
    Ok(McReport::new(
        McQuantity::BudgetMoments,
        label,
        to_f64(budget.combined_variance(s)),
        moments.variance(),
        n_samples,
        BUDGET_VARIANCE_TOL_REL,
    ))
}

/// Runs the full budget-to-SOC pipeline: draws the total OCV error from
/// the budget, inverts each perturbed voltage, and compares the SOC
/// moments against the first-order predictions
/// `mean = s_true + bias/f'(s_true)` and
/// `variance = (1/f'(s_true))^2 * combined_sd(s_true)^2`.
///
/// The mean comparison is a first-order diagnostic of how the budget's
/// bias propagates into SOC, not an exact closed form; callers typically
/// mark it unenforced when the bias is nonzero.
pub fn validate_soc_with_budget<T: Real>(
    model: &OcvModel<T>,
    s_true: SocFraction<T>,
    budget: &ErrorBudget<T>,
    n_samples: u64,
    seed: u64,
) -> Result<(McReport, McReport)>
where
    StandardNormal: Distribution<T>,
{
    require_samples(n_samples)?;
    require_monotone(model)?;

    let truth_v = model.evaluate(s_true).volts();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut moments = Welford::<f64>::default();
    let mut n_saturated = 0u64;
    for _ in 0..n_samples {
        let e = truth_v + budget.sample(s_true, &mut rng);
        let inversion = invert_monotone(model, e);
        if inversion.saturated {
            n_saturated += 1;
        }
        moments.push(to_f64(inversion.soc));
    }

    let slope = to_f64(model.derivative(s_true));
    let bias = to_f64(budget.combined_bias(s_true));
    let analytic_mean = to_f64(s_true.value()) + bias / slope;
    let analytic_variance = to_f64(budget.combined_variance(s_true)) / (slope * slope);
    let label =
        format!("budget-driven soc: {} channels at s={}", budget.sources().len(), s_true.value());

    let mean = McReport::new(
        McQuantity::SocMean,
        label.clone(),
        analytic_mean,
        moments.mean(),
        n_samples,
        mean_tolerance(analytic_mean),
    )
    .with_counts(n_saturated, 0, n_samples);
    let variance = McReport::new(
        McQuantity::SocVariance,
        label,
        analytic_variance,
        moments.variance(),
        n_samples,
        SOC_VARIANCE_TOL_REL,
    )
    .with_counts(n_saturated, 0, n_samples);
    Ok((mean, variance))
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write>(reports: &[McReport], mut writer: W) -> Result<()> {
    for report in reports {
        serde_json::to_writer(&mut writer, report)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Header of the CSV summary emitted next to the JSONL report.
pub const SUMMARY_CSV_HEADER: &str = "quantity,analytic,empirical,rel_error,passed";

/// Writes the condensed CSV summary (one row per report).
pub fn write_csv_summary<W: Write>(reports: &[McReport], mut writer: W) -> Result<()> {
    writeln!(writer, "{SUMMARY_CSV_HEADER}")?;
    for r in reports {
        writeln!(
            writer,
            "{},{},{},{},{}",
            r.quantity, r.analytic, r.empirical, r.rel_error, r.passed
        )?;
    }
    Ok(())
}
