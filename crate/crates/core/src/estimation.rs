//! Voltage-based SOC lookup with first-order uncertainty propagation, the
//! non-linearity coefficient, and two-point capacity estimation.
//!
//! Inverting a monotone OCV curve maps a voltage observation with standard
//! deviation `sigma_e` onto a SOC estimate whose first-order variance is
//! `(1/f'(s))^2 * sigma_e^2`. The factor `(1/f'(s))^2` is the
//! non-linearity coefficient (nlc): flat stretches of the curve amplify
//! voltage error, steep stretches suppress it.
//!
//! Two SOC estimates bracketing a known transferred charge `C` give the
//! inverse capacity `q_inv = |s2 - s1| / C`; its reciprocal estimates the
//! capacity, with variance `(var_s1 + var_s2) / (C^2 * q_inv^4)` by the
//! same first-order argument applied to the reciprocal.

use crate::error::{Error, Result};
use crate::model::{OcvModel, SocFraction, Voltage};
use crate::real::{real, to_f64, Real};

/// Grid density used for the monotonicity precondition check.
pub const MONOTONE_GRID: usize = 256;

/// Hard cap on Newton refinements; the bracketed search converges in a
/// handful of steps, so hitting this means returning the bracket midpoint.
const MAX_NEWTON_STEPS: usize = 64;

/// A voltage observation with its measurement standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcvObservation<T> {
    ocv: Voltage<T>,
    sigma_v: T,
}

impl<T: Real> OcvObservation<T> {
    /// Requires a finite, non-negative standard deviation.
    pub fn new(ocv: Voltage<T>, sigma_v: T) -> Result<Self> {
        if !sigma_v.is_finite() || sigma_v < T::zero() {
            return Err(Error::InvalidArgument(format!(
                "sigma {sigma_v} V must be finite and non-negative"
            )));
        }
        Ok(Self { ocv, sigma_v })
    }

    /// Convenience constructor for an exact (noise-free) observation.
    pub fn exact(ocv: Voltage<T>) -> Self {
        Self { ocv, sigma_v: T::zero() }
    }

    pub fn ocv(&self) -> Voltage<T> {
        self.ocv
    }

    pub fn sigma_v(&self) -> T {
        self.sigma_v
    }
}

/// SOC lookup result with propagated uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocEstimate<T> {
    /// Root of `f(s) = observed OCV`, saturated to the domain ends when the
    /// observation falls outside the curve's range.
    pub soc: SocFraction<T>,
    /// First-order SOC variance, `nlc * sigma_v^2`.
    pub variance: T,
    /// Non-linearity coefficient `(1/f'(soc))^2`.
    pub nlc: T,
    /// Whether the observation fell outside `[f(eps), f(1-eps)]`.
    pub saturated: bool,
}

/// Two-point capacity estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityEstimate<T> {
    /// Inverse capacity `|s2 - s1| / C` in 1/Ah.
    pub q_inv: T,
    /// Capacity `1 / q_inv` in Ah.
    pub q_ah: T,
    /// First-order variance of `q_ah` in Ah^2.
    pub variance: T,
    /// Signed SOC change `s2 - s1`; negative when the cell discharged.
    pub soc_delta: T,
    /// Whether either endpoint lookup saturated.
    pub saturated: bool,
}

pub(crate) struct Inversion<T> {
    pub soc: T,
    pub saturated: bool,
}

/// Solves `f(s) = target_v` for a monotone model on `[eps, 1-eps]`.
///
/// Bisection narrows the bracket to 1e-3, then bracket-guarded Newton steps
/// finish to `|f(s) - target| < 1e-10 V` or bracket width `< 1e-12` (both
/// widened to a few machine epsilons for narrower scalar types). Targets
/// outside the curve's range saturate at the nearest domain end.
///
/// The caller is responsible for the monotonicity check.
pub(crate) fn invert_monotone<T: Real>(model: &OcvModel<T>, target_v: T) -> Inversion<T> {
    let mut lo = model.epsilon();
    let mut hi = T::one() - model.epsilon();
    let f_lo = model.eval_clamped(lo);
    let f_hi = model.eval_clamped(hi);
    if target_v <= f_lo {
        return Inversion { soc: lo, saturated: target_v < f_lo };
    }
    if target_v >= f_hi {
        return Inversion { soc: hi, saturated: target_v > f_hi };
    }

    let eight = real::<T>(8.0);
    let four = real::<T>(4.0);
    let v_tol = real::<T>(1e-10).max(eight * T::epsilon() * target_v.abs());
    let s_tol = real::<T>(1e-12).max(four * T::epsilon());
    let half = real::<T>(0.5);

    let coarse = real::<T>(1e-3);
    while hi - lo > coarse {
        let mid = (lo + hi) * half;
        if model.eval_clamped(mid) < target_v {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut s = (lo + hi) * half;
    for _ in 0..MAX_NEWTON_STEPS {
        let residual = model.eval_clamped(s) - target_v;
        if residual.abs() < v_tol {
            return Inversion { soc: s, saturated: false };
        }
        if residual > T::zero() {
            hi = s;
        } else {
            lo = s;
        }
        if hi - lo < s_tol {
            break;
        }
        let slope = model.slope_clamped(s);
        let newton = s - residual / slope;
        s = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) * half
        };
    }
    Inversion { soc: (lo + hi) * half, saturated: false }
}

pub(crate) fn lookup_soc_unchecked<T: Real>(
    model: &OcvModel<T>,
    obs: &OcvObservation<T>,
) -> SocEstimate<T> {
    let inversion = invert_monotone(model, obs.ocv.volts());
    let slope = model.slope_clamped(inversion.soc);
    let nlc = (T::one() / slope) * (T::one() / slope);
    SocEstimate {
        soc: SocFraction::new(inversion.soc).expect("inversion stays within [eps, 1-eps]"),
        variance: nlc * obs.sigma_v * obs.sigma_v,
        nlc,
        saturated: inversion.saturated,
    }
}

/// Looks up the SOC matching an OCV observation and propagates its variance.
///
/// Errors with `AmbiguousInverse` when the model is not strictly increasing
/// (checked on a 256-point grid). Observations outside the curve's range
/// saturate at the domain ends and set the `saturated` flag.
pub fn lookup_soc<T: Real>(model: &OcvModel<T>, obs: &OcvObservation<T>) -> Result<SocEstimate<T>> {
    if !model.is_monotone(MONOTONE_GRID) {
        return Err(Error::AmbiguousInverse);
    }
    Ok(lookup_soc_unchecked(model, obs))
}

/// Non-linearity coefficient `(1/f'(s))^2` at each grid point.
///
/// Assumes a monotone model; a zero slope yields an infinite coefficient
/// rather than an error so the curve can still be plotted.
pub fn nlc_curve<T: Real>(model: &OcvModel<T>, grid: &[SocFraction<T>]) -> Vec<(T, T)> {
    grid.iter()
        .map(|s| {
            let slope = model.derivative(*s);
            let inv = T::one() / slope;
            (s.value(), inv * inv)
        })
        .collect()
}

pub(crate) fn estimate_capacity_unchecked<T: Real>(
    model: &OcvModel<T>,
    obs_start: &OcvObservation<T>,
    obs_end: &OcvObservation<T>,
    coulombs_c: T,
) -> Result<CapacityEstimate<T>> {
    let start = lookup_soc_unchecked(model, obs_start);
    let end = lookup_soc_unchecked(model, obs_end);
    let soc_delta = end.soc.value() - start.soc.value();
    if soc_delta.abs() < real(1e-6) {
        return Err(Error::IllConditionedDelta(to_f64(soc_delta.abs())));
    }
    let q_inv = soc_delta.abs() / coulombs_c;
    let q_ah = T::one() / q_inv;
    let c2 = coulombs_c * coulombs_c;
    let q_inv4 = q_inv.powi(4);
    Ok(CapacityEstimate {
        q_inv,
        q_ah,
        variance: (start.variance + end.variance) / (c2 * q_inv4),
        soc_delta,
        saturated: start.saturated || end.saturated,
    })
}

/// Estimates capacity from OCV observations taken before and after
/// transferring `coulombs_c` amp-hours (magnitude of the net charge moved).
///
/// Both observations are inverted through the model; the SOC change per
/// amp-hour estimates the inverse capacity. Fails with
/// `IllConditionedDelta` when the two SOCs are within 1e-6 of each other
/// and with `AmbiguousInverse` for non-monotone models.
pub fn estimate_capacity<T: Real>(
    model: &OcvModel<T>,
    obs_start: &OcvObservation<T>,
    obs_end: &OcvObservation<T>,
    coulombs_c: T,
) -> Result<CapacityEstimate<T>> {
    if !coulombs_c.is_finite() || coulombs_c <= T::zero() {
        return Err(Error::InvalidArgument(format!(
            "transferred charge {coulombs_c} Ah must be finite and positive"
        )));
    }
    if !model.is_monotone(MONOTONE_GRID) {
        return Err(Error::AmbiguousInverse);
    }
    estimate_capacity_unchecked(model, obs_start, obs_end, coulombs_c)
}
