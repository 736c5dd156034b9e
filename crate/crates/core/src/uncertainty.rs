//! Per-SOC Gaussian OCV error channels and their combination.
//!
//! The total OCV error is modeled as the sum of six independent channels
//! (cell-to-cell spread, temperature, aging, cycle rate, curve fit, and
//! measurement/estimation), each Gaussian with a SOC-dependent mean and
//! standard deviation given as piecewise-linear tables. Variances add
//! across channels; means are summed separately as a bias and never folded
//! into the combined variance.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::lerp_sorted;
use crate::model::SocFraction;
use crate::real::Real;

/// The six OCV error channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SourceKind {
    /// Cell-to-cell manufacturing spread.
    #[serde(rename = "c2c")]
    CellToCell,
    /// Operating-temperature dependence.
    #[serde(rename = "temperature")]
    Temperature,
    /// Aging drift of the OCV curve.
    #[serde(rename = "aging")]
    Aging,
    /// Residual rate dependence of the characterization protocol.
    #[serde(rename = "crate")]
    CycleRate,
    /// Curve-fitting residual of the stored model.
    #[serde(rename = "curvefit")]
    CurveFit,
    /// Measurement or estimation error of the OCV itself.
    #[serde(rename = "meas")]
    MeasEst,
}

impl SourceKind {
    /// All kinds in canonical order.
    pub const ALL: [SourceKind; 6] = [
        SourceKind::CellToCell,
        SourceKind::Temperature,
        SourceKind::Aging,
        SourceKind::CycleRate,
        SourceKind::CurveFit,
        SourceKind::MeasEst,
    ];

    fn canonical_index(self) -> usize {
        match self {
            SourceKind::CellToCell => 0,
            SourceKind::Temperature => 1,
            SourceKind::Aging => 2,
            SourceKind::CycleRate => 3,
            SourceKind::CurveFit => 4,
            SourceKind::MeasEst => 5,
        }
    }

    fn name(self) -> &'static str {
        match self {
            SourceKind::CellToCell => "c2c",
            SourceKind::Temperature => "temperature",
            SourceKind::Aging => "aging",
            SourceKind::CycleRate => "crate",
            SourceKind::CurveFit => "curvefit",
            SourceKind::MeasEst => "meas",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One Gaussian error channel: `N(mean(s), sd(s)^2)` with both curves
/// piecewise linear over a shared knot grid spanning `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "ErrorSourceRepr<T>",
    into = "ErrorSourceRepr<T>",
    bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct ErrorSource<T: Real> {
    kind: SourceKind,
    soc_knots: Vec<T>,
    mean_v: Vec<T>,
    sd_v: Vec<T>,
}

impl<T: Real> ErrorSource<T> {
    /// Validates knot ordering (strictly increasing, first 0, last 1),
    /// matching lengths, finite means, and finite non-negative sds.
    pub fn new(kind: SourceKind, soc_knots: Vec<T>, mean_v: Vec<T>, sd_v: Vec<T>) -> Result<Self> {
        if soc_knots.len() < 2 {
            return Err(Error::InvalidTable(format!(
                "{kind}: need at least two knots, got {}",
                soc_knots.len()
            )));
        }
        if mean_v.len() != soc_knots.len() || sd_v.len() != soc_knots.len() {
            return Err(Error::InvalidTable(format!(
                "{kind}: knots, means, and sds must have equal length"
            )));
        }
        if soc_knots[0] != T::zero() || *soc_knots.last().unwrap() != T::one() {
            return Err(Error::InvalidTable(format!("{kind}: knots must span [0, 1]")));
        }
        if soc_knots.iter().any(|k| !k.is_finite()) || soc_knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidTable(format!("{kind}: knots must strictly increase")));
        }
        if mean_v.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidTable(format!("{kind}: means must be finite")));
        }
        if sd_v.iter().any(|sd| !sd.is_finite() || *sd < T::zero()) {
            return Err(Error::InvalidTable(format!(
                "{kind}: sds must be finite and non-negative"
            )));
        }
        Ok(Self { kind, soc_knots, mean_v, sd_v })
    }

    /// Channel with SOC-independent mean and sd.
    pub fn constant(kind: SourceKind, mean_v: T, sd_v: T) -> Result<Self> {
        Self::new(kind, vec![T::zero(), T::one()], vec![mean_v; 2], vec![sd_v; 2])
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    /// Interpolated mean at `s`; exact at knots.
    pub fn mean_at(&self, s: SocFraction<T>) -> T {
        lerp_sorted(&self.soc_knots, &self.mean_v, s.value())
    }

    /// Interpolated standard deviation at `s`; exact at knots.
    pub fn sd_at(&self, s: SocFraction<T>) -> T {
        lerp_sorted(&self.soc_knots, &self.sd_v, s.value())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
struct ErrorSourceRepr<T> {
    kind: SourceKind,
    soc_knots: Vec<T>,
    mean_v: Vec<T>,
    sd_v: Vec<T>,
}

impl<T: Real> TryFrom<ErrorSourceRepr<T>> for ErrorSource<T> {
    type Error = Error;

    fn try_from(repr: ErrorSourceRepr<T>) -> Result<Self> {
        ErrorSource::new(repr.kind, repr.soc_knots, repr.mean_v, repr.sd_v)
    }
}

impl<T: Real> From<ErrorSource<T>> for ErrorSourceRepr<T> {
    fn from(source: ErrorSource<T>) -> Self {
        ErrorSourceRepr {
            kind: source.kind,
            soc_knots: source.soc_knots,
            mean_v: source.mean_v,
            sd_v: source.sd_v,
        }
    }
}

/// A set of error channels, at most one per kind; missing kinds contribute
/// zero mean and zero variance.
///
/// Sources are stored in canonical kind order regardless of construction
/// order, so every output (including sampling streams) is independent of
/// the order the caller listed them in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "ErrorBudgetRepr<T>",
    into = "ErrorBudgetRepr<T>",
    bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct ErrorBudget<T: Real> {
    sources: Vec<ErrorSource<T>>,
}

impl<T: Real> ErrorBudget<T> {
    /// Builds a budget, rejecting duplicate kinds.
    pub fn new(mut sources: Vec<ErrorSource<T>>) -> Result<Self> {
        sources.sort_by_key(|s| s.kind.canonical_index());
        for pair in sources.windows(2) {
            if pair[0].kind == pair[1].kind {
                return Err(Error::DuplicateSource(pair[0].kind.to_string()));
            }
        }
        Ok(Self { sources })
    }

    /// Budget with no channels: zero bias, zero variance.
    pub fn empty() -> Self {
        Self { sources: Vec::new() }
    }

    pub fn sources(&self) -> &[ErrorSource<T>] {
        &self.sources
    }

    /// Sum of per-channel variances `sd(s)^2` at `s`.
    ///
    /// At shared knots this is an exact sum of squared knot values with no
    /// interpolation error.
    pub fn combined_variance(&self, s: SocFraction<T>) -> T {
        self.sources.iter().fold(T::zero(), |acc, src| {
            let sd = src.sd_at(s);
            acc + sd * sd
        })
    }

    /// Square root of [`ErrorBudget::combined_variance`].
    pub fn combined_sd(&self, s: SocFraction<T>) -> T {
        self.combined_variance(s).sqrt()
    }

    /// Sum of per-channel means at `s`, reported separately from the
    /// variance.
    pub fn combined_bias(&self, s: SocFraction<T>) -> T {
        self.sources.iter().fold(T::zero(), |acc, src| acc + src.mean_at(s))
    }

    /// One draw of the total OCV error at `s`: the sum of independent
    /// `N(mean_i(s), sd_i(s)^2)` draws.
    ///
    /// Every channel consumes exactly one standard-normal draw per call
    /// (even with zero sd), so the stream position depends only on the
    /// number of channels and calls.
    pub fn sample<R: Rng + ?Sized>(&self, s: SocFraction<T>, rng: &mut R) -> T
    where
        StandardNormal: Distribution<T>,
    {
        self.sources.iter().fold(T::zero(), |acc, src| {
            let z: T = StandardNormal.sample(rng);
            acc + src.mean_at(s) + src.sd_at(s) * z
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
struct ErrorBudgetRepr<T: Real> {
    sources: Vec<ErrorSource<T>>,
}

impl<T: Real> TryFrom<ErrorBudgetRepr<T>> for ErrorBudget<T> {
    type Error = Error;

    fn try_from(repr: ErrorBudgetRepr<T>) -> Result<Self> {
        ErrorBudget::new(repr.sources)
    }
}

impl<T: Real> From<ErrorBudget<T>> for ErrorBudgetRepr<T> {
    fn from(budget: ErrorBudget<T>) -> Self {
        ErrorBudgetRepr { sources: budget.sources }
    }
}
