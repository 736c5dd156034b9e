//! Parametric OCV-SOC curve models.
//!
//! Two functional forms are supported:
//!
//! * Nernst-style: `v(s) = c0 + c1*ln(s) + c2*ln(1 - s)` with three
//!   coefficients. With `c1 > 0` and `c2 < 0` the curve is strictly
//!   increasing and captures the steep tails near empty and full.
//! * Polynomial of degree `d`: `v(s) = c0 + c1*s + ... + cd*s^d` with
//!   `d + 1` coefficients in ascending order.
//!
//! Both forms are evaluated on the clamped domain `[epsilon, 1 - epsilon]`,
//! which keeps the logarithms finite at the ends and gives every model one
//! consistent domain rule: `evaluate(s)` equals `evaluate(clamp(s))` bit for
//! bit, including at `s = 0` and `s = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{real, to_f64, Real};

/// Clamp margin used when a model is built without an explicit epsilon.
pub fn default_epsilon<T: Real>() -> T {
    real(1e-6)
}

/// Exclusive upper bound on the clamp margin.
pub fn max_epsilon<T: Real>() -> T {
    real(1e-2)
}

/// State of charge as a dimensionless fraction in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SocFraction<T>(T);

impl<T: Real> SocFraction<T> {
    /// Validates that `value` is finite and within `[0, 1]`.
    pub fn new(value: T) -> Result<Self> {
        if !value.is_finite() || value < T::zero() || value > T::one() {
            return Err(Error::InvalidSoc(to_f64_or_nan(value)));
        }
        Ok(Self(value))
    }

    /// Clamps a finite `value` into `[0, 1]` and reports whether clamping
    /// changed it.
    pub fn saturating(value: T) -> (Self, bool) {
        assert!(value.is_finite(), "SOC update must be finite");
        if value < T::zero() {
            (Self(T::zero()), true)
        } else if value > T::one() {
            (Self(T::one()), true)
        } else {
            (Self(value), false)
        }
    }

    /// The underlying fraction.
    pub fn value(self) -> T {
        self.0
    }
}

/// Uniform grid of `n >= 2` SOC fractions spanning `[0, 1]` with exact ends.
pub fn soc_grid<T: Real>(n: usize) -> Vec<SocFraction<T>> {
    assert!(n >= 2, "a SOC grid needs at least two points");
    let last = real::<T>((n - 1) as f64);
    (0..n)
        .map(|i| {
            let s = real::<T>(i as f64) / last;
            SocFraction(s.min(T::one()))
        })
        .collect()
}

/// Terminal or open-circuit voltage in volts.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Voltage<T>(T);

impl<T: Real> Voltage<T> {
    /// Validates that `value` is finite.
    pub fn new(value: T) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!("voltage {value} is not finite")));
        }
        Ok(Self(value))
    }

    pub(crate) fn raw(value: T) -> Self {
        Self(value)
    }

    /// The value in volts.
    pub fn volts(self) -> T {
        self.0
    }
}

/// Functional form of an OCV-SOC model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelForm {
    /// `v(s) = c0 + c1*ln(s) + c2*ln(1 - s)`.
    Nernst,
    /// Polynomial of the given degree, coefficients in ascending order.
    Polynomial(usize),
}

impl ModelForm {
    /// Number of coefficients the form requires.
    pub fn coefficient_count(self) -> usize {
        match self {
            ModelForm::Nernst => 3,
            ModelForm::Polynomial(degree) => degree + 1,
        }
    }
}

/// A parametric OCV-SOC curve with a clamped evaluation domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "ModelRepr<T>",
    into = "ModelRepr<T>",
    bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct OcvModel<T: Real> {
    form: ModelForm,
    coefficients: Vec<T>,
    epsilon: T,
}

impl<T: Real> OcvModel<T> {
    /// Builds a model with the default clamp margin.
    ///
    /// Fails when the coefficient count does not match the form or any
    /// coefficient is not finite.
    pub fn new(form: ModelForm, coefficients: Vec<T>) -> Result<Self> {
        let needed = form.coefficient_count();
        if coefficients.len() != needed {
            return Err(Error::InvalidModel(format!(
                "{form:?} needs {needed} coefficients, got {}",
                coefficients.len()
            )));
        }
        if let Some(bad) = coefficients.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidModel(format!("non-finite coefficient {bad}")));
        }
        Ok(Self { form, coefficients, epsilon: default_epsilon() })
    }

    /// Nernst-style model from `[c0, c1, c2]`.
    pub fn nernst(coefficients: [T; 3]) -> Result<Self> {
        Self::new(ModelForm::Nernst, coefficients.to_vec())
    }

    /// Polynomial model; the degree is `coefficients.len() - 1`.
    pub fn polynomial(coefficients: Vec<T>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidModel("polynomial needs at least one coefficient".into()));
        }
        let degree = coefficients.len() - 1;
        Self::new(ModelForm::Polynomial(degree), coefficients)
    }

    /// Replaces the clamp margin; must satisfy `0 < epsilon < 0.01`.
    pub fn with_epsilon(mut self, epsilon: T) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= T::zero() || epsilon >= max_epsilon() {
            return Err(Error::InvalidModel(format!(
                "epsilon {epsilon} must lie strictly inside (0, 0.01)"
            )));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn form(&self) -> ModelForm {
        self.form
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    /// Clamps a SOC value into the evaluation domain `[epsilon, 1 - epsilon]`.
    pub fn clamp_soc(&self, s: T) -> T {
        s.max(self.epsilon).min(T::one() - self.epsilon)
    }

    /// Open-circuit voltage at `s`, evaluated on the clamped domain.
    pub fn evaluate(&self, s: SocFraction<T>) -> Voltage<T> {
        Voltage::raw(self.eval_clamped(self.clamp_soc(s.value())))
    }

    /// Analytic slope `dv/ds` at `s`, evaluated on the clamped domain.
    pub fn derivative(&self, s: SocFraction<T>) -> T {
        self.slope_clamped(self.clamp_soc(s.value()))
    }

    /// Whether the slope is strictly positive on a uniform grid of
    /// `grid_size >= 2` points spanning the clamped domain.
    ///
    /// A grid check cannot certify monotonicity between points, so callers
    /// pick a grid dense enough for the curvature they expect; 256 points is
    /// plenty for the low-order forms supported here.
    pub fn is_monotone(&self, grid_size: usize) -> bool {
        assert!(grid_size >= 2, "monotonicity grid needs at least two points");
        let lo = self.epsilon;
        let span = T::one() - self.epsilon - lo;
        let last = real::<T>((grid_size - 1) as f64);
        (0..grid_size).all(|i| {
            let s = lo + span * real::<T>(i as f64) / last;
            self.slope_clamped(s) > T::zero()
        })
    }

    /// Evaluates the raw form at an already clamped SOC value.
    pub(crate) fn eval_clamped(&self, s: T) -> T {
        match self.form {
            ModelForm::Nernst => {
                let c = &self.coefficients;
                c[0] + c[1] * s.ln() + c[2] * (T::one() - s).ln()
            }
            ModelForm::Polynomial(_) => {
                self.coefficients.iter().rev().fold(T::zero(), |acc, &c| acc * s + c)
            }
        }
    }

    /// Analytic slope of the raw form at an already clamped SOC value.
    pub(crate) fn slope_clamped(&self, s: T) -> T {
        match self.form {
            ModelForm::Nernst => {
                let c = &self.coefficients;
                c[1] / s - c[2] / (T::one() - s)
            }
            ModelForm::Polynomial(degree) => {
                let mut acc = T::zero();
                for j in (1..=degree).rev() {
                    let cj = self.coefficients[j];
                    acc = acc * s + real::<T>(j as f64) * cj;
                }
                acc
            }
        }
    }
}

fn to_f64_or_nan<T: Real>(value: T) -> f64 {
    if value.is_finite() {
        to_f64(value)
    } else {
        f64::NAN
    }
}

/// On-disk layout: `{"form": "nernst"|"poly", "coefficients": [...],
/// "epsilon": ...}` with `epsilon` optional on input.
#[derive(Serialize, Deserialize)]
struct ModelRepr<T> {
    form: String,
    coefficients: Vec<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<T>,
}

impl<T: Real> TryFrom<ModelRepr<T>> for OcvModel<T> {
    type Error = Error;

    fn try_from(repr: ModelRepr<T>) -> Result<Self> {
        let form = match repr.form.as_str() {
            "nernst" => ModelForm::Nernst,
            "poly" => {
                if repr.coefficients.is_empty() {
                    return Err(Error::InvalidModel(
                        "polynomial needs at least one coefficient".into(),
                    ));
                }
                ModelForm::Polynomial(repr.coefficients.len() - 1)
            }
            other => return Err(Error::InvalidModel(format!("unknown form \"{other}\""))),
        };
        let model = OcvModel::new(form, repr.coefficients)?;
        match repr.epsilon {
            Some(eps) => model.with_epsilon(eps),
            None => Ok(model),
        }
    }
}

impl<T: Real> From<OcvModel<T>> for ModelRepr<T> {
    fn from(model: OcvModel<T>) -> Self {
        let form = match model.form {
            ModelForm::Nernst => "nernst",
            ModelForm::Polynomial(_) => "poly",
        };
        ModelRepr {
            form: form.to_string(),
            coefficients: model.coefficients,
            epsilon: Some(model.epsilon),
        }
    }
}
