//! Market potential families S(a).

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Standard logistic CDF.
pub(crate) fn logistic_cdf(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Standard logistic density.
pub(crate) fn logistic_pdf(z: f64) -> f64 {
    let l = logistic_cdf(z);
    l * (1.0 - l)
}

/// Demand intercept as a function of the AI level.
///
/// Both families are decreasing and concave on `[0, 1]` once validated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MarketPotentialSpec {
    /// `S(a) = s0 - kappa * a^2`
    Quadratic { s0: f64, kappa: f64 },
    /// `S(a) = s0 * (1 - L((a - mu) / scale))`, `L` the logistic CDF.
    ///
    /// Adoption accelerates as AI matures; `mu >= 1` keeps the inflection of
    /// the adoption curve outside the unit interval so S stays concave there.
    LogisticAdoption { s0: f64, mu: f64, scale: f64 },
}

impl MarketPotentialSpec {
    pub fn quadratic(s0: f64, kappa: f64) -> Self {
        Self::Quadratic { s0, kappa }
    }

    pub fn logistic(s0: f64, mu: f64, scale: f64) -> Self {
        Self::LogisticAdoption { s0, mu, scale }
    }

    /// Family-level constraints. Boundary conditions that involve the
    /// marginal cost are checked by [`super::MarketSpec`].
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidSpec(msg));
        match *self {
            Self::Quadratic { s0, kappa } => {
                if !(s0.is_finite() && s0 > 0.0) {
                    return bad(format!("s0 must be positive, got {s0}"));
                }
                if !(kappa.is_finite() && kappa > 0.0) {
                    return bad(format!("kappa must be positive, got {kappa}"));
                }
                if s0 - kappa <= 0.0 {
                    return bad(format!("S(1) = s0 - kappa must be positive, got {}", s0 - kappa));
                }
            }
            Self::LogisticAdoption { s0, mu, scale } => {
                if !(s0.is_finite() && s0 > 0.0) {
                    return bad(format!("s0 must be positive, got {s0}"));
                }
                if !(mu.is_finite() && mu >= 1.0) {
                    return bad(format!("mu must be >= 1 for concavity on [0,1], got {mu}"));
                }
                if !(scale.is_finite() && scale > 0.0) {
                    return bad(format!("scale must be positive, got {scale}"));
                }
            }
        }
        Ok(())
    }

    /// S(a). No validation; callers go through [`eval_potential`] for checked access.
    pub fn value(&self, a: f64) -> f64 {
        match *self {
            Self::Quadratic { s0, kappa } => s0 - kappa * a * a,
            Self::LogisticAdoption { s0, mu, scale } => s0 * (1.0 - logistic_cdf((a - mu) / scale)),
        }
    }

    /// S'(a), analytic.
    pub fn slope(&self, a: f64) -> f64 {
        match *self {
            Self::Quadratic { kappa, .. } => -2.0 * kappa * a,
            Self::LogisticAdoption { s0, mu, scale } => -(s0 / scale) * logistic_pdf((a - mu) / scale),
        }
    }
}

/// Checked S(a).
pub fn eval_potential(spec: &MarketPotentialSpec, a: super::AiLevel) -> Result<f64, ModelError> {
    spec.validate()?;
    Ok(spec.value(a.get()))
}

/// Checked S'(a).
pub fn potential_slope(spec: &MarketPotentialSpec, a: super::AiLevel) -> Result<f64, ModelError> {
    spec.validate()?;
    Ok(spec.slope(a.get()))
}
