use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::PimError;
use crate::normal;

/// Link between the probabilistic index and the linear predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkFunction {
    Logit,
    Probit,
}

/// Mean and working weights of one pseudo-observation at linear predictor `η`.
///
/// `score_weight` is `μ'(η) / V(μ)`, the scalar part of `A(Z; β)` multiplying
/// `Z`. `info_weight` is `μ'(η)² / V(μ)`, the per-pair contribution to the
/// expected information.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LinkEval {
    pub mean: f64,
    pub score_weight: f64,
    pub info_weight: f64,
}

impl LinkFunction {
    /// `g⁻¹(t)`.
    pub fn inverse(self, t: f64) -> f64 {
        match self {
            LinkFunction::Logit => expit(t),
            LinkFunction::Probit => normal::cdf(t),
        }
    }

    /// `d g⁻¹(t) / dt`.
    pub fn inverse_derivative(self, t: f64) -> f64 {
        match self {
            LinkFunction::Logit => {
                let e = (-t.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            LinkFunction::Probit => normal::density(t),
        }
    }

    /// `g(μ)`.
    pub fn link(self, mu: f64) -> f64 {
        match self {
            LinkFunction::Logit => (mu / (1.0 - mu)).ln(),
            LinkFunction::Probit => normal::quantile(mu),
        }
    }

    /// Bernoulli-type variance function `V(μ) = μ(1 − μ)`.
    pub fn variance(mu: f64) -> f64 {
        mu * (1.0 - mu)
    }

    #[inline]
    pub(crate) fn eval(self, eta: f64) -> LinkEval {
        match self {
            LinkFunction::Logit => {
                let e = (-eta.abs()).exp();
                let r = 1.0 / (1.0 + e);
                let small = e * r;
                LinkEval {
                    mean: if eta >= 0.0 { r } else { small },
                    score_weight: 1.0,
                    info_weight: small * r,
                }
            }
            LinkFunction::Probit => {
                let t = normal::tails(eta);
                let v = t.lower * t.upper;
                if v > 0.0 {
                    let a = t.density / v;
                    LinkEval {
                        mean: t.lower,
                        score_weight: a,
                        info_weight: a * t.density,
                    }
                } else {
                    // beyond ~37 SD; the Mills ratio tends to |η|
                    LinkEval {
                        mean: t.lower,
                        score_weight: eta.abs(),
                        info_weight: 0.0,
                    }
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LinkFunction::Logit => "logit",
            LinkFunction::Probit => "probit",
        }
    }
}

fn expit(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LinkFunction {
    type Err = PimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logit" => Ok(LinkFunction::Logit),
            "probit" => Ok(LinkFunction::Probit),
            other => Err(PimError::Config(format!(
                "unknown link '{other}' (expected logit or probit)"
            ))),
        }
    }
}
