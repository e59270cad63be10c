//! Law-invariant risk functionals on sample vectors, plus closed forms for
//! the normal distribution.
//!
//! Empirical value-at-risk is the left-continuous inf-based quantile: the
//! `ceil(αN)`-th order statistic, so `VaR¹ = max`. Empirical CVaR integrates
//! the empirical quantile function over `(α, 1]` exactly, with fractional
//! weight on the boundary order statistic — the conditional-expectation form
//! is only valid for atomless distributions, which sample vectors are not.
//!
//! Mean-variance uses the population variance convention (divisor N): the
//! samples stand for the posterior distribution itself, not an estimate of a
//! further population.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskSpec {
    Mean,
    MeanVariance { w: f64 },
    VaR { alpha: f64 },
    CVaR { alpha: f64 },
}

impl RiskSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RiskSpec::Mean => Ok(()),
            RiskSpec::MeanVariance { w } => {
                if w >= 0.0 && w.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Domain(format!(
                        "mean-variance weight must be >= 0, got {w}"
                    )))
                }
            }
            RiskSpec::VaR { alpha } => {
                if alpha > 0.0 && alpha <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::Domain(format!(
                        "VaR needs alpha in (0,1], got {alpha}"
                    )))
                }
            }
            RiskSpec::CVaR { alpha } => {
                if alpha > 0.0 && alpha < 1.0 {
                    Ok(())
                } else {
                    Err(Error::Domain(format!(
                        "CVaR needs alpha in (0,1), got {alpha}"
                    )))
                }
            }
        }
    }
}

impl fmt::Display for RiskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiskSpec::Mean => write!(f, "mean"),
            RiskSpec::MeanVariance { w } => write!(f, "mean_variance:w={w}"),
            RiskSpec::VaR { alpha } => write!(f, "var:alpha={alpha}"),
            RiskSpec::CVaR { alpha } => write!(f, "cvar:alpha={alpha}"),
        }
    }
}

impl FromStr for RiskSpec {
    type Err = Error;

    /// Accepts `mean`, `mean_variance:w=0.5`, `var:alpha=0.95`, `cvar:alpha=0.95`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |s: &str| Error::Input(format!("cannot parse risk spec {s:?}"));
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let parse_kv = |arg: Option<&str>, key: &str| -> Result<f64> {
            let a = arg.ok_or_else(|| bad(s))?;
            let (k, v) = a.split_once('=').ok_or_else(|| bad(s))?;
            if k != key {
                return Err(bad(s));
            }
            v.parse::<f64>().map_err(|_| bad(s))
        };
        let spec = match head {
            "mean" => {
                if arg.is_some() {
                    return Err(bad(s));
                }
                RiskSpec::Mean
            }
            "mean_variance" => RiskSpec::MeanVariance {
                w: parse_kv(arg, "w")?,
            },
            "var" => RiskSpec::VaR {
                alpha: parse_kv(arg, "alpha")?,
            },
            "cvar" => RiskSpec::CVaR {
                alpha: parse_kv(arg, "alpha")?,
            },
            _ => return Err(bad(s)),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn require_nonempty(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        Err(Error::Input(
            "risk functional needs a nonempty sample vector".into(),
        ))
    } else {
        Ok(())
    }
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Order-statistic index (1-based) of the inf-based α-quantile: the smallest
/// k with k/N >= α. The epsilon guards against `α*N` landing one ulp above an
/// integer.
fn quantile_index(n: usize, alpha: f64) -> usize {
    let k = (alpha * n as f64 - 1e-9).ceil() as usize;
    k.clamp(1, n)
}

/// Empirical value-at-risk: the α-quantile under the inf definition.
/// `alpha = 1` gives the sample maximum.
pub fn var_alpha(samples: &[f64], alpha: f64) -> Result<f64> {
    require_nonempty(samples)?;
    RiskSpec::VaR { alpha }.validate()?;
    let v = sorted(samples);
    Ok(v[quantile_index(v.len(), alpha) - 1])
}

/// Empirical CVaR: exact integral of the empirical quantile function over
/// `(α, 1]`, divided by `1 - α`.
pub fn cvar_alpha(samples: &[f64], alpha: f64) -> Result<f64> {
    require_nonempty(samples)?;
    RiskSpec::CVaR { alpha }.validate()?;
    let v = sorted(samples);
    let n = v.len();
    let k = quantile_index(n, alpha);
    // weight (k/N - α) on the boundary statistic, 1/N on each one above it
    let nf = n as f64;
    let mut acc = (k as f64 / nf - alpha) * v[k - 1];
    for x in &v[k..] {
        acc += x / nf;
    }
    Ok(acc / (1.0 - alpha))
}

/// Sample mean plus `w` times the population-convention variance (divisor N).
pub fn mean_variance(samples: &[f64], w: f64) -> Result<f64> {
    require_nonempty(samples)?;
    RiskSpec::MeanVariance { w }.validate()?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok(mean + w * var)
}

/// VaR of N(μ, σ²): `μ + σ Φ⁻¹(α)`.
pub fn normal_var(mu: f64, sigma: f64, alpha: f64) -> Result<f64> {
    if sigma < 0.0 {
        return Err(Error::Domain(format!("sigma must be >= 0, got {sigma}")));
    }
    Ok(mu + sigma * stats::norm_inv_cdf(alpha)?)
}

/// CVaR of N(μ, σ²): `μ + σ φ(Φ⁻¹(α)) / (1-α)`.
pub fn normal_cvar(mu: f64, sigma: f64, alpha: f64) -> Result<f64> {
    if sigma < 0.0 {
        return Err(Error::Domain(format!("sigma must be >= 0, got {sigma}")));
    }
    let z = stats::norm_inv_cdf(alpha)?;
    Ok(mu + sigma * stats::norm_pdf(z) / (1.0 - alpha))
}

/// Dispatch a risk spec to its empirical estimator.
pub fn apply_risk(spec: &RiskSpec, samples: &[f64]) -> Result<f64> {
    require_nonempty(samples)?;
    spec.validate()?;
    match *spec {
        RiskSpec::Mean => Ok(samples.iter().sum::<f64>() / samples.len() as f64),
        RiskSpec::MeanVariance { w } => mean_variance(samples, w),
        RiskSpec::VaR { alpha } => var_alpha(samples, alpha),
        RiskSpec::CVaR { alpha } => cvar_alpha(samples, alpha),
    }
}
