//! Parametric observation families: log-density, sampling, Fisher information.
//!
//! Four families are supported, each paired with a conjugate prior in
//! [`crate::bayes`]:
//!
//! * `ExponentialRate` — Expo(θ) parameterized by rate, mean `1/θ`.
//! * `NormalKnownVar` — N(θ, σ²) with σ² known.
//! * `WeibullKnownShape` — Weibull with known shape β and unknown scale. The
//!   coordinate tracked in Θ is the transformed scale λ := scale^β, because the
//!   conjugate (inverse-gamma) update acts on λ. Then ξ^β ~ Expo(1/λ).
//! * `FiniteDiscrete` — a categorical distribution on values `y_1..y_l`; θ is
//!   the probability simplex vector. Observations are category *indices*
//!   encoded as `f64`.
//!
//! Sampling is inverse-CDF throughout, so a draw is a pure function of the
//! uniforms pulled from the caller's [`Stream`] — this is what makes common
//! random numbers across parameter values exact.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::stats;

/// Tolerance for simplex-sum validation.
const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "FamilyRecord")]
pub enum ObservationFamily {
    ExponentialRate,
    NormalKnownVar { sigma2: f64 },
    WeibullKnownShape { shape: f64 },
    FiniteDiscrete { support: Vec<f64> },
}

/// Untrusted mirror of [`ObservationFamily`] used to validate config input.
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum FamilyRecord {
    ExponentialRate,
    NormalKnownVar { sigma2: f64 },
    WeibullKnownShape { shape: f64 },
    FiniteDiscrete { support: Vec<f64> },
}

impl TryFrom<FamilyRecord> for ObservationFamily {
    type Error = Error;

    fn try_from(rec: FamilyRecord) -> Result<Self> {
        match rec {
            FamilyRecord::ExponentialRate => Ok(ObservationFamily::ExponentialRate),
            FamilyRecord::NormalKnownVar { sigma2 } => ObservationFamily::normal_known_var(sigma2),
            FamilyRecord::WeibullKnownShape { shape } => {
                ObservationFamily::weibull_known_shape(shape)
            }
            FamilyRecord::FiniteDiscrete { support } => ObservationFamily::finite_discrete(support),
        }
    }
}

impl ObservationFamily {
    pub fn exponential_rate() -> Self {
        ObservationFamily::ExponentialRate
    }

    pub fn normal_known_var(sigma2: f64) -> Result<Self> {
        if !sigma2.is_finite() || sigma2 <= 0.0 {
            return Err(Error::Domain(format!(
                "sigma2 must be positive, got {sigma2}"
            )));
        }
        Ok(ObservationFamily::NormalKnownVar { sigma2 })
    }

    pub fn weibull_known_shape(shape: f64) -> Result<Self> {
        if !shape.is_finite() || shape <= 0.0 {
            return Err(Error::Domain(format!(
                "shape must be positive, got {shape}"
            )));
        }
        Ok(ObservationFamily::WeibullKnownShape { shape })
    }

    /// Support values must be finite, strictly increasing (hence distinct).
    pub fn finite_discrete(support: Vec<f64>) -> Result<Self> {
        if support.len() < 2 {
            return Err(Error::Domain("support needs at least 2 values".into()));
        }
        if support.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("support values must be finite".into()));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(
                "support values must be sorted and distinct".into(),
            ));
        }
        Ok(ObservationFamily::FiniteDiscrete { support })
    }

    /// Length of the full parameter vector θ.
    pub fn param_len(&self) -> usize {
        match self {
            ObservationFamily::FiniteDiscrete { support } => support.len(),
            _ => 1,
        }
    }

    /// Number of free coordinates used for asymptotics. For the simplex the
    /// last component is pinned to `1 - sum`, keeping Fisher information
    /// nonsingular.
    pub fn free_dim(&self) -> usize {
        match self {
            ObservationFamily::FiniteDiscrete { support } => support.len() - 1,
            _ => 1,
        }
    }

    /// Widest parameter box the family admits; posterior draws carry these.
    pub fn natural_bounds(&self) -> Vec<(f64, f64)> {
        match self {
            ObservationFamily::ExponentialRate | ObservationFamily::WeibullKnownShape { .. } => {
                vec![(0.0, f64::INFINITY)]
            }
            ObservationFamily::NormalKnownVar { .. } => {
                vec![(f64::NEG_INFINITY, f64::INFINITY)]
            }
            ObservationFamily::FiniteDiscrete { support } => vec![(0.0, 1.0); support.len()],
        }
    }

    /// Check that θ is a valid parameter for this family.
    pub fn validate_theta(&self, theta: &ParamPoint) -> Result<()> {
        let t = theta.theta();
        if t.len() != self.param_len() {
            return Err(Error::Domain(format!(
                "theta has dimension {}, family needs {}",
                t.len(),
                self.param_len()
            )));
        }
        match self {
            ObservationFamily::ExponentialRate | ObservationFamily::WeibullKnownShape { .. } => {
                if t[0] <= 0.0 {
                    return Err(Error::Domain(format!(
                        "parameter must be positive, got {}",
                        t[0]
                    )));
                }
            }
            ObservationFamily::NormalKnownVar { .. } => {}
            ObservationFamily::FiniteDiscrete { .. } => {
                if t.iter().any(|&v| v < 0.0) {
                    return Err(Error::Domain(
                        "simplex components must be nonnegative".into(),
                    ));
                }
                let s: f64 = t.iter().sum();
                if (s - 1.0).abs() > SIMPLEX_TOL {
                    return Err(Error::Domain(format!("simplex must sum to 1, got {s}")));
                }
            }
        }
        Ok(())
    }

    /// Natural log of the density (or mass) of `P_θ` at `xi`.
    ///
    /// Observations outside the support give `-inf`; an invalid θ is an error.
    /// For `FiniteDiscrete`, `xi` is the category index.
    pub fn logpdf(&self, theta: &ParamPoint, xi: f64) -> Result<f64> {
        self.validate_theta(theta)?;
        let t = theta.theta();
        Ok(match self {
            ObservationFamily::ExponentialRate => {
                if !xi.is_finite() || xi < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    t[0].ln() - t[0] * xi
                }
            }
            ObservationFamily::NormalKnownVar { sigma2 } => {
                if !xi.is_finite() {
                    f64::NEG_INFINITY
                } else {
                    let d = xi - t[0];
                    -0.5 * (2.0 * std::f64::consts::PI * sigma2).ln() - d * d / (2.0 * sigma2)
                }
            }
            ObservationFamily::WeibullKnownShape { shape } => {
                let lambda = t[0];
                if !xi.is_finite() || xi < 0.0 {
                    f64::NEG_INFINITY
                } else if xi == 0.0 {
                    // density limit at the origin: 0 for shape>1, β/λ for shape=1
                    if *shape > 1.0 {
                        f64::NEG_INFINITY
                    } else if *shape == 1.0 {
                        -lambda.ln()
                    } else {
                        f64::INFINITY
                    }
                } else {
                    shape.ln() + (shape - 1.0) * xi.ln() - lambda.ln() - xi.powf(*shape) / lambda
                }
            }
            ObservationFamily::FiniteDiscrete { support } => {
                match category_index(xi, support.len()) {
                    Some(j) => t[j].ln(),
                    None => f64::NEG_INFINITY,
                }
            }
        })
    }

    /// Inverse CDF at `u` in (0, 1). For `FiniteDiscrete` this is the
    /// left-continuous generalized inverse, returning a category index.
    pub fn quantile(&self, theta: &ParamPoint, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("quantile needs u in (0,1), got {u}")));
        }
        let t = theta.theta();
        Ok(match self {
            ObservationFamily::ExponentialRate => -(-u).ln_1p() / t[0],
            ObservationFamily::NormalKnownVar { sigma2 } => {
                t[0] + sigma2.sqrt() * stats::norm_inv_cdf(u)?
            }
            ObservationFamily::WeibullKnownShape { shape } => {
                (t[0] * -(-u).ln_1p()).powf(1.0 / shape)
            }
            ObservationFamily::FiniteDiscrete { support } => {
                let mut acc = 0.0;
                let l = support.len();
                let mut idx = l - 1;
                for (j, &w) in t.iter().enumerate() {
                    acc += w;
                    if u <= acc {
                        idx = j;
                        break;
                    }
                }
                idx as f64
            }
        })
    }

    /// Draw `n` i.i.d. observations. Bit-reproducible given the stream.
    pub fn sample(&self, theta: &ParamPoint, n: usize, stream: &mut Stream) -> Result<Vec<f64>> {
        self.validate_theta(theta)?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let u = stream.uniform_open();
            out.push(self.quantile(theta, u)?);
        }
        Ok(out)
    }

    /// Fisher information at an interior θ, in the family's free coordinates
    /// (size [`Self::free_dim`]). Boundary parameters are rejected: the
    /// information matrix degenerates there.
    pub fn fisher_information(&self, theta: &ParamPoint) -> Result<DMatrix<f64>> {
        self.validate_theta(theta)?;
        if !theta.is_interior() {
            return Err(Error::Singular(
                "Fisher information requires theta interior to its bounds".into(),
            ));
        }
        let t = theta.theta();
        match self {
            ObservationFamily::ExponentialRate => {
                Ok(DMatrix::from_element(1, 1, 1.0 / (t[0] * t[0])))
            }
            ObservationFamily::NormalKnownVar { sigma2 } => {
                Ok(DMatrix::from_element(1, 1, 1.0 / sigma2))
            }
            ObservationFamily::WeibullKnownShape { .. } => {
                // In the λ-coordinate, ξ^β ~ Expo(1/λ): same information as an
                // exponential mean parameter.
                Ok(DMatrix::from_element(1, 1, 1.0 / (t[0] * t[0])))
            }
            ObservationFamily::FiniteDiscrete { support } => {
                let l = support.len();
                if t.iter().any(|&v| v <= 0.0) {
                    return Err(Error::Singular(
                        "Fisher information needs strictly interior simplex".into(),
                    ));
                }
                let last = t[l - 1];
                let k = l - 1;
                let mut m = DMatrix::from_element(k, k, 1.0 / last);
                for j in 0..k {
                    m[(j, j)] += 1.0 / t[j];
                }
                Ok(m)
            }
        }
    }
}

fn category_index(xi: f64, len: usize) -> Option<usize> {
    if !xi.is_finite() {
        return None;
    }
    let r = xi.round();
    if (xi - r).abs() > 1e-9 || r < 0.0 || r >= len as f64 {
        return None;
    }
    Some(r as usize)
}

/// A point θ in the parameter space, carrying the box Θ it lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint {
    theta: Vec<f64>,
    bounds: Arc<[(f64, f64)]>,
}

impl ParamPoint {
    pub fn new(theta: Vec<f64>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if theta.is_empty() || theta.len() != bounds.len() {
            return Err(Error::Domain(format!(
                "theta length {} does not match bounds length {}",
                theta.len(),
                bounds.len()
            )));
        }
        for (i, (&v, &(lo, hi))) in theta.iter().zip(bounds.iter()).enumerate() {
            if !v.is_finite() {
                return Err(Error::Domain(format!("theta[{i}] is not finite")));
            }
            if lo > hi || v < lo || v > hi {
                return Err(Error::Domain(format!(
                    "theta[{i}]={v} outside bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self {
            theta,
            bounds: bounds.into(),
        })
    }

    /// One-dimensional point.
    pub fn scalar(value: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![value], vec![(lo, hi)])
    }

    /// A probability vector on the simplex, bounds `[0, 1]` per coordinate.
    pub fn simplex(weights: Vec<f64>) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Domain(format!("simplex must sum to 1, got {s}")));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Domain(
                "simplex components must be nonnegative".into(),
            ));
        }
        let n = weights.len();
        Self::new(weights, vec![(0.0, 1.0); n])
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Strictly inside the box on every coordinate.
    pub fn is_interior(&self) -> bool {
        self.theta
            .iter()
            .zip(self.bounds.iter())
            .all(|(&v, &(lo, hi))| v > lo && v < hi)
    }

    /// Same bounds, different coordinates. Used for finite-difference probes.
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != self.theta.len() {
            return Err(Error::Domain("dimension mismatch".into()));
        }
        Self::new(theta, self.bounds.to_vec())
    }
}
