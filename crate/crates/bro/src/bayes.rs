//! Conjugate priors and posterior states.
//!
//! Four conjugate pairs, one per observation family:
//!
//! * Gamma(α₀, β₀) for the exponential rate: `α_n = α₀ + n`, `β_n = β₀ + Σξ`.
//! * Normal(μ₀, σ₀²) for a normal mean with known σ²:
//!   `σ_n² = 1/(1/σ₀² + n/σ²)`, `μ_n = σ_n²(μ₀/σ₀² + Σξ/σ²)`.
//! * InvGamma(α₀, β₀) for the Weibull transformed scale λ = scale^β:
//!   `α_n = α₀ + n`, `β_n = β₀ + Σξ^β`.
//! * Dirichlet(α₀) for a finite support: `α_n = α₀ + (N₁, …, N_l)`.
//!
//! Sufficient statistics are accumulated by left fold, so absorbing a dataset
//! in one batch or in any sequence of batches yields bit-identical
//! hyperparameters.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Gamma as GammaDist};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ObservationFamily, ParamPoint};
use crate::rng::Stream;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "PriorRecord")]
pub enum PriorKind {
    Gamma { alpha0: f64, beta0: f64 },
    Normal { mu0: f64, sigma0_sq: f64 },
    InvGamma { alpha0: f64, beta0: f64 },
    Dirichlet { alpha0: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum PriorRecord {
    Gamma { alpha0: f64, beta0: f64 },
    Normal { mu0: f64, sigma0_sq: f64 },
    InvGamma { alpha0: f64, beta0: f64 },
    Dirichlet { alpha0: Vec<f64> },
}

impl TryFrom<PriorRecord> for PriorKind {
    type Error = Error;

    fn try_from(rec: PriorRecord) -> Result<Self> {
        let kind = match rec {
            PriorRecord::Gamma { alpha0, beta0 } => PriorKind::Gamma { alpha0, beta0 },
            PriorRecord::Normal { mu0, sigma0_sq } => PriorKind::Normal { mu0, sigma0_sq },
            PriorRecord::InvGamma { alpha0, beta0 } => PriorKind::InvGamma { alpha0, beta0 },
            PriorRecord::Dirichlet { alpha0 } => PriorKind::Dirichlet { alpha0 },
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl PriorKind {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            PriorKind::Gamma { alpha0, beta0 } | PriorKind::InvGamma { alpha0, beta0 } => {
                *alpha0 > 0.0 && *beta0 > 0.0
            }
            PriorKind::Normal { mu0, sigma0_sq } => mu0.is_finite() && *sigma0_sq > 0.0,
            PriorKind::Dirichlet { alpha0 } => {
                !alpha0.is_empty() && alpha0.iter().all(|&a| a > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "invalid prior hyperparameters: {self:?}"
            )))
        }
    }
}

/// A prior paired with the observation family it is conjugate to.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    kind: PriorKind,
    family: ObservationFamily,
}

impl Prior {
    pub fn new(kind: PriorKind, family: ObservationFamily) -> Result<Self> {
        kind.validate()?;
        let legal = matches!(
            (&kind, &family),
            (PriorKind::Gamma { .. }, ObservationFamily::ExponentialRate)
                | (
                    PriorKind::Normal { .. },
                    ObservationFamily::NormalKnownVar { .. }
                )
                | (
                    PriorKind::InvGamma { .. },
                    ObservationFamily::WeibullKnownShape { .. }
                )
                | (
                    PriorKind::Dirichlet { .. },
                    ObservationFamily::FiniteDiscrete { .. }
                )
        );
        if !legal {
            return Err(Error::Domain(format!(
                "prior {kind:?} is not conjugate to family {family:?}"
            )));
        }
        if let (PriorKind::Dirichlet { alpha0 }, ObservationFamily::FiniteDiscrete { support }) =
            (&kind, &family)
        {
            if alpha0.len() != support.len() {
                return Err(Error::Domain(format!(
                    "Dirichlet has {} components, support has {}",
                    alpha0.len(),
                    support.len()
                )));
            }
        }
        Ok(Self { kind, family })
    }

    pub fn kind(&self) -> &PriorKind {
        &self.kind
    }

    pub fn family(&self) -> &ObservationFamily {
        &self.family
    }

    /// Posterior after absorbing `data`. Empty data returns the prior as a
    /// zero-observation state.
    pub fn update(&self, data: &[f64]) -> Result<PosteriorState> {
        let mut state = match (&self.kind, &self.family) {
            (PriorKind::Gamma { alpha0, beta0 }, _) => PosteriorState::Gamma {
                alpha0: *alpha0,
                beta0: *beta0,
                n: 0,
                sum: 0.0,
            },
            (
                PriorKind::Normal { mu0, sigma0_sq },
                ObservationFamily::NormalKnownVar { sigma2 },
            ) => PosteriorState::Normal {
                mu0: *mu0,
                sigma0_sq: *sigma0_sq,
                sigma_sq: *sigma2,
                n: 0,
                sum: 0.0,
            },
            (
                PriorKind::InvGamma { alpha0, beta0 },
                ObservationFamily::WeibullKnownShape { shape },
            ) => PosteriorState::InvGamma {
                alpha0: *alpha0,
                beta0: *beta0,
                shape: *shape,
                n: 0,
                sum_pow: 0.0,
            },
            (PriorKind::Dirichlet { alpha0 }, ObservationFamily::FiniteDiscrete { .. }) => {
                PosteriorState::Dirichlet {
                    alpha0: alpha0.clone(),
                    counts: vec![0; alpha0.len()],
                }
            }
            _ => unreachable!("pairing checked in Prior::new"),
        };
        state.absorb(data)?;
        Ok(state)
    }
}

/// Conjugate posterior after `n` observations. Holds the prior
/// hyperparameters plus running sufficient statistics; the posterior
/// hyperparameters are derived on demand.
#[derive(Debug, Clone, PartialEq)]
pub enum PosteriorState {
    Gamma {
        alpha0: f64,
        beta0: f64,
        n: u64,
        sum: f64,
    },
    Normal {
        mu0: f64,
        sigma0_sq: f64,
        sigma_sq: f64,
        n: u64,
        sum: f64,
    },
    InvGamma {
        alpha0: f64,
        beta0: f64,
        shape: f64,
        n: u64,
        sum_pow: f64,
    },
    Dirichlet {
        alpha0: Vec<f64>,
        counts: Vec<u64>,
    },
}

/// Lean serializable record for checkpointing: kind, hyperparameters, n.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PosteriorRecord {
    pub kind: String,
    pub hyperparameters: Vec<f64>,
    pub n: u64,
}

impl PosteriorState {
    /// Absorb more observations. Batch vs. stream order is hyperparameter-exact.
    pub fn absorb(&mut self, data: &[f64]) -> Result<()> {
        match self {
            PosteriorState::Gamma { n, sum, .. } => {
                for (i, &x) in data.iter().enumerate() {
                    if !x.is_finite() || x < 0.0 {
                        return Err(Error::Data(format!(
                            "observation [{i}]={x} outside [0, inf)"
                        )));
                    }
                    *sum += x;
                    *n += 1;
                }
            }
            PosteriorState::Normal { n, sum, .. } => {
                for (i, &x) in data.iter().enumerate() {
                    if !x.is_finite() {
                        return Err(Error::Data(format!("observation [{i}]={x} not finite")));
                    }
                    *sum += x;
                    *n += 1;
                }
            }
            PosteriorState::InvGamma {
                n, sum_pow, shape, ..
            } => {
                for (i, &x) in data.iter().enumerate() {
                    if !x.is_finite() || x < 0.0 {
                        return Err(Error::Data(format!(
                            "observation [{i}]={x} outside [0, inf)"
                        )));
                    }
                    *sum_pow += x.powf(*shape);
                    *n += 1;
                }
            }
            PosteriorState::Dirichlet { counts, .. } => {
                let l = counts.len();
                for (i, &x) in data.iter().enumerate() {
                    let j = x.round();
                    if !x.is_finite() || (x - j).abs() > 1e-9 || j < 0.0 || j >= l as f64 {
                        return Err(Error::Data(format!(
                            "observation [{i}]={x} is not a category index below {l}"
                        )));
                    }
                    counts[j as usize] += 1;
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> u64 {
        match self {
            PosteriorState::Gamma { n, .. }
            | PosteriorState::Normal { n, .. }
            | PosteriorState::InvGamma { n, .. } => *n,
            PosteriorState::Dirichlet { counts, .. } => counts.iter().sum(),
        }
    }

    /// Posterior hyperparameters in a fixed order per kind:
    /// Gamma/InvGamma `[α_n, β_n]`, Normal `[μ_n, σ_n²]`, Dirichlet `α_n`.
    pub fn hyperparameters(&self) -> Vec<f64> {
        match self {
            PosteriorState::Gamma {
                alpha0,
                beta0,
                n,
                sum,
            } => {
                vec![alpha0 + *n as f64, beta0 + sum]
            }
            PosteriorState::Normal {
                mu0,
                sigma0_sq,
                sigma_sq,
                n,
                sum,
            } => {
                let prec = 1.0 / sigma0_sq + *n as f64 / sigma_sq;
                let var_n = 1.0 / prec;
                let mu_n = var_n * (mu0 / sigma0_sq + sum / sigma_sq);
                vec![mu_n, var_n]
            }
            PosteriorState::InvGamma {
                alpha0,
                beta0,
                n,
                sum_pow,
                ..
            } => {
                vec![alpha0 + *n as f64, beta0 + sum_pow]
            }
            PosteriorState::Dirichlet { alpha0, counts } => alpha0
                .iter()
                .zip(counts.iter())
                .map(|(a, &c)| a + c as f64)
                .collect(),
        }
    }

    pub fn record(&self) -> PosteriorRecord {
        let kind = match self {
            PosteriorState::Gamma { .. } => "gamma",
            PosteriorState::Normal { .. } => "normal",
            PosteriorState::InvGamma { .. } => "inv_gamma",
            PosteriorState::Dirichlet { .. } => "dirichlet",
        };
        PosteriorRecord {
            kind: kind.to_string(),
            hyperparameters: self.hyperparameters(),
            n: self.n(),
        }
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        match self {
            PosteriorState::Gamma { .. } | PosteriorState::InvGamma { .. } => {
                vec![(0.0, f64::INFINITY)]
            }
            PosteriorState::Normal { .. } => vec![(f64::NEG_INFINITY, f64::INFINITY)],
            PosteriorState::Dirichlet { alpha0, .. } => vec![(0.0, 1.0); alpha0.len()],
        }
    }

    /// Draw `m` i.i.d. parameter points from the posterior. For the Weibull
    /// chain these are draws of λ = scale^β. Reproducible under seed.
    pub fn sample(&self, m: usize, stream: &mut Stream) -> Result<Vec<ParamPoint>> {
        if m == 0 {
            return Err(Error::Input("posterior_sample needs m >= 1".into()));
        }
        let bounds = self.bounds();
        let mut out = Vec::with_capacity(m);
        match self {
            PosteriorState::Gamma { .. } => {
                let h = self.hyperparameters();
                let g = GammaDist::new(h[0], 1.0 / h[1])
                    .map_err(|e| Error::Domain(format!("gamma sampler: {e}")))?;
                for _ in 0..m {
                    out.push(ParamPoint::new(vec![g.sample(stream)], bounds.clone())?);
                }
            }
            PosteriorState::Normal { .. } => {
                let h = self.hyperparameters();
                let sd = h[1].sqrt();
                for _ in 0..m {
                    let z = stats::norm_inv_cdf(stream.uniform_open())?;
                    out.push(ParamPoint::new(vec![h[0] + sd * z], bounds.clone())?);
                }
            }
            PosteriorState::InvGamma { .. } => {
                // reciprocal of a Gamma(α_n, rate β_n) draw
                let h = self.hyperparameters();
                let g = GammaDist::new(h[0], 1.0 / h[1])
                    .map_err(|e| Error::Domain(format!("gamma sampler: {e}")))?;
                for _ in 0..m {
                    out.push(ParamPoint::new(
                        vec![1.0 / g.sample(stream)],
                        bounds.clone(),
                    )?);
                }
            }
            PosteriorState::Dirichlet { .. } => {
                // normalized independent Gamma(α_i, 1) draws
                let h = self.hyperparameters();
                let gs: Vec<GammaDist<f64>> = h
                    .iter()
                    .map(|&a| {
                        GammaDist::new(a, 1.0)
                            .map_err(|e| Error::Domain(format!("gamma sampler: {e}")))
                    })
                    .collect::<Result<_>>()?;
                for _ in 0..m {
                    let raw: Vec<f64> = gs.iter().map(|g| g.sample(stream)).collect();
                    let total: f64 = raw.iter().sum();
                    let w: Vec<f64> = raw.iter().map(|r| r / total).collect();
                    out.push(ParamPoint::new(w, bounds.clone())?);
                }
            }
        }
        Ok(out)
    }

    /// Closed-form posterior mean and covariance.
    pub fn moments(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        match self {
            PosteriorState::Gamma { .. } => {
                let h = self.hyperparameters();
                let (a, b) = (h[0], h[1]);
                Ok((
                    DVector::from_element(1, a / b),
                    DMatrix::from_element(1, 1, a / (b * b)),
                ))
            }
            PosteriorState::Normal { .. } => {
                let h = self.hyperparameters();
                Ok((
                    DVector::from_element(1, h[0]),
                    DMatrix::from_element(1, 1, h[1]),
                ))
            }
            PosteriorState::InvGamma { .. } => {
                let h = self.hyperparameters();
                let (a, b) = (h[0], h[1]);
                if a <= 2.0 {
                    return Err(Error::MomentUndefined(format!(
                        "inverse-gamma variance needs alpha_n > 2, got {a}"
                    )));
                }
                let mean = b / (a - 1.0);
                let var = b * b / ((a - 1.0) * (a - 1.0) * (a - 2.0));
                Ok((
                    DVector::from_element(1, mean),
                    DMatrix::from_element(1, 1, var),
                ))
            }
            PosteriorState::Dirichlet { .. } => {
                let h = self.hyperparameters();
                let l = h.len();
                let total: f64 = h.iter().sum();
                let mean = DVector::from_iterator(l, h.iter().map(|&a| a / total));
                let denom = total * total * (total + 1.0);
                let mut cov = DMatrix::zeros(l, l);
                for i in 0..l {
                    for j in 0..l {
                        cov[(i, j)] = if i == j {
                            h[i] * (total - h[i]) / denom
                        } else {
                            -h[i] * h[j] / denom
                        };
                    }
                }
                Ok((mean, cov))
            }
        }
    }

    /// Second-moment diagnostic `E[‖√n(θ - θ^c)‖²]`, which expands to
    /// `‖√n(mean - θ^c)‖² + n·trace(cov)`. Boundedness of this quantity across
    /// n is the uniform-integrability condition the normality results need.
    pub fn a41_diagnostic(&self, theta_c: &ParamPoint) -> Result<f64> {
        let n = self.n();
        if n == 0 {
            return Err(Error::Input("diagnostic needs n >= 1 observations".into()));
        }
        let (mean, cov) = self.moments()?;
        if mean.len() != theta_c.dim() {
            return Err(Error::Domain(format!(
                "theta_c has dimension {}, posterior has {}",
                theta_c.dim(),
                mean.len()
            )));
        }
        let nf = n as f64;
        let bias_sq: f64 = mean
            .iter()
            .zip(theta_c.theta().iter())
            .map(|(m, t)| nf * (m - t) * (m - t))
            .sum();
        Ok(bias_sq + nf * cov.trace())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ObservationFamily as Fam;

    fn gamma_prior(a: f64, b: f64) -> Prior {
        Prior::new(
            PriorKind::Gamma {
                alpha0: a,
                beta0: b,
            },
            Fam::exponential_rate(),
        )
        .unwrap()
    }

    #[test]
    fn gamma_update_matches_conjugate_formula() {
        let prior = gamma_prior(2.0, 1.0);
        let data = [1.0, 2.0, 3.0, 2.5, 1.5]; // n=5, sum=10
        let post = prior.update(&data).unwrap();
        assert_eq!(post.hyperparameters(), vec![7.0, 11.0]);
        assert_eq!(post.n(), 5);
    }

    #[test]
    fn dirichlet_update_adds_counts() {
        let fam = Fam::finite_discrete(vec![0.0, 1.0]).unwrap();
        let prior = Prior::new(
            PriorKind::Dirichlet {
                alpha0: vec![1.0, 1.0],
            },
            fam,
        )
        .unwrap();
        let mut data = vec![0.0; 3];
        data.extend(vec![1.0; 7]);
        let post = prior.update(&data).unwrap();
        assert_eq!(post.hyperparameters(), vec![4.0, 8.0]);
    }

    #[test]
    fn empty_data_returns_prior() {
        let prior = gamma_prior(2.0, 1.0);
        let post = prior.update(&[]).unwrap();
        assert_eq!(post.hyperparameters(), vec![2.0, 1.0]);
        assert_eq!(post.n(), 0);
    }

    #[test]
    fn illegal_pairing_rejected() {
        let r = Prior::new(
            PriorKind::Gamma {
                alpha0: 1.0,
                beta0: 1.0,
            },
            Fam::normal_known_var(1.0).unwrap(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn observation_outside_support_is_data_error() {
        let prior = gamma_prior(2.0, 1.0);
        assert!(matches!(prior.update(&[1.0, -0.5]), Err(Error::Data(_))));
        let fam = Fam::finite_discrete(vec![0.0, 1.0]).unwrap();
        let prior = Prior::new(
            PriorKind::Dirichlet {
                alpha0: vec![1.0, 1.0],
            },
            fam,
        )
        .unwrap();
        assert!(matches!(prior.update(&[0.0, 2.0]), Err(Error::Data(_))));
    }

    #[test]
    fn batch_equals_stream_exactly() {
        let prior = gamma_prior(1.3, 0.7);
        let mut s = Stream::from_seed(5);
        let data: Vec<f64> = (0..200).map(|_| s.uniform_open() * 3.0).collect();
        for split in [0, 1, 57, 199, 200] {
            let batch = prior.update(&data).unwrap();
            let mut stream_state = prior.update(&data[..split]).unwrap();
            stream_state.absorb(&data[split..]).unwrap();
            assert_eq!(batch.hyperparameters(), stream_state.hyperparameters());
            assert_eq!(batch, stream_state);
        }
    }

    #[test]
    fn batch_equals_stream_weibull_and_normal() {
        let mut s = Stream::from_seed(6);
        let data: Vec<f64> = (0..100).map(|_| s.uniform_open() * 2.0).collect();
        let wfam = Fam::weibull_known_shape(1.5).unwrap();
        let wprior = Prior::new(
            PriorKind::InvGamma {
                alpha0: 3.0,
                beta0: 2.0,
            },
            wfam,
        )
        .unwrap();
        let nfam = Fam::normal_known_var(4.0).unwrap();
        let nprior = Prior::new(
            PriorKind::Normal {
                mu0: 0.0,
                sigma0_sq: 1.0,
            },
            nfam,
        )
        .unwrap();
        for prior in [wprior, nprior] {
            let batch = prior.update(&data).unwrap();
            let mut streamed = prior.update(&data[..33]).unwrap();
            streamed.absorb(&data[33..71]).unwrap();
            streamed.absorb(&data[71..]).unwrap();
            assert_eq!(batch.hyperparameters(), streamed.hyperparameters());
        }
    }

    #[test]
    fn gamma_posterior_sample_mean() {
        let post = PosteriorState::Gamma {
            alpha0: 2.0,
            beta0: 1.0,
            n: 5,
            sum: 10.0,
        };
        let mut s = Stream::from_seed(11);
        let draws = post.sample(1_000_000, &mut s).unwrap();
        let mean = draws.iter().map(|p| p.theta()[0]).sum::<f64>() / draws.len() as f64;
        assert!((mean - 7.0 / 11.0).abs() < 0.003, "mean={mean}");
    }

    #[test]
    fn normal_posterior_degenerates_at_large_n() {
        let post = PosteriorState::Normal {
            mu0: 0.0,
            sigma0_sq: 1.0,
            sigma_sq: 1.0,
            n: 10_000_000_000,
            sum: 10_000_000_000.0, // sample mean exactly 1
        };
        let mut s = Stream::from_seed(12);
        let draws = post.sample(1000, &mut s).unwrap();
        let h = post.hyperparameters();
        for d in &draws {
            assert!((d.theta()[0] - h[0]).abs() < 1e-3);
        }
    }

    #[test]
    fn dirichlet_posterior_sample_mean() {
        let post = PosteriorState::Dirichlet {
            alpha0: vec![4.0, 8.0],
            counts: vec![0, 0],
        };
        let mut s = Stream::from_seed(13);
        let draws = post.sample(1_000_000, &mut s).unwrap();
        let mean0 = draws.iter().map(|p| p.theta()[0]).sum::<f64>() / draws.len() as f64;
        assert!((mean0 - 1.0 / 3.0).abs() < 0.002, "mean0={mean0}");
    }

    #[test]
    fn sample_rejects_zero_draws() {
        let post = PosteriorState::Gamma {
            alpha0: 1.0,
            beta0: 1.0,
            n: 0,
            sum: 0.0,
        };
        assert!(matches!(
            post.sample(0, &mut Stream::from_seed(1)),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn gamma_moments_closed_form_and_monte_carlo() {
        let post = PosteriorState::Gamma {
            alpha0: 2.0,
            beta0: 1.0,
            n: 5,
            sum: 10.0,
        };
        let (mean, cov) = post.moments().unwrap();
        assert!((mean[0] - 7.0 / 11.0).abs() < 1e-15);
        assert!((cov[(0, 0)] - 7.0 / 121.0).abs() < 1e-15);
        let mut s = Stream::from_seed(14);
        let draws = post.sample(1_000_000, &mut s).unwrap();
        let m = draws.iter().map(|p| p.theta()[0]).sum::<f64>() / 1e6;
        let v = draws
            .iter()
            .map(|p| (p.theta()[0] - m).powi(2))
            .sum::<f64>()
            / 1e6;
        assert!((m - mean[0]).abs() < 0.002);
        assert!((v / cov[(0, 0)] - 1.0).abs() < 0.02);
    }

    #[test]
    fn normal_moments_are_hyperparameters() {
        let post = PosteriorState::Normal {
            mu0: 1.0,
            sigma0_sq: 0.04,
            sigma_sq: 1.0,
            n: 0,
            sum: 0.0,
        };
        let (mean, cov) = post.moments().unwrap();
        assert_eq!(mean[0], 1.0);
        assert!((cov[(0, 0)] - 0.04).abs() < 1e-15);
    }

    #[test]
    fn dirichlet_moments() {
        let post = PosteriorState::Dirichlet {
            alpha0: vec![4.0, 8.0],
            counts: vec![0, 0],
        };
        let (mean, cov) = post.moments().unwrap();
        assert!((mean[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((mean[1] - 2.0 / 3.0).abs() < 1e-15);
        // Var(theta_0) = a0*(s-a0)/(s^2*(s+1)) with s=12
        assert!((cov[(0, 0)] - 4.0 * 8.0 / (144.0 * 13.0)).abs() < 1e-15);
        assert!((cov[(0, 1)] + 4.0 * 8.0 / (144.0 * 13.0)).abs() < 1e-15);
    }

    #[test]
    fn inv_gamma_moments_need_alpha_above_two() {
        let post = PosteriorState::InvGamma {
            alpha0: 1.5,
            beta0: 1.0,
            shape: 2.0,
            n: 0,
            sum_pow: 0.0,
        };
        assert!(matches!(post.moments(), Err(Error::MomentUndefined(_))));
        let post = PosteriorState::InvGamma {
            alpha0: 2.0,
            beta0: 1.0,
            shape: 2.0,
            n: 4,
            sum_pow: 10.0,
        };
        let (mean, cov) = post.moments().unwrap();
        assert!((mean[0] - 11.0 / 5.0).abs() < 1e-15);
        assert!((cov[(0, 0)] - 121.0 / (25.0 * 4.0)).abs() < 1e-15);
    }

    #[test]
    fn a41_normal_nvar_is_exact_formula() {
        // n*sigma_n^2 = n / (1/sigma0^2 + n/sigma^2), approaching sigma^2
        for n in [10u64, 100, 10_000] {
            let post = PosteriorState::Normal {
                mu0: 0.0,
                sigma0_sq: 2.0,
                sigma_sq: 4.0,
                n,
                sum: 0.0,
            };
            let (_, cov) = post.moments().unwrap();
            let nvar = n as f64 * cov[(0, 0)];
            let want = n as f64 / (1.0 / 2.0 + n as f64 / 4.0);
            assert!((nvar - want).abs() < 1e-12);
        }
        let post = PosteriorState::Normal {
            mu0: 0.0,
            sigma0_sq: 2.0,
            sigma_sq: 4.0,
            n: 100_000_000,
            sum: 0.0,
        };
        let (_, cov) = post.moments().unwrap();
        assert!((1e8 * cov[(0, 0)] - 4.0).abs() < 1e-4);
    }

    #[test]
    fn a41_exponential_nvar_approaches_theta_sq() {
        let fam = Fam::exponential_rate();
        let theta_c = ParamPoint::scalar(1.5, 0.0, f64::INFINITY).unwrap();
        let prior = gamma_prior(2.0, 1.0);
        let n = 10_000;
        let mut s = Stream::from_seed(21);
        let data = fam.sample(&theta_c, n, &mut s).unwrap();
        let post = prior.update(&data).unwrap();
        let (_, cov) = post.moments().unwrap();
        let nvar = n as f64 * cov[(0, 0)];
        assert!((nvar / (1.5 * 1.5) - 1.0).abs() < 0.05, "nvar={nvar}");
        // full diagnostic is the bias part plus the trace part
        let d = post.a41_diagnostic(&theta_c).unwrap();
        let (mean, _) = post.moments().unwrap();
        let bias = n as f64 * (mean[0] - 1.5) * (mean[0] - 1.5);
        assert!((d - (bias + nvar)).abs() < 1e-10);
    }

    #[test]
    fn a41_dirichlet_nvar_approaches_theta_one_minus_theta() {
        let fam = Fam::finite_discrete(vec![0.0, 1.0, 2.0]).unwrap();
        let theta_c = ParamPoint::simplex(vec![0.2, 0.3, 0.5]).unwrap();
        let prior = Prior::new(
            PriorKind::Dirichlet {
                alpha0: vec![1.0, 1.0, 1.0],
            },
            fam.clone(),
        )
        .unwrap();
        let n = 10_000;
        let mut s = Stream::from_seed(22);
        let data = fam.sample(&theta_c, n, &mut s).unwrap();
        let post = prior.update(&data).unwrap();
        let (_, cov) = post.moments().unwrap();
        for (i, &t) in theta_c.theta().iter().enumerate() {
            let nvar = n as f64 * cov[(i, i)];
            assert!(
                (nvar / (t * (1.0 - t)) - 1.0).abs() < 0.1,
                "coord {i}: nvar={nvar}"
            );
        }
    }

    /// Posterior mass of a ball around theta_c grows toward 1 as n grows.
    #[test]
    fn posterior_consistency_ball_mass() {
        let radius = 0.25;
        let reps: usize = 100;
        let ns = [10usize, 100, 1000, 10_000];

        // normal-mean chain: closed-form CDF
        let fam = Fam::normal_known_var(4.0).unwrap();
        let theta_c = ParamPoint::scalar(0.5, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let prior = Prior::new(
            PriorKind::Normal {
                mu0: 0.0,
                sigma0_sq: 1.0,
            },
            fam.clone(),
        )
        .unwrap();
        let mut medians = Vec::new();
        for (ni, &n) in ns.iter().enumerate() {
            let mut masses = Vec::new();
            for rep in 0..reps {
                let mut s = Stream::from_seed(100)
                    .child_u64(ni as u64)
                    .child_u64(rep as u64);
                let data = fam.sample(&theta_c, n, &mut s).unwrap();
                let h = prior.update(&data).unwrap().hyperparameters();
                let (mu_n, sd_n) = (h[0], h[1].sqrt());
                let mass = stats::norm_cdf((0.5 + radius - mu_n) / sd_n)
                    - stats::norm_cdf((0.5 - radius - mu_n) / sd_n);
                masses.push(mass);
            }
            masses.sort_by(f64::total_cmp);
            medians.push(masses[reps / 2]);
        }
        assert!(
            medians.windows(2).all(|w| w[0] <= w[1]),
            "normal medians not monotone: {medians:?}"
        );
        assert!(medians[3] > 0.999);

        // exponential chain: Monte Carlo ball mass from posterior draws
        let fam = Fam::exponential_rate();
        let theta_c = ParamPoint::scalar(1.0, 0.0, f64::INFINITY).unwrap();
        let prior = gamma_prior(1.0, 1.0);
        let mut medians = Vec::new();
        for (ni, &n) in ns.iter().enumerate() {
            let mut masses = Vec::new();
            for rep in 0..reps {
                let mut s = Stream::from_seed(200)
                    .child_u64(ni as u64)
                    .child_u64(rep as u64);
                let data = fam.sample(&theta_c, n, &mut s).unwrap();
                let post = prior.update(&data).unwrap();
                let draws = post.sample(100_000, &mut s.child("draws")).unwrap();
                let inside = draws
                    .iter()
                    .filter(|p| (p.theta()[0] - 1.0).abs() <= radius)
                    .count();
                masses.push(inside as f64 / draws.len() as f64);
            }
            masses.sort_by(f64::total_cmp);
            medians.push(masses[reps / 2]);
        }
        assert!(
            medians.windows(2).all(|w| w[0] <= w[1]),
            "exponential medians not monotone: {medians:?}"
        );
        assert!(medians[3] > 0.999);
    }

    /// Scaled posterior-mean error behaves like N(0, 1/I(theta_c)) at n=400.
    #[test]
    fn posterior_mean_clt() {
        let fam = Fam::exponential_rate();
        let theta_c = ParamPoint::scalar(1.0, 0.0, f64::INFINITY).unwrap();
        let prior = gamma_prior(1.0, 1.0);
        let n = 400;
        let reps = 1000;
        let sigma_lim = 1.0; // sqrt(I^{-1}) = theta_c
        let mut errs = Vec::with_capacity(reps);
        for rep in 0..reps {
            let mut s = Stream::from_seed(300).child_u64(rep as u64);
            let data = fam.sample(&theta_c, n, &mut s).unwrap();
            let (mean, _) = prior.update(&data).unwrap().moments().unwrap();
            errs.push((n as f64).sqrt() * (mean[0] - 1.0));
        }
        let m = errs.iter().sum::<f64>() / reps as f64;
        let sd = (errs.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!(m.abs() <= 0.15 * sigma_lim, "mean={m}");
        assert!((sd / sigma_lim - 1.0).abs() <= 0.10, "sd={sd}");
    }

    #[test]
    fn record_is_serializable() {
        let post = PosteriorState::Gamma {
            alpha0: 2.0,
            beta0: 1.0,
            n: 5,
            sum: 10.0,
        };
        let rec = post.record();
        let json = serde_json::to_string(&rec).unwrap();
        let back: PosteriorRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.hyperparameters, vec![7.0, 11.0]);
        assert_eq!(back.n, 5);
    }
}
