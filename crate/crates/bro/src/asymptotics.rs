//! Delta-method quantities for the posterior-risk objectives.
//!
//! The √n-scaled error of every objective converges to a normal law with
//! standard deviation `σ_x`, where `σ_x² = ∇_θH(x,θ^c)ᵀ [I(θ^c)]⁻¹ ∇_θH(x,θ^c)`.
//! Mean and mean-variance are centered; VaR and CVaR carry deterministic
//! offsets `σ_x Φ⁻¹(α)` and `σ_x φ(Φ⁻¹(α))/(1-α)`. Dividing by √n gives the
//! bias used to recenter confidence intervals, which share the half-width
//! `z_{1-β/2} σ_x / √n` across all four objectives.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ParamPoint;
use crate::objective::{Problem, GRAD_STEP_ANALYTIC};
use crate::risk::RiskSpec;
use crate::stats;

/// The delta-method ingredients at a fixed decision `x`.
#[derive(Debug, Clone)]
pub struct AsymptoticParams {
    /// ∇_θ H(x, θ^c) in the family's free coordinates.
    pub grad: DVector<f64>,
    /// Fisher information I(θ^c), free coordinates.
    pub info: DMatrix<f64>,
    /// sqrt(gradᵀ I⁻¹ grad).
    pub sigma_x: f64,
}

/// Assemble gradient, information, and the limit scale at `theta_c`.
pub fn sigma_x(problem: &Problem, x: &[f64], theta_c: &ParamPoint) -> Result<AsymptoticParams> {
    let grad = DVector::from_vec(problem.grad_h_theta(x, theta_c, GRAD_STEP_ANALYTIC)?);
    let info = problem.family.fisher_information(theta_c)?;
    let chol = Cholesky::new(info.clone())
        .ok_or_else(|| Error::Singular("Fisher information is not positive definite".into()))?;
    let solved = chol.solve(&grad);
    let quad = grad.dot(&solved);
    Ok(AsymptoticParams {
        grad,
        info,
        sigma_x: quad.max(0.0).sqrt(),
    })
}

/// Mean of the √n-scaled limit law for a given objective.
pub fn limit_mean(spec: &RiskSpec, sigma_x: f64) -> Result<f64> {
    if sigma_x < 0.0 {
        return Err(Error::Domain(format!(
            "sigma_x must be >= 0, got {sigma_x}"
        )));
    }
    match *spec {
        RiskSpec::Mean | RiskSpec::MeanVariance { .. } => Ok(0.0),
        RiskSpec::VaR { alpha } => {
            if alpha >= 1.0 {
                return Err(Error::Domain(
                    "no normal limit for the worst case alpha=1".into(),
                ));
            }
            Ok(sigma_x * stats::norm_inv_cdf(alpha)?)
        }
        RiskSpec::CVaR { alpha } => {
            let z = stats::norm_inv_cdf(alpha)?;
            Ok(sigma_x * stats::norm_pdf(z) / (1.0 - alpha))
        }
    }
}

/// Deterministic offset of an objective from `H(x, θ^c)` at sample size n:
/// zero for mean and mean-variance (whose variance term is O(1/n)),
/// `Φ⁻¹(α) σ_x / √n` for VaR, `φ(Φ⁻¹(α)) σ_x / ((1-α)√n)` for CVaR.
pub fn bias_term(spec: &RiskSpec, sigma_x: f64, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Input("bias term needs n >= 1".into()));
    }
    Ok(limit_mean(spec, sigma_x)? / (n as f64).sqrt())
}

/// Asymptotic 100(1-β)% confidence interval for `H(x, θ^c)` built from an
/// objective estimate: center is the estimate minus the functional's bias, and
/// half-width `z_{1-β/2} σ_x / √n` is shared by all objectives.
pub fn confidence_interval(
    spec: &RiskSpec,
    estimate: f64,
    sigma_x: f64,
    n: u64,
    beta: f64,
) -> Result<(f64, f64)> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta must be in (0,1), got {beta}")));
    }
    if n == 0 {
        return Err(Error::Input("confidence interval needs n >= 1".into()));
    }
    let center = estimate - bias_term(spec, sigma_x, n)?;
    let hw = stats::norm_inv_cdf(1.0 - beta / 2.0)? * sigma_x / (n as f64).sqrt();
    Ok((center - hw, center + hw))
}

/// Empirical moments and KS distance of replicated √n-scaled errors against
/// their predicted normal limit.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct NormalityReport {
    pub sample_mean: f64,
    pub sample_sd: f64,
    pub predicted_mean: f64,
    pub predicted_sd: f64,
    pub ks_stat: f64,
    pub replications: usize,
    /// All errors collapsed to a point; the KS statistic is then just the
    /// largest CDF gap at that point.
    pub degenerate: bool,
}

impl NormalityReport {
    pub fn csv_header() -> &'static str {
        "sample_mean,sample_sd,predicted_mean,predicted_sd,ks_stat,replications,degenerate"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.sample_mean,
            self.sample_sd,
            self.predicted_mean,
            self.predicted_sd,
            self.ks_stat,
            self.replications,
            u8::from(self.degenerate)
        )
    }
}

/// One-sample Kolmogorov-Smirnov diagnostic against N(predicted_mean,
/// predicted_sd²) — the limit law is fully specified, no parameters are
/// estimated from the errors.
pub fn normality_diagnostic(
    errors: &[f64],
    predicted_mean: f64,
    predicted_sd: f64,
) -> Result<NormalityReport> {
    let r = errors.len();
    if r < 30 {
        return Err(Error::Input(format!(
            "need at least 30 replications, got {r}"
        )));
    }
    if !predicted_sd.is_finite() || predicted_sd <= 0.0 {
        return Err(Error::Domain(format!(
            "predicted_sd must be > 0, got {predicted_sd}"
        )));
    }
    let rf = r as f64;
    let mut sorted = errors.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    // a point mass has zero variance by definition, not by float accident
    let degenerate = sorted[0] == sorted[r - 1];
    let sample_mean = if degenerate {
        sorted[0]
    } else {
        errors.iter().sum::<f64>() / rf
    };
    let sample_sd = if degenerate {
        0.0
    } else {
        (errors
            .iter()
            .map(|e| (e - sample_mean) * (e - sample_mean))
            .sum::<f64>()
            / (rf - 1.0))
            .sqrt()
    };
    let mut ks: f64 = 0.0;
    for (i, &e) in sorted.iter().enumerate() {
        let f = stats::norm_cdf((e - predicted_mean) / predicted_sd);
        ks = ks.max(f - i as f64 / rf).max((i + 1) as f64 / rf - f);
    }

    Ok(NormalityReport {
        sample_mean,
        sample_sd,
        predicted_mean,
        predicted_sd,
        ks_stat: ks,
        replications: r,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::{Prior, PriorKind};
    use crate::model::ObservationFamily;
    use crate::objective::{linear_normal, newsvendor_exp, SamplePathObjective};
    use crate::risk::apply_risk;
    use crate::rng::Stream;

    #[test]
    fn sigma_x_linear_normal_composes_closed_forms() {
        // grad = (2), I = 1/4, so sigma_x^2 = 2 * 4 * 2 = 16
        let pb = linear_normal(4.0, 0.7, (-4.0, 4.0), (-1e3, 1e3)).unwrap();
        let p = sigma_x(&pb, &[2.0], &pb.theta_c).unwrap();
        assert!((p.sigma_x - 4.0).abs() < 1e-12);
        assert_eq!(p.grad[0], 2.0);
        assert!((p.info[(0, 0)] - 0.25).abs() < 1e-15);
        // stored fields are mutually consistent
        let quad = p.grad[0] * p.grad[0] / p.info[(0, 0)];
        assert!((p.sigma_x * p.sigma_x - quad).abs() < 1e-10);
    }

    #[test]
    fn sigma_x_zero_gradient() {
        let pb = linear_normal(4.0, 0.7, (-4.0, 4.0), (-1e3, 1e3)).unwrap();
        let p = sigma_x(&pb, &[0.0], &pb.theta_c).unwrap();
        assert_eq!(p.sigma_x, 0.0);
    }

    #[test]
    fn sigma_x_newsvendor() {
        let pb = newsvendor_exp(1.0, 3.0, 1.0, (0.0, 4.0), (1e-3, 1e3)).unwrap();
        let p = sigma_x(&pb, &[1.0], &pb.theta_c).unwrap();
        // |3(1 - 2/e)| * sqrt(I^{-1}) with I = 1 at theta = 1
        assert!(
            (p.sigma_x - 0.7927233529713461).abs() < 1e-12,
            "sigma={}",
            p.sigma_x
        );
    }

    #[test]
    fn sigma_x_discrete_uses_free_coordinates() {
        let pb = crate::objective::discrete_portfolio(
            vec![-1.0, 0.5, 2.0],
            vec![vec![-0.5, 1.0], vec![0.2, 0.1], vec![1.0, -0.3]],
            vec![0.2, 0.3, 0.5],
            (0.0, 1.0),
        )
        .unwrap();
        let p = sigma_x(&pb, &[0.4, 0.6], &pb.theta_c).unwrap();
        assert_eq!(p.grad.len(), 2);
        assert!(p.sigma_x > 0.0);
        // against the closed-form inverse [I^{-1}]_{jk} = p_j (δ_jk - p_k)
        let g = &p.grad;
        let th = [0.2, 0.3];
        let mut quad = 0.0;
        for j in 0..2 {
            for k in 0..2 {
                let inv = th[j] * (if j == k { 1.0 } else { 0.0 } - th[k]);
                quad += g[j] * inv * g[k];
            }
        }
        assert!((p.sigma_x * p.sigma_x - quad).abs() < 1e-10);
    }

    #[test]
    fn bias_term_cases() {
        assert_eq!(bias_term(&RiskSpec::Mean, 5.0, 17).unwrap(), 0.0);
        assert_eq!(
            bias_term(&RiskSpec::MeanVariance { w: 2.0 }, 5.0, 17).unwrap(),
            0.0
        );
        assert_eq!(
            bias_term(&RiskSpec::VaR { alpha: 0.5 }, 5.0, 17).unwrap(),
            0.0
        );
        let b = bias_term(&RiskSpec::CVaR { alpha: 0.95 }, 2.0, 400).unwrap();
        assert!((b - 0.2062712807507426).abs() < 1e-9, "b={b}");
        assert!(bias_term(&RiskSpec::VaR { alpha: 1.0 }, 1.0, 10).is_err());
        assert!(bias_term(&RiskSpec::Mean, 1.0, 0).is_err());
    }

    #[test]
    fn confidence_interval_cases() {
        let (lo, hi) = confidence_interval(&RiskSpec::Mean, 5.0, 2.0, 100, 0.05).unwrap();
        assert!((lo - (5.0 - 0.3919927969080108)).abs() < 1e-9);
        assert!((hi - (5.0 + 0.3919927969080108)).abs() < 1e-9);

        let est = 3.0;
        let (lo, hi) =
            confidence_interval(&RiskSpec::VaR { alpha: 0.95 }, est, 2.0, 100, 0.05).unwrap();
        let center = est - 1.6448536269514722 * 0.2;
        assert!((0.5 * (lo + hi) - center).abs() < 1e-9);
        assert!((hi - lo - 2.0 * 0.3919927969080108).abs() < 1e-9);

        let (lo, hi) = confidence_interval(&RiskSpec::Mean, 1.5, 0.0, 50, 0.05).unwrap();
        assert_eq!((lo, hi), (1.5, 1.5));
        assert!(confidence_interval(&RiskSpec::Mean, 1.0, 1.0, 10, 1.5).is_err());
    }

    #[test]
    fn intervals_share_half_width_and_differ_in_center() {
        let (sx, n, beta, est) = (1.7, 400, 0.05, 2.5);
        let specs = [
            RiskSpec::Mean,
            RiskSpec::MeanVariance { w: 1.0 },
            RiskSpec::VaR { alpha: 0.95 },
            RiskSpec::CVaR { alpha: 0.95 },
        ];
        let hw0 = {
            let (lo, hi) = confidence_interval(&specs[0], est, sx, n, beta).unwrap();
            (hi - lo) / 2.0
        };
        for spec in &specs {
            let (lo, hi) = confidence_interval(spec, est, sx, n, beta).unwrap();
            assert!(((hi - lo) / 2.0 - hw0).abs() < 1e-12);
            let center = (lo + hi) / 2.0;
            let want = est - bias_term(spec, sx, n).unwrap();
            assert!((center - want).abs() < 1e-12);
        }
    }

    #[test]
    fn cvar_bias_dominates_var_bias() {
        for alpha in [0.55, 0.6, 0.75, 0.9, 0.95, 0.99] {
            let v = bias_term(&RiskSpec::VaR { alpha }, 1.0, 100).unwrap();
            let c = bias_term(&RiskSpec::CVaR { alpha }, 1.0, 100).unwrap();
            assert!(c >= v, "alpha={alpha}: cvar bias {c} < var bias {v}");
        }
    }

    #[test]
    fn ks_small_for_exact_normal_draws() {
        let mut s = Stream::from_seed(55);
        let errors: Vec<f64> = (0..10_000)
            .map(|_| 1.5 + 0.7 * stats::norm_inv_cdf(s.uniform_open()).unwrap())
            .collect();
        let rep = normality_diagnostic(&errors, 1.5, 0.7).unwrap();
        assert!(rep.ks_stat < 0.02, "ks={}", rep.ks_stat);
        assert!(!rep.degenerate);
    }

    #[test]
    fn ks_degenerate_point_mass() {
        let errors = vec![0.3; 50];
        let rep = normality_diagnostic(&errors, 0.3, 1.0).unwrap();
        assert!(rep.degenerate);
        assert_eq!(rep.sample_sd, 0.0);
        assert!((rep.ks_stat - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ks_detects_total_separation() {
        let mut s = Stream::from_seed(56);
        let errors: Vec<f64> = (0..500)
            .map(|_| 10.0 + stats::norm_inv_cdf(s.uniform_open()).unwrap())
            .collect();
        let rep = normality_diagnostic(&errors, 0.0, 1.0).unwrap();
        assert!(rep.ks_stat > 0.99, "ks={}", rep.ks_stat);
    }

    #[test]
    fn diagnostic_rejects_bad_inputs() {
        assert!(normality_diagnostic(&[0.0; 10], 0.0, 1.0).is_err());
        assert!(normality_diagnostic(&[0.0; 100], 0.0, 0.0).is_err());
    }

    #[test]
    fn report_csv_is_one_row() {
        let rep = normality_diagnostic(&vec![0.1; 64], 0.0, 1.0).unwrap();
        assert_eq!(
            NormalityReport::csv_header().split(',').count(),
            rep.csv_row().split(',').count()
        );
    }

    /// The gap between the VaR objective and the mean objective at fixed x
    /// matches the predicted bias on average across replications.
    #[test]
    fn var_minus_mean_matches_bias_term() {
        let pb = newsvendor_exp(1.0, 3.0, 1.0, (0.0, 4.0), (1e-3, 1e3)).unwrap();
        let prior = Prior::new(
            PriorKind::Gamma {
                alpha0: 1.0,
                beta0: 2.0,
            },
            ObservationFamily::exponential_rate(),
        )
        .unwrap();
        let (n, reps, outer_m) = (400usize, 1000usize, 2000usize);
        let x = [1.0];
        let alpha = 0.95;
        let root = Stream::from_seed(4242);
        let diffs: Vec<(f64, f64)> = crate::parallel::map_indexed(reps, |rep| {
            let s = root.child_u64(rep as u64);
            let data = pb
                .family
                .sample(&pb.theta_c, n, &mut s.child("data"))
                .unwrap();
            let post = prior.update(&data).unwrap();
            let thetas = post.sample(outer_m, &mut s.child("draws")).unwrap();
            let spo = SamplePathObjective::new(&pb, RiskSpec::Mean, thetas, 0, 0).unwrap();
            let values = spo.values(&x).unwrap();
            let mean = apply_risk(&RiskSpec::Mean, &values).unwrap();
            let var = apply_risk(&RiskSpec::VaR { alpha }, &values).unwrap();
            let posterior_var =
                apply_risk(&RiskSpec::MeanVariance { w: 1.0 }, &values).unwrap() - mean;
            (var - mean, posterior_var)
        });
        let avg = diffs.iter().map(|d| d.0).sum::<f64>() / reps as f64;
        let sx = sigma_x(&pb, &x, &pb.theta_c).unwrap().sigma_x;
        let predicted = bias_term(&RiskSpec::VaR { alpha }, sx, n as u64).unwrap();
        assert!(
            (avg / predicted - 1.0).abs() < 0.10,
            "avg={avg} predicted={predicted}"
        );

        // the mean-variance extra term is O(1/n): n times the posterior
        // variance of H approaches sigma_x^2
        let nvar = n as f64 * diffs.iter().map(|d| d.1).sum::<f64>() / reps as f64;
        assert!(
            (nvar / (sx * sx) - 1.0).abs() < 0.10,
            "n*Var avg {nvar} vs sigma_x^2 {}",
            sx * sx
        );
    }
}
