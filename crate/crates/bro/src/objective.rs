//! Decision problems: a cost kernel `h(x, ξ)`, its expectation under the
//! observation family `H(x, θ) = E_{P_θ}[h(x, ξ)]`, the θ-gradient of `H`,
//! and the posterior-risk objective `ρ[H(x, θ)]` over posterior draws of θ.
//!
//! When `H` has no closed form it is estimated by an inner Monte Carlo stage.
//! The inner uniforms are derived from `(stream, x)` only — never from the
//! position of a θ draw in the outer loop — so every θ sees the same inner
//! randomness. Without common random numbers, quantile-based risk of the
//! outer vector would absorb independent inner noise and bias upward.

use std::fmt;
use std::sync::Arc;

use crate::bayes::PosteriorState;
use crate::error::{Error, Result};
use crate::model::{ObservationFamily, ParamPoint};
use crate::risk::{apply_risk, RiskSpec};
use crate::rng::{fnv1a, Stream};

pub type CostKernel = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type ThetaFn = Arc<dyn Fn(&[f64], &ParamPoint) -> f64 + Send + Sync>;
pub type ThetaGradFn = Arc<dyn Fn(&[f64], &ParamPoint) -> Vec<f64> + Send + Sync>;

/// Default relative step for finite differences through an analytic `H`.
pub const GRAD_STEP_ANALYTIC: f64 = 1e-5;
/// Coarser default for the Monte Carlo path, so the difference quotient
/// dominates simulation noise.
pub const GRAD_STEP_MC: f64 = 1e-3;

/// A decision problem over a compact box.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub family: ObservationFamily,
    /// Decision box, one closed interval per coordinate.
    pub decision_box: Vec<(f64, f64)>,
    /// Ground-truth parameter used by experiments.
    pub theta_c: ParamPoint,
    /// Unique minimizer of `H(·, theta_c)` over the box, when known.
    pub x_star: Option<Vec<f64>>,
    kernel: CostKernel,
    h_analytic: Option<ThetaFn>,
    grad_analytic: Option<ThetaGradFn>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("family", &self.family)
            .field("decision_box", &self.decision_box)
            .field("theta_c", &self.theta_c)
            .field("x_star", &self.x_star)
            .field("h_analytic", &self.h_analytic.is_some())
            .field("grad_analytic", &self.grad_analytic.is_some())
            .finish()
    }
}

impl Problem {
    /// Assemble a problem from parts, checking that the box is compact and
    /// that the cost stays finite at the box corners under `theta_c`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        family: ObservationFamily,
        decision_box: Vec<(f64, f64)>,
        theta_c: ParamPoint,
        kernel: CostKernel,
        h_analytic: Option<ThetaFn>,
        grad_analytic: Option<ThetaGradFn>,
        x_star: Option<Vec<f64>>,
    ) -> Result<Self> {
        if decision_box.is_empty() {
            return Err(Error::Domain(
                "decision box must have at least one dimension".into(),
            ));
        }
        for &(lo, hi) in &decision_box {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::Domain(format!(
                    "decision box [{lo}, {hi}] is not compact"
                )));
            }
        }
        family.validate_theta(&theta_c)?;
        if let Some(ref xs) = x_star {
            if xs.len() != decision_box.len() {
                return Err(Error::Domain("x_star dimension mismatch".into()));
            }
        }
        let problem = Self {
            name: name.into(),
            family,
            decision_box,
            theta_c,
            x_star,
            kernel,
            h_analytic,
            grad_analytic,
        };
        problem.probe_finiteness()?;
        Ok(problem)
    }

    /// Spot-check H at box corners and center; a kernel that blows up on the
    /// box is a configuration error, not something to find mid-experiment.
    fn probe_finiteness(&self) -> Result<()> {
        let d = self.dim();
        let mut probes: Vec<Vec<f64>> = Vec::new();
        if d <= 6 {
            for mask in 0..(1u32 << d) {
                probes.push(
                    (0..d)
                        .map(|i| {
                            let (lo, hi) = self.decision_box[i];
                            if mask >> i & 1 == 1 {
                                hi
                            } else {
                                lo
                            }
                        })
                        .collect(),
                );
            }
        }
        probes.push(
            self.decision_box
                .iter()
                .map(|&(lo, hi)| 0.5 * (lo + hi))
                .collect(),
        );
        let mut stream = Stream::from_seed(0xBEEF);
        for x in &probes {
            let v = match &self.h_analytic {
                Some(h) => h(x, &self.theta_c),
                None => {
                    let us: Vec<f64> = (0..64).map(|_| stream.uniform_open()).collect();
                    self.h_mean_with_uniforms(x, &self.theta_c, &us)?
                }
            };
            if !v.is_finite() {
                return Err(Error::Domain(format!(
                    "H is not finite at x={x:?} under theta_c"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.decision_box.len()
    }

    pub fn has_analytic_h(&self) -> bool {
        self.h_analytic.is_some()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.decision_box.iter())
                .all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }

    fn require_inside(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "x={x:?} outside decision box {:?}",
                self.decision_box
            )))
        }
    }

    /// Raw cost kernel.
    pub fn cost(&self, x: &[f64], xi: f64) -> f64 {
        (self.kernel)(x, xi)
    }

    /// `H(x, θ)` exactly when known in closed form.
    pub fn h_closed_form(&self, x: &[f64], theta: &ParamPoint) -> Option<f64> {
        self.h_analytic.as_ref().map(|h| h(x, theta))
    }

    /// True objective `H(x, theta_c)`; requires a closed form.
    pub fn h_true(&self, x: &[f64]) -> Result<f64> {
        self.require_inside(x)?;
        self.h_closed_form(x, &self.theta_c)
            .ok_or_else(|| Error::Input(format!("problem {} has no analytic H", self.name)))
    }

    fn h_mean_with_uniforms(&self, x: &[f64], theta: &ParamPoint, us: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for &u in us {
            let xi = self.family.quantile(theta, u)?;
            acc += (self.kernel)(x, xi);
        }
        Ok(acc / us.len() as f64)
    }

    /// `H(x, θ)`: the analytic value when available, otherwise an inner Monte
    /// Carlo average over `inner_m` draws from `P_θ`.
    pub fn h_eval(
        &self,
        x: &[f64],
        theta: &ParamPoint,
        inner_m: usize,
        stream: &mut Stream,
    ) -> Result<f64> {
        self.require_inside(x)?;
        self.family.validate_theta(theta)?;
        if let Some(v) = self.h_closed_form(x, theta) {
            return Ok(v);
        }
        if inner_m == 0 {
            return Err(Error::Input("inner Monte Carlo needs inner_m >= 1".into()));
        }
        let us: Vec<f64> = (0..inner_m).map(|_| stream.uniform_open()).collect();
        self.h_mean_with_uniforms(x, theta, &us)
    }

    fn require_interior(&self, theta: &ParamPoint) -> Result<()> {
        self.family.validate_theta(theta)?;
        if !theta.is_interior() {
            return Err(Error::Singular(
                "theta on the boundary of its bounds".into(),
            ));
        }
        if let ObservationFamily::FiniteDiscrete { .. } = self.family {
            if theta.theta().iter().any(|&v| v <= 0.0 || v >= 1.0) {
                return Err(Error::Singular(
                    "theta on the boundary of the simplex".into(),
                ));
            }
        }
        Ok(())
    }

    /// Gradient of `H(x, ·)` at θ in the family's free coordinates.
    ///
    /// Uses the analytic gradient when present, else central finite
    /// differences through the analytic `H` with relative step `rel_step`.
    /// For the simplex the last component absorbs the probe so the point
    /// stays feasible.
    pub fn grad_h_theta(&self, x: &[f64], theta: &ParamPoint, rel_step: f64) -> Result<Vec<f64>> {
        self.require_inside(x)?;
        self.require_interior(theta)?;
        if let Some(g) = &self.grad_analytic {
            return Ok(self.to_free_coords(g(x, theta)));
        }
        let h = self.h_analytic.as_ref().ok_or_else(|| {
            Error::Input("no analytic gradient or analytic H to differentiate".into())
        })?;
        self.central_differences(theta, rel_step, |p| Ok(h(x, p)))
    }

    /// Gradient of the Monte Carlo `H(x, ·)` by central differences with
    /// common random numbers: one set of inner uniforms, shared by every
    /// probe point.
    pub fn grad_h_theta_mc(
        &self,
        x: &[f64],
        theta: &ParamPoint,
        rel_step: f64,
        inner_m: usize,
        stream: &mut Stream,
    ) -> Result<Vec<f64>> {
        self.require_inside(x)?;
        self.require_interior(theta)?;
        if inner_m == 0 {
            return Err(Error::Input("inner Monte Carlo needs inner_m >= 1".into()));
        }
        let us: Vec<f64> = (0..inner_m).map(|_| stream.uniform_open()).collect();
        self.central_differences(theta, rel_step, |p| self.h_mean_with_uniforms(x, p, &us))
    }

    fn to_free_coords(&self, grad_full: Vec<f64>) -> Vec<f64> {
        match self.family {
            ObservationFamily::FiniteDiscrete { .. } => {
                let last = *grad_full.last().expect("nonempty gradient");
                grad_full[..grad_full.len() - 1]
                    .iter()
                    .map(|g| g - last)
                    .collect()
            }
            _ => grad_full,
        }
    }

    fn central_differences(
        &self,
        theta: &ParamPoint,
        rel_step: f64,
        f: impl Fn(&ParamPoint) -> Result<f64>,
    ) -> Result<Vec<f64>> {
        let t = theta.theta();
        let k = self.family.free_dim();
        let simplex = matches!(self.family, ObservationFamily::FiniteDiscrete { .. });
        let mut out = Vec::with_capacity(k);
        for j in 0..k {
            let mut h = rel_step * t[j].abs().max(1.0);
            let (lo, hi) = theta.bounds()[j];
            if lo.is_finite() {
                h = h.min((t[j] - lo) / 2.0);
            }
            if hi.is_finite() {
                h = h.min((hi - t[j]) / 2.0);
            }
            if simplex {
                let last = t[t.len() - 1];
                h = h.min(last / 2.0).min(t[j] / 2.0);
            }
            if h <= 0.0 {
                return Err(Error::Singular(format!(
                    "no room to difference coordinate {j} at theta={t:?}"
                )));
            }
            let mut up = t.to_vec();
            let mut dn = t.to_vec();
            up[j] += h;
            dn[j] -= h;
            if simplex {
                let l = t.len();
                up[l - 1] -= h;
                dn[l - 1] += h;
            }
            let fu = f(&theta.with_theta(up)?)?;
            let fd = f(&theta.with_theta(dn)?)?;
            out.push((fu - fd) / (2.0 * h));
        }
        Ok(out)
    }
}

/// The posterior-risk objective on a frozen set of posterior draws.
///
/// Freezing the draws makes the objective a deterministic function of `x`
/// during one solve (sample-path optimization); quantile-based risk is
/// discontinuous under resampling, so convergence criteria would otherwise be
/// meaningless.
pub struct SamplePathObjective<'a> {
    problem: &'a Problem,
    spec: RiskSpec,
    thetas: Vec<ParamPoint>,
    inner_m: usize,
    inner_key: u64,
}

impl<'a> SamplePathObjective<'a> {
    pub fn new(
        problem: &'a Problem,
        spec: RiskSpec,
        thetas: Vec<ParamPoint>,
        inner_m: usize,
        inner_key: u64,
    ) -> Result<Self> {
        spec.validate()?;
        if thetas.is_empty() {
            return Err(Error::Input("need at least one posterior draw".into()));
        }
        if !problem.has_analytic_h() && inner_m == 0 {
            return Err(Error::Input("inner Monte Carlo needs inner_m >= 1".into()));
        }
        Ok(Self {
            problem,
            spec,
            thetas,
            inner_m,
            inner_key,
        })
    }

    pub fn spec(&self) -> RiskSpec {
        self.spec
    }

    pub fn draws(&self) -> &[ParamPoint] {
        &self.thetas
    }

    /// `H(x, θ_j)` for every frozen draw, with common random numbers across
    /// draws on the Monte Carlo path.
    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.problem.require_inside(x)?;
        if self.problem.has_analytic_h() {
            return Ok(self
                .thetas
                .iter()
                .map(|th| self.problem.h_closed_form(x, th).expect("analytic H"))
                .collect());
        }
        let mut inner = Stream::from_key(self.inner_key).child_u64(hash_x(x));
        let us: Vec<f64> = (0..self.inner_m).map(|_| inner.uniform_open()).collect();
        self.thetas
            .iter()
            .map(|th| self.problem.h_mean_with_uniforms(x, th, &us))
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        apply_risk(&self.spec, &self.values(x)?)
    }

    /// Closure-friendly form for optimizers; panics outside the decision box.
    pub fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.eval(x).expect("x inside the decision box")
    }
}

fn hash_x(x: &[f64]) -> u64 {
    let mut bytes = Vec::with_capacity(8 * x.len());
    for v in x {
        bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    fnv1a(&bytes)
}

/// Draw `outer_m` parameters from the posterior, evaluate `H(x, ·)` at each,
/// and apply the risk functional.
pub fn bro_objective(
    problem: &Problem,
    spec: &RiskSpec,
    post: &PosteriorState,
    x: &[f64],
    outer_m: usize,
    inner_m: usize,
    stream: &Stream,
) -> Result<f64> {
    if outer_m == 0 {
        return Err(Error::Input("bro_objective needs outer_m >= 1".into()));
    }
    let thetas = post.sample(outer_m, &mut stream.child("outer-theta"))?;
    let spo = SamplePathObjective::new(
        problem,
        *spec,
        thetas,
        inner_m,
        stream.child_key("inner-crn"),
    )?;
    spo.eval(x)
}

// ---------------------------------------------------------------------------
// Builtin problems
// ---------------------------------------------------------------------------

/// Newsvendor with exponential demand: `h(x, ξ) = c·x - p·min(x, ξ)`,
/// `ξ ~ Expo(θ)`. Then `H(x, θ) = c·x - p(1 - e^{-θx})/θ` and the true
/// optimum is `x* = ln(p/c)/θ`, unique by strict convexity.
pub fn newsvendor_exp(
    c: f64,
    p: f64,
    theta_c: f64,
    x_range: (f64, f64),
    theta_range: (f64, f64),
) -> Result<Problem> {
    if !(c > 0.0 && p > c) {
        return Err(Error::Domain(format!(
            "newsvendor needs 0 < c < p, got c={c}, p={p}"
        )));
    }
    if x_range.0 < 0.0 {
        return Err(Error::Domain(
            "newsvendor orders must be nonnegative".into(),
        ));
    }
    let theta_pt = ParamPoint::scalar(theta_c, theta_range.0, theta_range.1)?;
    let kernel: CostKernel = Arc::new(move |x: &[f64], xi: f64| c * x[0] - p * x[0].min(xi));
    let h: ThetaFn = Arc::new(move |x: &[f64], th: &ParamPoint| {
        let t = th.theta()[0];
        c * x[0] - p * (-(-t * x[0]).exp_m1()) / t
    });
    let g: ThetaGradFn = Arc::new(move |x: &[f64], th: &ParamPoint| {
        let t = th.theta()[0];
        let e = (-t * x[0]).exp();
        vec![p * (1.0 - e - t * x[0] * e) / (t * t)]
    });
    let unconstrained = (p / c).ln() / theta_c;
    let x_star = unconstrained.clamp(x_range.0, x_range.1);
    Problem::new(
        "newsvendor_exp",
        ObservationFamily::exponential_rate(),
        vec![x_range],
        theta_pt,
        kernel,
        Some(h),
        Some(g),
        Some(vec![x_star]),
    )
}

/// Linear cost under a normal mean: `h(x, ξ) = x·ξ`, `H(x, θ) = x·θ`.
/// The box-constrained minimizer is the corner selected by the sign of θ;
/// flat (no unique optimum) when `theta_c = 0`.
pub fn linear_normal(
    sigma2: f64,
    theta_c: f64,
    x_range: (f64, f64),
    theta_range: (f64, f64),
) -> Result<Problem> {
    let family = ObservationFamily::normal_known_var(sigma2)?;
    let theta_pt = ParamPoint::scalar(theta_c, theta_range.0, theta_range.1)?;
    let kernel: CostKernel = Arc::new(|x: &[f64], xi: f64| x[0] * xi);
    let h: ThetaFn = Arc::new(|x: &[f64], th: &ParamPoint| x[0] * th.theta()[0]);
    let g: ThetaGradFn = Arc::new(|x: &[f64], _th: &ParamPoint| vec![x[0]]);
    let x_star = if theta_c > 0.0 {
        Some(vec![x_range.0])
    } else if theta_c < 0.0 {
        Some(vec![x_range.1])
    } else {
        None
    };
    Problem::new(
        "linear_normal",
        family,
        vec![x_range],
        theta_pt,
        kernel,
        Some(h),
        Some(g),
        x_star,
    )
}

/// Portfolio over a finite outcome set: `h(x, j) = -⟨x, payoffs[j]⟩` for
/// category `j`, so `H(x, θ) = -Σ_j θ_j ⟨x, payoffs[j]⟩` (expected loss of
/// return). Linear in x; the optimum sits at a box corner.
pub fn discrete_portfolio(
    support: Vec<f64>,
    payoffs: Vec<Vec<f64>>,
    theta_c: Vec<f64>,
    weight_range: (f64, f64),
) -> Result<Problem> {
    let family = ObservationFamily::finite_discrete(support)?;
    let l = family.param_len();
    if payoffs.len() != l {
        return Err(Error::Domain(format!(
            "payoff table has {} rows, support has {l}",
            payoffs.len()
        )));
    }
    let d = payoffs[0].len();
    if d == 0 || payoffs.iter().any(|row| row.len() != d) {
        return Err(Error::Domain(
            "payoff rows must share a positive length".into(),
        ));
    }
    let theta_pt = ParamPoint::simplex(theta_c.clone())?;
    let rows = Arc::new(payoffs);
    let kernel_rows = Arc::clone(&rows);
    let kernel: CostKernel = Arc::new(move |x: &[f64], xi: f64| {
        let j = xi.round() as usize;
        -dot(x, &kernel_rows[j])
    });
    let h_rows = Arc::clone(&rows);
    let h: ThetaFn = Arc::new(move |x: &[f64], th: &ParamPoint| {
        -th.theta()
            .iter()
            .zip(h_rows.iter())
            .map(|(t, row)| t * dot(x, row))
            .sum::<f64>()
    });
    let g_rows = Arc::clone(&rows);
    let g: ThetaGradFn = Arc::new(move |x: &[f64], _th: &ParamPoint| {
        g_rows.iter().map(|row| -dot(x, row)).collect()
    });
    // H is linear in x: per-coordinate slope decides the corner.
    let slopes: Vec<f64> = (0..d)
        .map(|i| {
            -theta_c
                .iter()
                .zip(rows.iter())
                .map(|(t, row)| t * row[i])
                .sum::<f64>()
        })
        .collect();
    let x_star = if slopes.iter().all(|&s| s != 0.0) {
        Some(
            slopes
                .iter()
                .map(|&s| {
                    if s > 0.0 {
                        weight_range.0
                    } else {
                        weight_range.1
                    }
                })
                .collect(),
        )
    } else {
        None
    };
    Problem::new(
        "discrete_portfolio",
        family,
        vec![weight_range; d],
        theta_pt,
        kernel,
        Some(h),
        Some(g),
        x_star,
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
