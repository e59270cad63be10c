//! Experiment configuration: a flat TOML file with one section per concern.
//! Unknown keys are rejected everywhere — a silently ignored typo in a
//! replication study is worse than a hard error.

use serde::{Deserialize, Serialize};

use crate::bayes::{Prior, PriorKind};
use crate::error::{Error, Result};
use crate::model::ObservationFamily;
use crate::objective::{discrete_portfolio, linear_normal, newsvendor_exp, Problem};
use crate::optimize::{Method, OptimizerConfig};
use crate::risk::RiskSpec;
use crate::rng::fnv1a;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ScalarOrVec {
    Scalar(f64),
    Vec(Vec<f64>),
}

impl ScalarOrVec {
    fn as_point(&self) -> Vec<f64> {
        match self {
            ScalarOrVec::Scalar(v) => vec![*v],
            ScalarOrVec::Vec(v) => v.clone(),
        }
    }

    fn as_scalar(&self, field: &str) -> Result<f64> {
        match self {
            ScalarOrVec::Scalar(v) => Ok(*v),
            ScalarOrVec::Vec(_) => Err(Error::Config(format!("{field} must be a scalar here"))),
        }
    }

    fn as_vec(&self, field: &str) -> Result<Vec<f64>> {
        match self {
            ScalarOrVec::Vec(v) => Ok(v.clone()),
            ScalarOrVec::Scalar(_) => Err(Error::Config(format!("{field} must be a vector here"))),
        }
    }
}

/// `[problem.family]` table, validated per kind.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FamilySection {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<f64>>,
}

impl FamilySection {
    pub fn build(&self) -> Result<ObservationFamily> {
        let forbid = |cond: bool, what: &str| {
            if cond {
                Err(Error::Config(format!(
                    "family kind {:?} does not take {what}",
                    self.kind
                )))
            } else {
                Ok(())
            }
        };
        match self.kind.as_str() {
            "exponential_rate" => {
                forbid(self.sigma2.is_some(), "sigma2")?;
                forbid(self.shape.is_some(), "shape")?;
                forbid(self.support.is_some(), "support")?;
                Ok(ObservationFamily::exponential_rate())
            }
            "normal_known_var" => {
                forbid(self.shape.is_some(), "shape")?;
                forbid(self.support.is_some(), "support")?;
                let s2 = self
                    .sigma2
                    .ok_or_else(|| Error::Config("normal_known_var needs sigma2".into()))?;
                ObservationFamily::normal_known_var(s2)
            }
            "weibull_known_shape" => {
                forbid(self.sigma2.is_some(), "sigma2")?;
                forbid(self.support.is_some(), "support")?;
                let b = self
                    .shape
                    .ok_or_else(|| Error::Config("weibull_known_shape needs shape".into()))?;
                ObservationFamily::weibull_known_shape(b)
            }
            "finite_discrete" => {
                forbid(self.sigma2.is_some(), "sigma2")?;
                forbid(self.shape.is_some(), "shape")?;
                let sup = self
                    .support
                    .clone()
                    .ok_or_else(|| Error::Config("finite_discrete needs support".into()))?;
                ObservationFamily::finite_discrete(sup)
            }
            other => Err(Error::Config(format!("unknown family kind {other:?}"))),
        }
    }
}

/// `[prior]` section.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<ScalarOrVec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma0_sq: Option<f64>,
}

impl PriorSection {
    pub fn build_kind(&self) -> Result<PriorKind> {
        let need = |opt: Option<f64>, what: &str| {
            opt.ok_or_else(|| Error::Config(format!("prior kind {:?} needs {what}", self.kind)))
        };
        match self.kind.as_str() {
            "gamma" | "inv_gamma" => {
                let alpha0 = self
                    .alpha0
                    .as_ref()
                    .ok_or_else(|| {
                        Error::Config(format!("prior kind {:?} needs alpha0", self.kind))
                    })?
                    .as_scalar("alpha0")?;
                let beta0 = need(self.beta0, "beta0")?;
                if self.mu0.is_some() || self.sigma0_sq.is_some() {
                    return Err(Error::Config(format!(
                        "prior kind {:?} does not take mu0/sigma0_sq",
                        self.kind
                    )));
                }
                Ok(if self.kind == "gamma" {
                    PriorKind::Gamma { alpha0, beta0 }
                } else {
                    PriorKind::InvGamma { alpha0, beta0 }
                })
            }
            "normal" => {
                if self.alpha0.is_some() || self.beta0.is_some() {
                    return Err(Error::Config(
                        "prior kind \"normal\" does not take alpha0/beta0".into(),
                    ));
                }
                Ok(PriorKind::Normal {
                    mu0: need(self.mu0, "mu0")?,
                    sigma0_sq: need(self.sigma0_sq, "sigma0_sq")?,
                })
            }
            "dirichlet" => {
                if self.beta0.is_some() || self.mu0.is_some() || self.sigma0_sq.is_some() {
                    return Err(Error::Config(
                        "prior kind \"dirichlet\" takes only alpha0".into(),
                    ));
                }
                let alpha0 = self
                    .alpha0
                    .as_ref()
                    .ok_or_else(|| Error::Config("prior kind \"dirichlet\" needs alpha0".into()))?
                    .as_vec("alpha0")?;
                Ok(PriorKind::Dirichlet { alpha0 })
            }
            other => Err(Error::Config(format!("unknown prior kind {other:?}"))),
        }
    }
}

/// `[problem]` section: a builtin problem name plus its parameter overrides.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_c: Option<ScalarOrVec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payoffs: Option<Vec<Vec<f64>>>,
    pub x_min: f64,
    pub x_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_max: Option<f64>,
}

impl ProblemSection {
    pub fn build(&self) -> Result<Problem> {
        let theta_c = self
            .theta_c
            .as_ref()
            .ok_or_else(|| Error::Config(format!("problem {:?} needs theta_c", self.name)))?;
        match self.name.as_str() {
            "newsvendor_exp" => {
                if let Some(f) = &self.family {
                    if f.build()? != ObservationFamily::ExponentialRate {
                        return Err(Error::Config(
                            "newsvendor_exp demand is exponential_rate".into(),
                        ));
                    }
                }
                if self.payoffs.is_some() {
                    return Err(Error::Config("newsvendor_exp does not take payoffs".into()));
                }
                let c = self.c.ok_or_else(|| Error::Config("newsvendor_exp needs c".into()))?;
                let p = self.p.ok_or_else(|| Error::Config("newsvendor_exp needs p".into()))?;
                newsvendor_exp(
                    c,
                    p,
                    theta_c.as_scalar("theta_c")?,
                    (self.x_min, self.x_max),
                    (self.theta_min.unwrap_or(1e-3), self.theta_max.unwrap_or(1e3)),
                )
            }
            "linear_normal" => {
                if self.c.is_some() || self.p.is_some() || self.payoffs.is_some() {
                    return Err(Error::Config("linear_normal takes only theta_c and the family".into()));
                }
                let fam = self
                    .family
                    .as_ref()
                    .ok_or_else(|| Error::Config("linear_normal needs [problem.family] with sigma2".into()))?
                    .build()?;
                let sigma2 = match fam {
                    ObservationFamily::NormalKnownVar { sigma2 } => sigma2,
                    _ => {
                        return Err(Error::Config(
                            "linear_normal observations are normal_known_var".into(),
                        ))
                    }
                };
                linear_normal(
                    sigma2,
                    theta_c.as_scalar("theta_c")?,
                    (self.x_min, self.x_max),
                    (self.theta_min.unwrap_or(-1e6), self.theta_max.unwrap_or(1e6)),
                )
            }
            "discrete_portfolio" => {
                if self.c.is_some() || self.p.is_some() {
                    return Err(Error::Config("discrete_portfolio does not take c/p".into()));
                }
                let fam = self
                    .family
                    .as_ref()
                    .ok_or_else(|| {
                        Error::Config("discrete_portfolio needs [problem.family] with support".into())
                    })?
                    .build()?;
                let support = match fam {
                    ObservationFamily::FiniteDiscrete { support } => support,
                    _ => {
                        return Err(Error::Config(
                            "discrete_portfolio observations are finite_discrete".into(),
                        ))
                    }
                };
                let payoffs = self
                    .payoffs
                    .clone()
                    .ok_or_else(|| Error::Config("discrete_portfolio needs payoffs".into()))?;
                discrete_portfolio(
                    support,
                    payoffs,
                    theta_c.as_vec("theta_c")?,
                    (self.x_min, self.x_max),
                )
            }
            other => Err(Error::Config(format!(
                "unknown problem {other:?}; builtins: newsvendor_exp, linear_normal, discrete_portfolio"
            ))),
        }
    }
}

fn default_outer_m() -> usize {
    2000
}

fn default_inner_m() -> usize {
    2000
}

fn default_beta() -> f64 {
    0.05
}

fn default_output_dir() -> String {
    "out".into()
}

/// `[experiment]` section.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub specs: Vec<String>,
    pub n_list: Vec<u64>,
    pub replications: u32,
    #[serde(default = "default_outer_m")]
    pub outer_m: usize,
    #[serde(default = "default_inner_m")]
    pub inner_m: usize,
    #[serde(default)]
    pub x_list: Vec<ScalarOrVec>,
    /// Mandatory before a run; may arrive via `--seed` instead of the file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

/// `[optimizer]` section; `method` defaults by decision dimension.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    pub grid_points: usize,
    pub refine_rounds: usize,
    pub nm_budget: usize,
    pub tol_x: f64,
    pub tol_f: f64,
    pub record_trace: bool,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let base = OptimizerConfig::default();
        Self {
            method: None,
            grid_points: base.grid_points,
            refine_rounds: base.refine_rounds,
            nm_budget: base.nm_budget,
            tol_x: base.tol_x,
            tol_f: base.tol_f,
            record_trace: base.record_trace,
        }
    }
}

impl OptimizerSection {
    fn resolve(&self, dim: usize) -> OptimizerConfig {
        OptimizerConfig {
            method: self
                .method
                .unwrap_or(OptimizerConfig::default_for_dim(dim).method),
            grid_points: self.grid_points,
            refine_rounds: self.refine_rounds,
            nm_budget: self.nm_budget,
            tol_x: self.tol_x,
            tol_f: self.tol_f,
            record_trace: self.record_trace,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub prior: PriorSection,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
}

impl ExperimentConfig {
    /// Parse a TOML config; parse errors carry line/column diagnostics.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// Validate everything, apply the seed override, and build the runtime
    /// objects. The config hash covers the *effective* configuration
    /// (overrides included).
    pub fn resolve(mut self, seed_override: Option<u64>) -> Result<Resolved> {
        let seed = seed_override.or(self.experiment.seed).ok_or_else(|| {
            Error::Config("a seed is mandatory: set experiment.seed or pass --seed".into())
        })?;
        self.experiment.seed = Some(seed);

        if self.experiment.specs.is_empty() {
            return Err(Error::Config("experiment.specs must be nonempty".into()));
        }
        if self.experiment.n_list.is_empty() || self.experiment.n_list.contains(&0) {
            return Err(Error::Config("experiment.n_list must be positive".into()));
        }
        if self.experiment.replications == 0 {
            return Err(Error::Config(
                "experiment.replications must be positive".into(),
            ));
        }
        if self.experiment.outer_m == 0 {
            return Err(Error::Config("experiment.outer_m must be positive".into()));
        }
        if !(self.experiment.beta > 0.0 && self.experiment.beta < 1.0) {
            return Err(Error::Config(format!(
                "experiment.beta must be in (0,1), got {}",
                self.experiment.beta
            )));
        }

        let problem = self.problem.build().map_err(prefix("problem"))?;
        let prior = Prior::new(self.prior.build_kind()?, problem.family.clone())
            .map_err(prefix("prior"))?;
        let specs: Vec<RiskSpec> = self
            .experiment
            .specs
            .iter()
            .map(|s| s.parse::<RiskSpec>().map_err(prefix("experiment.specs")))
            .collect::<Result<_>>()?;
        let x_list: Vec<Vec<f64>> = self
            .experiment
            .x_list
            .iter()
            .map(|p| p.as_point())
            .collect();
        for x in &x_list {
            if !problem.contains(x) {
                return Err(Error::Config(format!(
                    "experiment.x_list entry {x:?} lies outside the decision box {:?}",
                    problem.decision_box
                )));
            }
        }
        let optimizer = self.optimizer.resolve(problem.dim());

        let canonical = serde_json::to_string(&self)
            .map_err(|e| Error::Config(format!("cannot canonicalize config: {e}")))?;
        let hash = format!("{:016x}", fnv1a(canonical.as_bytes()));

        Ok(Resolved {
            config: self,
            problem,
            prior,
            specs,
            x_list,
            optimizer,
            seed,
            hash,
        })
    }
}

fn prefix(section: &'static str) -> impl Fn(Error) -> Error {
    move |e| Error::Config(format!("[{section}] {e}"))
}

/// A validated configuration with its runtime objects.
#[derive(Debug)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub problem: Problem,
    pub prior: Prior,
    pub specs: Vec<RiskSpec>,
    pub x_list: Vec<Vec<f64>>,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub hash: String,
}
