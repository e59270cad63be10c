//! Derivative-free minimization over a compact box, plus the one-sided set
//! deviation `D(A, B) = sup_{a in A} dist(a, B)` for argmin-set comparisons.
//!
//! Two methods: an evaluate-shrink grid refinement (the default for one
//! decision variable) and bounded Nelder-Mead (for higher dimension). Both
//! expect a deterministic objective; callers optimizing a posterior-risk
//! objective freeze the posterior draws first (see
//! [`crate::objective::SamplePathObjective`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GridRefine,
    NelderMead,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub method: Method,
    /// Grid nodes per dimension.
    pub grid_points: usize,
    /// Shrink-and-refine passes after the initial grid sweep.
    pub refine_rounds: usize,
    /// Nelder-Mead evaluation budget.
    pub nm_budget: usize,
    pub tol_x: f64,
    pub tol_f: f64,
    pub record_trace: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::GridRefine,
            grid_points: 101,
            refine_rounds: 3,
            nm_budget: 500,
            tol_x: 1e-6,
            tol_f: 1e-9,
            record_trace: false,
        }
    }
}

impl OptimizerConfig {
    /// Grid refinement in one dimension, Nelder-Mead above.
    pub fn default_for_dim(d: usize) -> Self {
        Self {
            method: if d >= 2 {
                Method::NelderMead
            } else {
                Method::GridRefine
            },
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.grid_points < 3 {
            return Err(Error::Input("grid_points must be at least 3".into()));
        }
        if self.refine_rounds == 0 || self.nm_budget == 0 {
            return Err(Error::Input("optimizer budgets must be positive".into()));
        }
        if !self.tol_x.is_finite()
            || self.tol_x <= 0.0
            || !self.tol_f.is_finite()
            || self.tol_f <= 0.0
        {
            return Err(Error::Input("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    /// Budget exhausted before meeting a tolerance; best-so-far returned.
    NotConverged,
    /// Objective indistinguishable from constant on the first sweep.
    Flat,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub x_star: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub status: SolveStatus,
    pub trace: Option<Vec<TracePoint>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TracePoint {
    pub x: Vec<f64>,
    pub value: f64,
}

fn validate_box(decision_box: &[(f64, f64)]) -> Result<()> {
    if decision_box.is_empty() {
        return Err(Error::Input("decision box is empty".into()));
    }
    for &(lo, hi) in decision_box {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::Input(format!(
                "decision box [{lo}, {hi}] is not compact"
            )));
        }
    }
    Ok(())
}

/// Minimize a deterministic objective over the box.
pub fn minimize<F>(
    objective: F,
    decision_box: &[(f64, f64)],
    cfg: &OptimizerConfig,
) -> Result<SolveResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    validate_box(decision_box)?;
    cfg.validate()?;
    match cfg.method {
        Method::GridRefine => grid_refine(&objective, decision_box, cfg),
        Method::NelderMead => nelder_mead(&objective, decision_box, cfg),
    }
}

fn grid_nodes(decision_box: &[(f64, f64)], g: usize) -> Result<Vec<Vec<f64>>> {
    let d = decision_box.len();
    let total = g
        .checked_pow(d as u32)
        .filter(|&t| t <= 10_000_000)
        .ok_or_else(|| Error::Input(format!("grid of {g}^{d} points is too large")))?;
    let mut nodes = Vec::with_capacity(total);
    for flat in 0..total {
        let mut idx = flat;
        let mut x = Vec::with_capacity(d);
        for &(lo, hi) in decision_box {
            let i = idx % g;
            idx /= g;
            x.push(lo + (hi - lo) * i as f64 / (g - 1) as f64);
        }
        nodes.push(x);
    }
    Ok(nodes)
}

fn eval_nodes<F>(objective: &F, nodes: &[Vec<f64>]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    parallel::map_indexed(nodes.len(), |i| objective(&nodes[i]))
}

/// One full lattice sweep: nodes and their values, in grid order.
pub(crate) fn grid_scan<F>(
    objective: &F,
    decision_box: &[(f64, f64)],
    grid_points: usize,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    validate_box(decision_box)?;
    if grid_points < 3 {
        return Err(Error::Input("grid_points must be at least 3".into()));
    }
    let nodes = grid_nodes(decision_box, grid_points)?;
    let vals = eval_nodes(objective, &nodes);
    Ok((nodes, vals))
}

fn grid_refine<F>(
    objective: &F,
    decision_box: &[(f64, f64)],
    cfg: &OptimizerConfig,
) -> Result<SolveResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let g = cfg.grid_points;
    let mut cur = decision_box.to_vec();
    let mut evaluations = 0;
    let mut trace = cfg.record_trace.then(Vec::new);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut status = SolveStatus::NotConverged;

    for round in 0..=cfg.refine_rounds {
        let nodes = grid_nodes(&cur, g)?;
        let vals = eval_nodes(objective, &nodes);
        evaluations += nodes.len();
        let (mut bi, mut bv) = (0, vals[0]);
        let mut max_v = vals[0];
        for (i, &v) in vals.iter().enumerate() {
            if v < bv {
                bi = i;
                bv = v;
            }
            max_v = max_v.max(v);
        }
        if round == 0 && max_v - bv <= cfg.tol_f {
            return Ok(SolveResult {
                x_star: nodes[bi].clone(),
                value: bv,
                evaluations,
                status: SolveStatus::Flat,
                trace,
            });
        }
        let prev_best = best.as_ref().map(|(_, v)| *v);
        if best.as_ref().is_none_or(|(_, v)| bv < *v) {
            best = Some((nodes[bi].clone(), bv));
        }
        let (bx, bv) = best.clone().expect("set above");
        if let Some(t) = trace.as_mut() {
            t.push(TracePoint {
                x: bx.clone(),
                value: bv,
            });
        }
        let spacing = cur
            .iter()
            .map(|&(lo, hi)| (hi - lo) / (g - 1) as f64)
            .fold(0.0, f64::max);
        if spacing <= cfg.tol_x {
            status = SolveStatus::Converged;
            break;
        }
        if let Some(pv) = prev_best {
            if (pv - bv).abs() <= cfg.tol_f {
                status = SolveStatus::Converged;
                break;
            }
        }
        cur = shrink_around(&cur, &bx, 4.0, decision_box);
    }

    let (x_star, value) = best.expect("at least one sweep ran");
    Ok(SolveResult {
        x_star,
        value,
        evaluations,
        status,
        trace,
    })
}

fn shrink_around(
    cur: &[(f64, f64)],
    center: &[f64],
    factor: f64,
    orig: &[(f64, f64)],
) -> Vec<(f64, f64)> {
    cur.iter()
        .zip(center.iter())
        .zip(orig.iter())
        .map(|((&(lo, hi), &c), &(olo, ohi))| {
            let w = (hi - lo) / factor;
            let mut nlo = c - w / 2.0;
            let mut nhi = c + w / 2.0;
            if nlo < olo {
                nhi += olo - nlo;
                nlo = olo;
            }
            if nhi > ohi {
                nlo -= nhi - ohi;
                nhi = ohi;
                nlo = nlo.max(olo);
            }
            (nlo, nhi)
        })
        .collect()
}

fn clip(x: &mut [f64], decision_box: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(decision_box) {
        *v = v.clamp(lo, hi);
    }
}

fn nelder_mead<F>(
    objective: &F,
    decision_box: &[(f64, f64)],
    cfg: &OptimizerConfig,
) -> Result<SolveResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let d = decision_box.len();
    let center: Vec<f64> = decision_box
        .iter()
        .map(|&(lo, hi)| 0.5 * (lo + hi))
        .collect();
    let mut simplex: Vec<Vec<f64>> = vec![center.clone()];
    for k in 0..d {
        let mut v = center.clone();
        let (lo, hi) = decision_box[k];
        v[k] += 0.25 * (hi - lo);
        clip(&mut v, decision_box);
        simplex.push(v);
    }
    let mut evaluations = 0;
    let mut fvals: Vec<f64> = simplex
        .iter()
        .map(|v| {
            evaluations += 1;
            objective(v)
        })
        .collect();
    let mut trace = cfg.record_trace.then(Vec::new);

    let spread0 = fvals.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - fvals.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if spread0 == 0.0 {
        return Ok(SolveResult {
            x_star: simplex[0].clone(),
            value: fvals[0],
            evaluations,
            status: SolveStatus::Flat,
            trace,
        });
    }

    let mut status = SolveStatus::NotConverged;
    while evaluations < cfg.nm_budget {
        // order vertices best..worst
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| fvals[a].total_cmp(&fvals[b]));
        let reordered: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let refvals: Vec<f64> = order.iter().map(|&i| fvals[i]).collect();
        simplex = reordered;
        fvals = refvals;

        if let Some(t) = trace.as_mut() {
            t.push(TracePoint {
                x: simplex[0].clone(),
                value: fvals[0],
            });
        }

        let spread = fvals[d] - fvals[0];
        let diam = (0..d)
            .map(|k| {
                simplex
                    .iter()
                    .map(|v| v[k])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                        (lo.min(x), hi.max(x))
                    })
            })
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max);
        if spread <= cfg.tol_f || diam <= cfg.tol_x {
            status = SolveStatus::Converged;
            break;
        }

        let centroid: Vec<f64> = (0..d)
            .map(|k| simplex[..d].iter().map(|v| v[k]).sum::<f64>() / d as f64)
            .collect();
        let worst = simplex[d].clone();
        let mut xr: Vec<f64> = centroid
            .iter()
            .zip(worst.iter())
            .map(|(c, w)| c + ALPHA * (c - w))
            .collect();
        clip(&mut xr, decision_box);
        let fr = objective(&xr);
        evaluations += 1;

        if fr < fvals[0] {
            let mut xe: Vec<f64> = centroid
                .iter()
                .zip(xr.iter())
                .map(|(c, r)| c + GAMMA * (r - c))
                .collect();
            clip(&mut xe, decision_box);
            let fe = objective(&xe);
            evaluations += 1;
            if fe < fr {
                simplex[d] = xe;
                fvals[d] = fe;
            } else {
                simplex[d] = xr;
                fvals[d] = fr;
            }
        } else if fr < fvals[d - 1] {
            simplex[d] = xr;
            fvals[d] = fr;
        } else {
            // contraction: outside if the reflection helped, inside otherwise
            let (mut xc, toward): (Vec<f64>, f64) = if fr < fvals[d] {
                (
                    centroid
                        .iter()
                        .zip(xr.iter())
                        .map(|(c, r)| c + RHO * (r - c))
                        .collect(),
                    fr,
                )
            } else {
                (
                    centroid
                        .iter()
                        .zip(worst.iter())
                        .map(|(c, w)| c + RHO * (w - c))
                        .collect(),
                    fvals[d],
                )
            };
            clip(&mut xc, decision_box);
            let fc = objective(&xc);
            evaluations += 1;
            if fc < toward {
                simplex[d] = xc;
                fvals[d] = fc;
            } else {
                // shrink everything toward the best vertex
                for i in 1..=d {
                    let best = simplex[0].clone();
                    for k in 0..dimension_of(&simplex) {
                        simplex[i][k] = best[k] + SIGMA * (simplex[i][k] - best[k]);
                    }
                    clip(&mut simplex[i], decision_box);
                    fvals[i] = objective(&simplex[i]);
                    evaluations += 1;
                }
            }
        }
    }

    let mut bi = 0;
    for i in 1..fvals.len() {
        if fvals[i] < fvals[bi] {
            bi = i;
        }
    }
    Ok(SolveResult {
        x_star: simplex[bi].clone(),
        value: fvals[bi],
        evaluations,
        status,
        trace,
    })
}

fn dimension_of(simplex: &[Vec<f64>]) -> usize {
    simplex[0].len()
}

/// All grid nodes whose value is within `tol_f` of the grid minimum: a finite
/// proxy for the argmin set. Ties are kept as a set, never collapsed to one
/// representative.
pub fn argmin_set<F>(
    objective: F,
    decision_box: &[(f64, f64)],
    grid_points: usize,
    tol_f: f64,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let (nodes, vals) = grid_scan(&objective, decision_box, grid_points)?;
    let min = vals.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    Ok(nodes
        .into_iter()
        .zip(vals)
        .filter(|(_, v)| *v <= min + tol_f)
        .map(|(x, _)| x)
        .collect())
}

/// One-sided deviation `sup_{a in A} min_{b in B} ||a - b||₂`.
pub fn solution_deviation(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input(
            "solution_deviation needs nonempty sets".into(),
        ));
    }
    let mut out: f64 = 0.0;
    for pa in a {
        let mut nearest = f64::INFINITY;
        for pb in b {
            if pa.len() != pb.len() {
                return Err(Error::Input("points must share a dimension".into()));
            }
            let d2: f64 = pa
                .iter()
                .zip(pb.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            nearest = nearest.min(d2.sqrt());
        }
        out = out.max(nearest);
    }
    Ok(out)
}
