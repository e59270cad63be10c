//! Experiment runners behind the CLI subcommands.
//!
//! Replications are independent tasks fanned out over the worker pool. Each
//! task derives every random stream it needs from
//! `(seed, "experiment", n, replication)` plus a stage tag, so results do not
//! depend on scheduling; rows are then assembled in deterministic
//! `(n, replication)` order. Outputs are byte-identical across reruns and
//! across worker counts.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::asymptotics::{self, NormalityReport};
use crate::bayes::PosteriorRecord;
use crate::error::{Error, Result};
use crate::objective::SamplePathObjective;
use crate::optimize::{self, SolveResult};
use crate::parallel;
use crate::risk::{apply_risk, RiskSpec};
use crate::rng::Stream;

use super::config::Resolved;
use super::records::{write_csv, RunRecord};

/// Paths produced by one run.
#[derive(Debug)]
pub struct RunOutput {
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
    /// Reports or trace files, when the subcommand produces them.
    pub extra_paths: Vec<PathBuf>,
}

fn out_dir(resolved: &Resolved, out_override: Option<&Path>) -> Result<PathBuf> {
    let dir = out_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&resolved.config.experiment.output_dir));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_summary<T: Serialize>(dir: &Path, summary: &T) -> Result<PathBuf> {
    let path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::Config(format!("cannot serialize summary: {e}")))?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

fn experiment_stream(seed: u64, n: u64, rep: u32) -> Stream {
    Stream::from_seed(seed)
        .child("experiment")
        .child_u64(n)
        .child_u64(u64::from(rep))
}

fn base_record(resolved: &Resolved, subcommand: &'static str) -> RunRecord {
    RunRecord {
        config_hash: resolved.hash.clone(),
        seed: resolved.seed,
        subcommand,
        ..RunRecord::default()
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

fn require_analytic(resolved: &Resolved) -> Result<()> {
    if resolved.problem.has_analytic_h() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "problem {} has no analytic H; replication studies need the exact H(x, theta_c)",
            resolved.problem.name
        )))
    }
}

// ---------------------------------------------------------------------------
// shared replication engine
// ---------------------------------------------------------------------------

struct SpecSolve {
    best_x: Vec<f64>,
    min_value: f64,
    deviation: f64,
}

struct RepOutcome {
    n: u64,
    rep: u32,
    /// objective\[x_idx\]\[spec_idx\]
    objective: Vec<Vec<f64>>,
    /// one entry per spec when argmin solves were requested
    solves: Option<Vec<SpecSolve>>,
}

fn rep_pairs(resolved: &Resolved) -> Vec<(u64, u32)> {
    let exp = &resolved.config.experiment;
    exp.n_list
        .iter()
        .flat_map(|&n| (0..exp.replications).map(move |r| (n, r)))
        .collect()
}

fn run_one(
    resolved: &Resolved,
    n: u64,
    rep: u32,
    true_argmin: Option<&[Vec<f64>]>,
) -> Result<RepOutcome> {
    let exp = &resolved.config.experiment;
    let pb = &resolved.problem;
    let s = experiment_stream(resolved.seed, n, rep);
    let data = pb
        .family
        .sample(&pb.theta_c, n as usize, &mut s.child("data"))?;
    let post = resolved.prior.update(&data)?;
    let thetas = post.sample(exp.outer_m, &mut s.child("posterior-draws"))?;
    let inner_key = s.child_key("inner-crn");

    // H values at each x are shared by every spec: common random numbers
    // isolate the risk functionals' disagreement from sampling noise.
    let probe =
        SamplePathObjective::new(pb, RiskSpec::Mean, thetas.clone(), exp.inner_m, inner_key)?;
    let mut objective = Vec::with_capacity(resolved.x_list.len());
    for x in &resolved.x_list {
        let values = probe.values(x)?;
        let per_spec: Vec<f64> = resolved
            .specs
            .iter()
            .map(|spec| apply_risk(spec, &values))
            .collect::<Result<_>>()?;
        objective.push(per_spec);
    }

    let solves = match true_argmin {
        None => None,
        Some(target) => {
            let mut out = Vec::with_capacity(resolved.specs.len());
            for spec in &resolved.specs {
                let spo =
                    SamplePathObjective::new(pb, *spec, thetas.clone(), exp.inner_m, inner_key)?;
                let (nodes, vals) = optimize::grid_scan(
                    &|x: &[f64]| spo.eval_unchecked(x),
                    &pb.decision_box,
                    resolved.optimizer.grid_points,
                )?;
                let mut bi = 0;
                let mut bv = vals[0];
                for (i, &v) in vals.iter().enumerate() {
                    if v < bv {
                        bi = i;
                        bv = v;
                    }
                }
                let set: Vec<Vec<f64>> = nodes
                    .iter()
                    .zip(vals.iter())
                    .filter(|(_, &v)| v <= bv + resolved.optimizer.tol_f)
                    .map(|(x, _)| x.clone())
                    .collect();
                let deviation = optimize::solution_deviation(&set, target)?;
                out.push(SpecSolve {
                    best_x: nodes[bi].clone(),
                    min_value: bv,
                    deviation,
                });
            }
            Some(out)
        }
    };

    Ok(RepOutcome {
        n,
        rep,
        objective,
        solves,
    })
}

fn replicate(
    resolved: &Resolved,
    workers: Option<usize>,
    with_solves: bool,
) -> Result<Vec<RepOutcome>> {
    let true_argmin = if with_solves {
        Some(true_argmin_set(resolved)?)
    } else {
        None
    };
    let pairs = rep_pairs(resolved);
    let outcomes: Vec<Result<RepOutcome>> = parallel::with_workers(workers, || {
        parallel::map_indexed(pairs.len(), |i| {
            let (n, rep) = pairs[i];
            run_one(resolved, n, rep, true_argmin.as_deref())
        })
    });
    outcomes.into_iter().collect()
}

fn true_argmin_set(resolved: &Resolved) -> Result<Vec<Vec<f64>>> {
    if let Some(xs) = &resolved.problem.x_star {
        return Ok(vec![xs.clone()]);
    }
    require_analytic(resolved)?;
    let pb = &resolved.problem;
    optimize::argmin_set(
        |x: &[f64]| pb.h_closed_form(x, &pb.theta_c).expect("analytic H"),
        &pb.decision_box,
        resolved.optimizer.grid_points,
        resolved.optimizer.tol_f,
    )
}

// ---------------------------------------------------------------------------
// consistency
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct ConsistencyEntry {
    spec: String,
    n: u64,
    median_abs_error: f64,
    median_deviation: f64,
    median_abs_value_error: f64,
}

#[derive(Debug, Serialize)]
struct ConsistencySummary {
    subcommand: &'static str,
    config_hash: String,
    seed: u64,
    entries: Vec<ConsistencyEntry>,
}

/// Pointwise objective errors plus argmin-set deviations per replication.
pub fn cmd_consistency(
    resolved: &Resolved,
    workers: Option<usize>,
    out_override: Option<&Path>,
) -> Result<RunOutput> {
    require_analytic(resolved)?;
    if resolved.x_list.is_empty() {
        return Err(Error::Config(
            "consistency needs a nonempty experiment.x_list".into(),
        ));
    }
    let dir = out_dir(resolved, out_override)?;
    let outcomes = replicate(resolved, workers, true)?;

    let target = true_argmin_set(resolved)?;
    let v_star = target
        .iter()
        .map(|x| resolved.problem.h_true(x))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);

    let mut records = Vec::new();
    for o in &outcomes {
        let sqrt_n = (o.n as f64).sqrt();
        for (si, spec) in resolved.specs.iter().enumerate() {
            for (xi, x) in resolved.x_list.iter().enumerate() {
                let obj = o.objective[xi][si];
                let true_h = resolved.problem.h_true(x)?;
                records.push(RunRecord {
                    spec: spec.to_string(),
                    n: Some(o.n),
                    rep: Some(o.rep),
                    x: Some(x.clone()),
                    objective: Some(obj),
                    true_h: Some(true_h),
                    scaled_error: Some(sqrt_n * (obj - true_h)),
                    ..base_record(resolved, "consistency")
                });
            }
            let sv = &o.solves.as_ref().expect("solves requested")[si];
            records.push(RunRecord {
                spec: spec.to_string(),
                n: Some(o.n),
                rep: Some(o.rep),
                true_h: Some(v_star),
                scaled_error: Some(sqrt_n * (sv.min_value - v_star)),
                x_star: Some(sv.best_x.clone()),
                min_value: Some(sv.min_value),
                deviation: Some(sv.deviation),
                ..base_record(resolved, "consistency")
            });
        }
    }

    let mut entries = Vec::new();
    for (si, spec) in resolved.specs.iter().enumerate() {
        for &n in &resolved.config.experiment.n_list {
            let mut abs_errors = Vec::new();
            let mut deviations = Vec::new();
            let mut value_errors = Vec::new();
            for o in outcomes.iter().filter(|o| o.n == n) {
                for (xi, x) in resolved.x_list.iter().enumerate() {
                    let true_h = resolved.problem.h_true(x)?;
                    abs_errors.push((o.objective[xi][si] - true_h).abs());
                }
                let sv = &o.solves.as_ref().expect("solves requested")[si];
                deviations.push(sv.deviation);
                value_errors.push((sv.min_value - v_star).abs());
            }
            entries.push(ConsistencyEntry {
                spec: spec.to_string(),
                n,
                median_abs_error: median(abs_errors),
                median_deviation: median(deviations),
                median_abs_value_error: median(value_errors),
            });
        }
    }

    let csv_path = dir.join(format!("consistency_{}.csv", resolved.hash));
    write_csv(&csv_path, &records)?;
    let summary_path = write_summary(
        &dir,
        &ConsistencySummary {
            subcommand: "consistency",
            config_hash: resolved.hash.clone(),
            seed: resolved.seed,
            entries,
        },
    )?;
    Ok(RunOutput {
        csv_path,
        summary_path,
        extra_paths: vec![],
    })
}

// ---------------------------------------------------------------------------
// normality
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct ReportEntry {
    spec: String,
    x: Vec<f64>,
    n: u64,
    report: NormalityReport,
}

#[derive(Debug, Serialize)]
struct NormalitySummary {
    subcommand: &'static str,
    config_hash: String,
    seed: u64,
    reports: Vec<ReportEntry>,
}

fn write_reports_csv(path: &Path, rows: &[ReportEntry]) -> Result<()> {
    let mut text = format!("spec,x,n,{}\n", NormalityReport::csv_header());
    for e in rows {
        let x =
            e.x.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(";");
        text.push_str(&format!(
            "{},{},{},{}\n",
            e.spec,
            x,
            e.n,
            e.report.csv_row()
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// √n-scaled pointwise errors against their predicted normal limits.
pub fn cmd_normality(
    resolved: &Resolved,
    workers: Option<usize>,
    out_override: Option<&Path>,
) -> Result<RunOutput> {
    require_analytic(resolved)?;
    if resolved.x_list.is_empty() {
        return Err(Error::Config(
            "normality needs a nonempty experiment.x_list".into(),
        ));
    }
    if resolved.config.experiment.replications < 100 {
        return Err(Error::Config("normality needs replications >= 100".into()));
    }
    let dir = out_dir(resolved, out_override)?;
    let outcomes = replicate(resolved, workers, false)?;

    let mut records = Vec::new();
    for o in &outcomes {
        let sqrt_n = (o.n as f64).sqrt();
        for (si, spec) in resolved.specs.iter().enumerate() {
            for (xi, x) in resolved.x_list.iter().enumerate() {
                let obj = o.objective[xi][si];
                let true_h = resolved.problem.h_true(x)?;
                records.push(RunRecord {
                    spec: spec.to_string(),
                    n: Some(o.n),
                    rep: Some(o.rep),
                    x: Some(x.clone()),
                    objective: Some(obj),
                    true_h: Some(true_h),
                    scaled_error: Some(sqrt_n * (obj - true_h)),
                    ..base_record(resolved, "normality")
                });
            }
        }
    }

    let mut reports = Vec::new();
    for (si, spec) in resolved.specs.iter().enumerate() {
        for (xi, x) in resolved.x_list.iter().enumerate() {
            let params = asymptotics::sigma_x(&resolved.problem, x, &resolved.problem.theta_c)?;
            let true_h = resolved.problem.h_true(x)?;
            for &n in &resolved.config.experiment.n_list {
                let errors: Vec<f64> = outcomes
                    .iter()
                    .filter(|o| o.n == n)
                    .map(|o| (o.n as f64).sqrt() * (o.objective[xi][si] - true_h))
                    .collect();
                let report = asymptotics::normality_diagnostic(
                    &errors,
                    asymptotics::limit_mean(spec, params.sigma_x)?,
                    params.sigma_x,
                )?;
                reports.push(ReportEntry {
                    spec: spec.to_string(),
                    x: x.clone(),
                    n,
                    report,
                });
            }
        }
    }

    let csv_path = dir.join(format!("normality_{}.csv", resolved.hash));
    write_csv(&csv_path, &records)?;
    let reports_path = dir.join(format!("normality_{}_reports.csv", resolved.hash));
    write_reports_csv(&reports_path, &reports)?;
    let summary_path = write_summary(
        &dir,
        &NormalitySummary {
            subcommand: "normality",
            config_hash: resolved.hash.clone(),
            seed: resolved.seed,
            reports,
        },
    )?;
    Ok(RunOutput {
        csv_path,
        summary_path,
        extra_paths: vec![reports_path],
    })
}

// ---------------------------------------------------------------------------
// coverage
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct CoverageEntry {
    spec: String,
    x: Vec<f64>,
    n: u64,
    replications: u32,
    coverage: f64,
}

#[derive(Debug, Serialize)]
struct CoverageSummary {
    subcommand: &'static str,
    config_hash: String,
    seed: u64,
    beta: f64,
    entries: Vec<CoverageEntry>,
}

/// Per-replication confidence intervals for `H(x, θ^c)` and their empirical
/// coverage.
pub fn cmd_coverage(
    resolved: &Resolved,
    workers: Option<usize>,
    out_override: Option<&Path>,
) -> Result<RunOutput> {
    require_analytic(resolved)?;
    if resolved.x_list.is_empty() {
        return Err(Error::Config(
            "coverage needs a nonempty experiment.x_list".into(),
        ));
    }
    let beta = resolved.config.experiment.beta;
    let dir = out_dir(resolved, out_override)?;
    let outcomes = replicate(resolved, workers, false)?;

    let sigmas: Vec<f64> = resolved
        .x_list
        .iter()
        .map(|x| Ok(asymptotics::sigma_x(&resolved.problem, x, &resolved.problem.theta_c)?.sigma_x))
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    let mut hits: Vec<Vec<Vec<u32>>> =
        vec![
            vec![vec![0; resolved.config.experiment.n_list.len()]; resolved.x_list.len()];
            resolved.specs.len()
        ];
    for o in &outcomes {
        let n_idx = resolved
            .config
            .experiment
            .n_list
            .iter()
            .position(|&n| n == o.n)
            .expect("n from n_list");
        for (si, spec) in resolved.specs.iter().enumerate() {
            for (xi, x) in resolved.x_list.iter().enumerate() {
                let obj = o.objective[xi][si];
                let true_h = resolved.problem.h_true(x)?;
                let (lo, hi) = asymptotics::confidence_interval(spec, obj, sigmas[xi], o.n, beta)?;
                let covered = lo <= true_h && true_h <= hi;
                if covered {
                    hits[si][xi][n_idx] += 1;
                }
                records.push(RunRecord {
                    spec: spec.to_string(),
                    n: Some(o.n),
                    rep: Some(o.rep),
                    x: Some(x.clone()),
                    objective: Some(obj),
                    true_h: Some(true_h),
                    scaled_error: Some((o.n as f64).sqrt() * (obj - true_h)),
                    ci_lo: Some(lo),
                    ci_hi: Some(hi),
                    covered: Some(covered),
                    ..base_record(resolved, "coverage")
                });
            }
        }
    }

    let reps = resolved.config.experiment.replications;
    let mut entries = Vec::new();
    for (si, spec) in resolved.specs.iter().enumerate() {
        for (xi, x) in resolved.x_list.iter().enumerate() {
            for (ni, &n) in resolved.config.experiment.n_list.iter().enumerate() {
                entries.push(CoverageEntry {
                    spec: spec.to_string(),
                    x: x.clone(),
                    n,
                    replications: reps,
                    coverage: f64::from(hits[si][xi][ni]) / f64::from(reps),
                });
            }
        }
    }

    let csv_path = dir.join(format!("coverage_{}.csv", resolved.hash));
    write_csv(&csv_path, &records)?;
    let summary_path = write_summary(
        &dir,
        &CoverageSummary {
            subcommand: "coverage",
            config_hash: resolved.hash.clone(),
            seed: resolved.seed,
            beta,
            entries,
        },
    )?;
    Ok(RunOutput {
        csv_path,
        summary_path,
        extra_paths: vec![],
    })
}

// ---------------------------------------------------------------------------
// optimal value
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct OptimalValueSummary {
    subcommand: &'static str,
    config_hash: String,
    seed: u64,
    x_star: Vec<f64>,
    v_star: f64,
    reports: Vec<ReportEntry>,
}

/// √n-scaled optimal-value errors against the limit law at the unique true
/// minimizer. Refuses problems whose true argmin set is not a singleton: the
/// limit is then a minimum of correlated normals, which this study does not
/// model.
pub fn cmd_optimal_value(
    resolved: &Resolved,
    workers: Option<usize>,
    out_override: Option<&Path>,
) -> Result<RunOutput> {
    require_analytic(resolved)?;
    if resolved.config.experiment.replications < 30 {
        return Err(Error::Config(
            "optimal-value needs replications >= 30".into(),
        ));
    }
    let pb = &resolved.problem;
    let grid_set = optimize::argmin_set(
        |x: &[f64]| pb.h_closed_form(x, &pb.theta_c).expect("analytic H"),
        &pb.decision_box,
        resolved.optimizer.grid_points,
        resolved.optimizer.tol_f,
    )?;
    if grid_set.len() != 1 {
        return Err(Error::Config(format!(
            "problem {} has a non-singleton true argmin set ({} grid minimizers); \
             the optimal-value study needs a unique minimizer",
            pb.name,
            grid_set.len()
        )));
    }
    let x_star = pb.x_star.clone().unwrap_or_else(|| grid_set[0].clone());
    let v_star = pb.h_true(&x_star)?;
    let sigma_star = asymptotics::sigma_x(pb, &x_star, &pb.theta_c)?.sigma_x;

    let dir = out_dir(resolved, out_override)?;
    let exp = &resolved.config.experiment;
    let pairs = rep_pairs(resolved);
    let solved: Vec<Result<(u64, u32, Vec<SolveResult>)>> = parallel::with_workers(workers, || {
        parallel::map_indexed(pairs.len(), |i| {
            let (n, rep) = pairs[i];
            let s = experiment_stream(resolved.seed, n, rep);
            let data = pb
                .family
                .sample(&pb.theta_c, n as usize, &mut s.child("data"))?;
            let post = resolved.prior.update(&data)?;
            let thetas = post.sample(exp.outer_m, &mut s.child("posterior-draws"))?;
            let inner_key = s.child_key("inner-crn");
            let mut per_spec = Vec::with_capacity(resolved.specs.len());
            for spec in &resolved.specs {
                let spo =
                    SamplePathObjective::new(pb, *spec, thetas.clone(), exp.inner_m, inner_key)?;
                per_spec.push(optimize::minimize(
                    |x: &[f64]| spo.eval_unchecked(x),
                    &pb.decision_box,
                    &resolved.optimizer,
                )?);
            }
            Ok((n, rep, per_spec))
        })
    });
    let solved: Vec<(u64, u32, Vec<SolveResult>)> = solved.into_iter().collect::<Result<_>>()?;

    let mut records = Vec::new();
    for (n, rep, per_spec) in &solved {
        let sqrt_n = (*n as f64).sqrt();
        for (si, spec) in resolved.specs.iter().enumerate() {
            let r = &per_spec[si];
            records.push(RunRecord {
                spec: spec.to_string(),
                n: Some(*n),
                rep: Some(*rep),
                true_h: Some(v_star),
                scaled_error: Some(sqrt_n * (r.value - v_star)),
                x_star: Some(r.x_star.clone()),
                min_value: Some(r.value),
                ..base_record(resolved, "optimal_value")
            });
        }
    }

    let mut reports = Vec::new();
    for (si, spec) in resolved.specs.iter().enumerate() {
        for &n in &exp.n_list {
            let errors: Vec<f64> = solved
                .iter()
                .filter(|(m, _, _)| *m == n)
                .map(|(m, _, per_spec)| (*m as f64).sqrt() * (per_spec[si].value - v_star))
                .collect();
            let report = asymptotics::normality_diagnostic(
                &errors,
                asymptotics::limit_mean(spec, sigma_star)?,
                sigma_star,
            )?;
            reports.push(ReportEntry {
                spec: spec.to_string(),
                x: x_star.clone(),
                n,
                report,
            });
        }
    }

    let csv_path = dir.join(format!("optimal_value_{}.csv", resolved.hash));
    write_csv(&csv_path, &records)?;
    let reports_path = dir.join(format!("optimal_value_{}_reports.csv", resolved.hash));
    write_reports_csv(&reports_path, &reports)?;
    let summary_path = write_summary(
        &dir,
        &OptimalValueSummary {
            subcommand: "optimal_value",
            config_hash: resolved.hash.clone(),
            seed: resolved.seed,
            x_star,
            v_star,
            reports,
        },
    )?;
    Ok(RunOutput {
        csv_path,
        summary_path,
        extra_paths: vec![reports_path],
    })
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct SolveSummary {
    subcommand: &'static str,
    config_hash: String,
    seed: u64,
    spec: String,
    n: u64,
    posterior: PosteriorRecord,
    result: SolveResult,
}

/// One end-to-end solve: data from θ^c, conjugate update, frozen posterior
/// draws, minimize. Uses the first entry of n_list and the first spec.
pub fn cmd_solve(
    resolved: &Resolved,
    workers: Option<usize>,
    out_override: Option<&Path>,
) -> Result<RunOutput> {
    let dir = out_dir(resolved, out_override)?;
    let exp = &resolved.config.experiment;
    let pb = &resolved.problem;
    let n = exp.n_list[0];
    let spec = resolved.specs[0];

    let s = experiment_stream(resolved.seed, n, 0);
    let data = pb
        .family
        .sample(&pb.theta_c, n as usize, &mut s.child("data"))?;
    let post = resolved.prior.update(&data)?;
    let thetas = post.sample(exp.outer_m, &mut s.child("posterior-draws"))?;
    let spo = SamplePathObjective::new(pb, spec, thetas, exp.inner_m, s.child_key("inner-crn"))?;
    let result = parallel::with_workers(workers, || {
        optimize::minimize(
            |x: &[f64]| spo.eval_unchecked(x),
            &pb.decision_box,
            &resolved.optimizer,
        )
    })?;

    let true_h = pb
        .x_star
        .as_ref()
        .and_then(|xs| pb.h_closed_form(xs, &pb.theta_c));
    let mut records = vec![RunRecord {
        spec: spec.to_string(),
        n: Some(n),
        rep: Some(0),
        x_star: Some(result.x_star.clone()),
        min_value: Some(result.value),
        true_h,
        scaled_error: true_h.map(|v| (n as f64).sqrt() * (result.value - v)),
        ..base_record(resolved, "solve")
    }];
    records[0].objective = Some(result.value);

    let mut extra_paths = Vec::new();
    if let Some(trace) = &result.trace {
        let trace_path = dir.join(format!("solve_{}_trace.csv", resolved.hash));
        let mut text = String::from("x,value\n");
        for t in trace {
            let x =
                t.x.iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(";");
            text.push_str(&format!("{x},{}\n", t.value));
        }
        std::fs::write(&trace_path, text)?;
        extra_paths.push(trace_path);
    }

    let csv_path = dir.join(format!("solve_{}.csv", resolved.hash));
    write_csv(&csv_path, &records)?;
    let summary_path = write_summary(
        &dir,
        &SolveSummary {
            subcommand: "solve",
            config_hash: resolved.hash.clone(),
            seed: resolved.seed,
            spec: spec.to_string(),
            n,
            posterior: post.record(),
            result,
        },
    )?;
    Ok(RunOutput {
        csv_path,
        summary_path,
        extra_paths,
    })
}

// ---------------------------------------------------------------------------
// risk-eval
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct RiskEvalEntry {
    spec: String,
    value: f64,
}

#[derive(Debug, Serialize)]
struct RiskEvalSummary {
    subcommand: &'static str,
    config_hash: String,
    seed: u64,
    samples: usize,
    entries: Vec<RiskEvalEntry>,
}

/// Apply every configured risk spec to a whitespace-separated sample file.
pub fn cmd_risk_eval(
    resolved: &Resolved,
    samples_path: &Path,
    out_override: Option<&Path>,
) -> Result<RunOutput> {
    let text = std::fs::read_to_string(samples_path)?;
    let samples: Vec<f64> = text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::Input(format!("cannot parse sample {tok:?}")))
        })
        .collect::<Result<_>>()?;
    if samples.is_empty() {
        return Err(Error::Input(format!(
            "sample file {} holds no values",
            samples_path.display()
        )));
    }

    let dir = out_dir(resolved, out_override)?;
    let mut records = Vec::new();
    let mut entries = Vec::new();
    for spec in &resolved.specs {
        let value = apply_risk(spec, &samples)?;
        records.push(RunRecord {
            spec: spec.to_string(),
            objective: Some(value),
            ..base_record(resolved, "risk_eval")
        });
        entries.push(RiskEvalEntry {
            spec: spec.to_string(),
            value,
        });
    }

    let csv_path = dir.join(format!("risk_eval_{}.csv", resolved.hash));
    write_csv(&csv_path, &records)?;
    let summary_path = write_summary(
        &dir,
        &RiskEvalSummary {
            subcommand: "risk_eval",
            config_hash: resolved.hash.clone(),
            seed: resolved.seed,
            samples: samples.len(),
            entries,
        },
    )?;
    Ok(RunOutput {
        csv_path,
        summary_path,
        extra_paths: vec![],
    })
}
