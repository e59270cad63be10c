//! The wide CSV row emitted by every subcommand. One row per measurement,
//! stable schema, every row stamped with the seed and config hash. Fields a
//! subcommand does not produce stay empty.

use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub const CSV_HEADER: &str = "config_hash,seed,subcommand,spec,n,rep,x,objective,true_h,\
scaled_error,ci_lo,ci_hi,covered,x_star,min_value,deviation";

#[derive(Debug, Clone, Default)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub subcommand: &'static str,
    pub spec: String,
    pub n: Option<u64>,
    pub rep: Option<u32>,
    pub x: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub true_h: Option<f64>,
    pub scaled_error: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub covered: Option<bool>,
    pub x_star: Option<Vec<f64>>,
    pub min_value: Option<f64>,
    pub deviation: Option<f64>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Nine significant digits, the contract for interval endpoints.
fn fmt_ci(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.8e}")).unwrap_or_default()
}

fn fmt_point(v: &Option<Vec<f64>>) -> String {
    v.as_ref()
        .map(|xs| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(";")
        })
        .unwrap_or_default()
}

impl RunRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.config_hash,
            self.seed,
            self.subcommand,
            self.spec,
            self.n.map(|n| n.to_string()).unwrap_or_default(),
            self.rep.map(|r| r.to_string()).unwrap_or_default(),
            fmt_point(&self.x),
            fmt_opt(self.objective),
            fmt_opt(self.true_h),
            fmt_opt(self.scaled_error),
            fmt_ci(self.ci_lo),
            fmt_ci(self.ci_hi),
            self.covered
                .map(|c| u8::from(c).to_string())
                .unwrap_or_default(),
            fmt_point(&self.x_star),
            fmt_opt(self.min_value),
            fmt_opt(self.deviation),
        )
    }
}

pub fn write_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}
