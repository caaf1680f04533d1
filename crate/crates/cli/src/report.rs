//! Report rows and the two emitters: CSV with a fixed column order and a
//! schema-versioned JSON envelope. Floats print in Rust's shortest
//! round-trip form in both formats, so identical runs produce identical
//! bytes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const SCHEMA: &str = "sparseform-report/1";

/// One sample's computed constants. Fields not produced by an operation stay
/// `None` (empty CSV cell, JSON null). The convention for ratio fields:
/// `ratio = n_lower / rhs` when both are present, except the
/// characterization rows where `ratio = (testing_forward + testing_dual) /
/// lambda`; either way the ratio reproduces from operands in the same row.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReportRow {
    pub sample: u64,
    pub op: String,
    pub generator: String,
    pub depth: u32,
    pub family_len: u64,
    pub converged: bool,
    /// Set by the hunts on ratios above the report threshold.
    pub flagged: bool,
    pub lambda: Option<f64>,
    pub lambda_dual: Option<f64>,
    pub n_lower: Option<f64>,
    pub gap: Option<f64>,
    pub sawyer_forward: Option<f64>,
    pub sawyer_dual: Option<f64>,
    pub testing_forward: Option<f64>,
    pub testing_dual: Option<f64>,
    /// `1/s`; zero encodes the single-cube (infinite-exponent) regime.
    pub inv_s: Option<f64>,
    pub chain_constant: Option<f64>,
    pub joint_ar: Option<f64>,
    pub ainf_u: Option<f64>,
    pub ainf_v: Option<f64>,
    pub ainf_exp_u: Option<f64>,
    pub ainf_exp_v: Option<f64>,
    pub bound_left: Option<f64>,
    pub bound_right: Option<f64>,
    pub rhs: Option<f64>,
    pub ratio: Option<f64>,
    pub note: String,
}

impl ReportRow {
    pub fn new(sample: u64, op: &str, generator: &str, depth: u32, family_len: usize) -> Self {
        ReportRow {
            sample,
            op: op.to_string(),
            generator: generator.to_string(),
            depth,
            family_len: family_len as u64,
            converged: true,
            flagged: false,
            lambda: None,
            lambda_dual: None,
            n_lower: None,
            gap: None,
            sawyer_forward: None,
            sawyer_dual: None,
            testing_forward: None,
            testing_dual: None,
            inv_s: None,
            chain_constant: None,
            joint_ar: None,
            ainf_u: None,
            ainf_v: None,
            ainf_exp_u: None,
            ainf_exp_v: None,
            bound_left: None,
            bound_right: None,
            rhs: None,
            ratio: None,
            note: String::new(),
        }
    }
}

pub const CSV_HEADER: &str = "sample,op,generator,depth,family_len,converged,flagged,\
lambda,lambda_dual,n_lower,gap,sawyer_forward,sawyer_dual,testing_forward,testing_dual,\
inv_s,chain_constant,joint_ar,ainf_u,ainf_v,ainf_exp_u,ainf_exp_v,bound_left,bound_right,\
rhs,ratio,note";

fn cell(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v}"),
        None => String::new(),
    }
}

/// Quote per RFC 4180 only when needed, so plain rows stay byte-stable.
fn text_cell(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_string(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let fields = [
            r.sample.to_string(),
            text_cell(&r.op),
            text_cell(&r.generator),
            r.depth.to_string(),
            r.family_len.to_string(),
            r.converged.to_string(),
            r.flagged.to_string(),
            cell(r.lambda),
            cell(r.lambda_dual),
            cell(r.n_lower),
            cell(r.gap),
            cell(r.sawyer_forward),
            cell(r.sawyer_dual),
            cell(r.testing_forward),
            cell(r.testing_dual),
            cell(r.inv_s),
            cell(r.chain_constant),
            cell(r.joint_ar),
            cell(r.ainf_u),
            cell(r.ainf_v),
            cell(r.ainf_exp_u),
            cell(r.ainf_exp_v),
            cell(r.bound_left),
            cell(r.bound_right),
            cell(r.rhs),
            cell(r.ratio),
            text_cell(&r.note),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct Envelope {
    schema: String,
    config: ExperimentConfig,
    rows: Vec<ReportRow>,
}

pub fn json_string(config: &ExperimentConfig, rows: &[ReportRow]) -> Result<String> {
    let env =
        Envelope { schema: SCHEMA.to_string(), config: config.clone(), rows: rows.to_vec() };
    let mut s = serde_json::to_string_pretty(&env).context("serializing report")?;
    s.push('\n');
    Ok(s)
}

pub fn parse_json(text: &str) -> Result<(ExperimentConfig, Vec<ReportRow>)> {
    let env: Envelope = serde_json::from_str(text).context("parsing report")?;
    if env.schema != SCHEMA {
        bail!("unsupported report schema `{}` (expected `{SCHEMA}`)", env.schema);
    }
    Ok((env.config, env.rows))
}

fn check_finite(rows: &[ReportRow]) -> Result<()> {
    for r in rows {
        let named = [
            ("lambda", r.lambda),
            ("lambda_dual", r.lambda_dual),
            ("n_lower", r.n_lower),
            ("gap", r.gap),
            ("sawyer_forward", r.sawyer_forward),
            ("sawyer_dual", r.sawyer_dual),
            ("testing_forward", r.testing_forward),
            ("testing_dual", r.testing_dual),
            ("inv_s", r.inv_s),
            ("chain_constant", r.chain_constant),
            ("joint_ar", r.joint_ar),
            ("ainf_u", r.ainf_u),
            ("ainf_v", r.ainf_v),
            ("ainf_exp_u", r.ainf_exp_u),
            ("ainf_exp_v", r.ainf_exp_v),
            ("bound_left", r.bound_left),
            ("bound_right", r.bound_right),
            ("rhs", r.rhs),
            ("ratio", r.ratio),
        ];
        for (name, v) in named {
            if let Some(x) = v {
                if !x.is_finite() {
                    bail!("sample {} field {name} is not finite ({x})", r.sample);
                }
            }
        }
    }
    Ok(())
}

/// Write `<stem>.csv` and `<stem>.json` under `dir`; errors carry the path.
pub fn write_report(
    dir: &Path,
    stem: &str,
    config: &ExperimentConfig,
    rows: &[ReportRow],
) -> Result<(PathBuf, PathBuf)> {
    check_finite(rows)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    fs::write(&csv_path, csv_string(rows))
        .with_context(|| format!("writing {}", csv_path.display()))?;
    let json_path = dir.join(format!("{stem}.json"));
    fs::write(&json_path, json_string(config, rows)?)
        .with_context(|| format!("writing {}", json_path.display()))?;
    Ok((csv_path, json_path))
}
