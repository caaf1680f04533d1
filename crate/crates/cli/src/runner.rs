//! Subcommand dispatch: parse and validate the config, run the selected
//! operation, emit the report artifacts, and map outcomes to exit codes.
//!
//! Exit codes: 0 all assertions passed, 2 assertion or runtime failure,
//! 3 configuration error (the offending constraint is named on stderr).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::{ConfigError, ExperimentConfig, Validated};
use crate::generate::sample_pair;
use crate::hunt::hunt_op;
use crate::report::{write_report, ReportRow};
use crate::suite::{characteristics_op, norm_op, suite_preflight, testing_op, verify_op, SuiteOutcome};
use sparseform_core::dyadic::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Characteristics,
    Norm,
    Testing,
    Verify,
    Hunt,
    Gen,
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Characteristics => "characteristics",
            Op::Norm => "norm",
            Op::Testing => "testing",
            Op::Verify => "verify",
            Op::Hunt => "hunt",
            Op::Gen => "gen",
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub depth: Option<u32>,
}

/// Everything up to dispatch that can only fail on bad configuration.
fn prepare(op: Op, config_path: &Path, ov: &Overrides) -> Result<Validated, ConfigError> {
    let text = fs::read_to_string(config_path).map_err(|e| {
        ConfigError(format!("cannot read config {}: {e}", config_path.display()))
    })?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = ov.seed {
        config.seed = seed;
    }
    if let Some(depth) = ov.depth {
        config.depth = depth;
    }
    let vc = config.validate()?;
    match op {
        Op::Verify => {
            let kind = vc
                .config
                .suite
                .ok_or_else(|| ConfigError("verify requires a `suite` in the config".into()))?;
            suite_preflight(kind, &vc)?;
        }
        Op::Hunt => {
            if vc.config.conjecture.is_none() {
                return Err(ConfigError("hunt requires a `conjecture` in the config".into()));
            }
        }
        _ => {}
    }
    Ok(vc)
}

fn dispatch(op: Op, vc: &Validated, out_dir: &Path) -> Result<SuiteOutcome> {
    match op {
        Op::Characteristics => characteristics_op(vc),
        Op::Norm => norm_op(vc),
        Op::Testing => testing_op(vc),
        Op::Verify => verify_op(vc.config.suite.expect("preflight checked"), vc),
        Op::Hunt => {
            let (out, best) = hunt_op(vc)?;
            if let Some(b) = best {
                let wp = out_dir.join("hunt_best_w.txt");
                let sp = out_dir.join("hunt_best_sigma.txt");
                fs::create_dir_all(out_dir)
                    .with_context(|| format!("creating {}", out_dir.display()))?;
                fs::write(&wp, b.w.to_text()).with_context(|| format!("writing {}", wp.display()))?;
                fs::write(&sp, b.sigma.to_text())
                    .with_context(|| format!("writing {}", sp.display()))?;
                println!(
                    "hunt best ratio {} from start {} (weights in {}, {})",
                    b.ratio,
                    b.start,
                    wp.display(),
                    sp.display()
                );
            }
            Ok(out)
        }
        Op::Gen => gen_op(vc, out_dir),
    }
}

/// Materialize the ensemble: one weight pair per sample, written as
/// text files that `StepFn::from_text` round-trips.
fn gen_op(vc: &Validated, out_dir: &Path) -> Result<SuiteOutcome> {
    let grid = Grid::new(vc.config.depth)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut out = SuiteOutcome::new();
    for i in 0..vc.config.samples {
        let pair = sample_pair(&vc.config, grid, i)?;
        let wp = out_dir.join(format!("w_{i:03}.txt"));
        let sp = out_dir.join(format!("sigma_{i:03}.txt"));
        fs::write(&wp, pair.w.to_text()).with_context(|| format!("writing {}", wp.display()))?;
        fs::write(&sp, pair.sigma.to_text())
            .with_context(|| format!("writing {}", sp.display()))?;
        let mut row = ReportRow::new(i as u64, "gen", &pair.label, grid.depth(), 0);
        row.note = format!("{};{}", wp.display(), sp.display());
        out.rows.push(row);
    }
    Ok(out)
}

/// Run one subcommand end to end. Returns the process exit code.
pub fn run(op: Op, config_path: &Path, ov: &Overrides) -> i32 {
    let vc = match prepare(op, config_path, ov) {
        Ok(vc) => vc,
        Err(e) => {
            eprintln!("{e}");
            return 3;
        }
    };
    let out_dir = ov.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let outcome = match dispatch(op, &vc, &out_dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 2;
        }
    };
    if let Err(e) = write_report(&out_dir, op.name(), &vc.config, &outcome.rows) {
        eprintln!("error: {e:#}");
        return 2;
    }
    for f in &outcome.failures {
        println!("assertion failed: {f}");
    }
    let measured = outcome
        .measured_c
        .map(|c| format!(" measured_c={c}"))
        .unwrap_or_default();
    println!(
        "{op}: rows={} excluded={} failures={}{measured}",
        outcome.rows.len(),
        outcome.excluded,
        outcome.failures.len()
    );
    if outcome.failures.is_empty() {
        println!("PASS");
        0
    } else {
        println!("FAIL");
        2
    }
}
