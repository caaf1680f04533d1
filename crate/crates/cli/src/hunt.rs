//! Randomized hill-climbing search for weight pairs with a large ratio of
//! the measured norm lower bound to a conjectured right-hand side.
//!
//! The search never claims a counterexample: the norm value is itself a
//! lower bound produced by a budgeted optimizer, so a large ratio is a
//! candidate for closer inspection, nothing more. Ratios above the
//! configured threshold are flagged in the report.

use anyhow::Result;
use rand::Rng;
use rand_distr::StandardNormal;
use sparseform_core::characteristics::{
    bump_constant, fujii_wilson_local, BumpVariant, Side as CSide,
};
use sparseform_core::dyadic::{average, Grid, StepFn};
use sparseform_core::extremal::{best_constant_n, OptimOptions};
use sparseform_core::forms::{inv, LambdaRule, WeightSetting};
use sparseform_core::sparse::SparseFamily;
use sparseform_core::young::YoungFn;

use crate::config::{ConjectureKind, Validated};
use crate::generate::{sample_family, sample_pair, sample_rng};
use crate::report::ReportRow;
use crate::suite::SuiteOutcome;

/// Best configuration found across all starts, kept for reproduction
/// artifacts (the weight vectors round-trip through text files).
#[derive(Debug)]
pub struct BestPoint {
    pub w: StepFn,
    pub sigma: StepFn,
    pub ratio: f64,
    pub start: usize,
}

fn conjecture_rhs(
    kind: ConjectureKind,
    setting: &WeightSetting,
    youngs: &(YoungFn, YoungFn),
) -> Result<f64> {
    let cfg = &setting.cfg;
    let both = |variant: BumpVariant| -> Result<f64> {
        Ok(bump_constant(&setting.u, &setting.v, cfg, &youngs.0, &variant, CSide::Left)?
            + bump_constant(&setting.u, &setting.v, cfg, &youngs.1, &variant, CSide::Right)?)
    };
    match kind {
        ConjectureKind::C51 => both(BumpVariant::Direct),
        ConjectureKind::SeparatedBump => both(BumpVariant::Dual),
        ConjectureKind::OneSup => {
            // sup_Q <w>^{1/p} <sigma>^{1/p'} (FW(w,Q)^{1/p'} + FW(sigma,Q)^{1/p})
            let p = cfg.p;
            let pp = cfg.p_prime;
            let w = &setting.w;
            let sg = &setting.sigma;
            let mut best = 0.0f64;
            for q in w.grid().cubes() {
                let base = average(w, q)?.powf(inv(p)) * average(sg, q)?.powf(inv(pp));
                let ainf = fujii_wilson_local(w, q)?.powf(inv(pp))
                    + fujii_wilson_local(sg, q)?.powf(inv(p));
                best = best.max(base * ainf);
            }
            Ok(best)
        }
    }
}

struct Objective<'a> {
    kind: ConjectureKind,
    vc: &'a Validated,
    family: &'a SparseFamily,
    youngs: (YoungFn, YoungFn),
    opts: OptimOptions,
}

impl Objective<'_> {
    /// Returns `(ratio, n, rhs)`; `None` when the optimizer failed to
    /// converge (the candidate is skipped, never accepted).
    fn eval(&self, w: &StepFn, sigma: &StepFn) -> Result<Option<(f64, f64, f64)>> {
        let setting =
            WeightSetting::new(w.clone(), sigma.clone(), self.vc.cfg, LambdaRule::Lebesgue)?;
        let n = best_constant_n(&setting, self.family, &self.opts)?;
        if !n.converged {
            return Ok(None);
        }
        let rhs = conjecture_rhs(self.kind, &setting, &self.youngs)?;
        if !(rhs > 0.0) || !rhs.is_finite() {
            return Ok(None);
        }
        Ok(Some((n.value / rhs, n.value, rhs)))
    }
}

pub fn hunt_op(vc: &Validated) -> Result<(SuiteOutcome, Option<BestPoint>)> {
    let kind = vc
        .config
        .conjecture
        .ok_or_else(|| anyhow::anyhow!("hunt requires a conjecture in the config"))?;
    let grid = Grid::new(vc.config.depth)?;
    let hunt = &vc.config.hunt;
    let youngs = vc
        .config
        .young
        .build_pair(&vc.cfg)
        .map_err(sparseform_core::error::Error::Domain)?;

    let mut out = SuiteOutcome::new();
    let mut best_point: Option<BestPoint> = None;
    let op = format!("hunt/{}", kind.name());

    for start in 0..hunt.starts {
        let pair = sample_pair(&vc.config, grid, start)?;
        let family = sample_family(&vc.config, grid, start)?;
        let mut rng = sample_rng(vc.config.seed, start as u64, 5);
        let objective = Objective {
            kind,
            vc,
            family: &family,
            youngs: youngs.clone(),
            opts: OptimOptions {
                tol: 1e-7,
                restarts: 2,
                iter_cap: 400,
                seed: rng.gen(),
            },
        };

        let mut w = pair.w;
        let mut sigma = pair.sigma;
        let mut best = match objective.eval(&w, &sigma)? {
            Some(v) => v,
            None => {
                let mut row =
                    ReportRow::new(start as u64, &op, &pair.label, grid.depth(), family.len());
                row.converged = false;
                row.note = "excluded: objective unavailable at start".into();
                out.rows.push(row);
                out.excluded += 1;
                continue;
            }
        };
        let mut accepted = 0usize;

        for _ in 0..hunt.steps {
            let leaves = w.values().len();
            let on_w: bool = rng.gen();
            let idx = rng.gen_range(0..leaves);
            let z: f64 = rng.sample(StandardNormal);
            let scale = (hunt.step_size * z).exp();
            let (mut cw, mut cs) = (w.clone(), sigma.clone());
            let target = if on_w { &mut cw } else { &mut cs };
            let vals = target.values_mut();
            vals[idx] *= scale;
            if let Some(cand) = objective.eval(&cw, &cs)? {
                if cand.0 > best.0 {
                    best = cand;
                    w = cw;
                    sigma = cs;
                    accepted += 1;
                }
            }
        }

        let mut row = ReportRow::new(start as u64, &op, &pair.label, grid.depth(), family.len());
        row.n_lower = Some(best.1);
        row.rhs = Some(best.2);
        row.ratio = Some(best.0);
        row.flagged = best.0 > hunt.threshold;
        row.note = format!("accepted {accepted} of {} steps", hunt.steps);
        out.record_ratio(best.0);
        if best_point.as_ref().map_or(true, |b| best.0 > b.ratio) {
            best_point = Some(BestPoint { w: w.clone(), sigma: sigma.clone(), ratio: best.0, start });
        }
        out.rows.push(row);
    }
    Ok((out, best_point))
}
