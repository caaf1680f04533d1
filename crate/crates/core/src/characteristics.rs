//! Weight characteristics: both A-infinity flavors, joint and localized
//! A_r quantities, entropy-bumped constants, and the Orlicz bump constants.
//!
//! Every supremum ranges over all dyadic cubes of the grid, not just the
//! members of some sparse family.

use crate::dyadic::{same_grid, Cube, CubeSums, Grid, StepFn};
use crate::error::{Error, Result};
use crate::forms::{conjugate, inv, ExponentConfig};
use crate::gauge::EntropyGauge;
use crate::par;
use crate::young::{dual_young, luxembourg, YoungFn};

fn require_positive(name: &'static str, f: &StepFn) -> Result<()> {
    if !f.is_strictly_positive() {
        return Err(Error::DegenerateWeight(format!("{name} must be strictly positive")));
    }
    Ok(())
}

fn all_cubes(grid: Grid) -> Vec<Cube> {
    grid.cubes().collect()
}

fn try_sup(cubes: &[Cube], f: impl Fn(Cube) -> Result<f64> + Sync + Send) -> Result<f64> {
    let vals = par::map_collect(cubes, |&q| f(q));
    let mut best = f64::NEG_INFINITY;
    for v in vals {
        best = best.max(v?);
    }
    Ok(best)
}

/// Integral over `cube` of the maximal function of averages taken within
/// `cube`; the running max along the descent makes this O(leaves).
fn maximal_integral(sums: &CubeSums, grid: Grid, cube: Cube, running: f64) -> f64 {
    let m = running.max(sums.average(cube));
    if cube.level() == grid.depth() {
        m * grid.leaf_measure()
    } else {
        let [a, b] = cube.children();
        maximal_integral(sums, grid, a, m) + maximal_integral(sums, grid, b, m)
    }
}

/// `(1/v(Q)) int_Q M(v 1_Q)`; always at least 1.
pub fn fujii_wilson_local(v: &StepFn, q: Cube) -> Result<f64> {
    let grid = v.grid();
    if !grid.contains(q) {
        return Err(Error::CubeOutsideGrid { level: q.level(), index: q.index(), depth: grid.depth() });
    }
    let slice = &v.values()[q.leaf_range(grid)];
    if slice.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::DegenerateWeight("weight must be strictly positive on the cube".into()));
    }
    let sums = CubeSums::new(v);
    let mass = sums.integral(q);
    if mass <= 0.0 {
        return Err(Error::DegenerateWeight("weight has zero mass on the cube".into()));
    }
    Ok(maximal_integral(&sums, grid, q, 0.0) / mass)
}

/// Max of the localized constant over all cubes.
pub fn fujii_wilson_global(v: &StepFn) -> Result<f64> {
    require_positive("v", v)?;
    let grid = v.grid();
    let sums = CubeSums::new(v);
    let cubes = all_cubes(grid);
    Ok(par::map_max(&cubes, |&q| {
        maximal_integral(&sums, grid, q, 0.0) / sums.integral(q)
    }))
}

/// `<v>_Q exp(-<log v>_Q)`; at least 1 by Jensen.
pub fn ainf_exp_local(v: &StepFn, q: Cube) -> Result<f64> {
    let grid = v.grid();
    if !grid.contains(q) {
        return Err(Error::CubeOutsideGrid { level: q.level(), index: q.index(), depth: grid.depth() });
    }
    let slice = &v.values()[q.leaf_range(grid)];
    if slice.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Domain("log average needs a strictly positive weight".into()));
    }
    let sums = CubeSums::new(v);
    let logs = CubeSums::new(&v.map(f64::ln));
    Ok(sums.average(q) * (-logs.average(q)).exp())
}

pub fn ainf_exp_global(v: &StepFn) -> Result<f64> {
    require_positive("v", v)?;
    let sums = CubeSums::new(v);
    let logs = CubeSums::new(&v.map(f64::ln));
    let cubes = all_cubes(v.grid());
    Ok(par::map_max(&cubes, |&q| sums.average(q) * (-logs.average(q)).exp()))
}

/// `sup_Q <v>_Q <u>_Q^{r-1}`, the joint two-weight constant.
pub fn joint_ar(v: &StepFn, u: &StepFn, r: f64) -> Result<f64> {
    if !(r > 1.0) || !r.is_finite() {
        return Err(Error::parameter("r", format!("need r > 1, got {r}")));
    }
    same_grid(v, u)?;
    require_positive("v", v)?;
    require_positive("u", u)?;
    let vs = CubeSums::new(v);
    let us = CubeSums::new(u);
    let cubes = all_cubes(v.grid());
    Ok(par::map_max(&cubes, |&q| vs.average(q) * us.average(q).powf(r - 1.0)))
}

/// `A_r(v,u,Q) = <v>_Q^{1/p - 1/q0} <u>_Q^{(1/p - 1/q0)(r-1)}`.
pub fn ar_local(v: &StepFn, u: &StepFn, q: Cube, cfg: &ExponentConfig) -> Result<f64> {
    same_grid(v, u)?;
    let x = cfg.x_exponent();
    let av = crate::dyadic::average(v, q)?;
    let au = crate::dyadic::average(u, q)?;
    Ok(av.powf(x) * au.powf(x * (cfg.r - 1.0)))
}

/// The same quantity through the dual exponents:
/// `<u>_Q^{1/p' - 1/p0'} <v>_Q^{(1/p' - 1/p0')(r'-1)}`. Agrees with
/// `ar_local` because (1/p - 1/q0)(r-1) = 1/p0 - 1/p = 1/p' - 1/p0'.
pub fn ar_local_dual(u: &StepFn, v: &StepFn, q: Cube, cfg: &ExponentConfig) -> Result<f64> {
    same_grid(v, u)?;
    let y = inv(cfg.p_prime) - inv(cfg.p0_prime);
    let au = crate::dyadic::average(u, q)?;
    let av = crate::dyadic::average(v, q)?;
    Ok(au.powf(y) * av.powf(y * (cfg.r_prime - 1.0)))
}

/// Which localized A-infinity enters an entropy product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AinfFlavor {
    /// `(1/v(Q)) int_Q M(v 1_Q)`.
    FujiiWilson,
    /// `<v>_Q exp(-<log v>_Q)`.
    Exponential,
}

/// Which of the two paired constants: Left gauges the `v` side at power
/// `1/p'`, Right gauges the `u` side at power `1/p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// `sup_Q A_r(v,u,Q) Ainf(v,Q)^{1/p'} phi(Ainf(v,Q))` (Left), or the dual
/// product with `A_{r'}(u,v,Q)`, `Ainf(u,Q)^{1/p}` (Right).
pub fn entropy_constant(
    v: &StepFn,
    u: &StepFn,
    cfg: &ExponentConfig,
    gauge: &EntropyGauge,
    flavor: AinfFlavor,
    side: Side,
) -> Result<f64> {
    same_grid(v, u)?;
    require_positive("v", v)?;
    require_positive("u", u)?;
    let grid = v.grid();
    let vs = CubeSums::new(v);
    let us = CubeSums::new(u);
    let main = match side {
        Side::Left => v,
        Side::Right => u,
    };
    let logs = match flavor {
        AinfFlavor::Exponential => Some(CubeSums::new(&main.map(f64::ln))),
        AinfFlavor::FujiiWilson => None,
    };
    let x = cfg.x_exponent();
    let y = inv(cfg.p_prime) - inv(cfg.p0_prime);
    let ainf_pow = match side {
        Side::Left => inv(cfg.p_prime),
        Side::Right => inv(cfg.p),
    };
    let main_sums = match side {
        Side::Left => &vs,
        Side::Right => &us,
    };
    let cubes = all_cubes(grid);
    try_sup(&cubes, |q| {
        let base = match side {
            Side::Left => vs.average(q).powf(x) * us.average(q).powf(x * (cfg.r - 1.0)),
            Side::Right => us.average(q).powf(y) * vs.average(q).powf(y * (cfg.r_prime - 1.0)),
        };
        let ainf = match &logs {
            Some(l) => main_sums.average(q) * (-l.average(q)).exp(),
            None => maximal_integral(main_sums, grid, q, 0.0) / main_sums.integral(q),
        };
        let g = gauge.eval(ainf);
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::parameter("gauge", format!("phi({ainf}) = {g}")));
        }
        Ok(base * ainf.powf(ainf_pow) * g)
    })
}

/// How the Orlicz factor enters a bump constant.
#[derive(Debug, Clone)]
pub enum BumpVariant {
    /// `<u>_Q^{1/p} / <u^{1/p}>_{A,Q}`.
    Direct,
    /// `<u^{1/p'}>_{dual A,Q} / <u>_Q^{1/p'}`.
    Dual,
    /// Direct factor times a gauge of itself.
    Gauged(EntropyGauge),
    /// Direct factors on both weights in one supremum; the supplied function
    /// bumps `u` at `1/p` and this one bumps `v` at `1/p'` on either side.
    Joint(YoungFn),
}

/// The bump constants. On the Left the supplied Young function bumps `u` at
/// exponent `1/p`; on the Right it bumps `v` at `1/p'` with all exponents
/// conjugated, per the paired definitions. `Joint` keeps both factors and
/// both sides agree, the base products being equal.
pub fn bump_constant(
    u: &StepFn,
    v: &StepFn,
    cfg: &ExponentConfig,
    a_fn: &YoungFn,
    variant: &BumpVariant,
    side: Side,
) -> Result<f64> {
    same_grid(v, u)?;
    require_positive("v", v)?;
    require_positive("u", u)?;
    let grid = u.grid();
    let vs = CubeSums::new(v);
    let us = CubeSums::new(u);
    let x = cfg.x_exponent();
    let y = inv(cfg.p_prime) - inv(cfg.p0_prime);

    // main = the bumped weight, at exponent 1/pe (Joint bumps both and
    // ignores this choice)
    let (main, main_sums, pe) = match side {
        Side::Left => (u, &us, cfg.p),
        Side::Right => (v, &vs, cfg.p_prime),
    };
    let pe_conj = conjugate(pe);
    let main_frac = main.powf(inv(pe));
    let dual_fn = match variant {
        BumpVariant::Dual => Some(dual_young(a_fn)?),
        _ => None,
    };
    let main_conj_frac = match variant {
        BumpVariant::Dual => Some(main.powf(inv(pe_conj))),
        _ => None,
    };
    let joint_parts = match variant {
        BumpVariant::Joint(b_fn) => {
            Some((u.powf(inv(cfg.p)), v.powf(inv(cfg.p_prime)), b_fn.clone()))
        }
        _ => None,
    };

    let cubes = all_cubes(grid);
    try_sup(&cubes, |q| {
        let base = match side {
            Side::Left => vs.average(q).powf(x) * us.average(q).powf(x * (cfg.r - 1.0)),
            Side::Right => us.average(q).powf(y) * vs.average(q).powf(y * (cfg.r_prime - 1.0)),
        };
        let direct = || -> Result<f64> {
            Ok(main_sums.average(q).powf(inv(pe)) / luxembourg(&main_frac, a_fn, q)?)
        };
        let factor = match variant {
            BumpVariant::Direct => direct()?,
            BumpVariant::Dual => {
                let d = dual_fn.as_ref().unwrap();
                let f = main_conj_frac.as_ref().unwrap();
                luxembourg(f, d, q)? / main_sums.average(q).powf(inv(pe_conj))
            }
            BumpVariant::Gauged(g) => {
                let f = direct()?;
                let gv = g.eval(f);
                if !(gv > 0.0) || !gv.is_finite() {
                    return Err(Error::parameter("gauge", format!("psi({f}) = {gv}")));
                }
                f * gv
            }
            BumpVariant::Joint(_) => {
                let (u_frac, v_frac, b_fn) = joint_parts.as_ref().unwrap();
                (us.average(q).powf(inv(cfg.p)) / luxembourg(u_frac, a_fn, q)?)
                    * (vs.average(q).powf(inv(cfg.p_prime)) / luxembourg(v_frac, b_fn, q)?)
            }
        };
        Ok(base * factor)
    })
}

/// The three per-cube quantities whose ordering underpins the bump
/// comparisons: the direct factor, its Jensen bound, and the dual factor.
#[derive(Debug, Clone, Copy)]
pub struct BumpFactors {
    pub direct: f64,
    pub exp_bound: f64,
    pub dual: f64,
}

/// For Power-family `A` these satisfy `direct <= min(exp_bound, dual)`
/// exactly: Jensen gives the first bound, Hoelder with conjugate powers the
/// second.
pub fn bump_factor_chain(u: &StepFn, a_fn: &YoungFn, p: f64, q: Cube) -> Result<BumpFactors> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::parameter("p", format!("need 1 < p < inf, got {p}")));
    }
    require_positive("u", u)?;
    let pp = conjugate(p);
    let avg = crate::dyadic::average(u, q)?;
    let direct = avg.powf(1.0 / p) / luxembourg(&u.powf(1.0 / p), a_fn, q)?;
    let exp_bound = ainf_exp_local(u, q)?.powf(1.0 / p);
    let dual = luxembourg(&u.powf(1.0 / pp), &dual_young(a_fn)?, q)? / avg.powf(1.0 / pp);
    Ok(BumpFactors { direct, exp_bound, dual })
}

/// Summary of the reduction to a single classical constant when
/// `u = v^{1-r'}`: both global A-infinity constants are controlled by
/// powers of the joint constant, collapsing the two-term bound into one.
#[derive(Debug, Clone, Copy)]
pub struct ImprovementCheck {
    /// `sup_Q <v>_Q <u>_Q^{r-1}` with `u = v^{1-r'}`.
    pub joint: f64,
    /// `sup_Q <u>_Q <v>_Q^{r'-1}`; equals `joint^{r'-1}` exactly.
    pub dual_joint: f64,
    pub lhs: f64,
    pub rhs: f64,
}

/// Evaluate both sides of the collapsed bound for `u = v^{1-r'}`. The
/// exponential A-infinity flavor keeps every step a per-cube Jensen
/// inequality with constant one; the integral flavor picks up a structural
/// constant and is recorded by callers rather than asserted.
pub fn improvement_check(v: &StepFn, cfg: &ExponentConfig) -> Result<ImprovementCheck> {
    require_positive("v", v)?;
    let u = v.powf(1.0 - cfg.r_prime);
    let joint = joint_ar(v, &u, cfg.r)?;
    let dual_joint = joint_ar(&u, v, cfg.r_prime)?;
    let eu = ainf_exp_global(&u)?;
    let ev = ainf_exp_global(v)?;
    let x0 = inv(cfg.q0_prime) - inv(cfg.p_prime);
    let lhs = joint.powf(x0) * (eu.powf(inv(cfg.p)) + ev.powf(inv(cfg.p_prime)));
    let rhs = 2.0 * joint.powf(inv(cfg.q0_prime).max(1.0 / (cfg.p0 * (cfg.r - 1.0))));
    Ok(ImprovementCheck { joint, dual_joint, lhs, rhs })
}
