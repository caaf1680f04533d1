//! Exponent bookkeeping, dual weights, and the bilinear sparse forms.
//!
//! Infinite exponents are represented as `f64::INFINITY` and their
//! reciprocals as exact zeros; no finite surrogates anywhere.

use std::collections::BTreeMap;

use crate::dyadic::{
    average, lp_norm, pairwise_sum, same_grid, Carrier, Cube, CubeSums, Grid, StepFn,
};
use crate::error::{Error, Result};
use crate::sparse::SparseFamily;

/// `1/x` with `1/inf = 0`.
pub fn inv(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

/// Conjugate exponent `x' = x/(x-1)`, with `1' = inf` and `inf' = 1`.
pub fn conjugate(x: f64) -> f64 {
    if x.is_infinite() {
        1.0
    } else if x == 1.0 {
        f64::INFINITY
    } else {
        x / (x - 1.0)
    }
}

/// The exponent tuple `(p0, q0, p, q)` with every derived quantity.
///
/// Constraints: `1 <= p0 < min(p,q)`, `max(p,q) < q0 <= inf`, `p, q` finite
/// and `> 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentConfig {
    pub p0: f64,
    pub q0: f64,
    pub p: f64,
    pub q: f64,
    pub p_prime: f64,
    pub q_prime: f64,
    pub p0_prime: f64,
    pub q0_prime: f64,
    /// `r = (q0/p)' (p/p0 - 1) + 1`, with `(q0/p)' = 1` at `q0 = inf`.
    pub r: f64,
    pub r_prime: f64,
    /// `1/s = max(1/q - 1/p, 0)`; `s = inf` when `p <= q`.
    pub s: f64,
    /// `rho = 1 + p0/q0'`.
    pub rho: f64,
}

/// Validate the tuple and derive all conjugates, `r`, `s`, `rho`.
pub fn derive_config(p0: f64, q0: f64, p: f64, q: f64) -> Result<ExponentConfig> {
    for (name, v) in [("p0", p0), ("p", p), ("q", q)] {
        if !v.is_finite() {
            return Err(Error::parameter(name, "must be finite"));
        }
    }
    if p0 < 1.0 {
        return Err(Error::parameter("p0", format!("p0 >= 1, got {p0}")));
    }
    if !(p > 1.0) || !(q > 1.0) {
        return Err(Error::parameter("p", format!("p, q in (1, inf), got p={p}, q={q}")));
    }
    if !(p0 < p.min(q)) {
        return Err(Error::parameter("p0", format!("p0 < min(p,q), got p0={p0}, p={p}, q={q}")));
    }
    if !(q0 > p.max(q)) {
        return Err(Error::parameter("q0", format!("q0 > max(p,q), got q0={q0}, p={p}, q={q}")));
    }
    let q0_over_p_conj = if q0.is_infinite() { 1.0 } else { conjugate(q0 / p) };
    let r = q0_over_p_conj * (p / p0 - 1.0) + 1.0;
    let inv_s = (inv(q) - inv(p)).max(0.0);
    let s = if inv_s == 0.0 { f64::INFINITY } else { 1.0 / inv_s };
    let q0_prime = conjugate(q0);
    Ok(ExponentConfig {
        p0,
        q0,
        p,
        q,
        p_prime: conjugate(p),
        q_prime: conjugate(q),
        p0_prime: conjugate(p0),
        q0_prime,
        r,
        r_prime: conjugate(r),
        s,
        rho: 1.0 + p0 / q0_prime,
    })
}

impl ExponentConfig {
    /// `1/p - 1/q0`, the `<v>` exponent of the local joint characteristic.
    pub fn x_exponent(&self) -> f64 {
        inv(self.p) - inv(self.q0)
    }

    /// `1/p0 - 1/p`, the `<u>` exponent of the local joint characteristic
    /// (equal to `(1/p - 1/q0)(r - 1)`).
    pub fn y_exponent(&self) -> f64 {
        inv(self.p0) - inv(self.p)
    }
}

/// Per-cube coefficients `lambda_Q`: Lebesgue (`|Q|`) or an explicit table.
#[derive(Debug, Clone)]
pub enum LambdaRule {
    Lebesgue,
    PerCube(BTreeMap<Cube, f64>),
}

impl LambdaRule {
    pub fn value(&self, cube: Cube) -> Result<f64> {
        match self {
            LambdaRule::Lebesgue => Ok(cube.measure()),
            LambdaRule::PerCube(map) => map
                .get(&cube)
                .copied()
                .ok_or_else(|| Error::Domain(format!("no lambda value for {cube:?}"))),
        }
    }
}

/// Dual weights `u = w^{p0/(p0-p)}`, `v = sigma^{q0'/(q0'-q')}`.
pub fn derive_duals(w: &StepFn, sigma: &StepFn, cfg: &ExponentConfig) -> Result<(StepFn, StepFn)> {
    same_grid(w, sigma)?;
    for (name, f) in [("w", w), ("sigma", sigma)] {
        if !f.is_strictly_positive() {
            return Err(Error::DegenerateWeight(format!("{name} must be strictly positive")));
        }
    }
    // p0 = 1 gives exponent 1/(1-p) = 1 - p'; q0 = inf gives q0' = 1, so
    // the v exponent is 1/(1-q') = 1 - q.
    let eu = cfg.p0 / (cfg.p0 - cfg.p);
    let ev = cfg.q0_prime / (cfg.q0_prime - cfg.q_prime);
    let u = w.powf(eu);
    let v = sigma.powf(ev);
    if !u.is_strictly_positive() || !v.is_strictly_positive() {
        return Err(Error::DegenerateWeight("dual weights must stay positive and finite".into()));
    }
    Ok((u, v))
}

/// A fully derived two-weight experiment: `(w, sigma)` with exponents, the
/// dual pair `(u, v)`, the lambda rule, and cached cube sums.
#[derive(Debug, Clone)]
pub struct WeightSetting {
    grid: Grid,
    pub cfg: ExponentConfig,
    pub w: StepFn,
    pub sigma: StepFn,
    pub u: StepFn,
    pub v: StepFn,
    pub lambda: LambdaRule,
    u_sums: CubeSums,
    v_sums: CubeSums,
}

impl WeightSetting {
    pub fn new(w: StepFn, sigma: StepFn, cfg: ExponentConfig, lambda: LambdaRule) -> Result<Self> {
        let (u, v) = derive_duals(&w, &sigma, &cfg)?;
        let grid = w.grid();
        let u_sums = CubeSums::new(&u);
        let v_sums = CubeSums::new(&v);
        Ok(WeightSetting { grid, cfg, w, sigma, u, v, lambda, u_sums, v_sums })
    }

    /// Build a setting directly from the dual pair `(u, v)`, backing out
    /// `w = u^{(p0-p)/p0}` and `sigma = v^{(q0'-q')/q0'}`.
    pub fn from_duals(u: StepFn, v: StepFn, cfg: ExponentConfig, lambda: LambdaRule) -> Result<Self> {
        same_grid(&u, &v)?;
        for (name, f) in [("u", &u), ("v", &v)] {
            if !f.is_strictly_positive() {
                return Err(Error::DegenerateWeight(format!("{name} must be strictly positive")));
            }
        }
        let w = u.powf((cfg.p0 - cfg.p) / cfg.p0);
        let sigma = v.powf((cfg.q0_prime - cfg.q_prime) / cfg.q0_prime);
        if !w.is_strictly_positive() || !sigma.is_strictly_positive() {
            return Err(Error::DegenerateWeight("backed-out weights must stay positive and finite".into()));
        }
        // Keep the caller's (u, v) exactly; re-deriving them from (w, sigma)
        // would round-trip through two powf calls.
        let grid = u.grid();
        let u_sums = CubeSums::new(&u);
        let v_sums = CubeSums::new(&v);
        Ok(WeightSetting { grid, cfg, w, sigma, u, v, lambda, u_sums, v_sums })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn u_avg(&self, cube: Cube) -> f64 {
        self.u_sums.average(cube)
    }

    pub fn v_avg(&self, cube: Cube) -> f64 {
        self.v_sums.average(cube)
    }

    /// `u(Q) = int_Q u`.
    pub fn u_mass(&self, cube: Cube) -> f64 {
        self.u_sums.integral(cube)
    }

    pub fn v_mass(&self, cube: Cube) -> f64 {
        self.v_sums.integral(cube)
    }

    /// `tau_Q = <u>_Q^{-1/p0'} <v>_Q^{-1/q0} lambda_Q / |Q|`.
    pub fn tau(&self, cube: Cube) -> Result<f64> {
        let a = self.u_avg(cube).powf(-inv(self.cfg.p0_prime));
        let b = self.v_avg(cube).powf(-inv(self.cfg.q0));
        Ok(a * b * self.lambda.value(cube)? / cube.measure())
    }

    /// `A_Q = lambda_Q <u>_Q^{1/p0} <v>_Q^{1/q0'}` (equals `tau_Q <u>_Q <v>_Q |Q|`),
    /// the coefficient of the reduced form.
    pub fn reduced_coeff(&self, cube: Cube) -> Result<f64> {
        let a = self.u_avg(cube).powf(inv(self.cfg.p0));
        let b = self.v_avg(cube).powf(inv(self.cfg.q0_prime));
        Ok(self.lambda.value(cube)? * a * b)
    }
}

pub(crate) fn check_family(setting: &WeightSetting, family: &SparseFamily) -> Result<()> {
    if family.grid() != setting.grid {
        return Err(Error::GridMismatch(family.grid().depth(), setting.grid.depth()));
    }
    if !family.is_verified() {
        return Err(Error::Precondition("family must be verified before norm computations".into()));
    }
    Ok(())
}

/// The bilinear form
/// `B(f,g) = sum_Q <|f|^{p0}>_Q^{1/p0} <|g|^{q0'}>_Q^{1/q0'} lambda_Q`.
pub fn bform(f: &StepFn, g: &StepFn, family: &SparseFamily, setting: &WeightSetting) -> Result<f64> {
    check_family(setting, family)?;
    same_grid(f, &setting.w)?;
    same_grid(g, &setting.w)?;
    let fp = f.map(|x| x.abs().powf(setting.cfg.p0));
    let gq = g.map(|x| x.abs().powf(setting.cfg.q0_prime));
    let fs = CubeSums::new(&fp);
    let gs = CubeSums::new(&gq);
    let mut terms = Vec::with_capacity(family.len());
    for &q in family.members() {
        let a = fs.average(q).powf(inv(setting.cfg.p0));
        let b = gs.average(q).powf(inv(setting.cfg.q0_prime));
        terms.push(a * b * setting.lambda.value(q)?);
    }
    Ok(pairwise_sum(&terms))
}

/// The reduced form
/// `sum_Q <f>_Q^u <g>_Q^v lambda_Q <u>_Q^{1/p0} <v>_Q^{1/q0'}`.
pub fn reduced_form(
    f: &StepFn,
    g: &StepFn,
    family: &SparseFamily,
    setting: &WeightSetting,
) -> Result<f64> {
    check_family(setting, family)?;
    let fu = CubeSums::new(&f.zip_with(&setting.u, |a, b| a * b)?);
    let gv = CubeSums::new(&g.zip_with(&setting.v, |a, b| a * b)?);
    let mut terms = Vec::with_capacity(family.len());
    for &q in family.members() {
        let favg = fu.sum(q) / setting.u_sums_sum(q);
        let gavg = gv.sum(q) / setting.v_sums_sum(q);
        terms.push(favg * gavg * setting.reduced_coeff(q)?);
    }
    Ok(pairwise_sum(&terms))
}

impl WeightSetting {
    fn u_sums_sum(&self, cube: Cube) -> f64 {
        self.u_sums.sum(cube)
    }

    fn v_sums_sum(&self, cube: Cube) -> f64 {
        self.v_sums.sum(cube)
    }
}

/// The sparse operator `T(h) = sum_Q tau_Q <h>_Q 1_Q`, optionally restricted
/// to members contained in `restrict_to`.
pub fn sparse_operator(
    h: &StepFn,
    family: &SparseFamily,
    setting: &WeightSetting,
    restrict_to: Option<Cube>,
) -> Result<StepFn> {
    check_family(setting, family)?;
    same_grid(h, &setting.w)?;
    if let Some(r) = restrict_to {
        if !setting.grid.contains(r) {
            return Err(Error::CubeOutsideGrid {
                level: r.level(),
                index: r.index(),
                depth: setting.grid.depth(),
            });
        }
    }
    let hs = CubeSums::new(h);
    let mut out = vec![0.0; setting.grid.leaf_count()];
    for &q in family.members() {
        if let Some(r) = restrict_to {
            if !r.contains(q) {
                continue;
            }
        }
        let coeff = setting.tau(q)? * hs.average(q);
        for i in q.leaf_range(setting.grid) {
            out[i] += coeff;
        }
    }
    StepFn::new(setting.grid, out)
}

/// The weighted maximal function
/// `M_{pbar,u}(f)(x) = sup { (<|f|^{pbar}>_Q^u)^{1/pbar} : x in Q, Q in S }`,
/// zero off the union of the family.
pub fn weighted_maximal(
    f: &StepFn,
    u: &StepFn,
    family: &SparseFamily,
    pbar: f64,
) -> Result<StepFn> {
    same_grid(f, u)?;
    if family.grid() != f.grid() {
        return Err(Error::GridMismatch(family.grid().depth(), f.grid().depth()));
    }
    if !(pbar >= 1.0 && pbar.is_finite()) {
        return Err(Error::parameter("pbar", format!("1 <= pbar < inf, got {pbar}")));
    }
    if !u.is_strictly_positive() {
        return Err(Error::DegenerateWeight("maximal weight must be strictly positive".into()));
    }
    let grid = f.grid();
    let num = CubeSums::new(&f.zip_with(u, |a, b| a.abs().powf(pbar) * b)?);
    let den = CubeSums::new(u);
    let mut out = vec![0.0f64; grid.leaf_count()];
    for &q in family.members() {
        let val = (num.sum(q) / den.sum(q)).powf(1.0 / pbar);
        for i in q.leaf_range(grid) {
            out[i] = out[i].max(val);
        }
    }
    StepFn::new(grid, out)
}

/// Which side of the `rho` threshold a diagonal config falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoCase {
    /// `p >= rho`, governed by `alpha = min(p - p0, 1) / (p0 (r-1))`.
    GeRho,
    /// `p < rho`, governed by `alpha~ = (1/q0' - 1/p') p`.
    LtRho,
}

#[derive(Debug, Clone)]
pub struct ExponentCheck {
    pub label: &'static str,
    pub value: f64,
    pub ok: bool,
}

/// Exponent diagnostics for the diagonal case `p = q`.
#[derive(Debug, Clone)]
pub struct Theorem12Exponents {
    pub rho: f64,
    pub alpha: f64,
    pub alpha_tilde: f64,
    pub case: RhoCase,
    pub checks: Vec<ExponentCheck>,
    /// `|1/p0 - alpha~(r-1) + 1/q0' - alpha~ - (1 - (p-1)(1/p0 - 1/q0))|`.
    pub identity_gap: f64,
    pub pass: bool,
}

/// Compute `rho`, `alpha`, `alpha~` and check the case inequalities for a
/// diagonal config. The exponent from the governing case must leave the pair
/// `(1/p0 - (r-1)a, 1/q0' - a)` nonnegative with sum `< 1`.
pub fn theorem12_exponents(cfg: &ExponentConfig) -> Result<Theorem12Exponents> {
    if cfg.p != cfg.q {
        return Err(Error::Precondition(format!(
            "exponent diagnostics need p = q, got p={}, q={}",
            cfg.p, cfg.q
        )));
    }
    let rho = cfg.rho;
    let r = cfg.r;
    let alpha = (cfg.p - cfg.p0).min(1.0) / (cfg.p0 * (r - 1.0));
    let alpha_tilde = (inv(cfg.q0_prime) - inv(cfg.p_prime)) * cfg.p;
    let case = if cfg.p >= rho { RhoCase::GeRho } else { RhoCase::LtRho };
    let a = match case {
        RhoCase::GeRho => alpha,
        RhoCase::LtRho => alpha_tilde,
    };
    let first = inv(cfg.p0) - (r - 1.0) * a;
    let second = inv(cfg.q0_prime) - a;
    let slack = 1e-12;
    let checks = vec![
        ExponentCheck { label: "1/p0 - (r-1)a >= 0", value: first, ok: first >= -slack },
        ExponentCheck { label: "1/q0' - a >= 0", value: second, ok: second >= -slack },
        ExponentCheck {
            label: "1/p0 - (r-1)a + 1/q0' - a < 1",
            value: first + second,
            ok: first + second < 1.0 - slack,
        },
    ];
    let lhs = inv(cfg.p0) - alpha_tilde * (r - 1.0) + inv(cfg.q0_prime) - alpha_tilde;
    let rhs = 1.0 - (cfg.p - 1.0) * (inv(cfg.p0) - inv(cfg.q0));
    let identity_gap = (lhs - rhs).abs();
    let pass = checks.iter().all(|c| c.ok) && identity_gap <= 1e-12;
    Ok(Theorem12Exponents { rho, alpha, alpha_tilde, case, checks, identity_gap, pass })
}

/// `int T(f u) g v dx` computed leafwise; equals the reduced form exactly.
pub fn pairing_integral(
    f: &StepFn,
    g: &StepFn,
    family: &SparseFamily,
    setting: &WeightSetting,
) -> Result<f64> {
    let fu = f.zip_with(&setting.u, |a, b| a * b)?;
    let t = sparse_operator(&fu, family, setting, None)?;
    let gv = g.zip_with(&setting.v, |a, b| a * b)?;
    crate::dyadic::integrate(&t.zip_with(&gv, |a, b| a * b)?, setting.grid.root(), &Carrier::Lebesgue)
}

/// Convenience: `<f>_Q` via a fresh cube-sum pass (used by tests and the
/// reporting layer; hot paths pre-aggregate).
pub fn plain_average(f: &StepFn, cube: Cube) -> Result<f64> {
    average(f, cube)
}

/// `L^p(weight)` norm of a step function, `weight` as a `StepFn`.
pub fn weighted_lp_norm(f: &StepFn, weight: &StepFn, p: f64) -> Result<f64> {
    lp_norm(f, weight, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{integrate, Carrier};

    fn grid(depth: u32) -> Grid {
        Grid::new(depth).unwrap()
    }

    fn cube(l: u32, k: usize) -> Cube {
        Cube::new(l, k).unwrap()
    }

    fn chain_family(g: Grid) -> SparseFamily {
        let cubes: Vec<Cube> = (0..=g.depth()).map(|l| cube(l, 0)).collect();
        SparseFamily::verified(g, cubes, Carrier::Lebesgue, 0.5).unwrap()
    }

    #[test]
    fn derive_config_classic() {
        // (1, inf, 2, 2): r = 2, s = inf, rho = 2
        let c = derive_config(1.0, f64::INFINITY, 2.0, 2.0).unwrap();
        assert_eq!(c.r, 2.0);
        assert!(c.s.is_infinite());
        assert_eq!(c.rho, 2.0);
        assert_eq!(c.q0_prime, 1.0);
        assert!(c.p0_prime.is_infinite());
        assert_eq!(c.p_prime, 2.0);
    }

    #[test]
    fn derive_config_interior() {
        // (2, 4, 3, 3): (4/3)' = 4, r = 4*(3/2 - 1) + 1 = 3
        let c = derive_config(2.0, 4.0, 3.0, 3.0).unwrap();
        assert!((c.r - 3.0).abs() < 1e-14);
        assert!((c.r_prime - 1.5).abs() < 1e-14);
        assert!((c.rho - (1.0 + 2.0 / (4.0 / 3.0))).abs() < 1e-14);
        assert!(c.s.is_infinite());
    }

    #[test]
    fn s_is_finite_only_above_the_diagonal() {
        // p > q activates the finite testing index: 1/s = 1/q - 1/p
        let c = derive_config(1.0, f64::INFINITY, 3.0, 2.0).unwrap();
        assert!((c.s - 6.0).abs() < 1e-12);
        let d = derive_config(1.0, f64::INFINITY, 2.0, 3.0).unwrap();
        assert!(d.s.is_infinite());
    }

    #[test]
    fn conjugate_identities() {
        for (p0, q0, p, q) in [
            (1.0, f64::INFINITY, 2.0, 2.0),
            (2.0, 4.0, 3.0, 3.0),
            (1.5, 10.0, 2.0, 4.0),
            (1.0, 8.0, 3.0, 2.0),
        ] {
            let c = derive_config(p0, q0, p, q).unwrap();
            assert!((inv(c.p) + inv(c.p_prime) - 1.0).abs() < 1e-14);
            assert!((inv(c.q) + inv(c.q_prime) - 1.0).abs() < 1e-14);
            assert!((inv(c.p0) + inv(c.p0_prime) - 1.0).abs() < 1e-14);
            assert!((inv(c.q0) + inv(c.q0_prime) - 1.0).abs() < 1e-14);
            assert!((inv(c.r) + inv(c.r_prime) - 1.0).abs() < 1e-14);
            // (1/p - 1/q0)(r-1) = 1/p0 - 1/p
            assert!((c.x_exponent() * (c.r - 1.0) - c.y_exponent()).abs() < 1e-13);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(derive_config(2.0, f64::INFINITY, 2.0, 2.0).is_err()); // p0 = p
        assert!(derive_config(1.0, 2.0, 2.0, 2.0).is_err()); // q0 = q
        assert!(derive_config(0.5, f64::INFINITY, 2.0, 2.0).is_err());
        assert!(derive_config(1.0, f64::INFINITY, 1.0, 2.0).is_err());
    }

    #[test]
    fn dual_weight_exponents() {
        // p0=1, p=2: u = w^{-1}; q0=inf, q=2: v = sigma^{-1}
        let g = grid(1);
        let cfg = derive_config(1.0, f64::INFINITY, 2.0, 2.0).unwrap();
        let w = StepFn::new(g, vec![2.0, 4.0]).unwrap();
        let sigma = StepFn::new(g, vec![0.5, 5.0]).unwrap();
        let (u, v) = derive_duals(&w, &sigma, &cfg).unwrap();
        assert_eq!(u.values(), &[0.5, 0.25]);
        assert_eq!(v.values(), &[2.0, 0.2]);
    }

    #[test]
    fn tau_example() {
        // depth 1, u=(4,1), v=(1,4), p0=2, q0=4, lambda=|Q|:
        // tau_root = 2.5^{-1/2} * 2.5^{-1/4} = 2.5^{-3/4}
        let g = grid(1);
        let cfg = derive_config(2.0, 4.0, 3.0, 3.0).unwrap();
        let u = StepFn::new(g, vec![4.0, 1.0]).unwrap();
        let v = StepFn::new(g, vec![1.0, 4.0]).unwrap();
        let setting = WeightSetting::from_duals(u, v, cfg, LambdaRule::Lebesgue).unwrap();
        assert_eq!(setting.u.values(), &[4.0, 1.0]);
        assert_eq!(setting.v.values(), &[1.0, 4.0]);
        let t = setting.tau(g.root()).unwrap();
        assert!((t - 2.5f64.powf(-0.75)).abs() < 1e-14);
    }

    #[test]
    fn bform_depth_one() {
        // p0=2, q0'=2 (q0=2? use p0=2,q0=4 -> q0'=4/3). Take the worked case:
        // S = {root}, lambda = 1 via per-cube, f=(1,4)? Use the sqrt(8.5) value:
        // <f^2>^(1/2) with f=(1,4) is sqrt(8.5); g constant 1 contributes 1.
        let g = grid(1);
        let cfg = derive_config(2.0, 4.0, 3.0, 3.0).unwrap();
        let w = StepFn::constant(g, 1.0);
        let sigma = StepFn::constant(g, 1.0);
        let mut lam = BTreeMap::new();
        lam.insert(g.root(), 1.0);
        let setting = WeightSetting::new(w, sigma, cfg, LambdaRule::PerCube(lam)).unwrap();
        let fam =
            SparseFamily::verified(g, vec![g.root()], Carrier::Lebesgue, 0.5).unwrap();
        let f = StepFn::new(g, vec![1.0, 4.0]).unwrap();
        let one = StepFn::constant(g, 1.0);
        let b = bform(&f, &one, &fam, &setting).unwrap();
        assert!((b - 8.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn pairing_identity() {
        // reduced_form(f,g) = int T(fu) g v dx
        let g = grid(3);
        let cfg = derive_config(1.0, f64::INFINITY, 2.0, 2.0).unwrap();
        let w = StepFn::from_fn(g, |i| 1.0 + (i as f64 * 0.7).sin().abs());
        let sigma = StepFn::from_fn(g, |i| 0.5 + (i as f64 * 1.3).cos().powi(2));
        let setting = WeightSetting::new(w, sigma, cfg, LambdaRule::Lebesgue).unwrap();
        let fam = chain_family(g);
        let f = StepFn::from_fn(g, |i| (i % 3) as f64 + 0.25);
        let gg = StepFn::from_fn(g, |i| ((i + 2) % 4) as f64 + 0.5);
        let lhs = reduced_form(&f, &gg, &fam, &setting).unwrap();
        let rhs = pairing_integral(&f, &gg, &fam, &setting).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "lhs={lhs} rhs={rhs}");
    }

    #[test]
    fn sparse_operator_identity_example() {
        // S = {root}, u = v = 1, p0=1, q0=inf: tau_root = lambda/|Q| = 1,
        // so T(1_{[0,1)}) = 1_{[0,1)}.
        let g = grid(2);
        let cfg = derive_config(1.0, f64::INFINITY, 2.0, 2.0).unwrap();
        let setting = WeightSetting::new(
            StepFn::constant(g, 1.0),
            StepFn::constant(g, 1.0),
            cfg,
            LambdaRule::Lebesgue,
        )
        .unwrap();
        let fam =
            SparseFamily::verified(g, vec![g.root()], Carrier::Lebesgue, 0.5).unwrap();
        let one = StepFn::constant(g, 1.0);
        let t = sparse_operator(&one, &fam, &setting, None).unwrap();
        assert_eq!(t.values(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn sparse_operator_restriction() {
        let g = grid(2);
        let cfg = derive_config(1.0, f64::INFINITY, 2.0, 2.0).unwrap();
        let setting = WeightSetting::new(
            StepFn::constant(g, 1.0),
            StepFn::constant(g, 1.0),
            cfg,
            LambdaRule::Lebesgue,
        )
        .unwrap();
        let fam = chain_family(g);
        let one = StepFn::constant(g, 1.0);
        let full = sparse_operator(&one, &fam, &setting, None).unwrap();
        let restricted = sparse_operator(&one, &fam, &setting, Some(cube(1, 0))).unwrap();
        // restriction drops the root term everywhere
        for i in 0..4 {
            let expect = if i < 2 { full.values()[i] - 1.0 } else { 0.0 };
            assert!((restricted.values()[i] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn weighted_maximal_matches_per_leaf_brute_force() {
        let g = grid(4);
        let fam =
            crate::sparse::random_sparse_family(g, Carrier::Lebesgue, 0.5, 0.9, 23).unwrap();
        let f = StepFn::from_fn(g, |i| ((i * 5) % 7) as f64 + 1.0);
        let u = StepFn::from_fn(g, |i| 1.0 + 0.25 * ((i * 3) % 5) as f64);
        let pbar = 2.0;
        let m = weighted_maximal(&f, &u, &fam, pbar).unwrap();
        for i in 0..g.leaf_count() {
            let mut best = 0.0f64;
            for &q in fam.members() {
                if !q.leaf_range(g).contains(&i) {
                    continue;
                }
                let (mut num, mut den) = (0.0, 0.0);
                for j in q.leaf_range(g) {
                    num += f.values()[j].abs().powf(pbar) * u.values()[j];
                    den += u.values()[j];
                }
                best = best.max((num / den).powf(1.0 / pbar));
            }
            assert!((m.values()[i] - best).abs() < 1e-12, "leaf {i}");
        }
    }

    #[test]
    fn maximal_dominates_averages_pointwise() {
        let g = grid(3);
        let fam = chain_family(g);
        let f = StepFn::from_fn(g, |i| (i as f64 - 3.0).abs() + 0.5);
        let u = StepFn::from_fn(g, |i| 1.0 + (i % 2) as f64);
        let p0 = 1.5;
        let m = weighted_maximal(&f, &u, &fam, p0).unwrap();
        let fu = CubeSums::new(&f.zip_with(&u, |a, b| a.powf(p0) * b).unwrap());
        let us = CubeSums::new(&u);
        for &q in fam.members() {
            let avg = (fu.sum(q) / us.sum(q)).powf(1.0 / p0);
            for i in q.leaf_range(g) {
                assert!(m.values()[i] + 1e-12 >= avg);
            }
        }
    }

    #[test]
    fn theorem12_example_values() {
        // (1, inf, 2, 2): rho=2, alpha=1, slacks (0, 0), strict sum 0 < 1
        let c = derive_config(1.0, f64::INFINITY, 2.0, 2.0).unwrap();
        let d = theorem12_exponents(&c).unwrap();
        assert_eq!(d.case, RhoCase::GeRho);
        assert!((d.alpha - 1.0).abs() < 1e-14);
        assert!(d.pass, "{d:?}");
        assert!(d.checks[0].value.abs() < 1e-14);
        assert!(d.checks[1].value.abs() < 1e-14);

        // (1, inf, 3, 3): alpha = 1/2, remaining slack on the second check
        let c = derive_config(1.0, f64::INFINITY, 3.0, 3.0).unwrap();
        let d = theorem12_exponents(&c).unwrap();
        assert!((d.alpha - 0.5).abs() < 1e-14);
        assert!((d.checks[1].value - 0.5).abs() < 1e-14);
        assert!(d.pass);
    }

    #[test]
    fn theorem12_rejects_off_diagonal() {
        let c = derive_config(1.0, f64::INFINITY, 2.0, 3.0).unwrap();
        assert!(theorem12_exponents(&c).is_err());
    }

    #[test]
    fn bform_homogeneity_in_lambda() {
        // doubling every lambda_Q doubles the form
        let g = grid(2);
        let cfg = derive_config(1.0, f64::INFINITY, 2.0, 2.0).unwrap();
        let fam = chain_family(g);
        let mut lam = BTreeMap::new();
        let mut lam2 = BTreeMap::new();
        for &q in fam.members() {
            lam.insert(q, q.measure());
            lam2.insert(q, 2.0 * q.measure());
        }
        let w = StepFn::from_fn(g, |i| 1.0 + i as f64);
        let s1 = WeightSetting::new(w.clone(), w.clone(), cfg, LambdaRule::PerCube(lam)).unwrap();
        let s2 = WeightSetting::new(w.clone(), w, cfg, LambdaRule::PerCube(lam2)).unwrap();
        let f = StepFn::from_fn(g, |i| (i + 1) as f64);
        let b1 = bform(&f, &f, &fam, &s1).unwrap();
        let b2 = bform(&f, &f, &fam, &s2).unwrap();
        assert!((b2 - 2.0 * b1).abs() < 1e-12 * b1);
    }

    #[test]
    fn per_cube_holder_direction() {
        // <f>_Q^u <g>_Q^v <= (<f^{p0}>_Q^u)^{1/p0} (<g^{q0'}>_Q^v)^{1/q0'}
        let g = grid(3);
        let cfg = derive_config(2.0, 4.0, 3.0, 3.0).unwrap();
        let w = StepFn::from_fn(g, |i| 1.0 + (i % 4) as f64);
        let sigma = StepFn::from_fn(g, |i| 2.0 - (i % 2) as f64 * 0.5);
        let setting = WeightSetting::new(w, sigma, cfg, LambdaRule::Lebesgue).unwrap();
        let f = StepFn::from_fn(g, |i| ((i * 7) % 5) as f64 + 0.5);
        let gg = StepFn::from_fn(g, |i| ((i * 3) % 4) as f64 + 0.25);
        for q in g.cubes() {
            let fu = crate::dyadic::weighted_average(&f, &setting.u, q).unwrap();
            let gv = crate::dyadic::weighted_average(&gg, &setting.v, q).unwrap();
            let fp = crate::dyadic::weighted_average(
                &f.powf(setting.cfg.p0),
                &setting.u,
                q,
            )
            .unwrap()
            .powf(inv(setting.cfg.p0));
            let gq = crate::dyadic::weighted_average(
                &gg.powf(setting.cfg.q0_prime),
                &setting.v,
                q,
            )
            .unwrap()
            .powf(inv(setting.cfg.q0_prime));
            assert!(fu * gv <= fp * gq * (1.0 + 1e-12));
        }
    }

    #[test]
    fn operator_and_integral_agree_on_simple_case() {
        let g = grid(1);
        let cfg = derive_config(1.0, f64::INFINITY, 2.0, 2.0).unwrap();
        let setting = WeightSetting::new(
            StepFn::constant(g, 1.0),
            StepFn::constant(g, 1.0),
            cfg,
            LambdaRule::Lebesgue,
        )
        .unwrap();
        let fam =
            SparseFamily::verified(g, vec![g.root()], Carrier::Lebesgue, 0.5).unwrap();
        let f = StepFn::new(g, vec![1.0, 3.0]).unwrap();
        let t = sparse_operator(&f, &fam, &setting, None).unwrap();
        let total = integrate(&t, g.root(), &Carrier::Lebesgue).unwrap();
        assert!((total - 2.0).abs() < 1e-15);
    }
}
