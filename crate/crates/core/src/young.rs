//! Young functions, Luxembourg norms over cubes, conjugates, and the
//! integrability integral that decides membership in the `B_p` classes.

use std::fmt;
use std::sync::Arc;

use crate::dyadic::{pairwise_sum, Cube, StepFn};
use crate::error::{Error, Result};
use crate::forms::conjugate;
use crate::quad::integrate_log;

/// Default truncation point for the integrability integral. Far enough out
/// that the doubling-tail test separates the families we care about.
pub const BP_DEFAULT_UPPER: f64 = 1e3;

/// A Young function: convex, nondecreasing, `A(0) = 0`. Built-in families
/// are normalized so `A(1) = 1`, which makes `<c>_{A,Q} = c` for constants
/// and keeps bisection brackets tight.
#[derive(Clone)]
pub enum YoungFn {
    /// `t^a` for `a > 1`.
    Power { a: f64 },
    /// `t^a log(e+t)^delta`, scaled by `log(e+1)^{-delta}`.
    LogPower { a: f64, delta: f64 },
    /// Arbitrary evaluator; convexity is spot-checked at construction.
    Custom {
        label: String,
        eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for YoungFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "YoungFn({})", self.label())
    }
}

impl YoungFn {
    pub fn power(a: f64) -> Result<Self> {
        if !(a > 1.0) || !a.is_finite() {
            return Err(Error::parameter("a", format!("power exponent > 1, got {a}")));
        }
        Ok(YoungFn::Power { a })
    }

    pub fn log_power(a: f64, delta: f64) -> Result<Self> {
        if !(a > 1.0) || !a.is_finite() || !delta.is_finite() {
            return Err(Error::parameter("a", format!("need a > 1 finite, got a={a}, delta={delta}")));
        }
        let y = YoungFn::LogPower { a, delta };
        y.spot_check()?;
        Ok(y)
    }

    pub fn custom(
        label: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let y = YoungFn::Custom { label: label.into(), eval: Arc::new(eval) };
        y.spot_check()?;
        Ok(y)
    }

    pub fn eval(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0, "Young functions take nonnegative arguments");
        match self {
            YoungFn::Power { a } => t.powf(*a),
            YoungFn::LogPower { a, delta } => {
                if t == 0.0 {
                    0.0
                } else {
                    let e = std::f64::consts::E;
                    t.powf(*a) * ((e + t).ln() / (e + 1.0).ln()).powf(*delta)
                }
            }
            YoungFn::Custom { eval, .. } => eval(t),
        }
    }

    pub fn label(&self) -> String {
        match self {
            YoungFn::Power { a } => format!("power({a})"),
            YoungFn::LogPower { a, delta } => format!("logpower({a},{delta})"),
            YoungFn::Custom { label, .. } => label.clone(),
        }
    }

    /// The exponent `a` when the Luxembourg norm has the closed form
    /// `<f^a>_Q^{1/a}`.
    pub fn closed_luxembourg_exponent(&self) -> Option<f64> {
        match self {
            YoungFn::Power { a } => Some(*a),
            _ => None,
        }
    }

    /// Verdict of the integrability test when the family admits one:
    /// `Some(true)` means the integral against `t^{-p-1}` diverges.
    pub fn family_divergence_verdict(&self, p: f64) -> Option<bool> {
        match self {
            YoungFn::Power { a } => Some(*a >= p),
            YoungFn::LogPower { a, delta } => Some(*a > p || (*a == p && *delta >= -1.0)),
            YoungFn::Custom { .. } => None,
        }
    }

    /// Cheap sanity pass: `A(0) = 0`, nondecreasing, midpoint-convex on a
    /// geometric grid.
    fn spot_check(&self) -> Result<()> {
        let at_zero = self.eval(0.0);
        if !(at_zero.abs() <= 1e-12) {
            return Err(Error::parameter("young", format!("A(0) = {at_zero}, expected 0")));
        }
        let mut prev_t = 0.0f64;
        let mut prev_v = 0.0f64;
        for k in -20..=20 {
            let t = 2f64.powi(k);
            let v = self.eval(t);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::parameter("young", format!("A({t}) = {v}")));
            }
            let scale = v.abs().max(prev_v.abs()).max(1e-300);
            if v < prev_v - 1e-9 * scale {
                return Err(Error::parameter(
                    "young",
                    format!("not nondecreasing: A({prev_t}) = {prev_v} > A({t}) = {v}"),
                ));
            }
            let mid = 0.5 * (prev_t + t);
            let vm = self.eval(mid);
            if vm > 0.5 * (prev_v + v) + 1e-9 * scale {
                return Err(Error::parameter(
                    "young",
                    format!("not midpoint convex near t = {mid}"),
                ));
            }
            prev_t = t;
            prev_v = v;
        }
        Ok(())
    }
}

fn leaf_slice<'a>(f: &'a StepFn, q: Cube) -> Result<&'a [f64]> {
    let grid = f.grid();
    if !grid.contains(q) {
        return Err(Error::CubeOutsideGrid { level: q.level(), index: q.index(), depth: grid.depth() });
    }
    Ok(&f.values()[q.leaf_range(grid)])
}

fn mean_of(vals: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mapped: Vec<f64> = vals.iter().map(|&x| f(x)).collect();
    pairwise_sum(&mapped) / vals.len() as f64
}

/// The Luxembourg norm `<f>_{A,Q} = inf { lam > 0 : <A(f/lam)>_Q <= 1 }`.
/// Uses the closed form for the power family, bisection otherwise.
pub fn luxembourg(f: &StepFn, a_fn: &YoungFn, q: Cube) -> Result<f64> {
    let vals = leaf_slice(f, q)?;
    if vals.iter().any(|&x| x < 0.0) {
        return Err(Error::Domain("Luxembourg norm needs a nonnegative function".into()));
    }
    if let Some(a) = a_fn.closed_luxembourg_exponent() {
        return Ok(mean_of(vals, |x| x.powf(a)).powf(1.0 / a));
    }
    luxembourg_bisect_on(vals, a_fn)
}

/// Bisection path regardless of any closed form; the cross-check oracle.
pub fn luxembourg_bisect(f: &StepFn, a_fn: &YoungFn, q: Cube) -> Result<f64> {
    let vals = leaf_slice(f, q)?;
    if vals.iter().any(|&x| x < 0.0) {
        return Err(Error::Domain("Luxembourg norm needs a nonnegative function".into()));
    }
    luxembourg_bisect_on(vals, a_fn)
}

fn luxembourg_bisect_on(vals: &[f64], a_fn: &YoungFn) -> Result<f64> {
    let max = vals.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(0.0);
    }
    let n = vals.len() as f64;
    let avg = |lam: f64| mean_of(vals, |x| a_fn.eval(x / lam));

    // lam = max/x is infeasible whenever A(x) >= n: the max-attaining leaf
    // alone contributes A(x)/n >= 1 to the average.
    let mut x = 1.0;
    let mut guard = 0;
    while a_fn.eval(x) < n {
        x *= 2.0;
        guard += 1;
        if guard > 4000 {
            return Err(Error::Numeric("Young function grows too slowly to bracket".into()));
        }
    }
    let mut lo = max / x;
    let mut hi = max;
    guard = 0;
    while avg(hi) > 1.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Numeric("Luxembourg bracket failed to close".into()));
        }
    }
    if lo >= hi {
        return Ok(hi);
    }
    if avg(lo) <= 1.0 {
        return Ok(lo);
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if avg(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// The conjugate function `A*(t) = sup_{s >= 0} (st - A(s))`: the conjugate
/// power (normalized) for the power family, a numeric Legendre transform
/// otherwise.
pub fn dual_young(a_fn: &YoungFn) -> Result<YoungFn> {
    if let YoungFn::Power { a } = a_fn {
        return YoungFn::power(conjugate(*a));
    }
    let inner = a_fn.clone();
    YoungFn::custom(format!("dual({})", a_fn.label()), move |t| legendre_value(&inner, t))
}

/// `sup_{s >= 0} (ts - A(s))` by doubling bracket plus golden section on the
/// concave inner problem. Returns infinity when no finite bracket exists.
pub fn legendre_value(a_fn: &YoungFn, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let g = |s: f64| t * s - a_fn.eval(s);
    let mut hi = 1.0;
    let mut guard = 0;
    // past the maximizer once the objective goes negative and decreasing
    while !(g(hi) < 0.0 && g(hi) < g(0.5 * hi)) {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return f64::INFINITY;
        }
    }
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = 0.0;
    let mut b = hi;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    for _ in 0..200 {
        if (b - a) <= 1e-13 * hi {
            break;
        }
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
    }
    g(0.5 * (a + b)).max(0.0)
}

/// Value of an integral over `[1/2, upper]` together with a divergence
/// verdict for its continuation to infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailedIntegral {
    pub value: f64,
    pub diverges: bool,
}

/// `int_{1/2}^{upper} A(t) t^{-p} dt/t` with a doubling-tail divergence
/// test: the window `[upper, 2 upper]` contributing more than 10% of the
/// accumulated value flags divergence, as does a known family verdict.
pub fn bp_integral(a_fn: &YoungFn, p: f64, upper: f64) -> Result<TailedIntegral> {
    if !(p > 1.0) {
        return Err(Error::parameter("p", format!("need p > 1, got {p}")));
    }
    if !(upper >= 1.0) || !upper.is_finite() {
        return Err(Error::parameter("upper", format!("need finite upper >= 1, got {upper}")));
    }
    let integrand = |t: f64| a_fn.eval(t) * t.powf(-p - 1.0);
    let value = integrate_log(integrand, 0.5, upper, 1e-12);
    let tail = integrate_log(integrand, upper, 2.0 * upper, 1e-12);
    let heuristic = tail > 0.1 * value;
    let diverges = a_fn.family_divergence_verdict(p).unwrap_or(false) || heuristic;
    Ok(TailedIntegral { value, diverges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::Grid;

    fn grid(depth: u32) -> Grid {
        Grid::new(depth).unwrap()
    }

    #[test]
    fn power_family_basics() {
        let a2 = YoungFn::power(2.0).unwrap();
        assert_eq!(a2.eval(0.0), 0.0);
        assert_eq!(a2.eval(1.0), 1.0);
        assert_eq!(a2.eval(3.0), 9.0);
        assert!(YoungFn::power(1.0).is_err());
    }

    #[test]
    fn log_power_is_normalized() {
        let y = YoungFn::log_power(2.0, -1.01).unwrap();
        assert!((y.eval(1.0) - 1.0).abs() < 1e-14);
        assert_eq!(y.eval(0.0), 0.0);
        // decays relative to the pure power at large t
        assert!(y.eval(100.0) < 100.0f64.powi(2));
    }

    #[test]
    fn luxembourg_closed_form_example() {
        // f = (1,4), A = t^2: <f^2>^{1/2} = sqrt(8.5)
        let g = grid(1);
        let f = StepFn::new(g, vec![1.0, 4.0]).unwrap();
        let a2 = YoungFn::power(2.0).unwrap();
        let v = luxembourg(&f, &a2, g.root()).unwrap();
        assert!((v - 8.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn luxembourg_constant_is_identity() {
        let g = grid(3);
        let f = StepFn::constant(g, 2.75);
        for a in [1.5, 2.0, 3.0] {
            let y = YoungFn::power(a).unwrap();
            let v = luxembourg(&f, &y, g.root()).unwrap();
            assert!((v - 2.75).abs() < 1e-11);
        }
    }

    #[test]
    fn bisection_matches_closed_form() {
        let g = grid(4);
        let f = StepFn::from_fn(g, |i| ((i * 7) % 5) as f64 + 0.5);
        for a in [1.3, 2.0, 4.0] {
            let y = YoungFn::power(a).unwrap();
            for q in g.cubes() {
                let closed = luxembourg(&f, &y, q).unwrap();
                let bisect = luxembourg_bisect(&f, &y, q).unwrap();
                assert!(
                    (closed - bisect).abs() <= 1e-10 * closed,
                    "a={a} q={q:?} closed={closed} bisect={bisect}"
                );
            }
        }
    }

    #[test]
    fn luxembourg_homogeneity() {
        let g = grid(3);
        let f = StepFn::from_fn(g, |i| (i + 1) as f64);
        let y = YoungFn::log_power(2.0, 1.0).unwrap();
        let base = luxembourg(&f, &y, g.root()).unwrap();
        let scaled = luxembourg(&f.scale(7.25), &y, g.root()).unwrap();
        assert!((scaled - 7.25 * base).abs() <= 1e-12 * scaled.max(1.0) * 10.0);
    }

    #[test]
    fn luxembourg_zero_function() {
        let g = grid(2);
        let f = StepFn::constant(g, 0.0);
        let y = YoungFn::power(2.0).unwrap();
        assert_eq!(luxembourg(&f, &y, g.root()).unwrap(), 0.0);
    }

    #[test]
    fn dual_of_power_is_conjugate_power() {
        let y = YoungFn::power(2.0).unwrap();
        let d = dual_young(&y).unwrap();
        assert!((d.eval(1.0) - 1.0).abs() < 1e-14);
        assert!((d.eval(3.0) - 9.0).abs() < 1e-12);
        let y3 = YoungFn::power(3.0).unwrap();
        let d3 = dual_young(&y3).unwrap();
        assert!((d3.eval(2.0) - 2f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn numeric_legendre_matches_normalized_power_dual() {
        // Legendre of t^a is (a-1) a^{-a'} t^{a'}; after dividing by its
        // value at 1 this is exactly t^{a'}.
        for a in [1.5, 2.0, 3.0] {
            let y = YoungFn::power(a).unwrap();
            let at_one = legendre_value(&y, 1.0);
            let ap = conjugate(a);
            let expect_at_one = (a - 1.0) * a.powf(-ap);
            assert!((at_one - expect_at_one).abs() < 1e-9, "a={a}");
            for t in [0.5, 1.0, 2.0, 5.0] {
                let ratio = legendre_value(&y, t) / at_one;
                assert!((ratio - t.powf(ap)).abs() < 1e-6 * t.powf(ap).max(1.0), "a={a} t={t}");
            }
        }
    }

    #[test]
    fn young_inequality_on_grid() {
        let y = YoungFn::log_power(2.0, 0.5).unwrap();
        let d = dual_young(&y).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let s = 0.25 * (i as f64 + 1.0);
                let t = 0.25 * (j as f64 + 1.0);
                assert!(s * t <= y.eval(s) + d.eval(t) + 1e-9);
            }
        }
    }

    #[test]
    fn double_dual_recovers_power() {
        let y = YoungFn::power(2.0).unwrap();
        // go through the numeric path twice
        let inner = y.clone();
        let d1 = YoungFn::custom("num-dual", move |t| legendre_value(&inner, t)).unwrap();
        let d2 = dual_young(&d1).unwrap();
        for t in [0.5, 1.0, 2.0, 4.0] {
            let got = d2.eval(t);
            let want = y.eval(t);
            assert!((got - want).abs() <= 1e-6 * want.max(1.0), "t={t} got={got} want={want}");
        }
    }

    #[test]
    fn bp_integral_family_verdicts() {
        let p = 2.0;
        let diverging = bp_integral(&YoungFn::power(2.0).unwrap(), p, BP_DEFAULT_UPPER).unwrap();
        assert!(diverging.diverges);
        let converging = bp_integral(&YoungFn::power(1.8).unwrap(), p, BP_DEFAULT_UPPER).unwrap();
        assert!(!converging.diverges);
        // closed form for t^{1.8}: int t^{-1.2-1+1.8-... } = int t^{0.8-2.2+1}? direct:
        // int_{1/2}^{U} t^{1.8-3} dt = [t^{-0.2}/(-0.2)]
        let exact = (0.5f64.powf(-0.2) - BP_DEFAULT_UPPER.powf(-0.2)) / 0.2;
        assert!((converging.value - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn bp_integral_log_borderline() {
        // t^p log(e+t)^{-1.01} converges; the doubling tail stays under 10%
        let p = 2.0;
        let y = YoungFn::log_power(p, -1.01).unwrap();
        let r = bp_integral(&y, p, BP_DEFAULT_UPPER).unwrap();
        assert!(!r.diverges, "{r:?}");
        // exponent -1 exactly diverges (family verdict)
        let y1 = YoungFn::log_power(p, -1.0).unwrap();
        assert!(bp_integral(&y1, p, BP_DEFAULT_UPPER).unwrap().diverges);
    }

    #[test]
    fn spot_check_rejects_concave() {
        assert!(YoungFn::custom("sqrt", |t: f64| t.sqrt()).is_err());
    }
}
