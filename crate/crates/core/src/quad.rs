//! Adaptive Simpson quadrature for the decay and integrability integrals.

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

fn recurse(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    whole: f64,
    m: f64,
    fm: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
    }
}

/// Integrate `f` over `[a, b]`. `tol` is an absolute error budget; callers
/// pass a small fraction of the expected magnitude.
pub(crate) fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(&f, a, fa, b, fb);
    recurse(&f, a, fa, b, fb, whole, m, fm, tol.max(f64::MIN_POSITIVE), 48)
}

/// Integrate `g(t)` over `[a, b]` with `a > 0` in log coordinates, which
/// keeps power-law integrands smooth across decades.
pub(crate) fn integrate_log(g: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    adaptive_simpson(|x| g(x.exp()) * x.exp(), a.ln(), b.ln(), tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = adaptive_simpson(|x| 3.0 * x * x, 0.0, 2.0, 1e-12);
        assert!((v - 8.0).abs() < 1e-10);
    }

    #[test]
    fn log_space_power_law() {
        // int_1^1e6 dt/t^2 = 1 - 1e-6
        let v = integrate_log(|t| t.powi(-2), 1.0, 1e6, 1e-12);
        assert!((v - (1.0 - 1e-6)).abs() < 1e-9, "{v}");
    }

    #[test]
    fn handles_wide_log_integrand() {
        // int_{1/2}^{1e4} dt/t = ln(2e4)
        let v = integrate_log(|t| 1.0 / t, 0.5, 1e4, 1e-12);
        assert!((v - 2e4_f64.ln()).abs() < 1e-9);
    }
}
