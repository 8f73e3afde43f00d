//! Reference quadratures independent of the library's closed forms.

#![allow(dead_code)]

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `E1(a) = e^{-a} ∫_0^∞ e^{-x} / (x + a) dx`, mapped to `[0, 1)` by
/// `x = w / (1 - w)`.
pub fn e1_by_quadrature(a: f64) -> f64 {
    let g = |w: f64| {
        if w >= 1.0 {
            return 0.0;
        }
        let x = w / (1.0 - w);
        (-x).exp() / ((x + a) * (1.0 - w) * (1.0 - w))
    };
    (-a).exp() * adaptive_simpson(&g, 0.0, 1.0, 1e-15)
}

/// `∫_0^t (4πs)^{-n/2} exp(-r^2/4s) ds` by quadrature; infinite `t` is
/// mapped to `[0, 1)` by `s = w / (1 - w)`.
pub fn heat_integral_by_quadrature(r: f64, t: f64, n: usize) -> f64 {
    let p = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        (4.0 * std::f64::consts::PI * s).powf(-(n as f64) / 2.0) * (-r * r / (4.0 * s)).exp()
    };
    if t.is_finite() {
        adaptive_simpson(&p, 0.0, t, 1e-14)
    } else {
        let g = |w: f64| {
            if w >= 1.0 {
                return 0.0;
            }
            p(w / (1.0 - w)) / ((1.0 - w) * (1.0 - w))
        };
        adaptive_simpson(&g, 0.0, 1.0, 1e-14)
    }
}
