//! Special functions needed by the heat-kernel computations.

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Argument below which the power series is used.
const SERIES_CUTOFF: f64 = 1.0;

/// Exponential integral `E1(a) = ∫_a^∞ e^{-y} / y dy` for `a > 0`.
///
/// Power series below `a = 1`, modified-Lentz continued fraction above.
/// Relative error stays below `1e-13` on both branches.
pub fn exp_integral_e1(a: f64) -> Result<f64> {
    if !(a > 0.0) || a.is_nan() {
        return Err(Error::param(format!("E1 needs a > 0, got {a}")));
    }
    if a.is_infinite() {
        return Ok(0.0);
    }
    Ok(if a < SERIES_CUTOFF {
        e1_series(a)
    } else {
        e1_continued_fraction(a)
    })
}

fn e1_series(a: f64) -> f64 {
    // E1(a) = -γ - ln a - Σ_{k≥1} (-a)^k / (k k!)
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -a / kf;
        let contrib = term / kf;
        sum += contrib;
        if contrib.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - a.ln() - sum
}

fn e1_continued_fraction(a: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = a + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-a).exp()
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}
