//! `L^p` norms, decreasing rearrangements, and Lorentz `L^{p,q}` norms.
//!
//! Lorentz norms use the unnormalized convention
//! `‖f‖_{p,q} = (∫_0^∞ [t^{1/p} f*(t)]^q dt/t)^{1/q}` and
//! `‖f‖_{p,∞} = sup_t t^{1/p} f*(t)`. The rearrangement of a grid field is a
//! step function, so the integral is evaluated exactly plateau by plateau.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Convention tag recorded in every report that quotes a Lorentz norm.
pub const LORENTZ_CONVENTION: &str = "Lpq-unnormalized";

/// Values below this fraction of `max |f|` are treated as zero.
pub const ZERO_THRESHOLD: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub value: f64,
    pub measure: f64,
}

/// Nonincreasing step function: plateaus with strictly decreasing positive
/// values and positive measures, starting at `t = 0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    plateaus: Vec<Plateau>,
}

impl StepFunction {
    /// Rearranges `|values|`, each carrying `cell_measure`.
    pub fn from_values(values: &[f64], cell_measure: f64) -> Self {
        let mut abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        abs.sort_unstable_by(|a, b| b.total_cmp(a));
        let cutoff = abs.first().copied().unwrap_or(0.0) * ZERO_THRESHOLD;
        let mut plateaus: Vec<Plateau> = Vec::new();
        let mut i = 0;
        while i < abs.len() {
            let v = abs[i];
            if v <= cutoff || v == 0.0 {
                break;
            }
            let run = abs[i..].iter().take_while(|&&w| w == v).count();
            plateaus.push(Plateau {
                value: v,
                measure: run as f64 * cell_measure,
            });
            i += run;
        }
        StepFunction { plateaus }
    }

    pub fn plateaus(&self) -> &[Plateau] {
        &self.plateaus
    }

    pub fn is_zero(&self) -> bool {
        self.plateaus.is_empty()
    }

    pub fn max_value(&self) -> f64 {
        self.plateaus.first().map_or(0.0, |p| p.value)
    }

    /// Measure of the support.
    pub fn total_measure(&self) -> f64 {
        self.plateaus.iter().map(|p| p.measure).sum()
    }

    /// `f*(t)` with right-continuous steps.
    pub fn eval(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for p in &self.plateaus {
            acc += p.measure;
            if t < acc {
                return p.value;
            }
        }
        0.0
    }

    /// `(∫ f*^p dt)^{1/p}`; `p = ∞` gives the sup.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.max_value();
        }
        self.plateaus
            .iter()
            .map(|pl| pl.value.powf(p) * pl.measure)
            .sum::<f64>()
            .powf(1.0 / p)
    }

    /// Unnormalized Lorentz norm, exact per plateau.
    pub fn lorentz_norm(&self, p: f64, q: f64) -> f64 {
        let top = self.max_value();
        if top == 0.0 {
            return 0.0;
        }
        if q.is_infinite() {
            let mut acc = 0.0;
            let mut best = 0.0f64;
            for pl in &self.plateaus {
                acc += pl.measure;
                best = best.max(acc.powf(1.0 / p) * pl.value);
            }
            return best;
        }
        if q == p {
            return self.lp_norm(p);
        }
        let a = q / p;
        let mut prev = 0.0f64;
        let mut sum = 0.0;
        for pl in &self.plateaus {
            // T_k^a - T_{k-1}^a without cancellation
            let increment = if prev == 0.0 {
                pl.measure.powf(a)
            } else {
                prev.powf(a) * (a * (pl.measure / prev).ln_1p()).exp_m1()
            };
            sum += (pl.value / top).powf(q) * increment;
            prev += pl.measure;
        }
        top * (p / q * sum).powf(1.0 / q)
    }

    /// Lorentz norm with the `(q/p)^{1/q}` normalization, under which the
    /// norm is nonincreasing in `q` on all of `[1, ∞]`.
    pub fn lorentz_norm_normalized(&self, p: f64, q: f64) -> f64 {
        if q.is_infinite() {
            return self.lorentz_norm(p, q);
        }
        (q / p).powf(1.0 / q) * self.lorentz_norm(p, q)
    }

    /// Writes `value, measure, cumulative_measure` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["value", "measure", "cumulative_measure"])?;
        let mut acc = 0.0;
        for p in &self.plateaus {
            acc += p.measure;
            w.write_record([p.value.to_string(), p.measure.to_string(), acc.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Decreasing rearrangement of `|f|` over the interior cells.
pub fn decreasing_rearrangement(f: &ScalarField) -> StepFunction {
    StepFunction::from_values(f.interior(), f.domain().cell_volume())
}

/// `(Σ_interior |f|^p h^n)^{1/p}` for `p ≥ 1` (`p = ∞` allowed).
pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::param(format!("L^p norm needs p >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(f.interior().iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let vol = f.domain().cell_volume();
    let sum: f64 = f.interior().iter().map(|v| v.abs().powf(p)).sum();
    Ok((sum * vol).powf(1.0 / p))
}

/// Unnormalized Lorentz norm `‖f‖_{p,q}` for `p > 1`, `q ∈ [1, ∞]`.
pub fn lorentz_norm(f: &ScalarField, p: f64, q: f64) -> Result<f64> {
    check_lorentz_exponents(p, q)?;
    Ok(decreasing_rearrangement(f).lorentz_norm(p, q))
}

fn check_lorentz_exponents(p: f64, q: f64) -> Result<()> {
    if !(p > 1.0) || p.is_infinite() {
        return Err(Error::param(format!("Lorentz norm needs 1 < p < ∞, got p = {p}")));
    }
    if !(q >= 1.0) {
        return Err(Error::param(format!("Lorentz norm needs q >= 1, got q = {q}")));
    }
    Ok(())
}
