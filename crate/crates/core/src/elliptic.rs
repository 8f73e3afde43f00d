//! Dirichlet Poisson solver and harmonic extension on grid domains.
//!
//! Solves `-Δ_h u = f` on interior cells with `u = g` on boundary cells, where
//! `Δ_h` is the `2n+1`-point stencil. The scaled system `h^2 (-Δ_h)` is
//! symmetric positive definite and is solved by conjugate gradients. Dot
//! products reduce in fixed chunks, so results do not depend on the worker
//! count.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::ScalarField;
use crate::geometry::{GridDomain, Slot};

pub const SCHEME: &str = "conjugate-gradient";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub scheme: String,
    pub iterations: usize,
    /// `‖f + Δ_h u‖_∞` over interior cells.
    pub residual_inf: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Absolute residual tolerance; defaults to `1e-8 max(1, ‖f‖_∞)`.
    pub tolerance: Option<f64>,
    pub max_iterations: usize,
    pub exec: Exec,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: None,
            max_iterations: 50_000,
            exec: Exec::default(),
        }
    }
}

const BOUNDARY_NEIGHBOR: u32 = u32::MAX;

struct Stencil {
    /// Interior slot of each axis neighbor, or `BOUNDARY_NEIGHBOR`.
    neighbors: Vec<u32>,
    width: usize,
}

impl Stencil {
    fn new(domain: &GridDomain) -> Self {
        let offsets = domain.neighbor_offsets();
        let width = offsets.len();
        let mut neighbors = Vec::with_capacity(width * domain.interior_cells().len());
        for &idx in domain.interior_cells() {
            for &o in &offsets {
                let nb = (idx as isize + o) as usize;
                neighbors.push(match domain.slot(nb) {
                    Slot::Interior(s) => s as u32,
                    _ => BOUNDARY_NEIGHBOR,
                });
            }
        }
        Stencil { neighbors, width }
    }

    /// `(A x)_i = 2n x_i - Σ_{interior nb} x_nb`.
    fn apply(&self, x: &[f64], out: &mut [f64], exec: Exec) {
        let w = self.width;
        exec.fill(out, |i| {
            let mut acc = w as f64 * x[i];
            for &nb in &self.neighbors[i * w..(i + 1) * w] {
                if nb != BOUNDARY_NEIGHBOR {
                    acc -= x[nb as usize];
                }
            }
            acc
        });
    }
}

/// Solves `-Δ_h u = f` with `u = g` on boundary cells.
///
/// `f` supplies interior values; `g` is aligned with
/// [`GridDomain::boundary_cells`].
pub fn solve_dirichlet(
    domain: &Arc<GridDomain>,
    f: &ScalarField,
    g: &[f64],
    opts: &SolverOptions,
) -> Result<(ScalarField, SolveDiagnostics)> {
    let n = domain.interior_cells().len();
    if f.interior().len() != n {
        return Err(Error::param("right-hand side does not match the domain"));
    }
    if g.len() != domain.boundary_cells().len() {
        return Err(Error::param("boundary data does not match the domain"));
    }
    if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
        return Err(Error::param(format!("non-finite boundary value {bad}")));
    }
    let exec = opts.exec;
    let h2 = domain.h() * domain.h();
    let f_inf = f.interior().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tolerance = opts.tolerance.unwrap_or(1e-8 * f_inf.max(1.0));
    let stencil = Stencil::new(domain);
    let offsets = domain.neighbor_offsets();

    // b = h^2 f + boundary contributions
    let mut b: Vec<f64> = f.interior().iter().map(|v| h2 * v).collect();
    for (i, &idx) in domain.interior_cells().iter().enumerate() {
        for &o in &offsets {
            if let Slot::Boundary(s) = domain.slot((idx as isize + o) as usize) {
                b[i] += g[s];
            }
        }
    }

    let start = if g.is_empty() {
        0.0
    } else {
        g.iter().sum::<f64>() / g.len() as f64
    };
    let mut x = vec![start; n];
    let mut ax = vec![0.0; n];
    let mut r = vec![0.0; n];
    let residual = |x: &[f64], ax: &mut [f64], r: &mut [f64]| -> f64 {
        stencil.apply(x, ax, exec);
        let mut worst = 0.0f64;
        for i in 0..n {
            r[i] = b[i] - ax[i];
            worst = worst.max(r[i].abs());
        }
        worst / h2
    };

    let mut res_inf = residual(&x, &mut ax, &mut r);
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = exec.chunked_sum(n, |i| r[i] * r[i]);
    let mut iterations = 0;
    while res_inf > tolerance {
        if iterations >= opts.max_iterations {
            return Err(Error::NoConvergence(SolveDiagnostics {
                scheme: SCHEME.into(),
                iterations,
                residual_inf: res_inf,
                tolerance,
            }));
        }
        iterations += 1;
        stencil.apply(&p, &mut ap, exec);
        let pap = exec.chunked_sum(n, |i| p[i] * ap[i]);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        let mut worst = 0.0f64;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            worst = worst.max(r[i].abs());
        }
        res_inf = worst / h2;
        if res_inf <= tolerance {
            // confirm against the true residual; restart if the recursion drifted
            res_inf = residual(&x, &mut ax, &mut r);
            if res_inf > tolerance {
                p.copy_from_slice(&r);
                rr = exec.chunked_sum(n, |i| r[i] * r[i]);
            }
            continue;
        }
        let rr_new = exec.chunked_sum(n, |i| r[i] * r[i]);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }

    let diagnostics = SolveDiagnostics {
        scheme: SCHEME.into(),
        iterations,
        residual_inf: res_inf,
        tolerance,
    };
    if res_inf > tolerance {
        return Err(Error::NoConvergence(diagnostics));
    }
    let u = ScalarField::new(domain.clone(), x, g.to_vec())?;
    Ok((u, diagnostics))
}

/// Discrete harmonic function with boundary values `g`.
pub fn harmonic_extension(
    domain: &Arc<GridDomain>,
    g: &[f64],
    opts: &SolverOptions,
) -> Result<(ScalarField, SolveDiagnostics)> {
    let zero = ScalarField::zeros(domain.clone());
    solve_dirichlet(domain, &zero, g, opts)
}

/// `max|u| ≤ max_∂|u| + max|u - φ|` with `φ` the harmonic extension of the
/// boundary trace of `u`. Returns `(max|u|, max_∂|u|, max|u - φ|)`.
pub fn reduction_check(u: &ScalarField, opts: &SolverOptions) -> Result<(f64, f64, f64)> {
    let (phi, _) = harmonic_extension(u.domain(), u.boundary(), opts)?;
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = u
        .interior()
        .iter()
        .zip(phi.interior())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok((sup(u.interior()), sup(u.boundary()), diff))
}
