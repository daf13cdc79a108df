//! Reducing Legendre transformations: static MaxEnt reduction of a kinetic
//! entropy, its Legendre back-transform, flux reductions and the diffusion
//! closure built from them.

mod diffusion;
mod flux;
mod legendre;

pub use diffusion::{
    diffusion_rhs, diffusion_scenario, entropy_production, entropy_rate_diagnostic, DiffusionClosure,
    DiffusionProblem, DiffusionRun, EntropyRateReport, EntropyRateStatus, FieldFunctional,
    LogDensityEntropy, QuadraticDensityEntropy,
};
pub use flux::{
    reduce_flux, DiffusionFluxEntropy, FluxClosure, FluxEntropy, FluxMap, FluxOptions, VelocityMoment,
};
pub use legendre::{
    legendre_involution_check, multiplier_grid, DualPoint, DualRelation, LegendreOptions, LegendrePoint, LegendreReport,
    MaxEntProblem,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{Functional, ThermoPotential};
use crate::grid::DistFn;
use crate::scalar::Real;

/// Solver settings for [`reduce_static`].
#[derive(Debug, Clone, Copy)]
pub struct ReductionOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Number of random perturbations tried by the minimality spot-check.
    /// Zero disables it.
    pub minimality_samples: usize,
    pub seed: u64,
}

impl ReductionOptions {
    /// Tolerance for quadratic potentials.
    pub fn quadratic() -> Self {
        Self {
            tol: 1e-10,
            ..Self::default()
        }
    }
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            minimality_samples: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReductionResult<T> {
    pub minimizer: DistFn<T>,
    /// `Φ(x̂) = S*(E*, N*)`.
    pub dual_value: T,
    pub multipliers: Vec<(String, T)>,
    pub residual_norm: T,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// Perturbations that lowered `Φ` below the returned value.
    pub minimality_violations: usize,
}

/// Scalar summary of a reduction, for JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionSummary {
    pub dual_value: f64,
    pub multipliers: Vec<(String, f64)>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub minimality_violations: usize,
}

impl<T: Real> ReductionResult<T> {
    pub fn summary(&self) -> ReductionSummary {
        ReductionSummary {
            dual_value: self.dual_value.as_f64(),
            multipliers: self.multipliers.iter().map(|(n, v)| (n.clone(), v.as_f64())).collect(),
            residual_norm: self.residual_norm.as_f64(),
            iterations: self.iterations,
            minimality_violations: self.minimality_violations,
        }
    }
}

fn norm<T: Real>(g: &DistFn<T>) -> Result<T> {
    Ok(g.inner(g)?.sqrt())
}

/// Minimizes `Φ = -S + E* E + N* N` starting from `x0`.
///
/// Damped Newton with the diagonal Hessian when the potential provides one,
/// plain gradient descent otherwise. Steps that leave the domain of `Φ` are
/// clipped component-wise so positive entries stay positive, then
/// backtracked with an Armijo test on `Φ`.
pub fn reduce_static<T: Real>(
    phi: &ThermoPotential<T>,
    x0: &DistFn<T>,
    options: &ReductionOptions,
) -> Result<ReductionResult<T>> {
    const SOLVER: &str = "reduce_static";
    let tol = T::of(options.tol);
    let mut x = x0.clone();
    let mut value = phi.value(&x)?;
    let mut history = Vec::new();
    let mut best = (T::infinity(), x.clone());
    let slack = T::of(64.0) * T::epsilon();

    for iter in 0..=options.max_iter {
        let g = phi.derivative(&x)?;
        let res = norm(&g)?;
        history.push(res.as_f64());
        if res < best.0 {
            best = (res, x.clone());
        }
        if res <= tol {
            let minimality_violations = minimality_check(phi, &x, value, options)?;
            return Ok(ReductionResult {
                minimizer: x,
                dual_value: value,
                multipliers: vec![("E*".into(), phi.e_star), ("N*".into(), phi.n_star)],
                residual_norm: res,
                iterations: iter,
                residual_history: history,
                minimality_violations,
            });
        }
        if iter == options.max_iter {
            break;
        }

        let newton = match phi.hessian_diagonal(&x) {
            Some(h) => {
                let h = h?;
                if h.values().iter().all(|&d| d > T::zero() && d.is_finite()) {
                    Some(g.zip_map(&h, |gi, hi| -gi / hi)?)
                } else {
                    None
                }
            }
            None => None,
        };
        let mut step = newton.unwrap_or_else(|| g.map(|gi| -gi));
        let mut slope = g.inner(&step)?;
        if !(slope < T::zero()) {
            step = g.map(|gi| -gi);
            slope = g.inner(&step)?;
        }

        let mut alpha = T::one();
        let mut clipped = false;
        let accepted = loop {
            if alpha < T::of(1e-12) {
                return Err(Error::StepFloor {
                    solver: SOLVER,
                    step: alpha.as_f64(),
                });
            }
            let trial = x.zip_map(&step, |a, d| a + alpha * d)?;
            match phi.value(&trial) {
                Ok(v) if v.is_finite() => {
                    let armijo = value + T::of(1e-4) * alpha * slope;
                    if v <= armijo + slack * value.abs().max(T::one()) {
                        break (trial, v);
                    }
                    alpha *= T::of(0.5);
                }
                Ok(_) | Err(Error::Domain { .. }) if !clipped => {
                    // Keep positive entries positive: a Newton step on an
                    // entropic potential overshoots zero in the far tails.
                    let floor = T::of(0.99);
                    step = step.zip_map(&x, |d, a| if a > T::zero() { d.max(-floor * a) } else { d })?;
                    slope = g.inner(&step)?;
                    clipped = true;
                }
                Ok(_) | Err(Error::Domain { .. }) => alpha *= T::of(0.5),
                Err(e) => return Err(e),
            }
        };
        x = accepted.0;
        value = accepted.1;
    }

    Err(Error::NoConvergence {
        solver: SOLVER,
        iterations: options.max_iter,
        residual: best.0.as_f64(),
        best_iterate: best.1.values().iter().map(|v| v.as_f64()).collect(),
        residual_history: history,
    })
}

/// Counts random small perturbations `δ` with `Φ(x̂ + δ) < Φ(x̂)`.
fn minimality_check<T: Real>(
    phi: &ThermoPotential<T>,
    x: &DistFn<T>,
    value: T,
    options: &ReductionOptions,
) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let slack = T::of(1e3) * T::epsilon() * value.abs().max(T::one());
    let mut violations = 0;
    for _ in 0..options.minimality_samples {
        let scale = T::of(1e-3);
        let trial = x.map(|a| {
            let u: f64 = rng.gen_range(-1.0..1.0);
            a + scale * T::of(u) * (a.abs() + T::of(1e-3))
        });
        match phi.value(&trial) {
            Ok(v) if v < value - slack => violations += 1,
            _ => {}
        }
    }
    Ok(violations)
}
