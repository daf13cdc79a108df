use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{reduce_static, ReductionOptions};
use crate::error::{Error, Result};
use crate::functionals::{Functional, ThermoPotential};
use crate::grid::DistFn;
use crate::scalar::Real;

/// `S*(E*, N*)` together with its gradient `(E(x̂), N(x̂))` and the entropy
/// of the minimizer.
#[derive(Debug, Clone, Copy)]
pub struct DualPoint<T> {
    pub s_star: T,
    pub energy: T,
    pub number: T,
    pub entropy: T,
}

/// Anything that can evaluate the reduced relation at given multipliers.
pub trait DualRelation<T: Real>: Sync {
    fn dual(&self, e_star: T, n_star: T) -> Result<DualPoint<T>>;
}

impl<T: Real, F> DualRelation<T> for F
where
    F: Fn(T, T) -> Result<DualPoint<T>> + Sync,
{
    fn dual(&self, e_star: T, n_star: T) -> Result<DualPoint<T>> {
        self(e_star, n_star)
    }
}

/// MaxEnt reduction of `(S, E, N)` solved by [`reduce_static`] from a fixed
/// starting state.
#[derive(Clone)]
pub struct MaxEntProblem<T> {
    pub entropy: Arc<dyn Functional<T>>,
    pub energy: Arc<dyn Functional<T>>,
    pub number: Arc<dyn Functional<T>>,
    pub x0: DistFn<T>,
    pub options: ReductionOptions,
}

impl<T: Real> MaxEntProblem<T> {
    pub fn potential(&self, e_star: T, n_star: T) -> ThermoPotential<T> {
        ThermoPotential::new(
            Arc::clone(&self.entropy),
            Arc::clone(&self.energy),
            Arc::clone(&self.number),
            e_star,
            n_star,
        )
    }
}

impl<T: Real> DualRelation<T> for MaxEntProblem<T> {
    fn dual(&self, e_star: T, n_star: T) -> Result<DualPoint<T>> {
        let out = reduce_static(&self.potential(e_star, n_star), &self.x0, &self.options)?;
        let x = &out.minimizer;
        Ok(DualPoint {
            s_star: out.dual_value,
            energy: self.energy.value(x)?,
            number: self.number.value(x)?,
            entropy: self.entropy.value(x)?,
        })
    }
}

/// Tensor grid of multipliers, `E*` varying slowest.
pub fn multiplier_grid<T: Real>(e_range: (T, T), n_range: (T, T), n_e: usize, n_n: usize) -> Result<Vec<(T, T)>> {
    if n_e == 0 || n_n == 0 {
        return Err(Error::param("multiplier grid", "needs at least one point per axis"));
    }
    for (name, (lo, hi)) in [("E* range", e_range), ("N* range", n_range)] {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::param(name, "bounds must be finite with lo <= hi"));
        }
    }
    let axis = |(lo, hi): (T, T), n: usize| -> Vec<T> {
        if n == 1 {
            vec![lo]
        } else {
            (0..n).map(|k| lo + (hi - lo) * T::of_usize(k) / T::of_usize(n - 1)).collect()
        }
    };
    let es = axis(e_range, n_e);
    let ns = axis(n_range, n_n);
    Ok(es.iter().flat_map(|&e| ns.iter().map(move |&n| (e, n))).collect())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LegendrePoint {
    pub e_star: f64,
    pub n_star: f64,
    pub energy: f64,
    pub number: f64,
    /// `S(x̂)` evaluated directly on the minimizer.
    pub entropy_direct: f64,
    /// `min_{E*,N*} [-S* + E* E + N* N]`.
    pub entropy_back: f64,
    pub deviation: f64,
    pub relative_deviation: f64,
    pub recovered_e_star: f64,
    pub recovered_n_star: f64,
    pub iterations: usize,
    /// Whether the finite-difference Hessian of `-S*` was positive definite.
    pub convex: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LegendreReport {
    pub points: Vec<LegendrePoint>,
    pub max_deviation: f64,
    pub max_relative_deviation: f64,
    /// Indices of points whose dual sample was not convex.
    pub flagged: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct LegendreOptions {
    /// Step for the finite-difference Hessian of `S*`.
    pub fd_step: f64,
    /// Stop when `|∇G| <= tol · max(1, |E|, |N|)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Back-transform starts at `(E*, N*) + start_offset`.
    pub start_offset: (f64, f64),
}

impl Default for LegendreOptions {
    fn default() -> Self {
        Self {
            fd_step: 1e-3,
            tol: 1e-10,
            max_iter: 50,
            start_offset: (0.1, 0.1),
        }
    }
}

/// Transforms forward at every multiplier pair, then back, and compares the
/// recovered `S(E, N)` with the entropy of the minimizer.
pub fn legendre_involution_check<T: Real>(
    relation: &dyn DualRelation<T>,
    multipliers: &[(T, T)],
    options: &LegendreOptions,
) -> Result<LegendreReport> {
    let points = multipliers
        .par_iter()
        .map(|&(e_star, n_star)| -> Result<LegendrePoint> {
            let fwd = relation.dual(e_star, n_star)?;
            let start = (e_star + T::of(options.start_offset.0), n_star + T::of(options.start_offset.1));
            let back = back_transform(relation, fwd.energy, fwd.number, start, options)?;
            let deviation = (back.value - fwd.entropy).abs().as_f64();
            Ok(LegendrePoint {
                e_star: e_star.as_f64(),
                n_star: n_star.as_f64(),
                energy: fwd.energy.as_f64(),
                number: fwd.number.as_f64(),
                entropy_direct: fwd.entropy.as_f64(),
                entropy_back: back.value.as_f64(),
                deviation,
                relative_deviation: deviation / fwd.entropy.abs().as_f64().max(1.0),
                recovered_e_star: back.multipliers.0.as_f64(),
                recovered_n_star: back.multipliers.1.as_f64(),
                iterations: back.iterations,
                convex: back.convex,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_deviation = points.iter().map(|p| p.deviation).fold(0.0, f64::max);
    let max_relative_deviation = points.iter().map(|p| p.relative_deviation).fold(0.0, f64::max);
    let flagged = points.iter().enumerate().filter(|(_, p)| !p.convex).map(|(k, _)| k).collect();
    Ok(LegendreReport {
        points,
        max_deviation,
        max_relative_deviation,
        flagged,
    })
}

struct BackTransform<T> {
    value: T,
    multipliers: (T, T),
    iterations: usize,
    convex: bool,
}

/// Newton on `G(E*, N*) = -S* + E* E + N* N`, whose gradient is
/// `(E - E(x̂), N - N(x̂))`.
fn back_transform<T: Real>(
    relation: &dyn DualRelation<T>,
    energy: T,
    number: T,
    start: (T, T),
    options: &LegendreOptions,
) -> Result<BackTransform<T>> {
    let g_of = |p: &DualPoint<T>, m: (T, T)| -p.s_star + m.0 * energy + m.1 * number;
    let h = T::of(options.fd_step);
    let scale = T::one().max(energy.abs()).max(number.abs());
    let tol = T::of(options.tol) * scale;
    let mut m = start;
    let mut p = relation.dual(m.0, m.1)?;
    let mut history = Vec::new();
    for iter in 0..=options.max_iter {
        let grad = (energy - p.energy, number - p.number);
        let gnorm = grad.0.abs().max(grad.1.abs());
        history.push(gnorm.as_f64());
        // Hessian of G is minus the Jacobian of (E(x̂), N(x̂)).
        let col = |de: T, dn: T| -> Result<(T, T)> {
            let a = relation.dual(m.0 + de, m.1 + dn)?;
            let b = relation.dual(m.0 - de, m.1 - dn)?;
            Ok((-(a.energy - b.energy) / (h + h), -(a.number - b.number) / (h + h)))
        };
        let (h11, h21) = col(h, T::zero())?;
        let (h12, h22) = col(T::zero(), h)?;
        let (h12, h21) = ((h12 + h21) * T::of(0.5), (h12 + h21) * T::of(0.5));
        let det = h11 * h22 - h12 * h21;
        let convex = h11 > T::zero() && det > T::zero();
        if gnorm <= tol {
            return Ok(BackTransform {
                value: g_of(&p, m),
                multipliers: m,
                iterations: iter,
                convex,
            });
        }
        if iter == options.max_iter {
            break;
        }
        let (d0, d1) = if det.abs() > T::epsilon() * (h11.abs() * h22.abs()).max(T::min_positive_value()) {
            ((-h22 * grad.0 + h12 * grad.1) / det, (h21 * grad.0 - h11 * grad.1) / det)
        } else {
            (-grad.0, -grad.1)
        };
        let g0 = g_of(&p, m);
        let mut alpha = T::one();
        loop {
            let trial = (m.0 + alpha * d0, m.1 + alpha * d1);
            let accepted = match relation.dual(trial.0, trial.1) {
                Ok(q) if g_of(&q, trial) <= g0 + T::of(1e-12) * g0.abs().max(T::one()) => Some(q),
                Ok(_) | Err(Error::NoConvergence { .. }) | Err(Error::StepFloor { .. }) => None,
                Err(e) => return Err(e),
            };
            if let Some(q) = accepted {
                m = trial;
                p = q;
                break;
            }
            alpha *= T::of(0.5);
            if alpha < T::of(1e-10) {
                return Err(Error::StepFloor {
                    solver: "legendre back-transform",
                    step: alpha.as_f64(),
                });
            }
        }
    }
    Err(Error::NoConvergence {
        solver: "legendre back-transform",
        iterations: options.max_iter,
        residual: history.last().copied().unwrap_or(f64::NAN),
        best_iterate: vec![m.0.as_f64(), m.1.as_f64()],
        residual_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{LinearFunctional, QuadraticEntropy};
    use crate::grid::PhaseGrid;

    fn quadratic_problem() -> (MaxEntProblem<f64>, DistFn<f64>, DistFn<f64>, DistFn<f64>) {
        let grid = PhaseGrid::<f64>::new(2, 10, 1.0, 2.0).unwrap();
        let c = DistFn::from_fn(&grid, |r, v| 0.5 + r - 0.1 * v);
        let a = DistFn::from_fn(&grid, |_, v| v * v / 2.0);
        let b = DistFn::constant(&grid, 1.0);
        let problem = MaxEntProblem {
            entropy: Arc::new(QuadraticEntropy::centered_at(c.clone())),
            energy: Arc::new(LinearFunctional::new("a", a.clone())),
            number: Arc::new(LinearFunctional::new("b", b.clone())),
            x0: DistFn::zeros(&grid),
            options: ReductionOptions::quadratic(),
        };
        (problem, a, b, c)
    }

    #[test]
    fn quadratic_double_transform_is_exact() {
        let (problem, ..) = quadratic_problem();
        let grid = multiplier_grid((0.0, 1.0), (-0.5, 0.5), 3, 3).unwrap();
        let report = legendre_involution_check(&problem, &grid, &LegendreOptions::default()).unwrap();
        assert!(report.max_deviation < 1e-12, "{}", report.max_deviation);
        assert!(report.flagged.is_empty());
        for p in &report.points {
            assert!((p.recovered_e_star - p.e_star).abs() < 1e-8);
            assert!((p.recovered_n_star - p.n_star).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_multipliers_recover_global_maximum() {
        let (problem, ..) = quadratic_problem();
        let report = legendre_involution_check(&problem, &[(0.0, 0.0)], &LegendreOptions::default()).unwrap();
        // The maximum of -½‖x - c‖² is zero.
        assert!(report.points[0].entropy_back.abs() < 1e-12);
    }

    #[test]
    fn closure_relations_are_accepted() {
        // S(E) = -½E² has S*(E*) = ½E*²... in the potential convention
        // S* = min_E [-S + E* E] = -½E*².
        let rel = |e: f64, n: f64| -> Result<DualPoint<f64>> {
            Ok(DualPoint {
                s_star: -0.5 * e * e - 0.5 * n * n,
                energy: -e,
                number: -n,
                entropy: -0.5 * e * e - 0.5 * n * n,
            })
        };
        let report = legendre_involution_check(&rel, &[(0.3, -0.2)], &LegendreOptions::default()).unwrap();
        assert!(report.max_deviation < 1e-12);
    }

    #[test]
    fn malformed_grid_is_rejected() {
        assert!(multiplier_grid((1.0, 0.0), (0.0, 1.0), 2, 2).is_err());
        assert!(multiplier_grid((0.0, 1.0), (0.0, 1.0), 0, 2).is_err());
        assert_eq!(multiplier_grid((0.0, 1.0), (0.0, 1.0), 5, 5).unwrap().len(), 25);
    }
}
