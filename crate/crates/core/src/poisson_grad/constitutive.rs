//! Leading-order distribution from the balance
//! `∂_r E_ρ + ∂_r(η_f E_s) + v ∂_r E_u + ∂_r E_f = -Λ ∂_v E_f`.
//!
//! Read as an equation for `q = η_f E_s`, the balance is integrated along
//! `r` on spatial faces starting from the first cell of the supplied state.
//! A periodic solution exists only when the right-hand side integrates to
//! zero over the period; the mismatch on the wrap-around face is reported
//! rather than enforced.

use serde::Serialize;

use super::pointwise;
use crate::error::{Error, Result};
use crate::functionals::{AdditiveEnergy, EntropyDensity, ExtendedEnergy, KineticEntropyDensity};
use crate::grid::{d_dv_conjugate, DistFn, ExtendedState};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct ConstitutiveOptions {
    /// Under-relaxation `f ← (1-ω) f + ω F(f)`.
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ConstitutiveOptions {
    fn default() -> Self {
        Self {
            omega: 0.5,
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstitutiveSolution<T> {
    pub f: DistFn<T>,
    /// Largest balance defect over the interior spatial faces.
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    /// Balance defect on the face joining the last cell to the first.
    pub periodicity_defect: f64,
    /// Set when every hydrodynamic gradient vanishes, so the solution is
    /// fixed entirely by the anchor column and the `Λ ∂_v E_f` drift.
    pub boundary_dominated: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConstitutiveSummary {
    pub residual: f64,
    pub iterations: usize,
    pub periodicity_defect: f64,
    pub boundary_dominated: bool,
}

impl<T: Real> ConstitutiveSolution<T> {
    pub fn summary(&self) -> ConstitutiveSummary {
        ConstitutiveSummary {
            residual: self.residual,
            iterations: self.iterations,
            periodicity_defect: self.periodicity_defect,
            boundary_dominated: self.boundary_dominated,
        }
    }
}

/// Solves `η'(y) = target` for `y > 0`, Newton in `ln y` with a bracket.
fn invert_eta_prime<T: Real>(eta: &dyn EntropyDensity<T>, target: T, guess: T) -> Option<T> {
    let phi = |z: T| eta.eta_prime(z.exp()).map(|d| d - target);
    let mut z = if guess > T::zero() { guess.ln() } else { T::zero() };
    let f0 = phi(z)?;
    if f0 == T::zero() {
        return Some(z.exp());
    }
    // Bracket the root by stepping in the descending direction.
    let slope = eta.eta_second(z.exp())? * z.exp();
    if slope == T::zero() {
        return None;
    }
    let dir = if (f0 > T::zero()) == (slope > T::zero()) { -T::one() } else { T::one() };
    let mut step = T::one();
    let (mut lo, mut hi) = (z, z);
    for _ in 0..200 {
        let trial = z + dir * step;
        let ft = phi(trial)?;
        if (ft > T::zero()) != (f0 > T::zero()) {
            if dir > T::zero() {
                lo = z;
                hi = trial;
            } else {
                lo = trial;
                hi = z;
            }
            break;
        }
        z = trial;
        step = step + step;
    }
    if lo == hi {
        return None;
    }
    let f_lo = phi(lo)?;
    let mut x = (lo + hi) * T::of(0.5);
    for _ in 0..200 {
        let fx = phi(x)?;
        if fx == T::zero() {
            break;
        }
        if (fx > T::zero()) == (f_lo > T::zero()) {
            lo = x;
        } else {
            hi = x;
        }
        let d = eta.eta_second(x.exp())? * x.exp();
        let newton = x - fx / d;
        let next = if newton > lo && newton < hi && d != T::zero() {
            newton
        } else {
            (lo + hi) * T::of(0.5)
        };
        if (next - x).abs() <= T::of(4.0) * T::epsilon() * x.abs().max(T::one()) {
            x = next;
            break;
        }
        x = next;
    }
    Some(x.exp())
}

struct Balance<T> {
    /// Per interior face `i + 1/2` (i < n_r - 1) and velocity.
    max_interior: T,
    wrap: T,
    /// Target `q = η_f E_s` per cell, integrated from cell 0.
    q: Vec<T>,
    hydro_gradient: T,
}

fn balance<T: Real>(
    x: &ExtendedState<T>,
    energy: &dyn ExtendedEnergy<T>,
    eta: &dyn EntropyDensity<T>,
    lambda: T,
    anchor: &[T],
) -> Result<Balance<T>> {
    let grid = x.grid();
    let (n_r, n_v) = (grid.n_r(), grid.n_v());
    let dr = grid.dr();
    let c = energy.conjugates(x)?;
    super::positive_temperature(&c.e_s)?;
    let eta_f = pointwise(&x.f, "entropy density derivative eta_f", |y| eta.eta_prime(y))?;
    let a_v = d_dv_conjugate(&c.e_f);
    let (er, eu, es) = (c.e_rho.values(), c.e_u.values(), c.e_s.values());
    let mut q = vec![T::zero(); grid.len()];
    q[..n_v].copy_from_slice(anchor);
    let mut max_interior = T::zero();
    let mut wrap = T::zero();
    for i in 0..n_r {
        let ip = (i + 1) % n_r;
        for j in 0..n_v {
            let v = grid.v(j);
            let (k, kp) = (grid.idx(i, j), grid.idx(ip, j));
            // Everything in the balance except ∂_r q, in integrated form.
            let drive = (er[ip] - er[i])
                + v * (eu[ip] - eu[i])
                + (c.e_f.values()[kp] - c.e_f.values()[k])
                + lambda * dr * (a_v.values()[k] + a_v.values()[kp]) * T::of(0.5);
            let dq = eta_f.values()[kp] * es[ip] - eta_f.values()[k] * es[i];
            let defect = ((dq + drive) / dr).abs();
            if ip == 0 {
                wrap = wrap.max(defect);
            } else {
                max_interior = max_interior.max(defect);
                q[kp] = q[k] - drive;
            }
        }
    }
    let grad = |a: &[T]| (0..n_r).fold(T::zero(), |m, i| m.max((a[(i + 1) % n_r] - a[i]).abs()));
    Ok(Balance {
        max_interior,
        wrap,
        q,
        hydro_gradient: grad(er).max(grad(eu)).max(grad(es)),
    })
}

/// Damped Picard iteration for the leading-order distribution at fixed
/// hydrodynamic fields. The first column of `x.f` anchors the integration.
pub fn constitutive_fixed_point<T: Real>(
    x: &ExtendedState<T>,
    energy: &dyn ExtendedEnergy<T>,
    eta: &dyn EntropyDensity<T>,
    lambda: T,
    options: &ConstitutiveOptions,
) -> Result<ConstitutiveSolution<T>> {
    const SOLVER: &str = "constitutive_fixed_point";
    if !(lambda > T::zero()) {
        return Err(Error::param("lambda", "must be positive"));
    }
    if !(options.omega > 0.0 && options.omega <= 1.0) {
        return Err(Error::param("omega", "must lie in (0, 1]"));
    }
    let grid = x.grid();
    let n_v = grid.n_v();
    let omega = T::of(options.omega);
    let es0 = energy.conjugates(x)?.e_s.values()[0];
    let anchor: Vec<T> = x.f.column(0)
        .iter()
        .enumerate()
        .map(|(j, &y)| {
            eta.eta_prime(y).map(|d| d * es0).ok_or(Error::Domain {
                what: "entropy density derivative eta_f".into(),
                r: 0,
                v: j,
                value: y.as_f64(),
            })
        })
        .collect::<Result<_>>()?;

    let mut state = x.clone();
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, state.f.clone());
    for iter in 0..=options.max_iter {
        let b = balance(&state, energy, eta, lambda, &anchor)?;
        let res = b.max_interior.as_f64();
        history.push(res);
        if res < best.0 {
            best = (res, state.f.clone());
        }
        if res <= options.tol {
            return Ok(ConstitutiveSolution {
                f: state.f,
                residual: res,
                residual_history: history,
                iterations: iter,
                periodicity_defect: b.wrap.as_f64(),
                boundary_dominated: b.hydro_gradient <= T::of(1e3) * T::epsilon(),
            });
        }
        if iter == options.max_iter || !res.is_finite() {
            break;
        }
        let es = energy.conjugates(&state)?.e_s;
        let mut next = state.f.clone();
        for (k, y) in next.values_mut().iter_mut().enumerate() {
            let target = b.q[k] / es.values()[k / n_v];
            let inv = invert_eta_prime(eta, target, *y).ok_or(Error::Domain {
                what: "inverse of eta_f".into(),
                r: k / n_v,
                v: k % n_v,
                value: target.as_f64(),
            })?;
            *y = (T::one() - omega) * *y + omega * inv;
        }
        state.f = next;
    }
    Err(Error::NoConvergence {
        solver: SOLVER,
        iterations: options.max_iter,
        residual: best.0,
        best_iterate: best.1.values().iter().map(|v| v.as_f64()).collect(),
        residual_history: history,
    })
}

/// Closed form for the additive energy and `η = -k_B f (ln(h³f) - 1)`:
/// `q_i = q_0 - (E_ρ,i - E_ρ,0) - v (E_u,i - E_u,0) - Λ (r_i - r_0) c_k v/m`
/// and `f = exp(-q / k_B T) / h³`.
pub fn explicit_constitutive_solution<T: Real>(
    x: &ExtendedState<T>,
    energy: &AdditiveEnergy<T>,
    eta: &KineticEntropyDensity<T>,
    lambda: T,
) -> Result<DistFn<T>> {
    let grid = x.grid();
    let c = energy.conjugates(x)?;
    super::positive_temperature(&c.e_s)?;
    let kin = energy.kinetic();
    let slope = kin.scale() / kin.mass();
    let h3 = eta.h.powi(3);
    let (er, eu, es) = (c.e_rho.values(), c.e_u.values(), c.e_s.values());
    let mut out = DistFn::zeros(grid);
    for j in 0..grid.n_v() {
        let v = grid.v(j);
        let f0 = x.f.at(0, j);
        if !(f0 > T::zero()) {
            return Err(Error::Domain {
                what: "anchor distribution".into(),
                r: 0,
                v: j,
                value: f0.as_f64(),
            });
        }
        let q0 = -eta.k_b * (h3 * f0).ln() * es[0];
        for i in 0..grid.n_r() {
            let q = q0 - (er[i] - er[0]) - v * (eu[i] - eu[0]) - lambda * (grid.r(i) - grid.r(0)) * slope * v;
            out.values_mut()[grid.idx(i, j)] = (-q / (eta.k_b * es[i])).exp() / h3;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{FLnF, PhysicalConstants};
    use crate::grid::{PhaseGrid, ScalarField};

    fn setup(amp: f64) -> (ExtendedState<f64>, AdditiveEnergy<f64>, KineticEntropyDensity<f64>) {
        let grid = PhaseGrid::<f64>::new(16, 24, 1.0, 4.0).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        let rho = ScalarField::from_fn(&grid, |r| 1.0 + amp * (tau * r).sin());
        let u = ScalarField::from_fn(&grid, |r| amp * (tau * r).cos());
        let s = ScalarField::from_fn(&grid, |r| 2.0 + amp * (tau * r).sin());
        let f = DistFn::from_fn(&grid, |_, v| (-v * v / 2.0).exp() / tau.sqrt());
        let x = ExtendedState::new(rho, u, s, f).unwrap();
        let energy = AdditiveEnergy::sackur_tetrode(PhysicalConstants::default(), 0.5, 0.5).unwrap();
        let eta = KineticEntropyDensity {
            k_b: 1.0,
            h: 1.0,
            floor: None,
        };
        (x, energy, eta)
    }

    #[test]
    fn iterate_matches_closed_form() {
        let (x, energy, eta) = setup(0.1);
        let sol = constitutive_fixed_point(&x, &energy, &eta, 0.3, &ConstitutiveOptions::default()).unwrap();
        let exact = explicit_constitutive_solution(&x, &energy, &eta, 0.3).unwrap();
        for (a, b) in sol.f.values().iter().zip(exact.values()) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
        assert!(!sol.boundary_dominated);
        assert!(sol.periodicity_defect > 0.0);
    }

    #[test]
    fn residual_decreases_monotonically() {
        let (x, energy, eta) = setup(0.1);
        let sol = constitutive_fixed_point(&x, &energy, &eta, 0.3, &ConstitutiveOptions::default()).unwrap();
        assert!(sol.residual_history.windows(2).all(|w| w[1] <= w[0]), "{:?}", sol.residual_history);
    }

    #[test]
    fn zero_gradients_are_boundary_dominated() {
        let (x, energy, eta) = setup(0.0);
        let sol = constitutive_fixed_point(&x, &energy, &eta, 0.3, &ConstitutiveOptions::default()).unwrap();
        assert!(sol.boundary_dominated);
    }

    #[test]
    fn iteration_cap_carries_history() {
        let (x, energy, eta) = setup(0.1);
        let opts = ConstitutiveOptions {
            max_iter: 3,
            ..Default::default()
        };
        match constitutive_fixed_point(&x, &energy, &eta, 0.3, &opts) {
            Err(Error::NoConvergence { residual_history, .. }) => assert_eq!(residual_history.len(), 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn eta_prime_inversion() {
        let eta = FLnF::<f64> { k_b: 1.0, floor: None };
        for target in [-5.0, -1.0, 0.0, 2.0, 10.0] {
            let y = invert_eta_prime(&eta, target, 1.0).unwrap();
            assert!((eta.eta_prime(y).unwrap() - target).abs() < 1e-12);
        }
    }
}
