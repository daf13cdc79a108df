//! Zeroth-order Chapman-Enskog balance between the momentum-gradient force
//! and Fokker-Planck relaxation in velocity.

use serde::Serialize;

use crate::dynamics::{evolve, Integrator};
use crate::error::{Error, Result};
use crate::functionals::{FokkerPlanckDissipation, Functional};
use crate::grid::{d_dv_conjugate, face_mean, integrate_v, DistFn, PhaseGrid, ScalarField, VelocityFlux};
use crate::scalar::{ordered_sum, Real};

fn face_flux<T: Real>(
    f: &DistFn<T>,
    f_star: &DistFn<T>,
    g: &ScalarField<T>,
    fp: &FokkerPlanckDissipation<T>,
) -> Result<VelocityFlux<T>> {
    if !f.grid().compatible(g.grid()) || !f.grid().compatible(f_star.grid()) {
        return Err(Error::GridMismatch("chapman-enskog face flux"));
    }
    let grid = f.grid();
    let dv = grid.dv();
    Ok(VelocityFlux::from_faces(grid, |i, j| {
        let col = f_star.column(i);
        let v = grid.v_face(j + 1);
        face_mean(f.column(i), j) * (fp.mobility().at(v) * (col[j + 1] - col[j]) / dv - v * g.values()[i])
    }))
}

/// `∂_t f = -∂_v(f v g) + ∂_v(f Λ ∂_v f*)` with `g = ∂_r E_u` and
/// `f* = Φ_f` taken from `f_conjugate`.
pub fn ce_zeroth_rhs<T: Real>(
    f: &DistFn<T>,
    g: &ScalarField<T>,
    fp: &FokkerPlanckDissipation<T>,
    f_conjugate: &dyn Functional<T>,
) -> Result<DistFn<T>> {
    let f_star = f_conjugate.derivative(f)?;
    Ok(face_flux(f, &f_star, g, fp)?.divergence())
}

/// `Ψ(f*) = -½ ∫dr Σ Λ f̄ (Δf*)²/dv + ∫dr Σ f̄ v g Δf*` at fixed `f`.
/// Its gradient in `f*` is [`ce_zeroth_rhs`].
pub fn ce_potential<T: Real>(
    f: &DistFn<T>,
    f_star: &DistFn<T>,
    g: &ScalarField<T>,
    fp: &FokkerPlanckDissipation<T>,
) -> Result<T> {
    if !f.grid().compatible(g.grid()) || !f.grid().compatible(f_star.grid()) {
        return Err(Error::GridMismatch("ce_potential"));
    }
    let grid = f.grid();
    let dv = grid.dv();
    let half = T::of(0.5);
    let per_r = (0..grid.n_r()).map(|i| {
        let col = f_star.column(i);
        let gi = g.values()[i];
        ordered_sum((0..grid.n_v().saturating_sub(1)).map(|j| {
            let v = grid.v_face(j + 1);
            let d = col[j + 1] - col[j];
            let fm = face_mean(f.column(i), j);
            -half * fp.mobility().at(v) * fm * d * d / dv + fm * v * gi * d
        }))
    });
    Ok(ordered_sum(per_r) * grid.dr())
}

/// Discrete stationary solution for the entropic conjugate
/// `f* = ln f + 1 + E* v²/2 + N*`: a Gaussian of temperature
/// `1/(E* - g/Λ)` in every column, normalized to `density`.
pub fn ce_fixed_point<T: Real>(
    grid: &std::sync::Arc<PhaseGrid<T>>,
    g: &ScalarField<T>,
    lambda: T,
    e_star: T,
    density: &ScalarField<T>,
) -> Result<DistFn<T>> {
    if !(lambda > T::zero()) {
        return Err(Error::param("lambda", "must be positive"));
    }
    if !grid.compatible(g.grid()) || !grid.compatible(density.grid()) {
        return Err(Error::GridMismatch("ce_fixed_point"));
    }
    let mut f = DistFn::zeros(grid);
    for i in 0..grid.n_r() {
        let beta = e_star - g.values()[i] / lambda;
        if !(beta > T::zero()) {
            return Err(Error::Domain {
                what: "effective inverse temperature E* - g/Lambda".into(),
                r: i,
                v: 0,
                value: beta.as_f64(),
            });
        }
        let col = f.column_mut(i);
        for (j, y) in col.iter_mut().enumerate() {
            let v = grid.v(j);
            *y = (-beta * v * v * T::of(0.5)).exp();
        }
        let mass = grid.quad_v(col);
        let n = density.values()[i] / mass;
        col.iter_mut().for_each(|y| *y *= n);
    }
    Ok(f)
}

/// Integrates [`ce_zeroth_rhs`] in pseudo-time and returns the final state
/// with the largest remaining rate.
pub fn ce_relax<T: Real>(
    f0: &DistFn<T>,
    g: &ScalarField<T>,
    fp: &FokkerPlanckDissipation<T>,
    f_conjugate: &dyn Functional<T>,
    integrator: &Integrator<T>,
    t_end: T,
) -> Result<(DistFn<T>, T)> {
    let run = evolve(
        f0.clone(),
        |f: &DistFn<T>| ce_zeroth_rhs(f, g, fp, f_conjugate),
        integrator,
        t_end,
        usize::MAX,
        |_, _, _| Ok(()),
    )?;
    let rate = ce_zeroth_rhs(&run.state, g, fp, f_conjugate)?.max_abs();
    Ok((run.state, rate))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ViscosityResult {
    /// `∫dv f v²`, averaged over cells.
    pub gamma: f64,
    /// `Γ / 2Λ`.
    pub nu: f64,
    /// Mismatch of `∫dv f v ∂_v f* = (Γ/Λ) g`, relative to the right-hand
    /// side, or absolute when `g` vanishes.
    pub closure_residual: f64,
}

pub fn viscosity_extract<T: Real>(
    f: &DistFn<T>,
    lambda: T,
    g: &ScalarField<T>,
    f_conjugate: &dyn Functional<T>,
) -> Result<ViscosityResult> {
    if !(lambda > T::zero()) {
        return Err(Error::param("lambda", "must be positive"));
    }
    let grid = f.grid();
    let v2 = DistFn::from_velocity_fn(grid, |v| v * v);
    let gamma_r = integrate_v(&f.zip_map(&v2, |a, b| a * b)?);
    let gamma = gamma_r.integral() / grid.length_r();
    if !(gamma > T::zero()) {
        return Err(Error::Domain {
            what: "second velocity moment Gamma".into(),
            r: 0,
            v: 0,
            value: gamma.as_f64(),
        });
    }
    let f_star = f_conjugate.derivative(f)?;
    let dfs = d_dv_conjugate(&f_star);
    let vel = DistFn::from_velocity_fn(grid, |v| v);
    let lhs = integrate_v(&f.zip_map(&vel, |a, b| a * b)?.zip_map(&dfs, |a, b| a * b)?);
    let rhs = gamma_r.zip_map(g, |gm, gi| gm / lambda * gi)?;
    let diff = lhs.zip_map(&rhs, |a, b| a - b)?.max_abs();
    let scale = rhs.max_abs();
    let closure_residual = if scale > T::zero() { diff / scale } else { diff };
    Ok(ViscosityResult {
        gamma: gamma.as_f64(),
        nu: (gamma / (lambda + lambda)).as_f64(),
        closure_residual: closure_residual.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Scheme;
    use crate::functionals::{boltzmann_entropy, KineticEnergy, Number, ThermoPotential};
    use std::sync::Arc;

    fn potential(e_star: f64) -> ThermoPotential<f64> {
        ThermoPotential::new(
            Arc::new(boltzmann_entropy(1.0, None)),
            Arc::new(KineticEnergy::new(1.0, 1.0).unwrap()),
            Arc::new(Number),
            e_star,
            0.0,
        )
    }

    #[test]
    fn fixed_point_has_zero_rate_and_expected_viscosity() {
        let grid = PhaseGrid::<f64>::new(4, 64, 1.0, 8.0).unwrap();
        let g = ScalarField::from_fn(&grid, |r| 5e-5 * (1.0 + r));
        let rho = ScalarField::constant(&grid, 1.0);
        let fp = FokkerPlanckDissipation::new(1.0).unwrap();
        let phi = potential(1.0);
        let f = ce_fixed_point(&grid, &g, 1.0, 1.0, &rho).unwrap();
        assert!(ce_zeroth_rhs(&f, &g, &fp, &phi).unwrap().max_abs() < 1e-13);
        let out = viscosity_extract(&f, 1.0, &g, &phi).unwrap();
        assert!(out.closure_residual < 1e-10, "{out:?}");
        assert!((out.nu - out.gamma / 2.0).abs() < 1e-15);
    }

    #[test]
    fn potential_gradient_is_the_rate() {
        let grid = PhaseGrid::<f64>::new(2, 12, 1.0, 4.0).unwrap();
        let f = DistFn::from_fn(&grid, |r, v| (1.0 + r) * (-(v - 0.3).powi(2)).exp() + 0.01);
        let g = ScalarField::from_fn(&grid, |r| 0.2 - r);
        let fp = FokkerPlanckDissipation::new(0.8).unwrap();
        let phi = potential(1.0);
        let fs = phi.derivative(&f).unwrap();
        let rate = ce_zeroth_rhs(&f, &g, &fp, &phi).unwrap();
        let h = 1e-6;
        let w = grid.dr() * grid.dv();
        for k in 0..f.len() {
            let mut p = fs.clone();
            p.values_mut()[k] += h;
            let mut m = fs.clone();
            m.values_mut()[k] -= h;
            let fd = (ce_potential(&f, &p, &g, &fp).unwrap() - ce_potential(&f, &m, &g, &fp).unwrap()) / (2.0 * h) / w;
            assert!((fd - rate.values()[k]).abs() < 1e-7, "{k}: {fd} vs {}", rate.values()[k]);
        }
    }

    #[test]
    fn relaxation_reaches_fixed_point() {
        let grid = PhaseGrid::<f64>::new(1, 32, 1.0, 6.0).unwrap();
        let g = ScalarField::constant(&grid, 0.2);
        let fp = FokkerPlanckDissipation::new(1.0).unwrap();
        let phi = potential(1.0);
        let f0 = DistFn::from_fn(&grid, |_, v| (-(v - 0.5).powi(2)).exp());
        let rho = integrate_v(&f0);
        let integ = Integrator::new(Scheme::Rk4, 0.005).unwrap();
        let (f, rate) = ce_relax(&f0, &g, &fp, &phi, &integ, 30.0).unwrap();
        assert!(rate < 1e-8, "{rate}");
        let exact = ce_fixed_point(&grid, &g, 1.0, 1.0, &rho).unwrap();
        for (a, b) in f.values().iter().zip(exact.values()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn overdriven_force_has_no_fixed_point() {
        let grid = PhaseGrid::<f64>::new(1, 8, 1.0, 4.0).unwrap();
        let g = ScalarField::constant(&grid, 2.0);
        let err = ce_fixed_point(&grid, &g, 1.0, 1.0, &ScalarField::constant(&grid, 1.0)).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
    }
}
