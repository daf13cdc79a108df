//! Hydrodynamics with self-diffusion obtained by substituting the
//! leading-order distribution back into the regularized hierarchy.
//!
//! Diffusive fluxes are built on spatial faces from face differences and
//! face means so that the Laplacian-like terms use a compact stencil.

use super::{euler_part, pointwise, positive_temperature};
use crate::error::{Error, Result};
use crate::functionals::{EntropyDensity, ExtendedEnergy};
use crate::grid::{d_dr_dist, d_dv_conjugate, r_face_divergence, DistFn, ExtendedState, HydroFields, ScalarField};
use crate::scalar::{ordered_sum, Real};

#[derive(Debug, Clone, Copy, Default)]
pub struct ReducedOptions {
    /// Keep the off-diagonal couplings dropped by the diagonal closure.
    pub off_diagonal: bool,
}

#[derive(Debug, Clone)]
pub struct ReducedRates<T> {
    pub rhs: HydroFields<T>,
    /// Kinetic equation of the reduced system, for transporting the closure.
    pub f_rhs: DistFn<T>,
    /// Mass flux beyond advection, on faces `i + 1/2`.
    pub extra_mass_flux: Vec<T>,
    /// `∫dv f v² / Λ` per cell.
    pub viscosity: ScalarField<T>,
    /// `J^(s)` on faces.
    pub entropy_flux: Vec<T>,
    /// `σ_s` per cell.
    pub production: ScalarField<T>,
}

pub fn reduced_hydro_rhs<T: Real>(
    x: &ExtendedState<T>,
    energy: &dyn ExtendedEnergy<T>,
    eta: &dyn EntropyDensity<T>,
    lambda: T,
    options: &ReducedOptions,
) -> Result<ReducedRates<T>> {
    if !(lambda > T::zero()) {
        return Err(Error::param("lambda", "must be positive"));
    }
    let grid = x.grid();
    let (n_r, n_v) = (grid.n_r(), grid.n_v());
    let dr = grid.dr();
    let half = T::of(0.5);
    let c = energy.conjugates(x)?;
    positive_temperature(&c.e_s)?;
    let eps = energy.euler_density(x)?;
    let euler = euler_part(&x.rho, &x.u, &x.s, &c.e_rho, &c.e_u, &c.e_s, &eps)?;

    let eta_v = pointwise(&x.f, "entropy density eta", |y| eta.eta(y))?;
    let eta_f = pointwise(&x.f, "entropy density derivative eta_f", |y| eta.eta_prime(y))?;
    let (er, eu, es) = (c.e_rho.values(), c.e_u.values(), c.e_s.values());
    let q = |k: usize, i: usize| eta_f.values()[k] * es[i];

    let mut rho_flux = vec![T::zero(); n_r];
    let mut u_flux = vec![T::zero(); n_r];
    let mut s_flux = vec![T::zero(); n_r];
    let mut extra = vec![T::zero(); n_r];
    // σ_s contributions of each face, split evenly between its two cells.
    let mut face_production = vec![T::zero(); n_r];
    for i in 0..n_r {
        let ip = (i + 1) % n_r;
        let d_rho = (er[ip] - er[i]) / dr;
        let d_u = (eu[ip] - eu[i]) / dr;
        let mut m0 = Vec::with_capacity(n_v);
        let mut m2 = Vec::with_capacity(n_v);
        let mut off_rho = Vec::with_capacity(n_v);
        let mut off_u = Vec::with_capacity(n_v);
        let mut js = Vec::with_capacity(n_v);
        let mut sig = Vec::with_capacity(n_v);
        for j in 0..n_v {
            let v = grid.v(j);
            let (k, kp) = (grid.idx(i, j), grid.idx(ip, j));
            let fm = (x.f.values()[k] + x.f.values()[kp]) * half / lambda;
            let d_q = (q(kp, ip) - q(k, i)) / dr;
            let d_f = (c.e_f.values()[kp] - c.e_f.values()[k]) / dr;
            let force = d_rho + d_q + v * d_u + d_f;
            m0.push(fm);
            m2.push(fm * v * v);
            off_rho.push(fm * (d_q + v * d_u + d_f));
            off_u.push(fm * v * (d_rho + d_q + d_f));
            js.push(-(eta_v.values()[k] + eta_v.values()[kp]) * half * force / lambda);
            sig.push(fm * force * force);
        }
        let quad = |col: &[T]| grid.quad_v(col);
        let mut fr = d_rho * quad(&m0);
        let mut fu = d_u * quad(&m2);
        if options.off_diagonal {
            fr += quad(&off_rho);
            fu += quad(&off_u);
        }
        extra[i] = -fr;
        rho_flux[i] = fr;
        u_flux[i] = fu;
        s_flux[i] = quad(&js);
        face_production[i] = quad(&sig);
    }

    let mut viscosity = Vec::with_capacity(n_r);
    for i in 0..n_r {
        let col: Vec<T> = x.f.column(i).iter().enumerate().map(|(j, &f)| f * grid.v(j) * grid.v(j) / lambda).collect();
        let nu = grid.quad_v(&col);
        if !(nu >= T::zero()) {
            return Err(Error::Domain {
                what: "viscosity coefficient".into(),
                r: i,
                v: 0,
                value: nu.as_f64(),
            });
        }
        viscosity.push(nu);
    }

    let production: Vec<T> = (0..n_r)
        .map(|i| ordered_sum([face_production[i], face_production[(i + n_r - 1) % n_r]]) * half / es[i])
        .collect();
    let div = |faces: &[T]| r_face_divergence(faces, dr);
    let rho_dot: Vec<T> = euler.rho.values().iter().zip(div(&rho_flux)).map(|(a, b)| *a + b).collect();
    let u_dot: Vec<T> = euler.u.values().iter().zip(div(&u_flux)).map(|(a, b)| *a + b).collect();
    let s_dot: Vec<T> = euler
        .s
        .values()
        .iter()
        .zip(div(&s_flux))
        .zip(&production)
        .map(|((a, b), p)| *a - b + *p)
        .collect();

    // ∂_t f = -∂_r[f (E_u + ∂_v η_f E_s)] + ∂_r(f/Λ ∂_r E_f).
    let deta = d_dv_conjugate(&eta_f);
    let mut w = x.f.clone();
    for i in 0..n_r {
        for (j, y) in w.column_mut(i).iter_mut().enumerate() {
            *y *= eu[i] + deta.values()[grid.idx(i, j)] * es[i];
        }
    }
    let mut f_rhs = d_dr_dist(&w).map(|y| -y);
    for j in 0..n_v {
        let faces: Vec<T> = (0..n_r)
            .map(|i| {
                let ip = (i + 1) % n_r;
                let (k, kp) = (grid.idx(i, j), grid.idx(ip, j));
                (x.f.values()[k] + x.f.values()[kp]) * half / lambda * (c.e_f.values()[kp] - c.e_f.values()[k]) / dr
            })
            .collect();
        for (i, d) in div(&faces).into_iter().enumerate() {
            f_rhs.values_mut()[grid.idx(i, j)] += d;
        }
    }

    Ok(ReducedRates {
        rhs: HydroFields {
            rho: ScalarField::from_values(grid, rho_dot)?,
            u: ScalarField::from_values(grid, u_dot)?,
            s: ScalarField::from_values(grid, s_dot)?,
        },
        f_rhs,
        extra_mass_flux: extra,
        viscosity: ScalarField::from_values(grid, viscosity)?,
        entropy_flux: s_flux,
        production: ScalarField::from_values(grid, production)?,
    })
}
