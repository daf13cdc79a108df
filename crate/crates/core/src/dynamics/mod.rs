//! Time evolution on the kinetic phase space: the Hamiltonian vector field of
//! the kinetic Poisson bracket, gradient flows generated by dissipation
//! potentials, their GENERIC sum, and a fixed-step integrator.

mod diagnostics;
mod integrator;

pub use diagnostics::Diagnostics;
pub use integrator::{evolve, Evolution, Integrator, Scheme};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::functionals::{DissipationPotential, FokkerPlanckDissipation, Functional};
use crate::grid::{d_dr_dist, d_dv_conjugate, face_mean, DistFn, PhaseGrid, VelocityFlux};
use crate::scalar::{ordered_sum, Real};

/// `{A, B} = ∫dr ∫dv f (∂_r A_f ∂_v B_f - ∂_r B_f ∂_v A_f)`.
#[derive(Debug, Clone)]
pub struct KineticBracket<T> {
    grid: Arc<PhaseGrid<T>>,
}

impl<T: Real> KineticBracket<T> {
    pub fn new(grid: &Arc<PhaseGrid<T>>) -> Self {
        Self {
            grid: Arc::clone(grid),
        }
    }

    pub fn grid(&self) -> &Arc<PhaseGrid<T>> {
        &self.grid
    }

    /// Bracket of two functionals given their derivatives `A_f`, `B_f`.
    pub fn evaluate(&self, a_f: &DistFn<T>, b_f: &DistFn<T>, f: &DistFn<T>) -> Result<T> {
        for x in [a_f, b_f, f] {
            if !x.grid().compatible(&self.grid) {
                return Err(Error::GridMismatch("KineticBracket::evaluate"));
            }
        }
        let (ar, av) = (d_dr_dist(a_f), d_dv_conjugate(a_f));
        let (br, bv) = (d_dr_dist(b_f), d_dv_conjugate(b_f));
        let g = &self.grid;
        let n_v = g.n_v();
        let w = g.v_weights();
        let per_r = (0..g.n_r()).map(|i| {
            ordered_sum((0..n_v).map(|j| {
                let k = i * n_v + j;
                let (fa, fb) = (ar.values()[k] * bv.values()[k], br.values()[k] * av.values()[k]);
                f.values()[k] * (fa - fb) * w[j]
            }))
        });
        Ok(ordered_sum(per_r) * g.dr())
    }

    /// `∂f/∂t = -∂_r(f ∂_v E_f) + ∂_v(f ∂_r E_f)` in flux form: the spatial
    /// flux is differenced centrally, the velocity flux lives on faces with
    /// zero flux through the walls.
    pub fn vector_field(&self, f: &DistFn<T>, e_f: &DistFn<T>) -> Result<DistFn<T>> {
        if !f.grid().compatible(&self.grid) || !e_f.grid().compatible(&self.grid) {
            return Err(Error::GridMismatch("KineticBracket::vector_field"));
        }
        let e_fv = d_dv_conjugate(e_f);
        let e_fr = d_dr_dist(e_f);
        let transport = d_dr_dist(&f.zip_map(&e_fv, |a, b| a * b)?);
        let mut out = transport.map(|y| -y);
        if e_fr.max_abs() > T::zero() {
            let flux = VelocityFlux::from_faces(f.grid(), |i, j| {
                face_mean(f.column(i), j) * face_mean(e_fr.column(i), j)
            });
            let force = flux.divergence();
            for (o, &d) in out.values_mut().iter_mut().zip(force.values()) {
                *o += d;
            }
        }
        Ok(out)
    }
}

/// Hamiltonian kinetic vector field generated by `energy`.
pub fn hamiltonian_rhs<T: Real>(f: &DistFn<T>, energy: &dyn Functional<T>) -> Result<DistFn<T>> {
    KineticBracket::new(f.grid()).vector_field(f, &energy.derivative(f)?)
}

/// `-Ξ_{x*}(x, x*)` at `x* = Φ_x(x)`.
pub fn gradient_rhs<T: Real>(
    x: &DistFn<T>,
    xi: &dyn DissipationPotential<T>,
    phi: &dyn Functional<T>,
) -> Result<DistFn<T>> {
    let x_star = phi.derivative(x)?;
    Ok(xi.derivative(x, &x_star)?.map(|y| -y))
}

/// `∂_v(Λ f ∂_v f*)` with `f* = Φ_f`. Identical to [`gradient_rhs`] with the
/// Fokker-Planck potential; kept separate because the sign of the
/// dissipative term is the one place mutation fixtures reach into.
pub fn fokker_planck_rhs<T: Real>(
    f: &DistFn<T>,
    fp: &FokkerPlanckDissipation<T>,
    phi: &dyn Functional<T>,
) -> Result<DistFn<T>> {
    let f_star = phi.derivative(f)?;
    Ok(fp.face_flux(f, &f_star)?.divergence())
}

/// Hamiltonian part plus, when present, the gradient part.
pub fn generic_rhs<T: Real>(
    f: &DistFn<T>,
    energy: &dyn Functional<T>,
    xi: Option<&dyn DissipationPotential<T>>,
    phi: &dyn Functional<T>,
) -> Result<DistFn<T>> {
    let mut out = hamiltonian_rhs(f, energy)?;
    if let Some(xi) = xi {
        let g = gradient_rhs(f, xi, phi)?;
        for (o, &d) in out.values_mut().iter_mut().zip(g.values()) {
            *o += d;
        }
    }
    Ok(out)
}

/// Fraction of the mass sitting in the two wall cells of each column. A
/// large value means the velocity cutoff is too small for the data.
pub fn wall_mass_fraction<T: Real>(f: &DistFn<T>) -> T {
    let g = f.grid();
    let n_v = g.n_v();
    let w = g.v_weights();
    let wall = ordered_sum((0..g.n_r()).map(|i| {
        let c = f.column(i);
        c[0].abs() * w[0] + c[n_v - 1].abs() * w[n_v - 1]
    }));
    let total = ordered_sum(f.values().iter().map(|x| x.abs())) * g.dv();
    if total > T::zero() {
        wall / total
    } else {
        T::zero()
    }
}

/// Largest stable RK4/Euler step for central free transport.
pub fn transport_dt_max<T: Real>(grid: &PhaseGrid<T>, m: T, scheme: Scheme) -> T {
    scheme.imaginary_limit::<T>() * grid.dr() * m / grid.v_max()
}

/// Largest stable step for the Fokker-Planck operator with mobility
/// `lambda` and inverse temperature `e_star`, from its diffusion and drift
/// parts.
pub fn fokker_planck_dt_max<T: Real>(grid: &PhaseGrid<T>, lambda: T, e_star: T, scheme: Scheme) -> T {
    let dv = grid.dv();
    let rate = T::of(4.0) * lambda / (dv * dv) + lambda * e_star.abs() * grid.v_max() / dv;
    scheme.real_limit::<T>() / rate
}
