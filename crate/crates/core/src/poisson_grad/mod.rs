//! The Poisson-Grad hierarchy for `x = (ρ, u, s, f)` in one space and one
//! velocity dimension, its Fokker-Planck regularization, the zeroth
//! Chapman-Enskog equation, the constitutive fixed point and the reduced
//! hydrodynamics with self-diffusion.
//!
//! Spatial derivatives are central and periodic. Velocity fluxes live on
//! faces with zero flux through the walls, so `∫∫f`, `∫ρ` and `∫u` are
//! conserved to round-off.

mod ce;
mod constitutive;
mod reduced;

pub use ce::{ce_fixed_point, ce_potential, ce_relax, ce_zeroth_rhs, viscosity_extract, ViscosityResult};
pub use constitutive::{
    constitutive_fixed_point, explicit_constitutive_solution, ConstitutiveOptions, ConstitutiveSolution,
};
pub use reduced::{reduced_hydro_rhs, ReducedOptions, ReducedRates};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{EntropyDensity, ExtendedEnergy, FokkerPlanckDissipation, HydroEnergy};
use crate::grid::{
    d_dr, d_dr_dist, d_dv_conjugate, face_mean, integrate_v, DistFn, ExtendedState, HydroFields, ScalarField,
    VelocityFlux,
};
use crate::scalar::{ordered_sum, Real};

/// Applies `g` cell by cell, naming the first cell where it fails.
pub(crate) fn pointwise<T: Real>(f: &DistFn<T>, what: &str, g: impl Fn(T) -> Option<T>) -> Result<DistFn<T>> {
    let n_v = f.grid().n_v();
    let mut out = Vec::with_capacity(f.len());
    for (k, &x) in f.values().iter().enumerate() {
        match g(x) {
            Some(y) if y.is_finite() => out.push(y),
            _ => {
                return Err(Error::Domain {
                    what: what.into(),
                    r: k / n_v,
                    v: k % n_v,
                    value: x.as_f64(),
                })
            }
        }
    }
    DistFn::from_values(f.grid(), out)
}

/// Multiplies column `i` of `g` by `a_i`.
pub(crate) fn scale_columns<T: Real>(g: &DistFn<T>, a: &ScalarField<T>) -> DistFn<T> {
    let mut out = g.clone();
    for (i, &ai) in a.values().iter().enumerate() {
        out.column_mut(i).iter_mut().for_each(|x| *x *= ai);
    }
    out
}

pub(crate) fn positive_temperature<T: Real>(e_s: &ScalarField<T>) -> Result<()> {
    match e_s.values().iter().position(|&t| !(t > T::zero())) {
        Some(i) => Err(Error::Domain {
            what: "temperature E_s".into(),
            r: i,
            v: 0,
            value: e_s.values()[i].as_f64(),
        }),
        None => Ok(()),
    }
}

/// `p = -ε + ρE_ρ + uE_u + sE_s`.
pub(crate) fn pressure_from<T: Real>(
    eps: &ScalarField<T>,
    rho: &ScalarField<T>,
    u: &ScalarField<T>,
    s: &ScalarField<T>,
    e_rho: &ScalarField<T>,
    e_u: &ScalarField<T>,
    e_s: &ScalarField<T>,
) -> ScalarField<T> {
    let n = eps.len();
    let vals = (0..n)
        .map(|i| {
            -eps.values()[i]
                + rho.values()[i] * e_rho.values()[i]
                + u.values()[i] * e_u.values()[i]
                + s.values()[i] * e_s.values()[i]
        })
        .collect();
    ScalarField::from_values(eps.grid(), vals).expect("same grid")
}

/// The Euler part `-(∂(ρE_u), ∂(uE_u) + ∂p, ∂(sE_u))`, shared by every
/// caller so the decoupled case is reproduced bit for bit.
fn euler_part<T: Real>(
    rho: &ScalarField<T>,
    u: &ScalarField<T>,
    s: &ScalarField<T>,
    e_rho: &ScalarField<T>,
    e_u: &ScalarField<T>,
    e_s: &ScalarField<T>,
    eps: &ScalarField<T>,
) -> Result<HydroFields<T>> {
    let p = pressure_from(eps, rho, u, s, e_rho, e_u, e_s);
    let flux = |a: &ScalarField<T>| -> Result<ScalarField<T>> { a.zip_map(e_u, |x, y| x * y) };
    let rho_dot = d_dr(&flux(rho)?).map(|y| -y);
    let u_dot = d_dr(&flux(u)?).zip_map(&d_dr(&p), |a, b| -a - b)?;
    let s_dot = d_dr(&flux(s)?).map(|y| -y);
    Ok(HydroFields {
        rho: rho_dot,
        u: u_dot,
        s: s_dot,
    })
}

/// Euler equations driven by a purely hydrodynamic energy.
pub fn euler_rhs<T: Real>(
    rho: &ScalarField<T>,
    u: &ScalarField<T>,
    s: &ScalarField<T>,
    energy: &dyn HydroEnergy<T>,
) -> Result<HydroFields<T>> {
    let [e, e_rho, e_u, e_s] = energy.fields(rho, u, s)?;
    euler_part(rho, u, s, &e_rho, &e_u, &e_s, &e)
}

/// Pressure, the kinetic stress-like field `Π` and the moment fluxes that
/// couple `f` to the hydrodynamic equations.
#[derive(Debug, Clone)]
pub struct HydroClosure<T> {
    /// `-ε + ρE_ρ + uE_u + sE_s`.
    pub p: ScalarField<T>,
    /// `-e + ρE_ρ + uE_u + sE_s + ∫fE_f`; equal to `p` for a consistent `ε`.
    pub p_total: ScalarField<T>,
    /// `Π = fE_ρ + ηE_s + fE_f`.
    pub pi: DistFn<T>,
    /// `K^(ρ) = ∫ f ∂_v E_f`.
    pub k_rho: ScalarField<T>,
    /// `K^(u) = ∫ f (E_f + v ∂_v E_f)`.
    pub k_u: ScalarField<T>,
    /// `K^(e) = ∫ (f E_f E_u + Π ∂_v E_f)`.
    pub k_e: ScalarField<T>,
}

pub fn hydro_closure<T: Real>(
    x: &ExtendedState<T>,
    energy: &dyn ExtendedEnergy<T>,
    eta: &dyn EntropyDensity<T>,
) -> Result<HydroClosure<T>> {
    let c = energy.conjugates(x)?;
    let eps = energy.euler_density(x)?;
    let e = energy.density(x)?;
    let p = pressure_from(&eps, &x.rho, &x.u, &x.s, &c.e_rho, &c.e_u, &c.e_s);
    let fe = integrate_v(&x.f.zip_map(&c.e_f, |a, b| a * b)?);
    let p_total = pressure_from(&e, &x.rho, &x.u, &x.s, &c.e_rho, &c.e_u, &c.e_s).zip_map(&fe, |a, b| a + b)?;
    let eta_f = pointwise(&x.f, "entropy density eta", |y| eta.eta(y))?;
    let a_v = d_dv_conjugate(&c.e_f);
    let fe_rho = scale_columns(&x.f, &c.e_rho);
    let eta_es = scale_columns(&eta_f, &c.e_s);
    let fef = x.f.zip_map(&c.e_f, |a, b| a * b)?;
    let pi = fe_rho.zip_map(&eta_es, |a, b| a + b)?.zip_map(&fef, |a, b| a + b)?;
    let grid = x.grid();
    let v = DistFn::from_velocity_fn(grid, |v| v);
    let k_rho = integrate_v(&x.f.zip_map(&a_v, |a, b| a * b)?);
    let inner_u = DistFn::from_values(
        grid,
        (0..x.f.len())
            .map(|k| x.f.values()[k] * (c.e_f.values()[k] + v.values()[k] * a_v.values()[k]))
            .collect(),
    )?;
    let k_u = integrate_v(&inner_u);
    let fefeu = scale_columns(&fef, &c.e_u);
    let pia = pi.zip_map(&a_v, |a, b| a * b)?;
    let k_e = integrate_v(&fefeu.zip_map(&pia, |a, b| a + b)?);
    Ok(HydroClosure {
        p,
        p_total,
        pi,
        k_rho,
        k_u,
        k_e,
    })
}

/// Fokker-Planck regularization of the kinetic equation together with the
/// spatial-flux scaling `ε`.
#[derive(Clone)]
pub struct Regularization<T> {
    pub fp: FokkerPlanckDissipation<T>,
    pub epsilon: T,
}

impl<T: Real> std::fmt::Debug for Regularization<T> {
    fn fmt(&self, fmt: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fmt.debug_struct("Regularization")
            .field("fp", &self.fp)
            .field("epsilon", &self.epsilon)
            .finish()
    }
}

/// Right-hand side split into the pieces the diagnostics need.
#[derive(Debug, Clone)]
pub struct PgRates<T> {
    pub rhs: ExtendedState<T>,
    /// Euler part of the hydrodynamic equations alone.
    pub euler: HydroFields<T>,
    /// `Σ_faces F (E_{f,j+1} - E_{f,j})` per cell: the energy removed from
    /// `f` by the Fokker-Planck term and handed to `s`.
    pub production: ScalarField<T>,
}

/// Full decomposition of the (optionally regularized) hierarchy.
pub fn pg_rates<T: Real>(
    x: &ExtendedState<T>,
    energy: &dyn ExtendedEnergy<T>,
    eta: &dyn EntropyDensity<T>,
    regularization: Option<&Regularization<T>>,
) -> Result<PgRates<T>> {
    match regularization {
        Some(r) => rates(x, energy, eta, r.epsilon, Some(&r.fp)),
        None => rates(x, energy, eta, T::one(), None),
    }
}

fn rates<T: Real>(
    x: &ExtendedState<T>,
    energy: &dyn ExtendedEnergy<T>,
    eta: &dyn EntropyDensity<T>,
    epsilon: T,
    fp: Option<&FokkerPlanckDissipation<T>>,
) -> Result<PgRates<T>> {
    let grid = x.grid();
    if !(epsilon > T::zero() && epsilon <= T::one()) {
        return Err(Error::param("epsilon", "must lie in (0, 1]"));
    }
    let c = energy.conjugates(x)?;
    if fp.is_some() {
        positive_temperature(&c.e_s)?;
    }
    let eps = energy.euler_density(x)?;
    let euler = euler_part(&x.rho, &x.u, &x.s, &c.e_rho, &c.e_u, &c.e_s, &eps)?;

    let eta_v = pointwise(&x.f, "entropy density eta", |y| eta.eta(y))?;
    let eta_f = pointwise(&x.f, "entropy density derivative eta_f", |y| eta.eta_prime(y))?;
    let a_v = d_dv_conjugate(&c.e_f);
    let vel = DistFn::from_velocity_fn(grid, |v| v);

    // Moment corrections of the hydrodynamic equations.
    let k_rho = integrate_v(&x.f.zip_map(&a_v, |a, b| a * b)?);
    let fva = x.f.zip_map(&vel, |a, b| a * b)?.zip_map(&a_v, |a, b| a * b)?;
    let k_u = integrate_v(&fva);
    let k_s = integrate_v(&eta_v.zip_map(&a_v, |a, b| a * b)?);
    let rho_dot = euler.rho.zip_map(&d_dr(&k_rho), |a, b| a - b)?;
    let u_dot = euler.u.zip_map(&d_dr(&k_u), |a, b| a - b)?;
    let mut s_dot = euler.s.zip_map(&d_dr(&k_s), |a, b| a - b)?;

    // Kinetic equation, spatial flux.
    let deta_v = d_dv_conjugate(&eta_f);
    let mut w = x.f.clone();
    for i in 0..grid.n_r() {
        let (eu, es) = (c.e_u.values()[i], c.e_s.values()[i]);
        for j in 0..grid.n_v() {
            let k = grid.idx(i, j);
            w.values_mut()[k] *= eu + deta_v.values()[k] * es + a_v.values()[k];
        }
    }
    let mut f_dot = d_dr_dist(&w).map(|y| -epsilon * y);

    // Kinetic equation, velocity force in face form.
    let d_e_rho = d_dr(&c.e_rho);
    let d_e_u = d_dr(&c.e_u);
    let d_eta_es = d_dr_dist(&scale_columns(&eta_f, &c.e_s));
    let d_e_f = d_dr_dist(&c.e_f);
    let mut force = d_eta_es.zip_map(&d_e_f, |a, b| a + b)?;
    for i in 0..grid.n_r() {
        let (a, b) = (d_e_rho.values()[i], d_e_u.values()[i]);
        for (j, y) in force.column_mut(i).iter_mut().enumerate() {
            *y += a + grid.v(j) * b;
        }
    }
    let flux = VelocityFlux::from_faces(grid, |i, j| face_mean(x.f.column(i), j) * face_mean(force.column(i), j));
    for (o, d) in f_dot.values_mut().iter_mut().zip(flux.divergence().values()) {
        *o += *d;
    }

    // Dissipation: ∂_v(f Λ ∂_v E_f) on faces and the matching production
    // (1/E_s) Σ F ΔE_f in the entropy equation.
    let mut production = ScalarField::zeros(grid);
    if let Some(fp) = fp {
        let fp_flux = fp.face_flux(&x.f, &c.e_f)?;
        for (o, d) in f_dot.values_mut().iter_mut().zip(fp_flux.divergence().values()) {
            *o += *d;
        }
        for i in 0..grid.n_r() {
            let col = c.e_f.column(i);
            production.values_mut()[i] =
                ordered_sum((0..grid.n_v().saturating_sub(1)).map(|j| fp_flux.interior(i, j) * (col[j + 1] - col[j])));
        }
        for ((sd, &p), &t) in s_dot.values_mut().iter_mut().zip(production.values()).zip(c.e_s.values()) {
            *sd += p / t;
        }
    }

    Ok(PgRates {
        rhs: ExtendedState::new(rho_dot, u_dot, s_dot, f_dot)?,
        euler,
        production,
    })
}

/// Poisson-Grad hierarchy: hydrodynamic equations with kinetic moment
/// corrections, and the kinetic equation with hydrodynamic forces.
pub fn pg_rhs<T: Real>(
    x: &ExtendedState<T>,
    energy: &dyn ExtendedEnergy<T>,
    eta: &dyn EntropyDensity<T>,
) -> Result<ExtendedState<T>> {
    Ok(pg_rates(x, energy, eta, None)?.rhs)
}

/// Regularized hierarchy: spatial kinetic flux scaled by `epsilon`,
/// Fokker-Planck term in `f`, matching production in `s`.
pub fn pg_regularized_rhs<T: Real>(
    x: &ExtendedState<T>,
    energy: &dyn ExtendedEnergy<T>,
    eta: &dyn EntropyDensity<T>,
    fp: &FokkerPlanckDissipation<T>,
    epsilon: T,
) -> Result<ExtendedState<T>> {
    let reg = Regularization {
        fp: fp.clone(),
        epsilon,
    };
    Ok(pg_rates(x, energy, eta, Some(&reg))?.rhs)
}

/// Energy density rate `ė = E_ρ ρ̇ + E_u u̇ + E_s ṡ + ∫dv E_f ḟ` per cell,
/// the energy equation recovered from the `s`-form of the hierarchy.
pub fn energy_density_rate<T: Real>(
    x: &ExtendedState<T>,
    rhs: &ExtendedState<T>,
    energy: &dyn ExtendedEnergy<T>,
) -> Result<ScalarField<T>> {
    let c = energy.conjugates(x)?;
    let kinetic = integrate_v(&c.e_f.zip_map(&rhs.f, |a, b| a * b)?);
    let grid = x.grid();
    let vals = (0..grid.n_r())
        .map(|i| {
            ordered_sum([
                c.e_rho.values()[i] * rhs.rho.values()[i],
                c.e_u.values()[i] * rhs.u.values()[i],
                c.e_s.values()[i] * rhs.s.values()[i],
                kinetic.values()[i],
            ])
        })
        .collect();
    ScalarField::from_values(grid, vals)
}

/// `dE/dt = ∫dr ė`.
pub fn energy_rate<T: Real>(
    x: &ExtendedState<T>,
    rhs: &ExtendedState<T>,
    energy: &dyn ExtendedEnergy<T>,
) -> Result<T> {
    Ok(energy_density_rate(x, rhs, energy)?.integral())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyAudit {
    pub energy: f64,
    /// Rate with dissipation switched off: the Hamiltonian discretization
    /// error alone.
    pub rate_reversible: f64,
    pub rate_regularized: f64,
    /// `⟨E_f, ∂_v(fΛ∂_vE_f)⟩`, never positive.
    pub kinetic_dissipation: f64,
    /// `∫ E_s · (production / E_s)`, never negative.
    pub entropy_heating: f64,
    /// `|rate_regularized - rate_reversible| / |E|`.
    pub relative_defect: f64,
}

/// Checks that dissipation moves energy between `f` and `s` without
/// changing the total.
pub fn energy_audit<T: Real>(
    x: &ExtendedState<T>,
    energy: &dyn ExtendedEnergy<T>,
    eta: &dyn EntropyDensity<T>,
    regularization: &Regularization<T>,
) -> Result<EnergyAudit> {
    let total = energy.value(x)?;
    let with = rates(x, energy, eta, regularization.epsilon, Some(&regularization.fp))?;
    let without = rates(x, energy, eta, regularization.epsilon, None)?;
    let rate_with = energy_rate(x, &with.rhs, energy)?;
    let rate_without = energy_rate(x, &without.rhs, energy)?;
    let c = energy.conjugates(x)?;
    let fp_div = regularization.fp.face_flux(&x.f, &c.e_f)?.divergence();
    let kinetic = c.e_f.inner(&fp_div)?;
    let heating = with.production.integral();
    Ok(EnergyAudit {
        energy: total.as_f64(),
        rate_reversible: rate_without.as_f64(),
        rate_regularized: rate_with.as_f64(),
        kinetic_dissipation: kinetic.as_f64(),
        entropy_heating: heating.as_f64(),
        relative_defect: ((rate_with - rate_without).abs() / total.abs().max(T::min_positive_value())).as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{AdditiveEnergy, KineticEntropyDensity, PhysicalConstants, SackurTetrodeHydro};
    use crate::grid::PhaseGrid;
    use std::sync::Arc;

    fn eta() -> KineticEntropyDensity<f64> {
        KineticEntropyDensity {
            k_b: 1.0,
            h: 1.0,
            floor: None,
        }
    }

    fn energy() -> AdditiveEnergy<f64> {
        AdditiveEnergy::sackur_tetrode(PhysicalConstants::default(), 0.5, 0.5).unwrap()
    }

    fn state(grid: &Arc<PhaseGrid<f64>>, amp: f64) -> ExtendedState<f64> {
        let tau = 2.0 * std::f64::consts::PI;
        let rho = ScalarField::from_fn(grid, |r| 1.0 + amp * (tau * r).sin());
        let u = ScalarField::from_fn(grid, |r| 0.3 * amp * (tau * r).cos());
        let s = ScalarField::from_fn(grid, |r| 2.0 + amp * (tau * r).cos());
        let f = DistFn::from_fn(grid, |r, v| {
            (1.0 + 0.5 * amp * (tau * r).sin()) * (-(v - 0.2 * amp).powi(2) / 2.0).exp() / tau.sqrt()
        });
        ExtendedState::new(rho, u, s, f).unwrap()
    }

    #[test]
    fn uniform_state_is_stationary() {
        let grid = PhaseGrid::<f64>::new(8, 16, 1.0, 6.0).unwrap();
        let x = state(&grid, 0.0);
        let rhs = pg_rhs(&x, &energy(), &eta()).unwrap();
        assert_eq!(rhs.rho.max_abs(), 0.0);
        assert_eq!(rhs.u.max_abs(), 0.0);
        assert_eq!(rhs.s.max_abs(), 0.0);
        assert_eq!(rhs.f.max_abs(), 0.0);
    }

    #[test]
    fn mass_and_momentum_are_conserved() {
        let grid = PhaseGrid::<f64>::new(16, 24, 1.0, 6.0).unwrap();
        let x = state(&grid, 0.3);
        let fp = FokkerPlanckDissipation::new(0.7).unwrap();
        let rhs = pg_regularized_rhs(&x, &energy(), &eta(), &fp, 0.5).unwrap();
        assert!(rhs.rho.integral().abs() < 1e-13);
        assert!(rhs.u.integral().abs() < 1e-13);
        assert!(rhs.f.integral().abs() < 1e-13);
    }

    #[test]
    fn zero_distribution_reduces_to_euler() {
        let grid = PhaseGrid::<f64>::new(16, 8, 1.0, 4.0).unwrap();
        let mut x = state(&grid, 0.3);
        x.f = DistFn::zeros(&grid);
        // η(0) is outside the log domain; the identity density is fine at 0.
        let rhs = pg_rhs(&x, &energy(), &crate::functionals::Identity).unwrap();
        let hydro = SackurTetrodeHydro::new(PhysicalConstants::default(), 0.5).unwrap();
        let e = euler_rhs(&x.rho, &x.u, &x.s, &hydro).unwrap();
        assert_eq!(rhs.rho.values(), e.rho.values());
        assert_eq!(rhs.u.values(), e.u.values());
        assert_eq!(rhs.s.values(), e.s.values());
    }

    #[test]
    fn pressure_expressions_agree() {
        let grid = PhaseGrid::<f64>::new(8, 16, 1.0, 6.0).unwrap();
        let x = state(&grid, 0.2);
        let c = hydro_closure(&x, &energy(), &eta()).unwrap();
        for (a, b) in c.p.values().iter().zip(c.p_total.values()) {
            assert!((a - b).abs() < 1e-14 * a.abs().max(1.0));
        }
    }

    #[test]
    fn nonpositive_temperature_is_rejected() {
        struct Cold;
        impl HydroEnergy<f64> for Cold {
            fn name(&self) -> &str {
                "cold"
            }
            fn point(&self, rho: f64, _u: f64, s: f64) -> Option<crate::functionals::HydroPoint<f64>> {
                Some(crate::functionals::HydroPoint {
                    e: rho - s,
                    e_rho: 1.0,
                    e_u: 0.0,
                    e_s: -1.0,
                })
            }
        }
        let grid = PhaseGrid::<f64>::new(4, 8, 1.0, 4.0).unwrap();
        let x = state(&grid, 0.1);
        let en = AdditiveEnergy::new(Arc::new(Cold), crate::functionals::KineticEnergy::new(1.0, 0.5).unwrap());
        let fp = FokkerPlanckDissipation::new(1.0).unwrap();
        let err = pg_regularized_rhs(&x, &en, &eta(), &fp, 1.0).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
        assert!(pg_regularized_rhs(&x, &energy(), &eta(), &fp, 0.0).is_err());
    }

    #[test]
    fn vanishing_mobility_recovers_the_hierarchy() {
        let grid = PhaseGrid::<f64>::new(8, 16, 1.0, 5.0).unwrap();
        let x = state(&grid, 0.4);
        let fp = FokkerPlanckDissipation::with_mobility(crate::functionals::Mobility::Constant(0.0));
        let a = pg_regularized_rhs(&x, &energy(), &eta(), &fp, 1.0).unwrap();
        let b = pg_rhs(&x, &energy(), &eta()).unwrap();
        assert_eq!(a.f.values(), b.f.values());
        assert_eq!(a.s.values(), b.s.values());
    }

    #[test]
    fn production_is_nonnegative_on_random_states() {
        use rand::{Rng, SeedableRng};
        let grid = PhaseGrid::<f64>::new(8, 24, 1.0, 5.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let reg = Regularization {
            fp: FokkerPlanckDissipation::new(1.3).unwrap(),
            epsilon: 0.5,
        };
        for _ in 0..20 {
            let (a, b, c): (f64, f64, f64) = (rng.gen_range(-0.5..0.5), rng.gen_range(-1.0..1.0), rng.gen());
            let mut x = state(&grid, a);
            x.f = DistFn::from_fn(&grid, |r, v| (1.0 + 0.5 * (6.0 * r + c).sin()) * (-(v - b).powi(2) / (1.0 + c)).exp());
            let rates = pg_rates(&x, &energy(), &eta(), Some(&reg)).unwrap();
            assert!(rates.production.values().iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn dissipation_is_energy_neutral() {
        let grid = PhaseGrid::<f64>::new(16, 32, 1.0, 6.0).unwrap();
        let x = state(&grid, 0.3);
        let reg = Regularization {
            fp: FokkerPlanckDissipation::new(2.0).unwrap(),
            epsilon: 0.3,
        };
        let audit = energy_audit(&x, &energy(), &eta(), &reg).unwrap();
        assert!(audit.kinetic_dissipation < 0.0);
        assert!(audit.entropy_heating > 0.0);
        assert!(audit.relative_defect < 1e-12, "{audit:?}");
    }
}
