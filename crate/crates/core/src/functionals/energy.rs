use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::KineticEnergy;
use crate::error::{Error, Result};
use crate::grid::{integrate_v, DistFn, ExtendedState, ScalarField};
use crate::scalar::Real;

/// Particle mass, Boltzmann constant and Planck constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants<T> {
    pub m: T,
    pub k_b: T,
    pub h: T,
}

impl<T: Real> Default for PhysicalConstants<T> {
    fn default() -> Self {
        Self {
            m: T::one(),
            k_b: T::one(),
            h: T::one(),
        }
    }
}

impl<T: Real> PhysicalConstants<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("m", self.m), ("k_b", self.k_b), ("h", self.h)] {
            if !(x > T::zero()) || !x.is_finite() {
                return Err(Error::param(name, "must be positive and finite"));
            }
        }
        Ok(())
    }
}

/// Local energy density `e(ρ, u, s)` and its partial derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HydroPoint<T> {
    pub e: T,
    pub e_rho: T,
    pub e_u: T,
    pub e_s: T,
}

/// Energy of the hydrodynamic fields alone, given by a local density.
pub trait HydroEnergy<T: Real>: Send + Sync {
    fn name(&self) -> &str;

    /// `None` outside the domain of the density.
    fn point(&self, rho: T, u: T, s: T) -> Option<HydroPoint<T>>;

    /// Density and conjugates on every cell: `(e, E_ρ, E_u, E_s)`.
    fn fields(
        &self,
        rho: &ScalarField<T>,
        u: &ScalarField<T>,
        s: &ScalarField<T>,
    ) -> Result<[ScalarField<T>; 4]> {
        let n = rho.len();
        let mut out = [
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        ];
        for i in 0..n {
            let (r, m, e) = (rho.values()[i], u.values()[i], s.values()[i]);
            let p = self
                .point(r, m, e)
                .filter(|p| p.e.is_finite() && p.e_rho.is_finite() && p.e_s.is_finite())
                .ok_or_else(|| Error::Domain {
                    what: format!("hydrodynamic energy `{}` (rho)", self.name()),
                    r: i,
                    v: 0,
                    value: r.as_f64(),
                })?;
            out[0].push(p.e);
            out[1].push(p.e_rho);
            out[2].push(p.e_u);
            out[3].push(p.e_s);
        }
        let g = rho.grid();
        let [a, b, c, d] = out;
        Ok([
            ScalarField::from_values(g, a)?,
            ScalarField::from_values(g, b)?,
            ScalarField::from_values(g, c)?,
            ScalarField::from_values(g, d)?,
        ])
    }
}

/// `c_h [u²/2ρ + (3h²/4πm)(ρ/m)^{5/3} exp(⅔(ms/k_Bρ - 5/2))]`.
#[derive(Debug, Clone, Copy)]
pub struct SackurTetrodeHydro<T> {
    pub constants: PhysicalConstants<T>,
    /// Overall prefactor of the hydrodynamic part.
    pub c_h: T,
}

impl<T: Real> SackurTetrodeHydro<T> {
    pub fn new(constants: PhysicalConstants<T>, c_h: T) -> Result<Self> {
        constants.validate()?;
        if !(c_h > T::zero()) {
            return Err(Error::param("c_h", "prefactor must be positive"));
        }
        Ok(Self { constants, c_h })
    }

    /// Internal energy density and its `ρ`, `s` derivatives.
    pub fn internal(&self, rho: T, s: T) -> Option<(T, T, T)> {
        if !(rho > T::zero()) {
            return None;
        }
        let PhysicalConstants { m, k_b, h } = self.constants;
        let two_thirds = T::of(2.0 / 3.0);
        let a = T::of(3.0) * h * h / (T::of(4.0 * PI) * m);
        let arg = two_thirds * (m * s / (k_b * rho) - T::of(2.5));
        let e = a * (rho / m).powf(T::of(5.0 / 3.0)) * arg.exp();
        let e_s = e * two_thirds * m / (k_b * rho);
        let e_rho = e * (T::of(5.0 / 3.0) / rho - two_thirds * m * s / (k_b * rho * rho));
        Some((e, e_rho, e_s))
    }

    /// Inverts `T = E_s` at fixed `ρ` for the entropy density.
    pub fn entropy_for_temperature(&self, rho: T, temperature: T) -> Option<T> {
        if !(rho > T::zero()) || !(temperature > T::zero()) {
            return None;
        }
        let PhysicalConstants { m, k_b, h } = self.constants;
        let two_thirds = T::of(2.0 / 3.0);
        let a = T::of(3.0) * h * h / (T::of(4.0 * PI) * m);
        // T = c_h a (ρ/m)^{5/3} exp(arg) ⅔ m/(k_B ρ)
        let pre = self.c_h * a * (rho / m).powf(T::of(5.0 / 3.0)) * two_thirds * m / (k_b * rho);
        let arg = (temperature / pre).ln();
        Some((arg / two_thirds + T::of(2.5)) * k_b * rho / m)
    }
}

impl<T: Real> HydroEnergy<T> for SackurTetrodeHydro<T> {
    fn name(&self) -> &str {
        "sackur_tetrode"
    }
    fn point(&self, rho: T, u: T, s: T) -> Option<HydroPoint<T>> {
        let (e_int, e_int_rho, e_int_s) = self.internal(rho, s)?;
        let half = T::of(0.5);
        let c = self.c_h;
        Some(HydroPoint {
            e: c * (half * u * u / rho + e_int),
            e_rho: c * (-half * u * u / (rho * rho) + e_int_rho),
            e_u: c * u / rho,
            e_s: c * e_int_s,
        })
    }
}

/// Conjugate fields `(E_ρ, E_u, E_s, E_f)` of an extended energy.
#[derive(Debug, Clone)]
pub struct Conjugates<T> {
    pub e_rho: ScalarField<T>,
    pub e_u: ScalarField<T>,
    pub e_s: ScalarField<T>,
    pub e_f: DistFn<T>,
}

/// Energy `E(ρ, u, s, f) = ∫dr e(r)` of the extended state.
pub trait ExtendedEnergy<T: Real>: Send + Sync {
    fn name(&self) -> &str;

    /// Total spatial energy density `e(r)`, including the kinetic part.
    fn density(&self, x: &ExtendedState<T>) -> Result<ScalarField<T>>;

    fn conjugates(&self, x: &ExtendedState<T>) -> Result<Conjugates<T>>;

    /// Density `ε` entering the Euler part through
    /// `p = -ε + ρE_ρ + uE_u + sE_s`; by default `ε = e - ∫dv f E_f`.
    fn euler_density(&self, x: &ExtendedState<T>) -> Result<ScalarField<T>> {
        let e = self.density(x)?;
        let c = self.conjugates(x)?;
        let fe = integrate_v(&x.f.zip_map(&c.e_f, |a, b| a * b)?);
        e.zip_map(&fe, |a, b| a - b)
    }

    fn value(&self, x: &ExtendedState<T>) -> Result<T> {
        Ok(self.density(x)?.integral())
    }
}

/// `e = e_hydro(ρ, u, s) + ∫dv c_k v²/2m f`: the split under which the Euler
/// part does not see `f`.
#[derive(Clone)]
pub struct AdditiveEnergy<T> {
    hydro: Arc<dyn HydroEnergy<T>>,
    kinetic: KineticEnergy<T>,
}

impl<T: Real> AdditiveEnergy<T> {
    pub fn new(hydro: Arc<dyn HydroEnergy<T>>, kinetic: KineticEnergy<T>) -> Self {
        Self { hydro, kinetic }
    }
    pub fn hydro(&self) -> &Arc<dyn HydroEnergy<T>> {
        &self.hydro
    }
    pub fn kinetic(&self) -> &KineticEnergy<T> {
        &self.kinetic
    }
}

impl<T: Real> ExtendedEnergy<T> for AdditiveEnergy<T> {
    fn name(&self) -> &str {
        self.hydro.name()
    }
    fn density(&self, x: &ExtendedState<T>) -> Result<ScalarField<T>> {
        let [e, ..] = self.hydro.fields(&x.rho, &x.u, &x.s)?;
        let e_f = DistFn::from_velocity_fn(x.grid(), |v| self.kinetic.conjugate_at(v));
        let kin = integrate_v(&x.f.zip_map(&e_f, |a, b| a * b)?);
        e.zip_map(&kin, |a, b| a + b)
    }
    fn conjugates(&self, x: &ExtendedState<T>) -> Result<Conjugates<T>> {
        let [_, e_rho, e_u, e_s] = self.hydro.fields(&x.rho, &x.u, &x.s)?;
        Ok(Conjugates {
            e_rho,
            e_u,
            e_s,
            e_f: DistFn::from_velocity_fn(x.grid(), |v| self.kinetic.conjugate_at(v)),
        })
    }
    fn euler_density(&self, x: &ExtendedState<T>) -> Result<ScalarField<T>> {
        let [e, ..] = self.hydro.fields(&x.rho, &x.u, &x.s)?;
        Ok(e)
    }
}

/// Local Sackur-Tetrode hydrodynamics plus kinetic energy of `f`, with the
/// two prefactors exposed (`½` and `½` in the reference form).
pub type SackurTetrodeEnergy<T> = AdditiveEnergy<T>;

impl<T: Real> AdditiveEnergy<T> {
    pub fn sackur_tetrode(constants: PhysicalConstants<T>, c_h: T, c_k: T) -> Result<Self> {
        let hydro = SackurTetrodeHydro::new(constants, c_h)?;
        Ok(Self::new(Arc::new(hydro), KineticEnergy::new(constants.m, c_k)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PhaseGrid;

    fn st() -> SackurTetrodeHydro<f64> {
        SackurTetrodeHydro::new(PhysicalConstants::default(), 0.5).unwrap()
    }

    #[test]
    fn partial_derivatives_match_difference_quotients() {
        let h = st();
        let (rho, u, s) = (1.3, 0.4, 2.1);
        let p = h.point(rho, u, s).unwrap();
        let d = 1e-6;
        let fd = |g: &dyn Fn(f64) -> f64| (g(d) - g(-d)) / (2.0 * d);
        let e_rho = fd(&|x| h.point(rho + x, u, s).unwrap().e);
        let e_u = fd(&|x| h.point(rho, u + x, s).unwrap().e);
        let e_s = fd(&|x| h.point(rho, u, s + x).unwrap().e);
        assert!((e_rho - p.e_rho).abs() < 1e-8 * p.e_rho.abs().max(1.0));
        assert!((e_u - p.e_u).abs() < 1e-8);
        assert!((e_s - p.e_s).abs() < 1e-8 * p.e_s.abs().max(1.0));
    }

    #[test]
    fn temperature_positive_and_invertible() {
        let h = st();
        for &(rho, s) in &[(0.5, 0.1), (1.0, 1.0), (2.0, 3.0)] {
            let p = h.point(rho, 0.0, s).unwrap();
            assert!(p.e_s > 0.0);
            let s_back = h.entropy_for_temperature(rho, p.e_s).unwrap();
            assert!((s_back - s).abs() < 1e-12);
        }
        assert!(h.point(0.0, 0.0, 1.0).is_none());
        assert!(h.point(-1.0, 0.0, 1.0).is_none());
    }

    #[test]
    fn constant_fields_give_constant_chemical_potential() {
        let g = PhaseGrid::<f64>::new(8, 4, 1.0, 2.0).unwrap();
        let x = ExtendedState::new(
            ScalarField::constant(&g, 1.2),
            ScalarField::zeros(&g),
            ScalarField::constant(&g, 0.7),
            DistFn::zeros(&g),
        )
        .unwrap();
        let e = AdditiveEnergy::sackur_tetrode(PhysicalConstants::default(), 0.5, 0.5).unwrap();
        let c = e.conjugates(&x).unwrap();
        let first = c.e_rho.values()[0];
        assert!(c.e_rho.values().iter().all(|&y| y == first));
        for j in 0..4 {
            let v = g.v(j);
            assert!((c.e_f.at(0, j) - v * v / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn default_euler_density_matches_additive_override() {
        struct Plain(AdditiveEnergy<f64>);
        impl ExtendedEnergy<f64> for Plain {
            fn name(&self) -> &str {
                "plain"
            }
            fn density(&self, x: &ExtendedState<f64>) -> Result<ScalarField<f64>> {
                self.0.density(x)
            }
            fn conjugates(&self, x: &ExtendedState<f64>) -> Result<Conjugates<f64>> {
                self.0.conjugates(x)
            }
        }
        let g = PhaseGrid::<f64>::new(6, 16, 1.0, 4.0).unwrap();
        let e = AdditiveEnergy::sackur_tetrode(PhysicalConstants::default(), 0.5, 0.5).unwrap();
        let x = ExtendedState::new(
            ScalarField::from_fn(&g, |r| 1.0 + 0.1 * r),
            ScalarField::from_fn(&g, |r| 0.2 * r),
            ScalarField::constant(&g, 1.0),
            DistFn::from_fn(&g, |_, v| (-v * v).exp()),
        )
        .unwrap();
        let a = e.euler_density(&x).unwrap();
        let b = Plain(e).euler_density(&x).unwrap();
        for (p, q) in a.values().iter().zip(b.values()) {
            assert!((p - q).abs() < 1e-13);
        }
    }
}
