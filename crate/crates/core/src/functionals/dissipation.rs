use std::sync::Arc;

use super::Functional;
use crate::error::{Error, Result};
use crate::grid::{face_mean, DistFn, ScalarField, VelocityFlux};
use crate::scalar::{ordered_sum, Real};

/// Dissipation potential `Ξ(x, x*)`, convex in the conjugate `x*` with
/// `Ξ(x, 0) = 0` and `Ξ_{x*}(x, 0) = 0`.
pub trait DissipationPotential<T: Real>: Send + Sync {
    fn name(&self) -> &str;

    fn value(&self, x: &DistFn<T>, x_star: &DistFn<T>) -> Result<T>;

    /// `Ξ_{x*}(x, x*)`, a state-shaped field.
    fn derivative(&self, x: &DistFn<T>, x_star: &DistFn<T>) -> Result<DistFn<T>>;

    /// Registry names of functionals `C` with `⟨C_x, Ξ_{x*}⟩ = 0`.
    fn dissipative_casimirs(&self) -> Vec<String> {
        Vec::new()
    }
}

/// `Ξ = ½ Λ ⟨x*, x*⟩`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticDissipation<T> {
    lambda: T,
}

impl<T: Real> QuadraticDissipation<T> {
    pub fn new(lambda: T) -> Result<Self> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::Construction {
                name: "quadratic_dissipation".into(),
                reason: format!("Lambda must be positive, got {lambda}"),
            });
        }
        Ok(Self { lambda })
    }
    pub fn lambda(&self) -> T {
        self.lambda
    }
}

impl<T: Real> DissipationPotential<T> for QuadraticDissipation<T> {
    fn name(&self) -> &str {
        "quadratic"
    }
    fn value(&self, _x: &DistFn<T>, x_star: &DistFn<T>) -> Result<T> {
        Ok(T::of(0.5) * self.lambda * x_star.inner(x_star)?)
    }
    fn derivative(&self, _x: &DistFn<T>, x_star: &DistFn<T>) -> Result<DistFn<T>> {
        Ok(x_star.map(|y| self.lambda * y))
    }
}

/// `Ξ = ½ Λ ⟨P x*, P x*⟩` where `P` removes the components along the
/// derivatives of the listed constraints at the current state. The flow it
/// generates keeps those constraints fixed.
#[derive(Clone)]
pub struct ProjectedQuadraticDissipation<T> {
    lambda: T,
    constraints: Vec<Arc<dyn Functional<T>>>,
}

impl<T: Real> ProjectedQuadraticDissipation<T> {
    pub fn new(lambda: T, constraints: Vec<Arc<dyn Functional<T>>>) -> Result<Self> {
        QuadraticDissipation::new(lambda)?;
        Ok(Self { lambda, constraints })
    }

    /// Orthonormal basis of `span{C_x}` by modified Gram-Schmidt, applied twice.
    fn basis(&self, x: &DistFn<T>) -> Result<Vec<DistFn<T>>> {
        let mut basis: Vec<DistFn<T>> = Vec::new();
        for c in &self.constraints {
            let mut q = c.derivative(x)?;
            for _ in 0..2 {
                for b in &basis {
                    let p = b.inner(&q)?;
                    q = q.zip_map(b, |a, bb| a - p * bb)?;
                }
            }
            let norm = q.inner(&q)?.sqrt();
            if norm > T::of(1e-12) {
                basis.push(q.map(|a| a / norm));
            }
        }
        Ok(basis)
    }

    pub fn project(&self, x: &DistFn<T>, y: &DistFn<T>) -> Result<DistFn<T>> {
        let mut out = y.clone();
        for b in self.basis(x)? {
            let p = b.inner(&out)?;
            out = out.zip_map(&b, |a, bb| a - p * bb)?;
        }
        Ok(out)
    }
}

impl<T: Real> DissipationPotential<T> for ProjectedQuadraticDissipation<T> {
    fn name(&self) -> &str {
        "projected_quadratic"
    }
    fn value(&self, x: &DistFn<T>, x_star: &DistFn<T>) -> Result<T> {
        let p = self.project(x, x_star)?;
        Ok(T::of(0.5) * self.lambda * p.inner(&p)?)
    }
    fn derivative(&self, x: &DistFn<T>, x_star: &DistFn<T>) -> Result<DistFn<T>> {
        Ok(self.project(x, x_star)?.map(|y| self.lambda * y))
    }
    fn dissipative_casimirs(&self) -> Vec<String> {
        self.constraints.iter().map(|c| c.name().to_string()).collect()
    }
}

/// Velocity dependence of the Fokker-Planck mobility, evaluated on faces.
#[derive(Clone)]
pub enum Mobility<T> {
    Constant(T),
    Velocity(Arc<dyn Fn(T) -> T + Send + Sync>),
}

impl<T: Real> Mobility<T> {
    #[inline]
    pub fn at(&self, v: T) -> T {
        match self {
            Mobility::Constant(l) => *l,
            Mobility::Velocity(g) => g(v),
        }
    }
}

impl<T: Real> std::fmt::Debug for Mobility<T> {
    fn fmt(&self, fmt: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mobility::Constant(l) => write!(fmt, "Constant({l})"),
            Mobility::Velocity(_) => write!(fmt, "Velocity(..)"),
        }
    }
}

/// `Ξ(f, f*) = ½ ∫dr ∫dv Λ T f (∂_v f*)²` on velocity faces:
/// the face flux is `F = Λ T f̄ (f*_{j+1} - f*_j) / dv` with `f̄` the
/// arithmetic face mean, and `Ξ_{f*} = -∂_v F` in flux form.
#[derive(Clone)]
pub struct FokkerPlanckDissipation<T> {
    mobility: Mobility<T>,
    temperature: Option<ScalarField<T>>,
}

impl<T: Real> std::fmt::Debug for FokkerPlanckDissipation<T> {
    fn fmt(&self, fmt: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fmt.debug_struct("FokkerPlanckDissipation")
            .field("mobility", &self.mobility)
            .field("temperature", &self.temperature.is_some())
            .finish()
    }
}

impl<T: Real> FokkerPlanckDissipation<T> {
    pub fn new(lambda: T) -> Result<Self> {
        QuadraticDissipation::new(lambda).map_err(|_| Error::Construction {
            name: "fokker_planck".into(),
            reason: format!("Lambda must be positive, got {lambda}"),
        })?;
        Ok(Self {
            mobility: Mobility::Constant(lambda),
            temperature: None,
        })
    }

    pub fn with_mobility(mobility: Mobility<T>) -> Self {
        Self {
            mobility,
            temperature: None,
        }
    }

    /// Multiplies the mobility by a spatial temperature field.
    pub fn with_temperature(mut self, temperature: ScalarField<T>) -> Self {
        self.temperature = Some(temperature);
        self
    }

    pub fn mobility(&self) -> &Mobility<T> {
        &self.mobility
    }

    /// Face fluxes `Λ T f̄ Δf*/dv`.
    pub fn face_flux(&self, f: &DistFn<T>, f_star: &DistFn<T>) -> Result<VelocityFlux<T>> {
        if !f.grid().compatible(f_star.grid()) {
            return Err(Error::GridMismatch("FokkerPlanckDissipation::face_flux"));
        }
        let grid = f.grid();
        let dv = grid.dv();
        Ok(VelocityFlux::from_faces(grid, |i, j| {
            let t = self.temperature.as_ref().map_or(T::one(), |t| t.values()[i]);
            let col = f.column(i);
            let cs = f_star.column(i);
            self.mobility.at(grid.v_face(j + 1)) * t * face_mean(col, j) * (cs[j + 1] - cs[j]) / dv
        }))
    }

    /// `σ = ∫dr Σ_faces Λ T f̄ (Δf*/dv)² dv`, equal to `2Ξ`.
    pub fn production(&self, f: &DistFn<T>, f_star: &DistFn<T>) -> Result<T> {
        let flux = self.face_flux(f, f_star)?;
        let grid = f.grid();
        let per_r = (0..grid.n_r()).map(|i| {
            let cs = f_star.column(i);
            ordered_sum((0..grid.n_v().saturating_sub(1)).map(|j| flux.interior(i, j) * (cs[j + 1] - cs[j])))
        });
        Ok(ordered_sum(per_r) * grid.dr())
    }
}

impl<T: Real> DissipationPotential<T> for FokkerPlanckDissipation<T> {
    fn name(&self) -> &str {
        "fokker_planck"
    }
    fn value(&self, f: &DistFn<T>, f_star: &DistFn<T>) -> Result<T> {
        Ok(T::of(0.5) * self.production(f, f_star)?)
    }
    fn derivative(&self, f: &DistFn<T>, f_star: &DistFn<T>) -> Result<DistFn<T>> {
        Ok(self.face_flux(f, f_star)?.divergence().map(|y| -y))
    }
    fn dissipative_casimirs(&self) -> Vec<String> {
        vec!["number".into()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{KineticEnergy, Number};
    use crate::grid::{integrate_v, PhaseGrid};

    fn directional<T: Real>(xi: &dyn DissipationPotential<T>, x: &DistFn<T>, y: &DistFn<T>, d: &DistFn<T>, eps: T) -> (T, T) {
        let p = y.zip_map(d, |a, b| a + eps * b).unwrap();
        let m = y.zip_map(d, |a, b| a - eps * b).unwrap();
        let fd = (xi.value(x, &p).unwrap() - xi.value(x, &m).unwrap()) / (eps + eps);
        (fd, xi.derivative(x, y).unwrap().inner(d).unwrap())
    }

    #[test]
    fn quadratic_rejects_nonpositive_lambda() {
        assert!(QuadraticDissipation::new(0.0).is_err());
        assert!(QuadraticDissipation::new(-1.0).is_err());
        assert!(FokkerPlanckDissipation::new(0.0).is_err());
    }

    #[test]
    fn quadratic_value_arithmetic() {
        let g = PhaseGrid::<f64>::new(1, 4, 1.0, 0.5).unwrap();
        let xi = QuadraticDissipation::new(2.0).unwrap();
        let one = DistFn::constant(&g, 1.0);
        assert!((xi.value(&one, &one).unwrap() - 1.0).abs() < 1e-15);
        let zero = DistFn::zeros(&g);
        assert_eq!(xi.value(&one, &zero).unwrap(), 0.0);
        assert_eq!(xi.derivative(&one, &zero).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn fokker_planck_derivative_matches_difference_quotient() {
        let g = PhaseGrid::<f64>::new(3, 20, 1.0, 3.0).unwrap();
        let f = DistFn::from_fn(&g, |r, v| (1.0 + r) * (-v * v / 2.0).exp());
        let y = DistFn::from_fn(&g, |r, v| (v * 1.3 + r).sin() + 0.2 * v * v);
        let d = DistFn::from_fn(&g, |r, v| (v - r).cos());
        let xi = FokkerPlanckDissipation::new(1.7).unwrap();
        let (fd, an) = directional(&xi, &f, &y, &d, 1e-4);
        assert!((fd - an).abs() < 1e-8 * an.abs().max(1.0), "{fd} {an}");
    }

    #[test]
    fn fokker_planck_mass_and_casimir_identities() {
        let g = PhaseGrid::<f64>::new(3, 20, 1.0, 3.0).unwrap();
        let f = DistFn::from_fn(&g, |r, v| (1.0 + r) * (-v * v / 2.0).exp());
        let y = DistFn::from_fn(&g, |r, v| (v * 1.3 + r).sin());
        let xi = FokkerPlanckDissipation::new(1.0).unwrap();
        let d = xi.derivative(&f, &y).unwrap();
        for &m in integrate_v(&d).values() {
            assert!(m.abs() < 1e-13);
        }
        let one = DistFn::constant(&g, 1.0);
        assert_eq!(xi.derivative(&f, &one).unwrap().max_abs(), 0.0);
        assert!(xi.production(&f, &y).unwrap() >= 0.0);
    }

    #[test]
    fn projected_dissipation_annihilates_constraints() {
        let g = PhaseGrid::<f64>::new(2, 16, 1.0, 3.0).unwrap();
        let cs: Vec<Arc<dyn Functional<f64>>> = vec![
            Arc::new(KineticEnergy::new(1.0, 1.0).unwrap()),
            Arc::new(Number),
        ];
        let xi = ProjectedQuadraticDissipation::new(0.7, cs.clone()).unwrap();
        let x = DistFn::from_fn(&g, |r, v| 1.0 + r * v);
        let y = DistFn::from_fn(&g, |r, v| (r - v).sin() + v.powi(3));
        let d = xi.derivative(&x, &y).unwrap();
        for c in &cs {
            let cx = c.derivative(&x).unwrap();
            assert!(cx.inner(&d).unwrap().abs() < 1e-12);
            let dc = xi.derivative(&x, &cx).unwrap();
            assert!(cx.inner(&dc).unwrap().abs() < 1e-12);
        }
        assert_eq!(xi.dissipative_casimirs(), vec!["kinetic", "number"]);
    }
}
