//! Entropy, energy, number, Casimir and dissipation-potential functionals,
//! each with an analytic variational derivative.
//!
//! Derivatives are Riesz representatives with respect to the phase-space
//! quadrature, i.e. `d/dε F(f + ε g)|₀ = ⟨F_f, g⟩` with
//! `⟨a, b⟩ = Σ_i dr Σ_j w_j a_ij b_ij`.

mod dissipation;
mod energy;
mod kinetic;

use std::sync::Arc;

pub use dissipation::{
    DissipationPotential, FokkerPlanckDissipation, Mobility, ProjectedQuadraticDissipation,
    QuadraticDissipation,
};
pub use energy::{
    AdditiveEnergy, Conjugates, ExtendedEnergy, HydroEnergy, HydroPoint, PhysicalConstants,
    SackurTetrodeEnergy, SackurTetrodeHydro,
};
pub use kinetic::{
    boltzmann_entropy, casimir, kinetic_entropy, Casimir, CustomDensity, EntropyDensity,
    FLnF, Identity, KineticEnergy, KineticEntropyDensity, LinearFunctional, Number,
    QuadraticEntropy, Square, ThermoPotential,
};

use crate::error::{Error, Result};
use crate::grid::DistFn;
use crate::scalar::Real;

/// Dynamics under which a functional is declared to be conserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flow {
    Hamiltonian,
    FokkerPlanck,
}

/// Scalar functional of the distribution function.
pub trait Functional<T: Real>: Send + Sync {
    fn name(&self) -> &str;

    fn value(&self, f: &DistFn<T>) -> Result<T>;

    fn derivative(&self, f: &DistFn<T>) -> Result<DistFn<T>>;

    /// Diagonal of the second variation for functionals with a local
    /// density. `None` means no cheap Hessian action is available.
    fn hessian_diagonal(&self, _f: &DistFn<T>) -> Option<Result<DistFn<T>>> {
        None
    }

    /// Dynamics this functional is expected to be invariant under.
    fn conserved_under(&self) -> &[Flow] {
        &[]
    }
}

/// Outcome of comparing a centred difference quotient with the analytic
/// directional derivative.
#[derive(Debug, Clone, Copy)]
pub struct GateauxReport {
    pub finite_difference: f64,
    pub analytic: f64,
    /// `|fd - analytic| / max(|analytic|, 1e-300)`.
    pub relative_error: f64,
}

/// `[F(f + εg) - F(f - εg)] / 2ε` against `⟨F_f, g⟩`.
pub fn gateaux_check<T: Real>(
    functional: &dyn Functional<T>,
    f: &DistFn<T>,
    direction: &DistFn<T>,
    eps: T,
) -> Result<GateauxReport> {
    let plus = f.zip_map(direction, |a, b| a + eps * b)?;
    let minus = f.zip_map(direction, |a, b| a - eps * b)?;
    let fd = (functional.value(&plus)? - functional.value(&minus)?) / (eps + eps);
    let analytic = functional.derivative(f)?.inner(direction)?;
    let (fd, analytic) = (fd.as_f64(), analytic.as_f64());
    Ok(GateauxReport {
        finite_difference: fd,
        analytic,
        relative_error: (fd - analytic).abs() / analytic.abs().max(1e-300),
    })
}

/// Builds a kinetic functional from its registry name.
///
/// Known names: `boltzmann`, `kinetic_entropy`, `kinetic`, `number`,
/// `quadratic`, `casimir_square`.
pub fn kinetic_functional<T: Real>(
    name: &str,
    constants: &PhysicalConstants<T>,
    floor: Option<T>,
) -> Result<Arc<dyn Functional<T>>> {
    Ok(match name {
        "boltzmann" => Arc::new(boltzmann_entropy(constants.k_b, floor)),
        "kinetic_entropy" => Arc::new(kinetic_entropy(constants.k_b, constants.h, floor)),
        "kinetic" => Arc::new(KineticEnergy::new(constants.m, T::one())?),
        "number" => Arc::new(Number),
        "quadratic" => Arc::new(QuadraticEntropy::centered_at_zero()),
        "casimir_square" => Arc::new(casimir("casimir_square", Arc::new(Square))?),
        other => {
            return Err(Error::Config(format!(
                "unknown functional `{other}` (expected one of {})",
                KINETIC_FUNCTIONALS.join(", ")
            )))
        }
    })
}

pub const KINETIC_FUNCTIONALS: &[&str] = &[
    "boltzmann",
    "kinetic_entropy",
    "kinetic",
    "number",
    "quadratic",
    "casimir_square",
];

pub const ENERGIES: &[&str] = &["kinetic", "sackur_tetrode"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PhaseGrid;

    #[test]
    fn registry_resolves_known_names() {
        let c = PhysicalConstants::<f64>::default();
        for name in KINETIC_FUNCTIONALS {
            let f = kinetic_functional(name, &c, None).unwrap();
            assert_eq!(f.name(), *name);
        }
        assert!(matches!(
            kinetic_functional::<f64>("gibbs", &c, None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn gateaux_of_number_is_exact() {
        let g = PhaseGrid::<f64>::new(4, 8, 1.0, 2.0).unwrap();
        let f = DistFn::from_fn(&g, |r, v| 1.0 + r * v * v);
        let d = DistFn::from_fn(&g, |r, v| (r + v).sin());
        let rep = gateaux_check(&Number, &f, &d, 1e-3).unwrap();
        assert!(rep.relative_error < 1e-12);
    }
}
