use std::sync::Arc;

use serde::Serialize;

use super::flux::{reduce_flux, DiffusionFluxEntropy, FluxClosure, FluxOptions, VelocityMoment};
use crate::dynamics::{evolve, Diagnostics, Integrator};
use crate::error::{Error, Result};
use crate::grid::{r_face_difference, r_face_divergence, r_face_mean, DistFn, PhaseGrid, ScalarField};
use crate::scalar::{ordered_sum, Real};

/// Local functional of a spatial density, `∫ dr s(ρ)`.
pub trait FieldFunctional<T: Real>: Send + Sync {
    fn name(&self) -> &str;
    fn value(&self, rho: &ScalarField<T>) -> Result<T>;
    fn derivative(&self, rho: &ScalarField<T>) -> Result<ScalarField<T>>;
    fn second_derivative(&self, rho: &ScalarField<T>) -> Result<ScalarField<T>>;
}

fn positive<T: Real>(rho: &ScalarField<T>, what: &str) -> Result<()> {
    match rho.values().iter().position(|&x| !(x > T::zero())) {
        Some(i) => Err(Error::Domain {
            what: what.into(),
            r: i,
            v: 0,
            value: rho.values()[i].as_f64(),
        }),
        None => Ok(()),
    }
}

/// `S(ρ) = -k_B ∫ ρ (ln ρ - 1)`, so `ρ* = -k_B ln ρ`.
#[derive(Debug, Clone, Copy)]
pub struct LogDensityEntropy<T> {
    pub k_b: T,
}

impl<T: Real> FieldFunctional<T> for LogDensityEntropy<T> {
    fn name(&self) -> &str {
        "log_density_entropy"
    }
    fn value(&self, rho: &ScalarField<T>) -> Result<T> {
        positive(rho, "density entropy")?;
        let k = self.k_b;
        Ok(rho.map(|x| -k * x * (x.ln() - T::one())).integral())
    }
    fn derivative(&self, rho: &ScalarField<T>) -> Result<ScalarField<T>> {
        positive(rho, "density entropy derivative")?;
        let k = self.k_b;
        Ok(rho.map(|x| -k * x.ln()))
    }
    fn second_derivative(&self, rho: &ScalarField<T>) -> Result<ScalarField<T>> {
        positive(rho, "density entropy second derivative")?;
        let k = self.k_b;
        Ok(rho.map(|x| -k / x))
    }
}

/// `S(ρ) = -½ ∫ (ρ - c)²`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticDensityEntropy<T> {
    pub centre: T,
}

impl<T: Real> FieldFunctional<T> for QuadraticDensityEntropy<T> {
    fn name(&self) -> &str {
        "quadratic_density_entropy"
    }
    fn value(&self, rho: &ScalarField<T>) -> Result<T> {
        let c = self.centre;
        Ok(rho.map(|x| -T::of(0.5) * (x - c) * (x - c)).integral())
    }
    fn derivative(&self, rho: &ScalarField<T>) -> Result<ScalarField<T>> {
        let c = self.centre;
        Ok(rho.map(|x| c - x))
    }
    fn second_derivative(&self, rho: &ScalarField<T>) -> Result<ScalarField<T>> {
        Ok(rho.map(|_| -T::one()))
    }
}

/// How the face flux `K` is obtained from the force `K† = ∂_r ρ*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffusionClosure {
    /// `K = -(ρ/Λ) K†` written out.
    Analytic,
    /// `K` from [`reduce_flux`] with `f = ρ M(v)` on a face-centred phase
    /// grid with `n_v` velocity cells.
    FluxReduction { n_v: usize, v_max: f64 },
}

/// `ρ̇ = ∂_r K` with `K = -(ρ/Λ) ∂_r ρ*` and `ρ* = S_ρ`, discretized with
/// fluxes on the faces between cells.
#[derive(Clone)]
pub struct DiffusionProblem<T> {
    pub entropy: Arc<dyn FieldFunctional<T>>,
    pub lambda: T,
    pub closure: DiffusionClosure,
    faces: Option<Arc<PhaseGrid<T>>>,
}

impl<T: Real> DiffusionProblem<T> {
    pub fn new(
        grid: &Arc<PhaseGrid<T>>,
        entropy: Arc<dyn FieldFunctional<T>>,
        lambda: T,
        closure: DiffusionClosure,
    ) -> Result<Self> {
        if !(lambda > T::zero()) {
            return Err(Error::param("lambda", "must be positive"));
        }
        let faces = match closure {
            DiffusionClosure::Analytic => None,
            DiffusionClosure::FluxReduction { n_v, v_max } => {
                Some(PhaseGrid::new(grid.n_r(), n_v, grid.length_r(), T::of(v_max))?.staggered())
            }
        };
        Ok(Self {
            entropy,
            lambda,
            closure,
            faces,
        })
    }

    /// `K†` on the faces, `(ρ*_{i+1} - ρ*_i) / dr`.
    pub fn force(&self, rho: &ScalarField<T>) -> Result<Vec<T>> {
        let rho_star = self.entropy.derivative(rho)?;
        Ok(r_face_difference(rho_star.values(), rho.grid().dr()))
    }

    /// Face fluxes `K_{i+1/2}` together with the forces they close.
    pub fn face_flux(&self, rho: &ScalarField<T>) -> Result<(Vec<T>, Vec<T>)> {
        let force = self.force(rho)?;
        let k = match self.flux_closure(rho)? {
            None => {
                let l = self.lambda;
                r_face_mean(rho.values()).iter().zip(&force).map(|(&r, &k)| -r / l * k).collect()
            }
            Some(closure) => closure.k.into_values(),
        };
        Ok((k, force))
    }

    /// The full flux reduction behind [`Self::face_flux`]: `Ĵ`, `K` and
    /// `𝔖↓†(K†)` on the face grid. `None` for the analytic closure.
    pub fn flux_closure(&self, rho: &ScalarField<T>) -> Result<Option<FluxClosure<T>>> {
        let Some(fg) = &self.faces else {
            return Ok(None);
        };
        let force = self.force(rho)?;
        let rho_face = r_face_mean(rho.values());
        let m = DistFn::from_velocity_fn(fg, |v| (-v * v / T::of(2.0)).exp());
        let norm = fg.quad_v(m.column(0));
        let mut f = m.map(|x| x / norm);
        for (i, &r) in rho_face.iter().enumerate() {
            f.column_mut(i).iter_mut().for_each(|x| *x *= r);
        }
        let k_dagger = ScalarField::from_values(fg, force)?;
        let s = DiffusionFluxEntropy {
            lambda: self.lambda,
            f: f.clone(),
        };
        reduce_flux(
            &s,
            &VelocityMoment { f },
            &k_dagger,
            &DistFn::zeros(fg),
            &FluxOptions {
                fd_step: None,
                ..Default::default()
            },
        )
        .map(Some)
    }

    pub fn rhs(&self, rho: &ScalarField<T>) -> Result<ScalarField<T>> {
        let (k, _) = self.face_flux(rho)?;
        ScalarField::from_values(rho.grid(), r_face_divergence(&k, rho.grid().dr()))
    }

    /// Largest stable step from the effective diffusivity `ρ |S_ρρ| / Λ`.
    pub fn dt_max(&self, rho: &ScalarField<T>, integrator: &Integrator<T>) -> Result<T> {
        let s2 = self.entropy.second_derivative(rho)?;
        let d = rho
            .values()
            .iter()
            .zip(s2.values())
            .fold(T::zero(), |m, (&r, &s)| m.max((r * s).abs() / self.lambda));
        let dr = rho.grid().dr();
        Ok(if d > T::zero() {
            integrator.scheme.real_limit::<T>() * dr * dr / (T::of(4.0) * d)
        } else {
            T::infinity()
        })
    }
}

pub fn diffusion_rhs<T: Real>(problem: &DiffusionProblem<T>, rho: &ScalarField<T>) -> Result<ScalarField<T>> {
    problem.rhs(rho)
}

/// `Ṡ = -Σ dr K_{i+1/2} K†_{i+1/2}`, which for the analytic closure is
/// `Σ dr (ρ/Λ)(∂_r ρ*)²`.
pub fn entropy_production<T: Real>(problem: &DiffusionProblem<T>, rho: &ScalarField<T>) -> Result<T> {
    let (k, force) = problem.face_flux(rho)?;
    Ok(-ordered_sum(k.iter().zip(&force).map(|(&a, &b)| a * b)) * rho.grid().dr())
}

#[derive(Debug, Clone)]
pub struct DiffusionRun<T> {
    pub state: ScalarField<T>,
    /// Columns `mass`, `S`, `production`.
    pub diagnostics: Diagnostics,
    /// `max |m(t) - m(0)| / |m(0)|` over recorded rows.
    pub mass_drift: f64,
    pub min_production: f64,
    pub entropy_monotone: bool,
    pub steps: usize,
}

/// Integrates the closed diffusion equation from `rho0` to `t_end`,
/// recording mass, entropy and entropy production every `stride` steps.
pub fn diffusion_scenario<T: Real>(
    problem: &DiffusionProblem<T>,
    rho0: &ScalarField<T>,
    integrator: &Integrator<T>,
    t_end: T,
    stride: usize,
) -> Result<DiffusionRun<T>> {
    positive(rho0, "initial density")?;
    integrator.check_stability(problem.dt_max(rho0, integrator)?)?;
    let mut diag = Diagnostics::new(["mass", "S", "production"]);
    let mut min_production = f64::INFINITY;
    let mut monotone = true;
    let mut last_s = f64::NEG_INFINITY;
    let out = evolve(
        rho0.clone(),
        |rho: &ScalarField<T>| problem.rhs(rho),
        integrator,
        t_end,
        stride,
        |_, t, rho| {
            let s = problem.entropy.value(rho)?.as_f64();
            let p = entropy_production(problem, rho)?.as_f64();
            let tol = 1e-12 * s.abs().max(1.0);
            if s < last_s - tol {
                monotone = false;
            }
            last_s = s;
            min_production = min_production.min(p);
            diag.push(t.as_f64(), vec![rho.integral().as_f64(), s, p])
        },
    )?;
    let mass = diag.column("mass").unwrap_or_default();
    let m0 = mass.first().copied().unwrap_or(0.0);
    let mass_drift = mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max) / m0.abs().max(f64::MIN_POSITIVE);
    Ok(DiffusionRun {
        state: out.state,
        diagnostics: diag,
        mass_drift,
        min_production,
        entropy_monotone: monotone,
        steps: out.steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EntropyRateStatus {
    Active,
    /// Forced systems have no upper entropy to differentiate.
    Disabled(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyRateReport {
    pub status: EntropyRateStatus,
    /// `⟨y*, 𝔖↓†_{y*}⟩ = -⟨ρ*, ρ̇⟩`.
    pub state_pairing: f64,
    /// `⟨K†, 𝔖↓†_{K†}⟩ = ⟨K†, K⟩`.
    pub force_pairing: f64,
    /// `state_pairing / force_pairing`; `None` when both vanish.
    pub ratio: Option<f64>,
    /// The hint supplied by the caller, echoed for comparison.
    pub ratio_hint: Option<f64>,
    /// `-state_pairing`.
    pub entropy_rate: f64,
    /// `Σ dr (ρ/Λ)(∂_r ρ*)²` evaluated on the faces.
    pub direct_production: f64,
    pub rate_nonnegative: bool,
}

/// Evaluates both pairings of the entropy-rate relation for the closed
/// diffusion dynamics at `rho`.
pub fn entropy_rate_diagnostic<T: Real>(
    problem: &DiffusionProblem<T>,
    rho: &ScalarField<T>,
    forced: bool,
    ratio_hint: Option<f64>,
) -> Result<EntropyRateReport> {
    if forced {
        return Ok(EntropyRateReport {
            status: EntropyRateStatus::Disabled("externally forced system: no upper entropy".into()),
            state_pairing: f64::NAN,
            force_pairing: f64::NAN,
            ratio: None,
            ratio_hint,
            entropy_rate: f64::NAN,
            direct_production: f64::NAN,
            rate_nonnegative: true,
        });
    }
    let dr = rho.grid().dr();
    let rho_star = problem.entropy.derivative(rho)?;
    let rho_dot = problem.rhs(rho)?;
    let state_pairing = -rho_star.inner(&rho_dot)?;
    let (k, force) = problem.face_flux(rho)?;
    let force_pairing = ordered_sum(k.iter().zip(&force).map(|(&a, &b)| a * b)) * dr;
    let rho_face = r_face_mean(rho.values());
    let direct = ordered_sum(rho_face.iter().zip(&force).map(|(&r, &g)| r / problem.lambda * g * g)) * dr;
    let (sp, fp) = (state_pairing.as_f64(), force_pairing.as_f64());
    let ratio = if fp != 0.0 { Some(sp / fp) } else { None };
    Ok(EntropyRateReport {
        status: EntropyRateStatus::Active,
        state_pairing: sp,
        force_pairing: fp,
        ratio,
        ratio_hint,
        entropy_rate: -sp,
        direct_production: direct.as_f64(),
        rate_nonnegative: -sp >= -1e-14 * direct.as_f64().abs().max(1e-300),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Scheme;

    fn problem(grid: &Arc<PhaseGrid<f64>>, closure: DiffusionClosure) -> DiffusionProblem<f64> {
        DiffusionProblem::new(grid, Arc::new(LogDensityEntropy { k_b: 1.0 }), 1.0, closure).unwrap()
    }

    fn bump(grid: &Arc<PhaseGrid<f64>>) -> ScalarField<f64> {
        ScalarField::from_fn(grid, |r| 1.0 + (-(r - 0.5).powi(2) / 0.02).exp())
    }

    #[test]
    fn uniform_density_is_stationary() {
        let grid = PhaseGrid::<f64>::new(16, 1, 1.0, 1.0).unwrap();
        let p = problem(&grid, DiffusionClosure::Analytic);
        let rho = ScalarField::constant(&grid, 0.7);
        assert_eq!(p.rhs(&rho).unwrap().max_abs(), 0.0);
        assert_eq!(entropy_production(&p, &rho).unwrap(), 0.0);
        let rep = entropy_rate_diagnostic(&p, &rho, false, None).unwrap();
        assert_eq!(rep.state_pairing, 0.0);
        assert_eq!(rep.force_pairing, 0.0);
        assert!(rep.ratio.is_none());
    }

    #[test]
    fn flux_reduction_closure_matches_analytic() {
        let grid = PhaseGrid::<f64>::new(32, 1, 1.0, 1.0).unwrap();
        let rho = bump(&grid);
        let a = problem(&grid, DiffusionClosure::Analytic).rhs(&rho).unwrap();
        let b = problem(&grid, DiffusionClosure::FluxReduction { n_v: 8, v_max: 5.0 }).rhs(&rho).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-10 * a.max_abs());
        }
    }

    #[test]
    fn entropy_rate_pairings_agree() {
        let grid = PhaseGrid::<f64>::new(32, 1, 1.0, 1.0).unwrap();
        let p = problem(&grid, DiffusionClosure::Analytic);
        let rho = bump(&grid);
        let rep = entropy_rate_diagnostic(&p, &rho, false, Some(1.0)).unwrap();
        assert!(rep.entropy_rate > 0.0);
        assert!((rep.entropy_rate - rep.direct_production).abs() < 1e-10 * rep.direct_production);
        assert!((rep.ratio.unwrap() - 1.0).abs() < 1e-10);
        assert!(rep.rate_nonnegative);
    }

    #[test]
    fn forced_systems_disable_the_diagnostic() {
        let grid = PhaseGrid::<f64>::new(4, 1, 1.0, 1.0).unwrap();
        let p = problem(&grid, DiffusionClosure::Analytic);
        let rep = entropy_rate_diagnostic(&p, &ScalarField::constant(&grid, 1.0), true, None).unwrap();
        assert!(matches!(rep.status, EntropyRateStatus::Disabled(_)));
    }

    #[test]
    fn stability_bound_is_enforced() {
        let grid = PhaseGrid::<f64>::new(64, 1, 1.0, 1.0).unwrap();
        let p = problem(&grid, DiffusionClosure::Analytic);
        let it = Integrator::new(Scheme::Rk4, 1e-2).unwrap();
        let err = diffusion_scenario(&p, &bump(&grid), &it, 0.1, 1).unwrap_err();
        assert!(matches!(err, Error::Stability { .. }));
    }

    #[test]
    fn run_conserves_mass_and_produces_entropy() {
        let grid = PhaseGrid::<f64>::new(32, 1, 1.0, 1.0).unwrap();
        let p = problem(&grid, DiffusionClosure::Analytic);
        let it = Integrator::new(Scheme::Rk4, 1e-4).unwrap();
        let run = diffusion_scenario(&p, &bump(&grid), &it, 0.01, 1).unwrap();
        assert!(run.mass_drift < 1e-13);
        assert!(run.min_production >= 0.0);
        assert!(run.entropy_monotone);
    }
}
