use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{evolve, fokker_planck_rhs, hamiltonian_rhs, Diagnostics, Integrator, KineticBracket, Scheme};
use crate::error::{Error, Result};
use crate::functionals::{
    boltzmann_entropy, casimir, gateaux_check, kinetic_functional, AdditiveEnergy, DissipationPotential,
    FokkerPlanckDissipation, Functional, KineticEnergy, KineticEntropyDensity, LinearFunctional,
    Number, PhysicalConstants, QuadraticDissipation, QuadraticEntropy, SackurTetrodeHydro, Square, ThermoPotential,
    KINETIC_FUNCTIONALS,
};
use crate::grid::{DistFn, ExtendedState, PhaseGrid, ScalarField};
use crate::poisson_grad::{
    ce_fixed_point, energy_audit, euler_rhs, pg_rates, reduced_hydro_rhs, viscosity_extract, ReducedOptions,
    Regularization,
};

use crate::reduction::{
    entropy_rate_diagnostic, legendre_involution_check, multiplier_grid, DiffusionClosure, DiffusionProblem,
    LegendreOptions, LogDensityEntropy, MaxEntProblem, ReductionOptions,
};

/// Every check, in report order.
pub const CHECKS: [&str; 11] = [
    "bracket_antisymmetry",
    "casimir_degeneracy",
    "gateaux",
    "dissipation_potential",
    "legendre_involution",
    "hamiltonian_conservation",
    "fp_entropy_production",
    "pg_energy_audit",
    "pg_structure",
    "viscosity_closure",
    "diffusion_closure",
];

/// Deliberate defects used to show that the suite notices them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    /// Negates the Fokker-Planck term of the kinetic equation.
    FlipFokkerPlanckSign,
    /// Scales one velocity quadrature weight on every grid.
    BreakQuadratureWeight,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// `None` runs everything; `Some(vec![])` runs nothing.
    pub checks: Option<Vec<String>>,
    pub mutation: Option<Mutation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Measured quantity compared against `threshold`.
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
    pub mutation: Option<Mutation>,
}

/// Runs the selected checks, independent ones in parallel. Unknown check
/// names are a configuration error; a failing check is reported, not raised.
pub fn verify(options: &VerifyOptions) -> Result<VerifyReport> {
    let selected: Vec<&str> = match &options.checks {
        None => CHECKS.to_vec(),
        Some(list) => {
            for name in list {
                if !CHECKS.contains(&name.as_str()) {
                    return Err(Error::Config(format!(
                        "unknown check `{name}`; known: {}",
                        CHECKS.join(", ")
                    )));
                }
            }
            CHECKS.iter().copied().filter(|c| list.iter().any(|n| n == c)).collect()
        }
    };
    let mut warnings = Vec::new();
    if selected.is_empty() {
        warnings.push("no checks selected; the report is trivially passing".to_string());
    }
    let ctx = Ctx {
        seed: options.seed,
        mutation: options.mutation,
    };
    let checks: Vec<CheckResult> = selected
        .par_iter()
        .map(|&name| {
            run_check(&ctx, name).unwrap_or_else(|e| CheckResult {
                name: name.to_string(),
                passed: false,
                value: f64::NAN,
                threshold: f64::NAN,
                detail: format!("error: {e}"),
            })
        })
        .collect();
    let failures: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    Ok(VerifyReport {
        passed: failures.is_empty(),
        checks,
        failures,
        warnings,
        mutation: options.mutation,
    })
}

struct Ctx {
    seed: u64,
    mutation: Option<Mutation>,
}

impl Ctx {
    fn grid(&self, n_r: usize, n_v: usize, length_r: f64, v_max: f64) -> Result<Arc<PhaseGrid<f64>>> {
        let g = PhaseGrid::new(n_r, n_v, length_r, v_max)?;
        Ok(match self.mutation {
            Some(Mutation::BreakQuadratureWeight) => g.with_corrupted_velocity_weight(n_v / 2 + 1, 1.5),
            _ => g,
        })
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }
}

fn below(name: &str, value: f64, threshold: f64, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed: value <= threshold,
        value,
        threshold,
        detail,
    }
}

fn run_check(ctx: &Ctx, name: &str) -> Result<CheckResult> {
    match name {
        "bracket_antisymmetry" => bracket_antisymmetry(ctx),
        "casimir_degeneracy" => casimir_degeneracy(ctx),
        "gateaux" => gateaux(ctx),
        "dissipation_potential" => dissipation_potential(ctx),
        "legendre_involution" => legendre(ctx),
        "hamiltonian_conservation" => hamiltonian_conservation(ctx),
        "fp_entropy_production" => fp_entropy_production(ctx),
        "pg_energy_audit" => pg_energy_audit(ctx),
        "pg_structure" => pg_structure(ctx),
        "viscosity_closure" => viscosity_closure(ctx),
        "diffusion_closure" => diffusion_closure(ctx),
        other => Err(Error::Config(format!("unknown check `{other}`"))),
    }
}

/// Smooth field with random phases and shifts; positive when `floor > 0`.
fn smooth(grid: &Arc<PhaseGrid<f64>>, rng: &mut ChaCha8Rng, floor: f64) -> DistFn<f64> {
    let (a, b, c, d): (f64, f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen(), rng.gen_range(-0.5..0.5));
    let l = grid.length_r();
    DistFn::from_fn(grid, |r, v| {
        let x = (0.5 + a + 0.5 * b * (2.0 * PI * r / l + 6.0 * c).sin()) * (-(v - d).powi(2) / 2.0).exp();
        if floor > 0.0 {
            x + floor
        } else {
            x + 0.1 * v * c
        }
    })
}

fn bracket_antisymmetry(ctx: &Ctx) -> Result<CheckResult> {
    let grid = ctx.grid(16, 24, 1.0, 4.0)?;
    let br = KineticBracket::new(&grid);
    let mut rng = ctx.rng(1);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = smooth(&grid, &mut rng, 0.0);
        let b = smooth(&grid, &mut rng, 0.0);
        let f = smooth(&grid, &mut rng, 1e-3);
        let ab = br.evaluate(&a, &b, &f)?;
        let ba = br.evaluate(&b, &a, &f)?;
        worst = worst.max((ab + ba).abs() / ab.abs().max(1.0));
    }
    Ok(below("bracket_antisymmetry", worst, 1e-12, "max |{A,B} + {B,A}| over 20 random triples".into()))
}

fn casimir_degeneracy(ctx: &Ctx) -> Result<CheckResult> {
    let tau = 2.0 * PI;
    let deg = |n: usize| -> Result<f64> {
        let grid = ctx.grid(n, n, 1.0, 4.0)?;
        let f = DistFn::from_fn(&grid, |r, v| {
            (1.0 + 0.3 * (tau * r).sin())
                * (-(v - 0.3 * (tau * r).cos()).powi(2)).exp()
                * (1.2 + (v + (tau * r).sin()).sin())
        });
        let a = DistFn::from_fn(&grid, |r, v| (tau * r).cos() * v * v + v.sin());
        let c = boltzmann_entropy(1.0, None);
        Ok(KineticBracket::new(&grid).evaluate(&a, &c.derivative(&f)?, &f)?.abs())
    };
    let (coarse, fine) = (deg(32)?, deg(64)?);
    let ratio = coarse / fine;
    Ok(CheckResult {
        name: "casimir_degeneracy".into(),
        passed: ratio >= 3.0,
        value: ratio,
        threshold: 3.0,
        detail: format!("|{{A, S}}| = {coarse:e} on 32x32, {fine:e} on 64x64; ratio must be at least the threshold"),
    })
}

fn gateaux(ctx: &Ctx) -> Result<CheckResult> {
    let grid = ctx.grid(8, 24, 1.0, 5.0)?;
    let c = PhysicalConstants::default();
    let mut rng = ctx.rng(3);
    let mut worst = (0.0f64, String::new());
    for name in KINETIC_FUNCTIONALS {
        let func = kinetic_functional::<f64>(name, &c, None)?;
        let f = smooth(&grid, &mut rng, 0.05);
        let dir = smooth(&grid, &mut rng, 0.0);
        let rep = gateaux_check(func.as_ref(), &f, &dir, 1e-6)?;
        if rep.relative_error >= worst.0 {
            worst = (rep.relative_error, name.to_string());
        }
    }
    Ok(below("gateaux", worst.0, 1e-6, format!("worst functional: {}", worst.1)))
}

fn dissipation_potential(ctx: &Ctx) -> Result<CheckResult> {
    let grid = ctx.grid(4, 24, 1.0, 4.0)?;
    let mut rng = ctx.rng(4);
    let potentials: Vec<Box<dyn DissipationPotential<f64>>> = vec![
        Box::new(FokkerPlanckDissipation::new(0.7)?),
        Box::new(QuadraticDissipation::new(1.3)?),
    ];
    let mut worst = 0.0f64;
    for xi in &potentials {
        for _ in 0..5 {
            let x = smooth(&grid, &mut rng, 0.05);
            let zero = DistFn::zeros(&grid);
            worst = worst.max(xi.value(&x, &zero)?.abs());
            worst = worst.max(xi.derivative(&x, &zero)?.max_abs());
            let a = smooth(&grid, &mut rng, 0.0);
            let b = smooth(&grid, &mut rng, 0.0);
            let (xa, xb) = (xi.value(&x, &a)?, xi.value(&x, &b)?);
            worst = worst.max(-xa).max(-xb);
            let mid = xi.value(&x, &a.zip_map(&b, |p, q| 0.5 * (p + q))?)?;
            worst = worst.max((mid - 0.5 * (xa + xb)) / xa.abs().max(1.0));
            // Derivative against a centred difference along b.
            let h = 1e-6;
            let plus = xi.value(&x, &a.zip_map(&b, |p, q| p + h * q)?)?;
            let minus = xi.value(&x, &a.zip_map(&b, |p, q| p - h * q)?)?;
            let fd = (plus - minus) / (2.0 * h);
            let an = xi.derivative(&x, &a)?.inner(&b)?;
            worst = worst.max((fd - an).abs() / an.abs().max(1.0));
        }
    }
    Ok(below(
        "dissipation_potential",
        worst,
        1e-8,
        "zero at the origin, zero slope there, nonnegative, midpoint convex, derivative consistent".into(),
    ))
}

fn legendre(ctx: &Ctx) -> Result<CheckResult> {
    let grid = ctx.grid(2, 10, 1.0, 2.0)?;
    let c = DistFn::from_fn(&grid, |r, v| 0.5 + r - 0.1 * v);
    let quadratic = MaxEntProblem {
        entropy: Arc::new(QuadraticEntropy::centered_at(c)),
        energy: Arc::new(LinearFunctional::new("a", DistFn::from_fn(&grid, |_, v| v * v / 2.0))),
        number: Arc::new(LinearFunctional::new("b", DistFn::constant(&grid, 1.0))),
        x0: DistFn::zeros(&grid),
        options: ReductionOptions::quadratic(),
    };
    let pairs = multiplier_grid((0.0, 1.0), (-0.5, 0.5), 3, 3)?;
    let q = legendre_involution_check(&quadratic, &pairs, &LegendreOptions::default())?;

    let kgrid = ctx.grid(1, 64, 1.0, 8.0)?;
    let boltzmann = MaxEntProblem {
        entropy: Arc::new(boltzmann_entropy(1.0, None)),
        energy: Arc::new(KineticEnergy::new(1.0, 1.0)?),
        number: Arc::new(Number),
        x0: DistFn::from_fn(&kgrid, |_, v| (-v * v / 2.0).exp() / (2.0 * PI).sqrt()),
        options: ReductionOptions {
            tol: 1e-12,
            seed: ctx.seed,
            ..Default::default()
        },
    };
    let pairs = multiplier_grid((0.8, 1.2), (0.0, 0.4), 3, 3)?;
    let b = legendre_involution_check(&boltzmann, &pairs, &LegendreOptions::default())?;
    // Both parts are folded into one number scaled to its own tolerance.
    let score = (q.max_deviation / 1e-12).max(b.max_relative_deviation / 1e-4);
    Ok(below(
        "legendre_involution",
        score,
        1.0,
        format!(
            "quadratic deviation {:e} (tol 1e-12), Boltzmann relative deviation {:e} (tol 1e-4), {} non-convex samples",
            q.max_deviation,
            b.max_relative_deviation,
            q.flagged.len() + b.flagged.len()
        ),
    ))
}

fn hamiltonian_conservation(ctx: &Ctx) -> Result<CheckResult> {
    let grid = ctx.grid(32, 32, 1.0, 5.0)?;
    let energy = KineticEnergy::new(1.0, 1.0)?;
    let square = casimir("casimir_square", Arc::new(Square))?;
    let f0 = DistFn::from_fn(&grid, |r, v| {
        (1.0 + 0.5 * (8.0 * ((2.0 * PI * r).cos() - 1.0)).exp()) * (-v * v / 2.0).exp()
    });
    let integrator = Integrator::new(Scheme::Rk4, 1e-3)?;
    let mut diag = Diagnostics::new(["E", "N", "casimir_square"]);
    evolve(f0, |f: &DistFn<f64>| hamiltonian_rhs(f, &energy), &integrator, 0.2, 10, |_, t, f| {
        diag.push(t, vec![energy.value(f)?, f.integral(), square.value(f)?])
    })?;
    let d = |c: &str| diag.relative_drift(c).unwrap_or(f64::NAN);
    let (de, dn, dc) = (d("E"), d("N"), d("casimir_square"));
    let score = (de.max(dn) / 1e-12).max(dc / 1e-8);
    Ok(below(
        "hamiltonian_conservation",
        score,
        1.0,
        format!("drifts: E {de:e}, N {dn:e} (tol 1e-12), casimir_square {dc:e} (tol 1e-8)"),
    ))
}

fn fp_entropy_production(ctx: &Ctx) -> Result<CheckResult> {
    let grid = ctx.grid(2, 48, 1.0, 6.0)?;
    let phi = ThermoPotential::new(
        Arc::new(boltzmann_entropy(1.0, None)),
        Arc::new(KineticEnergy::new(1.0, 1.0)?),
        Arc::new(Number),
        1.0,
        0.0,
    );
    let fp = FokkerPlanckDissipation::new(1.0)?;
    let flip = ctx.mutation == Some(Mutation::FlipFokkerPlanckSign);
    let rhs = |f: &DistFn<f64>| -> Result<DistFn<f64>> {
        let d = fokker_planck_rhs(f, &fp, &phi)?;
        Ok(if flip { d.map(|y| -y) } else { d })
    };
    let f0 = DistFn::from_fn(&grid, |r, v| {
        (1.0 + 0.2 * (2.0 * PI * r).sin()) * ((-(v - 1.5).powi(2)).exp() + (-(v + 1.0).powi(2)).exp())
    });
    let integrator = Integrator::new(Scheme::Rk4, 2e-3)?;
    let mut worst = 0.0f64;
    evolve(f0, &rhs, &integrator, 0.1, 1, |_, _, f| {
        let f_star = phi.derivative(f)?;
        let sigma = fp.production(f, &f_star)?;
        // Entropy production measured from the actual rate of Φ.
        let rate = -f_star.inner(&rhs(f)?)?;
        let scale = sigma.abs().max(1e-12);
        worst = worst.max((-rate / scale).max(0.0)).max((rate - sigma).abs() / scale);
        Ok(())
    })?;
    Ok(below(
        "fp_entropy_production",
        worst,
        1e-9,
        "-dPhi/dt must be nonnegative and equal the face production at every step".into(),
    ))
}

fn hydro_state(grid: &Arc<PhaseGrid<f64>>, rng: &mut ChaCha8Rng) -> Result<ExtendedState<f64>> {
    let tau = 2.0 * PI;
    let a: [f64; 5] = [
        rng.gen_range(-0.3..0.3),
        rng.gen_range(-0.3..0.3),
        rng.gen_range(-0.3..0.3),
        rng.gen_range(-0.3..0.3),
        rng.gen_range(0.0..tau),
    ];
    ExtendedState::new(
        ScalarField::from_fn(grid, |r| 1.0 + a[0] * (tau * r + a[4]).sin()),
        ScalarField::from_fn(grid, |r| a[1] * (tau * r).cos()),
        ScalarField::from_fn(grid, |r| 2.0 + a[2] * (tau * r + 1.0).sin()),
        DistFn::from_fn(grid, |r, v| {
            (1.0 + a[3] * (tau * r).cos()) * (-(v - 0.2 * a[1]).powi(2) / 2.0).exp() / tau.sqrt()
        }),
    )
}

fn hydro_parts() -> Result<(AdditiveEnergy<f64>, KineticEntropyDensity<f64>)> {
    Ok((
        AdditiveEnergy::sackur_tetrode(PhysicalConstants::default(), 0.5, 0.5)?,
        KineticEntropyDensity {
            k_b: 1.0,
            h: 1.0,
            floor: None,
        },
    ))
}

fn pg_energy_audit(ctx: &Ctx) -> Result<CheckResult> {
    let grid = ctx.grid(8, 24, 1.0, 5.0)?;
    let (energy, eta) = hydro_parts()?;
    let mut rng = ctx.rng(8);
    let mut worst = 0.0f64;
    for k in 0..6 {
        let reg = Regularization {
            fp: FokkerPlanckDissipation::new(0.5 + 0.2 * k as f64)?,
            epsilon: 1.0 / (1.0 + k as f64),
        };
        let x = hydro_state(&grid, &mut rng)?;
        worst = worst.max(energy_audit(&x, &energy, &eta, &reg)?.relative_defect);
    }
    Ok(below(
        "pg_energy_audit",
        worst,
        1e-8,
        "dissipative terms must cancel in the total energy rate".into(),
    ))
}

fn pg_structure(ctx: &Ctx) -> Result<CheckResult> {
    let grid = ctx.grid(12, 24, 1.0, 5.0)?;
    let (energy, eta) = hydro_parts()?;
    let hydro = SackurTetrodeHydro::new(PhysicalConstants::default(), 0.5)?;
    let mut rng = ctx.rng(9);
    let mut bitwise = true;
    let (mut conservation, mut negative) = (0.0f64, 0.0f64);
    for _ in 0..6 {
        let x = hydro_state(&grid, &mut rng)?;
        let reg = Regularization {
            fp: FokkerPlanckDissipation::new(0.9)?,
            epsilon: 0.5,
        };
        for r in [None, Some(&reg)] {
            let rates = pg_rates(&x, &energy, &eta, r)?;
            let e = euler_rhs(&x.rho, &x.u, &x.s, &hydro)?;
            bitwise &= rates.euler.rho.values() == e.rho.values()
                && rates.euler.u.values() == e.u.values()
                && rates.euler.s.values() == e.s.values();
            conservation = conservation
                .max(rates.rhs.rho.integral().abs())
                .max(rates.rhs.u.integral().abs())
                .max(rates.rhs.f.integral().abs());
            negative = negative.max(-rates.production.values().iter().copied().fold(0.0, f64::min));
        }
        let red = reduced_hydro_rhs(&x, &energy, &eta, 0.8, &ReducedOptions::default())?;
        negative = negative.max(-red.production.values().iter().copied().fold(0.0, f64::min));
        conservation = conservation.max(red.rhs.rho.integral().abs()).max(red.rhs.u.integral().abs());
    }
    let score = if bitwise { (conservation / 1e-12).max(negative / 1e-300) } else { f64::INFINITY };
    Ok(below(
        "pg_structure",
        score,
        1.0,
        format!(
            "Euler part bitwise equal: {bitwise}; conservation defect {conservation:e} (tol 1e-12); most negative production {:e}",
            -negative
        ),
    ))
}

fn viscosity_closure(ctx: &Ctx) -> Result<CheckResult> {
    let grid = ctx.grid(1, 128, 1.0, 8.0)?;
    let g = ScalarField::constant(&grid, 5e-5);
    let f = ce_fixed_point(&grid, &g, 1.0, 1.0, &ScalarField::constant(&grid, 1.0))?;
    let phi = ThermoPotential::new(
        Arc::new(boltzmann_entropy(1.0, None)),
        Arc::new(KineticEnergy::new(1.0, 1.0)?),
        Arc::new(Number),
        1.0,
        0.0,
    );
    let out = viscosity_extract(&f, 1.0, &g, &phi)?;
    let score = ((out.gamma - 1.0).abs() / 1e-4).max(out.closure_residual / 1e-4);
    Ok(below(
        "viscosity_closure",
        score,
        1.0,
        format!("Gamma {} (1 +- 1e-4), closure residual {:e} (tol 1e-4), nu {}", out.gamma, out.closure_residual, out.nu),
    ))
}

fn diffusion_closure(ctx: &Ctx) -> Result<CheckResult> {
    let grid = ctx.grid(32, 2, 1.0, 1.0)?;
    let entropy = Arc::new(LogDensityEntropy { k_b: 1.0 });
    let rho = ScalarField::from_fn(&grid, |r| 1.0 + 0.4 * (2.0 * PI * r).sin());
    let reducing = DiffusionProblem::new(
        &grid,
        entropy.clone(),
        1.0,
        DiffusionClosure::FluxReduction { n_v: 32, v_max: 8.0 },
    )?;
    let analytic = DiffusionProblem::new(&grid, entropy, 1.0, DiffusionClosure::Analytic)?;
    let closure = reducing.flux_closure(&rho)?.ok_or(Error::Construction {
        name: "flux closure".into(),
        reason: "no closure".into(),
    })?;
    let (k, _) = analytic.face_flux(&rho)?;
    let scale = k.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let gap = closure.k.values().iter().zip(&k).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    let rate = entropy_rate_diagnostic(&analytic, &rho, false, Some(1.0))?;
    let ratio_err = rate.ratio.map_or(f64::INFINITY, |r| (r - 1.0).abs());
    let score = (closure.residual_norm / 1e-10)
        .max(gap / 1e-10)
        .max(ratio_err / 1e-10)
        .max(if rate.rate_nonnegative { 0.0 } else { f64::INFINITY });
    Ok(below(
        "diffusion_closure",
        score,
        1.0,
        format!(
            "stationarity residual {:e}, closed-flux gap {gap:e}, pairing ratio error {ratio_err:e}",
            closure.residual_norm
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_selection_passes_with_warning() {
        let rep = verify(&VerifyOptions {
            checks: Some(vec![]),
            ..Default::default()
        })
        .unwrap();
        assert!(rep.passed && rep.checks.is_empty());
        assert_eq!(rep.warnings.len(), 1);
    }

    #[test]
    fn unknown_check_is_a_config_error() {
        let err = verify(&VerifyOptions {
            checks: Some(vec!["vibes".into()]),
            ..Default::default()
        })
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn selected_checks_keep_suite_order() {
        let rep = verify(&VerifyOptions {
            checks: Some(vec!["gateaux".into(), "bracket_antisymmetry".into()]),
            ..Default::default()
        })
        .unwrap();
        let names: Vec<&str> = rep.checks.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["bracket_antisymmetry", "gateaux"]);
        assert!(rep.passed, "{rep:?}");
    }
}
