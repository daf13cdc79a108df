use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use super::config::{Coupling, Resolved, Scenario};
use crate::dynamics::{
    evolve, fokker_planck_dt_max, fokker_planck_rhs, generic_rhs, hamiltonian_rhs, transport_dt_max, Diagnostics,
    Integrator,
};
use crate::error::{Error, Result};
use crate::functionals::{
    casimir, kinetic_functional, AdditiveEnergy, EntropyDensity, ExtendedEnergy, FLnF,
    FokkerPlanckDissipation, Functional, KineticEnergy, KineticEntropyDensity, Number, Square, ThermoPotential,
};
use crate::grid::{integrate_v, DistFn, ExtendedState, HydroFields, PhaseGrid, ScalarField};
use crate::io::{save_distribution, save_hydro};
use crate::poisson_grad::{
    ce_fixed_point, ce_zeroth_rhs, constitutive_fixed_point, energy_audit, euler_rhs, explicit_constitutive_solution,
    pg_rates, reduced_hydro_rhs, viscosity_extract, ConstitutiveOptions, ReducedOptions, Regularization,
};
use crate::reduction::{
    diffusion_scenario, DiffusionClosure, DiffusionProblem, LogDensityEntropy, ReductionOptions, reduce_static,
};

/// What a scenario hands back before the summary is written.
pub(crate) struct Report {
    pub diagnostics: Diagnostics,
    pub steps: usize,
    pub time: f64,
    /// Columns whose relative drift goes into the summary.
    pub conserved: Vec<&'static str>,
    pub metrics: Map<String, Value>,
    pub files: Vec<PathBuf>,
}

const BASE_COLUMNS: [&str; 5] = ["E", "N", "S", "Phi", "sigma"];

fn columns(extra: &[&str]) -> Vec<String> {
    BASE_COLUMNS.iter().chain(extra).map(|s| s.to_string()).collect()
}

pub(crate) fn dispatch(r: &Resolved, out: &Path) -> Result<Report> {
    match r.scenario {
        Scenario::FreeTransport => free_transport(r, out),
        Scenario::FpRelaxation => fp_relaxation(r, out),
        Scenario::GenericKinetic => generic_kinetic(r, out),
        Scenario::DiffusionClosure => diffusion_closure(r, out),
        Scenario::PgHierarchy => pg_run(r, out, false),
        Scenario::PgRegularized => pg_run(r, out, true),
        Scenario::CeViscosity => ce_viscosity(r, out),
        Scenario::ReducedHydro => reduced_hydro(r, out),
    }
}

fn grid(r: &Resolved) -> Result<Arc<PhaseGrid<f64>>> {
    PhaseGrid::new(r.n_r, r.n_v, r.length_r, r.v_max)
}

fn gaussian(v: f64, mean: f64, variance: f64) -> f64 {
    (-(v - mean).powi(2) / (2.0 * variance)).exp() / (2.0 * PI * variance).sqrt()
}

/// `-S + E* E + N* N` together with its three parts.
struct KineticSet {
    entropy: Arc<dyn Functional<f64>>,
    energy: Arc<KineticEnergy<f64>>,
    phi: ThermoPotential<f64>,
}

impl KineticSet {
    fn new(r: &Resolved) -> Result<Self> {
        let entropy = kinetic_functional(&r.entropy, &r.constants, r.floor)?;
        let energy = Arc::new(KineticEnergy::new(r.constants.m, 1.0)?);
        let phi = ThermoPotential::new(entropy.clone(), energy.clone(), Arc::new(Number), r.e_star, r.n_star);
        Ok(Self { entropy, energy, phi })
    }

    /// `[E, N, S, Phi]`.
    fn row(&self, f: &DistFn<f64>) -> Result<Vec<f64>> {
        let e = self.energy.value(f)?;
        let n = Number.value(f)?;
        let s = self.entropy.value(f)?;
        Ok(vec![e, n, s, -s + self.phi.e_star * e + self.phi.n_star * n])
    }
}

fn second_moment_ratio(f: &DistFn<f64>) -> f64 {
    let g = f.grid();
    let m2 = DistFn::from_fn(g, |_, v| v * v);
    f.inner(&m2).unwrap_or(f64::NAN) / f.integral()
}

fn linf(a: &DistFn<f64>, b: &DistFn<f64>) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn non_increasing(xs: &[f64], rel: f64) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0] + rel * w[0].abs().max(1.0))
}

fn non_decreasing(xs: &[f64], rel: f64) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0] - rel * w[0].abs().max(1.0))
}

fn min_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

fn snapshot(out: &Path, name: &str, f: &DistFn<f64>, files: &mut Vec<PathBuf>) -> Result<()> {
    let p = out.join(name);
    save_distribution(f, &p)?;
    files.push(p);
    Ok(())
}

fn hydro_snapshot(out: &Path, name: &str, h: &HydroFields<f64>, files: &mut Vec<PathBuf>) -> Result<()> {
    let p = out.join(name);
    save_hydro(h, &p)?;
    files.push(p);
    Ok(())
}

fn insert(m: &mut Map<String, Value>, key: &str, v: impl Into<Value>) {
    m.insert(key.to_string(), v.into());
}

/// Periodic bump in `r` times a Maxwellian in `v`.
fn bump(r: &Resolved) -> impl Fn(f64, f64) -> f64 {
    let (l, a) = (r.length_r, r.amplitude);
    let theta = r.constants.k_b * r.temperature / r.constants.m;
    move |x, v| (1.0 + a * (8.0 * ((2.0 * PI * x / l).cos() - 1.0)).exp()) * gaussian(v, 0.0, theta)
}

fn free_transport(r: &Resolved, out: &Path) -> Result<Report> {
    let grid = grid(r)?;
    let set = KineticSet::new(r)?;
    let integrator = Integrator::new(r.scheme, r.dt)?;
    integrator.check_stability(transport_dt_max(&grid, r.constants.m, r.scheme))?;
    let c_square = casimir("casimir_square", Arc::new(Square))?;
    let c_flnf = casimir("casimir_flnf", Arc::new(FLnF { k_b: 1.0, floor: r.floor }))?;

    let profile = bump(r);
    let f0 = DistFn::from_fn(&grid, &profile);
    let mut diag = Diagnostics::new(columns(&["casimir_square", "casimir_flnf"]));
    let energy = set.energy.clone();
    let mut files = Vec::new();
    snapshot(out, "snapshot_initial.csv", &f0, &mut files)?;
    let run = evolve(
        f0,
        |f: &DistFn<f64>| hamiltonian_rhs(f, energy.as_ref()),
        &integrator,
        r.t_end,
        r.stride,
        |_, t, f| {
            let mut row = set.row(f)?;
            row.push(0.0);
            row.push(c_square.value(f)?);
            row.push(c_flnf.value(f)?);
            diag.push(t, row)
        },
    )?;
    snapshot(out, "snapshot_final.csv", &run.state, &mut files)?;

    // Exact solution f0(r - v t/m, v), periodic in r.
    let (l, m, t) = (r.length_r, r.constants.m, run.time);
    let exact = DistFn::from_fn(&grid, |x, v| profile((x - v * t / m).rem_euclid(l), v));
    let err = run.state.zip_map(&exact, |a, b| a - b)?;
    let mut metrics = Map::new();
    insert(&mut metrics, "relative_l2_error", (err.inner(&err)? / exact.inner(&exact)?).sqrt());
    Ok(Report {
        diagnostics: diag,
        steps: run.steps,
        time: run.time,
        conserved: vec!["E", "N", "S", "casimir_square", "casimir_flnf"],
        metrics,
        files,
    })
}

/// Symmetric two-bump initial condition for the relaxation runs.
fn bimodal(grid: &Arc<PhaseGrid<f64>>, theta: f64, amplitude: f64) -> DistFn<f64> {
    let w = 0.5 * theta;
    let c = 1.5 * theta.sqrt();
    DistFn::from_fn(grid, |x, v| {
        (1.0 + amplitude * (2.0 * PI * x / grid.length_r()).sin())
            * 0.5
            * (gaussian(v, c, w) + gaussian(v, -c, w))
    })
}

/// Slope of `ln y` against `t` by least squares.
fn log_slope(t: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, &y)| y > 0.0).map(|(&t, &y)| (t, y.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t, b + y));
    let (mt, my) = (st / n, sy / n);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, y)| (a + (t - mt) * (y - my), b + (t - mt) * (t - mt)));
    (den > 0.0).then(|| num / den)
}

fn fp_relaxation(r: &Resolved, out: &Path) -> Result<Report> {
    let grid = grid(r)?;
    let set = KineticSet::new(r)?;
    let fp = FokkerPlanckDissipation::new(r.lambda)?;
    let integrator = Integrator::new(r.scheme, r.dt)?;
    integrator.check_stability(fokker_planck_dt_max(&grid, r.lambda, r.e_star / r.constants.m, r.scheme))?;

    // Equilibrium from the static reduction; the initial state carries the
    // same mass so the two can be compared pointwise.
    let theta_target = r.constants.k_b * r.constants.m / r.e_star;
    let start = DistFn::from_fn(&grid, |_, v| gaussian(v, 0.0, theta_target));
    let reduced = reduce_static(
        &set.phi,
        &start,
        &ReductionOptions {
            tol: 1e-12,
            seed: r.seed,
            ..Default::default()
        },
    )?;
    let summary = reduced.summary();
    let eq = reduced.minimizer;
    let raw = bimodal(&grid, theta_target, 0.0);
    let scale = eq.integral() / raw.integral();
    let f0 = raw.map(|x| x * scale);
    let theta_eq = second_moment_ratio(&eq);

    let mut diag = Diagnostics::new(columns(&["theta"]));
    let mut files = Vec::new();
    snapshot(out, "snapshot_initial.csv", &f0, &mut files)?;
    let run = evolve(
        f0,
        |f: &DistFn<f64>| fokker_planck_rhs(f, &fp, &set.phi),
        &integrator,
        r.t_end,
        r.stride,
        |_, t, f| {
            let mut row = set.row(f)?;
            row.push(fp.production(f, &set.phi.derivative(f)?)?);
            row.push(second_moment_ratio(f));
            diag.push(t, row)
        },
    )?;
    snapshot(out, "snapshot_final.csv", &run.state, &mut files)?;
    snapshot(out, "maxwellian.csv", &eq, &mut files)?;

    let times = diag.times().to_vec();
    let theta = diag.column("theta").unwrap_or_default();
    let gap: Vec<f64> = theta.iter().map(|th| (th - theta_eq).abs()).collect();
    let cutoff = gap.first().copied().unwrap_or(0.0) * 1e-6;
    let keep: Vec<usize> = (0..gap.len()).filter(|&k| gap[k] > cutoff).collect();
    let fitted = log_slope(
        &keep.iter().map(|&k| times[k]).collect::<Vec<_>>(),
        &keep.iter().map(|&k| gap[k]).collect::<Vec<_>>(),
    )
    .map(|s| -s);
    let analytic = 2.0 * r.lambda * r.e_star / r.constants.m;
    let sigma = diag.column("sigma").unwrap_or_default();
    let entropy = diag.column("S").unwrap_or_default();
    let phi = diag.column("Phi").unwrap_or_default();

    let mut metrics = Map::new();
    insert(&mut metrics, "entropy_monotone", non_decreasing(&entropy, 1e-13));
    insert(&mut metrics, "phi_monotone", non_increasing(&phi, 1e-13));
    insert(&mut metrics, "min_entropy_production", min_of(&sigma));
    insert(&mut metrics, "linf_to_maxwellian", linf(&run.state, &eq));
    insert(&mut metrics, "linf_to_maxwellian_relative", linf(&run.state, &eq) / eq.max_abs());
    insert(&mut metrics, "theta_final", theta.last().copied().unwrap_or(f64::NAN));
    insert(&mut metrics, "theta_equilibrium", theta_eq);
    insert(&mut metrics, "theta_target", theta_target);
    insert(&mut metrics, "fitted_rate", fitted.map_or(Value::Null, Value::from));
    insert(&mut metrics, "analytic_rate", analytic);
    insert(
        &mut metrics,
        "rate_relative_error",
        fitted.map_or(Value::Null, |k| Value::from((k - analytic).abs() / analytic)),
    );
    insert(&mut metrics, "reduction", serde_json::to_value(summary)?);
    Ok(Report {
        diagnostics: diag,
        steps: run.steps,
        time: run.time,
        conserved: vec!["N"],
        metrics,
        files,
    })
}

fn generic_kinetic(r: &Resolved, out: &Path) -> Result<Report> {
    let grid = grid(r)?;
    let set = KineticSet::new(r)?;
    let fp = FokkerPlanckDissipation::new(r.lambda)?;
    let integrator = Integrator::new(r.scheme, r.dt)?;
    let m = r.constants.m;
    integrator.check_stability(
        transport_dt_max(&grid, m, r.scheme).min(fokker_planck_dt_max(&grid, r.lambda, r.e_star / m, r.scheme)),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let shift = rng.gen_range(-0.5..0.5);
    let theta = r.constants.k_b * r.temperature / m;
    let (l, a) = (r.length_r, r.amplitude);
    let f0 = DistFn::from_fn(&grid, |x, v| (1.0 + a * (2.0 * PI * x / l + phase).sin()) * gaussian(v, shift, theta));

    let mut diag = Diagnostics::new(columns(&[]));
    let mut files = Vec::new();
    snapshot(out, "snapshot_initial.csv", &f0, &mut files)?;
    let run = evolve(
        f0,
        |f: &DistFn<f64>| generic_rhs(f, set.energy.as_ref(), Some(&fp), &set.phi),
        &integrator,
        r.t_end,
        r.stride,
        |_, t, f| {
            let mut row = set.row(f)?;
            row.push(fp.production(f, &set.phi.derivative(f)?)?);
            diag.push(t, row)
        },
    )?;
    snapshot(out, "snapshot_final.csv", &run.state, &mut files)?;

    let phi = diag.column("Phi").unwrap_or_default();
    let rise = phi.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let mut metrics = Map::new();
    insert(&mut metrics, "phi_monotone", non_increasing(&phi, 1e-12));
    insert(&mut metrics, "max_phi_increase", rise);
    insert(&mut metrics, "min_entropy_production", min_of(&diag.column("sigma").unwrap_or_default()));
    insert(&mut metrics, "initial_phase", phase);
    insert(&mut metrics, "initial_velocity_shift", shift);
    Ok(Report {
        diagnostics: diag,
        steps: run.steps,
        time: run.time,
        conserved: vec!["N", "E"],
        metrics,
        files,
    })
}

fn diffusion_closure(r: &Resolved, out: &Path) -> Result<Report> {
    let grid = grid(r)?;
    let k_b = r.constants.k_b;
    let entropy = Arc::new(LogDensityEntropy { k_b });
    let problem = DiffusionProblem::new(&grid, entropy.clone(), r.lambda, DiffusionClosure::Analytic)?;
    let (l, a) = (r.length_r, r.amplitude);
    let k = 2.0 * PI / l;
    let rho0 = ScalarField::from_fn(&grid, |x| 1.0 + a * (k * x).sin());

    // The closed flux from the flux-level reduction at the initial state.
    let reducing = DiffusionProblem::new(
        &grid,
        entropy,
        r.lambda,
        DiffusionClosure::FluxReduction { n_v: 64, v_max: 8.0 },
    )?;
    let closure = reducing.flux_closure(&rho0)?.ok_or(Error::Construction {
        name: "flux closure".into(),
        reason: "flux reduction returned no closure".into(),
    })?;
    let (k_analytic, _) = problem.face_flux(&rho0)?;
    let flux_gap = closure
        .k
        .values()
        .iter()
        .zip(&k_analytic)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let flux_scale = k_analytic.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);

    let integrator = Integrator::new(r.scheme, r.dt)?;
    let run = diffusion_scenario(&problem, &rho0, &integrator, r.t_end, r.stride)?;
    let mut diag = Diagnostics::new(columns(&[]));
    let (mass, s, prod) = (
        run.diagnostics.column("mass").unwrap_or_default(),
        run.diagnostics.column("S").unwrap_or_default(),
        run.diagnostics.column("production").unwrap_or_default(),
    );
    for (n, &t) in run.diagnostics.times().iter().enumerate() {
        diag.push(t, vec![0.0, mass[n], s[n], -s[n] + r.n_star * mass[n], prod[n]])?;
    }

    let d = k_b / r.lambda;
    let t = diag.times().last().copied().unwrap_or(0.0);
    let decay = (-d * k * k * t).exp();
    let exact = ScalarField::from_fn(&grid, |x| 1.0 + a * decay * (k * x).sin());
    let err = run.state.zip_map(&exact, |p, q| p - q)?;
    let perturbation = exact.map(|q| q - 1.0);
    let mut files = Vec::new();
    let hydro = |rho: &ScalarField<f64>| HydroFields {
        rho: rho.clone(),
        u: ScalarField::zeros(&grid),
        s: ScalarField::zeros(&grid),
    };
    hydro_snapshot(out, "density_initial.csv", &hydro(&rho0), &mut files)?;
    hydro_snapshot(out, "density_final.csv", &hydro(&run.state), &mut files)?;

    let mut metrics = Map::new();
    insert(&mut metrics, "stationarity_residual", closure.residual_norm);
    insert(&mut metrics, "lower_flux_entropy", closure.lower_flux_entropy_value);
    insert(&mut metrics, "closed_flux_relative_gap", flux_gap / flux_scale);
    insert(&mut metrics, "diffusivity", d);
    insert(&mut metrics, "relative_l2_error", (err.inner(&err)? / perturbation.inner(&perturbation)?).sqrt());
    insert(&mut metrics, "mass_drift", run.mass_drift);
    insert(&mut metrics, "entropy_monotone", run.entropy_monotone);
    insert(&mut metrics, "min_entropy_production", run.min_production);
    Ok(Report {
        diagnostics: diag,
        steps: run.steps,
        time: t,
        conserved: vec!["N"],
        metrics,
        files,
    })
}

/// Energy, `η` and the temperature-matched initial state of the hydrodynamic
/// scenarios.
struct HydroSetup {
    energy: AdditiveEnergy<f64>,
    eta: Arc<dyn EntropyDensity<f64>>,
}

impl HydroSetup {
    fn new(r: &Resolved) -> Result<Self> {
        let energy = AdditiveEnergy::sackur_tetrode(r.constants, r.c_h, r.c_k)?;
        let eta: Arc<dyn EntropyDensity<f64>> = match r.eta.as_str() {
            "f_ln_f" => Arc::new(FLnF {
                k_b: r.constants.k_b,
                floor: r.floor,
            }),
            _ => Arc::new(KineticEntropyDensity {
                k_b: r.constants.k_b,
                h: r.constants.h,
                floor: r.floor,
            }),
        };
        Ok(Self { energy, eta })
    }

    /// Velocity variance of the local equilibrium `f ∝ exp(-E_f / k_B T)`.
    fn variance(&self, r: &Resolved, temperature: f64) -> f64 {
        r.constants.m * r.constants.k_b * temperature / r.c_k
    }

    /// `f = (ρ/m) G(v; m k_B T / c_k)` with `T = E_s` from the hydro energy.
    fn local_equilibrium(&self, r: &Resolved, h: &HydroFields<f64>) -> Result<DistFn<f64>> {
        let grid = h.rho.grid();
        let [_, _, _, e_s] = self.energy.hydro().fields(&h.rho, &h.u, &h.s)?;
        let mut f = DistFn::zeros(grid);
        for i in 0..grid.n_r() {
            let var = self.variance(r, e_s.values()[i]);
            let n = h.rho.values()[i] / r.constants.m;
            for (j, y) in f.column_mut(i).iter_mut().enumerate() {
                *y = n * gaussian(grid.v(j), 0.0, var);
            }
        }
        Ok(f)
    }

    fn initial(&self, r: &Resolved, grid: &Arc<PhaseGrid<f64>>) -> Result<ExtendedState<f64>> {
        let (l, a) = (r.length_r, r.amplitude);
        let k = 2.0 * PI / l;
        let rho = ScalarField::from_fn(grid, |x| 1.0 + a * (k * x).sin());
        let u = ScalarField::from_fn(grid, |x| 0.5 * a * (k * x).cos());
        let st = crate::functionals::SackurTetrodeHydro::new(r.constants, r.c_h)?;
        let mut s = Vec::with_capacity(grid.n_r());
        for &rv in rho.values() {
            s.push(st.entropy_for_temperature(rv, r.temperature).ok_or_else(|| {
                Error::Config(format!("no entropy gives temperature {} at density {rv}", r.temperature))
            })?);
        }
        let s = ScalarField::from_values(grid, s)?;
        let h = HydroFields { rho, u, s };
        let f = self.local_equilibrium(r, &h)?;
        ExtendedState::new(h.rho, h.u, h.s, f)
    }
}

fn hydro_of(x: &ExtendedState<f64>) -> HydroFields<f64> {
    HydroFields {
        rho: x.rho.clone(),
        u: x.u.clone(),
        s: x.s.clone(),
    }
}

fn pg_run(r: &Resolved, out: &Path, regularized: bool) -> Result<Report> {
    let grid = grid(r)?;
    let setup = HydroSetup::new(r)?;
    let x0 = setup.initial(r, &grid)?;
    let integrator = Integrator::new(r.scheme, r.dt)?;
    integrator.check_stability(transport_dt_max(&grid, r.constants.m / r.c_k, r.scheme))?;
    let reg = if regularized {
        Some(Regularization {
            fp: FokkerPlanckDissipation::new(r.lambda)?,
            epsilon: r.epsilon,
        })
    } else {
        None
    };
    let energy = &setup.energy;
    let eta = setup.eta.as_ref();
    let hydro_energy = energy.hydro().clone();
    let decoupled = r.coupling == Coupling::Decoupled;

    let rhs = |x: &ExtendedState<f64>| -> Result<ExtendedState<f64>> {
        let mut out = pg_rates(x, energy, eta, reg.as_ref())?.rhs;
        if decoupled {
            let e = euler_rhs(&x.rho, &x.u, &x.s, hydro_energy.as_ref())?;
            out.rho = e.rho;
            out.u = e.u;
            out.s = e.s;
        }
        Ok(out)
    };

    let mut diag = Diagnostics::new(columns(&["mass", "momentum"]));
    let mut audit = Diagnostics::new([
        "energy",
        "rate_reversible",
        "rate_regularized",
        "kinetic_dissipation",
        "entropy_heating",
        "relative_defect",
    ]);
    let mut euler_bitwise = true;
    let mut min_production = f64::INFINITY;
    let mut files = Vec::new();
    snapshot(out, "snapshot_initial.csv", &x0.f, &mut files)?;
    hydro_snapshot(out, "hydro_initial.csv", &hydro_of(&x0), &mut files)?;
    let run = evolve(
        x0,
        rhs,
        &integrator,
        r.t_end,
        r.stride,
        |_, t, x| {
            let rates = pg_rates(x, energy, eta, reg.as_ref())?;
            let e = euler_rhs(&x.rho, &x.u, &x.s, hydro_energy.as_ref())?;
            euler_bitwise &= rates.euler.rho.values() == e.rho.values()
                && rates.euler.u.values() == e.u.values()
                && rates.euler.s.values() == e.s.values();
            let c = energy.conjugates(x)?;
            let sigma: Vec<f64> =
                rates.production.values().iter().zip(c.e_s.values()).map(|(p, t)| p / t).collect();
            min_production = sigma.iter().copied().fold(min_production, f64::min);
            let sigma = ScalarField::from_values(&grid, sigma)?.integral();
            let e_total = energy.value(x)?;
            let n = x.f.integral();
            let s = x.s.integral();
            diag.push(
                t,
                vec![e_total, n, s, -s + r.e_star * e_total + r.n_star * n, sigma, x.rho.integral(), x.u.integral()],
            )?;
            if let Some(reg) = &reg {
                let a = energy_audit(x, energy, eta, reg)?;
                audit.push(
                    t,
                    vec![
                        a.energy,
                        a.rate_reversible,
                        a.rate_regularized,
                        a.kinetic_dissipation,
                        a.entropy_heating,
                        a.relative_defect,
                    ],
                )?;
            }
            Ok(())
        },
    )?;
    snapshot(out, "snapshot_final.csv", &run.state.f, &mut files)?;
    hydro_snapshot(out, "hydro_final.csv", &hydro_of(&run.state), &mut files)?;

    let mut metrics = Map::new();
    insert(&mut metrics, "euler_decoupling_bitwise", euler_bitwise);
    insert(&mut metrics, "min_entropy_production", min_production);
    insert(&mut metrics, "min_distribution", run.state.f.min_value());
    if regularized {
        let p = out.join("energy_audit.csv");
        audit.save(&p)?;
        files.push(p);
        let defects = audit.column("relative_defect").unwrap_or_default();
        insert(&mut metrics, "max_energy_audit_defect", defects.iter().copied().fold(0.0, f64::max));
        insert(&mut metrics, "epsilon", r.epsilon);
    }
    Ok(Report {
        diagnostics: diag,
        steps: run.steps,
        time: run.time,
        conserved: vec!["mass", "momentum", "N", "E"],
        metrics,
        files,
    })
}

fn ce_viscosity(r: &Resolved, out: &Path) -> Result<Report> {
    let grid = grid(r)?;
    let set = KineticSet::new(r)?;
    let fp = FokkerPlanckDissipation::new(r.lambda)?;
    let integrator = Integrator::new(r.scheme, r.dt)?;
    let m = r.constants.m;
    integrator.check_stability(fokker_planck_dt_max(&grid, r.lambda, r.e_star / m, r.scheme))?;
    let g = ScalarField::constant(&grid, r.velocity_gradient);
    let rho = ScalarField::constant(&grid, 1.0);
    let k_b = r.constants.k_b;
    let fixed = ce_fixed_point(&grid, &g.map(|x| x / k_b), r.lambda, r.e_star / (m * k_b), &rho)?;
    let at_fixed = viscosity_extract(&fixed, r.lambda, &g, &set.phi)?;
    let fixed_rate = ce_zeroth_rhs(&fixed, &g, &fp, &set.phi)?.max_abs();

    // Relax from the unforced Maxwellian towards the fixed point.
    let theta = r.constants.k_b * m / r.e_star;
    let f0 = DistFn::from_fn(&grid, |_, v| gaussian(v, 0.0, theta));
    let norm = integrate_v(&f0);
    let f0 = DistFn::from_fn(&grid, |_, v| gaussian(v, 0.0, theta) / norm.values()[0]);
    let mut diag = Diagnostics::new(columns(&["gamma", "rate"]));
    let mut files = Vec::new();
    snapshot(out, "snapshot_initial.csv", &f0, &mut files)?;
    let v2 = DistFn::from_fn(&grid, |_, v| v * v);
    let run = evolve(
        f0,
        |f: &DistFn<f64>| ce_zeroth_rhs(f, &g, &fp, &set.phi),
        &integrator,
        r.t_end,
        r.stride,
        |_, t, f| {
            let mut row = set.row(f)?;
            row.push(fp.production(f, &set.phi.derivative(f)?)?);
            row.push(f.inner(&v2)? / f.grid().length_r());
            row.push(ce_zeroth_rhs(f, &g, &fp, &set.phi)?.max_abs());
            diag.push(t, row)
        },
    )?;
    snapshot(out, "snapshot_final.csv", &run.state, &mut files)?;
    snapshot(out, "fixed_point.csv", &fixed, &mut files)?;
    let relaxed = viscosity_extract(&run.state, r.lambda, &g, &set.phi)?;

    let result = json!({
        "fixed_point": at_fixed,
        "relaxed": relaxed,
        "lambda": r.lambda,
        "velocity_gradient": r.velocity_gradient,
    });
    let p = out.join("viscosity.json");
    std::fs::write(&p, serde_json::to_string_pretty(&result)?)?;
    files.push(p);

    let mut metrics = Map::new();
    insert(&mut metrics, "gamma", at_fixed.gamma);
    insert(&mut metrics, "nu", at_fixed.nu);
    insert(&mut metrics, "closure_residual", at_fixed.closure_residual);
    insert(&mut metrics, "fixed_point_rate", fixed_rate);
    insert(&mut metrics, "relaxed_gamma", relaxed.gamma);
    insert(&mut metrics, "relaxed_closure_residual", relaxed.closure_residual);
    insert(&mut metrics, "linf_relaxed_to_fixed_point", linf(&run.state, &fixed));
    Ok(Report {
        diagnostics: diag,
        steps: run.steps,
        time: run.time,
        conserved: vec!["N"],
        metrics,
        files,
    })
}

fn reduced_hydro(r: &Resolved, out: &Path) -> Result<Report> {
    let grid = grid(r)?;
    let setup = HydroSetup::new(r)?;
    let x0 = setup.initial(r, &grid)?;
    let integrator = Integrator::new(r.scheme, r.dt)?;
    let options = ReducedOptions {
        off_diagonal: r.coupling == Coupling::Full,
    };
    let energy = &setup.energy;
    let eta = setup.eta.as_ref();
    let lambda = r.lambda;

    // Constitutive relation at the initial state, for the record.
    let mut constitutive = Map::new();
    match constitutive_fixed_point(&x0, energy, eta, lambda, &ConstitutiveOptions::default()) {
        Ok(sol) => {
            insert(&mut constitutive, "summary", serde_json::to_value(sol.summary())?);
            if r.eta == "kinetic_entropy" {
                let kin = KineticEntropyDensity {
                    k_b: r.constants.k_b,
                    h: r.constants.h,
                    floor: r.floor,
                };
                let explicit = explicit_constitutive_solution(&x0, energy, &kin, lambda)?;
                insert(&mut constitutive, "linf_to_explicit", linf(&sol.f, &explicit));
            }
        }
        Err(e) => insert(&mut constitutive, "error", e.to_string()),
    }

    let close = |h: &HydroFields<f64>| -> Result<ExtendedState<f64>> {
        let f = setup.local_equilibrium(r, h)?;
        ExtendedState::new(h.rho.clone(), h.u.clone(), h.s.clone(), f)
    };
    let h0 = hydro_of(&x0);
    // Diffusive step bound from the largest transport coefficient.
    let probe = reduced_hydro_rhs(&x0, energy, eta, lambda, &options)?;
    let nu = probe.viscosity.max_abs();
    if nu > 0.0 {
        let dr = grid.dr();
        let c_u = r.c_h / x0.rho.values().iter().copied().fold(f64::INFINITY, f64::min);
        integrator.check_stability(r.scheme.real_limit::<f64>() * dr * dr / (4.0 * nu * c_u))?;
    }

    let mut diag = Diagnostics::new(columns(&["mass", "momentum", "max_extra_mass_flux", "mean_viscosity"]));
    let mut min_production = f64::INFINITY;
    let mut files = Vec::new();
    hydro_snapshot(out, "hydro_initial.csv", &h0, &mut files)?;
    let run = evolve(
        h0,
        |h: &HydroFields<f64>| Ok(reduced_hydro_rhs(&close(h)?, energy, eta, lambda, &options)?.rhs),
        &integrator,
        r.t_end,
        r.stride,
        |_, t, h| {
            let x = close(h)?;
            let rates = reduced_hydro_rhs(&x, energy, eta, lambda, &options)?;
            min_production = rates.production.values().iter().copied().fold(min_production, f64::min);
            let e = energy.value(&x)?;
            let n = x.f.integral();
            let s = h.s.integral();
            let extra = rates.extra_mass_flux.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            diag.push(
                t,
                vec![
                    e,
                    n,
                    s,
                    -s + r.e_star * e + r.n_star * n,
                    rates.production.integral(),
                    h.rho.integral(),
                    h.u.integral(),
                    extra,
                    rates.viscosity.integral() / grid.length_r(),
                ],
            )
        },
    )?;
    hydro_snapshot(out, "hydro_final.csv", &run.state, &mut files)?;
    snapshot(out, "snapshot_final.csv", &close(&run.state)?.f, &mut files)?;

    let mut metrics = Map::new();
    insert(&mut metrics, "min_entropy_production", min_production);
    insert(&mut metrics, "entropy_monotone", non_decreasing(&diag.column("S").unwrap_or_default(), 1e-12));
    insert(&mut metrics, "off_diagonal", options.off_diagonal);
    insert(&mut metrics, "constitutive", Value::Object(constitutive));
    Ok(Report {
        diagnostics: diag,
        steps: run.steps,
        time: run.time,
        conserved: vec!["mass", "momentum"],
        metrics,
        files,
    })
}
