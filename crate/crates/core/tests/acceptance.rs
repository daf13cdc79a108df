//! End-to-end acceptance criteria. Each test prints one `PASS`/`FAIL` line
//! with the measured values and then asserts on the same verdict.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use flux_thermo::functionals::{
    boltzmann_entropy, AdditiveEnergy, ExtendedEnergy, FokkerPlanckDissipation, KineticEnergy, KineticEntropyDensity, LinearFunctional,
    Number, PhysicalConstants, QuadraticEntropy,
};
use flux_thermo::grid::{DistFn, ExtendedState, PhaseGrid, ScalarField};
use flux_thermo::poisson_grad::{energy_audit, euler_rhs, pg_rates, Regularization};
use flux_thermo::reduction::{legendre_involution_check, multiplier_grid, LegendreOptions, MaxEntProblem, ReductionOptions};
use flux_thermo::scenario::{self, Mutation, ScenarioConfig, VerifyOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn verdict(id: u32, name: &str, ok: bool, detail: String) -> bool {
    println!("criterion {id} ({name}): {} {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn config(text: &str) -> ScenarioConfig {
    ScenarioConfig::from_json(text).unwrap()
}

fn columns(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(str::to_string).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for rec in rd.records() {
        for (c, x) in cols.iter_mut().zip(rec.unwrap().iter()) {
            c.push(x.parse::<f64>().unwrap());
        }
    }
    (header, cols)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (h, mut cols) = columns(path);
    let k = h.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name} in {}", path.display()));
    cols.swap_remove(k)
}

fn metric(summary: &Value, key: &str) -> f64 {
    summary["metrics"][key].as_f64().unwrap_or_else(|| panic!("metric {key} missing"))
}

#[test]
fn criterion_1_maxent_gives_the_maxwellian() {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let cfg = config(
        r#"{"grid": {"n_r": 1, "n_v": 256, "v_max": 8.0},
            "parameters": {"e_star": 1.0, "n_star": 0.0},
            "reduce": {"kind": "maxent", "n_e": 1, "n_n": 1, "e_range": [1.0, 1.0], "n_range": [0.0, 0.0]}}"#,
    );
    scenario::reduce(&cfg, tmp.path()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    // Stationarity of -S + E*E + N*N with S = -∫ f ln f: ln f + 1 + v²/2 = 0.
    let path = tmp.path().join("maxwellian.csv");
    let (v, f) = (column(&path, "v"), column(&path, "f"));
    assert_eq!(v.len(), 256);
    let linf = v
        .iter()
        .zip(&f)
        .map(|(v, f)| {
            let exact = (-1.0 - v * v / 2.0f64).exp();
            (f - exact).abs() / exact
        })
        .fold(0.0, f64::max);
    let ok = linf <= 1e-6 && elapsed < 5.0;
    assert!(verdict(1, "maxent", ok, format!("L-inf relative {linf:.3e} (tol 1e-6), {elapsed:.2} s (limit 5 s)")));
}

/// `S(E, N)` of the one-dimensional ideal gas with `S = -∫ f ln f`, `m = 1`.
fn ideal_gas_entropy(e: f64, n: f64) -> f64 {
    n * ((4.0 * PI * e / n).sqrt() / n).ln() + n / 2.0
}

#[test]
fn criterion_2_legendre_involution() {
    let start = Instant::now();
    let grid = PhaseGrid::new(2, 10, 1.0, 2.0).unwrap();
    let c = DistFn::from_fn(&grid, |r, v| 0.3 - r + 0.2 * v);
    let quadratic = MaxEntProblem {
        entropy: Arc::new(QuadraticEntropy::centered_at(c)),
        energy: Arc::new(LinearFunctional::new("a", DistFn::from_fn(&grid, |_, v| v * v / 2.0))),
        number: Arc::new(LinearFunctional::new("b", DistFn::constant(&grid, 1.0))),
        x0: DistFn::zeros(&grid),
        options: ReductionOptions::quadratic(),
    };
    let pairs = multiplier_grid((-0.5, 1.5), (-1.0, 1.0), 5, 5).unwrap();
    let q = legendre_involution_check(&quadratic, &pairs, &LegendreOptions::default()).unwrap();

    let kgrid = PhaseGrid::<f64>::new(1, 256, 1.0, 8.0).unwrap();
    let boltzmann = MaxEntProblem {
        entropy: Arc::new(boltzmann_entropy(1.0, None)),
        energy: Arc::new(KineticEnergy::new(1.0, 1.0).unwrap()),
        number: Arc::new(Number),
        x0: DistFn::from_fn(&kgrid, |_, v: f64| (-v * v / 2.0).exp() / (2.0 * PI).sqrt()),
        options: ReductionOptions {
            tol: 1e-12,
            ..Default::default()
        },
    };
    let pairs = multiplier_grid((0.5, 2.0), (-0.5, 0.5), 5, 5).unwrap();
    let b = legendre_involution_check(&boltzmann, &pairs, &LegendreOptions::default()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let analytic = b
        .points
        .iter()
        .map(|p| (p.entropy_back - ideal_gas_entropy(p.energy, p.number)).abs() / ideal_gas_entropy(p.energy, p.number).abs().max(1.0))
        .fold(0.0, f64::max);
    let ok = q.points.len() == 25
        && b.points.len() == 25
        && q.max_deviation <= 1e-12
        && b.max_relative_deviation <= 1e-4
        && analytic <= 1e-4
        && elapsed < 30.0;
    assert!(verdict(
        2,
        "legendre involution",
        ok,
        format!(
            "quadratic {:.3e} (tol 1e-12), Boltzmann {:.3e} (tol 1e-4), vs ideal gas {analytic:.3e}, {elapsed:.2} s (limit 30 s)",
            q.max_deviation, b.max_relative_deviation
        )
    ));
}

fn free_transport(n_v: usize, out: &Path) -> Value {
    let cfg = config(&format!(
        r#"{{"scenario": "free-transport",
            "grid": {{"n_r": 128, "n_v": {n_v}, "length_r": 1.0, "v_max": 6.0}},
            "integrator": {{"scheme": "rk4", "dt": 2e-5, "t_end": 0.02, "stride": 10}}}}"#
    ));
    scenario::run(&cfg, out).unwrap().summary
}

#[test]
fn criterion_3_hamiltonian_conservation() {
    let tmp = tempfile::tempdir().unwrap();
    let fine = free_transport(128, &tmp.path().join("fine"));
    assert_eq!(fine["steps"], 1000);
    let drift = |s: &Value, k: &str| s["drifts"][k].as_f64().unwrap();
    let worst = ["E", "N", "casimir_square", "casimir_flnf"].iter().map(|k| drift(&fine, k)).fold(0.0, f64::max);
    let conserved = worst <= 1e-8;

    // Halving dv: 64 -> 128 velocity cells over the same range.
    let coarse = free_transport(64, &tmp.path().join("coarse"));
    let ratio = drift(&coarse, "casimir_flnf") / drift(&fine, "casimir_flnf");
    let refines = (3.5..=4.5).contains(&ratio);
    let detail = format!(
        "max drift {worst:.3e} (tol 1e-8; E {:.1e}, N {:.1e}, f^2 {:.1e}, -f ln f {:.1e}); -f ln f drift ratio under dv/2 {ratio:.3} (want 3.5..4.5)",
        drift(&fine, "E"),
        drift(&fine, "N"),
        drift(&fine, "casimir_square"),
        drift(&fine, "casimir_flnf"),
    );
    assert!(verdict(3, "hamiltonian conservation", conserved && refines, detail));
}

#[test]
fn criterion_4_fokker_planck_relaxation() {
    for (lambda, e_star) in [(1.0, 1.0), (0.7, 1.5)] {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config(&format!(
            r#"{{"scenario": "fp-relaxation",
                "grid": {{"n_r": 1, "n_v": 128, "v_max": 8.0}},
                "parameters": {{"lambda": {lambda}, "e_star": {e_star}}},
                "integrator": {{"scheme": "rk4", "dt": 1e-3, "t_end": 8.0, "stride": 10}}}}"#
        ));
        let summary = scenario::run(&cfg, tmp.path()).unwrap().summary;

        // Second moment of the linear drift-diffusion operator relaxes at 2ΛE*/m.
        let analytic = 2.0 * lambda * e_star;
        let diag = tmp.path().join("diagnostics.csv");
        let (t, theta, sigma) = (column(&diag, "t"), column(&diag, "theta"), column(&diag, "sigma"));
        let target = 1.0 / e_star;
        let pts: Vec<(f64, f64)> = t
            .iter()
            .zip(&theta)
            .map(|(t, th)| (*t, (th - target).abs()))
            .filter(|(_, g)| *g < 1e-2 * target && *g > 1e-7 * target)
            .map(|(t, g)| (t, g.ln()))
            .collect();
        let n = pts.len() as f64;
        let (mt, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        let slope = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
        let rate_err = (-slope - analytic).abs() / analytic;

        let min_sigma = sigma.iter().copied().fold(f64::INFINITY, f64::min);
        let min_production = metric(&summary, "min_entropy_production");
        let linf = metric(&summary, "linf_to_maxwellian");
        let theta_err = (theta.last().unwrap() - target).abs() / target;
        let ok = pts.len() > 20 && rate_err <= 0.05 && min_sigma >= 0.0 && min_production >= 0.0 && linf <= 1e-4 && theta_err < 1e-4;
        assert!(verdict(
            4,
            "fokker-planck relaxation",
            ok,
            format!(
                "Λ {lambda}, E* {e_star}: fitted rate {:.4} vs {analytic:.4} ({:.2}% , tol 5%), min production {min_production:.3e}, \
                 L-inf to reduction {linf:.3e} (tol 1e-4), final θ error {theta_err:.1e}",
                -slope,
                100.0 * rate_err
            )
        ));
    }
}

/// Periodic heat equation solved exactly from the sampled initial data.
fn heat_kernel(rho0: &[f64], length: f64, d: f64, t: f64) -> Vec<f64> {
    let n = rho0.len();
    let mut out = vec![0.0; n];
    for k in 0..n {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, &y) in rho0.iter().enumerate() {
            let ph = 2.0 * PI * (k * j) as f64 / n as f64;
            re += y * ph.cos();
            im -= y * ph.sin();
        }
        // Symmetric wavenumber, and the eigenvalue of the exact Laplacian.
        let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let decay = (-d * (2.0 * PI * kk / length).powi(2) * t).exp();
        for (j, o) in out.iter_mut().enumerate() {
            let ph = 2.0 * PI * (k * j) as f64 / n as f64;
            *o += decay * (re * ph.cos() - im * ph.sin()) / n as f64;
        }
    }
    out
}

#[test]
fn criterion_5_diffusion_closure() {
    let tmp = tempfile::tempdir().unwrap();
    let lambda = 2.0;
    let cfg = config(&format!(
        r#"{{"scenario": "diffusion-closure",
            "grid": {{"n_r": 256, "n_v": 2, "length_r": 1.0}},
            "parameters": {{"lambda": {lambda}, "amplitude": 0.5}},
            "integrator": {{"scheme": "rk4", "dt": 5e-6, "t_end": 0.1, "stride": 200}}}}"#
    ));
    let summary = scenario::run(&cfg, tmp.path()).unwrap().summary;
    let rho0 = column(&tmp.path().join("density_initial.csv"), "rho");
    let rho1 = column(&tmp.path().join("density_final.csv"), "rho");
    assert_eq!(rho0.len(), 256);
    let t = summary["t_final"].as_f64().unwrap();
    let exact = heat_kernel(&rho0, 1.0, 1.0 / lambda, t);
    let mean = rho0.iter().sum::<f64>() / 256.0;
    let err: f64 = rho1.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = exact.iter().map(|b| (b - mean).powi(2)).sum::<f64>().sqrt();
    let l2 = err / scale;
    let stationarity = metric(&summary, "stationarity_residual");
    let mass = metric(&summary, "mass_drift");
    let ok = stationarity <= 1e-10 && l2 <= 1e-3 && mass <= 1e-12 && (t - 0.1).abs() < 1e-12;
    assert!(verdict(
        5,
        "diffusion closure",
        ok,
        format!(
            "stationarity residual {stationarity:.3e} (tol 1e-10), relative L2 to heat kernel with D = 1/Λ {l2:.3e} (tol 1e-3), \
             mass drift {mass:.3e} (tol 1e-12)"
        )
    ));
}

#[test]
fn criterion_6_viscosity() {
    for lambda in [1.0, 2.5] {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config(&format!(
            r#"{{"scenario": "ce-viscosity",
                "grid": {{"n_r": 1, "n_v": 128, "v_max": 8.0}},
                "parameters": {{"lambda": {lambda}, "e_star": 1.0, "velocity_gradient": 5e-5}},
                "integrator": {{"scheme": "rk4", "dt": 1e-3, "t_end": 2.0, "stride": 100}}}}"#
        ));
        let summary = scenario::run(&cfg, tmp.path()).unwrap().summary;
        let (gamma, residual, nu) = (metric(&summary, "gamma"), metric(&summary, "closure_residual"), metric(&summary, "nu"));
        let ok = (gamma - 1.0).abs() <= 1e-4 && residual <= 1e-4 && (nu - gamma / (2.0 * lambda)).abs() <= 1e-14
            && (nu - 1.0 / (2.0 * lambda)).abs() <= 1e-4 / (2.0 * lambda);
        assert!(verdict(
            6,
            "viscosity",
            ok,
            format!("Λ {lambda}: Γ {gamma:.8} (1 ± 1e-4), closure residual {residual:.3e} (tol 1e-4), ν {nu:.8} vs 1/(2Λ) {}", 0.5 / lambda)
        ));
    }
}

fn random_state(grid: &Arc<PhaseGrid<f64>>, rng: &mut ChaCha8Rng) -> ExtendedState<f64> {
    let tau = 2.0 * PI;
    let (a, b, c, p): (f64, f64, f64, f64) = (rng.gen_range(0.0..0.4), rng.gen_range(-0.3..0.3), rng.gen_range(0.0..0.5), rng.gen_range(0.0..tau));
    let (shift, var): (f64, f64) = (rng.gen_range(-0.5..0.5), rng.gen_range(0.6..1.6));
    let rho = ScalarField::from_fn(grid, |r| 1.0 + a * (tau * r + p).sin());
    let u = ScalarField::from_fn(grid, |r| b * (tau * r).cos());
    let s = ScalarField::from_fn(grid, |r| (1.0 + a * (tau * r + p).sin()) * (3.0 + c * (2.0 * tau * r).sin()));
    let f = DistFn::from_fn(grid, |r, v| {
        (1.0 + a * (tau * r + p).sin()) * (-(v - shift).powi(2) / (2.0 * var)).exp() / (tau * var).sqrt()
    });
    ExtendedState::new(rho, u, s, f).unwrap()
}

#[test]
fn criterion_7_poisson_grad_structure() {
    let grid = PhaseGrid::new(16, 32, 1.0, 6.0).unwrap();
    let energy = AdditiveEnergy::sackur_tetrode(PhysicalConstants::default(), 0.5, 0.5).unwrap();
    let eta = KineticEntropyDensity { k_b: 1.0, h: 1.0, floor: None };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut bitwise, mut audit, mut min_sigma) = (true, 0.0f64, f64::INFINITY);
    for k in 0..10 {
        let x = random_state(&grid, &mut rng);
        let reg = Regularization {
            fp: FokkerPlanckDissipation::new(0.3 + 0.25 * k as f64).unwrap(),
            epsilon: 1.0 / (1.0 + k as f64),
        };
        let euler = euler_rhs(&x.rho, &x.u, &x.s, energy.hydro().as_ref()).unwrap();
        for r in [None, Some(&reg)] {
            let rates = pg_rates(&x, &energy, &eta, r).unwrap();
            bitwise &= rates.euler.rho.values() == euler.rho.values()
                && rates.euler.u.values() == euler.u.values()
                && rates.euler.s.values() == euler.s.values();
            if r.is_some() {
                let temperature = energy.conjugates(&x).unwrap().e_s;
                for (p, t) in rates.production.values().iter().zip(temperature.values()) {
                    min_sigma = min_sigma.min(p / t);
                }
            }
        }
        audit = audit.max(energy_audit(&x, &energy, &eta, &reg).unwrap().relative_defect);
    }
    let ok = bitwise && audit <= 1e-8 && min_sigma >= 0.0;
    assert!(verdict(
        7,
        "poisson-grad structure",
        ok,
        format!("Euler part bitwise identical: {bitwise}; energy audit {audit:.3e} (tol 1e-8); min σ_s {min_sigma:.3e}")
    ));
}

#[test]
fn criterion_8_verification_suite() {
    let start = Instant::now();
    let clean = scenario::verify(&VerifyOptions {
        seed: 0,
        checks: None,
        mutation: None,
    })
    .unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let mut caught = Vec::new();
    for m in [Mutation::FlipFokkerPlanckSign, Mutation::BreakQuadratureWeight] {
        let r = scenario::verify(&VerifyOptions {
            seed: 0,
            checks: None,
            mutation: Some(m),
        })
        .unwrap();
        caught.push((m, r.failures));
    }
    let ok = clean.passed && clean.checks.len() == scenario::CHECKS.len() && elapsed < 120.0
        && caught.iter().all(|(_, f)| !f.is_empty());
    assert!(verdict(
        8,
        "verification suite",
        ok,
        format!(
            "{} checks, failures {:?}, {elapsed:.2} s (limit 120 s); mutations caught by {:?}",
            clean.checks.len(),
            clean.failures,
            caught
        )
    ));
}
