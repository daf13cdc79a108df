use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::functionals::{kinetic_functional, KineticEnergy, Number, PhysicalConstants};
use crate::grid::{DistFn, PhaseGrid, ScalarField};
use crate::io::{fmt, save_distribution};
use crate::reduction::{
    multiplier_grid, reduce_static, DiffusionClosure, DiffusionProblem, DualRelation, LogDensityEntropy,
    MaxEntProblem, ReductionOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceKind {
    MaxEnt,
    FluxClosure,
}

impl ReduceKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "maxent" => Some(Self::MaxEnt),
            "flux-closure" => Some(Self::FluxClosure),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReduceOutcome {
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

struct Settings {
    kind: ReduceKind,
    n_r: usize,
    n_v: usize,
    length_r: f64,
    v_max: f64,
    constants: PhysicalConstants<f64>,
    entropy: String,
    floor: Option<f64>,
    e_star: f64,
    n_star: f64,
    lambda: f64,
    amplitude: f64,
    e_range: (f64, f64),
    n_range: (f64, f64),
    n_e: usize,
    n_n: usize,
    seed: u64,
}

fn bad(msg: String) -> Error {
    Error::Config(msg)
}

fn settings(config: &ScenarioConfig) -> Result<Settings> {
    let rc = config
        .reduce
        .clone()
        .ok_or_else(|| bad("missing required field `reduce`".into()))?;
    let name = rc.kind.as_deref().ok_or_else(|| bad("missing required field `reduce.kind`".into()))?;
    let kind = ReduceKind::parse(name)
        .ok_or_else(|| bad(format!("`reduce.kind` = `{name}` is not maxent or flux-closure")))?;
    let g = config.grid.clone().unwrap_or_default();
    let c = config.constants.clone().unwrap_or_default();
    let fnc = config.functionals.clone().unwrap_or_default();
    let p = config.parameters.clone().unwrap_or_default();
    let (dn_r, dn_v) = match kind {
        ReduceKind::MaxEnt => (1, 256),
        ReduceKind::FluxClosure => (64, 64),
    };
    let positive = |name: &str, x: f64| {
        if x > 0.0 && x.is_finite() {
            Ok(x)
        } else {
            Err(bad(format!("`{name}` must be positive and finite, got {x}")))
        }
    };
    let n_v = g.n_v.unwrap_or(dn_v);
    let n_r = g.n_r.unwrap_or(dn_r);
    if n_r == 0 || n_v < 2 || !n_v.is_multiple_of(2) {
        return Err(bad("`grid.n_r` must be >= 1 and `grid.n_v` even and >= 2".into()));
    }

    let e_range = rc.e_range.unwrap_or([0.5, 1.5]);
    let n_range = rc.n_range.unwrap_or([0.0, 0.5]);
    let (n_e, n_n) = (rc.n_e.unwrap_or(5), rc.n_n.unwrap_or(5));
    if n_e == 0 || n_n == 0 {
        return Err(bad("`reduce.n_e` and `reduce.n_n` must be >= 1".into()));
    }
    for (name, [lo, hi]) in [("reduce.e_range", e_range), ("reduce.n_range", n_range)] {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(bad(format!("`{name}` must be finite with lo <= hi, got [{lo}, {hi}]")));
        }
    }
    if !(e_range[0] > 0.0) {
        return Err(bad("`reduce.e_range` must stay above zero; E* <= 0 has no minimizer".into()));
    }
    let entropy = fnc.entropy.unwrap_or_else(|| "boltzmann".into());
    if !["boltzmann", "kinetic_entropy"].contains(&entropy.as_str()) {
        return Err(bad(format!("`functionals.entropy` = `{entropy}` cannot be reduced here")));
    }
    Ok(Settings {
        kind,
        n_r,
        n_v,
        length_r: positive("grid.length_r", g.length_r.unwrap_or(1.0))?,
        v_max: positive("grid.v_max", g.v_max.unwrap_or(8.0))?,
        constants: PhysicalConstants {
            m: positive("constants.m", c.m.unwrap_or(1.0))?,
            k_b: positive("constants.k_b", c.k_b.unwrap_or(1.0))?,
            h: positive("constants.h", c.h.unwrap_or(1.0))?,
        },
        entropy,
        floor: fnc.floor,
        e_star: positive("parameters.e_star", p.e_star.unwrap_or(1.0))?,
        n_star: p.n_star.unwrap_or(0.0),
        lambda: positive("parameters.lambda", p.lambda.unwrap_or(1.0))?,
        amplitude: p.amplitude.unwrap_or(0.5),
        e_range: (e_range[0], e_range[1]),
        n_range: (n_range[0], n_range[1]),
        n_e,
        n_n,
        seed: config.seed.unwrap_or(0),
    })
}

/// Runs the configured reduction and writes its artifacts under `out`.
pub fn reduce(config: &ScenarioConfig, out: &Path) -> Result<ReduceOutcome> {
    let s = settings(config)?;
    std::fs::create_dir_all(out)?;
    match s.kind {
        ReduceKind::MaxEnt => maxent(&s, out),
        ReduceKind::FluxClosure => flux_closure(&s, out),
    }
}

/// Closed-form minimizer `f = A exp(-(E* v²/2m + N*)/k_B)`.
fn analytic(s: &Settings, grid: &Arc<PhaseGrid<f64>>) -> DistFn<f64> {
    let PhysicalConstants { m, k_b, h } = s.constants;
    let prefactor = if s.entropy == "boltzmann" { (-1.0f64).exp() } else { h.powi(-3) };
    DistFn::from_fn(grid, |_, v| prefactor * (-(s.e_star * v * v / (2.0 * m) + s.n_star) / k_b).exp())
}

fn maxent(s: &Settings, out: &Path) -> Result<ReduceOutcome> {
    let grid = PhaseGrid::new(s.n_r, s.n_v, s.length_r, s.v_max)?;
    let problem = MaxEntProblem {
        entropy: kinetic_functional(&s.entropy, &s.constants, s.floor)?,
        energy: Arc::new(KineticEnergy::new(s.constants.m, 1.0)?),
        number: Arc::new(Number),
        x0: DistFn::from_fn(&grid, |_, v| (-v * v / 2.0).exp() / (2.0 * PI).sqrt()),
        options: ReductionOptions {
            tol: 1e-12,
            seed: s.seed,
            ..Default::default()
        },
    };
    let result = reduce_static(&problem.potential(s.e_star, s.n_star), &problem.x0, &problem.options)?;
    let exact = analytic(s, &grid);
    let rel = result
        .minimizer
        .values()
        .iter()
        .zip(exact.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / exact.max_abs();
    let mut files = Vec::new();
    let p = out.join("maxwellian.csv");
    save_distribution(&result.minimizer, &p)?;
    files.push(p);

    let pairs = multiplier_grid(s.e_range, s.n_range, s.n_e, s.n_n)?;
    let points = pairs
        .par_iter()
        .map(|&(e, n)| {
            let d = problem.dual(e, n)?;
            Ok(json!({
                "e_star": e,
                "n_star": n,
                "s_star": d.s_star,
                "energy": d.energy,
                "number": d.number,
                "entropy": d.entropy,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let p = out.join("s_star_grid.json");
    std::fs::write(&p, serde_json::to_string_pretty(&json!({ "entropy": s.entropy, "points": points }))?)?;
    files.push(p);

    let summary = json!({
        "kind": "maxent",
        "entropy": s.entropy,
        "reduction": result.summary(),
        "linf_relative_to_analytic": rel,
        "grid_points": points.len(),
    });
    let p = out.join("summary.json");
    std::fs::write(&p, serde_json::to_string_pretty(&summary)?)?;
    files.push(p);
    Ok(ReduceOutcome { summary, files })
}

fn flux_closure(s: &Settings, out: &Path) -> Result<ReduceOutcome> {
    let grid = PhaseGrid::new(s.n_r, 2, s.length_r, 1.0)?;
    let k = 2.0 * PI / s.length_r;
    let a = s.amplitude;
    if !(a.abs() < 1.0) {
        return Err(bad("`parameters.amplitude` must satisfy |a| < 1".into()));
    }
    let rho = ScalarField::from_fn(&grid, |x| 1.0 + a * (k * x).sin());
    let entropy = Arc::new(LogDensityEntropy { k_b: s.constants.k_b });
    let problem = DiffusionProblem::new(
        &grid,
        entropy.clone(),
        s.lambda,
        DiffusionClosure::FluxReduction {
            n_v: s.n_v,
            v_max: s.v_max,
        },
    )?;
    let closure = problem.flux_closure(&rho)?.ok_or(Error::Construction {
        name: "flux closure".into(),
        reason: "flux reduction returned no closure".into(),
    })?;
    let (k_analytic, _) = DiffusionProblem::new(&grid, entropy, s.lambda, DiffusionClosure::Analytic)?.face_flux(&rho)?;

    let mut files = Vec::new();
    let p = out.join("j_hat.csv");
    save_distribution(&closure.j_hat, &p)?;
    files.push(p);
    let p = out.join("closed_flux.csv");
    let mut w = csv::Writer::from_path(&p)?;
    w.write_record(["r", "k_dagger", "k", "k_analytic"])?;
    let fg = closure.k.grid().clone();
    for i in 0..fg.n_r() {
        w.write_record([
            fmt(fg.r(i)),
            fmt(closure.k_dagger.values()[i]),
            fmt(closure.k.values()[i]),
            fmt(k_analytic[i]),
        ])?;
    }
    w.flush()?;
    files.push(p);

    let gap = closure
        .k
        .values()
        .iter()
        .zip(&k_analytic)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let scale = k_analytic.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let summary = json!({
        "kind": "flux-closure",
        "lower_flux_entropy": closure.lower_flux_entropy_value,
        "stationarity_residual": closure.residual_norm,
        "iterations": closure.iterations,
        "closed_flux_relative_gap": gap / scale,
    });
    let p = out.join("summary.json");
    std::fs::write(&p, serde_json::to_string_pretty(&summary)?)?;
    files.push(p);
    Ok(ReduceOutcome { summary, files })
}
