use serde::{Deserialize, Serialize};

use crate::dynamics::Scheme;
use crate::error::{Error, Result};
use crate::functionals::PhysicalConstants;

/// Scenario file as written by the user. Every field is optional so that a
/// missing value can be reported by its dotted path.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functionals: Option<FunctionalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<ParameterConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Coupling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduce: Option<ReduceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_v: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalConfig {
    /// Kinetic entropy functional, from the functional registry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<String>,
    /// `kinetic` for the kinetic scenarios, `sackur_tetrode` for the
    /// hydrodynamic ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<String>,
    /// Entropy density `η` of the hierarchy: `kinetic_entropy`, `f_ln_f`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_star: Option<f64>,
    /// Size of the initial perturbation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Momentum-conjugate gradient `∂_r E_u` driving the viscosity run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_gradient: Option<f64>,
    /// Prefactors of the hydrodynamic and kinetic energies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_k: Option<f64>,
    /// Uniform initial temperature of the hydrodynamic scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    Full,
    Diagonal,
    Decoupled,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceConfig {
    /// `maxent` or `flux-closure`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_e: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    FreeTransport,
    FpRelaxation,
    GenericKinetic,
    DiffusionClosure,
    PgHierarchy,
    PgRegularized,
    CeViscosity,
    ReducedHydro,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::FreeTransport,
        Scenario::FpRelaxation,
        Scenario::GenericKinetic,
        Scenario::DiffusionClosure,
        Scenario::PgHierarchy,
        Scenario::PgRegularized,
        Scenario::CeViscosity,
        Scenario::ReducedHydro,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::FreeTransport => "free-transport",
            Scenario::FpRelaxation => "fp-relaxation",
            Scenario::GenericKinetic => "generic-kinetic",
            Scenario::DiffusionClosure => "diffusion-closure",
            Scenario::PgHierarchy => "pg-hierarchy",
            Scenario::PgRegularized => "pg-regularized",
            Scenario::CeViscosity => "ce-viscosity",
            Scenario::ReducedHydro => "reduced-hydro",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    fn default_grid(self) -> (usize, usize, f64, f64) {
        match self {
            Scenario::FreeTransport => (128, 128, 1.0, 6.0),
            Scenario::FpRelaxation => (1, 128, 1.0, 8.0),
            Scenario::GenericKinetic => (32, 64, 1.0, 6.0),
            Scenario::DiffusionClosure => (256, 2, 1.0, 1.0),
            Scenario::PgHierarchy | Scenario::PgRegularized => (32, 32, 1.0, 6.0),
            Scenario::CeViscosity => (1, 128, 1.0, 8.0),
            Scenario::ReducedHydro => (64, 32, 1.0, 6.0),
        }
    }

    fn is_hydrodynamic(self) -> bool {
        matches!(self, Scenario::PgHierarchy | Scenario::PgRegularized | Scenario::ReducedHydro)
    }
}

/// Fully resolved scenario settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub scenario: Scenario,
    pub n_r: usize,
    pub n_v: usize,
    pub length_r: f64,
    pub v_max: f64,
    pub constants: PhysicalConstants<f64>,
    pub entropy: String,
    pub energy: String,
    pub eta: String,
    pub floor: Option<f64>,
    pub lambda: f64,
    pub epsilon: f64,
    pub e_star: f64,
    pub n_star: f64,
    pub amplitude: f64,
    pub velocity_gradient: f64,
    pub c_h: f64,
    pub c_k: f64,
    pub temperature: f64,
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub stride: usize,
    pub coupling: Coupling,
    pub seed: u64,
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Config(format!("`{name}` must be positive and finite, got {x}")))
    }
}

fn required<T: Copy>(name: &str, x: Option<T>) -> Result<T> {
    x.ok_or_else(|| Error::Config(format!("missing required field `{name}`")))
}

const KINETIC_ENTROPIES: [&str; 2] = ["boltzmann", "kinetic_entropy"];
const ETAS: [&str; 2] = ["kinetic_entropy", "f_ln_f"];

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid scenario file: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Scenario named in the file, or a usage-style error.
    pub fn scenario(&self) -> Result<Scenario> {
        let name = self
            .scenario
            .as_deref()
            .ok_or_else(|| Error::Config("missing required field `scenario`".into()))?;
        Scenario::parse(name).ok_or_else(|| {
            let known: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
            Error::Config(format!("unknown scenario `{name}`; known: {}", known.join(", ")))
        })
    }

    /// Fills defaults and checks every value before anything is allocated.
    pub fn resolve(&self) -> Result<Resolved> {
        let scenario = self.scenario()?;
        let g = self.grid.clone().unwrap_or_default();
        let (dn_r, dn_v, dl, dv) = scenario.default_grid();
        let c = self.constants.clone().unwrap_or_default();
        let fnc = self.functionals.clone().unwrap_or_default();
        let p = self.parameters.clone().unwrap_or_default();
        let integ = self.integrator.clone().unwrap_or_default();

        let n_r = g.n_r.unwrap_or(dn_r);
        let n_v = g.n_v.unwrap_or(dn_v);
        if n_r == 0 || n_v < 2 {
            return Err(Error::Config("`grid.n_r` must be >= 1 and `grid.n_v` >= 2".into()));
        }
        if !n_v.is_multiple_of(2) {
            return Err(Error::Config("`grid.n_v` must be even".into()));
        }
        let constants = PhysicalConstants {
            m: positive("constants.m", c.m.unwrap_or(1.0))?,
            k_b: positive("constants.k_b", c.k_b.unwrap_or(1.0))?,
            h: positive("constants.h", c.h.unwrap_or(1.0))?,
        };

        let entropy = fnc.entropy.clone().unwrap_or_else(|| "boltzmann".into());
        if !KINETIC_ENTROPIES.contains(&entropy.as_str()) {
            return Err(Error::Config(format!(
                "`functionals.entropy` = `{entropy}` is not a registered entropy ({})",
                KINETIC_ENTROPIES.join(", ")
            )));
        }
        let default_energy = if scenario.is_hydrodynamic() { "sackur_tetrode" } else { "kinetic" };
        let energy = fnc.energy.clone().unwrap_or_else(|| default_energy.into());
        if energy != default_energy {
            return Err(Error::Config(format!(
                "`functionals.energy` = `{energy}` is not available for {}; use `{default_energy}`",
                scenario.name()
            )));
        }
        let eta = fnc.eta.clone().unwrap_or_else(|| "kinetic_entropy".into());
        if !ETAS.contains(&eta.as_str()) {
            return Err(Error::Config(format!(
                "`functionals.eta` = `{eta}` is not a registered entropy density ({})",
                ETAS.join(", ")
            )));
        }
        if let Some(fl) = fnc.floor {
            positive("functionals.floor", fl)?;
        }

        let epsilon = p.epsilon.unwrap_or(1.0);
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::Config(format!("`parameters.epsilon` must lie in (0, 1], got {epsilon}")));
        }
        let e_star = p.e_star.unwrap_or(1.0);
        if !e_star.is_finite() {
            return Err(Error::Config("`parameters.e_star` must be finite".into()));
        }
        let n_star = p.n_star.unwrap_or(0.0);
        let amplitude = p.amplitude.unwrap_or(match scenario {
            Scenario::DiffusionClosure | Scenario::FreeTransport => 0.5,
            _ => 0.1,
        });
        if !(amplitude.is_finite() && amplitude.abs() < 1.0) {
            return Err(Error::Config("`parameters.amplitude` must satisfy |a| < 1".into()));
        }
        let velocity_gradient = p.velocity_gradient.unwrap_or(5e-5);
        if !velocity_gradient.is_finite() {
            return Err(Error::Config("`parameters.velocity_gradient` must be finite".into()));
        }

        let scheme_name = integ.scheme.clone().unwrap_or_else(|| "rk4".into());
        let scheme = Scheme::parse(&scheme_name)
            .ok_or_else(|| Error::Config(format!("`integrator.scheme` = `{scheme_name}` is not rk4 or euler")))?;
        let dt = positive("integrator.dt", required("integrator.dt", integ.dt)?)?;
        let t_end = positive("integrator.t_end", required("integrator.t_end", integ.t_end)?)?;
        let stride = integ.stride.unwrap_or(1);
        if stride == 0 {
            return Err(Error::Config("`integrator.stride` must be >= 1".into()));
        }

        let coupling = self.coupling.unwrap_or(match scenario {
            Scenario::ReducedHydro => Coupling::Diagonal,
            _ => Coupling::Full,
        });
        let coupling_ok = match scenario {
            Scenario::ReducedHydro => coupling != Coupling::Decoupled,
            Scenario::PgHierarchy | Scenario::PgRegularized => coupling != Coupling::Diagonal,
            _ => coupling == Coupling::Full,
        };
        if !coupling_ok {
            return Err(Error::Config(format!(
                "`coupling` = {coupling:?} is not meaningful for {}",
                scenario.name()
            )));
        }

        Ok(Resolved {
            scenario,
            n_r,
            n_v,
            length_r: positive("grid.length_r", g.length_r.unwrap_or(dl))?,
            v_max: positive("grid.v_max", g.v_max.unwrap_or(dv))?,
            constants,
            entropy,
            energy,
            eta,
            floor: fnc.floor,
            lambda: positive("parameters.lambda", p.lambda.unwrap_or(1.0))?,
            epsilon,
            e_star,
            n_star,
            amplitude,
            velocity_gradient,
            c_h: positive("parameters.c_h", p.c_h.unwrap_or(0.5))?,
            c_k: positive("parameters.c_k", p.c_k.unwrap_or(0.5))?,
            temperature: positive("parameters.temperature", p.temperature.unwrap_or(1.0))?,
            scheme,
            dt,
            t_end,
            stride,
            coupling,
            seed: self.seed.unwrap_or(0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> ScenarioConfig {
        ScenarioConfig::from_json(r#"{"scenario": "fp-relaxation", "integrator": {"dt": 0.01, "t_end": 1.0}}"#)
            .unwrap()
    }

    #[test]
    fn missing_dt_is_named() {
        let cfg = ScenarioConfig::from_json(r#"{"scenario": "fp-relaxation", "integrator": {"t_end": 1.0}}"#).unwrap();
        let err = cfg.resolve().unwrap_err().to_string();
        assert!(err.contains("integrator.dt"), "{err}");
    }

    #[test]
    fn unknown_scenario_lists_known_ones() {
        let cfg = ScenarioConfig::from_json(r#"{"scenario": "warp-drive"}"#).unwrap();
        let err = cfg.resolve().unwrap_err().to_string();
        assert!(err.contains("warp-drive") && err.contains("fp-relaxation"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ScenarioConfig::from_json(r#"{"scenario": "fp-relaxation", "gird": {}}"#).is_err());
    }

    #[test]
    fn defaults_fill_in() {
        let r = minimal().resolve().unwrap();
        assert_eq!((r.n_r, r.n_v), (1, 128));
        assert_eq!(r.scheme, Scheme::Rk4);
        assert_eq!(r.coupling, Coupling::Full);
    }

    #[test]
    fn json_round_trip() {
        let mut cfg = minimal();
        cfg.coupling = Some(Coupling::Full);
        cfg.parameters = Some(ParameterConfig {
            lambda: Some(0.25),
            ..Default::default()
        });
        let back = ScenarioConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn inconsistent_choices_are_rejected() {
        let mut cfg = minimal();
        cfg.coupling = Some(Coupling::Diagonal);
        assert!(cfg.resolve().is_err());
        let mut cfg = minimal();
        cfg.functionals = Some(FunctionalConfig {
            entropy: Some("tsallis".into()),
            ..Default::default()
        });
        assert!(cfg.resolve().unwrap_err().to_string().contains("functionals.entropy"));
    }
}
