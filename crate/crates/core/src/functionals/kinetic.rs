use std::sync::Arc;

use super::{Flow, Functional};
use crate::error::{Error, Result};
use crate::grid::DistFn;
use crate::scalar::{ordered_sum, Real};

/// Pointwise density `η(f)` with its first two derivatives. `None` marks a
/// value outside the domain of `η`.
pub trait EntropyDensity<T: Real>: Send + Sync {
    fn name(&self) -> &str;
    fn eta(&self, x: T) -> Option<T>;
    fn eta_prime(&self, x: T) -> Option<T>;
    fn eta_second(&self, x: T) -> Option<T>;
}

fn floored<T: Real>(x: T, floor: Option<T>) -> Option<T> {
    match floor {
        Some(m) => Some(x.max(m)),
        None if x > T::zero() => Some(x),
        None => None,
    }
}

/// `η(f) = -k_B f ln f`.
#[derive(Debug, Clone, Copy)]
pub struct FLnF<T> {
    pub k_b: T,
    /// When set, `f` is replaced by `max(f, floor)` before taking logarithms.
    pub floor: Option<T>,
}

impl<T: Real> EntropyDensity<T> for FLnF<T> {
    fn name(&self) -> &str {
        "f_ln_f"
    }
    fn eta(&self, x: T) -> Option<T> {
        let y = floored(x, self.floor)?;
        Some(-self.k_b * y * y.ln())
    }
    fn eta_prime(&self, x: T) -> Option<T> {
        let y = floored(x, self.floor)?;
        Some(-self.k_b * (y.ln() + T::one()))
    }
    fn eta_second(&self, x: T) -> Option<T> {
        let y = floored(x, self.floor)?;
        Some(-self.k_b / y)
    }
}

/// `η(f) = -k_B f (ln(h³ f) - 1)`, the kinetic entropy density paired with
/// the Sackur-Tetrode energy.
#[derive(Debug, Clone, Copy)]
pub struct KineticEntropyDensity<T> {
    pub k_b: T,
    pub h: T,
    pub floor: Option<T>,
}

impl<T: Real> EntropyDensity<T> for KineticEntropyDensity<T> {
    fn name(&self) -> &str {
        "kinetic_entropy"
    }
    fn eta(&self, x: T) -> Option<T> {
        let y = floored(x, self.floor)?;
        Some(-self.k_b * y * ((self.h.powi(3) * y).ln() - T::one()))
    }
    fn eta_prime(&self, x: T) -> Option<T> {
        let y = floored(x, self.floor)?;
        Some(-self.k_b * (self.h.powi(3) * y).ln())
    }
    fn eta_second(&self, x: T) -> Option<T> {
        let y = floored(x, self.floor)?;
        Some(-self.k_b / y)
    }
}

/// `η(f) = f²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Square;

impl<T: Real> EntropyDensity<T> for Square {
    fn name(&self) -> &str {
        "square"
    }
    fn eta(&self, x: T) -> Option<T> {
        Some(x * x)
    }
    fn eta_prime(&self, x: T) -> Option<T> {
        Some(x + x)
    }
    fn eta_second(&self, _x: T) -> Option<T> {
        Some(T::of(2.0))
    }
}

/// `η(f) = f`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl<T: Real> EntropyDensity<T> for Identity {
    fn name(&self) -> &str {
        "identity"
    }
    fn eta(&self, x: T) -> Option<T> {
        Some(x)
    }
    fn eta_prime(&self, _x: T) -> Option<T> {
        Some(T::one())
    }
    fn eta_second(&self, _x: T) -> Option<T> {
        Some(T::zero())
    }
}

type ScalarFn<T> = Arc<dyn Fn(T) -> Option<T> + Send + Sync>;

/// Density assembled from closures. A missing first derivative makes
/// [`casimir`] refuse it.
#[derive(Clone)]
pub struct CustomDensity<T> {
    pub name: String,
    pub eta: ScalarFn<T>,
    pub eta_prime: Option<ScalarFn<T>>,
    pub eta_second: Option<ScalarFn<T>>,
}

impl<T: Real> EntropyDensity<T> for CustomDensity<T> {
    fn name(&self) -> &str {
        &self.name
    }
    fn eta(&self, x: T) -> Option<T> {
        (self.eta)(x)
    }
    fn eta_prime(&self, x: T) -> Option<T> {
        self.eta_prime.as_ref().and_then(|d| d(x))
    }
    fn eta_second(&self, x: T) -> Option<T> {
        self.eta_second.as_ref().and_then(|d| d(x))
    }
}

/// `C(f) = ∫dr ∫dv η(f)`.
#[derive(Clone)]
pub struct Casimir<T> {
    name: String,
    density: Arc<dyn EntropyDensity<T>>,
}

impl<T: Real> Casimir<T> {
    pub fn density(&self) -> &Arc<dyn EntropyDensity<T>> {
        &self.density
    }

    fn pointwise(
        &self,
        f: &DistFn<T>,
        what: &str,
        op: impl Fn(&dyn EntropyDensity<T>, T) -> Option<T>,
    ) -> Result<DistFn<T>> {
        let grid = f.grid();
        let n_v = grid.n_v();
        let mut out = Vec::with_capacity(f.len());
        for (k, &x) in f.values().iter().enumerate() {
            match op(self.density.as_ref(), x) {
                Some(y) if y.is_finite() => out.push(y),
                _ => {
                    return Err(Error::Domain {
                        what: format!("{what} of `{}`", self.name),
                        r: k / n_v,
                        v: k % n_v,
                        value: x.as_f64(),
                    })
                }
            }
        }
        DistFn::from_values(grid, out)
    }
}

/// Casimir functional generated by `density`; fails when `η'` is unavailable.
pub fn casimir<T: Real>(name: impl Into<String>, density: Arc<dyn EntropyDensity<T>>) -> Result<Casimir<T>> {
    let name = name.into();
    let probe = [T::of(0.5), T::one(), T::of(2.0)];
    if probe.iter().all(|&x| density.eta_prime(x).is_none()) {
        return Err(Error::Construction {
            name,
            reason: "density has no first derivative".into(),
        });
    }
    Ok(Casimir {
        name,
        density,
    })
}

/// `S(f) = -k_B ∫∫ f ln f`.
pub fn boltzmann_entropy<T: Real>(k_b: T, floor: Option<T>) -> Casimir<T> {
    Casimir {
        name: "boltzmann".into(),
        density: Arc::new(FLnF { k_b, floor }),
    }
}

/// `S(f) = -k_B ∫∫ f (ln(h³ f) - 1)`.
pub fn kinetic_entropy<T: Real>(k_b: T, h: T, floor: Option<T>) -> Casimir<T> {
    Casimir {
        name: "kinetic_entropy".into(),
        density: Arc::new(KineticEntropyDensity { k_b, h, floor }),
    }
}

impl<T: Real> Functional<T> for Casimir<T> {
    fn name(&self) -> &str {
        &self.name
    }
    fn value(&self, f: &DistFn<T>) -> Result<T> {
        Ok(self.pointwise(f, "density", |d, x| d.eta(x))?.integral())
    }
    fn derivative(&self, f: &DistFn<T>) -> Result<DistFn<T>> {
        self.pointwise(f, "first derivative", |d, x| d.eta_prime(x))
    }
    fn hessian_diagonal(&self, f: &DistFn<T>) -> Option<Result<DistFn<T>>> {
        if self.density.eta_second(T::one()).is_none() && self.density.eta_second(T::of(0.5)).is_none() {
            return None;
        }
        Some(self.pointwise(f, "second derivative", |d, x| d.eta_second(x)))
    }
    fn conserved_under(&self) -> &[Flow] {
        &[Flow::Hamiltonian]
    }
}

/// `E(f) = scale ∫∫ v²/2m f`.
#[derive(Debug, Clone, Copy)]
pub struct KineticEnergy<T> {
    m: T,
    scale: T,
}

impl<T: Real> KineticEnergy<T> {
    pub fn new(m: T, scale: T) -> Result<Self> {
        if !(m > T::zero()) {
            return Err(Error::param("m", "mass must be positive"));
        }
        Ok(Self { m, scale })
    }
    pub fn mass(&self) -> T {
        self.m
    }
    pub fn scale(&self) -> T {
        self.scale
    }
    #[inline]
    pub fn conjugate_at(&self, v: T) -> T {
        self.scale * v * v / (self.m + self.m)
    }
}

impl<T: Real> Functional<T> for KineticEnergy<T> {
    fn name(&self) -> &str {
        "kinetic"
    }
    fn value(&self, f: &DistFn<T>) -> Result<T> {
        self.derivative(f)?.inner(f)
    }
    fn derivative(&self, f: &DistFn<T>) -> Result<DistFn<T>> {
        Ok(DistFn::from_velocity_fn(f.grid(), |v| self.conjugate_at(v)))
    }
    fn hessian_diagonal(&self, f: &DistFn<T>) -> Option<Result<DistFn<T>>> {
        Some(Ok(DistFn::zeros(f.grid())))
    }
    fn conserved_under(&self) -> &[Flow] {
        &[Flow::Hamiltonian]
    }
}

/// `N(f) = ∫∫ f`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Number;

impl<T: Real> Functional<T> for Number {
    fn name(&self) -> &str {
        "number"
    }
    fn value(&self, f: &DistFn<T>) -> Result<T> {
        Ok(f.integral())
    }
    fn derivative(&self, f: &DistFn<T>) -> Result<DistFn<T>> {
        Ok(DistFn::constant(f.grid(), T::one()))
    }
    fn hessian_diagonal(&self, f: &DistFn<T>) -> Option<Result<DistFn<T>>> {
        Some(Ok(DistFn::zeros(f.grid())))
    }
    fn conserved_under(&self) -> &[Flow] {
        &[Flow::Hamiltonian, Flow::FokkerPlanck]
    }
}

/// `S(x) = -½ ⟨x - c, x - c⟩`, strictly concave with its maximum at `c`.
#[derive(Debug, Clone)]
pub struct QuadraticEntropy<T> {
    center: Option<DistFn<T>>,
}

impl<T: Real> QuadraticEntropy<T> {
    pub fn centered_at_zero() -> Self {
        Self { center: None }
    }
    pub fn centered_at(c: DistFn<T>) -> Self {
        Self { center: Some(c) }
    }
    fn offset(&self, x: &DistFn<T>) -> Result<DistFn<T>> {
        match &self.center {
            Some(c) => x.zip_map(c, |a, b| a - b),
            None => Ok(x.clone()),
        }
    }
}

impl<T: Real> Functional<T> for QuadraticEntropy<T> {
    fn name(&self) -> &str {
        "quadratic"
    }
    fn value(&self, x: &DistFn<T>) -> Result<T> {
        let d = self.offset(x)?;
        Ok(-T::of(0.5) * d.inner(&d)?)
    }
    fn derivative(&self, x: &DistFn<T>) -> Result<DistFn<T>> {
        Ok(self.offset(x)?.map(|y| -y))
    }
    fn hessian_diagonal(&self, x: &DistFn<T>) -> Option<Result<DistFn<T>>> {
        Some(Ok(DistFn::constant(x.grid(), -T::one())))
    }
}

/// `F(x) = ⟨a, x⟩`.
#[derive(Debug, Clone)]
pub struct LinearFunctional<T> {
    name: String,
    a: DistFn<T>,
}

impl<T: Real> LinearFunctional<T> {
    pub fn new(name: impl Into<String>, a: DistFn<T>) -> Self {
        Self { name: name.into(), a }
    }
    pub fn coefficients(&self) -> &DistFn<T> {
        &self.a
    }
}

impl<T: Real> Functional<T> for LinearFunctional<T> {
    fn name(&self) -> &str {
        &self.name
    }
    fn value(&self, x: &DistFn<T>) -> Result<T> {
        self.a.inner(x)
    }
    fn derivative(&self, x: &DistFn<T>) -> Result<DistFn<T>> {
        if !self.a.grid().compatible(x.grid()) {
            return Err(Error::GridMismatch("LinearFunctional::derivative"));
        }
        Ok(self.a.clone())
    }
    fn hessian_diagonal(&self, x: &DistFn<T>) -> Option<Result<DistFn<T>>> {
        Some(Ok(DistFn::zeros(x.grid())))
    }
}

/// `Φ(x) = -S(x) + E* E(x) + N* N(x)`.
#[derive(Clone)]
pub struct ThermoPotential<T> {
    pub entropy: Arc<dyn Functional<T>>,
    pub energy: Arc<dyn Functional<T>>,
    pub number: Arc<dyn Functional<T>>,
    pub e_star: T,
    pub n_star: T,
}

impl<T: Real> ThermoPotential<T> {
    pub fn new(
        entropy: Arc<dyn Functional<T>>,
        energy: Arc<dyn Functional<T>>,
        number: Arc<dyn Functional<T>>,
        e_star: T,
        n_star: T,
    ) -> Self {
        Self {
            entropy,
            energy,
            number,
            e_star,
            n_star,
        }
    }
}

impl<T: Real> Functional<T> for ThermoPotential<T> {
    fn name(&self) -> &str {
        "thermo_potential"
    }
    fn value(&self, x: &DistFn<T>) -> Result<T> {
        let parts = [
            -self.entropy.value(x)?,
            self.e_star * self.energy.value(x)?,
            self.n_star * self.number.value(x)?,
        ];
        Ok(ordered_sum(parts))
    }
    fn derivative(&self, x: &DistFn<T>) -> Result<DistFn<T>> {
        let s = self.entropy.derivative(x)?;
        let e = self.energy.derivative(x)?;
        let n = self.number.derivative(x)?;
        let (es, ns) = (self.e_star, self.n_star);
        let mut out = s;
        for ((o, &ev), &nv) in out.values_mut().iter_mut().zip(e.values()).zip(n.values()) {
            *o = -*o + es * ev + ns * nv;
        }
        Ok(out)
    }
    fn hessian_diagonal(&self, x: &DistFn<T>) -> Option<Result<DistFn<T>>> {
        let s = self.entropy.hessian_diagonal(x)?;
        let e = self.energy.hessian_diagonal(x)?;
        let n = self.number.hessian_diagonal(x)?;
        let (es, ns) = (self.e_star, self.n_star);
        Some((|| {
            let mut out = s?;
            let (e, n) = (e?, n?);
            for ((o, &ev), &nv) in out.values_mut().iter_mut().zip(e.values()).zip(n.values()) {
                *o = -*o + es * ev + ns * nv;
            }
            Ok(out)
        })())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::gateaux_check;
    use crate::grid::PhaseGrid;
    use std::f64::consts::PI;

    fn maxwellian(rho: f64, v0: f64, theta: f64) -> impl Fn(f64, f64) -> f64 {
        move |_, v| rho * (-(v - v0) * (v - v0) / (2.0 * theta)).exp() / (2.0 * PI * theta).sqrt()
    }

    #[test]
    fn boltzmann_of_uniform_state() {
        let g = PhaseGrid::<f64>::new(4, 16, 2.0, 1.5).unwrap();
        let c = 0.3;
        let f = DistFn::constant(&g, c);
        let s = boltzmann_entropy(1.0, None).value(&f).unwrap();
        let volume = 2.0 * 3.0;
        assert!((s - (-c * volume * c.ln())).abs() < 1e-12);
    }

    #[test]
    fn boltzmann_of_standard_maxwellian() {
        let g = PhaseGrid::<f64>::new(1, 256, 1.0, 8.0).unwrap();
        let f = DistFn::from_fn(&g, maxwellian(1.0, 0.0, 1.0));
        let s = boltzmann_entropy(1.0, None).value(&f).unwrap();
        assert!((s - 0.5 * (1.0 + (2.0 * PI).ln())).abs() < 1e-10, "{s}");
    }

    #[test]
    fn boltzmann_rejects_nonpositive_without_floor() {
        let g = PhaseGrid::<f64>::new(2, 4, 1.0, 1.0).unwrap();
        let mut f = DistFn::constant(&g, 1.0);
        f.values_mut()[5] = 0.0;
        let err = boltzmann_entropy(1.0, None).value(&f).unwrap_err();
        assert!(matches!(err, Error::Domain { r: 1, v: 1, .. }), "{err:?}");
        let floored = boltzmann_entropy(1.0, Some(1e-30)).value(&f).unwrap();
        assert!(floored.is_finite());
    }

    #[test]
    fn doubling_shifts_entropy_by_mass_times_ln2() {
        let g = PhaseGrid::<f64>::new(2, 128, 1.0, 8.0).unwrap();
        let f = DistFn::from_fn(&g, maxwellian(1.0, 0.2, 0.7));
        let s = boltzmann_entropy(1.0, None);
        let s1 = s.value(&f).unwrap();
        let s2 = s.value(&f.map(|x| 2.0 * x)).unwrap();
        let n = f.integral();
        assert!((s2 - (2.0 * s1 - 2.0 * n * 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn kinetic_energy_of_maxwellians() {
        let g = PhaseGrid::<f64>::new(1, 256, 1.0, 8.0).unwrap();
        let e = KineticEnergy::new(1.0, 1.0).unwrap();
        let f = DistFn::from_fn(&g, maxwellian(1.0, 0.0, 1.0));
        assert!((e.value(&f).unwrap() - 0.5).abs() < 1e-12);
        let v0 = 0.4;
        let theta = 0.8;
        let f = DistFn::from_fn(&g, maxwellian(1.0, v0, theta));
        assert!((e.value(&f).unwrap() - 0.5 * (theta + v0 * v0)).abs() < 1e-12);
        let zero = DistFn::zeros(&g);
        assert_eq!(e.value(&zero).unwrap(), 0.0);
        assert_eq!(Number.value(&zero).unwrap(), 0.0);
    }

    #[test]
    fn identity_casimir_is_number() {
        let g = PhaseGrid::<f64>::new(3, 8, 1.0, 1.0).unwrap();
        let f = DistFn::from_fn(&g, |r, v| 1.0 + r + v * v);
        let c = casimir("identity", Arc::new(Identity)).unwrap();
        assert_eq!(c.value(&f).unwrap(), Number.value(&f).unwrap());
    }

    #[test]
    fn kinetic_entropy_density_with_unit_planck_constant() {
        let d = KineticEntropyDensity { k_b: 1.0, h: 1.0, floor: None };
        for &x in &[0.1f64, 0.5, 2.0] {
            assert!((d.eta(x).unwrap() - (-x * (x.ln() - 1.0))).abs() < 1e-15);
            assert!((d.eta_prime(x).unwrap() + x.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn square_casimir_matches_direct_quadrature() {
        let g = PhaseGrid::<f64>::new(3, 10, 1.0, 2.0).unwrap();
        let f = DistFn::from_fn(&g, |r, v| r + v);
        let c = casimir("sq", Arc::new(Square)).unwrap();
        let mut direct = 0.0;
        for i in 0..3 {
            for j in 0..10 {
                direct += f.at(i, j).powi(2) * g.dv() * g.dr();
            }
        }
        assert!((c.value(&f).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn casimir_without_derivative_is_refused() {
        let d = CustomDensity::<f64> {
            name: "opaque".into(),
            eta: Arc::new(|x| Some(x.cos())),
            eta_prime: None,
            eta_second: None,
        };
        assert!(matches!(casimir("opaque", Arc::new(d)), Err(Error::Construction { .. })));
    }

    #[test]
    fn thermo_potential_with_zero_multipliers_is_negative_entropy() {
        let g = PhaseGrid::<f64>::new(2, 16, 1.0, 4.0).unwrap();
        let f = DistFn::from_fn(&g, maxwellian(1.0, 0.0, 1.0));
        let s: Arc<dyn Functional<f64>> = Arc::new(boltzmann_entropy(1.0, None));
        let phi = ThermoPotential::new(
            s.clone(),
            Arc::new(KineticEnergy::new(1.0, 1.0).unwrap()),
            Arc::new(Number),
            0.0,
            0.0,
        );
        assert_eq!(phi.value(&f).unwrap(), -s.value(&f).unwrap());
    }

    #[test]
    fn gateaux_checks_pass() {
        let g = PhaseGrid::<f64>::new(6, 24, 1.0, 4.0).unwrap();
        let f = DistFn::from_fn(&g, |r, v| (0.5 + 0.3 * (6.0 * r).sin()) * (-v * v / 2.0).exp() + 0.01);
        let d = DistFn::from_fn(&g, |r, v| (-(v - 0.3).powi(2)).exp() * (1.0 + r));
        let fs: Vec<Box<dyn Functional<f64>>> = vec![
            Box::new(boltzmann_entropy(1.0, None)),
            Box::new(kinetic_entropy(1.0, 1.0, None)),
            Box::new(KineticEnergy::new(2.0, 0.5).unwrap()),
            Box::new(Number),
            Box::new(QuadraticEntropy::centered_at_zero()),
            Box::new(casimir("sq", Arc::new(Square)).unwrap()),
        ];
        for func in &fs {
            let rep = gateaux_check(func.as_ref(), &f, &d, 1e-4).unwrap();
            assert!(rep.relative_error < 1e-6, "{} {:?}", func.name(), rep);
        }
    }
}
