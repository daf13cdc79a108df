use crate::error::{Error, Result};
use crate::grid::{integrate_v, DistFn, ScalarField};
use crate::scalar::Real;

/// Concave flux-entropy `𝔖↑(J)` over phase-space fluxes.
pub trait FluxEntropy<T: Real>: Send + Sync {
    fn value(&self, j: &DistFn<T>) -> Result<T>;
    fn derivative(&self, j: &DistFn<T>) -> Result<DistFn<T>>;
    fn hessian_diagonal(&self, j: &DistFn<T>) -> Result<DistFn<T>>;
}

/// Map `K↑` from upper fluxes to reduced fluxes on the spatial grid.
pub trait FluxMap<T: Real>: Send + Sync {
    fn apply(&self, j: &DistFn<T>) -> Result<ScalarField<T>>;
    /// Riesz representative of `J ↦ ⟨K†, K↑(J)⟩` at `j`.
    fn pullback(&self, j: &DistFn<T>, k_dagger: &ScalarField<T>) -> Result<DistFn<T>>;
    fn is_linear(&self) -> bool;
}

/// `𝔖↑(J) = -½ Λ ∫∫ f J²` for a fixed weight `f`.
#[derive(Debug, Clone)]
pub struct DiffusionFluxEntropy<T> {
    pub lambda: T,
    pub f: DistFn<T>,
}

impl<T: Real> FluxEntropy<T> for DiffusionFluxEntropy<T> {
    fn value(&self, j: &DistFn<T>) -> Result<T> {
        let half = T::of(0.5) * self.lambda;
        Ok(-half * self.f.zip_map(j, |f, x| f * x * x)?.integral())
    }
    fn derivative(&self, j: &DistFn<T>) -> Result<DistFn<T>> {
        let l = self.lambda;
        self.f.zip_map(j, |f, x| -l * f * x)
    }
    fn hessian_diagonal(&self, _j: &DistFn<T>) -> Result<DistFn<T>> {
        let l = self.lambda;
        Ok(self.f.map(|f| -l * f))
    }
}

/// `K = ∫ dv f J`.
#[derive(Debug, Clone)]
pub struct VelocityMoment<T> {
    pub f: DistFn<T>,
}

impl<T: Real> FluxMap<T> for VelocityMoment<T> {
    fn apply(&self, j: &DistFn<T>) -> Result<ScalarField<T>> {
        Ok(integrate_v(&self.f.zip_map(j, |f, x| f * x)?))
    }
    fn pullback(&self, _j: &DistFn<T>, k_dagger: &ScalarField<T>) -> Result<DistFn<T>> {
        if !k_dagger.grid().compatible(self.f.grid()) {
            return Err(Error::GridMismatch("VelocityMoment::pullback"));
        }
        let mut out = self.f.clone();
        for i in 0..out.grid().n_r() {
            let k = k_dagger.values()[i];
            out.column_mut(i).iter_mut().for_each(|x| *x *= k);
        }
        Ok(out)
    }
    fn is_linear(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FluxOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Step for the conjugacy check `K ≈ ∂𝔖↓†/∂K†`; `None` skips it.
    pub fd_step: Option<f64>,
}

impl Default for FluxOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 50,
            fd_step: Some(1e-5),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FluxClosure<T> {
    pub k_dagger: ScalarField<T>,
    pub j_hat: DistFn<T>,
    /// `K↑(Ĵ)`, equal to `𝔖↓†_{K†}` by the envelope theorem.
    pub k: ScalarField<T>,
    /// Component-wise difference quotient of the dual value, when requested.
    pub k_finite_difference: Option<ScalarField<T>>,
    /// `max |K - K_fd| / max(max |K|, 1)`.
    pub conjugacy_error: Option<T>,
    /// `𝔖↓†(K†) = Ψ↑(Ĵ, K†)`.
    pub lower_flux_entropy_value: T,
    pub residual_norm: T,
    pub iterations: usize,
}

/// `Ψ↑(J, K†) = -𝔖↑(J) + ⟨K†, K↑(J)⟩`.
fn psi<T: Real>(s: &dyn FluxEntropy<T>, k_up: &dyn FluxMap<T>, j: &DistFn<T>, k_dagger: &ScalarField<T>) -> Result<T> {
    Ok(-s.value(j)? + k_dagger.inner(&k_up.apply(j)?)?)
}

struct Stationary<T> {
    j: DistFn<T>,
    value: T,
    residual: T,
    iterations: usize,
}

fn solve_stationarity<T: Real>(
    s: &dyn FluxEntropy<T>,
    k_up: &dyn FluxMap<T>,
    k_dagger: &ScalarField<T>,
    j0: &DistFn<T>,
    options: &FluxOptions,
) -> Result<Stationary<T>> {
    let mut j = j0.clone();
    let mut history = Vec::new();
    for iter in 0..=options.max_iter {
        let s_j = s.derivative(&j)?;
        let pb = k_up.pullback(&j, k_dagger)?;
        let grad = pb.zip_map(&s_j, |p, d| p - d)?;
        let res = grad.inner(&grad)?.sqrt();
        history.push(res.as_f64());
        if res <= T::of(options.tol) {
            return Ok(Stationary {
                value: psi(s, k_up, &j, k_dagger)?,
                j,
                residual: res,
                iterations: iter,
            });
        }
        if iter == options.max_iter {
            break;
        }
        // Ψ_JJ = -𝔖_JJ for a linear K↑; otherwise this is a Gauss-Newton
        // approximation.
        let h = s.hessian_diagonal(&j)?.map(|d| -d);
        let (lo, hi) = h
            .values()
            .iter()
            .fold((T::infinity(), T::zero()), |(lo, hi), &d| (lo.min(d.abs()), hi.max(d.abs())));
        if !(hi > T::zero()) || lo <= T::of(1e-14) * hi || h.values().iter().any(|&d| d <= T::zero()) {
            let condition = if lo > T::zero() { (hi / lo).as_f64() } else { f64::INFINITY };
            return Err(Error::Singular { condition });
        }
        let step = grad.zip_map(&h, |g, d| -g / d)?;
        j = j.zip_map(&step, |a, b| a + b)?;
    }
    Err(Error::NoConvergence {
        solver: "reduce_flux",
        iterations: options.max_iter,
        residual: history.last().copied().unwrap_or(f64::NAN),
        best_iterate: j.values().iter().map(|v| v.as_f64()).collect(),
        residual_history: history,
    })
}

/// Solves `Ψ↑_J = 0` for `Ĵ(K†)` and returns the closed flux, the lower
/// flux-entropy and, when requested, a finite-difference check of
/// `K = 𝔖↓†_{K†}`.
pub fn reduce_flux<T: Real>(
    flux_entropy: &dyn FluxEntropy<T>,
    k_up: &dyn FluxMap<T>,
    k_dagger: &ScalarField<T>,
    j0: &DistFn<T>,
    options: &FluxOptions,
) -> Result<FluxClosure<T>> {
    let st = solve_stationarity(flux_entropy, k_up, k_dagger, j0, options)?;
    let k = k_up.apply(&st.j)?;
    let (k_fd, conjugacy_error) = match options.fd_step {
        Some(h) => {
            let h = T::of(h);
            let dr = k_dagger.grid().dr();
            let mut vals = Vec::with_capacity(k_dagger.len());
            for i in 0..k_dagger.len() {
                let mut plus = k_dagger.clone();
                plus.values_mut()[i] += h;
                let mut minus = k_dagger.clone();
                minus.values_mut()[i] -= h;
                let a = solve_stationarity(flux_entropy, k_up, &plus, &st.j, options)?.value;
                let b = solve_stationarity(flux_entropy, k_up, &minus, &st.j, options)?.value;
                vals.push((a - b) / (h + h) / dr);
            }
            let fd = ScalarField::from_values(k_dagger.grid(), vals)?;
            let scale = k.max_abs().max(T::one());
            let err = fd
                .values()
                .iter()
                .zip(k.values())
                .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
                / scale;
            (Some(fd), Some(err))
        }
        None => (None, None),
    };
    Ok(FluxClosure {
        k_dagger: k_dagger.clone(),
        j_hat: st.j,
        k,
        k_finite_difference: k_fd,
        conjugacy_error,
        lower_flux_entropy_value: st.value,
        residual_norm: st.residual,
        iterations: st.iterations,
    })
}
