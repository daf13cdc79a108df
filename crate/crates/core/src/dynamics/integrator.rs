use crate::error::{Error, Result};
use crate::grid::StateVector;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Rk4,
    Euler,
}

impl Scheme {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "rk4" | "RK4" => Some(Scheme::Rk4),
            "euler" | "Euler" => Some(Scheme::Euler),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Rk4 => "rk4",
            Scheme::Euler => "euler",
        }
    }

    /// Extent of the stability region along the negative real axis.
    pub fn real_limit<T: Real>(self) -> T {
        match self {
            Scheme::Rk4 => T::of(2.785),
            Scheme::Euler => T::of(2.0),
        }
    }

    /// Extent along the imaginary axis. Forward Euler has none, so a small
    /// stand-in keeps transport runs from silently blowing up.
    pub fn imaginary_limit<T: Real>(self) -> T {
        match self {
            Scheme::Rk4 => T::of(2.828),
            Scheme::Euler => T::of(0.1),
        }
    }
}

/// Fixed-step explicit integrator.
#[derive(Debug, Clone, Copy)]
pub struct Integrator<T> {
    pub scheme: Scheme,
    pub dt: T,
}

impl<T: Real> Integrator<T> {
    pub fn new(scheme: Scheme, dt: T) -> Result<Self> {
        if !(dt >= T::zero()) || !dt.is_finite() {
            return Err(Error::param("dt", "must be a finite non-negative step"));
        }
        Ok(Self { scheme, dt })
    }

    /// Errors when `dt` exceeds the advisory bound `dt_max`.
    pub fn check_stability(&self, dt_max: T) -> Result<()> {
        if self.dt > dt_max {
            Err(Error::Stability {
                dt: self.dt.as_f64(),
                dt_max: dt_max.as_f64(),
            })
        } else {
            Ok(())
        }
    }

    pub fn step<S: StateVector<T>>(
        &self,
        x: &S,
        h: T,
        rhs: &mut impl FnMut(&S) -> Result<S>,
    ) -> Result<S> {
        match self.scheme {
            Scheme::Euler => {
                let k = rhs(x)?;
                let mut out = x.clone();
                out.axpy(h, &k);
                Ok(out)
            }
            Scheme::Rk4 => {
                let half = h * T::of(0.5);
                let k1 = rhs(x)?;
                let mut y = x.clone();
                y.axpy(half, &k1);
                let k2 = rhs(&y)?;
                let mut y = x.clone();
                y.axpy(half, &k2);
                let k3 = rhs(&y)?;
                let mut y = x.clone();
                y.axpy(h, &k3);
                let k4 = rhs(&y)?;
                let sixth = h / T::of(6.0);
                let third = h / T::of(3.0);
                let mut out = x.clone();
                out.axpy(sixth, &k1);
                out.axpy(third, &k2);
                out.axpy(third, &k3);
                out.axpy(sixth, &k4);
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evolution<S, T> {
    pub state: S,
    pub time: T,
    pub steps: usize,
}

/// Integrates from `t = 0` to `t_end` with the integrator's fixed step; the
/// last step is shortened to land on `t_end`. `observe(step, t, x)` runs on
/// the initial state, every `stride` steps, and on the final state.
///
/// A step producing a non-finite state aborts with the last finite state.
pub fn evolve<T: Real, S: StateVector<T>>(
    x0: S,
    mut rhs: impl FnMut(&S) -> Result<S>,
    integrator: &Integrator<T>,
    t_end: T,
    stride: usize,
    mut observe: impl FnMut(usize, T, &S) -> Result<()>,
) -> Result<Evolution<S, T>> {
    let stride = stride.max(1);
    observe(0, T::zero(), &x0)?;
    if integrator.dt == T::zero() || !(t_end > T::zero()) {
        return Ok(Evolution {
            state: x0,
            time: T::zero(),
            steps: 0,
        });
    }
    let ratio = (t_end / integrator.dt).as_f64();
    let n_steps = (ratio - 1e-9).ceil().max(1.0) as usize;
    let mut x = x0;
    let mut t = T::zero();
    for step in 1..=n_steps {
        let h = if step == n_steps {
            t_end - t
        } else {
            integrator.dt
        };
        let next = integrator.step(&x, h, &mut rhs)?;
        if !next.all_finite() {
            return Err(Error::NonFinite {
                time: (t + h).as_f64(),
                step,
                last_good: x.flatten(),
            });
        }
        x = next;
        t = if step == n_steps {
            t_end
        } else {
            T::of_usize(step) * integrator.dt
        };
        if step % stride == 0 || step == n_steps {
            observe(step, t, &x)?;
        }
    }
    Ok(Evolution {
        state: x,
        time: t,
        steps: n_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{PhaseGrid, ScalarField};

    fn decay(x: &ScalarField<f64>) -> Result<ScalarField<f64>> {
        Ok(x.map(|y| -2.0 * y))
    }

    #[test]
    fn rk4_is_fourth_order_on_linear_decay() {
        let g = PhaseGrid::<f64>::new(1, 1, 1.0, 1.0).unwrap();
        let err = |dt: f64| {
            let it = Integrator::new(Scheme::Rk4, dt).unwrap();
            let out = evolve(ScalarField::constant(&g, 1.0), decay, &it, 1.0, 1, |_, _, _| Ok(())).unwrap();
            (out.state.values()[0] - (-2.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.5, "{ratio}");
    }

    #[test]
    fn euler_is_first_order() {
        let g = PhaseGrid::<f64>::new(1, 1, 1.0, 1.0).unwrap();
        let err = |dt: f64| {
            let it = Integrator::new(Scheme::Euler, dt).unwrap();
            let out = evolve(ScalarField::constant(&g, 1.0), decay, &it, 1.0, 1, |_, _, _| Ok(())).unwrap();
            (out.state.values()[0] - (-2.0f64).exp()).abs()
        };
        let ratio = err(0.01) / err(0.005);
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn zero_step_returns_initial_state() {
        let g = PhaseGrid::<f64>::new(3, 1, 1.0, 1.0).unwrap();
        let x0 = ScalarField::from_fn(&g, |r| r);
        let it = Integrator::new(Scheme::Rk4, 0.0).unwrap();
        let out = evolve(x0.clone(), decay, &it, 1.0, 1, |_, _, _| Ok(())).unwrap();
        assert_eq!(out.state.values(), x0.values());
        assert_eq!(out.steps, 0);
    }

    #[test]
    fn observer_times_strictly_increase_and_hit_end() {
        let g = PhaseGrid::<f64>::new(1, 1, 1.0, 1.0).unwrap();
        let it = Integrator::new(Scheme::Rk4, 0.3).unwrap();
        let mut times = Vec::new();
        evolve(ScalarField::constant(&g, 1.0), decay, &it, 1.0, 2, |_, t, _| {
            times.push(t);
            Ok(())
        })
        .unwrap();
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*times.last().unwrap(), 1.0);
        assert_eq!(times, vec![0.0, 0.6, 1.0]);
    }

    #[test]
    fn non_finite_state_aborts_with_last_good() {
        let g = PhaseGrid::<f64>::new(2, 1, 1.0, 1.0).unwrap();
        let it = Integrator::new(Scheme::Euler, 0.1).unwrap();
        let mut calls = 0;
        let err = evolve(
            ScalarField::constant(&g, 1.0),
            |x: &ScalarField<f64>| {
                calls += 1;
                Ok(if calls < 3 { x.clone() } else { x.map(|_| f64::NAN) })
            },
            &it,
            1.0,
            1,
            |_, _, _| Ok(()),
        )
        .unwrap_err();
        match err {
            Error::NonFinite { step, last_good, .. } => {
                assert_eq!(step, 3);
                let x1 = 1.0 + 0.1 * 1.0;
                assert_eq!(last_good, vec![x1 + 0.1 * x1; 2]);
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn stability_check() {
        let it = Integrator::new(Scheme::Rk4, 0.5f64).unwrap();
        assert!(it.check_stability(1.0).is_ok());
        assert!(matches!(it.check_stability(0.1), Err(Error::Stability { .. })));
        assert!(Integrator::new(Scheme::Rk4, -1.0f64).is_err());
    }
}
