//! Phase-space discretization: a periodic spatial axis times a truncated
//! velocity axis, cell-centred, with the quadrature and difference stencils
//! every functional and vector field is built from.
//!
//! Layout conventions:
//! * cell `(i, j)` has centre `(r_i, v_j)` with `r_i = r0 + (i + 1/2) dr` and
//!   `v_j = -v_max + (j + 1/2) dv`, so the velocity nodes are symmetric about 0;
//! * distribution-shaped arrays are stored row-major in `r` (velocity index
//!   contiguous), `idx = i * n_v + j`;
//! * velocity quadrature is the midpoint rule with one weight per column
//!   (`dv` for an intact grid);
//! * velocity fluxes live on the `n_v + 1` faces of a column; the two outer
//!   faces carry zero flux.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{ordered_sum, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid<T> {
    n_r: usize,
    n_v: usize,
    length_r: T,
    v_max: T,
    r_origin: T,
    dr: T,
    dv: T,
    r: Vec<T>,
    v: Vec<T>,
    v_weights: Vec<T>,
}

impl<T: Real> PhaseGrid<T> {
    pub fn new(n_r: usize, n_v: usize, length_r: T, v_max: T) -> Result<Arc<Self>> {
        Self::with_origin(n_r, n_v, length_r, v_max, T::zero())
    }

    fn with_origin(n_r: usize, n_v: usize, length_r: T, v_max: T, r_origin: T) -> Result<Arc<Self>> {
        if n_r == 0 {
            return Err(Error::param("n_r", "must be positive"));
        }
        if n_v == 0 {
            return Err(Error::param("n_v", "must be positive"));
        }
        if !(length_r > T::zero()) || !length_r.is_finite() {
            return Err(Error::param("length_r", "must be a positive finite length"));
        }
        if !(v_max > T::zero()) || !v_max.is_finite() {
            return Err(Error::param("v_max", "must be a positive finite velocity"));
        }
        let dr = length_r / T::of_usize(n_r);
        let dv = (v_max + v_max) / T::of_usize(n_v);
        let half = T::of(0.5);
        let r = (0..n_r)
            .map(|i| r_origin + (T::of_usize(i) + half) * dr)
            .collect();
        let centre = T::of_usize(n_v) * half;
        let v = (0..n_v)
            .map(|j| (T::of_usize(j) + half - centre) * dv)
            .collect();
        Ok(Arc::new(Self {
            n_r,
            n_v,
            length_r,
            v_max,
            r_origin,
            dr,
            dv,
            r,
            v,
            v_weights: vec![dv; n_v],
        }))
    }

    /// Same grid with spatial centres moved to the cell faces `r_{i+1/2}`.
    /// Face-staggered closures are evaluated on this grid.
    pub fn staggered(&self) -> Arc<Self> {
        let mut g = Self::with_origin(
            self.n_r,
            self.n_v,
            self.length_r,
            self.v_max,
            self.r_origin + self.dr * T::of(0.5),
        )
        .expect("parameters already validated");
        Arc::make_mut(&mut g).v_weights = self.v_weights.clone();
        g
    }

    /// Copy of this grid with one velocity quadrature weight scaled by
    /// `factor`. Exists for mutation fixtures of the verification suite.
    #[doc(hidden)]
    pub fn with_corrupted_velocity_weight(&self, column: usize, factor: T) -> Arc<Self> {
        let mut g = self.clone();
        g.v_weights[column % self.n_v] *= factor;
        Arc::new(g)
    }

    #[inline]
    pub fn n_r(&self) -> usize {
        self.n_r
    }
    #[inline]
    pub fn n_v(&self) -> usize {
        self.n_v
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.n_r * self.n_v
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    #[inline]
    pub fn dr(&self) -> T {
        self.dr
    }
    #[inline]
    pub fn dv(&self) -> T {
        self.dv
    }
    #[inline]
    pub fn length_r(&self) -> T {
        self.length_r
    }
    #[inline]
    pub fn v_max(&self) -> T {
        self.v_max
    }
    #[inline]
    pub fn r(&self, i: usize) -> T {
        self.r[i]
    }
    #[inline]
    pub fn v(&self, j: usize) -> T {
        self.v[j]
    }
    pub fn r_centers(&self) -> &[T] {
        &self.r
    }
    pub fn v_centers(&self) -> &[T] {
        &self.v
    }
    pub fn v_weights(&self) -> &[T] {
        &self.v_weights
    }
    /// Velocity face `j` in `0..=n_v`; faces 0 and `n_v` are the truncation walls.
    #[inline]
    pub fn v_face(&self, j: usize) -> T {
        (T::of_usize(j) - T::of_usize(self.n_v) * T::of(0.5)) * self.dv
    }
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_v + j
    }

    /// True when two grids describe the same discretization.
    pub fn compatible(&self, other: &Self) -> bool {
        self.n_r == other.n_r
            && self.n_v == other.n_v
            && self.length_r == other.length_r
            && self.v_max == other.v_max
            && self.v_weights == other.v_weights
    }

    /// Velocity quadrature of one column.
    #[inline]
    pub fn quad_v(&self, column: &[T]) -> T {
        ordered_sum(column.iter().zip(&self.v_weights).map(|(&g, &w)| g * w))
    }
}

fn check_grid<T: Real>(a: &PhaseGrid<T>, b: &PhaseGrid<T>, ctx: &'static str) -> Result<()> {
    if std::ptr::eq(a, b) || a.compatible(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch(ctx))
    }
}

/// Real value per spatial cell.
#[derive(Debug, Clone)]
pub struct ScalarField<T> {
    grid: Arc<PhaseGrid<T>>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn from_values(grid: &Arc<PhaseGrid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n_r() {
            return Err(Error::Shape {
                context: "ScalarField",
                expected: grid.n_r(),
                got: values.len(),
            });
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn constant(grid: &Arc<PhaseGrid<T>>, c: T) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![c; grid.n_r()],
        }
    }

    pub fn zeros(grid: &Arc<PhaseGrid<T>>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn from_fn(grid: &Arc<PhaseGrid<T>>, mut g: impl FnMut(T) -> T) -> Self {
        let values = grid.r_centers().iter().map(|&r| g(r)).collect();
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<PhaseGrid<T>> {
        &self.grid
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<T> {
        self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, mut g: impl FnMut(T) -> T) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&x| g(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, mut g: impl FnMut(T, T) -> T) -> Result<Self> {
        check_grid(&self.grid, &other.grid, "ScalarField::zip_map")?;
        Ok(Self {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| g(a, b))
                .collect(),
        })
    }

    /// `∫ dr` with the periodic midpoint rule.
    pub fn integral(&self) -> T {
        ordered_sum(self.values.iter().copied()) * self.grid.dr()
    }

    /// `∫ dr a b`.
    pub fn inner(&self, other: &Self) -> Result<T> {
        check_grid(&self.grid, &other.grid, "ScalarField::inner")?;
        Ok(ordered_sum(self.values.iter().zip(&other.values).map(|(&a, &b)| a * b)) * self.grid.dr())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }
}

/// Real value per phase-space cell: the one-particle distribution function or
/// any field of the same shape (conjugates, fluxes, right-hand sides).
#[derive(Debug, Clone)]
pub struct DistFn<T> {
    grid: Arc<PhaseGrid<T>>,
    values: Vec<T>,
}

impl<T: Real> DistFn<T> {
    pub fn from_values(grid: &Arc<PhaseGrid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape {
                context: "DistFn",
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn constant(grid: &Arc<PhaseGrid<T>>, c: T) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: &Arc<PhaseGrid<T>>) -> Self {
        Self::constant(grid, T::zero())
    }

    /// Samples `g(r, v)` at every cell centre.
    pub fn from_fn(grid: &Arc<PhaseGrid<T>>, mut g: impl FnMut(T, T) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for &r in grid.r_centers() {
            for &v in grid.v_centers() {
                values.push(g(r, v));
            }
        }
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    /// Field depending on velocity only, e.g. `v^2 / 2m`.
    pub fn from_velocity_fn(grid: &Arc<PhaseGrid<T>>, mut g: impl FnMut(T) -> T) -> Self {
        let col: Vec<T> = grid.v_centers().iter().map(|&v| g(v)).collect();
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.n_r() {
            values.extend_from_slice(&col);
        }
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    /// Broadcasts a spatial field along velocity.
    pub fn from_scalar_field(field: &ScalarField<T>) -> Self {
        let grid = field.grid();
        let mut values = Vec::with_capacity(grid.len());
        for &x in field.values() {
            values.extend(std::iter::repeat_n(x, grid.n_v()));
        }
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<PhaseGrid<T>> {
        &self.grid
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<T> {
        self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[i * self.grid.n_v() + j]
    }
    /// Velocity column at spatial cell `i`.
    #[inline]
    pub fn column(&self, i: usize) -> &[T] {
        let n_v = self.grid.n_v();
        &self.values[i * n_v..(i + 1) * n_v]
    }
    #[inline]
    pub fn column_mut(&mut self, i: usize) -> &mut [T] {
        let n_v = self.grid.n_v();
        &mut self.values[i * n_v..(i + 1) * n_v]
    }

    pub fn map(&self, mut g: impl FnMut(T) -> T) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&x| g(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, mut g: impl FnMut(T, T) -> T) -> Result<Self> {
        check_grid(&self.grid, &other.grid, "DistFn::zip_map")?;
        Ok(Self {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| g(a, b))
                .collect(),
        })
    }

    /// `∫ dr ∫ dv`.
    pub fn integral(&self) -> T {
        let g = &self.grid;
        let per_r = (0..g.n_r()).map(|i| g.quad_v(self.column(i)));
        ordered_sum(per_r) * g.dr()
    }

    /// `∫ dr ∫ dv a b`.
    pub fn inner(&self, other: &Self) -> Result<T> {
        check_grid(&self.grid, &other.grid, "DistFn::inner")?;
        let g = &self.grid;
        let n_v = g.n_v();
        let w = g.v_weights();
        let per_r = (0..g.n_r()).map(|i| {
            let a = &self.values[i * n_v..(i + 1) * n_v];
            let b = &other.values[i * n_v..(i + 1) * n_v];
            ordered_sum((0..n_v).map(|j| a[j] * b[j] * w[j]))
        });
        Ok(ordered_sum(per_r) * g.dr())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn min_value(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &x| m.min(x))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }
}

/// Hydrodynamic fields plus the distribution function: `x = (rho, u, s, f)`.
#[derive(Debug, Clone)]
pub struct ExtendedState<T> {
    pub rho: ScalarField<T>,
    /// One-dimensional momentum density.
    pub u: ScalarField<T>,
    pub s: ScalarField<T>,
    pub f: DistFn<T>,
}

impl<T: Real> ExtendedState<T> {
    pub fn new(rho: ScalarField<T>, u: ScalarField<T>, s: ScalarField<T>, f: DistFn<T>) -> Result<Self> {
        let g = f.grid();
        for (field, name) in [(&rho, "rho"), (&u, "u"), (&s, "s")] {
            if !field.grid().compatible(g) {
                return Err(Error::GridMismatch(match name {
                    "rho" => "ExtendedState rho",
                    "u" => "ExtendedState u",
                    _ => "ExtendedState s",
                }));
            }
        }
        Ok(Self { rho, u, s, f })
    }

    pub fn grid(&self) -> &Arc<PhaseGrid<T>> {
        self.f.grid()
    }
}

/// Hydrodynamic triple `(rho, u, s)` without the kinetic part.
#[derive(Debug, Clone)]
pub struct HydroFields<T> {
    pub rho: ScalarField<T>,
    pub u: ScalarField<T>,
    pub s: ScalarField<T>,
}

/// `∫ dv g` at every spatial cell, midpoint rule with the grid's weights.
pub fn integrate_v<T: Real>(g: &DistFn<T>) -> ScalarField<T> {
    let grid = g.grid();
    let values = (0..grid.n_r()).map(|i| grid.quad_v(g.column(i))).collect();
    ScalarField {
        grid: Arc::clone(grid),
        values,
    }
}

/// Hydrodynamic moments `(rho, u, s) = (∫f, ∫v f, ∫η(f))`.
///
/// `eta` returns `None` when `f` lies outside its domain; the error names the
/// offending cell.
pub fn moments<T: Real>(
    f: &DistFn<T>,
    eta: impl Fn(T) -> Option<T>,
) -> Result<(ScalarField<T>, ScalarField<T>, ScalarField<T>)> {
    let grid = f.grid();
    let rho = integrate_v(f);
    let vf = DistFn::from_fn(grid, |_, v| v);
    let u = integrate_v(&vf.zip_map(f, |v, x| v * x)?);
    let mut eta_vals = Vec::with_capacity(f.len());
    for i in 0..grid.n_r() {
        for (j, &x) in f.column(i).iter().enumerate() {
            match eta(x) {
                Some(y) if y.is_finite() => eta_vals.push(y),
                _ => {
                    return Err(Error::Domain {
                        what: "entropy density".into(),
                        r: i,
                        v: j,
                        value: x.as_f64(),
                    })
                }
            }
        }
    }
    let s = integrate_v(&DistFn::from_values(grid, eta_vals)?);
    Ok((rho, u, s))
}

/// Central difference in `r`, periodic wrap. Skew-adjoint under `∫ dr`.
pub fn d_dr<T: Real>(field: &ScalarField<T>) -> ScalarField<T> {
    let n = field.len();
    let inv = T::one() / (field.grid().dr() + field.grid().dr());
    let a = field.values();
    let values = (0..n)
        .map(|i| (a[(i + 1) % n] - a[(i + n - 1) % n]) * inv)
        .collect();
    ScalarField {
        grid: Arc::clone(field.grid()),
        values,
    }
}

/// [`d_dr`] applied at every velocity.
pub fn d_dr_dist<T: Real>(g: &DistFn<T>) -> DistFn<T> {
    let grid = g.grid();
    let (n_r, n_v) = (grid.n_r(), grid.n_v());
    let inv = T::one() / (grid.dr() + grid.dr());
    let mut out = vec![T::zero(); g.len()];
    for i in 0..n_r {
        let ip = (i + 1) % n_r;
        let im = (i + n_r - 1) % n_r;
        for j in 0..n_v {
            out[i * n_v + j] = (g.values[ip * n_v + j] - g.values[im * n_v + j]) * inv;
        }
    }
    DistFn {
        grid: Arc::clone(grid),
        values: out,
    }
}

/// Central difference in `v` with the field extended by zero beyond
/// `±v_max`. The stencil is skew-adjoint, so `∫dv d_dv(g) = 0` whenever `g`
/// vanishes in the two wall cells.
pub fn d_dv<T: Real>(g: &DistFn<T>) -> DistFn<T> {
    let grid = g.grid();
    let n_v = grid.n_v();
    let inv = T::one() / (grid.dv() + grid.dv());
    let mut out = vec![T::zero(); g.len()];
    for i in 0..grid.n_r() {
        let col = g.column(i);
        let dst = &mut out[i * n_v..(i + 1) * n_v];
        for j in 0..n_v {
            let up = if j + 1 < n_v { col[j + 1] } else { T::zero() };
            let dn = if j > 0 { col[j - 1] } else { T::zero() };
            dst[j] = (up - dn) * inv;
        }
    }
    DistFn {
        grid: Arc::clone(grid),
        values: out,
    }
}

/// Central difference in `v` with second-order one-sided rows at the two
/// walls. Used for conjugate fields such as `E_f`, which do not vanish at the
/// truncation; exact for quadratics in `v`.
pub fn d_dv_conjugate<T: Real>(g: &DistFn<T>) -> DistFn<T> {
    let grid = g.grid();
    let n_v = grid.n_v();
    let dv = grid.dv();
    let inv = T::one() / (dv + dv);
    let mut out = vec![T::zero(); g.len()];
    for i in 0..grid.n_r() {
        let col = g.column(i);
        let dst = &mut out[i * n_v..(i + 1) * n_v];
        match n_v {
            1 => dst[0] = T::zero(),
            2 => {
                let d = (col[1] - col[0]) / dv;
                dst[0] = d;
                dst[1] = d;
            }
            _ => {
                let three = T::of(3.0);
                let four = T::of(4.0);
                dst[0] = (-three * col[0] + four * col[1] - col[2]) * inv;
                for j in 1..n_v - 1 {
                    dst[j] = (col[j + 1] - col[j - 1]) * inv;
                }
                dst[n_v - 1] =
                    (three * col[n_v - 1] - four * col[n_v - 2] + col[n_v - 3]) * inv;
            }
        }
    }
    DistFn {
        grid: Arc::clone(grid),
        values: out,
    }
}

/// Velocity fluxes on the `n_v + 1` faces of every column. The wall faces are
/// held at zero, which is what makes every `div_v` below mass conserving.
#[derive(Debug, Clone)]
pub struct VelocityFlux<T> {
    grid: Arc<PhaseGrid<T>>,
    values: Vec<T>,
}

impl<T: Real> VelocityFlux<T> {
    /// Builds interior face fluxes `flux(i, j, left, right)` for the face
    /// between columns cells `j` and `j + 1`.
    pub fn from_faces(
        grid: &Arc<PhaseGrid<T>>,
        mut flux: impl FnMut(usize, usize) -> T,
    ) -> Self {
        let stride = grid.n_v() + 1;
        let mut values = vec![T::zero(); grid.n_r() * stride];
        for i in 0..grid.n_r() {
            for j in 0..grid.n_v().saturating_sub(1) {
                values[i * stride + j + 1] = flux(i, j);
            }
        }
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    /// Flux through the face between cells `j` and `j + 1` of column `i`.
    #[inline]
    pub fn interior(&self, i: usize, j: usize) -> T {
        self.values[i * (self.grid.n_v() + 1) + j + 1]
    }

    /// `(F_{j+1/2} - F_{j-1/2}) / dv`.
    pub fn divergence(&self) -> DistFn<T> {
        let grid = &self.grid;
        let n_v = grid.n_v();
        let stride = n_v + 1;
        let inv = T::one() / grid.dv();
        let mut out = vec![T::zero(); grid.len()];
        for i in 0..grid.n_r() {
            let row = &self.values[i * stride..(i + 1) * stride];
            for j in 0..n_v {
                out[i * n_v + j] = (row[j + 1] - row[j]) * inv;
            }
        }
        DistFn {
            grid: Arc::clone(grid),
            values: out,
        }
    }
}

/// Arithmetic mean of `g` on the face between cells `j` and `j + 1`.
#[inline]
pub fn face_mean<T: Real>(col: &[T], j: usize) -> T {
    (col[j] + col[j + 1]) * T::of(0.5)
}

/// `(a_{i+1} - a_i) / dr` on spatial face `i + 1/2`, periodic.
pub fn r_face_difference<T: Real>(a: &[T], dr: T) -> Vec<T> {
    let n = a.len();
    (0..n).map(|i| (a[(i + 1) % n] - a[i]) / dr).collect()
}

/// `(a_i + a_{i+1}) / 2` on spatial face `i + 1/2`, periodic.
pub fn r_face_mean<T: Real>(a: &[T]) -> Vec<T> {
    let n = a.len();
    (0..n).map(|i| (a[i] + a[(i + 1) % n]) * T::of(0.5)).collect()
}

/// `(F_{i+1/2} - F_{i-1/2}) / dr` from face values, periodic.
pub fn r_face_divergence<T: Real>(faces: &[T], dr: T) -> Vec<T> {
    let n = faces.len();
    (0..n).map(|i| (faces[i] - faces[(i + n - 1) % n]) / dr).collect()
}

/// State container an explicit integrator can combine linearly.
pub trait StateVector<T: Real>: Clone + Send {
    /// `self += a * x`.
    fn axpy(&mut self, a: T, x: &Self);
    fn all_finite(&self) -> bool;
    fn flatten(&self) -> Vec<f64>;
}

impl<T: Real> StateVector<T> for ScalarField<T> {
    fn axpy(&mut self, a: T, x: &Self) {
        for (y, &xv) in self.values.iter_mut().zip(&x.values) {
            *y += a * xv;
        }
    }
    fn all_finite(&self) -> bool {
        ScalarField::all_finite(self)
    }
    fn flatten(&self) -> Vec<f64> {
        self.values.iter().map(|x| x.as_f64()).collect()
    }
}

impl<T: Real> StateVector<T> for DistFn<T> {
    fn axpy(&mut self, a: T, x: &Self) {
        for (y, &xv) in self.values.iter_mut().zip(&x.values) {
            *y += a * xv;
        }
    }
    fn all_finite(&self) -> bool {
        DistFn::all_finite(self)
    }
    fn flatten(&self) -> Vec<f64> {
        self.values.iter().map(|x| x.as_f64()).collect()
    }
}

impl<T: Real> StateVector<T> for HydroFields<T> {
    fn axpy(&mut self, a: T, x: &Self) {
        self.rho.axpy(a, &x.rho);
        self.u.axpy(a, &x.u);
        self.s.axpy(a, &x.s);
    }
    fn all_finite(&self) -> bool {
        self.rho.all_finite() && self.u.all_finite() && self.s.all_finite()
    }
    fn flatten(&self) -> Vec<f64> {
        let mut out = self.rho.flatten();
        out.extend(self.u.flatten());
        out.extend(self.s.flatten());
        out
    }
}

impl<T: Real> StateVector<T> for ExtendedState<T> {
    fn axpy(&mut self, a: T, x: &Self) {
        self.rho.axpy(a, &x.rho);
        self.u.axpy(a, &x.u);
        self.s.axpy(a, &x.s);
        self.f.axpy(a, &x.f);
    }
    fn all_finite(&self) -> bool {
        self.rho.all_finite() && self.u.all_finite() && self.s.all_finite() && self.f.all_finite()
    }
    fn flatten(&self) -> Vec<f64> {
        let mut out = self.rho.flatten();
        out.extend(self.u.flatten());
        out.extend(self.s.flatten());
        out.extend(StateVector::flatten(&self.f));
        out
    }
}
