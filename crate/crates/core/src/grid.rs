//! Structured grids, sampled fields and the discrete operators shared by the
//! rest of the crate.
//!
//! Two grid kinds are supported. Cartesian grids have one to three axes, each
//! either periodic (nodes at `min + j·Δ`) or Dirichlet-zero (cell-centred
//! nodes at `min + (j+½)·Δ` with antisymmetric ghosts, so the field vanishes
//! on the box faces). Cylindrical grids describe axisymmetric functions
//! `u(r, x₃)` of three space variables; the radial samples are cell-centred,
//! `r_j = (j+½)·Δr`, so the `1/r` factors of the cylindrical Laplacian are
//! never evaluated on the axis.
//!
//! Every axis carries a list of faces with conductances. The Laplacian and
//! the discrete gradient inner product are both assembled from that list,
//! which makes summation by parts hold to rounding error:
//!
//! ```text
//! ∫ g·Δf = −⟨∇f, ∇g⟩
//! ```

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of samples per axis.
pub const MIN_POINTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    Cartesian,
    Cylindrical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    DirichletZero,
}

/// Extent, resolution and boundary condition of one axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub boundary: Boundary,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, points: usize, boundary: Boundary) -> Self {
        Self {
            min,
            max,
            points,
            boundary,
        }
    }

    pub fn periodic(min: f64, max: f64, points: usize) -> Self {
        Self::new(min, max, points, Boundary::Periodic)
    }

    pub fn dirichlet(min: f64, max: f64, points: usize) -> Self {
        Self::new(min, max, points, Boundary::DirichletZero)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub kind: GridKind,
    pub axes: Vec<AxisSpec>,
}

impl GridSpec {
    pub fn cartesian(axes: Vec<AxisSpec>) -> Self {
        Self {
            kind: GridKind::Cartesian,
            axes,
        }
    }

    /// Cylindrical `(r, x₃)` grid with `r ∈ (0, r_max)`.
    pub fn cylindrical(r_max: f64, r_points: usize, x3: AxisSpec) -> Self {
        Self {
            kind: GridKind::Cylindrical,
            axes: vec![AxisSpec::dirichlet(0.0, r_max, r_points), x3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 3 {
            return Err(Error::Config(format!(
                "grid must have between 1 and 3 axes, got {}",
                self.axes.len()
            )));
        }
        for (i, axis) in self.axes.iter().enumerate() {
            if axis.points < MIN_POINTS {
                return Err(Error::Config(format!(
                    "axis {i}: {} points, at least {MIN_POINTS} required",
                    axis.points
                )));
            }
            if !(axis.min.is_finite() && axis.max.is_finite()) || axis.max <= axis.min {
                return Err(Error::Config(format!(
                    "axis {i}: extent [{}, {}] is empty or not finite",
                    axis.min, axis.max
                )));
            }
        }
        if self.kind == GridKind::Cylindrical {
            if self.axes.len() != 2 {
                return Err(Error::Config(format!(
                    "cylindrical grid needs exactly 2 axes (r, x3), got {}",
                    self.axes.len()
                )));
            }
            let r = &self.axes[0];
            if r.min != 0.0 {
                return Err(Error::Config(format!(
                    "axis 0 (r): cylindrical radius must start at 0, got {}",
                    r.min
                )));
            }
            if r.boundary != Boundary::DirichletZero {
                return Err(Error::Config(
                    "axis 0 (r): cylindrical radius needs a dirichlet-zero outer boundary".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One face of the discrete gradient along an axis.
///
/// A missing side stands for an antisymmetric ghost node (`f_ghost = −f`).
#[derive(Clone, Copy, Debug)]
struct Face {
    left: Option<usize>,
    right: Option<usize>,
    conductance: f64,
}

/// Precomputed geometry of one axis.
#[derive(Clone, Debug)]
pub struct Axis {
    pub spec: AxisSpec,
    pub spacing: f64,
    pub coords: Vec<f64>,
    /// One-dimensional quadrature weights; the node weight is their product.
    pub weights: Vec<f64>,
    faces: Vec<Face>,
    /// Tridiagonal form of the 1-D Laplacian, `(lower, diag, upper)`; on a
    /// periodic axis `lower[0]` couples to the last node and `upper[n-1]`
    /// to the first.
    pub(crate) lower: Vec<f64>,
    pub(crate) diag: Vec<f64>,
    pub(crate) upper: Vec<f64>,
    pub radial: bool,
}

impl Axis {
    fn build(spec: &AxisSpec, radial: bool) -> Axis {
        let n = spec.points;
        let spacing = (spec.max - spec.min) / n as f64;
        let periodic = spec.boundary == Boundary::Periodic;
        let coords: Vec<f64> = (0..n)
            .map(|j| {
                if periodic {
                    spec.min + j as f64 * spacing
                } else {
                    spec.min + (j as f64 + 0.5) * spacing
                }
            })
            .collect();

        let weights: Vec<f64> = if radial {
            coords
                .iter()
                .map(|r| 2.0 * std::f64::consts::PI * r * spacing)
                .collect()
        } else {
            vec![spacing; n]
        };

        let mut faces = Vec::with_capacity(n + 1);
        if radial {
            // Face between r_j and r_{j+1} sits at r_{j+1/2} = (j+1)Δr; the
            // face on the axis has zero area and is omitted.
            let two_pi = 2.0 * std::f64::consts::PI;
            for j in 0..n - 1 {
                let r_face = (j + 1) as f64 * spacing;
                faces.push(Face {
                    left: Some(j),
                    right: Some(j + 1),
                    conductance: two_pi * r_face / spacing,
                });
            }
            let r_outer = spec.max;
            faces.push(Face {
                left: Some(n - 1),
                right: None,
                conductance: two_pi * r_outer / (2.0 * spacing),
            });
        } else {
            let c = 1.0 / spacing;
            for j in 0..n - 1 {
                faces.push(Face {
                    left: Some(j),
                    right: Some(j + 1),
                    conductance: c,
                });
            }
            if periodic {
                faces.push(Face {
                    left: Some(n - 1),
                    right: Some(0),
                    conductance: c,
                });
            } else {
                faces.push(Face {
                    left: None,
                    right: Some(0),
                    conductance: c / 2.0,
                });
                faces.push(Face {
                    left: Some(n - 1),
                    right: None,
                    conductance: c / 2.0,
                });
            }
        }

        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for face in &faces {
            match (face.left, face.right) {
                (Some(l), Some(r)) => {
                    let cl = face.conductance / weights[l];
                    let cr = face.conductance / weights[r];
                    // node l couples to its upper neighbour r, node r to its lower neighbour l
                    upper[l] += cl;
                    diag[l] -= cl;
                    lower[r] += cr;
                    diag[r] -= cr;
                }
                (Some(b), None) | (None, Some(b)) => {
                    diag[b] -= 4.0 * face.conductance / weights[b];
                }
                (None, None) => unreachable!(),
            }
        }

        Axis {
            spec: spec.clone(),
            spacing,
            coords,
            weights,
            faces,
            lower,
            diag,
            upper,
            radial,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn is_periodic(&self) -> bool {
        self.spec.boundary == Boundary::Periodic
    }

    pub fn length(&self) -> f64 {
        self.spec.max - self.spec.min
    }
}

/// Immutable discretization shared by all fields living on it.
#[derive(Debug)]
pub struct Grid {
    spec: GridSpec,
    axes: Vec<Axis>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    weights: Vec<f64>,
    volume: f64,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

/// Validates `spec` and precomputes spacings, quadrature weights and operators.
pub fn build_grid(spec: GridSpec) -> Result<Arc<Grid>> {
    Grid::new(spec).map(Arc::new)
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Grid> {
        spec.validate()?;
        let cylindrical = spec.kind == GridKind::Cylindrical;
        let axes: Vec<Axis> = spec
            .axes
            .iter()
            .enumerate()
            .map(|(i, a)| Axis::build(a, cylindrical && i == 0))
            .collect();
        let shape: Vec<usize> = axes.iter().map(Axis::len).collect();
        let mut strides = vec![1; shape.len()];
        for a in (0..shape.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        let total: usize = shape.iter().product();
        let mut weights = vec![1.0; total];
        for (a, axis) in axes.iter().enumerate() {
            for (idx, w) in weights.iter_mut().enumerate() {
                *w *= axis.weights[(idx / strides[a]) % shape[a]];
            }
        }
        let volume = pairwise_sum(total, &|i| weights[i]);
        Ok(Grid {
            spec,
            axes,
            shape,
            strides,
            weights,
            volume,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn kind(&self) -> GridKind {
        self.spec.kind
    }

    pub fn is_cylindrical(&self) -> bool {
        self.spec.kind == GridKind::Cylindrical
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, a: usize) -> &Axis {
        &self.axes[a]
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    /// Dimension of the physical space the grid samples (3 for cylindrical grids).
    pub fn space_dim(&self) -> usize {
        match self.spec.kind {
            GridKind::Cartesian => self.axes.len(),
            GridKind::Cylindrical => 3,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.spacing).collect()
    }

    /// Measure of the sampled region (`π R² L` for cylindrical grids).
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Index of node `flat` along axis `a`.
    #[inline]
    pub fn axis_index(&self, flat: usize, a: usize) -> usize {
        (flat / self.strides[a]) % self.shape[a]
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        (0..self.ndim()).map(|a| self.axis_index(flat, a)).collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Grid coordinates of node `flat` (`(r, x₃)` on cylindrical grids).
    pub fn coords(&self, flat: usize) -> Vec<f64> {
        (0..self.ndim())
            .map(|a| self.axes[a].coords[self.axis_index(flat, a)])
            .collect()
    }

    /// Radial coordinate of node `flat` on a cylindrical grid.
    #[inline]
    pub fn radius(&self, flat: usize) -> Option<f64> {
        if self.is_cylindrical() {
            Some(self.axes[0].coords[self.axis_index(flat, 0)])
        } else {
            None
        }
    }

    /// Distance of node `flat` from the coordinate origin in physical space.
    pub fn distance_from_origin(&self, flat: usize) -> f64 {
        self.coords(flat).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Midpoint of the box in grid coordinates.
    pub fn center(&self) -> Vec<f64> {
        self.axes.iter().map(|a| 0.5 * (a.spec.min + a.spec.max)).collect()
    }

    /// Quadrature of a real pointwise expression of the node index.
    pub fn integrate_by<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        let w = &self.weights;
        pairwise_sum(w.len(), &|i| w[i] * f(i))
    }

    /// Applies the discrete Laplacian, `out = Δ input`.
    pub fn laplacian_into<T: Scalar>(&self, input: &[T], out: &mut [T]) {
        debug_assert_eq!(input.len(), self.len());
        out.iter_mut().for_each(|v| *v = T::zero());
        for (a, axis) in self.axes.iter().enumerate() {
            let n = self.shape[a];
            let stride = self.strides[a];
            let periodic = axis.is_periodic();
            for base in self.line_starts(a) {
                for j in 0..n {
                    let idx = base + j * stride;
                    let mut acc = input[idx] * axis.diag[j];
                    if j > 0 {
                        acc += input[idx - stride] * axis.lower[j];
                    } else if periodic {
                        acc += input[base + (n - 1) * stride] * axis.lower[0];
                    }
                    if j + 1 < n {
                        acc += input[idx + stride] * axis.upper[j];
                    } else if periodic {
                        acc += input[base] * axis.upper[n - 1];
                    }
                    out[idx] += acc;
                }
            }
        }
    }

    /// Discrete gradient inner product `⟨∇f, ∇g⟩`, assembled face by face.
    pub fn grad_inner_slices<T: Scalar>(&self, f: &[T], g: &[T]) -> f64 {
        let mut terms: Vec<f64> = Vec::with_capacity(self.len() * self.ndim());
        for (a, axis) in self.axes.iter().enumerate() {
            let stride = self.strides[a];
            for base in self.line_starts(a) {
                for face in &axis.faces {
                    let (df, dg, node) = match (face.left, face.right) {
                        (Some(l), Some(r)) => {
                            let il = base + l * stride;
                            let ir = base + r * stride;
                            (f[ir] - f[il], g[ir] - g[il], l)
                        }
                        (Some(b), None) => {
                            let ib = base + b * stride;
                            (-(f[ib] * 2.0), -(g[ib] * 2.0), b)
                        }
                        (None, Some(b)) => {
                            let ib = base + b * stride;
                            (f[ib] * 2.0, g[ib] * 2.0, b)
                        }
                        (None, None) => unreachable!(),
                    };
                    let cross = self.weights[base + node * stride] / axis.weights[node];
                    terms.push(cross * face.conductance * df.re_dot(dg));
                }
            }
        }
        pairwise_sum(terms.len(), &|i| terms[i])
    }

    /// Start indices of all lines running along axis `a`.
    pub(crate) fn line_starts(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.shape[a];
        let stride = self.strides[a];
        let outer: usize = self.shape[..a].iter().product();
        (0..outer).flat_map(move |o| (0..stride).map(move |i| o * n * stride + i))
    }
}

/// Sum of `f(0..n)` in a fixed pairwise tree order.
pub fn pairwise_sum(n: usize, f: &dyn Fn(usize) -> f64) -> f64 {
    fn rec(lo: usize, hi: usize, f: &dyn Fn(usize) -> f64) -> f64 {
        if hi - lo <= 32 {
            let mut s = 0.0;
            for i in lo..hi {
                s += f(i);
            }
            s
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, f) + rec(mid, hi, f)
        }
    }
    rec(0, n, f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentType {
    Real,
    Complex,
}

/// Sample type of a field: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Default
    + Send
    + Sync
    + fmt::Debug
    + PartialEq
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + AddAssign
    + SubAssign
{
    const COMPONENT: ComponentType;
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    /// `Re(self · conj(other))`.
    fn re_dot(self, other: Self) -> f64;
    fn abs_sqr(self) -> f64;
    fn abs(self) -> f64 {
        self.abs_sqr().sqrt()
    }
    fn is_finite(self) -> bool;
    fn to_complex(self) -> Complex64;
}

impl Scalar for f64 {
    const COMPONENT: ComponentType = ComponentType::Real;
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn re_dot(self, other: Self) -> f64 {
        self * other
    }
    fn abs_sqr(self) -> f64 {
        self * self
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    const COMPONENT: ComponentType = ComponentType::Complex;
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn re_dot(self, other: Self) -> f64 {
        self.re * other.re + self.im * other.im
    }
    fn abs_sqr(self) -> f64 {
        self.norm_sqr()
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// Function sampled on a grid, stored row-major (last axis fastest).
#[derive(Clone, Debug)]
pub struct Field<T: Scalar> {
    grid: Arc<Grid>,
    values: Vec<T>,
}

pub type RealField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: Scalar> PartialEq for Field<T> {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl<T: Scalar> Field<T> {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![T::zero(); grid.len()],
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Usage(format!(
                "field has {} samples, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Samples `f` at the grid coordinates of every node.
    pub fn from_fn<F: FnMut(&[f64]) -> T>(grid: &Arc<Grid>, mut f: F) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
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

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map<U: Scalar, F: Fn(T) -> U>(&self, f: F) -> Field<U> {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Quadrature of a real-valued pointwise expression of the samples.
    pub fn integrate_with<F: Fn(T) -> f64>(&self, f: F) -> f64 {
        let v = &self.values;
        self.grid.integrate_by(|i| f(v[i]))
    }

    /// Quadrature inner product `Re ∫ f·conj(g)`.
    pub fn dot(&self, other: &Self) -> f64 {
        let (a, b) = (&self.values, &other.values);
        self.grid.integrate_by(|i| a[i].re_dot(b[i]))
    }

    /// `∫ |f|²`.
    pub fn norm_sqr(&self) -> f64 {
        self.integrate_with(|v| v.abs_sqr())
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn axpy(&mut self, alpha: f64, x: &Self) {
        for (y, &xv) in self.values.iter_mut().zip(&x.values) {
            *y += xv * alpha;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for y in &mut self.values {
            *y = *y * alpha;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn laplacian(&self) -> Self {
        let mut out = vec![T::zero(); self.values.len()];
        self.grid.laplacian_into(&self.values, &mut out);
        Self {
            grid: self.grid.clone(),
            values: out,
        }
    }

    /// `⟨∇f, ∇g⟩` over the grid.
    pub fn grad_inner(&self, other: &Self) -> f64 {
        self.grid.grad_inner_slices(&self.values, &other.values)
    }

    /// `∫ |∇f|²`.
    pub fn dirichlet_energy(&self) -> f64 {
        self.grad_inner(self)
    }

    /// Moves the content by `cells` nodes towards higher indices along a
    /// periodic axis (wrapping around).
    pub fn shift(&self, axis: usize, cells: isize) -> Result<Self> {
        let ax = self.grid.axis(axis);
        if !ax.is_periodic() {
            return Err(Error::Usage(format!(
                "axis {axis} is not periodic; shifts are only defined on periodic axes"
            )));
        }
        let n = ax.len() as isize;
        let stride = self.grid.strides()[axis];
        let k = cells.rem_euclid(n) as usize;
        let mut out = vec![T::zero(); self.values.len()];
        for base in self.grid.line_starts(axis) {
            for j in 0..n as usize {
                let dst = (j + k) % n as usize;
                out[base + dst * stride] = self.values[base + j * stride];
            }
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: out,
        })
    }

    pub fn to_complex(&self) -> ComplexField {
        self.map(|v| v.to_complex())
    }
}

impl RealField {
    pub fn abs_field(&self) -> RealField {
        self.map(f64::abs)
    }
}

impl ComplexField {
    pub fn real_part(&self) -> RealField {
        self.map(|z| z.re)
    }

    pub fn imag_part(&self) -> RealField {
        self.map(|z| z.im)
    }

    pub fn modulus(&self) -> RealField {
        self.map(|z| z.norm())
    }

    pub fn rotate_phase(&mut self, theta: f64) {
        let p = Complex64::from_polar(1.0, theta);
        for v in &mut self.values {
            *v *= p;
        }
    }

    /// `∫ f·conj(g)`.
    pub fn inner_complex(&self, other: &Self) -> Complex64 {
        let (a, b) = (&self.values, &other.values);
        let re = self.grid.integrate_by(|i| (a[i] * b[i].conj()).re);
        let im = self.grid.integrate_by(|i| (a[i] * b[i].conj()).im);
        Complex64::new(re, im)
    }
}

/// Phase-space state `(ψ, ψ̂)` of the Klein–Gordon equation in Hamiltonian form.
#[derive(Clone, Debug, PartialEq)]
pub struct NkgState {
    pub psi: ComplexField,
    pub psi_hat: ComplexField,
}

impl NkgState {
    pub fn new(psi: ComplexField, psi_hat: ComplexField) -> Result<Self> {
        if !psi.same_grid(&psi_hat) {
            return Err(Error::Usage("psi and psi_hat live on different grids".into()));
        }
        Ok(Self { psi, psi_hat })
    }

    /// Standing-wave data `(u, −iωu)`.
    pub fn standing_wave(u: &RealField, omega: f64) -> Self {
        let psi = u.to_complex();
        let psi_hat = u.map(|v| Complex64::new(0.0, -omega * v));
        Self { psi, psi_hat }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            psi: ComplexField::zeros(grid),
            psi_hat: ComplexField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.psi.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.psi.is_finite() && self.psi_hat.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(min: f64, max: f64, n: usize, b: Boundary) -> Arc<Grid> {
        build_grid(GridSpec::cartesian(vec![AxisSpec::new(min, max, n, b)])).unwrap()
    }

    #[test]
    fn periodic_spacing_and_weights() {
        let g = grid1(-1.0, 1.0, 8, Boundary::Periodic);
        assert_eq!(g.axis(0).spacing, 0.25);
        assert!(g.weights().iter().all(|&w| w == 0.25));
        assert_eq!(g.axis(0).coords[0], -1.0);
    }

    #[test]
    fn cylindrical_radii_are_cell_centred() {
        let g = build_grid(GridSpec::cylindrical(1.0, 4, AxisSpec::periodic(0.0, 1.0, 4))).unwrap();
        assert_eq!(g.axis(0).coords, vec![0.125, 0.375, 0.625, 0.875]);
        let w = 2.0 * std::f64::consts::PI * 0.125 * 0.25 * 0.25;
        assert!((g.weights()[0] - w).abs() < 1e-15);
    }

    #[test]
    fn too_few_points_is_rejected() {
        let err = build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(0.0, 1.0, 2)])).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("axis 0")));
        let err = build_grid(GridSpec::cartesian(vec![
            AxisSpec::periodic(0.0, 1.0, 8),
            AxisSpec::dirichlet(1.0, 1.0, 8),
        ]))
        .unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("axis 1")));
    }

    #[test]
    fn cylindrical_needs_two_axes_from_zero() {
        let bad = GridSpec {
            kind: GridKind::Cylindrical,
            axes: vec![AxisSpec::dirichlet(0.5, 1.0, 8), AxisSpec::periodic(0.0, 1.0, 8)],
        };
        assert!(build_grid(bad).is_err());
        let bad = GridSpec {
            kind: GridKind::Cylindrical,
            axes: vec![AxisSpec::dirichlet(0.0, 1.0, 8)],
        };
        assert!(build_grid(bad).is_err());
    }

    #[test]
    fn quadrature_volumes() {
        let g = grid1(0.0, 1.0, 16, Boundary::Periodic);
        assert_eq!(RealField::from_fn(&g, |_| 1.0).integrate_with(|v| v), 1.0);
        let g = build_grid(GridSpec::cylindrical(1.0, 64, AxisSpec::dirichlet(0.0, 1.0, 16))).unwrap();
        let vol = RealField::from_fn(&g, |_| 1.0).integrate_with(|v| v);
        assert!((vol - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn sech_squared_integral() {
        let g = grid1(-20.0, 20.0, 2048, Boundary::Periodic);
        let f = RealField::from_fn(&g, |x| 1.0 / x[0].cosh().powi(2));
        let exact = 2.0 * 20f64.tanh();
        assert!((f.integrate_with(|v| v) - exact).abs() < 1e-8);
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = grid1(0.0, 1.0, 32, Boundary::Periodic);
        let f = RealField::from_fn(&g, |_| 3.0);
        assert!(f.laplacian().max_abs() < 1e-10);
        assert!(f.dirichlet_energy().abs() < 1e-20);
    }

    #[test]
    fn laplacian_of_sine_is_second_order() {
        let g = grid1(0.0, 1.0, 256, Boundary::Periodic);
        let k = 2.0 * std::f64::consts::PI;
        let f = RealField::from_fn(&g, |x| (k * x[0]).sin());
        let lf = f.laplacian();
        let dx = g.axis(0).spacing;
        let discrete = -(2.0 / (dx * dx)) * (1.0 - (k * dx).cos());
        let mut max_rel = 0.0f64;
        for (i, (&l, &v)) in lf.values().iter().zip(f.values()).enumerate() {
            // exact discrete eigenvalue
            assert!((l - discrete * v).abs() < 1e-8, "node {i}");
            if v.abs() > 0.1 {
                max_rel = max_rel.max(((l - (-k * k * v)) / (k * k * v)).abs());
            }
        }
        assert!(max_rel <= 1e-3, "max relative error {max_rel}");
    }

    #[test]
    fn laplacian_annihilates_affine_interior() {
        let g = grid1(0.0, 2.0, 20, Boundary::DirichletZero);
        let f = RealField::from_fn(&g, |x| 3.0 * x[0] - 1.0);
        let lf = f.laplacian();
        for j in 1..19 {
            assert!(lf.values()[j].abs() < 1e-9);
        }
    }

    #[test]
    fn periodic_shift_commutes_with_laplacian() {
        let g = build_grid(GridSpec::cartesian(vec![
            AxisSpec::periodic(0.0, 1.0, 12),
            AxisSpec::periodic(0.0, 2.0, 10),
        ]))
        .unwrap();
        let f = RealField::from_fn(&g, |x| (x[0] * 7.0).sin() * (1.0 + x[1] * x[1]));
        for axis in 0..2 {
            let a = f.shift(axis, 3).unwrap().laplacian();
            let b = f.laplacian().shift(axis, 3).unwrap();
            assert_eq!(a.values(), b.values());
        }
    }

    #[test]
    fn shift_rejects_dirichlet_axis() {
        let g = grid1(0.0, 1.0, 8, Boundary::DirichletZero);
        assert!(RealField::zeros(&g).shift(0, 1).is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let s = pairwise_sum(1000, &|i| i as f64);
        assert_eq!(s, 499500.0);
    }
}
