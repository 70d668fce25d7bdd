//! Per-axis functions of the discrete Laplacian.
//!
//! The Laplacian is a sum of commuting one-dimensional operators `L_a`.
//! On a periodic axis `L_a` is diagonalized by the FFT; on a Dirichlet or
//! radial axis it is tridiagonal. Both the evolution's linear step and the
//! minimizer's preconditioner are products of one-dimensional rational
//! functions `(b₀ + b₁L_a)/(a₀ + a₁L_a)` applied axis by axis.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{Field, Grid, RealField, Scalar};

/// Eigenvalues used for `L_a` on periodic axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symbol {
    /// `−(4/Δ²) sin²(πk/n)`, the exact spectrum of the finite-difference operator.
    Discrete,
    /// `−(2πk/L)²`, the continuum spectrum.
    Spectral,
}

struct PeriodicPlan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    discrete: Vec<f64>,
    spectral: Vec<f64>,
}

/// Precomputed FFT plans and symbols for every periodic axis of a grid.
pub struct AxisOps {
    grid: Arc<Grid>,
    plans: Vec<Option<PeriodicPlan>>,
}

impl std::fmt::Debug for AxisOps {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AxisOps").field("shape", &self.grid.shape()).finish()
    }
}

impl AxisOps {
    pub fn new(grid: &Arc<Grid>) -> Self {
        let mut planner = FftPlanner::new();
        let plans = grid
            .axes()
            .iter()
            .map(|ax| {
                if !ax.is_periodic() {
                    return None;
                }
                let n = ax.len();
                let dx = ax.spacing;
                let discrete = (0..n)
                    .map(|k| {
                        let s = (PI * k as f64 / n as f64).sin();
                        -4.0 / (dx * dx) * s * s
                    })
                    .collect();
                let spectral = (0..n)
                    .map(|k| {
                        let ks = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
                        let w = 2.0 * PI * ks / ax.length();
                        -w * w
                    })
                    .collect();
                Some(PeriodicPlan {
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                    discrete,
                    spectral,
                })
            })
            .collect();
        Self {
            grid: grid.clone(),
            plans,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Eigenvalues of `L_a` on a periodic axis, indexed by FFT bin.
    pub fn symbol(&self, axis: usize, which: Symbol) -> Option<&[f64]> {
        self.plans[axis].as_ref().map(|p| match which {
            Symbol::Discrete => p.discrete.as_slice(),
            Symbol::Spectral => p.spectral.as_slice(),
        })
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.plans[axis].is_some()
    }

    /// Unnormalized FFT along a periodic axis (`inverse` uses `e^{+}`).
    pub fn fft_axis(&self, values: &mut [Complex64], axis: usize, inverse: bool) {
        let plan = self.plans[axis].as_ref().expect("periodic axis");
        let fft = if inverse { &plan.inverse } else { &plan.forward };
        let n = plan.discrete.len();
        let stride = self.grid.strides()[axis];
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for base in self.grid.line_starts(axis) {
            for (j, v) in line.iter_mut().enumerate() {
                *v = values[base + j * stride];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (j, v) in line.iter().enumerate() {
                values[base + j * stride] = *v;
            }
        }
    }

    /// Applies `f(L_a)` along a periodic axis, with `f` evaluated on the
    /// chosen symbol.
    pub fn apply_periodic<F: Fn(f64) -> Complex64>(&self, values: &mut [Complex64], axis: usize, which: Symbol, f: F) {
        let plan = self.plans[axis].as_ref().expect("periodic axis");
        let symbol = match which {
            Symbol::Discrete => &plan.discrete,
            Symbol::Spectral => &plan.spectral,
        };
        let factors: Vec<Complex64> = symbol.iter().map(|&l| f(l)).collect();
        let n = factors.len();
        let scale = 1.0 / n as f64;
        let stride = self.grid.strides()[axis];
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.forward.get_inplace_scratch_len()];
        for base in self.grid.line_starts(axis) {
            for (j, v) in line.iter_mut().enumerate() {
                *v = values[base + j * stride];
            }
            plan.forward.process_with_scratch(&mut line, &mut scratch);
            for (v, fk) in line.iter_mut().zip(&factors) {
                *v *= fk * scale;
            }
            plan.inverse.process_with_scratch(&mut line, &mut scratch);
            for (j, v) in line.iter().enumerate() {
                values[base + j * stride] = *v;
            }
        }
    }

    /// Applies `(num₀ + num₁L_a)(den₀ + den₁L_a)⁻¹` along one axis; exact
    /// through the chosen symbol on periodic axes, by a tridiagonal solve
    /// otherwise.
    pub fn apply_rational(
        &self,
        values: &mut [Complex64],
        axis: usize,
        which: Symbol,
        num: (Complex64, Complex64),
        den: (Complex64, Complex64),
    ) {
        if self.plans[axis].is_some() {
            self.apply_periodic(values, axis, which, |l| (num.0 + num.1 * l) / (den.0 + den.1 * l));
            return;
        }
        let ax = self.grid.axis(axis);
        let n = ax.len();
        let stride = self.grid.strides()[axis];
        let (lo, di, up) = (&ax.lower, &ax.diag, &ax.upper);
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        let mut c_prime = vec![Complex64::new(0.0, 0.0); n];
        for base in self.grid.line_starts(axis) {
            for j in 0..n {
                let v = values[base + j * stride];
                let mut lv = v * di[j];
                if j > 0 {
                    lv += values[base + (j - 1) * stride] * lo[j];
                }
                if j + 1 < n {
                    lv += values[base + (j + 1) * stride] * up[j];
                }
                rhs[j] = num.0 * v + num.1 * lv;
            }
            if den.1 == Complex64::new(0.0, 0.0) {
                for (j, r) in rhs.iter().enumerate() {
                    values[base + j * stride] = r / den.0;
                }
                continue;
            }
            // Thomas algorithm for den₀ I + den₁ L_a.
            let b0 = den.0 + den.1 * di[0];
            c_prime[0] = if n > 1 {
                den.1 * up[0] / b0
            } else {
                Complex64::new(0.0, 0.0)
            };
            rhs[0] /= b0;
            for j in 1..n {
                let a = den.1 * lo[j];
                let b = den.0 + den.1 * di[j] - a * c_prime[j - 1];
                c_prime[j] = if j + 1 < n {
                    den.1 * up[j] / b
                } else {
                    Complex64::new(0.0, 0.0)
                };
                let prev = rhs[j - 1];
                rhs[j] = (rhs[j] - a * prev) / b;
            }
            for j in (0..n - 1).rev() {
                let next = rhs[j + 1];
                rhs[j] -= c_prime[j] * next;
            }
            for (j, r) in rhs.iter().enumerate() {
                values[base + j * stride] = *r;
            }
        }
    }
}

/// Sobolev-type preconditioner `P = κ⁻¹ ∏ₐ (1 − L_a/κ)⁻¹`, self-adjoint and
/// positive in the quadrature inner product.
#[derive(Debug)]
pub struct Preconditioner {
    ops: AxisOps,
    kappa: f64,
}

impl Preconditioner {
    pub fn new(grid: &Arc<Grid>, kappa: f64) -> Self {
        assert!(kappa > 0.0);
        Self {
            ops: AxisOps::new(grid),
            kappa,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let k = Complex64::new(-1.0 / self.kappa, 0.0);
        for a in 0..self.ops.grid.ndim() {
            if inverse {
                self.ops.apply_rational(buf, a, Symbol::Discrete, (one, k), (one, zero));
            } else {
                self.ops.apply_rational(buf, a, Symbol::Discrete, (one, zero), (one, k));
            }
        }
        let s = if inverse { self.kappa } else { 1.0 / self.kappa };
        buf.iter_mut().for_each(|v| *v *= s);
    }

    pub fn apply<T: Scalar + Precond>(&self, f: &Field<T>, inverse: bool) -> Field<T> {
        let mut buf: Vec<Complex64> = f.values().iter().map(|v| v.to_complex()).collect();
        self.run(&mut buf, inverse);
        Field::from_values(f.grid(), buf.into_iter().map(T::from_complex).collect()).expect("same grid")
    }
}

/// Conversion back from the complex work buffer.
pub trait Precond {
    fn from_complex(z: Complex64) -> Self;
}

impl Precond for f64 {
    fn from_complex(z: Complex64) -> Self {
        z.re
    }
}

impl Precond for Complex64 {
    fn from_complex(z: Complex64) -> Self {
        z
    }
}

/// Real convenience wrapper.
pub fn precondition_real(p: &Preconditioner, f: &RealField) -> RealField {
    p.apply(f, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, AxisSpec, ComplexField, GridSpec};

    fn mixed() -> Arc<Grid> {
        build_grid(GridSpec::cartesian(vec![
            AxisSpec::dirichlet(0.0, 2.0, 12),
            AxisSpec::periodic(0.0, 1.0, 16),
        ]))
        .unwrap()
    }

    #[test]
    fn discrete_symbol_reproduces_laplacian() {
        let g = build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(0.0, 3.0, 64)])).unwrap();
        let ops = AxisOps::new(&g);
        let f = RealField::from_fn(&g, |x| (x[0] * 2.0 * PI / 3.0).sin().exp());
        let mut buf: Vec<Complex64> = f.values().iter().map(|v| v.to_complex()).collect();
        ops.apply_periodic(&mut buf, 0, Symbol::Discrete, |l| Complex64::new(l, 0.0));
        let lf = f.laplacian();
        for (a, b) in buf.iter().zip(lf.values()) {
            assert!((a.re - b).abs() < 1e-9 && a.im.abs() < 1e-9);
        }
    }

    #[test]
    fn rational_inverts_on_dirichlet_axis() {
        let g = mixed();
        let ops = AxisOps::new(&g);
        let f = crate::sampling::band_limited_complex(&g, 3, &mut crate::sampling::rng(4));
        let mut buf = f.values().to_vec();
        let one = Complex64::new(1.0, 0.0);
        let c = Complex64::new(0.3, -0.7);
        ops.apply_rational(&mut buf, 0, Symbol::Discrete, (one, -c), (one, c));
        ops.apply_rational(&mut buf, 0, Symbol::Discrete, (one, c), (one, -c));
        for (a, b) in buf.iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn preconditioner_roundtrip_and_symmetry() {
        let g = mixed();
        let p = Preconditioner::new(&g, 2.0);
        let mut rng = crate::sampling::rng(9);
        let u = crate::sampling::band_limited(&g, 4, &mut rng);
        let v = crate::sampling::band_limited(&g, 4, &mut rng);
        let back = p.apply(&p.apply(&u, false), true);
        assert!(back.sub(&u).norm() < 1e-12);
        let a = p.apply(&u, false).dot(&v);
        let b = u.dot(&p.apply(&v, false));
        assert!((a - b).abs() < 1e-12);
        assert!(p.apply(&u, false).dot(&u) > 0.0);
        let z: ComplexField = u.to_complex();
        assert!(p.apply(&z, false).real_part().sub(&p.apply(&u, false)).norm() < 1e-14);
    }
}
