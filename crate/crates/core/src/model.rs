//! Problem definition: nonlinearity, potential, coercivity constants and the
//! checks that a chosen instance satisfies the structural hypotheses.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, RealField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Equation {
    Nse,
    NseVortex,
    Nkg,
}

impl Equation {
    pub fn is_nse(self) -> bool {
        matches!(self, Equation::Nse | Equation::NseVortex)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonlinearityFamily {
    NsePower,
    NkgPower,
}

/// Single-power nonlinearity with an optional stabilizer.
///
/// `nse-power`: `W(s) = −(c/p)|s|^p + d|s|^q`.
/// `nkg-power`: `W(s) = ½m²s² − (c/p)|s|^p + d|s|^q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Nonlinearity {
    pub family: NonlinearityFamily,
    pub coefficient: f64,
    pub exponent: f64,
    #[serde(default)]
    pub mass: f64,
    #[serde(default)]
    pub stabilizer_coefficient: f64,
    #[serde(default)]
    pub stabilizer_exponent: f64,
}

impl Nonlinearity {
    pub fn nse_power(c_w: f64, p: f64) -> Self {
        Self {
            family: NonlinearityFamily::NsePower,
            coefficient: c_w,
            exponent: p,
            mass: 0.0,
            stabilizer_coefficient: 0.0,
            stabilizer_exponent: 0.0,
        }
    }

    pub fn nkg_power(m: f64, c_n: f64, p: f64) -> Self {
        Self {
            family: NonlinearityFamily::NkgPower,
            coefficient: c_n,
            exponent: p,
            mass: m,
            stabilizer_coefficient: 0.0,
            stabilizer_exponent: 0.0,
        }
    }

    pub fn with_stabilizer(mut self, d: f64, q: f64) -> Self {
        self.stabilizer_coefficient = d;
        self.stabilizer_exponent = q;
        self
    }

    fn has_stabilizer(&self) -> bool {
        self.stabilizer_coefficient != 0.0
    }

    fn quadratic(&self) -> f64 {
        match self.family {
            NonlinearityFamily::NsePower => 0.0,
            NonlinearityFamily::NkgPower => self.mass * self.mass,
        }
    }

    /// `W(s)`, extended evenly to `s < 0`.
    pub fn w(&self, s: f64) -> f64 {
        let s = s.abs();
        let p = self.exponent;
        let mut v = 0.5 * self.quadratic() * s * s - self.coefficient / p * s.powf(p);
        if self.has_stabilizer() {
            v += self.stabilizer_coefficient * s.powf(self.stabilizer_exponent);
        }
        v
    }

    /// `W′(s)`; odd in `s`.
    pub fn w_prime(&self, s: f64) -> f64 {
        s * self.w_prime_over_s(s)
    }

    /// `W′(s)/s`, finite at `s = 0`. The complex nonlinearity is
    /// `W′(ψ) = (W′(|ψ|)/|ψ|)·ψ`.
    pub fn w_prime_over_s(&self, s: f64) -> f64 {
        let s = s.abs();
        let p = self.exponent;
        let mut v = self.quadratic() - self.coefficient * s.powf(p - 2.0);
        if self.has_stabilizer() {
            let q = self.stabilizer_exponent;
            v += self.stabilizer_coefficient * q * s.powf(q - 2.0);
        }
        v
    }

    /// `W(s) − ½m²s²`, the superquadratic part.
    pub fn n(&self, s: f64) -> f64 {
        self.w(s) - 0.5 * self.quadratic() * s * s
    }

    /// Largest `s` such that `W ≥ 0` on `[0, s]`, searched up to `limit`.
    pub fn positivity_limit(&self, limit: f64) -> f64 {
        let steps = 20_000;
        let mut last = 0.0;
        for k in 1..=steps {
            let s = limit * k as f64 / steps as f64;
            if self.w(s) < 0.0 {
                let (mut lo, mut hi) = (last, s);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if self.w(mid) < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return lo;
            }
            last = s;
        }
        limit
    }
}

/// `W(s)`.
pub fn eval_w(n: &Nonlinearity, s: f64) -> f64 {
    n.w(s)
}

/// `W′(s)`.
pub fn eval_w_prime(n: &Nonlinearity, s: f64) -> f64 {
    n.w_prime(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialFamily {
    Constant,
    Lattice,
    AxialPeriodic,
}

/// Closed-form external potential.
///
/// `lattice`: `1 + v₀ ∏ᵢ (1 + cos 2π(A⁻¹x)ᵢ)/2`, clipped to `[1, V₀]`.
/// `axial-periodic`: `1 + v₀ (1 + cos 2πx₃)/2`, clipped to `[1, V₀]`, where
/// `x₃` is the last grid coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Potential {
    pub family: PotentialFamily,
    /// Value of the constant family.
    #[serde(default = "one")]
    pub value: f64,
    #[serde(default)]
    pub amplitude: f64,
    /// Upper clip `V₀`; defaults to `1 + amplitude`.
    #[serde(default)]
    pub max: Option<f64>,
    /// Row-major period matrix `A`; identity when absent.
    #[serde(default)]
    pub period_matrix: Option<Vec<Vec<f64>>>,
}

fn one() -> f64 {
    1.0
}

impl Potential {
    pub fn constant(value: f64) -> Self {
        Self {
            family: PotentialFamily::Constant,
            value,
            amplitude: 0.0,
            max: None,
            period_matrix: None,
        }
    }

    pub fn lattice(amplitude: f64, max: f64, period_matrix: Option<Vec<Vec<f64>>>) -> Self {
        Self {
            family: PotentialFamily::Lattice,
            value: 1.0,
            amplitude,
            max: Some(max),
            period_matrix,
        }
    }

    pub fn axial(amplitude: f64) -> Self {
        Self {
            family: PotentialFamily::AxialPeriodic,
            value: 1.0,
            amplitude,
            max: None,
            period_matrix: None,
        }
    }

    fn clip_max(&self) -> f64 {
        self.max.unwrap_or(1.0 + self.amplitude)
    }

    /// Analytic `(inf V, sup V)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self.family {
            PotentialFamily::Constant => (self.value, self.value),
            _ => (1.0, (1.0 + self.amplitude).min(self.clip_max()).max(1.0)),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self.family {
            PotentialFamily::Constant => {
                if !(self.value.is_finite() && self.value >= 1.0) {
                    return Err(Error::Config(format!(
                        "constant potential must satisfy 1 <= V, got {}",
                        self.value
                    )));
                }
            }
            PotentialFamily::Lattice | PotentialFamily::AxialPeriodic => {
                if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
                    return Err(Error::Config("potential amplitude must be finite and >= 0".into()));
                }
                if self.clip_max() < 1.0 {
                    return Err(Error::Config("potential max must be >= 1".into()));
                }
            }
        }
        if self.family == PotentialFamily::Lattice {
            let a = self.period_matrix_or_identity(dim);
            if a.len() != dim || a.iter().any(|row| row.len() != dim) {
                return Err(Error::Config(format!("period matrix must be {dim}x{dim}")));
            }
            invert(&a).ok_or_else(|| Error::Config("period matrix is singular".into()))?;
        }
        Ok(())
    }

    fn period_matrix_or_identity(&self, dim: usize) -> Vec<Vec<f64>> {
        self.period_matrix.clone().unwrap_or_else(|| {
            (0..dim)
                .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect()
        })
    }

    /// Evaluator for points given in Cartesian coordinates of dimension `dim`.
    pub fn evaluator(&self, dim: usize) -> Result<impl Fn(&[f64]) -> f64 + '_> {
        self.validate(dim)?;
        let inv = if self.family == PotentialFamily::Lattice {
            invert(&self.period_matrix_or_identity(dim))
        } else {
            None
        };
        let vmax = self.clip_max();
        Ok(move |x: &[f64]| -> f64 {
            match self.family {
                PotentialFamily::Constant => self.value,
                PotentialFamily::Lattice => {
                    let inv = inv.as_ref().expect("validated");
                    let mut prod = 1.0;
                    for row in inv {
                        let y: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                        prod *= 0.5 * (1.0 + (2.0 * PI * y).cos());
                    }
                    (1.0 + self.amplitude * prod).clamp(1.0, vmax)
                }
                PotentialFamily::AxialPeriodic => {
                    let x3 = *x.last().expect("nonempty point");
                    (1.0 + self.amplitude * 0.5 * (1.0 + (2.0 * PI * x3).cos())).clamp(1.0, vmax)
                }
            }
        })
    }

    /// Lattice translation in grid cells along each axis, when the period
    /// matrix is diagonal and every period is a whole number of cells.
    fn cell_periods(&self, grid: &Grid) -> Vec<Option<usize>> {
        let nd = grid.ndim();
        let whole = |period: f64, dx: f64| -> Option<usize> {
            let k = period / dx;
            let r = k.round();
            if r >= 1.0 && (k - r).abs() < 1e-9 * k.max(1.0) {
                Some(r as usize)
            } else {
                None
            }
        };
        match self.family {
            PotentialFamily::Constant => vec![Some(1); nd],
            PotentialFamily::Lattice => {
                let a = self.period_matrix_or_identity(nd);
                (0..nd)
                    .map(|i| {
                        let diagonal = (0..nd).all(|j| j == i || a[i][j] == 0.0 && a[j][i] == 0.0);
                        if diagonal {
                            whole(a[i][i].abs(), grid.axis(i).spacing)
                        } else {
                            None
                        }
                    })
                    .collect()
            }
            PotentialFamily::AxialPeriodic => (0..nd)
                .map(|i| {
                    if i + 1 == nd {
                        whole(1.0, grid.axis(i).spacing)
                    } else {
                        Some(1)
                    }
                })
                .collect(),
        }
    }
}

fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, piv);
        let d = m[col][col];
        m[col].iter_mut().for_each(|v| *v /= d);
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                if f != 0.0 {
                    let pivot_row = m[col].clone();
                    for (v, pv) in m[row].iter_mut().zip(pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// `(a, s)` of the regularizer `Φ = E + 2a|C|^s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coercivity {
    pub a: f64,
    pub s: f64,
}

/// Complete, validated problem description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ModelSpec {
    pub equation: Equation,
    pub nonlinearity: Nonlinearity,
    #[serde(default)]
    pub potential: Option<Potential>,
    #[serde(default)]
    pub winding: i32,
    pub coercivity: Coercivity,
    pub delta: f64,
}

impl ModelSpec {
    /// NSE with `W(s) = −(c/p)s^p` and the given potential.
    pub fn nse(c_w: f64, p: f64, potential: Potential, coercivity: Coercivity, delta: f64) -> Self {
        Self {
            equation: Equation::Nse,
            nonlinearity: Nonlinearity::nse_power(c_w, p),
            potential: Some(potential),
            winding: 0,
            coercivity,
            delta,
        }
    }

    pub fn nkg(nonlinearity: Nonlinearity, delta: f64) -> Self {
        Self {
            equation: Equation::Nkg,
            nonlinearity,
            potential: None,
            winding: 0,
            coercivity: Coercivity { a: 0.0, s: 2.0 },
            delta,
        }
    }

    pub fn vortex(c_w: f64, p: f64, potential: Potential, winding: i32, coercivity: Coercivity, delta: f64) -> Self {
        Self {
            equation: Equation::NseVortex,
            nonlinearity: Nonlinearity::nse_power(c_w, p),
            potential: Some(potential),
            winding,
            coercivity,
            delta,
        }
    }

    pub fn mass(&self) -> f64 {
        self.nonlinearity.mass
    }

    /// Checks the spec on its own and against the grid it will be solved on.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let n = grid.space_dim();
        let nl = &self.nonlinearity;
        let p = nl.exponent;
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta must be > 0, got {}", self.delta)));
        }
        if nl.stabilizer_coefficient < 0.0 {
            return Err(Error::Config("stabilizer coefficient must be >= 0".into()));
        }
        if nl.stabilizer_coefficient > 0.0 && nl.stabilizer_exponent <= p {
            return Err(Error::Config("stabilizer exponent q must exceed the exponent p".into()));
        }
        if n >= 3 {
            let crit = 2.0 * n as f64 / (n as f64 - 2.0);
            let top = if nl.stabilizer_coefficient > 0.0 {
                nl.stabilizer_exponent
            } else {
                p
            };
            if top >= crit {
                return Err(Error::Domain(format!(
                    "hypothesis W1: growth exponent {top} must be below 2N/(N-2) = {crit} for N = {n}"
                )));
            }
        }
        match self.equation {
            Equation::Nse | Equation::NseVortex => {
                if nl.family != NonlinearityFamily::NsePower {
                    return Err(Error::Config("NSE equations need the nse-power family".into()));
                }
                if !(nl.coefficient >= 0.0) {
                    return Err(Error::Config("nse-power coefficient must be >= 0".into()));
                }
                check_w2(n, p)?;
                let pot = self
                    .potential
                    .as_ref()
                    .ok_or_else(|| Error::Config("NSE equations need a potential".into()))?;
                pot.validate(n)?;
                if !(self.coercivity.a > 0.0 && self.coercivity.s > 1.0) {
                    return Err(Error::Config(format!(
                        "NSE coercivity needs a > 0 and s > 1, got a = {}, s = {}",
                        self.coercivity.a, self.coercivity.s
                    )));
                }
                if self.equation == Equation::NseVortex {
                    if !grid.is_cylindrical() {
                        return Err(Error::Config("nse-vortex requires a cylindrical grid".into()));
                    }
                    if self.winding == 0 {
                        return Err(Error::Config("nse-vortex requires winding != 0".into()));
                    }
                    if pot.family == PotentialFamily::Lattice {
                        return Err(Error::Config(
                            "nse-vortex supports constant or axial-periodic potentials".into(),
                        ));
                    }
                } else if self.winding != 0 {
                    return Err(Error::Config("winding is only meaningful for nse-vortex".into()));
                }
                if grid.is_cylindrical() && pot.family == PotentialFamily::Lattice {
                    return Err(Error::Config("lattice potentials need a cartesian grid".into()));
                }
            }
            Equation::Nkg => {
                if nl.family != NonlinearityFamily::NkgPower {
                    return Err(Error::Config("NKG needs the nkg-power family".into()));
                }
                if nl.mass == 0.0 || !nl.mass.is_finite() {
                    return Err(Error::Config("NKG mass must be nonzero".into()));
                }
                if nl.coefficient < 0.0 {
                    return Err(Error::Config("nkg-power coefficient must be >= 0".into()));
                }
                if p <= 2.0 {
                    return Err(Error::Domain(format!(
                        "the nkg-power exponent must exceed 2 so that N(s) = o(s^2), got {p}"
                    )));
                }
                if self.potential.is_some() {
                    return Err(Error::Config("NKG takes no potential".into()));
                }
                if self.coercivity.a != 0.0 {
                    return Err(Error::Config(
                        "NKG charge is sign-indefinite, coercivity a must be 0".into(),
                    ));
                }
                if self.winding != 0 {
                    return Err(Error::Config("winding is only meaningful for nse-vortex".into()));
                }
            }
        }
        Ok(())
    }

    /// Samples `V` on the grid (zero for NKG).
    pub fn potential_field(&self, grid: &Arc<Grid>) -> Result<RealField> {
        match &self.potential {
            None => Ok(RealField::zeros(grid)),
            Some(pot) => {
                let dim = if grid.is_cylindrical() { 1 } else { grid.ndim() };
                let eval = pot.evaluator(dim)?;
                let cyl = grid.is_cylindrical();
                Ok(RealField::from_fn(grid, |x| if cyl { eval(&x[1..]) } else { eval(x) }))
            }
        }
    }

    /// `V + ℓ²/(2r²)`, the potential seen by the reduced profile.
    pub fn effective_potential(&self, grid: &Arc<Grid>) -> Result<RealField> {
        let mut v = self.potential_field(grid)?;
        if self.winding != 0 && grid.is_cylindrical() {
            let l2 = (self.winding as f64).powi(2);
            for (i, val) in v.values_mut().iter_mut().enumerate() {
                let r = grid.radius(i).expect("cylindrical");
                *val += 0.5 * l2 / (r * r);
            }
        }
        Ok(v)
    }

    /// Grid shifts (in cells, per axis) that map the problem onto itself;
    /// `None` marks an axis with no admissible shift.
    pub fn translation_cells(&self, grid: &Grid) -> Vec<Option<usize>> {
        let mut cells = match &self.potential {
            None => vec![Some(1); grid.ndim()],
            Some(p) => p.cell_periods(grid),
        };
        for (a, c) in cells.iter_mut().enumerate() {
            if !grid.axis(a).is_periodic() {
                *c = None;
            }
        }
        cells
    }
}

fn check_w2(n: usize, p: f64) -> Result<()> {
    let upper = 2.0 + 4.0 / n as f64;
    if !(p > 2.0 && p < upper) {
        return Err(Error::Domain(format!(
            "hypothesis W2 violated: need 2 < p < 2 + 4/N = {upper} for N = {n}, got p = {p}"
        )));
    }
    Ok(())
}

/// Output of [`coercivity_constants`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoercivityConstants {
    pub a: f64,
    pub s: f64,
    pub q_exp: f64,
    pub gamma: f64,
    pub gamma_prime: f64,
    pub m: f64,
}

/// Constants `(a, s)` with `∫W(u) ≥ −a‖u‖₂^{2s} − ½‖∇u‖₂²` for
/// `W(s) ≥ −(c_W/p)s^p`, given a Gagliardo–Nirenberg constant `b_p`.
///
/// The Young splitting uses `K = b_p^p` and `c = c_W/p`, the constants that
/// actually bound `(c_W/p)‖u‖_p^p`.
pub fn coercivity_constants(n: usize, p: f64, c_w: f64, b_p: f64) -> Result<CoercivityConstants> {
    check_w2(n, p)?;
    if !(b_p > 0.0 && c_w > 0.0) {
        return Err(Error::Domain("b_p and c_W must be positive".into()));
    }
    let q_exp = n as f64 * (p - 2.0) / 2.0;
    let gamma = 2.0 / q_exp;
    let gamma_prime = gamma / (gamma - 1.0);
    let c = c_w / p;
    let m = (2.0 * c / gamma).powf(1.0 / gamma);
    let s = (p - q_exp) * gamma_prime / 2.0;
    let k = b_p.powf(p);
    let a = c * (k * m).powf(gamma_prime) / gamma_prime;
    if !(q_exp < 2.0 && s > 1.0) {
        return Err(Error::Numerical(format!(
            "coercivity constants out of range: q = {q_exp}, s = {s}"
        )));
    }
    Ok(CoercivityConstants {
        a,
        s,
        q_exp,
        gamma,
        gamma_prime,
        m,
    })
}

/// `‖u‖_p / (‖u‖₂^{1−θ} ‖∇u‖₂^θ)` with `θ = N(½ − 1/p)`.
pub fn gn_ratio(u: &RealField, p: f64) -> f64 {
    let n = u.grid().space_dim() as f64;
    let theta = n * (0.5 - 1.0 / p);
    let lp = u.integrate_with(|v| v.abs().powf(p)).powf(1.0 / p);
    let l2 = u.norm();
    let d = u.dirichlet_energy().sqrt();
    lp / (l2.powf(1.0 - theta) * d.powf(theta))
}

/// Safety factor applied to the best ratio found.
pub const GN_SAFETY: f64 = 1.1;

/// Estimates the Gagliardo–Nirenberg constant on `grid` by maximizing the
/// ratio over Gaussian and sech profiles and refining the best one by
/// gradient ascent on its logarithm.
pub fn estimate_gn_constant(n: usize, p: f64, grid: &Arc<Grid>) -> Result<f64> {
    if grid.space_dim() != n {
        return Err(Error::Usage(format!(
            "grid has dimension {}, requested N = {n}",
            grid.space_dim()
        )));
    }
    if !(p > 2.0) {
        return Err(Error::Domain(format!("exponent must exceed 2, got {p}")));
    }
    if n > 2 && p >= 2.0 * n as f64 / (n as f64 - 2.0) {
        return Err(Error::Domain(format!("exponent {p} is not subcritical for N = {n}")));
    }
    let center = grid.center();
    let cyl = grid.is_cylindrical();
    let min_half = grid
        .axes()
        .iter()
        .enumerate()
        .map(|(a, ax)| if cyl && a == 0 { ax.length() } else { 0.5 * ax.length() })
        .fold(f64::INFINITY, f64::min);
    let max_dx = grid.spacings().into_iter().fold(0.0, f64::max);
    let radius = |x: &[f64]| -> f64 {
        x.iter()
            .enumerate()
            .map(|(a, xa)| {
                let c = if cyl && a == 0 { 0.0 } else { center[a] };
                (xa - c) * (xa - c)
            })
            .sum::<f64>()
            .sqrt()
    };

    let mut best: Option<(f64, RealField)> = None;
    let widths = 16;
    let (w_lo, w_hi) = (2.0 * max_dx, min_half / 6.0);
    if w_hi <= w_lo {
        return Err(Error::Config("grid too coarse to resolve trial profiles".into()));
    }
    for k in 0..widths {
        let w = w_lo * (w_hi / w_lo).powf(k as f64 / (widths - 1) as f64);
        for family in 0..2 {
            let u = RealField::from_fn(grid, |x| {
                let r = radius(x) / w;
                if family == 0 {
                    (-0.5 * r * r).exp()
                } else {
                    1.0 / r.cosh()
                }
            });
            let ratio = gn_ratio(&u, p);
            if ratio.is_finite() && best.as_ref().is_none_or(|(b, _)| ratio > *b) {
                best = Some((ratio, u));
            }
        }
    }
    let (mut best_ratio, mut u) = best.ok_or_else(|| Error::Numerical("no finite trial ratio".into()))?;

    let theta = n as f64 * (0.5 - 1.0 / p);
    let mut step = 0.1;
    for _ in 0..200 {
        let pp = u.integrate_with(|v| v.abs().powf(p));
        let c2 = u.norm_sqr();
        let d = u.dirichlet_energy();
        let lap = u.laplacian();
        let mut g = u.map(|v| v.abs().powf(p - 2.0) * v / pp - (1.0 - theta) * v / c2);
        g.axpy(theta / d, &lap);
        let gnorm = g.norm();
        if !(gnorm > 0.0) {
            break;
        }
        let mut trial = u.clone();
        trial.axpy(step * u.norm() / gnorm, &g);
        let r = gn_ratio(&trial, p);
        if r.is_finite() && r > best_ratio {
            best_ratio = r;
            u = trial;
            step *= 1.5;
        } else {
            step *= 0.5;
            if step < 1e-8 {
                break;
            }
        }
    }
    Ok(best_ratio * GN_SAFETY)
}

/// Result of [`check_hylomorphy_hypothesis`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub holds: bool,
    pub s0: f64,
    pub margin: f64,
    /// NKG only: the scan is restricted to `[0, s_max]` where `W ≥ 0`.
    pub s_max: Option<f64>,
}

const SCAN_LO: f64 = 1e-3;
const SCAN_HI: f64 = 1e3;
const SCAN_POINTS: usize = 601;

/// Scans `s₀` on a logarithmic grid and reports the best hylomorphy margin.
pub fn check_hylomorphy_hypothesis(spec: &ModelSpec) -> HypothesisReport {
    let nl = &spec.nonlinearity;
    let scan = (0..SCAN_POINTS).map(|k| SCAN_LO * (SCAN_HI / SCAN_LO).powf(k as f64 / (SCAN_POINTS - 1) as f64));
    let (margin_of, s_max): (Box<dyn Fn(f64) -> f64>, Option<f64>) = if spec.equation.is_nse() {
        let (inf_v, sup_v) = spec.potential.as_ref().map(Potential::bounds).unwrap_or((1.0, 1.0));
        (Box::new(move |s| (inf_v - sup_v) - nl.w(s) / (s * s)), None)
    } else {
        let m2 = nl.mass * nl.mass;
        (
            Box::new(move |s| 0.5 * m2 * s * s - nl.w(s)),
            Some(nl.positivity_limit(SCAN_HI)),
        )
    };
    let mut best = (f64::NEG_INFINITY, SCAN_LO);
    for s in scan {
        if let Some(lim) = s_max {
            if s > lim {
                break;
            }
        }
        let m = margin_of(s);
        if m > best.0 {
            best = (m, s);
        }
    }
    let (margin, s0) = best;
    HypothesisReport {
        holds: margin > 0.0,
        s0,
        margin,
        s_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, AxisSpec, GridSpec};

    #[test]
    fn w_values() {
        let nkg = Nonlinearity::nkg_power(1.0, 1.0, 4.0);
        assert_eq!(nkg.w(0.0), 0.0);
        assert_eq!(nkg.w_prime(0.0), 0.0);
        assert!((nkg.w(1.0) - 0.25).abs() < 1e-15);
        let nse = Nonlinearity::nse_power(2.0, 4.0);
        assert!((nse.w(1.0) + 0.5).abs() < 1e-15);
        assert!((nse.w_prime(1.0) + 2.0).abs() < 1e-15);
        assert_eq!(nse.w(-1.5), nse.w(1.5));
        assert_eq!(nse.w_prime(-1.5), -nse.w_prime(1.5));
    }

    #[test]
    fn w_prime_matches_central_difference() {
        let cases = [
            Nonlinearity::nse_power(2.0, 4.0),
            Nonlinearity::nse_power(1.0, 3.0).with_stabilizer(0.1, 5.0),
            Nonlinearity::nkg_power(1.0, 1.0, 4.0).with_stabilizer(0.1, 6.0),
        ];
        let h = 1e-5;
        for nl in &cases {
            for k in 0..=20 {
                let s = 0.1 * 100f64.powf(k as f64 / 20.0);
                let fd = (nl.w(s + h) - nl.w(s - h)) / (2.0 * h);
                let exact = nl.w_prime(s);
                assert!(((fd - exact) / exact).abs() <= 1e-8, "s = {s}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn coercivity_exponents() {
        for (n, p, s) in [(3, 3.0, 3.0), (1, 4.0, 3.0), (2, 3.0, 2.0)] {
            let c = coercivity_constants(n, p, 1.0, 1.0).unwrap();
            assert!((c.s - s).abs() < 1e-12, "N={n} p={p}: s={}", c.s);
            assert!(c.q_exp < 2.0);
        }
        let c = coercivity_constants(3, 3.0, 1.0, 1.0).unwrap();
        assert!((c.q_exp - 1.5).abs() < 1e-15);
        assert!((c.gamma - 4.0 / 3.0).abs() < 1e-15);
        assert!((c.gamma_prime - 4.0).abs() < 1e-12);
        let c = coercivity_constants(1, 4.0, 1.0, 1.0).unwrap();
        assert_eq!((c.q_exp, c.gamma, c.gamma_prime), (1.0, 2.0, 2.0));
        assert!(coercivity_constants(1, 6.0, 1.0, 1.0).is_err());
        assert!(coercivity_constants(3, 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn lattice_is_periodic_and_bounded() {
        let a = vec![vec![1.0, 0.5], vec![0.0, 2.0]];
        let pot = Potential::lattice(0.3, 1.2, Some(a.clone()));
        let v = pot.evaluator(2).unwrap();
        let mut rng = crate::sampling::rng(5);
        use rand::Rng;
        for _ in 0..200 {
            let x = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let z: [i32; 2] = [rng.gen_range(-2..=2), rng.gen_range(-2..=2)];
            let shift = [
                a[0][0] * z[0] as f64 + a[0][1] * z[1] as f64,
                a[1][0] * z[0] as f64 + a[1][1] * z[1] as f64,
            ];
            let y = [x[0] + shift[0], x[1] + shift[1]];
            assert!((v(&x) - v(&y)).abs() <= 1e-14 * 10.0);
            assert!((1.0..=1.2).contains(&v(&x)));
        }
    }

    #[test]
    fn hypothesis_verdicts() {
        let nse = ModelSpec::nse(2.0, 4.0, Potential::constant(1.0), Coercivity { a: 1.0, s: 3.0 }, 0.01);
        let r = check_hylomorphy_hypothesis(&nse);
        assert!(r.holds);
        assert!((r.margin - 0.5 * r.s0 * r.s0).abs() < 1e-9 * r.margin);

        let nkg = ModelSpec::nkg(Nonlinearity::nkg_power(1.0, 1.0, 4.0), 0.01);
        let r = check_hylomorphy_hypothesis(&nkg);
        assert!(r.holds);
        assert!((r.s_max.unwrap() - 2f64.sqrt()).abs() < 1e-3);

        let lin = ModelSpec::nkg(Nonlinearity::nkg_power(1.0, 0.0, 4.0), 0.01);
        let r = check_hylomorphy_hypothesis(&lin);
        assert!(!r.holds);
        assert_eq!(r.margin, 0.0);
    }

    #[test]
    fn w2_message_names_hypothesis() {
        let g = build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(-10.0, 10.0, 64)])).unwrap();
        let spec = ModelSpec::nse(1.0, 8.0, Potential::constant(1.0), Coercivity { a: 1.0, s: 3.0 }, 0.01);
        let err = spec.validate(&g).unwrap_err();
        assert!(err.to_string().contains("W2"));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn gn_estimate_bounds_sech() {
        let g = build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(-20.0, 20.0, 1024)])).unwrap();
        let b = estimate_gn_constant(1, 4.0, &g).unwrap();
        let sech = RealField::from_fn(&g, |x| 1.0 / x[0].cosh());
        assert!(gn_ratio(&sech, 4.0) <= b);
    }

    #[test]
    fn gn_ratio_scale_invariant() {
        let g = build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(-30.0, 30.0, 65536)])).unwrap();
        let u = RealField::from_fn(&g, |x| 1.0 / x[0].cosh());
        let u2 = u.scaled(2.0);
        let u3 = RealField::from_fn(&g, |x| 1.0 / (3.0 * x[0]).cosh());
        let r = gn_ratio(&u, 4.0);
        assert!((gn_ratio(&u2, 4.0) - r).abs() <= 1e-12);
        assert!((gn_ratio(&u3, 4.0) - r).abs() <= 1e-6 * r);
    }
}
