//! Explicit test functions and the numeric hylomorphy verdict
//! `inf Λ < Λ₀`, with `Λ₀` replaced by the Rayleigh-quotient proxy.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{evaluate_all, rayleigh_quotient_min, Problem, RayleighOptions};
use crate::grid::{Grid, NkgState, RealField};
use crate::model::{check_hylomorphy_hypothesis, Equation, HypothesisReport};

/// Margin, in cells, required between a test function's support and the box walls.
const MARGIN_CELLS: f64 = 2.0;

/// Distance of each node from the box centre (from the centre of the
/// `x₃` axis on cylindrical grids).
fn radial_distance(grid: &Grid) -> impl Fn(&[f64]) -> f64 + '_ {
    let center = grid.center();
    let cyl = grid.is_cylindrical();
    move |x: &[f64]| {
        x.iter()
            .enumerate()
            .map(|(a, xa)| {
                let c = if cyl && a == 0 { 0.0 } else { center[a] };
                (xa - c) * (xa - c)
            })
            .sum::<f64>()
            .sqrt()
    }
}

fn check_extent(grid: &Grid, axis: usize, reach: f64, what: &str) -> Result<()> {
    let ax = grid.axis(axis);
    let need = reach + MARGIN_CELLS * ax.spacing;
    let available = if grid.is_cylindrical() && axis == 0 {
        ax.spec.max
    } else {
        0.5 * ax.length()
    };
    if need > available {
        return Err(Error::Config(format!(
            "axis {axis}: {what} needs half-extent {need}, box provides {available}"
        )));
    }
    Ok(())
}

/// `s₀` for `|x| < R`, `0` for `|x| > R + 1`, linear in between.
pub fn plateau_test_function(radius: f64, s0: f64, grid: &Arc<Grid>) -> Result<RealField> {
    if !(radius > 0.0 && s0 > 0.0) {
        return Err(Error::Domain("plateau needs R > 0 and s0 > 0".into()));
    }
    for a in 0..grid.ndim() {
        check_extent(grid, a, radius + 1.0, "plateau support")?;
    }
    let dist = radial_distance(grid);
    Ok(RealField::from_fn(grid, |x| {
        s0 * (radius + 1.0 - dist(x)).clamp(0.0, 1.0)
    }))
}

/// Torus profile on a cylindrical grid: `s₀` within distance `λ/2` of the
/// circle `(r, x₃) = (λ, 0)`, zero beyond `λ/2 + 1`, linear in between.
pub fn torus_test_function(lambda: f64, s0: f64, grid: &Arc<Grid>) -> Result<RealField> {
    if !grid.is_cylindrical() {
        return Err(Error::Usage("torus test function needs a cylindrical grid".into()));
    }
    if !(lambda > 2.0 && s0 > 0.0) {
        return Err(Error::Domain("torus needs lambda > 2 and s0 > 0".into()));
    }
    check_extent(grid, 0, lambda + 0.5 * lambda + 1.0, "torus support")?;
    check_extent(grid, 1, 0.5 * lambda + 1.0, "torus support")?;
    let c3 = grid.center()[1];
    Ok(RealField::from_fn(grid, |x| {
        let rho = ((x[0] - lambda).powi(2) + (x[1] - c3).powi(2)).sqrt();
        s0 * (1.0 - (rho - 0.5 * lambda)).clamp(0.0, 1.0)
    }))
}

/// NKG test pair `(u, −iβu)`; `β` is the largest value with `½β²s₀² = W(s₀)`,
/// kept strictly below `m`.
pub fn nkg_test_pair(u: &RealField, beta: f64) -> NkgState {
    NkgState {
        psi: u.to_complex(),
        psi_hat: u.map(|v| Complex64::new(0.0, -beta * v)),
    }
}

pub fn nkg_beta(problem: &Problem, s0: f64) -> Result<f64> {
    let nl = problem.nonlinearity();
    let w = nl.w(s0);
    if w < 0.0 {
        return Err(Error::Domain(format!(
            "W(s0) = {w} < 0 at s0 = {s0}; choose s0 inside the positivity range"
        )));
    }
    let beta = (2.0 * w).sqrt() / s0;
    Ok(beta.min(nl.mass.abs() - 1e-9))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SweepParams {
    /// Radii `R` (plateau) or torus sizes `λ`; defaults when absent.
    #[serde(default)]
    pub parameters: Option<Vec<f64>>,
    #[serde(default = "default_s0")]
    pub s0: f64,
}

fn default_s0() -> f64 {
    1.0
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            parameters: None,
            s0: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    PlateauRadius,
    TorusSize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: f64,
    pub lambda: f64,
    /// `½ℓ²∫u²/r² / ∫u²`, vortex sweeps only.
    pub winding_term: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HylomorphyReport {
    pub lambda0_proxy: f64,
    pub lambda0_proxy_method: String,
    pub best_test_lambda: f64,
    pub best_parameter: f64,
    pub sweep_kind: SweepKind,
    pub sweep: Vec<SweepPoint>,
    pub verdict: bool,
    pub hypothesis: HypothesisReport,
    pub s0: f64,
    /// NKG only.
    pub beta: Option<f64>,
}

/// Default sweep values for the given grid and equation.
pub fn default_parameters(grid: &Grid, equation: Equation) -> Vec<f64> {
    match equation {
        Equation::NseVortex => vec![8.0, 16.0, 32.0],
        _ => {
            let cyl = grid.is_cylindrical();
            let half = grid
                .axes()
                .iter()
                .enumerate()
                .map(|(a, ax)| if cyl && a == 0 { ax.spec.max } else { 0.5 * ax.length() })
                .fold(f64::INFINITY, f64::min);
            [4.0, 8.0, 16.0, 32.0].iter().map(|k| k * half / 64.0).collect()
        }
    }
}

/// Sweeps the test family and compares the best `Λ` with the proxy.
pub fn hylomorphy_check(problem: &Problem, params: &SweepParams) -> Result<HylomorphyReport> {
    let grid = problem.grid();
    let spec = problem.spec();
    let hypothesis = check_hylomorphy_hypothesis(spec);
    let proxy = rayleigh_quotient_min(problem, &RayleighOptions::default())?.value;
    let parameters = params
        .parameters
        .clone()
        .unwrap_or_else(|| default_parameters(grid, spec.equation));
    if parameters.is_empty() {
        return Err(Error::Config("hylomorphy sweep needs at least one parameter".into()));
    }
    let s0 = params.s0;
    let beta = if spec.equation == Equation::Nkg {
        Some(nkg_beta(problem, s0)?)
    } else {
        None
    };
    let sweep_kind = if spec.equation == Equation::NseVortex {
        SweepKind::TorusSize
    } else {
        SweepKind::PlateauRadius
    };

    let mut sweep = Vec::with_capacity(parameters.len());
    for &param in &parameters {
        let u = match sweep_kind {
            SweepKind::TorusSize => torus_test_function(param, s0, grid)?,
            SweepKind::PlateauRadius => plateau_test_function(param, s0, grid)?,
        };
        let fv = match beta {
            Some(b) => evaluate_all(&nkg_test_pair(&u, b), problem)?,
            None => evaluate_all(&u, problem)?,
        };
        let lambda = fv
            .lambda
            .ok_or_else(|| Error::Numerical("test function charge below floor".into()))?;
        let winding_term = if spec.winding != 0 && grid.is_cylindrical() {
            let l2 = (spec.winding as f64).powi(2);
            let num = grid.integrate_by(|i| {
                let r = grid.radius(i).expect("cylindrical");
                0.5 * l2 * u.values()[i].powi(2) / (r * r)
            });
            Some(num / u.norm_sqr())
        } else {
            None
        };
        sweep.push(SweepPoint {
            parameter: param,
            lambda,
            winding_term,
        });
    }
    let best = sweep
        .iter()
        .min_by(|a, b| a.lambda.total_cmp(&b.lambda))
        .expect("nonempty sweep");
    Ok(HylomorphyReport {
        lambda0_proxy: proxy,
        lambda0_proxy_method: if spec.equation == Equation::Nkg {
            "mass m (lower bound of the small-amplitude limit)".into()
        } else {
            "minimum of the quadratic Rayleigh quotient at 0".into()
        },
        best_test_lambda: best.lambda,
        best_parameter: best.parameter,
        verdict: best.lambda < proxy,
        sweep_kind,
        sweep,
        hypothesis,
        s0,
        beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, AxisSpec, GridSpec};
    use crate::model::{Coercivity, ModelSpec, Nonlinearity, Potential};

    #[test]
    fn plateau_branches_and_mass() {
        let g = build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(-8.0, 8.0, 16384)])).unwrap();
        let u = plateau_test_function(2.0, 1.0, &g).unwrap();
        let at = |x: f64| {
            let j = ((x + 8.0) / g.axis(0).spacing).round() as usize;
            u.values()[j]
        };
        assert_eq!(at(1.0), 1.0);
        assert_eq!(at(4.0), 0.0);
        assert!((u.norm_sqr() - 2.0 * (2.0 + 1.0 / 3.0)).abs() <= 1e-6);
    }

    #[test]
    fn plateau_rejects_small_box() {
        let g = build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(-3.0, 3.0, 64)])).unwrap();
        assert!(matches!(plateau_test_function(2.5, 1.0, &g), Err(Error::Config(_))));
    }

    #[test]
    fn torus_branches_and_scaling() {
        let g = build_grid(GridSpec::cylindrical(52.0, 208, AxisSpec::dirichlet(-20.0, 20.0, 160))).unwrap();
        let u8 = torus_test_function(8.0, 1.0, &g).unwrap();
        let near = |r: f64, z: f64| {
            let i = (0..g.len())
                .min_by(|&a, &b| {
                    let da = (g.coords(a)[0] - r).hypot(g.coords(a)[1] - z);
                    let db = (g.coords(b)[0] - r).hypot(g.coords(b)[1] - z);
                    da.total_cmp(&db)
                })
                .unwrap();
            u8.values()[i]
        };
        assert_eq!(near(8.0, 0.0), 1.0);
        assert_eq!(near(8.0 + 4.0 + 1.5, 0.0), 0.0);
        let m8 = u8.norm_sqr();
        let m16 = torus_test_function(16.0, 1.0, &g).unwrap().norm_sqr();
        let m32 = torus_test_function(32.0, 1.0, &g).unwrap().norm_sqr();
        for ratio in [m16 / m8, m32 / m16] {
            assert!((ratio / 8.0 - 1.0).abs() <= 0.2, "ratio {ratio}");
        }
    }

    #[test]
    fn nse_sweep_matches_closed_form() {
        let g = build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(-20.0, 20.0, 5120)])).unwrap();
        let spec = ModelSpec::nse(2.0, 4.0, Potential::constant(1.0), Coercivity { a: 1.0, s: 3.0 }, 0.01);
        let p = Problem::new(spec, &g).unwrap();
        let rep = hylomorphy_check(&p, &SweepParams::default()).unwrap();
        assert!(rep.verdict);
        assert_eq!(rep.sweep.len(), 4);
        for pt in &rep.sweep {
            let r = pt.parameter;
            let exact = (r + 1.0 + 2.0 / 3.0 - 0.2) / (2.0 * r + 2.0 / 3.0);
            assert!((pt.lambda - exact).abs() < 1e-4, "R = {r}: {} vs {exact}", pt.lambda);
        }
        assert!(rep.sweep.windows(2).all(|w| w[1].lambda < w[0].lambda));
    }

    #[test]
    fn nkg_verdicts() {
        let g = build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(-20.0, 20.0, 1024)])).unwrap();
        let cubic = Problem::new(ModelSpec::nkg(Nonlinearity::nkg_power(1.0, 1.0, 4.0), 0.01), &g).unwrap();
        let rep = hylomorphy_check(&cubic, &SweepParams::default()).unwrap();
        assert!(rep.verdict);
        assert!((rep.beta.unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        let linear = Problem::new(ModelSpec::nkg(Nonlinearity::nkg_power(1.0, 0.0, 4.0), 0.01), &g).unwrap();
        let rep = hylomorphy_check(&linear, &SweepParams::default()).unwrap();
        assert!(!rep.verdict);
        assert!(!rep.hypothesis.holds);
    }
}
