//! Property suites checked by `hylomorph verify`: gradient consistency,
//! splitting defects, coercivity, the NKG small-amplitude bound, charge
//! homogeneity, conservation and reversibility.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{evolve_and_monitor, reversibility_defect, Evolvable, EvolveOptions, GammaParams};
use crate::functionals::{
    evaluate_all, functional_value, nkg_sharp_norm, nkg_small_amplitude_bound, splitting_defect, ModelState, Problem,
    Which,
};
use crate::grid::{ComplexField, Grid, NkgState, RealField};
use crate::model::{coercivity_constants, Equation};
use crate::sampling::{band_limited, band_limited_complex, localized};

/// One checked property: `passed` compares `value` with `bound` in the
/// direction stated by `comparison`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Property {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub comparison: Comparison,
    pub passed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// `value ≤ bound`.
    AtMost,
    /// `value ≥ bound`.
    AtLeast,
    /// `|value − bound| ≤ 1e−12`.
    Equals,
}

impl Property {
    pub fn new(name: impl Into<String>, value: f64, bound: f64, comparison: Comparison) -> Self {
        let passed = match comparison {
            Comparison::AtMost => value <= bound,
            Comparison::AtLeast => value >= bound,
            Comparison::Equals => (value - bound).abs() <= 1e-12,
        };
        Self {
            name: name.into(),
            value,
            bound,
            comparison,
            passed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub properties: Vec<Property>,
    pub all_passed: bool,
}

impl VerifyReport {
    pub fn new(properties: Vec<Property>) -> Self {
        let all_passed = properties.iter().all(|p| p.passed);
        Self { properties, all_passed }
    }
}

pub const GRADIENT_TOL: f64 = 1e-6;
pub const SPLIT_TOL: f64 = 1e-12;
pub const COERCIVITY_TOL: f64 = 1e-9;
pub const HOMOGENEITY_TOL: f64 = 1e-12;
pub const REVERSIBILITY_TOL: f64 = 1e-10;
pub const REVERSIBILITY_STEPS: usize = 1000;
pub const NKG_EPSILONS: [f64; 3] = [0.3, 0.1, 0.03];

/// States the suites can synthesize.
pub trait Probe: ModelState {
    /// Lifts a real profile (NKG: the standing-wave pair at `ω = m/2`).
    fn from_profile(u: &RealField, p: &Problem) -> Self;
    /// Random direction of unit norm.
    fn random_direction(grid: &Arc<Grid>, modes: usize, rng: &mut impl Rng) -> Self;
}

impl Probe for RealField {
    fn from_profile(u: &RealField, _p: &Problem) -> Self {
        u.clone()
    }
    fn random_direction(grid: &Arc<Grid>, modes: usize, rng: &mut impl Rng) -> Self {
        band_limited(grid, modes, rng)
    }
}

impl Probe for NkgState {
    fn from_profile(u: &RealField, p: &Problem) -> Self {
        NkgState::standing_wave(u, 0.5 * p.spec().mass())
    }
    fn random_direction(grid: &Arc<Grid>, modes: usize, rng: &mut impl Rng) -> Self {
        let psi = band_limited_complex(grid, modes, rng);
        let psi_hat = band_limited_complex(grid, modes, rng);
        let mut s = NkgState { psi, psi_hat };
        let n = crate::state::StateVector::norm(&s);
        crate::state::StateVector::scale(&mut s, 1.0 / n);
        s
    }
}

/// Central finite difference of `F` along `v` against `⟨F′(u), v⟩`,
/// normalized by `‖F′(u)‖·‖v‖`.
pub fn gradient_fd_error<S: ModelState>(u: &S, v: &S, p: &Problem, which: Which) -> Result<f64> {
    let g = crate::functionals::first_variation(u, p, which)?.gradient;
    let scale = u.norm().max(1e-300) / v.norm().max(1e-300);
    let mut v = v.clone();
    v.scale(scale);
    let analytic = g.dot(&v);
    let h = 1e-4;
    let at = |t: f64| -> Result<f64> {
        let mut w = u.clone();
        w.axpy(t, &v);
        functional_value(&w, p, which)
    };
    // fourth-order stencil keeps the truncation error below the tolerance
    let fd = (-at(2.0 * h)? + 8.0 * at(h)? - 8.0 * at(-h)? + at(-2.0 * h)?) / (12.0 * h);
    let denom = g.norm() * v.norm();
    Ok(if denom > 0.0 {
        (fd - analytic).abs() / denom
    } else {
        (fd - analytic).abs()
    })
}

/// Smooth compact bump `cos²(πρ/2)`, `ρ = |x − x₀|/radius < 1`, about a
/// point displaced by `offset` along the last axis from the box centre
/// (the axis on cylindrical grids).
pub fn compact_bump(grid: &Arc<Grid>, offset: f64, radius: f64) -> RealField {
    let origin = bump_origin(grid, offset);
    RealField::from_fn(grid, |x| {
        let rho = dist(x, &origin) / radius;
        if rho < 1.0 {
            (0.5 * std::f64::consts::PI * rho).cos().powi(2)
        } else {
            0.0
        }
    })
}

/// `sech(|x − x₀|)` about the same displaced point as [`compact_bump`].
pub fn sech_bump(grid: &Arc<Grid>, offset: f64) -> RealField {
    let origin = bump_origin(grid, offset);
    RealField::from_fn(grid, |x| 1.0 / dist(x, &origin).cosh())
}

fn bump_origin(grid: &Grid, offset: f64) -> Vec<f64> {
    let mut c = grid.center();
    if grid.is_cylindrical() {
        c[0] = 0.0;
    }
    let last = c.len() - 1;
    c[last] += offset;
    c
}

fn dist(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Separations for the decreasing-defect check: `{4, 8, 16}` when the last
/// axis is long enough for the periodic image to stay farther away, scaled
/// to the box otherwise.
pub fn splitting_separations(grid: &Grid) -> [f64; 3] {
    let len = grid.axis(grid.ndim() - 1).length();
    if len >= 40.0 {
        [4.0, 8.0, 16.0]
    } else {
        [0.1 * len, 0.2 * len, 0.4 * len]
    }
}

pub fn splitting_properties<S: Probe>(p: &Problem) -> Result<Vec<Property>> {
    let grid = p.grid();
    let mut out = Vec::new();
    let seps = splitting_separations(grid);
    let radius = 0.25 * seps[1];
    let u = S::from_profile(&compact_bump(grid, -0.5 * seps[1], radius), p);
    let w = S::from_profile(&compact_bump(grid, 0.5 * seps[1], radius), p);
    for (which, label) in [(Which::E, "E"), (Which::C, "C")] {
        let d = splitting_defect(p, which, &u, &w)?;
        let scale = functional_value(&u, p, which)?.abs() + functional_value(&w, p, which)?.abs() + 1.0;
        out.push(Property::new(
            format!("splitting-defect-disjoint-{label}"),
            d / scale,
            SPLIT_TOL,
            Comparison::AtMost,
        ));
        let defects = seps
            .iter()
            .map(|&d| {
                let a = S::from_profile(&sech_bump(grid, -0.5 * d), p);
                let b = S::from_profile(&sech_bump(grid, 0.5 * d), p);
                splitting_defect(p, which, &a, &b)
            })
            .collect::<Result<Vec<_>>>()?;
        // worst ratio between consecutive separations; < 1 means decreasing
        let ratio = defects
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { f64::INFINITY })
            .fold(0.0, f64::max);
        out.push(Property {
            passed: ratio < 1.0,
            ..Property::new(
                format!("splitting-defect-decreasing-{label}"),
                ratio,
                1.0,
                Comparison::AtMost,
            )
        });
    }
    Ok(out)
}

pub fn gradient_properties<S: Probe>(p: &Problem, rng: &mut impl Rng) -> Result<Vec<Property>> {
    let grid = p.grid();
    let width = 0.15 * min_half_extent(grid);
    let mut base = localized(grid, 4, width, rng);
    base.scale(1.0 / base.max_abs().max(1e-300));
    let mut u = S::from_profile(&base, p);
    let mut extra = S::random_direction(grid, 4, rng);
    extra.scale(0.1 * u.norm());
    u.axpy(1.0, &extra);
    let v = S::random_direction(grid, 6, rng);
    let mut out = Vec::new();
    for (which, label) in [(Which::E, "E"), (Which::C, "C"), (Which::JDelta, "J-delta")] {
        out.push(Property::new(
            format!("gradient-vs-finite-difference-{label}"),
            gradient_fd_error(&u, &v, p, which)?,
            GRADIENT_TOL,
            Comparison::AtMost,
        ));
    }
    Ok(out)
}

fn min_half_extent(grid: &Grid) -> f64 {
    grid.axes()
        .iter()
        .enumerate()
        .map(|(a, ax)| {
            if grid.is_cylindrical() && a == 0 {
                ax.spec.max
            } else {
                0.5 * ax.length()
            }
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn homogeneity_property<S: Probe>(p: &Problem, rng: &mut impl Rng) -> Result<Property> {
    let u = S::random_direction(p.grid(), 5, rng);
    let c1 = functional_value(&u, p, Which::C)?;
    let mut worst: f64 = 0.0;
    for t in [0.5, 2.0, 3.0] {
        let mut tu = u.clone();
        tu.scale(t);
        let ct = functional_value(&tu, p, Which::C)?;
        worst = worst.max((ct - t * t * c1).abs() / (t * t * c1).abs().max(1e-300));
    }
    Ok(Property::new(
        "charge-homogeneity",
        worst,
        HOMOGENEITY_TOL,
        Comparison::AtMost,
    ))
}

/// `E + aC^s` and `J_δ − (δ/2)Φ + M` over random fields with `L²` norms
/// log-uniform in `[1e−2, 1e2]`. NSE only.
pub fn coercivity_properties(p: &Problem, samples: usize, rng: &mut impl Rng) -> Result<Vec<Property>> {
    if !p.equation().is_nse() {
        return Err(Error::Usage("coercivity sampling applies to NSE models".into()));
    }
    let k = p.spec().coercivity;
    let delta = p.spec().delta;
    let m = coercivity_offset(k.a, k.s, delta);
    let mut worst_sum = f64::INFINITY;
    let mut worst_bound = f64::INFINITY;
    for _ in 0..samples {
        let amp = 10f64.powf(rng.gen_range(-2.0..2.0));
        let modes = rng.gen_range(2..=8);
        let mut u = band_limited(p.grid(), modes, rng);
        u.scale(amp);
        let fv = evaluate_all(&u, p)?;
        let c = fv.charge.abs();
        worst_sum = worst_sum.min(fv.energy + k.a * c.powf(k.s));
        if let Some(j) = fv.j_delta {
            let phi = fv.phi;
            let slack = j - 0.5 * delta * phi + m;
            let scale = j.abs() + 0.5 * delta * phi.abs() + m + 1.0;
            worst_bound = worst_bound.min(slack / scale);
        }
    }
    Ok(vec![
        Property::new("coercivity-sampling", worst_sum, -COERCIVITY_TOL, Comparison::AtLeast),
        Property::new("coercivity-bound", worst_bound, -COERCIVITY_TOL, Comparison::AtLeast),
    ])
}

/// `M = −a·min_{t>0}((δ/2)t^s − t^{s−1})`, attained at `t = 2(s−1)/(δs)`.
pub fn coercivity_offset(a: f64, s: f64, delta: f64) -> f64 {
    let t = 2.0 * (s - 1.0) / (delta * s);
    -a * (0.5 * delta * t.powf(s) - t.powf(s - 1.0))
}

/// `min Λ(εψ, ψ̂) − m√(1 − 2ε^{s−2})` over random `ψ` with `‖ψ‖♯ = 1`,
/// taking for each `ψ` the `ψ̂ = −iβεψ` that minimizes `Λ`. NKG only.
pub fn nkg_bound_property(p: &Problem, samples: usize, rng: &mut impl Rng) -> Result<Property> {
    if p.equation() != Equation::Nkg {
        return Err(Error::Usage("the small-amplitude bound applies to NKG models".into()));
    }
    let nl = p.nonlinearity();
    let grid = p.grid();
    let mut worst = f64::INFINITY;
    for k in 0..samples {
        let modes = 2 + k % 7;
        let mut psi = if k % 2 == 0 {
            band_limited_complex(grid, modes, rng)
        } else {
            let re = localized(grid, modes, 0.2 * min_half_extent(grid), rng);
            re.to_complex()
        };
        psi.scale(1.0 / nkg_sharp_norm(&psi, nl));
        for eps in NKG_EPSILONS {
            let lam = optimal_lambda(&psi.scaled(eps), p)?;
            worst = worst.min(lam - nkg_small_amplitude_bound(nl, eps));
        }
    }
    Ok(Property::new(
        "nkg-small-amplitude-bound",
        worst,
        -COERCIVITY_TOL,
        Comparison::AtLeast,
    ))
}

/// `Λ` at `(ψ, −iβψ)` with the minimizing `β = √(2A)/‖ψ‖`, where `A` is the
/// energy of `(ψ, 0)`.
fn optimal_lambda(psi: &ComplexField, p: &Problem) -> Result<f64> {
    let still = NkgState {
        psi: psi.clone(),
        psi_hat: ComplexField::zeros(psi.grid()),
    };
    let a = still.raw_energy(p);
    if a <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let beta = (2.0 * a).sqrt() / psi.norm();
    let pair = NkgState {
        psi: psi.clone(),
        psi_hat: psi.map(|z| z * Complex64::new(0.0, -beta)),
    };
    evaluate_all(&pair, p)?
        .lambda
        .ok_or_else(|| Error::Numerical("sample charge below floor".into()))
}

/// `coercivity_constants` exponents at the reference pairs `(N, p)`.
pub fn coercivity_exponent_properties() -> Result<Vec<Property>> {
    [(3usize, 3.0, 3.0), (1, 4.0, 3.0), (2, 3.0, 2.0)]
        .iter()
        .map(|&(n, pe, want)| {
            let k = coercivity_constants(n, pe, 1.0, 1.0)?;
            Ok(Property::new(
                format!("coercivity-constants-s-N{n}-p{pe}"),
                k.s,
                want,
                Comparison::Equals,
            ))
        })
        .collect()
}

/// Energy and charge drift per 10 time units along a monitored run, and
/// the forward-backward defect over [`REVERSIBILITY_STEPS`] steps.
pub fn dynamics_properties<S: Evolvable>(u0: &S, p: &Problem, opts: &EvolveOptions) -> Result<Vec<Property>> {
    let gamma = GammaParams::from_reference(u0.clone(), p)?;
    let rep = evolve_and_monitor(u0, p, &gamma, opts)?;
    if rep.diverged {
        return Err(Error::Numerical("verification run diverged".into()));
    }
    let periods = (opts.t_final / 10.0).ceil().max(1.0);
    let symbol = opts.symbol;
    let rev = reversibility_defect(u0, p, rep.dt, REVERSIBILITY_STEPS, symbol)?;
    Ok(vec![
        Property::new(
            "energy-drift-per-10",
            rep.max_energy_drift / periods,
            1e-6,
            Comparison::AtMost,
        ),
        Property::new(
            "charge-drift-per-10",
            rep.max_charge_drift / periods,
            1e-6,
            Comparison::AtMost,
        ),
        Property::new("reversibility-defect", rev, REVERSIBILITY_TOL, Comparison::AtMost),
    ])
}

/// Model-independent and static suites for an NSE problem.
pub fn nse_static_suite(p: &Problem, samples: usize, rng: &mut impl Rng) -> Result<Vec<Property>> {
    let mut out = gradient_properties::<RealField>(p, rng)?;
    out.extend(splitting_properties::<RealField>(p)?);
    out.push(homogeneity_property::<RealField>(p, rng)?);
    out.extend(coercivity_properties(p, samples, rng)?);
    out.extend(coercivity_exponent_properties()?);
    Ok(out)
}

/// Static suites for an NKG problem.
pub fn nkg_static_suite(p: &Problem, samples: usize, rng: &mut impl Rng) -> Result<Vec<Property>> {
    let mut out = gradient_properties::<NkgState>(p, rng)?;
    out.extend(splitting_properties::<NkgState>(p)?);
    out.push(homogeneity_property::<NkgState>(p, rng)?);
    out.push(nkg_bound_property(p, samples.div_ceil(50).max(4), rng)?);
    out.extend(coercivity_exponent_properties()?);
    Ok(out)
}
