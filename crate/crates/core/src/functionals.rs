//! Energy, charge and the derived functionals `Λ = E/|C|`,
//! `Φ = E + 2a|C|^s` and `J_δ = Λ + δΦ`, with their gradients.
//!
//! Gradients are taken with respect to the quadrature inner product, so
//! `F(u + εv) = F(u) + ε⟨F′(u), v⟩ + O(ε²)` holds for the discrete
//! functionals exactly, not only in the continuum limit.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, NkgState, RealField};
use crate::model::{Equation, ModelSpec, Nonlinearity};
use crate::state::StateVector;

/// Charge floor relative to the grid volume.
pub const CHARGE_FLOOR_FACTOR: f64 = 1e-10;

/// A validated model bound to the grid it is discretized on.
#[derive(Clone, Debug)]
pub struct Problem {
    spec: ModelSpec,
    grid: Arc<Grid>,
    veff: RealField,
    charge_floor: f64,
}

impl Problem {
    pub fn new(spec: ModelSpec, grid: &Arc<Grid>) -> Result<Self> {
        spec.validate(grid)?;
        let veff = spec.effective_potential(grid)?;
        Ok(Self {
            charge_floor: CHARGE_FLOOR_FACTOR * grid.volume(),
            spec,
            grid: grid.clone(),
            veff,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn equation(&self) -> Equation {
        self.spec.equation
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.spec.nonlinearity
    }

    /// `V + ℓ²/(2r²)` sampled on the grid (zero for NKG).
    pub fn veff(&self) -> &RealField {
        &self.veff
    }

    pub fn charge_floor(&self) -> f64 {
        self.charge_floor
    }

    /// Same model with a different regularizer.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.delta = delta;
        Problem::new(spec, &self.grid)
    }
}

/// State types the functionals are defined on.
pub trait ModelState: StateVector {
    /// Name used in mismatch errors.
    const LABEL: &'static str;

    fn accepts(eq: Equation) -> bool;

    fn raw_energy(&self, p: &Problem) -> f64;
    fn raw_charge(&self, p: &Problem) -> f64;
    fn raw_energy_gradient(&self, p: &Problem) -> Self;
    fn raw_charge_gradient(&self, p: &Problem) -> Self;

    /// Converts the least-squares multiplier `λ*` in `E′ ≈ λ*C′` into the
    /// frequency `ω` of the standing wave.
    fn omega_from_multiplier(lambda: f64) -> f64;

    fn check(&self, p: &Problem) -> Result<()> {
        if !Self::accepts(p.equation()) {
            return Err(Error::Usage(format!(
                "a {} state does not match equation {:?}",
                Self::LABEL,
                p.equation()
            )));
        }
        if !self.grid().as_ref().eq(p.grid().as_ref()) {
            return Err(Error::Usage("state and model live on different grids".into()));
        }
        Ok(())
    }
}

fn nse_energy_density(p: &Problem, i: usize, s: f64, abs2: f64) -> f64 {
    p.veff.values()[i] * abs2 + p.spec.nonlinearity.w(s)
}

impl ModelState for RealField {
    const LABEL: &'static str = "real";

    fn accepts(eq: Equation) -> bool {
        eq.is_nse()
    }

    fn raw_energy(&self, p: &Problem) -> f64 {
        let u = self.values();
        let pot = p.grid.integrate_by(|i| nse_energy_density(p, i, u[i], u[i] * u[i]));
        0.5 * self.dirichlet_energy() + pot
    }

    fn raw_charge(&self, _p: &Problem) -> f64 {
        self.norm_sqr()
    }

    fn raw_energy_gradient(&self, p: &Problem) -> Self {
        let mut g = self.laplacian();
        let nl = &p.spec.nonlinearity;
        let v = p.veff.values();
        for ((gi, &ui), &vi) in g.values_mut().iter_mut().zip(self.values()).zip(v) {
            *gi = -*gi + 2.0 * vi * ui + nl.w_prime(ui);
        }
        g
    }

    fn raw_charge_gradient(&self, _p: &Problem) -> Self {
        self.scaled(2.0)
    }

    fn omega_from_multiplier(lambda: f64) -> f64 {
        lambda
    }
}

impl ModelState for ComplexField {
    const LABEL: &'static str = "complex";

    fn accepts(eq: Equation) -> bool {
        eq.is_nse()
    }

    fn raw_energy(&self, p: &Problem) -> f64 {
        let u = self.values();
        let pot = p
            .grid
            .integrate_by(|i| nse_energy_density(p, i, u[i].norm(), u[i].norm_sqr()));
        0.5 * self.dirichlet_energy() + pot
    }

    fn raw_charge(&self, _p: &Problem) -> f64 {
        self.norm_sqr()
    }

    fn raw_energy_gradient(&self, p: &Problem) -> Self {
        let mut g = self.laplacian();
        let nl = &p.spec.nonlinearity;
        let v = p.veff.values();
        for ((gi, &ui), &vi) in g.values_mut().iter_mut().zip(self.values()).zip(v) {
            *gi = -*gi + ui * (2.0 * vi + nl.w_prime_over_s(ui.norm()));
        }
        g
    }

    fn raw_charge_gradient(&self, _p: &Problem) -> Self {
        self.scaled(2.0)
    }

    fn omega_from_multiplier(lambda: f64) -> f64 {
        lambda
    }
}

impl ModelState for NkgState {
    const LABEL: &'static str = "nkg";

    fn accepts(eq: Equation) -> bool {
        eq == Equation::Nkg
    }

    fn raw_energy(&self, p: &Problem) -> f64 {
        let nl = &p.spec.nonlinearity;
        let (psi, hat) = (self.psi.values(), self.psi_hat.values());
        let local = p.grid.integrate_by(|i| 0.5 * hat[i].norm_sqr() + nl.w(psi[i].norm()));
        0.5 * self.psi.dirichlet_energy() + local
    }

    /// `−Re ∫ iψ̂ψ̄`.
    fn raw_charge(&self, p: &Problem) -> f64 {
        let (psi, hat) = (self.psi.values(), self.psi_hat.values());
        p.grid.integrate_by(|i| -(Complex64::i() * hat[i] * psi[i].conj()).re)
    }

    fn raw_energy_gradient(&self, p: &Problem) -> Self {
        let nl = &p.spec.nonlinearity;
        let mut g = self.psi.laplacian();
        for (gi, &ui) in g.values_mut().iter_mut().zip(self.psi.values()) {
            *gi = -*gi + ui * nl.w_prime_over_s(ui.norm());
        }
        NkgState {
            psi: g,
            psi_hat: self.psi_hat.clone(),
        }
    }

    /// `(−iψ̂, iψ)`.
    fn raw_charge_gradient(&self, _p: &Problem) -> Self {
        let i = Complex64::i();
        NkgState {
            psi: self.psi_hat.map(|z| -i * z),
            psi_hat: self.psi.map(|z| i * z),
        }
    }

    /// The standing wave `ψ̂ = −iωψ` satisfies `E′ = −ωC′`.
    fn omega_from_multiplier(lambda: f64) -> f64 {
        -lambda
    }
}

pub fn energy<S: ModelState>(state: &S, p: &Problem) -> Result<f64> {
    state.check(p)?;
    Ok(state.raw_energy(p))
}

pub fn charge<S: ModelState>(state: &S, p: &Problem) -> Result<f64> {
    state.check(p)?;
    Ok(state.raw_charge(p))
}

/// `E, C, Λ, Φ, J_δ` at one state; `Λ` and `J_δ` are absent below the charge floor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub energy: f64,
    pub charge: f64,
    pub lambda: Option<f64>,
    pub phi: f64,
    pub j_delta: Option<f64>,
}

impl FunctionalValue {
    fn from_ec(e: f64, c: f64, p: &Problem) -> Self {
        let k = p.spec.coercivity;
        let phi = e + 2.0 * k.a * c.abs().powf(k.s);
        let (lambda, j_delta) = if c.abs() >= p.charge_floor {
            let l = e / c.abs();
            (Some(l), Some(l + p.spec.delta * phi))
        } else {
            (None, None)
        };
        Self {
            energy: e,
            charge: c,
            lambda,
            phi,
            j_delta,
        }
    }
}

pub fn evaluate_all<S: ModelState>(state: &S, p: &Problem) -> Result<FunctionalValue> {
    state.check(p)?;
    Ok(FunctionalValue::from_ec(state.raw_energy(p), state.raw_charge(p), p))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    E,
    C,
    JDelta,
}

#[derive(Clone, Debug)]
pub struct VariationReport<S> {
    pub gradient: S,
    pub norm: f64,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Value and gradient of `J_δ`.
pub(crate) fn j_delta_with_gradient<S: ModelState>(state: &S, p: &Problem) -> Result<(FunctionalValue, S)> {
    let e = state.raw_energy(p);
    let c = state.raw_charge(p);
    let fv = FunctionalValue::from_ec(e, c, p);
    if fv.j_delta.is_none() {
        return Err(Error::Domain(format!(
            "|C| = {:e} is below the charge floor {:e}",
            c.abs(),
            p.charge_floor
        )));
    }
    let ge = state.raw_energy_gradient(p);
    let gc = state.raw_charge_gradient(p);
    let ac = c.abs();
    let sc = sign(c);
    let k = p.spec.coercivity;
    let delta = p.spec.delta;
    let mut g = ge.clone();
    g.scale(1.0 / ac + delta);
    let coef_c = -e * sc / (c * c) + delta * 2.0 * k.a * k.s * ac.powf(k.s - 1.0) * sc;
    g.axpy(coef_c, &gc);
    Ok((fv, g))
}

pub fn first_variation<S: ModelState>(state: &S, p: &Problem, which: Which) -> Result<VariationReport<S>> {
    state.check(p)?;
    let gradient = match which {
        Which::E => state.raw_energy_gradient(p),
        Which::C => state.raw_charge_gradient(p),
        Which::JDelta => j_delta_with_gradient(state, p)?.1,
    };
    let norm = gradient.norm();
    Ok(VariationReport { gradient, norm })
}

/// Value of the selected functional.
pub fn functional_value<S: ModelState>(state: &S, p: &Problem, which: Which) -> Result<f64> {
    state.check(p)?;
    match which {
        Which::E => Ok(state.raw_energy(p)),
        Which::C => Ok(state.raw_charge(p)),
        Which::JDelta => evaluate_all(state, p)?
            .j_delta
            .ok_or_else(|| Error::Domain("charge below floor".into())),
    }
}

/// `|F(u+w) − F(u) − F(w)|`.
pub fn splitting_defect<S: ModelState>(p: &Problem, which: Which, u: &S, w: &S) -> Result<f64> {
    if which == Which::JDelta {
        return Err(Error::Usage("the splitting defect is defined for E and C".into()));
    }
    let mut sum = u.clone();
    sum.axpy(1.0, w);
    let f = |s: &S| functional_value(s, p, which);
    Ok((f(&sum)? - f(u)? - f(w)?).abs())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RayleighOptions {
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for RayleighOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RayleighResult {
    pub value: f64,
    pub iterations: usize,
    /// `‖Au − λu‖/‖u‖` at the returned vector.
    pub residual: f64,
    #[serde(skip)]
    pub eigenvector: Option<RealField>,
}

/// `A u = −½Δu + V_eff u`.
fn quadratic_operator(p: &Problem, u: &RealField) -> RealField {
    let mut out = u.laplacian();
    for ((o, &ui), &vi) in out.values_mut().iter_mut().zip(u.values()).zip(p.veff.values()) {
        *o = -0.5 * *o + vi * ui;
    }
    out
}

/// Conjugate gradients for `(A − σ)x = b`, symmetric in the quadrature product.
fn shifted_cg(p: &Problem, sigma: f64, b: &RealField, x0: &RealField, rtol: f64, max_iter: usize) -> Result<RealField> {
    let apply = |v: &RealField| {
        let mut out = quadratic_operator(p, v);
        out.axpy(-sigma, v);
        out
    };
    let mut x = x0.clone();
    let mut r = b.sub(&apply(&x));
    let mut d = r.clone();
    let mut rr = r.dot(&r);
    let target = rtol * rtol * b.dot(b);
    for _ in 0..max_iter {
        if rr <= target {
            return Ok(x);
        }
        let ad = apply(&d);
        let dad = d.dot(&ad);
        if !(dad > 0.0) {
            return Err(Error::Numerical("shifted operator is not positive definite".into()));
        }
        let alpha = rr / dad;
        x.axpy(alpha, &d);
        r.axpy(-alpha, &ad);
        let rr_new = r.dot(&r);
        d.scale(rr_new / rr);
        d.axpy(1.0, &r);
        rr = rr_new;
    }
    if rr <= 1e2 * target {
        Ok(x)
    } else {
        Err(Error::Numerical(format!(
            "inner CG did not converge: relative residual {:e}",
            (rr / b.dot(b)).sqrt()
        )))
    }
}

/// Minimum of `(½∫|∇u|² + ∫V_eff u²)/∫u²` (NSE kinds) or `m` (NKG).
pub fn rayleigh_quotient_min(p: &Problem, opts: &RayleighOptions) -> Result<RayleighResult> {
    if p.equation() == Equation::Nkg {
        return Ok(RayleighResult {
            value: p.spec.mass().abs(),
            iterations: 0,
            residual: 0.0,
            eigenvector: None,
        });
    }
    let vmin = p.veff.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let eta = 1e-2 * vmin.abs().max(1.0);
    let sigma = vmin - eta;
    let mut u = RealField::from_fn(&p.grid, |_| 1.0);
    u.scale(1.0 / u.norm());
    let rq = |u: &RealField| u.dot(&quadratic_operator(p, u)) / u.dot(u);
    let mut rho = rq(&u);
    let max_inner = 20 * p.grid.len() + 100;
    for it in 1..=opts.max_iters {
        let x = shifted_cg(p, sigma, &u, &u.scaled(1.0 / (rho - sigma).max(eta)), 1e-12, max_inner)?;
        u = x.scaled(1.0 / x.norm());
        let rho_new = rq(&u);
        let change = (rho_new - rho).abs();
        rho = rho_new;
        if change <= 0.1 * opts.tolerance * rho.abs().max(1e-300) {
            let mut res = quadratic_operator(p, &u);
            res.axpy(-rho, &u);
            return Ok(RayleighResult {
                value: rho,
                iterations: it,
                residual: res.norm(),
                eigenvector: Some(u),
            });
        }
    }
    Err(Error::Numerical(format!(
        "inverse iteration did not converge in {} iterations (last estimate {rho})",
        opts.max_iters
    )))
}

/// Exponent `s ∈ (2, min(r, q))` used in the NKG small-amplitude bound.
pub fn nkg_bound_exponent(nl: &Nonlinearity) -> f64 {
    let mut lo = nl.exponent;
    if nl.stabilizer_coefficient != 0.0 {
        lo = lo.min(nl.stabilizer_exponent);
    }
    0.5 * (2.0 + lo)
}

/// `max(‖ψ‖_r, ‖ψ‖_q)` for the growth exponents of the nonlinearity.
pub fn nkg_sharp_norm(psi: &ComplexField, nl: &Nonlinearity) -> f64 {
    let lp = |e: f64| psi.integrate_with(|z| z.norm().powf(e)).powf(1.0 / e);
    let mut v = lp(nl.exponent);
    if nl.stabilizer_coefficient != 0.0 {
        v = v.max(lp(nl.stabilizer_exponent));
    }
    v
}

/// `m·√(1 − 2ε^{s−2})`.
pub fn nkg_small_amplitude_bound(nl: &Nonlinearity, eps: f64) -> f64 {
    let s = nkg_bound_exponent(nl);
    nl.mass.abs() * (1.0 - 2.0 * eps.powf(s - 2.0)).max(0.0).sqrt()
}

/// Least-squares multiplier and relative Euler–Lagrange residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    /// `λ* = ⟨E′, C′⟩ / ⟨C′, C′⟩`.
    pub lambda_star: f64,
    pub omega: f64,
    /// `‖E′ − λ*C′‖ / ‖E′‖`.
    pub el_residual: f64,
}

pub fn multiplier<S: ModelState>(state: &S, p: &Problem) -> Result<Multiplier> {
    state.check(p)?;
    let gc = state.raw_charge_gradient(p);
    let cc = gc.dot(&gc);
    if !(cc > 0.0) {
        return Err(Error::Domain("multiplier of the zero state is undefined".into()));
    }
    let ge = state.raw_energy_gradient(p);
    let lambda = ge.dot(&gc) / cc;
    let mut r = ge.clone();
    r.axpy(-lambda, &gc);
    let en = ge.norm();
    let el_residual = if en > 0.0 { r.norm() / en } else { 0.0 };
    Ok(Multiplier {
        lambda_star: lambda,
        omega: S::omega_from_multiplier(lambda),
        el_residual,
    })
}

/// Relative residual of `−Δψ + W′(ψ) = ω²ψ` for an NKG state.
pub fn nkg_profile_residual(state: &NkgState, p: &Problem, omega: f64) -> Result<f64> {
    state.check(p)?;
    let g = state.raw_energy_gradient(p).psi;
    let mut r = g.clone();
    r.axpy(-omega * omega, &state.psi);
    Ok(r.norm() / g.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, AxisSpec, GridSpec};
    use crate::model::{Coercivity, Potential};

    fn line(min: f64, max: f64, n: usize) -> Arc<Grid> {
        build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(min, max, n)])).unwrap()
    }

    fn nse_cubic(delta: f64) -> ModelSpec {
        ModelSpec::nse(2.0, 4.0, Potential::constant(1.0), Coercivity { a: 1.0, s: 3.0 }, delta)
    }

    fn nkg_cubic() -> ModelSpec {
        ModelSpec::nkg(Nonlinearity::nkg_power(1.0, 1.0, 4.0), 0.01)
    }

    #[test]
    fn zero_state() {
        let g = line(-10.0, 10.0, 256);
        let p = Problem::new(nse_cubic(0.01), &g).unwrap();
        let z = RealField::zeros(&g);
        assert_eq!(energy(&z, &p).unwrap(), 0.0);
        assert_eq!(charge(&z, &p).unwrap(), 0.0);
        let fv = evaluate_all(&z, &p).unwrap();
        assert!(fv.lambda.is_none() && fv.j_delta.is_none());
        assert_eq!(first_variation(&z, &p, Which::E).unwrap().norm, 0.0);
        assert!(first_variation(&z, &p, Which::JDelta).is_err());
    }

    #[test]
    fn sech_energy_and_phi() {
        let g = line(-20.0, 20.0, 2048);
        let p = Problem::new(nse_cubic(0.01), &g).unwrap();
        let u = RealField::from_fn(&g, |x| 1.0 / x[0].cosh());
        let fv = evaluate_all(&u, &p).unwrap();
        assert!((fv.energy - 5.0 / 3.0).abs() <= 1e-4, "E = {}", fv.energy);
        assert!((fv.charge - 2.0).abs() <= 1e-8);
        assert!((fv.phi - (5.0 / 3.0 + 16.0)).abs() <= 1e-3);
        let cp = first_variation(&u, &p, Which::C).unwrap().gradient;
        assert_eq!(cp.values(), u.scaled(2.0).values());
    }

    #[test]
    fn charge_is_homogeneous() {
        let g = line(-20.0, 20.0, 512);
        let p = Problem::new(nse_cubic(0.01), &g).unwrap();
        let u = RealField::from_fn(&g, |x| (-x[0] * x[0]).exp() * (1.0 + 0.3 * x[0]));
        let c = charge(&u, &p).unwrap();
        for t in [0.5, 2.0, 3.0] {
            let ct = charge(&u.scaled(t), &p).unwrap();
            assert!((ct - t * t * c).abs() <= 1e-14 * ct);
        }
    }

    #[test]
    fn nkg_constant_state() {
        let g = line(0.0, 1.0, 16);
        let spec = ModelSpec::nkg(Nonlinearity::nkg_power(1.5, 0.0, 4.0), 0.01);
        let p = Problem::new(spec, &g).unwrap();
        let c0 = 0.7;
        let u = RealField::from_fn(&g, |_| c0);
        let s = NkgState::standing_wave(&u, 1.5);
        let fv = evaluate_all(&s, &p).unwrap();
        assert!((fv.energy - 2.25 * c0 * c0).abs() < 1e-14);
        assert!((fv.charge + 1.5 * c0 * c0).abs() < 1e-14);
        assert!((fv.lambda.unwrap() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn nkg_sech_family() {
        let g = line(-40.0, 40.0, 4096);
        let p = Problem::new(nkg_cubic(), &g).unwrap();
        let u = RealField::from_fn(&g, |x| 0.72f64.sqrt() / (0.6 * x[0]).cosh());
        let s = NkgState::standing_wave(&u, 0.8);
        let fv = evaluate_all(&s, &p).unwrap();
        assert!((fv.energy - 1.824).abs() <= 1e-3, "E = {}", fv.energy);
        assert!((fv.charge + 1.92).abs() <= 1e-3);
        assert!((fv.lambda.unwrap() - 0.95).abs() <= 1e-3);
        let m = multiplier(&s, &p).unwrap();
        assert!((m.omega - 0.8).abs() <= 1e-4, "omega = {}", m.omega);
        assert!(nkg_profile_residual(&s, &p, m.omega).unwrap() <= 1e-4);
    }

    #[test]
    fn nse_multiplier_of_sech() {
        let g = line(-20.0, 20.0, 2048);
        let p = Problem::new(nse_cubic(0.01), &g).unwrap();
        let u = RealField::from_fn(&g, |x| 1.0 / x[0].cosh());
        let m = multiplier(&u, &p).unwrap();
        assert!((m.omega - 0.5).abs() <= 1e-4);
        assert!(m.el_residual <= 1e-4);
    }

    #[test]
    fn gradient_matches_central_difference() {
        let g = line(-10.0, 10.0, 256);
        let p = Problem::new(nse_cubic(0.01), &g).unwrap();
        let u = RealField::from_fn(&g, |x| 1.2 / (0.8 * x[0]).cosh());
        let v = RealField::from_fn(&g, |x| (-(x[0] - 1.0).powi(2)).exp());
        let eps = 1e-5;
        for which in [Which::E, Which::C, Which::JDelta] {
            let grad = first_variation(&u, &p, which).unwrap().gradient;
            let mut up = u.clone();
            up.axpy(eps, &v);
            let mut um = u.clone();
            um.axpy(-eps, &v);
            let fd =
                (functional_value(&up, &p, which).unwrap() - functional_value(&um, &p, which).unwrap()) / (2.0 * eps);
            let exact = grad.dot(&v);
            assert!(((fd - exact) / exact).abs() <= 1e-6, "{which:?}: {fd} vs {exact}");
        }
    }

    #[test]
    fn rayleigh_periodic_and_dirichlet() {
        let g = line(-10.0, 10.0, 256);
        let p = Problem::new(nse_cubic(0.01), &g).unwrap();
        let r = rayleigh_quotient_min(&p, &RayleighOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);

        let l = 10.0;
        let g = build_grid(GridSpec::cartesian(vec![AxisSpec::dirichlet(0.0, l, 512)])).unwrap();
        let p = Problem::new(nse_cubic(0.01), &g).unwrap();
        let r = rayleigh_quotient_min(&p, &RayleighOptions::default()).unwrap();
        let exact = 1.0 + 0.5 * (std::f64::consts::PI / l).powi(2);
        assert!((r.value - exact).abs() <= 1e-4, "{} vs {exact}", r.value);

        let p = Problem::new(nkg_cubic(), &line(-1.0, 1.0, 8)).unwrap();
        assert_eq!(
            rayleigh_quotient_min(&p, &RayleighOptions::default()).unwrap().value,
            1.0
        );
    }

    #[test]
    fn splitting_defects() {
        let g = line(-40.0, 40.0, 2048);
        let p = Problem::new(nse_cubic(0.01), &g).unwrap();
        let bump = |c: f64| RealField::from_fn(&g, move |x| 1.0 / (x[0] - c).cosh());
        let u = bump(0.0);
        let zero = RealField::zeros(&g);
        assert_eq!(splitting_defect(&p, Which::E, &u, &zero).unwrap(), 0.0);
        let mut last = f64::INFINITY;
        for d in [4.0, 8.0, 16.0] {
            let def = splitting_defect(&p, Which::E, &u, &bump(d)).unwrap();
            assert!(def < last);
            last = def;
        }
    }
}
