//! Time evolution, conservation and orbital-stability monitoring, standing
//! wave checks and the lift of a reduced vortex profile to three dimensions.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{ModelState, Problem};
use crate::grid::{ComplexField, Grid, GridKind, NkgState, RealField};
use crate::model::Equation;
use crate::sampling::band_limited_complex;
use crate::spectral::{AxisOps, Symbol};

/// Safety factor on the leapfrog stability limit.
const LEAPFROG_SAFETY: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct EvolveOptions {
    pub t_final: f64,
    /// Defaults to [`default_dt`].
    #[serde(default)]
    pub dt: Option<f64>,
    /// Record the monitored series every this many steps.
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    /// Symbol of the Laplacian on periodic axes in the NSE linear step.
    #[serde(default = "default_symbol")]
    pub symbol: Symbol,
    /// Emit a field snapshot every this many steps.
    #[serde(default)]
    pub snapshot_every: Option<usize>,
}

fn default_sample_every() -> usize {
    10
}
fn default_symbol() -> Symbol {
    Symbol::Discrete
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            t_final: 10.0,
            dt: None,
            sample_every: default_sample_every(),
            symbol: default_symbol(),
            snapshot_every: None,
        }
    }
}

impl EvolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config("evolve t-final must be positive".into()));
        }
        if self.dt.is_some_and(|dt| !(dt > 0.0)) {
            return Err(Error::Config("evolve dt must be positive".into()));
        }
        if self.sample_every == 0 || self.snapshot_every == Some(0) {
            return Err(Error::Config("sampling strides must be >= 1".into()));
        }
        Ok(())
    }

    /// Step count and the step that lands exactly on `t_final`.
    fn schedule(&self, p: &Problem) -> Result<(usize, f64)> {
        self.validate()?;
        let dt = self.dt.unwrap_or_else(|| default_dt(p));
        check_dt(p, dt)?;
        let steps = (self.t_final / dt).round().max(1.0) as usize;
        Ok((steps, self.t_final / steps as f64))
    }
}

/// Gershgorin bound on the spectrum of `−L`.
fn laplacian_bound(grid: &Grid) -> f64 {
    grid.axes()
        .iter()
        .map(|ax| {
            (0..ax.len())
                .map(|j| ax.diag[j].abs() + ax.lower[j].abs() + ax.upper[j].abs())
                .fold(0.0, f64::max)
        })
        .sum()
}

/// Largest admissible step: the leapfrog limit `0.9·Δ/√(1 + m²Δ²)` with
/// `Δ = 2/√‖L‖` for NKG; for NSE, where both split flows are unconditionally
/// stable, a phase-accuracy cap `min(1/2, 1/max|V_eff|)`.
pub fn dt_max(p: &Problem) -> f64 {
    match p.equation() {
        Equation::Nkg => {
            let d = 2.0 / laplacian_bound(p.grid()).sqrt();
            let m = p.spec().mass();
            LEAPFROG_SAFETY * d / (1.0 + m * m * d * d).sqrt()
        }
        _ => {
            let vmax = p.veff().max_abs();
            0.5f64.min(1.0 / vmax.max(1e-300))
        }
    }
}

/// NSE: `min(0.5·Δx², 1e−2)`; NKG: [`dt_max`].
pub fn default_dt(p: &Problem) -> f64 {
    match p.equation() {
        Equation::Nkg => dt_max(p),
        _ => {
            let dx = p.grid().spacings().into_iter().fold(f64::INFINITY, f64::min);
            (0.5 * dx * dx).min(1e-2).min(dt_max(p))
        }
    }
}

fn check_dt(p: &Problem, dt: f64) -> Result<()> {
    let max = dt_max(p);
    if !(dt.abs() > 0.0 && dt.abs() <= max) {
        return Err(Error::Config(format!(
            "time step {dt:e} outside (0, {max:e}] for this grid and model"
        )));
    }
    Ok(())
}

/// Strang splitting for `i∂ₜψ = −½Δψ + ½W′(ψ) + V_eff ψ`.
#[derive(Debug)]
pub struct NseStepper {
    ops: AxisOps,
    veff: Vec<f64>,
    nl: crate::model::Nonlinearity,
    dt: f64,
    symbol: Symbol,
    linear_factors: Vec<Option<Vec<Complex64>>>,
}

impl NseStepper {
    /// `dt` may be negative (backward in time).
    pub fn new(p: &Problem, dt: f64, symbol: Symbol) -> Result<Self> {
        if !p.equation().is_nse() {
            return Err(Error::Usage("NSE stepper needs an NSE model".into()));
        }
        check_dt(p, dt)?;
        let ops = AxisOps::new(p.grid());
        let linear_factors = (0..p.grid().ndim())
            .map(|a| {
                ops.symbol(a, symbol)
                    .map(|s| s.iter().map(|&l| Complex64::new(0.0, 0.5 * dt * l).exp()).collect())
            })
            .collect();
        Ok(Self {
            ops,
            veff: p.veff().values().to_vec(),
            nl: p.nonlinearity().clone(),
            dt,
            symbol,
            linear_factors,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn phase_flow(&self, psi: &mut [Complex64], tau: f64) {
        for (z, &v) in psi.iter_mut().zip(&self.veff) {
            let rate = v + 0.5 * self.nl.w_prime_over_s(z.norm());
            *z *= Complex64::new(0.0, -tau * rate).exp();
        }
    }

    fn linear(&self, psi: &mut [Complex64]) {
        let one = Complex64::new(1.0, 0.0);
        let h = Complex64::new(0.0, 0.25 * self.dt);
        for a in 0..self.ops.grid().ndim() {
            match &self.linear_factors[a] {
                Some(f) => self.apply_factors(psi, a, f),
                None => self.ops.apply_rational(psi, a, self.symbol, (one, h), (one, -h)),
            }
        }
    }

    fn apply_factors(&self, psi: &mut [Complex64], axis: usize, f: &[Complex64]) {
        self.ops.fft_axis(psi, axis, false);
        let n = f.len();
        let stride = self.ops.grid().strides()[axis];
        let scale = 1.0 / n as f64;
        for (i, z) in psi.iter_mut().enumerate() {
            let k = (i / stride) % n;
            *z *= f[k] * scale;
        }
        self.ops.fft_axis(psi, axis, true);
    }

    pub fn step(&self, psi: &mut ComplexField) {
        let v = psi.values_mut();
        self.phase_flow(v, 0.5 * self.dt);
        self.linear(v);
        self.phase_flow(v, 0.5 * self.dt);
    }

    pub fn advance(&self, psi: &mut ComplexField, steps: usize) {
        for _ in 0..steps {
            self.step(psi);
        }
    }
}

/// Störmer–Verlet for `∂ₜψ = ψ̂`, `∂ₜψ̂ = Δψ − W′(ψ)`.
#[derive(Debug)]
pub struct NkgStepper {
    nl: crate::model::Nonlinearity,
    dt: f64,
}

impl NkgStepper {
    /// `dt` may be negative (backward in time).
    pub fn new(p: &Problem, dt: f64) -> Result<Self> {
        if p.equation() != Equation::Nkg {
            return Err(Error::Usage("leapfrog stepper needs an NKG model".into()));
        }
        check_dt(p, dt)?;
        Ok(Self {
            nl: p.nonlinearity().clone(),
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn force(&self, psi: &ComplexField) -> ComplexField {
        let mut f = psi.laplacian();
        for (fi, &z) in f.values_mut().iter_mut().zip(psi.values()) {
            *fi -= z * self.nl.w_prime_over_s(z.norm());
        }
        f
    }

    pub fn step(&self, s: &mut NkgState) {
        self.advance(s, 1);
    }

    pub fn advance(&self, s: &mut NkgState, steps: usize) {
        let h = 0.5 * self.dt;
        let mut f = self.force(&s.psi);
        for _ in 0..steps {
            s.psi_hat.axpy(h, &f);
            s.psi.axpy(self.dt, &s.psi_hat);
            f = self.force(&s.psi);
            s.psi_hat.axpy(h, &f);
        }
    }
}

/// One Strang step of the NSE flow.
pub fn step_nse(psi: &ComplexField, dt: f64, p: &Problem) -> Result<ComplexField> {
    psi.check(p)?;
    let st = NseStepper::new(p, dt, Symbol::Discrete)?;
    let mut out = psi.clone();
    st.step(&mut out);
    Ok(out)
}

/// One leapfrog step of the NKG flow.
pub fn step_nkg(state: &NkgState, dt: f64, p: &Problem) -> Result<NkgState> {
    state.check(p)?;
    let st = NkgStepper::new(p, dt)?;
    let mut out = state.clone();
    st.step(&mut out);
    Ok(out)
}

/// Quadratic form used to measure distances: `L²` for NSE, `H¹×L²` with
/// `‖ψ‖² = ∫|∇ψ|² + m²|ψ|²` for NKG.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    L2,
    H1xL2,
}

/// States that can be advanced in time and compared along the phase and
/// translation orbit.
pub trait Evolvable: ModelState {
    type Stepper: Send + Sync;
    const METRIC: Metric;

    fn stepper(p: &Problem, dt: f64, symbol: Symbol) -> Result<Self::Stepper>;
    fn advance(st: &Self::Stepper, s: &mut Self, steps: usize);
    /// Multiplies every component by `e^{iθ}`.
    fn rotated(&self, theta: f64) -> Self;
    /// Complex components paired with the weighted operator applied to the
    /// reference in the distance's inner product.
    fn components(&self) -> Vec<&ComplexField>;
    fn components_mut(&mut self) -> Vec<&mut ComplexField>;
    fn metric_images(&self, p: &Problem) -> Vec<ComplexField>;
}

impl Evolvable for ComplexField {
    type Stepper = NseStepper;
    const METRIC: Metric = Metric::L2;

    fn stepper(p: &Problem, dt: f64, symbol: Symbol) -> Result<NseStepper> {
        NseStepper::new(p, dt, symbol)
    }
    fn advance(st: &NseStepper, s: &mut Self, steps: usize) {
        st.advance(s, steps)
    }
    fn rotated(&self, theta: f64) -> Self {
        let mut out = self.clone();
        out.rotate_phase(theta);
        out
    }
    fn components(&self) -> Vec<&ComplexField> {
        vec![self]
    }
    fn components_mut(&mut self) -> Vec<&mut ComplexField> {
        vec![self]
    }
    fn metric_images(&self, _p: &Problem) -> Vec<ComplexField> {
        vec![self.clone()]
    }
}

impl Evolvable for NkgState {
    type Stepper = NkgStepper;
    const METRIC: Metric = Metric::H1xL2;

    fn stepper(p: &Problem, dt: f64, _symbol: Symbol) -> Result<NkgStepper> {
        NkgStepper::new(p, dt)
    }
    fn advance(st: &NkgStepper, s: &mut Self, steps: usize) {
        st.advance(s, steps)
    }
    fn rotated(&self, theta: f64) -> Self {
        let mut out = self.clone();
        out.psi.rotate_phase(theta);
        out.psi_hat.rotate_phase(theta);
        out
    }
    fn components(&self) -> Vec<&ComplexField> {
        vec![&self.psi, &self.psi_hat]
    }
    fn components_mut(&mut self) -> Vec<&mut ComplexField> {
        vec![&mut self.psi, &mut self.psi_hat]
    }
    fn metric_images(&self, p: &Problem) -> Vec<ComplexField> {
        let m2 = p.spec().mass().powi(2);
        let mut a = self.psi.laplacian();
        a.scale(-1.0);
        a.axpy(m2, &self.psi);
        vec![a, self.psi_hat.clone()]
    }
}

/// Distance to the orbit of a reference under periodic grid shifts and
/// global phase, by FFT cross-correlation.
pub struct OrbitalDistance {
    ops: AxisOps,
    /// FFT over periodic axes of `w ⊙ M·ref`, per component.
    images: Vec<Vec<Complex64>>,
    ref_norm_sqr: f64,
    metric: Metric,
}

impl std::fmt::Debug for OrbitalDistance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OrbitalDistance")
            .field("metric", &self.metric)
            .field("ref_norm_sqr", &self.ref_norm_sqr)
            .finish()
    }
}

impl OrbitalDistance {
    pub fn new<S: Evolvable>(reference: &S, p: &Problem) -> Result<Self> {
        reference.check(p)?;
        let grid = p.grid();
        let ops = AxisOps::new(grid);
        let w = grid.weights();
        let imgs = reference.metric_images(p);
        let ref_norm_sqr: f64 = reference.components().iter().zip(&imgs).map(|(c, m)| c.dot(m)).sum();
        if !(ref_norm_sqr > 0.0) {
            return Err(Error::Domain("orbital reference has zero norm".into()));
        }
        let images = imgs
            .into_iter()
            .map(|m| {
                let mut v: Vec<Complex64> = m.values().iter().zip(w).map(|(z, wi)| z * wi).collect();
                for a in 0..grid.ndim() {
                    if ops.is_periodic(a) {
                        ops.fft_axis(&mut v, a, false);
                    }
                }
                v
            })
            .collect();
        Ok(Self {
            ops,
            images,
            ref_norm_sqr,
            metric: S::METRIC,
        })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// `min_{shift, θ} ‖e^{iθ}T_s u − ref‖ / ‖ref‖`.
    pub fn distance<S: Evolvable>(&self, u: &S, p: &Problem) -> f64 {
        let grid = self.ops.grid();
        let comps = u.components();
        let imgs = u.metric_images(p);
        let u_norm_sqr: f64 = comps.iter().zip(&imgs).map(|(c, m)| c.dot(m)).sum();
        let periodic: Vec<usize> = (0..grid.ndim()).filter(|&a| self.ops.is_periodic(a)).collect();
        let mut prod = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (c, img) in comps.iter().zip(&self.images) {
            let mut v = c.values().to_vec();
            for &a in &periodic {
                self.ops.fft_axis(&mut v, a, false);
            }
            for ((acc, x), y) in prod.iter_mut().zip(&v).zip(img) {
                *acc += x * y.conj();
            }
        }
        let np: usize = periodic.iter().map(|&a| grid.shape()[a]).product();
        for &a in &periodic {
            self.ops.fft_axis(&mut prod, a, true);
        }
        // Sum over non-periodic indices for each periodic shift.
        let mut corr = std::collections::HashMap::<usize, Complex64>::new();
        let strides = grid.strides();
        for (i, z) in prod.iter().enumerate() {
            let key = periodic
                .iter()
                .fold(0usize, |k, &a| k * grid.shape()[a] + (i / strides[a]) % grid.shape()[a]);
            *corr.entry(key).or_default() += z;
        }
        let best = corr.values().map(|z| z.norm()).fold(0.0, f64::max) / np as f64;
        let d2 = (u_norm_sqr + self.ref_norm_sqr - 2.0 * best).max(0.0);
        (d2 / self.ref_norm_sqr).sqrt()
    }
}

/// `scale·u` plus, in each component, band-limited complex noise of relative
/// `L²` size `eps` (relative to that component of `u`).
pub fn perturb<S: Evolvable>(u: &S, scale: f64, eps: f64, modes: usize, rng: &mut impl rand::Rng) -> S {
    let mut out = u.clone();
    for c in out.components_mut() {
        let size = c.norm();
        let noise = band_limited_complex(c.grid(), modes, rng);
        let nn = noise.norm();
        c.scale(scale);
        if eps != 0.0 && nn > 0.0 {
            c.axpy(eps * size / nn, &noise);
        }
    }
    out
}

/// The level set `Γ = {E = e₀, C = c₀}` through a reference state. `c0` is
/// the signed charge.
#[derive(Clone, Debug)]
pub struct GammaParams<S> {
    pub e0: f64,
    pub c0: f64,
    pub reference: S,
}

impl<S: ModelState> GammaParams<S> {
    pub fn from_reference(reference: S, p: &Problem) -> Result<Self> {
        reference.check(p)?;
        Ok(Self {
            e0: reference.raw_energy(p),
            c0: reference.raw_charge(p),
            reference,
        })
    }

    pub fn new(e0: f64, c0: f64, reference: S, p: &Problem) -> Result<Self> {
        reference.check(p)?;
        let (e, c) = (reference.raw_energy(p), reference.raw_charge(p));
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1e-300);
        if !(close(e, e0) && close(c.abs(), c0.abs())) {
            return Err(Error::Usage(format!(
                "reference has E = {e}, C = {c}; expected E = {e0}, |C| = {}",
                c0.abs()
            )));
        }
        Ok(Self {
            e0,
            c0: c0.abs() * c.signum(),
            reference,
        })
    }
}

/// Time series and summaries of one monitored trajectory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    pub times: Vec<f64>,
    pub e_series: Vec<f64>,
    pub c_series: Vec<f64>,
    /// `V = (E − e₀)² + (C − c₀)²`.
    pub v_series: Vec<f64>,
    pub orbital_distance_series: Vec<f64>,
    pub max_phase_deviation: Option<f64>,
    pub reversibility_defect: Option<f64>,
    pub metric: Option<Metric>,
    /// The orbital distance is measured to the shift-and-phase orbit of the
    /// reference, a computable stand-in for the distance to `Γ`.
    pub orbital_surrogate: bool,
    pub dt: f64,
    pub steps: usize,
    /// `max |E(t) − E(0)| / |E(0)|`.
    pub max_energy_drift: f64,
    /// `max |C(t) − C(0)| / (|C(0)| + 1)`.
    pub max_charge_drift: f64,
    /// `√V(t) ≤ √V(0) + τ·⌈t/10⌉` with the conservation tolerance
    /// `τ = 1e−6·(|e₀| + |c₀| + 1)`, at every sample.
    pub lyapunov_ok: bool,
    pub diverged: bool,
}

impl EvolutionReport {
    pub fn max_orbital_distance(&self) -> f64 {
        self.orbital_distance_series.iter().cloned().fold(0.0, f64::max)
    }
}

/// Per-10-time-unit conservation tolerance used by the Lyapunov check.
pub const CONSERVATION_TOL: f64 = 1e-6;

/// Advances `init` to `t_final`, sampling energy, charge, the Lyapunov
/// function and the orbital distance to `gamma.reference`.
pub fn evolve_and_monitor<S: Evolvable>(
    init: &S,
    p: &Problem,
    gamma: &GammaParams<S>,
    opts: &EvolveOptions,
) -> Result<EvolutionReport> {
    evolve_and_monitor_with(init, p, gamma, opts, |_, _, _| Ok(()))
}

/// As [`evolve_and_monitor`], calling `snapshot(step, t, state)` every
/// `snapshot_every` steps (and at `t = 0`).
pub fn evolve_and_monitor_with<S: Evolvable, F>(
    init: &S,
    p: &Problem,
    gamma: &GammaParams<S>,
    opts: &EvolveOptions,
    mut snapshot: F,
) -> Result<EvolutionReport>
where
    F: FnMut(usize, f64, &S) -> Result<()>,
{
    init.check(p)?;
    let (steps, dt) = opts.schedule(p)?;
    let stepper = S::stepper(p, dt, opts.symbol)?;
    let orbit = OrbitalDistance::new(&gamma.reference, p)?;
    let mut rep = EvolutionReport {
        metric: Some(S::METRIC),
        orbital_surrogate: true,
        dt,
        steps,
        lyapunov_ok: true,
        ..Default::default()
    };
    let tol = CONSERVATION_TOL * (gamma.e0.abs() + gamma.c0.abs() + 1.0);
    let mut u = init.clone();
    let (e_init, c_init) = (u.raw_energy(p), u.raw_charge(p));
    let v_init = (e_init - gamma.e0).powi(2) + (c_init - gamma.c0).powi(2);
    let record = |rep: &mut EvolutionReport, u: &S, t: f64| {
        let (e, c) = (u.raw_energy(p), u.raw_charge(p));
        let v = (e - gamma.e0).powi(2) + (c - gamma.c0).powi(2);
        rep.times.push(t);
        rep.e_series.push(e);
        rep.c_series.push(c);
        rep.v_series.push(v);
        rep.orbital_distance_series.push(orbit.distance(u, p));
        rep.max_energy_drift = rep.max_energy_drift.max((e - e_init).abs() / e_init.abs().max(1e-300));
        rep.max_charge_drift = rep.max_charge_drift.max((c - c_init).abs() / (c_init.abs() + 1.0));
        let allowed = v_init.sqrt() + tol * (t / 10.0).ceil().max(1.0);
        if v.sqrt() > allowed {
            rep.lyapunov_ok = false;
        }
    };
    record(&mut rep, &u, 0.0);
    if opts.snapshot_every.is_some() {
        snapshot(0, 0.0, &u)?;
    }
    let mut done = 0;
    while done < steps {
        let chunk = opts.sample_every.min(steps - done);
        S::advance(&stepper, &mut u, chunk);
        done += chunk;
        let t = done as f64 * dt;
        if !u.is_finite() {
            rep.diverged = true;
            rep.lyapunov_ok = false;
            break;
        }
        record(&mut rep, &u, t);
        if let Some(k) = opts.snapshot_every {
            if done % k == 0 || done == steps {
                snapshot(done, t, &u)?;
            }
        }
    }
    Ok(rep)
}

/// `max_t ‖u(t) − e^{−iωt}u₀‖ / ‖u₀‖` over the sampled times.
pub fn standing_wave_check<S: Evolvable>(u0: &S, omega: f64, p: &Problem, opts: &EvolveOptions) -> Result<f64> {
    u0.check(p)?;
    let (steps, dt) = opts.schedule(p)?;
    let stepper = S::stepper(p, dt, opts.symbol)?;
    let n0 = u0.norm();
    if !(n0 > 0.0) {
        return Err(Error::Domain("standing-wave check of the zero state".into()));
    }
    let mut u = u0.clone();
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < steps {
        let chunk = opts.sample_every.min(steps - done);
        S::advance(&stepper, &mut u, chunk);
        done += chunk;
        let t = done as f64 * dt;
        let mut diff = u.clone();
        diff.axpy(-1.0, &u0.rotated(-omega * t));
        let dev = diff.norm() / n0;
        if !dev.is_finite() {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(dev);
    }
    Ok(worst)
}

/// Relative L² defect after `steps` steps forward and `steps` back.
pub fn reversibility_defect<S: Evolvable>(u0: &S, p: &Problem, dt: f64, steps: usize, symbol: Symbol) -> Result<f64> {
    u0.check(p)?;
    let fwd = S::stepper(p, dt, symbol)?;
    let bwd = S::stepper(p, -dt, symbol)?;
    let mut u = u0.clone();
    S::advance(&fwd, &mut u, steps);
    S::advance(&bwd, &mut u, steps);
    u.axpy(-1.0, u0);
    Ok(u.norm() / u0.norm())
}

/// A reduced vortex profile lifted to `ψ = u(r, x₃)e^{iℓθ}` on a Cartesian grid.
#[derive(Clone, Debug)]
pub struct LiftedVortex {
    pub psi: ComplexField,
    /// `M₃ = −ℓ∫u²`, integrated on the cylindrical grid.
    pub m3: f64,
    pub winding: i32,
    pub omega: f64,
}

/// Largest ratio `u(r_min)/max u` accepted for `ℓ ≠ 0`.
const AXIS_TOLERANCE: f64 = 0.2;

/// Lifts `u` to `target` (3D Cartesian) by bilinear interpolation in
/// `(r, x₃)`. The returned field is the `t = 0` slice of `ψ e^{−iωt}`.
pub fn lift_vortex(u: &RealField, winding: i32, omega: f64, target: &Arc<Grid>) -> Result<LiftedVortex> {
    let src = u.grid();
    if !src.is_cylindrical() {
        return Err(Error::Usage("lift_vortex needs a profile on a cylindrical grid".into()));
    }
    if target.kind() != GridKind::Cartesian || target.ndim() != 3 {
        return Err(Error::Usage("lift target must be a 3D Cartesian grid".into()));
    }
    let (nr, nz) = (src.shape()[0], src.shape()[1]);
    let umax = u.max_abs();
    let vals = u.values();
    if vals.iter().any(|&v| v < -1e-6 * umax) {
        return Err(Error::Domain("vortex profile must be nonnegative".into()));
    }
    if winding != 0 {
        let axis_max = (0..nz).map(|k| vals[k].abs()).fold(0.0, f64::max);
        if axis_max > AXIS_TOLERANCE * umax {
            return Err(Error::Domain(format!(
                "profile does not vanish near the axis: u(r_min) = {axis_max:e}, max u = {umax:e}"
            )));
        }
    }
    let rax = src.axis(0);
    let zax = src.axis(1);
    let (dr, dz) = (rax.spacing, zax.spacing);
    let r0 = rax.coords[0];
    let z_periodic = zax.is_periodic();
    let (zmin, zlen) = (zax.spec.min, zax.length());
    let at = |i: usize, k: usize| vals[i * nz + k];
    // Value at (r index i, fractional z position).
    let along_z = |i: usize, z: f64| -> f64 {
        let t = (z - zax.coords[0]) / dz;
        if z_periodic {
            let t = t.rem_euclid(nz as f64);
            let k0 = t.floor() as usize % nz;
            let k1 = (k0 + 1) % nz;
            let f = t - t.floor();
            (1.0 - f) * at(i, k0) + f * at(i, k1)
        } else {
            // Cell-centred nodes with a zero boundary half a cell outside.
            let t = t.clamp(-0.5, nz as f64 - 0.5);
            if t < 0.0 {
                at(i, 0) * (1.0 + 2.0 * t).max(0.0)
            } else if t > (nz - 1) as f64 {
                at(i, nz - 1) * (1.0 - 2.0 * (t - (nz - 1) as f64)).max(0.0)
            } else {
                let k0 = t.floor() as usize;
                let k1 = (k0 + 1).min(nz - 1);
                let f = t - t.floor();
                (1.0 - f) * at(i, k0) + f * at(i, k1)
            }
        }
    };
    let profile = |r: f64, z: f64| -> f64 {
        if !z_periodic && (z <= zmin || z >= zmin + zlen) {
            return 0.0;
        }
        let r_max = rax.spec.max;
        if r >= r_max {
            return 0.0;
        }
        if r < r0 {
            let v = along_z(0, z);
            return if winding == 0 { v } else { v * r / r0 };
        }
        let t = (r - r0) / dr;
        let i0 = t.floor() as usize;
        if i0 + 1 >= nr {
            // Between the last node and the zero outer boundary.
            let f = (r - rax.coords[nr - 1]) / (r_max - rax.coords[nr - 1]);
            return along_z(nr - 1, z) * (1.0 - f);
        }
        let f = t - t.floor();
        (1.0 - f) * along_z(i0, z) + f * along_z(i0 + 1, z)
    };
    let l = winding as f64;
    let psi = ComplexField::from_fn(target, |x| {
        let r = x[0].hypot(x[1]);
        let theta = x[1].atan2(x[0]);
        Complex64::from_polar(profile(r, x[2]), l * theta)
    });
    Ok(LiftedVortex {
        m3: -l * u.norm_sqr(),
        psi,
        winding,
        omega,
    })
}

/// Unwrapped phase change of `ψ` around the closed loop of grid nodes on the
/// boundary of the square `|x₁|, |x₂| ≤ half_width` in the plane nearest `x₃`.
pub fn phase_winding(psi: &ComplexField, half_width: f64, x3: f64) -> Result<f64> {
    let g = psi.grid();
    if g.kind() != GridKind::Cartesian || g.ndim() != 3 {
        return Err(Error::Usage("phase winding needs a 3D Cartesian field".into()));
    }
    let nearest = |a: usize, x: f64| -> usize {
        let c = &g.axis(a).coords;
        (0..c.len())
            .min_by(|&i, &j| (c[i] - x).abs().total_cmp(&(c[j] - x).abs()))
            .expect("nonempty axis")
    };
    let (i_lo, i_hi) = (nearest(0, -half_width), nearest(0, half_width));
    let (j_lo, j_hi) = (nearest(1, -half_width), nearest(1, half_width));
    let k = nearest(2, x3);
    if i_hi <= i_lo || j_hi <= j_lo {
        return Err(Error::Usage("winding loop is narrower than one cell".into()));
    }
    // Counter-clockwise loop.
    let mut path = Vec::new();
    path.extend((i_lo..i_hi).map(|i| (i, j_lo)));
    path.extend((j_lo..j_hi).map(|j| (i_hi, j)));
    path.extend((i_lo + 1..=i_hi).rev().map(|i| (i, j_hi)));
    path.extend((j_lo + 1..=j_hi).rev().map(|j| (i_lo, j)));
    let val = |(i, j): (usize, usize)| psi.values()[g.flat_index(&[i, j, k])];
    let mut total = 0.0;
    for w in 0..path.len() {
        let a = val(path[w]);
        let b = val(path[(w + 1) % path.len()]);
        if a.norm() == 0.0 || b.norm() == 0.0 {
            return Err(Error::Domain("field vanishes on the winding loop".into()));
        }
        total += (b * a.conj()).arg();
    }
    Ok(total)
}

/// Winding number corresponding to a total phase change.
pub fn winding_number(total_phase: f64) -> f64 {
    total_phase / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, AxisSpec, GridSpec};
    use crate::model::{Coercivity, ModelSpec, Nonlinearity, Potential};

    fn periodic(n: usize, l: f64) -> Arc<Grid> {
        build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(-l, l, n)])).unwrap()
    }

    fn linear_nse(g: &Arc<Grid>) -> Problem {
        let spec = ModelSpec::nse(0.0, 4.0, Potential::constant(1.0), Coercivity { a: 1.0, s: 3.0 }, 0.01);
        Problem::new(spec, g).unwrap()
    }

    #[test]
    fn constant_state_rotates_at_unit_rate() {
        let g = periodic(64, 5.0);
        let p = linear_nse(&g);
        let psi0 = ComplexField::from_fn(&g, |_| Complex64::new(0.7, 0.0));
        let dt = 1e-2;
        let out = step_nse(&psi0, dt, &p).unwrap();
        let want = Complex64::new(0.0, -dt).exp() * 0.7;
        assert!(out.values().iter().all(|z| (z - want).norm() <= 1e-12));
    }

    #[test]
    fn plane_wave_dispersion_is_exact_with_spectral_symbol() {
        let l = 5.0;
        let g = periodic(64, l);
        let p = linear_nse(&g);
        let k = 2.0 * PI * 3.0 / (2.0 * l);
        let psi0 = ComplexField::from_fn(&g, |x| Complex64::new(0.0, k * x[0]).exp());
        let opts = EvolveOptions {
            t_final: 1.0,
            dt: Some(1e-2),
            symbol: Symbol::Spectral,
            ..Default::default()
        };
        let (steps, dt) = opts.schedule(&p).unwrap();
        let st = NseStepper::new(&p, dt, Symbol::Spectral).unwrap();
        let mut psi = psi0.clone();
        st.advance(&mut psi, steps);
        let mut want = psi0.clone();
        want.rotate_phase(-(0.5 * k * k + 1.0) * 1.0);
        assert!(psi.sub(&want).norm() / psi0.norm() < 1e-12);
    }

    #[test]
    fn dirichlet_crank_nicolson_is_unitary() {
        let g = build_grid(GridSpec::cartesian(vec![AxisSpec::dirichlet(-5.0, 5.0, 80)])).unwrap();
        let p = linear_nse(&g);
        let psi0 = ComplexField::from_fn(&g, |x| Complex64::new((-x[0] * x[0]).exp(), 0.3 * x[0]));
        let out = step_nse(&psi0, 1e-2, &p).unwrap();
        assert!((out.norm() - psi0.norm()).abs() < 1e-13);
    }

    #[test]
    fn dt_guard() {
        let g = periodic(64, 5.0);
        let nkg = Problem::new(ModelSpec::nkg(Nonlinearity::nkg_power(1.0, 1.0, 4.0), 0.01), &g).unwrap();
        let max = dt_max(&nkg);
        let dx: f64 = 10.0 / 64.0;
        assert!((max - 0.9 * dx / (1.0 + dx * dx).sqrt()).abs() < 1e-12);
        let s = NkgState::zeros(&g);
        assert!(matches!(step_nkg(&s, 1.01 * max, &nkg), Err(Error::Config(_))));
        assert!(step_nkg(&s, max, &nkg).is_ok());
    }

    #[test]
    fn linear_kg_constant_state_oscillates() {
        let g = periodic(32, 4.0);
        let p = Problem::new(ModelSpec::nkg(Nonlinearity::nkg_power(1.0, 0.0, 4.0), 0.01), &g).unwrap();
        let psi = ComplexField::from_fn(&g, |_| Complex64::new(0.5, 0.0));
        let s0 = NkgState::standing_wave(&psi.real_part(), 1.0);
        let opts = EvolveOptions {
            t_final: 1.0,
            dt: Some(1e-3),
            sample_every: 100,
            ..Default::default()
        };
        let dev = standing_wave_check(&s0, 1.0, &p, &opts).unwrap();
        assert!(dev <= 1e-6, "{dev}");
    }

    #[test]
    fn orbital_distance_ignores_shift_and_phase() {
        let g = periodic(128, 10.0);
        let p = linear_nse(&g);
        let u = ComplexField::from_fn(&g, |x| Complex64::new(1.0 / x[0].cosh(), 0.0));
        let od = OrbitalDistance::new(&u, &p).unwrap();
        let mut moved = u.shift(0, 17).unwrap();
        moved.rotate_phase(1.3);
        assert!(od.distance(&moved, &p) < 1e-12);
        let bigger = u.scaled(1.1);
        assert!((od.distance(&bigger, &p) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn lift_trivial_winding() {
        let cyl = build_grid(GridSpec::cylindrical(4.0, 16, AxisSpec::periodic(-2.0, 2.0, 16))).unwrap();
        let u = RealField::from_fn(&cyl, |x| (-x[0] * x[0]).exp());
        let cart = build_grid(GridSpec::cartesian(vec![
            AxisSpec::dirichlet(-3.0, 3.0, 12),
            AxisSpec::dirichlet(-3.0, 3.0, 12),
            AxisSpec::periodic(-2.0, 2.0, 8),
        ]))
        .unwrap();
        let l = lift_vortex(&u, 0, 0.5, &cart).unwrap();
        assert_eq!(l.m3, 0.0);
        assert!(l.psi.values().iter().all(|z| z.im == 0.0));
    }
}
