//! Free descent on `J_δ`, projected descent on a charge level set,
//! multiplier extraction and recentering.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{j_delta_with_gradient, multiplier, nkg_profile_residual, ModelState, Multiplier, Problem};
use crate::grid::{ComplexField, Grid, NkgState, RealField, Scalar};
use crate::spectral::Preconditioner;
use crate::state::StateVector;

/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
/// Trials that tie the current value to within roundoff before a line search
/// gives up.
const ROUNDOFF_TIES: usize = 3;
/// Consecutive accepted steps without resolvable decrease that end a run.
const STALL_STEPS: usize = 25;
const ROUNDOFF: f64 = 1e-13;
/// Accepted iterates below this multiple of the charge floor abort the run.
const COLLAPSE_FACTOR: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    BarzilaiBorweinArmijo,
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct MinimizeOptions {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Relative gradient tolerance.
    #[serde(default = "default_tol")]
    pub gradient_tolerance: f64,
    /// Optional absolute floor on the gradient norm.
    #[serde(default)]
    pub absolute_tolerance: Option<f64>,
    #[serde(default = "default_rule")]
    pub step_rule: StepRule,
    #[serde(default = "default_step")]
    pub initial_step: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub continuation_deltas: Option<Vec<f64>>,
    /// `Λ₀` proxy used to report whether `J_δ(init) < Λ₀`.
    #[serde(default)]
    pub lambda0_proxy: Option<f64>,
    /// Descend along `−P∇` with the Sobolev preconditioner `P`.
    #[serde(default = "default_true")]
    pub preconditioned: bool,
}

fn default_true() -> bool {
    true
}

fn default_max_iters() -> usize {
    20_000
}
fn default_tol() -> f64 {
    1e-8
}
fn default_rule() -> StepRule {
    StepRule::BarzilaiBorweinArmijo
}
fn default_step() -> f64 {
    1e-2
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iters: default_max_iters(),
            gradient_tolerance: default_tol(),
            absolute_tolerance: None,
            step_rule: default_rule(),
            initial_step: default_step(),
            rng_seed: 0,
            continuation_deltas: None,
            lambda0_proxy: None,
            preconditioned: true,
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Config("max-iters must be >= 1".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::Config("gradient-tolerance must be > 0".into()));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::Config("initial-step must be > 0".into()));
        }
        if let Some(d) = &self.continuation_deltas {
            if d.is_empty() || d.iter().any(|x| !(*x > 0.0)) {
                return Err(Error::Config(
                    "continuation-deltas must be a nonempty list of positive values".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub objective: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    FreeJDelta,
    ConstrainedEnergy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub delta: f64,
    pub iterations: usize,
    pub converged: bool,
    pub c_delta: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound = "")]
pub struct MinimizeReport<S> {
    #[serde(skip)]
    pub minimizer: S,
    pub objective: Objective,
    pub delta: Option<f64>,
    pub e_delta: f64,
    pub c_delta: f64,
    /// Signed charge of the minimizer.
    pub charge: f64,
    pub omega: f64,
    pub lambda_value: f64,
    pub j_delta: Option<f64>,
    pub el_residual: f64,
    /// NKG: relative residual of `−Δψ + W′(ψ) = ω²ψ`.
    pub profile_residual: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// The objective stopped changing at double precision before the
    /// tolerance was met.
    pub stalled: bool,
    pub final_relative_gradient: f64,
    pub objective_init: f64,
    pub lambda0_proxy: Option<f64>,
    pub init_below_proxy: Option<bool>,
    /// NSE: `min u ≥ −1e−6·max u` at the minimizer.
    pub nonnegative: Option<bool>,
    pub recenter_shift: Vec<isize>,
    pub stages: Vec<StageSummary>,
    #[serde(skip)]
    pub trace: Vec<TraceEntry>,
}

/// States the minimizers operate on.
pub trait Minimizable: ModelState + Recenter {
    /// Restores `C = target` (signed) without leaving the state's family.
    fn retract_charge(&mut self, p: &Problem, target: f64) -> Result<()>;

    fn nonnegative(&self) -> Option<bool> {
        None
    }

    fn profile_residual(&self, _p: &Problem, _omega: f64) -> Result<Option<f64>> {
        Ok(None)
    }

    /// Applies `P` (or `P⁻¹`) to a gradient-shaped vector.
    fn precondition(&self, pc: &Preconditioner, inverse: bool) -> Self;

    /// Shift `κ` of the preconditioner, matched to the bottom of the
    /// linear part of the energy Hessian.
    fn preconditioner_kappa(p: &Problem) -> f64;
}

impl Minimizable for RealField {
    fn retract_charge(&mut self, p: &Problem, target: f64) -> Result<()> {
        let c = self.raw_charge(p);
        if !(c > 0.0) {
            return Err(Error::Numerical(
                "cannot rescale a zero state to the charge level".into(),
            ));
        }
        self.scale((target.abs() / c).sqrt());
        Ok(())
    }

    fn nonnegative(&self) -> Option<bool> {
        let max = self.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.values().iter().cloned().fold(f64::INFINITY, f64::min);
        Some(min >= -1e-6 * max.abs())
    }

    fn precondition(&self, pc: &Preconditioner, inverse: bool) -> Self {
        pc.apply(self, inverse)
    }

    fn preconditioner_kappa(p: &Problem) -> f64 {
        let vmin = p.veff().values().iter().cloned().fold(f64::INFINITY, f64::min);
        (2.0 * vmin).max(0.5)
    }
}

impl Minimizable for NkgState {
    /// Rescales `ψ̂` only; `C` is linear in `ψ̂`.
    fn retract_charge(&mut self, p: &Problem, target: f64) -> Result<()> {
        let c = self.raw_charge(p);
        if c == 0.0 || c.signum() != target.signum() {
            return Err(Error::Numerical(format!(
                "charge {c:e} cannot be rescaled to {target:e} through psi_hat"
            )));
        }
        self.psi_hat.scale(target / c);
        Ok(())
    }

    fn profile_residual(&self, p: &Problem, omega: f64) -> Result<Option<f64>> {
        nkg_profile_residual(self, p, omega).map(Some)
    }

    /// `ψ̂` enters the energy through `|ψ̂|²` only and is left unscaled.
    fn precondition(&self, pc: &Preconditioner, inverse: bool) -> Self {
        NkgState {
            psi: pc.apply(&self.psi, inverse),
            psi_hat: self.psi_hat.clone(),
        }
    }

    fn preconditioner_kappa(p: &Problem) -> f64 {
        let m = p.spec().mass();
        (m * m).max(0.25)
    }
}

struct Eval<S> {
    f: f64,
    g: S,
    /// Magnitude of the terms making up the gradient, for the scale-relative test.
    scale: f64,
}

struct Descent<S> {
    x: S,
    iterations: usize,
    converged: bool,
    stalled: bool,
    relative_gradient: f64,
    trace: Vec<TraceEntry>,
}

/// Monotone descent along `−P∇f` with BB steps (in the `P⁻¹` metric) and
/// Armijo backtracking. Convergence is always judged on the unpreconditioned
/// gradient norm.
///
/// `eval` returns `None` for infeasible trials, which are backtracked.
fn descend<S, E, R, A>(
    init: S,
    eval: E,
    retract: R,
    mut after_accept: A,
    pc: Option<&Preconditioner>,
    opts: &MinimizeOptions,
) -> Result<Descent<S>>
where
    S: Minimizable,
    E: Fn(&S) -> Result<Option<Eval<S>>>,
    R: Fn(S) -> Result<S>,
    A: FnMut(&S, usize) -> Result<()>,
{
    let apply = |g: &S| match pc {
        Some(pc) => g.precondition(pc, false),
        None => g.clone(),
    };
    let mut x = retract(init)?;
    let mut ev = eval(&x)?.ok_or_else(|| Error::Domain("initial state is infeasible".into()))?;
    let g0 = ev.g.norm();
    let mut trace = vec![TraceEntry {
        iter: 0,
        objective: ev.f,
        grad_norm: g0,
    }];
    let converged_at = |gn: f64, scale: f64| -> bool {
        gn <= opts.gradient_tolerance * g0
            || gn <= opts.gradient_tolerance * scale
            || opts.absolute_tolerance.is_some_and(|a| gn <= a)
    };
    let mut alpha = opts.initial_step;
    let mut iterations = 0;
    let mut gn = g0;
    let mut converged = converged_at(gn, ev.scale);
    let mut unresolved_run = 0;
    let mut stalled = false;
    while !converged && iterations < opts.max_iters {
        let d = apply(&ev.g);
        let gd = ev.g.dot(&d);
        let tie = ROUNDOFF * ev.f.abs().max(1e-300);
        let mut step = alpha;
        let mut ties = 0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut trial = x.clone();
            trial.axpy(-step, &d);
            let trial = match retract(trial) {
                Ok(t) if t.is_finite() => t,
                _ => {
                    step *= 0.5;
                    continue;
                }
            };
            if let Some(et) = eval(&trial)? {
                if et.f.is_finite() {
                    let sufficient = et.f <= ev.f - ARMIJO_C * step * gd;
                    let level = et.f <= ev.f && ev.f - et.f <= tie;
                    if sufficient || level {
                        accepted = Some((trial, et, sufficient));
                        break;
                    }
                    if et.f - ev.f <= tie {
                        ties += 1;
                        if ties >= ROUNDOFF_TIES {
                            break;
                        }
                    }
                }
            }
            step *= 0.5;
        }
        let Some((xn, en, sufficient)) = accepted else {
            stalled = ties >= ROUNDOFF_TIES;
            break;
        };
        iterations += 1;
        after_accept(&xn, iterations)?;
        let mut s = xn.clone();
        s.axpy(-1.0, &x);
        let mut y = en.g.clone();
        y.axpy(-1.0, &ev.g);
        alpha = match opts.step_rule {
            StepRule::Fixed => opts.initial_step,
            StepRule::BarzilaiBorweinArmijo => {
                let sy = s.dot(&y);
                let ss = match pc {
                    Some(pc) => s.dot(&s.precondition(pc, true)),
                    None => s.dot(&s),
                };
                if sy > 0.0 && ss > 0.0 {
                    ss / sy
                } else {
                    2.0 * step
                }
            }
        };
        x = xn;
        ev = en;
        gn = ev.g.norm();
        trace.push(TraceEntry {
            iter: iterations,
            objective: ev.f,
            grad_norm: gn,
        });
        converged = converged_at(gn, ev.scale);
        unresolved_run = if sufficient { 0 } else { unresolved_run + 1 };
        if !converged && unresolved_run >= STALL_STEPS {
            stalled = true;
            break;
        }
    }
    Ok(Descent {
        x,
        iterations,
        converged,
        stalled,
        relative_gradient: if g0 > 0.0 { gn / g0 } else { 0.0 },
        trace,
    })
}

fn preconditioner_for<S: Minimizable>(p: &Problem, opts: &MinimizeOptions) -> Option<Preconditioner> {
    opts.preconditioned
        .then(|| Preconditioner::new(p.grid(), S::preconditioner_kappa(p)))
}

fn j_eval<S: ModelState>(p: &Problem) -> impl Fn(&S) -> Result<Option<Eval<S>>> + '_ {
    move |x: &S| {
        let c = x.raw_charge(p);
        if !(c.abs() >= p.charge_floor()) {
            return Ok(None);
        }
        let (fv, g) = j_delta_with_gradient(x, p)?;
        let ge = x.raw_energy_gradient(p).norm();
        let gc = x.raw_charge_gradient(p).norm();
        let k = p.spec().coercivity;
        let ac = c.abs();
        let delta = p.spec().delta;
        let scale =
            ge * (1.0 / ac + delta) + gc * (fv.energy.abs() / (c * c) + delta * 2.0 * k.a * k.s * ac.powf(k.s - 1.0));
        Ok(Some(Eval {
            f: fv.j_delta.expect("above floor"),
            g,
            scale,
        }))
    }
}

fn finish<S: Minimizable>(
    p: &Problem,
    d: Descent<S>,
    objective: Objective,
    lambda0_proxy: Option<f64>,
    objective_init: f64,
    stages: Vec<StageSummary>,
) -> Result<MinimizeReport<S>> {
    let cells = p.spec().translation_cells(p.grid());
    let (x, shift) = recenter_with(&d.x, &cells);
    let e = x.raw_energy(p);
    let c = x.raw_charge(p);
    let Multiplier { omega, el_residual, .. } = multiplier(&x, p)?;
    let fvj = if objective == Objective::FreeJDelta {
        crate::functionals::evaluate_all(&x, p)?.j_delta
    } else {
        None
    };
    Ok(MinimizeReport {
        profile_residual: x.profile_residual(p, omega)?,
        nonnegative: x.nonnegative(),
        objective,
        delta: (objective == Objective::FreeJDelta).then_some(p.spec().delta),
        e_delta: e,
        c_delta: c.abs(),
        charge: c,
        omega,
        lambda_value: e / c.abs(),
        j_delta: fvj,
        el_residual,
        iterations: d.iterations,
        converged: d.converged,
        stalled: d.stalled,
        final_relative_gradient: d.relative_gradient,
        objective_init,
        lambda0_proxy,
        init_below_proxy: lambda0_proxy.map(|l| objective_init < l),
        recenter_shift: shift,
        stages,
        trace: d.trace,
        minimizer: x,
    })
}

/// Minimizes `J_δ` without constraint, optionally through a descending list
/// of `δ` values (the last one is the model's `δ` when the list is absent).
pub fn minimize_free<S: Minimizable>(p: &Problem, init: &S, opts: &MinimizeOptions) -> Result<MinimizeReport<S>> {
    opts.validate()?;
    init.check(p)?;
    let c0 = init.raw_charge(p);
    if !(c0.abs() >= p.charge_floor()) {
        return Err(Error::Domain(format!(
            "initial |C| = {:e} is below the charge floor {:e}",
            c0.abs(),
            p.charge_floor()
        )));
    }
    let deltas = opts.continuation_deltas.clone().unwrap_or_else(|| vec![p.spec().delta]);
    let first = p.with_delta(deltas[0])?;
    let objective_init = j_eval::<S>(&first)(init)?
        .ok_or_else(|| Error::Domain("initial state is infeasible".into()))?
        .f;

    let pc = preconditioner_for::<S>(p, opts);
    let mut x = init.clone();
    let mut stages = Vec::new();
    let mut trace = Vec::new();
    let mut total = 0;
    let mut last = None;
    for &delta in &deltas {
        let stage = p.with_delta(delta)?;
        let floor = stage.charge_floor();
        let d = descend(
            x,
            j_eval::<S>(&stage),
            Ok,
            |s: &S, it| {
                let c = s.raw_charge(&stage).abs();
                if c < COLLAPSE_FACTOR * floor {
                    return Err(Error::ChargeCollapse {
                        iteration: total + it,
                        charge: c,
                        floor,
                    });
                }
                Ok(())
            },
            pc.as_ref(),
            opts,
        )?;
        trace.extend(d.trace.iter().map(|t| TraceEntry {
            iter: t.iter + total,
            ..*t
        }));
        total += d.iterations;
        stages.push(StageSummary {
            delta,
            iterations: d.iterations,
            converged: d.converged,
            c_delta: d.x.raw_charge(&stage).abs(),
        });
        x = d.x.clone();
        last = Some((stage, d));
    }
    let (stage, mut d) = last.expect("at least one stage");
    d.iterations = total;
    d.trace = trace;
    finish(
        &stage,
        d,
        Objective::FreeJDelta,
        opts.lambda0_proxy,
        objective_init,
        stages,
    )
}

/// Minimizes `E` on `{|C| = c}` by projected gradient descent with retraction.
pub fn minimize_constrained<S: Minimizable>(
    p: &Problem,
    c: f64,
    init: &S,
    opts: &MinimizeOptions,
) -> Result<MinimizeReport<S>> {
    opts.validate()?;
    init.check(p)?;
    if !(c.is_finite() && c >= p.charge_floor()) {
        return Err(Error::Domain(format!(
            "target charge {c:e} must be at least the charge floor {:e}",
            p.charge_floor()
        )));
    }
    let c_init = init.raw_charge(p);
    if c_init == 0.0 {
        return Err(Error::Domain("initial state has zero charge".into()));
    }
    let target = c * c_init.signum();
    let eval = |x: &S| -> Result<Option<Eval<S>>> {
        let f = x.raw_energy(p);
        let ge = x.raw_energy_gradient(p);
        let gc = x.raw_charge_gradient(p);
        let cc = gc.dot(&gc);
        let lambda = if cc > 0.0 { ge.dot(&gc) / cc } else { 0.0 };
        let mut g = ge.clone();
        g.axpy(-lambda, &gc);
        let scale = ge.norm();
        Ok(Some(Eval { f, g, scale }))
    };
    let retract = |mut x: S| -> Result<S> {
        x.retract_charge(p, target)?;
        Ok(x)
    };
    let mut start = init.clone();
    start.retract_charge(p, target)?;
    let objective_init = start.raw_energy(p);
    let pc = preconditioner_for::<S>(p, opts);
    let d = descend(start, eval, retract, |_, _| Ok(()), pc.as_ref(), opts)?;
    finish(p, d, Objective::ConstrainedEnergy, None, objective_init, Vec::new())
}

/// `(ω, relative Euler–Lagrange residual)`.
pub fn extract_multiplier<S: ModelState>(state: &S, p: &Problem) -> Result<(f64, f64)> {
    let m = multiplier(state, p)?;
    Ok((m.omega, m.el_residual))
}

/// Translation and phase normalization onto a canonical orbit representative.
pub trait Recenter: StateVector {
    /// Pointwise charge density `|u|²`.
    fn density(&self) -> Vec<f64>;
    fn shifted(&self, axis: usize, cells: isize) -> Self;
    /// Multiplies by the unit phase that makes node `idx` real-positive.
    fn fix_phase(&mut self, _idx: usize) {}
}

impl Recenter for RealField {
    fn density(&self) -> Vec<f64> {
        self.values().iter().map(|v| v * v).collect()
    }
    fn shifted(&self, axis: usize, cells: isize) -> Self {
        self.shift(axis, cells).expect("periodic axis")
    }
}

fn unit_conj(z: Complex64) -> Option<Complex64> {
    let n = z.norm();
    (n > 0.0).then(|| z.conj() / n)
}

impl Recenter for ComplexField {
    fn density(&self) -> Vec<f64> {
        self.values().iter().map(|z| z.abs_sqr()).collect()
    }
    fn shifted(&self, axis: usize, cells: isize) -> Self {
        self.shift(axis, cells).expect("periodic axis")
    }
    fn fix_phase(&mut self, idx: usize) {
        let z = self.values()[idx];
        if let Some(ph) = unit_conj(z) {
            self.values_mut().iter_mut().for_each(|v| *v *= ph);
            self.values_mut()[idx] = Complex64::new(z.norm(), 0.0);
        }
    }
}

impl Recenter for NkgState {
    fn density(&self) -> Vec<f64> {
        self.psi.values().iter().map(|z| z.abs_sqr()).collect()
    }
    fn shifted(&self, axis: usize, cells: isize) -> Self {
        NkgState {
            psi: self.psi.shift(axis, cells).expect("periodic axis"),
            psi_hat: self.psi_hat.shift(axis, cells).expect("periodic axis"),
        }
    }
    fn fix_phase(&mut self, idx: usize) {
        let z = self.psi.values()[idx];
        if let Some(ph) = unit_conj(z) {
            self.psi.values_mut().iter_mut().for_each(|v| *v *= ph);
            self.psi_hat.values_mut().iter_mut().for_each(|v| *v *= ph);
            self.psi.values_mut()[idx] = Complex64::new(z.norm(), 0.0);
        }
    }
}

/// Centroid of the density along each axis, in fractional node indices
/// (circular mean on periodic axes).
fn centroid(grid: &Grid, density: &[f64]) -> Option<Vec<f64>> {
    let w = grid.weights();
    let total = crate::grid::pairwise_sum(density.len(), &|i| w[i] * density[i]);
    if !(total > 0.0) {
        return None;
    }
    let mut out = Vec::with_capacity(grid.ndim());
    for a in 0..grid.ndim() {
        let n = grid.shape()[a] as f64;
        if grid.axis(a).is_periodic() {
            let tau = 2.0 * std::f64::consts::PI / n;
            let cs = crate::grid::pairwise_sum(density.len(), &|i| {
                w[i] * density[i] * (tau * grid.axis_index(i, a) as f64).cos()
            });
            let sn = crate::grid::pairwise_sum(density.len(), &|i| {
                w[i] * density[i] * (tau * grid.axis_index(i, a) as f64).sin()
            });
            out.push(sn.atan2(cs).rem_euclid(2.0 * std::f64::consts::PI) / tau);
        } else {
            let m = crate::grid::pairwise_sum(density.len(), &|i| w[i] * density[i] * grid.axis_index(i, a) as f64);
            out.push(m / total);
        }
    }
    Some(out)
}

/// Shifts so that the density centroid sits at the box centre, moving by
/// whole multiples of `cells[a]` on each periodic axis (`None` freezes the
/// axis), then fixes the global phase at the centroid node.
pub fn recenter_with<S: Recenter>(state: &S, cells: &[Option<usize>]) -> (S, Vec<isize>) {
    let grid = state.grid().clone();
    let mut out = state.clone();
    let mut shifts = vec![0isize; grid.ndim()];
    let Some(c) = centroid(&grid, &state.density()) else {
        return (out, shifts);
    };
    for a in 0..grid.ndim() {
        let (Some(q), true) = (cells.get(a).copied().flatten(), grid.axis(a).is_periodic()) else {
            continue;
        };
        let n = grid.shape()[a] as f64;
        let target = (grid.shape()[a] / 2) as f64;
        let d = (target - c[a] + 0.5 * n).rem_euclid(n) - 0.5 * n;
        let q = q as f64;
        if d.abs() > 0.5 * q + 1e-9 {
            let k = (q * (d / q).round()) as isize;
            out = out.shifted(a, k);
            shifts[a] = k;
        }
    }
    let c = centroid(&grid, &out.density()).expect("nonzero density");
    let idx: Vec<usize> = c
        .iter()
        .zip(grid.shape())
        .map(|(ci, &n)| (ci.round() as usize) % n)
        .collect();
    out.fix_phase(grid.flat_index(&idx));
    (out, shifts)
}

/// Recentering by whole grid cells on every periodic axis.
pub fn recenter<S: Recenter>(state: &S) -> S {
    let cells = vec![Some(1); state.grid().ndim()];
    recenter_with(state, &cells).0
}

/// Best alignment of `b` onto `a` over the admissible shifts and a global phase,
/// returning `‖a − T b‖/‖a‖`. Uses recentering of both, then a local search
/// of one cell in each periodic direction.
pub fn aligned_relative_distance<S>(a: &S, b: &S, cells: &[Option<usize>]) -> f64
where
    S: Recenter + PhaseAlign,
{
    let (ra, _) = recenter_with(a, cells);
    let (rb, _) = recenter_with(b, cells);
    let grid = ra.grid().clone();
    let mut best = f64::INFINITY;
    let nd = grid.ndim();
    let offsets: Vec<Vec<isize>> = (0..3usize.pow(nd as u32))
        .map(|mut t| {
            (0..nd)
                .map(|ax| {
                    let o = (t % 3) as isize - 1;
                    t /= 3;
                    match cells.get(ax).copied().flatten() {
                        Some(q) if grid.axis(ax).is_periodic() => o * q as isize,
                        _ => 0,
                    }
                })
                .collect()
        })
        .collect();
    for off in offsets {
        let mut t = rb.clone();
        for (ax, &o) in off.iter().enumerate() {
            if o != 0 {
                t = t.shifted(ax, o);
            }
        }
        let t = t.align_phase_to(&ra);
        let mut diff = ra.clone();
        diff.axpy(-1.0, &t);
        best = best.min(diff.norm() / ra.norm());
    }
    best
}

/// Optimal global phase rotation of `self` onto a reference.
pub trait PhaseAlign: Sized {
    fn align_phase_to(&self, reference: &Self) -> Self;
}

impl PhaseAlign for RealField {
    fn align_phase_to(&self, reference: &Self) -> Self {
        if self.dot(reference) < 0.0 {
            self.scaled(-1.0)
        } else {
            self.clone()
        }
    }
}

fn complex_overlap(a: &ComplexField, b: &ComplexField) -> Complex64 {
    a.inner_complex(b)
}

impl PhaseAlign for ComplexField {
    fn align_phase_to(&self, reference: &Self) -> Self {
        let z = complex_overlap(reference, self);
        let mut out = self.clone();
        if let Some(ph) = unit_conj(z.conj()) {
            out.values_mut().iter_mut().for_each(|v| *v *= ph);
        }
        out
    }
}

impl PhaseAlign for NkgState {
    fn align_phase_to(&self, reference: &Self) -> Self {
        let z = complex_overlap(&reference.psi, &self.psi) + complex_overlap(&reference.psi_hat, &self.psi_hat);
        let mut out = self.clone();
        if let Some(ph) = unit_conj(z.conj()) {
            out.psi.values_mut().iter_mut().for_each(|v| *v *= ph);
            out.psi_hat.values_mut().iter_mut().for_each(|v| *v *= ph);
        }
        out
    }
}
