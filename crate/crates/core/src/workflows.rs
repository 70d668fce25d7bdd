//! The four command-line workflows. Each writes its artifacts under an
//! output directory and returns the exit status of the exit-code contract.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::config::{InitSpec, RunConfig};
use crate::error::{Error, Result};
use crate::evolve::{
    evolve_and_monitor_with, lift_vortex, perturb, phase_winding, standing_wave_check, EvolutionReport, Evolvable,
    GammaParams,
};
use crate::functionals::{multiplier, Problem};
use crate::grid::{build_grid, AxisSpec, Grid, GridSpec, NkgState, RealField};
use crate::hylomorphy::{hylomorphy_check, plateau_test_function, torus_test_function, HylomorphyReport, SweepKind};
use crate::io::{read_snapshot, write_json, write_series_csv, write_snapshot, write_sweep_csv, write_trace_csv};
use crate::minimize::{aligned_relative_distance, minimize_constrained, minimize_free, Minimizable, MinimizeReport};
use crate::model::{Equation, ModelSpec};
use crate::sampling::{band_limited, rng};
use crate::state::State;
use crate::verify::{dynamics_properties, nkg_static_suite, nse_static_suite, VerifyReport};

/// Relative Euler–Lagrange residual under which a run that stalled at
/// roundoff still counts as converged.
pub const STALL_ACCEPT_RESIDUAL: f64 = 1e-5;

/// Random fields drawn by the coercivity sampling suite.
pub const COERCIVITY_SAMPLES: usize = 1000;

/// Command-line overrides; `None` keeps the config value.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub deterministic: bool,
    pub seed: Option<u64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if self.deterministic {
            cfg.deterministic = true;
        }
        if let Some(s) = self.seed {
            cfg.rng_seed = Some(s);
        }
        if let Some(n) = self.max_iters {
            cfg.minimize.max_iters = n;
        }
        if let Some(t) = self.tol {
            cfg.minimize.gradient_tolerance = t;
        }
        cfg.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedSource {
    Config,
    /// `deterministic = true` without a seed uses 0.
    DeterministicDefault,
    Entropy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SeedInfo {
    pub value: u64,
    pub source: SeedSource,
}

pub fn resolve_seed(cfg: &RunConfig) -> SeedInfo {
    match (cfg.rng_seed, cfg.deterministic) {
        (Some(value), _) => SeedInfo {
            value,
            source: SeedSource::Config,
        },
        (None, true) => SeedInfo {
            value: 0,
            source: SeedSource::DeterministicDefault,
        },
        (None, false) => SeedInfo {
            value: rand::thread_rng().gen(),
            source: SeedSource::Entropy,
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    /// Stopped at roundoff with a small Euler–Lagrange residual.
    ConvergedAtRoundoff,
    NotConverged,
    Diverged,
    Passed,
    Failed,
    Completed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Converged | Status::ConvergedAtRoundoff | Status::Passed | Status::Completed => 0,
            Status::NotConverged | Status::Diverged | Status::Failed => 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: Status,
    pub report: PathBuf,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }
}

/// Result of the constrained re-solve at the free minimizer's charge.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossCheck {
    pub c_delta: f64,
    pub energy_free: f64,
    pub energy_constrained: f64,
    pub energy_difference: f64,
    /// Relative `L²` distance after translation and phase alignment.
    pub profile_difference: f64,
    pub omega_constrained: f64,
    pub converged: bool,
    pub stalled: bool,
}

/// Lifted-vortex diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VortexSummary {
    pub winding: i32,
    /// Unwrapped phase change around a loop about the axis.
    pub phase_winding: f64,
    pub phase_winding_error: f64,
    pub m3: f64,
    /// `−ℓ·c_δ`.
    pub m3_expected: f64,
    pub lift_grid: GridSpec,
    pub loop_half_width: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub command: &'static str,
    pub status: Status,
    pub seed: SeedInfo,
    pub model: ModelSpec,
    pub hylomorphy: HylomorphyReport,
    pub minimize: MinimizeReport<()>,
    pub cross_check: Option<CrossCheck>,
    pub vortex: Option<VortexSummary>,
    pub files: Vec<String>,
}

fn strip<S>(r: MinimizeReport<S>) -> (S, MinimizeReport<()>, Vec<crate::minimize::TraceEntry>) {
    let MinimizeReport {
        minimizer,
        objective,
        delta,
        e_delta,
        c_delta,
        charge,
        omega,
        lambda_value,
        j_delta,
        el_residual,
        profile_residual,
        iterations,
        converged,
        stalled,
        final_relative_gradient,
        objective_init,
        lambda0_proxy,
        init_below_proxy,
        nonnegative,
        recenter_shift,
        stages,
        trace,
    } = r;
    (
        minimizer,
        MinimizeReport {
            minimizer: (),
            objective,
            delta,
            e_delta,
            c_delta,
            charge,
            omega,
            lambda_value,
            j_delta,
            el_residual,
            profile_residual,
            iterations,
            converged,
            stalled,
            final_relative_gradient,
            objective_init,
            lambda0_proxy,
            init_below_proxy,
            nonnegative,
            recenter_shift,
            stages,
            trace: Vec::new(),
        },
        trace,
    )
}

fn solve_status(r: &MinimizeReport<impl Sized>) -> Status {
    if r.converged {
        Status::Converged
    } else if r.stalled && r.el_residual <= STALL_ACCEPT_RESIDUAL {
        Status::ConvergedAtRoundoff
    } else {
        Status::NotConverged
    }
}

/// States the solve workflow can start from and write out.
pub trait SolveState: Minimizable + Into<State> {
    fn from_profile(u: &RealField, omega0: f64) -> Self;
    fn from_snapshot(s: State) -> Result<Self>;
}

impl SolveState for RealField {
    fn from_profile(u: &RealField, _omega0: f64) -> Self {
        u.clone()
    }
    fn from_snapshot(s: State) -> Result<Self> {
        match s {
            State::Real(u) => Ok(u),
            other => Err(Error::Config(format!(
                "expected a real snapshot, found {}",
                other.kind()
            ))),
        }
    }
}

impl SolveState for NkgState {
    fn from_profile(u: &RealField, omega0: f64) -> Self {
        NkgState::standing_wave(u, omega0)
    }
    fn from_snapshot(s: State) -> Result<Self> {
        match s {
            State::Nkg(u) => Ok(u),
            other => Err(Error::Config(format!(
                "expected an nkg snapshot, found {}",
                other.kind()
            ))),
        }
    }
}

fn build_problem(cfg: &RunConfig) -> Result<(Arc<Grid>, Problem)> {
    let grid = cfg.build_grid()?;
    let spec = cfg.model.to_spec(&grid)?;
    let problem = Problem::new(spec, &grid)?;
    Ok((grid, problem))
}

fn initial_profile(cfg: &RunConfig, grid: &Arc<Grid>, hylo: &HylomorphyReport, seed: u64) -> Result<RealField> {
    match &cfg.minimize.init {
        InitSpec::Auto => match hylo.sweep_kind {
            SweepKind::PlateauRadius => plateau_test_function(hylo.best_parameter, hylo.s0, grid),
            SweepKind::TorusSize => torus_test_function(hylo.best_parameter, hylo.s0, grid),
        },
        InitSpec::Plateau { radius, s0 } => plateau_test_function(*radius, *s0, grid),
        InitSpec::Torus { lambda, s0 } => torus_test_function(*lambda, *s0, grid),
        InitSpec::Gaussian { amplitude, width } => {
            let mut c = grid.center();
            if grid.is_cylindrical() {
                c[0] = 0.0;
            }
            Ok(RealField::from_fn(grid, |x| {
                let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                amplitude * (-r2 / (2.0 * width * width)).exp()
            }))
        }
        InitSpec::Random { modes, norm } => {
            let mut u = band_limited(grid, *modes, &mut rng(seed));
            u.scale(*norm);
            Ok(u)
        }
        InitSpec::Snapshot { .. } => unreachable!("handled by the caller"),
    }
}

fn initial_state<S: SolveState>(cfg: &RunConfig, problem: &Problem, hylo: &HylomorphyReport, seed: u64) -> Result<S> {
    if let InitSpec::Snapshot { path } = &cfg.minimize.init {
        let s = S::from_snapshot(read_snapshot(&cfg.resolve(path))?)?;
        if !s.grid().as_ref().eq(problem.grid().as_ref()) {
            return Err(Error::Config("initial snapshot grid differs from [grid]".into()));
        }
        return Ok(s);
    }
    let u = initial_profile(cfg, problem.grid(), hylo, seed)?;
    let omega0 = match (cfg.minimize.init_omega, hylo.beta) {
        (Some(w), _) => w,
        (None, Some(b)) => b,
        (None, None) => 0.0,
    };
    Ok(S::from_profile(&u, omega0))
}

/// Everything [`solve`] computes, before anything is written.
pub struct Solved<S> {
    pub problem: Problem,
    pub hylomorphy: HylomorphyReport,
    pub minimizer: S,
    pub report: MinimizeReport<()>,
    pub trace: Vec<crate::minimize::TraceEntry>,
    pub cross_check: Option<CrossCheck>,
    pub status: Status,
}

/// Hypothesis check, hylomorphy report, free minimization and the
/// constrained cross-check.
pub fn solve<S: SolveState + crate::minimize::PhaseAlign>(cfg: &RunConfig, seed: u64) -> Result<Solved<S>> {
    let (_, problem) = build_problem(cfg)?;
    let hylo = hylomorphy_check(&problem, &cfg.hylomorphy)?;
    if !hylo.hypothesis.holds {
        return Err(Error::Domain(format!(
            "the hylomorphy hypothesis fails for this nonlinearity (best margin {:e})",
            hylo.hypothesis.margin
        )));
    }
    let init: S = initial_state(cfg, &problem, &hylo, seed)?;
    let mut opts = cfg.minimize.options(seed);
    opts.lambda0_proxy = Some(hylo.lambda0_proxy);
    let free = minimize_free(&problem, &init, &opts)?;
    let status = solve_status(&free);
    let cross_check = if cfg.minimize.cross_check && status != Status::NotConverged {
        let mut copts = opts.clone();
        copts.continuation_deltas = None;
        let cons = minimize_constrained(&problem, free.c_delta, &init, &copts)?;
        let cells = problem.spec().translation_cells(problem.grid());
        Some(CrossCheck {
            c_delta: free.c_delta,
            energy_free: free.e_delta,
            energy_constrained: cons.e_delta,
            energy_difference: (cons.e_delta - free.e_delta).abs(),
            profile_difference: aligned_relative_distance(&free.minimizer, &cons.minimizer, &cells),
            omega_constrained: cons.omega,
            converged: cons.converged,
            stalled: cons.stalled,
        })
    } else {
        None
    };
    let (minimizer, report, trace) = strip(free);
    Ok(Solved {
        problem,
        hylomorphy: hylo,
        minimizer,
        report,
        trace,
        cross_check,
        status,
    })
}

/// Lifts a reduced vortex minimizer to a 3D Cartesian grid of half-width
/// `r_max/2` and measures its winding on a loop through the ring maximum.
pub fn vortex_summary(u: &RealField, p: &Problem, omega: f64, c_delta: f64) -> Result<VortexSummary> {
    let g = u.grid();
    let half = 0.5 * g.axis(0).spec.max;
    let lift_grid = GridSpec::cartesian(vec![
        AxisSpec::dirichlet(-half, half, 64),
        AxisSpec::dirichlet(-half, half, 64),
        g.axis(1).spec.clone(),
    ]);
    let target = build_grid(lift_grid.clone())?;
    let winding = p.spec().winding;
    let lifted = lift_vortex(u, winding, omega, &target)?;
    let peak = (0..u.len())
        .max_by(|&i, &j| u.values()[i].total_cmp(&u.values()[j]))
        .expect("nonempty grid");
    let at = g.coords(peak);
    let loop_half_width = (at[0] / 2f64.sqrt()).max(2.0 * target.axis(0).spacing);
    let total = phase_winding(&lifted.psi, loop_half_width, at[1])?;
    Ok(VortexSummary {
        winding,
        phase_winding: total,
        phase_winding_error: (total - 2.0 * PI * winding as f64).abs(),
        m3: lifted.m3,
        m3_expected: -(winding as f64) * c_delta,
        lift_grid,
        loop_half_width,
    })
}

fn rel(out: &Path, p: &Path) -> String {
    p.strip_prefix(out).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

fn fields_dir(out: &Path) -> PathBuf {
    out.join("fields")
}

pub fn run_solve(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    match cfg.model.equation {
        Equation::Nkg => run_solve_as::<NkgState>(cfg, out),
        _ => run_solve_as::<RealField>(cfg, out),
    }
}

fn run_solve_as<S: SolveState + crate::minimize::PhaseAlign>(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let seed = resolve_seed(cfg);
    let solved = solve::<S>(cfg, seed.value)?;
    let mut files = Vec::new();
    let trace_path = out.join("trace.csv");
    write_trace_csv(&trace_path, &solved.trace)?;
    files.push(rel(out, &trace_path));
    let state: State = solved.minimizer.clone().into();
    if cfg.output.snapshots {
        let snap = write_snapshot(&fields_dir(out), "minimizer", &state, None)?;
        files.push(rel(out, &snap));
    }
    let vortex = match (&state, cfg.model.equation, solved.status) {
        (State::Real(u), Equation::NseVortex, s) if s != Status::NotConverged => Some(vortex_summary(
            u,
            &solved.problem,
            solved.report.omega,
            solved.report.c_delta,
        )?),
        _ => None,
    };
    let report = SolveReport {
        command: "solve",
        status: solved.status,
        seed,
        model: solved.problem.spec().clone(),
        hylomorphy: solved.hylomorphy,
        minimize: solved.report,
        cross_check: solved.cross_check,
        vortex,
        files,
    };
    let path = out.join("report.json");
    write_json(&path, &report)?;
    Ok(Outcome {
        status: solved.status,
        report: path,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolveReport {
    pub command: &'static str,
    pub status: Status,
    pub seed: SeedInfo,
    pub model: ModelSpec,
    /// Where the reference came from: a snapshot path or `"solve"`.
    pub reference: String,
    pub reference_energy: f64,
    pub reference_charge: f64,
    pub omega: f64,
    pub perturbation: f64,
    pub scale: f64,
    /// `max_t ‖u(t) − e^{−iωt}u₀‖/‖u₀‖`, for unperturbed runs only.
    pub max_phase_deviation: Option<f64>,
    pub evolution: EvolutionReport,
    pub files: Vec<String>,
}

/// The reference state for evolution: the configured snapshot, or the
/// minimizer of a fresh solve.
fn reference_state<S: SolveState + crate::minimize::PhaseAlign>(
    cfg: &RunConfig,
    problem: &Problem,
    seed: u64,
) -> Result<(S, String)> {
    match &cfg.evolve.reference {
        Some(path) => {
            let s = S::from_snapshot(read_snapshot(&cfg.resolve(path))?)?;
            if !s.grid().as_ref().eq(problem.grid().as_ref()) {
                return Err(Error::Config("reference snapshot grid differs from [grid]".into()));
            }
            Ok((s, path.to_string_lossy().into_owned()))
        }
        None => {
            let solved = solve::<S>(cfg, seed)?;
            if solved.status == Status::NotConverged {
                return Err(Error::Numerical("the reference solve did not converge".into()));
            }
            Ok((solved.minimizer, "solve".into()))
        }
    }
}

pub fn run_evolve(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let seed = resolve_seed(cfg);
    let (_, problem) = build_problem(cfg)?;
    match cfg.model.equation {
        Equation::Nkg => {
            let (r, src) = reference_state::<NkgState>(cfg, &problem, seed.value)?;
            evolve_from(cfg, out, seed, &problem, r, src)
        }
        _ => {
            let (r, src) = reference_state::<RealField>(cfg, &problem, seed.value)?;
            evolve_from(cfg, out, seed, &problem, r.to_complex(), src)
        }
    }
}

fn evolve_from<S: Evolvable + Into<State>>(
    cfg: &RunConfig,
    out: &Path,
    seed: SeedInfo,
    problem: &Problem,
    reference: S,
    source: String,
) -> Result<Outcome> {
    let ev = &cfg.evolve;
    let opts = ev.options();
    let m = multiplier(&reference, problem)?;
    let init = perturb(
        &reference,
        ev.scale,
        ev.perturbation,
        ev.perturbation_modes,
        &mut rng(seed.value),
    );
    let gamma = GammaParams::from_reference(reference.clone(), problem)?;
    let mut files = Vec::new();
    let fields = fields_dir(out);
    let write_fields = cfg.output.snapshots;
    let mut snaps = Vec::new();
    let evolution = evolve_and_monitor_with(&init, problem, &gamma, &opts, |step, t, s| {
        if write_fields {
            let path = write_snapshot(&fields, &format!("state-{step:08}"), &s.clone().into(), Some(t))?;
            snaps.push(rel(out, &path));
        }
        Ok(())
    })?;
    files.extend(snaps);
    let max_phase_deviation = if ev.perturbation == 0.0 && ev.scale == 1.0 && !evolution.diverged {
        Some(standing_wave_check(&reference, m.omega, problem, &opts)?)
    } else {
        None
    };
    let series = out.join("series.csv");
    write_series_csv(&series, &evolution)?;
    files.push(rel(out, &series));
    let status = if evolution.diverged {
        Status::Diverged
    } else {
        Status::Completed
    };
    let report = EvolveReport {
        command: "evolve",
        status,
        seed,
        model: problem.spec().clone(),
        reference: source,
        reference_energy: gamma.e0,
        reference_charge: gamma.c0,
        omega: m.omega,
        perturbation: ev.perturbation,
        scale: ev.scale,
        max_phase_deviation,
        evolution,
        files,
    };
    let path = out.join("report.json");
    write_json(&path, &report)?;
    Ok(Outcome { status, report: path })
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyRunReport {
    pub command: &'static str,
    pub status: Status,
    pub seed: SeedInfo,
    pub model: ModelSpec,
    #[serde(flatten)]
    pub suite: VerifyReport,
}

/// Static suites on synthesized fields, then conservation and
/// reversibility along the `[evolve]` run from the solved reference.
pub fn run_verify(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let seed = resolve_seed(cfg);
    let (_, problem) = build_problem(cfg)?;
    let mut r = rng(seed.value);
    let ev = &cfg.evolve;
    let opts = ev.options();
    let props = match cfg.model.equation {
        Equation::Nkg => {
            let mut props = nkg_static_suite(&problem, COERCIVITY_SAMPLES, &mut r)?;
            let (reference, _) = reference_state::<NkgState>(cfg, &problem, seed.value)?;
            let init = perturb(&reference, ev.scale, ev.perturbation, ev.perturbation_modes, &mut r);
            props.extend(dynamics_properties(&init, &problem, &opts)?);
            props
        }
        _ => {
            let mut props = nse_static_suite(&problem, COERCIVITY_SAMPLES, &mut r)?;
            let (reference, _) = reference_state::<RealField>(cfg, &problem, seed.value)?;
            let init = perturb(
                &reference.to_complex(),
                ev.scale,
                ev.perturbation,
                ev.perturbation_modes,
                &mut r,
            );
            props.extend(dynamics_properties(&init, &problem, &opts)?);
            props
        }
    };
    let suite = VerifyReport::new(props);
    let status = if suite.all_passed {
        Status::Passed
    } else {
        Status::Failed
    };
    let report = VerifyRunReport {
        command: "verify",
        status,
        seed,
        model: problem.spec().clone(),
        suite,
    };
    let path = out.join("report.json");
    write_json(&path, &report)?;
    Ok(Outcome { status, report: path })
}

#[derive(Clone, Debug, Serialize)]
pub struct TestfnReport {
    pub command: &'static str,
    pub status: Status,
    pub model: ModelSpec,
    pub hylomorphy: HylomorphyReport,
    /// `Λ` strictly decreases along the sweep.
    pub decreasing: bool,
    pub files: Vec<String>,
}

/// Test-function sweep and the hylomorphy verdict.
pub fn run_testfn(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let (_, problem) = build_problem(cfg)?;
    let hylo = hylomorphy_check(&problem, &cfg.hylomorphy)?;
    let sweep = out.join("sweep.csv");
    write_sweep_csv(&sweep, &hylo.sweep)?;
    let decreasing = hylo.sweep.windows(2).all(|w| w[1].lambda < w[0].lambda);
    let report = TestfnReport {
        command: "testfn",
        status: Status::Completed,
        model: problem.spec().clone(),
        hylomorphy: hylo,
        decreasing,
        files: vec![rel(out, &sweep)],
    };
    let path = out.join("report.json");
    write_json(&path, &report)?;
    Ok(Outcome {
        status: Status::Completed,
        report: path,
    })
}
