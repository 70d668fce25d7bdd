//! Run configuration: TOML with `[grid]`, `[model]`, `[minimize]`,
//! `[evolve]`, `[output]` and an optional `[hylomorphy]` section, plus the
//! top-level `deterministic` and `rng-seed` keys. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::EvolveOptions;
use crate::grid::{build_grid, Grid, GridKind, GridSpec};
use crate::hylomorphy::SweepParams;
use crate::minimize::{MinimizeOptions, StepRule};
use crate::model::{
    coercivity_constants, estimate_gn_constant, Coercivity, Equation, ModelSpec, Nonlinearity, Potential,
};
use crate::spectral::Symbol;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    #[serde(default = "yes")]
    pub deterministic: bool,
    /// Seed for every random draw; required to be reproducible, drawn from
    /// the OS and recorded in the report otherwise.
    #[serde(default)]
    pub rng_seed: Option<u64>,
    pub grid: GridSpec,
    pub model: ModelConfig,
    #[serde(default)]
    pub minimize: MinimizeConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub hylomorphy: SweepParams,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn yes() -> bool {
    true
}

/// `[model]`: a [`ModelSpec`] whose coercivity pair may be omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ModelConfig {
    pub equation: Equation,
    pub nonlinearity: Nonlinearity,
    #[serde(default)]
    pub potential: Option<Potential>,
    #[serde(default)]
    pub winding: i32,
    /// NSE: derived from an estimated Gagliardo–Nirenberg constant when
    /// absent. NKG: always `a = 0, s = 2`.
    #[serde(default)]
    pub coercivity: Option<Coercivity>,
    pub delta: f64,
}

/// Initial guess for the minimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "kind")]
pub enum InitSpec {
    /// Best member of the hylomorphy sweep.
    Auto,
    Plateau {
        radius: f64,
        s0: f64,
    },
    Torus {
        lambda: f64,
        s0: f64,
    },
    /// `A·exp(−|x − x_c|²/(2w²))` about the box centre (the axis on
    /// cylindrical grids).
    Gaussian {
        amplitude: f64,
        width: f64,
    },
    /// Band-limited random field with the given `L²` norm.
    Random {
        modes: usize,
        norm: f64,
    },
    Snapshot {
        path: PathBuf,
    },
}

/// `[minimize]`: [`MinimizeOptions`] plus the initial guess.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct MinimizeConfig {
    #[serde(default = "d_max_iters")]
    pub max_iters: usize,
    #[serde(default = "d_tol")]
    pub gradient_tolerance: f64,
    #[serde(default)]
    pub absolute_tolerance: Option<f64>,
    #[serde(default = "d_rule")]
    pub step_rule: StepRule,
    #[serde(default = "d_step")]
    pub initial_step: f64,
    #[serde(default)]
    pub continuation_deltas: Option<Vec<f64>>,
    #[serde(default = "yes")]
    pub preconditioned: bool,
    #[serde(default = "d_init")]
    pub init: InitSpec,
    /// NKG: frequency `ω₀` of the initial pair `(u, −iω₀u)`; the sweep's
    /// `β` when absent.
    #[serde(default)]
    pub init_omega: Option<f64>,
    /// Re-solve the constrained problem at the free minimizer's charge.
    #[serde(default = "yes")]
    pub cross_check: bool,
}

fn d_max_iters() -> usize {
    MinimizeOptions::default().max_iters
}
fn d_tol() -> f64 {
    MinimizeOptions::default().gradient_tolerance
}
fn d_rule() -> StepRule {
    MinimizeOptions::default().step_rule
}
fn d_step() -> f64 {
    MinimizeOptions::default().initial_step
}
fn d_init() -> InitSpec {
    InitSpec::Auto
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        Self {
            max_iters: d_max_iters(),
            gradient_tolerance: d_tol(),
            absolute_tolerance: None,
            step_rule: d_rule(),
            initial_step: d_step(),
            continuation_deltas: None,
            preconditioned: true,
            init: InitSpec::Auto,
            init_omega: None,
            cross_check: true,
        }
    }
}

impl MinimizeConfig {
    pub fn options(&self, seed: u64) -> MinimizeOptions {
        MinimizeOptions {
            max_iters: self.max_iters,
            gradient_tolerance: self.gradient_tolerance,
            absolute_tolerance: self.absolute_tolerance,
            step_rule: self.step_rule,
            initial_step: self.initial_step,
            rng_seed: seed,
            continuation_deltas: self.continuation_deltas.clone(),
            lambda0_proxy: None,
            preconditioned: self.preconditioned,
        }
    }
}

/// `[evolve]`: [`EvolveOptions`] plus the initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct EvolveConfig {
    #[serde(default = "d_t_final")]
    pub t_final: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "d_sample")]
    pub sample_every: usize,
    #[serde(default = "d_symbol")]
    pub symbol: Symbol,
    #[serde(default)]
    pub snapshot_every: Option<usize>,
    /// Snapshot of the reference minimizer; solved for when absent.
    #[serde(default)]
    pub reference: Option<PathBuf>,
    /// Relative `L²` size of the noise added to each component.
    #[serde(default = "d_perturbation")]
    pub perturbation: f64,
    #[serde(default = "d_modes")]
    pub perturbation_modes: usize,
    /// Multiplies the reference before the noise is added.
    #[serde(default = "d_scale")]
    pub scale: f64,
}

fn d_t_final() -> f64 {
    EvolveOptions::default().t_final
}
fn d_sample() -> usize {
    EvolveOptions::default().sample_every
}
fn d_symbol() -> Symbol {
    EvolveOptions::default().symbol
}
fn d_perturbation() -> f64 {
    0.01
}
fn d_modes() -> usize {
    8
}
fn d_scale() -> f64 {
    1.0
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            t_final: d_t_final(),
            dt: None,
            sample_every: d_sample(),
            symbol: d_symbol(),
            snapshot_every: None,
            reference: None,
            perturbation: d_perturbation(),
            perturbation_modes: d_modes(),
            scale: d_scale(),
        }
    }
}

impl EvolveConfig {
    pub fn options(&self) -> EvolveOptions {
        EvolveOptions {
            t_final: self.t_final,
            dt: self.dt,
            sample_every: self.sample_every,
            symbol: self.symbol,
            snapshot_every: self.snapshot_every,
        }
    }
}

/// `[output]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct OutputConfig {
    /// Used when `--out` is not given.
    #[serde(default = "d_dir")]
    pub dir: PathBuf,
    /// Write field snapshots under `fields/`.
    #[serde(default = "yes")]
    pub snapshots: bool,
}

fn d_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: d_dir(),
            snapshots: true,
        }
    }
}

impl RunConfig {
    /// Parses and validates a config file; relative paths inside it resolve
    /// against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without validating or resolving paths.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Cross-field checks that do not need any numerical work.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let grid = Grid::new(self.grid.clone())?;
        self.model.provisional_spec().validate(&grid)?;
        if self.model.equation == Equation::NseVortex && self.grid.kind != GridKind::Cylindrical {
            return Err(Error::Config("nse-vortex requires a cylindrical grid".into()));
        }
        self.minimize.options(0).validate()?;
        if let Some(w) = self.minimize.init_omega {
            if self.model.equation != Equation::Nkg {
                return Err(Error::Config("init-omega is only meaningful for nkg".into()));
            }
            if !(w.abs() < self.model.nonlinearity.mass.abs()) {
                return Err(Error::Config("init-omega must satisfy |omega| < m".into()));
            }
        }
        match &self.minimize.init {
            InitSpec::Torus { .. } if !grid.is_cylindrical() => {
                return Err(Error::Config("torus init needs a cylindrical grid".into()));
            }
            InitSpec::Snapshot { path } => self.check_file(path, "minimize.init")?,
            _ => {}
        }
        self.evolve.options().validate()?;
        if let Some(r) = &self.evolve.reference {
            self.check_file(r, "evolve.reference")?;
        }
        if !(self.evolve.perturbation >= 0.0 && self.evolve.scale.is_finite()) {
            return Err(Error::Config(
                "evolve perturbation must be >= 0 and scale finite".into(),
            ));
        }
        if self.evolve.perturbation_modes == 0 {
            return Err(Error::Config("evolve perturbation-modes must be >= 1".into()));
        }
        if !(self.hylomorphy.s0 > 0.0) {
            return Err(Error::Config("hylomorphy s0 must be > 0".into()));
        }
        Ok(())
    }

    fn check_file(&self, path: &Path, key: &str) -> Result<()> {
        let full = self.resolve(path);
        if !full.is_file() {
            return Err(Error::Config(format!("{key}: file {} not found", full.display())));
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>> {
        build_grid(self.grid.clone())
    }
}

impl ModelConfig {
    /// The spec with a placeholder coercivity pair, enough for validation.
    fn provisional_spec(&self) -> ModelSpec {
        let coercivity = match (self.equation, self.coercivity) {
            (Equation::Nkg, c) => c.unwrap_or(Coercivity { a: 0.0, s: 2.0 }),
            (_, Some(c)) => c,
            (_, None) => Coercivity { a: 1.0, s: 2.0 },
        };
        ModelSpec {
            equation: self.equation,
            nonlinearity: self.nonlinearity.clone(),
            potential: self.potential.clone(),
            winding: self.winding,
            coercivity,
            delta: self.delta,
        }
    }

    /// Completes the spec, estimating the coercivity pair when needed.
    pub fn to_spec(&self, grid: &Arc<Grid>) -> Result<ModelSpec> {
        let mut spec = self.provisional_spec();
        spec.validate(grid)?;
        if spec.equation.is_nse() && self.coercivity.is_none() {
            let n = grid.space_dim();
            let p = spec.nonlinearity.exponent;
            let b_p = estimate_gn_constant(n, p, grid)?;
            let k = coercivity_constants(n, p, spec.nonlinearity.coefficient, b_p)?;
            spec.coercivity = Coercivity { a: k.a, s: k.s };
            spec.validate(grid)?;
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NSE: &str = r#"
rng-seed = 3

[grid]
kind = "cartesian"
axes = [{ min = -20.0, max = 20.0, points = 256, boundary = "periodic" }]

[model]
equation = "nse"
delta = 0.01
nonlinearity = { family = "nse-power", coefficient = 2.0, exponent = 4.0 }
potential = { family = "constant", value = 1.0 }
coercivity = { a = 1.0, s = 3.0 }

[minimize]
init = { kind = "plateau", radius = 2.5, s0 = 1.0 }
"#;

    #[test]
    fn parses_and_roundtrips() {
        let cfg = RunConfig::parse(NSE).unwrap();
        cfg.validate().unwrap();
        assert!(cfg.deterministic);
        assert_eq!(cfg.rng_seed, Some(3));
        assert_eq!(cfg.minimize.init, InitSpec::Plateau { radius: 2.5, s0: 1.0 });
        let back = RunConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = NSE.replace("delta = 0.01", "delta = 0.01\ncolour = 1");
        assert!(matches!(RunConfig::parse(&bad), Err(Error::Config(_))));
        let bad = NSE.replace("rng-seed = 3", "rng-seed = 3\nverbose = true");
        assert!(matches!(RunConfig::parse(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn cross_field_checks() {
        let vortex = NSE.replace("equation = \"nse\"", "equation = \"nse-vortex\"\nwinding = 1");
        let cfg = RunConfig::parse(&vortex).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(m)) if m.contains("cylindrical")));

        let p8 = NSE.replace("exponent = 4.0", "exponent = 8.0");
        let cfg = RunConfig::parse(&p8).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Domain(m)) if m.contains("W2")));

        let snap = NSE.replace(
            "init = { kind = \"plateau\", radius = 2.5, s0 = 1.0 }",
            "init = { kind = \"snapshot\", path = \"missing.snap\" }",
        );
        let cfg = RunConfig::parse(&snap).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(m)) if m.contains("missing.snap")));
    }

    #[test]
    fn nse_coercivity_is_derived_when_absent() {
        let text = NSE.replace("coercivity = { a = 1.0, s = 3.0 }\n", "");
        let cfg = RunConfig::parse(&text).unwrap();
        cfg.validate().unwrap();
        let g = cfg.build_grid().unwrap();
        let spec = cfg.model.to_spec(&g).unwrap();
        assert!(spec.coercivity.a > 0.0);
        assert!((spec.coercivity.s - 3.0).abs() < 1e-12);
    }
}
