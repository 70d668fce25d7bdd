//! Orbital stability: a 1% perturbation of the NSE ground state stays close
//! to the orbit of the reference, and the Lyapunov function stays put.
//!
//! cargo run --release --example orbital_stability

use hylomorph::evolve::{evolve_and_monitor, perturb, EvolveOptions, GammaParams};
use hylomorph::functionals::Problem;
use hylomorph::grid::{build_grid, AxisSpec, GridSpec};
use hylomorph::hylomorphy::plateau_test_function;
use hylomorph::minimize::{minimize_constrained, MinimizeOptions};
use hylomorph::model::{Coercivity, ModelSpec, Potential};
use hylomorph::sampling::rng;

fn main() -> hylomorph::Result<()> {
    let grid = build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(-20.0, 20.0, 1024)]))?;
    let spec = ModelSpec::nse(2.0, 4.0, Potential::constant(1.0), Coercivity { a: 1.0, s: 3.0 }, 0.01);
    let problem = Problem::new(spec, &grid)?;
    let init = plateau_test_function(2.5, 1.0, &grid)?;
    let r = minimize_constrained(&problem, 2.0, &init, &MinimizeOptions::default())?;
    let reference = r.minimizer.to_complex();

    let start = perturb(&reference, 1.0, 0.01, 8, &mut rng(7));
    let gamma = GammaParams::from_reference(reference, &problem)?;
    let opts = EvolveOptions {
        t_final: 20.0,
        dt: Some(1e-3),
        sample_every: 1000,
        ..Default::default()
    };
    let rep = evolve_and_monitor(&start, &problem, &gamma, &opts)?;
    println!("    t        E             C          sqrt(V)   orbital");
    for i in 0..rep.times.len() {
        println!(
            "{:6.2}  {:.10}  {:.10}  {:.2e}  {:.4e}",
            rep.times[i],
            rep.e_series[i],
            rep.c_series[i],
            rep.v_series[i].sqrt(),
            rep.orbital_distance_series[i]
        );
    }
    println!(
        "max energy drift {:.2e}, max charge drift {:.2e}",
        rep.max_energy_drift, rep.max_charge_drift
    );
    println!("Lyapunov bound holds: {}", rep.lyapunov_ok);
    Ok(())
}
