//! Reduced `l = 1` vortex on an axisymmetric grid, lifted to 3D to check the
//! phase winding and the angular momentum.
//!
//! cargo run --release --example vortex

use std::f64::consts::PI;

use hylomorph::evolve::{lift_vortex, phase_winding};
use hylomorph::functionals::Problem;
use hylomorph::grid::{build_grid, AxisSpec, GridSpec};
use hylomorph::hylomorphy::torus_test_function;
use hylomorph::minimize::{minimize_free, MinimizeOptions};
use hylomorph::model::{coercivity_constants, estimate_gn_constant, Coercivity, ModelSpec, Potential};

fn main() -> hylomorph::Result<()> {
    let grid = build_grid(GridSpec::cylindrical(24.0, 96, AxisSpec::periodic(-12.0, 12.0, 192)))?;
    let b_p = estimate_gn_constant(3, 3.0, &grid)?;
    let k = coercivity_constants(3, 3.0, 30.0, b_p)?;
    println!(
        "Gagliardo-Nirenberg estimate {b_p:.4}, coercivity a = {:.4}, s = {}",
        k.a, k.s
    );

    let spec = ModelSpec::vortex(30.0, 3.0, Potential::axial(0.2), 1, Coercivity { a: k.a, s: k.s }, 0.01);
    let problem = Problem::new(spec, &grid)?;
    let init = torus_test_function(6.0, 0.05, &grid)?;
    let opts = MinimizeOptions {
        max_iters: 5000,
        ..Default::default()
    };
    let r = minimize_free(&problem, &init, &opts)?;
    println!(
        "iterations {}, converged {}, EL residual {:.2e}",
        r.iterations, r.converged, r.el_residual
    );
    println!("charge {:.6}, omega {:.6}", r.c_delta, r.omega);

    let target = build_grid(GridSpec::cartesian(vec![
        AxisSpec::dirichlet(-12.0, 12.0, 64),
        AxisSpec::dirichlet(-12.0, 12.0, 64),
        AxisSpec::periodic(-12.0, 12.0, 192),
    ]))?;
    let lifted = lift_vortex(&r.minimizer, 1, r.omega, &target)?;
    let u = r.minimizer.values();
    let peak = (0..u.len()).max_by(|&i, &j| u[i].total_cmp(&u[j])).unwrap();
    let at = grid.coords(peak);
    let winding = phase_winding(&lifted.psi, at[0] / 2f64.sqrt(), at[1])?;
    println!("ring at r = {:.3}, x3 = {:.3}", at[0], at[1]);
    println!("phase winding / 2pi = {:.12}", winding / (2.0 * PI));
    println!("M3 = {:.6}, -l*C = {:.6}", lifted.m3, -r.c_delta);
    Ok(())
}
