//! Cubic NSE ground state on the line at fixed charge, compared with the
//! `sech` profile it should reproduce.
//!
//! cargo run --release --example nse_ground_state

use hylomorph::functionals::Problem;
use hylomorph::grid::{build_grid, AxisSpec, GridSpec};
use hylomorph::hylomorphy::plateau_test_function;
use hylomorph::minimize::{minimize_constrained, MinimizeOptions};
use hylomorph::model::{Coercivity, ModelSpec, Potential};

fn main() -> hylomorph::Result<()> {
    let grid = build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(-20.0, 20.0, 2048)]))?;
    // V = 1, W(s) = -s^4/2
    let spec = ModelSpec::nse(2.0, 4.0, Potential::constant(1.0), Coercivity { a: 1.0, s: 3.0 }, 0.01);
    let problem = Problem::new(spec, &grid)?;
    let init = plateau_test_function(2.5, 1.0, &grid)?;
    let opts = MinimizeOptions {
        gradient_tolerance: 1e-9,
        ..Default::default()
    };
    let r = minimize_constrained(&problem, 2.0, &init, &opts)?;

    println!("iterations     {}", r.iterations);
    println!("converged      {} (stalled {})", r.converged, r.stalled);
    println!("E              {:.8}  (exact 5/3)", r.e_delta);
    println!("omega          {:.8}  (exact 1/2)", r.omega);
    println!("EL residual    {:.2e}", r.el_residual);

    let u = r.minimizer.values();
    let (peak, &height) = u.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let x0 = grid.coords(peak)[0];
    println!("peak           {height:.6} at x = {x0:.4}");
    for dx in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let i = peak + (dx / grid.spacings()[0]).round() as usize;
        let x = grid.coords(i)[0] - x0;
        println!("  u({x:5.2}) = {:.6}   sech = {:.6}", u[i], 1.0 / x.cosh());
    }
    Ok(())
}
