//! Soliton in a periodic lattice potential: free minimization of `J_delta`
//! followed by a constrained solve at the charge it selects.
//!
//! cargo run --release --example lattice_soliton

use hylomorph::functionals::Problem;
use hylomorph::grid::{build_grid, AxisSpec, GridSpec};
use hylomorph::hylomorphy::{hylomorphy_check, plateau_test_function, SweepParams};
use hylomorph::minimize::{aligned_relative_distance, minimize_constrained, minimize_free, MinimizeOptions};
use hylomorph::model::{Coercivity, ModelSpec, Potential};

fn main() -> hylomorph::Result<()> {
    let grid = build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(-32.0, 32.0, 2048)]))?;
    let lattice = Potential::lattice(0.4, 1.2, Some(vec![vec![4.0]]));
    let spec = ModelSpec::nse(
        2.0,
        4.0,
        lattice,
        Coercivity {
            a: 0.6736111111111112,
            s: 3.0,
        },
        0.01,
    );
    let problem = Problem::new(spec, &grid)?;
    let rep = hylomorphy_check(&problem, &SweepParams::default())?;
    println!("hylomorphy verdict {}", rep.verdict);

    let init = plateau_test_function(rep.best_parameter, 1.0, &grid)?;
    let opts = MinimizeOptions {
        gradient_tolerance: 1e-9,
        ..Default::default()
    };
    let free = minimize_free(&problem, &init, &opts)?;
    println!(
        "free:        C = {:.6}  E = {:.8}  omega = {:.6}",
        free.c_delta, free.e_delta, free.omega
    );
    let cons = minimize_constrained(&problem, free.c_delta, &init, &opts)?;
    println!(
        "constrained: C = {:.6}  E = {:.8}  omega = {:.6}",
        cons.c_delta, cons.e_delta, cons.omega
    );
    // lattice translations are multiples of the period, not single cells
    let cells = problem.spec().translation_cells(&grid);
    let d = aligned_relative_distance(&free.minimizer, &cons.minimizer, &cells);
    println!("aligned profile distance {d:.2e}");
    Ok(())
}
