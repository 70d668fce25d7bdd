//! Test-function sweeps: the hylomorphy verdict for several models,
//! including one (linear NKG) where it must fail.
//!
//! cargo run --release --example hylomorphy_sweep

use hylomorph::functionals::Problem;
use hylomorph::grid::{build_grid, AxisSpec, GridSpec};
use hylomorph::hylomorphy::{hylomorphy_check, SweepParams};
use hylomorph::model::{Coercivity, ModelSpec, Nonlinearity, Potential};

fn main() -> hylomorph::Result<()> {
    let grid = build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(-20.0, 20.0, 1024)]))?;
    let models = [
        (
            "NSE cubic",
            ModelSpec::nse(2.0, 4.0, Potential::constant(1.0), Coercivity { a: 1.0, s: 3.0 }, 0.01),
        ),
        (
            "NKG cubic",
            ModelSpec::nkg(Nonlinearity::nkg_power(1.0, 1.0, 4.0), 0.01),
        ),
        (
            "NKG linear",
            ModelSpec::nkg(Nonlinearity::nkg_power(1.0, 0.0, 4.0), 0.01),
        ),
    ];
    for (name, spec) in models {
        let rep = hylomorphy_check(&Problem::new(spec, &grid)?, &SweepParams::default())?;
        println!(
            "{name}: verdict {}, lambda0 proxy {:.5}",
            rep.verdict, rep.lambda0_proxy
        );
        for p in &rep.sweep {
            println!("    R = {:6.2}  Lambda = {:.6}", p.parameter, p.lambda);
        }
    }
    Ok(())
}
