//! Property suites for an NSE and an NKG model: gradients against finite
//! differences, splitting, homogeneity and coercivity.
//!
//! cargo run --release --example verify_hypotheses

use hylomorph::functionals::Problem;
use hylomorph::grid::{build_grid, AxisSpec, GridSpec};
use hylomorph::model::{Coercivity, ModelSpec, Nonlinearity, Potential};
use hylomorph::sampling::rng;
use hylomorph::verify::{nkg_static_suite, nse_static_suite, VerifyReport};

fn main() -> hylomorph::Result<()> {
    let grid = build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(-20.0, 20.0, 1024)]))?;
    let nse = Problem::new(
        ModelSpec::nse(2.0, 4.0, Potential::constant(1.0), Coercivity { a: 1.0, s: 3.0 }, 0.01),
        &grid,
    )?;
    let nkg = Problem::new(ModelSpec::nkg(Nonlinearity::nkg_power(1.0, 1.0, 4.0), 0.01), &grid)?;
    let mut r = rng(0);
    for (name, props) in [
        ("NSE", nse_static_suite(&nse, 200, &mut r)?),
        ("NKG", nkg_static_suite(&nkg, 200, &mut r)?),
    ] {
        let report = VerifyReport::new(props);
        println!("{name}: all passed = {}", report.all_passed);
        for p in &report.properties {
            let mark = if p.passed { "ok  " } else { "FAIL" };
            println!(
                "  {mark} {:<40} {:>12.3e}  ({:?} {:e})",
                p.name, p.value, p.comparison, p.bound
            );
        }
    }
    Ok(())
}
