//! NKG standing wave: constrained minimization at `C = 1.92`, then a check
//! that the minimizer rotates rigidly in phase under the leapfrog flow.
//!
//! cargo run --release --example nkg_standing_wave

use hylomorph::evolve::{standing_wave_check, EvolveOptions};
use hylomorph::functionals::{nkg_profile_residual, Problem};
use hylomorph::grid::{build_grid, AxisSpec, GridSpec, NkgState, RealField};
use hylomorph::minimize::{minimize_constrained, MinimizeOptions};
use hylomorph::model::{ModelSpec, Nonlinearity};

fn main() -> hylomorph::Result<()> {
    let grid = build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(-30.0, 30.0, 2048)]))?;
    // m = 1, W(s) = s^2/2 - s^4/4
    let problem = Problem::new(ModelSpec::nkg(Nonlinearity::nkg_power(1.0, 1.0, 4.0), 0.01), &grid)?;
    let u = RealField::from_fn(&grid, |x| 0.8 * (-x[0] * x[0] / 8.0).exp());
    let opts = MinimizeOptions {
        gradient_tolerance: 1e-9,
        ..Default::default()
    };
    let r = minimize_constrained(&problem, 1.92, &NkgState::standing_wave(&u, 0.75), &opts)?;
    println!("E              {:.6}  (exact 1.824)", r.e_delta);
    println!("omega          {:.6}  (exact 0.8)", r.omega);
    println!(
        "profile resid. {:.2e}",
        nkg_profile_residual(&r.minimizer, &problem, r.omega)?
    );

    let evolve = EvolveOptions {
        t_final: 10.0,
        dt: Some(1e-3),
        sample_every: 100,
        ..Default::default()
    };
    for (label, omega) in [("omega", r.omega), ("omega + 0.1", r.omega + 0.1)] {
        let dev = standing_wave_check(&r.minimizer, omega, &problem, &evolve)?;
        println!("max |psi(t) - e^(-i w t) psi0| / |psi0| with w = {label}: {dev:.3e}");
    }
    Ok(())
}
