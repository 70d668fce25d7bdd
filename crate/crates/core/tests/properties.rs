use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use hylomorph::evolve::perturb;
use hylomorph::functionals::{charge, energy, evaluate_all, first_variation, functional_value, Problem, Which};
use hylomorph::grid::{build_grid, AxisSpec, ComplexField, Grid, GridSpec, NkgState, RealField};
use hylomorph::io::{read_snapshot, write_snapshot};
use hylomorph::model::{Coercivity, ModelSpec, Nonlinearity, Potential};
use hylomorph::sampling::{band_limited, band_limited_complex, rng};
use hylomorph::state::State;

fn line(n: usize) -> Arc<Grid> {
    build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(-10.0, 10.0, n)])).unwrap()
}

fn nse(g: &Arc<Grid>) -> Problem {
    Problem::new(
        ModelSpec::nse(2.0, 4.0, Potential::constant(1.0), Coercivity { a: 1.0, s: 3.0 }, 0.01),
        g,
    )
    .unwrap()
}

fn nkg(g: &Arc<Grid>) -> Problem {
    let nl = Nonlinearity::nkg_power(1.0, 1.0, 4.0).with_stabilizer(0.1, 6.0);
    Problem::new(ModelSpec::nkg(nl, 0.01), g).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn bump(g: &Arc<Grid>, centre: f64, amp: f64) -> RealField {
    RealField::from_fn(g, |x| {
        let r = (x[0] - centre).abs();
        if r < 1.5 {
            amp * (0.5 * std::f64::consts::PI * r / 1.5).cos().powi(2)
        } else {
            0.0
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn nse_charge_is_two_homogeneous(seed in any::<u64>(), lambda in 0.01f64..100.0) {
        let g = line(128);
        let p = nse(&g);
        let u = band_limited(&g, 6, &mut rng(seed));
        let c1 = charge(&u, &p).unwrap();
        let c2 = charge(&u.scaled(lambda), &p).unwrap();
        prop_assert!(rel(c2, lambda * lambda * c1) < 1e-12);
    }

    #[test]
    fn nse_energy_is_phase_invariant(seed in any::<u64>(), theta in 0.0f64..6.3) {
        let g = line(128);
        let p = nse(&g);
        let psi = band_limited_complex(&g, 6, &mut rng(seed));
        let mut rotated = psi.clone();
        rotated.rotate_phase(theta);
        prop_assert!(rel(energy(&psi, &p).unwrap(), energy(&rotated, &p).unwrap()) < 1e-12);
        prop_assert!(rel(charge(&psi, &p).unwrap(), charge(&rotated, &p).unwrap()) < 1e-12);
    }

    #[test]
    fn real_and_complex_embeddings_agree(seed in any::<u64>()) {
        let g = line(128);
        let p = nse(&g);
        let u = band_limited(&g, 6, &mut rng(seed));
        prop_assert!(rel(energy(&u, &p).unwrap(), energy(&u.to_complex(), &p).unwrap()) < 1e-12);
    }

    #[test]
    fn periodic_shift_preserves_functionals(seed in any::<u64>(), cells in -64isize..64) {
        let g = line(128);
        let p = nse(&g);
        let u = band_limited(&g, 6, &mut rng(seed));
        let v = u.shift(0, cells).unwrap();
        prop_assert!(rel(energy(&u, &p).unwrap(), energy(&v, &p).unwrap()) < 1e-12);
        prop_assert!(rel(charge(&u, &p).unwrap(), charge(&v, &p).unwrap()) < 1e-12);
    }

    #[test]
    fn j_delta_decomposes(seed in any::<u64>(), amp in 0.1f64..3.0) {
        let g = line(128);
        let p = nse(&g);
        let u = band_limited(&g, 6, &mut rng(seed)).scaled(amp);
        let f = evaluate_all(&u, &p).unwrap();
        let c = f.charge.abs();
        prop_assert!(rel(f.lambda.unwrap(), f.energy / c) < 1e-14);
        prop_assert!(rel(f.phi, f.energy + 2.0 * c.powi(3)) < 1e-14);
        prop_assert!(rel(f.j_delta.unwrap(), f.energy / c + 0.01 * f.phi) < 1e-14);
    }

    #[test]
    fn disjoint_supports_split_additively(a in 0.1f64..2.0, b in 0.1f64..2.0, sep in 3.5f64..8.0) {
        let g = line(256);
        let p = nse(&g);
        let (u, w) = (bump(&g, -0.5 * sep, a), bump(&g, 0.5 * sep, b));
        for which in [Which::E, Which::C] {
            let f = |s: &RealField| functional_value(s, &p, which).unwrap();
            let joint = f(&u.add(&w));
            prop_assert!((joint - f(&u) - f(&w)).abs() <= 1e-12 * (joint.abs() + 1.0));
        }
    }

    #[test]
    fn nkg_standing_wave_charge(seed in any::<u64>(), omega in -0.95f64..0.95) {
        let g = line(128);
        let p = nkg(&g);
        let u = band_limited(&g, 6, &mut rng(seed));
        let c = charge(&NkgState::standing_wave(&u, omega), &p).unwrap();
        let oracle = -omega * u.values().iter().map(|v| v * v).sum::<f64>() * g.spacings()[0];
        prop_assert!((c - oracle).abs() <= 1e-12 * oracle.abs().max(1e-12));
    }

    #[test]
    fn energy_gradient_matches_central_difference(seed in any::<u64>()) {
        let g = line(128);
        let p = nse(&g);
        let mut r = rng(seed);
        let u = band_limited(&g, 6, &mut r);
        let v = band_limited(&g, 6, &mut r);
        let grad = first_variation(&u, &p, Which::E).unwrap().gradient;
        let h = 1e-5;
        let e = |t: f64| {
            let mut w = u.clone();
            w.axpy(t, &v);
            energy(&w, &p).unwrap()
        };
        let fd = (e(h) - e(-h)) / (2.0 * h);
        prop_assert!((fd - grad.dot(&v)).abs() <= 1e-6 * grad.norm() * v.norm());
    }

    #[test]
    fn perturbation_has_the_requested_size(seed in any::<u64>(), eps in 0.0f64..0.1) {
        let g = line(128);
        let psi = band_limited_complex(&g, 6, &mut rng(seed));
        let out: ComplexField = perturb(&psi, 1.0, eps, 8, &mut rng(seed ^ 1));
        let d = out.sub(&psi).norm() / psi.norm();
        prop_assert!((d - eps).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn snapshots_roundtrip_bit_for_bit(seed in any::<u64>(), complex in any::<bool>()) {
        let g = line(64);
        let mut r = rng(seed);
        let state = if complex {
            let psi = band_limited_complex(&g, 5, &mut r);
            let hat = psi.map(|z| z * Complex64::new(0.0, -0.3));
            State::Nkg(NkgState { psi, psi_hat: hat })
        } else {
            State::Real(band_limited(&g, 5, &mut r))
        };
        let dir = tempfile::tempdir().unwrap();
        let path = write_snapshot(dir.path(), "s", &state, Some(1.5)).unwrap();
        prop_assert_eq!(read_snapshot(&path).unwrap(), state);
    }
}
