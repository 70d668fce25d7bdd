//! Seeded random fields used by the property suites and by perturbation runs.
//!
//! Fields are finite sums of low modes whose coefficients depend only on the
//! seed and the mode count, never on the resolution, so the same seed yields
//! the same continuum function on every grid.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Axis, ComplexField, Grid, RealField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn mode(axis: &Axis, k: usize, phase: bool, x: f64) -> f64 {
    let t = (x - axis.spec.min) / axis.length();
    if axis.is_periodic() {
        let arg = 2.0 * PI * k as f64 * t;
        if phase {
            arg.sin()
        } else {
            arg.cos()
        }
    } else {
        // sine modes vanish on both walls (and on the axis for radial grids)
        (PI * (k + 1) as f64 * t).sin()
    }
}

/// Random combination of the lowest `modes` modes per axis with
/// coefficients uniform in `[-1, 1]`, scaled to `∫u² = 1`.
pub fn band_limited(grid: &Arc<Grid>, modes: usize, rng: &mut impl Rng) -> RealField {
    let nd = grid.ndim();
    let total = modes.pow(nd as u32);
    let mut terms: Vec<(Vec<(usize, bool)>, f64)> = Vec::with_capacity(total);
    for t in 0..total {
        let mut ks = Vec::with_capacity(nd);
        let mut rest = t;
        for _ in 0..nd {
            ks.push((rest % modes, rng.gen::<bool>()));
            rest /= modes;
        }
        let c: f64 = rng.gen_range(-1.0..1.0);
        terms.push((ks, c));
    }
    // mode values per axis node, indexed [axis][2k + phase][node]
    let tables: Vec<Vec<Vec<f64>>> = (0..nd)
        .map(|a| {
            let ax = grid.axis(a);
            (0..2 * modes)
                .map(|kp| ax.coords.iter().map(|&x| mode(ax, kp / 2, kp % 2 == 1, x)).collect())
                .collect()
        })
        .collect();
    let mut u = RealField::zeros(grid);
    for (i, v) in u.values_mut().iter_mut().enumerate() {
        let idx: Vec<usize> = (0..nd).map(|a| grid.axis_index(i, a)).collect();
        *v = terms
            .iter()
            .map(|(ks, c)| {
                c * ks
                    .iter()
                    .enumerate()
                    .map(|(a, &(k, ph))| tables[a][2 * k + ph as usize][idx[a]])
                    .product::<f64>()
            })
            .sum();
    }
    let n = u.norm();
    if n > 0.0 {
        u.scale(1.0 / n);
    }
    u
}

/// Complex analogue of [`band_limited`].
pub fn band_limited_complex(grid: &Arc<Grid>, modes: usize, rng: &mut impl Rng) -> ComplexField {
    let re = band_limited(grid, modes, rng);
    let im = band_limited(grid, modes, rng);
    let mut z = ComplexField::from_values(
        grid,
        re.values()
            .iter()
            .zip(im.values())
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect(),
    )
    .expect("same grid");
    let n = z.norm();
    if n > 0.0 {
        z.scale(1.0 / n);
    }
    z
}

/// Band-limited field multiplied by a Gaussian envelope centred in the box,
/// so that it decays well inside the domain.
pub fn localized(grid: &Arc<Grid>, modes: usize, width: f64, rng: &mut impl Rng) -> RealField {
    let base = band_limited(grid, modes, rng);
    let center = grid.center();
    let cyl = grid.is_cylindrical();
    let mut out = base.clone();
    for (i, v) in out.values_mut().iter_mut().enumerate() {
        let x = grid.coords(i);
        let r2: f64 = x
            .iter()
            .enumerate()
            .map(|(a, xa)| {
                let c = if cyl && a == 0 { 0.0 } else { center[a] };
                (xa - c) * (xa - c)
            })
            .sum();
        *v *= (-r2 / (2.0 * width * width)).exp();
    }
    let n = out.norm();
    if n > 0.0 {
        out.scale(1.0 / n);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, AxisSpec, GridSpec};

    #[test]
    fn resolution_independent_samples() {
        let g1 = build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(0.0, 1.0, 64)])).unwrap();
        let g2 = build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(0.0, 1.0, 128)])).unwrap();
        let a = band_limited(&g1, 5, &mut rng(3));
        let b = band_limited(&g2, 5, &mut rng(3));
        for j in 0..64 {
            assert!((a.values()[j] - b.values()[2 * j]).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_norm() {
        let g = build_grid(GridSpec::cartesian(vec![
            AxisSpec::dirichlet(0.0, 1.0, 16),
            AxisSpec::periodic(0.0, 2.0, 16),
        ]))
        .unwrap();
        let u = band_limited(&g, 3, &mut rng(1));
        assert!((u.norm() - 1.0).abs() < 1e-12);
    }
}
