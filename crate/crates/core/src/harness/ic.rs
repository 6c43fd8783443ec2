use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::HarnessError;
use crate::spectral::{Field, GridSpec};

fn get(
    params: &BTreeMap<String, f64>,
    key: &str,
    default: Option<f64>,
) -> Result<f64, HarnessError> {
    params
        .get(key)
        .copied()
        .or(default)
        .ok_or_else(|| HarnessError::Config(format!("initial condition needs `ic.{key}`")))
}

/// Node coordinates `origin + i·h`.
fn from_fn(grid: &Arc<GridSpec>, origin: &[f64], f: impl Fn(&[f64]) -> f64) -> Field {
    let mut shifted = vec![0.0; origin.len()];
    Field::from_fn(grid, |x| {
        for ((s, xi), o) in shifted.iter_mut().zip(x).zip(origin) {
            *s = xi + o;
        }
        f(&shifted)
    })
}

/// Uniform samples on `[-1, 1]` from a seeded ChaCha stream, one per node in
/// row-major order.
pub fn uniform_noise(grid: &Arc<GridSpec>, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    Field::new(grid.clone(), values).expect("one sample per node")
}

/// Evaluates a named initial condition.
///
/// * `cosine_product`: `amplitude · Π_a cos(2π·mode·x_a / L_a)`.
/// * `flower_tanh`: `tanh((radius + petal·cos(lobes·θ) - r) / (√2ε))` with
///   `θ = atan2(y, x)`; defaults `radius = 1.7`, `petal = 1.2`, `lobes = 6`.
/// * `sphere_tanh`: `tanh((|x - c| - radius) / (√2ε))`, centre defaults 0.5.
/// * `two_spheres_tanh`: `1 - Σ_i tanh((|x - c_i| - radius) / (√2ε))`.
/// * `random_uniform`: `mean + amplitude·U[-1, 1]`.
/// * `pfc_random`: `mean + amplitude·(U - ⟨U⟩)`, exact discrete mean.
pub fn make_initial_condition(
    name: &str,
    params: &BTreeMap<String, f64>,
    grid: &Arc<GridSpec>,
    origin: &[f64],
    seed: u64,
) -> Result<Field, HarnessError> {
    let axes = grid.axes();
    if origin.len() != axes {
        return Err(HarnessError::Config(
            "origin must have one entry per axis".into(),
        ));
    }
    let extents = grid.extents().to_vec();
    Ok(match name {
        "cosine_product" => {
            let amp = get(params, "amplitude", Some(1.0))?;
            let mode = get(params, "mode", Some(1.0))?;
            from_fn(grid, origin, |x| {
                amp * x
                    .iter()
                    .zip(&extents)
                    .map(|(xi, l)| (2.0 * PI * mode * xi / l).cos())
                    .product::<f64>()
            })
        }
        "flower_tanh" => {
            if axes != 2 {
                return Err(HarnessError::Config("flower_tanh needs a 2D grid".into()));
            }
            let eps = get(params, "epsilon", None)?;
            let radius = get(params, "radius", Some(1.7))?;
            let petal = get(params, "petal", Some(1.2))?;
            let lobes = get(params, "lobes", Some(6.0))?;
            from_fn(grid, origin, |x| {
                let theta = x[1].atan2(x[0]);
                let r = x[0].hypot(x[1]);
                ((radius + petal * (lobes * theta).cos() - r) / (SQRT_2 * eps)).tanh()
            })
        }
        "sphere_tanh" => {
            let eps = get(params, "epsilon", None)?;
            let radius = get(params, "radius", None)?;
            let centre: Vec<f64> = ["cx", "cy", "cz"][..axes]
                .iter()
                .map(|k| get(params, k, Some(0.5)))
                .collect::<Result<_, _>>()?;
            from_fn(grid, origin, |x| {
                ((dist(x, &centre) - radius) / (SQRT_2 * eps)).tanh()
            })
        }
        "two_spheres_tanh" => {
            let eps = get(params, "epsilon", None)?;
            let radius = get(params, "radius", None)?;
            let c1: Vec<f64> = ["x1", "y1", "z1"][..axes]
                .iter()
                .map(|k| get(params, k, None))
                .collect::<Result<_, _>>()?;
            let c2: Vec<f64> = ["x2", "y2", "z2"][..axes]
                .iter()
                .map(|k| get(params, k, None))
                .collect::<Result<_, _>>()?;
            from_fn(grid, origin, |x| {
                1.0 - [&c1, &c2]
                    .iter()
                    .map(|c| ((dist(x, c) - radius) / (SQRT_2 * eps)).tanh())
                    .sum::<f64>()
            })
        }
        "random_uniform" => {
            let amp = get(params, "amplitude", Some(1.0))?;
            let mean = get(params, "mean", Some(0.0))?;
            uniform_noise(grid, seed).map(|u| mean + amp * u)
        }
        "pfc_random" => {
            let mean = get(params, "mean", None)?;
            let amp = get(params, "amplitude", Some(0.01))?;
            let noise = uniform_noise(grid, seed);
            let centred = noise.mean();
            noise.map(|u| mean + amp * (u - centred))
        }
        other => {
            return Err(HarnessError::Config(format!(
                "unknown initial condition `{other}`"
            )))
        }
    })
}

fn dist(x: &[f64], c: &[f64]) -> f64 {
    x.iter()
        .zip(c)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;

    fn p(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn cosine_product_amplitude() {
        let grid = make_grid(&[128, 128], &[2.0 * PI, 2.0 * PI]).unwrap();
        let f = make_initial_condition(
            "cosine_product",
            &p(&[("amplitude", 0.001)]),
            &grid,
            &[0.0, 0.0],
            0,
        )
        .unwrap();
        assert!((f.max_abs() - 0.001).abs() < 1e-18);
        assert!((f.values()[1] - 0.001 * (2.0 * PI / 128.0).cos()).abs() < 1e-18);
    }

    #[test]
    fn pfc_random_has_exact_mean() {
        let grid = make_grid(&[64, 64], &[100.0, 100.0]).unwrap();
        for seed in [0, 1, 12345] {
            let f = make_initial_condition(
                "pfc_random",
                &p(&[("mean", 0.25)]),
                &grid,
                &[0.0, 0.0],
                seed,
            )
            .unwrap();
            assert!((f.mean() - 0.25).abs() < 1e-14);
            assert!(f.values().iter().all(|v| (v - 0.25).abs() <= 0.02 + 1e-12));
        }
    }

    #[test]
    fn flower_vanishes_on_its_interface() {
        let grid = make_grid(&[8, 8], &[2.0 * PI, 2.0 * PI]).unwrap();
        // Origin chosen so that node (1, 0) sits at (2.9, 0).
        let h = 2.0 * PI / 8.0;
        let f = make_initial_condition(
            "flower_tanh",
            &p(&[("epsilon", 0.05)]),
            &grid,
            &[2.9 - h, 0.0],
            0,
        )
        .unwrap();
        assert!(f.values()[8].abs() < 1e-15, "{}", f.values()[8]);
    }

    #[test]
    fn two_spheres_take_plus_one_inside_and_minus_one_outside() {
        let grid = make_grid(&[32, 32, 32], &[1.0, 1.0, 1.0]).unwrap();
        let params = p(&[
            ("epsilon", 0.01),
            ("radius", 0.14),
            ("x1", 0.5),
            ("y1", 0.4),
            ("z1", 0.5),
            ("x2", 0.5),
            ("y2", 0.7),
            ("z2", 0.5),
        ]);
        let f = make_initial_condition("two_spheres_tanh", &params, &grid, &[0.0; 3], 0).unwrap();
        let at = |i: usize, j: usize, k: usize| f.values()[(i * 32 + j) * 32 + k];
        assert!((at(16, 13, 16) - 1.0).abs() < 1e-6);
        assert!((at(0, 0, 0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_is_reproducible_and_bounded() {
        let grid = make_grid(&[16, 16], &[1.0, 1.0]).unwrap();
        let a = uniform_noise(&grid, 7);
        assert_eq!(a.values(), uniform_noise(&grid, 7).values());
        assert_ne!(a.values(), uniform_noise(&grid, 8).values());
        assert!(a.max_abs() <= 1.0);
    }
}
