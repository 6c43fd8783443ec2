#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use zfflow::diagnostics::dense_multiplier_matrix;
use zfflow::relaxation::RelaxationInputs;
use zfflow::{build_model, make_grid, Field, GridSpec, ModelParams, ModelSpec, SchemeState};

pub const TAU: f64 = 2.0 * PI;

pub fn params(pairs: &[(&str, f64)]) -> ModelParams {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn ic_params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn square(n: usize, side: f64) -> Arc<GridSpec> {
    make_grid(&[n, n], &[side, side]).unwrap()
}

pub fn model(name: &str, pairs: &[(&str, f64)], grid: &Arc<GridSpec>) -> ModelSpec {
    build_model(name, &params(pairs), grid).unwrap()
}

/// Real roots of g(p) = (1+p)(s0 + m·p·s1) - drift found without the
/// quadratic formula: sign changes on a uniform scan, refined by bisection.
/// Returns None when no sign change is seen (no root, or a double root).
pub fn scan_bisect_min_abs_root(s0: f64, s1: f64, drift: f64, m: f64) -> Option<f64> {
    let g = |p: f64| (1.0 + p) * (s0 + m * p * s1) - drift;
    // Cauchy bound on the roots of A p² + B p + C.
    let (a, b, c) = (m * s1, s0 + m * s1, s0 - drift);
    let bound = if a.abs() > 1e-300 {
        1.0 + b.abs().max(c.abs()) / a.abs()
    } else if b.abs() > 1e-300 {
        1.0 + c.abs() / b.abs()
    } else {
        return None;
    };
    let n = 40_000;
    let h = 2.0 * bound / n as f64;
    let mut roots = Vec::new();
    let mut lo = -bound;
    let mut glo = g(lo);
    for i in 1..=n {
        let hi = -bound + i as f64 * h;
        let ghi = g(hi);
        if glo == 0.0 {
            roots.push(lo);
        } else if glo * ghi < 0.0 {
            let (mut x0, mut x1, mut g0) = (lo, hi, glo);
            for _ in 0..200 {
                let mid = 0.5 * (x0 + x1);
                let gm = g(mid);
                if gm == 0.0 || x1 - x0 <= 1e-15 * mid.abs().max(1e-300) {
                    x0 = mid;
                    x1 = mid;
                    break;
                }
                if g0 * gm < 0.0 {
                    x1 = mid;
                } else {
                    x0 = mid;
                    g0 = gm;
                }
            }
            roots.push(0.5 * (x0 + x1));
        }
        lo = hi;
        glo = ghi;
    }
    roots.into_iter().min_by(|x, y| x.abs().total_cmp(&y.abs()))
}

/// Smallest λ on a uniform grid of `[0, 1]` for which some `κ ∈ [0, κmax]`
/// satisfies `λR̃ + (1-λ)F - R̃ <= κ·D`.
pub fn feasible(inputs: &RelaxationInputs, lambda: f64, kappa_max: f64) -> bool {
    let r = lambda * inputs.r_tilde + (1.0 - lambda) * inputs.f_int;
    r - inputs.r_tilde
        <= kappa_max * inputs.dissipation.max(0.0) + 1e-12 * inputs.r_tilde.abs().max(1.0)
}

pub fn first_feasible_below(
    inputs: &RelaxationInputs,
    limit: f64,
    kappa_max: f64,
    samples: usize,
) -> Option<f64> {
    (0..=samples)
        .map(|i| i as f64 / samples as f64)
        .take_while(|&l| l < limit)
        .find(|&l| {
            let r = l * inputs.r_tilde + (1.0 - l) * inputs.f_int;
            // Strict feasibility, no tolerance: a violation must be real.
            r - inputs.r_tilde <= kappa_max * inputs.dissipation.max(0.0)
        })
}

/// One SAV Crank-Nicolson step as a single dense linear system in the
/// N + 1 unknowns `(φⁿ⁺¹, rⁿ⁺¹)`.
pub fn dense_sav_step(state: &SchemeState, model: &ModelSpec, dt: f64) -> (Field, f64) {
    let grid = state.grid().clone();
    let n = grid.len();
    let l = dense_multiplier_matrix(model.l_symbol()).unwrap();
    let g = dense_multiplier_matrix(model.g_symbol()).unwrap();
    let gl = &g * &l;
    let phi = DVector::from_column_slice(state.phi.values());
    let prev = DVector::from_column_slice(state.phi_prev.values());
    let hat = &phi * 1.5 - &prev * 0.5;
    let fp = hat.map(|x| model.terms().iter().map(|t| t.derivative(x)).sum::<f64>());
    let hat_field = Field::new(grid.clone(), hat.as_slice().to_vec()).unwrap();
    let s = (model.f_integral_total(&hat_field) + model.c_sav()).sqrt();
    let w = grid.cell_volume();
    let gfp = &g * &fp;

    let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut rhs = DVector::<f64>::zeros(n + 1);
    // φ rows: (I + ½dtGL)φ⁺ + (dt/2S)GF'·r⁺ = (I - ½dtGL)φⁿ - (dt/2S)GF'·rⁿ
    let a = DMatrix::identity(n, n) + &gl * (0.5 * dt);
    m.view_mut((0, 0), (n, n)).copy_from(&a);
    for i in 0..n {
        m[(i, n)] = 0.5 * dt / s * gfp[i];
    }
    let b =
        (DMatrix::identity(n, n) - &gl * (0.5 * dt)) * &phi - &gfp * (0.5 * dt / s * state.r_sav);
    rhs.rows_mut(0, n).copy_from(&b);
    // r row: r⁺ - (1/2S)(F', φ⁺) = rⁿ - (1/2S)(F', φⁿ)
    for j in 0..n {
        m[(n, j)] = -w * fp[j] / (2.0 * s);
    }
    m[(n, n)] = 1.0;
    rhs[n] = state.r_sav - w * fp.dot(&phi) / (2.0 * s);

    let x = m
        .lu()
        .solve(&rhs)
        .expect("coupled SAV system is nonsingular");
    (Field::new(grid, x.as_slice()[..n].to_vec()).unwrap(), x[n])
}

/// Number of connected components of `{φ > 0}` on a periodic grid
/// (face neighbours).
pub fn positive_components(phi: &Field) -> usize {
    let dims = phi.grid().dims().to_vec();
    let v = phi.values();
    let mut label = vec![0usize; v.len()];
    let mut count = 0;
    let strides: Vec<usize> = (0..dims.len())
        .map(|a| dims[a + 1..].iter().product())
        .collect();
    for start in 0..v.len() {
        if v[start] <= 0.0 || label[start] != 0 {
            continue;
        }
        count += 1;
        label[start] = count;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for (ax, &st) in strides.iter().enumerate() {
                let coord = (i / st) % dims[ax];
                for step in [1, dims[ax] - 1] {
                    let nc = (coord + step) % dims[ax];
                    let j = i - coord * st + nc * st;
                    if v[j] > 0.0 && label[j] == 0 {
                        label[j] = count;
                        stack.push(j);
                    }
                }
            }
        }
    }
    count
}
