use nalgebra::{DMatrix, DVector};

use crate::error::SchemeError;
use crate::model::ModelSpec;
use crate::schemes::{SchemeKind, SchemeState};
use crate::spectral::{Field, FourierMultiplier, GridSpec};
use crate::zero_factor::StepFamily;

pub const DENSE_NODE_LIMIT: usize = 4096;

fn check_size(grid: &GridSpec) -> Result<(), SchemeError> {
    if grid.len() > DENSE_NODE_LIMIT {
        return Err(SchemeError::GridTooLarge {
            nodes: grid.len(),
            limit: DENSE_NODE_LIMIT,
        });
    }
    Ok(())
}

fn unflatten(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for a in (0..dims.len()).rev() {
        idx[a] = flat % dims[a];
        flat /= dims[a];
    }
    idx
}

fn flatten(idx: &[usize], dims: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (i, n)| acc * n + i)
}

/// Symbol value at a full-spectrum multi-index, read through `s(-k) = s(k)`.
fn full_symbol(m: &FourierMultiplier, idx: &[usize]) -> f64 {
    let grid = m.grid();
    let dims = grid.dims();
    let last = dims.len() - 1;
    let half: Vec<usize> = if idx[last] <= dims[last] / 2 {
        idx.to_vec()
    } else {
        idx.iter().zip(dims).map(|(i, n)| (n - i) % n).collect()
    };
    m.symbol()[flatten(&half, grid.spectral_dims())]
}

/// Dense real matrix of a Fourier multiplier, `F⁻¹ diag(s) F` written as a
/// circulant cosine kernel.
pub fn dense_multiplier_matrix(m: &FourierMultiplier) -> Result<DMatrix<f64>, SchemeError> {
    let grid = m.grid();
    check_size(grid)?;
    let dims = grid.dims();
    let n = grid.len();
    let modes: Vec<(Vec<i64>, f64)> = (0..n)
        .map(|k| {
            let idx = unflatten(k, dims);
            let mode = idx
                .iter()
                .enumerate()
                .map(|(a, &i)| grid.mode_index(a, i))
                .collect();
            (mode, full_symbol(m, &idx))
        })
        .collect();
    let kernel: Vec<f64> = (0..n)
        .map(|d| {
            let off = unflatten(d, dims);
            modes
                .iter()
                .map(|(mode, s)| {
                    let theta: f64 = mode
                        .iter()
                        .zip(&off)
                        .zip(dims)
                        .map(|((&k, &o), &nn)| {
                            2.0 * std::f64::consts::PI * (k as f64) * (o as f64) / nn as f64
                        })
                        .sum();
                    s * theta.cos()
                })
                .sum::<f64>()
                / n as f64
        })
        .collect();
    let rows: Vec<Vec<usize>> = (0..n).map(|j| unflatten(j, dims)).collect();
    Ok(DMatrix::from_fn(n, n, |j, l| {
        let off: Vec<usize> = rows[j]
            .iter()
            .zip(&rows[l])
            .zip(dims)
            .map(|((a, b), nn)| (a + nn - b) % nn)
            .collect();
        kernel[flatten(&off, dims)]
    }))
}

/// Dense `A`: `I + ½dt·G·L` (CN) or `3I + 2dt·G·L` (BDF2), with `G`, `L`
/// materialized separately and multiplied as matrices.
pub fn dense_step_operator(
    model: &ModelSpec,
    dt: f64,
    family: StepFamily,
) -> Result<DMatrix<f64>, SchemeError> {
    let l = dense_multiplier_matrix(model.l_symbol())?;
    let g = dense_multiplier_matrix(model.g_symbol())?;
    let n = l.nrows();
    let gl = &g * &l;
    Ok(match family {
        StepFamily::Cn => DMatrix::identity(n, n) + gl * (0.5 * dt),
        StepFamily::Bdf2 => DMatrix::identity(n, n) * 3.0 + gl * (2.0 * dt),
    })
}

/// Predictor `φ̄` and direction `q` for the summed force, by dense LU.
pub fn dense_oracle_step(
    state: &SchemeState,
    model: &ModelSpec,
    dt: f64,
    kind: SchemeKind,
) -> Result<(Field, Field), SchemeError> {
    let grid = state.grid().clone();
    check_size(&grid)?;
    let family = kind.family();
    let l = dense_multiplier_matrix(model.l_symbol())?;
    let g = dense_multiplier_matrix(model.g_symbol())?;
    let n = grid.len();
    let gl = &g * &l;
    let phi = DVector::from_column_slice(state.phi.values());
    let phi_prev = DVector::from_column_slice(state.phi_prev.values());
    let (a, hat) = match family {
        StepFamily::Cn => (
            DMatrix::identity(n, n) + &gl * (0.5 * dt),
            &phi * 1.5 - &phi_prev * 0.5,
        ),
        StepFamily::Bdf2 => (
            DMatrix::identity(n, n) * 3.0 + &gl * (2.0 * dt),
            &phi * 2.0 - &phi_prev,
        ),
    };
    let fp = hat.map(|x| model.terms().iter().map(|t| t.derivative(x)).sum::<f64>());
    let force = &g * fp;
    let (rhs_bar, rhs_q) = match family {
        StepFamily::Cn => {
            let b = DMatrix::identity(n, n) - &gl * (0.5 * dt);
            (b * &phi - &force * dt, &force * (-dt))
        }
        StepFamily::Bdf2 => (
            &phi * 4.0 - &phi_prev - &force * (2.0 * dt),
            &force * (-2.0 * dt),
        ),
    };
    let lu = a.lu();
    let singular = || SchemeError::SingularOperator {
        dt,
        source: crate::error::SpectralError::NotInvertible {
            mode: Vec::new(),
            value: 0.0,
        },
    };
    let bar = lu.solve(&rhs_bar).ok_or_else(singular)?;
    let q = lu.solve(&rhs_q).ok_or_else(singular)?;
    Ok((
        Field::new(grid.clone(), bar.as_slice().to_vec())?,
        Field::new(grid, q.as_slice().to_vec())?,
    ))
}
