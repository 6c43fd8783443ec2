//! Optimal relaxation of the auxiliary energy variable.
//!
//! After a zero-factor step the auxiliary `R̃` and the true nonlinear energy
//! `F_int = (F(φ^{n+1}), 1)` generally differ. The relaxed value is
//! `R^{n+1} = λ·R̃ + (1-λ)·F_int` with the smallest `λ ∈ [0, 1]` such that
//! `R^{n+1} - R̃ <= κ · dissipation` for some admissible `κ`.

use crate::error::SchemeError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxationInputs {
    pub r_tilde: f64,
    pub f_int: f64,
    /// `dt(Gμ, μ)` for Crank-Nicolson, plus `¼(Lδ², δ²)` for BDF2.
    pub dissipation: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxationChoice {
    pub lambda0: f64,
    pub kappa: f64,
}

/// Upper end of the admissible `κ` range for each family.
pub const KAPPA_MAX_CN: f64 = 1.0;
pub const KAPPA_MAX_BDF2: f64 = 2.0 / 3.0;

fn choose(inputs: &RelaxationInputs, kappa_max: f64) -> RelaxationChoice {
    let RelaxationInputs {
        r_tilde,
        f_int,
        dissipation,
    } = *inputs;
    let gap = f_int - r_tilde;
    let guard = 1e-14 * r_tilde.abs().max(f_int.abs()).max(1.0);
    if gap <= guard {
        // R̃ >= F_int, or equal up to round-off.
        return RelaxationChoice {
            lambda0: 0.0,
            kappa: 0.0,
        };
    }
    if dissipation < -1e-10 {
        log::warn!("negative dissipation {dissipation:e} in relaxation; treated as 0");
    }
    let ratio = dissipation.max(0.0) / gap;
    if ratio * kappa_max >= 1.0 {
        RelaxationChoice {
            lambda0: 0.0,
            kappa: 1.0 / ratio,
        }
    } else {
        RelaxationChoice {
            lambda0: 1.0 - kappa_max * ratio,
            kappa: kappa_max,
        }
    }
}

/// Crank-Nicolson rule with `α = dissipation / |R̃ - F_int|`:
/// `R̃ >= F_int → (0, 0)`, `α >= 1 → (0, 1/α)`, otherwise `(1-α, 1)`.
pub fn choose_relaxation_cn(inputs: &RelaxationInputs) -> RelaxationChoice {
    choose(inputs, KAPPA_MAX_CN)
}

/// BDF2 rule with `β = dissipation / |R̃ - F_int|` and `κ ∈ [0, 2/3]`:
/// `R̃ >= F_int → (0, 0)`, `β >= 3/2 → (0, 1/β)`, otherwise `(1 - 2β/3, 2/3)`.
pub fn choose_relaxation_bdf2(inputs: &RelaxationInputs) -> RelaxationChoice {
    choose(inputs, KAPPA_MAX_BDF2)
}

/// `λ₀·R̃ + (1-λ₀)·F_int`.
pub fn relax_r(lambda0: f64, r_tilde: f64, f_int: f64) -> Result<f64, SchemeError> {
    if !(0.0..=1.0).contains(&lambda0) {
        return Err(SchemeError::LambdaRange(lambda0));
    }
    Ok(lambda0 * r_tilde + (1.0 - lambda0) * f_int)
}

/// Whether `(λ, κ)` satisfies `relax_r(λ) - R̃ <= κ·dissipation` up to `tol`.
pub fn is_feasible(inputs: &RelaxationInputs, lambda: f64, kappa: f64, tol: f64) -> bool {
    let r = lambda * inputs.r_tilde + (1.0 - lambda) * inputs.f_int;
    r - inputs.r_tilde <= kappa * inputs.dissipation + tol
}
