use crate::error::SchemeError;
use crate::model::ModelSpec;
use crate::schemes::{SchemeKind, SchemeState, StepReport};
use crate::spectral::{apply_multiplier, inner_product, Field};
use crate::zero_factor::StepFamily;

/// Chemical potential from the second equation of a step.
///
/// Crank-Nicolson: `μ = ½L(φⁿ⁺¹ + φⁿ) + Σ_i (1 + f_i)·F_i'(φ̂)`.
/// BDF2: `μ = Lφⁿ⁺¹ + Σ_i (1 + f_i)·F_i'(φ̂)`.
pub fn compute_mu(
    model: &ModelSpec,
    family: StepFamily,
    phi_new: &Field,
    phi_old: &Field,
    forces: &[(f64, &Field)],
) -> Result<Field, SchemeError> {
    let linear_arg = match family {
        StepFamily::Cn => phi_new.zip_with(phi_old, |a, b| 0.5 * (a + b))?,
        StepFamily::Bdf2 => phi_new.clone(),
    };
    let mut mu = apply_multiplier(&linear_arg, model.l_symbol())?;
    for &(f, fp) in forces {
        mu = mu.axpy(1.0 + f, fp)?;
    }
    Ok(mu)
}

/// `dt·(Gμ, μ)`, plus `¼(Lδ², δ²)` with `δ² = φⁿ⁺¹ - 2φⁿ + φⁿ⁻¹` for BDF2.
pub fn dissipation(
    model: &ModelSpec,
    family: StepFamily,
    dt: f64,
    mu: &Field,
    phi_new: &Field,
    phi_old: &Field,
    phi_older: &Field,
) -> Result<f64, SchemeError> {
    let gmu = apply_multiplier(mu, model.g_symbol())?;
    let mut d = dt * inner_product(&gmu, mu)?;
    if family == StepFamily::Bdf2 {
        let d2 = phi_new
            .zip_with(phi_old, |a, b| a - 2.0 * b)?
            .axpy(1.0, phi_older)?;
        let ld2 = apply_multiplier(&d2, model.l_symbol())?;
        d += 0.25 * inner_product(&ld2, &d2)?;
    }
    Ok(d)
}

/// Modified energy of one family from two levels of `φ` and `R`.
///
/// Crank-Nicolson: `½(Lφⁿ⁺¹, φⁿ⁺¹) + Rⁿ⁺¹`. BDF2:
/// `¼(Lφⁿ⁺¹, φⁿ⁺¹) + ¼(L(2φⁿ⁺¹ - φⁿ), 2φⁿ⁺¹ - φⁿ) + 3/2·Rⁿ⁺¹ - ½Rⁿ`.
pub fn modified_energy_parts(
    model: &ModelSpec,
    family: StepFamily,
    phi_new: &Field,
    phi_old: &Field,
    r_new: f64,
    r_old: f64,
) -> Result<f64, SchemeError> {
    let q_new = model.quadratic_energy(phi_new)?;
    Ok(match family {
        StepFamily::Cn => q_new + r_new,
        StepFamily::Bdf2 => {
            let ext = phi_new.zip_with(phi_old, |a, b| 2.0 * a - b)?;
            0.5 * q_new + 0.5 * model.quadratic_energy(&ext)? + 1.5 * r_new - 0.5 * r_old
        }
    })
}

/// The energy a scheme dissipates, evaluated on its current state.
///
/// `sav_cn` uses `½(Lφ, φ) + r² - C`, `zf_cn` the original energy, the
/// relaxed schemes the modified energy of their family.
pub fn modified_energy(
    kind: SchemeKind,
    model: &ModelSpec,
    state: &SchemeState,
) -> Result<f64, SchemeError> {
    match kind {
        SchemeKind::SavCn => {
            Ok(model.quadratic_energy(&state.phi)? + state.r_sav * state.r_sav - model.c_sav())
        }
        SchemeKind::ZfCn => Ok(model.energy_original(&state.phi)?),
        _ => modified_energy_parts(
            model,
            kind.family(),
            &state.phi,
            &state.phi_prev,
            state.r_total(),
            state.r_prev_total(),
        ),
    }
}

/// A violated discrete energy law.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyViolation {
    pub step: usize,
    pub inequality: String,
    pub lhs: f64,
    pub rhs: f64,
}

/// Default relative tolerance of the per-step energy checks.
pub const ENERGY_RTOL: f64 = 1e-9;

/// Checks the discrete energy law of `cur` against the preceding row.
///
/// Relaxed schemes: `Ẽⁿ⁺¹ - Ẽⁿ <= -(1 - κ)·D` (CN) or `-(1 - 3κ/2)·D`
/// (BDF2), together with `Ẽⁿ⁺¹ <= Eⁿ⁺¹` and, when `λ₀ = 0`,
/// `Eⁿ⁺¹ <= Eⁿ`. `sav_cn` and `zf_cn` satisfy `ΔE = -D` exactly. The
/// Crank-Nicolson step that seeds a BDF2 history is not checked here.
pub fn check_step(
    kind: SchemeKind,
    prev: &StepReport,
    cur: &StepReport,
    rtol: f64,
) -> Result<(), EnergyViolation> {
    let tol = rtol * prev.e_mod.abs().max(prev.e_orig.abs()).max(1.0);
    let fail = |inequality: &str, lhs: f64, rhs: f64| {
        Err(EnergyViolation {
            step: cur.step,
            inequality: inequality.to_string(),
            lhs,
            rhs,
        })
    };
    if cur.bootstrap {
        return Ok(());
    }
    let d_mod = cur.e_mod - prev.e_mod;
    match kind {
        SchemeKind::SavCn => {
            if (d_mod + cur.dissipation).abs() > tol {
                return fail("E_mod[n+1] - E_mod[n] = -D", d_mod, -cur.dissipation);
            }
        }
        SchemeKind::ZfCn => {
            let d = cur.e_orig - prev.e_orig;
            if (d + cur.dissipation).abs() > tol {
                return fail("E[n+1] - E[n] = -D", d, -cur.dissipation);
            }
        }
        SchemeKind::RzfCn | SchemeKind::RmzfCn | SchemeKind::RzfBdf2 => {
            let weight = if kind == SchemeKind::RzfBdf2 {
                1.0 - 1.5 * cur.kappa
            } else {
                1.0 - cur.kappa
            };
            let rhs = -weight * cur.dissipation;
            if d_mod > rhs + tol {
                return fail("E_mod[n+1] - E_mod[n] <= -(1 - c*kappa) D", d_mod, rhs);
            }
            if kind != SchemeKind::RzfBdf2 {
                if cur.e_mod > cur.e_orig + tol {
                    return fail("E_mod[n+1] <= E[n+1]", cur.e_mod, cur.e_orig);
                }
                if cur.lambda0 == 0.0 && cur.e_orig > prev.e_orig + tol {
                    return fail(
                        "lambda0 = 0 implies E[n+1] <= E[n]",
                        cur.e_orig,
                        prev.e_orig,
                    );
                }
            }
        }
    }
    Ok(())
}

/// Checks every consecutive pair of a trace.
pub fn check_trace(
    kind: SchemeKind,
    reports: &[StepReport],
    rtol: f64,
) -> Result<(), EnergyViolation> {
    reports
        .windows(2)
        .try_for_each(|w| check_step(kind, &w[0], &w[1], rtol))
}
