//! Time steppers for gradient flows.
//!
//! Every stepper first computes the semi-implicit predictor `φ̄` and one
//! correction direction `q` per nonlinear term, then fixes the zero factor
//! (or SAV ratio) that decides how far to move along `q`:
//!
//! * `sav_cn`: the linear SAV Crank-Nicolson scheme.
//! * `zf_cn`: nonlinear zero-factor Crank-Nicolson, dissipating the original
//!   energy exactly; the factor comes from a scalar Newton solve.
//! * `rzf_cn` / `rzf_bdf2`: relaxed zero factor, one scalar quadratic per
//!   step followed by relaxation of the auxiliary energy `R`.
//! * `rmzf_cn`: two nonlinear terms, two factors sharing one unknown.

mod cn;
mod predictor;

use std::fmt;
use std::sync::Arc;

pub use predictor::{predictor_pair, LinearOps, Predictor, TermSplit};

use crate::error::SchemeError;
use crate::model::{ModelSpec, NonlinearTerm};
use crate::spectral::{Field, FourierMultiplier, GridSpec};
use crate::zero_factor::{Branch, FactorSpec, RootPolicy, StepFamily};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    SavCn,
    ZfCn,
    RzfCn,
    RzfBdf2,
    RmzfCn,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::SavCn,
        SchemeKind::ZfCn,
        SchemeKind::RzfCn,
        SchemeKind::RzfBdf2,
        SchemeKind::RmzfCn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::SavCn => "sav_cn",
            SchemeKind::ZfCn => "zf_cn",
            SchemeKind::RzfCn => "rzf_cn",
            SchemeKind::RzfBdf2 => "rzf_bdf2",
            SchemeKind::RmzfCn => "rmzf_cn",
        }
    }

    pub fn family(self) -> StepFamily {
        match self {
            SchemeKind::RzfBdf2 => StepFamily::Bdf2,
            _ => StepFamily::Cn,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchemeKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown scheme `{s}` (expected sav_cn, zf_cn, rzf_cn, rzf_bdf2 or rmzf_cn)"
                )
            })
    }
}

/// Two-level history carried between steps.
#[derive(Clone, Debug)]
pub struct SchemeState {
    pub phi: Field,
    pub phi_prev: Field,
    /// Auxiliary nonlinear energy, one entry per nonlinear term in use.
    pub r: Vec<f64>,
    pub r_prev: Vec<f64>,
    pub eta: f64,
    pub eta_prev: f64,
    /// SAV variable `r = √(E₁ + C)`; only the SAV stepper advances it.
    pub r_sav: f64,
    pub t: f64,
    pub step: usize,
    /// Factor value of the last step, the Newton starting point for `zf_cn`.
    pub last_p: f64,
}

impl SchemeState {
    pub fn grid(&self) -> &Arc<GridSpec> {
        self.phi.grid()
    }

    pub fn r_total(&self) -> f64 {
        self.r.iter().sum()
    }

    pub fn r_prev_total(&self) -> f64 {
        self.r_prev.iter().sum()
    }
}

/// Per-step diagnostics; one row of the energy trace.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub t: f64,
    pub e_orig: f64,
    pub e_mod: f64,
    /// Auxiliary energy after relaxation (summed over terms).
    pub r: f64,
    pub f_int: f64,
    pub p_value: f64,
    pub s_value: f64,
    pub lambda0: f64,
    pub kappa: f64,
    pub dissipation: f64,
    pub branch: Branch,
    pub r_tilde: f64,
    /// Residual of the scalar consistency equation actually imposed.
    pub residual: f64,
    /// True for the Crank-Nicolson step that seeds a BDF2 history.
    pub bootstrap: bool,
}

#[derive(Clone, Debug)]
pub struct StepperSettings {
    pub root_policy: RootPolicy,
    /// 2/3-rule truncation of the explicit nonlinear force.
    pub dealias: bool,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for StepperSettings {
    fn default() -> Self {
        Self {
            root_policy: RootPolicy::MinAbsFactor,
            dealias: false,
            newton_tol: 1e-12,
            newton_max_iter: 50,
        }
    }
}

/// A configured time stepper: model, scheme, step size and factor choice.
#[derive(Clone, Debug)]
pub struct Stepper {
    kind: SchemeKind,
    model: ModelSpec,
    dt: f64,
    factor: FactorSpec,
    factor2: FactorSpec,
    settings: StepperSettings,
    cn: LinearOps,
    bdf2: Option<LinearOps>,
    dealias_mask: Option<FourierMultiplier>,
}

impl Stepper {
    pub fn new(
        kind: SchemeKind,
        model: &ModelSpec,
        dt: f64,
        factor: FactorSpec,
    ) -> Result<Self, SchemeError> {
        Self::with_settings(kind, model, dt, factor, factor, StepperSettings::default())
    }

    /// Full constructor; `factor2` is the second factor of `rmzf_cn` and is
    /// ignored by the other schemes.
    pub fn with_settings(
        kind: SchemeKind,
        model: &ModelSpec,
        dt: f64,
        factor: FactorSpec,
        factor2: FactorSpec,
        settings: StepperSettings,
    ) -> Result<Self, SchemeError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(SchemeError::BadTimeStep(dt));
        }
        let model = match kind {
            SchemeKind::RmzfCn => {
                if model.terms().len() == 1 {
                    // A single-term model runs with F₂ ≡ 0.
                    let terms = vec![model.terms()[0].clone(), NonlinearTerm::zero()];
                    ModelSpec::new(
                        model.name(),
                        model.l_symbol().clone(),
                        model.g_symbol().clone(),
                        terms,
                        model.params().clone(),
                    )?
                } else {
                    model.clone()
                }
            }
            _ => model.merged(),
        };
        let cn = LinearOps::new(&model, dt, StepFamily::Cn)?;
        let bdf2 = match kind {
            SchemeKind::RzfBdf2 => Some(LinearOps::new(&model, dt, StepFamily::Bdf2)?),
            _ => None,
        };
        let dealias_mask = settings
            .dealias
            .then(|| FourierMultiplier::two_thirds_mask(model.grid()));
        Ok(Self {
            kind,
            model,
            dt,
            factor,
            factor2,
            settings,
            cn,
            bdf2,
            dealias_mask,
        })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn factor(&self) -> &FactorSpec {
        &self.factor
    }

    pub fn settings(&self) -> &StepperSettings {
        &self.settings
    }

    /// Level-0 state: `φ⁻¹ := φ⁰`, `R⁰ = (F(φ⁰), 1)`, `η⁰` from the factor.
    pub fn init_state(&self, phi0: Field) -> Result<SchemeState, SchemeError> {
        phi0.check_finite()?;
        if !Arc::ptr_eq(phi0.grid(), self.model.grid()) && **phi0.grid() != **self.model.grid() {
            return Err(crate::error::SpectralError::GridMismatch.into());
        }
        let r: Vec<f64> = (0..self.model.terms().len())
            .map(|i| self.model.f_integral(i, &phi0))
            .collect::<Result<_, _>>()?;
        let e1: f64 = r.iter().sum();
        let c = self.model.c_sav();
        let eta0 = match self.kind {
            SchemeKind::RmzfCn if self.factor.kind() != self.factor2.kind() => 0.0,
            _ => self.factor.eta_init(),
        };
        Ok(SchemeState {
            phi_prev: phi0.clone(),
            phi: phi0,
            r_prev: r.clone(),
            r,
            eta: eta0,
            eta_prev: eta0,
            r_sav: (e1 + c).max(0.0).sqrt(),
            t: 0.0,
            step: 0,
            last_p: 0.0,
        })
    }

    /// The trace row describing a freshly initialized state.
    pub fn initial_report(&self, state: &SchemeState) -> Result<StepReport, SchemeError> {
        let e = self.model.energy_original(&state.phi)?;
        let f_int = self.model.f_integral_total(&state.phi);
        let e_mod = crate::diagnostics::modified_energy(self.kind, &self.model, state)?;
        Ok(StepReport {
            step: state.step,
            t: state.t,
            e_orig: e,
            e_mod,
            r: state.r_total(),
            f_int,
            p_value: 0.0,
            s_value: 0.0,
            lambda0: 0.0,
            kappa: 0.0,
            dissipation: 0.0,
            branch: Branch::Initial,
            r_tilde: state.r_total(),
            residual: 0.0,
            bootstrap: false,
        })
    }

    /// Advances `state` by one step.
    pub fn step(&self, state: &mut SchemeState) -> Result<StepReport, SchemeError> {
        let report = match self.kind {
            SchemeKind::SavCn => self.step_sav_cn(state)?,
            SchemeKind::ZfCn => self.step_zf_cn(state)?,
            SchemeKind::RzfCn => self.step_rzf_cn(state)?,
            SchemeKind::RmzfCn => self.step_rmzf_cn(state)?,
            SchemeKind::RzfBdf2 => {
                if state.step == 0 {
                    self.bootstrap_first_step(state)?
                } else {
                    self.step_rzf_bdf2(state)?
                }
            }
        };
        if !state.phi.is_finite() || !report.e_mod.is_finite() {
            return Err(SchemeError::NonFiniteState { step: state.step });
        }
        Ok(report)
    }

    /// Steps until `t_end` (within a hundredth of a step), collecting reports.
    pub fn run_until(
        &self,
        state: &mut SchemeState,
        t_end: f64,
    ) -> Result<Vec<StepReport>, SchemeError> {
        let steps = ((t_end - state.t) / self.dt - 1e-2).ceil().max(0.0) as usize;
        (0..steps).map(|_| self.step(state)).collect()
    }

    fn ops(&self, family: StepFamily) -> &LinearOps {
        match family {
            StepFamily::Cn => &self.cn,
            StepFamily::Bdf2 => self
                .bdf2
                .as_ref()
                .expect("BDF2 operators exist for rzf_bdf2"),
        }
    }

    fn predict(
        &self,
        state: &SchemeState,
        family: StepFamily,
        split: TermSplit,
    ) -> Result<Predictor, SchemeError> {
        predictor::predict(
            &self.model,
            self.ops(family),
            &state.phi,
            &state.phi_prev,
            split,
            self.dealias_mask.as_ref(),
        )
    }

    /// Shifts the history after an accepted step.
    fn commit(
        &self,
        state: &mut SchemeState,
        phi_new: Field,
        r_new: Vec<f64>,
        eta_new: f64,
        p: f64,
    ) {
        state.phi_prev = std::mem::replace(&mut state.phi, phi_new);
        state.r_prev = std::mem::replace(&mut state.r, r_new);
        state.eta_prev = state.eta;
        state.eta = eta_new;
        state.last_p = p;
        state.step += 1;
        state.t = state.step as f64 * self.dt;
    }
}
