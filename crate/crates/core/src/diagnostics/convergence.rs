use crate::error::SchemeError;
use crate::model::ModelSpec;
use crate::schemes::{SchemeKind, StepReport, Stepper, StepperSettings};
use crate::spectral::Field;
use crate::zero_factor::FactorSpec;

/// Everything a convergence leg shares except its step size.
#[derive(Clone, Debug)]
pub struct StudySetup {
    pub model: ModelSpec,
    pub kind: SchemeKind,
    pub factor: FactorSpec,
    pub factor2: FactorSpec,
    pub settings: StepperSettings,
    pub phi0: Field,
    pub t_end: f64,
}

impl StudySetup {
    pub fn new(
        model: ModelSpec,
        kind: SchemeKind,
        factor: FactorSpec,
        phi0: Field,
        t_end: f64,
    ) -> Self {
        Self {
            model,
            kind,
            factor,
            factor2: factor,
            settings: StepperSettings::default(),
            phi0,
            t_end,
        }
    }

    /// Runs to `t_end` with step `dt`; `t_end / dt` must be an integer.
    pub fn run(&self, dt: f64) -> Result<(Field, Vec<StepReport>), SchemeError> {
        let steps = step_count(self.t_end, dt)?;
        let stepper = Stepper::with_settings(
            self.kind,
            &self.model,
            dt,
            self.factor,
            self.factor2,
            self.settings.clone(),
        )?;
        let mut state = stepper.init_state(self.phi0.clone())?;
        let mut reports = Vec::with_capacity(steps);
        for _ in 0..steps {
            reports.push(stepper.step(&mut state)?);
        }
        Ok((state.phi, reports))
    }
}

fn step_count(t_end: f64, dt: f64) -> Result<usize, SchemeError> {
    if !(dt > 0.0) {
        return Err(SchemeError::BadTimeStep(dt));
    }
    let n = t_end / dt;
    let rounded = n.round();
    if rounded < 1.0 || (n - rounded).abs() > 1e-8 * rounded {
        return Err(SchemeError::Study(format!(
            "T = {t_end} is not a whole number of steps of {dt}"
        )));
    }
    Ok(rounded as usize)
}

/// Errors at the final time and observed orders.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub scheme: SchemeKind,
    pub dts: Vec<f64>,
    /// Max-norm over grid nodes of `φ(T; dt) - φ_ref(T)`.
    pub errors: Vec<f64>,
    /// `log(e[i-1]/e[i]) / log(dt[i-1]/dt[i])`, i.e. `log₂` ratios for halvings.
    pub rates: Vec<f64>,
    /// Largest `|p|` seen during each leg.
    pub max_abs_p: Vec<f64>,
}

impl ConvergenceTable {
    fn from_legs(scheme: SchemeKind, dts: &[f64], errors: Vec<f64>, max_abs_p: Vec<f64>) -> Self {
        let rates = (1..errors.len())
            .map(|i| (errors[i - 1] / errors[i]).ln() / (dts[i - 1] / dts[i]).ln())
            .collect();
        Self {
            scheme,
            dts: dts.to_vec(),
            errors,
            rates,
            max_abs_p,
        }
    }
}

pub fn max_norm_error(a: &Field, b: &Field) -> Result<f64, SchemeError> {
    Ok(a.max_diff(b)?)
}

fn check_ladder(dt_list: &[f64]) -> Result<(), SchemeError> {
    if dt_list.is_empty() {
        return Err(SchemeError::Study("empty dt list".into()));
    }
    if dt_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(SchemeError::Study(
            "dt list must be strictly descending".into(),
        ));
    }
    Ok(())
}

/// Errors against a supplied reference field at `t_end`.
pub fn convergence_against(
    setup: &StudySetup,
    dt_list: &[f64],
    reference: &Field,
) -> Result<ConvergenceTable, SchemeError> {
    check_ladder(dt_list)?;
    let mut errors = Vec::with_capacity(dt_list.len());
    let mut max_p = Vec::with_capacity(dt_list.len());
    for &dt in dt_list {
        let (phi, reports) = setup.run(dt)?;
        errors.push(max_norm_error(&phi, reference)?);
        max_p.push(reports.iter().map(|r| r.p_value.abs()).fold(0.0, f64::max));
    }
    Ok(ConvergenceTable::from_legs(
        setup.kind, dt_list, errors, max_p,
    ))
}

/// Errors against the same scheme run at `reference_dt`.
pub fn convergence_study(
    setup: &StudySetup,
    dt_list: &[f64],
    reference_dt: f64,
) -> Result<ConvergenceTable, SchemeError> {
    check_ladder(dt_list)?;
    let finest = dt_list[dt_list.len() - 1];
    if !(reference_dt > 0.0 && reference_dt < finest / 10.0) {
        return Err(SchemeError::Study(format!(
            "reference dt {reference_dt} must be below a tenth of the finest dt {finest}"
        )));
    }
    let (reference, _) = setup.run(reference_dt)?;
    convergence_against(setup, dt_list, &reference)
}
