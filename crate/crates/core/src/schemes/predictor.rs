use crate::error::SchemeError;
use crate::model::ModelSpec;
use crate::spectral::{forward, inverse, Field, FourierMultiplier};
use crate::zero_factor::StepFamily;

use super::SchemeState;

/// Whether the explicit force is kept per nonlinear term or summed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermSplit {
    Merged,
    Split,
}

/// Cached diagonal symbols of one linear time discretization.
///
/// Crank-Nicolson: `A = I + ½dt·GL`, `φ̄ = A⁻¹(I - ½dt·GL)φⁿ + q`,
/// `q = -dt·A⁻¹G·F'`. BDF2: `A = 3I + 2dt·GL`,
/// `φ̄ = A⁻¹(4φⁿ - φⁿ⁻¹) + q`, `q = -2dt·A⁻¹G·F'`.
#[derive(Clone, Debug)]
pub struct LinearOps {
    family: StepFamily,
    a: FourierMultiplier,
    /// Multiplies `φⁿ` (CN: `B/A`, BDF2: `4/A`).
    current: Vec<f64>,
    /// Multiplies `φⁿ⁻¹` (BDF2 only: `-1/A`).
    previous: Vec<f64>,
    /// Multiplies `F'`.
    force: Vec<f64>,
}

impl LinearOps {
    pub fn new(model: &ModelSpec, dt: f64, family: StepFamily) -> Result<Self, SchemeError> {
        let gl = model.g_symbol().combine(model.l_symbol(), |g, l| g * l)?;
        let g = model.g_symbol().symbol();
        let a = match family {
            StepFamily::Cn => gl.map(|x| 1.0 + 0.5 * dt * x),
            StepFamily::Bdf2 => gl.map(|x| 3.0 + 2.0 * dt * x),
        };
        a.check_invertible()
            .map_err(|source| SchemeError::SingularOperator { dt, source })?;
        let sa = a.symbol();
        let (current, previous, force) = match family {
            StepFamily::Cn => (
                gl.symbol()
                    .iter()
                    .zip(sa)
                    .map(|(x, a)| (1.0 - 0.5 * dt * x) / a)
                    .collect(),
                Vec::new(),
                g.iter().zip(sa).map(|(g, a)| -dt * g / a).collect(),
            ),
            StepFamily::Bdf2 => (
                sa.iter().map(|a| 4.0 / a).collect(),
                sa.iter().map(|a| -1.0 / a).collect(),
                g.iter().zip(sa).map(|(g, a)| -2.0 * dt * g / a).collect(),
            ),
        };
        Ok(Self {
            family,
            a,
            current,
            previous,
            force,
        })
    }

    pub fn family(&self) -> StepFamily {
        self.family
    }

    pub fn operator(&self) -> &FourierMultiplier {
        &self.a
    }

    /// `A⁻¹·(scaled) F'`: the correction direction for force `fp`.
    pub fn direction(&self, fp: &Field) -> Field {
        let mut s = forward(fp);
        for (c, &m) in s.coeffs_mut().iter_mut().zip(&self.force) {
            *c *= m;
        }
        inverse(&s)
    }

    /// The force-free part of the predictor.
    pub fn propagate(&self, phi: &Field, phi_prev: &Field) -> Field {
        let mut s = forward(phi);
        match self.family {
            StepFamily::Cn => {
                for (c, &m) in s.coeffs_mut().iter_mut().zip(&self.current) {
                    *c *= m;
                }
            }
            StepFamily::Bdf2 => {
                let sp = forward(phi_prev);
                for ((c, cp), (&m, &mp)) in s
                    .coeffs_mut()
                    .iter_mut()
                    .zip(sp.coeffs())
                    .zip(self.current.iter().zip(&self.previous))
                {
                    *c = *c * m + cp * mp;
                }
            }
        }
        inverse(&s)
    }
}

/// Explicit state, forces and directions of one step.
#[derive(Clone, Debug)]
pub struct Predictor {
    /// Extrapolated state `φ̂` at which the forces are evaluated.
    pub phi_hat: Field,
    pub fprime: Vec<Field>,
    pub phi_bar: Field,
    pub q: Vec<Field>,
}

pub(crate) fn extrapolate(phi: &Field, phi_prev: &Field, family: StepFamily) -> Field {
    let (a, b) = match family {
        StepFamily::Cn => (1.5, -0.5),
        StepFamily::Bdf2 => (2.0, -1.0),
    };
    phi.zip_with(phi_prev, |x, y| a * x + b * y)
        .expect("state levels share a grid")
}

pub(crate) fn predict(
    model: &ModelSpec,
    ops: &LinearOps,
    phi: &Field,
    phi_prev: &Field,
    split: TermSplit,
    mask: Option<&FourierMultiplier>,
) -> Result<Predictor, SchemeError> {
    let phi_hat = extrapolate(phi, phi_prev, ops.family());
    let mut fprime = match split {
        TermSplit::Merged => vec![model.f_prime_total(&phi_hat)],
        TermSplit::Split => (0..model.terms().len())
            .map(|i| model.f_prime(i, &phi_hat))
            .collect::<Result<_, _>>()?,
    };
    if let Some(mask) = mask {
        for f in &mut fprime {
            *f = crate::spectral::apply_multiplier(f, mask)?;
        }
    }
    let q: Vec<Field> = fprime.iter().map(|f| ops.direction(f)).collect();
    let mut phi_bar = ops.propagate(phi, phi_prev);
    for qi in &q {
        phi_bar = phi_bar.axpy(1.0, qi)?;
    }
    Ok(Predictor {
        phi_hat,
        fprime,
        phi_bar,
        q,
    })
}

/// Semi-implicit predictor `φ̄` and direction `q` for the summed force.
pub fn predictor_pair(
    state: &SchemeState,
    model: &ModelSpec,
    dt: f64,
    family: StepFamily,
) -> Result<(Field, Field), SchemeError> {
    let ops = LinearOps::new(model, dt, family)?;
    let mut p = predict(
        model,
        &ops,
        &state.phi,
        &state.phi_prev,
        TermSplit::Merged,
        None,
    )?;
    Ok((p.phi_bar, p.q.remove(0)))
}
