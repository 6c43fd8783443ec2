//! Gradient-flow models: the linear operator `L`, the mobility `G`, and one
//! or two pointwise nonlinear densities with their derivatives.
//!
//! The energy is `E(φ) = ½(φ, Lφ) + Σ_i ∫ F_i(φ)` and the flow is
//! `φ_t = -G μ` with `μ = Lφ + Σ_i F_i'(φ)`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::ModelError;
use crate::spectral::{
    apply_multiplier, inner_product, integral, Field, FourierMultiplier, GridSpec,
};

pub type PointwiseFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A pointwise energy density `F` and its derivative `F'`.
#[derive(Clone)]
pub struct NonlinearTerm {
    label: String,
    density: PointwiseFn,
    derivative: PointwiseFn,
}

impl fmt::Debug for NonlinearTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearTerm")
            .field("label", &self.label)
            .finish()
    }
}

impl NonlinearTerm {
    pub fn new(
        label: impl Into<String>,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            density: Arc::new(density),
            derivative: Arc::new(derivative),
        }
    }

    /// `F ≡ 0`.
    pub fn zero() -> Self {
        Self::new("zero", |_| 0.0, |_| 0.0)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn density(&self, phi: f64) -> f64 {
        (self.density)(phi)
    }

    pub fn derivative(&self, phi: f64) -> f64 {
        (self.derivative)(phi)
    }

    /// The pointwise sum of several terms.
    pub fn sum(terms: &[NonlinearTerm]) -> Self {
        if terms.len() == 1 {
            return terms[0].clone();
        }
        let d: Vec<PointwiseFn> = terms.iter().map(|t| t.density.clone()).collect();
        let dp: Vec<PointwiseFn> = terms.iter().map(|t| t.derivative.clone()).collect();
        let label = terms
            .iter()
            .map(|t| t.label.as_str())
            .collect::<Vec<_>>()
            .join("+");
        Self {
            label,
            density: Arc::new(move |x| d.iter().map(|f| f(x)).sum()),
            derivative: Arc::new(move |x| dp.iter().map(|f| f(x)).sum()),
        }
    }
}

/// Named real parameters (`epsilon`, `mobility`, `beta`, `c_sav`).
pub type ModelParams = BTreeMap<String, f64>;

#[derive(Clone, Debug)]
pub struct ModelSpec {
    name: String,
    l_symbol: FourierMultiplier,
    g_symbol: FourierMultiplier,
    terms: Vec<NonlinearTerm>,
    params: ModelParams,
}

/// Default SAV shift constant.
pub const DEFAULT_C_SAV: f64 = 1.0;

pub const MODEL_NAMES: [&str; 5] = [
    "allen_cahn",
    "cahn_hilliard_beta",
    "pfc",
    "heat",
    "custom_split",
];

fn param(params: &ModelParams, model: &str, key: &'static str) -> Result<f64, ModelError> {
    params.get(key).copied().ok_or(ModelError::MissingParam {
        model: model.to_string(),
        param: key,
    })
}

fn param_or(params: &ModelParams, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn positive(key: &'static str, value: f64) -> Result<f64, ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::BadParam {
            param: key,
            value,
            reason: "must be positive",
        })
    }
}

/// Builds one of the shipped models on `grid`.
///
/// * `allen_cahn`: `L = -Δ`, `G = M`, `F = (φ²-1)²/(4ε²)`.
/// * `cahn_hilliard_beta`: `L = -ε²Δ + β`, `G = -MΔ`, `F = ¼(φ²-1-β)²`.
/// * `pfc`: `L = (1+Δ)² - ε`, `G = -Δ`, `F = ¼φ⁴`.
/// * `heat`: `L = -Δ`, `G = I`, `F ≡ 0`.
/// * `custom_split`: the Cahn-Hilliard operators with the density split as
///   `F₁ = ¼φ⁴` and `F₂ = -½(1+β)φ² + ¼(1+β)²`.
///
/// `mobility` defaults to 1, `beta` to 2 and `c_sav` to 1.
pub fn build_model(
    name: &str,
    params: &ModelParams,
    grid: &Arc<GridSpec>,
) -> Result<ModelSpec, ModelError> {
    let mut stored = params.clone();
    stored.entry("c_sav".into()).or_insert(DEFAULT_C_SAV);
    let (l_symbol, g_symbol, terms) = match name {
        "allen_cahn" => {
            let eps = positive("epsilon", param(params, name, "epsilon")?)?;
            let m = positive("mobility", param_or(params, "mobility", 1.0))?;
            stored.insert("mobility".into(), m);
            let inv = 1.0 / (eps * eps);
            let term = NonlinearTerm::new(
                "double_well",
                move |p| 0.25 * inv * (p * p - 1.0).powi(2),
                move |p| inv * (p * p * p - p),
            );
            (
                FourierMultiplier::radial(grid, |k2| k2),
                FourierMultiplier::constant(grid, m),
                vec![term],
            )
        }
        "cahn_hilliard_beta" | "custom_split" => {
            let eps = positive("epsilon", param(params, name, "epsilon")?)?;
            let m = positive("mobility", param_or(params, "mobility", 1.0))?;
            let beta = param_or(params, "beta", 2.0);
            stored.insert("mobility".into(), m);
            stored.insert("beta".into(), beta);
            let l = FourierMultiplier::radial(grid, |k2| eps * eps * k2 + beta);
            let g = FourierMultiplier::radial(grid, |k2| m * k2);
            let terms = if name == "cahn_hilliard_beta" {
                vec![NonlinearTerm::new(
                    "shifted_double_well",
                    move |p| 0.25 * (p * p - 1.0 - beta).powi(2),
                    move |p| p * (p * p - 1.0 - beta),
                )]
            } else {
                let c = 1.0 + beta;
                vec![
                    NonlinearTerm::new("quartic", |p| 0.25 * p.powi(4), |p| p * p * p),
                    NonlinearTerm::new(
                        "quadratic_remainder",
                        move |p| -0.5 * c * p * p + 0.25 * c * c,
                        move |p| -c * p,
                    ),
                ]
            };
            (l, g, terms)
        }
        "pfc" => {
            let eps = param(params, name, "epsilon")?;
            if !eps.is_finite() {
                return Err(ModelError::BadParam {
                    param: "epsilon",
                    value: eps,
                    reason: "must be finite",
                });
            }
            (
                FourierMultiplier::radial(grid, |k2| (1.0 - k2).powi(2) - eps),
                FourierMultiplier::radial(grid, |k2| k2),
                vec![NonlinearTerm::new(
                    "quartic",
                    |p| 0.25 * p.powi(4),
                    |p| p * p * p,
                )],
            )
        }
        "heat" => (
            FourierMultiplier::radial(grid, |k2| k2),
            FourierMultiplier::constant(grid, 1.0),
            vec![NonlinearTerm::zero()],
        ),
        other => return Err(ModelError::UnknownModel(other.to_string())),
    };
    ModelSpec::new(name, l_symbol, g_symbol, terms, stored)
}

impl ModelSpec {
    /// Assembles a model from caller-supplied operators and densities.
    pub fn new(
        name: impl Into<String>,
        l_symbol: FourierMultiplier,
        g_symbol: FourierMultiplier,
        terms: Vec<NonlinearTerm>,
        params: ModelParams,
    ) -> Result<Self, ModelError> {
        if terms.is_empty() || terms.len() > 2 {
            return Err(ModelError::TermCount(terms.len()));
        }
        if !Arc::ptr_eq(l_symbol.grid(), g_symbol.grid()) && **l_symbol.grid() != **g_symbol.grid()
        {
            return Err(ModelError::Spectral(
                crate::error::SpectralError::GridMismatch,
            ));
        }
        if let Some((position, &value)) = g_symbol
            .symbol()
            .iter()
            .enumerate()
            .find(|(_, &v)| v < -1e-12)
        {
            return Err(ModelError::NegativeMobility { position, value });
        }
        Ok(Self {
            name: name.into(),
            l_symbol,
            g_symbol,
            terms,
            params,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        self.l_symbol.grid()
    }

    pub fn l_symbol(&self) -> &FourierMultiplier {
        &self.l_symbol
    }

    pub fn g_symbol(&self) -> &FourierMultiplier {
        &self.g_symbol
    }

    pub fn terms(&self) -> &[NonlinearTerm] {
        &self.terms
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn c_sav(&self) -> f64 {
        param_or(&self.params, "c_sav", DEFAULT_C_SAV)
    }

    /// The same operators with all densities merged into one term.
    pub fn merged(&self) -> ModelSpec {
        ModelSpec {
            name: self.name.clone(),
            l_symbol: self.l_symbol.clone(),
            g_symbol: self.g_symbol.clone(),
            terms: vec![NonlinearTerm::sum(&self.terms)],
            params: self.params.clone(),
        }
    }

    pub fn term(&self, index: usize) -> Result<&NonlinearTerm, ModelError> {
        self.terms.get(index).ok_or(ModelError::TermIndex {
            index,
            count: self.terms.len(),
        })
    }

    /// `F_term'(φ)` pointwise.
    pub fn f_prime(&self, term: usize, phi: &Field) -> Result<Field, ModelError> {
        let t = self.term(term)?;
        Ok(phi.map(|p| t.derivative(p)))
    }

    /// `Σ_i F_i'(φ)` pointwise.
    pub fn f_prime_total(&self, phi: &Field) -> Field {
        phi.map(|p| self.terms.iter().map(|t| t.derivative(p)).sum())
    }

    /// `(F_term(φ), 1)`.
    pub fn f_integral(&self, term: usize, phi: &Field) -> Result<f64, ModelError> {
        let t = self.term(term)?;
        Ok(integral(&phi.map(|p| t.density(p))))
    }

    /// `Σ_i (F_i(φ), 1)`.
    pub fn f_integral_total(&self, phi: &Field) -> f64 {
        integral(&phi.map(|p| self.terms.iter().map(|t| t.density(p)).sum()))
    }

    /// `½(φ, Lφ)`.
    pub fn quadratic_energy(&self, phi: &Field) -> Result<f64, ModelError> {
        let lphi = apply_multiplier(phi, &self.l_symbol)?;
        Ok(0.5 * inner_product(phi, &lphi)?)
    }

    /// `E(φ) = ½(φ, Lφ) + Σ_i (F_i(φ), 1)`.
    pub fn energy_original(&self, phi: &Field) -> Result<f64, ModelError> {
        Ok(self.quadratic_energy(phi)? + self.f_integral_total(phi))
    }
}

pub fn f_prime(model: &ModelSpec, term: usize, phi: &Field) -> Result<Field, ModelError> {
    model.f_prime(term, phi)
}

pub fn f_integral(model: &ModelSpec, term: usize, phi: &Field) -> Result<f64, ModelError> {
    model.f_integral(term, phi)
}

pub fn energy_original(model: &ModelSpec, phi: &Field) -> Result<f64, ModelError> {
    model.energy_original(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;
    use std::f64::consts::PI;

    fn params(kv: &[(&str, f64)]) -> ModelParams {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn box2(n: usize) -> Arc<GridSpec> {
        make_grid(&[n, n], &[2.0 * PI, 2.0 * PI]).unwrap()
    }

    #[test]
    fn allen_cahn_derivative_value() {
        let m = build_model("allen_cahn", &params(&[("epsilon", 0.4)]), &box2(8)).unwrap();
        assert!((m.terms()[0].derivative(2.0) - 37.5).abs() < 1e-12);
        let one = Field::constant(m.grid(), 1.0);
        assert_eq!(m.f_prime(0, &one).unwrap().max_abs(), 0.0);
        let zero = Field::zeros(m.grid());
        assert_eq!(m.f_prime(0, &zero).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn cahn_hilliard_beta_derivative_value() {
        let m = build_model(
            "cahn_hilliard_beta",
            &params(&[("epsilon", 0.4), ("beta", 2.0)]),
            &box2(8),
        )
        .unwrap();
        assert!((m.terms()[0].derivative(1.0) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn pfc_symbol_and_derivative() {
        let m = build_model("pfc", &params(&[("epsilon", 0.325)]), &box2(8)).unwrap();
        assert!((m.l_symbol().symbol()[0] - 0.675).abs() < 1e-15);
        let f = m.f_prime(0, &Field::constant(m.grid(), -0.5)).unwrap();
        assert!(f.values().iter().all(|&v| (v + 0.125).abs() < 1e-16));
    }

    #[test]
    fn missing_and_unknown() {
        let g = box2(8);
        assert!(matches!(
            build_model("allen_cahn", &params(&[]), &g),
            Err(ModelError::MissingParam {
                param: "epsilon",
                ..
            })
        ));
        assert!(matches!(
            build_model("pfc", &params(&[]), &g),
            Err(ModelError::MissingParam { .. })
        ));
        assert!(matches!(
            build_model("ising", &params(&[]), &g),
            Err(ModelError::UnknownModel(_))
        ));
        let m = build_model("heat", &params(&[]), &g).unwrap();
        assert!(matches!(
            m.f_prime(1, &Field::zeros(&g)),
            Err(ModelError::TermIndex { .. })
        ));
        assert!(matches!(
            m.f_integral(3, &Field::zeros(&g)),
            Err(ModelError::TermIndex { .. })
        ));
    }

    #[test]
    fn allen_cahn_integral_at_zero() {
        let m = build_model("allen_cahn", &params(&[("epsilon", 0.4)]), &box2(16)).unwrap();
        let v = m.f_integral(0, &Field::zeros(m.grid())).unwrap();
        // F(0) = 1/(4ε²) = 1.5625 over |Ω| = 4π².
        assert!((v - 1.5625 * 4.0 * PI * PI).abs() < 1e-12);
        assert!((v - 61.685_027_506_808_49).abs() < 1e-9);
        assert!(
            m.f_integral(0, &Field::constant(m.grid(), 1.0))
                .unwrap()
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn allen_cahn_integral_matches_summation_oracle() {
        let g = box2(32);
        let m = build_model("allen_cahn", &params(&[("epsilon", 0.4)]), &g).unwrap();
        let phi = Field::from_fn(&g, |x| 0.001 * x[0].cos() * x[1].cos());
        // Independent node-by-node sum evaluating the density formula directly.
        let h = 2.0 * PI / 32.0;
        let mut acc = 0.0;
        for i in 0..32 {
            for j in 0..32 {
                let p = 0.001 * (i as f64 * h).cos() * (j as f64 * h).cos();
                acc += (p * p - 1.0).powi(2) / (4.0 * 0.16);
            }
        }
        acc *= h * h;
        assert!((m.f_integral(0, &phi).unwrap() - acc).abs() <= 1e-12 * acc);
    }

    #[test]
    fn energies_of_simple_states() {
        let g = box2(16);
        let ac = build_model("allen_cahn", &params(&[("epsilon", 0.4)]), &g).unwrap();
        assert!(ac.energy_original(&Field::constant(&g, 1.0)).unwrap().abs() < 1e-14);
        let heat = build_model("heat", &params(&[]), &g).unwrap();
        let c = Field::from_fn(&g, |x| x[0].cos());
        assert!((heat.energy_original(&c).unwrap() - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn mobility_must_be_semidefinite() {
        let g = box2(8);
        let l = FourierMultiplier::radial(&g, |k2| k2);
        let bad = FourierMultiplier::constant(&g, -1.0);
        assert!(matches!(
            ModelSpec::new(
                "bad",
                l.clone(),
                bad,
                vec![NonlinearTerm::zero()],
                ModelParams::new()
            ),
            Err(ModelError::NegativeMobility { .. })
        ));
        let ok = FourierMultiplier::constant(&g, 0.0);
        assert!(ModelSpec::new(
            "ok",
            l.clone(),
            ok.clone(),
            vec![NonlinearTerm::zero()],
            ModelParams::new()
        )
        .is_ok());
        assert!(matches!(
            ModelSpec::new("none", l.clone(), ok.clone(), vec![], ModelParams::new()),
            Err(ModelError::TermCount(0))
        ));
        let three = vec![
            NonlinearTerm::zero(),
            NonlinearTerm::zero(),
            NonlinearTerm::zero(),
        ];
        assert!(matches!(
            ModelSpec::new("three", l, ok, three, ModelParams::new()),
            Err(ModelError::TermCount(3))
        ));
    }

    #[test]
    fn split_model_sums_to_cahn_hilliard() {
        let g = box2(8);
        let p = params(&[("epsilon", 0.3), ("beta", 2.0)]);
        let ch = build_model("cahn_hilliard_beta", &p, &g).unwrap();
        let split = build_model("custom_split", &p, &g).unwrap();
        assert_eq!(split.terms().len(), 2);
        for i in 0..50 {
            let x = -2.0 + 0.08 * i as f64;
            let merged = split.merged();
            assert!((merged.terms()[0].density(x) - ch.terms()[0].density(x)).abs() < 1e-12);
            assert!((merged.terms()[0].derivative(x) - ch.terms()[0].derivative(x)).abs() < 1e-12);
        }
    }
}
