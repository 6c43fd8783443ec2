//! Scalar zero-factor machinery.
//!
//! A zero factor `P(η)` is a linear functional of an auxiliary scalar that
//! vanishes on the exact solution. Within one step it is affine in the
//! step's scalar unknown `u`, `p = slope·u + offset`, so the discrete
//! consistency equation
//!
//! ```text
//! drift = (1 + p) · (s0 + m·p·s1)
//! ```
//!
//! becomes a quadratic in `u`. Here `m` is 1 for Crank-Nicolson and 3 for
//! BDF2, `s0`/`s1` are the inner products of the extrapolated `F'` with the
//! predictor increment and the correction direction, and `drift` is the
//! change of the auxiliary energy predicted by the semi-implicit step.

use std::fmt;

use crate::error::SchemeError;

/// The two-level time discretization a factor is evaluated under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StepFamily {
    Cn,
    Bdf2,
}

impl StepFamily {
    /// Weight of the correction direction in the scalar equation.
    pub fn multiplicity(self) -> f64 {
        match self {
            StepFamily::Cn => 1.0,
            StepFamily::Bdf2 => 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FactorKind {
    /// `P = k·η`, started from `η(0) = 0`.
    Proportional,
    /// `P = k·η_t`, started from an arbitrary `η(0) = c₀`.
    Rate,
}

impl FactorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FactorKind::Proportional => "proportional",
            FactorKind::Rate => "rate",
        }
    }
}

impl std::str::FromStr for FactorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proportional" | "eta" => Ok(FactorKind::Proportional),
            "rate" | "eta_t" => Ok(FactorKind::Rate),
            other => Err(format!(
                "unknown factor kind `{other}` (expected proportional or rate)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorSpec {
    kind: FactorKind,
    k: f64,
    eta_init: f64,
}

impl FactorSpec {
    pub fn new(kind: FactorKind, k: f64, eta_init: f64) -> Result<Self, SchemeError> {
        if k == 0.0 || !k.is_finite() {
            return Err(SchemeError::Factor(format!(
                "factor constant k must be nonzero and finite, got {k}"
            )));
        }
        if !eta_init.is_finite() {
            return Err(SchemeError::Factor(format!(
                "eta_init must be finite, got {eta_init}"
            )));
        }
        if kind == FactorKind::Proportional && eta_init != 0.0 {
            return Err(SchemeError::Factor(format!(
                "a proportional factor must start from eta = 0, got {eta_init}"
            )));
        }
        Ok(Self { kind, k, eta_init })
    }

    pub fn proportional(k: f64) -> Result<Self, SchemeError> {
        Self::new(FactorKind::Proportional, k, 0.0)
    }

    pub fn rate(k: f64, eta_init: f64) -> Result<Self, SchemeError> {
        Self::new(FactorKind::Rate, k, eta_init)
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn eta_init(&self) -> f64 {
        self.eta_init
    }
}

impl Default for FactorSpec {
    /// `P = η_t` with `η(0) = 0`.
    fn default() -> Self {
        Self {
            kind: FactorKind::Rate,
            k: 1.0,
            eta_init: 0.0,
        }
    }
}

/// `p = slope·u + offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineFactor {
    pub slope: f64,
    pub offset: f64,
}

impl AffineFactor {
    pub fn value(&self, u: f64) -> f64 {
        self.slope * u + self.offset
    }

    /// The unknown that yields factor value `p`.
    pub fn unknown_for(&self, p: f64) -> f64 {
        (p - self.offset) / self.slope
    }
}

/// Affine form of a factor in the step unknown.
///
/// Crank-Nicolson: proportional factors are solved for `η^{n+1/2}`, rate
/// factors for `η^{n+1}` with `η_t ≈ (η^{n+1} - η^n)/dt`. BDF2 solves for
/// `η^{n+1}` with `η_t ≈ (3η^{n+1} - 4η^n + η^{n-1})/(2dt)`.
pub fn affine_factor_form(
    spec: &FactorSpec,
    family: StepFamily,
    dt: f64,
    eta_n: f64,
    eta_nm1: f64,
) -> AffineFactor {
    let k = spec.k;
    match (spec.kind, family) {
        (FactorKind::Proportional, _) => AffineFactor {
            slope: k,
            offset: 0.0,
        },
        (FactorKind::Rate, StepFamily::Cn) => AffineFactor {
            slope: k / dt,
            offset: -k / dt * eta_n,
        },
        (FactorKind::Rate, StepFamily::Bdf2) => AffineFactor {
            slope: 1.5 * k / dt,
            offset: -k * (4.0 * eta_n - eta_nm1) / (2.0 * dt),
        },
    }
}

/// `a·u² + b·u + c = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticCoeffs {
    pub fn eval(&self, u: f64) -> f64 {
        (self.a * u + self.b) * u + self.c
    }

    pub fn scale(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(1.0)
    }
}

/// Expands `drift = (1+p)(s0 + m·p·s1)` with `p = slope·u + offset`.
pub fn assemble_quadratic(
    s0: f64,
    s1: f64,
    drift: f64,
    factor: AffineFactor,
    multiplicity: f64,
) -> QuadraticCoeffs {
    let AffineFactor { slope, offset } = factor;
    let m = multiplicity;
    QuadraticCoeffs {
        a: m * s1 * slope * slope,
        b: slope * (s0 + m * s1 * (1.0 + 2.0 * offset)),
        c: (1.0 + offset) * (s0 + m * offset * s1) - drift,
    }
}

/// Residual of the scalar consistency equation at factor value `p`.
pub fn consistency_residual(p: f64, s0: f64, s1: f64, drift: f64, multiplicity: f64) -> f64 {
    drift - (1.0 + p) * (s0 + multiplicity * p * s1)
}

/// Which solution path produced a step's factor value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Quadratic,
    Linear,
    Fallback,
    Newton,
    Sav,
    Initial,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Quadratic => "quadratic",
            Branch::Linear => "linear",
            Branch::Fallback => "fallback",
            Branch::Newton => "newton",
            Branch::Sav => "sav",
            Branch::Initial => "initial",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "quadratic" => Branch::Quadratic,
            "linear" => Branch::Linear,
            "fallback" => Branch::Fallback,
            "newton" => Branch::Newton,
            "sav" => Branch::Sav,
            "initial" => Branch::Initial,
            other => return Err(format!("unknown branch `{other}`")),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FallbackReason {
    TinyDrift,
    NegativeDiscriminant,
    NearMinusOne,
    Degenerate,
}

/// Root selection among two real roots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RootPolicy {
    /// The root with the smaller `|p|`; the exact solution has `p ≡ 0`.
    #[default]
    MinAbsFactor,
    /// `(-b + √disc) / 2a`.
    Plus,
    /// `(-b - √disc) / 2a`.
    Minus,
}

impl std::str::FromStr for RootPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min_abs" => Ok(RootPolicy::MinAbsFactor),
            "plus" => Ok(RootPolicy::Plus),
            "minus" => Ok(RootPolicy::Minus),
            other => Err(format!(
                "unknown root policy `{other}` (expected min_abs, plus or minus)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroFactorSolution {
    pub u: f64,
    pub p: f64,
    pub branch: Branch,
    pub fallback: Option<FallbackReason>,
}

/// Drift below which the scalar equation is dominated by round-off.
pub const TINY_DRIFT: f64 = 1e-15;
/// Roots closer than this to -1 are treated as round-off artefacts and rejected.
pub const MINUS_ONE_BAND: f64 = 1e-6;
/// Relative size of `a` below which the equation is treated as linear.
pub const LINEAR_THRESHOLD: f64 = 1e-14;

pub fn solve_zero_factor(
    q: &QuadraticCoeffs,
    factor: AffineFactor,
    drift: f64,
    s0: f64,
    s1: f64,
    multiplicity: f64,
) -> ZeroFactorSolution {
    solve_zero_factor_with(
        q,
        factor,
        drift,
        s0,
        s1,
        multiplicity,
        RootPolicy::default(),
    )
}

/// Solves the scalar equation and classifies the outcome.
///
/// Fallback sets `p = 0`, the trivial root of `p·drift = p(1+p)(s0+m·p·s1)`,
/// which turns the step into the plain semi-implicit predictor. A negative
/// discriminant instead takes the vertex of the quadratic, the least-residual
/// `p`; callers then assign `R̃` from the consistency equation at that `p`.
pub fn solve_zero_factor_with(
    q: &QuadraticCoeffs,
    factor: AffineFactor,
    drift: f64,
    s0: f64,
    s1: f64,
    multiplicity: f64,
    policy: RootPolicy,
) -> ZeroFactorSolution {
    let fallback = |reason: FallbackReason| {
        log::debug!(
            "zero factor fallback: {reason:?} (drift {drift:e}, s0 {s0:e}, m·s1 {:e})",
            multiplicity * s1
        );
        ZeroFactorSolution {
            u: factor.unknown_for(0.0),
            p: 0.0,
            branch: Branch::Fallback,
            fallback: Some(reason),
        }
    };
    if !(drift.abs() >= TINY_DRIFT) {
        return fallback(FallbackReason::TinyDrift);
    }
    let QuadraticCoeffs { a, b, c } = *q;

    let (u, branch) = if a.abs() <= LINEAR_THRESHOLD * b.abs().max(c.abs()).max(1.0) {
        if b == 0.0 || !(b.abs() > LINEAR_THRESHOLD * c.abs()) {
            return fallback(FallbackReason::Degenerate);
        }
        (-c / b, Branch::Linear)
    } else {
        let disc = b * b - 4.0 * a * c;
        if !disc.is_finite() {
            return fallback(FallbackReason::Degenerate);
        }
        if disc < 0.0 {
            // No real root: take the vertex, where |drift - g(p)| is smallest.
            let u = -b / (2.0 * a);
            log::debug!("zero factor fallback: NegativeDiscriminant (drift {drift:e}, s0 {s0:e}, vertex u {u:e})");
            return ZeroFactorSolution {
                u,
                p: factor.value(u),
                branch: Branch::Fallback,
                fallback: Some(FallbackReason::NegativeDiscriminant),
            };
        }
        let sq = disc.sqrt();
        let u = match policy {
            RootPolicy::Plus => (-b + sq) / (2.0 * a),
            RootPolicy::Minus => (-b - sq) / (2.0 * a),
            RootPolicy::MinAbsFactor => {
                // Cancellation-free pair of roots.
                let t = -0.5 * (b + sq.copysign(b));
                let r1 = t / a;
                let r2 = if t != 0.0 { c / t } else { r1 };
                if factor.value(r1).abs() <= factor.value(r2).abs() {
                    r1
                } else {
                    r2
                }
            }
        };
        (polish(q, u), Branch::Quadratic)
    };

    let p = factor.value(u);
    if !p.is_finite() {
        return fallback(FallbackReason::Degenerate);
    }
    if (p + 1.0).abs() < MINUS_ONE_BAND {
        return fallback(FallbackReason::NearMinusOne);
    }
    ZeroFactorSolution {
        u,
        p,
        branch,
        fallback: None,
    }
}

/// One Newton correction on the quadratic, kept only if it lowers the residual.
fn polish(q: &QuadraticCoeffs, u: f64) -> f64 {
    let d = 2.0 * q.a * u + q.b;
    if d == 0.0 {
        return u;
    }
    let v = u - q.eval(u) / d;
    if q.eval(v).abs() < q.eval(u).abs() {
        v
    } else {
        u
    }
}

/// Several nonlinear terms whose factors share one step unknown `u`,
/// `f_i = slope_i·u + offset_i`. The consistency equation is
/// `drift = Σ_i (1 + f_i)(a_i + Σ_j f_j·b_ij)` with `a_i = (F_i', φ̄ - φⁿ)`
/// and `b_ij = (F_i', q_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SharedFactorSystem {
    pub factors: Vec<AffineFactor>,
    pub a: Vec<f64>,
    pub b: Vec<Vec<f64>>,
    pub drift: f64,
    /// `(q_i, q_j)`, used to pick the root with the smallest correction.
    pub gram: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SharedFactorSolution {
    pub u: f64,
    pub values: Vec<f64>,
    pub branch: Branch,
    pub fallback: Option<FallbackReason>,
}

impl SharedFactorSystem {
    pub fn quadratic(&self) -> QuadraticCoeffs {
        let n = self.factors.len();
        let mut q = QuadraticCoeffs {
            a: 0.0,
            b: 0.0,
            c: -self.drift,
        };
        for i in 0..n {
            let fi = self.factors[i];
            let ci = self.a[i]
                + (0..n)
                    .map(|j| self.factors[j].offset * self.b[i][j])
                    .sum::<f64>();
            let ei: f64 = (0..n).map(|j| self.factors[j].slope * self.b[i][j]).sum();
            q.a += fi.slope * ei;
            q.b += fi.slope * ci + (1.0 + fi.offset) * ei;
            q.c += (1.0 + fi.offset) * ci;
        }
        q
    }

    pub fn values(&self, u: f64) -> Vec<f64> {
        self.factors.iter().map(|f| f.value(u)).collect()
    }

    /// `drift - Σ_i (1 + f_i)(a_i + Σ_j f_j·b_ij)`.
    pub fn residual(&self, values: &[f64]) -> f64 {
        let rhs: f64 = (0..values.len())
            .map(|i| {
                let inner = self.a[i]
                    + (0..values.len())
                        .map(|j| values[j] * self.b[i][j])
                        .sum::<f64>();
                (1.0 + values[i]) * inner
            })
            .sum();
        self.drift - rhs
    }

    fn correction_size(&self, u: f64) -> (f64, f64) {
        let v = self.values(u);
        let mut norm = 0.0;
        for i in 0..v.len() {
            for j in 0..v.len() {
                norm += v[i] * v[j] * self.gram[i][j];
            }
        }
        (norm, v.iter().map(|x| x.abs()).sum())
    }

    fn fallback(&self, reason: FallbackReason) -> SharedFactorSolution {
        log::debug!(
            "shared zero factor fallback: {reason:?} (drift {:e})",
            self.drift
        );
        // Keep the history of a rate factor at rest; proportional factors vanish at u = 0.
        let u = self
            .factors
            .iter()
            .map(|f| f.unknown_for(0.0))
            .find(|u| *u != 0.0)
            .unwrap_or(0.0);
        SharedFactorSolution {
            u,
            values: vec![0.0; self.factors.len()],
            branch: Branch::Fallback,
            fallback: Some(reason),
        }
    }

    pub fn solve(&self, policy: RootPolicy) -> SharedFactorSolution {
        if !(self.drift.abs() >= TINY_DRIFT) {
            return self.fallback(FallbackReason::TinyDrift);
        }
        let q = self.quadratic();
        let QuadraticCoeffs { a, b, c } = q;
        let (u, branch) = if a.abs() <= LINEAR_THRESHOLD * b.abs().max(c.abs()).max(1.0) {
            if b == 0.0 || !(b.abs() > LINEAR_THRESHOLD * c.abs()) {
                return self.fallback(FallbackReason::Degenerate);
            }
            (-c / b, Branch::Linear)
        } else {
            let disc = b * b - 4.0 * a * c;
            if !disc.is_finite() {
                return self.fallback(FallbackReason::Degenerate);
            }
            if disc < 0.0 {
                // Least-residual u, as for a single factor.
                let u = -b / (2.0 * a);
                log::debug!("shared zero factor fallback: NegativeDiscriminant (drift {:e}, vertex u {u:e})", self.drift);
                return SharedFactorSolution {
                    u,
                    values: self.values(u),
                    branch: Branch::Fallback,
                    fallback: Some(FallbackReason::NegativeDiscriminant),
                };
            }
            let sq = disc.sqrt();
            let u = match policy {
                RootPolicy::Plus => (-b + sq) / (2.0 * a),
                RootPolicy::Minus => (-b - sq) / (2.0 * a),
                RootPolicy::MinAbsFactor => {
                    let t = -0.5 * (b + sq.copysign(b));
                    let r1 = t / a;
                    let r2 = if t != 0.0 { c / t } else { r1 };
                    let (n1, s1) = self.correction_size(r1);
                    let (n2, s2) = self.correction_size(r2);
                    if n1 < n2 || (n1 == n2 && s1 <= s2) {
                        r1
                    } else {
                        r2
                    }
                }
            };
            (polish(&q, u), Branch::Quadratic)
        };
        let values = self.values(u);
        if values.iter().any(|v| !v.is_finite()) {
            return self.fallback(FallbackReason::Degenerate);
        }
        if values.iter().any(|v| (v + 1.0).abs() < MINUS_ONE_BAND) {
            return self.fallback(FallbackReason::NearMinusOne);
        }
        SharedFactorSolution {
            u,
            values,
            branch,
            fallback: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_spec_invariants() {
        assert!(FactorSpec::proportional(0.0).is_err());
        assert!(FactorSpec::new(FactorKind::Proportional, 1.0, 0.3).is_err());
        assert!(FactorSpec::rate(2.0, 0.3).is_ok());
        assert_eq!("eta_t".parse::<FactorKind>().unwrap(), FactorKind::Rate);
    }

    #[test]
    fn affine_forms() {
        let prop = FactorSpec::proportional(1.0).unwrap();
        assert_eq!(
            affine_factor_form(&prop, StepFamily::Cn, 0.1, 5.0, 7.0),
            AffineFactor {
                slope: 1.0,
                offset: 0.0
            }
        );
        let rate = FactorSpec::rate(1.0, 0.0).unwrap();
        let f = affine_factor_form(&rate, StepFamily::Cn, 0.5, 0.2, 0.0);
        assert!((f.slope - 2.0).abs() < 1e-15 && (f.offset + 0.4).abs() < 1e-15);
        let f = affine_factor_form(&rate, StepFamily::Bdf2, 1.0, 0.0, 0.0);
        assert_eq!(
            f,
            AffineFactor {
                slope: 1.5,
                offset: 0.0
            }
        );
        // BDF2 rate reproduces k(3η^{n+1} - 4η^n + η^{n-1})/(2dt).
        let f = affine_factor_form(
            &FactorSpec::rate(2.0, 0.0).unwrap(),
            StepFamily::Bdf2,
            0.1,
            0.3,
            -0.2,
        );
        let u = 0.7;
        let direct = 2.0 * (3.0 * u - 4.0 * 0.3 - 0.2) / 0.2;
        assert!((f.value(u) - direct).abs() < 1e-12);
    }

    #[test]
    fn quadratic_assembly_examples() {
        let unit = AffineFactor {
            slope: 1.0,
            offset: 0.0,
        };
        assert_eq!(
            assemble_quadratic(3.0, 2.0, 1.0, unit, 1.0),
            QuadraticCoeffs {
                a: 2.0,
                b: 5.0,
                c: 2.0
            }
        );
        let q = assemble_quadratic(
            4.0,
            0.0,
            1.5,
            AffineFactor {
                slope: 2.0,
                offset: 0.0,
            },
            1.0,
        );
        assert_eq!(
            q,
            QuadraticCoeffs {
                a: 0.0,
                b: 8.0,
                c: 2.5
            }
        );
        // Drift built so that u = 0 (p = offset) is consistent.
        let (s0, s1, m, off) = (1.3, -0.4, 3.0, 0.25);
        let drift = s0 * (1.0 + off) + m * off * s1 * (1.0 + off);
        let q = assemble_quadratic(
            s0,
            s1,
            drift,
            AffineFactor {
                slope: 0.7,
                offset: off,
            },
            m,
        );
        assert!(q.c.abs() < 1e-15);
    }

    #[test]
    fn selects_smaller_factor_root() {
        let unit = AffineFactor {
            slope: 1.0,
            offset: 0.0,
        };
        let q = QuadraticCoeffs {
            a: 2.0,
            b: 5.0,
            c: 2.0,
        };
        let sol = solve_zero_factor(&q, unit, 1.0, 3.0, 2.0, 1.0);
        assert_eq!(sol.branch, Branch::Quadratic);
        assert!((sol.u + 0.5).abs() < 1e-15);
        assert!((sol.p + 0.5).abs() < 1e-15);
        assert!(consistency_residual(sol.p, 3.0, 2.0, 1.0, 1.0).abs() < 1e-14);
    }

    #[test]
    fn linear_branch() {
        let unit = AffineFactor {
            slope: 1.0,
            offset: 0.0,
        };
        let q = QuadraticCoeffs {
            a: 0.0,
            b: 2.0,
            c: -1.0,
        };
        let sol = solve_zero_factor(&q, unit, 1.0, 2.0, 0.0, 1.0);
        assert_eq!(sol.branch, Branch::Linear);
        assert!((sol.u - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fallbacks() {
        let f = AffineFactor {
            slope: 2.0,
            offset: -0.4,
        };
        let q = QuadraticCoeffs {
            a: 1.0,
            b: 1.0,
            c: 1.0,
        };
        let sol = solve_zero_factor(&q, f, 1e-16, 1.0, 1.0, 1.0);
        assert_eq!(sol.branch, Branch::Fallback);
        assert_eq!(sol.fallback, Some(FallbackReason::TinyDrift));
        assert_eq!(sol.p, 0.0);
        assert!((sol.u - 0.2).abs() < 1e-15);

        // No nonlinearity at all.
        let unit = AffineFactor {
            slope: 1.0,
            offset: 0.0,
        };
        let q = assemble_quadratic(0.0, 0.0, 0.0, unit, 1.0);
        let sol = solve_zero_factor(&q, unit, 0.0, 0.0, 0.0, 1.0);
        assert_eq!((sol.branch, sol.p), (Branch::Fallback, 0.0));

        // (1+p)(1 + p) = -1 has no real root.
        let q = assemble_quadratic(1.0, 1.0, -1.0, unit, 1.0);
        let sol = solve_zero_factor(&q, unit, -1.0, 1.0, 1.0, 1.0);
        assert_eq!(sol.fallback, Some(FallbackReason::NegativeDiscriminant));
        assert!((sol.p + 1.0).abs() < 1e-15);

        // Root p = -1 + 1e-8 (and about -5): within round-off of -1.
        let (s0, s1) = (5.0, 1.0);
        let p = -1.0 + 1e-8;
        let drift = (1.0 + p) * (s0 + p * s1);
        let q = assemble_quadratic(s0, s1, drift, unit, 1.0);
        let sol = solve_zero_factor(&q, unit, drift, s0, s1, 1.0);
        assert_eq!(sol.fallback, Some(FallbackReason::NearMinusOne));
    }

    fn two_terms(drift: f64, b11: f64) -> SharedFactorSystem {
        let unit = AffineFactor {
            slope: 1.0,
            offset: 0.0,
        };
        SharedFactorSystem {
            factors: vec![
                unit,
                AffineFactor {
                    slope: 0.5,
                    offset: 0.1,
                },
            ],
            a: vec![1.0, 0.5],
            b: vec![vec![b11, 0.2], vec![0.2, 0.3]],
            drift,
            gram: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        }
    }

    #[test]
    fn shared_factor_roots_and_vertex() {
        let sys = two_terms(0.8, 1.0);
        let sol = sys.solve(RootPolicy::MinAbsFactor);
        assert_eq!(sol.branch, Branch::Quadratic);
        assert!(sys.residual(&sol.values).abs() < 1e-13);

        let sys = two_terms(-5.0, 1.0);
        let q = sys.quadratic();
        assert!(q.b * q.b - 4.0 * q.a * q.c < 0.0);
        let sol = sys.solve(RootPolicy::MinAbsFactor);
        assert_eq!(sol.fallback, Some(FallbackReason::NegativeDiscriminant));
        assert!((sol.u + q.b / (2.0 * q.a)).abs() < 1e-15);
        assert_eq!(sol.values, sys.values(sol.u));
    }

    #[test]
    fn shared_factor_with_an_inert_term_is_the_single_factor_problem() {
        let unit = AffineFactor {
            slope: 1.0,
            offset: 0.0,
        };
        let (s0, s1, drift) = (2.0, 0.7, 0.4);
        let sys = SharedFactorSystem {
            factors: vec![unit, unit],
            a: vec![s0, 0.0],
            b: vec![vec![s1, 0.0], vec![0.0, 0.0]],
            drift,
            gram: vec![vec![1.0, 0.0], vec![0.0, 0.0]],
        };
        let shared = sys.solve(RootPolicy::MinAbsFactor);
        let single = solve_zero_factor(
            &assemble_quadratic(s0, s1, drift, unit, 1.0),
            unit,
            drift,
            s0,
            s1,
            1.0,
        );
        assert!((shared.values[0] - single.p).abs() < 1e-15);
    }

    #[test]
    fn root_policies_pick_signed_roots() {
        let unit = AffineFactor {
            slope: 1.0,
            offset: 0.0,
        };
        let q = QuadraticCoeffs {
            a: 2.0,
            b: 5.0,
            c: 2.0,
        };
        let plus = solve_zero_factor_with(&q, unit, 1.0, 3.0, 2.0, 1.0, RootPolicy::Plus);
        assert!((plus.u + 0.5).abs() < 1e-15);
        let minus = solve_zero_factor_with(&q, unit, 1.0, 3.0, 2.0, 1.0, RootPolicy::Minus);
        assert!((minus.u + 2.0).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn accepted_roots_satisfy_the_equation(
                s0 in -5.0f64..5.0, s1 in -5.0f64..5.0, drift in -5.0f64..5.0,
                slope in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0], offset in -1.0f64..1.0,
                bdf in any::<bool>(),
            ) {
                let m = if bdf { 3.0 } else { 1.0 };
                let f = AffineFactor { slope, offset };
                let q = assemble_quadratic(s0, s1, drift, f, m);
                let sol = solve_zero_factor(&q, f, drift, s0, s1, m);
                if sol.branch != Branch::Fallback {
                    let r = consistency_residual(sol.p, s0, s1, drift, m);
                    prop_assert!(r.abs() <= 1e-10 * drift.abs().max(1.0), "residual {r}");
                    prop_assert!(q.eval(sol.u).abs() <= 1e-10 * q.scale());
                    // Root preference: the other root never has smaller |p|.
                    if sol.branch == Branch::Quadratic {
                        let other = -q.b / q.a - sol.u;
                        prop_assert!(sol.p.abs() <= f.value(other).abs() + 1e-9);
                    }
                } else if sol.fallback == Some(FallbackReason::NegativeDiscriminant) {
                    // Vertex of g(p) = (1+p)(s0 + m·p·s1).
                    let vertex = -(s0 + m * s1) / (2.0 * m * s1);
                    prop_assert!((sol.p - vertex).abs() <= 1e-9 * vertex.abs().max(1.0));
                } else {
                    prop_assert_eq!(sol.p, 0.0);
                }
            }
        }
    }
}
