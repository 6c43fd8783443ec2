use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{check_trace, dense_oracle_step, ENERGY_RTOL};
use crate::model::{build_model, ModelParams};
use crate::relaxation::{choose_relaxation_bdf2, choose_relaxation_cn, RelaxationInputs};
use crate::schemes::{predictor_pair, SchemeKind, Stepper};
use crate::spectral::{make_grid, Field};
use crate::zero_factor::{
    assemble_quadratic, consistency_residual, solve_zero_factor, AffineFactor, FactorSpec,
};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> CheckResult {
    match f() {
        Ok(detail) => CheckResult {
            name,
            passed: true,
            detail,
        },
        Err(detail) => CheckResult {
            name,
            passed: false,
            detail,
        },
    }
}

fn params(pairs: &[(&str, f64)]) -> ModelParams {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn dense_vs_spectral() -> Result<String, String> {
    let tau = 2.0 * std::f64::consts::PI;
    let grid = make_grid(&[8, 8], &[tau, tau]).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for (name, p) in [
        ("allen_cahn", params(&[("epsilon", 0.4)])),
        (
            "cahn_hilliard_beta",
            params(&[("epsilon", 0.4), ("mobility", 0.5)]),
        ),
        ("pfc", params(&[("epsilon", 0.325)])),
    ] {
        let model = build_model(name, &p, &grid).map_err(|e| e.to_string())?;
        let stepper = Stepper::new(SchemeKind::RzfCn, &model, 0.05, FactorSpec::default())
            .map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let phi0 = Field::from_fn(&grid, |_| rng.gen_range(-1.0..1.0));
            let mut state = stepper.init_state(phi0).map_err(|e| e.to_string())?;
            state.phi_prev = state.phi.map(|v| 0.9 * v);
            let (bar, q) = predictor_pair(&state, &model, 0.05, crate::StepFamily::Cn)
                .map_err(|e| e.to_string())?;
            let (dbar, dq) = dense_oracle_step(&state, &model, 0.05, SchemeKind::RzfCn)
                .map_err(|e| e.to_string())?;
            let scale = dbar.max_abs().max(dq.max_abs()).max(1.0);
            worst = worst
                .max(bar.max_diff(&dbar).unwrap() / scale)
                .max(q.max_diff(&dq).unwrap() / scale);
        }
    }
    if worst <= 1e-12 {
        Ok(format!("max discrepancy {worst:.2e}"))
    } else {
        Err(format!("max discrepancy {worst:.2e} > 1e-12"))
    }
}

fn relaxation_tables() -> Result<String, String> {
    let i = |r_tilde, f_int, dissipation| RelaxationInputs {
        r_tilde,
        f_int,
        dissipation,
    };
    let cases = [
        (choose_relaxation_cn(&i(5.0, 3.0, 123.0)), (0.0, 0.0)),
        (choose_relaxation_cn(&i(3.0, 5.0, 4.0)), (0.0, 0.5)),
        (choose_relaxation_cn(&i(3.0, 5.0, 0.5)), (0.75, 1.0)),
        (choose_relaxation_bdf2(&i(4.0, 4.0, 1.0)), (0.0, 0.0)),
        (choose_relaxation_bdf2(&i(3.0, 5.0, 6.0)), (0.0, 1.0 / 3.0)),
        (choose_relaxation_bdf2(&i(3.0, 5.0, 1.2)), (0.6, 2.0 / 3.0)),
    ];
    for (got, (l, k)) in cases {
        if (got.lambda0 - l).abs() > 1e-15 || (got.kappa - k).abs() > 1e-15 {
            return Err(format!(
                "got ({}, {}), expected ({l}, {k})",
                got.lambda0, got.kappa
            ));
        }
    }
    Ok(format!("{} cases", cases.len()))
}

fn zero_factor_residuals() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let s0 = rng.gen_range(-2.0..2.0);
        let s1 = rng.gen_range(-2.0..0.0);
        let drift = rng.gen_range(-2.0..2.0);
        let m = if rng.gen_bool(0.5) { 1.0 } else { 3.0 };
        let factor = AffineFactor {
            slope: rng.gen_range(0.5..20.0),
            offset: rng.gen_range(-1.0..1.0),
        };
        let q = assemble_quadratic(s0, s1, drift, factor, m);
        let sol = solve_zero_factor(&q, factor, drift, s0, s1, m);
        if sol.fallback.is_none() {
            let res = consistency_residual(sol.p, s0, s1, drift, m);
            worst = worst.max(res.abs() / drift.abs().max(s0.abs()).max(1.0));
        }
    }
    if worst <= 1e-9 {
        Ok(format!("max relative residual {worst:.2e}"))
    } else {
        Err(format!("max relative residual {worst:.2e}"))
    }
}

fn heat_reduction() -> Result<String, String> {
    let grid = make_grid(&[16], &[2.0 * std::f64::consts::PI]).map_err(|e| e.to_string())?;
    let model = build_model("heat", &ModelParams::new(), &grid).map_err(|e| e.to_string())?;
    let phi0 = Field::from_fn(&grid, |x| x[0].cos() + 0.5 * (3.0 * x[0]).sin());
    let mut finals = Vec::new();
    for kind in [
        SchemeKind::SavCn,
        SchemeKind::ZfCn,
        SchemeKind::RzfCn,
        SchemeKind::RmzfCn,
    ] {
        let stepper =
            Stepper::new(kind, &model, 0.1, FactorSpec::default()).map_err(|e| e.to_string())?;
        let mut state = stepper
            .init_state(phi0.clone())
            .map_err(|e| e.to_string())?;
        stepper
            .run_until(&mut state, 1.0)
            .map_err(|e| e.to_string())?;
        finals.push(state.phi);
    }
    let worst = finals[1..]
        .iter()
        .map(|f| f.max_diff(&finals[0]).unwrap())
        .fold(0.0, f64::max);
    if worst <= 1e-12 {
        Ok(format!("max discrepancy {worst:.2e}"))
    } else {
        Err(format!("max discrepancy {worst:.2e}"))
    }
}

fn energy_laws() -> Result<String, String> {
    let tau = 2.0 * std::f64::consts::PI;
    let grid = make_grid(&[16, 16], &[tau, tau]).map_err(|e| e.to_string())?;
    let model = build_model("allen_cahn", &params(&[("epsilon", 0.3)]), &grid)
        .map_err(|e| e.to_string())?;
    let phi0 = Field::from_fn(&grid, |x| 0.8 * x[0].sin() * x[1].cos() + 0.1);
    for kind in crate::schemes::SchemeKind::ALL {
        let stepper =
            Stepper::new(kind, &model, 0.01, FactorSpec::default()).map_err(|e| e.to_string())?;
        let mut state = stepper
            .init_state(phi0.clone())
            .map_err(|e| e.to_string())?;
        let mut reports = vec![stepper.initial_report(&state).map_err(|e| e.to_string())?];
        reports.extend(
            stepper
                .run_until(&mut state, 1.0)
                .map_err(|e| e.to_string())?,
        );
        check_trace(kind, &reports, ENERGY_RTOL).map_err(|v| format!("{kind}: {v:?}"))?;
    }
    Ok("all five schemes".into())
}

/// Fast oracle and invariant checks, one result per check.
pub fn selfcheck() -> Vec<CheckResult> {
    vec![
        check("spectral predictor matches dense oracle", dense_vs_spectral),
        check("relaxation decision tables", relaxation_tables),
        check(
            "zero-factor roots satisfy the scalar equation",
            zero_factor_residuals,
        ),
        check("heat model: CN-family schemes coincide", heat_reduction),
        check("discrete energy laws hold", energy_laws),
    ]
}
