use crate::diagnostics::{compute_mu, dissipation, modified_energy};
use crate::error::SchemeError;
use crate::relaxation::{choose_relaxation_bdf2, choose_relaxation_cn, relax_r, RelaxationInputs};
use crate::spectral::{inner_product, Field};
use crate::zero_factor::{
    affine_factor_form, assemble_quadratic, consistency_residual, solve_zero_factor_with, Branch,
    SharedFactorSystem, StepFamily,
};

use super::{SchemeState, StepReport, Stepper, TermSplit};

impl Stepper {
    pub(super) fn step_rzf_cn(&self, state: &mut SchemeState) -> Result<StepReport, SchemeError> {
        self.step_rzf(state, StepFamily::Cn)
    }

    pub(super) fn step_rzf_bdf2(&self, state: &mut SchemeState) -> Result<StepReport, SchemeError> {
        self.step_rzf(state, StepFamily::Bdf2)
    }

    /// First step of a BDF2 run: one relaxed Crank-Nicolson step from `φ⁻¹ = φ⁰`.
    pub(super) fn bootstrap_first_step(
        &self,
        state: &mut SchemeState,
    ) -> Result<StepReport, SchemeError> {
        let mut report = self.step_rzf(state, StepFamily::Cn)?;
        report.bootstrap = true;
        Ok(report)
    }

    /// One relaxed zero-factor step with a single (summed) nonlinear term.
    fn step_rzf(
        &self,
        state: &mut SchemeState,
        family: StepFamily,
    ) -> Result<StepReport, SchemeError> {
        let model = &self.model;
        let dt = self.dt;
        let pred = self.predict(state, family, TermSplit::Merged)?;
        let fp = &pred.fprime[0];
        let q = &pred.q[0];
        let r_n = state.r_total();
        let r_nm1 = state.r_prev_total();
        let r_bar = model.f_integral_total(&pred.phi_bar);
        let m = family.multiplicity();
        let (drift, increment) = match family {
            StepFamily::Cn => (r_bar - r_n, pred.phi_bar.axpy(-1.0, &state.phi)?),
            StepFamily::Bdf2 => (
                3.0 * r_bar - 4.0 * r_n + r_nm1,
                pred.phi_bar
                    .zip_with(&state.phi, |b, x| 3.0 * b - 4.0 * x)?
                    .axpy(1.0, &state.phi_prev)?,
            ),
        };
        let s0 = inner_product(fp, &increment)?;
        let s1 = inner_product(fp, q)?;
        let factor = affine_factor_form(&self.factor, family, dt, state.eta, state.eta_prev);
        let quad = assemble_quadratic(s0, s1, drift, factor, m);
        let sol =
            solve_zero_factor_with(&quad, factor, drift, s0, s1, m, self.settings.root_policy);
        let p = sol.p;

        // On fallback R̃ takes the value the consistency equation assigns at the chosen p.
        let assigned = (1.0 + p) * (s0 + m * p * s1);
        let r_tilde = match (sol.branch, family) {
            (Branch::Fallback, StepFamily::Cn) => r_n + assigned,
            (Branch::Fallback, StepFamily::Bdf2) => (4.0 * r_n - r_nm1 + assigned) / 3.0,
            _ => r_bar,
        };
        let drift_used = match family {
            StepFamily::Cn => r_tilde - r_n,
            StepFamily::Bdf2 => 3.0 * r_tilde - 4.0 * r_n + r_nm1,
        };
        let residual = consistency_residual(p, s0, s1, drift_used, m);

        let phi_new = pred.phi_bar.axpy(p, q)?;
        let mu = compute_mu(model, family, &phi_new, &state.phi, &[(p, fp)])?;
        let diss = dissipation(
            model,
            family,
            dt,
            &mu,
            &phi_new,
            &state.phi,
            &state.phi_prev,
        )?;
        let f_int = model.f_integral_total(&phi_new);
        let inputs = RelaxationInputs {
            r_tilde,
            f_int,
            dissipation: diss,
        };
        let choice = match family {
            StepFamily::Cn => choose_relaxation_cn(&inputs),
            StepFamily::Bdf2 => choose_relaxation_bdf2(&inputs),
        };
        let r_new = relax_r(choice.lambda0, r_tilde, f_int)?;
        let quad_energy = model.quadratic_energy(&phi_new)?;

        self.commit(state, phi_new, vec![r_new], sol.u, p);
        let e_mod = match self.kind.family() {
            StepFamily::Cn => quad_energy + r_new,
            StepFamily::Bdf2 => modified_energy(self.kind, model, state)?,
        };
        Ok(StepReport {
            step: state.step,
            t: state.t,
            e_orig: quad_energy + f_int,
            e_mod,
            r: r_new,
            f_int,
            p_value: p,
            s_value: 0.0,
            lambda0: choice.lambda0,
            kappa: choice.kappa,
            dissipation: diss,
            branch: sol.branch,
            r_tilde,
            residual,
            bootstrap: false,
        })
    }

    /// Two nonlinear terms with factors `p`, `s` affine in one shared unknown.
    pub(super) fn step_rmzf_cn(&self, state: &mut SchemeState) -> Result<StepReport, SchemeError> {
        let model = &self.model;
        let dt = self.dt;
        let family = StepFamily::Cn;
        let pred = self.predict(state, family, TermSplit::Split)?;
        let n = pred.q.len();
        let increment = pred.phi_bar.axpy(-1.0, &state.phi)?;
        let r_bar: Vec<f64> = (0..n)
            .map(|i| model.f_integral(i, &pred.phi_bar))
            .collect::<Result<_, _>>()?;
        let drift: f64 = (0..n).map(|i| r_bar[i] - state.r[i]).sum();
        let mut a = Vec::with_capacity(n);
        let mut b = vec![vec![0.0; n]; n];
        let mut gram = vec![vec![0.0; n]; n];
        for i in 0..n {
            a.push(inner_product(&pred.fprime[i], &increment)?);
            for j in 0..n {
                b[i][j] = inner_product(&pred.fprime[i], &pred.q[j])?;
                gram[i][j] = inner_product(&pred.q[i], &pred.q[j])?;
            }
        }
        let factors = [&self.factor, &self.factor2]
            .iter()
            .map(|spec| affine_factor_form(spec, family, dt, state.eta, state.eta_prev))
            .collect();
        let mut system = SharedFactorSystem {
            factors,
            a,
            b,
            drift,
            gram,
        };
        let sol = system.solve(self.settings.root_policy);
        let r_tilde: Vec<f64> = match sol.branch {
            // Each R̃_i takes the value the consistency equation assigns to its term.
            Branch::Fallback => (0..n)
                .map(|i| {
                    let inner =
                        system.a[i] + (0..n).map(|j| sol.values[j] * system.b[i][j]).sum::<f64>();
                    state.r[i] + (1.0 + sol.values[i]) * inner
                })
                .collect(),
            _ => r_bar,
        };
        system.drift = (0..n).map(|i| r_tilde[i] - state.r[i]).sum();
        let residual = system.residual(&sol.values);

        let mut phi_new = pred.phi_bar.clone();
        for (f, qi) in sol.values.iter().zip(&pred.q) {
            phi_new = phi_new.axpy(*f, qi)?;
        }
        let forces: Vec<(f64, &Field)> =
            sol.values.iter().copied().zip(pred.fprime.iter()).collect();
        let mu = compute_mu(model, family, &phi_new, &state.phi, &forces)?;
        let diss = dissipation(
            model,
            family,
            dt,
            &mu,
            &phi_new,
            &state.phi,
            &state.phi_prev,
        )?;
        let f_int: Vec<f64> = (0..n)
            .map(|i| model.f_integral(i, &phi_new))
            .collect::<Result<_, _>>()?;
        let inputs = RelaxationInputs {
            r_tilde: r_tilde.iter().sum(),
            f_int: f_int.iter().sum(),
            dissipation: diss,
        };
        let choice = choose_relaxation_cn(&inputs);
        let r_new: Vec<f64> = (0..n)
            .map(|i| relax_r(choice.lambda0, r_tilde[i], f_int[i]))
            .collect::<Result<_, _>>()?;
        let quad_energy = model.quadratic_energy(&phi_new)?;
        let p = sol.values[0];
        let s = sol.values.get(1).copied().unwrap_or(0.0);

        self.commit(state, phi_new, r_new, sol.u, p);
        let e_mod = quad_energy + state.r_total();
        Ok(StepReport {
            step: state.step,
            t: state.t,
            e_orig: quad_energy + inputs.f_int,
            e_mod,
            r: state.r_total(),
            f_int: inputs.f_int,
            p_value: p,
            s_value: s,
            lambda0: choice.lambda0,
            kappa: choice.kappa,
            dissipation: diss,
            branch: sol.branch,
            r_tilde: inputs.r_tilde,
            residual,
            bootstrap: false,
        })
    }

    /// Linear SAV Crank-Nicolson with `r = √(E₁(φ) + C)`.
    pub(super) fn step_sav_cn(&self, state: &mut SchemeState) -> Result<StepReport, SchemeError> {
        let model = &self.model;
        let dt = self.dt;
        let family = StepFamily::Cn;
        let pred = self.predict(state, family, TermSplit::Merged)?;
        let fp = &pred.fprime[0];
        let q = &pred.q[0];
        let c = model.c_sav();
        let s2 = model.f_integral_total(&pred.phi_hat) + c;
        if !(s2 > 0.0) {
            return Err(SchemeError::SavDenominator(s2));
        }
        let s = s2.sqrt();
        let s0 = inner_product(fp, &pred.phi_bar.axpy(-1.0, &state.phi)?)?;
        let s1 = inner_product(fp, q)?;
        // ρ = r^{n+1/2} solves ρ(1 - s1/(4S²)) = rⁿ + (s0 - s1)/(4S).
        let denom = 1.0 - s1 / (4.0 * s2);
        if !(denom.abs() > 1e-14) {
            return Err(SchemeError::SavDenominator(denom));
        }
        let rho = (state.r_sav + (s0 - s1) / (4.0 * s)) / denom;
        let p = rho / s - 1.0;
        let phi_new = pred.phi_bar.axpy(p, q)?;
        let r_sav_new = 2.0 * rho - state.r_sav;
        let residual = (r_sav_new - state.r_sav)
            - inner_product(fp, &phi_new.axpy(-1.0, &state.phi)?)? / (2.0 * s);

        let mu = compute_mu(model, family, &phi_new, &state.phi, &[(p, fp)])?;
        let diss = dissipation(
            model,
            family,
            dt,
            &mu,
            &phi_new,
            &state.phi,
            &state.phi_prev,
        )?;
        let f_int = model.f_integral_total(&phi_new);
        let quad_energy = model.quadratic_energy(&phi_new)?;
        let r_aux = r_sav_new * r_sav_new - c;

        state.r_sav = r_sav_new;
        let eta = state.eta;
        self.commit(state, phi_new, vec![r_aux], eta, p);
        Ok(StepReport {
            step: state.step,
            t: state.t,
            e_orig: quad_energy + f_int,
            e_mod: quad_energy + r_aux,
            r: r_aux,
            f_int,
            p_value: p,
            s_value: 0.0,
            lambda0: 0.0,
            kappa: 0.0,
            dissipation: diss,
            branch: Branch::Sav,
            r_tilde: r_aux,
            residual,
            bootstrap: false,
        })
    }

    /// Nonlinear zero-factor Crank-Nicolson: `R ≡ (F(φ), 1)`, `p` by Newton.
    pub(super) fn step_zf_cn(&self, state: &mut SchemeState) -> Result<StepReport, SchemeError> {
        let model = &self.model;
        let dt = self.dt;
        let family = StepFamily::Cn;
        let pred = self.predict(state, family, TermSplit::Merged)?;
        let fp = &pred.fprime[0];
        let q = &pred.q[0];
        let f_n = model.f_integral_total(&state.phi);
        let e_n = model.quadratic_energy(&state.phi)? + f_n;
        let s0 = inner_product(fp, &pred.phi_bar.axpy(-1.0, &state.phi)?)?;
        let s1 = inner_product(fp, q)?;
        let term = &model.terms()[0];
        let cell = model.grid().cell_volume();
        let bar = pred.phi_bar.values();
        let qv = q.values();

        // G(p) = (F(φ̄ + pq), 1) - (F(φⁿ), 1) - (1 + p)(F'(φ̂), φ̄ + pq - φⁿ)
        let g = |p: f64| -> f64 {
            let f: f64 = bar
                .iter()
                .zip(qv)
                .map(|(b, q)| term.density(b + p * q))
                .sum();
            cell * f - f_n - (1.0 + p) * (s0 + p * s1)
        };
        let dg = |p: f64| -> f64 {
            let d: f64 = bar
                .iter()
                .zip(qv)
                .map(|(b, q)| term.derivative(b + p * q) * q)
                .sum();
            cell * d - (s0 + p * s1) - (1.0 + p) * s1
        };
        let tol = self.settings.newton_tol * e_n.abs().max(1.0);
        let p = solve_scalar(&g, &dg, state.last_p, tol, self.settings.newton_max_iter)?;
        let residual = g(p);

        let phi_new = pred.phi_bar.axpy(p, q)?;
        let mu = compute_mu(model, family, &phi_new, &state.phi, &[(p, fp)])?;
        let diss = dissipation(
            model,
            family,
            dt,
            &mu,
            &phi_new,
            &state.phi,
            &state.phi_prev,
        )?;
        let f_int = model.f_integral_total(&phi_new);
        let quad_energy = model.quadratic_energy(&phi_new)?;
        let factor = affine_factor_form(&self.factor, family, dt, state.eta, state.eta_prev);

        self.commit(state, phi_new, vec![f_int], factor.unknown_for(p), p);
        Ok(StepReport {
            step: state.step,
            t: state.t,
            e_orig: quad_energy + f_int,
            e_mod: quad_energy + f_int,
            r: f_int,
            f_int,
            p_value: p,
            s_value: 0.0,
            lambda0: 0.0,
            kappa: 0.0,
            dissipation: diss,
            branch: Branch::Newton,
            r_tilde: f_int,
            residual,
            bootstrap: false,
        })
    }
}

/// Newton from `p0`; if that stalls, brackets a sign change of `g` around
/// `p0` and bisects.
fn solve_scalar(
    g: &dyn Fn(f64) -> f64,
    dg: &dyn Fn(f64) -> f64,
    p0: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64, SchemeError> {
    let mut p = if p0.is_finite() { p0 } else { 0.0 };
    let mut best = (g(p), p);
    for _ in 0..max_iter {
        let gp = g(p);
        if !gp.is_finite() {
            break;
        }
        if gp.abs() < best.0.abs() || !best.0.is_finite() {
            best = (gp, p);
        }
        if gp.abs() <= tol {
            return Ok(p);
        }
        let d = dg(p);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = p - gp / d;
        if !next.is_finite() {
            break;
        }
        p = next;
    }
    log::debug!(
        "zf_cn Newton stalled (best residual {:e}); bracketing",
        best.0
    );
    let centre = if p0.is_finite() { p0 } else { 0.0 };
    let g0 = g(centre);
    if g0 == 0.0 {
        return Ok(centre);
    }
    let mut h = 1e-3;
    while h < 1e6 {
        for lo_hi in [(centre, centre + h), (centre - h, centre)] {
            let (lo, hi) = lo_hi;
            let (glo, ghi) = (g(lo), g(hi));
            if glo.is_finite() && ghi.is_finite() && glo * ghi <= 0.0 {
                return Ok(bisect(g, lo, hi, glo, tol));
            }
        }
        h *= 2.0;
    }
    Err(SchemeError::NewtonDiverged {
        iterations: max_iter,
        residual: best.0,
    })
}

fn bisect(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut glo: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm.abs() <= tol || hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            return mid;
        }
        if glo * gm <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            glo = gm;
        }
    }
    0.5 * (lo + hi)
}
