use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::diagnostics::{check_step, convergence_study, ConvergenceTable, StudySetup};
use crate::error::HarnessError;
use crate::model::build_model;
use crate::schemes::{SchemeKind, StepReport, Stepper, StepperSettings};
use crate::spectral::{make_grid, Field};

use super::config::RunConfig;
use super::ic::make_initial_condition;
use super::snapshot::Snapshot;
use super::trace::TraceWriter;

/// Version string baked in at build time (`git describe` when available).
pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("ZFFLOW_GIT_DESCRIBE"));

#[derive(Debug)]
pub struct RunSummary {
    pub reports: Vec<StepReport>,
    pub csv_path: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub manifest_path: PathBuf,
    pub final_phi: Field,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    status: &'a str,
    scheme: &'a str,
    model: &'a str,
    seed: u64,
    dt: f64,
    t_end: f64,
    steps: usize,
    wall_time_s: f64,
    csv: String,
    snapshots: Vec<String>,
    config: &'a str,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Stepper and initial field described by a config.
pub fn prepare(cfg: &RunConfig) -> Result<(Stepper, Field), HarnessError> {
    let grid = make_grid(&cfg.dims, &cfg.extents)?;
    let model = build_model(&cfg.model, &cfg.model_params, &grid)?;
    let settings = StepperSettings {
        root_policy: cfg.root_policy,
        dealias: cfg.dealias,
        ..StepperSettings::default()
    };
    let stepper = Stepper::with_settings(
        cfg.scheme,
        &model,
        cfg.dt,
        cfg.factor,
        cfg.factor2,
        settings,
    )?;
    let phi0 = make_initial_condition(&cfg.ic, &cfg.ic_params, &grid, &cfg.origin, cfg.seed)?;
    Ok((stepper, phi0))
}

fn step_total(cfg: &RunConfig) -> usize {
    (cfg.t_end / cfg.dt - 1e-6).ceil() as usize
}

/// Runs one experiment, writing the trace CSV, snapshots and a manifest
/// into `cfg.out_dir`. With assertions on, the first violated energy law
/// stops the run with [`HarnessError::Assertion`] after the files written
/// so far are flushed.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunSummary, HarnessError> {
    let started = Instant::now();
    std::fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
    let (stepper, phi0) = prepare(cfg)?;
    let csv_path = cfg.out_dir.join(&cfg.csv_name);
    let mut writer = TraceWriter::create(&csv_path)?;
    let mut state = stepper.init_state(phi0)?;
    let initial = stepper.initial_report(&state)?;
    writer.write(&initial)?;

    let mut pending: Vec<f64> = cfg.snapshot_times.clone();
    pending.sort_by(f64::total_cmp);
    pending.reverse();
    let mut snapshots = Vec::new();
    let mut take_snapshots =
        |state_t: f64, phi: &Field, pending: &mut Vec<f64>| -> Result<(), HarnessError> {
            while let Some(&ts) = pending.last() {
                if state_t + 0.5 * cfg.dt < ts {
                    break;
                }
                pending.pop();
                let path = cfg
                    .out_dir
                    .join(format!("snapshot_{:04}.gfzf", snapshots.len()));
                Snapshot::from_field(phi, state_t, &cfg.model).write(&path)?;
                snapshots.push(path);
            }
            Ok(())
        };
    take_snapshots(state.t, &state.phi, &mut pending)?;

    let steps = step_total(cfg);
    let mut reports = vec![initial];
    let mut outcome = Ok(());
    for _ in 0..steps {
        let report = match stepper.step(&mut state) {
            Ok(r) => r,
            Err(e) => {
                outcome = Err(HarnessError::Scheme(e));
                break;
            }
        };
        writer.write(&report)?;
        take_snapshots(state.t, &state.phi, &mut pending)?;
        if cfg.assertions_on {
            let prev = reports.last().expect("initial row present");
            if let Err(v) = check_step(cfg.scheme, prev, &report, cfg.energy_rtol) {
                reports.push(report);
                outcome = Err(HarnessError::Assertion {
                    step: v.step,
                    inequality: v.inequality,
                    lhs: v.lhs,
                    rhs: v.rhs,
                });
                break;
            }
        }
        reports.push(report);
    }
    writer.flush()?;

    let manifest_path = cfg.out_dir.join("manifest.toml");
    let status = match &outcome {
        Ok(()) => "ok".to_string(),
        Err(e) => e.to_string(),
    };
    let manifest = Manifest {
        version: VERSION,
        status: &status,
        scheme: cfg.scheme.as_str(),
        model: &cfg.model,
        seed: cfg.seed,
        dt: cfg.dt,
        t_end: cfg.t_end,
        steps: reports.len() - 1,
        wall_time_s: started.elapsed().as_secs_f64(),
        csv: cfg.csv_name.clone(),
        snapshots: snapshots.iter().map(|p| p.display().to_string()).collect(),
        config: &cfg.source,
    };
    let text = toml::to_string(&manifest).map_err(|e| HarnessError::Config(e.to_string()))?;
    std::fs::write(&manifest_path, text).map_err(io_err(&manifest_path))?;
    outcome?;
    log::info!(
        "{} on {}: {} steps in {:.2}s",
        cfg.scheme,
        cfg.model,
        reports.len() - 1,
        started.elapsed().as_secs_f64()
    );
    Ok(RunSummary {
        reports,
        csv_path,
        snapshots,
        manifest_path,
        final_phi: state.phi,
    })
}

/// Runs the same config once per scheme, each into `out_dir/<scheme>`.
pub fn compare(cfg: &RunConfig, schemes: &[SchemeKind]) -> Result<Vec<RunSummary>, HarnessError> {
    schemes
        .iter()
        .map(|&scheme| {
            let mut leg = cfg.clone();
            leg.scheme = scheme;
            leg.bootstrap = (scheme == SchemeKind::RzfBdf2).then_some(SchemeKind::RzfCn);
            leg.out_dir = cfg.out_dir.join(scheme.as_str());
            run_experiment(&leg)
        })
        .collect()
}

/// Convergence study of the configured scheme at `t_end`; writes
/// `convergence.csv` with columns `dt,error,rate,max_abs_p`.
pub fn converge(
    cfg: &RunConfig,
    dt_ladder: &[f64],
    reference_dt: f64,
) -> Result<ConvergenceTable, HarnessError> {
    let (stepper, phi0) = prepare(cfg)?;
    let mut setup = StudySetup::new(
        stepper.model().clone(),
        cfg.scheme,
        cfg.factor,
        phi0,
        cfg.t_end,
    );
    setup.factor2 = cfg.factor2;
    setup.settings = stepper.settings().clone();
    let table = convergence_study(&setup, dt_ladder, reference_dt)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
    let path = cfg.out_dir.join("convergence.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["dt", "error", "rate", "max_abs_p"])?;
    for i in 0..table.dts.len() {
        let rate = if i == 0 {
            String::new()
        } else {
            table.rates[i - 1].to_string()
        };
        w.write_record([
            table.dts[i].to_string(),
            table.errors[i].to_string(),
            rate,
            table.max_abs_p[i].to_string(),
        ])?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(table)
}
