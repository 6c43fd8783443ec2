use std::path::Path;
use std::process::Command;

use zfflow::diagnostics::ENERGY_RTOL;
use zfflow::harness::{self, parse_config, read_trace, replay_trace, Snapshot, TRACE_COLUMNS};
use zfflow::{Branch, FactorSpec, HarnessError, SchemeKind};

const HEAT: &str = r#"
scheme = "rzf_cn"
dt = 0.05
t_end = 1.0
snapshot_times = [0.0, 0.5, 1.0]

[model]
name = "heat"

[grid]
dims = [16, 16]
extents = ["2pi", "2pi"]

[ic]
name = "random_uniform"
amplitude = 0.5
"#;

const AC: &str = r#"
scheme = "rzf_cn"
dt = 0.01
t_end = 0.2

[model]
name = "allen_cahn"
epsilon = 0.3

[grid]
dims = [16, 16]
extents = ["2pi", "2pi"]

[ic]
name = "random_uniform"
amplitude = 0.8
"#;

fn with_out(text: &str, dir: &Path) -> String {
    format!("{text}\n[output]\ndir = {:?}\n", dir.display().to_string())
}

fn zfflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_zfflow"))
}

#[test]
fn config_defaults_and_errors() {
    let cfg = parse_config(AC).unwrap();
    assert_eq!(cfg.factor, FactorSpec::rate(1.0, 0.0).unwrap());
    assert_eq!(cfg.factor2, cfg.factor);
    assert_eq!(cfg.bootstrap, None);
    assert!(cfg.assertions_on);
    assert_eq!(cfg.energy_rtol, ENERGY_RTOL);

    let bdf2 = parse_config(&AC.replace("rzf_cn", "rzf_bdf2")).unwrap();
    assert_eq!(bdf2.bootstrap, Some(SchemeKind::RzfCn));

    for (from, to, key) in [
        ("dt = 0.01", "dt = 0.0", "dt"),
        ("epsilon = 0.3", "epsilon = 0.3\nepsilonn = 1", "epsilonn"),
        ("scheme = \"rzf_cn\"", "scheme = \"euler\"", "scheme"),
        ("t_end = 0.2\n", "", "t_end"),
    ] {
        let err = parse_config(&AC.replace(from, to)).unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)));
        assert!(err.to_string().contains(key), "{err} should name {key}");
        assert_eq!(err.exit_code(), 2);
    }
}

#[test]
fn heat_run_writes_trace_snapshots_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&with_out(HEAT, dir.path())).unwrap();
    let summary = harness::run_experiment(&cfg).unwrap();
    assert_eq!(summary.reports.len(), 21);

    let text = std::fs::read_to_string(&summary.csv_path).unwrap();
    assert_eq!(text.lines().next().unwrap(), TRACE_COLUMNS.join(","));
    let rows = read_trace(&summary.csv_path).unwrap();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r.p_value == 0.0));
    assert!(rows.windows(2).all(|w| w[1].e_orig < w[0].e_orig));
    assert!(replay_trace(SchemeKind::RzfCn, &rows, ENERGY_RTOL)
        .unwrap()
        .is_ok());

    assert_eq!(summary.snapshots.len(), 3);
    let last = Snapshot::read(&summary.snapshots[2]).unwrap();
    assert!((last.time - 1.0).abs() < 1e-12);
    assert_eq!(last.model, "heat");
    assert_eq!(last.values, summary.final_phi.values());

    let manifest = std::fs::read_to_string(&summary.manifest_path).unwrap();
    assert!(manifest.contains("status = \"ok\""));
    assert!(manifest.contains("wall_time_s"));
    assert!(
        manifest.contains("[model]"),
        "config echo missing:\n{manifest}"
    );
}

#[test]
fn same_seed_gives_identical_traces() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let run = |dir: &Path, seed: u64| {
        let mut cfg = parse_config(&with_out(AC, dir)).unwrap();
        cfg.seed = seed;
        std::fs::read(harness::run_experiment(&cfg).unwrap().csv_path).unwrap()
    };
    let first = run(a.path(), 7);
    assert_eq!(first, run(b.path(), 7));
    assert_ne!(first, run(c.path(), 8));
}

#[test]
fn replay_catches_a_tampered_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&with_out(AC, dir.path())).unwrap();
    let summary = harness::run_experiment(&cfg).unwrap();
    let mut rows = read_trace(&summary.csv_path).unwrap();
    assert!(replay_trace(SchemeKind::RzfCn, &rows, ENERGY_RTOL)
        .unwrap()
        .is_ok());
    rows[5].e_mod += 1e-3 * rows[5].e_mod.abs();
    let verdict = replay_trace(SchemeKind::RzfCn, &rows, ENERGY_RTOL).unwrap();
    assert!(verdict.is_err());
}

#[test]
fn trace_rows_round_trip_their_branch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&with_out(&AC.replace("rzf_cn", "rzf_bdf2"), dir.path())).unwrap();
    let summary = harness::run_experiment(&cfg).unwrap();
    let rows = read_trace(&summary.csv_path).unwrap();
    for (row, report) in rows.iter().zip(&summary.reports) {
        assert_eq!(row.branch, report.branch.to_string());
        assert_eq!(row.e_mod, report.e_mod);
    }
    assert!(summary
        .reports
        .iter()
        .skip(1)
        .all(|r| r.branch != Branch::Sav));
    assert!(replay_trace(SchemeKind::RzfBdf2, &rows, ENERGY_RTOL)
        .unwrap()
        .is_ok());
}

#[test]
fn snapshot_format() {
    let zero = Snapshot {
        dims: vec![4, 4],
        extents: vec![1.0, 1.0],
        time: 0.0,
        model: "heat".into(),
        values: vec![0.0; 16],
    };
    let bytes = zero.to_bytes();
    let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
    assert!(std::str::from_utf8(&bytes[..nl])
        .unwrap()
        .starts_with("GFZF1 2 4 4 "));
    assert_eq!(bytes.len() - nl - 1, 128);
    assert!(bytes[nl + 1..].iter().all(|&b| b == 0));
    assert_eq!(Snapshot::from_bytes(&bytes).unwrap(), zero);

    let short = Snapshot {
        dims: vec![8, 8],
        values: vec![1.0; 100],
        ..zero.clone()
    };
    let err = Snapshot::from_bytes(&short.to_bytes()).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    let mut bad_tag = bytes.clone();
    bad_tag[4] = b'2';
    assert!(Snapshot::from_bytes(&bad_tag).is_err());
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path
    };

    let good = write("good.toml", HEAT);
    let out = zfflow()
        .args(["run", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(dir.path().join("good"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("good/trace.csv").exists());

    let bad = write("bad.toml", &HEAT.replace("dt = 0.05", "dt = -1.0"));
    let out = zfflow()
        .args(["run", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dt"));

    let out = zfflow()
        .args(["run", "--config"])
        .arg(dir.path().join("missing.toml"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));

    // The exact ZF-CN energy identity cannot hold to 1e-300: the assertion fires.
    let strict = write(
        "strict.toml",
        &AC.replace("rzf_cn", "zf_cn")
            .replace("t_end = 0.2", "t_end = 0.2\nenergy_rtol = 1e-300")
            .replace("random_uniform", "cosine_product"),
    );
    let out = zfflow()
        .args(["run", "--config"])
        .arg(&strict)
        .arg("--out")
        .arg(dir.path().join("strict"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest = std::fs::read_to_string(dir.path().join("strict/manifest.toml")).unwrap();
    assert!(!manifest.contains("status = \"ok\""));

    let out = zfflow()
        .args(["run", "--no-assert", "--config"])
        .arg(&strict)
        .arg("--out")
        .arg(dir.path().join("lenient"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn cli_converge_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("heat.toml");
    std::fs::write(&path, HEAT).unwrap();
    let out = zfflow()
        .args(["converge", "--dt-ladder", "0.1,0.05,0.025", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = stdout.lines().collect();
    assert_eq!(lines[0], "dt,error,rate");
    assert_eq!(lines.len(), 4);
    let rate: f64 = lines[3].rsplit(',').next().unwrap().parse().unwrap();
    assert!((rate - 2.0).abs() < 0.1, "{rate}");

    let out = zfflow()
        .args(["converge", "--dt-ladder", "0.025,0.05", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = zfflow()
        .args(["compare", "--schemes", "sav_cn,rzf_cn,rzf_bdf2", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("cmp"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for scheme in ["sav_cn", "rzf_cn", "rzf_bdf2"] {
        assert!(
            dir.path()
                .join("cmp")
                .join(scheme)
                .join("trace.csv")
                .exists(),
            "{scheme}"
        );
    }
}

#[test]
fn cli_selfcheck_passes() {
    let out = zfflow().arg("selfcheck").output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().all(|l| l.starts_with("PASS")), "{stdout}");
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let cfg = parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        harness::prepare(&cfg).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 5);
}
