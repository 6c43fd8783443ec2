use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;

use crate::error::HarnessError;
use crate::model::ModelParams;
use crate::schemes::SchemeKind;
use crate::zero_factor::{FactorKind, FactorSpec, RootPolicy};

/// A validated experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: String,
    pub model_params: ModelParams,
    pub scheme: SchemeKind,
    /// Scheme used for the first step of a two-level method.
    pub bootstrap: Option<SchemeKind>,
    pub factor: FactorSpec,
    pub factor2: FactorSpec,
    pub dims: Vec<usize>,
    pub extents: Vec<f64>,
    pub origin: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub ic: String,
    pub ic_params: BTreeMap<String, f64>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub csv_name: String,
    pub snapshot_times: Vec<f64>,
    pub assertions_on: bool,
    pub energy_rtol: f64,
    pub root_policy: RootPolicy,
    pub dealias: bool,
    /// The document this config was parsed from, echoed into the manifest.
    pub source: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scheme: Option<String>,
    bootstrap: Option<String>,
    dt: Option<f64>,
    t_end: Option<f64>,
    seed: Option<u64>,
    snapshot_times: Option<Vec<f64>>,
    assertions: Option<bool>,
    energy_rtol: Option<f64>,
    root_policy: Option<String>,
    dealias: Option<bool>,
    model: Option<BTreeMap<String, toml::Value>>,
    grid: Option<RawGrid>,
    factor: Option<RawFactor>,
    factor2: Option<RawFactor>,
    ic: Option<BTreeMap<String, toml::Value>>,
    output: Option<RawOutput>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dims: Vec<usize>,
    extents: Vec<toml::Value>,
    origin: Option<Vec<toml::Value>>,
}

#[derive(Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
struct RawFactor {
    kind: Option<FactorKindName>,
    k: Option<f64>,
    eta_init: Option<f64>,
}

#[derive(Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum FactorKindName {
    Proportional,
    Eta,
    Rate,
    EtaT,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    csv: Option<String>,
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

/// Parameters each model and initial condition accepts.
fn model_keys(model: &str) -> Option<&'static [&'static str]> {
    Some(match model {
        "allen_cahn" => &["epsilon", "mobility", "c_sav"],
        "cahn_hilliard_beta" | "custom_split" => &["epsilon", "mobility", "beta", "c_sav"],
        "pfc" => &["epsilon", "c_sav"],
        "heat" => &["c_sav"],
        _ => return None,
    })
}

pub(crate) fn ic_keys(ic: &str) -> Option<&'static [&'static str]> {
    Some(match ic {
        "cosine_product" => &["amplitude", "mode"],
        "flower_tanh" => &["epsilon", "radius", "petal", "lobes"],
        "sphere_tanh" => &["epsilon", "radius", "cx", "cy", "cz"],
        "two_spheres_tanh" => &["epsilon", "radius", "x1", "y1", "z1", "x2", "y2", "z2"],
        "random_uniform" => &["amplitude", "mean"],
        "pfc_random" => &["mean", "amplitude"],
        _ => return None,
    })
}

/// Reads a length: a number, or a string such as `"2pi"`, `"pi"`, `"-pi"`, `"100"`.
fn length(key: &str, v: &toml::Value) -> Result<f64, HarnessError> {
    let bad = || {
        config_err(format!(
            "`{key}`: expected a number or a multiple of pi, got {v}"
        ))
    };
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        toml::Value::String(s) => {
            let s = s.trim().replace(' ', "");
            if let Some(coef) = s.strip_suffix("pi") {
                let coef = coef.trim_end_matches('*');
                let c = match coef {
                    "" | "+" => 1.0,
                    "-" => -1.0,
                    other => other.parse::<f64>().map_err(|_| bad())?,
                };
                Ok(c * std::f64::consts::PI)
            } else {
                s.parse::<f64>().map_err(|_| bad())
            }
        }
        _ => Err(bad()),
    }
}

fn numeric_table(
    section: &str,
    table: BTreeMap<String, toml::Value>,
    allowed: &[&str],
) -> Result<BTreeMap<String, f64>, HarnessError> {
    let mut out = BTreeMap::new();
    for (k, v) in table {
        if !allowed.contains(&k.as_str()) {
            return Err(config_err(format!(
                "unknown key `{section}.{k}` (allowed: {})",
                allowed.join(", ")
            )));
        }
        let x = match v {
            toml::Value::Float(x) => x,
            toml::Value::Integer(i) => i as f64,
            other => {
                return Err(config_err(format!(
                    "`{section}.{k}` must be a number, got {other}"
                )))
            }
        };
        if !x.is_finite() {
            return Err(config_err(format!("`{section}.{k}` must be finite")));
        }
        out.insert(k, x);
    }
    Ok(out)
}

fn take_name(
    section: &str,
    table: &mut BTreeMap<String, toml::Value>,
) -> Result<String, HarnessError> {
    match table.remove("name") {
        Some(toml::Value::String(s)) => Ok(s),
        Some(other) => Err(config_err(format!(
            "`{section}.name` must be a string, got {other}"
        ))),
        None => Err(config_err(format!("missing required key `{section}.name`"))),
    }
}

fn factor_spec(
    section: &str,
    raw: Option<RawFactor>,
    fallback: FactorSpec,
) -> Result<FactorSpec, HarnessError> {
    let Some(raw) = raw else {
        return Ok(fallback);
    };
    let kind = match raw.kind {
        None => fallback.kind(),
        Some(FactorKindName::Proportional | FactorKindName::Eta) => FactorKind::Proportional,
        Some(FactorKindName::Rate | FactorKindName::EtaT) => FactorKind::Rate,
    };
    let k = raw.k.unwrap_or(1.0);
    let eta_init = raw.eta_init.unwrap_or(0.0);
    FactorSpec::new(kind, k, eta_init).map_err(|e| config_err(format!("`{section}`: {e}")))
}

/// Parses and validates a TOML run description.
///
/// Defaults: factor `rate` with `k = 1`, `η⁰ = 0`; `c_sav = 1` (applied by
/// the model); seed 0; assertions on; energy tolerance 1e-9 relative;
/// output to `out/trace.csv`.
pub fn parse_config(text: &str) -> Result<RunConfig, HarnessError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.message().to_string()))?;

    let mut model_table = raw
        .model
        .ok_or_else(|| config_err("missing required section `model`"))?;
    let model = take_name("model", &mut model_table)?;
    let allowed = model_keys(&model)
        .ok_or_else(|| config_err(format!("`model.name`: unknown model `{model}`")))?;
    let model_params = numeric_table("model", model_table, allowed)?;

    let scheme: SchemeKind = raw
        .scheme
        .as_deref()
        .ok_or_else(|| config_err("missing required key `scheme`"))?
        .parse()
        .map_err(|e: String| config_err(format!("`scheme`: {e}")))?;
    let bootstrap = match (scheme, raw.bootstrap.as_deref()) {
        (SchemeKind::RzfBdf2, None | Some("rzf_cn")) => Some(SchemeKind::RzfCn),
        (SchemeKind::RzfBdf2, Some(other)) => {
            return Err(config_err(format!(
                "`bootstrap`: only rzf_cn is supported, got `{other}`"
            )))
        }
        (_, None) => None,
        (_, Some(_)) => return Err(config_err("`bootstrap` applies to rzf_bdf2 only")),
    };

    let dt = raw
        .dt
        .ok_or_else(|| config_err("missing required key `dt`"))?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(config_err(format!("`dt` must be positive, got {dt}")));
    }
    let t_end = raw
        .t_end
        .ok_or_else(|| config_err("missing required key `t_end`"))?;
    if !(t_end >= dt) || !t_end.is_finite() {
        return Err(config_err(format!(
            "`t_end` must be at least dt, got {t_end}"
        )));
    }

    let grid = raw
        .grid
        .ok_or_else(|| config_err("missing required section `grid`"))?;
    if grid.dims.len() != grid.extents.len() {
        return Err(config_err(
            "`grid.dims` and `grid.extents` differ in length",
        ));
    }
    let extents = grid
        .extents
        .iter()
        .map(|v| length("grid.extents", v))
        .collect::<Result<Vec<_>, _>>()?;
    let origin = match grid.origin {
        Some(o) => {
            if o.len() != grid.dims.len() {
                return Err(config_err("`grid.origin` must have one entry per axis"));
            }
            o.iter()
                .map(|v| length("grid.origin", v))
                .collect::<Result<Vec<_>, _>>()?
        }
        None => vec![0.0; grid.dims.len()],
    };
    crate::spectral::make_grid(&grid.dims, &extents)
        .map_err(|e| config_err(format!("`grid`: {e}")))?;

    let factor = factor_spec("factor", raw.factor, FactorSpec::default())?;
    let factor2 = factor_spec("factor2", raw.factor2, factor)?;

    let mut ic_table = raw
        .ic
        .ok_or_else(|| config_err("missing required section `ic`"))?;
    let ic = take_name("ic", &mut ic_table)?;
    let allowed = ic_keys(&ic)
        .ok_or_else(|| config_err(format!("`ic.name`: unknown initial condition `{ic}`")))?;
    let ic_params = numeric_table("ic", ic_table, allowed)?;

    let snapshot_times = raw.snapshot_times.unwrap_or_default();
    if let Some(t) = snapshot_times
        .iter()
        .find(|t| !(**t >= 0.0 && **t <= t_end + 1e-12))
    {
        return Err(config_err(format!(
            "`snapshot_times`: {t} outside [0, t_end]"
        )));
    }
    let energy_rtol = raw.energy_rtol.unwrap_or(crate::diagnostics::ENERGY_RTOL);
    if !(energy_rtol > 0.0) {
        return Err(config_err("`energy_rtol` must be positive"));
    }
    let root_policy = match raw.root_policy.as_deref() {
        None => RootPolicy::default(),
        Some(s) => s
            .parse()
            .map_err(|e: String| config_err(format!("`root_policy`: {e}")))?,
    };
    let output = raw.output.unwrap_or(RawOutput {
        dir: None,
        csv: None,
    });

    Ok(RunConfig {
        model,
        model_params,
        scheme,
        bootstrap,
        factor,
        factor2,
        dims: grid.dims,
        extents,
        origin,
        dt,
        t_end,
        ic,
        ic_params,
        seed: raw.seed.unwrap_or(0),
        out_dir: PathBuf::from(output.dir.unwrap_or_else(|| "out".into())),
        csv_name: output.csv.unwrap_or_else(|| "trace.csv".into()),
        snapshot_times,
        assertions_on: raw.assertions.unwrap_or(true),
        energy_rtol,
        root_policy,
        dealias: raw.dealias.unwrap_or(false),
        source: text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
scheme = "rzf_cn"
dt = 0.01
t_end = 1.0

[model]
name = "allen_cahn"
epsilon = 0.4

[grid]
dims = [128, 128]
extents = ["2pi", "2pi"]

[ic]
name = "cosine_product"
amplitude = 0.001
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.factor, FactorSpec::rate(1.0, 0.0).unwrap());
        assert!(c.assertions_on);
        assert_eq!(c.seed, 0);
        assert_eq!(c.bootstrap, None);
        assert!((c.extents[0] - 2.0 * std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(c.origin, vec![0.0, 0.0]);
    }

    #[test]
    fn bdf2_records_its_bootstrap() {
        let text = MINIMAL.replace("rzf_cn", "rzf_bdf2");
        assert_eq!(
            parse_config(&text).unwrap().bootstrap,
            Some(SchemeKind::RzfCn)
        );
    }

    #[test]
    fn errors_name_the_key() {
        let e = parse_config(&MINIMAL.replace("dt = 0.01", "dt = 0.0")).unwrap_err();
        assert!(e.to_string().contains("dt"), "{e}");
        let e = parse_config(&MINIMAL.replace("epsilon = 0.4", "epsilon = 0.4\nepsilonn = 1"))
            .unwrap_err();
        assert!(e.to_string().contains("epsilonn"), "{e}");
        let e = parse_config(&MINIMAL.replace("t_end = 1.0", "t_end = 1.0\ntypo = 1")).unwrap_err();
        assert!(e.to_string().contains("typo"), "{e}");
        let e = parse_config(&MINIMAL.replace("rzf_cn", "rk4")).unwrap_err();
        assert!(e.to_string().contains("scheme"), "{e}");
        assert_eq!(e.exit_code(), 2);
        let e = parse_config(&MINIMAL.replace("dt = 0.01\n", "")).unwrap_err();
        assert!(e.to_string().contains("dt"), "{e}");
    }

    #[test]
    fn lengths_accept_multiples_of_pi() {
        let v = |s: &str| length("x", &toml::Value::String(s.into())).unwrap();
        assert_eq!(v("pi"), std::f64::consts::PI);
        assert_eq!(v("-pi"), -std::f64::consts::PI);
        assert_eq!(v("2*pi"), 2.0 * std::f64::consts::PI);
        assert_eq!(v("100"), 100.0);
        assert!(length("x", &toml::Value::String("tau".into())).is_err());
    }
}
