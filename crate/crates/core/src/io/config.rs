use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::engine::{EventThresholds, ScenarioParams, SweepGrid};
use crate::error::{Error, Result};
use crate::safety_models::{ModelKind, ModelParams};

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "CUTIN_SEED";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub v_e0: Vec<f64>,
    pub v_o0: Vec<f64>,
    pub d_x0: Vec<f64>,
    pub d_y0: Vec<f64>,
}

impl SweepAxes {
    pub fn is_empty(&self) -> bool {
        self.v_e0.is_empty() && self.v_o0.is_empty() && self.d_x0.is_empty() && self.d_y0.is_empty()
    }
}

fn default_models() -> Vec<String> {
    vec![ModelKind::Rba.name().to_string()]
}

/// Contents of a run configuration file.
///
/// `model_params` holds partial per-model overrides, e.g.
/// `{"rba": {"ttc_safe_s": 4.0}}`. Anything not overridden takes the
/// model default, except the RBA step frequency (`1 / dt_s`) and the IDM
/// desired speed (the ego's initial speed), which follow the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub scenario: ScenarioParams,
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    #[serde(default)]
    pub model_params: Map<String, Value>,
    #[serde(default)]
    pub thresholds: EventThresholds,
    #[serde(default)]
    pub sweep: SweepAxes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: ScenarioParams::default(),
            models: default_models(),
            model_params: Map::new(),
            thresholds: EventThresholds::default(),
            sweep: SweepAxes::default(),
            output_dir: None,
            seed: 0,
        }
    }
}

fn at_path<T: serde::de::DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let key = match (prefix, path.as_str()) {
            (p, ".") => p.to_string(),
            ("", q) => q.to_string(),
            (p, q) => format!("{p}.{q}"),
        };
        Error::config(key, e.into_inner().to_string())
    })
}

fn merge(base: &mut Value, overrides: &Value) {
    match (base, overrides) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::config("<root>", e.to_string()))?;
        match value.get("schema_version") {
            None => return Err(Error::config("schema_version", "missing")),
            Some(v) if v.as_u64() != Some(SCHEMA_VERSION as u64) => {
                return Err(Error::config("schema_version", format!("unsupported version {v}, expected {SCHEMA_VERSION}")))
            }
            _ => {}
        }
        let cfg: RunConfig = at_path(value, "")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    /// Replaces the seed with `raw` when given (the value of [`SEED_ENV`]).
    pub fn apply_seed_override(&mut self, raw: Option<&str>) -> Result<()> {
        if let Some(raw) = raw {
            self.seed = raw
                .trim()
                .parse()
                .map_err(|_| Error::config(SEED_ENV, format!("expected an unsigned integer, got {raw:?}")))?;
        }
        Ok(())
    }

    pub fn model_kinds(&self) -> Result<Vec<ModelKind>> {
        self.models.iter().map(|m| ModelKind::from_str(m)).collect()
    }

    /// Resolved parameters of `kind` for one scenario.
    pub fn params_for(&self, _kind: ModelKind, scenario: &ScenarioParams) -> Result<ModelParams> {
        let mut value = serde_json::to_value(ModelParams::for_run(scenario.dt_s, scenario.v_e0))?;
        merge(&mut value, &Value::Object(self.model_params.clone()));
        let params: ModelParams = at_path(value, "model_params")?;
        params.validate().map_err(|e| Error::config("model_params", e.to_string()))?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config("schema_version", format!("expected {SCHEMA_VERSION}")));
        }
        let kinds = self.model_kinds()?;
        if kinds.is_empty() {
            return Err(Error::config("models", "at least one model is required"));
        }
        self.scenario.validate()?;
        for kind in kinds {
            self.params_for(kind, &self.scenario)?;
        }
        let th = &self.thresholds;
        if !(th.ttc_critical_s > 0.0 && th.ttc_critical_s.is_finite()) {
            return Err(Error::config("thresholds.ttc_critical_s", "must be > 0"));
        }
        if !(th.comfort_decel_mps2 > 0.0 && th.comfort_decel_mps2.is_finite()) {
            return Err(Error::config("thresholds.comfort_decel_mps2", "must be > 0"));
        }
        for (name, axis) in [
            ("v_e0", &self.sweep.v_e0),
            ("v_o0", &self.sweep.v_o0),
            ("d_x0", &self.sweep.d_x0),
            ("d_y0", &self.sweep.d_y0),
        ] {
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("sweep.{name}"), "values must be finite"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> SweepGrid {
        SweepGrid {
            base: self.scenario.clone(),
            v_e0: self.sweep.v_e0.clone(),
            v_o0: self.sweep.v_o0.clone(),
            d_x0: self.sweep.d_x0.clone(),
            d_y0: self.sweep.d_y0.clone(),
        }
    }

    /// SHA-256 over the canonical JSON of everything except the output
    /// directory, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            output_dir: None,
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// `out/<first 16 hex digits of the hash>` unless an output directory
    /// is configured.
    pub fn default_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(&self.hash()[..16]))
    }
}
