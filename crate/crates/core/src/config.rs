//! JSON scenario files, dotted-path overrides and the on-disk formats of
//! traces and summaries.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::battery::{CellParams, PackConfig};
use crate::controller::{self, ControllerConfig};
use crate::cycle::{self, DrivingCycle, SynthSpec};
use crate::drivetrain::{DrivetrainParams, OperatingMode};
use crate::dynamics::{Environment, VehicleParams};
use crate::engine::{EmissionMap, EngineMap, FuelProperties};
use crate::predictor::{Hyper, RegressionModel};
use crate::sim::{ScenarioConfig, SocPredictor, StepRecord, Summary, VehicleModel, DEFAULT_FALLBACK_PER_KM, DEFAULT_HORIZON};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {msg}", path.display())]
    Parse { path: PathBuf, msg: String },
    #[error("--set {0}: expected key=value")]
    SetSyntax(String),
    #[error("--set {0}: no such setting")]
    UnknownKey(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub map: EngineMap,
    pub fuel: FuelProperties,
    pub emissions: EmissionMap,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatterySection {
    pub cell: CellParams,
    pub pack: PackConfig,
}

/// Rule base source plus optional overrides of its switching parameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    /// JSON rule base; the bundled one when absent.
    pub rulebase: Option<PathBuf>,
    pub hysteresis_margin: Option<f64>,
    pub min_dwell: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    /// Train on this vehicle's own pure-electric runs.
    #[default]
    Auto,
    Off,
    Constant,
    /// Load a model written by `train`.
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorSection {
    pub kind: PredictorKind,
    /// %/km, for `constant`
    pub per_km: f64,
    /// model JSON, for `model`
    pub model: Option<PathBuf>,
    /// s
    pub horizon: f64,
    pub hyper: Hyper,
}

impl Default for PredictorSection {
    fn default() -> Self {
        Self {
            kind: PredictorKind::Auto,
            per_km: DEFAULT_FALLBACK_PER_KM,
            model: None,
            horizon: DEFAULT_HORIZON,
            hyper: Hyper::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    /// `wltc`, `tehran1`..`tehran6` or a CSV path
    pub cycle: String,
    /// %
    pub init_soc: f64,
    /// %, the pack's own value when absent
    pub soh: Option<f64>,
    /// °C, the environment's when absent
    pub ambient: Option<f64>,
    /// s
    pub dt: f64,
    pub seed: u64,
    pub forced_mode: Option<OperatingMode>,
    /// Largest tolerated fraction of saturated steps before `simulate`
    /// exits with status 2.
    pub saturation_threshold: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            cycle: "wltc".into(),
            init_soc: 90.0,
            soh: None,
            ambient: None,
            dt: 1.0,
            seed: 0,
            forced_mode: None,
            saturation_threshold: 0.05,
        }
    }
}

/// The whole configuration file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub vehicle: VehicleParams,
    pub environment: Environment,
    pub engine: EngineSection,
    pub battery: BatterySection,
    pub drivetrain: DrivetrainParams,
    pub controller: ControllerSection,
    pub predictor: PredictorSection,
    pub scenario: ScenarioSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Config {
    /// Reads `path` (or starts from the defaults) and applies `key=value`
    /// overrides. Keys are dotted paths into the JSON tree, values are JSON
    /// literals or bare strings.
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Config, ConfigError> {
        let mut tree = serde_json::to_value(Config::default()).expect("defaults serialize");
        let mut base_dir = PathBuf::from(".");
        if let Some(p) = path {
            let text = read(p)?;
            let file: Value =
                serde_json::from_str(&text).map_err(|e| ConfigError::Parse { path: p.into(), msg: e.to_string() })?;
            merge(&mut tree, file);
            base_dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf();
        }
        for s in sets {
            apply_set(&mut tree, s)?;
        }
        let src = path.map(Path::to_path_buf).unwrap_or_else(|| "<defaults>".into());
        let mut cfg: Config =
            serde_json::from_value(tree).map_err(|e| ConfigError::Parse { path: src, msg: e.to_string() })?;
        cfg.base_dir = base_dir;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn vehicle_model(&self) -> VehicleModel {
        VehicleModel {
            vehicle: self.vehicle.clone(),
            environment: self.environment.clone(),
            engine: self.engine.map.clone(),
            fuel: self.engine.fuel.clone(),
            emissions: self.engine.emissions.clone(),
            cell: self.battery.cell.clone(),
            pack: self.battery.pack.clone(),
            drivetrain: self.drivetrain.clone(),
        }
    }

    pub fn controller(&self) -> Result<ControllerConfig, ConfigError> {
        let mut c = match &self.controller.rulebase {
            Some(p) => {
                let p = self.resolve(p);
                ControllerConfig::from_json(&read(&p)?).map_err(|e| ConfigError::Parse { path: p, msg: e.to_string() })?
            }
            None => controller::default_rulebase(),
        };
        if let Some(h) = self.controller.hysteresis_margin {
            c.hysteresis_margin = h;
        }
        if let Some(d) = self.controller.min_dwell {
            c.min_dwell = d;
        }
        if !(c.hysteresis_margin >= 0.0 && c.min_dwell >= 0.0) {
            return Err(ConfigError::Invalid("hysteresis_margin and min_dwell must be nonnegative".into()));
        }
        Ok(c)
    }

    pub fn soc_predictor(&self) -> Result<SocPredictor, ConfigError> {
        let p = &self.predictor;
        Ok(match p.kind {
            PredictorKind::Auto => SocPredictor::Auto { hyper: p.hyper },
            PredictorKind::Off => SocPredictor::Off,
            PredictorKind::Constant => SocPredictor::Constant { per_km: p.per_km },
            PredictorKind::Model => {
                let path = p
                    .model
                    .as_ref()
                    .ok_or_else(|| ConfigError::Invalid("predictor.kind = model needs predictor.model".into()))?;
                SocPredictor::Model(Arc::new(load_model(&self.resolve(path))?))
            }
        })
    }

    /// Resolves a cycle name: `wltc`, `tehranN` (synthesized with the
    /// scenario seed) or a CSV file.
    pub fn cycle_by_name(&self, name: &str) -> Result<DrivingCycle, ConfigError> {
        if name.eq_ignore_ascii_case("wltc") {
            return Ok(DrivingCycle::wltc());
        }
        if let Some(route) = name.strip_prefix("tehran").and_then(|r| r.parse::<usize>().ok()) {
            let spec = SynthSpec::tehran(route, self.scenario.seed)
                .ok_or_else(|| ConfigError::Invalid(format!("no route {name}; use tehran1..tehran6")))?;
            let mut c = cycle::synthesize(&spec).map_err(|e| ConfigError::Invalid(format!("{name}: {e}")))?;
            c.name = name.to_string();
            return Ok(c);
        }
        let path = self.resolve(Path::new(name));
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("cycle").to_string();
        cycle::parse_cycle(&read(&path)?, &stem).map_err(|e| ConfigError::Parse { path, msg: e.to_string() })
    }

    /// Everything needed to run the configured scenario.
    pub fn scenario(&self) -> Result<ScenarioConfig, ConfigError> {
        let model = self.vehicle_model();
        model.validate().map_err(ConfigError::Invalid)?;
        let s = &self.scenario;
        if !(s.saturation_threshold >= 0.0) {
            return Err(ConfigError::Invalid("scenario.saturation_threshold must be nonnegative".into()));
        }
        let sc = ScenarioConfig {
            cycle: self.cycle_by_name(&s.cycle)?,
            init_soc: s.init_soc,
            soh: s.soh.unwrap_or(model.pack.soh),
            ambient: s.ambient.unwrap_or(model.environment.ambient_temp),
            dt: s.dt,
            controller: self.controller()?,
            predictor: self.soc_predictor()?,
            horizon: self.predictor.horizon,
            forced_mode: s.forced_mode,
            seed: s.seed,
            model,
        };
        sc.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(sc)
    }
}

/// Recursively overlays `src` onto `dst`. Objects merge key by key, anything
/// else replaces.
fn merge(dst: &mut Value, src: Value) {
    match (dst, src) {
        (Value::Object(d), Value::Object(s)) => {
            for (k, v) in s {
                match d.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        d.insert(k, v);
                    }
                }
            }
        }
        (d, s) => *d = s,
    }
}

/// Applies one `dotted.key=value` override. The key must already exist.
pub fn apply_set(tree: &mut Value, set: &str) -> Result<(), ConfigError> {
    let (key, raw) = set.split_once('=').ok_or_else(|| ConfigError::SetSyntax(set.into()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::SetSyntax(set.into()));
    }
    let mut node = tree;
    for part in key.split('.') {
        node = match node {
            Value::Object(m) => m.get_mut(part),
            Value::Array(a) => part.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| ConfigError::UnknownKey(key.into()))?;
    }
    *node = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}

pub fn load_model(path: &Path) -> Result<RegressionModel, ConfigError> {
    serde_json::from_str(&read(path)?).map_err(|e| ConfigError::Parse { path: path.into(), msg: e.to_string() })
}

/// Trace as CSV with a header row.
pub fn trace_to_csv(trace: &[StepRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in trace {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

pub fn trace_from_csv(text: &str) -> Result<Vec<StepRecord>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}

pub fn summary_to_json(s: &Summary) -> String {
    serde_json::to_string_pretty(s).expect("summary serializes")
}

pub fn summary_from_json(text: &str) -> Result<Summary, serde_json::Error> {
    serde_json::from_str(text)
}
