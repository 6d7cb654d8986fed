//! Run configuration: a JSON document with `model`, `command` and
//! `execution` blocks. Command-line flags are merged into the document
//! before it is deserialized, so flags and keys share one schema.

use std::collections::BTreeMap;
use std::path::PathBuf;

use kcm::lattice::{parse_coord_key, ConstraintFamily, Geometry, Model};
use kcm::measure::DEFAULT_STATE_CAP;
use kcm::{KcmError, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const RESULTS_ENV: &str = "KCM_RESULTS_DIR";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelConfig,
    pub command: Command,
    #[serde(default)]
    pub execution: ExecutionConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Northeast,
    Maximal,
    Custom,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub d: usize,
    pub n: usize,
    pub p: f64,
    pub family: FamilyName,
    /// `"x1,x2" -> [[y1,y2], ...]`, required for the custom family.
    pub custom_constraints: Option<BTreeMap<String, Vec<Vec<usize>>>>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d: 2,
            n: 2,
            p: 0.3,
            family: FamilyName::Northeast,
            custom_constraints: None,
        }
    }
}

impl ModelConfig {
    pub fn family(&self) -> Result<ConstraintFamily> {
        match (self.family, &self.custom_constraints) {
            (FamilyName::Northeast, None) => Ok(ConstraintFamily::NorthEast),
            (FamilyName::Maximal, None) => Ok(ConstraintFamily::Maximal),
            (FamilyName::Custom, Some(map)) => {
                let mut parsed = BTreeMap::new();
                for (k, v) in map {
                    parsed.insert(parse_coord_key(k)?, v.clone());
                }
                Ok(ConstraintFamily::Custom(parsed))
            }
            (FamilyName::Custom, None) => Err(KcmError::Validation(
                "the custom family needs custom_constraints".into(),
            )),
            (_, Some(_)) => Err(KcmError::Validation(
                "custom_constraints is only valid with family = custom".into(),
            )),
        }
    }

    pub fn build(&self) -> Result<Model> {
        Model::new(Geometry::new(self.d, self.n)?, self.family()?, self.p)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExecutionConfig {
    pub seed: u64,
    /// Command-specific default when absent.
    pub replicas: Option<usize>,
    /// Worker threads; machine parallelism when absent. Not echoed.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
    /// Output root; `KCM_RESULTS_DIR` or `results` when absent. Not echoed.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
    pub state_cap: usize,
    pub tolerance: f64,
    pub time_tolerance: f64,
    pub plot_data: bool,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            replicas: None,
            threads: None,
            output_dir: None,
            state_cap: DEFAULT_STATE_CAP,
            tolerance: kcm::exact::DEFAULT_TOLERANCE,
            time_tolerance: 1e-4,
            plot_data: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    Ones,
    Zeros,
    Pi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    Auto,
    Dense,
    Lanczos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeChoice {
    Tv,
    Chi2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleChoice {
    ValueChange,
    LegalRing,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    Simulate(SimulateParams),
    ExactGap(ExactGapParams),
    ExactMix(ExactMixParams),
    FkBound(FkBoundParams),
    LsiBound(LsiBoundParams),
    Schedule(ScheduleParams),
    DiagonalDecay(DiagonalDecayParams),
    TauScaling(TauScalingParams),
    ValidateMc(ValidateMcParams),
    Shape(ShapeParams),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::ExactGap(_) => "exact-gap",
            Command::ExactMix(_) => "exact-mix",
            Command::FkBound(_) => "fk-bound",
            Command::LsiBound(_) => "lsi-bound",
            Command::Schedule(_) => "schedule",
            Command::DiagonalDecay(_) => "diagonal-decay",
            Command::TauScaling(_) => "tau-scaling",
            Command::ValidateMc(_) => "validate-mc",
            Command::Shape(_) => "shape",
        }
    }

    fn default_replicas(&self) -> Option<usize> {
        match self {
            Command::FkBound(_) => Some(10_000),
            Command::TauScaling(_) => Some(1000),
            Command::ValidateMc(_) => Some(100_000),
            Command::Shape(_) => Some(50),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateParams {
    pub horizon: f64,
    pub initial: InitialState,
    /// Simulate on `U_level` instead of the whole lattice.
    pub level: Option<usize>,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self {
            horizon: 10.0,
            initial: InitialState::Ones,
            level: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExactGapParams {
    pub method: MethodChoice,
}

impl Default for ExactGapParams {
    fn default() -> Self {
        Self {
            method: MethodChoice::Auto,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExactMixParams {
    pub threshold: f64,
    pub mode: ModeChoice,
}

impl Default for ExactMixParams {
    fn default() -> Self {
        Self {
            threshold: 0.25,
            mode: ModeChoice::Tv,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FkBoundParams {
    /// `"x1,x2,..."`; the far corner when absent.
    pub site: Option<String>,
    pub times: Vec<f64>,
}

impl Default for FkBoundParams {
    fn default() -> Self {
        Self {
            site: None,
            times: kcm::exact::CHECK_TIMES.to_vec(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsiBoundParams {}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleParams {
    pub eps: f64,
    /// Rate constant; `c_0` of the model when absent.
    pub c: Option<f64>,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self { eps: 0.25, c: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagonalDecayParams {
    pub level: Option<usize>,
    pub t_max: f64,
    pub t_step: f64,
    pub fit_from: f64,
}

impl Default for DiagonalDecayParams {
    fn default() -> Self {
        Self {
            level: None,
            t_max: 20.0,
            t_step: 0.5,
            fit_from: 1.0,
        }
    }
}

impl DiagonalDecayParams {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if !(self.t_step > 0.0) || !(self.t_max >= 0.0) || !self.t_max.is_finite() {
            return Err(KcmError::Validation("t_step must be positive and t_max finite".into()));
        }
        let steps = (self.t_max / self.t_step + 1e-9).floor() as usize;
        Ok((0..=steps).map(|k| k as f64 * self.t_step).collect())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TauScalingParams {
    pub sizes: Vec<usize>,
    pub cap_factor: f64,
    pub bootstrap: usize,
}

impl Default for TauScalingParams {
    fn default() -> Self {
        Self {
            sizes: vec![8, 16, 32, 64],
            cap_factor: 50.0,
            bootstrap: 1000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateMcParams {
    pub time: f64,
    pub initial: InitialState,
    /// Use a different `p` for the exact side (negative control).
    pub exact_p: Option<f64>,
}

impl Default for ValidateMcParams {
    fn default() -> Self {
        Self {
            time: 2.0,
            initial: InitialState::Ones,
            exact_p: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapeParams {
    pub snapshots: Vec<f64>,
    pub rule: RuleChoice,
    pub bootstrap: usize,
}

impl Default for ShapeParams {
    fn default() -> Self {
        Self {
            snapshots: vec![32.0, 64.0],
            rule: RuleChoice::ValueChange,
            bootstrap: 1000,
        }
    }
}

impl RunConfig {
    /// Parses a merged JSON document and resolves defaults.
    pub fn from_value(value: Value) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_value(value)
            .map_err(|e| KcmError::Validation(format!("invalid configuration: {e}")))?;
        if cfg.execution.replicas.is_none() {
            cfg.execution.replicas = cfg.command.default_replicas();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        self.model.build()?;
        let e = &self.execution;
        if !(e.tolerance > 0.0) || !(e.time_tolerance > 0.0) {
            return Err(KcmError::Validation("tolerances must be positive".into()));
        }
        if e.threads == Some(0) {
            return Err(KcmError::Validation("threads must be at least 1".into()));
        }
        if e.replicas == Some(0)
            && self.command.default_replicas().is_some()
            && !matches!(self.command, Command::FkBound(_))
        {
            return Err(KcmError::Validation("replicas must be at least 1".into()));
        }
        Ok(())
    }

    /// The effective configuration, minus settings that cannot change results.
    pub fn echo(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn output_root(&self, flag_given: bool) -> PathBuf {
        match (&self.execution.output_dir, flag_given) {
            (Some(dir), true) => dir.clone(),
            (dir, _) => std::env::var_os(RESULTS_ENV)
                .map(PathBuf::from)
                .or_else(|| dir.clone())
                .unwrap_or_else(|| PathBuf::from("results")),
        }
    }
}

/// Sets `root[section][key] = value`, creating the section if needed.
pub fn set_key(root: &mut Map<String, Value>, section: &str, key: &str, value: Value) {
    let entry = root
        .entry(section.to_string())
        .or_insert_with(|| Value::Object(Map::new()));
    if !entry.is_object() {
        *entry = Value::Object(Map::new());
    }
    entry
        .as_object_mut()
        .expect("section is an object")
        .insert(key.to_string(), value);
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_resolve() {
        let cfg = RunConfig::from_value(json!({ "command": { "name": "tau-scaling" } })).unwrap();
        assert_eq!(cfg.execution.replicas, Some(1000));
        assert_eq!(cfg.model.n, 2);
    }

    #[test]
    fn unknown_keys_rejected() {
        for v in [
            json!({ "command": { "name": "exact-gap", "bogus": 1 } }),
            json!({ "command": { "name": "exact-gap" }, "model": { "q": 0.3 } }),
            json!({ "command": { "name": "exact-gap" }, "extra": {} }),
            json!({ "command": { "name": "nope" } }),
        ] {
            assert!(RunConfig::from_value(v).is_err());
        }
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::from_value(json!({
            "model": { "d": 2, "n": 3, "p": 0.4 },
            "command": { "name": "shape", "snapshots": [1.0, 2.0] },
            "execution": { "seed": 9, "threads": 1, "output_dir": "/tmp/x" }
        }))
        .unwrap();
        let echo = cfg.echo();
        assert!(echo["execution"].get("threads").is_none());
        let again = RunConfig::from_value(echo.clone()).unwrap();
        assert_eq!(again.echo(), echo);
    }

    #[test]
    fn custom_family_round_trip() {
        let cfg = RunConfig::from_value(json!({
            "model": { "d": 1, "n": 3, "p": 0.3, "family": "custom",
                       "custom_constraints": { "2": [[1]], "3": [[2]] } },
            "command": { "name": "exact-gap" }
        }))
        .unwrap();
        assert!(cfg.model.build().is_ok());
        let bad = json!({ "model": { "family": "custom" }, "command": { "name": "exact-gap" } });
        assert!(RunConfig::from_value(bad).is_err());
    }
}
