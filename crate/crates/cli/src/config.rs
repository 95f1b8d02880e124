//! Resolved run configuration.
//!
//! Every command resolves its configuration in three layers, each overriding
//! the one before: built-in defaults, the optional `--config` JSON file, and
//! flags given on the command line. The result is echoed to `run.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use taxembed_core::embed::{
    EnrichmentConfig, SolverRegistry, DEFAULT_ALPHA, DEFAULT_SERIES_TERMS,
    DEFAULT_SERIES_TOLERANCE, DIRECT_SOLVE,
};
use taxembed_core::evaluate::{ProtocolRegistry, ProtocolSettings, ZeroShotVariant, STANDARD};
use taxembed_core::project::TrainingConfig;
use taxembed_core::synth::SynthSpec;
use taxembed_core::taxonomy::DEFAULT_SHARE_DEPTH;

use crate::CliError;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_OUT_DIR: &str = "out";
pub const DEFAULT_LOG_LEVEL: &str = "warn";
pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig<P> {
    pub command: String,
    pub seed: u64,
    /// Worker threads; `None` uses every available core.
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub log_level: String,
    pub params: P,
}

/// Command-specific parameters.
pub trait Params: Serialize + DeserializeOwned + Default {
    const COMMAND: &'static str;

    /// Copies the run seed into parameter records that carry their own.
    fn apply_seed(&mut self, _seed: u64) {}

    fn validate(&self) -> Result<(), CliError>;
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Usage(format!("missing required input `--{flag}`")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedParams {
    pub graph: Option<PathBuf>,
    pub alpha: f64,
    pub method: String,
    pub series_terms: usize,
    pub series_tolerance: f64,
    pub dim: usize,
}

impl Default for EmbedParams {
    fn default() -> Self {
        Self {
            graph: None,
            alpha: DEFAULT_ALPHA,
            method: DIRECT_SOLVE.to_string(),
            series_terms: DEFAULT_SERIES_TERMS,
            series_tolerance: DEFAULT_SERIES_TOLERANCE,
            dim: 8,
        }
    }
}

impl EmbedParams {
    pub fn graph(&self) -> Result<&Path, CliError> {
        require(&self.graph, "graph")
    }

    pub fn enrichment(&self) -> EnrichmentConfig {
        EnrichmentConfig {
            alpha: self.alpha,
            method: self.method.clone(),
            series_terms: self.series_terms,
            series_tolerance: self.series_tolerance,
        }
    }
}

impl Params for EmbedParams {
    const COMMAND: &'static str = "embed";

    fn validate(&self) -> Result<(), CliError> {
        self.graph()?;
        self.enrichment()
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        SolverRegistry::default()
            .get(&self.method)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if self.dim == 0 {
            return Err(CliError::Usage("`--dim` must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub features: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub training: TrainingConfig,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            features: None,
            embeddings: None,
            training: TrainingConfig {
                seed: DEFAULT_SEED,
                ..TrainingConfig::default()
            },
        }
    }
}

impl TrainParams {
    pub fn features(&self) -> Result<&Path, CliError> {
        require(&self.features, "features")
    }

    pub fn embeddings(&self) -> Result<&Path, CliError> {
        require(&self.embeddings, "embeddings")
    }
}

impl Params for TrainParams {
    const COMMAND: &'static str = "train";

    fn apply_seed(&mut self, seed: u64) {
        self.training.seed = seed;
    }

    fn validate(&self) -> Result<(), CliError> {
        self.features()?;
        self.embeddings()?;
        self.training
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyParams {
    pub model: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    /// Label list file; every embedded concept when absent.
    pub candidates: Option<PathBuf>,
    pub k: usize,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            model: None,
            embeddings: None,
            queries: None,
            candidates: None,
            k: 5,
        }
    }
}

impl ClassifyParams {
    pub fn model(&self) -> Result<&Path, CliError> {
        require(&self.model, "model")
    }

    pub fn embeddings(&self) -> Result<&Path, CliError> {
        require(&self.embeddings, "embeddings")
    }

    pub fn queries(&self) -> Result<&Path, CliError> {
        require(&self.queries, "queries")
    }
}

impl Params for ClassifyParams {
    const COMMAND: &'static str = "classify";

    fn validate(&self) -> Result<(), CliError> {
        self.model()?;
        self.embeddings()?;
        self.queries()?;
        if self.k == 0 {
            return Err(CliError::Usage("`--k` must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    pub graph: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub protocol: String,
    /// Synthetic manifest supplying the training and zero-shot class lists.
    pub manifest: Option<PathBuf>,
    pub training: Option<PathBuf>,
    pub zero_shot: Option<PathBuf>,
    pub ks: Vec<usize>,
    pub max_step: usize,
    pub variant: ZeroShotVariant,
    pub inject: bool,
    pub share_depth: usize,
}

impl Default for EvalParams {
    fn default() -> Self {
        let s = ProtocolSettings::default();
        Self {
            graph: None,
            embeddings: None,
            model: None,
            features: None,
            protocol: STANDARD.to_string(),
            manifest: None,
            training: None,
            zero_shot: None,
            ks: s.ks,
            max_step: s.max_step,
            variant: s.variant,
            inject: s.inject_subsumers_into_candidates,
            share_depth: DEFAULT_SHARE_DEPTH,
        }
    }
}

impl EvalParams {
    pub fn graph(&self) -> Result<&Path, CliError> {
        require(&self.graph, "graph")
    }

    pub fn embeddings(&self) -> Result<&Path, CliError> {
        require(&self.embeddings, "embeddings")
    }

    pub fn model(&self) -> Result<&Path, CliError> {
        require(&self.model, "model")
    }

    pub fn features(&self) -> Result<&Path, CliError> {
        require(&self.features, "features")
    }

    pub fn settings(&self) -> ProtocolSettings {
        ProtocolSettings {
            ks: self.ks.clone(),
            max_step: self.max_step,
            variant: self.variant,
            inject_subsumers_into_candidates: self.inject,
            share_depth: self.share_depth,
        }
    }
}

impl Params for EvalParams {
    const COMMAND: &'static str = "eval";

    fn validate(&self) -> Result<(), CliError> {
        self.graph()?;
        self.embeddings()?;
        self.model()?;
        self.features()?;
        ProtocolRegistry::default()
            .get(&self.protocol)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        self.settings()
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))
    }
}

impl Params for SynthSpec {
    const COMMAND: &'static str = "synth";

    fn apply_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    fn validate(&self) -> Result<(), CliError> {
        SynthSpec::validate(self).map_err(|e| CliError::Usage(e.to_string()))
    }
}

/// Recursively overlays `top` onto `base`. Objects merge key by key; anything else replaces.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Collects flags that were actually given into a JSON overlay.
#[derive(Default)]
pub struct Overlay {
    top: Map<String, Value>,
    params: Map<String, Value>,
}

impl Overlay {
    pub fn global<T: Serialize>(&mut self, key: &str, value: Option<T>) -> &mut Self {
        if let Some(v) = value {
            self.top.insert(
                key.into(),
                serde_json::to_value(v).expect("serializable flag"),
            );
        }
        self
    }

    pub fn param<T: Serialize>(&mut self, key: &str, value: Option<T>) -> &mut Self {
        if let Some(v) = value {
            let mut target = &mut self.params;
            let mut parts = key.split('.').peekable();
            while let Some(part) = parts.next() {
                if parts.peek().is_none() {
                    target.insert(
                        part.into(),
                        serde_json::to_value(v).expect("serializable flag"),
                    );
                    break;
                }
                target = target
                    .entry(part.to_string())
                    .or_insert_with(|| Value::Object(Map::new()))
                    .as_object_mut()
                    .expect("nested flag key");
            }
        }
        self
    }

    pub fn into_value(self) -> Value {
        let mut top = self.top;
        if !self.params.is_empty() {
            top.insert("params".into(), Value::Object(self.params));
        }
        Value::Object(top)
    }
}

pub fn defaults<P: Params>() -> RunConfig<P> {
    RunConfig {
        command: P::COMMAND.to_string(),
        seed: DEFAULT_SEED,
        threads: None,
        out_dir: PathBuf::from(DEFAULT_OUT_DIR),
        log_level: DEFAULT_LOG_LEVEL.to_string(),
        params: P::default(),
    }
}

/// Defaults, then the config file, then flags.
pub fn resolve<P: Params>(
    config_file: Option<&Path>,
    flags: Value,
) -> Result<RunConfig<P>, CliError> {
    let mut value = serde_json::to_value(defaults::<P>()).expect("defaults serialize");
    if let Some(path) = config_file {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let file: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        if !file.is_object() {
            return Err(CliError::Usage(format!(
                "config {}: expected a JSON object",
                path.display()
            )));
        }
        merge(&mut value, file);
    }
    merge(&mut value, flags);
    value["command"] = Value::String(P::COMMAND.to_string());

    let mut config: RunConfig<P> = serde_json::from_value(value)
        .map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
    config.params.apply_seed(config.seed);
    if config.threads == Some(0) {
        return Err(CliError::Usage("`--threads` must be positive".into()));
    }
    config.params.validate()?;
    Ok(config)
}

impl<P: Params> RunConfig<P> {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}
