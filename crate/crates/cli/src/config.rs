use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use voyagekit_core::path_id::SegmentConfig;
use voyagekit_core::synth::SyntheticFleetSpec;

pub const ENV_PREFIX: &str = "VOYAGEKIT_";

/// Everything a run needs. Loaded from JSON, then overridden by
/// `VOYAGEKIT_*` variables, then by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: PathBuf,
    /// Seeds the synthetic fleet, train/test splits, HMM fits and k-means.
    pub seed: u64,
    pub inputs: Inputs,
    pub ingest: IngestParams,
    pub optimize: OptimizeParams,
    pub pathid: PathIdParams,
    pub synth: SyntheticFleetSpec,
}

/// Input locations. Unset entries fall back to what `synth` writes under `<out>/synth`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub onboard_dir: Option<PathBuf>,
    pub weather_dir: Option<PathBuf>,
    pub segments: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub port_regions: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestParams {
    /// Seconds without data that end a voyage.
    pub gap_threshold: f64,
    /// Resampling bin width, seconds.
    pub resample_period: f64,
    pub dwell_min_secs: f64,
    pub dwell_max_sog: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeParams {
    pub train_fraction: f64,
    pub feature_case: String,
    /// Neighbours of the kNN speed model.
    pub k: usize,
    pub models: Vec<String>,
    pub plots: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathIdParams {
    pub method: String,
    pub metric: String,
    /// Dendrogram cut height, in units of the metric.
    pub cutoff: f64,
    /// Cluster count for kmeans and gmm.
    pub clusters: usize,
    /// Training share for segment-gmm; the rest is classified and scored.
    pub train_fraction: f64,
    pub segment: SegmentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            out: PathBuf::from("voyagekit-out"),
            seed: 7,
            inputs: Inputs::default(),
            ingest: IngestParams::default(),
            optimize: OptimizeParams::default(),
            pathid: PathIdParams::default(),
            synth: SyntheticFleetSpec::default(),
        }
    }
}

impl Default for IngestParams {
    fn default() -> Self {
        IngestParams {
            gap_threshold: 900.0,
            resample_period: 300.0,
            dwell_min_secs: 120.0,
            dwell_max_sog: 0.5,
        }
    }
}

impl Default for OptimizeParams {
    fn default() -> Self {
        OptimizeParams {
            train_fraction: 0.7,
            feature_case: "I".into(),
            k: 5,
            models: vec!["kNN".into(), "1NN-DTW".into(), "HMM".into()],
            plots: true,
        }
    }
}

impl Default for PathIdParams {
    fn default() -> Self {
        PathIdParams {
            method: "hierarchical".into(),
            metric: "euclidean".into(),
            cutoff: 0.1,
            clusters: 3,
            train_fraction: 0.7,
            segment: SegmentConfig::default(),
        }
    }
}

impl RunConfig {
    /// Defaults, then the optional file, then environment overrides.
    pub fn load(
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        let mut value = serde_json::to_value(RunConfig::default())?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let file_value: Value = serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?;
            let base = path.parent().unwrap_or(Path::new("."));
            merge(&mut value, resolve_paths(file_value, base));
        }
        let mut overrides: Vec<(String, String)> = env
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        overrides.sort();
        for (key, raw) in overrides {
            let path: Vec<String> = key[ENV_PREFIX.len()..]
                .to_lowercase()
                .split("__")
                .map(String::from)
                .collect();
            let parsed = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
            set_path(&mut value, &path, parsed).with_context(|| format!("applying {key}"))?;
        }
        serde_json::from_value(value).context("invalid configuration")
    }

    pub fn validate(&self) -> Result<()> {
        let i = &self.ingest;
        if !(i.gap_threshold > 0.0
            && i.resample_period > 0.0
            && i.dwell_min_secs >= 0.0
            && i.dwell_max_sog >= 0.0)
        {
            bail!("ingest: gap_threshold and resample_period must be positive, dwell settings non-negative");
        }
        for (name, f) in [
            ("optimize.train_fraction", self.optimize.train_fraction),
            ("pathid.train_fraction", self.pathid.train_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                bail!("{name} must lie strictly between 0 and 1, got {f}");
            }
        }
        if self.optimize.k == 0 || self.pathid.clusters == 0 {
            bail!("optimize.k and pathid.clusters must be at least 1");
        }
        if !(self.pathid.cutoff >= 0.0) {
            bail!("pathid.cutoff must be non-negative");
        }
        let inputs = &self.inputs;
        for path in [
            &inputs.onboard_dir,
            &inputs.weather_dir,
            &inputs.segments,
            &inputs.labels,
            &inputs.port_regions,
        ]
        .into_iter()
        .flatten()
        {
            if !path.exists() {
                bail!("configured input {} does not exist", path.display());
            }
        }
        Ok(())
    }

    pub fn synth_dir(&self) -> PathBuf {
        self.out.join("synth")
    }

    pub fn store_path(&self) -> PathBuf {
        self.out.join("voyages.json")
    }

    /// Configured path, else the synthetic default when it exists.
    pub fn input_or_synth(
        &self,
        configured: &Option<PathBuf>,
        synth_name: &str,
    ) -> Option<PathBuf> {
        configured.clone().or_else(|| {
            let p = self.synth_dir().join(synth_name);
            p.exists().then_some(p)
        })
    }
}

fn resolve_paths(mut v: Value, base: &Path) -> Value {
    let join = |s: &mut Value| {
        if let Some(p) = s.as_str() {
            if Path::new(p).is_relative() {
                *s = Value::String(base.join(p).to_string_lossy().into_owned());
            }
        }
    };
    if let Some(out) = v.get_mut("out") {
        join(out);
    }
    if let Some(Value::Object(inputs)) = v.get_mut("inputs") {
        inputs.values_mut().for_each(join);
    }
    v
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
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

fn set_path(root: &mut Value, path: &[String], v: Value) -> Result<()> {
    let (last, parents) = path.split_last().context("empty override key")?;
    let mut node = root;
    for p in parents {
        node = node
            .as_object_mut()
            .and_then(|o| o.get_mut(p))
            .with_context(|| format!("unknown config section `{p}`"))?;
    }
    let obj = node
        .as_object_mut()
        .context("override target is not a section")?;
    if !obj.contains_key(last) {
        bail!("unknown config key `{last}`");
    }
    obj.insert(last.clone(), v);
    Ok(())
}
