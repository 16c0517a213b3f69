//! Experiment configuration: one JSON document, optionally overridden
//! field by field with `--set dotted.path=value`.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;
use serde_json::{Map, Value};

use weave::instruct::{GenOptions, Task};
use weave::sampler::EnglishPolicy;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub paths: Paths,
    pub ingest: IngestConfig,
    pub align: AlignConfig,
    pub quality: QualityConfig,
    pub sample: SampleConfig,
    pub instruct: InstructConfig,
    pub metrics: MetricsConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub transcripts: Option<PathBuf>,
    pub aligned: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub bitext: Option<PathBuf>,
    pub token_counts: Option<PathBuf>,
    pub preset: Option<PathBuf>,
    pub embeddings: Vec<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub strict: bool,
    pub overlap_slack_ms: i64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    pub iou_threshold: f64,
    pub exact_match_fast_path: bool,
    pub min_degree: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        let p = weave::AlignPolicy::default();
        AlignConfig {
            iou_threshold: p.iou_threshold,
            exact_match_fast_path: p.exact_match_fast_path,
            min_degree: p.min_degree,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityConfig {
    pub pair: Option<(String, String)>,
    pub sample_cap: usize,
    pub threshold: f64,
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig {
            pair: None,
            sample_cap: 10_000,
            threshold: 60.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub token_budget: Option<u64>,
    pub budgets: Option<Vec<u64>>,
    pub degree: Option<usize>,
    pub language_set: Option<Vec<String>>,
    pub include_english: EnglishPolicy,
    pub domains: Option<Vec<String>>,
    pub tokenizer: String,
    pub allow_repeat: bool,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            token_budget: None,
            budgets: None,
            degree: None,
            language_set: None,
            include_english: EnglishPolicy::Free,
            domains: None,
            tokenizer: "builtin".into(),
            allow_repeat: false,
        }
    }
}

// no deny_unknown_fields: serde cannot combine it with flatten
#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct InstructConfig {
    pub tasks: Vec<Task>,
    pub ratios: Option<Vec<f64>>,
    pub example_budget: usize,
    #[serde(flatten)]
    pub options: GenOptions,
}

impl Default for InstructConfig {
    fn default() -> Self {
        InstructConfig {
            tasks: Task::ALL.to_vec(),
            ratios: None,
            example_budget: 1000,
            options: GenOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub measures: Vec<String>,
    pub variance_keep: f64,
    pub ridge: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        let svcca = weave::metrics::SvccaOptions::default();
        MetricsConfig {
            measures: weave::metrics::Measure::ALL
                .iter()
                .map(|m| m.name().to_string())
                .collect(),
            variance_keep: svcca.variance_keep,
            ridge: svcca.ridge,
        }
    }
}

/// Sets `path` (dot separated) inside `doc` to `raw`, parsed as JSON when it
/// parses and kept as a string otherwise.
pub fn set_dotted(doc: &mut Value, path: &str, raw: &str) -> Result<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let mut parts = path.split('.').peekable();
    while let Some(key) = parts.next() {
        if key.is_empty() {
            bail!("empty segment in override path {path:?}");
        }
        if !node.is_object() {
            bail!("override path {path:?} runs through a non-object value");
        }
        let obj = node.as_object_mut().expect("checked object");
        if parts.peek().is_none() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl Config {
    /// Reads the config file (if any), applies `overrides` in order and
    /// resolves relative paths against the config file's directory.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Config> {
        let (mut doc, base) = match file {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                let doc: Value =
                    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (doc, base)
            }
            None => (Value::Object(Map::new()), PathBuf::new()),
        };
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("override {item:?} is not of the form path=value"))?;
            set_dotted(&mut doc, key.trim(), raw)?;
        }
        let mut config: Config = serde_json::from_value(doc).context("invalid configuration")?;

        let p = &mut config.paths;
        for slot in [
            &mut p.transcripts,
            &mut p.aligned,
            &mut p.out_dir,
            &mut p.scores,
            &mut p.bitext,
            &mut p.token_counts,
            &mut p.preset,
        ]
        .into_iter()
        .flatten()
        {
            resolve(&base, slot);
        }
        for e in &mut p.embeddings {
            resolve(&base, e);
        }
        Ok(config)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| anyhow!("missing required field `seed` (set it in the config or pass --seed)"))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn transcripts(&self) -> Result<&Path> {
        self.paths
            .transcripts
            .as_deref()
            .ok_or_else(|| anyhow!("missing required field `paths.transcripts`"))
    }

    pub fn aligned(&self) -> PathBuf {
        self.paths
            .aligned
            .clone()
            .unwrap_or_else(|| self.out_dir().join("aligned.jsonl"))
    }

    pub fn pair(&self) -> Result<(String, String)> {
        let (a, b) = self
            .quality
            .pair
            .clone()
            .ok_or_else(|| anyhow!("missing required field `quality.pair`"))?;
        let (src, tgt) = weave::quality::canonical_pair(&a, &b)?;
        Ok((src.to_string(), tgt.to_string()))
    }
}
