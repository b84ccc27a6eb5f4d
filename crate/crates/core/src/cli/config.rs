use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{BoundaryMode, LabelConfig, SplitSpec, SplitUnit};
use crate::embedding::EmbeddingConfig;
use crate::error::{Error, Result};
use crate::eval::{EmbedPolicy, PipelineConfig};
use crate::model::{HeadInput, ModelConfig};

/// Everything a command needs, loadable from one JSON file. Each leaf key
/// has exactly one flag; see [`CONFIG_FLAGS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Corpus name to directory, manifest or text file.
    pub corpora: BTreeMap<String, PathBuf>,
    /// When set, overrides the split, embedding and model seeds together.
    pub seed: Option<u64>,
    pub labels: LabelConfig,
    pub split: SplitSpec,
    pub embedding: EmbeddingConfig,
    pub model: ModelConfig,
    pub embed_policy: EmbedPolicy,
    pub out: PathBuf,
    pub threads: usize,
    pub verbosity: u8,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpora: BTreeMap::new(),
            seed: None,
            labels: LabelConfig::default(),
            split: SplitSpec::default(),
            embedding: EmbeddingConfig::default(),
            model: ModelConfig::default(),
            embed_policy: EmbedPolicy::default(),
            out: PathBuf::from("out"),
            threads: 1,
            verbosity: 0,
        }
    }
}

/// Config key (dotted path) to flag, one entry per leaf.
pub const CONFIG_FLAGS: &[(&str, &str)] = &[
    ("corpora", "--corpus"),
    ("seed", "--seed"),
    ("labels.delimiters", "--delimiters"),
    ("labels.ignorable", "--ignorable"),
    ("labels.ignore_whitespace", "--ignore-whitespace"),
    ("labels.sentence_final", "--sentence-final"),
    ("labels.boundary_mode", "--boundary-mode"),
    ("split.train_fraction", "--train-fraction"),
    ("split.seed", "--split-seed"),
    ("split.unit", "--split-unit"),
    ("embedding.dim", "--size"),
    ("embedding.window", "--window"),
    ("embedding.min_count", "--min-count"),
    ("embedding.epochs", "--iter"),
    ("embedding.batch_words", "--batch-words"),
    ("embedding.negatives", "--negative"),
    ("embedding.learning_rate", "--alpha"),
    ("embedding.min_learning_rate_fraction", "--min-alpha-fraction"),
    ("embedding.subsample", "--sample"),
    ("embedding.noise_power", "--ns-exponent"),
    ("embedding.seed", "--embed-seed"),
    ("model.num_layers", "--layers"),
    ("model.layer_output_dim", "--layer-output-dim"),
    ("model.context_len", "--context"),
    ("model.context_offset", "--context-offset"),
    ("model.num_classes", "--num-classes"),
    ("model.head_input", "--head-input"),
    ("model.learning_rate", "--lr"),
    ("model.beta1", "--beta1"),
    ("model.beta2", "--beta2"),
    ("model.epsilon", "--adam-epsilon"),
    ("model.batch_size", "--batch-size"),
    ("model.epochs", "--epochs"),
    ("model.seed", "--model-seed"),
    ("embed_policy", "--embed-policy"),
    ("out", "--out"),
    ("threads", "--threads"),
    ("verbosity", "--verbose"),
];

fn parse_corpus(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got {s:?}")),
    }
}

/// Overrides for [`RunConfig`]; flags win over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON run configuration; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Register a corpus (repeatable)
    #[arg(long, global = true, value_name = "NAME=PATH", value_parser = parse_corpus)]
    pub corpus: Vec<(String, PathBuf)>,
    /// Seed for the split, embeddings and classifier at once
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Delimiter characters, replacing the default set
    #[arg(long, global = true, value_name = "CHARS", help_heading = "Labels")]
    pub delimiters: Option<String>,
    /// Ignorable characters, replacing the default set
    #[arg(long, global = true, value_name = "CHARS", help_heading = "Labels")]
    pub ignorable: Option<String>,
    /// Treat all whitespace as ignorable
    #[arg(long, global = true, value_name = "BOOL", value_parser = parse_bool, help_heading = "Labels")]
    pub ignore_whitespace: Option<bool>,
    /// Sentence-final delimiter characters
    #[arg(long, global = true, value_name = "CHARS", help_heading = "Labels")]
    pub sentence_final: Option<String>,
    /// Which delimiters induce a boundary
    #[arg(long, global = true, value_name = "MODE", value_parser = ["all_delimiters", "sentence_final"], help_heading = "Labels")]
    pub boundary_mode: Option<String>,

    /// Training share of each corpus
    #[arg(long, global = true, value_name = "F", help_heading = "Split")]
    pub train_fraction: Option<f64>,
    /// Seed for the train/test shuffle
    #[arg(long, global = true, value_name = "N", help_heading = "Split")]
    pub split_seed: Option<u64>,
    /// Unit shuffled by the split
    #[arg(long, global = true, value_name = "UNIT", value_parser = ["document", "sequence"], help_heading = "Split")]
    pub split_unit: Option<String>,

    /// Embedding dimension
    #[arg(long, global = true, value_name = "N", help_heading = "Embeddings")]
    pub size: Option<usize>,
    /// Maximum context distance per side
    #[arg(long, global = true, value_name = "N", help_heading = "Embeddings")]
    pub window: Option<usize>,
    /// Drop characters rarer than this from the vocabulary
    #[arg(long, global = true, value_name = "N", help_heading = "Embeddings")]
    pub min_count: Option<u64>,
    /// Embedding training epochs
    #[arg(long, global = true, value_name = "N", help_heading = "Embeddings")]
    pub iter: Option<usize>,
    /// Words per learning-rate update
    #[arg(long, global = true, value_name = "N", help_heading = "Embeddings")]
    pub batch_words: Option<usize>,
    /// Negative samples per pair
    #[arg(long, global = true, value_name = "N", help_heading = "Embeddings")]
    pub negative: Option<usize>,
    /// Initial embedding learning rate
    #[arg(long, global = true, value_name = "F", help_heading = "Embeddings")]
    pub alpha: Option<f64>,
    /// Final learning rate as a fraction of --alpha
    #[arg(long, global = true, value_name = "F", help_heading = "Embeddings")]
    pub min_alpha_fraction: Option<f64>,
    /// Frequent-character downsampling threshold
    #[arg(long, global = true, value_name = "F", help_heading = "Embeddings")]
    pub sample: Option<f64>,
    /// Exponent of the negative-sampling distribution
    #[arg(long, global = true, value_name = "F", help_heading = "Embeddings")]
    pub ns_exponent: Option<f64>,
    /// Seed for embedding initialization and sampling
    #[arg(long, global = true, value_name = "N", help_heading = "Embeddings")]
    pub embed_seed: Option<u64>,

    /// Stacked BiLSTM layers
    #[arg(long, global = true, value_name = "N", help_heading = "Classifier")]
    pub layers: Option<usize>,
    /// Concatenated bidirectional output width per layer
    #[arg(long, global = true, value_name = "N", help_heading = "Classifier")]
    pub layer_output_dim: Option<usize>,
    /// Characters per input window
    #[arg(long, global = true, value_name = "N", help_heading = "Classifier")]
    pub context: Option<usize>,
    /// Characters before the target inside the window
    #[arg(long, global = true, value_name = "N", help_heading = "Classifier")]
    pub context_offset: Option<usize>,
    /// Output classes of the dense head (must be 2)
    #[arg(long, global = true, value_name = "N", help_heading = "Classifier")]
    pub num_classes: Option<usize>,
    /// Top-layer state read by the dense head
    #[arg(long, global = true, value_name = "WHICH", value_parser = ["target_position", "last_step"], help_heading = "Classifier")]
    pub head_input: Option<String>,
    /// Adam learning rate
    #[arg(long, global = true, value_name = "F", help_heading = "Classifier")]
    pub lr: Option<f64>,
    /// Adam first-moment decay
    #[arg(long, global = true, value_name = "F", help_heading = "Classifier")]
    pub beta1: Option<f64>,
    /// Adam second-moment decay
    #[arg(long, global = true, value_name = "F", help_heading = "Classifier")]
    pub beta2: Option<f64>,
    /// Adam denominator constant
    #[arg(long, global = true, value_name = "F", help_heading = "Classifier")]
    pub adam_epsilon: Option<f64>,
    /// Windows per Adam step
    #[arg(long, global = true, value_name = "N", help_heading = "Classifier")]
    pub batch_size: Option<usize>,
    /// Classifier training epochs
    #[arg(long, global = true, value_name = "N", help_heading = "Classifier")]
    pub epochs: Option<usize>,
    /// Seed for classifier initialization and batch order
    #[arg(long, global = true, value_name = "N", help_heading = "Classifier")]
    pub model_seed: Option<u64>,

    /// Corpus portions the embeddings see
    #[arg(long, global = true, value_name = "POLICY", value_parser = ["train_portions", "full_corpora"])]
    pub embed_policy: Option<String>,
    /// Output directory for artifacts
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for classifier gradients (results do not depend on it)
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// More log output (repeatable)
    #[arg(short, long = "verbose", global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

fn chars(s: &str) -> std::collections::BTreeSet<char> {
    s.chars().collect()
}

fn from_name<T: serde::de::DeserializeOwned>(name: &str) -> T {
    serde_json::from_value(serde_json::Value::String(name.to_string())).expect("value parser restricts names")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingPath(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    /// Config file (if any) with flags applied on top.
    pub fn resolve(args: &ConfigArgs) -> Result<Self> {
        let mut c = match &args.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        c.apply(args);
        c.validate()?;
        Ok(c)
    }

    fn apply(&mut self, a: &ConfigArgs) {
        for (name, path) in &a.corpus {
            self.corpora.insert(name.clone(), path.clone());
        }
        if a.seed.is_some() {
            self.seed = a.seed;
        }
        if let Some(seed) = self.seed {
            self.split.seed = seed;
            self.embedding.seed = seed;
            self.model.seed = seed;
        }

        let l = &mut self.labels;
        if let Some(s) = &a.delimiters {
            l.delimiters = chars(s);
        }
        if let Some(s) = &a.ignorable {
            l.ignorable = chars(s);
        }
        if let Some(b) = a.ignore_whitespace {
            l.ignore_whitespace = b;
        }
        if let Some(s) = &a.sentence_final {
            l.sentence_final = chars(s);
        }
        if let Some(m) = &a.boundary_mode {
            l.boundary_mode = from_name::<BoundaryMode>(m);
        }

        let s = &mut self.split;
        set(&mut s.train_fraction, a.train_fraction);
        set(&mut s.seed, a.split_seed);
        if let Some(u) = &a.split_unit {
            s.unit = from_name::<SplitUnit>(u);
        }

        let e = &mut self.embedding;
        set(&mut e.dim, a.size);
        set(&mut e.window, a.window);
        set(&mut e.min_count, a.min_count);
        set(&mut e.epochs, a.iter);
        set(&mut e.batch_words, a.batch_words);
        set(&mut e.negatives, a.negative);
        set(&mut e.learning_rate, a.alpha);
        set(&mut e.min_learning_rate_fraction, a.min_alpha_fraction);
        if a.sample.is_some() {
            e.subsample = a.sample;
        }
        set(&mut e.noise_power, a.ns_exponent);
        set(&mut e.seed, a.embed_seed);

        let m = &mut self.model;
        set(&mut m.num_layers, a.layers);
        set(&mut m.layer_output_dim, a.layer_output_dim);
        set(&mut m.context_len, a.context);
        set(&mut m.context_offset, a.context_offset);
        set(&mut m.num_classes, a.num_classes);
        if let Some(h) = &a.head_input {
            m.head_input = from_name::<HeadInput>(h);
        }
        set(&mut m.learning_rate, a.lr);
        set(&mut m.beta1, a.beta1);
        set(&mut m.beta2, a.beta2);
        set(&mut m.epsilon, a.adam_epsilon);
        set(&mut m.batch_size, a.batch_size);
        set(&mut m.epochs, a.epochs);
        set(&mut m.seed, a.model_seed);

        if let Some(p) = &a.embed_policy {
            self.embed_policy = from_name::<EmbedPolicy>(p);
        }
        set(&mut self.out, a.out.clone());
        set(&mut self.threads, a.threads);
        self.verbosity = self.verbosity.max(a.verbose);
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.embedding.validate()?;
        self.model.validate()?;
        if self.threads == 0 {
            return Err(Error::config("threads must be at least 1"));
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            labels: self.labels.clone(),
            split: self.split,
            embedding: self.embedding.clone(),
            model: self.model.clone(),
            embed_policy: self.embed_policy,
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(json))
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Dotted paths of every leaf in the JSON form of the default config.
pub fn config_keys() -> Vec<String> {
    fn walk(prefix: &str, v: &serde_json::Value, out: &mut Vec<String>) {
        match v {
            serde_json::Value::Object(map) if !prefix.is_empty() || !map.is_empty() => {
                // The corpus map is a single key whose entries are user data.
                if prefix == "corpora" {
                    out.push(prefix.to_string());
                    return;
                }
                for (k, child) in map {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&key, child, out);
                }
            }
            _ => out.push(prefix.to_string()),
        }
    }
    let mut out = Vec::new();
    walk(
        "",
        &serde_json::to_value(RunConfig::default()).expect("config serializes"),
        &mut out,
    );
    out
}
