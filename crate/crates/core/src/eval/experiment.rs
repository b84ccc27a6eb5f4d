use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ConfusionCounts, EvalReport};
use crate::corpus::{label_corpus, split, Corpus, LabelConfig, LabeledSequence, SplitSpec};
use crate::embedding::{train_embeddings, EmbeddingConfig, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::model::{predict_boundaries, train_with_threads, ModelConfig, TrainOutcome};

/// The published experiment grid, shipped with the crate.
pub const BUNDLED_MANIFEST_JSON: &str = include_str!("../../data/experiments.json");

/// One row of an experiment grid: which corpora feed the embeddings, which
/// train the classifier, and which corpus's test portion is scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: u32,
    #[serde(rename = "embed")]
    pub embed_set: Vec<String>,
    #[serde(rename = "train")]
    pub train_set: Vec<String>,
    pub test: String,
    /// F1 published for this row at full scale, for reference only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ExperimentSpec {
    pub fn new(id: u32, embed: &[&str], train: &[&str], test: &str) -> Self {
        ExperimentSpec {
            id,
            embed_set: embed.iter().map(|s| s.to_string()).collect(),
            train_set: train.iter().map(|s| s.to_string()).collect(),
            test: test.to_string(),
            reported_f1: None,
            note: None,
        }
    }

    fn embed_key(&self) -> Vec<String> {
        canonical(&self.embed_set)
    }

    fn train_key(&self) -> Vec<String> {
        canonical(&self.train_set)
    }

    pub fn validate(&self, registry: &CorpusRegistry) -> Result<()> {
        if self.embed_set.is_empty() || self.train_set.is_empty() {
            return Err(Error::config(format!(
                "experiment {}: embedding and training sets must be nonempty",
                self.id
            )));
        }
        for name in self.embed_set.iter().chain(&self.train_set).chain([&self.test]) {
            if registry.get(name).is_none() {
                return Err(Error::config(format!("experiment {}: unknown corpus {name}", self.id)));
            }
        }
        Ok(())
    }
}

fn canonical(names: &[String]) -> Vec<String> {
    names.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()
}

pub fn bundled_manifest() -> Vec<ExperimentSpec> {
    serde_json::from_str(BUNDLED_MANIFEST_JSON).expect("bundled manifest is valid")
}

/// Reads a JSON list of experiment specs.
pub fn load_manifest(path: &Path) -> Result<Vec<ExperimentSpec>> {
    if !path.exists() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, Default)]
pub struct CorpusRegistry {
    corpora: BTreeMap<String, Corpus>,
}

impl CorpusRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, corpus: Corpus) -> Result<()> {
        if self.corpora.contains_key(&corpus.name) {
            return Err(Error::config(format!("corpus {} registered twice", corpus.name)));
        }
        self.corpora.insert(corpus.name.clone(), corpus);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Corpus> {
        self.corpora.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.corpora.keys().map(String::as_str)
    }
}

impl FromIterator<Corpus> for CorpusRegistry {
    fn from_iter<I: IntoIterator<Item = Corpus>>(iter: I) -> Self {
        let mut r = CorpusRegistry::new();
        for c in iter {
            r.corpora.insert(c.name.clone(), c);
        }
        r
    }
}

/// Which portions of the embedding corpora the embeddings see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmbedPolicy {
    /// Training portions only, so test contexts stay unseen.
    #[default]
    TrainPortions,
    /// Whole corpora, test portions included.
    FullCorpora,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub labels: LabelConfig,
    pub split: SplitSpec,
    pub embedding: EmbeddingConfig,
    pub model: ModelConfig,
    pub embed_policy: EmbedPolicy,
}

/// Document ids (as `corpus/doc`) that fed each stage of one experiment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DataProvenance {
    pub embedding_docs: BTreeSet<String>,
    pub training_docs: BTreeSet<String>,
    pub test_docs: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub report: EvalReport,
    pub provenance: DataProvenance,
}

struct PreparedCorpus {
    train: Vec<LabeledSequence>,
    test: Vec<LabeledSequence>,
}

fn qualified<'a>(corpus: &str, seqs: &'a [LabeledSequence]) -> impl Iterator<Item = String> + 'a {
    let corpus = corpus.to_string();
    seqs.iter().map(move |s| format!("{corpus}/{}", s.id))
}

/// Runs experiments against a registry, splitting each corpus once and
/// reusing embeddings and classifiers across experiments that share them.
pub struct ExperimentRunner<'a> {
    registry: &'a CorpusRegistry,
    config: PipelineConfig,
    caching: bool,
    threads: usize,
    prepared: HashMap<String, PreparedCorpus>,
    embeddings: HashMap<Vec<String>, Arc<EmbeddingMatrix>>,
    models: HashMap<(Vec<String>, Vec<String>), Arc<TrainOutcome>>,
}

impl<'a> ExperimentRunner<'a> {
    pub fn new(registry: &'a CorpusRegistry, config: PipelineConfig) -> Self {
        ExperimentRunner {
            registry,
            config,
            caching: true,
            threads: 1,
            prepared: HashMap::new(),
            embeddings: HashMap::new(),
            models: HashMap::new(),
        }
    }

    pub fn with_caching(mut self, caching: bool) -> Self {
        self.caching = caching;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn prepare(&mut self, name: &str) -> Result<&PreparedCorpus> {
        if !self.prepared.contains_key(name) {
            let corpus = self
                .registry
                .get(name)
                .ok_or_else(|| Error::config(format!("unknown corpus {name}")))?;
            let parts = split(corpus, &self.config.split, &self.config.labels)?;
            let prepared = PreparedCorpus {
                train: label_corpus(&parts.train, &self.config.labels),
                test: label_corpus(&parts.test, &self.config.labels),
            };
            self.prepared.insert(name.to_string(), prepared);
        }
        Ok(&self.prepared[name])
    }

    /// Sequences feeding the embeddings, in sorted corpus-name order.
    fn embedding_data(&mut self, key: &[String]) -> Result<(Vec<LabeledSequence>, BTreeSet<String>)> {
        let policy = self.config.embed_policy;
        let mut seqs = Vec::new();
        let mut ids = BTreeSet::new();
        for name in key {
            let p = self.prepare(name)?;
            ids.extend(qualified(name, &p.train));
            seqs.extend(p.train.iter().cloned());
            if policy == EmbedPolicy::FullCorpora {
                ids.extend(qualified(name, &p.test));
                seqs.extend(p.test.iter().cloned());
            }
        }
        Ok((seqs, ids))
    }

    fn training_data(&mut self, key: &[String]) -> Result<(Vec<LabeledSequence>, BTreeSet<String>)> {
        let mut seqs = Vec::new();
        let mut ids = BTreeSet::new();
        for name in key {
            let p = self.prepare(name)?;
            ids.extend(qualified(name, &p.train));
            seqs.extend(p.train.iter().cloned());
        }
        Ok((seqs, ids))
    }

    fn embeddings_for(&mut self, key: &[String], data: &[LabeledSequence]) -> Result<Arc<EmbeddingMatrix>> {
        if let Some(m) = self.embeddings.get(key).filter(|_| self.caching) {
            return Ok(Arc::clone(m));
        }
        if data.iter().all(|s| s.is_empty()) {
            return Err(Error::config(format!(
                "no embedding training data for {}",
                key.join("+")
            )));
        }
        log::info!("training embeddings on {}", key.join("+"));
        let m = Arc::new(train_embeddings(data, &self.config.embedding)?);
        if self.caching {
            self.embeddings.insert(key.to_vec(), Arc::clone(&m));
        }
        Ok(m)
    }

    fn model_for(
        &mut self,
        key: (Vec<String>, Vec<String>),
        matrix: &EmbeddingMatrix,
        data: &[LabeledSequence],
    ) -> Result<Arc<TrainOutcome>> {
        if let Some(m) = self.models.get(&key).filter(|_| self.caching) {
            return Ok(Arc::clone(m));
        }
        if data.iter().all(|s| s.is_empty()) {
            return Err(Error::config(format!(
                "no classifier training data for {}",
                key.1.join("+")
            )));
        }
        log::info!(
            "training classifier: embeddings {}, data {}",
            key.0.join("+"),
            key.1.join("+")
        );
        let m = Arc::new(train_with_threads(data, matrix, &self.config.model, self.threads)?);
        if self.caching {
            self.models.insert(key, Arc::clone(&m));
        }
        Ok(m)
    }

    pub fn run(&mut self, spec: &ExperimentSpec) -> Result<ExperimentRun> {
        spec.validate(self.registry)?;
        let embed_key = spec.embed_key();
        let train_key = spec.train_key();

        let (embed_data, embedding_docs) = self.embedding_data(&embed_key)?;
        let matrix = self.embeddings_for(&embed_key, &embed_data)?;
        drop(embed_data);

        let (train_data, training_docs) = self.training_data(&train_key)?;
        let model = self.model_for((embed_key, train_key), &matrix, &train_data)?;
        drop(train_data);

        let model_config = self.config.model.clone();
        let test = &self.prepare(&spec.test)?.test;
        if test.iter().all(|s| s.is_empty()) {
            return Err(Error::config(format!("test portion of {} is empty", spec.test)));
        }
        let mut counts = ConfusionCounts::default();
        for seq in test {
            let predicted = predict_boundaries(seq.chars(), &matrix, &model.stack, &model_config)?;
            for (&g, p) in seq.labels().iter().zip(predicted) {
                counts.record(g, p);
            }
        }
        let test_docs = qualified(&spec.test, test).collect();
        Ok(ExperimentRun {
            report: EvalReport::from_counts(counts).with_experiment(spec.id),
            provenance: DataProvenance {
                embedding_docs,
                training_docs,
                test_docs,
            },
        })
    }
}

/// Runs one experiment from scratch.
pub fn run_experiment(spec: &ExperimentSpec, registry: &CorpusRegistry, config: &PipelineConfig) -> Result<EvalReport> {
    ExperimentRunner::new(registry, config.clone())
        .run(spec)
        .map(|r| r.report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub spec: ExperimentSpec,
    #[serde(default)]
    pub report: Option<EvalReport>,
    /// Set instead of `report` when the experiment failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixProvenance {
    pub config: PipelineConfig,
    pub split_seed: u64,
    pub embedding_seed: u64,
    pub model_seed: u64,
    pub caching: bool,
    pub started_at: String,
    pub finished_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixResult {
    pub rows: Vec<MatrixRow>,
    pub provenance: MatrixProvenance,
}

impl ExperimentRunner<'_> {
    /// One row per spec, in order. A failing spec records its error and the
    /// remaining specs still run.
    pub fn run_matrix(&mut self, specs: &[ExperimentSpec]) -> Result<MatrixResult> {
        if specs.is_empty() {
            return Err(Error::config("experiment manifest is empty"));
        }
        let started_at = chrono::Utc::now().to_rfc3339();
        let rows = specs
            .iter()
            .map(|spec| match self.run(spec) {
                Ok(run) => MatrixRow {
                    spec: spec.clone(),
                    report: Some(run.report),
                    error: None,
                },
                Err(e) => {
                    log::error!("experiment {} failed: {e}", spec.id);
                    MatrixRow {
                        spec: spec.clone(),
                        report: None,
                        error: Some(e.to_string()),
                    }
                }
            })
            .collect();
        Ok(MatrixResult {
            rows,
            provenance: MatrixProvenance {
                config: self.config.clone(),
                split_seed: self.config.split.seed,
                embedding_seed: self.config.embedding.seed,
                model_seed: self.config.model.seed,
                caching: self.caching,
                started_at,
                finished_at: chrono::Utc::now().to_rfc3339(),
            },
        })
    }
}

pub fn run_matrix(
    specs: &[ExperimentSpec],
    registry: &CorpusRegistry,
    config: &PipelineConfig,
) -> Result<MatrixResult> {
    ExperimentRunner::new(registry, config.clone()).run_matrix(specs)
}
