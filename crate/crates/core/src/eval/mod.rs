//! Boundary F1 and the corpus-combination experiment runner.

mod experiment;
mod export;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

pub use experiment::{
    bundled_manifest, load_manifest, run_experiment, run_matrix, CorpusRegistry, DataProvenance, EmbedPolicy,
    ExperimentRun, ExperimentRunner, ExperimentSpec, MatrixProvenance, MatrixResult, MatrixRow, PipelineConfig,
    BUNDLED_MANIFEST_JSON,
};
pub use export::{read_matrix_json, write_matrix_csv, write_matrix_json};

/// Per-character confusion counts with Boundary as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, gold: Label, predicted: Label) {
        match (gold.is_boundary(), predicted.is_boundary()) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    /// tp / (tp + fp), zero when nothing was predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// tp / (tp + fn), zero when there are no gold positives.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment_id: Option<u32>,
}

impl EvalReport {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        EvalReport {
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            counts,
            experiment_id: None,
        }
    }

    pub fn with_experiment(mut self, id: u32) -> Self {
        self.experiment_id = Some(id);
        self
    }
}

pub fn score_counts(gold: &[Label], predicted: &[Label]) -> Result<ConfusionCounts> {
    if gold.len() != predicted.len() {
        return Err(Error::Evaluation(format!(
            "gold has {} labels but prediction has {}",
            gold.len(),
            predicted.len()
        )));
    }
    let mut counts = ConfusionCounts::default();
    for (&g, &p) in gold.iter().zip(predicted) {
        counts.record(g, p);
    }
    Ok(counts)
}

pub fn score(gold: &[Label], predicted: &[Label]) -> Result<EvalReport> {
    score_counts(gold, predicted).map(EvalReport::from_counts)
}

/// Scores aligned lists of sequences, pooling the counts. Mismatches are
/// reported with the sequence index and, where characters are available,
/// the first differing position.
pub fn score_sequences<G, P>(gold: &[G], predicted: &[P]) -> Result<EvalReport>
where
    G: AsRef<[Label]>,
    P: AsRef<[Label]>,
{
    if gold.len() != predicted.len() {
        return Err(Error::Evaluation(format!(
            "gold has {} sequences but prediction has {}",
            gold.len(),
            predicted.len()
        )));
    }
    let mut counts = ConfusionCounts::default();
    for (k, (g, p)) in gold.iter().zip(predicted).enumerate() {
        let c = score_counts(g.as_ref(), p.as_ref()).map_err(|e| Error::Evaluation(format!("sequence {k}: {e}")))?;
        counts.merge(&c);
    }
    Ok(EvalReport::from_counts(counts))
}

impl AsRef<[Label]> for crate::corpus::LabeledSequence {
    fn as_ref(&self) -> &[Label] {
        self.labels()
    }
}
