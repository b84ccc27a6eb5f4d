//! Punctuated source text, boundary labels, corpus statistics and splits.
//!
//! Source documents carry the punctuation that typists added. Stripping the
//! punctuation yields the bare character stream the segmenter sees, and the
//! positions of the removed marks become the supervision signal: a character
//! is a boundary when a delimiter follows it.

mod io;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, AddAssign};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    load_corpus, load_corpus_dir, load_corpus_manifest, read_labeled, write_corpus_dir, write_labeled, CorpusManifest,
    ManifestEntry,
};

/// Default delimiter marks. Every one of them counts toward NOP.
pub const DEFAULT_DELIMITERS: &[char] = &['。', '，', '、', '；', '：', '？', '！'];

/// Marks that end a sentence proper, used when boundaries are restricted to
/// sentence-final punctuation.
pub const DEFAULT_SENTENCE_FINAL: &[char] = &['。', '？', '！'];

/// Quotes and brackets are dropped without marking a boundary, so a quote
/// closing after a full stop does not produce a second one.
pub const DEFAULT_IGNORABLE: &[char] = &['「', '」', '『', '』', '（', '）'];

/// The single delimiter inserted when re-punctuating predicted boundaries.
pub const CANONICAL_DELIMITER: char = '。';

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct RawDocument {
    pub id: String,
    pub text: String,
}

impl RawDocument {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        RawDocument {
            id: id.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub documents: Vec<RawDocument>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, documents: Vec<RawDocument>) -> Self {
        Corpus {
            name: name.into(),
            documents,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CharClass {
    Content,
    Delimiter,
    Ignorable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    NonBoundary,
    Boundary,
}

impl Label {
    /// Class index used by the classifier head.
    pub fn index(self) -> usize {
        match self {
            Label::NonBoundary => 0,
            Label::Boundary => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::NonBoundary),
            1 => Some(Label::Boundary),
            _ => None,
        }
    }

    pub fn is_boundary(self) -> bool {
        self == Label::Boundary
    }

    /// Tag used in the labeled text format.
    pub fn tag(self) -> &'static str {
        match self {
            Label::NonBoundary => "N",
            Label::Boundary => "B",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Label> {
        match tag {
            "N" => Some(Label::NonBoundary),
            "B" => Some(Label::Boundary),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Every delimiter, commas included, induces a boundary.
    #[default]
    AllDelimiters,
    /// Only marks in the sentence-final set induce a boundary.
    SentenceFinal,
}

/// Character classification and boundary policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelConfig {
    pub delimiters: BTreeSet<char>,
    pub ignorable: BTreeSet<char>,
    /// Treat every Unicode whitespace character as ignorable.
    pub ignore_whitespace: bool,
    pub sentence_final: BTreeSet<char>,
    pub boundary_mode: BoundaryMode,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            delimiters: DEFAULT_DELIMITERS.iter().copied().collect(),
            ignorable: DEFAULT_IGNORABLE.iter().copied().collect(),
            ignore_whitespace: true,
            sentence_final: DEFAULT_SENTENCE_FINAL.iter().copied().collect(),
            boundary_mode: BoundaryMode::AllDelimiters,
        }
    }
}

impl LabelConfig {
    pub fn with_delimiters(mut self, extra: impl IntoIterator<Item = char>) -> Self {
        self.delimiters.extend(extra);
        self
    }

    pub fn with_ignorable(mut self, extra: impl IntoIterator<Item = char>) -> Self {
        self.ignorable.extend(extra);
        self
    }

    /// Whether a delimiter occurrence of `c` marks the preceding character.
    fn induces_boundary(&self, c: char) -> bool {
        match self.boundary_mode {
            BoundaryMode::AllDelimiters => true,
            BoundaryMode::SentenceFinal => self.sentence_final.contains(&c),
        }
    }
}

/// Delimiter membership wins over ignorable membership.
pub fn classify_char(c: char, config: &LabelConfig) -> CharClass {
    if config.delimiters.contains(&c) {
        CharClass::Delimiter
    } else if config.ignorable.contains(&c) || (config.ignore_whitespace && c.is_whitespace()) {
        CharClass::Ignorable
    } else {
        CharClass::Content
    }
}

/// Punctuation-free characters with one label each.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSequence {
    pub id: String,
    chars: Vec<char>,
    labels: Vec<Label>,
}

impl LabeledSequence {
    pub fn new(id: impl Into<String>, chars: Vec<char>, labels: Vec<Label>) -> Result<Self> {
        if chars.len() != labels.len() {
            return Err(Error::config(format!(
                "{} characters but {} labels",
                chars.len(),
                labels.len()
            )));
        }
        Ok(LabeledSequence {
            id: id.into(),
            chars,
            labels,
        })
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn boundary_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_boundary()).count()
    }

    /// Text with [`CANONICAL_DELIMITER`] after every boundary character.
    pub fn punctuate(&self) -> String {
        punctuate(&self.chars, &self.labels)
    }
}

/// Inserts [`CANONICAL_DELIMITER`] after each character labeled boundary.
pub fn punctuate(chars: &[char], labels: &[Label]) -> String {
    let mut out = String::with_capacity(chars.len() * 4);
    for (&c, &l) in chars.iter().zip(labels) {
        out.push(c);
        if l.is_boundary() {
            out.push(CANONICAL_DELIMITER);
        }
    }
    out
}

/// Removes punctuation and whitespace, marking each character followed by a
/// boundary-inducing delimiter. Runs of delimiters collapse into a single
/// boundary and delimiters before the first character are dropped.
pub fn strip_and_label(doc: &RawDocument, config: &LabelConfig) -> LabeledSequence {
    let mut chars = Vec::with_capacity(doc.text.len() / 3);
    let mut labels = Vec::with_capacity(doc.text.len() / 3);
    for c in doc.text.chars() {
        match classify_char(c, config) {
            CharClass::Content => {
                chars.push(c);
                labels.push(Label::NonBoundary);
            }
            CharClass::Delimiter => {
                if config.induces_boundary(c) {
                    if let Some(last) = labels.last_mut() {
                        *last = Label::Boundary;
                    }
                }
            }
            CharClass::Ignorable => {}
        }
    }
    LabeledSequence {
        id: doc.id.clone(),
        chars,
        labels,
    }
}

pub fn label_corpus(corpus: &Corpus, config: &LabelConfig) -> Vec<LabeledSequence> {
    corpus.documents.iter().map(|d| strip_and_label(d, config)).collect()
}

/// Character and punctuation counts. The ratio is always derived.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub noc: u64,
    pub nop: u64,
}

impl CorpusStats {
    pub fn new(noc: u64, nop: u64) -> Self {
        CorpusStats { noc, nop }
    }

    /// NOP/NOC, or `None` when there are no content characters.
    pub fn ratio(&self) -> Option<f64> {
        (self.noc > 0).then(|| self.nop as f64 / self.noc as f64)
    }

    /// The ratio rounded to four decimal places.
    pub fn ratio_rounded(&self) -> Option<f64> {
        self.ratio().map(|r| (r * 1e4).round() / 1e4)
    }

    pub fn of_document(doc: &RawDocument, config: &LabelConfig) -> Self {
        let mut stats = CorpusStats::default();
        for c in doc.text.chars() {
            match classify_char(c, config) {
                CharClass::Content => stats.noc += 1,
                CharClass::Delimiter => stats.nop += 1,
                CharClass::Ignorable => {}
            }
        }
        stats
    }
}

impl Add for CorpusStats {
    type Output = CorpusStats;

    fn add(self, rhs: Self) -> Self {
        CorpusStats {
            noc: self.noc + rhs.noc,
            nop: self.nop + rhs.nop,
        }
    }
}

impl AddAssign for CorpusStats {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for CorpusStats {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(CorpusStats::default(), Add::add)
    }
}

pub fn compute_stats(corpus: &Corpus, config: &LabelConfig) -> CorpusStats {
    corpus
        .documents
        .iter()
        .map(|d| CorpusStats::of_document(d, config))
        .sum()
}

/// Serialized form of a corpus's statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub name: String,
    pub noc: u64,
    pub nop: u64,
    /// Four decimal places; `null` for an empty corpus.
    pub ratio: Option<f64>,
}

impl StatsRecord {
    pub fn new(name: impl Into<String>, stats: CorpusStats) -> Self {
        StatsRecord {
            name: name.into(),
            noc: stats.noc,
            nop: stats.nop,
            ratio: stats.ratio_rounded(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplitUnit {
    /// Whole documents.
    #[default]
    Document,
    /// Sentences: documents are first cut after each sentence-final mark.
    Sequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub unit: SplitUnit,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            seed: 0,
            unit: SplitUnit::Document,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }

    /// Number of training units out of `n`: floor(fraction × n).
    pub fn train_count(&self, n: usize) -> usize {
        // Slack absorbs representation error such as 0.7 * 30 = 20.999...
        ((self.train_fraction * n as f64) + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Corpus,
    pub test: Corpus,
    /// Share of content characters that went to the training side.
    pub train_char_share: Option<f64>,
    pub warnings: Vec<String>,
}

/// Cuts a document into units ending after each sentence-final delimiter run.
fn sentence_units(doc: &RawDocument, config: &LabelConfig) -> Vec<RawDocument> {
    let mut units = Vec::new();
    let mut current = String::new();
    let mut after_final = false;
    for c in doc.text.chars() {
        let class = classify_char(c, config);
        if after_final && class == CharClass::Content {
            units.push(std::mem::take(&mut current));
            after_final = false;
        }
        if class == CharClass::Delimiter && config.sentence_final.contains(&c) {
            after_final = true;
        }
        current.push(c);
    }
    if !current.is_empty() {
        units.push(current);
    }
    units
        .into_iter()
        .enumerate()
        .map(|(k, text)| RawDocument::new(format!("{}#{}", doc.id, k), text))
        .collect()
}

/// Seeded partition of a corpus into training and test portions.
///
/// Units are shuffled with the seed, the first floor(fraction × N) go to
/// training, and both sides are restored to original order.
pub fn split(corpus: &Corpus, spec: &SplitSpec, config: &LabelConfig) -> Result<Split> {
    spec.validate()?;
    if corpus.is_empty() {
        return Err(Error::config(format!("cannot split empty corpus {}", corpus.name)));
    }
    let units: Vec<RawDocument> = match spec.unit {
        SplitUnit::Document => corpus.documents.clone(),
        SplitUnit::Sequence => corpus
            .documents
            .iter()
            .flat_map(|d| sentence_units(d, config))
            .collect(),
    };
    let n = units.len();
    let k = spec.train_count(n);

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let mut in_train = vec![false; n];
    for &i in &order[..k] {
        in_train[i] = true;
    }

    let mut train = Vec::with_capacity(k);
    let mut test = Vec::with_capacity(n - k);
    for (doc, is_train) in units.into_iter().zip(in_train) {
        if is_train {
            train.push(doc);
        } else {
            test.push(doc);
        }
    }
    let train = Corpus::new(corpus.name.clone(), train);
    let test = Corpus::new(corpus.name.clone(), test);

    let train_chars = compute_stats(&train, config).noc;
    let test_chars = compute_stats(&test, config).noc;
    let total = train_chars + test_chars;
    let train_char_share = (total > 0).then(|| train_chars as f64 / total as f64);

    let mut warnings = Vec::new();
    if k == 0 {
        warnings.push(format!(
            "corpus {}: {} unit(s) at fraction {} leaves the training portion empty",
            corpus.name, n, spec.train_fraction
        ));
    }
    if let Some(share) = train_char_share {
        log::info!(
            "corpus {}: {} of {} units to train, {:.4} of characters",
            corpus.name,
            k,
            n,
            share
        );
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Split {
        train,
        test,
        train_char_share,
        warnings,
    })
}
