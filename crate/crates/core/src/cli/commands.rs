use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{hex, RunConfig};
use super::Command;
use crate::corpus::{
    compute_stats, label_corpus, load_corpus, read_labeled, split, strip_and_label, write_corpus_dir, write_labeled,
    Corpus, LabelConfig, LabeledSequence, RawDocument, StatsRecord,
};
use crate::embedding::{train_embeddings, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::eval::{
    bundled_manifest, load_manifest, score_sequences, write_matrix_csv, write_matrix_json, CorpusRegistry, EmbedPolicy,
    ExperimentRunner,
};
use crate::model::{train_with_threads, Checkpoint, Segmenter};
use crate::synth::RuleGenerator;

pub(super) fn run(command: &Command, config: &RunConfig) -> Result<i32> {
    match command {
        Command::Stats { corpora } => stats(corpora, config),
        Command::Prepare { corpora } => prepare(corpora, config),
        Command::Embed { corpora, text } => embed(corpora, *text, config),
        Command::Train { embeddings, corpora } => train(embeddings, corpora, config),
        Command::Segment {
            embeddings,
            checkpoint,
            input,
            output,
        } => segment(embeddings, checkpoint, input.as_deref(), output.as_deref(), config),
        Command::Eval {
            gold,
            predicted,
            embeddings,
            checkpoint,
        } => evaluate(
            gold,
            predicted.as_deref(),
            embeddings.as_deref(),
            checkpoint.as_deref(),
            config,
        ),
        Command::Matrix { manifest } => matrix(manifest.as_deref(), config),
        Command::Synth {
            family,
            docs,
            chars,
            dir,
        } => synth(family, *docs, *chars, dir, config),
    }
}

/// Positional corpora win; otherwise the registered ones, in name order.
fn corpora(args: &[String], config: &RunConfig) -> Result<Vec<Corpus>> {
    let named: Vec<(Option<String>, PathBuf)> = if args.is_empty() {
        config
            .corpora
            .iter()
            .map(|(n, p)| (Some(n.clone()), p.clone()))
            .collect()
    } else {
        args.iter()
            .map(|a| match a.split_once('=') {
                Some((n, p)) if !n.is_empty() => (Some(n.to_string()), PathBuf::from(p)),
                _ => (None, PathBuf::from(a)),
            })
            .collect()
    };
    if named.is_empty() {
        return Err(Error::config("no corpora given; pass paths or --corpus NAME=PATH"));
    }
    named.iter().map(|(n, p)| load_corpus(n.as_deref(), p)).collect()
}

struct Portions {
    name: String,
    train: Vec<LabeledSequence>,
    test: Vec<LabeledSequence>,
}

fn split_all(corpora: &[Corpus], config: &RunConfig) -> Result<Vec<Portions>> {
    corpora
        .iter()
        .map(|c| {
            let parts = split(c, &config.split, &config.labels)?;
            for w in &parts.warnings {
                log::warn!("{}: {w}", c.name);
            }
            Ok(Portions {
                name: c.name.clone(),
                train: label_corpus(&parts.train, &config.labels),
                test: label_corpus(&parts.test, &config.labels),
            })
        })
        .collect()
}

#[derive(Serialize)]
struct Seeds {
    split: u64,
    embedding: u64,
    model: u64,
}

/// Written next to each command's artifacts. Carries no timestamps so
/// repeated seeded runs produce identical bytes.
#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_hash: String,
    seeds: Seeds,
    config: &'a RunConfig,
    artifacts: BTreeMap<String, String>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(bytes)))
}

fn out_dir(config: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&config.out).map_err(|e| Error::io(&config.out, e))?;
    Ok(&config.out)
}

fn write_manifest(command: &'static str, config: &RunConfig, artifacts: &[PathBuf]) -> Result<()> {
    let mut hashes = BTreeMap::new();
    for a in artifacts {
        let rel = a.strip_prefix(&config.out).unwrap_or(a);
        hashes.insert(rel.to_string_lossy().replace('\\', "/"), sha256_file(a)?);
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_hash: config.hash(),
        seeds: Seeds {
            split: config.split.seed,
            embedding: config.embedding.seed,
            model: config.model.seed,
        },
        config,
        artifacts: hashes,
    };
    let path = config.out.join(format!("{command}.manifest.json"));
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn stats(args: &[String], config: &RunConfig) -> Result<i32> {
    let mut stdout = std::io::stdout().lock();
    for corpus in corpora(args, config)? {
        let s = compute_stats(&corpus, &config.labels);
        if s.noc == 0 {
            eprintln!("warning: corpus {} has no content characters", corpus.name);
        }
        let line = serde_json::to_string(&StatsRecord::new(corpus.name.clone(), s))?;
        writeln!(stdout, "{line}").map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(0)
}

fn prepare(args: &[String], config: &RunConfig) -> Result<i32> {
    let portions = split_all(&corpora(args, config)?, config)?;
    let base = out_dir(config)?.join("prepared");
    let mut artifacts = Vec::new();
    for p in &portions {
        let dir = base.join(&p.name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (file, seqs) in [("train.tsv", &p.train), ("test.tsv", &p.test)] {
            let path = dir.join(file);
            let mut w = create(&path)?;
            write_labeled(&mut w, seqs)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(&path, e))?;
            artifacts.push(path);
        }
        log::info!(
            "{}: {} training and {} test sequences",
            p.name,
            p.train.len(),
            p.test.len()
        );
    }
    write_manifest("prepare", config, &artifacts)?;
    Ok(0)
}

fn embed(args: &[String], text: bool, config: &RunConfig) -> Result<i32> {
    let portions = split_all(&corpora(args, config)?, config)?;
    let mut data: Vec<LabeledSequence> = Vec::new();
    for p in portions {
        data.extend(p.train);
        if config.embed_policy == EmbedPolicy::FullCorpora {
            data.extend(p.test);
        }
    }
    let matrix = train_embeddings(&data, &config.embedding)?;
    let out = out_dir(config)?;
    let path = out.join("embeddings.bin");
    matrix.save(&path)?;
    let mut artifacts = vec![path];
    if text {
        let path = out.join("embeddings.txt");
        let mut w = create(&path)?;
        matrix
            .export_text(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&path, e))?;
        artifacts.push(path);
    }
    write_manifest("embed", config, &artifacts)?;
    Ok(0)
}

fn train(embeddings: &Path, args: &[String], config: &RunConfig) -> Result<i32> {
    let matrix = EmbeddingMatrix::load(embeddings)?;
    let portions = split_all(&corpora(args, config)?, config)?;
    let data: Vec<LabeledSequence> = portions.into_iter().flat_map(|p| p.train).collect();
    if data.iter().all(|s| s.is_empty()) {
        return Err(Error::config("no classifier training data after the split"));
    }
    let outcome = train_with_threads(&data, &matrix, &config.model, config.threads)?;
    let path = out_dir(config)?.join("model.ckpt");
    Checkpoint::new(config.model.clone(), outcome.stack, outcome.loss_curve).save(&path)?;
    write_manifest("train", config, &[path])?;
    Ok(0)
}

fn read_input(input: Option<&Path>) -> Result<String> {
    let mut text = String::new();
    match input {
        Some(p) => {
            if !p.exists() {
                return Err(Error::MissingPath(p.to_path_buf()));
            }
            BufReader::new(fs::File::open(p).map_err(|e| Error::io(p, e))?)
                .read_to_string(&mut text)
                .map_err(|e| Error::io(p, e))?;
        }
        None => {
            std::io::stdin()
                .read_to_string(&mut text)
                .map_err(|e| Error::io("<stdin>", e))?;
        }
    }
    Ok(text)
}

fn load_segmenter(embeddings: &Path, checkpoint: &Path) -> Result<Segmenter> {
    Segmenter::new(EmbeddingMatrix::load(embeddings)?, Checkpoint::load(checkpoint)?)
}

fn segment(
    embeddings: &Path,
    checkpoint: &Path,
    input: Option<&Path>,
    output: Option<&Path>,
    config: &RunConfig,
) -> Result<i32> {
    let segmenter = load_segmenter(embeddings, checkpoint)?;
    let text = read_input(input)?;
    let result = segmenter.segment_text(&text, &config.labels)?;
    match output {
        Some(p) => fs::write(p, result).map_err(|e| Error::io(p, e))?,
        None => std::io::stdout()
            .write_all(result.as_bytes())
            .map_err(|e| Error::io("<stdout>", e))?,
    }
    Ok(0)
}

/// A `.tsv` file in the labeled format, or punctuated text with one
/// sequence per line.
fn read_sequences(path: &Path, labels: &LabelConfig) -> Result<Vec<LabeledSequence>> {
    if !path.exists() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    if path.extension().is_some_and(|e| e == "tsv") {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        return read_labeled(BufReader::new(f));
    }
    let text = read_input(Some(path))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(k, line)| strip_and_label(&RawDocument::new(k.to_string(), line), labels))
        .collect())
}

/// Checks that both sides label the same characters, naming the first place
/// they diverge.
fn check_alignment(gold: &[LabeledSequence], predicted: &[LabeledSequence]) -> Result<()> {
    if gold.len() != predicted.len() {
        return Err(Error::Evaluation(format!(
            "gold has {} sequences but prediction has {}",
            gold.len(),
            predicted.len()
        )));
    }
    for (k, (g, p)) in gold.iter().zip(predicted).enumerate() {
        if let Some(pos) = g.chars().iter().zip(p.chars()).position(|(a, b)| a != b) {
            return Err(Error::Evaluation(format!(
                "sequence {k}, character {pos}: gold has {:?} but prediction has {:?}",
                g.chars()[pos],
                p.chars()[pos]
            )));
        }
        if g.len() != p.len() {
            return Err(Error::Evaluation(format!(
                "sequence {k}: gold has {} characters but prediction has {}; first missing position {}",
                g.len(),
                p.len(),
                g.len().min(p.len())
            )));
        }
    }
    Ok(())
}

fn evaluate(
    gold: &Path,
    predicted: Option<&Path>,
    embeddings: Option<&Path>,
    checkpoint: Option<&Path>,
    config: &RunConfig,
) -> Result<i32> {
    let gold = read_sequences(gold, &config.labels)?;
    let predicted = match (predicted, embeddings, checkpoint) {
        (Some(p), _, _) => read_sequences(p, &config.labels)?,
        (None, Some(e), Some(c)) => {
            let segmenter = load_segmenter(e, c)?;
            gold.iter()
                .map(|g| LabeledSequence::new(g.id.clone(), g.chars().to_vec(), segmenter.predict(g.chars())?))
                .collect::<Result<_>>()?
        }
        _ => {
            return Err(Error::config(
                "eval needs a prediction file or both --embeddings and --checkpoint",
            ))
        }
    };
    check_alignment(&gold, &predicted)?;
    let report = score_sequences(&gold, &predicted)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(0)
}

fn matrix(manifest: Option<&Path>, config: &RunConfig) -> Result<i32> {
    let specs = match manifest {
        Some(p) => load_manifest(p)?,
        None => bundled_manifest(),
    };
    if config.corpora.is_empty() {
        return Err(Error::config("matrix needs corpora registered with --corpus NAME=PATH"));
    }
    let registry: CorpusRegistry = config
        .corpora
        .iter()
        .map(|(n, p)| load_corpus(Some(n), p))
        .collect::<Result<_>>()?;
    for spec in &specs {
        spec.validate(&registry)?;
    }
    let mut result = ExperimentRunner::new(&registry, config.pipeline())
        .with_threads(config.threads)
        .run_matrix(&specs)?;
    // Reproducible-build convention: pin the clock when asked to.
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|s| chrono::DateTime::from_timestamp(s, 0))
    {
        result.provenance.started_at = t.to_rfc3339();
        result.provenance.finished_at = t.to_rfc3339();
    }

    let out = out_dir(config)?;
    let csv = out.join("matrix.csv");
    let mut w = create(&csv)?;
    write_matrix_csv(&mut w, &result)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&csv, e))?;
    let json = out.join("matrix.json");
    let mut w = create(&json)?;
    write_matrix_json(&mut w, &result)?;
    w.flush().map_err(|e| Error::io(&json, e))?;
    write_manifest("matrix", config, &[csv, json])?;

    let mut failed = 0;
    for row in &result.rows {
        match (&row.report, &row.error) {
            (Some(r), _) => log::info!("experiment {}: F1 {:.4}", row.spec.id, r.f1),
            (None, Some(e)) => {
                failed += 1;
                eprintln!("experiment {} failed: {e}", row.spec.id);
            }
            _ => {}
        }
    }
    Ok(if failed > 0 { 1 } else { 0 })
}

fn synth(family: &str, docs: usize, chars: usize, dir: &Path, config: &RunConfig) -> Result<i32> {
    let generator = match family {
        "b" => RuleGenerator::family_b(),
        _ => RuleGenerator::family_a(),
    };
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| family.to_uppercase());
    let seed = config.seed.unwrap_or(config.split.seed);
    write_corpus_dir(&generator.generate(&name, docs, chars, seed), dir)?;
    Ok(0)
}
