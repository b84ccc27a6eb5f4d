use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Corpus, Label, LabeledSequence, RawDocument};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
}

/// `{"name": ..., "documents": [{"id": ..., "path": ...}, ...]}`. Relative
/// paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub name: String,
    pub documents: Vec<ManifestEntry>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Every `*.txt` file in `dir`, one document per file, ordered by file name.
pub fn load_corpus_dir(name: &str, dir: &Path) -> Result<Corpus> {
    if !dir.exists() {
        return Err(Error::MissingPath(dir.to_path_buf()));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|ext| ext == "txt"))
        .collect();
    files.sort();
    let documents = files
        .iter()
        .map(|p| {
            let id = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(RawDocument::new(id, read_text(p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus::new(name, documents))
}

/// Inverse of [`load_corpus_dir`]: one `<id>.txt` per document.
pub fn write_corpus_dir(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for doc in &corpus.documents {
        let path = dir.join(format!("{}.txt", doc.id));
        fs::write(&path, &doc.text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn load_corpus_manifest(path: &Path) -> Result<Corpus> {
    if !path.exists() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    let manifest: CorpusManifest = serde_json::from_str(&read_text(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut seen = std::collections::HashSet::new();
    let mut documents = Vec::with_capacity(manifest.documents.len());
    for entry in &manifest.documents {
        if !seen.insert(entry.id.as_str()) {
            return Err(Error::config(format!(
                "duplicate document id {} in {}",
                entry.id,
                path.display()
            )));
        }
        let doc_path = if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            base.join(&entry.path)
        };
        if !doc_path.exists() {
            return Err(Error::MissingPath(doc_path));
        }
        documents.push(RawDocument::new(entry.id.clone(), read_text(&doc_path)?));
    }
    Ok(Corpus::new(manifest.name, documents))
}

/// Loads a corpus from a directory, a JSON manifest, or a single text file.
/// `name` overrides the manifest's own name when given.
pub fn load_corpus(name: Option<&str>, path: &Path) -> Result<Corpus> {
    if !path.exists() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    let default_name = || {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "corpus".to_string())
    };
    let mut corpus = if path.is_dir() {
        load_corpus_dir(&default_name(), path)?
    } else if path.extension().is_some_and(|e| e == "json") {
        load_corpus_manifest(path)?
    } else {
        Corpus::new(default_name(), vec![RawDocument::new(default_name(), read_text(path)?)])
    };
    if let Some(name) = name {
        corpus.name = name.to_string();
    }
    Ok(corpus)
}

/// Writes `char<TAB>label` lines with a blank line after each sequence.
pub fn write_labeled<W: Write>(mut out: W, sequences: &[LabeledSequence]) -> std::io::Result<()> {
    for seq in sequences {
        for (c, l) in seq.chars().iter().zip(seq.labels()) {
            writeln!(out, "{c}\t{l}")?;
        }
        writeln!(out)?;
    }
    out.flush()
}

/// Parses the labeled format. Sequences get ids `0`, `1`, ... in file order.
pub fn read_labeled<R: BufRead>(input: R) -> Result<Vec<LabeledSequence>> {
    let mut sequences = Vec::new();
    let mut chars = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::format("labeled file", e.to_string()))?;
        if line.is_empty() {
            if !chars.is_empty() {
                let id = sequences.len().to_string();
                sequences.push(LabeledSequence::new(
                    id,
                    std::mem::take(&mut chars),
                    std::mem::take(&mut labels),
                )?);
            }
            continue;
        }
        let bad = || Error::format("labeled file", format!("line {}: {line:?}", lineno + 1));
        let (c, tag) = line.rsplit_once('\t').ok_or_else(bad)?;
        let mut it = c.chars();
        let (Some(c), None) = (it.next(), it.next()) else {
            return Err(bad());
        };
        chars.push(c);
        labels.push(Label::from_tag(tag).ok_or_else(bad)?);
    }
    if !chars.is_empty() {
        let id = sequences.len().to_string();
        sequences.push(LabeledSequence::new(id, chars, labels)?);
    }
    Ok(sequences)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{strip_and_label, LabelConfig};

    #[test]
    fn labeled_format() {
        let cfg = LabelConfig::default();
        let seqs = vec![
            strip_and_label(&RawDocument::new("0", "大唐，故王。"), &cfg),
            strip_and_label(&RawDocument::new("1", "甲乙"), &cfg),
        ];
        let mut buf = Vec::new();
        write_labeled(&mut buf, &seqs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("大\tN\n唐\tB\n故\tN\n王\tB\n\n甲\tN\n"));
        assert_eq!(read_labeled(&buf[..]).unwrap(), seqs);
    }

    #[test]
    fn labeled_format_rejects_garbage() {
        assert!(read_labeled(&b"ab\tN\n"[..]).is_err());
        assert!(read_labeled(&b"a\tX\n"[..]).is_err());
        assert!(read_labeled(&b"a N\n"[..]).is_err());
    }

    #[test]
    fn load_dir_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.txt"), "乙。").unwrap();
        fs::write(dir.path().join("a.txt"), "甲。").unwrap();
        fs::write(dir.path().join("notes.md"), "skip").unwrap();
        let c = load_corpus_dir("X", dir.path()).unwrap();
        let ids: Vec<_> = c.documents.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);

        let manifest = CorpusManifest {
            name: "M".into(),
            documents: vec![
                ManifestEntry {
                    id: "second".into(),
                    path: "b.txt".into(),
                },
                ManifestEntry {
                    id: "first".into(),
                    path: "a.txt".into(),
                },
            ],
        };
        let mpath = dir.path().join("m.json");
        fs::write(&mpath, serde_json::to_string(&manifest).unwrap()).unwrap();
        let c = load_corpus(None, &mpath).unwrap();
        assert_eq!(c.name, "M");
        assert_eq!(c.documents[0].text, "乙。");

        assert!(matches!(
            load_corpus(None, &dir.path().join("nope")),
            Err(Error::MissingPath(_))
        ));
    }
}
