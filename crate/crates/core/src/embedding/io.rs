use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::vocab::VocabRecord;
use super::{EmbeddingConfig, EmbeddingMatrix, Vocab};
use crate::binfmt::{read_container, write_container};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"TSEGEMB1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dim: usize,
    vocab: VocabRecord,
    config: EmbeddingConfig,
    seed: u64,
    epoch_losses: Vec<f64>,
}

impl EmbeddingMatrix {
    /// Binary form: JSON header, then input vectors and output vectors as
    /// row-major little-endian `f64`.
    pub fn write_to<W: Write>(&self, out: W) -> std::io::Result<()> {
        let header = Header {
            dim: self.dim,
            vocab: self.vocab.to_record(),
            config: self.config.clone(),
            seed: self.config.seed,
            epoch_losses: self.epoch_losses.clone(),
        };
        write_container(out, MAGIC, &header, &[&self.input, &self.output])
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let (header, values): (Header, Vec<f64>) = read_container(input, MAGIC, "embedding file")?;
        let vocab = Vocab::from_record(header.vocab)
            .ok_or_else(|| Error::format("embedding file", "inconsistent vocabulary"))?;
        let n = vocab.len() * header.dim;
        if values.len() != 2 * n {
            return Err(Error::format(
                "embedding file",
                format!("expected {} values, found {}", 2 * n, values.len()),
            ));
        }
        let mut values = values;
        let output = values.split_off(n);
        let mut m = EmbeddingMatrix::from_parts(vocab, header.dim, values, output)?;
        m.config = header.config;
        m.epoch_losses = header.epoch_losses;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingPath(path.to_path_buf()));
        }
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }

    /// word2vec plain-text format: `|V| dim` then `char v1 v2 ...` per row.
    pub fn export_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.vocab.len(), self.dim)?;
        for (id, &c) in self.vocab.chars().iter().enumerate() {
            write!(out, "{c}")?;
            for v in self.input_row(id as u32) {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    }
}
