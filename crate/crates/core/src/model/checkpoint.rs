use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BiLstmStack, ModelConfig, StackShape};
use crate::binfmt::{read_container, write_container};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"TSEGCKP1";

/// A trained classifier on disk.
///
/// The payload holds the parameter blocks in a fixed order: for each layer
/// from the bottom, forward `W, U, b` then backward `W, U, b`; then the head
/// `W, b`. All matrices are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub stack: BiLstmStack,
    pub loss_curve: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    seed: u64,
    epoch: usize,
    loss_curve: Vec<f64>,
    shape: StackShape,
}

impl Checkpoint {
    pub fn new(config: ModelConfig, stack: BiLstmStack, loss_curve: Vec<f64>) -> Self {
        Checkpoint {
            config,
            stack,
            loss_curve,
        }
    }

    pub fn epochs_completed(&self) -> usize {
        self.loss_curve.len()
    }

    pub fn write_to<W: Write>(&self, out: W) -> std::io::Result<()> {
        let header = Header {
            config: self.config.clone(),
            seed: self.config.seed,
            epoch: self.epochs_completed(),
            loss_curve: self.loss_curve.clone(),
            shape: self.stack.shape(),
        };
        write_container(out, MAGIC, &header, &self.stack.tensors())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let (header, values): (Header, Vec<f64>) = read_container(input, MAGIC, "checkpoint")?;
        if header.shape.layers == 0 {
            return Err(Error::format("checkpoint", "no layers"));
        }
        let mut stack = BiLstmStack::zeros(header.shape);
        stack
            .assign_flat(&values)
            .map_err(|e| Error::format("checkpoint", e.to_string()))?;
        Ok(Checkpoint {
            config: header.config,
            stack,
            loss_curve: header.loss_curve,
        })
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
        Self::read_from(BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_and_layout() {
        let config = ModelConfig {
            num_layers: 2,
            layer_output_dim: 4,
            ..ModelConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let stack = BiLstmStack::init(config.shape(3), &mut rng);
        let ck = Checkpoint::new(config, stack.clone(), vec![0.7, 0.5]);
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        let back = Checkpoint::read_from(&buf[..]).unwrap();
        assert_eq!(back, ck);

        // The payload tail is the head bias, preceded by the head weights.
        let n = buf.len();
        let last = f64::from_le_bytes(buf[n - 8..].try_into().unwrap());
        assert_eq!(last, stack.head_b[1]);
        let first_w = stack.layers[0].forward.w[0];
        let payload_start = n - 8 * stack.param_count();
        assert_eq!(
            f64::from_le_bytes(buf[payload_start..payload_start + 8].try_into().unwrap()),
            first_w
        );
    }

    #[test]
    fn rejects_wrong_payload() {
        let config = ModelConfig {
            num_layers: 1,
            layer_output_dim: 2,
            ..ModelConfig::default()
        };
        let ck = Checkpoint::new(config.clone(), BiLstmStack::zeros(config.shape(2)), vec![]);
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        buf.extend_from_slice(&1.0f64.to_le_bytes());
        assert!(Checkpoint::read_from(&buf[..]).is_err());
    }
}
