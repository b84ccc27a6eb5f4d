use serde::{Deserialize, Serialize};

use super::params::StackShape;
use crate::error::{Error, Result};

/// Which top-layer state the dense head reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HeadInput {
    /// Both directions' hidden states at the target position.
    #[default]
    TargetPosition,
    /// Final state of each direction: forward at the last step, backward at
    /// the first.
    LastStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub num_layers: usize,
    /// Width of each layer's concatenated bidirectional output.
    pub layer_output_dim: usize,
    pub context_len: usize,
    /// Characters before the target inside the window.
    pub context_offset: usize,
    pub num_classes: usize,
    pub head_input: HeadInput,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            num_layers: 5,
            layer_output_dim: 400,
            context_len: 6,
            context_offset: 2,
            num_classes: 2,
            head_input: HeadInput::TargetPosition,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            epochs: 10,
            seed: 1,
        }
    }
}

impl ModelConfig {
    pub fn hidden(&self) -> usize {
        self.layer_output_dim / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::config("num_layers must be at least 1"));
        }
        if self.layer_output_dim == 0 || !self.layer_output_dim.is_multiple_of(2) {
            return Err(Error::config(format!(
                "layer_output_dim must be a positive even number, got {}",
                self.layer_output_dim
            )));
        }
        if self.context_len == 0 || self.context_offset >= self.context_len {
            return Err(Error::config(format!(
                "context_offset {} must be below context_len {}",
                self.context_offset, self.context_len
            )));
        }
        if self.num_classes != 2 {
            return Err(Error::config("the boundary classifier has exactly two classes"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("Adam betas must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn shape(&self, input_dim: usize) -> StackShape {
        StackShape {
            input_dim,
            hidden: self.hidden(),
            layers: self.num_layers,
            classes: self.num_classes,
        }
    }
}
