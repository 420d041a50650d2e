use serde::{Deserialize, Serialize};

use super::NeuralError;

/// Placement of identity skip connections among the hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipPattern {
    /// Hidden layers (1,2), (3,4), ... form residual blocks; an odd last
    /// hidden layer stays plain.
    ConsecutivePairs,
    /// No skip connections.
    Plain,
}

impl SkipPattern {
    pub(crate) fn tag(self) -> u8 {
        match self {
            SkipPattern::ConsecutivePairs => 1,
            SkipPattern::Plain => 0,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(SkipPattern::ConsecutivePairs),
            0 => Some(SkipPattern::Plain),
            _ => None,
        }
    }
}

/// Input layer, `n_hidden` width-preserving hidden layers, linear output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelArch {
    pub input_dim: usize,
    pub hidden_width: usize,
    pub n_hidden: usize,
    pub skip_pattern: SkipPattern,
    pub output_dim: usize,
}

impl ModelArch {
    pub const DEFAULT_WIDTH: usize = 120;
    pub const DEFAULT_HIDDEN: usize = 7;

    pub fn new(input_dim: usize, hidden_width: usize, n_hidden: usize, output_dim: usize) -> Self {
        Self { input_dim, hidden_width, n_hidden, skip_pattern: SkipPattern::ConsecutivePairs, output_dim }
    }

    /// Signals → position regressor with the default residual body.
    pub fn locator(n_bs: usize) -> Self {
        Self::new(n_bs, Self::DEFAULT_WIDTH, Self::DEFAULT_HIDDEN, 2)
    }

    /// Position → signals regressor with the default residual body.
    pub fn signal_model(n_bs: usize) -> Self {
        Self::new(2, Self::DEFAULT_WIDTH, Self::DEFAULT_HIDDEN, n_bs)
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.input_dim == 0 || self.hidden_width == 0 || self.output_dim == 0 {
            return Err(NeuralError::InvalidArch(format!("all dimensions must be >= 1: {self:?}")));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every dense layer in order.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let w = self.hidden_width;
        std::iter::once((self.input_dim, w))
            .chain(std::iter::repeat_n((w, w), self.n_hidden))
            .chain(std::iter::once((w, self.output_dim)))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_counts() {
        assert_eq!(ModelArch::locator(18).param_count(), 104_162);
        assert_eq!(ModelArch::signal_model(18).param_count(), 104_178);
    }

    proptest! {
        #[test]
        fn closed_form_count(i in 1usize..50, w in 1usize..200, h in 0usize..10, o in 1usize..50) {
            let arch = ModelArch::new(i, w, h, o);
            prop_assert_eq!(arch.param_count(), i * w + w + h * (w * w + w) + w * o + o);
        }
    }
}
