use serde::{Deserialize, Serialize};

use super::EmbedError;

/// Architecture of the set-pooled embedder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Output channels of the three convolution stages.
    pub conv_channels: [usize; 3],
    /// Horizontal pyramid scales, strictly ascending.
    pub pyramid_scales: Vec<usize>,
    /// Output dimension of every strip projection.
    pub strip_dim: usize,
    /// 1 = frame-level pipeline only; 2 adds the set-level global pipeline.
    pub branches: usize,
    pub leaky_slope: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ModelConfig {
    /// 7 strips × 32 dims; trains in minutes on a laptop core.
    pub fn desk() -> Self {
        Self {
            conv_channels: [8, 16, 32],
            pyramid_scales: vec![1, 2, 4],
            strip_dim: 32,
            branches: 1,
            leaky_slope: 0.1,
            seed: 0,
        }
    }

    /// 62 strips × 256 dims.
    pub fn paper_scale() -> Self {
        Self {
            conv_channels: [32, 64, 128],
            pyramid_scales: vec![1, 2, 4, 8, 16],
            strip_dim: 256,
            branches: 2,
            leaky_slope: 0.1,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        let bad = |msg: &str| Err(EmbedError::InvalidConfig(msg.to_string()));
        if self.conv_channels.contains(&0) {
            return bad("conv channels must be positive");
        }
        if self.pyramid_scales.is_empty() {
            return bad("pyramid scales must be non-empty");
        }
        if self.pyramid_scales.contains(&0) {
            return bad("pyramid scales must be positive");
        }
        if self.pyramid_scales.windows(2).any(|w| w[0] >= w[1]) {
            return bad("pyramid scales must be strictly ascending");
        }
        if self.strip_dim == 0 {
            return bad("strip_dim must be positive");
        }
        if !(1..=2).contains(&self.branches) {
            return bad("branches must be 1 or 2");
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope >= 0.0) {
            return bad("leaky_slope must be finite and non-negative");
        }
        Ok(())
    }

    pub fn strips_per_branch(&self) -> usize {
        self.pyramid_scales.iter().sum()
    }

    pub fn strip_count(&self) -> usize {
        self.branches * self.strips_per_branch()
    }

    pub fn embedding_len(&self) -> usize {
        self.strip_count() * self.strip_dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strip_counts() {
        assert_eq!(ModelConfig::desk().strip_count(), 7);
        assert_eq!(ModelConfig::desk().embedding_len(), 224);
        assert_eq!(ModelConfig::paper_scale().strip_count(), 62);
        assert_eq!(ModelConfig::paper_scale().embedding_len(), 62 * 256);
    }

    #[test]
    fn rejects_invalid() {
        let mut c = ModelConfig::desk();
        c.pyramid_scales.clear();
        assert!(c.validate().is_err());
        let mut c = ModelConfig::desk();
        c.conv_channels[1] = 0;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::desk();
        c.branches = 3;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::desk();
        c.pyramid_scales = vec![2, 1];
        assert!(c.validate().is_err());
        assert!(ModelConfig::paper_scale().validate().is_ok());
    }
}
