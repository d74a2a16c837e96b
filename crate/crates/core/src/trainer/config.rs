//! Human-readable `key = value` run configuration.
//!
//! ```text
//! # desk run
//! iterations = 300
//! learning_rate = 1e-3
//! p = 4
//! k = 4
//! c = 8
//! conv_channels = 8, 16, 32
//! pyramid_scales = 1, 2, 4
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.

use std::str::FromStr;

use super::{Averaging, BatchSpec, LossConfig, TrainConfig, TrainError};
use crate::embedder::ModelConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunFile {
    pub model: ModelConfig,
    pub batch: BatchSpec,
    pub loss: LossConfig,
    pub train: TrainConfig,
}

impl Default for RunFile {
    fn default() -> Self {
        Self {
            model: ModelConfig::desk(),
            batch: BatchSpec::default(),
            loss: LossConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

fn parse<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, TrainError> {
    v.parse().map_err(|_| TrainError::ConfigLine {
        line,
        reason: format!("{key}: cannot parse {v:?}"),
    })
}

fn parse_list(line: usize, key: &str, v: &str) -> Result<Vec<usize>, TrainError> {
    v.split(',').map(|p| parse(line, key, p.trim())).collect()
}

impl RunFile {
    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), TrainError> {
        self.set_at(0, key, value)
    }

    fn set_at(&mut self, line: usize, key: &str, v: &str) -> Result<(), TrainError> {
        match key {
            "seed" => {
                let s: u64 = parse(line, key, v)?;
                self.model.seed = s;
                self.batch.seed = s;
            }
            "model_seed" => self.model.seed = parse(line, key, v)?,
            "batch_seed" => self.batch.seed = parse(line, key, v)?,
            "conv_channels" => {
                let c = parse_list(line, key, v)?;
                self.model.conv_channels = c.try_into().map_err(|_| TrainError::ConfigLine {
                    line,
                    reason: "conv_channels needs exactly 3 values".into(),
                })?;
            }
            "pyramid_scales" => self.model.pyramid_scales = parse_list(line, key, v)?,
            "strip_dim" => self.model.strip_dim = parse(line, key, v)?,
            "branches" => self.model.branches = parse(line, key, v)?,
            "leaky_slope" => self.model.leaky_slope = parse(line, key, v)?,
            "p" => self.batch.p = parse(line, key, v)?,
            "k" => self.batch.k = parse(line, key, v)?,
            "c" => self.batch.c = parse(line, key, v)?,
            "flip_prob" => self.batch.flip_prob = parse(line, key, v)?,
            "margin" => self.loss.margin = parse(line, key, v)?,
            "averaging" => {
                self.loss.averaging = match v {
                    "all" | "all-triplets" => Averaging::AllTriplets,
                    "nonzero" | "nonzero-only" => Averaging::NonzeroOnly,
                    _ => {
                        return Err(TrainError::ConfigLine {
                            line,
                            reason: format!("averaging: expected all|nonzero, got {v:?}"),
                        })
                    }
                }
            }
            "learning_rate" | "lr" => self.train.learning_rate = parse(line, key, v)?,
            "iterations" => self.train.iterations = parse(line, key, v)?,
            "beta1" => self.train.beta1 = parse(line, key, v)?,
            "beta2" => self.train.beta2 = parse(line, key, v)?,
            "epsilon" => self.train.epsilon = parse(line, key, v)?,
            "checkpoint_every" => self.train.checkpoint_every = parse(line, key, v)?,
            "preset" => match v {
                "desk" => self.model = ModelConfig::desk().with_seed(self.model.seed),
                "paper" => {
                    self.model = ModelConfig::paper_scale().with_seed(self.model.seed);
                    self.train.checkpoint_every = 1000;
                }
                _ => {
                    return Err(TrainError::ConfigLine {
                        line,
                        reason: format!("preset: expected desk|paper, got {v:?}"),
                    })
                }
            },
            _ => {
                return Err(TrainError::ConfigLine {
                    line,
                    reason: format!("unknown key {key:?}"),
                })
            }
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self, TrainError> {
        let mut cfg = RunFile::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content.split_once('=').ok_or_else(|| TrainError::ConfigLine {
                line,
                reason: "expected key = value".into(),
            })?;
            cfg.set_at(line, k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.model.validate()?;
        self.batch.validate()?;
        self.train.validate()?;
        if !(self.loss.margin >= 0.0) {
            return Err(TrainError::InvalidConfig("margin must be non-negative".into()));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let m = &self.model;
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        format!(
            "model_seed = {}\nbatch_seed = {}\nconv_channels = {}\npyramid_scales = {}\nstrip_dim = {}\n\
             branches = {}\nleaky_slope = {}\np = {}\nk = {}\nc = {}\nflip_prob = {}\nmargin = {}\n\
             averaging = {}\nlearning_rate = {}\niterations = {}\nbeta1 = {}\nbeta2 = {}\nepsilon = {}\n\
             checkpoint_every = {}\n",
            m.seed,
            self.batch.seed,
            join(&m.conv_channels),
            join(&m.pyramid_scales),
            m.strip_dim,
            m.branches,
            m.leaky_slope,
            self.batch.p,
            self.batch.k,
            self.batch.c,
            self.batch.flip_prob,
            self.loss.margin,
            match self.loss.averaging {
                Averaging::AllTriplets => "all",
                Averaging::NonzeroOnly => "nonzero",
            },
            self.train.learning_rate,
            self.train.iterations,
            self.train.beta1,
            self.train.beta2,
            self.train.epsilon,
            self.train.checkpoint_every,
        )
    }
}
