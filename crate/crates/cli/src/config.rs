use std::path::Path;

use anyhow::Context;
use retina_core::preprocess::{ChannelMode, EnhanceConfig};
use retina_core::tensor::LossForm;
use retina_core::training::{SamplingMode, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::args::{Arch, ChannelArg, EnhanceFlags, LossArg, SamplingArg, TrainFlags};

/// Settings after layering defaults, the config file and command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub arch: Arch,
    pub classes: usize,
    pub split: Option<f64>,
    pub enhance: EnhanceConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            arch: Arch::Compact,
            classes: 5,
            split: None,
            enhance: EnhanceConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("{}: invalid config", path.display()))
    }

    pub fn apply_enhance(&mut self, f: &EnhanceFlags) {
        if f.desk {
            self.enhance = EnhanceConfig::desk();
        }
        let e = &mut self.enhance;
        if let Some(v) = f.clip_fraction {
            e.clip_fraction = v;
        }
        if let Some(v) = f.tile_grid {
            e.tile_grid = v;
        }
        if let Some(v) = f.median_window {
            e.median_window = v;
        }
        if let Some(v) = f.gaussian_sigma {
            e.gaussian_sigma = v;
        }
        if let Some(v) = f.channel_mode {
            e.channel_mode = match v {
                ChannelArg::PerChannel => ChannelMode::PerChannel,
                ChannelArg::Luminance => ChannelMode::Luminance,
            };
        }
    }

    pub fn apply_train(&mut self, f: &TrainFlags) {
        let t = &mut self.train;
        if let Some(v) = f.lr {
            t.learning_rate = v;
        }
        if let Some(v) = f.weight_decay {
            t.weight_decay = v;
        }
        if let Some(v) = f.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = f.epochs {
            t.epochs = v;
        }
        if let Some(v) = f.sampling {
            t.sampling = match v {
                SamplingArg::Uniform => SamplingMode::Uniform,
                SamplingArg::Informative => SamplingMode::Informative,
            };
        }
        if let Some(v) = f.loss {
            t.loss_form = match v {
                LossArg::BinarySum => LossForm::BinarySum,
                LossArg::Categorical => LossForm::Categorical,
            };
        }
        if f.balanced_batches {
            t.balanced_batches = true;
        }
    }

    pub fn apply_seed(&mut self, seed: Option<u64>) {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.train.seed = self.seed;
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
