//! Named experiment scales bundling every module's settings.

use serde::{Deserialize, Serialize};

use crate::audio::{SpectrogramConfig, CANONICAL_LENGTH};
use crate::classifier::ClassifierTrainConfig;
use crate::generator::{GanTrainConfig, GeneratorArch};
use crate::inversion::{ClipMode, InverterTrainConfig};
use crate::lbfgs::LbfgsConfig;
use crate::resnet::ResNetArch;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Toy,
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub scale: Scale,
    pub clip_length: usize,
    pub spectrogram: SpectrogramConfig,
    pub generator: GeneratorArch,
    pub gan: GanTrainConfig,
    pub classifier_arch: ResNetArch,
    pub classifier: ClassifierTrainConfig,
    pub inverter_arch: ResNetArch,
    pub inverter: InverterTrainConfig,
    pub gd_steps: usize,
    pub hybrid_steps: usize,
    pub lbfgs: LbfgsConfig,
    pub clip: ClipMode,
    /// Evaluation targets per table.
    pub num_targets: usize,
    pub inception_splits: usize,
    /// Synthetic examples per class when no real dataset directory is given.
    pub synthetic_per_class: usize,
    /// Evaluate real audio from the held-out split rather than the training split.
    pub heldout_eval: bool,
}

impl Profile {
    pub fn for_scale(scale: Scale) -> Self {
        match scale {
            Scale::Toy => Self::toy(),
            Scale::Full => Self::full(),
        }
    }

    /// Desk-scale settings: 4096-sample clips, 16-d latent, narrow four-stage residual nets.
    pub fn toy() -> Self {
        let generator = GeneratorArch { latent_dim: 16, model_dim: 4, layers: 4 };
        let small = |outputs| ResNetArch {
            stem_kernel: 3,
            stem_stride: 2,
            stem_pool: false,
            widths: [4, 8, 16, 32],
            blocks_per_stage: 1,
            outputs,
        };
        Self {
            scale: Scale::Toy,
            clip_length: generator.output_length(),
            spectrogram: SpectrogramConfig { window_size: 128, hop: 64, ..SpectrogramConfig::default() },
            generator,
            gan: GanTrainConfig {
                steps: 300,
                batch_size: 16,
                lr_generator: 1e-4,
                lr_critic: 1e-4,
                beta1: 0.5,
                beta2: 0.9,
                gp_weight: 10.0,
                phase_shuffle: 2,
                critic_steps: 5,
                checkpoint_every: 100,
                critic_model_dim: 4,
            },
            classifier_arch: small(10),
            classifier: ClassifierTrainConfig {
                epochs: 30,
                batch_size: 32,
                lr: 1e-3,
                max_steps: Some(300),
                holdout_fraction: 0.1,
            },
            inverter_arch: small(generator.latent_dim),
            inverter: InverterTrainConfig {
                epochs: 1000,
                batch_size: 16,
                lr: 1e-3,
                lambda_latent: 1.0,
                lambda_perc: 0.05,
                max_steps: Some(2000),
            },
            gd_steps: 1000,
            hybrid_steps: 50,
            lbfgs: LbfgsConfig::default(),
            clip: ClipMode::None,
            num_targets: 32,
            inception_splits: 10,
            synthetic_per_class: 40,
            heldout_eval: true,
        }
    }

    pub fn full() -> Self {
        let generator = GeneratorArch::full();
        Self {
            scale: Scale::Full,
            clip_length: CANONICAL_LENGTH,
            spectrogram: SpectrogramConfig::default(),
            generator,
            gan: GanTrainConfig {
                steps: 100_000,
                batch_size: 64,
                lr_generator: 1e-4,
                lr_critic: 1e-4,
                beta1: 0.5,
                beta2: 0.9,
                gp_weight: 10.0,
                phase_shuffle: 2,
                critic_steps: 5,
                checkpoint_every: 1000,
                critic_model_dim: 64,
            },
            classifier_arch: ResNetArch::resnet18(10),
            classifier: ClassifierTrainConfig::default(),
            inverter_arch: ResNetArch::resnet18(generator.latent_dim),
            inverter: InverterTrainConfig::default(),
            gd_steps: 50_000,
            hybrid_steps: 200,
            lbfgs: LbfgsConfig::default(),
            clip: ClipMode::None,
            num_targets: 1000,
            inception_splits: 10,
            synthetic_per_class: 1862,
            heldout_eval: true,
        }
    }
}
