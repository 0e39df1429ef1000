//! Residual network over single-channel spectrogram images, shared by the
//! digit classifier and the inverse mapper.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{Graph, Var};
use crate::nn::{global_avg_pool, max_pool2d, BatchNorm, Bound, Conv2d, Linear, ParamSet};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResNetArch {
    pub stem_kernel: usize,
    pub stem_stride: usize,
    /// 3x3 stride-2 max pool after the stem.
    pub stem_pool: bool,
    /// Channel width of each of the four stages.
    pub widths: [usize; 4],
    pub blocks_per_stage: usize,
    pub outputs: usize,
}

impl ResNetArch {
    /// The 18-layer layout.
    pub fn resnet18(outputs: usize) -> Self {
        Self {
            stem_kernel: 7,
            stem_stride: 2,
            stem_pool: true,
            widths: [64, 128, 256, 512],
            blocks_per_stage: 2,
            outputs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Block {
    conv1: Conv2d,
    bn1: BatchNorm,
    conv2: Conv2d,
    bn2: BatchNorm,
    shortcut: Option<(Conv2d, BatchNorm)>,
}

impl Block {
    fn new(
        ps: &mut ParamSet,
        name: &str,
        input: usize,
        output: usize,
        stride: usize,
        rng: &mut (impl Rng + ?Sized),
    ) -> Self {
        let shortcut = (stride != 1 || input != output).then(|| {
            (
                Conv2d::new(ps, &format!("{name}.down"), input, output, 1, stride, 0, rng),
                BatchNorm::new(ps, &format!("{name}.down_bn"), output),
            )
        });
        Self {
            conv1: Conv2d::new(ps, &format!("{name}.conv1"), input, output, 3, stride, 1, rng),
            bn1: BatchNorm::new(ps, &format!("{name}.bn1"), output),
            conv2: Conv2d::new(ps, &format!("{name}.conv2"), output, output, 3, 1, 1, rng),
            bn2: BatchNorm::new(ps, &format!("{name}.bn2"), output),
            shortcut,
        }
    }

    fn forward(&self, g: &mut Graph, p: &mut Bound, x: Var) -> Var {
        let h = self.conv1.forward(g, p, x);
        let h = self.bn1.forward(g, p, h);
        let h = g.relu(h);
        let h = self.conv2.forward(g, p, h);
        let h = self.bn2.forward(g, p, h);
        let skip = match &self.shortcut {
            Some((conv, bn)) => {
                let s = conv.forward(g, p, x);
                bn.forward(g, p, s)
            }
            None => x,
        };
        let sum = g.add(h, skip);
        g.relu(sum)
    }
}

/// Activations of one forward pass.
pub struct ResNetOutput {
    /// Output of each residual stage, `[N, C_i, H_i, W_i]`.
    pub taps: Vec<Var>,
    /// Globally pooled final features, `[N, C_4]`.
    pub pooled: Var,
    /// `[N, outputs]`
    pub head: Var,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResNet {
    pub arch: ResNetArch,
    stem: Conv2d,
    stem_bn: BatchNorm,
    stages: Vec<Vec<Block>>,
    head: Linear,
}

impl ResNet {
    pub fn new(ps: &mut ParamSet, arch: ResNetArch, rng: &mut (impl Rng + ?Sized)) -> Self {
        let w = arch.widths;
        let stem = Conv2d::new(ps, "stem", 1, w[0], arch.stem_kernel, arch.stem_stride, arch.stem_kernel / 2, rng);
        let stem_bn = BatchNorm::new(ps, "stem_bn", w[0]);
        let mut input = w[0];
        let stages = (0..4)
            .map(|s| {
                (0..arch.blocks_per_stage)
                    .map(|b| {
                        let stride = if s > 0 && b == 0 { 2 } else { 1 };
                        let block = Block::new(ps, &format!("stage{s}.{b}"), input, w[s], stride, rng);
                        input = w[s];
                        block
                    })
                    .collect()
            })
            .collect();
        let head = Linear::new(ps, "head", w[3], arch.outputs, rng);
        Self { arch, stem, stem_bn, stages, head }
    }

    /// `[N, 1, H, W]` images.
    pub fn forward(&self, g: &mut Graph, p: &mut Bound, x: Var) -> ResNetOutput {
        let h = self.stem.forward(g, p, x);
        let h = self.stem_bn.forward(g, p, h);
        let mut h = g.relu(h);
        if self.arch.stem_pool {
            h = max_pool2d(g, h, 3, 2, 1);
        }
        let mut taps = Vec::with_capacity(4);
        for stage in &self.stages {
            for block in stage {
                h = block.forward(g, p, h);
            }
            taps.push(h);
        }
        let pooled = global_avg_pool(g, h);
        let head = self.head.forward(g, p, pooled);
        ResNetOutput { taps, pooled, head }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn output_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ps = ParamSet::new();
        let arch = ResNetArch {
            stem_kernel: 3,
            stem_stride: 2,
            stem_pool: false,
            widths: [2, 3, 4, 5],
            blocks_per_stage: 1,
            outputs: 7,
        };
        let net = ResNet::new(&mut ps, arch, &mut rng);
        let mut g = Graph::new();
        let mut p = ps.bind(&mut g, true);
        let x = g.leaf(Tensor::full(&[2, 1, 17, 15], 0.5));
        let out = net.forward(&mut g, &mut p, x);
        assert_eq!(g.shape(out.taps[0]), &[2, 2, 9, 8]);
        assert_eq!(g.shape(out.taps[3]), &[2, 5, 2, 1]);
        assert_eq!(g.shape(out.head), &[2, 7]);
    }

    #[test]
    fn resnet18_layout_has_expected_parameter_count() {
        let mut ps = ParamSet::new();
        ResNet::new(&mut ps, ResNetArch::resnet18(10), &mut ChaCha8Rng::seed_from_u64(0));
        // Convolutions and BN affine terms of the standard 18-layer network with a 1-channel stem.
        assert_eq!(ps.num_trainable(), 11_175_370);
    }
}
