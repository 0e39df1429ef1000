//! Latent recovery: a trained inverse mapper, spectrogram-matching quasi-Newton
//! optimization, and the hybrid of the two.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{batch_spectrograms, spectrogram, spectrogram_var, AudioClip, Spectrogram, SpectrogramConfig};
use crate::classifier::DigitClassifier;
use crate::data::{FakeBatchSource, LabeledDataset};
use crate::error::{Error, Result};
use crate::generator::{latents_tensor, sample_latent, Generator, LatentVector};
use crate::graph::{Graph, Var};
use crate::lbfgs::{self, LbfgsConfig};
use crate::nn::{Adam, AdamConfig, Bound, ParamSet};
use crate::resnet::{ResNet, ResNetArch};
use crate::tensor::Tensor;

/// Replace every component outside `[lo, hi]` by an independent uniform draw on `[lo, hi]`.
/// Components already in range are returned untouched.
pub fn stochastic_clip(z: &[f32], lo: f32, hi: f32, rng: &mut (impl Rng + ?Sized)) -> Vec<f32> {
    assert!(lo < hi, "empty clipping range");
    z.iter().map(|&v| if (lo..=hi).contains(&v) { v } else { rng.random_range(lo..=hi) }).collect()
}

pub fn hard_clip(z: &[f32], lo: f32, hi: f32) -> Vec<f32> {
    assert!(lo < hi, "empty clipping range");
    z.iter().map(|&v| if v.is_nan() { v } else { v.clamp(lo, hi) }).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClipMode {
    #[default]
    None,
    Hard,
    Stochastic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gradient,
    Mapper,
    Hybrid,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gradient, Method::Mapper, Method::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gradient => "gradient",
            Method::Mapper => "mapper",
            Method::Hybrid => "hybrid",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub max_steps: usize,
    pub spec: SpectrogramConfig,
    pub lbfgs: LbfgsConfig,
    pub clip: ClipMode,
    pub clip_range: (f32, f32),
}

impl GdConfig {
    pub fn new(max_steps: usize, spec: SpectrogramConfig) -> Self {
        Self { max_steps, spec, lbfgs: LbfgsConfig::default(), clip: ClipMode::None, clip_range: (-1.0, 1.0) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be positive".into()));
        }
        if self.clip_range.0 >= self.clip_range.1 || self.lbfgs.history == 0 {
            return Err(Error::InvalidConfig("invalid clipping range or history size".into()));
        }
        self.spec.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitMode {
    Random,
    Provided(LatentVector),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InversionResult {
    pub z_hat: LatentVector,
    /// Exactly `generate(g, z_hat)`.
    pub reconstruction: AudioClip,
    /// Best-so-far spectrogram MAE after 0, 1, ... optimizer steps.
    pub loss_trace: Vec<f64>,
    pub steps_used: usize,
    /// Filled in by callers that have a clock.
    pub wall_time: f64,
    pub method: Method,
}

impl InversionResult {
    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("trace holds the initial objective")
    }
}

/// Spectrogram-matching objective against a fixed target.
pub struct SpectrogramObjective<'a> {
    generator: &'a Generator,
    spec: SpectrogramConfig,
    target: Tensor,
}

impl<'a> SpectrogramObjective<'a> {
    pub fn new(generator: &'a Generator, target: &Spectrogram, spec: SpectrogramConfig) -> Result<Self> {
        let expected = spec.shape(generator.output_length())?;
        if (target.bins(), target.frames()) != expected {
            return Err(Error::ShapeMismatch {
                expected: alloc::vec![expected.0, expected.1],
                found: alloc::vec![target.bins(), target.frames()],
            });
        }
        Ok(Self { generator, spec, target: target.values().clone() })
    }

    fn run(&self, z: &[f32], want_grad: bool) -> Result<(f64, Vec<f32>)> {
        let d = self.generator.latent_dim();
        if z.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: z.len() });
        }
        let mut g = Graph::new();
        let p = self.generator.params.bind(&mut g, false);
        let zv = g.leaf(Tensor::new(&[1, d], z.to_vec()));
        let audio = self.generator.forward(&mut g, &p, zv);
        let s = spectrogram_var(&mut g, audio, &self.spec)?;
        let value =
            g.value(s).data().iter().zip(self.target.data()).map(|(&a, &b)| (a as f64 - b as f64).abs()).sum::<f64>()
                / self.target.len() as f64;
        if !value.is_finite() {
            return Err(Error::NonFinite { what: "spectrogram objective", at: format!("{z:?}") });
        }
        if !want_grad {
            return Ok((value, Vec::new()));
        }
        let t = g.leaf(self.target.clone().reshaped(g.shape(s)));
        let diff = g.sub(s, t);
        let a = g.abs(diff);
        let loss = g.mean(a);
        let grad = g.grad(loss, &[zv], false)[0];
        Ok((value, g.value(grad).data().to_vec()))
    }

    /// Mean absolute spectrogram difference at `z`.
    pub fn value(&self, z: &LatentVector) -> Result<f64> {
        Ok(self.run(&z.values, false)?.0)
    }

    pub fn value_and_grad(&self, z: &[f32]) -> Result<(f64, Vec<f32>)> {
        self.run(z, true)
    }
}

fn to_f32(x: &[f64]) -> Vec<f32> {
    x.iter().map(|&v| v as f32).collect()
}

/// Minimize the objective from `init`; the returned latent is the earliest best point.
fn optimize(
    generator: &Generator,
    objective: &SpectrogramObjective,
    init: LatentVector,
    cfg: &GdConfig,
    max_steps: usize,
    method: Method,
    rng: &mut ChaCha8Rng,
) -> Result<InversionResult> {
    let (lo, hi) = cfg.clip_range;
    let mode = cfg.clip;
    let outcome = lbfgs::minimize(
        init.values.iter().map(|&v| v as f64).collect(),
        max_steps,
        &cfg.lbfgs,
        |x| {
            let (f, g) = objective.value_and_grad(&to_f32(x))?;
            Ok((f, g.iter().map(|&v| v as f64).collect()))
        },
        |x| {
            let z = to_f32(x);
            let clipped = match mode {
                ClipMode::None => return,
                ClipMode::Hard => hard_clip(&z, lo, hi),
                ClipMode::Stochastic => stochastic_clip(&z, lo, hi, rng),
            };
            for (xi, c) in x.iter_mut().zip(clipped) {
                *xi = c as f64;
            }
        },
    )?;
    let z_hat = LatentVector::new(to_f32(&outcome.best_x));
    let reconstruction = generator.generate(&z_hat)?;
    Ok(InversionResult {
        z_hat,
        reconstruction,
        loss_trace: outcome.trace,
        steps_used: outcome.iterations,
        wall_time: 0.0,
        method,
    })
}

/// Gradient-based inversion against a target spectrogram, which may come from real audio.
pub fn invert_gd_spectrogram(
    generator: &Generator,
    target: &Spectrogram,
    init: InitMode,
    cfg: &GdConfig,
    rng: &mut ChaCha8Rng,
) -> Result<InversionResult> {
    cfg.validate()?;
    let objective = SpectrogramObjective::new(generator, target, cfg.spec)?;
    let init = match init {
        InitMode::Random => sample_latent(rng, generator.latent_dim()),
        InitMode::Provided(z) => {
            if z.dim() != generator.latent_dim() {
                return Err(Error::DimensionMismatch { expected: generator.latent_dim(), found: z.dim() });
            }
            z
        }
    };
    optimize(generator, &objective, init, cfg, cfg.max_steps, Method::Gradient, rng)
}

pub fn invert_gd(
    generator: &Generator,
    target: &AudioClip,
    init: InitMode,
    cfg: &GdConfig,
    rng: &mut ChaCha8Rng,
) -> Result<InversionResult> {
    if target.len() != generator.output_length() {
        return Err(Error::LengthMismatch { left: target.len(), right: generator.output_length() });
    }
    invert_gd_spectrogram(generator, &spectrogram(target, &cfg.spec)?, init, cfg, rng)
}

/// Network mapping a spectrogram to a latent estimate; no output activation.
#[derive(Clone, Debug, PartialEq)]
pub struct InverseMapper {
    pub arch: ResNetArch,
    pub spec: SpectrogramConfig,
    pub input_shape: [usize; 2],
    pub params: ParamSet,
    net: ResNet,
}

impl InverseMapper {
    pub fn new(
        arch: ResNetArch,
        spec: SpectrogramConfig,
        clip_length: usize,
        rng: &mut (impl Rng + ?Sized),
    ) -> Result<Self> {
        spec.validate()?;
        let (bins, frames) = spec.shape(clip_length)?;
        let mut params = ParamSet::new();
        let net = ResNet::new(&mut params, arch.clone(), rng);
        Ok(Self { arch, spec, input_shape: [bins, frames], params, net })
    }

    pub fn from_values(
        arch: ResNetArch,
        spec: SpectrogramConfig,
        clip_length: usize,
        values: Vec<(String, Tensor)>,
    ) -> Result<Self> {
        let mut m = Self::new(arch, spec, clip_length, &mut ChaCha8Rng::seed_from_u64(0))?;
        m.params.load_values(values).map_err(Error::InvalidConfig)?;
        Ok(m)
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.outputs
    }

    /// `[N, 1, bins, frames] -> [N, d]`
    pub fn forward(&self, g: &mut Graph, p: &mut Bound, x: Var) -> Var {
        self.net.forward(g, p, x).head
    }

    pub fn predict_batch(&self, specs: &[&Spectrogram]) -> Result<Vec<LatentVector>> {
        let mut out = Vec::with_capacity(specs.len());
        for chunk in specs.chunks(64) {
            for s in chunk {
                if [s.bins(), s.frames()] != self.input_shape {
                    return Err(Error::ShapeMismatch {
                        expected: self.input_shape.to_vec(),
                        found: alloc::vec![s.bins(), s.frames()],
                    });
                }
            }
            let mut g = Graph::new();
            let mut p = self.params.bind(&mut g, false);
            let x = g.leaf(batch_spectrograms(chunk));
            let y = self.forward(&mut g, &mut p, x);
            out.extend(g.value(y).data().chunks(self.latent_dim()).map(|c| LatentVector::new(c.to_vec())));
        }
        Ok(out)
    }

    pub fn predict_latent(&self, s: &Spectrogram) -> Result<LatentVector> {
        Ok(self.predict_batch(&[s])?.remove(0))
    }
}

fn check_compatible(mapper: &InverseMapper, generator: &Generator) -> Result<()> {
    if mapper.latent_dim() != generator.latent_dim() {
        return Err(Error::DimensionMismatch { expected: generator.latent_dim(), found: mapper.latent_dim() });
    }
    Ok(())
}

/// Prediction-only inversion: the mapper's latent, scored with the gradient objective.
pub fn invert_mapper(
    mapper: &InverseMapper,
    generator: &Generator,
    target: &AudioClip,
    spec: &SpectrogramConfig,
) -> Result<InversionResult> {
    check_compatible(mapper, generator)?;
    let z_hat = mapper.predict_latent(&spectrogram(target, &mapper.spec)?)?;
    let objective = SpectrogramObjective::new(generator, &spectrogram(target, spec)?, *spec)?;
    let loss = objective.value(&z_hat)?;
    let reconstruction = generator.generate(&z_hat)?;
    Ok(InversionResult {
        z_hat,
        reconstruction,
        loss_trace: alloc::vec![loss],
        steps_used: 0,
        wall_time: 0.0,
        method: Method::Mapper,
    })
}

/// Mapper prediction refined by at most `cfg.max_steps` optimizer steps (zero is allowed).
pub fn invert_hybrid(
    mapper: &InverseMapper,
    generator: &Generator,
    target: &AudioClip,
    cfg: &GdConfig,
    rng: &mut ChaCha8Rng,
) -> Result<InversionResult> {
    check_compatible(mapper, generator)?;
    let mut probe = cfg.clone();
    probe.max_steps = probe.max_steps.max(1);
    probe.validate()?;
    let init = mapper.predict_latent(&spectrogram(target, &mapper.spec)?)?;
    let objective = SpectrogramObjective::new(generator, &spectrogram(target, &cfg.spec)?, cfg.spec)?;
    optimize(generator, &objective, init, cfg, cfg.max_steps, Method::Hybrid, rng)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverterTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub lambda_latent: f32,
    pub lambda_perc: f32,
    /// Cap on optimizer updates (real and fake batches both count).
    pub max_steps: Option<usize>,
}

impl Default for InverterTrainConfig {
    fn default() -> Self {
        Self { epochs: 250, batch_size: 64, lr: 1e-3, lambda_latent: 1.0, lambda_perc: 1.0, max_steps: None }
    }
}

impl InverterTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.lr > 0.0) {
            return Err(Error::InvalidConfig("inverter training values must be positive".into()));
        }
        if self.lambda_latent < 0.0 || self.lambda_perc < 0.0 || self.lambda_latent + self.lambda_perc <= 0.0 {
            return Err(Error::InvalidConfig("loss weights must be non-negative and not both zero".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InverterLog {
    /// Weighted perceptual loss of each real-batch update.
    pub real_loss: Vec<f32>,
    /// Total loss of each fake-batch update.
    pub fake_loss: Vec<f32>,
    /// Latent MSE of each fake batch, before the update.
    pub fake_latent_mse: Vec<f32>,
}

impl InverterLog {
    pub fn steps(&self) -> usize {
        self.real_loss.len() + self.fake_loss.len()
    }
}

/// Spectrograms of `[N, 1, L]` audio inside the graph.
fn reconstruct_spectrograms(
    g: &mut Graph,
    generator: &Generator,
    gp: &Bound,
    z: Var,
    spec: &SpectrogramConfig,
) -> Result<Var> {
    let audio = generator.forward(g, gp, z);
    spectrogram_var(g, audio, spec)
}

/// Train the inverse mapper, alternating one real batch (perceptual loss only)
/// with one batch of freshly generated fakes (latent MSE plus perceptual loss).
pub fn train_inverter(
    generator: &Generator,
    classifier: &DigitClassifier,
    real: &LabeledDataset,
    arch: ResNetArch,
    cfg: &InverterTrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(InverseMapper, InverterLog)> {
    cfg.validate()?;
    if arch.outputs != generator.latent_dim() {
        return Err(Error::DimensionMismatch { expected: generator.latent_dim(), found: arch.outputs });
    }
    let spec = classifier.spec;
    let mut mapper = InverseMapper::new(arch, spec, generator.output_length(), rng)?;
    if [mapper.input_shape] != [classifier.input_shape] {
        return Err(Error::ShapeMismatch {
            expected: classifier.input_shape.to_vec(),
            found: mapper.input_shape.to_vec(),
        });
    }
    let real_specs = real.items.iter().map(|i| spectrogram(&i.clip, &spec)).collect::<Result<Vec<_>>>()?;
    let mut opt = Adam::new(&mapper.params, AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
    let fakes = FakeBatchSource { generator, batch_size: cfg.batch_size };
    let mut log = InverterLog::default();
    let d = generator.latent_dim();
    let budget_left = |log: &InverterLog| cfg.max_steps.is_none_or(|m| log.steps() < m);
    let mut order: Vec<usize> = (0..real_specs.len()).collect();

    'outer: for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let at = || format!("epoch {epoch} batch {b}");
            if cfg.lambda_perc > 0.0 {
                if !budget_left(&log) {
                    break 'outer;
                }
                let x = batch_spectrograms(&batch.iter().map(|&i| &real_specs[i]).collect::<Vec<_>>());
                let target = classifier.batch_features(&x);
                let mut g = Graph::new();
                let mut mp = mapper.params.bind(&mut g, true);
                let gp = generator.params.bind(&mut g, false);
                let mut cp = classifier.params.bind(&mut g, false);
                let xv = g.leaf(x);
                let z_hat = mapper.forward(&mut g, &mut mp, xv);
                let s = reconstruct_spectrograms(&mut g, generator, &gp, z_hat, &spec)?;
                let perc = classifier.perceptual_var(&mut g, &mut cp, s, &target);
                let loss = g.scale(perc, cfg.lambda_perc);
                let lv = g.value(loss).item();
                if !lv.is_finite() {
                    return Err(Error::NonFinite { what: "inverter real-batch loss", at: at() });
                }
                log.real_loss.push(lv);
                let mut grads = mp.backward(&mut g, loss);
                // Running normalization statistics follow the fake batches only, the
                // distribution the latent regression is trained and evaluated on.
                grads.updates.clear();
                opt.apply(&mut mapper.params, grads);
            }

            if !budget_left(&log) {
                break 'outer;
            }
            let (zs, clips) = fakes.next_fake_batch(rng)?;
            let specs = clips.iter().map(|c| spectrogram(c, &spec)).collect::<Result<Vec<_>>>()?;
            let x = batch_spectrograms(&specs.iter().collect::<Vec<_>>());
            let mut g = Graph::new();
            let mut mp = mapper.params.bind(&mut g, true);
            let xv = g.leaf(x.clone());
            let z_hat = mapper.forward(&mut g, &mut mp, xv);
            let z_true = g.leaf(latents_tensor(&zs).reshaped(&[zs.len(), d]));
            let diff = g.sub(z_hat, z_true);
            let sq = g.square(diff);
            let mse = g.mean(sq);
            let mut loss = g.scale(mse, cfg.lambda_latent);
            if cfg.lambda_perc > 0.0 {
                let target = classifier.batch_features(&x);
                let gp = generator.params.bind(&mut g, false);
                let mut cp = classifier.params.bind(&mut g, false);
                let s = reconstruct_spectrograms(&mut g, generator, &gp, z_hat, &spec)?;
                let perc = classifier.perceptual_var(&mut g, &mut cp, s, &target);
                let perc = g.scale(perc, cfg.lambda_perc);
                loss = g.add(loss, perc);
            }
            let lv = g.value(loss).item();
            if !lv.is_finite() {
                return Err(Error::NonFinite { what: "inverter fake-batch loss", at: at() });
            }
            log.fake_latent_mse.push(g.value(mse).item());
            log.fake_loss.push(lv);
            let grads = mp.backward(&mut g, loss);
            opt.apply(&mut mapper.params, grads);
        }
    }
    Ok((mapper, log))
}

/// Mean latent MSE of the mapper on `n` freshly generated fakes.
pub fn fake_latent_mse(mapper: &InverseMapper, generator: &Generator, n: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    if n == 0 {
        return Err(Error::Empty("fake evaluation set"));
    }
    let src = FakeBatchSource { generator, batch_size: n };
    let (zs, clips) = src.next_fake_batch(rng)?;
    let specs = clips.iter().map(|c| spectrogram(c, &mapper.spec)).collect::<Result<Vec<_>>>()?;
    let preds = mapper.predict_batch(&specs.iter().collect::<Vec<_>>())?;
    Ok(zs.iter().zip(&preds).map(|(z, p)| z.mse(p)).sum::<f64>() / n as f64)
}
