//! Transposed-convolution waveform generator, its phase-shuffle critic and WGAN-GP training.

use alloc::format;
use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{AudioClip, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::nn::{Adam, AdamConfig, Bound, Conv1d, ConvTranspose1d, Linear, ParamSet};
use crate::tensor::Tensor;

/// Point in the generator's input space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentVector {
    pub values: Vec<f32>,
}

impl LatentVector {
    pub fn new(values: Vec<f32>) -> Self {
        Self { values }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { values: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Mean squared difference to another latent of the same dimension.
    pub fn mse(&self, other: &LatentVector) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| {
                let d = a as f64 - b as f64;
                d * d
            })
            .sum::<f64>()
            / self.dim() as f64
    }
}

/// `d` independent draws from `Uniform[-1, 1]`.
pub fn sample_latent(rng: &mut (impl Rng + ?Sized), d: usize) -> LatentVector {
    assert!(d > 0, "latent dimension must be positive");
    LatentVector { values: (0..d).map(|_| rng.random_range(-1.0f32..=1.0)).collect() }
}

pub fn latents_tensor(zs: &[LatentVector]) -> Tensor {
    let d = zs[0].dim();
    let mut data = Vec::with_capacity(zs.len() * d);
    for z in zs {
        assert_eq!(z.dim(), d);
        data.extend_from_slice(&z.values);
    }
    Tensor::new(&[zs.len(), d], data)
}

const KERNEL: usize = 25;
const STRIDE: usize = 4;
const PAD: usize = 11;
/// Length of the first feature map produced by the dense projection.
const BASE_LENGTH: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorArch {
    pub latent_dim: usize,
    /// Channel multiplier; the widest layer has `model_dim · 2^(layers−1)` channels.
    pub model_dim: usize,
    /// Number of 4x upsampling stages.
    pub layers: usize,
}

impl GeneratorArch {
    /// Full-size layout: 100-d latent, five upsampling stages, 16384 samples.
    pub fn full() -> Self {
        Self { latent_dim: 100, model_dim: 64, layers: 5 }
    }

    pub fn output_length(&self) -> usize {
        BASE_LENGTH * STRIDE.pow(self.layers as u32)
    }

    fn channels(&self, stage: usize) -> usize {
        self.model_dim << (self.layers - 1 - stage)
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.model_dim == 0 || self.layers == 0 {
            return Err(Error::InvalidConfig("generator dimensions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub arch: GeneratorArch,
    pub params: ParamSet,
    dense: Linear,
    ups: Vec<ConvTranspose1d>,
}

impl Generator {
    pub fn new(arch: GeneratorArch, rng: &mut (impl Rng + ?Sized)) -> Self {
        let mut params = ParamSet::new();
        let dense = Linear::new(&mut params, "dense", arch.latent_dim, BASE_LENGTH * arch.channels(0), rng);
        let ups = (0..arch.layers)
            .map(|i| {
                let out = if i + 1 == arch.layers { 1 } else { arch.channels(i + 1) };
                ConvTranspose1d::new(&mut params, &format!("up{i}"), arch.channels(i), out, KERNEL, STRIDE, PAD, 1, rng)
            })
            .collect();
        Self { arch, params, dense, ups }
    }

    /// Rebuild from stored tensors.
    pub fn from_values(arch: GeneratorArch, values: Vec<(String, Tensor)>) -> Result<Self> {
        arch.validate()?;
        let mut g = Self::new(arch, &mut ChaCha8Rng::seed_from_u64(0));
        g.params.load_values(values).map_err(Error::InvalidConfig)?;
        Ok(g)
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim
    }

    pub fn output_length(&self) -> usize {
        self.arch.output_length()
    }

    /// `[N, d] -> [N, 1, L]`
    pub fn forward(&self, g: &mut Graph, p: &Bound, z: Var) -> Var {
        let n = g.shape(z)[0];
        let h = self.dense.forward(g, p, z);
        let h = g.reshape(h, &[n, self.arch.channels(0), BASE_LENGTH]);
        let mut h = g.relu(h);
        for (i, up) in self.ups.iter().enumerate() {
            h = up.forward(g, p, h);
            h = if i + 1 == self.ups.len() { g.tanh(h) } else { g.relu(h) };
        }
        h
    }

    fn check(&self, z: &LatentVector) -> Result<()> {
        if z.dim() != self.latent_dim() {
            return Err(Error::DimensionMismatch { expected: self.latent_dim(), found: z.dim() });
        }
        Ok(())
    }

    pub fn generate(&self, z: &LatentVector) -> Result<AudioClip> {
        Ok(self.generate_batch(core::slice::from_ref(z))?.remove(0))
    }

    /// Batched generation; each clip is bitwise identical to generating it alone.
    pub fn generate_batch(&self, zs: &[LatentVector]) -> Result<Vec<AudioClip>> {
        if zs.is_empty() {
            return Ok(Vec::new());
        }
        for z in zs {
            self.check(z)?;
        }
        let out = self.generate_tensor(&latents_tensor(zs));
        let len = self.output_length();
        out.data().chunks(len).map(|c| AudioClip::new(c.to_vec(), SAMPLE_RATE)).collect()
    }

    /// `[N, d]` latents to `[N, 1, L]` audio without gradient tracking.
    pub fn generate_tensor(&self, z: &Tensor) -> Tensor {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let zv = g.leaf(z.clone());
        let out = self.forward(&mut g, &p, zv);
        g.value(out).clone()
    }
}

/// Symmetric-reflection index map for shifting a length-`len` row by `shift`.
fn shifted_index(t: usize, shift: i64, len: usize) -> usize {
    let len = len as i64;
    let mut idx = t as i64 - shift;
    if idx < 0 {
        idx = -idx - 1;
    } else if idx >= len {
        idx = 2 * len - 1 - idx;
    }
    idx as usize
}

/// Index table for [`Graph::gather`] that applies one shift per example of `[N, C, L]`.
pub fn phase_shuffle_index(shape: &[usize], shifts: &[i64]) -> Result<Vec<u32>> {
    let (n, c, len) = (shape[0], shape[1], shape[2]);
    assert_eq!(shifts.len(), n, "one shift per example");
    if let Some(&s) = shifts.iter().find(|s| s.unsigned_abs() as usize > len) {
        return Err(Error::ShuffleRadius { radius: s.unsigned_abs() as usize, len });
    }
    let mut index = Vec::with_capacity(n * c * len);
    for (b, &shift) in shifts.iter().enumerate() {
        for ch in 0..c {
            let base = (b * c + ch) * len;
            index.extend((0..len).map(|t| (base + shifted_index(t, shift, len)) as u32));
        }
    }
    Ok(index)
}

/// Draw one shift per example uniformly from `[-radius, radius]`.
pub fn draw_shifts(rng: &mut (impl Rng + ?Sized), batch: usize, radius: usize) -> Vec<i64> {
    let r = radius as i64;
    (0..batch).map(|_| if r == 0 { 0 } else { rng.random_range(-r..=r) }).collect()
}

/// Shift each example's time axis by a fixed amount, filling edges by symmetric reflection.
/// Out-of-range reads mirror about the edge sample, so a shift of `+2` starts `x[1], x[0], x[0], ...`.
pub fn phase_shuffle_with_shifts(x: &Tensor, shifts: &[i64]) -> Result<Tensor> {
    if x.shape().len() != 3 {
        return Err(Error::ShapeMismatch { expected: vec![0, 0, 0], found: x.shape().to_vec() });
    }
    let index = phase_shuffle_index(x.shape(), shifts)?;
    Ok(Tensor::new(x.shape(), index.iter().map(|&i| x.data()[i as usize]).collect()))
}

/// Phase shuffle of `[N, C, L]` activations by a random shift in `[-radius, radius]`.
pub fn phase_shuffle(x: &Tensor, radius: usize, rng: &mut (impl Rng + ?Sized)) -> Result<Tensor> {
    if x.shape().len() != 3 {
        return Err(Error::ShapeMismatch { expected: vec![0, 0, 0], found: x.shape().to_vec() });
    }
    if radius > x.shape()[2] {
        return Err(Error::ShuffleRadius { radius, len: x.shape()[2] });
    }
    let shifts = draw_shifts(rng, x.shape()[0], radius);
    phase_shuffle_with_shifts(x, &shifts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticArch {
    pub model_dim: usize,
    pub layers: usize,
    pub phase_shuffle: usize,
}

/// Strided-convolution critic with phase shuffle between layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Critic {
    pub arch: CriticArch,
    pub params: ParamSet,
    convs: Vec<Conv1d>,
    head: Linear,
}

impl Critic {
    pub fn new(arch: CriticArch, rng: &mut (impl Rng + ?Sized)) -> Self {
        let mut params = ParamSet::new();
        let width = |i: usize| arch.model_dim << i;
        let convs = (0..arch.layers)
            .map(|i| {
                let input = if i == 0 { 1 } else { width(i - 1) };
                Conv1d::new(&mut params, &format!("conv{i}"), input, width(i), KERNEL, STRIDE, PAD, rng)
            })
            .collect();
        let head = Linear::new(&mut params, "head", BASE_LENGTH * width(arch.layers - 1), 1, rng);
        Self { arch, params, convs, head }
    }

    pub fn from_values(arch: CriticArch, values: Vec<(String, Tensor)>) -> Result<Self> {
        let mut c = Self::new(arch, &mut ChaCha8Rng::seed_from_u64(0));
        c.params.load_values(values).map_err(Error::InvalidConfig)?;
        Ok(c)
    }

    /// `[N, 1, L] -> [N, 1]`; phase shuffle is applied when `rng` is given.
    pub fn forward(&self, g: &mut Graph, p: &Bound, x: Var, mut rng: Option<&mut ChaCha8Rng>) -> Result<Var> {
        let n = g.shape(x)[0];
        let mut h = x;
        for (i, conv) in self.convs.iter().enumerate() {
            h = conv.forward(g, p, h);
            h = g.leaky_relu(h, 0.2);
            if i + 1 < self.convs.len() && self.arch.phase_shuffle > 0 {
                if let Some(r) = rng.as_deref_mut() {
                    let shifts = draw_shifts(r, n, self.arch.phase_shuffle);
                    let shape = g.shape(h).to_vec();
                    let index: Rc<[u32]> = Rc::from(phase_shuffle_index(&shape, &shifts)?);
                    h = g.gather(h, index, &shape);
                }
            }
        }
        let flat_len = g.value(h).len() / n;
        let flat = g.reshape(h, &[n, flat_len]);
        Ok(self.head.forward(g, p, flat))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr_generator: f32,
    pub lr_critic: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub gp_weight: f32,
    pub phase_shuffle: usize,
    pub critic_steps: usize,
    /// Generator steps between checkpoint callbacks; 0 disables intermediate checkpoints.
    pub checkpoint_every: usize,
    pub critic_model_dim: usize,
}

impl GanTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.steps, self.batch_size, self.critic_steps, self.critic_model_dim];
        if positive.contains(&0) || !(self.lr_generator > 0.0 && self.lr_critic > 0.0 && self.gp_weight > 0.0) {
            return Err(Error::InvalidConfig("GAN training values must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GanLog {
    /// Critic loss (Wasserstein estimate plus penalty), one entry per critic update.
    pub critic_loss: Vec<f32>,
    pub gradient_penalty: Vec<f32>,
    /// One entry per generator update.
    pub generator_loss: Vec<f32>,
}

/// Hooks for progress reporting and checkpointing during [`train_gan`].
pub trait GanObserver {
    fn on_step(&mut self, _step: usize, _log: &GanLog) {}
    fn checkpoint(&mut self, _step: usize, _generator: &Generator, _critic: &Critic) -> Result<()> {
        Ok(())
    }
}

pub struct NoGanObserver;
impl GanObserver for NoGanObserver {}

pub struct GanOutput {
    pub generator: Generator,
    pub critic: Critic,
    pub log: GanLog,
}

fn audio_batch(clips: &[&AudioClip]) -> Tensor {
    let len = clips[0].len();
    let mut data = Vec::with_capacity(clips.len() * len);
    for c in clips {
        data.extend_from_slice(c.samples());
    }
    Tensor::new(&[clips.len(), 1, len], data)
}

fn finite(v: f32, what: &'static str, step: usize) -> Result<f32> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { what, at: format!("generator step {step}") })
    }
}

/// Wasserstein GAN with gradient penalty: `critic_steps` critic updates per generator update.
pub fn train_gan(
    real: &[AudioClip],
    arch: GeneratorArch,
    cfg: &GanTrainConfig,
    rng: &mut ChaCha8Rng,
    observer: &mut dyn GanObserver,
) -> Result<GanOutput> {
    cfg.validate()?;
    arch.validate()?;
    if real.is_empty() {
        return Err(Error::Empty("GAN training set"));
    }
    let len = arch.output_length();
    if let Some(c) = real.iter().find(|c| c.len() != len) {
        return Err(Error::LengthMismatch { left: c.len(), right: len });
    }
    let mut generator = Generator::new(arch, rng);
    let critic_arch =
        CriticArch { model_dim: cfg.critic_model_dim, layers: arch.layers, phase_shuffle: cfg.phase_shuffle };
    let mut critic = Critic::new(critic_arch, rng);
    let adam = |lr| AdamConfig { lr, beta1: cfg.beta1, beta2: cfg.beta2, eps: 1e-8 };
    let mut opt_g = Adam::new(&generator.params, adam(cfg.lr_generator));
    let mut opt_c = Adam::new(&critic.params, adam(cfg.lr_critic));
    let mut log = GanLog::default();
    let b = cfg.batch_size;

    for step in 0..cfg.steps {
        for _ in 0..cfg.critic_steps {
            let picks: Vec<&AudioClip> = (0..b).map(|_| &real[rng.random_range(0..real.len())]).collect();
            let real_t = audio_batch(&picks);
            let zs: Vec<LatentVector> = (0..b).map(|_| sample_latent(rng, arch.latent_dim)).collect();
            let fake_t = generator.generate_tensor(&latents_tensor(&zs));
            let eps: Vec<f32> = (0..b).map(|_| rng.random_range(0.0f32..=1.0)).collect();
            let mut interp = real_t.clone();
            for (i, v) in interp.data_mut().iter_mut().enumerate() {
                let e = eps[i / len];
                *v = e * *v + (1.0 - e) * fake_t.data()[i];
            }

            let mut g = Graph::new();
            let p = critic.params.bind(&mut g, true);
            let xr = g.leaf(real_t);
            let xf = g.leaf(fake_t);
            let xi = g.leaf(interp);
            let dr = critic.forward(&mut g, &p, xr, Some(rng))?;
            let df = critic.forward(&mut g, &p, xf, Some(rng))?;
            let di = critic.forward(&mut g, &p, xi, Some(rng))?;
            let di_sum = g.sum(di);
            let grad_x = g.grad(di_sum, &[xi], true)[0];
            let sq = g.square(grad_x);
            let per = g.sum_rows(sq);
            let per = g.add_scalar(per, 1e-12);
            let norm = g.sqrt(per);
            let dev = g.add_scalar(norm, -1.0);
            let dev2 = g.square(dev);
            let gp = g.mean(dev2);
            let mr = g.mean(dr);
            let mf = g.mean(df);
            let w = g.sub(mf, mr);
            let gp_scaled = g.scale(gp, cfg.gp_weight);
            let loss = g.add(w, gp_scaled);
            let loss_v = finite(g.value(loss).item(), "critic loss", step)?;
            log.gradient_penalty.push(g.value(gp).item());
            log.critic_loss.push(loss_v);
            let grads = p.backward(&mut g, loss);
            opt_c.apply(&mut critic.params, grads);
        }

        let zs: Vec<LatentVector> = (0..b).map(|_| sample_latent(rng, arch.latent_dim)).collect();
        let mut g = Graph::new();
        let pg = generator.params.bind(&mut g, true);
        let pc = critic.params.bind(&mut g, false);
        let z = g.leaf(latents_tensor(&zs));
        let fake = generator.forward(&mut g, &pg, z);
        let d = critic.forward(&mut g, &pc, fake, Some(rng))?;
        let m = g.mean(d);
        let loss = g.scale(m, -1.0);
        log.generator_loss.push(finite(g.value(loss).item(), "generator loss", step)?);
        let grads = pg.backward(&mut g, loss);
        drop(pc);
        opt_g.apply(&mut generator.params, grads);

        observer.on_step(step, &log);
        if cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 && step + 1 < cfg.steps {
            observer.checkpoint(step + 1, &generator, &critic)?;
        }
    }
    observer.checkpoint(cfg.steps, &generator, &critic)?;
    Ok(GanOutput { generator, critic, log })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_arch() -> GeneratorArch {
        GeneratorArch { latent_dim: 16, model_dim: 4, layers: 4 }
    }

    #[test]
    fn output_length_matches_architecture() {
        assert_eq!(GeneratorArch::full().output_length(), 16_384);
        let g =
            Generator::new(GeneratorArch { latent_dim: 8, model_dim: 1, layers: 5 }, &mut ChaCha8Rng::seed_from_u64(1));
        let clip = g.generate(&sample_latent(&mut ChaCha8Rng::seed_from_u64(2), 8)).unwrap();
        assert_eq!(clip.len(), 16_384);
    }

    #[test]
    fn generate_is_deterministic_and_bounded() {
        let g = Generator::new(toy_arch(), &mut ChaCha8Rng::seed_from_u64(1));
        let z = LatentVector::zeros(16);
        let a = g.generate(&z).unwrap();
        let b = g.generate(&z).unwrap();
        assert_eq!(a, b);
        assert!(a.samples().iter().all(|v| v.is_finite() && v.abs() <= 1.0));
    }

    #[test]
    fn batched_generation_is_bitwise_equal_to_single() {
        let g = Generator::new(toy_arch(), &mut ChaCha8Rng::seed_from_u64(5));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let zs: Vec<_> = (0..3).map(|_| sample_latent(&mut rng, 16)).collect();
        let batch = g.generate_batch(&zs).unwrap();
        for (z, clip) in zs.iter().zip(&batch) {
            assert_eq!(&g.generate(z).unwrap(), clip);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let g = Generator::new(toy_arch(), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(
            g.generate(&LatentVector::zeros(3)).unwrap_err(),
            Error::DimensionMismatch { expected: 16, found: 3 }
        );
    }

    #[test]
    fn latent_draws_in_range_and_reproducible() {
        let a = sample_latent(&mut ChaCha8Rng::seed_from_u64(4), 100);
        let b = sample_latent(&mut ChaCha8Rng::seed_from_u64(4), 100);
        assert_eq!(a, b);
        assert!(a.values.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn latent_component_means_are_near_zero() {
        // σ/√N = (1/√3)/√1e5 ≈ 0.0018, so 0.02 is over ten standard errors.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = 4;
        let mut sums = [0.0f64; 4];
        let n = 100_000;
        for _ in 0..n {
            for (s, v) in sums.iter_mut().zip(sample_latent(&mut rng, d).values) {
                *s += v as f64;
            }
        }
        assert!(sums.iter().all(|s| (s / n as f64).abs() < 0.02));
    }

    #[test]
    fn phase_shuffle_reflects_a_ramp() {
        let ramp = Tensor::new(&[1, 1, 8], (0..8).map(|v| v as f32).collect());
        let out = phase_shuffle_with_shifts(&ramp, &[2]).unwrap();
        assert_eq!(out.data(), &[1.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let out = phase_shuffle_with_shifts(&ramp, &[-2]).unwrap();
        assert_eq!(out.data(), &[2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 7.0, 6.0]);
    }

    #[test]
    fn phase_shuffle_zero_radius_is_identity_and_radius_is_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::new(&[2, 3, 5], (0..30).map(|v| v as f32 * 0.5).collect());
        assert_eq!(phase_shuffle(&x, 0, &mut rng).unwrap(), x);
        assert_eq!(phase_shuffle(&x, 2, &mut rng).unwrap().shape(), x.shape());
        assert_eq!(phase_shuffle(&x, 6, &mut rng).unwrap_err(), Error::ShuffleRadius { radius: 6, len: 5 });
    }

    #[test]
    fn one_step_gan_training_logs_finite_losses() {
        let arch = GeneratorArch { latent_dim: 4, model_dim: 2, layers: 2 };
        let len = arch.output_length();
        let real: Vec<AudioClip> = (0..4)
            .map(|k| {
                let s = (0..len).map(|t| 0.5 * libm::sinf(0.3 * (k + 1) as f32 * t as f32)).collect();
                AudioClip::new(s, SAMPLE_RATE).unwrap()
            })
            .collect();
        let cfg = GanTrainConfig {
            steps: 2,
            batch_size: 2,
            lr_generator: 1e-4,
            lr_critic: 1e-4,
            beta1: 0.5,
            beta2: 0.9,
            gp_weight: 10.0,
            phase_shuffle: 2,
            critic_steps: 2,
            checkpoint_every: 1,
            critic_model_dim: 2,
        };
        struct Count(usize);
        impl GanObserver for Count {
            fn checkpoint(&mut self, _: usize, _: &Generator, _: &Critic) -> Result<()> {
                self.0 += 1;
                Ok(())
            }
        }
        let mut obs = Count(0);
        let out = train_gan(&real, arch, &cfg, &mut ChaCha8Rng::seed_from_u64(3), &mut obs).unwrap();
        assert_eq!(out.log.critic_loss.len(), 4);
        assert_eq!(out.log.generator_loss.len(), 2);
        assert!(out.log.critic_loss.iter().chain(&out.log.generator_loss).all(|v| v.is_finite()));
        assert_eq!(obs.0, 2);
    }
}
