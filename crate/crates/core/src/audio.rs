//! Audio clips and the log-magnitude spectrogram transform.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::FftPlan;
use crate::graph::{CustomOp, Graph, Var};
use crate::math;
use crate::tensor::Tensor;

pub const SAMPLE_RATE: u32 = 16_000;
pub const CANONICAL_LENGTH: usize = 16_384;

/// Fixed-length mono waveform with samples in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioClip {
    /// Wrap samples as-is; they must be finite and within `[-1, 1]`.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("audio clip"));
        }
        if let Some((i, v)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::InvalidAudio(format!("sample {i} = {v} is outside [-1, 1]")));
        }
        Ok(Self { samples, sample_rate })
    }

    /// Zero-pad or truncate to `length`, then validate.
    pub fn fit(mut samples: Vec<f32>, sample_rate: u32, length: usize) -> Result<Self> {
        samples.resize(length, 0.0);
        Self::new(samples, sample_rate)
    }

    pub fn silence(length: usize) -> Self {
        Self { samples: vec![0.0; length], sample_rate: SAMPLE_RATE }
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramConfig {
    pub window_size: usize,
    pub hop: usize,
    pub log_floor: f32,
    pub use_log: bool,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        Self { window_size: 256, hop: 128, log_floor: 1e-6, use_log: true }
    }
}

impl SpectrogramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 {
            return Err(Error::InvalidConfig("window_size must be positive".into()));
        }
        if self.hop == 0 || self.hop > self.window_size {
            return Err(Error::InvalidConfig("hop must satisfy 0 < hop <= window_size".into()));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::InvalidConfig("log_floor must be positive".into()));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.window_size / 2 + 1
    }

    /// Frames for a clip of `len` samples (no end padding).
    pub fn frames(&self, len: usize) -> Result<usize> {
        if self.window_size > len {
            return Err(Error::WindowTooLong { window: self.window_size, len });
        }
        Ok(1 + (len - self.window_size) / self.hop)
    }

    /// `(bins, frames)` for a clip of `len` samples.
    pub fn shape(&self, len: usize) -> Result<(usize, usize)> {
        Ok((self.bins(), self.frames(len)?))
    }

    /// Periodic Hann window.
    pub fn window(&self) -> Vec<f64> {
        let n = self.window_size as f64;
        (0..self.window_size).map(|t| 0.5 - 0.5 * math::cos64(2.0 * core::f64::consts::PI * t as f64 / n)).collect()
    }
}

/// Time-frequency magnitude image, stored `[bins, frames]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    values: Tensor,
}

impl Spectrogram {
    pub fn from_tensor(values: Tensor) -> Self {
        assert_eq!(values.shape().len(), 2, "spectrogram must be [bins, frames]");
        Self { values }
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn bins(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn frames(&self) -> usize {
        self.values.shape()[1]
    }

    /// Element count used when averaging over the image.
    pub fn n_elements(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, bin: usize, frame: usize) -> f32 {
        self.values.data()[bin * self.frames() + frame]
    }

    /// Mean absolute difference against another spectrogram of the same shape.
    pub fn mean_abs_diff(&self, other: &Spectrogram) -> Result<f64> {
        if self.values.shape() != other.values.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.values.shape().to_vec(),
                found: other.values.shape().to_vec(),
            });
        }
        let total: f64 =
            self.values.data().iter().zip(other.values.data()).map(|(&a, &b)| (a as f64 - b as f64).abs()).sum();
        Ok(total / self.n_elements() as f64)
    }
}

/// Complex STFT of one signal: `frames x bins` real and imaginary parts.
struct Stft {
    re: Vec<f64>,
    im: Vec<f64>,
}

fn stft(samples: &[f32], cfg: &SpectrogramConfig, plan: &FftPlan, window: &[f64]) -> Result<Stft> {
    let frames = cfg.frames(samples.len())?;
    let (n, bins) = (cfg.window_size, cfg.bins());
    let mut re = Vec::with_capacity(frames * bins);
    let mut im = Vec::with_capacity(frames * bins);
    let (mut fr, mut fi) = (vec![0.0f64; n], vec![0.0f64; n]);
    for f in 0..frames {
        let start = f * cfg.hop;
        for t in 0..n {
            fr[t] = samples[start + t] as f64 * window[t];
            fi[t] = 0.0;
        }
        plan.forward(&mut fr, &mut fi);
        re.extend_from_slice(&fr[..bins]);
        im.extend_from_slice(&fi[..bins]);
    }
    Ok(Stft { re, im })
}

#[inline]
fn magnitude_value(mag: f64, cfg: &SpectrogramConfig) -> f32 {
    if cfg.use_log {
        math::ln64(mag.max(cfg.log_floor as f64)) as f32
    } else {
        mag as f32
    }
}

/// Writes `[bins, frames]` values for one STFT.
fn fill_values(st: &Stft, cfg: &SpectrogramConfig, frames: usize, out: &mut [f32]) {
    let bins = cfg.bins();
    for f in 0..frames {
        for k in 0..bins {
            let i = f * bins + k;
            let mag = math::sqrt64(st.re[i] * st.re[i] + st.im[i] * st.im[i]);
            out[k * frames + f] = magnitude_value(mag, cfg);
        }
    }
}

/// Magnitude STFT (Hann window, no end padding), optionally log-compressed.
pub fn spectrogram(clip: &AudioClip, cfg: &SpectrogramConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    let (bins, frames) = cfg.shape(clip.len())?;
    let plan = FftPlan::new(cfg.window_size);
    let window = cfg.window();
    let st = stft(clip.samples(), cfg, &plan, &window)?;
    let mut values = vec![0.0f32; bins * frames];
    fill_values(&st, cfg, frames, &mut values);
    Ok(Spectrogram { values: Tensor::new(&[bins, frames], values) })
}

struct SpectrogramOp {
    cfg: SpectrogramConfig,
    frames: usize,
    len: usize,
    stfts: Vec<Stft>,
}

impl CustomOp for SpectrogramOp {
    fn name(&self) -> &'static str {
        "spectrogram"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Vec<Option<Tensor>> {
        let cfg = &self.cfg;
        let (n, bins, frames) = (cfg.window_size, cfg.bins(), self.frames);
        let plan = FftPlan::new(n);
        let window = cfg.window();
        let floor = cfg.log_floor as f64;
        let mut dx = vec![0.0f32; inputs[0].len()];
        let (mut yr, mut yi) = (vec![0.0f64; n], vec![0.0f64; n]);
        for (b, st) in self.stfts.iter().enumerate() {
            let gsample = &grad.data()[b * bins * frames..][..bins * frames];
            let dsample = &mut dx[b * self.len..][..self.len];
            for f in 0..frames {
                yr.iter_mut().for_each(|v| *v = 0.0);
                yi.iter_mut().for_each(|v| *v = 0.0);
                for k in 0..bins {
                    let i = f * bins + k;
                    let (xr, xi) = (st.re[i], st.im[i]);
                    let mag = math::sqrt64(xr * xr + xi * xi);
                    if mag == 0.0 || (cfg.use_log && mag < floor) {
                        continue;
                    }
                    let dvalue_dmag = if cfg.use_log { 1.0 / mag } else { 1.0 };
                    let c = gsample[k * frames + f] as f64 * dvalue_dmag / mag;
                    // conj(c·X) for the forward-transform trick below
                    yr[k] = c * xr;
                    yi[k] = -c * xi;
                }
                // Re Σ_k Y_k e^{+iωt} = Re FFT(conj Y)_t
                plan.forward(&mut yr, &mut yi);
                let start = f * cfg.hop;
                for t in 0..n {
                    dsample[start + t] += (window[t] * yr[t]) as f32;
                }
            }
        }
        vec![Some(Tensor::new(inputs[0].shape(), dx))]
    }
}

/// Differentiable batched spectrogram: `[N, L]` or `[N, 1, L]` audio to `[N, 1, bins, frames]`.
pub fn spectrogram_var(g: &mut Graph, audio: Var, cfg: &SpectrogramConfig) -> Result<Var> {
    cfg.validate()?;
    let t = g.value(audio);
    let batch = t.shape()[0];
    let len = *t.shape().last().unwrap();
    if t.len() != batch * len {
        return Err(Error::ShapeMismatch { expected: alloc::vec![batch, len], found: t.shape().to_vec() });
    }
    let (bins, frames) = cfg.shape(len)?;
    let plan = FftPlan::new(cfg.window_size);
    let window = cfg.window();
    let mut out = vec![0.0f32; batch * bins * frames];
    let mut stfts = Vec::with_capacity(batch);
    for b in 0..batch {
        let st = stft(&t.data()[b * len..][..len], cfg, &plan, &window)?;
        fill_values(&st, cfg, frames, &mut out[b * bins * frames..][..bins * frames]);
        stfts.push(st);
    }
    let op = SpectrogramOp { cfg: *cfg, frames, len, stfts };
    Ok(g.custom_boxed(&[audio], Tensor::new(&[batch, 1, bins, frames], out), Box::new(op)))
}

/// Stack spectrograms into a `[N, 1, bins, frames]` network input.
pub fn batch_spectrograms(specs: &[&Spectrogram]) -> Tensor {
    let (bins, frames) = (specs[0].bins(), specs[0].frames());
    let mut data = Vec::with_capacity(specs.len() * bins * frames);
    for s in specs {
        assert_eq!((s.bins(), s.frames()), (bins, frames), "spectrogram batch shape mismatch");
        data.extend_from_slice(s.values.data());
    }
    Tensor::new(&[specs.len(), 1, bins, frames], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, len: usize) -> AudioClip {
        let s = (0..len)
            .map(|t| math::sin64(2.0 * core::f64::consts::PI * freq * t as f64 / SAMPLE_RATE as f64) as f32)
            .collect();
        AudioClip::new(s, SAMPLE_RATE).unwrap()
    }

    #[test]
    fn silence_maps_to_log_floor() {
        let cfg = SpectrogramConfig::default();
        let s = spectrogram(&AudioClip::silence(CANONICAL_LENGTH), &cfg).unwrap();
        let expected = math::ln64(1e-6f32 as f64) as f32;
        assert!(s.values().data().iter().all(|&v| v == expected));
    }

    #[test]
    fn frame_count_without_end_padding() {
        let cfg = SpectrogramConfig::default();
        let s = spectrogram(&AudioClip::silence(CANONICAL_LENGTH), &cfg).unwrap();
        assert_eq!((s.bins(), s.frames()), (129, 127));
    }

    #[test]
    fn sine_peaks_at_expected_bin() {
        let cfg = SpectrogramConfig::default();
        let clip = sine(440.0, CANONICAL_LENGTH);
        // Direct DFT of one Hann-windowed frame as the oracle.
        let window = cfg.window();
        let frame = 10;
        let mut best = (0, f64::MIN);
        for k in 0..cfg.bins() {
            let (mut re, mut im) = (0.0, 0.0);
            for t in 0..cfg.window_size {
                let x = clip.samples()[frame * cfg.hop + t] as f64 * window[t];
                let ang = -2.0 * core::f64::consts::PI * (k * t) as f64 / cfg.window_size as f64;
                re += x * math::cos64(ang);
                im += x * math::sin64(ang);
            }
            let mag = (re * re + im * im).sqrt();
            if mag > best.1 {
                best = (k, mag);
            }
        }
        assert_eq!(best.0, 7);
        let s = spectrogram(&clip, &cfg).unwrap();
        let argmax = (0..s.bins()).max_by(|&a, &b| s.get(a, frame).partial_cmp(&s.get(b, frame)).unwrap()).unwrap();
        assert_eq!(argmax, 7);
    }

    #[test]
    fn window_longer_than_clip_is_rejected() {
        let cfg = SpectrogramConfig::default();
        let clip = AudioClip::silence(100);
        assert_eq!(spectrogram(&clip, &cfg), Err(Error::WindowTooLong { window: 256, len: 100 }));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad_hop = SpectrogramConfig { hop: 300, ..Default::default() };
        assert!(bad_hop.validate().is_err());
        let bad_floor = SpectrogramConfig { log_floor: 0.0, ..Default::default() };
        assert!(bad_floor.validate().is_err());
    }

    #[test]
    fn out_of_range_samples_are_rejected() {
        assert!(AudioClip::new(vec![0.0, 1.5], SAMPLE_RATE).is_err());
        assert!(AudioClip::new(vec![f32::NAN], SAMPLE_RATE).is_err());
        let clip = AudioClip::fit(vec![0.5; 10], SAMPLE_RATE, 16).unwrap();
        assert_eq!(&clip.samples()[8..], &[0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn batched_op_matches_single_clip_transform() {
        let cfg = SpectrogramConfig { window_size: 64, hop: 32, ..Default::default() };
        let a = sine(700.0, 512);
        let b = sine(1900.0, 512);
        let mut data = a.samples().to_vec();
        data.extend_from_slice(b.samples());
        let mut g = Graph::new();
        let x = g.leaf(Tensor::new(&[2, 512], data));
        let s = spectrogram_var(&mut g, x, &cfg).unwrap();
        let v = g.value(s);
        let (sa, sb) = (spectrogram(&a, &cfg).unwrap(), spectrogram(&b, &cfg).unwrap());
        let per = sa.n_elements();
        assert_eq!(&v.data()[..per], sa.values().data());
        assert_eq!(&v.data()[per..], sb.values().data());
    }

    #[test]
    fn spectrogram_gradient_matches_finite_differences() {
        for use_log in [true, false] {
            let cfg = SpectrogramConfig { window_size: 16, hop: 8, use_log, ..Default::default() };
            // Pseudo-random signal: broadband, so no bin sits near zero where log is ill-conditioned.
            let x0: Vec<f32> = (0..48).map(|t| ((t * 7919 + 13) % 101) as f32 / 101.0 - 0.5).collect();
            let weights: Vec<f32> = (0..9 * 5).map(|i| ((i * 17) % 7) as f32 * 0.1 - 0.3).collect();
            let f = |x: &[f32]| -> f64 {
                let mut g = Graph::new();
                let xv = g.leaf(Tensor::new(&[1, 48], x.to_vec()));
                let s = spectrogram_var(&mut g, xv, &cfg).unwrap();
                g.value(s).data().iter().zip(&weights).map(|(&a, &w)| a as f64 * w as f64).sum()
            };
            let mut g = Graph::new();
            let xv = g.leaf(Tensor::new(&[1, 48], x0.clone()));
            let s = spectrogram_var(&mut g, xv, &cfg).unwrap();
            let w = g.leaf(Tensor::new(&[1, 1, 9, 5], weights.clone()));
            let p = g.mul(s, w);
            let r = g.sum(p);
            let gx = g.grad(r, &[xv], false)[0];
            for i in 0..48 {
                let (mut p, mut m) = (x0.clone(), x0.clone());
                p[i] += 1e-3;
                m[i] -= 1e-3;
                let num = (f(&p) - f(&m)) / 2e-3;
                let ana = g.value(gx).data()[i] as f64;
                assert!((num - ana).abs() < 2e-2 * (1.0 + num.abs()), "log={use_log} {i}: {num} vs {ana}");
            }
        }
    }
}
