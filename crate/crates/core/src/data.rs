//! Labeled digit datasets, held-out splits, synthetic toy digits and run-time fake batches.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{AudioClip, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::generator::{sample_latent, Generator, LatentVector};
use crate::math;

pub const NUM_CLASSES: usize = 10;
pub const DIGIT_NAMES: [&str; NUM_CLASSES] =
    ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"];

/// Digit index for a folder name such as `"three"`, `"Three"` or `"3"`.
pub fn label_from_name(name: &str) -> Option<usize> {
    let lower = name.trim().to_ascii_lowercase();
    DIGIT_NAMES.iter().position(|d| *d == lower).or_else(|| lower.parse::<usize>().ok().filter(|&v| v < NUM_CLASSES))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledItem {
    pub clip: AudioClip,
    pub label: usize,
    pub speaker: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub items: Vec<LabeledItem>,
    pub split: String,
}

impl LabeledDataset {
    pub fn new(items: Vec<LabeledItem>, split: impl Into<String>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        let len = items[0].clip.len();
        for item in &items {
            if item.label >= NUM_CLASSES {
                return Err(Error::InvalidConfig(format!("label {} out of range", item.label)));
            }
            if item.clip.len() != len {
                return Err(Error::LengthMismatch { left: len, right: item.clip.len() });
            }
        }
        Ok(Self { items, split: split.into() })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn clip_length(&self) -> usize {
        self.items[0].clip.len()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.label).collect()
    }

    pub fn clips(&self) -> Vec<&AudioClip> {
        self.items.iter().map(|i| &i.clip).collect()
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for item in &self.items {
            counts[item.label] += 1;
        }
        counts
    }

    pub fn num_present_classes(&self) -> usize {
        self.class_counts().iter().filter(|&&c| c > 0).count()
    }

    /// Stratified split: about `fraction` of every class goes to the held-out part,
    /// always leaving at least one example of each class for training.
    pub fn split_holdout(&self, fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::InvalidConfig(format!("held-out fraction {fraction} outside [0, 1)")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut train = Vec::new();
        let mut held = Vec::new();
        for class in 0..NUM_CLASSES {
            let mut idx: Vec<usize> = (0..self.len()).filter(|&i| self.items[i].label == class).collect();
            if idx.is_empty() {
                continue;
            }
            idx.shuffle(&mut rng);
            let take = (math::round64(fraction * idx.len() as f64) as usize).min(idx.len() - 1);
            held.extend(idx[..take].iter().copied());
            train.extend(idx[take..].iter().copied());
        }
        train.sort_unstable();
        held.sort_unstable();
        let pick = |ids: &[usize]| ids.iter().map(|&i| self.items[i].clone()).collect::<Vec<_>>();
        let train = LabeledDataset::new(pick(&train), "train")?;
        if held.is_empty() {
            return Err(Error::Empty("held-out split"));
        }
        let held = LabeledDataset::new(pick(&held), "heldout")?;
        Ok((train, held))
    }

    /// First `n` items of each class, in dataset order.
    pub fn take_per_class(&self, n: usize) -> Result<LabeledDataset> {
        let mut counts = [0usize; NUM_CLASSES];
        let items = self
            .items
            .iter()
            .filter(|i| {
                counts[i.label] += 1;
                counts[i.label] <= n
            })
            .cloned()
            .collect();
        LabeledDataset::new(items, self.split.clone())
    }
}

/// One synthetic "digit": class-specific tone (even labels) or rising chirp (odd labels)
/// with jittered pitch, random phase, a smooth onset envelope and light noise.
pub fn synth_digit(label: usize, length: usize, rng: &mut (impl Rng + ?Sized)) -> AudioClip {
    assert!(label < NUM_CLASSES);
    let sr = SAMPLE_RATE as f64;
    let base = 300.0 + 320.0 * label as f64;
    let f0 = base * rng.random_range(0.97..1.03);
    let sweep = if label % 2 == 1 { 1.5 } else { 1.0 };
    let amp = rng.random_range(0.45..0.75);
    let phase = rng.random_range(0.0..core::f64::consts::TAU);
    let start = rng.random_range(0.0..0.2) * length as f64;
    let dur = rng.random_range(0.5..0.7) * length as f64;
    let ramp = (0.1 * dur).max(1.0);
    let duration_s = dur / sr;
    // Keep the second harmonic below Nyquist.
    let harmonic = if 2.0 * f0 * sweep < 0.48 * sr { 0.3 } else { 0.0 };
    let mut samples = Vec::with_capacity(length);
    for t in 0..length {
        let local = t as f64 - start;
        let env = if local < 0.0 || local > dur {
            0.0
        } else {
            let edge = local.min(dur - local).min(ramp) / ramp;
            0.5 - 0.5 * math::cos64(core::f64::consts::PI * edge)
        };
        let ts = local.max(0.0) / sr;
        // Instantaneous frequency rises linearly from f0 to sweep·f0 over the voiced part.
        let k = (sweep - 1.0) * f0 / duration_s;
        let arg = core::f64::consts::TAU * (f0 * ts + 0.5 * k * ts * ts) + phase;
        let tone = math::sin64(arg) + harmonic * math::sin64(2.0 * arg);
        let noise = rng.random_range(-0.01..0.01);
        samples.push(((amp * env * tone / 1.3) + noise).clamp(-1.0, 1.0) as f32);
    }
    AudioClip::new(samples, SAMPLE_RATE).expect("synthetic samples are bounded")
}

/// Balanced synthetic digit set with `per_class` examples of each of the ten classes.
pub fn synth_digits(per_class: usize, length: usize, rng: &mut (impl Rng + ?Sized)) -> Result<LabeledDataset> {
    let mut items = Vec::with_capacity(per_class * NUM_CLASSES);
    for i in 0..per_class {
        for label in 0..NUM_CLASSES {
            items.push(LabeledItem { clip: synth_digit(label, length, rng), label, speaker: format!("synth{i:04}") });
        }
    }
    LabeledDataset::new(items, "synthetic")
}

/// Pairs of fresh latents and the clips the generator produces from them.
pub struct FakeBatchSource<'a> {
    pub generator: &'a Generator,
    pub batch_size: usize,
}

impl FakeBatchSource<'_> {
    pub fn next_fake_batch(&self, rng: &mut (impl Rng + ?Sized)) -> Result<(Vec<LatentVector>, Vec<AudioClip>)> {
        let d = self.generator.latent_dim();
        let zs: Vec<LatentVector> = (0..self.batch_size).map(|_| sample_latent(rng, d)).collect();
        let clips = self.generator.generate_batch(&zs)?;
        Ok((zs, clips))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::GeneratorArch;

    #[test]
    fn label_names_parse() {
        assert_eq!(label_from_name("three"), Some(3));
        assert_eq!(label_from_name("Nine"), Some(9));
        assert_eq!(label_from_name("7"), Some(7));
        assert_eq!(label_from_name("ten"), None);
        assert_eq!(label_from_name("12"), None);
    }

    #[test]
    fn split_is_stratified_disjoint_and_seeded() {
        let data = synth_digits(10, 256, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let (train, held) = data.split_holdout(0.1, 7).unwrap();
        assert_eq!(held.class_counts(), [1; NUM_CLASSES]);
        assert_eq!(train.class_counts(), [9; NUM_CLASSES]);
        let (train2, held2) = data.split_holdout(0.1, 7).unwrap();
        assert_eq!((train, held.clone()), (train2, held2));
        for h in &held.items {
            assert_eq!(data.items.iter().filter(|i| *i == h).count(), 1);
        }
    }

    #[test]
    fn synthetic_digits_are_valid_and_reproducible() {
        let a = synth_digits(2, 1024, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = synth_digits(2, 1024, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        assert!(a.items.iter().all(|i| i.clip.samples().iter().any(|s| s.abs() > 0.1)));
    }

    #[test]
    fn fake_batches_pair_latents_with_clips() {
        let g =
            Generator::new(GeneratorArch { latent_dim: 8, model_dim: 2, layers: 2 }, &mut ChaCha8Rng::seed_from_u64(1));
        let src = FakeBatchSource { generator: &g, batch_size: 4 };
        let (zs, clips) = src.next_fake_batch(&mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!((zs.len(), clips.len()), (4, 4));
        for (z, c) in zs.iter().zip(&clips) {
            assert_eq!(&g.generate(z).unwrap(), c);
        }
        let (zs2, _) = src.next_fake_batch(&mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(zs, zs2);
    }

    #[test]
    fn dataset_rejects_bad_labels_and_lengths() {
        let item = |label, len| LabeledItem { clip: AudioClip::silence(len), label, speaker: String::new() };
        assert!(LabeledDataset::new(Vec::new(), "x").is_err());
        assert!(LabeledDataset::new(alloc::vec![item(10, 4)], "x").is_err());
        assert!(LabeledDataset::new(alloc::vec![item(1, 4), item(2, 5)], "x").is_err());
    }
}
