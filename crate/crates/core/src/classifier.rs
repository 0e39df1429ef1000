//! Spoken-digit classifier over spectrograms and the metrics built on it:
//! perceptual loss, inception score and accuracy.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{batch_spectrograms, spectrogram, AudioClip, Spectrogram, SpectrogramConfig};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::math;
use crate::nn::{cross_entropy, softmax, Adam, AdamConfig, Bound, ParamSet};
use crate::resnet::{ResNet, ResNetArch};
use crate::tensor::Tensor;

/// Forward passes in inference mode are run in chunks of this many spectrograms.
const EVAL_CHUNK: usize = 64;

/// Activations of the residual stages for one input, in stage order.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStack {
    pub blocks: Vec<Tensor>,
}

impl FeatureStack {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Mean over blocks of the per-block mean squared difference.
pub fn feature_distance(a: &FeatureStack, b: &FeatureStack) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    let mut total = 0.0;
    for (x, y) in a.blocks.iter().zip(&b.blocks) {
        if x.shape() != y.shape() {
            return Err(Error::ShapeMismatch { expected: x.shape().to_vec(), found: y.shape().to_vec() });
        }
        let sq: f64 = x
            .data()
            .iter()
            .zip(y.data())
            .map(|(&p, &q)| {
                let d = p as f64 - q as f64;
                d * d
            })
            .sum();
        total += sq / x.len() as f64;
    }
    Ok(total / a.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DigitClassifier {
    pub arch: ResNetArch,
    pub spec: SpectrogramConfig,
    /// `[bins, frames]` of the spectrograms the network was built for.
    pub input_shape: [usize; 2],
    pub params: ParamSet,
    net: ResNet,
}

impl DigitClassifier {
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
        let mut c = Self::new(arch, spec, clip_length, &mut ChaCha8Rng::seed_from_u64(0))?;
        c.params.load_values(values).map_err(Error::InvalidConfig)?;
        Ok(c)
    }

    pub fn num_classes(&self) -> usize {
        self.arch.outputs
    }

    /// Identifiers of the feature taps, one per residual stage.
    pub fn tap_names(&self) -> Vec<String> {
        (0..4).map(|s| format!("stage{s}")).collect()
    }

    fn check(&self, s: &Spectrogram) -> Result<()> {
        let found = [s.bins(), s.frames()];
        if found != self.input_shape {
            return Err(Error::ShapeMismatch { expected: self.input_shape.to_vec(), found: found.to_vec() });
        }
        Ok(())
    }

    /// Network forward on `[N, 1, bins, frames]`; returns the taps and the logits.
    pub fn forward(&self, g: &mut Graph, p: &mut Bound, x: Var) -> (Vec<Var>, Var) {
        let out = self.net.forward(g, p, x);
        (out.taps, out.head)
    }

    fn eval_chunks<T>(&self, specs: &[&Spectrogram], mut f: impl FnMut(&Graph, &[Var], Var) -> T) -> Result<Vec<T>> {
        let mut out = Vec::new();
        for chunk in specs.chunks(EVAL_CHUNK) {
            for s in chunk {
                self.check(s)?;
            }
            let mut g = Graph::new();
            let mut p = self.params.bind(&mut g, false);
            let x = g.leaf(batch_spectrograms(chunk));
            let (taps, logits) = self.forward(&mut g, &mut p, x);
            out.push(f(&g, &taps, logits));
        }
        Ok(out)
    }

    /// Class probabilities `[N, num_classes]`.
    pub fn probabilities(&self, specs: &[&Spectrogram]) -> Result<Tensor> {
        if specs.is_empty() {
            return Err(Error::Empty("spectrogram batch"));
        }
        let parts = self.eval_chunks(specs, |g, _, logits| softmax(g.value(logits)))?;
        let c = self.num_classes();
        let data: Vec<f32> = parts.into_iter().flat_map(Tensor::into_data).collect();
        Ok(Tensor::new(&[specs.len(), c], data))
    }

    pub fn classify(&self, s: &Spectrogram) -> Result<Vec<f32>> {
        Ok(self.probabilities(&[s])?.into_data())
    }

    pub fn classify_clips(&self, clips: &[&AudioClip]) -> Result<Tensor> {
        let specs = clips.iter().map(|c| spectrogram(c, &self.spec)).collect::<Result<Vec<_>>>()?;
        self.probabilities(&specs.iter().collect::<Vec<_>>())
    }

    pub fn predict(&self, specs: &[&Spectrogram]) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.probabilities(specs)?))
    }

    pub fn features(&self, s: &Spectrogram) -> Result<FeatureStack> {
        Ok(self
            .eval_chunks(&[s], |g, taps, _| FeatureStack {
                blocks: taps.iter().map(|&t| g.value(t).clone()).collect(),
            })?
            .remove(0))
    }

    /// Tap activations for a whole batch, one `[N, ...]` tensor per stage.
    pub fn batch_features(&self, x: &Tensor) -> Vec<Tensor> {
        let mut g = Graph::new();
        let mut p = self.params.bind(&mut g, false);
        let xv = g.leaf(x.clone());
        let (taps, _) = self.forward(&mut g, &mut p, xv);
        taps.iter().map(|&t| g.value(t).clone()).collect()
    }

    pub fn perceptual_loss(&self, a: &Spectrogram, b: &Spectrogram) -> Result<f64> {
        let fa = self.features(a)?;
        let fb = self.features(b)?;
        feature_distance(&fa, &fb)
    }

    /// Differentiable perceptual loss of `[N, 1, bins, frames]` inputs against fixed target taps.
    /// The classifier runs in inference mode, so only first-order gradients are available.
    pub fn perceptual_var(&self, g: &mut Graph, p: &mut Bound, x: Var, target: &[Tensor]) -> Var {
        let (taps, _) = self.forward(g, p, x);
        let mut total: Option<Var> = None;
        for (&t, tgt) in taps.iter().zip(target) {
            let tv = g.leaf(tgt.clone());
            let d = g.sub(t, tv);
            let sq = g.square(d);
            let m = g.mean(sq);
            total = Some(match total {
                Some(acc) => g.add(acc, m),
                None => m,
            });
        }
        let total = total.expect("classifier has feature taps");
        g.scale(total, 1.0 / taps.len() as f32)
    }

    pub fn inception_score(&self, clips: &[&AudioClip], splits: usize) -> Result<(f64, f64)> {
        if clips.is_empty() {
            return Err(Error::Empty("inception score input"));
        }
        inception_score(&self.classify_clips(clips)?, splits)
    }

    /// Fraction of labeled clips whose most probable class matches the label.
    pub fn accuracy(&self, data: &LabeledDataset) -> Result<f64> {
        let probs = self.classify_clips(&data.clips())?;
        accuracy(&argmax_rows(&probs), &data.labels())
    }
}

pub fn argmax_rows(probs: &Tensor) -> Vec<usize> {
    let c = probs.shape()[1];
    probs
        .data()
        .chunks(c)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

pub fn accuracy(predicted: &[usize], labels: &[usize]) -> Result<f64> {
    if predicted.len() != labels.len() {
        return Err(Error::LengthMismatch { left: predicted.len(), right: labels.len() });
    }
    if labels.is_empty() {
        return Err(Error::Empty("accuracy input"));
    }
    let hits = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Inception score of `[N, C]` class probabilities: for each of `splits` equal contiguous
/// parts, `exp(mean KL(p(y|x) ‖ p(y)))`. Returns the mean and population standard deviation.
pub fn inception_score(probs: &Tensor, splits: usize) -> Result<(f64, f64)> {
    let n = probs.shape()[0];
    let c = probs.shape()[1];
    if n == 0 {
        return Err(Error::Empty("inception score input"));
    }
    if splits == 0 || splits > n {
        return Err(Error::InvalidConfig(format!("{splits} splits for {n} inputs")));
    }
    let part = n / splits;
    let mut scores = Vec::with_capacity(splits);
    for k in 0..splits {
        let rows = &probs.data()[k * part * c..(k + 1) * part * c];
        let mut marginal = vec![0.0f64; c];
        for row in rows.chunks(c) {
            for (m, &p) in marginal.iter_mut().zip(row) {
                *m += p as f64 / part as f64;
            }
        }
        let mut kl = 0.0;
        for row in rows.chunks(c) {
            for (&p, &m) in row.iter().zip(&marginal) {
                let p = p as f64;
                if p > 0.0 {
                    kl += p * (math::ln64(p) - math::ln64(m));
                }
            }
        }
        scores.push(math::exp64(kl / part as f64));
    }
    let mean = scores.iter().sum::<f64>() / splits as f64;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / splits as f64;
    Ok((mean, math::sqrt64(var)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    /// Stop after this many updates even if epochs remain.
    pub max_steps: Option<usize>,
    pub holdout_fraction: f64,
}

impl Default for ClassifierTrainConfig {
    fn default() -> Self {
        Self { epochs: 250, batch_size: 64, lr: 1e-3, max_steps: None, holdout_fraction: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub loss: Vec<f32>,
    pub train_accuracy: f64,
    pub heldout_accuracy: f64,
    pub heldout_size: usize,
}

/// Train on the non-held-out part of `data`; accuracy is reported on the held-out part.
pub fn train_classifier(
    data: &LabeledDataset,
    arch: ResNetArch,
    spec: SpectrogramConfig,
    cfg: &ClassifierTrainConfig,
    seed: u64,
) -> Result<(DigitClassifier, ClassifierReport)> {
    if data.num_present_classes() < 2 {
        return Err(Error::InvalidConfig("classifier training needs at least two classes".into()));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 || !(cfg.lr > 0.0) {
        return Err(Error::InvalidConfig("classifier training values must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (train, held) = data.split_holdout(cfg.holdout_fraction, seed)?;
    let mut clf = DigitClassifier::new(arch, spec, data.clip_length(), &mut rng)?;
    let specs = train.items.iter().map(|i| spectrogram(&i.clip, &clf.spec)).collect::<Result<Vec<_>>>()?;
    let labels = train.labels();
    let mut opt = Adam::new(&clf.params, AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
    let mut order: Vec<usize> = (0..specs.len()).collect();
    let mut loss_log = Vec::new();
    'outer: for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            if cfg.max_steps.is_some_and(|m| loss_log.len() >= m) {
                break 'outer;
            }
            let x = batch_spectrograms(&batch.iter().map(|&i| &specs[i]).collect::<Vec<_>>());
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let mut g = Graph::new();
            let mut p = clf.params.bind(&mut g, true);
            let xv = g.leaf(x);
            let (_, logits) = clf.forward(&mut g, &mut p, xv);
            let loss = cross_entropy(&mut g, logits, &y);
            let lv = g.value(loss).item();
            if !lv.is_finite() {
                return Err(Error::NonFinite { what: "classifier loss", at: format!("epoch {epoch} batch {b}") });
            }
            loss_log.push(lv);
            let grads = p.backward(&mut g, loss);
            opt.apply(&mut clf.params, grads);
        }
    }
    let train_accuracy = clf.accuracy(&train)?;
    let heldout_accuracy = clf.accuracy(&held)?;
    Ok((clf, ClassifierReport { loss: loss_log, train_accuracy, heldout_accuracy, heldout_size: held.len() }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_digit, LabeledItem};

    fn tiny_arch() -> ResNetArch {
        ResNetArch {
            stem_kernel: 3,
            stem_stride: 2,
            stem_pool: false,
            widths: [4, 4, 8, 8],
            blocks_per_stage: 1,
            outputs: 10,
        }
    }

    fn spec() -> SpectrogramConfig {
        SpectrogramConfig { window_size: 64, hop: 32, ..SpectrogramConfig::default() }
    }

    #[test]
    fn inception_score_extremes() {
        let uniform = Tensor::full(&[20, 10], 0.1);
        let (m, s) = inception_score(&uniform, 10).unwrap();
        assert!((m - 1.0).abs() < 1e-6 && s.abs() < 1e-6);
        let mut confident = Tensor::zeros(&[100, 10]);
        for i in 0..100 {
            confident.data_mut()[i * 10 + i % 10] = 1.0;
        }
        let (m, _) = inception_score(&confident, 10).unwrap();
        assert!((m - 10.0).abs() < 1e-6);
        assert!(inception_score(&confident, 0).is_err());
    }

    #[test]
    fn classify_is_a_deterministic_distribution_and_checks_shape() {
        let clf = DigitClassifier::new(tiny_arch(), spec(), 1024, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let clip = synth_digit(3, 1024, &mut ChaCha8Rng::seed_from_u64(1));
        let s = spectrogram(&clip, &clf.spec).unwrap();
        let p = clf.classify(&s).unwrap();
        assert_eq!(p.len(), 10);
        assert!((p.iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs() < 1e-6);
        assert_eq!(p, clf.classify(&s).unwrap());
        let other = spectrogram(&AudioClip::silence(2048), &clf.spec).unwrap();
        assert!(matches!(clf.classify(&other), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn features_and_perceptual_loss_contract() {
        let clf = DigitClassifier::new(tiny_arch(), spec(), 1024, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let zero = Spectrogram::from_tensor(Tensor::zeros(&[clf.input_shape[0], clf.input_shape[1]]));
        let mut hot = zero.clone();
        let mut t = hot.values().clone();
        t.data_mut()[40] = 5.0;
        hot = Spectrogram::from_tensor(t);
        let fz = clf.features(&zero).unwrap();
        assert_eq!(fz.len(), 4);
        assert_eq!(fz, clf.features(&zero).unwrap());
        assert_ne!(fz, clf.features(&hot).unwrap());
        assert_eq!(clf.perceptual_loss(&zero, &zero).unwrap(), 0.0);
        let ab = clf.perceptual_loss(&zero, &hot).unwrap();
        assert!(ab > 0.0);
        assert_eq!(ab, clf.perceptual_loss(&hot, &zero).unwrap());
    }

    #[test]
    fn perceptual_var_matches_perceptual_loss() {
        let clf = DigitClassifier::new(tiny_arch(), spec(), 1024, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = spectrogram(&synth_digit(1, 1024, &mut rng), &clf.spec).unwrap();
        let b = spectrogram(&synth_digit(6, 1024, &mut rng), &clf.spec).unwrap();
        let target = clf.batch_features(&batch_spectrograms(&[&b]));
        let mut g = Graph::new();
        let mut p = clf.params.bind(&mut g, false);
        let x = g.leaf(batch_spectrograms(&[&a]));
        let l = clf.perceptual_var(&mut g, &mut p, x, &target);
        let direct = clf.perceptual_loss(&a, &b).unwrap();
        assert!((g.value(l).item() as f64 - direct).abs() < 1e-5 * (1.0 + direct));
    }

    #[test]
    fn two_class_tones_are_learned() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let items = (0..40)
            .map(|i| {
                let label = if i % 2 == 0 { 0 } else { 8 };
                LabeledItem { clip: synth_digit(label, 1024, &mut rng), label, speaker: String::new() }
            })
            .collect();
        let data = LabeledDataset::new(items, "toy").unwrap();
        let cfg =
            ClassifierTrainConfig { epochs: 100, batch_size: 8, lr: 3e-3, max_steps: Some(60), holdout_fraction: 0.2 };
        let (_, report) = train_classifier(&data, tiny_arch(), spec(), &cfg, 9).unwrap();
        assert!(report.heldout_accuracy > 0.9, "{report:?}");
        assert!(report.loss.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn single_class_is_rejected() {
        let items =
            (0..4).map(|_| LabeledItem { clip: AudioClip::silence(1024), label: 2, speaker: String::new() }).collect();
        let data = LabeledDataset::new(items, "toy").unwrap();
        assert!(train_classifier(&data, tiny_arch(), spec(), &ClassifierTrainConfig::default(), 0).is_err());
    }
}
