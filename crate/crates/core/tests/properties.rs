use audinv_core::audio::{spectrogram, AudioClip, Spectrogram, SpectrogramConfig, SAMPLE_RATE};
use audinv_core::classifier::inception_score;
use audinv_core::data::{synth_digits, FakeBatchSource};
use audinv_core::generator::{phase_shuffle_with_shifts, sample_latent, Generator, GeneratorArch};
use audinv_core::inversion::stochastic_clip;
use audinv_core::metrics::{mse_raw, ssim};
use audinv_core::tensor::Tensor;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn clip(samples: Vec<f32>) -> AudioClip {
    AudioClip::new(samples, SAMPLE_RATE).unwrap()
}

fn image(h: usize, w: usize, data: Vec<f32>) -> Spectrogram {
    Spectrogram::from_tensor(Tensor::new(&[h, w], data))
}

proptest! {
    #[test]
    fn mse_is_symmetric(a in prop::collection::vec(-1.0f32..1.0, 64), b in prop::collection::vec(-1.0f32..1.0, 64)) {
        let (x, y) = (clip(a), clip(b));
        prop_assert_eq!(mse_raw(&x, &y).unwrap(), mse_raw(&y, &x).unwrap());
        prop_assert_eq!(mse_raw(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn ssim_is_symmetric_and_bounded(a in prop::collection::vec(-5.0f32..5.0, 100), b in prop::collection::vec(-5.0f32..5.0, 100)) {
        let (x, y) = (image(10, 10, a), image(10, 10, b));
        let s = ssim(&x, &y).unwrap();
        prop_assert_eq!(s, ssim(&y, &x).unwrap());
        prop_assert!((-1.0..=1.0).contains(&s));
        prop_assert_eq!(ssim(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn stochastic_clip_is_idempotent(z in prop::collection::vec(-3.0f32..3.0, 1..40), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let once = stochastic_clip(&z, -1.0, 1.0, &mut rng);
        prop_assert!(once.iter().all(|v| (-1.0..=1.0).contains(v)));
        for (a, b) in z.iter().zip(&once) {
            if (-1.0..=1.0).contains(a) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        prop_assert_eq!(stochastic_clip(&once, -1.0, 1.0, &mut rng), once);
    }

    #[test]
    fn inception_score_is_bounded(raw in prop::collection::vec(0.01f32..1.0, 40 * 10)) {
        let rows: Vec<f32> = raw
            .chunks(10)
            .flat_map(|r| {
                let s: f32 = r.iter().sum();
                r.iter().map(move |v| v / s).collect::<Vec<_>>()
            })
            .collect();
        let (mean, _) = inception_score(&Tensor::new(&[40, 10], rows), 4).unwrap();
        prop_assert!((1.0 - 1e-9..=10.0 + 1e-9).contains(&mean));
    }
}

#[test]
fn sample_latent_passes_ks_against_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 10_000;
    let mut xs: Vec<f64> = (0..n / 10).flat_map(|_| sample_latent(&mut rng, 10).values).map(|v| v as f64).collect();
    assert!(xs.iter().all(|v| (-1.0..=1.0).contains(v)));
    xs.sort_by(f64::total_cmp);
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = (x + 1.0) / 2.0;
            (cdf - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - cdf).abs())
        })
        .fold(0.0, f64::max);
    // Asymptotic critical value at significance 0.01.
    assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");
}

#[test]
fn phase_shuffle_reflects_at_the_edges() {
    let ramp = Tensor::new(&[1, 1, 8], (0..8).map(|v| v as f32).collect());
    let right = phase_shuffle_with_shifts(&ramp, &[2]).unwrap();
    assert_eq!(right.data(), &[1.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    let left = phase_shuffle_with_shifts(&ramp, &[-2]).unwrap();
    assert_eq!(left.data(), &[2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 7.0, 6.0]);
}

#[test]
fn spectrogram_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = synth_digits(1, 2048, &mut rng).unwrap();
    let cfg = SpectrogramConfig { window_size: 128, hop: 64, ..Default::default() };
    for item in &data.items {
        let a = spectrogram(&item.clip, &cfg).unwrap();
        let b = spectrogram(&item.clip, &cfg).unwrap();
        assert!(a.values().data().iter().zip(b.values().data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(a.values().all_finite());
    }
}

#[test]
fn fake_batches_pair_latents_with_their_generation() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g = Generator::new(GeneratorArch { latent_dim: 8, model_dim: 2, layers: 2 }, &mut rng);
    let (zs, clips) = FakeBatchSource { generator: &g, batch_size: 5 }.next_fake_batch(&mut rng).unwrap();
    for (z, c) in zs.iter().zip(&clips) {
        let again = g.generate(z).unwrap();
        assert!(again.samples().iter().zip(c.samples()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn holdout_split_is_deterministic_and_disjoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = synth_digits(10, 512, &mut rng).unwrap();
    let key = |c: &AudioClip| c.samples().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let (train, held) = data.split_holdout(0.1, 7).unwrap();
    let (train2, held2) = data.split_holdout(0.1, 7).unwrap();
    assert_eq!(key(&held.items[0].clip), key(&held2.items[0].clip));
    assert_eq!(train.len(), train2.len());
    assert_eq!(train.len() + held.len(), data.len());
    for h in &held.items {
        assert!(train.items.iter().all(|t| key(&t.clip) != key(&h.clip)));
    }
    assert_eq!(held.class_counts(), [1; 10]);
}
