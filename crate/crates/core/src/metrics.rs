//! Reconstruction metrics: raw-waveform MSE and spectrogram SSIM.

use alloc::vec;
use alloc::vec::Vec;

use crate::audio::{AudioClip, Spectrogram};
use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 7;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Mean squared sample difference.
pub fn mse_raw(a: &AudioClip, b: &AudioClip) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    let total: f64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(total / a.len() as f64)
}

/// Summed-area table with a zero border: `(h + 1) x (w + 1)`.
fn integral(values: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut sat = vec![0.0; (h + 1) * (w + 1)];
    for i in 0..h {
        let mut row = 0.0;
        for j in 0..w {
            row += values[i * w + j];
            sat[(i + 1) * (w + 1) + j + 1] = sat[i * (w + 1) + j + 1] + row;
        }
    }
    sat
}

#[inline]
fn window_sum(sat: &[f64], w: usize, i: usize, j: usize, size: usize) -> f64 {
    let stride = w + 1;
    sat[(i + size) * stride + j + size] - sat[i * stride + j + size] - sat[(i + size) * stride + j]
        + sat[i * stride + j]
}

/// Mean structural similarity over all fully contained square windows.
///
/// Uniform 7x7 windows (shrunk to the smaller image side when needed), `k1 = 0.01`,
/// `k2 = 0.03`, and a dynamic range taken as the joint `max - min` of both images so
/// the index is symmetric. Constant images fall back to a range of 1.
pub fn ssim(a: &Spectrogram, b: &Spectrogram) -> Result<f64> {
    let (sa, sb) = (a.values().shape(), b.values().shape());
    if sa != sb {
        return Err(Error::ShapeMismatch { expected: sa.to_vec(), found: sb.to_vec() });
    }
    let (h, w) = (sa[0], sa[1]);
    let size = SSIM_WINDOW.min(h).min(w);
    let x: Vec<f64> = a.values().data().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.values().data().iter().map(|&v| v as f64).collect();
    let (lo, hi) = x.iter().chain(&y).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = if hi > lo { hi - lo } else { 1.0 };
    let c1 = (SSIM_K1 * range) * (SSIM_K1 * range);
    let c2 = (SSIM_K2 * range) * (SSIM_K2 * range);

    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let (sx, sy) = (integral(&x, h, w), integral(&y, h, w));
    let (sxx, syy, sxy) = (integral(&xx, h, w), integral(&yy, h, w), integral(&xy, h, w));

    let count = (size * size) as f64;
    let mut total = 0.0;
    let mut windows = 0usize;
    for i in 0..=h - size {
        for j in 0..=w - size {
            let mx = window_sum(&sx, w, i, j, size) / count;
            let my = window_sum(&sy, w, i, j, size) / count;
            let vx = window_sum(&sxx, w, i, j, size) / count - mx * mx;
            let vy = window_sum(&syy, w, i, j, size) / count - my * my;
            let cov = window_sum(&sxy, w, i, j, size) / count - mx * my;
            let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
            let den = (mx * mx + my * my + c1) * (vx + vy + c2);
            total += (num / den).clamp(-1.0, 1.0);
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn spec(h: usize, w: usize, f: impl Fn(usize) -> f32) -> Spectrogram {
        Spectrogram::from_tensor(Tensor::new(&[h, w], (0..h * w).map(f).collect()))
    }

    #[test]
    fn mse_of_identical_and_constant_clips() {
        let a = AudioClip::new(vec![0.25; 64], 16_000).unwrap();
        assert_eq!(mse_raw(&a, &a).unwrap(), 0.0);
        let zeros = AudioClip::silence(64);
        let ones = AudioClip::new(vec![1.0; 64], 16_000).unwrap();
        assert_eq!(mse_raw(&zeros, &ones).unwrap(), 1.0);
    }

    #[test]
    fn mse_rejects_length_mismatch() {
        let err = mse_raw(&AudioClip::silence(4), &AudioClip::silence(5)).unwrap_err();
        assert_eq!(err, Error::LengthMismatch { left: 4, right: 5 });
    }

    #[test]
    fn ssim_identity_and_symmetry() {
        let a = spec(20, 18, |i| ((i * 31) % 17) as f32 * 0.3 - 2.0);
        let b = spec(20, 18, |i| ((i * 13) % 11) as f32 * 0.2 - 1.0);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        assert_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
    }

    #[test]
    fn ssim_of_constant_images() {
        let a = spec(10, 10, |_| -13.8);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn ssim_rejects_shape_mismatch() {
        assert!(ssim(&spec(8, 8, |_| 0.0), &spec(8, 9, |_| 0.0)).is_err());
    }
}
