//! Complex FFT for spectrogram frames: iterative radix-2, with a direct DFT for other sizes.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

pub struct FftPlan {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    bitrev: Vec<usize>,
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "fft size must be positive");
        let cos = (0..n).map(|k| math::cos64(-2.0 * core::f64::consts::PI * k as f64 / n as f64)).collect();
        let sin = (0..n).map(|k| math::sin64(-2.0 * core::f64::consts::PI * k as f64 / n as f64)).collect();
        let bitrev = if n.is_power_of_two() {
            let bits = n.trailing_zeros();
            (0..n).map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) }).collect()
        } else {
            Vec::new()
        };
        Self { n, cos, sin, bitrev }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Forward transform `X[k] = Σ x[t] e^{-2πikt/n}` in place.
    pub fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        assert_eq!(re.len(), self.n);
        assert_eq!(im.len(), self.n);
        if self.n.is_power_of_two() {
            self.radix2(re, im);
        } else {
            self.direct(re, im);
        }
    }

    fn radix2(&self, re: &mut [f64], im: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let j = self.bitrev[i];
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..len / 2 {
                    let (wr, wi) = (self.cos[k * step], self.sin[k * step]);
                    let (a, b) = (start + k, start + k + len / 2);
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            len <<= 1;
        }
    }

    fn direct(&self, re: &mut [f64], im: &mut [f64]) {
        let n = self.n;
        let mut out_re = vec![0.0; n];
        let mut out_im = vec![0.0; n];
        for k in 0..n {
            let (mut ar, mut ai) = (0.0, 0.0);
            for t in 0..n {
                let idx = (k * t) % n;
                let (wr, wi) = (self.cos[idx], self.sin[idx]);
                ar += re[t] * wr - im[t] * wi;
                ai += re[t] * wi + im[t] * wr;
            }
            out_re[k] = ar;
            out_im[k] = ai;
        }
        re.copy_from_slice(&out_re);
        im.copy_from_slice(&out_im);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radix2_agrees_with_direct_dft() {
        for &n in &[1usize, 2, 8, 64] {
            let plan = FftPlan::new(n);
            let x: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
            let (mut re, mut im) = (x.clone(), vec![0.0; n]);
            plan.forward(&mut re, &mut im);
            let (mut dre, mut dim) = (x.clone(), vec![0.0; n]);
            plan.direct(&mut dre, &mut dim);
            for k in 0..n {
                assert!((re[k] - dre[k]).abs() < 1e-9 && (im[k] - dim[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn non_power_of_two_sizes_use_the_dft() {
        let plan = FftPlan::new(6);
        let (mut re, mut im) = (vec![1.0; 6], vec![0.0; 6]);
        plan.forward(&mut re, &mut im);
        assert!((re[0] - 6.0).abs() < 1e-12);
        assert!(re[1..].iter().chain(&im).all(|v| v.abs() < 1e-12));
    }
}
