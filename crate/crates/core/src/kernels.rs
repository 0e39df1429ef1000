//! Dense convolution kernels.
//!
//! One trilinear relation `y[n,co,oh,ow] = Σ x[n,ci,oh·sh+kh−ph, ow·sw+kw−pw] · w[co,ci,kh,kw]`
//! yields three contractions: the forward output, the input-side adjoint (a transposed
//! convolution) and the weight-side adjoint. Each is the derivative of the others, which
//! is what lets the autodiff graph differentiate convolutions to any order.

use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub k_h: usize,
    pub k_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    pub pad_h: usize,
    pub pad_w: usize,
    /// Tensors are rank 3 (`[N, C, W]`) instead of rank 4.
    pub one_d: bool,
}

impl ConvGeom {
    /// `x: [N, Ci, H, W]`, `w: [Co, Ci, Kh, Kw]`.
    pub fn conv2d(x: &[usize], w: &[usize], stride: usize, pad: usize) -> Self {
        assert_eq!(x.len(), 4, "conv2d input must be [N, C, H, W]");
        assert_eq!(w.len(), 4, "conv2d weight must be [Co, Ci, Kh, Kw]");
        assert_eq!(x[1], w[1], "conv2d channel mismatch");
        assert!(x[2] + 2 * pad >= w[2] && x[3] + 2 * pad >= w[3], "kernel larger than input");
        Self {
            batch: x[0],
            in_ch: x[1],
            out_ch: w[0],
            in_h: x[2],
            in_w: x[3],
            out_h: (x[2] + 2 * pad - w[2]) / stride + 1,
            out_w: (x[3] + 2 * pad - w[3]) / stride + 1,
            k_h: w[2],
            k_w: w[3],
            stride_h: stride,
            stride_w: stride,
            pad_h: pad,
            pad_w: pad,
            one_d: false,
        }
    }

    /// `x: [N, Ci, L]`, `w: [Co, Ci, K]`.
    pub fn conv1d(x: &[usize], w: &[usize], stride: usize, pad: usize) -> Self {
        assert_eq!(x.len(), 3, "conv1d input must be [N, C, L]");
        assert_eq!(w.len(), 3, "conv1d weight must be [Co, Ci, K]");
        assert_eq!(x[1], w[1], "conv1d channel mismatch");
        assert!(x[2] + 2 * pad >= w[2], "kernel larger than input");
        Self {
            batch: x[0],
            in_ch: x[1],
            out_ch: w[0],
            in_h: 1,
            in_w: x[2],
            out_h: 1,
            out_w: (x[2] + 2 * pad - w[2]) / stride + 1,
            k_h: 1,
            k_w: w[2],
            stride_h: 1,
            stride_w: stride,
            pad_h: 0,
            pad_w: pad,
            one_d: true,
        }
    }

    /// Transposed 1-D convolution with input `[N, Cin, L]` and weight `[Cin, Cout, K]`
    /// (the usual transposed-convolution weight layout). The transposed input plays the
    /// role of `y` in the underlying relation.
    pub fn conv_transpose1d(input: &[usize], w: &[usize], stride: usize, pad: usize, output_padding: usize) -> Self {
        assert_eq!(input.len(), 3);
        assert_eq!(w.len(), 3);
        assert_eq!(input[1], w[0], "transposed conv channel mismatch");
        assert!(output_padding < stride);
        let out_len = (input[2] - 1) * stride + w[2] + output_padding - 2 * pad;
        Self {
            batch: input[0],
            in_ch: w[1],
            out_ch: w[0],
            in_h: 1,
            in_w: out_len,
            out_h: 1,
            out_w: input[2],
            k_h: 1,
            k_w: w[2],
            stride_h: 1,
            stride_w: stride,
            pad_h: 0,
            pad_w: pad,
            one_d: true,
        }
    }

    pub fn x_shape(&self) -> Vec<usize> {
        if self.one_d {
            vec![self.batch, self.in_ch, self.in_w]
        } else {
            vec![self.batch, self.in_ch, self.in_h, self.in_w]
        }
    }

    pub fn w_shape(&self) -> Vec<usize> {
        if self.one_d {
            vec![self.out_ch, self.in_ch, self.k_w]
        } else {
            vec![self.out_ch, self.in_ch, self.k_h, self.k_w]
        }
    }

    pub fn y_shape(&self) -> Vec<usize> {
        if self.one_d {
            vec![self.batch, self.out_ch, self.out_w]
        } else {
            vec![self.batch, self.out_ch, self.out_h, self.out_w]
        }
    }

    /// Valid `ow` range for kernel column `kw`.
    #[inline]
    fn ow_range(&self, kw: usize) -> (usize, usize) {
        let s = self.stride_w as isize;
        let off = kw as isize - self.pad_w as isize;
        // ow·s + off ∈ [0, in_w)
        let lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
        let upper = self.in_w as isize - 1 - off;
        let hi = if upper < 0 { 0 } else { upper / s + 1 };
        (lo as usize, (hi as usize).min(self.out_w).max(lo as usize))
    }

    #[inline]
    fn input_row(&self, oh: usize, kh: usize) -> Option<usize> {
        let ih = (oh * self.stride_h + kh) as isize - self.pad_h as isize;
        if ih < 0 || ih >= self.in_h as isize {
            None
        } else {
            Some(ih as usize)
        }
    }

    fn ranges(&self) -> Vec<(usize, usize)> {
        (0..self.k_w).map(|kw| self.ow_range(kw)).collect()
    }
}

/// Forward convolution: `(x, w) -> y`.
pub fn conv_output(x: &Tensor, w: &Tensor, g: &ConvGeom) -> Tensor {
    let mut y = vec![0.0f32; g.batch * g.out_ch * g.out_h * g.out_w];
    let (xd, wd) = (x.data(), w.data());
    let x_plane = g.in_h * g.in_w;
    let y_plane = g.out_h * g.out_w;
    let w_plane = g.k_h * g.k_w;
    let ranges = g.ranges();
    let sw = g.stride_w;
    for n in 0..g.batch {
        for co in 0..g.out_ch {
            let yp = &mut y[(n * g.out_ch + co) * y_plane..][..y_plane];
            for ci in 0..g.in_ch {
                let xp = &xd[(n * g.in_ch + ci) * x_plane..][..x_plane];
                let wp = &wd[(co * g.in_ch + ci) * w_plane..][..w_plane];
                for kh in 0..g.k_h {
                    for oh in 0..g.out_h {
                        let Some(ih) = g.input_row(oh, kh) else { continue };
                        let yrow = &mut yp[oh * g.out_w..][..g.out_w];
                        let xrow = &xp[ih * g.in_w..][..g.in_w];
                        for (kw, &(lo, hi)) in ranges.iter().enumerate() {
                            if lo >= hi {
                                continue;
                            }
                            let wv = wp[kh * g.k_w + kw];
                            let base = lo * sw + kw - g.pad_w;
                            if sw == 1 {
                                let xs = &xrow[base..base + (hi - lo)];
                                for (yv, &xv) in yrow[lo..hi].iter_mut().zip(xs) {
                                    *yv += wv * xv;
                                }
                            } else {
                                for (j, yv) in yrow[lo..hi].iter_mut().enumerate() {
                                    *yv += wv * xrow[base + j * sw];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&g.y_shape(), y)
}

/// Input-side adjoint (transposed convolution): `(w, y) -> x`.
pub fn conv_input(w: &Tensor, y: &Tensor, g: &ConvGeom) -> Tensor {
    let mut x = vec![0.0f32; g.batch * g.in_ch * g.in_h * g.in_w];
    let (wd, yd) = (w.data(), y.data());
    let x_plane = g.in_h * g.in_w;
    let y_plane = g.out_h * g.out_w;
    let w_plane = g.k_h * g.k_w;
    let ranges = g.ranges();
    let sw = g.stride_w;
    for n in 0..g.batch {
        for ci in 0..g.in_ch {
            let xp = &mut x[(n * g.in_ch + ci) * x_plane..][..x_plane];
            for co in 0..g.out_ch {
                let yp = &yd[(n * g.out_ch + co) * y_plane..][..y_plane];
                let wp = &wd[(co * g.in_ch + ci) * w_plane..][..w_plane];
                for kh in 0..g.k_h {
                    for oh in 0..g.out_h {
                        let Some(ih) = g.input_row(oh, kh) else { continue };
                        let yrow = &yp[oh * g.out_w..][..g.out_w];
                        let xrow = &mut xp[ih * g.in_w..][..g.in_w];
                        for (kw, &(lo, hi)) in ranges.iter().enumerate() {
                            if lo >= hi {
                                continue;
                            }
                            let wv = wp[kh * g.k_w + kw];
                            let base = lo * sw + kw - g.pad_w;
                            if sw == 1 {
                                let xs = &mut xrow[base..base + (hi - lo)];
                                for (xv, &yv) in xs.iter_mut().zip(&yrow[lo..hi]) {
                                    *xv += wv * yv;
                                }
                            } else {
                                for (j, &yv) in yrow[lo..hi].iter().enumerate() {
                                    xrow[base + j * sw] += wv * yv;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&g.x_shape(), x)
}

/// Weight-side adjoint: `(x, y) -> w`.
pub fn conv_weight(x: &Tensor, y: &Tensor, g: &ConvGeom) -> Tensor {
    let mut w = vec![0.0f32; g.out_ch * g.in_ch * g.k_h * g.k_w];
    let (xd, yd) = (x.data(), y.data());
    let x_plane = g.in_h * g.in_w;
    let y_plane = g.out_h * g.out_w;
    let w_plane = g.k_h * g.k_w;
    let ranges = g.ranges();
    let sw = g.stride_w;
    for co in 0..g.out_ch {
        for ci in 0..g.in_ch {
            let wp = &mut w[(co * g.in_ch + ci) * w_plane..][..w_plane];
            for n in 0..g.batch {
                let xp = &xd[(n * g.in_ch + ci) * x_plane..][..x_plane];
                let yp = &yd[(n * g.out_ch + co) * y_plane..][..y_plane];
                for kh in 0..g.k_h {
                    for oh in 0..g.out_h {
                        let Some(ih) = g.input_row(oh, kh) else { continue };
                        let yrow = &yp[oh * g.out_w..][..g.out_w];
                        let xrow = &xp[ih * g.in_w..][..g.in_w];
                        for (kw, &(lo, hi)) in ranges.iter().enumerate() {
                            if lo >= hi {
                                continue;
                            }
                            let base = lo * sw + kw - g.pad_w;
                            let mut acc = 0.0f32;
                            if sw == 1 {
                                let xs = &xrow[base..base + (hi - lo)];
                                for (&xv, &yv) in xs.iter().zip(&yrow[lo..hi]) {
                                    acc += xv * yv;
                                }
                            } else {
                                for (j, &yv) in yrow[lo..hi].iter().enumerate() {
                                    acc += xrow[base + j * sw] * yv;
                                }
                            }
                            wp[kh * g.k_w + kw] += acc;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&g.w_shape(), w)
}

/// `[m, k] x [k, n] -> [m, n]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let (k2, n) = (b.shape()[0], b.shape()[1]);
    assert_eq!(k, k2, "matmul inner dimension mismatch");
    let mut out = vec![0.0f32; m * n];
    let (ad, bd) = (a.data(), b.data());
    for i in 0..m {
        let orow = &mut out[i * n..][..n];
        for p in 0..k {
            let av = ad[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(&bd[p * n..][..n]) {
                *o += av * bv;
            }
        }
    }
    Tensor::new(&[m, n], out)
}

pub fn transpose(a: &Tensor) -> Tensor {
    let (m, n) = (a.shape()[0], a.shape()[1]);
    let mut out = vec![0.0f32; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a.data()[i * n + j];
        }
    }
    Tensor::new(&[n, m], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straightforward six-loop reference.
    fn naive(x: &Tensor, w: &Tensor, g: &ConvGeom) -> Vec<f32> {
        let mut y = vec![0.0; g.batch * g.out_ch * g.out_h * g.out_w];
        for n in 0..g.batch {
            for co in 0..g.out_ch {
                for oh in 0..g.out_h {
                    for ow in 0..g.out_w {
                        let mut acc = 0.0;
                        for ci in 0..g.in_ch {
                            for kh in 0..g.k_h {
                                for kw in 0..g.k_w {
                                    let ih = (oh * g.stride_h + kh) as isize - g.pad_h as isize;
                                    let iw = (ow * g.stride_w + kw) as isize - g.pad_w as isize;
                                    if ih < 0 || iw < 0 || ih >= g.in_h as isize || iw >= g.in_w as isize {
                                        continue;
                                    }
                                    acc += x.data()[((n * g.in_ch + ci) * g.in_h + ih as usize) * g.in_w + iw as usize]
                                        * w.data()[((co * g.in_ch + ci) * g.k_h + kh) * g.k_w + kw];
                                }
                            }
                        }
                        y[((n * g.out_ch + co) * g.out_h + oh) * g.out_w + ow] = acc;
                    }
                }
            }
        }
        y
    }

    fn ramp(shape: &[usize], scale: f32) -> Tensor {
        let n: usize = shape.iter().product();
        Tensor::new(shape, (0..n).map(|i| ((i * 7919) % 13) as f32 * scale - 0.3).collect())
    }

    #[test]
    fn conv2d_matches_naive() {
        for &(stride, pad) in &[(1, 1), (2, 1), (2, 3), (1, 0)] {
            let x = ramp(&[2, 3, 9, 8], 0.1);
            let w = ramp(&[4, 3, 3, 3], 0.05);
            let g = ConvGeom::conv2d(x.shape(), w.shape(), stride, pad);
            let y = conv_output(&x, &w, &g);
            for (a, b) in y.data().iter().zip(naive(&x, &w, &g)) {
                assert!((a - b).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn adjoints_satisfy_inner_product_identity() {
        // <conv(x, w), y> = <x, conv_input(w, y)> = <w, conv_weight(x, y)>
        let x = ramp(&[2, 2, 37], 0.1);
        let w = ramp(&[3, 2, 25], 0.02);
        let g = ConvGeom::conv1d(x.shape(), w.shape(), 4, 11);
        let y = ramp(&g.y_shape(), 0.03);
        let dot =
            |a: &Tensor, b: &Tensor| -> f64 { a.data().iter().zip(b.data()).map(|(&p, &q)| p as f64 * q as f64).sum() };
        let lhs = dot(&conv_output(&x, &w, &g), &y);
        let via_x = dot(&x, &conv_input(&w, &y, &g));
        let via_w = dot(&w, &conv_weight(&x, &y, &g));
        assert!((lhs - via_x).abs() < 1e-4, "{lhs} vs {via_x}");
        assert!((lhs - via_w).abs() < 1e-4, "{lhs} vs {via_w}");
    }

    #[test]
    fn transposed_geometry_quadruples_length() {
        let g = ConvGeom::conv_transpose1d(&[1, 8, 16], &[8, 4, 25], 4, 11, 1);
        assert_eq!(g.x_shape(), vec![1, 4, 64]);
        // The forward relation recovers the transposed input length.
        assert_eq!((g.in_w + 2 * g.pad_w - g.k_w) / g.stride_w + 1, g.out_w);
    }
}
