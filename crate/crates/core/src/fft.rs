//! Complex FFT used by the front-end and the synthetic generators.
//!
//! Power-of-two sizes use an iterative radix-2 transform; other sizes fall back
//! to a direct DFT with a precomputed twiddle table.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    // twiddles[k] = exp(-2πik/n) for k < n
    cos: Vec<f64>,
    sin: Vec<f64>,
    bitrev: Vec<usize>,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT size must be positive");
        let (cos, sin) = (0..n)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                (libm::cos(a), libm::sin(a))
            })
            .unzip();
        let bitrev = if n.is_power_of_two() {
            let bits = n.trailing_zeros();
            (0..n)
                .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
                .collect()
        } else {
            Vec::new()
        };
        Fft { n, cos, sin, bitrev }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward transform, `X_k = Σ x_t exp(-2πikt/n)`.
    pub fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        self.transform(re, im, false);
    }

    /// In-place inverse transform including the `1/n` factor.
    pub fn inverse(&self, re: &mut [f64], im: &mut [f64]) {
        self.transform(re, im, true);
        let scale = 1.0 / self.n as f64;
        re.iter_mut().for_each(|v| *v *= scale);
        im.iter_mut().for_each(|v| *v *= scale);
    }

    fn transform(&self, re: &mut [f64], im: &mut [f64], inverse: bool) {
        assert_eq!(re.len(), self.n);
        assert_eq!(im.len(), self.n);
        let sign = if inverse { -1.0 } else { 1.0 };
        if self.bitrev.is_empty() {
            self.direct(re, im, sign);
            return;
        }
        for i in 0..self.n {
            let j = self.bitrev[i];
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let stride = self.n / len;
            for start in (0..self.n).step_by(len) {
                for k in 0..half {
                    let wr = self.cos[k * stride];
                    let wi = sign * self.sin[k * stride];
                    let (a, b) = (start + k, start + k + half);
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

    fn direct(&self, re: &mut [f64], im: &mut [f64], sign: f64) {
        let n = self.n;
        let mut out_re = Vec::with_capacity(n);
        let mut out_im = Vec::with_capacity(n);
        for k in 0..n {
            let (mut sr, mut si) = (0.0, 0.0);
            for t in 0..n {
                let idx = (k * t) % n;
                let (c, s) = (self.cos[idx], sign * self.sin[idx]);
                sr += re[t] * c - im[t] * s;
                si += re[t] * s + im[t] * c;
            }
            out_re.push(sr);
            out_im.push(si);
        }
        re.copy_from_slice(&out_re);
        im.copy_from_slice(&out_im);
    }
}
