//! One-dimensional complex FFT: mixed radix for lengths built from 2, 3, 4
//! and 5, Bluestein's chirp-z transform for everything else.
//!
//! Forward transforms use `exp(-2πi jk/n)` and are unnormalised. Inverses are
//! computed as `conj(F(conj(x)))`, also unnormalised.

use std::f64::consts::PI;

use num_complex::Complex64;

const RADICES: [usize; 4] = [4, 2, 3, 5];

#[derive(Debug, Clone)]
pub enum Fft1d {
    Mixed(MixedRadix),
    Bluestein(Box<Bluestein>),
}

impl Fft1d {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "FFT of length 0");
        match MixedRadix::factorize(n) {
            Some(factors) => Fft1d::Mixed(MixedRadix::new(n, factors)),
            None => Fft1d::Bluestein(Box::new(Bluestein::new(n))),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Fft1d::Mixed(m) => m.n,
            Fft1d::Bluestein(b) => b.n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_fast_path(&self) -> bool {
        matches!(self, Fft1d::Mixed(_))
    }

    /// In-place forward transform. `scratch` is resized as needed.
    pub fn forward(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        debug_assert_eq!(data.len(), self.len());
        match self {
            Fft1d::Mixed(m) => m.forward(data, scratch),
            Fft1d::Bluestein(b) => b.forward(data, scratch),
        }
    }

    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        for v in data.iter_mut() {
            *v = v.conj();
        }
        self.forward(data, scratch);
        for v in data.iter_mut() {
            *v = v.conj();
        }
    }
}

/// `exp(-2πi k / n)` with `k` reduced modulo `n` first.
fn root(k: usize, n: usize) -> Complex64 {
    let (s, c) = (-2.0 * PI * (k % n) as f64 / n as f64).sin_cos();
    Complex64::new(c, s)
}

#[derive(Debug, Clone)]
pub struct MixedRadix {
    n: usize,
    factors: Vec<usize>,
    twiddles: Vec<Complex64>,
}

impl MixedRadix {
    fn factorize(mut n: usize) -> Option<Vec<usize>> {
        let mut factors = Vec::new();
        for &r in &RADICES {
            while n.is_multiple_of(r) {
                factors.push(r);
                n /= r;
            }
        }
        (n == 1).then_some(factors)
    }

    fn new(n: usize, factors: Vec<usize>) -> Self {
        let twiddles = (0..n).map(|k| root(k, n)).collect();
        Self { n, factors, twiddles }
    }

    fn forward(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        if self.n == 1 {
            return;
        }
        scratch.clear();
        scratch.extend_from_slice(data);
        self.recurse(scratch, 1, data, self.n, &self.factors, 1);
    }

    /// Decimation in time: `out` receives the length-`n` DFT of
    /// `input[0], input[stride], ...`. `tw_step` is `N / n`.
    fn recurse(
        &self,
        input: &[Complex64],
        stride: usize,
        out: &mut [Complex64],
        n: usize,
        factors: &[usize],
        tw_step: usize,
    ) {
        if n == 1 {
            out[0] = input[0];
            return;
        }
        let p = factors[0];
        let m = n / p;
        for r in 0..p {
            self.recurse(
                &input[r * stride..],
                stride * p,
                &mut out[r * m..(r + 1) * m],
                m,
                &factors[1..],
                tw_step * p,
            );
        }
        let big_n = self.n;
        let root_step = big_n / p;
        let mut tmp = [Complex64::new(0.0, 0.0); 5];
        for k in 0..m {
            for (r, t) in tmp.iter_mut().enumerate().take(p) {
                *t = out[r * m + k] * self.twiddles[r * k * tw_step];
            }
            match p {
                2 => {
                    out[k] = tmp[0] + tmp[1];
                    out[m + k] = tmp[0] - tmp[1];
                }
                4 => {
                    // -i rotation for the forward transform.
                    let a = tmp[0] + tmp[2];
                    let b = tmp[0] - tmp[2];
                    let c = tmp[1] + tmp[3];
                    let d = tmp[1] - tmp[3];
                    let d_rot = Complex64::new(d.im, -d.re);
                    out[k] = a + c;
                    out[m + k] = b + d_rot;
                    out[2 * m + k] = a - c;
                    out[3 * m + k] = b - d_rot;
                }
                _ => {
                    for q in 0..p {
                        let mut acc = tmp[0];
                        for (r, t) in tmp.iter().enumerate().take(p).skip(1) {
                            acc += t * self.twiddles[((r * q) % p) * root_step];
                        }
                        out[q * m + k] = acc;
                    }
                }
            }
        }
    }
}

/// Chirp-z evaluation of an arbitrary-length DFT through a power-of-two
/// circular convolution.
#[derive(Debug, Clone)]
pub struct Bluestein {
    n: usize,
    inner: MixedRadix,
    /// `exp(-iπ j² / n)` for `j < n`.
    chirp: Vec<Complex64>,
    /// Forward transform of the conjugate chirp, wrapped circularly.
    kernel_hat: Vec<Complex64>,
}

impl Bluestein {
    fn new(n: usize) -> Self {
        let m = (2 * n - 1).next_power_of_two();
        let inner = MixedRadix::new(m, MixedRadix::factorize(m).expect("power of two"));
        let two_n = 2 * n as u128;
        let chirp: Vec<Complex64> = (0..n)
            .map(|j| {
                let q = ((j as u128 * j as u128) % two_n) as f64;
                let (s, c) = (-PI * q / n as f64).sin_cos();
                Complex64::new(c, s)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for j in 1..n {
            kernel[j] = chirp[j].conj();
            kernel[m - j] = chirp[j].conj();
        }
        let mut scratch = Vec::new();
        inner.forward(&mut kernel, &mut scratch);
        Self {
            n,
            inner,
            chirp,
            kernel_hat: kernel,
        }
    }

    fn forward(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let m = self.inner.n;
        let mut work = vec![Complex64::new(0.0, 0.0); m];
        for (w, (x, c)) in work.iter_mut().zip(data.iter().zip(&self.chirp)) {
            *w = x * c;
        }
        self.inner.forward(&mut work, scratch);
        for (w, k) in work.iter_mut().zip(&self.kernel_hat) {
            // conj so the following forward pass acts as an inverse
            *w = (*w * k).conj();
        }
        self.inner.forward(&mut work, scratch);
        let scale = 1.0 / m as f64;
        for (out, (w, c)) in data.iter_mut().zip(work.iter().zip(&self.chirp)) {
            *out = w.conj() * scale * c;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| (0..n).map(|j| x[j] * root(j * k, n)).sum())
            .collect()
    }

    fn signal(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = crate::rng::SplitMix64::new(seed);
        (0..n)
            .map(|_| Complex64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
            .collect()
    }

    #[test]
    fn matches_naive_for_many_lengths() {
        for n in [1usize, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 15, 16, 17, 25, 30, 31, 49, 60, 64, 97, 100] {
            let x = signal(n, n as u64);
            let plan = Fft1d::new(n);
            let mut got = x.clone();
            plan.forward(&mut got, &mut Vec::new());
            let want = naive(&x);
            let err = got
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-9, "n={n} err={err}");
        }
    }

    #[test]
    fn fast_path_selection() {
        assert!(Fft1d::new(60).is_fast_path());
        assert!(Fft1d::new(1).is_fast_path());
        assert!(!Fft1d::new(13).is_fast_path());
        assert!(!Fft1d::new(14).is_fast_path());
    }

    #[test]
    fn inverse_round_trip() {
        for n in [8usize, 13, 45] {
            let x = signal(n, 99);
            let plan = Fft1d::new(n);
            let mut y = x.clone();
            let mut scratch = Vec::new();
            plan.forward(&mut y, &mut scratch);
            plan.inverse(&mut y, &mut scratch);
            for (a, b) in y.iter().zip(&x) {
                assert!((a / n as f64 - b).norm() < 1e-12);
            }
        }
    }
}
