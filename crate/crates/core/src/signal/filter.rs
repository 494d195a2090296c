//! Digital Butterworth band-stop filter.
//!
//! Designed from the analog low-pass prototype: lowpass → bandstop transform
//! on prewarped band edges, then the bilinear transform, realized as a
//! cascade of second-order sections run in Direct Form II transposed.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One biquad: `b0 + b1 z⁻¹ + b2 z⁻²` over `1 + a1 z⁻¹ + a2 z⁻²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z2 * self.b[2];
        let den = self.a[0] + z_inv * self.a[1] + z2 * self.a[2];
        num / den
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandStop {
    pub sections: Vec<Biquad>,
    pub rate_hz: f64,
}

impl BandStop {
    /// Designs an `order`-th order prototype band-stop (yielding `order`
    /// biquads) rejecting `low_hz..high_hz` at sampling rate `rate_hz`.
    pub fn design(low_hz: f64, high_hz: f64, order: usize, rate_hz: f64) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::arg(format!("sampling rate must be positive, got {rate_hz}")));
        }
        let nyquist = rate_hz / 2.0;
        if !(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist) {
            return Err(Error::arg(format!(
                "band {low_hz}..{high_hz} Hz must satisfy 0 < low < high < {nyquist} Hz"
            )));
        }
        if order == 0 {
            return Err(Error::arg("filter order must be at least 1"));
        }

        let fs2 = 2.0 * rate_hz;
        let w1 = fs2 * (PI * low_hz / rate_hz).tan();
        let w2 = fs2 * (PI * high_hz / rate_hz).tan();
        let bw = w2 - w1;
        let w0 = (w1 * w2).sqrt();

        let n = order as f64;
        let proto: Vec<Complex64> = (0..order)
            .map(|k| Complex64::from_polar(1.0, PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n)))
            .collect();

        // lowpass -> bandstop
        let mut poles = Vec::with_capacity(2 * order);
        for &p in &proto {
            let hp = Complex64::new(bw / 2.0, 0.0) / p;
            let root = (hp * hp - w0 * w0).sqrt();
            poles.push(hp + root);
            poles.push(hp - root);
        }
        let zero = Complex64::new(0.0, w0);
        let mut zeros = Vec::with_capacity(2 * order);
        for _ in 0..order {
            zeros.push(zero);
            zeros.push(zero.conj());
        }
        let mut gain = 1.0 / proto.iter().map(|p| -p).product::<Complex64>().re;
        gain *= (zeros.iter().map(|z| -z).product::<Complex64>() / poles.iter().map(|p| -p).product::<Complex64>()).re;

        // bilinear
        let fs2c = Complex64::new(fs2, 0.0);
        gain *= (zeros.iter().map(|z| fs2c - z).product::<Complex64>()
            / poles.iter().map(|p| fs2c - p).product::<Complex64>())
        .re;
        let zd: Vec<Complex64> = zeros.iter().map(|z| (fs2c + z) / (fs2c - z)).collect();
        let pd: Vec<Complex64> = poles.iter().map(|p| (fs2c + p) / (fs2c - p)).collect();

        let pole_pairs = pair_conjugates(&pd);
        let zero_pairs = pair_conjugates(&zd);
        debug_assert_eq!(pole_pairs.len(), order);
        debug_assert_eq!(zero_pairs.len(), order);

        let mut sections: Vec<Biquad> = zero_pairs
            .iter()
            .zip(&pole_pairs)
            .map(|(&(z1, z2), &(p1, p2))| Biquad {
                b: [1.0, -(z1 + z2).re, (z1 * z2).re],
                a: [1.0, -(p1 + p2).re, (p1 * p2).re],
            })
            .collect();
        for c in sections[0].b.iter_mut() {
            *c *= gain;
        }
        Ok(Self { sections, rate_hz })
    }

    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / self.rate_hz);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    /// Causal filtering from zero initial state.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            let (mut s1, mut s2) = (0.0, 0.0);
            for v in y.iter_mut() {
                let input = *v;
                let out = s.b[0] * input + s1;
                s1 = s.b[1] * input - s.a[1] * out + s2;
                s2 = s.b[2] * input - s.a[2] * out;
                *v = out;
            }
        }
        y
    }
}

/// Groups roots into conjugate pairs (complex roots) or adjacent real pairs.
fn pair_conjugates(roots: &[Complex64]) -> Vec<(Complex64, Complex64)> {
    const TOL: f64 = 1e-10;
    let mut complex: Vec<Complex64> = roots.iter().copied().filter(|r| r.im > TOL).collect();
    complex.sort_by(|a, b| a.re.total_cmp(&b.re));
    let mut real: Vec<Complex64> = roots
        .iter()
        .copied()
        .filter(|r| r.im.abs() <= TOL)
        .map(|r| Complex64::new(r.re, 0.0))
        .collect();
    real.sort_by(|a, b| a.re.total_cmp(&b.re));
    let mut pairs: Vec<_> = complex.into_iter().map(|r| (r, r.conj())).collect();
    for chunk in real.chunks(2) {
        match chunk {
            [a, b] => pairs.push((*a, *b)),
            [a] => pairs.push((*a, Complex64::new(0.0, 0.0))),
            _ => unreachable!(),
        }
    }
    pairs
}
