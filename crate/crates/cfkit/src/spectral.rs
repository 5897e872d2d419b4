//! Multi-channel DFTs, padding/cropping and cross-correlation.
//!
//! Transform convention: the forward DFT is unnormalized and the inverse
//! carries the `1/(N_F * M_F)` factor. All operations treat a 1-D signal as
//! an `N x 1` grid. Data is stored channel-major, row-major.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{CfError, Result};

/// K real channels on an `height x width` spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelSignal {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    data: Vec<f64>,
}

impl MultiChannelSignal {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(CfError::Size("signal dimensions must be >= 1".into()));
        }
        if data.len() != channels * height * width {
            return Err(CfError::ShapeMismatch(format!(
                "data length {} != {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CfError::ShapeMismatch("signal contains non-finite samples".into()));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    /// 1-D convenience constructor (width 1, single channel).
    pub fn from_1d(samples: &[f64]) -> Result<Self> {
        Self::new(1, samples.len(), 1, samples.to_vec())
    }

    #[inline]
    pub fn at(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[(channel * self.height + row) * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, channel: usize, row: usize, col: usize, value: f64) {
        self.data[(channel * self.height + row) * self.width + col] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Dot product over all channels and samples; shapes must match.
    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}

/// K complex channels on an `fft_height x fft_width` frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub channels: usize,
    pub fft_height: usize,
    pub fft_width: usize,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(channels: usize, fft_height: usize, fft_width: usize) -> Self {
        Self {
            channels,
            fft_height,
            fft_width,
            data: vec![Complex64::new(0.0, 0.0); channels * fft_height * fft_width],
        }
    }

    pub fn from_data(
        channels: usize,
        fft_height: usize,
        fft_width: usize,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        if data.len() != channels * fft_height * fft_width {
            return Err(CfError::ShapeMismatch("spectrum data length mismatch".into()));
        }
        Ok(Self { channels, fft_height, fft_width, data })
    }

    #[inline]
    pub fn at(&self, channel: usize, row: usize, col: usize) -> Complex64 {
        self.data[(channel * self.fft_height + row) * self.fft_width + col]
    }

    pub fn bins(&self) -> usize {
        self.fft_height * self.fft_width
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Value of channel `k` at flat bin index `r` (row-major over the grid).
    #[inline]
    pub fn bin(&self, k: usize, r: usize) -> Complex64 {
        self.data[k * self.bins() + r]
    }

    #[inline]
    pub fn bin_mut(&mut self, k: usize, r: usize) -> &mut Complex64 {
        let bins = self.bins();
        &mut self.data[k * bins + r]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.channels == other.channels
            && self.fft_height == other.fft_height
            && self.fft_width == other.fft_width
    }

    /// `sum conj(self) . other` over all channels and bins.
    pub fn herm_dot(&self, other: &Self) -> Complex64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn axpy(&mut self, alpha: Complex64, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }
}

/// Spatial support block anchored at index (0,0) of the FFT grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportRegion {
    pub height: usize,
    pub width: usize,
}

impl SupportRegion {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Real-valued correlation output plane.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationPlane {
    pub height: usize,
    pub width: usize,
    data: Vec<f64>,
}

impl CorrelationPlane {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self { height, width, data }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Largest value with deterministic row-major tie-breaking.
    pub fn peak(&self) -> (f64, usize, usize) {
        let mut best = f64::NEG_INFINITY;
        let mut loc = (0, 0);
        for r in 0..self.height {
            for c in 0..self.width {
                let v = self.at(r, c);
                if v > best {
                    best = v;
                    loc = (r, c);
                }
            }
        }
        (best, loc.0, loc.1)
    }

    /// Maps a plane index to a signed lag; indices past the midpoint wrap
    /// to negative lags on the padded circular grid.
    pub fn signed_lag(&self, row: usize, col: usize) -> (i64, i64) {
        let r = if row * 2 < self.height { row as i64 } else { row as i64 - self.height as i64 };
        let c = if col * 2 < self.width { col as i64 } else { col as i64 - self.width as i64 };
        (r, c)
    }
}

fn fft_2d(
    data: &mut [Complex64],
    height: usize,
    width: usize,
    planner: &mut FftPlanner<f64>,
    inverse: bool,
) {
    let dir = |planner: &mut FftPlanner<f64>, len: usize| {
        if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        }
    };
    if width > 1 {
        let row_fft = dir(planner, width);
        for row in data.chunks_exact_mut(width) {
            row_fft.process(row);
        }
    }
    if height > 1 {
        let col_fft = dir(planner, height);
        let mut col = vec![Complex64::new(0.0, 0.0); height];
        for c in 0..width {
            for r in 0..height {
                col[r] = data[r * width + c];
            }
            col_fft.process(&mut col);
            for r in 0..height {
                data[r * width + c] = col[r];
            }
        }
    }
}

/// Per-channel 2-D DFT of the signal zero-padded to `fft_size`.
pub fn forward_dft(signal: &MultiChannelSignal, fft_size: (usize, usize)) -> Result<Spectrum> {
    let (nf, mf) = fft_size;
    if nf < signal.height || mf < signal.width {
        return Err(CfError::Size(format!(
            "fft size {}x{} smaller than signal {}x{}",
            nf, mf, signal.height, signal.width
        )));
    }
    let mut planner = FftPlanner::new();
    let mut out = Spectrum::zeros(signal.channels, nf, mf);
    for k in 0..signal.channels {
        let mut buf = vec![Complex64::new(0.0, 0.0); nf * mf];
        for r in 0..signal.height {
            for c in 0..signal.width {
                buf[r * mf + c] = Complex64::new(signal.at(k, r, c), 0.0);
            }
        }
        fft_2d(&mut buf, nf, mf, &mut planner, false);
        let bins = nf * mf;
        out.data_mut()[k * bins..(k + 1) * bins].copy_from_slice(&buf);
    }
    Ok(out)
}

/// Inverse transform with the `1/(N_F * M_F)` factor; returns the real part.
pub fn inverse_dft(spectrum: &Spectrum) -> MultiChannelSignal {
    let (nf, mf) = (spectrum.fft_height, spectrum.fft_width);
    let mut planner = FftPlanner::new();
    let mut out = MultiChannelSignal::zeros(spectrum.channels, nf, mf);
    let bins = nf * mf;
    let scale = 1.0 / bins as f64;
    for k in 0..spectrum.channels {
        let mut buf = spectrum.data()[k * bins..(k + 1) * bins].to_vec();
        fft_2d(&mut buf, nf, mf, &mut planner, true);
        for (i, v) in buf.iter().enumerate() {
            out.data_mut()[k * bins + i] = v.re * scale;
        }
    }
    out
}

/// Channel-summed circular cross-correlation on the `fft_size` torus.
///
/// Computes `idft( sum_k conj(A^k) . B^k )`; an impulse in `a` at the origin
/// reproduces `b`, and a target at offset `tau` in `b` peaks at lag `tau`.
pub fn circular_correlate(
    a: &MultiChannelSignal,
    b: &MultiChannelSignal,
    fft_size: (usize, usize),
) -> Result<CorrelationPlane> {
    if a.channels != b.channels {
        return Err(CfError::ChannelMismatch(a.channels, b.channels));
    }
    let sa = forward_dft(a, fft_size)?;
    let sb = forward_dft(b, fft_size)?;
    Ok(correlate_spectra(&sa, &sb))
}

/// Circular correlation of two equally shaped spectra.
pub fn correlate_spectra(sa: &Spectrum, sb: &Spectrum) -> CorrelationPlane {
    debug_assert!(sa.same_shape(sb));
    let bins = sa.bins();
    let mut acc = Spectrum::zeros(1, sa.fft_height, sa.fft_width);
    for k in 0..sa.channels {
        for r in 0..bins {
            acc.data_mut()[r] += sa.bin(k, r).conj() * sb.bin(k, r);
        }
    }
    let plane = inverse_dft(&acc);
    CorrelationPlane::new(sa.fft_height, sa.fft_width, plane.data().to_vec())
}

/// Linear cross-correlation via padding to `(N_a + N_b - 1, M_a + M_b - 1)`.
pub fn linear_correlate(
    a: &MultiChannelSignal,
    b: &MultiChannelSignal,
) -> Result<CorrelationPlane> {
    let nf = a.height + b.height - 1;
    let mf = a.width + b.width - 1;
    circular_correlate(a, b, (nf.max(1), mf.max(1)))
}

/// `P_Omega`: zero every sample outside the support block.
pub fn project_support(
    signal: &MultiChannelSignal,
    region: &SupportRegion,
) -> Result<MultiChannelSignal> {
    if region.height > signal.height || region.width > signal.width {
        return Err(CfError::Size(format!(
            "support {}x{} larger than grid {}x{}",
            region.height, region.width, signal.height, signal.width
        )));
    }
    let mut out = MultiChannelSignal::zeros(signal.channels, signal.height, signal.width);
    for k in 0..signal.channels {
        for r in 0..region.height {
            for c in 0..region.width {
                out.set(k, r, c, signal.at(k, r, c));
            }
        }
    }
    Ok(out)
}

/// `P_C`: extract the support block anchored at (0,0).
pub fn crop(signal: &MultiChannelSignal, region: &SupportRegion) -> Result<MultiChannelSignal> {
    if region.height > signal.height || region.width > signal.width {
        return Err(CfError::Size(format!(
            "crop {}x{} larger than grid {}x{}",
            region.height, region.width, signal.height, signal.width
        )));
    }
    let mut out = MultiChannelSignal::zeros(signal.channels, region.height, region.width);
    for k in 0..signal.channels {
        for r in 0..region.height {
            for c in 0..region.width {
                out.set(k, r, c, signal.at(k, r, c));
            }
        }
    }
    Ok(out)
}

/// `P_Z`: embed the signal at (0,0) of a larger grid.
pub fn zero_pad(signal: &MultiChannelSignal, fft_size: (usize, usize)) -> Result<MultiChannelSignal> {
    let (nf, mf) = fft_size;
    if nf < signal.height || mf < signal.width {
        return Err(CfError::Size(format!(
            "pad target {}x{} smaller than signal {}x{}",
            nf, mf, signal.height, signal.width
        )));
    }
    let mut out = MultiChannelSignal::zeros(signal.channels, nf, mf);
    for k in 0..signal.channels {
        for r in 0..signal.height {
            for c in 0..signal.width {
                out.set(k, r, c, signal.at(k, r, c));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(rng: &mut ChaCha8Rng, k: usize, n: usize, m: usize) -> MultiChannelSignal {
        let data: Vec<f64> = (0..k * n * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        MultiChannelSignal::new(k, n, m, data).unwrap()
    }

    #[test]
    fn dc_bin_is_sample_sum() {
        let pulse: Vec<f64> = (0..16).map(|i| if i < 5 { 1.0 } else { 0.0 }).collect();
        let x = MultiChannelSignal::from_1d(&pulse).unwrap();
        let s = forward_dft(&x, (16, 1)).unwrap();
        let sum: f64 = pulse.iter().sum();
        assert!((s.at(0, 0, 0).re - sum).abs() < 1e-12);
        assert!(s.at(0, 0, 0).im.abs() < 1e-12);
    }

    #[test]
    fn padded_fft_size_31() {
        let pulse: Vec<f64> = (0..16).map(|i| (i as f64 * 0.3).sin()).collect();
        let x = MultiChannelSignal::from_1d(&pulse).unwrap();
        let s = forward_dft(&x, (31, 1)).unwrap();
        assert_eq!(s.fft_height, 31);
        assert_eq!(s.bins(), 31);
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut x = MultiChannelSignal::zeros(2, 4, 3);
        x.set(0, 0, 0, 1.0);
        x.set(1, 0, 0, 1.0);
        let s = forward_dft(&x, (8, 5)).unwrap();
        for k in 0..2 {
            for r in 0..s.bins() {
                assert!((s.bin(k, r) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn all_ones_spectrum_inverts_to_impulse() {
        let mut s = Spectrum::zeros(1, 6, 4);
        for v in s.data_mut() {
            *v = Complex64::new(1.0, 0.0);
        }
        let x = inverse_dft(&s);
        assert!((x.at(0, 0, 0) - 1.0).abs() < 1e-12);
        let tail: f64 = x.data()[1..].iter().map(|v| v.abs()).sum();
        assert!(tail < 1e-10);
    }

    #[test]
    fn inverse_matches_direct_summation() {
        // Direct O(N^2) inverse-DFT sum as the independent oracle.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 8;
        let data: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let s = Spectrum::from_data(1, n, 1, data.clone()).unwrap();
        let x = inverse_dft(&s);
        for t in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (r, v) in data.iter().enumerate() {
                let ang = 2.0 * std::f64::consts::PI * (r * t) as f64 / n as f64;
                acc += v * Complex64::new(ang.cos(), ang.sin());
            }
            acc /= n as f64;
            assert!((x.at(0, t, 0) - acc.re).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_correlation_reproduces_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_signal(&mut rng, 1, 5, 4);
        let mut imp = MultiChannelSignal::zeros(1, 5, 4);
        imp.set(0, 0, 0, 1.0);
        let plane = circular_correlate(&imp, &x, (5, 4)).unwrap();
        for r in 0..5 {
            for c in 0..4 {
                assert!((plane.at(r, c) - x.at(0, r, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn circular_matches_modular_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_signal(&mut rng, 2, 8, 1);
        let b = random_signal(&mut rng, 2, 8, 1);
        let plane = circular_correlate(&a, &b, (8, 1)).unwrap();
        for tau in 0..8 {
            let mut acc = 0.0;
            for k in 0..2 {
                for n in 0..8 {
                    acc += a.at(k, n, 0) * b.at(k, (n + tau) % 8, 0);
                }
            }
            assert!((plane.at(tau, 0) - acc).abs() < 1e-10);
        }
    }

    #[test]
    fn aliased_autocorrelation_wraps_energy() {
        // Correlating a ramp with itself without padding folds tail lags
        // back onto the plane; with padding those lags decay to zero.
        let ramp: Vec<f64> = (0..16).map(|i| i as f64 / 15.0).collect();
        let x = MultiChannelSignal::from_1d(&ramp).unwrap();
        let circ = circular_correlate(&x, &x, (16, 1)).unwrap();
        let lin = linear_correlate(&x, &x).unwrap();
        // Largest-lag circular value aggregates wrapped energy.
        assert!(circ.at(8, 0) > lin.at(8, 0));
        // Linear autocorrelation is symmetric and peaks at zero lag.
        assert!(lin.at(0, 0) >= lin.at(1, 0));
        assert!((lin.at(1, 0) - lin.at(30, 0)).abs() < 1e-10);
    }

    #[test]
    fn linear_matches_nested_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_signal(&mut rng, 1, 5, 4);
        let b = random_signal(&mut rng, 1, 6, 3);
        let plane = linear_correlate(&a, &b).unwrap();
        let (nf, mf) = (plane.height, plane.width);
        for tr in -(a.height as i64 - 1)..(b.height as i64) {
            for tc in -(a.width as i64 - 1)..(b.width as i64) {
                let mut acc = 0.0;
                for r in 0..a.height as i64 {
                    for c in 0..a.width as i64 {
                        let (br, bc) = (r + tr, c + tc);
                        if br >= 0 && bc >= 0 && br < b.height as i64 && bc < b.width as i64 {
                            acc += a.at(0, r as usize, c as usize)
                                * b.at(0, br as usize, bc as usize);
                        }
                    }
                }
                let pr = tr.rem_euclid(nf as i64) as usize;
                let pc = tc.rem_euclid(mf as i64) as usize;
                assert!((plane.at(pr, pc) - acc).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_signal_correlates_to_zero() {
        let x = MultiChannelSignal::from_1d(&[1.0, 2.0, 3.0]).unwrap();
        let z = MultiChannelSignal::zeros(1, 3, 1);
        let plane = linear_correlate(&x, &z).unwrap();
        assert!(plane.data().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn support_projection_counts() {
        let x = MultiChannelSignal::new(1, 4, 4, vec![1.0; 16]).unwrap();
        let p = project_support(&x, &SupportRegion::new(2, 2)).unwrap();
        let ones = p.data().iter().filter(|v| **v == 1.0).count();
        let zeros = p.data().iter().filter(|v| **v == 0.0).count();
        assert_eq!((ones, zeros), (4, 12));
        // Full-grid region is the identity.
        let full = project_support(&x, &SupportRegion::new(4, 4)).unwrap();
        assert_eq!(full, x);
    }

    #[test]
    fn operator_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_signal(&mut rng, 2, 4, 3);
        let region = SupportRegion::new(2, 2);
        // crop(zero_pad(x)) = x
        let padded = zero_pad(&x, (7, 7)).unwrap();
        let back = crop(&padded, &SupportRegion::new(4, 3)).unwrap();
        assert_eq!(back, x);
        // zero_pad(crop(x)) = project_support(x)
        let a = zero_pad(&crop(&x, &region).unwrap(), (4, 3)).unwrap();
        let b = project_support(&x, &region).unwrap();
        assert_eq!(a, b);
        // idempotence
        let pp = project_support(&b, &region).unwrap();
        assert_eq!(pp, b);
    }

    #[test]
    fn long_signal_pad_crop_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random_signal(&mut rng, 1, 301, 1);
        let padded = zero_pad(&x, (601, 1)).unwrap();
        let back = crop(&padded, &SupportRegion::new(301, 1)).unwrap();
        assert_eq!(back, x);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn parseval_holds(seed in 0u64..1000, n in 1usize..9, m in 1usize..9,
                          pad_r in 0usize..5, pad_c in 0usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_signal(&mut rng, 1, n, m);
            let s = forward_dft(&x, (n + pad_r, m + pad_c)).unwrap();
            let spatial = x.energy();
            let freq = s.norm_sq() / s.bins() as f64;
            prop_assert!((spatial - freq).abs() <= 1e-9 * spatial.max(1.0));
        }

        #[test]
        fn roundtrip_is_identity(seed in 0u64..1000, n in 1usize..8, m in 1usize..8, k in 1usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_signal(&mut rng, k, n, m);
            let s = forward_dft(&x, (n + 2, m + 1)).unwrap();
            let back = inverse_dft(&s);
            let cropped = crop(&back, &SupportRegion::new(n, m)).unwrap();
            let err: f64 = cropped
                .data()
                .iter()
                .zip(x.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            prop_assert!(err < 1e-10);
            // Padded region stays zero.
            let tail = project_support(&back, &SupportRegion::new(n, m)).unwrap();
            let tail_err: f64 = back
                .data()
                .iter()
                .zip(tail.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            prop_assert!(tail_err < 1e-10);
        }

        #[test]
        fn padded_circular_equals_linear(seed in 0u64..1000, n in 1usize..7, m in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_signal(&mut rng, 1, n, m);
            let b = random_signal(&mut rng, 1, n, m);
            let lin = linear_correlate(&a, &b).unwrap();
            let extra = circular_correlate(&a, &b, (2 * n, 2 * m)).unwrap();
            // Compare on the common signed-lag set.
            for tr in -(n as i64 - 1)..(n as i64) {
                for tc in -(m as i64 - 1)..(m as i64) {
                    let v1 = lin.at(
                        tr.rem_euclid(lin.height as i64) as usize,
                        tc.rem_euclid(lin.width as i64) as usize,
                    );
                    let v2 = extra.at(
                        tr.rem_euclid(extra.height as i64) as usize,
                        tc.rem_euclid(extra.width as i64) as usize,
                    );
                    prop_assert!((v1 - v2).abs() < 1e-10);
                }
            }
        }
    }
}
