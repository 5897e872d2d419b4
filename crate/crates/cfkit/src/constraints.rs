//! Cross-power statistics and the zero-aliasing constraint system.
//!
//! The localization loss of every design here is `h' T h - 2 Re(h' p)` with
//! `T = D + delta*I` assembled bin-wise: the big cross-power matrix is block
//! diagonal per frequency bin, so it is stored as one K x K Hermitian matrix
//! per bin instead of a dense `K*B x K*B` system.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{CfError, Result};
use crate::spectral::{self, MultiChannelSignal, Spectrum, SupportRegion};

/// Per-bin K x K cross-power matrices `D(r)`, vectors `p(r)` and the
/// regularization `delta` giving `T(r) = D(r) + delta*I`.
#[derive(Debug, Clone)]
pub struct CrossPowerModel {
    pub channels: usize,
    pub fft_height: usize,
    pub fft_width: usize,
    pub training_count: usize,
    pub delta: f64,
    /// Constant term of the localization loss, `sum_l ||g_l||^2 / L`.
    pub desired_energy: f64,
    // d: bins * K * K, per-bin row-major; p: bins * K.
    d: Vec<Complex64>,
    p: Vec<Complex64>,
}

/// Builds `D`, `p` and `T` from training spectra and (optionally empty)
/// desired-output spectra, with the `1/(N_F*M_F*L)` normalization.
pub fn build_cross_power(
    training: &[Spectrum],
    desired: &[Spectrum],
    delta: f64,
) -> Result<CrossPowerModel> {
    if delta < 0.0 {
        return Err(CfError::NegativeDelta(delta));
    }
    let first = training
        .first()
        .ok_or_else(|| CfError::ShapeMismatch("need at least one training spectrum".into()))?;
    let (k, nf, mf) = (first.channels, first.fft_height, first.fft_width);
    for s in training.iter().chain(desired.iter()) {
        if s.fft_height != nf || s.fft_width != mf {
            return Err(CfError::ShapeMismatch("spectra disagree on the FFT grid".into()));
        }
    }
    if training.iter().any(|s| s.channels != k) {
        return Err(CfError::ShapeMismatch("training spectra disagree on channels".into()));
    }
    if !desired.is_empty() {
        if desired.len() != training.len() {
            return Err(CfError::ShapeMismatch(
                "desired outputs must be empty or one per training spectrum".into(),
            ));
        }
        if desired.iter().any(|s| s.channels != 1) {
            return Err(CfError::ShapeMismatch("desired outputs must be single channel".into()));
        }
    }
    let bins = nf * mf;
    let l = training.len();
    let norm = 1.0 / (bins * l) as f64;
    let mut d = vec![Complex64::new(0.0, 0.0); bins * k * k];
    let mut p = vec![Complex64::new(0.0, 0.0); bins * k];
    for x in training {
        for r in 0..bins {
            for i in 0..k {
                let xi = x.bin(i, r);
                for j in 0..k {
                    d[r * k * k + i * k + j] += xi * x.bin(j, r).conj() * norm;
                }
            }
        }
    }
    let mut desired_energy = 0.0;
    for (x, g) in training.iter().zip(desired.iter()) {
        for r in 0..bins {
            let gr = g.bin(0, r);
            for i in 0..k {
                p[r * k + i] += x.bin(i, r) * gr * norm;
            }
        }
        // Parseval: spatial energy of g is ||g_hat||^2 / bins.
        desired_energy += g.norm_sq() / bins as f64;
    }
    desired_energy /= l as f64;
    Ok(CrossPowerModel {
        channels: k,
        fft_height: nf,
        fft_width: mf,
        training_count: l,
        delta,
        desired_energy,
        d,
        p,
    })
}

impl CrossPowerModel {
    pub fn bins(&self) -> usize {
        self.fft_height * self.fft_width
    }

    /// `D(r)[i][j]` without the regularization term.
    #[inline]
    pub fn d_entry(&self, r: usize, i: usize, j: usize) -> Complex64 {
        self.d[r * self.channels * self.channels + i * self.channels + j]
    }

    /// `T(r)[i][j] = D(r)[i][j] + delta * [i==j]`.
    #[inline]
    pub fn t_entry(&self, r: usize, i: usize, j: usize) -> Complex64 {
        let mut v = self.d_entry(r, i, j);
        if i == j {
            v += self.delta;
        }
        v
    }

    #[inline]
    pub fn p_entry(&self, r: usize, i: usize) -> Complex64 {
        self.p[r * self.channels + i]
    }

    pub fn p_spectrum(&self) -> Spectrum {
        let mut s = Spectrum::zeros(self.channels, self.fft_height, self.fft_width);
        for r in 0..self.bins() {
            for i in 0..self.channels {
                *s.bin_mut(i, r) = self.p_entry(r, i);
            }
        }
        s
    }

    /// `T h` applied bin-wise.
    pub fn apply_t(&self, h: &Spectrum) -> Spectrum {
        debug_assert_eq!(h.channels, self.channels);
        let mut out = Spectrum::zeros(self.channels, self.fft_height, self.fft_width);
        for r in 0..self.bins() {
            for i in 0..self.channels {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..self.channels {
                    acc += self.t_entry(r, i, j) * h.bin(j, r);
                }
                *out.bin_mut(i, r) = acc;
            }
        }
        out
    }

    /// Solves `T v = rhs` bin by bin.
    pub fn solve_t(&self, rhs: &Spectrum) -> Result<Spectrum> {
        let k = self.channels;
        let mut out = Spectrum::zeros(k, self.fft_height, self.fft_width);
        for r in 0..self.bins() {
            if k == 1 {
                let t = self.t_entry(r, 0, 0);
                if t.norm() < 1e-300 {
                    return Err(CfError::SingularCrossPower(r));
                }
                *out.bin_mut(0, r) = rhs.bin(0, r) / t;
            } else {
                let t = DMatrix::from_fn(k, k, |i, j| self.t_entry(r, i, j));
                let b = DMatrix::from_fn(k, 1, |i, _| rhs.bin(i, r));
                let lu = t.lu();
                let sol = lu
                    .solve(&b)
                    .ok_or(CfError::SingularCrossPower(r))?;
                for i in 0..k {
                    *out.bin_mut(i, r) = sol[(i, 0)];
                }
            }
        }
        Ok(out)
    }

    /// Localization loss `Re(h' T h - 2 h' p)` (constant term excluded).
    pub fn objective(&self, h: &Spectrum) -> f64 {
        let th = self.apply_t(h);
        (h.herm_dot(&th) - 2.0 * h.herm_dot(&self.p_spectrum())).re
    }

    /// `grad f = 2 T h - 2 p`.
    pub fn gradient(&self, h: &Spectrum) -> Spectrum {
        let mut g = self.apply_t(h);
        for r in 0..self.bins() {
            for i in 0..self.channels {
                let v = *g.bin_mut(i, r) - self.p_entry(r, i);
                *g.bin_mut(i, r) = 2.0 * v;
            }
        }
        g
    }

    /// `Re(g' T g)`, the curvature along `g`.
    pub fn quad_form(&self, g: &Spectrum) -> f64 {
        g.herm_dot(&self.apply_t(g)).re
    }
}

/// Zero-aliasing constraint system on an FFT grid: the template must vanish
/// outside the support block. The dense constraint matrix is never formed
/// here; satisfaction is tested through the spatial tail.
#[derive(Debug, Clone, Copy)]
pub struct ZaConstraintSystem {
    pub fft_height: usize,
    pub fft_width: usize,
    pub support: SupportRegion,
    pub channels: usize,
}

pub fn build_za_system(
    fft_grid: (usize, usize),
    support: SupportRegion,
    channels: usize,
) -> Result<ZaConstraintSystem> {
    let (nf, mf) = fft_grid;
    if support.height > nf || support.width > mf {
        return Err(CfError::Size(format!(
            "support {}x{} exceeds fft grid {}x{}",
            support.height, support.width, nf, mf
        )));
    }
    Ok(ZaConstraintSystem { fft_height: nf, fft_width: mf, support, channels })
}

impl ZaConstraintSystem {
    /// Constraint rows per channel times channels.
    pub fn constraint_count(&self) -> usize {
        self.channels * (self.fft_height * self.fft_width - self.support.len())
    }

    pub fn is_trivial(&self) -> bool {
        self.constraint_count() == 0
    }

    /// Max absolute tail sample of the spatial template; an equivalent,
    /// cheaper residual than the dense constraint product.
    pub fn constraint_residual(&self, h: &Spectrum) -> Result<f64> {
        if h.channels != self.channels
            || h.fft_height != self.fft_height
            || h.fft_width != self.fft_width
        {
            return Err(CfError::ShapeMismatch("spectrum does not match ZA system grid".into()));
        }
        let spatial = spectral::inverse_dft(h);
        let mut max = 0.0_f64;
        for k in 0..self.channels {
            for r in 0..self.fft_height {
                for c in 0..self.fft_width {
                    if r >= self.support.height || c >= self.support.width {
                        max = max.max(spatial.at(k, r, c).abs());
                    }
                }
            }
        }
        Ok(max)
    }

    /// Tail-zeroing prox: inverse transform, project onto the support,
    /// transform back.
    pub fn project(&self, h: &Spectrum) -> Result<Spectrum> {
        let spatial = spectral::inverse_dft(h);
        let projected = spectral::project_support(&spatial, &self.support)?;
        spectral::forward_dft(&projected, (self.fft_height, self.fft_width))
    }

    /// Spatial template of the spectrum, tail-projected and cropped to the
    /// support block.
    pub fn crop_spatial(&self, h: &Spectrum) -> Result<MultiChannelSignal> {
        let spatial = spectral::inverse_dft(h);
        spectral::crop(&spatial, &self.support)
    }
}
