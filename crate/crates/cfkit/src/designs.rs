//! Closed-form correlation filter designs.
//!
//! Conventional designs (MACE, OTSDF, MOSSE, MMCF) are solved bin by bin in
//! the frequency domain. Zero-aliasing variants constrain the spatial tail
//! of the template to zero; their closed forms are solved over the reduced
//! set of in-support spatial coefficients, which is the same optimum as the
//! stacked dense constraint formulation (the oracle module evaluates that
//! one literally for cross-checking) without materializing the constraint
//! matrix.
//!
//! Peak constraints are imposed on the spatial dot product `x_l . h = u_l`.
//! With the unnormalized forward transform this equals the frequency-domain
//! dot product divided by the grid size, so templates designed at different
//! padding amounts remain directly comparable and an aligned training image
//! correlates to a peak of exactly `u_l`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::constraints::{self, CrossPowerModel, ZaConstraintSystem};
use crate::error::{CfError, Result};
use crate::spectral::{self, MultiChannelSignal, Spectrum, SupportRegion};

pub const DEFAULT_DENSE_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    Mace,
    Otsdf,
    Mosse,
    Mmcf,
}

impl DesignKind {
    pub fn token(&self) -> &'static str {
        match self {
            DesignKind::Mace => "mace",
            DesignKind::Otsdf => "otsdf",
            DesignKind::Mosse => "mosse",
            DesignKind::Mmcf => "mmcf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Conventional,
    ZeroAliasing,
    /// ZA constraints at a reduced DFT grid chosen by [`racf_fft_size`].
    Racf { pad_fraction: f64 },
}

impl Variant {
    pub fn token(&self) -> String {
        match self {
            Variant::Conventional => "conv".to_string(),
            Variant::ZeroAliasing => "za".to_string(),
            Variant::Racf { pad_fraction } => format!("racf{}", pad_fraction),
        }
    }
}

/// Desired correlation-output shape for the positive class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DesiredOutput {
    /// All-zero desired outputs (`p = 0`); the MACE/OTSDF case.
    Zero,
    /// Unit impulse at the origin for positives, all-zero for negatives.
    Delta,
    /// Isotropic Gaussian (wrapped on the torus) centered at the origin.
    Gaussian { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    ClosedForm,
    Prox,
}

/// Everything a solver consumes.
#[derive(Debug, Clone)]
pub struct DesignProblem {
    /// Spatial training signals, each sized to the support region.
    pub training: Vec<MultiChannelSignal>,
    /// Class labels, +1 or -1.
    pub labels: Vec<f64>,
    /// Peak constraint vector `u`.
    pub peaks: Vec<f64>,
    pub desired: DesiredOutput,
    pub delta: f64,
    /// MMCF trade-off parameter `C`.
    pub trade_off: f64,
    pub support: SupportRegion,
    pub fft_height: usize,
    pub fft_width: usize,
    pub kind: DesignKind,
    pub variant: Variant,
    /// Max `K * N_F * M_F` for the dense ZA closed forms.
    pub dense_cap: usize,
}

/// Default peak constraints: 1 for the positive class and, for the
/// equality-constrained designs, 0 for the negative class. MMCF keeps
/// `u_l = 1` everywhere and lets the label carry the sign.
pub fn default_peaks(kind: DesignKind, labels: &[f64]) -> Vec<f64> {
    labels
        .iter()
        .map(|&y| match kind {
            DesignKind::Mmcf => 1.0,
            _ => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        })
        .collect()
}

impl DesignProblem {
    pub fn new(
        training: Vec<MultiChannelSignal>,
        labels: Vec<f64>,
        kind: DesignKind,
        variant: Variant,
        fft_grid: (usize, usize),
        delta: f64,
        trade_off: f64,
    ) -> Result<Self> {
        let first = training
            .first()
            .ok_or_else(|| CfError::ShapeMismatch("need at least one training signal".into()))?;
        let support = SupportRegion::new(first.height, first.width);
        let channels = first.channels;
        for t in &training {
            if t.height != support.height || t.width != support.width || t.channels != channels {
                return Err(CfError::ShapeMismatch("training signals disagree on shape".into()));
            }
        }
        if labels.len() != training.len() {
            return Err(CfError::ShapeMismatch("one label per training signal required".into()));
        }
        if fft_grid.0 < support.height || fft_grid.1 < support.width {
            return Err(CfError::Size("fft grid smaller than the training signals".into()));
        }
        if delta < 0.0 {
            return Err(CfError::NegativeDelta(delta));
        }
        let peaks = default_peaks(kind, &labels);
        let desired = match kind {
            DesignKind::Mace | DesignKind::Otsdf => DesiredOutput::Zero,
            _ => DesiredOutput::Delta,
        };
        Ok(Self {
            training,
            labels,
            peaks,
            desired,
            delta,
            trade_off,
            support,
            fft_height: fft_grid.0,
            fft_width: fft_grid.1,
            kind,
            variant,
            dense_cap: DEFAULT_DENSE_CAP,
        })
    }

    pub fn channels(&self) -> usize {
        self.training[0].channels
    }

    pub fn bins(&self) -> usize {
        self.fft_height * self.fft_width
    }

    pub fn training_count(&self) -> usize {
        self.training.len()
    }

    pub fn fft_grid(&self) -> (usize, usize) {
        (self.fft_height, self.fft_width)
    }

    /// DFTs of the training signals on the design grid.
    pub fn spectra(&self) -> Result<Vec<Spectrum>> {
        self.training
            .iter()
            .map(|t| spectral::forward_dft(t, self.fft_grid()))
            .collect()
    }

    /// Desired correlation output for training sample `l`, in the spatial
    /// domain on the design grid.
    pub fn desired_plane(&self, l: usize) -> Option<MultiChannelSignal> {
        match self.desired {
            DesiredOutput::Zero => None,
            DesiredOutput::Delta => {
                let mut g = MultiChannelSignal::zeros(1, self.fft_height, self.fft_width);
                if self.labels[l] > 0.0 {
                    g.set(0, 0, 0, 1.0);
                }
                Some(g)
            }
            DesiredOutput::Gaussian { sigma } => {
                let mut g = MultiChannelSignal::zeros(1, self.fft_height, self.fft_width);
                if self.labels[l] > 0.0 {
                    for r in 0..self.fft_height {
                        for c in 0..self.fft_width {
                            let dr = r.min(self.fft_height - r) as f64;
                            let dc = c.min(self.fft_width - c) as f64;
                            let v = (-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp();
                            g.set(0, r, c, v);
                        }
                    }
                }
                Some(g)
            }
        }
    }

    pub fn desired_spectra(&self) -> Result<Vec<Spectrum>> {
        if matches!(self.desired, DesiredOutput::Zero) {
            return Ok(Vec::new());
        }
        (0..self.training.len())
            .map(|l| {
                let g = self.desired_plane(l).expect("non-zero desired shape");
                spectral::forward_dft(&g, self.fft_grid())
            })
            .collect()
    }

    pub fn cross_power(&self) -> Result<CrossPowerModel> {
        let spectra = self.spectra()?;
        let desired = self.desired_spectra()?;
        constraints::build_cross_power(&spectra, &desired, self.delta)
    }

    pub fn za_system(&self) -> Result<ZaConstraintSystem> {
        constraints::build_za_system(self.fft_grid(), self.support, self.channels())
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.iter().any(|&y| y > 0.0) && self.labels.iter().any(|&y| y < 0.0)
    }

    fn check_dense_cap(&self) -> Result<()> {
        let unknowns = self.channels() * self.bins();
        if unknowns > self.dense_cap {
            return Err(CfError::SizeCapExceeded(unknowns, self.dense_cap));
        }
        Ok(())
    }
}

/// A solved filter in both domains.
#[derive(Debug, Clone)]
pub struct FilterTemplate {
    /// Spatial template on the full design grid.
    pub spatial: MultiChannelSignal,
    pub spectrum: Spectrum,
    pub bias: f64,
    pub support: SupportRegion,
    pub kind: DesignKind,
    pub variant: Variant,
    pub delta: f64,
    pub trade_off: f64,
    pub solver: SolverKind,
    pub iterations: usize,
    pub objective: f64,
}

impl FilterTemplate {
    pub fn from_spectrum(spectrum: Spectrum, problem: &DesignProblem, solver: SolverKind) -> Self {
        let spatial = spectral::inverse_dft(&spectrum);
        Self {
            spatial,
            spectrum,
            bias: 0.0,
            support: problem.support,
            kind: problem.kind,
            variant: problem.variant,
            delta: problem.delta,
            trade_off: problem.trade_off,
            solver,
            iterations: 0,
            objective: 0.0,
        }
    }

    /// Support-region block of the spatial template.
    pub fn cropped(&self) -> MultiChannelSignal {
        spectral::crop(&self.spatial, &self.support).expect("support fits grid")
    }

    /// Variant with the spatial tail zeroed (the "crop to N" comparison
    /// template for conventional designs).
    pub fn cropped_to_support(&self) -> FilterTemplate {
        let spatial = spectral::project_support(&self.spatial, &self.support)
            .expect("support fits grid");
        let spectrum = spectral::forward_dft(&spatial, (self.spatial.height, self.spatial.width))
            .expect("grid matches");
        FilterTemplate { spatial, spectrum, ..self.clone() }
    }

    /// Spatial peak-constraint residual `max_l |x_l . h - u_l|`.
    pub fn peak_residual(&self, problem: &DesignProblem) -> f64 {
        let cropped = self.cropped();
        problem
            .training
            .iter()
            .zip(&problem.peaks)
            .map(|(x, &u)| (x.dot(&cropped) - u).abs())
            .fold(0.0, f64::max)
    }
}

/// Dual variables and diagnostics of an MMCF solve.
#[derive(Debug, Clone)]
pub struct MmcfDualState {
    pub a: Vec<f64>,
    pub m: DMatrix<f64>,
    pub d: Vec<f64>,
    pub xi: Vec<f64>,
    pub trade_off: f64,
    pub iterations: usize,
    pub dual_objective: f64,
}

impl MmcfDualState {
    /// Max KKT violation of the box QP `max a'Ma + a'd, 0 <= a <= C`.
    pub fn kkt_violation(&self) -> f64 {
        let l = self.a.len();
        let mut worst = 0.0_f64;
        for i in 0..l {
            let mut g = self.d[i];
            for j in 0..l {
                g += 2.0 * self.m[(i, j)] * self.a[j];
            }
            let v = if self.a[i] <= 1e-10 * self.trade_off.max(1.0) {
                g.max(0.0)
            } else if self.a[i] >= self.trade_off - 1e-10 * self.trade_off.max(1.0) {
                (-g).max(0.0)
            } else {
                g.abs()
            };
            worst = worst.max(v);
        }
        worst
    }
}

// Per-bin solves of `T v = x_l` for every training spectrum.
fn solved_training(
    model: &CrossPowerModel,
    spectra: &[Spectrum],
) -> Result<Vec<Spectrum>> {
    spectra.iter().map(|x| model.solve_t(x)).collect()
}

/// Solves the MACE problem: minimize the circular-correlation energy
/// subject to the peak constraints.
pub fn solve_mace(problem: &DesignProblem) -> Result<FilterTemplate> {
    solve_equality_constrained(problem)
}

/// OTSDF: MACE with `T = D + delta*I` for noise tolerance.
pub fn solve_otsdf(problem: &DesignProblem) -> Result<FilterTemplate> {
    solve_equality_constrained(problem)
}

fn solve_equality_constrained(problem: &DesignProblem) -> Result<FilterTemplate> {
    let model = problem.cross_power()?;
    let spectra = problem.spectra()?;
    let bins = problem.bins() as f64;
    let l = problem.training_count();

    let p = model.p_spectrum();
    let hp = model.solve_t(&p)?;
    let solved = solved_training(&model, &spectra)?;

    // Gram of the scaled constraint matrix: G[l][m] = x_l' T^-1 x_m / B^2.
    let gram = DMatrix::from_fn(l, l, |i, j| spectra[i].herm_dot(&solved[j]) / (bins * bins));
    let rhs = DMatrix::from_fn(l, 1, |i, _| {
        Complex64::new(problem.peaks[i], 0.0) - spectra[i].herm_dot(&hp) / bins
    });
    let coeff = gram
        .lu()
        .solve(&rhs)
        .ok_or(CfError::RankDeficientConstraints)?;

    let mut h = hp;
    for (i, v) in solved.iter().enumerate() {
        h.axpy(coeff[(i, 0)] / bins, v);
    }
    let objective = model.objective(&h) + model.desired_energy;
    let mut out = FilterTemplate::from_spectrum(h, problem, SolverKind::ClosedForm);
    out.objective = objective;
    Ok(out)
}

/// MOSSE: unconstrained minimizer `h = T^-1 p`.
pub fn solve_mosse(problem: &DesignProblem) -> Result<FilterTemplate> {
    let model = problem.cross_power()?;
    let h = model.solve_t(&model.p_spectrum())?;
    let objective = model.objective(&h) + model.desired_energy;
    let mut out = FilterTemplate::from_spectrum(h, problem, SolverKind::ClosedForm);
    out.objective = objective;
    Ok(out)
}

/// Solves `min h' T h - 2 Re(h' rhs)` subject to the ZA constraints, over
/// the in-support spatial coefficients.
pub struct ReducedZaSolver {
    system: ZaConstraintSystem,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    q: DMatrix<f64>,
    dim: usize,
}

impl ReducedZaSolver {
    pub fn new(model: &CrossPowerModel, system: &ZaConstraintSystem) -> Result<Self> {
        let k = system.channels;
        let (n, m) = (system.support.height, system.support.width);
        let dim = k * n * m;
        let bins = (system.fft_height * system.fft_width) as f64;
        let mut q = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let mut basis = MultiChannelSignal::zeros(k, n, m);
            basis.data_mut()[j] = 1.0;
            let f = spectral::forward_dft(&basis, (system.fft_height, system.fft_width))?;
            let tf = model.apply_t(&f);
            let col = spectral::crop(&spectral::inverse_dft(&tf), &system.support)?;
            for i in 0..dim {
                q[(i, j)] = bins * col.data()[i];
            }
        }
        // Symmetrize away FFT round-off.
        let qt = q.transpose();
        q = (q + qt) * 0.5;
        let lu = q.clone().lu();
        Ok(Self { system: *system, lu, q, dim })
    }

    fn rhs_vector(&self, rhs: &Spectrum) -> DMatrix<f64> {
        let bins = (self.system.fft_height * self.system.fft_width) as f64;
        let cropped = spectral::crop(&spectral::inverse_dft(rhs), &self.system.support)
            .expect("support fits grid");
        DMatrix::from_fn(self.dim, 1, |i, _| bins * cropped.data()[i])
    }

    fn spectrum_from(&self, coeffs: &DMatrix<f64>) -> Result<Spectrum> {
        let k = self.system.channels;
        let (n, m) = (self.system.support.height, self.system.support.width);
        let mut spatial = MultiChannelSignal::zeros(k, n, m);
        for i in 0..self.dim {
            spatial.data_mut()[i] = coeffs[(i, 0)];
        }
        spectral::forward_dft(&spatial, (self.system.fft_height, self.system.fft_width))
    }

    /// Unconstrained minimizer over the support coefficients.
    pub fn solve(&self, rhs: &Spectrum) -> Result<Spectrum> {
        let b = self.rhs_vector(rhs);
        let sol = self
            .lu
            .solve(&b)
            .ok_or(CfError::RankDeficientConstraints)?;
        self.spectrum_from(&sol)
    }

    /// Minimizer subject to additional spatial peak constraints
    /// `x_l . h = u_l` (columns of `a` are the flattened training signals).
    pub fn solve_with_peaks(
        &self,
        rhs: &Spectrum,
        a: &DMatrix<f64>,
        u: &[f64],
    ) -> Result<Spectrum> {
        let l = u.len();
        let dim = self.dim;
        let mut kkt = DMatrix::zeros(dim + l, dim + l);
        for i in 0..dim {
            for j in 0..dim {
                kkt[(i, j)] = 2.0 * self.q[(i, j)];
            }
        }
        for i in 0..dim {
            for j in 0..l {
                kkt[(i, dim + j)] = a[(i, j)];
                kkt[(dim + j, i)] = a[(i, j)];
            }
        }
        let b = self.rhs_vector(rhs);
        let mut full_rhs = DMatrix::zeros(dim + l, 1);
        for i in 0..dim {
            full_rhs[(i, 0)] = 2.0 * b[(i, 0)];
        }
        for (j, &uj) in u.iter().enumerate() {
            full_rhs[(dim + j, 0)] = uj;
        }
        let sol = kkt
            .lu()
            .solve(&full_rhs)
            .ok_or(CfError::RankDeficientConstraints)?;
        let coeffs = DMatrix::from_fn(dim, 1, |i, _| sol[(i, 0)]);
        self.spectrum_from(&coeffs)
    }
}

fn training_matrix(problem: &DesignProblem) -> DMatrix<f64> {
    let dim = problem.channels() * problem.support.len();
    DMatrix::from_fn(dim, problem.training_count(), |i, j| problem.training[j].data()[i])
}

/// ZAMACE (and ZAOTSDF through `delta`): MACE with the template tail
/// constrained to zero.
pub fn solve_zamace(problem: &DesignProblem) -> Result<FilterTemplate> {
    problem.check_dense_cap()?;
    let model = problem.cross_power()?;
    let system = problem.za_system()?;
    let solver = ReducedZaSolver::new(&model, &system)?;
    let a = training_matrix(problem);
    let h = solver.solve_with_peaks(&model.p_spectrum(), &a, &problem.peaks)?;
    let objective = model.objective(&h) + model.desired_energy;
    let mut out = FilterTemplate::from_spectrum(h, problem, SolverKind::ClosedForm);
    out.objective = objective;
    Ok(out)
}

/// ZAMOSSE: unconstrained localization loss under ZA constraints.
pub fn solve_zamosse(problem: &DesignProblem) -> Result<FilterTemplate> {
    problem.check_dense_cap()?;
    let model = problem.cross_power()?;
    let system = problem.za_system()?;
    let solver = ReducedZaSolver::new(&model, &system)?;
    let h = solver.solve(&model.p_spectrum())?;
    let objective = model.objective(&h) + model.desired_energy;
    let mut out = FilterTemplate::from_spectrum(h, problem, SolverKind::ClosedForm);
    out.objective = objective;
    Ok(out)
}

/// Projected gradient ascent with exact quadratic step on the box QP
/// `max a'Ma + a'd, 0 <= a <= C`. `M` is negative semidefinite.
pub fn solve_box_qp(m: &DMatrix<f64>, d: &[f64], c: f64) -> (Vec<f64>, usize) {
    let l = d.len();
    let mut a = vec![0.0; l];
    let d_norm = d.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-8 * (1.0 + d_norm);
    let objective = |a: &[f64]| {
        let mut obj = 0.0;
        for i in 0..l {
            obj += a[i] * d[i];
            for j in 0..l {
                obj += a[i] * m[(i, j)] * a[j];
            }
        }
        obj
    };
    let mut obj = objective(&a);
    let mut iterations = 0;
    for _ in 0..200_000 {
        iterations += 1;
        // Gradient and its projection onto the feasible directions.
        let mut g = vec![0.0; l];
        for i in 0..l {
            g[i] = d[i];
            for j in 0..l {
                g[i] += 2.0 * m[(i, j)] * a[j];
            }
        }
        let mut dir = vec![0.0; l];
        let mut pg_norm = 0.0_f64;
        for i in 0..l {
            let v = if a[i] <= 0.0 {
                g[i].max(0.0)
            } else if a[i] >= c {
                g[i].min(0.0)
            } else {
                g[i]
            };
            dir[i] = v;
            pg_norm = pg_norm.max(v.abs());
        }
        if pg_norm < tol {
            break;
        }
        // Exact maximizer along the projected gradient direction.
        let mut curvature = 0.0;
        let mut slope = 0.0;
        for i in 0..l {
            slope += dir[i] * g[i];
            for j in 0..l {
                curvature += dir[i] * m[(i, j)] * dir[j];
            }
        }
        let mut eta = if curvature < -1e-300 { slope / (-2.0 * curvature) } else { 1.0 };
        // Backtrack if the clipped step fails to improve the objective.
        let mut improved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..l)
                .map(|i| (a[i] + eta * dir[i]).clamp(0.0, c))
                .collect();
            let trial_obj = objective(&trial);
            if trial_obj > obj {
                a = trial;
                obj = trial_obj;
                improved = true;
                break;
            }
            eta *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (a, iterations)
}

fn mmcf_common(
    problem: &DesignProblem,
    gram: DMatrix<f64>,
    scores_init: Vec<f64>,
) -> (DMatrix<f64>, Vec<f64>) {
    let l = problem.training_count();
    let m = DMatrix::from_fn(l, l, |i, j| {
        -problem.labels[i] * problem.labels[j] * gram[(i, j)]
    });
    let d: Vec<f64> = (0..l)
        .map(|i| 2.0 * problem.labels[i] * (problem.peaks[i] - scores_init[i]))
        .collect();
    (m, d)
}

fn recover_bias(problem: &DesignProblem, scores: &[f64], a: &[f64]) -> f64 {
    let c = problem.trade_off;
    let eps = 1e-8 * c.max(1.0);
    let mut sum = 0.0;
    let mut count = 0usize;
    for l in 0..a.len() {
        if a[l] > eps && a[l] < c - eps {
            sum += problem.labels[l] * problem.peaks[l] - scores[l];
            count += 1;
        }
    }
    if count > 0 {
        sum / count as f64
    } else {
        0.0
    }
}

fn slack_diagnostics(problem: &DesignProblem, scores: &[f64], bias: f64) -> Vec<f64> {
    (0..scores.len())
        .map(|l| {
            let y = problem.labels[l];
            (y * problem.peaks[l] - y * (scores[l] + bias)).max(0.0)
        })
        .collect()
}

/// MMCF: max-margin peak constraints solved through the box dual QP.
pub fn solve_mmcf(problem: &DesignProblem) -> Result<(FilterTemplate, MmcfDualState)> {
    if !problem.has_both_classes() {
        return Err(CfError::DegenerateLabels);
    }
    let model = problem.cross_power()?;
    let spectra = problem.spectra()?;
    let bins = problem.bins() as f64;
    let l = problem.training_count();

    let hp = model.solve_t(&model.p_spectrum())?;
    let solved = solved_training(&model, &spectra)?;
    let gram = DMatrix::from_fn(l, l, |i, j| {
        (spectra[i].herm_dot(&solved[j]) / (bins * bins)).re
    });
    let scores_init: Vec<f64> = (0..l)
        .map(|i| (spectra[i].herm_dot(&hp) / bins).re)
        .collect();
    let (m, d) = mmcf_common(problem, gram, scores_init);
    let (a, iterations) = solve_box_qp(&m, &d, problem.trade_off);

    let mut h = hp;
    for (i, v) in solved.iter().enumerate() {
        h.axpy(Complex64::new(problem.labels[i] * a[i] / bins, 0.0), v);
    }
    let scores: Vec<f64> = (0..l)
        .map(|i| (spectra[i].herm_dot(&h) / bins).re)
        .collect();
    let bias = recover_bias(problem, &scores, &a);
    let xi = slack_diagnostics(problem, &scores, bias);
    let dual_objective = {
        let mut obj = 0.0;
        for i in 0..l {
            obj += a[i] * d[i];
            for j in 0..l {
                obj += a[i] * m[(i, j)] * a[j];
            }
        }
        obj
    };
    let objective =
        model.objective(&h) + model.desired_energy + 2.0 * problem.trade_off * xi.iter().sum::<f64>();
    let mut out = FilterTemplate::from_spectrum(h, problem, SolverKind::ClosedForm);
    out.bias = bias;
    out.objective = objective;
    out.iterations = iterations;
    let dual = MmcfDualState {
        a,
        m,
        d,
        xi,
        trade_off: problem.trade_off,
        iterations,
        dual_objective,
    };
    Ok((out, dual))
}

/// ZAMMCF closed form: the MMCF dual with every filter application routed
/// through the ZA-constrained quadratic solve.
pub fn solve_zammcf_closed(problem: &DesignProblem) -> Result<(FilterTemplate, MmcfDualState)> {
    if !problem.has_both_classes() {
        return Err(CfError::DegenerateLabels);
    }
    problem.check_dense_cap()?;
    let model = problem.cross_power()?;
    let system = problem.za_system()?;
    let solver = ReducedZaSolver::new(&model, &system)?;
    let spectra = problem.spectra()?;
    let bins = problem.bins() as f64;
    let l = problem.training_count();

    let hp = solver.solve(&model.p_spectrum())?;
    let solved: Vec<Spectrum> = spectra
        .iter()
        .map(|x| solver.solve(x))
        .collect::<Result<_>>()?;
    let gram = DMatrix::from_fn(l, l, |i, j| {
        (spectra[i].herm_dot(&solved[j]) / (bins * bins)).re
    });
    let scores_init: Vec<f64> = (0..l)
        .map(|i| (spectra[i].herm_dot(&hp) / bins).re)
        .collect();
    let (m, d) = mmcf_common(problem, gram, scores_init);
    let (a, iterations) = solve_box_qp(&m, &d, problem.trade_off);

    // h = za_solve(p + sum_l y_l a_l x_l / B): the dense formula's omega
    // term is exactly the ZA-constrained stationarity correction.
    let mut rhs = model.p_spectrum();
    for (i, x) in spectra.iter().enumerate() {
        rhs.axpy(Complex64::new(problem.labels[i] * a[i] / bins, 0.0), x);
    }
    let h = solver.solve(&rhs)?;
    let scores: Vec<f64> = (0..l)
        .map(|i| (spectra[i].herm_dot(&h) / bins).re)
        .collect();
    let bias = recover_bias(problem, &scores, &a);
    let xi = slack_diagnostics(problem, &scores, bias);
    let dual_objective = {
        let mut obj = 0.0;
        for i in 0..l {
            obj += a[i] * d[i];
            for j in 0..l {
                obj += a[i] * m[(i, j)] * a[j];
            }
        }
        obj
    };
    let objective =
        model.objective(&h) + model.desired_energy + 2.0 * problem.trade_off * xi.iter().sum::<f64>();
    let mut out = FilterTemplate::from_spectrum(h, problem, SolverKind::ClosedForm);
    out.bias = bias;
    out.objective = objective;
    out.iterations = iterations;
    let dual = MmcfDualState {
        a,
        m,
        d,
        xi,
        trade_off: problem.trade_off,
        iterations,
        dual_objective,
    };
    Ok((out, dual))
}

/// Reduced-aliasing grid: pad by a fraction of the template size, clamped
/// below the alias-free size `2N - 1`.
pub fn racf_fft_size(n: usize, m: usize, pad_fraction: f64) -> (usize, usize) {
    let pad = |size: usize| -> usize {
        if size <= 1 {
            return size;
        }
        let padded = size + (pad_fraction * size as f64).ceil() as usize;
        padded.min(2 * size - 2).max(size)
    };
    (pad(n), pad(m))
}

/// Dispatches to the closed-form solver matching the problem's kind and
/// variant.
pub fn solve_design(problem: &DesignProblem) -> Result<(FilterTemplate, Option<MmcfDualState>)> {
    let za = !matches!(problem.variant, Variant::Conventional);
    match (problem.kind, za) {
        (DesignKind::Mace, false) => Ok((solve_mace(problem)?, None)),
        (DesignKind::Otsdf, false) => Ok((solve_otsdf(problem)?, None)),
        (DesignKind::Mosse, false) => Ok((solve_mosse(problem)?, None)),
        (DesignKind::Mmcf, false) => {
            let (t, d) = solve_mmcf(problem)?;
            Ok((t, Some(d)))
        }
        (DesignKind::Mace, true) | (DesignKind::Otsdf, true) => {
            Ok((solve_zamace(problem)?, None))
        }
        (DesignKind::Mosse, true) => Ok((solve_zamosse(problem)?, None)),
        (DesignKind::Mmcf, true) => {
            let (t, d) = solve_zammcf_closed(problem)?;
            Ok((t, Some(d)))
        }
    }
}
