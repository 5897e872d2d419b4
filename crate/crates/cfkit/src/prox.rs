//! Accelerated proximal-gradient solvers for the zero-aliasing designs.
//!
//! The dense ZA closed forms cube in the grid size; these solvers only ever
//! touch per-bin products and FFTs, so they scale to real image sizes. Each
//! iteration takes an exact step along the gradient of the smooth part and
//! then applies the prox operator: support projection for the tail
//! constraints, plus a spatial peak correction for the equality-constrained
//! designs. Momentum follows the `(t - 1) / (t + 2)` schedule with a
//! restart whenever the objective backslides.

use num_complex::Complex64;

use crate::constraints::{CrossPowerModel, ZaConstraintSystem};
use crate::designs::{self, DesignKind, DesignProblem, FilterTemplate, SolverKind};
use crate::error::{CfError, Result};
use crate::spectral::{self, Spectrum};

#[derive(Debug, Clone, Copy)]
pub struct ProxConfig {
    /// Relative objective-change tolerance for termination.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Newton refinements of the line search in the hinge solver.
    pub newton_steps: usize,
    pub newton_tolerance: f64,
}

impl Default for ProxConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 20_000,
            newton_steps: 20,
            newton_tolerance: 1e-12,
        }
    }
}

/// One line per iteration, exportable as CSV.
#[derive(Debug, Clone)]
pub struct ProxTraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub step: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ProxTrace {
    pub rows: Vec<ProxTraceRow>,
}

#[derive(Debug, Clone)]
pub struct ProxResult {
    pub template: FilterTemplate,
    pub trace: ProxTrace,
    pub iterations: usize,
    pub converged: bool,
}

/// Exact minimizing step along the gradient of `h'Th - 2 Re(h'p)`:
/// `eta = ||g||^2 / (2 g'Tg)`.
pub fn exact_quadratic_step(model: &CrossPowerModel, g: &Spectrum) -> Result<f64> {
    let num = g.norm_sq();
    if num == 0.0 {
        return Err(CfError::ZeroGradient);
    }
    let denom = 2.0 * model.quad_form(g);
    if denom <= 0.0 {
        return Err(CfError::ZeroGradient);
    }
    Ok(num / denom)
}

fn relative_change(new: f64, old: f64) -> f64 {
    (new - old).abs() / old.abs().max(1e-300)
}

/// The exact quadratic step ignores the prox, which can turn it into an
/// ascent step after projection; halve until the projected objective does
/// not increase.
fn backtracked_step(
    w: &Spectrum,
    g: &Spectrum,
    mut eta: f64,
    prox: impl Fn(&Spectrum) -> Result<Spectrum>,
    objective: impl Fn(&Spectrum) -> f64,
) -> Result<(Spectrum, f64)> {
    let f_w = objective(w);
    let mut best = None;
    for _ in 0..60 {
        let mut moved = w.clone();
        moved.axpy(Complex64::new(-eta, 0.0), g);
        let candidate = prox(&moved)?;
        let f_c = objective(&candidate);
        if f_c <= f_w + 1e-14 * f_w.abs().max(1.0) {
            return Ok((candidate, eta));
        }
        if best.is_none() {
            best = Some((candidate, eta));
        }
        eta *= 0.5;
    }
    let (candidate, eta) = best.expect("at least one trial step");
    Ok((candidate, eta))
}

/// Shared accelerated loop: `step(w)` returns the next iterate and the step
/// length used, `objective(v)` scores it.
fn accelerated_loop(
    init: Spectrum,
    config: &ProxConfig,
    system: &ZaConstraintSystem,
    mut step: impl FnMut(&Spectrum) -> Result<(Spectrum, f64)>,
    mut objective: impl FnMut(&Spectrum) -> f64,
) -> Result<(Spectrum, ProxTrace, usize, bool)> {
    let mut trace = ProxTrace::default();
    let mut v = init;
    let mut w = v.clone();
    let mut f_prev = objective(&v);
    let mut t = 1usize;
    let mut converged = false;
    let mut iterations = 0usize;
    trace.rows.push(ProxTraceRow {
        iteration: 0,
        objective: f_prev,
        step: 0.0,
        residual: system.constraint_residual(&v)?,
    });
    for iter in 1..=config.max_iterations {
        iterations = iter;
        let (v_next, eta) = step(&w)?;
        let f_next = objective(&v_next);
        trace.rows.push(ProxTraceRow {
            iteration: iter,
            objective: f_next,
            step: eta,
            residual: system.constraint_residual(&v_next)?,
        });
        let backslide = f_next > f_prev + 10.0 * config.tolerance * f_prev.abs().max(1.0);
        if relative_change(f_next, f_prev) < config.tolerance {
            v = v_next;
            converged = true;
            break;
        }
        if backslide {
            // Momentum restart: drop the extrapolation and start over from
            // the best iterate. A backslide without any extrapolation means
            // the iteration has hit its numerical floor.
            if t == 1 {
                converged = true;
                break;
            }
            t = 1;
            w = v.clone();
            continue;
        }
        let beta = (t as f64 - 1.0) / (t as f64 + 2.0);
        let mut w_next = v_next.clone();
        let mut diff = v_next.clone();
        diff.axpy(Complex64::new(-1.0, 0.0), &v);
        w_next.axpy(Complex64::new(beta, 0.0), &diff);
        v = v_next;
        w = w_next;
        f_prev = f_next;
        t += 1;
    }
    Ok((v, trace, iterations, converged))
}

fn finish(
    problem: &DesignProblem,
    model: &CrossPowerModel,
    h: Spectrum,
    bias: f64,
    trace: ProxTrace,
    iterations: usize,
    converged: bool,
) -> ProxResult {
    let objective = model.objective(&h) + model.desired_energy;
    let mut template = FilterTemplate::from_spectrum(h, problem, SolverKind::Prox);
    template.bias = bias;
    template.objective = objective;
    template.iterations = iterations;
    ProxResult { template, trace, iterations, converged }
}

/// Unconstrained ZA solver (the ZAMOSSE case): gradient step on the
/// localization loss, tail projection as the prox.
pub fn prox_unconstrained(problem: &DesignProblem, config: &ProxConfig) -> Result<ProxResult> {
    let model = problem.cross_power()?;
    let system = problem.za_system()?;
    let init = system.project(&designs::solve_mosse(problem)?.spectrum)?;
    let (h, trace, iterations, converged) = accelerated_loop(
        init,
        config,
        &system,
        |w| {
            let g = model.gradient(w);
            let eta = match exact_quadratic_step(&model, &g) {
                Ok(eta) => eta,
                Err(CfError::ZeroGradient) => return Ok((w.clone(), 0.0)),
                Err(e) => return Err(e),
            };
            backtracked_step(w, &g, eta, |s| system.project(s), |v| {
                model.objective(v) + model.desired_energy
            })
        },
        |v| model.objective(v) + model.desired_energy,
    )?;
    Ok(finish(problem, &model, h, 0.0, trace, iterations, converged))
}

/// Prox for the equality-constrained designs: tail projection followed by
/// the minimum-norm spatial correction restoring `x_l . h = u_l`.
struct PeakCorrector {
    gram_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl PeakCorrector {
    fn new(problem: &DesignProblem) -> Result<Self> {
        let l = problem.training_count();
        let gram = nalgebra::DMatrix::from_fn(l, l, |i, j| {
            problem.training[i].dot(&problem.training[j])
        });
        let lu = gram.lu();
        if lu.determinant().abs() < 1e-300 {
            return Err(CfError::RankDeficientTraining);
        }
        Ok(Self { gram_lu: lu })
    }

    fn apply(
        &self,
        problem: &DesignProblem,
        system: &ZaConstraintSystem,
        spectrum: &Spectrum,
    ) -> Result<Spectrum> {
        let mut cropped = system.crop_spatial(spectrum)?;
        let l = problem.training_count();
        let rhs = nalgebra::DMatrix::from_fn(l, 1, |i, _| {
            problem.peaks[i] - problem.training[i].dot(&cropped)
        });
        let coef = self
            .gram_lu
            .solve(&rhs)
            .ok_or(CfError::RankDeficientTraining)?;
        for (i, x) in problem.training.iter().enumerate() {
            let c = coef[(i, 0)];
            for (dst, src) in cropped.data_mut().iter_mut().zip(x.data()) {
                *dst += c * src;
            }
        }
        let padded = spectral::zero_pad(&cropped, problem.fft_grid())?;
        spectral::forward_dft(&padded, problem.fft_grid())
    }
}

/// Equality-constrained ZA solver (ZAMACE/ZAOTSDF).
pub fn prox_equality(problem: &DesignProblem, config: &ProxConfig) -> Result<ProxResult> {
    let model = problem.cross_power()?;
    let system = problem.za_system()?;
    let corrector = PeakCorrector::new(problem)?;
    let conventional = designs::solve_mace(problem)?;
    let init = corrector.apply(problem, &system, &conventional.spectrum)?;
    let (h, trace, iterations, converged) = accelerated_loop(
        init,
        config,
        &system,
        |w| {
            let g = model.gradient(w);
            let eta = match exact_quadratic_step(&model, &g) {
                Ok(eta) => eta,
                Err(CfError::ZeroGradient) => return Ok((w.clone(), 0.0)),
                Err(e) => return Err(e),
            };
            backtracked_step(
                w,
                &g,
                eta,
                |s| corrector.apply(problem, &system, s),
                |v| model.objective(v) + model.desired_energy,
            )
        },
        |v| model.objective(v) + model.desired_energy,
    )?;
    Ok(finish(problem, &model, h, 0.0, trace, iterations, converged))
}

/// Squared-hinge state for the max-margin solver.
struct HingeModel<'a> {
    problem: &'a DesignProblem,
    model: CrossPowerModel,
    spectra: Vec<Spectrum>,
    lambda: f64,
}

impl HingeModel<'_> {
    fn scores(&self, h: &Spectrum) -> Vec<f64> {
        let bins = self.problem.bins() as f64;
        self.spectra
            .iter()
            .map(|x| (x.herm_dot(h) / bins).re)
            .collect()
    }

    fn objective(&self, h: &Spectrum, bias: f64) -> f64 {
        let l = self.problem.training_count() as f64;
        let quad = 0.5 * self.lambda * h.herm_dot(&self.model.apply_t(h)).re;
        let scores = self.scores(h);
        let hinge: f64 = scores
            .iter()
            .zip(&self.problem.labels)
            .map(|(&s, &y)| {
                let margin = 1.0 - y * (s + bias);
                if margin > 0.0 {
                    margin * margin
                } else {
                    0.0
                }
            })
            .sum();
        quad + hinge / (2.0 * l)
    }

    /// Closed-form bias update: mean of `y_l - s_l` over the active set,
    /// iterated twice because the active set depends on the bias.
    fn update_bias(&self, scores: &[f64], mut bias: f64) -> f64 {
        for _ in 0..2 {
            let mut sum = 0.0;
            let mut count = 0usize;
            for (l, &s) in scores.iter().enumerate() {
                let y = self.problem.labels[l];
                if y * (s + bias) < 1.0 {
                    sum += y - s;
                    count += 1;
                }
            }
            if count == 0 {
                break;
            }
            bias = sum / count as f64;
        }
        bias
    }

    fn gradient(&self, h: &Spectrum, bias: f64, scores: &[f64]) -> Spectrum {
        let mut g = self.model.apply_t(h);
        g.scale(self.lambda);
        let l = self.problem.training_count() as f64;
        let bins = self.problem.bins() as f64;
        for (i, &s) in scores.iter().enumerate() {
            let y = self.problem.labels[i];
            if y * (s + bias) < 1.0 {
                let coeff = (s + bias - y) / (l * bins);
                g.axpy(Complex64::new(coeff, 0.0), &self.spectra[i]);
            }
        }
        g
    }

    /// Exact step for the quadratic model at the current active set,
    /// refined by Newton steps on the piecewise-quadratic line function.
    fn line_search(&self, h: &Spectrum, bias: f64, g: &Spectrum, config: &ProxConfig) -> f64 {
        let l = self.problem.training_count() as f64;
        let bins = self.problem.bins() as f64;
        let scores = self.scores(h);
        let g_scores: Vec<f64> = self
            .spectra
            .iter()
            .map(|x| (x.herm_dot(g) / bins).re)
            .collect();
        let mut curvature = self.lambda * self.model.quad_form(g);
        for (i, &gs) in g_scores.iter().enumerate() {
            let y = self.problem.labels[i];
            if y * (scores[i] + bias) < 1.0 {
                curvature += gs * gs / l;
            }
        }
        let num = g.norm_sq();
        if num == 0.0 || curvature <= 0.0 {
            return 0.0;
        }
        let mut eta = num / curvature;
        // phi(eta) = objective(h - eta g, bias); Newton on phi'.
        for _ in 0..config.newton_steps {
            let mut d1 = -self.lambda * {
                // Re(g' T (h - eta g)) = Re(g'Th) - eta g'Tg.
                let th = self.model.apply_t(h);
                g.herm_dot(&th).re - eta * self.model.quad_form(g)
            };
            let mut d2 = self.lambda * self.model.quad_form(g);
            for (i, &gs) in g_scores.iter().enumerate() {
                let y = self.problem.labels[i];
                let s = scores[i] - eta * gs;
                if y * (s + bias) < 1.0 {
                    d1 += (s + bias - y) * (-gs) / l;
                    d2 += gs * gs / l;
                }
            }
            // d1 currently holds phi'(eta) with the sign from moving along -g.
            if d2 <= 0.0 || d1.abs() < config.newton_tolerance * (1.0 + eta.abs()) {
                break;
            }
            eta -= d1 / d2;
        }
        eta.max(0.0)
    }
}

/// Squared-hinge max-margin ZA solver (the ZAMMCF case).
pub fn prox_inequality(problem: &DesignProblem, config: &ProxConfig) -> Result<ProxResult> {
    if !problem.has_both_classes() {
        return Err(CfError::DegenerateLabels);
    }
    if problem.trade_off <= 0.0 {
        return Err(CfError::ShapeMismatch("trade-off C must be positive".into()));
    }
    let model = problem.cross_power()?;
    let system = problem.za_system()?;
    let spectra = problem.spectra()?;
    let hinge = HingeModel {
        problem,
        model: model.clone(),
        spectra,
        lambda: 1.0 / problem.trade_off,
    };
    let (conventional, _) = designs::solve_mmcf(problem)?;
    let init = system.project(&conventional.spectrum)?;
    let mut bias = conventional.bias;
    {
        let scores = hinge.scores(&init);
        bias = hinge.update_bias(&scores, bias);
    }
    let bias_cell = std::cell::Cell::new(bias);
    let (h, trace, iterations, converged) = accelerated_loop(
        init,
        config,
        &system,
        |w| {
            let scores = hinge.scores(w);
            let b = hinge.update_bias(&scores, bias_cell.get());
            bias_cell.set(b);
            let g = hinge.gradient(w, b, &scores);
            let eta = hinge.line_search(w, b, &g, config);
            if eta == 0.0 {
                return Ok((w.clone(), 0.0));
            }
            backtracked_step(w, &g, eta, |s| system.project(s), |v| hinge.objective(v, b))
        },
        |v| hinge.objective(v, bias_cell.get()),
    )?;
    let scores = hinge.scores(&h);
    let final_bias = hinge.update_bias(&scores, bias_cell.get());
    let hinge_objective = hinge.objective(&h, final_bias);
    let mut result = finish(problem, &model, h, final_bias, trace, iterations, converged);
    result.template.objective = hinge_objective;
    Ok(result)
}

/// Dispatches to the prox solver matching the problem kind.
pub fn solve_prox(problem: &DesignProblem, config: &ProxConfig) -> Result<ProxResult> {
    match problem.kind {
        DesignKind::Mace | DesignKind::Otsdf => prox_equality(problem, config),
        DesignKind::Mosse => prox_unconstrained(problem, config),
        DesignKind::Mmcf => prox_inequality(problem, config),
    }
}
