//! Slow, obviously-correct reference implementations.
//!
//! Everything here trades speed for transparency: correlation by nested
//! modular loops, constraint matrices materialized densely, closed forms
//! evaluated exactly as printed instead of through the per-bin or reduced
//! factorizations used by the fast paths. Tests pit the fast solvers
//! against these; the CLI `selftest` command runs the same checks.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::constraints::ZaConstraintSystem;
use crate::designs::{DesignKind, DesignProblem, FilterTemplate, SolverKind, Variant};
use crate::error::{CfError, Result};
use crate::spectral::{CorrelationPlane, MultiChannelSignal, Spectrum};

/// Max `K * N_F * M_F` for the dense closed forms; they cube in the grid
/// size and exist only to cross-check the fast solvers at desk scale.
pub const DENSE_CAP: usize = 64;

/// Channel-summed circular cross-correlation by direct modular summation.
pub fn brute_circular(
    a: &MultiChannelSignal,
    b: &MultiChannelSignal,
    fft_size: (usize, usize),
) -> Result<CorrelationPlane> {
    if a.channels != b.channels {
        return Err(CfError::ChannelMismatch(a.channels, b.channels));
    }
    let (nf, mf) = fft_size;
    if nf < a.height.max(b.height) || mf < a.width.max(b.width) {
        return Err(CfError::Size(format!(
            "fft size {}x{} smaller than the operands",
            nf, mf
        )));
    }
    let mut data = vec![0.0; nf * mf];
    for tr in 0..nf {
        for tc in 0..mf {
            let mut acc = 0.0;
            for k in 0..a.channels {
                for r in 0..a.height {
                    for c in 0..a.width {
                        let br = (r + tr) % nf;
                        let bc = (c + tc) % mf;
                        if br < b.height && bc < b.width {
                            acc += a.at(k, r, c) * b.at(k, br, bc);
                        }
                    }
                }
            }
            data[tr * mf + tc] = acc;
        }
    }
    Ok(CorrelationPlane::new(nf, mf, data))
}

/// Channel-summed linear cross-correlation `c(tau) = sum a(n) b(n + tau)`
/// by direct summation, returned as a flat list over all nonzero lags
/// (row-major over `tau_r`, then `tau_c`).
pub fn brute_linear_lags(a: &MultiChannelSignal, b: &MultiChannelSignal) -> Vec<f64> {
    let mut out = Vec::new();
    for tr in -(a.height as i64 - 1)..(b.height as i64) {
        for tc in -(a.width as i64 - 1)..(b.width as i64) {
            let mut acc = 0.0;
            for k in 0..a.channels {
                for r in 0..a.height as i64 {
                    for c in 0..a.width as i64 {
                        let (br, bc) = (r + tr, c + tc);
                        if br >= 0 && bc >= 0 && (br as usize) < b.height && (bc as usize) < b.width
                        {
                            acc += a.at(k, r as usize, c as usize)
                                * b.at(k, br as usize, bc as usize);
                        }
                    }
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Mean (over training signals) total linear-correlation energy of the
/// template: the average correlation energy free of circular aliasing.
pub fn unaliased_ace(template: &MultiChannelSignal, training: &[MultiChannelSignal]) -> f64 {
    let mut total = 0.0;
    for x in training {
        total += brute_linear_lags(x, template).iter().map(|v| v * v).sum::<f64>();
    }
    total / training.len() as f64
}

/// Dense zero-aliasing constraint matrix. Rows index the tail positions
/// (channel-major, then row-major over the grid with the support block
/// skipped); columns follow the spectrum's flat layout. The conjugate of a
/// row dotted with a spectrum is the grid size times the complex spatial
/// tail sample, so a conjugate-symmetric spectrum satisfies all rows iff
/// its spatial tail is zero.
pub fn dense_za_matrix(system: &ZaConstraintSystem) -> DMatrix<Complex64> {
    let (nf, mf) = (system.fft_height, system.fft_width);
    let bins = nf * mf;
    let k = system.channels;
    let mut rows = Vec::new();
    for ch in 0..k {
        for n1 in 0..nf {
            for n2 in 0..mf {
                if n1 < system.support.height && n2 < system.support.width {
                    continue;
                }
                rows.push((ch, n1, n2));
            }
        }
    }
    DMatrix::from_fn(rows.len(), k * bins, |row, col| {
        let (ch, n1, n2) = rows[row];
        let (col_ch, rest) = (col / bins, col % bins);
        if col_ch != ch {
            return Complex64::new(0.0, 0.0);
        }
        let (r1, r2) = (rest / mf, rest % mf);
        let ang = -2.0 * std::f64::consts::PI
            * ((r1 * n1) as f64 / nf as f64 + (r2 * n2) as f64 / mf as f64);
        Complex64::new(ang.cos(), ang.sin())
    })
}

struct DenseSystem {
    t: DMatrix<Complex64>,
    /// Training spectra as columns, scaled by `1/B` so that `x' h` equals
    /// the spatial dot product with the template.
    xt: DMatrix<Complex64>,
    p: DMatrix<Complex64>,
    /// ZA constraint columns (empty for conventional variants).
    a: DMatrix<Complex64>,
    bins: usize,
}

fn assemble_dense(problem: &DesignProblem) -> Result<DenseSystem> {
    let k = problem.channels();
    let bins = problem.bins();
    let dim = k * bins;
    if dim > DENSE_CAP {
        return Err(CfError::SizeCapExceeded(dim, DENSE_CAP));
    }
    let spectra = problem.spectra()?;
    let desired = problem.desired_spectra()?;
    let l = spectra.len();
    let norm = 1.0 / (bins * l) as f64;

    let mut t = DMatrix::zeros(dim, dim);
    for x in &spectra {
        for r in 0..bins {
            for i in 0..k {
                for j in 0..k {
                    t[(i * bins + r, j * bins + r)] +=
                        x.bin(i, r) * x.bin(j, r).conj() * norm;
                }
            }
        }
    }
    for i in 0..dim {
        t[(i, i)] += Complex64::new(problem.delta, 0.0);
    }

    let xt = DMatrix::from_fn(dim, l, |row, col| {
        let (ch, r) = (row / bins, row % bins);
        spectra[col].bin(ch, r) / bins as f64
    });

    let mut p = DMatrix::zeros(dim, 1);
    for (x, g) in spectra.iter().zip(desired.iter()) {
        for r in 0..bins {
            for i in 0..k {
                p[(i * bins + r, 0)] += x.bin(i, r) * g.bin(0, r) * norm;
            }
        }
    }

    let a = if matches!(problem.variant, Variant::Conventional) {
        DMatrix::zeros(dim, 0)
    } else {
        // `A' = conj(rows)`, so the columns of `A` are the plain transpose
        // of the row matrix (no conjugation).
        dense_za_matrix(&problem.za_system()?).transpose()
    };

    Ok(DenseSystem { t, xt, p, a, bins })
}

fn template_from_dense(
    problem: &DesignProblem,
    h: DMatrix<Complex64>,
    bias: f64,
) -> Result<FilterTemplate> {
    let spectrum = Spectrum::from_data(
        problem.channels(),
        problem.fft_height,
        problem.fft_width,
        h.as_slice().to_vec(),
    )?;
    let model = problem.cross_power()?;
    let objective = model.objective(&spectrum) + model.desired_energy;
    let mut out = FilterTemplate::from_spectrum(spectrum, problem, SolverKind::ClosedForm);
    out.bias = bias;
    out.objective = objective;
    Ok(out)
}

/// Solves the design by evaluating the dense closed-form expressions
/// literally: `h = T^-1 B (B' T^-1 B)^-1 k` plus the desired-output term,
/// with `B` the stacked peak and ZA constraint columns.
pub fn dense_za_solve(problem: &DesignProblem) -> Result<FilterTemplate> {
    let sys = assemble_dense(problem)?;
    let ti = sys
        .t
        .clone()
        .try_inverse()
        .ok_or(CfError::SingularCrossPower(0))?;
    let tip = &ti * &sys.p;
    match problem.kind {
        DesignKind::Mace | DesignKind::Otsdf => {
            let l = problem.training_count();
            let nc = l + sys.a.ncols();
            let mut b = DMatrix::zeros(sys.t.nrows(), nc);
            b.view_mut((0, 0), (sys.t.nrows(), l)).copy_from(&sys.xt);
            b.view_mut((0, l), (sys.t.nrows(), sys.a.ncols())).copy_from(&sys.a);
            let mut kvec = DMatrix::zeros(nc, 1);
            for (i, &u) in problem.peaks.iter().enumerate() {
                kvec[(i, 0)] = Complex64::new(u, 0.0);
            }
            let btib = b.adjoint() * &ti * &b;
            let btib_inv = btib
                .try_inverse()
                .ok_or(CfError::RankDeficientConstraints)?;
            let h = &ti * &b * &btib_inv * (kvec - b.adjoint() * &tip) + tip;
            template_from_dense(problem, h, 0.0)
        }
        DesignKind::Mosse => {
            let h = if sys.a.ncols() == 0 {
                tip
            } else {
                let aia = sys.a.adjoint() * &ti * &sys.a;
                let aia_inv = aia
                    .try_inverse()
                    .ok_or(CfError::RankDeficientConstraints)?;
                let correction = &ti * &sys.a * &aia_inv * (sys.a.adjoint() * &tip);
                tip - correction
            };
            template_from_dense(problem, h, 0.0)
        }
        DesignKind::Mmcf => dense_mmcf(problem, &sys, &ti),
    }
}

fn dense_mmcf(
    problem: &DesignProblem,
    sys: &DenseSystem,
    ti: &DMatrix<Complex64>,
) -> Result<FilterTemplate> {
    if !problem.has_both_classes() {
        return Err(CfError::DegenerateLabels);
    }
    let l = problem.training_count();
    if l > 10 {
        return Err(CfError::SizeCapExceeded(l, 10));
    }
    // S v = the ZA-constrained minimizer of h'Th - 2 Re(h'v).
    let s_apply: Box<dyn Fn(&DMatrix<Complex64>) -> Result<DMatrix<Complex64>>> =
        if sys.a.ncols() == 0 {
            let ti = ti.clone();
            Box::new(move |v| Ok(&ti * v))
        } else {
            let aia = sys.a.adjoint() * ti * &sys.a;
            let aia_inv = aia
                .try_inverse()
                .ok_or(CfError::RankDeficientConstraints)?;
            let ti = ti.clone();
            let a = sys.a.clone();
            Box::new(move |v| {
                let tv = &ti * v;
                Ok(&tv - &ti * &a * &aia_inv * (a.adjoint() * &tv))
            })
        };

    let sp = s_apply(&sys.p)?;
    let sx = s_apply(&sys.xt)?;
    let y = &problem.labels;
    let m = DMatrix::from_fn(l, l, |i, j| {
        let g: Complex64 = (sys.xt.column(i).adjoint() * sx.column(j))[(0, 0)];
        -y[i] * y[j] * g.re
    });
    let d: Vec<f64> = (0..l)
        .map(|i| {
            let s: Complex64 = (sys.xt.column(i).adjoint() * &sp)[(0, 0)];
            2.0 * y[i] * (problem.peaks[i] - s.re)
        })
        .collect();
    let a_dual = box_qp_enumerate(&m, &d, problem.trade_off);

    let mut rhs = sys.p.clone();
    for i in 0..l {
        let coeff = Complex64::new(y[i] * a_dual[i], 0.0);
        rhs += DMatrix::from_fn(sys.t.nrows(), 1, |row, _| coeff * sys.xt[(row, i)]);
    }
    let h = s_apply(&rhs)?;

    let scores: Vec<f64> = (0..l)
        .map(|i| {
            let s: Complex64 = (sys.xt.column(i).adjoint() * &h)[(0, 0)];
            s.re
        })
        .collect();
    let c = problem.trade_off;
    let eps = 1e-8 * c.max(1.0);
    let free: Vec<usize> = (0..l)
        .filter(|&i| a_dual[i] > eps && a_dual[i] < c - eps)
        .collect();
    let bias = if free.is_empty() {
        0.0
    } else {
        free.iter()
            .map(|&i| y[i] * problem.peaks[i] - scores[i])
            .sum::<f64>()
            / free.len() as f64
    };
    let _ = sys.bins;
    template_from_dense(problem, h, bias)
}

/// Global maximizer of `a'Ma + a'd` over the box `[0, C]^L` by exhaustive
/// enumeration of face patterns (each coordinate at 0, at C, or free).
pub fn box_qp_enumerate(m: &DMatrix<f64>, d: &[f64], c: f64) -> Vec<f64> {
    let l = d.len();
    assert!(l <= 10, "enumeration oracle is for small duals only");
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
    let mut best = vec![0.0; l];
    let mut best_obj = objective(&best);
    let patterns = 3usize.pow(l as u32);
    for pat in 0..patterns {
        let mut code = pat;
        let mut state = vec![0u8; l];
        for s in state.iter_mut() {
            *s = (code % 3) as u8;
            code /= 3;
        }
        let free: Vec<usize> = (0..l).filter(|&i| state[i] == 2).collect();
        let mut a = vec![0.0; l];
        for i in 0..l {
            if state[i] == 1 {
                a[i] = c;
            }
        }
        if !free.is_empty() {
            // Stationarity on the free block: d_F + 2 (M a)_F = 0.
            let nf = free.len();
            let mm = DMatrix::from_fn(nf, nf, |i, j| -2.0 * m[(free[i], free[j])]);
            let rhs = DMatrix::from_fn(nf, 1, |i, _| {
                let mut v = d[free[i]];
                for j in 0..l {
                    if state[j] == 1 {
                        v += 2.0 * m[(free[i], j)] * c;
                    }
                }
                v
            });
            match mm.lu().solve(&rhs) {
                Some(sol) => {
                    let mut ok = true;
                    for i in 0..nf {
                        let v = sol[(i, 0)];
                        if !(-1e-9..=c + 1e-9).contains(&v) {
                            ok = false;
                            break;
                        }
                        a[free[i]] = v.clamp(0.0, c);
                    }
                    if !ok {
                        continue;
                    }
                }
                None => continue,
            }
        }
        let obj = objective(&a);
        if obj > best_obj {
            best_obj = obj;
            best = a;
        }
    }
    best
}

/// Time-domain MACE: minimizes the mean *linear* correlation energy over
/// all lags subject to the spatial peak constraints. Grid-free, so it is
/// the limit every padded frequency-domain design should approach.
pub fn tdmace(training: &[MultiChannelSignal], peaks: &[f64]) -> Result<MultiChannelSignal> {
    let first = training
        .first()
        .ok_or_else(|| CfError::ShapeMismatch("need at least one training signal".into()))?;
    let (k, n, m) = (first.channels, first.height, first.width);
    let dim = k * n * m;
    let l = training.len();
    if peaks.len() != l {
        return Err(CfError::ShapeMismatch("one peak value per training signal".into()));
    }

    // D_s = (1/L) sum_l A_l' A_l with A_l rows indexed by linear lags:
    // coefficient of h^k(m1, m2) at lag tau is x_l^k(m1 - tau_r, m2 - tau_c).
    let mut ds: DMatrix<f64> = DMatrix::zeros(dim, dim);
    let mut row = vec![0.0; dim];
    for x in training {
        for tr in -(n as i64 - 1)..(n as i64) {
            for tc in -(m as i64 - 1)..(m as i64) {
                for ch in 0..k {
                    for m1 in 0..n as i64 {
                        for m2 in 0..m as i64 {
                            let (sr, sc) = (m1 - tr, m2 - tc);
                            let idx = (ch * n as usize + m1 as usize) * m + m2 as usize;
                            row[idx] = if sr >= 0
                                && sc >= 0
                                && (sr as usize) < n
                                && (sc as usize) < m
                            {
                                x.at(ch, sr as usize, sc as usize)
                            } else {
                                0.0
                            };
                        }
                    }
                }
                for i in 0..dim {
                    if row[i] == 0.0 {
                        continue;
                    }
                    for j in 0..dim {
                        ds[(i, j)] += row[i] * row[j] / l as f64;
                    }
                }
            }
        }
    }

    let mut kkt = DMatrix::zeros(dim + l, dim + l);
    for i in 0..dim {
        for j in 0..dim {
            kkt[(i, j)] = 2.0 * ds[(i, j)];
        }
    }
    for (col, x) in training.iter().enumerate() {
        for (i, &v) in x.data().iter().enumerate() {
            kkt[(i, dim + col)] = v;
            kkt[(dim + col, i)] = v;
        }
    }
    let mut rhs = DMatrix::zeros(dim + l, 1);
    for (i, &u) in peaks.iter().enumerate() {
        rhs[(dim + i, 0)] = u;
    }
    let sol = kkt.lu().solve(&rhs).ok_or(CfError::RankDeficientTraining)?;
    let mut h = MultiChannelSignal::zeros(k, n, m);
    for i in 0..dim {
        h.data_mut()[i] = sol[(i, 0)];
    }
    Ok(h)
}

/// Spatial-domain oracle for the ZA quadratic designs: parameterizes the
/// template by its in-support coefficients, builds the circular-correlation
/// response of every basis vector by brute force, and solves the resulting
/// normal equations (with a KKT block for the peak-constrained kinds).
pub fn spatial_quadratic_oracle(problem: &DesignProblem) -> Result<MultiChannelSignal> {
    let (q, b, _) = reduced_quadratic(problem)?;
    let dim = q.nrows();
    match problem.kind {
        DesignKind::Mosse => {
            let sol = q.lu().solve(&b).ok_or(CfError::RankDeficientTraining)?;
            reduced_to_signal(problem, |i| sol[(i, 0)])
        }
        DesignKind::Mace | DesignKind::Otsdf => {
            let l = problem.training_count();
            let mut kkt = DMatrix::zeros(dim + l, dim + l);
            for i in 0..dim {
                for j in 0..dim {
                    kkt[(i, j)] = 2.0 * q[(i, j)];
                }
            }
            for (col, x) in problem.training.iter().enumerate() {
                for (i, &v) in x.data().iter().enumerate() {
                    kkt[(i, dim + col)] = v;
                    kkt[(dim + col, i)] = v;
                }
            }
            let mut rhs = DMatrix::zeros(dim + l, 1);
            for i in 0..dim {
                rhs[(i, 0)] = 2.0 * b[(i, 0)];
            }
            for (i, &u) in problem.peaks.iter().enumerate() {
                rhs[(dim + i, 0)] = u;
            }
            let sol = kkt
                .lu()
                .solve(&rhs)
                .ok_or(CfError::RankDeficientConstraints)?;
            reduced_to_signal(problem, |i| sol[(i, 0)])
        }
        DesignKind::Mmcf => Err(CfError::ShapeMismatch(
            "use squared_hinge_oracle for the max-margin kind".into(),
        )),
    }
}

fn reduced_to_signal(
    problem: &DesignProblem,
    get: impl Fn(usize) -> f64,
) -> Result<MultiChannelSignal> {
    let mut h = MultiChannelSignal::zeros(
        problem.channels(),
        problem.support.height,
        problem.support.width,
    );
    for i in 0..h.data().len() {
        h.data_mut()[i] = get(i);
    }
    Ok(h)
}

/// `Q = (1/L) sum_l C_l' C_l + delta * B * I` and `b = (1/L) sum_l C_l' g_l`
/// over the support coefficients, with `C_l` the brute-force circular
/// response matrix of training signal `l`. The returned scalar is the
/// constant term `sum_l ||g_l||^2 / L`.
fn reduced_quadratic(problem: &DesignProblem) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    let k = problem.channels();
    let (n, m) = (problem.support.height, problem.support.width);
    let dim = k * n * m;
    if k * problem.bins() > DENSE_CAP {
        return Err(CfError::SizeCapExceeded(k * problem.bins(), DENSE_CAP));
    }
    let l = problem.training_count();
    let bins = problem.bins();
    let grid = problem.fft_grid();

    // Response of every basis template, per training signal.
    let mut responses = vec![vec![Vec::new(); dim]; l];
    for j in 0..dim {
        let mut basis = MultiChannelSignal::zeros(k, n, m);
        basis.data_mut()[j] = 1.0;
        for (li, x) in problem.training.iter().enumerate() {
            let plane = brute_circular(x, &basis, grid)?;
            responses[li][j] = plane.data().to_vec();
        }
    }

    let mut q = DMatrix::zeros(dim, dim);
    let mut b = DMatrix::zeros(dim, 1);
    let mut constant = 0.0;
    for li in 0..l {
        let g: Vec<f64> = match problem.desired_plane(li) {
            Some(plane) => plane.data().to_vec(),
            None => vec![0.0; bins],
        };
        constant += g.iter().map(|v| v * v).sum::<f64>() / l as f64;
        for i in 0..dim {
            for j in 0..dim {
                let dot: f64 = responses[li][i]
                    .iter()
                    .zip(&responses[li][j])
                    .map(|(a, b)| a * b)
                    .sum();
                q[(i, j)] += dot / l as f64;
            }
            let dot: f64 = responses[li][i].iter().zip(&g).map(|(a, b)| a * b).sum();
            b[(i, 0)] += dot / l as f64;
        }
    }
    for i in 0..dim {
        q[(i, i)] += problem.delta * bins as f64;
    }
    Ok((q, b, constant))
}

/// Squared-hinge oracle for the max-margin ZA design: minimizes
/// `(lambda/2) h'Th + (1/2L) sum_l max(0, 1 - y_l (x_l . h + b))^2`
/// over the support coefficients and the bias, by active-set Newton
/// iteration (the objective is piecewise quadratic and convex).
pub fn squared_hinge_oracle(problem: &DesignProblem) -> Result<(MultiChannelSignal, f64, f64)> {
    if !problem.has_both_classes() {
        return Err(CfError::DegenerateLabels);
    }
    let lambda = 1.0 / problem.trade_off;
    let (q, _, _) = reduced_quadratic(problem)?;
    let dim = q.nrows();
    let l = problem.training_count();
    let y = &problem.labels;

    let score = |h: &DMatrix<f64>, li: usize| -> f64 {
        problem.training[li]
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v * h[(i, 0)])
            .sum()
    };
    let objective = |h: &DMatrix<f64>, bias: f64| -> f64 {
        let mut quad = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                quad += h[(i, 0)] * q[(i, j)] * h[(j, 0)];
            }
        }
        let mut hinge = 0.0;
        for li in 0..l {
            let margin = 1.0 - y[li] * (score(h, li) + bias);
            if margin > 0.0 {
                hinge += margin * margin;
            }
        }
        0.5 * lambda * quad + hinge / (2.0 * l as f64)
    };

    let mut h = DMatrix::zeros(dim, 1);
    let mut bias = 0.0;
    let mut active: Vec<bool> = vec![true; l];
    for _ in 0..200 {
        // Newton step on the quadratic restricted to the active set.
        let mut sys = DMatrix::zeros(dim + 1, dim + 1);
        let mut rhs = DMatrix::zeros(dim + 1, 1);
        for i in 0..dim {
            for j in 0..dim {
                sys[(i, j)] = lambda * q[(i, j)];
            }
        }
        let inv_l = 1.0 / l as f64;
        for li in 0..l {
            if !active[li] {
                continue;
            }
            let c = problem.training[li].data();
            for i in 0..dim {
                for j in 0..dim {
                    sys[(i, j)] += inv_l * c[i] * c[j];
                }
                sys[(i, dim)] += inv_l * c[i];
                sys[(dim, i)] += inv_l * c[i];
                rhs[(i, 0)] += inv_l * y[li] * c[i];
            }
            sys[(dim, dim)] += inv_l;
            rhs[(dim, 0)] += inv_l * y[li];
        }
        if active.iter().all(|a| !a) {
            break;
        }
        let sol = sys.lu().solve(&rhs).ok_or(CfError::RankDeficientTraining)?;
        let new_h = DMatrix::from_fn(dim, 1, |i, _| sol[(i, 0)]);
        let new_bias = sol[(dim, 0)];
        let new_active: Vec<bool> = (0..l)
            .map(|li| y[li] * (score(&new_h, li) + new_bias) < 1.0)
            .collect();
        let converged = new_active == active;
        h = new_h;
        bias = new_bias;
        active = new_active;
        if converged {
            break;
        }
    }
    let obj = objective(&h, bias);
    let template = reduced_to_signal(problem, |i| h[(i, 0)])?;
    Ok((template, bias, obj))
}
