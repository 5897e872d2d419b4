//! Correlation-plane scoring and recognition/localization metrics.
//!
//! Filters are always *applied* by linear correlation, whatever metric they
//! were trained under; the gap between the circular training metric and
//! this test-time behavior is exactly what the zero-aliasing designs close.

use crate::designs::{DesignKind, DesignProblem, FilterTemplate};
use crate::error::{CfError, Result};
use crate::spectral::{self, CorrelationPlane, MultiChannelSignal};

/// Floor for ratio denominators and its matching cap.
pub const EPSILON: f64 = 1e-30;
pub const SCORE_CAP: f64 = 1e30;

/// Half-width of the peak exclusion window used by PCE and PSR.
pub const DEFAULT_PEAK_WINDOW: usize = 2;

/// A correlation plane with its peak located.
#[derive(Debug, Clone)]
pub struct ScoredPlane {
    pub plane: CorrelationPlane,
    pub peak_value: f64,
    pub peak_row: usize,
    pub peak_col: usize,
}

impl ScoredPlane {
    pub fn new(plane: CorrelationPlane) -> Self {
        let (peak_value, peak_row, peak_col) = plane.peak();
        Self { plane, peak_value, peak_row, peak_col }
    }

    /// Peak position as a signed lag: the predicted target offset in the
    /// scene (negative lags mean partial overlap past the scene edge).
    pub fn location(&self) -> (i64, i64) {
        self.plane.signed_lag(self.peak_row, self.peak_col)
    }

    pub fn pce(&self, window: usize) -> f64 {
        let masked = self.masked_values(window);
        if masked.is_empty() {
            return SCORE_CAP;
        }
        let mean_energy = masked.iter().map(|v| v * v).sum::<f64>() / masked.len() as f64;
        (self.peak_value * self.peak_value / mean_energy.max(EPSILON)).min(SCORE_CAP)
    }

    pub fn psr(&self, window: usize) -> f64 {
        let masked = self.masked_values(window);
        if masked.is_empty() {
            return SCORE_CAP;
        }
        let mean = masked.iter().sum::<f64>() / masked.len() as f64;
        let var = masked.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / masked.len() as f64;
        let sd = var.sqrt();
        ((self.peak_value - mean) / sd.max(EPSILON)).min(SCORE_CAP)
    }

    /// Plane values outside the `(2w+1)^2` window centered on the peak
    /// (wrapped on the plane torus).
    fn masked_values(&self, window: usize) -> Vec<f64> {
        let (h, w) = (self.plane.height, self.plane.width);
        let mut out = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                let dr = wrapped_distance(r, self.peak_row, h);
                let dc = wrapped_distance(c, self.peak_col, w);
                if dr <= window && dc <= window {
                    continue;
                }
                out.push(self.plane.at(r, c));
            }
        }
        out
    }
}

fn wrapped_distance(a: usize, b: usize, modulus: usize) -> usize {
    let d = (a as i64 - b as i64).rem_euclid(modulus as i64) as usize;
    d.min(modulus - d)
}

/// Applies a filter to a scene: linear correlation with the support-cropped
/// template, plus the bias for the max-margin designs.
pub fn apply_filter(scene: &MultiChannelSignal, template: &FilterTemplate) -> Result<ScoredPlane> {
    let cropped = template.cropped();
    if cropped.channels != scene.channels {
        return Err(CfError::ChannelMismatch(cropped.channels, scene.channels));
    }
    let mut plane = spectral::linear_correlate(&cropped, scene)?;
    if template.bias != 0.0 {
        for v in plane.data_mut() {
            *v += template.bias;
        }
    }
    Ok(ScoredPlane::new(plane))
}

/// Equal error rate of pooled genuine/impostor score populations, with
/// linear interpolation between the threshold samples where the false
/// accept and false reject rates cross.
pub fn eer(genuine: &[f64], impostor: &[f64]) -> Result<f64> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(CfError::EmptyScores);
    }
    let far = |t: f64| impostor.iter().filter(|&&s| s >= t).count() as f64 / impostor.len() as f64;
    let frr = |t: f64| genuine.iter().filter(|&&s| s < t).count() as f64 / genuine.len() as f64;
    let mut thresholds: Vec<f64> = genuine.iter().chain(impostor.iter()).copied().collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();
    // Bracket the sweep so FAR starts at 1 and ends at 0.
    let lo = thresholds[0] - 1.0;
    let hi = thresholds[thresholds.len() - 1] + 1.0;
    thresholds.insert(0, lo);
    thresholds.push(hi);

    let mut prev = (far(lo), frr(lo));
    let mut prev_t = lo;
    for &t in &thresholds[1..] {
        let cur = (far(t), frr(t));
        let d_prev = prev.0 - prev.1;
        let d_cur = cur.0 - cur.1;
        if d_cur <= 0.0 {
            if d_cur == 0.0 {
                return Ok((cur.0 + cur.1) / 2.0);
            }
            if d_prev == d_cur {
                return Ok((prev.0 + prev.1) / 2.0);
            }
            let alpha = d_prev / (d_prev - d_cur);
            let f = prev.0 + alpha * (cur.0 - prev.0);
            let r = prev.1 + alpha * (cur.1 - prev.1);
            return Ok((f + r) / 2.0);
        }
        prev = cur;
        prev_t = t;
    }
    let _ = prev_t;
    // FAR stayed above FRR across the sweep; past the last score both are
    // pinned at (0, 1) which cannot happen, so this is unreachable for
    // non-empty inputs, but keep a conservative answer.
    Ok((prev.0 + prev.1) / 2.0)
}

/// Fraction of probes whose highest score lands on the true class
/// (row-major first-index tie-breaking through strict comparison).
pub fn rank1(scores: &[Vec<f64>], truth: &[usize]) -> Result<f64> {
    if scores.is_empty() || scores.len() != truth.len() {
        return Err(CfError::EmptyScores);
    }
    let mut hits = 0usize;
    for (row, &want) in scores.iter().zip(truth) {
        let mut best = 0usize;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        if best == want {
            hits += 1;
        }
    }
    Ok(hits as f64 / truth.len() as f64)
}

/// Inclusive per-axis localization check.
pub fn localization_hit(
    predicted: (i64, i64),
    truth: (i64, i64),
    tolerance: (f64, f64),
) -> bool {
    let dr = (predicted.0 - truth.0).abs() as f64;
    let dc = (predicted.1 - truth.1).abs() as f64;
    dr <= tolerance.0 && dc <= tolerance.1
}

/// Localization error normalized by the inter-eye distance, the standard
/// scale-free registration metric.
pub fn normalized_eye_distance(
    truth: (f64, f64),
    predicted: (f64, f64),
    left_eye: (f64, f64),
    right_eye: (f64, f64),
) -> Result<f64> {
    let base = ((left_eye.0 - right_eye.0).powi(2) + (left_eye.1 - right_eye.1).powi(2)).sqrt();
    if base < EPSILON {
        return Err(CfError::DegenerateEyes);
    }
    let err = ((truth.0 - predicted.0).powi(2) + (truth.1 - predicted.1).powi(2)).sqrt();
    Ok(err / base)
}

/// A probe scene with its class and, when known, the true target offset.
#[derive(Debug, Clone)]
pub struct LabeledScene {
    pub scene: MultiChannelSignal,
    pub class: usize,
    pub location: Option<(i64, i64)>,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    /// Per-probe, per-class scores.
    pub scores: Vec<Vec<f64>>,
    /// Per-probe predicted location under the true-class template.
    pub locations: Vec<(i64, i64)>,
    pub rank1: f64,
    pub eer: f64,
    /// Fraction of located probes within tolerance (1.0 when none carry
    /// a location).
    pub localization_rate: f64,
}

/// Scores every probe against every class template (PCE by default, PSR on
/// request) and aggregates recognition and localization metrics.
pub fn evaluate_suite(
    templates: &[FilterTemplate],
    probes: &[LabeledScene],
    use_psr: bool,
    window: usize,
) -> Result<SuiteReport> {
    if probes.is_empty() || templates.is_empty() {
        return Err(CfError::EmptyScores);
    }
    let mut scores = Vec::with_capacity(probes.len());
    let mut locations = Vec::with_capacity(probes.len());
    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    let mut located = 0usize;
    let mut hits = 0usize;
    for probe in probes {
        if probe.class >= templates.len() {
            return Err(CfError::MissingTemplate(probe.class));
        }
        let mut row = Vec::with_capacity(templates.len());
        let mut true_location = (0, 0);
        for (ci, template) in templates.iter().enumerate() {
            let scored = apply_filter(&probe.scene, template)?;
            let score = if use_psr { scored.psr(window) } else { scored.pce(window) };
            if ci == probe.class {
                genuine.push(score);
                true_location = scored.location();
            } else {
                impostor.push(score);
            }
            row.push(score);
        }
        if let Some(truth) = probe.location {
            located += 1;
            let t = &templates[probe.class];
            let tol = (t.support.height as f64 / 2.0, t.support.width as f64 / 2.0);
            if localization_hit(true_location, truth, tol) {
                hits += 1;
            }
        }
        scores.push(row);
        locations.push(true_location);
    }
    let truth: Vec<usize> = probes.iter().map(|p| p.class).collect();
    let rank1 = rank1(&scores, &truth)?;
    let eer = if impostor.is_empty() { 0.0 } else { eer(&genuine, &impostor)? };
    let localization_rate = if located == 0 { 1.0 } else { hits as f64 / located as f64 };
    Ok(SuiteReport { scores, locations, rank1, eer, localization_rate })
}

/// A mining frame: a scene known to contain no target, except possibly at
/// an annotated location to exclude.
#[derive(Debug, Clone)]
pub struct MiningFrame {
    pub scene: MultiChannelSignal,
    pub exclusion: Option<(i64, i64)>,
}

#[derive(Debug, Clone)]
pub struct MiningReport {
    /// The training set with mined hard negatives appended.
    pub problem: DesignProblem,
    pub mined: usize,
    pub pre_template: FilterTemplate,
    pub post_template: FilterTemplate,
}

const MAX_MINES_PER_FRAME: usize = 10;

/// Trains the design, scans the frames for false alarms above `threshold`,
/// appends template-sized windows around them as negative training samples
/// and retrains.
pub fn mine_and_retrain(
    problem: &DesignProblem,
    frames: &[MiningFrame],
    threshold: f64,
) -> Result<MiningReport> {
    let (pre_template, _) = crate::designs::solve_design(problem)?;
    let (th, tw) = (problem.support.height, problem.support.width);
    let mut mined_windows = Vec::new();
    for frame in frames {
        let scored = apply_filter(&frame.scene, &pre_template)?;
        let mut plane = scored.plane.clone();
        for _ in 0..MAX_MINES_PER_FRAME {
            let (value, pr, pc) = plane.peak();
            if value < threshold {
                break;
            }
            let (lr, lc) = plane.signed_lag(pr, pc);
            // Suppress this peak's neighborhood before the next pass.
            let (ph, pw) = (plane.height, plane.width);
            for r in 0..ph {
                for c in 0..pw {
                    if wrapped_distance(r, pr, ph) < th && wrapped_distance(c, pc, pw) < tw {
                        plane.data_mut()[r * pw + c] = f64::NEG_INFINITY;
                    }
                }
            }
            if let Some((er, ec)) = frame.exclusion {
                if (lr - er).unsigned_abs() < th as u64 && (lc - ec).unsigned_abs() < tw as u64 {
                    continue;
                }
            }
            // Clamp the window fully inside the scene.
            let max_r = frame.scene.height.saturating_sub(th) as i64;
            let max_c = frame.scene.width.saturating_sub(tw) as i64;
            if max_r < 0 || max_c < 0 {
                break;
            }
            let r0 = lr.clamp(0, max_r) as usize;
            let c0 = lc.clamp(0, max_c) as usize;
            let mut window = MultiChannelSignal::zeros(frame.scene.channels, th, tw);
            for k in 0..frame.scene.channels {
                for r in 0..th {
                    for c in 0..tw {
                        window.set(k, r, c, frame.scene.at(k, r0 + r, c0 + c));
                    }
                }
            }
            // Empty or duplicated windows would make the retraining
            // constraints singular.
            if window.energy() < EPSILON {
                continue;
            }
            let duplicate = mined_windows.iter().any(|w: &MultiChannelSignal| {
                w.data()
                    .iter()
                    .zip(window.data())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0_f64, f64::max)
                    < 1e-9
            });
            if duplicate {
                continue;
            }
            mined_windows.push(window);
        }
    }

    // Equality-constrained designs cannot carry more peak constraints than
    // free template coefficients; keep one degree of freedom spare.
    if !matches!(problem.kind, DesignKind::Mmcf) {
        let free = match problem.variant {
            crate::designs::Variant::Conventional => problem.channels() * problem.bins(),
            _ => problem.channels() * problem.support.len(),
        };
        let room = free.saturating_sub(1).saturating_sub(problem.training.len());
        mined_windows.truncate(room);
    }
    let mut retrained = problem.clone();
    let mined = mined_windows.len();
    for window in mined_windows {
        retrained.training.push(window);
        retrained.labels.push(-1.0);
        retrained.peaks.push(match problem.kind {
            DesignKind::Mmcf => 1.0,
            _ => 0.0,
        });
    }
    let (post_template, _) = crate::designs::solve_design(&retrained)?;
    Ok(MiningReport { problem: retrained, mined, pre_template, post_template })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{DesignKind, DesignProblem, Variant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(rng: &mut ChaCha8Rng, k: usize, n: usize, m: usize) -> MultiChannelSignal {
        let data: Vec<f64> = (0..k * n * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        MultiChannelSignal::new(k, n, m, data).unwrap()
    }

    fn embed(
        scene: &mut MultiChannelSignal,
        patch: &MultiChannelSignal,
        row: usize,
        col: usize,
    ) {
        for k in 0..patch.channels {
            for r in 0..patch.height {
                for c in 0..patch.width {
                    let v = scene.at(k, row + r, col + c) + patch.at(k, r, c);
                    scene.set(k, row + r, col + c, v);
                }
            }
        }
    }

    #[test]
    fn trained_filter_peaks_at_target_offset_with_unit_height() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let training: Vec<_> = (0..2).map(|_| random_signal(&mut rng, 1, 6, 6)).collect();
        let p = DesignProblem::new(
            training.clone(), vec![1.0, 1.0], DesignKind::Mace,
            Variant::ZeroAliasing, (11, 11), 0.0, 1.0,
        )
        .unwrap();
        let t = crate::designs::solve_zamace(&p).unwrap();
        let mut scene = MultiChannelSignal::zeros(1, 20, 20);
        embed(&mut scene, &training[0], 7, 4);
        let scored = apply_filter(&scene, &t).unwrap();
        assert_eq!(scored.location(), (7, 4));
        // The peak constraint is a spatial dot product, so an aligned
        // training image scores exactly u = 1.
        assert!((scored.peak_value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn pce_hand_cases() {
        // Lone spike: sidelobe energy is zero, so the ratio caps.
        let mut data = vec![0.0; 49];
        data[24] = 2.0;
        let plane = CorrelationPlane::new(7, 7, data);
        let scored = ScoredPlane::new(plane);
        assert_eq!(scored.pce(1), SCORE_CAP);
        // Spike of 2 over a unit background, window 0: masked mean energy
        // is 1, so PCE = 4.
        let mut data = vec![1.0; 9];
        data[4] = 2.0;
        let plane = CorrelationPlane::new(3, 3, data);
        let scored = ScoredPlane::new(plane);
        assert!((scored.pce(0) - 4.0).abs() < 1e-12);
        // Window 2 on a 3x3 plane masks everything.
        assert_eq!(scored.pce(2), SCORE_CAP);
    }

    #[test]
    fn psr_hand_case() {
        // Background alternating 0/2 (mean 1, sd 1), peak 5, window 0.
        let data = vec![0.0, 2.0, 0.0, 2.0, 5.0, 2.0, 0.0, 2.0, 0.0];
        let plane = CorrelationPlane::new(3, 3, data);
        let scored = ScoredPlane::new(plane);
        // Masked: four 0s and four 2s -> mean 1, sd 1 -> PSR 4.
        assert!((scored.psr(0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn peak_tie_breaks_row_major() {
        let data = vec![0.0, 3.0, 0.0, 3.0, 0.0, 0.0];
        let plane = CorrelationPlane::new(2, 3, data);
        let scored = ScoredPlane::new(plane);
        assert_eq!((scored.peak_row, scored.peak_col), (0, 1));
    }

    #[test]
    fn eer_hand_enumeration() {
        // One impostor (0.5) above one genuine (0.4): FAR = FRR = 1/4 at
        // any threshold between them.
        let genuine = [0.9, 0.8, 0.7, 0.4];
        let impostor = [0.5, 0.3, 0.2, 0.1];
        let e = eer(&genuine, &impostor).unwrap();
        assert!((e - 0.25).abs() < 1e-12);
        // Perfect separation.
        let e = eer(&[0.9, 0.8], &[0.1, 0.2]).unwrap();
        assert!(e.abs() < 1e-12);
        // Identical populations sit at chance.
        let e = eer(&[0.5, 0.6], &[0.5, 0.6]).unwrap();
        assert!((e - 0.5).abs() < 0.26);
        assert!(matches!(eer(&[], &[1.0]), Err(CfError::EmptyScores)));
    }

    #[test]
    fn rank1_counts_strict_maxima() {
        let scores = vec![
            vec![0.9, 0.1, 0.2],
            vec![0.3, 0.8, 0.2],
            vec![0.5, 0.5, 0.4], // tie resolves to class 0
        ];
        let acc = rank1(&scores, &[0, 1, 1]).unwrap();
        assert!((acc - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn localization_tolerance_is_inclusive() {
        assert!(localization_hit((10, 10), (13, 10), (3.0, 3.0)));
        assert!(!localization_hit((10, 10), (14, 10), (3.0, 3.0)));
    }

    #[test]
    fn eye_distance_example() {
        // Eyes 64 pixels apart; a prediction off by 6.4 pixels scores 0.1.
        let d = normalized_eye_distance(
            (50.0, 60.0),
            (50.0, 66.4),
            (32.0, 40.0),
            (96.0, 40.0),
        )
        .unwrap();
        assert!((d - 0.1).abs() < 1e-12);
        assert!(matches!(
            normalized_eye_distance((0.0, 0.0), (1.0, 1.0), (5.0, 5.0), (5.0, 5.0)),
            Err(CfError::DegenerateEyes)
        ));
    }

    #[test]
    fn suite_report_on_separable_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let class_patterns: Vec<_> = (0..2).map(|_| random_signal(&mut rng, 1, 5, 5)).collect();
        let mut templates = Vec::new();
        for pattern in &class_patterns {
            let p = DesignProblem::new(
                vec![pattern.clone()], vec![1.0], DesignKind::Mace,
                Variant::ZeroAliasing, (9, 9), 0.0, 1.0,
            )
            .unwrap();
            templates.push(crate::designs::solve_zamace(&p).unwrap());
        }
        let mut probes = Vec::new();
        for (ci, pattern) in class_patterns.iter().enumerate() {
            for trial in 0..3 {
                let mut scene = MultiChannelSignal::zeros(1, 16, 16);
                for v in scene.data_mut().iter_mut() {
                    *v = 0.01 * rng.gen_range(-1.0..1.0);
                }
                let (r, c) = (2 + trial, 3 + ci);
                embed(&mut scene, pattern, r, c);
                probes.push(LabeledScene {
                    scene,
                    class: ci,
                    location: Some((r as i64, c as i64)),
                });
            }
        }
        let report = evaluate_suite(&templates, &probes, false, DEFAULT_PEAK_WINDOW).unwrap();
        assert_eq!(report.scores.len(), 6);
        assert!((report.rank1 - 1.0).abs() < 1e-12);
        assert!(report.eer < 1e-6);
        assert!((report.localization_rate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn suite_rejects_unknown_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let pattern = random_signal(&mut rng, 1, 4, 4);
        let p = DesignProblem::new(
            vec![pattern.clone()], vec![1.0], DesignKind::Mace,
            Variant::ZeroAliasing, (7, 7), 0.0, 1.0,
        )
        .unwrap();
        let t = crate::designs::solve_zamace(&p).unwrap();
        let probes = vec![LabeledScene { scene: pattern, class: 3, location: None }];
        assert!(matches!(
            evaluate_suite(&[t], &probes, false, 2),
            Err(CfError::MissingTemplate(3))
        ));
    }

    #[test]
    fn mining_appends_negatives_and_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let target = random_signal(&mut rng, 1, 5, 5);
        let confuser = random_signal(&mut rng, 1, 5, 5);
        let p = DesignProblem::new(
            vec![target.clone()], vec![1.0], DesignKind::Mace,
            Variant::ZeroAliasing, (9, 9), 0.0, 1.0,
        )
        .unwrap();
        // Frames full of confusers that correlate above threshold.
        let mut frames = Vec::new();
        for i in 0..3 {
            let mut scene = MultiChannelSignal::zeros(1, 18, 18);
            embed(&mut scene, &confuser, 3 + i, 6);
            embed(&mut scene, &target, 11, 2);
            frames.push(MiningFrame { scene, exclusion: Some((11, 2)) });
        }
        let report = mine_and_retrain(&p, &frames, 0.2).unwrap();
        assert!(report.mined > 0);
        assert_eq!(
            report.problem.training.len(),
            p.training.len() + report.mined
        );
        assert!(report.problem.labels[p.training.len()..].iter().all(|&y| y == -1.0));
        assert!(report.problem.peaks[p.training.len()..].iter().all(|&u| u == 0.0));
        // Determinism: the same inputs mine the same windows.
        let report2 = mine_and_retrain(&p, &frames, 0.2).unwrap();
        assert_eq!(report.mined, report2.mined);
        assert_eq!(
            report.post_template.spatial.data(),
            report2.post_template.spatial.data()
        );
        // The retrained filter suppresses the mined confuser.
        let mut probe = MultiChannelSignal::zeros(1, 12, 12);
        embed(&mut probe, &confuser, 4, 4);
        let pre = apply_filter(&probe, &report.pre_template).unwrap();
        let post = apply_filter(&probe, &report.post_template).unwrap();
        assert!(post.peak_value < pre.peak_value + 1e-9);
    }
}
