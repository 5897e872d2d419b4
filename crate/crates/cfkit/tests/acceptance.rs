//! Acceptance suite: eleven pinned criteria covering oracle equivalence,
//! alias-free design identities, optimality certificates, proximal solver
//! agreement, end-to-end recognition direction, and determinism. Each
//! criterion prints a single pass/fail line; the test fails if any
//! criterion fails.

use std::time::Instant;

use cfkit::cli;
use cfkit::designs::{
    self, DesignKind, DesignProblem, FilterTemplate, Variant,
};
use cfkit::eval::{self, LabeledScene, MiningFrame};
use cfkit::io;
use cfkit::oracle;
use cfkit::prox::{self, ProxConfig};
use cfkit::spectral::{self, MultiChannelSignal};
use cfkit::synth;
use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_signal(rng: &mut ChaCha8Rng, k: usize, n: usize, m: usize) -> MultiChannelSignal {
    let data: Vec<f64> = (0..k * n * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    MultiChannelSignal::new(k, n, m, data).unwrap()
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(results: &mut Vec<Outcome>, id: usize, name: &'static str, passed: bool, detail: String) {
    println!(
        "criterion {id:02} {name}: {} ({detail})",
        if passed { "PASS" } else { "FAIL" },
    );
    results.push(Outcome { id, name, passed, detail });
}

/// Criterion 1: circular correlation equals the nested-loop oracle, and
/// with full padding equals direct linear correlation.
fn criterion_1(results: &mut Vec<Outcome>) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0_f64;
    for _ in 0..500 {
        let k = rng.gen_range(1..=2);
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=5);
        let nf = (n + rng.gen_range(0..=4)).min(64);
        let mf = (m + rng.gen_range(0..=4)).min(64);
        let a = random_signal(&mut rng, k, n, m);
        let b = random_signal(&mut rng, k, n, m);
        let fast = spectral::circular_correlate(&a, &b, (nf, mf)).unwrap();
        let slow = oracle::brute_circular(&a, &b, (nf, mf)).unwrap();
        let scale = slow.data().iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
        for (x, y) in fast.data().iter().zip(slow.data()) {
            worst = worst.max((x - y).abs() / scale);
        }
        // Full padding turns the circular product into linear correlation.
        let padded =
            spectral::circular_correlate(&a, &b, (2 * n - 1, 2 * m - 1)).unwrap();
        let linear = spectral::linear_correlate(&a, &b).unwrap();
        for (x, y) in padded.data().iter().zip(linear.data()) {
            worst = worst.max((x - y).abs() / scale);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(
        results, 1, "circular_vs_brute_and_linear",
        worst < 1e-10 && elapsed < 5.0,
        format!("max_rel_err={worst:.3e} elapsed={elapsed:.2}s"),
    );
}

/// Criterion 2: ZAMACE at q = N-1 reproduces the grid-free alias-free
/// design, in both template and unaliased ACE.
fn criterion_2(results: &mut Vec<Outcome>) {
    let start = Instant::now();
    let n = 32;
    let training = synth::ecg_like(202, n, 5, 0.05);
    let labels = vec![1.0; training.len()];
    let peaks = designs::default_peaks(DesignKind::Mace, &labels);
    let td = oracle::tdmace(&training, &peaks).unwrap();
    let problem = DesignProblem::new(
        training.clone(), labels, DesignKind::Mace,
        Variant::ZeroAliasing, (2 * n - 1, 1), 1e-12, 1.0,
    )
    .unwrap();
    let za = designs::solve_zamace(&problem).unwrap();
    let template_mse = mse(za.cropped().data(), td.data());
    let ace_td = oracle::unaliased_ace(&td, &training);
    let ace_za = oracle::unaliased_ace(&za.cropped(), &training);
    let ace_rel = (ace_td - ace_za).abs() / ace_td.abs();
    let elapsed = start.elapsed().as_secs_f64();
    check(
        results, 2, "zamace_equals_alias_free_design",
        template_mse < 1e-10 && ace_rel < 1e-9 && elapsed < 10.0,
        format!("mse={template_mse:.3e} ace_rel={ace_rel:.3e} elapsed={elapsed:.2}s"),
    );
}

fn ecg_suite(seed: u64, n: usize) -> (Vec<MultiChannelSignal>, Vec<f64>) {
    let training = synth::ecg_like(seed, n, 5, 0.05);
    let labels = vec![1.0; training.len()];
    (training, labels)
}

/// Criteria 3 and 4: the alias-free design has the lowest unaliased ACE,
/// and the ZAMACE template converges to it as the padding approaches N-1.
///
/// The support-cropped circular design is checked at every padding level.
/// The full-grid template is checked at q = 0 only, where it coincides
/// with the cropped one and the bound is exact: at larger q the full
/// template spans a strictly larger support than the alias-free design,
/// so no ordering between the two is implied. The ZAMACE curve must also
/// be non-increasing across the sweep.
fn criteria_3_and_4(results: &mut Vec<Outcome>) {
    let n = 32;
    let qs = cli::default_q_grid(n);
    let mut ordering_violations = 0usize;
    let mut worst_gap = 0.0_f64;
    let mut convergence_failures = 0usize;
    let mut worst_mse_end = 0.0_f64;
    for seed in 0..10u64 {
        let (training, labels) = ecg_suite(300 + seed, n);
        let peaks = designs::default_peaks(DesignKind::Mace, &labels);
        let td = oracle::tdmace(&training, &peaks).unwrap();
        let ace_td = oracle::unaliased_ace(&td, &training);
        let tol = 1e-9 * (1.0 + ace_td.abs());
        let mut mse_by_q = Vec::new();
        let mut previous_za_ace = f64::INFINITY;
        for &q in &qs {
            let grid = (n + q, 1);
            let mace = designs::solve_mace(
                &DesignProblem::new(
                    training.clone(), labels.clone(), DesignKind::Mace,
                    Variant::Conventional, grid, 1e-12, 1.0,
                )
                .unwrap(),
            )
            .unwrap();
            let ace_cropped = oracle::unaliased_ace(&mace.cropped(), &training);
            let mut bounds = vec![ace_cropped];
            if q == 0 {
                bounds.push(oracle::unaliased_ace(&mace.spatial, &training));
            }
            for ace in bounds {
                if ace_td > ace + tol {
                    ordering_violations += 1;
                    worst_gap = worst_gap.max(ace_td - ace);
                }
            }
            let za = designs::solve_zamace(
                &DesignProblem::new(
                    training.clone(), labels.clone(), DesignKind::Mace,
                    Variant::ZeroAliasing, grid, 1e-12, 1.0,
                )
                .unwrap(),
            )
            .unwrap();
            let ace_za = oracle::unaliased_ace(&za.cropped(), &training);
            if ace_za > previous_za_ace + tol {
                ordering_violations += 1;
                worst_gap = worst_gap.max(ace_za - previous_za_ace);
            }
            previous_za_ace = ace_za;
            mse_by_q.push(mse(za.cropped().data(), td.data()));
        }
        let end = *mse_by_q.last().unwrap();
        worst_mse_end = worst_mse_end.max(end);
        if end >= 1e-10 || end >= mse_by_q[0] {
            convergence_failures += 1;
        }
    }
    check(
        results, 3, "alias_free_ace_lower_bound",
        ordering_violations == 0,
        format!("violations={ordering_violations} worst_gap={worst_gap:.3e}"),
    );
    check(
        results, 4, "zamace_template_convergence",
        convergence_failures == 0,
        format!("failures={convergence_failures} worst_mse_at_qmax={worst_mse_end:.3e}"),
    );
}

/// Criterion 5: optimality certificates for every closed-form solver on
/// 100 random instances.
fn criterion_5(results: &mut Vec<Outcome>) {
    let combos = [
        (DesignKind::Mace, Variant::Conventional),
        (DesignKind::Mace, Variant::ZeroAliasing),
        (DesignKind::Otsdf, Variant::Conventional),
        (DesignKind::Otsdf, Variant::ZeroAliasing),
        (DesignKind::Mosse, Variant::Conventional),
        (DesignKind::Mosse, Variant::ZeroAliasing),
        (DesignKind::Mmcf, Variant::Conventional),
        (DesignKind::Mmcf, Variant::ZeroAliasing),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst_peak = 0.0_f64;
    let mut worst_tail = 0.0_f64;
    let mut worst_normal = 0.0_f64;
    let mut worst_kkt = 0.0_f64;
    for i in 0..100 {
        let (kind, variant) = combos[i % combos.len()];
        let k = rng.gen_range(1..=2);
        // Four peak constraints need at least four free support
        // coefficients even for a single channel.
        let n = rng.gen_range(5..=7);
        let pad = rng.gen_range(0..n);
        let training: Vec<_> = (0..4).map(|_| random_signal(&mut rng, k, n, 1)).collect();
        let labels = vec![1.0, 1.0, -1.0, -1.0];
        let problem = DesignProblem::new(
            training, labels, kind, variant, (n + pad, 1), 1e-3, 1.0,
        )
        .unwrap();
        let (template, dual) = designs::solve_design(&problem).unwrap();
        match kind {
            DesignKind::Mace | DesignKind::Otsdf => {
                worst_peak = worst_peak.max(template.peak_residual(&problem));
            }
            DesignKind::Mosse => {
                if matches!(variant, Variant::Conventional) {
                    let model = problem.cross_power().unwrap();
                    let g = model.gradient(&template.spectrum);
                    let p_norm = model.p_spectrum().norm_sq().sqrt();
                    worst_normal =
                        worst_normal.max(0.5 * g.norm_sq().sqrt() / (1.0 + p_norm));
                }
            }
            DesignKind::Mmcf => {
                worst_kkt = worst_kkt.max(dual.unwrap().kkt_violation());
            }
        }
        if !matches!(variant, Variant::Conventional) {
            let system = problem.za_system().unwrap();
            worst_tail =
                worst_tail.max(system.constraint_residual(&template.spectrum).unwrap());
        }
    }
    check(
        results, 5, "closed_form_certificates",
        worst_peak < 1e-8 && worst_tail < 1e-8 && worst_normal < 1e-8 && worst_kkt < 1e-5,
        format!(
            "peak={worst_peak:.3e} tail={worst_tail:.3e} normal={worst_normal:.3e} kkt={worst_kkt:.3e}",
        ),
    );
}

/// Criterion 6: the proximal solvers reach the closed-form optima.
fn criterion_6(results: &mut Vec<Outcome>) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let config = ProxConfig { tolerance: 1e-13, ..ProxConfig::default() };
    let mut worst_quad = 0.0_f64;
    let mut capped = 0usize;
    for i in 0..50 {
        let kind = if i % 2 == 0 { DesignKind::Mosse } else { DesignKind::Mace };
        let n = rng.gen_range(3..=5);
        let pad = rng.gen_range(1..n);
        let training: Vec<_> = (0..3).map(|_| random_signal(&mut rng, 1, n, 1)).collect();
        let problem = DesignProblem::new(
            training, vec![1.0; 3], kind, Variant::ZeroAliasing,
            (n + pad, 1), 1e-3, 1.0,
        )
        .unwrap();
        let dense = oracle::dense_za_solve(&problem).unwrap();
        let result = prox::solve_prox(&problem, &config).unwrap();
        if result.iterations >= config.max_iterations {
            capped += 1;
        }
        let model = problem.cross_power().unwrap();
        let f_dense = model.objective(&dense.spectrum) + model.desired_energy;
        let f_prox = model.objective(&result.template.spectrum) + model.desired_energy;
        worst_quad = worst_quad.max((f_prox - f_dense).abs() / (1.0 + f_dense.abs()));
    }
    let mut worst_hinge = 0.0_f64;
    for _ in 0..20 {
        let n = rng.gen_range(3..=5);
        let pad = rng.gen_range(1..n);
        let training: Vec<_> = (0..4).map(|_| random_signal(&mut rng, 1, n, 1)).collect();
        let problem = DesignProblem::new(
            training, vec![1.0, 1.0, -1.0, -1.0], DesignKind::Mmcf,
            Variant::ZeroAliasing, (n + pad, 1), 1e-2, 1.0,
        )
        .unwrap();
        let (_, _, f_oracle) = oracle::squared_hinge_oracle(&problem).unwrap();
        let result = prox::solve_prox(&problem, &config).unwrap();
        let f_prox = result.template.objective;
        worst_hinge = worst_hinge.max((f_prox - f_oracle).abs() / (1.0 + f_oracle.abs()));
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(
        results, 6, "prox_matches_closed_form",
        worst_quad < 1e-6 && worst_hinge < 1e-4 && capped == 0 && elapsed < 60.0,
        format!(
            "quad_rel={worst_quad:.3e} hinge_rel={worst_hinge:.3e} capped={capped} elapsed={elapsed:.2}s",
        ),
    );
}

/// Criterion 7: Parseval energy identity and transform round trips.
fn criterion_7(results: &mut Vec<Outcome>) {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst_parseval = 0.0_f64;
    let mut worst_round = 0.0_f64;
    for _ in 0..200 {
        let k = rng.gen_range(1..=2);
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(1..=6);
        let x = random_signal(&mut rng, k, n, m);
        let y = random_signal(&mut rng, k, n, m);
        let sx = spectral::forward_dft(&x, (n, m)).unwrap();
        let mut diff_spec = sx.clone();
        diff_spec.axpy(num_complex::Complex64::new(-1.0, 0.0), &spectral::forward_dft(&y, (n, m)).unwrap());
        let spatial_loss: f64 =
            x.data().iter().zip(y.data()).map(|(a, b)| (a - b) * (a - b)).sum();
        let freq_loss = diff_spec.norm_sq() / (n * m) as f64;
        worst_parseval = worst_parseval
            .max((spatial_loss - freq_loss).abs() / (1.0 + spatial_loss));
        let back = spectral::inverse_dft(&sx);
        for (a, b) in x.data().iter().zip(back.data()) {
            worst_round = worst_round.max((a - b).abs());
        }
    }
    check(
        results, 7, "parseval_and_roundtrip",
        worst_parseval < 1e-9 && worst_round < 1e-10,
        format!("parseval={worst_parseval:.3e} roundtrip={worst_round:.3e}"),
    );
}

fn shapes_problem(
    training: Vec<MultiChannelSignal>,
    labels: Vec<f64>,
    kind: DesignKind,
    variant: Variant,
    chip: usize,
) -> DesignProblem {
    let grid = match variant {
        Variant::Conventional => (chip, chip),
        _ => (2 * chip - 1, 2 * chip - 1),
    };
    let mut problem =
        DesignProblem::new(training, labels, kind, variant, grid, 1e-3, 1.0).unwrap();
    problem.dense_cap = usize::MAX;
    problem
}

fn train_class_templates(
    data: &synth::SceneDataset,
    kind: DesignKind,
    variant: Variant,
) -> Vec<FilterTemplate> {
    let classes = data.training.len();
    (0..classes)
        .map(|class| {
            let (training, labels) = if kind == DesignKind::Mmcf {
                let mut training = Vec::new();
                let mut labels = Vec::new();
                for (c, group) in data.training.iter().enumerate() {
                    for s in group {
                        training.push(s.clone());
                        labels.push(if c == class { 1.0 } else { -1.0 });
                    }
                }
                (training, labels)
            } else {
                (data.training[class].clone(), vec![1.0; data.training[class].len()])
            };
            let problem = shapes_problem(training, labels, kind, variant, data.chip);
            designs::solve_design(&problem).unwrap().0
        })
        .collect()
}

/// Joint recognition: correct class by argmax score and correct location
/// within half a chip on each axis.
fn recognition_rate(
    templates: &[FilterTemplate],
    probes: &[LabeledScene],
    chip: usize,
) -> f64 {
    let report = eval::evaluate_suite(templates, probes, false, eval::DEFAULT_PEAK_WINDOW)
        .unwrap();
    let tol = (chip as f64 / 2.0, chip as f64 / 2.0);
    let mut hits = 0usize;
    for (i, probe) in probes.iter().enumerate() {
        let row = &report.scores[i];
        let mut best = 0usize;
        for (c, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = c;
            }
        }
        let located = probe
            .location
            .map(|truth| eval::localization_hit(report.locations[i], truth, tol))
            .unwrap_or(true);
        if best == probe.class && located {
            hits += 1;
        }
    }
    hits as f64 / probes.len() as f64
}

/// Criterion 8: each zero-aliasing variant matches or beats its
/// conventional counterpart on the seeded shapes suite.
fn criterion_8(results: &mut Vec<Outcome>) {
    let start = Instant::now();
    let kinds = [DesignKind::Mace, DesignKind::Otsdf, DesignKind::Mosse, DesignKind::Mmcf];
    let mut min_wins = 10usize;
    let mut detail = String::new();
    for kind in kinds {
        let mut wins = 0usize;
        for seed in 0..10u64 {
            let data = synth::shapes(800 + seed, &synth::ShapesConfig::default());
            let conv = train_class_templates(&data, kind, Variant::Conventional);
            let za = train_class_templates(&data, kind, Variant::ZeroAliasing);
            let rec_conv = recognition_rate(&conv, &data.probes, data.chip);
            let rec_za = recognition_rate(&za, &data.probes, data.chip);
            if rec_za >= rec_conv {
                wins += 1;
            }
        }
        min_wins = min_wins.min(wins);
        detail.push_str(&format!("{}={wins}/10 ", kind.token()));
    }
    let elapsed = start.elapsed().as_secs_f64();
    detail.push_str(&format!("elapsed={elapsed:.1}s"));
    check(results, 8, "za_recognition_direction", min_wins >= 9 && elapsed < 120.0, detail);
}

/// Criterion 9: the reduced-grid variant interpolates between no padding
/// and full padding in unaliased ACE.
fn criterion_9(results: &mut Vec<Outcome>) {
    let n = 32;
    let mut violations = 0usize;
    let mut detail = String::new();
    for seed in 0..10u64 {
        let (training, labels) = ecg_suite(900 + seed, n);
        let ace_at = |grid: (usize, usize)| -> f64 {
            let za = designs::solve_zamace(
                &DesignProblem::new(
                    training.clone(), labels.clone(), DesignKind::Mace,
                    Variant::ZeroAliasing, grid, 1e-12, 1.0,
                )
                .unwrap(),
            )
            .unwrap();
            oracle::unaliased_ace(&za.cropped(), &training)
        };
        let ace_none = ace_at((n, 1));
        let ace_full = ace_at((2 * n - 1, 1));
        let ace_racf = ace_at(designs::racf_fft_size(n, 1, 0.25));
        let tol = 1e-9 * (1.0 + ace_none.abs());
        if !(ace_full - tol <= ace_racf && ace_racf <= ace_none + tol) {
            violations += 1;
            detail.push_str(&format!(
                "seed{seed}: {ace_full:.4e} !<= {ace_racf:.4e} !<= {ace_none:.4e} ",
            ));
        }
    }
    check(results, 9, "racf_ace_bridge", violations == 0, format!("violations={violations} {detail}"));
}

/// Criterion 10: mining hard negatives from distractor frames does not
/// hurt max-margin recognition.
fn criterion_10(results: &mut Vec<Outcome>) {
    let mut wins = 0usize;
    for seed in 0..10u64 {
        let data = synth::vehicles_ir_like(1000 + seed, &synth::VehiclesConfig::default());
        let chip = data.chip;
        // Seed one negative from clutter so the margin problem starts with
        // both classes.
        let mut training = data.training.clone();
        let mut labels = vec![1.0; training.len()];
        let mut negative = MultiChannelSignal::zeros(1, chip, chip);
        for r in 0..chip {
            for c in 0..chip {
                negative.set(0, r, c, data.frames[0].scene.at(0, r, c));
            }
        }
        training.push(negative);
        labels.push(-1.0);
        let problem = DesignProblem::new(
            training, labels, DesignKind::Mmcf, Variant::Conventional,
            (chip, chip), 1e-3, 1.0,
        )
        .unwrap();
        let pre = designs::solve_design(&problem).unwrap().0;
        let frames: Vec<MiningFrame> = data.frames.clone();
        let peak_max = frames
            .iter()
            .map(|f| eval::apply_filter(&f.scene, &pre).unwrap().peak_value)
            .fold(f64::MIN, f64::max);
        let report = eval::mine_and_retrain(&problem, &frames, 0.5 * peak_max).unwrap();
        let tol = (chip as f64 / 2.0, chip as f64 / 2.0);
        let rate = |template: &FilterTemplate| -> f64 {
            let mut hits = 0usize;
            for probe in &data.probes {
                let scored = eval::apply_filter(&probe.scene, template).unwrap();
                if eval::localization_hit(scored.location(), probe.location.unwrap(), tol) {
                    hits += 1;
                }
            }
            hits as f64 / data.probes.len() as f64
        };
        if rate(&report.post_template) >= rate(&report.pre_template) {
            wins += 1;
        }
    }
    check(results, 10, "mining_direction", wins >= 9, format!("wins={wins}/10"));
}

/// Criterion 11: selftest and the recognition pipeline are byte-level
/// deterministic under a fixed seed.
fn criterion_11(results: &mut Vec<Outcome>) {
    let dir = tempfile::tempdir().unwrap();
    let mut selftest_bytes = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("selftest_{run}"));
        let cli = cli::Cli::try_parse_from([
            "cfkit", "selftest", "--seed", "11", "--out", out.to_str().unwrap(),
        ])
        .unwrap();
        cli::run(cli).unwrap();
        selftest_bytes.push(std::fs::read(out.join("selftest.csv")).unwrap());
    }
    let mut score_bytes = Vec::new();
    for _ in 0..2 {
        let data = synth::shapes(800, &synth::ShapesConfig::default());
        let templates = train_class_templates(&data, DesignKind::Mace, Variant::ZeroAliasing);
        let report =
            eval::evaluate_suite(&templates, &data.probes, false, eval::DEFAULT_PEAK_WINDOW)
                .unwrap();
        let truth: Vec<usize> = data.probes.iter().map(|p| p.class).collect();
        score_bytes.push(io::scores_csv(&report, &truth));
    }
    let passed = selftest_bytes[0] == selftest_bytes[1] && score_bytes[0] == score_bytes[1];
    check(
        results, 11, "byte_determinism",
        passed,
        format!(
            "selftest_identical={} scores_identical={}",
            selftest_bytes[0] == selftest_bytes[1],
            score_bytes[0] == score_bytes[1],
        ),
    );
}

#[test]
fn acceptance_criteria() {
    let mut results = Vec::new();
    criterion_1(&mut results);
    criterion_2(&mut results);
    criteria_3_and_4(&mut results);
    criterion_5(&mut results);
    criterion_6(&mut results);
    criterion_7(&mut results);
    criterion_8(&mut results);
    criterion_9(&mut results);
    criterion_10(&mut results);
    criterion_11(&mut results);
    let failures: Vec<String> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("criterion {} {} ({})", r.id, r.name, r.detail))
        .collect();
    assert!(failures.is_empty(), "failed criteria: {}", failures.join("; "));
}
