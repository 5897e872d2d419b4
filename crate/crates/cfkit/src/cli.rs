//! Command surface: dataset synthesis, training, evaluation, padding
//! sweeps, and a built-in oracle self-test.
//!
//! Every command is deterministic given its flags: the same seed produces
//! byte-identical output files. Errors surface as a single line on stderr
//! and a nonzero exit status.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::designs::{
    self, DesignKind, DesignProblem, FilterTemplate, Variant,
};
use crate::error::{CfError, Result};
use crate::eval::{self, LabeledScene};
use crate::io::{self, ManifestEntry};
use crate::oracle;
use crate::prox::{self, ProxConfig};
use crate::spectral::{self, MultiChannelSignal};
use crate::synth;

#[derive(Debug, Parser)]
#[command(name = "cfkit", version, about = "Correlation filter design and evaluation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a deterministic synthetic dataset and its manifest.
    Synth(SynthArgs),
    /// Train one filter template per class from a manifest.
    Train(TrainArgs),
    /// Score probes against trained templates and write reports.
    Eval(EvalArgs),
    /// Sweep zero padding q and report alias-free quality per design.
    Sweep(SweepArgs),
    /// Run the built-in oracle cross-check suite.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetArg {
    EcgLike,
    Shapes,
    VehiclesIrLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Mace,
    Otsdf,
    Mosse,
    Mmcf,
}

impl From<KindArg> for DesignKind {
    fn from(value: KindArg) -> Self {
        match value {
            KindArg::Mace => DesignKind::Mace,
            KindArg::Otsdf => DesignKind::Otsdf,
            KindArg::Mosse => DesignKind::Mosse,
            KindArg::Mmcf => DesignKind::Mmcf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Conv,
    Za,
    Racf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Closed,
    Prox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScorerArg {
    Pce,
    Psr,
}

#[derive(Debug, Parser)]
pub struct SynthArgs {
    /// Which synthetic suite to generate.
    #[arg(long, value_enum)]
    pub kind: DatasetArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory for signal files and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Signal length for the ecg-like suite.
    #[arg(long, default_value_t = 301)]
    pub length: usize,
    /// Training signals per class.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Noise level; defaults to the suite's standard value.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
}

#[derive(Debug, Parser)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long, value_enum, default_value_t = VariantArg::Za)]
    pub variant: VariantArg,
    /// Zero padding per axis; defaults to size - 1 (alias-free).
    #[arg(long)]
    pub q: Option<usize>,
    /// Grid pad fraction for the racf variant.
    #[arg(long, default_value_t = 0.25)]
    pub pad_fraction: f64,
    /// Diagonal regularizer.
    #[arg(long, default_value_t = 1e-4)]
    pub delta: f64,
    /// Margin trade-off C (mmcf only).
    #[arg(long, default_value_t = 1.0)]
    pub trade_off: f64,
    #[arg(long, value_enum, default_value_t = SolverArg::Closed)]
    pub solver: SolverArg,
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_iterations: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Parser)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory holding class_<c>.cft templates.
    #[arg(long)]
    pub templates: PathBuf,
    #[arg(long, value_enum, default_value_t = ScorerArg::Pce)]
    pub scorer: ScorerArg,
    /// Peak exclusion window radius for PCE/PSR.
    #[arg(long, default_value_t = eval::DEFAULT_PEAK_WINDOW)]
    pub window: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Parser)]
pub struct SweepArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Padding amounts; defaults to {0, N/4, N/2, 3N/4, N-1}.
    #[arg(long, value_delimiter = ',')]
    pub q: Vec<usize>,
    #[arg(long, default_value_t = 1e-4)]
    pub delta: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Parser)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Where to write selftest.csv.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Selftest(args) => cmd_selftest(&args),
    }
}

fn with_context(context: String, err: CfError) -> CfError {
    match err {
        CfError::Io(e) => CfError::Io(e),
        other => CfError::Size(format!("{context}: {other}")),
    }
}

/// Loads a signal file: MCS1 by default, PGM when the extension is `.pgm`.
pub fn load_image(path: &Path) -> Result<MultiChannelSignal> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => io::read_pgm(path),
        _ => io::read_mcs(path),
    }
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let mut entries = Vec::new();
    match args.kind {
        DatasetArg::EcgLike => {
            let sigma = args.noise_sigma.unwrap_or(0.02);
            let signals = synth::ecg_like(args.seed, args.length, args.count, sigma);
            for (i, s) in signals.iter().enumerate() {
                let name = format!("train_{i:03}.mcs");
                io::write_mcs(&args.out.join(&name), s)?;
                entries.push(ManifestEntry::Train { class: 0, path: name });
            }
        }
        DatasetArg::Shapes => {
            let mut config = synth::ShapesConfig::default();
            config.train_per_class = args.count;
            if let Some(sigma) = args.noise_sigma {
                config.noise_sigma = sigma;
            }
            let data = synth::shapes(args.seed, &config);
            for (class, group) in data.training.iter().enumerate() {
                for (i, s) in group.iter().enumerate() {
                    let name = format!("train_{class}_{i:02}.mcs");
                    io::write_mcs(&args.out.join(&name), s)?;
                    entries.push(ManifestEntry::Train { class, path: name });
                }
            }
            for (i, probe) in data.probes.iter().enumerate() {
                let name = format!("probe_{i:03}.mcs");
                io::write_mcs(&args.out.join(&name), &probe.scene)?;
                let (row, col) = probe.location.unwrap_or((0, 0));
                entries.push(ManifestEntry::Probe { class: probe.class, row, col, path: name });
            }
        }
        DatasetArg::VehiclesIrLike => {
            let mut config = synth::VehiclesConfig::default();
            config.train_count = args.count;
            if let Some(sigma) = args.noise_sigma {
                config.noise_sigma = sigma;
            }
            let data = synth::vehicles_ir_like(args.seed, &config);
            for (i, s) in data.training.iter().enumerate() {
                let name = format!("train_{i:02}.mcs");
                io::write_mcs(&args.out.join(&name), s)?;
                entries.push(ManifestEntry::Train { class: 0, path: name });
            }
            for (i, probe) in data.probes.iter().enumerate() {
                let name = format!("probe_{i:03}.mcs");
                io::write_mcs(&args.out.join(&name), &probe.scene)?;
                let (row, col) = probe.location.unwrap_or((0, 0));
                entries.push(ManifestEntry::Probe { class: probe.class, row, col, path: name });
            }
            for (i, frame) in data.frames.iter().enumerate() {
                let name = format!("frame_{i:02}.mcs");
                io::write_mcs(&args.out.join(&name), &frame.scene)?;
                entries.push(ManifestEntry::Frame { path: name });
            }
        }
    }
    io::write_manifest(&args.out.join("manifest.cfman"), &entries)?;
    println!("synth: wrote {} entries to {}", entries.len(), args.out.display());
    Ok(())
}

/// Training records grouped into contiguous classes.
fn load_training(manifest: &Path) -> Result<Vec<Vec<MultiChannelSignal>>> {
    let base = manifest.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let entries = io::read_manifest(manifest)?;
    let mut groups: Vec<Vec<MultiChannelSignal>> = Vec::new();
    for e in &entries {
        if let ManifestEntry::Train { class, path } = e {
            while groups.len() <= *class {
                groups.push(Vec::new());
            }
            groups[*class].push(load_image(&resolve(&base, path))?);
        }
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(CfError::Size("manifest has a class with no training records".into()));
    }
    if groups.is_empty() {
        return Err(CfError::Size("manifest has no training records".into()));
    }
    Ok(groups)
}

fn load_probes(manifest: &Path) -> Result<Vec<LabeledScene>> {
    let base = manifest.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let entries = io::read_manifest(manifest)?;
    let mut probes = Vec::new();
    for e in &entries {
        if let ManifestEntry::Probe { class, row, col, path } = e {
            probes.push(LabeledScene {
                scene: load_image(&resolve(&base, path))?,
                class: *class,
                location: Some((*row, *col)),
            });
        }
    }
    Ok(probes)
}

fn grid_for(
    signal: &MultiChannelSignal,
    variant: Variant,
    q: Option<usize>,
) -> ((usize, usize), Variant) {
    let (n, m) = (signal.height, signal.width);
    match variant {
        Variant::Racf { pad_fraction } => {
            (designs::racf_fft_size(n, m, pad_fraction), variant)
        }
        _ => {
            let q = q.unwrap_or(n.max(m) - 1);
            let grid = (n + q, if m == 1 { 1 } else { m + q });
            (grid, variant)
        }
    }
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let groups = load_training(&args.manifest)?;
    let kind = DesignKind::from(args.kind);
    let variant = match args.variant {
        VariantArg::Conv => Variant::Conventional,
        VariantArg::Za => Variant::ZeroAliasing,
        VariantArg::Racf => Variant::Racf { pad_fraction: args.pad_fraction },
    };
    let config = ProxConfig {
        tolerance: args.tolerance,
        max_iterations: args.max_iterations,
        ..ProxConfig::default()
    };
    for class in 0..groups.len() {
        let (training, labels) = if kind == DesignKind::Mmcf && groups.len() > 1 {
            // One-vs-rest: other classes supply the negative examples.
            let mut training = Vec::new();
            let mut labels = Vec::new();
            for (c, group) in groups.iter().enumerate() {
                for s in group {
                    training.push(s.clone());
                    labels.push(if c == class { 1.0 } else { -1.0 });
                }
            }
            (training, labels)
        } else {
            (groups[class].clone(), vec![1.0; groups[class].len()])
        };
        let (grid, variant) = grid_for(&training[0], variant, args.q);
        let problem = DesignProblem::new(
            training, labels, kind, variant, grid, args.delta, args.trade_off,
        )
        .map_err(|e| with_context(format!("class {class}"), e))?;
        let template = match args.solver {
            SolverArg::Closed => {
                designs::solve_design(&problem)
                    .map_err(|e| with_context(format!("class {class}"), e))?
                    .0
            }
            SolverArg::Prox => {
                let result = prox::solve_prox(&problem, &config)
                    .map_err(|e| with_context(format!("class {class}"), e))?;
                io::write_csv(
                    &args.out.join(format!("trace_{class}.csv")),
                    &["iteration", "objective", "step", "residual"],
                    &result
                        .trace
                        .rows
                        .iter()
                        .map(|r| {
                            vec![
                                r.iteration.to_string(),
                                r.objective.to_string(),
                                r.step.to_string(),
                                r.residual.to_string(),
                            ]
                        })
                        .collect::<Vec<_>>(),
                )?;
                result.template
            }
        };
        let tail = if matches!(problem.variant, Variant::Conventional) {
            0.0
        } else {
            problem.za_system()?.constraint_residual(&template.spectrum)?
        };
        io::write_cft(&args.out.join(format!("class_{class}.cft")), &template)?;
        println!(
            "train class {class}: objective={} iterations={} tail_residual={:.3e} peak_residual={:.3e}",
            template.objective,
            template.iterations,
            tail,
            template.peak_residual(&problem),
        );
    }
    Ok(())
}

fn load_templates(dir: &Path) -> Result<Vec<FilterTemplate>> {
    let mut templates = Vec::new();
    loop {
        let path = dir.join(format!("class_{}.cft", templates.len()));
        if !path.exists() {
            break;
        }
        templates.push(io::read_cft(&path)?);
    }
    if templates.is_empty() {
        return Err(CfError::MissingTemplate(0));
    }
    Ok(templates)
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let templates = load_templates(&args.templates)?;
    let probes = load_probes(&args.manifest)?;
    if probes.is_empty() {
        return Err(CfError::EmptyScores);
    }
    let use_psr = args.scorer == ScorerArg::Psr;
    let report = eval::evaluate_suite(&templates, &probes, use_psr, args.window)?;
    let truth: Vec<usize> = probes.iter().map(|p| p.class).collect();
    io::atomic_write(&args.out.join("scores.csv"), &io::scores_csv(&report, &truth))?;
    io::atomic_write(&args.out.join("metrics.csv"), &io::metrics_csv(&report))?;
    println!(
        "eval: rank1={} eer={} localization_rate={}",
        report.rank1, report.eer, report.localization_rate,
    );
    Ok(())
}

/// Default padding sweep {0, N/4, N/2, 3N/4, N-1}.
pub fn default_q_grid(n: usize) -> Vec<usize> {
    let mut qs = vec![0, n / 4, n / 2, 3 * n / 4, n - 1];
    qs.dedup();
    qs
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let groups = load_training(&args.manifest)?;
    let training = groups[0].clone();
    let (n, m) = (training[0].height, training[0].width);
    let qs = if args.q.is_empty() {
        default_q_grid(n.max(m))
    } else {
        args.q.clone()
    };
    let labels = vec![1.0; training.len()];
    let peaks = designs::default_peaks(DesignKind::Mace, &labels);
    let td = oracle::tdmace(&training, &peaks)?;
    let ace_td = oracle::unaliased_ace(&td, &training);
    let mut rows = Vec::new();
    for &q in &qs {
        let grid = (n + q, if m == 1 { 1 } else { m + q });
        let mace = designs::solve_mace(&DesignProblem::new(
            training.clone(), labels.clone(), DesignKind::Mace,
            Variant::Conventional, grid, args.delta, 1.0,
        )?)?;
        let zamace = designs::solve_zamace(&DesignProblem::new(
            training.clone(), labels.clone(), DesignKind::Mace,
            Variant::ZeroAliasing, grid, args.delta, 1.0,
        )?)?;
        let za_cropped = zamace.cropped();
        let mse = za_cropped
            .data()
            .iter()
            .zip(td.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / td.data().len() as f64;
        rows.push(vec![
            q.to_string(),
            oracle::unaliased_ace(&mace.spatial, &training).to_string(),
            oracle::unaliased_ace(&mace.cropped(), &training).to_string(),
            oracle::unaliased_ace(&za_cropped, &training).to_string(),
            ace_td.to_string(),
            mse.to_string(),
        ]);
    }
    io::write_csv(
        &args.out.join("sweep.csv"),
        &["q", "ace_mace_full", "ace_mace_cropped", "ace_zamace", "ace_tdmace", "mse_zamace_tdmace"],
        &rows,
    )?;
    println!("sweep: wrote {} rows to {}", rows.len(), args.out.join("sweep.csv").display());
    Ok(())
}

fn random_signal(rng: &mut ChaCha8Rng, k: usize, n: usize, m: usize) -> MultiChannelSignal {
    let data: Vec<f64> = (0..k * n * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    MultiChannelSignal::new(k, n, m, data).expect("finite random data")
}

struct Check {
    name: &'static str,
    value: f64,
    limit: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.value < self.limit
    }
}

/// Oracle cross-check suite; small enough to run in seconds yet covering
/// every solver path against an independent reference.
fn selftest_checks(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x1656_67b1).wrapping_add(9));

    // Circular correlation against the nested-loop oracle.
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let k = rng.gen_range(1..=2);
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=4);
        let nf = n + rng.gen_range(0..=3);
        let mf = m + rng.gen_range(0..=3);
        let a = random_signal(&mut rng, k, n, m);
        let b = random_signal(&mut rng, k, n, m);
        let fast = spectral::circular_correlate(&a, &b, (nf, mf))?;
        let slow = oracle::brute_circular(&a, &b, (nf, mf))?;
        let scale = slow.data().iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
        for (x, y) in fast.data().iter().zip(slow.data()) {
            worst = worst.max((x - y).abs() / scale);
        }
    }
    checks.push(Check { name: "circular_vs_brute", value: worst, limit: 1e-10 });

    // Parseval and transform round trips.
    let mut worst = 0.0_f64;
    for _ in 0..25 {
        let k = rng.gen_range(1..=2);
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(1..=4);
        let x = random_signal(&mut rng, k, n, m);
        let spectrum = spectral::forward_dft(&x, (n, m))?;
        let bins = (n * m) as f64;
        let parseval = (spectrum.norm_sq() / bins - x.energy()).abs() / (1.0 + x.energy());
        let back = spectral::inverse_dft(&spectrum);
        let round = x
            .data()
            .iter()
            .zip(back.data())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        worst = worst.max(parseval).max(round);
    }
    checks.push(Check { name: "parseval_roundtrip", value: worst, limit: 1e-10 });

    // ZAMACE at q = N-1 equals the grid-free design.
    let n = 16;
    let training = synth::ecg_like(seed, n, 3, 0.05);
    let labels = vec![1.0; training.len()];
    let peaks = designs::default_peaks(DesignKind::Mace, &labels);
    let td = oracle::tdmace(&training, &peaks)?;
    let problem = DesignProblem::new(
        training.clone(), labels.clone(), DesignKind::Mace,
        Variant::ZeroAliasing, (2 * n - 1, 1), 1e-12, 1.0,
    )?;
    let za = designs::solve_zamace(&problem)?;
    let mse = za
        .cropped()
        .data()
        .iter()
        .zip(td.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / td.data().len() as f64;
    checks.push(Check { name: "zamace_tdmace_mse", value: mse, limit: 1e-10 });

    // Reduced ZA solvers against the dense printed formulas.
    let training: Vec<_> = (0..3).map(|_| random_signal(&mut rng, 1, 5, 1)).collect();
    let mut worst = 0.0_f64;
    let mut tail = 0.0_f64;
    for kind in [DesignKind::Mace, DesignKind::Mosse] {
        let problem = DesignProblem::new(
            training.clone(), vec![1.0; 3], kind,
            Variant::ZeroAliasing, (9, 1), 1e-3, 1.0,
        )?;
        let fast = designs::solve_design(&problem)?.0;
        let dense = oracle::dense_za_solve(&problem)?;
        for (a, b) in fast.spatial.data().iter().zip(dense.spatial.data()) {
            worst = worst.max((a - b).abs());
        }
        tail = tail.max(problem.za_system()?.constraint_residual(&fast.spectrum)?);
    }
    checks.push(Check { name: "za_closed_vs_dense", value: worst, limit: 1e-8 });
    checks.push(Check { name: "za_tail_residual", value: tail, limit: 1e-8 });

    // Equality-constrained proximal solver against its closed form.
    let problem = DesignProblem::new(
        training.clone(), vec![1.0; 3], DesignKind::Mace,
        Variant::ZeroAliasing, (9, 1), 1e-3, 1.0,
    )?;
    let closed = designs::solve_zamace(&problem)?;
    let config = ProxConfig { tolerance: 1e-14, ..ProxConfig::default() };
    let iterative = prox::prox_equality(&problem, &config)?;
    let mse = iterative
        .template
        .spatial
        .data()
        .iter()
        .zip(closed.spatial.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / closed.spatial.data().len() as f64;
    checks.push(Check { name: "prox_vs_closed_mse", value: mse, limit: 1e-6 });
    Ok(checks)
}

fn cmd_selftest(args: &SelftestArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let checks = selftest_checks(args.seed)?;
    let mut rows = Vec::new();
    let mut failures = 0usize;
    for c in &checks {
        let status = if c.passed() { "pass" } else { "fail" };
        println!("selftest {}: {status} value={:.3e} limit={:.0e}", c.name, c.value, c.limit);
        rows.push(vec![c.name.to_string(), c.value.to_string(), status.to_string()]);
        if !c.passed() {
            failures += 1;
        }
    }
    io::write_csv(&args.out.join("selftest.csv"), &["check", "value", "status"], &rows)?;
    if failures > 0 {
        return Err(CfError::Size(format!("selftest failed {failures} of {} checks", checks.len())));
    }
    println!("selftest: all {} checks passed", checks.len());
    Ok(())
}
