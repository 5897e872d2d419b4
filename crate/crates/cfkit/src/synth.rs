//! Deterministic synthetic datasets.
//!
//! Every generator is a pure function of its seed (ChaCha-based), so the
//! same invocation always produces byte-identical data. Three families:
//! a 1-D pseudo-periodic waveform suite, a 2-D multi-class shape suite,
//! and a small-target suite with textured clutter and distractor frames
//! for hard-negative mining.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::eval::{LabeledScene, MiningFrame};
use crate::spectral::MultiChannelSignal;

fn gaussian_bump(t: f64, center: f64, width: f64, amplitude: f64) -> f64 {
    let d = (t - center) / width;
    amplitude * (-0.5 * d * d).exp()
}

/// 1-D waveforms built from a fixed arrangement of bumps (slow positive
/// hump, sharp biphasic spike, broad trailing hump) with per-sample jitter
/// in position, width, amplitude and additive noise.
pub fn ecg_like(seed: u64, length: usize, count: usize, noise_sigma: f64) -> Vec<MultiChannelSignal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(1));
    let noise = Normal::new(0.0, noise_sigma).unwrap();
    let n = length as f64;
    (0..count)
        .map(|_| {
            let jitter = rng.gen_range(-0.02..0.02);
            let amp = rng.gen_range(0.9..1.1);
            let width_scale = rng.gen_range(0.9..1.1);
            let data: Vec<f64> = (0..length)
                .map(|i| {
                    let t = i as f64 / n + jitter;
                    let mut v = 0.0;
                    v += gaussian_bump(t, 0.2, 0.04 * width_scale, 0.25 * amp);
                    v += gaussian_bump(t, 0.42, 0.012 * width_scale, -0.35 * amp);
                    v += gaussian_bump(t, 0.45, 0.015 * width_scale, 1.2 * amp);
                    v += gaussian_bump(t, 0.48, 0.012 * width_scale, -0.45 * amp);
                    v += gaussian_bump(t, 0.72, 0.06 * width_scale, 0.4 * amp);
                    v + noise.sample(&mut rng)
                })
                .collect();
            MultiChannelSignal::new(1, length, 1, data).expect("valid waveform")
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct ShapesConfig {
    pub classes: usize,
    pub chip: usize,
    pub scene: usize,
    pub train_per_class: usize,
    pub probes_per_class: usize,
    pub noise_sigma: f64,
}

impl Default for ShapesConfig {
    fn default() -> Self {
        Self {
            classes: 4,
            chip: 12,
            scene: 20,
            train_per_class: 10,
            probes_per_class: 10,
            noise_sigma: 0.1,
        }
    }
}

/// A multi-class 2-D dataset: per-class training chips plus probe scenes
/// with the chip embedded at a recorded offset.
#[derive(Debug, Clone)]
pub struct SceneDataset {
    pub training: Vec<Vec<MultiChannelSignal>>,
    pub probes: Vec<LabeledScene>,
    pub chip: usize,
}

fn shape_chip(class: usize, chip: usize, rng: &mut ChaCha8Rng, sigma: f64) -> MultiChannelSignal {
    let noise = Normal::new(0.0, sigma).unwrap();
    let c = chip as f64 / 2.0 - 0.5;
    let scale = rng.gen_range(0.85..1.15);
    let mut out = MultiChannelSignal::zeros(1, chip, chip);
    for r in 0..chip {
        for col in 0..chip {
            let dr = (r as f64 - c) / c;
            let dc = (col as f64 - c) / c;
            let v = match class % 4 {
                // Filled square.
                0 => {
                    if dr.abs() < 0.6 * scale && dc.abs() < 0.6 * scale {
                        1.0
                    } else {
                        0.0
                    }
                }
                // Disk.
                1 => {
                    if (dr * dr + dc * dc).sqrt() < 0.65 * scale {
                        1.0
                    } else {
                        0.0
                    }
                }
                // Cross.
                2 => {
                    if dr.abs() < 0.25 * scale || dc.abs() < 0.25 * scale {
                        1.0
                    } else {
                        0.0
                    }
                }
                // Diagonal stripes.
                _ => {
                    if ((dr + dc) * 3.0 * scale).sin() > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            out.set(0, r, col, v + noise.sample(rng));
        }
    }
    out
}

/// Four geometric classes (square, disk, cross, stripes) as noisy chips
/// plus probe scenes with the chip at a random offset over a noise floor.
pub fn shapes(seed: u64, config: &ShapesConfig) -> SceneDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x85eb_ca6b).wrapping_add(2));
    let noise = Normal::new(0.0, config.noise_sigma).unwrap();
    let mut training = Vec::with_capacity(config.classes);
    for class in 0..config.classes {
        training.push(
            (0..config.train_per_class)
                .map(|_| shape_chip(class, config.chip, &mut rng, config.noise_sigma))
                .collect(),
        );
    }
    let mut probes = Vec::new();
    let max_off = config.scene - config.chip;
    for class in 0..config.classes {
        for _ in 0..config.probes_per_class {
            let chip = shape_chip(class, config.chip, &mut rng, config.noise_sigma);
            let (r0, c0) = (rng.gen_range(0..=max_off), rng.gen_range(0..=max_off));
            let mut scene = MultiChannelSignal::zeros(1, config.scene, config.scene);
            for v in scene.data_mut().iter_mut() {
                *v = noise.sample(&mut rng);
            }
            for r in 0..config.chip {
                for c in 0..config.chip {
                    let v = scene.at(0, r0 + r, c0 + c) + chip.at(0, r, c);
                    scene.set(0, r0 + r, c0 + c, v);
                }
            }
            probes.push(LabeledScene {
                scene,
                class,
                location: Some((r0 as i64, c0 as i64)),
            });
        }
    }
    SceneDataset { training, probes, chip: config.chip }
}

#[derive(Debug, Clone, Copy)]
pub struct VehiclesConfig {
    pub chip: usize,
    pub scene: usize,
    pub train_count: usize,
    pub probe_count: usize,
    pub distractor_frames: usize,
    pub noise_sigma: f64,
}

impl Default for VehiclesConfig {
    fn default() -> Self {
        Self {
            chip: 10,
            scene: 24,
            train_count: 8,
            probe_count: 8,
            distractor_frames: 6,
            noise_sigma: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VehiclesDataset {
    pub training: Vec<MultiChannelSignal>,
    pub probes: Vec<LabeledScene>,
    /// Target-free clutter frames with distractor blobs, for mining.
    pub frames: Vec<MiningFrame>,
    pub chip: usize,
}

fn textured_background(rng: &mut ChaCha8Rng, size: usize, sigma: f64) -> MultiChannelSignal {
    let noise = Normal::new(0.0, sigma).unwrap();
    // Smooth clutter: a few random low-frequency plane waves.
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.05..0.18),
            )
        })
        .collect();
    let mut out = MultiChannelSignal::zeros(1, size, size);
    for r in 0..size {
        for c in 0..size {
            let mut v = 0.0;
            for &(fr, fc, phase, amp) in &waves {
                v += amp
                    * (std::f64::consts::TAU * (fr * r as f64 + fc * c as f64) / size as f64
                        + phase)
                        .sin();
            }
            out.set(0, r, c, v + noise.sample(rng));
        }
    }
    out
}

fn vehicle_chip(rng: &mut ChaCha8Rng, chip: usize, sigma: f64) -> MultiChannelSignal {
    // Hot elongated body with a brighter engine block, as in thermal
    // imagery: two overlapping anisotropic bumps.
    let noise = Normal::new(0.0, sigma).unwrap();
    let body_len = rng.gen_range(0.5..0.7);
    let body_amp = rng.gen_range(0.8..1.1);
    let mut out = MultiChannelSignal::zeros(1, chip, chip);
    let c = chip as f64 / 2.0 - 0.5;
    for r in 0..chip {
        for col in 0..chip {
            let dr = (r as f64 - c) / c;
            let dc = (col as f64 - c) / c;
            let body = body_amp * (-0.5 * ((dr / 0.45).powi(2) + (dc / body_len).powi(2))).exp();
            let engine = 0.6 * body_amp
                * (-0.5 * (((dr + 0.1) / 0.2).powi(2) + ((dc - 0.3) / 0.2).powi(2))).exp();
            out.set(0, r, col, body + engine + noise.sample(rng));
        }
    }
    out
}

fn distractor_chip(rng: &mut ChaCha8Rng, chip: usize, sigma: f64) -> MultiChannelSignal {
    // Round hot spot of similar energy but different shape.
    let noise = Normal::new(0.0, sigma).unwrap();
    let amp = rng.gen_range(0.7..1.0);
    let mut out = MultiChannelSignal::zeros(1, chip, chip);
    let c = chip as f64 / 2.0 - 0.5;
    for r in 0..chip {
        for col in 0..chip {
            let dr = (r as f64 - c) / c;
            let dc = (col as f64 - c) / c;
            let v = amp * (-0.5 * ((dr / 0.5).powi(2) + (dc / 0.5).powi(2))).exp();
            out.set(0, r, col, v + noise.sample(rng));
        }
    }
    out
}

fn embed(scene: &mut MultiChannelSignal, patch: &MultiChannelSignal, r0: usize, c0: usize) {
    for k in 0..patch.channels {
        for r in 0..patch.height {
            for c in 0..patch.width {
                let v = scene.at(k, r0 + r, c0 + c) + patch.at(k, r, c);
                scene.set(k, r0 + r, c0 + c, v);
            }
        }
    }
}

/// Small-target suite on textured clutter: training chips, probe scenes
/// with one target each, and target-free frames carrying distractor blobs.
pub fn vehicles_ir_like(seed: u64, config: &VehiclesConfig) -> VehiclesDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0xc2b2_ae35).wrapping_add(3));
    let training: Vec<_> = (0..config.train_count)
        .map(|_| vehicle_chip(&mut rng, config.chip, config.noise_sigma))
        .collect();
    let max_off = config.scene - config.chip;
    let probes: Vec<_> = (0..config.probe_count)
        .map(|_| {
            let chip = vehicle_chip(&mut rng, config.chip, config.noise_sigma);
            let mut scene = textured_background(&mut rng, config.scene, config.noise_sigma);
            let (r0, c0) = (rng.gen_range(0..=max_off), rng.gen_range(0..=max_off));
            embed(&mut scene, &chip, r0, c0);
            LabeledScene { scene, class: 0, location: Some((r0 as i64, c0 as i64)) }
        })
        .collect();
    let frames: Vec<_> = (0..config.distractor_frames)
        .map(|_| {
            let mut scene = textured_background(&mut rng, config.scene, config.noise_sigma);
            let blob = distractor_chip(&mut rng, config.chip, config.noise_sigma);
            let (r0, c0) = (rng.gen_range(0..=max_off), rng.gen_range(0..=max_off));
            embed(&mut scene, &blob, r0, c0);
            MiningFrame { scene, exclusion: None }
        })
        .collect();
    VehiclesDataset { training, probes, frames, chip: config.chip }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecg_like_is_deterministic_and_shaped() {
        let a = ecg_like(7, 301, 5, 0.02);
        let b = ecg_like(7, 301, 5, 0.02);
        assert_eq!(a.len(), 5);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.data(), y.data());
            assert_eq!((x.height, x.width, x.channels), (301, 1, 1));
        }
        // Different seeds differ.
        let c = ecg_like(8, 301, 5, 0.02);
        assert_ne!(a[0].data(), c[0].data());
        // The sharp central spike dominates the waveform.
        let (peak_idx, _) = a[0]
            .data()
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        assert!((peak_idx as f64 / 301.0 - 0.45).abs() < 0.05);
    }

    #[test]
    fn shapes_layout_and_determinism() {
        let config = ShapesConfig::default();
        let a = shapes(3, &config);
        let b = shapes(3, &config);
        assert_eq!(a.training.len(), 4);
        assert_eq!(a.training[0].len(), 10);
        assert_eq!(a.probes.len(), 40);
        assert_eq!(a.probes[0].scene.height, 20);
        for (x, y) in a.probes.iter().zip(&b.probes) {
            assert_eq!(x.scene.data(), y.scene.data());
            assert_eq!(x.location, y.location);
        }
        // Classes are visually distinct: mean inter-class chip distance
        // beats intra-class distance.
        let dist = |x: &MultiChannelSignal, y: &MultiChannelSignal| -> f64 {
            x.data().iter().zip(y.data()).map(|(a, b)| (a - b) * (a - b)).sum()
        };
        let intra = dist(&a.training[0][0], &a.training[0][1]);
        let inter = dist(&a.training[0][0], &a.training[2][0]);
        assert!(inter > intra);
    }

    #[test]
    fn vehicles_dataset_has_target_free_frames() {
        let config = VehiclesConfig::default();
        let a = vehicles_ir_like(11, &config);
        let b = vehicles_ir_like(11, &config);
        assert_eq!(a.training.len(), 8);
        assert_eq!(a.probes.len(), 8);
        assert_eq!(a.frames.len(), 6);
        for (x, y) in a.frames.iter().zip(&b.frames) {
            assert_eq!(x.scene.data(), y.scene.data());
        }
        // Probes locate their target inside the scene.
        for p in &a.probes {
            let (r, c) = p.location.unwrap();
            assert!(r >= 0 && c >= 0);
            assert!((r as usize) + config.chip <= config.scene);
            assert!((c as usize) + config.chip <= config.scene);
        }
    }
}
