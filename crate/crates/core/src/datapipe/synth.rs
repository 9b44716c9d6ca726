//! Synthetic signs: each class is a parametric landmark trajectory, each
//! signer a persistent deformation of it.

use std::f64::consts::TAU;

use crate::datapipe::{DatasetManifest, LandmarkSequence, SampleEntry};
use crate::error::{Error, Result};
use crate::numerics::Rng;
use crate::{COORDS, FEATURE_DIM, LANDMARKS};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub classes: usize,
    pub signers: usize,
    pub samples_per_class: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    /// Per-coordinate measurement noise.
    pub noise: f64,
}

impl SynthConfig {
    pub fn new(classes: usize, signers: usize, samples_per_class: usize) -> Self {
        Self {
            classes,
            signers,
            samples_per_class,
            min_frames: 40,
            max_frames: 90,
            noise: 0.003,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub manifest: DatasetManifest,
    pub sequences: Vec<LandmarkSequence>,
}

struct ClassShape {
    pose: Vec<f64>,
    amplitude: Vec<f64>,
    phase: Vec<f64>,
    harmonic: Vec<f64>,
    harmonic_phase: Vec<f64>,
    frequency: f64,
}

impl ClassShape {
    fn draw(rng: &mut Rng) -> Self {
        let mut vec_of = |lo: f64, hi: f64| -> Vec<f64> {
            (0..FEATURE_DIM).map(|_| rng.uniform_range(lo, hi)).collect()
        };
        let pose = vec_of(-0.15, 0.15);
        let amplitude = vec_of(0.02, 0.05);
        let phase = vec_of(0.0, TAU);
        let harmonic = vec_of(0.1, 0.5);
        let harmonic_phase = vec_of(0.0, TAU);
        Self {
            pose,
            amplitude,
            phase,
            harmonic,
            harmonic_phase,
            frequency: rng.uniform_range(0.5, 1.5),
        }
    }
}

struct SignerStyle {
    scale: f64,
    offset: [f64; 3],
    speed: f64,
    phase: Vec<f64>,
}

impl SignerStyle {
    fn draw(rng: &mut Rng) -> Self {
        Self {
            scale: rng.uniform_range(0.85, 1.15),
            offset: [
                rng.uniform_range(0.3, 0.7),
                rng.uniform_range(0.3, 0.7),
                rng.uniform_range(-0.1, 0.1),
            ],
            speed: rng.uniform_range(0.8f64.ln(), 1.25f64.ln()).exp(),
            phase: (0..FEATURE_DIM).map(|_| 0.25 * rng.normal()).collect(),
        }
    }
}

pub fn signer_id(s: usize) -> String {
    format!("signer{s:02}")
}

/// Generates a balanced dataset: class `k` sample `i` is performed by
/// signer `i mod signers`, with a native length drawn from
/// `[min_frames, max_frames]`. Coordinates are rounded to `f32` so the
/// in-memory data equals what SLRB files store.
pub fn synth_generate(config: &SynthConfig, rng: &Rng) -> Result<SyntheticDataset> {
    if config.classes == 0 || config.signers == 0 || config.samples_per_class == 0 {
        return Err(Error::Parameter(format!(
            "synthetic counts must be ≥ 1 (classes {}, signers {}, per class {})",
            config.classes, config.signers, config.samples_per_class
        )));
    }
    if config.min_frames < 2 || config.max_frames < config.min_frames {
        return Err(Error::Parameter("synthetic frame range is invalid".into()));
    }
    let classes: Vec<ClassShape> = (0..config.classes)
        .map(|k| ClassShape::draw(&mut rng.split(&format!("class/{k}"))))
        .collect();
    let signers: Vec<SignerStyle> = (0..config.signers)
        .map(|s| SignerStyle::draw(&mut rng.split(&format!("signer/{s}"))))
        .collect();

    let mut entries = Vec::with_capacity(config.classes * config.samples_per_class);
    let mut sequences = Vec::with_capacity(entries.capacity());
    for (label, shape) in classes.iter().enumerate() {
        for i in 0..config.samples_per_class {
            let s = i % config.signers;
            let style = &signers[s];
            let id = format!("c{label:03}_{i:04}");
            let mut r = rng.split(&format!("sample/{id}"));
            let frames = config.min_frames + r.below(config.max_frames - config.min_frames + 1);
            let drift = [r.uniform_range(-0.05, 0.05), r.uniform_range(-0.05, 0.05), 0.0];
            let wobble_phase = r.uniform_range(0.0, TAU);
            let phase_jitter = 0.1 * r.normal();

            let mut values = vec![0.0; frames * FEATURE_DIM];
            for t in 0..frames {
                let u = t as f64 / (frames - 1) as f64;
                let tau = u.powf(style.speed);
                let wrist: Vec<f64> = (0..COORDS)
                    .map(|c| style.offset[c] + drift[c] * u + 0.02 * (TAU * u + wobble_phase + c as f64).sin())
                    .collect();
                for l in 0..LANDMARKS {
                    for c in 0..COORDS {
                        let f = l * COORDS + c;
                        let relative = if l == 0 {
                            0.0
                        } else {
                            let arg = TAU * shape.frequency * tau + shape.phase[f] + style.phase[f] + phase_jitter;
                            let harm = 2.0 * TAU * shape.frequency * tau + shape.harmonic_phase[f];
                            style.scale
                                * (shape.pose[f] + shape.amplitude[f] * (arg.sin() + shape.harmonic[f] * harm.sin()))
                        };
                        let v = wrist[c] + relative + config.noise * r.normal();
                        values[t * FEATURE_DIM + f] = v as f32 as f64;
                    }
                }
            }
            entries.push(SampleEntry {
                id: id.clone(),
                label,
                signer: signer_id(s),
                file: format!("samples/{id}.slrb"),
                frames,
            });
            sequences.push(LandmarkSequence::new(id, label, signer_id(s), values)?);
        }
    }
    Ok(SyntheticDataset {
        manifest: DatasetManifest::new(config.classes, entries)?,
        sequences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::{class_medoid, dtw_banded, normalize, DTW_WIDTH};
    use std::collections::{BTreeMap, BTreeSet};

    #[test]
    fn counts_and_balance() {
        let ds = synth_generate(&SynthConfig::new(5, 6, 40), &Rng::new(42, "synth")).unwrap();
        assert_eq!(ds.manifest.samples.len(), 200);
        assert_eq!(ds.sequences.len(), 200);
        assert_eq!(ds.manifest.signers().len(), 6);
        let mut per_signer: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
        for e in &ds.manifest.samples {
            per_signer.entry(&e.signer).or_default().insert(e.label);
            assert!((40..=90).contains(&e.frames));
        }
        assert!(per_signer.values().all(|labels| labels.len() == 5));
    }

    #[test]
    fn deterministic_given_seed() {
        let a = synth_generate(&SynthConfig::new(3, 4, 6), &Rng::new(7, "synth")).unwrap();
        let b = synth_generate(&SynthConfig::new(3, 4, 6), &Rng::new(7, "synth")).unwrap();
        assert_eq!(a.manifest, b.manifest);
        for (x, y) in a.sequences.iter().zip(&b.sequences) {
            assert!(x.values().iter().zip(y.values()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
        let c = synth_generate(&SynthConfig::new(3, 4, 6), &Rng::new(8, "synth")).unwrap();
        assert_ne!(a.sequences[0], c.sequences[0]);
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(synth_generate(&SynthConfig::new(0, 4, 6), &Rng::new(7, "s")).is_err());
        assert!(synth_generate(&SynthConfig::new(2, 0, 6), &Rng::new(7, "s")).is_err());
    }

    #[test]
    fn nearest_medoid_dtw_beats_chance_on_unseen_signers() {
        let classes = 5;
        let ds = synth_generate(&SynthConfig::new(classes, 6, 24), &Rng::new(42, "synth")).unwrap();
        let held_out = ["signer04", "signer05"];
        let (test, train): (Vec<_>, Vec<_>) = ds
            .sequences
            .iter()
            .map(normalize)
            .partition(|s| held_out.contains(&s.signer()));
        let medoids: Vec<_> = (0..classes)
            .map(|k| {
                let members: Vec<_> = train.iter().filter(|s| s.label() == k).cloned().collect();
                let m = class_medoid(&members, DTW_WIDTH).unwrap();
                members[m].clone()
            })
            .collect();
        let correct = test
            .iter()
            .filter(|s| {
                let a: Vec<&[f64]> = s.frames().collect();
                let best = (0..classes)
                    .min_by(|&x, &y| {
                        let bx: Vec<&[f64]> = medoids[x].frames().collect();
                        let by: Vec<&[f64]> = medoids[y].frames().collect();
                        let dx = dtw_banded(&a, &bx, DTW_WIDTH).unwrap().0;
                        let dy = dtw_banded(&a, &by, DTW_WIDTH).unwrap().0;
                        dx.total_cmp(&dy)
                    })
                    .unwrap();
                best == s.label()
            })
            .count();
        let acc = correct as f64 / test.len() as f64;
        assert!(acc > 1.0 / classes as f64, "accuracy {acc}");
    }
}
