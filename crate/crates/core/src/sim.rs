//! Seeded synthetic dataset generator for linear sequential processes.
//!
//! Each trace walks through all phases in schema order. Phase durations are
//! Gaussian with a floor at 0.2x the mean; frames carry a phase-specific
//! feature mean plus isotropic noise. Everything is a pure function of the
//! config, and traces get independent sub-seeds so parallel and serial
//! generation agree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::trace::{FeatureFrame, PhaseSchema, ProcessTrace};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulatorConfig<T> {
    pub seed: u64,
    pub num_traces: usize,
    pub num_phases: usize,
    pub feature_dim: usize,
    /// Frames per second.
    pub frame_rate: T,
    /// Per-phase mean duration in seconds.
    pub phase_duration_means: Vec<T>,
    /// Per-phase duration standard deviation in seconds.
    pub phase_duration_stds: Vec<T>,
    /// Average pairwise distance between per-phase feature means.
    pub emission_separation: T,
    /// Isotropic feature noise.
    pub noise_std: T,
}

impl<T: Real> SimulatorConfig<T> {
    /// Config with the default duration profile: short boundary phases
    /// bracketing longer interior phases.
    pub fn new(seed: u64, num_traces: usize, num_phases: usize, feature_dim: usize) -> Self {
        SimulatorConfig {
            seed,
            num_traces,
            num_phases,
            feature_dim,
            frame_rate: T::one(),
            phase_duration_means: default_duration_means(num_phases),
            phase_duration_stds: default_duration_means::<T>(num_phases)
                .into_iter()
                .map(|m| m / real(6.0))
                .collect(),
            emission_separation: real(2.0),
            noise_std: real(0.5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_phases < 2 {
            return Err(Error::usage(format!(
                "simulator needs at least 2 phases, got {}",
                self.num_phases
            )));
        }
        if self.feature_dim == 0 {
            return Err(Error::usage("feature_dim must be >= 1"));
        }
        if self.num_traces == 0 {
            return Err(Error::usage("num_traces must be >= 1"));
        }
        if self.frame_rate <= T::zero() {
            return Err(Error::usage("frame_rate must be > 0"));
        }
        if self.phase_duration_means.len() != self.num_phases
            || self.phase_duration_stds.len() != self.num_phases
        {
            return Err(Error::usage(format!(
                "expected {} duration means/stds, got {}/{}",
                self.num_phases,
                self.phase_duration_means.len(),
                self.phase_duration_stds.len()
            )));
        }
        if self.phase_duration_means.iter().any(|&m| m <= T::zero()) {
            return Err(Error::usage("phase duration means must be positive"));
        }
        if self.phase_duration_stds.iter().any(|&s| s < T::zero()) {
            return Err(Error::usage("phase duration stds must be non-negative"));
        }
        if self.emission_separation < T::zero() {
            return Err(Error::usage("emission_separation must be >= 0"));
        }
        if self.noise_std < T::zero() {
            return Err(Error::usage("noise_std must be >= 0"));
        }
        Ok(())
    }

    pub fn schema(&self) -> PhaseSchema {
        let names = (0..self.num_phases).map(|k| format!("phase{k}")).collect();
        PhaseSchema::new(names).expect("simulator schema")
    }
}

/// Default per-phase mean durations in seconds: boundary phases are short
/// (under one 5% completeness segment), interior phases cycle through a
/// varied profile.
pub fn default_duration_means<T: Real>(num_phases: usize) -> Vec<T> {
    let interior_cycle = [45.0, 90.0, 120.0, 75.0];
    (0..num_phases)
        .map(|k| {
            if k == 0 {
                real(12.0)
            } else if k == num_phases - 1 {
                real(10.0)
            } else {
                real(interior_cycle[(k - 1) % interior_cycle.len()])
            }
        })
        .collect()
}

fn sub_seed(seed: u64, index: u64) -> u64 {
    let mut x = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-phase feature means: standard normal draws rescaled so the average
/// pairwise distance equals `emission_separation`.
pub fn emission_means<T: Real>(config: &SimulatorConfig<T>) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(config.seed, u64::MAX));
    let raw: Vec<Vec<f64>> = (0..config.num_phases)
        .map(|_| {
            (0..config.feature_dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let mut dist_sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..raw.len() {
        for j in (i + 1)..raw.len() {
            let d: f64 = raw[i]
                .iter()
                .zip(&raw[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            dist_sum += d;
            pairs += 1;
        }
    }
    let mean_dist = dist_sum / pairs as f64;
    let scale = if mean_dist > 0.0 {
        config.emission_separation.to_f64().unwrap_or(0.0) / mean_dist
    } else {
        0.0
    };
    raw.into_iter()
        .map(|v| v.into_iter().map(|x| real(x * scale)).collect())
        .collect()
}

fn sample_duration(rng: &mut ChaCha8Rng, mean: f64, std: f64) -> f64 {
    let floor = 0.2 * mean;
    if std == 0.0 {
        return mean;
    }
    // Lower-truncated Gaussian via rejection; acceptance is at least 1/2
    // because the cut sits below the mean.
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let d = mean + std * z;
        if d >= floor {
            return d;
        }
    }
}

pub fn generate_dataset<T: Real>(config: &SimulatorConfig<T>) -> Result<Vec<ProcessTrace<T>>> {
    config.validate()?;
    let schema = config.schema();
    let means = emission_means(config);
    (0..config.num_traces)
        .map(|idx| generate_trace(config, &schema, &means, idx))
        .collect()
}

fn generate_trace<T: Real>(
    config: &SimulatorConfig<T>,
    schema: &PhaseSchema,
    means: &[Vec<T>],
    index: usize,
) -> Result<ProcessTrace<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(config.seed, index as u64));
    let k = config.num_phases;
    let frame_rate = config.frame_rate.to_f64().unwrap();
    let noise_std = config.noise_std.to_f64().unwrap();

    let durations: Vec<f64> = (0..k)
        .map(|p| {
            sample_duration(
                &mut rng,
                config.phase_duration_means[p].to_f64().unwrap(),
                config.phase_duration_stds[p].to_f64().unwrap(),
            )
        })
        .collect();
    let total: f64 = durations.iter().sum();
    let num_frames = (total * frame_rate).floor() as usize + 1;
    if num_frames < k.max(2) {
        return Err(Error::usage(format!(
            "config yields only {num_frames} frames for {k} phases; raise durations or frame rate"
        )));
    }

    // Phase start frames: first frame at or past each cumulative boundary,
    // nudged so every phase keeps at least one frame.
    let mut marks = Vec::with_capacity(k);
    let mut cumulative = 0.0;
    let mut prev_frame = 0usize;
    for (p, d) in durations.iter().enumerate() {
        let start = if p == 0 {
            0
        } else {
            let nominal = (cumulative * frame_rate).ceil() as usize;
            nominal.max(prev_frame + 1).min(num_frames - (k - p))
        };
        marks.push((p, start));
        prev_frame = start;
        cumulative += d;
    }

    let mut frames = Vec::with_capacity(num_frames);
    let mut phase = 0usize;
    for i in 0..num_frames {
        while phase + 1 < k && marks[phase + 1].1 <= i {
            phase += 1;
        }
        let features = means[phase]
            .iter()
            .map(|&m| {
                let noise: f64 = rng.sample(StandardNormal);
                m + real::<T>(noise * noise_std)
            })
            .collect();
        frames.push(FeatureFrame {
            timestamp: real::<T>(i as f64 / frame_rate),
            features,
        });
    }

    ProcessTrace::new(
        format!("case-{index:04}"),
        schema.clone(),
        frames,
        marks,
        real(total),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SimulatorConfig<f64> {
        SimulatorConfig::new(7, 4, 4, 3)
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_dataset(&small_config()).unwrap();
        let b = generate_dataset(&small_config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn traces_satisfy_invariants() {
        for trace in generate_dataset(&small_config()).unwrap() {
            trace.validate().unwrap();
            assert_eq!(trace.phase_marks.len(), 4);
        }
    }

    #[test]
    fn zero_noise_features_equal_phase_means() {
        let mut config = SimulatorConfig::<f64>::new(3, 2, 2, 2);
        config.noise_std = 0.0;
        config.emission_separation = 1.0;
        let means = emission_means(&config);
        // The two means sit exactly one separation unit apart.
        let dist: f64 = means[0]
            .iter()
            .zip(&means[1])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!((dist - 1.0).abs() < 1e-12);

        for trace in generate_dataset(&config).unwrap() {
            let phases = trace.phase_sequence();
            for (frame, &p) in trace.frames.iter().zip(&phases) {
                assert_eq!(frame.features, means[p], "frame features must equal the phase mean");
                // Nearest-mean recovers the phase.
                let d0: f64 = frame
                    .features
                    .iter()
                    .zip(&means[0])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let d1: f64 = frame
                    .features
                    .iter()
                    .zip(&means[1])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                assert_eq!(if d0 <= d1 { 0 } else { 1 }, p);
            }
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn empirical_durations_match_config_within_five_percent() {
        let mut config = SimulatorConfig::<f64>::new(11, 1000, 6, 2);
        config.noise_std = 0.1;
        let traces = generate_dataset(&config).unwrap();
        let k = config.num_phases;
        let mut sums = vec![0.0f64; k];
        for trace in &traces {
            for p in 0..k {
                // Frame-slot extents keep the mark quantization unbiased on
                // both ends of every phase.
                let start = trace.frames[trace.phase_marks[p].1].timestamp;
                let end = if p + 1 < k {
                    trace.frames[trace.phase_marks[p + 1].1].timestamp
                } else {
                    trace.frames.last().unwrap().timestamp + 1.0 / config.frame_rate
                };
                sums[p] += end - start;
            }
        }
        for p in 0..k {
            let mean = sums[p] / traces.len() as f64;
            let configured = config.phase_duration_means[p];
            let rel = (mean - configured).abs() / configured;
            assert!(rel < 0.05, "phase {p}: empirical {mean} vs configured {configured}");
        }
    }

    #[test]
    fn phase_mean_completeness_is_ordered() {
        let config = SimulatorConfig::<f64>::new(5, 200, 6, 2);
        let traces = generate_dataset(&config).unwrap();
        let k = config.num_phases;
        let mut sums = vec![0.0f64; k];
        let mut counts = vec![0usize; k];
        for trace in &traces {
            let phases = trace.phase_sequence();
            for (frame, &p) in trace.frames.iter().zip(&phases) {
                sums[p] += frame.timestamp / trace.duration_s;
                counts[p] += 1;
            }
        }
        let centers: Vec<f64> = (0..k).map(|p| sums[p] / counts[p] as f64).collect();
        for pair in centers.windows(2) {
            assert!(pair[0] < pair[1], "phase centers out of order: {centers:?}");
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut config = small_config();
        config.num_phases = 1;
        config.phase_duration_means = vec![10.0];
        config.phase_duration_stds = vec![1.0];
        assert!(generate_dataset(&config).is_err());

        let mut config = small_config();
        config.phase_duration_means[0] = -5.0;
        assert!(generate_dataset(&config).is_err());
    }
}
