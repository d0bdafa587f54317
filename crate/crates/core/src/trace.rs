//! Process-trace data model: phase schema, timestamped feature frames,
//! completeness labeling, and whole-case dataset splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Ordered phase list of a linear process. The first and last phases can be
/// flagged as boundary phases (process not yet started / already ended);
/// boundary phases are excluded from the Gaussian-mixture phase model and
/// detected by thresholds on completeness instead.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSchema {
    phases: Vec<String>,
    boundary_start: bool,
    boundary_end: bool,
}

impl PhaseSchema {
    /// Schema with both boundary flags set, the usual layout for processes
    /// that have explicit pre-start and wrap-up phases.
    pub fn new(phases: Vec<String>) -> Result<Self> {
        PhaseSchema::with_boundaries(phases, true, true)
    }

    pub fn with_boundaries(phases: Vec<String>, boundary_start: bool, boundary_end: bool) -> Result<Self> {
        if phases.len() < 2 {
            return Err(Error::usage(format!(
                "a phase schema needs at least 2 phases, got {}",
                phases.len()
            )));
        }
        for (i, name) in phases.iter().enumerate() {
            if phases[..i].contains(name) {
                return Err(Error::usage(format!("duplicate phase name {name:?}")));
            }
        }
        Ok(PhaseSchema {
            phases,
            boundary_start,
            boundary_end,
        })
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> &[String] {
        &self.phases
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.phases.get(index).map(String::as_str)
    }

    pub fn boundary_start(&self) -> bool {
        self.boundary_start
    }

    pub fn boundary_end(&self) -> bool {
        self.boundary_end
    }

    /// Phase indices modeled by the mixture (boundary phases excluded).
    pub fn interior_range(&self) -> std::ops::Range<usize> {
        let start = usize::from(self.boundary_start);
        let end = self.phases.len() - usize::from(self.boundary_end);
        start..end
    }

    pub fn is_interior(&self, index: usize) -> bool {
        self.interior_range().contains(&index)
    }
}

/// One timestamped observation: seconds from trace start plus a fixed-size
/// feature vector. Feature extraction happens upstream; this crate only
/// sees vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrame<T> {
    pub timestamp: T,
    pub features: Vec<T>,
}

/// One complete enactment of a linear process.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessTrace<T> {
    pub id: String,
    pub schema: PhaseSchema,
    pub frames: Vec<FeatureFrame<T>>,
    /// `(phase index, start frame index)`, strictly increasing in both
    /// fields, first mark at frame 0.
    pub phase_marks: Vec<(usize, usize)>,
    pub duration_s: T,
}

impl<T: Real> ProcessTrace<T> {
    pub fn new(
        id: String,
        schema: PhaseSchema,
        frames: Vec<FeatureFrame<T>>,
        phase_marks: Vec<(usize, usize)>,
        duration_s: T,
    ) -> Result<Self> {
        let trace = ProcessTrace {
            id,
            schema,
            frames,
            phase_marks,
            duration_s,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::data(format!("trace {} has no frames", self.id)));
        }
        let dim = self.frames[0].features.len();
        let mut prev_ts: Option<T> = None;
        for (i, frame) in self.frames.iter().enumerate() {
            if frame.features.len() != dim {
                return Err(Error::data(format!(
                    "trace {}: frame {i} has {} features, expected {dim}",
                    self.id,
                    frame.features.len()
                )));
            }
            if !frame.timestamp.is_finite() {
                return Err(Error::data(format!(
                    "trace {}: frame {i} has non-finite timestamp",
                    self.id
                )));
            }
            if let Some(prev) = prev_ts {
                if frame.timestamp <= prev {
                    return Err(Error::data(format!(
                        "trace {}: timestamps not strictly increasing at frame {i}",
                        self.id
                    )));
                }
            }
            prev_ts = Some(frame.timestamp);
        }
        if self.phase_marks.is_empty() {
            return Err(Error::data(format!("trace {} has no phase marks", self.id)));
        }
        if self.phase_marks[0].1 != 0 {
            return Err(Error::data(format!(
                "trace {}: first phase mark must start at frame 0",
                self.id
            )));
        }
        let mut prev_mark: Option<(usize, usize)> = None;
        for &(phase, frame) in &self.phase_marks {
            if phase >= self.schema.len() {
                return Err(Error::data(format!(
                    "trace {}: phase index {phase} outside schema of {} phases",
                    self.id,
                    self.schema.len()
                )));
            }
            if frame >= self.frames.len() {
                return Err(Error::data(format!(
                    "trace {}: phase mark at frame {frame} beyond {} frames",
                    self.id,
                    self.frames.len()
                )));
            }
            if let Some((p, f)) = prev_mark {
                // Strict increase in both fields also rules out repeated
                // phases; the process is linear.
                if phase <= p || frame <= f {
                    return Err(Error::data(format!(
                        "trace {}: phase marks must strictly increase, got ({p},{f}) then ({phase},{frame})",
                        self.id
                    )));
                }
            }
            prev_mark = Some((phase, frame));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.frames[0].features.len()
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    /// Ground-truth phase of every frame, from the phase marks.
    pub fn phase_sequence(&self) -> Vec<usize> {
        let mut phases = vec![0; self.frames.len()];
        for window in 0..self.phase_marks.len() {
            let (phase, start) = self.phase_marks[window];
            let end = self
                .phase_marks
                .get(window + 1)
                .map(|&(_, f)| f)
                .unwrap_or(self.frames.len());
            for slot in &mut phases[start..end] {
                *slot = phase;
            }
        }
        phases
    }
}

/// Per-frame completeness targets, quantized to 5% steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletenessLabels<T> {
    values: Vec<T>,
}

impl<T: Real> CompletenessLabels<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        let twenty = real::<T>(20.0);
        let tol = real::<T>(1e-9);
        let mut prev = -T::one();
        for (i, &v) in values.iter().enumerate() {
            if v < T::zero() || v > T::one() {
                return Err(Error::data(format!("label {i} outside [0,1]: {v}")));
            }
            if v < prev {
                return Err(Error::data(format!("labels decrease at index {i}")));
            }
            let scaled = v * twenty;
            if (scaled - scaled.round()).abs() > tol {
                return Err(Error::data(format!(
                    "label {i} = {v} is not a multiple of 0.05"
                )));
            }
            prev = v;
        }
        Ok(CompletenessLabels { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Stepwise completeness target for every frame: the trace is divided into
/// twenty 5% segments and each frame is labeled with its segment's lower
/// edge; the final frame is pinned to 1.0.
pub fn label_completeness<T: Real>(trace: &ProcessTrace<T>) -> Result<CompletenessLabels<T>> {
    if trace.num_frames() < 2 {
        return Err(Error::data(format!(
            "trace {} needs at least 2 frames to label",
            trace.id
        )));
    }
    if trace.duration_s <= T::zero() {
        return Err(Error::data(format!(
            "trace {} has non-positive duration {}",
            trace.id, trace.duration_s
        )));
    }
    let twenty = real::<T>(20.0);
    let max_segment = real::<T>(19.0);
    let last = trace.num_frames() - 1;
    let values = trace
        .frames
        .iter()
        .enumerate()
        .map(|(i, frame)| {
            if i == last {
                T::one()
            } else {
                let segment = (twenty * frame.timestamp / trace.duration_s).floor();
                segment.min(max_segment).max(T::zero()) / twenty
            }
        })
        .collect();
    CompletenessLabels::new(values)
}

/// Training and test subsets of a dataset, in that order.
pub type TrainTestSplit<T> = (Vec<ProcessTrace<T>>, Vec<ProcessTrace<T>>);

/// Partition a dataset by whole trace. The test set gets
/// `round(test_fraction * n)` traces (at least 1, and at most `n - 1` so
/// the training side stays non-empty); membership is drawn from the seed.
pub fn split_dataset<T: Real>(
    traces: Vec<ProcessTrace<T>>,
    test_fraction: f64,
    seed: u64,
) -> Result<TrainTestSplit<T>> {
    if traces.len() < 2 {
        return Err(Error::usage(format!(
            "splitting needs at least 2 traces, got {}",
            traces.len()
        )));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::usage(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let n = traces.len();
    let test_size = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let test_indices: std::collections::HashSet<usize> = order[..test_size].iter().copied().collect();

    let mut train = Vec::with_capacity(n - test_size);
    let mut test = Vec::with_capacity(test_size);
    for (i, trace) in traces.into_iter().enumerate() {
        if test_indices.contains(&i) {
            test.push(trace);
        } else {
            train.push(trace);
        }
    }
    Ok((train, test))
}
