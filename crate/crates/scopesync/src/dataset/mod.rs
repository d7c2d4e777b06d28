//! On-disk episode dataset: task taxonomy, aligned records, writer/reader
//! with bit-exact numeric round-trips, validation and statistics.
//!
//! Layout under a dataset root:
//!
//! ```text
//! root/
//!   index.json                    # format_version, episode list, task counts
//!   episodes/<id>/
//!     meta.json
//!     records.csv                 # fixed 17-column schema
//!     frames/<index>.pgm          # binary P5, 8-bit grayscale
//! ```
//!
//! Timestamps serialize as decimal integers and all real values as the
//! shortest round-trip decimal of the underlying 64-bit float, so
//! write-then-read compares equal on every field.

pub mod pgm;
mod stats;
mod store;
mod validate;

pub use stats::{dataset_stats, episode_stats, DatasetStats, EpisodeStats, Histogram, StatsOptions};
pub use store::{episode_path, read_episode, write_episode};
pub use validate::{validate_dataset, DatasetIssue, DatasetReport};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Quat, Vec3};
use crate::sync::OffsetCalibration;
use crate::types::{FrameSample, Timestamp};

/// The fixed task taxonomy: structured scanning objectives during insertion
/// (0-4) and retraction (5-9), plus failure and recovery segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    InsertionBottom,
    InsertionLeft,
    InsertionRight,
    InsertionTop,
    InsertionLumen,
    RetractionBottom,
    RetractionLeft,
    RetractionRight,
    RetractionTop,
    RetractionLumen,
    Failure,
    Recovery,
}

impl TaskKind {
    pub const ALL: [TaskKind; 12] = [
        TaskKind::InsertionBottom,
        TaskKind::InsertionLeft,
        TaskKind::InsertionRight,
        TaskKind::InsertionTop,
        TaskKind::InsertionLumen,
        TaskKind::RetractionBottom,
        TaskKind::RetractionLeft,
        TaskKind::RetractionRight,
        TaskKind::RetractionTop,
        TaskKind::RetractionLumen,
        TaskKind::Failure,
        TaskKind::Recovery,
    ];

    pub fn id(self) -> u8 {
        Self::ALL.iter().position(|&k| k == self).unwrap() as u8
    }

    pub fn from_id(id: u8) -> Result<TaskKind> {
        Self::ALL
            .get(id as usize)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("task id {id} outside 0-11")))
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::InsertionBottom => "insertion_bottom",
            TaskKind::InsertionLeft => "insertion_left",
            TaskKind::InsertionRight => "insertion_right",
            TaskKind::InsertionTop => "insertion_top",
            TaskKind::InsertionLumen => "insertion_lumen",
            TaskKind::RetractionBottom => "retraction_bottom",
            TaskKind::RetractionLeft => "retraction_left",
            TaskKind::RetractionRight => "retraction_right",
            TaskKind::RetractionTop => "retraction_top",
            TaskKind::RetractionLumen => "retraction_lumen",
            TaskKind::Failure => "failure",
            TaskKind::Recovery => "recovery",
        }
    }

    pub fn from_name(name: &str) -> Result<TaskKind> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown task name {name:?}")))
    }

    /// Canonical natural-language instruction for the task.
    pub fn default_instruction(self) -> &'static str {
        match self {
            TaskKind::InsertionBottom => "Insert the scope while scanning the bottom wall.",
            TaskKind::InsertionLeft => "Insert the scope while scanning the left wall.",
            TaskKind::InsertionRight => "Insert the scope while scanning the right wall.",
            TaskKind::InsertionTop => "Insert the scope while scanning the top wall.",
            TaskKind::InsertionLumen => "Insert the scope keeping the lumen centered.",
            TaskKind::RetractionBottom => "Retract the scope while scanning the bottom wall.",
            TaskKind::RetractionLeft => "Retract the scope while scanning the left wall.",
            TaskKind::RetractionRight => "Retract the scope while scanning the right wall.",
            TaskKind::RetractionTop => "Retract the scope while scanning the top wall.",
            TaskKind::RetractionLumen => "Retract the scope keeping the lumen centered.",
            TaskKind::Failure => "Segment capturing a navigation failure.",
            TaskKind::Recovery => "Recover the lumen view and resume navigation.",
        }
    }
}

/// Task kind plus the per-episode instruction, fixed for the whole episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskLabel {
    pub id: u8,
    pub name: String,
    pub instruction: String,
}

impl TaskLabel {
    pub fn new(kind: TaskKind, instruction: impl Into<String>) -> Self {
        TaskLabel {
            id: kind.id(),
            name: kind.name().to_string(),
            instruction: instruction.into(),
        }
    }

    pub fn with_default_instruction(kind: TaskKind) -> Self {
        Self::new(kind, kind.default_instruction())
    }

    pub fn kind(&self) -> Result<TaskKind> {
        let kind = TaskKind::from_id(self.id)?;
        if kind.name() != self.name {
            return Err(Error::Inconsistent(format!(
                "task id {} maps to {:?}, not {:?}",
                self.id,
                kind.name(),
                self.name
            )));
        }
        Ok(kind)
    }
}

/// One fixed-grid record joining all four modalities at a frame time.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedRecord {
    pub frame_index: u32,
    pub t: Timestamp,
    /// bend_x, bend_y, insertion, home (0 or 1).
    pub action: [f64; 4],
    /// bend_x_deg, bend_y_deg, insertion_deg.
    pub state_deg: [f64; 3],
    pub position_m: Vec3,
    pub orientation: Quat,
    /// Relative path of the frame image, `frames/<index>.pgm`.
    pub frame_ref: String,
}

impl AlignedRecord {
    pub fn frame_ref_for(index: u32) -> String {
        format!("frames/{index}.pgm")
    }
}

/// A complete aligned episode: records on the (trimmed) frame grid plus the
/// frame images themselves, one per record.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedEpisode {
    pub rate_hz: f64,
    pub records: Vec<AlignedRecord>,
    pub frames: Vec<FrameSample>,
}

impl AlignedEpisode {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        match (self.records.first(), self.records.last()) {
            (Some(a), Some(b)) => b.t.as_secs_f64() - a.t.as_secs_f64(),
            _ => 0.0,
        }
    }

    /// Structural invariants: consecutive indices from zero, strictly
    /// increasing timestamps, matching frame refs and one frame per record.
    pub fn check(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::InvalidArgument("episode has no records".into()));
        }
        if self.frames.len() != self.records.len() {
            return Err(Error::InvalidArgument(format!(
                "{} frames for {} records",
                self.frames.len(),
                self.records.len()
            )));
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.frame_index != i as u32 {
                return Err(Error::InvalidArgument(format!(
                    "record {i} has frame_index {}",
                    r.frame_index
                )));
            }
            if r.frame_ref != AlignedRecord::frame_ref_for(i as u32) {
                return Err(Error::InvalidArgument(format!(
                    "record {i} has frame_ref {:?}",
                    r.frame_ref
                )));
            }
            if i > 0 && r.t <= self.records[i - 1].t {
                return Err(Error::InvalidArgument(format!(
                    "record {i} timestamp is not increasing"
                )));
            }
            if (r.orientation.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidArgument(format!(
                    "record {i} orientation is not unit"
                )));
            }
            let finite = r.action.iter().all(|v| v.is_finite())
                && r.state_deg.iter().all(|v| v.is_finite())
                && r.position_m.is_finite();
            if !finite {
                return Err(Error::InvalidArgument(format!(
                    "record {i} has non-finite values"
                )));
            }
            if r.action[3] != 0.0 && r.action[3] != 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "record {i} home flag is {}",
                    r.action[3]
                )));
            }
        }
        Ok(())
    }
}

pub const EPISODE_RATE_HZ: f64 = 30.0;

/// Per-episode metadata stored as `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub episode_id: String,
    pub task: TaskLabel,
    pub instruction: String,
    pub duration_s: f64,
    pub n_frames: u32,
    pub trajectory_length_m: f64,
    pub rate_hz: f64,
    pub calibration: OffsetCalibration,
}

impl EpisodeMeta {
    /// Derives the metadata for an aligned episode.
    pub fn for_episode(
        episode_id: impl Into<String>,
        task: TaskLabel,
        episode: &AlignedEpisode,
        calibration: OffsetCalibration,
    ) -> Result<EpisodeMeta> {
        let episode_id = episode_id.into();
        validate_episode_id(&episode_id)?;
        episode.check()?;
        let stats = stats::episode_stats(episode);
        let instruction = task.instruction.clone();
        let meta = EpisodeMeta {
            episode_id,
            task,
            instruction,
            duration_s: episode.duration_s(),
            n_frames: episode.len() as u32,
            trajectory_length_m: stats.trajectory_length_m,
            rate_hz: episode.rate_hz,
            calibration,
        };
        meta.check()?;
        Ok(meta)
    }

    /// The duration must agree with the frame count at the episode rate to
    /// within one frame period.
    pub fn check(&self) -> Result<()> {
        validate_episode_id(&self.episode_id)?;
        self.task.kind()?;
        if self.n_frames == 0 {
            return Err(Error::InvalidArgument("episode has no frames".into()));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(Error::InvalidArgument("rate_hz must be positive".into()));
        }
        let expected = (self.n_frames as f64 - 1.0) / self.rate_hz;
        let tol = 1.0 / self.rate_hz;
        if (self.duration_s - expected).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "duration {}s disagrees with {} frames at {} Hz (expected ~{expected:.3}s)",
                self.duration_s, self.n_frames, self.rate_hz
            )));
        }
        Ok(())
    }
}

pub(crate) fn validate_episode_id(id: &str) -> Result<()> {
    if id.is_empty()
        || !id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(Error::InvalidArgument(format!(
            "episode id {id:?} must be non-empty [A-Za-z0-9_-]"
        )));
    }
    Ok(())
}

/// One `index.json` entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub task_id: u8,
    pub n_frames: u32,
    pub duration_s: f64,
    pub trajectory_length_m: f64,
}

pub const INDEX_FORMAT_VERSION: &str = "1";

/// Dataset-level index: episode list plus aggregate counts per task id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub format_version: String,
    pub episodes: Vec<IndexEntry>,
    /// Keyed by decimal task id.
    pub task_counts: BTreeMap<String, u64>,
}

impl Default for DatasetIndex {
    fn default() -> Self {
        DatasetIndex {
            format_version: INDEX_FORMAT_VERSION.to_string(),
            episodes: Vec::new(),
            task_counts: BTreeMap::new(),
        }
    }
}

impl DatasetIndex {
    pub fn recount_tasks(&mut self) {
        self.task_counts.clear();
        for e in &self.episodes {
            *self
                .task_counts
                .entry(e.task_id.to_string())
                .or_insert(0) += 1;
        }
    }

    /// Counts must equal the sum over listed episodes.
    pub fn check(&self) -> Result<()> {
        if self.format_version != INDEX_FORMAT_VERSION {
            return Err(Error::Inconsistent(format!(
                "unsupported index format_version {:?}",
                self.format_version
            )));
        }
        let mut expected: BTreeMap<String, u64> = BTreeMap::new();
        for e in &self.episodes {
            TaskKind::from_id(e.task_id)?;
            *expected.entry(e.task_id.to_string()).or_insert(0) += 1;
        }
        if expected != self.task_counts {
            return Err(Error::Inconsistent(
                "task_counts do not match the episode list".into(),
            ));
        }
        Ok(())
    }

    pub fn total_duration_s(&self) -> f64 {
        self.episodes.iter().map(|e| e.duration_s).sum()
    }

    pub fn total_hours(&self) -> f64 {
        self.total_duration_s() / 3600.0
    }
}
