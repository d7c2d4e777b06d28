//! Episode and dataset statistics: durations, trajectory lengths, per-task
//! counts and histograms.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::dataset::store::{episode_dir, load_index};
use crate::dataset::{AlignedEpisode, DatasetIndex, EpisodeMeta};
use crate::error::{Error, Result};

/// Fraction threshold below which an action component counts as idle; a
/// conventional gamepad dead-zone.
pub const ACTIVITY_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeStats {
    pub duration_s: f64,
    /// Cumulative tip path length over consecutive aligned positions.
    pub trajectory_length_m: f64,
    /// Fraction of records with |component| above the dead-zone, per
    /// continuous action axis (bend_x, bend_y, insertion).
    pub action_activity: [f64; 3],
}

/// Duration, path length and per-axis activity of one aligned episode.
pub fn episode_stats(episode: &AlignedEpisode) -> EpisodeStats {
    let n = episode.records.len().max(1) as f64;
    let mut length = 0.0;
    for w in episode.records.windows(2) {
        length += w[1].position_m.sub(w[0].position_m).norm();
    }
    let mut active = [0usize; 3];
    for r in &episode.records {
        for axis in 0..3 {
            if r.action[axis].abs() > ACTIVITY_THRESHOLD {
                active[axis] += 1;
            }
        }
    }
    EpisodeStats {
        duration_s: episode.duration_s(),
        trajectory_length_m: length,
        action_activity: [
            active[0] as f64 / n,
            active[1] as f64 / n,
            active[2] as f64 / n,
        ],
    }
}

/// Fixed-edge histogram with explicit out-of-range counters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(edges: Vec<f64>) -> Result<Histogram> {
        if edges.len() < 2 || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "histogram edges must be strictly increasing, length >= 2".into(),
            ));
        }
        let bins = edges.len() - 1;
        Ok(Histogram {
            edges,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        })
    }

    pub fn add(&mut self, value: f64) {
        if value < self.edges[0] {
            self.underflow += 1;
            return;
        }
        if value >= *self.edges.last().unwrap() {
            self.overflow += 1;
            return;
        }
        let bin = self.edges.partition_point(|&e| e <= value) - 1;
        self.counts[bin] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsOptions {
    pub duration_edges_s: Vec<f64>,
    pub length_edges_m: Vec<f64>,
}

impl Default for StatsOptions {
    /// Duration bins: 0-120 s in 10 s steps; length bins: 0-1 m in 5 cm
    /// steps.
    fn default() -> Self {
        StatsOptions {
            duration_edges_s: (0..=12).map(|k| k as f64 * 10.0).collect(),
            length_edges_m: (0..=20).map(|k| k as f64 * 0.05).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub episode_count: usize,
    /// Keyed by decimal task id.
    pub task_counts: BTreeMap<String, u64>,
    pub total_duration_s: f64,
    pub total_hours: f64,
    pub duration_hist: Histogram,
    pub length_hist: Histogram,
}

impl DatasetStats {
    pub fn empty(opts: &StatsOptions) -> Result<DatasetStats> {
        Ok(DatasetStats {
            episode_count: 0,
            task_counts: BTreeMap::new(),
            total_duration_s: 0.0,
            total_hours: 0.0,
            duration_hist: Histogram::new(opts.duration_edges_s.clone())?,
            length_hist: Histogram::new(opts.length_edges_m.clone())?,
        })
    }
}

/// Aggregates an index without touching the episode directories; used both
/// by `dataset_stats` and for metadata-only consistency checks.
pub fn stats_from_index(index: &DatasetIndex, opts: &StatsOptions) -> Result<DatasetStats> {
    index.check().map_err(|e| match e {
        Error::Inconsistent(msg) => Error::Inconsistent(msg),
        other => other,
    })?;
    let mut stats = DatasetStats::empty(opts)?;
    stats.episode_count = index.episodes.len();
    stats.task_counts = index.task_counts.clone();
    stats.total_duration_s = index.total_duration_s();
    stats.total_hours = index.total_hours();
    for e in &index.episodes {
        stats.duration_hist.add(e.duration_s);
        stats.length_hist.add(e.trajectory_length_m);
    }
    Ok(stats)
}

/// Dataset-level report for a root directory. Each indexed episode's
/// `meta.json` is cross-checked against its index entry; disagreement is a
/// consistency error. A missing index yields an all-zero report.
pub fn dataset_stats(root: &Path, opts: &StatsOptions) -> Result<DatasetStats> {
    let index = load_index(root)?;
    for entry in &index.episodes {
        let dir = episode_dir(root, &entry.id);
        let meta_path = dir.join("meta.json");
        let text = std::fs::read_to_string(&meta_path).map_err(|_| {
            Error::Inconsistent(format!(
                "index lists {:?} but {} is missing",
                entry.id,
                meta_path.display()
            ))
        })?;
        let meta: EpisodeMeta = serde_json::from_str(&text)
            .map_err(|e| Error::format(&meta_path, 1, e.to_string()))?;
        let agrees = meta.episode_id == entry.id
            && meta.task.id == entry.task_id
            && meta.n_frames == entry.n_frames
            && meta.duration_s == entry.duration_s
            && meta.trajectory_length_m == entry.trajectory_length_m;
        if !agrees {
            return Err(Error::Inconsistent(format!(
                "index entry for {:?} disagrees with its meta.json",
                entry.id
            )));
        }
    }
    stats_from_index(&index, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AlignedRecord, IndexEntry};
    use crate::geom::{Quat, Vec3};
    use crate::types::Timestamp;

    fn episode_from_positions(positions: Vec<Vec3>) -> AlignedEpisode {
        let records: Vec<AlignedRecord> = positions
            .iter()
            .enumerate()
            .map(|(i, p)| AlignedRecord {
                frame_index: i as u32,
                t: Timestamp::from_nanos(i as i64 * 33_333_333).unwrap(),
                action: [0.0, 0.0, 0.0, 0.0],
                state_deg: [0.0, 0.0, 0.0],
                position_m: *p,
                orientation: Quat::IDENTITY,
                frame_ref: AlignedRecord::frame_ref_for(i as u32),
            })
            .collect();
        AlignedEpisode {
            rate_hz: 30.0,
            records,
            frames: Vec::new(), // stats do not touch frames
        }
    }

    #[test]
    fn static_episode_has_zero_length() {
        let ep = episode_from_positions(vec![Vec3::new(0.1, 0.2, 0.3); 10]);
        assert_eq!(episode_stats(&ep).trajectory_length_m, 0.0);
    }

    #[test]
    fn straight_line_length() {
        let n = 100;
        let ep = episode_from_positions(
            (0..n)
                .map(|k| Vec3::new(0.0, 0.0, 0.30 * k as f64 / (n - 1) as f64))
                .collect(),
        );
        let s = episode_stats(&ep);
        assert!((s.trajectory_length_m - 0.30).abs() < 1e-12);
    }

    #[test]
    fn circular_path_chord_sum() {
        // Radius r, k full turns over n samples: chord sum approaches
        // 2*pi*r*k from below with a known discretization bound.
        let r = 0.05;
        let turns = 2.0;
        let n = 1800usize;
        let ep = episode_from_positions(
            (0..n)
                .map(|i| {
                    let a = 2.0 * std::f64::consts::PI * turns * i as f64 / (n - 1) as f64;
                    Vec3::new(r * a.cos(), r * a.sin(), 0.0)
                })
                .collect(),
        );
        let s = episode_stats(&ep);
        let exact = 2.0 * std::f64::consts::PI * r * turns;
        assert!(
            (s.trajectory_length_m - exact).abs() / exact < 1e-3,
            "length {} vs {exact}",
            s.trajectory_length_m
        );
    }

    #[test]
    fn trajectory_length_invariant_under_rigid_motion() {
        let positions: Vec<Vec3> = (0..50)
            .map(|k| {
                let t = k as f64 * 0.1;
                Vec3::new(t.sin() * 0.02, t.cos() * 0.03, 0.01 * t)
            })
            .collect();
        let base = episode_stats(&episode_from_positions(positions.clone()));
        let q = Quat::from_axis_angle(Vec3::new(0.3, -0.7, 0.2), 1.234);
        let shift = Vec3::new(0.5, -0.2, 0.9);
        let moved: Vec<Vec3> = positions.iter().map(|p| q.rotate(*p).add(shift)).collect();
        let transformed = episode_stats(&episode_from_positions(moved));
        assert!(
            (base.trajectory_length_m - transformed.trajectory_length_m).abs() < 1e-12,
            "rigid motion changed the path length"
        );
    }

    #[test]
    fn activity_counts_dead_zone() {
        let mut ep = episode_from_positions(vec![Vec3::ZERO; 4]);
        ep.records[0].action = [0.04, 0.0, 0.0, 0.0];
        ep.records[1].action = [0.06, 0.0, 0.0, 0.0];
        ep.records[2].action = [-0.5, 0.0, 0.06, 0.0];
        ep.records[3].action = [0.0, 0.0, 0.0, 0.0];
        let s = episode_stats(&ep);
        assert_eq!(s.action_activity[0], 0.5);
        assert_eq!(s.action_activity[1], 0.0);
        assert_eq!(s.action_activity[2], 0.25);
    }

    #[test]
    fn histogram_binning_and_overflow() {
        let mut h = Histogram::new(vec![0.0, 1.0, 2.0]).unwrap();
        h.add(-0.1);
        h.add(0.0);
        h.add(0.5);
        h.add(1.0);
        h.add(5.0);
        assert_eq!(h.counts, vec![2, 1]);
        assert_eq!(h.underflow, 1);
        assert_eq!(h.overflow, 1);
        assert_eq!(h.total(), 5);
    }

    #[test]
    fn empty_root_gives_zero_filled_report() {
        let dir = tempfile::tempdir().unwrap();
        let stats = dataset_stats(dir.path(), &StatsOptions::default()).unwrap();
        assert_eq!(stats.episode_count, 0);
        assert_eq!(stats.total_hours, 0.0);
        assert!(stats.task_counts.is_empty());
    }

    #[test]
    fn index_totals_match_sum_of_episodes() {
        let mut index = DatasetIndex::default();
        for k in 0..10 {
            index.episodes.push(IndexEntry {
                id: format!("e{k}"),
                task_id: (k % 3) as u8,
                n_frames: 300,
                duration_s: 10.0 + k as f64,
                trajectory_length_m: 0.1 * k as f64,
            });
        }
        index.recount_tasks();
        let stats = stats_from_index(&index, &StatsOptions::default()).unwrap();
        let expected: f64 = (0..10).map(|k| 10.0 + k as f64).sum();
        assert_eq!(stats.total_duration_s, expected);
        assert_eq!(stats.episode_count, 10);
        assert_eq!(stats.duration_hist.total(), 10);
    }
}
