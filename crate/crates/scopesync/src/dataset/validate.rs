//! Full-dataset validation walk: schema, invariants, index consistency and
//! frame-file presence. Collects issues into a machine-readable report and
//! never aborts on bad data.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;

use crate::dataset::store::{episode_dir, load_index, read_episode};
use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetIssue {
    /// Episode the issue belongs to, if any.
    pub episode: Option<String>,
    /// File the issue was found in, relative to the root where possible.
    pub file: String,
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct DatasetReport {
    pub episodes_checked: usize,
    pub issues: Vec<DatasetIssue>,
}

impl DatasetReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, episode: Option<&str>, file: String, line: Option<usize>, message: String) {
        self.issues.push(DatasetIssue {
            episode: episode.map(String::from),
            file,
            line,
            message,
        });
    }

    fn push_error(&mut self, episode: Option<&str>, fallback_file: String, err: Error) {
        match err {
            Error::Format { path, line, msg } => self.push(
                episode,
                path.display().to_string(),
                Some(line),
                msg,
            ),
            other => self.push(episode, fallback_file, None, other.to_string()),
        }
    }
}

/// Walks the dataset under `root`. An empty or missing dataset is clean;
/// every structural problem becomes one issue in the report.
pub fn validate_dataset(root: &Path) -> DatasetReport {
    let mut report = DatasetReport::default();

    let episodes_dir = root.join("episodes");
    let index = match load_index(root) {
        Ok(index) => index,
        Err(err) => {
            report.push_error(None, root.join("index.json").display().to_string(), err);
            return report;
        }
    };

    if let Err(err) = index.check() {
        report.push_error(None, root.join("index.json").display().to_string(), err);
    }

    let indexed: BTreeSet<&str> = index.episodes.iter().map(|e| e.id.as_str()).collect();

    // Episode directories on disk but not in the index: the signature of a
    // writer that crashed before the index rename.
    if episodes_dir.is_dir() {
        if let Ok(entries) = std::fs::read_dir(&episodes_dir) {
            let mut on_disk: Vec<String> = entries
                .flatten()
                .filter(|e| e.path().is_dir())
                .filter_map(|e| e.file_name().into_string().ok())
                .collect();
            on_disk.sort();
            for id in on_disk {
                if !indexed.contains(id.as_str()) {
                    report.push(
                        Some(&id),
                        episodes_dir.join(&id).display().to_string(),
                        None,
                        "episode directory is not listed in index.json".to_string(),
                    );
                }
            }
        }
    }

    for entry in &index.episodes {
        let dir = episode_dir(root, &entry.id);
        report.episodes_checked += 1;
        if !dir.is_dir() {
            report.push(
                Some(&entry.id),
                dir.display().to_string(),
                None,
                "indexed episode directory is missing".to_string(),
            );
            continue;
        }
        match read_episode(&dir) {
            Ok((episode, meta)) => {
                let agrees = meta.episode_id == entry.id
                    && meta.task.id == entry.task_id
                    && meta.n_frames == entry.n_frames
                    && meta.duration_s == entry.duration_s
                    && meta.trajectory_length_m == entry.trajectory_length_m;
                if !agrees {
                    report.push(
                        Some(&entry.id),
                        root.join("index.json").display().to_string(),
                        None,
                        "index entry disagrees with meta.json".to_string(),
                    );
                }
                if episode.len() != meta.n_frames as usize {
                    report.push(
                        Some(&entry.id),
                        dir.join("records.csv").display().to_string(),
                        None,
                        "record count disagrees with meta.json".to_string(),
                    );
                }
            }
            Err(err) => {
                report.push_error(
                    Some(&entry.id),
                    dir.display().to_string(),
                    err,
                );
            }
        }
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::store::write_episode;
    use crate::dataset::{AlignedEpisode, AlignedRecord, EpisodeMeta, TaskKind, TaskLabel};
    use crate::geom::{Quat, Vec3};
    use crate::sync::OffsetCalibration;
    use crate::types::{FrameSample, Timestamp};

    fn episode(n: u32) -> AlignedEpisode {
        let records: Vec<AlignedRecord> = (0..n)
            .map(|i| AlignedRecord {
                frame_index: i,
                t: Timestamp::from_nanos(i as i64 * 33_333_333).unwrap(),
                action: [0.1, 0.0, 0.0, 0.0],
                state_deg: [0.0, 0.0, 0.0],
                position_m: Vec3::new(0.0, 0.0, 0.001 * i as f64),
                orientation: Quat::IDENTITY,
                frame_ref: AlignedRecord::frame_ref_for(i),
            })
            .collect();
        let frames = (0..n)
            .map(|i| {
                FrameSample::new(
                    Timestamp::from_nanos(i as i64 * 33_333_333).unwrap(),
                    8,
                    8,
                    vec![i as u8; 64],
                )
                .unwrap()
            })
            .collect();
        AlignedEpisode {
            rate_hz: 30.0,
            records,
            frames,
        }
    }

    fn write_one(root: &Path, id: &str) {
        let ep = episode(6);
        let meta = EpisodeMeta::for_episode(
            id,
            TaskLabel::with_default_instruction(TaskKind::Recovery),
            &ep,
            OffsetCalibration::zero(),
        )
        .unwrap();
        write_episode(&ep, &meta, root).unwrap();
    }

    #[test]
    fn clean_dataset_reports_clean() {
        let root = tempfile::tempdir().unwrap();
        write_one(root.path(), "a");
        write_one(root.path(), "b");
        let report = validate_dataset(root.path());
        assert!(report.is_clean(), "{:?}", report.issues);
        assert_eq!(report.episodes_checked, 2);
    }

    #[test]
    fn empty_root_is_clean() {
        let root = tempfile::tempdir().unwrap();
        assert!(validate_dataset(root.path()).is_clean());
    }

    #[test]
    fn missing_frame_file_detected() {
        let root = tempfile::tempdir().unwrap();
        write_one(root.path(), "a");
        std::fs::remove_file(
            root.path()
                .join("episodes")
                .join("a")
                .join("frames")
                .join("3.pgm"),
        )
        .unwrap();
        let report = validate_dataset(root.path());
        assert!(!report.is_clean());
        assert!(report.issues[0].message.contains("missing"));
    }

    #[test]
    fn truncated_records_detected_with_line() {
        let root = tempfile::tempdir().unwrap();
        write_one(root.path(), "a");
        let csv = root
            .path()
            .join("episodes")
            .join("a")
            .join("records.csv");
        let text = std::fs::read_to_string(&csv).unwrap();
        let kept: Vec<&str> = text.lines().take(4).collect();
        std::fs::write(&csv, format!("{}\n", kept.join("\n"))).unwrap();
        let report = validate_dataset(root.path());
        assert!(!report.is_clean());
        assert_eq!(report.issues[0].line, Some(5));
    }

    #[test]
    fn tampered_index_count_detected() {
        let root = tempfile::tempdir().unwrap();
        write_one(root.path(), "a");
        let index_path = root.path().join("index.json");
        let text = std::fs::read_to_string(&index_path).unwrap();
        let tampered = text.replace("\"11\": 1", "\"11\": 2");
        assert_ne!(text, tampered);
        std::fs::write(&index_path, tampered).unwrap();
        let report = validate_dataset(root.path());
        assert!(!report.is_clean());
    }

    #[test]
    fn orphan_episode_directory_detected() {
        let root = tempfile::tempdir().unwrap();
        write_one(root.path(), "a");
        std::fs::create_dir_all(root.path().join("episodes").join("ghost")).unwrap();
        let report = validate_dataset(root.path());
        assert!(report
            .issues
            .iter()
            .any(|i| i.message.contains("not listed")));
    }
}
