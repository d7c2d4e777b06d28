//! Episode writer and reader.
//!
//! A write lays down the episode directory first and only then updates
//! `index.json` through a temp-file rename, so a crashed writer leaves no
//! index entry and readers never observe a partially written episode. A
//! dataset root accepts one writer at a time, enforced by an advisory lock
//! file; concurrent readers are unrestricted.

use std::fs;
use std::path::{Path, PathBuf};

use crate::dataset::{
    pgm, validate_episode_id, AlignedEpisode, AlignedRecord, DatasetIndex, EpisodeMeta,
    IndexEntry,
};
use crate::error::{Error, Result};
use crate::geom::{Quat, Vec3};
use crate::types::Timestamp;

pub const RECORDS_HEADER: &str = "frame_index,t_ns,action_bend_x,action_bend_y,action_insertion,action_home,state_bend_x_deg,state_bend_y_deg,state_insertion_deg,pos_x_m,pos_y_m,pos_z_m,quat_w,quat_x,quat_y,quat_z,frame_ref";

pub(crate) fn index_path(root: &Path) -> PathBuf {
    root.join("index.json")
}

pub(crate) fn episode_dir(root: &Path, id: &str) -> PathBuf {
    root.join("episodes").join(id)
}

pub(crate) fn load_index(root: &Path) -> Result<DatasetIndex> {
    let path = index_path(root);
    if !path.exists() {
        return Ok(DatasetIndex::default());
    }
    let text = fs::read_to_string(&path)?;
    let index: DatasetIndex =
        serde_json::from_str(&text).map_err(|e| Error::format(&path, 1, e.to_string()))?;
    Ok(index)
}

fn store_index(root: &Path, index: &DatasetIndex) -> Result<()> {
    let tmp = root.join(".index.json.tmp");
    fs::write(&tmp, serde_json::to_string_pretty(index)?)?;
    fs::rename(&tmp, index_path(root))?;
    Ok(())
}

/// Advisory single-writer lock; removed on drop.
struct WriterLock {
    path: PathBuf,
}

impl WriterLock {
    fn acquire(root: &Path) -> Result<WriterLock> {
        let path = root.join(".writer.lock");
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(WriterLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Conflict(
                format!("another writer holds {}", path.display()),
            )),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for WriterLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn records_csv(episode: &AlignedEpisode) -> String {
    let mut out = String::with_capacity(episode.records.len() * 160);
    out.push_str(RECORDS_HEADER);
    out.push('\n');
    for r in &episode.records {
        // Shortest round-trip decimal via the default float Display.
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.frame_index,
            r.t.as_nanos(),
            r.action[0],
            r.action[1],
            r.action[2],
            r.action[3] as u8,
            r.state_deg[0],
            r.state_deg[1],
            r.state_deg[2],
            r.position_m.x,
            r.position_m.y,
            r.position_m.z,
            r.orientation.w,
            r.orientation.x,
            r.orientation.y,
            r.orientation.z,
            r.frame_ref,
        ));
    }
    out
}

/// Writes one episode under `root` and registers it in the index.
/// Returns the episode directory.
pub fn write_episode(
    episode: &AlignedEpisode,
    meta: &EpisodeMeta,
    root: &Path,
) -> Result<PathBuf> {
    episode.check()?;
    meta.check()?;
    if meta.n_frames as usize != episode.len() {
        return Err(Error::InvalidArgument(format!(
            "meta says {} frames, episode has {}",
            meta.n_frames,
            episode.len()
        )));
    }
    fs::create_dir_all(root)?;
    let _lock = WriterLock::acquire(root)?;

    let mut index = load_index(root)?;
    if index.episodes.iter().any(|e| e.id == meta.episode_id) {
        return Err(Error::Conflict(format!(
            "episode {:?} already exists",
            meta.episode_id
        )));
    }
    let dir = episode_dir(root, &meta.episode_id);
    if dir.exists() {
        return Err(Error::Conflict(format!(
            "episode directory {} already exists",
            dir.display()
        )));
    }

    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir)?;
    for (i, frame) in episode.frames.iter().enumerate() {
        pgm::write_pgm(&frames_dir.join(format!("{i}.pgm")), frame)?;
    }
    fs::write(dir.join("records.csv"), records_csv(episode))?;
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(meta)?)?;

    index.episodes.push(IndexEntry {
        id: meta.episode_id.clone(),
        task_id: meta.task.id,
        n_frames: meta.n_frames,
        duration_s: meta.duration_s,
        trajectory_length_m: meta.trajectory_length_m,
    });
    index.recount_tasks();
    store_index(root, &index)?;
    Ok(dir)
}

fn parse_field<T: std::str::FromStr>(
    field: &str,
    name: &str,
    path: &Path,
    line: usize,
) -> Result<T> {
    field
        .parse::<T>()
        .map_err(|_| Error::format(path, line, format!("bad {name} value {field:?}")))
}

/// Reads one episode directory back, validating every invariant. Frame
/// pixels are loaded from the referenced PGM files.
pub fn read_episode(dir: &Path) -> Result<(AlignedEpisode, EpisodeMeta)> {
    let meta_path = dir.join("meta.json");
    let meta: EpisodeMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)
        .map_err(|e| Error::format(&meta_path, 1, e.to_string()))?;
    meta.check()?;

    let csv_path = dir.join("records.csv");
    let text = fs::read_to_string(&csv_path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RECORDS_HEADER => {}
        Some((_, header)) => {
            return Err(Error::format(
                &csv_path,
                1,
                format!("unexpected header {header:?}"),
            ))
        }
        None => return Err(Error::format(&csv_path, 1, "empty records.csv")),
    }

    let mut records = Vec::with_capacity(meta.n_frames as usize);
    let mut frames = Vec::with_capacity(meta.n_frames as usize);
    let mut prev_t: Option<Timestamp> = None;

    for (zero_based, raw) in lines {
        let line = zero_based + 1; // 1-based line number
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 17 {
            return Err(Error::format(
                &csv_path,
                line,
                format!("expected 17 fields, found {}", fields.len()),
            ));
        }
        let frame_index: u32 = parse_field(fields[0], "frame_index", &csv_path, line)?;
        if frame_index as usize != records.len() {
            return Err(Error::format(
                &csv_path,
                line,
                format!(
                    "frame_index {frame_index} is not consecutive (expected {})",
                    records.len()
                ),
            ));
        }
        let t_ns: i64 = parse_field(fields[1], "t_ns", &csv_path, line)?;
        let t = Timestamp::from_nanos(t_ns)
            .map_err(|e| Error::format(&csv_path, line, e.to_string()))?;
        if let Some(p) = prev_t {
            if t <= p {
                return Err(Error::format(
                    &csv_path,
                    line,
                    "timestamp is not strictly increasing",
                ));
            }
        }
        prev_t = Some(t);

        let mut f = [0.0f64; 14];
        for (k, slot) in f.iter_mut().enumerate() {
            *slot = parse_field(fields[2 + k], "numeric", &csv_path, line)?;
        }
        let home = f[3];
        if home != 0.0 && home != 1.0 {
            return Err(Error::format(
                &csv_path,
                line,
                format!("action_home must be 0 or 1, got {home}"),
            ));
        }
        let orientation = Quat::new(f[10], f[11], f[12], f[13]);
        if (orientation.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::format(
                &csv_path,
                line,
                format!("quaternion norm {} beyond 1e-6 of unit", orientation.norm()),
            ));
        }
        let frame_ref = fields[16].to_string();
        if frame_ref != AlignedRecord::frame_ref_for(frame_index) {
            return Err(Error::format(
                &csv_path,
                line,
                format!("frame_ref {frame_ref:?} does not match frame_index"),
            ));
        }
        let frame_path = dir.join(&frame_ref);
        if !frame_path.exists() {
            return Err(Error::format(
                &csv_path,
                line,
                format!("referenced frame {frame_ref:?} is missing"),
            ));
        }
        frames.push(pgm::read_pgm(&frame_path, t)?);
        records.push(AlignedRecord {
            frame_index,
            t,
            action: [f[0], f[1], f[2], home],
            state_deg: [f[4], f[5], f[6]],
            position_m: Vec3::new(f[7], f[8], f[9]),
            orientation,
            frame_ref,
        });
    }

    if records.len() != meta.n_frames as usize {
        // The first missing line is right after the last one present.
        let line = records.len() + 2;
        return Err(Error::format(
            &csv_path,
            line,
            format!(
                "records.csv is truncated: {} records for {} frames in meta",
                records.len(),
                meta.n_frames
            ),
        ));
    }

    let episode = AlignedEpisode {
        rate_hz: meta.rate_hz,
        records,
        frames,
    };
    episode.check()?;
    Ok((episode, meta))
}

/// Resolves an episode id under a root, for callers holding ids rather
/// than paths.
pub fn episode_path(root: &Path, id: &str) -> Result<PathBuf> {
    validate_episode_id(id)?;
    Ok(episode_dir(root, id))
}
