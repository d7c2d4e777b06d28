//! Episode alignment: every channel resampled onto the frame timestamp
//! grid with its calibration offset, trimmed so each record is complete.

use crate::dataset::{AlignedEpisode, AlignedRecord};
use crate::error::{Error, Result};
use crate::sim::StreamBundle;
use crate::sync::characterize::OffsetCalibration;
use crate::sync::resample::{resample_channel, ChannelRef, ResampleMethod, ResampledSeries};
use crate::types::{Modality, Timestamp};

/// Joins the four channels on the frame grid. The reference grid is the
/// frame channel's own timestamps; other channels are read at
/// `grid_time - offset` with their modality's method. Leading and trailing
/// grid points with any missing modality are trimmed; an empty remainder is
/// an error.
pub fn align_episode(bundle: &StreamBundle, cal: &OffsetCalibration) -> Result<AlignedEpisode> {
    for (name, empty) in [
        ("action", bundle.action.is_empty()),
        ("state", bundle.state.is_empty()),
        ("pose", bundle.pose.is_empty()),
        ("frame", bundle.frame.is_empty()),
    ] {
        if empty {
            return Err(Error::InvalidArgument(format!("{name} channel is empty")));
        }
    }

    let grid: Vec<Timestamp> = bundle.frame.timestamps();
    let actions = match resample_channel(
        ChannelRef::Action(&bundle.action),
        &grid,
        cal.offset_ms(Modality::Action),
        ResampleMethod::Hold,
    )? {
        ResampledSeries::Action(v) => v,
        _ => unreachable!(),
    };
    let states = match resample_channel(
        ChannelRef::State(&bundle.state),
        &grid,
        cal.offset_ms(Modality::State),
        ResampleMethod::Linear,
    )? {
        ResampledSeries::State(v) => v,
        _ => unreachable!(),
    };
    let poses = match resample_channel(
        ChannelRef::Pose(&bundle.pose),
        &grid,
        cal.offset_ms(Modality::Pose),
        ResampleMethod::Slerp,
    )? {
        ResampledSeries::Pose(v) => v,
        _ => unreachable!(),
    };

    let complete =
        |i: usize| actions[i].is_some() && states[i].is_some() && poses[i].is_some();
    let first = (0..grid.len()).find(|&i| complete(i));
    let last = (0..grid.len()).rev().find(|&i| complete(i));
    let (first, last) = match (first, last) {
        (Some(f), Some(l)) if f <= l => (f, l),
        _ => return Err(Error::EmptyOverlap),
    };
    // Interior grid points are complete whenever the edges are: hold and
    // linear interpolation only fail outside the source span.
    for i in first..=last {
        if !complete(i) {
            return Err(Error::Inconsistent(format!(
                "interior grid point {i} is missing a modality"
            )));
        }
    }

    let mut records = Vec::with_capacity(last - first + 1);
    let mut frames = Vec::with_capacity(last - first + 1);
    for (out_idx, i) in (first..=last).enumerate() {
        let (position, orientation) = poses[i].unwrap();
        records.push(AlignedRecord {
            frame_index: out_idx as u32,
            t: grid[i],
            action: actions[i].unwrap(),
            state_deg: states[i].unwrap(),
            position_m: position,
            orientation,
            frame_ref: AlignedRecord::frame_ref_for(out_idx as u32),
        });
        frames.push(bundle.frame.samples[i].clone());
    }

    let episode = AlignedEpisode {
        rate_hz: bundle.frame.nominal_rate_hz,
        records,
        frames,
    };
    episode.check()?;
    Ok(episode)
}
