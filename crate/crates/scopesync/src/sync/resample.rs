//! Offset-aware resampling of channels onto a reference timestamp grid.
//!
//! Each grid time `t` is evaluated at source time `t - offset`. Grid points
//! outside the source span are marked missing, never extrapolated. Methods
//! are tied to modalities: zero-order hold for discrete operator actions,
//! linear interpolation for state, linear + slerp for pose, nearest for
//! frame references.

use crate::error::{Error, Result};
use crate::geom::{quat_slerp, Quat, Vec3};
use crate::types::{
    ActionSample, Channel, FrameSample, Modality, PoseSample, Sample, StateSample, Timestamp,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMethod {
    Linear,
    Slerp,
    Hold,
    Nearest,
}

/// Borrowed view of any typed channel, so one resampling entry point can
/// serve all four modalities.
#[derive(Debug, Clone, Copy)]
pub enum ChannelRef<'a> {
    Action(&'a Channel<ActionSample>),
    State(&'a Channel<StateSample>),
    Pose(&'a Channel<PoseSample>),
    Frame(&'a Channel<FrameSample>),
}

impl ChannelRef<'_> {
    pub fn modality(&self) -> Modality {
        match self {
            ChannelRef::Action(_) => Modality::Action,
            ChannelRef::State(_) => Modality::State,
            ChannelRef::Pose(_) => Modality::Pose,
            ChannelRef::Frame(_) => Modality::Frame,
        }
    }
}

/// Resampled values per grid point; `None` marks grid points outside the
/// source span.
#[derive(Debug, Clone, PartialEq)]
pub enum ResampledSeries {
    Action(Vec<Option<[f64; 4]>>),
    State(Vec<Option<[f64; 3]>>),
    Pose(Vec<Option<(Vec3, Quat)>>),
    /// Indices into the source frame channel.
    FrameIndex(Vec<Option<usize>>),
}

fn compatible(modality: Modality, method: ResampleMethod) -> bool {
    matches!(
        (modality, method),
        (Modality::Action, ResampleMethod::Hold)
            | (Modality::State, ResampleMethod::Linear)
            | (Modality::Pose, ResampleMethod::Slerp)
            | (Modality::Frame, ResampleMethod::Nearest)
    )
}

/// Index of the last sample at or before `t`, if any.
fn floor_index<T: Sample>(samples: &[T], t_ns: i64) -> Option<usize> {
    let n_before = samples.partition_point(|s| s.timestamp().as_nanos() <= t_ns);
    n_before.checked_sub(1)
}

fn grid_source_times(grid: &[Timestamp], offset_ms: f64) -> Result<Vec<i64>> {
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidArgument(
                "reference grid must be strictly increasing".into(),
            ));
        }
    }
    Ok(grid.iter().map(|t| t.offset_by_ms(offset_ms)).collect())
}

/// Resamples `channel` onto `grid`, reading the source at `t - offset_ms`
/// for each grid time `t`. Rejects method/modality mismatches.
pub fn resample_channel(
    channel: ChannelRef<'_>,
    grid: &[Timestamp],
    offset_ms: f64,
    method: ResampleMethod,
) -> Result<ResampledSeries> {
    if !compatible(channel.modality(), method) {
        return Err(Error::InvalidArgument(format!(
            "method {method:?} is incompatible with a {} channel",
            channel.modality()
        )));
    }
    let times = grid_source_times(grid, offset_ms)?;
    Ok(match channel {
        ChannelRef::Action(c) => ResampledSeries::Action(resample_hold(&c.samples, &times)),
        ChannelRef::State(c) => ResampledSeries::State(resample_state(&c.samples, &times)),
        ChannelRef::Pose(c) => ResampledSeries::Pose(resample_pose(&c.samples, &times)?),
        ChannelRef::Frame(c) => ResampledSeries::FrameIndex(resample_nearest(&c.samples, &times)),
    })
}

fn span_ns<T: Sample>(samples: &[T]) -> Option<(i64, i64)> {
    let first = samples.first()?.timestamp().as_nanos();
    let last = samples.last()?.timestamp().as_nanos();
    Some((first, last))
}

fn resample_hold(samples: &[ActionSample], times: &[i64]) -> Vec<Option<[f64; 4]>> {
    let Some((first, last)) = span_ns(samples) else {
        return vec![None; times.len()];
    };
    times
        .iter()
        .map(|&t| {
            if t < first || t > last {
                return None;
            }
            floor_index(samples, t).map(|i| samples[i].as_vec4())
        })
        .collect()
}

fn lerp_u(t: i64, t0: i64, t1: i64) -> f64 {
    (t - t0) as f64 / (t1 - t0) as f64
}

fn resample_state(samples: &[StateSample], times: &[i64]) -> Vec<Option<[f64; 3]>> {
    let Some((first, last)) = span_ns(samples) else {
        return vec![None; times.len()];
    };
    times
        .iter()
        .map(|&t| {
            if t < first || t > last {
                return None;
            }
            let i = floor_index(samples, t)?;
            let a = &samples[i];
            if a.t.as_nanos() == t || i + 1 >= samples.len() {
                return Some(a.axes());
            }
            let b = &samples[i + 1];
            let u = lerp_u(t, a.t.as_nanos(), b.t.as_nanos());
            let av = a.axes();
            let bv = b.axes();
            Some([
                av[0] + (bv[0] - av[0]) * u,
                av[1] + (bv[1] - av[1]) * u,
                av[2] + (bv[2] - av[2]) * u,
            ])
        })
        .collect()
}

fn resample_pose(samples: &[PoseSample], times: &[i64]) -> Result<Vec<Option<(Vec3, Quat)>>> {
    let Some((first, last)) = span_ns(samples) else {
        return Ok(vec![None; times.len()]);
    };
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t < first || t > last {
            out.push(None);
            continue;
        }
        let i = match floor_index(samples, t) {
            Some(i) => i,
            None => {
                out.push(None);
                continue;
            }
        };
        let a = &samples[i];
        if a.t.as_nanos() == t || i + 1 >= samples.len() {
            out.push(Some((a.position, a.orientation)));
            continue;
        }
        let b = &samples[i + 1];
        let u = lerp_u(t, a.t.as_nanos(), b.t.as_nanos());
        let position = a.position.add(b.position.sub(a.position).scale(u));
        let orientation = quat_slerp(a.orientation, b.orientation, u)?;
        out.push(Some((position, orientation)));
    }
    Ok(out)
}

fn resample_nearest(samples: &[FrameSample], times: &[i64]) -> Vec<Option<usize>> {
    let Some((first, last)) = span_ns(samples) else {
        return vec![None; times.len()];
    };
    times
        .iter()
        .map(|&t| {
            if t < first || t > last {
                return None;
            }
            let i = floor_index(samples, t)?;
            if i + 1 >= samples.len() {
                return Some(i);
            }
            let d_prev = t - samples[i].t.as_nanos();
            let d_next = samples[i + 1].t.as_nanos() - t;
            // Ties round down to the earlier frame.
            Some(if d_next < d_prev { i + 1 } else { i })
        })
        .collect()
}
