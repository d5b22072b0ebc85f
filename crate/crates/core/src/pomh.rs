//! Piecewise oscillatory velocity model.
//!
//! Between consecutive break instants `t0 < t1` the velocity of one axis is
//! a half-period sinusoid `a * sin(omega * t + phi)` with
//! `omega = pi / (t1 - t0)` and `phi = -pi * t0 / (t1 - t0)`, so it vanishes
//! at both ends. The amplitude is `(pi / 2)` times the mean sampled velocity
//! over the interval, which recovers `a` exactly for a sampled half-sine lobe.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphology::{axis_zero_runs, StructuringElement};
use crate::trace::{Axis, Trace, VelocitySeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PomhSegment {
    pub t_start: f64,
    pub t_end: f64,
    /// mm/s.
    pub a: f64,
    /// rad/s.
    pub omega: f64,
    /// rad.
    pub phi: f64,
}

impl PomhSegment {
    pub fn new(t_start: f64, t_end: f64, a: f64) -> Self {
        debug_assert!(t_end > t_start);
        let span = t_end - t_start;
        PomhSegment {
            t_start,
            t_end,
            a,
            omega: PI / span,
            phi: -PI * t_start / span,
        }
    }

    /// Model velocity; evaluated relative to `t_start` for accuracy.
    pub fn velocity_at(&self, t: f64) -> f64 {
        self.a * (self.omega * (t - self.t_start)).sin()
    }

    /// Displacement since `t_start`: the analytic integral of the velocity,
    /// `(a / omega) * (cos(phi + omega * t_start) - cos(omega * t + phi))`.
    pub fn displacement_at(&self, t: f64) -> f64 {
        (self.a / self.omega) * (1.0 - (self.omega * (t - self.t_start)).cos())
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }
}

/// Sorted, deduplicated break instants with the trace bounds always included.
pub fn normalize_breaks(breaks: &[f64], t_first: f64, t_last: f64) -> Vec<f64> {
    let mut all: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&b| b > t_first && b < t_last)
        .collect();
    all.push(t_first);
    all.push(t_last);
    all.sort_by(|a, b| a.total_cmp(b));
    all.dedup();
    all
}

/// Segments for one axis. `breaks` need not contain the trace bounds.
/// A segment whose interval holds no velocity midpoint gets amplitude 0.
pub fn estimate_segments(
    v: &VelocitySeries,
    axis: Axis,
    breaks: &[f64],
    t_first: f64,
    t_last: f64,
) -> Vec<PomhSegment> {
    let bounds = normalize_breaks(breaks, t_first, t_last);
    let comp = v.component(axis);
    let mids: Vec<f64> = v.points.iter().map(|p| p.t_mid).collect();
    // velocity points are time-ordered across strokes
    let mut segments = Vec::with_capacity(bounds.len().saturating_sub(1));
    let mut k = 0;
    for w in bounds.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        while k < mids.len() && mids[k] < t0 {
            k += 1;
        }
        let start = k;
        while k < mids.len() && mids[k] < t1 {
            k += 1;
        }
        let n = k - start;
        let a = if n == 0 {
            0.0
        } else {
            0.5 * PI * comp[start..k].iter().sum::<f64>() / n as f64
        };
        segments.push(PomhSegment::new(t0, t1, a));
    }
    segments
}

/// Reconstructed coordinate of one axis at every sample of the trace.
/// Each segment restarts from the recorded coordinate of the sample nearest
/// its start instant.
pub fn reconstruct_axis(trace: &Trace, axis: Axis, segments: &[PomhSegment]) -> Vec<f64> {
    let samples = trace.samples();
    let coord = |i: usize| match axis {
        Axis::X => samples[i].x,
        Axis::Y => samples[i].y,
    };
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let mut out = Vec::with_capacity(samples.len());
    let mut seg_idx = 0;
    let mut anchor_of = |seg: &PomhSegment| -> f64 {
        let pos = times.partition_point(|&t| t < seg.t_start);
        let nearest = if pos == 0 {
            0
        } else if pos >= times.len() {
            times.len() - 1
        } else if seg.t_start - times[pos - 1] <= times[pos] - seg.t_start {
            pos - 1
        } else {
            pos
        };
        coord(nearest)
    };
    let mut anchor = segments.first().map(&mut anchor_of).unwrap_or(0.0);
    for &t in &times {
        while seg_idx + 1 < segments.len() && t >= segments[seg_idx].t_end {
            seg_idx += 1;
            anchor = anchor_of(&segments[seg_idx]);
        }
        let value = match segments.get(seg_idx) {
            Some(seg) => anchor + seg.displacement_at(t),
            None => anchor,
        };
        out.push(value);
    }
    out
}

/// Reconstructed velocity of one axis at arbitrary times.
pub fn model_velocity(segments: &[PomhSegment], t: f64) -> f64 {
    match segments.iter().position(|s| s.contains(t)) {
        Some(i) => segments[i].velocity_at(t),
        None => segments
            .last()
            .filter(|s| t == s.t_end)
            .map(|s| s.velocity_at(t))
            .unwrap_or(0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DistanceKind {
    L1,
    L2,
    Linf,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 3] = [DistanceKind::L1, DistanceKind::L2, DistanceKind::Linf];

    /// Column label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            DistanceKind::L1 => "dist1",
            DistanceKind::L2 => "dist2",
            DistanceKind::Linf => "distinf",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DistanceKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "l1" | "dist1" => Ok(DistanceKind::L1),
            "l2" | "dist2" => Ok(DistanceKind::L2),
            "linf" | "distinf" => Ok(DistanceKind::Linf),
            other => Err(format!("unknown distance kind {other:?} (l1, l2, linf)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionDistance {
    pub kind: DistanceKind,
    /// Millimetres.
    pub value: f64,
    pub n_points: usize,
}

/// Mean per-point distance between two aligned position sequences.
pub fn distance(
    original: &[(f64, f64)],
    reconstructed: &[(f64, f64)],
    kind: DistanceKind,
) -> Result<ReconstructionDistance> {
    if original.len() != reconstructed.len() {
        return Err(Error::LengthMismatch {
            left: original.len(),
            right: reconstructed.len(),
        });
    }
    let n = original.len();
    let total: f64 = original
        .iter()
        .zip(reconstructed)
        .map(|(&(x, y), &(xh, yh))| {
            let (dx, dy) = ((x - xh).abs(), (y - yh).abs());
            match kind {
                DistanceKind::L1 => dx + dy,
                DistanceKind::L2 => dx.hypot(dy),
                DistanceKind::Linf => dx.max(dy),
            }
        })
        .sum();
    Ok(ReconstructionDistance {
        kind,
        value: if n == 0 { 0.0 } else { total / n as f64 },
        n_points: n,
    })
}

/// All three distances for one reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Distances {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

impl Distances {
    pub fn get(&self, kind: DistanceKind) -> f64 {
        match kind {
            DistanceKind::L1 => self.l1,
            DistanceKind::L2 => self.l2,
            DistanceKind::Linf => self.linf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedPoint {
    pub t: f64,
    pub x_hat: f64,
    pub y_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PomhFit {
    pub segments_x: Vec<PomhSegment>,
    pub segments_y: Vec<PomhSegment>,
    /// One point per trace sample.
    pub reconstructed: Vec<ReconstructedPoint>,
    pub n_zeros_x: usize,
    pub n_zeros_y: usize,
}

/// Stroke start and end times, treated as break points on both axes.
fn stroke_bounds(trace: &Trace) -> Vec<f64> {
    let s = trace.samples();
    trace
        .strokes()
        .into_iter()
        .flat_map(|r| [s[r.start].t, s[r.end - 1].t])
        .collect()
}

/// Zero-run break instants of one axis after closing at width `w`, plus
/// stroke boundaries, and the number of zero runs.
pub fn axis_breaks(trace: &Trace, v: &VelocitySeries, axis: Axis, w: usize) -> Result<(Vec<f64>, usize)> {
    let se = StructuringElement::new(w)?;
    let runs = axis_zero_runs(v, axis, se);
    let n = runs.count();
    let mut breaks = runs.break_instants;
    breaks.extend(stroke_bounds(trace));
    Ok((breaks, n))
}

impl PomhFit {
    /// Fit with explicit per-axis break instants (the trace bounds are added).
    pub fn from_breaks(trace: &Trace, v: &VelocitySeries, breaks_x: &[f64], breaks_y: &[f64]) -> Self {
        let (t0, t1) = (trace.t_first(), trace.t_last());
        let segments_x = estimate_segments(v, Axis::X, breaks_x, t0, t1);
        let segments_y = estimate_segments(v, Axis::Y, breaks_y, t0, t1);
        let xs = reconstruct_axis(trace, Axis::X, &segments_x);
        let ys = reconstruct_axis(trace, Axis::Y, &segments_y);
        let reconstructed = trace
            .samples()
            .iter()
            .zip(xs.into_iter().zip(ys))
            .map(|(s, (x_hat, y_hat))| ReconstructedPoint { t: s.t, x_hat, y_hat })
            .collect();
        PomhFit {
            n_zeros_x: breaks_x.len(),
            n_zeros_y: breaks_y.len(),
            segments_x,
            segments_y,
            reconstructed,
        }
    }

    /// Fit using break instants from closing the zero indicator at `(wx, wy)`.
    pub fn at_widths(trace: &Trace, v: &VelocitySeries, wx: usize, wy: usize) -> Result<Self> {
        let (bx, nx) = axis_breaks(trace, v, Axis::X, wx)?;
        let (by, ny) = axis_breaks(trace, v, Axis::Y, wy)?;
        let mut fit = Self::from_breaks(trace, v, &bx, &by);
        fit.n_zeros_x = nx;
        fit.n_zeros_y = ny;
        Ok(fit)
    }

    /// Distance over pen-down samples; airborne motion is not modelled.
    pub fn distance(&self, trace: &Trace, kind: DistanceKind) -> ReconstructionDistance {
        let (orig, recon) = self.pen_down_pairs(trace);
        distance(&orig, &recon, kind).expect("aligned by construction")
    }

    pub fn distances(&self, trace: &Trace) -> Distances {
        let (orig, recon) = self.pen_down_pairs(trace);
        let d = |k| distance(&orig, &recon, k).expect("aligned").value;
        Distances {
            l1: d(DistanceKind::L1),
            l2: d(DistanceKind::L2),
            linf: d(DistanceKind::Linf),
        }
    }

    fn pen_down_pairs(&self, trace: &Trace) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
        trace
            .samples()
            .iter()
            .zip(&self.reconstructed)
            .filter(|(s, _)| s.pen_down)
            .map(|(s, r)| ((s.x, s.y), (r.x_hat, r.y_hat)))
            .unzip()
    }

    /// `t,x,y,x_hat,y_hat` rows for plotting.
    pub fn to_csv(&self, trace: &Trace) -> String {
        let mut out = String::from("t,x,y,x_hat,y_hat\n");
        for (s, r) in trace.samples().iter().zip(&self.reconstructed) {
            out.push_str(&format!("{:.6},{},{},{},{}\n", s.t, s.x, s.y, r.x_hat, r.y_hat));
        }
        out
    }
}
