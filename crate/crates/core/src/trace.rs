//! Sampled handwriting traces and derived kinematics.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Nominal tablet sampling rate.
pub const NOMINAL_RATE_HZ: f64 = 200.0;
/// Default spatial resolution of the tablet grid.
pub const DEFAULT_RESOLUTION_MM: f64 = 0.25;
pub const MIN_SAMPLES: usize = 4;

const SYMBOL_CHARS: &[u8; 36] = b"abcdefghijklmnopqrstuvwxyz0123456789";

/// One of the 36 dictated symbols: the letters `a`-`z` then the digits `0`-`9`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolId(u8);

impl SymbolId {
    pub const COUNT: usize = 36;

    pub fn from_index(index: usize) -> Option<Self> {
        (index < Self::COUNT).then_some(SymbolId(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn as_char(self) -> char {
        SYMBOL_CHARS[self.index()] as char
    }

    pub fn all() -> impl Iterator<Item = SymbolId> {
        (0..Self::COUNT as u8).map(SymbolId)
    }
}

impl fmt::Display for SymbolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for SymbolId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => SYMBOL_CHARS
                .iter()
                .position(|&b| b as char == c)
                .map(|i| SymbolId(i as u8))
                .ok_or_else(|| Error::UnknownSymbol(s.to_string())),
            _ => Err(Error::UnknownSymbol(s.to_string())),
        }
    }
}

impl Serialize for SymbolId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SymbolId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Seconds.
    pub t: f64,
    /// Millimetres.
    pub x: f64,
    pub y: f64,
    pub pen_down: bool,
}

impl Sample {
    pub fn new(t: f64, x: f64, y: f64, pen_down: bool) -> Self {
        Sample { t, x, y, pen_down }
    }
}

/// Round a coordinate to the nearest multiple of the grid resolution.
pub fn snap_to_grid(value: f64, resolution_mm: f64) -> f64 {
    (value / resolution_mm).round() * resolution_mm
}

/// Timestamped pen samples of one symbol written by one writer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    symbol: SymbolId,
    samples: Vec<Sample>,
    resolution_mm: f64,
}

impl Trace {
    /// Validates sample count, finiteness and strictly increasing time.
    /// Coordinates are taken as given; use [`Trace::snapped`] to quantize.
    pub fn new(symbol: SymbolId, samples: Vec<Sample>, resolution_mm: f64) -> Result<Self> {
        if !(resolution_mm.is_finite() && resolution_mm > 0.0) {
            return Err(Error::InvalidTrace(format!(
                "resolution must be positive, got {resolution_mm}"
            )));
        }
        if samples.len() < MIN_SAMPLES {
            return Err(Error::InvalidTrace(format!(
                "need at least {MIN_SAMPLES} samples, got {}",
                samples.len()
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if !(s.t.is_finite() && s.x.is_finite() && s.y.is_finite()) {
                return Err(Error::InvalidTrace(format!("non-finite value at sample {i}")));
            }
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(Error::InvalidTrace(format!(
                    "timestamps not strictly increasing at sample {i}"
                )));
            }
        }
        let trace = Trace {
            symbol,
            samples,
            resolution_mm,
        };
        if let Some(period) = trace.median_period() {
            let nominal = 1.0 / NOMINAL_RATE_HZ;
            if (period - nominal).abs() > 0.2 * nominal {
                log::warn!(
                    "trace for symbol {symbol}: median sampling period {:.4} s is outside 20% of nominal",
                    period
                );
            }
        }
        Ok(trace)
    }

    /// Same trace with every coordinate snapped to the resolution grid.
    pub fn snapped(mut self) -> Self {
        let r = self.resolution_mm;
        for s in &mut self.samples {
            s.x = snap_to_grid(s.x, r);
            s.y = snap_to_grid(s.y, r);
        }
        self
    }

    pub fn symbol(&self) -> SymbolId {
        self.symbol
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn resolution_mm(&self) -> f64 {
        self.resolution_mm
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn t_first(&self) -> f64 {
        self.samples[0].t
    }

    pub fn t_last(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    fn median_period(&self) -> Option<f64> {
        let dts: Vec<f64> = self.samples.windows(2).map(|w| w[1].t - w[0].t).collect();
        crate::stats::median(&dts)
    }

    /// Index ranges (into the samples) of maximal pen-down runs with at
    /// least two samples.
    pub fn strokes(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, s) in self.samples.iter().enumerate() {
            match (s.pen_down, start) {
                (true, None) => start = Some(i),
                (false, Some(b)) => {
                    if i - b >= 2 {
                        out.push(b..i);
                    }
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(b) = start {
            if self.samples.len() - b >= 2 {
                out.push(b..self.samples.len());
            }
        }
        out
    }

    /// Serialize to the canonical trace CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.samples.len() + 48);
        out.push_str(&format!("# resolution_mm={}\n", self.resolution_mm));
        out.push_str("t,x,y,pen\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{:.6},{},{},{}\n",
                s.t,
                s.x,
                s.y,
                u8::from(s.pen_down)
            ));
        }
        out
    }
}

/// Parse the trace CSV: optional `# resolution_mm=R` comment lines, a
/// `t,x,y,pen` header, then one row per sample. Coordinates are snapped
/// to the declared resolution.
pub fn parse_trace(symbol: SymbolId, content: &[u8]) -> Result<Trace> {
    let text = std::str::from_utf8(content).map_err(|e| Error::Parse {
        line: 0,
        message: format!("not UTF-8: {e}"),
    })?;
    let mut resolution = DEFAULT_RESOLUTION_MM;
    let mut samples: Vec<Sample> = Vec::new();
    let mut seen_header = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.trim().split_once('=') {
                if key.trim() == "resolution_mm" {
                    resolution = value.trim().parse().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("bad resolution {:?}", value.trim()),
                    })?;
                    if !(resolution > 0.0 && f64::is_finite(resolution)) {
                        return Err(Error::Parse {
                            line: line_no,
                            message: "resolution must be positive".into(),
                        });
                    }
                }
            }
            continue;
        }
        if !seen_header {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["t", "x", "y", "pen"] {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected header t,x,y,pen, got {line:?}"),
                });
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let num = |s: &str, name: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad {name} value {s:?}"),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite {name}"),
                })
            }
        };
        let t = num(fields[0], "t")?;
        let x = num(fields[1], "x")?;
        let y = num(fields[2], "y")?;
        let pen_down = match fields[3] {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("pen must be 0 or 1, got {other:?}"),
                })
            }
        };
        if let Some(prev) = samples.last() {
            if t <= prev.t {
                return Err(Error::NonMonotoneTime { line: line_no });
            }
        }
        samples.push(Sample::new(t, x, y, pen_down));
    }
    if !seen_header {
        return Err(Error::Parse {
            line: 0,
            message: "missing header".into(),
        });
    }
    Ok(Trace::new(symbol, samples, resolution)?.snapped())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityPoint {
    /// Timestamp of the left sample of the interval.
    pub t_start: f64,
    /// Interval midpoint.
    pub t_mid: f64,
    /// mm/s.
    pub vx: f64,
    pub vy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::X, Axis::Y];

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            _ => Err(Error::Reference(format!("unknown axis {s:?}"))),
        }
    }
}

/// Finite-difference velocities over consecutive pen-down samples.
///
/// `strokes` partitions `points`: one range per pen-down stroke, so no
/// velocity ever spans a pen-up gap.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VelocitySeries {
    pub points: Vec<VelocityPoint>,
    pub strokes: Vec<Range<usize>>,
}

impl VelocitySeries {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn component(&self, axis: Axis) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| match axis {
                Axis::X => p.vx,
                Axis::Y => p.vy,
            })
            .collect()
    }

    pub fn start_times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t_start).collect()
    }
}

/// Velocities between consecutive samples of one stroke.
pub fn velocity_between(samples: &[Sample]) -> Result<Vec<VelocityPoint>> {
    samples
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let dt = w[1].t - w[0].t;
            if dt <= 0.0 {
                return Err(Error::DuplicateTimestamp {
                    index: i + 1,
                    t: w[1].t,
                });
            }
            Ok(VelocityPoint {
                t_start: w[0].t,
                t_mid: 0.5 * (w[0].t + w[1].t),
                vx: (w[1].x - w[0].x) / dt,
                vy: (w[1].y - w[0].y) / dt,
            })
        })
        .collect()
}

pub fn compute_velocity(trace: &Trace) -> Result<VelocitySeries> {
    let mut series = VelocitySeries::default();
    for stroke in trace.strokes() {
        let v = velocity_between(&trace.samples[stroke])?;
        let start = series.points.len();
        series.points.extend(v);
        series.strokes.push(start..series.points.len());
    }
    Ok(series)
}

/// Writing time with pen-up intervals excluded.
pub fn total_pen_down_time(trace: &Trace) -> f64 {
    trace
        .samples
        .windows(2)
        .filter(|w| w[0].pen_down && w[1].pen_down)
        .map(|w| w[1].t - w[0].t)
        .sum()
}
