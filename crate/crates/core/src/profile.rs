//! Speed profiles: parsing, unit conversion and piecewise-linear sampling.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MPH_TO_MPS: f64 = 0.44704;
pub const KMH_TO_MPS: f64 = 1.0 / 3.6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("empty speed profile")]
    Empty,
    #[error("malformed record at row {row}: {msg}")]
    Malformed { row: usize, msg: String },
    #[error("non-monotonic time at row {row}")]
    NonMonotonic { row: usize },
    #[error("negative speed at row {row}")]
    NegativeSpeed { row: usize },
    #[error("profile must start at t = 0 (row {row} has t = {t})")]
    NonZeroStart { row: usize, t: f64 },
    #[error("time {t} s outside profile range [0, {end}] s")]
    OutOfRange { t: f64, end: f64 },
    #[error("unknown speed unit '{0}'")]
    UnknownUnit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SpeedUnit {
    #[default]
    #[serde(rename = "m/s")]
    MetersPerSecond,
    #[serde(rename = "km/h")]
    KilometersPerHour,
    #[serde(rename = "mph")]
    MilesPerHour,
}

impl SpeedUnit {
    pub fn to_mps(self) -> f64 {
        match self {
            SpeedUnit::MetersPerSecond => 1.0,
            SpeedUnit::KilometersPerHour => KMH_TO_MPS,
            SpeedUnit::MilesPerHour => MPH_TO_MPS,
        }
    }
}

impl FromStr for SpeedUnit {
    type Err = ProfileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m/s" | "mps" => Ok(SpeedUnit::MetersPerSecond),
            "km/h" | "kmh" | "kph" => Ok(SpeedUnit::KilometersPerHour),
            "mph" => Ok(SpeedUnit::MilesPerHour),
            other => Err(ProfileError::UnknownUnit(other.to_string())),
        }
    }
}

/// Piecewise-linear speed trace, always stored in m/s.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    samples: Vec<(f64, f64)>,
    source_unit: SpeedUnit,
}

impl SpeedProfile {
    /// Builds a profile from SI samples, checking the same invariants as the parser.
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, ProfileError> {
        Self::from_samples(samples, SpeedUnit::MetersPerSecond)
    }

    /// Builds a profile from samples whose speeds are expressed in `unit`.
    pub fn from_unit(samples: &[(f64, f64)], unit: SpeedUnit) -> Result<Self, ProfileError> {
        let k = unit.to_mps();
        Self::from_samples(samples.iter().map(|&(t, v)| (t, v * k)).collect(), unit)
    }

    fn from_samples(samples: Vec<(f64, f64)>, source_unit: SpeedUnit) -> Result<Self, ProfileError> {
        if samples.is_empty() {
            return Err(ProfileError::Empty);
        }
        if samples[0].0 != 0.0 {
            return Err(ProfileError::NonZeroStart { row: 1, t: samples[0].0 });
        }
        for (i, &(t, v)) in samples.iter().enumerate() {
            if !(v >= 0.0) {
                return Err(ProfileError::NegativeSpeed { row: i + 1 });
            }
            if i > 0 && !(t > samples[i - 1].0) {
                return Err(ProfileError::NonMonotonic { row: i + 1 });
            }
        }
        Ok(Self { samples, source_unit })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn source_unit(&self) -> SpeedUnit {
        self.source_unit
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().map(|s| s.0).unwrap_or(0.0)
    }

    /// Sample times, i.e. the breakpoints of the piecewise-linear function.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    fn check_range(&self, t: f64) -> Result<(), ProfileError> {
        let end = self.end_time();
        if !(0.0..=end).contains(&t) {
            return Err(ProfileError::OutOfRange { t, end });
        }
        Ok(())
    }

    /// Index of the segment `[i, i+1]` that owns `t`, preferring the segment to the
    /// right at breakpoints (left at the final point).
    fn segment_right(&self, t: f64) -> Option<usize> {
        let n = self.samples.len();
        if n < 2 {
            return None;
        }
        let idx = self.samples.partition_point(|s| s.0 <= t);
        Some(idx.saturating_sub(1).min(n - 2))
    }

    /// Same as [`Self::segment_right`] but prefers the segment to the left at breakpoints.
    fn segment_left(&self, t: f64) -> Option<usize> {
        let n = self.samples.len();
        if n < 2 {
            return None;
        }
        let idx = self.samples.partition_point(|s| s.0 < t);
        Some(idx.saturating_sub(1).min(n - 2))
    }

    fn segment_slope(&self, i: usize) -> f64 {
        let (t0, v0) = self.samples[i];
        let (t1, v1) = self.samples[i + 1];
        (v1 - v0) / (t1 - t0)
    }

    /// Slope of the active segment; at a breakpoint the right-hand segment wins unless
    /// `left_limit` is set.
    pub fn slope_at(&self, t: f64, left_limit: bool) -> Result<f64, ProfileError> {
        self.check_range(t)?;
        let seg = if left_limit { self.segment_left(t) } else { self.segment_right(t) };
        Ok(seg.map(|i| self.segment_slope(i)).unwrap_or(0.0))
    }

    /// Slopes of every segment, paired with its time span.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.samples.windows(2).map(|w| (w[0].0, w[1].0, (w[1].1 - w[0].1) / (w[1].0 - w[0].0)))
    }

    /// Exact integral of speed from 0 to `t` (distance travelled).
    pub fn distance_to(&self, t: f64) -> Result<f64, ProfileError> {
        self.check_range(t)?;
        let mut d = 0.0;
        for w in self.samples.windows(2) {
            let (t0, v0) = w[0];
            let (t1, v1) = w[1];
            if t <= t0 {
                break;
            }
            let te = t.min(t1);
            let ve = v0 + (v1 - v0) * (te - t0) / (t1 - t0);
            d += 0.5 * (v0 + ve) * (te - t0);
        }
        Ok(d)
    }

    pub fn scaled(&self, k: f64) -> Result<Self, ProfileError> {
        Self::from_samples(self.samples.iter().map(|&(t, v)| (t, v * k)).collect(), self.source_unit)
    }
}

/// Linear interpolation, exact at sample points.
pub fn sample_speed(profile: &SpeedProfile, t: f64) -> Result<f64, ProfileError> {
    profile.check_range(t)?;
    let s = &profile.samples;
    match profile.segment_right(t) {
        None => Ok(s[0].1),
        Some(i) => {
            let (t0, v0) = s[i];
            let (t1, v1) = s[i + 1];
            if t == t1 {
                return Ok(v1);
            }
            Ok(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
        }
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c == ';' || c == '\t' || c.is_whitespace()).filter(|f| !f.is_empty()).collect()
}

/// Parses two-column `time, speed` records. Rows are 1-based over non-comment,
/// non-blank lines; a non-numeric first row is taken as a header.
pub fn parse_speed_profile(text: &str, unit: SpeedUnit) -> Result<SpeedProfile, ProfileError> {
    let scale = unit.to_mps();
    let mut samples = Vec::new();
    let mut row = 0usize;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        row += 1;
        let fields = split_fields(line);
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
        let values = match parsed {
            Some(v) => v,
            None if row == 1 => continue,
            None => return Err(ProfileError::Malformed { row, msg: format!("non-numeric field in '{line}'") }),
        };
        if values.len() != 2 {
            return Err(ProfileError::Malformed { row, msg: format!("expected 2 columns, found {}", values.len()) });
        }
        let (t, v) = (values[0], values[1]);
        if !t.is_finite() || !v.is_finite() {
            return Err(ProfileError::Malformed { row, msg: "non-finite value".into() });
        }
        if v < 0.0 {
            return Err(ProfileError::NegativeSpeed { row });
        }
        if let Some(&(tp, _)) = samples.last() {
            if t <= tp {
                return Err(ProfileError::NonMonotonic { row });
            }
        } else if t != 0.0 {
            return Err(ProfileError::NonZeroStart { row, t });
        }
        samples.push((t, v * scale));
    }
    SpeedProfile::from_samples(samples, unit)
}

/// Writes the profile back out in m/s with a header row.
pub fn emit_profile(profile: &SpeedProfile) -> String {
    let mut out = String::from("time_s,speed_mps\n");
    for &(t, v) in &profile.samples {
        let _ = writeln!(out, "{t},{v}");
    }
    out
}
