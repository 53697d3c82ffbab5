//! Wind-speed series ingestion and reshaping.
//!
//! Everything downstream of the CSV reader works on [`TimeSeries`]: a uniform
//! grid of non-negative speeds in m/s. The helpers here split, scale,
//! difference and window that grid into the shapes each model family needs.

use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sampling interval of the reference buoy record (three hours).
pub const THREE_HOURS: i64 = 10_800;

/// Longest run of missing samples repaired by interpolation.
pub const MAX_GAP_STEPS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("bad header: expected `timestamp,wind_speed_mps`, found `{0}`")]
    BadHeader(String),
    #[error("malformed row {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("timestamps not strictly increasing at row {line}")]
    NotIncreasing { line: usize },
    #[error("non-uniform spacing at row {line}: {delta} s is not a multiple of the {step} s step")]
    NonUniformSpacing { line: usize, delta: i64, step: i64 },
    #[error("negative wind speed {value} at row {line}")]
    NegativeSpeed { line: usize, value: f64 },
    #[error("gap of {steps} consecutive missing steps starting at index {start} (at most {MAX_GAP_STEPS} are repaired)")]
    GapTooLong { start: usize, steps: usize },
    #[error("missing value at the series boundary (index {index}) cannot be interpolated")]
    EdgeGap { index: usize },
    #[error("series is empty")]
    Empty,
    #[error("step must be positive, got {0}")]
    InvalidStep(i64),
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("split of {n} points at fraction {fraction} leaves an empty partition")]
    EmptyPartition { n: usize, fraction: f64 },
    #[error("series is constant; scaling is undefined")]
    ConstantSeries,
    #[error("scaling target range [{lo}, {hi}] is empty")]
    InvalidTargetRange { lo: f64, hi: f64 },
    #[error("series of length {len} is too short: need at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("expected {expected} seed values, got {got}")]
    SeedCount { expected: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

/// A uniformly sampled wind-speed record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    /// UTC seconds since the Unix epoch of the first sample.
    pub start_time: i64,
    pub step_seconds: i64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    /// Builds a cleaned series, checking the step, length and that every value
    /// is a finite non-negative speed.
    pub fn new(start_time: i64, step_seconds: i64, values: Vec<f64>) -> Result<Self, SeriesError> {
        if step_seconds <= 0 {
            return Err(SeriesError::InvalidStep(step_seconds));
        }
        if values.is_empty() {
            return Err(SeriesError::Empty);
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(SeriesError::NonFinite(i));
            }
            if v < 0.0 {
                return Err(SeriesError::NegativeSpeed { line: i + 2, value: v });
            }
        }
        Ok(Self {
            start_time,
            step_seconds,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Timestamp (UTC seconds) of sample `index`; indices past the end
    /// extrapolate along the grid.
    pub fn timestamp_at(&self, index: usize) -> i64 {
        self.start_time + self.step_seconds * index as i64
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied()
    }

    fn with_values(&self, offset: usize, values: Vec<f64>) -> Self {
        Self {
            start_time: self.timestamp_at(offset),
            step_seconds: self.step_seconds,
            values,
        }
    }
}

/// Formats UTC seconds as `YYYY-MM-DDTHH:MM:SSZ`.
pub fn format_timestamp(secs: i64) -> String {
    match Utc.timestamp_opt(secs, 0).single() {
        Some(t) => t.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        None => secs.to_string(),
    }
}

/// Parses an ISO 8601 UTC timestamp. Offsets are honoured; a timestamp
/// without zone designator is read as UTC.
pub fn parse_timestamp(text: &str) -> Option<i64> {
    let text = text.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(text) {
        return Some(t.with_timezone(&Utc).timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(text, fmt) {
            return Some(t.and_utc().timestamp());
        }
    }
    None
}

/// Reads a `timestamp,wind_speed_mps` CSV file and repairs short gaps.
pub fn load_series(path: impl AsRef<Path>) -> Result<TimeSeries, SeriesError> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| SeriesError::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_series(file)
}

/// Same as [`load_series`] over any reader.
///
/// A missing sample is either an empty / `NaN` / `NA` speed field or a
/// timestamp jump spanning several steps. The step is the smallest spacing
/// between consecutive rows.
pub fn read_series<R: Read>(reader: R) -> Result<TimeSeries, SeriesError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| SeriesError::Io(e.to_string()))?
        .clone();
    if header.len() != 2 || &header[0] != "timestamp" || &header[1] != "wind_speed_mps" {
        return Err(SeriesError::BadHeader(header.iter().collect::<Vec<_>>().join(",")));
    }

    let mut rows: Vec<(usize, i64, Option<f64>)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| SeriesError::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(SeriesError::MalformedRow {
                line,
                reason: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let ts = parse_timestamp(&record[0]).ok_or_else(|| SeriesError::MalformedRow {
            line,
            reason: format!("unparseable timestamp `{}`", &record[0]),
        })?;
        let raw = &record[1];
        let value = if raw.is_empty() || raw.eq_ignore_ascii_case("nan") || raw.eq_ignore_ascii_case("na") {
            None
        } else {
            let v: f64 = raw.parse().map_err(|_| SeriesError::MalformedRow {
                line,
                reason: format!("unparseable wind speed `{raw}`"),
            })?;
            if !v.is_finite() {
                return Err(SeriesError::MalformedRow {
                    line,
                    reason: format!("non-finite wind speed `{raw}`"),
                });
            }
            if v < 0.0 {
                return Err(SeriesError::NegativeSpeed { line, value: v });
            }
            Some(v)
        };
        if let Some(&(_, prev, _)) = rows.last() {
            if ts <= prev {
                return Err(SeriesError::NotIncreasing { line });
            }
        }
        rows.push((line, ts, value));
    }
    if rows.is_empty() {
        return Err(SeriesError::Empty);
    }

    let step = rows
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .min()
        .unwrap_or(THREE_HOURS);

    let mut slots: Vec<Option<f64>> = Vec::with_capacity(rows.len());
    slots.push(rows[0].2);
    for w in rows.windows(2) {
        let delta = w[1].1 - w[0].1;
        if delta % step != 0 {
            return Err(SeriesError::NonUniformSpacing {
                line: w[1].0,
                delta,
                step,
            });
        }
        for _ in 1..delta / step {
            slots.push(None);
        }
        slots.push(w[1].2);
    }

    let values = fill_gaps(&slots)?;
    TimeSeries::new(rows[0].1, step, values)
}

/// Linear interpolation across runs of at most [`MAX_GAP_STEPS`] missing
/// samples bounded on both sides by observations.
pub fn fill_gaps(slots: &[Option<f64>]) -> Result<Vec<f64>, SeriesError> {
    let mut out = Vec::with_capacity(slots.len());
    let mut i = 0;
    while i < slots.len() {
        match slots[i] {
            Some(v) => {
                out.push(v);
                i += 1;
            }
            None => {
                let start = i;
                while i < slots.len() && slots[i].is_none() {
                    i += 1;
                }
                let run = i - start;
                if run > MAX_GAP_STEPS {
                    return Err(SeriesError::GapTooLong { start, steps: run });
                }
                if start == 0 {
                    return Err(SeriesError::EdgeGap { index: 0 });
                }
                if i == slots.len() {
                    return Err(SeriesError::EdgeGap { index: start });
                }
                let left = out[start - 1];
                let right = slots[i].expect("run ends at an observation");
                let span = (run + 1) as f64;
                for k in 1..=run {
                    out.push(left + (right - left) * k as f64 / span);
                }
            }
        }
    }
    Ok(out)
}

/// Chronological split: the first `floor(n * train_fraction)` points train.
pub fn split_train_test(
    series: &TimeSeries,
    train_fraction: f64,
) -> Result<(TimeSeries, TimeSeries), SeriesError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(SeriesError::InvalidFraction(train_fraction));
    }
    let n = series.len();
    let cut = (n as f64 * train_fraction).floor() as usize;
    if cut == 0 || cut >= n {
        return Err(SeriesError::EmptyPartition {
            n,
            fraction: train_fraction,
        });
    }
    let train = series.with_values(0, series.values[..cut].to_vec());
    let test = series.with_values(cut, series.values[cut..].to_vec());
    Ok((train, test))
}

/// Invertible linear map from physical speeds onto a target interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub source_min: f64,
    pub source_max: f64,
    pub target_lo: f64,
    pub target_hi: f64,
}

impl ScalingParams {
    pub fn new(source_min: f64, source_max: f64, target_lo: f64, target_hi: f64) -> Result<Self, SeriesError> {
        if !(target_lo < target_hi) {
            return Err(SeriesError::InvalidTargetRange {
                lo: target_lo,
                hi: target_hi,
            });
        }
        if !(source_min < source_max) {
            return Err(SeriesError::ConstantSeries);
        }
        Ok(Self {
            source_min,
            source_max,
            target_lo,
            target_hi,
        })
    }

    fn gain(&self) -> f64 {
        (self.target_hi - self.target_lo) / (self.source_max - self.source_min)
    }

    pub fn apply(&self, x: f64) -> f64 {
        self.target_lo + (x - self.source_min) * self.gain()
    }

    pub fn invert(&self, u: f64) -> f64 {
        self.source_min + (u - self.target_lo) / self.gain()
    }

    /// True when `x` falls outside the range the scaler was fitted on.
    pub fn extrapolates(&self, x: f64) -> bool {
        x < self.source_min || x > self.source_max
    }
}

/// Fits the min/max scaler on `values` (the training portion only).
pub fn fit_scaler(values: &[f64], target_lo: f64, target_hi: f64) -> Result<ScalingParams, SeriesError> {
    if values.is_empty() {
        return Err(SeriesError::Empty);
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(target_lo < target_hi) {
        return Err(SeriesError::InvalidTargetRange {
            lo: target_lo,
            hi: target_hi,
        });
    }
    ScalingParams::new(lo, hi, target_lo, target_hi)
}

pub fn apply_scale(params: &ScalingParams, x: f64) -> f64 {
    params.apply(x)
}

pub fn invert_scale(params: &ScalingParams, u: f64) -> f64 {
    params.invert(u)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Subtracts the sample mean; returns the adjusted values and the mean.
pub fn mean_adjust(values: &[f64]) -> Result<(Vec<f64>, f64), SeriesError> {
    if values.is_empty() {
        return Err(SeriesError::Empty);
    }
    let m = mean(values);
    Ok((values.iter().map(|v| v - m).collect(), m))
}

pub fn restore_mean(values: &[f64], mean: f64) -> Vec<f64> {
    values.iter().map(|v| v + mean).collect()
}

/// `d`-th order differencing. The returned seeds hold, for each level
/// `0..d`, the leading value dropped at that level.
pub fn difference(values: &[f64], d: usize) -> Result<(Vec<f64>, Vec<f64>), SeriesError> {
    if values.len() <= d {
        return Err(SeriesError::TooShort {
            len: values.len(),
            needed: d + 1,
        });
    }
    let mut current = values.to_vec();
    let mut seeds = Vec::with_capacity(d);
    for _ in 0..d {
        seeds.push(current[0]);
        current = current.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok((current, seeds))
}

/// Inverse of [`difference`]: rebuilds the original series from the
/// differenced values and the per-level seeds.
pub fn integrate(diffed: &[f64], seeds: &[f64], d: usize) -> Result<Vec<f64>, SeriesError> {
    if seeds.len() != d {
        return Err(SeriesError::SeedCount {
            expected: d,
            got: seeds.len(),
        });
    }
    let mut current = diffed.to_vec();
    for &seed in seeds.iter().rev() {
        let mut next = Vec::with_capacity(current.len() + 1);
        let mut acc = seed;
        next.push(acc);
        for v in &current {
            acc += v;
            next.push(acc);
        }
        current = next;
    }
    Ok(current)
}

/// Lag vectors paired with horizon-ahead targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedSet {
    pub num_lags: usize,
    pub horizon_steps: usize,
    /// Each vector holds `num_lags` values, oldest first.
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl SupervisedSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Index in the source series of the first target.
    pub fn first_target_index(&self) -> usize {
        self.num_lags - 1 + self.horizon_steps
    }

    /// Splits off the trailing `fraction` of pairs (chronological).
    pub fn split_tail(&self, fraction: f64) -> (SupervisedSet, SupervisedSet) {
        let n = self.len();
        let tail = ((n as f64) * fraction).round() as usize;
        let cut = n - tail.min(n);
        let head = SupervisedSet {
            num_lags: self.num_lags,
            horizon_steps: self.horizon_steps,
            inputs: self.inputs[..cut].to_vec(),
            targets: self.targets[..cut].to_vec(),
        };
        let rest = SupervisedSet {
            num_lags: self.num_lags,
            horizon_steps: self.horizon_steps,
            inputs: self.inputs[cut..].to_vec(),
            targets: self.targets[cut..].to_vec(),
        };
        (head, rest)
    }

    /// Most recent lag of every input; the predictor of single-lag models.
    pub fn last_lag(&self) -> Vec<f64> {
        self.inputs.iter().map(|x| x[x.len() - 1]).collect()
    }
}

/// Windows `values` into `(lags → value horizon_steps after the last lag)`.
pub fn make_supervised(values: &[f64], num_lags: usize, horizon_steps: usize) -> Result<SupervisedSet, SeriesError> {
    let needed = num_lags + horizon_steps;
    if num_lags == 0 || horizon_steps == 0 || values.len() < needed {
        return Err(SeriesError::TooShort {
            len: values.len(),
            needed: needed.max(2),
        });
    }
    let count = values.len() - needed + 1;
    let mut inputs = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    for start in 0..count {
        let end = start + num_lags;
        inputs.push(values[start..end].to_vec());
        targets.push(values[end - 1 + horizon_steps]);
    }
    Ok(SupervisedSet {
        num_lags,
        horizon_steps,
        inputs,
        targets,
    })
}

/// Forecasts of `values[i]` for each `i` in `indices` from the `num_lags`
/// values ending `horizon` steps before `i`. Windows reaching past the data
/// are filled with earlier forecasts, so indices beyond the end extend the
/// series recursively.
pub fn lagged_forecasts<F>(
    values: &[f64],
    num_lags: usize,
    horizon: usize,
    indices: std::ops::Range<usize>,
    mut predict: F,
) -> Result<Vec<f64>, SeriesError>
where
    F: FnMut(&[f64]) -> f64,
{
    let earliest = (num_lags + horizon).saturating_sub(1);
    if num_lags == 0 || horizon == 0 || indices.start < earliest {
        return Err(SeriesError::TooShort {
            len: indices.start,
            needed: earliest.max(1),
        });
    }
    let n = values.len();
    if n < num_lags {
        return Err(SeriesError::TooShort { len: n, needed: num_lags });
    }
    let mut extended = values.to_vec();
    for j in n..indices.end {
        let end = j - horizon;
        let v = predict(&extended[end + 1 - num_lags..=end]);
        extended.push(v);
    }
    Ok(indices
        .map(|i| {
            if i < n {
                let end = i - horizon;
                predict(&values[end + 1 - num_lags..=end])
            } else {
                extended[i]
            }
        })
        .collect())
}
