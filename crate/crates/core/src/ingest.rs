//! Manifest, sensor and event loading plus per-signal preprocessing.
//!
//! Raw sensor files are `timestamp,value` CSVs; event logs are
//! `timestamp,kind` CSVs. A JSON manifest ties them to matches and players.
//! Preprocessing resamples onto a 1-second grid, replaces robust-z outliers by
//! interpolation and smooths with an exponential moving average.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor::{Label, SensorId};

/// Consistency constant that turns the MAD into a standard-deviation estimate
/// for normally distributed data.
pub const MAD_SCALE: f64 = 1.4826;
pub const DEFAULT_OUTLIER_THRESHOLD: f64 = 3.5;
pub const DEFAULT_EMA_ALPHA: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Kill,
    Death,
    Assist,
}

impl EventKind {
    pub const ALL: [EventKind; 3] = [EventKind::Kill, EventKind::Death, EventKind::Assist];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Kill => "kill",
            EventKind::Death => "death",
            EventKind::Assist => "assist",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kill" => Ok(EventKind::Kill),
            "death" => Ok(EventKind::Death),
            "assist" => Ok(EventKind::Assist),
            _ => Err(Error::UnknownEventKind(s.trim().to_string())),
        }
    }
}

/// A moment of interest: one kill, death or assist of one player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoiEvent {
    pub match_id: String,
    pub player_id: String,
    /// Event time in seconds, on the same clock as the sensor timestamps.
    pub t_e: f64,
    pub kind: EventKind,
}

/// How raw samples falling into one 1-second bin are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Mean,
    Sum,
}

impl Aggregation {
    /// Default mapping: totals for the count-like channels, means elsewhere.
    pub fn default_for(sensor: SensorId) -> Aggregation {
        if sensor.is_count() {
            Aggregation::Sum
        } else {
            Aggregation::Mean
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawSample {
    pub t: f64,
    pub value: f64,
}

/// One uniformly sampled, preprocessed signal of one player in one match.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSeries {
    pub sensor: SensorId,
    pub player_id: String,
    pub match_id: String,
    /// Time of the first sample, in seconds.
    pub start_time: f64,
    /// Sample period in seconds; always 1 after resampling.
    pub period: f64,
    pub values: Vec<f64>,
}

impl SensorSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + (self.values.len().saturating_sub(1)) as f64 * self.period
    }

    /// Index of the sample whose bin `[t, t + period)` contains `t`.
    pub fn index_at(&self, t: f64) -> i64 {
        ((t - self.start_time) / self.period).floor() as i64
    }

    pub fn to_raw(&self) -> Vec<RawSample> {
        self.values
            .iter()
            .enumerate()
            .map(|(k, &value)| RawSample {
                t: self.start_time + k as f64 * self.period,
                value,
            })
            .collect()
    }

    fn with_values(&self, values: Vec<f64>) -> SensorSeries {
        SensorSeries {
            values,
            ..self.clone()
        }
    }
}

/// Identity of a series, used when constructing one from raw samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesKey {
    pub sensor: SensorId,
    pub player_id: String,
    pub match_id: String,
}

impl SeriesKey {
    pub fn new(sensor: SensorId, player_id: impl Into<String>, match_id: impl Into<String>) -> Self {
        SeriesKey {
            sensor,
            player_id: player_id.into(),
            match_id: match_id.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerRecord {
    pub player_id: String,
    pub sensor_paths: BTreeMap<SensorId, PathBuf>,
    /// Sensors this player has no recording for.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_sensors: Vec<SensorId>,
    pub moi_path: PathBuf,
    /// Per-sensor overrides of the resampling aggregation.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aggregation: BTreeMap<SensorId, Aggregation>,
}

impl PlayerRecord {
    pub fn has_all_sensors(&self) -> bool {
        self.sensor_paths.len() == SensorId::ALL.len()
    }

    pub fn aggregation_for(&self, sensor: SensorId) -> Aggregation {
        self.aggregation
            .get(&sensor)
            .copied()
            .unwrap_or_else(|| Aggregation::default_for(sensor))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchRecord {
    pub match_id: String,
    pub team_label: Label,
    pub players: Vec<PlayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub matches: Vec<MatchRecord>,
}

impl Manifest {
    /// Checks id uniqueness and that every sensor is either provided or
    /// explicitly listed as missing.
    pub fn validate(&self) -> Result<()> {
        let mut match_ids = BTreeSet::new();
        for m in &self.matches {
            if !match_ids.insert(m.match_id.as_str()) {
                return Err(Error::DuplicateId(format!("match_id `{}`", m.match_id)));
            }
            let mut player_ids = BTreeSet::new();
            for p in &m.players {
                if !player_ids.insert(p.player_id.as_str()) {
                    return Err(Error::DuplicateId(format!(
                        "player_id `{}` in match `{}`",
                        p.player_id, m.match_id
                    )));
                }
                for sensor in SensorId::ALL {
                    let provided = p.sensor_paths.contains_key(&sensor);
                    let listed = p.missing_sensors.contains(&sensor);
                    if provided == listed {
                        let what = if provided {
                            "both provided and listed missing"
                        } else {
                            "neither provided nor listed in missing_sensors"
                        };
                        return Err(Error::MissingSensor {
                            sensor: format!("{sensor} ({what})"),
                            player_id: p.player_id.clone(),
                            match_id: m.match_id.clone(),
                        });
                    }
                }
                for (sensor, path) in &p.sensor_paths {
                    if path.as_os_str().is_empty() {
                        return Err(Error::MissingSensor {
                            sensor: format!("{sensor} (empty path)"),
                            player_id: p.player_id.clone(),
                            match_id: m.match_id.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Joins every relative path onto `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in self.matches.iter_mut().flat_map(|m| m.players.iter_mut()) {
            for path in p.sensor_paths.values_mut() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
            if p.moi_path.is_relative() {
                p.moi_path = base.join(&p.moi_path);
            }
        }
    }

    pub fn player_count(&self) -> usize {
        self.matches.iter().map(|m| m.players.len()).sum()
    }
}

/// Loads a JSON manifest, resolving paths relative to the manifest's
/// directory and checking that every referenced file exists.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    manifest.validate()?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    manifest.resolve_paths(base);
    for p in manifest.matches.iter().flat_map(|m| m.players.iter()) {
        for file in p.sensor_paths.values().chain(std::iter::once(&p.moi_path)) {
            if !file.is_file() {
                return Err(Error::MissingFile(file.clone()));
            }
        }
    }
    Ok(manifest)
}

fn is_missing_value(field: &str) -> bool {
    matches!(
        field.trim().to_ascii_lowercase().as_str(),
        "" | "nan" | "na" | "null" | "none"
    )
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path, e))
}

fn check_header(path: &Path, reader: &mut csv::Reader<fs::File>, expected: [&str; 2]) -> Result<()> {
    let header = reader.headers().map_err(|e| Error::parse(path, e))?;
    let got: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
    if got.len() < 2 || got[0] != expected[0] || got[1] != expected[1] {
        return Err(Error::parse(
            path,
            format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

/// Reads a `timestamp,value` sensor CSV. Missing or non-finite values are
/// dropped; resampling fills the gaps.
pub fn read_sensor_csv(path: &Path) -> Result<Vec<RawSample>> {
    let mut reader = open_csv(path)?;
    check_header(path, &mut reader, ["timestamp", "value"])?;
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, e))?;
        let line = row + 2;
        let t: f64 = record
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::parse(path, format!("line {line}: bad timestamp")))?;
        if !t.is_finite() {
            return Err(Error::parse(path, format!("line {line}: non-finite timestamp")));
        }
        let field = record.get(1).unwrap_or("");
        if is_missing_value(field) {
            continue;
        }
        let value: f64 = field
            .parse()
            .map_err(|_| Error::parse(path, format!("line {line}: bad value `{field}`")))?;
        if value.is_finite() {
            samples.push(RawSample { t, value });
        }
    }
    Ok(samples)
}

/// Reads a `timestamp,kind` event CSV and returns the events sorted by time.
pub fn load_moi(path: &Path, match_id: &str, player_id: &str) -> Result<Vec<MoiEvent>> {
    let mut reader = open_csv(path)?;
    check_header(path, &mut reader, ["timestamp", "kind"])?;
    let mut events = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, e))?;
        let line = row + 2;
        let t_e: f64 = record
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::parse(path, format!("line {line}: bad timestamp")))?;
        if !t_e.is_finite() {
            return Err(Error::parse(path, format!("line {line}: non-finite timestamp")));
        }
        let kind: EventKind = record.get(1).unwrap_or("").parse()?;
        events.push(MoiEvent {
            match_id: match_id.to_string(),
            player_id: player_id.to_string(),
            t_e,
            kind,
        });
    }
    events.sort_by(|a, b| a.t_e.total_cmp(&b.t_e));
    Ok(events)
}

/// Keeps only events inside `[start, end]`.
pub fn events_within(events: Vec<MoiEvent>, start: f64, end: f64) -> Vec<MoiEvent> {
    let before = events.len();
    let kept: Vec<_> = events
        .into_iter()
        .filter(|e| e.t_e >= start && e.t_e <= end)
        .collect();
    if kept.len() < before {
        log::warn!(
            "dropped {} events outside the recorded span [{start}, {end}]",
            before - kept.len()
        );
    }
    kept
}

/// Bins samples into 1-second bins `[t, t + 1)` starting at the floor of the
/// first timestamp.
///
/// Empty bins are linearly interpolated in `Mean` mode and zero in `Sum` mode.
pub fn resample_1s(key: SeriesKey, raw: &[RawSample], mode: Aggregation) -> Result<SensorSeries> {
    let first = raw.first().ok_or(Error::EmptyInput("resample_1s: no samples"))?;
    if let Some(w) = raw.windows(2).find(|w| w[1].t < w[0].t) {
        return Err(Error::invalid(
            "timestamps",
            format!("not nondecreasing at t = {} -> {}", w[0].t, w[1].t),
        ));
    }
    let base = first.t.floor();
    let last_bin = (raw[raw.len() - 1].t.floor() - base) as usize;
    let n_bins = last_bin + 1;
    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for s in raw {
        let bin = (s.t.floor() - base) as usize;
        sums[bin] += s.value;
        counts[bin] += 1;
    }

    let values = match mode {
        Aggregation::Sum => sums,
        Aggregation::Mean => {
            let mut values: Vec<Option<f64>> = sums
                .iter()
                .zip(&counts)
                .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
                .collect();
            fill_linear(&mut values);
            values.into_iter().map(|v| v.unwrap_or(0.0)).collect()
        }
    };

    Ok(SensorSeries {
        sensor: key.sensor,
        player_id: key.player_id,
        match_id: key.match_id,
        start_time: base,
        period: 1.0,
        values,
    })
}

/// Fills `None` entries by linear interpolation between the nearest present
/// neighbours, or by the nearest present value at either end.
fn fill_linear(values: &mut [Option<f64>]) {
    let present: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    if present.is_empty() {
        return;
    }
    let mut next = 0usize;
    for i in 0..values.len() {
        if values[i].is_some() {
            continue;
        }
        while next < present.len() && present[next] < i {
            next += 1;
        }
        let left = next.checked_sub(1).map(|k| present[k]);
        let right = present.get(next).copied();
        values[i] = match (left, right) {
            (Some(l), Some(r)) => {
                let (vl, vr) = (values[l].unwrap(), values[r].unwrap());
                Some(vl + (vr - vl) * (i - l) as f64 / (r - l) as f64)
            }
            (Some(l), None) => values[l],
            (None, Some(r)) => values[r],
            (None, None) => None,
        };
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn sorted_copy(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Replaces samples whose robust z-score `|x - median| / (1.4826 MAD)`
/// exceeds `threshold` by interpolation between surviving neighbours.
///
/// With a zero MAD every sample that differs from the median is flagged.
pub fn remove_outliers(series: &SensorSeries, threshold: f64) -> Result<SensorSeries> {
    if series.is_empty() {
        return Err(Error::EmptyInput("remove_outliers: empty series"));
    }
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::invalid("outlier_threshold", "must be > 0"));
    }
    let med = median(&sorted_copy(series.values.iter().copied()));
    let mad = median(&sorted_copy(series.values.iter().map(|x| (x - med).abs())));
    let scale = MAD_SCALE * mad;

    let mut flagged = 0usize;
    let mut kept: Vec<Option<f64>> = series
        .values
        .iter()
        .map(|&x| {
            let dev = (x - med).abs();
            let outlier = if scale > 0.0 { dev / scale > threshold } else { dev > 0.0 };
            if outlier {
                flagged += 1;
                None
            } else {
                Some(x)
            }
        })
        .collect();
    if flagged == 0 {
        return Ok(series.clone());
    }
    if flagged == kept.len() {
        return Err(Error::DegenerateSeries(format!(
            "every sample of {} ({} / {}) is an outlier",
            series.sensor, series.player_id, series.match_id
        )));
    }
    fill_linear(&mut kept);
    Ok(series.with_values(kept.into_iter().map(|v| v.unwrap()).collect()))
}

/// Exponential moving average `s_0 = x_0`, `s_k = a x_k + (1 - a) s_{k-1}`.
pub fn ema_smooth(series: &SensorSeries, alpha: f64) -> Result<SensorSeries> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("ema_alpha", format!("{alpha} not in (0, 1]")));
    }
    if series.is_empty() {
        return Err(Error::EmptyInput("ema_smooth: empty series"));
    }
    let mut out = Vec::with_capacity(series.len());
    let mut state = series.values[0];
    out.push(state);
    for &x in &series.values[1..] {
        state = if alpha == 1.0 { x } else { state + alpha * (x - state) };
        out.push(state);
    }
    Ok(series.with_values(out))
}

/// Preprocessing switches and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Preprocessing {
    pub remove_outliers: bool,
    pub outlier_threshold: f64,
    pub smooth: bool,
    pub ema_alpha: f64,
    /// Global aggregation overrides; per-player manifest overrides win.
    pub aggregation: BTreeMap<SensorId, Aggregation>,
}

impl Default for Preprocessing {
    fn default() -> Self {
        Preprocessing {
            remove_outliers: true,
            outlier_threshold: DEFAULT_OUTLIER_THRESHOLD,
            smooth: true,
            ema_alpha: DEFAULT_EMA_ALPHA,
            aggregation: BTreeMap::new(),
        }
    }
}

impl Preprocessing {
    /// Raw samples straight onto the 1-second grid, nothing else.
    pub fn bypass() -> Self {
        Preprocessing {
            remove_outliers: false,
            smooth: false,
            ..Preprocessing::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.outlier_threshold <= 0.0 || !self.outlier_threshold.is_finite() {
            return Err(Error::invalid("preprocessing.outlier_threshold", "must be finite and > 0"));
        }
        if !(self.ema_alpha > 0.0 && self.ema_alpha <= 1.0) {
            return Err(Error::invalid("preprocessing.ema_alpha", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Resample, then outlier removal, then smoothing.
    pub fn apply(&self, key: SeriesKey, raw: &[RawSample], mode: Aggregation) -> Result<SensorSeries> {
        let mut series = resample_1s(key, raw, mode)?;
        if self.remove_outliers {
            series = remove_outliers(&series, self.outlier_threshold)?;
        }
        if self.smooth {
            series = ema_smooth(&series, self.ema_alpha)?;
        }
        Ok(series)
    }
}
