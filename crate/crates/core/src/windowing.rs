//! Event-locked windows, event subsequences and class balancing.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledSample;
use crate::error::{Error, Result};
use crate::ingest::{EventKind, MoiEvent, SensorSeries};
use crate::seed;
use crate::sensor::{Label, SensorId, N_SENSORS};

pub const DEFAULT_MIN_EVENTS: usize = 4;
pub const DEFAULT_MAX_EVENTS: usize = 10;

/// Half-window `t_d`, sample period `T` and samples per side `S = t_d / T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowParams {
    half_window: f64,
    period: f64,
    samples_per_side: usize,
}

impl WindowParams {
    /// `t_d` seconds on the 1-second grid.
    pub fn new(t_d: u32) -> Result<Self> {
        Self::with_period(t_d as f64, 1.0)
    }

    pub fn with_period(half_window: f64, period: f64) -> Result<Self> {
        if period <= 0.0 || !period.is_finite() {
            return Err(Error::invalid("window.period", "must be finite and > 0"));
        }
        let s = (half_window / period).round();
        if s < 1.0 || s * period != half_window {
            return Err(Error::invalid(
                "window.td",
                format!("t_d = {half_window} is not a positive integer multiple of T = {period}"),
            ));
        }
        Ok(WindowParams {
            half_window,
            period,
            samples_per_side: s as usize,
        })
    }

    pub fn half_window(&self) -> f64 {
        self.half_window
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn samples_per_side(&self) -> usize {
        self.samples_per_side
    }

    /// `2S + 1`.
    pub fn segment_len(&self) -> usize {
        2 * self.samples_per_side + 1
    }
}

/// The `2S + 1` samples of one sensor centred on one event.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub sensor: SensorId,
    pub event: MoiEvent,
    pub values: Vec<f64>,
}

pub fn extract_segment(series: &SensorSeries, event: &MoiEvent, params: &WindowParams) -> Result<Segment> {
    if series.period != params.period() {
        return Err(Error::invalid(
            "window.period",
            format!("series period {} differs from window period {}", series.period, params.period()),
        ));
    }
    let s = params.samples_per_side() as i64;
    let center = series.index_at(event.t_e);
    let (lo, hi) = (center - s, center + s);
    if lo < 0 || hi >= series.len() as i64 {
        return Err(Error::WindowOutOfBounds {
            t_e: event.t_e,
            start: event.t_e - params.half_window(),
            end: event.t_e + params.half_window(),
            span_start: series.start_time,
            span_end: series.end_time(),
        });
    }
    Ok(Segment {
        sensor: series.sensor,
        event: event.clone(),
        values: series.values[lo as usize..=hi as usize].to_vec(),
    })
}

/// Which event kinds take part in windowing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventFilter {
    kinds: BTreeSet<EventKind>,
}

impl EventFilter {
    pub fn all() -> Self {
        EventFilter {
            kinds: EventKind::ALL.into_iter().collect(),
        }
    }

    pub fn only(kinds: impl IntoIterator<Item = EventKind>) -> Self {
        EventFilter {
            kinds: kinds.into_iter().collect(),
        }
    }

    pub fn is_all(&self) -> bool {
        self.kinds.len() == EventKind::ALL.len()
    }

    pub fn accepts(&self, kind: EventKind) -> bool {
        self.kinds.contains(&kind)
    }

    pub fn apply<'a>(&self, events: impl IntoIterator<Item = &'a MoiEvent>) -> Vec<MoiEvent> {
        events.into_iter().filter(|e| self.accepts(e.kind)).cloned().collect()
    }

    /// The four filters compared in the per-event analyses.
    pub fn standard_set() -> [EventFilter; 4] {
        [
            EventFilter::only([EventKind::Kill]),
            EventFilter::only([EventKind::Death]),
            EventFilter::only([EventKind::Assist]),
            EventFilter::all(),
        ]
    }
}

impl Default for EventFilter {
    fn default() -> Self {
        EventFilter::all()
    }
}

impl fmt::Display for EventFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_all() {
            return f.write_str("all");
        }
        let names: Vec<&str> = self.kinds.iter().map(|k| k.as_str()).collect();
        f.write_str(&names.join("+"))
    }
}

impl FromStr for EventFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(EventFilter::all());
        }
        let kinds = s
            .split(['+', ','])
            .map(str::parse)
            .collect::<Result<BTreeSet<EventKind>>>()?;
        if kinds.is_empty() {
            return Err(Error::invalid("events", "empty event filter"));
        }
        Ok(EventFilter { kinds })
    }
}

/// Contiguous chronological groups of events.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsequences {
    pub groups: Vec<Vec<MoiEvent>>,
    /// Set when fewer than `min_events` events were available; the single
    /// returned group will be rejected downstream.
    pub undersized: bool,
}

/// Group sizes for `count` items: the fewest groups whose near-equal sizes
/// all lie in `[min, max]`, larger groups first.
pub fn partition_sizes(count: usize, min: usize, max: usize) -> Result<Vec<usize>> {
    if min == 0 || min > max {
        return Err(Error::invalid("window.min_events", format!("need 1 <= min <= max, got {min}..={max}")));
    }
    if count == 0 {
        return Err(Error::EmptyInput("split_subsequences: no events"));
    }
    if count < min {
        return Ok(vec![count]);
    }
    let mut k = count.div_ceil(max);
    while k <= count / min {
        let sizes = balanced_sizes(count, k);
        if sizes.iter().all(|&s| (min..=max).contains(&s)) {
            return Ok(sizes);
        }
        k += 1;
    }
    Err(Error::InfeasiblePartition { count, min, max })
}

fn balanced_sizes(count: usize, k: usize) -> Vec<usize> {
    let (base, extra) = (count / k, count % k);
    (0..k).map(|i| base + usize::from(i < extra)).collect()
}

fn cut(events: &[MoiEvent], sizes: &[usize]) -> Vec<Vec<MoiEvent>> {
    let mut start = 0;
    sizes
        .iter()
        .map(|&n| {
            let g = events[start..start + n].to_vec();
            start += n;
            g
        })
        .collect()
}

/// Splits a time-sorted event list into subsequences of `min..=max` events.
pub fn split_subsequences(events: &[MoiEvent], min_events: usize, max_events: usize) -> Result<Subsequences> {
    let sizes = partition_sizes(events.len(), min_events, max_events)?;
    Ok(Subsequences {
        groups: cut(events, &sizes),
        undersized: events.len() < min_events,
    })
}

/// Splits into exactly `k` near-equal contiguous groups, ignoring the size
/// bounds. Used when the number of subsequences is forced by configuration.
pub fn split_into(events: &[MoiEvent], k: usize) -> Result<Subsequences> {
    if events.is_empty() {
        return Err(Error::EmptyInput("split_into: no events"));
    }
    if k == 0 {
        return Err(Error::invalid("window.subsequences", "must be >= 1"));
    }
    let k = k.min(events.len());
    Ok(Subsequences {
        groups: cut(events, &balanced_sizes(events.len(), k)),
        undersized: false,
    })
}

/// Per-sensor concatenation of event segments for one subsequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EventGroup {
    pub player_id: String,
    pub match_id: String,
    pub subsequence_index: usize,
    pub events: Vec<MoiEvent>,
    segment_len: usize,
    sequences: Vec<Vec<f64>>,
}

impl EventGroup {
    /// Builds a group directly from per-sensor concatenations (indexed by
    /// [`SensorId::index`]) whose lengths are multiples of `segment_len`.
    pub fn from_sequences(
        player_id: impl Into<String>,
        match_id: impl Into<String>,
        subsequence_index: usize,
        events: Vec<MoiEvent>,
        segment_len: usize,
        sequences: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if sequences.len() != N_SENSORS {
            return Err(Error::LengthMismatch {
                expected: N_SENSORS,
                actual: sequences.len(),
            });
        }
        let expected = events.len() * segment_len;
        if let Some(bad) = sequences.iter().find(|s| s.len() != expected) {
            return Err(Error::LengthMismatch {
                expected,
                actual: bad.len(),
            });
        }
        Ok(EventGroup {
            player_id: player_id.into(),
            match_id: match_id.into(),
            subsequence_index,
            events,
            segment_len,
            sequences,
        })
    }

    pub fn segment_len(&self) -> usize {
        self.segment_len
    }

    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    pub fn sequence(&self, sensor: SensorId) -> &[f64] {
        &self.sequences[sensor.index()]
    }

    pub fn sequence_mut(&mut self, sensor: SensorId) -> &mut [f64] {
        &mut self.sequences[sensor.index()]
    }

    /// Start offset of every event block.
    pub fn boundaries(&self) -> Vec<usize> {
        (0..self.events.len()).map(|e| e * self.segment_len).collect()
    }

    pub fn blocks(&self, sensor: SensorId) -> std::slice::ChunksExact<'_, f64> {
        self.sequence(sensor).chunks_exact(self.segment_len)
    }
}

/// Windows every event of `events` that passes `filter` on all twelve sensors
/// and concatenates the segments per sensor in event order.
///
/// An event whose window leaves any sensor's span is dropped from every
/// sensor. The group is rejected if fewer than `min_events` events survive.
pub fn build_event_group(
    series: &[SensorSeries],
    events: &[MoiEvent],
    params: &WindowParams,
    filter: &EventFilter,
    min_events: usize,
    subsequence_index: usize,
) -> Result<EventGroup> {
    let mut by_sensor: Vec<Option<&SensorSeries>> = vec![None; N_SENSORS];
    for s in series {
        by_sensor[s.sensor.index()] = Some(s);
    }
    let first = series.first().ok_or(Error::EmptyInput("build_event_group: no series"))?;
    let (player_id, match_id) = (first.player_id.clone(), first.match_id.clone());
    let by_sensor: Vec<&SensorSeries> = by_sensor
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            s.ok_or_else(|| Error::MissingSensor {
                sensor: SensorId::ALL[i].to_string(),
                player_id: player_id.clone(),
                match_id: match_id.clone(),
            })
        })
        .collect::<Result<_>>()?;

    let mut kept = Vec::new();
    let mut sequences: Vec<Vec<f64>> = vec![Vec::new(); N_SENSORS];
    for event in filter.apply(events) {
        let segments: Result<Vec<Segment>> = by_sensor
            .iter()
            .map(|s| extract_segment(s, &event, params))
            .collect();
        match segments {
            Ok(segments) => {
                for seg in segments {
                    sequences[seg.sensor.index()].extend_from_slice(&seg.values);
                }
                kept.push(event);
            }
            Err(e) => log::warn!(
                "skipping {} event at t = {} for player {} in match {}: {e}",
                event.kind,
                event.t_e,
                player_id,
                match_id
            ),
        }
    }
    if kept.len() < min_events {
        return Err(Error::GroupRejected {
            kept: kept.len(),
            min: min_events,
        });
    }
    EventGroup::from_sequences(
        player_id,
        match_id,
        subsequence_index,
        kept,
        params.segment_len(),
        sequences,
    )
}

/// Downsamples the majority class to the minority count (seeded, without
/// replacement) and shuffles the result deterministically.
pub fn balance_classes(samples: &[LabeledSample], seed: u64) -> Result<Vec<LabeledSample>> {
    let (pro, ama): (Vec<usize>, Vec<usize>) =
        (0..samples.len()).partition(|&i| samples[i].label == Label::Professional);
    if pro.is_empty() || ama.is_empty() {
        return Err(Error::SingleClass(format!(
            "balance_classes needs both classes, got {} amateur / {} professional",
            ama.len(),
            pro.len()
        )));
    }
    let mut rng = seed::rng_for(seed, &[0xBA1A]);
    let (minority, majority) = if pro.len() <= ama.len() { (pro, ama) } else { (ama, pro) };
    let mut chosen: Vec<usize> = index::sample(&mut rng, majority.len(), minority.len())
        .into_iter()
        .map(|k| majority[k])
        .collect();
    chosen.extend(minority);
    chosen.sort_unstable();
    chosen.shuffle(&mut rng);
    Ok(chosen.into_iter().map(|i| samples[i].clone()).collect())
}
