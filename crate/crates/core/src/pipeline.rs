//! From a manifest to a labelled STE feature dataset.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabeledSample, Provenance};
use crate::error::{Error, Result};
use crate::evaluate::FeatureSource;
use crate::ingest::{self, events_within, Manifest, MoiEvent, Preprocessing, SensorSeries, SeriesKey};
use crate::sensor::{feature_names, Label, SensorId};
use crate::ste::{ste_feature_vector, SteParams};
use crate::windowing::{
    build_event_group, extract_segment, split_into, split_subsequences, EventFilter, WindowParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroupingOptions {
    pub min_events: usize,
    pub max_events: usize,
    /// Forces this many subsequences per recording instead of the size rule.
    pub subsequences: Option<usize>,
}

impl Default for GroupingOptions {
    fn default() -> Self {
        GroupingOptions {
            min_events: 4,
            max_events: 10,
            subsequences: None,
        }
    }
}

impl GroupingOptions {
    pub fn validate(&self) -> Result<()> {
        if self.min_events == 0 || self.min_events > self.max_events {
            return Err(Error::invalid(
                "window.min_events",
                format!("need 1 <= min_events <= max_events, got {} and {}", self.min_events, self.max_events),
            ));
        }
        if self.subsequences == Some(0) {
            return Err(Error::invalid("window.subsequences", "must be >= 1"));
        }
        Ok(())
    }
}

/// One player's preprocessed recording of one match.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub match_id: String,
    pub player_id: String,
    pub label: Label,
    /// One series per sensor, in sensor order.
    pub series: Vec<SensorSeries>,
    pub events: Vec<MoiEvent>,
}

impl Recording {
    /// Time span covered by every sensor.
    pub fn common_span(&self) -> (f64, f64) {
        let start = self.series.iter().map(|s| s.start_time).fold(f64::NEG_INFINITY, f64::max);
        let end = self.series.iter().map(|s| s.end_time()).fold(f64::INFINITY, f64::min);
        (start, end)
    }

    fn admissible(&self, event: &MoiEvent, params: &WindowParams) -> bool {
        self.series.iter().all(|s| extract_segment(s, event, params).is_ok())
    }

    /// Feature vectors of this recording's event subsequences.
    pub fn samples(
        &self,
        params: &WindowParams,
        filter: &EventFilter,
        grouping: &GroupingOptions,
        ste: &SteParams,
    ) -> Result<Vec<LabeledSample>> {
        let events: Vec<MoiEvent> = filter
            .apply(&self.events)
            .into_iter()
            .filter(|e| self.admissible(e, params))
            .collect();
        if events.is_empty() {
            log::warn!(
                "{}/{}: no usable {filter} events for a half window of {} s",
                self.match_id,
                self.player_id,
                params.half_window()
            );
            return Ok(Vec::new());
        }
        let split = match grouping.subsequences {
            Some(k) => split_into(&events, k)?,
            None => split_subsequences(&events, grouping.min_events, grouping.max_events)?,
        };
        let mut out = Vec::new();
        for (index, group_events) in split.groups.iter().enumerate() {
            let group = match build_event_group(&self.series, group_events, params, filter, grouping.min_events, index) {
                Ok(g) => g,
                Err(Error::GroupRejected { kept, min }) => {
                    log::warn!(
                        "{}/{}: subsequence {index} has {kept} events (< {min}), skipped",
                        self.match_id,
                        self.player_id
                    );
                    continue;
                }
                Err(e) => return Err(e),
            };
            let features = ste_feature_vector(&group, ste)
                .map_err(|e| e.context(format!("{}/{} subsequence {index}", self.match_id, self.player_id)))?;
            out.push(LabeledSample {
                features: features.into_vec(),
                label: self.label,
                provenance: Provenance::new(self.player_id.clone(), self.match_id.clone(), index),
            });
        }
        Ok(out)
    }
}

/// All usable recordings of a manifest, preprocessed once and reused for
/// every window size and event filter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub recordings: Vec<Recording>,
}

fn load_recording(
    match_id: &str,
    label: Label,
    player: &ingest::PlayerRecord,
    preprocessing: &Preprocessing,
) -> Result<Recording> {
    let series = SensorId::ALL
        .iter()
        .map(|&sensor| {
            let path = &player.sensor_paths[&sensor];
            let raw = ingest::read_sensor_csv(path)?;
            let mode = preprocessing
                .aggregation
                .get(&sensor)
                .copied()
                .filter(|_| !player.aggregation.contains_key(&sensor))
                .unwrap_or_else(|| player.aggregation_for(sensor));
            preprocessing
                .apply(SeriesKey::new(sensor, &player.player_id, match_id), &raw, mode)
                .map_err(|e| e.context(format!("{}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut recording = Recording {
        match_id: match_id.to_string(),
        player_id: player.player_id.clone(),
        label,
        series,
        events: Vec::new(),
    };
    let (start, end) = recording.common_span();
    let events = ingest::load_moi(&player.moi_path, match_id, &player.player_id)?;
    recording.events = events_within(events, start, end);
    Ok(recording)
}

impl Corpus {
    /// Loads and preprocesses every player that has all sensors. Players
    /// with missing sensors are skipped with a warning.
    pub fn load(manifest: &Manifest, preprocessing: &Preprocessing) -> Result<Corpus> {
        preprocessing.validate()?;
        let jobs: Vec<(&str, Label, &ingest::PlayerRecord)> = manifest
            .matches
            .iter()
            .flat_map(|m| m.players.iter().map(move |p| (m.match_id.as_str(), m.team_label, p)))
            .filter(|(m, _, p)| {
                if p.has_all_sensors() {
                    true
                } else {
                    log::warn!("{m}/{}: missing sensors {:?}, skipped", p.player_id, p.missing_sensors);
                    false
                }
            })
            .collect();
        let recordings = jobs
            .par_iter()
            .map(|(m, label, p)| load_recording(m, *label, p, preprocessing))
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus { recordings })
    }

    /// One sample per accepted event subsequence of every recording.
    pub fn features(
        &self,
        td: u32,
        filter: &EventFilter,
        grouping: &GroupingOptions,
        ste: &SteParams,
    ) -> Result<Dataset> {
        let params = WindowParams::new(td)?;
        self.features_with(&params, filter, grouping, ste)
    }

    pub fn features_with(
        &self,
        params: &WindowParams,
        filter: &EventFilter,
        grouping: &GroupingOptions,
        ste: &SteParams,
    ) -> Result<Dataset> {
        grouping.validate()?;
        ste.validate()?;
        let per_recording: Vec<Vec<LabeledSample>> = self
            .recordings
            .par_iter()
            .map(|r| r.samples(params, filter, grouping, ste))
            .collect::<Result<_>>()?;
        Dataset::new(feature_names(), per_recording.into_iter().flatten().collect())
    }
}

/// A corpus bound to fixed event filter, grouping and STE settings.
pub struct CorpusSource<'a> {
    pub corpus: &'a Corpus,
    pub filter: EventFilter,
    pub grouping: GroupingOptions,
    pub ste: SteParams,
}

impl FeatureSource for CorpusSource<'_> {
    fn features(&self, td: u32) -> Result<Dataset> {
        self.corpus.features(td, &self.filter, &self.grouping, &self.ste)
    }
}
