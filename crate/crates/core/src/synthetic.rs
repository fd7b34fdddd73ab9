//! Seeded synthetic data: a feature matrix with known informative columns,
//! and sensor recordings with known directed couplings for end-to-end runs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabeledSample, Provenance};
use crate::error::{Error, Result};
use crate::ingest::{EventKind, Manifest, MatchRecord, PlayerRecord};
use crate::seed;
use crate::sensor::{feature_names, Label, SensorId, N_FEATURES};

fn normal(rng: &mut seed::Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_informative: usize,
    /// Standard deviation of the noise added to the informative sum before
    /// thresholding.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            n_samples: 220,
            n_features: N_FEATURES,
            n_informative: 5,
            label_noise: 0.5,
            seed: 0,
        }
    }
}

/// Standard-normal features; the label is Professional when the sum of the
/// informative columns plus noise is above its median, so classes are
/// balanced. Returns the dataset and the sorted informative indices.
pub fn feature_dataset(spec: &FeatureSpec) -> Result<(Dataset, Vec<usize>)> {
    if spec.n_informative > spec.n_features || spec.n_samples < 2 {
        return Err(Error::invalid("spec", "need n_informative <= n_features and >= 2 samples"));
    }
    let mut rng = seed::rng(spec.seed);
    let mut informative = index::sample(&mut rng, spec.n_features, spec.n_informative).into_vec();
    informative.sort_unstable();
    let rows: Vec<Vec<f64>> = (0..spec.n_samples)
        .map(|_| (0..spec.n_features).map(|_| normal(&mut rng)).collect())
        .collect();
    let score: Vec<f64> = rows
        .iter()
        .map(|r| informative.iter().map(|&f| r[f]).sum::<f64>() + spec.label_noise * normal(&mut rng))
        .collect();
    let mut order: Vec<usize> = (0..spec.n_samples).collect();
    order.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
    let mut labels = vec![Label::Amateur; spec.n_samples];
    for &i in &order[spec.n_samples / 2..] {
        labels[i] = Label::Professional;
    }
    let names = if spec.n_features == N_FEATURES {
        feature_names()
    } else {
        (0..spec.n_features).map(|j| format!("f{j}")).collect()
    };
    let samples = rows
        .into_iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (features, label))| LabeledSample {
            features,
            label,
            provenance: Provenance::new(format!("s{:02}", i % 22), "synthetic", i),
        })
        .collect();
    Ok((Dataset::new(names, samples)?, informative))
}

/// Shape of a synthetic recording corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub matches: usize,
    pub players_per_match: usize,
    pub duration_s: usize,
    pub events_per_player: usize,
    /// Raw samples per second written for every sensor.
    pub rate_hz: usize,
    /// Strength of the lag-1 couplings present only in Professional players.
    pub coupling: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            matches: 2,
            players_per_match: 2,
            duration_s: 240,
            events_per_player: 16,
            rate_hz: 2,
            coupling: 0.9,
            seed: 0,
        }
    }
}

/// Directed pairs `(driver, driven)` coupled in Professional recordings.
pub const PRO_COUPLINGS: [(SensorId, SensorId); 3] = [
    (SensorId::GP, SensorId::KA),
    (SensorId::GP, SensorId::MA2),
    (SensorId::LHMA, SensorId::RHMA),
];

/// One synthetic player-match: per-second latent values for every sensor
/// and the event list.
pub struct SyntheticRecording {
    pub match_id: String,
    pub player_id: String,
    pub label: Label,
    pub latent: Vec<Vec<f64>>,
    pub events: Vec<(f64, EventKind)>,
}

fn match_label(m: usize) -> Label {
    if m.is_multiple_of(2) {
        Label::Professional
    } else {
        Label::Amateur
    }
}

pub fn recordings(spec: &CorpusSpec) -> Vec<SyntheticRecording> {
    let mut out = Vec::new();
    for m in 0..spec.matches {
        let label = match_label(m);
        for p in 0..spec.players_per_match {
            let mut rng = seed::rng_for(spec.seed, &[m as u64, p as u64]);
            let n = spec.duration_s;
            let mut latent: Vec<Vec<f64>> = SensorId::ALL
                .iter()
                .map(|_| {
                    let mut x = 0.0;
                    (0..n)
                        .map(|_| {
                            x = 0.3 * x + normal(&mut rng);
                            x
                        })
                        .collect()
                })
                .collect();
            if label == Label::Professional {
                for (src, dst) in PRO_COUPLINGS {
                    for k in (1..n).rev() {
                        let drive = latent[src.index()][k - 1];
                        let own = latent[dst.index()][k];
                        latent[dst.index()][k] = spec.coupling * drive + (1.0 - spec.coupling) * own;
                    }
                }
            }
            let margin = 12.0;
            let span = n as f64 - 2.0 * margin;
            let mut times: Vec<f64> = (0..spec.events_per_player)
                .map(|_| margin + (rng.random::<f64>() * span * 4.0).floor() / 4.0)
                .collect();
            times.sort_by(f64::total_cmp);
            let events = times
                .into_iter()
                .map(|t| (t, EventKind::ALL[rng.random_range(0..EventKind::ALL.len())]))
                .collect();
            out.push(SyntheticRecording {
                match_id: format!("match{m:02}"),
                player_id: format!("m{m:02}p{p}"),
                label,
                latent,
                events,
            });
        }
    }
    out
}

/// Raw samples for one channel: `rate` samples per second. Count channels
/// split each second's value across its samples so per-second sums recover
/// it; others add a little jitter around it.
fn raw_channel(latent: &[f64], sensor: SensorId, rate: usize, rng: &mut seed::Rng) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(latent.len() * rate);
    for (k, &v) in latent.iter().enumerate() {
        for j in 0..rate {
            let t = k as f64 + j as f64 / rate as f64;
            let value = if sensor.is_count() {
                v / rate as f64
            } else {
                v + 0.01 * normal(rng)
            };
            out.push((t, value));
        }
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// Writes a manifest corpus under `dir` and returns the manifest path.
pub fn write_corpus(dir: &Path, spec: &CorpusSpec) -> Result<PathBuf> {
    let mut matches: Vec<MatchRecord> = Vec::new();
    for (r, rec) in recordings(spec).into_iter().enumerate() {
        let mut rng = seed::rng_for(spec.seed, &[0x5A, r as u64]);
        let base = PathBuf::from("data").join(&rec.match_id).join(&rec.player_id);
        let mut sensor_paths = std::collections::BTreeMap::new();
        for sensor in SensorId::ALL {
            let rel = base.join(format!("{sensor}.csv"));
            let rows = raw_channel(&rec.latent[sensor.index()], sensor, spec.rate_hz, &mut rng)
                .into_iter()
                .map(|(t, v)| vec![t.to_string(), v.to_string()]);
            write_file(&dir.join(&rel), &csv_text(&["timestamp", "value"], rows))?;
            sensor_paths.insert(sensor, rel);
        }
        let moi = base.join("moi.csv");
        let rows = rec
            .events
            .iter()
            .map(|(t, k)| vec![t.to_string(), k.as_str().to_string()]);
        write_file(&dir.join(&moi), &csv_text(&["timestamp", "kind"], rows))?;
        let player = PlayerRecord {
            player_id: rec.player_id.clone(),
            sensor_paths,
            missing_sensors: Vec::new(),
            moi_path: moi,
            aggregation: Default::default(),
        };
        match matches.iter_mut().find(|m| m.match_id == rec.match_id) {
            Some(m) => m.players.push(player),
            None => matches.push(MatchRecord {
                match_id: rec.match_id.clone(),
                team_label: rec.label,
                players: vec![player],
            }),
        }
    }
    let manifest = Manifest { matches };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::parse(&path, e))?;
    write_file(&path, &text)?;
    Ok(path)
}

/// Writes the same corpus as raw per-device files, in the directory layout
/// understood by `adapt-dataset`:
///
/// ```text
/// <dir>/meta_info.csv                    match_id,team
/// <dir>/matches/<match>/<player>/heart_rate.csv, gsr.csv, emg.csv,
///     eye_tracker.csv, imu_left_hand.csv, imu_right_hand.csv, imu_chair.csv,
///     keyboard.csv, mouse.csv, events.csv
/// ```
pub fn write_raw_layout(dir: &Path, spec: &CorpusSpec) -> Result<()> {
    let recs = recordings(spec);
    let mut meta = Vec::new();
    for (r, rec) in recs.iter().enumerate() {
        if !meta.iter().any(|m: &Vec<String>| m[0] == rec.match_id) {
            let team = if rec.label == Label::Professional { "pro" } else { "amateur" };
            meta.push(vec![rec.match_id.clone(), team.to_string()]);
        }
        let base = dir.join("matches").join(&rec.match_id).join(&rec.player_id);
        let mut rng = seed::rng_for(spec.seed, &[0x7A, r as u64]);
        let n = rec.latent[0].len();
        let rate = spec.rate_hz;
        let lat = |s: SensorId| &rec.latent[s.index()];
        let time = |k: usize, j: usize| (k as f64 + j as f64 / rate as f64).to_string();
        let mut jitter = move || 0.01 * normal(&mut rng);
        let single = |name: &str, col: &str, s: SensorId, jitter: &mut dyn FnMut() -> f64| -> Result<()> {
            let rows = (0..n).flat_map(|k| (0..rate).map(move |j| (k, j))).map(|(k, j)| {
                let v = if s.is_count() { lat(s)[k] / rate as f64 } else { lat(s)[k] + jitter() };
                vec![time(k, j), v.to_string()]
            });
            write_file(&base.join(name), &csv_text(&["time", col], rows.collect::<Vec<_>>()))
        };
        single("heart_rate.csv", "heart_rate", SensorId::HR, &mut jitter)?;
        single("gsr.csv", "gsr", SensorId::EA, &mut jitter)?;
        single("keyboard.csv", "key_presses", SensorId::KA, &mut jitter)?;

        let mut rows = Vec::new();
        for k in 0..n {
            for j in 0..rate {
                rows.push(vec![
                    time(k, j),
                    (lat(SensorId::LHMA)[k] + jitter()).to_string(),
                    (lat(SensorId::RHMA)[k] + jitter()).to_string(),
                ]);
            }
        }
        write_file(&base.join("emg.csv"), &csv_text(&["time", "emg_left", "emg_right"], rows))?;

        // Gaze magnitude equals the latent when the angle is fixed at 0.
        let mut rows = Vec::new();
        for k in 0..n {
            for j in 0..rate {
                let pd = lat(SensorId::PD)[k] + jitter();
                rows.push(vec![
                    time(k, j),
                    (lat(SensorId::GP)[k].abs() + jitter()).to_string(),
                    "0".to_string(),
                    pd.to_string(),
                    pd.to_string(),
                ]);
            }
        }
        write_file(
            &base.join("eye_tracker.csv"),
            &csv_text(&["time", "gaze_x", "gaze_y", "pupil_left", "pupil_right"], rows),
        )?;

        for (name, s) in [
            ("imu_left_hand.csv", SensorId::LHM),
            ("imu_right_hand.csv", SensorId::RHM),
            ("imu_chair.csv", SensorId::CM),
        ] {
            let mut rows = Vec::new();
            for k in 0..n {
                for j in 0..rate {
                    rows.push(vec![
                        time(k, j),
                        (lat(s)[k].abs() + 0.1 + jitter().abs()).to_string(),
                        "0".to_string(),
                        "0".to_string(),
                    ]);
                }
            }
            write_file(&base.join(name), &csv_text(&["time", "acc_x", "acc_y", "acc_z"], rows))?;
        }

        let mut rows = Vec::new();
        for k in 0..n {
            for j in 0..rate {
                rows.push(vec![
                    time(k, j),
                    (lat(SensorId::MA1)[k] / rate as f64).to_string(),
                    (lat(SensorId::MA2)[k] / rate as f64).to_string(),
                ]);
            }
        }
        write_file(&base.join("mouse.csv"), &csv_text(&["time", "distance", "clicks"], rows))?;

        let mut rows: Vec<Vec<String>> = rec
            .events
            .iter()
            .map(|(t, k)| vec![t.to_string(), k.as_str().to_uppercase()])
            .collect();
        rows.push(vec!["5".into(), "tower_destroyed".into()]);
        rows.sort_by(|a, b| a[0].parse::<f64>().unwrap().total_cmp(&b[0].parse::<f64>().unwrap()));
        write_file(&base.join("events.csv"), &csv_text(&["time", "event"], rows))?;
    }
    write_file(&dir.join("meta_info.csv"), &csv_text(&["match_id", "team"], meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_dataset_is_balanced_and_seeded() {
        let spec = FeatureSpec::default();
        let (a, inf_a) = feature_dataset(&spec).unwrap();
        let (b, inf_b) = feature_dataset(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(inf_a, inf_b);
        assert_eq!(a.class_counts(), (110, 110));
        assert_eq!(a.n_features(), 144);
        assert_eq!(inf_a.len(), 5);
    }

    #[test]
    fn corpus_has_one_label_per_match() {
        let recs = recordings(&CorpusSpec::default());
        assert_eq!(recs.len(), 4);
        assert_eq!(recs[0].label, Label::Professional);
        assert_eq!(recs[2].label, Label::Amateur);
        assert!(recs.iter().all(|r| r.events.windows(2).all(|w| w[0].0 <= w[1].0)));
    }
}
