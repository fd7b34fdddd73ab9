//! Conversion of a raw per-device directory tree into a manifest corpus.
//!
//! Expected shape (names are matched by keyword, case-insensitively):
//!
//! ```text
//! <input>/[...]/<match>/<player>/*.csv        one file per device
//! <input>/*meta*.csv or labels.csv          match -> team (pro/amateur)
//! ```
//!
//! Device files are recognised by their stem: `heart`/`hr`, `gsr`/`eda`,
//! `emg` (optionally `left`/`right`), `eye`/`gaze`, `imu` with
//! `left`/`right`/`chair`, `keyboard`, `mouse`, and `event`/`moi` for the
//! game events. An events file may also sit in the match directory with a
//! `player` column.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::output::write_atomic;
use crate::error::{Error, Result};
use crate::ingest::{EventKind, Manifest, MatchRecord, PlayerRecord};
use crate::sensor::{Label, SensorId};

const MAX_DEPTH: usize = 5;
const TIME_NAMES: [&str; 8] = ["timestamp", "time", "ts", "t", "time_s", "seconds", "unix_time", "epoch"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FileKind {
    Events,
    Mouse,
    Keyboard,
    Heart,
    Gsr,
    Emg(Option<SensorId>),
    Eye,
    Imu(SensorId),
}

fn classify_file(stem: &str) -> Option<FileKind> {
    let s = stem.to_ascii_lowercase();
    let has = |k: &str| s.contains(k);
    if has("event") || has("moi") {
        Some(FileKind::Events)
    } else if has("mouse") {
        Some(FileKind::Mouse)
    } else if has("keyboard") || has("key") {
        Some(FileKind::Keyboard)
    } else if has("heart") || s == "hr" || s.starts_with("hr_") || s.ends_with("_hr") {
        Some(FileKind::Heart)
    } else if has("gsr") || has("eda") || has("electrodermal") {
        Some(FileKind::Gsr)
    } else if has("emg") || has("muscle") {
        let side = if has("left") {
            Some(SensorId::LHMA)
        } else if has("right") {
            Some(SensorId::RHMA)
        } else {
            None
        };
        Some(FileKind::Emg(side))
    } else if has("eye") || has("gaze") || has("pupil") {
        Some(FileKind::Eye)
    } else if has("imu") || has("acc") || has("gyro") {
        if has("left") {
            Some(FileKind::Imu(SensorId::LHM))
        } else if has("right") {
            Some(FileKind::Imu(SensorId::RHM))
        } else if has("chair") {
            Some(FileKind::Imu(SensorId::CM))
        } else {
            None
        }
    } else {
        None
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    out.sort();
    Ok(out)
}

fn device_files(dir: &Path) -> Result<Vec<(PathBuf, FileKind)>> {
    Ok(sorted_entries(dir)?
        .into_iter()
        .filter(|p| p.is_file() && is_csv(p))
        .filter_map(|p| {
            let kind = classify_file(p.file_stem()?.to_str()?)?;
            Some((p, kind))
        })
        .collect())
}

fn is_player_dir(dir: &Path) -> Result<bool> {
    Ok(device_files(dir)?.iter().any(|(_, k)| *k != FileKind::Events))
}

fn find_player_dirs(dir: &Path, depth: usize, out: &mut Vec<PathBuf>) -> Result<()> {
    if depth > MAX_DEPTH {
        return Ok(());
    }
    for entry in sorted_entries(dir)? {
        if !entry.is_dir() {
            continue;
        }
        if is_player_dir(&entry)? {
            out.push(entry);
        } else {
            find_player_dirs(&entry, depth + 1, out)?;
        }
    }
    Ok(())
}

/// A generic numeric table: lowercase headers, a time column, and the
/// remaining columns parsed as floats (`NaN` where unparsable).
struct Table {
    headers: Vec<String>,
    time: Vec<f64>,
    columns: Vec<Vec<f64>>,
    text: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_path(path)
            .map_err(|e| Error::parse(path, e))?;
        let all: Vec<String> = reader
            .headers()
            .map_err(|e| Error::parse(path, e))?
            .iter()
            .map(|h| h.to_ascii_lowercase())
            .collect();
        if all.len() < 2 {
            return Err(Error::parse(path, "need a time column and at least one value column"));
        }
        let time_col = TIME_NAMES
            .iter()
            .find_map(|n| all.iter().position(|h| h == n))
            .or_else(|| all.iter().position(|h| h.contains("time")))
            .unwrap_or(0);
        let headers: Vec<String> = all
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != time_col)
            .map(|(_, h)| h.clone())
            .collect();
        let mut table = Table {
            columns: vec![Vec::new(); headers.len()],
            text: vec![Vec::new(); headers.len()],
            headers,
            time: Vec::new(),
        };
        let mut skipped = 0;
        for record in reader.records() {
            let record = record.map_err(|e| Error::parse(path, e))?;
            let Some(t) = record.get(time_col).and_then(|v| v.parse::<f64>().ok()).filter(|t| t.is_finite()) else {
                skipped += 1;
                continue;
            };
            table.time.push(t);
            let mut c = 0;
            for (i, field) in record.iter().enumerate() {
                if i == time_col {
                    continue;
                }
                if c < table.columns.len() {
                    table.columns[c].push(field.parse().unwrap_or(f64::NAN));
                    table.text[c].push(field.to_string());
                }
                c += 1;
            }
            for rest in c..table.columns.len() {
                table.columns[rest].push(f64::NAN);
                table.text[rest].push(String::new());
            }
        }
        if skipped > 0 {
            log::warn!("{}: {skipped} rows without a numeric timestamp skipped", path.display());
        }
        Ok(table)
    }

    fn find(&self, keys: &[&str]) -> Vec<usize> {
        (0..self.headers.len())
            .filter(|&i| keys.iter().any(|k| self.headers[i].contains(k)))
            .collect()
    }

    fn find_exact(&self, names: &[&str]) -> Vec<usize> {
        (0..self.headers.len())
            .filter(|&i| names.contains(&self.headers[i].as_str()))
            .collect()
    }

    fn numeric(&self) -> Vec<usize> {
        (0..self.headers.len())
            .filter(|&i| self.columns[i].iter().any(|v| v.is_finite()))
            .collect()
    }

    fn column(&self, i: usize) -> Vec<(f64, f64)> {
        self.time.iter().copied().zip(self.columns[i].iter().copied()).collect()
    }

    fn magnitude(&self, cols: &[usize]) -> Vec<(f64, f64)> {
        (0..self.time.len())
            .map(|r| (self.time[r], cols.iter().map(|&c| self.columns[c][r].powi(2)).sum::<f64>().sqrt()))
            .collect()
    }

    fn mean(&self, cols: &[usize]) -> Vec<(f64, f64)> {
        (0..self.time.len())
            .map(|r| (self.time[r], cols.iter().map(|&c| self.columns[c][r]).sum::<f64>() / cols.len() as f64))
            .collect()
    }

    /// Preferred column by keyword, else the first numeric one.
    fn scalar(&self, keys: &[&str]) -> Option<Vec<(f64, f64)>> {
        let numeric = self.numeric();
        self.find(keys)
            .into_iter()
            .find(|c| numeric.contains(c))
            .or_else(|| numeric.first().copied())
            .map(|c| self.column(c))
    }
}

type Channels = BTreeMap<SensorId, Vec<(f64, f64)>>;

fn extract(kind: FileKind, table: &Table, channels: &mut Channels, notes: &mut Vec<String>) {
    let mut put = |s: SensorId, v: Option<Vec<(f64, f64)>>| match v {
        Some(v) => {
            channels.insert(s, v);
        }
        None => notes.push(format!("no usable column for {s}")),
    };
    match kind {
        FileKind::Heart => put(SensorId::HR, table.scalar(&["heart", "hr", "bpm", "value"])),
        FileKind::Gsr => put(SensorId::EA, table.scalar(&["gsr", "eda", "conductance", "value"])),
        FileKind::Emg(Some(side)) => put(side, table.scalar(&["emg", "value"])),
        FileKind::Emg(None) => {
            let left = table.find(&["left"]);
            let right = table.find(&["right"]);
            put(SensorId::LHMA, (!left.is_empty()).then(|| table.mean(&left)));
            put(SensorId::RHMA, (!right.is_empty()).then(|| table.mean(&right)));
        }
        FileKind::Eye => {
            let mut gaze = table.find(&["gaze"]);
            if gaze.is_empty() {
                gaze = table.find_exact(&["x", "y"]);
            }
            let pupil = table.find(&["pupil", "diameter"]);
            put(SensorId::GP, (!gaze.is_empty()).then(|| table.magnitude(&gaze)));
            put(SensorId::PD, (!pupil.is_empty()).then(|| table.mean(&pupil)));
        }
        FileKind::Imu(sensor) => {
            let mut cols = table.find(&["acc"]);
            if cols.is_empty() {
                cols = table.numeric();
            }
            put(sensor, (!cols.is_empty()).then(|| table.magnitude(&cols)));
        }
        FileKind::Keyboard => put(SensorId::KA, table.scalar(&["press", "count", "key", "value"])),
        FileKind::Mouse => {
            let clicks = table.find(&["click", "button"]);
            put(SensorId::MA2, clicks.first().map(|&c| table.column(c)));
            let dist = table.find(&["dist", "move", "speed"]);
            let delta = table.find_exact(&["dx", "dy"]);
            let ma1 = dist
                .first()
                .map(|&c| table.column(c))
                .or_else(|| (!delta.is_empty()).then(|| table.magnitude(&delta)));
            put(SensorId::MA1, ma1);
        }
        FileKind::Events => {}
    }
}

fn normalize_kind(raw: &str) -> Option<EventKind> {
    let s = raw.to_ascii_lowercase();
    if s.contains("assist") {
        Some(EventKind::Assist)
    } else if s.contains("death") || s.contains("died") || s.contains("dead") {
        Some(EventKind::Death)
    } else if s.contains("kill") {
        Some(EventKind::Kill)
    } else {
        None
    }
}

/// Game events from `table`, optionally restricted to rows of `player`.
fn extract_events(table: &Table, player: Option<&str>, skipped: &mut usize) -> Vec<(f64, EventKind)> {
    let kind_col = table
        .find_exact(&["event", "kind", "type", "event_type", "name"])
        .first()
        .copied()
        .or_else(|| table.find(&["event"]).first().copied());
    let Some(kind_col) = kind_col else {
        return Vec::new();
    };
    let player_col = table.find(&["player"]).first().copied();
    let mut out = Vec::new();
    for r in 0..table.time.len() {
        if let (Some(p), Some(c)) = (player, player_col) {
            if table.text[c][r] != p {
                continue;
            }
        }
        match normalize_kind(&table.text[kind_col][r]) {
            Some(k) => out.push((table.time[r], k)),
            None => *skipped += 1,
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn parse_team(value: &str) -> Option<Label> {
    let v = value.to_ascii_lowercase();
    if v.contains("amateur") || v == "ama" || v == "0" {
        Some(Label::Amateur)
    } else if v.contains("pro") || v == "1" {
        Some(Label::Professional)
    } else {
        None
    }
}

fn read_labels(input: &Path) -> Result<BTreeMap<String, Label>> {
    let mut labels = BTreeMap::new();
    for path in sorted_entries(input)? {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("").to_ascii_lowercase();
        if !(path.is_file() && is_csv(&path)) {
            continue;
        }
        if !(name.contains("meta") || name.contains("label") || name.contains("team")) {
            continue;
        }
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_path(&path)
            .map_err(|e| Error::parse(&path, e))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| Error::parse(&path, e))?
            .iter()
            .map(|h| h.to_ascii_lowercase())
            .collect();
        let match_col = headers.iter().position(|h| h.contains("match"));
        let label_col = headers
            .iter()
            .position(|h| ["team", "label", "skill", "level", "class"].iter().any(|k| h.contains(k)));
        let (Some(mc), Some(lc)) = (match_col, label_col) else {
            continue;
        };
        for record in reader.records() {
            let record = record.map_err(|e| Error::parse(&path, e))?;
            if let (Some(m), Some(l)) = (record.get(mc), record.get(lc).and_then(parse_team)) {
                labels.insert(m.to_string(), l);
            }
        }
    }
    Ok(labels)
}

fn label_from_path(dir: &Path, input: &Path) -> Option<Label> {
    dir.ancestors()
        .take_while(|a| *a != input)
        .filter_map(|a| a.file_name()?.to_str())
        .find_map(parse_team)
}

fn write_series(path: &Path, header: [&str; 2], rows: impl Iterator<Item = [String; 2]>) -> Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for [a, b] in rows {
        text.push_str(&a);
        text.push(',');
        text.push_str(&b);
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

#[derive(Debug, Clone, Serialize)]
pub struct AdaptReport {
    pub manifest: PathBuf,
    pub matches: usize,
    pub players: usize,
    pub warnings: Vec<String>,
}

fn dir_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Scans `input`, converts every recognised device file and writes a
/// manifest at `output` whose data files live next to it under `data/`.
pub fn adapt_dataset(input: &Path, output: &Path) -> Result<AdaptReport> {
    if !input.is_dir() {
        return Err(Error::UnrecognizedLayout {
            path: input.to_path_buf(),
            found: "not a directory".into(),
        });
    }
    let mut player_dirs = Vec::new();
    find_player_dirs(input, 0, &mut player_dirs)?;
    if player_dirs.is_empty() {
        let found: Vec<String> = sorted_entries(input)?.iter().map(|p| dir_name(p)).collect();
        return Err(Error::UnrecognizedLayout {
            path: input.to_path_buf(),
            found: if found.is_empty() {
                "an empty directory".into()
            } else {
                format!("no player directories with device CSVs among: {}", found.join(", "))
            },
        });
    }
    let labels = read_labels(input)?;
    let mut by_match: BTreeMap<PathBuf, Vec<PathBuf>> = BTreeMap::new();
    for p in player_dirs {
        let parent = p.parent().unwrap_or(input).to_path_buf();
        by_match.entry(parent).or_default().push(p);
    }

    let base = output.parent().unwrap_or(Path::new(""));
    let mut warnings = Vec::new();
    let mut warn = |msg: String| {
        log::warn!("{msg}");
        warnings.push(msg);
    };
    let mut matches = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (match_dir, players) in &by_match {
        let match_id = dir_name(match_dir);
        if !seen_ids.insert(match_id.clone()) {
            warn(format!("duplicate match directory name `{match_id}` skipped"));
            continue;
        }
        let Some(label) = labels.get(&match_id).copied().or_else(|| label_from_path(match_dir, input)) else {
            warn(format!("match `{match_id}`: no team label found, skipped"));
            continue;
        };
        let match_events: Vec<PathBuf> = device_files(match_dir)?
            .into_iter()
            .filter(|(_, k)| *k == FileKind::Events)
            .map(|(p, _)| p)
            .collect();
        let mut records = Vec::new();
        for player_dir in players {
            let player_id = dir_name(player_dir);
            let mut channels = Channels::new();
            let mut events = Vec::new();
            let mut skipped_events = 0;
            for (path, kind) in device_files(player_dir)? {
                let table = match Table::read(&path) {
                    Ok(t) => t,
                    Err(e) => {
                        warn(format!("{}: unreadable ({e}), skipped", path.display()));
                        continue;
                    }
                };
                if kind == FileKind::Events {
                    events.extend(extract_events(&table, None, &mut skipped_events));
                    continue;
                }
                let mut notes = Vec::new();
                extract(kind, &table, &mut channels, &mut notes);
                for n in notes {
                    warn(format!("{}: {n}", path.display()));
                }
            }
            if events.is_empty() {
                for path in &match_events {
                    if let Ok(table) = Table::read(path) {
                        events.extend(extract_events(&table, Some(&player_id), &mut skipped_events));
                    }
                }
            }
            if skipped_events > 0 {
                warn(format!(
                    "{match_id}/{player_id}: {skipped_events} events that are not kill/death/assist ignored"
                ));
            }
            events.sort_by(|a, b| a.0.total_cmp(&b.0));
            let rel_dir = PathBuf::from("data").join(&match_id).join(&player_id);
            let mut sensor_paths = BTreeMap::new();
            let mut missing = Vec::new();
            for sensor in SensorId::ALL {
                match channels.get(&sensor) {
                    Some(samples) => {
                        let rel = rel_dir.join(format!("{sensor}.csv"));
                        write_series(
                            &base.join(&rel),
                            ["timestamp", "value"],
                            samples.iter().map(|(t, v)| [t.to_string(), v.to_string()]),
                        )?;
                        sensor_paths.insert(sensor, rel);
                    }
                    None => missing.push(sensor),
                }
            }
            if !missing.is_empty() {
                warn(format!("{match_id}/{player_id}: no data for {missing:?}"));
            }
            let moi = rel_dir.join("moi.csv");
            write_series(
                &base.join(&moi),
                ["timestamp", "kind"],
                events.iter().map(|(t, k)| [t.to_string(), k.as_str().to_string()]),
            )?;
            records.push(PlayerRecord {
                player_id,
                sensor_paths,
                missing_sensors: missing,
                moi_path: moi,
                aggregation: BTreeMap::new(),
            });
        }
        matches.push(MatchRecord {
            match_id,
            team_label: label,
            players: records,
        });
    }
    if matches.is_empty() {
        return Err(Error::UnrecognizedLayout {
            path: input.to_path_buf(),
            found: format!("{} match directories, none with a team label", by_match.len()),
        });
    }
    let manifest = Manifest { matches };
    manifest.validate()?;
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::parse(output, e))?;
    write_atomic(output, text.as_bytes())?;
    Ok(AdaptReport {
        manifest: output.to_path_buf(),
        matches: manifest.matches.len(),
        players: manifest.player_count(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_classification() {
        assert_eq!(classify_file("imu_left_hand"), Some(FileKind::Imu(SensorId::LHM)));
        assert_eq!(classify_file("IMU_chair"), Some(FileKind::Imu(SensorId::CM)));
        assert_eq!(classify_file("eye_tracker"), Some(FileKind::Eye));
        assert_eq!(classify_file("heart_rate"), Some(FileKind::Heart));
        assert_eq!(classify_file("emg_right"), Some(FileKind::Emg(Some(SensorId::RHMA))));
        assert_eq!(classify_file("mouse"), Some(FileKind::Mouse));
        assert_eq!(classify_file("game_events"), Some(FileKind::Events));
        assert_eq!(classify_file("notes"), None);
    }

    #[test]
    fn event_names_normalized() {
        assert_eq!(normalize_kind("KILL"), Some(EventKind::Kill));
        assert_eq!(normalize_kind("player_died"), Some(EventKind::Death));
        assert_eq!(normalize_kind("Assist"), Some(EventKind::Assist));
        assert_eq!(normalize_kind("tower_destroyed"), None);
    }

    #[test]
    fn empty_directory_is_a_layout_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = adapt_dataset(dir.path(), &dir.path().join("m.json")).unwrap_err();
        assert!(matches!(err, Error::UnrecognizedLayout { .. }));
    }
}
