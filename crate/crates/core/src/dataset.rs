//! Labeled feature matrices and the feature CSV format.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor::Label;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub player_id: String,
    pub match_id: String,
    pub subsequence: usize,
}

impl Provenance {
    pub fn new(player_id: impl Into<String>, match_id: impl Into<String>, subsequence: usize) -> Self {
        Provenance {
            player_id: player_id.into(),
            match_id: match_id.into(),
            subsequence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: Label,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, samples: Vec<LabeledSample>) -> Result<Self> {
        let ds = Dataset {
            feature_names,
            samples,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Feature lengths match the header and provenance is unique.
    pub fn validate(&self) -> Result<()> {
        let width = self.feature_names.len();
        let mut seen = BTreeSet::new();
        for s in &self.samples {
            if s.features.len() != width {
                return Err(Error::LengthMismatch {
                    expected: width,
                    actual: s.features.len(),
                });
            }
            if !seen.insert(&s.provenance) {
                return Err(Error::DuplicateId(format!(
                    "sample ({}, {}, {})",
                    s.provenance.player_id, s.provenance.match_id, s.provenance.subsequence
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn rows(&self) -> Vec<&[f64]> {
        self.samples.iter().map(|s| s.features.as_slice()).collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// `(amateur, professional)` counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let pro = self.samples.iter().filter(|s| s.label.is_positive()).count();
        (self.samples.len() - pro, pro)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    /// Keeps the samples whose provenance is in `keep`, in `keep`'s order.
    pub fn restrict_to(&self, keep: &[Provenance]) -> Result<Dataset> {
        let by_key: std::collections::HashMap<&Provenance, &LabeledSample> =
            self.samples.iter().map(|s| (&s.provenance, s)).collect();
        let samples = keep
            .iter()
            .map(|p| {
                by_key.get(p).map(|s| (*s).clone()).ok_or_else(|| {
                    Error::invalid("provenance", format!("sample {p:?} not present"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            feature_names: self.feature_names.clone(),
            samples,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let to_err = |e: csv::Error| Error::parse("<feature csv>", e);
        let mut header = vec![
            "player_id".to_string(),
            "match_id".to_string(),
            "subseq".to_string(),
            "label".to_string(),
        ];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header).map_err(to_err)?;
        for s in &self.samples {
            let mut row = vec![
                s.provenance.player_id.clone(),
                s.provenance.match_id.clone(),
                s.provenance.subsequence.to_string(),
                s.label.to_string(),
            ];
            // `Display` for f64 is the shortest representation that parses back exactly.
            row.extend(s.features.iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::io("<feature csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<Dataset> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = r.headers().map_err(|e| Error::parse(origin, e))?.clone();
        let fixed = ["player_id", "match_id", "subseq", "label"];
        if header.len() < fixed.len() || header.iter().zip(fixed).any(|(h, f)| h != f) {
            return Err(Error::parse(origin, "expected `player_id,match_id,subseq,label,...` header"));
        }
        let feature_names: Vec<String> = header.iter().skip(fixed.len()).map(str::to_string).collect();
        let mut samples = Vec::new();
        for (row, record) in r.records().enumerate() {
            let record = record.map_err(|e| Error::parse(origin, e))?;
            let line = row + 2;
            let bad = |what: &str| Error::parse(origin, format!("line {line}: bad {what}"));
            let subsequence = record[2].parse().map_err(|_| bad("subseq"))?;
            let label: Label = record[3].parse().map_err(|_| bad("label"))?;
            let features = record
                .iter()
                .skip(fixed.len())
                .map(|v| v.parse::<f64>().map_err(|_| bad("feature value")))
                .collect::<Result<Vec<_>>>()?;
            samples.push(LabeledSample {
                features,
                label,
                provenance: Provenance::new(&record[0], &record[1], subsequence),
            });
        }
        Dataset::new(feature_names, samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = Dataset::new(
            vec!["a".into(), "b".into()],
            vec![
                LabeledSample {
                    features: vec![0.1 + 0.2, 1e-300],
                    label: Label::Professional,
                    provenance: Provenance::new("p1", "m1", 0),
                },
                LabeledSample {
                    features: vec![-3.0, std::f64::consts::PI],
                    label: Label::Amateur,
                    provenance: Provenance::new("p2", "m1", 1),
                },
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("player_id,match_id,subseq,label,a,b\n"));
        let back = Dataset::read_csv(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn duplicate_provenance_rejected() {
        let s = LabeledSample {
            features: vec![1.0],
            label: Label::Amateur,
            provenance: Provenance::new("p", "m", 0),
        };
        assert!(Dataset::new(vec!["a".into()], vec![s.clone(), s]).is_err());
    }
}
