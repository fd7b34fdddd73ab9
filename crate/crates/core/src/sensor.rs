//! Sensor identifiers, class labels and feature indexing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const N_SENSORS: usize = 12;
/// Number of directed sensor pairs, including the diagonal.
pub const N_FEATURES: usize = N_SENSORS * N_SENSORS;

/// The twelve sensor channels. Declaration order is the canonical order used
/// for every feature-matrix index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SensorId {
    /// Left hand movements (IMU).
    LHM,
    /// Right hand movements (IMU).
    RHM,
    /// Chair movements (IMU).
    CM,
    /// Gaze position (eye tracker).
    GP,
    /// Pupil diameter (eye tracker).
    PD,
    /// Electrodermal activity.
    EA,
    /// Left hand muscle activity (EMG).
    LHMA,
    /// Right hand muscle activity (EMG).
    RHMA,
    /// Heart rate.
    HR,
    /// Keyboard activity, buttons pressed in the last 5 seconds.
    KA,
    /// Mouse distance in the last 5 seconds.
    MA1,
    /// Mouse clicks in the last 5 seconds.
    MA2,
}

impl SensorId {
    pub const ALL: [SensorId; N_SENSORS] = [
        SensorId::LHM,
        SensorId::RHM,
        SensorId::CM,
        SensorId::GP,
        SensorId::PD,
        SensorId::EA,
        SensorId::LHMA,
        SensorId::RHMA,
        SensorId::HR,
        SensorId::KA,
        SensorId::MA1,
        SensorId::MA2,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<SensorId> {
        Self::ALL.get(index).copied()
    }

    pub fn symbol(self) -> &'static str {
        match self {
            SensorId::LHM => "LHM",
            SensorId::RHM => "RHM",
            SensorId::CM => "CM",
            SensorId::GP => "GP",
            SensorId::PD => "PD",
            SensorId::EA => "EA",
            SensorId::LHMA => "LHMA",
            SensorId::RHMA => "RHMA",
            SensorId::HR => "HR",
            SensorId::KA => "KA",
            SensorId::MA1 => "MA1",
            SensorId::MA2 => "MA2",
        }
    }

    /// Count-like sensors whose per-second value is a total rather than a mean.
    pub fn is_count(self) -> bool {
        matches!(self, SensorId::KA | SensorId::MA1 | SensorId::MA2)
    }
}

impl fmt::Display for SensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for SensorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SensorId::ALL
            .iter()
            .copied()
            .find(|id| id.symbol().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownSensor(s.to_string()))
    }
}

/// Row-major index of the directed pair `src -> dst`.
pub fn feature_index(src: SensorId, dst: SensorId) -> usize {
    src.index() * N_SENSORS + dst.index()
}

pub fn feature_pair(index: usize) -> (SensorId, SensorId) {
    assert!(index < N_FEATURES, "feature index {index} out of range");
    (
        SensorId::ALL[index / N_SENSORS],
        SensorId::ALL[index % N_SENSORS],
    )
}

/// Column name of a feature, e.g. `STE_GP_to_KA`.
pub fn feature_name(index: usize) -> String {
    let (src, dst) = feature_pair(index);
    format!("STE_{src}_to_{dst}")
}

pub fn feature_names() -> Vec<String> {
    (0..N_FEATURES).map(feature_name).collect()
}

pub fn parse_feature_name(name: &str) -> Option<usize> {
    let rest = name.strip_prefix("STE_")?;
    let (src, dst) = rest.split_once("_to_")?;
    Some(feature_index(src.parse().ok()?, dst.parse().ok()?))
}

/// Player skill class. `Professional` is the positive class for
/// sensitivity/specificity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Amateur,
    Professional,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Professional
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Amateur => "Amateur",
            Label::Professional => "Professional",
        }
    }

    /// `0` for amateur, `1` for professional.
    pub fn code(self) -> u8 {
        self as u8
    }

    /// `-1` for amateur, `+1` for professional.
    pub fn sign(self) -> f64 {
        match self {
            Label::Amateur => -1.0,
            Label::Professional => 1.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "amateur" | "amateurs" | "amat" | "0" => Ok(Label::Amateur),
            "professional" | "professionals" | "pro" | "pros" | "1" => Ok(Label::Professional),
            other => Err(Error::invalid("label", format!("unknown label `{other}`"))),
        }
    }
}
