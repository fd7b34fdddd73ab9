use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::classify::{ClassifierKind, ForestParams, Hyperparams, KnnParams, SvmParams};
use crate::error::{Error, Result};
use crate::evaluate::FoldScheme;
use crate::ingest::Preprocessing;
use crate::pipeline::GroupingOptions;
use crate::selection::{CnCvParams, InnerFoldData, SelectionMode};
use crate::seed;
use crate::ste::SteParams;
use crate::windowing::EventFilter;

pub const MAX_TD: u32 = 10;

/// Fixed half window in seconds, or `"tune"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdSetting {
    Fixed(u32),
    Tune,
}

impl fmt::Display for TdSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TdSetting::Fixed(td) => write!(f, "{td}"),
            TdSetting::Tune => f.write_str("tune"),
        }
    }
}

impl std::str::FromStr for TdSetting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("tune") {
            return Ok(TdSetting::Tune);
        }
        s.parse::<u32>()
            .map(TdSetting::Fixed)
            .map_err(|_| Error::invalid("window.td", format!("expected 1..={MAX_TD} or \"tune\", got {s:?}")))
    }
}

impl Serialize for TdSetting {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TdSetting::Fixed(td) => s.serialize_u32(*td),
            TdSetting::Tune => s.serialize_str("tune"),
        }
    }
}

impl<'de> Deserialize<'de> for TdSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => u32::try_from(v)
                .map(TdSetting::Fixed)
                .map_err(|_| serde::de::Error::custom(format!("window.td = {v} is out of range"))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    pub td: TdSetting,
    /// Range swept when `td = "tune"` and by `report`.
    pub td_min: u32,
    pub td_max: u32,
    pub min_events: usize,
    pub max_events: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsequences: Option<usize>,
}

impl Default for WindowConfig {
    fn default() -> Self {
        let g = GroupingOptions::default();
        WindowConfig {
            td: TdSetting::Fixed(4),
            td_min: 1,
            td_max: MAX_TD,
            min_events: g.min_events,
            max_events: g.max_events,
            subsequences: g.subsequences,
        }
    }
}

impl WindowConfig {
    pub fn grouping(&self) -> GroupingOptions {
        GroupingOptions {
            min_events: self.min_events,
            max_events: self.max_events,
            subsequences: self.subsequences,
        }
    }

    pub fn td_values(&self) -> Vec<u32> {
        (self.td_min..=self.td_max).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CnCvConfig {
    pub k_train: usize,
    pub inner_folds: usize,
    pub n_inner: usize,
    pub n_consensus: usize,
    pub inner_data: InnerFoldData,
}

impl Default for CnCvConfig {
    fn default() -> Self {
        let p = CnCvParams::default();
        CnCvConfig {
            k_train: p.k_train,
            inner_folds: p.inner_folds,
            n_inner: p.n_inner,
            n_consensus: p.n_consensus,
            inner_data: p.inner_data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub svm: SvmParams,
    pub rf: ForestParams,
    pub knn: KnnParams,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            kind: ClassifierKind::Svm,
            svm: SvmParams::default(),
            rf: ForestParams::default(),
            knn: KnnParams::default(),
        }
    }
}

impl ClassifierConfig {
    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            svm: self.svm.clone(),
            rf: self.rf.clone(),
            knn: self.knn.clone(),
        }
    }
}

/// Everything a command needs. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    /// `all`, or kinds joined by `+`, e.g. `kill+assist`.
    pub events: String,
    pub k_all: usize,
    pub fold_scheme: FoldScheme,
    /// Downsample the majority class before selection and evaluation.
    pub balance: bool,
    pub selection_mode: SelectionMode,
    pub preprocessing: Preprocessing,
    pub window: WindowConfig,
    pub ste: SteParams,
    pub cncv: CnCvConfig,
    pub classifier: ClassifierConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            manifest: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
            threads: 0,
            events: "all".into(),
            k_all: 5,
            fold_scheme: FoldScheme::Stratified,
            balance: true,
            selection_mode: SelectionMode::WholeDataset,
            preprocessing: Preprocessing::default(),
            window: WindowConfig::default(),
            ste: SteParams::default(),
            cncv: CnCvConfig::default(),
            classifier: ClassifierConfig::default(),
        }
    }
}

/// Seed streams derived from the top-level seed.
pub mod streams {
    pub const CNCV: u64 = 1;
    pub const BALANCE: u64 = 2;
    pub const FOLDS: u64 = 3;
    pub const MODELS: u64 = 4;
}

impl PipelineConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string().trim()))?;
        let base = origin.parent().unwrap_or(Path::new(""));
        if let Some(m) = cfg.manifest.as_mut() {
            if m.is_relative() {
                *m = base.join(&*m);
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::parse("<config>", e))
    }

    pub fn event_filter(&self) -> Result<EventFilter> {
        self.events
            .parse()
            .map_err(|e: Error| Error::invalid("events", format!("{:?}: {e}", self.events)))
    }

    pub fn cncv_params(&self) -> CnCvParams {
        CnCvParams {
            k_train: self.cncv.k_train,
            inner_folds: self.cncv.inner_folds,
            n_inner: self.cncv.n_inner,
            n_consensus: self.cncv.n_consensus,
            inner_data: self.cncv.inner_data,
            seed: seed::derive(self.seed, &[streams::CNCV]),
        }
    }

    pub fn balance_seed(&self) -> Option<u64> {
        self.balance.then(|| seed::derive(self.seed, &[streams::BALANCE]))
    }

    pub fn fold_seed(&self) -> u64 {
        seed::derive(self.seed, &[streams::FOLDS])
    }

    pub fn model_seed(&self) -> u64 {
        seed::derive(self.seed, &[streams::MODELS])
    }

    pub fn manifest_path(&self) -> Result<&Path> {
        self.manifest
            .as_deref()
            .ok_or_else(|| Error::invalid("manifest", "no manifest path configured"))
    }

    /// Checks every range constraint, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        self.event_filter()?;
        if self.k_all < 2 {
            return Err(Error::invalid("k_all", "must be at least 2"));
        }
        self.preprocessing.validate()?;
        let w = &self.window;
        if let TdSetting::Fixed(td) = w.td {
            if !(1..=MAX_TD).contains(&td) {
                return Err(Error::invalid("window.td", format!("{td} not in 1..={MAX_TD}")));
            }
        }
        if w.td_min == 0 || w.td_min > w.td_max || w.td_max > MAX_TD {
            return Err(Error::invalid(
                "window.td_min",
                format!("need 1 <= td_min <= td_max <= {MAX_TD}, got {}..={}", w.td_min, w.td_max),
            ));
        }
        w.grouping().validate()?;
        self.ste.validate()?;
        let c = &self.cncv;
        if c.k_train < 2 {
            return Err(Error::invalid("cncv.k_train", "must be at least 2"));
        }
        if c.inner_folds < 2 {
            return Err(Error::invalid("cncv.inner_folds", "must be at least 2"));
        }
        if c.n_consensus == 0 || c.n_consensus > c.n_inner {
            return Err(Error::invalid("cncv.n_consensus", "must lie in 1..=n_inner"));
        }
        if c.n_inner > crate::sensor::N_FEATURES {
            return Err(Error::invalid("cncv.n_inner", "exceeds the 144 STE features"));
        }
        self.classifier.hyperparams().validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_toml().unwrap();
        let back = PipelineConfig::from_toml(&text, Path::new("cfg.toml")).unwrap();
        assert_eq!(back, cfg);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn td_accepts_int_or_tune() {
        let cfg = PipelineConfig::from_toml("[window]\ntd = \"tune\"\n", Path::new("c.toml")).unwrap();
        assert_eq!(cfg.window.td, TdSetting::Tune);
        let cfg = PipelineConfig::from_toml("[window]\ntd = 7\n", Path::new("c.toml")).unwrap();
        assert_eq!(cfg.window.td, TdSetting::Fixed(7));
        assert!(PipelineConfig::from_toml("[window]\ntd = \"wide\"\n", Path::new("c.toml")).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml("sede = 3\n", Path::new("c.toml")).is_err());
        assert!(PipelineConfig::from_toml("[ste]\nn = 3\n", Path::new("c.toml")).is_err());
    }

    fn invalid_field(text: &str) -> String {
        let cfg = PipelineConfig::from_toml(text, Path::new("c.toml")).unwrap();
        match cfg.validate() {
            Err(Error::InvalidParameter { name, .. }) => name.to_string(),
            other => panic!("expected invalid parameter, got {other:?}"),
        }
    }

    #[test]
    fn validation_names_the_field() {
        assert_eq!(invalid_field("k_all = 1\n"), "k_all");
        assert_eq!(invalid_field("[window]\ntd = 11\n"), "window.td");
        assert_eq!(invalid_field("[ste]\nm = 9\n"), "ste.m");
        assert_eq!(invalid_field("[preprocessing]\nema_alpha = 0.0\n"), "preprocessing.ema_alpha");
        assert_eq!(invalid_field("[cncv]\nn_consensus = 30\n"), "cncv.n_consensus");
        assert_eq!(invalid_field("[classifier.knn]\nk = 0\n"), "classifier.knn.k");
        assert_eq!(invalid_field("events = \"headshot\"\n"), "events");
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let cfg = PipelineConfig::from_toml("manifest = \"m.json\"\n", Path::new("/a/b/c.toml")).unwrap();
        assert_eq!(cfg.manifest.unwrap(), PathBuf::from("/a/b/m.json"));
        assert_eq!(cfg.output_dir, PathBuf::from("/a/b/out"));
    }
}
