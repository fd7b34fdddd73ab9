use std::path::{Path, PathBuf};

use anyhow::Context as _;
use serde::Serialize;
use serde_json::json;

use super::adapt::adapt_dataset;
use super::config::{PipelineConfig, TdSetting};
use super::output::{write_atomic, write_json, write_with};
use super::{Cli, Command, GlobalArgs};
use crate::classify::{ClassifierKind, Hyperparams};
use crate::dataset::Dataset;
use crate::error::Error;
use crate::evaluate::{
    crossval_evaluate, evaluate_with_consensus, fold_consensus, make_folds, pca_project, td_sweep, tune_td,
    CvReport, FoldAssignment, FoldScheme, MeanStd, SweepSettings, TdDatasets, TdTuningResult,
};
use crate::ingest::{load_manifest, Manifest};
use crate::pipeline::{Corpus, CorpusSource};
use crate::selection::{rank_distinguishing_features, DistinguishingFeatures, SelectionMode};
use crate::sensor::feature_name;
use crate::synthetic::{write_corpus, write_raw_layout, CorpusSpec};
use crate::windowing::EventFilter;

pub fn load_config(global: &GlobalArgs) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            PipelineConfig::from_toml(&text, path)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(o) = &global.out {
        cfg.output_dir = o.clone();
    }
    if let Some(t) = global.threads {
        cfg.threads = t;
    }
    if let Some(e) = &global.events {
        cfg.events = e.clone();
    }
    if let Some(c) = global.classifier {
        cfg.classifier.kind = c;
    }
    if let Some(td) = global.td {
        cfg.window.td = td;
    }
    if let Some(m) = &global.manifest {
        cfg.manifest = Some(m.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads(threads: usize) {
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        log::debug!("thread pool already initialised: {e}");
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::AdaptDataset { input, output } => {
            init_threads(cli.global.threads.unwrap_or(0));
            let report = adapt_dataset(input, output)?;
            println!(
                "wrote {} ({} matches, {} players, {} warnings)",
                report.manifest.display(),
                report.matches,
                report.players,
                report.warnings.len()
            );
            Ok(())
        }
        Command::SynthFixture {
            output,
            raw,
            matches,
            players,
            events_per_player,
            duration,
        } => {
            let spec = CorpusSpec {
                matches: *matches,
                players_per_match: *players,
                events_per_player: *events_per_player,
                duration_s: *duration,
                seed: cli.global.seed.unwrap_or(0),
                ..CorpusSpec::default()
            };
            if *raw {
                write_raw_layout(output, &spec)?;
                println!("wrote raw layout under {}", output.display());
            } else {
                let manifest = write_corpus(output, &spec)?;
                println!("wrote {}", manifest.display());
            }
            Ok(())
        }
        command => {
            let cfg = load_config(&cli.global)?;
            init_threads(cfg.threads);
            let ctx = Ctx::new(cfg)?;
            match command {
                Command::Features => ctx.features(),
                Command::TuneTd => ctx.tune_td(),
                Command::Select => ctx.select(),
                Command::Evaluate => ctx.evaluate(),
                Command::Loso => ctx.loso(),
                Command::Pca => ctx.pca(),
                Command::Report => ctx.report(),
                Command::AdaptDataset { .. } | Command::SynthFixture { .. } => unreachable!(),
            }?;
            ctx.echo_config()
        }
    }
}

struct Ctx {
    cfg: PipelineConfig,
    corpus: Corpus,
    filter: EventFilter,
    hyper: Hyperparams,
}

struct Resolved {
    data: TdDatasets,
    td: u32,
    tuning: Option<TdTuningResult>,
    folds: FoldAssignment,
}

impl Resolved {
    fn dataset(&self) -> &Dataset {
        self.data.get(self.td).expect("resolved t_d is among the computed ones")
    }
}

fn names(indices: &[usize]) -> Vec<String> {
    indices.iter().map(|&i| feature_name(i)).collect()
}

#[derive(Serialize)]
struct RankedEntry {
    feature: String,
    index: usize,
    score: f64,
    frequency: usize,
}

fn ranking_json(r: &DistinguishingFeatures) -> serde_json::Value {
    let features: Vec<RankedEntry> = r
        .ranking
        .iter()
        .map(|e| RankedEntry {
            feature: feature_name(e.index),
            index: e.index,
            score: e.score,
            frequency: e.frequency,
        })
        .collect();
    json!({
        "mode": r.mode,
        "features": features,
        "sets": r.sets.iter().map(|s| names(s)).collect::<Vec<_>>(),
        "fallback": r.fallback,
    })
}

fn metric_json(m: &MeanStd) -> serde_json::Value {
    json!({ "mean": m.mean, "std": m.std, "n": m.n })
}

impl Ctx {
    fn new(cfg: PipelineConfig) -> anyhow::Result<Ctx> {
        let manifest_path = cfg.manifest_path()?.to_path_buf();
        let manifest: Manifest = load_manifest(&manifest_path).with_context(|| format!("loading {}", manifest_path.display()))?;
        let corpus = Corpus::load(&manifest, &cfg.preprocessing)?;
        Ok(Ctx {
            filter: cfg.event_filter()?,
            hyper: cfg.classifier.hyperparams(),
            cfg,
            corpus,
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn echo_config(&self) -> anyhow::Result<()> {
        write_atomic(&self.out("config.effective.toml"), self.cfg.to_toml()?.as_bytes())?;
        Ok(())
    }

    fn source(&self, filter: &EventFilter) -> CorpusSource<'_> {
        CorpusSource {
            corpus: &self.corpus,
            filter: filter.clone(),
            grouping: self.cfg.window.grouping(),
            ste: self.cfg.ste,
        }
    }

    fn td_data(&self, filter: &EventFilter, tds: &[u32]) -> anyhow::Result<TdDatasets> {
        let data = TdDatasets::build(&self.source(filter), tds, self.cfg.balance_seed())
            .with_context(|| format!("building {filter} datasets"))?;
        Ok(data)
    }

    fn folds(&self, ds: &Dataset, scheme: FoldScheme) -> anyhow::Result<FoldAssignment> {
        make_folds(ds, self.cfg.k_all, scheme, self.cfg.fold_seed())
            .with_context(|| format!("planning {scheme} folds over {} samples", ds.len()))
    }

    fn tune(&self, data: &TdDatasets, folds: &FoldAssignment, kind: ClassifierKind) -> anyhow::Result<TdTuningResult> {
        Ok(tune_td(data, folds, kind, &self.hyper, &self.cfg.cncv_params(), self.cfg.model_seed())?)
    }

    fn resolve(&self, filter: &EventFilter, td: TdSetting) -> anyhow::Result<Resolved> {
        match td {
            TdSetting::Fixed(td) => {
                let data = self.td_data(filter, &[td])?;
                let folds = self.folds(data.samples(), self.cfg.fold_scheme)?;
                Ok(Resolved {
                    data,
                    td,
                    tuning: None,
                    folds,
                })
            }
            TdSetting::Tune => {
                let data = self.td_data(filter, &self.cfg.window.td_values())?;
                let folds = self.folds(data.samples(), self.cfg.fold_scheme)?;
                let tuning = self.tune(&data, &folds, self.cfg.classifier.kind)?;
                Ok(Resolved {
                    td: tuning.averaged_td,
                    data,
                    tuning: Some(tuning),
                    folds,
                })
            }
        }
    }

    fn tuning_json(&self, filter: &EventFilter, kind: ClassifierKind, t: &TdTuningResult, data: &TdDatasets) -> serde_json::Value {
        json!({
            "event_filter": filter.to_string(),
            "classifier": kind,
            "td_values": t.td_values,
            "skipped_td": data.skipped,
            "per_fold_best": t.per_fold_best,
            "averaged_td": t.averaged_td,
            "accuracies": t.accuracies,
        })
    }

    fn cv_json(&self, filter: &EventFilter, td: u32, folds: &FoldAssignment, ds: &Dataset, report: &CvReport) -> serde_json::Value {
        let (amateur, professional) = ds.class_counts();
        let per_fold: Vec<serde_json::Value> = report
            .folds
            .iter()
            .map(|f| {
                let mut v = json!({
                    "fold": f.fold,
                    "n_test": f.test_indices.len(),
                    "confusion": f.confusion,
                    "consensus": names(&f.consensus.consensus),
                });
                if let Some(players) = folds.held_out_players.get(f.fold) {
                    v["held_out_players"] = json!(players);
                }
                v
            })
            .collect();
        let kind = report.folds.first().map(|f| f.model.kind());
        json!({
            "classifier": kind,
            "event_filter": filter.to_string(),
            "td": td,
            "fold_scheme": folds.scheme,
            "n_folds": folds.n_folds(),
            "n_samples": ds.len(),
            "class_counts": { "amateur": amateur, "professional": professional },
            "accuracy": metric_json(&report.metrics.accuracy),
            "sensitivity": metric_json(&report.metrics.sensitivity),
            "specificity": metric_json(&report.metrics.specificity),
            "pooled_accuracy": report.metrics.pooled_accuracy(),
            "folds": per_fold,
        })
    }

    fn write_models(&self, dir: &str, report: &CvReport) -> anyhow::Result<()> {
        for f in &report.folds {
            let path = self.out(dir).join(format!("fold{}_{}.json", f.fold, f.model.kind()));
            write_atomic(&path, f.model.to_json()?.as_bytes())?;
        }
        Ok(())
    }

    fn features(&self) -> anyhow::Result<()> {
        let TdSetting::Fixed(td) = self.cfg.window.td else {
            return Err(Error::invalid("window.td", "the features command needs a fixed t_d").into());
        };
        let ds = self
            .corpus
            .features(td, &self.filter, &self.cfg.window.grouping(), &self.cfg.ste)?;
        if ds.is_empty() {
            log::warn!("no event group met the minimum size; the feature matrix is empty");
        }
        write_with(&self.out("features.csv"), |buf| ds.write_csv(buf))?;
        Ok(())
    }

    fn tune_td(&self) -> anyhow::Result<()> {
        let data = self.td_data(&self.filter, &self.cfg.window.td_values())?;
        let folds = self.folds(data.samples(), self.cfg.fold_scheme)?;
        let kind = self.cfg.classifier.kind;
        let tuning = self.tune(&data, &folds, kind)?;
        write_json(&self.out("td_tuning.json"), &self.tuning_json(&self.filter, kind, &tuning, &data))?;
        Ok(())
    }

    fn select(&self) -> anyhow::Result<()> {
        let r = self.resolve(&self.filter, self.cfg.window.td)?;
        let ds = r.dataset();
        let rows = ds.rows();
        let ranking = rank_distinguishing_features(
            &rows,
            &ds.labels(),
            self.cfg.selection_mode,
            &self.cfg.cncv_params(),
            Some(&r.folds),
        )?;
        let mut v = ranking_json(&ranking);
        v["event_filter"] = json!(self.filter.to_string());
        v["td"] = json!(r.td);
        v["n_samples"] = json!(ds.len());
        write_json(&self.out("ranking.json"), &v)?;
        Ok(())
    }

    fn evaluate(&self) -> anyhow::Result<()> {
        let r = self.resolve(&self.filter, self.cfg.window.td)?;
        let ds = r.dataset();
        let kind = self.cfg.classifier.kind;
        let report = crossval_evaluate(ds, kind, &self.hyper, &self.cfg.cncv_params(), &r.folds, self.cfg.model_seed())?;
        let mut v = self.cv_json(&self.filter, r.td, &r.folds, ds, &report);
        if let Some(t) = &r.tuning {
            v["td_tuning"] = self.tuning_json(&self.filter, kind, t, &r.data);
            write_json(&self.out("td_tuning.json"), &v["td_tuning"])?;
        }
        write_json(&self.out("metrics.json"), &v)?;
        self.write_models("models", &report)
    }

    fn loso(&self) -> anyhow::Result<()> {
        let r = self.resolve(&self.filter, self.cfg.window.td)?;
        let ds = r.dataset();
        let folds = make_folds(ds, 0, FoldScheme::LeaveOneSubjectOut, self.cfg.fold_seed())?;
        let kind = self.cfg.classifier.kind;
        let report = crossval_evaluate(ds, kind, &self.hyper, &self.cfg.cncv_params(), &folds, self.cfg.model_seed())?;
        let mut v = self.cv_json(&self.filter, r.td, &folds, ds, &report);
        if let Some(t) = &r.tuning {
            v["td_tuning"] = self.tuning_json(&self.filter, kind, t, &r.data);
        }
        write_json(&self.out("loso_metrics.json"), &v)?;
        self.write_models("loso_models", &report)
    }

    fn pca(&self) -> anyhow::Result<()> {
        let r = self.resolve(&self.filter, self.cfg.window.td)?;
        let ds = r.dataset();
        let pca = pca_project(&ds.rows())?;
        write_with(&self.out("pca.csv"), |buf| pca.write_csv(ds, buf))?;
        Ok(())
    }

    fn report(&self) -> anyhow::Result<()> {
        let tds = self.cfg.window.td_values();
        let tune_kind = self.cfg.classifier.kind;
        let cncv = self.cfg.cncv_params();
        let seed = self.cfg.model_seed();
        let mut table3 = Vec::new();
        let mut tuning = Vec::new();
        let mut sweep_inputs = Vec::new();
        let mut all_events: Option<(TdDatasets, u32, FoldAssignment)> = None;
        for filter in EventFilter::standard_set() {
            let run = || -> anyhow::Result<_> {
                let data = self.td_data(&filter, &tds)?;
                let folds = self.folds(data.samples(), self.cfg.fold_scheme)?;
                let t = self.tune(&data, &folds, tune_kind)?;
                let ds = data.get(t.averaged_td).expect("tuned t_d in range");
                let consensus = fold_consensus(ds, &folds, &cncv)?;
                let mut rows = Vec::new();
                for kind in ClassifierKind::ALL {
                    let rep = evaluate_with_consensus(ds, &folds, &consensus, kind, &self.hyper, seed)?;
                    rows.push(json!({
                        "event_filter": filter.to_string(),
                        "classifier": kind,
                        "td": t.averaged_td,
                        "accuracy": metric_json(&rep.metrics.accuracy),
                        "sensitivity": metric_json(&rep.metrics.sensitivity),
                        "specificity": metric_json(&rep.metrics.specificity),
                    }));
                }
                Ok((data, folds, t, rows))
            };
            let (data, folds, t, rows) = match run() {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("{filter}: {}; left out of the report", super::error_message(&e));
                    continue;
                }
            };
            table3.extend(rows);
            tuning.push(self.tuning_json(&filter, tune_kind, &t, &data));
            if filter.is_all() {
                all_events = Some((data.clone(), t.averaged_td, folds));
            }
            sweep_inputs.push((filter, data));
        }
        let refs: Vec<(EventFilter, &TdDatasets)> = sweep_inputs.iter().map(|(f, d)| (f.clone(), d)).collect();
        let sweep = td_sweep(
            &refs,
            &SweepSettings {
                classifiers: &ClassifierKind::ALL,
                hyper: &self.hyper,
                cncv: &cncv,
                k_all: self.cfg.k_all,
                scheme: self.cfg.fold_scheme,
                seed,
            },
        )?;
        write_with(&self.out("sweep.csv"), |buf| sweep.write_csv(buf))?;

        let mut table4 = Vec::new();
        let mut ranking = serde_json::Value::Null;
        if let Some((data, td, folds)) = &all_events {
            let ds = data.get(*td).expect("tuned t_d in range");
            let loso = make_folds(ds, 0, FoldScheme::LeaveOneSubjectOut, self.cfg.fold_seed())?;
            let consensus = fold_consensus(ds, &loso, &cncv)?;
            for kind in ClassifierKind::ALL {
                let rep = evaluate_with_consensus(ds, &loso, &consensus, kind, &self.hyper, seed)?;
                table4.push(json!({
                    "classifier": kind,
                    "td": td,
                    "n_folds": loso.n_folds(),
                    "accuracy": metric_json(&rep.metrics.accuracy),
                    "sensitivity": metric_json(&rep.metrics.sensitivity),
                    "specificity": metric_json(&rep.metrics.specificity),
                }));
            }
            let rows = ds.rows();
            let r = rank_distinguishing_features(&rows, &ds.labels(), SelectionMode::WholeDataset, &cncv, Some(folds))?;
            ranking = ranking_json(&r);
        }
        write_json(
            &self.out("report.json"),
            &json!({
                "seed": self.cfg.seed,
                "tuning_classifier": tune_kind,
                "cross_validation": table3,
                "loso": table4,
                "ranking": ranking,
                "tuning": tuning,
            }),
        )?;
        Ok(())
    }
}

/// Loads a config file the same way the CLI does; for tests and embedding.
pub fn config_from_file(path: &Path) -> anyhow::Result<PipelineConfig> {
    load_config(&GlobalArgs {
        config: Some(path.to_path_buf()),
        ..GlobalArgs::default()
    })
}
