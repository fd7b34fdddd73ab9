//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ste_skill::classify::{self, ClassifierKind, Hyperparams};
use ste_skill::evaluate::{crossval_evaluate, fold_consensus, make_folds, FoldScheme};
use ste_skill::selection::{cncv_select, fold_cncv_params, mrmr_rank, CnCvParams};
use ste_skill::sensor::{parse_feature_name, Label, N_SENSORS};
use ste_skill::ste::{ste, ste_feature_vector, symbol_sequence, SteParams};
use ste_skill::synthetic::{feature_dataset, write_corpus, write_raw_layout, CorpusSpec, FeatureSpec};
use ste_skill::ingest::{EventKind, MoiEvent};
use ste_skill::windowing::EventGroup;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

fn ste_of(y: &[f64], x: &[f64], p: &SteParams) -> f64 {
    let sy = symbol_sequence([y], p).unwrap();
    let sx = symbol_sequence([x], p).unwrap();
    ste(&sy, &sx, p).unwrap()
}

// Brute-force oracle for m = 2, d = 1: a pair is "up" unless the second value
// is smaller (ties keep time order).
fn oracle_ste_m2(y: &[f64], x: &[f64], t: usize) -> f64 {
    let sym = |s: &[f64]| -> Vec<u8> { s.windows(2).map(|w| if w[1] >= w[0] { 0 } else { 1 }).collect() };
    let (sx, sy) = (sym(x), sym(y));
    let mut abc: HashMap<(u8, u8, u8), f64> = HashMap::new();
    let mut ab: HashMap<(u8, u8), f64> = HashMap::new();
    let mut bc: HashMap<(u8, u8), f64> = HashMap::new();
    let mut b: HashMap<u8, f64> = HashMap::new();
    let n = sx.len() - t;
    for i in 0..n {
        *abc.entry((sx[i + t], sx[i], sy[i])).or_default() += 1.0;
        *ab.entry((sx[i + t], sx[i])).or_default() += 1.0;
        *bc.entry((sx[i], sy[i])).or_default() += 1.0;
        *b.entry(sx[i]).or_default() += 1.0;
    }
    let n = n as f64;
    abc.iter()
        .map(|(&(a, bb, c), &cnt)| {
            let p = cnt / n;
            let cond_full = cnt / bc[&(bb, c)];
            let cond_x = ab[&(a, bb)] / b[&bb];
            p * (cond_full / cond_x).log2()
        })
        .sum()
}

fn criterion_1() -> Outcome {
    let p = SteParams::new(2, 1, 1).unwrap();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let mut r = rng(seed);
        let len = r.random_range(6..=50);
        let y: Vec<f64> = (0..len).map(|_| r.random_range(0..4) as f64).collect();
        let x: Vec<f64> = (0..len).map(|_| r.random_range(0..4) as f64).collect();
        let got = ste_of(&y, &x, &p);
        worst = worst.max((got - oracle_ste_m2(&y, &x, 1)).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("max |lib - oracle| = {worst:.3e}, {secs:.3} s");
    if worst <= 1e-12 && secs < 1.0 {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn criterion_2() -> Outcome {
    let p = SteParams::default();
    let bound = 6f64.log2();
    let mut bad = Vec::new();
    for seed in 0..1000 {
        let mut r = rng(10_000 + seed);
        let len = r.random_range(20..=300);
        let x: Vec<f64> = (0..len).map(|_| normal(&mut r)).collect();
        let y: Vec<f64> = (0..len).map(|_| normal(&mut r)).collect();
        let c = vec![r.random_range(-5.0..5.0); len];
        let v = ste_of(&y, &x, &p);
        if !(0.0..=bound).contains(&v) {
            bad.push(format!("seed {seed}: {v} out of bounds"));
        }
        for (what, v) in [
            ("X,X", ste_of(&x, &x, &p)),
            ("const->X", ste_of(&c, &x, &p)),
            ("X->const", ste_of(&x, &c, &p)),
            ("const->const", ste_of(&c, &c, &p)),
        ] {
            if v != 0.0 {
                bad.push(format!("seed {seed}: ste({what}) = {v:e}"));
            }
        }
    }
    if bad.is_empty() {
        Outcome::Pass("1000 pairs within [0, log2 6], all zero cases exact".into())
    } else {
        Outcome::Fail(format!("{} violations, first: {}", bad.len(), bad[0]))
    }
}

fn criterion_3() -> Outcome {
    let p = SteParams::default();
    let mut wins = 0;
    for seed in 0..100 {
        let mut r = rng(20_000 + seed);
        let n = 5000;
        let y: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
        let mut x = vec![0.0; n];
        for k in 0..n {
            let drive = if k == 0 { normal(&mut r) } else { y[k - 1] };
            x[k] = drive + 0.1 * normal(&mut r);
        }
        if ste_of(&y, &x, &p) > ste_of(&x, &y, &p) {
            wins += 1;
        }
    }
    let msg = format!("driver->driven larger in {wins}/100 seeds");
    if wins >= 95 {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn random_group(r: &mut ChaCha8Rng) -> EventGroup {
    let s = r.random_range(2..=6);
    let seg = 2 * s + 1;
    let n_events = r.random_range(4..=10);
    let events: Vec<MoiEvent> = (0..n_events)
        .map(|e| MoiEvent {
            match_id: "m".into(),
            player_id: "p".into(),
            t_e: 100.0 + 30.0 * e as f64,
            kind: EventKind::ALL[e % EventKind::ALL.len()],
        })
        .collect();
    let seqs = (0..N_SENSORS)
        .map(|_| (0..n_events * seg).map(|_| normal(r)).collect())
        .collect();
    EventGroup::from_sequences("p", "m", 0, events, seg, seqs).unwrap()
}

fn criterion_4() -> Outcome {
    let p = SteParams::default();
    let f = |x: f64| x * x * x + 5.0 * x;
    for seed in 0..20 {
        let mut r = rng(30_000 + seed);
        let g = random_group(&mut r);
        let base = ste_feature_vector(&g, &p).unwrap();
        let sensor = r.random_range(0..N_SENSORS);
        let mut one = g.clone();
        for v in one.sequence_mut(ste_skill::sensor::SensorId::from_index(sensor).unwrap()) {
            *v = f(*v);
        }
        let mut all = g.clone();
        for sid in ste_skill::sensor::SensorId::ALL {
            for v in all.sequence_mut(sid) {
                *v = f(*v);
            }
        }
        for (what, h) in [("one sensor", one), ("all sensors", all)] {
            if ste_feature_vector(&h, &p).unwrap().values() != base.values() {
                return Outcome::Fail(format!("group {seed}: {what} transformed changed the vector"));
            }
        }
    }
    Outcome::Pass("20 groups, transformed vectors identical".into())
}

// Exhaustive greedy reference: every step rescores every remaining feature
// from scratch.
fn oracle_mrmr(cols: &[Vec<f64>], labels: &[i32]) -> Vec<usize> {
    fn disc(c: &[f64]) -> Vec<i32> {
        let n = c.len() as f64;
        let mu = c.iter().sum::<f64>() / n;
        let sd = (c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n).sqrt();
        c.iter()
            .map(|&v| if v < mu - sd { -1 } else if v > mu + sd { 1 } else { 0 })
            .collect()
    }
    fn mi(a: &[i32], b: &[i32]) -> f64 {
        let n = a.len() as f64;
        let mut j: HashMap<(i32, i32), f64> = HashMap::new();
        let mut pa: HashMap<i32, f64> = HashMap::new();
        let mut pb: HashMap<i32, f64> = HashMap::new();
        for (&x, &y) in a.iter().zip(b) {
            *j.entry((x, y)).or_default() += 1.0;
            *pa.entry(x).or_default() += 1.0;
            *pb.entry(y).or_default() += 1.0;
        }
        j.iter()
            .map(|(&(x, y), &c)| (c / n) * ((c * n) / (pa[&x] * pb[&y])).log2())
            .sum()
    }
    let d: Vec<Vec<i32>> = cols.iter().map(|c| disc(c)).collect();
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < d.len() {
        let mut best: Option<(usize, f64)> = None;
        for f in (0..d.len()).filter(|f| !chosen.contains(f)) {
            let rel = mi(&d[f], labels);
            let score = if chosen.is_empty() {
                rel
            } else {
                rel - chosen.iter().map(|&s| mi(&d[f], &d[s])).sum::<f64>() / chosen.len() as f64
            };
            if best.is_none_or(|(_, b)| score > b + 1e-12) {
                best = Some((f, score));
            }
        }
        chosen.push(best.unwrap().0);
    }
    chosen
}

fn criterion_5() -> Outcome {
    for case in 0..50u64 {
        let mut r = rng(40_000 + case);
        let n_feat = r.random_range(2..=8);
        let n = r.random_range(8..=64);
        let mut labels: Vec<Label> = (0..n)
            .map(|i| if i % 2 == 0 { Label::Professional } else { Label::Amateur })
            .collect();
        labels.shuffle(&mut r);
        let coarse = case % 3 == 0;
        let cols: Vec<Vec<f64>> = (0..n_feat)
            .map(|f| {
                (0..n)
                    .map(|i| {
                        let signal = if f % 2 == 0 { labels[i].sign() } else { 0.0 };
                        if coarse {
                            (r.random_range(0..3) as f64 + signal).round()
                        } else {
                            signal + normal(&mut r)
                        }
                    })
                    .collect()
            })
            .collect();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let got = mrmr_rank(&refs, &labels, n_feat).unwrap().indices();
        let codes: Vec<i32> = labels.iter().map(|l| l.code() as i32).collect();
        let want = oracle_mrmr(&cols, &codes);
        if got != want {
            return Outcome::Fail(format!("case {case}: library {got:?} vs oracle {want:?}"));
        }
    }
    Outcome::Pass("50 cases identical to exhaustive greedy".into())
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut hits = 0;
    let mut counts = Vec::new();
    for seed in 0..20 {
        let (ds, informative) = feature_dataset(&FeatureSpec {
            seed,
            ..FeatureSpec::default()
        })
        .unwrap();
        let params = CnCvParams {
            seed,
            ..CnCvParams::default()
        };
        let res = cncv_select(&ds.rows(), &ds.labels(), &params).unwrap();
        let found = res.consensus.iter().filter(|f| informative.contains(f)).count();
        counts.push(found);
        if found >= 4 {
            hits += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("{hits}/20 seeds with >= 4 informative (per seed {counts:?}), {secs:.1} s");
    if hits >= 18 && secs < 30.0 {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn criterion_7() -> Outcome {
    let (ds, _) = feature_dataset(&FeatureSpec {
        seed: 7,
        ..FeatureSpec::default()
    })
    .unwrap();
    let folds = make_folds(&ds, 5, FoldScheme::Stratified, 70).unwrap();
    let cncv = CnCvParams {
        seed: 71,
        ..CnCvParams::default()
    };
    let hyper = Hyperparams::default();
    let base = fold_consensus(&ds, &folds, &cncv).unwrap();
    let mut r = rng(72);
    for j in 0..folds.n_folds() {
        let mut mutated = ds.clone();
        for &i in &folds.test_indices(j) {
            for v in &mut mutated.samples[i].features {
                *v = 100.0 * normal(&mut r);
            }
        }
        let mrows = mutated.rows();
        let labels = ds.labels();
        let train = folds.train_indices(j);
        let orows = ds.rows();
        let otrain: Vec<&[f64]> = train.iter().map(|&i| orows[i]).collect();
        let mtrain: Vec<&[f64]> = train.iter().map(|&i| mrows[i]).collect();
        let tl: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
        let mres = cncv_select(&mtrain, &tl, &fold_cncv_params(&cncv, j)).unwrap();
        if mres != base[j] {
            return Outcome::Fail(format!("fold {j}: selection changed"));
        }
        let whole = fold_consensus(&mutated, &folds, &cncv).unwrap();
        if whole[j] != base[j] {
            return Outcome::Fail(format!("fold {j}: fold_consensus changed"));
        }
        for kind in ClassifierKind::ALL {
            let a = classify::fit(kind, &otrain, &tl, &base[j].consensus, &hyper, 1000 + j as u64).unwrap();
            let b = classify::fit(kind, &mtrain, &tl, &mres.consensus, &hyper, 1000 + j as u64).unwrap();
            if a != b {
                return Outcome::Fail(format!("fold {j}: {kind} model changed"));
            }
        }
        let full_a = crossval_evaluate(&ds, ClassifierKind::Rf, &hyper, &cncv, &folds, 5).unwrap();
        let full_b = crossval_evaluate(&mutated, ClassifierKind::Rf, &hyper, &cncv, &folds, 5).unwrap();
        if full_a.folds[j].model != full_b.folds[j].model || full_a.folds[j].consensus != full_b.folds[j].consensus {
            return Outcome::Fail(format!("fold {j}: crossval model or selection changed"));
        }
    }
    Outcome::Pass("5 folds: selections and svm/rf/knn models unchanged".into())
}

fn criterion_8() -> Outcome {
    let hyper = Hyperparams::default();
    let mut accs = Vec::new();
    for seed in 0..20u64 {
        let (mut ds, _) = feature_dataset(&FeatureSpec {
            seed: 80 + seed,
            ..FeatureSpec::default()
        })
        .unwrap();
        let mut labels = ds.labels();
        labels.shuffle(&mut rng(800 + seed));
        for (s, l) in ds.samples.iter_mut().zip(labels) {
            s.label = l;
        }
        let folds = make_folds(&ds, 5, FoldScheme::Stratified, seed).unwrap();
        let cncv = CnCvParams {
            seed,
            ..CnCvParams::default()
        };
        let rep = crossval_evaluate(&ds, ClassifierKind::Svm, &hyper, &cncv, &folds, seed).unwrap();
        accs.push(rep.metrics.accuracy.mean);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let msg = format!("mean 5-fold accuracy {mean:.3} over 20 seeds");
    if (0.40..=0.60).contains(&mean) {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ste-skill")
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin())
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn criterion_9() -> Outcome {
    let Some(root) = std::env::var_os("STE_SKILL_DATASET").map(PathBuf::from) else {
        return Outcome::Skip("STE_SKILL_DATASET not set; point it at the public dataset or a manifest".into());
    };
    let work = tempfile::tempdir().unwrap();
    let manifest = if root.is_file() {
        root
    } else {
        let m = work.path().join("corpus").join("manifest.json");
        if let Err(e) = run_cli(&["adapt-dataset", "--input", root.to_str().unwrap(), "--output", m.to_str().unwrap()]) {
            return Outcome::Fail(e);
        }
        m
    };
    let out = work.path().join("report");
    if let Err(e) = run_cli(&[
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--classifier",
        "svm",
        "report",
    ]) {
        return Outcome::Fail(e);
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let td = report["tuning"]
        .as_array()
        .and_then(|t| t.iter().find(|x| x["event_filter"] == "all"))
        .map(|x| x["averaged_td"].as_u64().unwrap_or(0))
        .unwrap_or(0);
    let cv = report["cross_validation"]
        .as_array()
        .and_then(|t| t.iter().find(|x| x["event_filter"] == "all" && x["classifier"] == "svm"))
        .map(|x| x["accuracy"]["mean"].as_f64().unwrap_or(0.0))
        .unwrap_or(0.0);
    let loso = report["loso"]
        .as_array()
        .and_then(|t| t.iter().find(|x| x["classifier"] == "svm"))
        .map(|x| x["accuracy"]["mean"].as_f64().unwrap_or(0.0))
        .unwrap_or(0.0);
    let reference = [
        "GP_to_KA", "GP_to_MA2", "GP_to_LHMA", "GP_to_RHMA", "LHMA_to_RHMA", "KA_to_MA2", "MA2_to_KA", "RHMA_to_LHMA",
    ]
    .map(|n| parse_feature_name(&format!("STE_{n}")).unwrap());
    let top: Vec<usize> = report["ranking"]["features"]
        .as_array()
        .map(|f| f.iter().take(8).filter_map(|x| x["index"].as_u64()).map(|i| i as usize).collect())
        .unwrap_or_default();
    let overlap = top.iter().filter(|i| reference.contains(i)).count();
    let parts = [
        (td == 4, format!("(a) t_d = {td}")),
        (cv >= 0.85, format!("(b) SVM 5-fold {cv:.3}")),
        (loso >= 0.80, format!("(c) LOSO SVM {loso:.3}")),
        (overlap >= 4, format!("(d) {overlap}/8 reference features in top 8")),
    ];
    let msg = parts.iter().map(|(_, m)| m.as_str()).collect::<Vec<_>>().join(", ");
    if parts.iter().all(|(ok, _)| *ok) {
        Outcome::Pass(msg)
    } else {
        Outcome::Fail(msg)
    }
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_10() -> Outcome {
    let work = tempfile::tempdir().unwrap();
    let w = work.path();
    let spec = CorpusSpec {
        matches: 4,
        players_per_match: 2,
        duration_s: 600,
        events_per_player: 48,
        seed: 10,
        ..CorpusSpec::default()
    };
    let manifest = write_corpus(&w.join("corpus"), &spec).unwrap();
    write_raw_layout(&w.join("raw"), &spec).unwrap();
    let m = manifest.to_str().unwrap();
    let raw = w.join("raw");
    let commands: Vec<Vec<String>> = vec![
        vec!["features".into()],
        vec!["tune-td".into()],
        vec!["select".into()],
        vec!["--td".into(), "tune".into(), "evaluate".into()],
        vec!["--classifier".into(), "rf".into(), "evaluate".into()],
        vec!["--classifier".into(), "knn".into(), "loso".into()],
        vec!["pca".into()],
        vec!["report".into()],
    ];
    let mut checked = 0;
    for (c, args) in commands.iter().enumerate() {
        let mut snaps = Vec::new();
        let out = w.join(format!("out{c}"));
        for _ in 0..2 {
            if out.exists() {
                std::fs::remove_dir_all(&out).unwrap();
            }
            let mut full: Vec<&str> = vec!["--manifest", m, "--seed", "3", "--threads", "2", "--out", out.to_str().unwrap()];
            full.extend(args.iter().map(String::as_str));
            if let Err(e) = run_cli(&full) {
                return Outcome::Fail(e);
            }
            snaps.push(snapshot(&out));
        }
        if snaps[0] != snaps[1] {
            return Outcome::Fail(format!("{args:?}: outputs differ between runs"));
        }
        checked += snaps[0].len();
    }
    let mut adapted = Vec::new();
    let out = w.join("adapted");
    for _ in 0..2 {
        if out.exists() {
            std::fs::remove_dir_all(&out).unwrap();
        }
        let man = out.join("manifest.json");
        if let Err(e) = run_cli(&["adapt-dataset", "--input", raw.to_str().unwrap(), "--output", man.to_str().unwrap()]) {
            return Outcome::Fail(e);
        }
        adapted.push(snapshot(&out));
    }
    if adapted[0] != adapted[1] {
        return Outcome::Fail("adapt-dataset outputs differ between runs".into());
    }
    checked += adapted[0].len();
    Outcome::Pass(format!("9 command runs, {checked} files byte-identical across reruns"))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("STE matches brute-force oracle (m=2, 1e-12, < 1 s)", criterion_1),
        ("STE bounds and exact zeros", criterion_2),
        ("STE directionality (>= 95/100)", criterion_3),
        ("invariance under x^3 + 5x", criterion_4),
        ("mRMR equals exhaustive greedy (50 cases)", criterion_5),
        ("CN-CV recovers >= 4 informative in >= 18/20 seeds (< 30 s)", criterion_6),
        ("test-fold mutation leaves models and selections unchanged", criterion_7),
        ("permuted labels give accuracy in [0.40, 0.60]", criterion_8),
        ("public dataset reproduction", criterion_9),
        ("CLI reruns are byte-identical", criterion_10),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let t = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {n:>2} {tag}: {name}: {detail} [{t:.2} s]");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
