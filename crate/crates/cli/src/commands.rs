use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use touchgrid::featgen::{engineer_all, EdgeMaskIndex, FeatgenBlock};
use touchgrid::gbdt::{fit, load_model, Dataset, GbdtModel, TrainConfig};
use touchgrid::ingest::{FeatureStore, RowId, UNDEFINED};
use touchgrid::labels::{segments_from_mask, Label, LabelFile, SessionManifest, VideoLabels};
use touchgrid::metrics::{aggregate, auc, classify_errors, grouped_report, median_smooth, median_smooth_binary, threshold, ErrorReport};
use touchgrid::neuro::{build_psth, detect_touch_neuron, spikes_per_touch, Detection, Psth, PsthOptions, SpikeFile};
use touchgrid::retrain::{build_retrain_bundle, evaluate_sessions, retrain, retrain_config, HoldoutSession, LabeledPart};
use touchgrid::select::{hyper_search, pole_position_sample, rfe, Fold, RfeConfig, RfeRound, SearchResult, TrialScore};
use touchgrid::{Error, FeatureMatrix};

use crate::artifacts::{
    read_labels_or_predictions, LabelsOrPredictions, Predictions, SessionBundle, VideoPredictions, PREDICTIONS_FORMAT,
    SESSION_FORMAT,
};
use crate::cli::*;
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::provenance::Provenance;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    touchgrid::labels::write_atomic(path, &bytes)?;
    Ok(())
}

fn read_store(path: &Path) -> CliResult<FeatureStore> {
    Ok(FeatureStore::read(path)?)
}

/// Labels of `rows`, looked up by video id and frame index.
pub fn labels_for_rows(file: &LabelFile, rows: &[RowId]) -> touchgrid::Result<Vec<Label>> {
    let by_video: HashMap<&str, &VideoLabels> = file.videos.iter().map(|v| (v.video_id.as_str(), v)).collect();
    rows.iter()
        .map(|r| {
            let v = by_video
                .get(r.video_id.as_str())
                .ok_or_else(|| Error::MissingMetadata(format!("label file has no video {}", r.video_id)))?;
            v.labels
                .get(r.frame_idx as usize)
                .copied()
                .ok_or(Error::FrameIndex { index: r.frame_idx as usize, count: v.labels.len() })
        })
        .collect()
}

fn column_ids(store: &FeatureStore) -> Vec<usize> {
    store.featgen.as_ref().map_or_else(|| (0..store.matrix.cols()).collect(), |b| b.column_ids())
}

/// The store's columns in the order the model expects.
pub fn align_columns<'a>(model: &GbdtModel, store: &'a FeatureStore) -> touchgrid::Result<Cow<'a, FeatureMatrix>> {
    if let (Some(want), Some(_)) = (&model.feature_ids, &store.featgen) {
        let have = column_ids(store);
        if &have == want {
            return Ok(Cow::Borrowed(&store.matrix));
        }
        let pos: HashMap<usize, usize> = have.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let cols = want
            .iter()
            .map(|id| pos.get(id).copied().ok_or_else(|| Error::ShapeMismatch(format!("input lacks column {id}"))))
            .collect::<touchgrid::Result<Vec<_>>>()?;
        return Ok(Cow::Owned(store.matrix.select_columns(&cols)?));
    }
    if store.matrix.cols() != model.n_features {
        return Err(Error::ShapeMismatch(format!(
            "input has {} columns, model expects {}",
            store.matrix.cols(),
            model.n_features
        )));
    }
    Ok(Cow::Borrowed(&store.matrix))
}

fn model_with_provenance(model: &GbdtModel, prov: &Provenance) -> CliResult<serde_json::Value> {
    let mut v = serde_json::to_value(model)?;
    if let Some(obj) = v.as_object_mut() {
        obj.insert("provenance".into(), prov.to_value());
    }
    Ok(v)
}

pub fn ingest(cfg: &PipelineConfig, a: &IngestArgs) -> CliResult<()> {
    let mut prov = Provenance::new("ingest", &cfg.hash());
    prov.input("csv", &a.csv)?;
    let csv_err = |e: csv::Error| Error::Format(format!("{}: {e}", a.csv.display()));
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(&a.csv).map_err(csv_err)?;
    let header = rdr.headers().map_err(csv_err)?.clone();
    let expected = ["session_id", "video_id", "frame_idx"];
    if header.len() < 4 || header.iter().take(3).ne(expected) {
        return Err(Error::Format("CSV header must start with session_id,video_id,frame_idx and name at least one feature".into()).into());
    }
    let cols = header.len() - 3;
    let mut data = Vec::new();
    let mut index = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let at = |i: usize| rec.get(i).unwrap_or_default().trim();
        let frame: u32 = at(2).parse().map_err(|e| Error::Format(format!("row {}: frame_idx: {e}", line + 2)))?;
        index.push(RowId::new(at(0), at(1), frame));
        for c in 0..cols {
            let cell = at(3 + c);
            let v = if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                UNDEFINED
            } else {
                cell.parse::<f32>().map_err(|e| Error::Format(format!("row {} column {}: {e}", line + 2, c + 3)))?
            };
            data.push(v);
        }
    }
    let matrix = FeatureMatrix::new(index.len(), cols, data, index)?;
    matrix.validate_provenance()?;
    let mut store = FeatureStore::new(matrix);
    if let Some(path) = &a.labels {
        prov.input("labels", path)?;
        let file = LabelFile::read(path)?;
        store.labels = Some(labels_for_rows(&file, store.matrix.row_index())?);
    }
    store.provenance = Some(prov.to_value());
    store.write(&a.out)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Selection {
    pub provenance: Option<serde_json::Value>,
    /// Hash of the transform config the column ids refer to.
    pub featgen_config_hash: Option<String>,
    pub selected_columns: Vec<usize>,
    pub column_names: Vec<String>,
    pub trace: Vec<RfeRound>,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchResult>,
}

pub fn featgen(cfg: &PipelineConfig, a: &FeatgenArgs) -> CliResult<()> {
    let mut prov = Provenance::new("featgen", &cfg.hash());
    prov.input("input", &a.input)?;
    let store = read_store(&a.input)?;
    if store.featgen.is_some() {
        return Err(Error::InvalidConfig("input is already an engineered matrix".into()).into());
    }
    let engineered = engineer_all(&store.matrix, &cfg.featgen)?;
    let mut block = FeatgenBlock::new(&cfg.featgen, store.matrix.cols());
    let matrix = match &a.select {
        Some(path) => {
            prov.input("select", path)?;
            let sel: Selection = serde_json::from_slice(&std::fs::read(path)?)?;
            if sel.featgen_config_hash.as_deref().is_some_and(|h| h != block.config_hash) {
                return Err(Error::InvalidConfig("selection was made under a different featgen config".into()).into());
            }
            block = block.select(&sel.selected_columns)?;
            engineered.select_columns(&sel.selected_columns)?
        }
        None => engineered,
    };
    let out = FeatureStore { matrix, labels: store.labels, featgen: Some(block), provenance: Some(prov.to_value()) };
    out.write(&a.out)?;
    Ok(())
}

pub fn train(cfg: &PipelineConfig, a: &TrainArgs) -> CliResult<()> {
    let mut prov = Provenance::new("train", &cfg.hash());
    prov.input("train", &a.train)?;
    let train = read_store(&a.train)?;
    let ty = train.binary_labels()?;
    let valid = match &a.valid {
        Some(p) => {
            prov.input("valid", p)?;
            let v = read_store(p)?;
            if column_ids(&v) != column_ids(&train) {
                return Err(Error::ShapeMismatch("train and valid stores have different columns".into()).into());
            }
            Some(v)
        }
        None => None,
    };
    let vy = valid.as_ref().map(|v| v.binary_labels()).transpose()?;
    let vset = valid.as_ref().zip(vy.as_ref()).map(|(v, y)| Dataset::new(&v.matrix, y));
    let mut out = fit(&Dataset::new(&train.matrix, &ty), vset.as_ref(), &cfg.train)?;
    for w in &out.warnings {
        warn!("{w}");
    }
    out.model.feature_ids = train.featgen.as_ref().map(|b| b.column_ids());
    write_json(&a.out, &model_with_provenance(&out.model, &prov)?)?;
    if let Some(log) = &a.log {
        touchgrid::labels::write_atomic(log, out.log_jsonl()?.as_bytes())?;
    }
    Ok(())
}

fn predictions_for(model: &GbdtModel, store: &FeatureStore, smooth: Option<usize>) -> CliResult<Vec<VideoPredictions>> {
    let x = align_columns(model, store)?;
    let proba = model.predict_proba(&x)?;
    let mut videos = Vec::new();
    for g in store.matrix.video_groups() {
        let p = &proba[g.clone()];
        let mut calls = threshold(p);
        if let Some(w) = smooth {
            calls = median_smooth_binary(&calls, w)?;
        }
        let rows = &store.matrix.row_index()[g.clone()];
        videos.push(VideoPredictions {
            session_id: rows[0].session_id.clone(),
            video_id: rows[0].video_id.clone(),
            frames: rows.iter().map(|r| r.frame_idx).collect(),
            proba: p.to_vec(),
            touch: calls.into_iter().map(u8::from).collect(),
        });
    }
    Ok(videos)
}

pub fn predict(cfg: &PipelineConfig, a: &PredictArgs) -> CliResult<()> {
    let mut prov = Provenance::new("predict", &cfg.hash());
    prov.input("model", &a.model)?;
    prov.input("input", &a.input)?;
    let model = load_model(&a.model)?;
    let store = read_store(&a.input)?;
    let videos = predictions_for(&model, &store, cfg.smooth())?;
    let preds = Predictions {
        format: PREDICTIONS_FORMAT.into(),
        version: 1,
        smooth_window: cfg.smooth(),
        videos,
        provenance: Some(prov.to_value()),
    };
    write_json(&a.out, &preds)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct VideoScore {
    video_id: String,
    report: ErrorReport,
}

#[derive(Debug, Serialize)]
struct SessionScore {
    session_id: String,
    report: ErrorReport,
    videos: Vec<VideoScore>,
}

#[derive(Debug, Serialize)]
struct ScoreOutput {
    provenance: serde_json::Value,
    sessions: Vec<SessionScore>,
    aggregate: ErrorReport,
}

fn score_pair(truth: &LabelFile, pred: &LabelsOrPredictions, smooth: Option<usize>) -> CliResult<SessionScore> {
    let mut videos = Vec::new();
    let mut auc_truth = Vec::new();
    let mut auc_scores = Vec::new();
    for tv in &truth.videos {
        let t = tv.to_label_array(truth.frame_rate_hz)?;
        let missing = || Error::MissingMetadata(format!("predictions lack video {}", tv.video_id));
        let p = match pred {
            LabelsOrPredictions::Labels(pf) => {
                let arr = pf.video(&tv.video_id).ok_or_else(missing)?.to_label_array(pf.frame_rate_hz)?;
                match smooth {
                    Some(w) => median_smooth(&arr, w)?,
                    None => arr,
                }
            }
            LabelsOrPredictions::Predictions(pp) => {
                let v = pp.video(&tv.video_id).ok_or_else(missing)?;
                for (&f, &s) in v.frames.iter().zip(&v.proba) {
                    let f = f as usize;
                    if tv.pole_in_reach.get(f) == Some(&true) {
                        match tv.labels.get(f) {
                            Some(Label::Touch) => auc_truth.push(1),
                            Some(Label::NoTouch) => auc_truth.push(0),
                            _ => continue,
                        }
                        auc_scores.push(s);
                    }
                }
                Predictions::label_array(v, t.len(), truth.frame_rate_hz)?
            }
        };
        videos.push(VideoScore { video_id: tv.video_id.clone(), report: classify_errors(&t, &p)? });
    }
    let reports: Vec<ErrorReport> = videos.iter().map(|v| v.report.clone()).collect();
    let mut report = aggregate(&reports);
    if !auc_truth.is_empty() {
        report = report.with_auc(auc(&auc_truth, &auc_scores).ok());
    }
    Ok(SessionScore { session_id: truth.session_id.clone(), report, videos })
}

pub fn score(cfg: &PipelineConfig, a: &ScoreArgs) -> CliResult<()> {
    if a.truth.len() != a.pred.len() {
        return Err(CliError::Usage(format!("{} --truth files but {} --pred files", a.truth.len(), a.pred.len())));
    }
    if let Some(w) = a.smooth {
        if w == 0 || w % 2 == 0 {
            return Err(CliError::Usage(format!("--smooth {w} must be a positive odd window")));
        }
    }
    let mut prov = Provenance::new("score", &cfg.hash());
    let mut sessions = Vec::new();
    for (i, (t, p)) in a.truth.iter().zip(&a.pred).enumerate() {
        prov.input(&format!("truth{i}"), t)?;
        prov.input(&format!("pred{i}"), p)?;
        let truth = LabelFile::read(t)?;
        let pred = read_labels_or_predictions(p)?;
        sessions.push(score_pair(&truth, &pred, a.smooth)?);
    }
    let reports: Vec<ErrorReport> = sessions.iter().map(|s| s.report.clone()).collect();
    let out = ScoreOutput { provenance: prov.to_value(), aggregate: aggregate(&reports), sessions };
    let text = serde_json::to_string_pretty(&out)?;
    println!("{text}");
    if let Some(path) = &a.out {
        write_json(path, &out)?;
    }
    Ok(())
}

/// Whole videos assigned to folds round-robin after a seeded shuffle.
fn video_folds(store: &FeatureStore, y: &[u8], n_folds: usize, seed: u64) -> touchgrid::Result<Vec<Fold>> {
    if n_folds < 2 {
        return Err(Error::InvalidConfig("feature selection needs at least 2 folds".into()));
    }
    let groups = store.matrix.video_groups();
    if groups.len() < n_folds {
        return Err(Error::InsufficientData(format!("{} videos for {n_folds} folds", groups.len())));
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; groups.len()];
    for (rank, &g) in order.iter().enumerate() {
        fold_of[g] = rank % n_folds;
    }
    Ok((0..n_folds)
        .map(|k| {
            let (mut tr, mut va) = (Vec::new(), Vec::new());
            for (g, range) in groups.iter().enumerate() {
                if fold_of[g] == k { &mut va } else { &mut tr }.extend(range.clone());
            }
            Fold {
                train_x: store.matrix.select_rows(&tr),
                train_y: tr.iter().map(|&r| y[r]).collect(),
                valid_x: store.matrix.select_rows(&va),
                valid_y: va.iter().map(|&r| y[r]).collect(),
            }
        })
        .collect())
}

pub fn select_features(cfg: &PipelineConfig, a: &SelectArgs) -> CliResult<()> {
    let mut prov = Provenance::new("select-features", &cfg.hash());
    prov.input("input", &a.input)?;
    let store = read_store(&a.input)?;
    let y = store.binary_labels()?;
    let folds = video_folds(&store, &y, cfg.rfe.n_folds, cfg.split.seed)?;
    let rcfg = RfeConfig {
        train: cfg.train.clone(),
        schedule: cfg.rfe.schedule.clone(),
        tolerance: cfg.rfe.tolerance,
        min_features: cfg.rfe.min_features,
    };
    let result = rfe(&folds, &rcfg)?;
    let ids = column_ids(&store);
    let selected: Vec<usize> = result.selected.iter().map(|&c| ids[c]).collect();
    let column_names = match &store.featgen {
        Some(b) => selected.iter().map(|&id| b.column_map.name(id)).collect::<touchgrid::Result<Vec<_>>>()?,
        None => selected.iter().map(|id| format!("f{id}")).collect(),
    };
    let search = if a.search {
        let f0 = &folds[0];
        let tx = f0.train_x.select_columns(&result.selected)?;
        let vx = f0.valid_x.select_columns(&result.selected)?;
        let groups = vx.video_groups();
        let smooth = cfg.smooth();
        let objective = |c: &TrainConfig| -> touchgrid::Result<TrialScore> {
            let out = fit(&Dataset::new(&tx, &f0.train_y), Some(&Dataset::new(&vx, &f0.valid_y)), c)?;
            let proba = out.model.predict_proba(&vx)?;
            let report = grouped_report(&f0.valid_y, &proba, &groups, smooth)?;
            Ok(TrialScore { tc_error: report.tc_error, auc: auc(&f0.valid_y, &proba).unwrap_or(f64::NAN) })
        };
        Some(hyper_search(&cfg.search, &cfg.train, cfg.split.seed, objective)?)
    } else {
        None
    };
    let sel = Selection {
        provenance: Some(prov.to_value()),
        featgen_config_hash: store.featgen.as_ref().map(|b| b.config_hash.clone()),
        selected_columns: selected,
        column_names,
        trace: result.trace,
        warnings: result.warnings,
        search,
    };
    write_json(&a.out, &sel)?;
    Ok(())
}

pub fn sample(cfg: &PipelineConfig, a: &SampleArgs) -> CliResult<()> {
    let mut prov = Provenance::new("sample", &cfg.hash());
    prov.input("manifest", &a.manifest)?;
    let manifest = SessionManifest::from_json_file(&a.manifest)?;
    let reach: BTreeMap<String, Vec<bool>> = match &a.reach {
        Some(path) => {
            prov.input("reach", path)?;
            LabelFile::read(path)?.videos.into_iter().map(|v| (v.video_id, v.pole_in_reach)).collect()
        }
        None => manifest.videos.iter().map(|v| (v.video_id.clone(), vec![true; v.n_frames])).collect(),
    };
    let frames = pole_position_sample(&manifest, &reach, &cfg.sample)?;
    let chosen: BTreeSet<&str> = frames.iter().map(|f| f.video_id.as_str()).collect();
    let labels = LabelFile {
        session_id: manifest.session_id.clone(),
        frame_rate_hz: manifest.frame_rate_hz,
        videos: manifest
            .videos
            .iter()
            .filter(|v| chosen.contains(v.video_id.as_str()))
            .map(|v| VideoLabels {
                video_id: v.video_id.clone(),
                labels: vec![Label::Unlabeled; v.n_frames],
                pole_in_reach: reach[&v.video_id].clone(),
            })
            .collect(),
    };
    let bundle =
        SessionBundle { format: SESSION_FORMAT.into(), session: manifest, frames, provenance: Some(prov.to_value()) };
    write_json(&a.out, &bundle)?;
    labels.write_atomic(&a.out_labels)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SessionComparison {
    session_id: String,
    base: ErrorReport,
    retrained: ErrorReport,
}

#[derive(Debug, Serialize)]
struct RetrainEval {
    provenance: serde_json::Value,
    n_sample_train: usize,
    n_sample_valid: usize,
    best_iteration: usize,
    n_trees: usize,
    warnings: Vec<String>,
    sessions: Vec<SessionComparison>,
}

fn labeled_part(store: &FeatureStore, model: &GbdtModel) -> CliResult<LabeledPart> {
    let x = align_columns(model, store)?.into_owned();
    Ok(LabeledPart::new(x, store.binary_labels()?)?)
}

pub fn retrain_cmd(cfg: &PipelineConfig, a: &RetrainArgs) -> CliResult<()> {
    let mut prov = Provenance::new("retrain", &cfg.hash());
    for (role, p) in [("model", &a.model), ("base_train", &a.base_train), ("base_valid", &a.base_valid), ("session", &a.session), ("labels", &a.labels)] {
        prov.input(role, p)?;
    }
    let base_model = load_model(&a.model)?;
    let bt = read_store(&a.base_train)?;
    let bv = read_store(&a.base_valid)?;
    let sess = read_store(&a.session)?;
    let block = bt
        .featgen
        .clone()
        .ok_or_else(|| Error::MissingMetadata("base training store has no featgen block".into()))?;
    let ids = base_model.feature_ids.clone().unwrap_or_else(|| block.column_ids());
    let edge = EdgeMaskIndex::build(&block.column_map, &ids)?;

    let labels = LabelFile::read(&a.labels)?;
    let index = sess.matrix.row_index();
    let rows: Vec<usize> = match &a.frames {
        Some(path) => {
            prov.input("frames", path)?;
            let bundle = SessionBundle::read(path)?;
            let pos: HashMap<(&str, u32), usize> =
                index.iter().enumerate().map(|(i, r)| ((r.video_id.as_str(), r.frame_idx), i)).collect();
            let mut rows = bundle
                .frames
                .iter()
                .map(|f| {
                    pos.get(&(f.video_id.as_str(), f.frame as u32)).copied().ok_or_else(|| {
                        Error::MissingMetadata(format!("session store lacks frame {} of {}", f.frame, f.video_id))
                    })
                })
                .collect::<touchgrid::Result<Vec<_>>>()?;
            rows.sort_unstable();
            rows.dedup();
            rows
        }
        None => {
            // Every labeled frame of the videos the label file covers.
            let covered: BTreeSet<&str> = labels.videos.iter().map(|v| v.video_id.as_str()).collect();
            let candidates: Vec<usize> = (0..index.len()).filter(|&r| covered.contains(index[r].video_id.as_str())).collect();
            let found = labels_for_rows(&labels, &candidates.iter().map(|&r| index[r].clone()).collect::<Vec<_>>())?;
            candidates.into_iter().zip(found).filter(|(_, l)| *l != Label::Unlabeled).map(|(r, _)| r).collect()
        }
    };
    let sample_ids: Vec<RowId> = rows.iter().map(|&r| index[r].clone()).collect();
    let sample_labels = labels_for_rows(&labels, &sample_ids)?;
    let sample_store = FeatureStore::new(sess.matrix.select_rows(&rows));
    let sample_x = align_columns(&base_model, &FeatureStore { featgen: sess.featgen.clone(), ..sample_store })?.into_owned();
    let sample = LabeledPart::from_labels(sample_x, &sample_labels)?;

    let bundle = build_retrain_bundle(
        labeled_part(&bt, &base_model)?,
        labeled_part(&bv, &base_model)?,
        sample,
        &edge,
        &cfg.retrain.bundle,
    )?;
    let tcfg = TrainConfig { early_stopping_rounds: cfg.retrain.patience, ..retrain_config(&base_model.config) };
    let mut out = retrain(&bundle, &tcfg)?;
    for w in &out.warnings {
        warn!("{w}");
    }
    out.model.feature_ids = Some(ids);
    write_json(&a.out, &model_with_provenance(&out.model, &prov)?)?;

    if let Some(eval_path) = &a.eval_out {
        let mut holdouts = Vec::new();
        for (i, p) in a.holdout.iter().enumerate() {
            prov.input(&format!("holdout{i}"), p)?;
            let s = read_store(p)?;
            let session_id = s.matrix.row_index().first().map_or_else(|| format!("holdout{i}"), |r| r.session_id.clone());
            holdouts.push(HoldoutSession { session_id, data: labeled_part(&s, &base_model)? });
        }
        let before = evaluate_sessions(&base_model, &holdouts, cfg.smooth())?;
        let after = evaluate_sessions(&out.model, &holdouts, cfg.smooth())?;
        let eval = RetrainEval {
            provenance: prov.to_value(),
            n_sample_train: bundle.sample_train.y.len(),
            n_sample_valid: bundle.sample_valid.y.len(),
            best_iteration: out.model.best_iteration,
            n_trees: out.model.trees.len(),
            warnings: out.warnings.clone(),
            sessions: before
                .into_iter()
                .zip(after)
                .map(|(b, r)| SessionComparison { session_id: b.session_id, base: b.report, retrained: r.report })
                .collect(),
        };
        write_json(eval_path, &eval)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PsthOutput {
    provenance: serde_json::Value,
    psth: Psth,
    detection: Detection,
    spikes_per_touch: Option<f64>,
}

pub fn psth(cfg: &PipelineConfig, a: &PsthArgs) -> CliResult<()> {
    let mut prov = Provenance::new("psth", &cfg.hash());
    prov.input("spikes", &a.spikes)?;
    prov.input("labels", &a.labels)?;
    let spikes = SpikeFile::read(&a.spikes)?;
    let labels = LabelFile::read(&a.labels)?;
    let mut touches = Vec::with_capacity(spikes.videos.len());
    for train in &spikes.videos {
        let v = labels
            .video(&train.video_id)
            .ok_or_else(|| Error::MissingMetadata(format!("label file has no video {}", train.video_id)))?;
        touches.push(segments_from_mask(&v.to_label_array(labels.frame_rate_hz)?.touch_mask()));
    }
    let psth = build_psth(&spikes.videos, &touches, &PsthOptions { with_ci: a.ci, ..Default::default() })?;
    let detection = detect_touch_neuron(&psth)?;
    let spt = detection.signal_window.map(|w| spikes_per_touch(&psth, w)).transpose()?;
    write_json(&a.out, &PsthOutput { provenance: prov.to_value(), psth, detection, spikes_per_touch: spt })?;
    Ok(())
}
