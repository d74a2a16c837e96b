use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use super::{Cli, CliError, Command, GlobalOpts, DATA_ROOT_ENV};
use crate::data_io::{
    atomic_write, build_casia_manifest, parse_manifest, read_embeddings, read_label_map, read_mask,
    read_silhouette, write_embeddings, write_manifest, write_silhouette, Split, StoreEntry, TrackletRecord,
};
use crate::embedder::{read_checkpoint, write_checkpoint, GaitModel};
use crate::mask::{
    process_torso_subtraction, process_tracklet, InstanceMaskSet, PartSubset, PipelineConfig, Silhouette,
    TrackletSilhouettes,
};
use crate::retrieval::{
    aggregate_external_features, casia_b_eval, cross_camera_eval, fuse, Aggregation, CasiaEntry, CasiaReport,
    GalleryEntry, GallerySet, MetricsReport, ProbeSet, DEFAULT_RANKS,
};
use crate::synth::{gen_dataset, DatasetSpec, View, MANIFEST_NAME};
use crate::trainer::{history_csv, train, RunFile, TrainIndex, ValidationSet, ValidationTracklet};

type CliResult<T = ()> = Result<T, CliError>;

pub(super) fn dispatch(cli: &Cli) -> CliResult {
    let g = &cli.global;
    match &cli.command {
        Command::Synth(a) => synth(g, a),
        Command::Prep(a) => prep(g, a),
        Command::Train(a) => train_cmd(g, a),
        Command::Embed(a) => embed(g, a),
        Command::Eval(a) => eval(g, a),
        Command::CasiaManifest(a) => casia_manifest(g, a),
        Command::CasiaEval(a) => casia_eval(g, a),
        Command::Fuse(a) => fuse_cmd(g, a),
        Command::Aggregate(a) => aggregate(g, a),
    }
}

fn data<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::data(format!("{context}: {e}"))
}

/// `--root`, then the environment variable, then the manifest's directory.
fn resolve_root(root: &Option<PathBuf>, manifest: &Path) -> PathBuf {
    if let Some(r) = root {
        return r.clone();
    }
    if let Some(r) = std::env::var_os(DATA_ROOT_ENV).filter(|r| !r.is_empty()) {
        return PathBuf::from(r);
    }
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load_manifest(path: &Path) -> CliResult<Vec<TrackletRecord>> {
    parse_manifest(path).map_err(data(path.display()))
}

fn write_json_report<T: Serialize>(g: &GlobalOpts, report: &T) -> CliResult {
    if let Some(path) = &g.json {
        let text = serde_json::to_string_pretty(report).map_err(CliError::internal)?;
        atomic_write(path, |w| w.write_all(text.as_bytes())).map_err(data(path.display()))?;
    }
    Ok(())
}

fn out(line: impl std::fmt::Display) {
    println!("{line}");
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for label maps and manifest.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub identities: usize,
    #[arg(long, default_value_t = 2)]
    pub cameras: usize,
    #[arg(long, default_value_t = 2)]
    pub tracklets: usize,
    #[arg(long, default_value_t = 30)]
    pub frames: usize,
    /// frontal, oblique or lateral.
    #[arg(long, default_value = "frontal")]
    pub view: View,
    #[arg(long, default_value_t = 0.0)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    pub test_fraction: f64,
}

#[derive(Serialize)]
struct SynthReport {
    records: usize,
    identities: usize,
    train_identities: usize,
    val_identities: usize,
    test_identities: usize,
    manifest: PathBuf,
}

fn synth(g: &GlobalOpts, a: &SynthArgs) -> CliResult {
    let mut spec = DatasetSpec::frontal(a.identities, g.seed.unwrap_or(0));
    if a.cameras == 0 {
        return Err(CliError::usage("--cameras must be at least 1"));
    }
    let templates = spec.cameras.clone();
    spec.cameras = (0..a.cameras)
        .map(|i| {
            let mut c = templates[i % templates.len()];
            c.view = a.view;
            c
        })
        .collect();
    spec.tracklets_per_camera = a.tracklets;
    spec.frames = a.frames;
    spec.val_fraction = a.val_fraction;
    spec.test_fraction = a.test_fraction;
    let records = gen_dataset(&spec, &a.out).map_err(data("synth"))?;
    let (train, val, test) = spec.split_sizes();
    let report = SynthReport {
        records: records.len(),
        identities: a.identities,
        train_identities: train,
        val_identities: val,
        test_identities: test,
        manifest: a.out.join(MANIFEST_NAME),
    };
    out(format_args!(
        "synth: {} tracklets, {} identities (train {}, val {}, test {}) -> {}",
        report.records,
        report.identities,
        train,
        val,
        test,
        report.manifest.display()
    ));
    write_json_report(g, &report)
}

// ---------------------------------------------------------------- prep

#[derive(Debug, Args)]
pub struct PrepArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Dataset root the manifest's frame paths are relative to.
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Output directory for silhouettes and manifest.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    /// full, partial, or a comma-separated list of part ids (1-6).
    #[arg(long, default_value = "full")]
    pub parts: String,
    /// Treat frames as binary silhouettes and subtract the torso masks found
    /// at the same relative paths under this directory.
    #[arg(long, value_name = "TORSO_ROOT", conflicts_with = "parts")]
    pub subtract_torso: Option<PathBuf>,
    /// Gate by the largest connected component when no instance masks exist.
    #[arg(long)]
    pub component_gating: bool,
    #[arg(long, default_value_t = 16)]
    pub min_foreground: usize,
}

pub fn parse_parts(s: &str) -> Result<PartSubset, CliError> {
    match s {
        "full" => Ok(PartSubset::full()),
        "partial" => Ok(PartSubset::partial()),
        list => {
            let ids: Result<Vec<u8>, _> = list.split(',').map(|p| p.trim().parse::<u8>()).collect();
            let ids = ids.map_err(|_| CliError::usage(format!("--parts: expected full|partial|ids, got {list:?}")))?;
            PartSubset::from_ids(&ids).map_err(|e| CliError::usage(format!("--parts: {e}")))
        }
    }
}

#[derive(Serialize)]
struct PrepReport {
    tracklets: usize,
    frames_kept: usize,
    frames_dropped: usize,
    tracklets_skipped: Vec<String>,
    parts: Vec<u8>,
}

fn prep(g: &GlobalOpts, a: &PrepArgs) -> CliResult {
    let parts = parse_parts(&a.parts)?;
    let records = load_manifest(&a.manifest)?;
    let root = resolve_root(&a.root, &a.manifest);
    let cfg = PipelineConfig {
        min_foreground: a.min_foreground,
        component_gating: a.component_gating,
    };
    let mut report = PrepReport {
        tracklets: 0,
        frames_kept: 0,
        frames_dropped: 0,
        tracklets_skipped: Vec::new(),
        parts: if a.subtract_torso.is_some() {
            PartSubset::partial().ids()
        } else {
            parts.ids()
        },
    };
    let mut out_records = Vec::with_capacity(records.len());
    for rec in &records {
        let result = match &a.subtract_torso {
            Some(torso_root) => {
                let mut frames = Vec::with_capacity(rec.frames.len());
                for f in &rec.frames {
                    let sil = read_mask(&root.join(f)).map_err(data(f))?;
                    let torso = read_mask(&torso_root.join(f)).map_err(data(f))?;
                    frames.push((sil, torso));
                }
                process_torso_subtraction(&frames, &cfg)
            }
            None => {
                let mut frames = Vec::with_capacity(rec.frames.len());
                for (i, f) in rec.frames.iter().enumerate() {
                    let map = read_label_map(&root.join(f)).map_err(data(f))?;
                    let inst = match rec.instances.get(i) {
                        Some(paths) if !paths.is_empty() => {
                            let masks: Result<Vec<_>, _> = paths.iter().map(|p| read_mask(&root.join(p))).collect();
                            InstanceMaskSet::external(masks.map_err(data(&rec.tracklet_id))?)
                        }
                        _ => InstanceMaskSet::none(),
                    };
                    frames.push((map, inst));
                }
                process_tracklet(&frames, parts, &cfg)
            }
        };
        let TrackletSilhouettes {
            silhouettes,
            kept,
            dropped,
        } = match result {
            Ok(t) => t,
            Err(crate::mask::MaskError::AllFramesDropped(_)) => {
                report.frames_dropped += rec.frames.len();
                report.tracklets_skipped.push(rec.tracklet_id.clone());
                continue;
            }
            Err(e) => return Err(CliError::data(format!("{}: {e}", rec.tracklet_id))),
        };
        fs::create_dir_all(a.out.join(&rec.tracklet_id)).map_err(data(a.out.display()))?;
        let mut frames = Vec::with_capacity(silhouettes.len());
        for (sil, idx) in silhouettes.iter().zip(&kept) {
            let rel = format!("{}/{idx:03}.pgm", rec.tracklet_id);
            write_silhouette(&a.out.join(&rel), sil).map_err(data(&rel))?;
            frames.push(rel);
        }
        report.tracklets += 1;
        report.frames_kept += frames.len();
        report.frames_dropped += dropped.len();
        out_records.push(TrackletRecord {
            frames,
            instances: Vec::new(),
            ..rec.clone()
        });
    }
    let manifest = a.out.join(MANIFEST_NAME);
    write_manifest(&manifest, &out_records).map_err(data(manifest.display()))?;
    out(format_args!(
        "prep: {} tracklets, {} frames kept, {} dropped, {} tracklets skipped, parts {:?} -> {}",
        report.tracklets,
        report.frames_kept,
        report.frames_dropped,
        report.tracklets_skipped.len(),
        report.parts,
        manifest.display()
    ));
    write_json_report(g, &report)
}

// ---------------------------------------------------------------- train

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Manifest of prepared silhouettes.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Run configuration file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set iterations=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Checkpoint path for the best (or, without validation data, final) model.
    #[arg(long)]
    pub out: PathBuf,
    /// Also save the final model here.
    #[arg(long)]
    pub last: Option<PathBuf>,
    /// Per-iteration loss history as CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

fn load_tracklet(root: &Path, rec: &TrackletRecord) -> CliResult<Vec<Silhouette>> {
    rec.frames
        .iter()
        .map(|f| read_silhouette(&root.join(f)).map_err(data(f)))
        .collect()
}

#[derive(Serialize)]
struct TrainReport {
    iterations: usize,
    train_tracklets: usize,
    train_identities: usize,
    val_tracklets: usize,
    first_loss: Option<f64>,
    final_loss: Option<f64>,
    best_iteration: usize,
    best_val_map: Option<f64>,
    checkpoint: PathBuf,
}

fn train_cmd(g: &GlobalOpts, a: &TrainArgs) -> CliResult {
    let mut run = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(data(p.display()))?;
            RunFile::parse_str(&text).map_err(data(p.display()))?
        }
        None => RunFile::default(),
    };
    if let Some(s) = g.seed {
        run.model.seed = s;
        run.batch.seed = s;
    }
    for kv in &a.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        run.set(k.trim(), v.trim()).map_err(CliError::usage)?;
    }
    run.validate().map_err(CliError::usage)?;

    let records = load_manifest(&a.manifest)?;
    let root = resolve_root(&a.root, &a.manifest);
    let mut train_set = Vec::new();
    let mut val = ValidationSet::default();
    for rec in &records {
        match rec.split {
            Split::Train => train_set.push((rec.person_id.clone(), load_tracklet(&root, rec)?)),
            Split::Val => val.tracklets.push(ValidationTracklet {
                tracklet_id: rec.tracklet_id.clone(),
                identity: rec.person_id.clone(),
                camera: rec.camera_id.clone(),
                frames: load_tracklet(&root, rec)?,
            }),
            Split::Test => {}
        }
    }
    let n_train = train_set.len();
    let index = TrainIndex::from_tracklets(train_set);
    let model = GaitModel::init(run.model.clone()).map_err(CliError::usage)?;
    let outcome = train(model, &index, &run.batch, &run.loss, &run.train, Some(&val)).map_err(data("train"))?;
    write_checkpoint(&a.out, &outcome.best).map_err(data(a.out.display()))?;
    if let Some(p) = &a.last {
        write_checkpoint(p, &outcome.last).map_err(data(p.display()))?;
    }
    if let Some(p) = &a.history {
        let csv = history_csv(&outcome.history);
        atomic_write(p, |w| w.write_all(csv.as_bytes())).map_err(data(p.display()))?;
    }
    let report = TrainReport {
        iterations: run.train.iterations,
        train_tracklets: n_train,
        train_identities: index.num_identities(),
        val_tracklets: val.tracklets.len(),
        first_loss: outcome.history.first().map(|r| r.loss),
        final_loss: outcome.history.last().map(|r| r.loss),
        best_iteration: outcome.best_iteration,
        best_val_map: outcome.best_map,
        checkpoint: a.out.clone(),
    };
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
    out(format_args!(
        "train: {} iterations on {} tracklets / {} identities; loss {} -> {}; best iteration {} (val mAP {}) -> {}",
        report.iterations,
        report.train_tracklets,
        report.train_identities,
        fmt(report.first_loss),
        fmt(report.final_loss),
        report.best_iteration,
        fmt(report.best_val_map),
        a.out.display()
    ));
    write_json_report(g, &report)
}

// ---------------------------------------------------------------- embed

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub root: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output embedding store.
    #[arg(long)]
    pub out: PathBuf,
    /// Only embed tracklets of this split (train, val or test).
    #[arg(long)]
    pub split: Option<Split>,
}

fn embed(g: &GlobalOpts, a: &EmbedArgs) -> CliResult {
    let model = read_checkpoint(&a.checkpoint).map_err(data(a.checkpoint.display()))?;
    let records = load_manifest(&a.manifest)?;
    let root = resolve_root(&a.root, &a.manifest);
    let mut entries = Vec::new();
    for rec in records.iter().filter(|r| a.split.is_none_or(|s| r.split == s)) {
        let frames = load_tracklet(&root, rec)?;
        let e = model.embed(&frames).map_err(data(&rec.tracklet_id))?;
        if !e.is_finite() {
            return Err(CliError::internal(format!("{}: non-finite embedding", rec.tracklet_id)));
        }
        entries.push(StoreEntry::from_f64(rec.tracklet_id.clone(), e.flat()));
    }
    write_embeddings(&a.out, &entries).map_err(data(a.out.display()))?;
    let dim = entries.first().map_or(0, |e| e.vector.len());
    out(format_args!("embed: {} tracklets, dim {dim} -> {}", entries.len(), a.out.display()));
    write_json_report(g, &serde_json::json!({ "tracklets": entries.len(), "dim": dim }))
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Manifest supplying identity and camera of each tracklet.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Comma-separated CMC ranks.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RANKS)]
    pub ranks: Vec<usize>,
    /// Include per-query results in the JSON report.
    #[arg(long)]
    pub per_query: bool,
}

fn records_by_id(records: &[TrackletRecord]) -> HashMap<&str, &TrackletRecord> {
    records.iter().map(|r| (r.tracklet_id.as_str(), r)).collect()
}

fn eval(g: &GlobalOpts, a: &EvalArgs) -> CliResult {
    let store = read_embeddings(&a.store).map_err(data(a.store.display()))?;
    let records = load_manifest(&a.manifest)?;
    let by_id = records_by_id(&records);
    let mut entries = Vec::with_capacity(store.len());
    for s in &store {
        let rec = by_id
            .get(s.tracklet_id.as_str())
            .ok_or_else(|| CliError::data(format!("{} is not in the manifest", s.tracklet_id)))?;
        entries.push(GalleryEntry {
            tracklet_id: s.tracklet_id.clone(),
            identity: rec.person_id.clone(),
            camera: rec.camera_id.clone(),
            feature: s.to_f64(),
        });
    }
    let set = GallerySet::new(entries).map_err(data("eval"))?;
    let mut report: MetricsReport = cross_camera_eval(&set, &a.ranks).map_err(data("eval"))?;
    out(format_args!(
        "eval: {} queries ({} excluded without a cross-camera match)",
        report.num_queries, report.excluded_queries
    ));
    out(format_args!("mAP     {:.2}", 100.0 * report.map));
    for (k, v) in &report.rank {
        out(format_args!("rank-{k:<3} {:.2}", 100.0 * v));
    }
    if !a.per_query {
        report.per_query.clear();
    }
    write_json_report(g, &report)
}

// ---------------------------------------------------------------- casia-manifest

#[derive(Debug, Args)]
pub struct CasiaManifestArgs {
    /// Dataset root laid out as ID/{nm,bg,cl}-NN/VVV/frames.
    #[arg(long)]
    pub root: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn casia_manifest(g: &GlobalOpts, a: &CasiaManifestArgs) -> CliResult {
    let records = build_casia_manifest(&a.root).map_err(data(a.root.display()))?;
    write_manifest(&a.out, &records).map_err(data(a.out.display()))?;
    let train = records.iter().filter(|r| r.split == Split::Train).count();
    out(format!("{} tracklets ({train} train, {} test)", records.len(), records.len() - train));
    write_json_report(g, &serde_json::json!({ "tracklets": records.len(), "train": train }))
}

// ---------------------------------------------------------------- casia-eval

#[derive(Debug, Args)]
pub struct CasiaEvalArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// CASIA-B manifest (view, condition and sequence per tracklet).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Probe sets to report: nm, bg, cl.
    #[arg(long, value_delimiter = ',', default_value = "nm,bg,cl")]
    pub probe: Vec<ProbeSet>,
}

fn casia_eval(g: &GlobalOpts, a: &CasiaEvalArgs) -> CliResult {
    let store = read_embeddings(&a.store).map_err(data(a.store.display()))?;
    let records = load_manifest(&a.manifest)?;
    let by_id = records_by_id(&records);
    let mut entries = Vec::with_capacity(store.len());
    for s in &store {
        let rec = by_id
            .get(s.tracklet_id.as_str())
            .ok_or_else(|| CliError::data(format!("{} is not in the manifest", s.tracklet_id)))?;
        let (Some(view), Some(condition), Some(sequence)) = (rec.view, rec.condition, rec.sequence) else {
            return Err(CliError::data(format!("{} lacks view/condition/sequence", rec.tracklet_id)));
        };
        entries.push(CasiaEntry {
            identity: rec.person_id.clone(),
            view,
            condition,
            sequence,
            feature: s.to_f64(),
        });
    }
    let mut reports: Vec<CasiaReport> = Vec::new();
    for &p in &a.probe {
        reports.push(casia_b_eval(&entries, p).map_err(data(p.label()))?);
    }
    out(CasiaReport::table_header());
    for r in &reports {
        out(r.table_row());
    }
    write_json_report(g, &reports)
}

// ---------------------------------------------------------------- fuse

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn fuse_cmd(g: &GlobalOpts, a: &FuseArgs) -> CliResult {
    let sa = read_embeddings(&a.a).map_err(data(a.a.display()))?;
    let sb = read_embeddings(&a.b).map_err(data(a.b.display()))?;
    let b_by_id: BTreeMap<&str, &StoreEntry> = sb.iter().map(|e| (e.tracklet_id.as_str(), e)).collect();
    if sa.len() != sb.len() {
        return Err(CliError::data(format!(
            "stores hold different tracklet sets ({} vs {})",
            sa.len(),
            sb.len()
        )));
    }
    let mut fused = Vec::with_capacity(sa.len());
    for ea in &sa {
        let eb = b_by_id
            .get(ea.tracklet_id.as_str())
            .ok_or_else(|| CliError::data(format!("{} missing from {}", ea.tracklet_id, a.b.display())))?;
        let v = fuse(&ea.to_f64(), &eb.to_f64()).map_err(data(&ea.tracklet_id))?;
        fused.push(StoreEntry::from_f64(ea.tracklet_id.clone(), &v));
    }
    write_embeddings(&a.out, &fused).map_err(data(a.out.display()))?;
    let dim = fused.first().map_or(0, |e| e.vector.len());
    out(format_args!("fuse: {} tracklets, dim {dim} -> {}", fused.len(), a.out.display()));
    write_json_report(g, &serde_json::json!({ "tracklets": fused.len(), "dim": dim }))
}

// ---------------------------------------------------------------- aggregate

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// JSON lines of `{"tracklet_id": ..., "frames": [[f64, ...], ...]}`.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Average non-overlapping chunks of this many frames, then the chunks.
    #[arg(long)]
    pub chunk: Option<usize>,
}

#[derive(Deserialize)]
struct FrameFeatures {
    tracklet_id: String,
    frames: Vec<Vec<f64>>,
}

fn aggregate(g: &GlobalOpts, a: &AggregateArgs) -> CliResult {
    let text = fs::read_to_string(&a.features).map_err(data(a.features.display()))?;
    let mode = a.chunk.map_or(Aggregation::FrameMean, Aggregation::ChunkMean);
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: FrameFeatures =
            serde_json::from_str(line).map_err(|e| CliError::data(format!("{} line {}: {e}", a.features.display(), i + 1)))?;
        let v = aggregate_external_features(&f.frames, mode).map_err(data(&f.tracklet_id))?;
        entries.push(StoreEntry::from_f64(f.tracklet_id, &v));
    }
    write_embeddings(&a.out, &entries).map_err(data(a.out.display()))?;
    out(format_args!("aggregate: {} tracklets -> {}", entries.len(), a.out.display()));
    write_json_report(g, &serde_json::json!({ "tracklets": entries.len() }))
}
