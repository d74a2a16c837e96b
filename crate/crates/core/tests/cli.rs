use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use partial_gait::data_io::{parse_manifest, read_label_map, read_silhouette};
use partial_gait::mask::{process_tracklet, InstanceMaskSet, PartSubset, PipelineConfig};

fn pgait(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgait"))
        .args(args)
        .env_remove("PGAIT_DATA_ROOT")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = pgait(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn last_json(stderr: &[u8]) -> serde_json::Value {
    let text = String::from_utf8_lossy(stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.clone(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn synth(dir: &Path, ids: &str) {
    ok(&[
        "synth", "--out", s(dir), "--identities", ids, "--frames", "10", "--val-fraction", "0.25",
        "--test-fraction", "0.25", "--seed", "5",
    ]);
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let out = pgait(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(last_json(&out.stderr)["error"], "usage");
}

#[test]
fn bad_part_list_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pgait(&["prep", "--manifest", "m.jsonl", "--out", s(tmp.path()), "--parts", "0,2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_store_is_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("none.gbe");
    let out = pgait(&["eval", "--store", s(&missing), "--manifest", s(&missing)]);
    assert_eq!(out.status.code(), Some(3));
    let err = last_json(&out.stderr);
    assert_eq!(err["error"], "data");
    assert!(err["message"].is_string());
}

#[test]
fn partial_prep_matches_library_and_drops_torso() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, full, partial) = (tmp.path().join("d"), tmp.path().join("f"), tmp.path().join("p"));
    synth(&data, "4");
    let manifest = data.join("manifest.jsonl");
    ok(&["prep", "--manifest", s(&manifest), "--out", s(&full), "--parts", "full"]);
    ok(&["prep", "--manifest", s(&manifest), "--out", s(&partial), "--parts", "partial"]);

    let (mut full_px, mut partial_px) = (0, 0);
    for rec in parse_manifest(&manifest).unwrap() {
        let maps: Vec<_> = rec
            .frame_paths(&data)
            .iter()
            .map(|p| (read_label_map(p).unwrap(), InstanceMaskSet::none()))
            .collect();
        let want = process_tracklet(&maps, PartSubset::partial(), &PipelineConfig::default()).unwrap();
        let prepped: Vec<_> = parse_manifest(&partial.join("manifest.jsonl"))
            .unwrap()
            .into_iter()
            .find(|r| r.tracklet_id == rec.tracklet_id)
            .unwrap()
            .frame_paths(&partial)
            .iter()
            .map(|p| read_silhouette(p).unwrap())
            .collect();
        assert_eq!(prepped, want.silhouettes);
        for (i, p) in prepped.iter().enumerate() {
            let f = read_silhouette(&full.join(&rec.tracklet_id).join(format!("{i:03}.pgm"))).unwrap();
            assert!(p.grid().is_subset_of(f.grid()));
            full_px += f.foreground_count();
            partial_px += p.foreground_count();
        }
    }
    assert!(partial_px < full_px);
}

fn pipeline(tmp: &Path) -> (serde_json::Value, PathBuf) {
    let (data, prep) = (tmp.join("d"), tmp.join("p"));
    synth(&data, "8");
    ok(&["prep", "--manifest", s(&data.join("manifest.jsonl")), "--out", s(&prep), "--parts", "partial"]);
    let manifest = prep.join("manifest.jsonl");
    let ckpt = tmp.join("model.gbm");
    ok(&[
        "train", "--manifest", s(&manifest), "--out", s(&ckpt), "--set", "iterations=3", "--set", "p=2",
        "--set", "k=2", "--set", "c=4", "--seed", "3", "--history", s(&tmp.join("history.csv")),
    ]);
    let store = tmp.join("test.gbe");
    ok(&[
        "embed", "--manifest", s(&manifest), "--checkpoint", s(&ckpt), "--out", s(&store), "--split", "test",
    ]);
    let report = tmp.join("report.json");
    let out = ok(&["eval", "--store", s(&store), "--manifest", s(&manifest), "--json", s(&report)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("mAP"));
    let fused = tmp.join("fused.gbe");
    ok(&["fuse", "--a", s(&store), "--b", s(&store), "--out", s(&fused)]);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    (json, prep)
}

#[test]
fn end_to_end_pipeline_is_deterministic_and_leaves_inputs_alone() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, prep) = pipeline(a.path());
    let (rb, _) = pipeline(b.path());
    let map = ra["mAP"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&map), "{ra}");
    assert_eq!(ra, rb);
    assert_eq!(
        std::fs::read(a.path().join("model.gbm")).unwrap(),
        std::fs::read(b.path().join("model.gbm")).unwrap()
    );

    let before = snapshot(&prep);
    let manifest = prep.join("manifest.jsonl");
    ok(&[
        "embed", "--manifest", s(&manifest), "--checkpoint", s(&a.path().join("model.gbm")), "--out",
        s(&a.path().join("again.gbe")),
    ]);
    assert_eq!(before, snapshot(&prep));
}
