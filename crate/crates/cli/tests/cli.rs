use std::path::Path;
use std::process::{Command, Output};

use plaque_engine::archcheck::ArchSpec;
use plaque_engine::volume::write_cvol;
use plaque_engine::MaskVolume;
use serde_json::Value;

fn plaque(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plaque")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json_lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn line_mask(offset_y: usize) -> MaskVolume {
    let mut m = MaskVolume::filled([8, 8, 8], [1.0; 3], 0).unwrap();
    for x in 1..7 {
        let i = m.index(x, 3 + offset_y, 4);
        m.voxels[i] = 1;
    }
    m
}

#[test]
fn phantom_writes_pairs_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = plaque(&["phantom", "--out", s(out), "--seed", "7", "--count", "1", "--dims", "64,64,64"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["phantom_000_volume.cvol", "phantom_000_mask.cvol"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
    }
    let manifest: Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "phantom");
    assert_eq!(manifest["seed"], 7);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(plaque(&["phantom", "--seed", "1"]).status.code(), Some(2));
    assert_eq!(plaque(&["no-such-command"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let o = plaque(&["phantom", "--out", s(dir.path()), "--seed", "1", "--dims", "8,8,8"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn shard_command_paths() {
    let dir = tempfile::tempdir().unwrap();
    let vols = dir.path().join("vols");
    assert!(plaque(&["phantom", "--out", s(&vols), "--seed", "1", "--dims", "64,64,64"]).status.success());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, "{\"patch_size\": 16}").unwrap();

    let out = dir.path().join("empty.cshd");
    let o = plaque(&["shard", "--volumes", s(&vols), "--config", s(&cfg), "--count", "0", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["record_count"], 0);
    assert!(out.exists());

    std::fs::write(&cfg, "{\n  \"patch_size\": 16,\n  \"bogus\": 1\n}").unwrap();
    let o = plaque(&["shard", "--volumes", s(&vols), "--config", s(&cfg), "--count", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    std::fs::write(&cfg, "{\"patch_size\": 16}").unwrap();
    std::fs::copy(vols.join("phantom_000_volume.cvol"), vols.join("orphan_volume.cvol")).unwrap();
    let o = plaque(&["shard", "--volumes", s(&vols), "--config", s(&cfg), "--count", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("orphan"));
}

#[test]
fn eval_seg_matches_hand_values() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, gt) = (dir.path().join("pred"), dir.path().join("gt"));
    std::fs::create_dir_all(&pred).unwrap();
    std::fs::create_dir_all(&gt).unwrap();
    write_cvol(&line_mask(0), gt.join("same.cvol")).unwrap();
    write_cvol(&line_mask(0), pred.join("same.cvol")).unwrap();
    write_cvol(&line_mask(0), gt.join("shift.cvol")).unwrap();
    write_cvol(&line_mask(1), pred.join("shift.cvol")).unwrap();
    let report = dir.path().join("seg.jsonl");
    let o = plaque(&["eval-seg", "--pred", s(&pred), "--gt", s(&gt), "--report", s(&report)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = json_lines(&report);
    let case = |c: &str| lines.iter().find(|l| l["case"] == c).unwrap().clone();
    assert_eq!(case("same")["dice"], 1.0);
    assert_eq!(case("same")["cldice"], 1.0);
    assert_eq!(case("same")["msd_voxels"], 0.0);
    // Parallel one-voxel lines: no overlap, every surface voxel one step away.
    assert_eq!(case("shift")["dice"], 0.0);
    assert_eq!(case("shift")["msd_voxels"], 1.0);
    assert_eq!(lines.last().unwrap()["mean_dice"], 0.5);
    assert!(dir.path().join("seg.jsonl.manifest.json").exists());

    let bad = MaskVolume::filled([4, 4, 4], [1.0; 3], 0).unwrap();
    write_cvol(&bad, pred.join("same.cvol")).unwrap();
    let o = plaque(&["eval-seg", "--pred", s(&pred), "--gt", s(&gt), "--report", s(&report)]);
    assert_eq!(o.status.code(), Some(1));
    let lines = json_lines(&report);
    assert!(lines.iter().find(|l| l["case"] == "same").unwrap()["error"].is_string());
    assert_eq!(lines.iter().find(|l| l["case"] == "shift").unwrap()["dice"], 0.0);
}

#[test]
fn eval_det_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, gt) = (dir.path().join("pred"), dir.path().join("gt"));
    std::fs::create_dir_all(&pred).unwrap();
    std::fs::create_dir_all(&gt).unwrap();
    // A 12-voxel lesion; prediction covers 11 of them.
    let mut g = MaskVolume::filled([16, 4, 4], [1.0; 3], 0).unwrap();
    let mut p = g.clone();
    for x in 2..14 {
        let i = g.index(x, 1, 1);
        g.voxels[i] = 1;
        if x > 2 {
            p.voxels[i] = 1;
        }
    }
    write_cvol(&g, gt.join("c.cvol")).unwrap();
    write_cvol(&p, pred.join("c.cvol")).unwrap();
    let report = dir.path().join("det.jsonl");
    for (min, f1) in [("10", 1.0), ("11", 0.0)] {
        let o = plaque(&["eval-det", "--pred", s(&pred), "--gt", s(&gt), "--min-overlap", min, "--report", s(&report)]);
        assert!(o.status.success());
        assert_eq!(json_lines(&report).last().unwrap()["f1"], f1, "min overlap {min}");
    }
}

#[test]
fn roc_command() {
    let dir = tempfile::tempdir().unwrap();
    let (sc, lb, rep) = (dir.path().join("s.txt"), dir.path().join("l.txt"), dir.path().join("roc.json"));
    std::fs::write(&sc, "# scores\n0.1, 0.4\n0.35 0.8\n").unwrap();
    std::fs::write(&lb, "0 0 1 1\n").unwrap();
    let o = plaque(&["roc", "--scores", s(&sc), "--labels", s(&lb), "--resamples", "50", "--report", s(&rep)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&std::fs::read(&rep).unwrap()).unwrap();
    assert_eq!(r["auc"], 0.75);
    std::fs::write(&lb, "0 0 1 2\n").unwrap();
    assert_eq!(plaque(&["roc", "--scores", s(&sc), "--labels", s(&lb)]).status.code(), Some(2));
}

#[test]
fn arch_check_command() {
    assert!(plaque(&["arch-check"]).status.success());
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("arch.json");
    let mut spec = ArchSpec::default();
    spec.encoder[1].stride = [1, 1, 1];
    std::fs::write(&spec_path, serde_json::to_vec(&spec).unwrap()).unwrap();
    let report = dir.path().join("arch.json.report");
    let o = plaque(&["arch-check", "--spec", s(&spec_path), "--report", s(&report)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(report.exists());
    std::fs::write(&spec_path, "{ \"encoder\": [").unwrap();
    assert_eq!(plaque(&["arch-check", "--spec", s(&spec_path)]).status.code(), Some(2));
}

#[test]
fn inspect_dumps_slices() {
    let dir = tempfile::tempdir().unwrap();
    let vols = dir.path().join("vols");
    assert!(plaque(&["phantom", "--out", s(&vols), "--seed", "5", "--dims", "64,64,64"]).status.success());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"patch_size": 32, "lesion_probability": 1.0}"#).unwrap();
    let shard = dir.path().join("x.cshd");
    assert!(plaque(&["shard", "--volumes", s(&vols), "--config", s(&cfg), "--count", "2", "--out", s(&shard)]).status.success());

    let out = dir.path().join("slices");
    assert_eq!(plaque(&["inspect", "--shard", s(&shard), "--index", "2", "--out", s(&out)]).status.code(), Some(1));
    let o = plaque(&["inspect", "--shard", s(&shard), "--index", "1", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let pgms: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "pgm"))
        .collect();
    assert_eq!(pgms.len(), 5);
    let target = std::fs::read(out.join("record1_target.pgm")).unwrap();
    assert!(target.starts_with(b"P5\n32 32\n255\n"));
    assert!(target[13..].iter().any(|&b| b > 0), "lesion slice should show the target");
}
