//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use plaque_engine::archcheck::{validate_arch, ArchSpec};
use plaque_engine::metrics::{bootstrap_auc_ci, match_lesions, segmentation_scores, DetectionScores};
use plaque_engine::phantom::{generate_phantom, PhantomConfig};
use plaque_engine::rng::derive_seed;
use plaque_engine::sampler::{generate_shard, prepare_volume, SamplerConfig, ShardReader, SourceVolume};
use plaque_engine::volume::{read_cvol, read_nifti_subset, write_cvol, CvolData};
use plaque_engine::{MaskVolume, Volume};

use crate::manifest::{manifest_path, RunManifest};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<plaque_engine::Error> for CliError {
    fn from(e: plaque_engine::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn runtime(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| runtime(path, e))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| runtime(path, e))
}

/// Sorted `(file stem, path)` entries of `dir` with the given extensions.
fn list_files(dir: &Path, exts: &[&str]) -> CliResult<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| runtime(dir, e))? {
        let path = entry.map_err(|e| runtime(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if path.is_file() && exts.contains(&ext) {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();
            out.push((stem, path));
        }
    }
    out.sort();
    Ok(out)
}

fn load_volume(path: &Path) -> CliResult<Volume> {
    if path.extension().is_some_and(|e| e == "nii") {
        return Ok(read_nifti_subset(path)?);
    }
    match read_cvol(path)? {
        CvolData::Volume(v) => Ok(v),
        CvolData::Mask(_) => Err(runtime(path, "expected an f32 volume, found a mask")),
    }
}

fn load_mask(path: &Path) -> CliResult<MaskVolume> {
    if path.extension().is_some_and(|e| e == "nii") {
        let v = read_nifti_subset(path)?;
        let voxels = v.voxels.iter().map(|&x| u8::from(x != 0.0)).collect();
        return Ok(MaskVolume::new(v.dims, v.spacing, voxels)?);
    }
    match read_cvol(path)? {
        CvolData::Mask(m) => Ok(m),
        CvolData::Volume(_) => Err(runtime(path, "expected a u8 mask, found an f32 volume")),
    }
}

pub fn phantom(out: &Path, seed: u64, count: usize, dims: [usize; 3]) -> CliResult<()> {
    let started = Instant::now();
    let base = PhantomConfig { dims, ..PhantomConfig::default() };
    base.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    create_dir(out)?;
    let mut manifest = RunManifest::new("phantom", json!({ "count": count, "phantom": base }), Some(seed));
    for i in 0..count {
        let cfg = PhantomConfig { seed: derive_seed(seed, "phantom-index", i as u64), ..base.clone() };
        let (volume, mask) = generate_phantom(&cfg)?;
        let vp = out.join(format!("phantom_{i:03}_volume.cvol"));
        let mp = out.join(format!("phantom_{i:03}_mask.cvol"));
        write_cvol(&volume, &vp)?;
        write_cvol(&mask, &mp)?;
        manifest.outputs.extend([vp, mp]);
    }
    manifest.throughput = Some(count as f64 / started.elapsed().as_secs_f64().max(1e-9));
    manifest.finish(started, &manifest_path(out, true))
}

fn read_config(path: &Path) -> CliResult<SamplerConfig> {
    let text = fs::read_to_string(path).map_err(|e| runtime(path, e))?;
    let config: SamplerConfig = serde_json::from_str(&text).map_err(|e| {
        CliError::Usage(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column()))
    })?;
    config.validate().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(config)
}

/// Pair `<id>_volume.{cvol,nii}` with `<id>_mask.{cvol,nii}`.
fn collect_pairs(dir: &Path) -> CliResult<Vec<(String, PathBuf, PathBuf)>> {
    let mut vols: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut masks: BTreeMap<String, PathBuf> = BTreeMap::new();
    for (stem, path) in list_files(dir, &["cvol", "nii"])? {
        if let Some(id) = stem.strip_suffix("_volume") {
            vols.insert(id.to_string(), path);
        } else if let Some(id) = stem.strip_suffix("_mask") {
            masks.insert(id.to_string(), path);
        }
    }
    let orphans: Vec<String> = vols
        .iter()
        .filter(|(id, _)| !masks.contains_key(*id))
        .chain(masks.iter().filter(|(id, _)| !vols.contains_key(*id)))
        .map(|(_, p)| p.display().to_string())
        .collect();
    if !orphans.is_empty() {
        return Err(CliError::Runtime(format!("unpaired volume/mask files: {}", orphans.join(", "))));
    }
    Ok(vols.into_iter().map(|(id, v)| { let m = masks[&id].clone(); (id, v, m) }).collect())
}

pub fn shard(volumes: &Path, config: &Path, count: u64, out: &Path, workers: usize) -> CliResult<()> {
    let started = Instant::now();
    let cfg = read_config(config)?;
    let pairs = collect_pairs(volumes)?;
    if pairs.is_empty() && count > 0 {
        return Err(runtime(volumes, "no volume/mask pairs found"));
    }
    let mut sources: Vec<SourceVolume> = Vec::with_capacity(pairs.len());
    let mut manifest = RunManifest::new("shard", json!({ "sampler": cfg, "count": count, "workers": workers }), Some(cfg.master_seed));
    for (id, vp, mp) in &pairs {
        let v = load_volume(vp)?;
        let m = load_mask(mp)?;
        sources.push(prepare_volume(id.clone(), v, m, &cfg).map_err(|e| runtime(vp, e))?);
        manifest.inputs.extend([vp.clone(), mp.clone()]);
    }
    manifest.inputs.push(config.to_path_buf());
    let summary = generate_shard(&sources, count, &cfg, out, workers)?;
    println!("{}", serde_json::to_string(&summary).map_err(|e| CliError::Runtime(e.to_string()))?);
    manifest.outputs.push(out.to_path_buf());
    manifest.throughput = Some(summary.patches_per_second);
    manifest.config["summary"] = serde_json::to_value(&summary).map_err(|e| CliError::Runtime(e.to_string()))?;
    manifest.finish(started, &manifest_path(out, false))
}

/// Per-case evaluation over masks paired by file name.
fn eval_cases(
    pred: &Path,
    gt: &Path,
    mut score: impl FnMut(&MaskVolume, &MaskVolume) -> plaque_engine::Result<Value>,
) -> CliResult<(Vec<Value>, usize)> {
    let gts = list_files(gt, &["cvol", "nii"])?;
    let preds: BTreeMap<String, PathBuf> = list_files(pred, &["cvol", "nii"])?.into_iter().collect();
    let mut records = Vec::new();
    let mut failed = 0;
    for (case, gp) in &gts {
        let result = match preds.get(case) {
            None => Err(format!("no prediction for case {case}")),
            Some(pp) => load_mask(pp)
                .and_then(|p| Ok((p, load_mask(gp)?)))
                .map_err(|e| e.message().to_string())
                .and_then(|(p, g)| score(&p, &g).map_err(|e| e.to_string())),
        };
        match result {
            Ok(mut v) => {
                v["case"] = json!(case);
                records.push(v);
            }
            Err(e) => {
                failed += 1;
                records.push(json!({ "case": case, "error": e }));
            }
        }
    }
    for case in preds.keys().filter(|c| !gts.iter().any(|(g, _)| g == *c)) {
        failed += 1;
        records.push(json!({ "case": case, "error": format!("no ground truth for case {case}") }));
    }
    Ok((records, failed))
}

fn write_report(path: &Path, records: &[Value], aggregate: Value) -> CliResult<()> {
    let mut buf = Vec::new();
    for r in records.iter().chain(std::iter::once(&aggregate)) {
        serde_json::to_writer(&mut buf, r).map_err(|e| CliError::Runtime(e.to_string()))?;
        buf.push(b'\n');
    }
    write_file(path, &buf)
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn eval_seg(pred: &Path, gt: &Path, report: &Path) -> CliResult<()> {
    let started = Instant::now();
    let (records, failed) = eval_cases(pred, gt, |p, g| {
        let s = segmentation_scores(p, g)?;
        Ok(serde_json::to_value(s).expect("scores serialize"))
    })?;
    let field = |k: &str| -> Vec<f64> { records.iter().filter_map(|r| r.get(k).and_then(Value::as_f64)).collect() };
    let aggregate = json!({
        "aggregate": true,
        "cases": records.len(),
        "failed": failed,
        "mean_dice": mean(&field("dice")),
        "mean_cldice": mean(&field("cldice")),
        "mean_msd_voxels": mean(&field("msd_voxels")),
    });
    write_report(report, &records, aggregate.clone())?;
    println!("{aggregate}");
    let mut manifest = RunManifest::new("eval-seg", json!({}), None);
    manifest.inputs = vec![pred.to_path_buf(), gt.to_path_buf()];
    manifest.outputs = vec![report.to_path_buf()];
    manifest.finish(started, &manifest_path(report, false))?;
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} case(s) failed; see {}", report.display())));
    }
    Ok(())
}

pub fn eval_det(pred: &Path, gt: &Path, min_overlap: usize, report: &Path) -> CliResult<()> {
    let started = Instant::now();
    let mut pooled = (0usize, 0usize, 0usize);
    let (records, failed) = eval_cases(pred, gt, |p, g| {
        let s: DetectionScores = match_lesions(p, g, min_overlap)?;
        pooled.0 += s.matched_pairs.len();
        pooled.1 += s.n_pred;
        pooled.2 += s.n_gt;
        Ok(serde_json::to_value(s).expect("scores serialize"))
    })?;
    let (m, np, ng) = pooled;
    let (precision, recall) = match (np, ng) {
        (0, 0) => (1.0, 1.0),
        _ => (
            if np == 0 { 0.0 } else { m as f64 / np as f64 },
            if ng == 0 { 0.0 } else { m as f64 / ng as f64 },
        ),
    };
    let f1 = if np == 0 && ng == 0 {
        1.0
    } else if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let aggregate = json!({
        "aggregate": true,
        "cases": records.len(),
        "failed": failed,
        "min_overlap": min_overlap,
        "matched": m,
        "n_pred": np,
        "n_gt": ng,
        "precision": precision,
        "recall": recall,
        "f1": f1,
    });
    write_report(report, &records, aggregate.clone())?;
    println!("{aggregate}");
    let mut manifest = RunManifest::new("eval-det", json!({ "min_overlap": min_overlap }), None);
    manifest.inputs = vec![pred.to_path_buf(), gt.to_path_buf()];
    manifest.outputs = vec![report.to_path_buf()];
    manifest.finish(started, &manifest_path(report, false))?;
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} case(s) failed; see {}", report.display())));
    }
    Ok(())
}

/// Numbers separated by whitespace or commas; `#` starts a comment.
fn read_numbers(path: &Path) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| runtime(path, e))?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let v: f64 = tok
                .parse()
                .map_err(|_| CliError::Usage(format!("{}: line {}: not a number: {tok:?}", path.display(), ln + 1)))?;
            out.push(v);
        }
    }
    Ok(out)
}

pub fn roc(scores: &Path, labels: &Path, resamples: usize, seed: u64, report: Option<&Path>) -> CliResult<()> {
    let started = Instant::now();
    let s = read_numbers(scores)?;
    let l: Vec<u8> = read_numbers(labels)?
        .into_iter()
        .map(|v| match v {
            0.0 => Ok(0),
            1.0 => Ok(1),
            _ => Err(CliError::Usage(format!("{}: label {v} is not 0 or 1", labels.display()))),
        })
        .collect::<CliResult<_>>()?;
    let r = bootstrap_auc_ci(&s, &l, resamples, seed)?;
    let text = serde_json::to_string(&r).map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("{text}");
    if let Some(path) = report {
        write_file(path, text.as_bytes())?;
        let mut manifest = RunManifest::new("roc", json!({ "resamples": resamples }), Some(seed));
        manifest.inputs = vec![scores.to_path_buf(), labels.to_path_buf()];
        manifest.outputs = vec![path.to_path_buf()];
        manifest.finish(started, &manifest_path(path, false))?;
    }
    Ok(())
}

pub fn arch_check(spec: Option<&Path>, report: Option<&Path>) -> CliResult<()> {
    let started = Instant::now();
    let arch = match spec {
        None => ArchSpec::default(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| runtime(p, e))?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::Usage(format!("{}: line {} column {}: {e}", p.display(), e.line(), e.column()))
            })?
        }
    };
    let r = validate_arch(&arch);
    print!("{}", r.render());
    if let Some(path) = report {
        let json = serde_json::to_vec_pretty(&r).map_err(|e| CliError::Runtime(e.to_string()))?;
        write_file(path, &json)?;
        let mut manifest = RunManifest::new("arch-check", serde_json::to_value(&arch).unwrap_or(Value::Null), None);
        manifest.inputs = spec.map(Path::to_path_buf).into_iter().collect();
        manifest.outputs = vec![path.to_path_buf()];
        manifest.finish(started, &manifest_path(path, false))?;
    }
    if r.passed() {
        Ok(())
    } else {
        let rows: Vec<&str> = r.failing_rows().iter().map(|row| row.stage.as_str()).collect();
        Err(CliError::Runtime(format!("architecture check failed (rows: {rows:?})")))
    }
}

fn pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn inspect(shard: &Path, index: usize, out: &Path) -> CliResult<()> {
    let started = Instant::now();
    let mut reader = ShardReader::open(shard)?;
    if index >= reader.len() {
        return Err(CliError::Runtime(format!(
            "record {index} out of range ({} has {} records)",
            shard.display(),
            reader.len()
        )));
    }
    let rec = reader.read(index)?;
    let d = reader.header().patch_size;
    let names = reader.header().channel_order.clone();
    // Slice through the first lesion when there is one, else the middle.
    let z = rec.meta.lesions.first().map(|l| l.anchor[2]).unwrap_or(d / 2);
    let plane = d * d;
    create_dir(out)?;
    let mut manifest = RunManifest::new("inspect", json!({ "index": index, "slice_z": z }), None);
    manifest.inputs.push(shard.to_path_buf());
    for (k, name) in names.iter().enumerate() {
        let start = k * d * plane + z * plane;
        let px: Vec<u8> = rec.channels[start..start + plane]
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        let p = out.join(format!("record{index}_ch{k}_{name}.pgm"));
        write_file(&p, &pgm(d, d, &px))?;
        manifest.outputs.push(p);
    }
    let px: Vec<u8> = rec.target[z * plane..(z + 1) * plane].iter().map(|&t| if t != 0 { 255 } else { 0 }).collect();
    let p = out.join(format!("record{index}_target.pgm"));
    write_file(&p, &pgm(d, d, &px))?;
    manifest.outputs.push(p);
    let meta_path = out.join(format!("record{index}_meta.json"));
    let meta = json!({ "slice_z": z, "meta": rec.meta });
    let mut f = fs::File::create(&meta_path).map_err(|e| runtime(&meta_path, e))?;
    serde_json::to_writer_pretty(&mut f, &meta).map_err(|e| runtime(&meta_path, e))?;
    f.flush().map_err(|e| runtime(&meta_path, e))?;
    manifest.outputs.push(meta_path);
    manifest.finish(started, &manifest_path(out, true))
}
