//! CSHD shard files: a JSON header followed by fixed-layout patch records.
//!
//! Layout: `CSHD1\n`, u64 LE header length, header JSON, then per record
//! `4 * D^3` f32 LE channels, `D^3` target bytes, u32 LE metadata length,
//! metadata JSON.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{sample_patch, PatchMeta, PatchSample, SamplerConfig, SourceVolume};
use crate::error::{Error, Result};
use crate::transforms::WindowBank;

pub const SHARD_MAGIC: &[u8; 6] = b"CSHD1\n";
const MAX_HEADER_BYTES: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardHeader {
    pub config: SamplerConfig,
    pub record_count: u64,
    pub patch_size: usize,
    pub channel_order: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardSummary {
    pub record_count: u64,
    pub calcified: u64,
    pub noncalcified: u64,
    pub no_lesion: u64,
    pub empty_target_fraction: f64,
    pub workers: usize,
    pub elapsed_s: f64,
    pub patches_per_second: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShardRecord {
    pub channels: Vec<f32>,
    pub target: Vec<u8>,
    pub meta: PatchMeta,
}

fn encode_record(sample: &PatchSample) -> Result<Vec<u8>> {
    let meta = serde_json::to_vec(&sample.meta)?;
    let meta_len = u32::try_from(meta.len())
        .map_err(|_| Error::InvalidArgument(format!("metadata of {} bytes", meta.len())))?;
    let mut buf = Vec::with_capacity(4 * sample.channels.data.len() + sample.target.len() + 4 + meta.len());
    for v in &sample.channels.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&sample.target.voxels);
    buf.extend_from_slice(&meta_len.to_le_bytes());
    buf.extend_from_slice(&meta);
    Ok(buf)
}

fn write_header(w: &mut impl Write, json: &[u8]) -> std::io::Result<()> {
    w.write_all(SHARD_MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(json)
}

/// Write `count` patches, round-robin over `volumes`, to `path`. Record `i`
/// is `sample_patch(volumes[i % n], i)`; with `workers > 1` patches are
/// produced in parallel and reordered so the file is identical to a serial
/// run.
pub fn generate_shard(
    volumes: &[SourceVolume],
    count: u64,
    config: &SamplerConfig,
    path: &Path,
    workers: usize,
) -> Result<ShardSummary> {
    config.validate()?;
    if volumes.is_empty() && count > 0 {
        return Err(Error::InvalidArgument("no source volumes".into()));
    }
    let workers = workers.max(1);
    let start = Instant::now();
    let io = |e| Error::io(path, e);
    let file = File::create(path).map_err(io)?;
    let mut out = BufWriter::new(file);
    let header = ShardHeader {
        config: config.clone(),
        record_count: count,
        patch_size: config.patch_size,
        channel_order: config.windows.channel_names(),
    };
    write_header(&mut out, &serde_json::to_vec(&header)?).map_err(io)?;

    let mut summary = ShardSummary {
        record_count: count,
        calcified: 0,
        noncalcified: 0,
        no_lesion: 0,
        empty_target_fraction: 0.0,
        workers,
        elapsed_s: 0.0,
        patches_per_second: 0.0,
    };
    let mut empty_targets = 0u64;
    let mut tally = |s: &PatchSample| {
        match s.meta.lesion_kind {
            Some(crate::synth::LesionKind::Calcified) => summary.calcified += 1,
            Some(crate::synth::LesionKind::Noncalcified) => summary.noncalcified += 1,
            None => summary.no_lesion += 1,
        }
        if s.meta.target_voxels == 0 {
            empty_targets += 1;
        }
    };

    let produce = |i: u64| -> Result<(PatchSample, Vec<u8>)> {
        let v = &volumes[(i % volumes.len() as u64) as usize];
        let s = sample_patch(&v.volume, &v.artery, &v.id, i, config)
            .map_err(|e| Error::Patch { index: i, source: Box::new(e) })?;
        let bytes = encode_record(&s)?;
        Ok((s, bytes))
    };

    if workers == 1 || count <= 1 {
        for i in 0..count {
            let (s, bytes) = produce(i)?;
            tally(&s);
            out.write_all(&bytes).map_err(io)?;
        }
    } else {
        let next = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);
        let (tx, rx) = mpsc::sync_channel::<(u64, Result<(PatchSample, Vec<u8>)>)>(2 * workers);
        std::thread::scope(|scope| -> Result<()> {
            for _ in 0..workers {
                let tx = tx.clone();
                let (next, abort, produce) = (&next, &abort, &produce);
                scope.spawn(move || loop {
                    if abort.load(Ordering::Relaxed) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::Relaxed) as u64;
                    if i >= count {
                        break;
                    }
                    if tx.send((i, produce(i))).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            let mut pending: BTreeMap<u64, Result<(PatchSample, Vec<u8>)>> = BTreeMap::new();
            let mut want = 0u64;
            let result = (|| {
                for (i, r) in rx.iter() {
                    pending.insert(i, r);
                    while let Some(r) = pending.remove(&want) {
                        let (s, bytes) = r?;
                        tally(&s);
                        out.write_all(&bytes).map_err(io)?;
                        want += 1;
                    }
                }
                Ok(())
            })();
            if result.is_err() {
                abort.store(true, Ordering::Relaxed);
                // Drain so blocked senders can observe the abort flag.
                for _ in rx.iter() {}
            }
            result
        })?;
    }
    out.flush().map_err(io)?;

    let elapsed = start.elapsed().as_secs_f64();
    summary.empty_target_fraction = if count == 0 { 0.0 } else { empty_targets as f64 / count as f64 };
    summary.elapsed_s = elapsed;
    summary.patches_per_second = if elapsed > 0.0 { count as f64 / elapsed } else { 0.0 };
    Ok(summary)
}

/// Sequential and random access to a shard's records.
pub struct ShardReader {
    path: PathBuf,
    file: BufReader<File>,
    header: ShardHeader,
    offsets: Vec<u64>,
    cursor: u64,
}

impl ShardReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let io = |e| Error::io(&path, e);
        let len = std::fs::metadata(&path).map_err(io)?.len();
        let mut file = BufReader::new(File::open(&path).map_err(io)?);
        let mut magic = [0u8; 6];
        if file.read_exact(&mut magic).is_err() || &magic != SHARD_MAGIC {
            return Err(Error::Format(format!("{} is not a CSHD shard (bad magic)", path.display())));
        }
        let header_len = read_u64(&mut file).map_err(|_| Error::Corrupt("truncated shard header".into()))?;
        if header_len > MAX_HEADER_BYTES || 14 + header_len > len {
            return Err(Error::Corrupt(format!("shard header length {header_len} exceeds file")));
        }
        let mut json = vec![0u8; header_len as usize];
        file.read_exact(&mut json).map_err(io)?;
        let header: ShardHeader = serde_json::from_slice(&json)?;
        let d = header.patch_size as u64;
        let fixed = WindowBank::CHANNELS as u64 * 4 * d * d * d + d * d * d;

        let mut offsets = Vec::with_capacity(header.record_count as usize);
        let mut pos = 14 + header_len;
        for i in 0..header.record_count {
            if pos + fixed + 4 > len {
                return Err(Error::Corrupt(format!("record {i} truncated")));
            }
            offsets.push(pos);
            file.seek(SeekFrom::Start(pos + fixed)).map_err(io)?;
            let meta_len = u64::from(read_u32(&mut file).map_err(io)?);
            pos += fixed + 4 + meta_len;
            if pos > len {
                return Err(Error::Corrupt(format!("record {i} metadata truncated")));
            }
        }
        if pos != len {
            return Err(Error::Corrupt(format!("{} trailing bytes after last record", len - pos)));
        }
        Ok(Self { path, file, header, offsets, cursor: 0 })
    }

    pub fn header(&self) -> &ShardHeader {
        &self.header
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Raw bytes of record `index`: channels, target, meta length, meta.
    pub fn read_raw(&mut self, index: usize) -> Result<Vec<u8>> {
        let Some(&start) = self.offsets.get(index) else {
            return Err(Error::InvalidArgument(format!(
                "record {index} out of range (shard has {})",
                self.offsets.len()
            )));
        };
        let end = self.offsets.get(index + 1).copied().unwrap_or_else(|| {
            std::fs::metadata(&self.path).map(|m| m.len()).unwrap_or(start)
        });
        let mut buf = vec![0u8; (end - start) as usize];
        let path = self.path.clone();
        self.file.seek(SeekFrom::Start(start)).map_err(|e| Error::io(&path, e))?;
        self.file.read_exact(&mut buf).map_err(|e| Error::io(&path, e))?;
        Ok(buf)
    }

    pub fn read(&mut self, index: usize) -> Result<ShardRecord> {
        let raw = self.read_raw(index)?;
        let n = self.header.patch_size.pow(3);
        let c = WindowBank::CHANNELS * n;
        let channels = raw[..4 * c]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let target = raw[4 * c..4 * c + n].to_vec();
        let meta = serde_json::from_slice(&raw[4 * c + n + 4..])?;
        Ok(ShardRecord { channels, target, meta })
    }
}

impl Iterator for ShardReader {
    type Item = Result<ShardRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.cursor as usize >= self.offsets.len() {
            return None;
        }
        let r = self.read(self.cursor as usize);
        self.cursor += 1;
        Some(r)
    }
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
