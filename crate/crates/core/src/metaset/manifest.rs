//! Line-delimited meta-manifest.
//!
//! The first line is a header with provenance and the split; every further
//! line is one record pointing at a binary stats file relative to the
//! manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::build::{MetaDataset, Provenance, SampleSetRecord};
use super::recipe::TransformRecipe;
use crate::codec::hex_digest;
use crate::error::{Error, Result};
use crate::stats::DatasetStats;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const STATS_DIR: &str = "stats";

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header {
        version: u32,
        provenance: Provenance,
        train: Vec<usize>,
        val: Vec<usize>,
    },
    Record {
        id: usize,
        recipe: TransformRecipe,
        fd: f64,
        accuracy: f64,
        image_count: usize,
        stats: String,
    },
}

fn stats_path(id: usize) -> String {
    format!("{STATS_DIR}/record_{id:05}.bin")
}

/// Manifest text plus the stats files it references, in record order.
pub fn encode_manifest(meta: &MetaDataset) -> Result<(String, Vec<(String, Vec<u8>)>)> {
    let mut text = String::new();
    let header = Line::Header {
        version: 1,
        provenance: meta.provenance.clone(),
        train: meta.train.clone(),
        val: meta.val.clone(),
    };
    let to_json = |l: &Line| serde_json::to_string(l).map_err(|e| Error::Format(e.to_string()));
    text.push_str(&to_json(&header)?);
    text.push('\n');
    let mut files = Vec::with_capacity(meta.records.len());
    for r in &meta.records {
        let path = stats_path(r.id);
        let line = Line::Record {
            id: r.id,
            recipe: r.recipe.clone(),
            fd: r.fd,
            accuracy: r.accuracy,
            image_count: r.image_count,
            stats: path.clone(),
        };
        text.push_str(&to_json(&line)?);
        text.push('\n');
        files.push((path, r.stats.to_bytes()?));
    }
    Ok((text, files))
}

/// SHA-256 over the manifest text and every referenced stats file.
pub fn manifest_hash(meta: &MetaDataset) -> Result<String> {
    let (text, files) = encode_manifest(meta)?;
    let mut bytes = text.into_bytes();
    for (_, b) in files {
        bytes.extend(b);
    }
    Ok(hex_digest(&bytes))
}

/// Write `manifest.jsonl` and `stats/` under `dir`; returns the manifest path.
pub fn write_manifest(meta: &MetaDataset, dir: &Path) -> Result<PathBuf> {
    let (text, files) = encode_manifest(meta)?;
    fs::create_dir_all(dir.join(STATS_DIR))?;
    for (rel, bytes) in files {
        fs::write(dir.join(rel), bytes)?;
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, text)?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<MetaDataset> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let parse = |l: &str| serde_json::from_str::<Line>(l).map_err(|e| Error::Format(format!("manifest: {e}")));
    let (provenance, train, val) = match lines.next().map(parse).transpose()? {
        Some(Line::Header {
            version: 1,
            provenance,
            train,
            val,
        }) => (provenance, train, val),
        Some(Line::Header { version, .. }) => {
            return Err(Error::Format(format!("unsupported manifest version {version}")))
        }
        _ => return Err(Error::Format("manifest must start with a header line".into())),
    };
    let mut records = Vec::new();
    for line in lines {
        match parse(line)? {
            Line::Record {
                id,
                recipe,
                fd,
                accuracy,
                image_count,
                stats,
            } => {
                let stats = DatasetStats::from_bytes(&fs::read(base.join(&stats))?)?;
                records.push(SampleSetRecord {
                    id,
                    recipe,
                    stats,
                    fd,
                    accuracy,
                    image_count,
                });
            }
            Line::Header { .. } => return Err(Error::Format("second header line in manifest".into())),
        }
    }
    let meta = MetaDataset {
        records,
        train,
        val,
        provenance,
    };
    meta.check_invariants()?;
    Ok(meta)
}
