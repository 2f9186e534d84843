//! Directory listing, stem matching and map file I/O.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use rdk_core::depth::disparity_to_depth;
use rdk_core::io::{read_depth_png, read_depth_rdk, read_rdk1, write_depth_png, write_depth_rdk};
use rdk_core::{DepthMap, DisparityMap};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MapKind {
    Depth,
    Disparity,
}

/// Files with one of `exts` keyed by stem. Two files sharing a stem are an
/// error.
pub fn list_by_stem(dir: &Path, exts: &[&str]) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    let entries = std::fs::read_dir(dir).with_context(|| format!("reading directory {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !ext.is_some_and(|e| exts.contains(&e.as_str())) {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        if let Some(prev) = out.insert(stem.clone(), path.clone()) {
            return Err(Failure::new(
                "duplicate_stem",
                format!("{} and {} share the stem `{stem}`", prev.display(), path.display()),
            )
            .into());
        }
    }
    Ok(out)
}

fn ext_of(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or_default().to_ascii_lowercase()
}

/// Reads a depth map (`.png` 16-bit with `divisor`, or `.rdk`) or a
/// disparity map (`.rdk` only) converted to depth.
pub fn load_map(path: &Path, kind: MapKind, divisor: f64, min_depth: f64, max_depth: f64) -> Result<DepthMap> {
    let map = match (kind, ext_of(path).as_str()) {
        (MapKind::Depth, "png") => read_depth_png(path, divisor)?,
        (MapKind::Depth, _) => read_depth_rdk(path)?,
        (MapKind::Disparity, "rdk") => {
            let (w, h, values) = read_rdk1(path)?;
            disparity_to_depth(&DisparityMap::new(w, h, values)?, min_depth, max_depth)?
        }
        (MapKind::Disparity, _) => {
            return Err(Failure::new("format", "disparity maps must be RDK1 files").into());
        }
    };
    Ok(map)
}

/// Writes a depth map in the format implied by the extension of `path`.
pub fn save_depth(map: &DepthMap, path: &Path, divisor: f64) -> Result<()> {
    match ext_of(path).as_str() {
        "png" => write_depth_png(map, path, divisor)?,
        _ => write_depth_rdk(map, path)?,
    }
    Ok(())
}
