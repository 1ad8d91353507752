use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use scanmask::{DatasetIndex, LineMask, ReconParams};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::failure;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn load_index(data: &Path) -> Result<DatasetIndex> {
    if !data.join(scanmask::bundle::INDEX_FILE).is_file() {
        return Err(failure::data(format!("no dataset index in {}", data.display())));
    }
    Ok(DatasetIndex::load(data)?)
}

pub fn read_params(path: &Path) -> Result<ReconParams> {
    read_json(path)
}

pub fn mask_path(dir: &Path, scan_id: &str) -> PathBuf {
    dir.join(format!("{scan_id}.json"))
}

pub fn read_masks(dir: &Path, ids: &[String]) -> Result<Vec<LineMask>> {
    ids.iter().map(|id| read_json(&mask_path(dir, id))).collect()
}

pub fn write_masks(dir: &Path, ids: &[String], masks: &[LineMask]) -> Result<()> {
    for (id, m) in ids.iter().zip(masks) {
        write_json(&mask_path(dir, id), m)?;
    }
    Ok(())
}

/// Fails unless `dir` is missing or empty; with `force` the directory is
/// cleared first.
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let nonempty = fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))?.next().is_some();
        if nonempty {
            if !force {
                return Err(failure::config(format!("{} is not empty (use --force to replace it)", dir.display())));
            }
            fs::remove_dir_all(dir).with_context(|| format!("clearing {}", dir.display()))?;
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}
