use std::path::{Path, PathBuf};

use anyhow::Result;
use rayon::prelude::*;
use scanmask::bundle::load_split;
use scanmask::nn::{load_library, predict_mask, MaskLibrary, LIBRARY_FILE};
use scanmask::LineMask;
use serde::{Deserialize, Serialize};

use crate::io::{load_index, write_json};
use crate::train::LIBRARY_DIR;
use crate::{failure, PredictArgs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub scan_id: String,
    pub neighbor: String,
    pub distance: f64,
    pub mask: LineMask,
}

/// Accepts either a run directory or the library directory itself.
pub fn library_dir(path: &Path) -> PathBuf {
    if path.join(LIBRARY_FILE).is_file() {
        path.to_path_buf()
    } else {
        path.join(LIBRARY_DIR)
    }
}

pub fn open_library(path: &Path) -> Result<MaskLibrary> {
    let dir = library_dir(path);
    if !dir.join(LIBRARY_FILE).is_file() {
        return Err(failure::data(format!("no mask library at {}", path.display())));
    }
    Ok(load_library(&dir)?)
}

pub fn run(args: &PredictArgs) -> Result<()> {
    let library = open_library(&args.library)?;
    let index = load_index(&args.data)?;
    let scans = load_split::<f64>(&args.data, &index.test)?;
    let records = scans
        .par_iter()
        .map(|s| {
            let p = predict_mask(s.kspace(), s.smaps(), &library)?;
            Ok(PredictionRecord { scan_id: s.scan_id.clone(), neighbor: p.scan_id, distance: p.distance, mask: p.mask })
        })
        .collect::<Result<Vec<_>>>()?;
    for r in &records {
        eprintln!("{} -> {} (distance {:.6e})", r.scan_id, r.neighbor, r.distance);
    }
    write_json(&args.out, &records)
}
