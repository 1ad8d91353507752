use anyhow::Result;
use scanmask::bundle::load_split;
use scanmask::recon::tune_reconstructor;
use scanmask::ReconParams;

use crate::io::{load_index, read_masks, write_json};
use crate::manifest::RunManifest;
use crate::train::{GREEDY_MASKS_DIR, MASKS_DIR, VDRS_MASKS_DIR};
use crate::{failure, TuneArgs};

pub fn run(args: &TuneArgs) -> Result<()> {
    let manifest = RunManifest::load(&args.run)?;
    let dir = match args.masks.as_str() {
        "final" => MASKS_DIR,
        "greedy" => GREEDY_MASKS_DIR,
        "vdrs" => VDRS_MASKS_DIR,
        other => return Err(failure::config(format!("unknown mask set `{other}` (final, greedy, vdrs)"))),
    };
    let index = load_index(&args.data)?;
    let ids = &manifest.config.train_ids;
    if ids.iter().any(|id| !index.train.contains(id)) {
        return Err(failure::data("run was trained on scans missing from this dataset"));
    }
    let masks = read_masks(&args.run.join(dir), ids)?;
    let scans = load_split::<f64>(&args.data, ids)?;
    let pairs: Vec<_> = scans.into_iter().zip(masks).collect();
    let params = tune_reconstructor(&pairs, args.recon, &ReconParams::default_grid(args.recon))?;
    eprintln!("tuned {}: {}", args.recon, serde_json::to_string(&params)?);
    write_json(&args.out, &params)
}
