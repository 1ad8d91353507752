use std::collections::BTreeMap;

use anyhow::Result;
use rayon::prelude::*;
use scanmask::seed::derive_seed;
use scanmask::{make_bundle, save_bundle, DatasetIndex};

use crate::io::prepare_out_dir;
use crate::{failure, GenArgs};

pub fn run(args: &GenArgs) -> Result<()> {
    let (h, w) = (args.size[0], args.size[1]);
    if args.coils == 0 {
        return Err(failure::config("--coils must be at least 1"));
    }
    if !(args.noise >= 0.0 && args.noise.is_finite()) {
        return Err(failure::config("--noise must be a finite value ≥ 0"));
    }
    prepare_out_dir(&args.out, args.force)?;

    let train: Vec<String> = (0..args.train).map(|i| format!("train_{i:04}")).collect();
    let test: Vec<String> = (0..args.test).map(|i| format!("test_{i:04}")).collect();
    let seeds: BTreeMap<String, u64> =
        train.iter().chain(&test).enumerate().map(|(i, id)| (id.clone(), derive_seed(args.seed, i as u64))).collect();

    seeds.par_iter().try_for_each(|(id, &seed)| -> Result<()> {
        let bundle = make_bundle(id.as_str(), seed, h, w, args.coils, args.noise)?;
        save_bundle(&bundle, &DatasetIndex::bundle_dir(&args.out, id))?;
        Ok(())
    })?;

    let index = DatasetIndex { seed: args.seed, height: h, width: w, ncoils: args.coils, noise_sigma: args.noise, train, test, seeds };
    index.save(&args.out)?;
    eprintln!("wrote {} scans to {}", index.train.len() + index.test.len(), args.out.display());
    Ok(())
}
