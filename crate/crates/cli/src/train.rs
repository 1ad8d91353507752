use std::collections::BTreeMap;
use std::fs;

use anyhow::Result;
use scanmask::bundle::load_split;
use scanmask::maskopt::{alternate_train, population_greedy, Stage};
use scanmask::nn::{build_library_with, save_library};
use scanmask::{central_lines, OptimConfig, TrainSchedule};

use crate::io::{load_index, prepare_out_dir, write_json, write_masks, write_text};
use crate::manifest::{RunConfig, RunManifest, Timer, RUN_MANIFEST};
use crate::{failure, TrainArgs};

pub const MASKS_DIR: &str = "masks";
pub const GREEDY_MASKS_DIR: &str = "masks_greedy";
pub const VDRS_MASKS_DIR: &str = "masks_vdrs";
pub const RECON_PARAMS: &str = "recon_params.json";
pub const RECON_PARAMS_VDRS: &str = "recon_params_vdrs.json";
pub const LIBRARY_DIR: &str = "library";
pub const AUDIT_CSV: &str = "audit.csv";
pub const POPULATION_MASK: &str = "population_mask.json";

pub fn run(args: &TrainArgs) -> Result<()> {
    let mut timer = Timer::new();
    let index = load_index(&args.data)?;
    if index.train.is_empty() {
        return Err(failure::data("dataset has no training scans"));
    }
    let config = OptimConfig {
        budget: args.budget,
        n_lowfreq: args.lowfreq,
        n_icd_iters: args.icd_iters,
        loss: args.loss,
        freeze_lowfreq: !args.unfreeze_lowfreq,
        crop: args.crop,
        ..OptimConfig::default()
    };
    config.validate(index.width)?;
    let mut schedule = TrainSchedule::new(config.clone(), args.recon);
    schedule.vdrs_seed = args.vdrs_seed;
    schedule.density_power = args.density_power;

    prepare_out_dir(&args.out, args.force)?;
    let scans = load_split::<f64>(&args.data, &index.train)?;
    timer.lap("load");

    let outcome = alternate_train(&scans, &schedule)?;
    timer.lap("alternate-train");
    for st in Stage::ALL {
        eprintln!("  {:<15} mean loss {:.6e}", st.as_str(), outcome.stage_mean(st));
    }

    let fixed = central_lines(index.width, args.lowfreq)?;
    let pairs: Vec<_> = scans.iter().cloned().zip(outcome.masks.iter().cloned()).collect();
    let library = build_library_with(&pairs, &fixed, args.normalize_features)?;
    timer.lap("library");

    let population = if args.population {
        let m = population_greedy(&scans, &outcome.recon, &config)?;
        timer.lap("population-greedy");
        Some(m)
    } else {
        None
    };

    let out = &args.out;
    write_masks(&out.join(MASKS_DIR), &index.train, &outcome.masks)?;
    write_masks(&out.join(GREEDY_MASKS_DIR), &index.train, &outcome.greedy_masks)?;
    write_masks(&out.join(VDRS_MASKS_DIR), &index.train, &outcome.vdrs_masks)?;
    write_json(&out.join(RECON_PARAMS), &outcome.recon)?;
    write_json(&out.join(RECON_PARAMS_VDRS), &outcome.vdrs_recon)?;
    write_json(&out.join("recon_params_greedy.json"), &outcome.greedy_recon)?;
    save_library(&library, &out.join(LIBRARY_DIR))?;
    let mut audit = String::from("stage,scan_id,loss\n");
    for row in &outcome.audit {
        audit.push_str(&format!("{},{},{:?}\n", row.stage.as_str(), row.scan_id, row.loss));
    }
    write_text(&out.join(AUDIT_CSV), &audit)?;
    if let Some(m) = &population {
        write_json(&out.join(POPULATION_MASK), m)?;
    }
    timer.lap("write");

    let mut artifacts = BTreeMap::new();
    for (name, path) in [
        ("masks", MASKS_DIR),
        ("masks_greedy", GREEDY_MASKS_DIR),
        ("masks_vdrs", VDRS_MASKS_DIR),
        ("recon_params", RECON_PARAMS),
        ("recon_params_vdrs", RECON_PARAMS_VDRS),
        ("recon_params_greedy", "recon_params_greedy.json"),
        ("library", LIBRARY_DIR),
        ("audit", AUDIT_CSV),
    ] {
        artifacts.insert(name.to_string(), path.to_string());
    }
    if population.is_some() {
        artifacts.insert("population_mask".into(), POPULATION_MASK.into());
    }
    let run_id = out.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    let manifest = RunManifest {
        run_id,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config: RunConfig {
            optim: config,
            recon_kind: args.recon,
            grid: schedule.grid.clone(),
            vdrs_seed: args.vdrs_seed,
            density_power: args.density_power,
            crop: args.crop,
            normalize_features: args.normalize_features,
            population: args.population,
            data_dir: fs::canonicalize(&args.data).unwrap_or_else(|_| args.data.clone()).display().to_string(),
            data_seed: index.seed,
            train_ids: index.train.clone(),
        },
        timings: timer.timings,
        artifacts,
    };
    debug_assert!(manifest.missing_artifacts(out).is_empty());
    write_json(&out.join(RUN_MANIFEST), &manifest)?;
    Ok(())
}
