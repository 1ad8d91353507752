use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use rayon::prelude::*;
use scanmask::bundle::load_split;
use scanmask::maskopt::{greedy_optimize, icd_optimize, make_vdrs_mask};
use scanmask::metrics::{MetricRow, METRIC_CSV_HEADER};
use scanmask::nn::predict_mask;
use scanmask::seed::derive_seed;
use scanmask::{reconstruct, Error, LineMask, MetricReport, ReconParams, ScanBundle};

use crate::io::{load_index, read_json, read_params, write_text};
use crate::manifest::RunManifest;
use crate::predict::open_library;
use crate::train::{POPULATION_MASK, RECON_PARAMS, RECON_PARAMS_VDRS};
use crate::{failure, EvalArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskSource {
    Vdrs,
    Nn,
    OracleIcd,
    Population,
}

impl MaskSource {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "vdrs" => Ok(MaskSource::Vdrs),
            "nn" => Ok(MaskSource::Nn),
            "oracle-icd" => Ok(MaskSource::OracleIcd),
            "population" => Ok(MaskSource::Population),
            other => Err(failure::config(format!("unknown mask source `{other}` (vdrs, nn, oracle-icd, population)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MaskSource::Vdrs => "vdrs",
            MaskSource::Nn => "nn",
            MaskSource::OracleIcd => "oracle-icd",
            MaskSource::Population => "population",
        }
    }
}

/// Seed of the random baseline mask for a test scan.
pub fn test_vdrs_seed(vdrs_seed: u64, scan_seed: u64) -> u64 {
    derive_seed(derive_seed(vdrs_seed, scan_seed), 0)
}

fn load_params(explicit: Option<&Path>, fallback: &Path) -> Result<ReconParams> {
    let path = explicit.unwrap_or(fallback);
    if !path.is_file() {
        return Err(failure::data(format!("reconstructor parameters not found at {}", path.display())));
    }
    read_params(path)
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let sources = args.masks.iter().map(|s| MaskSource::parse(s)).collect::<Result<Vec<_>>>()?;
    if sources.is_empty() {
        return Err(failure::config("no mask sources given"));
    }
    let manifest = RunManifest::load(&args.run)?;
    let cfg = &manifest.config;
    let recon = load_params(args.recon.as_deref(), &args.run.join(RECON_PARAMS))?;
    let recon_vdrs = match (&args.recon_vdrs, &args.recon) {
        (Some(p), _) => load_params(Some(p), p)?,
        (None, Some(_)) => recon,
        (None, None) => load_params(None, &args.run.join(RECON_PARAMS_VDRS))?,
    };
    let library = if sources.contains(&MaskSource::Nn) { Some(open_library(&args.run)?) } else { None };
    let population: Option<LineMask> = if sources.contains(&MaskSource::Population) {
        let p = args.run.join(POPULATION_MASK);
        if !p.is_file() {
            return Err(failure::config("run has no population mask (train with --population)"));
        }
        Some(read_json(&p)?)
    } else {
        None
    };

    let index = load_index(&args.data)?;
    let scans = load_split::<f64>(&args.data, &index.test)?;
    if scans.is_empty() {
        return Err(failure::data("dataset has no test scans"));
    }

    let mask_for = |scan: &ScanBundle, source: MaskSource| -> Result<LineMask> {
        let m = match source {
            MaskSource::Vdrs => {
                let seed = test_vdrs_seed(cfg.vdrs_seed, index.seeds.get(&scan.scan_id).copied().unwrap_or(0));
                make_vdrs_mask(scan.width(), &cfg.optim, cfg.density_power, seed)?
            }
            MaskSource::Nn => predict_mask(scan.kspace(), scan.smaps(), library.as_ref().expect("library loaded"))?.mask,
            MaskSource::OracleIcd => {
                let g = greedy_optimize(scan, &recon, &cfg.optim)?;
                icd_optimize(scan, &g, &recon, &cfg.optim)?
            }
            MaskSource::Population => population.clone().expect("population mask loaded"),
        };
        if m.width() != scan.width() {
            return Err(Error::Dimension(format!("{} mask has width {} but scan {} has width {}", source.as_str(), m.width(), scan.scan_id, scan.width())).into());
        }
        Ok(m)
    };

    let rows = scans
        .par_iter()
        .map(|scan| {
            sources
                .iter()
                .map(|&source| {
                    let mask = mask_for(scan, source)?;
                    let params = if source == MaskSource::Vdrs { &recon_vdrs } else { &recon };
                    let rec = reconstruct(scan.kspace(), scan.smaps(), &mask, params)?;
                    let report = MetricReport::compute(scan.gt(), &rec, cfg.crop)?;
                    Ok(MetricRow::new(&scan.scan_id, source.as_str(), params.kind.as_str(), report))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut csv = format!("{METRIC_CSV_HEADER}\n");
    for row in rows.iter().flatten() {
        writeln!(csv, "{}", row.to_csv_line())?;
    }
    write_text(&args.out, &csv)?;
    eprintln!("wrote {} rows to {}", rows.iter().map(Vec::len).sum::<usize>(), args.out.display());
    Ok(())
}
