use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use scanmask::bundle::{load_split, DatasetIndex};
use scanmask::metrics::{MetricReport, MetricRow, METRIC_CSV_HEADER};
use scanmask::{reconstruct, LineMask, ReconParams};

fn scanmask(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scanmask")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = scanmask(args);
    assert!(out.status.success(), "scanmask {args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn code(args: &[&str]) -> i32 {
    scanmask(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, train: usize, test: usize, size: usize, seed: u64) -> PathBuf {
    let data = dir.join(format!("data{train}_{test}_{size}_{seed}"));
    ok(&[
        "gen-data", "--out", s(&data), "--train", &train.to_string(), "--test", &test.to_string(), "--size",
        &size.to_string(), &size.to_string(), "--coils", "2", "--seed", &seed.to_string(),
    ]);
    data
}

fn read_mask(path: &Path) -> LineMask {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn read_params(path: &Path) -> ReconParams {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_data_layout_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let one = gen(dir.path(), 1, 0, 16, 3);
    let index = DatasetIndex::load(&one).unwrap();
    assert_eq!((index.train.len(), index.test.len()), (1, 0));
    let dirs: Vec<_> = fs::read_dir(&one).unwrap().filter_map(|e| e.ok()).filter(|e| e.path().is_dir()).collect();
    assert_eq!(dirs.len(), 1);

    let a = gen(dir.path(), 2, 1, 16, 4);
    let b = dir.path().join("again");
    ok(&["gen-data", "--out", s(&b), "--train", "2", "--test", "1", "--size", "16", "16", "--coils", "2", "--seed", "4"]);
    for id in index_ids(&a) {
        for f in fs::read_dir(DatasetIndex::bundle_dir(&a, &id)).unwrap() {
            let f = f.unwrap().path();
            let other = DatasetIndex::bundle_dir(&b, &id).join(f.file_name().unwrap());
            assert_eq!(fs::read(&f).unwrap(), fs::read(&other).unwrap(), "{}", f.display());
        }
    }

    assert_eq!(code(&["gen-data", "--out", s(&a), "--train", "1", "--test", "0", "--size", "16", "16"]), 2);
    ok(&["gen-data", "--out", s(&a), "--train", "1", "--test", "0", "--size", "16", "16", "--force"]);
    assert_eq!(DatasetIndex::load(&a).unwrap().train.len(), 1);
}

fn index_ids(data: &Path) -> Vec<String> {
    let index = DatasetIndex::load(data).unwrap();
    index.train.iter().chain(&index.test).cloned().collect()
}

#[test]
fn config_and_data_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nothing");
    assert_eq!(code(&["train", "--data", s(&missing), "--out", s(&dir.path().join("r"))]), 3);
    let data = gen(dir.path(), 2, 1, 16, 5);
    assert_eq!(code(&["train", "--data", s(&data), "--out", s(&dir.path().join("r")), "--budget", "17", "--lowfreq", "2"]), 2);
    assert_eq!(code(&["train", "--data", s(&data), "--out", s(&dir.path().join("r")), "--recon", "bogus"]), 2);
    assert_eq!(code(&["predict", "--library", s(&missing), "--data", s(&data), "--out", s(&dir.path().join("p.json"))]), 3);
}

#[test]
fn full_budget_training_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), 3, 2, 16, 6);
    let run = dir.path().join("run");
    ok(&["train", "--data", s(&data), "--out", s(&run), "--budget", "16", "--lowfreq", "4", "--recon", "tikhonov-cg"]);
    let index = DatasetIndex::load(&data).unwrap();
    for id in &index.train {
        assert!(read_mask(&run.join("masks").join(format!("{id}.json"))).lines().len() == 16);
    }
    // with every line sampled, (I + λI)x = x_true, so NMSE = (λ / (1 + λ))²
    // up to the CG stopping tolerance (relative effect about 2e-8 / λ)
    let lambda = |f: &str| read_params(&run.join(f)).lambda;
    let stage_lambda = |stage: &str| match stage {
        "vdrs" | "greedy" => lambda("recon_params_vdrs.json"),
        "greedy-retuned" | "icd" => lambda("recon_params_greedy.json"),
        _ => lambda("recon_params.json"),
    };
    let audit = fs::read_to_string(run.join("audit.csv")).unwrap();
    let rows: Vec<&str> = audit.lines().skip(1).collect();
    assert_eq!(rows.len(), 5 * index.train.len());
    for r in rows {
        let f: Vec<&str> = r.split(',').collect();
        let loss: f64 = f[2].parse().unwrap();
        let l = stage_lambda(f[0]);
        let want = (l / (1.0 + l)).powi(2);
        assert!((loss - want).abs() <= 1e-4 * want, "{r} vs {want:e}");
    }

    let csv = dir.path().join("eval.csv");
    let zf = dir.path().join("zf.json");
    fs::write(&zf, serde_json::to_string(&ReconParams::zero_filled()).unwrap()).unwrap();
    ok(&["eval", "--data", s(&data), "--run", s(&run), "--masks", "oracle-icd", "--recon", s(&zf), "--out", s(&csv)]);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), METRIC_CSV_HEADER);
    for line in text.lines().skip(1) {
        let row = MetricRow::parse_csv_line(line).unwrap();
        assert_eq!(row.mask_kind, "oracle-icd");
        assert!(row.nmse < 1e-12, "{line}");
    }
}

#[test]
fn audit_reproduces_from_saved_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), 4, 1, 16, 7);
    let run = dir.path().join("run");
    ok(&["train", "--data", s(&data), "--out", s(&run), "--budget", "6", "--lowfreq", "2", "--recon", "tikhonov-cg"]);
    let index = DatasetIndex::load(&data).unwrap();
    let scans = load_split::<f64>(&data, &index.train).unwrap();
    let params = |f: &str| read_params(&run.join(f));
    let stages = [
        ("vdrs", "masks_vdrs", params("recon_params_vdrs.json")),
        ("greedy", "masks_greedy", params("recon_params_vdrs.json")),
        ("greedy-retuned", "masks_greedy", params("recon_params_greedy.json")),
        ("icd", "masks", params("recon_params_greedy.json")),
        ("icd-retuned", "masks", params("recon_params.json")),
    ];
    let audit = fs::read_to_string(run.join("audit.csv")).unwrap();
    let mut logged: BTreeMap<(String, String), f64> = BTreeMap::new();
    for line in audit.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        logged.insert((f[0].into(), f[1].into()), f[2].parse().unwrap());
    }
    let mut means = Vec::new();
    for (stage, dir_name, p) in &stages {
        let mut total = 0.0;
        for scan in &scans {
            let mask = read_mask(&run.join(dir_name).join(format!("{}.json", scan.scan_id)));
            let rec = reconstruct(scan.kspace(), scan.smaps(), &mask, p).unwrap();
            let loss = scanmask::metrics::nmse(scan.gt(), &rec).unwrap();
            let want = logged[&(stage.to_string(), scan.scan_id.clone())];
            assert!((loss - want).abs() <= 1e-10 * want.max(1e-12), "{stage} {}: {loss} vs {want}", scan.scan_id);
            total += loss;
        }
        means.push(total / scans.len() as f64);
    }
    for w in means.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "stage means {means:?}");
    }
}

#[test]
fn predict_finds_an_identical_scan() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), 3, 1, 16, 8);
    let run = dir.path().join("run");
    ok(&["train", "--data", s(&data), "--out", s(&run), "--budget", "6", "--lowfreq", "2"]);
    let mut index = DatasetIndex::load(&data).unwrap();
    index.test.push(index.train[1].clone());
    index.save(&data).unwrap();
    let out = dir.path().join("pred.json");
    ok(&["predict", "--library", s(&run), "--data", s(&data), "--out", s(&out)]);
    let preds: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(preds.len(), 2);
    let same = &preds[1];
    assert_eq!(same["neighbor"], index.train[1].as_str());
    assert_eq!(same["distance"], 0.0);
    let mask: LineMask = serde_json::from_value(same["mask"].clone()).unwrap();
    assert_eq!(mask, read_mask(&run.join("masks").join(format!("{}.json", index.train[1]))));
}

#[test]
fn eval_rejects_mismatched_widths() {
    let dir = tempfile::tempdir().unwrap();
    let small = gen(dir.path(), 2, 1, 16, 9);
    let large = gen(dir.path(), 2, 1, 24, 9);
    let run = dir.path().join("run");
    ok(&["train", "--data", s(&small), "--out", s(&run), "--budget", "6", "--lowfreq", "2"]);
    assert_eq!(code(&["eval", "--data", s(&large), "--run", s(&run), "--masks", "nn", "--out", s(&dir.path().join("e.csv"))]), 3);
}

#[test]
fn report_means_match_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen(dir.path(), 3, 3, 16, 10);
    let run = dir.path().join("run");
    ok(&["train", "--data", s(&data), "--out", s(&run), "--budget", "6", "--lowfreq", "2", "--population"]);
    let csv = dir.path().join("eval.csv");
    ok(&["eval", "--data", s(&data), "--run", s(&run), "--masks", "vdrs,nn,oracle-icd,population", "--out", s(&csv)]);
    let rep = dir.path().join("report");
    ok(&["report", "--runs", s(&csv), "--out", s(&rep)]);

    let rows: Vec<MetricRow> =
        fs::read_to_string(&csv).unwrap().lines().skip(1).map(|l| MetricRow::parse_csv_line(l).unwrap()).collect();
    assert_eq!(rows.len(), 12);
    let summary = fs::read_to_string(rep.join("summary.csv")).unwrap();
    let mut seen = 0;
    for line in summary.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let group: Vec<&MetricRow> = rows.iter().filter(|r| r.recon_kind == f[0] && r.mask_kind == f[1]).collect();
        assert_eq!(f[2].parse::<usize>().unwrap(), group.len());
        let mean = |g: fn(&MetricRow) -> f64| group.iter().map(|r| g(r)).sum::<f64>() / group.len() as f64;
        for (col, want) in [(3, mean(|r| r.nmse)), (5, mean(|r| r.ssim)), (7, mean(|r| r.hfen))] {
            let got: f64 = f[col].parse().unwrap();
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{line}");
        }
        seen += group.len();
    }
    assert_eq!(seen, rows.len());
    for f in ["summary.md", "mean_nmse.svg", "box_nmse.svg"] {
        assert!(rep.join(f).is_file(), "{f}");
    }

    // metrics recomputed from the saved population mask match the CSV
    let index = DatasetIndex::load(&data).unwrap();
    let scans = load_split::<f64>(&data, &index.test).unwrap();
    let pop = read_mask(&run.join("population_mask.json"));
    let params = read_params(&run.join("recon_params.json"));
    for scan in &scans {
        let rec = reconstruct(scan.kspace(), scan.smaps(), &pop, &params).unwrap();
        let report = MetricReport::compute(scan.gt(), &rec, None).unwrap();
        let row = rows.iter().find(|r| r.scan_id == scan.scan_id && r.mask_kind == "population").unwrap();
        assert!((row.nmse - report.nmse).abs() <= 1e-12);
    }
}
