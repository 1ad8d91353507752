//! Scan bundles (fully sampled k-space, coil maps, ground truth) and their
//! on-disk directory format.
//!
//! ```text
//! <scan_id>/manifest.json
//! <scan_id>/kspace.c64   ncoils × height × width
//! <scan_id>/smaps.c64    ncoils × height × width
//! <scan_id>/gt.c64       height × width
//! ```
//! Binaries are little-endian interleaved `(re, im)` `f32` pairs, coil-major
//! then row-major.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::image::{quantize_f32, CoilMaps, Image, KSpace};
use crate::operator::{adjoint, Acquisition};
use crate::mask::LineMask;
use crate::phantom::{gen_phantom, gen_smaps, simulate_kspace};
use crate::seed::derive_seed;
use crate::Scalar;

pub const GENERATOR_VERSION: &str = "phantom-v1";
pub const DTYPE: &str = "c64le-interleaved";
/// Relative tolerance of the stored ground truth against its k-space.
pub const CONSISTENCY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub seed: u64,
    pub noise_sigma: f64,
    pub generator_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanBundle<T: Scalar = f64> {
    pub scan_id: String,
    kspace: KSpace<T>,
    smaps: CoilMaps<T>,
    gt: Image<T>,
    pub meta: BundleMeta,
}

impl<T: Scalar> ScanBundle<T> {
    /// Assembles a bundle, computing the ground truth as the coil-combined
    /// fully sampled adjoint `Σ_c conj(S_c) ⊙ F⁻¹ y_c`.
    pub fn from_kspace(scan_id: impl Into<String>, kspace: KSpace<T>, smaps: CoilMaps<T>, meta: BundleMeta) -> Result<Self> {
        let gt = adjoint(&kspace, &smaps, &LineMask::full(kspace.width()))?;
        Ok(Self { scan_id: scan_id.into(), kspace, smaps, gt, meta })
    }

    /// Assembles a bundle with a stored ground truth, checking it against
    /// the k-space.
    pub fn with_gt(
        scan_id: impl Into<String>,
        kspace: KSpace<T>,
        smaps: CoilMaps<T>,
        gt: Image<T>,
        meta: BundleMeta,
    ) -> Result<Self> {
        let b = Self { scan_id: scan_id.into(), kspace, smaps, gt, meta };
        b.check_consistency()?;
        Ok(b)
    }

    pub fn kspace(&self) -> &KSpace<T> {
        &self.kspace
    }

    pub fn smaps(&self) -> &CoilMaps<T> {
        &self.smaps
    }

    pub fn gt(&self) -> &Image<T> {
        &self.gt
    }

    pub fn width(&self) -> usize {
        self.kspace.width()
    }

    pub fn acquisition(&self) -> Result<Acquisition<T>> {
        Acquisition::new(&self.kspace, &self.smaps)
    }

    /// Relative deviation of the stored ground truth from the coil-combined
    /// adjoint of the stored k-space.
    pub fn consistency_error(&self) -> Result<f64> {
        let recomputed = adjoint(&self.kspace, &self.smaps, &LineMask::full(self.kspace.width()))?;
        let diff = recomputed.add_scaled(Complex::new(-T::one(), T::zero()), &self.gt)?;
        let scale = self.gt.norm().to_f64_lossy().max(f64::MIN_POSITIVE);
        Ok(diff.norm().to_f64_lossy() / scale)
    }

    pub fn check_consistency(&self) -> Result<()> {
        ensure!(
            self.kspace.image_shape() == self.gt.shape() && self.smaps.image_shape() == self.gt.shape(),
            Dimension,
            "bundle {} has mismatched shapes",
            self.scan_id
        );
        ensure!(self.kspace.ncoils() == self.smaps.ncoils(), Dimension, "bundle {} coil count mismatch", self.scan_id);
        let err = self.consistency_error()?;
        ensure!(err <= CONSISTENCY_TOL, InvalidInput, "bundle {} ground truth off by {err:e} relative", self.scan_id);
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ScanBundle<U> {
        ScanBundle {
            scan_id: self.scan_id.clone(),
            kspace: self.kspace.cast(),
            smaps: self.smaps.cast(),
            gt: self.gt.cast(),
            meta: self.meta.clone(),
        }
    }
}

/// Generates a complete synthetic scan. All arrays are rounded to the
/// stored `f32` precision so a saved and reloaded bundle equals the
/// in-memory one exactly.
pub fn make_bundle(
    scan_id: impl Into<String>,
    seed: u64,
    height: usize,
    width: usize,
    ncoils: usize,
    noise_sigma: f64,
) -> Result<ScanBundle<f64>> {
    let phantom = gen_phantom(derive_seed(seed, 1), height, width)?;
    let maps = gen_smaps(derive_seed(seed, 2), ncoils, height, width, &vec![true; height * width])?;
    let mut map_data = maps.data().to_vec();
    quantize_f32(&mut map_data);
    let maps = CoilMaps::from_parts_unchecked(ncoils, height, width, map_data, maps.support().to_vec())?;
    let mut kspace = simulate_kspace(&phantom, &maps, noise_sigma, derive_seed(seed, 3))?;
    quantize_f32(kspace.data_mut());
    let meta = BundleMeta { seed, noise_sigma, generator_version: GENERATOR_VERSION.into() };
    let mut bundle = ScanBundle::from_kspace(scan_id, kspace, maps, meta)?;
    quantize_f32(bundle.gt.data_mut());
    Ok(bundle)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BundleFiles {
    kspace: String,
    smaps: String,
    gt: String,
    /// Only present when some pixel lies outside the object support.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    support: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BundleManifest {
    scan_id: String,
    height: usize,
    width: usize,
    ncoils: usize,
    dtype: String,
    files: BundleFiles,
    meta: BundleMeta,
}

pub(crate) fn encode_c64<T: Scalar>(data: &[Complex<T>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() * 8);
    for z in data {
        out.extend_from_slice(&(z.re.to_f64_lossy() as f32).to_le_bytes());
        out.extend_from_slice(&(z.im.to_f64_lossy() as f32).to_le_bytes());
    }
    out
}

pub(crate) fn decode_c64<T: Scalar>(bytes: &[u8], expected: usize, path: &Path) -> Result<Vec<Complex<T>>> {
    if bytes.len() != expected * 8 {
        return Err(Error::corrupt(path, format!("expected {} bytes, found {}", expected * 8, bytes.len())));
    }
    let mut out = Vec::with_capacity(expected);
    for chunk in bytes.chunks_exact(8) {
        let re = f32::from_le_bytes(chunk[0..4].try_into().unwrap());
        let im = f32::from_le_bytes(chunk[4..8].try_into().unwrap());
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::corrupt(path, "non-finite sample"));
        }
        out.push(Complex::new(T::of(re as f64), T::of(im as f64)));
    }
    Ok(out)
}

pub(crate) fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json { path: path.into(), source: e })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    f.sync_all().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Writes `dir` by filling a sibling temporary directory and renaming it
/// into place, replacing any previous content.
pub(crate) fn write_dir_atomically(dir: &Path, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let name = dir.file_name().ok_or_else(|| Error::InvalidInput(format!("bad output path {}", dir.display())))?;
    let tmp = parent.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::create_dir(&tmp).map_err(|e| Error::io(&tmp, e))?;
    if let Err(e) = fill(&tmp) {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))
}

pub fn save_bundle<T: Scalar>(bundle: &ScanBundle<T>, dir: &Path) -> Result<()> {
    let (h, w) = bundle.gt.shape();
    let full_support = bundle.smaps.support().iter().all(|&s| s);
    let manifest = BundleManifest {
        scan_id: bundle.scan_id.clone(),
        height: h,
        width: w,
        ncoils: bundle.kspace.ncoils(),
        dtype: DTYPE.into(),
        files: BundleFiles {
            kspace: "kspace.c64".into(),
            smaps: "smaps.c64".into(),
            gt: "gt.c64".into(),
            support: (!full_support).then(|| "support.u8".into()),
        },
        meta: bundle.meta.clone(),
    };
    write_dir_atomically(dir, |tmp| {
        write_file(&tmp.join(&manifest.files.kspace), &encode_c64(bundle.kspace.data()))?;
        write_file(&tmp.join(&manifest.files.smaps), &encode_c64(bundle.smaps.data()))?;
        write_file(&tmp.join(&manifest.files.gt), &encode_c64(bundle.gt.data()))?;
        if let Some(name) = &manifest.files.support {
            let bytes: Vec<u8> = bundle.smaps.support().iter().map(|&s| s as u8).collect();
            write_file(&tmp.join(name), &bytes)?;
        }
        write_json(&tmp.join("manifest.json"), &manifest)
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads and validates a bundle; any shape or consistency problem is a
/// corrupt-bundle error.
pub fn load_bundle<T: Scalar>(dir: &Path) -> Result<ScanBundle<T>> {
    let manifest_path = dir.join("manifest.json");
    let m: BundleManifest = read_json(&manifest_path)?;
    if m.dtype != DTYPE {
        return Err(Error::corrupt(&manifest_path, format!("unsupported dtype `{}`", m.dtype)));
    }
    if m.height == 0 || m.width == 0 || m.ncoils == 0 {
        return Err(Error::corrupt(&manifest_path, "zero dimension"));
    }
    let n = m.height * m.width;
    let kpath = dir.join(&m.files.kspace);
    let spath = dir.join(&m.files.smaps);
    let gpath = dir.join(&m.files.gt);
    let kdata = decode_c64::<T>(&read_bytes(&kpath)?, m.ncoils * n, &kpath)?;
    let sdata = decode_c64::<T>(&read_bytes(&spath)?, m.ncoils * n, &spath)?;
    let gdata = decode_c64::<T>(&read_bytes(&gpath)?, n, &gpath)?;
    let support = match &m.files.support {
        None => vec![true; n],
        Some(name) => {
            let p = dir.join(name);
            let bytes = read_bytes(&p)?;
            if bytes.len() != n || bytes.iter().any(|&b| b > 1) {
                return Err(Error::corrupt(&p, "support mask has wrong size or values"));
            }
            bytes.into_iter().map(|b| b == 1).collect()
        }
    };
    let corrupt = |e: Error| Error::corrupt(dir, e.to_string());
    let kspace = KSpace::new(m.ncoils, m.height, m.width, kdata).map_err(corrupt)?;
    let smaps = CoilMaps::from_parts_unchecked(m.ncoils, m.height, m.width, sdata, support).map_err(corrupt)?;
    let gt = Image::new(m.height, m.width, gdata).map_err(corrupt)?;
    ScanBundle::with_gt(m.scan_id, kspace, smaps, gt, m.meta).map_err(corrupt)
}

/// Split file written next to a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub ncoils: usize,
    pub noise_sigma: f64,
    pub train: Vec<String>,
    pub test: Vec<String>,
    #[serde(default)]
    pub seeds: BTreeMap<String, u64>,
}

pub const INDEX_FILE: &str = "index.json";

impl DatasetIndex {
    pub fn load(dir: &Path) -> Result<Self> {
        read_json(&dir.join(INDEX_FILE))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(INDEX_FILE), self)
    }

    pub fn bundle_dir(dir: &Path, scan_id: &str) -> PathBuf {
        dir.join(scan_id)
    }
}

pub fn load_split<T: Scalar>(dir: &Path, ids: &[String]) -> Result<Vec<ScanBundle<T>>> {
    ids.iter().map(|id| load_bundle(&DatasetIndex::bundle_dir(dir, id))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::nmse;

    #[test]
    fn noiseless_ground_truth_equals_phantom() {
        let b = make_bundle("a", 11, 16, 16, 3, 0.0).unwrap();
        let phantom = gen_phantom(derive_seed(11, 1), 16, 16).unwrap();
        assert!(nmse(&phantom, b.gt()).unwrap().sqrt() < 1e-6);
        assert!(b.consistency_error().unwrap() < CONSISTENCY_TOL);
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let b = make_bundle("scan-x", 4, 16, 20, 2, 0.01).unwrap();
        let path = dir.path().join("scan-x");
        save_bundle(&b, &path).unwrap();
        let back: ScanBundle<f64> = load_bundle(&path).unwrap();
        assert_eq!(back, b);
        // overwrite is allowed and leaves no temp dirs behind
        save_bundle(&b, &path).unwrap();
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn truncated_binary_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let b = make_bundle("s", 5, 16, 16, 1, 0.0).unwrap();
        let path = dir.path().join("s");
        save_bundle(&b, &path).unwrap();
        let k = path.join("kspace.c64");
        let bytes = fs::read(&k).unwrap();
        fs::write(&k, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_bundle::<f64>(&path), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn inconsistent_ground_truth_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let b = make_bundle("s", 5, 16, 16, 1, 0.0).unwrap();
        let path = dir.path().join("s");
        save_bundle(&b, &path).unwrap();
        let g = path.join("gt.c64");
        let mut bytes = fs::read(&g).unwrap();
        // exponent byte of the centre pixel's real part
        bytes[(8 * 16 + 8) * 8 + 3] ^= 0x20;
        fs::write(&g, &bytes).unwrap();
        assert!(matches!(load_bundle::<f64>(&path), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn partial_support_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut support = vec![true; 256];
        support[3] = false;
        let maps = gen_smaps(1, 2, 16, 16, &support).unwrap();
        let x = gen_phantom(1, 16, 16).unwrap();
        let k = simulate_kspace(&x, &maps, 0.0, 0).unwrap();
        let meta = BundleMeta { seed: 0, noise_sigma: 0.0, generator_version: GENERATOR_VERSION.into() };
        let b = ScanBundle::from_kspace("p", k, maps, meta).unwrap();
        save_bundle(&b, &dir.path().join("p")).unwrap();
        let back: ScanBundle<f64> = load_bundle(&dir.path().join("p")).unwrap();
        assert_eq!(back.smaps().support(), b.smaps().support());
    }

    #[test]
    fn missing_manifest_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_bundle::<f64>(&dir.path().join("nope")), Err(Error::Io { .. })));
    }
}
