//! Test-time mask prediction: the mask of the training scan whose
//! low-frequency reconstruction is closest (Euclidean, complex) to the test
//! scan's.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bundle::{decode_c64, encode_c64, read_json, write_dir_atomically, write_file, write_json, ScanBundle};
use crate::error::{ensure, Error, Result};
use crate::image::{quantize_f32, CoilMaps, Image, KSpace};
use crate::mask::LineMask;
use crate::operator::adjoint;
use crate::Scalar;

/// Coil-combined zero-filled image from the `fixed` central lines only.
pub fn lowfreq_feature<T: Scalar>(y: &KSpace<T>, smaps: &CoilMaps<T>, fixed: &[usize]) -> Result<Image<T>> {
    ensure!(!fixed.is_empty(), InvalidInput, "low-frequency feature needs at least one line");
    let mask = LineMask::from_lines(y.width(), fixed.to_vec())?;
    adjoint(y, smaps, &mask)
}

/// Feature as stored in a library: rounded to `f32`, optionally scaled to
/// unit norm.
fn library_feature(mut feature: Image<f64>, normalize: bool) -> Image<f64> {
    if normalize {
        let n = feature.norm();
        if n > 0.0 {
            feature = feature.scale(num_complex::Complex::new(1.0 / n, 0.0));
        }
    }
    quantize_f32(feature.data_mut());
    feature
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryEntry {
    pub scan_id: String,
    pub feature: Image<f64>,
    pub mask: LineMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskLibrary {
    height: usize,
    width: usize,
    fixed: Vec<usize>,
    normalize: bool,
    entries: Vec<LibraryEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mask: LineMask,
    pub scan_id: String,
    pub index: usize,
    pub distance: f64,
}

impl MaskLibrary {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }

    pub fn normalized(&self) -> bool {
        self.normalize
    }

    pub fn entries(&self) -> &[LibraryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Feature of a query scan, prepared exactly like the stored ones.
    pub fn query_feature<T: Scalar>(&self, y: &KSpace<T>, smaps: &CoilMaps<T>) -> Result<Image<f64>> {
        ensure!(
            y.image_shape() == (self.height, self.width),
            Dimension,
            "query {:?} vs library {}x{}",
            y.image_shape(),
            self.height,
            self.width
        );
        Ok(library_feature(lowfreq_feature(y, smaps, &self.fixed)?.cast(), self.normalize))
    }

    /// `‖query − feature_i‖₂` for every entry, in library order.
    pub fn distances(&self, query: &Image<f64>) -> Result<Vec<f64>> {
        ensure!(query.shape() == (self.height, self.width), Dimension, "query feature {:?}", query.shape());
        Ok(self.entries.iter().map(|e| feature_distance(query, &e.feature)).collect())
    }

    /// Nearest entry; ties go to the earliest entry.
    pub fn predict_from_feature(&self, query: &Image<f64>) -> Result<Prediction> {
        ensure!(!self.entries.is_empty(), InvalidInput, "empty mask library");
        let d = self.distances(query)?;
        let mut best = 0;
        for (i, &v) in d.iter().enumerate() {
            if v < d[best] {
                best = i;
            }
        }
        let e = &self.entries[best];
        Ok(Prediction { mask: e.mask.clone(), scan_id: e.scan_id.clone(), index: best, distance: d[best] })
    }
}

pub fn feature_distance(a: &Image<f64>, b: &Image<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// One entry per training scan, in order. Masks must share the width and
/// contain the common `fixed` block.
pub fn build_library<T: Scalar>(train: &[(ScanBundle<T>, LineMask)], fixed: &[usize]) -> Result<MaskLibrary> {
    build_library_with(train, fixed, false)
}

pub fn build_library_with<T: Scalar>(train: &[(ScanBundle<T>, LineMask)], fixed: &[usize], normalize: bool) -> Result<MaskLibrary> {
    ensure!(!train.is_empty(), InvalidInput, "mask library needs at least one training scan");
    let (height, width) = train[0].0.gt().shape();
    let mut fixed = fixed.to_vec();
    fixed.sort_unstable();
    fixed.dedup();
    let mut entries = Vec::with_capacity(train.len());
    for (scan, mask) in train {
        ensure!(scan.gt().shape() == (height, width), InvalidInput, "scan {} has a different shape", scan.scan_id);
        ensure!(mask.width() == width, InvalidInput, "mask of {} has width {}, expected {width}", scan.scan_id, mask.width());
        ensure!(mask.is_complete(), InvalidInput, "mask of {} is incomplete", scan.scan_id);
        ensure!(mask.fixed() == fixed.as_slice(), InvalidInput, "mask of {} has a different fixed block", scan.scan_id);
        let feature = library_feature(lowfreq_feature(scan.kspace(), scan.smaps(), &fixed)?.cast(), normalize);
        entries.push(LibraryEntry { scan_id: scan.scan_id.clone(), feature, mask: mask.clone() });
    }
    Ok(MaskLibrary { height, width, fixed, normalize, entries })
}

/// Mask of the nearest training scan for a test acquisition.
pub fn predict_mask<T: Scalar>(y_test: &KSpace<T>, smaps_test: &CoilMaps<T>, library: &MaskLibrary) -> Result<Prediction> {
    ensure!(!library.is_empty(), InvalidInput, "empty mask library");
    let q = library.query_feature(y_test, smaps_test)?;
    library.predict_from_feature(&q)
}

#[derive(Serialize, Deserialize)]
struct LibraryFile {
    height: usize,
    width: usize,
    fixed: Vec<usize>,
    #[serde(default)]
    normalize: bool,
    entries: Vec<LibraryFileEntry>,
}

#[derive(Serialize, Deserialize)]
struct LibraryFileEntry {
    scan_id: String,
    mask: LineMask,
    feature: String,
}

pub const LIBRARY_FILE: &str = "library.json";

pub fn save_library(library: &MaskLibrary, dir: &Path) -> Result<()> {
    let file = LibraryFile {
        height: library.height,
        width: library.width,
        fixed: library.fixed.clone(),
        normalize: library.normalize,
        entries: library
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| LibraryFileEntry { scan_id: e.scan_id.clone(), mask: e.mask.clone(), feature: format!("feature_{i:05}.c64") })
            .collect(),
    };
    write_dir_atomically(dir, |tmp| {
        for (fe, e) in file.entries.iter().zip(&library.entries) {
            write_file(&tmp.join(&fe.feature), &encode_c64(e.feature.data()))?;
        }
        write_json(&tmp.join(LIBRARY_FILE), &file)
    })
}

pub fn load_library(dir: &Path) -> Result<MaskLibrary> {
    let path = dir.join(LIBRARY_FILE);
    let file: LibraryFile = read_json(&path)?;
    if file.entries.is_empty() {
        return Err(Error::corrupt(&path, "library has no entries"));
    }
    let n = file.height * file.width;
    let mut entries = Vec::with_capacity(file.entries.len());
    for e in file.entries {
        let fpath = dir.join(&e.feature);
        let bytes = fs::read(&fpath).map_err(|err| Error::io(&fpath, err))?;
        let data = decode_c64::<f64>(&bytes, n, &fpath)?;
        if e.mask.width() != file.width || e.mask.fixed() != file.fixed.as_slice() {
            return Err(Error::corrupt(&path, format!("entry {} disagrees with the library layout", e.scan_id)));
        }
        let feature = Image::new(file.height, file.width, data).map_err(|err| Error::corrupt(&fpath, err.to_string()))?;
        entries.push(LibraryEntry { scan_id: e.scan_id, feature, mask: e.mask });
    }
    Ok(MaskLibrary { height: file.height, width: file.width, fixed: file.fixed, normalize: file.normalize, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::make_bundle;
    use crate::mask::central_lines;

    fn masked(scan: &ScanBundle, extra: &[usize]) -> LineMask {
        let fixed = central_lines(16, 4).unwrap();
        let mut lines = fixed.clone();
        lines.extend_from_slice(extra);
        LineMask::new(16, 6, fixed, lines).unwrap_or_else(|_| panic!("{}", scan.scan_id))
    }

    #[test]
    fn full_feature_is_ground_truth() {
        let b = make_bundle("a", 1, 16, 16, 2, 0.0).unwrap();
        let f = lowfreq_feature(b.kspace(), b.smaps(), &(0..16).collect::<Vec<_>>()).unwrap();
        for (x, y) in f.data().iter().zip(b.gt().data()) {
            assert!((x - y).norm() < 1e-6);
        }
        assert_eq!(lowfreq_feature(&KSpace::zeros(2, 16, 16), b.smaps(), &[8]).unwrap().norm_sqr(), 0.0);
        assert!(lowfreq_feature(b.kspace(), b.smaps(), &[]).is_err());
    }

    #[test]
    fn library_checks_and_self_retrieval() {
        let scans: Vec<ScanBundle> = (0..3).map(|i| make_bundle(format!("s{i}"), i, 16, 16, 2, 0.01).unwrap()).collect();
        assert!(build_library::<f64>(&[], &[6, 7, 8, 9]).is_err());
        let fixed = central_lines(16, 4).unwrap();
        let train: Vec<_> = scans.iter().enumerate().map(|(i, s)| (s.clone(), masked(s, &[i, 15 - i]))).collect();
        let lib = build_library(&train, &fixed).unwrap();
        assert_eq!(lib.len(), 3);
        for (i, s) in scans.iter().enumerate() {
            let p = predict_mask(s.kspace(), s.smaps(), &lib).unwrap();
            assert_eq!(p.index, i);
            assert_eq!(p.distance, 0.0);
            assert_eq!(p.mask, train[i].1);
        }
        let bad = vec![(scans[0].clone(), LineMask::full(16))];
        assert!(build_library(&bad, &fixed).is_err());
    }

    #[test]
    fn library_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let fixed = central_lines(16, 4).unwrap();
        let train: Vec<_> = (0..2)
            .map(|i| {
                let s = make_bundle(format!("s{i}"), i, 16, 16, 2, 0.01).unwrap();
                let m = masked(&s, &[0, 1]);
                (s, m)
            })
            .collect();
        let lib = build_library_with(&train, &fixed, true).unwrap();
        save_library(&lib, &dir.path().join("lib")).unwrap();
        assert_eq!(load_library(&dir.path().join("lib")).unwrap(), lib);
        assert!(load_library(&dir.path().join("missing")).is_err());
    }
}
