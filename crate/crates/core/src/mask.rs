//! Cartesian line masks over phase-encode columns.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Sorted set of sampled k-space columns with a frozen low-frequency block
/// and a line budget.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawLineMask", into = "RawLineMask")]
pub struct LineMask {
    width: usize,
    budget: usize,
    fixed: Vec<usize>,
    lines: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawLineMask {
    width: usize,
    budget: usize,
    fixed: Vec<usize>,
    lines: Vec<usize>,
}

impl TryFrom<RawLineMask> for LineMask {
    type Error = Error;

    fn try_from(raw: RawLineMask) -> Result<Self> {
        LineMask::new(raw.width, raw.budget, raw.fixed, raw.lines)
    }
}

impl From<LineMask> for RawLineMask {
    fn from(m: LineMask) -> Self {
        RawLineMask { width: m.width, budget: m.budget, fixed: m.fixed, lines: m.lines }
    }
}

fn strictly_increasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl LineMask {
    /// `lines` and `fixed` may be given in any order; duplicates are rejected.
    pub fn new(width: usize, budget: usize, mut fixed: Vec<usize>, mut lines: Vec<usize>) -> Result<Self> {
        ensure!(width > 0, InvalidInput, "mask width must be nonzero");
        lines.sort_unstable();
        fixed.sort_unstable();
        ensure!(strictly_increasing(&lines), InvalidInput, "duplicate lines in mask");
        ensure!(strictly_increasing(&fixed), InvalidInput, "duplicate fixed lines in mask");
        ensure!(lines.iter().all(|&l| l < width), InvalidInput, "line index out of range for width {width}");
        ensure!(fixed.iter().all(|f| lines.binary_search(f).is_ok()), InvalidInput, "fixed lines must be sampled");
        ensure!(lines.len() <= budget, InvalidInput, "{} lines exceed budget {budget}", lines.len());
        ensure!(budget <= width, InvalidInput, "budget {budget} exceeds width {width}");
        Ok(Self { width, budget, fixed, lines })
    }

    /// Every column sampled; budget equals width.
    pub fn full(width: usize) -> Self {
        Self { width, budget: width, fixed: Vec::new(), lines: (0..width).collect() }
    }

    /// Only the given lines, budget equal to their count, nothing frozen.
    pub fn from_lines(width: usize, lines: Vec<usize>) -> Result<Self> {
        let budget = lines.len();
        Self::new(width, budget, Vec::new(), lines)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }

    pub fn lines(&self) -> &[usize] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.lines.len() == self.budget
    }

    pub fn contains(&self, line: usize) -> bool {
        self.lines.binary_search(&line).is_ok()
    }

    /// Dense indicator over columns.
    pub fn indicator(&self) -> Vec<bool> {
        let mut out = vec![false; self.width];
        for &l in &self.lines {
            out[l] = true;
        }
        out
    }

    /// Lines that may be relocated (not part of the frozen block).
    pub fn movable(&self) -> Vec<usize> {
        self.lines.iter().copied().filter(|l| self.fixed.binary_search(l).is_err()).collect()
    }
}

/// The `n` contiguous columns closest to the DC column `width / 2`. For even
/// `n` the block extends one column further below DC than above it.
pub fn central_lines(width: usize, n: usize) -> Result<Vec<usize>> {
    ensure!(n <= width, InvalidInput, "cannot take {n} central lines from width {width}");
    let start = width / 2 - n / 2;
    Ok((start..start + n).collect())
}
