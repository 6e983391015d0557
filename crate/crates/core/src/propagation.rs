//! Propagation matrices and the pass band / bandgap / hybridisation classification.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Block, BlockSet};

/// Real 2x2 matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }
}

/// Propagation matrix across one resonator of length `ell`, speed `v`, followed by
/// the spacing `s`.
pub fn propagation_matrix(ell: f64, s: f64, v: f64, lambda: f64) -> Mat2 {
    let k = ell / (v * v) * lambda;
    Mat2::new(1.0 - s * k, s, -k, 1.0)
}

/// Product over the resonators of a block, first resonator applied first.
pub fn block_propagation(block: &Block, lambda: f64) -> Mat2 {
    block
        .resonators()
        .fold(Mat2::IDENTITY, |acc, (ell, s, v)| {
            propagation_matrix(ell, s, v, lambda).mul(&acc)
        })
}

/// Tolerance on `|det - 1|` accepted by [`larger_eigenvalue_modulus`].
pub const UNIMODULAR_TOL: f64 = 1e-10;

/// `|xi_2| = (|t| + sqrt(t^2 - 4)) / 2` for `|t| > 2`, otherwise 1.
///
/// The determinant check is relative to the size of the entries, since long products
/// grow large entries whose determinant carries proportional rounding error.
pub fn larger_eigenvalue_modulus(m: &Mat2) -> Result<f64> {
    let det = m.det();
    let scale = (m.a * m.d).abs().max((m.b * m.c).abs()).max(1.0);
    if !((det - 1.0).abs() <= UNIMODULAR_TOL * scale) {
        return Err(Error::NotUnimodular(det));
    }
    let t = m.trace().abs();
    if t <= 2.0 {
        return Ok(1.0);
    }
    Ok(0.5 * (t + (t * t - 4.0).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralRegion {
    SharedPassBand,
    Bandgap,
    Hybridisation,
}

impl SpectralRegion {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpectralRegion::SharedPassBand => "shared_pass_band",
            SpectralRegion::Bandgap => "bandgap",
            SpectralRegion::Hybridisation => "hybridisation",
        }
    }
}

impl std::fmt::Display for SpectralRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Region from the per-block traces; `|t| = 2` counts as passing.
pub fn classify_traces(traces: &[f64]) -> SpectralRegion {
    let passing = traces.iter().filter(|t| t.abs() <= 2.0).count();
    if passing == traces.len() {
        SpectralRegion::SharedPassBand
    } else if passing == 0 {
        SpectralRegion::Bandgap
    } else {
        SpectralRegion::Hybridisation
    }
}

/// Traces of every block's propagation matrix at `lambda`, in symbol order.
pub fn block_traces(blocks: &BlockSet, lambda: f64) -> Vec<f64> {
    blocks
        .blocks()
        .iter()
        .map(|b| block_propagation(b, lambda).trace())
        .collect()
}

pub fn classify_frequency(blocks: &BlockSet, lambda: f64) -> SpectralRegion {
    classify_traces(&block_traces(blocks, lambda))
}

/// One row of a classification sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedFrequency {
    pub lambda: f64,
    pub abs_traces: Vec<f64>,
    pub region: SpectralRegion,
}

/// Classifies every point of `grid` (in parallel, output in grid order).
pub fn classify_grid(blocks: &BlockSet, grid: &[f64]) -> Vec<ClassifiedFrequency> {
    grid.par_iter()
        .map(|&lambda| {
            let traces = block_traces(blocks, lambda);
            ClassifiedFrequency {
                lambda,
                region: classify_traces(&traces),
                abs_traces: traces.iter().map(|t| t.abs()).collect(),
            }
        })
        .collect()
}

/// `n` equally spaced points on `[lo, hi]`, both ends included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Sorted, disjoint closed intervals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BandIntervals {
    intervals: Vec<(f64, f64)>,
}

impl BandIntervals {
    /// Sorts and merges overlapping or touching intervals.
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.iter().any(|&(lo, hi)| !(lo <= hi)) {
            return Err(Error::Domain("interval with lo > hi".into()));
        }
        intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (lo, hi) in intervals {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Ok(BandIntervals { intervals: merged })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= x && x <= hi)
    }

    /// Pairwise intersection with another set.
    pub fn intersect(&self, other: &BandIntervals) -> BandIntervals {
        let mut out = Vec::new();
        for &(a, b) in &self.intervals {
            for &(c, d) in &other.intervals {
                let (lo, hi) = (a.max(c), b.min(d));
                if lo <= hi {
                    out.push((lo, hi));
                }
            }
        }
        BandIntervals::new(out).expect("intersection of valid intervals")
    }

    /// Complement within `[lo, hi]`.
    pub fn complement(&self, lo: f64, hi: f64) -> BandIntervals {
        let mut out = Vec::new();
        let mut cursor = lo;
        for &(a, b) in &self.intervals {
            if b < lo || a > hi {
                continue;
            }
            if a > cursor {
                out.push((cursor, a));
            }
            cursor = cursor.max(b);
        }
        if cursor < hi {
            out.push((cursor, hi));
        }
        BandIntervals { intervals: out }
    }
}

pub const DEFAULT_GRID_POINTS: usize = 2000;
const BISECTION_STEPS: usize = 60;

/// Pass bands of `block` on `[0, lambda_max]`.
///
/// `|t(lambda)| - 2` is sampled on `grid_points` equispaced points and every sign
/// change is refined by bisection. Bands narrower than the grid spacing can be missed.
pub fn band_intervals(block: &Block, lambda_max: f64, grid_points: usize) -> Result<BandIntervals> {
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(Error::Domain(format!("lambda_max must be positive, got {lambda_max}")));
    }
    if grid_points < 2 {
        return Err(Error::Domain("band search needs at least 2 grid points".into()));
    }
    let f = |lambda: f64| block_propagation(block, lambda).trace().abs() - 2.0;
    let grid = linspace(0.0, lambda_max, grid_points);
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let passing = |v: f64| v <= 0.0;

    let edge = |mut inside: f64, mut outside: f64| {
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (inside + outside);
            if passing(f(mid)) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        0.5 * (inside + outside)
    };

    let mut intervals = Vec::new();
    let mut start = passing(values[0]).then_some(grid[0]);
    for i in 1..grid.len() {
        match (passing(values[i - 1]), passing(values[i]), start) {
            (false, true, _) => start = Some(edge(grid[i], grid[i - 1])),
            (true, false, Some(lo)) => {
                intervals.push((lo, edge(grid[i - 1], grid[i])));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(lo) = start {
        intervals.push((lo, lambda_max));
    }
    BandIntervals::new(intervals)
}

/// Frequencies in `[0, lambda_max]` where some but not all blocks pass.
pub fn hybridisation_intervals(
    blocks: &BlockSet,
    lambda_max: f64,
    grid_points: usize,
) -> Result<BandIntervals> {
    let bands = blocks
        .blocks()
        .iter()
        .map(|b| band_intervals(b, lambda_max, grid_points))
        .collect::<Result<Vec<_>>>()?;
    let mut union = Vec::new();
    for b in &bands {
        union.extend_from_slice(b.intervals());
    }
    let union = BandIntervals::new(union)?;
    let shared = bands
        .iter()
        .skip(1)
        .fold(bands[0].clone(), |acc, b| acc.intersect(b));
    // Union minus shared. Edges shared by several blocks are located independently and
    // may differ by rounding, so slivers below the edge resolution are dropped.
    let outside_shared = shared.complement(0.0, lambda_max);
    let hybrid = union.intersect(&outside_shared);
    let resolution = 1e-9 * lambda_max;
    let pieces = hybrid
        .intervals()
        .iter()
        .copied()
        .filter(|(lo, hi)| hi - lo > resolution)
        .collect();
    BandIntervals::new(pieces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_standard_blocks, standard_blocks_with_dimer_spacing};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn single_resonator_matrix() {
        assert_eq!(propagation_matrix(2.0, 2.0, 1.0, 0.0), Mat2::new(1.0, 2.0, 0.0, 1.0));
        let m = propagation_matrix(2.0, 2.0, 1.0, 2.5);
        assert_eq!(m, Mat2::new(-9.0, 2.0, -5.0, 1.0));
        assert_eq!(m.trace(), -8.0);
        assert_eq!(m.det(), 1.0);
    }

    #[test]
    fn dimer_trace_polynomial() {
        let blocks = make_standard_blocks();
        let dimer = blocks.get(2).unwrap();
        for i in 0..=40 {
            let x = i as f64 * 0.125;
            let t = block_propagation(dimer, x).trace();
            assert!(close(t, 2.0 * x * x - 6.0 * x + 2.0, 1e-12), "lambda={x}");
        }
        assert!(close(block_propagation(dimer, 2.5).trace(), -0.5, 1e-14));
    }

    #[test]
    fn product_order_first_resonator_first() {
        let block = Block::new(vec![1.0, 3.0], vec![0.5, 2.0], vec![1.0, 1.0]).unwrap();
        let p1 = propagation_matrix(1.0, 0.5, 1.0, 0.7);
        let p2 = propagation_matrix(3.0, 2.0, 1.0, 0.7);
        assert_eq!(block_propagation(&block, 0.7), p2.mul(&p1));
    }

    #[test]
    fn decay_rates() {
        let blocks = make_standard_blocks();
        let single = blocks.get(1).unwrap();
        let x = larger_eigenvalue_modulus(&block_propagation(single, 2.5)).unwrap();
        assert!(close(x, (8.0 + 60f64.sqrt()) / 2.0, 1e-12));
        let x = larger_eigenvalue_modulus(&block_propagation(single, 8.5)).unwrap();
        assert!(close(x, (32.0 + 1020f64.sqrt()) / 2.0, 1e-12));
        let x = larger_eigenvalue_modulus(&block_propagation(single, 0.5)).unwrap();
        assert_eq!(x, 1.0);
        assert!(matches!(
            larger_eigenvalue_modulus(&Mat2::new(2.0, 0.0, 0.0, 2.0)),
            Err(Error::NotUnimodular(_))
        ));
    }

    #[test]
    fn classification_examples() {
        let blocks = make_standard_blocks();
        assert_eq!(classify_frequency(&blocks, 0.5), SpectralRegion::SharedPassBand);
        assert_eq!(classify_frequency(&blocks, 1.5), SpectralRegion::Bandgap);
        assert_eq!(classify_frequency(&blocks, 2.5), SpectralRegion::Hybridisation);
        assert_eq!(classify_frequency(&blocks, 4.0), SpectralRegion::Bandgap);
    }

    #[test]
    fn standard_band_edges() {
        let blocks = make_standard_blocks();
        let single = band_intervals(blocks.get(1).unwrap(), 5.0, DEFAULT_GRID_POINTS).unwrap();
        assert_eq!(single.len(), 1);
        let (lo, hi) = single.intervals()[0];
        assert_eq!(lo, 0.0);
        assert!(close(hi, 1.0, 1e-10));

        let dimer = band_intervals(blocks.get(2).unwrap(), 5.0, DEFAULT_GRID_POINTS).unwrap();
        assert_eq!(dimer.len(), 2);
        let expected = [(0.0, 1.0), (2.0, 3.0)];
        for (got, want) in dimer.intervals().iter().zip(expected) {
            assert!(close(got.0, want.0, 1e-10) && close(got.1, want.1, 1e-10), "{got:?}");
        }
    }

    #[test]
    fn modified_dimer_upper_band() {
        let blocks = standard_blocks_with_dimer_spacing(0.25);
        let bands = band_intervals(blocks.get(2).unwrap(), 12.0, DEFAULT_GRID_POINTS).unwrap();
        let (lo, hi) = *bands.intervals().last().unwrap();
        assert!(close(lo, 8.0, 1e-9) && close(hi, 9.0, 1e-9), "{bands:?}");
    }

    #[test]
    fn standard_hybridisation_interval() {
        let h = hybridisation_intervals(&make_standard_blocks(), 5.0, DEFAULT_GRID_POINTS).unwrap();
        assert_eq!(h.len(), 1);
        let (lo, hi) = h.intervals()[0];
        assert!(close(lo, 2.0, 1e-9) && close(hi, 3.0, 1e-9));
    }

    #[test]
    fn interval_algebra() {
        let a = BandIntervals::new(vec![(2.0, 3.0), (0.0, 1.0), (0.5, 1.5)]).unwrap();
        assert_eq!(a.intervals(), &[(0.0, 1.5), (2.0, 3.0)]);
        assert_eq!(a.complement(0.0, 4.0).intervals(), &[(1.5, 2.0), (3.0, 4.0)]);
        let b = BandIntervals::new(vec![(1.0, 2.5)]).unwrap();
        assert_eq!(a.intersect(&b).intervals(), &[(1.0, 1.5), (2.0, 2.5)]);
    }
}
