//! Band functions of the periodised chain and the Thouless localisation criterion.
//!
//! The finite chain is repeated periodically with its trailing spacing closing the
//! cell. Each eigenvalue `lambda_i` is compared with its shift `delta lambda_i` under a
//! change of boundary condition, measured in units of the local mean level spacing.
//! Extended states respond strongly (`g` of order one), localised states barely move.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacitance::quasiperiodic_capacitance;
use crate::eigen::{eig_hermitian_dense, EigOptions};
use crate::error::{Error, Result};
use crate::format::Csv;
use crate::geometry::{BlockSet, ResonatorArray};
use crate::propagation::{classify_frequency, linspace, SpectralRegion};
use crate::spectral_stats::{Bandwidth, GaussianKde};

use std::f64::consts::PI;

/// Sorted eigenvalues of the quasiperiodic matrix at each quasimomentum.
#[derive(Debug, Clone, PartialEq)]
pub struct BandFunctions {
    pub alphas: Vec<f64>,
    /// `bands[a][i] = lambda_i(alphas[a])`.
    pub bands: Vec<Vec<f64>>,
    pub cell_length: f64,
    /// `(alpha index, band index)` where `lambda_i` and `lambda_{i+1}` coincide to
    /// rounding. Band indices are kept in sorted order regardless.
    pub ties: Vec<(usize, usize)>,
}

impl BandFunctions {
    pub fn band_count(&self) -> usize {
        self.bands.first().map_or(0, Vec::len)
    }

    fn find_alpha(&self, target: f64) -> Option<usize> {
        let tol = 1e-12 * (PI / self.cell_length).max(1.0);
        self.alphas.iter().position(|a| (a - target).abs() <= tol)
    }
}

/// `[0, pi/L]`, the quasimomenta needed by [`LevelShift::TwoPoint`].
pub fn two_point_alphas(cell_length: f64) -> Vec<f64> {
    vec![0.0, PI / cell_length]
}

/// `n` equispaced quasimomenta on the Brillouin zone; `n` is rounded up to an odd
/// number so that `alpha = 0` is on the grid.
pub fn brillouin_grid(cell_length: f64, n: usize) -> Vec<f64> {
    let n = n.max(3) | 1;
    let half = PI / cell_length;
    let mut g = linspace(-half, half, n);
    g[n / 2] = 0.0;
    g
}

pub fn band_functions(array: &ResonatorArray, alphas: &[f64]) -> Result<BandFunctions> {
    if alphas.is_empty() {
        return Err(Error::Domain("no quasimomenta given".into()));
    }
    let opts = EigOptions::default();
    let solved = alphas
        .par_iter()
        .map(|&alpha| {
            let q = quasiperiodic_capacitance(array, alpha);
            eig_hermitian_dense(&q.matrix, &opts).map(|s| (q.alpha, s.into_values()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ties = Vec::new();
    for (a, (_, values)) in solved.iter().enumerate() {
        let scale = values.last().map_or(1.0, |v| v.abs().max(1.0));
        for (i, w) in values.windows(2).enumerate() {
            if w[1] - w[0] <= 1e-12 * scale {
                ties.push((a, i));
            }
        }
    }
    if !ties.is_empty() {
        log::debug!("{} coincident band pairs", ties.len());
    }
    let (alphas, bands) = solved.into_iter().unzip();
    Ok(BandFunctions {
        alphas,
        bands,
        cell_length: array.total_length(),
        ties,
    })
}

/// How the boundary-condition sensitivity is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelShift {
    /// `|lambda_i(pi/L) - lambda_i(0)|`: periodic against antiperiodic.
    #[default]
    TwoPoint,
    /// `(1 / (2 pi L)) int_{Y*} |lambda_i(alpha) - lambda_i(0)| d alpha`, trapezoid rule.
    Quadrature,
}

/// Minimum number of quasimomenta for [`LevelShift::Quadrature`].
pub const MIN_QUADRATURE_POINTS: usize = 8;

pub fn level_shift(bands: &BandFunctions, mode: LevelShift) -> Result<Vec<f64>> {
    let zero = bands.find_alpha(0.0).ok_or(Error::MissingQuasimomentum(0.0))?;
    let base = &bands.bands[zero];
    match mode {
        LevelShift::TwoPoint => {
            let edge = PI / bands.cell_length;
            let at = bands
                .find_alpha(edge)
                .or_else(|| bands.find_alpha(-edge))
                .ok_or(Error::MissingQuasimomentum(edge))?;
            Ok(bands.bands[at].iter().zip(base).map(|(x, y)| (x - y).abs()).collect())
        }
        LevelShift::Quadrature => {
            if bands.alphas.len() < MIN_QUADRATURE_POINTS {
                return Err(Error::Domain(format!(
                    "quadrature needs at least {MIN_QUADRATURE_POINTS} quasimomenta, got {}",
                    bands.alphas.len()
                )));
            }
            let mut order: Vec<usize> = (0..bands.alphas.len()).collect();
            order.sort_by(|&a, &b| bands.alphas[a].total_cmp(&bands.alphas[b]));
            let prefactor = 1.0 / (2.0 * PI * bands.cell_length);
            Ok((0..base.len())
                .map(|i| {
                    let integral: f64 = order
                        .windows(2)
                        .map(|w| {
                            let (a, b) = (w[0], w[1]);
                            let fa = (bands.bands[a][i] - base[i]).abs();
                            let fb = (bands.bands[b][i] - base[i]).abs();
                            0.5 * (bands.alphas[b] - bands.alphas[a]) * (fa + fb)
                        })
                        .sum();
                    prefactor * integral
                })
                .collect())
        }
    }
}

/// Localisation tag thresholds on `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub localised: f64,
    pub delocalised: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            localised: 0.1,
            delocalised: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Localisation {
    Localised,
    Intermediate,
    Delocalised,
}

impl Localisation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Localisation::Localised => "localised",
            Localisation::Intermediate => "intermediate",
            Localisation::Delocalised => "delocalised",
        }
    }
}

impl Thresholds {
    pub fn tag(&self, g: f64) -> Localisation {
        if g < self.localised {
            Localisation::Localised
        } else if g > self.delocalised {
            Localisation::Delocalised
        } else {
            Localisation::Intermediate
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThoulessEntry {
    pub lambda: f64,
    pub delta_lambda: f64,
    /// Mean level spacing `1 / (N kde(lambda))`.
    pub spacing: f64,
    /// Set when the density estimate underflowed and `spacing` was capped at the
    /// spectral range.
    pub spacing_capped: bool,
    pub g: f64,
    pub region: Option<SpectralRegion>,
    pub tag: Localisation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThoulessReport {
    pub entries: Vec<ThoulessEntry>,
    pub bandwidth: f64,
}

impl ThoulessReport {
    /// Fills in the spectral region of every eigenvalue.
    pub fn with_regions(mut self, blocks: &BlockSet) -> Self {
        for e in &mut self.entries {
            e.region = Some(classify_frequency(blocks, e.lambda));
        }
        self
    }

    pub fn retag(&mut self, thresholds: &Thresholds) {
        for e in &mut self.entries {
            e.tag = thresholds.tag(e.g);
        }
    }

    /// `g` of the eigenvalues strictly inside `(lo, hi)`.
    pub fn ratios_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| lo < e.lambda && e.lambda < hi)
            .map(|e| e.g)
            .collect()
    }

    /// `lambda,delta_lambda,spacing,g,region,tag` rows.
    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(&["lambda", "delta_lambda", "spacing", "g", "region", "tag"]);
        for e in &self.entries {
            let region = e.region.map_or("", |r| r.as_str());
            csv.row(&[
                e.lambda.into(),
                e.delta_lambda.into(),
                e.spacing.into(),
                e.g.into(),
                region.into(),
                e.tag.as_str().into(),
            ]);
        }
        csv
    }
}

/// `g_i = delta lambda_i / Delta(lambda_i)` with `Delta = 1 / (N kde(lambda_i))`.
pub fn thouless_ratios(
    spectrum: &[f64],
    shifts: &[f64],
    array: &ResonatorArray,
    bandwidth: Bandwidth,
) -> Result<ThoulessReport> {
    if spectrum.len() != shifts.len() {
        return Err(Error::Domain(format!(
            "{} eigenvalues but {} level shifts",
            spectrum.len(),
            shifts.len()
        )));
    }
    let kde = GaussianKde::new(spectrum, bandwidth)?;
    let n = array.len() as f64;
    let (lo, hi) = spectrum
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let range = if hi > lo { hi - lo } else { 1.0 };
    let thresholds = Thresholds::default();
    let entries = spectrum
        .iter()
        .zip(shifts)
        .map(|(&lambda, &delta_lambda)| {
            let raw = 1.0 / (n * kde.evaluate(lambda));
            let capped = !(raw.is_finite() && raw <= range);
            let spacing = if capped { range } else { raw };
            let g = delta_lambda / spacing;
            ThoulessEntry {
                lambda,
                delta_lambda,
                spacing,
                spacing_capped: capped,
                g,
                region: None,
                tag: thresholds.tag(g),
            }
        })
        .collect();
    Ok(ThoulessReport {
        entries,
        bandwidth: kde.bandwidth(),
    })
}

/// Two-point Thouless analysis of an assembled chain, with regions from `blocks`.
pub fn analyse(array: &ResonatorArray, blocks: &BlockSet, bandwidth: Bandwidth) -> Result<ThoulessReport> {
    let bands = band_functions(array, &two_point_alphas(array.total_length()))?;
    let shifts = level_shift(&bands, LevelShift::TwoPoint)?;
    Ok(thouless_ratios(&bands.bands[0], &shifts, array, bandwidth)?.with_regions(blocks))
}

/// Median of a sample (mean of the middle pair for even sizes); `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 0 { 0.5 * (v[m - 1] + v[m]) } else { v[m] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_standard_blocks;

    #[test]
    fn single_block_band() {
        let array = ResonatorArray::new(vec![2.0], vec![2.0], vec![1.0]).unwrap();
        let alphas = [0.0, PI / 8.0, PI / 4.0, -PI / 4.0];
        let b = band_functions(&array, &alphas).unwrap();
        for (a, band) in b.alphas.iter().zip(&b.bands) {
            assert!((band[0] - (1.0 - (4.0 * a).cos()) / 2.0).abs() < 1e-11);
        }
        let shift = level_shift(&b, LevelShift::TwoPoint).unwrap();
        assert!((shift[0] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn missing_alpha() {
        let array = ResonatorArray::new(vec![2.0], vec![2.0], vec![1.0]).unwrap();
        let b = band_functions(&array, &[0.1, 0.2]).unwrap();
        assert!(matches!(level_shift(&b, LevelShift::TwoPoint), Err(Error::MissingQuasimomentum(_))));
        let b = band_functions(&array, &two_point_alphas(4.0)).unwrap();
        assert!(level_shift(&b, LevelShift::Quadrature).is_err());
    }

    #[test]
    fn quadrature_single_block() {
        // (1/(2 pi L)) int_{-pi/4}^{pi/4} (1 - cos 4a)/2 da = (1/(8 pi)) (pi/4) = 1/32.
        let array = ResonatorArray::new(vec![2.0], vec![2.0], vec![1.0]).unwrap();
        let b = band_functions(&array, &brillouin_grid(4.0, 2001)).unwrap();
        let shift = level_shift(&b, LevelShift::Quadrature).unwrap();
        assert!((shift[0] - 1.0 / 32.0).abs() < 1e-7, "{}", shift[0]);
    }

    #[test]
    fn zero_shift_gives_zero_ratio() {
        let array = ResonatorArray::uniform(3, 1.0, 1.0, 1.0).unwrap();
        let r = thouless_ratios(&[0.5, 1.0, 2.0], &[0.0, 0.1, 0.0], &array, Bandwidth::Auto).unwrap();
        assert_eq!(r.entries[0].g, 0.0);
        assert_eq!(r.entries[0].tag, Localisation::Localised);
        assert!(r.entries.iter().all(|e| e.spacing > 0.0));
    }

    #[test]
    fn uniform_chain_is_delocalised() {
        let array = ResonatorArray::uniform(50, 1.0, 1.0, 1.0).unwrap();
        let r = analyse(&array, &make_standard_blocks(), Bandwidth::Auto).unwrap();
        let mid = r.ratios_in(1.0, 3.0);
        assert!(!mid.is_empty());
        assert!(mid.iter().all(|&g| g >= 0.5), "{mid:?}");
    }

    #[test]
    fn tags() {
        let t = Thresholds::default();
        assert_eq!(t.tag(0.05), Localisation::Localised);
        assert_eq!(t.tag(0.3), Localisation::Intermediate);
        assert_eq!(t.tag(0.9), Localisation::Delocalised);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
