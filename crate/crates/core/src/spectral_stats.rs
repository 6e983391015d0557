//! Empirical distributions of spectra and correlation statistics of block sequences.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::Csv;
use crate::geometry::BlockSequence;

/// Right-continuous step function with jumps `masses[i]` at `support[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCDF {
    support: Vec<f64>,
    masses: Vec<f64>,
}

impl StepCDF {
    /// Each value carries `mass_each`; equal values are merged. Values need not be sorted.
    pub fn with_mass(values: &[f64], mass_each: f64) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("CDF support must be finite".into()));
        }
        if !(mass_each > 0.0 && mass_each.is_finite()) {
            return Err(Error::Domain(format!("point mass must be positive, got {mass_each}")));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut support: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut masses: Vec<f64> = Vec::with_capacity(sorted.len());
        for x in sorted {
            if support.last() == Some(&x) {
                *masses.last_mut().unwrap() += mass_each;
            } else {
                support.push(x);
                masses.push(mass_each);
            }
        }
        Ok(StepCDF { support, masses })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// `F(x)`: mass at or below `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.support.partition_point(|&s| s <= x);
        self.masses[..k].iter().sum()
    }

    /// Cumulative values at each support point.
    pub fn cumulative(&self) -> Vec<f64> {
        self.masses
            .iter()
            .scan(0.0, |acc, m| {
                *acc += m;
                Some(*acc)
            })
            .collect()
    }

    /// Mixture `(w_self * self + w_other * other)` with the given weights.
    pub fn mixture(&self, w_self: f64, other: &StepCDF, w_other: f64) -> StepCDF {
        let mut pairs: Vec<(f64, f64)> = self
            .support
            .iter()
            .zip(&self.masses)
            .map(|(&x, &m)| (x, w_self * m))
            .chain(other.support.iter().zip(&other.masses).map(|(&x, &m)| (x, w_other * m)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::new();
        let mut masses: Vec<f64> = Vec::new();
        for (x, m) in pairs {
            if support.last() == Some(&x) {
                *masses.last_mut().unwrap() += m;
            } else {
                support.push(x);
                masses.push(m);
            }
        }
        StepCDF { support, masses }
    }

    /// `lambda,cdf` rows, one per support point.
    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(&["lambda", "cdf"]);
        for (x, f) in self.support.iter().zip(self.cumulative()) {
            csv.row(&[(*x).into(), f.into()]);
        }
        csv
    }
}

/// Empirical CDF with mass `1/N` per eigenvalue.
pub fn ecdf(values: &[f64]) -> Result<StepCDF> {
    if values.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    StepCDF::with_mass(values, 1.0 / values.len() as f64)
}

/// `int_lo^hi |U - V|` for two step functions, exact on the merged breakpoints.
fn integrate_abs_difference(u: &StepCDF, v: &StepCDF, lo: f64, hi: f64) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut fu, mut fv) = (0.0, 0.0);
    // Absorb jumps at or below `lo`.
    while i < u.support.len() && u.support[i] <= lo {
        fu += u.masses[i];
        i += 1;
    }
    while j < v.support.len() && v.support[j] <= lo {
        fv += v.masses[j];
        j += 1;
    }
    let mut x = lo;
    let mut total = 0.0;
    loop {
        let nu = u.support.get(i).copied().unwrap_or(f64::INFINITY);
        let nv = v.support.get(j).copied().unwrap_or(f64::INFINITY);
        let next = nu.min(nv).min(hi);
        total += (fu - fv).abs() * (next - x);
        if next >= hi {
            break;
        }
        x = next;
        while i < u.support.len() && u.support[i] == x {
            fu += u.masses[i];
            i += 1;
        }
        while j < v.support.len() && v.support[j] == x {
            fv += v.masses[j];
            j += 1;
        }
    }
    total
}

/// Relative tolerance on equal total masses in [`wasserstein`].
pub const MASS_TOL: f64 = 1e-9;

/// `l_1` distance `int |U - V|` between step CDFs of equal total mass.
pub fn wasserstein(u: &StepCDF, v: &StepCDF) -> Result<f64> {
    let (mu, mv) = (u.total_mass(), v.total_mass());
    if (mu - mv).abs() > MASS_TOL * mu.abs().max(mv.abs()).max(1.0) {
        return Err(Error::MassMismatch { left: mu, right: mv });
    }
    let (Some(&a), Some(&b)) = (u.support.first(), v.support.first()) else {
        return Ok(0.0);
    };
    let lo = a.min(b);
    let hi = u.support.last().unwrap().max(*v.support.last().unwrap());
    Ok(integrate_abs_difference(u, v, lo, hi))
}

/// Distance between the parts of two spectra inside the window `(lo, hi)`.
///
/// Both CDFs put mass `1 / n` on each eigenvalue in the window, with `n` the direct
/// spectrum's count there, so a mismatch in counts shows up as a difference in final
/// height. The integral runs over `[lo, hi]`. When `direct` has no eigenvalue in the
/// window the estimate's own count is used; two empty windows are at distance 0.
pub fn window_wasserstein(direct: &[f64], estimate: &[f64], lo: f64, hi: f64) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::Domain(format!("empty window ({lo}, {hi})")));
    }
    let inside = |xs: &[f64]| -> Vec<f64> { xs.iter().copied().filter(|&x| lo < x && x < hi).collect() };
    let (d, e) = (inside(direct), inside(estimate));
    let n = if d.is_empty() { e.len() } else { d.len() };
    if n == 0 {
        return Ok(0.0);
    }
    let mass = 1.0 / n as f64;
    let u = StepCDF::with_mass(&d, mass)?;
    let v = StepCDF::with_mass(&e, mass)?;
    Ok(integrate_abs_difference(&u, &v, lo, hi))
}

/// Kernel bandwidth selection.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Silverman's rule of thumb.
    #[default]
    Auto,
    Fixed(f64),
}

/// Bandwidth used when the sample has no spread.
pub const FALLBACK_BANDWIDTH: f64 = 1e-3;

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}

/// `0.9 min(sigma, IQR / 1.34) N^{-1/5}`; the IQR term is dropped when it vanishes
/// and [`FALLBACK_BANDWIDTH`] is returned for a sample without spread.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return FALLBACK_BANDWIDTH;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sigma = var.sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sigma.min(iqr / 1.34) } else { sigma };
    if !(spread > 0.0) {
        return FALLBACK_BANDWIDTH;
    }
    0.9 * spread * (n as f64).powf(-0.2)
}

/// Gaussian kernel density estimator.
#[derive(Debug, Clone)]
pub struct GaussianKde {
    points: Vec<f64>,
    bandwidth: f64,
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

impl GaussianKde {
    pub fn new(values: &[f64], bandwidth: Bandwidth) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySpectrum);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("KDE sample must be finite".into()));
        }
        let h = match bandwidth {
            Bandwidth::Auto => silverman_bandwidth(values),
            Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
            Bandwidth::Fixed(h) => {
                return Err(Error::Domain(format!("bandwidth must be positive, got {h}")))
            }
        };
        let mut points = values.to_vec();
        points.sort_by(f64::total_cmp);
        Ok(GaussianKde { points, bandwidth: h })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// `(1 / (N h)) sum_i phi((x - x_i) / h)`. Points beyond 40 bandwidths contribute
    /// nothing representable and are skipped.
    pub fn evaluate(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let lo = self.points.partition_point(|&p| p < x - 40.0 * h);
        let hi = self.points.partition_point(|&p| p <= x + 40.0 * h);
        let sum: f64 = self.points[lo..hi]
            .iter()
            .map(|&p| {
                let z = (x - p) / h;
                (-0.5 * z * z).exp()
            })
            .sum();
        sum * INV_SQRT_2PI / (self.points.len() as f64 * h)
    }

    pub fn evaluate_many(&self, xs: &[f64]) -> Vec<f64> {
        xs.par_iter().map(|&x| self.evaluate(x)).collect()
    }

    /// Equispaced grid reaching `pad` bandwidths beyond the extreme sample points.
    pub fn default_grid(&self, points: usize, pad: f64) -> Vec<f64> {
        let lo = self.points[0] - pad * self.bandwidth;
        let hi = self.points[self.points.len() - 1] + pad * self.bandwidth;
        crate::propagation::linspace(lo, hi, points)
    }
}

/// Density values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityEstimate {
    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    /// `lambda,density` rows.
    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(&["lambda", "density"]);
        for (x, y) in self.grid.iter().zip(&self.values) {
            csv.row(&[(*x).into(), (*y).into()]);
        }
        csv
    }
}

/// Gaussian KDE of `values` evaluated on `grid`.
pub fn kde(values: &[f64], bandwidth: Bandwidth, grid: &[f64]) -> Result<DensityEstimate> {
    let k = GaussianKde::new(values, bandwidth)?;
    Ok(DensityEstimate {
        grid: grid.to_vec(),
        values: k.evaluate_many(grid),
        bandwidth: k.bandwidth(),
    })
}

/// Empirical autocovariance of the indicator of symbol 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Autocovariance {
    /// `values[r] = K(r)` for `r = 0..=r_max`.
    pub values: Vec<f64>,
    /// Observed density of each symbol `1..=D`.
    pub p: Vec<f64>,
}

impl Autocovariance {
    pub fn r_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn lags(&self) -> std::ops::RangeInclusive<usize> {
        0..=self.r_max()
    }
}

/// `K(r) = S_2(r) - p_1^2`, where `S_2(r)` is the fraction of positions `j` with
/// `chi_j = chi_{j+r} = 1` among the `M - r` available pairs.
pub fn autocovariance(chi: &BlockSequence, r_max: usize) -> Result<Autocovariance> {
    let m = chi.len();
    if m == 0 {
        return Err(Error::Domain("autocovariance of an empty sequence".into()));
    }
    if 2 * r_max >= m {
        return Err(Error::Domain(format!(
            "lag {r_max} too large for a sequence of length {m}"
        )));
    }
    let d = chi.symbols().iter().copied().max().unwrap_or(1).max(2) as usize;
    let mut p = vec![0.0; d];
    for &s in chi.symbols() {
        p[s as usize - 1] += 1.0;
    }
    p.iter_mut().for_each(|x| *x /= m as f64);
    let ones: Vec<f64> = chi.symbols().iter().map(|&s| (s == 1) as u8 as f64).collect();
    let p1 = p[0];
    let values = (0..=r_max)
        .into_par_iter()
        .map(|r| {
            let pairs = m - r;
            let hits: f64 = ones[..pairs].iter().zip(&ones[r..]).map(|(a, b)| a * b).sum();
            hits / pairs as f64 - p1 * p1
        })
        .collect();
    Ok(Autocovariance { values, p })
}

/// Lag window applied to the autocovariance before the Fourier sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    #[default]
    None,
    /// `w_r = (1 + cos(pi r / (r_max + 1))) / 2`.
    Hann,
}

impl Taper {
    fn weight(self, r: usize, r_max: usize) -> f64 {
        match self {
            Taper::None => 1.0,
            Taper::Hann => 0.5 * (1.0 + (std::f64::consts::PI * r as f64 / (r_max + 1) as f64).cos()),
        }
    }
}

pub const DEFAULT_R_MAX: usize = 500;

/// `K(0) + 2 sum_{r=1}^{r_max} K(r) cos(r k)`.
pub fn structure_factor(acf: &Autocovariance, k_grid: &[f64]) -> Vec<f64> {
    structure_factor_tapered(acf, k_grid, Taper::None)
}

pub fn structure_factor_tapered(acf: &Autocovariance, k_grid: &[f64], taper: Taper) -> Vec<f64> {
    let r_max = acf.r_max();
    let weighted: Vec<f64> = acf
        .values
        .iter()
        .enumerate()
        .map(|(r, k)| k * taper.weight(r, r_max))
        .collect();
    k_grid
        .par_iter()
        .map(|&k| {
            weighted[0]
                + 2.0
                    * weighted[1..]
                        .iter()
                        .enumerate()
                        .map(|(i, kr)| kr * ((i + 1) as f64 * k).cos())
                        .sum::<f64>()
        })
        .collect()
}

/// `k_i = pi i / n` for `i = 1..=n`; the smallest wavenumber is `pi / n`.
pub fn k_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| std::f64::consts::PI * i as f64 / n as f64).collect()
}

/// `k,khat` rows.
pub fn khat_csv(k: &[f64], khat: &[f64]) -> Csv {
    let mut csv = Csv::new(&["k", "khat"]);
    for (a, b) in k.iter().zip(khat) {
        csv.row(&[(*a).into(), (*b).into()]);
    }
    csv
}

/// Variance of the number of 1-symbols over all windows of each length in `widths`.
pub fn window_count_variance(chi: &BlockSequence, widths: &[usize]) -> Result<Vec<f64>> {
    let m = chi.len();
    if let Some(&w) = widths.iter().find(|&&w| w == 0 || w > m) {
        return Err(Error::Domain(format!("window length {w} outside 1..={m}")));
    }
    let mut prefix = Vec::with_capacity(m + 1);
    prefix.push(0u64);
    for &s in chi.symbols() {
        prefix.push(prefix.last().unwrap() + (s == 1) as u64);
    }
    Ok(widths
        .iter()
        .map(|&w| {
            let count = m - w + 1;
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for j in 0..count {
                let c = (prefix[j + w] - prefix[j]) as f64;
                sum += c;
                sum_sq += c * c;
            }
            let mean = sum / count as f64;
            (sum_sq / count as f64 - mean * mean).max(0.0)
        })
        .collect())
}

/// Least-squares slope of `log var` against `log width`; 1 for uncorrelated sequences,
/// below 1 when fluctuations grow sublinearly.
pub fn variance_growth_exponent(widths: &[usize], variances: &[f64]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = widths
        .iter()
        .zip(variances)
        .filter(|(_, v)| **v > 0.0)
        .map(|(w, v)| ((*w as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Domain("need two windows with positive variance".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: Vec<u8>) -> BlockSequence {
        BlockSequence::new(s).unwrap()
    }

    #[test]
    fn ecdf_steps() {
        let f = ecdf(&[2.0, 0.0]).unwrap();
        assert_eq!(f.support(), &[0.0, 2.0]);
        assert_eq!(f.masses(), &[0.5, 0.5]);
        assert_eq!(f.eval(-1.0), 0.0);
        assert_eq!(f.eval(0.0), 0.5);
        assert_eq!(f.eval(1.0), 0.5);
        assert_eq!(f.eval(2.0), 1.0);
        let dup = ecdf(&[1.0, 1.0, 3.0, 1.0]).unwrap();
        assert_eq!(dup.support(), &[1.0, 3.0]);
        assert_eq!(dup.masses(), &[0.75, 0.25]);
        assert!(matches!(ecdf(&[]), Err(Error::EmptySpectrum)));
    }

    #[test]
    fn wasserstein_examples() {
        let u = ecdf(&[0.0, 1.0]).unwrap();
        let v = ecdf(&[0.0, 2.0]).unwrap();
        assert_eq!(wasserstein(&u, &u).unwrap(), 0.0);
        assert!((wasserstein(&u, &v).unwrap() - 0.5).abs() < 1e-15);
        let w = ecdf(&[0.75, 1.75]).unwrap();
        assert!((wasserstein(&u, &w).unwrap() - 0.75).abs() < 1e-15);
        let half = StepCDF::with_mass(&[0.0], 0.5).unwrap();
        assert!(matches!(wasserstein(&u, &half), Err(Error::MassMismatch { .. })));
    }

    #[test]
    fn window_distance() {
        assert_eq!(window_wasserstein(&[], &[], 2.0, 3.0).unwrap(), 0.0);
        assert_eq!(window_wasserstein(&[1.0, 2.5], &[2.5, 4.0], 2.0, 3.0).unwrap(), 0.0);
        // One missing eigenvalue at 2.5 out of two: height gap 1/2 over [2.5, 3].
        let d = window_wasserstein(&[2.2, 2.5], &[2.2], 2.0, 3.0).unwrap();
        assert!((d - 0.25).abs() < 1e-15);
        let d = window_wasserstein(&[], &[2.5], 2.0, 3.0).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kde_peak_and_symmetry() {
        let k = GaussianKde::new(&[0.3], Bandwidth::Fixed(1.0)).unwrap();
        assert!((k.evaluate(0.3) - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
        let k = GaussianKde::new(&[-1.0, 0.0, 0.5, -0.5, 1.0], Bandwidth::Auto).unwrap();
        for x in [0.1, 0.7, 1.3, 2.9] {
            assert!((k.evaluate(x) - k.evaluate(-x)).abs() < 1e-12);
        }
        let grid = k.default_grid(4001, 8.0);
        let est = kde(&[-1.0, 0.0, 0.5, -0.5, 1.0], Bandwidth::Auto, &grid).unwrap();
        assert!((est.integral() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn silverman_fallback() {
        assert_eq!(silverman_bandwidth(&[1.0, 1.0, 1.0]), FALLBACK_BANDWIDTH);
        assert_eq!(silverman_bandwidth(&[4.0]), FALLBACK_BANDWIDTH);
        // IQR of 0..=4 is 2, sigma is sqrt(2.5); IQR/1.34 is the smaller.
        let h = silverman_bandwidth(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!((h - 0.9 * (2.0 / 1.34) * 5f64.powf(-0.2)).abs() < 1e-15);
    }

    #[test]
    fn autocovariance_alternating() {
        let chi = seq((0..1000).map(|i| 1 + (i % 2) as u8).collect());
        let acf = autocovariance(&chi, 10).unwrap();
        for (r, k) in acf.values.iter().enumerate() {
            let want = if r % 2 == 0 { 0.25 } else { -0.25 };
            assert!((k - want).abs() < 2e-3, "r={r} K={k}");
        }
        let ones = seq(vec![1; 100]);
        let acf = autocovariance(&ones, 10).unwrap();
        assert_eq!(acf.p, vec![1.0, 0.0]);
        assert!(acf.values.iter().all(|&k| k == 0.0));
        assert!(autocovariance(&ones, 50).is_err());
    }

    #[test]
    fn structure_factor_of_zero_is_zero() {
        let acf = Autocovariance {
            values: vec![0.0; 6],
            p: vec![0.5, 0.5],
        };
        assert!(structure_factor(&acf, &k_grid(8)).iter().all(|&v| v == 0.0));
        let acf = Autocovariance {
            values: vec![0.25, 0.0, 0.0],
            p: vec![0.5, 0.5],
        };
        assert!(structure_factor(&acf, &k_grid(8)).iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn window_variance_of_alternation_is_bounded() {
        let chi = seq((0..2000).map(|i| 1 + (i % 2) as u8).collect());
        let v = window_count_variance(&chi, &[1, 2, 3, 10, 11]).unwrap();
        assert!((v[0] - 0.25).abs() < 1e-3);
        assert!(v[1] < 1e-12 && v[3] < 1e-12);
        assert!((v[2] - 0.25).abs() < 1e-3 && (v[4] - 0.25).abs() < 1e-3);
    }
}
