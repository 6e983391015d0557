//! Material matrix `V`, capacitance matrix `C`, the symmetrised form
//! `V^{1/2} C V^{1/2}` and its quasiperiodic counterpart.
//!
//! Indexing: resonators are `0..N`, `spacings[i]` separates resonators `i` and `i + 1`
//! (0-based). In the 1-based notation of the Jacobi coefficients, the coupling into
//! row `i` uses `s_{i-1}`, i.e. `spacings[i - 1]` here, and the diagonal uses
//! `s_{i-1}` and `s_i`.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::geometry::ResonatorArray;

/// Real symmetric tridiagonal matrix. `offdiag[i]` is the entry at `(i, i+1)` and `(i+1, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Domain("matrix must have at least one row".into()));
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(Error::Domain(format!(
                "{} off-diagonal entries for {} rows",
                offdiag.len(),
                diag.len()
            )));
        }
        if diag.iter().chain(&offdiag).any(|x| !x.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        Ok(SymTridiagonal { diag, offdiag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }

    /// Sum of row `i`.
    pub fn row_sum(&self, i: usize) -> f64 {
        let mut s = self.diag[i];
        if i > 0 {
            s += self.offdiag[i - 1];
        }
        if i + 1 < self.dim() {
            s += self.offdiag[i];
        }
        s
    }

    /// Upper bound on the spectral radius (maximum absolute row sum).
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim())
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.offdiag[i - 1].abs();
                }
                if i + 1 < self.dim() {
                    s += self.offdiag[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// Non-zero pattern as `(row, col, value)` triplets, row-major.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let n = self.dim();
        let mut out = Vec::with_capacity(3 * n);
        for i in 0..n {
            if i > 0 {
                out.push((i, i - 1, self.offdiag[i - 1]));
            }
            out.push((i, i, self.diag[i]));
            if i + 1 < n {
                out.push((i, i + 1, self.offdiag[i]));
            }
        }
        out
    }

    /// `row,col,value` text with a header line.
    pub fn to_triplet_csv(&self) -> String {
        let mut s = String::from("row,col,value\n");
        for (r, c, v) in self.triplets() {
            let _ = writeln!(s, "{r},{c},{}", fmt_f64(v));
        }
        s
    }

    /// Rebuilds a matrix from triplets. Entries outside the tridiagonal band are
    /// rejected; the two copies of an off-diagonal entry must agree.
    pub fn from_triplets(triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let n = triplets
            .iter()
            .map(|&(r, c, _)| r.max(c) + 1)
            .max()
            .ok_or_else(|| Error::Parse("no entries".into()))?;
        if n > MAX_TRIPLET_DIM {
            return Err(Error::Parse(format!("dimension {n} too large")));
        }
        let mut diag = vec![0.0; n];
        let mut upper = vec![None; n.saturating_sub(1)];
        let mut lower = vec![None; n.saturating_sub(1)];
        for &(r, c, v) in triplets {
            match (r as i64 - c as i64, r.min(c)) {
                (0, i) => diag[i] = v,
                (-1, i) => upper[i] = Some(v),
                (1, i) => lower[i] = Some(v),
                _ => {
                    return Err(Error::Parse(format!(
                        "entry ({r},{c}) lies outside the tridiagonal band"
                    )))
                }
            }
        }
        let offdiag = upper
            .into_iter()
            .zip(lower)
            .enumerate()
            .map(|(i, pair)| match pair {
                (Some(a), Some(b)) if a == b => Ok(a),
                (Some(a), None) | (None, Some(a)) => Ok(a),
                (None, None) => Ok(0.0),
                _ => Err(Error::Parse(format!("entries ({i},{}) are not symmetric", i + 1))),
            })
            .collect::<Result<Vec<_>>>()?;
        SymTridiagonal::new(diag, offdiag)
    }
}

/// Largest dimension accepted by [`SymTridiagonal::from_triplets`].
pub const MAX_TRIPLET_DIM: usize = 1 << 24;

/// Parses `row,col,value` lines; a header line and blank lines are skipped.
pub fn parse_triplets(text: &str) -> Result<Vec<(usize, usize, f64)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("row")) {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let (Some(r), Some(c), Some(v), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(Error::Parse(format!("line {}: expected row,col,value", lineno + 1)));
        };
        let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", lineno + 1));
        let r = r.parse::<usize>().map_err(|_| bad("row"))?;
        let c = c.parse::<usize>().map_err(|_| bad("col"))?;
        let v = v.parse::<f64>().map_err(|_| bad("value"))?;
        if !v.is_finite() {
            return Err(bad("value"));
        }
        out.push((r, c, v));
    }
    Ok(out)
}

/// Self-adjoint tridiagonal matrix with periodic corners: `corner` sits at
/// `(0, N-1)` and its conjugate at `(N-1, 0)`.
///
/// Corner contributions are added to whatever already occupies those positions, so
/// for `N = 2` they combine with the off-diagonal and for `N = 1` the dense form is
/// `diag[0] + 2 Re(corner)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianPeriodicTridiagonal {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
    corner: Complex64,
}

impl HermitianPeriodicTridiagonal {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>, corner: Complex64) -> Result<Self> {
        let base = SymTridiagonal::new(diag, offdiag)?;
        if !(corner.re.is_finite() && corner.im.is_finite()) {
            return Err(Error::Domain("corner must be finite".into()));
        }
        Ok(HermitianPeriodicTridiagonal {
            diag: base.diag,
            offdiag: base.offdiag,
            corner,
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn corner(&self) -> Complex64 {
        self.corner
    }

    /// Same matrix with the corner conjugated.
    pub fn conjugate(&self) -> Self {
        HermitianPeriodicTridiagonal {
            corner: self.corner.conj(),
            ..self.clone()
        }
    }

    /// The tridiagonal part with the corner dropped.
    pub fn without_corner(&self) -> SymTridiagonal {
        SymTridiagonal {
            diag: self.diag.clone(),
            offdiag: self.offdiag.clone(),
        }
    }

    /// Row-major dense form.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let n = self.dim();
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            a[i * n + i] = self.diag[i].into();
        }
        for (i, &e) in self.offdiag.iter().enumerate() {
            a[i * n + i + 1] += e;
            a[(i + 1) * n + i] += e;
        }
        a[n - 1] += self.corner;
        a[(n - 1) * n] += self.corner.conj();
        a
    }

    /// `row,col,re,im` text of the non-zero entries.
    pub fn to_triplet_csv(&self) -> String {
        let n = self.dim();
        let dense = self.to_dense();
        let mut s = String::from("row,col,re,im\n");
        for r in 0..n {
            for c in 0..n {
                let z = dense[r * n + c];
                if z != Complex64::new(0.0, 0.0) {
                    let _ = writeln!(s, "{r},{c},{},{}", fmt_f64(z.re), fmt_f64(z.im));
                }
            }
        }
        s
    }
}

/// Sorted eigenvalues.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    /// Sorts `values` ascending (NaNs are rejected).
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Domain("spectrum contains NaN".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Spectrum { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Eigenvalues strictly inside `(lo, hi)`.
    pub fn in_open_interval(&self, lo: f64, hi: f64) -> &[f64] {
        let start = self.values.partition_point(|&v| v <= lo);
        let end = self.values.partition_point(|&v| v < hi);
        &self.values[start..end.max(start)]
    }

    /// Eigenvalues in the closed interval `[lo, hi]`.
    pub fn in_closed_interval(&self, lo: f64, hi: f64) -> &[f64] {
        let start = self.values.partition_point(|&v| v < lo);
        let end = self.values.partition_point(|&v| v <= hi);
        &self.values[start..end.max(start)]
    }
}

/// Tridiagonal capacitance matrix with zero row sums. A single resonator gives `[0]`.
pub fn capacitance_matrix(array: &ResonatorArray) -> SymTridiagonal {
    let n = array.len();
    let s = array.spacings();
    let mut diag = vec![0.0; n];
    let mut offdiag = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n.saturating_sub(1) {
        let c = 1.0 / s[i];
        diag[i] += c;
        diag[i + 1] += c;
        offdiag.push(-c);
    }
    SymTridiagonal { diag, offdiag }
}

/// Diagonal of `V`: `v_i^2 / l_i`.
pub fn material_matrix(array: &ResonatorArray) -> Vec<f64> {
    array
        .speeds()
        .iter()
        .zip(array.lengths())
        .map(|(v, l)| v * v / l)
        .collect()
}

/// `V^{1/2} C V^{1/2}`, similar to `VC`.
///
/// Interior rows reproduce the Jacobi coefficients: diagonal
/// `(v_i^2/l_i)(1/s_{i-1} + 1/s_i)` and coupling `v_{i-1} v_i / (s_{i-1} sqrt(l_{i-1} l_i))`
/// (stored negated). The first and last rows keep the free-end structure of `C`.
pub fn symmetrized_capacitance(array: &ResonatorArray) -> SymTridiagonal {
    let c = capacitance_matrix(array);
    let v = material_matrix(array);
    let diag = c.diag.iter().zip(&v).map(|(d, vi)| d * vi).collect();
    let offdiag = c
        .offdiag
        .iter()
        .enumerate()
        .map(|(i, e)| e * (v[i] * v[i + 1]).sqrt())
        .collect();
    SymTridiagonal { diag, offdiag }
}

/// Quasiperiodic capacitance matrix in symmetrised form, plus the quasimomentum
/// actually used.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiperiodicCapacitance {
    pub matrix: HermitianPeriodicTridiagonal,
    pub alpha: f64,
    /// Set when the requested quasimomentum lay outside `[-pi/L, pi/L]` and was wrapped.
    pub wrapped: bool,
}

/// Maps `alpha` into the Brillouin zone `[-pi/L, pi/L]`.
pub fn wrap_quasimomentum(alpha: f64, cell_length: f64) -> (f64, bool) {
    let half = std::f64::consts::PI / cell_length;
    let slack = 1e-12 * half.max(1.0);
    if alpha.abs() <= half + slack {
        return (alpha, false);
    }
    let period = 2.0 * half;
    let wrapped = alpha - period * (alpha / period).round();
    (wrapped, true)
}

/// `V^{1/2} C^alpha V^{1/2}` for the array periodised with its trailing spacing.
///
/// The first and last diagonal entries gain `1/s_N`; the corner `(0, N-1)` of `C^alpha`
/// is `-exp(-i alpha L) / s_N`.
pub fn quasiperiodic_capacitance(array: &ResonatorArray, alpha: f64) -> QuasiperiodicCapacitance {
    let cell = array.total_length();
    let (alpha, wrapped) = wrap_quasimomentum(alpha, cell);
    if wrapped {
        log::warn!("quasimomentum wrapped into the Brillouin zone: {alpha}");
    }
    let n = array.len();
    let v = material_matrix(array);
    let c = capacitance_matrix(array);
    let sn = array.trailing_spacing();
    let mut diag = c.diag.clone();
    diag[0] += 1.0 / sn;
    diag[n - 1] += 1.0 / sn;
    let diag = diag.iter().zip(&v).map(|(d, vi)| d * vi).collect();
    let offdiag = c
        .offdiag
        .iter()
        .enumerate()
        .map(|(i, e)| e * (v[i] * v[i + 1]).sqrt())
        .collect();
    let phase = Complex64::from_polar(1.0, -alpha * cell);
    let corner = -phase / sn * (v[0] * v[n - 1]).sqrt();
    QuasiperiodicCapacitance {
        matrix: HermitianPeriodicTridiagonal {
            diag,
            offdiag,
            corner,
        },
        alpha,
        wrapped,
    }
}

/// Leading-order resonant frequency `sqrt(delta * lambda)`.
pub fn convert_frequency(lambda: f64, delta: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("eigenvalue {lambda} must be non-negative")));
    }
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("contrast {delta} must be positive")));
    }
    Ok((delta * lambda).sqrt())
}
