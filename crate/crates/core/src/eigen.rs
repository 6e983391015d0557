//! Eigenvalue solvers.
//!
//! Two independent routes:
//! * [`eig_sym_tridiag`]: implicit-shift QL iteration on a real symmetric
//!   tridiagonal matrix, `O(N^2)` without eigenvectors.
//! * [`eig_hermitian_dense`]: Householder reduction of a dense self-adjoint matrix to
//!   real tridiagonal form followed by Sturm-sequence bisection.
//!
//! The bisection stage is also exposed on its own ([`eig_sym_tridiag_bisection`]) and
//! parallelises over eigenvalue indices; its output does not depend on the thread count.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::capacitance::{HermitianPeriodicTridiagonal, Spectrum, SymTridiagonal};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigOptions {
    /// Absolute accuracy, relative to the matrix norm, requested from bisection.
    pub abs_tol: f64,
    /// Total QL iteration budget; defaults to `100 N`.
    pub max_iterations: Option<usize>,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions {
            abs_tol: 1e-12,
            max_iterations: None,
        }
    }
}

impl EigOptions {
    fn budget(&self, n: usize) -> usize {
        self.max_iterations.unwrap_or(100 * n.max(1))
    }

    fn check(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::Domain("abs_tol must be positive".into()));
        }
        Ok(())
    }
}

/// All eigenvalues of a symmetric tridiagonal matrix, ascending, by implicit QL.
pub fn eig_sym_tridiag(m: &SymTridiagonal, opts: &EigOptions) -> Result<Spectrum> {
    opts.check()?;
    let mut d = m.diag().to_vec();
    let mut e = m.offdiag().to_vec();
    e.push(0.0);
    let budget = opts.budget(d.len());
    ql_implicit(&mut d, &mut e, budget)?;
    Spectrum::new(d)
}

/// Eigenvalues only; `e[i]` couples rows `i` and `i + 1`, `e[n-1]` is scratch.
fn ql_implicit(d: &mut [f64], e: &mut [f64], budget: usize) -> Result<()> {
    let n = d.len();
    let mut iterations = 0usize;
    for l in 0..n {
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > budget {
                return Err(Error::NoConvergence {
                    iterations,
                    partial: d.to_vec(),
                });
            }
            // Wilkinson-type shift from the leading 2x2 block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Number of eigenvalues strictly below `x` (Sturm count of negative pivots).
pub fn count_below(diag: &[f64], offdiag_sq: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q.abs() < pivmin {
        q = -pivmin;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        q = diag[i] - x - offdiag_sq[i - 1] / q;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Sturm-sequence bisection workspace for one real symmetric tridiagonal matrix.
pub struct SturmBisection {
    diag: Vec<f64>,
    offdiag_sq: Vec<f64>,
    lower: f64,
    upper: f64,
    pivmin: f64,
    tol: f64,
}

impl SturmBisection {
    pub fn new(diag: &[f64], offdiag: &[f64], abs_tol: f64) -> Self {
        let n = diag.len();
        let mut lower = f64::INFINITY;
        let mut upper = f64::NEG_INFINITY;
        let mut norm = 0.0f64;
        for i in 0..n {
            let mut radius = 0.0;
            if i > 0 {
                radius += offdiag[i - 1].abs();
            }
            if i + 1 < n {
                radius += offdiag[i].abs();
            }
            lower = lower.min(diag[i] - radius);
            upper = upper.max(diag[i] + radius);
            norm = norm.max(diag[i].abs() + radius);
        }
        let offdiag_sq: Vec<f64> = offdiag.iter().map(|e| e * e).collect();
        let max_sq = offdiag_sq.iter().copied().fold(1.0, f64::max);
        let tol = abs_tol * norm.max(f64::MIN_POSITIVE);
        let pad = 2.0 * f64::EPSILON * norm + tol;
        SturmBisection {
            diag: diag.to_vec(),
            offdiag_sq,
            lower: lower - pad,
            upper: upper + pad,
            pivmin: f64::MIN_POSITIVE * max_sq,
            tol,
        }
    }

    pub fn count_below(&self, x: f64) -> usize {
        count_below(&self.diag, &self.offdiag_sq, x, self.pivmin)
    }

    /// The `k`-th smallest eigenvalue (0-based).
    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.refine(k, self.lower, self.upper)
    }

    fn converged(&self, lo: f64, hi: f64) -> bool {
        let mid = 0.5 * (lo + hi);
        hi - lo <= self.tol + 2.0 * f64::EPSILON * mid.abs() || mid == lo || mid == hi
    }

    fn refine(&self, k: usize, lo: f64, hi: f64) -> f64 {
        self.refine_lanes(&[k], lo, hi)[0]
    }

    /// Sturm counts at `LANES` shifts in one pass over the matrix. The recurrences are
    /// independent, so their divisions overlap instead of forming one serial chain.
    fn count_below_lanes(&self, x: &[f64; LANES]) -> [usize; LANES] {
        let pivmin = self.pivmin;
        let mut count = [0usize; LANES];
        let mut q = [0.0f64; LANES];
        for l in 0..LANES {
            let mut v = self.diag[0] - x[l];
            if v.abs() < pivmin {
                v = -pivmin;
            }
            count[l] += (v < 0.0) as usize;
            q[l] = v;
        }
        for (d, e2) in self.diag[1..].iter().zip(&self.offdiag_sq) {
            for l in 0..LANES {
                let mut v = d - x[l] - e2 / q[l];
                if v.abs() < pivmin {
                    v = -pivmin;
                }
                count[l] += (v < 0.0) as usize;
                q[l] = v;
            }
        }
        count
    }

    /// Bisects up to `LANES` eigenvalues `ks` simultaneously from the bracket `[lo, hi]`.
    /// Each lane follows exactly the steps it would take alone.
    fn refine_lanes(&self, ks: &[usize], lo: f64, hi: f64) -> Vec<f64> {
        debug_assert!(!ks.is_empty() && ks.len() <= LANES);
        let mut los = [lo; LANES];
        let mut his = [hi; LANES];
        let mut done = [true; LANES];
        for l in 0..ks.len() {
            done[l] = self.converged(lo, hi);
        }
        // Bounded loop: each step halves the bracket; 200 halvings exceed any f64 range.
        for _ in 0..200 {
            if done.iter().all(|&d| d) {
                break;
            }
            let mut mids = [0.0; LANES];
            for l in 0..LANES {
                mids[l] = 0.5 * (los[l] + his[l]);
            }
            let counts = self.count_below_lanes(&mids);
            for l in 0..ks.len() {
                if done[l] {
                    continue;
                }
                if counts[l] > ks[l] {
                    his[l] = mids[l];
                } else {
                    los[l] = mids[l];
                }
                done[l] = self.converged(los[l], his[l]);
            }
        }
        (0..ks.len()).map(|l| 0.5 * (los[l] + his[l])).collect()
    }

    fn refine_all(&self, ks: std::ops::Range<usize>, lo: f64, hi: f64) -> Vec<f64> {
        let ks: Vec<usize> = ks.collect();
        ks.par_chunks(LANES)
            .flat_map_iter(|group| self.refine_lanes(group, lo, hi))
            .collect()
    }

    /// All eigenvalues, ascending.
    pub fn all(&self) -> Vec<f64> {
        self.refine_all(0..self.diag.len(), self.lower, self.upper)
    }

    /// Eigenvalues in the half-open interval `[lo, hi)`.
    pub fn in_interval(&self, lo: f64, hi: f64) -> Vec<f64> {
        let first = self.count_below(lo);
        let last = self.count_below(hi);
        let (a, b) = (lo.max(self.lower), hi.min(self.upper));
        self.refine_all(first..last, a, b)
    }
}

const LANES: usize = 16;

/// All eigenvalues of a symmetric tridiagonal matrix by Sturm bisection.
pub fn eig_sym_tridiag_bisection(m: &SymTridiagonal, opts: &EigOptions) -> Result<Spectrum> {
    opts.check()?;
    Spectrum::new(SturmBisection::new(m.diag(), m.offdiag(), opts.abs_tol).all())
}

/// Eigenvalues of a symmetric tridiagonal matrix inside `[lo, hi)`, by bisection.
pub fn eigenvalues_in_interval(
    m: &SymTridiagonal,
    lo: f64,
    hi: f64,
    opts: &EigOptions,
) -> Result<Spectrum> {
    opts.check()?;
    Spectrum::new(SturmBisection::new(m.diag(), m.offdiag(), opts.abs_tol).in_interval(lo, hi))
}

/// Householder reduction of a row-major dense Hermitian matrix to a real symmetric
/// tridiagonal matrix with the same spectrum. Returns `(diag, offdiag)`.
pub fn hermitian_to_tridiagonal(mut a: Vec<Complex64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    let zero = Complex64::new(0.0, 0.0);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];
    for k in 0..n.saturating_sub(2) {
        let start = k + 1;
        let len = n - start;
        let x0 = a[start * n + k];
        let tail: f64 = (start + 1..n).map(|i| a[i * n + k].norm_sqr()).sum();
        if tail == 0.0 {
            off.push(x0.norm());
            continue;
        }
        let sigma = (x0.norm_sqr() + tail).sqrt();
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
        let alpha = -phase * sigma;
        for i in 0..len {
            v[i] = a[(start + i) * n + k];
        }
        v[0] -= alpha;
        let vnorm = v[..len].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut v[..len] {
            *z /= vnorm;
        }
        // p = B v over the trailing block, K = v^H p (real), w = p - K v.
        for i in 0..len {
            let row = &a[(start + i) * n + start..(start + i) * n + n];
            p[i] = row.iter().zip(&v[..len]).map(|(b, vj)| b * vj).sum();
        }
        let kappa: f64 = v[..len]
            .iter()
            .zip(&p[..len])
            .map(|(vi, pi)| (vi.conj() * pi).re)
            .sum();
        for i in 0..len {
            p[i] -= v[i] * kappa;
        }
        for i in 0..len {
            let (vi, wi) = (v[i], p[i]);
            let row = &mut a[(start + i) * n + start..(start + i) * n + n];
            for (j, b) in row.iter_mut().enumerate() {
                *b -= 2.0 * (vi * p[j].conj() + wi * v[j].conj());
            }
        }
        off.push(alpha.norm());
    }
    if n >= 2 {
        off.push(a[(n - 1) * n + n - 2].norm());
    }
    let diag = (0..n).map(|i| a[i * n + i].re).collect();
    (diag, off)
}

/// All eigenvalues of a quasiperiodic (or any periodic-tridiagonal) self-adjoint matrix.
pub fn eig_hermitian_dense(m: &HermitianPeriodicTridiagonal, opts: &EigOptions) -> Result<Spectrum> {
    eig_hermitian_dense_matrix(m.to_dense(), m.dim(), opts)
}

/// All eigenvalues of a row-major dense Hermitian matrix (only the lower triangle's
/// Hermitian completion is assumed; the input must be self-adjoint).
pub fn eig_hermitian_dense_matrix(a: Vec<Complex64>, n: usize, opts: &EigOptions) -> Result<Spectrum> {
    opts.check()?;
    if n == 0 || a.len() != n * n {
        return Err(Error::Domain("dense matrix must be square and non-empty".into()));
    }
    if a.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Domain("matrix entries must be finite".into()));
    }
    let (d, e) = hermitian_to_tridiagonal(a, n);
    Spectrum::new(SturmBisection::new(&d, &e, opts.abs_tol).all())
}
