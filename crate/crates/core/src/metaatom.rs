//! Meta-atoms and the linear-time estimate of the spectrum inside a hybridisation
//! region.
//!
//! A meta-atom is a short word over `{1, 2}` starting and ending with the dimer symbol
//! 2. Padded with `R` single blocks on both sides, its eigenvalues inside the window
//! approximate the defect modes it contributes to any chain containing it. A table of
//! these modes over all meta-atoms of length at most `L` with at most `P` singles is
//! built once, and a chain's window spectrum is estimated by greedy longest-match
//! decomposition.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::capacitance::symmetrized_capacitance;
use crate::eigen::{eigenvalues_in_interval, EigOptions};
use crate::error::{Error, Result};
use crate::geometry::{assemble, BlockSequence, BlockSet};
use crate::propagation::{hybridisation_intervals, DEFAULT_GRID_POINTS};

const SINGLE: u8 = 1;
const DIMER: u8 = 2;

/// Word over `{1, 2}` that starts and ends with 2.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetaAtom {
    symbols: Vec<u8>,
}

impl MetaAtom {
    pub fn new(symbols: Vec<u8>) -> Result<Self> {
        if symbols.first() != Some(&DIMER) || symbols.last() != Some(&DIMER) {
            return Err(Error::Domain(format!(
                "meta-atom {symbols:?} must start and end with symbol 2"
            )));
        }
        if symbols.iter().any(|&s| s != SINGLE && s != DIMER) {
            return Err(Error::Domain(format!("meta-atom {symbols:?} uses symbols besides 1 and 2")));
        }
        Ok(MetaAtom { symbols })
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn singles(&self) -> usize {
        self.symbols.iter().filter(|&&s| s == SINGLE).count()
    }

    pub fn dimers(&self) -> usize {
        self.len() - self.singles()
    }

    /// `(1)^R zeta (1)^R`.
    pub fn padded(&self, r: usize) -> BlockSequence {
        let mut s = vec![SINGLE; r];
        s.extend_from_slice(&self.symbols);
        s.extend(std::iter::repeat_n(SINGLE, r));
        BlockSequence::new(s).expect("padded meta-atom symbols are valid")
    }
}

/// All meta-atoms of length at most `l` with at most `p` singles, ordered by length and
/// then lexicographically.
pub fn enumerate_meta_atoms(l: usize, p: usize) -> Result<Vec<MetaAtom>> {
    if l == 0 {
        return Err(Error::Domain("meta-atom length bound must be at least 1".into()));
    }
    if l > MAX_ENUMERATION_LENGTH {
        return Err(Error::Domain(format!(
            "meta-atom length bound {l} exceeds {MAX_ENUMERATION_LENGTH}"
        )));
    }
    let mut out = vec![MetaAtom { symbols: vec![DIMER] }];
    for len in 2..=l {
        let inner = len - 2;
        for mask in 0u64..(1u64 << inner) {
            // Set bits mark singles.
            if mask.count_ones() as usize > p {
                continue;
            }
            let mut symbols = Vec::with_capacity(len);
            symbols.push(DIMER);
            symbols.extend((0..inner).map(|bit| if mask >> bit & 1 == 1 { SINGLE } else { DIMER }));
            symbols.push(DIMER);
            out.push(MetaAtom { symbols });
        }
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.symbols.cmp(&b.symbols)));
    Ok(out)
}

/// Longest length bound accepted by [`enumerate_meta_atoms`].
pub const MAX_ENUMERATION_LENGTH: usize = 40;

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `sum_{p=0}^{P+1} C(L-1, p)`.
pub fn meta_atom_count(l: u64, p: u64) -> u128 {
    assert!(l >= 1, "meta-atom length bound must be at least 1");
    (0..=p + 1).map(|q| binomial(l - 1, q)).sum()
}

/// `1 + sum_{p=0}^{P} sum_{l=p}^{L-2} C(l, p)`, the per-length form of [`meta_atom_count`].
pub fn meta_atom_count_by_length(l: u64, p: u64) -> u128 {
    assert!(l >= 1, "meta-atom length bound must be at least 1");
    let mut total = 1u128;
    for q in 0..=p {
        if l >= 2 {
            for n in q..=l - 2 {
                total += binomial(n, q);
            }
        }
    }
    total
}

/// Open frequency interval `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::Domain(format!("invalid window ({lo}, {hi})")));
        }
        Ok(Window { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }
}

/// Window used for the standard blocks.
pub const STANDARD_WINDOW: Window = Window { lo: 2.0, hi: 3.0 };

/// Upper bound on every eigenvalue of a chain built from `blocks`.
pub fn spectral_bound(blocks: &BlockSet) -> f64 {
    let mut stiffness = 0.0f64;
    let mut min_spacing = f64::INFINITY;
    for b in blocks.blocks() {
        for (l, s, v) in b.resonators() {
            stiffness = stiffness.max(v * v / l);
            min_spacing = min_spacing.min(s);
        }
    }
    4.0 * stiffness / min_spacing
}

/// Highest hybridisation interval of a two-block set.
pub fn hybridisation_window(blocks: &BlockSet) -> Result<Window> {
    let h = hybridisation_intervals(blocks, spectral_bound(blocks), DEFAULT_GRID_POINTS)?;
    let &(lo, hi) = h
        .intervals()
        .last()
        .ok_or_else(|| Error::Domain("block set has no hybridisation region".into()))?;
    Window::new(lo, hi)
}

/// Eigenvalues of the chain `(1)^R zeta (1)^R` inside `window`.
pub fn defect_modes(zeta: &MetaAtom, r: usize, blocks: &BlockSet, window: Window) -> Result<Vec<f64>> {
    let array = assemble(blocks, &zeta.padded(r))?;
    window_spectrum_of(&array, window)
}

/// Eigenvalues of an assembled chain strictly inside `window`, by bisection.
pub fn window_spectrum_of(array: &crate::geometry::ResonatorArray, window: Window) -> Result<Vec<f64>> {
    let m = symmetrized_capacitance(array);
    let found = eigenvalues_in_interval(&m, window.lo, window.hi, &EigOptions::default())?;
    Ok(found.values().iter().copied().filter(|&x| window.contains(x)).collect())
}

/// Defect modes of every meta-atom in `M_L^P`.
#[derive(Debug, Clone)]
pub struct DefectModeTable {
    modes: HashMap<Vec<u8>, Vec<f64>>,
    atoms: Vec<MetaAtom>,
    max_len: usize,
    max_singles: usize,
    padding: usize,
    window: Window,
}

impl DefectModeTable {
    pub fn get(&self, symbols: &[u8]) -> Option<&[f64]> {
        self.modes.get(symbols).map(Vec::as_slice)
    }

    /// Meta-atoms in enumeration order.
    pub fn atoms(&self) -> &[MetaAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn max_singles(&self) -> usize {
        self.max_singles
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// Total number of stored frequencies.
    pub fn frequency_count(&self) -> usize {
        self.modes.values().map(Vec::len).sum()
    }
}

pub fn build_table(l: usize, p: usize, r: usize, blocks: &BlockSet, window: Window) -> Result<DefectModeTable> {
    if blocks.len() < 2 {
        return Err(Error::Domain("meta-atoms need a block set with symbols 1 and 2".into()));
    }
    let atoms = enumerate_meta_atoms(l, p)?;
    let modes = atoms
        .par_iter()
        .map(|a| Ok((a.symbols.clone(), defect_modes(a, r, blocks, window)?)))
        .collect::<Result<HashMap<_, _>>>()?;
    Ok(DefectModeTable {
        modes,
        atoms,
        max_len: l,
        max_singles: p,
        padding: r,
        window,
    })
}

/// Piece of the greedy decomposition: a matched meta-atom or a skipped single.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
    pub matched: bool,
}

/// Estimated window spectrum (sorted, with multiplicity) and the decomposition used.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedSpectrum {
    pub values: Vec<f64>,
    pub segments: Vec<Segment>,
}

/// Length of the longest meta-atom in the table that starts at `j`, if any.
///
/// Scans at most `L` symbols and stops once the single count exceeds `P`. Only
/// meta-atoms lying fully inside the sequence are considered.
fn longest_match(chi: &[u8], j: usize, l: usize, p: usize) -> Option<usize> {
    if chi[j] != DIMER {
        return None;
    }
    let end = (j + l).min(chi.len());
    let mut singles = 0;
    let mut best = 1;
    for (k, &s) in chi[j..end].iter().enumerate() {
        match s {
            DIMER => best = k + 1,
            SINGLE => {
                singles += 1;
                if singles > p {
                    break;
                }
            }
            _ => break,
        }
    }
    Some(best)
}

/// Greedy longest-match estimate of the window spectrum of `chi`.
pub fn estimate_upper_spectrum(chi: &BlockSequence, table: &DefectModeTable) -> Result<EstimatedSpectrum> {
    let s = chi.symbols();
    if let Some(pos) = s.iter().position(|&x| x != SINGLE && x != DIMER) {
        return Err(Error::InvalidSequence {
            symbol: s[pos],
            position: pos,
            max: 2,
        });
    }
    let mut values = Vec::new();
    let mut segments = Vec::new();
    let mut j = 0;
    while j < s.len() {
        match longest_match(s, j, table.max_len, table.max_singles) {
            Some(len) => {
                let modes = table
                    .get(&s[j..j + len])
                    .expect("every dimer-bounded word within the bounds is tabulated");
                values.extend_from_slice(modes);
                segments.push(Segment { start: j, len, matched: true });
                j += len;
            }
            None => {
                segments.push(Segment { start: j, len: 1, matched: false });
                j += 1;
            }
        }
    }
    values.sort_by(f64::total_cmp);
    Ok(EstimatedSpectrum { values, segments })
}

/// Direct window spectrum of the chain assembled from `chi`.
pub fn direct_window_spectrum(chi: &BlockSequence, blocks: &BlockSet, window: Window) -> Result<Vec<f64>> {
    window_spectrum_of(&assemble(blocks, chi)?, window)
}
