//! Resonator blocks, block sequences and assembled resonator arrays.
//!
//! A block is a short run of resonators `(v_k, l_k, s_k)`: speed, length and the
//! spacing that follows the resonator. Chains are assembled by concatenating blocks
//! according to a symbol sequence; symbols are 1-based indices into a [`BlockSet`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One building block: equal-length lists of resonator lengths, trailing spacings
/// and wave speeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBlock", into = "RawBlock")]
pub struct Block {
    lengths: Vec<f64>,
    spacings: Vec<f64>,
    speeds: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlock {
    lengths: Vec<f64>,
    spacings: Vec<f64>,
    speeds: Vec<f64>,
}

impl TryFrom<RawBlock> for Block {
    type Error = Error;

    fn try_from(raw: RawBlock) -> Result<Self> {
        Block::new(raw.lengths, raw.spacings, raw.speeds)
    }
}

impl From<Block> for RawBlock {
    fn from(b: Block) -> Self {
        RawBlock {
            lengths: b.lengths,
            spacings: b.spacings,
            speeds: b.speeds,
        }
    }
}

fn check_positive(name: &str, values: &[f64]) -> Result<()> {
    if let Some((i, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v > 0.0))
    {
        return Err(Error::InvalidBlock(format!(
            "{name}[{i}] = {v} must be positive and finite"
        )));
    }
    Ok(())
}

impl Block {
    pub fn new(lengths: Vec<f64>, spacings: Vec<f64>, speeds: Vec<f64>) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::InvalidBlock("a block needs at least one resonator".into()));
        }
        if spacings.len() != lengths.len() || speeds.len() != lengths.len() {
            return Err(Error::InvalidBlock(format!(
                "list lengths differ: {} lengths, {} spacings, {} speeds",
                lengths.len(),
                spacings.len(),
                speeds.len()
            )));
        }
        check_positive("lengths", &lengths)?;
        check_positive("spacings", &spacings)?;
        check_positive("speeds", &speeds)?;
        Ok(Block {
            lengths,
            spacings,
            speeds,
        })
    }

    /// Single resonator block with unit speed.
    pub fn single(length: f64, spacing: f64) -> Result<Self> {
        Block::new(vec![length], vec![spacing], vec![1.0])
    }

    /// Number of resonators in the block.
    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    /// Sum of lengths and spacings.
    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum::<f64>() + self.spacings.iter().sum::<f64>()
    }

    /// Iterator over `(length, spacing, speed)` triples.
    pub fn resonators(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.lengths
            .iter()
            .zip(&self.spacings)
            .zip(&self.speeds)
            .map(|((&l, &s), &v)| (l, s, v))
    }
}

/// Ordered collection of `D >= 1` blocks; symbol `d` selects `blocks[d - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBlockSet", into = "RawBlockSet")]
pub struct BlockSet {
    blocks: Vec<Block>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlockSet {
    blocks: Vec<Block>,
}

impl TryFrom<RawBlockSet> for BlockSet {
    type Error = Error;

    fn try_from(raw: RawBlockSet) -> Result<Self> {
        BlockSet::new(raw.blocks)
    }
}

impl From<BlockSet> for RawBlockSet {
    fn from(set: BlockSet) -> Self {
        RawBlockSet { blocks: set.blocks }
    }
}

/// Largest number of distinct blocks a set may hold (symbols are stored as `u8`).
pub const MAX_BLOCKS: usize = u8::MAX as usize;

impl BlockSet {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidBlock("a block set needs at least one block".into()));
        }
        if blocks.len() > MAX_BLOCKS {
            return Err(Error::InvalidBlock(format!(
                "at most {MAX_BLOCKS} blocks are supported, got {}",
                blocks.len()
            )));
        }
        Ok(BlockSet { blocks })
    }

    /// Parses the `{"blocks":[{"lengths":..,"spacings":..,"speeds":..}, ..]}` document.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("block sets always serialise")
    }

    /// Number of distinct blocks `D`.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Block for a 1-based symbol.
    pub fn get(&self, symbol: u8) -> Option<&Block> {
        (symbol as usize)
            .checked_sub(1)
            .and_then(|i| self.blocks.get(i))
    }
}

/// The two blocks of the running example: a single resonator (`l = 2, s = 2`) and a
/// dimer (`l = (1, 1), s = (1, 2)`), all speeds 1.
pub fn make_standard_blocks() -> BlockSet {
    standard_blocks_with_dimer_spacing(1.0)
}

/// Standard single block together with a dimer whose inner spacing is `s1`.
///
/// `s1 = 1/4` gives the deep-gap variant whose upper dimer band sits at `[8, 9]`.
pub fn standard_blocks_with_dimer_spacing(s1: f64) -> BlockSet {
    let single = Block::new(vec![2.0], vec![2.0], vec![1.0]).expect("valid block");
    let dimer = Block::new(vec![1.0, 1.0], vec![s1, 2.0], vec![1.0, 1.0]).expect("valid block");
    BlockSet::new(vec![single, dimer]).expect("two blocks")
}

/// Provenance of a generated sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub sampler: String,
    pub seed: Option<u64>,
}

/// Finite sequence of 1-based block symbols.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlockSequence {
    symbols: Vec<u8>,
    meta: Option<SequenceMeta>,
}

impl BlockSequence {
    /// Wraps raw symbols. Symbol `0` is rejected; the upper bound is checked on assembly.
    pub fn new(symbols: Vec<u8>) -> Result<Self> {
        if let Some(position) = symbols.iter().position(|&s| s == 0) {
            return Err(Error::InvalidSequence {
                symbol: 0,
                position,
                max: MAX_BLOCKS,
            });
        }
        Ok(BlockSequence {
            symbols,
            meta: None,
        })
    }

    pub fn with_meta(mut self, meta: SequenceMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn meta(&self) -> Option<&SequenceMeta> {
        self.meta.as_ref()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Concatenation `self ∘ other`; provenance is dropped.
    pub fn concat(&self, other: &BlockSequence) -> BlockSequence {
        let mut symbols = self.symbols.clone();
        symbols.extend_from_slice(&other.symbols);
        BlockSequence {
            symbols,
            meta: None,
        }
    }

    /// Checks every symbol lies in `1..=d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        match self
            .symbols
            .iter()
            .enumerate()
            .find(|(_, &s)| s == 0 || s as usize > d)
        {
            Some((position, &symbol)) => Err(Error::InvalidSequence {
                symbol,
                position,
                max: d,
            }),
            None => Ok(()),
        }
    }

    /// Number of occurrences of `symbol`.
    pub fn count(&self, symbol: u8) -> usize {
        self.symbols.iter().filter(|&&s| s == symbol).count()
    }
}

impl fmt::Display for BlockSequence {
    /// Comma-separated symbols, e.g. `1,2,1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.symbols.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for BlockSequence {
    type Err = Error;

    /// Accepts symbols separated by commas and/or whitespace; an optional surrounding
    /// pair of parentheses or brackets is ignored.
    fn from_str(text: &str) -> Result<Self> {
        let trimmed = text.trim();
        let inner = trimmed
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .or_else(|| trimmed.strip_prefix('[').and_then(|t| t.strip_suffix(']')))
            .unwrap_or(trimmed);
        let symbols = inner
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|tok| !tok.is_empty())
            .map(|tok| {
                tok.parse::<u8>()
                    .map_err(|e| Error::Parse(format!("bad symbol {tok:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        BlockSequence::new(symbols)
    }
}

/// Flat description of `N` resonators. `spacings[i]` is the gap after resonator `i`;
/// the last entry is the trailing spacing used when the array is periodised.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonatorArray {
    lengths: Vec<f64>,
    spacings: Vec<f64>,
    speeds: Vec<f64>,
}

impl ResonatorArray {
    pub fn new(lengths: Vec<f64>, spacings: Vec<f64>, speeds: Vec<f64>) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::EmptyArray);
        }
        // Same validation as a block.
        let b = Block::new(lengths, spacings, speeds)?;
        Ok(ResonatorArray {
            lengths: b.lengths,
            spacings: b.spacings,
            speeds: b.speeds,
        })
    }

    /// Uniform chain of `n` identical resonators.
    pub fn uniform(n: usize, length: f64, spacing: f64, speed: f64) -> Result<Self> {
        ResonatorArray::new(vec![length; n], vec![spacing; n], vec![speed; n])
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    /// Spacing after the last resonator.
    pub fn trailing_spacing(&self) -> f64 {
        *self.spacings.last().expect("non-empty array")
    }

    /// Unit-cell length: all lengths plus all spacings, trailing spacing included.
    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum::<f64>() + self.spacings.iter().sum::<f64>()
    }

    /// `self` followed by `other`; the trailing spacing of `self` becomes the gap between them.
    pub fn concat(&self, other: &ResonatorArray) -> ResonatorArray {
        let join = |a: &[f64], b: &[f64]| a.iter().chain(b).copied().collect::<Vec<_>>();
        ResonatorArray {
            lengths: join(&self.lengths, &other.lengths),
            spacings: join(&self.spacings, &other.spacings),
            speeds: join(&self.speeds, &other.speeds),
        }
    }
}

/// Concatenates the blocks selected by `chi`.
pub fn assemble(blocks: &BlockSet, chi: &BlockSequence) -> Result<ResonatorArray> {
    if chi.is_empty() {
        return Err(Error::EmptyArray);
    }
    chi.validate(blocks.len())?;
    let n: usize = chi
        .symbols()
        .iter()
        .map(|&s| blocks.blocks[s as usize - 1].len())
        .sum();
    let mut lengths = Vec::with_capacity(n);
    let mut spacings = Vec::with_capacity(n);
    let mut speeds = Vec::with_capacity(n);
    for &s in chi.symbols() {
        let b = &blocks.blocks[s as usize - 1];
        lengths.extend_from_slice(&b.lengths);
        spacings.extend_from_slice(&b.spacings);
        speeds.extend_from_slice(&b.speeds);
    }
    Ok(ResonatorArray {
        lengths,
        spacings,
        speeds,
    })
}

/// Unit-cell length of an array.
pub fn total_length(array: &ResonatorArray) -> f64 {
    array.total_length()
}
