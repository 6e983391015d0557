//! Seeded generators for block sequences.
//!
//! Randomness comes from ChaCha8 seeded with a `u64` through
//! [`SeedableRng::seed_from_u64`]. Independent realisations sharing one seed use
//! distinct ChaCha streams ([`sequence_rng`]); within a stream each sampled position
//! consumes exactly one uniform `f64` draw, in position order (chunk sampling
//! consumes one draw per chunk). Identical `(spec, M, seed, stream)` therefore
//! always yields identical sequences, on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{BlockSequence, SequenceMeta};

/// Generator for stream `stream` of `seed`.
pub fn sequence_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Maximum consecutive repetitions allowed for one symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Limit(u32),
    Unbounded,
}

impl Bound {
    fn allows(self, run: u32) -> bool {
        match self {
            Bound::Limit(b) => run < b,
            Bound::Unbounded => true,
        }
    }
}

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bound::Limit(b) => s.serialize_u32(*b),
            Bound::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Limit(u32),
            Word(String),
            Null(()),
        }
        match Repr::deserialize(d)? {
            Repr::Limit(b) => Ok(Bound::Limit(b)),
            Repr::Word(w) if w == "unbounded" || w == "inf" => Ok(Bound::Unbounded),
            Repr::Null(()) => Ok(Bound::Unbounded),
            Repr::Word(w) => Err(de::Error::custom(format!(
                "expected a non-negative integer or \"unbounded\", got {w:?}"
            ))),
        }
    }
}

/// How softmax sampling grows the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    /// Left to right; the count correction uses every symbol generated so far.
    #[default]
    OneSided,
    /// Outwards from a centre symbol, drawing positions `+(j+1)` and `-(j+1)` from
    /// the counts over `[-j, j]`.
    TwoSided,
}

fn default_chunks() -> Vec<Vec<u8>> {
    vec![vec![2, 1], vec![1, 2]]
}

/// Sampling scheme, as read from the `"sampling"` key of an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    Iid {
        probs: Vec<f64>,
    },
    BoundLength {
        probs: Vec<f64>,
        bounds: Vec<Bound>,
    },
    Chunk {
        #[serde(default = "default_chunks")]
        chunks: Vec<Vec<u8>>,
    },
    Softmax {
        probs: Vec<f64>,
        beta: f64,
        #[serde(default)]
        growth: Growth,
    },
    Fibonacci {
        /// Substitution order; when absent the first `M` symbols of the Fibonacci word are used.
        #[serde(default)]
        order: Option<u32>,
    },
}

const PROB_SUM_TOL: f64 = 1e-12;

fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidSampler("probs must be non-empty".into()));
    }
    if probs.len() > crate::geometry::MAX_BLOCKS {
        return Err(Error::InvalidSampler("too many symbols".into()));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidSampler(format!(
            "probabilities must lie in [0, 1]: {probs:?}"
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::InvalidSampler(format!(
            "probabilities sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

fn check_chunks(chunks: &[Vec<u8>]) -> Result<usize> {
    let first = chunks
        .first()
        .ok_or_else(|| Error::InvalidSampler("chunk list is empty".into()))?;
    let width = first.len();
    if width == 0 {
        return Err(Error::InvalidSampler("chunks must be non-empty".into()));
    }
    if chunks.iter().any(|c| c.len() != width) {
        return Err(Error::InvalidSampler("chunks must share one length".into()));
    }
    let d = chunks.iter().flatten().copied().max().unwrap_or(0) as usize;
    if chunks.iter().flatten().any(|&s| s == 0) {
        return Err(Error::InvalidSampler("chunk symbols are 1-based".into()));
    }
    if width % d != 0 {
        return Err(Error::InvalidSampler(format!(
            "chunk length {width} cannot hold {d} symbols equally often"
        )));
    }
    for chunk in chunks {
        for symbol in 1..=d as u8 {
            if chunk.iter().filter(|&&s| s == symbol).count() != width / d {
                return Err(Error::InvalidSampler(format!(
                    "chunk {chunk:?} is not balanced over symbols 1..={d}"
                )));
            }
        }
    }
    Ok(width)
}

impl SamplerSpec {
    /// Short identifier used in file names and sequence provenance.
    pub fn name(&self) -> &'static str {
        match self {
            SamplerSpec::Iid { .. } => "iid",
            SamplerSpec::BoundLength { .. } => "bound_length",
            SamplerSpec::Chunk { .. } => "chunk",
            SamplerSpec::Softmax { .. } => "softmax",
            SamplerSpec::Fibonacci { .. } => "fibonacci",
        }
    }

    /// Parses a sampler document such as `{"type":"softmax","probs":[0.5,0.5],"beta":1.0}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SamplerSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Number of symbols the sampler emits.
    pub fn symbol_count(&self) -> usize {
        match self {
            SamplerSpec::Iid { probs }
            | SamplerSpec::BoundLength { probs, .. }
            | SamplerSpec::Softmax { probs, .. } => probs.len(),
            SamplerSpec::Chunk { chunks } => {
                chunks.iter().flatten().copied().max().unwrap_or(0) as usize
            }
            SamplerSpec::Fibonacci { .. } => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SamplerSpec::Iid { probs } => check_probs(probs),
            SamplerSpec::BoundLength { probs, bounds } => {
                check_probs(probs)?;
                if bounds.len() != probs.len() {
                    return Err(Error::InvalidSampler(format!(
                        "{} bounds for {} symbols",
                        bounds.len(),
                        probs.len()
                    )));
                }
                if bounds.iter().all(|b| *b == Bound::Limit(0)) {
                    return Err(Error::Infeasible);
                }
                Ok(())
            }
            SamplerSpec::Chunk { chunks } => check_chunks(chunks).map(|_| ()),
            SamplerSpec::Softmax { probs, beta, .. } => {
                check_probs(probs)?;
                if !(beta.is_finite() && *beta >= 0.0) {
                    return Err(Error::InvalidSampler(format!(
                        "temperature must be finite and non-negative, got {beta}"
                    )));
                }
                Ok(())
            }
            SamplerSpec::Fibonacci { order } => match order {
                Some(o) if *o > MAX_FIBONACCI_ORDER => Err(Error::InvalidSampler(format!(
                    "Fibonacci order {o} exceeds {MAX_FIBONACCI_ORDER}"
                ))),
                _ => Ok(()),
            },
        }
    }

    /// Samples `m` symbols from stream 0 of `seed`.
    pub fn sample(&self, m: usize, seed: u64) -> Result<BlockSequence> {
        self.sample_stream(m, seed, 0)
    }

    /// Samples `m` symbols from stream `stream` of `seed`.
    ///
    /// A Fibonacci spec with an explicit order ignores `m` and returns the full
    /// substitution sequence of that order.
    pub fn sample_stream(&self, m: usize, seed: u64, stream: u64) -> Result<BlockSequence> {
        self.validate()?;
        let mut rng = sequence_rng(seed, stream);
        let symbols = match self {
            SamplerSpec::Iid { probs } => sample_iid(probs, m, &mut rng),
            SamplerSpec::BoundLength { probs, bounds } => {
                sample_bound_length(probs, bounds, m, &mut rng)?
            }
            SamplerSpec::Chunk { chunks } => sample_chunks(chunks, m, &mut rng)?,
            SamplerSpec::Softmax {
                probs,
                beta,
                growth,
            } => match growth {
                Growth::OneSided => sample_softmax(probs, *beta, m, &mut rng),
                Growth::TwoSided => sample_softmax_two_sided(probs, *beta, m, &mut rng),
            },
            SamplerSpec::Fibonacci { order } => match order {
                Some(o) => fibonacci_sequence(*o),
                None => fibonacci_prefix(m),
            },
        };
        let seed = match self {
            SamplerSpec::Fibonacci { .. } => None,
            _ => Some(seed),
        };
        Ok(BlockSequence::new(symbols)?.with_meta(SequenceMeta {
            sampler: self.name().to_string(),
            seed,
        }))
    }
}

/// Inverse-CDF draw of a 1-based symbol from unnormalised `weights`.
fn pick(weights: &[f64], u: f64) -> u8 {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if target < acc {
                return i as u8 + 1;
            }
        }
    }
    last_positive as u8 + 1
}

/// Independent draws with probabilities `probs`.
pub fn sample_iid<R: Rng>(probs: &[f64], m: usize, rng: &mut R) -> Vec<u8> {
    (0..m).map(|_| pick(probs, rng.random::<f64>())).collect()
}

/// Sequential sampling in which symbol `d` never repeats more than `bounds[d]` times
/// in a row: once its run reaches the bound it is removed from the next draw and the
/// remaining probabilities are renormalised.
pub fn sample_bound_length<R: Rng>(
    probs: &[f64],
    bounds: &[Bound],
    m: usize,
    rng: &mut R,
) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(m);
    let mut weights = probs.to_vec();
    let mut current = 0u8;
    let mut run = 0u32;
    for _ in 0..m {
        for (i, w) in weights.iter_mut().enumerate() {
            let allowed = if i as u8 + 1 == current {
                bounds[i].allows(run)
            } else {
                bounds[i].allows(0)
            };
            *w = if allowed { probs[i] } else { 0.0 };
        }
        if weights.iter().all(|&w| w <= 0.0) {
            return Err(Error::Infeasible);
        }
        let s = pick(&weights, rng.random::<f64>());
        if s == current {
            run += 1;
        } else {
            current = s;
            run = 1;
        }
        out.push(s);
    }
    Ok(out)
}

/// Concatenation of `m / chunk_len` chunks chosen uniformly and independently.
pub fn sample_chunks<R: Rng>(chunks: &[Vec<u8>], m: usize, rng: &mut R) -> Result<Vec<u8>> {
    let width = check_chunks(chunks)?;
    if m % width != 0 {
        return Err(Error::Length {
            len: m,
            chunk: width,
        });
    }
    let mut out = Vec::with_capacity(m);
    for _ in 0..m / width {
        let i = ((rng.random::<f64>() * chunks.len() as f64) as usize).min(chunks.len() - 1);
        out.extend_from_slice(&chunks[i]);
    }
    Ok(out)
}

/// Softmax weights `exp[beta (p_d n - count_d)]`, shifted by the maximum exponent.
fn softmax_weights(probs: &[f64], beta: f64, n: usize, counts: &[usize], out: &mut [f64]) {
    let mut max = f64::NEG_INFINITY;
    for ((o, &p), &c) in out.iter_mut().zip(probs).zip(counts) {
        *o = beta * (p * n as f64 - c as f64);
        max = max.max(*o);
    }
    for o in out.iter_mut() {
        *o = (*o - max).exp();
    }
}

/// Count-regularised sampling grown left to right.
///
/// The first symbol is drawn from `probs`; every later symbol is drawn with weights
/// `exp[beta (p_d n - #_d)]`, where `n` symbols have been generated so far and `#_d`
/// of them equal `d`.
pub fn sample_softmax<R: Rng>(probs: &[f64], beta: f64, m: usize, rng: &mut R) -> Vec<u8> {
    let mut out = Vec::with_capacity(m);
    let mut counts = vec![0usize; probs.len()];
    let mut weights = vec![0.0; probs.len()];
    for n in 0..m {
        let s = if n == 0 {
            pick(probs, rng.random::<f64>())
        } else {
            softmax_weights(probs, beta, n, &counts, &mut weights);
            pick(&weights, rng.random::<f64>())
        };
        counts[s as usize - 1] += 1;
        out.push(s);
    }
    out
}

/// Count-regularised sampling grown outwards from a centre symbol.
///
/// Positions `+(j+1)` and `-(j+1)` are drawn (in that order) with weights
/// `exp[beta (p_d (2j+1) - #_{d,j})]` computed from the counts over `[-j, j]`.
/// For even `m` the left side holds one more symbol than the right.
pub fn sample_softmax_two_sided<R: Rng>(
    probs: &[f64],
    beta: f64,
    m: usize,
    rng: &mut R,
) -> Vec<u8> {
    if m == 0 {
        return Vec::new();
    }
    let left_len = m / 2;
    let right_len = m - 1 - left_len;
    let mut counts = vec![0usize; probs.len()];
    let mut weights = vec![0.0; probs.len()];
    let centre = pick(probs, rng.random::<f64>());
    counts[centre as usize - 1] += 1;
    let mut left = Vec::with_capacity(left_len);
    let mut right = Vec::with_capacity(right_len);
    for j in 0..left_len.max(right_len) {
        softmax_weights(probs, beta, 2 * j + 1, &counts, &mut weights);
        let mut draws = [0u8; 2];
        if j < right_len {
            draws[0] = pick(&weights, rng.random::<f64>());
            right.push(draws[0]);
        }
        if j < left_len {
            draws[1] = pick(&weights, rng.random::<f64>());
            left.push(draws[1]);
        }
        for s in draws.into_iter().filter(|&s| s > 0) {
            counts[s as usize - 1] += 1;
        }
    }
    left.reverse();
    left.push(centre);
    left.extend(right);
    left
}

/// Largest supported substitution order (the length grows like the golden ratio to this power).
pub const MAX_FIBONACCI_ORDER: u32 = 40;

/// Fibonacci substitution `1 -> 2`, `2 -> 2,1` applied `order` times to `(1)`.
pub fn fibonacci_sequence(order: u32) -> Vec<u8> {
    let order = order.min(MAX_FIBONACCI_ORDER);
    let mut seq = vec![1u8];
    for _ in 0..order {
        let mut next = Vec::with_capacity(seq.len() * 2);
        for &s in &seq {
            if s == 1 {
                next.push(2);
            } else {
                next.extend_from_slice(&[2, 1]);
            }
        }
        seq = next;
    }
    seq
}

/// First `m` symbols of the Fibonacci word. Orders `>= 1` are prefixes of one another.
pub fn fibonacci_prefix(m: usize) -> Vec<u8> {
    let mut order = 1;
    let mut seq = fibonacci_sequence(order);
    while seq.len() < m {
        order += 1;
        seq = fibonacci_sequence(order);
    }
    seq.truncate(m);
    seq
}
