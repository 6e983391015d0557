//! Reproducible experiment runs driven by one JSON config.
//!
//! Every run is a pure function of the config: sequences come from
//! [`SamplerSpec::sample_stream`] with the config seed, and parallel work is reduced in
//! a fixed order. [`Outputs`] collects the CSV files of a run and writes them together
//! with a `manifest.json` describing the run.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacitance::{symmetrized_capacitance, Spectrum};
use crate::eigen::{eig_sym_tridiag, EigOptions};
use crate::error::{Error, Result};
use crate::format::{column_csv, Csv};
use crate::geometry::{assemble, make_standard_blocks, Block, BlockSequence, BlockSet, ResonatorArray};
use crate::metaatom::{
    build_table, direct_window_spectrum, enumerate_meta_atoms, estimate_upper_spectrum,
    hybridisation_window, DefectModeTable, EstimatedSpectrum, Window, STANDARD_WINDOW,
};
use crate::propagation::{classify_grid, linspace, ClassifiedFrequency};
use crate::sampling::{Bound, SamplerSpec};
use crate::spectral_stats::{
    autocovariance, ecdf, k_grid, kde, khat_csv, structure_factor_tapered, variance_growth_exponent,
    wasserstein, window_count_variance, window_wasserstein, Bandwidth, DensityEstimate, GaussianKde, Taper,
    DEFAULT_R_MAX,
};
use crate::thouless::{analyse, LevelShift, ThoulessReport, Thresholds};

/// Block set as written in a config: `"standard"`, a list of blocks, or a
/// `{"blocks": [...]}` object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BlocksRef {
    Named(String),
    List(Vec<Block>),
    Set(BlockSet),
}

impl Default for BlocksRef {
    fn default() -> Self {
        BlocksRef::Named("standard".into())
    }
}

impl BlocksRef {
    pub fn resolve(&self) -> Result<BlockSet> {
        match self {
            BlocksRef::Named(name) if name == "standard" => Ok(make_standard_blocks()),
            BlocksRef::Named(name) => Err(Error::Config(format!("unknown block set {name:?}"))),
            BlocksRef::List(blocks) => BlockSet::new(blocks.clone()),
            BlocksRef::Set(set) => Ok(set.clone()),
        }
    }
}

fn default_sampling() -> SamplerSpec {
    SamplerSpec::Iid {
        probs: vec![0.5, 0.5],
    }
}

fn default_size() -> usize {
    10_000
}

fn default_sizes() -> Vec<usize> {
    (2..=11).map(|p| 1usize << p).collect()
}

fn default_repetitions() -> usize {
    20
}

fn default_reference_size() -> usize {
    1 << 13
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Meta-atom parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaAtomParams {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "P")]
    pub p: usize,
    #[serde(rename = "R")]
    pub r: usize,
    /// Open window `[lo, hi]`; defaults to `(2, 3)` for the standard blocks and to the
    /// highest hybridisation interval otherwise.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
}

impl Default for MetaAtomParams {
    fn default() -> Self {
        MetaAtomParams {
            l: 8,
            p: 4,
            r: 4,
            window: None,
        }
    }
}

fn default_sweep_samplers() -> Vec<SamplerSpec> {
    let probs = vec![0.5, 0.5];
    vec![
        SamplerSpec::Iid { probs: probs.clone() },
        SamplerSpec::BoundLength {
            probs: probs.clone(),
            bounds: vec![Bound::Unbounded, Bound::Limit(2)],
        },
        SamplerSpec::Chunk {
            chunks: vec![vec![2, 1], vec![1, 2]],
        },
        SamplerSpec::Softmax {
            probs,
            beta: 1.0,
            growth: Default::default(),
        },
        SamplerSpec::Fibonacci { order: None },
    ]
}

fn default_sweep_lengths() -> Vec<usize> {
    (1..=9).collect()
}

fn default_sweep_size() -> usize {
    15_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    #[serde(default = "default_sweep_samplers")]
    pub samplers: Vec<SamplerSpec>,
    /// Meta-atom lengths `L`; `P = floor(L / 2)`.
    #[serde(default = "default_sweep_lengths")]
    pub lengths: Vec<usize>,
    #[serde(default = "default_sweep_size")]
    pub size: usize,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            samplers: default_sweep_samplers(),
            lengths: default_sweep_lengths(),
            size: default_sweep_size(),
        }
    }
}

fn default_grid_points() -> usize {
    2001
}

fn default_overlay_length() -> usize {
    4
}

fn default_peaks() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DosParams {
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub bandwidth: Bandwidth,
    /// Defect modes are tabulated for meta-atoms up to this length (all single counts).
    #[serde(default = "default_overlay_length")]
    pub overlay_length: usize,
    #[serde(default = "default_peaks")]
    pub peaks: usize,
}

impl Default for DosParams {
    fn default() -> Self {
        DosParams {
            grid_points: default_grid_points(),
            bandwidth: Bandwidth::Auto,
            overlay_length: default_overlay_length(),
            peaks: default_peaks(),
        }
    }
}

fn default_r_max() -> usize {
    DEFAULT_R_MAX
}

fn default_k_points() -> usize {
    64
}

fn default_widths() -> Vec<usize> {
    vec![16, 32, 64, 128, 256, 512, 1024]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperuniformParams {
    /// Samplers to compare; empty means the config's `sampling`.
    #[serde(default)]
    pub samplers: Vec<SamplerSpec>,
    #[serde(default = "default_r_max")]
    pub r_max: usize,
    #[serde(default)]
    pub taper: Taper,
    /// Wavenumbers `pi i / n` for `i = 1..=n`.
    #[serde(default = "default_k_points")]
    pub k_points: usize,
    /// Window lengths for the count-variance growth exponent.
    #[serde(default = "default_widths")]
    pub widths: Vec<usize>,
}

impl Default for HyperuniformParams {
    fn default() -> Self {
        HyperuniformParams {
            samplers: Vec::new(),
            r_max: DEFAULT_R_MAX,
            taper: Taper::None,
            k_points: default_k_points(),
            widths: default_widths(),
        }
    }
}

fn default_lambda_max() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandsParams {
    #[serde(default = "default_lambda_max")]
    pub lambda_max: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

impl Default for BandsParams {
    fn default() -> Self {
        BandsParams {
            lambda_max: default_lambda_max(),
            grid_points: default_grid_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ThoulessParams {
    #[serde(default)]
    pub bandwidth: Bandwidth,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub mode: LevelShift,
}

/// One config for every experiment. Unknown keys are rejected; everything except the
/// block set has a default, so `{"blocks": "standard"}` is a complete config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub blocks: BlocksRef,
    #[serde(default = "default_sampling")]
    pub sampling: SamplerSpec,
    #[serde(default)]
    pub seed: u64,
    /// Number of blocks `M` of single-realisation experiments.
    #[serde(default = "default_size")]
    pub size: usize,
    /// Test sizes of the convergence experiment.
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_reference_size")]
    pub reference_size: usize,
    #[serde(default)]
    pub meta_atom: MetaAtomParams,
    #[serde(default)]
    pub accuracy_sweep: SweepParams,
    #[serde(default)]
    pub dos: DosParams,
    #[serde(default)]
    pub hyperuniform: HyperuniformParams,
    #[serde(default)]
    pub bands: BandsParams,
    #[serde(default)]
    pub thouless: ThoulessParams,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let blocks = self.blocks.resolve()?;
        self.sampling.validate()?;
        if self.sampling.symbol_count() > blocks.len() {
            return Err(Error::Config(format!(
                "sampler emits {} symbols but only {} blocks are defined",
                self.sampling.symbol_count(),
                blocks.len()
            )));
        }
        if self.size == 0 || self.reference_size == 0 || self.sizes.contains(&0) {
            return Err(Error::Config("sizes must be positive".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.meta_atom.l == 0 {
            return Err(Error::Config("meta-atom length L must be at least 1".into()));
        }
        if let Some([lo, hi]) = self.meta_atom.window {
            Window::new(lo, hi)?;
        }
        for s in &self.accuracy_sweep.samplers {
            s.validate()?;
        }
        for s in &self.hyperuniform.samplers {
            s.validate()?;
        }
        if self.accuracy_sweep.lengths.contains(&0) {
            return Err(Error::Config("sweep lengths must be positive".into()));
        }
        if !(self.bands.lambda_max > 0.0) || self.bands.grid_points < 2 {
            return Err(Error::Config("bands need lambda_max > 0 and at least 2 points".into()));
        }
        if self.dos.grid_points < 2 || self.hyperuniform.k_points == 0 {
            return Err(Error::Config("grids need at least 2 points".into()));
        }
        Ok(())
    }

    pub fn block_set(&self) -> Result<BlockSet> {
        self.blocks.resolve()
    }

    /// Meta-atom window for this config's block set.
    pub fn window(&self) -> Result<Window> {
        if let Some([lo, hi]) = self.meta_atom.window {
            return Window::new(lo, hi);
        }
        let blocks = self.block_set()?;
        if blocks == make_standard_blocks() {
            Ok(STANDARD_WINDOW)
        } else {
            hybridisation_window(&blocks)
        }
    }
}

/// CSV files produced by a run plus the manifest describing it.
#[derive(Debug, Clone)]
pub struct Outputs {
    pub experiment: String,
    pub files: Vec<(String, Csv)>,
    pub summary: serde_json::Value,
    pub seconds: f64,
}

impl Outputs {
    fn new(experiment: &str, files: Vec<(String, Csv)>, summary: serde_json::Value, start: Instant) -> Self {
        Outputs {
            experiment: experiment.to_string(),
            files,
            summary,
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    pub fn file(&self, name: &str) -> Option<&Csv> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    /// Writes every CSV and `manifest.json` into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path, config: &ExperimentConfig) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, csv) in &self.files {
            csv.write_to(&dir.join(name))?;
        }
        let manifest = serde_json::json!({
            "experiment": self.experiment,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": config.seed,
            "config": config,
            "outputs": self.files.iter().map(|(n, _)| n).collect::<Vec<_>>(),
            "summary": self.summary,
            "wall_time_seconds": self.seconds,
        });
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }
}

/// Realisation `stream` of `m` blocks.
pub fn realise(
    sampler: &SamplerSpec,
    blocks: &BlockSet,
    m: usize,
    seed: u64,
    stream: u64,
) -> Result<(BlockSequence, ResonatorArray)> {
    let chi = sampler.sample_stream(m, seed, stream)?;
    let array = assemble(blocks, &chi)?;
    Ok((chi, array))
}

/// All eigenvalues of the symmetrised capacitance matrix.
pub fn full_spectrum(array: &ResonatorArray) -> Result<Spectrum> {
    eig_sym_tridiag(&symmetrized_capacitance(array), &EigOptions::default())
}

pub fn sequence_csv(chi: &BlockSequence) -> Csv {
    let mut csv = Csv::new(&["index", "symbol"]);
    for (i, &s) in chi.symbols().iter().enumerate() {
        csv.row(&[i.into(), (s as usize).into()]);
    }
    csv
}

/// Sampled sequence of `config.size` blocks.
pub fn run_sample(config: &ExperimentConfig) -> Result<(BlockSequence, Outputs)> {
    let start = Instant::now();
    let chi = config.sampling.sample(config.size, config.seed)?;
    let summary = serde_json::json!({ "length": chi.len(), "sampler": config.sampling.name() });
    let out = Outputs::new("sample", vec![("sequence.csv".into(), sequence_csv(&chi))], summary, start);
    Ok((chi, out))
}

pub fn run_spectrum(config: &ExperimentConfig) -> Result<(Spectrum, Outputs)> {
    let start = Instant::now();
    let blocks = config.block_set()?;
    let (_, array) = realise(&config.sampling, &blocks, config.size, config.seed, 0)?;
    let spectrum = full_spectrum(&array)?;
    let summary = serde_json::json!({ "resonators": array.len() });
    let csv = column_csv("lambda", spectrum.values());
    let out = Outputs::new("spectrum", vec![("spectrum.csv".into(), csv)], summary, start);
    Ok((spectrum, out))
}

pub fn bands_csv(rows: &[ClassifiedFrequency], d: usize) -> Csv {
    let mut header = vec!["lambda".to_string()];
    header.extend((1..=d).map(|i| format!("abs_trace_block_{i}")));
    header.push("region".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&header);
    for row in rows {
        let mut cells = vec![row.lambda.into()];
        cells.extend(row.abs_traces.iter().map(|&t| t.into()));
        cells.push(row.region.as_str().into());
        csv.row(&cells);
    }
    csv
}

/// Classification of an equispaced grid on `[0, lambda_max]`.
pub fn run_bands(config: &ExperimentConfig) -> Result<(Vec<ClassifiedFrequency>, Outputs)> {
    let start = Instant::now();
    let blocks = config.block_set()?;
    let grid = linspace(0.0, config.bands.lambda_max, config.bands.grid_points);
    let rows = classify_grid(&blocks, &grid);
    let csv = bands_csv(&rows, blocks.len());
    let summary = serde_json::json!({ "points": rows.len() });
    Ok((rows, Outputs::new("bands", vec![("bands.csv".into(), csv)], summary, start)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub m: usize,
    pub mean: f64,
    pub std_error: f64,
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceCurve {
    pub reference_size: usize,
    pub points: Vec<ConvergencePoint>,
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean Wasserstein distance between small-system eCDFs and one large reference.
///
/// The reference is stream 0; test realisations use streams
/// `1 + size_index * repetitions + rep`, so every realisation is independent.
pub fn run_convergence(config: &ExperimentConfig) -> Result<(ConvergenceCurve, Outputs)> {
    let start = Instant::now();
    let blocks = config.block_set()?;
    let (_, ref_array) = realise(&config.sampling, &blocks, config.reference_size, config.seed, 0)?;
    let reference = ecdf(full_spectrum(&ref_array)?.values())?;

    let mut sizes = config.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let reps = config.repetitions;
    let jobs: Vec<(usize, usize, u64)> = sizes
        .iter()
        .enumerate()
        .flat_map(|(i, &m)| (0..reps).map(move |r| (i, m, 1 + (i * reps + r) as u64)))
        .collect();
    let distances = jobs
        .par_iter()
        .map(|&(_, m, stream)| {
            let (_, array) = realise(&config.sampling, &blocks, m, config.seed, stream)?;
            wasserstein(&ecdf(full_spectrum(&array)?.values())?, &reference)
        })
        .collect::<Result<Vec<f64>>>()?;
    let points: Vec<ConvergencePoint> = sizes
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let d = distances[i * reps..(i + 1) * reps].to_vec();
            let (mean, std_error) = mean_and_se(&d);
            ConvergencePoint {
                m,
                mean,
                std_error,
                distances: d,
            }
        })
        .collect();

    let mut csv = Csv::new(&["m", "mean_wasserstein", "std_error"]);
    for p in &points {
        csv.row(&[p.m.into(), p.mean.into(), p.std_error.into()]);
    }
    let curve = ConvergenceCurve {
        reference_size: config.reference_size,
        points,
    };
    let summary = serde_json::json!({ "reference_size": config.reference_size, "repetitions": reps });
    let files = vec![
        ("convergence.csv".into(), csv),
        ("cdf.csv".into(), reference.to_csv()),
    ];
    Ok((curve, Outputs::new("converge", files, summary, start)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaAtomRun {
    pub estimate: EstimatedSpectrum,
    pub direct: Option<Vec<f64>>,
    pub wasserstein: Option<f64>,
    pub table_entries: usize,
    pub window: Window,
    pub table_seconds: f64,
    pub estimate_seconds: f64,
}

pub fn meta_atom_table(config: &ExperimentConfig, blocks: &BlockSet) -> Result<DefectModeTable> {
    let p = &config.meta_atom;
    build_table(p.l, p.p, p.r, blocks, config.window()?)
}

/// Meta-atom estimate of the window spectrum of one realisation, optionally compared
/// with the direct spectrum.
pub fn run_meta_atom(config: &ExperimentConfig, compare_direct: bool) -> Result<(MetaAtomRun, Outputs)> {
    let start = Instant::now();
    let blocks = config.block_set()?;
    let chi = config.sampling.sample(config.size, config.seed)?;
    let t = Instant::now();
    let table = meta_atom_table(config, &blocks)?;
    let table_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let estimate = estimate_upper_spectrum(&chi, &table)?;
    let estimate_seconds = t.elapsed().as_secs_f64();
    let window = table.window();
    let (direct, distance) = if compare_direct {
        let direct = direct_window_spectrum(&chi, &blocks, window)?;
        let d = window_wasserstein(&direct, &estimate.values, window.lo, window.hi)?;
        (Some(direct), Some(d))
    } else {
        (None, None)
    };
    let mut files = vec![(
        "estimated_spectrum.csv".to_string(),
        column_csv("lambda", &estimate.values),
    )];
    if let Some(d) = &direct {
        files.push(("direct_spectrum.csv".into(), column_csv("lambda", d)));
    }
    let summary = serde_json::json!({
        "estimated_count": estimate.values.len(),
        "direct_count": direct.as_ref().map(Vec::len),
        "wasserstein": distance,
        "table_entries": table.len(),
        "window": [window.lo, window.hi],
        "table_seconds": table_seconds,
        "estimate_seconds": estimate_seconds,
    });
    let run = MetaAtomRun {
        estimate,
        direct,
        wasserstein: distance,
        table_entries: table.len(),
        window,
        table_seconds,
        estimate_seconds,
    };
    Ok((run, Outputs::new("meta-atom", files, summary, start)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyPoint {
    pub sampler: String,
    pub l: usize,
    pub p: usize,
    pub wasserstein: f64,
}

/// Window-normalised Wasserstein error of the meta-atom estimate for each sampler and
/// meta-atom length, with `P = floor(L / 2)`, on one realisation per sampler.
pub fn run_accuracy_sweep(config: &ExperimentConfig) -> Result<(Vec<AccuracyPoint>, Outputs)> {
    let start = Instant::now();
    let blocks = config.block_set()?;
    let window = config.window()?;
    let sweep = &config.accuracy_sweep;
    if sweep.samplers.is_empty() {
        return Err(Error::Config("accuracy sweep needs at least one sampler".into()));
    }
    let tables = sweep
        .lengths
        .iter()
        .map(|&l| build_table(l, l / 2, config.meta_atom.r, &blocks, window))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    for sampler in &sweep.samplers {
        let chi = sampler.sample(sweep.size, config.seed)?;
        let direct = direct_window_spectrum(&chi, &blocks, window)?;
        for (table, &l) in tables.iter().zip(&sweep.lengths) {
            let est = estimate_upper_spectrum(&chi, table)?;
            points.push(AccuracyPoint {
                sampler: sampler.name().to_string(),
                l,
                p: l / 2,
                wasserstein: window_wasserstein(&direct, &est.values, window.lo, window.hi)?,
            });
        }
    }
    let mut csv = Csv::new(&["sampler", "L", "P", "wasserstein"]);
    for p in &points {
        csv.row(&[p.sampler.as_str().into(), p.l.into(), p.p.into(), p.wasserstein.into()]);
    }
    let summary = serde_json::json!({ "size": sweep.size, "window": [window.lo, window.hi] });
    Ok((points, Outputs::new("accuracy-sweep", vec![("accuracy.csv".into(), csv)], summary, start)))
}

/// Defect mode of a meta-atom, for overlays.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectMode {
    pub meta_atom: String,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DosRun {
    pub direct: Vec<f64>,
    pub density: Option<DensityEstimate>,
    pub defect_modes: Vec<DefectMode>,
    /// Grid positions of the largest local maxima of the density, highest first.
    pub peaks: Vec<f64>,
    pub window: Window,
}

/// Local maxima of `values`, by decreasing height.
pub fn density_peaks(grid: &[f64], values: &[f64], count: usize) -> Vec<f64> {
    let mut maxima: Vec<(f64, f64)> = (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .map(|i| (grid[i], values[i]))
        .collect();
    maxima.sort_by(|a, b| b.1.total_cmp(&a.1));
    maxima.into_iter().take(count).map(|(x, _)| x).collect()
}

/// Number of `values` within `radius` of any of `centres`.
pub fn mass_near(values: &[f64], centres: &[f64], radius: f64) -> usize {
    values
        .iter()
        .filter(|&&x| centres.iter().any(|c| (x - c).abs() <= radius))
        .count()
}

/// Upper limit on the number of density evaluation points.
pub const MAX_DOS_GRID: usize = 1 << 20;

/// Density of states of the window spectrum with defect modes of short meta-atoms.
pub fn run_dos(config: &ExperimentConfig) -> Result<(DosRun, Outputs)> {
    let start = Instant::now();
    let blocks = config.block_set()?;
    let window = config.window()?;
    let chi = config.sampling.sample(config.size, config.seed)?;
    let direct = direct_window_spectrum(&chi, &blocks, window)?;
    let density = if direct.is_empty() {
        None
    } else {
        // The grid is refined until it resolves the bandwidth, so that peaks of the
        // estimate are located to a fraction of `h`.
        let h = GaussianKde::new(&direct, config.dos.bandwidth)?.bandwidth();
        let resolving = ((window.hi - window.lo) / h * 4.0).ceil() as usize + 1;
        let points = config.dos.grid_points.max(resolving.min(MAX_DOS_GRID));
        let grid = linspace(window.lo, window.hi, points);
        Some(kde(&direct, Bandwidth::Fixed(h), &grid)?)
    };
    let l = config.dos.overlay_length.max(1);
    let atoms = enumerate_meta_atoms(l, l)?;
    let table = build_table(l, l, config.meta_atom.r, &blocks, window)?;
    let defect_modes: Vec<DefectMode> = atoms
        .iter()
        .flat_map(|a| {
            let name = BlockSequence::new(a.symbols().to_vec()).expect("valid").to_string();
            table
                .get(a.symbols())
                .unwrap_or(&[])
                .iter()
                .map(move |&lambda| DefectMode {
                    meta_atom: name.clone(),
                    lambda,
                })
        })
        .collect();
    let peaks = density
        .as_ref()
        .map(|d| density_peaks(&d.grid, &d.values, config.dos.peaks))
        .unwrap_or_default();

    let dos_csv = match &density {
        Some(d) => d.to_csv(),
        None => Csv::new(&["lambda", "density"]),
    };
    let mut modes_csv = Csv::new(&["meta_atom", "lambda"]);
    for m in &defect_modes {
        modes_csv.row(&[m.meta_atom.as_str().into(), m.lambda.into()]);
    }
    let summary = serde_json::json!({
        "direct_count": direct.len(),
        "bandwidth": density.as_ref().map(|d| d.bandwidth),
        "peaks": peaks,
        "window": [window.lo, window.hi],
    });
    let files = vec![
        ("dos.csv".into(), dos_csv),
        ("defect_modes.csv".into(), modes_csv),
        ("direct_spectrum.csv".into(), column_csv("lambda", &direct)),
    ];
    let run = DosRun {
        direct,
        density,
        defect_modes,
        peaks,
        window,
    };
    Ok((run, Outputs::new("dos", files, summary, start)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperuniformRow {
    pub sampler: String,
    pub k: Vec<f64>,
    pub khat: Vec<f64>,
    pub p: Vec<f64>,
    pub growth_exponent: Option<f64>,
}

/// Structure factor `K^(k)` of one realisation.
pub fn structure_factor_of(chi: &BlockSequence, params: &HyperuniformParams) -> Result<HyperuniformRow> {
    let acf = autocovariance(chi, params.r_max)?;
    let k = k_grid(params.k_points);
    let khat = structure_factor_tapered(&acf, &k, params.taper);
    let widths: Vec<usize> = params.widths.iter().copied().filter(|&w| w <= chi.len()).collect();
    let growth_exponent = window_count_variance(chi, &widths)
        .and_then(|v| variance_growth_exponent(&widths, &v))
        .ok();
    Ok(HyperuniformRow {
        sampler: chi.meta().map_or_else(String::new, |m| m.sampler.clone()),
        k,
        khat,
        p: acf.p,
        growth_exponent,
    })
}

/// Structure factors for each configured sampler on `config.size` blocks.
pub fn run_hyperuniform(config: &ExperimentConfig) -> Result<(Vec<HyperuniformRow>, Outputs)> {
    let start = Instant::now();
    let params = &config.hyperuniform;
    let samplers = if params.samplers.is_empty() {
        vec![config.sampling.clone()]
    } else {
        params.samplers.clone()
    };
    let rows = samplers
        .iter()
        .map(|s| structure_factor_of(&s.sample(config.size, config.seed)?, params))
        .collect::<Result<Vec<_>>>()?;
    let files = if rows.len() == 1 {
        vec![("khat.csv".to_string(), khat_csv(&rows[0].k, &rows[0].khat))]
    } else {
        rows.iter()
            .enumerate()
            .map(|(i, r)| (format!("khat_{i}_{}.csv", r.sampler), khat_csv(&r.k, &r.khat)))
            .collect()
    };
    let summary = serde_json::json!({
        "samplers": rows.iter().map(|r| serde_json::json!({
            "sampler": r.sampler,
            "khat_kmin": r.khat.first(),
            "growth_exponent": r.growth_exponent,
        })).collect::<Vec<_>>(),
    });
    Ok((rows, Outputs::new("hyperuniform", files, summary, start)))
}

/// Thouless ratios of one realisation.
pub fn run_thouless(config: &ExperimentConfig) -> Result<(ThoulessReport, Outputs)> {
    let start = Instant::now();
    let blocks = config.block_set()?;
    let (_, array) = realise(&config.sampling, &blocks, config.size, config.seed, 0)?;
    let params = &config.thouless;
    let mut report = match params.mode {
        LevelShift::TwoPoint => analyse(&array, &blocks, params.bandwidth)?,
        LevelShift::Quadrature => {
            use crate::thouless::{band_functions, brillouin_grid, level_shift, thouless_ratios};
            let bands = band_functions(&array, &brillouin_grid(array.total_length(), 33))?;
            let shifts = level_shift(&bands, LevelShift::Quadrature)?;
            let zero = bands.alphas.iter().position(|&a| a == 0.0).expect("grid contains 0");
            thouless_ratios(&bands.bands[zero], &shifts, &array, params.bandwidth)?.with_regions(&blocks)
        }
    };
    report.retag(&params.thresholds);
    let summary = serde_json::json!({ "resonators": array.len(), "bandwidth": report.bandwidth });
    let csv = report.to_csv();
    Ok((report, Outputs::new("thouless", vec![("thouless.csv".into(), csv)], summary, start)))
}
