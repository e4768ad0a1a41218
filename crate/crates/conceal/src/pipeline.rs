//! Block-loss concealment: one extrapolation window per lost block.
//!
//! Each block is extrapolated from a frame of `support` samples around it.
//! Window samples outside the image or inside any lost block other than the
//! current one are excluded from the support, so concealed values never feed
//! another block and the result does not depend on processing order.

use std::time::Instant;

use fse_core::basis::BasisKind;
use fse_core::grid::{build_isotropic_weight, Label, Psnr, Rect, RegionMask, SampleGrid};
use fse_core::spatial::{Compensation, ExtrapolationConfig, ModelState, SelectionRule, SpatialEngine, Step};
use fse_core::spectral::{init_spectra, Spectrum};
use fse_core::{TraceRecord, Transform2d};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ConcealError, Result};
use crate::fft::RustFft2d;
use crate::pattern::LossPattern;

pub const PEAK: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Algorithm {
    /// No compensation.
    Fse,
    /// Full compensation.
    Ofse,
    /// Constant compensation factor.
    Fofse { gamma: f64 },
}

impl Algorithm {
    pub fn compensation(self) -> Compensation {
        match self {
            Algorithm::Fse => Compensation::None,
            Algorithm::Ofse => Compensation::Full,
            Algorithm::Fofse { gamma } => Compensation::Constant(gamma),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fse => "fse",
            Algorithm::Ofse => "ofse",
            Algorithm::Fofse { .. } => "fofse",
        }
    }

    /// Series label, e.g. `fofse(0.2)`.
    pub fn label(self) -> String {
        match self {
            Algorithm::Fofse { gamma } => format!("fofse({gamma})"),
            a => a.name().to_string(),
        }
    }

    /// The constant factor, `1` for FSE and `None` for full compensation.
    pub fn gamma(self) -> Option<f64> {
        match self {
            Algorithm::Fse => Some(1.0),
            Algorithm::Ofse => None,
            Algorithm::Fofse { gamma } => Some(gamma),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub iterations: usize,
    pub transform_size: usize,
    pub rho_hat: f64,
    /// Width of the support frame around each block.
    pub support: usize,
    #[serde(with = "basis_name")]
    pub basis: BasisKind,
    /// Keep per-block traces in the report.
    pub keep_traces: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            transform_size: 64,
            rho_hat: 0.8,
            support: 16,
            basis: BasisKind::Dft2d,
            keep_traces: false,
        }
    }
}

impl PipelineConfig {
    pub fn extrapolation(&self, algorithm: Algorithm) -> ExtrapolationConfig {
        ExtrapolationConfig {
            iterations: self.iterations,
            transform_size: self.transform_size,
            rho_hat: self.rho_hat,
            basis: self.basis,
            selection: SelectionRule::MaxWeightedPortion,
            compensation: algorithm.compensation(),
        }
    }
}

mod basis_name {
    use fse_core::basis::BasisKind;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(k: &BasisKind, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match k {
            BasisKind::Dft2d => "dft",
            BasisKind::Dct2d => "dct",
        })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BasisKind, D::Error> {
        match String::deserialize(d)?.as_str() {
            "dft" => Ok(BasisKind::Dft2d),
            "dct" => Ok(BasisKind::Dct2d),
            other => Err(serde::de::Error::custom(format!("unknown basis `{other}`"))),
        }
    }
}

/// Extrapolation window of one lost block.
#[derive(Debug, Clone)]
pub struct BlockWindow {
    pub mask: RegionMask,
    pub signal: SampleGrid,
    /// Image coordinates of the window's top-left sample; may be negative.
    pub origin: (isize, isize),
}

impl BlockWindow {
    fn image_pos(&self, m: usize, n: usize) -> (usize, usize) {
        (
            (self.origin.0 + m as isize) as usize,
            (self.origin.1 + n as isize) as usize,
        )
    }
}

pub fn block_window(image: &SampleGrid, pattern: &LossPattern, index: usize, support: usize) -> Result<BlockWindow> {
    let block = pattern.rect(index);
    let rows = block.height + 2 * support;
    let cols = block.width + 2 * support;
    let origin = (
        block.row as isize - support as isize,
        block.col as isize - support as isize,
    );
    let others: Vec<Rect> = pattern
        .rects()
        .into_iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .map(|(_, r)| r)
        .collect();
    let mut labels = Vec::with_capacity(rows * cols);
    let mut samples = Vec::with_capacity(rows * cols);
    for m in 0..rows {
        for n in 0..cols {
            let (r, c) = (origin.0 + m as isize, origin.1 + n as isize);
            let inside = r >= 0 && c >= 0 && (r as usize) < image.height() && (c as usize) < image.width();
            let (r, c) = (r as usize, c as usize);
            let label = if !inside {
                Label::Outside
            } else if block.contains(r, c) {
                Label::Missing
            } else if others.iter().any(|o| o.contains(r, c)) {
                Label::Outside
            } else {
                Label::Support
            };
            labels.push(label);
            samples.push(if label == Label::Support { image.get(r, c) } else { 0.0 });
        }
    }
    let mask = RegionMask::from_labels(cols, rows, labels).map_err(|e| block_error(pattern, index, e))?;
    Ok(BlockWindow {
        mask,
        signal: SampleGrid::new(cols, rows, samples)?,
        origin,
    })
}

fn block_error(pattern: &LossPattern, index: usize, source: fse_core::Error) -> ConcealError {
    let (row, col) = pattern.origins[index];
    ConcealError::Block { index, row, col, source }
}

enum Engine {
    Spectral(Box<Spectrum>),
    Spatial(Box<SpatialEngine>, Box<ModelState>),
}

/// Incremental extrapolation of one window.
pub struct BlockRun<'a> {
    engine: Engine,
    compensation: Compensation,
    fft: &'a RustFft2d,
}

impl<'a> BlockRun<'a> {
    /// Spectral engine for the DFT basis, sample-domain engine otherwise.
    pub fn new(window: &BlockWindow, config: &ExtrapolationConfig, fft: &'a RustFft2d) -> fse_core::Result<Self> {
        config.validate()?;
        let engine = match config.basis {
            BasisKind::Dft2d => {
                if fft.size() != config.transform_size {
                    return Err(fse_core::Error::ShapeMismatch("transform size".into()));
                }
                let weight = build_isotropic_weight(&window.mask, config.rho_hat)?;
                let mut spec = init_spectra(&window.signal, &window.mask, &weight, fft)?;
                if config.compensation == Compensation::Full {
                    spec.prepare_full(fft)?;
                }
                Engine::Spectral(Box::new(spec))
            }
            BasisKind::Dct2d => {
                let engine = SpatialEngine::new(&window.mask, config)?;
                let state = engine.init(&window.signal)?;
                Engine::Spatial(Box::new(engine), Box::new(state))
            }
        };
        Ok(Self {
            engine,
            compensation: config.compensation,
            fft,
        })
    }

    pub fn iteration(&self) -> usize {
        match &self.engine {
            Engine::Spectral(s) => s.iteration(),
            Engine::Spatial(_, st) => st.iteration(),
        }
    }

    /// Continues until `iterations` have been applied in total.
    pub fn advance_to(&mut self, iterations: usize) -> fse_core::Result<()> {
        match &mut self.engine {
            Engine::Spectral(s) => s.run_to(iterations, self.compensation),
            Engine::Spatial(e, st) => {
                while st.iteration() < iterations {
                    if e.step(st)? == Step::Converged {
                        break;
                    }
                }
                Ok(())
            }
        }
    }

    pub fn model(&self) -> fse_core::Result<SampleGrid> {
        match &self.engine {
            Engine::Spectral(s) => s.synthesize_model(self.fft),
            Engine::Spatial(e, st) => e.synthesize(st),
        }
    }

    pub fn trace(&self) -> &[TraceRecord] {
        match &self.engine {
            Engine::Spectral(s) => s.trace(),
            Engine::Spatial(_, st) => st.trace(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcealmentReport {
    pub image: String,
    pub algorithm: Algorithm,
    pub config: PipelineConfig,
    pub blocks: usize,
    /// Over all missing samples, against the original.
    #[serde(skip)]
    pub psnr: Option<Psnr>,
    pub sec_per_block: f64,
    #[serde(skip)]
    pub traces: Option<Vec<Vec<TraceRecord>>>,
}

impl ConcealmentReport {
    pub fn psnr_db(&self) -> f64 {
        self.psnr.map_or(f64::INFINITY, Psnr::db)
    }
}

struct BlockResult {
    model: SampleGrid,
    window: BlockWindow,
    seconds: f64,
    trace: Vec<TraceRecord>,
}

fn check_pattern(image: &SampleGrid, pattern: &LossPattern) -> Result<()> {
    if pattern.image_width != image.width() || pattern.image_height != image.height() {
        return Err(ConcealError::Pattern(format!(
            "pattern for {}x{} applied to a {}x{} image",
            pattern.image_width,
            pattern.image_height,
            image.width(),
            image.height()
        )));
    }
    Ok(())
}

fn run_block(
    image: &SampleGrid,
    pattern: &LossPattern,
    index: usize,
    config: &PipelineConfig,
    ex: &ExtrapolationConfig,
    fft: &RustFft2d,
) -> Result<BlockResult> {
    let start = Instant::now();
    let window = block_window(image, pattern, index, config.support)?;
    let wrap = |e| block_error(pattern, index, e);
    let mut run = BlockRun::new(&window, ex, fft).map_err(wrap)?;
    run.advance_to(ex.iterations).map_err(wrap)?;
    let model = run.model().map_err(wrap)?;
    let seconds = start.elapsed().as_secs_f64();
    Ok(BlockResult {
        model,
        window,
        seconds,
        trace: run.trace().to_vec(),
    })
}

fn missing_positions(window: &BlockWindow) -> impl Iterator<Item = ((usize, usize), (usize, usize))> + '_ {
    window
        .mask
        .positions(Label::Missing)
        .map(|(m, n)| ((m, n), window.image_pos(m, n)))
}

/// Conceals every block of `pattern`. Blocks run in parallel on the current
/// rayon pool; results are assembled in pattern order.
pub fn conceal(
    image: &SampleGrid,
    pattern: &LossPattern,
    algorithm: Algorithm,
    config: &PipelineConfig,
) -> Result<(SampleGrid, ConcealmentReport)> {
    check_pattern(image, pattern)?;
    let ex = config.extrapolation(algorithm);
    ex.validate()?;
    let fft = RustFft2d::new(config.transform_size);
    let results: Vec<BlockResult> = (0..pattern.len())
        .into_par_iter()
        .map(|i| run_block(image, pattern, i, config, &ex, &fft))
        .collect::<Result<_>>()?;

    let mut restored = image.clone();
    let mut sse = 0.0;
    let mut count = 0;
    for res in &results {
        for ((m, n), (r, c)) in missing_positions(&res.window) {
            let v = res.model.get(m, n).clamp(0.0, PEAK);
            restored.set(r, c, v)?;
            let d = image.get(r, c) - v;
            sse += d * d;
            count += 1;
        }
    }
    let psnr = if count == 0 {
        Psnr::Identical
    } else {
        Psnr::from_sse(sse, count, PEAK)?
    };
    let seconds: f64 = results.iter().map(|r| r.seconds).sum();
    let report = ConcealmentReport {
        image: String::new(),
        algorithm,
        config: *config,
        blocks: results.len(),
        psnr: Some(psnr),
        sec_per_block: if results.is_empty() { 0.0 } else { seconds / results.len() as f64 },
        traces: config
            .keep_traces
            .then(|| results.into_iter().map(|r| r.trace).collect()),
    };
    Ok((restored, report))
}

/// PSNR after `iterations[j]` iterations for one algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub algorithm: Algorithm,
    pub psnr: Vec<Psnr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub iterations: Vec<usize>,
    pub series: Vec<Series>,
}

impl CurveTable {
    /// Highest PSNR of series `s` and the first checkpoint reaching it.
    pub fn peak(&self, s: usize) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (&it, p) in self.iterations.iter().zip(&self.series[s].psnr) {
            let db = p.db();
            if best.is_none_or(|(_, b)| db > b) {
                best = Some((it, db));
            }
        }
        best
    }

    /// PSNR of series `s` at checkpoint `iteration`.
    pub fn at(&self, s: usize, iteration: usize) -> Option<f64> {
        let j = self.iterations.iter().position(|&i| i == iteration)?;
        Some(self.series[s].psnr[j].db())
    }
}

/// Checkpoints `stride, 2 stride, ...` up to `max_iterations`.
pub fn checkpoints(max_iterations: usize, stride: usize) -> Vec<usize> {
    if stride == 0 {
        return Vec::new();
    }
    (1..=max_iterations / stride).map(|j| j * stride).collect()
}

/// PSNR over iterations, one continued run per block and algorithm.
pub fn psnr_vs_iterations(
    image: &SampleGrid,
    pattern: &LossPattern,
    algorithms: &[Algorithm],
    max_iterations: usize,
    stride: usize,
    config: &PipelineConfig,
) -> Result<CurveTable> {
    if stride == 0 {
        return Err(ConcealError::Config("checkpoint stride must be at least 1".into()));
    }
    check_pattern(image, pattern)?;
    let its = checkpoints(max_iterations, stride);
    let fft = RustFft2d::new(config.transform_size);
    let mut series = Vec::with_capacity(algorithms.len());
    for &algorithm in algorithms {
        if its.is_empty() {
            series.push(Series { algorithm, psnr: Vec::new() });
            continue;
        }
        let mut pc = *config;
        pc.iterations = max_iterations.max(1);
        let ex = pc.extrapolation(algorithm);
        ex.validate()?;
        let per_block: Vec<(Vec<f64>, usize)> = (0..pattern.len())
            .into_par_iter()
            .map(|i| {
                let window = block_window(image, pattern, i, config.support)?;
                let wrap = |e| block_error(pattern, i, e);
                let mut run = BlockRun::new(&window, &ex, &fft).map_err(wrap)?;
                let mut sse = Vec::with_capacity(its.len());
                let mut count = 0;
                for &it in &its {
                    run.advance_to(it).map_err(wrap)?;
                    let model = run.model().map_err(wrap)?;
                    let mut acc = 0.0;
                    count = 0;
                    for ((m, n), (r, c)) in missing_positions(&window) {
                        let d = image.get(r, c) - model.get(m, n).clamp(0.0, PEAK);
                        acc += d * d;
                        count += 1;
                    }
                    sse.push(acc);
                }
                Ok((sse, count))
            })
            .collect::<Result<_>>()?;
        let count: usize = per_block.iter().map(|b| b.1).sum();
        let psnr = (0..its.len())
            .map(|j| {
                if count == 0 {
                    return Ok(Psnr::Identical);
                }
                let sse: f64 = per_block.iter().map(|b| b.0[j]).sum();
                Psnr::from_sse(sse, count, PEAK)
            })
            .collect::<fse_core::Result<_>>()?;
        series.push(Series { algorithm, psnr });
    }
    Ok(CurveTable { iterations: its, series })
}

/// Effective compensation factors chosen by full compensation over all blocks,
/// degenerate selections excluded.
pub fn gamma_distribution(image: &SampleGrid, pattern: &LossPattern, config: &PipelineConfig) -> Result<Vec<f64>> {
    let mut pc = *config;
    pc.keep_traces = true;
    let (_, report) = conceal(image, pattern, Algorithm::Ofse, &pc)?;
    Ok(report
        .traces
        .unwrap_or_default()
        .iter()
        .flatten()
        .filter(|r| !r.degenerate)
        .map(|r| r.gamma_effective)
        .collect())
}

/// Fixed-width histogram over `[lo, hi)`; values outside are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], lo: f64, hi: f64, width: f64) -> Self {
        let bins = ((hi - lo) / width).round() as usize;
        let mut counts = vec![0; bins];
        for &v in values {
            let b = ((v - lo) / width).floor();
            if b >= 0.0 && (b as usize) < bins {
                counts[b as usize] += 1;
            }
        }
        Self { lo, width, counts }
    }

    /// `[start, end)` of the most populated bin, lowest on ties.
    pub fn mode(&self) -> Option<(f64, f64)> {
        let (i, &c) = self
            .counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
        (c > 0).then(|| {
            let start = self.lo + i as f64 * self.width;
            (start, start + self.width)
        })
    }
}

/// Zeroes every lost block, for visualization.
pub fn damage(image: &SampleGrid, pattern: &LossPattern) -> Result<SampleGrid> {
    check_pattern(image, pattern)?;
    let mut out = image.clone();
    for r in pattern.rects() {
        for m in r.row..r.row + r.height {
            for n in r.col..r.col + r.width {
                out.set(m, n, 0.0)?;
            }
        }
    }
    Ok(out)
}

/// Extrapolates a single window given by a missing rectangle inside a
/// `support` frame, for inspection.
pub fn extrapolate_window(
    image: &SampleGrid,
    block: Rect,
    algorithm: Algorithm,
    config: &PipelineConfig,
) -> Result<(BlockWindow, SampleGrid, Vec<TraceRecord>)> {
    let pattern = LossPattern::new(
        image.width(),
        image.height(),
        (block.height, block.width),
        vec![(block.row, block.col)],
    )?;
    let ex = config.extrapolation(algorithm);
    ex.validate()?;
    let fft = RustFft2d::new(config.transform_size);
    let res = run_block(image, &pattern, 0, config, &ex, &fft)?;
    Ok((res.window, res.model, res.trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{generate_grid_pattern, DEFAULT_SPACING};

    fn texture(w: usize, h: usize) -> SampleGrid {
        SampleGrid::from_fn(w, h, |m, n| {
            128.0 + 60.0 * ((m as f64) * 0.21).sin() + 40.0 * ((n as f64) * 0.13 + (m as f64) * 0.05).cos()
        })
        .unwrap()
    }

    fn small_config() -> PipelineConfig {
        PipelineConfig {
            iterations: 30,
            transform_size: 32,
            support: 8,
            ..Default::default()
        }
    }

    #[test]
    fn window_labels_at_border_and_neighbors() {
        let img = texture(40, 40);
        let p = LossPattern::new(40, 40, (8, 8), vec![(0, 0), (8, 16)]).unwrap();
        let w = block_window(&img, &p, 0, 8).unwrap();
        assert_eq!((w.mask.width(), w.mask.height()), (24, 24));
        assert_eq!(w.origin, (-8, -8));
        assert_eq!(w.mask.label(0, 0), Label::Outside);
        assert_eq!(w.mask.label(8, 8), Label::Missing);
        assert_eq!(w.mask.label(16, 16), Label::Support);
        // image (8, 16) is the second block
        assert_eq!(w.mask.label(16, 8 + 16), Label::Outside);
        assert_eq!(w.mask.count(Label::Missing), 64);
    }

    #[test]
    fn write_back_touches_only_missing() {
        let img = texture(64, 64);
        let p = generate_grid_pattern(64, 64, (8, 8), 8, 24, None).unwrap();
        let (out, report) = conceal(&img, &p, Algorithm::Fofse { gamma: 0.3 }, &small_config()).unwrap();
        let rects = p.rects();
        for m in 0..64 {
            for n in 0..64 {
                if !rects.iter().any(|r| r.contains(m, n)) {
                    assert_eq!(out.get(m, n), img.get(m, n));
                }
            }
        }
        assert_eq!(report.blocks, p.len());
        assert!(report.psnr_db() > 20.0, "{}", report.psnr_db());
    }

    #[test]
    fn empty_pattern_is_identical() {
        let img = texture(32, 32);
        let p = LossPattern::new(32, 32, (16, 16), vec![]).unwrap();
        let (out, report) = conceal(&img, &p, Algorithm::Fse, &small_config()).unwrap();
        assert_eq!(out, img);
        assert_eq!(report.psnr, Some(Psnr::Identical));
    }

    #[test]
    fn order_does_not_matter() {
        let img = texture(96, 96);
        let p = generate_grid_pattern(96, 96, (8, 8), 8, 24, None).unwrap();
        let mut rev = p.clone();
        rev.origins.reverse();
        for alg in [Algorithm::Ofse, Algorithm::Fofse { gamma: 0.2 }] {
            let (a, _) = conceal(&img, &p, alg, &small_config()).unwrap();
            let (b, _) = conceal(&img, &rev, alg, &small_config()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn dct_runs_through_the_sample_domain_engine() {
        let img = texture(48, 48);
        let p = generate_grid_pattern(48, 48, (8, 8), 8, DEFAULT_SPACING, None).unwrap();
        let cfg = PipelineConfig {
            basis: BasisKind::Dct2d,
            iterations: 10,
            ..small_config()
        };
        let (_, report) = conceal(&img, &p, Algorithm::Fofse { gamma: 0.5 }, &cfg).unwrap();
        assert!(report.psnr_db().is_finite());
    }

    #[test]
    fn curve_matches_separate_runs() {
        let img = texture(64, 64);
        let p = generate_grid_pattern(64, 64, (8, 8), 8, 24, None).unwrap();
        let cfg = small_config();
        let alg = Algorithm::Fofse { gamma: 0.4 };
        let table = psnr_vs_iterations(&img, &p, &[alg], 30, 10, &cfg).unwrap();
        assert_eq!(table.iterations, vec![10, 20, 30]);
        for (j, &it) in table.iterations.iter().enumerate() {
            let (_, r) = conceal(&img, &p, alg, &PipelineConfig { iterations: it, ..cfg }).unwrap();
            assert!((table.series[0].psnr[j].db() - r.psnr_db()).abs() < 1e-9);
        }
        assert!(psnr_vs_iterations(&img, &p, &[alg], 5, 10, &cfg).unwrap().iterations.is_empty());
        assert!(psnr_vs_iterations(&img, &p, &[alg], 5, 0, &cfg).is_err());
    }

    #[test]
    fn histogram_mode() {
        let h = Histogram::new(&[0.12, 0.13, 0.31, 0.9, -4.0], 0.0, 1.0, 0.05);
        assert_eq!(h.counts.len(), 20);
        let (a, b) = h.mode().unwrap();
        assert!((a - 0.10).abs() < 1e-12 && (b - 0.15).abs() < 1e-12);
        assert_eq!(Histogram::new(&[], 0.0, 1.0, 0.1).mode(), None);
    }

    #[test]
    fn pattern_size_mismatch() {
        let img = texture(32, 32);
        let p = LossPattern::new(40, 40, (8, 8), vec![(0, 0)]).unwrap();
        assert!(matches!(
            conceal(&img, &p, Algorithm::Fse, &small_config()),
            Err(ConcealError::Pattern(_))
        ));
    }
}
