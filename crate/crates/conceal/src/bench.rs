//! Wall-clock timing per block, one block at a time on the calling thread.

use std::hint::black_box;
use std::time::Instant;

use fse_core::cost::{count_ops, CostAlgorithm};
use fse_core::spatial::{Compensation, SpatialEngine};
use fse_core::SampleGrid;

use crate::error::Result;
use crate::fft::RustFft2d;
use crate::pattern::LossPattern;
use crate::pipeline::{block_window, Algorithm, BlockRun, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BenchEngine {
    /// Full compensation evaluated in the sample domain.
    OfseSpatial,
    /// Full compensation evaluated on spectra.
    OfseSpectral,
    Fofse(f64),
    Fse,
}

impl BenchEngine {
    pub fn label(self) -> String {
        match self {
            BenchEngine::OfseSpatial => "ofse".into(),
            BenchEngine::OfseSpectral => "ofse-spectral".into(),
            BenchEngine::Fofse(g) => format!("fofse({g})"),
            BenchEngine::Fse => "fse".into(),
        }
    }

    pub fn parse(s: &str, gamma: f64) -> Option<Self> {
        match s {
            "ofse" => Some(BenchEngine::OfseSpatial),
            "ofse-spectral" => Some(BenchEngine::OfseSpectral),
            "fofse" => Some(BenchEngine::Fofse(gamma)),
            "fse" => Some(BenchEngine::Fse),
            _ => None,
        }
    }

    fn cost_algorithm(self) -> Option<CostAlgorithm> {
        match self {
            BenchEngine::OfseSpatial => Some(CostAlgorithm::Ofse),
            BenchEngine::Fofse(_) => Some(CostAlgorithm::Fofse),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub engine: BenchEngine,
    pub iterations: usize,
    pub blocks: usize,
    pub repetitions: usize,
    /// Seconds per block.
    pub mean: f64,
    pub stddev: f64,
    /// Analytic operation count per block, where the model covers the engine.
    pub cost_ops: Option<u128>,
}

fn mean_stddev(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Times each engine on the first `max_blocks` blocks of `pattern`. Window
/// extraction is excluded from the measurement.
pub fn bench(
    image: &SampleGrid,
    pattern: &LossPattern,
    engines: &[BenchEngine],
    config: &PipelineConfig,
    warmup: usize,
    repetitions: usize,
    max_blocks: Option<usize>,
) -> Result<Vec<BenchRow>> {
    if repetitions == 0 {
        return Err(crate::error::ConcealError::Config("repetitions must be at least 1".into()));
    }
    let count = pattern.len().min(max_blocks.unwrap_or(usize::MAX));
    let windows = (0..count)
        .map(|i| block_window(image, pattern, i, config.support))
        .collect::<Result<Vec<_>>>()?;
    let fft = RustFft2d::new(config.transform_size);
    let mut rows = Vec::with_capacity(engines.len());
    for &engine in engines {
        let algorithm = match engine {
            BenchEngine::OfseSpatial | BenchEngine::OfseSpectral => Algorithm::Ofse,
            BenchEngine::Fofse(g) => Algorithm::Fofse { gamma: g },
            BenchEngine::Fse => Algorithm::Fse,
        };
        let ex = config.extrapolation(algorithm);
        ex.validate()?;
        let mut samples = Vec::with_capacity(repetitions * count);
        for rep in 0..warmup + repetitions {
            for w in &windows {
                let start = Instant::now();
                let model = if engine == BenchEngine::OfseSpatial {
                    debug_assert_eq!(ex.compensation, Compensation::Full);
                    SpatialEngine::new(&w.mask, &ex)?.run(&w.signal)?.model
                } else {
                    let mut run = BlockRun::new(w, &ex, &fft)?;
                    run.advance_to(ex.iterations)?;
                    run.model()?
                };
                black_box(model);
                if rep >= warmup {
                    samples.push(start.elapsed().as_secs_f64());
                }
            }
        }
        let (mean, stddev) = if samples.is_empty() { (0.0, 0.0) } else { mean_stddev(&samples) };
        rows.push(BenchRow {
            engine,
            iterations: config.iterations,
            blocks: count,
            repetitions,
            mean,
            stddev,
            cost_ops: engine.cost_algorithm().map(|a| {
                count_ops(a, pattern.block.0, pattern.block.1, config.transform_size, config.iterations).total()
            }),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistics() {
        let (m, s) = mean_stddev(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(mean_stddev(&[4.0]), (4.0, 0.0));
    }

    #[test]
    fn engine_names() {
        for e in ["ofse", "ofse-spectral", "fse"] {
            assert_eq!(BenchEngine::parse(e, 0.2).unwrap().label(), e);
        }
        assert_eq!(BenchEngine::parse("fofse", 0.2).unwrap().label(), "fofse(0.2)");
        assert!(BenchEngine::parse("x", 0.2).is_none());
    }
}
