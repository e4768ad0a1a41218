//! `fse` command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fse_core::grid::Label;
use fse_core::{Rect, SampleGrid};

use crate::bench::{bench, BenchEngine};
use crate::config::{AlgorithmName, BasisName, RunConfig};
use crate::error::{ConcealError, Result};
use crate::io::{read_image, GrayImage};
use crate::pattern::{format_pattern, generate_grid_pattern, generate_random_pattern, parse_pattern, LossPattern};
use crate::pipeline::{self, Algorithm, Histogram};
use crate::report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Default output directory when neither flag nor config file sets one.
pub const OUT_DIR_ENV: &str = "FSE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "fse", version, about = "Frequency-selective extrapolation for block-loss concealment")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extrapolate a single block and dump its window and trace.
    Extrapolate {
        image: PathBuf,
        /// Top row of the missing block.
        #[arg(long)]
        row: usize,
        /// Left column of the missing block.
        #[arg(long)]
        col: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Conceal a loss pattern in one or more images.
    Conceal {
        #[arg(required = true)]
        images: Vec<PathBuf>,
        /// Also write per-iteration traces (and, for ofse, the gamma histogram).
        #[arg(long)]
        traces: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Time engines per block.
    Bench {
        image: PathBuf,
        /// Comma-separated: ofse, ofse-spectral, fofse, fse.
        #[arg(long, value_delimiter = ',', default_value = "ofse,fofse")]
        engines: Vec<String>,
        #[arg(long)]
        warmup: Option<usize>,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Only time the first N blocks of the pattern.
        #[arg(long)]
        max_blocks: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// PSNR over iterations for several compensation factors.
    SweepGamma {
        #[arg(required = true)]
        images: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,0.7,0.9")]
        gammas: Vec<String>,
        /// Defaults to --iterations.
        #[arg(long)]
        max_iterations: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Analytic operation counts per block.
    CostModel {
        #[arg(long, default_value_t = 16)]
        m: usize,
        #[arg(long, default_value_t = 16)]
        n: usize,
        /// Iteration counts to evaluate; defaults to 10, 20, ..., 500.
        #[arg(long, value_delimiter = ',')]
        iteration_points: Vec<usize>,
        /// Multiply every count by this many blocks.
        #[arg(long, default_value_t = 1)]
        blocks: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Default, Args)]
struct Common {
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmName>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    fft_size: Option<usize>,
    #[arg(long)]
    rho_hat: Option<f64>,
    #[arg(long, value_enum)]
    basis: Option<BasisName>,
    /// Block edge length.
    #[arg(long)]
    block: Option<usize>,
    /// Support frame width.
    #[arg(long)]
    support: Option<usize>,
    /// Pattern file (`row col height width` per line).
    #[arg(long)]
    pattern: Option<PathBuf>,
    /// Origin spacing of the generated grid pattern.
    #[arg(long)]
    spacing: Option<usize>,
    /// Random isolated blocks instead of the grid, placed from --seed.
    #[arg(long)]
    random_blocks: Option<usize>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint stride for iteration curves.
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(ConcealError),
}

impl From<ConcealError> for Failure {
    fn from(e: ConcealError) -> Self {
        match e {
            ConcealError::Config(m) => Failure::Usage(m),
            e => Failure::Runtime(e),
        }
    }
}

fn resolve(config: Option<&Path>, c: &Common) -> Result<RunConfig> {
    let (mut cfg, file_sets_out_dir) = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConcealError::io(path, e))?;
            let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConcealError::Config(e.to_string()))?;
            (RunConfig::from_toml(&text)?, table.contains_key("out_dir"))
        }
        None => (RunConfig::default(), false),
    };
    if !file_sets_out_dir {
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
            cfg.out_dir = dir.into();
        }
    }
    macro_rules! take {
        ($($f:ident),*) => { $(if let Some(v) = c.$f.clone() { cfg.$f = v; })* };
    }
    take!(algorithm, gamma, iterations, fft_size, rho_hat, basis, block, support, spacing, threads, seed, stride, out_dir);
    if c.pattern.is_some() {
        cfg.pattern = c.pattern.clone();
    }
    if c.random_blocks.is_some() {
        cfg.random_blocks = c.random_blocks;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn build_pattern(cfg: &RunConfig, img: &GrayImage) -> Result<LossPattern> {
    let block = (cfg.block, cfg.block);
    if let Some(path) = &cfg.pattern {
        let text = std::fs::read_to_string(path).map_err(|e| ConcealError::io(path, e))?;
        return parse_pattern(&text, img.width, img.height);
    }
    match cfg.random_blocks {
        Some(n) => generate_random_pattern(img.width, img.height, block, cfg.support, n, cfg.seed),
        None => generate_grid_pattern(img.width, img.height, block, cfg.support, cfg.spacing, None),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned())
}

/// Outputs are collected first and written only once everything succeeded.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, name: String, data: Vec<u8>) {
        self.files.push((PathBuf::from(name), data));
    }

    fn add_pgm(&mut self, name: String, grid: &SampleGrid) {
        self.add(name, crate::io::encode_pgm(&GrayImage::from_grid(grid)));
    }

    fn write(self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| ConcealError::io(dir, e))?;
        for (name, data) in self.files {
            let path = dir.join(name);
            std::fs::write(&path, data).map_err(|e| ConcealError::io(&path, e))?;
            eprintln!("wrote {}", path.display());
        }
        Ok(())
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| ConcealError::Config(e.to_string()))
}

fn parse_gammas(raw: &[String]) -> std::result::Result<Vec<f64>, Failure> {
    let gammas: Vec<f64> = raw
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|g| *g > 0.0 && *g <= 1.0)
                .ok_or_else(|| Failure::Usage(format!("invalid gamma `{s}`, expected a value in (0, 1]")))
        })
        .collect::<std::result::Result<_, _>>()?;
    if gammas.is_empty() {
        return Err(Failure::Usage("empty gamma list".into()));
    }
    Ok(gammas)
}

fn execute(cli: Cli) -> std::result::Result<(), Failure> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Extrapolate { image, row, col, common } => {
            let cfg = resolve(config, &common)?;
            let img = read_image(&image)?;
            let grid = img.to_grid();
            let block = Rect::new(row, col, cfg.block, cfg.block);
            let pc = cfg.pipeline();
            let (window, model, trace) = pool(cfg.threads)?
                .install(|| pipeline::extrapolate_window(&grid, block, cfg.algorithm(), &pc))?;
            let view = SampleGrid::from_fn(window.mask.width(), window.mask.height(), |m, n| {
                match window.mask.label(m, n) {
                    Label::Missing => model.get(m, n),
                    _ => window.signal.get(m, n),
                }
            })
            .map_err(ConcealError::from)?;
            let fp = cfg.fingerprint_with(&format!("extrapolate row={row} col={col}"));
            let name = stem(&image);
            let mut out = Outputs::default();
            out.add_pgm(format!("{name}_window.pgm"), &view);
            out.add(format!("{name}_trace.csv"), report::trace_csv(&fp, &name, &[trace])?);
            out.write(&cfg.out_dir)?;
        }
        Command::Conceal { images, traces, common } => {
            let mut cfg = resolve(config, &common)?;
            let loaded = images
                .iter()
                .map(|p| read_image(p).map(|img| (stem(p), img)))
                .collect::<Result<Vec<_>>>()?;
            let patterns = loaded
                .iter()
                .map(|(_, img)| build_pattern(&cfg, img))
                .collect::<Result<Vec<_>>>()?;
            let algorithm = cfg.algorithm();
            if cfg.algorithm != AlgorithmName::Fofse {
                // gamma is meaningless here; keep it out of the fingerprint
                cfg.gamma = RunConfig::default().gamma;
            }
            let mut pc = cfg.pipeline();
            pc.keep_traces = traces;
            let fp = cfg.fingerprint_with("conceal");
            let threads = pool(cfg.threads)?;
            let mut out = Outputs::default();
            let mut reports = Vec::new();
            let mut hists = Vec::new();
            for ((name, img), pattern) in loaded.iter().zip(&patterns) {
                let grid = img.to_grid();
                let (restored, mut rep) = threads.install(|| pipeline::conceal(&grid, pattern, algorithm, &pc))?;
                rep.image = name.clone();
                eprintln!(
                    "{name}: {} blocks, {} {:.2} dB, {:.4} s/block",
                    rep.blocks,
                    algorithm.label(),
                    rep.psnr_db(),
                    rep.sec_per_block
                );
                out.add_pgm(format!("{name}_restored.pgm"), &restored);
                out.add_pgm(format!("{name}_damaged.pgm"), &pipeline::damage(&grid, pattern)?);
                out.add(format!("{name}_pattern.txt"), format_pattern(pattern).into_bytes());
                if let Some(tr) = rep.traces.take() {
                    if algorithm == Algorithm::Ofse {
                        let gammas: Vec<f64> = tr
                            .iter()
                            .flatten()
                            .filter(|r| !r.degenerate)
                            .map(|r| r.gamma_effective)
                            .collect();
                        hists.push((name.clone(), Histogram::new(&gammas, -1.0, 2.0, 0.05)));
                    }
                    out.add(format!("{name}_trace.csv"), report::trace_csv(&fp, name, &tr)?);
                }
                reports.push(rep);
            }
            out.add("report.csv".into(), report::report_csv(&fp, &reports)?);
            if !hists.is_empty() {
                out.add("gamma_histogram.csv".into(), report::histogram_csv(&fp, &hists)?);
            }
            out.write(&cfg.out_dir)?;
        }
        Command::Bench {
            image,
            engines,
            warmup,
            repetitions,
            max_blocks,
            common,
        } => {
            let mut cfg = resolve(config, &common)?;
            if let Some(w) = warmup {
                cfg.warmup = w;
            }
            if let Some(r) = repetitions {
                cfg.repetitions = r;
            }
            cfg.validate()?;
            let engines = engines
                .iter()
                .map(|e| {
                    BenchEngine::parse(e.trim(), cfg.gamma)
                        .ok_or_else(|| Failure::Usage(format!("unknown engine `{e}`")))
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let img = read_image(&image)?;
            let pattern = build_pattern(&cfg, &img)?;
            let rows = bench(
                &img.to_grid(),
                &pattern,
                &engines,
                &cfg.pipeline(),
                cfg.warmup,
                cfg.repetitions,
                max_blocks,
            )?;
            for r in &rows {
                eprintln!("{}: {:.6} s/block (sd {:.6})", r.engine.label(), r.mean, r.stddev);
            }
            let mut out = Outputs::default();
            let labels: Vec<String> = engines.iter().map(|e| e.label()).collect();
            let fp = cfg.fingerprint_with(&format!("bench engines={} max_blocks={max_blocks:?}", labels.join(",")));
            out.add("bench.csv".into(), report::bench_csv(&fp, &rows)?);
            out.write(&cfg.out_dir)?;
        }
        Command::SweepGamma {
            images,
            gammas,
            max_iterations,
            common,
        } => {
            let gammas = parse_gammas(&gammas)?;
            let cfg = resolve(config, &common)?;
            let max_it = max_iterations.unwrap_or(cfg.iterations);
            let loaded = images
                .iter()
                .map(|p| read_image(p).map(|img| (stem(p), img)))
                .collect::<Result<Vec<_>>>()?;
            let mut algorithms: Vec<Algorithm> = gammas.iter().map(|&gamma| Algorithm::Fofse { gamma }).collect();
            algorithms.extend([Algorithm::Fse, Algorithm::Ofse]);
            let threads = pool(cfg.threads)?;
            let mut curves = Vec::new();
            for (name, img) in &loaded {
                let pattern = build_pattern(&cfg, img)?;
                let table = threads.install(|| {
                    pipeline::psnr_vs_iterations(&img.to_grid(), &pattern, &algorithms, max_it, cfg.stride, &cfg.pipeline())
                })?;
                curves.push((name.clone(), table));
            }
            let fp = cfg.fingerprint_with(&format!("sweep-gamma gammas={gammas:?} max_iterations={max_it}"));
            let mut out = Outputs::default();
            out.add("curve.csv".into(), report::curve_csv(&fp, &curves)?);
            out.add("curve_summary.csv".into(), report::curve_summary_csv(&fp, &curves)?);
            out.write(&cfg.out_dir)?;
        }
        Command::CostModel {
            m,
            n,
            iteration_points,
            blocks,
            common,
        } => {
            let cfg = resolve(config, &common)?;
            let points = if iteration_points.is_empty() {
                (1..=50).map(|i| i * 10).collect()
            } else {
                iteration_points
            };
            if m == 0 || n == 0 || points.contains(&0) {
                return Err(Failure::Usage("M, N and iteration counts must be at least 1".into()));
            }
            let mut out = Outputs::default();
            out.add(
                "cost.csv".into(),
                report::cost_csv(
                    &cfg.fingerprint_with(&format!("cost-model m={m} n={n} points={points:?} blocks={blocks}")),
                    m,
                    n,
                    cfg.fft_size,
                    &points,
                    blocks,
                )?,
            );
            out.write(&cfg.out_dir)?;
        }
    }
    Ok(())
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
