//! Run configuration with TOML round-trip. Precedence is command-line flags,
//! then the config file, then the defaults below.

use std::path::{Path, PathBuf};

use fse_core::basis::BasisKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ConcealError, Result};
use crate::pattern::DEFAULT_SPACING;
use crate::pipeline::{Algorithm, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmName {
    Fse,
    Ofse,
    Fofse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BasisName {
    Dft,
    Dct,
}

impl From<BasisName> for BasisKind {
    fn from(b: BasisName) -> Self {
        match b {
            BasisName::Dft => BasisKind::Dft2d,
            BasisName::Dct => BasisKind::Dct2d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: AlgorithmName,
    pub gamma: f64,
    pub iterations: usize,
    pub fft_size: usize,
    pub rho_hat: f64,
    pub basis: BasisName,
    /// Block edge length.
    pub block: usize,
    /// Support frame width.
    pub support: usize,
    /// Pattern file; the grid generator is used when absent.
    pub pattern: Option<PathBuf>,
    /// Grid origin spacing.
    pub spacing: usize,
    /// Place this many random isolated blocks instead of the grid.
    pub random_blocks: Option<usize>,
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    /// Checkpoint stride of iteration curves.
    pub stride: usize,
    pub out_dir: PathBuf,
    pub warmup: usize,
    pub repetitions: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: AlgorithmName::Fofse,
            gamma: 0.2,
            iterations: 200,
            fft_size: 64,
            rho_hat: 0.8,
            basis: BasisName::Dft,
            block: 16,
            support: 16,
            pattern: None,
            spacing: DEFAULT_SPACING,
            random_blocks: None,
            seed: 0,
            threads: 0,
            stride: 1,
            out_dir: PathBuf::from("out"),
            warmup: 1,
            repetitions: 5,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ConcealError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConcealError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn algorithm(&self) -> Algorithm {
        match self.algorithm {
            AlgorithmName::Fse => Algorithm::Fse,
            AlgorithmName::Ofse => Algorithm::Ofse,
            AlgorithmName::Fofse => Algorithm::Fofse { gamma: self.gamma },
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            iterations: self.iterations,
            transform_size: self.fft_size,
            rho_hat: self.rho_hat,
            support: self.support,
            basis: self.basis.into(),
            keep_traces: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ConcealError::Config(m.into()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if !(self.rho_hat > 0.0 && self.rho_hat < 1.0) {
            return bad("rho-hat must lie in (0, 1)");
        }
        if self.block == 0 {
            return bad("block size must be at least 1");
        }
        if self.block + 2 * self.support > self.fft_size {
            return bad("block plus support frame exceeds the FFT size");
        }
        if self.stride == 0 {
            return bad("stride must be at least 1");
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        Ok(())
    }

    /// SHA-256 over the TOML form, ignoring settings that do not change results.
    pub fn fingerprint(&self) -> String {
        self.fingerprint_with("")
    }

    /// Like [`fingerprint`](Self::fingerprint), also covering command-specific
    /// arguments rendered into `extra`.
    pub fn fingerprint_with(&self, extra: &str) -> String {
        let neutral = RunConfig {
            threads: 0,
            out_dir: PathBuf::new(),
            warmup: 0,
            ..self.clone()
        };
        let mut text = neutral.to_toml();
        if !extra.is_empty() {
            text.push_str("# ");
            text.push_str(extra);
            text.push('\n');
        }
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
