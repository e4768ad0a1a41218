//! Closed-form operation counts per extrapolated block.
//!
//! `M x N` is the area being reconstructed, `T` the transform size and `I` the
//! iteration count. Terms with `T^2 / 2` are rounded up for odd `T`, and a
//! per-iteration term that would be negative (only possible for `T = 1`) is
//! counted as zero.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostAlgorithm {
    /// Sample-domain iteration with full compensation.
    Ofse,
    /// Spectral iteration with constant compensation.
    Fofse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpCategory {
    Mul,
    Mem,
    Add,
    Func,
}

impl OpCategory {
    pub const ALL: [OpCategory; 4] = [OpCategory::Mul, OpCategory::Mem, OpCategory::Add, OpCategory::Func];

    pub fn name(self) -> &'static str {
        match self {
            OpCategory::Mul => "MUL",
            OpCategory::Mem => "MEM",
            OpCategory::Add => "ADD",
            OpCategory::Func => "FUNC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostReport {
    pub mul: u128,
    pub mem: u128,
    pub add: u128,
    pub func: u128,
    /// One-dimensional FFTs of length `fft_length`, into the spectral domain and back.
    pub ffts: u128,
    pub fft_length: usize,
}

impl CostReport {
    pub fn get(&self, category: OpCategory) -> u128 {
        match category {
            OpCategory::Mul => self.mul,
            OpCategory::Mem => self.mem,
            OpCategory::Add => self.add,
            OpCategory::Func => self.func,
        }
    }

    /// Sum of the four scalar categories.
    pub fn total(&self) -> u128 {
        self.mul + self.mem + self.add + self.func
    }
}

// base + I * ceil(max(0, half_t2 * T^2 / 2 + offset)); all coefficients doubled
fn count(base: u128, iterations: u128, t2: u128, doubled_coeff: i128, offset: i128) -> u128 {
    let doubled = doubled_coeff * t2 as i128 + 2 * offset;
    let per_iter = if doubled <= 0 { 0 } else { (doubled as u128).div_ceil(2) };
    base + iterations * per_iter
}

pub fn count_ops(algorithm: CostAlgorithm, m: usize, n: usize, t: usize, iterations: usize) -> CostReport {
    let mn = (m as u128) * (n as u128);
    let t2 = (t as u128) * (t as u128);
    let i = iterations as u128;
    match algorithm {
        CostAlgorithm::Ofse => CostReport {
            mul: count(mn, i, t2, 49, -16),
            mem: count(2 * mn, i, t2, 20, 2),
            add: count(0, i, t2, 28, -16),
            func: count(0, i, t2, 9, -1),
            ffts: 2 * t as u128,
            fft_length: t,
        },
        CostAlgorithm::Fofse => CostReport {
            mul: count(mn, i, t2, 18, -12),
            mem: count(2 * mn, i, t2, 7, 10),
            add: count(0, i, t2, 12, 5),
            func: count(0, i, t2, 3, 4),
            ffts: 2 * t as u128,
            fft_length: t,
        },
    }
}
