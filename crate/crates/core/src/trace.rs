use alloc::format;
use alloc::string::String;

use num_complex::Complex64;

use crate::basis::Index;

/// One applied iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// 1-based iteration number.
    pub iteration: usize,
    pub index: Index,
    /// Weighted projection coefficient of the selected function.
    pub projection: Complex64,
    /// Expansion coefficient actually added to the model.
    pub coefficient: Complex64,
    /// `Re(coefficient / projection)`.
    pub gamma_effective: f64,
    /// `sum w r^2` after the update.
    pub weighted_energy: f64,
    /// Full compensation was undefined and the raw projection was used.
    pub degenerate: bool,
}

impl TraceRecord {
    pub const CSV_HEADER: &'static str = "nu,u_k1,u_k2,abs_p_u,abs_c_u,gamma_effective,weighted_energy";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e}",
            self.iteration,
            self.index.k1,
            self.index.k2,
            self.projection.norm(),
            self.coefficient.norm(),
            self.gamma_effective,
            self.weighted_energy
        )
    }
}

pub(crate) fn effective_gamma(coefficient: Complex64, projection: Complex64) -> f64 {
    if projection.norm_sqr() == 0.0 {
        return 0.0;
    }
    (coefficient / projection).re
}
