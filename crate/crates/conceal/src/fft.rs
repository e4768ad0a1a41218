use std::sync::Arc;

use fse_core::{Complex64, Transform2d};
use rustfft::{Fft, FftPlanner};

/// Row-column 2D FFT on top of `rustfft`.
#[derive(Clone)]
pub struct RustFft2d {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for RustFft2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RustFft2d").field("size", &self.size).finish()
    }
}

impl RustFft2d {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    fn apply(&self, fft: &dyn Fft<f64>, data: &mut [Complex64]) {
        let t = self.size;
        assert_eq!(data.len(), t * t, "buffer is not T x T");
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        // rustfft transforms every consecutive chunk of length t
        fft.process_with_scratch(data, &mut scratch);
        let mut cols = vec![Complex64::new(0.0, 0.0); t * t];
        transpose(data, &mut cols, t);
        fft.process_with_scratch(&mut cols, &mut scratch);
        transpose(&cols, data, t);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], t: usize) {
    for r in 0..t {
        for c in 0..t {
            dst[c * t + r] = src[r * t + c];
        }
    }
}

impl Transform2d for RustFft2d {
    fn size(&self) -> usize {
        self.size
    }

    fn forward(&self, data: &mut [Complex64]) {
        self.apply(self.forward.as_ref(), data);
    }

    fn inverse(&self, data: &mut [Complex64]) {
        self.apply(self.inverse.as_ref(), data);
    }
}
