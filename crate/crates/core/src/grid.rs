//! Sample grids, region masks, weighting functions and the PSNR metric.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Real-valued 2D sample array stored row-major. `m` indexes rows, `n` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl SampleGrid {
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimensions(format!("{width}x{height}")));
        }
        if samples.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} samples for a {width}x{height} grid",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i / width, i % width));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut samples = Vec::with_capacity(width * height);
        for m in 0..height {
            for n in 0..width {
                samples.push(f(m, n));
            }
        }
        Self::new(width, height, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.samples[m * self.width + n]
    }

    /// Writes one sample. Non-finite values are rejected.
    pub fn set(&mut self, m: usize, n: usize, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite(m, n));
        }
        self.samples[m * self.width + n] = value;
        Ok(())
    }

    pub fn same_shape(&self, other: &SampleGrid) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Role of a sample inside an extrapolation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    /// Known sample the model is fitted to.
    Support,
    /// Sample to be estimated.
    Missing,
    /// Excluded from fitting and from evaluation (image border, other losses).
    Outside,
}

/// Axis-aligned rectangle in grid coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub const fn new(row: usize, col: usize, height: usize, width: usize) -> Self {
        Self {
            row,
            col,
            height,
            width,
        }
    }

    #[inline]
    pub fn contains(&self, m: usize, n: usize) -> bool {
        m >= self.row && m < self.row + self.height && n >= self.col && n < self.col + self.width
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.row < other.row + other.height
            && other.row < self.row + self.height
            && self.col < other.col + other.width
            && other.col < self.col + self.width
            && self.height > 0
            && self.width > 0
            && other.height > 0
            && other.width > 0
    }

    fn fits(&self, width: usize, height: usize) -> bool {
        self.row + self.height <= height && self.col + self.width <= width
    }
}

/// Per-sample partition of a window into support, missing and outside areas.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    width: usize,
    height: usize,
    labels: Vec<Label>,
}

impl RegionMask {
    /// Builds a mask from explicit labels. At least one sample must be support.
    pub fn from_labels(width: usize, height: usize, labels: Vec<Label>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimensions(format!("{width}x{height}")));
        }
        if labels.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for a {width}x{height} mask",
                labels.len()
            )));
        }
        if !labels.contains(&Label::Support) {
            return Err(Error::NoSupport);
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, m: usize, n: usize) -> Label {
        self.labels[m * self.width + n]
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Iterates `(m, n)` over all samples carrying `label`, row-major.
    pub fn positions(&self, label: Label) -> impl Iterator<Item = (usize, usize)> + '_ {
        let width = self.width;
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == label)
            .map(move |(i, _)| (i / width, i % width))
    }
}

/// Labels `missing_rects` as missing, `outside_rects` as outside and everything
/// else as support.
pub fn build_region_mask(
    window_w: usize,
    window_h: usize,
    missing_rects: &[Rect],
    outside_rects: &[Rect],
) -> Result<RegionMask> {
    if window_w == 0 || window_h == 0 {
        return Err(Error::Dimensions(format!("{window_w}x{window_h}")));
    }
    for r in missing_rects.iter().chain(outside_rects) {
        if !r.fits(window_w, window_h) {
            return Err(Error::RectOutOfBounds(format!("{r:?}")));
        }
    }
    if missing_rects
        .iter()
        .any(|a| outside_rects.iter().any(|b| a.intersects(b)))
    {
        return Err(Error::OverlappingRects);
    }
    let mut labels = vec![Label::Support; window_w * window_h];
    for (rects, label) in [(missing_rects, Label::Missing), (outside_rects, Label::Outside)] {
        for r in rects {
            for m in r.row..r.row + r.height {
                for n in r.col..r.col + r.width {
                    labels[m * window_w + n] = label;
                }
            }
        }
    }
    RegionMask::from_labels(window_w, window_h, labels)
}

/// Nonnegative per-sample weights, zero everywhere except on support.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField {
    width: usize,
    height: usize,
    values: Vec<f64>,
    rho_hat: f64,
    center: (f64, f64),
}

impl WeightField {
    /// Weights from an arbitrary per-sample model `rho(m, n)`; the mask zeroes
    /// every non-support sample. `rho` must return values in `(0, 1]`.
    pub fn from_model(
        mask: &RegionMask,
        rho_hat: f64,
        center: (f64, f64),
        rho: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = vec![0.0; mask.width * mask.height];
        for (m, n) in mask.positions(Label::Support) {
            let v = rho(m, n);
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::NonFinite(m, n));
            }
            values[m * mask.width + n] = v;
        }
        Ok(Self {
            width: mask.width,
            height: mask.height,
            values,
            rho_hat,
            center,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.values[m * self.width + n]
    }

    pub fn rho_hat(&self) -> f64 {
        self.rho_hat
    }

    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Radially symmetric isotropic weighting `rho_hat ^ distance`, measured from
/// the window center `((h - 1) / 2, (w - 1) / 2)`.
pub fn build_isotropic_weight(mask: &RegionMask, rho_hat: f64) -> Result<WeightField> {
    if !(rho_hat > 0.0 && rho_hat < 1.0) {
        return Err(Error::RhoHat(rho_hat));
    }
    let center = (
        (mask.height as f64 - 1.0) / 2.0,
        (mask.width as f64 - 1.0) / 2.0,
    );
    WeightField::from_model(mask, rho_hat, center, |m, n| {
        let dm = m as f64 - center.0;
        let dn = n as f64 - center.1;
        libm::pow(rho_hat, libm::sqrt(dm * dm + dn * dn))
    })
}

/// Peak signal-to-noise ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    /// Zero mean squared error.
    Identical,
    Db(f64),
}

impl Psnr {
    /// Decibel value, with `Identical` mapped to `f64::INFINITY`.
    pub fn db(self) -> f64 {
        match self {
            Psnr::Identical => f64::INFINITY,
            Psnr::Db(v) => v,
        }
    }

    /// PSNR from an accumulated squared error over `count` samples.
    pub fn from_sse(sse: f64, count: usize, peak: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyEvaluation);
        }
        if sse == 0.0 {
            return Ok(Psnr::Identical);
        }
        let mse = sse / count as f64;
        Ok(Psnr::Db(10.0 * libm::log10(peak * peak / mse)))
    }
}

/// PSNR of `reconstructed` against `original`, evaluated only on samples of
/// `mask` that carry `evaluate_on`.
pub fn psnr(
    original: &SampleGrid,
    reconstructed: &SampleGrid,
    mask: &RegionMask,
    evaluate_on: Label,
    peak: f64,
) -> Result<Psnr> {
    if !original.same_shape(reconstructed)
        || original.width != mask.width
        || original.height != mask.height
    {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{} vs mask {}x{}",
            original.width,
            original.height,
            reconstructed.width,
            reconstructed.height,
            mask.width,
            mask.height
        )));
    }
    let mut sse = 0.0;
    let mut count = 0;
    for (m, n) in mask.positions(evaluate_on) {
        let d = original.get(m, n) - reconstructed.get(m, n);
        sse += d * d;
        count += 1;
    }
    Psnr::from_sse(sse, count, peak)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_window_counts() {
        let mask = build_region_mask(48, 48, &[Rect::new(16, 16, 16, 16)], &[]).unwrap();
        assert_eq!(mask.count(Label::Support), 2048);
        assert_eq!(mask.count(Label::Missing), 256);
        assert_eq!(mask.count(Label::Outside), 0);
    }

    #[test]
    fn no_rects_is_all_support() {
        let mask = build_region_mask(4, 4, &[], &[]).unwrap();
        assert_eq!(mask.count(Label::Support), 16);
    }

    #[test]
    fn fully_missing_window_is_rejected() {
        let err = build_region_mask(2, 2, &[Rect::new(0, 0, 2, 2)], &[]).unwrap_err();
        assert_eq!(err, Error::NoSupport);
        assert_eq!(err.to_string(), "no support samples");
    }

    #[test]
    fn overlapping_and_out_of_bounds_rects() {
        assert_eq!(
            build_region_mask(8, 8, &[Rect::new(0, 0, 4, 4)], &[Rect::new(3, 3, 2, 2)]),
            Err(Error::OverlappingRects)
        );
        assert!(matches!(
            build_region_mask(8, 8, &[Rect::new(6, 6, 4, 4)], &[]),
            Err(Error::RectOutOfBounds(_))
        ));
    }

    #[test]
    fn isotropic_weight_values() {
        let mask = build_region_mask(5, 5, &[Rect::new(4, 4, 1, 1)], &[]).unwrap();
        let w = build_isotropic_weight(&mask, 0.8).unwrap();
        assert_eq!(w.center(), (2.0, 2.0));
        assert_eq!(w.get(2, 2), 1.0);
        assert!((w.get(0, 2) - 0.64).abs() < 1e-15);
        assert!((w.get(2, 4) - 0.64).abs() < 1e-15);
        assert_eq!(w.get(4, 4), 0.0);
    }

    #[test]
    fn rho_hat_out_of_range() {
        let mask = build_region_mask(3, 3, &[], &[]).unwrap();
        for rho in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
            assert!(build_isotropic_weight(&mask, rho).is_err());
        }
    }

    #[test]
    fn psnr_examples() {
        let a = SampleGrid::from_fn(4, 4, |m, n| (m * 4 + n) as f64).unwrap();
        let mask = build_region_mask(4, 4, &[Rect::new(1, 1, 1, 1)], &[]).unwrap();
        assert_eq!(psnr(&a, &a, &mask, Label::Support, 255.0), Ok(Psnr::Identical));

        let b = SampleGrid::from_fn(4, 4, |m, n| (m * 4 + n) as f64 + 255.0).unwrap();
        let Psnr::Db(db) = psnr(&a, &b, &mask, Label::Support, 255.0).unwrap() else {
            panic!("expected finite PSNR")
        };
        assert!(db.abs() < 1e-12);

        let mut c = a.clone();
        c.set(1, 1, a.get(1, 1) + 16.0).unwrap();
        let Psnr::Db(db) = psnr(&a, &c, &mask, Label::Missing, 255.0).unwrap() else {
            panic!("expected finite PSNR")
        };
        // 10 log10(255^2 / 256)
        assert!((db - 24.048_403_955_560_61).abs() < 1e-9, "{db}");
    }

    #[test]
    fn psnr_shape_mismatch() {
        let a = SampleGrid::zeros(4, 4).unwrap();
        let b = SampleGrid::zeros(4, 3).unwrap();
        let mask = build_region_mask(4, 4, &[], &[]).unwrap();
        assert!(matches!(
            psnr(&a, &b, &mask, Label::Support, 255.0),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn grid_rejects_non_finite() {
        assert!(SampleGrid::new(2, 1, alloc::vec![0.0, f64::NAN]).is_err());
        assert!(SampleGrid::new(0, 1, alloc::vec![]).is_err());
    }
}
