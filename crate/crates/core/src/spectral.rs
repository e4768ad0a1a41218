//! Extrapolation carried out entirely on DFT spectra.
//!
//! With the DFT basis the weighted Gram matrix is circulant,
//! `K[u, l] = W[(u - l) mod T]` where `W` is the spectrum of the weighting.
//! Subtracting `c phi_u` from the residual therefore shifts `c W` by `u` in the
//! spectrum of the weighted residual, and the whole iteration runs in `O(T^2)`
//! after two initial transforms. One inverse transform at the end yields the
//! model.
//!
//! Spectra follow the analysis convention of [`BasisSet::decompose`](crate::BasisSet::decompose):
//! `X[k] = sum x[m, n] exp(-j 2 pi (k1 m + k2 n) / T)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::basis::Index;
use crate::error::{Error, Result};
use crate::grid::{build_isotropic_weight, Label, RegionMask, SampleGrid, WeightField};
use crate::spatial::{Compensation, ExtrapolationConfig, Step, DEGENERATE_RATIO};
use crate::trace::{effective_gamma, TraceRecord};
use crate::BasisKind;

/// Stop once the largest spectral magnitude has dropped by this factor.
pub const SPECTRAL_FLOOR: f64 = 1e-12;

/// Imaginary residue of the synthesized model tolerated relative to its
/// magnitude.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Unnormalized 2D DFT over a row-major `T x T` buffer. `forward` uses the
/// negative exponent, `inverse` the positive one without the `1 / T^2` factor.
/// Both panic if the buffer length is not `size()^2`.
pub trait Transform2d {
    fn size(&self) -> usize;
    fn forward(&self, data: &mut [Complex64]);
    fn inverse(&self, data: &mut [Complex64]);
}

/// Separable direct DFT, `O(T^3)` per 2D transform.
#[derive(Debug, Clone)]
pub struct DirectDft {
    size: usize,
    // twiddle[j] = exp(-j 2 pi j / T)
    twiddle: Vec<Complex64>,
}

impl DirectDft {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Dimensions("transform size 0".into()));
        }
        let twiddle = (0..size)
            .map(|j| {
                let a = -2.0 * PI * j as f64 / size as f64;
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        Ok(Self { size, twiddle })
    }

    fn apply(&self, data: &mut [Complex64], inverse: bool) {
        let t = self.size;
        assert_eq!(data.len(), t * t, "buffer is not T x T");
        let tw = |j: usize| {
            let v = self.twiddle[j % t];
            if inverse {
                v.conj()
            } else {
                v
            }
        };
        let mut line = vec![Complex64::new(0.0, 0.0); t];
        let mut out = vec![Complex64::new(0.0, 0.0); t];
        for r in 0..t {
            line.copy_from_slice(&data[r * t..(r + 1) * t]);
            for (k, o) in out.iter_mut().enumerate() {
                *o = line.iter().enumerate().map(|(m, x)| x * tw(k * m)).sum();
            }
            data[r * t..(r + 1) * t].copy_from_slice(&out);
        }
        for c in 0..t {
            for m in 0..t {
                line[m] = data[m * t + c];
            }
            for (k, o) in out.iter_mut().enumerate() {
                *o = line.iter().enumerate().map(|(m, x)| x * tw(k * m)).sum();
            }
            for k in 0..t {
                data[k * t + c] = out[k];
            }
        }
    }
}

impl Transform2d for DirectDft {
    fn size(&self) -> usize {
        self.size
    }

    fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, false);
    }

    fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, true);
    }
}

/// Spectral iteration state for one window.
#[derive(Debug, Clone)]
pub struct Spectrum {
    t: usize,
    rows: usize,
    cols: usize,
    /// Spectrum of the weighted residual.
    r_w: Vec<Complex64>,
    /// Spectrum of the weighting.
    w: Vec<Complex64>,
    /// Spectra of `w^2 r` and `w^2`, only for full compensation.
    q: Option<(Vec<Complex64>, Vec<Complex64>)>,
    /// Model spectrum, analysis convention (`T^2` times the coefficients).
    g: Vec<Complex64>,
    w0: f64,
    canonical: Vec<u32>,
    // w^2 r and w^2 at initialization, kept for `prepare_full`
    w2r: Vec<f64>,
    w2: Vec<f64>,
    forward_transforms: usize,
    initial_max: f64,
    initial_energy: f64,
    energy: f64,
    iteration: usize,
    converged: bool,
    trace: Vec<TraceRecord>,
}

fn embed(values: impl Iterator<Item = f64>, rows: usize, cols: usize, t: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); t * t];
    for (i, v) in values.enumerate() {
        let (m, n) = (i / cols, i % cols);
        debug_assert!(m < rows);
        buf[m * t + n] = Complex64::new(v, 0.0);
    }
    buf
}

// dst[k] -= c * src[(k - u) mod T], row by row in two contiguous runs
fn subtract_shifted(dst: &mut [Complex64], src: &[Complex64], t: usize, u: Index, c: Complex64) {
    for k1 in 0..t {
        let a = ((k1 + t - u.k1) % t) * t;
        let s = &src[a..a + t];
        let (lo, hi) = dst[k1 * t..(k1 + 1) * t].split_at_mut(u.k2);
        for (d, x) in lo.iter_mut().zip(&s[t - u.k2..]) {
            *d -= c * x;
        }
        for (d, x) in hi.iter_mut().zip(&s[..t - u.k2]) {
            *d -= c * x;
        }
    }
}

fn canonical_bins(t: usize) -> Vec<u32> {
    (0..t * t)
        .filter(|&f| {
            let (k1, k2) = (f / t, f % t);
            f <= ((t - k1) % t) * t + (t - k2) % t
        })
        .map(|f| f as u32)
        .collect()
}

fn max_abs(spec: &[Complex64]) -> f64 {
    spec.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Transforms the weighted residual `w * f` (zero off support) and the
/// weighting into spectra of size `fft.size()`.
pub fn init_spectra<F: Transform2d + ?Sized>(
    f: &SampleGrid,
    mask: &RegionMask,
    weight: &WeightField,
    fft: &F,
) -> Result<Spectrum> {
    let t = fft.size();
    let (rows, cols) = (mask.height(), mask.width());
    if f.width() != cols || f.height() != rows {
        return Err(Error::ShapeMismatch("signal and mask".into()));
    }
    if weight.width() != cols || weight.height() != rows {
        return Err(Error::ShapeMismatch("weight and mask".into()));
    }
    if rows > t || cols > t {
        return Err(Error::TooLarge { rows, cols, size: t });
    }
    let residual: Vec<f64> = (0..rows * cols)
        .map(|i| {
            let (m, n) = (i / cols, i % cols);
            if mask.label(m, n) == Label::Support {
                f.get(m, n)
            } else {
                0.0
            }
        })
        .collect();
    let energy: f64 = residual
        .iter()
        .zip(weight.values())
        .map(|(r, w)| w * r * r)
        .sum();
    let mut r_w = embed(
        residual.iter().zip(weight.values()).map(|(r, w)| r * w),
        rows,
        cols,
        t,
    );
    fft.forward(&mut r_w);
    let mut w = embed(weight.values().iter().copied(), rows, cols, t);
    fft.forward(&mut w);
    let w0 = weight.total();
    let initial_max = max_abs(&r_w);
    Ok(Spectrum {
        t,
        rows,
        cols,
        r_w,
        w,
        q: None,
        g: vec![Complex64::new(0.0, 0.0); t * t],
        w0,
        canonical: canonical_bins(t),
        w2r: residual
            .iter()
            .zip(weight.values())
            .map(|(r, w)| r * w * w)
            .collect(),
        w2: weight.values().iter().map(|w| w * w).collect(),
        forward_transforms: 2,
        initial_max,
        initial_energy: energy,
        energy,
        iteration: 0,
        converged: initial_max == 0.0,
        trace: Vec::new(),
    })
}

impl Spectrum {
    pub fn size(&self) -> usize {
        self.t
    }

    pub fn weighted_residual(&self) -> &[Complex64] {
        &self.r_w
    }

    pub fn weight_spectrum(&self) -> &[Complex64] {
        &self.w
    }

    pub fn model_spectrum(&self) -> &[Complex64] {
        &self.g
    }

    /// `W[0]`, the total weight.
    pub fn w0(&self) -> f64 {
        self.w0
    }

    /// Forward 2D transforms performed so far.
    pub fn forward_transform_count(&self) -> usize {
        self.forward_transforms
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_converged(&self) -> bool {
        self.converged
    }

    pub fn initial_energy(&self) -> f64 {
        self.initial_energy
    }

    /// `sum w r^2`, tracked analytically from the spectra.
    pub fn weighted_energy(&self) -> f64 {
        self.energy
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<TraceRecord> {
        self.trace
    }

    #[inline]
    fn flat(&self, k: Index) -> usize {
        k.k1 * self.t + k.k2
    }

    #[inline]
    fn partner(&self, k: Index) -> Index {
        Index::new((self.t - k.k1) % self.t, (self.t - k.k2) % self.t)
    }

    /// Adds the spectra of `w^2 r` and `w^2` needed by full compensation.
    /// Costs two forward transforms; idempotent.
    pub fn prepare_full<F: Transform2d + ?Sized>(&mut self, fft: &F) -> Result<()> {
        if self.q.is_some() {
            return Ok(());
        }
        if fft.size() != self.t {
            return Err(Error::ShapeMismatch("transform size".into()));
        }
        if self.iteration > 0 {
            return Err(Error::FullNotPrepared);
        }
        let (rows, cols, t) = (self.rows, self.cols, self.t);
        let mut q = embed(self.w2r.iter().copied(), rows, cols, t);
        fft.forward(&mut q);
        let mut w = embed(self.w2.iter().copied(), rows, cols, t);
        fft.forward(&mut w);
        self.forward_transforms += 2;
        self.q = Some((q, w));
        Ok(())
    }

    /// Largest canonical bin of `|R_w|`, ties to the lowest flat index, with
    /// its squared magnitude.
    fn select(&self) -> Option<(Index, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for &f in &self.canonical {
            let f = f as usize;
            let s = self.r_w[f].norm_sqr();
            if s > best.map_or(0.0, |b| b.1) {
                best = Some((f, s));
            }
        }
        best.map(|(f, s)| (Index::new(f / self.t, f % self.t), s))
    }

    /// Applies one iteration with the given compensation.
    pub fn step(&mut self, compensation: Compensation) -> Result<Step> {
        if let Compensation::Constant(g) = compensation {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::Gamma(g));
            }
        }
        if compensation == Compensation::Full && self.q.is_none() {
            return Err(Error::FullNotPrepared);
        }
        let floor = SPECTRAL_FLOOR * self.initial_max;
        // conjugate bins share magnitudes, so the canonical maximum is the global one
        let u = match self.select() {
            Some((u, mag)) if !self.converged && mag >= floor * floor => u,
            _ => {
                self.converged = true;
                return Ok(Step::Converged);
            }
        };
        let ub = self.partner(u);
        let (uf, ubf) = (self.flat(u), self.flat(ub));
        let paired = uf != ubf;
        debug_assert!(
            (self.r_w[ubf] - self.r_w[uf].conj()).norm() <= 1e-8 * (1.0 + self.initial_max),
            "weighted residual spectrum lost conjugate symmetry"
        );
        let t2 = (self.t * self.t) as f64;
        let p_u = self.r_w[uf] / self.w0;

        let mut degenerate = false;
        let mut coeff = match compensation {
            Compensation::None => p_u,
            Compensation::Constant(g) => p_u * g,
            Compensation::Full => {
                let (q, _) = self.q.as_ref().ok_or(Error::FullNotPrepared)?;
                // sum_l p_l W[u - l] / W0 = T^2 Q[u] / W0^2
                let s = q[uf] * (t2 / (self.w0 * self.w0));
                if p_u.norm() == 0.0 || s.norm() < DEGENERATE_RATIO * p_u.norm() {
                    degenerate = true;
                    p_u
                } else {
                    p_u * (p_u / s)
                }
            }
        };
        if !paired {
            coeff = Complex64::new(coeff.re, 0.0);
        }

        // energy change: -2 sum w r d + sum w d^2
        let w2u = self.w[self.flat(Index::new((2 * u.k1) % self.t, (2 * u.k2) % self.t))];
        let (cross, square) = if paired {
            (
                2.0 * (coeff * self.r_w[uf].conj()).re,
                2.0 * coeff.norm_sqr() * self.w0 + 2.0 * (coeff * coeff * w2u.conj()).re,
            )
        } else {
            (
                (coeff * self.r_w[uf].conj()).re,
                coeff.re * coeff.re * self.w0,
            )
        };
        self.energy = (self.energy - 2.0 * cross + square).max(0.0);

        let t = self.t;
        subtract_shifted(&mut self.r_w, &self.w, t, u, coeff);
        if paired {
            subtract_shifted(&mut self.r_w, &self.w, t, ub, coeff.conj());
        }
        if let Some((q, w2)) = self.q.as_mut() {
            subtract_shifted(q, w2, t, u, coeff);
            if paired {
                subtract_shifted(q, w2, t, ub, coeff.conj());
            }
        }
        self.g[uf] += coeff * t2;
        if paired {
            self.g[ubf] += coeff.conj() * t2;
        }

        self.iteration += 1;
        let record = TraceRecord {
            iteration: self.iteration,
            index: u,
            projection: p_u,
            coefficient: coeff,
            gamma_effective: effective_gamma(coeff, p_u),
            weighted_energy: self.energy,
            degenerate,
        };
        self.trace.push(record);
        Ok(Step::Applied(record))
    }

    /// Runs until `iterations` have been applied in total or convergence.
    pub fn run_to(&mut self, iterations: usize, compensation: Compensation) -> Result<()> {
        while self.iteration < iterations {
            if self.step(compensation)? == Step::Converged {
                break;
            }
        }
        Ok(())
    }

    /// Inverse transform of the model spectrum, cropped to the window.
    pub fn synthesize_model<F: Transform2d + ?Sized>(&self, fft: &F) -> Result<SampleGrid> {
        if fft.size() != self.t {
            return Err(Error::ShapeMismatch("transform size".into()));
        }
        let mut buf = self.g.clone();
        fft.inverse(&mut buf);
        let scale = 1.0 / (self.t * self.t) as f64;
        let mut out = Vec::with_capacity(self.rows * self.cols);
        let mut worst_im: f64 = 0.0;
        let mut peak: f64 = 1.0;
        for m in 0..self.rows {
            for n in 0..self.cols {
                let v = buf[m * self.t + n] * scale;
                worst_im = worst_im.max(v.im.abs());
                peak = peak.max(v.re.abs());
                out.push(v.re);
            }
        }
        if worst_im > SYMMETRY_TOLERANCE * peak {
            return Err(Error::ConjugateSymmetry(worst_im));
        }
        SampleGrid::new(self.cols, self.rows, out)
    }
}

/// Spectral extrapolation of `f` with the compensation from `config`. The
/// selection rule is irrelevant here: with the DFT basis both rules pick the
/// same function.
pub fn fast_iterate<F: Transform2d + ?Sized>(
    f: &SampleGrid,
    mask: &RegionMask,
    config: &ExtrapolationConfig,
    fft: &F,
) -> Result<(SampleGrid, Vec<TraceRecord>)> {
    config.validate()?;
    if config.basis != BasisKind::Dft2d {
        return Err(Error::NotDft);
    }
    if fft.size() != config.transform_size {
        return Err(Error::ShapeMismatch("transform size".into()));
    }
    let weight = build_isotropic_weight(mask, config.rho_hat)?;
    let mut spec = init_spectra(f, mask, &weight, fft)?;
    if config.compensation == Compensation::Full {
        spec.prepare_full(fft)?;
    }
    spec.run_to(config.iterations, config.compensation)?;
    let model = spec.synthesize_model(fft)?;
    Ok((model, spec.into_trace()))
}

/// Spectral extrapolation with full compensation.
pub fn fast_iterate_full_od<F: Transform2d + ?Sized>(
    f: &SampleGrid,
    mask: &RegionMask,
    config: &ExtrapolationConfig,
    fft: &F,
) -> Result<(SampleGrid, Vec<TraceRecord>)> {
    let config = ExtrapolationConfig {
        compensation: Compensation::Full,
        ..*config
    };
    fast_iterate(f, mask, &config, fft)
}
