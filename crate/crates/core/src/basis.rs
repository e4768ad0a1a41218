//! Separable families of 2D basis functions over a `T x T` transform grid.
//!
//! Every function factors as `phi_k[m, n] = a_{k1}[m] * a_{k2}[n]`, so analysis
//! and synthesis run as two passes of 1D sums. Coefficients follow one
//! convention for all sets: [`BasisSet::decompose`] returns the scalar products
//! `sum s[m, n] * conj(phi_k[m, n])`, and [`BasisSet::synthesize`] divides by the
//! squared norm of the functions (`T^2` for the DFT, `1` for the orthonormal
//! DCT), so the two are inverse to each other on the full grid.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::SampleGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    /// `phi_k[m, n] = exp(+j 2 pi (k1 m + k2 n) / T)`.
    Dft2d,
    /// Orthonormal type-II DCT functions.
    Dct2d,
}

/// Position of a basis function in the `T x T` index space. `k1` pairs with
/// the row coordinate `m`, `k2` with the column coordinate `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Index {
    pub k1: usize,
    pub k2: usize,
}

impl Index {
    pub const fn new(k1: usize, k2: usize) -> Self {
        Self { k1, k2 }
    }
}

#[derive(Debug, Clone)]
pub struct BasisSet {
    kind: BasisKind,
    size: usize,
    // atoms[k * size + m] = a_k[m]
    atoms: Vec<Complex64>,
}

impl BasisSet {
    pub fn new(kind: BasisKind, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Dimensions("transform size 0".into()));
        }
        let t = size as f64;
        let mut atoms = Vec::with_capacity(size * size);
        for k in 0..size {
            for m in 0..size {
                let a = match kind {
                    BasisKind::Dft2d => {
                        // reduce the phase exactly before scaling
                        let phase = 2.0 * PI * ((k * m) % size) as f64 / t;
                        Complex64::new(libm::cos(phase), libm::sin(phase))
                    }
                    BasisKind::Dct2d => {
                        let scale = if k == 0 {
                            libm::sqrt(1.0 / t)
                        } else {
                            libm::sqrt(2.0 / t)
                        };
                        let arg = PI * ((2 * m + 1) * k) as f64 / (2.0 * t);
                        Complex64::new(scale * libm::cos(arg), 0.0)
                    }
                };
                atoms.push(a);
            }
        }
        Ok(Self { kind, size, atoms })
    }

    pub fn dft(size: usize) -> Result<Self> {
        Self::new(BasisKind::Dft2d, size)
    }

    pub fn dct(size: usize) -> Result<Self> {
        Self::new(BasisKind::Dct2d, size)
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// Transform size `T`.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of basis functions, `T^2`.
    pub fn len(&self) -> usize {
        self.size * self.size
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn flat(&self, k: Index) -> usize {
        k.k1 * self.size + k.k2
    }

    #[inline]
    pub fn index(&self, flat: usize) -> Index {
        Index::new(flat / self.size, flat % self.size)
    }

    pub fn check(&self, k: Index) -> Result<()> {
        if k.k1 < self.size && k.k2 < self.size {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange(k.k1, k.k2))
        }
    }

    /// 1D factor `a_k[m]`.
    #[inline]
    pub fn atom(&self, k: usize, m: usize) -> Complex64 {
        self.atoms[k * self.size + m]
    }

    /// `phi_k[m, n]`.
    #[inline]
    pub fn value(&self, k: Index, m: usize, n: usize) -> Complex64 {
        self.atom(k.k1, m) * self.atom(k.k2, n)
    }

    /// `sum |phi_k|^2` over the full grid, identical for every `k`.
    pub fn norm_sq(&self) -> f64 {
        match self.kind {
            BasisKind::Dft2d => (self.size * self.size) as f64,
            BasisKind::Dct2d => 1.0,
        }
    }

    /// Whether coefficients of real signals come in conjugate pairs.
    pub fn is_complex(&self) -> bool {
        self.kind == BasisKind::Dft2d
    }

    /// Conjugate partner `(-k1 mod T, -k2 mod T)` for complex sets. May equal
    /// `k` itself (DC and Nyquist combinations).
    pub fn partner(&self, k: Index) -> Option<Index> {
        match self.kind {
            BasisKind::Dft2d => Some(Index::new(
                (self.size - k.k1) % self.size,
                (self.size - k.k2) % self.size,
            )),
            BasisKind::Dct2d => None,
        }
    }

    /// True for the representative of each conjugate pair (the one with the
    /// lower row-major index); always true for real sets.
    pub fn is_canonical(&self, k: Index) -> bool {
        self.partner(k)
            .is_none_or(|p| self.flat(k) <= self.flat(p))
    }

    fn check_fit(&self, rows: usize, cols: usize) -> Result<()> {
        if rows > self.size || cols > self.size {
            return Err(Error::TooLarge {
                rows,
                cols,
                size: self.size,
            });
        }
        Ok(())
    }

    /// Analysis of a real grid embedded at the origin of the zero-padded
    /// transform grid: `C[k] = sum s[m, n] conj(phi_k[m, n])`.
    pub fn decompose(&self, signal: &SampleGrid) -> Result<Vec<Complex64>> {
        self.decompose_real(signal.samples(), signal.height(), signal.width())
    }

    /// Real-input analysis of a row-major `rows x cols` buffer.
    pub fn decompose_real(&self, values: &[f64], rows: usize, cols: usize) -> Result<Vec<Complex64>> {
        self.check_fit(rows, cols)?;
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch("buffer length".into()));
        }
        let t = self.size;
        // pass over columns: partial[m][k2] = sum_n s[m, n] conj(a_k2[n])
        let mut partial = vec![Complex64::new(0.0, 0.0); rows * t];
        for m in 0..rows {
            let row = &values[m * cols..(m + 1) * cols];
            for k2 in 0..t {
                let atoms = &self.atoms[k2 * t..k2 * t + cols];
                let mut acc = Complex64::new(0.0, 0.0);
                for (s, a) in row.iter().zip(atoms) {
                    acc += a.conj() * *s;
                }
                partial[m * t + k2] = acc;
            }
        }
        Ok(self.finish_rows(&partial, rows))
    }

    /// Complex-input analysis of a row-major `rows x cols` buffer.
    pub fn decompose_complex(
        &self,
        values: &[Complex64],
        rows: usize,
        cols: usize,
    ) -> Result<Vec<Complex64>> {
        self.check_fit(rows, cols)?;
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch("buffer length".into()));
        }
        let t = self.size;
        let mut partial = vec![Complex64::new(0.0, 0.0); rows * t];
        for m in 0..rows {
            let row = &values[m * cols..(m + 1) * cols];
            for k2 in 0..t {
                let atoms = &self.atoms[k2 * t..k2 * t + cols];
                let mut acc = Complex64::new(0.0, 0.0);
                for (s, a) in row.iter().zip(atoms) {
                    acc += *s * a.conj();
                }
                partial[m * t + k2] = acc;
            }
        }
        Ok(self.finish_rows(&partial, rows))
    }

    // second pass over rows: out[k1][k2] = sum_m conj(a_k1[m]) partial[m][k2]
    fn finish_rows(&self, partial: &[Complex64], rows: usize) -> Vec<Complex64> {
        let t = self.size;
        let mut out = vec![Complex64::new(0.0, 0.0); t * t];
        for k1 in 0..t {
            let dst = &mut out[k1 * t..(k1 + 1) * t];
            for m in 0..rows {
                let a = self.atom(k1, m).conj();
                let src = &partial[m * t..(m + 1) * t];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * *s;
                }
            }
        }
        out
    }

    /// Synthesis over the top-left `rows x cols` part of the grid:
    /// `s[m, n] = sum_k C[k] phi_k[m, n] / norm_sq`.
    pub fn synthesize_window(
        &self,
        coeffs: &[Complex64],
        rows: usize,
        cols: usize,
    ) -> Result<Vec<Complex64>> {
        self.check_fit(rows, cols)?;
        let t = self.size;
        if coeffs.len() != t * t {
            return Err(Error::ShapeMismatch("coefficient count".into()));
        }
        // partial[m][k2] = sum_k1 C[k1][k2] a_k1[m]
        let mut partial = vec![Complex64::new(0.0, 0.0); rows * t];
        for m in 0..rows {
            let dst = &mut partial[m * t..(m + 1) * t];
            for k1 in 0..t {
                let a = self.atom(k1, m);
                for (d, c) in dst.iter_mut().zip(&coeffs[k1 * t..(k1 + 1) * t]) {
                    *d += a * *c;
                }
            }
        }
        let scale = 1.0 / self.norm_sq();
        let mut out = vec![Complex64::new(0.0, 0.0); rows * cols];
        for m in 0..rows {
            for n in 0..cols {
                let mut acc = Complex64::new(0.0, 0.0);
                for k2 in 0..t {
                    acc += partial[m * t + k2] * self.atom(k2, n);
                }
                out[m * cols + n] = acc * scale;
            }
        }
        Ok(out)
    }

    /// Synthesis over the full `T x T` grid.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        self.synthesize_window(coeffs, self.size, self.size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    }

    #[test]
    fn dft_constant_is_dc_only() {
        let b = BasisSet::dft(8).unwrap();
        let s = SampleGrid::filled(8, 8, 3.5).unwrap();
        let c = b.decompose(&s).unwrap();
        assert!((c[0] - Complex64::new(3.5 * 64.0, 0.0)).norm() < 1e-12);
        assert!(c[1..].iter().all(|v| v.norm() < 1e-10));
    }

    #[test]
    fn zero_signal_zero_coefficients() {
        for b in [BasisSet::dft(8).unwrap(), BasisSet::dct(8).unwrap()] {
            let c = b.decompose(&SampleGrid::zeros(5, 3).unwrap()).unwrap();
            assert!(c.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
        }
    }

    #[test]
    fn dct_parseval_and_direct_sum() {
        let b = BasisSet::dct(8).unwrap();
        let mut seed = 11u64;
        let vals: Vec<f64> = (0..64).map(|_| lcg(&mut seed)).collect();
        let s = SampleGrid::new(8, 8, vals).unwrap();
        let c = b.decompose(&s).unwrap();
        // direct quadruple-sum oracle
        for k1 in 0..8 {
            for k2 in 0..8 {
                let mut acc = 0.0;
                for m in 0..8 {
                    for n in 0..8 {
                        let f = |k: usize, x: usize| {
                            let sc = if k == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
                            sc * (PI * ((2 * x + 1) * k) as f64 / 16.0).cos()
                        };
                        acc += s.get(m, n) * f(k1, m) * f(k2, n);
                    }
                }
                assert!((c[k1 * 8 + k2].re - acc).abs() < 1e-12);
                assert!(c[k1 * 8 + k2].im.abs() < 1e-15);
            }
        }
        let energy_s: f64 = s.samples().iter().map(|v| v * v).sum();
        let energy_c: f64 = c.iter().map(|v| v.norm_sqr()).sum();
        assert!((energy_s - energy_c).abs() < 1e-12 * energy_s.max(1.0));
    }

    #[test]
    fn round_trip_both_sets() {
        let mut seed = 99;
        let vals: Vec<f64> = (0..16 * 16).map(|_| lcg(&mut seed) * 255.0).collect();
        let s = SampleGrid::new(16, 16, vals).unwrap();
        for b in [BasisSet::dft(16).unwrap(), BasisSet::dct(16).unwrap()] {
            let c = b.decompose(&s).unwrap();
            let back = b.synthesize(&c).unwrap();
            let scale = s.samples().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (x, y) in s.samples().iter().zip(&back) {
                assert!((x - y.re).abs() <= 1e-10 * scale);
                assert!(y.im.abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn oversized_signal_rejected() {
        let b = BasisSet::dft(4).unwrap();
        assert!(matches!(
            b.decompose(&SampleGrid::zeros(5, 4).unwrap()),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn partners_and_canonical_half() {
        let b = BasisSet::dft(8).unwrap();
        assert_eq!(b.partner(Index::new(0, 0)), Some(Index::new(0, 0)));
        assert_eq!(b.partner(Index::new(4, 4)), Some(Index::new(4, 4)));
        assert_eq!(b.partner(Index::new(1, 3)), Some(Index::new(7, 5)));
        let canonical = (0..64).filter(|&f| b.is_canonical(b.index(f))).count();
        // 4 self-conjugate bins plus half of the remaining 60
        assert_eq!(canonical, 4 + 30);
        let d = BasisSet::dct(8).unwrap();
        assert!((0..64).all(|f| d.is_canonical(d.index(f))));
    }

    #[test]
    fn conjugate_symmetric_coefficients_synthesize_real() {
        let b = BasisSet::dft(8).unwrap();
        let mut seed = 5;
        let mut c = vec![Complex64::new(0.0, 0.0); 64];
        for f in 0..64 {
            let k = b.index(f);
            let p = b.flat(b.partner(k).unwrap());
            if f < p {
                let v = Complex64::new(lcg(&mut seed), lcg(&mut seed));
                c[f] = v;
                c[p] = v.conj();
            } else if f == p {
                c[f] = Complex64::new(lcg(&mut seed), 0.0);
            }
        }
        let s = b.synthesize(&c).unwrap();
        assert!(s.iter().all(|v| v.im.abs() < 1e-9));
    }
}
