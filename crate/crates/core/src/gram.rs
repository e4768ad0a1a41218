//! Weighted scalar products between basis functions.
//!
//! `K[u, l] = sum w[m, n] phi_l[m, n] conj(phi_u[m, n])` over the window. Its
//! row-normalized form `K_hat = diag(diag(K))^-1 K` measures how much a
//! projection onto `phi_u` picks up of every other function `phi_l`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::basis::{BasisSet, Index};
use crate::error::{Error, Result};
use crate::grid::WeightField;

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    indices: Vec<Index>,
    entries: Vec<Complex64>,
    normalized: bool,
}

impl GramMatrix {
    /// Wraps a dense row-major matrix over `indices`.
    pub fn from_entries(indices: Vec<Index>, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != indices.len() * indices.len() {
            return Err(Error::ShapeMismatch("gram entries".into()));
        }
        Ok(Self {
            indices,
            entries,
            normalized: false,
        })
    }

    pub fn order(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[Index] {
        &self.indices
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    #[inline]
    pub fn get(&self, u: usize, l: usize) -> Complex64 {
        self.entries[u * self.order() + l]
    }

    pub fn row(&self, u: usize) -> &[Complex64] {
        let n = self.order();
        &self.entries[u * n..(u + 1) * n]
    }
}

fn check_weight(basis: &BasisSet, weight: &WeightField) -> Result<()> {
    if weight.width() > basis.size() || weight.height() > basis.size() {
        return Err(Error::TooLarge {
            rows: weight.height(),
            cols: weight.width(),
            size: basis.size(),
        });
    }
    Ok(())
}

/// Dense Gram matrix over `active` by direct summation. Only the upper
/// triangle is summed; the lower one is its conjugate mirror.
pub fn build_gram(basis: &BasisSet, weight: &WeightField, active: &[Index]) -> Result<GramMatrix> {
    check_weight(basis, weight)?;
    for &k in active {
        basis.check(k)?;
    }
    let support: Vec<(usize, usize, f64)> = (0..weight.height())
        .flat_map(|m| (0..weight.width()).map(move |n| (m, n)))
        .map(|(m, n)| (m, n, weight.get(m, n)))
        .filter(|&(_, _, w)| w != 0.0)
        .collect();
    let order = active.len();
    let mut entries = vec![Complex64::new(0.0, 0.0); order * order];
    for u in 0..order {
        for l in u..order {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(m, n, w) in &support {
                acc += basis.value(active[l], m, n) * basis.value(active[u], m, n).conj() * w;
            }
            entries[u * order + l] = acc;
            entries[l * order + u] = acc.conj();
        }
    }
    GramMatrix::from_entries(active.to_vec(), entries)
}

/// `K_hat[u, l] = K[u, l] / K[u, u]`.
pub fn normalize_gram(k: &GramMatrix) -> Result<GramMatrix> {
    let n = k.order();
    let mut entries = k.entries.clone();
    for u in 0..n {
        let d = k.get(u, u);
        if !(d.re > 0.0) {
            return Err(Error::DegenerateGram);
        }
        for v in &mut entries[u * n..(u + 1) * n] {
            *v /= d;
        }
    }
    Ok(GramMatrix {
        indices: k.indices.clone(),
        entries,
        normalized: true,
    })
}

/// Row `u` of `K` against every function of the set, in flat index order.
///
/// Uses `K[u, l] = conj(decompose(w * phi_u)[l])`, evaluated with separable
/// sums, so the cost is `O(T^2 (M + N))` instead of `O(T^2 M N)`.
pub fn gram_row(basis: &BasisSet, weight: &WeightField, u: Index) -> Result<Vec<Complex64>> {
    check_weight(basis, weight)?;
    basis.check(u)?;
    let (rows, cols) = (weight.height(), weight.width());
    let mut product = Vec::with_capacity(rows * cols);
    for m in 0..rows {
        for n in 0..cols {
            product.push(basis.value(u, m, n) * weight.get(m, n));
        }
    }
    let mut row = basis.decompose_complex(&product, rows, cols)?;
    for v in &mut row {
        *v = v.conj();
    }
    Ok(row)
}

/// Weighted self products `sum w |phi_k|^2` for every function, flat order.
pub fn weighted_norms(basis: &BasisSet, weight: &WeightField) -> Result<Vec<f64>> {
    check_weight(basis, weight)?;
    let t = basis.size();
    let (rows, cols) = (weight.height(), weight.width());
    // separable: sum_m |a_k1[m]|^2 sum_n w[m, n] |a_k2[n]|^2
    let mut partial = vec![0.0; rows * t];
    for m in 0..rows {
        for k2 in 0..t {
            let mut acc = 0.0;
            for n in 0..cols {
                acc += weight.get(m, n) * basis.atom(k2, n).norm_sqr();
            }
            partial[m * t + k2] = acc;
        }
    }
    let mut out = vec![0.0; t * t];
    for k1 in 0..t {
        for m in 0..rows {
            let a = basis.atom(k1, m).norm_sqr();
            for k2 in 0..t {
                out[k1 * t + k2] += a * partial[m * t + k2];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_isotropic_weight, build_region_mask, Label, Rect, RegionMask};

    fn all_indices(b: &BasisSet) -> Vec<Index> {
        (0..b.len()).map(|f| b.index(f)).collect()
    }

    fn uniform_weight(size: usize) -> WeightField {
        let mask = build_region_mask(size, size, &[], &[]).unwrap();
        WeightField::from_model(&mask, 0.5, (0.0, 0.0), |_, _| 1.0).unwrap()
    }

    #[test]
    fn full_support_uniform_weight_is_diagonal() {
        for b in [BasisSet::dft(4).unwrap(), BasisSet::dct(4).unwrap()] {
            let k = build_gram(&b, &uniform_weight(4), &all_indices(&b)).unwrap();
            for u in 0..16 {
                for l in 0..16 {
                    let v = k.get(u, l);
                    if u == l {
                        assert!((v.re - b.norm_sq()).abs() < 1e-10);
                    } else {
                        assert!(v.norm() < 1e-10, "K[{u},{l}] = {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn dft_circulant_identity_exhaustive() {
        let b = BasisSet::dft(8).unwrap();
        let mask = build_region_mask(6, 5, &[Rect::new(2, 1, 2, 3)], &[Rect::new(0, 4, 1, 1)]).unwrap();
        let w = build_isotropic_weight(&mask, 0.7).unwrap();
        let k = build_gram(&b, &w, &all_indices(&b)).unwrap();
        let wspec = b
            .decompose_real(w.values(), w.height(), w.width())
            .unwrap();
        for uf in 0..64 {
            let u = b.index(uf);
            for lf in 0..64 {
                let l = b.index(lf);
                let d = Index::new((u.k1 + 8 - l.k1) % 8, (u.k2 + 8 - l.k2) % 8);
                assert!((k.get(uf, lf) - wspec[b.flat(d)]).norm() < 1e-10);
                assert!((k.get(uf, lf) - k.get(lf, uf).conj()).norm() == 0.0);
            }
        }
    }

    #[test]
    fn single_sample_weight_closed_form() {
        let b = BasisSet::dft(4).unwrap();
        let mut labels = vec![Label::Outside; 16];
        labels[1 * 4 + 2] = Label::Support;
        let mask = RegionMask::from_labels(4, 4, labels).unwrap();
        let w = WeightField::from_model(&mask, 0.5, (0.0, 0.0), |_, _| 1.0).unwrap();
        let idx = all_indices(&b);
        let k = build_gram(&b, &w, &idx).unwrap();
        for (ui, &u) in idx.iter().enumerate() {
            assert!((k.get(ui, ui) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            for (li, &l) in idx.iter().enumerate() {
                let expect = b.value(l, 1, 2) * b.value(u, 1, 2).conj();
                assert!((k.get(ui, li) - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn normalize_examples() {
        let idx = vec![Index::new(0, 0), Index::new(0, 1)];
        let c = |x: f64| Complex64::new(x, 0.0);
        let diag = GramMatrix::from_entries(idx.clone(), vec![c(3.0), c(0.0), c(0.0), c(5.0)]).unwrap();
        let n = normalize_gram(&diag).unwrap();
        assert_eq!(n.row(0), &[c(1.0), c(0.0)]);
        assert_eq!(n.row(1), &[c(0.0), c(1.0)]);
        assert!(n.is_normalized());

        let k = GramMatrix::from_entries(idx.clone(), vec![c(2.0), c(1.0), c(1.0), c(2.0)]).unwrap();
        let n = normalize_gram(&k).unwrap();
        assert_eq!(n.row(0), &[c(1.0), c(0.5)]);
        assert_eq!(n.row(1), &[c(0.5), c(1.0)]);

        let bad = GramMatrix::from_entries(idx, vec![c(0.0), c(1.0), c(1.0), c(2.0)]).unwrap();
        assert_eq!(normalize_gram(&bad), Err(Error::DegenerateGram));
    }

    #[test]
    fn separable_row_matches_direct_sum() {
        let mask = build_region_mask(7, 6, &[Rect::new(2, 2, 3, 2)], &[]).unwrap();
        let w = build_isotropic_weight(&mask, 0.8).unwrap();
        for b in [BasisSet::dft(8).unwrap(), BasisSet::dct(8).unwrap()] {
            let idx = all_indices(&b);
            let k = build_gram(&b, &w, &idx).unwrap();
            let norms = weighted_norms(&b, &w).unwrap();
            for uf in [0, 5, 9, 27, 63] {
                let row = gram_row(&b, &w, b.index(uf)).unwrap();
                for lf in 0..64 {
                    assert!((row[lf] - k.get(uf, lf)).norm() < 1e-10);
                }
                assert!((norms[uf] - k.get(uf, uf).re).abs() < 1e-10);
            }
        }
    }
}
