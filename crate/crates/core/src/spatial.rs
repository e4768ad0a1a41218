//! Reference extrapolation engine working in the sample domain.
//!
//! Every iteration decomposes the weighted residual with separable sums,
//! picks one basis function, estimates its coefficient and subtracts the
//! function from the residual on the support. It accepts any [`BasisSet`].
//!
//! For complex sets the model is kept real: the partner `phi_u_bar` of the
//! selected function receives the conjugate coefficient in the same step.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::basis::{BasisKind, BasisSet, Index};
use crate::error::{Error, Result};
use crate::gram::{gram_row, weighted_norms};
use crate::grid::{build_isotropic_weight, Label, RegionMask, SampleGrid, WeightField};
use crate::trace::{effective_gamma, TraceRecord};

/// Stop once the weighted residual energy has dropped by this factor.
pub const ENERGY_FLOOR: f64 = 1e-12;

/// Full compensation falls back to the raw projection when
/// `|S_u| < DEGENERATE_RATIO * |p_u|`.
pub const DEGENERATE_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    /// Largest decrease of the weighted residual energy.
    MinDistance,
    /// Largest magnitude of the weighted scalar product.
    MaxWeightedPortion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Compensation {
    /// Use the projection as is; same as `Constant(1.0)`.
    None,
    Constant(f64),
    /// Exact compensation from the normalized Gram row of the selected function.
    Full,
}

impl Compensation {
    fn validate(self) -> Result<()> {
        match self {
            Compensation::Constant(g) if !(g > 0.0 && g <= 1.0) => Err(Error::Gamma(g)),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrapolationConfig {
    pub iterations: usize,
    pub transform_size: usize,
    pub rho_hat: f64,
    pub basis: BasisKind,
    pub selection: SelectionRule,
    pub compensation: Compensation,
}

impl Default for ExtrapolationConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            transform_size: 64,
            rho_hat: 0.8,
            basis: BasisKind::Dft2d,
            selection: SelectionRule::MaxWeightedPortion,
            compensation: Compensation::Constant(0.2),
        }
    }
}

impl ExtrapolationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Iterations);
        }
        if self.transform_size == 0 {
            return Err(Error::Dimensions("transform size 0".into()));
        }
        if !(self.rho_hat > 0.0 && self.rho_hat < 1.0) {
            return Err(Error::RhoHat(self.rho_hat));
        }
        self.compensation.validate()
    }
}

/// Selected function and, for complex sets, its distinct conjugate partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub index: Index,
    pub partner: Option<Index>,
}

fn selection_of(basis: &BasisSet, k: Index) -> Selection {
    Selection {
        index: k,
        partner: basis.partner(k).filter(|&p| p != k),
    }
}

/// Iteration state of the sample-domain engine.
#[derive(Debug, Clone)]
pub struct ModelState {
    coefficients: BTreeMap<Index, Complex64>,
    residual: SampleGrid,
    iteration: usize,
    initial_energy: f64,
    energy: f64,
    converged: bool,
    trace: Vec<TraceRecord>,
}

impl ModelState {
    /// Expansion coefficients `c_k` of `g = sum c_k phi_k`.
    pub fn coefficients(&self) -> &BTreeMap<Index, Complex64> {
        &self.coefficients
    }

    /// `f - g` on the support, zero elsewhere.
    pub fn residual(&self) -> &SampleGrid {
        &self.residual
    }

    /// Number of applied iterations.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn weighted_energy(&self) -> f64 {
        self.energy
    }

    pub fn initial_energy(&self) -> f64 {
        self.initial_energy
    }

    pub fn is_converged(&self) -> bool {
        self.converged
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }
}

/// `p_k = sum w r conj(phi_k) / sum w |phi_k|^2` by direct summation.
pub fn project_coefficient(
    residual: &SampleGrid,
    weight: &WeightField,
    basis: &BasisSet,
    k: Index,
) -> Result<Complex64> {
    check_shapes(residual, weight, basis)?;
    basis.check(k)?;
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    for m in 0..residual.height() {
        for n in 0..residual.width() {
            let w = weight.get(m, n);
            if w == 0.0 {
                continue;
            }
            let phi = basis.value(k, m, n);
            num += phi.conj() * (w * residual.get(m, n));
            den += w * phi.norm_sqr();
        }
    }
    if !(den > 0.0) {
        return Err(Error::VanishingBasis);
    }
    Ok(num / den)
}

fn check_shapes(residual: &SampleGrid, weight: &WeightField, basis: &BasisSet) -> Result<()> {
    if residual.width() != weight.width() || residual.height() != weight.height() {
        return Err(Error::ShapeMismatch("residual and weight".into()));
    }
    if residual.width() > basis.size() || residual.height() > basis.size() {
        return Err(Error::TooLarge {
            rows: residual.height(),
            cols: residual.width(),
            size: basis.size(),
        });
    }
    Ok(())
}

fn active_mask(basis: &BasisSet, active: &[Index]) -> Result<Vec<bool>> {
    let mut mask = vec![false; basis.len()];
    for &k in active {
        basis.check(k)?;
        mask[basis.flat(k)] = true;
    }
    Ok(mask)
}

// Ties resolve to the lowest flat index; zero scores never win.
fn argmax(basis: &BasisSet, active: &[bool], score: impl Fn(usize) -> f64) -> Option<Selection> {
    let mut best: Option<(usize, f64)> = None;
    for (f, _) in active.iter().enumerate().filter(|(_, &on)| on) {
        if !basis.is_canonical(basis.index(f)) {
            continue;
        }
        let s = score(f);
        if s > best.map_or(0.0, |b| b.1) {
            best = Some((f, s));
        }
    }
    best.map(|(f, _)| selection_of(basis, basis.index(f)))
}

/// Function maximizing `|p_k|^2 sum w |phi_k|^2`, i.e. the largest decrease of
/// the weighted residual energy. `None` once the residual is zero.
pub fn select_min_distance(
    residual: &SampleGrid,
    weight: &WeightField,
    basis: &BasisSet,
    active: &[Index],
) -> Result<Option<Selection>> {
    check_shapes(residual, weight, basis)?;
    let active = active_mask(basis, active)?;
    let rw = weighted(residual, weight);
    let numer = basis.decompose_real(&rw, residual.height(), residual.width())?;
    let norms = norms_for(basis, weight)?;
    Ok(argmax(basis, &active, |f| distance_score(numer[f], norms[f])))
}

fn distance_score(numer: Complex64, norm: f64) -> f64 {
    if norm > 0.0 {
        numer.norm_sqr() / norm
    } else {
        0.0
    }
}

/// Function with the largest weighted scalar product `|decompose(w r)[k]|`.
pub fn select_max_portion(
    weighted_coeffs: &[Complex64],
    basis: &BasisSet,
    active: &[Index],
) -> Result<Option<Selection>> {
    if weighted_coeffs.len() != basis.len() {
        return Err(Error::ShapeMismatch("coefficient count".into()));
    }
    let active = active_mask(basis, active)?;
    Ok(argmax(basis, &active, |f| weighted_coeffs[f].norm()))
}

/// Outcome of full compensation for one function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compensated {
    pub coefficient: Complex64,
    pub gamma: Complex64,
    /// `S_u` vanished; the raw projection was returned.
    pub degenerate: bool,
}

/// `c_u = p_u^2 / S_u` with `S_u = sum_l p_l K_hat[u, l]`, given the
/// projections of all functions and row `u` of the normalized Gram matrix.
pub fn compensate_full(p: &[Complex64], u: usize, k_hat_row: &[Complex64]) -> Result<Compensated> {
    if p.len() != k_hat_row.len() || u >= p.len() {
        return Err(Error::ShapeMismatch("projection and gram row".into()));
    }
    let pu = p[u];
    let s: Complex64 = p.iter().zip(k_hat_row).map(|(a, b)| a * b).sum();
    if pu.norm() == 0.0 || s.norm() < DEGENERATE_RATIO * pu.norm() {
        return Ok(Compensated {
            coefficient: pu,
            gamma: Complex64::new(1.0, 0.0),
            degenerate: true,
        });
    }
    let gamma = pu / s;
    Ok(Compensated {
        coefficient: gamma * pu,
        gamma,
        degenerate: false,
    })
}

pub fn compensate_constant(p_u: Complex64, gamma: f64) -> Complex64 {
    p_u * gamma
}

fn weighted(residual: &SampleGrid, weight: &WeightField) -> Vec<f64> {
    residual
        .samples()
        .iter()
        .zip(weight.values())
        .map(|(r, w)| r * w)
        .collect()
}

fn norms_for(basis: &BasisSet, weight: &WeightField) -> Result<Vec<f64>> {
    match basis.kind() {
        // |phi_k| = 1 everywhere, so all norms equal the weight total exactly
        BasisKind::Dft2d => Ok(vec![weight.total(); basis.len()]),
        BasisKind::Dct2d => weighted_norms(basis, weight),
    }
}

fn energy_of(residual: &SampleGrid, weight: &WeightField) -> f64 {
    residual
        .samples()
        .iter()
        .zip(weight.values())
        .map(|(r, w)| w * r * r)
        .sum()
}

/// Result of one call to [`SpatialEngine::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Applied(TraceRecord),
    Converged,
}

/// Extrapolated window together with the per-iteration trace.
#[derive(Debug, Clone)]
pub struct Extrapolation {
    pub model: SampleGrid,
    pub trace: Vec<TraceRecord>,
}

/// Sample-domain engine bound to one window geometry.
#[derive(Debug, Clone)]
pub struct SpatialEngine {
    basis: BasisSet,
    weight: WeightField,
    mask: RegionMask,
    config: ExtrapolationConfig,
    norms: Vec<f64>,
    active: Vec<bool>,
}

impl SpatialEngine {
    /// Builds the basis and the isotropic weighting described by `config`.
    pub fn new(mask: &RegionMask, config: &ExtrapolationConfig) -> Result<Self> {
        config.validate()?;
        let basis = BasisSet::new(config.basis, config.transform_size)?;
        let weight = build_isotropic_weight(mask, config.rho_hat)?;
        Self::with_parts(basis, weight, mask, config)
    }

    /// Uses a caller-supplied basis and weighting.
    pub fn with_parts(
        basis: BasisSet,
        weight: WeightField,
        mask: &RegionMask,
        config: &ExtrapolationConfig,
    ) -> Result<Self> {
        config.validate()?;
        if weight.width() != mask.width() || weight.height() != mask.height() {
            return Err(Error::ShapeMismatch("weight and mask".into()));
        }
        if mask.width() > basis.size() || mask.height() > basis.size() {
            return Err(Error::TooLarge {
                rows: mask.height(),
                cols: mask.width(),
                size: basis.size(),
            });
        }
        let norms = norms_for(&basis, &weight)?;
        let active = vec![true; basis.len()];
        Ok(Self {
            basis,
            weight,
            mask: mask.clone(),
            config: *config,
            norms,
            active,
        })
    }

    /// Restricts selection to `active`.
    pub fn restrict(mut self, active: &[Index]) -> Result<Self> {
        self.active = active_mask(&self.basis, active)?;
        Ok(self)
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn weight(&self) -> &WeightField {
        &self.weight
    }

    pub fn config(&self) -> &ExtrapolationConfig {
        &self.config
    }

    /// Zero model; the residual equals `f` on the support.
    pub fn init(&self, f: &SampleGrid) -> Result<ModelState> {
        if f.width() != self.mask.width() || f.height() != self.mask.height() {
            return Err(Error::ShapeMismatch("signal and mask".into()));
        }
        let residual = SampleGrid::from_fn(f.width(), f.height(), |m, n| {
            if self.mask.label(m, n) == Label::Support {
                f.get(m, n)
            } else {
                0.0
            }
        })?;
        let energy = energy_of(&residual, &self.weight);
        Ok(ModelState {
            coefficients: BTreeMap::new(),
            residual,
            iteration: 0,
            initial_energy: energy,
            energy,
            converged: energy == 0.0,
            trace: Vec::new(),
        })
    }

    /// Applies one iteration.
    pub fn step(&self, state: &mut ModelState) -> Result<Step> {
        if state.converged || state.energy <= ENERGY_FLOOR * state.initial_energy {
            state.converged = true;
            return Ok(Step::Converged);
        }
        let (rows, cols) = (state.residual.height(), state.residual.width());
        let rw = weighted(&state.residual, &self.weight);
        let numer = self.basis.decompose_real(&rw, rows, cols)?;
        let norms = &self.norms;
        let selection = match self.config.selection {
            SelectionRule::MinDistance => {
                argmax(&self.basis, &self.active, |f| distance_score(numer[f], norms[f]))
            }
            SelectionRule::MaxWeightedPortion => argmax(&self.basis, &self.active, |f| {
                if norms[f] > 0.0 {
                    numer[f].norm()
                } else {
                    0.0
                }
            }),
        };
        let Some(sel) = selection else {
            state.converged = true;
            return Ok(Step::Converged);
        };
        let u = sel.index;
        let uf = self.basis.flat(u);
        let p_u = numer[uf] / norms[uf];

        let mut degenerate = false;
        let mut coeff = match self.config.compensation {
            Compensation::None => p_u,
            Compensation::Constant(g) => compensate_constant(p_u, g),
            Compensation::Full => {
                let p: Vec<Complex64> = (0..self.basis.len())
                    .map(|f| {
                        if self.active[f] && norms[f] > 0.0 {
                            numer[f] / norms[f]
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect();
                let mut row = gram_row(&self.basis, &self.weight, u)?;
                for v in &mut row {
                    *v /= norms[uf];
                }
                let c = compensate_full(&p, uf, &row)?;
                degenerate = c.degenerate;
                c.coefficient
            }
        };
        if self.basis.is_complex() && sel.partner.is_none() {
            coeff = Complex64::new(coeff.re, 0.0);
        }

        for m in 0..rows {
            for n in 0..cols {
                if self.mask.label(m, n) != Label::Support {
                    continue;
                }
                let mut d = coeff * self.basis.value(u, m, n);
                if let Some(ub) = sel.partner {
                    d += coeff.conj() * self.basis.value(ub, m, n);
                }
                let r = state.residual.get(m, n) - d.re;
                state.residual.set(m, n, r)?;
            }
        }
        *state.coefficients.entry(u).or_default() += coeff;
        if let Some(ub) = sel.partner {
            *state.coefficients.entry(ub).or_default() += coeff.conj();
        }
        state.iteration += 1;
        state.energy = energy_of(&state.residual, &self.weight);
        let record = TraceRecord {
            iteration: state.iteration,
            index: u,
            projection: p_u,
            coefficient: coeff,
            gamma_effective: effective_gamma(coeff, p_u),
            weighted_energy: state.energy,
            degenerate,
        };
        state.trace.push(record);
        Ok(Step::Applied(record))
    }

    /// Real part of `g = sum c_k phi_k` over the window.
    pub fn synthesize(&self, state: &ModelState) -> Result<SampleGrid> {
        let (rows, cols) = (self.mask.height(), self.mask.width());
        let mut out = vec![Complex64::new(0.0, 0.0); rows * cols];
        for (&k, &c) in &state.coefficients {
            for m in 0..rows {
                let a = self.basis.atom(k.k1, m) * c;
                for n in 0..cols {
                    out[m * cols + n] += a * self.basis.atom(k.k2, n);
                }
            }
        }
        SampleGrid::new(cols, rows, out.into_iter().map(|v| v.re).collect())
    }

    /// Runs up to `config.iterations` iterations.
    pub fn run(&self, f: &SampleGrid) -> Result<Extrapolation> {
        let mut state = self.init(f)?;
        for _ in 0..self.config.iterations {
            if self.step(&mut state)? == Step::Converged {
                break;
            }
        }
        Ok(Extrapolation {
            model: self.synthesize(&state)?,
            trace: state.trace,
        })
    }
}

/// Extrapolates `f` over the whole window in the sample domain.
pub fn run(f: &SampleGrid, mask: &RegionMask, config: &ExtrapolationConfig) -> Result<Extrapolation> {
    SpatialEngine::new(mask, config)?.run(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_region_mask, Rect};

    fn config(basis: BasisKind, comp: Compensation, iterations: usize, t: usize) -> ExtrapolationConfig {
        ExtrapolationConfig {
            iterations,
            transform_size: t,
            rho_hat: 0.8,
            basis,
            selection: SelectionRule::MaxWeightedPortion,
            compensation: comp,
        }
    }

    #[test]
    fn validation() {
        let mut c = ExtrapolationConfig::default();
        assert!(c.validate().is_ok());
        c.compensation = Compensation::Constant(0.0);
        assert_eq!(c.validate(), Err(Error::Gamma(0.0)));
        c.compensation = Compensation::Constant(1.5);
        assert_eq!(c.validate(), Err(Error::Gamma(1.5)));
        c.compensation = Compensation::Constant(1.0);
        c.iterations = 0;
        assert_eq!(c.validate(), Err(Error::Iterations));
        c.iterations = 1;
        c.rho_hat = 1.0;
        assert_eq!(c.validate(), Err(Error::RhoHat(1.0)));
    }

    #[test]
    fn projection_of_a_basis_function_is_one() {
        let mask = build_region_mask(6, 6, &[Rect::new(2, 2, 2, 2)], &[]).unwrap();
        let w = build_isotropic_weight(&mask, 0.7).unwrap();
        let b = BasisSet::dct(8).unwrap();
        let k = Index::new(1, 2);
        let s = SampleGrid::from_fn(6, 6, |m, n| {
            if mask.label(m, n) == Label::Support {
                b.value(k, m, n).re
            } else {
                0.0
            }
        })
        .unwrap();
        let p = project_coefficient(&s, &w, &b, k).unwrap();
        assert!((p - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn vanishing_basis() {
        let mut labels = vec![Label::Missing; 4];
        labels[0] = Label::Support;
        let mask = RegionMask::from_labels(2, 2, labels).unwrap();
        let w = WeightField::from_model(&mask, 0.5, (0.0, 0.0), |_, _| 0.0).unwrap();
        let b = BasisSet::dct(2).unwrap();
        let r = SampleGrid::zeros(2, 2).unwrap();
        assert_eq!(
            project_coefficient(&r, &w, &b, Index::new(0, 0)),
            Err(Error::VanishingBasis)
        );
    }

    #[test]
    fn full_compensation_examples() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let out = compensate_full(&[c(2.0), c(0.0)], 0, &[c(1.0), c(0.3)]).unwrap();
        assert_eq!(out.coefficient, c(2.0));
        assert!(!out.degenerate);

        let out = compensate_full(&[c(1.0), c(1.0)], 0, &[c(1.0), c(0.5)]).unwrap();
        assert!((out.coefficient - c(1.0 / 1.5)).norm() < 1e-15);
        assert!((out.gamma - c(1.0 / 1.5)).norm() < 1e-15);

        let out = compensate_full(&[c(1.0), c(1.0)], 0, &[c(1.0), c(-1.0)]).unwrap();
        assert!(out.degenerate);
        assert_eq!(out.coefficient, c(1.0));
    }

    #[test]
    fn constant_signal_on_dc() {
        let mask = build_region_mask(8, 8, &[Rect::new(2, 2, 4, 4)], &[]).unwrap();
        let f = SampleGrid::filled(8, 8, 3.0).unwrap();
        for kind in [BasisKind::Dft2d, BasisKind::Dct2d] {
            let out = run(&f, &mask, &config(kind, Compensation::None, 1, 8)).unwrap();
            assert_eq!(out.trace[0].index, Index::new(0, 0));
            for &v in out.model.samples() {
                assert!((v - 3.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn missing_and_outside_do_not_leak_into_residual() {
        let mask = build_region_mask(6, 6, &[Rect::new(1, 1, 2, 2)], &[Rect::new(4, 4, 2, 2)]).unwrap();
        let f = SampleGrid::from_fn(6, 6, |m, n| (m * 7 + n * 3) as f64).unwrap();
        let engine = SpatialEngine::new(&mask, &config(BasisKind::Dft2d, Compensation::Constant(0.5), 5, 8)).unwrap();
        let mut state = engine.init(&f).unwrap();
        for _ in 0..5 {
            engine.step(&mut state).unwrap();
            for m in 0..6 {
                for n in 0..6 {
                    if mask.label(m, n) != Label::Support {
                        assert_eq!(state.residual().get(m, n), 0.0);
                    }
                }
            }
        }
        assert_eq!(state.trace().len(), 5);
    }

    #[test]
    fn zero_signal_converges_immediately() {
        let mask = build_region_mask(4, 4, &[Rect::new(1, 1, 2, 2)], &[]).unwrap();
        let f = SampleGrid::zeros(4, 4).unwrap();
        let out = run(&f, &mask, &config(BasisKind::Dft2d, Compensation::Full, 10, 4)).unwrap();
        assert!(out.trace.is_empty());
        assert!(out.model.samples().iter().all(|&v| v == 0.0));
    }
}
