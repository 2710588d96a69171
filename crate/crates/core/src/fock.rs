//! Truncated multimode bosonic Fock space.
//!
//! A [`FockBasis`] holds every occupation pattern of `M` modes whose total
//! photon number is at most `n_bound`, ordered by grade (total photon
//! number) and lexicographically within each grade. Because the ordering is
//! fixed, basis indices are stable identifiers that other modules (notably
//! the pixel encoder of the reservoir) can rely on.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::Real;

/// Photon counts per mode.
pub type Occupation = Vec<u8>;

#[derive(Debug, Clone)]
pub struct FockBasis {
    modes: usize,
    photon_bound: u32,
    occupations: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
    /// `grade_offsets[n]..grade_offsets[n + 1]` is the index range of grade `n`.
    grade_offsets: Vec<usize>,
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        self.modes == other.modes && self.photon_bound == other.photon_bound
    }
}

impl Eq for FockBasis {}

impl FockBasis {
    pub fn enumerate(modes: usize, photon_bound: u32) -> Result<Self> {
        if modes == 0 {
            return Err(Error::param("modes", "mode count must be at least 1"));
        }
        if photon_bound > u8::MAX as u32 {
            return Err(Error::param("photon_bound", "at most 255 photons are supported"));
        }
        let mut occupations = Vec::with_capacity(Self::expected_size(modes, photon_bound));
        let mut grade_offsets = Vec::with_capacity(photon_bound as usize + 2);
        let mut scratch = vec![0u8; modes];
        for n in 0..=photon_bound {
            grade_offsets.push(occupations.len());
            compositions(n as u8, 0, &mut scratch, &mut occupations);
        }
        grade_offsets.push(occupations.len());
        let index = occupations
            .iter()
            .enumerate()
            .map(|(i, o)| (o.clone(), i))
            .collect();
        Ok(Self {
            modes,
            photon_bound,
            occupations,
            index,
            grade_offsets,
        })
    }

    /// `Σ_{n ≤ bound} C(n + M - 1, M - 1)`, the number of basis states.
    pub fn expected_size(modes: usize, photon_bound: u32) -> usize {
        (0..=photon_bound as usize)
            .map(|n| binomial(n + modes - 1, modes - 1))
            .sum()
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn photon_bound(&self) -> u32 {
        self.photon_bound
    }

    pub fn len(&self) -> usize {
        self.occupations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupations.is_empty()
    }

    pub fn occupation(&self, index: usize) -> &[u8] {
        &self.occupations[index]
    }

    pub fn occupations(&self) -> &[Occupation] {
        &self.occupations
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    /// Index range of the states holding exactly `photons` photons.
    pub fn grade_range(&self, photons: u32) -> Range<usize> {
        if photons > self.photon_bound {
            return self.len()..self.len();
        }
        let n = photons as usize;
        self.grade_offsets[n]..self.grade_offsets[n + 1]
    }

    pub fn total_photons(&self, index: usize) -> u32 {
        self.occupations[index].iter().map(|&k| k as u32).sum()
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes {
            return Err(Error::ModeOutOfRange {
                mode,
                modes: self.modes,
            });
        }
        Ok(())
    }
}

/// Appends every length-`scratch.len()` composition of `remaining` photons,
/// starting at position `pos`, in ascending lexicographic order.
fn compositions(remaining: u8, pos: usize, scratch: &mut [u8], out: &mut Vec<Occupation>) {
    if pos + 1 == scratch.len() {
        scratch[pos] = remaining;
        out.push(scratch.to_vec());
        return;
    }
    for k in 0..=remaining {
        scratch[pos] = k;
        compositions(remaining - k, pos + 1, scratch, out);
    }
    scratch[pos] = 0;
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Whether products that leave the photon bound are an error or dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    Forbid,
    Discard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState<T> {
    basis: Arc<FockBasis>,
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> PureState<T> {
    pub fn new(basis: Arc<FockBasis>, amplitudes: Vec<Complex<T>>) -> Result<Self> {
        if amplitudes.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                what: "pure state amplitudes",
                expected: basis.len(),
                found: amplitudes.len(),
            });
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn basis_state(basis: Arc<FockBasis>, occupation: &[u8]) -> Result<Self> {
        Self::from_terms(basis, &[(occupation, Complex::new(T::one(), T::zero()))])
    }

    pub fn vacuum(basis: Arc<FockBasis>) -> Self {
        let mut amplitudes = vec![Complex::zero(); basis.len()];
        amplitudes[0] = Complex::new(T::one(), T::zero());
        Self { basis, amplitudes }
    }

    /// Superposition `Σ c_k |occ_k⟩`; not normalized.
    pub fn from_terms(basis: Arc<FockBasis>, terms: &[(&[u8], Complex<T>)]) -> Result<Self> {
        let mut amplitudes = vec![Complex::zero(); basis.len()];
        for (occ, amp) in terms {
            if occ.len() != basis.modes() {
                return Err(Error::DimensionMismatch {
                    what: "occupation length",
                    expected: basis.modes(),
                    found: occ.len(),
                });
            }
            let idx = basis.index_of(occ).ok_or_else(|| Error::PhotonBoundExceeded {
                occupation: occ.to_vec(),
                bound: basis.photon_bound(),
            })?;
            amplitudes[idx] += *amp;
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.amplitudes
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(mut self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::param("state", "cannot normalize a zero or non-finite vector"));
        }
        let inv = n.recip();
        for a in &mut self.amplitudes {
            *a = a.scale(inv);
        }
        Ok(self)
    }

    pub fn populations(&self) -> Vec<T> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn mean_photon_number(&self, mode: usize) -> Result<T> {
        self.basis.check_mode(mode)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(self.basis.occupations())
            .map(|(a, occ)| a.norm_sqr() * T::from_count(occ[mode] as usize))
            .sum())
    }

    /// `⟨n_q⟩` for every mode in one pass.
    pub fn mean_photon_numbers(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.basis.modes()];
        for (a, occ) in self.amplitudes.iter().zip(self.basis.occupations()) {
            let p = a.norm_sqr();
            if p.is_zero() {
                continue;
            }
            for (o, &k) in out.iter_mut().zip(occ) {
                *o += p * T::from_count(k as usize);
            }
        }
        out
    }

    pub fn to_mixed(&self) -> MixedState<T> {
        MixedState {
            basis: Arc::clone(&self.basis),
            matrix: CMatrix::outer(&self.amplitudes, &self.amplitudes),
        }
    }

    /// `|self⟩ ⊗ |other⟩` on the concatenated modes, capped at `photon_bound`.
    pub fn tensor_product(&self, other: &Self, photon_bound: u32, truncation: Truncation) -> Result<Self> {
        let basis = Arc::new(FockBasis::enumerate(
            self.basis.modes() + other.basis.modes(),
            photon_bound,
        )?);
        let mut amplitudes = vec![Complex::zero(); basis.len()];
        let mut occ = Vec::with_capacity(basis.modes());
        for (i, a) in self.amplitudes.iter().enumerate() {
            for (j, b) in other.amplitudes.iter().enumerate() {
                let amp = a * b;
                occ.clear();
                occ.extend_from_slice(self.basis.occupation(i));
                occ.extend_from_slice(other.basis.occupation(j));
                match basis.index_of(&occ) {
                    Some(k) => amplitudes[k] += amp,
                    None if amp.is_zero() || truncation == Truncation::Discard => {}
                    None => {
                        return Err(Error::PhotonBoundExceeded {
                            occupation: occ,
                            bound: photon_bound,
                        })
                    }
                }
            }
        }
        Ok(Self { basis, amplitudes })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedState<T> {
    basis: Arc<FockBasis>,
    matrix: CMatrix<T>,
}

impl<T: Real> MixedState<T> {
    pub fn new(basis: Arc<FockBasis>, matrix: CMatrix<T>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        if matrix.rows() != basis.len() {
            return Err(Error::DimensionMismatch {
                what: "density matrix",
                expected: basis.len(),
                found: matrix.rows(),
            });
        }
        Ok(Self { basis, matrix })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut CMatrix<T> {
        &mut self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    pub fn trace(&self) -> T {
        self.matrix.trace().re
    }

    pub fn populations(&self) -> Vec<T> {
        (0..self.basis.len()).map(|i| self.matrix[(i, i)].re).collect()
    }

    pub fn mean_photon_number(&self, mode: usize) -> Result<T> {
        self.basis.check_mode(mode)?;
        Ok(self
            .basis
            .occupations()
            .iter()
            .enumerate()
            .map(|(i, occ)| self.matrix[(i, i)].re * T::from_count(occ[mode] as usize))
            .sum())
    }

    pub fn mean_photon_numbers(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.basis.modes()];
        for (i, occ) in self.basis.occupations().iter().enumerate() {
            let p = self.matrix[(i, i)].re;
            for (o, &k) in out.iter_mut().zip(occ) {
                *o += p * T::from_count(k as usize);
            }
        }
        out
    }

    /// Reduced state on `keep` (in the given order); every other mode is traced out.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        PartialTrace::new(&self.basis, keep)?.apply(self)
    }

    /// `ρ ⊗ σ` on the concatenated modes, capped at `photon_bound`.
    pub fn tensor_product(&self, other: &Self, photon_bound: u32, truncation: Truncation) -> Result<Self> {
        let basis = Arc::new(FockBasis::enumerate(
            self.basis.modes() + other.basis.modes(),
            photon_bound,
        )?);
        // Map each (i, j) index pair into the product basis up front.
        let mut targets = Vec::with_capacity(self.basis.len() * other.basis.len());
        let mut occ = Vec::with_capacity(basis.modes());
        for i in 0..self.basis.len() {
            for j in 0..other.basis.len() {
                occ.clear();
                occ.extend_from_slice(self.basis.occupation(i));
                occ.extend_from_slice(other.basis.occupation(j));
                targets.push((i, j, basis.index_of(&occ)));
            }
        }
        let mut matrix = CMatrix::zeros(basis.len(), basis.len());
        for &(i, j, row) in &targets {
            for &(k, l, col) in &targets {
                let v = self.matrix[(i, k)] * other.matrix[(j, l)];
                match (row, col) {
                    (Some(r), Some(c)) => matrix[(r, c)] += v,
                    _ if v.is_zero() || truncation == Truncation::Discard => {}
                    _ => {
                        let bad = if row.is_none() { (i, j) } else { (k, l) };
                        let mut occupation = self.basis.occupation(bad.0).to_vec();
                        occupation.extend_from_slice(other.basis.occupation(bad.1));
                        return Err(Error::PhotonBoundExceeded {
                            occupation,
                            bound: photon_bound,
                        });
                    }
                }
            }
        }
        Ok(Self { basis, matrix })
    }

    /// Checks the density-matrix invariants (Hermitian, unit trace) at `tol`.
    pub fn is_valid(&self, tol: T) -> bool {
        self.matrix.hermiticity_residual() <= tol && (self.trace() - T::one()).abs() <= tol
    }
}

/// Precomputed index bookkeeping for tracing out modes of a fixed basis.
#[derive(Debug, Clone)]
pub struct PartialTrace {
    full: Arc<FockBasis>,
    reduced: Arc<FockBasis>,
    /// Groups of `(full index, reduced index)` sharing the same discarded occupation.
    groups: Vec<Vec<(usize, usize)>>,
}

impl PartialTrace {
    pub fn new(full: &Arc<FockBasis>, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::Empty("partial trace keep set"));
        }
        let mut seen = vec![false; full.modes()];
        for &m in keep {
            full.check_mode(m)?;
            if seen[m] {
                return Err(Error::param("keep", format!("mode {m} listed twice")));
            }
            seen[m] = true;
        }
        let reduced = Arc::new(FockBasis::enumerate(keep.len(), full.photon_bound())?);
        let discarded: Vec<usize> = (0..full.modes()).filter(|m| !seen[*m]).collect();
        let mut by_rest: HashMap<Vec<u8>, usize> = HashMap::new();
        let mut groups: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut kept_occ = Vec::with_capacity(keep.len());
        for (i, occ) in full.occupations().iter().enumerate() {
            kept_occ.clear();
            kept_occ.extend(keep.iter().map(|&m| occ[m]));
            let rest: Vec<u8> = discarded.iter().map(|&m| occ[m]).collect();
            let r = reduced
                .index_of(&kept_occ)
                .expect("kept occupation is within the same photon bound");
            let g = *by_rest.entry(rest).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push((i, r));
        }
        Ok(Self {
            full: Arc::clone(full),
            reduced,
            groups,
        })
    }

    pub fn reduced_basis(&self) -> &Arc<FockBasis> {
        &self.reduced
    }

    pub fn apply<T: Real>(&self, state: &MixedState<T>) -> Result<MixedState<T>> {
        if *state.basis != *self.full {
            return Err(Error::DimensionMismatch {
                what: "partial trace input basis",
                expected: self.full.len(),
                found: state.basis.len(),
            });
        }
        let mut out = CMatrix::zeros(self.reduced.len(), self.reduced.len());
        for group in &self.groups {
            for &(a, ra) in group {
                for &(b, rb) in group {
                    out[(ra, rb)] += state.matrix[(a, b)];
                }
            }
        }
        Ok(MixedState {
            basis: Arc::clone(&self.reduced),
            matrix: out,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    type C = Complex<f64>;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn basis(m: usize, n: u32) -> Arc<FockBasis> {
        Arc::new(FockBasis::enumerate(m, n).unwrap())
    }

    #[test]
    fn basis_sizes() {
        let b = FockBasis::enumerate(1, 1).unwrap();
        assert_eq!(b.occupations(), &[vec![0], vec![1]]);
        assert_eq!(FockBasis::enumerate(9, 3).unwrap().len(), 220);
        assert_eq!(FockBasis::enumerate(4, 2).unwrap().len(), 15);
        assert!(FockBasis::enumerate(0, 2).is_err());
    }

    #[test]
    fn graded_lexicographic_order() {
        let b = FockBasis::enumerate(2, 2).unwrap();
        let expect: Vec<Occupation> = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![0, 2], vec![1, 1], vec![2, 0]];
        assert_eq!(b.occupations(), expect.as_slice());
        assert_eq!(b.grade_range(1), 1..3);
        assert_eq!(b.grade_range(3), 6..6);
    }

    #[test]
    fn basis_matches_brute_force_enumeration() {
        // Independent route: scan every tuple in [0, n]^M, keep those under the bound.
        for (m, n) in [(1usize, 3u32), (3, 2), (4, 2), (5, 3)] {
            let mut brute: Vec<Occupation> = Vec::new();
            let total = (n as usize + 1).pow(m as u32);
            for code in 0..total {
                let mut x = code;
                let mut occ = vec![0u8; m];
                for slot in occ.iter_mut().rev() {
                    *slot = (x % (n as usize + 1)) as u8;
                    x /= n as usize + 1;
                }
                if occ.iter().map(|&k| k as u32).sum::<u32>() <= n {
                    brute.push(occ);
                }
            }
            brute.sort_by(|a, b| {
                let sa: u32 = a.iter().map(|&k| k as u32).sum();
                let sb: u32 = b.iter().map(|&k| k as u32).sum();
                sa.cmp(&sb).then_with(|| a.cmp(b))
            });
            let b = FockBasis::enumerate(m, n).unwrap();
            assert_eq!(b.occupations(), brute.as_slice());
            assert_eq!(b.len(), FockBasis::expected_size(m, n));
            for (i, occ) in b.occupations().iter().enumerate() {
                assert_eq!(b.index_of(occ), Some(i));
            }
        }
    }

    #[test]
    fn mean_photon_number_examples() {
        let b1 = basis(1, 1);
        assert_eq!(PureState::<f64>::vacuum(b1.clone()).mean_photon_number(0).unwrap(), 0.0);
        let phi = 0.37f64;
        let s = PureState::new(b1, vec![c(phi.cos(), 0.0), c(phi.sin(), 0.0)]).unwrap();
        assert_abs_diff_eq!(s.mean_photon_number(0).unwrap(), phi.sin().powi(2), epsilon = 1e-15);
        let b4 = basis(4, 2);
        let s = PureState::<f64>::basis_state(b4, &[0, 0, 1, 1]).unwrap();
        assert_eq!(s.mean_photon_number(3).unwrap(), 1.0);
        assert_eq!(s.to_mixed().mean_photon_number(3).unwrap(), 1.0);
        assert!(matches!(s.mean_photon_number(4), Err(Error::ModeOutOfRange { .. })));
    }

    #[test]
    fn normalize_and_outer_product() {
        let b = basis(1, 1);
        let s = PureState::new(b.clone(), vec![c(2.0, 0.0), c(0.0, 0.0)]).unwrap().normalize().unwrap();
        assert_eq!(s.amplitudes(), &[c(1.0, 0.0), c(0.0, 0.0)]);
        let one = PureState::<f64>::basis_state(b.clone(), &[1]).unwrap().to_mixed();
        assert_eq!(one.matrix()[(1, 1)], c(1.0, 0.0));
        assert_eq!(one.trace(), 1.0);
        assert!(PureState::new(b, vec![C::zero(); 2]).unwrap().normalize().is_err());
    }

    #[test]
    fn tensor_product_examples() {
        let b = basis(1, 1);
        let one = PureState::<f64>::basis_state(b.clone(), &[1]).unwrap();
        let prod = one.tensor_product(&one, 2, Truncation::Forbid).unwrap();
        assert_eq!(prod.basis().modes(), 2);
        let idx = prod.basis().index_of(&[1, 1]).unwrap();
        assert_eq!(prod.amplitudes()[idx], c(1.0, 0.0));
        assert!(matches!(
            one.tensor_product(&one, 1, Truncation::Forbid),
            Err(Error::PhotonBoundExceeded { .. })
        ));
        let dropped = one.tensor_product(&one, 1, Truncation::Discard).unwrap();
        assert_eq!(dropped.norm_sqr(), 0.0);
        let mixed = one.to_mixed().tensor_product(&one.to_mixed(), 2, Truncation::Forbid).unwrap();
        assert_eq!(mixed, prod.to_mixed());
    }

    #[test]
    fn partial_trace_identity_and_product() {
        let b2 = basis(2, 2);
        let psi = PureState::from_terms(
            b2.clone(),
            &[(&[0, 0][..], c(0.6, 0.0)), (&[1, 0][..], c(0.0, 0.8))],
        )
        .unwrap();
        let rho = psi.to_mixed();
        let same = rho.partial_trace(&[0, 1]).unwrap();
        assert_eq!(same.matrix().max_abs_diff(rho.matrix()), 0.0);

        let b1 = basis(1, 1);
        let a = PureState::new(b1.clone(), vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap().to_mixed();
        let sigma = PureState::new(b1, vec![c(0.8, 0.0), c(0.6, 0.0)]).unwrap().to_mixed();
        let prod = a.tensor_product(&sigma, 2, Truncation::Forbid).unwrap();
        let back = prod.partial_trace(&[0]).unwrap();
        // Reduced basis carries the full bound (2) but only grades 0/1 are populated.
        for r in 0..2 {
            for col in 0..2 {
                assert_abs_diff_eq!((back.matrix()[(r, col)] - a.matrix()[(r, col)]).norm(), 0.0, epsilon = 1e-15);
            }
        }
        assert!(matches!(prod.partial_trace(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn partial_trace_mzi_output_coherence() {
        // α|00⟩ + β cos(θ/2)|10⟩ + iβ sin(θ/2)|01⟩: ⟨0|ρ_C|1⟩ = α β* cos(θ/2).
        let (alpha, beta, theta) = (c(0.6, 0.1), c(0.3, -0.2), 1.1f64);
        let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        let (alpha, beta) = (alpha / norm, beta / norm);
        let half = theta / 2.0;
        let psi = PureState::from_terms(
            basis(2, 1),
            &[
                (&[0, 0][..], alpha),
                (&[1, 0][..], beta * half.cos()),
                (&[0, 1][..], beta * c(0.0, half.sin())),
            ],
        )
        .unwrap();
        let rho_c = psi.to_mixed().partial_trace(&[0]).unwrap();
        let expected = alpha * beta.conj() * half.cos();
        assert_abs_diff_eq!((rho_c.matrix()[(0, 1)] - expected).norm(), 0.0, epsilon = 1e-15);
    }

    fn random_mixed(b: &Arc<FockBasis>, seed: &[f64]) -> MixedState<f64> {
        // Mixture of three random pure states.
        let n = b.len();
        let mut acc = CMatrix::zeros(n, n);
        let weights = [0.5, 0.3, 0.2];
        for (s, w) in weights.iter().enumerate() {
            let amps: Vec<C> = (0..n)
                .map(|i| c(seed[(2 * i + s) % seed.len()] + 0.01, seed[(2 * i + 1 + 3 * s) % seed.len()]))
                .collect();
            let psi = PureState::new(b.clone(), amps).unwrap().normalize().unwrap();
            let mut m = psi.to_mixed().into_matrix();
            m.scale(*w);
            for (a, x) in acc.as_mut_slice().iter_mut().zip(m.as_slice()) {
                *a += x;
            }
        }
        MixedState::new(b.clone(), acc).unwrap()
    }

    proptest! {
        #[test]
        fn mean_photon_number_is_linear(seed in proptest::collection::vec(-1.0f64..1.0, 40), w in 0.0f64..1.0) {
            let b = basis(3, 2);
            let r1 = random_mixed(&b, &seed);
            let rev: Vec<f64> = seed.iter().rev().copied().collect();
            let r2 = random_mixed(&b, &rev);
            let mut mix = r1.matrix().clone();
            for (m, (a, z)) in mix.as_mut_slice().iter_mut().zip(r1.matrix().as_slice().iter().zip(r2.matrix().as_slice())) {
                *m = a.scale(w) + z.scale(1.0 - w);
            }
            let mix = MixedState::new(b, mix).unwrap();
            for q in 0..3 {
                let lhs = mix.mean_photon_number(q).unwrap();
                let rhs = w * r1.mean_photon_number(q).unwrap() + (1.0 - w) * r2.mean_photon_number(q).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12);
            }
        }

        #[test]
        fn partial_trace_preserves_trace_and_composes(seed in proptest::collection::vec(-1.0f64..1.0, 40)) {
            let b = basis(3, 2);
            let rho = random_mixed(&b, &seed);
            let once = rho.partial_trace(&[0]).unwrap();
            prop_assert!((once.trace() - rho.trace()).abs() <= 1e-12);
            prop_assert!(once.matrix().hermiticity_residual() <= 1e-12);
            let staged = rho.partial_trace(&[0, 1]).unwrap().partial_trace(&[0]).unwrap();
            prop_assert!(staged.matrix().max_abs_diff(once.matrix()) <= 1e-12);
        }
    }
}
