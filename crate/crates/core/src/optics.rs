//! Linear optics on truncated Fock space.
//!
//! Mode unitaries act on creation operators as `a†_j → Σ_i U_ij a†_i`; their
//! Fock-space lift has matrix elements
//! `⟨m|Û|n⟩ = perm(U[m, n]) / √(∏ m_i! ∏ n_j!)`, where `U[m, n]` repeats row
//! `i` `m_i` times and column `j` `n_j` times. The lift preserves photon
//! number, so it is stored as one dense block per grade.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::{Complex, Complex64};
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fock::{binomial, FockBasis, MixedState, PureState, Truncation};
use crate::linalg::CMatrix;
use crate::scalar::Real;

fn unitarity_tol<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(1e3))
}

/// Unitary acting on the single-photon (mode) space.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeUnitary<T> {
    matrix: CMatrix<T>,
}

impl<T: Real> ModeUnitary<T> {
    pub fn new(matrix: CMatrix<T>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        let residual = matrix.unitarity_residual();
        if !(residual <= unitarity_tol::<T>()) {
            return Err(Error::param("matrix", format!("not unitary (residual {residual})")));
        }
        Ok(Self { matrix })
    }

    pub fn identity(dimension: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dimension),
        }
    }

    /// Mach–Zehnder interferometer with internal phase `theta`:
    /// `[[cos(θ/2), i sin(θ/2)], [i sin(θ/2), cos(θ/2)]]`.
    ///
    /// Column 0 is the response to a photon entering port A: amplitude
    /// `cos(θ/2)` to C and `i sin(θ/2)` to D. Column 1 (port B) is fixed
    /// by symmetry; B only ever carries vacuum here.
    pub fn mzi(theta: T) -> Self {
        let half = theta / T::lit(2.0);
        let c = Complex::new(half.cos(), T::zero());
        let s = Complex::new(T::zero(), half.sin());
        Self {
            matrix: CMatrix::from_row_major(2, 2, vec![c, s, s, c]).expect("2x2"),
        }
    }

    /// Haar-distributed unitary from the QR decomposition of a complex
    /// Ginibre matrix, with Q's columns multiplied by the phases of R's
    /// diagonal. Deterministic in `seed`.
    pub fn haar_random(dimension: usize, seed: u64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::param("dimension", "must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        // Column-major fill keeps the draw order independent of nalgebra internals.
        let mut entries = Vec::with_capacity(dimension * dimension);
        for _ in 0..dimension * dimension {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            entries.push(Complex64::new(re * scale, im * scale));
        }
        let ginibre = DMatrix::from_column_slice(dimension, dimension, &entries);
        let qr = ginibre.qr();
        let q = qr.q();
        let r = qr.r();
        let matrix = CMatrix::from_fn(dimension, dimension, |i, j| {
            let d = r[(j, j)];
            let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::one() };
            let z = q[(i, j)] * phase;
            Complex::new(T::lit(z.re), T::lit(z.im))
        });
        Ok(Self { matrix })
    }

    pub fn dimension(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    /// `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            matrix: self.matrix.matmul(&other.matrix)?,
        })
    }

    /// Embeds this unitary on `targets` of a `modes`-mode system, identity elsewhere.
    pub fn embed(&self, modes: usize, targets: &[usize]) -> Result<Self> {
        if targets.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                what: "embedding targets",
                expected: self.dimension(),
                found: targets.len(),
            });
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= modes) {
            return Err(Error::ModeOutOfRange { mode: bad, modes });
        }
        let mut matrix = CMatrix::identity(modes);
        for (a, &ta) in targets.iter().enumerate() {
            for (b, &tb) in targets.iter().enumerate() {
                matrix[(ta, tb)] = self.matrix[(a, b)];
            }
        }
        Ok(Self { matrix })
    }
}

/// Permanent of a square matrix. Sizes up to 3 use direct expansion, larger
/// ones Ryser's formula.
pub fn permanent<T: Real>(m: &CMatrix<T>) -> Result<Complex<T>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let a = |r, c| m[(r, c)];
    Ok(match m.rows() {
        0 => Complex::one(),
        1 => a(0, 0),
        2 => a(0, 0) * a(1, 1) + a(0, 1) * a(1, 0),
        3 => {
            a(0, 0) * (a(1, 1) * a(2, 2) + a(1, 2) * a(2, 1))
                + a(0, 1) * (a(1, 0) * a(2, 2) + a(1, 2) * a(2, 0))
                + a(0, 2) * (a(1, 0) * a(2, 1) + a(1, 1) * a(2, 0))
        }
        _ => ryser(m),
    })
}

/// Ryser's inclusion–exclusion formula, `O(2^k k²)`.
pub fn permanent_ryser<T: Real>(m: &CMatrix<T>) -> Result<Complex<T>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    Ok(ryser(m))
}

fn ryser<T: Real>(m: &CMatrix<T>) -> Complex<T> {
    let n = m.rows();
    if n == 0 {
        return Complex::one();
    }
    let mut total = Complex::zero();
    for subset in 1u64..(1u64 << n) {
        let mut prod = Complex::<T>::one();
        for r in 0..n {
            let row_sum = (0..n)
                .filter(|c| subset & (1 << c) != 0)
                .fold(Complex::zero(), |acc, c| acc + m[(r, c)]);
            prod *= row_sum;
        }
        if (n - subset.count_ones() as usize) % 2 == 1 {
            total -= prod;
        } else {
            total += prod;
        }
    }
    total
}

fn factorial(n: u8) -> f64 {
    (1..=n as u32).map(f64::from).product()
}

/// The Fock-space lift of a [`ModeUnitary`], one dense block per photon grade.
#[derive(Debug, Clone)]
pub struct FockUnitary<T> {
    basis: Arc<FockBasis>,
    blocks: Vec<(Range<usize>, CMatrix<T>)>,
}

impl<T: Real> FockUnitary<T> {
    pub fn lift(unitary: &ModeUnitary<T>, basis: &Arc<FockBasis>) -> Result<Self> {
        if unitary.dimension() != basis.modes() {
            return Err(Error::DimensionMismatch {
                what: "mode unitary vs basis modes",
                expected: basis.modes(),
                found: unitary.dimension(),
            });
        }
        let u = unitary.matrix();
        let mut blocks = Vec::with_capacity(basis.photon_bound() as usize + 1);
        for grade in 0..=basis.photon_bound() {
            let range = basis.grade_range(grade);
            let k = grade as usize;
            // Repeated-index expansion and normalization per state.
            let expanded: Vec<(Vec<usize>, f64)> = range
                .clone()
                .map(|i| {
                    let occ = basis.occupation(i);
                    let idx = occ
                        .iter()
                        .enumerate()
                        .flat_map(|(mode, &count)| std::iter::repeat_n(mode, count as usize))
                        .collect();
                    let norm = occ.iter().map(|&c| factorial(c)).product::<f64>();
                    (idx, norm)
                })
                .collect();
            let dim = range.len();
            let mut block = CMatrix::zeros(dim, dim);
            let mut sub = CMatrix::zeros(k, k);
            for (r, (rows, rnorm)) in expanded.iter().enumerate() {
                for (c, (cols, cnorm)) in expanded.iter().enumerate() {
                    for (a, &ra) in rows.iter().enumerate() {
                        for (b, &cb) in cols.iter().enumerate() {
                            sub[(a, b)] = u[(ra, cb)];
                        }
                    }
                    let scale = T::lit((rnorm * cnorm).sqrt().recip());
                    block[(r, c)] = permanent(&sub)?.scale(scale);
                }
            }
            blocks.push((range, block));
        }
        Ok(Self {
            basis: Arc::clone(basis),
            blocks,
        })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn blocks(&self) -> &[(Range<usize>, CMatrix<T>)] {
        &self.blocks
    }

    pub fn to_dense(&self) -> CMatrix<T> {
        let n = self.basis.len();
        let mut out = CMatrix::zeros(n, n);
        for (range, block) in &self.blocks {
            for r in 0..range.len() {
                for c in 0..range.len() {
                    out[(range.start + r, range.start + c)] = block[(r, c)];
                }
            }
        }
        out
    }

    fn check_basis(&self, basis: &FockBasis) -> Result<()> {
        if *basis != *self.basis {
            return Err(Error::DimensionMismatch {
                what: "state basis vs lifted unitary",
                expected: self.basis.len(),
                found: basis.len(),
            });
        }
        Ok(())
    }

    pub fn apply_pure(&self, state: &PureState<T>) -> Result<PureState<T>> {
        self.check_basis(state.basis())?;
        let v = state.amplitudes();
        let mut out = vec![Complex::zero(); v.len()];
        for (range, block) in &self.blocks {
            let seg = &v[range.clone()];
            if seg.iter().all(Zero::is_zero) {
                continue;
            }
            let w = block.matvec(seg)?;
            out[range.clone()].copy_from_slice(&w);
        }
        PureState::new(Arc::clone(&self.basis), out)
    }

    /// `Û ρ Û†`, block by block.
    pub fn apply_mixed(&self, state: &MixedState<T>) -> Result<MixedState<T>> {
        self.check_basis(state.basis())?;
        let rho = state.matrix();
        let n = self.basis.len();
        let mut out = CMatrix::zeros(n, n);
        for (rg, ug) in &self.blocks {
            for (rh, uh) in &self.blocks {
                let sub = CMatrix::from_fn(rg.len(), rh.len(), |r, c| rho[(rg.start + r, rh.start + c)]);
                if sub.as_slice().iter().all(Zero::is_zero) {
                    continue;
                }
                let res = ug.matmul(&sub)?.matmul(&uh.adjoint())?;
                for r in 0..rg.len() {
                    for c in 0..rh.len() {
                        out[(rg.start + r, rh.start + c)] = res[(r, c)];
                    }
                }
            }
        }
        MixedState::new(Arc::clone(&self.basis), out)
    }

    /// Diagonal of `Û ρ Û†` without forming the full product.
    pub fn output_populations(&self, state: &MixedState<T>) -> Result<Vec<T>> {
        self.check_basis(state.basis())?;
        let rho = state.matrix();
        let mut out = vec![T::zero(); self.basis.len()];
        for (range, u) in &self.blocks {
            let sub = CMatrix::from_fn(range.len(), range.len(), |r, c| rho[(range.start + r, range.start + c)]);
            if sub.as_slice().iter().all(Zero::is_zero) {
                continue;
            }
            let w = u.matmul(&sub)?;
            for r in 0..range.len() {
                let p = w
                    .row(r)
                    .iter()
                    .zip(u.row(r))
                    .fold(Complex::zero(), |acc: Complex<T>, (a, b)| acc + a * b.conj());
                out[range.start + r] = p.re;
            }
        }
        Ok(out)
    }
}

/// Dense Fock-space matrix of `unitary` on `basis`.
pub fn lift_to_fock<T: Real>(unitary: &ModeUnitary<T>, basis: &Arc<FockBasis>) -> Result<CMatrix<T>> {
    Ok(FockUnitary::lift(unitary, basis)?.to_dense())
}

/// States that a lifted mode unitary can act on.
pub trait Evolve<T: Real>: Sized {
    fn evolve(&self, unitary: &FockUnitary<T>) -> Result<Self>;
    fn fock_basis(&self) -> &Arc<FockBasis>;
}

impl<T: Real> Evolve<T> for PureState<T> {
    fn evolve(&self, unitary: &FockUnitary<T>) -> Result<Self> {
        unitary.apply_pure(self)
    }

    fn fock_basis(&self) -> &Arc<FockBasis> {
        self.basis()
    }
}

impl<T: Real> Evolve<T> for MixedState<T> {
    fn evolve(&self, unitary: &FockUnitary<T>) -> Result<Self> {
        unitary.apply_mixed(self)
    }

    fn fock_basis(&self) -> &Arc<FockBasis> {
        self.basis()
    }
}

pub fn apply_mode_unitary<T: Real, S: Evolve<T>>(state: &S, unitary: &ModeUnitary<T>) -> Result<S> {
    state.evolve(&FockUnitary::lift(unitary, state.fock_basis())?)
}

/// Photon-loss channel on one mode of a fixed basis, with the per-state loss
/// targets precomputed so that the transmittance can change cheaply.
#[derive(Debug, Clone)]
pub struct AttenuationChannel {
    basis: Arc<FockBasis>,
    mode: usize,
    /// `targets[i][k]` is the index of state `i` after losing `k` photons from `mode`.
    targets: Vec<Vec<usize>>,
}

impl AttenuationChannel {
    pub fn new(basis: &Arc<FockBasis>, mode: usize) -> Result<Self> {
        if mode >= basis.modes() {
            return Err(Error::ModeOutOfRange {
                mode,
                modes: basis.modes(),
            });
        }
        let targets = basis
            .occupations()
            .iter()
            .map(|occ| {
                let mut lost = occ.clone();
                (0..=occ[mode])
                    .map(|k| {
                        lost[mode] = occ[mode] - k;
                        basis.index_of(&lost).expect("losing photons stays within the bound")
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            basis: Arc::clone(basis),
            mode,
            targets,
        })
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    /// Applies Kraus operators `K_k |n⟩ = √(C(n,k) T^{n-k} (1-T)^k) |n-k⟩`.
    pub fn apply<T: Real>(&self, state: &MixedState<T>, transmittance: T) -> Result<MixedState<T>> {
        check_transmittance(transmittance)?;
        if **state.basis() != *self.basis {
            return Err(Error::DimensionMismatch {
                what: "attenuation input basis",
                expected: self.basis.len(),
                found: state.basis().len(),
            });
        }
        let bound = self.basis.photon_bound() as usize;
        let loss = T::one() - transmittance;
        // weights[n][k] = √(C(n,k) T^{n-k} (1-T)^k)
        let weights: Vec<Vec<T>> = (0..=bound)
            .map(|n| {
                (0..=n)
                    .map(|k| {
                        (T::from_count(binomial(n, k))
                            * transmittance.powi((n - k) as i32)
                            * loss.powi(k as i32))
                        .sqrt()
                    })
                    .collect()
            })
            .collect();
        let occ_at: Vec<usize> = self.basis.occupations().iter().map(|o| o[self.mode] as usize).collect();
        let rho = state.matrix();
        let dim = self.basis.len();
        let mut out = CMatrix::zeros(dim, dim);
        for a in 0..dim {
            let row = rho.row(a);
            let na = occ_at[a];
            for (b, v) in row.iter().enumerate() {
                if v.is_zero() {
                    continue;
                }
                let nb = occ_at[b];
                for k in 0..=na.min(nb) {
                    let w = weights[na][k] * weights[nb][k];
                    out[(self.targets[a][k], self.targets[b][k])] += v.scale(w);
                }
            }
        }
        MixedState::new(Arc::clone(&self.basis), out)
    }
}

fn check_transmittance<T: Real>(t: T) -> Result<()> {
    if !(t >= T::zero() && t <= T::one()) {
        return Err(Error::param("transmittance", format!("{t} outside [0, 1]")));
    }
    Ok(())
}

/// Single-mode photon loss with transmittance `T` (Kraus form).
pub fn attenuation_channel<T: Real>(state: &MixedState<T>, mode: usize, transmittance: T) -> Result<MixedState<T>> {
    AttenuationChannel::new(state.basis(), mode)?.apply(state, transmittance)
}

/// The same channel built from its optical dilation: append a vacuum
/// ancilla, mix it with `mode` on an MZI of phase `2·arccos(√T)`, then trace
/// the ancilla out.
pub fn attenuation_by_dilation<T: Real>(
    state: &MixedState<T>,
    mode: usize,
    transmittance: T,
) -> Result<MixedState<T>> {
    check_transmittance(transmittance)?;
    let basis = state.basis();
    let modes = basis.modes();
    if mode >= modes {
        return Err(Error::ModeOutOfRange { mode, modes });
    }
    let ancilla_basis = Arc::new(FockBasis::enumerate(1, basis.photon_bound())?);
    let vacuum = PureState::<T>::vacuum(ancilla_basis).to_mixed();
    let joint = state.tensor_product(&vacuum, basis.photon_bound(), Truncation::Forbid)?;
    let theta = T::lit(2.0) * transmittance.sqrt().acos();
    let mixer = ModeUnitary::mzi(theta).embed(modes + 1, &[mode, modes])?;
    let evolved = apply_mode_unitary(&joint, &mixer)?;
    let keep: Vec<usize> = (0..modes).collect();
    let reduced = evolved.partial_trace(&keep)?;
    MixedState::new(Arc::clone(basis), reduced.into_matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    type C = Complex<f64>;

    fn basis(m: usize, n: u32) -> Arc<FockBasis> {
        Arc::new(FockBasis::enumerate(m, n).unwrap())
    }

    fn random_pure(b: &Arc<FockBasis>, rng: &mut impl Rng) -> PureState<f64> {
        let amps = (0..b.len())
            .map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        PureState::new(b.clone(), amps).unwrap().normalize().unwrap()
    }

    fn brute_permanent(m: &CMatrix<f64>) -> C {
        fn perms(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for p in perms(n - 1) {
                for pos in 0..=p.len() {
                    let mut q = p.clone();
                    q.insert(pos, n - 1);
                    out.push(q);
                }
            }
            out
        }
        perms(m.rows())
            .into_iter()
            .map(|p| p.iter().enumerate().fold(C::one(), |acc, (r, &c)| acc * m[(r, c)]))
            .sum()
    }

    #[test]
    fn mzi_examples() {
        let id = ModeUnitary::<f64>::mzi(0.0);
        assert_eq!(id.matrix().max_abs_diff(&CMatrix::identity(2)), 0.0);
        let cross = ModeUnitary::<f64>::mzi(PI);
        assert_abs_diff_eq!(cross.matrix()[(0, 0)].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((cross.matrix()[(1, 0)] - C::i()).norm(), 0.0, epsilon = 1e-15);
        let half = ModeUnitary::<f64>::mzi(FRAC_PI_2);
        assert_abs_diff_eq!(half.matrix()[(0, 0)].norm_sqr(), 0.5, epsilon = 1e-15);
        assert!(half.matrix().unitarity_residual() < 1e-15);
    }

    #[test]
    fn haar_examples() {
        let u1 = ModeUnitary::<f64>::haar_random(1, 7).unwrap();
        assert_abs_diff_eq!(u1.matrix()[(0, 0)].norm(), 1.0, epsilon = 1e-14);
        for (m, seed) in [(2, 0), (4, 3), (9, 11)] {
            let u = ModeUnitary::<f64>::haar_random(m, seed).unwrap();
            assert!(u.matrix().unitarity_residual() <= 1e-10);
            assert_eq!(u, ModeUnitary::haar_random(m, seed).unwrap());
        }
        assert_ne!(
            ModeUnitary::<f64>::haar_random(3, 1).unwrap(),
            ModeUnitary::haar_random(3, 2).unwrap()
        );
        let f32_version = ModeUnitary::<f32>::haar_random(4, 3).unwrap();
        assert!(f32_version.matrix().unitarity_residual() < 1e-5);
    }

    #[test]
    fn haar_first_entry_is_uniform() {
        // |U_11|² of a 2x2 Haar unitary is Uniform(0, 1); KS critical value at 1% is 1.628/√n.
        let n = 2000;
        let mut samples: Vec<f64> = (0..n)
            .map(|s| ModeUnitary::<f64>::haar_random(2, s as u64).unwrap().matrix()[(0, 0)].norm_sqr())
            .collect();
        samples.sort_by(f64::total_cmp);
        let ks = samples
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n as f64 - x).max(x - i as f64 / n as f64))
            .fold(0.0, f64::max);
        assert!(ks < 1.628 / (n as f64).sqrt(), "KS statistic {ks}");
    }

    #[test]
    fn permanent_examples() {
        assert_eq!(permanent(&CMatrix::<f64>::zeros(0, 0)).unwrap(), C::one());
        let (a, b, c, d) = (C::new(1.0, 2.0), C::new(-0.5, 0.0), C::new(0.0, 3.0), C::new(2.0, -1.0));
        let m = CMatrix::from_row_major(2, 2, vec![a, b, c, d]).unwrap();
        assert_eq!(permanent(&m).unwrap(), a * d + b * c);
        let ones = CMatrix::from_fn(3, 3, |_, _| C::one());
        assert_eq!(brute_permanent(&ones), C::new(6.0, 0.0));
        assert_eq!(permanent(&ones).unwrap(), C::new(6.0, 0.0));
        assert!(permanent(&CMatrix::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn permanent_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..=5 {
            let m = CMatrix::from_fn(k, k, |_, _| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let brute = brute_permanent(&m);
            assert!((permanent(&m).unwrap() - brute).norm() < 1e-12);
            assert!((permanent_ryser(&m).unwrap() - brute).norm() < 1e-12);
        }
    }

    #[test]
    fn lift_examples() {
        let b = basis(3, 3);
        let id = lift_to_fock(&ModeUnitary::<f64>::identity(3), &b).unwrap();
        assert!(id.max_abs_diff(&CMatrix::identity(b.len())) < 1e-15);

        let b2 = basis(2, 2);
        let swap = ModeUnitary::new(
            CMatrix::from_row_major(2, 2, vec![C::zero(), C::one(), C::one(), C::zero()]).unwrap(),
        )
        .unwrap();
        let out = apply_mode_unitary(&PureState::basis_state(b2.clone(), &[1, 0]).unwrap(), &swap).unwrap();
        assert_abs_diff_eq!(out.amplitudes()[b2.index_of(&[0, 1]).unwrap()].norm(), 1.0, epsilon = 1e-15);

        let hom = apply_mode_unitary(&PureState::basis_state(b2.clone(), &[1, 1]).unwrap(), &ModeUnitary::mzi(FRAC_PI_2)).unwrap();
        assert_abs_diff_eq!(hom.amplitudes()[b2.index_of(&[1, 1]).unwrap()].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hom.amplitudes()[b2.index_of(&[2, 0]).unwrap()].norm_sqr(), 0.5, epsilon = 1e-15);

        assert!(lift_to_fock(&ModeUnitary::<f64>::identity(2), &b).is_err());
    }

    #[test]
    fn lift_blocks_are_unitary_and_homomorphic() {
        let b = basis(4, 3);
        for seed in 0..5 {
            let u = ModeUnitary::<f64>::haar_random(4, seed).unwrap();
            let v = ModeUnitary::<f64>::haar_random(4, seed + 100).unwrap();
            let lu = FockUnitary::lift(&u, &b).unwrap();
            for (_, block) in lu.blocks() {
                assert!(block.unitarity_residual() <= 1e-10);
            }
            let lhs = lift_to_fock(&u.compose(&v).unwrap(), &b).unwrap();
            let rhs = lu.to_dense().matmul(&lift_to_fock(&v, &b).unwrap()).unwrap();
            assert!(lhs.max_abs_diff(&rhs) <= 1e-9);
        }
    }

    #[test]
    fn apply_round_trips_and_preserves_grades() {
        let b = basis(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = random_pure(&b, &mut rng);
        let u = ModeUnitary::<f64>::haar_random(3, 9).unwrap();
        let out = apply_mode_unitary(&psi, &u).unwrap();
        assert!((out.norm_sqr() - 1.0).abs() <= 1e-10);
        let back = apply_mode_unitary(&out, &u.adjoint()).unwrap();
        for (a, z) in back.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((a - z).norm() <= 1e-10);
        }
        let grade_weight = |s: &PureState<f64>, g| s.amplitudes()[b.grade_range(g)].iter().map(|a| a.norm_sqr()).sum::<f64>();
        for g in 0..=3 {
            assert!((grade_weight(&psi, g) - grade_weight(&out, g)).abs() <= 1e-12);
        }
        let rho = apply_mode_unitary(&psi.to_mixed(), &u).unwrap();
        assert!(rho.matrix().max_abs_diff(out.to_mixed().matrix()) <= 1e-12);
        assert!((rho.trace() - 1.0).abs() <= 1e-10);
        let lifted = FockUnitary::lift(&u, &b).unwrap();
        let pops = lifted.output_populations(&psi.to_mixed()).unwrap();
        for (p, q) in pops.iter().zip(out.populations()) {
            assert!((p - q).abs() <= 1e-12);
        }
        let unchanged = apply_mode_unitary(&psi, &ModeUnitary::identity(3)).unwrap();
        assert_eq!(unchanged.amplitudes(), psi.amplitudes());
    }

    #[test]
    fn attenuation_examples() {
        let b = basis(1, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_pure(&b, &mut rng).to_mixed();
        let same = attenuation_channel(&rho, 0, 1.0).unwrap();
        assert!(same.matrix().max_abs_diff(rho.matrix()) < 1e-15);
        let dark = attenuation_channel(&rho, 0, 0.0).unwrap();
        assert_abs_diff_eq!(dark.matrix()[(0, 0)].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dark.trace(), 1.0, epsilon = 1e-14);

        let b1 = basis(1, 1);
        let one = PureState::<f64>::basis_state(b1.clone(), &[1]).unwrap().to_mixed();
        for t in [0.0, 0.2, 0.5, 0.9, 1.0] {
            let out = attenuation_by_dilation(&one, 0, t).unwrap();
            assert_abs_diff_eq!(out.matrix()[(1, 1)].re, t, epsilon = 1e-14);
            assert_abs_diff_eq!(out.matrix()[(0, 0)].re, 1.0 - t, epsilon = 1e-14);
            let kraus = attenuation_channel(&one, 0, t).unwrap();
            assert!(kraus.matrix().max_abs_diff(out.matrix()) < 1e-14);
        }
        assert!(attenuation_channel(&one, 0, 1.5).is_err());
        assert!(attenuation_channel(&one, 0, -0.1).is_err());
        assert!(attenuation_channel(&one, 1, 0.5).is_err());
    }

    #[test]
    fn attenuation_coherence_closed_form() {
        // α|0⟩ + β|1⟩ through T = cos²(θ/2): coherence 2|αβ| cos(θ/2).
        let b = basis(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let psi = random_pure(&b, &mut rng);
            let theta: f64 = rng.random_range(0.0..PI);
            let t = (theta / 2.0).cos().powi(2);
            let out = attenuation_channel(&psi.to_mixed(), 0, t).unwrap();
            let gamma = 2.0 * out.matrix()[(0, 1)].norm();
            let (a, bb) = (psi.amplitudes()[0], psi.amplitudes()[1]);
            assert!((gamma - 2.0 * (a * bb).norm() * (theta / 2.0).cos()).abs() <= 1e-10);
        }
    }

    #[test]
    fn attenuation_on_multimode_state_matches_dilation() {
        let b = basis(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for mode in 0..3 {
            let rho = random_pure(&b, &mut rng).to_mixed();
            let t: f64 = rng.random_range(0.0..1.0);
            let k = attenuation_channel(&rho, mode, t).unwrap();
            let d = attenuation_by_dilation(&rho, mode, t).unwrap();
            assert!(k.matrix().max_abs_diff(d.matrix()) <= 1e-10);
            assert!((k.trace() - 1.0).abs() <= 1e-10);
        }
    }
}
