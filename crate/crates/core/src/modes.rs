//! Undamped axial normal modes.
//!
//! The dynamical matrix is `K = -H` with `H` the Hessian of the normalized
//! potential, so `x'' = K x` and each eigenpair of `H` gives `ω_i² , v_i`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{domain, Error, Result};
use crate::scalar::Real;

/// Frequencies closer than this (relative to the largest) share a subspace.
const DEGENERATE_REL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum<T = f64> {
    /// Normalized angular frequencies, ascending.
    pub frequencies: Vec<T>,
    /// Orthonormal mode vectors as columns; entry `(k, i)` is `v_ik`.
    pub vectors: DMatrix<T>,
}

impl<T: Real> ModeSpectrum<T> {
    /// Builds a spectrum from unsorted eigenpairs of the Hessian.
    ///
    /// Pairs are sorted by frequency, degenerate subspaces get a canonical
    /// basis and every vector gets the sign convention of [`fix_sign`].
    pub fn from_eigenpairs(values: &[T], vectors: &DMatrix<T>) -> Result<Self> {
        let n = values.len();
        if vectors.nrows() != n || vectors.ncols() != n {
            return Err(domain("eigenvector matrix shape does not match eigenvalue count"));
        }
        if let Some(min) = values.iter().copied().reduce(|a, b| a.min(b)) {
            if !(min > T::zero()) {
                return Err(Error::Unstable { eigenvalue: min.to_f64_lossy() });
            }
        } else {
            return Err(domain("empty spectrum"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite eigenvalues"));
        let sorted: Vec<T> = order.iter().map(|&i| values[i]).collect();
        let mut v = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            v.set_column(dst, &vectors.column(src));
        }

        let top = sorted[n - 1];
        let tol = T::lit(DEGENERATE_REL) * top;
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && sorted[end] - sorted[end - 1] <= tol {
                end += 1;
            }
            if end - start > 1 {
                canonical_basis(&mut v, start, end);
            }
            start = end;
        }
        for i in 0..n {
            let mut col = v.column(i).into_owned();
            fix_sign(&mut col);
            v.set_column(i, &col);
        }
        Ok(Self { frequencies: sorted.iter().map(|x| x.sqrt()).collect(), vectors: v })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn frequency(&self, mode: usize) -> T {
        self.frequencies[mode]
    }

    pub fn mode(&self, mode: usize) -> DVector<T> {
        self.vectors.column(mode).into_owned()
    }

    /// `v_ik`: amplitude of ion `k` in mode `i`.
    pub fn participation(&self, mode: usize, ion: usize) -> T {
        self.vectors[(ion, mode)]
    }
}

/// Replaces columns `start..end` with the basis obtained by projecting the
/// unit vectors e_0, e_1, ... onto their span and orthonormalizing, which
/// depends only on the subspace and not on the eigen-solver's choice.
fn canonical_basis<T: Real>(v: &mut DMatrix<T>, start: usize, end: usize) {
    let n = v.nrows();
    let block = v.columns(start, end - start).into_owned();
    let projector = &block * block.transpose();
    let mut basis: Vec<DVector<T>> = Vec::with_capacity(end - start);
    for k in 0..n {
        if basis.len() == end - start {
            break;
        }
        let mut x = projector.column(k).into_owned();
        for b in &basis {
            let c = b.dot(&x);
            x -= b * c;
        }
        let norm = x.norm();
        if norm > T::lit(1e-6) {
            basis.push(x / norm);
        }
    }
    for (j, b) in basis.into_iter().enumerate() {
        v.set_column(start + j, &b);
    }
}

/// Sign convention: `Σ_k v_k ≥ 0`. Antisymmetric modes sum to zero, so they
/// fall back to the first moment about the chain centre, then to the first
/// significant entry.
pub fn fix_sign<T: Real>(v: &mut DVector<T>) {
    let n = v.len();
    let small = T::lit(1e-8) * T::from_usize_lossy(n).sqrt();
    let sum = v.iter().fold(T::zero(), |a, &x| a + x);
    let key = if sum.abs() > small {
        sum
    } else {
        let centre = T::from_usize_lossy(n - 1) / T::lit(2.0);
        let moment = v
            .iter()
            .enumerate()
            .fold(T::zero(), |a, (k, &x)| a + (T::from_usize_lossy(k) - centre) * x);
        if moment.abs() > small {
            moment
        } else {
            v.iter().copied().find(|x| x.abs() > T::lit(1e-6)).unwrap_or(T::one())
        }
    };
    if key < T::zero() {
        *v *= -T::one();
    }
}

/// Eigen-decomposition of a symmetric positive-definite Hessian.
pub fn normal_modes<T: Real>(hessian: &DMatrix<T>) -> Result<ModeSpectrum<T>> {
    let n = hessian.nrows();
    if n == 0 || hessian.ncols() != n {
        return Err(domain("hessian must be a non-empty square matrix"));
    }
    let scale = hessian.amax();
    let asym = (hessian - hessian.transpose()).amax();
    if asym > T::lit(1e-12) * scale.max(T::one()) {
        return Err(domain(format!("hessian is not symmetric (max asymmetry {asym:e})")));
    }
    let eig = SymmetricEigen::new(hessian.clone());
    let values: Vec<T> = eig.eigenvalues.iter().copied().collect();
    ModeSpectrum::from_eigenpairs(&values, &eig.eigenvectors)
}

/// Index of the centre-of-mass mode: the lowest mode, provided all its
/// participation factors share one sign.
pub fn com_mode_index<T: Real>(spectrum: &ModeSpectrum<T>) -> Result<usize> {
    if spectrum.is_empty() {
        return Err(domain("empty spectrum"));
    }
    let lowest = spectrum
        .frequencies
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite frequencies"))
        .map(|(i, _)| i)
        .expect("non-empty");
    let col = spectrum.vectors.column(lowest);
    let positive = col.iter().all(|&x| x > T::zero());
    let negative = col.iter().all(|&x| x < T::zero());
    if positive || negative {
        Ok(lowest)
    } else {
        Err(Error::DegenerateMode { mode: lowest })
    }
}

/// `Σ_{k∈S} |v_ik|²`.
pub fn participation_sum<T: Real>(spectrum: &ModeSpectrum<T>, mode: usize, ions: &[usize]) -> Result<T> {
    let n = spectrum.len();
    if mode >= n {
        return Err(domain(format!("mode {mode} out of range for {n} modes")));
    }
    let mut s = T::zero();
    for &k in ions {
        if k >= n {
            return Err(domain(format!("ion {k} out of range for {n} ions")));
        }
        let v = spectrum.vectors[(k, mode)];
        s += v * v;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{hessian, solve_equilibrium, IonChain, TrapPotential};
    use approx::assert_relative_eq;

    fn chain_modes(x2: f64, x4: f64, n: usize) -> ModeSpectrum<f64> {
        let p = TrapPotential::new(x2, x4).unwrap();
        let u = solve_equilibrium(&p, n, None).unwrap();
        normal_modes(&hessian(&p, &u).unwrap()).unwrap()
    }

    #[test]
    fn single_ion_frequency() {
        for x2 in [0.01, 0.25, 2.0] {
            let s = chain_modes(x2, 0.0, 1);
            assert_relative_eq!(s.frequencies[0], (2.0 * x2).sqrt(), max_relative = 1e-14);
        }
    }

    #[test]
    fn quadratic_com_is_uniform() {
        for n in [2, 5, 15] {
            let s = chain_modes(0.3, 0.0, n);
            assert_eq!(com_mode_index(&s).unwrap(), 0);
            let expect = (n as f64).powf(-0.5);
            for k in 0..n {
                assert!((s.participation(0, k) - expect).abs() < 1e-10);
            }
            assert_relative_eq!(s.frequencies[0], 0.6_f64.sqrt(), max_relative = 1e-9);
        }
    }

    #[test]
    fn spectrum_is_orthonormal_eigenbasis() {
        let p = TrapPotential::reference();
        let u = solve_equilibrium(&p, 15, None).unwrap();
        let h = hessian(&p, &u).unwrap();
        let s = normal_modes(&h).unwrap();
        let gram = s.vectors.transpose() * &s.vectors;
        assert!((gram - DMatrix::identity(15, 15)).amax() < 1e-10);
        for i in 0..15 {
            let v = s.mode(i);
            let r = -&h * &v + &v * s.frequencies[i].powi(2);
            assert!(r.amax() < 1e-8);
        }
        assert!(s.frequencies.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn quartic_com_peaks_at_centre() {
        let s = chain_modes(0.00188, 0.00177, 15);
        assert_eq!(com_mode_index(&s).unwrap(), 0);
        let centre = s.participation(0, 7).abs();
        let edge = s.participation(0, 0).abs();
        assert!(centre > edge);
        assert!(s.mode(0).iter().all(|&x| x > 0.0));
        let mid = participation_sum(&s, 0, &[6, 7]).unwrap();
        let ends = participation_sum(&s, 0, &[0, 14]).unwrap();
        assert!(mid > ends);
    }

    #[test]
    fn participation_sums() {
        let s = chain_modes(0.2, 0.0, 9);
        let all: Vec<usize> = (0..9).collect();
        for i in 0..9 {
            assert_relative_eq!(participation_sum(&s, i, &all).unwrap(), 1.0, max_relative = 1e-12);
        }
        assert_relative_eq!(participation_sum(&s, 0, &[1, 4, 6]).unwrap(), 3.0 / 9.0, max_relative = 1e-10);
        assert!(participation_sum(&s, 9, &[0]).is_err());
        assert!(participation_sum(&s, 0, &[9]).is_err());
    }

    #[test]
    fn modes_are_reflection_eigenvectors() {
        let s = chain_modes(0.00188, 0.00177, 12);
        for i in 0..12 {
            let v = s.mode(i);
            let r: f64 = (0..12).map(|k| v[k] * v[11 - k]).sum();
            assert!((r.abs() - 1.0).abs() < 1e-8, "mode {i}: {r}");
        }
    }

    #[test]
    fn com_selection_ignores_input_order() {
        let p = TrapPotential::reference();
        let u = solve_equilibrium(&p, 10, None).unwrap();
        let h = hessian(&p, &u).unwrap();
        let eig = SymmetricEigen::new(h.clone());
        let n = 10;
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        let values: Vec<f64> = perm.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vecs = DMatrix::zeros(n, n);
        for (dst, &src) in perm.iter().enumerate() {
            vecs.set_column(dst, &(-eig.eigenvectors.column(src)));
        }
        let a = ModeSpectrum::from_eigenpairs(&values, &vecs).unwrap();
        let b = normal_modes(&h).unwrap();
        assert_eq!(com_mode_index(&a).unwrap(), 0);
        assert!((a.vectors - b.vectors).amax() < 1e-12);
    }

    #[test]
    fn degenerate_subspace_gets_canonical_basis() {
        // two decoupled identical oscillators
        let h = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 5.0]);
        let rotated = {
            let c = 0.6;
            let s = 0.8;
            DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0])
        };
        let a = ModeSpectrum::from_eigenpairs(&[2.0, 2.0, 5.0], &rotated).unwrap();
        let b = normal_modes(&h).unwrap();
        assert!((a.vectors.clone() - b.vectors).amax() < 1e-12);
        assert!((a.vectors.columns(0, 2).into_owned() - DMatrix::identity(3, 2)).amax() < 1e-12);
    }

    #[test]
    fn unstable_hessian_is_rejected() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(normal_modes(&h), Err(Error::Unstable { .. })));
    }

    #[test]
    fn com_frequency_against_chain_length() {
        // at fixed quartic potential a longer chain reaches further into the
        // quartic walls, which stiffens the COM mode
        let mut last = 0.0;
        for n in [9, 15, 22, 30] {
            let s = chain_modes(0.00188, 0.00177, n);
            assert!(s.frequencies[0] > last);
            last = s.frequencies[0];
        }
        // in a harmonic trap the COM frequency is fixed by X2 alone
        for n in [3, 11, 25] {
            assert_relative_eq!(chain_modes(0.01, 0.0, n).frequencies[0], 0.02_f64.sqrt(), max_relative = 1e-8);
        }
    }

    #[test]
    fn f32_spectrum() {
        let p = TrapPotential::<f32>::new(0.00188, 0.00177).unwrap();
        let chain = IonChain::with_coolants(p, 9, &[]).unwrap();
        let s = normal_modes(&chain.hessian()).unwrap();
        let s64 = chain_modes(0.00188, 0.00177, 9);
        assert!((s.frequencies[0] as f64 - s64.frequencies[0]).abs() < 1e-4);
        assert_eq!(com_mode_index(&s).unwrap(), 0);
    }
}
