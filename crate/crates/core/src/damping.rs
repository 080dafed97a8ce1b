//! Damped normal modes: exact quadratic eigenproblem and perturbative rates.
//!
//! Coolant ions feel a friction `-γ x'`, so the chain obeys
//! `x'' = K x - γ P x'` with `P` the diagonal projector onto the coolants.
//! Solutions `w e^{z t}` satisfy `Q(z) w = (z² I + γ z P + H) w = 0`.

use nalgebra::{Complex, ComplexField, DMatrix, DVector, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::modes::{com_mode_index, normal_modes, participation_sum, ModeSpectrum};
use crate::potential::IonChain;
use crate::scalar::Real;

/// Gaps between mode frequencies below this make the first-order mode
/// correction undefined.
pub const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampingConfig<T = f64> {
    /// Normalized per-ion damping rate.
    pub gamma: T,
    /// Indices of the laser-cooled ions.
    pub coolants: Vec<usize>,
}

impl<T: Real> DampingConfig<T> {
    pub fn new(gamma: T, coolants: Vec<usize>) -> Result<Self> {
        if !(gamma >= T::zero()) || !gamma.is_finite() {
            return Err(domain(format!("damping rate must be finite and non-negative, got {gamma:e}")));
        }
        let mut sorted = coolants.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(domain("coolant indices must be distinct"));
        }
        Ok(Self { gamma, coolants })
    }

    pub fn for_chain(gamma: T, chain: &IonChain<T>) -> Result<Self> {
        Self::new(gamma, chain.coolant_indices())
    }

    fn check(&self, n: usize) -> Result<()> {
        if let Some(&k) = self.coolants.iter().find(|&&k| k >= n) {
            return Err(domain(format!("coolant {k} out of range for {n} ions")));
        }
        Ok(())
    }

    fn projector_diag(&self, n: usize) -> Vec<T> {
        let mut p = vec![T::zero(); n];
        for &k in &self.coolants {
            p[k] = T::one();
        }
        p
    }
}

/// One damped mode matched to its undamped parent.
#[derive(Debug, Clone, PartialEq)]
pub struct DampedMode<T = f64> {
    /// Index of the undamped mode this branch continues.
    pub parent: usize,
    /// Eigenvalue on the non-negative imaginary branch.
    pub eigenvalue: Complex<T>,
    /// Unit-norm mode vector, phased so that `v_parentᵀ w` is real positive.
    pub vector: DVector<Complex<T>>,
    /// `|v_parentᵀ w|`.
    pub overlap: T,
}

impl<T: Real> DampedMode<T> {
    /// Amplitude decay rate `-Re z`.
    pub fn cooling_rate(&self) -> T {
        -self.eigenvalue.re
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DampedSpectrum<T = f64> {
    /// All `2N` eigenvalues, sorted by imaginary then real part.
    pub eigenvalues: Vec<Complex<T>>,
    /// One entry per undamped mode, indexed by the parent mode.
    pub modes: Vec<DampedMode<T>>,
}

impl<T: Real> DampedSpectrum<T> {
    pub fn mode(&self, parent: usize) -> &DampedMode<T> {
        &self.modes[parent]
    }

    /// `Σ Re z` over all `2N` eigenvalues.
    pub fn trace(&self) -> T {
        self.eigenvalues.iter().fold(T::zero(), |a, z| a + z.re)
    }
}

fn c<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

fn quadratic_pencil<T: Real>(h: &DMatrix<T>, p: &[T], gamma: T, z: Complex<T>) -> DMatrix<Complex<T>> {
    let n = h.nrows();
    let mut q = DMatrix::from_fn(n, n, |i, j| c(h[(i, j)], T::zero()));
    let z2 = z * z;
    for i in 0..n {
        q[(i, i)] += z2 + z * gamma * p[i];
    }
    q
}

fn pencil_derivative_apply<T: Real>(p: &[T], gamma: T, z: Complex<T>, w: &DVector<Complex<T>>) -> DVector<Complex<T>> {
    let two = T::lit(2.0);
    DVector::from_fn(w.len(), |i, _| w[i] * (z * two + c(gamma * p[i], T::zero())))
}

/// Unsymmetric-free bilinear form `aᵀ b` (no conjugation).
fn bilinear<T: Real>(a: &DVector<Complex<T>>, b: &DVector<Complex<T>>) -> Complex<T> {
    a.iter().zip(b.iter()).fold(c(T::zero(), T::zero()), |s, (x, y)| s + *x * *y)
}

fn normalize_max<T: Real>(w: &mut DVector<Complex<T>>) {
    let m = w.iter().fold(T::zero(), |m, x| m.max(x.modulus()));
    if m > T::zero() {
        *w /= c(m, T::zero());
    }
}

/// Polishes an approximate eigenpair of `Q(z)` by Newton steps on the
/// Rayleigh functional `wᵀQ(z)w` (valid since `Q` is complex symmetric),
/// alternated with inverse iteration on the vector.
fn refine<T: Real>(h: &DMatrix<T>, p: &[T], gamma: T, z0: Complex<T>) -> (Complex<T>, DVector<Complex<T>>) {
    let n = h.nrows();
    let tol = T::lit(T::REFINE_TOL);
    let mut z = z0;
    let mut w: DVector<Complex<T>> =
        DVector::from_fn(n, |i, _| c(T::one() + T::from_usize_lossy(i) / T::from_usize_lossy(n), T::zero()));
    // a couple of inverse-iteration sweeps to get a vector for z0
    for attempt in 0..3 {
        let shift = if attempt == 0 { z } else { z * c(T::one() + T::lit(1e-13), T::zero()) };
        if let Some(x) = quadratic_pencil(h, p, gamma, shift).lu().solve(&w) {
            if x.iter().all(|e| e.re.is_finite() && e.im.is_finite()) {
                w = x;
                normalize_max(&mut w);
            }
        }
    }
    let mut last_step = T::infinity();
    for _ in 0..50 {
        let q = quadratic_pencil(h, p, gamma, z);
        let dq_w = pencil_derivative_apply(p, gamma, z, &w);
        let num = bilinear(&w, &(&q * &w));
        let den = bilinear(&w, &dq_w);
        if den.modulus() == T::zero() {
            break;
        }
        let step = num / den;
        let size = step.modulus();
        if !(size < last_step) && size > tol * z.modulus() {
            // stagnated at rounding level
            break;
        }
        z -= step;
        last_step = size;
        let dq_w = pencil_derivative_apply(p, gamma, z, &w);
        match quadratic_pencil(h, p, gamma, z).lu().solve(&dq_w) {
            Some(x) if x.iter().all(|e| e.re.is_finite() && e.im.is_finite()) => {
                w = x;
                normalize_max(&mut w);
            }
            _ => break,
        }
        if size <= tol * z.modulus() {
            break;
        }
    }
    (z, w)
}

/// Unit 2-norm, then phase so that `vᵀw` is real and positive.
fn phase_to<T: Real>(w: &DVector<Complex<T>>, v: &DVector<T>) -> (DVector<Complex<T>>, T) {
    let norm = w.iter().fold(T::zero(), |a, x| a + x.modulus_squared()).sqrt();
    let w = w / c(norm, T::zero());
    let proj = w.iter().zip(v.iter()).fold(c(T::zero(), T::zero()), |s, (x, &y)| s + *x * y);
    let m = proj.modulus();
    if m > T::zero() {
        let phase = proj.conj() / m;
        (w * phase, m)
    } else {
        (w, m)
    }
}

/// Exact damped spectrum of the chain with Hessian `hessian`.
///
/// Eigenvalues of the `2N × 2N` companion matrix `[[0, I], [-H, -γP]]` are
/// found by a real Schur decomposition and then polished on the quadratic
/// eigenproblem. Each undamped mode is matched to the damped branch with the
/// largest overlap, ties broken by frequency proximity.
pub fn exact_damped_modes<T: Real>(hessian: &DMatrix<T>, damping: &DampingConfig<T>) -> Result<DampedSpectrum<T>> {
    let spectrum = normal_modes(hessian)?;
    exact_damped_modes_with(hessian, &spectrum, damping)
}

pub fn exact_damped_modes_with<T: Real>(
    hessian: &DMatrix<T>,
    spectrum: &ModeSpectrum<T>,
    damping: &DampingConfig<T>,
) -> Result<DampedSpectrum<T>> {
    let n = hessian.nrows();
    damping.check(n)?;
    let p = damping.projector_diag(n);
    let gamma = damping.gamma;

    let mut companion = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        companion[(i, n + i)] = T::one();
        companion[(n + i, n + i)] = -gamma * p[i];
        for j in 0..n {
            companion[(n + i, j)] = -hessian[(i, j)];
        }
    }
    let schur = Schur::try_new(companion, T::default_epsilon(), 100_000)
        .ok_or_else(|| Error::Numeric("Schur decomposition did not converge".into()))?;
    let raw: Vec<Complex<T>> = schur.complex_eigenvalues().iter().copied().collect();

    let scale = raw.iter().fold(T::zero(), |m, z| m.max(z.modulus())).max(T::one());
    let real_tol = T::lit(1e-10) * scale;
    let mut upper = Vec::new();
    let mut real = Vec::new();
    for z in raw {
        if z.im > real_tol {
            upper.push(z);
        } else if z.im.abs() <= real_tol {
            real.push(c(z.re, T::zero()));
        }
    }
    if 2 * upper.len() + real.len() != 2 * n {
        return Err(Error::Numeric(format!(
            "eigenvalues not in conjugate pairs: {} upper, {} real of {}",
            upper.len(),
            real.len(),
            2 * n
        )));
    }

    let mut candidates: Vec<(Complex<T>, DVector<Complex<T>>)> = Vec::with_capacity(upper.len() + real.len());
    for z in upper.iter().chain(real.iter()) {
        let (mut zr, w) = refine(hessian, &p, gamma, *z);
        if z.im == T::zero() {
            zr.im = T::zero();
        }
        candidates.push((zr, w));
    }

    let mut eigenvalues: Vec<Complex<T>> = Vec::with_capacity(2 * n);
    for (z, _) in &candidates {
        eigenvalues.push(*z);
        if z.im != T::zero() {
            eigenvalues.push(z.conj());
        }
    }
    eigenvalues.sort_by(|a, b| {
        a.im.partial_cmp(&b.im)
            .expect("finite")
            .then(a.re.partial_cmp(&b.re).expect("finite"))
    });

    // overlap table, then greedy matching from the strongest pair down
    let mut pairs: Vec<(T, T, usize, usize)> = Vec::with_capacity(n * candidates.len());
    let phased: Vec<Vec<(DVector<Complex<T>>, T)>> = candidates
        .iter()
        .map(|(_, w)| (0..n).map(|j| phase_to(w, &spectrum.mode(j))).collect())
        .collect();
    for (ci, (z, _)) in candidates.iter().enumerate() {
        for j in 0..n {
            let ov = phased[ci][j].1;
            let dist = (z.im - spectrum.frequency(j)).abs();
            pairs.push((ov, dist, j, ci));
        }
    }
    pairs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("finite")
            .then(a.1.partial_cmp(&b.1).expect("finite"))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    let mut modes: Vec<Option<DampedMode<T>>> = vec![None; n];
    let mut used = vec![false; candidates.len()];
    for (ov, _, j, ci) in pairs {
        if modes[j].is_some() || used[ci] {
            continue;
        }
        used[ci] = true;
        modes[j] = Some(DampedMode {
            parent: j,
            eigenvalue: candidates[ci].0,
            vector: phased[ci][j].0.clone(),
            overlap: ov,
        });
    }
    let modes = modes
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Numeric("could not match every undamped mode".into()))?;
    Ok(DampedSpectrum { eigenvalues, modes })
}

/// Exact damped eigenvalue continuing undamped mode `mode`, found by
/// polishing the perturbative estimate directly on the quadratic
/// eigenproblem. Much cheaper than [`exact_damped_modes`] when one rate is
/// needed and the damping is weak compared with the mode spacing.
pub fn exact_mode_eigenvalue<T: Real>(
    hessian: &DMatrix<T>,
    spectrum: &ModeSpectrum<T>,
    damping: &DampingConfig<T>,
    mode: usize,
) -> Result<Complex<T>> {
    let n = hessian.nrows();
    damping.check(n)?;
    if mode >= spectrum.len() {
        return Err(domain(format!("mode {mode} out of range")));
    }
    let w = spectrum.frequency(mode);
    let rate = perturbative_rate(spectrum, damping, mode)?;
    let im = (w * w - rate * rate).max(T::zero()).sqrt();
    let p = damping.projector_diag(n);
    let (z, _) = refine(hessian, &p, damping.gamma, c(-rate, im));
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Numeric("eigenvalue refinement diverged".into()));
    }
    Ok(z)
}

/// Cooling rate `|Re z_i|` from the closed form
/// `ω/√2 · sqrt(sqrt(1 + (γS/ω)²) − 1)`, `S = Σ_{k∈C} |v_ik|²`.
pub fn perturbative_rate<T: Real>(spectrum: &ModeSpectrum<T>, damping: &DampingConfig<T>, mode: usize) -> Result<T> {
    damping.check(spectrum.len())?;
    let s = participation_sum(spectrum, mode, &damping.coolants)?;
    let w = spectrum.frequency(mode);
    let x = damping.gamma * s / w;
    let x2 = x * x;
    // sqrt(1 + x²) − 1 without cancellation
    let inner = x2 / ((T::one() + x2).sqrt() + T::one());
    Ok(w / T::lit(2.0).sqrt() * inner.sqrt())
}

/// First-order rate `γ/2 · Σ_{k∈C} |v_ik|²`.
pub fn linearized_rate<T: Real>(spectrum: &ModeSpectrum<T>, damping: &DampingConfig<T>, mode: usize) -> Result<T> {
    damping.check(spectrum.len())?;
    let s = participation_sum(spectrum, mode, &damping.coolants)?;
    Ok(damping.gamma * s / T::lit(2.0))
}

/// First-order change of mode `i` per unit `γ`:
/// `Σ_{k≠i} iω_i (v_kᵀ P v_i)/(ω_i² − ω_k²) v_k`.
///
/// The damped mode is `v_i + γ·w⁽¹⁾ + O(γ²)`.
pub fn first_order_mode_correction<T: Real>(
    spectrum: &ModeSpectrum<T>,
    damping: &DampingConfig<T>,
    mode: usize,
) -> Result<DVector<Complex<T>>> {
    let n = spectrum.len();
    damping.check(n)?;
    if mode >= n {
        return Err(domain(format!("mode {mode} out of range for {n} modes")));
    }
    let wi = spectrum.frequency(mode);
    let tol = T::lit(DEGENERACY_TOL);
    for k in 0..n {
        if k != mode {
            let gap = (spectrum.frequency(k) - wi).abs();
            if gap < tol {
                return Err(Error::Degeneracy { mode, gap: gap.to_f64_lossy() });
            }
        }
    }
    let mut out = DVector::from_element(n, c(T::zero(), T::zero()));
    for k in 0..n {
        if k == mode {
            continue;
        }
        let coupling = damping
            .coolants
            .iter()
            .fold(T::zero(), |a, &j| a + spectrum.vectors[(j, k)] * spectrum.vectors[(j, mode)]);
        let wk = spectrum.frequency(k);
        let coeff = wi * coupling / (wi * wi - wk * wk);
        for r in 0..n {
            out[r] += c(T::zero(), coeff * spectrum.vectors[(r, k)]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationError<T = f64> {
    pub gamma: T,
    pub exact_rate: T,
    pub perturbative_rate: T,
    pub relative_error: T,
}

/// Relative error of the perturbative COM rate against the exact solver for
/// each `γ` of the grid, with the chain's own coolant set.
pub fn perturbation_error_scan<T: Real>(chain: &IonChain<T>, gammas: &[T]) -> Result<Vec<PerturbationError<T>>> {
    let h = chain.hessian();
    let spectrum = normal_modes(&h)?;
    let com = com_mode_index(&spectrum)?;
    gammas
        .iter()
        .map(|&gamma| {
            let damping = DampingConfig::for_chain(gamma, chain)?;
            if gamma == T::zero() {
                let zero = T::zero();
                return Ok(PerturbationError { gamma, exact_rate: zero, perturbative_rate: zero, relative_error: zero });
            }
            let exact = exact_damped_modes_with(&h, &spectrum, &damping)?.mode(com).cooling_rate();
            let approx = perturbative_rate(&spectrum, &damping, com)?;
            let relative_error = if exact == T::zero() {
                if approx == T::zero() {
                    T::zero()
                } else {
                    T::infinity()
                }
            } else {
                (approx - exact).abs() / exact
            };
            Ok(PerturbationError { gamma, exact_rate: exact, perturbative_rate: approx, relative_error })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{hessian, solve_equilibrium, TrapPotential};
    use approx::assert_relative_eq;

    fn reference_chain() -> IonChain<f64> {
        IonChain::with_coolants(TrapPotential::reference(), 15, &[6, 7]).unwrap()
    }

    #[test]
    fn single_oscillator_characteristic_roots() {
        for (omega, gamma) in [(0.5, 0.1), (1.0, 1e-4), (0.5, 1.5)] {
            let h = DMatrix::from_element(1, 1, omega * omega);
            let d = DampingConfig::new(gamma, vec![0]).unwrap();
            let s = exact_damped_modes(&h, &d).unwrap();
            let disc = Complex::new(gamma * gamma - 4.0 * omega * omega, 0.0).sqrt();
            let r1 = (Complex::new(-gamma, 0.0) + disc) / 2.0;
            let r2 = (Complex::new(-gamma, 0.0) - disc) / 2.0;
            let mut expect = [r1, r2];
            expect.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap().then(a.re.partial_cmp(&b.re).unwrap()));
            for (a, b) in s.eigenvalues.iter().zip(expect.iter()) {
                assert!((a - b).norm() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn undamped_limit_is_pure_imaginary() {
        let chain = reference_chain();
        let h = chain.hessian();
        let modes = normal_modes(&h).unwrap();
        let s = exact_damped_modes(&h, &DampingConfig::new(0.0, vec![6, 7]).unwrap()).unwrap();
        for (j, m) in s.modes.iter().enumerate() {
            assert!(m.eigenvalue.re.abs() < 1e-10);
            assert!((m.eigenvalue.im - modes.frequency(j)).abs() < 1e-10);
        }
    }

    #[test]
    fn uniform_damping_gives_half_gamma() {
        let p = TrapPotential::quadratic(0.05).unwrap();
        let u = solve_equilibrium(&p, 7, None).unwrap();
        let h = hessian(&p, &u).unwrap();
        let gamma = 1e-4;
        let d = DampingConfig::new(gamma, (0..7).collect()).unwrap();
        let s = exact_damped_modes(&h, &d).unwrap();
        for m in &s.modes {
            assert_relative_eq!(m.cooling_rate(), gamma / 2.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn eigenvalues_are_passive_and_paired() {
        let chain = reference_chain();
        let h = chain.hessian();
        let d = DampingConfig::new(5.328e-5, vec![6, 7]).unwrap();
        let s = exact_damped_modes(&h, &d).unwrap();
        assert_eq!(s.eigenvalues.len(), 30);
        for z in &s.eigenvalues {
            assert!(z.re <= 0.0);
            assert!(s.eigenvalues.iter().any(|y| (y - z.conj()).norm() < 1e-14));
        }
        assert!((s.trace() + 2.0 * 5.328e-5).abs() < 1e-12);
    }

    #[test]
    fn refined_vectors_solve_the_pencil() {
        let chain = reference_chain();
        let h = chain.hessian();
        let d = DampingConfig::new(1e-3, vec![6, 7]).unwrap();
        let s = exact_damped_modes(&h, &d).unwrap();
        let p = d.projector_diag(15);
        for m in &s.modes {
            let r = quadratic_pencil(&h, &p, d.gamma, m.eigenvalue) * &m.vector;
            assert!(r.iter().all(|x| x.norm() < 1e-12));
            assert!(m.overlap > 0.99);
        }
    }

    #[test]
    fn fast_single_mode_path_agrees() {
        let chain = reference_chain();
        let h = chain.hessian();
        let modes = normal_modes(&h).unwrap();
        for gamma in [1e-6, 5.328e-5, 1e-3] {
            let d = DampingConfig::new(gamma, vec![6, 7]).unwrap();
            let full = exact_damped_modes_with(&h, &modes, &d).unwrap();
            let fast = exact_mode_eigenvalue(&h, &modes, &d, 0).unwrap();
            assert!((full.mode(0).eigenvalue - fast).norm() < 1e-14);
        }
    }

    #[test]
    fn perturbative_rate_limits() {
        let chain = reference_chain();
        let modes = normal_modes(&chain.hessian()).unwrap();
        assert_eq!(perturbative_rate(&modes, &DampingConfig::new(0.0, vec![6, 7]).unwrap(), 0).unwrap(), 0.0);

        let p = TrapPotential::quadratic(0.05).unwrap();
        let u = solve_equilibrium(&p, 9, None).unwrap();
        let q = normal_modes(&hessian(&p, &u).unwrap()).unwrap();
        let d = DampingConfig::new(1e-6, (0..9).collect()).unwrap();
        assert_relative_eq!(perturbative_rate(&q, &d, 0).unwrap(), 0.5e-6, max_relative = 1e-9);
    }

    #[test]
    fn perturbative_matches_exact_at_640khz() {
        let chain = reference_chain();
        let scan = perturbation_error_scan(&chain, &[5.328e-5]).unwrap();
        assert!(scan[0].relative_error < 2.5e-4, "{:?}", scan[0]);
    }

    #[test]
    fn zero_gamma_scan_has_zero_error() {
        let scan = perturbation_error_scan(&reference_chain(), &[0.0]).unwrap();
        assert_eq!(scan[0].relative_error, 0.0);
    }

    #[test]
    fn error_grows_with_gamma() {
        // below γ ~ 1e-5 the truncation error drops under the ~1e-11 rounding
        // floor of the exact rate, so the trend is checked above it
        let gammas = [3e-5, 1e-4, 3e-4, 1e-3];
        let scan = perturbation_error_scan(&reference_chain(), &gammas).unwrap();
        for w in scan.windows(2) {
            assert!(w[1].relative_error > w[0].relative_error, "{scan:?}");
        }
    }

    #[test]
    fn linearized_rate_properties() {
        let chain = reference_chain();
        let modes = normal_modes(&chain.hessian()).unwrap();
        let d = DampingConfig::new(2e-4, vec![6, 7]).unwrap();
        let d2 = DampingConfig::new(4e-4, vec![6, 7]).unwrap();
        assert_eq!(linearized_rate(&modes, &d2, 0).unwrap(), 2.0 * linearized_rate(&modes, &d, 0).unwrap());
        let a = DampingConfig::new(2e-4, vec![1, 4]).unwrap();
        let b = DampingConfig::new(2e-4, vec![9, 13]).unwrap();
        let ab = DampingConfig::new(2e-4, vec![1, 4, 9, 13]).unwrap();
        assert_relative_eq!(
            linearized_rate(&modes, &ab, 0).unwrap(),
            linearized_rate(&modes, &a, 0).unwrap() + linearized_rate(&modes, &b, 0).unwrap(),
            max_relative = 1e-14
        );
        // g < 1e-3 keeps the first-order form within 1e-6
        let small = DampingConfig::new(1e-4, vec![6, 7]).unwrap();
        let lin = linearized_rate(&modes, &small, 0).unwrap();
        let pert = perturbative_rate(&modes, &small, 0).unwrap();
        assert!((lin - pert).abs() / pert < 1e-6);
    }

    #[test]
    fn mode_correction_properties() {
        let p = TrapPotential::quadratic(0.05).unwrap();
        let u = solve_equilibrium(&p, 6, None).unwrap();
        let q = normal_modes(&hessian(&p, &u).unwrap()).unwrap();
        let all = DampingConfig::new(1e-4, (0..6).collect()).unwrap();
        let w = first_order_mode_correction(&q, &all, 2).unwrap();
        assert!(w.iter().all(|x| x.norm() < 1e-10));

        let chain = reference_chain();
        let modes = normal_modes(&chain.hessian()).unwrap();
        let gamma = 5.328e-5;
        let d = DampingConfig::new(gamma, vec![6, 7]).unwrap();
        let w = first_order_mode_correction(&modes, &d, 0).unwrap();
        let v0 = modes.mode(0);
        let dot = w.iter().zip(v0.iter()).fold(Complex::new(0.0, 0.0), |s, (a, &b)| s + a * b);
        assert!(dot.norm() < 1e-10);
        assert!(w.norm() * gamma <= 1e-3);
    }

    #[test]
    fn mode_correction_predicts_exact_vector() {
        // exact damped vector, scaled so vᵀw = 1, minus v is γ·w⁽¹⁾ + O(γ²)
        let chain = reference_chain();
        let h = chain.hessian();
        let modes = normal_modes(&h).unwrap();
        let gamma = 1e-5;
        let d = DampingConfig::new(gamma, vec![6, 7]).unwrap();
        let exact = exact_damped_modes_with(&h, &modes, &d).unwrap();
        let v0 = modes.mode(0);
        let w = &exact.mode(0).vector;
        let proj = w.iter().zip(v0.iter()).fold(Complex::new(0.0, 0.0), |s, (a, &b)| s + a * b);
        let diff: DVector<Complex<f64>> = DVector::from_fn(15, |r, _| w[r] / proj - v0[r]);
        let predicted = first_order_mode_correction(&modes, &d, 0).unwrap() * Complex::new(gamma, 0.0);
        let err = (&diff - &predicted).norm();
        assert!(err < 1e-3 * predicted.norm(), "err {err} vs {}", predicted.norm());
    }

    #[test]
    fn mode_correction_rejects_degeneracy() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let modes = normal_modes(&h).unwrap();
        let d = DampingConfig::new(1e-3, vec![0]).unwrap();
        assert!(matches!(first_order_mode_correction(&modes, &d, 0), Err(Error::Degeneracy { .. })));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(DampingConfig::new(-1e-3, vec![0]).is_err());
        assert!(DampingConfig::new(1e-3, vec![1, 1]).is_err());
        let h = DMatrix::from_element(1, 1, 1.0);
        assert!(exact_damped_modes(&h, &DampingConfig::new(1e-3, vec![3]).unwrap()).is_err());
    }

    #[test]
    fn f32_exact_rate() {
        let p = TrapPotential::<f32>::new(0.00188, 0.00177).unwrap();
        let chain = IonChain::with_coolants(p, 9, &[3, 4]).unwrap();
        let h = chain.hessian();
        let d = DampingConfig::new(1e-3f32, vec![3, 4]).unwrap();
        let s = exact_damped_modes(&h, &d).unwrap();
        let m = normal_modes(&h).unwrap();
        let pert = perturbative_rate(&m, &d, 0).unwrap();
        assert!((s.mode(0).cooling_rate() - pert).abs() / pert < 1e-2);
    }

    proptest::proptest! {
        #[test]
        fn trace_identity(n in 3usize..12, mask in 1u32..4096, gamma in 1e-6f64..1e-2, x4 in 0.0f64..0.01) {
            let coolants: Vec<usize> = (0..n).filter(|k| mask & (1 << k) != 0).collect();
            proptest::prop_assume!(!coolants.is_empty());
            let p = TrapPotential::new(0.01, x4).unwrap();
            let u = solve_equilibrium(&p, n, None).unwrap();
            let h = hessian(&p, &u).unwrap();
            let d = DampingConfig::new(gamma, coolants.clone()).unwrap();
            let s = exact_damped_modes(&h, &d).unwrap();
            let total = s.trace();
            proptest::prop_assert!((total + gamma * coolants.len() as f64).abs() < 1e-8);
            for z in &s.eigenvalues {
                proptest::prop_assert!(z.re <= 1e-15);
            }
        }

        #[test]
        fn centre_placement_maximises_rate(m in 1usize..5) {
            // the m largest |v_0k|² beat every other m-subset
            let chain = IonChain::with_coolants(TrapPotential::reference(), 9, &[]).unwrap();
            let modes = normal_modes(&chain.hessian()).unwrap();
            let mut by_weight: Vec<usize> = (0..9).collect();
            by_weight.sort_by(|&a, &b| modes.participation(0, b).abs().partial_cmp(&modes.participation(0, a).abs()).unwrap());
            let best = DampingConfig::new(1e-4, by_weight[..m].to_vec()).unwrap();
            let best_rate = perturbative_rate(&modes, &best, 0).unwrap();
            for mask in 0u32..512 {
                if mask.count_ones() as usize != m { continue; }
                let set: Vec<usize> = (0..9).filter(|k| mask & (1 << k) != 0).collect();
                let r = perturbative_rate(&modes, &DampingConfig::new(1e-4, set).unwrap(), 0).unwrap();
                proptest::prop_assert!(r <= best_rate * (1.0 + 1e-12));
            }
        }
    }
}
