//! One-dimensional searches used by the calibrations.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimisation of a unimodal `f` on `[lo, hi]`.
///
/// Returns `(argmin, min)`. Stops when the bracket is narrower than `xtol`.
pub fn golden_section<F>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > xtol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Grid scan followed by golden-section refinement around the best point.
///
/// Non-finite objective values count as `+inf`, so a failing evaluation just
/// excludes that point.
pub fn scan_then_refine<F>(mut f: F, lo: f64, hi: f64, points: usize, xtol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    assert!(points >= 3);
    let step = (hi - lo) / (points - 1) as f64;
    let mut best = (lo, f64::INFINITY);
    let mut best_i = 0;
    for i in 0..points {
        let x = lo + step * i as f64;
        let v = f(x);
        let v = if v.is_finite() { v } else { f64::INFINITY };
        if v < best.1 {
            best = (x, v);
            best_i = i;
        }
    }
    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = lo + step * (best_i + 1).min(points - 1) as f64;
    let refined = golden_section(
        |x| {
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        },
        a,
        b,
        xtol,
    );
    if refined.1 <= best.1 {
        refined
    } else {
        best
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64, max_iter: usize) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol {
            return Some(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, v) = golden_section(|x| (x - 1.25).powi(2) + 3.0, -4.0, 7.0, 1e-10);
        // a flat minimum only resolves to about sqrt(eps)
        assert!((x - 1.25).abs() < 1e-7);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn scan_handles_multimodal_and_nan() {
        let f = |x: f64| {
            if x < -2.0 {
                f64::NAN
            } else {
                (x * 3.0).cos() + 0.1 * x * x
            }
        };
        let (x, _) = scan_then_refine(f, -5.0, 5.0, 101, 1e-10);
        // global minimum of cos(3x) + 0.1x² on [-2, 5] is near x = ±π/3 … check the value
        let g = |x: f64| (x * 3.0).cos() + 0.1 * x * x;
        let brute = (0..=70_000)
            .map(|i| -2.0 + 7.0 * i as f64 / 70_000.0)
            .map(g)
            .fold(f64::INFINITY, f64::min);
        assert!(g(x) <= brute + 1e-9);
    }

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, 0.0, 2.0, 1e-14, 200).is_none());
    }
}
