use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar the chain mechanics are generic over.
///
/// The numeric tolerances are per type: `f64` runs at the tolerances the
/// solvers are specified for, `f32` at proportionally looser ones.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Default
{
    /// Max-norm of the potential gradient accepted as an equilibrium.
    const EQUILIBRIUM_TOL: f64;
    /// Relative step below which iterative refinements stop.
    const REFINE_TOL: f64;

    /// Converts an `f64` literal. Every value used here fits both float widths.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn infinity() -> Self {
        Self::lit(f64::INFINITY)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Real for f64 {
    const EQUILIBRIUM_TOL: f64 = 1e-10;
    const REFINE_TOL: f64 = 1e-15;
}

impl Real for f32 {
    const EQUILIBRIUM_TOL: f64 = 2e-4;
    const REFINE_TOL: f64 = 1e-7;
}
