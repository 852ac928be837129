use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num};

/// Arithmetic needed by the rank-weighting formulas.
///
/// Only field operations, ordering and integer embedding are required, so
/// exact rationals qualify as well as the IEEE floats.
pub trait Scalar: Num + Copy + PartialOrd + FromPrimitive + Debug {
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// `self^exp` by repeated squaring; integer exponents only.
    fn powi_exact(self, mut exp: u32) -> Self {
        let mut base = self;
        let mut acc = Self::one();
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            exp >>= 1;
        }
        acc
    }
}

impl<T> Scalar for T where T: Num + Copy + PartialOrd + FromPrimitive + Debug {}

/// Scalars that also support transcendental functions.
pub trait FloatScalar: Scalar + Float {}

impl<T> FloatScalar for T where T: Scalar + Float {}
