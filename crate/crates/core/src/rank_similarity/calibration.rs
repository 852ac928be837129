//! Calibration of the persistence parameter from click-through mass.

use crate::error::{invalid, Error, Result};
use crate::rank_similarity::Persistence;
use crate::FloatScalar;

pub const MAX_BISECTION_STEPS: usize = 200;

/// Functional form linking `p` to the click mass of the first `depth` ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CalibrationMode {
    /// `1 - p^depth`: mass of the rank-weight family over the first ranks.
    #[default]
    Geometric,
    /// RBO weight carried by the first `depth` ranks; see [`prefix_weight`].
    RboPrefix,
}

impl std::str::FromStr for CalibrationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(CalibrationMode::Geometric),
            "rbo-prefix" => Ok(CalibrationMode::RboPrefix),
            other => Err(invalid(format!("unknown calibration mode `{other}`"))),
        }
    }
}

/// Share of the total RBO weight carried by the first `depth` ranks:
/// `1 - p^(d-1) + (1-p)/p · d · (ln(1/(1-p)) - Σ_{i<d} p^i/i)`.
pub fn prefix_weight<T: FloatScalar>(p: Persistence<T>, depth: usize) -> Result<T> {
    if depth < 1 {
        return Err(invalid("depth must be >= 1"));
    }
    let p = p.value();
    let d = T::from_count(depth);
    let one = T::one();
    let tail = log_series_tail(p, depth);
    Ok(one - p.powi(depth as i32 - 1) + (one - p) / p * d * tail)
}

/// `Σ_{i>=d} p^i / i`, which equals `ln(1/(1-p)) - Σ_{i<d} p^i/i`.
///
/// Summed directly for small `p`, where the logarithmic form cancels badly.
fn log_series_tail<T: FloatScalar>(p: T, depth: usize) -> T {
    let half = T::from_f64(0.5).unwrap();
    if p <= half {
        let mut sum = T::zero();
        let mut term = p.powi(depth as i32);
        for i in depth..depth + 4000 {
            let add = term / T::from_count(i);
            sum = sum + add;
            if add <= sum * T::epsilon() {
                break;
            }
            term = term * p;
        }
        sum
    } else {
        let mut head = T::zero();
        let mut pw = T::one();
        for i in 1..depth {
            pw = pw * p;
            head = head + pw / T::from_count(i);
        }
        -(-p).ln_1p() - head
    }
}

/// Finds the persistence whose first-`depth` click mass equals `mass`.
pub fn fit_persistence<T: FloatScalar>(mass: T, depth: usize, mode: CalibrationMode) -> Result<Persistence<T>> {
    if !(mass > T::zero() && mass < T::one()) {
        return Err(invalid(format!("mass must lie in (0,1), got {mass:?}")));
    }
    if depth < 1 {
        return Err(invalid("depth must be >= 1"));
    }
    match mode {
        CalibrationMode::Geometric => {
            let p = (T::one() - mass).powf(T::one() / T::from_count(depth));
            Persistence::new(p)
        }
        CalibrationMode::RboPrefix => {
            // prefix_weight falls from 1 to 0 as p runs over (0,1)
            let tol = T::from_f64(1e-12).unwrap();
            let two = T::one() + T::one();
            let (mut lo, mut hi) = (T::zero(), T::one());
            for _ in 0..MAX_BISECTION_STEPS {
                let mid = (lo + hi) / two;
                if prefix_weight(Persistence::new(mid)?, depth)? > mass {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= tol {
                    return Persistence::new((lo + hi) / two);
                }
            }
            Err(Error::NoConvergence(MAX_BISECTION_STEPS))
        }
    }
}
