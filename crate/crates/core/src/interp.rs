//! Piecewise-linear lookup at real-valued positions.
//!
//! Positions are measured in row units: position `x` falls between row
//! `floor(x)` and `floor(x) + 1`. Positions outside `[0, len - 1]` clamp to
//! the boundary row, where the slope is zero.

use crate::scalar::Scalar;

/// Cell lookup result: left row, right row, fractional offset, and whether
/// the position was inside the valid range (non-zero slope).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell<T> {
    pub lo: usize,
    pub hi: usize,
    pub frac: T,
    pub inside: bool,
}

pub fn locate<T: Scalar>(len: usize, pos: T) -> Cell<T> {
    debug_assert!(len >= 1);
    let last = len - 1;
    if len == 1 || !(pos > T::zero()) {
        // NaN positions land here too.
        let inside = len > 1 && pos == T::zero();
        return Cell { lo: 0, hi: 1.min(last), frac: T::zero(), inside };
    }
    let last_t = T::from_count(last);
    if pos >= last_t {
        return Cell { lo: last, hi: last, frac: T::zero(), inside: false };
    }
    let lo = pos.floor().to_usize().unwrap_or(0).min(last - 1);
    let frac = pos - T::from_count(lo);
    Cell { lo, hi: lo + 1, frac, inside: true }
}

/// Value and slope of the piecewise-linear curve through `values` at `pos`.
pub fn sample<T: Scalar>(values: &[T], pos: T) -> (T, T) {
    let c = locate(values.len(), pos);
    let a = values[c.lo];
    let b = values[c.hi];
    let v = a + (b - a) * c.frac;
    let slope = if c.inside { b - a } else { T::zero() };
    (v, slope)
}

/// Resample `values` onto `target` points with endpoint-aligned uniform grids.
/// Source index `i` maps to target position `i * (target - 1) / (len - 1)`.
pub fn resample<T: Scalar>(values: &[T], target: usize) -> Vec<T> {
    let len = values.len();
    assert!(len >= 2 && target >= 2, "resample needs at least two points on each side");
    if len == target {
        return values.to_vec();
    }
    let scale = T::from_count(len - 1) / T::from_count(target - 1);
    (0..target)
        .map(|t| {
            if t == 0 {
                values[0]
            } else if t == target - 1 {
                values[len - 1]
            } else {
                sample(values, T::from_count(t) * scale).0
            }
        })
        .collect()
}
