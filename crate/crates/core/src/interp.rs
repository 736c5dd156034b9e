//! Piecewise-linear interpolation over a strictly increasing knot grid.

use crate::real::Real;

/// Interpolates `ys` over the strictly increasing knots `xs` at `x`.
///
/// Queries outside the knot span clamp to the end values. A query that lands
/// exactly on a knot returns the stored value without arithmetic, so knot
/// evaluations are bit-exact.
pub(crate) fn lerp_sorted<T: Real>(xs: &[T], ys: &[T], x: T) -> T {
    debug_assert_eq!(xs.len(), ys.len());
    debug_assert!(xs.len() >= 2);
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    // First knot strictly above x; the guards above pin idx to 1..=last.
    let idx = xs.partition_point(|&k| k <= x);
    let (x0, x1) = (xs[idx - 1], xs[idx]);
    if x == x0 {
        return ys[idx - 1];
    }
    let t = (x - x0) / (x1 - x0);
    ys[idx - 1] + t * (ys[idx] - ys[idx - 1])
}
