//! Scalar root bracketing for the constellation designer.

use crate::error::{Error, Result};

const MAX_BISECTIONS: usize = 200;

/// Finds the first point above `lo` where `g` changes sign from negative to
/// nonnegative.
///
/// The bracket is grown by doubling `step` away from `lo` until `g ≥ 0` or
/// the search passes `cap`; the bracket is then bisected until its width is
/// below `rel_tol` relative to the root. Returns `Ok(None)` when `g` stays
/// negative up to `cap`.
pub fn first_crossing<G>(mut g: G, lo: f64, step: f64, cap: f64, rel_tol: f64) -> Result<Option<f64>>
where
    G: FnMut(f64) -> f64,
{
    if !(step > 0.0) || !lo.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "bad bracket start lo={lo} step={step}"
        )));
    }
    if g(lo) >= 0.0 {
        return Ok(Some(lo));
    }
    let mut a = lo;
    let mut offset = step;
    let mut b;
    loop {
        b = lo + offset;
        if b > cap {
            b = cap;
            if !(g(b) >= 0.0) {
                return Ok(None);
            }
            break;
        }
        let v = g(b);
        if v.is_nan() {
            return Err(Error::Domain(format!("root function is NaN at {b}")));
        }
        if v >= 0.0 {
            break;
        }
        a = b;
        offset *= 2.0;
    }

    for _ in 0..MAX_BISECTIONS {
        if b - a <= rel_tol * b.abs() {
            return Ok(Some(0.5 * (a + b)));
        }
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            return Ok(Some(mid));
        }
        if g(mid) >= 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    Err(Error::NoConvergence {
        what: "root bisection",
        iterations: MAX_BISECTIONS,
    })
}
