//! Smallest-root search for scalar functions that start negative.

/// Grid points used to bracket the first sign change.
pub const SCAN_POINTS: usize = 4096;

/// Finds the smallest root of `f` in `(0, upper]`, given `f(0) < 0`.
///
/// A uniform scan of [`SCAN_POINTS`] points brackets the first point where
/// `f ≥ 0`; bisection then runs until the bracket cannot be split in double
/// precision. If no grid point is nonnegative, the cell around the largest
/// grid value is searched by golden section, which catches a pair of roots
/// closer together than the grid spacing when `f` is concave.
pub fn smallest_root<F: Fn(f64) -> f64>(f: F, upper: f64) -> Option<f64> {
    if !(upper > 0.0) {
        return None;
    }
    let step = upper / SCAN_POINTS as f64;
    let mut lo = 0.0;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 1..=SCAN_POINTS {
        let x = if i == SCAN_POINTS { upper } else { step * i as f64 };
        let fx = f(x);
        if fx >= 0.0 {
            return Some(bisect(&f, lo, x));
        }
        if fx > best.0 {
            best = (fx, x);
        }
        lo = x;
    }
    let a = (best.1 - step).max(0.0);
    let b = (best.1 + step).min(upper);
    let peak = golden_max(&f, a, b);
    if f(peak) >= 0.0 {
        return Some(bisect(&f, a, peak));
    }
    None
}

/// Bisection on `[lo, hi]` with `f(lo) < 0 ≤ f(hi)`, to float exhaustion.
fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> f64 {
    loop {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            return hi;
        }
        if f(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    for _ in 0..200 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - ratio * (b - a);
        d = a + ratio * (b - a);
        if b - a <= f64::EPSILON * b.abs() {
            break;
        }
    }
    0.5 * (a + b)
}
