//! Bracketed root finding for monotone functions.

/// Finds `x` in `[lo, hi]` with `f(x) = 0` for a non-increasing `f` with
/// `f(lo) >= 0 >= f(hi)`.
///
/// Bisection keeps the bracket; Illinois-style secant steps refine it. Stops
/// when the bracket is narrower than `x_tol` or `f` hits zero exactly.
pub fn solve_decreasing<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> f64 {
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if f_lo <= 0.0 {
        return lo;
    }
    if f_hi >= 0.0 {
        return hi;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if (hi - lo).abs() <= x_tol {
            break;
        }
        let secant = lo - f_lo * (hi - lo) / (f_hi - f_lo);
        let width = hi - lo;
        // fall back to bisection when the secant lands near the bracket ends
        let x = if secant.is_finite() && secant > lo + 0.01 * width && secant < hi - 0.01 * width {
            secant
        } else {
            0.5 * (lo + hi)
        };
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx > 0.0 {
            lo = x;
            f_lo = fx;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            f_hi = fx;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        }
    }
    if f_lo.abs() < f_hi.abs() {
        lo
    } else {
        hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cube_root() {
        let x = solve_decreasing(|x| 2.0 - x * x * x, 0.0, 3.0, 1e-15);
        assert!((x - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn flat_then_steep() {
        let x = solve_decreasing(|x: f64| (-(x - 5.0)).exp() - 1.0, -50.0, 50.0, 1e-14);
        assert!((x - 5.0).abs() < 1e-12);
    }
}
