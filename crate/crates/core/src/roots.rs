//! Bracketed scalar root finding: bisection followed by secant polish.

use crate::error::{Error, Result};

/// Root of `f` in `[lo, hi]`. Needs a sign change at the endpoints.
///
/// Bisection shrinks the bracket to `1e-6` of its width, then safeguarded secant steps
/// (falling back to bisection whenever a step leaves the bracket) converge to `xtol`.
pub fn bisect_secant<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::NoRootInBracket { lo, hi });
    }
    let width = b - a;
    while b - a > 1e-6 * width {
        let c = 0.5 * (a + b);
        let fc = f(c);
        if fc == 0.0 {
            return Ok(c);
        }
        if fc.signum() == fa.signum() {
            a = c;
            fa = fc;
        } else {
            b = c;
            fb = fc;
        }
    }
    // secant steps, with a bisection whenever the bracket failed to halve over two steps
    let mut last_width = b - a;
    let mut slow = 0;
    for _ in 0..200 {
        if b - a <= xtol {
            break;
        }
        let mut c = b - fb * (b - a) / (fb - fa);
        if slow >= 2 || !(c > a && c < b) {
            c = 0.5 * (a + b);
            slow = 0;
        }
        let fc = f(c);
        if fc == 0.0 {
            return Ok(c);
        }
        if fc.signum() == fa.signum() {
            a = c;
            fa = fc;
        } else {
            b = c;
            fb = fc;
        }
        if b - a > 0.5 * last_width {
            slow += 1;
        } else {
            slow = 0;
            last_width = b - a;
        }
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// First sign change of `f` on a uniform scan of `[lo, hi]` with `n` cells.
pub fn scan_bracket<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, n: usize) -> Option<(f64, f64)> {
    let h = (hi - lo) / n as f64;
    let mut x0 = lo;
    let mut f0 = f(x0);
    for k in 1..=n {
        let x1 = lo + h * k as f64;
        let f1 = f(x1);
        if f0 == 0.0 || f0.signum() != f1.signum() {
            return Some((x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect_secant(|x| x * x - 2.0, 0.0, 3.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn reports_missing_sign_change() {
        assert!(matches!(
            bisect_secant(|x| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(Error::NoRootInBracket { .. })
        ));
    }

    #[test]
    fn flat_tail_function() {
        let r = bisect_secant(|x: f64| (x - 0.3).powi(3), 0.0, 1.0, 1e-12).unwrap();
        assert!((r - 0.3).abs() < 1e-9);
    }

    #[test]
    fn scan_finds_first_change() {
        let (a, b) = scan_bracket(f64::sin, 0.5, 10.0, 100).unwrap();
        assert!(a < std::f64::consts::PI && b >= std::f64::consts::PI);
    }
}
