//! Composite Simpson quadrature.

/// Composite Simpson rule on `[a, b]` with `nodes` points (rounded up to odd, at least 3).
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, nodes: usize) -> f64 {
    let n = odd_nodes(nodes);
    if a == b {
        return 0.0;
    }
    let h = (b - a) / (n - 1) as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n - 1 {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * k as f64);
    }
    acc * h / 3.0
}

/// Simpson rule over already sampled values on a uniform grid with spacing `h`.
/// An even number of intervals is expected; a trailing odd interval uses the trapezoid rule.
pub fn simpson_samples(y: &[f64], h: f64) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let intervals = n - 1;
    let even = intervals - intervals % 2;
    let mut acc = 0.0;
    let mut k = 0;
    while k < even {
        acc += y[k] + 4.0 * y[k + 1] + y[k + 2];
        k += 2;
    }
    acc *= h / 3.0;
    if even < intervals {
        acc += 0.5 * h * (y[n - 2] + y[n - 1]);
    }
    acc
}

pub fn odd_nodes(n: usize) -> usize {
    let n = n.max(3);
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}
