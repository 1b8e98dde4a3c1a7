//! Composite Simpson rules.

/// Composite Simpson on `[a, b]` with `intervals` (rounded up to even) subintervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals.max(2) + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * k as f64);
    }
    acc * h / 3.0
}

/// Simpson weights for samples on a uniform grid with an even number of intervals.
pub fn simpson_samples(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    assert!(
        n >= 2 && n.is_multiple_of(2),
        "Simpson needs an even number of intervals"
    );
    let mut acc = values[0] + values[n];
    for (k, v) in values.iter().enumerate().take(n).skip(1) {
        acc += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

/// Doubles the number of intervals, starting from `start`, until the relative
/// change drops below `rel_tol` or `max_doublings` is reached.
pub fn adaptive_simpson(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    start: usize,
    rel_tol: f64,
    max_doublings: usize,
) -> f64 {
    let mut n = start.max(2);
    let mut prev = simpson(&f, a, b, n);
    for _ in 0..max_doublings {
        n *= 2;
        let next = simpson(&f, a, b, n);
        if (next - prev).abs() <= rel_tol * next.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        prev = next;
    }
    prev
}

/// `∫_0^T f(t) dt` on a log-spaced grid: Simpson in `u = ln(1 + t)`.
pub fn log_spaced_simpson(f: impl Fn(f64) -> f64, t_max: f64, intervals: usize) -> f64 {
    let u_max = t_max.ln_1p();
    simpson(
        |u| {
            let e = u.exp();
            f(e - 1.0) * e
        },
        0.0,
        u_max,
        intervals,
    )
}
