//! Small floating-point helpers shared across modules.
//!
//! Generator rows sum to zero, so `Σ_y u(y) q(y|x,a)` routinely cancels
//! terms several orders of magnitude larger than the result. The dot product
//! here is the compensated `Dot2` scheme (error-free products via FMA plus
//! two-sum accumulation), which returns the result as if computed in twice
//! the working precision.

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, libm::fma(a, b, -p))
}

/// Compensated dot product over `(index, coefficient)` pairs against `u`.
/// Terms are accumulated in iteration order.
pub fn sparse_dot(entries: &[(usize, f64)], u: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for &(y, q) in entries {
        let (p, ep) = two_prod(q, u[y]);
        let (t, es) = two_sum(s, p);
        s = t;
        c += es + ep;
    }
    s + c
}

/// Compensated (Neumaier) sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for v in values {
        let (t, e) = two_sum(s, v);
        s = t;
        c += e;
    }
    s + c
}

/// Sample mean and standard error of the mean (`std / sqrt(n)`, with the
/// `n - 1` variance). A single sample has standard error zero.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    let var = ss / (n - 1) as f64;
    (mean, libm::sqrt(var / n as f64))
}

/// `count` geometrically spaced points spanning `[lo, hi]` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> alloc::vec::Vec<f64> {
    match count {
        0 => alloc::vec::Vec::new(),
        1 => alloc::vec![lo],
        _ => {
            let ratio = libm::log(hi / lo) / (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i + 1 == count {
                        hi
                    } else {
                        lo * libm::exp(ratio * i as f64)
                    }
                })
                .collect()
        }
    }
}

/// `count` evenly spaced points on `[lo, hi]`; a single point sits at `lo`.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> alloc::vec::Vec<f64> {
    match count {
        0 => alloc::vec::Vec::new(),
        1 => alloc::vec![lo],
        _ => (0..count)
            .map(|i| {
                if i + 1 == count {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}
