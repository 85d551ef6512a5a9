//! One-dimensional quadrature for smooth integrands, built on the
//! double-exponential rule of the `quadrature` crate.

/// Integral of `f` over `[a, b]`, split into `pieces` equal panels, each
/// integrated to `tol / pieces`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    let pieces = pieces.max(1);
    let w = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let lo = a + k as f64 * w;
            let hi = if k + 1 == pieces { b } else { lo + w };
            quadrature::integrate(&f, lo, hi, tol / pieces as f64).integral
        })
        .sum()
}

/// Integral over `[a, inf)` of an integrand that decays like `exp(-t^2)`:
/// truncated where `exp(-t^2)` underflows relative to double precision.
pub fn integrate_gaussian_tail<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> f64 {
    let end = a.max(0.0) + 12.0;
    integrate(f, a, end, 48, tol)
}
