//! Shape functions and regularized kernels.
//!
//! Every regularized kernel is a singular kernel times a shape function
//! `s(|r| / delta)` that vanishes at the origin fast enough to cancel the
//! singularity. Kernels are evaluated through the quotients `s(rho) / rho^m`,
//! which switch to a Taylor series for small `rho` so that they stay accurate
//! where the direct formula would divide two vanishing quantities.

use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::surface::NearTargetFrame;
use crate::Vec3;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const FOUR_PI: f64 = 4.0 * PI;

/// Below this `rho` the shape quotients are summed from their Taylor series.
pub const SERIES_SWITCH: f64 = 0.5;

/// Beyond `rho = SATURATION` every shape function equals 1 to far below
/// double precision (`erfc(8) ~ 1e-29`).
pub const SATURATION: f64 = 8.0;

/// Beyond `rho = ROUNDING_SATURATION` the tail `1 - s(rho)` is below half an
/// ulp of 1, so the singular kernel agrees with the regularized one to
/// rounding.
pub const ROUNDING_SATURATION: f64 = 6.5;

/// Complementary error function, backed by the `libm` port of the FreeBSD
/// implementation (sub-ulp accuracy, correct tail down to underflow).
#[inline]
pub fn erfc_accurate(x: f64) -> f64 {
    libm::erfc(x)
}

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Regularization length.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Smoothing(f64);

impl Smoothing {
    pub fn new(delta: f64) -> Self {
        assert!(delta > 0.0 && delta.is_finite(), "smoothing length must be positive, got {delta}");
        Self(delta)
    }

    #[inline]
    pub fn delta(self) -> f64 {
        self.0
    }
}

/// The erf-based shape functions
/// `s(r) = erf(r) + (2/sqrt(pi)) (alpha r + beta r^3) exp(-r^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    /// `erf(r)`
    S1,
    /// `erf(r) - (2/sqrt(pi)) r exp(-r^2)`
    S2,
    /// `erf(r) - (2/sqrt(pi)) (2 r^3 / 3 + r) exp(-r^2)`
    S3,
    /// `erf(r) + (2/(3 sqrt(pi))) (5 r - 2 r^3) exp(-r^2)`, on-surface single layer.
    S1Sharp,
    /// `erf(r) - (2/sqrt(pi)) (r - 2 r^3 / 3) exp(-r^2)`, on-surface double layer.
    S2Sharp,
}

impl Shape {
    #[inline]
    const fn coefficients(self) -> (f64, f64) {
        match self {
            Shape::S1 => (0.0, 0.0),
            Shape::S2 => (-1.0, 0.0),
            Shape::S3 => (-1.0, -2.0 / 3.0),
            Shape::S1Sharp => (5.0 / 3.0, -2.0 / 3.0),
            Shape::S2Sharp => (-1.0, 2.0 / 3.0),
        }
    }

    /// Order of vanishing at the origin: `s(r) ~ C r^m`.
    pub const fn leading_power(self) -> i32 {
        match self {
            Shape::S1 | Shape::S1Sharp => 1,
            Shape::S2 | Shape::S2Sharp => 3,
            Shape::S3 => 5,
        }
    }

    #[inline]
    pub fn value(self, r: f64) -> f64 {
        let (alpha, beta) = self.coefficients();
        if alpha == 0.0 && beta == 0.0 {
            return erf(r);
        }
        let r2 = r * r;
        erf(r) + FRAC_2_SQRT_PI * r * (-r2).exp() * (alpha + beta * r2)
    }

    /// `s(rho) / rho^m` with `m` the leading power; finite at `rho = 0`.
    #[inline]
    pub fn quotient(self, rho: f64) -> f64 {
        if rho < SERIES_SWITCH {
            self.series_quotient(rho)
        } else {
            self.value(rho) / rho.powi(self.leading_power())
        }
    }

    /// `quotient` for several shapes at once, sharing `erf` and `exp`.
    #[inline]
    pub fn quotients<const N: usize>(shapes: [Shape; N], rho: f64) -> [f64; N] {
        if rho < SERIES_SWITCH {
            return shapes.map(|s| s.series_quotient(rho));
        }
        let r2 = rho * rho;
        let e = erf(rho);
        let g = FRAC_2_SQRT_PI * rho * (-r2).exp();
        shapes.map(|s| {
            let (alpha, beta) = s.coefficients();
            let v = if alpha == 0.0 && beta == 0.0 { e } else { e + g * (alpha + beta * r2) };
            v / rho.powi(s.leading_power())
        })
    }

    /// Taylor series of `s(rho) / rho^m`. The coefficient of `rho^(2k+1)` in
    /// `s` is `(2/sqrt(pi)) (-1)^k / k! (1/(2k+1) + alpha - beta k)`.
    pub fn series_quotient(self, rho: f64) -> f64 {
        let (alpha, beta) = self.coefficients();
        let k0 = ((self.leading_power() - 1) / 2) as usize;
        let x = rho * rho;
        let mut fact = 1.0; // (-1)^k / k!
        for k in 1..=k0 {
            fact *= -1.0 / k as f64;
        }
        let mut pow = 1.0;
        let mut sum = 0.0;
        for k in k0..k0 + 40 {
            let kf = k as f64;
            let term = fact * (1.0 / (2.0 * kf + 1.0) + alpha - beta * kf) * pow;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            pow *= x;
            fact *= -1.0 / (kf + 1.0);
        }
        FRAC_2_SQRT_PI * sum
    }
}

#[inline]
pub fn s1(r: f64) -> f64 {
    Shape::S1.value(r)
}

#[inline]
pub fn s2(r: f64) -> f64 {
    Shape::S2.value(r)
}

#[inline]
pub fn s3(r: f64) -> f64 {
    Shape::S3.value(r)
}

#[inline]
pub fn s1_sharp(r: f64) -> f64 {
    Shape::S1Sharp.value(r)
}

#[inline]
pub fn s2_sharp(r: f64) -> f64 {
    Shape::S2Sharp.value(r)
}

/// `G(r) = -1 / (4 pi |r|)`.
#[inline]
pub fn laplace_single_singular(r: &Vec3) -> f64 {
    -1.0 / (FOUR_PI * r.norm())
}

/// `G(r) s(|r|/delta)` for a shape with leading power 1 (`S1` or `S1Sharp`).
#[inline]
pub fn laplace_single_with(shape: Shape, r: &Vec3, s: Smoothing) -> f64 {
    debug_assert_eq!(shape.leading_power(), 1);
    let d = s.delta();
    -shape.quotient(r.norm() / d) / (FOUR_PI * d)
}

/// Regularized single layer kernel `G_delta(r) = G(r) erf(|r| / delta)`.
#[inline]
pub fn laplace_single_kernel(r: &Vec3, s: Smoothing) -> f64 {
    laplace_single_with(Shape::S1, r, s)
}

/// Normal derivative `r . n / (4 pi |r|^3)` of `G(x - y)` with `r = x - y`.
#[inline]
pub fn laplace_double_singular(r: &Vec3, n_x: &Vec3) -> f64 {
    let rn = r.norm();
    r.dot(n_x) / (FOUR_PI * rn * rn * rn)
}

/// Double layer kernel smoothed by a shape with leading power 3.
#[inline]
pub fn laplace_double_with(shape: Shape, r: &Vec3, n_x: &Vec3, s: Smoothing) -> f64 {
    debug_assert_eq!(shape.leading_power(), 3);
    let d = s.delta();
    r.dot(n_x) * shape.quotient(r.norm() / d) / (FOUR_PI * d * d * d)
}

/// Regularized double layer kernel `(r . n / (4 pi |r|^3)) s2(|r| / delta)`, `r = x - y`.
#[inline]
pub fn laplace_double_kernel(r: &Vec3, n_x: &Vec3, s: Smoothing) -> f64 {
    laplace_double_with(Shape::S2, r, n_x, s)
}

/// Stokeslet `delta_ij / r + d_i d_j / r^3`, `d = y - x`.
pub fn stokeslet(y: &Vec3, x: &Vec3) -> Matrix3<f64> {
    let d = y - x;
    let r = d.norm();
    Matrix3::identity() / r + d * d.transpose() / (r * r * r)
}

/// Regularized Stokeslet `delta_ij s1(r/delta) / r + d_i d_j s2(r/delta) / r^3`.
pub fn stokeslet_kernel_reg(y: &Vec3, x: &Vec3, s: Smoothing) -> Matrix3<f64> {
    let d = y - x;
    let delta = s.delta();
    let rho = d.norm() / delta;
    Matrix3::identity() * (Shape::S1.quotient(rho) / delta)
        + d * d.transpose() * (Shape::S2.quotient(rho) / (delta * delta * delta))
}

/// Rank-three tensor indexed `[i][j][k]`.
pub type Tensor3 = [[[f64; 3]; 3]; 3];

fn tensor_from(f: impl Fn(usize, usize, usize) -> f64) -> Tensor3 {
    let mut t = [[[0.0; 3]; 3]; 3];
    for (i, ti) in t.iter_mut().enumerate() {
        for (j, tij) in ti.iter_mut().enumerate() {
            for (k, v) in tij.iter_mut().enumerate() {
                *v = f(i, j, k);
            }
        }
    }
    t
}

/// Stresslet `T_ijk = -6 d_i d_j d_k / r^5`, `d = y - x`.
pub fn stresslet(y: &Vec3, x: &Vec3) -> Tensor3 {
    let d = y - x;
    let r = d.norm();
    let c = -6.0 / r.powi(5);
    tensor_from(|i, j, k| c * d[i] * d[j] * d[k])
}

/// The polynomials `t1`, `t2` of the split stresslet, built from `b`, `n0`
/// and `xh = x - x0`.
pub fn split_numerators(x: &Vec3, frame: &NearTargetFrame) -> (Tensor3, Tensor3) {
    let n = frame.n0;
    let b = frame.b;
    let xh = x - frame.x0;
    let t1 = tensor_from(|i, j, k| {
        b * n[i] * n[j] * n[k] - (xh[i] * n[j] * n[k] + n[i] * xh[j] * n[k] + n[i] * n[j] * xh[k])
    });
    let t2 = tensor_from(|i, j, k| {
        b * (xh[i] * xh[j] * n[k] + xh[i] * n[j] * xh[k] + n[i] * xh[j] * xh[k]) - xh[i] * xh[j] * xh[k]
    });
    (t1, t2)
}

/// The two parts `T1 = -6 t1 / r^3`, `T2 = -6 (t2 - (r^2 - b^2) t1) / r^5` of
/// the stresslet, with `r^2 - b^2 = |xh|^2 - 2 b xh . n0`. Their sum is the
/// stresslet whenever `y = x0 + b n0`.
pub fn stresslet_split(x: &Vec3, frame: &NearTargetFrame) -> (Tensor3, Tensor3) {
    let (t1, t2) = split_numerators(x, frame);
    let r = (frame.y - x).norm();
    let xh = x - frame.x0;
    let excess = xh.norm_squared() - 2.0 * frame.b * xh.dot(&frame.n0);
    let (c1, c2) = (-6.0 / r.powi(3), -6.0 / r.powi(5));
    (
        tensor_from(|i, j, k| c1 * t1[i][j][k]),
        tensor_from(|i, j, k| c2 * (t2[i][j][k] - excess * t1[i][j][k])),
    )
}

/// Regularized split stresslet `T1 s2(r/delta) + T2 s3(r/delta)`.
pub fn stresslet_kernel_split_reg(x: &Vec3, frame: &NearTargetFrame, s: Smoothing) -> Tensor3 {
    let (t1, t2) = split_numerators(x, frame);
    let delta = s.delta();
    let rho = (frame.y - x).norm() / delta;
    let xh = x - frame.x0;
    let excess = xh.norm_squared() - 2.0 * frame.b * xh.dot(&frame.n0);
    let c1 = -6.0 * Shape::S2.quotient(rho) / delta.powi(3);
    let c2 = -6.0 * Shape::S3.quotient(rho) / delta.powi(5);
    tensor_from(|i, j, k| c1 * t1[i][j][k] + c2 * (t2[i][j][k] - excess * t1[i][j][k]))
}

/// `T_ijk q_j n_k` for a full tensor.
pub fn contract(t: &Tensor3, q: &Vec3, n: &Vec3) -> Vec3 {
    Vec3::from_fn(|i, _| {
        let mut acc = 0.0;
        for j in 0..3 {
            for k in 0..3 {
                acc += t[i][j][k] * q[j] * n[k];
            }
        }
        acc
    })
}

/// Contractions `t1_ijk q_j n_k` and `t2_ijk q_j n_k` without forming the tensors.
#[inline]
pub fn split_numerators_applied(xh: &Vec3, b: f64, n0: &Vec3, q: &Vec3, n: &Vec3) -> (Vec3, Vec3) {
    let nq = n0.dot(q);
    let nn = n0.dot(n);
    let xq = xh.dot(q);
    let xn = xh.dot(n);
    let t1 = n0 * (b * nq * nn - xq * nn - nq * xn) - xh * (nq * nn);
    let t2 = xh * (b * (xq * nn + nq * xn) - xq * xn) + n0 * (b * xq * xn);
    (t1, t2)
}

/// `T^delta_ijk q_j n_k` for the regularized split stresslet.
#[inline]
pub fn stresslet_split_reg_applied(
    x: &Vec3,
    frame: &NearTargetFrame,
    q: &Vec3,
    n: &Vec3,
    s: Smoothing,
) -> Vec3 {
    let xh = x - frame.x0;
    let (t1, t2) = split_numerators_applied(&xh, frame.b, &frame.n0, q, n);
    let delta = s.delta();
    let rho = (frame.y - x).norm() / delta;
    let excess = xh.norm_squared() - 2.0 * frame.b * xh.dot(&frame.n0);
    let c1 = -6.0 * Shape::S2.quotient(rho) / delta.powi(3);
    let c2 = -6.0 * Shape::S3.quotient(rho) / delta.powi(5);
    t1 * c1 + (t2 - t1 * excess) * c2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::Side;
    use approx::assert_relative_eq;

    // 50-digit reference values of erfc, computed with mpmath.
    const ERFC_TABLE: [(f64, f64); 13] = [
        (0.0, 1.0),
        (0.1, 0.8875370839817151077967),
        (0.5, 0.4795001221869534623173),
        (1.0, 0.1572992070502851306588),
        (1.5, 0.03389485352468927293302),
        (2.0, 0.004677734981047265837931),
        (3.0, 0.00002209049699858544137278),
        (4.5, 1.966160441542887476279e-10),
        (6.0, 2.151973671249891311659e-17),
        (8.0, 1.122429717298292707997e-29),
        (10.0, 2.088487583762544757001e-45),
        (26.0, 5.663192408856142846476e-296),
        (-1.2, 1.910313978229635380238),
    ];

    #[test]
    fn erfc_matches_reference_table() {
        for &(x, want) in &ERFC_TABLE {
            let got = erfc_accurate(x);
            assert!(((got - want) / want).abs() <= 1e-14, "erfc({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn shared_quotients_match_single_ones() {
        let shapes = [Shape::S1, Shape::S2, Shape::S3, Shape::S1Sharp, Shape::S2Sharp];
        for k in 0..200 {
            let rho = 0.037 * k as f64;
            let q = Shape::quotients(shapes, rho);
            for (s, v) in shapes.iter().zip(q) {
                assert_eq!(v, s.quotient(rho));
            }
        }
    }

    #[test]
    fn rounding_saturation_tail_below_half_ulp() {
        for shape in [Shape::S1, Shape::S2, Shape::S3, Shape::S1Sharp, Shape::S2Sharp] {
            let (alpha, beta) = shape.coefficients();
            for k in 0..40 {
                let r = ROUNDING_SATURATION + 0.05 * k as f64;
                let tail = erfc_accurate(r) - FRAC_2_SQRT_PI * r * (alpha + beta * r * r) * (-r * r).exp();
                assert!(tail.abs() < f64::EPSILON / 2.0, "{shape:?} {r} {tail:e}");
                assert!((shape.value(r) - 1.0).abs() <= f64::EPSILON);
            }
        }
    }

    #[test]
    fn erfc_reflection() {
        for x in [0.3, 1.7] {
            assert_relative_eq!(erfc_accurate(-x), 2.0 - erfc_accurate(x), max_relative = 1e-15);
        }
    }

    #[test]
    fn shapes_vanish_at_origin_and_saturate() {
        for shape in [Shape::S1, Shape::S2, Shape::S3, Shape::S1Sharp, Shape::S2Sharp] {
            assert_eq!(shape.value(0.0), 0.0);
            assert!((shape.value(SATURATION) - 1.0).abs() < 1e-25);
            for k in 0..400 {
                let v = shape.value(k as f64 * 0.02);
                assert!((-0.5..=1.5).contains(&v), "{shape:?} {v}");
            }
        }
        assert_relative_eq!(s1(3.0), 0.9999779095030014145586, max_relative = 1e-15);
    }

    #[test]
    fn s2_cubic_limit() {
        let want = 4.0 / (3.0 * PI.sqrt());
        assert_relative_eq!(Shape::S2.quotient(0.0), want, max_relative = 1e-15);
        // Taylor: s2(r)/r^3 = (2/sqrt(pi)) (2/3 - 2 r^2 / 5 + ...)
        let r: f64 = 1e-3;
        let taylor = FRAC_2_SQRT_PI * (2.0 / 3.0 - 0.4 * r * r + r.powi(4) / 7.0);
        assert_relative_eq!(Shape::S2.quotient(r), taylor, max_relative = 1e-14);
    }

    #[test]
    fn series_and_direct_quotients_agree_at_switch() {
        for shape in [Shape::S1, Shape::S2, Shape::S3, Shape::S1Sharp, Shape::S2Sharp] {
            for rho in [0.3, 0.5, 0.8] {
                let direct = shape.value(rho) / rho.powi(shape.leading_power());
                let series = shape.series_quotient(rho);
                assert_relative_eq!(direct, series, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn series_branch_matches_direct_formula_near_zero() {
        // Direct formula at tiny r vs the r = 0 limit.
        for shape in [Shape::S1, Shape::S1Sharp] {
            let direct = shape.value(1e-16) / 1e-16;
            assert_relative_eq!(direct, shape.quotient(0.0), max_relative = 1e-10);
        }
    }

    #[test]
    fn laplace_single_examples() {
        let s = Smoothing::new(0.1);
        let at0 = laplace_single_kernel(&Vec3::zeros(), s);
        assert_relative_eq!(at0, -1.0 / (2.0 * PI.powf(1.5) * 0.1), max_relative = 1e-15);
        let r = Vec3::new(1.0, 0.0, 0.0);
        assert_relative_eq!(laplace_single_kernel(&r, s), laplace_single_singular(&r), max_relative = 1e-15);
        let r = Vec3::new(0.0, 0.1, 0.0);
        assert_relative_eq!(laplace_single_kernel(&r, s), -erf(1.0) / (4.0 * PI * 0.1), max_relative = 1e-15);
    }

    #[test]
    fn laplace_single_scale_covariance() {
        let r = Vec3::new(0.02, -0.01, 0.03);
        let s = Smoothing::new(0.05);
        for c in [0.5, 2.0, 7.0] {
            assert_relative_eq!(
                laplace_single_kernel(&(r * c), Smoothing::new(0.05 * c)),
                laplace_single_kernel(&r, s) / c,
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn laplace_double_examples() {
        let s = Smoothing::new(0.1);
        let n = Vec3::z();
        assert_eq!(laplace_double_kernel(&Vec3::zeros(), &n, s), 0.0);
        assert_eq!(laplace_double_kernel(&Vec3::new(0.3, 0.0, 0.0), &n, s), 0.0);
        let r = Vec3::new(0.0, 0.0, 1.0);
        assert_relative_eq!(laplace_double_kernel(&r, &n, s), 1.0 / (4.0 * PI), max_relative = 1e-14);
    }

    #[test]
    fn regularized_kernels_saturate() {
        let s = Smoothing::new(0.01);
        let y = Vec3::new(0.1, 0.2, 0.3);
        let dirs = [Vec3::new(1.0, 2.0, -1.0), Vec3::new(-0.3, 0.1, 0.9)];
        for d in dirs {
            let x = y + d.normalize() * (SATURATION * 0.01);
            let a = stokeslet_kernel_reg(&y, &x, s);
            let b = stokeslet(&y, &x);
            assert!((a - b).norm() <= 1e-13 * b.norm());
            let n = Vec3::new(0.2, 0.5, 0.1).normalize();
            assert_relative_eq!(
                laplace_double_kernel(&(x - y), &n, s),
                laplace_double_singular(&(x - y), &n),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn stokeslet_examples() {
        let delta = 0.2;
        let s = Smoothing::new(delta);
        let y = Vec3::new(0.3, 0.1, -0.2);
        let at0 = stokeslet_kernel_reg(&y, &y, s);
        let want = Matrix3::identity() * (2.0 / (PI.sqrt() * delta));
        assert!((at0 - want).norm() <= 1e-14 * want.norm());
        let x = y - Vec3::new(10.0 * delta, 0.0, 0.0);
        let r = 10.0 * delta;
        let k = stokeslet_kernel_reg(&y, &x, s);
        assert_relative_eq!(k[(0, 0)], 2.0 / r, max_relative = 1e-15);
        assert_relative_eq!(k[(1, 1)], 1.0 / r, max_relative = 1e-15);
    }

    fn frame_for(x0: Vec3, n0: Vec3, b: f64) -> NearTargetFrame {
        NearTargetFrame {
            y: x0 + n0 * b,
            x0,
            b,
            n0,
            side: if b < 0.0 { Side::Inside } else { Side::Outside },
        }
    }

    #[test]
    fn split_at_foot_point() {
        let n0 = Vec3::new(1.0, 2.0, 2.0) / 3.0;
        let frame = frame_for(Vec3::new(0.1, 0.2, 0.3), n0, 0.05);
        let (t1, t2) = split_numerators(&frame.x0, &frame);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert_relative_eq!(t1[i][j][k], 0.05 * n0[i] * n0[j] * n0[k], epsilon = 1e-17);
                    assert_eq!(t2[i][j][k], 0.0);
                }
            }
        }
    }

    #[test]
    fn split_reassembles_stresslet() {
        let n0 = Vec3::new(-0.2, 0.4, 0.9).normalize();
        let frame = frame_for(Vec3::new(0.3, -0.1, 0.7), n0, -0.08);
        for x in [Vec3::new(0.5, 0.2, 0.1), Vec3::new(-0.4, 0.0, 0.9), Vec3::new(0.31, -0.12, 0.69)] {
            let (a, b) = stresslet_split(&x, &frame);
            let full = stresslet(&frame.y, &x);
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        let sum = a[i][j][k] + b[i][j][k];
                        let scale = full[i][j][k].abs().max(1e-3 * (frame.y - x).norm().powi(-2));
                        assert!((sum - full[i][j][k]).abs() <= 1e-12 * scale);
                    }
                }
            }
        }
    }

    #[test]
    fn applied_split_matches_tensor_contraction() {
        let n0 = Vec3::new(0.6, 0.0, 0.8);
        let frame = frame_for(Vec3::new(0.6, 0.0, 0.8), n0, 0.03);
        let s = Smoothing::new(0.04);
        let q = Vec3::new(0.3, -1.0, 0.5);
        let n = Vec3::new(0.5, 0.1, 0.86).normalize();
        for x in [Vec3::new(0.62, 0.05, 0.78), Vec3::new(0.0, 0.6, 0.8), frame.x0] {
            let t = stresslet_kernel_split_reg(&x, &frame, s);
            let full = contract(&t, &q, &n);
            let fast = stresslet_split_reg_applied(&x, &frame, &q, &n, s);
            assert!((full - fast).norm() <= 1e-12 * full.norm().max(1.0));
        }
    }
}
