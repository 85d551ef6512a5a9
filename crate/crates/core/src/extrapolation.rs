//! Error integrals `I_n` and the extrapolation systems.
//!
//! Near the surface the smoothing error of a regularized layer integral has
//! the form `c1 rho I0(lambda) + c2 rho^3 I2(lambda) [+ c3 rho^5 I4(lambda)]`
//! with `lambda = b / delta`, `delta = rho H`, and coefficients that do not
//! depend on `rho`. Evaluating the integral for three (four) values of `rho`
//! gives a square system whose first unknown is the exact integral; its
//! solution is a fixed linear combination `sum a_i S_i` of the regularized
//! values.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::kernels::{erfc_accurate, Smoothing};
use crate::quad1d;
use crate::{Error, Result};

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Extrapolated values whose weight amplification `sum |a_i|` exceeds this
/// are rejected as singular.
pub const MAX_AMPLIFICATION: f64 = 1e12;

/// Anchor grid spacing where fractional smoothing lengths agree with `rho h`.
pub const DEFAULT_ANCHOR: f64 = 1.0 / 64.0;

/// `I0(l) = exp(-l^2)/sqrt(pi) - |l| erfc|l|`.
pub fn i0(lambda: f64) -> f64 {
    let l = lambda.abs();
    (-l * l).exp() / SQRT_PI - l * erfc_accurate(l)
}

/// `I2(l) = (2/3) ((1/2 - l^2) exp(-l^2)/sqrt(pi) + |l|^3 erfc|l|)`.
pub fn i2(lambda: f64) -> f64 {
    let l = lambda.abs();
    let l2 = l * l;
    (2.0 / 3.0) * ((0.5 - l2) * (-l2).exp() / SQRT_PI + l2 * l * erfc_accurate(l))
}

/// `I4(l) = (8 l^4 - 4 l^2 + 6) exp(-l^2) / (15 sqrt(pi)) - (8/15) |l|^5 erfc|l|`.
///
/// With `t = sqrt(s^2 + l^2)` the defining integral becomes
/// `int_|l|^inf erfc(t) (t^2 - l^2)^2 dt`; the moments
/// `int_L^inf t^k erfc(t) dt` follow by parts.
pub fn i4(lambda: f64) -> f64 {
    let l = lambda.abs();
    let l2 = l * l;
    (8.0 * l2 * l2 - 4.0 * l2 + 6.0) * (-l2).exp() / (15.0 * SQRT_PI)
        - (8.0 / 15.0) * l2 * l2 * l * erfc_accurate(l)
}

/// `I_n` for `n` in `{0, 2, 4}`.
pub fn i_n(n: usize, lambda: f64) -> f64 {
    match n {
        0 => i0(lambda),
        2 => i2(lambda),
        4 => i4(lambda),
        _ => panic!("I_{n} is not implemented"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    /// Three smoothing lengths, `O(delta^5)` smoothing error.
    Fifth,
    /// Four smoothing lengths, `O(delta^7)` smoothing error.
    Seventh,
}

impl Order {
    pub fn terms(self) -> usize {
        match self {
            Order::Fifth => 3,
            Order::Seventh => 4,
        }
    }

    pub fn as_number(self) -> u32 {
        match self {
            Order::Fifth => 5,
            Order::Seventh => 7,
        }
    }

    pub fn from_number(n: u32) -> Result<Self> {
        match n {
            5 => Ok(Order::Fifth),
            7 => Ok(Order::Seventh),
            _ => Err(Error::InvalidPlan(format!("order must be 5 or 7, got {n}"))),
        }
    }

    /// Default exponent `q` for `delta ~ h^q`, targeting `O(h^4)` overall.
    pub fn default_q(self) -> f64 {
        match self {
            Order::Fifth => 4.0 / 5.0,
            Order::Seventh => 4.0 / 7.0,
        }
    }
}

/// How the smoothing lengths follow the grid spacing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DeltaRule {
    /// `delta_i = rho_i h`.
    Proportional,
    /// `delta_i = rho_i h^q anchor^(1-q)`.
    Fractional { q: f64, anchor: f64 },
}

impl DeltaRule {
    pub fn base_length(&self, h: f64) -> f64 {
        match *self {
            DeltaRule::Proportional => h,
            DeltaRule::Fractional { q, anchor } => h.powf(q) * anchor.powf(1.0 - q),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            DeltaRule::Proportional => "proportional".to_string(),
            DeltaRule::Fractional { q, anchor } => format!("fractional(q={q};anchor={anchor})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationPlan {
    rhos: Vec<f64>,
    order: Order,
    delta_rule: DeltaRule,
    far_cutoff: f64,
}

impl ExtrapolationPlan {
    pub fn new(rhos: Vec<f64>, order: Order, delta_rule: DeltaRule, far_cutoff: f64) -> Result<Self> {
        if rhos.len() != order.terms() {
            return Err(Error::InvalidPlan(format!(
                "order {} needs {} smoothing multipliers, got {}",
                order.as_number(),
                order.terms(),
                rhos.len()
            )));
        }
        if rhos[0] <= 0.0 || rhos.windows(2).any(|w| w[1] <= w[0]) || rhos.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidPlan(format!(
                "multipliers must be positive and strictly increasing: {rhos:?}"
            )));
        }
        if let DeltaRule::Fractional { q, anchor } = delta_rule {
            if !(q > 0.0 && q <= 1.0) || !(anchor > 0.0) {
                return Err(Error::InvalidPlan(format!("need 0 < q <= 1 and anchor > 0, got q={q}, anchor={anchor}")));
            }
        }
        if !(far_cutoff > 0.0) {
            return Err(Error::InvalidPlan(format!("far cutoff must be positive, got {far_cutoff}")));
        }
        Ok(Self {
            rhos,
            order,
            delta_rule,
            far_cutoff,
        })
    }

    /// `delta = rho h` with `rho = (2, 3, 4)`.
    pub fn fifth_order() -> Self {
        Self::new(vec![2.0, 3.0, 4.0], Order::Fifth, DeltaRule::Proportional, 4.0).unwrap()
    }

    /// `delta = rho h` with `rho = (2, 3, 4, 5)`.
    pub fn seventh_order() -> Self {
        Self::new(vec![2.0, 3.0, 4.0, 5.0], Order::Seventh, DeltaRule::Proportional, 4.0).unwrap()
    }

    pub fn with_rhos(self, rhos: Vec<f64>) -> Result<Self> {
        Self::new(rhos, self.order, self.delta_rule, self.far_cutoff)
    }

    /// Switch to `delta ~ h^q`, agreeing with `rho h` at `h = anchor`.
    pub fn fractional(self, q: f64, anchor: f64) -> Result<Self> {
        Self::new(self.rhos, self.order, DeltaRule::Fractional { q, anchor }, self.far_cutoff)
    }

    pub fn with_far_cutoff(self, far_cutoff: f64) -> Result<Self> {
        Self::new(self.rhos, self.order, self.delta_rule, far_cutoff)
    }

    pub fn rhos(&self) -> &[f64] {
        &self.rhos
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn delta_rule(&self) -> DeltaRule {
        self.delta_rule
    }

    pub fn far_cutoff(&self) -> f64 {
        self.far_cutoff
    }

    pub fn deltas(&self, h: f64) -> Vec<Smoothing> {
        let base = self.delta_rule.base_length(h);
        self.rhos.iter().map(|r| Smoothing::new(r * base)).collect()
    }

    pub fn max_delta(&self, h: f64) -> f64 {
        self.rhos[self.rhos.len() - 1] * self.delta_rule.base_length(h)
    }

    /// Whether a target at signed distance `b` skips the regularization.
    pub fn is_far(&self, b: f64, h: f64) -> bool {
        b.abs() >= self.far_cutoff * self.max_delta(h)
    }

    pub fn rho_label(&self) -> String {
        self.rhos.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(";")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtrapolationWeights {
    pub a: Vec<f64>,
    pub lambda: Vec<f64>,
    /// The target was far enough that the unregularized integral is used.
    pub degenerate_far: bool,
}

impl ExtrapolationWeights {
    pub fn amplification(&self) -> f64 {
        self.a.iter().map(|a| a.abs()).sum()
    }
}

/// Extrapolation weights for a target at signed distance `b`.
pub fn solve_weights(plan: &ExtrapolationPlan, b: f64, h: f64) -> Result<ExtrapolationWeights> {
    let deltas = plan.deltas(h);
    let lambda: Vec<f64> = deltas.iter().map(|d| b / d.delta()).collect();
    if plan.is_far(b, h) {
        let mut a = vec![0.0; deltas.len()];
        a[0] = 1.0;
        return Ok(ExtrapolationWeights {
            a,
            lambda,
            degenerate_far: true,
        });
    }
    let a = weights_for(plan.rhos(), &lambda)?;
    Ok(ExtrapolationWeights {
        a,
        lambda,
        degenerate_far: false,
    })
}

/// Row `i` of the system: `[1, rho I0, rho^3 I2 (, rho^5 I4)]` at `lambda_i`.
pub fn system_matrix(rhos: &[f64], lambda: &[f64]) -> DMatrix<f64> {
    let k = rhos.len();
    DMatrix::from_fn(k, k, |i, j| {
        let (rho, l) = (rhos[i], lambda[i]);
        match j {
            0 => 1.0,
            _ => rho.powi(2 * j as i32 - 1) * i_n(2 * (j - 1), l),
        }
    })
}

/// Weights `a` with `sum_i a_i M_ij = delta_0j`, i.e. the first row of the
/// inverse system matrix. Solved by LU with partial pivoting on the
/// transposed system with each equation scaled to unit max-norm.
pub fn weights_for(rhos: &[f64], lambda: &[f64]) -> Result<Vec<f64>> {
    let k = rhos.len();
    assert_eq!(k, lambda.len());
    let m = system_matrix(rhos, lambda);
    let mut mt = m.transpose();
    let mut rhs = nalgebra::DVector::zeros(k);
    rhs[0] = 1.0;
    for row in 1..k {
        let s = mt.row(row).amax();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::SingularSystem {
                amplification: f64::INFINITY,
            });
        }
        mt.row_mut(row).scale_mut(1.0 / s);
    }
    let a = mt.lu().solve(&rhs).ok_or(Error::SingularSystem {
        amplification: f64::INFINITY,
    })?;
    let amplification: f64 = a.iter().map(|v| v.abs()).sum();
    if !amplification.is_finite() || amplification > MAX_AMPLIFICATION {
        return Err(Error::SingularSystem { amplification });
    }
    Ok(a.iter().copied().collect())
}

/// `sum_i a_i values_i`.
pub fn extrapolate<T>(values: &[T], weights: &ExtrapolationWeights) -> T
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    assert_eq!(values.len(), weights.a.len());
    let mut acc = values[0] * weights.a[0];
    for (v, a) in values.iter().zip(&weights.a).skip(1) {
        acc = acc + *v * *a;
    }
    acc
}

/// Determinant of the fifth-order system with rows
/// `[1, rho_i I0(x/rho_i), rho_i^3 I2(x/rho_i)]`, `x = b/h`.
pub fn determinant(rhos: [f64; 3], x: f64) -> f64 {
    let row = |r: f64| (r * i0(x / r), r.powi(3) * i2(x / r));
    let (p1, q1) = row(rhos[0]);
    let (p2, q2) = row(rhos[1]);
    let (p3, q3) = row(rhos[2]);
    (p2 - p1) * (q3 - q1) - (p3 - p1) * (q2 - q1)
}

/// `(r3 - r2)(r2 - r1)(r3 - r1)(r1 + r2 + r3) / (3 pi)`, the determinant at `x = 0`.
pub fn determinant_at_surface(rhos: [f64; 3]) -> f64 {
    let [r1, r2, r3] = rhos;
    (r3 - r2) * (r2 - r1) * (r3 - r1) * (r1 + r2 + r3) / (3.0 * PI)
}

#[derive(Clone, Debug)]
pub struct DeterminantReport {
    pub at_zero: f64,
    pub closed_form_at_zero: f64,
    pub min_det: f64,
    pub min_at: f64,
}

/// Checks that the fifth-order determinant is positive on `xs` and matches
/// its closed form at `x = 0` to `1e-12`.
pub fn determinant_positivity_check(rhos: [f64; 3], xs: &[f64]) -> Result<DeterminantReport> {
    if !(rhos[0] > 0.0 && rhos[0] < rhos[1] && rhos[1] < rhos[2]) {
        return Err(Error::InvalidPlan(format!("need 0 < rho1 < rho2 < rho3, got {rhos:?}")));
    }
    let at_zero = determinant(rhos, 0.0);
    let closed = determinant_at_surface(rhos);
    if (at_zero - closed).abs() > 1e-12 * closed.abs().max(1.0) {
        return Err(Error::PositivityViolated { x: 0.0, det: at_zero });
    }
    let mut min_det = f64::INFINITY;
    let mut min_at = 0.0;
    for &x in xs {
        let d = determinant(rhos, x);
        if !(d > 0.0) {
            return Err(Error::PositivityViolated { x, det: d });
        }
        if d < min_det {
            min_det = d;
            min_at = x;
        }
    }
    Ok(DeterminantReport {
        at_zero,
        closed_form_at_zero: closed,
        min_det,
        min_at,
    })
}

/// Kernel of the double layer error integrals: `-erfc(r) - (2/sqrt(pi)) r exp(-r^2)`.
pub fn phi_double(r: f64) -> f64 {
    -erfc_accurate(r) - 2.0 / SQRT_PI * r * (-r * r).exp()
}

/// `1 - s3(r) = erfc(r) + (2/sqrt(pi)) (2 r^3 / 3 + r) exp(-r^2)`.
pub fn phi_stresslet(r: f64) -> f64 {
    erfc_accurate(r) + 2.0 / SQRT_PI * (2.0 * r * r * r / 3.0 + r) * (-r * r).exp()
}

/// `J_n(l) = int_0^inf phi(sqrt(s^2+l^2)) / (s^2+l^2)^(3/2) s^(n+3) ds` by quadrature.
pub fn j_n_numeric(n: usize, lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    let f = |s: f64| {
        let t2 = s * s + l2;
        if t2 == 0.0 {
            return if n == 0 { phi_double(0.0) } else { 0.0 };
        }
        let t = t2.sqrt();
        phi_double(t) * s.powi(n as i32 + 3) / (t2 * t)
    };
    quad1d::integrate_gaussian_tail(f, 0.0, 1e-15)
}

/// `K_n(l) = int_0^inf phi3(sqrt(s^2+l^2)) / (s^2+l^2)^(5/2) s^(n+5) ds` by quadrature.
pub fn k_n_numeric(n: usize, lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    let f = |s: f64| {
        let t2 = s * s + l2;
        if t2 == 0.0 {
            return if n == 0 { phi_stresslet(0.0) } else { 0.0 };
        }
        let t = t2.sqrt();
        phi_stresslet(t) * s.powi(n as i32 + 5) / (t2 * t2 * t)
    };
    quad1d::integrate_gaussian_tail(f, 0.0, 1e-15)
}

#[derive(Clone, Debug)]
pub struct RelationRow {
    pub name: &'static str,
    pub lambda: f64,
    pub ratio: f64,
    pub expected: f64,
}

/// The companion integrals satisfy `J0 = -2 I0`, `J2 = -4 I2`, `J4 = -6 I4`,
/// `K0 = (8/3) I0`, `K2 = 8 I2`, so the double layer and stresslet errors
/// share the single layer extrapolation system. Verifies each ratio to
/// `1e-8` at every `lambda` given.
pub fn companion_relations_check(lambdas: &[f64]) -> Result<Vec<RelationRow>> {
    type Numeric = fn(usize, f64) -> f64;
    let relations: [(&'static str, Numeric, usize, f64); 5] = [
        ("J0 = -2 I0", j_n_numeric, 0, -2.0),
        ("J2 = -4 I2", j_n_numeric, 2, -4.0),
        ("J4 = -6 I4", j_n_numeric, 4, -6.0),
        ("K0 = 8/3 I0", k_n_numeric, 0, 8.0 / 3.0),
        ("K2 = 8 I2", k_n_numeric, 2, 8.0),
    ];
    let mut rows = Vec::new();
    for &lambda in lambdas {
        for &(name, numeric, n, expected) in &relations {
            let ratio = numeric(n, lambda) / i_n(n, lambda);
            if !((ratio - expected).abs() <= 1e-8 * expected.abs()) {
                return Err(Error::RelationViolated {
                    name: name.to_string(),
                    lambda,
                    ratio,
                    expected,
                });
            }
            rows.push(RelationRow {
                name,
                lambda,
                ratio,
                expected,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn values_at_zero() {
        assert_relative_eq!(i0(0.0), 0.5641895835477563, max_relative = 1e-15);
        assert_relative_eq!(i2(0.0), 0.18806319451591877, max_relative = 1e-15);
        assert_relative_eq!(i4(0.0), 2.0 / (5.0 * SQRT_PI), max_relative = 1e-15);
    }

    #[test]
    fn i2_identity() {
        for k in 0..=40 {
            let x = k as f64 * 0.125;
            let rhs = -(2.0 / 3.0) * x * x * i0(x) + (-x * x).exp() / (3.0 * SQRT_PI);
            assert!((i2(x) - rhs).abs() <= 1e-14);
        }
    }

    #[test]
    fn i_integrals_even_positive_decreasing() {
        for n in [0, 2, 4] {
            let mut prev = f64::INFINITY;
            for k in 0..=200 {
                let l = k as f64 * 0.05;
                let v = i_n(n, l);
                assert_eq!(v, i_n(n, -l));
                assert!(v > 0.0, "I{n}({l}) = {v}");
                assert!(v < prev, "I{n} not decreasing at {l}");
                assert!(v <= (-l * l).exp(), "I{n}({l}) exceeds exp(-l^2)");
                prev = v;
            }
        }
        assert!(i4(3.0) < 1e-4);
    }

    #[test]
    fn surface_weights() {
        let plan = ExtrapolationPlan::fifth_order();
        let w = solve_weights(&plan, 0.0, 0.1).unwrap();
        let want = [14.0 / 3.0, -16.0 / 3.0, 5.0 / 3.0];
        for (a, b) in w.a.iter().zip(want) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
        assert!(!w.degenerate_far);
    }

    #[test]
    fn weights_tend_to_first_value_far_away() {
        let plan = ExtrapolationPlan::fifth_order().with_far_cutoff(f64::INFINITY).unwrap();
        let h = 0.02;
        let w = solve_weights(&plan, 20.0 * h, h).unwrap();
        assert!((w.a[0] - 1.0).abs() <= 1e-6);
        assert!(w.a[1].abs() <= 1e-6 && w.a[2].abs() <= 1e-6);
    }

    #[test]
    fn far_cutoff_gives_degenerate_weights() {
        let plan = ExtrapolationPlan::fifth_order();
        let h = 0.02;
        let w = solve_weights(&plan, -16.0 * h, h).unwrap();
        assert!(w.degenerate_far);
        assert_eq!(w.a, vec![1.0, 0.0, 0.0]);
        // Just inside the cutoff the weights are already within 1e-6 of it.
        let w = solve_weights(&plan, 15.99 * h, h).unwrap();
        assert!(!w.degenerate_far);
        assert!((w.a[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn extrapolate_examples() {
        let plan = ExtrapolationPlan::fifth_order();
        let w = solve_weights(&plan, 0.0, 0.1).unwrap();
        assert_relative_eq!(extrapolate(&[2.5, 2.5, 2.5], &w), 2.5, max_relative = 1e-13);
        let v = [1.0, 2.0, 4.0];
        assert_relative_eq!(extrapolate(&v, &w), (14.0 - 32.0 + 20.0) / 3.0, max_relative = 1e-13);
        let far = ExtrapolationWeights {
            a: vec![1.0, 0.0, 0.0],
            lambda: vec![9.0, 6.0, 4.5],
            degenerate_far: true,
        };
        assert_eq!(extrapolate(&v, &far), 1.0);
    }

    #[test]
    fn plan_validation() {
        assert!(ExtrapolationPlan::new(vec![2.0, 3.0], Order::Fifth, DeltaRule::Proportional, 4.0).is_err());
        assert!(ExtrapolationPlan::new(vec![3.0, 2.0, 4.0], Order::Fifth, DeltaRule::Proportional, 4.0).is_err());
        assert!(ExtrapolationPlan::new(vec![2.0, 3.0, 4.0], Order::Seventh, DeltaRule::Proportional, 4.0).is_err());
        assert!(ExtrapolationPlan::fifth_order().fractional(1.5, 1.0 / 64.0).is_err());
    }

    #[test]
    fn fractional_rule_anchors() {
        let plan = ExtrapolationPlan::fifth_order().fractional(0.8, DEFAULT_ANCHOR).unwrap();
        let d = plan.deltas(1.0 / 64.0);
        assert_relative_eq!(d[0].delta(), 2.0 / 64.0, max_relative = 1e-14);
        let d = plan.deltas(1.0 / 128.0);
        assert!(d[0].delta() > 2.0 / 128.0);
    }

    #[test]
    fn determinant_closed_forms() {
        // (3-2)(3-2)(4-2)(2+3+4)/(3 pi)
        assert_relative_eq!(determinant([2.0, 3.0, 4.0], 0.0), 6.0 / PI, max_relative = 1e-12);
        assert_relative_eq!(determinant([1.0, 2.0, 3.0], 0.0), 4.0 / PI, max_relative = 1e-12);
        let xs: Vec<f64> = (0..1000).map(|k| k as f64 * 0.01).collect();
        let rep = determinant_positivity_check([3.0, 4.0, 5.0], &xs).unwrap();
        assert!(rep.min_det > 0.0);
    }

    #[test]
    fn companion_relations_spot_values() {
        let rows = companion_relations_check(&[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(rows.len(), 15);
    }

    #[test]
    fn seventh_order_stays_well_conditioned() {
        let plan = ExtrapolationPlan::seventh_order();
        let h = 1.0;
        for k in 0..=200 {
            let b = k as f64 * 0.05;
            let w = solve_weights(&plan, b, h).unwrap();
            assert!(w.amplification() < 1e8, "b = {b}: {}", w.amplification());
        }
    }

    proptest! {
        #[test]
        fn weights_sum_to_one(r1 in 0.5f64..4.0, g1 in 0.2f64..2.0, g2 in 0.2f64..2.0,
                              x in -30.0f64..30.0, h in 0.005f64..0.1) {
            let plan = ExtrapolationPlan::new(vec![r1, r1 + g1, r1 + g1 + g2], Order::Fifth,
                                              DeltaRule::Proportional, 4.0).unwrap();
            let w = solve_weights(&plan, x * h, h).unwrap();
            let sum: f64 = w.a.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12, "sum = {}", sum);
        }

        #[test]
        fn weights_depend_only_on_rho_and_lambda(x in -6.0f64..6.0, h in 0.005f64..0.1, c in 0.3f64..3.0) {
            let plan = ExtrapolationPlan::fifth_order();
            let w1 = solve_weights(&plan, x * h, h).unwrap();
            let w2 = solve_weights(&plan, x * h * c, h * c).unwrap();
            for (a, b) in w1.a.iter().zip(&w2.a) {
                prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
            }
        }

        #[test]
        fn determinant_positive(r1 in 0.5f64..4.0, g1 in 0.1f64..2.0, g2 in 0.1f64..2.0, x in 0.0f64..10.0) {
            let d = determinant([r1, r1 + g1, r1 + g1 + g2], x);
            prop_assert!(d > 0.0, "D = {}", d);
        }
    }
}
