//! Implicit surfaces, closest point projection and the built-in test surfaces.
//!
//! A surface is the zero set of a level function `phi`, negative inside and
//! positive outside, so `grad phi / |grad phi|` is the outward normal.

use nalgebra::{Matrix3, Matrix4, Vector4};

use crate::{Error, Result, Vec3};

/// Default iteration budget of [`closest_point`].
pub const MAX_CLOSEST_POINT_ITERATIONS: usize = 100;

/// Relative tolerance (times the surface scale) for closest point residuals.
pub const CLOSEST_POINT_TOL: f64 = 1e-12;

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn inflate(&self, margin: f64) -> Self {
        let m = Vec3::repeat(margin);
        Self::new(self.min - m, self.max + m)
    }

    pub fn diameter(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|d| p[d] >= self.min[d] && p[d] <= self.max[d])
    }
}

/// A closed surface given as the zero set of a smooth level function.
pub trait ImplicitSurface: Send + Sync {
    fn name(&self) -> &str;

    /// Level function, `< 0` inside and `> 0` outside.
    fn level(&self, x: &Vec3) -> f64;

    fn gradient(&self, x: &Vec3) -> Vec3;

    fn hessian(&self, x: &Vec3) -> Matrix3<f64>;

    /// Box containing the surface.
    fn bounding_box(&self) -> Aabb;

    /// Length scale used to nondimensionalize tolerances.
    fn scale(&self) -> f64 {
        self.bounding_box().diameter()
    }
}

/// Which side of the surface a target lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Inside,
    On,
    Outside,
}

impl Side {
    /// The indicator used by the subtracted double layer forms: 1 inside,
    /// 1/2 on the surface, 0 outside.
    pub fn chi(self) -> f64 {
        match self {
            Side::Inside => 1.0,
            Side::On => 0.5,
            Side::Outside => 0.0,
        }
    }
}

/// A target point together with its closest point on the surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NearTargetFrame {
    pub y: Vec3,
    /// Closest point on the surface.
    pub x0: Vec3,
    /// Signed distance, negative inside.
    pub b: f64,
    /// Unit outward normal at `x0`.
    pub n0: Vec3,
    pub side: Side,
}

impl NearTargetFrame {
    pub fn chi(&self) -> f64 {
        self.side.chi()
    }

    /// Frame for a point known to lie on the surface.
    pub fn on_surface<S: ImplicitSurface + ?Sized>(surface: &S, x0: Vec3) -> Self {
        Self {
            y: x0,
            x0,
            b: 0.0,
            n0: outward_normal(surface, &x0),
            side: Side::On,
        }
    }
}

/// Unit outward normal `grad phi / |grad phi|`.
pub fn outward_normal<S: ImplicitSurface + ?Sized>(surface: &S, x: &Vec3) -> Vec3 {
    surface.gradient(x).normalize()
}

pub fn signed_distance<S: ImplicitSurface + ?Sized>(surface: &S, y: &Vec3) -> Result<f64> {
    closest_point(surface, y).map(|f| f.b)
}

pub fn closest_point<S: ImplicitSurface + ?Sized>(surface: &S, y: &Vec3) -> Result<NearTargetFrame> {
    closest_point_with(surface, y, MAX_CLOSEST_POINT_ITERATIONS)
}

/// Closest point on the surface to `y`.
///
/// A few first-order projection steps `x <- x - phi grad phi / |grad phi|^2`
/// bring the iterate onto the surface, then Newton's method on the Lagrange
/// system `x - y + mu grad phi(x) = 0, phi(x) = 0` converges quadratically to
/// the foot point. Targets near the medial axis (e.g. the center of a sphere)
/// are reported as [`Error::NonConvergence`].
pub fn closest_point_with<S: ImplicitSurface + ?Sized>(
    surface: &S,
    y: &Vec3,
    max_iterations: usize,
) -> Result<NearTargetFrame> {
    let scale = surface.scale();
    let tol = CLOSEST_POINT_TOL * scale;
    let fail = |iterations| Error::NonConvergence {
        target: [y.x, y.y, y.z],
        iterations,
    };
    let max_step = 0.25 * scale;

    let mut x = *y;
    let mut iterations = 0;

    // Projection onto the zero set.
    loop {
        if iterations >= max_iterations {
            return Err(fail(iterations));
        }
        iterations += 1;
        let phi = surface.level(&x);
        let g = surface.gradient(&x);
        let g2 = g.norm_squared();
        if !(g2 > 0.0) || !g2.is_finite() {
            return Err(fail(iterations));
        }
        let mut step = g * (phi / g2);
        let len = step.norm();
        if len > max_step {
            step *= max_step / len;
        }
        x -= step;
        if len <= 1e-6 * scale {
            break;
        }
    }

    let g = surface.gradient(&x);
    let mut mu = (y - x).dot(&g) / g.norm_squared();

    let mut converged = false;
    while iterations < max_iterations {
        iterations += 1;
        let phi = surface.level(&x);
        let g = surface.gradient(&x);
        let gn = g.norm();
        let n = g / gn;
        let d = y - x;
        let tangential = d - n * d.dot(&n);
        if (phi / gn).abs() <= tol && tangential.norm() <= tol {
            converged = true;
            break;
        }
        let h = surface.hessian(&x);
        let a = Matrix3::identity() + h * mu;
        let jac = Matrix4::new(
            a[(0, 0)], a[(0, 1)], a[(0, 2)], g.x,
            a[(1, 0)], a[(1, 1)], a[(1, 2)], g.y,
            a[(2, 0)], a[(2, 1)], a[(2, 2)], g.z,
            g.x, g.y, g.z, 0.0,
        );
        let r = -(x - y + g * mu);
        let rhs = Vector4::new(r.x, r.y, r.z, -phi);
        let Some(delta) = jac.lu().solve(&rhs) else {
            return Err(fail(iterations));
        };
        let mut dx = Vec3::new(delta[0], delta[1], delta[2]);
        let mut dmu = delta[3];
        let len = dx.norm();
        if !len.is_finite() {
            return Err(fail(iterations));
        }
        if len > max_step {
            dx *= max_step / len;
            dmu *= max_step / len;
        }
        x += dx;
        mu += dmu;
    }
    if !converged {
        return Err(fail(iterations));
    }

    let n0 = outward_normal(surface, &x);
    let b = (y - x).dot(&n0);

    // Reject saddle/maximum stationary points of the distance.
    let t1 = any_perpendicular(&n0);
    let t2 = n0.cross(&t1);
    let a = Matrix3::identity() + surface.hessian(&x) * mu;
    let (a11, a12, a22) = (t1.dot(&(a * t1)), t1.dot(&(a * t2)), t2.dot(&(a * t2)));
    if a11 <= 0.0 || a11 * a22 - a12 * a12 <= 0.0 {
        return Err(fail(iterations));
    }

    let side = if b.abs() <= tol {
        Side::On
    } else if b < 0.0 {
        Side::Inside
    } else {
        Side::Outside
    };
    let phi_y = surface.level(y);
    if side != Side::On && phi_y != 0.0 && phi_y.signum() != b.signum() {
        return Err(fail(iterations));
    }

    Ok(NearTargetFrame {
        y: *y,
        x0: x,
        b,
        n0,
        side,
    })
}

/// Some unit vector perpendicular to the unit vector `n`.
pub fn any_perpendicular(n: &Vec3) -> Vec3 {
    let e = if n.x.abs() < 0.6 {
        Vec3::x()
    } else if n.y.abs() < 0.6 {
        Vec3::y()
    } else {
        Vec3::z()
    };
    (e - n * n.dot(&e)).normalize()
}

/// `phi = |x|^2 - 1`.
#[derive(Clone, Debug, Default)]
pub struct UnitSphere;

impl ImplicitSurface for UnitSphere {
    fn name(&self) -> &str {
        "unit-sphere"
    }

    fn level(&self, x: &Vec3) -> f64 {
        x.norm_squared() - 1.0
    }

    fn gradient(&self, x: &Vec3) -> Vec3 {
        2.0 * x
    }

    fn hessian(&self, _x: &Vec3) -> Matrix3<f64> {
        Matrix3::identity() * 2.0
    }

    fn bounding_box(&self) -> Aabb {
        Aabb::new(Vec3::repeat(-1.0), Vec3::repeat(1.0))
    }
}

/// Ellipsoid `sum (z_i / a_i)^2 = 1` in rotated coordinates `z = M x`.
#[derive(Clone, Debug)]
pub struct Ellipsoid {
    name: String,
    semi_axes: Vec3,
    rotation: Matrix3<f64>,
    // M^T diag(1/a^2) M
    quad: Matrix3<f64>,
}

impl Ellipsoid {
    pub fn new(name: &str, semi_axes: Vec3, rotation: Matrix3<f64>) -> Self {
        let inv = Matrix3::from_diagonal(&semi_axes.map(|a| 1.0 / (a * a)));
        Self {
            name: name.to_string(),
            semi_axes,
            rotation,
            quad: rotation.transpose() * inv * rotation,
        }
    }

    /// Semi-axes 1, 0.8, 0.6 rotated by
    /// `M = (1/sqrt 6) [sqrt2 0 -2; sqrt2 sqrt3 1; sqrt2 -sqrt3 1]`.
    pub fn rotated() -> Self {
        let (s2, s3) = (2f64.sqrt(), 3f64.sqrt());
        #[rustfmt::skip]
        let m = Matrix3::new(
            s2, 0.0, -2.0,
            s2, s3, 1.0,
            s2, -s3, 1.0,
        ) / 6f64.sqrt();
        Self::new("rotated-ellipsoid", Vec3::new(1.0, 0.8, 0.6), m)
    }

    /// Semi-axes 1, 0.8, 0.6 along the coordinate axes.
    pub fn aligned() -> Self {
        Self::new("ellipsoid", Vec3::new(1.0, 0.8, 0.6), Matrix3::identity())
    }

    /// `x1^2 + 4 x2^2 + 4 x3^2 = 1`.
    pub fn prolate_spheroid() -> Self {
        Self::new("prolate-spheroid", Vec3::new(1.0, 0.5, 0.5), Matrix3::identity())
    }

    pub fn semi_axes(&self) -> Vec3 {
        self.semi_axes
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }
}

impl ImplicitSurface for Ellipsoid {
    fn name(&self) -> &str {
        &self.name
    }

    fn level(&self, x: &Vec3) -> f64 {
        x.dot(&(self.quad * x)) - 1.0
    }

    fn gradient(&self, x: &Vec3) -> Vec3 {
        2.0 * (self.quad * x)
    }

    fn hessian(&self, _x: &Vec3) -> Matrix3<f64> {
        2.0 * self.quad
    }

    fn bounding_box(&self) -> Aabb {
        // x = M^T z, so the extent along x_i is |row i of M^T diag(a)|.
        let half = Vec3::from_fn(|i, _| {
            (0..3)
                .map(|j| (self.rotation[(j, i)] * self.semi_axes[j]).powi(2))
                .sum::<f64>()
                .sqrt()
        });
        Aabb::new(-half, half)
    }
}

/// Cassini oval revolved about the x3 axis:
/// `(|x|^2 + a^2)^2 - 4 a^2 (x1^2 + x2^2) = b^4`.
#[derive(Clone, Debug)]
pub struct CassiniOval {
    pub a: f64,
    pub b: f64,
}

impl CassiniOval {
    pub fn new(a: f64, b: f64) -> Self {
        assert!(b > a, "revolved Cassini oval must be connected (b > a)");
        Self { a, b }
    }

    pub fn standard() -> Self {
        Self::new(0.65, 0.7)
    }
}

impl Default for CassiniOval {
    fn default() -> Self {
        Self::standard()
    }
}

impl ImplicitSurface for CassiniOval {
    fn name(&self) -> &str {
        "cassini-oval"
    }

    fn level(&self, x: &Vec3) -> f64 {
        let a2 = self.a * self.a;
        let s = x.norm_squared() + a2;
        s * s - 4.0 * a2 * (x.x * x.x + x.y * x.y) - self.b.powi(4)
    }

    fn gradient(&self, x: &Vec3) -> Vec3 {
        let a2 = self.a * self.a;
        let s = x.norm_squared() + a2;
        4.0 * s * x - 8.0 * a2 * Vec3::new(x.x, x.y, 0.0)
    }

    fn hessian(&self, x: &Vec3) -> Matrix3<f64> {
        let a2 = self.a * self.a;
        let s = x.norm_squared() + a2;
        Matrix3::identity() * (4.0 * s) + x * x.transpose() * 8.0
            - Matrix3::from_diagonal(&Vec3::new(8.0 * a2, 8.0 * a2, 0.0))
    }

    fn bounding_box(&self) -> Aabb {
        let (a2, b4) = (self.a * self.a, self.b.powi(4));
        let rho = (a2 + self.b * self.b).sqrt();
        // Largest |x3| on the meridian curve.
        let z2 = if 4.0 * a2 * a2 > b4 {
            let rho2 = (4.0 * a2 * a2 - b4) / (4.0 * a2);
            a2 - rho2
        } else {
            self.b * self.b - a2
        };
        let z = z2.sqrt();
        Aabb::new(Vec3::new(-rho, -rho, -z), Vec3::new(rho, rho, z))
    }
}

/// Union of Gaussian atoms, `sum_k exp(-|x - x_k|^2 / r^2) = c`, stored as
/// `phi = c - sum_k exp(...)` so that `phi < 0` inside.
#[derive(Clone, Debug)]
pub struct MolecularSurface {
    pub centers: Vec<Vec3>,
    pub radius: f64,
    pub level_value: f64,
}

impl MolecularSurface {
    pub fn new(centers: Vec<Vec3>, radius: f64, level_value: f64) -> Self {
        Self {
            centers,
            radius,
            level_value,
        }
    }

    /// Four atoms at the vertices of a tetrahedron, `r = 0.5`, `c = 0.6`.
    pub fn four_atoms() -> Self {
        let (s3, s6) = (3f64.sqrt(), 6f64.sqrt());
        let centers = vec![
            Vec3::new(s3 / 3.0, 0.0, -s6 / 12.0),
            Vec3::new(-s3 / 6.0, 0.5, -s6 / 12.0),
            Vec3::new(-s3 / 6.0, -0.5, -s6 / 12.0),
            Vec3::new(0.0, 0.0, s6 / 4.0),
        ];
        Self::new(centers, 0.5, 0.6)
    }
}

impl ImplicitSurface for MolecularSurface {
    fn name(&self) -> &str {
        "molecular-surface"
    }

    fn level(&self, x: &Vec3) -> f64 {
        let r2 = self.radius * self.radius;
        self.level_value
            - self
                .centers
                .iter()
                .map(|c| (-(x - c).norm_squared() / r2).exp())
                .sum::<f64>()
    }

    fn gradient(&self, x: &Vec3) -> Vec3 {
        let r2 = self.radius * self.radius;
        self.centers.iter().fold(Vec3::zeros(), |acc, c| {
            let d = x - c;
            acc + d * (2.0 / r2 * (-d.norm_squared() / r2).exp())
        })
    }

    fn hessian(&self, x: &Vec3) -> Matrix3<f64> {
        let r2 = self.radius * self.radius;
        self.centers.iter().fold(Matrix3::zeros(), |acc, c| {
            let d = x - c;
            let e = (-d.norm_squared() / r2).exp();
            acc + (Matrix3::identity() * (2.0 / r2) - d * d.transpose() * (4.0 / (r2 * r2))) * e
        })
    }

    fn bounding_box(&self) -> Aabb {
        // Beyond this distance from every center the sum is below c.
        let n = self.centers.len() as f64;
        let reach = self.radius * (n / self.level_value).ln().max(0.0).sqrt();
        let mut min = Vec3::repeat(f64::INFINITY);
        let mut max = Vec3::repeat(f64::NEG_INFINITY);
        for c in &self.centers {
            min = min.inf(c);
            max = max.sup(c);
        }
        Aabb::new(min, max).inflate(reach)
    }
}

/// Built-in surfaces addressable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKind {
    UnitSphere,
    RotatedEllipsoid,
    Ellipsoid,
    ProlateSpheroid,
    CassiniOval,
    MolecularSurface,
}

impl SurfaceKind {
    pub fn build(self) -> Box<dyn ImplicitSurface> {
        match self {
            SurfaceKind::UnitSphere => Box::new(UnitSphere),
            SurfaceKind::RotatedEllipsoid => Box::new(Ellipsoid::rotated()),
            SurfaceKind::Ellipsoid => Box::new(Ellipsoid::aligned()),
            SurfaceKind::ProlateSpheroid => Box::new(Ellipsoid::prolate_spheroid()),
            SurfaceKind::CassiniOval => Box::new(CassiniOval::standard()),
            SurfaceKind::MolecularSurface => Box::new(MolecularSurface::four_atoms()),
        }
    }

    pub const ALL: [SurfaceKind; 6] = [
        SurfaceKind::UnitSphere,
        SurfaceKind::RotatedEllipsoid,
        SurfaceKind::Ellipsoid,
        SurfaceKind::ProlateSpheroid,
        SurfaceKind::CassiniOval,
        SurfaceKind::MolecularSurface,
    ];
}

/// Points where the ray `origin + t dir`, `t` in `[0, t_max]`, crosses the
/// surface, found by sampling and bisection.
pub fn ray_crossings<S: ImplicitSurface + ?Sized>(
    surface: &S,
    origin: &Vec3,
    dir: &Vec3,
    t_max: f64,
    samples: usize,
) -> Vec<Vec3> {
    let at = |t: f64| origin + dir * t;
    let mut out = Vec::new();
    let dt = t_max / samples as f64;
    let mut t0 = 0.0;
    let mut f0 = surface.level(&at(t0));
    for k in 1..=samples {
        let t1 = k as f64 * dt;
        let f1 = surface.level(&at(t1));
        if f0 == 0.0 {
            out.push(at(t0));
        } else if f0 * f1 < 0.0 {
            let (mut lo, mut hi, flo) = (t0, t1, f0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = surface.level(&at(mid));
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(at(0.5 * (lo + hi)));
        }
        t0 = t1;
        f0 = f1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn all_surfaces() -> Vec<Box<dyn ImplicitSurface>> {
        SurfaceKind::ALL.iter().map(|k| k.build()).collect()
    }

    #[test]
    fn sphere_outside_target() {
        let f = closest_point(&UnitSphere, &Vec3::new(1.5, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(f.x0, Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-14);
        assert_abs_diff_eq!(f.b, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(f.n0, Vec3::x(), epsilon = 1e-14);
        assert_eq!(f.chi(), 0.0);
    }

    #[test]
    fn sphere_inside_target() {
        let f = closest_point(&UnitSphere, &Vec3::new(0.0, 0.5, 0.0)).unwrap();
        assert_abs_diff_eq!(f.x0, Vec3::new(0.0, 1.0, 0.0), epsilon = 1e-14);
        assert_abs_diff_eq!(f.b, -0.5, epsilon = 1e-14);
        assert_eq!(f.chi(), 1.0);
    }

    #[test]
    fn signed_distance_examples() {
        assert_abs_diff_eq!(
            signed_distance(&UnitSphere, &Vec3::new(0.0, 0.0, 2.0)).unwrap(),
            1.0,
            epsilon = 1e-13
        );
        let spheroid = Ellipsoid::prolate_spheroid();
        assert_abs_diff_eq!(
            signed_distance(&spheroid, &Vec3::new(0.0, 0.0, 0.6)).unwrap(),
            0.1,
            epsilon = 1e-10
        );
    }

    #[test]
    fn sphere_center_is_degenerate() {
        let err = closest_point(&UnitSphere, &Vec3::zeros()).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }

    #[test]
    fn points_on_surface_are_fixed() {
        for s in all_surfaces() {
            let dirs = [
                Vec3::new(1.0, 0.2, 0.1),
                Vec3::new(-0.3, 1.0, 0.4),
                Vec3::new(0.2, -0.1, 1.0),
                Vec3::new(0.5, 0.5, -0.7),
            ];
            for d in dirs {
                let d = d.normalize();
                let hits = ray_crossings(s.as_ref(), &Vec3::new(0.01, 0.02, 0.0), &d, 3.0, 3000);
                assert!(!hits.is_empty(), "{}", s.name());
                for y in hits {
                    let f = closest_point(s.as_ref(), &y).unwrap();
                    assert!(f.b.abs() <= 1e-10, "{} b = {}", s.name(), f.b);
                    assert!((f.x0 - y).norm() <= 1e-10, "{}", s.name());
                    assert_eq!(f.side, Side::On);
                }
            }
        }
    }

    #[test]
    fn normal_examples() {
        assert_abs_diff_eq!(
            outward_normal(&UnitSphere, &Vec3::new(0.0, 0.0, 1.0)),
            Vec3::z(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            outward_normal(&Ellipsoid::prolate_spheroid(), &Vec3::new(1.0, 0.0, 0.0)),
            Vec3::x(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let eps = 1e-5;
        let pts = [
            Vec3::new(0.3, -0.6, 0.5),
            Vec3::new(-0.7, 0.1, 0.2),
            Vec3::new(0.2, 0.35, -0.4),
        ];
        for s in all_surfaces() {
            for p in &pts {
                let g = s.gradient(p);
                let h = s.hessian(p);
                for d in 0..3 {
                    let e = Vec3::ith(d, eps);
                    let fd = (s.level(&(p + e)) - s.level(&(p - e))) / (2.0 * eps);
                    assert!((fd - g[d]).abs() <= 1e-6 * g.norm().max(1.0), "{}", s.name());
                    let col = (s.gradient(&(p + e)) - s.gradient(&(p - e))) / (2.0 * eps);
                    for i in 0..3 {
                        assert!((col[i] - h[(i, d)]).abs() <= 1e-6 * h.norm().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn rotated_ellipsoid_matrix_is_orthogonal() {
        let e = Ellipsoid::rotated();
        let m = e.rotation();
        assert_abs_diff_eq!(m * m.transpose(), Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn bounding_boxes_contain_surfaces() {
        for s in all_surfaces() {
            let bb = s.bounding_box().inflate(1e-9);
            for k in 0..200 {
                let t = k as f64 * 0.7548776662;
                let u = k as f64 * 0.5698402910;
                let d = Vec3::new(t.cos() * (2.0 * u).sin(), t.sin() * (2.0 * u).sin(), (2.0 * u).cos());
                for y in ray_crossings(s.as_ref(), &Vec3::new(0.01, 0.0, 0.02), &d, 3.0, 600) {
                    assert!(bb.contains(&y), "{} {:?}", s.name(), y);
                }
            }
            // Tight: the box is touched by the surface along each axis direction.
            assert!(bb.contains(&s.bounding_box().min.lerp(&s.bounding_box().max, 0.5)));
        }
    }

    #[test]
    fn cassini_box_is_tight() {
        let c = CassiniOval::standard();
        let bb = c.bounding_box();
        // Extreme x3 lies on the surface.
        let a2 = c.a * c.a;
        let rho2 = (4.0 * a2 * a2 - c.b.powi(4)) / (4.0 * a2);
        let p = Vec3::new(rho2.sqrt(), 0.0, bb.max.z);
        assert!(c.level(&p).abs() < 1e-12);
        assert!(c.level(&Vec3::new(bb.max.x, 0.0, 0.0)).abs() < 1e-12);
    }
}
