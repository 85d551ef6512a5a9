//! Test problems with known layer potentials.
//!
//! Harmonic cases use the sphere harmonic `f = 1.75 (x1 - 2 x2)(7.5 x3^2 - 1.5)`
//! or a combined single plus double layer built from the jumps of
//! `u_- = (sin y1 + sin y2) exp(y3)` inside and `u_+ = 0` outside. Stokes
//! cases use a translating prolate spheroid, the rotation identity for the
//! stresslet, and the combined layers of an interior Stokeslet.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::evaluators::Density;
use crate::quad1d;
use crate::surface::{ImplicitSurface, Side, SurfaceKind};
use crate::{Error, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseName {
    SphereSingle,
    SphereDouble,
    EllipsoidCombined,
    CassiniCombined,
    MoleculeCombined,
    SpheroidTranslation,
    SphereStresslet,
    SpheroidStresslet,
    SphereStokesCombined,
    EllipsoidStokesCombined,
    MoleculeStokesCombined,
}

impl CaseName {
    pub const ALL: [CaseName; 11] = [
        CaseName::SphereSingle,
        CaseName::SphereDouble,
        CaseName::EllipsoidCombined,
        CaseName::CassiniCombined,
        CaseName::MoleculeCombined,
        CaseName::SpheroidTranslation,
        CaseName::SphereStresslet,
        CaseName::SpheroidStresslet,
        CaseName::SphereStokesCombined,
        CaseName::EllipsoidStokesCombined,
        CaseName::MoleculeStokesCombined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseName::SphereSingle => "sphere-single",
            CaseName::SphereDouble => "sphere-double",
            CaseName::EllipsoidCombined => "ellipsoid-combined",
            CaseName::CassiniCombined => "cassini-combined",
            CaseName::MoleculeCombined => "molecule-combined",
            CaseName::SpheroidTranslation => "spheroid-translation",
            CaseName::SphereStresslet => "sphere-stresslet",
            CaseName::SpheroidStresslet => "spheroid-stresslet",
            CaseName::SphereStokesCombined => "sphere-stokes-combined",
            CaseName::EllipsoidStokesCombined => "ellipsoid-stokes-combined",
            CaseName::MoleculeStokesCombined => "molecule-stokes-combined",
        }
    }

    pub fn surface_kind(self) -> SurfaceKind {
        match self {
            CaseName::SphereSingle
            | CaseName::SphereDouble
            | CaseName::SphereStresslet
            | CaseName::SphereStokesCombined => SurfaceKind::UnitSphere,
            CaseName::EllipsoidCombined => SurfaceKind::RotatedEllipsoid,
            CaseName::EllipsoidStokesCombined => SurfaceKind::Ellipsoid,
            CaseName::CassiniCombined => SurfaceKind::CassiniOval,
            CaseName::MoleculeCombined | CaseName::MoleculeStokesCombined => SurfaceKind::MolecularSurface,
            CaseName::SpheroidTranslation | CaseName::SpheroidStresslet => SurfaceKind::ProlateSpheroid,
        }
    }

    pub fn is_stokes(self) -> bool {
        matches!(
            self,
            CaseName::SpheroidTranslation
                | CaseName::SphereStresslet
                | CaseName::SpheroidStresslet
                | CaseName::SphereStokesCombined
                | CaseName::EllipsoidStokesCombined
                | CaseName::MoleculeStokesCombined
        )
    }

    /// Smoothing multipliers used for the fifth-order runs: `(2,3,4)` for
    /// harmonic cases and `(3,4,5)` for Stokes cases.
    pub fn default_rhos(self) -> Vec<f64> {
        if self.is_stokes() {
            vec![3.0, 4.0, 5.0]
        } else {
            vec![2.0, 3.0, 4.0]
        }
    }

    /// Whether targets are restricted to the first octant by default.
    pub fn default_octant(self) -> bool {
        matches!(
            self,
            CaseName::CassiniCombined | CaseName::MoleculeCombined | CaseName::MoleculeStokesCombined
        )
    }

    pub fn default_side(self) -> SideFilter {
        match self {
            CaseName::SpheroidTranslation => SideFilter::Outside,
            _ => SideFilter::Both,
        }
    }

    /// Approximate `(max, L2)` of the exact values at grid points within `h`
    /// of the surface, as reported with the published runs.
    pub fn sanity_norms(self, octant: bool) -> (f64, f64) {
        match self {
            CaseName::SphereSingle => (1.15, 0.50),
            CaseName::SphereDouble => (4.6, 1.8),
            CaseName::EllipsoidCombined if octant => (1.4, 0.76),
            CaseName::EllipsoidCombined => (1.7, 0.5),
            CaseName::CassiniCombined => (1.45, 0.78),
            CaseName::MoleculeCombined => (1.0, 0.57),
            CaseName::SpheroidTranslation => (1.0, 1.0),
            CaseName::SphereStresslet => (1.0, 0.57),
            CaseName::SpheroidStresslet => (0.5, 0.3),
            CaseName::SphereStokesCombined => (1.0, 0.35),
            CaseName::EllipsoidStokesCombined => (1.0, 0.37),
            CaseName::MoleculeStokesCombined => (0.9, 0.4),
        }
    }
}

impl fmt::Display for CaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = CaseName::ALL.iter().map(|c| c.as_str()).collect();
                Error::Config(format!("unknown case {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SideFilter {
    Inside,
    Outside,
    Both,
}

impl SideFilter {
    /// Whether a target at signed distance `b` passes; points on the surface
    /// pass every filter.
    pub fn admits(self, b: f64) -> bool {
        match self {
            SideFilter::Inside => b <= 0.0,
            SideFilter::Outside => b >= 0.0,
            SideFilter::Both => true,
        }
    }
}

impl FromStr for SideFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inside" => Ok(SideFilter::Inside),
            "outside" => Ok(SideFilter::Outside),
            "both" => Ok(SideFilter::Both),
            _ => Err(Error::Config(format!("side must be inside, outside or both, got {s:?}"))),
        }
    }
}

/// A scalar or vector potential value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Scalar(f64),
    Vector(Vec3),
}

impl Value {
    pub fn magnitude(&self) -> f64 {
        match self {
            Value::Scalar(v) => v.abs(),
            Value::Vector(v) => v.norm(),
        }
    }

    /// `|self - other|`; panics on mixed kinds.
    pub fn distance(&self, other: &Value) -> f64 {
        match (self, other) {
            (Value::Scalar(a), Value::Scalar(b)) => (a - b).abs(),
            (Value::Vector(a), Value::Vector(b)) => (a - b).norm(),
            _ => panic!("mixed scalar and vector values"),
        }
    }
}

/// The layer potentials whose sum is the case's exact solution.
#[derive(Clone, Debug)]
pub enum Layers {
    LaplaceSingle(Density<f64>),
    LaplaceDouble(Density<f64>),
    /// `S[single] + D[double]`.
    LaplaceCombined { single: Density<f64>, double: Density<f64> },
    StokesSingle(Density<Vec3>),
    StokesDouble(Density<Vec3>),
    /// Stokes single layer of `single` plus double layer of `double`.
    StokesCombined { single: Density<Vec3>, double: Density<Vec3> },
}

pub struct TestCase {
    pub name: CaseName,
    pub surface: Box<dyn ImplicitSurface>,
    pub layers: Layers,
    exact: Box<dyn Fn(&Vec3, Side) -> Result<Value> + Send + Sync>,
}

impl TestCase {
    pub fn new(name: CaseName) -> Self {
        build_case(name)
    }

    /// Exact potential at `y`; `side` selects the inside or outside formula,
    /// and their mean on the surface.
    pub fn exact_value(&self, y: &Vec3, side: Side) -> Result<Value> {
        (self.exact)(y, side)
    }
}

fn blend_scalar(side: Side, inside: impl Fn() -> f64, outside: impl Fn() -> f64) -> f64 {
    match side {
        Side::Inside => inside(),
        Side::Outside => outside(),
        Side::On => 0.5 * (inside() + outside()),
    }
}

fn blend_vector(side: Side, inside: impl Fn() -> Vec3, outside: impl Fn() -> Vec3) -> Vec3 {
    match side {
        Side::Inside => inside(),
        Side::Outside => outside(),
        Side::On => (inside() + outside()) * 0.5,
    }
}

// ---- Sphere harmonic ----

/// `1.75 (x1 - 2 x2)(7.5 x3^2 - 1.5)`, a degree-3 spherical harmonic on `|x| = 1`.
pub fn sphere_harmonic(x: &Vec3) -> f64 {
    1.75 * (x[0] - 2.0 * x[1]) * (7.5 * x[2] * x[2] - 1.5)
}

/// `r^3 f(y/r)`, harmonic everywhere.
pub fn sphere_u_minus(y: &Vec3) -> f64 {
    // Homogeneous of degree 3: r^2 (7.5 (y3/r)^2 - 1.5) r = (7.5 y3^2 - 1.5 r^2).
    1.75 * (y[0] - 2.0 * y[1]) * (7.5 * y[2] * y[2] - 1.5 * y.norm_squared())
}

/// `r^-4 f(y/r)`, harmonic away from the origin.
pub fn sphere_u_plus(y: &Vec3) -> f64 {
    let r2 = y.norm_squared();
    sphere_u_minus(y) / (r2 * r2 * r2 * r2.sqrt())
}

// ---- Combined harmonic ----

/// Interior harmonic function `(sin y1 + sin y2) exp(y3)`.
pub fn combined_u_minus(y: &Vec3) -> f64 {
    (y[0].sin() + y[1].sin()) * y[2].exp()
}

pub fn combined_u_minus_gradient(y: &Vec3) -> Vec3 {
    let e = y[2].exp();
    Vec3::new(y[0].cos() * e, y[1].cos() * e, (y[0].sin() + y[1].sin()) * e)
}

/// How the jumps of `u` become layer densities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityAssignment {
    /// From `[dS/dn] = f` and `[D] = -g` with `u_+ = 0`: single layer density
    /// `-du_-/dn`, double layer density `u_-`.
    FromJumps,
    /// Names swapped: single layer density `u_-`, double layer density `-du_-/dn`.
    Swapped,
}

pub fn combined_harmonic_layers(assignment: DensityAssignment) -> Layers {
    let flux = Density::new(|x: &Vec3, n: &Vec3| -combined_u_minus_gradient(x).dot(n));
    let trace = Density::new(|x: &Vec3, _: &Vec3| combined_u_minus(x));
    match assignment {
        DensityAssignment::FromJumps => Layers::LaplaceCombined {
            single: flux,
            double: trace,
        },
        DensityAssignment::Swapped => Layers::LaplaceCombined {
            single: trace,
            double: flux,
        },
    }
}

// ---- Stokes ----

/// Rotation field `q = (0, -x3, x2)`.
pub fn rotation_field(x: &Vec3) -> Vec3 {
    Vec3::new(0.0, -x[2], x[1])
}

pub const STOKESLET_SOURCE: Vec3 = Vec3::new(2.0, 0.0, 0.0);

pub fn stokeslet_strength() -> Vec3 {
    Vec3::new(4.0 * PI, 0.0, 0.0)
}

/// Velocity `(1/8pi)(b/r + yh (yh . b)/r^3)` of the point force at `(2,0,0)`.
pub fn interior_stokeslet_velocity(y: &Vec3) -> Vec3 {
    let b = stokeslet_strength();
    let yh = y - STOKESLET_SOURCE;
    let r = yh.norm();
    (b / r + yh * (yh.dot(&b) / (r * r * r))) / (8.0 * PI)
}

/// Stress `sigma_ik = (-6/8pi) yh_i yh_j yh_k b_j / r^5` of the point force.
pub fn interior_stokeslet_stress(y: &Vec3) -> nalgebra::Matrix3<f64> {
    let b = stokeslet_strength();
    let yh = y - STOKESLET_SOURCE;
    let r = yh.norm();
    yh * yh.transpose() * (-6.0 * yh.dot(&b) / (8.0 * PI * r.powi(5)))
}

/// Traction `sigma(x) n` of the point force.
pub fn stress_traction(x: &Vec3, n: &Vec3) -> Vec3 {
    interior_stokeslet_stress(x) * n
}

/// Exact flow of the prolate spheroid `x1^2 + 4 x2^2 + 4 x3^2 = 1`
/// translating with velocity `(1,0,0)`: a uniform line of Stokeslets of
/// strength `alpha` and potential doublets of strength `beta (c^2 - xi^2)`
/// between the foci `xi = -c..c`. The two constants are fitted to the rigid
/// boundary condition.
#[derive(Clone, Copy, Debug)]
pub struct SpheroidOracle {
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    /// Largest boundary-condition residual at the fitting points.
    pub residual: f64,
}

const SPHEROID_B: f64 = 0.5;

impl SpheroidOracle {
    pub fn fit() -> Self {
        let c = (1.0 - SPHEROID_B * SPHEROID_B).sqrt();
        let ts: Vec<f64> = (1..40).map(|k| k as f64 * PI / 40.0).collect();
        let mut a = DMatrix::zeros(2 * ts.len(), 2);
        let mut rhs = DVector::zeros(2 * ts.len());
        for (k, &t) in ts.iter().enumerate() {
            let x = Vec3::new(t.cos(), SPHEROID_B * t.sin(), 0.0);
            let [a1, a2, b1, b2] = Self::line_integrals(c, &x);
            a[(2 * k, 0)] = a1;
            a[(2 * k, 1)] = b1;
            a[(2 * k + 1, 0)] = a2 * x[1];
            a[(2 * k + 1, 1)] = b2 * x[1];
            rhs[2 * k] = 1.0;
        }
        let sol = a.clone().svd(true, true).solve(&rhs, 1e-14).expect("spheroid fit");
        let residual = (a * &sol - rhs).amax();
        Self {
            alpha: sol[0],
            beta: sol[1],
            c,
            residual,
        }
    }

    /// `[A1, A2, B1, B2]` with velocity `alpha (A1 e1 + A2 xp) + beta (B1 e1 + B2 xp)`,
    /// `xp = (0, x2, x3)`.
    fn line_integrals(c: f64, x: &Vec3) -> [f64; 4] {
        let p2 = x[1] * x[1] + x[2] * x[2];
        let geom = |xi: f64| {
            let r1 = x[0] - xi;
            let r2 = r1 * r1 + p2;
            let r = r2.sqrt();
            (r1, r2, r)
        };
        let tol = 1e-15;
        let pieces = 32;
        let a1 = quad1d::integrate(|xi| { let (r1, r2, r) = geom(xi); 1.0 / r + r1 * r1 / (r2 * r) }, -c, c, pieces, tol);
        let a2 = quad1d::integrate(|xi| { let (r1, r2, r) = geom(xi); r1 / (r2 * r) }, -c, c, pieces, tol);
        let b1 = quad1d::integrate(
            |xi| {
                let (r1, r2, r) = geom(xi);
                (c * c - xi * xi) * (-1.0 / (r2 * r) + 3.0 * r1 * r1 / (r2 * r2 * r))
            },
            -c,
            c,
            pieces,
            tol,
        );
        let b2 = quad1d::integrate(
            |xi| {
                let (r1, r2, r) = geom(xi);
                (c * c - xi * xi) * 3.0 * r1 / (r2 * r2 * r)
            },
            -c,
            c,
            pieces,
            tol,
        );
        [a1, a2, b1, b2]
    }

    /// Fluid velocity outside the spheroid.
    pub fn velocity(&self, y: &Vec3) -> Vec3 {
        let [a1, a2, b1, b2] = Self::line_integrals(self.c, y);
        let xp = Vec3::new(0.0, y[1], y[2]);
        Vec3::x() * (self.alpha * a1 + self.beta * b1) + xp * (self.alpha * a2 + self.beta * b2)
    }

    /// `F0` in the traction `(F0 / sqrt(1 - 3 x1^2 / 4), 0, 0)`. The total force
    /// `int f1 dS = 4 pi b F0` must equal `8 pi` times the total Stokeslet
    /// strength `2 c alpha`.
    pub fn f0(&self) -> f64 {
        4.0 * self.c * self.alpha / SPHEROID_B
    }
}

fn check_away_from_source(y: &Vec3) -> Result<()> {
    if (y - STOKESLET_SOURCE).norm() < 1e-12 {
        Err(Error::OutOfRegion([y[0], y[1], y[2]]))
    } else {
        Ok(())
    }
}

fn build_case(name: CaseName) -> TestCase {
    let surface = name.surface_kind().build();
    let (layers, exact): (Layers, Box<dyn Fn(&Vec3, Side) -> Result<Value> + Send + Sync>) = match name {
        CaseName::SphereSingle => (
            Layers::LaplaceSingle(Density::new(|x: &Vec3, _: &Vec3| sphere_harmonic(x))),
            Box::new(|y: &Vec3, side: Side| {
                if side == Side::Outside && y.norm() == 0.0 {
                    return Err(Error::OutOfRegion([y[0], y[1], y[2]]));
                }
                Ok(Value::Scalar(blend_scalar(
                    side,
                    || -sphere_u_minus(y) / 7.0,
                    || -sphere_u_plus(y) / 7.0,
                )))
            }),
        ),
        CaseName::SphereDouble => (
            Layers::LaplaceDouble(Density::new(|x: &Vec3, _: &Vec3| sphere_harmonic(x))),
            Box::new(|y: &Vec3, side: Side| {
                if side == Side::Outside && y.norm() == 0.0 {
                    return Err(Error::OutOfRegion([y[0], y[1], y[2]]));
                }
                Ok(Value::Scalar(blend_scalar(
                    side,
                    || 4.0 / 7.0 * sphere_u_minus(y),
                    || -3.0 / 7.0 * sphere_u_plus(y),
                )))
            }),
        ),
        CaseName::EllipsoidCombined | CaseName::CassiniCombined | CaseName::MoleculeCombined => (
            combined_harmonic_layers(DensityAssignment::FromJumps),
            Box::new(|y: &Vec3, side: Side| Ok(Value::Scalar(blend_scalar(side, || combined_u_minus(y), || 0.0)))),
        ),
        CaseName::SpheroidTranslation => {
            let oracle = SpheroidOracle::fit();
            let f0 = oracle.f0();
            (
                Layers::StokesSingle(Density::new(move |x: &Vec3, _: &Vec3| {
                    Vec3::new(f0 / (1.0 - 0.75 * x[0] * x[0]).sqrt(), 0.0, 0.0)
                })),
                Box::new(move |y: &Vec3, side: Side| {
                    Ok(Value::Vector(blend_vector(side, Vec3::x, || oracle.velocity(y))))
                }),
            )
        }
        CaseName::SphereStresslet | CaseName::SpheroidStresslet => (
            Layers::StokesDouble(Density::new(|x: &Vec3, _: &Vec3| rotation_field(x))),
            Box::new(|y: &Vec3, side: Side| Ok(Value::Vector(rotation_field(y) * side.chi()))),
        ),
        CaseName::SphereStokesCombined | CaseName::EllipsoidStokesCombined | CaseName::MoleculeStokesCombined => (
            // With zero exterior flow, -[f] = sigma_- n and -[u] = u_-.
            Layers::StokesCombined {
                single: Density::new(|x: &Vec3, n: &Vec3| stress_traction(x, n)),
                double: Density::new(|x: &Vec3, _: &Vec3| interior_stokeslet_velocity(x)),
            },
            Box::new(|y: &Vec3, side: Side| {
                check_away_from_source(y)?;
                Ok(Value::Vector(blend_vector(side, || interior_stokeslet_velocity(y), Vec3::zeros)))
            }),
        ),
    };
    TestCase {
        name,
        surface,
        layers,
        exact,
    }
}

/// Seven-point discrete Laplacian with spacing `e`.
pub fn discrete_laplacian(u: impl Fn(&Vec3) -> f64, y: &Vec3, e: f64) -> f64 {
    let mut acc = -6.0 * u(y);
    for d in 0..3 {
        let mut p = *y;
        p[d] += e;
        acc += u(&p);
        p[d] -= 2.0 * e;
        acc += u(&p);
    }
    acc / (e * e)
}

/// Central difference divergence with spacing `e`.
pub fn discrete_divergence(u: impl Fn(&Vec3) -> Vec3, y: &Vec3, e: f64) -> f64 {
    (0..3)
        .map(|d| {
            let mut p = *y;
            p[d] += e;
            let up = u(&p)[d];
            p[d] -= 2.0 * e;
            (up - u(&p)[d]) / (2.0 * e)
        })
        .sum()
}
