//! Grid-projection quadrature on implicit surfaces.
//!
//! For each coordinate direction `d`, nodes are the crossings of the surface
//! with grid lines parallel to `e_d` through points with the other two
//! coordinates on the grid `hZ^2`. A node belongs to the family of `d` when
//! the normal makes an angle of at most `theta` with `e_d`. Each family is a
//! graph over a coordinate plane, so `h^2 / |n_d|` is an area element there;
//! a smooth partition of unity `psi_d(n)` blends the three families.

use std::io::Write;

use rayon::prelude::*;

use crate::surface::{outward_normal, ImplicitSurface};
use crate::{Error, Result, Vec3};

pub const DEFAULT_THETA_DEG: f64 = 70.0;
pub const DEFAULT_BUMP_A: f64 = 2.0;

const BISECTIONS: usize = 10;
const MAX_POLISH: usize = 100;
const SAMPLES_PER_CELL: usize = 4;
const ROOT_TOL: f64 = 1e-12;
const MERGE_TOL: f64 = 1e-8;

/// `exp(a r^2 / (r^2 - 1))` for `|r| < 1`, zero otherwise.
pub fn bump(r: f64, a: f64) -> f64 {
    let r2 = r * r;
    if r2 >= 1.0 {
        0.0
    } else {
        (a * r2 / (r2 - 1.0)).exp()
    }
}

/// Partition of unity `psi_i = beta_i / sum_j beta_j` with
/// `beta_i = bump(arccos|n_i| / theta)`.
pub fn partition_weights(n: &Vec3, theta: f64, a: f64) -> Result<[f64; 3]> {
    let cos_theta = theta.cos();
    let mut beta = [0.0; 3];
    for i in 0..3 {
        let c = n[i].abs().min(1.0);
        if c > cos_theta {
            beta[i] = bump(c.acos() / theta, a);
        }
    }
    let sum: f64 = beta.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::AllComponentsBelowCutoff([n[0], n[1], n[2]]));
    }
    Ok(beta.map(|b| b / sum))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureNode {
    pub x: Vec3,
    pub n: Vec3,
    pub w: f64,
    /// Grid line direction, `0..3`.
    pub axis: usize,
    /// Grid indices of the line along the two remaining axes, in increasing axis order.
    pub i: i64,
    pub j: i64,
}

/// Parameters of [`generate_rule_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RuleParams {
    /// Partition-of-unity cutoff angle in radians.
    pub theta: f64,
    pub bump_a: f64,
    /// Angle used for the membership test `|n_d| >= cos(angle)`; normally `theta`.
    pub membership_angle: f64,
}

impl Default for RuleParams {
    fn default() -> Self {
        let theta = DEFAULT_THETA_DEG.to_radians();
        Self {
            theta,
            bump_a: DEFAULT_BUMP_A,
            membership_angle: theta,
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub nodes: Vec<QuadratureNode>,
    pub h: f64,
    pub theta: f64,
    pub bump_a: f64,
}

/// The other two axes of `d`, in increasing order.
pub fn transverse_axes(d: usize) -> (usize, usize) {
    match d {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

pub fn generate_rule<S: ImplicitSurface + ?Sized>(surface: &S, h: f64) -> Result<QuadratureRule> {
    generate_rule_with(surface, h, RuleParams::default())
}

pub fn generate_rule_with<S: ImplicitSurface + ?Sized>(
    surface: &S,
    h: f64,
    params: RuleParams,
) -> Result<QuadratureRule> {
    assert!(h > 0.0, "grid spacing must be positive");
    let bbox = surface.bounding_box().inflate(2.0 * h);
    let mut lines = Vec::new();
    for axis in 0..3 {
        let (p, q) = transverse_axes(axis);
        let (i0, i1) = ((bbox.min[p] / h).ceil() as i64, (bbox.max[p] / h).floor() as i64);
        let (j0, j1) = ((bbox.min[q] / h).ceil() as i64, (bbox.max[q] / h).floor() as i64);
        for i in i0..=i1 {
            for j in j0..=j1 {
                lines.push((axis, i, j));
            }
        }
    }
    let per_line: Vec<Vec<QuadratureNode>> = lines
        .par_iter()
        .map(|&(axis, i, j)| {
            line_nodes(surface, h, &params, axis, i, j, bbox.min[axis], bbox.max[axis])
        })
        .collect::<Result<_>>()?;
    let mut nodes: Vec<QuadratureNode> = per_line.into_iter().flatten().collect();
    nodes.sort_by(|a, b| {
        (a.axis, a.i, a.j)
            .cmp(&(b.axis, b.i, b.j))
            .then(a.x[a.axis].total_cmp(&b.x[b.axis]))
    });
    Ok(QuadratureRule {
        nodes,
        h,
        theta: params.theta,
        bump_a: params.bump_a,
    })
}

#[allow(clippy::too_many_arguments)]
fn line_nodes<S: ImplicitSurface + ?Sized>(
    surface: &S,
    h: f64,
    params: &RuleParams,
    axis: usize,
    i: i64,
    j: i64,
    lo: f64,
    hi: f64,
) -> Result<Vec<QuadratureNode>> {
    let (p, q) = transverse_axes(axis);
    let mut base = Vec3::zeros();
    base[p] = i as f64 * h;
    base[q] = j as f64 * h;
    let at = |t: f64| {
        let mut x = base;
        x[axis] = t;
        x
    };
    let scale = surface.scale();
    let cos_member = params.membership_angle.cos();
    let cos_theta = params.theta.cos();
    let dt = h / SAMPLES_PER_CELL as f64;
    let steps = ((hi - lo) / dt).ceil() as usize;

    let mut roots: Vec<f64> = Vec::new();
    let mut t0 = lo;
    let mut f0 = surface.level(&at(t0));
    for k in 1..=steps {
        let t1 = (lo + k as f64 * dt).min(hi);
        let f1 = surface.level(&at(t1));
        if f0 == 0.0 {
            roots.push(t0);
        } else if f0 * f1 < 0.0 {
            match refine(surface, &at, axis, t0, t1, f0, scale) {
                Some(t) => roots.push(t),
                None => {
                    let t = 0.5 * (t0 + t1);
                    let n = outward_normal(surface, &at(t));
                    if n[axis].abs() >= cos_theta {
                        return Err(Error::RootRefinementFailure {
                            axis,
                            i,
                            j,
                            coord: t,
                        });
                    }
                }
            }
        }
        t0 = t1;
        f0 = f1;
    }
    roots.dedup_by(|b, a| (*b - *a).abs() < MERGE_TOL * h);

    let mut out = Vec::new();
    for t in roots {
        let x = at(t);
        let n = outward_normal(surface, &x);
        let nd = n[axis].abs();
        if nd < cos_member || nd == 0.0 {
            continue;
        }
        let psi = partition_weights(&n, params.theta, params.bump_a)?;
        let w = psi[axis] * h * h / nd;
        if w > 0.0 {
            out.push(QuadratureNode { x, n, w, axis, i, j });
        }
    }
    Ok(out)
}

/// Bisection followed by safeguarded Newton along the line. `None` when the
/// residual `|phi| / |grad phi|` does not reach `1e-12 * scale`.
fn refine<S: ImplicitSurface + ?Sized>(
    surface: &S,
    at: &impl Fn(f64) -> Vec3,
    axis: usize,
    mut lo: f64,
    mut hi: f64,
    f_lo: f64,
    scale: f64,
) -> Option<f64> {
    let lo_negative = f_lo < 0.0;
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let fm = surface.level(&at(mid));
        if fm == 0.0 {
            return Some(mid);
        }
        if (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..MAX_POLISH {
        let x = at(t);
        let f = surface.level(&x);
        let g = surface.gradient(&x);
        let gnorm = g.norm();
        if gnorm > 0.0 && f.abs() / gnorm <= ROOT_TOL * scale {
            // One more step takes the quadratically converging iterate to rounding level.
            let last = t - f / g[axis];
            return Some(if last.is_finite() && last >= lo && last <= hi { last } else { t });
        }
        if f == 0.0 {
            return Some(t);
        }
        if (f < 0.0) == lo_negative {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - f / g[axis];
        t = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * t.abs().max(scale) {
            let x = at(t);
            let f = surface.level(&x);
            let gnorm = surface.gradient(&x).norm();
            return (gnorm > 0.0 && f.abs() / gnorm <= ROOT_TOL * scale).then_some(t);
        }
    }
    None
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum f(x) w` in node order.
    pub fn integrate<F: Fn(&QuadratureNode) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().map(|nd| f(nd) * nd.w).sum()
    }

    pub fn integrate_vec<F: Fn(&QuadratureNode) -> Vec3>(&self, f: F) -> Vec3 {
        self.nodes.iter().fold(Vec3::zeros(), |acc, nd| acc + f(nd) * nd.w)
    }

    pub fn area(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    /// Writes `axis,i,j,x1,x2,x3,n1,n2,n3,w`, axes numbered from 1.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["axis", "i", "j", "x1", "x2", "x3", "n1", "n2", "n3", "w"])?;
        for nd in &self.nodes {
            wr.write_record([
                (nd.axis + 1).to_string(),
                nd.i.to_string(),
                nd.j.to_string(),
                format!("{:e}", nd.x[0]),
                format!("{:e}", nd.x[1]),
                format!("{:e}", nd.x[2]),
                format!("{:e}", nd.n[0]),
                format!("{:e}", nd.n[1]),
                format!("{:e}", nd.n[2]),
                format!("{:e}", nd.w),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{SurfaceKind, UnitSphere};
    use std::f64::consts::PI;

    #[test]
    fn bump_values() {
        assert_eq!(bump(0.0, 2.0), 1.0);
        assert_eq!(bump(1.0, 2.0), 0.0);
        assert_eq!(bump(1.5, 2.0), 0.0);
        assert!((bump(0.5, 2.0) - (-2.0f64 / 3.0).exp()).abs() < 1e-15);
        assert!((bump(0.5, 2.0) - 0.513417).abs() < 1e-6);
        assert!(bump(0.999999, 2.0) < 1e-100);
    }

    #[test]
    fn partition_examples() {
        let th = DEFAULT_THETA_DEG.to_radians();
        assert_eq!(partition_weights(&Vec3::z(), th, 2.0).unwrap(), [0.0, 0.0, 1.0]);
        let d = Vec3::repeat(1.0).normalize();
        for p in partition_weights(&d, th, 2.0).unwrap() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = partition_weights(&Vec3::new(0.6, 0.8, 0.0), th, 2.0).unwrap();
        assert_eq!(p[2], 0.0);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-15);
        assert!(p[1] > p[0]);
        // Narrow cutoff leaves no family for the diagonal.
        assert!(matches!(
            partition_weights(&d, 0.5, 2.0),
            Err(Error::AllComponentsBelowCutoff(_))
        ));
    }

    #[test]
    fn sphere_area_and_nodes() {
        let coarse = generate_rule(&UnitSphere, 0.125).unwrap().area();
        assert!((coarse - 4.0 * PI).abs() / (4.0 * PI) < 1e-3, "area {coarse}");
        let h = 1.0 / 32.0;
        let rule = generate_rule(&UnitSphere, h).unwrap();
        let area = rule.area();
        assert!((area - 4.0 * PI).abs() / (4.0 * PI) < 1e-6, "area {area}");
        for nd in rule.nodes.iter().filter(|nd| nd.axis == 2) {
            let (x, y) = (nd.i as f64 * h, nd.j as f64 * h);
            let z = (1.0 - x * x - y * y).sqrt();
            assert!((nd.x[2].abs() - z).abs() < 1e-12);
            assert!(nd.n[2].abs() >= DEFAULT_THETA_DEG.to_radians().cos());
            assert!(nd.w > 0.0);
        }
        let harmonic = rule.integrate(|nd| 1.75 * (nd.x[0] - 2.0 * nd.x[1]) * (7.5 * nd.x[2] * nd.x[2] - 1.5));
        assert!(harmonic.abs() < 1e-8, "{harmonic}");
    }

    #[test]
    fn nodes_sorted_and_on_surface() {
        for kind in SurfaceKind::ALL {
            let s = kind.build();
            let rule = generate_rule(s.as_ref(), 0.1).unwrap();
            let scale = s.scale();
            for w in rule.nodes.windows(2) {
                let ka = (w[0].axis, w[0].i, w[0].j);
                let kb = (w[1].axis, w[1].i, w[1].j);
                assert!(ka < kb || (ka == kb && w[0].x[w[0].axis] < w[1].x[w[1].axis]));
            }
            for nd in &rule.nodes {
                assert!(s.level(&nd.x).abs() <= 1e-12 * scale * s.gradient(&nd.x).norm().max(1.0));
                let psi = partition_weights(&nd.n, rule.theta, rule.bump_a).unwrap();
                assert!((psi.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn node_count_scales_like_inverse_square() {
        let n1 = generate_rule(&UnitSphere, 1.0 / 16.0).unwrap().len() as f64;
        let n2 = generate_rule(&UnitSphere, 1.0 / 32.0).unwrap().len() as f64;
        let ratio = n2 / n1;
        assert!((3.6..4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn membership_angle_does_not_change_weights() {
        let h = 0.1;
        let a = generate_rule(&UnitSphere, h).unwrap().area();
        let params = RuleParams {
            membership_angle: 89.9f64.to_radians(),
            ..RuleParams::default()
        };
        let b = generate_rule_with(&UnitSphere, h, params).unwrap().area();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn csv_dump_header() {
        let rule = generate_rule(&UnitSphere, 0.25).unwrap();
        let mut buf = Vec::new();
        rule.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("axis,i,j,x1,x2,x3,n1,n2,n3,w\n"));
        assert_eq!(text.lines().count(), rule.len() + 1);
    }
}
