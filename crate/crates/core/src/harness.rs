//! Convergence runs: target selection, error norms, CSV output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evaluators::{Evaluator, PotentialResult};
use crate::extrapolation::{ExtrapolationPlan, Order, DEFAULT_ANCHOR};
use crate::quadrature::generate_rule;
use crate::reference::{CaseName, Layers, SideFilter, TestCase, Value};
use crate::surface::{closest_point, ImplicitSurface, NearTargetFrame};
use crate::{Error, Result, Vec3};

pub const CSV_HEADER: [&str; 11] = [
    "case",
    "h",
    "order",
    "rho_set",
    "delta_rule",
    "n_targets",
    "l2_err",
    "max_err",
    "l2_exact",
    "max_exact",
    "seconds",
];

pub const DUMP_EXTRA: [&str; 5] = ["y1", "y2", "y3", "b", "err"];

/// Which distances from the surface are sampled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Band {
    /// `|b| <= h`.
    Within,
    /// `m h < |b| <= (m+1) h`.
    Shell(u32),
}

impl Band {
    pub fn admits(self, b: f64, h: f64) -> bool {
        let a = b.abs();
        match self {
            Band::Within => a <= h,
            Band::Shell(m) => a > m as f64 * h && a <= (m + 1) as f64 * h,
        }
    }

    pub fn outer(self, h: f64) -> f64 {
        match self {
            Band::Within => h,
            Band::Shell(m) => (m + 1) as f64 * h,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub band: Band,
    pub octant: bool,
    pub side: SideFilter,
}

/// Grid points `(ih, jh, kh)` near the surface that satisfy `selection`,
/// with their closest point frames, in lexicographic `(i, j, k)` order.
pub fn select_targets(surface: &dyn ImplicitSurface, h: f64, selection: &Selection) -> Result<Vec<NearTargetFrame>> {
    let outer = selection.band.outer(h);
    let bbox = surface.bounding_box().inflate(outer + h);
    let lo = |d: usize| {
        let v = (bbox.min[d] / h).ceil() as i64;
        if selection.octant { v.max(0) } else { v }
    };
    let hi = |d: usize| (bbox.max[d] / h).floor() as i64;
    let (i0, i1, j0, j1, k0, k1) = (lo(0), hi(0), lo(1), hi(1), lo(2), hi(2));
    let prefilter = 2.0 * outer + h;
    let slabs: Vec<Vec<NearTargetFrame>> = (i0..=i1)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for j in j0..=j1 {
                for k in k0..=k1 {
                    let y = Vec3::new(i as f64 * h, j as f64 * h, k as f64 * h);
                    let phi = surface.level(&y);
                    let g = surface.gradient(&y).norm();
                    if !(phi.abs() <= prefilter * g) {
                        continue;
                    }
                    let frame = closest_point(surface, &y)?;
                    if selection.band.admits(frame.b, h) && selection.side.admits(frame.b) {
                        out.push(frame);
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let frames: Vec<NearTargetFrame> = slabs.into_iter().flatten().collect();
    if frames.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(frames)
}

/// Values of the case's layer potentials at every frame, in order.
pub fn evaluate_case(ev: &Evaluator, layers: &Layers, frames: &[NearTargetFrame], regularized: bool) -> Result<Vec<Value>> {
    fn v<T>(r: PotentialResult<T>) -> T {
        r.value
    }
    match layers {
        Layers::LaplaceSingle(f) => {
            let p = ev.prepare_scalar(f);
            ev.map_targets(frames, |fr| {
                let s = if regularized { ev.laplace_single(fr, &p)? } else { ev.laplace_single_unregularized(fr, &p) };
                Ok(Value::Scalar(v(s)))
            })
        }
        Layers::LaplaceDouble(g) => {
            let p = ev.prepare_scalar(g);
            ev.map_targets(frames, |fr| {
                let d = if regularized { ev.laplace_double(fr, &p)? } else { ev.laplace_double_unregularized(fr, &p) };
                Ok(Value::Scalar(v(d)))
            })
        }
        Layers::LaplaceCombined { single, double } => {
            let (ps, pd) = (ev.prepare_scalar(single), ev.prepare_scalar(double));
            ev.map_targets(frames, |fr| {
                let (s, d) = if regularized {
                    (ev.laplace_single(fr, &ps)?, ev.laplace_double(fr, &pd)?)
                } else {
                    (ev.laplace_single_unregularized(fr, &ps), ev.laplace_double_unregularized(fr, &pd))
                };
                Ok(Value::Scalar(s.value + d.value))
            })
        }
        Layers::StokesSingle(f) => {
            let p = ev.prepare_vector(f);
            ev.map_targets(frames, |fr| {
                let s = if regularized { ev.stokes_single(fr, &p)? } else { ev.stokes_single_unregularized(fr, &p) };
                Ok(Value::Vector(v(s)))
            })
        }
        Layers::StokesDouble(q) => {
            let p = ev.prepare_vector(q);
            ev.map_targets(frames, |fr| {
                let d = if regularized { ev.stokes_double(fr, &p)? } else { ev.stokes_double_unregularized(fr, &p) };
                Ok(Value::Vector(v(d)))
            })
        }
        Layers::StokesCombined { single, double } => {
            let (ps, pd) = (ev.prepare_vector(single), ev.prepare_vector(double));
            ev.map_targets(frames, |fr| {
                let (s, d) = if regularized {
                    (ev.stokes_single(fr, &ps)?, ev.stokes_double(fr, &pd)?)
                } else {
                    (ev.stokes_single_unregularized(fr, &ps), ev.stokes_double_unregularized(fr, &pd))
                };
                Ok(Value::Vector(s.value + d.value))
            })
        }
    }
}

/// Flat run configuration. Every field has a default; JSON files and
/// command line flags override them in that order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub case: CaseName,
    pub h: Vec<f64>,
    /// Defaults to `(2,3,4)` for harmonic and `(3,4,5)` for Stokes cases,
    /// with 5 appended for order 7.
    pub rho: Option<Vec<f64>>,
    pub order: u32,
    /// `delta ~ h^q` when set.
    pub q: Option<f64>,
    pub anchor: f64,
    /// Shell index `m`; `None` selects `|b| <= h`.
    pub shell: Option<u32>,
    pub octant: Option<bool>,
    pub side: Option<SideFilter>,
    pub baseline: bool,
    pub far_cutoff: f64,
    pub out: Option<PathBuf>,
    pub dump_targets: Option<PathBuf>,
    pub plot_script: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Accepted range of the fitted order; defaults depend on the plan.
    pub order_band: Option<[f64; 2]>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: CaseName::SphereSingle,
            h: vec![1.0 / 32.0, 1.0 / 48.0, 1.0 / 64.0],
            rho: None,
            order: 5,
            q: None,
            anchor: DEFAULT_ANCHOR,
            shell: None,
            octant: None,
            side: None,
            baseline: false,
            far_cutoff: 4.0,
            out: None,
            dump_targets: None,
            plot_script: None,
            threads: None,
            order_band: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.h.is_empty() {
            return Err(Error::Config("h list is empty".into()));
        }
        if self.h.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(Error::Config(format!("h values must be positive: {:?}", self.h)));
        }
        if self.h.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(format!("h values must be strictly decreasing: {:?}", self.h)));
        }
        if self.shell == Some(0) {
            return Err(Error::Config("shell index must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if let Some([lo, hi]) = self.order_band {
            if !(lo < hi) {
                return Err(Error::Config(format!("order band must satisfy lo < hi: [{lo}, {hi}]")));
            }
        }
        self.plan().map(|_| ())
    }

    pub fn plan(&self) -> Result<ExtrapolationPlan> {
        let order = Order::from_number(self.order).map_err(|e| Error::Config(e.to_string()))?;
        let rhos = match &self.rho {
            Some(r) => r.clone(),
            None => {
                let mut r = self.case.default_rhos();
                if order == Order::Seventh {
                    r.push(r[r.len() - 1] + 1.0);
                }
                r
            }
        };
        let rule = match self.q {
            Some(q) => crate::extrapolation::DeltaRule::Fractional { q, anchor: self.anchor },
            None => crate::extrapolation::DeltaRule::Proportional,
        };
        ExtrapolationPlan::new(rhos, order, rule, self.far_cutoff)
    }

    pub fn selection(&self) -> Selection {
        Selection {
            band: self.shell.map_or(Band::Within, Band::Shell),
            octant: self.octant.unwrap_or(self.case.default_octant()),
            side: self.side.unwrap_or(self.case.default_side()),
        }
    }

    /// Expected range of the fitted order: `[4.2, 5.8]` for `delta = rho h`,
    /// and `5q` widened by the same `+-0.7` margin otherwise.
    pub fn order_band(&self) -> [f64; 2] {
        if let Some(b) = self.order_band {
            return b;
        }
        match self.q {
            None => [4.2, 5.8],
            Some(q) => {
                let p = 5.0 * q;
                [p - 0.7, p + 0.7]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub case: CaseName,
    pub h: f64,
    /// `"5"`, `"7"` or `"unregularized"`.
    pub order: String,
    pub rho_set: String,
    pub delta_rule: String,
    pub n_targets: usize,
    pub l2_err: f64,
    pub max_err: f64,
    pub l2_exact: f64,
    pub max_exact: f64,
    pub seconds: f64,
}

impl ErrorRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.case.to_string(),
            self.h.to_string(),
            self.order.clone(),
            self.rho_set.clone(),
            self.delta_rule.clone(),
            self.n_targets.to_string(),
            format!("{:e}", self.l2_err),
            format!("{:e}", self.max_err),
            format!("{:e}", self.l2_exact),
            format!("{:e}", self.max_exact),
            format!("{:.3}", self.seconds),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetError {
    pub y: Vec3,
    pub b: f64,
    pub err: f64,
}

#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
    /// Per-target errors for each row, when requested.
    pub targets: Vec<Vec<TargetError>>,
}

impl ErrorReport {
    /// Rows of one kind (`"5"`, `"7"`, `"unregularized"`), in `h` order.
    pub fn series(&self, order: &str) -> Vec<&ErrorRow> {
        self.rows.iter().filter(|r| r.order == order).collect()
    }

    pub fn fitted_order(&self, order: &str, l2: bool) -> Option<f64> {
        let s = self.series(order);
        let hs: Vec<f64> = s.iter().map(|r| r.h).collect();
        let es: Vec<f64> = s.iter().map(|r| if l2 { r.l2_err } else { r.max_err }).collect();
        fitted_order(&hs, &es)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(CSV_HEADER)?;
        for r in &self.rows {
            wr.write_record(r.record())?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_target_dump<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(CSV_HEADER.iter().chain(DUMP_EXTRA.iter()))?;
        for (row, targets) in self.rows.iter().zip(&self.targets) {
            let base = row.record();
            for t in targets {
                let mut rec = base.clone();
                rec.extend([
                    t.y[0].to_string(),
                    t.y[1].to_string(),
                    t.y[2].to_string(),
                    format!("{:e}", t.b),
                    format!("{:e}", t.err),
                ]);
                wr.write_record(rec)?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Human-readable summary with pairwise and fitted orders.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let mut kinds: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !kinds.contains(&r.order.as_str()) {
                kinds.push(&r.order);
            }
        }
        for kind in kinds {
            let series = self.series(kind);
            s.push_str(&format!("order {kind}:\n"));
            for (k, r) in series.iter().enumerate() {
                let pair = if k > 0 {
                    let p = series[k - 1];
                    format!("  order {:.2}", pairwise_order(p.h, p.l2_err, r.h, r.l2_err))
                } else {
                    String::new()
                };
                s.push_str(&format!(
                    "  1/h = {:>6.1}  N = {:>7}  L2 err {:.3e}  max err {:.3e}  (exact L2 {:.3}, max {:.3}){pair}\n",
                    1.0 / r.h,
                    r.n_targets,
                    r.l2_err,
                    r.max_err,
                    r.l2_exact,
                    r.max_exact
                ));
            }
            if let Some(p) = self.fitted_order(kind, true) {
                s.push_str(&format!("  fitted L2 order {p:.2}\n"));
            }
        }
        s
    }
}

/// `log(e1/e2) / log(h1/h2)`.
pub fn pairwise_order(h1: f64, e1: f64, h2: f64, e2: f64) -> f64 {
    (e1 / e2).ln() / (h1 / h2).ln()
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_order(hs: &[f64], es: &[f64]) -> Option<f64> {
    if hs.len() < 2 || hs.len() != es.len() || es.iter().any(|e| !(*e > 0.0)) {
        return None;
    }
    let n = hs.len() as f64;
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = es.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// `sqrt(sum e^2 / N)` and `max e`.
pub fn norms(values: &[f64]) -> (f64, f64) {
    let n = values.len().max(1) as f64;
    let l2 = (values.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let max = values.iter().copied().fold(0.0, f64::max);
    (l2, max)
}

/// Runs the configured sweep inside a pool of `config.threads` threads.
pub fn run(config: &RunConfig) -> Result<ErrorReport> {
    config.validate()?;
    match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| run_in_pool(config)),
        None => run_in_pool(config),
    }
}

fn run_in_pool(config: &RunConfig) -> Result<ErrorReport> {
    let plan = config.plan()?;
    let case = TestCase::new(config.case);
    let selection = config.selection();
    let keep_targets = config.dump_targets.is_some();
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for &h in &config.h {
        let start = Instant::now();
        let rule = generate_rule(case.surface.as_ref(), h)?;
        let frames = select_targets(case.surface.as_ref(), h, &selection)?;
        let exact: Vec<Value> = frames
            .iter()
            .map(|f| case.exact_value(&f.y, f.side))
            .collect::<Result<_>>()?;
        let exact_mags: Vec<f64> = exact.iter().map(|v| v.magnitude()).collect();
        let (l2_exact, max_exact) = norms(&exact_mags);
        let ev = Evaluator::new(case.surface.as_ref(), &rule, plan.clone());
        let setup = start.elapsed().as_secs_f64();

        let mut kinds = vec![(plan.order().as_number().to_string(), true)];
        if config.baseline {
            kinds.push(("unregularized".to_string(), false));
        }
        for (label, regularized) in kinds {
            let t0 = Instant::now();
            let values = evaluate_case(&ev, &case.layers, &frames, regularized)?;
            let errs: Vec<f64> = values.iter().zip(&exact).map(|(v, e)| v.distance(e)).collect();
            let (l2_err, max_err) = norms(&errs);
            rows.push(ErrorRow {
                case: config.case,
                h,
                order: label,
                rho_set: plan.rho_label(),
                delta_rule: plan.delta_rule().label(),
                n_targets: frames.len(),
                l2_err,
                max_err,
                l2_exact,
                max_exact,
                seconds: setup + t0.elapsed().as_secs_f64(),
            });
            targets.push(if keep_targets {
                frames
                    .iter()
                    .zip(&errs)
                    .map(|(f, &err)| TargetError { y: f.y, b: f.b, err })
                    .collect()
            } else {
                Vec::new()
            });
        }
    }
    // Keep rows grouped by kind, each in h order.
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&i| (rows[i].order == "unregularized", i));
    let rows2 = order.iter().map(|&i| rows[i].clone()).collect();
    let targets2 = order.iter().map(|&i| targets[i].clone()).collect();
    let report = ErrorReport {
        rows: rows2,
        targets: targets2,
    };
    write_outputs(config, &report)?;
    Ok(report)
}

fn write_outputs(config: &RunConfig, report: &ErrorReport) -> Result<()> {
    if let Some(path) = &config.out {
        report.write_csv(BufWriter::new(File::create(path)?))?;
    }
    if let Some(path) = &config.dump_targets {
        report.write_target_dump(BufWriter::new(File::create(path)?))?;
    }
    if let Some(path) = &config.plot_script {
        let csv = config.out.clone().unwrap_or_else(|| PathBuf::from("errors.csv"));
        emit_plot_script(report, &csv, path)?;
    }
    Ok(())
}

/// Writes a matplotlib script plotting `l2_err` and `max_err` against `h`
/// on log-log axes for each `order` in the CSV, with reference slopes 4 and 5.
pub fn emit_plot_script(report: &ErrorReport, csv_path: &Path, path: &Path) -> Result<()> {
    if report.rows.is_empty() {
        return Err(Error::Config("cannot plot an empty report".into()));
    }
    let title = report.rows[0].case.as_str();
    let script = format!(
        r#"import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else {csv:?}
rows = list(csv.DictReader(open(path)))
series = {{}}
for r in rows:
    series.setdefault(r["order"], []).append(r)

fig, ax = plt.subplots()
for label, rs in series.items():
    h = [float(r["h"]) for r in rs]
    ax.loglog(h, [float(r["l2_err"]) for r in rs], "o-", label=f"L2, order {{label}}")
    ax.loglog(h, [float(r["max_err"]) for r in rs], "s--", label=f"max, order {{label}}")

h = sorted(float(r["h"]) for r in rows)
e0 = min(float(r["l2_err"]) for r in rows)
for p in (4, 5):
    ax.loglog(h, [e0 * (x / h[0]) ** p for x in h], ":", color="gray", label=f"slope {{p}}")

ax.set_xlabel("h")
ax.set_ylabel("error")
ax.set_title({title:?})
ax.legend()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
"#,
        csv = csv_path.display().to_string(),
    );
    std::fs::write(path, script)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::UnitSphere;

    #[test]
    fn band_and_shell_selection() {
        let h = 0.25;
        let sel = Selection {
            band: Band::Within,
            octant: false,
            side: SideFilter::Both,
        };
        let frames = select_targets(&UnitSphere, h, &sel).unwrap();
        assert!(!frames.is_empty());
        for f in &frames {
            assert!((f.y.norm() - 1.0).abs() <= h + 1e-12);
        }
        // Every grid point within h is found; exact ties |b| = h go either way.
        let ties = frames.iter().filter(|f| (f.b.abs() - h).abs() < 1e-12).count();
        let mut count = 0;
        let mut tie_count = 0;
        for i in -6..=6 {
            for j in -6..=6 {
                for k in -6..=6 {
                    let y = Vec3::new(i as f64, j as f64, k as f64) * h;
                    let d = (y.norm() - 1.0).abs();
                    if (d - h).abs() < 1e-12 {
                        tie_count += 1;
                    } else if d < h {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(frames.len() - ties, count);
        assert!(ties <= tie_count);

        let h = 0.1;
        let sel = Selection {
            band: Band::Shell(3),
            octant: true,
            side: SideFilter::Outside,
        };
        for f in select_targets(&UnitSphere, h, &sel).unwrap() {
            assert!(f.b > 3.0 * h && f.b <= 4.0 * h);
            assert!(f.y.iter().all(|c| *c >= 0.0));
        }
    }

    #[test]
    fn selection_is_lexicographic() {
        let sel = Selection {
            band: Band::Within,
            octant: false,
            side: SideFilter::Both,
        };
        let frames = select_targets(&UnitSphere, 0.2, &sel).unwrap();
        for w in frames.windows(2) {
            let a = (w[0].y / 0.2).map(|v| v.round() as i64);
            let b = (w[1].y / 0.2).map(|v| v.round() as i64);
            assert!((a[0], a[1], a[2]) < (b[0], b[1], b[2]));
        }
    }

    #[test]
    fn orders_and_norms() {
        let hs = [0.1, 0.05, 0.025];
        let es: Vec<f64> = hs.iter().map(|h: &f64| 3.0 * h.powi(5)).collect();
        assert!((fitted_order(&hs, &es).unwrap() - 5.0).abs() < 1e-12);
        assert!((pairwise_order(0.1, es[0], 0.05, es[1]) - 5.0).abs() < 1e-12);
        let (l2, max) = norms(&[3.0, 4.0]);
        assert!((l2 - (12.5f64).sqrt()).abs() < 1e-15);
        assert_eq!(max, 4.0);
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = RunConfig::from_json(r#"{"case": "sphere-stresslet", "h": [0.1, 0.05]}"#).unwrap();
        assert_eq!(c.plan().unwrap().rhos(), &[3.0, 4.0, 5.0]);
        assert_eq!(c.order_band(), [4.2, 5.8]);
        let c = RunConfig::from_json(r#"{"order": 7, "q": 0.5714285714285714}"#).unwrap();
        assert_eq!(c.plan().unwrap().rhos(), &[2.0, 3.0, 4.0, 5.0]);
        assert!(RunConfig::from_json(r#"{"h": [0.05, 0.1]}"#).unwrap().validate().is_err());
        assert!(RunConfig::from_json(r#"{"shell": 0}"#).unwrap().validate().is_err());
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"order": 6}"#).unwrap().validate().is_err());
    }
}
