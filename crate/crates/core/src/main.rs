use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nearsing::harness::{run, RunConfig};
use nearsing::reference::{CaseName, SideFilter};
use nearsing::Error;

/// Convergence study of regularized, extrapolated layer potentials at
/// grid points near an implicit surface.
#[derive(Parser, Debug)]
#[command(name = "nearsing", version)]
struct Cli {
    /// JSON file with a flat run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Test case, e.g. sphere-single, ellipsoid-combined, spheroid-translation.
    #[arg(long)]
    case: Option<CaseName>,
    /// Grid spacings, decreasing; fractions allowed: --h 1/32,1/48,1/64.
    #[arg(long, value_delimiter = ',', value_parser = parse_number)]
    h: Option<Vec<f64>>,
    /// Multiples of the base length used as smoothing widths.
    #[arg(long, value_delimiter = ',', value_parser = parse_number)]
    rho: Option<Vec<f64>>,
    /// Extrapolation order, 5 or 7.
    #[arg(long)]
    order: Option<u32>,
    /// Use delta = rho h^q anchor^(1-q) instead of delta = rho h.
    #[arg(long, value_parser = parse_number)]
    q: Option<f64>,
    #[arg(long, value_parser = parse_number)]
    anchor: Option<f64>,
    /// Targets with |b| <= h (the default).
    #[arg(long, conflicts_with = "shell")]
    band: bool,
    /// Targets with m h < |b| <= (m+1) h.
    #[arg(long)]
    shell: Option<u32>,
    /// Restrict to the first octant (true/false); defaults per case.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    octant: Option<bool>,
    /// inside, outside or both.
    #[arg(long)]
    side: Option<SideFilter>,
    /// Also evaluate the unregularized sums.
    #[arg(long)]
    baseline: bool,
    /// CSV output path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Per-target error CSV.
    #[arg(long)]
    dump_targets: Option<PathBuf>,
    /// Write a plotting script for the CSV.
    #[arg(long)]
    plot_script: Option<PathBuf>,
}

fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            let d: f64 = d.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            Ok(n / d)
        }
        None => s.parse().map_err(|e| format!("{s}: {e}")),
    }
}

fn build_config(cli: Cli) -> Result<RunConfig, Error> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = cli.case {
        c.case = v;
    }
    if let Some(v) = cli.h {
        c.h = v;
    }
    if cli.rho.is_some() {
        c.rho = cli.rho;
    }
    if let Some(v) = cli.order {
        c.order = v;
    }
    if cli.q.is_some() {
        c.q = cli.q;
    }
    if let Some(v) = cli.anchor {
        c.anchor = v;
    }
    if cli.band {
        c.shell = None;
    }
    if cli.shell.is_some() {
        c.shell = cli.shell;
    }
    if cli.octant.is_some() {
        c.octant = cli.octant;
    }
    if cli.side.is_some() {
        c.side = cli.side;
    }
    c.baseline |= cli.baseline;
    if cli.out.is_some() {
        c.out = cli.out;
    }
    if cli.threads.is_some() {
        c.threads = cli.threads;
    }
    if cli.dump_targets.is_some() {
        c.dump_targets = cli.dump_targets;
    }
    if cli.plot_script.is_some() {
        c.plot_script = cli.plot_script;
    }
    c.validate()?;
    Ok(c)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = build_config(cli).and_then(|config| {
        let report = run(&config)?;
        eprint!("{}", report.summary());
        if config.out.is_none() {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            report.write_csv(&mut lock)?;
            lock.flush()?;
        }
        let [lo, hi] = config.order_band();
        if let Some(p) = report.fitted_order(&config.plan()?.order().as_number().to_string(), true) {
            let verdict = if (lo..=hi).contains(&p) { "within" } else { "outside" };
            eprintln!("fitted order {p:.2} is {verdict} [{lo}, {hi}]");
        }
        if let Some(msg) = sanity_check(&config, &report) {
            eprintln!("warning: {msg}");
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Compares the exact-solution norms against the case's expected values.
fn sanity_check(config: &RunConfig, report: &nearsing::harness::ErrorReport) -> Option<String> {
    let (max, l2) = config.case.sanity_norms(config.selection().octant);
    let row = report.rows.first()?;
    let off = |got: f64, want: f64| (got / want - 1.0).abs() > 0.15;
    if off(row.max_exact, max) || off(row.l2_exact, l2) {
        Some(format!(
            "exact solution norms (L2 {:.3}, max {:.3}) differ from the expected ({l2}, {max}) by more than 15%",
            row.l2_exact, row.max_exact
        ))
    } else {
        None
    }
}
