use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use delaystab::boundary::{boundary_curve, characteristic_residual, X_STAR};
use delaystab::closed_forms::ScalarParams;
use delaystab::numerics::{QuadConfig, ScanConfig};
use delaystab::presets::Preset;
use delaystab::region::{map_region, parse_conditions, AxisRange, RegionManifest};
use delaystab::simulator::{simulate_batch, SimParams};
use delaystab::specfile::{Overrides, SpecFile};
use delaystab::stability::{multi_condition, ConditionEntry};
use delaystab::{Decomposition, EquationSpec, Error};

/// Stability analysis and simulation of scalar stochastic delay equations.
#[derive(Parser)]
#[command(name = "delaystab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every decomposition of the stability test on an equation file.
    Check(CheckArgs),
    /// Map condition masks over an (a, b) grid.
    Region(RegionArgs),
    /// Sample the exact deterministic stability boundary.
    Boundary(BoundaryArgs),
    /// Monte Carlo paths of an equation file or preset.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct NumericArgs {
    /// Scan horizon for sup/inf over t.
    #[arg(long)]
    t_max: Option<f64>,
    /// Scan grid points.
    #[arg(long)]
    grid: Option<usize>,
    /// Simpson panels per integral.
    #[arg(long)]
    panels: Option<usize>,
}

impl NumericArgs {
    fn overrides(&self) -> Overrides {
        Overrides { t_max: self.t_max, grid: self.grid, panels: self.panels, ..Default::default() }
    }
}

#[derive(Args)]
struct CheckArgs {
    /// Equation file (TOML).
    #[arg(long)]
    spec: PathBuf,
    /// JSON report path.
    #[arg(long, default_value = "delaystab-check.json")]
    out: PathBuf,
    #[command(flatten)]
    numeric: NumericArgs,
}

#[derive(Args)]
struct RegionArgs {
    /// Delay h.
    #[arg(long, default_value_t = 0.5)]
    h: f64,
    /// Noise level p = σ²/2.
    #[arg(long, default_value_t = 0.2)]
    p: f64,
    /// Noise delay.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Kernel decay rate for the fading conditions.
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Noise decay rate for the fading conditions.
    #[arg(long, default_value_t = 0.0)]
    nu: f64,
    /// a axis as lo:hi:n.
    #[arg(long, default_value = "-4:8:200", allow_hyphen_values = true)]
    a_range: AxisRange,
    /// b axis as lo:hi:n.
    #[arg(long, default_value = "-10:30:200", allow_hyphen_values = true)]
    b_range: AxisRange,
    /// Comma-separated condition ids.
    #[arg(long, default_value = "discrete,distributed,combined")]
    conditions: String,
    /// Output directory.
    #[arg(long, default_value = "region-out")]
    out: PathBuf,
    #[command(flatten)]
    numeric: NumericArgs,
}

#[derive(Args)]
struct BoundaryArgs {
    /// Delay h.
    #[arg(long, default_value_t = 0.5)]
    h: f64,
    /// β range as lo:hi:n; defaults to the arc bounding the stability region.
    #[arg(long)]
    beta_range: Option<AxisRange>,
    /// Output CSV path.
    #[arg(long, default_value = "boundary.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Equation file (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    spec: Option<PathBuf>,
    /// Built-in experiment: fig4, fig5 or fig6.
    #[arg(long)]
    preset: Option<Preset>,
    /// Output directory.
    #[arg(long, default_value = "sim-out")]
    out: PathBuf,
    /// Seed of path 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
}

#[derive(Serialize)]
struct EquationSummary {
    n: usize,
    delays: Vec<f64>,
    a: Vec<String>,
    b: Vec<String>,
    sigma: String,
    tau: f64,
}

impl EquationSummary {
    fn new(spec: &EquationSpec) -> Self {
        EquationSummary {
            n: spec.n(),
            delays: spec.delays().to_vec(),
            a: (0..=spec.n()).map(|k| spec.a(k).expr().to_string()).collect(),
            b: (1..=spec.n()).map(|k| spec.b(k).expr().to_string()).collect(),
            sigma: spec.sigma().expr().to_string(),
            tau: spec.tau(),
        }
    }
}

#[derive(Serialize)]
struct CheckReport<'a> {
    equation: EquationSummary,
    scan: ScanConfig,
    quadrature: QuadConfig,
    verdicts: &'a [ConditionEntry],
    certifying: &'a [Decomposition],
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.6}"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.into()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn cmd_check(args: &CheckArgs) -> Result<ExitCode, Error> {
    let file = SpecFile::load(&args.spec)?;
    let settings = args.numeric.overrides().or(file.settings);
    let scan = settings.scan(file.spec.max_delay())?;
    let quad = settings.quad()?;
    let report = multi_condition(&file.spec, scan, quad);

    println!(
        "{:>3} {:>3} {:>12} {:>12} {:>12} {:>12} {:>12}  verdict",
        "n1", "n2", "inf_S", "sup_R", "sup_F0", "lambda", "epsilon"
    );
    for entry in &report.entries {
        let d = entry.decomposition;
        match (&entry.verdict, &entry.error) {
            (Some(v), _) => println!(
                "{:>3} {:>3} {:>12.6} {:>12.6} {:>12} {:>12} {:>12}  {}",
                d.n1,
                d.n2,
                v.kernel_bounds.inf_s,
                v.kernel_bounds.sup_r,
                fmt_opt(v.exponential_ms.sup_f0),
                fmt_opt(v.exponential_ms.lambda),
                fmt_opt(v.in_probability.epsilon),
                if v.certified() { "certified" } else { "not certified" }
            ),
            (None, Some(e)) => println!("{:>3} {:>3}  error: {e}", d.n1, d.n2),
            (None, None) => unreachable!("entry without verdict or error"),
        }
    }
    println!("{} of {} decompositions certify", report.certifying.len(), report.entries.len());

    write_json(
        &args.out,
        &CheckReport {
            equation: EquationSummary::new(&file.spec),
            scan,
            quadrature: quad,
            verdicts: &report.entries,
            certifying: &report.certifying,
        },
    )?;
    Ok(if report.any_certified() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_region(args: &RegionArgs) -> Result<ExitCode, Error> {
    let conditions = parse_conditions(&args.conditions)?;
    let fixed = ScalarParams { a: 0.0, b: 0.0, c: 0.0, h: args.h, p: args.p, tau: args.tau, mu: args.mu, nu: args.nu };
    let settings = args.numeric.overrides();
    let grid = map_region(
        args.a_range,
        args.b_range,
        fixed,
        &conditions,
        settings.scan(args.h.max(args.tau))?,
        settings.quad()?,
    )?;
    fs::create_dir_all(&args.out)?;
    delaystab::region::export_region(&grid, &args.out.join("region.csv"))?;
    let boundary =
        write_boundary(args.h, AxisRange::new(1e-3 / args.h, X_STAR / args.h, 1000)?, &args.out.join("boundary.csv"))?;
    write_json(&args.out.join("manifest.json"), &RegionManifest::new(&grid, "region.csv", Some("boundary.csv")))?;
    for (cond, mask) in grid.conditions.iter().zip(&grid.masks) {
        println!("{cond}: {} of {} cells", mask.iter().filter(|m| **m).count(), mask.len());
    }
    println!("boundary: {boundary} points");
    Ok(ExitCode::SUCCESS)
}

fn write_boundary(h: f64, beta: AxisRange, path: &Path) -> Result<usize, Error> {
    let points = boundary_curve(h, beta.lo, beta.hi, beta.n)?;
    let mut text = String::from("beta,a,b\n");
    for p in &points {
        let r = characteristic_residual(p.a, p.b, h, Complex64::new(0.0, p.beta))?;
        if r.norm().is_nan() || r.norm() >= 1e-9 {
            return Err(Error::Domain(format!("boundary point at β = {} has residual {:e}", p.beta, r.norm())));
        }
        text.push_str(&format!("{},{},{}\n", p.beta, p.a, p.b));
    }
    fs::write(path, text)?;
    Ok(points.len())
}

fn cmd_boundary(args: &BoundaryArgs) -> Result<ExitCode, Error> {
    let beta = match args.beta_range {
        Some(r) => r,
        None => AxisRange::new(1e-3 / args.h, X_STAR / args.h, 1000)?,
    };
    let n = write_boundary(args.h, beta, &args.out)?;
    println!("wrote {n} boundary points to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<ExitCode, Error> {
    let flags = Overrides { seed: args.seed, dt: args.dt, t_end: args.t_end, paths: args.paths, ..Default::default() };
    let (spec, params) = match (&args.spec, args.preset) {
        (Some(path), _) => {
            let file = SpecFile::load(path)?;
            let params = flags.or(file.settings).sim(SimParams::default())?;
            (file.spec, params)
        }
        (None, Some(preset)) => (preset.spec()?, flags.sim(preset.sim_params())?),
        (None, None) => unreachable!("clap requires --spec or --preset"),
    };
    let batch = simulate_batch(&spec, &params)?;
    batch.export(&args.out)?;
    let c = batch.counts;
    println!(
        "convergent {}/{} ({:.3}), non-convergent {}, diverged {}",
        c.convergent,
        params.n_paths,
        batch.convergent_fraction(),
        c.non_convergent,
        c.diverged
    );
    Ok(ExitCode::SUCCESS)
}

fn init_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var("DELAYSTAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("DELAYSTAB_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build_global()
        .map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = init_threads().and_then(|()| match &cli.command {
        Command::Check(args) => cmd_check(args),
        Command::Region(args) => cmd_region(args),
        Command::Boundary(args) => cmd_boundary(args),
        Command::Simulate(args) => cmd_simulate(args),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
