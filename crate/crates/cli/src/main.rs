//! `ths`: runs the verification suite and inspects individual points.

mod render;

use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ths_core::endo::{build_endo, spectral_analysis, SpectralTol};
use ths_core::suite::{self, SuiteConfig, Tolerances};
use ths_core::symplectic::{self, check_compatibility};
use ths_core::{Error, SchemePoint, SurfaceKind};

#[derive(Parser)]
#[command(name = "ths", version, about = "Transverse Hilbert schemes of points: numerical verification suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check over random sample points and write a JSON report.
    Verify(VerifyArgs),
    /// Spectral data of A, the form and the compatibility residual at one point.
    Inspect(InspectArgs),
    /// Flow a point along the Hamiltonian vector field of Q_j.
    Flow(FlowArgs),
    /// Poisson brackets {Q_i, Q_j} at one point.
    BracketTable(PointArgs),
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "flat")]
    surface: SurfaceKind,
    #[arg(long, default_value_t = 2)]
    degree: usize,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Override a tolerance, `name=value`; repeatable.
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    tol: Vec<String>,
    /// Where to write the JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Run the diagonal counterexample as a demonstration of a detected failure.
    #[arg(long)]
    negative_demo: bool,
    /// Print the list of tolerance names and defaults, then exit.
    #[arg(long)]
    list_tolerances: bool,
}

#[derive(Args)]
struct PointArgs {
    /// Scheme point as JSON.
    point: PathBuf,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    point: PointArgs,
}

#[derive(Args)]
struct FlowArgs {
    #[command(flatten)]
    point: PointArgs,
    /// Index j of the Hamiltonian Q_j.
    #[arg(long, default_value_t = 0)]
    hamiltonian: usize,
    #[arg(long, default_value_t = 0.1)]
    time: f64,
    #[arg(long, default_value_t = 100)]
    steps: usize,
}

/// Failures that map to the usage exit code.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("THS_LOG", "warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Verify(args) => verify(args),
        Command::Inspect(args) => inspect(&args.point).map(|()| 0),
        Command::Flow(args) => flow(&args).map(|()| 0),
        Command::BracketTable(args) => bracket_table(&args).map(|()| 0),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<Usage>().is_some() || matches!(e.downcast_ref::<Error>(), Some(Error::Config(_)));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

fn verify(args: VerifyArgs) -> anyhow::Result<u8> {
    if args.list_tolerances {
        let tol = Tolerances::default();
        for name in tol.names() {
            println!("{name:<24} {:e}", tol.get(name));
        }
        return Ok(0);
    }
    let mut cfg = SuiteConfig::new(args.surface, args.degree);
    cfg.samples = args.samples;
    cfg.seed = args.seed;
    cfg.report_path = args.report;
    cfg.negative_demo = args.negative_demo;
    for spec in &args.tol {
        cfg.tol.apply_override(spec)?;
    }
    cfg.validate()?;
    println!("surface {} degree {} samples {} seed {}", cfg.surface, cfg.degree, cfg.samples, cfg.seed);
    let report = suite::run_verify(&cfg)?;
    for rec in &report.checks {
        println!("{rec}");
        for e in &rec.errors {
            println!("    error: {e}");
        }
    }
    println!("{}", if report.passed() { "all checks passed" } else { "some checks FAILED" });
    if let Some(path) = &cfg.report_path {
        println!("report written to {}", path.display());
    }
    Ok(report.exit_code() as u8)
}

fn read_point(path: &Path) -> anyhow::Result<SchemePoint> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn chart_label(pt: &SchemePoint) -> &'static str {
    match pt {
        SchemePoint::Roots(_) => "roots chart (dz_1, dt_1, ..., dz_d, dt_d)",
        SchemePoint::Coeff(_) => "coefficient chart (dQ_0, ..., dQ_{d-1}, dT_0, ..., dT_{d-1})",
        SchemePoint::Ah(_) => "ah tangent basis",
    }
}

fn inspect(args: &PointArgs) -> anyhow::Result<()> {
    let pt = read_point(&args.point)?;
    let a = build_endo(&pt)?.m;
    let rep = spectral_analysis(&a, &SpectralTol::default())?;
    let w = symplectic::omega_at(&pt)?;
    let compat = check_compatibility(&a, &w);
    let out = if args.json {
        let value = serde_json::json!({
            "kind": pt.kind(),
            "degree": pt.degree(),
            "spectrum": rep,
            "endomorphism": render::rows(&a),
            "omega": render::rows(&w),
            "compatibility": compat,
        });
        serde_json::to_string_pretty(&value)? + "\n"
    } else {
        let mut s = String::new();
        writeln!(s, "{} surface, degree {}, {}", pt.kind(), pt.degree(), chart_label(&pt))?;
        s += &render::spectrum(&rep);
        writeln!(s, "A:")?;
        s += &render::matrix(&a, "  ");
        writeln!(s, "Omega:")?;
        s += &render::matrix(&w, "  ");
        writeln!(s, "compatibility residual: {compat:.3e}")?;
        s
    };
    print!("{out}");
    Ok(())
}

fn flow(args: &FlowArgs) -> anyhow::Result<()> {
    if !(args.time.is_finite() && args.steps > 0) {
        return Err(Usage("flow needs a finite --time and --steps >= 1".into()).into());
    }
    let pt = read_point(&args.point.point)?;
    let end = symplectic::q_flow(&pt, args.hamiltonian, args.time, args.steps)?;
    let before = pt.to_coeff().map(|c| c.q.scheme_coords());
    let after = end.to_coeff().map(|c| c.q.scheme_coords());
    let drift = match (&pt, before, after) {
        (SchemePoint::Ah(a), _, _) => {
            let SchemePoint::Ah(b) = &end else { unreachable!("ah flows stay on the ah model") };
            symplectic::max_distance(&a.q.scheme_coords(), &b.q.scheme_coords())
        }
        (_, Ok(x), Ok(y)) => symplectic::max_distance(&x, &y),
        (_, Err(e), _) | (_, _, Err(e)) => return Err(e.into()),
    };
    let out = if args.point.json {
        serde_json::to_string_pretty(&serde_json::json!({ "point": end, "q_drift": drift }))? + "\n"
    } else {
        format!("{}\nmax |Q(end) - Q(start)|: {drift:.3e}\n", serde_json::to_string(&end)?)
    };
    print!("{out}");
    Ok(())
}

fn bracket_table(args: &PointArgs) -> anyhow::Result<()> {
    let pt = read_point(&args.point)?;
    let table = symplectic::q_bracket_table(&pt)?;
    let worst = table.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let out = if args.json {
        serde_json::to_string_pretty(&serde_json::json!({ "brackets": render::rows(&table), "max_abs": worst }))? + "\n"
    } else {
        format!("{{Q_i, Q_j}}:\n{}max |{{Q_i, Q_j}}|: {worst:.3e}\n", render::matrix(&table, "  "))
    };
    print!("{out}");
    Ok(())
}
