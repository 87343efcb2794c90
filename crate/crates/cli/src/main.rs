//! Command-line front end: problem definition files in, trajectory CSVs,
//! certificate reports, exponential tables, and probe reports out.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tsdyn::certifier::{certify, Side, Theorem};
use tsdyn::config::{FormTag, ProblemConfig};
use tsdyn::field::builtins;
use tsdyn::matrix::{norm_max, Matrix};
use tsdyn::solver::{
    multiplicity_probe, residual_check, solve_explicit, solve_linear_sigma, solve_sigma,
    SolveForm, Trajectory,
};
use tsdyn::timescale::TimeScale;
use tsdyn::tsexp::exp_ode;
use tsdyn::{Error, GridSpec, MatrixCurve, Result, Tolerances};

#[derive(Parser)]
#[command(
    name = "tsdyn",
    version,
    about = "Matrix dynamic equations on time scales: solve, certify, explore"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured IVP and emit a trajectory CSV
    Solve(RunArgs),
    /// Check the hypotheses of a uniqueness theorem and emit a report
    Certify(RunArgs),
    /// Evaluate the matrix exponential e_K(t, a) on a node list (CSV)
    Exp(RunArgs),
    /// Re-solve under seeded perturbations and report trajectory spread
    Fuzz(RunArgs),
    /// Run the built-in worked examples against their acceptance thresholds
    Repro {
        /// example1 | example2 | example3 | all
        #[arg(default_value = "all")]
        example: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Problem definition file (JSON)
    config: PathBuf,
    /// Output file; stdout when omitted. Files are written atomically.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's sample budget
    #[arg(long)]
    samples: Option<usize>,
    /// Override the config's dense grid step
    #[arg(long)]
    dense_step: Option<f64>,
    /// Override the implicit-step residual tolerance
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = load_config(&args)?;
            let traj = solve_from_config(&cfg)?;
            emit(&args.out, &traj.to_csv())?;
            eprintln!(
                "solved {} nodes ({} scattered steps, {} dense steps)",
                traj.nodes.len(),
                traj.stats.scattered_steps,
                traj.stats.dense_steps
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Certify(args) => {
            let cfg = load_config(&args)?;
            let (theorem, bundle) = cfg.build_bundle()?;
            let report = certify(theorem, &bundle)?;
            print!("{}", report.render_table());
            if let Some(out) = &args.out {
                let json = serde_json::to_string_pretty(&report)
                    .map_err(|e| Error::Usage(format!("report serialization failed: {e}")))?;
                write_atomic(out, &(json + "\n"))?;
            }
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Exp(args) => {
            let cfg = load_config(&args)?;
            let csv = exp_from_config(&cfg)?;
            emit(&args.out, &csv)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Fuzz(args) => {
            let cfg = load_config(&args)?;
            let report = fuzz_from_config(&cfg)?;
            println!(
                "trials: {}  max pairwise distance: {:.3e}  threshold: {:.3e}  multiplicity suspected: {}",
                report.trials,
                report.max_pairwise_distance,
                report.threshold,
                report.multiplicity_suspected
            );
            if let Some(out) = &args.out {
                let json = serde_json::to_string_pretty(&report)
                    .map_err(|e| Error::Usage(format!("report serialization failed: {e}")))?;
                write_atomic(out, &(json + "\n"))?;
            }
            Ok(if report.multiplicity_suspected {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Repro { example } => repro(&example),
    }
}

fn load_config(args: &RunArgs) -> Result<ProblemConfig> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        Error::Config(format!("cannot read {}: {e}", args.config.display()))
    })?;
    let mut cfg = ProblemConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(samples) = args.samples {
        cfg.samples = samples;
    }
    if let Some(step) = args.dense_step {
        cfg.grid.dense_step = step;
    }
    if let Some(tol) = args.tol {
        cfg.tolerances.newton_tol = tol;
    }
    Ok(cfg)
}

fn solve_from_config(cfg: &ProblemConfig) -> Result<Trajectory> {
    let ts = cfg.timescale()?;
    let grid = cfg.grid_spec()?;
    let (a, b) = cfg.solve_range(&ts)?;
    let init = cfg.initial_matrix()?;
    let form = cfg.form.unwrap_or(FormTag::Explicit);
    match form {
        FormTag::Explicit => {
            let field = cfg.build_field(&ts)?;
            solve_explicit(&field, &ts, a, b, &init, &grid)
        }
        FormTag::Sigma => {
            let field = cfg.build_field(&ts)?;
            solve_sigma(&field, &ts, a, b, &init, &grid, &cfg.implicit_opts())
        }
        FormTag::Linear => {
            let (v, g) = cfg.build_linear_curves()?;
            solve_linear_sigma(&v, &g, &ts, a, b, &init, &grid)
        }
    }
}

fn fuzz_from_config(cfg: &ProblemConfig) -> Result<tsdyn::solver::ProbeReport> {
    let ts = cfg.timescale()?;
    let grid = cfg.grid_spec()?;
    let (a, b) = cfg.solve_range(&ts)?;
    let init = cfg.initial_matrix()?;
    let trials = cfg.probe.as_ref().map(|p| p.trials).unwrap_or(20);
    let form = match cfg.form.unwrap_or(FormTag::Explicit) {
        FormTag::Explicit => SolveForm::Explicit,
        FormTag::Sigma | FormTag::Linear => SolveForm::Sigma,
    };
    let field = cfg.build_field(&ts)?;
    multiplicity_probe(&field, form, &ts, a, b, &init, &grid, trials, cfg.seed)
}

fn exp_from_config(cfg: &ProblemConfig) -> Result<String> {
    let spec = cfg
        .exp
        .as_ref()
        .ok_or_else(|| Error::Config("the exp subcommand needs an 'exp' section".into()))?;
    let ts = cfg.timescale()?;
    let grid = cfg.grid_spec()?;
    let tol = cfg.tolerances()?;
    let curve = cfg.build_curve(&spec.curve, "exp.curve")?;
    if !ts.contains(spec.from) {
        return Err(Error::Config("exp.from must lie in the time scale".into()));
    }
    let nodes: Vec<f64> = match &spec.nodes {
        Some(ns) => {
            for &t in ns {
                if !ts.contains(t) {
                    return Err(Error::Config(format!(
                        "exp node {t} is not in the time scale"
                    )));
                }
            }
            ns.clone()
        }
        None => tsdyn::solver::solve_nodes(&ts, ts.min(), ts.max(), &grid)?,
    };
    let n = curve.dim();
    let mut out = String::from("t");
    for i in 1..=n {
        for j in 1..=n {
            out.push_str(&format!(",x_{i}{j}"));
        }
    }
    out.push('\n');
    for &t in &nodes {
        let e = exp_ode(&curve, &ts, t, spec.from, &grid, &tol)?;
        out.push_str(&format!("{t:.16e}"));
        for i in 0..n {
            for j in 0..n {
                out.push_str(&format!(",{:.16e}", e[(i, j)]));
            }
        }
        out.push('\n');
    }
    Ok(out)
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(|e| Error::Usage(format!("cannot create temp file: {e}")))?;
    fs::write(tmp.path(), content).map_err(|e| Error::Usage(format!("write failed: {e}")))?;
    tmp.persist(path)
        .map_err(|e| Error::Usage(format!("cannot move output into place: {e}")))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// repro: the worked fixtures against their acceptance thresholds
// ---------------------------------------------------------------------------

struct ReproLine {
    label: &'static str,
    pass: bool,
    detail: String,
}

fn report_lines(lines: &[ReproLine]) -> ExitCode {
    let mut all = true;
    for l in lines {
        println!(
            "{} {:<52} {}",
            if l.pass { "PASS" } else { "FAIL" },
            l.label,
            l.detail
        );
        all &= l.pass;
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn mixed_fixture_timescale() -> TimeScale {
    TimeScale::new(vec![
        (0.0, 0.0),
        (0.25, 0.25),
        (0.5, 0.5),
        (0.75, 0.75),
        (1.0, 2.0),
    ])
    .expect("fixture time scale")
}

fn repro(which: &str) -> Result<ExitCode> {
    let mut lines = Vec::new();
    match which {
        "example1" => repro_example1(&mut lines)?,
        "example2" => repro_example2(&mut lines)?,
        "example3" => repro_example3(&mut lines)?,
        "all" => {
            repro_example1(&mut lines)?;
            repro_example2(&mut lines)?;
            repro_example3(&mut lines)?;
        }
        other => {
            return Err(Error::Usage(format!(
                "unknown repro target '{other}' (expected example1, example2, example3, or all)"
            )))
        }
    }
    Ok(report_lines(&lines))
}

fn repro_example1(lines: &mut Vec<ReproLine>) -> Result<()> {
    use tsdyn::certifier::{DomainSet, ProblemBundle};
    let ts = mixed_fixture_timescale();
    let bundle = |l: f64| ProblemBundle {
        field: Some(builtins::example1()),
        pq_curves: None,
        bound: MatrixCurve::constant(Matrix::from_partial_diagonal(2, 2, &[l, l])),
        ts: ts.clone(),
        domain: DomainSet::symmetric_pair_family(),
        grid: GridSpec::default(),
        base_point: 0.0,
        samples: 500,
        seed: 42,
        tol: Tolerances::default(),
    };
    let report = certify(Theorem::Exis2, &bundle(2.0))?;
    lines.push(ReproLine {
        label: "example1 certificate (exis2, L = diag(2,2))",
        pass: report.passed(),
        detail: format!("verdict {:?}", report.verdict),
    });
    let mutated = certify(Theorem::Exis2, &bundle(1.0))?;
    let witness_ok = mutated
        .conditions
        .iter()
        .find(|c| c.id == "partial_bound")
        .and_then(|c| c.witness.as_ref())
        .map(|w| w.p[0][0] > 0.5)
        .unwrap_or(false);
    lines.push(ReproLine {
        label: "example1 mutation (L = diag(1,1)) rejected",
        pass: !mutated.passed() && witness_ok,
        detail: format!("verdict {:?}, witness p_1 > 0.5: {witness_ok}", mutated.verdict),
    });

    // uniqueness cross-check: the certified problem shows no multiplicity
    let probe = multiplicity_probe(
        &builtins::example1(),
        SolveForm::Explicit,
        &TimeScale::from_points(&[0.0, 0.1, 0.2, 0.3, 0.4, 0.5])?,
        0.0,
        0.5,
        &Matrix::identity(2, 2),
        &GridSpec::default(),
        20,
        42,
    )?;
    lines.push(ReproLine {
        label: "example1 multiplicity probe (20 trials)",
        pass: probe.max_pairwise_distance <= 1e-6,
        detail: format!("max distance {:.3e}", probe.max_pairwise_distance),
    });
    Ok(())
}

fn repro_example2(lines: &mut Vec<ReproLine>) -> Result<()> {
    use tsdyn::certifier::check_inverse_lipschitz;
    let ts = TimeScale::interval(0.5, 2.0)?;
    let grid = GridSpec::default();
    let tol = Tolerances::default();
    let (p, q, b) = builtins::example2_curves(builtins::UProfile::OnePlusT);
    let rec = check_inverse_lipschitz(&p, &q, &b, Side::Left, false, &ts, 50, &grid, &tol)?;
    lines.push(ReproLine {
        label: "example2 inverse-Lipschitz (u = 1 + t) at 50 nodes",
        pass: rec.verdict == tsdyn::certifier::Verdict::Pass,
        detail: format!("worst margin {:?}", rec.margin),
    });
    let (p, q, b) = builtins::example2_curves(builtins::UProfile::T);
    let rec = check_inverse_lipschitz(&p, &q, &b, Side::Left, false, &ts, 50, &grid, &tol)?;
    let witness_ok = rec.witness.as_ref().map(|w| w.t < 1.0).unwrap_or(false);
    lines.push(ReproLine {
        label: "example2 inverse-Lipschitz (u = t) fails below t = 1",
        pass: rec.verdict == tsdyn::certifier::Verdict::Fail && witness_ok,
        detail: format!(
            "verdict {:?}, witness t {:?}",
            rec.verdict,
            rec.witness.as_ref().map(|w| w.t)
        ),
    });
    Ok(())
}

fn repro_example3(lines: &mut Vec<ReproLine>) -> Result<()> {
    let ts = mixed_fixture_timescale();
    let grid = GridSpec::default();
    let kd = [1.0, 2.0];
    let field = builtins::example3(&ts, &kd, 0.0);
    let init = Matrix::identity(2, 2);

    let sigma = solve_sigma(
        &field,
        &ts,
        0.0,
        2.0,
        &init,
        &grid,
        &tsdyn::solver::ImplicitOpts::default(),
    )?;
    let v = builtins::example3_v_curve(&ts, &kd);
    let g = builtins::example3_g_curve(&ts, &kd, 0.0);
    let linear = solve_linear_sigma(&v, &g, &ts, 0.0, 2.0, &init, &grid)?;

    let mut worst_sigma = 0.0_f64;
    let mut worst_linear = 0.0_f64;
    for (t, x) in &sigma.nodes {
        let exact = builtins::example3_closed_form(&ts, &kd, 0.0, *t);
        worst_sigma = worst_sigma.max(norm_max(&(x - exact)));
    }
    for (t, x) in &linear.nodes {
        let exact = builtins::example3_closed_form(&ts, &kd, 0.0, *t);
        worst_linear = worst_linear.max(norm_max(&(x - exact)));
    }
    lines.push(ReproLine {
        label: "example3 sigma solver vs closed form",
        pass: worst_sigma <= 1e-6,
        detail: format!("max |X_numeric - X_closed| = {worst_sigma:.3e}"),
    });
    lines.push(ReproLine {
        label: "example3 linear solver vs closed form",
        pass: worst_linear <= 1e-6,
        detail: format!("max |X_numeric - X_closed| = {worst_linear:.3e}"),
    });

    let residual = residual_check(&sigma, &field, &ts, &grid)?;
    lines.push(ReproLine {
        label: "example3 integral-form residual",
        pass: residual <= 1e-6,
        detail: format!("residual {residual:.3e}"),
    });

    let probe = multiplicity_probe(
        &field,
        SolveForm::Sigma,
        &ts,
        0.0,
        2.0,
        &init,
        &grid,
        20,
        42,
    )?;
    lines.push(ReproLine {
        label: "example3 multiplicity probe (20 trials)",
        pass: probe.max_pairwise_distance <= 1e-6 && !probe.multiplicity_suspected,
        detail: format!("max distance {:.3e}", probe.max_pairwise_distance),
    });
    Ok(())
}
