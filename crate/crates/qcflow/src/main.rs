//! Command-line front end: each subcommand reproduces one experiment from a
//! plain key=value config (or direct flags) and emits snapshots, CSV tables,
//! and JSON reports plus a manifest. Exit codes: 0 success, 1 verdict
//! failure under --strict, 2 config error, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qcflow::analysis;
use qcflow::checks::{check_ellipticity, check_f7, check_geometric, check_set_monotonicity, SamplePlan};
use qcflow::config::{initial_by_name, parse_evolve, parse_grid, parse_obstacle, parse_operator, ConfigMap};
use qcflow::envelopes::{self, EnvelopeParams, SearchMode};
use qcflow::error::Error;
use qcflow::evolve::{evolve, radial_evolve, EvolveConfig, RadialSpeed};
use qcflow::fields::{GridSpec, ScalarField};
use qcflow::operators::{Operator, ValueProfile};
use qcflow::oracles::{
    exact_example_solution, make_subsolution_with_speed, optimal_trajectory, verify_conditions_i,
    verify_subsolution, SubsolutionSpec,
};
use qcflow::report::{convergence_csv, diagnostics_csv, gap_study_csv, ArtifactSink, ConvergenceRow};

#[derive(Parser)]
#[command(name = "qcflow", about = "Nonlocal level-set flow laboratory", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Plain key=value experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Directory for artifacts (created if absent).
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    /// Seed for the sampling checkers; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Turn verdict failures into exit code 1.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve an initial field under a nonlocal operator.
    Evolve(RunArgs),
    /// Quasiconvex or power-convex envelope of a snapshot.
    Envelope {
        #[arg(long)]
        lambda: f64,
        /// Power exponent; omit for the quasiconvex envelope.
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Exhaustive pair search (default restricts 2D to axes+diagonals).
        #[arg(long)]
        exhaustive: bool,
    },
    /// Envelope gap decay study over increasing exponents.
    GapStudy {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32,64")]
        qs: Vec<f64>,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
        /// Sub-box bounds, comma-separated per axis.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        sub_lo: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        sub_hi: Option<Vec<f64>>,
        #[arg(long)]
        strict: bool,
    },
    /// Structural assumption checkers for an operator.
    CheckOp(RunArgs),
    /// Quasiconvexity preservation experiment.
    Preserve(RunArgs),
    /// Discrete comparison experiment for an ordered pair.
    Compare(RunArgs),
    /// Relabeling invariance experiment for geometric operators.
    Relabel(RunArgs),
    /// Closed-form references and barrier verification.
    Oracle {
        #[command(subcommand)]
        what: OracleCommand,
    },
    /// Radial refinement sweep against the closed-form solution.
    Convergence(RunArgs),
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Sample the exact model solution on a grid snapshot.
    Example51 {
        #[arg(long = "R", default_value_t = 1.0)]
        big_r: f64,
        #[arg(long)]
        t: f64,
        /// Grid as lower:upper:counts, comma-separated per axis.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Print the optimal trajectory endpoint.
    Trajectory {
        #[arg(long = "R", default_value_t = 1.0)]
        big_r: f64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        t: f64,
    },
    /// Verify the subsolution inequality for a barrier fixture.
    VerifySub(VerifySubArgs),
    /// Verify the barrier side conditions (domination, floor, coercivity).
    VerifyI(VerifySubArgs),
}

#[derive(Args, Clone)]
struct VerifySubArgs {
    /// Barrier variant: s51, s52, or s53.
    #[arg(long)]
    variant: String,
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    #[arg(long = "R", default_value_t = 1.0)]
    big_r: f64,
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    #[arg(long, default_value_t = 0.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long, default_value_t = 0.0)]
    c: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Override the derived kink speed (sabotage fixture).
    #[arg(long)]
    speed: Option<f64>,
    /// Grid as lower:upper:counts, comma-separated per axis.
    #[arg(long, default_value = "-3,-3:3,3:121,121", allow_hyphen_values = true)]
    grid: String,
    #[arg(long, value_delimiter = ',', default_value = "0.0,0.1,0.3")]
    times: Vec<f64>,
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    #[arg(long)]
    strict: bool,
}

fn parse_grid_flag(text: &str) -> Result<GridSpec, Error> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("grid flag must be lower:upper:counts, got `{text}`")));
    }
    let nums = |s: &str| -> Result<Vec<f64>, Error> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Config(format!("grid flag: {e}"))))
            .collect()
    };
    let lower = nums(parts[0])?;
    let upper = nums(parts[1])?;
    let counts: Vec<usize> = parts[2]
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| Error::Config(format!("grid flag: {e}"))))
        .collect::<Result<_, _>>()?;
    GridSpec::new(lower, upper, counts)
}

/// Named verdicts accumulated by a run; `--strict` maps any failure to exit 1.
struct Verdicts(Vec<(String, bool)>);

impl Verdicts {
    fn new() -> Self {
        Verdicts(Vec::new())
    }
    fn add(&mut self, name: &str, pass: bool) {
        println!("[{}] {}", if pass { "pass" } else { "FAIL" }, name);
        self.0.push((name.to_string(), pass));
    }
    fn all_pass(&self) -> bool {
        self.0.iter().all(|(_, p)| *p)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Evolve(args) => run_evolve(&args),
        Command::Envelope { lambda, q, input, output, exhaustive } => {
            let field = ScalarField::read_snapshot(&input)?;
            let search = if exhaustive || field.grid().dim() == 1 {
                SearchMode::Exhaustive
            } else {
                SearchMode::DirectionRestricted
            };
            let params = EnvelopeParams { lambda, q, search };
            let env = match q {
                None => envelopes::quasiconvex_envelope(&field, &params)?,
                Some(_) => envelopes::power_envelope(&field, &params)?,
            };
            env.write_snapshot(&output)?;
            println!("envelope written to {}", output.display());
            Ok(true)
        }
        Command::GapStudy { input, lambda, qs, output_dir, sub_lo, sub_hi, strict } => {
            let field = ScalarField::read_snapshot(&input)?;
            let g = field.grid();
            let lo = sub_lo.unwrap_or_else(|| g.lower().to_vec());
            let hi = sub_hi.unwrap_or_else(|| g.upper().to_vec());
            let study = envelopes::envelope_gap_study(&field, lambda, &qs, &lo, &hi)?;
            let mut sink = ArtifactSink::new(&output_dir)?;
            sink.write_text("gap_study.csv", &gap_study_csv(&study))?;
            sink.write_json("gap_study.json", &study)?;
            sink.finish(&format!("input={}\nlambda={lambda}\n", input.display()))?;
            let mut v = Verdicts::new();
            v.add("gaps monotone in q", study.monotone_in_q);
            v.add(
                &format!("fitted slope {:.3} in [-1.3, -0.7]", study.fitted_slope),
                (-1.3..=-0.7).contains(&study.fitted_slope),
            );
            v.add(
                &format!("C/q bound (worst violation {:.3e})", study.bound_worst_violation),
                study.bound_worst_violation <= 1e-12,
            );
            Ok(!strict || v.all_pass())
        }
        Command::CheckOp(args) => run_check_op(&args),
        Command::Preserve(args) => run_preserve(&args),
        Command::Compare(args) => run_compare(&args),
        Command::Relabel(args) => run_relabel(&args),
        Command::Oracle { what } => run_oracle(what),
        Command::Convergence(args) => run_convergence(&args),
    }
}

fn run_evolve(args: &RunArgs) -> Result<bool, Error> {
    let mut cfg = ConfigMap::load(&args.config)?;
    let raw = cfg.raw().to_string();
    let grid = parse_grid(&mut cfg)?;
    let k = parse_obstacle(&mut cfg, &grid)?;
    let op = parse_operator(&mut cfg)?;
    let ecfg = parse_evolve(&mut cfg)?;
    let u0 = qcflow::config::parse_initial(&mut cfg, &grid)?;
    let _ = cfg.take_u64_or("seed", 0)?;
    cfg.finish()?;

    let traj = evolve(&u0, &op, &k, &ecfg)?;
    let mut sink = ArtifactSink::new(&args.output_dir)?;
    for (t, field) in &traj.snapshots {
        let name = format!("snap_t{t}.fld");
        let path = sink.path(&name);
        field.write_snapshot(&path)?;
    }
    sink.write_text("diagnostics.csv", &diagnostics_csv(&traj.diagnostics))?;
    if !traj.warnings.is_empty() {
        sink.write_json("warnings.json", &traj.warnings)?;
    }
    sink.finish(&raw)?;
    println!(
        "evolved to t={} in {} steps; {} snapshots",
        ecfg.t_end,
        traj.diagnostics.len(),
        traj.snapshots.len()
    );
    Ok(true)
}

#[derive(Serialize)]
struct CheckOpSummary {
    operator: String,
    ellipticity_pass: bool,
    set_monotonicity_pass: bool,
    geometric_pass: bool,
    f7: Vec<(f64, bool)>,
}

fn run_check_op(args: &RunArgs) -> Result<bool, Error> {
    let mut cfg = ConfigMap::load(&args.config)?;
    let raw = cfg.raw().to_string();
    let op = parse_operator(&mut cfg)?;
    let samples = cfg.take_u64_or("check.samples", 10_000)? as usize;
    let seed = args.seed.unwrap_or(cfg.take_u64_or("seed", 0)?);
    let r_range = cfg.take_list_f64("check.r_range")?.unwrap_or_else(|| vec![1.0, 10.0]);
    let p_cap = cfg.take_f64_or("check.p_cap", 10.0)?;
    let betas = cfg.take_list_f64("check.betas")?.unwrap_or_else(|| vec![0.9, 0.99, 0.999]);
    cfg.finish()?;

    let plan = SamplePlan::new(seed, samples, 2)
        .with_r_range((r_range[0], r_range[1]))
        .with_p_cap(p_cap);
    let mut sink = ArtifactSink::new(&args.output_dir)?;
    let e = check_ellipticity(&op, &plan);
    let m = check_set_monotonicity(&op, &plan);
    let g = check_geometric(&op, &plan);
    sink.write_json("check_f1.json", &e)?;
    sink.write_json("check_f4.json", &m)?;
    sink.write_json("check_geometric.json", &g)?;
    let mut f7_rows = Vec::new();
    for &beta in &betas {
        let rep = check_f7(&op, beta, &plan);
        sink.write_json(&format!("check_f7_beta{beta}.json"), &rep)?;
        f7_rows.push((beta, rep.pass()));
    }
    let summary = CheckOpSummary {
        operator: op.name().to_string(),
        ellipticity_pass: e.pass,
        set_monotonicity_pass: m.pass,
        geometric_pass: g.pass,
        f7: f7_rows.clone(),
    };
    sink.write_json("check_summary.json", &summary)?;
    sink.finish(&raw)?;

    let mut v = Verdicts::new();
    v.add("F1 ellipticity", e.pass);
    v.add("F4 set monotonicity", m.pass);
    for (beta, pass) in &f7_rows {
        println!("[info] F7 at beta={beta}: {}", if *pass { "pass" } else { "fail" });
    }
    println!("[info] geometricity: {}", if g.pass { "pass" } else { "fail" });
    Ok(!args.strict || v.all_pass())
}

fn run_preserve(args: &RunArgs) -> Result<bool, Error> {
    let mut cfg = ConfigMap::load(&args.config)?;
    let raw = cfg.raw().to_string();
    let grid = parse_grid(&mut cfg)?;
    let k = parse_obstacle(&mut cfg, &grid)?;
    let op = parse_operator(&mut cfg)?;
    let ecfg = parse_evolve(&mut cfg)?;
    let u0 = qcflow::config::parse_initial(&mut cfg, &grid)?;
    let qc_factor = cfg.take_f64_or("analysis.qc_tol_factor", 4.0)?;
    let convex_tol = cfg.take_f64_or("analysis.convex_tol", 10.0)?;
    cfg.finish()?;

    let h = grid.min_spacing();
    let (traj, rows) =
        analysis::preservation_experiment(&u0, &op, &k, &ecfg, qc_factor * h, convex_tol)?;
    let mut sink = ArtifactSink::new(&args.output_dir)?;
    sink.write_text("diagnostics.csv", &diagnostics_csv(&traj.diagnostics))?;
    let mut v = Verdicts::new();
    for row in &rows {
        sink.write_json(&format!("quasiconvex_t{}.json", row.time), &row.quasiconvex)?;
        sink.write_json(&format!("convex_sections_t{}.json", row.time), &row.convex_sections)?;
        v.add(
            &format!("quasiconvex at t={} (margin {:.3e})", row.time, row.quasiconvex.worst_margin),
            row.quasiconvex.passed(),
        );
        println!(
            "[info] convex sections at t={}: {}",
            row.time,
            if row.convex_sections.passed() { "convex" } else { "non-convex" }
        );
    }
    sink.finish(&raw)?;
    Ok(!args.strict || v.all_pass())
}

fn run_compare(args: &RunArgs) -> Result<bool, Error> {
    let mut cfg = ConfigMap::load(&args.config)?;
    let raw = cfg.raw().to_string();
    let grid = parse_grid(&mut cfg)?;
    let k = parse_obstacle(&mut cfg, &grid)?;
    let op = parse_operator(&mut cfg)?;
    let ecfg = parse_evolve(&mut cfg)?;
    let u0 = qcflow::config::parse_initial(&mut cfg, &grid)?;
    let v0 = match cfg.take("compare.v0_profile") {
        Some(name) => initial_by_name(&name, &grid)?,
        None => {
            let shift = cfg.take_f64_or("compare.v0_shift", 0.5)?;
            let mut v = u0.clone();
            for x in v.values_mut() {
                *x += shift;
            }
            v
        }
    };
    cfg.finish()?;

    let res = analysis::comparison_experiment(&u0, &v0, &op, &k, &ecfg)?;
    let mut sink = ArtifactSink::new(&args.output_dir)?;
    sink.write_json("comparison.json", &res)?;
    sink.finish(&raw)?;
    let mut v = Verdicts::new();
    v.add(
        &format!("ordering preserved over {} steps (violation {:.3e})", res.steps, res.max_violation),
        res.max_violation <= 1e-12,
    );
    Ok(!args.strict || v.all_pass())
}

fn run_relabel(args: &RunArgs) -> Result<bool, Error> {
    let mut cfg = ConfigMap::load(&args.config)?;
    let raw = cfg.raw().to_string();
    let grid = parse_grid(&mut cfg)?;
    let k = parse_obstacle(&mut cfg, &grid)?;
    let op = parse_operator(&mut cfg)?;
    let ecfg = parse_evolve(&mut cfg)?;
    let u0 = qcflow::config::parse_initial(&mut cfg, &grid)?;
    let map_name = cfg.take_or("relabel.map", "square");
    let levels = cfg
        .take_list_f64("relabel.levels")?
        .ok_or_else(|| Error::Config("missing relabel.levels".into()))?;
    cfg.finish()?;

    let map: Box<dyn Fn(f64) -> f64> = match map_name.as_str() {
        "square" => Box::new(|s: f64| s * s),
        "sqrt" => Box::new(|s: f64| s.sqrt()),
        "identity" => Box::new(|s| s),
        other => return Err(Error::Config(format!("unknown relabel.map `{other}`"))),
    };
    let res = analysis::relabel_experiment(&u0, map.as_ref(), &op, &k, &ecfg, &levels)?;
    let mut sink = ArtifactSink::new(&args.output_dir)?;
    sink.write_json("relabel.json", &res)?;
    sink.finish(&raw)?;
    let h = grid.min_spacing();
    let mut v = Verdicts::new();
    v.add(
        &format!("level sets track within 2h (drift {:.4}, 2h = {:.4})", res.max_drift, 2.0 * h),
        res.max_drift <= 2.0 * h + 1e-12,
    );
    Ok(!args.strict || v.all_pass())
}

fn run_oracle(what: OracleCommand) -> Result<bool, Error> {
    match what {
        OracleCommand::Example51 { big_r, t, grid, output } => {
            let g = parse_grid_flag(&grid)?;
            let f = ScalarField::from_fn(g, |x| exact_example_solution(x, t, big_r))?;
            f.write_snapshot(&output)?;
            println!("exact solution at t={t} written to {}", output.display());
            Ok(true)
        }
        OracleCommand::Trajectory { big_r, r, t } => {
            println!("{}", optimal_trajectory(r, t, big_r));
            Ok(true)
        }
        OracleCommand::VerifySub(a) => run_verify_sub(a, false),
        OracleCommand::VerifyI(a) => run_verify_sub(a, true),
    }
}

fn build_subsolution(a: &VerifySubArgs) -> Result<(qcflow::oracles::Subsolution, Operator), Error> {
    let m_k = std::f64::consts::PI * a.big_r * a.big_r;
    let (spec, op) = match a.variant.as_str() {
        "s51" => (
            SubsolutionSpec::S51 { sigma_shift: a.c0, a_drift: a.a, b: a.b, m_k },
            Operator::aniso_flow(a.a, a.b, a.c, qcflow::operators::SurfaceEnergy::Isotropic)?,
        ),
        "s52" => (
            SubsolutionSpec::S52 {
                sigma_shift: a.c0,
                v: ValueProfile::ArctanShifted { shift: 0.0 },
                m_k,
            },
            Operator::u_dep_flow(ValueProfile::ArctanShifted { shift: 0.0 })?,
        ),
        "s53" => (
            SubsolutionSpec::S53 {
                k: a.k,
                big_r: a.big_r,
                c0: a.c0,
                a_coef: if a.a > 0.0 { a.a } else { 1.0 },
                alpha: a.alpha,
            },
            Operator::viscous_hj(if a.a > 0.0 { a.a } else { 1.0 }, a.alpha)?,
        ),
        other => return Err(Error::Config(format!("unknown barrier variant `{other}`"))),
    };
    let sub = make_subsolution_with_speed(spec, a.speed)?;
    Ok((sub, op))
}

fn run_verify_sub(a: VerifySubArgs, conditions_only: bool) -> Result<bool, Error> {
    let grid = parse_grid_flag(&a.grid)?;
    let (sub, op) = build_subsolution(&a)?;
    let mut sink = ArtifactSink::new(&a.output_dir)?;
    let mut v = Verdicts::new();
    if conditions_only {
        let u0 = ScalarField::from_fn(grid.clone(), |x| qcflow::matrix::norm(x) + a.c0)?;
        let t_max = a.times.iter().cloned().fold(0.0f64, f64::max);
        let boxes = [2.0, 4.0, 8.0, 16.0];
        let rep = verify_conditions_i(&sub, &u0, a.c0, &boxes, t_max.max(0.5));
        sink.write_json("conditions_i.json", &rep)?;
        v.add("barrier below initial data", rep.below_initial);
        v.add("barrier above the floor", rep.positive);
        v.add("barrier coercive", rep.coercive);
    } else {
        let k = qcflow::nonlocal::ObstacleSet::ball(vec![0.0; grid.dim()], a.big_r, &grid)?;
        let tol = 1e-6 + 10.0 * grid.min_spacing();
        let rep = verify_subsolution(&sub, &op, &k, &grid, &a.times, tol)?;
        sink.write_json("subsolution.json", &rep)?;
        v.add(
            &format!(
                "subsolution inequality (worst margin {:.3e}, tol {:.3e})",
                rep.report.worst_margin, tol
            ),
            rep.report.passed(),
        );
    }
    sink.finish(&format!("variant={}\n", a.variant))?;
    Ok(!a.strict || v.all_pass())
}

fn run_convergence(args: &RunArgs) -> Result<bool, Error> {
    let mut cfg = ConfigMap::load(&args.config)?;
    let raw = cfg.raw().to_string();
    let ns = cfg.take_list_usize("convergence.ns")?.unwrap_or_else(|| vec![1001, 2001, 4001]);
    let t_end = cfg.take_f64_or("convergence.t", 0.5)?;
    let r_max = cfg.take_f64_or("convergence.r_max", 8.0)?;
    let big_r = cfg.take_f64_or("oracle.R", 1.0)?;
    let min_order = cfg.take_f64_or("convergence.min_order", 0.8)?;
    cfg.finish()?;

    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &n in &ns {
        let g = GridSpec::new_1d(0.0, r_max, n)?;
        let phi0 = ScalarField::from_fn(g.clone(), |x| x[0] + 1.0)?;
        let ecfg = EvolveConfig::new(t_end);
        let traj = radial_evolve(&phi0, RadialSpeed::Frozen { big_r }, &ecfg)?;
        let f = traj.final_field();
        let mut err = 0.0f64;
        for i in 0..n {
            let r = g.coord(0, i);
            err = err
                .max((f.values()[i] - qcflow::oracles::exact_example_profile(r, t_end, big_r)).abs());
        }
        let order = rows
            .last()
            .map(|prev: &ConvergenceRow| (prev.linf_err / err).ln() / (prev.h / g.spacing(0)).ln());
        rows.push(ConvergenceRow { n, h: g.spacing(0), linf_err: err, order });
    }
    let mut sink = ArtifactSink::new(&args.output_dir)?;
    let csv = convergence_csv(&rows);
    sink.write_text("convergence.csv", &csv)?;
    sink.finish(&raw)?;
    print!("{csv}");
    let mut v = Verdicts::new();
    for r in &rows {
        if let Some(o) = r.order {
            v.add(&format!("order {:.2} >= {min_order} at N={}", o, r.n), o >= min_order);
        }
    }
    Ok(!args.strict || v.all_pass())
}
