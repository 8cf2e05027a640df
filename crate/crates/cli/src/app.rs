//! Problem assembly, solver invocation, and artifact emission behind the
//! subcommands.
//!
//! Every run leaves the same trio on disk under a per-run stem: the solution
//! (vector, or matrix plus edge list for the covariance estimator), per-sweep
//! diagnostics as CSV, and a `key=value` certification record. All numbers
//! are printed with 17 significant digits so files round-trip to the exact
//! bits and identical invocations produce identical bytes.

use std::fmt;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};

use ccm_core::concord::{concord_solve, ConcordPath, CovarianceProblem, DirectEngine};
use ccm_core::error::CcmError;
use ccm_core::io::{
    format_matrix, format_vector, parse_index_list, parse_matrix_csv, parse_matrix_market,
    parse_vector,
};
use ccm_core::logistic::{logistic_problem, LogisticDataset};
use ccm_core::model::{DesignMatrix, F2Problem, PenaltySet};
use ccm_core::optimality::{certify, Certification, CertifyOptions};
use ccm_core::solver::{solve, CoordinateSweep, SolveOutcome, SolverConfig, UpdateOrder};

use crate::{Command, CommonArgs, ConcordArgs, F2Args, InputKind, LogisticArgs, MatrixFormat, TraceLevel};

pub enum Outcome {
    AllCertified,
    SomeUncertified,
}

/// Anything wrong with the inputs rather than the optimization: missing or
/// malformed files, bad dimensions, invalid configuration.
#[derive(Debug)]
pub struct InputError(String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

type AppResult<T> = Result<T, InputError>;

pub fn run(command: &Command) -> AppResult<Outcome> {
    match command {
        Command::Concord(args) => run_concord(args),
        Command::Logistic(args) => run_logistic(args),
        Command::F2Generic(args) => run_f2(args),
    }
}

// ---------------------------------------------------------------- plumbing

fn read_file(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn write_file(path: &str, content: &str) -> AppResult<()> {
    fs::write(path, content).map_err(|e| InputError(format!("cannot write {path}: {e}")))
}

fn bad_input<T>(context: &Path, err: CcmError<f64>) -> AppResult<T> {
    Err(InputError(format!("{}: {err}", context.display())))
}

fn parse_matrix(text: &str, format: MatrixFormat, path: &Path) -> AppResult<Array2<f64>> {
    let parsed = match format {
        MatrixFormat::Csv => parse_matrix_csv::<f64>(text),
        MatrixFormat::MatrixMarket => parse_matrix_market::<f64>(text),
    };
    parsed.or_else(|e| bad_input(path, e))
}

/// Resolves the order flags once the coordinate count is known.
fn resolve_order(common: &CommonArgs, n: usize) -> AppResult<UpdateOrder> {
    if let Some(seed) = common.order_seed {
        return Ok(UpdateOrder::seeded(n, seed));
    }
    if common.order == "natural" {
        return Ok(UpdateOrder::Natural);
    }
    let path = Path::new(&common.order);
    let text = read_file(path)?;
    let perm = parse_index_list::<f64>(&text, n).or_else(|e| bad_input(path, e))?;
    Ok(UpdateOrder::Permutation(perm))
}

/// The order for the `--compare-orders` counterpart run: a seeded shuffle
/// distinct from the primary order, derived deterministically from the flags.
fn alternate_order(common: &CommonArgs, n: usize) -> UpdateOrder {
    UpdateOrder::seeded(n, common.order_seed.map_or(1, |s| s.wrapping_add(1)))
}

fn build_config(common: &CommonArgs, n: usize) -> AppResult<SolverConfig<f64>> {
    let mut cfg = SolverConfig::default();
    cfg.epsilon = common.epsilon;
    cfg.max_sweeps = common.max_sweeps;
    cfg.kkt_stop = common.kkt_stop;
    cfg.record_coordinate_trace = common.trace == TraceLevel::Coordinate;
    cfg.order = resolve_order(common, n)?;
    Ok(cfg)
}

struct Solved {
    outcome: SolveOutcome<f64>,
    cert: Certification<f64>,
}

impl Solved {
    fn certified(&self) -> bool {
        self.outcome.converged && self.cert.all_pass()
    }
}

/// Solves and certifies; budget exhaustion is a reportable result (the
/// partial run is kept), anything else is an input problem.
fn solve_and_certify<P: CoordinateSweep<f64>>(
    problem: &P,
    x0: ArrayView1<f64>,
    config: &SolverConfig<f64>,
) -> AppResult<Solved> {
    let outcome = match solve(problem, x0, config) {
        Ok(out) => out,
        Err(CcmError::NotConverged(partial)) => *partial,
        Err(other) => return Err(InputError(other.to_string())),
    };
    let cert = certify(problem, &outcome, &CertifyOptions::for_epsilon(config.epsilon))
        .map_err(|e| InputError(e.to_string()))?;
    Ok(Solved { outcome, cert })
}

fn convergence_line(lambda: f64, solved: &Solved) -> String {
    let n = solved.outcome.sweeps_used;
    let plural = if n == 1 { "" } else { "s" };
    let verdict = if solved.certified() { "certified" } else { "certification failed" };
    if solved.outcome.converged {
        format!("lambda={lambda:.16e}: converged after {n} sweep{plural}, {verdict}")
    } else {
        format!("lambda={lambda:.16e}: stopped without converging after {n} sweep{plural}, {verdict}")
    }
}

fn diagnostics_csv(outcome: &SolveOutcome<f64>) -> String {
    let d = &outcome.diagnostics;
    let mut out = String::from("sweep,objective,step_norm,cum_sq_steps,kkt_inf_norm\n");
    for (i, obj) in d.objective_trace.iter().enumerate() {
        out.push_str(&format!(
            "{},{obj:.16e},{:.16e},{:.16e},{:.16e}\n",
            i + 1,
            d.step_norms[i],
            d.cum_sq_steps[i],
            d.kkt_inf_norm_trace[i],
        ));
    }
    out
}

fn coordinate_csv(outcome: &SolveOutcome<f64>) -> String {
    let mut out = String::from("sweep,coordinate,value\n");
    if let Some(records) = outcome.diagnostics.coordinate_trace.as_deref() {
        for r in records {
            out.push_str(&format!("{},{},{:.16e}\n", r.sweep, r.coordinate, r.value));
        }
    }
    out
}

/// Diagnostics, optional per-update trace, and the certification record.
fn emit_run_records(stem: &str, trace: TraceLevel, solved: &Solved) -> AppResult<()> {
    if trace != TraceLevel::Off {
        write_file(&format!("{stem}_diagnostics.csv"), &diagnostics_csv(&solved.outcome))?;
    }
    if trace == TraceLevel::Coordinate {
        write_file(&format!("{stem}_trace.csv"), &coordinate_csv(&solved.outcome))?;
    }
    write_file(&format!("{stem}_certification.txt"), &solved.cert.to_key_value_text())
}

struct LambdaRun {
    lines: Vec<String>,
    certified: bool,
}

/// Runs the per-lambda worker across the whole list, one thread per value,
/// then prints the collected report lines in list order so output stays
/// deterministic regardless of which run finishes first.
fn fan_out(
    common: &CommonArgs,
    worker: impl Fn(f64, &str) -> AppResult<LambdaRun> + Sync,
) -> AppResult<Outcome> {
    let stems: Vec<String> = if common.lambda.len() == 1 {
        vec![common.out.clone()]
    } else {
        (1..=common.lambda.len()).map(|k| format!("{}_lam{k}", common.out)).collect()
    };
    let results: Vec<AppResult<LambdaRun>> = std::thread::scope(|scope| {
        let worker = &worker;
        let handles: Vec<_> = common
            .lambda
            .iter()
            .zip(&stems)
            .map(|(&lam, stem)| scope.spawn(move || worker(lam, stem)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });
    if common.lambda.len() > 1 {
        for (k, lam) in common.lambda.iter().enumerate() {
            println!("lambda[{}]={lam:.16e} -> {}_*", k + 1, stems[k]);
        }
    }
    let mut all = true;
    for res in results {
        let run = res?;
        for line in &run.lines {
            println!("{line}");
        }
        all &= run.certified;
    }
    Ok(if all { Outcome::AllCertified } else { Outcome::SomeUncertified })
}

fn inf_gap(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ------------------------------------------------------------- subcommands

fn run_f2(args: &F2Args) -> AppResult<Outcome> {
    let text = read_file(&args.matrix)?;
    let entries = parse_matrix(&text, args.common.format, &args.matrix)?;
    let n = entries.ncols();
    let design = DesignMatrix::new(entries).or_else(|e| bad_input(&args.matrix, e))?;
    let penalized = if args.penalized == "all" {
        PenaltySet::all(n)
    } else {
        let idx = parse_index_list::<f64>(&args.penalized, n)
            .map_err(|e| InputError(format!("--penalized: {e}")))?;
        PenaltySet::from_indices::<f64>(n, idx)
            .map_err(|e| InputError(format!("--penalized: {e}")))?
    };
    let x0 = match &args.x0 {
        Some(path) => {
            let text = read_file(path)?;
            parse_vector::<f64>(&text).or_else(|e| bad_input(path, e))?
        }
        None => F2Problem::new(design.clone(), penalized.clone(), args.common.lambda[0])
            .map_err(|e| InputError(e.to_string()))?
            .default_start(),
    };
    let config = build_config(&args.common, n)?;

    fan_out(&args.common, |lambda, stem| {
        let problem = F2Problem::new(design.clone(), penalized.clone(), lambda)
            .map_err(|e| InputError(e.to_string()))?;
        let solved = solve_and_certify(&problem, x0.view(), &config)?;
        write_file(&format!("{stem}_solution.txt"), &format_vector(solved.outcome.x.view()))?;
        emit_run_records(stem, args.common.trace, &solved)?;
        let mut lines = vec![convergence_line(lambda, &solved)];
        let mut certified = solved.certified();

        if args.common.compare_orders {
            let mut alt_cfg = config.clone();
            alt_cfg.order = alternate_order(&args.common, n);
            let alt = solve_and_certify(&problem, x0.view(), &alt_cfg)?;
            write_file(&format!("{stem}_alt_solution.txt"), &format_vector(alt.outcome.x.view()))?;
            write_file(&format!("{stem}_alt_certification.txt"), &alt.cert.to_key_value_text())?;
            let m = problem.design().nrows();
            let mut ex_a = Array1::zeros(m);
            let mut ex_b = Array1::zeros(m);
            problem.design().matvec_into(solved.outcome.x.view(), &mut ex_a);
            problem.design().matvec_into(alt.outcome.x.view(), &mut ex_b);
            lines.push(format!(
                "lambda={lambda:.16e}: compare-orders max|E x_A - E x_B| = {:.16e}, |f_A - f_B| = {:.16e}",
                inf_gap(ex_a.view(), ex_b.view()),
                (solved.outcome.objective - alt.outcome.objective).abs(),
            ));
            certified &= alt.certified();
        }
        Ok(LambdaRun { lines, certified })
    })
}

fn run_logistic(args: &LogisticArgs) -> AppResult<Outcome> {
    let data_text = read_file(&args.data)?;
    let features = parse_matrix(&data_text, args.common.format, &args.data)?;
    let labels_text = read_file(&args.labels)?;
    let labels = parse_vector::<f64>(&labels_text).or_else(|e| bad_input(&args.labels, e))?;
    let dataset = LogisticDataset::new(features, labels).or_else(|e| bad_input(&args.data, e))?;
    let n = dataset.features();
    let config = build_config(&args.common, n)?;

    fan_out(&args.common, |lambda, stem| {
        let problem = logistic_problem(&dataset, lambda).map_err(|e| InputError(e.to_string()))?;
        let x0 = Array1::<f64>::zeros(n);
        let solved = solve_and_certify(&problem, x0.view(), &config)?;
        write_file(&format!("{stem}_solution.txt"), &format_vector(solved.outcome.x.view()))?;
        let mut support = String::new();
        for (i, &b) in solved.outcome.x.iter().enumerate() {
            if b != 0.0 {
                support.push_str(&format!("{}\n", i + 1));
            }
        }
        write_file(&format!("{stem}_support.txt"), &support)?;
        emit_run_records(stem, args.common.trace, &solved)?;
        let mut lines = vec![convergence_line(lambda, &solved)];
        let mut certified = solved.certified();

        if args.common.compare_orders {
            let mut alt_cfg = config.clone();
            alt_cfg.order = alternate_order(&args.common, n);
            let alt = solve_and_certify(&problem, x0.view(), &alt_cfg)?;
            write_file(&format!("{stem}_alt_solution.txt"), &format_vector(alt.outcome.x.view()))?;
            write_file(&format!("{stem}_alt_certification.txt"), &alt.cert.to_key_value_text())?;
            let m = problem.design().nrows();
            let mut ex_a = Array1::zeros(m);
            let mut ex_b = Array1::zeros(m);
            problem.design().matvec_into(solved.outcome.x.view(), &mut ex_a);
            problem.design().matvec_into(alt.outcome.x.view(), &mut ex_b);
            lines.push(format!(
                "lambda={lambda:.16e}: compare-orders max|X b_A - X b_B| = {:.16e}, |f_A - f_B| = {:.16e}",
                inf_gap(ex_a.view(), ex_b.view()),
                (solved.outcome.objective - alt.outcome.objective).abs(),
            ));
            certified &= alt.certified();
        }
        Ok(LambdaRun { lines, certified })
    })
}

fn run_concord(args: &ConcordArgs) -> AppResult<Outcome> {
    let text = read_file(&args.input)?;
    let matrix = parse_matrix(&text, args.common.format, &args.input)?;
    // Validate once with the first weight, then reuse the covariance so the
    // per-lambda workers share one estimate of the input.
    let sigma = match args.input_kind {
        InputKind::Data => CovarianceProblem::from_observations(&matrix, args.common.lambda[0])
            .or_else(|e| bad_input(&args.input, e))?
            .sigma()
            .clone(),
        InputKind::Covariance => {
            CovarianceProblem::new(matrix, args.common.lambda[0])
                .or_else(|e| bad_input(&args.input, e))?
                .sigma()
                .clone()
        }
    };
    let p = sigma.nrows();
    let packed_dim = p * (p + 1) / 2;
    let config = build_config(&args.common, packed_dim)?;

    fan_out(&args.common, |lambda, stem| {
        let cp = CovarianceProblem::new(sigma.clone(), lambda)
            .map_err(|e| InputError(e.to_string()))?;
        let solution = match concord_solve(&cp, &config, ConcordPath::Direct) {
            Ok(sol) => sol,
            Err(CcmError::NotConverged(partial)) => {
                let outcome = *partial;
                let estimate =
                    ccm_core::concord::ConcordEstimate::from_packed(p, outcome.x.clone());
                ccm_core::concord::ConcordSolution { estimate, outcome }
            }
            Err(other) => return Err(InputError(other.to_string())),
        };
        let engine = DirectEngine::new(&cp);
        let cert = certify(&engine, &solution.outcome, &CertifyOptions::for_epsilon(config.epsilon))
            .map_err(|e| InputError(e.to_string()))?;
        let solved = Solved { outcome: solution.outcome, cert };

        write_file(
            &format!("{stem}_omega.txt"),
            &format_matrix(solution.estimate.to_matrix().view()),
        )?;
        let mut edges = String::new();
        for (i, j) in solution.estimate.edges(args.edge_threshold) {
            edges.push_str(&format!("{i},{j}\n"));
        }
        write_file(&format!("{stem}_edges.txt"), &edges)?;
        emit_run_records(stem, args.common.trace, &solved)?;
        let mut lines = vec![convergence_line(lambda, &solved)];
        let mut certified = solved.certified();

        if args.common.compare_orders {
            let mut alt_cfg = config.clone();
            alt_cfg.order = alternate_order(&args.common, packed_dim);
            let alt_solution = match concord_solve(&cp, &alt_cfg, ConcordPath::Direct) {
                Ok(sol) => sol,
                Err(CcmError::NotConverged(partial)) => {
                    let outcome = *partial;
                    let estimate =
                        ccm_core::concord::ConcordEstimate::from_packed(p, outcome.x.clone());
                    ccm_core::concord::ConcordSolution { estimate, outcome }
                }
                Err(other) => return Err(InputError(other.to_string())),
            };
            let alt_cert = certify(
                &engine,
                &alt_solution.outcome,
                &CertifyOptions::for_epsilon(config.epsilon),
            )
            .map_err(|e| InputError(e.to_string()))?;
            write_file(
                &format!("{stem}_alt_omega.txt"),
                &format_matrix(alt_solution.estimate.to_matrix().view()),
            )?;
            write_file(&format!("{stem}_alt_certification.txt"), &alt_cert.to_key_value_text())?;
            lines.push(format!(
                "lambda={lambda:.16e}: compare-orders max|omega_A - omega_B| = {:.16e}, |f_A - f_B| = {:.16e}",
                inf_gap(solved.outcome.x.view(), alt_solution.outcome.x.view()),
                (solved.outcome.objective - alt_solution.outcome.objective).abs(),
            ));
            certified &= alt_solution.outcome.converged && alt_cert.all_pass();
        }
        Ok(LambdaRun { lines, certified })
    })
}
