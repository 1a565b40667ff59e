use std::path::Path;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use aviopt::aircraft::Architecture;
use aviopt::demand::{calibrate_logistic, sum_squared_residuals, CalibrationOptions, DemandError, LogisticParams};
use aviopt::gradopt::{
    check_gradient, linearize, pass_count, GradCheckTolerance, NlpFunction, NlpProblem, VectorFn,
};
use aviopt::policy::{
    build_problem, build_robust_problem, solve, EnergyMode, Formulation, PolicyProblem, ProblemSpec, Solution,
};
use aviopt::Dual;
use serde::Serialize;

use crate::config::LoadedRun;
use crate::report::{self, FdCheckSummary, VariablesFile};
use crate::{CliError, Outcome};

/// Random interior points checked by `fd_check`. Start points are skipped:
/// entry years on integer grid years sit on a kink of the share ramp.
pub const FD_CHECK_POINTS: usize = 3;

fn spec(formulation: Formulation, energy: EnergyMode, roster: Vec<aviopt::policy::RosterEntry>) -> ProblemSpec {
    ProblemSpec { formulation, energy, roster }
}

fn fd_check(problem: &PolicyProblem, seed: u64) -> Result<FdCheckSummary, CliError> {
    let mut rng = StdRng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> =
        (0..FD_CHECK_POINTS).map(|_| (0..problem.dimension()).map(|_| rng.gen_range(0.05..0.95)).collect()).collect();
    let mut summary = FdCheckSummary { passed: true, max_rel_error: 0.0, max_abs_error: 0.0, mismatches: 0 };
    for x in &points {
        let r = check_gradient(&NlpFunction(problem), x, GradCheckTolerance::default()).map_err(|e| CliError::Run(e.to_string()))?;
        summary.passed &= r.passed();
        summary.max_rel_error = summary.max_rel_error.max(r.max_rel_error);
        summary.max_abs_error = summary.max_abs_error.max(r.max_abs_error);
        summary.mismatches += r.mismatches.len();
    }
    if !summary.passed {
        log::warn!("gradient check found {} mismatching entries", summary.mismatches);
    }
    Ok(summary)
}

fn warm_start(run: &LoadedRun, problem: &PolicyProblem) -> Result<Option<Vec<f64>>, CliError> {
    let Some(p) = &run.config.warm_start else { return Ok(None) };
    let path = run.resolve(p);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let file: VariablesFile = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(Some(report::start_from_variables(problem, &file)))
}

/// Default start, the fossil-only optimum of the same fleet roster, and
/// the configured warm start.
fn starts(run: &LoadedRun, problem: &PolicyProblem) -> Result<Vec<Vec<f64>>, CliError> {
    let mut starts = vec![problem.default_start()];
    let staged = problem.spec().energy == EnergyMode::Optimized || problem.spec().formulation == Formulation::LowDemand;
    if staged {
        let fossil_spec = spec(Formulation::Trend, EnergyMode::Fossil, problem.spec().roster.clone());
        let fossil = if problem.contexts().len() == 1 {
            build_problem(problem.contexts()[0].clone(), fossil_spec)?
        } else {
            build_robust_problem(problem.contexts().to_vec(), fossil_spec)?
        };
        let s = solve(&fossil, &[fossil.default_start()], &run.config.optimizer.sqp())?;
        starts.push(problem.embed(&fossil, &s.x));
    }
    if let Some(w) = warm_start(run, problem)? {
        starts.push(w);
    }
    Ok(starts)
}

fn solve_and_report(
    command: &str,
    run: &LoadedRun,
    problem: &PolicyProblem,
    out: &Path,
    seed: u64,
    per_scenario_dirs: bool,
) -> Result<Outcome, CliError> {
    let t = Instant::now();
    let starts = starts(run, problem)?;
    let fd = if run.config.optimizer.fd_check { Some(fd_check(problem, seed)?) } else { None };
    let solution: Solution = solve(problem, &starts, &run.config.optimizer.sqp())?;
    let outputs = problem.outputs::<f64>(&solution.x)?;
    let constraints = problem.constraints(&outputs);
    let wall = t.elapsed().as_secs_f64();
    let summary = report::run_summary(command, problem, &solution, &outputs, &constraints, fd, wall);
    for (ctx, o) in problem.contexts().iter().zip(&outputs) {
        let dir = if per_scenario_dirs { out.join(ctx.label()) } else { out.to_path_buf() };
        report::write_series(&dir.join("series.csv"), ctx, o)?;
    }
    report::write_json(&out.join("variables.json"), &report::variables(problem, &solution.x))?;
    report::write_json(&out.join("summary.json"), &summary)?;
    log::info!(
        "{command}: objective {:.6}, violation {:.2e}, {} iterations -> {}",
        summary.objective,
        summary.max_violation,
        summary.iterations,
        out.display()
    );
    Ok(if summary.converged { Outcome::Converged } else { Outcome::NotConverged })
}

/// Fossil-only baselines: only conventional designs, one directory per
/// background.
pub fn baseline(run: &LoadedRun, out: &Path, seed: u64) -> Result<Outcome, CliError> {
    let roster: Vec<_> = run.roster.iter().filter(|e| e.architecture == Architecture::JetaTurbine).cloned().collect();
    if roster.is_empty() {
        return Err(CliError::Config("baseline needs at least one conventional roster entry".into()));
    }
    let mut outcome = Outcome::Converged;
    for ctx in &run.contexts {
        let problem = build_problem(ctx.clone(), spec(Formulation::Trend, EnergyMode::Fossil, roster.clone()))?;
        if solve_and_report("baseline", run, &problem, &out.join(ctx.label()), seed, false)? == Outcome::NotConverged {
            outcome = Outcome::NotConverged;
        }
    }
    Ok(outcome)
}

pub fn optimize(run: &LoadedRun, out: &Path, seed: u64) -> Result<Outcome, CliError> {
    if run.contexts.len() != 1 {
        return Err(CliError::Config("optimize takes exactly one background; use robust for ensembles".into()));
    }
    let c = &run.config;
    let problem = build_problem(run.contexts[0].clone(), spec(c.formulation, c.energy, run.roster.clone()))?;
    solve_and_report("optimize", run, &problem, out, seed, false)
}

pub fn robust(run: &LoadedRun, out: &Path, seed: u64) -> Result<Outcome, CliError> {
    let c = &run.config;
    if c.formulation != Formulation::Trend {
        return Err(CliError::Config("robust runs use the trend formulation".into()));
    }
    let problem = build_robust_problem(run.contexts.clone(), spec(c.formulation, c.energy, run.roster.clone()))?;
    solve_and_report("robust", run, &problem, out, seed, true)
}

#[derive(Debug, Serialize)]
struct CalibrationReport {
    demand: LogisticParams,
    converged: bool,
    rows: usize,
    /// Of the fit before any COVID shift.
    sum_squared_residuals: f64,
    covid_income_gap: Option<f64>,
}

/// Fit the demand curve to the history and write `calibration.json`.
pub fn calibrate(run: &LoadedRun, out: &Path) -> Result<Outcome, CliError> {
    let rows = run.history()?;
    let c = &run.config.calibration;
    let covid_income_gap = if c.covid_shift {
        let last = rows.iter().max_by_key(|r| r.year).ok_or_else(|| CliError::Data("empty demand history".into()))?;
        let income = &run.contexts[0].background.gdp_per_capita;
        let after = income
            .at_year(2024)
            .ok_or_else(|| CliError::Config("covid_shift needs 2024 on the model grid".into()))?;
        Some(after - last.income_pc)
    } else {
        None
    };
    let options = CalibrationOptions {
        fit_left: c.fit_left,
        fit_asymmetry: c.fit_asymmetry,
        covid_income_gap,
        max_iter: c.max_iter,
    };
    let (params, converged) = match calibrate_logistic(&rows, &run.config.settings.demand, &options) {
        Ok(p) => (p, true),
        Err(DemandError::NotConverged { best, .. }) => (best, false),
        Err(e @ (DemandError::InsufficientData { .. } | DemandError::Degenerate(_) | DemandError::History(_))) => {
            return Err(CliError::Data(e.to_string()))
        }
        Err(e) => return Err(CliError::Config(e.to_string())),
    };
    let mut fitted = params;
    if converged {
        fitted.inflection_income -= covid_income_gap.unwrap_or(0.0);
    }
    let report = CalibrationReport {
        demand: params,
        converged,
        rows: rows.len(),
        sum_squared_residuals: sum_squared_residuals(&rows, &fitted),
        covid_income_gap,
    };
    report::write_json(&out.join("calibration.json"), &report)?;
    Ok(if converged { Outcome::Converged } else { Outcome::NotConverged })
}

fn time_dual_pass<const N: usize>(f: &NlpFunction<'_, PolicyProblem>, x: &[f64]) -> Result<f64, CliError> {
    let seeded: Vec<Dual<N>> = x.iter().map(|v| Dual::constant(*v)).collect();
    let t = Instant::now();
    f.eval(&seeded).map_err(|e| CliError::Run(e.to_string()))?;
    Ok(t.elapsed().as_secs_f64())
}

fn dual_pass(f: &NlpFunction<'_, PolicyProblem>, x: &[f64], width: usize) -> Result<f64, CliError> {
    match width.next_power_of_two() {
        1 => time_dual_pass::<1>(f, x),
        2 => time_dual_pass::<2>(f, x),
        4 => time_dual_pass::<4>(f, x),
        8 => time_dual_pass::<8>(f, x),
        16 => time_dual_pass::<16>(f, x),
        _ => time_dual_pass::<32>(f, x),
    }
}

/// Time plain evaluation, one seeded forward pass and the full
/// linearization of the first background's problem.
pub fn bench(run: &LoadedRun, out: &Path) -> Result<Outcome, CliError> {
    let c = &run.config;
    let problem = build_problem(run.contexts[0].clone(), spec(c.formulation, c.energy, run.roster.clone()))?;
    let x = problem.default_start();
    let f = NlpFunction(&problem);
    let width = c.optimizer.batch_width;
    let n = c.bench.repetitions;
    let (mut eval, mut pass, mut lin) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let t = Instant::now();
        problem.evaluate::<f64>(&x).map_err(|e| CliError::Run(e.to_string()))?;
        eval.push(t.elapsed().as_secs_f64());
        pass.push(dual_pass(&f, &x, width)?);
        let t = Instant::now();
        linearize(&f, &x, width).map_err(|e| CliError::Run(e.to_string()))?;
        lin.push(t.elapsed().as_secs_f64());
    }
    let passes = pass_count(x.len(), width);
    let rows = [
        report::bench_row("evaluate", &eval, 0),
        report::bench_row("dual_pass", &pass, 1),
        report::bench_row("linearize", &lin, passes),
    ];
    report::write_bench(&out.join("bench.csv"), &rows)?;
    Ok(Outcome::Converged)
}
