//! Output files: series.csv, variables.json, summary.json, bench.csv.

use std::fs;
use std::path::Path;

use serde::Serialize;

use aviopt::aircraft::{Carrier, Market};
use aviopt::gradopt::Termination;
use aviopt::policy::{ConstraintKind, PolicyProblem, ScenarioContext, ScenarioOutput, Solution, VarKey};

use crate::CliError;

/// Constraint values at or below this are reported as binding.
pub const BINDING_TOL: f64 = 1e-6;

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    text.push('\n');
    write(path, &text)
}

/// Column names of series.csv, in order.
pub fn series_columns(ctx: &ScenarioContext) -> Vec<String> {
    let mut cols = vec!["year".to_string(), "rpk".into(), "ask_trend".into()];
    cols.extend(Market::ALL.iter().map(|m| format!("ask_{m}")));
    cols.extend(["co2_gt".into(), "cumulative_co2_gt".into()]);
    cols.extend(Carrier::ALL.iter().map(|c| format!("consumption_{}_mj", c.energy_name())));
    cols.extend(
        ["biomass_use_mj", "biomass_cap_mj", "electricity_use_mj", "electricity_cap_mj", "price_ratio"].map(String::from),
    );
    cols.extend(ctx.network.energies.iter().map(|e| format!("ef_{}_g_per_mj", e.name)));
    cols
}

pub fn series_csv(ctx: &ScenarioContext, out: &ScenarioOutput<f64>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Output(e.to_string());
    w.write_record(series_columns(ctx)).map_err(err)?;
    let cumulative = out.co2.cumulative();
    for (k, year) in ctx.grid().years().enumerate() {
        let mut row = vec![year.to_string()];
        let mut push = |v: f64| row.push(format!("{v:e}"));
        push(ctx.demand.rpk_trend[k]);
        push(out.ask_trend[k]);
        for m in &out.market_ask {
            push(m[k]);
        }
        push(out.co2[k]);
        push(cumulative[k]);
        for d in &out.direct {
            push(d[k]);
        }
        push(out.resources.biomass_use[k]);
        push(ctx.biomass_cap[k]);
        push(out.resources.electricity_use[k]);
        push(ctx.electricity_cap[k]);
        push(out.burden.as_ref().map_or(1.0, |b| b.annual[k]));
        for ef in &out.mix.emission_factor {
            push(ef[k]);
        }
        w.write_record(&row).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}

pub fn write_series(path: &Path, ctx: &ScenarioContext, out: &ScenarioOutput<f64>) -> Result<(), CliError> {
    write(path, &series_csv(ctx, out)?)
}

#[derive(Debug, Serialize, serde::Deserialize)]
pub struct VariableRecord {
    pub key: VarKey,
    /// Physical units: years, fractions.
    pub value: f64,
    pub normalized: f64,
}

#[derive(Debug, Serialize, serde::Deserialize)]
pub struct VariablesFile {
    pub variables: Vec<VariableRecord>,
}

pub fn variables(problem: &PolicyProblem, x: &[f64]) -> VariablesFile {
    let phys = problem.to_physical(x);
    VariablesFile {
        variables: problem
            .keys()
            .iter()
            .zip(phys.iter().zip(x))
            .map(|(key, (value, normalized))| VariableRecord { key: key.clone(), value: *value, normalized: *normalized })
            .collect(),
    }
}

/// Start point for `problem` from a variables file: matching keys are
/// copied, the rest stay at the default start.
pub fn start_from_variables(problem: &PolicyProblem, file: &VariablesFile) -> Vec<f64> {
    let mut phys = problem.to_physical(&problem.default_start());
    for rec in &file.variables {
        if let Some(i) = problem.keys().iter().position(|k| *k == rec.key) {
            phys[i] = rec.value;
        }
    }
    problem.to_normalized(&phys)
}

#[derive(Debug, Serialize)]
pub struct BindingConstraint {
    pub constraint: ConstraintKind,
    pub value: f64,
}

/// Constraints at or past their bound, most violated first.
pub fn binding_constraints(problem: &PolicyProblem, values: &[f64]) -> Vec<BindingConstraint> {
    let mut b: Vec<BindingConstraint> = problem
        .constraint_kinds()
        .iter()
        .zip(values)
        .filter(|(_, v)| **v <= BINDING_TOL)
        .map(|(k, v)| BindingConstraint { constraint: k.clone(), value: *v })
        .collect();
    b.sort_by(|a, c| a.value.total_cmp(&c.value));
    b
}

#[derive(Debug, Serialize)]
pub struct FdCheckSummary {
    pub passed: bool,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub mismatches: usize,
}

#[derive(Debug, Serialize)]
pub struct ScenarioSummary {
    pub background: String,
    pub cumulative_co2_gt: f64,
    pub peak_co2_gt: f64,
    pub peak_year: i32,
    /// Discounted burden when supply shift is active.
    pub burden: Option<f64>,
}

pub fn scenario_summary(ctx: &ScenarioContext, out: &ScenarioOutput<f64>) -> ScenarioSummary {
    let (k, peak) = out.co2.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bk, bv), (k, v)| if *v > bv { (k, *v) } else { (bk, bv) });
    ScenarioSummary {
        background: ctx.label().to_string(),
        cumulative_co2_gt: out.cumulative_co2,
        peak_co2_gt: peak,
        peak_year: ctx.grid().year(k),
        burden: out.burden.as_ref().map(|b| b.discounted_total),
    }
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub command: String,
    /// Physical objective: mean cumulative CO2 in Gt, or discounted burden.
    pub objective: f64,
    pub objective_scaled: f64,
    pub max_violation: f64,
    pub feasible: bool,
    pub converged: bool,
    pub iterations: usize,
    pub termination: Termination,
    pub variables: usize,
    pub constraints: usize,
    pub scenarios: Vec<ScenarioSummary>,
    pub binding: Vec<BindingConstraint>,
    pub fd_check: Option<FdCheckSummary>,
    /// Excluded from reproducibility comparisons.
    pub wall_time_s: f64,
}

pub fn run_summary(
    command: &str,
    problem: &PolicyProblem,
    solution: &Solution,
    outputs: &[ScenarioOutput<f64>],
    constraints: &[f64],
    fd_check: Option<FdCheckSummary>,
    wall_time_s: f64,
) -> RunSummary {
    let run = &solution.runs[solution.start];
    RunSummary {
        command: command.to_string(),
        objective: problem.raw_objective(outputs),
        objective_scaled: solution.f,
        max_violation: solution.max_violation,
        feasible: solution.feasible,
        converged: solution.converged && solution.feasible,
        iterations: run.iterations,
        termination: run.termination,
        variables: problem.keys().len(),
        constraints: constraints.len(),
        scenarios: problem.contexts().iter().zip(outputs).map(|(c, o)| scenario_summary(c, o)).collect(),
        binding: binding_constraints(problem, constraints),
        fd_check,
        wall_time_s,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub task: String,
    pub repetitions: usize,
    pub mean_s: f64,
    pub stddev_s: f64,
    pub min_s: f64,
    pub passes: usize,
}

pub fn bench_row(task: &str, samples: &[f64], passes: usize) -> BenchRow {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 { samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    BenchRow {
        task: task.to_string(),
        repetitions: samples.len(),
        mean_s: mean,
        stddev_s: var.sqrt(),
        min_s: samples.iter().copied().fold(f64::INFINITY, f64::min),
        passes,
    }
}

pub fn write_bench(path: &Path, rows: &[BenchRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Output(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    write(path, &String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))?)
}
