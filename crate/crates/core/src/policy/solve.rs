//! Multi-start SQP keeping the best feasible point seen, start points included.

use serde::{Deserialize, Serialize};

use crate::gradopt::{sqp_minimize, NlpProblem, OptError, OptResult, SqpSettings};

/// Largest constraint violation counted as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    /// Normalized variables.
    pub x: Vec<f64>,
    /// Optimizer-scale objective.
    pub f: f64,
    pub max_violation: f64,
    pub feasible: bool,
    /// The SQP run from the winning start converged.
    pub converged: bool,
    /// Index of the winning start.
    pub start: usize,
    /// The winner is the start point itself, not an SQP iterate.
    pub kept_start: bool,
    pub runs: Vec<OptResult>,
}

impl Solution {
    pub fn iterations(&self) -> usize {
        self.runs[self.start].iterations
    }
}

struct Candidate {
    x: Vec<f64>,
    f: f64,
    violation: f64,
    start: usize,
    kept_start: bool,
}

fn better(a: &Candidate, b: &Candidate) -> bool {
    let (fa, fb) = (a.violation <= FEASIBILITY_TOL, b.violation <= FEASIBILITY_TOL);
    match (fa, fb) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => a.f < b.f,
        (false, false) => a.violation < b.violation,
    }
}

/// Run SQP from every start and return the best feasible point among the
/// iterates and the starts.
pub fn solve<P: NlpProblem>(problem: &P, starts: &[Vec<f64>], settings: &SqpSettings) -> Result<Solution, OptError> {
    if starts.is_empty() {
        return Err(OptError::Dimension("no start point".into()));
    }
    let mut best: Option<Candidate> = None;
    let mut runs = Vec::with_capacity(starts.len());
    let consider = |c: Candidate, best: &mut Option<Candidate>| {
        if best.as_ref().is_none_or(|b| better(&c, b)) {
            *best = Some(c);
        }
    };
    for (i, x0) in starts.iter().enumerate() {
        let (f0, c0) = problem.evaluate::<f64>(x0).map_err(|e| OptError::Grad(e.into()))?;
        let v0 = c0.iter().fold(0.0f64, |m, v| m.max(-v));
        consider(Candidate { x: x0.clone(), f: f0, violation: v0, start: i, kept_start: true }, &mut best);
        let r = sqp_minimize(problem, x0, settings)?;
        log::info!(
            "start {i}: f {:.6e} -> {:.6e}, violation {:.2e}, {} iterations, {:?}",
            f0,
            r.f_star,
            r.max_violation,
            r.iterations,
            r.termination
        );
        consider(Candidate { x: r.x_star.clone(), f: r.f_star, violation: r.max_violation, start: i, kept_start: false }, &mut best);
        runs.push(r);
    }
    let b = best.expect("at least one candidate");
    Ok(Solution {
        converged: runs[b.start].converged,
        x: b.x,
        f: b.f,
        max_violation: b.violation,
        feasible: b.violation <= FEASIBILITY_TOL,
        start: b.start,
        kept_start: b.kept_start,
        runs,
    })
}
