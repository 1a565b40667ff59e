//! Optimization formulations over normalized variables.
//!
//! Variable order: per roster entry `(eis, max_share)`; then, per scenario,
//! per mixed energy, per non-residual pathway, the share knots; then, for
//! the low-demand formulation, per market the supply-shift knots. Every
//! variable is scaled to `[0, 1]` between its physical bounds.
//!
//! Constraint order (all `≥ 0`): per scenario the biomass then electricity
//! allowance per year; per market the share sum per year; per scenario the
//! residual share per mixed energy and knot; the headroom of every
//! non-kerosene design; the carbon budget for the low-demand formulation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::scenario::{evaluate_scenario, PolicyVariables, ScenarioOutput};
use super::{BudgetSpec, PolicyError, RosterEntry, ScenarioContext};
use crate::aircraft::{Architecture, Market};
use crate::controls::CoarseControl;
use crate::fleet::MAX_SUPPLY_SHIFT;
use crate::gradopt::{EvalError, NlpProblem};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// Minimize cumulative CO2 serving trend demand.
    Trend,
    /// Minimize the discounted demand-aversion burden under a carbon budget.
    LowDemand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMode {
    /// Every energy from its residual pathway; fossil kerosene for Jet-A.
    Fossil,
    /// Pathway shares are optimization variables.
    Optimized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub formulation: Formulation,
    pub energy: EnergyMode,
    pub roster: Vec<RosterEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarKey {
    Eis { entry: String },
    MaxShare { entry: String },
    Share { scenario: usize, energy: String, pathway: String, knot: usize },
    Shift { market: Market, knot: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintKind {
    Biomass { scenario: usize, year: i32 },
    Electricity { scenario: usize, year: i32 },
    ShareSum { market: Market, year: i32 },
    ResidualShare { scenario: usize, energy: String, knot: usize },
    DesignHeadroom { entry: String },
    CarbonBudget,
}

#[derive(Debug, Clone)]
pub struct PolicyProblem {
    contexts: Vec<ScenarioContext>,
    spec: ProblemSpec,
    knots: usize,
    /// (energy index, free share count) per mixed energy.
    mixed: Vec<(usize, usize)>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    keys: Vec<VarKey>,
    kinds: Vec<ConstraintKind>,
    headroom_entries: Vec<usize>,
    budget: Option<BudgetSpec>,
    objective_scale: f64,
}

/// Single-scenario problem.
pub fn build_problem(ctx: ScenarioContext, spec: ProblemSpec) -> Result<PolicyProblem, PolicyError> {
    PolicyProblem::new(vec![ctx], spec)
}

/// Mean trend objective over an ensemble: shared aircraft variables,
/// per-scenario energy variables.
pub fn build_robust_problem(contexts: Vec<ScenarioContext>, spec: ProblemSpec) -> Result<PolicyProblem, PolicyError> {
    if contexts.is_empty() {
        return Err(PolicyError::Config("robust problem needs at least one background".into()));
    }
    if spec.formulation != Formulation::Trend {
        return Err(PolicyError::Config("robust problem supports the trend formulation only".into()));
    }
    PolicyProblem::new(contexts, spec)
}

impl PolicyProblem {
    fn new(contexts: Vec<ScenarioContext>, spec: ProblemSpec) -> Result<Self, PolicyError> {
        let first = &contexts[0];
        let grid = first.grid();
        for ctx in &contexts[1..] {
            if ctx.grid() != grid || ctx.network.mixed_energies() != first.network.mixed_energies() {
                return Err(PolicyError::Config("ensemble scenarios must share the grid and pathway catalog".into()));
            }
        }
        for e in &spec.roster {
            e.validate(grid)?;
        }
        let mut labels: Vec<String> = spec.roster.iter().map(RosterEntry::label).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != spec.roster.len() {
            return Err(PolicyError::Config("duplicate roster entries".into()));
        }
        let budget = match spec.formulation {
            Formulation::LowDemand => {
                if contexts.len() != 1 {
                    return Err(PolicyError::Config("low-demand formulation is single-scenario".into()));
                }
                Some(first.settings.budget.ok_or_else(|| {
                    PolicyError::Config("low-demand formulation needs a carbon budget".into())
                })?)
            }
            Formulation::Trend => None,
        };
        let knots = CoarseControl::<f64>::knot_count(grid);
        let net = &first.network;
        let mixed: Vec<(usize, usize)> = match spec.energy {
            EnergyMode::Fossil => Vec::new(),
            EnergyMode::Optimized => net.mixed_energies().into_iter().map(|e| (e, net.energies[e].pathways.len() - 1)).collect(),
        };

        let (mut lower, mut upper, mut keys) = (Vec::new(), Vec::new(), Vec::new());
        for e in &spec.roster {
            lower.extend([e.eis_min, 0.0]);
            upper.extend([e.eis_max, 1.0]);
            keys.push(VarKey::Eis { entry: e.label() });
            keys.push(VarKey::MaxShare { entry: e.label() });
        }
        for s in 0..contexts.len() {
            for &(e, free) in &mixed {
                for p in 0..free {
                    let pathway = &net.pathways[net.energies[e].pathways[p]].name;
                    for k in 0..knots {
                        lower.push(0.0);
                        upper.push(1.0);
                        keys.push(VarKey::Share { scenario: s, energy: net.energies[e].name.clone(), pathway: pathway.clone(), knot: k });
                    }
                }
            }
        }
        if spec.formulation == Formulation::LowDemand {
            for m in Market::ALL {
                for k in 0..knots {
                    lower.push(0.0);
                    upper.push(MAX_SUPPLY_SHIFT);
                    keys.push(VarKey::Shift { market: m, knot: k });
                }
            }
        }

        let mut kinds = Vec::new();
        for s in 0..contexts.len() {
            kinds.extend(grid.years().map(|year| ConstraintKind::Biomass { scenario: s, year }));
            kinds.extend(grid.years().map(|year| ConstraintKind::Electricity { scenario: s, year }));
        }
        for m in Market::ALL {
            kinds.extend(grid.years().map(|year| ConstraintKind::ShareSum { market: m, year }));
        }
        for s in 0..contexts.len() {
            for &(e, _) in &mixed {
                for k in 0..knots {
                    kinds.push(ConstraintKind::ResidualShare { scenario: s, energy: net.energies[e].name.clone(), knot: k });
                }
            }
        }
        let headroom_entries: Vec<usize> =
            (0..spec.roster.len()).filter(|&i| spec.roster[i].architecture != Architecture::JetaTurbine).collect();
        for &i in &headroom_entries {
            kinds.push(ConstraintKind::DesignHeadroom { entry: spec.roster[i].label() });
        }
        if budget.is_some() {
            kinds.push(ConstraintKind::CarbonBudget);
        }

        let mut problem = PolicyProblem {
            contexts,
            spec,
            knots,
            mixed,
            lower,
            upper,
            keys,
            kinds,
            headroom_entries,
            budget,
            objective_scale: 1.0,
        };
        let x0 = problem.default_start();
        let raw = problem.raw_objective(&problem.outputs::<f64>(&x0)?);
        if raw.is_finite() && raw > 0.0 {
            problem.objective_scale = raw;
        }
        Ok(problem)
    }

    pub fn contexts(&self) -> &[ScenarioContext] {
        &self.contexts
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn keys(&self) -> &[VarKey] {
        &self.keys
    }

    pub fn constraint_kinds(&self) -> &[ConstraintKind] {
        &self.kinds
    }

    pub fn knot_count(&self) -> usize {
        self.knots
    }

    /// Physical objective per unit of the optimizer's objective.
    pub fn objective_scale(&self) -> f64 {
        self.objective_scale
    }

    pub fn budget(&self) -> Option<BudgetSpec> {
        self.budget
    }

    pub fn physical_bounds(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    pub fn to_physical<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| T::cst(*lo) + T::cst(hi - lo) * *v)
            .collect()
    }

    pub fn to_normalized(&self, physical: &[f64]) -> Vec<f64> {
        physical
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 })
            .collect()
    }

    /// Start point: roster start values, residual pathways, no supply shift.
    pub fn default_start(&self) -> Vec<f64> {
        let mut phys = vec![0.0; self.keys.len()];
        for (i, e) in self.spec.roster.iter().enumerate() {
            phys[2 * i] = e.start_eis;
            phys[2 * i + 1] = e.start_share;
        }
        self.to_normalized(&phys)
    }

    /// Copy every variable of `other` whose key also exists here, mapping
    /// `other`'s scenario `j` onto scenario `j + scenario_offset`.
    pub fn embed_into(&self, base: &mut [f64], other: &PolicyProblem, x_other: &[f64], scenario_offset: usize) {
        let phys_other = other.to_physical(x_other);
        let index: HashMap<&VarKey, usize> = self.keys.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let mut phys = self.to_physical(base);
        for (key, v) in other.keys.iter().zip(phys_other) {
            let mapped = match key {
                VarKey::Share { scenario, energy, pathway, knot } => VarKey::Share {
                    scenario: scenario + scenario_offset,
                    energy: energy.clone(),
                    pathway: pathway.clone(),
                    knot: *knot,
                },
                k => k.clone(),
            };
            if let Some(&i) = index.get(&mapped) {
                phys[i] = v;
            }
        }
        base.copy_from_slice(&self.to_normalized(&phys));
    }

    /// Default start overlaid with `other`'s solution.
    pub fn embed(&self, other: &PolicyProblem, x_other: &[f64]) -> Vec<f64> {
        let mut x = self.default_start();
        self.embed_into(&mut x, other, x_other, 0);
        x
    }

    fn variables<T: Scalar>(&self, x: &[T], scenario: usize) -> PolicyVariables<T> {
        let p = self.to_physical(x);
        let n_air = self.spec.roster.len();
        let aircraft = (0..n_air).map(|i| (p[2 * i], p[2 * i + 1])).collect();
        let per_scenario: usize = self.mixed.iter().map(|(_, f)| f * self.knots).sum();
        let energy = match self.spec.energy {
            EnergyMode::Fossil => None,
            EnergyMode::Optimized => {
                let mut cursor = 2 * n_air + scenario * per_scenario;
                Some(
                    self.mixed
                        .iter()
                        .map(|&(_, free)| {
                            (0..free)
                                .map(|_| {
                                    let v = p[cursor..cursor + self.knots].to_vec();
                                    cursor += self.knots;
                                    v
                                })
                                .collect()
                        })
                        .collect(),
                )
            }
        };
        let supply_shift = match self.spec.formulation {
            Formulation::Trend => None,
            Formulation::LowDemand => {
                let start = 2 * n_air + self.contexts.len() * per_scenario;
                Some((0..Market::ALL.len()).map(|m| p[start + m * self.knots..start + (m + 1) * self.knots].to_vec()).collect())
            }
        };
        PolicyVariables { aircraft, energy, supply_shift }
    }

    /// Scenario outputs at normalized `x`, in ensemble order.
    pub fn outputs<T: Scalar>(&self, x: &[T]) -> Result<Vec<ScenarioOutput<T>>, PolicyError> {
        if x.len() != self.keys.len() {
            return Err(PolicyError::Config(format!("expected {} variables, got {}", self.keys.len(), x.len())));
        }
        self.contexts
            .iter()
            .enumerate()
            .map(|(s, ctx)| evaluate_scenario(ctx, &self.spec.roster, &self.variables(x, s)))
            .collect()
    }

    /// Unscaled objective: mean cumulative CO2 in Gt, or the discounted burden.
    pub fn raw_objective<T: Scalar>(&self, outputs: &[ScenarioOutput<T>]) -> T {
        let n = T::cst(outputs.len() as f64);
        match self.spec.formulation {
            Formulation::Trend => outputs.iter().map(|o| o.cumulative_co2).sum::<T>() / n,
            Formulation::LowDemand => {
                outputs.iter().map(|o| o.burden.as_ref().map_or(T::zero(), |b| b.discounted_total)).sum::<T>() / n
            }
        }
    }

    /// Constraint values in the documented order.
    pub fn constraints<T: Scalar>(&self, outputs: &[ScenarioOutput<T>]) -> Vec<T> {
        let mut c = Vec::with_capacity(self.kinds.len());
        for (o, ctx) in outputs.iter().zip(&self.contexts) {
            let r = &o.resources;
            c.extend(r.biomass_use.iter().zip(ctx.biomass_cap.iter()).map(|(u, cap)| T::one() - *u / T::cst(*cap)));
            c.extend(r.electricity_use.iter().zip(ctx.electricity_cap.iter()).map(|(u, cap)| T::one() - *u / T::cst(*cap)));
        }
        let shared = &outputs[0];
        for s in &shared.fleet.share_slack {
            c.extend(s.iter().copied());
        }
        for o in outputs {
            for r in &o.residual_knots {
                c.extend(r.iter().copied());
            }
        }
        for &i in &self.headroom_entries {
            c.push(shared.designs[i].headroom);
        }
        if let Some(b) = self.budget {
            c.push(T::one() - shared.cumulative_co2 / T::cst(b.allowance()));
        }
        c
    }
}

impl NlpProblem for PolicyProblem {
    fn dimension(&self) -> usize {
        self.keys.len()
    }

    fn constraint_count(&self) -> usize {
        self.kinds.len()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.keys.len()], vec![1.0; self.keys.len()])
    }

    fn evaluate<T: Scalar>(&self, x: &[T]) -> Result<(T, Vec<T>), EvalError> {
        let outputs = self.outputs(x)?;
        let f = self.raw_objective(&outputs) / T::cst(self.objective_scale);
        Ok((f, self.constraints(&outputs)))
    }
}

/// Restriction of a policy problem to `base + Σ_i a_i·d_i` with `a ∈ [0,1]^k`.
#[derive(Debug, Clone)]
pub struct SubspaceProblem<'a> {
    pub inner: &'a PolicyProblem,
    pub base: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
}

impl SubspaceProblem<'_> {
    pub fn full_point<T: Scalar>(&self, a: &[T]) -> Vec<T> {
        let mut x: Vec<T> = self.base.iter().map(|v| T::cst(*v)).collect();
        for (ai, d) in a.iter().zip(&self.directions) {
            for (xj, dj) in x.iter_mut().zip(d) {
                if *dj != 0.0 {
                    *xj += *ai * T::cst(*dj);
                }
            }
        }
        x
    }
}

impl NlpProblem for SubspaceProblem<'_> {
    fn dimension(&self) -> usize {
        self.directions.len()
    }

    fn constraint_count(&self) -> usize {
        self.inner.constraint_count()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.directions.len()], vec![1.0; self.directions.len()])
    }

    fn evaluate<T: Scalar>(&self, a: &[T]) -> Result<(T, Vec<T>), EvalError> {
        self.inner.evaluate(&self.full_point(a))
    }
}
