//! End-to-end scenario evaluation and the policy optimization problems.

mod problem;
mod scenario;
mod solve;

pub use problem::{
    build_problem, build_robust_problem, ConstraintKind, EnergyMode, Formulation, PolicyProblem, ProblemSpec,
    SubspaceProblem, VarKey,
};
pub use scenario::{evaluate_scenario, resource_constraints, DesignOutcome, PolicyVariables, ResourceSlack, ScenarioOutput};
pub use solve::{solve, Solution, FEASIBILITY_TOL};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aircraft::{design_at, Architecture, Market, ReferenceIntensity, SizingConstants, TechScenario};
use crate::bundled;
use crate::demand::{project_demand, DemandError, DemandResult, LogisticParams, StorylineFactor};
use crate::energymix::{primary_factors, EnergyNetwork, MixError, PathwaySpec, FINAL_ENERGIES};
use crate::fleet::{BurdenParams, FleetError, MarketSplit};
use crate::gradopt::{EvalError, OptError};
use crate::store::{ScenarioBackground, StoreError, TimeGrid, TimeSeries};

/// MJ per EJ.
pub const MJ_PER_EJ: f64 = 1e12;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error(transparent)]
    Fleet(#[from] FleetError),
    #[error(transparent)]
    Mix(#[from] MixError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
}

impl From<PolicyError> for EvalError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::Eval(e) => e,
            other => EvalError::new("evaluate_scenario", other.to_string()),
        }
    }
}

/// Fraction of global biomass and electricity production aviation may use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationShares {
    pub biomass: f64,
    pub electricity: f64,
}

impl AllocationShares {
    pub const CONSERVATIVE: AllocationShares = AllocationShares { biomass: 0.050, electricity: 0.050 };
    pub const PREFERENTIAL: AllocationShares = AllocationShares { biomass: 0.086, electricity: 0.086 };

    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.biomass > 0.0 && self.biomass < 1.0 && self.electricity > 0.0 && self.electricity < 1.0) {
            return Err(PolicyError::Config(format!("allocation shares must lie in (0,1): {self:?}")));
        }
        Ok(())
    }
}

impl Default for AllocationShares {
    fn default() -> Self {
        Self::CONSERVATIVE
    }
}

/// Global carbon budget and the sector's fair share of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSpec {
    pub budget_gtco2: f64,
    pub fair_share: f64,
}

impl Default for BudgetSpec {
    fn default() -> Self {
        BudgetSpec { budget_gtco2: 1150.0, fair_share: 0.03 }
    }
}

impl BudgetSpec {
    /// Sector allowance in Gt.
    pub fn allowance(&self) -> f64 {
        self.budget_gtco2 * self.fair_share
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.budget_gtco2 > 0.0 && self.fair_share > 0.0) {
            return Err(PolicyError::Config(format!("budget and fair share must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Model inputs shared by every scenario of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub start_year: i32,
    pub end_year: i32,
    pub demand: LogisticParams,
    /// Storyline target; derived from the background label when absent.
    pub storyline: Option<f64>,
    pub tech: TechScenario,
    pub sizing: SizingConstants,
    pub burden: BurdenParams,
    pub allocation: AllocationShares,
    pub budget: Option<BudgetSpec>,
    /// Plateau length of a design's market-share pulse. The default outlasts
    /// the horizon, so a product line serves until a newer one displaces it.
    pub pulse_lifetime_years: f64,
    /// Years over which a retiring design ramps out.
    pub rampdown_years: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            start_year: 2020,
            end_year: 2070,
            demand: LogisticParams::illustrative(),
            storyline: None,
            tech: TechScenario::MID,
            sizing: SizingConstants::default(),
            burden: BurdenParams::default(),
            allocation: AllocationShares::default(),
            budget: Some(BudgetSpec::default()),
            pulse_lifetime_years: 60.0,
            rampdown_years: 8.0,
        }
    }
}

impl ModelSettings {
    pub fn grid(&self) -> Result<TimeGrid, PolicyError> {
        Ok(TimeGrid::new(self.start_year, self.end_year)?)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        self.grid()?;
        self.demand.validate()?;
        self.burden.validate()?;
        self.allocation.validate()?;
        if let Some(b) = &self.budget {
            b.validate()?;
        }
        if !(0.0..=1.0).contains(&self.tech.lambda) {
            return Err(PolicyError::Config(format!("tech lambda {} outside [0,1]", self.tech.lambda)));
        }
        if let Some(f) = self.storyline {
            if !(f > 0.0) {
                return Err(PolicyError::Config(format!("storyline factor {f} must be positive")));
            }
        }
        if !(self.pulse_lifetime_years > 0.0) {
            return Err(PolicyError::Config("pulse_lifetime_years must be positive".into()));
        }
        if !(self.rampdown_years > 0.0) {
            return Err(PolicyError::Config("rampdown_years must be positive".into()));
        }
        Ok(())
    }
}

/// Storyline target implied by a background label: SSP1 −10%, SSP5 +50%,
/// trend otherwise.
pub fn storyline_for_label(label: &str) -> f64 {
    let l = label.to_ascii_lowercase();
    if l.starts_with("ssp1") {
        0.9
    } else if l.starts_with("ssp5") {
        1.5
    } else {
        1.0
    }
}

/// Static tables behind a run.
#[derive(Debug, Clone)]
pub struct ModelData {
    pub catalog: Vec<PathwaySpec>,
    pub split: MarketSplit,
    pub reference: ReferenceIntensity,
}

impl ModelData {
    pub fn bundled() -> Self {
        ModelData {
            catalog: bundled::pathway_catalog(),
            split: bundled::market_split(),
            reference: bundled::reference_intensity(),
        }
    }
}

/// One candidate design in the fleet roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosterEntry {
    pub architecture: Architecture,
    pub market: Market,
    /// Generation index among designs of the same architecture and market.
    pub generation: u8,
    pub eis_min: f64,
    pub eis_max: f64,
    pub start_eis: f64,
    pub start_share: f64,
}

impl RosterEntry {
    pub fn label(&self) -> String {
        format!("{}_{}_g{}", self.architecture, self.market, self.generation)
    }

    pub fn validate(&self, grid: TimeGrid) -> Result<(), PolicyError> {
        let span = grid.start_year as f64..=grid.end_year as f64;
        let ok = self.eis_min <= self.eis_max
            && span.contains(&self.eis_min)
            && span.contains(&self.eis_max)
            && (self.eis_min..=self.eis_max).contains(&self.start_eis)
            && (0.0..=1.0).contains(&self.start_share);
        if ok {
            Ok(())
        } else {
            Err(PolicyError::Config(format!("inconsistent roster entry {}", self.label())))
        }
    }
}

pub const EIS_LATEST: f64 = 2060.0;
pub const EIS_FIRST_CONVENTIONAL: f64 = 2030.0;
pub const EIS_EARLIEST: f64 = 2035.0;

/// Two conventional generations per market.
pub fn drop_in_roster() -> Vec<RosterEntry> {
    Market::ALL
        .iter()
        .flat_map(|&market| {
            [
                RosterEntry {
                    architecture: Architecture::JetaTurbine,
                    market,
                    generation: 1,
                    eis_min: EIS_FIRST_CONVENTIONAL,
                    eis_max: EIS_LATEST,
                    start_eis: EIS_FIRST_CONVENTIONAL,
                    start_share: 0.5,
                },
                RosterEntry {
                    architecture: Architecture::JetaTurbine,
                    market,
                    generation: 2,
                    eis_min: EIS_EARLIEST,
                    eis_max: EIS_LATEST,
                    start_eis: 2045.0,
                    start_share: 0.5,
                },
            ]
        })
        .collect()
}

/// Drop-in roster plus every alternative architecture that can be sized
/// feasibly by the latest entry year under `tech`.
pub fn breakthrough_roster(tech: TechScenario, sizing: &SizingConstants) -> Vec<RosterEntry> {
    let mut roster = drop_in_roster();
    for market in Market::ALL {
        for arch in Architecture::ALL.into_iter().filter(|a| *a != Architecture::JetaTurbine) {
            let d = design_at(arch, &market.tlar(), EIS_LATEST, tech, sizing);
            if d.feasible && d.headroom > 0.0 {
                roster.push(RosterEntry {
                    architecture: arch,
                    market,
                    generation: 1,
                    eis_min: EIS_EARLIEST,
                    eis_max: EIS_LATEST,
                    start_eis: EIS_LATEST,
                    start_share: 0.0,
                });
            } else {
                log::info!("roster: {arch} cannot serve {market} by {EIS_LATEST}");
            }
        }
    }
    roster
}

/// Precomputed, variable-independent inputs of one background scenario.
#[derive(Debug, Clone)]
pub struct ScenarioContext {
    pub background: ScenarioBackground,
    pub settings: ModelSettings,
    pub data: ModelData,
    pub storyline: StorylineFactor,
    pub demand: DemandResult,
    pub network: EnergyNetwork,
    pub primary: Vec<(usize, TimeSeries<f64>)>,
    /// Allowed consumption, MJ/yr.
    pub biomass_cap: TimeSeries<f64>,
    pub electricity_cap: TimeSeries<f64>,
}

impl ScenarioContext {
    pub fn new(background: ScenarioBackground, settings: &ModelSettings, data: &ModelData) -> Result<Self, PolicyError> {
        settings.validate()?;
        let grid = settings.grid()?;
        if background.grid() != grid {
            return Err(PolicyError::Config(format!("background `{}` is not on the model grid", background.label)));
        }
        let income = &background.gdp_per_capita;
        let reference_income = match grid.index_of(2024) {
            Some(k) => income[k],
            None => income[0],
        };
        let storyline = StorylineFactor {
            target: settings.storyline.unwrap_or_else(|| storyline_for_label(&background.label)),
            reference_income,
        };
        let demand = project_demand(&background, &settings.demand, &storyline)?;
        let network = EnergyNetwork::build(grid, &data.catalog, &FINAL_ENERGIES)?;
        for name in ["biomass", "electricity"] {
            network.energy_index(name)?;
        }
        let primary = primary_factors(&network, &background)?;
        let a = settings.allocation;
        let biomass_cap = background.biomass_production.scale(a.biomass * MJ_PER_EJ);
        let electricity_cap = background.electricity_production.scale(a.electricity * MJ_PER_EJ);
        if biomass_cap.iter().chain(electricity_cap.iter()).any(|v| !(*v > 0.0)) {
            return Err(PolicyError::Config(format!("background `{}` has non-positive resource production", background.label)));
        }
        Ok(ScenarioContext {
            background,
            settings: settings.clone(),
            data: data.clone(),
            storyline,
            demand,
            network,
            primary,
            biomass_cap,
            electricity_cap,
        })
    }

    /// Context on a bundled background.
    pub fn bundled(label: &str, settings: &ModelSettings) -> Result<Self, PolicyError> {
        let bg = bundled::background(label, settings.grid()?)?;
        Self::new(bg, settings, &ModelData::bundled())
    }

    pub fn grid(&self) -> TimeGrid {
        self.network.grid
    }

    pub fn label(&self) -> &str {
        &self.background.label
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn storyline_labels() {
        assert_eq!(storyline_for_label("ssp1_19"), 0.9);
        assert_eq!(storyline_for_label("SSP5_45"), 1.5);
        assert_eq!(storyline_for_label("ssp2_26"), 1.0);
        assert_eq!(storyline_for_label("custom"), 1.0);
    }

    #[test]
    fn drop_in_roster_shape() {
        let r = drop_in_roster();
        assert_eq!(r.len(), 10);
        assert!(r.iter().all(|e| e.architecture == Architecture::JetaTurbine));
        let grid = TimeGrid::default();
        assert!(r.iter().all(|e| e.validate(grid).is_ok()));
        assert_eq!(r.iter().filter(|e| e.eis_min == EIS_FIRST_CONVENTIONAL).count(), 5);
    }

    #[test]
    fn breakthrough_roster_grows_with_tech() {
        let c = SizingConstants::default();
        let low = breakthrough_roster(TechScenario::LOW, &c);
        let high = breakthrough_roster(TechScenario::HIGH, &c);
        assert!(low.len() > 10);
        assert!(low.iter().all(|e| high.contains(e)));
        assert!(low.iter().all(|e| e.validate(TimeGrid::default()).is_ok()));
    }

    #[test]
    fn settings_validation() {
        let mut s = ModelSettings::default();
        assert!(s.validate().is_ok());
        s.allocation.biomass = 0.0;
        assert!(s.validate().is_err());
        let s = ModelSettings { tech: TechScenario { lambda: 1.5 }, ..Default::default() };
        assert!(s.validate().is_err());
    }

    #[test]
    fn context_caps_scale_with_allocation() {
        let base = ScenarioContext::bundled("ssp2_26", &ModelSettings::default()).unwrap();
        let pref = ModelSettings { allocation: AllocationShares::PREFERENTIAL, ..Default::default() };
        let more = ScenarioContext::bundled("ssp2_26", &pref).unwrap();
        for k in 0..base.grid().len() {
            assert!(more.biomass_cap[k] >= base.biomass_cap[k]);
            assert!(more.electricity_cap[k] >= base.electricity_cap[k]);
        }
        assert_eq!(base.storyline.target, 1.0);
    }
}
