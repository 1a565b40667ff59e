//! Run configuration: one JSON file per command invocation.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use aviopt::aircraft::ReferenceIntensity;
use aviopt::bundled;
use aviopt::demand::{load_history, CalibrationOptions, HistoryRow};
use aviopt::energymix::parse_catalog;
use aviopt::fleet::MarketSplit;
use aviopt::gradopt::SqpSettings;
use aviopt::policy::{
    breakthrough_roster, drop_in_roster, EnergyMode, Formulation, ModelData, ModelSettings, PolicyError, RosterEntry,
    ScenarioContext,
};
use aviopt::store::load_background;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RosterChoice {
    DropIn,
    Breakthrough,
    Custom(Vec<RosterEntry>),
}

/// Optional replacements for the bundled tables. Relative paths resolve
/// against the config file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub pathway_catalog: Option<PathBuf>,
    pub market_split: Option<PathBuf>,
    pub reference_intensity: Option<PathBuf>,
    pub demand_history: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kkt_tol: f64,
    pub max_iter: usize,
    pub batch_width: usize,
    pub step_tol: f64,
    pub max_backtracks: usize,
    /// Compare AD against central differences at random interior points.
    pub fd_check: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let s = SqpSettings::default();
        OptimizerConfig {
            kkt_tol: s.kkt_tol,
            max_iter: s.max_iter,
            batch_width: s.batch_width,
            step_tol: s.step_tol,
            max_backtracks: s.max_backtracks,
            fd_check: false,
        }
    }
}

impl OptimizerConfig {
    pub fn sqp(&self) -> SqpSettings {
        SqpSettings {
            kkt_tol: self.kkt_tol,
            max_iter: self.max_iter,
            batch_width: self.batch_width,
            step_tol: self.step_tol,
            max_backtracks: self.max_backtracks,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub fit_left: bool,
    pub fit_asymmetry: bool,
    /// Shift the inflection by the income gap between 2024 and 2019 of the
    /// first background.
    pub covid_shift: bool,
    pub max_iter: usize,
}

/// Left asymptote and asymmetry are fixed unless asked for: a history that
/// only covers the lower flank of the curve does not identify them.
impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig { fit_left: false, fit_asymmetry: false, covid_shift: false, max_iter: CalibrationOptions::default().max_iter }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub repetitions: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { repetitions: 20 }
    }
}

fn default_formulation() -> Formulation {
    Formulation::Trend
}

fn default_energy() -> EnergyMode {
    EnergyMode::Optimized
}

fn default_roster() -> RosterChoice {
    RosterChoice::DropIn
}

fn default_backgrounds() -> Vec<String> {
    vec!["ssp2_26".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_formulation")]
    pub formulation: Formulation,
    #[serde(default = "default_energy")]
    pub energy: EnergyMode,
    #[serde(default = "default_roster")]
    pub roster: RosterChoice,
    /// Bundled labels or CSV paths.
    #[serde(default = "default_backgrounds")]
    pub backgrounds: Vec<String>,
    #[serde(default)]
    pub settings: ModelSettings,
    #[serde(default)]
    pub data: DataPaths,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub bench: BenchConfig,
    /// A previous `variables.json` added as an extra start point.
    #[serde(default)]
    pub warm_start: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

/// A parsed config with its inputs loaded and checked.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub data: ModelData,
    pub contexts: Vec<ScenarioContext>,
    pub roster: Vec<RosterEntry>,
}

impl LoadedRun {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        resolve(&self.base_dir, p)
    }

    pub fn history(&self) -> Result<Vec<HistoryRow>, CliError> {
        match &self.config.data.demand_history {
            Some(p) => load_history(&self.resolve(p)).map_err(|e| CliError::Data(e.to_string())),
            None => Ok(bundled::demand_history()),
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn check_config(c: &RunConfig) -> Result<(), CliError> {
    let o = &c.optimizer;
    if !(o.kkt_tol > 0.0) || o.max_iter == 0 || !(1..=aviopt::gradopt::MAX_BATCH_WIDTH).contains(&o.batch_width) {
        return Err(CliError::Config(format!("invalid optimizer settings: {o:?}")));
    }
    if c.bench.repetitions == 0 {
        return Err(CliError::Config("bench.repetitions must be at least 1".into()));
    }
    if c.backgrounds.is_empty() {
        return Err(CliError::Config("at least one background is required".into()));
    }
    c.settings.validate().map_err(|e| CliError::Config(e.to_string()))
}

/// Parse, validate and load every input before any computation.
pub fn load_run(config: RunConfig, base_dir: &Path) -> Result<LoadedRun, CliError> {
    check_config(&config)?;
    let mut data = ModelData::bundled();
    let paths = &config.data;
    if let Some(p) = &paths.pathway_catalog {
        data.catalog = parse_catalog(open(&resolve(base_dir, p))?).map_err(|e| CliError::Data(e.to_string()))?;
    }
    if let Some(p) = &paths.market_split {
        data.split = MarketSplit::parse(open(&resolve(base_dir, p))?).map_err(|e| CliError::Data(e.to_string()))?;
    }
    if let Some(p) = &paths.reference_intensity {
        data.reference = ReferenceIntensity::parse(open(&resolve(base_dir, p))?).map_err(|e| CliError::Data(e.to_string()))?;
    }
    let settings = &config.settings;
    let grid = settings.grid().map_err(|e| CliError::Config(e.to_string()))?;
    let mut contexts = Vec::with_capacity(config.backgrounds.len());
    for b in &config.backgrounds {
        let bg = if b.ends_with(".csv") {
            load_background(&resolve(base_dir, Path::new(b)), grid)
        } else if bundled::background_labels().contains(&b.as_str()) {
            bundled::background(b, grid)
        } else {
            return Err(CliError::Config(format!(
                "unknown background `{b}`; bundled: {}",
                bundled::background_labels().join(", ")
            )));
        }
        .map_err(|e| CliError::Data(e.to_string()))?;
        contexts.push(ScenarioContext::new(bg, settings, &data).map_err(CliError::from)?);
    }
    let roster = match &config.roster {
        RosterChoice::DropIn => drop_in_roster(),
        RosterChoice::Breakthrough => breakthrough_roster(settings.tech, &settings.sizing),
        RosterChoice::Custom(r) => r.clone(),
    };
    for e in &roster {
        e.validate(grid).map_err(CliError::from)?;
    }
    if let Some(p) = &config.warm_start {
        let p = resolve(base_dir, p);
        if !p.is_file() {
            return Err(CliError::Config(format!("warm start file {} not found", p.display())));
        }
    }
    Ok(LoadedRun { config, base_dir: base_dir.to_path_buf(), data, contexts, roster })
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::Config(m) => CliError::Config(m),
            PolicyError::Opt(e) => CliError::Run(e.to_string()),
            PolicyError::Eval(e) => CliError::Run(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}
