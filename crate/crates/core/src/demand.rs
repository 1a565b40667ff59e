//! Trend passenger demand from income, storyline adjustment, load factor and
//! seat supply.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gradopt::{least_squares, EvalError, GradError, LeastSquaresSettings, VectorFn};
use crate::scalar::Scalar;
use crate::store::{ScenarioBackground, TimeGrid, TimeSeries};

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("invalid logistic parameters: {0}")]
    InvalidParams(String),
    #[error("load factor must be positive, got {value} in {year}")]
    NonPositiveLoadFactor { year: i32, value: f64 },
    #[error("calibration needs at least {needed} rows, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("calibration data is degenerate: {0}")]
    Degenerate(String),
    #[error("calibration did not converge after {iterations} iterations")]
    NotConverged { best: LogisticParams, iterations: usize },
    #[error("history file: {0}")]
    History(String),
    #[error(transparent)]
    Grad(#[from] GradError),
}

/// Generalized logistic curve of per-capita traffic against income.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticParams {
    /// Left asymptote, pkm per capita.
    pub left: f64,
    /// Right asymptote, pkm per capita.
    pub right: f64,
    /// Income per capita at the inflection.
    pub inflection_income: f64,
    /// Growth rate per unit income.
    pub growth_rate: f64,
    /// Transition-shape constant.
    pub shape: f64,
    /// Asymmetry exponent.
    pub asymmetry: f64,
}

impl LogisticParams {
    /// Illustrative global parameters, not a published calibration.
    pub fn illustrative() -> Self {
        LogisticParams {
            left: 0.0,
            right: 3000.0,
            inflection_income: 18_500.0,
            growth_rate: 1.27e-4,
            shape: 1.0,
            asymmetry: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), DemandError> {
        let ok = self.left >= 0.0
            && self.right > self.left
            && self.growth_rate > 0.0
            && self.shape > 0.0
            && self.asymmetry > 0.0
            && self.inflection_income.is_finite();
        if ok {
            Ok(())
        } else {
            Err(DemandError::InvalidParams(format!("{self:?}")))
        }
    }

    fn to_array(self) -> [f64; 6] {
        [self.left, self.right, self.inflection_income, self.growth_rate, self.shape, self.asymmetry]
    }

    fn from_array(a: [f64; 6]) -> Self {
        LogisticParams {
            left: a[0],
            right: a[1],
            inflection_income: a[2],
            growth_rate: a[3],
            shape: a[4],
            asymmetry: a[5],
        }
    }
}

#[inline]
fn logistic<T: Scalar>(income: T, p: [T; 6]) -> T {
    let [l, r, iota, b, c, nu] = p;
    let lim = T::cst(700.0);
    let mut z = -b * (income - iota);
    if z > lim {
        z = lim;
    } else if z < -lim {
        z = -lim;
    }
    l + (r - l) * (c / (c + z.exp())).powf(T::one() / nu)
}

/// Per-capita RPK from income.
pub fn rpk_per_capita(income: &TimeSeries<f64>, params: &LogisticParams) -> Result<TimeSeries<f64>, DemandError> {
    params.validate()?;
    let p = params.to_array();
    Ok(income.map(|i| logistic(i, p)))
}

/// Storyline adjustment of the trend: an S-curve from 1 towards `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorylineFactor {
    pub target: f64,
    /// Income per capita in 2024.
    pub reference_income: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Multiplier `1 + (target − 1)·σ((I − 2 I_ref)/(2 I_ref))`.
pub fn storyline_multiplier(income: &TimeSeries<f64>, factor: &StorylineFactor) -> Result<TimeSeries<f64>, DemandError> {
    if !(factor.reference_income > 0.0) || !(factor.target > 0.0) {
        return Err(DemandError::InvalidParams(format!("{factor:?}")));
    }
    let twice = 2.0 * factor.reference_income;
    Ok(income.map(|i| 1.0 + (factor.target - 1.0) * sigmoid((i - twice) / twice)))
}

pub fn total_rpk(population: &TimeSeries<f64>, rpk_pc_story: &TimeSeries<f64>) -> TimeSeries<f64> {
    population.mul(rpk_pc_story)
}

const LF_START: f64 = 0.824;
const LF_END: f64 = 0.92;
const LF_START_YEAR: f64 = 2019.0;
const LF_END_YEAR: f64 = 2075.0;

/// Load factor at a year: quadratic with its vertex at saturation.
pub fn load_factor_at(year: f64) -> f64 {
    if year >= LF_END_YEAR {
        return LF_END;
    }
    let u = (LF_END_YEAR - year) / (LF_END_YEAR - LF_START_YEAR);
    LF_END - (LF_END - LF_START) * u * u
}

pub fn load_factor(grid: TimeGrid) -> TimeSeries<f64> {
    TimeSeries::from_fn(grid, |y| load_factor_at(y as f64))
}

pub fn ask_trend(rpk_trend: &TimeSeries<f64>, lf: &TimeSeries<f64>) -> Result<TimeSeries<f64>, DemandError> {
    for (k, v) in lf.iter().enumerate() {
        if !(*v > 0.0) {
            return Err(DemandError::NonPositiveLoadFactor { year: lf.grid().year(k), value: *v });
        }
    }
    Ok(rpk_trend.zip_with(lf, |r, l| r / l))
}

#[derive(Debug, Clone)]
pub struct DemandResult {
    pub rpk_pc_trend: TimeSeries<f64>,
    pub rpk_pc_story: TimeSeries<f64>,
    pub rpk_trend: TimeSeries<f64>,
    pub load_factor: TimeSeries<f64>,
    pub ask_trend: TimeSeries<f64>,
}

/// Full demand chain for a background.
pub fn project_demand(
    background: &ScenarioBackground,
    params: &LogisticParams,
    story: &StorylineFactor,
) -> Result<DemandResult, DemandError> {
    let income = &background.gdp_per_capita;
    let rpk_pc_trend = rpk_per_capita(income, params)?;
    let rpk_pc_story = rpk_pc_trend.mul(&storyline_multiplier(income, story)?);
    let rpk_trend = total_rpk(&background.population, &rpk_pc_story);
    let load_factor = load_factor(income.grid());
    let ask_trend = ask_trend(&rpk_trend, &load_factor)?;
    Ok(DemandResult { rpk_pc_trend, rpk_pc_story, rpk_trend, load_factor, ask_trend })
}

/// One observation of the income/traffic relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub year: i32,
    pub income_pc: f64,
    pub rpk_pc: f64,
}

pub fn parse_history<R: Read>(reader: R) -> Result<Vec<HistoryRow>, DemandError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        let row: HistoryRow = rec.map_err(|e| DemandError::History(e.to_string()))?;
        if !row.income_pc.is_finite() || !row.rpk_pc.is_finite() {
            return Err(DemandError::History(format!("non-finite value in {}", row.year)));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_history(path: &Path) -> Result<Vec<HistoryRow>, DemandError> {
    let f = std::fs::File::open(path).map_err(|e| DemandError::History(format!("{}: {e}", path.display())))?;
    parse_history(f)
}

/// Which logistic parameters the fit may move. The shape constant trades
/// off exactly against the inflection income, so it is held by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationOptions {
    pub fit_left: bool,
    pub fit_asymmetry: bool,
    /// Income gap `I(2024) − I(2019)` added to the inflection after fitting.
    pub covid_income_gap: Option<f64>,
    pub max_iter: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions { fit_left: true, fit_asymmetry: true, covid_income_gap: None, max_iter: 500 }
    }
}

pub const MIN_CALIBRATION_ROWS: usize = 10;

struct LogisticResiduals<'a> {
    rows: &'a [HistoryRow],
    base: [f64; 6],
    scale: [f64; 6],
    free: Vec<usize>,
    data_scale: f64,
}

impl LogisticResiduals<'_> {
    fn params<T: Scalar>(&self, q: &[T]) -> [T; 6] {
        let mut p = self.base.map(T::cst);
        for (k, &j) in self.free.iter().enumerate() {
            p[j] = T::cst(self.base[j]) + T::cst(self.scale[j]) * q[k];
        }
        p
    }
}

impl VectorFn for LogisticResiduals<'_> {
    fn n_inputs(&self) -> usize {
        self.free.len()
    }
    fn n_outputs(&self) -> usize {
        self.rows.len()
    }
    fn eval<T: Scalar>(&self, q: &[T]) -> Result<Vec<T>, EvalError> {
        let p = self.params(q);
        let valid = p[0].re() >= 0.0 && p[1].re() > p[0].re() && p[3].re() > 0.0 && p[5].re() > 0.0;
        if !valid {
            return Err(EvalError::new("calibrate_logistic", "parameters left the admissible set"));
        }
        let inv = T::cst(1.0 / self.data_scale);
        Ok(self
            .rows
            .iter()
            .map(|r| (logistic(T::cst(r.income_pc), p) - T::cst(r.rpk_pc)) * inv)
            .collect())
    }
}

/// Sum of squared residuals of `params` on `rows`.
pub fn sum_squared_residuals(rows: &[HistoryRow], params: &LogisticParams) -> f64 {
    let p = params.to_array();
    rows.iter().map(|r| (logistic(r.income_pc, p) - r.rpk_pc).powi(2)).sum()
}

/// Least-squares fit of the logistic curve to historical rows.
pub fn calibrate_logistic(
    rows: &[HistoryRow],
    init: &LogisticParams,
    options: &CalibrationOptions,
) -> Result<LogisticParams, DemandError> {
    if rows.len() < MIN_CALIBRATION_ROWS {
        return Err(DemandError::InsufficientData { needed: MIN_CALIBRATION_ROWS, got: rows.len() });
    }
    init.validate()?;
    let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.rpk_pc), b.max(r.rpk_pc)));
    let mean = rows.iter().map(|r| r.rpk_pc.abs()).sum::<f64>() / rows.len() as f64;
    if hi - lo <= 1e-9 * mean.max(1e-300) {
        return Err(DemandError::Degenerate("per-capita traffic is constant, asymptotes are unidentifiable".into()));
    }
    let (ilo, ihi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.income_pc), b.max(r.income_pc)));
    if ihi - ilo <= 0.0 {
        return Err(DemandError::Degenerate("income is constant".into()));
    }

    let base = init.to_array();
    let scale = [
        init.right.abs() * 0.01,
        init.right.abs(),
        init.inflection_income.abs().max(ihi - ilo),
        init.growth_rate.abs(),
        init.shape.abs(),
        init.asymmetry.abs(),
    ];
    let mut free = Vec::new();
    if options.fit_left {
        free.push(0);
    }
    free.extend([1, 2, 3]);
    if options.fit_asymmetry {
        free.push(5);
    }
    let problem = LogisticResiduals { rows, base, scale, free, data_scale: mean.max(1e-300) };
    let settings = LeastSquaresSettings { max_iter: options.max_iter, ..LeastSquaresSettings::default() };
    let fit = least_squares(&problem, &vec![0.0; problem.free.len()], &settings)?;
    let mut fitted = LogisticParams::from_array(problem.params(&fit.x));
    if !fit.converged {
        return Err(DemandError::NotConverged { best: fitted, iterations: fit.iterations });
    }
    if let Some(gap) = options.covid_income_gap {
        fitted.inflection_income += gap;
    }
    Ok(fitted)
}
