//! Annual time grid, time series and background scenario ingestion.

use std::io::Read;
use std::ops::Index;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("need ≥2 years of data, got {0}")]
    TooFewPoints(usize),
    #[error("duplicate year {0}")]
    DuplicateYear(i32),
    #[error("invalid grid {start}..={end}")]
    InvalidGrid { start: i32, end: i32 },
    #[error("series length {got} does not match grid length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Annual simulation grid, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start_year: i32,
    pub end_year: i32,
}

impl TimeGrid {
    pub fn new(start_year: i32, end_year: i32) -> Result<Self, StoreError> {
        if start_year >= end_year {
            return Err(StoreError::InvalidGrid { start: start_year, end: end_year });
        }
        Ok(TimeGrid { start_year, end_year })
    }

    pub fn len(&self) -> usize {
        (self.end_year - self.start_year + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn year(&self, index: usize) -> i32 {
        self.start_year + index as i32
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.start_year..=self.end_year
    }

    pub fn index_of(&self, year: i32) -> Option<usize> {
        (self.start_year..=self.end_year).contains(&year).then(|| (year - self.start_year) as usize)
    }

    pub fn horizon(&self) -> f64 {
        (self.end_year - self.start_year) as f64
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid { start_year: 2020, end_year: 2070 }
    }
}

/// Real-valued series on a [`TimeGrid`], one value per year.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    grid: TimeGrid,
    values: Vec<T>,
}

impl<T: Scalar> TimeSeries<T> {
    pub fn new(grid: TimeGrid, values: Vec<T>) -> Result<Self, StoreError> {
        if values.len() != grid.len() {
            return Err(StoreError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(TimeSeries { grid, values })
    }

    pub fn constant(grid: TimeGrid, value: T) -> Self {
        TimeSeries { grid, values: vec![value; grid.len()] }
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn from_fn(grid: TimeGrid, mut f: impl FnMut(i32) -> T) -> Self {
        TimeSeries { grid, values: grid.years().map(&mut f).collect() }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.values.iter()
    }

    pub fn at_year(&self, year: i32) -> Option<T> {
        self.grid.index_of(year).map(|i| self.values[i])
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> TimeSeries<U> {
        TimeSeries { grid: self.grid, values: self.values.iter().map(|v| f(*v)).collect() }
    }

    /// Elementwise combination; panics if the grids differ.
    pub fn zip_with(&self, other: &TimeSeries<T>, f: impl Fn(T, T) -> T) -> TimeSeries<T> {
        assert_eq!(self.grid, other.grid, "series on different grids");
        TimeSeries {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn add(&self, other: &TimeSeries<T>) -> TimeSeries<T> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn mul(&self, other: &TimeSeries<T>) -> TimeSeries<T> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, k: T) -> TimeSeries<T> {
        self.map(|v| v * k)
    }

    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    /// Running sum (rectangle rule with a one-year step).
    pub fn cumulative(&self) -> TimeSeries<T> {
        let mut acc = T::zero();
        TimeSeries {
            grid: self.grid,
            values: self
                .values
                .iter()
                .map(|v| {
                    acc += *v;
                    acc
                })
                .collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.all_finite())
    }

    /// Primal values as `f64`.
    pub fn re(&self) -> TimeSeries<f64> {
        TimeSeries { grid: self.grid, values: self.values.iter().map(|v| v.re()).collect() }
    }
}

impl TimeSeries<f64> {
    /// Lift a plain series into another scalar type as constants.
    pub fn lift<T: Scalar>(&self) -> TimeSeries<T> {
        TimeSeries { grid: self.grid, values: self.values.iter().map(|v| T::cst(*v)).collect() }
    }
}

impl<T> Index<usize> for TimeSeries<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}

/// Piecewise-linear interpolation through `(year, value)` knots with flat
/// extrapolation. Knots must be strictly increasing in year.
pub fn interp_flat(knots: &[(f64, f64)], year: f64) -> f64 {
    let (first, last) = (knots[0], knots[knots.len() - 1]);
    if year <= first.0 {
        return first.1;
    }
    if year >= last.0 {
        return last.1;
    }
    let hi = knots.partition_point(|(y, _)| *y <= year);
    let (y0, v0) = knots[hi - 1];
    let (y1, v1) = knots[hi];
    if year == y0 {
        return v0;
    }
    v0 + (v1 - v0) * (year - y0) / (y1 - y0)
}

/// Resample raw `(year, value)` pairs onto `grid`: linear inside the data
/// range, flat outside it.
pub fn resample(pairs: &[(i32, f64)], grid: TimeGrid) -> Result<TimeSeries<f64>, StoreError> {
    if pairs.len() < 2 {
        return Err(StoreError::TooFewPoints(pairs.len()));
    }
    for w in pairs.windows(2) {
        if w[1].0 == w[0].0 {
            return Err(StoreError::DuplicateYear(w[0].0));
        }
        if w[1].0 < w[0].0 {
            return Err(StoreError::Format(format!("years not increasing at {}", w[1].0)));
        }
    }
    if let Some((y, v)) = pairs.iter().find(|(_, v)| !v.is_finite()) {
        return Err(StoreError::Validation(format!("non-finite value {v} at {y}")));
    }
    let knots: Vec<(f64, f64)> = pairs.iter().map(|(y, v)| (*y as f64, *v)).collect();
    Ok(TimeSeries::from_fn(grid, |y| interp_flat(&knots, y as f64)))
}

/// Socioeconomic and energy-system drivers of one background scenario.
#[derive(Debug, Clone)]
pub struct ScenarioBackground {
    pub label: String,
    /// persons
    pub population: TimeSeries<f64>,
    /// constant currency per person per year
    pub gdp_per_capita: TimeSeries<f64>,
    /// EJ/yr
    pub biomass_production: TimeSeries<f64>,
    /// EJ/yr
    pub electricity_production: TimeSeries<f64>,
    /// gCO2/MJ
    pub electricity_emission_factor: TimeSeries<f64>,
}

impl ScenarioBackground {
    pub fn grid(&self) -> TimeGrid {
        self.population.grid()
    }

    /// Multiply population by `k`; used to build degenerate test backgrounds.
    pub fn with_population_scaled(mut self, k: f64) -> Self {
        self.population = self.population.scale(k);
        self
    }
}

pub const BACKGROUND_COLUMNS: [&str; 6] =
    ["year", "population", "gdp_per_capita", "biomass_ej", "electricity_ej", "elec_ef_gco2_mj"];

/// Read a background CSV from disk and resample it onto `grid`.
pub fn load_background(path: &Path, grid: TimeGrid) -> Result<ScenarioBackground, StoreError> {
    let file = std::fs::File::open(path)
        .map_err(|source| StoreError::Io { path: path.display().to_string(), source })?;
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_background(file, &label, grid)
}

pub fn parse_background<R: Read>(
    reader: R,
    label: &str,
    grid: TimeGrid,
) -> Result<ScenarioBackground, StoreError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(BACKGROUND_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| StoreError::Schema(format!("missing column `{name}`")))?;
    }
    let mut cols: [Vec<(i32, f64)>; 5] = Default::default();
    let mut prev_year: Option<i32> = None;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| -> Result<&str, StoreError> {
            rec.get(idx[k]).ok_or_else(|| StoreError::Format(format!("row {} is short", line + 2)))
        };
        let year: i32 = field(0)?
            .parse()
            .map_err(|_| StoreError::Format(format!("bad year on row {}", line + 2)))?;
        if let Some(p) = prev_year {
            if year == p {
                return Err(StoreError::DuplicateYear(year));
            }
            if year < p {
                return Err(StoreError::Format(format!("years not increasing at {year}")));
            }
        }
        prev_year = Some(year);
        for k in 1..6 {
            let v: f64 = field(k)?.parse().map_err(|_| {
                StoreError::Format(format!("bad `{}` on row {}", BACKGROUND_COLUMNS[k], line + 2))
            })?;
            if !v.is_finite() {
                return Err(StoreError::Validation(format!("non-finite `{}` in {year}", BACKGROUND_COLUMNS[k])));
            }
            if v < 0.0 {
                return Err(StoreError::Validation(format!(
                    "negative `{}` in {year}",
                    BACKGROUND_COLUMNS[k]
                )));
            }
            // Zero population is an empty-demand scenario; zero income or
            // resource production would leave the caps undefined.
            if (2..5).contains(&k) && v == 0.0 {
                return Err(StoreError::Validation(format!("`{}` must be positive in {year}", BACKGROUND_COLUMNS[k])));
            }
            cols[k - 1].push((year, v));
        }
    }
    let n = cols[0].len();
    if n < 2 {
        return Err(StoreError::TooFewPoints(n));
    }
    let [pop, gdp, bio, elec, ef] = cols;
    Ok(ScenarioBackground {
        label: label.to_string(),
        population: resample(&pop, grid)?,
        gdp_per_capita: resample(&gdp, grid)?,
        biomass_production: resample(&bio, grid)?,
        electricity_production: resample(&elec, grid)?,
        electricity_emission_factor: resample(&ef, grid)?,
    })
}
