//! Market segmentation, supply shift, aircraft market shares, direct carrier
//! consumption and the demand-aversion burden.

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aircraft::{AircraftError, Carrier, Market, ReferenceIntensity};
use crate::controls::{delay_integrate, evaluate_coarse, evaluate_pulse, CoarseControl, ControlError, DelayState, RampedPulse};
use crate::scalar::Scalar;
use crate::store::{TimeGrid, TimeSeries};

/// Upper bound on the supply-shift ratio: at least 10% of trend supply is served.
pub const MAX_SUPPLY_SHIFT: f64 = 0.9;
/// Delay applied to coarse supply-shift and share controls, years.
pub const CONTROL_TAU: f64 = 4.0;
/// Fleet-renewal delay; pulses ramp over twice this.
pub const FLEET_TAU: f64 = 4.0;
/// Tolerance on the per-market share sum before it is reported.
pub const SHARE_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FleetError {
    #[error("market split: {0}")]
    Split(String),
    #[error(transparent)]
    Aircraft(#[from] AircraftError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("supply shift {value} for {market} in {year} outside [0, {MAX_SUPPLY_SHIFT}]")]
    ShiftOutOfBounds { market: Market, year: i32, value: f64 },
    #[error("burden parameters: {0}")]
    Burden(String),
    #[error("expected {expected} per-market series, got {got}")]
    MarketCount { expected: usize, got: usize },
}

/// Constant share of trend supply per market, in [`Market::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketSplit {
    shares: [f64; 5],
}

impl MarketSplit {
    pub fn new(shares: [f64; 5]) -> Result<Self, FleetError> {
        if shares.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(FleetError::Split(format!("share outside [0,1]: {shares:?}")));
        }
        let sum: f64 = shares.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(FleetError::Split(format!("shares sum to {sum}")));
        }
        Ok(MarketSplit { shares })
    }

    /// CSV with header `market,ask_share_2019`; every market exactly once.
    pub fn parse<R: Read>(reader: R) -> Result<Self, FleetError> {
        #[derive(Deserialize)]
        struct Row {
            market: String,
            ask_share_2019: f64,
        }
        let mut shares = [f64::NAN; 5];
        for rec in csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader).deserialize() {
            let row: Row = rec.map_err(|e| FleetError::Split(e.to_string()))?;
            let m: Market = row.market.parse()?;
            let slot = &mut shares[m as usize];
            if !slot.is_nan() {
                return Err(FleetError::Split(format!("duplicate market {m}")));
            }
            *slot = row.ask_share_2019;
        }
        if let Some(k) = shares.iter().position(|s| s.is_nan()) {
            return Err(FleetError::Split(format!("missing market {}", Market::ALL[k])));
        }
        Self::new(shares)
    }

    pub fn share(&self, market: Market) -> f64 {
        self.shares[market as usize]
    }

    pub fn shares(&self) -> &[f64; 5] {
        &self.shares
    }
}

/// Delayed supply-shift ratio per market, in [`Market::ALL`] order.
#[derive(Debug, Clone)]
pub struct SupplyShift<T> {
    pub ratios: Vec<TimeSeries<T>>,
}

impl<T: Scalar> SupplyShift<T> {
    pub fn none(grid: TimeGrid) -> Self {
        SupplyShift { ratios: vec![TimeSeries::zeros(grid); Market::ALL.len()] }
    }

    pub fn constant(grid: TimeGrid, values: [f64; 5]) -> Self {
        SupplyShift { ratios: values.iter().map(|v| TimeSeries::constant(grid, T::cst(*v))).collect() }
    }

    /// Interpolate each market's knots and pass them through a delay
    /// starting from zero.
    pub fn from_knots(controls: &[CoarseControl<T>], grid: TimeGrid, tau: f64) -> Result<Self, FleetError> {
        if controls.len() != Market::ALL.len() {
            return Err(FleetError::MarketCount { expected: Market::ALL.len(), got: controls.len() });
        }
        let ratios = controls
            .iter()
            .map(|c| delay_integrate(&evaluate_coarse(c, grid), DelayState::new(tau, T::zero())))
            .collect::<Result<_, _>>()?;
        Ok(SupplyShift { ratios })
    }

    fn check(&self) -> Result<(), FleetError> {
        if self.ratios.len() != Market::ALL.len() {
            return Err(FleetError::MarketCount { expected: Market::ALL.len(), got: self.ratios.len() });
        }
        for (m, s) in Market::ALL.iter().zip(&self.ratios) {
            let grid = s.grid();
            for (k, v) in s.iter().enumerate() {
                let v = v.re();
                if !(v >= -1e-12 && v <= MAX_SUPPLY_SHIFT + 1e-12) {
                    return Err(FleetError::ShiftOutOfBounds { market: *m, year: grid.year(k), value: v });
                }
            }
        }
        Ok(())
    }
}

/// `ASK_m = S_m·ASK_trend·(1 − SR_m)` per market.
pub fn market_ask<T: Scalar>(
    ask_trend: &TimeSeries<T>,
    split: &MarketSplit,
    shift: &SupplyShift<T>,
) -> Result<Vec<TimeSeries<T>>, FleetError> {
    shift.check()?;
    Ok(Market::ALL
        .iter()
        .zip(&shift.ratios)
        .map(|(m, sr)| {
            let s = T::cst(split.share(*m));
            ask_trend.zip_with(sr, |a, r| s * a * (T::one() - r))
        })
        .collect())
}

/// Delayed market share of one new design.
#[derive(Debug, Clone)]
pub struct AircraftShare<T> {
    pub market: Market,
    pub carrier: Carrier,
    /// MJ per seat-km.
    pub energy_per_ask: T,
    pub share: TimeSeries<T>,
}

impl<T: Scalar> AircraftShare<T> {
    /// Sample the pulse and delay it by the fleet-renewal time.
    pub fn from_pulse(
        market: Market,
        carrier: Carrier,
        energy_per_ask: T,
        pulse: &RampedPulse<T>,
        grid: TimeGrid,
        fleet_tau: f64,
    ) -> Result<Self, FleetError> {
        let share = delay_integrate(&evaluate_pulse(pulse, grid), DelayState::new(fleet_tau, T::zero()))?;
        Ok(AircraftShare { market, carrier, energy_per_ask, share })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShareViolation {
    pub market: Market,
    pub year: i32,
    pub excess: f64,
}

#[derive(Debug, Clone)]
pub struct FleetAsk<T> {
    /// Supply covered by each design, same order as the input shares.
    pub aircraft: Vec<TimeSeries<T>>,
    /// Supply left to the incumbent fleet, per market.
    pub fallback: Vec<TimeSeries<T>>,
    /// `1 − Σ shares` per market; the optimizer keeps it nonnegative.
    pub share_slack: Vec<TimeSeries<T>>,
    pub violations: Vec<ShareViolation>,
}

/// Split each market's supply between new designs and the incumbent fleet.
/// Share sums above one are reported, not clipped.
pub fn aircraft_ask<T: Scalar>(market_ask: &[TimeSeries<T>], shares: &[AircraftShare<T>]) -> FleetAsk<T> {
    let grid = market_ask[0].grid();
    let mut slack: Vec<TimeSeries<T>> = vec![TimeSeries::constant(grid, T::one()); Market::ALL.len()];
    for a in shares {
        let m = a.market as usize;
        slack[m] = slack[m].zip_with(&a.share, |s, x| s - x);
    }
    let aircraft = shares.iter().map(|a| a.share.mul(&market_ask[a.market as usize])).collect();
    let fallback = slack.iter().zip(market_ask).map(|(s, a)| s.mul(a)).collect();
    let mut violations = Vec::new();
    for (m, s) in Market::ALL.iter().zip(&slack) {
        for (k, v) in s.iter().enumerate() {
            if v.re() < -SHARE_SUM_TOLERANCE {
                violations.push(ShareViolation { market: *m, year: grid.year(k), excess: -v.re() });
            }
        }
    }
    FleetAsk { aircraft, fallback, share_slack: slack, violations }
}

/// Direct consumption per carrier in [`Carrier::ALL`] order, MJ/yr. The
/// incumbent fleet burns Jet-A at the market's reference intensity.
pub fn direct_energy_consumption<T: Scalar>(
    fleet: &FleetAsk<T>,
    shares: &[AircraftShare<T>],
    reference: &ReferenceIntensity,
) -> Result<Vec<TimeSeries<T>>, FleetError> {
    let grid = fleet.fallback[0].grid();
    let mut out = vec![TimeSeries::zeros(grid); Carrier::ALL.len()];
    for (a, ask) in shares.iter().zip(&fleet.aircraft) {
        let c = a.carrier as usize;
        out[c] = out[c].add(&ask.scale(a.energy_per_ask));
    }
    let jeta = Carrier::Jeta as usize;
    for (m, ask) in Market::ALL.iter().zip(&fleet.fallback) {
        out[jeta] = out[jeta].add(&ask.scale(T::cst(reference.get(*m)?)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BurdenParams {
    pub price_elasticity: f64,
    pub discount_rate: f64,
    /// Discounting reference year; grid start when absent.
    pub start_year: Option<i32>,
    /// Last year summed; grid end when absent.
    pub end_year: Option<i32>,
}

impl Default for BurdenParams {
    fn default() -> Self {
        BurdenParams { price_elasticity: -0.9, discount_rate: 0.03, start_year: None, end_year: None }
    }
}

impl BurdenParams {
    pub fn validate(&self) -> Result<(), FleetError> {
        if !(self.price_elasticity < 0.0) {
            return Err(FleetError::Burden(format!("price elasticity {} must be negative", self.price_elasticity)));
        }
        if !(self.discount_rate >= 0.0) {
            return Err(FleetError::Burden(format!("discount rate {} must be nonnegative", self.discount_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Burden<T> {
    /// Supplied-ASK-weighted mean price ratio per year.
    pub annual: TimeSeries<T>,
    pub discounted_total: T,
}

/// `θ(t) = Σ_m w_m·(1 − SR_m)^(1/ε)` with `w_m = ASK_m/ASK`, and
/// `Θ = Σ_t (1+d)^(t0−t)·θ(t)`.
pub fn burden<T: Scalar>(shift: &SupplyShift<T>, split: &MarketSplit, params: &BurdenParams) -> Result<Burden<T>, FleetError> {
    params.validate()?;
    shift.check()?;
    let grid = shift.ratios[0].grid();
    let inv_eps = T::cst(1.0 / params.price_elasticity);
    let annual = TimeSeries::from_fn(grid, |y| {
        let k = grid.index_of(y).expect("grid year");
        let (mut num, mut den) = (T::zero(), T::zero());
        for (m, sr) in Market::ALL.iter().zip(&shift.ratios) {
            let served = T::one() - sr[k];
            let w = T::cst(split.share(*m)) * served;
            num += w * (served.ln() * inv_eps).exp();
            den += w;
        }
        num / den
    });
    let t0 = params.start_year.unwrap_or(grid.start_year);
    let t1 = params.end_year.unwrap_or(grid.end_year);
    let base = 1.0 + params.discount_rate;
    let mut total = T::zero();
    for (k, y) in grid.years().enumerate() {
        if y < t0 || y > t1 {
            continue;
        }
        total += annual[k] * T::cst(base.powi(t0 - y));
    }
    Ok(Burden { annual, discounted_total: total })
}
