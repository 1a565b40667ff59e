//! Aircraft technology, market requirements and surrogate sizing.

mod sizing;
mod tech;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use sizing::{size_aircraft, size_with_start, speed_of_sound, SizedDesign, SizingConstants, GRAVITY};
pub use tech::{interpolate_tech, TechScenario, TechSnapshot, ANCHOR_YEARS};

#[derive(Debug, Error)]
pub enum AircraftError {
    #[error("unknown market `{0}`")]
    UnknownMarket(String),
    #[error("unknown architecture `{0}`")]
    UnknownArchitecture(String),
    #[error("no reference intensity for market `{0}`")]
    MissingReference(String),
    #[error("reference intensity table: {0}")]
    Reference(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Market {
    General,
    Commuter,
    Regional,
    ShortMedium,
    LongRange,
}

impl Market {
    pub const ALL: [Market; 5] = [Market::General, Market::Commuter, Market::Regional, Market::ShortMedium, Market::LongRange];

    pub fn name(self) -> &'static str {
        match self {
            Market::General => "general",
            Market::Commuter => "commuter",
            Market::Regional => "regional",
            Market::ShortMedium => "short_medium",
            Market::LongRange => "long_range",
        }
    }

    /// Default top-level requirements of the market segment.
    pub fn tlar(self) -> MarketTlar {
        let (range_km, seats, lifetime_years) = match self {
            Market::General => (500.0, 19.0, 18.5),
            Market::Commuter => (1500.0, 50.0, 15.3),
            Market::Regional => (4500.0, 80.0, 23.5),
            Market::ShortMedium => (8000.0, 120.0, 26.6),
            Market::LongRange => (15000.0, 250.0, 24.6),
        };
        MarketTlar { market: self, range_km, seats, lifetime_years }
    }
}

impl fmt::Display for Market {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Market {
    type Err = AircraftError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Market::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| AircraftError::UnknownMarket(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketTlar {
    pub market: Market,
    pub range_km: f64,
    pub seats: f64,
    pub lifetime_years: f64,
}

/// Final energy carrier an architecture draws on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Carrier {
    Jeta,
    Lh2,
    BatteryElectricity,
}

impl Carrier {
    pub const ALL: [Carrier; 3] = [Carrier::Jeta, Carrier::Lh2, Carrier::BatteryElectricity];

    /// Name of the matching final energy in the production network.
    pub fn energy_name(self) -> &'static str {
        match self {
            Carrier::Jeta => "jeta",
            Carrier::Lh2 => "lh2",
            Carrier::BatteryElectricity => "battery_electricity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    JetaTurbine,
    Lh2Turbine,
    BatteryElectric,
    Lh2Fuelcell,
}

impl Architecture {
    pub const ALL: [Architecture; 4] =
        [Architecture::JetaTurbine, Architecture::Lh2Turbine, Architecture::BatteryElectric, Architecture::Lh2Fuelcell];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::JetaTurbine => "jeta_turbine",
            Architecture::Lh2Turbine => "lh2_turbine",
            Architecture::BatteryElectric => "battery_electric",
            Architecture::Lh2Fuelcell => "lh2_fuelcell",
        }
    }

    pub fn carrier(self) -> Carrier {
        match self {
            Architecture::JetaTurbine => Carrier::Jeta,
            Architecture::Lh2Turbine | Architecture::Lh2Fuelcell => Carrier::Lh2,
            Architecture::BatteryElectric => Carrier::BatteryElectricity,
        }
    }

    pub fn tlar(self) -> ArchitectureTlar {
        let (cruise_mach, cruise_altitude_kft) = match self {
            Architecture::JetaTurbine | Architecture::Lh2Turbine => (0.75, 27.0),
            Architecture::BatteryElectric | Architecture::Lh2Fuelcell => (0.5, 20.0),
        };
        ArchitectureTlar { architecture: self, cruise_mach, cruise_altitude_kft }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = AircraftError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| AircraftError::UnknownArchitecture(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureTlar {
    pub architecture: Architecture,
    pub cruise_mach: f64,
    pub cruise_altitude_kft: f64,
}

/// A sized design for one (architecture, market, entry year, technology).
#[derive(Debug, Clone, Copy)]
pub struct AircraftDesign<T> {
    pub architecture: Architecture,
    pub market: Market,
    pub eis: T,
    pub tech: TechSnapshot<T>,
    pub mtow_kg: T,
    /// MJ per seat-km.
    pub energy_per_ask: T,
    pub feasible: bool,
    pub feasibility_margin: T,
    pub headroom: T,
}

/// Interpolate technology at `eis` and size the design.
pub fn design_at<T: Scalar>(
    architecture: Architecture,
    market: &MarketTlar,
    eis: T,
    scenario: TechScenario,
    constants: &SizingConstants,
) -> AircraftDesign<T> {
    let tech = interpolate_tech(eis, scenario);
    let sized = size_aircraft(&architecture.tlar(), market, &tech, constants);
    AircraftDesign {
        architecture,
        market: market.market,
        eis,
        tech,
        mtow_kg: sized.mtow_kg,
        energy_per_ask: sized.energy_per_ask,
        feasible: sized.feasible,
        feasibility_margin: sized.feasibility_margin,
        headroom: sized.headroom,
    }
}

/// 2019 mean fleet energy intensity per market, MJ per seat-km.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceIntensity {
    values: BTreeMap<Market, f64>,
}

impl ReferenceIntensity {
    pub fn parse<R: Read>(reader: R) -> Result<Self, AircraftError> {
        #[derive(Deserialize)]
        struct Row {
            market: String,
            mj_per_ask_2019: f64,
        }
        let mut values = BTreeMap::new();
        for rec in csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader).deserialize() {
            let row: Row = rec.map_err(|e| AircraftError::Reference(e.to_string()))?;
            let m: Market = row.market.parse()?;
            if !(row.mj_per_ask_2019 > 0.0 && row.mj_per_ask_2019.is_finite()) {
                return Err(AircraftError::Reference(format!("non-positive intensity for {m}")));
            }
            values.insert(m, row.mj_per_ask_2019);
        }
        Ok(ReferenceIntensity { values })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Market, f64)>) -> Self {
        ReferenceIntensity { values: pairs.into_iter().collect() }
    }

    pub fn get(&self, market: Market) -> Result<f64, AircraftError> {
        self.values.get(&market).copied().ok_or_else(|| AircraftError::MissingReference(market.name().into()))
    }
}

/// Intensity of the 2019 fleet serving `market`.
pub fn fleet_reference_intensity(table: &ReferenceIntensity, market: &MarketTlar) -> Result<f64, AircraftError> {
    table.get(market.market)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    fn c() -> SizingConstants {
        SizingConstants::default()
    }

    fn tech_2020() -> TechSnapshot<f64> {
        interpolate_tech(2020.0, TechScenario::MID)
    }

    #[test]
    fn battery_general_2020_infeasible() {
        let d = size_aircraft(&Architecture::BatteryElectric.tlar(), &Market::General.tlar(), &tech_2020(), &c());
        assert!(!d.feasible);
        assert!(d.headroom < 0.0);
    }

    #[test]
    fn structural_reduction_lowers_intensity() {
        for arch in Architecture::ALL {
            let mut lo = interpolate_tech(2045.0, TechScenario::MID);
            lo.structural_weight_reduction = 0.0;
            let hi = TechSnapshot { structural_weight_reduction: 0.3, ..lo };
            let m = Market::Commuter.tlar();
            let a = size_aircraft(&arch.tlar(), &m, &lo, &c());
            let b = size_aircraft(&arch.tlar(), &m, &hi, &c());
            if !(a.feasible && b.feasible) {
                assert_ne!(arch, Architecture::JetaTurbine);
                continue;
            }
            assert!(b.energy_per_ask < a.energy_per_ask, "{arch}");
        }
    }

    #[test]
    fn jeta_short_medium_intensity_band() {
        let d = size_aircraft(&Architecture::JetaTurbine.tlar(), &Market::ShortMedium.tlar(), &tech_2020(), &c());
        assert!(d.feasible);
        assert!((0.4..=1.5).contains(&d.energy_per_ask), "{}", d.energy_per_ask);
    }

    #[test]
    fn every_jeta_market_feasible_from_2020() {
        for m in Market::ALL {
            for lam in [0.0, 1.0] {
                let d = design_at(Architecture::JetaTurbine, &m.tlar(), 2020.0, TechScenario { lambda: lam }, &c());
                assert!(d.feasible, "{m}");
            }
        }
    }

    /// The budget is affine in MTOW, so the fixed point has a closed form.
    #[test]
    fn fixed_point_matches_closed_form() {
        for arch in Architecture::ALL {
            for m in Market::ALL {
                let tech = interpolate_tech(2050.0, TechScenario::HIGH);
                let fr = sizing::fractions(&arch.tlar(), &m.tlar(), &tech, &c());
                let d = size_aircraft(&arch.tlar(), &m.tlar(), &tech, &c());
                if !d.feasible {
                    continue;
                }
                let closed = m.tlar().seats * 100.0 / (1.0 - fr.structure - fr.propulsion - fr.energy);
                assert!((d.mtow_kg - closed).abs() <= 1e-10 * closed, "{arch} {m}");
            }
        }
    }

    #[test]
    fn restart_from_twice_reconverges() {
        for arch in Architecture::ALL {
            let tech = interpolate_tech(2055.0_f64, TechScenario::MID);
            let m = Market::Commuter.tlar();
            let d = size_aircraft(&arch.tlar(), &m, &tech, &c());
            if !d.converged {
                continue;
            }
            let again = size_with_start(&arch.tlar(), &m, &tech, &c(), Some(2.0 * d.mtow_kg));
            assert!(again.converged);
            assert!((again.mtow_kg - d.mtow_kg).abs() <= 1e-6 * d.mtow_kg);
        }
    }

    #[test]
    fn divergent_margin_is_minus_one() {
        let d = size_aircraft(&Architecture::BatteryElectric.tlar(), &Market::LongRange.tlar(), &tech_2020(), &c());
        assert!(!d.converged && !d.feasible);
        assert_eq!(d.feasibility_margin, -1.0);
        assert!(d.energy_per_ask.is_finite() && d.energy_per_ask > 0.0);
    }

    #[test]
    fn tank_mass_vanishes_at_unit_index() {
        let mut tech = interpolate_tech(2060.0, TechScenario::HIGH);
        let m = Market::Regional.tlar();
        tech.lh2_tank_gravimetric_index = 1.0 - 1e-12;
        let fr = sizing::fractions(&Architecture::Lh2Turbine.tlar(), &m, &tech, &c());
        let fuel_only =
            1.0 - (-(m.range_km * 1e3 * GRAVITY) / (17.0 * 0.37 * 120e6)).exp();
        assert!((fr.energy - fuel_only).abs() < 1e-9);
    }

    #[test]
    fn reference_table() {
        let r = bundled::reference_intensity();
        for m in Market::ALL {
            assert!(fleet_reference_intensity(&r, &m.tlar()).unwrap() > 0.0);
        }
        assert!(r.get(Market::General).unwrap() > r.get(Market::LongRange).unwrap());
        let partial = ReferenceIntensity::from_pairs([(Market::General, 1.0)]);
        assert!(matches!(partial.get(Market::Regional), Err(AircraftError::MissingReference(_))));
        assert!("supersonic".parse::<Market>().is_err());
    }

    #[test]
    fn new_designs_beat_reference_fleet() {
        let r = bundled::reference_intensity();
        for m in Market::ALL {
            let d = design_at(Architecture::JetaTurbine, &m.tlar(), 2030.0, TechScenario::LOW, &c());
            assert!(d.energy_per_ask < r.get(m).unwrap(), "{m}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn base() -> impl Strategy<Value = (TechSnapshot<f64>, usize, usize)> {
            (2020.0f64..2060.0, 0.0f64..1.0, 0usize..4, 0usize..5)
                .prop_map(|(y, l, a, m)| (interpolate_tech(y, TechScenario { lambda: l }), a, m))
        }

        fn bump(t: &TechSnapshot<f64>, k: usize, factor: f64) -> TechSnapshot<f64> {
            let mut t = *t;
            match k {
                0 => t.battery_specific_energy *= factor,
                1 => t.emotor_specific_power *= factor,
                2 => t.electronics_specific_power *= factor,
                3 => t.fuelcell_specific_power *= factor,
                4 => t.fuelcell_efficiency = (t.fuelcell_efficiency * factor).min(0.99),
                5 => t.lh2_tank_gravimetric_index = (t.lh2_tank_gravimetric_index * factor).min(0.99),
                _ => t.structural_weight_reduction = (t.structural_weight_reduction * factor + 0.01).min(0.9),
            }
            t
        }

        proptest! {
            #[test]
            fn intensity_nonincreasing_in_beneficial_tech(
                (tech, a, m) in base(), k in 0usize..7, factor in 1.0f64..2.0,
            ) {
                let arch = Architecture::ALL[a].tlar();
                let mk = Market::ALL[m].tlar();
                let better = bump(&tech, k, factor);
                let d0 = size_aircraft(&arch, &mk, &tech, &c());
                let d1 = size_aircraft(&arch, &mk, &better, &c());
                if d0.feasible && d1.feasible {
                    prop_assert!(d1.energy_per_ask <= d0.energy_per_ask * (1.0 + 1e-12));
                }
                prop_assert!(d1.headroom >= d0.headroom - 1e-12);
                prop_assert!(!d0.feasible || d1.feasible);
            }

            #[test]
            fn battery_feasibility_monotone(
                se in 100.0f64..2000.0, extra in 0.0f64..1000.0, m in 0usize..5, y in 2020.0f64..2060.0,
            ) {
                let mut t = interpolate_tech(y, TechScenario::MID);
                t.battery_specific_energy = se;
                let better = TechSnapshot { battery_specific_energy: se + extra, ..t };
                let arch = Architecture::BatteryElectric.tlar();
                let mk = Market::ALL[m].tlar();
                let d0 = size_aircraft(&arch, &mk, &t, &c());
                let d1 = size_aircraft(&arch, &mk, &better, &c());
                prop_assert!(!d0.feasible || d1.feasible);
            }
        }
    }
}
