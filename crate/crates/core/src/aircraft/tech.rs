//! Technology parameters by entry-into-service year.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Component technology available to a design entering service in a given year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TechSnapshot<T> {
    /// Wh/kg
    pub battery_specific_energy: T,
    /// kW/kg
    pub emotor_specific_power: T,
    /// kW/kg
    pub electronics_specific_power: T,
    /// kW/kg
    pub fuelcell_specific_power: T,
    pub fuelcell_efficiency: T,
    pub lh2_tank_gravimetric_index: T,
    pub structural_weight_reduction: T,
}

impl<T: Scalar> TechSnapshot<T> {
    pub fn re(&self) -> TechSnapshot<f64> {
        TechSnapshot {
            battery_specific_energy: self.battery_specific_energy.re(),
            emotor_specific_power: self.emotor_specific_power.re(),
            electronics_specific_power: self.electronics_specific_power.re(),
            fuelcell_specific_power: self.fuelcell_specific_power.re(),
            fuelcell_efficiency: self.fuelcell_efficiency.re(),
            lh2_tank_gravimetric_index: self.lh2_tank_gravimetric_index.re(),
            structural_weight_reduction: self.structural_weight_reduction.re(),
        }
    }
}

impl TechSnapshot<f64> {
    pub fn lift<T: Scalar>(&self) -> TechSnapshot<T> {
        TechSnapshot {
            battery_specific_energy: T::cst(self.battery_specific_energy),
            emotor_specific_power: T::cst(self.emotor_specific_power),
            electronics_specific_power: T::cst(self.electronics_specific_power),
            fuelcell_specific_power: T::cst(self.fuelcell_specific_power),
            fuelcell_efficiency: T::cst(self.fuelcell_efficiency),
            lh2_tank_gravimetric_index: T::cst(self.lh2_tank_gravimetric_index),
            structural_weight_reduction: T::cst(self.structural_weight_reduction),
        }
    }

    pub fn is_valid(&self) -> bool {
        let positive = [
            self.battery_specific_energy,
            self.emotor_specific_power,
            self.electronics_specific_power,
            self.fuelcell_specific_power,
        ]
        .iter()
        .all(|v| *v > 0.0);
        let fractions = [self.fuelcell_efficiency, self.lh2_tank_gravimetric_index]
            .iter()
            .all(|v| *v > 0.0 && *v < 1.0);
        positive && fractions && (0.0..1.0).contains(&self.structural_weight_reduction)
    }
}

/// Position between the conservative (0) and optimistic (1) ends of each
/// projected range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TechScenario {
    pub lambda: f64,
}

impl TechScenario {
    pub const LOW: TechScenario = TechScenario { lambda: 0.0 };
    pub const MID: TechScenario = TechScenario { lambda: 0.5 };
    pub const HIGH: TechScenario = TechScenario { lambda: 1.0 };
}

pub const ANCHOR_YEARS: [f64; 3] = [2020.0, 2040.0, 2060.0];

/// (2020 value, 2040 range, 2060 range) per parameter, in snapshot field order.
const TABLE: [(f64, (f64, f64), (f64, f64)); 7] = [
    (200.0, (350.0, 800.0), (600.0, 1500.0)),
    (2.0, (10.0, 25.0), (15.0, 28.0)),
    (2.0, (15.0, 25.0), (20.0, 32.0)),
    (1.0, (2.0, 3.0), (3.0, 6.0)),
    (0.40, (0.45, 0.55), (0.50, 0.65)),
    (0.20, (0.30, 0.65), (0.35, 0.80)),
    (0.0, (0.15, 0.30), (0.20, 0.40)),
];

fn anchor_values(lambda: f64) -> [[f64; 3]; 7] {
    TABLE.map(|(v20, (l40, h40), (l60, h60))| [v20, l40 + lambda * (h40 - l40), l60 + lambda * (h60 - l60)])
}

/// Piecewise-linear interpolation between anchors, flat after the last one.
/// Years before the first anchor are clamped to it.
pub fn interpolate_tech<T: Scalar>(eis: T, scenario: TechScenario) -> TechSnapshot<T> {
    let first = T::cst(ANCHOR_YEARS[0]);
    let year = if eis < first {
        log::warn!("entry-into-service {} precedes {}; clamping", eis.re(), ANCHOR_YEARS[0]);
        first
    } else {
        eis
    };
    let a = anchor_values(scenario.lambda);
    let values: Vec<T> = a
        .iter()
        .map(|v| {
            if year.re() >= ANCHOR_YEARS[2] {
                T::cst(v[2])
            } else if year.re() >= ANCHOR_YEARS[1] {
                let w = (year - T::cst(ANCHOR_YEARS[1])) / T::cst(ANCHOR_YEARS[2] - ANCHOR_YEARS[1]);
                T::cst(v[1]) + w * T::cst(v[2] - v[1])
            } else {
                let w = (year - T::cst(ANCHOR_YEARS[0])) / T::cst(ANCHOR_YEARS[1] - ANCHOR_YEARS[0]);
                T::cst(v[0]) + w * T::cst(v[1] - v[0])
            }
        })
        .collect();
    TechSnapshot {
        battery_specific_energy: values[0],
        emotor_specific_power: values[1],
        electronics_specific_power: values[2],
        fuelcell_specific_power: values[3],
        fuelcell_efficiency: values[4],
        lh2_tank_gravimetric_index: values[5],
        structural_weight_reduction: values[6],
    }
}
