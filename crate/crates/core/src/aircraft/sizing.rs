//! Surrogate conceptual sizing: a mass budget closed by fixed-point iteration
//! on maximum take-off mass.

use serde::{Deserialize, Serialize};

use super::tech::TechSnapshot;
use super::{Architecture, ArchitectureTlar, MarketTlar};
use crate::scalar::Scalar;

pub const GRAVITY: f64 = 9.80665;

/// Conceptual-design constants. All are conventional magnitudes, not fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SizingConstants {
    pub lift_to_drag_turbine: f64,
    pub lift_to_drag_electric: f64,
    /// Fuel-to-thrust-power efficiency of gas turbines.
    pub turbine_chain_efficiency: f64,
    pub propeller_efficiency: f64,
    /// Motor and power electronics together.
    pub drivetrain_efficiency: f64,
    /// MJ/kg
    pub jeta_specific_energy: f64,
    /// MJ/kg
    pub lh2_specific_energy: f64,
    /// Airframe mass per unit MTOW before structural savings.
    pub airframe_fraction: f64,
    /// Turbine installation mass per unit MTOW.
    pub engine_fraction: f64,
    pub reserve: f64,
    /// Cap on MTOW as a multiple of the zero-energy design mass.
    pub mass_cap_factor: f64,
    pub payload_per_seat_kg: f64,
    pub max_iterations: usize,
    pub relative_tolerance: f64,
}

impl Default for SizingConstants {
    fn default() -> Self {
        SizingConstants {
            lift_to_drag_turbine: 17.0,
            lift_to_drag_electric: 15.0,
            turbine_chain_efficiency: 0.37,
            propeller_efficiency: 0.80,
            drivetrain_efficiency: 0.95,
            jeta_specific_energy: 43.2,
            lh2_specific_energy: 120.0,
            airframe_fraction: 0.42,
            engine_fraction: 0.07,
            reserve: 0.10,
            mass_cap_factor: 6.0,
            payload_per_seat_kg: 100.0,
            max_iterations: 200,
            relative_tolerance: 1e-8,
        }
    }
}

/// Outcome of sizing one design.
#[derive(Debug, Clone, Copy)]
pub struct SizedDesign<T> {
    pub mtow_kg: T,
    /// MJ of block energy per seat-km.
    pub energy_per_ask: T,
    pub feasible: bool,
    /// `1 − MTOW/cap` when converged, −1 when the iteration diverges.
    pub feasibility_margin: T,
    /// Smooth margin `(1 − f) − (1 − f₀)/cap_factor`, sign-equivalent to
    /// the converged margin, with `f` the MTOW-proportional mass fraction.
    pub headroom: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Mass per unit MTOW of each budget term, plus block energy per unit MTOW.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Fractions<T> {
    pub structure: T,
    pub propulsion: T,
    pub energy: T,
    /// J of block energy per kg MTOW.
    pub block_energy: T,
}

/// ISA troposphere speed of sound at `altitude_kft`.
pub fn speed_of_sound(altitude_kft: f64) -> f64 {
    let h = altitude_kft * 304.8;
    let temp = 288.15 - 0.0065 * h;
    (1.4 * 287.053 * temp).sqrt()
}

pub(crate) fn fractions<T: Scalar>(
    arch: &ArchitectureTlar,
    market: &MarketTlar,
    tech: &TechSnapshot<T>,
    c: &SizingConstants,
) -> Fractions<T> {
    let range_m = T::cst(market.range_km * 1000.0);
    let g = T::cst(GRAVITY);
    let one = T::one();
    let reserve = T::cst(1.0 + c.reserve);
    let structure = T::cst(c.airframe_fraction) * (one - tech.structural_weight_reduction);
    let speed = T::cst(arch.cruise_mach * speed_of_sound(arch.cruise_altitude_kft));
    let electric_ld = T::cst(c.lift_to_drag_electric);
    // Cruise shaft power per kg of MTOW, W/kg.
    let shaft = g * speed / (electric_ld * T::cst(c.propeller_efficiency));
    let kw = T::cst(1000.0);
    let electric_chain = T::cst(c.propeller_efficiency * c.drivetrain_efficiency);
    let breguet = |ld: f64, eta: T, e_mj: f64| {
        // Fuel mass per kg MTOW.
        one - (-(range_m * g) / (T::cst(ld) * eta * T::cst(e_mj * 1e6))).exp()
    };
    match arch.architecture {
        Architecture::JetaTurbine | Architecture::Lh2Turbine => {
            let (e, hydrogen) = match arch.architecture {
                Architecture::JetaTurbine => (c.jeta_specific_energy, false),
                _ => (c.lh2_specific_energy, true),
            };
            let fuel = breguet(c.lift_to_drag_turbine, T::cst(c.turbine_chain_efficiency), e);
            let tank = if hydrogen {
                let gi = tech.lh2_tank_gravimetric_index;
                fuel * (one - gi) / gi
            } else {
                T::zero()
            };
            Fractions {
                structure,
                propulsion: T::cst(c.engine_fraction),
                energy: fuel + tank,
                block_energy: fuel * T::cst(e * 1e6) * reserve,
            }
        }
        Architecture::BatteryElectric => {
            let motors = shaft / (tech.emotor_specific_power * kw) + shaft / (tech.electronics_specific_power * kw);
            let mission = range_m * g / (electric_ld * electric_chain);
            let battery = mission * reserve / (tech.battery_specific_energy * T::cst(3600.0));
            Fractions { structure, propulsion: motors, energy: battery, block_energy: mission * reserve }
        }
        Architecture::Lh2Fuelcell => {
            let motors = shaft / (tech.emotor_specific_power * kw)
                + shaft / (tech.electronics_specific_power * kw)
                + shaft / (tech.fuelcell_specific_power * kw);
            let eta = electric_chain * tech.fuelcell_efficiency;
            let fuel = breguet(c.lift_to_drag_electric, eta, c.lh2_specific_energy);
            let gi = tech.lh2_tank_gravimetric_index;
            Fractions {
                structure,
                propulsion: motors,
                energy: fuel + fuel * (one - gi) / gi,
                block_energy: fuel * T::cst(c.lh2_specific_energy * 1e6) * reserve,
            }
        }
    }
}

/// Size the design by fixed-point iteration, starting from `mtow_start`
/// (the zero-energy mass when `None`).
pub fn size_with_start<T: Scalar>(
    arch: &ArchitectureTlar,
    market: &MarketTlar,
    tech: &TechSnapshot<T>,
    c: &SizingConstants,
    mtow_start: Option<T>,
) -> SizedDesign<T> {
    let fr = fractions(arch, market, tech, c);
    let payload = T::cst(market.seats * c.payload_per_seat_kg);
    let one = T::one();
    let fixed = fr.structure + fr.propulsion;
    let zero_energy = payload / (one - fixed);
    let cap = zero_energy * T::cst(c.mass_cap_factor);
    let total = fixed + fr.energy;
    let headroom = (one - total) - (one - fixed) / T::cst(c.mass_cap_factor);

    let mut mtow = mtow_start.unwrap_or(zero_energy);
    let mut converged = false;
    let mut iterations = 0;
    let blowup = cap.re() * 1e3;
    while iterations < c.max_iterations {
        iterations += 1;
        let next = payload + mtow * fr.structure + mtow * fr.propulsion + mtow * fr.energy;
        let change = ((next - mtow) / next).abs().re();
        mtow = next;
        if !mtow.re().is_finite() || mtow.re() > blowup {
            break;
        }
        if change < c.relative_tolerance {
            converged = true;
            break;
        }
    }
    if converged {
        // Newton polish on m = F(m): removes the iteration-count dependence
        // and carries implicit-function tangents.
        let residual = payload + mtow * total - mtow;
        mtow -= residual / (total - one);
    }
    let seat_km = T::cst(market.seats * market.range_km);
    if converged && mtow <= cap {
        SizedDesign {
            mtow_kg: mtow,
            energy_per_ask: fr.block_energy * mtow / (seat_km * T::cst(1e6)),
            feasible: true,
            feasibility_margin: one - mtow / cap,
            headroom,
            iterations,
            converged,
        }
    } else {
        // Continue the intensity at the capped mass so evaluation stays
        // finite; the negative margin carries the infeasibility.
        SizedDesign {
            mtow_kg: if converged { mtow } else { cap },
            energy_per_ask: fr.block_energy * cap / (seat_km * T::cst(1e6)),
            feasible: false,
            feasibility_margin: if converged { one - mtow / cap } else { -one },
            headroom,
            iterations,
            converged,
        }
    }
}

pub fn size_aircraft<T: Scalar>(
    arch: &ArchitectureTlar,
    market: &MarketTlar,
    tech: &TechSnapshot<T>,
    c: &SizingConstants,
) -> SizedDesign<T> {
    size_with_start(arch, market, tech, c, None)
}
