//! Demand → fleet → carrier consumption → energy mix → CO2, for one
//! background and one set of physical policy variables.

use super::{PolicyError, RosterEntry, ScenarioContext};
use crate::aircraft::{design_at, Carrier};
use crate::controls::{delay_integrate, evaluate_coarse, CoarseControl, DelayState, RampedPulse};
use crate::energymix::{evaluate_mix, total_co2, MixResult, PathwayShares};
use crate::fleet::{
    aircraft_ask, burden, direct_energy_consumption, market_ask, AircraftShare, Burden, FleetAsk, SupplyShift,
    CONTROL_TAU, FLEET_TAU,
};
use crate::scalar::Scalar;
use crate::store::TimeSeries;

/// Policy variables in physical units.
#[derive(Debug, Clone)]
pub struct PolicyVariables<T> {
    /// `(eis, max_share)` per roster entry.
    pub aircraft: Vec<(T, T)>,
    /// Knot values per mixed energy (network order), per non-residual
    /// pathway. `None` keeps every energy on its residual pathway.
    pub energy: Option<Vec<Vec<Vec<T>>>>,
    /// Knot values per market. `None` serves the full trend.
    pub supply_shift: Option<Vec<Vec<T>>>,
}

#[derive(Debug, Clone, Copy)]
pub struct DesignOutcome<T> {
    pub mtow_kg: T,
    pub energy_per_ask: T,
    pub feasible: bool,
    pub headroom: T,
}

#[derive(Debug, Clone)]
pub struct ResourceSlack<T> {
    /// MJ/yr
    pub biomass_use: TimeSeries<T>,
    pub electricity_use: TimeSeries<T>,
    /// `s·P − C`, MJ/yr
    pub biomass_slack: TimeSeries<T>,
    pub electricity_slack: TimeSeries<T>,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput<T> {
    pub ask_trend: TimeSeries<f64>,
    pub shift: SupplyShift<T>,
    pub market_ask: Vec<TimeSeries<T>>,
    pub designs: Vec<DesignOutcome<T>>,
    pub shares: Vec<AircraftShare<T>>,
    pub fleet: FleetAsk<T>,
    /// Per carrier, MJ/yr.
    pub direct: Vec<TimeSeries<T>>,
    pub pathway_shares: PathwayShares<T>,
    /// Residual-pathway share at each knot, per mixed energy.
    pub residual_knots: Vec<Vec<T>>,
    pub mix: MixResult<T>,
    /// Gt/yr
    pub co2: TimeSeries<T>,
    /// Gt over the horizon.
    pub cumulative_co2: T,
    pub burden: Option<Burden<T>>,
    pub resources: ResourceSlack<T>,
}

/// Consumption against the allocated share of production, per year.
pub fn resource_constraints<T: Scalar>(mix: &MixResult<T>, ctx: &ScenarioContext) -> Result<ResourceSlack<T>, PolicyError> {
    let biomass_use = mix.resource_consumption(&ctx.network, "biomass")?.clone();
    let electricity_use = mix.resource_consumption(&ctx.network, "electricity")?.clone();
    let biomass_slack = ctx.biomass_cap.lift::<T>().zip_with(&biomass_use, |cap, c| cap - c);
    let electricity_slack = ctx.electricity_cap.lift::<T>().zip_with(&electricity_use, |cap, c| cap - c);
    Ok(ResourceSlack { biomass_use, electricity_use, biomass_slack, electricity_slack })
}

fn pathway_shares<T: Scalar>(
    ctx: &ScenarioContext,
    knots: Option<&Vec<Vec<Vec<T>>>>,
) -> Result<(PathwayShares<T>, Vec<Vec<T>>), PolicyError> {
    let net = &ctx.network;
    let grid = net.grid;
    let mut shares = PathwayShares::<T>::residual_only(net);
    let mixed = net.mixed_energies();
    let Some(knots) = knots else {
        return Ok((shares, Vec::new()));
    };
    if knots.len() != mixed.len() {
        return Err(PolicyError::Config(format!("expected share knots for {} energies, got {}", mixed.len(), knots.len())));
    }
    let mut residual_knots = Vec::with_capacity(mixed.len());
    for (&e, free) in mixed.iter().zip(knots) {
        let n = net.energies[e].pathways.len();
        if free.len() != n - 1 {
            return Err(PolicyError::Config(format!("energy `{}` needs {} share controls", net.energies[e].name, n - 1)));
        }
        let nk = free.first().map_or(0, Vec::len);
        let mut residual_knot = vec![T::one(); nk];
        let mut residual = TimeSeries::constant(grid, T::one());
        for (k, values) in free.iter().enumerate() {
            for (r, v) in residual_knot.iter_mut().zip(values) {
                *r -= *v;
            }
            let control = CoarseControl::for_grid(grid, values.clone()).map_err(crate::fleet::FleetError::from)?;
            let delayed = delay_integrate(&evaluate_coarse(&control, grid), DelayState::new(CONTROL_TAU, T::zero()))
                .map_err(crate::fleet::FleetError::from)?;
            residual = residual.zip_with(&delayed, |a, b| a - b);
            shares.shares[e][k] = delayed;
        }
        shares.shares[e][n - 1] = residual;
        residual_knots.push(residual_knot);
    }
    Ok((shares, residual_knots))
}

/// Run the whole chain. Infeasible designs surface through their headroom,
/// not as errors.
pub fn evaluate_scenario<T: Scalar>(
    ctx: &ScenarioContext,
    roster: &[RosterEntry],
    vars: &PolicyVariables<T>,
) -> Result<ScenarioOutput<T>, PolicyError> {
    let grid = ctx.grid();
    let s = &ctx.settings;
    if vars.aircraft.len() != roster.len() {
        return Err(PolicyError::Config(format!("expected {} aircraft variable pairs, got {}", roster.len(), vars.aircraft.len())));
    }
    let shift = match &vars.supply_shift {
        None => SupplyShift::none(grid),
        Some(knots) => {
            let controls = knots
                .iter()
                .map(|k| CoarseControl::for_grid(grid, k.clone()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(crate::fleet::FleetError::from)?;
            SupplyShift::from_knots(&controls, grid, CONTROL_TAU)?
        }
    };
    let ask_trend = ctx.demand.ask_trend.clone();
    let market = market_ask(&ask_trend.lift::<T>(), &ctx.data.split, &shift)?;

    let mut designs = Vec::with_capacity(roster.len());
    let mut shares = Vec::with_capacity(roster.len());
    for (entry, &(eis, max_share)) in roster.iter().zip(&vars.aircraft) {
        let tlar = entry.market.tlar();
        let d = design_at(entry.architecture, &tlar, eis, s.tech, &s.sizing);
        let pulse = RampedPulse::with_fleet_tau(
            eis,
            max_share,
            T::cst(s.pulse_lifetime_years),
            T::cst(s.rampdown_years),
            FLEET_TAU,
        );
        shares.push(AircraftShare::from_pulse(entry.market, entry.architecture.carrier(), d.energy_per_ask, &pulse, grid, FLEET_TAU)?);
        designs.push(DesignOutcome { mtow_kg: d.mtow_kg, energy_per_ask: d.energy_per_ask, feasible: d.feasible, headroom: d.headroom });
    }
    let fleet = aircraft_ask(&market, &shares);
    let direct = direct_energy_consumption(&fleet, &shares, &ctx.data.reference)?;

    let (pathway_shares, residual_knots) = pathway_shares(ctx, vars.energy.as_ref())?;
    let net = &ctx.network;
    let demand = Carrier::ALL
        .iter()
        .zip(&direct)
        .map(|(c, d)| Ok((net.energy_index(c.energy_name())?, d.clone())))
        .collect::<Result<Vec<_>, PolicyError>>()?;
    let primary: Vec<(usize, TimeSeries<T>)> = ctx.primary.iter().map(|(e, s)| (*e, s.lift())).collect();
    let mix = evaluate_mix(net, &pathway_shares, &primary, &demand)?;
    let co2 = total_co2(net, &mix);
    let cumulative_co2 = co2.sum();
    let burden = match vars.supply_shift {
        Some(_) => Some(burden(&shift, &ctx.data.split, &s.burden)?),
        None => None,
    };
    let resources = resource_constraints(&mix, ctx)?;
    Ok(ScenarioOutput {
        ask_trend,
        shift,
        market_ask: market,
        designs,
        shares,
        fleet,
        direct,
        pathway_shares,
        residual_knots,
        mix,
        co2,
        cumulative_co2,
        burden,
        resources,
    })
}
