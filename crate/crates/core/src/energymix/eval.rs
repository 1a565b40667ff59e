//! Two-pass evaluation: emission factors upstream to downstream, then
//! production and consumption downstream to upstream.

use super::network::{EnergyNetwork, Role};
use super::MixError;
use crate::scalar::Scalar;
use crate::store::TimeSeries;

/// Grams to gigatonnes.
pub const G_TO_GT: f64 = 1e-15;

/// Production share of every pathway, per energy in pathway order.
#[derive(Debug, Clone)]
pub struct PathwayShares<T> {
    pub shares: Vec<Vec<TimeSeries<T>>>,
}

impl<T: Scalar> PathwayShares<T> {
    /// Everything from the residual (last) pathway of each energy.
    pub fn residual_only(net: &EnergyNetwork) -> Self {
        let grid = net.grid;
        let shares = net
            .energies
            .iter()
            .map(|e| {
                let n = e.pathways.len();
                (0..n).map(|k| TimeSeries::constant(grid, if k + 1 == n { T::one() } else { T::zero() })).collect()
            })
            .collect();
        PathwayShares { shares }
    }

    /// Set constant shares for `energy`, one per pathway.
    pub fn set_constant(&mut self, net: &EnergyNetwork, energy: &str, values: &[f64]) -> Result<(), MixError> {
        let e = net.energy_index(energy)?;
        if values.len() != net.energies[e].pathways.len() {
            return Err(MixError::ShareCount { energy: energy.into(), expected: net.energies[e].pathways.len() });
        }
        self.shares[e] = values.iter().map(|v| TimeSeries::constant(net.grid, T::cst(*v))).collect();
        Ok(())
    }
}

impl PathwayShares<f64> {
    pub fn lift<T: Scalar>(&self) -> PathwayShares<T> {
        PathwayShares { shares: self.shares.iter().map(|v| v.iter().map(|s| s.lift()).collect()).collect() }
    }
}

#[derive(Debug, Clone)]
pub struct MixResult<T> {
    /// gCO2/MJ per energy.
    pub emission_factor: Vec<TimeSeries<T>>,
    /// gCO2/MJ per pathway.
    pub pathway_impact: Vec<TimeSeries<T>>,
    /// MJ/yr per energy.
    pub production: Vec<TimeSeries<T>>,
    pub pathway_production: Vec<TimeSeries<T>>,
    /// Per pathway, consumption of each input in catalog order.
    pub pathway_input: Vec<Vec<TimeSeries<T>>>,
    /// Consumption of each energy by other pathways.
    pub input_consumption: Vec<TimeSeries<T>>,
    /// Direct (aircraft) demand per energy.
    pub direct_demand: Vec<TimeSeries<T>>,
}

impl<T: Scalar> MixResult<T> {
    /// Total consumption of a primary resource, MJ/yr.
    pub fn resource_consumption(&self, net: &EnergyNetwork, name: &str) -> Result<&TimeSeries<T>, MixError> {
        let e = net.energy_index(name)?;
        if net.energies[e].role != Role::Primary {
            return Err(MixError::NotPrimary(name.into()));
        }
        Ok(&self.production[e])
    }
}

fn check_shares<T: Scalar>(net: &EnergyNetwork, shares: &PathwayShares<T>) -> Result<(), MixError> {
    if shares.shares.len() != net.energies.len() {
        return Err(MixError::ShareCount { energy: "<network>".into(), expected: net.energies.len() });
    }
    for (e, s) in net.energies.iter().zip(&shares.shares) {
        if s.len() != e.pathways.len() {
            return Err(MixError::ShareCount { energy: e.name.clone(), expected: e.pathways.len() });
        }
    }
    Ok(())
}

/// `IF_p = direct_p + Σ_i CF_{p,i}·IF_i` and `IF_e = Σ_p S_p·IF_p`, in
/// dependency order. `primary_factors` gives each primary energy's factor.
pub fn emission_factors<T: Scalar>(
    net: &EnergyNetwork,
    shares: &PathwayShares<T>,
    primary_factors: &[(usize, TimeSeries<T>)],
) -> Result<(Vec<TimeSeries<T>>, Vec<TimeSeries<T>>), MixError> {
    check_shares(net, shares)?;
    let grid = net.grid;
    let n = grid.len();
    let mut ef: Vec<Option<TimeSeries<T>>> = vec![None; net.energies.len()];
    for (e, s) in primary_factors {
        if net.energies[*e].role != Role::Primary {
            return Err(MixError::NotPrimary(net.energies[*e].name.clone()));
        }
        ef[*e] = Some(s.clone());
    }
    let mut impact: Vec<TimeSeries<T>> = vec![TimeSeries::zeros(grid); net.pathways.len()];
    for &e in &net.order {
        let energy = &net.energies[e];
        if energy.role == Role::Primary {
            if ef[e].is_none() {
                return Err(MixError::MissingPrimaryFactor(energy.name.clone()));
            }
            continue;
        }
        let mut mix = vec![T::zero(); n];
        for (k, &p) in energy.pathways.iter().enumerate() {
            let pw = &net.pathways[p];
            let mut v: Vec<T> = pw.direct_impact.iter().map(|d| T::cst(*d)).collect();
            for (i, coef) in &pw.inputs {
                let input = ef[*i].as_ref().expect("dependency order");
                for t in 0..n {
                    v[t] += T::cst(coef[t]) * input[t];
                }
            }
            let s = &shares.shares[e][k];
            for t in 0..n {
                mix[t] += s[t] * v[t];
            }
            impact[p] = TimeSeries::new(grid, v).expect("grid length");
        }
        ef[e] = Some(TimeSeries::new(grid, mix).expect("grid length"));
    }
    Ok((ef.into_iter().map(|v| v.expect("every energy visited")).collect(), impact))
}

/// `P_e = Cdirect_e + Σ_p CF_{p,e}·P_p` with `P_p = S_p·P_{output(p)}`, in
/// reverse dependency order.
pub fn production_consumption<T: Scalar>(
    net: &EnergyNetwork,
    shares: &PathwayShares<T>,
    final_demand: &[(usize, TimeSeries<T>)],
) -> Result<MixProduction<T>, MixError> {
    check_shares(net, shares)?;
    let grid = net.grid;
    let n = grid.len();
    let ne = net.energies.len();
    let mut direct: Vec<Vec<T>> = vec![vec![T::zero(); n]; ne];
    for (e, d) in final_demand {
        for t in 0..n {
            direct[*e][t] += d[t];
        }
    }
    let mut consumed: Vec<Vec<T>> = vec![vec![T::zero(); n]; ne];
    let mut production: Vec<Vec<T>> = vec![Vec::new(); ne];
    let mut pathway_production: Vec<Vec<T>> = vec![vec![T::zero(); n]; net.pathways.len()];
    let mut pathway_input: Vec<Vec<Vec<T>>> = net.pathways.iter().map(|p| vec![Vec::new(); p.inputs.len()]).collect();
    for &e in net.order.iter().rev() {
        let total: Vec<T> = (0..n).map(|t| direct[e][t] + consumed[e][t]).collect();
        for (k, &p) in net.energies[e].pathways.iter().enumerate() {
            let s = &shares.shares[e][k];
            let pp: Vec<T> = (0..n).map(|t| s[t] * total[t]).collect();
            for (slot, (i, coef)) in net.pathways[p].inputs.iter().enumerate() {
                let c: Vec<T> = (0..n).map(|t| T::cst(coef[t]) * pp[t]).collect();
                for t in 0..n {
                    consumed[*i][t] += c[t];
                }
                pathway_input[p][slot] = c;
            }
            pathway_production[p] = pp;
        }
        production[e] = total;
    }
    let wrap = |v: Vec<T>| TimeSeries::new(grid, v).expect("grid length");
    Ok(MixProduction {
        production: production.into_iter().map(wrap).collect(),
        pathway_production: pathway_production.into_iter().map(wrap).collect(),
        pathway_input: pathway_input.into_iter().map(|v| v.into_iter().map(wrap).collect()).collect(),
        input_consumption: consumed.into_iter().map(wrap).collect(),
        direct_demand: direct.into_iter().map(wrap).collect(),
    })
}

/// Extensive half of a [`MixResult`].
#[derive(Debug, Clone)]
pub struct MixProduction<T> {
    pub production: Vec<TimeSeries<T>>,
    pub pathway_production: Vec<TimeSeries<T>>,
    pub pathway_input: Vec<Vec<TimeSeries<T>>>,
    pub input_consumption: Vec<TimeSeries<T>>,
    pub direct_demand: Vec<TimeSeries<T>>,
}

/// Both passes.
pub fn evaluate_mix<T: Scalar>(
    net: &EnergyNetwork,
    shares: &PathwayShares<T>,
    primary_factors: &[(usize, TimeSeries<T>)],
    final_demand: &[(usize, TimeSeries<T>)],
) -> Result<MixResult<T>, MixError> {
    let (emission_factor, pathway_impact) = emission_factors(net, shares, primary_factors)?;
    let p = production_consumption(net, shares, final_demand)?;
    Ok(MixResult {
        emission_factor,
        pathway_impact,
        production: p.production,
        pathway_production: p.pathway_production,
        pathway_input: p.pathway_input,
        input_consumption: p.input_consumption,
        direct_demand: p.direct_demand,
    })
}

/// Annual CO2 in Gt: `Σ_final IF_e·Cdirect_e`.
pub fn total_co2<T: Scalar>(net: &EnergyNetwork, mix: &MixResult<T>) -> TimeSeries<T> {
    let n = net.grid.len();
    let mut out = vec![T::zero(); n];
    for (e, energy) in net.energies.iter().enumerate() {
        if energy.role == Role::Primary {
            continue;
        }
        let (ef, d) = (&mix.emission_factor[e], &mix.direct_demand[e]);
        for t in 0..n {
            out[t] += ef[t] * d[t] * T::cst(G_TO_GT);
        }
    }
    TimeSeries::new(net.grid, out).expect("grid length")
}
