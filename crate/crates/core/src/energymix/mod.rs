//! Energy production network: emission-factor propagation from primary
//! resources to final carriers, and production aggregation back upstream.

mod eval;
mod network;

pub use eval::{
    emission_factors, evaluate_mix, production_consumption, total_co2, MixProduction, MixResult, PathwayShares,
    G_TO_GT,
};
pub use network::{
    maturing_coefficient, parse_catalog, topo_order, EnergyNetwork, EnergyType, Pathway, PathwaySpec, Role,
    MATURING_END, MATURING_START,
};

use crate::store::{ScenarioBackground, TimeSeries};

/// Energies consumed directly by aircraft.
pub const FINAL_ENERGIES: [&str; 3] = ["jeta", "lh2", "battery_electricity"];
/// gCO2/MJ of crude oil.
pub const OIL_EMISSION_FACTOR: f64 = 63.32;
/// Biomass emissions are booked as direct emissions of the biofuel pathways.
pub const BIOMASS_EMISSION_FACTOR: f64 = 0.0;

#[derive(Debug, thiserror::Error)]
pub enum MixError {
    #[error("pathway catalog: {0}")]
    Catalog(String),
    #[error("unknown energy `{0}`")]
    UnknownEnergy(String),
    #[error("unknown pathway `{0}`")]
    UnknownPathway(String),
    #[error("cycle in energy network: {0}")]
    Cycle(String),
    #[error("`{0}` is not a primary energy")]
    NotPrimary(String),
    #[error("no emission factor given for primary energy `{0}`")]
    MissingPrimaryFactor(String),
    #[error("share count for `{energy}`: expected {expected}")]
    ShareCount { energy: String, expected: usize },
}

/// Primary emission factors: oil and biomass constants, electricity from the
/// background scenario.
pub fn primary_factors(
    net: &EnergyNetwork,
    background: &ScenarioBackground,
) -> Result<Vec<(usize, TimeSeries<f64>)>, MixError> {
    let grid = net.grid;
    let mut out = Vec::new();
    for e in net.primaries() {
        let series = match net.energies[e].name.as_str() {
            "oil" => TimeSeries::constant(grid, OIL_EMISSION_FACTOR),
            "biomass" => TimeSeries::constant(grid, BIOMASS_EMISSION_FACTOR),
            "electricity" => background.electricity_emission_factor.clone(),
            other => return Err(MixError::MissingPrimaryFactor(other.into())),
        };
        out.push((e, series));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::store::TimeGrid;

    fn grid() -> TimeGrid {
        TimeGrid::new(2020, 2070).unwrap()
    }

    fn network() -> EnergyNetwork {
        EnergyNetwork::build(grid(), &bundled::pathway_catalog(), &FINAL_ENERGIES).unwrap()
    }

    fn factors(net: &EnergyNetwork, electricity: f64) -> Vec<(usize, TimeSeries<f64>)> {
        net.primaries()
            .into_iter()
            .map(|e| {
                let v = match net.energies[e].name.as_str() {
                    "oil" => OIL_EMISSION_FACTOR,
                    "biomass" => 0.0,
                    "electricity" => electricity,
                    n => panic!("unexpected primary {n}"),
                };
                (e, TimeSeries::constant(net.grid, v))
            })
            .collect()
    }

    fn at(s: &TimeSeries<f64>, year: i32) -> f64 {
        s.at_year(year).unwrap()
    }

    #[test]
    fn fossil_jeta_factor() {
        let net = network();
        let shares = PathwayShares::<f64>::residual_only(&net);
        let (ef, _) = emission_factors(&net, &shares, &factors(&net, 100.0)).unwrap();
        let jeta = net.energy_index("jeta").unwrap();
        assert!((at(&ef[jeta], 2025) - (15.5 + 1.16 * 63.32)).abs() < 1e-12);
        assert!((at(&ef[jeta], 2025) - 88.95).abs() < 0.01);
    }

    #[test]
    fn electrolysis_and_electrofuel_factors() {
        let net = network();
        let shares = PathwayShares::<f64>::residual_only(&net);
        let (ef, impact) = emission_factors(&net, &shares, &factors(&net, 100.0)).unwrap();
        let gh2 = net.energy_index("gas_h2").unwrap();
        let efuel = net.energy_index("electrofuel").unwrap();
        assert!((at(&ef[gh2], 2025) - 141.0).abs() < 1e-10);
        assert!((at(&ef[efuel], 2025) - (0.65 * 100.0 + 1.89 * 141.0)).abs() < 1e-10);
        assert!((at(&ef[efuel], 2025) - 331.5).abs() < 0.1);
        let reforming = net.pathway_index("gas_h2", "gas_reforming").unwrap();
        assert_eq!(at(&impact[reforming], 2030), 101.5);
    }

    #[test]
    fn ft_biofuel_factor() {
        let net = network();
        let mut shares = PathwayShares::<f64>::residual_only(&net);
        shares.set_constant(&net, "biofuel", &[0.0, 0.0, 1.0]).unwrap();
        shares.set_constant(&net, "jeta", &[1.0, 0.0, 0.0]).unwrap();
        let (ef, _) = emission_factors(&net, &shares, &factors(&net, 100.0)).unwrap();
        let jeta = net.energy_index("jeta").unwrap();
        assert!((at(&ef[jeta], 2040) - 35.3).abs() < 1e-12);
    }

    #[test]
    fn hand_propagation_half_electrofuel() {
        let net = network();
        let mut shares = PathwayShares::<f64>::residual_only(&net);
        shares.set_constant(&net, "jeta", &[0.0, 0.5, 0.5]).unwrap();
        let jeta = net.energy_index("jeta").unwrap();
        let demand = vec![(jeta, TimeSeries::constant(net.grid, 100.0))];
        let mix = evaluate_mix(&net, &shares, &factors(&net, 100.0), &demand).unwrap();
        let efuel = net.energy_index("electrofuel").unwrap();
        let gh2 = net.energy_index("gas_h2").unwrap();
        let elec = net.energy_index("electricity").unwrap();
        let oil = net.energy_index("oil").unwrap();
        assert!((at(&mix.production[efuel], 2025) - 50.0).abs() < 1e-12);
        assert!((at(&mix.production[gh2], 2025) - 94.5).abs() < 1e-12);
        assert!((at(&mix.production[elec], 2025) - (0.65 * 50.0 + 1.41 * 94.5)).abs() < 1e-12);
        assert!((at(&mix.production[elec], 2025) - 165.7).abs() < 0.05);
        assert!((at(&mix.production[oil], 2025) - 58.0).abs() < 1e-12);
        assert_eq!(mix.resource_consumption(&net, "oil").unwrap(), &mix.production[oil]);
        assert!(mix.resource_consumption(&net, "jeta").is_err());
    }

    #[test]
    fn co2_of_fossil_demand() {
        let net = network();
        let shares = PathwayShares::<f64>::residual_only(&net);
        let jeta = net.energy_index("jeta").unwrap();
        let demand = vec![(jeta, TimeSeries::constant(net.grid, 100.0))];
        let mix = evaluate_mix(&net, &shares, &factors(&net, 100.0), &demand).unwrap();
        let co2 = total_co2(&net, &mix);
        let grams = at(&co2, 2030) / G_TO_GT;
        assert!((grams - 100.0 * (15.5 + 1.16 * 63.32)).abs() < 1e-6);
        assert!((grams - 8895.0).abs() < 1.0);
    }

    #[test]
    fn zero_demand_gives_zero() {
        let net = network();
        let shares = PathwayShares::<f64>::residual_only(&net);
        let mix = evaluate_mix(&net, &shares, &factors(&net, 100.0), &[]).unwrap();
        assert!(mix.production.iter().all(|p| p.iter().all(|v| *v == 0.0)));
        assert!(total_co2(&net, &mix).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn maturing_anchors() {
        let c = maturing_coefficient(1.41, 1.33, grid());
        assert!((at(&c, 2050) - 1.33).abs() < 1e-12);
        assert!((at(&c, 2060) - 1.33).abs() < 1e-12);
        assert!((at(&c, 2020) - 1.41).abs() < 1e-12);
        assert!((at(&c, 2037) - (1.41 - 0.08 * 12.0 / 25.0)).abs() < 1e-12);
        let mid = 0.5 * (at(&c, 2037) + at(&c, 2038));
        assert!((mid - 1.37).abs() < 1e-12);
    }

    #[test]
    fn order_starts_with_electricity_and_ends_with_jeta() {
        let subset: Vec<PathwaySpec> = bundled::pathway_catalog()
            .into_iter()
            .filter(|s| ["gas_h2", "electrofuel", "lh2", "jeta", "fossil_kerosene"].contains(&s.energy.as_str()))
            .filter(|s| s.name != "biofuel_blend")
            .collect();
        let net = EnergyNetwork::build(grid(), &subset, &["jeta", "lh2"]).unwrap();
        let pos = |n: &str| net.order.iter().position(|&e| net.energies[e].name == n).unwrap();
        assert!(pos("electricity") < pos("gas_h2"));
        assert!(pos("gas_h2") < pos("electrofuel"));
        assert!(pos("gas_h2") < pos("lh2"));
        assert!(pos("electrofuel") < pos("jeta"));
        let elec = net.energy_index("electricity").unwrap();
        let non_fossil: Vec<usize> =
            net.order.iter().copied().filter(|&e| !["oil", "fossil_kerosene"].contains(&net.energies[e].name.as_str())).collect();
        assert_eq!(non_fossil.first(), Some(&elec));
        assert_eq!(net.energies[*net.order.last().unwrap()].name, "jeta");
    }

    #[test]
    fn single_node_orders_itself() {
        let spec = PathwaySpec { energy: "a".into(), name: "p".into(), inputs: vec![], direct: (1.0, 1.0) };
        let net = EnergyNetwork::build(grid(), &[spec], &["a"]).unwrap();
        assert_eq!(net.order, vec![0]);
    }

    #[test]
    fn cycle_is_named() {
        let specs = vec![
            PathwaySpec { energy: "a".into(), name: "pa".into(), inputs: vec![("b".into(), 1.0, 1.0)], direct: (0.0, 0.0) },
            PathwaySpec { energy: "b".into(), name: "pb".into(), inputs: vec![("a".into(), 1.0, 1.0)], direct: (0.0, 0.0) },
        ];
        match EnergyNetwork::build(grid(), &specs, &["a"]) {
            Err(MixError::Cycle(msg)) => assert_eq!(msg, "a -> b -> a"),
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn catalog_rejects_negative_and_merges_rows() {
        let bad = "energy,pathway,input,coef_2025,coef_2050,direct_gco2_mj\nx,p,y,-1,1,0\n";
        assert!(matches!(parse_catalog(bad.as_bytes()), Err(MixError::Catalog(_))));
        let specs = bundled::pathway_catalog();
        let ptl = specs.iter().find(|s| s.name == "power_to_liquid").unwrap();
        assert_eq!(ptl.inputs.len(), 2);
        let reforming = specs.iter().find(|s| s.name == "gas_reforming").unwrap();
        assert!(reforming.inputs.is_empty());
    }

    #[test]
    fn background_primary_factors() {
        let net = network();
        let bg = bundled::background("ssp2_26", net.grid).unwrap();
        let pf = primary_factors(&net, &bg).unwrap();
        assert_eq!(pf.len(), 3);
        let elec = net.energy_index("electricity").unwrap();
        let (_, s) = pf.iter().find(|(e, _)| *e == elec).unwrap();
        assert_eq!(s, &bg.electricity_emission_factor);
    }
}
