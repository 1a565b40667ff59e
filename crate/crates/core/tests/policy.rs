use aviopt::aircraft::{fleet_reference_intensity, Market};
use aviopt::controls::{delay_integrate, DelayState};
use aviopt::fleet::{BurdenParams, CONTROL_TAU};
use aviopt::gradopt::{linearize, NlpFunction, NlpProblem, SqpSettings};
use aviopt::policy::*;
use aviopt::store::TimeSeries;
use aviopt::TimeGrid;

fn ctx(label: &str) -> ScenarioContext {
    ScenarioContext::bundled(label, &ModelSettings::default()).unwrap()
}

fn spec(formulation: Formulation, energy: EnergyMode) -> ProblemSpec {
    ProblemSpec { formulation, energy, roster: drop_in_roster() }
}

fn idle_fleet(n: usize) -> Vec<(f64, f64)> {
    vec![(2040.0, 0.0); n]
}

#[test]
fn idle_policy_matches_hand_built_pipeline() {
    let c = ctx("ssp2_26");
    let roster = drop_in_roster();
    let vars = PolicyVariables { aircraft: idle_fleet(roster.len()), energy: None, supply_shift: None };
    let out = evaluate_scenario(&c, &roster, &vars).unwrap();
    // Only the incumbent fleet flies, on fossil kerosene at 15.5 + 1.16·63.32 g/MJ.
    let ef = 15.5 + 1.16 * 63.32;
    let ask = &c.demand.ask_trend;
    for k in 0..ask.len() {
        let energy: f64 = Market::ALL
            .iter()
            .map(|m| c.data.split.share(*m) * ask[k] * fleet_reference_intensity(&c.data.reference, &m.tlar()).unwrap())
            .sum();
        let expected = energy * ef * 1e-15;
        assert!((out.co2[k] - expected).abs() <= 1e-12 * expected, "year {k}: {} vs {expected}", out.co2[k]);
    }
    assert!(out.burden.is_none());
}

#[test]
fn doubling_traffic_doubles_emissions() {
    let base = ctx("ssp2_26");
    let doubled = ScenarioContext::new(
        base.background.clone().with_population_scaled(2.0),
        &base.settings,
        &base.data,
    )
    .unwrap();
    let p1 = build_problem(base, spec(Formulation::Trend, EnergyMode::Optimized)).unwrap();
    let p2 = build_problem(doubled, spec(Formulation::Trend, EnergyMode::Optimized)).unwrap();
    let x: Vec<f64> = (0..p1.dimension()).map(|i| 0.1 + 0.8 * ((i * 37 % 101) as f64 / 101.0)).collect();
    let a = p1.outputs::<f64>(&x).unwrap()[0].cumulative_co2;
    let b = p2.outputs::<f64>(&x).unwrap()[0].cumulative_co2;
    assert!((b - 2.0 * a).abs() <= 1e-10 * a, "{b} vs 2·{a}");
}

#[test]
fn full_supply_shift_scales_emissions_by_delayed_ratio() {
    let c = ctx("ssp2_26");
    let roster = drop_in_roster();
    let knots = aviopt::controls::CoarseControl::<f64>::knot_count(c.grid());
    let run = |sr: Option<f64>| {
        let vars = PolicyVariables {
            aircraft: roster.iter().map(|e| (e.start_eis, e.start_share)).collect(),
            energy: None,
            supply_shift: sr.map(|v| vec![vec![v; knots]; Market::ALL.len()]),
        };
        evaluate_scenario(&c, &roster, &vars).unwrap()
    };
    let free = run(None);
    let capped = run(Some(0.9));
    let delayed = delay_integrate(&TimeSeries::constant(c.grid(), 0.9), DelayState::new(CONTROL_TAU, 0.0)).unwrap();
    for k in 0..c.grid().len() {
        let expected = free.co2[k] * (1.0 - delayed[k]);
        assert!((capped.co2[k] - expected).abs() <= 1e-12 * free.co2[k]);
    }
    let last = c.grid().len() - 1;
    assert!((capped.co2[last] / free.co2[last] - 0.1).abs() < 1e-4);
}

#[test]
fn variable_counts_by_formulation() {
    let trend = build_problem(ctx("ssp2_26"), spec(Formulation::Trend, EnergyMode::Optimized)).unwrap();
    let low = build_problem(ctx("ssp2_26"), spec(Formulation::LowDemand, EnergyMode::Optimized)).unwrap();
    let fossil = build_problem(ctx("ssp2_26"), spec(Formulation::Trend, EnergyMode::Fossil)).unwrap();
    let knots = trend.knot_count();
    assert_eq!(knots, 21);
    // 10 designs × (eis, max share); free shares: biofuel 2, gas_h2 1, jeta 2.
    assert_eq!(fossil.dimension(), 20);
    assert_eq!(trend.dimension(), 20 + 5 * knots);
    assert_eq!(low.dimension(), trend.dimension() + Market::ALL.len() * knots);
    assert!(!trend.keys().iter().any(|k| matches!(k, VarKey::Shift { .. })));
}

#[test]
fn constraint_count_matches_hand_enumeration() {
    let years = 2070 - 2020 + 1;
    let markets = 5;
    let mixed_energies = 3;
    let knots = 21;
    let trend = build_problem(ctx("ssp2_26"), spec(Formulation::Trend, EnergyMode::Optimized)).unwrap();
    assert_eq!(trend.constraint_count(), 2 * years + markets * years + mixed_energies * knots);
    assert_eq!(trend.constraint_count(), 420);
    let low = build_problem(ctx("ssp2_26"), spec(Formulation::LowDemand, EnergyMode::Optimized)).unwrap();
    assert_eq!(low.constraint_count(), 421);
    assert_eq!(low.constraint_kinds().last(), Some(&ConstraintKind::CarbonBudget));

    let settings = ModelSettings::default();
    let roster = breakthrough_roster(settings.tech, &settings.sizing);
    let alternatives = roster.iter().filter(|e| e.architecture != aviopt::aircraft::Architecture::JetaTurbine).count();
    let bt = build_problem(
        ctx("ssp2_26"),
        ProblemSpec { formulation: Formulation::Trend, energy: EnergyMode::Optimized, roster },
    )
    .unwrap();
    assert_eq!(bt.constraint_count(), 420 + alternatives);
}

#[test]
fn low_demand_without_budget_is_rejected() {
    let settings = ModelSettings { budget: None, ..Default::default() };
    let c = ScenarioContext::bundled("ssp2_26", &settings).unwrap();
    assert!(matches!(build_problem(c, spec(Formulation::LowDemand, EnergyMode::Fossil)), Err(PolicyError::Config(_))));
}

#[test]
fn cumulative_objective_examples() {
    let grid = TimeGrid::new(2020, 2069).unwrap();
    assert_eq!(TimeSeries::constant(grid, 1.0).sum(), 50.0);
    let c = ScenarioContext::new(ctx("ssp2_26").background.with_population_scaled(0.0), &ModelSettings::default(), &ModelData::bundled())
        .unwrap();
    let p = build_problem(c, spec(Formulation::Trend, EnergyMode::Fossil)).unwrap();
    let out = p.outputs::<f64>(&p.default_start()).unwrap();
    assert_eq!(p.raw_objective(&out), 0.0);
}

#[test]
fn burden_objective_examples() {
    let c = ctx("ssp2_26");
    let p = build_problem(c.clone(), spec(Formulation::LowDemand, EnergyMode::Fossil)).unwrap();
    let out = p.outputs::<f64>(&p.default_start()).unwrap();
    let expected: f64 = (0..51).map(|k| 1.03f64.powi(-k)).sum();
    assert!((p.raw_objective(&out) - expected).abs() < 1e-12);

    let flat = ModelSettings { burden: BurdenParams { discount_rate: 0.0, ..Default::default() }, ..Default::default() };
    let c = ScenarioContext::bundled("ssp2_26", &flat).unwrap();
    let p = build_problem(c, spec(Formulation::LowDemand, EnergyMode::Fossil)).unwrap();
    let out = p.outputs::<f64>(&p.default_start()).unwrap();
    assert!((p.raw_objective(&out) - 51.0).abs() < 1e-12);
}

#[test]
fn burden_objective_rises_with_each_knot() {
    let p = build_problem(ctx("ssp2_26"), spec(Formulation::LowDemand, EnergyMode::Fossil)).unwrap();
    let x0: Vec<f64> = p.default_start().iter().enumerate().map(|(i, v)| if i >= 20 { 0.3 } else { *v }).collect();
    let base = p.raw_objective(&p.outputs::<f64>(&x0).unwrap());
    for i in 20..p.dimension() {
        let mut x = x0.clone();
        x[i] += 0.2;
        let f = p.raw_objective(&p.outputs::<f64>(&x).unwrap());
        assert!(f >= base, "knot {i}: {f} < {base}");
    }
}

#[test]
fn resource_slack_examples() {
    let conservative = ctx("ssp2_26");
    let preferential = ScenarioContext::bundled(
        "ssp2_26",
        &ModelSettings { allocation: AllocationShares::PREFERENTIAL, ..Default::default() },
    )
    .unwrap();
    let roster = drop_in_roster();
    let vars = PolicyVariables { aircraft: idle_fleet(roster.len()), energy: None, supply_shift: None };
    let fossil = evaluate_scenario(&conservative, &roster, &vars).unwrap();
    // Fossil kerosene draws neither resource.
    for k in 0..conservative.grid().len() {
        assert_eq!(fossil.resources.biomass_slack[k], conservative.biomass_cap[k]);
        assert_eq!(fossil.resources.electricity_slack[k], conservative.electricity_cap[k]);
    }

    let p = build_problem(conservative.clone(), spec(Formulation::Trend, EnergyMode::Optimized)).unwrap();
    let x: Vec<f64> = (0..p.dimension()).map(|i| 0.2 + 0.6 * ((i * 13 % 17) as f64 / 17.0)).collect();
    let used = &p.outputs::<f64>(&x).unwrap()[0].mix;
    let low = resource_constraints(used, &conservative).unwrap();
    let high = resource_constraints(used, &preferential).unwrap();
    for k in 0..conservative.grid().len() {
        assert!(high.biomass_slack[k] >= low.biomass_slack[k]);
        assert!(high.electricity_slack[k] >= low.electricity_slack[k]);
        assert_eq!(low.biomass_slack[k], conservative.biomass_cap[k] - low.biomass_use[k]);
    }
}

#[test]
fn evaluation_is_bitwise_deterministic() {
    let p = build_problem(ctx("ssp5_45"), spec(Formulation::LowDemand, EnergyMode::Optimized)).unwrap();
    let x: Vec<f64> = (0..p.dimension()).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
    let (f1, c1) = p.evaluate::<f64>(&x).unwrap();
    let (f2, c2) = p.evaluate::<f64>(&x).unwrap();
    assert_eq!(f1.to_bits(), f2.to_bits());
    assert!(c1.iter().zip(&c2).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn duplicated_ensemble_gradient_equals_single() {
    let single = build_problem(ctx("ssp2_26"), spec(Formulation::Trend, EnergyMode::Optimized)).unwrap();
    let pair = build_robust_problem(vec![ctx("ssp2_26"), ctx("ssp2_26")], spec(Formulation::Trend, EnergyMode::Optimized)).unwrap();
    let x: Vec<f64> = (0..single.dimension()).map(|i| 0.1 + 0.8 * ((i * 31 % 97) as f64 / 97.0)).collect();
    let mut xp = pair.default_start();
    pair.embed_into(&mut xp, &single, &x, 0);
    pair.embed_into(&mut xp, &single, &x, 1);
    let ls = linearize(&NlpFunction(&single), &x, 16).unwrap();
    let lp = linearize(&NlpFunction(&pair), &xp, 16).unwrap();
    let scale = single.objective_scale() / pair.objective_scale();
    assert!((scale - 1.0).abs() < 1e-12);
    for j in 0..20 {
        let (a, b) = (ls.jacobian[(0, j)], lp.jacobian[(0, j)]);
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "shared variable {j}: {a} vs {b}");
    }
}

#[test]
fn robust_requires_a_background() {
    assert!(build_robust_problem(Vec::new(), spec(Formulation::Trend, EnergyMode::Optimized)).is_err());
    assert!(build_robust_problem(vec![ctx("ssp2_26")], spec(Formulation::LowDemand, EnergyMode::Optimized)).is_err());
}

#[test]
fn solve_keeps_a_better_start() {
    let p = build_problem(ctx("ssp1_19"), spec(Formulation::Trend, EnergyMode::Fossil)).unwrap();
    let settings = SqpSettings::default();
    let first = solve(&p, &[p.default_start()], &settings).unwrap();
    assert!(first.feasible);
    // Starting at the optimum with a crippled optimizer must return the optimum itself.
    let lazy = SqpSettings { max_iter: 1, ..settings };
    let again = solve(&p, &[p.default_start(), first.x.clone()], &lazy).unwrap();
    assert!(again.f <= first.f + 1e-12);
    assert!(again.feasible);
}
