//! Random acyclic energy networks and a damped simultaneous fixed-point
//! oracle for their emission factors and production.

use aviopt::energymix::{EnergyNetwork, PathwayShares, PathwaySpec, Role};
use aviopt::{TimeGrid, TimeSeries};
use proptest::prelude::*;

pub const DAMPING: f64 = 0.6;
pub const ORACLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Instance {
    pub specs: Vec<PathwaySpec>,
    pub finals: Vec<String>,
    pub share_seed: Vec<f64>,
    pub primary_ef: Vec<f64>,
    pub demand: Vec<f64>,
}

pub fn instance() -> impl Strategy<Value = Instance> {
    (2usize..=10).prop_flat_map(|nodes| {
        let primaries = 1 + nodes / 3;
        (
            Just(nodes),
            Just(primaries),
            proptest::collection::vec(1usize..=3, nodes - primaries),
            proptest::collection::vec((0usize..64, 0.0f64..3.0, 0.0f64..3.0), 3 * nodes * 3),
            proptest::collection::vec(0.0f64..50.0, 3 * nodes),
            proptest::collection::vec(0.01f64..1.0, 3 * nodes * 3),
            proptest::collection::vec(0.0f64..200.0, primaries),
            proptest::collection::vec(0.0f64..1000.0, nodes),
        )
    })
    .prop_map(|(nodes, primaries, npaths, inputs, direct, share_seed, primary_ef, demand)| {
        let name = |k: usize| format!("e{k}");
        let mut specs = Vec::new();
        let mut cursor = 0;
        for (j, np) in npaths.iter().enumerate() {
            let node = primaries + j;
            for p in 0..*np {
                let mut ins: Vec<(String, f64, f64)> = Vec::new();
                for _ in 0..3 {
                    let (pick, a, b) = inputs[cursor % inputs.len()];
                    cursor += 1;
                    let target = pick % (node + 1);
                    if target < node && !ins.iter().any(|(n, _, _)| *n == name(target)) {
                        ins.push((name(target), a, b));
                    }
                }
                let d = direct[(node * 3 + p) % direct.len()];
                specs.push(PathwaySpec { energy: name(node), name: format!("p{node}_{p}"), inputs: ins, direct: (d, 0.5 * d) });
            }
        }
        let finals = (primaries..nodes).filter(|k| k % 2 == 1 || *k == nodes - 1).map(name).collect();
        Instance { specs, finals, share_seed, primary_ef, demand }
    })
}

pub fn grid() -> TimeGrid {
    TimeGrid::new(2024, 2052).unwrap()
}

pub struct Setup {
    pub net: EnergyNetwork,
    pub shares: PathwayShares<f64>,
    pub primary: Vec<(usize, TimeSeries<f64>)>,
    pub demand: Vec<(usize, TimeSeries<f64>)>,
}

pub fn setup(inst: &Instance) -> Setup {
    let finals: Vec<&str> = inst.finals.iter().map(String::as_str).collect();
    let net = EnergyNetwork::build(grid(), &inst.specs, &finals).expect("acyclic by construction");
    let g = net.grid;
    let mut shares = PathwayShares::<f64>::residual_only(&net);
    let mut cursor = 0;
    for (e, energy) in net.energies.iter().enumerate() {
        let n = energy.pathways.len();
        if n == 0 {
            continue;
        }
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                cursor += 1;
                inst.share_seed[cursor % inst.share_seed.len()]
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        shares.shares[e] = raw
            .iter()
            .enumerate()
            .map(|(k, r)| TimeSeries::from_fn(g, |y| r / sum * (1.0 + 0.01 * ((y - 2024) as f64) * (k as f64 - 0.5 * (n - 1) as f64) / n as f64)))
            .collect();
        let total: Vec<f64> = (0..g.len()).map(|t| shares.shares[e].iter().map(|s| s[t]).sum()).collect();
        for s in shares.shares[e].iter_mut() {
            *s = TimeSeries::new(g, s.iter().zip(&total).map(|(v, t)| v / t).collect()).unwrap();
        }
    }
    let primary = net
        .primaries()
        .into_iter()
        .enumerate()
        .map(|(k, e)| (e, TimeSeries::constant(g, inst.primary_ef[k % inst.primary_ef.len()])))
        .collect();
    let demand = net
        .energies
        .iter()
        .enumerate()
        .filter(|(_, e)| e.role == Role::Final)
        .map(|(e, _)| (e, TimeSeries::from_fn(g, |y| inst.demand[e % inst.demand.len()] * (1.0 + 0.02 * (y - 2024) as f64))))
        .collect();
    Setup { net, shares, primary, demand }
}

/// Simultaneous damped iteration of both balance equations over every
/// energy at once, without any ordering.
pub fn oracle(s: &Setup) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let net = &s.net;
    let n = net.grid.len();
    let ne = net.energies.len();
    let mut ef = vec![vec![0.0; n]; ne];
    let mut prod = vec![vec![0.0; n]; ne];
    let mut direct = vec![vec![0.0; n]; ne];
    for (e, d) in &s.demand {
        direct[*e] = d.values().to_vec();
    }
    for _ in 0..20_000 {
        let mut next_ef = vec![vec![0.0; n]; ne];
        let mut next_prod = direct.clone();
        for (e, series) in &s.primary {
            next_ef[*e] = series.values().to_vec();
        }
        for (e, energy) in net.energies.iter().enumerate() {
            for (k, &p) in energy.pathways.iter().enumerate() {
                let pw = &net.pathways[p];
                let share = &s.shares.shares[e][k];
                for t in 0..n {
                    let mut impact = pw.direct_impact[t];
                    for (i, c) in &pw.inputs {
                        impact += c[t] * ef[*i][t];
                        next_prod[*i][t] += c[t] * share[t] * prod[e][t];
                    }
                    next_ef[e][t] += share[t] * impact;
                }
            }
        }
        let mut change: f64 = 0.0;
        for e in 0..ne {
            for t in 0..n {
                let a = (1.0 - DAMPING) * ef[e][t] + DAMPING * next_ef[e][t];
                let b = (1.0 - DAMPING) * prod[e][t] + DAMPING * next_prod[e][t];
                change = change.max((a - ef[e][t]).abs() / a.abs().max(1.0)).max((b - prod[e][t]).abs() / b.abs().max(1.0));
                ef[e][t] = a;
                prod[e][t] = b;
            }
        }
        if change < 1e-14 {
            break;
        }
    }
    (ef, prod)
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= ORACLE_TOL * a.abs().max(b.abs()).max(1.0)
}
