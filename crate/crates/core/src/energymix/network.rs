//! Energy types, production pathways and their dependency order.

use std::collections::BTreeMap;
use std::io::Read;

use serde::Deserialize;

use super::MixError;
use crate::store::{TimeGrid, TimeSeries};

/// First and last year of linear technology maturing.
pub const MATURING_START: i32 = 2025;
pub const MATURING_END: i32 = 2050;

/// Linear from `start_value` in 2025 to `end_value` in 2050, flat outside.
pub fn maturing_coefficient(start_value: f64, end_value: f64, grid: TimeGrid) -> TimeSeries<f64> {
    let (a, b) = (MATURING_START as f64, MATURING_END as f64);
    TimeSeries::from_fn(grid, |y| {
        let w = ((y as f64 - a) / (b - a)).clamp(0.0, 1.0);
        start_value + w * (end_value - start_value)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Primary,
    Intermediate,
    Final,
}

#[derive(Debug, Clone)]
pub struct EnergyType {
    pub name: String,
    pub role: Role,
    /// Indices into [`EnergyNetwork::pathways`], in catalog order. The last
    /// one takes the residual share.
    pub pathways: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Pathway {
    pub name: String,
    pub output: usize,
    /// (input energy, MJ input per MJ output).
    pub inputs: Vec<(usize, TimeSeries<f64>)>,
    /// gCO2 per MJ output.
    pub direct_impact: TimeSeries<f64>,
}

/// Pathway description by name, before resolution into a network.
#[derive(Debug, Clone, PartialEq)]
pub struct PathwaySpec {
    pub energy: String,
    pub name: String,
    /// (input, 2025 coefficient, 2050 coefficient)
    pub inputs: Vec<(String, f64, f64)>,
    /// (2025, 2050) direct emissions
    pub direct: (f64, f64),
}

/// Parse a catalog with header `energy,pathway,input,coef_2025,coef_2050,direct_gco2_mj`.
/// A pathway with several inputs spans several rows; an empty input marks a
/// pathway without modeled inputs.
pub fn parse_catalog<R: Read>(reader: R) -> Result<Vec<PathwaySpec>, MixError> {
    #[derive(Deserialize)]
    struct Row {
        energy: String,
        pathway: String,
        input: String,
        coef_2025: f64,
        coef_2050: f64,
        direct_gco2_mj: f64,
    }
    let mut specs: Vec<PathwaySpec> = Vec::new();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    for rec in rdr.deserialize() {
        let row: Row = rec.map_err(|e| MixError::Catalog(e.to_string()))?;
        if row.coef_2025 < 0.0 || row.coef_2050 < 0.0 || row.direct_gco2_mj < 0.0 {
            return Err(MixError::Catalog(format!("negative entry for {}/{}", row.energy, row.pathway)));
        }
        let existing = specs.iter_mut().find(|s| s.energy == row.energy && s.name == row.pathway);
        let spec = match existing {
            Some(s) => {
                if s.direct.0 != row.direct_gco2_mj {
                    return Err(MixError::Catalog(format!("inconsistent direct emissions for {}", row.pathway)));
                }
                s
            }
            None => {
                specs.push(PathwaySpec {
                    energy: row.energy.clone(),
                    name: row.pathway.clone(),
                    inputs: Vec::new(),
                    direct: (row.direct_gco2_mj, row.direct_gco2_mj),
                });
                specs.last_mut().expect("just pushed")
            }
        };
        if !row.input.is_empty() {
            spec.inputs.push((row.input, row.coef_2025, row.coef_2050));
        }
    }
    Ok(specs)
}

/// Acyclic production network resolved onto a time grid.
#[derive(Debug, Clone)]
pub struct EnergyNetwork {
    pub grid: TimeGrid,
    pub energies: Vec<EnergyType>,
    pub pathways: Vec<Pathway>,
    /// Every energy after all the inputs of its pathways.
    pub order: Vec<usize>,
}

impl EnergyNetwork {
    /// Resolve `specs`. Energies named in `finals` are final carriers; other
    /// energies with pathways are intermediate, those without are primary.
    pub fn build(grid: TimeGrid, specs: &[PathwaySpec], finals: &[&str]) -> Result<Self, MixError> {
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut energies: Vec<EnergyType> = Vec::new();
        let mut intern = |name: &str, energies: &mut Vec<EnergyType>| -> usize {
            *index.entry(name.to_string()).or_insert_with(|| {
                energies.push(EnergyType { name: name.to_string(), role: Role::Primary, pathways: Vec::new() });
                energies.len() - 1
            })
        };
        let mut pathways = Vec::new();
        for s in specs {
            let output = intern(&s.energy, &mut energies);
            let inputs = s
                .inputs
                .iter()
                .map(|(name, a, b)| (intern(name, &mut energies), maturing_coefficient(*a, *b, grid)))
                .collect();
            energies[output].pathways.push(pathways.len());
            pathways.push(Pathway {
                name: s.name.clone(),
                output,
                inputs,
                direct_impact: maturing_coefficient(s.direct.0, s.direct.1, grid),
            });
        }
        for e in energies.iter_mut() {
            if !e.pathways.is_empty() {
                e.role = Role::Intermediate;
            }
        }
        for f in finals {
            let Some(&k) = index.get(*f) else {
                return Err(MixError::UnknownEnergy(f.to_string()));
            };
            if energies[k].pathways.is_empty() {
                return Err(MixError::Catalog(format!("final energy `{f}` has no pathway")));
            }
            energies[k].role = Role::Final;
        }
        let order = topo_order(&energies, &pathways)?;
        Ok(EnergyNetwork { grid, energies, pathways, order })
    }

    pub fn energy_index(&self, name: &str) -> Result<usize, MixError> {
        self.energies.iter().position(|e| e.name == name).ok_or_else(|| MixError::UnknownEnergy(name.into()))
    }

    pub fn pathway_index(&self, energy: &str, pathway: &str) -> Result<usize, MixError> {
        let e = self.energy_index(energy)?;
        self.energies[e]
            .pathways
            .iter()
            .copied()
            .find(|&p| self.pathways[p].name == pathway)
            .ok_or_else(|| MixError::UnknownPathway(format!("{energy}/{pathway}")))
    }

    /// Energies with more than one pathway, i.e. those carrying share controls.
    pub fn mixed_energies(&self) -> Vec<usize> {
        (0..self.energies.len()).filter(|&e| self.energies[e].pathways.len() > 1).collect()
    }

    pub fn primaries(&self) -> Vec<usize> {
        (0..self.energies.len()).filter(|&e| self.energies[e].role == Role::Primary).collect()
    }

    /// Energies whose production consumes energy `e`, with the pathway.
    pub fn consumers_of(&self, e: usize) -> impl Iterator<Item = (usize, &TimeSeries<f64>)> + '_ {
        self.pathways
            .iter()
            .enumerate()
            .flat_map(move |(p, pw)| pw.inputs.iter().filter(move |(i, _)| *i == e).map(move |(_, c)| (p, c)))
    }
}

/// Depth-first ordering over `energy → pathway inputs` edges. A cycle is
/// reported with its member names.
pub fn topo_order(energies: &[EnergyType], pathways: &[Pathway]) -> Result<Vec<usize>, MixError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(
        e: usize,
        energies: &[EnergyType],
        pathways: &[Pathway],
        marks: &mut [Mark],
        stack: &mut Vec<usize>,
        order: &mut Vec<usize>,
    ) -> Result<(), MixError> {
        match marks[e] {
            Mark::Done => return Ok(()),
            Mark::Active => {
                let start = stack.iter().position(|&s| s == e).unwrap_or(0);
                let mut names: Vec<&str> = stack[start..].iter().map(|&s| energies[s].name.as_str()).collect();
                names.push(&energies[e].name);
                return Err(MixError::Cycle(names.join(" -> ")));
            }
            Mark::New => {}
        }
        marks[e] = Mark::Active;
        stack.push(e);
        for &p in &energies[e].pathways {
            for (i, _) in &pathways[p].inputs {
                visit(*i, energies, pathways, marks, stack, order)?;
            }
        }
        stack.pop();
        marks[e] = Mark::Done;
        order.push(e);
        Ok(())
    }
    let mut marks = vec![Mark::New; energies.len()];
    let mut order = Vec::with_capacity(energies.len());
    let mut stack = Vec::new();
    for e in 0..energies.len() {
        visit(e, energies, pathways, &mut marks, &mut stack, &mut order)?;
    }
    Ok(order)
}
