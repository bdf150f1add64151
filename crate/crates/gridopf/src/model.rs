//! Immutable per-unit network data model, validation, and contingency-derived
//! topology sets.
//!
//! All quantities are stored in per-unit on a single system base; the parser
//! in [`crate::io`] performs the MVA normalization so nothing here ever sees
//! physical units. Angles are radians.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{CostFunction, PenaltySpec};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("unknown {kind} id {id}")]
    UnknownElement { kind: &'static str, id: usize },
    #[error("unknown contingency {0:?}")]
    UnknownContingency(String),
}

/// Network node with voltage bounds (base and emergency), constant-power
/// load, and switchable shunt susceptance range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    /// Base-case voltage bounds, p.u.
    pub vmin: f64,
    pub vmax: f64,
    /// Emergency (post-contingency) voltage bounds, p.u.
    pub vmin_e: f64,
    pub vmax_e: f64,
    /// Constant power withdrawal, p.u.
    pub p_load: f64,
    pub q_load: f64,
    /// Shunt susceptance range, p.u.
    pub b_min: f64,
    pub b_max: f64,
}

/// Dispatchable generator with droop response slope and production cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: usize,
    /// Hosting bus id.
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Droop slope, p.u. power per unit frequency deviation (≥ 0).
    pub droop: f64,
    pub cost: CostFunction,
}

/// AC transmission line: series admittance G + iB plus total charging
/// susceptance split across the two ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: usize,
    pub origin: usize,
    pub destination: usize,
    /// Series conductance, p.u.
    pub g: f64,
    /// Series susceptance, p.u.
    pub b: f64,
    /// Total charging susceptance, p.u.
    pub b_ch: f64,
    /// Thermal current rating, p.u.
    pub rating: f64,
    /// Emergency current rating, p.u.
    pub rating_e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContingencyKind {
    GeneratorOut,
    LineOut,
}

/// Single-element (N−1) outage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contingency {
    pub id: String,
    pub kind: ContingencyKind,
    pub element: usize,
}

/// Optional pre-specified operating point shipped with an instance; used as
/// a warm start and as the evaluator's worst-case fallback point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeedPoint {
    pub buses: Vec<SeedBus>,
    pub generators: Vec<SeedGen>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedBus {
    pub id: usize,
    pub v: f64,
    pub theta: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedGen {
    pub id: usize,
    pub p: f64,
    pub q: f64,
}

/// Mutable staging area for building a [`Network`].
#[derive(Debug, Clone, Default)]
pub struct NetworkParts {
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub lines: Vec<Line>,
    pub contingencies: Vec<Contingency>,
    pub ref_bus: usize,
    pub penalty: PenaltySpec,
    pub seed_point: Option<SeedPoint>,
}

impl NetworkParts {
    pub fn build(self) -> Network {
        Network::new(
            self.buses,
            self.generators,
            self.lines,
            self.contingencies,
            self.ref_bus,
            self.penalty,
            self.seed_point,
        )
    }
}

/// Immutable per-unit grid description. Construct once, share read-only.
#[derive(Debug, Clone)]
pub struct Network {
    buses: Vec<Bus>,
    generators: Vec<Generator>,
    lines: Vec<Line>,
    contingencies: Vec<Contingency>,
    ref_bus: usize,
    penalty: PenaltySpec,
    seed_point: Option<SeedPoint>,

    bus_pos: HashMap<usize, usize>,
    gen_pos: HashMap<usize, usize>,
    line_pos: HashMap<usize, usize>,
    /// Generator positions hosted at each bus position.
    gens_at: Vec<Vec<usize>>,
    /// Line positions incident to each bus position (origin side, dest side).
    lines_from: Vec<Vec<usize>>,
    lines_to: Vec<Vec<usize>>,
}

impl Network {
    pub fn new(
        buses: Vec<Bus>,
        generators: Vec<Generator>,
        lines: Vec<Line>,
        contingencies: Vec<Contingency>,
        ref_bus: usize,
        penalty: PenaltySpec,
        seed_point: Option<SeedPoint>,
    ) -> Self {
        let bus_pos: HashMap<usize, usize> =
            buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        let gen_pos: HashMap<usize, usize> = generators
            .iter()
            .enumerate()
            .map(|(i, g)| (g.id, i))
            .collect();
        let line_pos: HashMap<usize, usize> =
            lines.iter().enumerate().map(|(i, l)| (l.id, i)).collect();

        let mut gens_at = vec![Vec::new(); buses.len()];
        for (i, g) in generators.iter().enumerate() {
            if let Some(&b) = bus_pos.get(&g.bus) {
                gens_at[b].push(i);
            }
        }
        let mut lines_from = vec![Vec::new(); buses.len()];
        let mut lines_to = vec![Vec::new(); buses.len()];
        for (i, l) in lines.iter().enumerate() {
            if let Some(&b) = bus_pos.get(&l.origin) {
                lines_from[b].push(i);
            }
            if let Some(&b) = bus_pos.get(&l.destination) {
                lines_to[b].push(i);
            }
        }

        Self {
            buses,
            generators,
            lines,
            contingencies,
            ref_bus,
            penalty,
            seed_point,
            bus_pos,
            gen_pos,
            line_pos,
            gens_at,
            lines_from,
            lines_to,
        }
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }
    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }
    pub fn lines(&self) -> &[Line] {
        &self.lines
    }
    pub fn contingencies(&self) -> &[Contingency] {
        &self.contingencies
    }
    pub fn ref_bus(&self) -> usize {
        self.ref_bus
    }
    pub fn penalty(&self) -> &PenaltySpec {
        &self.penalty
    }
    pub fn seed_point(&self) -> Option<&SeedPoint> {
        self.seed_point.as_ref()
    }

    /// Position of a bus id in `buses()`.
    pub fn bus_index(&self, id: usize) -> Result<usize, ModelError> {
        self.bus_pos
            .get(&id)
            .copied()
            .ok_or(ModelError::UnknownElement { kind: "bus", id })
    }
    pub fn gen_index(&self, id: usize) -> Result<usize, ModelError> {
        self.gen_pos
            .get(&id)
            .copied()
            .ok_or(ModelError::UnknownElement { kind: "generator", id })
    }
    pub fn line_index(&self, id: usize) -> Result<usize, ModelError> {
        self.line_pos
            .get(&id)
            .copied()
            .ok_or(ModelError::UnknownElement { kind: "line", id })
    }

    /// Generator positions hosted at bus position `bus_idx`.
    pub fn gens_at_bus(&self, bus_idx: usize) -> &[usize] {
        &self.gens_at[bus_idx]
    }
    /// Line positions whose origin is bus position `bus_idx`.
    pub fn lines_from_bus(&self, bus_idx: usize) -> &[usize] {
        &self.lines_from[bus_idx]
    }
    /// Line positions whose destination is bus position `bus_idx`.
    pub fn lines_to_bus(&self, bus_idx: usize) -> &[usize] {
        &self.lines_to[bus_idx]
    }

    /// Ref-bus position, assuming a validated network.
    pub fn ref_bus_index(&self) -> usize {
        self.bus_pos.get(&self.ref_bus).copied().unwrap_or(0)
    }

    pub fn total_load(&self) -> (f64, f64) {
        self.buses
            .iter()
            .fold((0.0, 0.0), |(p, q), b| (p + b.p_load, q + b.q_load))
    }

    /// Check every type invariant plus base-graph connectivity. Returns an
    /// empty list iff the network is well-formed. Reports, never throws.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();

        let mut seen = BTreeSet::new();
        for b in &self.buses {
            if !seen.insert(b.id) {
                out.push(format!("duplicate id: bus {}", b.id));
            }
            if !(0.0 < b.vmin_e && b.vmin_e <= b.vmin && b.vmin <= b.vmax && b.vmax <= b.vmax_e) {
                out.push(format!(
                    "bus {}: voltage bounds must satisfy 0 < vmin_e <= vmin <= vmax <= vmax_e \
                     (got {}, {}, {}, {})",
                    b.id, b.vmin_e, b.vmin, b.vmax, b.vmax_e
                ));
            }
            if b.b_min > b.b_max {
                out.push(format!("bus {}: b_min > b_max", b.id));
            }
        }

        let mut seen = BTreeSet::new();
        for g in &self.generators {
            if !seen.insert(g.id) {
                out.push(format!("duplicate id: generator {}", g.id));
            }
            if !self.bus_pos.contains_key(&g.bus) {
                out.push(format!(
                    "generator {}: dangling reference to bus {}",
                    g.id, g.bus
                ));
            }
            if g.p_min > g.p_max {
                out.push(format!("generator {}: p_min > p_max", g.id));
            }
            if g.q_min > g.q_max {
                out.push(format!("generator {}: q_min > q_max", g.id));
            }
            if g.droop < 0.0 {
                out.push(format!("generator {}: droop must be >= 0", g.id));
            }
            if !g.cost.is_convex() {
                out.push(format!("generator {}: cost is not convex", g.id));
            } else if g.cost.domain_start() > g.p_min {
                out.push(format!(
                    "generator {}: cost domain does not cover [p_min, p_max]",
                    g.id
                ));
            }
        }

        let mut seen = BTreeSet::new();
        for l in &self.lines {
            if !seen.insert(l.id) {
                out.push(format!("duplicate id: line {}", l.id));
            }
            for end in [l.origin, l.destination] {
                if !self.bus_pos.contains_key(&end) {
                    out.push(format!("line {}: dangling reference to bus {}", l.id, end));
                }
            }
            if l.origin == l.destination {
                out.push(format!("line {}: origin equals destination", l.id));
            }
            if l.rating <= 0.0 {
                out.push(format!("line {}: rating must be positive", l.id));
            }
            if l.rating_e < l.rating {
                out.push(format!("line {}: emergency rating below base rating", l.id));
            }
        }

        let mut seen = BTreeSet::new();
        for c in &self.contingencies {
            if !seen.insert(c.id.clone()) {
                out.push(format!("duplicate id: contingency {:?}", c.id));
            }
            let exists = match c.kind {
                ContingencyKind::GeneratorOut => self.gen_pos.contains_key(&c.element),
                ContingencyKind::LineOut => self.line_pos.contains_key(&c.element),
            };
            if !exists {
                out.push(format!(
                    "contingency {:?}: dangling reference to element {}",
                    c.id, c.element
                ));
            }
        }

        if !self.bus_pos.contains_key(&self.ref_bus) {
            out.push(format!("reference bus {} does not exist", self.ref_bus));
        }
        if !self.penalty.is_valid() {
            out.push("penalty tiers invalid: prices must strictly increase, last tier unbounded"
                .to_string());
        }
        if !self.is_connected() {
            out.push("base-case graph is not connected".to_string());
        }

        out
    }

    /// Base-graph connectivity over all lines (BFS from the first bus).
    fn is_connected(&self) -> bool {
        if self.buses.is_empty() {
            return false;
        }
        let mut visited = vec![false; self.buses.len()];
        let mut queue = VecDeque::from([0usize]);
        visited[0] = true;
        while let Some(i) = queue.pop_front() {
            for &e in self.lines_from[i].iter().chain(&self.lines_to[i]) {
                let l = &self.lines[e];
                for end in [l.origin, l.destination] {
                    if let Some(&j) = self.bus_pos.get(&end) {
                        if !visited[j] {
                            visited[j] = true;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        visited.into_iter().all(|v| v)
    }

    /// Online element sets G(k), E(k) after removing the outaged element.
    pub fn post_contingency_sets(&self, k: &Contingency) -> Result<OutageSets, ModelError> {
        let mut sets = OutageSets::base(self);
        match k.kind {
            ContingencyKind::GeneratorOut => {
                if !self.gen_pos.contains_key(&k.element) {
                    return Err(ModelError::UnknownElement { kind: "generator", id: k.element });
                }
                sets.generators.remove(&k.element);
            }
            ContingencyKind::LineOut => {
                if !self.line_pos.contains_key(&k.element) {
                    return Err(ModelError::UnknownElement { kind: "line", id: k.element });
                }
                sets.lines.remove(&k.element);
            }
        }
        Ok(sets)
    }

    pub fn contingency(&self, id: &str) -> Result<&Contingency, ModelError> {
        self.contingencies
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| ModelError::UnknownContingency(id.to_string()))
    }

    /// Clone back into a mutable staging struct, e.g. to swap the
    /// contingency list or the seed point.
    pub fn to_parts(&self) -> NetworkParts {
        NetworkParts {
            buses: self.buses.clone(),
            generators: self.generators.clone(),
            lines: self.lines.clone(),
            contingencies: self.contingencies.clone(),
            ref_bus: self.ref_bus,
            penalty: self.penalty.clone(),
            seed_point: self.seed_point.clone(),
        }
    }
}

/// Online generator and line id sets for one system condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutageSets {
    pub generators: BTreeSet<usize>,
    pub lines: BTreeSet<usize>,
}

impl OutageSets {
    /// The base case: every element online.
    pub fn base(net: &Network) -> Self {
        Self {
            generators: net.generators.iter().map(|g| g.id).collect(),
            lines: net.lines.iter().map(|l| l.id).collect(),
        }
    }

    pub fn gen_online(&self, id: usize) -> bool {
        self.generators.contains(&id)
    }
    pub fn line_online(&self, id: usize) -> bool {
        self.lines.contains(&id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    #[test]
    fn well_formed_network_validates_clean() {
        let net = samples::two_bus();
        assert_eq!(net.validate(), Vec::<String>::new());
    }

    #[test]
    fn inverted_voltage_bounds_reported() {
        let mut parts = samples::two_bus_parts();
        parts.buses[1].vmin = 1.2;
        parts.buses[1].vmax = 0.9;
        let net = parts.build();
        let violations = net.validate();
        assert_eq!(violations.len(), 1);
        assert!(violations[0].contains("bus 2"), "{violations:?}");
    }

    #[test]
    fn dangling_line_reference_reported() {
        let mut parts = samples::two_bus_parts();
        parts.lines[0].destination = 99;
        let net = parts.build();
        let violations = net.validate();
        assert!(
            violations.iter().any(|v| v.contains("dangling") && v.contains("99")),
            "{violations:?}"
        );
    }

    #[test]
    fn duplicate_bus_id_reported() {
        let mut parts = samples::two_bus_parts();
        parts.buses[1].id = 1;
        let net = parts.build();
        assert!(net
            .validate()
            .iter()
            .any(|v| v.contains("duplicate id: bus 1")));
    }

    #[test]
    fn generator_out_removes_only_that_generator() {
        let net = samples::three_gen_ring();
        let k = Contingency {
            id: "G2".into(),
            kind: ContingencyKind::GeneratorOut,
            element: 2,
        };
        let sets = net.post_contingency_sets(&k).unwrap();
        assert_eq!(sets.generators, BTreeSet::from([1, 3]));
        assert_eq!(sets.lines.len(), net.lines().len());
    }

    #[test]
    fn line_out_removes_only_that_line() {
        let net = samples::two_bus_double_circuit();
        let k = Contingency {
            id: "E1".into(),
            kind: ContingencyKind::LineOut,
            element: 1,
        };
        let sets = net.post_contingency_sets(&k).unwrap();
        assert_eq!(sets.lines, BTreeSet::from([2]));
        assert_eq!(sets.generators.len(), net.generators().len());
    }

    #[test]
    fn outage_of_unknown_element_errors() {
        let net = samples::two_bus();
        let k = Contingency {
            id: "E9".into(),
            kind: ContingencyKind::LineOut,
            element: 9,
        };
        assert!(net.post_contingency_sets(&k).is_err());
    }

    #[test]
    fn outage_sets_lose_exactly_one_element() {
        let net = samples::three_gen_ring();
        let total = net.generators().len() + net.lines().len();
        for k in net.contingencies() {
            let sets = net.post_contingency_sets(k).unwrap();
            assert_eq!(sets.generators.len() + sets.lines.len(), total - 1);
        }
    }

    #[test]
    fn validate_is_idempotent() {
        let net = samples::two_bus();
        assert_eq!(net.validate(), net.validate());
    }
}
