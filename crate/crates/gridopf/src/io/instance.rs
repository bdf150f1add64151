//! Instance document: parsing, unit normalization, and serialization.
//!
//! Every field that carries a physical unit is suffixed with it. Powers are
//! MW/MVAr on `base_mva`, ratings are MVA (current at 1 p.u. voltage),
//! shunt bounds are MVAr injected at 1 p.u. voltage, prices are $/MWh, and
//! line admittances are already per-unit as in industry exchange formats.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{CostFunction, PenaltySpec, PenaltyTier};
use crate::model::{
    Bus, Contingency, ContingencyKind, Generator, Line, Network, NetworkParts, SeedBus, SeedGen,
    SeedPoint,
};

#[derive(Debug, Error)]
pub enum ParseError {
    /// Malformed document (bad JSON or wrong value type).
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    /// Structurally valid document violating the data contract.
    #[error("semantic error: {0}")]
    Semantic(String),
}

macro_rules! require {
    ($opt:expr, $($ctx:tt)*) => {
        $opt.ok_or_else(|| ParseError::Semantic(format!($($ctx)*)))?
    };
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct RawInstance {
    base_mva: Option<f64>,
    #[serde(default)]
    buses: Vec<RawBus>,
    #[serde(default)]
    generators: Vec<RawGen>,
    #[serde(default)]
    lines: Vec<RawLine>,
    #[serde(default)]
    contingencies: Vec<RawContingency>,
    ref_bus: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    penalty: Option<RawPenalty>,
    #[serde(skip_serializing_if = "Option::is_none")]
    operating_point: Option<RawSeedPoint>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct RawBus {
    id: Option<usize>,
    vmin: Option<f64>,
    vmax: Option<f64>,
    vmin_e: Option<f64>,
    vmax_e: Option<f64>,
    p_load_mw: Option<f64>,
    q_load_mvar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b_min_mvar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b_max_mvar: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct RawGen {
    id: Option<usize>,
    bus: Option<usize>,
    p_min_mw: Option<f64>,
    p_max_mw: Option<f64>,
    q_min_mvar: Option<f64>,
    q_max_mvar: Option<f64>,
    /// MW of response per unit frequency deviation.
    droop_mw: Option<f64>,
    /// Cost breakpoints `[p_mw, price_per_mwh]`, convex.
    cost: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct RawLine {
    id: Option<usize>,
    origin: Option<usize>,
    destination: Option<usize>,
    g: Option<f64>,
    b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b_ch: Option<f64>,
    rating_mva: Option<f64>,
    rating_e_mva: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawContingency {
    id: Option<String>,
    kind: Option<ContingencyKind>,
    element: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawPenalty {
    imbalance: Vec<RawTier>,
    overload: Vec<RawTier>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawTier {
    /// Omitted on the final tier, which is unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width_mw: Option<f64>,
    price_per_mwh: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawSeedPoint {
    #[serde(default)]
    buses: Vec<RawSeedBus>,
    #[serde(default)]
    generators: Vec<RawSeedGen>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawSeedBus {
    id: usize,
    v: f64,
    /// Radians.
    theta: f64,
    #[serde(default)]
    b_mvar: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawSeedGen {
    id: usize,
    p_mw: f64,
    q_mvar: f64,
}

/// Parse an instance document and normalize it to per-unit.
///
/// Syntax errors carry line/column; semantic errors name the offending
/// element and the failed invariant. The returned network always passes
/// [`Network::validate`].
pub fn parse_instance(text: &str) -> Result<Network, ParseError> {
    let raw: RawInstance = serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let base = require!(raw.base_mva, "missing base_mva");
    if base.is_nan() || base <= 0.0 {
        return Err(ParseError::Semantic(format!(
            "base_mva must be positive, got {base}"
        )));
    }

    let mut buses = Vec::with_capacity(raw.buses.len());
    for (i, rb) in raw.buses.iter().enumerate() {
        let id = require!(rb.id, "bus at position {i}: missing id");
        buses.push(Bus {
            id,
            vmin: require!(rb.vmin, "bus {id}: missing vmin"),
            vmax: require!(rb.vmax, "bus {id}: missing vmax"),
            vmin_e: require!(rb.vmin_e, "bus {id}: missing vmin_e"),
            vmax_e: require!(rb.vmax_e, "bus {id}: missing vmax_e"),
            p_load: require!(rb.p_load_mw, "bus {id}: missing p_load_mw") / base,
            q_load: require!(rb.q_load_mvar, "bus {id}: missing q_load_mvar") / base,
            b_min: rb.b_min_mvar.unwrap_or(0.0) / base,
            b_max: rb.b_max_mvar.unwrap_or(0.0) / base,
        });
    }

    let mut generators = Vec::with_capacity(raw.generators.len());
    for (i, rg) in raw.generators.iter().enumerate() {
        let id = require!(rg.id, "generator at position {i}: missing id");
        let cost_mw = require!(rg.cost.clone(), "generator {id}: missing cost");
        if cost_mw.is_empty() {
            return Err(ParseError::Semantic(format!(
                "generator {id}: cost needs at least one breakpoint"
            )));
        }
        generators.push(Generator {
            id,
            bus: require!(rg.bus, "generator {id}: missing bus"),
            p_min: require!(rg.p_min_mw, "generator {id}: missing p_min_mw") / base,
            p_max: require!(rg.p_max_mw, "generator {id}: missing p_max_mw") / base,
            q_min: require!(rg.q_min_mvar, "generator {id}: missing q_min_mvar") / base,
            q_max: require!(rg.q_max_mvar, "generator {id}: missing q_max_mvar") / base,
            droop: require!(rg.droop_mw, "generator {id}: missing droop_mw") / base,
            cost: CostFunction {
                // $/MWh scales to $/p.u.-h by the base.
                breakpoints: cost_mw.iter().map(|&(p, c)| (p / base, c * base)).collect(),
            },
        });
    }

    let mut lines = Vec::with_capacity(raw.lines.len());
    for (i, rl) in raw.lines.iter().enumerate() {
        let id = require!(rl.id, "line at position {i}: missing id");
        lines.push(Line {
            id,
            origin: require!(rl.origin, "line {id}: missing origin"),
            destination: require!(rl.destination, "line {id}: missing destination"),
            g: require!(rl.g, "line {id}: missing g"),
            b: require!(rl.b, "line {id}: missing b"),
            b_ch: rl.b_ch.unwrap_or(0.0),
            rating: require!(rl.rating_mva, "line {id}: missing rating_mva") / base,
            rating_e: require!(rl.rating_e_mva, "line {id}: missing rating_e_mva") / base,
        });
    }

    let mut contingencies = Vec::with_capacity(raw.contingencies.len());
    for (i, rc) in raw.contingencies.iter().enumerate() {
        let id = require!(rc.id.clone(), "contingency at position {i}: missing id");
        contingencies.push(Contingency {
            kind: require!(rc.kind, "contingency {id:?}: missing kind"),
            element: require!(rc.element, "contingency {id:?}: missing element"),
            id,
        });
    }

    let penalty = match raw.penalty {
        None => PenaltySpec::default(),
        Some(rp) => PenaltySpec {
            imbalance: convert_tiers(&rp.imbalance, base, "imbalance")?,
            overload: convert_tiers(&rp.overload, base, "overload")?,
        },
    };

    let seed_point = raw.operating_point.map(|sp| SeedPoint {
        buses: sp
            .buses
            .iter()
            .map(|b| SeedBus {
                id: b.id,
                v: b.v,
                theta: b.theta,
                b: b.b_mvar / base,
            })
            .collect(),
        generators: sp
            .generators
            .iter()
            .map(|g| SeedGen {
                id: g.id,
                p: g.p_mw / base,
                q: g.q_mvar / base,
            })
            .collect(),
    });

    let net = NetworkParts {
        buses,
        generators,
        lines,
        contingencies,
        ref_bus: require!(raw.ref_bus, "missing ref_bus"),
        penalty,
        seed_point,
    }
    .build();

    let violations = net.validate();
    if !violations.is_empty() {
        return Err(ParseError::Semantic(violations.join("; ")));
    }
    Ok(net)
}

fn convert_tiers(
    raw: &[RawTier],
    base: f64,
    which: &str,
) -> Result<Vec<PenaltyTier>, ParseError> {
    if raw.is_empty() {
        return Err(ParseError::Semantic(format!(
            "penalty.{which}: needs at least one tier"
        )));
    }
    let mut tiers = Vec::with_capacity(raw.len());
    for (i, t) in raw.iter().enumerate() {
        let last = i == raw.len() - 1;
        let width = match (t.width_mw, last) {
            (None, true) => f64::INFINITY,
            (Some(w), false) => w / base,
            (None, false) => {
                return Err(ParseError::Semantic(format!(
                    "penalty.{which} tier {i}: only the final tier may omit width_mw"
                )))
            }
            (Some(_), true) => {
                return Err(ParseError::Semantic(format!(
                    "penalty.{which}: final tier must omit width_mw (it is unbounded)"
                )))
            }
        };
        tiers.push(PenaltyTier {
            width,
            price: t.price_per_mwh * base,
        });
    }
    Ok(tiers)
}

/// Serialize a per-unit network back to the instance document on the given
/// MVA base. Deterministic; `parse_instance` inverts it.
pub fn write_instance(net: &Network, base_mva: f64) -> String {
    let raw = RawInstance {
        base_mva: Some(base_mva),
        buses: net
            .buses()
            .iter()
            .map(|b| RawBus {
                id: Some(b.id),
                vmin: Some(b.vmin),
                vmax: Some(b.vmax),
                vmin_e: Some(b.vmin_e),
                vmax_e: Some(b.vmax_e),
                p_load_mw: Some(b.p_load * base_mva),
                q_load_mvar: Some(b.q_load * base_mva),
                b_min_mvar: (b.b_min != 0.0 || b.b_max != 0.0).then_some(b.b_min * base_mva),
                b_max_mvar: (b.b_min != 0.0 || b.b_max != 0.0).then_some(b.b_max * base_mva),
            })
            .collect(),
        generators: net
            .generators()
            .iter()
            .map(|g| RawGen {
                id: Some(g.id),
                bus: Some(g.bus),
                p_min_mw: Some(g.p_min * base_mva),
                p_max_mw: Some(g.p_max * base_mva),
                q_min_mvar: Some(g.q_min * base_mva),
                q_max_mvar: Some(g.q_max * base_mva),
                droop_mw: Some(g.droop * base_mva),
                cost: Some(
                    g.cost
                        .breakpoints
                        .iter()
                        .map(|&(p, c)| (p * base_mva, c / base_mva))
                        .collect(),
                ),
            })
            .collect(),
        lines: net
            .lines()
            .iter()
            .map(|l| RawLine {
                id: Some(l.id),
                origin: Some(l.origin),
                destination: Some(l.destination),
                g: Some(l.g),
                b: Some(l.b),
                b_ch: (l.b_ch != 0.0).then_some(l.b_ch),
                rating_mva: Some(l.rating * base_mva),
                rating_e_mva: Some(l.rating_e * base_mva),
            })
            .collect(),
        contingencies: net
            .contingencies()
            .iter()
            .map(|c| RawContingency {
                id: Some(c.id.clone()),
                kind: Some(c.kind),
                element: Some(c.element),
            })
            .collect(),
        ref_bus: Some(net.ref_bus()),
        penalty: Some(RawPenalty {
            imbalance: unconvert_tiers(&net.penalty().imbalance, base_mva),
            overload: unconvert_tiers(&net.penalty().overload, base_mva),
        }),
        operating_point: net.seed_point().map(|sp| RawSeedPoint {
            buses: sp
                .buses
                .iter()
                .map(|b| RawSeedBus {
                    id: b.id,
                    v: b.v,
                    theta: b.theta,
                    b_mvar: b.b * base_mva,
                })
                .collect(),
            generators: sp
                .generators
                .iter()
                .map(|g| RawSeedGen {
                    id: g.id,
                    p_mw: g.p * base_mva,
                    q_mvar: g.q * base_mva,
                })
                .collect(),
        }),
    };
    let mut text = serde_json::to_string_pretty(&raw).expect("instance serialization");
    text.push('\n');
    text
}

fn unconvert_tiers(tiers: &[PenaltyTier], base: f64) -> Vec<RawTier> {
    tiers
        .iter()
        .map(|t| RawTier {
            width_mw: t.width.is_finite().then_some(t.width * base),
            price_per_mwh: t.price / base,
        })
        .collect()
}
