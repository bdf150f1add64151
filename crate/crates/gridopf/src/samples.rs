//! Small built-in example networks used by tests, docs, and smoke scripts.
//!
//! The seeded generators are deterministic: the same seed always produces
//! the same network, with connected topology and enough generation reserve
//! that a zero-slack optimum exists.

use crate::cost::{CostFunction, PenaltySpec};
use crate::model::{
    Bus, Contingency, ContingencyKind, Generator, Line, Network, NetworkParts,
};

/// Deterministic splitmix64 stream for sample construction; keeps the
/// library free of an RNG dependency.
#[derive(Debug, Clone)]
pub struct SampleRng(u64);

impl SampleRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_add(0x9e3779b97f4a7c15))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

fn bus(id: usize, p_load: f64, q_load: f64) -> Bus {
    Bus {
        id,
        vmin: 0.95,
        vmax: 1.05,
        vmin_e: 0.9,
        vmax_e: 1.1,
        p_load,
        q_load,
        b_min: 0.0,
        b_max: 0.0,
    }
}

fn line(id: usize, origin: usize, destination: usize, g: f64, b: f64) -> Line {
    Line {
        id,
        origin,
        destination,
        g,
        b,
        b_ch: 0.0,
        rating: 1.0,
        rating_e: 1.2,
    }
}

/// Slack generator plus one PQ load over a single lossless line.
pub fn two_bus_parts() -> NetworkParts {
    NetworkParts {
        buses: vec![bus(1, 0.0, 0.0), bus(2, 0.5, 0.1)],
        generators: vec![Generator {
            id: 1,
            bus: 1,
            p_min: 0.0,
            p_max: 2.0,
            q_min: -1.0,
            q_max: 1.0,
            droop: 1.0,
            cost: CostFunction::linear(0.0, 800.0),
        }],
        lines: vec![line(1, 1, 2, 0.0, -10.0)],
        contingencies: vec![],
        ref_bus: 1,
        penalty: PenaltySpec::default(),
        seed_point: None,
    }
}

pub fn two_bus() -> Network {
    two_bus_parts().build()
}

/// Two parallel circuits between the same pair of buses, with one line-out
/// contingency per circuit.
pub fn two_bus_double_circuit() -> Network {
    let mut parts = two_bus_parts();
    parts.lines = vec![line(1, 1, 2, 0.0, -8.0), line(2, 1, 2, 0.0, -8.0)];
    parts.contingencies = vec![
        Contingency {
            id: "E1".into(),
            kind: ContingencyKind::LineOut,
            element: 1,
        },
        Contingency {
            id: "E2".into(),
            kind: ContingencyKind::LineOut,
            element: 2,
        },
    ];
    parts.build()
}

/// Three buses in a ring, one generator per bus, outage contingencies for
/// each generator and one ring line.
pub fn three_gen_ring() -> Network {
    let gen = |id: usize, bus: usize, marginal: f64| Generator {
        id,
        bus,
        p_min: 0.0,
        p_max: 1.0,
        q_min: -0.5,
        q_max: 0.5,
        droop: 1.0,
        cost: CostFunction::linear(0.0, marginal),
    };
    NetworkParts {
        buses: vec![bus(1, 0.0, 0.0), bus(2, 0.2, 0.04), bus(3, 0.4, 0.08)],
        generators: vec![gen(1, 1, 800.0), gen(2, 2, 900.0), gen(3, 3, 950.0)],
        lines: vec![
            line(1, 1, 2, 0.05, -8.0),
            line(2, 2, 3, 0.05, -8.0),
            line(3, 3, 1, 0.05, -8.0),
        ],
        contingencies: vec![
            Contingency {
                id: "G1".into(),
                kind: ContingencyKind::GeneratorOut,
                element: 1,
            },
            Contingency {
                id: "G2".into(),
                kind: ContingencyKind::GeneratorOut,
                element: 2,
            },
            Contingency {
                id: "G3".into(),
                kind: ContingencyKind::GeneratorOut,
                element: 3,
            },
            Contingency {
                id: "E1".into(),
                kind: ContingencyKind::LineOut,
                element: 1,
            },
        ],
        ref_bus: 1,
        penalty: PenaltySpec::default(),
        seed_point: None,
    }
    .build()
}

/// Five-bus meshed case with three generators and a shunt-capable bus;
/// sized for gradient checks and small optimizer studies.
pub fn five_bus() -> Network {
    let gen = |id: usize, bus: usize, p_max: f64, marginal: Vec<(f64, f64)>| Generator {
        id,
        bus,
        p_min: 0.0,
        p_max,
        q_min: -0.8,
        q_max: 0.8,
        droop: 1.5,
        cost: CostFunction {
            breakpoints: marginal,
        },
    };
    let mut b4 = bus(4, 0.35, 0.07);
    b4.b_min = -0.1;
    b4.b_max = 0.3;
    NetworkParts {
        buses: vec![
            bus(1, 0.0, 0.0),
            bus(2, 0.25, 0.05),
            bus(3, 0.3, 0.06),
            b4,
            bus(5, 0.2, 0.04),
        ],
        generators: vec![
            gen(1, 1, 1.5, vec![(0.0, 700.0), (0.8, 850.0)]),
            gen(2, 3, 1.0, vec![(0.0, 900.0), (0.5, 950.0)]),
            gen(3, 5, 0.8, vec![(0.0, 980.0)]),
        ],
        lines: vec![
            line(1, 1, 2, 0.08, -9.0),
            line(2, 2, 3, 0.06, -7.0),
            line(3, 3, 4, 0.08, -9.0),
            line(4, 4, 5, 0.06, -7.0),
            line(5, 5, 1, 0.08, -9.0),
            line(6, 2, 4, 0.1, -5.0),
        ],
        contingencies: vec![
            Contingency {
                id: "G2".into(),
                kind: ContingencyKind::GeneratorOut,
                element: 2,
            },
            Contingency {
                id: "E6".into(),
                kind: ContingencyKind::LineOut,
                element: 6,
            },
        ],
        ref_bus: 1,
        penalty: PenaltySpec::default(),
        seed_point: None,
    }
    .build()
}

/// Cheap remote unit feeding the load bus over two parallel circuits, with
/// an expensive droop-heavy local unit. Losing one circuit overloads the
/// survivor unless base dispatch shifts toward the local unit, which makes
/// this the canonical case where hedging against the contingency pays.
pub fn reserve_scarce() -> Network {
    let mut parts = two_bus_parts();
    parts.generators[0] = Generator {
        id: 1,
        bus: 1,
        p_min: 0.0,
        p_max: 2.0,
        q_min: -1.0,
        q_max: 1.0,
        droop: 0.5,
        cost: CostFunction::linear(0.0, 500.0),
    };
    parts.generators.push(Generator {
        id: 2,
        bus: 2,
        p_min: 0.0,
        p_max: 0.6,
        q_min: -0.6,
        q_max: 0.6,
        droop: 2.0,
        cost: CostFunction::linear(0.0, 1200.0),
    });
    let circuit = |id: usize| Line {
        id,
        origin: 1,
        destination: 2,
        g: 0.0,
        b: -10.0,
        b_ch: 0.0,
        rating: 0.3,
        rating_e: 0.35,
    };
    parts.lines = vec![circuit(1), circuit(2)];
    parts.buses[1].p_load = 0.5;
    parts.buses[1].q_load = 0.1;
    parts.contingencies = vec![Contingency {
        id: "E1".into(),
        kind: ContingencyKind::LineOut,
        element: 1,
    }];
    parts.build()
}

/// Seeded random connected network for solver tests: ring topology plus
/// chords, light loading, generous reserve.
pub fn random_network(seed: u64, n_buses: usize, n_gens: usize) -> Network {
    random_network_parts(seed, n_buses, n_gens).build()
}

pub fn random_network_parts(seed: u64, n_buses: usize, n_gens: usize) -> NetworkParts {
    assert!(n_buses >= 2 && n_gens >= 1);
    let mut rng = SampleRng::new(seed);

    let mut buses: Vec<Bus> = (1..=n_buses)
        .map(|id| {
            bus(
                id,
                rng.range(0.02, 0.12),
                rng.range(0.0, 0.03),
            )
        })
        .collect();

    // Ring keeps the graph connected under any single line outage.
    let mut lines: Vec<Line> = Vec::new();
    for i in 0..n_buses {
        let origin = i + 1;
        let destination = if i + 1 == n_buses { 1 } else { i + 2 };
        if n_buses == 2 && i == 1 {
            break;
        }
        lines.push(Line {
            id: lines.len() + 1,
            origin,
            destination,
            g: rng.range(0.0, 0.2),
            b: rng.range(-12.0, -5.0),
            b_ch: rng.range(0.0, 0.06),
            rating: 1.2,
            rating_e: 1.5,
        });
    }
    // A few chords on larger cases.
    if n_buses >= 6 {
        for _ in 0..n_buses / 4 {
            let a = rng.below(n_buses) + 1;
            let c = rng.below(n_buses) + 1;
            if a != c {
                lines.push(Line {
                    id: lines.len() + 1,
                    origin: a,
                    destination: c,
                    g: rng.range(0.0, 0.15),
                    b: rng.range(-9.0, -4.0),
                    b_ch: 0.0,
                    rating: 1.2,
                    rating_e: 1.5,
                });
            }
        }
    }

    let total_load: f64 = buses.iter().map(|b| b.p_load).sum();
    let cap_per_gen = 2.0 * total_load / n_gens as f64;
    let generators: Vec<Generator> = (1..=n_gens)
        .map(|id| {
            let host = if id == 1 { 1 } else { rng.below(n_buses) + 1 };
            Generator {
                id,
                bus: host,
                p_min: 0.0,
                p_max: cap_per_gen * rng.range(0.8, 1.4),
                q_min: -1.0,
                q_max: 1.0,
                droop: rng.range(0.5, 2.0),
                cost: CostFunction::linear(0.0, rng.range(500.0, 950.0)),
            }
        })
        .collect();

    // One shunt-capable bus on occasion.
    if n_buses >= 4 && rng.next_f64() < 0.5 {
        let i = rng.below(n_buses);
        buses[i].b_min = -0.05;
        buses[i].b_max = 0.15;
    }

    // Generator outages only where reserve survives; ring-line outages
    // never island the ring.
    let mut contingencies = Vec::new();
    let total_cap: f64 = generators.iter().map(|g| g.p_max).sum();
    for g in &generators {
        if n_gens >= 2 && total_cap - g.p_max >= 1.15 * total_load {
            contingencies.push(Contingency {
                id: format!("G{}", g.id),
                kind: ContingencyKind::GeneratorOut,
                element: g.id,
            });
        }
    }
    if n_buses >= 3 {
        let e = rng.below(n_buses.min(lines.len())) + 1;
        contingencies.push(Contingency {
            id: format!("E{e}"),
            kind: ContingencyKind::LineOut,
            element: e,
        });
    }

    NetworkParts {
        buses,
        generators,
        lines,
        contingencies,
        ref_bus: 1,
        penalty: PenaltySpec::default(),
        seed_point: None,
    }
}

/// Small random network for Jacobian and oracle tests (single generator at
/// bus 1, chain-plus-ring topology).
pub fn random_small_network(seed: u64, n_buses: usize) -> Network {
    random_network(seed, n_buses, 1)
}
