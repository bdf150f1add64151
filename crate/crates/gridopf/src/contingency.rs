//! Post-contingency response solver.
//!
//! Given a fixed base state, each contingency state is pinned down by
//! automatic controller behavior: generators regulate their bus voltage at
//! the base value until reactive limits saturate, and droop control moves
//! active power with the frequency deviation δ until active limits saturate.
//! Both controllers are complementarity constraints; this solver enforces
//! them by an extended Newton method (unknowns θ, v at PQ buses, δ) plus
//! active-set switching of the regulated buses.
//!
//! Shunts are frozen at their base values: b_{n,k} = b_{n,0}.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::acpf::{all_branch_flows, branch_flow_partials, bus_mismatch, BaseState, OperatingPoint};
use crate::model::{Contingency, ModelError, Network, OutageSets};

/// Knobs for [`solve_contingency`].
#[derive(Debug, Clone)]
pub struct ContingencyConfig {
    /// Acceptable complementarity residual.
    pub comp_tol: f64,
    /// Maximum Newton-plus-switching rounds.
    pub max_switch_rounds: usize,
    /// Inner Newton mismatch tolerance.
    pub newton_tol: f64,
    /// Inner Newton iteration budget per round.
    pub max_newton_iter: usize,
    /// |δ| beyond this triggers the fallback path.
    pub delta_guard: f64,
}

impl Default for ContingencyConfig {
    fn default() -> Self {
        Self {
            comp_tol: 1e-6,
            max_switch_rounds: 15,
            newton_tol: 1e-10,
            max_newton_iter: 50,
            delta_guard: 10.0,
        }
    }
}

/// Full post-contingency decision vector plus derived deviation variables.
///
/// Invariants on a solved state: all ν, ρ, σ ≥ 0; ν⁺−ν⁻ = v_k − v_0 at each
/// regulated bus; ρ⁺−ρ⁻ = p_{g,k} − (p_{g,0} + A_g·δ); offline elements
/// carry zero power.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyState {
    pub point: OperatingPoint,
    pub delta: f64,
    /// Voltage increase/decrease at regulated buses, per bus.
    pub nu_plus: Vec<f64>,
    pub nu_minus: Vec<f64>,
    /// Upward/downward droop deviations, per generator.
    pub rho_plus: Vec<f64>,
    pub rho_minus: Vec<f64>,
    /// Power-balance residuals, per bus.
    pub slack_p: Vec<f64>,
    pub slack_q: Vec<f64>,
    /// Thermal overload beyond emergency ratings, per line end.
    pub sigma_o: Vec<f64>,
    pub sigma_d: Vec<f64>,
    /// Set when the solver fell back or could not resolve the controllers.
    pub degraded: bool,
}

/// Residuals of the four complementarity families, each reported as
/// max over elements of min(max(a,0), max(b,0)) for the pair a ⊥ b.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComplementarityReport {
    /// ν⁻ ⊥ (Q̄ − q)
    pub nu_minus_qmax: f64,
    /// ν⁺ ⊥ (q − Q̲)
    pub nu_plus_qmin: f64,
    /// ρ⁻ ⊥ (P̄ − p)
    pub rho_minus_pmax: f64,
    /// ρ⁺ ⊥ (p − P̲)
    pub rho_plus_pmin: f64,
}

impl ComplementarityReport {
    pub fn max(&self) -> f64 {
        self.nu_minus_qmax
            .max(self.nu_plus_qmin)
            .max(self.rho_minus_pmax)
            .max(self.rho_plus_pmin)
    }
}

/// Droop response: clamp(p_g0 + A_g·δ, p_min, p_max). The implied ρ±
/// deviations satisfy their complementarity pairs exactly.
pub fn droop_response(p_g0: f64, droop: f64, delta: f64, p_min: f64, p_max: f64) -> f64 {
    (p_g0 + droop * delta).clamp(p_min, p_max)
}

/// Regulation status of a bus inside the switching loop.
#[derive(Debug, Clone, Copy, PartialEq)]
enum RegState {
    /// Holds v = v_0; aggregate q within limits.
    Pv,
    /// Reactive capability exhausted high: q = Q̄, requires v ≤ v_0.
    ClampedHigh,
    /// Exhausted low: q = Q̲, requires v ≥ v_0.
    ClampedLow,
    /// No online generator at the bus.
    Unregulated,
}

/// Solve the post-contingency state for `k` given the base state.
///
/// Never panics on numerical trouble: divergence, a singular system, or a
/// runaway δ produce the frozen-voltage bisection fallback with the
/// `degraded` flag set. Only an unknown contingency element is an error.
pub fn solve_contingency(
    net: &Network,
    base: &BaseState,
    k: &Contingency,
    cfg: &ContingencyConfig,
) -> Result<ContingencyState, ModelError> {
    let online = net.post_contingency_sets(k)?;

    let mut point = base.clone();
    zero_offline(net, &online, &mut point);

    let islands = find_islands(net, &online);
    let generating: Vec<&Island> = islands.iter().filter(|i| !i.online_gens.is_empty()).collect();

    if generating.is_empty() {
        // Nothing controllable: the whole balance lands on the slacks.
        let mut state = derive_contingency_state(net, base, &online, point, 0.0);
        state.degraded = true;
        return Ok(state);
    }

    let mut deltas = Vec::with_capacity(generating.len());
    let mut failed = false;
    for island in &generating {
        match solve_island(net, base, &online, island, &mut point, cfg) {
            Some(delta) if delta.abs() <= cfg.delta_guard => deltas.push((island, delta)),
            _ => {
                failed = true;
                break;
            }
        }
    }

    if failed {
        return Ok(fallback_state(net, base, &online, cfg));
    }

    // Report the δ of the island holding the reference bus, else of the
    // largest generating island.
    let ref_idx = net.ref_bus_index();
    let delta = deltas
        .iter()
        .find(|(i, _)| i.buses.contains(&ref_idx))
        .or_else(|| deltas.iter().max_by_key(|(i, _)| i.buses.len()))
        .map(|&(_, d)| d)
        .unwrap_or(0.0);

    // Keep voltages inside the emergency box; any resulting balance error
    // goes to the slacks. Regulated-bus deviation directions survive the
    // clamp because v_0 lies inside the emergency box.
    for (i, bus) in net.buses().iter().enumerate() {
        point.v[i] = point.v[i].clamp(bus.vmin_e, bus.vmax_e);
    }

    let mut state = derive_contingency_state(net, base, &online, point, delta);
    // Multiple alive islands cannot share one δ honestly.
    state.degraded = generating.len() > 1;
    if complementarity_residual_of(net, base, &online, &state).max() > cfg.comp_tol {
        state.degraded = true;
    }
    Ok(state)
}

/// Report min(max(a,0), max(b,0)) for every complementarity pair of `state`.
pub fn complementarity_residual(
    net: &Network,
    base: &BaseState,
    k: &Contingency,
    state: &ContingencyState,
) -> Result<ComplementarityReport, ModelError> {
    let online = net.post_contingency_sets(k)?;
    let _ = base;
    Ok(complementarity_residual_of(net, base, &online, state))
}

fn complementarity_residual_of(
    net: &Network,
    _base: &BaseState,
    online: &OutageSets,
    state: &ContingencyState,
) -> ComplementarityReport {
    let mut report = ComplementarityReport::default();
    let pair = |a: f64, b: f64| a.max(0.0).min(b.max(0.0));
    for (gi, g) in net.generators().iter().enumerate() {
        if !online.gen_online(g.id) {
            continue;
        }
        let n = net.bus_index(g.bus).expect("validated");
        let q = state.point.q_g[gi];
        let p = state.point.p_g[gi];
        report.nu_minus_qmax = report.nu_minus_qmax.max(pair(state.nu_minus[n], g.q_max - q));
        report.nu_plus_qmin = report.nu_plus_qmin.max(pair(state.nu_plus[n], q - g.q_min));
        report.rho_minus_pmax = report.rho_minus_pmax.max(pair(state.rho_minus[gi], g.p_max - p));
        report.rho_plus_pmin = report.rho_plus_pmin.max(pair(state.rho_plus[gi], p - g.p_min));
    }
    report
}

/// Derive the deviation variables, overload slacks, and balance slacks of a
/// point. This is also how the evaluator reconstructs a submitted state, so
/// it never trusts stored slack values.
pub fn derive_contingency_state(
    net: &Network,
    base: &BaseState,
    online: &OutageSets,
    point: OperatingPoint,
    delta: f64,
) -> ContingencyState {
    let n = net.buses().len();
    let mut nu_plus = vec![0.0; n];
    let mut nu_minus = vec![0.0; n];
    for (i, _) in net.buses().iter().enumerate() {
        let regulated = net
            .gens_at_bus(i)
            .iter()
            .any(|&g| online.gen_online(net.generators()[g].id));
        if regulated {
            let dv = point.v[i] - base.v[i];
            nu_plus[i] = dv.max(0.0);
            nu_minus[i] = (-dv).max(0.0);
        }
    }

    let mut rho_plus = vec![0.0; net.generators().len()];
    let mut rho_minus = vec![0.0; net.generators().len()];
    for (gi, g) in net.generators().iter().enumerate() {
        if !online.gen_online(g.id) {
            continue;
        }
        let target = base.p_g[gi] + g.droop * delta;
        let dp = point.p_g[gi] - target;
        rho_plus[gi] = dp.max(0.0);
        rho_minus[gi] = (-dp).max(0.0);
    }

    let flows = all_branch_flows(net, online, &point);
    let mut sigma_o = vec![0.0; net.lines().len()];
    let mut sigma_d = vec![0.0; net.lines().len()];
    for (li, line) in net.lines().iter().enumerate() {
        if !online.line_online(line.id) {
            continue;
        }
        let o = net.bus_index(line.origin).expect("validated");
        let d = net.bus_index(line.destination).expect("validated");
        let f = flows[li];
        sigma_o[li] = (f.p_o.hypot(f.q_o) - line.rating_e * point.v[o]).max(0.0);
        sigma_d[li] = (f.p_d.hypot(f.q_d) - line.rating_e * point.v[d]).max(0.0);
    }

    let (slack_p, slack_q) = bus_mismatch(net, online, &point);

    ContingencyState {
        point,
        delta,
        nu_plus,
        nu_minus,
        rho_plus,
        rho_minus,
        slack_p,
        slack_q,
        sigma_o,
        sigma_d,
        degraded: false,
    }
}

fn zero_offline(net: &Network, online: &OutageSets, point: &mut OperatingPoint) {
    for (gi, g) in net.generators().iter().enumerate() {
        if !online.gen_online(g.id) {
            point.p_g[gi] = 0.0;
            point.q_g[gi] = 0.0;
        }
    }
}

#[derive(Debug)]
struct Island {
    /// Bus indices, ascending.
    buses: Vec<usize>,
    /// Generator indices with an online generator, ascending.
    online_gens: Vec<usize>,
    /// Angle-reference bus index for this island.
    ref_bus: usize,
}

/// Connected components over online lines, ordered by smallest bus index.
fn find_islands(net: &Network, online: &OutageSets) -> Vec<Island> {
    let n = net.buses().len();
    let mut comp = vec![usize::MAX; n];
    let mut islands = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = islands.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let neighbors = net
                .lines_from_bus(i)
                .iter()
                .chain(net.lines_to_bus(i))
                .filter(|&&e| online.line_online(net.lines()[e].id))
                .flat_map(|&e| {
                    let l = &net.lines()[e];
                    [l.origin, l.destination]
                });
            for id_ in neighbors {
                let j = net.bus_index(id_).expect("validated");
                if comp[j] == usize::MAX {
                    comp[j] = id;
                    members.push(j);
                    queue.push_back(j);
                }
            }
        }
        members.sort_unstable();
        islands.push(Island {
            buses: members,
            online_gens: Vec::new(),
            ref_bus: 0,
        });
    }
    let ref_idx = net.ref_bus_index();
    for island in &mut islands {
        island.online_gens = island
            .buses
            .iter()
            .flat_map(|&b| net.gens_at_bus(b).iter().copied())
            .filter(|&g| online.gen_online(net.generators()[g].id))
            .collect();
        island.online_gens.sort_unstable();
        island.ref_bus = if island.buses.contains(&ref_idx) {
            ref_idx
        } else {
            island.buses[0]
        };
    }
    islands
}

/// Shared-fraction reactive dispatch: every generator at the bus sits at the
/// same fraction of its own range, which is the unique allocation compatible
/// with one (ν⁺, ν⁻) pair per bus.
fn distribute_q(net: &Network, online: &OutageSets, point: &mut OperatingPoint, bus: usize, target: f64) {
    let gens: Vec<usize> = net
        .gens_at_bus(bus)
        .iter()
        .copied()
        .filter(|&g| online.gen_online(net.generators()[g].id))
        .collect();
    let lo: f64 = gens.iter().map(|&g| net.generators()[g].q_min).sum();
    let hi: f64 = gens.iter().map(|&g| net.generators()[g].q_max).sum();
    let t = if hi > lo {
        ((target - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    for &g in &gens {
        let gen = &net.generators()[g];
        point.q_g[g] = gen.q_min + t * (gen.q_max - gen.q_min);
    }
}

/// Newton-plus-switching solve of one generating island. Mutates the island
/// slice of `point` and returns the island δ, or None on failure.
fn solve_island(
    net: &Network,
    base: &BaseState,
    online: &OutageSets,
    island: &Island,
    point: &mut OperatingPoint,
    cfg: &ContingencyConfig,
) -> Option<f64> {
    const SWITCH_TOL: f64 = 1e-9;
    let mut reg: Vec<(usize, RegState)> = island
        .buses
        .iter()
        .map(|&b| {
            let has = net
                .gens_at_bus(b)
                .iter()
                .any(|&g| online.gen_online(net.generators()[g].id));
            (b, if has { RegState::Pv } else { RegState::Unregulated })
        })
        .collect();

    let mut delta = 0.0;
    for _round in 0..cfg.max_switch_rounds {
        delta = newton_island(net, base, online, island, &reg, point, delta, cfg)?;

        // Close the reactive balance at PV buses, then switch where the
        // controllers saturate; ascending bus index keeps this deterministic.
        let (_, dq) = bus_mismatch(net, online, point);
        let mut switched = false;
        for (b, state) in reg.iter_mut() {
            let bus = *b;
            match *state {
                RegState::Pv => {
                    let current: f64 = net
                        .gens_at_bus(bus)
                        .iter()
                        .filter(|&&g| online.gen_online(net.generators()[g].id))
                        .map(|&g| point.q_g[g])
                        .sum();
                    let target = current - dq[bus];
                    let (lo, hi) = q_range(net, online, bus);
                    if target > hi + SWITCH_TOL {
                        set_q_at(net, online, point, bus, true);
                        *state = RegState::ClampedHigh;
                        switched = true;
                    } else if target < lo - SWITCH_TOL {
                        set_q_at(net, online, point, bus, false);
                        *state = RegState::ClampedLow;
                        switched = true;
                    } else {
                        distribute_q(net, online, point, bus, target);
                    }
                }
                RegState::ClampedHigh => {
                    // Voltage recovered past the base value: regulation
                    // takes over again.
                    if point.v[bus] > base.v[bus] + SWITCH_TOL {
                        *state = RegState::Pv;
                        point.v[bus] = base.v[bus];
                        switched = true;
                    }
                }
                RegState::ClampedLow => {
                    if point.v[bus] < base.v[bus] - SWITCH_TOL {
                        *state = RegState::Pv;
                        point.v[bus] = base.v[bus];
                        switched = true;
                    }
                }
                RegState::Unregulated => {}
            }
        }
        if !switched {
            return Some(delta);
        }
    }
    // Out of rounds: accept the last iterate; the caller checks residuals.
    Some(delta)
}

fn q_range(net: &Network, online: &OutageSets, bus: usize) -> (f64, f64) {
    net.gens_at_bus(bus)
        .iter()
        .filter(|&&g| online.gen_online(net.generators()[g].id))
        .fold((0.0, 0.0), |(lo, hi), &g| {
            let gen = &net.generators()[g];
            (lo + gen.q_min, hi + gen.q_max)
        })
}

fn set_q_at(net: &Network, online: &OutageSets, point: &mut OperatingPoint, bus: usize, high: bool) {
    for &g in net.gens_at_bus(bus) {
        let gen = &net.generators()[g];
        if online.gen_online(gen.id) {
            point.q_g[g] = if high { gen.q_max } else { gen.q_min };
        }
    }
}

/// Extended Newton on one island: unknowns are θ (except the island
/// reference), v at non-PV buses, and δ; equations are dP at every island
/// bus and dQ at non-PV buses. Droop clamps stay exact in the residual and
/// enter the Jacobian through their active set.
#[allow(clippy::too_many_arguments)]
fn newton_island(
    net: &Network,
    base: &BaseState,
    online: &OutageSets,
    island: &Island,
    reg: &[(usize, RegState)],
    point: &mut OperatingPoint,
    delta0: f64,
    cfg: &ContingencyConfig,
) -> Option<f64> {
    let nb = net.buses().len();
    let is_pv: Vec<bool> = {
        let mut v = vec![false; nb];
        for &(b, s) in reg {
            v[b] = s == RegState::Pv;
        }
        v
    };
    // Hold PV voltages at the base value.
    for &(b, s) in reg {
        if s == RegState::Pv {
            point.v[b] = base.v[b];
        }
    }

    let mut ang_col = vec![usize::MAX; nb];
    let mut v_col = vec![usize::MAX; nb];
    let mut n_cols = 0;
    for &b in &island.buses {
        if b != island.ref_bus {
            ang_col[b] = n_cols;
            n_cols += 1;
        }
    }
    for &b in &island.buses {
        if !is_pv[b] {
            v_col[b] = n_cols;
            n_cols += 1;
        }
    }
    let delta_col = n_cols;
    n_cols += 1;

    let mut p_row = vec![usize::MAX; nb];
    let mut q_row = vec![usize::MAX; nb];
    let mut n_rows = 0;
    for &b in &island.buses {
        p_row[b] = n_rows;
        n_rows += 1;
    }
    for &b in &island.buses {
        if !is_pv[b] {
            q_row[b] = n_rows;
            n_rows += 1;
        }
    }
    debug_assert_eq!(n_rows, n_cols);

    let in_island: Vec<bool> = {
        let mut v = vec![false; nb];
        for &b in &island.buses {
            v[b] = true;
        }
        v
    };

    let apply_droop = |pt: &mut OperatingPoint, delta: f64| {
        for &g in &island.online_gens {
            let gen = &net.generators()[g];
            pt.p_g[g] = droop_response(base.p_g[g], gen.droop, delta, gen.p_min, gen.p_max);
        }
    };

    let residual = |pt: &OperatingPoint| -> DVector<f64> {
        let (dp, dq) = bus_mismatch(net, online, pt);
        let mut f = DVector::zeros(n_rows);
        for &b in &island.buses {
            f[p_row[b]] = dp[b];
            if q_row[b] != usize::MAX {
                f[q_row[b]] = dq[b];
            }
        }
        f
    };

    let mut delta = delta0;
    apply_droop(point, delta);
    let mut f = residual(point);
    let mut converged = f.amax() <= cfg.newton_tol;

    let mut iter = 0;
    while !converged && iter < cfg.max_newton_iter {
        iter += 1;
        let mut jac = DMatrix::zeros(n_rows, n_cols);

        // Shunt term in dQ.
        for &b in &island.buses {
            if q_row[b] != usize::MAX && v_col[b] != usize::MAX {
                jac[(q_row[b], v_col[b])] += 2.0 * point.b[b] * point.v[b];
            }
        }
        // Droop column: unclamped generators respond with their slope. A
        // target exactly on a bound still counts as responsive; the clamp in
        // the residual plus the line search sort out the direction.
        for &g in &island.online_gens {
            let gen = &net.generators()[g];
            let target = base.p_g[g] + gen.droop * delta;
            if gen.p_max > gen.p_min && (gen.p_min..=gen.p_max).contains(&target) {
                let b = net.bus_index(gen.bus).expect("validated");
                jac[(p_row[b], delta_col)] += gen.droop;
            }
        }
        // Branch terms.
        for line in net.lines() {
            if !online.line_online(line.id) {
                continue;
            }
            let o = net.bus_index(line.origin).expect("validated");
            let d = net.bus_index(line.destination).expect("validated");
            if !in_island[o] {
                continue;
            }
            let pp =
                branch_flow_partials(line, point.v[o], point.theta[o], point.v[d], point.theta[d]);
            let cols = [v_col[o], v_col[d], ang_col[o], ang_col[d]];
            let mut scatter = |row: usize, partials: &[f64; 4]| {
                if row == usize::MAX {
                    return;
                }
                for (c, &val) in cols.iter().zip(partials) {
                    if *c != usize::MAX {
                        jac[(row, *c)] -= val;
                    }
                }
            };
            scatter(p_row[o], &pp.d_po);
            scatter(q_row[o], &pp.d_qo);
            scatter(p_row[d], &pp.d_pd);
            scatter(q_row[d], &pp.d_qd);
        }

        let step = jac.lu().solve(&(-&f))?;

        let norm0 = f.norm();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=10 {
            let mut trial = point.clone();
            for &b in &island.buses {
                if ang_col[b] != usize::MAX {
                    trial.theta[b] += alpha * step[ang_col[b]];
                }
                if v_col[b] != usize::MAX {
                    trial.v[b] = (trial.v[b] + alpha * step[v_col[b]]).max(crate::acpf::DEFAULT_V_FLOOR);
                }
            }
            let trial_delta = delta + alpha * step[delta_col];
            apply_droop(&mut trial, trial_delta);
            let f_trial = residual(&trial);
            if f_trial.norm() < norm0 || f_trial.amax() <= cfg.newton_tol {
                *point = trial;
                delta = trial_delta;
                f = f_trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return None;
        }
        converged = f.amax() <= cfg.newton_tol;
        if delta.abs() > cfg.delta_guard {
            return None;
        }
    }

    converged.then_some(delta)
}

/// C¹ clamp: identical to `x.clamp(lo, hi)` outside ±`w` of each bound,
/// quadratic blends inside. Returns value and derivative.
pub fn softclamp(x: f64, lo: f64, hi: f64, w: f64) -> (f64, f64) {
    let w = w.min((hi - lo) / 2.0);
    if w <= 0.0 {
        let c = x.clamp(lo, hi);
        return (c, if x > lo && x < hi { 1.0 } else { 0.0 });
    }
    if x <= lo - w {
        (lo, 0.0)
    } else if x < lo + w {
        let t = x - (lo - w);
        (lo + t * t / (4.0 * w), t / (2.0 * w))
    } else if x <= hi - w {
        (x, 1.0)
    } else if x < hi + w {
        let t = x - (hi - w);
        (hi - w + t - t * t / (4.0 * w), 1.0 - t / (2.0 * w))
    } else {
        (hi, 0.0)
    }
}

/// Smoothed post-contingency response used inside the hedged base-case
/// optimizer: the voltage-regulation and droop clamps are replaced by C¹
/// soft clamps of width `mu_c`, so the map from base variables to the
/// contingency state is differentiable.
///
/// Each regulated bus becomes a stiff smooth Q–V characteristic anchored at
/// its base voltage and base reactive output; saturation rolls off softly
/// at the aggregate reactive limits. Returns None when the topology leaves
/// more than one generating island or Newton fails; callers treat that
/// contingency with the exact solver instead.
pub fn solve_contingency_smoothed(
    net: &Network,
    base: &BaseState,
    k: &Contingency,
    mu_c: f64,
    cfg: &ContingencyConfig,
) -> Result<Option<ContingencyState>, ModelError> {
    let online = net.post_contingency_sets(k)?;
    let mut point = base.clone();
    zero_offline(net, &online, &mut point);

    let islands = find_islands(net, &online);
    let generating: Vec<&Island> = islands.iter().filter(|i| !i.online_gens.is_empty()).collect();
    if generating.len() != 1 {
        return Ok(None);
    }
    let island = generating[0];

    let nb = net.buses().len();
    // Aggregate reactive range and base anchor per regulated bus.
    let mut q_lo = vec![0.0; nb];
    let mut q_hi = vec![0.0; nb];
    let mut q_anchor = vec![0.0; nb];
    let mut regulated = vec![false; nb];
    for &b in &island.buses {
        let gens: Vec<usize> = net
            .gens_at_bus(b)
            .iter()
            .copied()
            .filter(|&g| online.gen_online(net.generators()[g].id))
            .collect();
        if gens.is_empty() {
            continue;
        }
        regulated[b] = true;
        for &g in &gens {
            q_lo[b] += net.generators()[g].q_min;
            q_hi[b] += net.generators()[g].q_max;
            q_anchor[b] += base.q_g[g];
        }
    }

    // Unknown layout: θ (all island buses but the reference), v everywhere,
    // then δ.
    let mut ang_col = vec![usize::MAX; nb];
    let mut v_col = vec![usize::MAX; nb];
    let mut n_cols = 0;
    for &b in &island.buses {
        if b != island.ref_bus {
            ang_col[b] = n_cols;
            n_cols += 1;
        }
    }
    for &b in &island.buses {
        v_col[b] = n_cols;
        n_cols += 1;
    }
    let delta_col = n_cols;
    n_cols += 1;
    let mut p_row = vec![usize::MAX; nb];
    let mut q_row = vec![usize::MAX; nb];
    let mut n_rows = 0;
    for &b in &island.buses {
        p_row[b] = n_rows;
        n_rows += 1;
    }
    for &b in &island.buses {
        q_row[b] = n_rows;
        n_rows += 1;
    }
    debug_assert_eq!(n_rows, n_cols);
    let in_island: Vec<bool> = {
        let mut v = vec![false; nb];
        for &b in &island.buses {
            v[b] = true;
        }
        v
    };

    // Smooth controller maps. The Q–V slope makes regulation stiff: moving
    // v by mu_c away from v_0 sweeps the whole reactive range.
    let q_of_v = |b: usize, v: f64| -> (f64, f64) {
        let range = q_hi[b] - q_lo[b];
        if range <= 0.0 {
            return (q_lo[b], 0.0);
        }
        let slope = range / (2.0 * mu_c);
        let prop = q_anchor[b] + (base.v[b] - v) * slope;
        let (q, dq_dprop) = softclamp(prop, q_lo[b], q_hi[b], mu_c * range);
        (q, -slope * dq_dprop)
    };
    let p_of_delta = |g: usize, delta: f64| -> (f64, f64) {
        let gen = &net.generators()[g];
        let target = base.p_g[g] + gen.droop * delta;
        let (p, dp_dtarget) = softclamp(target, gen.p_min, gen.p_max, mu_c);
        (p, gen.droop * dp_dtarget)
    };

    let apply_controllers = |pt: &mut OperatingPoint, delta: f64| {
        for &g in &island.online_gens {
            pt.p_g[g] = p_of_delta(g, delta).0;
        }
        for &b in &island.buses {
            if regulated[b] {
                distribute_q(net, &online, pt, b, q_of_v(b, pt.v[b]).0);
            }
        }
    };

    let residual = |pt: &OperatingPoint| -> DVector<f64> {
        let (dp, dq) = bus_mismatch(net, &online, pt);
        let mut f = DVector::zeros(n_rows);
        for &b in &island.buses {
            f[p_row[b]] = dp[b];
            f[q_row[b]] = dq[b];
        }
        f
    };

    let mut delta = 0.0;
    apply_controllers(&mut point, delta);
    let mut f = residual(&point);
    let tol = cfg.newton_tol.max(1e-9);
    let mut converged = f.amax() <= tol;
    let mut iter = 0;
    while !converged && iter < cfg.max_newton_iter {
        iter += 1;
        let mut jac = DMatrix::zeros(n_rows, n_cols);
        for &b in &island.buses {
            jac[(q_row[b], v_col[b])] += 2.0 * point.b[b] * point.v[b];
            if regulated[b] {
                jac[(q_row[b], v_col[b])] += q_of_v(b, point.v[b]).1;
            }
        }
        for &g in &island.online_gens {
            let b = net.bus_index(net.generators()[g].bus).expect("validated");
            jac[(p_row[b], delta_col)] += p_of_delta(g, delta).1;
        }
        for line in net.lines() {
            if !online.line_online(line.id) {
                continue;
            }
            let o = net.bus_index(line.origin).expect("validated");
            let d = net.bus_index(line.destination).expect("validated");
            if !in_island[o] {
                continue;
            }
            let pp =
                branch_flow_partials(line, point.v[o], point.theta[o], point.v[d], point.theta[d]);
            let cols = [v_col[o], v_col[d], ang_col[o], ang_col[d]];
            let mut scatter = |row: usize, partials: &[f64; 4]| {
                if row == usize::MAX {
                    return;
                }
                for (c, &val) in cols.iter().zip(partials) {
                    if *c != usize::MAX {
                        jac[(row, *c)] -= val;
                    }
                }
            };
            scatter(p_row[o], &pp.d_po);
            scatter(q_row[o], &pp.d_qo);
            scatter(p_row[d], &pp.d_pd);
            scatter(q_row[d], &pp.d_qd);
        }

        let step = match jac.lu().solve(&(-&f)) {
            Some(s) => s,
            None => return Ok(None),
        };
        let norm0 = f.norm();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=10 {
            let mut trial = point.clone();
            for &b in &island.buses {
                if ang_col[b] != usize::MAX {
                    trial.theta[b] += alpha * step[ang_col[b]];
                }
                trial.v[b] = (trial.v[b] + alpha * step[v_col[b]]).max(crate::acpf::DEFAULT_V_FLOOR);
            }
            let trial_delta = delta + alpha * step[delta_col];
            apply_controllers(&mut trial, trial_delta);
            let f_trial = residual(&trial);
            if f_trial.norm() < norm0 || f_trial.amax() <= tol {
                point = trial;
                delta = trial_delta;
                f = f_trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted || delta.abs() > cfg.delta_guard {
            return Ok(None);
        }
        converged = f.amax() <= tol;
    }
    if !converged {
        return Ok(None);
    }

    for (i, bus) in net.buses().iter().enumerate() {
        point.v[i] = point.v[i].clamp(bus.vmin_e, bus.vmax_e);
    }
    Ok(Some(derive_contingency_state(net, base, &online, point, delta)))
}

/// Frozen-voltage fallback: keep the base voltage profile, choose δ by
/// bisection on the total active mismatch, and let the slacks carry the
/// rest.
fn fallback_state(
    net: &Network,
    base: &BaseState,
    online: &OutageSets,
    cfg: &ContingencyConfig,
) -> ContingencyState {
    let mut point = base.clone();
    zero_offline(net, &online.clone(), &mut point);

    let total_droop: f64 = net
        .generators()
        .iter()
        .filter(|g| online.gen_online(g.id))
        .map(|g| g.droop)
        .sum();

    let mismatch_total = |delta: f64, pt: &mut OperatingPoint| -> f64 {
        for (gi, g) in net.generators().iter().enumerate() {
            if online.gen_online(g.id) {
                pt.p_g[gi] = droop_response(base.p_g[gi], g.droop, delta, g.p_min, g.p_max);
            }
        }
        let (dp, _) = bus_mismatch(net, online, pt);
        dp.iter().sum()
    };

    let delta = if total_droop == 0.0 {
        0.0
    } else {
        let (mut lo, mut hi) = (-cfg.delta_guard, cfg.delta_guard);
        let f_lo = mismatch_total(lo, &mut point);
        let f_hi = mismatch_total(hi, &mut point);
        if f_lo > 0.0 {
            lo
        } else if f_hi < 0.0 {
            hi
        } else {
            // Total mismatch is nondecreasing in δ.
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mismatch_total(mid, &mut point) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    };
    mismatch_total(delta, &mut point);

    let mut state = derive_contingency_state(net, base, online, point, delta);
    state.degraded = true;
    state
}
