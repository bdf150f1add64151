//! Penalized base-case optimizer with contingency screening and iterative
//! hedging.
//!
//! The only hard constraints of the formulation are variable boxes, so the
//! base problem reduces to box-constrained minimization of cost plus
//! smoothed soft-constraint penalties, with the balance and thermal slacks
//! computed from the power-flow equations rather than optimized. Hedging
//! extends the objective with the penalty of screened contingencies, each
//! re-solved from the current base through the C¹ smoothed controller
//! response.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::acpf::{
    branch_flow_partials, bus_mismatch, proportional_powerflow_start, BaseState, OperatingPoint,
};
use crate::contingency::{
    solve_contingency, solve_contingency_smoothed, ContingencyConfig, ContingencyState,
};
use crate::cost::smoothed_penalty;
use crate::evaluator::{contingency_state_penalty, evaluate_base};
use crate::model::{Contingency, Network, OutageSets};
use crate::optim::{minimize_box, OptimConfig};

/// Solver configuration for Code 1.
#[derive(Debug, Clone)]
pub struct SolveConfig {
    /// Wall-clock budget for the whole solve.
    pub time_budget: Duration,
    /// Initial penalty-smoothing half-width; halved down to the floor as
    /// progress stalls.
    pub smoothing_mu: f64,
    pub smoothing_mu_floor: f64,
    /// Half-width of the smoothed controller clamps used while hedging.
    pub mu_c: f64,
    pub lbfgs_memory: usize,
    pub grad_tol: f64,
    pub max_inner_iter: usize,
    /// Screening budget: new contingencies admitted to the hedged objective
    /// per outer round.
    pub k_top: usize,
    pub max_outer_rounds: usize,
    /// Minimum post-contingency penalty ($/h) that counts as an offender.
    pub screen_threshold: f64,
    pub contingency: ContingencyConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self::offline()
    }
}

impl SolveConfig {
    /// Real-time category: 10-minute budget.
    pub fn real_time() -> Self {
        Self {
            time_budget: Duration::from_secs(600),
            ..Self::offline()
        }
    }

    /// Offline category: 45-minute budget.
    pub fn offline() -> Self {
        Self {
            time_budget: Duration::from_secs(2700),
            smoothing_mu: 1e-3,
            smoothing_mu_floor: 1e-6,
            mu_c: 1e-3,
            lbfgs_memory: 8,
            grad_tol: 1e-5,
            max_inner_iter: 400,
            k_top: 4,
            max_outer_rounds: 5,
            screen_threshold: 1e-6,
            contingency: ContingencyConfig::default(),
        }
    }
}

/// Packing of the free variables x = (p_g, q_g, v, θ_{n≠ref}, b) into one
/// vector. The reference angle is eliminated, not constrained.
#[derive(Debug, Clone)]
pub struct VarLayout {
    n_gen: usize,
    n_bus: usize,
    ref_idx: usize,
}

impl VarLayout {
    pub fn new(net: &Network) -> Self {
        Self {
            n_gen: net.generators().len(),
            n_bus: net.buses().len(),
            ref_idx: net.ref_bus_index(),
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.n_gen + 3 * self.n_bus - 1
    }
    pub fn idx_p(&self, g: usize) -> usize {
        g
    }
    pub fn idx_q(&self, g: usize) -> usize {
        self.n_gen + g
    }
    pub fn idx_v(&self, n: usize) -> usize {
        2 * self.n_gen + n
    }
    /// None for the reference bus.
    pub fn idx_theta(&self, n: usize) -> Option<usize> {
        use std::cmp::Ordering::*;
        match n.cmp(&self.ref_idx) {
            Less => Some(2 * self.n_gen + self.n_bus + n),
            Equal => None,
            Greater => Some(2 * self.n_gen + self.n_bus + n - 1),
        }
    }
    pub fn idx_b(&self, n: usize) -> usize {
        2 * self.n_gen + 2 * self.n_bus - 1 + n
    }

    pub fn pack(&self, point: &OperatingPoint) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for g in 0..self.n_gen {
            x[self.idx_p(g)] = point.p_g[g];
            x[self.idx_q(g)] = point.q_g[g];
        }
        for n in 0..self.n_bus {
            x[self.idx_v(n)] = point.v[n];
            if let Some(i) = self.idx_theta(n) {
                x[i] = point.theta[n];
            }
            x[self.idx_b(n)] = point.b[n];
        }
        x
    }

    pub fn unpack(&self, x: &[f64]) -> OperatingPoint {
        let mut point = OperatingPoint {
            v: vec![0.0; self.n_bus],
            theta: vec![0.0; self.n_bus],
            b: vec![0.0; self.n_bus],
            p_g: vec![0.0; self.n_gen],
            q_g: vec![0.0; self.n_gen],
        };
        for g in 0..self.n_gen {
            point.p_g[g] = x[self.idx_p(g)];
            point.q_g[g] = x[self.idx_q(g)];
        }
        for n in 0..self.n_bus {
            point.v[n] = x[self.idx_v(n)];
            if let Some(i) = self.idx_theta(n) {
                point.theta[n] = x[i];
            }
            point.b[n] = x[self.idx_b(n)];
        }
        point
    }

    /// Variable boxes; angles are unbounded.
    pub fn bounds(&self, net: &Network) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::NEG_INFINITY; self.dim()];
        let mut hi = vec![f64::INFINITY; self.dim()];
        for (g, gen) in net.generators().iter().enumerate() {
            lo[self.idx_p(g)] = gen.p_min;
            hi[self.idx_p(g)] = gen.p_max;
            lo[self.idx_q(g)] = gen.q_min;
            hi[self.idx_q(g)] = gen.q_max;
        }
        for (n, bus) in net.buses().iter().enumerate() {
            lo[self.idx_v(n)] = bus.vmin;
            hi[self.idx_v(n)] = bus.vmax;
            lo[self.idx_b(n)] = bus.b_min;
            hi[self.idx_b(n)] = bus.b_max;
        }
        (lo, hi)
    }
}

/// Base-case objective: generation cost plus smoothed imbalance and
/// overload penalties, with the slacks computed internally from the balance
/// and thermal equations. Returns the value and its gradient over the
/// [`VarLayout`] packing.
pub fn base_objective(net: &Network, state: &BaseState, mu: f64) -> (f64, Vec<f64>) {
    let layout = VarLayout::new(net);
    let online = OutageSets::base(net);
    let spec = net.penalty();
    let mut value = 0.0;
    let mut grad = vec![0.0; layout.dim()];

    // Production cost (exact piecewise-linear).
    for (g, gen) in net.generators().iter().enumerate() {
        value += gen.cost.value(state.p_g[g]);
        grad[layout.idx_p(g)] += gen.cost.marginal(state.p_g[g]);
    }

    // Imbalance penalties and their weights per bus.
    let (dp, dq) = bus_mismatch(net, &online, state);
    let mut w_p = vec![0.0; layout.n_bus];
    let mut w_q = vec![0.0; layout.n_bus];
    for n in 0..layout.n_bus {
        let (vp, dp_w) = smoothed_penalty(&spec.imbalance, dp[n], mu, true);
        let (vq, dq_w) = smoothed_penalty(&spec.imbalance, dq[n], mu, true);
        value += vp + vq;
        w_p[n] = dp_w;
        w_q[n] = dq_w;
    }

    // Generator injections and shunts enter the balance directly.
    for (g, gen) in net.generators().iter().enumerate() {
        let n = net.bus_index(gen.bus).expect("validated");
        grad[layout.idx_p(g)] += w_p[n];
        grad[layout.idx_q(g)] += w_q[n];
    }
    for n in 0..layout.n_bus {
        grad[layout.idx_b(n)] += w_q[n] * state.v[n] * state.v[n];
        grad[layout.idx_v(n)] += w_q[n] * 2.0 * state.b[n] * state.v[n];
    }

    // Line terms: thermal overloads plus the balance chain rule.
    for line in net.lines() {
        let o = net.bus_index(line.origin).expect("validated");
        let d = net.bus_index(line.destination).expect("validated");
        let pp = branch_flow_partials(line, state.v[o], state.theta[o], state.v[d], state.theta[d]);
        let slots = [
            Some(layout.idx_v(o)),
            Some(layout.idx_v(d)),
            layout.idx_theta(o),
            layout.idx_theta(d),
        ];

        let mut add = |slot: Option<usize>, w: f64| {
            if let Some(s) = slot {
                grad[s] += w;
            }
        };

        // Balance: flows are subtracted at both terminal buses.
        for (j, &slot) in slots.iter().enumerate() {
            add(
                slot,
                -(w_p[o] * pp.d_po[j]
                    + w_q[o] * pp.d_qo[j]
                    + w_p[d] * pp.d_pd[j]
                    + w_q[d] * pp.d_qd[j]),
            );
        }

        // Thermal excess at each end: |s| − R·v, one-sided penalty.
        for (end, v_idx) in [(0usize, o), (1usize, d)] {
            let (p, q, dp_, dq_) = if end == 0 {
                (pp.flow.p_o, pp.flow.q_o, &pp.d_po, &pp.d_qo)
            } else {
                (pp.flow.p_d, pp.flow.q_d, &pp.d_pd, &pp.d_qd)
            };
            let norm = p.hypot(q);
            let excess = norm - line.rating * state.v[v_idx];
            let (pen, w) = smoothed_penalty(&spec.overload, excess, mu, false);
            value += pen;
            if w != 0.0 {
                let (cp, cq) = if norm > 1e-12 {
                    (p / norm, q / norm)
                } else {
                    (0.0, 0.0)
                };
                for j in 0..4 {
                    add(slots[j], w * (cp * dp_[j] + cq * dq_[j]));
                }
                // The rating term subtracts R at this end's own voltage.
                add(Some(layout.idx_v(v_idx)), -w * line.rating);
            }
        }
    }

    (value, grad)
}

fn exact_base_total(net: &Network, state: &BaseState) -> f64 {
    evaluate_base(net, state, 1e-6)
        .map(|r| r.total)
        .unwrap_or(f64::INFINITY)
}

/// Code 1 without hedging: box-projected quasi-Newton over the smoothed
/// penalized objective, warm-started from the instance's prior operating
/// point when present, otherwise from a proportional-dispatch power flow.
/// Smoothing is halved as progress stalls, down to the floor. The returned
/// state is box-feasible and never worse (by exact objective) than the
/// projected flat start.
pub fn solve_base(net: &Network, cfg: &SolveConfig) -> BaseState {
    solve_base_deadline(net, cfg, Instant::now() + cfg.time_budget)
}

fn solve_base_deadline(net: &Network, cfg: &SolveConfig, deadline: Instant) -> BaseState {
    let layout = VarLayout::new(net);
    let (lo, hi) = layout.bounds(net);

    // Warm-start candidates, best exact objective first.
    let mut flat = OperatingPoint::flat(net);
    flat.project_boxes(net);
    let mut candidates: Vec<OperatingPoint> = vec![flat];
    if let Ok(out) = proportional_powerflow_start(net) {
        if out.converged {
            let mut p = out.point;
            p.project_boxes(net);
            candidates.push(p);
        }
    }
    if net.seed_point().is_some() {
        let mut p = crate::evaluator::worst_case_point(net);
        p.project_boxes(net);
        candidates.push(p);
    }
    let start = candidates
        .into_iter()
        .min_by(|a, b| {
            exact_base_total(net, a)
                .partial_cmp(&exact_base_total(net, b))
                .expect("objectives are finite")
        })
        .expect("at least the flat candidate");

    let mut x = layout.pack(&start);
    let mut best_x = x.clone();
    let mut best_total = exact_base_total(net, &start);

    let mut mu = cfg.smoothing_mu;
    loop {
        let optim_cfg = OptimConfig {
            memory: cfg.lbfgs_memory,
            grad_tol: cfg.grad_tol,
            max_iter: cfg.max_inner_iter,
            deadline: Some(deadline),
        };
        let out = minimize_box(
            |x| base_objective(net, &layout.unpack(x), mu),
            &x,
            &lo,
            &hi,
            &optim_cfg,
        );
        x = out.x;
        let total = exact_base_total(net, &layout.unpack(&x));
        if total < best_total {
            best_total = total;
            best_x = x.clone();
        }
        if Instant::now() >= deadline || mu <= cfg.smoothing_mu_floor {
            break;
        }
        mu = (mu / 2.0).max(cfg.smoothing_mu_floor);
    }

    let mut result = layout.unpack(&best_x);
    result.project_boxes(net);
    result
}

/// Rank every contingency by the exact post-contingency penalty of its
/// solved state, worst first, ties broken by contingency id. Penalties at
/// or below the screening threshold count as zero, so benign cases tie
/// deterministically. Solves run on the current rayon pool; the ranking is
/// deterministic regardless of worker count.
pub fn screen_contingencies(
    net: &Network,
    base: &BaseState,
    cfg: &SolveConfig,
) -> Vec<(Contingency, f64)> {
    let mut scored: Vec<(Contingency, f64)> = net
        .contingencies()
        .par_iter()
        .map(|k| {
            let state = solve_contingency(net, base, k, &cfg.contingency)
                .expect("contingency elements validated");
            let pen = contingency_state_penalty(net, &state);
            (k.clone(), if pen <= cfg.screen_threshold { 0.0 } else { pen })
        })
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("penalties are finite")
            .then_with(|| a.0.id.cmp(&b.0.id))
    });
    scored
}

/// Outcome of the security-constrained solve.
#[derive(Debug, Clone)]
pub struct ScOutcome {
    pub base: BaseState,
    /// Best exact full objective after each outer round (nonincreasing).
    pub trace: Vec<f64>,
    /// Contingency ids admitted to the hedged objective.
    pub included: Vec<String>,
    pub rounds: usize,
}

/// Exact full objective of a base state: evaluator total over all
/// contingencies with exact solver responses.
pub fn evaluated_full_objective(net: &Network, base: &BaseState, cfg: &SolveConfig) -> f64 {
    let report = crate::evaluator::evaluate_base(net, base, 1e-6);
    let base_part = match report {
        Ok(r) => r.base_cost + r.base_penalty,
        Err(_) => return f64::INFINITY,
    };
    if net.contingencies().is_empty() {
        return base_part;
    }
    let penalty_sum: f64 = net
        .contingencies()
        .par_iter()
        .map(|k| {
            let state = solve_contingency(net, base, k, &cfg.contingency)
                .expect("contingency elements validated");
            contingency_state_penalty(net, &state)
        })
        .sum();
    base_part + penalty_sum / net.contingencies().len() as f64
}

/// Code 1: iterative contingency incorporation around [`solve_base`].
///
/// Each outer round screens with the exact solver, admits the worst
/// offenders, and re-optimizes the base objective extended with their
/// smoothed-response penalties (gradients by central finite differences
/// over the coupling variables: generator active setpoints and regulated
/// bus voltages). The best iterate by exact full objective is kept, so the
/// recorded trace is nonincreasing and the result never loses to the
/// unhedged solution. The final fifth of the time budget is left untouched
/// for the caller's write-out.
pub fn solve_sc(net: &Network, cfg: &SolveConfig) -> ScOutcome {
    let t0 = Instant::now();
    let deadline = t0 + cfg.time_budget.mul_f64(0.8);

    let base = solve_base_deadline(net, cfg, deadline);
    let mut best = base.clone();
    let mut best_obj = evaluated_full_objective(net, &best, cfg);
    let mut trace = vec![best_obj];
    let mut included: Vec<String> = Vec::new();

    if net.contingencies().is_empty() {
        return ScOutcome {
            base: best,
            trace,
            included,
            rounds: 0,
        };
    }

    let layout = VarLayout::new(net);
    let (lo, hi) = layout.bounds(net);
    let coupling: Vec<usize> = coupling_slots(net, &layout);
    let mut x = layout.pack(&base);
    let mut rounds = 0;

    for _ in 0..cfg.max_outer_rounds {
        if Instant::now() >= deadline {
            break;
        }
        let current = layout.unpack(&x);
        let ranked = screen_contingencies(net, &current, cfg);
        let mut admitted_new = 0;
        for (k, score) in &ranked {
            if *score <= cfg.screen_threshold || admitted_new >= cfg.k_top {
                break;
            }
            if !included.contains(&k.id) {
                included.push(k.id.clone());
                admitted_new += 1;
            }
        }
        if admitted_new == 0 {
            break;
        }
        rounds += 1;
        log::debug!(
            "hedging round {rounds}: {} contingencies in the objective ({:?})",
            included.len(),
            included
        );

        let idxs: Vec<usize> = included
            .iter()
            .map(|id| {
                net.contingencies()
                    .iter()
                    .position(|k| &k.id == id)
                    .expect("included ids come from the list")
            })
            .collect();

        let optim_cfg = OptimConfig {
            memory: cfg.lbfgs_memory,
            grad_tol: cfg.grad_tol,
            max_iter: cfg.max_inner_iter,
            deadline: Some(deadline),
        };
        let mu = cfg.smoothing_mu_floor.max(1e-6);
        let out = minimize_box(
            |x| hedged_objective(net, cfg, &layout, &idxs, &coupling, x, mu),
            &x,
            &lo,
            &hi,
            &optim_cfg,
        );
        x = out.x;

        let mut candidate = layout.unpack(&x);
        candidate.project_boxes(net);
        let obj = evaluated_full_objective(net, &candidate, cfg);
        log::debug!("hedging round {rounds}: evaluated objective {obj}");
        if obj < best_obj {
            best_obj = obj;
            best = candidate;
        }
        trace.push(best_obj);
    }

    ScOutcome {
        base: best,
        trace,
        included,
        rounds,
    }
}

/// Generator active setpoints plus voltages at buses hosting a generator:
/// the variables through which the base couples into the controller
/// response.
fn coupling_slots(net: &Network, layout: &VarLayout) -> Vec<usize> {
    let mut slots: Vec<usize> = (0..net.generators().len()).map(|g| layout.idx_p(g)).collect();
    for (n, _) in net.buses().iter().enumerate() {
        if !net.gens_at_bus(n).is_empty() {
            slots.push(layout.idx_v(n));
        }
    }
    slots
}

/// Smoothed penalty of one contingency state (imbalance plus emergency
/// overload), C¹ in the state.
fn smoothed_state_penalty(net: &Network, state: &ContingencyState, mu: f64) -> f64 {
    let spec = net.penalty();
    let imbalance: f64 = state
        .slack_p
        .iter()
        .chain(&state.slack_q)
        .map(|&s| smoothed_penalty(&spec.imbalance, s, mu, true).0)
        .sum();
    let overload: f64 = state
        .sigma_o
        .iter()
        .chain(&state.sigma_d)
        .map(|&s| smoothed_penalty(&spec.overload, s, mu, false).0)
        .sum();
    imbalance + overload
}

/// Average smoothed penalty of the included contingencies, re-solved from
/// the given base through the smoothed controller response.
fn included_penalty(net: &Network, cfg: &SolveConfig, idxs: &[usize], base: &BaseState, mu: f64) -> f64 {
    let inv_k = 1.0 / net.contingencies().len() as f64;
    idxs.iter()
        .map(|&i| {
            let k = &net.contingencies()[i];
            let state = solve_contingency_smoothed(net, base, k, cfg.mu_c, &cfg.contingency)
                .expect("contingency elements validated")
                .or_else(|| solve_contingency(net, base, k, &cfg.contingency).ok());
            match state {
                Some(s) => smoothed_state_penalty(net, &s, mu),
                None => 0.0,
            }
        })
        .sum::<f64>()
        * inv_k
}

fn hedged_objective(
    net: &Network,
    cfg: &SolveConfig,
    layout: &VarLayout,
    idxs: &[usize],
    coupling: &[usize],
    x: &[f64],
    mu: f64,
) -> (f64, Vec<f64>) {
    let state = layout.unpack(x);
    let (mut value, mut grad) = base_objective(net, &state, mu);
    if idxs.is_empty() {
        return (value, grad);
    }
    value += included_penalty(net, cfg, idxs, &state, mu);

    // Central differences over the coupling variables only; the nested
    // responses make analytic derivatives impractical here.
    let h = 1e-5;
    for &slot in coupling {
        let mut xp = x.to_vec();
        xp[slot] += h;
        let mut xm = x.to_vec();
        xm[slot] -= h;
        let fp = included_penalty(net, cfg, idxs, &layout.unpack(&xp), mu);
        let fm = included_penalty(net, cfg, idxs, &layout.unpack(&xm), mu);
        grad[slot] += (fp - fm) / (2.0 * h);
    }
    (value, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostFunction;
    use crate::model::{Contingency, ContingencyKind};
    use crate::samples;
    use approx::assert_abs_diff_eq;

    fn quick_cfg() -> SolveConfig {
        SolveConfig {
            time_budget: Duration::from_secs(30),
            ..SolveConfig::offline()
        }
    }

    #[test]
    fn layout_round_trips_and_eliminates_reference_angle() {
        let net = samples::five_bus();
        let layout = VarLayout::new(&net);
        let mut point = OperatingPoint::flat(&net);
        point.theta[1] = 0.2;
        point.theta[4] = -0.1;
        let x = layout.pack(&point);
        assert_eq!(x.len(), 2 * 3 + 3 * 5 - 1);
        let back = layout.unpack(&x);
        assert_eq!(back, point);
        assert_eq!(layout.idx_theta(net.ref_bus_index()), None);
    }

    #[test]
    fn feasible_powerflow_state_costs_only_generation() {
        let net = samples::three_gen_ring();
        let out = proportional_powerflow_start(&net).unwrap();
        assert!(out.converged);
        let mu = 1e-3;
        let (value, _) = base_objective(&net, &out.point, mu);
        let cost: f64 = net
            .generators()
            .iter()
            .enumerate()
            .map(|(g, gen)| gen.cost.value(out.point.p_g[g]))
            .sum();
        // Each zero slack sits at the center of the symmetric blend, which
        // contributes exactly price0·mu/2.
        let offset = 2.0 * net.buses().len() as f64 * net.penalty().imbalance[0].price * mu / 2.0;
        assert_abs_diff_eq!(value, cost + offset, epsilon = 0.1);
    }

    #[test]
    fn perturbed_injection_is_penalized_at_the_bus() {
        let net = samples::three_gen_ring();
        let out = proportional_powerflow_start(&net).unwrap();
        let (v0, _) = base_objective(&net, &out.point, 1e-4);
        let mut bumped = out.point.clone();
        bumped.p_g[0] += 0.1;
        let (v1, _) = base_objective(&net, &bumped, 1e-4);
        let expected = crate::cost::penalty_value(&net.penalty().imbalance, 0.1)
            + net.generators()[0].cost.value(bumped.p_g[0])
            - net.generators()[0].cost.value(out.point.p_g[0]);
        assert_abs_diff_eq!(v1 - v0, expected, epsilon = 0.5);
    }

    #[test]
    fn gradient_matches_finite_differences_on_random_points() {
        let net = samples::five_bus();
        let layout = VarLayout::new(&net);
        let mu = 1e-3;
        let mut rng = samples::SampleRng::new(11);
        let kinds = kink_positions(&net);

        let mut checked = 0;
        'outer: for _ in 0..200 {
            if checked >= 20 {
                break;
            }
            let mut point = OperatingPoint::flat(&net);
            for n in 0..net.buses().len() {
                point.v[n] = rng.range(0.96, 1.04);
                point.theta[n] = rng.range(-0.15, 0.15);
                point.b[n] = rng.range(net.buses()[n].b_min, net.buses()[n].b_max);
            }
            point.theta[net.ref_bus_index()] = 0.0;
            for (g, gen) in net.generators().iter().enumerate() {
                point.p_g[g] = rng.range(gen.p_min, gen.p_max);
                point.q_g[g] = rng.range(gen.q_min, gen.q_max);
            }
            // Stay off every kink by at least mu plus finite-difference room.
            if near_any_kink(&net, &point, &kinds, mu + 1e-4) {
                continue 'outer;
            }

            let x = layout.pack(&point);
            let (_, grad) = base_objective(&net, &point, mu);
            let h = 1e-6;
            for slot in 0..layout.dim() {
                let mut xp = x.clone();
                xp[slot] += h;
                let mut xm = x.clone();
                xm[slot] -= h;
                let (fp, _) = base_objective(&net, &layout.unpack(&xp), mu);
                let (fm, _) = base_objective(&net, &layout.unpack(&xm), mu);
                let fd = (fp - fm) / (2.0 * h);
                let scale = 1.0 + fd.abs().max(grad[slot].abs());
                assert!(
                    ((grad[slot] - fd) / scale).abs() <= 1e-5,
                    "slot {slot}: analytic {} vs fd {}",
                    grad[slot],
                    fd
                );
            }
            checked += 1;
        }
        assert!(checked >= 20, "only {checked} kink-free samples");
    }

    /// Kink positions of the objective in slack/cost space.
    struct Kinks {
        imbalance: Vec<f64>,
        overload: Vec<f64>,
    }

    fn kink_positions(net: &Network) -> Kinks {
        Kinks {
            imbalance: crate::cost::penalty_kinks(&net.penalty().imbalance),
            overload: crate::cost::penalty_kinks(&net.penalty().overload),
        }
    }

    fn near_any_kink(net: &Network, point: &OperatingPoint, kinks: &Kinks, width: f64) -> bool {
        let online = OutageSets::base(net);
        let (dp, dq) = bus_mismatch(net, &online, point);
        for s in dp.iter().chain(&dq) {
            if kinks.imbalance.iter().any(|k| (s.abs() - k).abs() < width) {
                return true;
            }
        }
        let flows = crate::acpf::all_branch_flows(net, &online, point);
        for (li, line) in net.lines().iter().enumerate() {
            let o = net.bus_index(line.origin).unwrap();
            let d = net.bus_index(line.destination).unwrap();
            for (pq, v_idx) in [
                ((flows[li].p_o, flows[li].q_o), o),
                ((flows[li].p_d, flows[li].q_d), d),
            ] {
                let excess = pq.0.hypot(pq.1) - line.rating * point.v[v_idx];
                if kinks.overload.iter().any(|k| (excess - k).abs() < width)
                    || kinks.overload.iter().any(|k| (excess + k).abs() < width)
                {
                    return true;
                }
            }
        }
        for (g, gen) in net.generators().iter().enumerate() {
            if gen.cost.kinks().any(|k| (point.p_g[g] - k).abs() < width) {
                return true;
            }
        }
        false
    }

    #[test]
    fn lossless_single_generator_reaches_exact_dispatch() {
        // One generator exactly covering the load through a lossless line:
        // the optimum is the zero-penalty power-flow dispatch.
        let net = samples::two_bus();
        let base = solve_base(&net, &quick_cfg());
        let report = evaluate_base(&net, &base, 1e-6).unwrap();
        assert!(report.feasible, "{:?}", report.hard_violations);
        assert!(report.base_penalty < 1.0, "penalty {}", report.base_penalty);
        // Lossless: p_g equals the load; cost = C_g(0.5) = 400.
        assert_abs_diff_eq!(base.p_g[0], 0.5, epsilon = 2e-3);
        assert_abs_diff_eq!(report.base_cost, 400.0, epsilon = 2.0);
    }

    #[test]
    fn zero_load_network_parks_generators_at_lower_bounds() {
        let mut parts = samples::two_bus_parts();
        parts.buses[1].p_load = 0.0;
        parts.buses[1].q_load = 0.0;
        parts.generators[0].p_min = 0.1;
        let net = parts.build();
        let base = solve_base(&net, &quick_cfg());
        assert_abs_diff_eq!(base.p_g[0], 0.1, epsilon = 1e-6);
    }

    #[test]
    fn binding_thermal_limit_matches_grid_search_oracle() {
        // Two generators, cheap unit behind a tight line: the optimizer
        // must balance cheap imports against the overload penalty. The
        // oracle sweeps the import level densely on the same exact
        // objective surface.
        let mut parts = samples::two_bus_parts();
        parts.generators[0].cost = CostFunction::linear(0.0, 500.0);
        parts.generators.push(crate::model::Generator {
            id: 2,
            bus: 2,
            p_min: 0.0,
            p_max: 1.0,
            q_min: -0.5,
            q_max: 0.5,
            droop: 1.0,
            cost: CostFunction::linear(0.0, 2000.0),
        });
        parts.lines[0].rating = 0.3; // tight
        parts.lines[0].rating_e = 0.36;
        let net = parts.build();

        let cfg = quick_cfg();
        let base = solve_base(&net, &cfg);
        let solved = exact_base_total(&net, &base);

        // Oracle: grid over the import level and the local voltage target,
        // solving the remaining angle/voltage subproblem by power flow.
        let mut best = f64::INFINITY;
        for i in 0..=400 {
            let import = 0.5 * i as f64 / 400.0;
            for v_level in [1.0, 1.025, 1.05] {
                let mut init = OperatingPoint::flat(&net);
                init.p_g[1] = 0.5 - import;
                let types = crate::acpf::BusTypeSpec(vec![
                    crate::acpf::BusType::Slack,
                    crate::acpf::BusType::Pv { v_target: v_level },
                ]);
                let out = crate::acpf::newton_powerflow(
                    &net,
                    &OutageSets::base(&net),
                    &types,
                    &init,
                    1e-10,
                    40,
                )
                .unwrap();
                if !out.converged {
                    continue;
                }
                let mut point = out.point;
                point.project_boxes(&net);
                best = best.min(exact_base_total(&net, &point));
            }
        }
        assert!(
            solved <= best + 1e-3 * best.abs(),
            "solver {solved} vs oracle {best}"
        );
    }

    #[test]
    fn screening_ranks_the_overloading_outage_first() {
        // Two parallel circuits with uneven ratings carry a heavy load;
        // losing the strong one overloads the weak one, losing a benign
        // generator does nothing.
        let mut parts = samples::two_bus_parts();
        parts.lines = vec![
            crate::model::Line {
                id: 1,
                origin: 1,
                destination: 2,
                g: 0.0,
                b: -10.0,
                b_ch: 0.0,
                rating: 1.0,
                rating_e: 1.0,
            },
            crate::model::Line {
                id: 2,
                origin: 1,
                destination: 2,
                g: 0.0,
                b: -10.0,
                b_ch: 0.0,
                rating: 0.2,
                rating_e: 0.25,
            },
        ];
        parts.generators.push(crate::model::Generator {
            id: 2,
            bus: 1,
            p_min: 0.0,
            p_max: 1.0,
            q_min: -0.5,
            q_max: 0.5,
            droop: 1.0,
            cost: CostFunction::linear(0.0, 1500.0),
        });
        parts.contingencies = vec![
            Contingency {
                id: "E1".into(),
                kind: ContingencyKind::LineOut,
                element: 1,
            },
            Contingency {
                id: "G2".into(),
                kind: ContingencyKind::GeneratorOut,
                element: 2,
            },
        ];
        let net = parts.build();
        let cfg = quick_cfg();
        let base = solve_base(&net, &cfg);
        let ranked = screen_contingencies(&net, &base, &cfg);
        assert_eq!(ranked[0].0.id, "E1");
        assert!(ranked[0].1 > 0.0);
        assert_eq!(ranked[1].1, 0.0, "G2 should be benign");
    }

    #[test]
    fn benign_contingencies_rank_in_id_order_with_zero_scores() {
        let net = samples::three_gen_ring();
        let cfg = quick_cfg();
        let base = solve_base(&net, &cfg);
        let ranked = screen_contingencies(&net, &base, &cfg);
        assert!(ranked.iter().all(|(_, s)| *s == 0.0));
        let ids: Vec<&str> = ranked.iter().map(|(k, _)| k.id.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn generator_outage_without_reserve_tops_the_ranking() {
        // One big unit carries everything; the small one cannot cover the
        // load, so losing the big unit forces imbalance slack. A benign
        // line outage ranks behind it.
        let mut parts = samples::two_bus_parts();
        parts.generators[0].cost = CostFunction::linear(0.0, 500.0);
        parts.generators.push(crate::model::Generator {
            id: 2,
            bus: 2,
            p_min: 0.0,
            p_max: 0.1,
            q_min: -0.5,
            q_max: 0.5,
            droop: 1.0,
            cost: CostFunction::linear(0.0, 900.0),
        });
        parts.lines.push(crate::model::Line {
            id: 2,
            origin: 1,
            destination: 2,
            g: 0.0,
            b: -10.0,
            b_ch: 0.0,
            rating: 1.0,
            rating_e: 1.2,
        });
        parts.contingencies = vec![
            Contingency {
                id: "G1".into(),
                kind: ContingencyKind::GeneratorOut,
                element: 1,
            },
            Contingency {
                id: "E2".into(),
                kind: ContingencyKind::LineOut,
                element: 2,
            },
        ];
        let net = parts.build();
        let cfg = quick_cfg();
        let base = solve_base(&net, &cfg);
        let ranked = screen_contingencies(&net, &base, &cfg);
        assert_eq!(ranked[0].0.id, "G1");
        // The shortfall is at least load minus the small unit's capacity,
        // priced by the imbalance tiers.
        let floor = crate::cost::penalty_value(&net.penalty().imbalance, 0.5 - 0.1);
        assert!(ranked[0].1 >= 0.5 * floor, "score {} vs floor {floor}", ranked[0].1);
        assert_eq!(ranked[1].1, 0.0);
    }

    #[test]
    fn benign_contingencies_exit_after_one_screen() {
        let net = samples::three_gen_ring();
        let cfg = quick_cfg();
        let plain = solve_base(&net, &cfg);
        let sc = solve_sc(&net, &cfg);
        assert_eq!(sc.rounds, 0, "no offender should be admitted");
        assert!(sc.included.is_empty());
        assert_eq!(sc.base, plain);
    }

    #[test]
    fn solve_sc_without_contingencies_equals_solve_base() {
        let net = samples::two_bus();
        let cfg = quick_cfg();
        let plain = solve_base(&net, &cfg);
        let sc = solve_sc(&net, &cfg);
        assert_eq!(sc.rounds, 0);
        assert_eq!(sc.base, plain);
    }

    #[test]
    fn solve_sc_trace_is_nonincreasing_and_beats_unhedged() {
        let net = samples::reserve_scarce();
        let cfg = quick_cfg();
        let unhedged = solve_base(&net, &cfg);
        let unhedged_obj = evaluated_full_objective(&net, &unhedged, &cfg);
        let sc = solve_sc(&net, &cfg);
        let hedged_obj = evaluated_full_objective(&net, &sc.base, &cfg);
        for w in sc.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "trace must not increase: {:?}", sc.trace);
        }
        assert!(
            hedged_obj <= unhedged_obj,
            "hedged {hedged_obj} vs unhedged {unhedged_obj}"
        );
    }
}
