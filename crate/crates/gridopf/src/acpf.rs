//! Branch-flow evaluation in polar form, bus mismatch assembly, and a
//! damped Newton power-flow solver with slack/PV/PQ bus typing.
//!
//! Flow orientation follows the line model: complex power enters the line at
//! both terminals, so a bus's balance subtracts the terminal flows of every
//! incident line.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{Line, Network, OutageSets};

/// Iterates are clamped to this voltage floor to keep Newton off the
/// low-voltage solution branch.
pub const DEFAULT_V_FLOOR: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum AcpfError {
    #[error("operating point dimensions do not match the network")]
    DimensionMismatch,
    #[error("invalid bus types: {0}")]
    InvalidBusTypes(String),
}

/// Decision-variable vector for one system condition: per-bus voltage
/// magnitude (p.u.), angle (radians), shunt susceptance (p.u.), and per-
/// generator injections (p.u.). Indexed by network position, not id.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub b: Vec<f64>,
    pub p_g: Vec<f64>,
    pub q_g: Vec<f64>,
}

/// The base-case (k = 0) decision variables.
pub type BaseState = OperatingPoint;

impl OperatingPoint {
    /// Flat profile: v = 1 (clamped into base bounds), θ = 0, shunts and
    /// injections at the closest-to-zero feasible values.
    pub fn flat(net: &Network) -> Self {
        let v = net
            .buses()
            .iter()
            .map(|b| 1.0f64.clamp(b.vmin, b.vmax))
            .collect();
        let b = net
            .buses()
            .iter()
            .map(|b| 0.0f64.clamp(b.b_min, b.b_max))
            .collect();
        let p_g = net
            .generators()
            .iter()
            .map(|g| 0.0f64.clamp(g.p_min, g.p_max))
            .collect();
        let q_g = net
            .generators()
            .iter()
            .map(|g| 0.0f64.clamp(g.q_min, g.q_max))
            .collect();
        Self {
            v,
            theta: vec![0.0; net.buses().len()],
            b,
            p_g,
            q_g,
        }
    }

    pub fn dims_match(&self, net: &Network) -> bool {
        let n = net.buses().len();
        let g = net.generators().len();
        self.v.len() == n
            && self.theta.len() == n
            && self.b.len() == n
            && self.p_g.len() == g
            && self.q_g.len() == g
    }

    /// Clamp every variable onto its box (v into base-case bounds).
    pub fn project_boxes(&mut self, net: &Network) {
        for (i, bus) in net.buses().iter().enumerate() {
            self.v[i] = self.v[i].clamp(bus.vmin, bus.vmax);
            self.b[i] = self.b[i].clamp(bus.b_min, bus.b_max);
        }
        for (i, g) in net.generators().iter().enumerate() {
            self.p_g[i] = self.p_g[i].clamp(g.p_min, g.p_max);
            self.q_g[i] = self.q_g[i].clamp(g.q_min, g.q_max);
        }
        self.theta[net.ref_bus_index()] = 0.0;
    }
}

/// Power-flow role of a bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BusType {
    /// Absorbs residual P and Q; voltage magnitude and angle held.
    Slack,
    /// Voltage magnitude held at `v_target`; reactive injection free.
    Pv { v_target: f64 },
    /// Both injections fixed; voltage free.
    Pq,
}

/// Per-bus typing for one power-flow solve, indexed by bus position.
#[derive(Debug, Clone, PartialEq)]
pub struct BusTypeSpec(pub Vec<BusType>);

impl BusTypeSpec {
    fn check(&self, net: &Network, online: &OutageSets) -> Result<usize, AcpfError> {
        if self.0.len() != net.buses().len() {
            return Err(AcpfError::DimensionMismatch);
        }
        let slacks: Vec<usize> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, t)| matches!(t, BusType::Slack))
            .map(|(i, _)| i)
            .collect();
        if slacks.len() != 1 {
            return Err(AcpfError::InvalidBusTypes(format!(
                "expected exactly one slack bus, found {}",
                slacks.len()
            )));
        }
        for (i, t) in self.0.iter().enumerate() {
            if matches!(t, BusType::Pv { .. } | BusType::Slack) {
                let hosts = net
                    .gens_at_bus(i)
                    .iter()
                    .any(|&g| online.gen_online(net.generators()[g].id));
                if !hosts {
                    return Err(AcpfError::InvalidBusTypes(format!(
                        "bus {} is typed {:?} but hosts no online generator",
                        net.buses()[i].id,
                        t
                    )));
                }
            }
        }
        Ok(slacks[0])
    }
}

/// Terminal flows of one line, p.u., oriented into the line at each end.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BranchFlow {
    pub p_o: f64,
    pub q_o: f64,
    pub p_d: f64,
    pub q_d: f64,
}

/// Polar branch-flow equations. With Δ = θ_o − θ_d:
///
/// ```text
/// p_o = G·v_o² − G·cosΔ·v_o·v_d − B·sinΔ·v_o·v_d
/// q_o = −(B + B_CH/2)·v_o² + B·cosΔ·v_o·v_d − G·sinΔ·v_o·v_d
/// ```
///
/// and symmetrically at the d terminal with Δ reversed. The shared
/// subexpressions make the lossless antisymmetry (G = 0 ⇒ p_o = −p_d) hold
/// bit-exactly.
pub fn branch_flows(line: &Line, v_o: f64, th_o: f64, v_d: f64, th_d: f64) -> BranchFlow {
    let dt = th_o - th_d;
    let (s, c) = dt.sin_cos();
    let vv = v_o * v_d;
    let g = line.g;
    let b = line.b;
    let b_sh = line.b + line.b_ch / 2.0;
    BranchFlow {
        p_o: g * v_o * v_o - g * c * vv - b * s * vv,
        q_o: -b_sh * v_o * v_o + b * c * vv - g * s * vv,
        p_d: g * v_d * v_d - g * c * vv + b * s * vv,
        q_d: -b_sh * v_d * v_d + b * c * vv + g * s * vv,
    }
}

/// Branch flows plus their partial derivatives with respect to
/// (v_o, v_d, θ_o, θ_d), in that order.
#[derive(Debug, Clone, Copy)]
pub struct BranchFlowPartials {
    pub flow: BranchFlow,
    pub d_po: [f64; 4],
    pub d_qo: [f64; 4],
    pub d_pd: [f64; 4],
    pub d_qd: [f64; 4],
}

pub fn branch_flow_partials(
    line: &Line,
    v_o: f64,
    th_o: f64,
    v_d: f64,
    th_d: f64,
) -> BranchFlowPartials {
    let dt = th_o - th_d;
    let (s, c) = dt.sin_cos();
    let vv = v_o * v_d;
    let g = line.g;
    let b = line.b;
    let b_sh = line.b + line.b_ch / 2.0;

    let flow = BranchFlow {
        p_o: g * v_o * v_o - g * c * vv - b * s * vv,
        q_o: -b_sh * v_o * v_o + b * c * vv - g * s * vv,
        p_d: g * v_d * v_d - g * c * vv + b * s * vv,
        q_d: -b_sh * v_d * v_d + b * c * vv + g * s * vv,
    };

    // d/dθ_o of (cosΔ, sinΔ) is (−sinΔ, cosΔ); θ_d carries the opposite sign.
    let d_po_th = (g * s - b * c) * vv;
    let d_qo_th = (b * s + g * c) * vv;
    let d_pd_th = (g * s + b * c) * vv;
    let d_qd_th = (b * s - g * c) * vv;

    BranchFlowPartials {
        flow,
        d_po: [
            2.0 * g * v_o - (g * c + b * s) * v_d,
            -(g * c + b * s) * v_o,
            d_po_th,
            -d_po_th,
        ],
        d_qo: [
            -2.0 * b_sh * v_o + (b * c - g * s) * v_d,
            (b * c - g * s) * v_o,
            -d_qo_th,
            d_qo_th,
        ],
        d_pd: [
            -(g * c - b * s) * v_d,
            2.0 * g * v_d - (g * c - b * s) * v_o,
            d_pd_th,
            -d_pd_th,
        ],
        d_qd: [
            (b * c + g * s) * v_d,
            -2.0 * b_sh * v_d + (b * c + g * s) * v_o,
            -d_qd_th,
            d_qd_th,
        ],
    }
}

/// Terminal flows of every line at `point`; offline lines carry zero.
pub fn all_branch_flows(net: &Network, online: &OutageSets, point: &OperatingPoint) -> Vec<BranchFlow> {
    net.lines()
        .iter()
        .map(|line| {
            if !online.line_online(line.id) {
                return BranchFlow::default();
            }
            let o = net.bus_index(line.origin).expect("validated");
            let d = net.bus_index(line.destination).expect("validated");
            branch_flows(line, point.v[o], point.theta[o], point.v[d], point.theta[d])
        })
        .collect()
}

/// Active and reactive balance residuals per bus. These are exactly the
/// power-imbalance slack values σᴾ and σ^Q:
///
/// ```text
/// dP_n = Σ p_g − Pᴸ_n − Σ p_(e,o) − Σ p_(e,d)
/// dQ_n = Σ q_g − Qᴸ_n + b_n·v_n² − Σ q_(e,o) − Σ q_(e,d)
/// ```
///
/// with generator and line sums running over online elements only.
pub fn bus_mismatch(
    net: &Network,
    online: &OutageSets,
    point: &OperatingPoint,
) -> (Vec<f64>, Vec<f64>) {
    let n = net.buses().len();
    let mut dp = vec![0.0; n];
    let mut dq = vec![0.0; n];
    for (i, bus) in net.buses().iter().enumerate() {
        dp[i] = -bus.p_load;
        dq[i] = -bus.q_load + point.b[i] * point.v[i] * point.v[i];
    }
    for (gi, g) in net.generators().iter().enumerate() {
        if !online.gen_online(g.id) {
            continue;
        }
        let b = net.bus_index(g.bus).expect("validated");
        dp[b] += point.p_g[gi];
        dq[b] += point.q_g[gi];
    }
    for (li, line) in net.lines().iter().enumerate() {
        if !online.line_online(line.id) {
            continue;
        }
        let _ = li;
        let o = net.bus_index(line.origin).expect("validated");
        let d = net.bus_index(line.destination).expect("validated");
        let f = branch_flows(line, point.v[o], point.theta[o], point.v[d], point.theta[d]);
        dp[o] -= f.p_o;
        dq[o] -= f.q_o;
        dp[d] -= f.p_d;
        dq[d] -= f.q_d;
    }
    (dp, dq)
}

/// Result of a Newton power-flow solve.
#[derive(Debug, Clone)]
pub struct PowerFlowOutcome {
    pub point: OperatingPoint,
    pub converged: bool,
    pub iterations: usize,
    /// Infinity norm of the solved equation set at the final iterate.
    pub final_mismatch: f64,
}

/// Newton-Raphson power flow on the mismatch system.
///
/// Unknowns are θ at non-slack buses and v at PQ buses; equations are dP at
/// non-slack buses and dQ at PQ buses. The slack bus absorbs residual P and
/// Q and PV-bus reactive injections are back-computed after convergence,
/// distributed evenly over the bus's online generators.
///
/// A singular Jacobian or an exhausted iteration budget yields
/// `converged = false` with the best iterate, never a panic.
pub fn newton_powerflow(
    net: &Network,
    online: &OutageSets,
    types: &BusTypeSpec,
    init: &OperatingPoint,
    tol: f64,
    max_iter: usize,
) -> Result<PowerFlowOutcome, AcpfError> {
    assert!(tol > 0.0, "tolerance must be positive");
    if !init.dims_match(net) {
        return Err(AcpfError::DimensionMismatch);
    }
    let slack = types.check(net, online)?;

    let n = net.buses().len();
    let mut point = init.clone();
    // Hold PV voltages at their targets from the start.
    for (i, t) in types.0.iter().enumerate() {
        if let BusType::Pv { v_target } = t {
            point.v[i] = *v_target;
        }
    }

    // Unknown layout: θ for every non-slack bus, then v for every PQ bus.
    let ang_vars: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let v_vars: Vec<usize> = (0..n)
        .filter(|&i| matches!(types.0[i], BusType::Pq))
        .collect();
    let mut ang_col = vec![usize::MAX; n];
    for (c, &i) in ang_vars.iter().enumerate() {
        ang_col[i] = c;
    }
    let mut v_col = vec![usize::MAX; n];
    for (c, &i) in v_vars.iter().enumerate() {
        v_col[i] = ang_vars.len() + c;
    }
    let n_eq = ang_vars.len() + v_vars.len();

    let residual = |pt: &OperatingPoint| -> DVector<f64> {
        let (dp, dq) = bus_mismatch(net, online, pt);
        let mut f = DVector::zeros(n_eq);
        for (r, &i) in ang_vars.iter().enumerate() {
            f[r] = dp[i];
        }
        for (r, &i) in v_vars.iter().enumerate() {
            f[ang_vars.len() + r] = dq[i];
        }
        f
    };

    let mut f = residual(&point);
    let mut iterations = 0;
    let mut converged = f.amax() <= tol || n_eq == 0;

    while !converged && iterations < max_iter {
        iterations += 1;
        let jac = assemble_jacobian(net, online, &point, &ang_vars, &v_vars, &ang_col, &v_col);
        let step = match jac.lu().solve(&(-&f)) {
            Some(s) => s,
            None => break, // singular: report best iterate
        };

        // Step halving on the mismatch 2-norm.
        let norm0 = f.norm();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=10 {
            let trial = apply_step(&point, &step, &ang_vars, &v_vars, alpha);
            let f_trial = residual(&trial);
            if f_trial.norm() < norm0 || f_trial.amax() <= tol {
                point = trial;
                f = f_trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
        converged = f.amax() <= tol;
    }

    let final_mismatch = if n_eq == 0 { 0.0 } else { f.amax() };

    // Back-compute slack and PV-bus injections so the full mismatch closes.
    let (dp, dq) = bus_mismatch(net, online, &point);
    distribute_residual(net, online, &mut point, slack, &dp, true);
    for (i, t) in types.0.iter().enumerate() {
        if matches!(t, BusType::Pv { .. } | BusType::Slack) {
            distribute_residual(net, online, &mut point, i, &dq, false);
        }
    }

    Ok(PowerFlowOutcome {
        point,
        converged,
        iterations,
        final_mismatch,
    })
}

/// Conventional power-flow solve of a proportional dispatch: every
/// generator at the same fraction of capacity covering total load, gen
/// buses held at v = 1 (clamped into bounds), reference bus as slack.
/// The usual warm start for the optimizers.
pub fn proportional_powerflow_start(net: &Network) -> Result<PowerFlowOutcome, AcpfError> {
    let online = OutageSets::base(net);
    let mut init = OperatingPoint::flat(net);
    let (p_load, _) = net.total_load();
    let cap: f64 = net.generators().iter().map(|g| g.p_max).sum();
    let floor: f64 = net.generators().iter().map(|g| g.p_min).sum();
    let t = if cap > floor {
        ((p_load - floor) / (cap - floor)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    for (gi, g) in net.generators().iter().enumerate() {
        init.p_g[gi] = g.p_min + t * (g.p_max - g.p_min);
    }
    let mut types = vec![BusType::Pq; net.buses().len()];
    for (i, bus) in net.buses().iter().enumerate() {
        if !net.gens_at_bus(i).is_empty() {
            types[i] = BusType::Pv {
                v_target: 1.0f64.clamp(bus.vmin, bus.vmax),
            };
        }
    }
    types[net.ref_bus_index()] = BusType::Slack;
    newton_powerflow(net, &online, &BusTypeSpec(types), &init, 1e-10, 40)
}

/// Spread a bus's balance residual evenly across its online generators.
fn distribute_residual(
    net: &Network,
    online: &OutageSets,
    point: &mut OperatingPoint,
    bus_idx: usize,
    residual: &[f64],
    active: bool,
) {
    let gens: Vec<usize> = net
        .gens_at_bus(bus_idx)
        .iter()
        .copied()
        .filter(|&g| online.gen_online(net.generators()[g].id))
        .collect();
    if gens.is_empty() {
        return;
    }
    let share = residual[bus_idx] / gens.len() as f64;
    for g in gens {
        if active {
            point.p_g[g] -= share;
        } else {
            point.q_g[g] -= share;
        }
    }
}

fn apply_step(
    point: &OperatingPoint,
    step: &DVector<f64>,
    ang_vars: &[usize],
    v_vars: &[usize],
    alpha: f64,
) -> OperatingPoint {
    let mut out = point.clone();
    for (c, &i) in ang_vars.iter().enumerate() {
        out.theta[i] += alpha * step[c];
    }
    for (c, &i) in v_vars.iter().enumerate() {
        out.v[i] = (out.v[i] + alpha * step[ang_vars.len() + c]).max(DEFAULT_V_FLOOR);
    }
    out
}

fn assemble_jacobian(
    net: &Network,
    online: &OutageSets,
    point: &OperatingPoint,
    ang_vars: &[usize],
    v_vars: &[usize],
    ang_col: &[usize],
    v_col: &[usize],
) -> DMatrix<f64> {
    let n_eq = ang_vars.len() + v_vars.len();
    let mut jac = DMatrix::zeros(n_eq, n_eq);

    // Row layout mirrors the residual: P rows then Q rows.
    let n = net.buses().len();
    let mut p_row = vec![usize::MAX; n];
    for (r, &i) in ang_vars.iter().enumerate() {
        p_row[i] = r;
    }
    let mut q_row = vec![usize::MAX; n];
    for (r, &i) in v_vars.iter().enumerate() {
        q_row[i] = ang_vars.len() + r;
    }

    // Shunt term: dQ_n contains +b_n·v_n².
    for &i in v_vars {
        jac[(q_row[i], v_col[i])] += 2.0 * point.b[i] * point.v[i];
    }

    for line in net.lines() {
        if !online.line_online(line.id) {
            continue;
        }
        let o = net.bus_index(line.origin).expect("validated");
        let d = net.bus_index(line.destination).expect("validated");
        let pp = branch_flow_partials(line, point.v[o], point.theta[o], point.v[d], point.theta[d]);

        // Columns per partial order (v_o, v_d, θ_o, θ_d); usize::MAX marks a
        // held variable.
        let cols = [v_col[o], v_col[d], ang_col[o], ang_col[d]];
        let mut scatter = |row: usize, partials: &[f64; 4]| {
            if row == usize::MAX {
                return;
            }
            for (c, &val) in cols.iter().zip(partials) {
                if *c != usize::MAX {
                    // Mismatch subtracts flows.
                    jac[(row, *c)] -= val;
                }
            }
        };
        scatter(p_row[o], &pp.d_po);
        scatter(q_row[o], &pp.d_qo);
        scatter(p_row[d], &pp.d_pd);
        scatter(q_row[d], &pp.d_qd);
    }

    jac
}
