//! Independent solution evaluation.
//!
//! The evaluator trusts nothing beyond the submitted variable values
//! (v, θ, b, p, q and δ per contingency): every slack, deviation, and
//! penalty is recomputed from the network equations with the exact
//! (unsmoothed) penalty functions. Hard constraints are the variable boxes,
//! the reference angle, zero power for outaged elements, and the controller
//! complementarity residual.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acpf::{all_branch_flows, bus_mismatch, BaseState, OperatingPoint};
use crate::contingency::{complementarity_residual, derive_contingency_state};
use crate::cost::penalty_value;
use crate::io::ContingencyBlock;
use crate::model::{Network, OutageSets};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("format error: state dimensions do not match the network")]
    DimensionMismatch,
}

/// Evaluation tolerances.
#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    /// Absolute tolerance on hard bound checks.
    pub hard_tol: f64,
    /// Acceptable complementarity residual, looser than the solver's own.
    pub comp_tol: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            hard_tol: 1e-6,
            comp_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HardViolation {
    pub constraint: String,
    pub element: String,
    pub magnitude: f64,
}

/// Recomputed slack values for one system condition.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SlackTable {
    /// Balance residuals per bus.
    pub slack_p: Vec<f64>,
    pub slack_q: Vec<f64>,
    /// Thermal overloads per line end.
    pub sigma_o: Vec<f64>,
    pub sigma_d: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Σ C_g(p_g0), $/h.
    pub base_cost: f64,
    /// Base-case imbalance and overload penalties, $/h.
    pub base_penalty: f64,
    /// (1/|K|)·Σ_k penalties(k), $/h.
    pub contingency_penalty_avg: f64,
    /// base_cost + base_penalty + contingency_penalty_avg.
    pub total: f64,
    pub hard_violations: Vec<HardViolation>,
    pub feasible: bool,
    pub base_slacks: SlackTable,
    /// Per-contingency (label, penalty, slacks), in instance order where
    /// present.
    pub contingency_slacks: Vec<(String, f64, SlackTable)>,
    /// Contingencies with no submitted block.
    pub unscored: Vec<String>,
}

fn check_box(
    violations: &mut Vec<HardViolation>,
    tol: f64,
    value: f64,
    lo: f64,
    hi: f64,
    constraint: &str,
    element: String,
) {
    if value < lo - tol {
        violations.push(HardViolation {
            constraint: format!("{constraint} lower bound"),
            element,
            magnitude: lo - value,
        });
    } else if value > hi + tol {
        violations.push(HardViolation {
            constraint: format!("{constraint} upper bound"),
            element,
            magnitude: value - hi,
        });
    }
}

/// Box and reference-angle checks shared by base and contingency states;
/// `emergency` selects the post-contingency voltage box.
fn hard_checks(
    net: &Network,
    point: &OperatingPoint,
    online: &OutageSets,
    emergency: bool,
    tol: f64,
    tag: &str,
    violations: &mut Vec<HardViolation>,
) {
    for (i, bus) in net.buses().iter().enumerate() {
        let (lo, hi) = if emergency {
            (bus.vmin_e, bus.vmax_e)
        } else {
            (bus.vmin, bus.vmax)
        };
        check_box(violations, tol, point.v[i], lo, hi, "voltage", format!("{tag}bus {}", bus.id));
        check_box(
            violations,
            tol,
            point.b[i],
            bus.b_min,
            bus.b_max,
            "shunt susceptance",
            format!("{tag}bus {}", bus.id),
        );
    }
    for (gi, g) in net.generators().iter().enumerate() {
        if online.gen_online(g.id) {
            check_box(
                violations,
                tol,
                point.p_g[gi],
                g.p_min,
                g.p_max,
                "active power",
                format!("{tag}generator {}", g.id),
            );
            check_box(
                violations,
                tol,
                point.q_g[gi],
                g.q_min,
                g.q_max,
                "reactive power",
                format!("{tag}generator {}", g.id),
            );
        } else {
            for (value, which) in [(point.p_g[gi], "active"), (point.q_g[gi], "reactive")] {
                if value.abs() > tol {
                    violations.push(HardViolation {
                        constraint: format!("failed generator {which} power must be zero"),
                        element: format!("{tag}generator {}", g.id),
                        magnitude: value.abs(),
                    });
                }
            }
        }
    }
    let r = net.ref_bus_index();
    if point.theta[r].abs() > tol {
        violations.push(HardViolation {
            constraint: "reference angle must be zero".into(),
            element: format!("{tag}bus {}", net.ref_bus()),
            magnitude: point.theta[r].abs(),
        });
    }
}

/// Recompute slacks of a point from the balance and thermal equations.
fn slacks_of(net: &Network, online: &OutageSets, point: &OperatingPoint, emergency: bool) -> SlackTable {
    let (slack_p, slack_q) = bus_mismatch(net, online, point);
    let flows = all_branch_flows(net, online, point);
    let mut sigma_o = vec![0.0; net.lines().len()];
    let mut sigma_d = vec![0.0; net.lines().len()];
    for (li, line) in net.lines().iter().enumerate() {
        if !online.line_online(line.id) {
            continue;
        }
        let rating = if emergency { line.rating_e } else { line.rating };
        let o = net.bus_index(line.origin).expect("validated");
        let d = net.bus_index(line.destination).expect("validated");
        sigma_o[li] = (flows[li].p_o.hypot(flows[li].q_o) - rating * point.v[o]).max(0.0);
        sigma_d[li] = (flows[li].p_d.hypot(flows[li].q_d) - rating * point.v[d]).max(0.0);
    }
    SlackTable {
        slack_p,
        slack_q,
        sigma_o,
        sigma_d,
    }
}

/// Exact penalty of a contingency state's recomputed slacks; screening
/// ranks by this value.
pub fn contingency_state_penalty(net: &Network, state: &crate::contingency::ContingencyState) -> f64 {
    let slacks = SlackTable {
        slack_p: state.slack_p.clone(),
        slack_q: state.slack_q.clone(),
        sigma_o: state.sigma_o.clone(),
        sigma_d: state.sigma_d.clone(),
    };
    penalty_of(net, &slacks)
}

/// Exact penalty of one slack table.
fn penalty_of(net: &Network, slacks: &SlackTable) -> f64 {
    let spec = net.penalty();
    let imbalance: f64 = slacks
        .slack_p
        .iter()
        .chain(&slacks.slack_q)
        .map(|&s| penalty_value(&spec.imbalance, s))
        .sum();
    let overload: f64 = slacks
        .sigma_o
        .iter()
        .chain(&slacks.sigma_d)
        .map(|&s| penalty_value(&spec.overload, s))
        .sum();
    imbalance + overload
}

/// Base-case evaluation: hard checks against base bounds, slacks recomputed
/// via the power-flow equations, exact penalties.
pub fn evaluate_base(net: &Network, base: &BaseState, tol: f64) -> Result<EvaluationReport, EvalError> {
    if !base.dims_match(net) {
        return Err(EvalError::DimensionMismatch);
    }
    let online = OutageSets::base(net);
    let mut violations = Vec::new();
    hard_checks(net, base, &online, false, tol, "", &mut violations);

    let slacks = slacks_of(net, &online, base, false);
    let base_penalty = penalty_of(net, &slacks);
    let base_cost: f64 = net
        .generators()
        .iter()
        .enumerate()
        .map(|(gi, g)| g.cost.value(base.p_g[gi]))
        .sum();

    let feasible = violations.is_empty();
    Ok(EvaluationReport {
        base_cost,
        base_penalty,
        contingency_penalty_avg: 0.0,
        total: base_cost + base_penalty,
        hard_violations: violations,
        feasible,
        base_slacks: slacks,
        contingency_slacks: Vec::new(),
        unscored: Vec::new(),
    })
}

/// Full evaluation of a base state plus submitted contingency blocks.
///
/// Contingency checks use the emergency voltage bounds and ratings, require
/// zero power from outaged elements, and verify the complementarity
/// residual of the derived controller response. A contingency without a
/// block is recorded in `unscored` and renders the deliverable infeasible.
pub fn evaluate_full(
    net: &Network,
    base: &BaseState,
    blocks: &[ContingencyBlock],
    cfg: &EvalConfig,
) -> Result<EvaluationReport, EvalError> {
    let mut report = evaluate_base(net, base, cfg.hard_tol)?;

    let mut penalty_sum = 0.0;
    for k in net.contingencies() {
        let block = match blocks.iter().find(|b| b.label == k.id) {
            Some(b) => b,
            None => {
                report.unscored.push(k.id.clone());
                report.hard_violations.push(HardViolation {
                    constraint: "missing contingency solution".into(),
                    element: format!("contingency {}", k.id),
                    magnitude: f64::INFINITY,
                });
                continue;
            }
        };
        if !block.point.dims_match(net) {
            return Err(EvalError::DimensionMismatch);
        }
        let online = net.post_contingency_sets(k).expect("validated");
        let tag = format!("contingency {}: ", k.id);
        hard_checks(
            net,
            &block.point,
            &online,
            true,
            cfg.hard_tol,
            &tag,
            &mut report.hard_violations,
        );

        let state =
            derive_contingency_state(net, base, &online, block.point.clone(), block.delta);
        let comp = complementarity_residual(net, base, k, &state).expect("validated");
        if comp.max() > cfg.comp_tol {
            report.hard_violations.push(HardViolation {
                constraint: "complementarity residual".into(),
                element: format!("contingency {}", k.id),
                magnitude: comp.max(),
            });
        }

        let slacks = SlackTable {
            slack_p: state.slack_p,
            slack_q: state.slack_q,
            sigma_o: state.sigma_o,
            sigma_d: state.sigma_d,
        };
        let pen = penalty_of(net, &slacks);
        penalty_sum += pen;
        report.contingency_slacks.push((k.id.clone(), pen, slacks));
    }

    if !net.contingencies().is_empty() {
        report.contingency_penalty_avg = penalty_sum / net.contingencies().len() as f64;
    }
    report.total = report.base_cost + report.base_penalty + report.contingency_penalty_avg;
    report.feasible = report.hard_violations.is_empty();
    Ok(report)
}

/// The operating point behind the worst-case score: the instance's
/// pre-specified point, or the flat profile (v = 1, θ = 0, injections at
/// the closest-to-zero feasible values) when absent, projected onto every
/// box with the reference angle zeroed.
pub fn worst_case_point(net: &Network) -> OperatingPoint {
    let mut point = OperatingPoint::flat(net);
    if let Some(seed) = net.seed_point() {
        for sb in &seed.buses {
            if let Ok(i) = net.bus_index(sb.id) {
                point.v[i] = sb.v;
                point.theta[i] = sb.theta;
                point.b[i] = sb.b;
            }
        }
        for sg in &seed.generators {
            if let Ok(i) = net.gen_index(sg.id) {
                point.p_g[i] = sg.p;
                point.q_g[i] = sg.q;
            }
        }
    }
    point.project_boxes(net);
    point
}

/// Full objective of the projected do-nothing point: every slack accepted
/// at its exact penalty. Hard-feasible by construction, so it upper-bounds
/// any accepted submission.
pub fn worst_case_report(net: &Network) -> EvaluationReport {
    let point = worst_case_point(net);
    let blocks: Vec<ContingencyBlock> = net
        .contingencies()
        .iter()
        .map(|k| {
            let online = net.post_contingency_sets(k).expect("validated");
            let mut pk = point.clone();
            for (gi, g) in net.generators().iter().enumerate() {
                if !online.gen_online(g.id) {
                    pk.p_g[gi] = 0.0;
                    pk.q_g[gi] = 0.0;
                }
            }
            ContingencyBlock {
                label: k.id.clone(),
                delta: 0.0,
                point: pk,
            }
        })
        .collect();
    evaluate_full(net, &point, &blocks, &EvalConfig::default())
        .expect("worst-case state is well-dimensioned")
}

pub fn worst_case_score(net: &Network) -> f64 {
    worst_case_report(net).total
}

/// Scoring rule: unreadable, infeasible, or worse-than-fallback
/// submissions take the worst-case score.
pub fn score_or_worst_case(net: &Network, maybe_report: Option<&EvaluationReport>) -> f64 {
    let wc = worst_case_score(net);
    match maybe_report {
        Some(r) if r.feasible && r.total <= wc => r.total,
        _ => wc,
    }
}
