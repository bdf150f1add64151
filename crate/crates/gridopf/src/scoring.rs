//! Cross-scenario scoring: geometric-mean method, performance-profile
//! method, and the per-scenario difficulty metrics (gap ε, hardness H).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("scores must be positive and finite (got {0})")]
    NonPositiveScore(f64),
    #[error("empty score set")]
    Empty,
    #[error("performance profiles need at least two teams")]
    SingleTeam,
    #[error("teams must score the same problem set (row {0} has {1} scores, expected {2})")]
    RaggedRows(usize, usize, usize),
    #[error("score table incomplete: team {team} missing ({network}, {scenario})")]
    Incomplete {
        team: String,
        network: String,
        scenario: String,
    },
    #[error("gap needs 0 < best <= second, got ({0}, {1})")]
    BadGapOrder(f64, f64),
    #[error("hardness needs relative upper bound > 1, got {0}")]
    BadHardness(f64),
}

/// Geometric mean of each network's scenario scores, then of the network
/// scores; computed in log space. All scores must be positive.
pub fn geometric_mean_overall(scores: &[Vec<f64>]) -> Result<f64, ScoringError> {
    let network_scores: Vec<f64> = scores
        .iter()
        .map(|s| geometric_mean(s))
        .collect::<Result<_, _>>()?;
    geometric_mean(&network_scores)
}

pub fn geometric_mean(scores: &[f64]) -> Result<f64, ScoringError> {
    if scores.is_empty() {
        return Err(ScoringError::Empty);
    }
    let mut log_sum = 0.0;
    for &s in scores {
        if !s.is_finite() || s <= 0.0 {
            return Err(ScoringError::NonPositiveScore(s));
        }
        log_sum += s.ln();
    }
    Ok((log_sum / scores.len() as f64).exp())
}

/// Area under each team's performance profile over τ ∈ [1, tau_max].
///
/// Per problem, a team's ratio is its score over the best score among all
/// teams; the profile ρ(τ) is the fraction of problems with ratio ≤ τ, and
/// the area is the exact integral of this step function. Higher is better.
pub fn performance_profile_area(
    scores: &[Vec<f64>],
    tau_max: f64,
) -> Result<Vec<f64>, ScoringError> {
    if scores.len() < 2 {
        return Err(ScoringError::SingleTeam);
    }
    let n_problems = scores[0].len();
    if n_problems == 0 {
        return Err(ScoringError::Empty);
    }
    for (t, row) in scores.iter().enumerate() {
        if row.len() != n_problems {
            return Err(ScoringError::RaggedRows(t, row.len(), n_problems));
        }
        for &s in row {
            if !s.is_finite() || s <= 0.0 {
                return Err(ScoringError::NonPositiveScore(s));
            }
        }
    }
    let best: Vec<f64> = (0..n_problems)
        .map(|p| scores.iter().map(|row| row[p]).fold(f64::INFINITY, f64::min))
        .collect();
    Ok(scores
        .iter()
        .map(|row| {
            row.iter()
                .zip(&best)
                .map(|(&s, &b)| (tau_max - s / b).max(0.0))
                .sum::<f64>()
                / n_problems as f64
        })
        .collect())
}

/// Difficulty gap ε = o2/o1 − 1 between the best and second-best objective.
pub fn gap(o1: f64, o2: f64) -> Result<f64, ScoringError> {
    if o1.is_nan() || o2.is_nan() || o1 <= 0.0 || o1 > o2 {
        return Err(ScoringError::BadGapOrder(o1, o2));
    }
    Ok(o2 / o1 - 1.0)
}

/// Hardness index H = C^r · P^r · log10(P^ubr). The relative cost and
/// penalty inputs come from an external benchmark run.
pub fn hardness_index(c_rel: f64, p_rel: f64, p_ub_rel: f64) -> Result<f64, ScoringError> {
    if p_ub_rel.is_nan() || p_ub_rel <= 1.0 {
        return Err(ScoringError::BadHardness(p_ub_rel));
    }
    Ok(c_rel * p_rel * p_ub_rel.log10())
}

/// One scored run, as emitted by the evaluate step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub team: String,
    pub network: String,
    pub scenario: String,
    /// Final score after worst-case substitution; > 0.
    pub score: f64,
}

/// Complete team × (network, scenario) score matrix with derived scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreTable {
    pub teams: Vec<String>,
    pub networks: Vec<String>,
    /// Scenario labels per network, same order as `networks`.
    pub scenarios: Vec<Vec<String>>,
    /// `scores[t][n][s]` for team t, network n, scenario s.
    pub scores: Vec<Vec<Vec<f64>>>,
}

impl ScoreTable {
    /// Assemble a table from records; every team must cover every
    /// (network, scenario) pair exactly once and all scores must be
    /// positive.
    pub fn from_records(records: &[ScoreRecord]) -> Result<Self, ScoringError> {
        if records.is_empty() {
            return Err(ScoringError::Empty);
        }
        let teams: Vec<String> = records
            .iter()
            .map(|r| r.team.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let networks: Vec<String> = records
            .iter()
            .map(|r| r.network.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let scenarios: Vec<Vec<String>> = networks
            .iter()
            .map(|n| {
                records
                    .iter()
                    .filter(|r| &r.network == n)
                    .map(|r| r.scenario.clone())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect()
            })
            .collect();

        let mut scores = vec![Vec::new(); teams.len()];
        for (t, team) in teams.iter().enumerate() {
            for (n, network) in networks.iter().enumerate() {
                let mut row = Vec::with_capacity(scenarios[n].len());
                for scenario in &scenarios[n] {
                    let r = records
                        .iter()
                        .find(|r| &r.team == team && &r.network == network && &r.scenario == scenario)
                        .ok_or_else(|| ScoringError::Incomplete {
                            team: team.clone(),
                            network: network.clone(),
                            scenario: scenario.clone(),
                        })?;
                    if !r.score.is_finite() || r.score <= 0.0 {
                        return Err(ScoringError::NonPositiveScore(r.score));
                    }
                    row.push(r.score);
                }
                scores[t].push(row);
            }
        }
        Ok(Self {
            teams,
            networks,
            scenarios,
            scores,
        })
    }

    /// Geometric-mean network scores per team.
    pub fn network_scores(&self) -> Vec<Vec<f64>> {
        self.scores
            .iter()
            .map(|per_net| {
                per_net
                    .iter()
                    .map(|s| geometric_mean(s).expect("table validated"))
                    .collect()
            })
            .collect()
    }

    /// Geometric-mean overall score per team (lower is better).
    pub fn overall_scores(&self) -> Vec<f64> {
        self.scores
            .iter()
            .map(|per_net| geometric_mean_overall(per_net).expect("table validated"))
            .collect()
    }

    /// Performance-profile area per team (higher is better). Raw areas are
    /// reported, not normalized by (tau_max − 1).
    pub fn profile_areas(&self, tau_max: f64) -> Result<Vec<f64>, ScoringError> {
        let flat: Vec<Vec<f64>> = self
            .scores
            .iter()
            .map(|per_net| per_net.iter().flatten().copied().collect())
            .collect();
        performance_profile_area(&flat, tau_max)
    }

    /// Difficulty gap ε per (network, scenario), from the two best team
    /// scores. None when fewer than two teams.
    pub fn scenario_gaps(&self) -> Vec<(String, String, Option<f64>)> {
        let mut out = Vec::new();
        for (n, network) in self.networks.iter().enumerate() {
            for (s, scenario) in self.scenarios[n].iter().enumerate() {
                let mut column: Vec<f64> = self.scores.iter().map(|t| t[n][s]).collect();
                column.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
                let eps = if column.len() >= 2 {
                    gap(column[0], column[1]).ok()
                } else {
                    None
                };
                out.push((network.clone(), scenario.clone(), eps));
            }
        }
        out
    }
}
