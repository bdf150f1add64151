//! Convex piecewise-linear generator costs and tiered violation penalties.
//!
//! Penalties come in two flavors: the exact piecewise-linear accumulation
//! used by the evaluator, and a C¹ smoothed variant (quadratic blends of
//! half-width `mu` around each kink) used inside gradient-based solvers.

use serde::{Deserialize, Serialize};

/// Convex piecewise-linear production cost.
///
/// `breakpoints[i] = (p_i, c_i)` means marginal cost `c_i` applies on
/// `[p_i, p_{i+1})`; the last marginal extends to +∞. Cost is measured
/// relative to the first breakpoint, i.e. `value(p_0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    pub breakpoints: Vec<(f64, f64)>,
}

impl CostFunction {
    /// Single-segment cost with constant marginal price.
    pub fn linear(from_p: f64, marginal: f64) -> Self {
        Self {
            breakpoints: vec![(from_p, marginal)],
        }
    }

    /// Marginal costs must be nondecreasing (convexity) and breakpoints
    /// strictly increasing in p.
    pub fn is_convex(&self) -> bool {
        !self.breakpoints.is_empty()
            && self
                .breakpoints
                .windows(2)
                .all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1)
    }

    /// Lowest breakpoint abscissa; the cost domain starts here.
    pub fn domain_start(&self) -> f64 {
        self.breakpoints.first().map(|b| b.0).unwrap_or(0.0)
    }

    pub fn value(&self, p: f64) -> f64 {
        if p < self.domain_start() {
            // Linear extension below the domain keeps the function total.
            return self.breakpoints[0].1 * (p - self.domain_start());
        }
        let mut total = 0.0;
        for (i, &(p_i, c_i)) in self.breakpoints.iter().enumerate() {
            let seg_end = self
                .breakpoints
                .get(i + 1)
                .map(|b| b.0)
                .unwrap_or(f64::INFINITY);
            if p <= p_i {
                break;
            }
            total += c_i * (p.min(seg_end) - p_i);
        }
        total
    }

    /// Marginal cost at `p` (right-continuous at breakpoints).
    pub fn marginal(&self, p: f64) -> f64 {
        let mut m = self.breakpoints[0].1;
        for &(p_i, c_i) in &self.breakpoints {
            if p >= p_i {
                m = c_i;
            } else {
                break;
            }
        }
        m
    }

    /// Interior kink locations (every breakpoint after the first).
    pub fn kinks(&self) -> impl Iterator<Item = f64> + '_ {
        self.breakpoints.iter().skip(1).map(|b| b.0)
    }
}

/// One penalty tier: `width` p.u. of violation priced at `price` $/p.u.-h.
/// `width = f64::INFINITY` marks the final, unbounded tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyTier {
    pub width: f64,
    pub price: f64,
}

/// Tiered penalty prices for soft-constraint violations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    /// Tiers for bus power imbalance, applied symmetrically to |σ|.
    pub imbalance: Vec<PenaltyTier>,
    /// Tiers for line thermal overload (σ ≥ 0).
    pub overload: Vec<PenaltyTier>,
}

impl Default for PenaltySpec {
    /// Steep enough that feasible instances optimize to zero slack.
    fn default() -> Self {
        Self {
            imbalance: vec![
                PenaltyTier { width: 0.02, price: 1e3 },
                PenaltyTier { width: 0.05, price: 5e3 },
                PenaltyTier { width: f64::INFINITY, price: 1e6 },
            ],
            overload: vec![
                PenaltyTier { width: 0.05, price: 1e3 },
                PenaltyTier { width: f64::INFINITY, price: 5e5 },
            ],
        }
    }
}

impl PenaltySpec {
    /// Prices strictly increasing, widths positive, last tier unbounded.
    pub fn is_valid(&self) -> bool {
        let ok = |tiers: &[PenaltyTier]| {
            !tiers.is_empty()
                && tiers.windows(2).all(|w| w[0].price < w[1].price)
                && tiers.iter().all(|t| t.width > 0.0 && t.price >= 0.0)
                && tiers.last().unwrap().width.is_infinite()
                && tiers[..tiers.len() - 1].iter().all(|t| t.width.is_finite())
        };
        ok(&self.imbalance) && ok(&self.overload)
    }
}

/// Exact piecewise-linear penalty of a violation magnitude.
///
/// `sigma` may be signed; the accumulation runs over |σ|, which realizes the
/// symmetric imbalance penalty directly. Overload callers pass σ ≥ 0.
pub fn penalty_value(tiers: &[PenaltyTier], sigma: f64) -> f64 {
    let mut remaining = sigma.abs();
    let mut total = 0.0;
    for tier in tiers {
        if remaining <= 0.0 {
            break;
        }
        let step = remaining.min(tier.width);
        total += step * tier.price;
        remaining -= step;
    }
    total
}

/// C¹ smoothed penalty with derivative.
///
/// Identical to the exact penalty outside ±`mu` of each kink; inside, a
/// quadratic blend joins the adjacent slopes, with value error at most
/// `price_jump·mu/4`.
///
/// `symmetric` selects the imbalance shape C(|σ|) (derivative 0 at σ = 0);
/// otherwise the input is a signed excess and the penalty vanishes for
/// values below −`mu` (the thermal-overload shape).
pub fn smoothed_penalty(tiers: &[PenaltyTier], sigma: f64, mu: f64, symmetric: bool) -> (f64, f64) {
    debug_assert!(!tiers.is_empty());
    // Blends must not overlap across a narrow tier.
    let min_width = tiers[..tiers.len() - 1]
        .iter()
        .map(|t| t.width)
        .fold(f64::INFINITY, f64::min);
    let mu = mu.min(0.49 * min_width).max(0.0);

    if symmetric {
        let sign = if sigma < 0.0 { -1.0 } else { 1.0 };
        let (v, d) = smoothed_one_sided(tiers, sigma.abs(), mu, -tiers[0].price);
        (v, sign * d)
    } else {
        smoothed_one_sided(tiers, sigma, mu, 0.0)
    }
}

/// Smoothed tier accumulation over a signed coordinate with the given slope
/// left of the first kink at 0.
fn smoothed_one_sided(tiers: &[PenaltyTier], x: f64, mu: f64, left_slope: f64) -> (f64, f64) {
    if mu == 0.0 {
        if x <= 0.0 {
            return (left_slope * x, left_slope);
        }
        return exact_with_slope(tiers, x);
    }
    if x <= -mu {
        return (left_slope * x, left_slope);
    }
    let mut kink = 0.0;
    let mut prev_slope = left_slope;
    let mut value_at_kink = 0.0;
    for (i, tier) in tiers.iter().enumerate() {
        let next_slope = tier.price;
        if x <= kink + mu {
            // Quadratic blend across [kink - mu, kink + mu].
            let t = x - (kink - mu);
            let base = value_at_kink - prev_slope * mu;
            let v = base + prev_slope * t + (next_slope - prev_slope) / (4.0 * mu) * t * t;
            let d = prev_slope + (next_slope - prev_slope) / (2.0 * mu) * t;
            return (v, d);
        }
        let next_kink = kink + tier.width;
        if x < next_kink - mu || i == tiers.len() - 1 {
            return (value_at_kink + next_slope * (x - kink), next_slope);
        }
        value_at_kink += next_slope * tier.width;
        kink = next_kink;
        prev_slope = next_slope;
    }
    unreachable!("final tier is unbounded");
}

fn exact_with_slope(tiers: &[PenaltyTier], s: f64) -> (f64, f64) {
    let mut remaining = s;
    let mut total = 0.0;
    let mut slope = tiers[0].price;
    for tier in tiers {
        if remaining <= 0.0 {
            break;
        }
        slope = tier.price;
        let step = remaining.min(tier.width);
        total += step * tier.price;
        remaining -= step;
    }
    (total, slope)
}

/// Positions (in |σ|) where the exact penalty has kinks, including 0.
pub fn penalty_kinks(tiers: &[PenaltyTier]) -> Vec<f64> {
    let mut ks = vec![0.0];
    let mut acc = 0.0;
    for t in &tiers[..tiers.len().saturating_sub(1)] {
        acc += t.width;
        ks.push(acc);
    }
    ks
}
