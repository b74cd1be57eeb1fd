use serde::{Deserialize, Serialize};

use super::Unit;

pub const DEFAULT_SEGMENTS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub marginal_cost: f64,
}

impl Segment {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Stepwise energy offer derived from a quadratic fuel-cost curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseBid {
    pub unit: String,
    pub segments: Vec<Segment>,
    /// Cost per hour of being committed at `p_min`.
    pub fixed_cost: f64,
}

impl PiecewiseBid {
    /// Offer cost of producing `p` for one hour while committed.
    pub fn cost_at(&self, p: f64) -> f64 {
        self.fixed_cost
            + self
                .segments
                .iter()
                .map(|s| s.marginal_cost * (p.min(s.hi) - s.lo).max(0.0))
                .sum::<f64>()
    }

    /// Marginal cost of the segment containing `p`; boundary points belong
    /// to the lower segment.
    pub fn marginal_cost_at(&self, p: f64) -> f64 {
        self.segments
            .iter()
            .find(|s| p <= s.hi)
            .or(self.segments.last())
            .map(|s| s.marginal_cost)
            .unwrap_or(0.0)
    }
}

/// Splits `[p_min, p_max]` into `n_segments` equal blocks priced at the
/// fuel-cost derivative at each block midpoint.
pub fn build_bid_curve(unit: &Unit, n_segments: usize) -> PiecewiseBid {
    let n = n_segments.max(1);
    let fixed_cost = unit.fuel_cost(unit.p_min);
    if unit.p_max <= unit.p_min {
        return PiecewiseBid {
            unit: unit.id.clone(),
            segments: vec![Segment {
                lo: unit.p_min,
                hi: unit.p_max,
                marginal_cost: 2.0 * unit.cost_a * unit.p_min + unit.cost_b,
            }],
            fixed_cost,
        };
    }
    let w = (unit.p_max - unit.p_min) / n as f64;
    let segments = (0..n)
        .map(|k| {
            let lo = unit.p_min + w * k as f64;
            let hi = if k + 1 == n {
                unit.p_max
            } else {
                unit.p_min + w * (k + 1) as f64
            };
            let mid = 0.5 * (lo + hi);
            Segment {
                lo,
                hi,
                marginal_cost: 2.0 * unit.cost_a * mid + unit.cost_b,
            }
        })
        .collect();
    PiecewiseBid {
        unit: unit.id.clone(),
        segments,
        fixed_cost,
    }
}

pub fn build_bids(units: &[Unit], n_segments: usize) -> Vec<PiecewiseBid> {
    units.iter().map(|u| build_bid_curve(u, n_segments)).collect()
}
