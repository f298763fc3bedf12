//! Effect-of-a-trigger search shared by the causal tree and the ST-Learner.
//!
//! For a trigger `r`, the effect is `mean(y | I >= r) - mean(y | I < r)`.
//! The best trigger maximizes it; near-ties (within `TIE_EPS`) go to the
//! smaller trigger.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const TIE_EPS: f64 = 1e-12;

/// Number of points in the uniform trigger grid on `[0, 1]`.
pub const UNIFORM_GRID_POINTS: usize = 101;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriggerEstimate {
    pub trigger: f64,
    pub effect: f64,
}

/// Candidate trigger grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TriggerGrid {
    /// Distinct influence values observed in the data at hand.
    #[default]
    Observed,
    /// `0, 0.01, ..., 1`.
    Uniform101,
}

impl TriggerGrid {
    pub fn uniform_points() -> Vec<f64> {
        let last = (UNIFORM_GRID_POINTS - 1) as f64;
        (0..UNIFORM_GRID_POINTS).map(|i| i as f64 / last).collect()
    }
}

impl FromStr for TriggerGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "observed" => Ok(TriggerGrid::Observed),
            "uniform101" => Ok(TriggerGrid::Uniform101),
            other => Err(Error::arg(format!("unknown trigger grid `{other}`"))),
        }
    }
}

impl fmt::Display for TriggerGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TriggerGrid::Observed => "observed",
            TriggerGrid::Uniform101 => "uniform101",
        })
    }
}

/// True when `candidate` should replace `best` under the smallest-trigger
/// tie-break.
pub(crate) fn improves(candidate: TriggerEstimate, best: Option<TriggerEstimate>) -> bool {
    match best {
        None => true,
        Some(b) => {
            candidate.effect > b.effect + TIE_EPS
                || ((candidate.effect - b.effect).abs() <= TIE_EPS && candidate.trigger < b.trigger)
        }
    }
}

/// Running outcome counts over rows sorted by influence.
pub(crate) struct SortedOutcomes {
    influences: Vec<f64>,
    /// `prefix[k]` = number of positive outcomes among the first `k` rows.
    prefix: Vec<usize>,
}

impl SortedOutcomes {
    /// `rows` must be sorted by influence ascending.
    pub(crate) fn new(rows: impl Iterator<Item = (f64, bool)>) -> Self {
        let mut influences = Vec::new();
        let mut prefix = vec![0];
        for (i, y) in rows {
            debug_assert!(influences.last().is_none_or(|&l| l <= i));
            influences.push(i);
            prefix.push(prefix.last().unwrap() + usize::from(y));
        }
        SortedOutcomes { influences, prefix }
    }

    pub(crate) fn len(&self) -> usize {
        self.influences.len()
    }

    fn effect_at_split(&self, below: usize) -> f64 {
        let n = self.len();
        let ones_below = self.prefix[below] as f64;
        let ones_above = (self.prefix[n] - self.prefix[below]) as f64;
        ones_above / (n - below) as f64 - ones_below / below as f64
    }

    /// Effect at `trigger`, or `None` when a side has fewer than `min_side` rows.
    pub(crate) fn effect_at(&self, trigger: f64, min_side: usize) -> Option<f64> {
        let below = self.influences.partition_point(|&i| i < trigger);
        let min_side = min_side.max(1);
        (below >= min_side && self.len() - below >= min_side).then(|| self.effect_at_split(below))
    }

    /// Best trigger among `candidates` (any order).
    pub(crate) fn best_among(&self, candidates: &[f64], min_side: usize) -> Option<TriggerEstimate> {
        let mut best = None;
        for &r in candidates {
            if let Some(effect) = self.effect_at(r, min_side) {
                let c = TriggerEstimate { trigger: r, effect };
                if improves(c, best) {
                    best = Some(c);
                }
            }
        }
        best
    }

    /// Best trigger among the distinct observed influence values.
    pub(crate) fn best_observed(&self, min_side: usize) -> Option<TriggerEstimate> {
        let min_side = min_side.max(1);
        let n = self.len();
        let mut best = None;
        for k in 1..n {
            if self.influences[k] == self.influences[k - 1] {
                continue;
            }
            if k < min_side || n - k < min_side {
                continue;
            }
            let c = TriggerEstimate { trigger: self.influences[k], effect: self.effect_at_split(k) };
            if improves(c, best) {
                best = Some(c);
            }
        }
        best
    }

    pub(crate) fn best(&self, grid: TriggerGrid, uniform: &[f64], min_side: usize) -> Option<TriggerEstimate> {
        match grid {
            TriggerGrid::Observed => self.best_observed(min_side),
            TriggerGrid::Uniform101 => self.best_among(uniform, min_side),
        }
    }

    pub(crate) fn median(&self) -> f64 {
        let n = self.len();
        match n {
            0 => 0.0,
            _ if n % 2 == 1 => self.influences[n / 2],
            _ => (self.influences[n / 2 - 1] + self.influences[n / 2]) / 2.0,
        }
    }
}
