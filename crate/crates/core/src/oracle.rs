//! Exhaustive check that the trigger maximizing the above/below effect
//! recovers a node's threshold.
//!
//! For a node with `n` weighted neighbors, every one of the `2^n` activation
//! assignments is enumerated. The node's outcome under an assignment is
//! `[influence >= theta]`. Triggers are compared by their effect over the
//! whole enumeration.

use rand::Rng;

use crate::error::{Error, Result};
use crate::synthgen::{rng_from, THRESHOLD_EPS};
use crate::trigger::TIE_EPS;

pub const MAX_NEIGHBORS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Assignment {
    /// Bit `j` set when neighbor `j` is active.
    pub mask: u32,
    pub influence: f64,
    pub outcome: bool,
}

/// All `2^n` assignments for the given neighbor weights.
pub fn enumerate_assignments(weights: &[f64], true_theta: f64) -> Result<Vec<Assignment>> {
    let n = weights.len();
    if n == 0 || n > MAX_NEIGHBORS {
        return Err(Error::arg(format!("neighbor count {n} not in [1, {MAX_NEIGHBORS}]")));
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::arg("weights must be positive"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::arg(format!("weights sum to {total}, expected 1")));
    }
    Ok((0..1u32 << n)
        .map(|mask| {
            let influence: f64 = (0..n).filter(|j| mask >> j & 1 == 1).map(|j| weights[j]).sum();
            Assignment { mask, influence, outcome: influence >= true_theta }
        })
        .collect())
}

/// Outcome multisets above and below a candidate trigger, plus the counts
/// of assignments above and below the true threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialOutcomeSets {
    pub candidate: f64,
    pub above: Vec<bool>,
    pub below: Vec<bool>,
    /// Assignments with influence at or above the true threshold.
    pub true_above: usize,
    /// Assignments with influence below the true threshold.
    pub true_below: usize,
}

impl PotentialOutcomeSets {
    pub fn new(assignments: &[Assignment], candidate: f64, true_theta: f64) -> Self {
        let (above, below): (Vec<&Assignment>, Vec<&Assignment>) =
            assignments.iter().partition(|a| a.influence >= candidate);
        let true_above = assignments.iter().filter(|a| a.influence >= true_theta).count();
        PotentialOutcomeSets {
            candidate,
            above: above.iter().map(|a| a.outcome).collect(),
            below: below.iter().map(|a| a.outcome).collect(),
            true_above,
            true_below: assignments.len() - true_above,
        }
    }

    pub fn n_above(&self) -> usize {
        self.above.len()
    }

    pub fn n_below(&self) -> usize {
        self.below.len()
    }
}

/// `mean(W | I >= r) - mean(W | I < r)` over the enumeration.
pub fn bruteforce_cape(assignments: &[Assignment], candidate: f64) -> Result<f64> {
    let (mut n1, mut w1, mut n0, mut w0) = (0usize, 0usize, 0usize, 0usize);
    for a in assignments {
        if a.influence >= candidate {
            n1 += 1;
            w1 += usize::from(a.outcome);
        } else {
            n0 += 1;
            w0 += usize::from(a.outcome);
        }
    }
    if n1 == 0 || n0 == 0 {
        return Err(Error::UndefinedCandidate(candidate));
    }
    Ok(w1 as f64 / n1 as f64 - w0 as f64 / n0 as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    /// Every maximizing candidate induces the same above/below split as the
    /// true threshold, and the maximum effect is 1.
    Holds { argmax: Vec<f64>, max_effect: f64 },
    Fails { argmax: Vec<f64>, max_effect: f64 },
    /// No candidate lies in the interval equivalent to the true threshold.
    Inconclusive { reason: String },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds { .. })
    }
}

/// Checks the threshold-recovery claim for one configuration.
pub fn verify_theorem1(weights: &[f64], true_theta: f64, candidates: &[f64]) -> Result<Verdict> {
    let assignments = enumerate_assignments(weights, true_theta)?;
    let below_theta = assignments
        .iter()
        .map(|a| a.influence)
        .filter(|&i| i < true_theta)
        .fold(f64::NEG_INFINITY, f64::max);
    let reachable = assignments.iter().any(|a| a.influence >= true_theta);
    if !reachable {
        return Ok(Verdict::Inconclusive { reason: format!("threshold {true_theta} exceeds every achievable influence") });
    }
    if !below_theta.is_finite() {
        return Ok(Verdict::Inconclusive { reason: "no achievable influence below the threshold".into() });
    }
    if !candidates.iter().any(|&c| c > below_theta && c <= true_theta) {
        return Ok(Verdict::Inconclusive {
            reason: format!("no candidate in ({below_theta}, {true_theta}]"),
        });
    }

    let effects: Vec<(f64, f64)> = candidates
        .iter()
        .filter_map(|&c| bruteforce_cape(&assignments, c).ok().map(|e| (c, e)))
        .collect();
    let max_effect = effects.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let mut argmax: Vec<f64> = effects.iter().filter(|p| p.1 >= max_effect - TIE_EPS).map(|p| p.0).collect();
    argmax.sort_by(f64::total_cmp);
    argmax.dedup();

    let equivalent = |r: f64| assignments.iter().all(|a| (a.influence >= r) == (a.influence >= true_theta));
    if (max_effect - 1.0).abs() <= TIE_EPS && argmax.iter().all(|&r| equivalent(r)) {
        Ok(Verdict::Holds { argmax, max_effect })
    } else {
        Ok(Verdict::Fails { argmax, max_effect })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BatchSummary {
    pub trials: usize,
    pub conclusive: usize,
    pub inconclusive: usize,
    pub failed: usize,
}

/// Random configurations: `1..=max_neighbors` neighbors with positive
/// normalized weights and `theta ~ U(eps, 1)`. Half of the trials use the
/// achievable influences plus `theta` as candidates, the other half a
/// uniform grid of 101 points, which can be inconclusive.
pub fn verify_batch(trials: usize, max_neighbors: usize, seed: u64) -> Result<BatchSummary> {
    if max_neighbors == 0 || max_neighbors > MAX_NEIGHBORS {
        return Err(Error::arg(format!("max_neighbors {max_neighbors} not in [1, {MAX_NEIGHBORS}]")));
    }
    let mut rng = rng_from(seed);
    let mut summary = BatchSummary { trials, ..Default::default() };
    for _ in 0..trials {
        let n = rng.random_range(1..=max_neighbors);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let theta = rng.random_range(THRESHOLD_EPS..1.0);
        let candidates: Vec<f64> = if rng.random::<bool>() {
            let mut c: Vec<f64> = enumerate_assignments(&weights, theta)?.iter().map(|a| a.influence).collect();
            c.push(theta);
            c
        } else {
            (0..=100).map(|i| i as f64 / 100.0).collect()
        };
        match verify_theorem1(&weights, theta, &candidates)? {
            Verdict::Holds { .. } => summary.conclusive += 1,
            Verdict::Fails { .. } => {
                summary.conclusive += 1;
                summary.failed += 1;
            }
            Verdict::Inconclusive { .. } => summary.inconclusive += 1,
        }
    }
    Ok(summary)
}
