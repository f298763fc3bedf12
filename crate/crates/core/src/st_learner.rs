//! ST-Learner: a single base learner over `(features, influence)` whose
//! counterfactual sweep over treatment levels yields a per-node trigger.

use std::fmt;
use std::str::FromStr;

use crate::datasets::TrainingTable;
use crate::error::{Error, Result};
use crate::learners::{fit_cart, fit_ols, LinearModel, RegressionTree, Regressor, DEFAULT_MAX_DEPTH, DEFAULT_MIN_LEAF};
use crate::trigger::improves;

pub use crate::trigger::{TriggerEstimate, TriggerGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseLearner {
    Ols,
    Cart { min_leaf: usize, max_depth: usize },
}

impl BaseLearner {
    pub fn cart() -> Self {
        BaseLearner::Cart { min_leaf: DEFAULT_MIN_LEAF, max_depth: DEFAULT_MAX_DEPTH }
    }
}

impl FromStr for BaseLearner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ols" => Ok(BaseLearner::Ols),
            "cart" => Ok(BaseLearner::cart()),
            other => Err(Error::arg(format!("unknown base learner `{other}`"))),
        }
    }
}

impl fmt::Display for BaseLearner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseLearner::Ols => f.write_str("ols"),
            BaseLearner::Cart { .. } => f.write_str("cart"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BaseModel {
    Linear(LinearModel),
    Tree(RegressionTree),
}

impl Regressor for BaseModel {
    fn input_dim(&self) -> usize {
        match self {
            BaseModel::Linear(m) => m.input_dim(),
            BaseModel::Tree(t) => t.input_dim(),
        }
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            BaseModel::Linear(m) => m.predict_unchecked(x),
            BaseModel::Tree(t) => t.predict_unchecked(x),
        }
    }
}

/// Fitted outcome model plus the frozen treatment grid.
///
/// The model's input is the node's features with the influence appended as
/// the last column.
#[derive(Clone, Debug, PartialEq)]
pub struct STModel<M = BaseModel> {
    model: M,
    grid: Vec<f64>,
    triggers: Vec<f64>,
}

impl<M: Regressor> STModel<M> {
    /// Wraps a fitted outcome model. The grid is sorted and deduplicated;
    /// the triggers are every grid point but the smallest.
    pub fn new(model: M, grid: impl IntoIterator<Item = f64>) -> Result<Self> {
        if model.input_dim() == 0 {
            return Err(Error::arg("outcome model needs at least the influence input"));
        }
        let mut grid: Vec<f64> = grid.into_iter().collect();
        if grid.iter().any(|b| !b.is_finite()) {
            return Err(Error::arg("treatment grid contains a non-finite value"));
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        if grid.len() < 2 {
            return Err(Error::Degenerate("treatment grid needs at least two distinct levels".into()));
        }
        let triggers = grid[1..].to_vec();
        Ok(STModel { model, grid, triggers })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn triggers(&self) -> &[f64] {
        &self.triggers
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn feature_dim(&self) -> usize {
        self.model.input_dim() - 1
    }

    /// Evaluates the outcome model once per grid level and picks the trigger
    /// with the largest above-minus-below mean response.
    pub fn predict_trigger(&self, x: &[f64]) -> Result<TriggerEstimate> {
        if x.len() != self.feature_dim() {
            return Err(Error::arg(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.feature_dim()
            )));
        }
        let mut input = Vec::with_capacity(x.len() + 1);
        input.extend_from_slice(x);
        input.push(0.0);
        let last = x.len();
        let responses: Vec<f64> = self
            .grid
            .iter()
            .map(|&beta| {
                input[last] = beta;
                self.model.predict_unchecked(&input)
            })
            .collect();
        Ok(trigger_from_responses(&self.grid, &responses, &self.triggers))
    }
}

/// Best trigger given the response at each grid level.
///
/// `grid` is sorted ascending; `triggers` may be in any order, but each must
/// leave at least one grid level on either side.
pub fn trigger_from_responses(grid: &[f64], responses: &[f64], triggers: &[f64]) -> TriggerEstimate {
    debug_assert_eq!(grid.len(), responses.len());
    let mut prefix = Vec::with_capacity(responses.len() + 1);
    prefix.push(0.0);
    for r in responses {
        prefix.push(prefix.last().unwrap() + r);
    }
    let n = grid.len();
    let total = prefix[n];
    let mut best: Option<TriggerEstimate> = None;
    for &r in triggers {
        let below = grid.partition_point(|&b| b < r);
        if below == 0 || below == n {
            continue;
        }
        let above_mean = (total - prefix[below]) / (n - below) as f64;
        let below_mean = prefix[below] / below as f64;
        let candidate = TriggerEstimate { trigger: r, effect: above_mean - below_mean };
        if improves(candidate, best) {
            best = Some(candidate);
        }
    }
    let best = best.expect("every trigger has both sides nonempty by construction");
    TriggerEstimate { trigger: best.trigger, effect: best.effect.clamp(-1.0, 1.0) }
}

/// Fits the outcome model `(x, I) -> y` and freezes the treatment grid.
pub fn fit(table: &TrainingTable, base: BaseLearner, grid: TriggerGrid) -> Result<STModel> {
    if table.is_empty() {
        return Err(Error::arg("cannot fit an ST-Learner on an empty table"));
    }
    let inputs: Vec<Vec<f64>> = table
        .rows
        .iter()
        .map(|r| {
            let mut v = r.x.clone();
            v.push(r.influence);
            v
        })
        .collect();
    let targets: Vec<f64> = table.rows.iter().map(|r| f64::from(u8::from(r.y))).collect();
    let model = match base {
        BaseLearner::Ols => BaseModel::Linear(fit_ols(&inputs, &targets)?),
        BaseLearner::Cart { min_leaf, max_depth } => {
            BaseModel::Tree(fit_cart(&inputs, &targets, min_leaf.min(inputs.len()), max_depth)?)
        }
    };
    let levels = match grid {
        TriggerGrid::Observed => table.influences(),
        TriggerGrid::Uniform101 => TriggerGrid::uniform_points(),
    };
    STModel::new(model, levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::TrainingRow;
    use crate::synthgen::rng_from;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use std::cell::Cell;

    /// Outcome model defined by a closure over the influence column.
    struct Response<F: Fn(f64) -> f64> {
        dim: usize,
        f: F,
        calls: Cell<usize>,
    }

    impl<F: Fn(f64) -> f64> Regressor for Response<F> {
        fn input_dim(&self) -> usize {
            self.dim
        }
        fn predict_unchecked(&self, x: &[f64]) -> f64 {
            self.calls.set(self.calls.get() + 1);
            (self.f)(x[self.dim - 1])
        }
    }

    fn response<F: Fn(f64) -> f64>(f: F) -> Response<F> {
        Response { dim: 2, f, calls: Cell::new(0) }
    }

    #[test]
    fn step_response_on_uniform_grid() {
        let m = STModel::new(response(|i| f64::from(u8::from(i >= 0.4))), TriggerGrid::uniform_points()).unwrap();
        assert_eq!(m.predict_trigger(&[0.0]).unwrap(), TriggerEstimate { trigger: 0.4, effect: 1.0 });
    }

    #[test]
    fn linear_response_ties_go_to_smallest() {
        let m = STModel::new(response(|i| i), [0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        assert_eq!(m.predict_trigger(&[3.0]).unwrap(), TriggerEstimate { trigger: 0.25, effect: 0.625 });
    }

    #[test]
    fn constant_response() {
        let m = STModel::new(response(|_| 0.3), [0.0, 0.5, 1.0]).unwrap();
        let est = m.predict_trigger(&[1.0]).unwrap();
        assert_eq!(est.trigger, 0.5);
        assert!(est.effect.abs() < 1e-12);
    }

    #[test]
    fn negative_effects_keep_the_argmax() {
        let m = STModel::new(response(|i| 1.0 - i), [0.0, 0.5, 1.0]).unwrap();
        let est = m.predict_trigger(&[0.0]).unwrap();
        assert_eq!(est.trigger, 0.5);
        assert!((est.effect + 0.75).abs() < 1e-12);
    }

    #[test]
    fn evaluates_model_once_per_level() {
        let m = STModel::new(response(|i| i * i), TriggerGrid::uniform_points()).unwrap();
        m.predict_trigger(&[0.0]).unwrap();
        assert_eq!(m.model().calls.get(), 101);
    }

    #[test]
    fn grid_construction() {
        let rows = [0.0, 0.5, 1.0, 0.5]
            .iter()
            .map(|&i| TrainingRow { node: 0, step: 1, x: vec![1.0], influence: i, z: false, y: i > 0.2 })
            .collect();
        let table = TrainingTable { rows, feature_dim: 1 };
        let m = fit(&table, BaseLearner::Ols, TriggerGrid::Observed).unwrap();
        assert_eq!(m.grid(), &[0.0, 0.5, 1.0]);
        assert_eq!(m.triggers(), &[0.5, 1.0]);
        let u = fit(&table, BaseLearner::Ols, TriggerGrid::Uniform101).unwrap();
        assert_eq!(u.grid().len(), 101);
        assert!(m.predict_trigger(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn single_level_grid_is_degenerate() {
        let rows = vec![TrainingRow { node: 0, step: 1, x: vec![], influence: 0.0, z: false, y: false }];
        let table = TrainingTable { rows, feature_dim: 0 };
        assert!(matches!(fit(&table, BaseLearner::Ols, TriggerGrid::Observed), Err(Error::Degenerate(_))));
        assert!(fit(&TrainingTable::default(), BaseLearner::Ols, TriggerGrid::Observed).is_err());
    }

    #[test]
    fn cart_learns_step_in_influence() {
        let mut rng = rng_from(21);
        let rows = (0..3000)
            .map(|_| {
                let influence = rng.random_range(0..=20) as f64 / 20.0;
                TrainingRow {
                    node: 0,
                    step: 1,
                    x: vec![rng.random::<f64>(), rng.random::<f64>()],
                    influence,
                    z: false,
                    y: influence >= 0.5,
                }
            })
            .collect();
        let table = TrainingTable { rows, feature_dim: 2 };
        let m = fit(&table, BaseLearner::cart(), TriggerGrid::Uniform101).unwrap();
        let f = |i: f64| m.model().predict(&[0.5, 0.5, i]).unwrap();
        assert!(f(0.75) - f(0.25) >= 0.9);
        let est = m.predict_trigger(&[0.5, 0.5]).unwrap();
        assert!((est.trigger - 0.5).abs() <= 0.05 + 1e-12, "{est:?}");
    }

    proptest! {
        #[test]
        fn sweep_matches_brute_force_and_ignores_order(seed in 0u64..2000, n in 2usize..30) {
            let mut rng = rng_from(seed);
            let mut grid: Vec<f64> = (0..n).map(|_| rng.random_range(0..50) as f64 / 49.0).collect();
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            prop_assume!(grid.len() >= 2);
            let responses: Vec<f64> = grid.iter().map(|_| rng.random::<f64>()).collect();
            let triggers = grid[1..].to_vec();
            let got = trigger_from_responses(&grid, &responses, &triggers);

            let mut brute = f64::NEG_INFINITY;
            for &r in &triggers {
                let above: Vec<f64> = grid.iter().zip(&responses).filter(|(b, _)| **b >= r).map(|p| *p.1).collect();
                let below: Vec<f64> = grid.iter().zip(&responses).filter(|(b, _)| **b < r).map(|p| *p.1).collect();
                let e = above.iter().sum::<f64>() / above.len() as f64 - below.iter().sum::<f64>() / below.len() as f64;
                brute = brute.max(e);
            }
            prop_assert!((got.effect - brute.clamp(-1.0, 1.0)).abs() < 1e-9);

            let mut shuffled = triggers.clone();
            shuffled.shuffle(&mut rng);
            prop_assert_eq!(trigger_from_responses(&grid, &responses, &shuffled), got);
        }
    }
}
