//! Base regressors: ordinary least squares and a CART regression tree.

use crate::error::{Error, Result};

/// Diagonal jitter added to the centered normal equations.
pub const RIDGE_JITTER: f64 = 1e-8;

pub const DEFAULT_MIN_LEAF: usize = 5;
pub const DEFAULT_MAX_DEPTH: usize = 12;

/// Anything that maps a feature vector to a real prediction.
pub trait Regressor {
    fn input_dim(&self) -> usize;

    /// Prediction without a dimension check.
    fn predict_unchecked(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::arg(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(self.predict_unchecked(x))
    }
}

fn check_xy(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::arg("cannot fit on an empty data set"));
    }
    if x.len() != y.len() {
        return Err(Error::arg(format!("{} rows but {} targets", x.len(), y.len())));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::arg("rows have unequal lengths"));
    }
    Ok(d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl Regressor for LinearModel {
    fn input_dim(&self) -> usize {
        self.coefficients.len()
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

/// Least squares via the centered normal equations. Centering keeps the
/// intercept out of the jittered system.
pub fn fit_ols(x: &[Vec<f64>], y: &[f64]) -> Result<LinearModel> {
    let d = check_xy(x, y)?;
    let n = x.len() as f64;
    let mut x_mean = vec![0.0; d];
    for row in x {
        for (m, v) in x_mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= n);
    let y_mean = y.iter().sum::<f64>() / n;

    let mut gram = vec![vec![0.0; d]; d];
    let mut rhs = vec![0.0; d];
    let mut centered = vec![0.0; d];
    for (row, &target) in x.iter().zip(y) {
        for j in 0..d {
            centered[j] = row[j] - x_mean[j];
        }
        let yc = target - y_mean;
        for i in 0..d {
            rhs[i] += centered[i] * yc;
            for j in 0..=i {
                gram[i][j] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..d {
        gram[i][i] += RIDGE_JITTER;
        for j in 0..i {
            gram[j][i] = gram[i][j];
        }
    }
    let coefficients = cholesky_solve(gram, rhs)?;
    let intercept = y_mean - coefficients.iter().zip(&x_mean).map(|(c, m)| c * m).sum::<f64>();
    Ok(LinearModel { coefficients, intercept })
}

/// Solves `a x = b` for symmetric positive definite `a`.
fn cholesky_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let d = b.len();
    for j in 0..d {
        let mut diag = a[j][j];
        for k in 0..j {
            diag -= a[j][k] * a[j][k];
        }
        if !(diag > 0.0) {
            return Err(Error::Degenerate("normal equations are not positive definite".into()));
        }
        let diag = diag.sqrt();
        a[j][j] = diag;
        for i in (j + 1)..d {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / diag;
        }
    }
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i][k] * b[k];
        }
        b[i] = s / a[i][i];
    }
    for i in (0..d).rev() {
        let mut s = b[i];
        for k in (i + 1)..d {
            s -= a[k][i] * b[k];
        }
        b[i] = s / a[i][i];
    }
    Ok(b)
}

#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode {
    /// Rows with `x[feature] < value` go left.
    Split { feature: usize, value: f64, left: usize, right: usize },
    Leaf { value: f64, count: usize },
}

/// Regression tree stored as an arena; node 0 is the root.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
    pub input_dim: usize,
}

impl RegressionTree {
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Split { feature, value, left, right } => {
                    i = if x[*feature] < *value { *left } else { *right };
                }
                TreeNode::Leaf { .. } => return i,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &RegressionTree, i: usize) -> usize {
            match &t.nodes[i] {
                TreeNode::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Leaf { value, count } => Some((*value, *count)),
            TreeNode::Split { .. } => None,
        })
    }
}

impl Regressor for RegressionTree {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        match &self.nodes[self.leaf_index(x)] {
            TreeNode::Leaf { value, .. } => *value,
            TreeNode::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }
}

struct CartBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    min_leaf: usize,
    max_depth: usize,
    nodes: Vec<TreeNode>,
}

struct SplitChoice {
    feature: usize,
    value: f64,
    gain: f64,
}

impl CartBuilder<'_> {
    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let slot = self.nodes.len();
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64;
        self.nodes.push(TreeNode::Leaf { value: mean, count: idx.len() });
        if depth >= self.max_depth || idx.len() < 2 * self.min_leaf {
            return slot;
        }
        let Some(split) = self.best_split(&idx) else { return slot };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.x[i][split.feature] < split.value);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[slot] = TreeNode::Split { feature: split.feature, value: split.value, left, right };
        slot
    }

    /// Largest SSE reduction; ties keep the lowest feature, then the smallest
    /// split value.
    fn best_split(&self, idx: &[usize]) -> Option<SplitChoice> {
        let n = idx.len();
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let parent_sse = total_sq - total * total / n as f64;
        let tol = 1e-12 * parent_sse.abs().max(1.0);
        let mut best: Option<SplitChoice> = None;
        let mut order = idx.to_vec();
        for f in 0..self.x[idx[0]].len() {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let (mut sum_l, mut sq_l) = (0.0, 0.0);
            for k in 0..n - 1 {
                let yi = self.y[order[k]];
                sum_l += yi;
                sq_l += yi * yi;
                let (lo, hi) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                let n_l = k + 1;
                if lo == hi || n_l < self.min_leaf || n - n_l < self.min_leaf {
                    continue;
                }
                let (sum_r, sq_r) = (total - sum_l, total_sq - sq_l);
                let sse = (sq_l - sum_l * sum_l / n_l as f64) + (sq_r - sum_r * sum_r / (n - n_l) as f64);
                let gain = parent_sse - sse;
                if gain > tol && best.as_ref().is_none_or(|b| gain > b.gain + tol) {
                    best = Some(SplitChoice { feature: f, value: midpoint(lo, hi), gain });
                }
            }
        }
        best
    }
}

pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    // Keep `lo < m` so the split separates the pair.
    if m > lo { m } else { hi }
}

/// Greedy variance-reduction tree.
pub fn fit_cart(x: &[Vec<f64>], y: &[f64], min_leaf: usize, max_depth: usize) -> Result<RegressionTree> {
    let d = check_xy(x, y)?;
    if min_leaf == 0 || min_leaf > x.len() {
        return Err(Error::arg(format!("min_leaf = {min_leaf} must be in [1, {}]", x.len())));
    }
    let mut builder = CartBuilder { x, y, min_leaf, max_depth, nodes: Vec::new() };
    builder.build((0..x.len()).collect(), 0);
    Ok(RegressionTree { nodes: builder.nodes, input_dim: d })
}
