//! Greedy subset selection (Forward Regression, OMP, Oblivious) and the
//! exhaustive optimum.
//!
//! Ties are broken towards the lowest variable index everywhere, so results
//! do not depend on evaluation order.

use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::CovarianceModel;
use crate::numerics::{CholeskyPath, SymMatrix, CHOLESKY_PIVOT_FLOOR};
use crate::regression::{clamp_r2, coefficients, r2, IncrementalR2};
use crate::subsets::{binomial, check_budget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "FR")]
    ForwardRegression,
    #[serde(rename = "OMP")]
    Omp,
    #[serde(rename = "OBL")]
    Oblivious,
    #[serde(rename = "OPT")]
    Optimum,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::ForwardRegression => "FR",
            Algorithm::Omp => "OMP",
            Algorithm::Oblivious => "OBL",
            Algorithm::Optimum => "OPT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub algorithm: Algorithm,
    /// Chosen variables in selection order.
    pub order: Vec<usize>,
    /// R² increment contributed by each pick.
    pub gains: Vec<f64>,
    pub r2: f64,
    pub k: usize,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl SelectionResult {
    /// Chosen variables, sorted ascending.
    pub fn subset(&self) -> Vec<usize> {
        let mut s = self.order.clone();
        s.sort_unstable();
        s
    }
}

/// Knobs shared by the greedy selectors.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyOptions {
    /// Stop before budget `k` once every remaining R² gain is at or below this
    /// value. `None` always selects `min(k, n)` variables.
    pub stop_below: Option<f64>,
}

fn gains_along(c: &SymMatrix, b: &[f64], order: &[usize]) -> (Vec<f64>, f64) {
    let mut inc = IncrementalR2::new(c, b);
    let mut gains = Vec::with_capacity(order.len());
    for &j in order {
        let before = inc.value();
        inc.add(j);
        gains.push(inc.value() - before);
    }
    (gains, inc.value())
}

/// Forward Regression restricted to the candidate `pool`. Returns the
/// selection order, the gains and the final R².
pub(crate) fn forward_within(
    c: &SymMatrix,
    b: &[f64],
    pool: &[usize],
    k: usize,
    opts: GreedyOptions,
) -> (Vec<usize>, Vec<f64>, f64) {
    let mut inc = IncrementalR2::new(c, b);
    let mut order = Vec::new();
    let mut gains = Vec::new();
    let mut chosen = vec![false; c.dim()];
    for _ in 0..k.min(pool.len()) {
        let base = inc.value();
        let mut best: Option<(usize, f64)> = None;
        for &j in pool {
            if chosen[j] {
                continue;
            }
            let v = inc.value_with(j);
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((j, v));
            }
        }
        let Some((j, v)) = best else { break };
        if let Some(tol) = opts.stop_below {
            if v - base <= tol {
                break;
            }
        }
        chosen[j] = true;
        inc.add(j);
        order.push(j);
        gains.push(inc.value() - base);
    }
    let value = inc.value();
    (order, gains, value)
}

/// OMP restricted to the candidate `pool`: each step picks the candidate with
/// the largest absolute covariance with the current target residual.
pub(crate) fn omp_within(
    c: &SymMatrix,
    b: &[f64],
    pool: &[usize],
    k: usize,
    opts: GreedyOptions,
) -> (Vec<usize>, Vec<f64>, f64) {
    let mut order: Vec<usize> = Vec::new();
    let mut chosen = vec![false; c.dim()];
    let mut inc = IncrementalR2::new(c, b);
    let mut gains = Vec::new();
    for _ in 0..k.min(pool.len()) {
        let alpha = coefficients(c, b, &order);
        let mut best: Option<(usize, f64)> = None;
        for &j in pool {
            if chosen[j] {
                continue;
            }
            let fitted: f64 = order.iter().zip(&alpha).map(|(&i, a)| c.get(j, i) * a).sum();
            let score = (b[j] - fitted).abs();
            if best.is_none_or(|(_, bs)| score > bs) {
                best = Some((j, score));
            }
        }
        let Some((j, _)) = best else { break };
        let base = inc.value();
        if let Some(tol) = opts.stop_below {
            if inc.value_with(j) - base <= tol {
                break;
            }
        }
        chosen[j] = true;
        order.push(j);
        inc.add(j);
        gains.push(inc.value() - base);
    }
    let value = inc.value();
    (order, gains, value)
}

/// The `k` pool members with the largest `|b_i|`, lowest index first on ties.
pub(crate) fn oblivious_within(b: &[f64], pool: &[usize], k: usize) -> Vec<usize> {
    let mut ranked = pool.to_vec();
    ranked.sort_by(|&x, &y| b[y].abs().total_cmp(&b[x].abs()).then(x.cmp(&y)));
    ranked.truncate(k);
    ranked
}

fn all_variables(model: &CovarianceModel) -> Vec<usize> {
    (0..model.n()).collect()
}

pub fn forward_regression(model: &CovarianceModel, target: usize, k: usize) -> SelectionResult {
    forward_regression_with(model, target, k, GreedyOptions::default())
}

pub fn forward_regression_with(
    model: &CovarianceModel,
    target: usize,
    k: usize,
    opts: GreedyOptions,
) -> SelectionResult {
    let start = Instant::now();
    let (order, gains, r2) = forward_within(model.c(), model.b(target), &all_variables(model), k, opts);
    SelectionResult { algorithm: Algorithm::ForwardRegression, order, gains, r2, k, elapsed: start.elapsed() }
}

pub fn omp(model: &CovarianceModel, target: usize, k: usize) -> SelectionResult {
    omp_with(model, target, k, GreedyOptions::default())
}

pub fn omp_with(model: &CovarianceModel, target: usize, k: usize, opts: GreedyOptions) -> SelectionResult {
    let start = Instant::now();
    let (order, gains, r2) = omp_within(model.c(), model.b(target), &all_variables(model), k, opts);
    SelectionResult { algorithm: Algorithm::Omp, order, gains, r2, k, elapsed: start.elapsed() }
}

/// The `k` variables with the largest absolute target correlation `|b_i|`.
pub fn oblivious(model: &CovarianceModel, target: usize, k: usize) -> SelectionResult {
    let start = Instant::now();
    let (c, b) = (model.c(), model.b(target));
    let order = oblivious_within(b, &all_variables(model), k);
    let (gains, r2) = gains_along(c, b, &order);
    SelectionResult { algorithm: Algorithm::Oblivious, order, gains, r2, k, elapsed: start.elapsed() }
}

/// Best size-`k` subset within `pool` (sorted), by depth-first enumeration
/// with an incremental Cholesky factor. Ties go to the lexicographically
/// smallest subset.
pub(crate) fn best_subset_within(c: &SymMatrix, b: &[f64], pool: &[usize], k: usize) -> (Vec<usize>, f64) {
    let k = k.min(pool.len());
    if k == 0 {
        return (Vec::new(), 0.0);
    }
    let chunks: Vec<(Vec<usize>, f64)> = (0..=pool.len() - k)
        .into_par_iter()
        .map(|first| {
            let mut search = BestSubset {
                c,
                b,
                pool,
                k,
                path: CholeskyPath::new(),
                stack: Vec::with_capacity(k),
                best: None,
            };
            search.descend(first, true);
            search.best.expect("every chunk holds at least one subset")
        })
        .collect();
    let mut best = chunks[0].clone();
    for cand in chunks.into_iter().skip(1) {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    best
}

struct BestSubset<'a> {
    c: &'a SymMatrix,
    b: &'a [f64],
    pool: &'a [usize],
    k: usize,
    path: CholeskyPath,
    stack: Vec<usize>,
    best: Option<(Vec<usize>, f64)>,
}

impl BestSubset<'_> {
    /// Adds `pool[pos]` to the current prefix and explores all completions.
    fn descend(&mut self, pos: usize, factored: bool) {
        let var = self.pool[pos];
        let pushed = factored && self.path.push(self.c, Some(self.b), var, CHOLESKY_PIVOT_FLOOR).is_some();
        self.stack.push(var);
        if self.stack.len() == self.k {
            let v = if pushed { clamp_r2(self.path.quad_form()) } else { r2(self.c, self.b, &self.stack) };
            if self.best.as_ref().is_none_or(|(_, bv)| v > *bv) {
                self.best = Some((self.stack.clone(), v));
            }
        } else {
            let remaining = self.k - self.stack.len();
            for next in (pos + 1)..=(self.pool.len() - remaining) {
                self.descend(next, pushed);
            }
        }
        self.stack.pop();
        if pushed {
            self.path.pop();
        }
    }
}

/// Exact maximizer of R² over all size-`k` subsets (`min(k, n)`).
pub fn exhaustive_opt(model: &CovarianceModel, target: usize, k: usize, cap: u64) -> Result<SelectionResult> {
    let n = model.n();
    let kk = k.min(n);
    check_budget(n, kk, binomial(n, kk), cap)?;
    let start = Instant::now();
    let (c, b) = (model.c(), model.b(target));
    let (order, _) = best_subset_within(c, b, &all_variables(model), kk);
    let (gains, r2) = gains_along(c, b, &order);
    Ok(SelectionResult { algorithm: Algorithm::Optimum, order, gains, r2, k, elapsed: start.elapsed() })
}
