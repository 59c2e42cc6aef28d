//! Submodularity ratio of R².
//!
//! For a set `U` and budget `k` the ratio is the minimum, over `L ⊆ U` and
//! nonempty `S` with `|S| <= k` disjoint from `L`, of
//! `sum_{i in S} (R²(L + i) - R²(L)) / (R²(S + L) - R²(L))`.
//! It measures how far R² is from being submodular around `U`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::CovarianceModel;
use crate::numerics::{CholeskyPath, SymMatrix, CHOLESKY_PIVOT_FLOOR};
use crate::regression::{clamp_r2, r2, single_gains};
use crate::subsets::{binomial, check_budget};

/// Pairs whose denominator `R²(S + L) - R²(L)` is at most this are skipped.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;
pub const DEFAULT_PRUNE_EPS: f64 = 0.2;
/// Largest `|U|` accepted by the enumerating routines.
pub const MAX_OUTER_SET: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RatioMode {
    Exact,
    Pruned { eps: f64 },
    /// The reported ratio is an upper bound on the true one.
    Sampled { trials: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    #[serde(rename = "L")]
    pub l: Vec<usize>,
    #[serde(rename = "S")]
    pub s: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    #[serde(rename = "U")]
    pub u: Vec<usize>,
    pub k: usize,
    /// `+inf` when no pair survived the skip rules.
    #[serde(serialize_with = "crate::numerics::serialize_extended")]
    pub gamma: f64,
    pub witness: Option<Witness>,
    pub mode: RatioMode,
    pub skipped_pairs: u64,
    pub evaluated_pairs: u64,
}

/// Number of valid `(L, S)` pairs for `|U| = u_len` among `n` variables.
pub fn pair_count(n: usize, u_len: usize, k: usize) -> u128 {
    (0..=u_len)
        .map(|l| binomial(u_len, l).saturating_mul(subsets_up_to(n - l, k)))
        .fold(0u128, u128::saturating_add)
}

fn subsets_up_to(free: usize, k: usize) -> u128 {
    (1..=k.min(free)).map(|s| binomial(free, s)).fold(0u128, u128::saturating_add)
}

fn normalized_u(model: &CovarianceModel, u: &[usize]) -> Result<Vec<usize>> {
    let mut u = u.to_vec();
    u.sort_unstable();
    u.dedup();
    if let Some(&bad) = u.iter().find(|&&i| i >= model.n()) {
        return Err(Error::Index { index: bad, dim: model.n() });
    }
    Ok(u)
}

/// All subsets of `u` (sorted), in lexicographic order.
fn subsets_of(u: &[usize]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (0u32..(1u32 << u.len()))
        .map(|mask| u.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &v)| v).collect())
        .collect();
    out.sort();
    out
}

#[derive(Clone, Copy)]
struct Rule {
    prune_eps: Option<f64>,
}

impl Rule {
    /// Ratio for a pair, or `None` when the pair is skipped.
    fn ratio(self, numerator: f64, joint: f64, base: f64) -> Option<f64> {
        if let Some(eps) = self.prune_eps {
            if joint <= (1.0 + eps) * base {
                return None;
            }
        }
        let den = joint - base;
        if den <= DENOMINATOR_FLOOR {
            return None;
        }
        Some(numerator / den)
    }
}

#[derive(Default)]
struct Tally {
    best: Option<(f64, Witness)>,
    skipped: u64,
    evaluated: u64,
}

impl Tally {
    /// Keeps the smaller value; equal values keep the earlier candidate, which
    /// callers guarantee is lexicographically smaller.
    fn offer(&mut self, v: f64, l: &[usize], s: &[usize]) {
        if self.best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            self.best = Some((v, Witness { l: l.to_vec(), s: s.to_vec() }));
        }
    }

    fn merge(&mut self, other: Tally) {
        self.skipped += other.skipped;
        self.evaluated += other.evaluated;
        if let Some((v, w)) = other.best {
            self.offer(v, &w.l, &w.s);
        }
    }
}

/// Depth-first walk over the `S` completing one fixed `L`.
struct PairWalker<'a> {
    c: &'a SymMatrix,
    b: &'a [f64],
    l: &'a [usize],
    free: &'a [usize],
    gains: &'a [f64],
    base: f64,
    k: usize,
    rule: Rule,
    path: CholeskyPath,
    factored_len: usize,
    stack: Vec<usize>,
    joint_buf: Vec<usize>,
    tally: Tally,
}

impl PairWalker<'_> {
    fn joint_r2(&mut self) -> f64 {
        if self.factored_len == self.l.len() + self.stack.len() {
            return clamp_r2(self.path.quad_form());
        }
        self.joint_buf.clear();
        self.joint_buf.extend_from_slice(self.l);
        self.joint_buf.extend_from_slice(&self.stack);
        r2(self.c, self.b, &self.joint_buf)
    }

    fn descend(&mut self, pos: usize, numerator: f64) {
        let var = self.free[pos];
        let was_factored = self.factored_len == self.l.len() + self.stack.len();
        self.stack.push(var);
        if was_factored && self.path.push(self.c, Some(self.b), var, CHOLESKY_PIVOT_FLOOR).is_some() {
            self.factored_len += 1;
        }
        let numerator = numerator + self.gains[var];
        let joint = self.joint_r2();
        match self.rule.ratio(numerator, joint, self.base) {
            Some(v) => {
                self.tally.evaluated += 1;
                self.tally.offer(v, self.l, &self.stack);
            }
            None => self.tally.skipped += 1,
        }
        if self.stack.len() < self.k {
            for next in (pos + 1)..self.free.len() {
                self.descend(next, numerator);
            }
        }
        if self.factored_len == self.l.len() + self.stack.len() {
            self.path.pop();
            self.factored_len -= 1;
        }
        self.stack.pop();
    }
}

fn enumerate(model: &CovarianceModel, target: usize, u: &[usize], k: usize, cap: u64, rule: Rule) -> Result<Tally> {
    let n = model.n();
    if u.len() > MAX_OUTER_SET {
        return Err(Error::Budget { n, k, count: pair_count(n, u.len(), k), cap });
    }
    check_budget(n, k, pair_count(n, u.len(), k), cap)?;
    let (c, b) = (model.c(), model.b(target));
    struct Outer {
        l: Vec<usize>,
        free: Vec<usize>,
        gains: Vec<f64>,
        base: f64,
        path: CholeskyPath,
        factored_len: usize,
    }
    let outers: Vec<Outer> = subsets_of(u)
        .into_iter()
        .map(|l| {
            let free: Vec<usize> = (0..n).filter(|i| !l.contains(i)).collect();
            let (base, gains) = single_gains(c, b, &l);
            let mut path = CholeskyPath::new();
            let mut factored_len = 0;
            for &i in &l {
                if path.push(c, Some(b), i, CHOLESKY_PIVOT_FLOOR).is_none() {
                    break;
                }
                factored_len += 1;
            }
            Outer { l, free, gains, base, path, factored_len }
        })
        .collect();
    let tasks: Vec<(usize, usize)> =
        outers.iter().enumerate().flat_map(|(o, outer)| (0..outer.free.len()).map(move |p| (o, p))).collect();
    let tallies: Vec<Tally> = tasks
        .par_iter()
        .map(|&(o, pos)| {
            let outer = &outers[o];
            let mut w = PairWalker {
                c,
                b,
                l: &outer.l,
                free: &outer.free,
                gains: &outer.gains,
                base: outer.base,
                k,
                rule,
                path: outer.path.clone(),
                factored_len: outer.factored_len,
                stack: Vec::with_capacity(k),
                joint_buf: Vec::new(),
                tally: Tally::default(),
            };
            if k > 0 {
                w.descend(pos, 0.0);
            }
            w.tally
        })
        .collect();
    let mut total = Tally::default();
    for t in tallies {
        total.merge(t);
    }
    Ok(total)
}

fn report(u: Vec<usize>, k: usize, tally: Tally, mode: RatioMode) -> RatioReport {
    let (gamma, witness) = match tally.best {
        Some((v, w)) => (v, Some(w)),
        None => (f64::INFINITY, None),
    };
    RatioReport { u, k, gamma, witness, mode, skipped_pairs: tally.skipped, evaluated_pairs: tally.evaluated }
}

/// Exact submodularity ratio by enumerating every `(L, S)` pair. Fails with a
/// budget error when the pair count exceeds `cap` or `|U| > 12`.
pub fn ratio_exact(model: &CovarianceModel, target: usize, u: &[usize], k: usize, cap: u64) -> Result<RatioReport> {
    let u = normalized_u(model, u)?;
    let tally = enumerate(model, target, &u, k, cap, Rule { prune_eps: None })?;
    Ok(report(u, k, tally, RatioMode::Exact))
}

/// Ratio over the pairs where adding `S` lifts R² above `(1 + eps) R²(L)`.
/// Pairs below that are already near-optimal for a greedy run through `L`,
/// so `U` should be a greedy selection order. When every pair is pruned the
/// ratio is reported as `+inf`.
pub fn ratio_pruned(
    model: &CovarianceModel,
    target: usize,
    u: &[usize],
    k: usize,
    eps: f64,
    cap: u64,
) -> Result<RatioReport> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("pruning eps={eps} must be nonnegative")));
    }
    let u = normalized_u(model, u)?;
    let tally = enumerate(model, target, &u, k, cap, Rule { prune_eps: Some(eps) })?;
    Ok(report(u, k, tally, RatioMode::Pruned { eps }))
}

/// Minimum over `trials` pairs drawn uniformly from all valid `(L, S)`
/// pairs. This is an upper bound on the exact ratio.
pub fn ratio_sampled(
    model: &CovarianceModel,
    target: usize,
    u: &[usize],
    k: usize,
    trials: u64,
    seed: u64,
) -> Result<RatioReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let u = normalized_u(model, u)?;
    let n = model.n();
    let (c, b) = (model.c(), model.b(target));
    let mode = RatioMode::Sampled { trials, seed };
    // every L of the same size has the same number of completions
    let size_weights: Vec<f64> =
        (0..=u.len()).map(|l| binomial(u.len(), l) as f64 * subsets_up_to(n - l, k) as f64).collect();
    if k == 0 || size_weights.iter().all(|w| *w == 0.0) {
        return Ok(report(u, k, Tally::default(), mode));
    }
    let pick_size = WeightedIndex::new(&size_weights).expect("positive total weight");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rule = Rule { prune_eps: None };
    let mut tally = Tally::default();
    let mut draws = Vec::with_capacity(trials as usize);
    for _ in 0..trials {
        let l_size = pick_size.sample(&mut rng);
        let mut l: Vec<usize> = index::sample(&mut rng, u.len(), l_size).into_iter().map(|i| u[i]).collect();
        l.sort_unstable();
        let free: Vec<usize> = (0..n).filter(|i| !l.contains(i)).collect();
        let s_weights: Vec<f64> = (1..=k.min(free.len())).map(|s| binomial(free.len(), s) as f64).collect();
        let s_size = 1 + WeightedIndex::new(&s_weights).expect("nonempty complement").sample(&mut rng);
        let mut s: Vec<usize> = index::sample(&mut rng, free.len(), s_size).into_iter().map(|i| free[i]).collect();
        s.sort_unstable();
        draws.push((l, s));
    }
    let values: Vec<Option<f64>> = draws
        .par_iter()
        .map(|(l, s)| {
            let base = r2(c, b, l);
            let mut buf = l.clone();
            let mut numerator = 0.0;
            for &i in s {
                buf.push(i);
                numerator += r2(c, b, &buf) - base;
                buf.pop();
            }
            buf.extend_from_slice(s);
            rule.ratio(numerator, r2(c, b, &buf), base)
        })
        .collect();
    for ((l, s), v) in draws.iter().zip(values) {
        match v {
            Some(v) => {
                tally.evaluated += 1;
                if tally.best.as_ref().is_none_or(|(bv, w)| v < *bv || (v == *bv && (l, s) < (&w.l, &w.s))) {
                    tally.best = Some((v, Witness { l: l.clone(), s: s.clone() }));
                }
            }
            None => tally.skipped += 1,
        }
    }
    Ok(report(u, k, tally, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{independent, random_model, reference_three, suppressor_pair, RandomModelOptions};
    use crate::regression::{r_squared, residual_ratio};
    use crate::subsets::{combinations, DEFAULT_ENUMERATION_CAP};

    const CAP: u64 = DEFAULT_ENUMERATION_CAP;

    /// Direct transcription of the definition through `r_squared` only.
    fn brute_ratio(m: &CovarianceModel, u: &[usize], k: usize) -> (f64, u64) {
        let n = m.n();
        let mut best = f64::INFINITY;
        let mut skipped = 0;
        for l in subsets_of(u) {
            let base = r_squared(m, 0, &l);
            let free: Vec<usize> = (0..n).filter(|i| !l.contains(i)).collect();
            for size in 1..=k.min(free.len()) {
                for pick in combinations(free.len(), size) {
                    let s: Vec<usize> = pick.iter().map(|&p| free[p]).collect();
                    let num: f64 = s
                        .iter()
                        .map(|&i| {
                            let mut li = l.clone();
                            li.push(i);
                            r_squared(m, 0, &li) - base
                        })
                        .sum();
                    let mut joint = l.clone();
                    joint.extend(&s);
                    let den = r_squared(m, 0, &joint) - base;
                    if den <= DENOMINATOR_FLOOR {
                        skipped += 1;
                    } else {
                        best = best.min(num / den);
                    }
                }
            }
        }
        (best, skipped)
    }

    #[test]
    fn reference_values() {
        let r = ratio_exact(&suppressor_pair(), 0, &[], 2, CAP).unwrap();
        assert!((r.gamma - 0.75).abs() < 1e-12);
        assert_eq!(r.witness, Some(Witness { l: vec![], s: vec![0, 1] }));
        // S = {1} alone has zero gain
        assert_eq!(r.skipped_pairs, 1);

        let r = ratio_exact(&reference_three(), 0, &[], 2, CAP).unwrap();
        assert!((r.gamma - 1.0).abs() < 1e-12);

        let d = independent(&[0.3, 0.1, -0.5, 0.2]).unwrap();
        for k in 1..=3 {
            let r = ratio_exact(&d, 0, &[0, 2], k, CAP).unwrap();
            assert!((r.gamma - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pruning_examples() {
        let r = ratio_pruned(&suppressor_pair(), 0, &[], 2, 0.0, CAP).unwrap();
        assert!((r.gamma - 0.75).abs() < 1e-12);
        // R²(∅) = 0 never prunes, so a large eps keeps only the L = ∅ pairs
        let m = reference_three();
        let r = ratio_pruned(&m, 0, &[0, 2], 2, 10.0, CAP).unwrap();
        assert_eq!(r.evaluated_pairs as u128, pair_count(3, 0, 2));
        assert_eq!(r.gamma, ratio_exact(&m, 0, &[], 2, CAP).unwrap().gamma);

        let zero = independent(&[0.0, 0.0, 0.0]).unwrap();
        let r = ratio_pruned(&zero, 0, &[0], 2, 10.0, CAP).unwrap();
        assert_eq!(r.gamma, f64::INFINITY);
        assert_eq!(r.witness, None);
        assert_eq!(r.skipped_pairs as u128, pair_count(3, 1, 2));
        assert_eq!(r.evaluated_pairs, 0);
    }

    #[test]
    fn sampled_examples() {
        let r = ratio_sampled(&suppressor_pair(), 0, &[], 2, 200, 3).unwrap();
        assert!((r.gamma - 0.75).abs() < 1e-12);
        assert_eq!(r, ratio_sampled(&suppressor_pair(), 0, &[], 2, 200, 3).unwrap());
        let m = reference_three();
        let exact = ratio_exact(&m, 0, &[0, 2], 2, CAP).unwrap();
        let sampled = ratio_sampled(&m, 0, &[0, 2], 2, 5000, 1).unwrap();
        assert!((exact.gamma - sampled.gamma).abs() < 1e-12);
    }

    #[test]
    fn matches_definition_and_matrix_form() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..25 {
            let n = 4 + trial % 4;
            let m = random_model(&mut rng, RandomModelOptions { n, targets: 1, max_common: 1.5 });
            let u: Vec<usize> = (0..(trial % 3)).collect();
            let k = 1 + trial % 3;
            let (want, skipped) = brute_ratio(&m, &u, k);
            let r = ratio_exact(&m, 0, &u, k, CAP).unwrap();
            assert!((r.gamma - want).abs() <= 1e-9 * want.max(1.0), "trial {trial}");
            assert_eq!(r.skipped_pairs, skipped);
            let w = r.witness.unwrap();
            if w.s.len() > 1 {
                let matrix_form = residual_ratio(&m, 0, &w.l, &w.s).unwrap();
                assert!((matrix_form - r.gamma).abs() < 1e-7 * r.gamma.max(1.0), "trial {trial}");
            }
            let pruned = ratio_pruned(&m, 0, &u, k, 0.2, CAP).unwrap();
            assert!(pruned.gamma >= r.gamma - 1e-12);
        }
    }

    #[test]
    fn budget_errors() {
        let m = reference_three();
        assert!(matches!(ratio_exact(&m, 0, &[], 2, 3), Err(Error::Budget { .. })));
        assert_eq!(pair_count(3, 0, 2), 6);
        assert!(matches!(ratio_exact(&m, 0, &[5], 2, CAP), Err(Error::Index { index: 5, .. })));
    }
}
