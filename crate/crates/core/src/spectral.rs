//! Sparse eigenvalues of the correlation matrix, coherence, and a grid-search
//! lower bound on the smallest sparse eigenvalue.
//!
//! `lambda_min(C, k)` is the smallest eigenvalue over all `k x k` principal
//! submatrices, `lambda_max(C, k)` the largest, and `kappa(C, k)` the largest
//! condition number. The exact routines enumerate subsets depth-first and
//! only diagonalize a submatrix when a shifted Cholesky test says it can beat
//! the incumbent.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CovarianceModel;
use crate::numerics::{eig_sym, extreme_eigenvalues, CholeskyPath, SymMatrix};
use crate::subsets::{binomial, check_budget};

/// Largest subspace dimension accepted by [`lower_bound_via_beta`].
pub const MAX_BETA_DIMENSION: usize = 3;
pub const DEFAULT_BETA_DIMENSION: usize = 2;
pub const DEFAULT_BETA_EPSILON: f64 = 0.1;

/// Candidates whose score lies within this distance of the incumbent count as
/// ties and are resolved by lexicographic order.
const TIE_TOL: f64 = 1e-12;
/// Safety margin added to Cholesky shifts so that near-ties are always
/// evaluated exactly.
const SHIFT_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigMode {
    Exact,
    /// Enumeration was over budget: `lam_min_k` is a lower bound, `lam_max_k`
    /// and `kappa_k` are upper bounds.
    BoundOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseEigReport {
    pub k: usize,
    pub lam_min_k: f64,
    /// Lexicographically first subset attaining `lam_min_k` (empty in
    /// bound-only mode).
    pub argmin_subset: Vec<usize>,
    pub lam_max_k: f64,
    /// May be infinite when some `k`-subset is singular.
    #[serde(serialize_with = "crate::numerics::serialize_extended")]
    pub kappa_k: f64,
    pub interlace_lower: f64,
    pub interlace_upper: f64,
    pub mode: EigMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaEstimate {
    pub j: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub lower_bound: f64,
}

/// Extremum of a subset score over all `k`-subsets. `score` must equal the
/// smallest eigenvalue of `m_S` scaled so that `score(S) < t` implies
/// `lambda_min(m_S) < shift(t)`.
struct ShiftedSearch<'a> {
    m: &'a SymMatrix,
    k: usize,
    score: &'a (dyn Fn(&[usize], &mut Vec<f64>) -> f64 + Sync),
    shift: &'a (dyn Fn(f64) -> f64 + Sync),
}

struct Incumbent {
    value: f64,
    subset: Vec<usize>,
}

impl Incumbent {
    fn offer(&mut self, value: f64, subset: &[usize]) -> bool {
        let better = value < self.value - TIE_TOL || (value <= self.value + TIE_TOL && subset < &self.subset[..]);
        if better {
            self.value = value;
            self.subset = subset.to_vec();
        }
        better
    }
}

struct Walker<'s, 'a> {
    search: &'s ShiftedSearch<'a>,
    path: CholeskyPath,
    stack: Vec<usize>,
    best: Incumbent,
    scratch: Vec<f64>,
}

impl Walker<'_, '_> {
    fn sync_shift(&mut self) {
        let want = (self.search.shift)(self.best.value);
        if self.path.shift() == want {
            return;
        }
        self.path.reset(want);
        for &i in &self.stack {
            if self.path.push(self.search.m, None, i, 0.0).is_none() {
                break;
            }
        }
    }

    fn descend(&mut self, var: usize) {
        self.sync_shift();
        let all_factored = self.path.len() == self.stack.len();
        self.stack.push(var);
        if all_factored {
            self.path.push(self.search.m, None, var, 0.0);
        }
        let n = self.search.m.dim();
        if self.stack.len() == self.search.k {
            if self.path.len() < self.stack.len() {
                let v = (self.search.score)(&self.stack, &mut self.scratch);
                self.best.offer(v, &self.stack);
            }
        } else {
            let remaining = self.search.k - self.stack.len();
            for next in (var + 1)..=(n - remaining) {
                self.descend(next);
            }
        }
        self.stack.pop();
        if self.path.len() > self.stack.len() {
            self.path.pop();
        }
    }
}

impl ShiftedSearch<'_> {
    fn greedy_seed(&self) -> Incumbent {
        let n = self.m.dim();
        let mut scratch = Vec::new();
        let mut s: Vec<usize> = Vec::with_capacity(self.k);
        let mut value = f64::INFINITY;
        for _ in 0..self.k {
            let mut pick = None;
            for j in 0..n {
                if s.contains(&j) {
                    continue;
                }
                let mut cand = s.clone();
                cand.push(j);
                cand.sort_unstable();
                let v = (self.score)(&cand, &mut scratch);
                if pick.is_none_or(|(_, pv)| v < pv) {
                    pick = Some((j, v));
                }
            }
            let (j, v) = pick.expect("k <= n");
            s.push(j);
            value = v;
        }
        s.sort_unstable();
        Incumbent { value, subset: s }
    }

    fn run(&self) -> Incumbent {
        let seed = self.greedy_seed();
        let n = self.m.dim();
        let chunks: Vec<Incumbent> = (0..=n - self.k)
            .into_par_iter()
            .map(|first| {
                let mut w = Walker {
                    search: self,
                    path: CholeskyPath::with_shift(f64::NAN),
                    stack: Vec::with_capacity(self.k),
                    best: Incumbent { value: seed.value, subset: seed.subset.clone() },
                    scratch: Vec::new(),
                };
                w.descend(first);
                w.best
            })
            .collect();
        let mut best = Incumbent { value: seed.value, subset: seed.subset };
        for c in chunks {
            best.offer(c.value, &c.subset);
        }
        best
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("sparse eigenvalue budget k={k} must lie in 1..={n}")));
    }
    Ok(())
}

fn negated(c: &SymMatrix) -> SymMatrix {
    let data = c.as_slice().iter().map(|x| -x).collect();
    SymMatrix::from_row_major(c.dim(), data).expect("finite")
}

/// `lambda_min(C, k)` with the lexicographically first minimizing subset.
pub fn sparse_eig_min(model: &CovarianceModel, k: usize, cap: u64) -> Result<(f64, Vec<usize>)> {
    sparse_eig_min_of(model.c(), k, cap)
}

pub(crate) fn sparse_eig_min_of(c: &SymMatrix, k: usize, cap: u64) -> Result<(f64, Vec<usize>)> {
    let n = c.dim();
    check_k(n, k)?;
    check_budget(n, k, binomial(n, k), cap)?;
    let score = |s: &[usize], scratch: &mut Vec<f64>| extreme_eigenvalues(c, s, scratch).0;
    let shift = |best: f64| best + SHIFT_MARGIN;
    let best = ShiftedSearch { m: c, k, score: &score, shift: &shift }.run();
    Ok((best.value, best.subset))
}

/// `lambda_max(C, k)` with the lexicographically first maximizing subset.
pub fn sparse_eig_max(model: &CovarianceModel, k: usize, cap: u64) -> Result<(f64, Vec<usize>)> {
    let c = model.c();
    let n = c.dim();
    check_k(n, k)?;
    check_budget(n, k, binomial(n, k), cap)?;
    let neg = negated(c);
    let score = |s: &[usize], scratch: &mut Vec<f64>| -extreme_eigenvalues(c, s, scratch).1;
    let shift = |best: f64| best + SHIFT_MARGIN;
    let best = ShiftedSearch { m: &neg, k, score: &score, shift: &shift }.run();
    Ok((-best.value, best.subset))
}

/// `kappa(C, k)`, the worst condition number of a `k x k` principal
/// submatrix, with the subset attaining it. Infinite when some subset is
/// singular.
pub fn sparse_kappa(model: &CovarianceModel, k: usize, cap: u64) -> Result<(f64, Vec<usize>)> {
    let (lam_max, _) = sparse_eig_max(model, k, cap)?;
    let c = model.c();
    // minimize lambda_min / lambda_max; beating ratio r forces
    // lambda_min(C_S) < r * lambda_max(C_S) <= r * lam_max
    let score = |s: &[usize], scratch: &mut Vec<f64>| {
        let (lo, hi) = extreme_eigenvalues(c, s, scratch);
        (lo.max(0.0) / hi).clamp(0.0, 1.0)
    };
    let shift = |best: f64| (best + SHIFT_MARGIN) * lam_max;
    let best = ShiftedSearch { m: c, k, score: &score, shift: &shift }.run();
    let kappa = if best.value > 0.0 { 1.0 / best.value } else { f64::INFINITY };
    Ok((kappa, best.subset))
}

/// Exact sparse eigenvalue summary. Fails with a budget error when `C(n,k)`
/// exceeds `cap`; see [`sparse_eig_or_bound`] for the fallback.
pub fn sparse_eig(model: &CovarianceModel, k: usize, cap: u64) -> Result<SparseEigReport> {
    let (lam_min_k, argmin_subset) = sparse_eig_min(model, k, cap)?;
    let (lam_max_k, _) = sparse_eig_max(model, k, cap)?;
    let (kappa_k, _) = sparse_kappa(model, k, cap)?;
    let (interlace_lower, interlace_upper) = interlacing(model.c(), k);
    Ok(SparseEigReport {
        k,
        lam_min_k,
        argmin_subset,
        lam_max_k,
        kappa_k,
        interlace_lower,
        interlace_upper,
        mode: EigMode::Exact,
    })
}

/// Like [`sparse_eig`], but when enumeration is over budget reports
/// `max(lambda_1, beta bound)` as the lower bound on `lambda_min(C, k)` and
/// `lambda_n` as the upper bound on `lambda_max(C, k)`.
pub fn sparse_eig_or_bound(model: &CovarianceModel, k: usize, cap: u64) -> Result<SparseEigReport> {
    match sparse_eig(model, k, cap) {
        Err(Error::Budget { .. }) => {}
        other => return other,
    }
    let c = model.c();
    let n = c.dim();
    let (interlace_lower, interlace_upper) = interlacing(c, k);
    let mut lam_min_k = interlace_lower;
    if n > DEFAULT_BETA_DIMENSION {
        let est = lower_bound_via_beta(model, k, DEFAULT_BETA_DIMENSION, DEFAULT_BETA_EPSILON)?;
        lam_min_k = lam_min_k.max(est.lower_bound);
    }
    let lam_max_k = *eig_sym(c)?.eigenvalues.last().expect("n >= 1");
    let kappa_k = if lam_min_k > 0.0 { lam_max_k / lam_min_k } else { f64::INFINITY };
    Ok(SparseEigReport {
        k,
        lam_min_k,
        argmin_subset: Vec::new(),
        lam_max_k,
        kappa_k,
        interlace_lower,
        interlace_upper,
        mode: EigMode::BoundOnly,
    })
}

/// `lambda_min(C, m)` for `m` possibly beyond `n` (clamped), exact when
/// within budget and otherwise the bound-only lower bound.
pub fn sparse_eig_min_or_bound(model: &CovarianceModel, m: usize, cap: u64) -> Result<(f64, EigMode)> {
    let m = m.clamp(1, model.n());
    match sparse_eig_min(model, m, cap) {
        Ok((v, _)) => Ok((v, EigMode::Exact)),
        Err(Error::Budget { .. }) => sparse_eig_or_bound(model, m, 0).map(|r| (r.lam_min_k, EigMode::BoundOnly)),
        Err(e) => Err(e),
    }
}

/// `(lambda_1, lambda_{n-k+1})`: the interlacing sandwich for
/// `lambda_min(C, k)`.
fn interlacing(c: &SymMatrix, k: usize) -> (f64, f64) {
    let vals = crate::numerics::eigenvalues_sym(c);
    let n = vals.len();
    (vals[0], vals[n - k.clamp(1, n)])
}

/// Largest absolute off-diagonal correlation.
pub fn coherence(model: &CovarianceModel) -> Result<f64> {
    let c = model.c();
    let n = c.dim();
    if n < 2 {
        return Err(Error::Dimension(format!("coherence needs at least 2 variables, got {n}")));
    }
    let mut mu: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            mu = mu.max(c.get(i, j).abs());
        }
    }
    Ok(mu)
}

/// Best `|x . y|` over unit `k`-sparse `x` for a fixed unit `y`: the norm of
/// the `k` largest-magnitude entries.
pub(crate) fn top_k_norm(y: &[f64], k: usize, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(y.iter().map(|v| v * v));
    let k = k.min(scratch.len());
    if k < scratch.len() {
        scratch.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    }
    scratch[..k].iter().sum::<f64>().sqrt()
}

/// Lower bound on `lambda_min(C, k)` from the `j` smallest eigenvectors:
/// `lambda_{j+1} * (1 - beta)`, where `beta` approximates the largest overlap
/// between a unit vector in their span and a unit `k`-sparse vector. `beta`
/// is searched over a grid of span coefficients with step
/// `epsilon * sqrt(k / (n j))`.
pub fn lower_bound_via_beta(model: &CovarianceModel, k: usize, j: usize, epsilon: f64) -> Result<BetaEstimate> {
    let c = model.c();
    let n = c.dim();
    if j > MAX_BETA_DIMENSION {
        return Err(Error::Budget { n, k: j, count: u128::MAX, cap: MAX_BETA_DIMENSION as u64 });
    }
    if j == 0 || j >= n {
        return Err(Error::InvalidArgument(format!("subspace dimension j={j} must lie in 1..{n}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon={epsilon} must lie in (0, 1)")));
    }
    check_k(n, k)?;
    let eig = eig_sym(c)?;
    let basis: Vec<Vec<f64>> = (0..j).map(|i| eig.eigenvectors[i].clone()).collect();
    let beta = beta_on_grid(&basis, k, epsilon * (k as f64 / (n * j) as f64).sqrt());
    let lower_bound = eig.eigenvalues[j] * (1.0 - beta.min(1.0));
    Ok(BetaEstimate { j, epsilon, beta, lower_bound })
}

/// Grid search for the largest `k`-sparse overlap with unit vectors in the
/// span of the orthonormal `basis`, coefficients on multiples of `step`.
pub(crate) fn beta_on_grid(basis: &[Vec<f64>], k: usize, step: f64) -> f64 {
    let j = basis.len();
    let n = basis[0].len();
    let steps = (1.0 / step).floor() as i64;
    let width = (2 * steps + 1) as usize;
    let tol = step * (j as f64).sqrt();
    (0..width)
        .into_par_iter()
        .map(|first| {
            let mut coeff = vec![0.0; j];
            let mut idx = vec![0usize; j];
            idx[0] = first;
            let mut y = vec![0.0; n];
            let mut scratch = Vec::with_capacity(n);
            let mut best: f64 = 0.0;
            let inner = width.pow(j as u32 - 1);
            for mut code in 0..inner {
                for slot in idx.iter_mut().skip(1) {
                    *slot = code % width;
                    code /= width;
                }
                for (cf, &i) in coeff.iter_mut().zip(&idx) {
                    *cf = (i as i64 - steps) as f64 * step;
                }
                let norm = coeff.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 || (norm - 1.0).abs() > tol {
                    continue;
                }
                y.iter_mut().for_each(|v| *v = 0.0);
                for (cf, e) in coeff.iter().zip(basis) {
                    for (yi, ei) in y.iter_mut().zip(e) {
                        *yi += cf / norm * ei;
                    }
                }
                best = best.max(top_k_norm(&y, k, &mut scratch));
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{independent, random_model, reference_three, RandomModelOptions};
    use crate::model::Target;
    use crate::numerics::RealVector;
    use crate::subsets::{combinations, DEFAULT_ENUMERATION_CAP};
    use rand::SeedableRng;

    const CAP: u64 = DEFAULT_ENUMERATION_CAP;

    fn model_of(c: SymMatrix) -> CovarianceModel {
        let n = c.dim();
        CovarianceModel::from_matrices(c, vec![Target { name: "z".into(), b: RealVector::new(vec![0.0; n]).unwrap() }])
            .unwrap()
    }

    fn brute(m: &CovarianceModel, k: usize) -> (f64, f64, f64) {
        let mut scratch = Vec::new();
        let (mut lo, mut hi, mut kap) = (f64::INFINITY, f64::NEG_INFINITY, 1.0f64);
        for s in combinations(m.n(), k) {
            let (a, b) = extreme_eigenvalues(m.c(), &s, &mut scratch);
            lo = lo.min(a);
            hi = hi.max(b);
            kap = kap.max(b / a);
        }
        (lo, hi, kap)
    }

    #[test]
    fn small_examples() {
        let id = independent(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        for k in 1..=4 {
            let r = sparse_eig(&id, k, CAP).unwrap();
            assert!((r.lam_min_k - 1.0).abs() < 1e-12 && (r.lam_max_k - 1.0).abs() < 1e-12);
            assert!((r.kappa_k - 1.0).abs() < 1e-12);
        }
        let eq = model_of(SymMatrix::equicorrelated(3, 0.5).unwrap());
        assert!((sparse_eig_min(&eq, 2, CAP).unwrap().0 - 0.5).abs() < 1e-12);
        let (v, s) = sparse_eig_min(&reference_three(), 2, CAP).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        assert_eq!(s, vec![0, 1]);
    }

    #[test]
    fn coherence_examples() {
        assert_eq!(coherence(&independent(&[0.1, 0.2]).unwrap()).unwrap(), 0.0);
        assert_eq!(coherence(&reference_three()).unwrap(), 0.5);
        let eq = model_of(SymMatrix::equicorrelated(4, 0.3).unwrap());
        assert!((coherence(&eq).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(coherence(&independent(&[0.1]).unwrap()), Err(Error::Dimension(_))));
    }

    #[test]
    fn pruned_search_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..40 {
            let n = 4 + trial % 6;
            let m = random_model(&mut rng, RandomModelOptions { n, targets: 1, max_common: 2.0 });
            for k in 1..=n {
                let (lo, hi, kap) = brute(&m, k);
                let r = sparse_eig(&m, k, CAP).unwrap();
                assert!((r.lam_min_k - lo).abs() < 1e-10, "min n={n} k={k}");
                assert!((r.lam_max_k - hi).abs() < 1e-10, "max n={n} k={k}");
                assert!((r.kappa_k - kap).abs() < 1e-8 * kap, "kappa n={n} k={k}");
                let mut scratch = Vec::new();
                let (a, _) = extreme_eigenvalues(m.c(), &r.argmin_subset, &mut scratch);
                assert!((a - lo).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn argmin_ties_pick_lexicographic_first() {
        let eq = model_of(SymMatrix::equicorrelated(5, 0.2).unwrap());
        assert_eq!(sparse_eig_min(&eq, 3, CAP).unwrap().1, vec![0, 1, 2]);
    }

    #[test]
    fn budget_and_fallback() {
        let m = reference_three();
        assert!(matches!(sparse_eig_min(&m, 2, 2), Err(Error::Budget { .. })));
        let r = sparse_eig_or_bound(&m, 2, 2).unwrap();
        assert_eq!(r.mode, EigMode::BoundOnly);
        assert!(r.lam_min_k <= 0.5 + 1e-9 && r.lam_min_k >= r.interlace_lower - 1e-12);
        assert!(r.lam_max_k >= 1.5 - 1e-9);
    }

    #[test]
    fn beta_examples() {
        // bottom eigenvector (1, -1, 0)/sqrt(2) is 2-sparse
        let est = lower_bound_via_beta(&reference_three(), 2, 1, 0.1).unwrap();
        assert!((est.beta - 1.0).abs() < 1e-12);
        assert!(est.lower_bound.abs() < 1e-12);
        let est = lower_bound_via_beta(&reference_three(), 1, 1, 0.1).unwrap();
        assert!((est.beta - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(est.lower_bound <= 0.5 + 1e-12);

        let id = independent(&[0.0; 5]).unwrap();
        for j in 1..=3 {
            let est = lower_bound_via_beta(&id, 2, j, 0.2).unwrap();
            assert!(est.lower_bound <= 1.0 + 1e-12);
        }
        assert!(matches!(lower_bound_via_beta(&id, 2, 4, 0.2), Err(Error::Budget { .. })));
    }
}
