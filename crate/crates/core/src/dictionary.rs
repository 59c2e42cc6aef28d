//! Dictionary selection: choose `d` variables so that every target is well
//! explained by its best `k` of them.
//!
//! Three objectives are available for a dictionary `D`: the exact `F` (best
//! `k`-subset per target), the modular surrogate `F_hat` (sum of the top-`k`
//! squared target correlations inside `D`) and `F_omp` (per-target OMP run
//! inside `D`).

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CovarianceModel;
use crate::selection::{best_subset_within, omp_within, GreedyOptions};
use crate::subsets::{binomial, check_budget, combinations};

#[derive(Debug, Clone)]
pub struct DictionaryProblem<'a> {
    model: &'a CovarianceModel,
    d: usize,
    k: usize,
}

impl<'a> DictionaryProblem<'a> {
    pub fn new(model: &'a CovarianceModel, d: usize, k: usize) -> Result<Self> {
        let n = model.n();
        if model.targets().is_empty() {
            return Err(Error::InvalidArgument("dictionary selection needs at least one target".into()));
        }
        if k == 0 || k > d || d > n {
            return Err(Error::InvalidArgument(format!("budgets must satisfy 1 <= k <= d <= n, got k={k}, d={d}, n={n}")));
        }
        Ok(DictionaryProblem { model, d, k })
    }

    pub fn model(&self) -> &CovarianceModel {
        self.model
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn sorted(&self, dict: &[usize]) -> Result<Vec<usize>> {
        let mut s = dict.to_vec();
        s.sort_unstable();
        s.dedup();
        if let Some(&bad) = s.iter().find(|&&i| i >= self.model.n()) {
            return Err(Error::Index { index: bad, dim: self.model.n() });
        }
        Ok(s)
    }

    /// Exact objective: sum over targets of the best R² achievable with `k`
    /// variables from `dict`.
    pub fn eval_f(&self, dict: &[usize], cap: u64) -> Result<f64> {
        Ok(self.inner_best(dict, cap)?.iter().map(|t| t.r2).sum())
    }

    /// Modular surrogate: sum over targets of the `k` largest `b_i²`, `i` in
    /// `dict`.
    pub fn eval_f_hat(&self, dict: &[usize]) -> Result<f64> {
        let dict = self.sorted(dict)?;
        Ok((0..self.model.targets().len()).map(|t| top_k_sq(self.model.b(t), &dict, self.k)).sum())
    }

    /// Sum over targets of the R² reached by `k` OMP steps inside `dict`.
    pub fn eval_f_omp(&self, dict: &[usize]) -> Result<f64> {
        let dict = self.sorted(dict)?;
        Ok(self.f_omp_sorted(&dict))
    }

    fn f_omp_sorted(&self, dict: &[usize]) -> f64 {
        let c = self.model.c();
        (0..self.model.targets().len())
            .map(|t| omp_within(c, self.model.b(t), dict, self.k, GreedyOptions::default()).2)
            .sum()
    }

    /// Best `k`-subset of `dict` for every target.
    pub fn inner_best(&self, dict: &[usize], cap: u64) -> Result<Vec<TargetFit>> {
        let dict = self.sorted(dict)?;
        let kk = self.k.min(dict.len());
        check_budget(dict.len(), kk, binomial(dict.len(), kk), cap)?;
        Ok(self.inner_best_sorted(&dict))
    }

    fn inner_best_sorted(&self, dict: &[usize]) -> Vec<TargetFit> {
        let c = self.model.c();
        self.model
            .targets()
            .iter()
            .enumerate()
            .map(|(t, target)| {
                let (subset, r2) = best_subset_within(c, self.model.b(t), dict, self.k);
                TargetFit { target: target.name.clone(), subset, r2 }
            })
            .collect()
    }

    fn result(&self, algorithm: DictAlgorithm, dictionary: Vec<usize>) -> DictionaryResult {
        let sorted = self.sorted(&dictionary).expect("indices come from the model");
        let per_target = self.inner_best_sorted(&sorted);
        let f = per_target.iter().map(|t| t.r2).sum();
        let f_hat = self.eval_f_hat(&sorted).expect("valid dictionary");
        let f_omp = self.f_omp_sorted(&sorted);
        DictionaryResult { algorithm, dictionary, per_target, f, f_hat, f_omp }
    }
}

fn top_k_sq(b: &[f64], dict: &[usize], k: usize) -> f64 {
    let mut sq: Vec<f64> = dict.iter().map(|&i| b[i] * b[i]).collect();
    sq.sort_by(|x, y| y.total_cmp(x));
    sq.iter().take(k).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DictAlgorithm {
    #[serde(rename = "SDS_MA")]
    SdsMa,
    #[serde(rename = "SDS_OMP")]
    SdsOmp,
    #[serde(rename = "OPT")]
    Optimum,
}

impl fmt::Display for DictAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DictAlgorithm::SdsMa => "SDS_MA",
            DictAlgorithm::SdsOmp => "SDS_OMP",
            DictAlgorithm::Optimum => "OPT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetFit {
    pub target: String,
    /// Best `k`-subset of the dictionary for this target.
    pub subset: Vec<usize>,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DictionaryResult {
    pub algorithm: DictAlgorithm,
    /// Dictionary in selection order (ascending for the optimum).
    pub dictionary: Vec<usize>,
    pub per_target: Vec<TargetFit>,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "F_hat")]
    pub f_hat: f64,
    #[serde(rename = "F_omp")]
    pub f_omp: f64,
}

/// Grows the dictionary `d` times by a generic objective, lowest index on
/// ties. Zero-gain steps still add a variable.
fn greedy_dictionary(n: usize, d: usize, objective: impl Fn(&[usize]) -> f64 + Sync) -> Vec<usize> {
    let mut dict: Vec<usize> = Vec::with_capacity(d);
    for _ in 0..d {
        let candidates: Vec<usize> = (0..n).filter(|i| !dict.contains(i)).collect();
        let scores: Vec<f64> = candidates
            .par_iter()
            .map(|&j| {
                let mut trial = dict.clone();
                trial.push(j);
                trial.sort_unstable();
                objective(&trial)
            })
            .collect();
        let mut best = 0;
        for (pos, v) in scores.iter().enumerate() {
            if *v > scores[best] {
                best = pos;
            }
        }
        dict.push(candidates[best]);
    }
    dict
}

/// Greedy dictionary on the modular surrogate `F_hat`.
pub fn sds_ma(problem: &DictionaryProblem) -> DictionaryResult {
    let dict = greedy_dictionary(problem.model.n(), problem.d, |trial| {
        (0..problem.model.targets().len()).map(|t| top_k_sq(problem.model.b(t), trial, problem.k)).sum()
    });
    problem.result(DictAlgorithm::SdsMa, dict)
}

/// Greedy dictionary on `F_omp`.
pub fn sds_omp(problem: &DictionaryProblem) -> DictionaryResult {
    let dict = greedy_dictionary(problem.model.n(), problem.d, |trial| problem.f_omp_sorted(trial));
    problem.result(DictAlgorithm::SdsOmp, dict)
}

/// Dictionary maximizing `F` over all `C(n, d)` candidates; the
/// lexicographically smallest wins ties.
pub fn exhaustive_dict_opt(problem: &DictionaryProblem, cap: u64) -> Result<DictionaryResult> {
    let n = problem.model.n();
    let (d, k) = (problem.d, problem.k);
    let count = binomial(n, d)
        .saturating_mul(binomial(d, k))
        .saturating_mul(problem.model.targets().len() as u128);
    check_budget(n, d, count, cap)?;
    let dicts: Vec<Vec<usize>> = combinations(n, d).collect();
    let values: Vec<f64> =
        dicts.par_iter().map(|dict| problem.inner_best_sorted(dict).iter().map(|t| t.r2).sum()).collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    Ok(problem.result(DictAlgorithm::Optimum, dicts[best].clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{independent, reference_three};
    use crate::model::Target;
    use crate::numerics::{RealVector, SymMatrix};
    use crate::regression::r_squared;
    use crate::subsets::DEFAULT_ENUMERATION_CAP;

    const CAP: u64 = DEFAULT_ENUMERATION_CAP;

    fn two_matched_targets() -> CovarianceModel {
        let targets = vec![
            Target { name: "z1".into(), b: RealVector::new(vec![0.0, 1.0, 0.0]).unwrap() },
            Target { name: "z2".into(), b: RealVector::new(vec![0.0, 0.0, 1.0]).unwrap() },
        ];
        CovarianceModel::from_matrices(SymMatrix::identity(3), targets).unwrap()
    }

    #[test]
    fn objective_examples() {
        let m = reference_three();
        let p = DictionaryProblem::new(&m, 3, 3).unwrap();
        assert!((p.eval_f(&[0, 1, 2], CAP).unwrap() - r_squared(&m, 0, &[0, 1, 2])).abs() < 1e-14);

        let p = DictionaryProblem::new(&m, 2, 1).unwrap();
        for v in [p.eval_f(&[0, 1], CAP).unwrap(), p.eval_f_hat(&[0, 1]).unwrap(), p.eval_f_omp(&[0, 1]).unwrap()] {
            assert!((v - 0.36).abs() < 1e-14);
        }

        let d = independent(&[0.3, -0.6, 0.2, 0.4]).unwrap();
        let p = DictionaryProblem::new(&d, 3, 2).unwrap();
        for dict in [vec![0, 1, 2], vec![1, 3, 0], vec![2, 3, 1]] {
            let f = p.eval_f(&dict, CAP).unwrap();
            assert!((f - p.eval_f_hat(&dict).unwrap()).abs() < 1e-14);
            assert!((f - p.eval_f_omp(&dict).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn greedy_examples() {
        let m = reference_three();
        let p = DictionaryProblem::new(&m, 2, 1).unwrap();
        for r in [sds_ma(&p), sds_omp(&p)] {
            assert_eq!(r.dictionary, vec![0, 1]);
            assert!((r.f - 0.36).abs() < 1e-14);
        }

        let d = independent(&[0.3, -0.6, 0.2, 0.4]).unwrap();
        let p = DictionaryProblem::new(&d, 3, 2).unwrap();
        let ma = sds_ma(&p);
        assert_eq!(ma.dictionary, vec![1, 3, 0]);
        assert!((ma.f - 0.52).abs() < 1e-14);
        assert_eq!(sds_omp(&p).dictionary, ma.dictionary);

        let two = two_matched_targets();
        let p = DictionaryProblem::new(&two, 2, 1).unwrap();
        let r = sds_ma(&p);
        assert_eq!(r.dictionary, vec![1, 2]);
        assert!((r.f - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exhaustive_examples() {
        let m = reference_three();
        let p = DictionaryProblem::new(&m, 2, 2).unwrap();
        let r = exhaustive_dict_opt(&p, CAP).unwrap();
        assert_eq!(r.dictionary, vec![0, 2]);
        assert!((r.f - 0.52).abs() < 1e-14);

        let p = DictionaryProblem::new(&m, 3, 2).unwrap();
        let r = exhaustive_dict_opt(&p, CAP).unwrap();
        assert!((r.f - p.eval_f(&[0, 1, 2], CAP).unwrap()).abs() < 1e-14);

        let two = two_matched_targets();
        let p = DictionaryProblem::new(&two, 2, 1).unwrap();
        assert_eq!(exhaustive_dict_opt(&p, CAP).unwrap().dictionary, vec![1, 2]);
        assert!(matches!(exhaustive_dict_opt(&p, 2), Err(Error::Budget { .. })));
    }

    #[test]
    fn rejects_bad_budgets() {
        let m = reference_three();
        assert!(DictionaryProblem::new(&m, 2, 3).is_err());
        assert!(DictionaryProblem::new(&m, 4, 1).is_err());
        assert!(DictionaryProblem::new(&m, 2, 0).is_err());
    }
}
