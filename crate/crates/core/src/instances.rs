//! Small reference models and a random correlation-model generator, used by
//! the examples, the test suites and the benchmark harness.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::model::{CovarianceModel, Target};
use crate::numerics::{RealVector, SymMatrix};

fn single_target(c: SymMatrix, b: Vec<f64>) -> Result<CovarianceModel> {
    CovarianceModel::from_matrices(c, vec![Target { name: "z".into(), b: RealVector::new(b)? }])
}

/// Three variables, `X_0` and `X_1` correlated at 0.5, `X_2` independent;
/// target correlations (0.6, 0.5, 0.4).
pub fn reference_three() -> CovarianceModel {
    let c = SymMatrix::from_rows(vec![vec![1.0, 0.5, 0.0], vec![0.5, 1.0, 0.0], vec![0.0, 0.0, 1.0]])
        .expect("valid matrix");
    single_target(c, vec![0.6, 0.5, 0.4]).expect("valid model")
}

/// Two variables correlated at 0.5 where `X_1` is a pure suppressor: it is
/// uncorrelated with the target yet raises R² jointly with `X_0`.
pub fn suppressor_pair() -> CovarianceModel {
    let c = SymMatrix::from_rows(vec![vec![1.0, 0.5], vec![0.5, 1.0]]).expect("valid matrix");
    single_target(c, vec![0.5, 0.0]).expect("valid model")
}

/// Independent variables with the given target correlations.
pub fn independent(b: &[f64]) -> Result<CovarianceModel> {
    single_target(SymMatrix::identity(b.len()), b.to_vec())
}

/// Options for [`random_model`].
#[derive(Debug, Clone, Copy)]
pub struct RandomModelOptions {
    pub n: usize,
    pub targets: usize,
    /// Upper bound on the loading of each variable on a shared latent factor;
    /// larger values give stronger correlations.
    pub max_common: f64,
}

/// Draws a random joint correlation structure over `n` observation variables
/// and `targets` predictor variables, from a Gram matrix of Gaussian rows
/// sharing a random common factor. The result is always a valid model.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, opts: RandomModelOptions) -> CovarianceModel {
    let total = opts.n + opts.targets;
    let latent = total + 1;
    let common: Vec<f64> = (0..latent).map(|_| rng.sample(StandardNormal)).collect();
    let rows: Vec<Vec<f64>> = (0..total)
        .map(|_| {
            let a = opts.max_common * (2.0 * rng.random::<f64>() - 1.0);
            (0..latent).map(|d| rng.sample::<f64, _>(StandardNormal) + a * common[d]).collect()
        })
        .collect();
    let gram = |i: usize, j: usize| -> f64 { rows[i].iter().zip(&rows[j]).map(|(x, y)| x * y).sum() };
    let norms: Vec<f64> = (0..total).map(|i| gram(i, i).sqrt()).collect();
    let corr = |i: usize, j: usize| -> f64 {
        if i == j {
            1.0
        } else {
            (gram(i, j) / (norms[i] * norms[j])).clamp(-1.0, 1.0)
        }
    };
    let n = opts.n;
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = corr(i, j);
        }
    }
    let c = SymMatrix::from_row_major(n, data).expect("finite");
    let targets = (0..opts.targets)
        .map(|t| Target {
            name: format!("z{t}"),
            b: RealVector::new((0..n).map(|i| corr(n + t, i)).collect()).expect("finite"),
        })
        .collect();
    CovarianceModel::from_matrices(c, targets).expect("Gram construction is a valid correlation model")
}
