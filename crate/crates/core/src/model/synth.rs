use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::SampleTable;
use crate::error::{Error, Result};

/// Parameters of the equicorrelated Gaussian benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub m: usize,
    pub rho: f64,
    pub coef_max: f64,
    pub noise_var: f64,
    pub seed: u64,
    pub runs: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec { n: 29, m: 100, rho: 0.6, coef_max: 10.0, noise_var: 0.1, seed: 0, runs: 20 }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.m < 2 {
            return bad(format!("m must be at least 2, got {}", self.m));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if !self.coef_max.is_finite() || self.coef_max < 0.0 {
            return bad(format!("coef_max must be finite and non-negative, got {}", self.coef_max));
        }
        if !self.noise_var.is_finite() || self.noise_var < 0.0 {
            return bad(format!("noise_var must be finite and non-negative, got {}", self.noise_var));
        }
        if self.runs == 0 {
            return bad("runs must be positive".into());
        }
        Ok(())
    }

    /// Generator for run `run`: ChaCha8 keyed by `seed`, stream number `run`.
    pub fn run_rng(&self, run: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(run as u64);
        rng
    }

    /// Generates the table of a single run. Columns are `x1..xn` then `z`.
    ///
    /// Draw order within a run: the `m x n` standard normals (row by row), then
    /// the `n` coefficients, then the `m` noise terms.
    pub fn generate_run(&self, run: usize) -> Result<SampleTable> {
        self.validate()?;
        let (n, m) = (self.n, self.m);
        let chol = equicorrelated_cholesky(n, self.rho);
        let mut rng = self.run_rng(run);

        let mut cols = vec![vec![0.0; m]; n];
        let mut g = vec![0.0; n];
        for r in 0..m {
            for gi in g.iter_mut() {
                *gi = StandardNormal.sample(&mut rng);
            }
            for i in 0..n {
                cols[i][r] = (0..=i).map(|j| chol[i * n + j] * g[j]).sum();
            }
        }
        let coef = Uniform::new_inclusive(0.0, self.coef_max).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let w: Vec<f64> = (0..n).map(|_| coef.sample(&mut rng)).collect();
        let noise = Normal::new(0.0, self.noise_var.sqrt()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let z: Vec<f64> = (0..m)
            .map(|r| {
                let signal: f64 = (0..n).map(|i| cols[i][r] * w[i]).sum();
                let eps: f64 = if self.noise_var > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                signal + eps
            })
            .collect();

        let mut names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        names.push("z".into());
        cols.push(z);
        SampleTable::new(names, cols)
    }
}

/// All `runs` tables; run `r` only depends on `(seed, r)`.
pub fn synth_generate(spec: &SyntheticSpec) -> Result<Vec<SampleTable>> {
    spec.validate()?;
    (0..spec.runs).map(|r| spec.generate_run(r)).collect()
}

/// Lower Cholesky factor of the unit-diagonal equicorrelated matrix, row-major.
fn equicorrelated_cholesky(n: usize, rho: f64) -> Vec<f64> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let a = if i == j { 1.0 } else { rho };
            let s: f64 = a - (0..j).map(|p| l[i * n + p] * l[j * n + p]).sum::<f64>();
            l[i * n + j] = if i == j { s.sqrt() } else { s / l[j * n + j] };
        }
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CovarianceModel;

    #[test]
    fn deterministic_per_seed() {
        let spec = SyntheticSpec { runs: 2, seed: 7, ..Default::default() };
        let a = synth_generate(&spec).unwrap();
        let b = synth_generate(&spec).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        // a run regenerated alone matches its batch counterpart
        assert_eq!(spec.generate_run(1).unwrap(), a[1]);
    }

    #[test]
    fn default_shape() {
        let spec = SyntheticSpec { runs: 1, ..Default::default() };
        let t = &synth_generate(&spec).unwrap()[0];
        assert_eq!(t.names().len(), 30);
        assert_eq!(t.rows(), 100);
        assert_eq!(t.names().last().unwrap(), "z");
    }

    #[test]
    fn empirical_correlation_close_to_rho() {
        let spec = SyntheticSpec { n: 5, m: 200_000, runs: 1, seed: 3, ..Default::default() };
        let t = spec.generate_run(0).unwrap();
        let model = CovarianceModel::from_samples(&t, &["z"]).unwrap();
        let c = model.c();
        let mut sum = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    sum += c.get(i, j);
                }
            }
        }
        let mean = sum / 20.0;
        assert!((mean - 0.6).abs() < 0.01, "mean off-diagonal {mean}");
        assert!(model.b(0).iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn invalid_specs() {
        assert!(SyntheticSpec { rho: 1.0, ..Default::default() }.validate().is_err());
        assert!(SyntheticSpec { runs: 0, ..Default::default() }.validate().is_err());
        assert!(SyntheticSpec { noise_var: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn cholesky_reconstructs() {
        let n = 4;
        let l = equicorrelated_cholesky(n, 0.6);
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|p| l[i * n + p] * l[j * n + p]).sum();
                let want = if i == j { 1.0 } else { 0.6 };
                assert!((v - want).abs() < 1e-14);
            }
        }
    }
}
