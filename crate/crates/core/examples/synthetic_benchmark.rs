//! Equicorrelated Gaussian benchmark: generate a few runs, fit every method
//! for k = 1..6 and average the R² curves.
//!
//! Usage: `cargo run --release --example synthetic_benchmark [runs]`

use greedy_subset::model::{CovarianceModel, SyntheticSpec};
use greedy_subset::selection::{exhaustive_opt, forward_regression, oblivious, omp};
use greedy_subset::subsets::DEFAULT_ENUMERATION_CAP as CAP;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let runs = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3);
    let spec = SyntheticSpec { runs, seed: 42, ..SyntheticSpec::default() };
    let k_max = 6;
    let mut sums = vec![[0.0f64; 4]; k_max];
    for run in 0..spec.runs {
        let table = spec.generate_run(run)?;
        let model = CovarianceModel::from_samples(&table, &["z"])?;
        for k in 1..=k_max {
            let row = &mut sums[k - 1];
            row[0] += forward_regression(&model, 0, k).r2;
            row[1] += omp(&model, 0, k).r2;
            row[2] += oblivious(&model, 0, k).r2;
            row[3] += exhaustive_opt(&model, 0, k, CAP)?.r2;
        }
    }
    println!("mean R² over {} runs (n = {}, m = {}, rho = {})", spec.runs, spec.n, spec.m, spec.rho);
    println!("k,fr,omp,obl,opt");
    for (i, row) in sums.iter().enumerate() {
        let m: Vec<String> = row.iter().map(|s| format!("{:.5}", s / spec.runs as f64)).collect();
        println!("{},{}", i + 1, m.join(","));
    }
    Ok(())
}
