//! Three variables, two of them correlated: the greedy methods find the
//! optimal pair while ranking by individual correlation does not.

use greedy_subset::instances::reference_three;
use greedy_subset::regression::{fit, r_squared};
use greedy_subset::selection::{exhaustive_opt, forward_regression, oblivious, omp};
use greedy_subset::subsets::DEFAULT_ENUMERATION_CAP;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = reference_three();
    println!("model:\n{}", model.to_json_string()?);

    for s in [vec![0], vec![0, 1], vec![0, 2], vec![0, 1, 2]] {
        println!("R²({s:?}) = {:.6}", r_squared(&model, 0, &s));
    }
    let f = fit(&model, 0, &[0, 1]);
    println!("regression on {{0, 1}}: coefficients {:?}", f.coefficients);

    let k = 2;
    let results = [
        forward_regression(&model, 0, k),
        omp(&model, 0, k),
        oblivious(&model, 0, k),
        exhaustive_opt(&model, 0, k, DEFAULT_ENUMERATION_CAP)?,
    ];
    for r in &results {
        println!("{:>4}: order {:?}  gains {:?}  R² {:.6}", r.algorithm.to_string(), r.order, r.gains, r.r2);
    }
    Ok(())
}
