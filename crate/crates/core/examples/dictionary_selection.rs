//! Choosing one shared dictionary of variables for several targets, greedily
//! on the modular surrogate, greedily on the OMP objective, and exhaustively.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use greedy_subset::dictionary::{exhaustive_dict_opt, sds_ma, sds_omp, DictionaryProblem};
use greedy_subset::instances::{random_model, RandomModelOptions};
use greedy_subset::subsets::DEFAULT_ENUMERATION_CAP as CAP;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let model = random_model(&mut rng, RandomModelOptions { n: 10, targets: 3, max_common: 1.5 });
    let problem = DictionaryProblem::new(&model, 4, 2)?;

    for result in [sds_ma(&problem), sds_omp(&problem), exhaustive_dict_opt(&problem, CAP)?] {
        println!(
            "{:<8} D = {:?}  F = {:.5}  F_hat = {:.5}  F_omp = {:.5}",
            result.algorithm.to_string(),
            result.dictionary,
            result.f,
            result.f_hat,
            result.f_omp
        );
        for t in &result.per_target {
            println!("         {} uses {:?} (R² {:.5})", t.target, t.subset, t.r2);
        }
    }
    Ok(())
}
