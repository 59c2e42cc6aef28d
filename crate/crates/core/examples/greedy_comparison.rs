//! Forward Regression, OMP and Oblivious against the exhaustive optimum on
//! random correlation models, together with the guarantees that tie each
//! greedy result to the optimum through the submodularity ratio and sparse
//! eigenvalues.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use greedy_subset::instances::{random_model, RandomModelOptions};
use greedy_subset::selection::{exhaustive_opt, forward_regression, oblivious, omp};
use greedy_subset::spectral::{sparse_eig_max, sparse_eig_min};
use greedy_subset::submodularity::ratio_exact;
use greedy_subset::subsets::DEFAULT_ENUMERATION_CAP as CAP;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    println!("{:>3} {:>2} {:>8} {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8}", "n", "k", "FR", "OMP", "OBL", "OPT", "FR lb", "OMP lb", "OBL lb");
    for trial in 0..8 {
        let n = 6 + trial % 4;
        let k = 2 + trial % 3;
        let model = random_model(&mut rng, RandomModelOptions { n, targets: 1, max_common: 2.0 });

        let fr = forward_regression(&model, 0, k);
        let om = omp(&model, 0, k);
        let ob = oblivious(&model, 0, k);
        let opt = exhaustive_opt(&model, 0, k, CAP)?;

        let gamma_fr = ratio_exact(&model, 0, &fr.order, k, CAP)?.gamma;
        let gamma_omp = ratio_exact(&model, 0, &om.order, k, CAP)?.gamma;
        let lam_2k = sparse_eig_min(&model, (2 * k).min(n), CAP)?.0;
        let lam_k = sparse_eig_min(&model, k, CAP)?.0;
        let lam_max_k = sparse_eig_max(&model, k, CAP)?.0;

        let fr_lb = (1.0 - (-gamma_fr).exp()) * opt.r2;
        let omp_lb = (1.0 - (-gamma_omp * lam_2k).exp()) * opt.r2;
        let obl_lb = lam_k / lam_max_k * opt.r2;
        println!(
            "{n:>3} {k:>2} {:>8.5} {:>8.5} {:>8.5} {:>8.5} | {fr_lb:>8.5} {omp_lb:>8.5} {obl_lb:>8.5}",
            fr.r2, om.r2, ob.r2, opt.r2
        );
    }
    Ok(())
}
