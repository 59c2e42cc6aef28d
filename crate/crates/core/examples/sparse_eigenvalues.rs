//! Sparse eigenvalues, condition numbers and coherence of an equicorrelated
//! design, with the interlacing sandwich and the eigenvector-overlap lower
//! bound that stands in when enumeration is out of budget.

use greedy_subset::model::{CovarianceModel, Target};
use greedy_subset::numerics::{RealVector, SymMatrix};
use greedy_subset::spectral::{coherence, lower_bound_via_beta, sparse_eig, sparse_eig_or_bound};
use greedy_subset::subsets::DEFAULT_ENUMERATION_CAP as CAP;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 12;
    let c = SymMatrix::equicorrelated(n, 0.6)?;
    let b = RealVector::new((0..n).map(|i| 0.1 + 0.05 * i as f64).collect())?;
    let model = CovarianceModel::from_matrices(c, vec![Target { name: "z".into(), b }])?;

    println!("coherence {:.3}", coherence(&model)?);
    println!("{:>2} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}", "k", "lam_min", "lam_max", "1/kappa", "lower", "upper", "beta lb");
    for k in 1..=6 {
        let r = sparse_eig(&model, k, CAP)?;
        let beta = lower_bound_via_beta(&model, k, 2, 0.1)?;
        println!(
            "{k:>2} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>9.5}",
            r.lam_min_k,
            r.lam_max_k,
            1.0 / r.kappa_k,
            r.interlace_lower,
            r.interlace_upper,
            beta.lower_bound
        );
    }

    // a tiny cap forces the bound-only fallback
    let bound = sparse_eig_or_bound(&model, 6, 10)?;
    println!("\nover budget: {}", serde_json::to_string(&bound)?);
    Ok(())
}
