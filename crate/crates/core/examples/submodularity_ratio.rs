//! The submodularity ratio of R² in exact, pruned and sampled form, and its
//! matrix form on the residual model.

use greedy_subset::instances::{reference_three, suppressor_pair};
use greedy_subset::regression::{residual_model, residual_ratio};
use greedy_subset::selection::forward_regression;
use greedy_subset::submodularity::{ratio_exact, ratio_pruned, ratio_sampled, DEFAULT_PRUNE_EPS};
use greedy_subset::subsets::DEFAULT_ENUMERATION_CAP as CAP;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // X_1 is uncorrelated with the target but sharpens X_0: R² is not
    // submodular here and the ratio drops below 1.
    let pair = suppressor_pair();
    let exact = ratio_exact(&pair, 0, &[], 2, CAP)?;
    println!("suppressor pair, U = {{}}, k = 2:\n{}", serde_json::to_string_pretty(&exact)?);
    let w = exact.witness.as_ref().expect("a pair was evaluated");
    println!("matrix form at the witness: {:.6}", residual_ratio(&pair, 0, &w.l, &w.s)?);

    let model = reference_three();
    let k = 2;
    let fr = forward_regression(&model, 0, k);
    println!("\nreference model, U = FR order {:?}", fr.order);
    for report in [
        ratio_exact(&model, 0, &fr.order, k, CAP)?,
        ratio_pruned(&model, 0, &fr.order, k, DEFAULT_PRUNE_EPS, CAP)?,
        ratio_sampled(&model, 0, &fr.order, k, 500, 7)?,
    ] {
        println!(
            "{:?}: gamma {:.6}, evaluated {}, skipped {}",
            report.mode, report.gamma, report.evaluated_pairs, report.skipped_pairs
        );
    }

    let res = residual_model(&model, 0, &[0])?;
    println!("\nafter conditioning on X_0 the target keeps variance {:.4}", res.target_variance);
    println!("residual model:\n{}", res.model.to_json_string()?);
    Ok(())
}
