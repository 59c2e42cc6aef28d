//! Ingest a CSV, standardize it into a correlation model and run the method
//! comparison plus the pruned submodularity ratio per budget.
//!
//! Usage: `cargo run --release --example boston_housing [path.csv] [target]`
//! (defaults to the bundled Boston Housing table and `MEDV`).

use std::path::PathBuf;

use greedy_subset::model::{CovarianceModel, SampleTable};
use greedy_subset::selection::{exhaustive_opt, forward_regression, oblivious, omp};
use greedy_subset::submodularity::{ratio_pruned, DEFAULT_PRUNE_EPS};
use greedy_subset::subsets::DEFAULT_ENUMERATION_CAP as CAP;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/boston.csv"));
    let target = args.next().unwrap_or_else(|| "MEDV".into());

    let table = SampleTable::from_csv_path(&path)?;
    let model = CovarianceModel::from_samples(&table, &[&target])?;
    println!("{}: {} rows, {} predictors, target {target}", path.display(), table.rows(), model.n());

    println!("{:>2} {:>8} {:>8} {:>8} {:>8} {:>8}  FR picks", "k", "FR", "OMP", "OBL", "OPT", "gamma");
    for k in 2..=8.min(model.n()) {
        let fr = forward_regression(&model, 0, k);
        let opt = exhaustive_opt(&model, 0, k, CAP)?;
        let gamma = ratio_pruned(&model, 0, &fr.order, k, DEFAULT_PRUNE_EPS, CAP)?.gamma;
        let picks: Vec<&str> = fr.order.iter().map(|&i| model.names()[i].as_str()).collect();
        println!(
            "{k:>2} {:>8.5} {:>8.5} {:>8.5} {:>8.5} {gamma:>8.4}  {}",
            fr.r2,
            omp(&model, 0, k).r2,
            oblivious(&model, 0, k).r2,
            opt.r2,
            picks.join(" ")
        );
    }
    Ok(())
}
