use std::process::ExitCode;

use clap::Parser;
use greedy_subset::cli::{exit_code, run, threads_from_env, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("gsel: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("gsel: cannot configure {t} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("gsel: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
