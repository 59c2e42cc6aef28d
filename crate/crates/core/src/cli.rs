//! Command-line front end behind the `gsel` binary.
//!
//! Every subcommand writes a canonical JSON report plus a plot-ready CSV into
//! `--out-dir`. Outputs only depend on inputs and flags, never on timing or
//! thread count, so reruns are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::diagnostics::{diagnose, ratio_mode_tag, DiagOptions, DiagnosticsRow, RatioKind};
use crate::dictionary::{exhaustive_dict_opt, sds_ma, sds_omp, DictionaryProblem, DictionaryResult};
use crate::error::{Error, Result};
use crate::model::{CovarianceModel, SampleTable, SyntheticSpec};
use crate::selection::{exhaustive_opt, forward_regression, oblivious, omp, SelectionResult};
use crate::spectral::EigMode;
use crate::submodularity::DEFAULT_PRUNE_EPS;
use crate::subsets::DEFAULT_ENUMERATION_CAP;

/// Exit code for validation and usage errors.
pub const EXIT_INVALID: i32 = 2;
/// Exit code when an enumeration cap is hit and no fallback applies.
pub const EXIT_CAPPED: i32 = 3;

/// Worker count from `GS_THREADS`; `0` or unset means automatic.
pub const THREADS_ENV: &str = "GS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "gsel", version, about = "Greedy subset and dictionary selection with spectral diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run FR, OMP, Oblivious and the exhaustive optimum over a range of k.
    Fit(FitArgs),
    /// Submodularity ratio and sparse eigenvalue diagnostics per k.
    Diag(DiagArgs),
    /// Select a shared dictionary for several targets.
    Dict(DictArgs),
    /// Generate the equicorrelated Gaussian benchmark and average R² curves.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// CSV file with a header row; targets are picked by column name.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub input: Option<PathBuf>,
    /// JSON correlation model (`C`, `targets`, optional `names`).
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct KRange {
    #[arg(long, default_value_t = 2)]
    pub k_min: usize,
    #[arg(long, default_value_t = 8)]
    pub k_max: usize,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Target column (CSV) or target name (model). Defaults to the first
    /// target of a model file.
    #[arg(long)]
    pub target: Option<String>,
    #[command(flatten)]
    pub range: KRange,
    /// Largest number of subsets the exhaustive optimum may enumerate.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub cap: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DiagArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub target: Option<String>,
    #[command(flatten)]
    pub range: KRange,
    #[arg(long, value_enum, default_value_t = RatioKind::Exact)]
    pub ratio: RatioKind,
    /// Pruning threshold for `--ratio pruned`.
    #[arg(long, default_value_t = DEFAULT_PRUNE_EPS)]
    pub eps: f64,
    /// Samples for `--ratio sampled` and for the over-cap fallback.
    #[arg(long, default_value_t = 20_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub cap: u64,
    /// Abort with exit code 3 instead of falling back when over the cap.
    #[arg(long)]
    pub strict_cap: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DictAlgo {
    Sdsma,
    Sdsomp,
    Opt,
}

#[derive(Debug, Clone, Args)]
pub struct DictArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Comma-separated target columns or names. Defaults to every target of
    /// a model file.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<String>,
    /// Dictionary size.
    #[arg(short = 'd', long = "dict-size")]
    pub d: usize,
    /// Variables per target.
    #[arg(short = 'k', long = "k")]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = DictAlgo::Sdsma)]
    pub algo: DictAlgo,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub cap: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 29)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    #[arg(long, default_value_t = 0.6)]
    pub rho: f64,
    #[arg(long, default_value_t = 10.0)]
    pub coef_max: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise_var: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    #[command(flatten)]
    pub range: KRange,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub cap: u64,
    /// Only generate the tables.
    #[arg(long)]
    pub no_fit: bool,
    /// Also compute the diagnostics suite for every run.
    #[arg(long)]
    pub diag: bool,
    #[arg(long, value_enum, default_value_t = RatioKind::Exact)]
    pub ratio: RatioKind,
    /// Write each generated table to `tables/run_NNN.csv`.
    #[arg(long)]
    pub write_tables: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Files written by a subcommand and a short text summary for the terminal.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Budget { .. } => EXIT_CAPPED,
        _ => EXIT_INVALID,
    }
}

/// Reads `GS_THREADS`; `None` means let the pool decide.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(t) => Ok(Some(t)),
            Err(_) => Err(Error::InvalidArgument(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))),
        },
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Diag(a) => cmd_diag(&a),
        Command::Dict(a) => cmd_dict(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Fingerprint {
    pub sha256: String,
    pub n: usize,
    /// Sample count; absent for model files.
    pub m: Option<usize>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Loaded {
    model: CovarianceModel,
    fingerprint: Fingerprint,
}

fn load(input: &InputArgs, targets: &[String]) -> Result<Loaded> {
    let labels: Vec<&str> = targets.iter().map(String::as_str).collect();
    if let Some(path) = &input.input {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("a target column is required with --input".into()));
        }
        let bytes = read_bytes(path)?;
        let table = SampleTable::from_csv_reader(bytes.as_slice())?;
        let model = CovarianceModel::from_samples(&table, &labels)?;
        let fingerprint = Fingerprint { sha256: sha256_hex(&bytes), n: model.n(), m: Some(table.rows()) };
        return Ok(Loaded { model, fingerprint });
    }
    let path = input.model.as_ref().expect("clap requires --input or --model");
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|e| Error::InvalidArgument(format!("{}: not UTF-8: {e}", path.display())))?;
    let mut model = CovarianceModel::from_json_str(&text)?;
    if !labels.is_empty() {
        model = model.select_targets(&labels)?;
    }
    let fingerprint = Fingerprint { sha256: sha256_hex(&bytes), n: model.n(), m: None };
    Ok(Loaded { model, fingerprint })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn single_target(args_target: &Option<String>) -> Vec<String> {
    args_target.iter().cloned().collect()
}

fn check_range(range: &KRange, n: usize) -> Result<()> {
    if range.k_min == 0 || range.k_min > range.k_max || range.k_max > n {
        return Err(Error::InvalidArgument(format!(
            "k range {}..={} must satisfy 1 <= k-min <= k-max <= n = {n}",
            range.k_min, range.k_max
        )));
    }
    Ok(())
}

fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    files
        .iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
            Ok(path)
        })
        .collect()
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Formats a float for CSV output; non-finite values get readable markers.
fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// A report cell holding either a value or an explicit marker such as
/// `"capped"`.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Cell<T> {
    Value(T),
    Marker(&'static str),
}

pub const CAPPED: &str = "capped";

#[derive(Debug, Clone, Serialize)]
pub struct FitRow {
    pub k: usize,
    pub fr: SelectionResult,
    pub omp: SelectionResult,
    pub obl: SelectionResult,
    pub opt: Cell<SelectionResult>,
}

fn fit_rows(model: &CovarianceModel, target: usize, range: &KRange, cap: u64) -> Result<Vec<FitRow>> {
    (range.k_min..=range.k_max)
        .map(|k| {
            let opt = match exhaustive_opt(model, target, k, cap) {
                Ok(r) => Cell::Value(r),
                Err(Error::Budget { .. }) => Cell::Marker(CAPPED),
                Err(e) => return Err(e),
            };
            Ok(FitRow {
                k,
                fr: forward_regression(model, target, k),
                omp: omp(model, target, k),
                obl: oblivious(model, target, k),
                opt,
            })
        })
        .collect()
}

fn fit_csv(rows: &[FitRow]) -> String {
    let mut out = String::from("k,fr,omp,obl,opt\n");
    for r in rows {
        let opt = match &r.opt {
            Cell::Value(o) => num(o.r2),
            Cell::Marker(m) => (*m).to_string(),
        };
        let _ = writeln!(out, "{},{},{},{},{}", r.k, num(r.fr.r2), num(r.omp.r2), num(r.obl.r2), opt);
    }
    out
}

#[derive(Serialize)]
struct FitReport<'a> {
    command: &'static str,
    input: &'a Fingerprint,
    variables: &'a [String],
    target: &'a str,
    config: FitConfig,
    rows: &'a [FitRow],
}

#[derive(Serialize)]
struct FitConfig {
    k_min: usize,
    k_max: usize,
    cap: u64,
}

pub fn cmd_fit(args: &FitArgs) -> Result<Outcome> {
    let loaded = load(&args.input, &single_target(&args.target))?;
    let model = &loaded.model;
    check_range(&args.range, model.n())?;
    let rows = fit_rows(model, 0, &args.range, args.cap)?;
    let csv = fit_csv(&rows);
    let report = FitReport {
        command: "fit",
        input: &loaded.fingerprint,
        variables: model.names(),
        target: &model.targets()[0].name,
        config: FitConfig { k_min: args.range.k_min, k_max: args.range.k_max, cap: args.cap },
        rows: &rows,
    };
    let files = write_outputs(&args.out_dir, &[("fit_report.json", to_json(&report)?), ("r2_vs_k.csv", csv.clone())])?;
    Ok(Outcome { files, summary: csv })
}

fn diag_csv(rows: &[DiagnosticsRow]) -> String {
    let mut out =
        String::from("k,gamma,gamma_mode,lam_min_k,lam_min_k_mode,lam_min_2k,lam_min_2k_mode,inv_kappa_k,lam_min,coherence\n");
    let tag = |m: EigMode| match m {
        EigMode::Exact => "exact",
        EigMode::BoundOnly => "bound-only",
    };
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.k,
            num(r.ratio.gamma),
            ratio_mode_tag(&r.ratio.mode),
            num(r.lam_min_k),
            tag(r.lam_min_k_mode),
            num(r.lam_min_2k),
            tag(r.lam_min_2k_mode),
            num(r.inv_kappa_k),
            num(r.lam_min),
            r.coherence.map_or_else(|| "skipped".to_string(), num),
        );
    }
    out
}

#[derive(Serialize)]
struct DiagReport<'a> {
    command: &'static str,
    input: &'a Fingerprint,
    variables: &'a [String],
    target: &'a str,
    config: DiagConfig,
    rows: &'a [DiagnosticsRow],
}

#[derive(Serialize)]
struct DiagConfig {
    k_min: usize,
    k_max: usize,
    options: DiagOptions,
}

pub fn cmd_diag(args: &DiagArgs) -> Result<Outcome> {
    let loaded = load(&args.input, &single_target(&args.target))?;
    let model = &loaded.model;
    check_range(&args.range, model.n())?;
    let opts = DiagOptions {
        ratio: args.ratio,
        eps: args.eps,
        trials: args.trials,
        seed: args.seed,
        cap: args.cap,
        strict_cap: args.strict_cap,
    };
    let rows: Vec<DiagnosticsRow> =
        (args.range.k_min..=args.range.k_max).map(|k| diagnose(model, 0, k, &opts)).collect::<Result<_>>()?;
    let csv = diag_csv(&rows);
    let report = DiagReport {
        command: "diag",
        input: &loaded.fingerprint,
        variables: model.names(),
        target: &model.targets()[0].name,
        config: DiagConfig { k_min: args.range.k_min, k_max: args.range.k_max, options: opts },
        rows: &rows,
    };
    let files =
        write_outputs(&args.out_dir, &[("diag_report.json", to_json(&report)?), ("diagnostics.csv", csv.clone())])?;
    Ok(Outcome { files, summary: csv })
}

#[derive(Serialize)]
struct DictReport<'a> {
    command: &'static str,
    input: &'a Fingerprint,
    variables: &'a [String],
    config: DictConfig,
    result: &'a DictionaryResult,
}

#[derive(Serialize)]
struct DictConfig {
    d: usize,
    k: usize,
    cap: u64,
}

fn join_indices(s: &[usize]) -> String {
    s.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn cmd_dict(args: &DictArgs) -> Result<Outcome> {
    let loaded = load(&args.input, &args.targets)?;
    let model = &loaded.model;
    let problem = DictionaryProblem::new(model, args.d, args.k)?;
    let result = match args.algo {
        DictAlgo::Sdsma => sds_ma(&problem),
        DictAlgo::Sdsomp => sds_omp(&problem),
        DictAlgo::Opt => exhaustive_dict_opt(&problem, args.cap)?,
    };
    let mut csv = String::from("target,subset,r2\n");
    for t in &result.per_target {
        let _ = writeln!(csv, "{},{},{}", t.target, join_indices(&t.subset), num(t.r2));
    }
    let report = DictReport {
        command: "dict",
        input: &loaded.fingerprint,
        variables: model.names(),
        config: DictConfig { d: args.d, k: args.k, cap: args.cap },
        result: &result,
    };
    let summary = format!(
        "{} dictionary [{}]  F={}  F_hat={}  F_omp={}\n{csv}",
        result.algorithm,
        join_indices(&result.dictionary),
        num(result.f),
        num(result.f_hat),
        num(result.f_omp)
    );
    let files = write_outputs(&args.out_dir, &[("dict_report.json", to_json(&report)?), ("dict.csv", csv)])?;
    Ok(Outcome { files, summary })
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthRun {
    pub run: usize,
    pub table_sha256: String,
    pub fit: Vec<FitRow>,
    pub diagnostics: Vec<DiagnosticsRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanRow {
    pub k: usize,
    pub fr: f64,
    pub omp: f64,
    pub obl: f64,
    pub opt: Cell<f64>,
}

/// Across-run mean R² per `k`; OPT is `capped` if any run was.
pub fn mean_rows(runs: &[SynthRun]) -> Vec<MeanRow> {
    let Some(first) = runs.first() else { return Vec::new() };
    let count = runs.len() as f64;
    (0..first.fit.len())
        .map(|i| {
            let mean = |f: &dyn Fn(&FitRow) -> f64| runs.iter().map(|r| f(&r.fit[i])).sum::<f64>() / count;
            let opt_values: Option<Vec<f64>> = runs
                .iter()
                .map(|r| match &r.fit[i].opt {
                    Cell::Value(o) => Some(o.r2),
                    Cell::Marker(_) => None,
                })
                .collect();
            MeanRow {
                k: first.fit[i].k,
                fr: mean(&|r| r.fr.r2),
                omp: mean(&|r| r.omp.r2),
                obl: mean(&|r| r.obl.r2),
                opt: match opt_values {
                    Some(v) => Cell::Value(v.iter().sum::<f64>() / count),
                    None => Cell::Marker(CAPPED),
                },
            }
        })
        .collect()
}

#[derive(Serialize)]
struct SynthReport<'a> {
    command: &'static str,
    spec: &'a SyntheticSpec,
    config: SynthConfig,
    means: &'a [MeanRow],
    runs: &'a [SynthRun],
}

#[derive(Serialize)]
struct SynthConfig {
    k_min: usize,
    k_max: usize,
    cap: u64,
    fit: bool,
    diag: Option<DiagOptions>,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<Outcome> {
    let spec = SyntheticSpec {
        n: args.n,
        m: args.m,
        rho: args.rho,
        coef_max: args.coef_max,
        noise_var: args.noise_var,
        seed: args.seed,
        runs: args.runs,
    };
    spec.validate()?;
    let fit = !args.no_fit;
    if fit {
        check_range(&args.range, spec.n)?;
    }
    let diag_opts = args.diag.then(|| DiagOptions { ratio: args.ratio, cap: args.cap, ..DiagOptions::default() });
    let per_run: Vec<(SynthRun, String)> = (0..spec.runs)
        .into_par_iter()
        .map(|run| {
            let table = spec.generate_run(run)?;
            let csv = table.to_csv_string();
            let mut out = SynthRun { run, table_sha256: sha256_hex(csv.as_bytes()), fit: Vec::new(), diagnostics: Vec::new() };
            if fit || diag_opts.is_some() {
                let model = CovarianceModel::from_samples(&table, &["z"])?;
                if fit {
                    out.fit = fit_rows(&model, 0, &args.range, args.cap)?;
                }
                if let Some(opts) = &diag_opts {
                    out.diagnostics = (args.range.k_min..=args.range.k_max)
                        .map(|k| diagnose(&model, 0, k, opts))
                        .collect::<Result<_>>()?;
                }
            }
            Ok((out, csv))
        })
        .collect::<Result<_>>()?;
    let (runs, tables): (Vec<SynthRun>, Vec<String>) = per_run.into_iter().unzip();
    let means = mean_rows(&runs);
    let mut csv = String::from("k,fr,omp,obl,opt\n");
    for r in &means {
        let opt = match &r.opt {
            Cell::Value(v) => num(*v),
            Cell::Marker(m) => (*m).to_string(),
        };
        let _ = writeln!(csv, "{},{},{},{},{}", r.k, num(r.fr), num(r.omp), num(r.obl), opt);
    }
    let report = SynthReport {
        command: "synth",
        spec: &spec,
        config: SynthConfig { k_min: args.range.k_min, k_max: args.range.k_max, cap: args.cap, fit, diag: diag_opts },
        means: &means,
        runs: &runs,
    };
    let mut outputs = vec![("synth_report.json".to_string(), to_json(&report)?), ("synth_mean_r2.csv".to_string(), csv.clone())];
    if args.write_tables {
        for (i, t) in tables.into_iter().enumerate() {
            outputs.push((format!("tables/run_{i:03}.csv"), t));
        }
        fs::create_dir_all(args.out_dir.join("tables"))
            .map_err(|e| Error::io(format!("creating {}", args.out_dir.join("tables").display()), e))?;
    }
    let borrowed: Vec<(&str, String)> = outputs.iter().map(|(n, b)| (n.as_str(), b.clone())).collect();
    let files = write_outputs(&args.out_dir, &borrowed)?;
    Ok(Outcome { files, summary: csv })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_subcommands() {
        let cli = Cli::try_parse_from(["gsel", "fit", "--input", "x.csv", "--target", "MEDV", "--k-min", "2"]).unwrap();
        assert!(matches!(cli.command, Command::Fit(FitArgs { range: KRange { k_min: 2, k_max: 8 }, .. })));
        let cli = Cli::try_parse_from(["gsel", "dict", "--model", "m.json", "--targets", "z1,z2", "-d", "3", "-k", "2"])
            .unwrap();
        match cli.command {
            Command::Dict(a) => {
                assert_eq!(a.targets, vec!["z1", "z2"]);
                assert_eq!((a.d, a.k, a.algo), (3, 2, DictAlgo::Sdsma));
            }
            _ => panic!("expected dict"),
        }
        assert!(Cli::try_parse_from(["gsel", "dict", "--model", "m.json", "-d", "3", "-k", "2", "--algo", "nope"]).is_err());
        assert!(Cli::try_parse_from(["gsel", "fit", "--input", "a", "--model", "b"]).is_err());
        assert!(Cli::try_parse_from(["gsel", "fit"]).is_err());
    }

    #[test]
    fn csv_numbers() {
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(1.0), "1");
    }
}
