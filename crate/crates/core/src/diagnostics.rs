//! Per-budget diagnostic suite: submodularity ratio around the Forward
//! Regression selection, sparse eigenvalues at `k` and `2k`, the inverse
//! sparse condition number, the smallest eigenvalue and the coherence.
//!
//! Quantities whose enumeration exceeds the cap fall back to a sampled ratio
//! or to bound-only eigenvalues, unless the options ask for a hard failure.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::CovarianceModel;
use crate::numerics::eigenvalues_sym;
use crate::selection::forward_regression;
use crate::spectral::{coherence, sparse_eig_or_bound, EigMode};
use crate::submodularity::{ratio_exact, ratio_pruned, ratio_sampled, RatioMode, RatioReport, DEFAULT_PRUNE_EPS};
use crate::subsets::{binomial, DEFAULT_ENUMERATION_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RatioKind {
    Exact,
    Pruned,
    Sampled,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiagOptions {
    pub ratio: RatioKind,
    pub eps: f64,
    /// Trials for the sampled ratio, also used when exact enumeration is
    /// over the cap.
    pub trials: u64,
    pub seed: u64,
    pub cap: u64,
    /// Fail with a budget error instead of falling back when over the cap.
    pub strict_cap: bool,
}

impl Default for DiagOptions {
    fn default() -> Self {
        DiagOptions {
            ratio: RatioKind::Exact,
            eps: DEFAULT_PRUNE_EPS,
            trials: 20_000,
            seed: 0,
            cap: DEFAULT_ENUMERATION_CAP,
            strict_cap: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub k: usize,
    /// Forward Regression order used as the conditioning set `U`.
    pub fr_order: Vec<usize>,
    pub ratio: RatioReport,
    pub lam_min_k: f64,
    pub lam_min_k_mode: EigMode,
    pub lam_min_2k: f64,
    pub lam_min_2k_mode: EigMode,
    /// `1 / kappa(C, k)`; a lower bound in bound-only mode.
    pub inv_kappa_k: f64,
    pub lam_min: f64,
    /// `None` for a single variable.
    pub coherence: Option<f64>,
}

fn over_cap(err: &Error) -> bool {
    matches!(err, Error::Budget { .. })
}

/// Ratio around `u` as requested, switching to sampling when enumeration is
/// over the cap.
pub fn ratio_with_fallback(
    model: &CovarianceModel,
    target: usize,
    u: &[usize],
    k: usize,
    opts: &DiagOptions,
) -> Result<RatioReport> {
    let attempt = match opts.ratio {
        RatioKind::Exact => ratio_exact(model, target, u, k, opts.cap),
        RatioKind::Pruned => ratio_pruned(model, target, u, k, opts.eps, opts.cap),
        RatioKind::Sampled => return ratio_sampled(model, target, u, k, opts.trials, opts.seed),
    };
    match attempt {
        Err(e) if over_cap(&e) && !opts.strict_cap => ratio_sampled(model, target, u, k, opts.trials, opts.seed),
        other => other,
    }
}

/// Diagnostics for budget `k` (clamped to `n` where a subset size is needed).
pub fn diagnose(model: &CovarianceModel, target: usize, k: usize, opts: &DiagOptions) -> Result<DiagnosticsRow> {
    let n = model.n();
    let fr = forward_regression(model, target, k);
    let ratio = ratio_with_fallback(model, target, &fr.order, k, opts)?;

    let k_eff = k.clamp(1, n);
    let two_k = (2 * k).clamp(1, n);
    let strict = |size: usize| -> Result<()> {
        if opts.strict_cap && binomial(n, size) > opts.cap as u128 {
            return Err(Error::Budget { n, k: size, count: binomial(n, size), cap: opts.cap });
        }
        Ok(())
    };
    strict(k_eff)?;
    strict(two_k)?;
    let at_k = sparse_eig_or_bound(model, k_eff, opts.cap)?;
    let at_2k = sparse_eig_or_bound(model, two_k, opts.cap)?;
    let lam_min = eigenvalues_sym(model.c())[0];
    let coherence = if n >= 2 { Some(coherence(model)?) } else { None };
    let inv_kappa_k = if at_k.kappa_k.is_finite() { 1.0 / at_k.kappa_k } else { 0.0 };
    Ok(DiagnosticsRow {
        k,
        fr_order: fr.order,
        ratio,
        lam_min_k: at_k.lam_min_k,
        lam_min_k_mode: at_k.mode,
        lam_min_2k: at_2k.lam_min_k,
        lam_min_2k_mode: at_2k.mode,
        inv_kappa_k,
        lam_min,
        coherence,
    })
}

/// Short tag for a ratio mode, as used in CSV output.
pub fn ratio_mode_tag(mode: &RatioMode) -> &'static str {
    match mode {
        RatioMode::Exact => "exact",
        RatioMode::Pruned { .. } => "pruned",
        RatioMode::Sampled { .. } => "sampled",
    }
}
