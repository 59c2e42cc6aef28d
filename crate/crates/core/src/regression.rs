//! The R² objective and the residual quantities derived from it.
//!
//! All functions take a target index into [`CovarianceModel::targets`] and a
//! set of variable indices. Index sets need not be sorted but must be free of
//! duplicates; out-of-range indices panic like slice indexing does.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CovarianceModel, Target};
use crate::numerics::{
    solve_spd, submatrix_unchecked, CholeskyPath, RealVector, SymMatrix, CHOLESKY_PIVOT_FLOOR, DEFAULT_REL_TOL,
};

/// Residual variances at or below this are treated as zero.
pub const DEGENERATE_VARIANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub subset: Vec<usize>,
    /// Regression coefficients, aligned with `subset`.
    pub coefficients: Vec<f64>,
    /// R², clamped to `[0, 1]`.
    pub r2: f64,
    /// `b_S^T alpha` before clamping.
    pub raw_r2: f64,
}

/// Coefficients `C_S^+ b_S` for the correlation matrix `c` and vector `b`.
pub(crate) fn coefficients(c: &SymMatrix, b: &[f64], s: &[usize]) -> Vec<f64> {
    if s.is_empty() {
        return Vec::new();
    }
    let cs = submatrix_unchecked(c, s);
    let bs: Vec<f64> = s.iter().map(|&i| b[i]).collect();
    solve_spd(&cs, &bs, DEFAULT_REL_TOL).expect("dimensions agree by construction")
}

pub(crate) fn raw_r2(c: &SymMatrix, b: &[f64], s: &[usize]) -> f64 {
    let alpha = coefficients(c, b, s);
    s.iter().zip(&alpha).map(|(&i, a)| b[i] * a).sum()
}

#[inline]
pub(crate) fn clamp_r2(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// R² of `c`/`b` on `s`, clamped.
pub(crate) fn r2(c: &SymMatrix, b: &[f64], s: &[usize]) -> f64 {
    clamp_r2(raw_r2(c, b, s))
}

/// Squared multiple correlation `b_S^T C_S^{-1} b_S` of target `target` on `s`.
pub fn r_squared(model: &CovarianceModel, target: usize, s: &[usize]) -> f64 {
    r2(model.c(), model.b(target), s)
}

pub fn fit(model: &CovarianceModel, target: usize, s: &[usize]) -> FitResult {
    let b = model.b(target);
    let coefficients = coefficients(model.c(), b, s);
    let raw: f64 = s.iter().zip(&coefficients).map(|(&i, a)| b[i] * a).sum();
    FitResult { subset: s.to_vec(), coefficients, r2: clamp_r2(raw), raw_r2: raw }
}

/// `Cov(Res(Z, S), X_j) = b_j - C_{j,S} C_S^{-1} b_S`.
pub fn residual_target_cov(model: &CovarianceModel, target: usize, s: &[usize], j: usize) -> f64 {
    let (c, b) = (model.c(), model.b(target));
    let alpha = coefficients(c, b, s);
    b[j] - s.iter().zip(&alpha).map(|(&i, a)| c.get(j, i) * a).sum::<f64>()
}

/// `Var(Res(Z, S)) = 1 - R²(Z, S)`, clamped to `[0, 1]`.
pub fn residual_variance(model: &CovarianceModel, target: usize, s: &[usize]) -> f64 {
    (1.0 - r_squared(model, target, s)).clamp(0.0, 1.0)
}

/// Normalized model of the residuals after conditioning on a set `L`.
#[derive(Debug, Clone)]
pub struct ResidualModel {
    /// Model over the kept variables, with a single target.
    pub model: CovarianceModel,
    /// Original index of each variable in `model`.
    pub kept: Vec<usize>,
    /// Variables outside `L` whose residual variance vanished.
    pub dropped: Vec<usize>,
    /// `Var(Res(Z, L))`.
    pub target_variance: f64,
}

/// Conditions every variable outside `l` and the target on `l`, then
/// renormalizes the residuals to unit variance.
pub fn residual_model(model: &CovarianceModel, target: usize, l: &[usize]) -> Result<ResidualModel> {
    let (c, b) = (model.c(), model.b(target));
    let n = model.n();
    let target_variance = residual_variance(model, target, l);
    if target_variance <= DEGENERATE_VARIANCE {
        return Err(Error::TargetExplained);
    }
    let outside: Vec<usize> = (0..n).filter(|i| !l.contains(i)).collect();

    // projections[i] = C_L^+ C_{L,i}
    let projections: Vec<Vec<f64>> = if l.is_empty() {
        vec![Vec::new(); n]
    } else {
        let cl = submatrix_unchecked(c, l);
        (0..n)
            .map(|i| {
                let col: Vec<f64> = l.iter().map(|&p| c.get(p, i)).collect();
                solve_spd(&cl, &col, DEFAULT_REL_TOL).expect("dimensions agree")
            })
            .collect()
    };
    let cross = |i: usize, j: usize| -> f64 {
        c.get(i, j) - l.iter().zip(&projections[j]).map(|(&p, a)| c.get(i, p) * a).sum::<f64>()
    };

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut sd = Vec::new();
    for &i in &outside {
        let v = cross(i, i);
        if v <= DEGENERATE_VARIANCE {
            dropped.push(i);
        } else {
            kept.push(i);
            sd.push(v.sqrt());
        }
    }
    if kept.is_empty() {
        return Err(Error::InvalidArgument("no variable has residual variance left".into()));
    }

    let k = kept.len();
    let mut data = vec![0.0; k * k];
    for a in 0..k {
        data[a * k + a] = 1.0;
        for bidx in (a + 1)..k {
            let v = (cross(kept[a], kept[bidx]) / (sd[a] * sd[bidx])).clamp(-1.0, 1.0);
            data[a * k + bidx] = v;
            data[bidx * k + a] = v;
        }
    }
    let alpha = coefficients(c, b, l);
    let z_sd = target_variance.sqrt();
    let bres: Vec<f64> = kept
        .iter()
        .zip(&sd)
        .map(|(&i, s)| {
            let cov = b[i] - l.iter().zip(&alpha).map(|(&p, a)| c.get(i, p) * a).sum::<f64>();
            (cov / (s * z_sd)).clamp(-1.0, 1.0)
        })
        .collect();

    let names = kept.iter().map(|&i| model.names()[i].clone()).collect();
    let target_name = format!("{}|resid", model.targets()[target].name);
    let residual = CovarianceModel::from_matrices(
        SymMatrix::from_row_major(k, data)?,
        vec![Target { name: target_name, b: RealVector::new(bres)? }],
    )?
    .with_names(names)?;
    Ok(ResidualModel { model: residual, kept, dropped, target_variance })
}

/// Matrix form of the ratio term for one `(L, S)` pair:
/// `b'_S . b'_S / (b'_S^T C'_S^{-1} b'_S)` on the residual model.
pub fn residual_ratio(model: &CovarianceModel, target: usize, l: &[usize], s: &[usize]) -> Result<f64> {
    let res = residual_model(model, target, l)?;
    let pos: Vec<usize> = s
        .iter()
        .map(|i| {
            res.kept
                .iter()
                .position(|k| k == i)
                .ok_or_else(|| Error::InvalidArgument(format!("variable {i} is degenerate or in L")))
        })
        .collect::<Result<_>>()?;
    let b = res.model.b(0);
    let num: f64 = pos.iter().map(|&p| b[p] * b[p]).sum();
    Ok(num / raw_r2(res.model.c(), b, &pos))
}

/// Gains `R²(L + i) - R²(L)` for every `i`, zero for members of `l`.
pub(crate) fn single_gains(c: &SymMatrix, b: &[f64], l: &[usize]) -> (f64, Vec<f64>) {
    let base = r2(c, b, l);
    let mut buf = l.to_vec();
    let gains = (0..c.dim())
        .map(|i| {
            if l.contains(&i) {
                0.0
            } else {
                buf.push(i);
                let g = r2(c, b, &buf) - base;
                buf.pop();
                g
            }
        })
        .collect();
    (base, gains)
}

/// R² of a growing set, kept in an incremental Cholesky factor. Falls back to
/// the pseudo-inverse route once the set turns (near-)singular.
#[derive(Debug, Clone)]
pub(crate) struct IncrementalR2<'a> {
    c: &'a SymMatrix,
    b: &'a [f64],
    path: CholeskyPath,
    members: Vec<usize>,
    factored: bool,
    value: f64,
}

impl<'a> IncrementalR2<'a> {
    pub(crate) fn new(c: &'a SymMatrix, b: &'a [f64]) -> Self {
        IncrementalR2 { c, b, path: CholeskyPath::new(), members: Vec::new(), factored: true, value: 0.0 }
    }

    /// Clamped R² of the current members.
    pub(crate) fn value(&self) -> f64 {
        self.value
    }

    /// Clamped R² of the members plus `j`, leaving the state unchanged.
    pub(crate) fn value_with(&mut self, j: usize) -> f64 {
        if self.factored && self.path.push(self.c, Some(self.b), j, CHOLESKY_PIVOT_FLOOR).is_some() {
            let v = clamp_r2(self.path.quad_form());
            self.path.pop();
            return v;
        }
        self.members.push(j);
        let v = r2(self.c, self.b, &self.members);
        self.members.pop();
        v
    }

    pub(crate) fn add(&mut self, j: usize) {
        self.members.push(j);
        if self.factored && self.path.push(self.c, Some(self.b), j, CHOLESKY_PIVOT_FLOOR).is_some() {
            self.value = clamp_r2(self.path.quad_form());
        } else {
            self.factored = false;
            self.value = r2(self.c, self.b, &self.members);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{independent, reference_three, suppressor_pair};
    use crate::numerics::SymMatrix;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn r_squared_examples() {
        let m = reference_three();
        assert_eq!(r_squared(&m, 0, &[]), 0.0);
        close(r_squared(&m, 0, &[0]), 0.36, 1e-15);
        close(r_squared(&m, 0, &[0, 1]), 31.0 / 75.0, 1e-14);
        close(r_squared(&m, 0, &[0, 2]), 0.52, 1e-14);
        close(r_squared(&m, 0, &[0, 1, 2]), 43.0 / 75.0, 1e-14);
        let d = independent(&[0.3, -0.2]).unwrap();
        close(r_squared(&d, 0, &[1]), 0.04, 1e-15);
    }

    #[test]
    fn fit_examples() {
        let d = independent(&[0.3, -0.2, 0.1]).unwrap();
        let f = fit(&d, 0, &[0, 1, 2]);
        for (a, b) in f.coefficients.iter().zip([0.3, -0.2, 0.1]) {
            close(*a, b, 1e-15);
        }
        let f = fit(&reference_three(), 0, &[0, 1]);
        close(f.coefficients[0], 7.0 / 15.0, 1e-14);
        close(f.coefficients[1], 4.0 / 15.0, 1e-14);
        close(f.r2, f.raw_r2, 0.0);

        // exact duplicate: minimum-norm split
        let c = SymMatrix::from_rows(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 1.0]]).unwrap();
        let m = CovarianceModel::from_matrices(
            c,
            vec![Target { name: "z".into(), b: RealVector::new(vec![0.1, 0.6, 0.6]).unwrap() }],
        )
        .unwrap();
        let f = fit(&m, 0, &[1, 2]);
        close(f.coefficients[0], 0.3, 1e-10);
        close(f.coefficients[1], 0.3, 1e-10);
        close(f.r2, 0.36, 1e-10);
    }

    #[test]
    fn residual_cov_examples() {
        let m = reference_three();
        close(residual_target_cov(&m, 0, &[], 1), 0.5, 0.0);
        close(residual_target_cov(&m, 0, &[0], 1), 0.2, 1e-15);
        close(residual_target_cov(&m, 0, &[0], 2), 0.4, 1e-15);

        // Z identical to X_0
        let c = SymMatrix::from_rows(vec![vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let m = CovarianceModel::from_matrices(
            c,
            vec![Target { name: "z".into(), b: RealVector::new(vec![1.0, 0.3]).unwrap() }],
        )
        .unwrap();
        close(residual_target_cov(&m, 0, &[0], 1), 0.0, 1e-15);
        close(residual_variance(&m, 0, &[0]), 0.0, 1e-15);
    }

    #[test]
    fn residual_variance_examples() {
        let m = reference_three();
        assert_eq!(residual_variance(&m, 0, &[]), 1.0);
        close(residual_variance(&m, 0, &[0, 2]), 0.48, 1e-14);
    }

    #[test]
    fn residual_model_examples() {
        let m = reference_three();
        let r = residual_model(&m, 0, &[]).unwrap();
        assert_eq!(r.kept, vec![0, 1, 2]);
        assert_eq!(r.model.c(), m.c());
        assert_eq!(r.model.b(0), m.b(0));

        let r = residual_model(&m, 0, &[0]).unwrap();
        assert_eq!(r.kept, vec![1, 2]);
        close(r.model.c().get(0, 1), 0.0, 1e-15);
        close(r.model.b(0)[0], 0.2 / (0.75f64.sqrt() * 0.8), 1e-14);
        close(r.model.b(0)[1], 0.4 / 0.8, 1e-14);

        let d = independent(&[0.3, 0.2, 0.1]).unwrap();
        let r = residual_model(&d, 0, &[1]).unwrap();
        assert_eq!(r.model.c(), &SymMatrix::identity(2));
        let scale = (1.0 - 0.04f64).sqrt();
        close(r.model.b(0)[0], 0.3 / scale, 1e-15);
    }

    #[test]
    fn residual_model_explained_target() {
        let c = SymMatrix::from_rows(vec![vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let m = CovarianceModel::from_matrices(
            c,
            vec![Target { name: "z".into(), b: RealVector::new(vec![1.0, 0.3]).unwrap() }],
        )
        .unwrap();
        assert!(matches!(residual_model(&m, 0, &[0]), Err(Error::TargetExplained)));
    }

    #[test]
    fn residual_ratio_suppressor() {
        let m = suppressor_pair();
        close(residual_ratio(&m, 0, &[], &[0, 1]).unwrap(), 0.75, 1e-14);
    }
}
