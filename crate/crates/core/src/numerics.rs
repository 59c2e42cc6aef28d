//! Dense symmetric linear algebra: Jacobi eigendecomposition, SPD solves with a
//! pseudo-inverse fallback, principal submatrices, and an incremental Cholesky
//! factor used by the subset enumerators.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative singularity tolerance (relative to the largest eigenvalue).
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// A Cholesky pivot at or below this fraction of the largest diagonal entry
/// sends [`solve_spd`] down the eigen pseudo-inverse route.
pub(crate) const CHOLESKY_PIVOT_FLOOR: f64 = 1e-7;

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds a symmetric matrix from rows, replacing each off-diagonal pair by
    /// its mean.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidMatrix("empty matrix".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(n, data)
    }

    pub fn from_row_major(dim: usize, mut data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for dimension {dim}, got {}",
                dim * dim,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite entry at ({}, {})",
                pos / dim,
                pos % dim
            )));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = 0.5 * (data[i * dim + j] + data[j * dim + i]);
                data[i * dim + j] = avg;
                data[j * dim + i] = avg;
            }
        }
        Ok(SymMatrix { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        SymMatrix { dim, data }
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            data[i * n + i] = *d;
        }
        Self::from_row_major(n, data)
    }

    /// Unit-diagonal matrix with every off-diagonal entry equal to `rho`.
    pub fn equicorrelated(dim: usize, rho: f64) -> Result<Self> {
        let mut data = vec![rho; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self::from_row_major(dim, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn max_abs_diag(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).abs()).fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SymMatrix::from_rows(rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

/// A vector of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RealVector(Vec<f64>);

impl RealVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!("non-finite vector entry at {pos}")));
        }
        Ok(RealVector(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for RealVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for RealVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        RealVector::new(values)
    }
}

impl From<RealVector> for Vec<f64> {
    fn from(v: RealVector) -> Self {
        v.0
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[i]` pairs with `eigenvalues[i]`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl EigDecomposition {
    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty decomposition")
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn eig_sym(m: &SymMatrix) -> Result<EigDecomposition> {
    let n = m.dim();
    if m.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite entries".into()));
    }
    let mut a = m.as_slice().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    jacobi_in_place(&mut a, n, Some(&mut v));

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x * n + x].total_cmp(&a[y * n + y]).then(x.cmp(&y)));
    let eigenvalues = order.iter().map(|&i| a[i * n + i]).collect();
    let eigenvectors = order
        .iter()
        .map(|&col| {
            let mut e: Vec<f64> = (0..n).map(|r| v[r * n + col]).collect();
            // sign convention: largest-magnitude component positive
            let lead = e
                .iter()
                .copied()
                .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if lead < 0.0 {
                e.iter_mut().for_each(|x| *x = -*x);
            }
            e
        })
        .collect();
    Ok(EigDecomposition { eigenvalues, eigenvectors })
}

/// Eigenvalues only, ascending. `scratch` is overwritten; it must hold the
/// row-major entries of the symmetric `n x n` matrix.
pub fn eigenvalues_in_place(scratch: &mut [f64], n: usize) -> Vec<f64> {
    jacobi_in_place(scratch, n, None);
    let mut vals: Vec<f64> = (0..n).map(|i| scratch[i * n + i]).collect();
    vals.sort_by(f64::total_cmp);
    vals
}

pub fn eigenvalues_sym(m: &SymMatrix) -> Vec<f64> {
    let mut a = m.as_slice().to_vec();
    eigenvalues_in_place(&mut a, m.dim())
}

/// (smallest, largest) eigenvalue of the principal submatrix on `idx`.
pub fn extreme_eigenvalues(m: &SymMatrix, idx: &[usize], scratch: &mut Vec<f64>) -> (f64, f64) {
    let k = idx.len();
    match k {
        0 => (0.0, 0.0),
        1 => {
            let d = m.get(idx[0], idx[0]);
            (d, d)
        }
        2 => {
            let (a, b, c) = (m.get(idx[0], idx[0]), m.get(idx[1], idx[1]), m.get(idx[0], idx[1]));
            let mean = 0.5 * (a + b);
            let rad = (0.25 * (a - b) * (a - b) + c * c).sqrt();
            (mean - rad, mean + rad)
        }
        _ => {
            scratch.clear();
            for &i in idx {
                scratch.extend(idx.iter().map(|&j| m.get(i, j)));
            }
            let vals = eigenvalues_in_place(scratch, k);
            (vals[0], vals[k - 1])
        }
    }
}

fn jacobi_in_place(a: &mut [f64], n: usize, mut v: Option<&mut [f64]>) {
    const MAX_SWEEPS: usize = 100;
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>();
    if frob == 0.0 {
        return;
    }
    for sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= 1e-32 * frob {
            return;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    a[r * n + p] = c * arp - s * arq;
                    a[r * n + q] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[p * n + r];
                    let aqr = a[q * n + r];
                    a[p * n + r] = c * apr - s * aqr;
                    a[q * n + r] = s * apr + c * aqr;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                if let Some(v) = v.as_deref_mut() {
                    for r in 0..n {
                        let vrp = v[r * n + p];
                        let vrq = v[r * n + q];
                        v[r * n + p] = c * vrp - s * vrq;
                        v[r * n + q] = s * vrp + c * vrq;
                    }
                }
            }
        }
    }
}

/// Solves `m x = rhs`. Well-conditioned systems go through Cholesky; when a
/// pivot collapses, the minimum-norm solution is formed from the eigenvectors
/// whose eigenvalues exceed `rel_tol * lambda_max`.
pub fn solve_spd(m: &SymMatrix, rhs: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let n = m.dim();
    if rhs.len() != n {
        return Err(Error::Dimension(format!(
            "matrix is {n}x{n} but right-hand side has length {}",
            rhs.len()
        )));
    }
    if let Some(x) = cholesky_solve(m.as_slice(), n, rhs) {
        return Ok(x);
    }
    pseudo_inverse_solve(m, rhs, rel_tol)
}

pub(crate) fn pseudo_inverse_solve(m: &SymMatrix, rhs: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let n = m.dim();
    let eig = eig_sym(m)?;
    let top = eig.max();
    let mut x = vec![0.0; n];
    if top <= 0.0 {
        return Ok(x);
    }
    for (lam, e) in eig.eigenvalues.iter().zip(&eig.eigenvectors) {
        if *lam > rel_tol * top {
            let coef = dot(e, rhs) / lam;
            x.iter_mut().zip(e).for_each(|(xi, ei)| *xi += coef * ei);
        }
    }
    Ok(x)
}

/// Cholesky solve of a row-major SPD system; `None` if some pivot falls below
/// the floor.
fn cholesky_solve(a: &[f64], n: usize, rhs: &[f64]) -> Option<Vec<f64>> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let floor = CHOLESKY_PIVOT_FLOOR * scale;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p];
            }
            if i == j {
                if s <= floor {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = rhs[i];
        for p in 0..i {
            s -= l[i * n + p] * y[p];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for p in (i + 1)..n {
            s -= l[p * n + i] * x[p];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

fn check_indices(idx: &[usize], dim: usize) -> Result<()> {
    for (pos, &i) in idx.iter().enumerate() {
        if i >= dim {
            return Err(Error::Index { index: i, dim });
        }
        if pos > 0 && idx[pos - 1] >= i {
            return Err(Error::InvalidArgument(format!(
                "index set must be strictly increasing, got {idx:?}"
            )));
        }
    }
    Ok(())
}

/// Principal submatrix with rows and columns `idx` (strictly increasing).
pub fn submatrix(m: &SymMatrix, idx: &[usize]) -> Result<SymMatrix> {
    check_indices(idx, m.dim())?;
    if idx.is_empty() {
        return Err(Error::InvalidArgument("empty index set".into()));
    }
    Ok(submatrix_unchecked(m, idx))
}

pub(crate) fn submatrix_unchecked(m: &SymMatrix, idx: &[usize]) -> SymMatrix {
    let k = idx.len();
    let mut data = Vec::with_capacity(k * k);
    for &i in idx {
        data.extend(idx.iter().map(|&j| m.get(i, j)));
    }
    SymMatrix { dim: k, data }
}

pub fn subvector(v: &[f64], idx: &[usize]) -> Result<RealVector> {
    check_indices(idx, v.len())?;
    Ok(RealVector(idx.iter().map(|&i| v[i]).collect()))
}

/// Lower-triangular Cholesky factor grown and shrunk one index at a time,
/// together with the forward-substituted right-hand side. Supports the
/// depth-first subset enumerations: pushing index `i` costs O(depth^2).
#[derive(Debug, Clone)]
pub struct CholeskyPath {
    /// Packed rows: row `r` holds `r + 1` entries.
    rows: Vec<Vec<f64>>,
    members: Vec<usize>,
    /// `L^{-1} b` restricted to the members, in push order.
    w: Vec<f64>,
    sum_w2: Vec<f64>,
    shift: f64,
}

impl CholeskyPath {
    /// Factor of `C_T - shift * I` for the growing set `T`.
    pub fn with_shift(shift: f64) -> Self {
        CholeskyPath { rows: Vec::new(), members: Vec::new(), w: Vec::new(), sum_w2: Vec::new(), shift }
    }

    pub fn new() -> Self {
        Self::with_shift(0.0)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Restarts with a new shift, dropping all members.
    pub fn reset(&mut self, shift: f64) {
        self.rows.clear();
        self.members.clear();
        self.w.clear();
        self.sum_w2.clear();
        self.shift = shift;
    }

    /// Appends `idx`; returns the squared pivot (`d`). The factor is only
    /// extended when `d > floor`; otherwise the path is left unchanged.
    pub fn push(&mut self, m: &SymMatrix, b: Option<&[f64]>, idx: usize, floor: f64) -> Option<f64> {
        let r = self.members.len();
        let mut row = Vec::with_capacity(r + 1);
        for (p, &j) in self.members.iter().enumerate() {
            let mut s = m.get(idx, j);
            let lp = &self.rows[p];
            for q in 0..p {
                s -= row[q] * lp[q];
            }
            row.push(s / lp[p]);
        }
        let d = m.get(idx, idx) - self.shift - row.iter().map(|x| x * x).sum::<f64>();
        if d <= floor {
            return None;
        }
        let piv = d.sqrt();
        row.push(piv);
        if let Some(b) = b {
            let mut s = b[idx];
            for (q, wq) in self.w.iter().enumerate() {
                s -= row[q] * wq;
            }
            let wi = s / piv;
            let prev = self.sum_w2.last().copied().unwrap_or(0.0);
            self.w.push(wi);
            self.sum_w2.push(prev + wi * wi);
        }
        self.rows.push(row);
        self.members.push(idx);
        Some(d)
    }

    pub fn pop(&mut self) {
        if self.members.pop().is_some() {
            self.rows.pop();
            if self.w.len() > self.members.len() {
                self.w.pop();
                self.sum_w2.pop();
            }
        }
    }

    /// `b_T^T C_T^{-1} b_T` for the current members (requires pushes with `b`).
    pub fn quad_form(&self) -> f64 {
        self.sum_w2.last().copied().unwrap_or(0.0)
    }
}

impl Default for CholeskyPath {
    fn default() -> Self {
        Self::new()
    }
}

/// Serializes non-finite values as the strings `"inf"`, `"-inf"` or `"nan"`
/// so that sentinels survive a JSON round trip.
pub(crate) fn serialize_extended<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}
