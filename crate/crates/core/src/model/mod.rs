//! Normalized covariance models: the correlation matrix `C` among the
//! observation variables plus one correlation vector `b` per target.

mod synth;

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{eigenvalues_sym, RealVector, SymMatrix};

pub use synth::{synth_generate, SyntheticSpec};

const UNIT_DIAG_TOL: f64 = 1e-9;
const CORR_BOUND_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-8;

/// One predictor variable `Z_j` and its correlations with the observation
/// variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub name: String,
    pub b: RealVector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceModel {
    names: Vec<String>,
    #[serde(rename = "C")]
    c: SymMatrix,
    targets: Vec<Target>,
}

#[derive(Deserialize)]
struct RawModel {
    names: Option<Vec<String>>,
    #[serde(rename = "C")]
    c: SymMatrix,
    targets: Vec<Target>,
}

impl<'de> Deserialize<'de> for CovarianceModel {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = RawModel::deserialize(de)?;
        let model = CovarianceModel::from_matrices(raw.c, raw.targets).map_err(serde::de::Error::custom)?;
        match raw.names {
            Some(names) => model.with_names(names).map_err(serde::de::Error::custom),
            None => Ok(model),
        }
    }
}

impl CovarianceModel {
    /// Validates an already-normalized model. Nothing is rescaled.
    pub fn from_matrices(c: SymMatrix, targets: Vec<Target>) -> Result<Self> {
        let n = c.dim();
        for i in 0..n {
            let d = c.get(i, i);
            if (d - 1.0).abs() > UNIT_DIAG_TOL {
                return Err(Error::ModelValidation {
                    invariant: "diagonal",
                    detail: format!("C[{i}][{i}] = {d}, expected 1"),
                });
            }
            for j in 0..n {
                if c.get(i, j).abs() > 1.0 + CORR_BOUND_TOL {
                    return Err(Error::ModelValidation {
                        invariant: "correlation bound",
                        detail: format!("|C[{i}][{j}]| = {} > 1", c.get(i, j).abs()),
                    });
                }
            }
        }
        for t in &targets {
            if t.b.len() != n {
                return Err(Error::ModelValidation {
                    invariant: "dimension",
                    detail: format!("target `{}` has {} entries, expected {n}", t.name, t.b.len()),
                });
            }
            if let Some((i, v)) = t.b.iter().enumerate().find(|(_, v)| v.abs() > 1.0 + CORR_BOUND_TOL) {
                return Err(Error::ModelValidation {
                    invariant: "correlation bound",
                    detail: format!("target `{}`: |b[{i}]| = {} > 1", t.name, v.abs()),
                });
            }
        }
        let lam_min = eigenvalues_sym(&c)[0];
        if lam_min < -PSD_TOL {
            return Err(Error::ModelValidation {
                invariant: "positive semidefinite",
                detail: format!("smallest eigenvalue {lam_min}"),
            });
        }
        let names = (0..n).map(|i| format!("x{i}")).collect();
        Ok(CovarianceModel { names, c, targets })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n() {
            return Err(Error::ModelValidation {
                invariant: "dimension",
                detail: format!("{} names for {} variables", names.len(), self.n()),
            });
        }
        self.names = names;
        Ok(self)
    }

    /// Builds the correlation model from raw samples. Every column not listed in
    /// `target_cols` becomes an observation variable, in table order.
    pub fn from_samples(table: &SampleTable, target_cols: &[&str]) -> Result<Self> {
        let mut target_idx = Vec::with_capacity(target_cols.len());
        for name in target_cols {
            let pos = table
                .names
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::UnknownName((*name).to_string()))?;
            target_idx.push(pos);
        }
        let var_idx: Vec<usize> = (0..table.names.len()).filter(|i| !target_idx.contains(i)).collect();
        if var_idx.is_empty() {
            return Err(Error::InvalidArgument("no observation variables left".into()));
        }

        let m = table.rows();
        let standardized: Vec<Vec<f64>> = table
            .columns
            .iter()
            .zip(&table.names)
            .map(|(col, name)| standardize(col).ok_or_else(|| Error::ZeroVariance(name.clone())))
            .collect::<Result<_>>()?;
        let denom = (m - 1) as f64;
        let corr = |i: usize, j: usize| -> f64 {
            if i == j {
                return 1.0;
            }
            let v: f64 = standardized[i].iter().zip(&standardized[j]).map(|(a, b)| a * b).sum();
            (v / denom).clamp(-1.0, 1.0)
        };

        let n = var_idx.len();
        let mut data = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                let v = corr(var_idx[a], var_idx[b]);
                data[a * n + b] = v;
                data[b * n + a] = v;
            }
        }
        let c = SymMatrix::from_row_major(n, data)?;
        let targets = target_idx
            .iter()
            .map(|&t| {
                Ok(Target {
                    name: table.names[t].clone(),
                    b: RealVector::new(var_idx.iter().map(|&v| corr(t, v)).collect())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let names = var_idx.iter().map(|&i| table.names[i].clone()).collect();
        CovarianceModel::from_matrices(c, targets)?.with_names(names)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Number of observation variables.
    pub fn n(&self) -> usize {
        self.c.dim()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn c(&self) -> &SymMatrix {
        &self.c
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn target_index(&self, label: &str) -> Result<usize> {
        self.targets
            .iter()
            .position(|t| t.name == label)
            .ok_or_else(|| Error::UnknownName(label.to_string()))
    }

    /// Correlation vector of target `t`.
    pub fn b(&self, t: usize) -> &[f64] {
        &self.targets[t].b
    }

    /// Same variables, keeping only the listed targets.
    pub fn select_targets(&self, labels: &[&str]) -> Result<Self> {
        let targets = labels
            .iter()
            .map(|l| self.target_index(l).map(|t| self.targets[t].clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(CovarianceModel { names: self.names.clone(), c: self.c.clone(), targets })
    }

    /// The `(n+1) x (n+1)` correlation matrix of `(Z_t, X_1, ..., X_n)`.
    pub fn augmented(&self, t: usize) -> Result<SymMatrix> {
        let n = self.n();
        let b = self.b(t);
        let d = n + 1;
        let mut data = vec![0.0; d * d];
        data[0] = 1.0;
        for i in 0..n {
            data[i + 1] = b[i];
            data[(i + 1) * d] = b[i];
            for j in 0..n {
                data[(i + 1) * d + j + 1] = self.c.get(i, j);
            }
        }
        SymMatrix::from_row_major(d, data)
    }
}

fn standardize(col: &[f64]) -> Option<Vec<f64>> {
    let m = col.len() as f64;
    let mean = col.iter().sum::<f64>() / m;
    let ss: f64 = col.iter().map(|x| (x - mean) * (x - mean)).sum();
    let sd = (ss / (m - 1.0)).sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return None;
    }
    // scale-relative floor: constant columns can leave rounding residue
    let scale = col.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    if sd <= 1e-14 * scale {
        return None;
    }
    Some(col.iter().map(|x| (x - mean) / sd).collect())
}

/// Named numeric columns of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl SampleTable {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() || names.is_empty() {
            return Err(Error::Dimension(format!("{} names for {} columns", names.len(), columns.len())));
        }
        let m = columns[0].len();
        if m < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 rows, got {m}")));
        }
        for (c, col) in columns.iter().enumerate() {
            if col.len() != m {
                return Err(Error::Dimension(format!("column `{}` has {} rows, expected {m}", names[c], col.len())));
            }
            if let Some(r) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse { row: r + 2, col: c + 1, msg: "non-finite value".into() });
            }
        }
        Ok(SampleTable { names, columns })
    }

    /// Reads a headered, comma-separated numeric table. Row numbers in errors
    /// are 1-based file lines (the header is line 1); columns are 1-based.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let names: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Parse { row: 1, col: 0, msg: e.to_string() })?
            .iter()
            .map(str::to_string)
            .collect();
        let mut columns = vec![Vec::new(); names.len()];
        for (r, rec) in rdr.records().enumerate() {
            let line = r + 2;
            let rec = rec.map_err(|e| Error::Parse { row: line, col: 0, msg: e.to_string() })?;
            for (c, field) in rec.iter().enumerate() {
                if field.is_empty() {
                    return Err(Error::Parse { row: line, col: c + 1, msg: "missing value".into() });
                }
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Parse { row: line, col: c + 1, msg: format!("not a number: `{field}`") })?;
                columns[c].push(v);
            }
        }
        SampleTable::new(names, columns)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_csv_reader(std::io::BufReader::new(f))
    }

    /// CSV text with shortest round-trip float formatting and LF endings.
    pub fn to_csv_string(&self) -> String {
        let mut out = self.names.join(",");
        out.push('\n');
        for r in 0..self.rows() {
            let line: Vec<String> = self.columns.iter().map(|c| format!("{}", c[r])).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(names: &[&str], cols: Vec<Vec<f64>>) -> SampleTable {
        SampleTable::new(names.iter().map(|s| s.to_string()).collect(), cols).unwrap()
    }

    pub(crate) fn i3a() -> CovarianceModel {
        let c = SymMatrix::from_rows(vec![vec![1.0, 0.5, 0.0], vec![0.5, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        CovarianceModel::from_matrices(
            c,
            vec![Target { name: "z".into(), b: RealVector::new(vec![0.6, 0.5, 0.4]).unwrap() }],
        )
        .unwrap()
    }

    #[test]
    fn identical_columns_correlate_perfectly() {
        let x = vec![1.0, 3.0, 2.0, 5.0];
        let t = table(&["x", "z"], vec![x.clone(), x]);
        let m = CovarianceModel::from_samples(&t, &["z"]).unwrap();
        assert_eq!(m.c().to_rows(), vec![vec![1.0]]);
        assert!((m.b(0)[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn anti_correlated_columns() {
        let t = table(&["x", "z"], vec![vec![1.0, -1.0, 1.0, -1.0], vec![-1.0, 1.0, -1.0, 1.0]]);
        let m = CovarianceModel::from_samples(&t, &["z"]).unwrap();
        assert!((m.b(0)[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_column_correlations_match_numpy() {
        // reference values from numpy.corrcoef on the same table
        let t = table(
            &["a", "b", "z"],
            vec![
                vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
                vec![2.0, 1.5, 3.5, 3.0, 6.0, 5.0, 7.5, 7.0],
                vec![0.5, 1.0, 0.0, 2.5, 1.5, 3.0, 2.0, 4.5],
            ],
        );
        let m = CovarianceModel::from_samples(&t, &["z"]).unwrap();
        assert!((m.c().get(0, 1) - 0.9294298939070512).abs() < 1e-12);
        assert!((m.b(0)[0] - 0.8201640492164057).abs() < 1e-12);
        assert!((m.b(0)[1] - 0.6004677184060202).abs() < 1e-12);
        assert_eq!(m.names(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn constant_column_is_rejected() {
        let t = table(&["x", "k", "z"], vec![vec![1.0, 2.0, 3.0], vec![4.0, 4.0, 4.0], vec![0.0, 1.0, 0.5]]);
        match CovarianceModel::from_samples(&t, &["z"]) {
            Err(Error::ZeroVariance(name)) => assert_eq!(name, "k"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_missing_and_bad_cells() {
        let err = SampleTable::from_csv_reader("a,b\n1,2\n3,\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, col: 2, .. }), "{err:?}");
        let err = SampleTable::from_csv_reader("a,b\n1,2\n3,x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, col: 2, .. }), "{err:?}");
        let t = SampleTable::from_csv_reader("a,b\n1,2\n3,5\n".as_bytes()).unwrap();
        assert_eq!(t.column("b").unwrap(), &[2.0, 5.0]);
    }

    #[test]
    fn from_matrices_validation() {
        let ok = CovarianceModel::from_matrices(
            SymMatrix::identity(3),
            vec![Target { name: "z".into(), b: RealVector::new(vec![0.6, 0.5, 0.4]).unwrap() }],
        );
        assert!(ok.is_ok());
        assert!(i3a().n() == 3);

        let bad = SymMatrix::from_rows(vec![vec![0.9, 0.0], vec![0.0, 1.0]]).unwrap();
        match CovarianceModel::from_matrices(bad, vec![]) {
            Err(Error::ModelValidation { invariant, .. }) => assert_eq!(invariant, "diagonal"),
            other => panic!("unexpected {other:?}"),
        }
        let not_psd =
            SymMatrix::from_rows(vec![vec![1.0, 0.9, -0.9], vec![0.9, 1.0, 0.9], vec![-0.9, 0.9, 1.0]]).unwrap();
        match CovarianceModel::from_matrices(not_psd, vec![]) {
            Err(Error::ModelValidation { invariant, .. }) => assert_eq!(invariant, "positive semidefinite"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let m = i3a();
        let s = m.to_json_string().unwrap();
        assert!(s.contains("\"C\""));
        let back = CovarianceModel::from_json_str(&s).unwrap();
        assert_eq!(back, m);
        let minimal = r#"{"C": [[1, 0.2], [0.2, 1]], "targets": [{"name": "z", "b": [0.1, 0.3]}]}"#;
        assert_eq!(CovarianceModel::from_json_str(minimal).unwrap().names()[1], "x1");
    }
}
