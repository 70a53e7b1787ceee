//! CSV input and output.
//!
//! Matrices are written one row per line without a header. Result tables
//! carry a header row and a plain-text sidecar (`<file>.meta`) with one
//! `key: value` pair per line.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::model::{MeasurementEnsemble, SparseSignal};
use crate::{Error, Result};

/// A result table: fixed column order, values already formatted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Sidecar entries, in order.
    pub metadata: Vec<(String, String)>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::dim(format!(
                "row has {} fields, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn metadata_string(&self) -> String {
        self.metadata
            .iter()
            .map(|(k, v)| format!("{k}: {v}\n"))
            .collect()
    }

    /// Writes the CSV to `path` and the sidecar next to it; returns the
    /// sidecar path.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        fs::write(path, self.to_csv_string()?)?;
        let meta = sidecar_path(path);
        fs::write(&meta, self.metadata_string())?;
        Ok(meta)
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut data = Vec::new();
    let mut ncols = None;
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if *ncols.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::dim(format!("{}: ragged row {}", path.display(), line + 1)));
        }
        for field in rec.iter() {
            data.push(field.parse::<f64>().map_err(|e| {
                Error::param(format!("{}: row {}: {field:?}: {e}", path.display(), line + 1))
            })?);
        }
    }
    let ncols = ncols.ok_or_else(|| Error::Empty(format!("{}", path.display())))?;
    Ok(DMatrix::from_row_slice(data.len() / ncols, ncols, &data))
}

/// Reads a vector stored either as one column or as one row.
pub fn read_vector_csv(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix_csv(path)?;
    if m.ncols() == 1 || m.nrows() == 1 {
        Ok(DVector::from_iterator(m.len(), m.iter().copied()))
    } else {
        Err(Error::dim(format!(
            "{}: expected a vector, found a {}x{} matrix",
            path.display(),
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Writes a vector as one column.
pub fn write_vector_csv(path: &Path, v: &DVector<f64>) -> Result<()> {
    write_matrix_csv(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

/// Dumps an ensemble and its signal into `dir` as `A.csv`, `H.csv`,
/// `B.csv`, `y.csv`, `v.csv`, `x.csv` and `ensemble.meta`.
pub fn dump_ensemble(
    dir: &Path,
    ens: &MeasurementEnsemble<f64>,
    x: &SparseSignal<f64>,
    extra: &[(String, String)],
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix_csv(&dir.join("A.csv"), &ens.a)?;
    write_matrix_csv(&dir.join("H.csv"), &ens.h)?;
    write_matrix_csv(&dir.join("B.csv"), &ens.b)?;
    write_vector_csv(&dir.join("y.csv"), &ens.y)?;
    write_vector_csv(&dir.join("v.csv"), &ens.v)?;
    write_vector_csv(&dir.join("x.csv"), x.values())?;
    let support: Vec<String> = x.support().iter().map(|i| i.to_string()).collect();
    let mut meta = format!(
        "M: {}\nN: {}\nk: {}\nseed: {}\nsupport: {}\n",
        ens.m(),
        ens.n(),
        x.sparsity(),
        ens.seed,
        support.join(",")
    );
    for (k, v) in extra {
        meta.push_str(&format!("{k}: {v}\n"));
    }
    fs::write(dir.join("ensemble.meta"), meta)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -0.1, 1e-300, 3.5, 0.0, f64::MAX]);
        write_matrix_csv(&p, &m).unwrap();
        assert_eq!(read_matrix_csv(&p).unwrap(), m);
        let v = DVector::from_vec(vec![0.1, 0.2, 0.30000000000000004]);
        write_vector_csv(&p, &v).unwrap();
        assert_eq!(read_vector_csv(&p).unwrap(), v);
        assert!(read_vector_csv(&dir.path().join("missing.csv")).is_err());
    }

    #[test]
    fn vector_as_row_and_bad_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.csv");
        fs::write(&p, "# y\n1, 2, 3\n").unwrap();
        assert_eq!(read_vector_csv(&p).unwrap().as_slice(), &[1.0, 2.0, 3.0]);
        fs::write(&p, "1,2\n3\n").unwrap();
        assert!(read_matrix_csv(&p).is_err());
        fs::write(&p, "1,x\n").unwrap();
        assert!(matches!(read_matrix_csv(&p), Err(Error::Parameter(_))));
    }

    #[test]
    fn table_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let mut t = Table::new(["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]).unwrap();
        assert!(t.push(vec!["1".into()]).is_err());
        t.meta("seed", 7);
        let meta = t.write(&p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "a,b\n1,\"x,y\"\n");
        assert_eq!(fs::read_to_string(meta).unwrap(), "seed: 7\n");
        assert_eq!(t.column("b"), Some(1));
    }
}
