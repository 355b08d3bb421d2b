//! Core data types: the regression dataset, index sets and selection results.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STANDARDIZE_TOL: f64 = 1e-10;

/// Response vector plus an `n x p` design matrix.
///
/// Immutable after construction; share it freely across worker threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    names: Vec<String>,
    standardized: bool,
}

impl Dataset {
    /// Builds an unstandardized dataset, validating shapes and finiteness.
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n {
            return Err(Error::Dimension(format!(
                "response has {n} rows but design has {}",
                x.nrows()
            )));
        }
        if n < 2 {
            return Err(Error::Dimension(format!("need at least 2 samples, got {n}")));
        }
        if x.ncols() == 0 {
            return Err(Error::Dimension("need at least one predictor".into()));
        }
        if names.len() != x.ncols() {
            return Err(Error::Dimension(format!(
                "{} names for {} predictors",
                names.len(),
                x.ncols()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("response row {}", i + 1)));
        }
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "design row {}, column {}",
                k % n + 1,
                k / n + 1
            )));
        }
        Ok(Self {
            y,
            x,
            names,
            standardized: false,
        })
    }

    /// Same as [`Dataset::new`] with names `x1..xp`.
    pub fn from_parts(y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        let names = default_names(x.ncols());
        Self::new(y, x, names)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn require_standardized(&self) -> Result<()> {
        if self.standardized {
            Ok(())
        } else {
            Err(Error::NotStandardized)
        }
    }

    /// Centers and scales every column so that `mean = 0` and `x_j' x_j = n`;
    /// the response is centered but keeps its scale.
    pub fn standardize(&self) -> Result<Dataset> {
        let n = self.n() as f64;
        let mut x = self.x.clone();
        for (j, mut col) in x.column_iter_mut().enumerate() {
            let mean = col.sum() / n;
            col.add_scalar_mut(-mean);
            let ss = col.norm_squared() / n;
            let scale_ref = mean.abs().max(1.0);
            if !(ss.sqrt() > 1e-12 * scale_ref) {
                return Err(Error::ConstantColumn(j));
            }
            col /= ss.sqrt();
        }
        let y_mean = self.y.sum() / n;
        let y = self.y.add_scalar(-y_mean);
        Ok(Dataset {
            y,
            x,
            names: self.names.clone(),
            standardized: true,
        })
    }

    /// Checks the standardization invariant numerically.
    pub fn check_standardized(&self) -> bool {
        let n = self.n() as f64;
        self.x.column_iter().all(|c| {
            (c.sum() / n).abs() <= STANDARDIZE_TOL
                && (c.norm_squared() / n - 1.0).abs() <= STANDARDIZE_TOL
        })
    }

    /// Replaces the response, keeping the design. The new response is
    /// centered when the dataset is standardized.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Dataset> {
        if y.len() != self.n() {
            return Err(Error::Dimension(format!(
                "response length {} != {}",
                y.len(),
                self.n()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response".into()));
        }
        let y = if self.standardized {
            let m = y.sum() / y.len() as f64;
            y.add_scalar(-m)
        } else {
            y
        };
        Ok(Dataset {
            y,
            x: self.x.clone(),
            names: self.names.clone(),
            standardized: self.standardized,
        })
    }

    /// Row subset (with repetition allowed) as a new unstandardized dataset.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        let x = self.x.select_rows(rows);
        Dataset {
            y,
            x,
            names: self.names.clone(),
            standardized: false,
        }
    }

    /// Column subset in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        let x = self.x.select_columns(cols);
        let names = cols.iter().map(|&j| self.names[j].clone()).collect();
        Dataset {
            y: self.y.clone(),
            x,
            names,
            standardized: self.standardized,
        }
    }
}

pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

/// Reads a header-first CSV; `response_column` becomes `y`, every other
/// column a predictor in file order.
pub fn load_csv(path: impl AsRef<Path>, response_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let response_idx = header
        .iter()
        .position(|h| h == response_column)
        .ok_or_else(|| Error::MissingColumn(response_column.to_owned()))?;
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != response_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let p = names.len();

    let mut y = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); p];
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let row = r + 1;
        if record.len() != header.len() {
            return Err(Error::Dimension(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        let mut k = 0;
        for (i, cell) in record.iter().enumerate() {
            let v = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::BadCell {
                    row,
                    column: header[i].clone(),
                    value: cell.to_owned(),
                })?;
            if i == response_idx {
                y.push(v);
            } else {
                cols[k].push(v);
                k += 1;
            }
        }
    }
    let n = y.len();
    if n < 2 {
        return Err(Error::Dimension(format!("need at least 2 data rows, got {n}")));
    }
    let x = DMatrix::from_iterator(n, p, cols.into_iter().flatten());
    Dataset::new(DVector::from_vec(y), x, names)
}

/// Writes `response_column` followed by the predictors. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>, response_column: &str) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    write!(w, "{response_column}").map_err(io)?;
    for name in &d.names {
        write!(w, ",{name}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for i in 0..d.n() {
        write!(w, "{}", d.y[i]).map_err(io)?;
        for j in 0..d.p() {
            write!(w, ",{}", d.x[(i, j)]).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Sorted set of 0-based predictor indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActiveSet(Vec<usize>);

impl ActiveSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Builds a set from arbitrary indices; duplicates are merged.
    pub fn new(indices: impl IntoIterator<Item = usize>, p: usize) -> Result<Self> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        if let Some(&last) = v.last() {
            if last >= p {
                return Err(Error::InvalidArgument(format!(
                    "index {last} out of range for p = {p}"
                )));
            }
        }
        Ok(Self(v))
    }

    pub(crate) fn from_unsorted(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn union(&self, other: &ActiveSet) -> ActiveSet {
        Self::from_unsorted(self.iter().chain(other.iter()))
    }

    pub fn is_subset(&self, other: &ActiveSet) -> bool {
        self.iter().all(|j| other.contains(j))
    }

    pub fn difference_count(&self, other: &ActiveSet) -> usize {
        self.iter().filter(|&j| !other.contains(j)).count()
    }
}

impl fmt::Display for ActiveSet {
    /// 1-based, brace-delimited.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", j + 1)?;
        }
        write!(f, "}}")
    }
}

/// Which statistic drove a selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cis,
    Sis,
    Holp,
    /// Selection frequencies from iterative CIS.
    Icis,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Cis => "cis",
            Method::Sis => "sis",
            Method::Holp => "holp",
            Method::Icis => "icis",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The cutoff used to turn statistics into a selected set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Keep variables whose statistic is strictly above the threshold.
    Threshold(f64),
    /// Keep the `k` top-ranked variables.
    TopK(usize),
    /// Keep variables whose selection frequency is at least this value.
    Frequency(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub selected: ActiveSet,
    pub method: Method,
    pub rule: SelectionRule,
}
