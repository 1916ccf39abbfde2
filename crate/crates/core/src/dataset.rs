//! Observed data: validation, centering and CSV ingestion.
//!
//! CSV dialect is fixed: comma separated, mandatory header, `.` decimal
//! point. Every column other than the response becomes a regressor, in file
//! order. Numbers are written back with Rust's shortest round-trip `f64`
//! formatting, so a write/read cycle is bit-exact.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{RcrError, Result};

/// `n` observations of `(X ∈ R^P, Y)`.
///
/// Regressors are stored row-major; row `i` is `x[i*P .. (i+1)*P]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    p: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    x_names: Vec<String>,
    y_name: String,
}

/// Data shifted to the centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredView {
    pub p: usize,
    /// Row-major `n × P` deviations `X_i − X̄`.
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub x_mean: Vec<f64>,
    pub y_mean: f64,
}

impl CenteredView {
    pub fn n(&self) -> usize {
        self.dy.len()
    }

    pub fn dx_row(&self, i: usize) -> &[f64] {
        &self.dx[i * self.p..(i + 1) * self.p]
    }
}

impl Dataset {
    /// Builds a dataset from row vectors of regressors.
    pub fn from_rows(rows: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(RcrError::InvalidInput("ragged regressor rows".into()));
        }
        let names = default_names(p);
        Self::new(p, rows.into_iter().flatten().collect(), y, names, "y".into())
    }

    /// Builds a dataset from regressor columns (`x_cols[p][i]`).
    pub fn from_columns(x_cols: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let p = x_cols.len();
        let n = y.len();
        if x_cols.iter().any(|c| c.len() != n) {
            return Err(RcrError::InvalidInput(
                "regressor columns and response differ in length".into(),
            ));
        }
        let mut x = Vec::with_capacity(n * p);
        for i in 0..n {
            x.extend(x_cols.iter().map(|c| c[i]));
        }
        Self::new(p, x, y, default_names(p), "y".into())
    }

    /// Fully specified constructor; `x` is row-major `n × p`.
    pub fn new(
        p: usize,
        x: Vec<f64>,
        y: Vec<f64>,
        x_names: Vec<String>,
        y_name: String,
    ) -> Result<Self> {
        if p == 0 {
            return Err(RcrError::InvalidInput("need at least one regressor".into()));
        }
        let n = y.len();
        if x.len() != n * p {
            return Err(RcrError::InvalidInput(format!(
                "regressor buffer has {} values, expected {}",
                x.len(),
                n * p
            )));
        }
        if x_names.len() != p {
            return Err(RcrError::InvalidInput("one name per regressor required".into()));
        }
        if n < p + 1 {
            return Err(RcrError::TooFewRows { got: n, needed: p + 1, p });
        }
        for i in 0..n {
            if !y[i].is_finite() || x[i * p..(i + 1) * p].iter().any(|v| !v.is_finite()) {
                return Err(RcrError::NonFinite { row: i + 1 });
            }
        }
        Ok(Self { p, x, y, x_names, y_name })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    /// Column `j` of the regressors.
    pub fn x_col(&self, j: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.x[i * self.p + j]).collect()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }

    pub fn y_name(&self) -> &str {
        &self.y_name
    }

    /// All `P + 1` labels, regressors first.
    pub fn variable_names(&self) -> Vec<String> {
        let mut v = self.x_names.clone();
        v.push(self.y_name.clone());
        v
    }

    /// Rows picked by index, repeats allowed. Used for resampling and for
    /// dropping contaminated rows; only the row-count invariant is rechecked.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let mut x = Vec::with_capacity(rows.len() * self.p);
        let mut y = Vec::with_capacity(rows.len());
        for &i in rows {
            x.extend_from_slice(self.x_row(i));
            y.push(self.y[i]);
        }
        if y.len() < self.p + 1 {
            return Err(RcrError::TooFewRows {
                got: y.len(),
                needed: self.p + 1,
                p: self.p,
            });
        }
        Ok(Self {
            p: self.p,
            x,
            y,
            x_names: self.x_names.clone(),
            y_name: self.y_name.clone(),
        })
    }

    /// Deviations from the arithmetic means.
    pub fn center(&self) -> CenteredView {
        let n = self.n();
        let p = self.p;
        let nf = n as f64;
        let mut x_mean = vec![0.0; p];
        for i in 0..n {
            for (m, v) in x_mean.iter_mut().zip(self.x_row(i)) {
                *m += v;
            }
        }
        x_mean.iter_mut().for_each(|m| *m /= nf);
        let y_mean = self.y.iter().sum::<f64>() / nf;

        let mut dx = Vec::with_capacity(n * p);
        for i in 0..n {
            dx.extend(self.x_row(i).iter().zip(&x_mean).map(|(v, m)| v - m));
        }
        let dy = self.y.iter().map(|v| v - y_mean).collect();
        CenteredView { p, dx, dy, x_mean, y_mean }
    }

    /// Reads CSV from any reader. `response` names the Y column; `None`
    /// selects the last column.
    pub fn read_csv<R: Read>(reader: R, response: Option<&str>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| RcrError::Csv(e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        if header.len() < 2 {
            return Err(RcrError::InvalidInput(
                "need a response column and at least one regressor column".into(),
            ));
        }
        let y_idx = match response {
            Some(name) => header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| RcrError::MissingColumn(name.to_owned()))?,
            None => header.len() - 1,
        };
        let x_idx: Vec<usize> = (0..header.len()).filter(|&j| j != y_idx).collect();
        let p = x_idx.len();

        let mut x = Vec::new();
        let mut y = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| RcrError::Csv(e.to_string()))?;
            let row = r + 1;
            let cell = |j: usize| -> Result<f64> {
                let raw = rec.get(j).unwrap_or("");
                raw.parse::<f64>().map_err(|_| RcrError::NonNumeric {
                    row,
                    column: header[j].clone(),
                    value: raw.to_owned(),
                })
            };
            for &j in &x_idx {
                x.push(cell(j)?);
            }
            y.push(cell(y_idx)?);
        }
        let x_names = x_idx.iter().map(|&j| header[j].clone()).collect();
        Self::new(p, x, y, x_names, header[y_idx].clone())
    }

    pub fn load_csv(path: impl AsRef<Path>, response: Option<&str>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| RcrError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::read_csv(file, response)
    }

    /// Writes regressors then the response, same dialect as [`Dataset::read_csv`].
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| RcrError::Csv(e.to_string());
        w.write_record(self.variable_names()).map_err(csv_err)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = self.x_row(i).iter().map(f64::to_string).collect();
            rec.push(self.y[i].to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| RcrError::Csv(e.to_string()))
    }
}

fn default_names(p: usize) -> Vec<String> {
    if p == 1 {
        vec!["x".into()]
    } else {
        (1..=p).map(|j| format!("x{j}")).collect()
    }
}
