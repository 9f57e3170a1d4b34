//! Tabular dataset model, CSV ingestion and deterministic fold assignment.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

/// Outcome, binary treatment and covariates for `n` units.
///
/// Covariates are stored column-major (`n × d`); `d = 0` is allowed and means
/// the adjustment set is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    outcome: Vec<f64>,
    treatment: Vec<u8>,
    covariates: DMatrix<f64>,
    names: Vec<String>,
    outcome_name: String,
    treatment_name: String,
}

impl Dataset {
    pub fn new(
        outcome: Vec<f64>,
        treatment: Vec<u8>,
        covariates: DMatrix<f64>,
        names: Vec<String>,
    ) -> Result<Self> {
        Self::with_labels(outcome, treatment, covariates, names, "y", "t")
    }

    pub fn with_labels(
        outcome: Vec<f64>,
        treatment: Vec<u8>,
        covariates: DMatrix<f64>,
        names: Vec<String>,
        outcome_name: &str,
        treatment_name: &str,
    ) -> Result<Self> {
        let n = outcome.len();
        if n < 2 {
            return Err(Error::Data(format!("n < 2 (got {n} rows)")));
        }
        if treatment.len() != n || covariates.nrows() != n {
            return Err(Error::Data(format!(
                "length mismatch: outcome {n}, treatment {}, covariate rows {}",
                treatment.len(),
                covariates.nrows()
            )));
        }
        if names.len() != covariates.ncols() {
            return Err(Error::Data(format!(
                "{} names for {} covariate columns",
                names.len(),
                covariates.ncols()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Data(format!("duplicated covariate name `{name}`")));
            }
        }
        if let Some(i) = treatment.iter().position(|&t| t > 1) {
            return Err(Error::Data(format!(
                "treatment not binary: row {i} has value {}",
                treatment[i]
            )));
        }
        if let Some(i) = outcome.iter().position(|y| !y.is_finite()) {
            return Err(Error::Data(format!("non-finite outcome at row {i}")));
        }
        if covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite covariate value".into()));
        }
        let ds = Dataset {
            outcome,
            treatment,
            covariates,
            names,
            outcome_name: outcome_name.to_string(),
            treatment_name: treatment_name.to_string(),
        };
        for j in ds.constant_columns() {
            log::warn!("covariate `{}` is constant", ds.names[j]);
        }
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    pub fn d(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn treatment(&self) -> &[u8] {
        &self.treatment
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    pub fn treatment_name(&self) -> &str {
        &self.treatment_name
    }

    pub fn treated_fraction(&self) -> f64 {
        self.treatment.iter().map(|&t| t as f64).sum::<f64>() / self.n() as f64
    }

    pub fn arm_count(&self, arm: u8) -> usize {
        self.treatment.iter().filter(|&&t| t == arm).count()
    }

    /// Indices of covariate columns with zero range.
    pub fn constant_columns(&self) -> Vec<usize> {
        (0..self.d())
            .filter(|&j| {
                let col = self.covariates.column(j);
                col.iter().all(|&v| v == col[0])
            })
            .collect()
    }

    /// Copy of the dataset without the `excluded` covariate columns.
    /// Excluding nothing returns an identical dataset.
    pub fn subset_covariates(&self, excluded: &BTreeSet<usize>) -> Result<Dataset> {
        if let Some(&bad) = excluded.iter().find(|&&j| j >= self.d()) {
            return Err(Error::invalid(
                "excluded",
                format!("covariate index {bad} out of range for d = {}", self.d()),
            ));
        }
        let keep: Vec<usize> = (0..self.d()).filter(|j| !excluded.contains(j)).collect();
        Ok(Dataset {
            outcome: self.outcome.clone(),
            treatment: self.treatment.clone(),
            covariates: self.covariates.select_columns(&keep),
            names: keep.iter().map(|&j| self.names[j].clone()).collect(),
            outcome_name: self.outcome_name.clone(),
            treatment_name: self.treatment_name.clone(),
        })
    }

    /// Rows `idx` (repetitions allowed) as a new dataset.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            outcome: idx.iter().map(|&i| self.outcome[i]).collect(),
            treatment: idx.iter().map(|&i| self.treatment[i]).collect(),
            covariates: self.covariates.select_rows(idx),
            names: self.names.clone(),
            outcome_name: self.outcome_name.clone(),
            treatment_name: self.treatment_name.clone(),
        }
    }

    pub fn load_csv(path: impl AsRef<Path>, outcome_col: &str, treatment_col: &str) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(file, outcome_col, treatment_col)
    }

    pub fn read_csv<R: std::io::Read>(reader: R, outcome_col: &str, treatment_col: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut seen = HashSet::new();
        for h in &headers {
            if !seen.insert(h.as_str()) {
                return Err(Error::Data(format!("duplicated column `{h}`")));
            }
        }
        let find = |label: &str| {
            headers
                .iter()
                .position(|h| h == label)
                .ok_or_else(|| Error::Data(format!("missing column `{label}`")))
        };
        let y_col = find(outcome_col)?;
        let t_col = find(treatment_col)?;
        if y_col == t_col {
            return Err(Error::Data("outcome and treatment name the same column".into()));
        }
        let x_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != y_col && c != t_col).collect();

        let mut outcome = Vec::new();
        let mut treatment = Vec::new();
        let mut x_rows: Vec<f64> = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let cell = |c: usize| -> Result<f64> {
                let raw = record.get(c).unwrap_or("").trim();
                raw.parse::<f64>().map_err(|_| {
                    Error::Data(format!(
                        "non-numeric cell `{raw}` in column `{}` at data row {}",
                        headers[c],
                        row + 1
                    ))
                })
            };
            outcome.push(cell(y_col)?);
            let t = cell(t_col)?;
            let t = if t == 0.0 {
                0
            } else if t == 1.0 {
                1
            } else {
                return Err(Error::Data(format!(
                    "treatment not binary: value {t} at data row {}",
                    row + 1
                )));
            };
            treatment.push(t);
            for &c in &x_cols {
                x_rows.push(cell(c)?);
            }
        }
        let n = outcome.len();
        if n < 2 {
            return Err(Error::Data(format!("n < 2 (got {n} rows)")));
        }
        let covariates = DMatrix::from_row_slice(n, x_cols.len(), &x_rows);
        let names = x_cols.iter().map(|&c| headers[c].clone()).collect();
        Self::with_labels(outcome, treatment, covariates, names, outcome_col, treatment_col)
    }

    /// Writes outcome, treatment, then covariates. Floats use the shortest
    /// representation that parses back to the same bits.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec![self.outcome_name.clone(), self.treatment_name.clone()];
        header.extend(self.names.iter().cloned());
        wtr.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![self.outcome[i].to_string(), self.treatment[i].to_string()];
            rec.extend(self.covariates.row(i).iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::Estimation(format!("flushing csv: {e}")))?;
        Ok(())
    }
}

/// Balanced random partition of `0..n` into `K` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub seed: u64,
    #[serde(rename = "K")]
    pub k: usize,
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles `0..n` with a seeded generator and deals the permutation into
/// `k` folds round-robin, so fold sizes differ by at most one.
pub fn split_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::invalid("K", format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::invalid("K", format!("{k} folds exceed n = {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeds::rng(seed));
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    Ok(FoldAssignment { seed, k, fold_of })
}
