//! Observation matrix, per-node coefficient vectors and CSV ingestion.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{data, usage, Error, Result};

/// Immutable `n x d` observation matrix stored row-major.
///
/// Rows are observations, columns are variables (graph nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    n: usize,
    d: usize,
    column_names: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset from row-major values.
    pub fn new(values: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n < 2 || d < 2 {
            return Err(data(format!(
                "dataset needs n >= 2 and d >= 2, got n={n}, d={d}"
            )));
        }
        if values.len() != n * d {
            return Err(data(format!(
                "expected {} values for a {n}x{d} matrix, got {}",
                n * d,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(data(format!(
                "non-finite entry at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self {
            values,
            n,
            d,
            column_names: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(data(format!(
                "ragged rows: row {i} has {} entries, expected {d}",
                rows[i].len()
            )));
        }
        Self::new(rows.concat(), n, d)
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d {
            return Err(data(format!(
                "{} column names for {} columns",
                names.len(),
                self.d
            )));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Label for column `k`: its header name if present, else `X{k}`.
    pub fn column_label(&self, k: usize) -> String {
        match &self.column_names {
            Some(names) => names[k].clone(),
            None => format!("X{k}"),
        }
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.d + k]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, k)).collect()
    }

    /// New dataset made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * self.d);
        for &i in rows {
            if i >= self.n {
                return Err(usage(format!("row {i} out of range (n={})", self.n)));
            }
            values.extend_from_slice(self.row(i));
        }
        let out = Self::new(values, rows.len(), self.d)?;
        Ok(Self {
            column_names: self.column_names.clone(),
            ..out
        })
    }

    /// Adds `shifts[k]` to every entry of column `k`.
    pub fn shifted(&self, shifts: &[f64]) -> Result<Self> {
        if shifts.len() != self.d {
            return Err(usage("one shift per column required"));
        }
        let mut out = self.clone();
        for row in out.values.chunks_mut(self.d) {
            for (v, s) in row.iter_mut().zip(shifts) {
                *v += s;
            }
        }
        Ok(out)
    }

    /// Centers every column and, if `scale` is set, divides by its sample
    /// standard deviation. Zero-variance columns are only centered.
    pub fn standardized(&self, scale: bool) -> Self {
        let mut out = self.clone();
        for k in 0..self.d {
            let col = self.column(k);
            let mean = col.iter().sum::<f64>() / self.n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (self.n - 1) as f64;
            let sd = var.sqrt();
            let div = if scale && sd > 0.0 { sd } else { 1.0 };
            for i in 0..self.n {
                out.values[i * self.d + k] = (self.get(i, k) - mean) / div;
            }
        }
        out
    }
}

/// Position of coefficient `beta_{jk}` inside the `(d-1)`-vector of node `j`.
///
/// Coordinates run over `k = 0..d` skipping `j`.
#[inline]
pub fn slot(j: usize, k: usize) -> usize {
    debug_assert_ne!(j, k);
    if k < j {
        k
    } else {
        k - 1
    }
}

/// Inverse of [`slot`]: the partner node stored at position `s` of node `j`.
#[inline]
pub fn partner(j: usize, s: usize) -> usize {
    if s < j {
        s
    } else {
        s + 1
    }
}

/// Coefficient vector `beta_j` of one node, in canonical order (see [`slot`]).
#[derive(Debug, Clone, PartialEq)]
pub struct NodeCoef {
    pub node: usize,
    pub beta: Vec<f64>,
}

impl NodeCoef {
    pub fn zeros(node: usize, d: usize) -> Self {
        Self {
            node,
            beta: vec![0.0; d - 1],
        }
    }

    pub fn new(node: usize, beta: Vec<f64>) -> Result<Self> {
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(usage(format!("non-finite coefficient for node {node}")));
        }
        Ok(Self { node, beta })
    }

    /// Coefficient on the edge to node `k`.
    pub fn on(&self, k: usize) -> f64 {
        self.beta[slot(self.node, k)]
    }

    /// Copy with the coefficient on the edge to node `k` set to zero.
    pub fn with_zeroed(&self, k: usize) -> Self {
        let mut out = self.clone();
        out.beta[slot(self.node, k)] = 0.0;
        out
    }

    /// Coefficients without the `k` entry, canonical order.
    pub fn without(&self, k: usize) -> Vec<f64> {
        let s = slot(self.node, k);
        self.beta
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != s)
            .map(|(_, &b)| b)
            .collect()
    }

    /// Indices `k` with a nonzero coefficient.
    pub fn support(&self) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(s, _)| partner(self.node, s))
            .collect()
    }

    pub(crate) fn check(&self, data: &Dataset, j: usize) -> Result<()> {
        if j >= data.d() {
            return Err(usage(format!("node {j} out of range (d={})", data.d())));
        }
        if self.node != j {
            return Err(usage(format!(
                "coefficient vector belongs to node {}, not {j}",
                self.node
            )));
        }
        if self.beta.len() != data.d() - 1 {
            return Err(usage(format!(
                "coefficient vector has length {}, expected {}",
                self.beta.len(),
                data.d() - 1
            )));
        }
        Ok(())
    }
}

/// Reads a CSV with a header row and numeric cells.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| data(format!("cannot open {}: {e}", path.display())))?;
    read_csv(file)
}

pub fn read_csv(reader: impl Read) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| data(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let d = header.len();
    let mut values = Vec::new();
    let mut n = 0usize;
    for (r, record) in rdr.records().enumerate() {
        // data rows are numbered from 1; the header is line 1 of the file
        let row = r + 1;
        let record = record.map_err(|e| data(format!("row {row}: {e}")))?;
        if record.len() != d {
            return Err(data(format!(
                "row {row}: ragged row with {} fields, header has {d}",
                record.len()
            )));
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                data(format!(
                    "row {row}, column {c} ({}): non-numeric cell {cell:?}",
                    header[c]
                ))
            })?;
            if !v.is_finite() {
                return Err(data(format!(
                    "row {row}, column {c} ({}): non-finite value {cell:?}",
                    header[c]
                )));
            }
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(data("no data rows"));
    }
    if n < 2 {
        return Err(data(format!("need at least 2 data rows, found {n}")));
    }
    Dataset::new(values, n, d)?.with_column_names(header)
}

/// Writes the dataset as CSV with a header row (column labels).
pub fn write_csv(dataset: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<String> = (0..dataset.d()).map(|k| dataset.column_label(k)).collect();
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..dataset.n() {
        w.write_record(dataset.row(i).iter().map(|v| format_float(*v)))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest representation that round-trips through `f64::from_str`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_and_partner_are_inverse() {
        for j in 0..6 {
            for k in (0..6).filter(|&k| k != j) {
                assert_eq!(partner(j, slot(j, k)), k);
            }
        }
    }

    #[test]
    fn rejects_small_or_nonfinite() {
        assert!(Dataset::new(vec![1.0, 2.0], 1, 2).is_err());
        assert!(Dataset::new(vec![1.0; 2], 2, 1).is_err());
        assert!(Dataset::new(vec![1.0, f64::NAN, 0.0, 0.0], 2, 2).is_err());
    }

    #[test]
    fn csv_well_formed() {
        let text = "a,b\n1,2\n3,4\n5,6\n";
        let ds = read_csv(text.as_bytes()).unwrap();
        assert_eq!((ds.n(), ds.d()), (3, 2));
        assert_eq!(ds.column_names().unwrap(), ["a", "b"]);
        assert_eq!(ds.get(2, 1), 6.0);
    }

    #[test]
    fn csv_na_cell_is_named() {
        let text = "a,b\n1,2\n3,NA\n";
        let err = read_csv(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
        assert!(err.contains("column 1"), "{err}");
        assert!(err.contains("NA"), "{err}");
    }

    #[test]
    fn csv_header_only() {
        let err = read_csv("a,b\n".as_bytes()).unwrap_err().to_string();
        assert!(err.contains("no data rows"), "{err}");
    }

    #[test]
    fn csv_ragged() {
        let err = read_csv("a,b\n1,2\n3\n".as_bytes()).unwrap_err().to_string();
        assert!(err.contains("ragged"), "{err}");
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let ds = Dataset::new(vec![0.1, -2.5e-7, 1.0 / 3.0, 7.0], 2, 2).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values(), ds.values());
    }

    #[test]
    fn zeroed_and_without() {
        let c = NodeCoef::new(1, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(c.on(0), 1.0);
        assert_eq!(c.on(2), 2.0);
        assert_eq!(c.with_zeroed(2).beta, vec![1.0, 0.0, 3.0]);
        assert_eq!(c.without(2), vec![1.0, 3.0]);
        assert_eq!(c.support(), vec![0, 2, 3]);
    }
}
