//! Observational datasets and the CSV interchange formats.
//!
//! The whole crate works off one immutable container, [`ObsDataset`]: `n` rows
//! of a covariate vector `X_i ∈ ℝ^d`, a binary treatment `T_i`, an outcome
//! `Y_i`, an optional known nominal propensity `e₁(X_i) = P(T=1 | X_i)`, and —
//! for simulated data — the ground truth both potential outcomes and the
//! hidden confounder that real data never reveals.
//!
//! CSV is the sole interchange format. Datasets use columns `x0..x{d-1}, t, y`
//! with optional `e1` and `y0, y1, u`; interval curves use
//! `x0..x{k-1}, gamma, mu0_lo, mu0_hi, mu1_lo, mu1_hi, tau_lo, tau_hi`.
//! Numbers are written in shortest round-trip decimal form, so a write/read
//! cycle reproduces every float bit for bit. Lines starting with `#` are
//! treated as comments.

use std::fmt::Write as _;
use std::path::Path;

use crate::bounds::{Bands, IntervalCurve};
use crate::error::{Error, Result};

/// Ground truth carried by simulated datasets: both potential outcomes and
/// the binary confounder that drove treatment selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    /// Potential outcome under control, `Y_i(0)`.
    pub y0: Vec<f64>,
    /// Potential outcome under treatment, `Y_i(1)`.
    pub y1: Vec<f64>,
    /// Unobserved binary confounder `u_i`.
    pub u: Vec<u8>,
}

/// An immutable observational dataset.
///
/// Construction validates every documented invariant (binary treatments,
/// finite numerics, both arms nonempty, propensities strictly inside (0,1),
/// and — when ground truth is present — consistency `Y_i = Y_i(T_i)`).
/// After that the dataset is read-only and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsDataset {
    n: usize,
    d: usize,
    x: Vec<f64>, // row-major n×d
    t: Vec<u8>,
    y: Vec<f64>,
    e1_known: Option<Vec<f64>>,
    truth: Option<SimTruth>,
}

impl ObsDataset {
    /// Builds a dataset from raw parts, validating all invariants.
    ///
    /// `x` is row-major with `d` columns; its length must be `t.len() * d`.
    pub fn from_parts(
        x: Vec<f64>,
        d: usize,
        t: Vec<u8>,
        y: Vec<f64>,
        e1_known: Option<Vec<f64>>,
        truth: Option<SimTruth>,
    ) -> Result<Self> {
        let n = t.len();
        if n == 0 {
            return Err(Error::Validation("dataset has no rows".into()));
        }
        if d == 0 {
            return Err(Error::Validation("dataset has no covariate columns".into()));
        }
        if x.len() != n * d {
            return Err(Error::Validation(format!(
                "covariate matrix has {} entries, expected {n}×{d} = {}",
                x.len(),
                n * d
            )));
        }
        if y.len() != n {
            return Err(Error::Validation(format!(
                "outcome array has length {}, expected {n}",
                y.len()
            )));
        }
        for (i, &ti) in t.iter().enumerate() {
            if ti > 1 {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("treatment must be 0 or 1, got {ti}"),
                });
            }
        }
        for (i, &yi) in y.iter().enumerate() {
            if !yi.is_finite() {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("outcome is not finite ({yi})"),
                });
            }
        }
        for (i, &xi) in x.iter().enumerate() {
            if !xi.is_finite() {
                return Err(Error::Parse {
                    row: i / d + 1,
                    message: format!("covariate is not finite ({xi})"),
                });
            }
        }
        if let Some(e1) = &e1_known {
            if e1.len() != n {
                return Err(Error::Validation(format!(
                    "propensity array has length {}, expected {n}",
                    e1.len()
                )));
            }
            for (i, &e) in e1.iter().enumerate() {
                if !(e > 0.0 && e < 1.0) {
                    return Err(Error::Parse {
                        row: i + 1,
                        message: format!("propensity must lie strictly in (0,1), got {e}"),
                    });
                }
            }
        }
        if let Some(truth) = &truth {
            if truth.y0.len() != n || truth.y1.len() != n || truth.u.len() != n {
                return Err(Error::Validation(
                    "ground-truth arrays must match the dataset length".into(),
                ));
            }
            for i in 0..n {
                let observed = if t[i] == 1 { truth.y1[i] } else { truth.y0[i] };
                if y[i] != observed {
                    return Err(Error::Validation(format!(
                        "row {}: observed outcome disagrees with the stated potential outcome",
                        i + 1
                    )));
                }
            }
        }
        if !t.iter().any(|&ti| ti == 0) {
            return Err(Error::Validation("empty control arm".into()));
        }
        if !t.iter().any(|&ti| ti == 1) {
            return Err(Error::Validation("empty treated arm".into()));
        }
        Ok(Self { n, d, x, t, y, e1_known, truth })
    }

    /// Number of rows.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Covariate dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Row-major covariate matrix, length `n×d`.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Covariate vector of row `i`.
    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    /// Treatment indicators.
    pub fn t(&self) -> &[u8] {
        &self.t
    }

    /// Outcomes.
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Known nominal propensities `P(T=1 | X_i)`, when supplied.
    pub fn e1_known(&self) -> Option<&[f64]> {
        self.e1_known.as_deref()
    }

    /// Simulation ground truth, when supplied.
    pub fn truth(&self) -> Option<&SimTruth> {
        self.truth.as_ref()
    }

    /// Indices of rows in the given arm.
    pub fn arm_indices(&self, arm: u8) -> Vec<usize> {
        (0..self.n).filter(|&i| self.t[i] == arm).collect()
    }

    /// `(min, max)` of covariate column `j`.
    pub fn column_range(&self, j: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let v = self.x[i * self.d + j];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Writes the dataset as CSV, including `e1` and ground-truth columns when
    /// present. The output round-trips bit for bit through [`load_csv`].
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for j in 0..self.d {
            let _ = write!(out, "x{j},");
        }
        out.push_str("t,y");
        if self.e1_known.is_some() {
            out.push_str(",e1");
        }
        if self.truth.is_some() {
            out.push_str(",y0,y1,u");
        }
        out.push('\n');
        for i in 0..self.n {
            for j in 0..self.d {
                let _ = write!(out, "{},", self.x[i * self.d + j]);
            }
            let _ = write!(out, "{},{}", self.t[i], self.y[i]);
            if let Some(e1) = &self.e1_known {
                let _ = write!(out, ",{}", e1[i]);
            }
            if let Some(truth) = &self.truth {
                let _ = write!(out, ",{},{},{}", truth.y0[i], truth.y1[i], truth.u[i]);
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Maps dataset roles to CSV column names.
///
/// The defaults are the documented interchange convention: covariates
/// `x0..x{d-1}`, treatment `t`, outcome `y`, optional propensity `e1` and
/// ground-truth columns `y0`, `y1`, `u`.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    /// Prefix of the covariate columns; column `j` is `{prefix}{j}`.
    pub covariate_prefix: String,
    /// Treatment column name.
    pub treatment: String,
    /// Outcome column name.
    pub outcome: String,
    /// Known-propensity column name (optional in the file).
    pub propensity: String,
    /// Control potential-outcome column name (optional in the file).
    pub potential_control: String,
    /// Treated potential-outcome column name (optional in the file).
    pub potential_treated: String,
    /// Confounder column name (optional in the file).
    pub confounder: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            covariate_prefix: "x".into(),
            treatment: "t".into(),
            outcome: "y".into(),
            propensity: "e1".into(),
            potential_control: "y0".into(),
            potential_treated: "y1".into(),
            confounder: "u".into(),
        }
    }
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
        row,
        message: format!("column `{column}`: cannot parse `{raw}` as a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            message: format!("column `{column}`: value is not finite ({v})"),
        });
    }
    Ok(v)
}

fn parse_binary(raw: &str, row: usize, column: &str) -> Result<u8> {
    let v = parse_cell(raw, row, column)?;
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(Error::Parse {
            row,
            message: format!("column `{column}` must be 0 or 1, got {raw}"),
        })
    }
}

/// Loads an [`ObsDataset`] from CSV.
///
/// The covariate dimension is discovered from the header: columns
/// `{prefix}0, {prefix}1, …` must be present contiguously from zero. Optional
/// columns (`e1` and the ground-truth trio) are picked up when all of their
/// names appear. Row order is preserved.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<ObsDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);

    let mut x_cols = Vec::new();
    while let Some(idx) = find(&format!("{}{}", schema.covariate_prefix, x_cols.len())) {
        x_cols.push(idx);
    }
    if x_cols.is_empty() {
        return Err(Error::Schema { column: format!("{}0", schema.covariate_prefix) });
    }
    let t_col = find(&schema.treatment).ok_or_else(|| Error::Schema {
        column: schema.treatment.clone(),
    })?;
    let y_col = find(&schema.outcome).ok_or_else(|| Error::Schema {
        column: schema.outcome.clone(),
    })?;
    let e1_col = find(&schema.propensity);
    let truth_cols = match (
        find(&schema.potential_control),
        find(&schema.potential_treated),
        find(&schema.confounder),
    ) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        (None, None, None) => None,
        _ => {
            return Err(Error::Validation(format!(
                "ground-truth columns `{}`, `{}`, `{}` must appear together",
                schema.potential_control, schema.potential_treated, schema.confounder
            )))
        }
    };

    let d = x_cols.len();
    let mut x = Vec::new();
    let mut t = Vec::new();
    let mut y = Vec::new();
    let mut e1 = e1_col.map(|_| Vec::new());
    let mut truth = truth_cols.map(|_| SimTruth { y0: Vec::new(), y1: Vec::new(), u: Vec::new() });

    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 1;
        let record = record?;
        let cell = |idx: usize| -> &str { record.get(idx).unwrap_or("") };
        for &c in &x_cols {
            x.push(parse_cell(cell(c), row, &headers[c])?);
        }
        t.push(parse_binary(cell(t_col), row, &schema.treatment)?);
        y.push(parse_cell(cell(y_col), row, &schema.outcome)?);
        if let (Some(e1), Some(c)) = (&mut e1, e1_col) {
            e1.push(parse_cell(cell(c), row, &schema.propensity)?);
        }
        if let (Some(truth), Some((c0, c1, cu))) = (&mut truth, truth_cols) {
            truth.y0.push(parse_cell(cell(c0), row, &schema.potential_control)?);
            truth.y1.push(parse_cell(cell(c1), row, &schema.potential_treated)?);
            truth.u.push(parse_binary(cell(cu), row, &schema.confounder)?);
        }
    }

    ObsDataset::from_parts(x, d, t, y, e1, truth)
}

/// Writes an interval curve as CSV: header
/// `x0..x{k-1},gamma,mu0_lo,mu0_hi,mu1_lo,mu1_hi,tau_lo,tau_hi`, one row per
/// (grid point, Γ) in grid-major order with Γ ascending. Grid points whose
/// evaluation failed are simply absent from the output.
pub fn write_interval_csv(curve: &IntervalCurve, path: &Path) -> Result<()> {
    if curve.grid().is_empty() {
        return Err(Error::Validation("cannot write an empty interval curve".into()));
    }
    let k = curve.grid()[0].len();
    let mut out = String::new();
    for j in 0..k {
        let _ = write!(out, "x{j},");
    }
    out.push_str("gamma,mu0_lo,mu0_hi,mu1_lo,mu1_hi,tau_lo,tau_hi\n");
    for (p, point) in curve.grid().iter().enumerate() {
        for (g, &gamma) in curve.gammas().iter().enumerate() {
            let Some(bands) = curve.cell(p, g) else { continue };
            for coord in point {
                let _ = write!(out, "{coord},");
            }
            let _ = writeln!(
                out,
                "{gamma},{},{},{},{},{},{}",
                bands.mu0.0, bands.mu0.1, bands.mu1.0, bands.mu1.1, bands.tau.0, bands.tau.1
            );
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads an interval curve back from the CSV produced by
/// [`write_interval_csv`]. Grid points are recovered in file order; the Γ list
/// is the sorted union of the levels seen; combinations absent from the file
/// stay absent in the curve.
pub fn load_interval_csv(path: &Path) -> Result<IntervalCurve> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let mut k = 0;
    while headers.iter().any(|h| h == format!("x{k}")) {
        k += 1;
    }
    if k == 0 {
        return Err(Error::Schema { column: "x0".into() });
    }
    for required in ["gamma", "mu0_lo", "mu0_hi", "mu1_lo", "mu1_hi", "tau_lo", "tau_hi"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::Schema { column: required.into() });
        }
    }
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let cols: Vec<usize> = (0..k).map(|j| col(&format!("x{j}"))).collect();
    let gamma_col = col("gamma");
    let band_cols = [
        col("mu0_lo"),
        col("mu0_hi"),
        col("mu1_lo"),
        col("mu1_hi"),
        col("tau_lo"),
        col("tau_hi"),
    ];

    let mut rows: Vec<(Vec<f64>, f64, Bands)> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 1;
        let record = record?;
        let cell = |idx: usize| -> &str { record.get(idx).unwrap_or("") };
        let point: Vec<f64> = cols
            .iter()
            .map(|&c| parse_cell(cell(c), row, &headers[c]))
            .collect::<Result<_>>()?;
        let gamma = parse_cell(cell(gamma_col), row, "gamma")?;
        let v: Vec<f64> = band_cols
            .iter()
            .map(|&c| parse_cell(cell(c), row, &headers[c]))
            .collect::<Result<_>>()?;
        rows.push((point, gamma, Bands {
            mu0: (v[0], v[1]),
            mu1: (v[2], v[3]),
            tau: (v[4], v[5]),
        }));
    }
    if rows.is_empty() {
        return Err(Error::Validation("interval CSV contains no rows".into()));
    }

    let mut grid: Vec<Vec<f64>> = Vec::new();
    for (point, _, _) in &rows {
        if !grid.contains(point) {
            grid.push(point.clone());
        }
    }
    let mut gammas: Vec<f64> = Vec::new();
    for (_, gamma, _) in &rows {
        if !gammas.contains(gamma) {
            gammas.push(*gamma);
        }
    }
    gammas.sort_by(|a, b| a.total_cmp(b));

    let mut cells: Vec<Option<Bands>> = vec![None; grid.len() * gammas.len()];
    for (point, gamma, bands) in rows {
        let p = grid.iter().position(|q| *q == point).unwrap();
        let g = gammas.iter().position(|&q| q == gamma).unwrap();
        cells[p * gammas.len() + g] = Some(bands);
    }
    IntervalCurve::from_cells(grid, gammas, cells, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write(path: &Path, text: &str) {
        std::fs::write(path, text).unwrap();
    }

    #[test]
    fn minimal_well_formed_file_loads() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write(&p, "x0,t,y\n0.1,0,1.0\n0.2,1,2.0\n0.3,1,3.0\n");
        let data = load_csv(&p, &CsvSchema::default()).unwrap();
        assert_eq!(data.n(), 3);
        assert_eq!(data.d(), 1);
        assert_eq!(data.t(), &[0, 1, 1]);
    }

    #[test]
    fn non_binary_treatment_cites_the_row() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write(
            &p,
            "x0,t,y\n0.1,0,1.0\n0.2,1,2.0\n0.3,1,3.0\n0.4,0,4.0\n0.5,2,5.0\n",
        );
        let err = load_csv(&p, &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 5, .. }), "{err}");
    }

    #[test]
    fn single_arm_is_rejected() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write(&p, "x0,t,y\n0.1,1,1.0\n0.2,1,2.0\n");
        let err = load_csv(&p, &CsvSchema::default()).unwrap_err();
        assert!(err.to_string().contains("empty control arm"), "{err}");
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write(&p, "x0,y\n0.1,1.0\n");
        let err = load_csv(&p, &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::Schema { ref column } if column == "t"), "{err}");
    }

    #[test]
    fn comment_lines_are_ignored() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write(&p, "x0,t,y\n# a comment row\n0.1,0,1.0\n0.2,1,2.0\n");
        let data = load_csv(&p, &CsvSchema::default()).unwrap();
        assert_eq!(data.n(), 2);
    }

    #[test]
    fn dataset_round_trips_bit_for_bit() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let x = vec![0.1, -1.75, std::f64::consts::PI, 2.0_f64.powi(-40), 1e300, -3.25];
        let t = vec![0, 1, 0, 1, 1, 0];
        let y = vec![1.5, -2.0, 0.0, 1.0 / 3.0, -1e-12, 7.0];
        let data = ObsDataset::from_parts(x.clone(), 1, t.clone(), y.clone(), None, None).unwrap();
        data.write_csv(&p).unwrap();
        let back = load_csv(&p, &CsvSchema::default()).unwrap();
        assert_eq!(back.x(), &x[..]);
        assert_eq!(back.t(), &t[..]);
        assert_eq!(back.y(), &y[..]);
    }

    #[test]
    fn truth_columns_must_be_complete() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write(&p, "x0,t,y,y0\n0.1,0,1.0,1.0\n0.2,1,2.0,0.0\n");
        let err = load_csv(&p, &CsvSchema::default()).unwrap_err();
        assert!(err.to_string().contains("must appear together"), "{err}");
    }

    #[test]
    fn truth_consistency_is_enforced() {
        let truth = SimTruth { y0: vec![1.0, 5.0], y1: vec![3.0, 4.0], u: vec![0, 1] };
        let err = ObsDataset::from_parts(
            vec![0.0, 1.0],
            1,
            vec![0, 1],
            vec![1.0, 9.0], // row 2 observed 9.0 but Y(1) = 4.0
            None,
            Some(truth),
        )
        .unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }
}
