//! CSV ingestion, train/test splitting and min-max scaling.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kernels::{product_kernel, KernelSpec};
use crate::learn::Task;

/// Parsed numeric table split into inputs and a target column.
#[derive(Debug, Clone, PartialEq)]
pub struct RawData {
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::ParseError {
        row,
        col,
        msg: format!("'{cell}' is not a finite number"),
    })
}

/// Reads a rectangular numeric CSV with a header row. Rows are numbered from
/// 1 (the header is row 0), columns from 0.
pub fn read_csv<R: Read>(reader: R, target_column: &str) -> Result<RawData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::ParseError { row: 0, col: 0, msg: e.to_string() })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let target = header.iter().position(|h| h == target_column).ok_or_else(|| Error::ParseError {
        row: 0,
        col: 0,
        msg: format!("no column named '{target_column}'"),
    })?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::ParseError { row, col: 0, msg: e.to_string() })?;
        if record.len() != header.len() {
            return Err(Error::ParseError {
                row,
                col: record.len().min(header.len()),
                msg: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let mut features = Vec::with_capacity(header.len() - 1);
        for (c, cell) in record.iter().enumerate() {
            let v = parse_cell(cell, row, c)?;
            if c == target {
                y.push(v);
            } else {
                features.push(v);
            }
        }
        x.push(features);
    }
    let feature_names = header.iter().enumerate().filter(|&(c, _)| c != target).map(|(_, h)| h.clone()).collect();
    Ok(RawData { feature_names, target_name: header[target].clone(), x, y })
}

/// Reads a CSV file; for classification the target must take exactly two values.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str, task: Task) -> Result<RawData> {
    let raw = read_csv(File::open(path)?, target_column)?;
    if task == Task::Classification {
        TargetEncoding::fit(task, &raw.y)?;
    }
    Ok(raw)
}

/// Reads a CSV with no target column (every column is an input).
pub fn read_inputs<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::ParseError { row: 0, col: 0, msg: e.to_string() })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut x = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::ParseError { row, col: 0, msg: e.to_string() })?;
        if record.len() != header.len() {
            return Err(Error::ParseError {
                row,
                col: record.len().min(header.len()),
                msg: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        x.push(record.iter().enumerate().map(|(c, cell)| parse_cell(cell, row, c)).collect::<Result<_>>()?);
    }
    Ok((header, x))
}

/// Writes inputs followed by the target column.
pub fn write_csv<W: Write>(writer: W, raw: &RawData) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut header = raw.feature_names.clone();
    header.push(raw.target_name.clone());
    w.write_record(&header).map_err(io)?;
    for (x, y) in raw.x.iter().zip(&raw.y) {
        let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-feature affine map onto `[0, 1]`, fit on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or_else(|| Error::InvalidData("no rows to fit".into()))?;
        let mut mins = vec![f64::INFINITY; dim];
        let mut maxs = vec![f64::NEG_INFINITY; dim];
        for r in rows {
            crate::error::check_dim(dim, r.len())?;
            for d in 0..dim {
                mins[d] = mins[d].min(r[d]);
                maxs[d] = maxs[d].max(r[d]);
            }
        }
        Ok(MinMaxScaler { mins, maxs })
    }

    /// Scales one row; values outside the fitted range are clamped and a
    /// constant feature maps to 0.5.
    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_dim(self.mins.len(), row.len())?;
        Ok(row
            .iter()
            .zip(self.mins.iter().zip(&self.maxs))
            .map(|(&v, (&lo, &hi))| if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 })
            .collect())
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

/// How raw targets map to model targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetEncoding {
    /// Affine map of `[min, max]` onto `[-1, 1]`.
    Range { min: f64, max: f64 },
    /// `negative → -1`, `positive → +1`.
    Binary { negative: f64, positive: f64 },
}

impl TargetEncoding {
    pub fn fit(task: Task, y: &[f64]) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::InvalidData("no targets".into()));
        }
        match task {
            Task::Regression => {
                let min = y.iter().copied().fold(f64::INFINITY, f64::min);
                let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Ok(TargetEncoding::Range { min, max })
            }
            Task::Classification => {
                let mut values: Vec<f64> = y.to_vec();
                values.sort_by(f64::total_cmp);
                values.dedup();
                if values.len() != 2 {
                    return Err(Error::InvalidData(format!(
                        "classification needs exactly two label values, found {}",
                        values.len()
                    )));
                }
                Ok(TargetEncoding::Binary { negative: values[0], positive: values[1] })
            }
        }
    }

    pub fn encode(&self, v: f64) -> Result<f64> {
        match *self {
            TargetEncoding::Range { min, max } => Ok(if max > min { 2.0 * (v - min) / (max - min) - 1.0 } else { 0.0 }),
            TargetEncoding::Binary { negative, positive } => {
                if v == positive {
                    Ok(1.0)
                } else if v == negative {
                    Ok(-1.0)
                } else {
                    Err(Error::InvalidData(format!("label {v} is neither {negative} nor {positive}")))
                }
            }
        }
    }

    pub fn decode(&self, v: f64) -> f64 {
        match *self {
            TargetEncoding::Range { min, max } => {
                if max > min {
                    (v + 1.0) / 2.0 * (max - min) + min
                } else {
                    min
                }
            }
            TargetEncoding::Binary { negative, positive } => {
                if v >= 0.0 {
                    positive
                } else {
                    negative
                }
            }
        }
    }
}

/// Scaled train/test split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub task: Task,
    pub x_train: Vec<Vec<f64>>,
    pub y_train: Vec<f64>,
    pub x_test: Vec<Vec<f64>>,
    pub y_test: Vec<f64>,
    pub scaler: Option<MinMaxScaler>,
    pub target: Option<TargetEncoding>,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.x_train.first().map_or(0, Vec::len)
    }

    pub fn n_train(&self) -> usize {
        self.x_train.len()
    }

    pub fn n_test(&self) -> usize {
        self.x_test.len()
    }
}

/// Random split with `train_fraction` of rows for training (at least one row
/// on each side), then scaling fit on the training rows only.
pub fn standardize(raw: &RawData, task: Task, train_fraction: f64, seed: u64) -> Result<Dataset> {
    let n = raw.x.len();
    if n < 2 {
        return Err(Error::InvalidData(format!("need at least 2 rows, got {n}")));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train_idx, test_idx) = order.split_at(n_train);

    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        (idx.iter().map(|&i| raw.x[i].clone()).collect(), idx.iter().map(|&i| raw.y[i]).collect())
    };
    let (xtr, ytr) = pick(train_idx);
    let (xte, yte) = pick(test_idx);

    let scaler = MinMaxScaler::fit(&xtr)?;
    let target = TargetEncoding::fit(task, &ytr)?;
    let encode = |ys: &[f64]| ys.iter().map(|&v| target.encode(v)).collect::<Result<Vec<_>>>();
    Ok(Dataset {
        name: raw.target_name.clone(),
        task,
        x_train: scaler.transform(&xtr)?,
        y_train: encode(&ytr)?,
        x_test: scaler.transform(&xte)?,
        y_test: encode(&yte)?,
        scaler: Some(scaler),
        target: Some(target),
    })
}

/// Regression task whose target lies in the RKHS of `kernel`:
/// `f*(x) = Σ_j c_j k(x, x_j)` with centers uniform in the cube, `c_j ~ U[-1, 1]`,
/// inputs uniform in `[0,1]^D` and Gaussian label noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticTask {
    pub kernel: KernelSpec,
    pub n_train: usize,
    pub n_test: usize,
    pub centers: usize,
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticTask {
    pub fn generate(&self) -> Result<Dataset> {
        let dim = self.kernel.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let centers: Vec<Vec<f64>> =
            (0..self.centers).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
        let coefs: Vec<f64> = (0..self.centers).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let noise = Normal::new(0.0, self.noise).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let target = |x: &[f64]| -> f64 {
            centers.iter().zip(&coefs).map(|(c, w)| w * product_kernel(&self.kernel, x, c)).sum()
        };
        let mut draw = |n: usize| -> (Vec<Vec<f64>>, Vec<f64>) {
            let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
            let y = x.iter().map(|p| target(p) + noise.sample(&mut rng)).collect();
            (x, y)
        };
        let (x_train, y_train) = draw(self.n_train);
        let (x_test, y_test) = draw(self.n_test);
        Ok(Dataset {
            name: "synthetic".into(),
            task: Task::Regression,
            x_train,
            y_train,
            x_test,
            y_test,
            scaler: None,
            target: None,
        })
    }
}
