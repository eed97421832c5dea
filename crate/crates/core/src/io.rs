//! CSV and JSON exchange formats.
//!
//! Numbers are written with 17 significant digits so every value reads back
//! bit-for-bit. Outputs go to a temporary sibling first and are renamed into
//! place.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::BasisConfig;
use crate::error::{FslmError, Result};
use crate::sampler::Chain;
use crate::simgen::{SimulatedDataset, SimulationSpec};
use crate::spatial::SpatialWeights;

pub const CURVES_FILE: &str = "curves.csv";
pub const RESPONSE_FILE: &str = "response.csv";
pub const WEIGHTS_FILE: &str = "weights.csv";
pub const TRUTH_FILE: &str = "truth.json";

/// 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write `bytes` to `path` via a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| FslmError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| FslmError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| FslmError::io(path, e))
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    w.into_inner().expect("flushing to memory")
}

fn read_csv(path: &Path) -> Result<(csv::StringRecord, Vec<csv::StringRecord>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let rows = r
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| csv_error(path, e))?;
    Ok((header, rows))
}

fn csv_error(path: &Path, e: csv::Error) -> FslmError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => FslmError::io(path, io),
        other => FslmError::parse(path, format!("{other:?}")),
    }
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| FslmError::parse(path, format!("line {line}: {field:?} is not a number")))
}

fn parse_index(path: &Path, line: usize, field: &str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| FslmError::parse(path, format!("line {line}: {field:?} is not an index")))
}

/// Rows `id,<x at t_1>,…` under a header `id,t=<t_1>,…`.
pub fn write_curves(path: &Path, t_grid: &[f64], curves: &DMatrix<f64>) -> Result<()> {
    let header: Vec<String> = std::iter::once("id".to_string())
        .chain(t_grid.iter().map(|t| format!("t={t}")))
        .collect();
    let rows = (0..curves.nrows()).map(|i| {
        std::iter::once(i.to_string())
            .chain(curves.row(i).iter().map(|&v| fmt_f64(v)))
            .collect()
    });
    write_atomic(path, &csv_bytes(&header, rows))
}

pub fn read_curves(path: &Path) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let (header, rows) = read_csv(path)?;
    if header.len() < 2 || &header[0] != "id" {
        return Err(FslmError::parse(path, "expected header id,t=...,t=..."));
    }
    let t_grid = header
        .iter()
        .skip(1)
        .map(|h| {
            h.strip_prefix("t=")
                .ok_or_else(|| FslmError::parse(path, format!("bad grid column {h:?}")))
                .and_then(|v| parse_f64(path, 1, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut curves = DMatrix::zeros(rows.len(), t_grid.len());
    for (i, row) in rows.iter().enumerate() {
        let line = i + 2;
        if row.len() != t_grid.len() + 1 {
            return Err(FslmError::parse(
                path,
                format!("line {line}: expected {} fields", t_grid.len() + 1),
            ));
        }
        if parse_index(path, line, &row[0])? != i {
            return Err(FslmError::parse(
                path,
                format!("line {line}: ids must run 0, 1, 2, ..."),
            ));
        }
        for j in 0..t_grid.len() {
            curves[(i, j)] = parse_f64(path, line, &row[j + 1])?;
        }
    }
    Ok((t_grid, curves))
}

/// Rows `id,y`.
pub fn write_response(path: &Path, y: &DVector<f64>) -> Result<()> {
    let header = ["id".to_string(), "y".to_string()];
    let rows = y.iter().enumerate().map(|(i, &v)| vec![i.to_string(), fmt_f64(v)]);
    write_atomic(path, &csv_bytes(&header, rows))
}

pub fn read_response(path: &Path) -> Result<DVector<f64>> {
    let (header, rows) = read_csv(path)?;
    if header.len() != 2 || &header[0] != "id" {
        return Err(FslmError::parse(path, "expected header id,y"));
    }
    let mut y = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let line = i + 2;
        if row.len() != 2 || parse_index(path, line, &row[0])? != i {
            return Err(FslmError::parse(path, format!("line {line}: expected {i},<value>")));
        }
        y.push(parse_f64(path, line, &row[1])?);
    }
    Ok(DVector::from_vec(y))
}

/// Rows `i,j,w` for every nonzero weight.
pub fn write_weights(path: &Path, w: &SpatialWeights) -> Result<()> {
    let header = ["i".to_string(), "j".to_string(), "w".to_string()];
    let rows = w
        .triplets()
        .into_iter()
        .map(|(i, j, v)| vec![i.to_string(), j.to_string(), fmt_f64(v)]);
    write_atomic(path, &csv_bytes(&header, rows))
}

/// Reads `i,j,w` triplets for `n` units.
pub fn read_weights(path: &Path, n: usize) -> Result<SpatialWeights> {
    let (header, rows) = read_csv(path)?;
    if header.iter().collect::<Vec<_>>() != ["i", "j", "w"] {
        return Err(FslmError::parse(path, "expected header i,j,w"));
    }
    let triplets = rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let line = r + 2;
            if row.len() != 3 {
                return Err(FslmError::parse(path, format!("line {line}: expected 3 fields")));
            }
            Ok((
                parse_index(path, line, &row[0])?,
                parse_index(path, line, &row[1])?,
                parse_f64(path, line, &row[2])?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    SpatialWeights::from_triplets(n, &triplets)
}

/// Undirected edges from rows `i,j`.
pub fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let (header, rows) = read_csv(path)?;
    if header.iter().collect::<Vec<_>>() != ["i", "j"] {
        return Err(FslmError::parse(path, "expected header i,j"));
    }
    rows.iter()
        .enumerate()
        .map(|(r, row)| {
            let line = r + 2;
            if row.len() != 2 {
                return Err(FslmError::parse(path, format!("line {line}: expected 2 fields")));
            }
            Ok((parse_index(path, line, &row[0])?, parse_index(path, line, &row[1])?))
        })
        .collect()
}

/// Generating parameters of a simulated bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub rho: f64,
    pub sigma2: f64,
    pub beta: Vec<f64>,
    pub gamma_coef: Vec<f64>,
    pub basis: BasisConfig,
    pub simulation: SimulationSpec,
}

impl Truth {
    pub fn new(spec: &SimulationSpec, basis: BasisConfig, dataset: &SimulatedDataset) -> Self {
        Self {
            rho: dataset.true_theta.rho,
            sigma2: dataset.true_theta.sigma2,
            beta: dataset.true_theta.beta.iter().copied().collect(),
            gamma_coef: dataset.true_gamma_coef.iter().copied().collect(),
            basis,
            simulation: spec.clone(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| FslmError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| FslmError::parse(path, e.to_string()))
}

/// Rows `iter,beta_1,…,beta_k,sigma2,rho,accepted` for every stored draw.
pub fn chain_csv(chain: &Chain) -> Vec<u8> {
    let k = chain.k();
    let header: Vec<String> = std::iter::once("iter".to_string())
        .chain((1..=k).map(|j| format!("beta_{j}")))
        .chain(["sigma2", "rho", "accepted"].map(String::from))
        .collect();
    let rows = (0..chain.len()).map(|r| {
        let mut row = Vec::with_capacity(k + 4);
        row.push(((r + 1) * chain.thin).to_string());
        row.extend(chain.draws_beta.row(r).iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(chain.draws_sigma2[r]));
        row.push(fmt_f64(chain.draws_rho[r]));
        row.push(u8::from(chain.accepted[r]).to_string());
        row
    });
    csv_bytes(&header, rows)
}

pub fn write_chain(path: &Path, chain: &Chain) -> Result<()> {
    write_atomic(path, &chain_csv(chain))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::{grid_contiguity, row_standardize, Contiguity};

    fn scratch(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("fslm-io-{}-{name}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn curves_round_trip() {
        let dir = scratch("curves");
        let t = vec![0.0, 0.5, 1.25];
        let x = DMatrix::from_fn(4, 3, |i, j| (i as f64 + 1.0) / (j as f64 + 3.0));
        let path = dir.join(CURVES_FILE);
        write_curves(&path, &t, &x).unwrap();
        let (t2, x2) = read_curves(&path).unwrap();
        assert_eq!(t, t2);
        assert_eq!(x, x2);
        assert!(!dir.join("curves.csv.tmp").exists());
    }

    #[test]
    fn response_and_weights_round_trip() {
        let dir = scratch("rw");
        let y = DVector::from_fn(9, |i, _| (i as f64).sin());
        write_response(&dir.join(RESPONSE_FILE), &y).unwrap();
        assert_eq!(read_response(&dir.join(RESPONSE_FILE)).unwrap(), y);

        let w = row_standardize(&grid_contiguity(3, 3, Contiguity::Queen).unwrap());
        write_weights(&dir.join(WEIGHTS_FILE), &w).unwrap();
        let w2 = read_weights(&dir.join(WEIGHTS_FILE), 9).unwrap();
        assert_eq!(w, w2);
        assert!(w2.row_standardized());
    }

    #[test]
    fn edges_parse_and_errors_carry_line_numbers() {
        let dir = scratch("edges");
        let path = dir.join("edges.csv");
        fs::write(&path, "i,j\n0,1\n1,2\n").unwrap();
        assert_eq!(read_edges(&path).unwrap(), vec![(0, 1), (1, 2)]);
        fs::write(&path, "i,j\n0,1\n1,x\n").unwrap();
        let err = read_edges(&path).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        let missing = read_edges(&dir.join("nope.csv")).unwrap_err();
        assert!(matches!(missing, FslmError::Io { .. }));
    }

    #[test]
    fn truth_json_round_trip() {
        let dir = scratch("truth");
        let spec = SimulationSpec::default();
        let sim = crate::simgen::simulate(&spec).unwrap();
        let truth = Truth::new(&spec, sim.sample.basis().config(), &sim.dataset);
        write_json(&dir.join(TRUTH_FILE), &truth).unwrap();
        let back: Truth = read_json(&dir.join(TRUTH_FILE)).unwrap();
        assert_eq!(back, truth);
    }
}
