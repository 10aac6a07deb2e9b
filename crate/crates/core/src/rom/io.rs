use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{PolynomialModel, Provenance};
use crate::error::{check_dim, Error, Result};
use crate::fom::{format_float, parse_float};
use crate::polytensor::ORDERING_VERSION;

/// Metadata stored next to the operator CSVs of a model bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub degree: usize,
    pub reduced_dim: usize,
    pub input_dim: usize,
    pub provenance: Provenance,
    pub parameter: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub ordering: String,
    pub operator_files: Vec<String>,
    pub input_file: String,
}

fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn read_matrix(path: &Path, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::with_capacity(rows * cols);
    let mut count = 0;
    for line in text.lines() {
        if cols == 0 && line.is_empty() {
            count += 1;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(parse_float)
            .collect::<Result<Vec<f64>>>()?;
        check_dim("operator CSV columns", cols, row.len())?;
        values.extend(row);
        count += 1;
    }
    check_dim("operator CSV rows", rows, count)?;
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// Writes `A1.csv, ..., Al.csv, B.csv` (one matrix row per line) and
/// `manifest.json` into `dir`, creating it if needed.
pub fn write_bundle(
    dir: &Path,
    model: &PolynomialModel,
    seed: Option<u64>,
) -> Result<BundleManifest> {
    fs::create_dir_all(dir)?;
    let mut operator_files = Vec::with_capacity(model.degree());
    for (idx, op) in model.operators().iter().enumerate() {
        let name = format!("A{}.csv", idx + 1);
        write_matrix(&dir.join(&name), op)?;
        operator_files.push(name);
    }
    let input_file = "B.csv".to_string();
    write_matrix(&dir.join(&input_file), model.input_matrix())?;
    let manifest = BundleManifest {
        degree: model.degree(),
        reduced_dim: model.reduced_dim(),
        input_dim: model.input_dim(),
        provenance: model.provenance(),
        parameter: model.parameter().map(|p| p.to_vec()),
        seed,
        ordering: ORDERING_VERSION.to_string(),
        operator_files,
        input_file,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(manifest)
}

/// Reads a bundle written by [`write_bundle`].
pub fn read_bundle(dir: &Path) -> Result<(PolynomialModel, BundleManifest)> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: BundleManifest =
        serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    if manifest.ordering != ORDERING_VERSION {
        return Err(Error::Parse(format!(
            "unsupported monomial ordering {:?}",
            manifest.ordering
        )));
    }
    check_dim(
        "bundle operator files",
        manifest.degree,
        manifest.operator_files.len(),
    )?;
    let n = manifest.reduced_dim;
    let mut operators = Vec::with_capacity(manifest.degree);
    for (idx, name) in manifest.operator_files.iter().enumerate() {
        let cols = crate::polytensor::compressed_dim(n, idx + 1)?;
        operators.push(read_matrix(&dir.join(name), n, cols)?);
    }
    let input = read_matrix(&dir.join(&manifest.input_file), n, manifest.input_dim)?;
    let mut model = PolynomialModel::new(operators, input, manifest.provenance)?;
    if let Some(p) = &manifest.parameter {
        model = model.with_parameter(p.clone());
    }
    Ok((model, manifest))
}
