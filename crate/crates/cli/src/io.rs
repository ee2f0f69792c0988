use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use tlasso::linalg::Matrix;

use crate::error::{invalid, CliResult};

/// Reads a headed CSV of numbers, one column per covariate.
pub fn read_matrix(path: &Path) -> CliResult<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field.parse::<f64>().map_err(|_| {
                    invalid(format!(
                        "{}: row {} column {}: not a number: {field:?}",
                        path.display(),
                        i + 1,
                        j + 1
                    ))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(invalid(format!("{}: no data rows", path.display())));
    }
    Matrix::from_rows(&rows).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Reads a single-column response file.
pub fn read_vector(path: &Path) -> CliResult<Vec<f64>> {
    let m = read_matrix(path)?;
    if m.cols() != 1 {
        return Err(invalid(format!(
            "{}: expected one column, found {}",
            path.display(),
            m.cols()
        )));
    }
    Ok(m.column(0))
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let f = File::create(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

/// `index,beta`
pub fn write_estimate(path: &Path, beta: &[f64]) -> CliResult<()> {
    let mut w = create(path)?;
    writeln!(w, "index,beta")?;
    for (j, b) in beta.iter().enumerate() {
        writeln!(w, "{j},{b}")?;
    }
    w.flush()?;
    Ok(())
}

/// `lambda,b0,...,b{p-1}`
pub fn write_path(path: &Path, lambdas: &[f64], betas: &[Vec<f64>]) -> CliResult<()> {
    let mut w = create(path)?;
    let p = betas.first().map_or(0, |b| b.len());
    let header: Vec<String> = std::iter::once("lambda".to_string())
        .chain((0..p).map(|j| format!("b{j}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (l, b) in lambdas.iter().zip(betas) {
        let row: Vec<String> = std::iter::once(l.to_string())
            .chain(b.iter().map(|v| v.to_string()))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}
