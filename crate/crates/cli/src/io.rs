//! File plumbing: CSV matrices, frame discovery, atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use angemb_core::{DataMatrix, Error};
use nalgebra::DMatrix;

use crate::CliError;

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| io_error(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a CSV of samples (one per row). Lines starting with `#` are skipped.
pub fn read_csv(path: &Path) -> Result<DataMatrix, CliError> {
    let text = fs::read(path).map_err(|e| io_error(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_slice());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| data_error(format!("{}: {e}", path.display())))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field.parse::<f64>().map_err(|_| {
                    data_error(format!(
                        "{}: row {}, column {}: {field:?} is not a number",
                        path.display(),
                        i + 1,
                        j + 1
                    ))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Core(Error::EmptyInput));
    }
    Ok(DataMatrix::from_samples(&rows)?)
}

fn data_error(msg: String) -> CliError {
    CliError::Core(Error::InvalidData(msg))
}

/// Formats columns of `m` as CSV rows with round-trip exact numbers.
pub fn csv_bytes(m: &DMatrix<f64>, header: Option<&str>) -> Result<Vec<u8>, CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    if let Some(h) = header {
        writer
            .write_record([format!("# {h}")])
            .map_err(|e| data_error(e.to_string()))?;
    }
    for col in m.column_iter() {
        writer
            .write_record(col.iter().map(|v| v.to_string()))
            .map_err(|e| data_error(e.to_string()))?;
    }
    writer.into_inner().map_err(|e| data_error(e.to_string()))
}

/// Resolves `source` as a directory of `.pgm` files or a glob pattern.
pub fn frame_paths(source: &str) -> Result<Vec<PathBuf>, CliError> {
    let as_path = Path::new(source);
    let mut paths = Vec::new();
    if as_path.is_dir() {
        let entries = fs::read_dir(as_path).map_err(|e| io_error(as_path, e))?;
        for entry in entries {
            let path = entry.map_err(|e| io_error(as_path, e))?.path();
            if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
                paths.push(path);
            }
        }
    } else {
        let pattern = glob::glob(source).map_err(|e| CliError::Usage(format!("bad glob {source:?}: {e}")))?;
        for entry in pattern {
            paths.push(entry.map_err(|e| data_error(e.to_string()))?);
        }
    }
    if paths.is_empty() {
        return Err(CliError::Core(Error::EmptyInput));
    }
    paths.sort();
    Ok(paths)
}
