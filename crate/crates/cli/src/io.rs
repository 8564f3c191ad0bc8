//! Dataset ingestion, table output and all-or-nothing file writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Delimiter of every table a command writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Tsv,
}

impl TableFormat {
    pub fn parse(name: Option<&str>) -> Result<Self, CliError> {
        match name.unwrap_or("csv") {
            "csv" => Ok(TableFormat::Csv),
            "tsv" => Ok(TableFormat::Tsv),
            other => Err(CliError::Usage(format!(
                "format must be csv or tsv, got {other:?}"
            ))),
        }
    }

    fn delimiter(self) -> u8 {
        match self {
            TableFormat::Csv => b',',
            TableFormat::Tsv => b'\t',
        }
    }
}

/// Renders a header and rows. Floats use the shortest representation that
/// reads back to the same value, so output is byte-stable.
pub fn render_table(
    format: TableFormat,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<String, CliError> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(format.delimiter())
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let internal = |e: csv::Error| CliError::Numerical(format!("table encoding: {e}"));
    writer.write_record(header).map_err(internal)?;
    for row in rows {
        writer.write_record(row).map_err(internal)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Numerical(format!("table encoding: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::Numerical(format!("table encoding: {e}")))
}

/// Files produced by one command, committed together once everything has
/// been computed.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, String)>,
}

impl Outputs {
    pub fn add(&mut self, path: impl Into<PathBuf>, contents: String) {
        self.files.push((path.into(), contents));
    }

    /// Writes every file to a sibling temporary and renames them into place
    /// only after all writes succeeded. On failure the temporaries are
    /// removed and no target is touched.
    pub fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut staged = Vec::with_capacity(self.files.len());
        for (path, contents) in &self.files {
            match stage(path, contents) {
                Ok(tmp) => staged.push((tmp, path.clone())),
                Err(e) => {
                    for (tmp, _) in &staged {
                        let _ = fs::remove_file(tmp);
                    }
                    return Err(e);
                }
            }
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, path) in staged {
            fs::rename(&tmp, &path).map_err(|e| {
                let _ = fs::remove_file(&tmp);
                CliError::Usage(format!("cannot write {}: {e}", path.display()))
            })?;
            written.push(path);
        }
        Ok(written)
    }
}

fn stage(path: &Path, contents: &str) -> Result<PathBuf, CliError> {
    let name = path.file_name().ok_or_else(|| {
        CliError::Usage(format!("output path {} has no file name", path.display()))
    })?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp-{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let fail = |e: std::io::Error| CliError::Usage(format!("cannot write {}: {e}", path.display()));
    let mut file = fs::File::create(&tmp).map_err(fail)?;
    let written = file
        .write_all(contents.as_bytes())
        .and_then(|_| file.sync_all());
    if let Err(e) = written {
        let _ = fs::remove_file(&tmp);
        return Err(fail(e));
    }
    Ok(tmp)
}

/// Rows of a numeric CSV whose header must equal `columns`.
pub fn read_numeric_csv(
    path: &Path,
    columns: &[&[&str]],
) -> Result<(usize, Vec<Vec<f64>>), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Usage(format!("{}: line 1: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let shape = columns
        .iter()
        .position(|c| c.len() == header.len() && c.iter().zip(&header).all(|(a, b)| a == b))
        .ok_or_else(|| {
            let expected: Vec<String> = columns.iter().map(|c| c.join(",")).collect();
            CliError::Usage(format!(
                "{}: line 1: header {:?} is not one of {}",
                path.display(),
                header.join(","),
                expected.join(" or ")
            ))
        })?;
    let width = columns[shape].len();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Usage(format!("{}: line {line}: {e}", path.display()))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(CliError::Usage(format!(
                "{}: line {line}: expected {width} fields, found {}",
                path.display(),
                record.len()
            )));
        }
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        CliError::Usage(format!(
                            "{}: line {line}: not a finite number: {field:?}",
                            path.display()
                        ))
                    })
            })
            .collect::<Result<Vec<f64>, CliError>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Usage(format!("{}: no data rows", path.display())));
    }
    Ok((shape, rows))
}

/// Shortest round-trip text of `v`, in scientific notation outside
/// `[1e-4, 1e15)`. Both zeros print as `0`.
pub fn float(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".to_string()
    } else if (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_render_with_either_delimiter() {
        let rows = vec![
            vec![float(1.0), float(0.1)],
            vec![float(2.0), float(-3e-20)],
        ];
        let csv = render_table(TableFormat::Csv, &["i", "lambda"], &rows).unwrap();
        assert_eq!(csv, "i,lambda\n1,0.1\n2,-3e-20\n");
        let tsv = render_table(TableFormat::Tsv, &["i", "lambda"], &rows).unwrap();
        assert!(tsv.starts_with("i\tlambda\n1\t0.1\n"));
        assert!(TableFormat::parse(Some("xlsx")).is_err());
        assert_eq!(float(-0.0), "0");
    }

    #[test]
    fn failed_commit_leaves_no_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut outputs = Outputs::default();
        outputs.add(dir.path().join("a.csv"), "a\n".into());
        outputs.add(dir.path().join("missing").join("b.csv"), "b\n".into());
        assert!(outputs.commit().is_err());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
