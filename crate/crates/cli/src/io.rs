//! CSV ingestion and the flat files written per repetition.

use std::fs::File;
use std::path::Path;

use ndarray::Array2;
use vbvarsel::{DataMatrix, FitResult};

use crate::error::{CliError, Result};

/// Whether the first row holds column names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderMode {
    /// A header is assumed when any field of the first row is not a number.
    #[default]
    Auto,
    Present,
    Absent,
}

impl std::str::FromStr for HeaderMode {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "true" | "yes" => Ok(Self::Present),
            "false" | "no" => Ok(Self::Absent),
            other => Err(CliError::Config(format!(
                "input.header must be auto, true or false, got `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for HeaderMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::Present => "true",
            Self::Absent => "false",
        })
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn read_records(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let mut out = Vec::new();
    for (i, record) in reader(path)?.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        out.push((i + 1, record.iter().map(str::to_owned).collect()));
    }
    Ok(out)
}

/// Reads a comma-separated numeric table. Rows are observations and columns
/// covariates; numbers use a decimal point regardless of locale.
pub fn load_csv(path: &Path) -> Result<DataMatrix> {
    load_csv_with(path, HeaderMode::Auto)
}

pub fn load_csv_with(path: &Path, header: HeaderMode) -> Result<DataMatrix> {
    let mut records = read_records(path)?.into_iter().peekable();
    let names = match records.peek() {
        None => return Err(CliError::Data(format!("{}: no rows", path.display()))),
        Some((_, first)) => {
            let has_header = match header {
                HeaderMode::Present => true,
                HeaderMode::Absent => false,
                HeaderMode::Auto => first.iter().any(|cell| cell.parse::<f64>().is_err()),
            };
            if has_header {
                records.next().map(|(_, r)| r)
            } else {
                None
            }
        }
    };

    let mut width = names.as_ref().map(Vec::len);
    let mut values = Vec::new();
    let mut rows = 0;
    for (line, record) in records {
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(CliError::RaggedRow {
                line,
                expected,
                found: record.len(),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| CliError::ParseError {
                line,
                column: c + 1,
                cell: cell.clone(),
            })?;
            if !v.is_finite() {
                return Err(CliError::NonNumericCell {
                    line,
                    column: c + 1,
                    cell: cell.clone(),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    let values =
        Array2::from_shape_vec((rows, cols), values).map_err(|e| CliError::Data(e.to_string()))?;
    let data = DataMatrix::new(values)?;
    Ok(match names {
        Some(names) => data.with_column_names(names)?,
        None => data,
    })
}

/// Reads the last field of every row as a cluster label, skipping a header.
pub fn load_truth_labels(path: &Path) -> Result<Vec<usize>> {
    last_fields(path)?
        .into_iter()
        .enumerate()
        .filter_map(|(i, (line, cell))| match cell.parse::<usize>() {
            Ok(v) => Some(Ok(v)),
            Err(_) if i == 0 => None,
            Err(_) => Some(Err(CliError::ParseError {
                line,
                column: 0,
                cell,
            })),
        })
        .collect()
}

/// Reads the last field of every row as a relevance flag (`1`/`0` or
/// `true`/`false`), skipping a header.
pub fn load_truth_relevant(path: &Path) -> Result<Vec<bool>> {
    last_fields(path)?
        .into_iter()
        .enumerate()
        .filter_map(|(i, (line, cell))| match cell.as_str() {
            "1" | "true" => Some(Ok(true)),
            "0" | "false" => Some(Ok(false)),
            _ if i == 0 => None,
            _ => Some(Err(CliError::ParseError {
                line,
                column: 0,
                cell,
            })),
        })
        .collect()
}

fn last_fields(path: &Path) -> Result<Vec<(usize, String)>> {
    Ok(read_records(path)?
        .into_iter()
        .filter_map(|(line, mut r)| r.pop().map(|cell| (line, cell)))
        .collect())
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let fail = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    let mut w = writer(path)?;
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row).map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_assignments(path: &Path, labels: &[usize]) -> Result<()> {
    write_rows(
        path,
        &["observation_index", "label"],
        labels
            .iter()
            .enumerate()
            .map(|(n, l)| [n.to_string(), l.to_string()]),
    )
}

/// One row per covariate in the order of `names`; `c` and `selected` must
/// already be in that order.
pub fn write_selection(path: &Path, names: &[String], c: &[f64], selected: &[bool]) -> Result<()> {
    write_rows(
        path,
        &["covariate", "c_value", "selected"],
        names
            .iter()
            .zip(c)
            .zip(selected)
            .map(|((name, c), s)| [name.clone(), c.to_string(), u8::from(*s).to_string()]),
    )
}

pub fn write_elbo_trace(path: &Path, result: &FitResult) -> Result<()> {
    write_rows(
        path,
        &["iteration", "temperature", "elbo"],
        result
            .elbo_trace
            .iter()
            .zip(&result.temperature_trace)
            .enumerate()
            .map(|(i, (e, t))| [i.to_string(), t.to_string(), e.to_string()]),
    )
}

pub fn write_matrix(path: &Path, data: &DataMatrix) -> Result<()> {
    let header: Vec<String> = (0..data.j()).map(|j| data.column_label(j)).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        path,
        &header,
        data.values()
            .rows()
            .into_iter()
            .map(|row| row.iter().map(f64::to_string).collect::<Vec<_>>()),
    )
}

pub fn write_truth_relevant(path: &Path, names: &[String], relevant: &[bool]) -> Result<()> {
    write_rows(
        path,
        &["covariate", "relevant"],
        names
            .iter()
            .zip(relevant)
            .map(|(n, r)| [n.clone(), u8::from(*r).to_string()]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn header_row_becomes_column_names() {
        let f = file("a,b\n1,2\n3,4\n5,6\n");
        let data = load_csv(f.path()).unwrap();
        assert_eq!((data.n(), data.j()), (3, 2));
        assert_eq!(data.column_names().unwrap(), ["a", "b"]);
        assert_eq!(data.values()[[2, 1]], 6.0);
    }

    #[test]
    fn headerless_numeric_table() {
        let f = file("1.5,-2e-3\n3,4\n");
        let data = load_csv(f.path()).unwrap();
        assert_eq!((data.n(), data.j()), (2, 2));
        assert!(data.column_names().is_none());
        assert_eq!(data.values()[[0, 1]], -0.002);
    }

    #[test]
    fn short_row_is_ragged() {
        let f = file("a,b\n1,2\n3\n5,6\n");
        match load_csv(f.path()) {
            Err(CliError::RaggedRow {
                line,
                expected,
                found,
            }) => assert_eq!((line, expected, found), (3, 2, 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nan_cell_is_rejected() {
        let f = file("a,b\n1,2\n3,NaN\n");
        match load_csv(f.path()) {
            Err(CliError::NonNumericCell { line, column, .. }) => {
                assert_eq!((line, column), (3, 2))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn garbage_cell_reports_its_position() {
        let f = file("1,2\n3,x\n");
        match load_csv(f.path()) {
            Err(
                e @ CliError::ParseError {
                    line: 2, column: 2, ..
                },
            ) => assert_eq!(e.exit_code(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn forced_header_mode() {
        let f = file("1,2\n3,4\n5,6\n");
        let data = load_csv_with(f.path(), HeaderMode::Present).unwrap();
        assert_eq!(data.n(), 2);
        assert_eq!(data.column_names().unwrap(), ["1", "2"]);
    }

    #[test]
    fn truth_files_skip_headers() {
        let f = file("observation_index,label\n0,2\n1,0\n");
        assert_eq!(load_truth_labels(f.path()).unwrap(), vec![2, 0]);
        let f = file("covariate,relevant\na,1\nb,false\n");
        assert_eq!(load_truth_relevant(f.path()).unwrap(), vec![true, false]);
    }
}
