//! Matrix files: headerless numeric CSV (one observation per row) and a raw
//! binary layout of one JSON header line followed by little-endian `f64`
//! values in row-major order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use blocksig_core::{DataMatrix, GridShape};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    /// By extension: `.bin` is binary, anything else CSV.
    #[default]
    Auto,
    Csv,
    Binary,
}

/// What to do with empty, `NA` or `NaN` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum NanPolicy {
    #[default]
    Reject,
    /// Replace by zero.
    Zero,
    /// Replace by the mean of the column's present values.
    ColumnMean,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub format: Format,
    pub nan: NanPolicy,
    /// Skip the first CSV line.
    pub header: bool,
    /// Attach this grid; must match the column count.
    pub grid: Option<GridShape>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BinaryHeader {
    n: usize,
    p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p2: Option<usize>,
}

fn resolve(path: &Path, f: Format) -> Format {
    match f {
        Format::Auto if path.extension().is_some_and(|e| e == "bin") => Format::Binary,
        Format::Auto => Format::Csv,
        f => f,
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "NAN")
}

pub fn load_matrix(path: &Path, opts: &LoadOptions) -> Result<DataMatrix> {
    let x = match resolve(path, opts.format) {
        Format::Binary => read_binary(path)?,
        _ => read_csv(path, opts)?,
    };
    match opts.grid {
        Some(g) => x.with_grid(g).map_err(|e| CliError::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        }),
        None => Ok(x),
    }
}

/// Parses CSV text; `path` only labels errors.
pub fn parse_csv<R: Read>(reader: R, path: &Path, opts: &LoadOptions) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let first_row = if opts.header { 2 } else { 1 };
    let mut values: Vec<f64> = Vec::new();
    let mut missing: Vec<(usize, usize)> = Vec::new();
    let mut p = None;
    let mut n = 0;
    for (r, rec) in rdr.records().enumerate() {
        let row = r + first_row;
        let rec = rec.map_err(|e| CliError::Format { path: path.to_path_buf(), msg: e.to_string() })?;
        let width = *p.get_or_insert(rec.len());
        if rec.len() != width {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                row,
                col: rec.len().min(width) + 1,
                msg: format!("row has {} cells, expected {width}", rec.len()),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            if is_missing(cell) {
                if opts.nan == NanPolicy::Reject {
                    return Err(CliError::Parse {
                        path: path.to_path_buf(),
                        row,
                        col: c + 1,
                        msg: format!("missing value {cell:?}"),
                    });
                }
                missing.push((n, c));
                values.push(0.0);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| CliError::Parse {
                path: path.to_path_buf(),
                row,
                col: c + 1,
                msg: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    row,
                    col: c + 1,
                    msg: format!("non-finite value {cell:?}"),
                });
            }
            values.push(v);
        }
        n += 1;
    }
    let p = p.unwrap_or(0);
    if n == 0 || p == 0 {
        return Err(CliError::Format { path: path.to_path_buf(), msg: "no data".into() });
    }
    if opts.nan == NanPolicy::ColumnMean && !missing.is_empty() {
        let mut sum = vec![0.0; p];
        let mut count = vec![n; p];
        for &(_, c) in &missing {
            count[c] -= 1;
        }
        for i in 0..n {
            for c in 0..p {
                sum[c] += values[i * p + c];
            }
        }
        for &(i, c) in &missing {
            if count[c] == 0 {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    row: i + first_row,
                    col: c + 1,
                    msg: "column has no values to impute from".into(),
                });
            }
            values[i * p + c] = sum[c] / count[c] as f64;
        }
    }
    DataMatrix::new(n, p, values).map_err(|e| CliError::Format { path: path.to_path_buf(), msg: e.to_string() })
}

fn read_csv(path: &Path, opts: &LoadOptions) -> Result<DataMatrix> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_csv(BufReader::new(f), path, opts)
}

fn read_binary(path: &Path) -> Result<DataMatrix> {
    let bad = |msg: String| CliError::Format { path: path.to_path_buf(), msg };
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut r = BufReader::new(f);
    let mut line = String::new();
    r.read_line(&mut line).map_err(|e| CliError::io(path, e))?;
    let h: BinaryHeader = serde_json::from_str(line.trim_end()).map_err(|e| bad(format!("header: {e}")))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| CliError::io(path, e))?;
    if bytes.len() != h.n * h.p * 8 {
        return Err(bad(format!("{} data bytes for a {} x {} matrix", bytes.len(), h.n, h.p)));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    let x = DataMatrix::new(h.n, h.p, values).map_err(|e| bad(e.to_string()))?;
    match (h.p1, h.p2) {
        (Some(p1), Some(p2)) => x.with_grid(GridShape::new(p1, p2)).map_err(|e| bad(e.to_string())),
        (None, None) => Ok(x),
        _ => Err(bad("header gives only one of p1, p2".into())),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

/// Writes shortest round-trip decimal representations, so loading the file
/// back gives the same bits.
pub fn save_csv(x: &DataMatrix, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    write_csv(x, &mut w).map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_csv<W: Write>(x: &DataMatrix, w: &mut W) -> std::io::Result<()> {
    for row in x.rows() {
        let mut first = true;
        for v in row {
            if !first {
                w.write_all(b",")?;
            }
            write!(w, "{v:?}")?;
            first = false;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_binary(x: &DataMatrix, path: &Path) -> Result<()> {
    let h = BinaryHeader {
        n: x.n(),
        p: x.p(),
        p1: x.grid().map(|g| g.p1),
        p2: x.grid().map(|g| g.p2),
    };
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    serde_json::to_writer(&mut w, &h).map_err(|e| CliError::io(path, e.into()))?;
    w.write_all(b"\n").map_err(io)?;
    for v in x.as_slice() {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn save_matrix(x: &DataMatrix, path: &Path, format: Format) -> Result<()> {
    match resolve(path, format) {
        Format::Binary => save_binary(x, path),
        _ => save_csv(x, path),
    }
}

/// Labels from a JSON file written by `cluster` (`{"labels": [...]}` or a
/// bare array) or a CSV/whitespace list of `1`/`-1`.
pub fn load_labels(path: &Path) -> Result<blocksig_core::LabelVector> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |msg: String| CliError::Format { path: path.to_path_buf(), msg };
    let raw: Vec<i8> = if text.trim_start().starts_with(['{', '[']) {
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let arr = v.get("labels").unwrap_or(&v);
        serde_json::from_value(arr.clone()).map_err(|e| bad(e.to_string()))?
    } else {
        text.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .enumerate()
            .map(|(k, s)| {
                s.parse::<i8>().map_err(|_| CliError::Parse {
                    path: path.to_path_buf(),
                    row: k + 1,
                    col: 1,
                    msg: format!("not a label: {s:?}"),
                })
            })
            .collect::<Result<_>>()?
    };
    blocksig_core::LabelVector::new(raw).map_err(|e| bad(e.to_string()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    write_text(path, &s)
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(dir.to_path_buf())
}
