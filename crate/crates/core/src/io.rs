//! Problem files: MatrixMarket dense `array real general` and plain CSV.
//!
//! Both formats store the single `m × (n+1)` array `[A b]`; the last column
//! is the right-hand side. Values are written with 17 significant digits so
//! a save/load cycle reproduces every `f64` bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Result, TlsError};
use crate::problem::TlsProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemFormat {
    MatrixMarket,
    Csv,
}

impl ProblemFormat {
    /// `.mtx`/`.mm` select MatrixMarket, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("mtx") || ext.eq_ignore_ascii_case("mm") => {
                ProblemFormat::MatrixMarket
            }
            _ => ProblemFormat::Csv,
        }
    }
}

impl FromStr for ProblemFormat {
    type Err = TlsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mm" | "mtx" | "matrixmarket" | "matrixmarket-dense" => Ok(ProblemFormat::MatrixMarket),
            "csv" => Ok(ProblemFormat::Csv),
            other => Err(TlsError::InvalidArgument(format!("unknown problem format '{other}'"))),
        }
    }
}

pub fn load_problem(path: &Path, format: ProblemFormat) -> Result<TlsProblem> {
    let text = fs::read_to_string(path)?;
    let label = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("problem")
        .to_string();
    let ab = match format {
        ProblemFormat::MatrixMarket => parse_matrix_market(&text)?,
        ProblemFormat::Csv => parse_csv(&text)?,
    };
    TlsProblem::from_augmented(&ab, label)
}

pub fn save_problem(problem: &TlsProblem, path: &Path, format: ProblemFormat) -> Result<()> {
    let ab = problem.augmented();
    let text = match format {
        ProblemFormat::MatrixMarket => write_matrix_market(&ab),
        ProblemFormat::Csv => write_csv(&ab),
    };
    let mut file = fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

/// Format with 17 significant digits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_value(token: &str) -> Result<f64> {
    let v: f64 = token
        .trim()
        .parse()
        .map_err(|_| TlsError::Parse(format!("not a number: '{}'", token.trim())))?;
    if !v.is_finite() {
        return Err(TlsError::Parse(format!("non-finite value '{}'", token.trim())));
    }
    Ok(v)
}

pub fn parse_matrix_market(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| TlsError::Parse("empty MatrixMarket file".into()))?;
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(TlsError::Parse(format!("bad MatrixMarket banner: '{header}'")));
    }
    if fields[2] != "array" || fields[3] != "real" || fields[4] != "general" {
        return Err(TlsError::Parse(format!(
            "only 'array real general' is supported, got '{} {} {}'",
            fields[2], fields[3], fields[4]
        )));
    }

    let mut data = lines.filter(|l| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let size_line = data
        .next()
        .ok_or_else(|| TlsError::Parse("missing size line".into()))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| TlsError::Parse(format!("bad size line: '{size_line}'")))
        })
        .collect::<Result<_>>()?;
    if dims.len() != 2 {
        return Err(TlsError::Parse(format!("bad size line: '{size_line}'")));
    }
    let (rows, cols) = (dims[0], dims[1]);

    let values: Vec<f64> = data
        .flat_map(|l| l.split_whitespace())
        .map(parse_value)
        .collect::<Result<_>>()?;
    if values.len() != rows * cols {
        return Err(TlsError::Parse(format!(
            "expected {} entries for a {rows} x {cols} array, found {}",
            rows * cols,
            values.len()
        )));
    }
    // column-major, as the format prescribes
    Ok(DMatrix::from_vec(rows, cols, values))
}

pub fn write_matrix_market(ab: &DMatrix<f64>) -> String {
    let mut out = String::from("%%MatrixMarket matrix array real general\n");
    out.push_str(&format!("{} {}\n", ab.nrows(), ab.ncols()));
    for v in ab.iter() {
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    out
}

/// Parse comma-separated rows. The first line is a header; it is skipped
/// when it contains a non-numeric field, otherwise it is read as data.
pub fn parse_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| TlsError::Parse(e.to_string()))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Result<Vec<f64>> = record.iter().map(parse_value).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(e),
        }
    }
    let nrows = rows.len();
    if nrows == 0 {
        return Err(TlsError::Shape("CSV contains no data rows".into()));
    }
    let ncols = rows[0].len();
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(TlsError::Parse(format!(
            "row {} has {} fields, expected {ncols}",
            bad + 1,
            rows[bad].len()
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn write_csv(ab: &DMatrix<f64>) -> String {
    let n = ab.ncols() - 1;
    let mut header: Vec<String> = (0..n).map(|j| format!("a{}", j + 1)).collect();
    header.push("b".into());
    let mut out = header.join(",");
    out.push('\n');
    for row in ab.row_iter() {
        let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
