use std::io::Write;
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

fn is_space_name(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    matches!(lower.as_str(), "x" | "y" | "z" | "lat" | "lon" | "latitude" | "longitude")
        || (lower.len() > 1 && lower.starts_with('x') && lower[1..].chars().all(|c| c.is_ascii_digit()))
}

/// Reads `t,<space axes>,<outputs>` with a header row. Space axes are the
/// columns after `t` named `x`, `y`, `z`, `x1`.., `lat` or `lon`.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    read_dataset_csv_with(path, None)
}

/// As [`read_dataset_csv`] with an explicit space-axis count.
pub fn read_dataset_csv_with(path: &Path, n_space: Option<usize>) -> Result<Dataset> {
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => parse_err(1, format!("{other:?}")),
        })?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.first().map(String::as_str) != Some("t") {
        return Err(parse_err(1, "first column must be named t".into()));
    }
    let n_space = match n_space {
        Some(n) => n,
        None => header[1..].iter().take_while(|n| is_space_name(n)).count(),
    };
    if header.len() < n_space + 2 {
        return Err(parse_err(1, format!("need t, {n_space} space axes and at least one output")));
    }
    let width = header.len();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != width {
            return Err(parse_err(line, format!("expected {width} fields, found {}", record.len())));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("column {}: cannot parse {field:?}", header[j])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {}: non-finite value", header[j])));
            }
            rows.push(v);
        }
    }
    let n_out = width - 1 - n_space;
    Dataset::new(n_space, n_out, header, rows)
}

/// Writes the dataset with 17 significant digits per value.
pub fn write_dataset_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{}", data.names().join(","))?;
    for row in data.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}
