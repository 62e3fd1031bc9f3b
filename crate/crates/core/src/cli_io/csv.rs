//! Minimal CSV reading and writing with full-precision numbers.

use std::path::Path;

use crate::error::{Error, Result};

/// 17 significant digits in scientific notation; non-finite values as `inf`, `-inf`, `nan`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

fn writer_error(e: ::csv::Error) -> Error {
    match e.into_kind() {
        ::csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Parameter(format!("csv: {other:?}")),
    }
}

pub fn render(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut w = ::csv::Writer::from_writer(Vec::new());
    let emit = |w: &mut ::csv::Writer<Vec<u8>>| -> std::result::Result<(), ::csv::Error> {
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(|x| format_number(*x)))?;
        }
        w.flush()?;
        Ok(())
    };
    emit(&mut w).expect("writing to memory cannot fail");
    String::from_utf8(w.into_inner().expect("in-memory buffer")).expect("ASCII output")
}

pub fn write(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    std::fs::write(path, render(header, rows))?;
    Ok(())
}

fn parse_cell(s: &str, line: u64) -> Result<f64> {
    match s.trim() {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "nan" => Ok(f64::NAN),
        t => t
            .parse()
            .map_err(|_| Error::Parameter(format!("line {line}: `{t}` is not a number"))),
    }
}

/// Header and numeric rows of a CSV file.
pub fn read(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = ::csv::ReaderBuilder::new()
        .trim(::csv::Trim::All)
        .from_path(path)
        .map_err(writer_error)?;
    let header: Vec<String> = r.headers().map_err(writer_error)?.iter().map(String::from).collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(Error::Parameter(format!("{} is empty", path.display())));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parameter(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(rec.iter().map(|c| parse_cell(c, line)).collect::<Result<Vec<f64>>>()?);
    }
    Ok((header, rows))
}

/// Columns `t` (or the first column) and `column`.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<(f64, f64)>> {
    let (header, rows) = read(path)?;
    let c = header
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::Parameter(format!("column `{column}` not found; available: {}", header.join(", "))))?;
    let t = header.iter().position(|h| h == "t").unwrap_or(0);
    Ok(rows.iter().map(|r| (r[t], r[c])).collect())
}

/// Two numeric columns (v, f); a non-numeric first line is taken as a header.
pub fn read_two_columns(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let (mut v, mut f) = (Vec::new(), Vec::new());
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = l
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if cells.len() != 2 {
            return Err(Error::Parameter(format!(
                "{}:{}: expected two columns",
                path.display(),
                i + 1
            )));
        }
        match (cells[0].parse::<f64>(), cells[1].parse::<f64>()) {
            (Ok(a), Ok(b)) => {
                v.push(a);
                f.push(b);
            }
            _ if v.is_empty() => continue,
            _ => return Err(Error::Parameter(format!("{}:{}: not numeric", path.display(), i + 1))),
        }
    }
    Ok((v, f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_exactly() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, 0.0] {
            assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_number(f64::INFINITY), "inf");
    }
}
