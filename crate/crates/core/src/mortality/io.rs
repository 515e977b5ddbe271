use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::{DailyCountSeries, ExcessSeries, Series};
use crate::{Error, Result};

/// Supported input encodings. Only `date,value` CSV for now.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InputFormat {
    #[default]
    Csv,
}

/// Loads a non-negative daily series. Interior gaps, duplicate dates and
/// negative values are errors; nothing is interpolated.
pub fn load_series(path: impl AsRef<Path>, format: InputFormat) -> Result<DailyCountSeries> {
    let InputFormat::Csv = format;
    let entries = read_entries(open(path.as_ref())?, false)?;
    DailyCountSeries::from_entries(entries)
}

/// Loads an excess series (negative values allowed).
pub fn load_excess(path: impl AsRef<Path>) -> Result<ExcessSeries> {
    let entries = read_entries(open(path.as_ref())?, true)?;
    ExcessSeries::from_entries(entries)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn read_entries<R: Read>(reader: R, allow_negative: bool) -> Result<Vec<(NaiveDate, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers().map_err(|e| malformed(1, e))?.clone();
    if header.len() != 2 || &header[0] != "date" || &header[1] != "value" {
        return Err(Error::MalformedRow {
            line: 1,
            message: format!("expected header `date,value`, found `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut entries = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e)
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(Error::MalformedRow {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| Error::MalformedRow {
                line,
                message: format!("bad date {:?}: {e}", &record[0]),
            })?;
        let value: f64 = record[1].parse().map_err(|_| Error::MalformedRow {
            line,
            message: format!("bad value {:?}", &record[1]),
        })?;
        if !value.is_finite() {
            return Err(Error::MalformedRow {
                line,
                message: format!("non-finite value {:?}", &record[1]),
            });
        }
        if value < 0.0 && !allow_negative {
            return Err(Error::NegativeValue { line, value });
        }
        if let Some(&(previous, _)) = entries.last() {
            let previous: NaiveDate = previous;
            match date.signed_duration_since(previous).num_days() {
                1 => {}
                0 => return Err(Error::DuplicateDate { line, date }),
                d if d < 0 => return Err(Error::UnorderedDate { line, date, previous }),
                _ => return Err(Error::Gap { after: previous, before: date }),
            }
        }
        entries.push((date, value));
    }
    if entries.is_empty() {
        return Err(Error::Empty);
    }
    Ok(entries)
}

fn malformed(line: u64, e: csv::Error) -> Error {
    Error::MalformedRow {
        line,
        message: e.to_string(),
    }
}

/// Writes `date,value` CSV with LF line endings. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_series<S: Series + ?Sized, W: Write>(series: &S, mut out: W) -> std::io::Result<()> {
    writeln!(out, "date,value")?;
    for (date, value) in series.iter() {
        writeln!(out, "{},{}", date.format("%Y-%m-%d"), value)?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<DailyCountSeries> {
        DailyCountSeries::from_entries(read_entries(text.as_bytes(), false)?)
    }

    #[test]
    fn parses_seven_rows() {
        let text = "date,value\n2020-03-15,210\n2020-03-16,215\n2020-03-17,218\n\
                    2020-03-18,220\n2020-03-19,224\n2020-03-20,228\n2020-03-21,230\n";
        let s = parse(text).unwrap();
        assert_eq!(s.len(), 7);
        assert_eq!(s.start(), NaiveDate::from_ymd_opt(2020, 3, 15).unwrap());
        assert_eq!(s.values()[0], 210.0);
        assert_eq!(s.values()[6], 230.0);
    }

    #[test]
    fn accepts_crlf() {
        let s = parse("date,value\r\n2020-01-01,1.5\r\n2020-01-02,2\r\n").unwrap();
        assert_eq!(s.values(), &[1.5, 2.0]);
    }

    #[test]
    fn interior_gap_is_an_error() {
        let err = parse("date,value\n2020-03-15,1\n2020-03-17,2\n").unwrap_err();
        assert!(matches!(err, Error::Gap { .. }), "{err}");
    }

    #[test]
    fn negative_value_is_an_error() {
        let err = parse("date,value\n2020-03-15,1\n2020-03-16,-3\n").unwrap_err();
        assert!(matches!(err, Error::NegativeValue { line: 3, value } if value == -3.0), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = parse("date,value\n2020-03-15,1\n2020-03-16,abc\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err}");
        let err = parse("date,value\n2020-03-15,1\n2020-3-x,4\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err}");
        let err = parse("day,count\n2020-03-15,1\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 1, .. }), "{err}");
    }

    #[test]
    fn duplicate_date_is_an_error() {
        let err = parse("date,value\n2020-03-15,1\n2020-03-15,2\n").unwrap_err();
        assert!(matches!(err, Error::DuplicateDate { .. }), "{err}");
    }

    #[test]
    fn missing_file() {
        let err = load_series("/nonexistent/deaths.csv", InputFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn written_excess_reads_back_exactly() {
        let x = ExcessSeries::new(
            NaiveDate::from_ymd_opt(2020, 2, 27).unwrap(),
            vec![-20.0, 0.1 + 0.2, 1.0 / 3.0, 1e-17, 4451.0],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_series(&x, &mut buf).unwrap();
        let back = ExcessSeries::from_entries(read_entries(buf.as_slice(), true).unwrap()).unwrap();
        assert_eq!(back, x);
    }
}
