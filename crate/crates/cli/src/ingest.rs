//! CSV readers for adoption series and price paths.
//!
//! Row numbers in error messages are file line numbers, with the header on
//! line 1.

use std::path::Path;

use price_diffusion::{AdoptionSeries, Error as ModelError};

use crate::error::CliError;

const PERIOD: &str = "period";
const PRICE: &str = "price";
const ADOPTERS: &str = "cumulative_adopters";
const POPULATION: &str = "population";
const FRACTION: &str = "adoption_fraction";

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))
}

fn headers(reader: &mut csv::Reader<std::fs::File>, path: &Path) -> Result<Vec<String>, CliError> {
    Ok(reader
        .headers()
        .map_err(|e| CliError::io(path, e))?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_ascii_lowercase())
        .collect())
}

fn column(headers: &[String], name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

struct RowReader<'a> {
    path: &'a Path,
    line: usize,
    record: csv::StringRecord,
}

impl RowReader<'_> {
    fn error(&self, message: impl Into<String>) -> CliError {
        CliError::Row {
            path: self.path.display().to_string(),
            row: self.line,
            message: message.into(),
        }
    }

    fn raw(&self, index: usize, name: &str) -> Result<&str, CliError> {
        self.record
            .get(index)
            .ok_or_else(|| self.error(format!("missing `{name}` field")))
    }

    fn number(&self, index: usize, name: &str) -> Result<f64, CliError> {
        let raw = self.raw(index, name)?;
        if raw.is_empty() {
            return Err(self.error(format!("empty `{name}` field")));
        }
        let value: f64 = raw
            .parse()
            .map_err(|_| self.error(format!("`{name}` = {raw:?} is not a number")))?;
        if !value.is_finite() {
            return Err(self.error(format!("`{name}` = {raw:?} is not finite")));
        }
        Ok(value)
    }
}

fn records(
    reader: &mut csv::Reader<std::fs::File>,
    path: &Path,
    width: usize,
) -> Result<Vec<(usize, csv::StringRecord)>, CliError> {
    let mut rows = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| {
            let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
            CliError::Row {
                path: path.display().to_string(),
                row,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != width {
            return Err(CliError::Row {
                path: path.display().to_string(),
                row: line,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        rows.push((line, record));
    }
    Ok(rows)
}

/// Reads an adoption series in either supported schema:
/// `period,price,cumulative_adopters,population` or
/// `period,price,adoption_fraction`. A `population` argument overrides (or
/// supplies) the population column.
pub fn read_series(path: &Path, population: Option<f64>) -> Result<AdoptionSeries, CliError> {
    if let Some(n) = population {
        if !(n.is_finite() && n > 0.0) {
            return Err(CliError::Input(format!("population {n} must be positive")));
        }
    }
    let mut reader = open(path)?;
    let headers = headers(&mut reader, path)?;
    let schema_error = || {
        CliError::Input(format!(
            "{}: unsupported header [{}]; expected `{PERIOD},{PRICE},{ADOPTERS},{POPULATION}` \
             or `{PERIOD},{PRICE},{FRACTION}`",
            path.display(),
            headers.join(",")
        ))
    };
    let (Some(period_col), Some(price_col)) = (column(&headers, PERIOD), column(&headers, PRICE))
    else {
        return Err(schema_error());
    };
    enum Level {
        Fraction(usize),
        Count(usize, Option<usize>),
    }
    let level = match (
        column(&headers, FRACTION),
        column(&headers, ADOPTERS),
        column(&headers, POPULATION),
    ) {
        (Some(f), None, None) if headers.len() == 3 => Level::Fraction(f),
        (None, Some(a), Some(n)) if headers.len() == 4 => Level::Count(a, Some(n)),
        (None, Some(a), None) if headers.len() == 3 && population.is_some() => {
            Level::Count(a, None)
        }
        (None, Some(_), None) if headers.len() == 3 => {
            return Err(CliError::Input(format!(
                "{}: `{ADOPTERS}` needs a `{POPULATION}` column or --population",
                path.display()
            )))
        }
        _ => return Err(schema_error()),
    };

    let mut periods = Vec::new();
    let mut prices = Vec::new();
    let mut adoption = Vec::new();
    let mut lines = Vec::new();
    for (line, record) in records(&mut reader, path, headers.len())? {
        let row = RowReader { path, line, record };
        let period = row.raw(period_col, PERIOD)?;
        if period.is_empty() {
            return Err(row.error("empty `period` field"));
        }
        let price = row.number(price_col, PRICE)?;
        let fraction = match level {
            Level::Fraction(col) => row.number(col, FRACTION)?,
            Level::Count(col, pop_col) => {
                let adopters = row.number(col, ADOPTERS)?;
                let n = match (population, pop_col) {
                    (Some(n), _) => n,
                    (None, Some(c)) => row.number(c, POPULATION)?,
                    (None, None) => unreachable!("checked with the header"),
                };
                if n <= 0.0 {
                    return Err(row.error(format!("population {n} must be positive")));
                }
                if adopters < 0.0 {
                    return Err(row.error(format!("cumulative adopters {adopters} is negative")));
                }
                adopters / n
            }
        };
        periods.push(period.to_string());
        prices.push(price);
        adoption.push(fraction);
        lines.push(line);
    }
    AdoptionSeries::new(periods, prices, adoption).map_err(|e| match e {
        ModelError::InvalidSeries { index, reason } => CliError::Row {
            path: path.display().to_string(),
            row: lines[index],
            message: reason,
        },
        other => CliError::Input(format!("{}: {other}", path.display())),
    })
}

/// Reads the `price` (or `price_t`) column of a CSV file.
///
/// Trajectory files end with a terminal row that carries only `t` and `F_t`;
/// a blank price is accepted on the last row only.
pub fn read_prices(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut reader = open(path)?;
    let headers = headers(&mut reader, path)?;
    let col = column(&headers, PRICE)
        .or_else(|| column(&headers, "price_t"))
        .ok_or_else(|| {
            CliError::Input(format!(
                "{}: no `price` or `price_t` column in header [{}]",
                path.display(),
                headers.join(",")
            ))
        })?;
    let rows = records(&mut reader, path, headers.len())?;
    let count = rows.len();
    let mut prices = Vec::with_capacity(count);
    for (k, (line, record)) in rows.into_iter().enumerate() {
        let row = RowReader { path, line, record };
        if k + 1 == count && row.raw(col, PRICE)?.is_empty() {
            break;
        }
        let price = row.number(col, PRICE)?;
        if price < 0.0 {
            return Err(row.error(format!("price {price} is negative")));
        }
        prices.push(price);
    }
    if prices.is_empty() {
        return Err(CliError::Input(format!("{}: no prices", path.display())));
    }
    Ok(prices)
}
