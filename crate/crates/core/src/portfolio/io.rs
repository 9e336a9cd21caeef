//! CSV reading and writing for records and claims history.

use std::collections::HashMap;
use std::path::Path;

use crate::claim_score::PeriodExperience;
use crate::error::{Error, Result};

use super::{check_amounts, CovariateKind, CovariateValue, History, PolicyRecord, Portfolio, Schema};

pub(crate) const FIXED_COLUMNS: [&str; 6] =
    ["customer_id", "product", "calendar_year", "exposure", "claim_count", "claim_total"];

const HISTORY_COLUMNS: [&str; 5] = ["customer_id", "product", "year", "exposure", "claim_count"];

fn file_label(path: &Path) -> String {
    path.display().to_string()
}

fn column_map(headers: &csv::StringRecord, required: &[&str], optional: &[String], file: &str) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        let h = h.trim();
        if !required.contains(&h) && !optional.iter().any(|o| o == h) {
            return Err(Error::Validation { file: file.into(), row: 1, message: format!("unknown column {h}") });
        }
        if map.insert(h.to_string(), i).is_some() {
            return Err(Error::Validation { file: file.into(), row: 1, message: format!("duplicate column {h}") });
        }
    }
    for name in required.iter().copied().chain(optional.iter().map(String::as_str)) {
        if !map.contains_key(name) {
            return Err(Error::Validation { file: file.into(), row: 1, message: format!("missing column {name}") });
        }
    }
    Ok(map)
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    columns: &'a HashMap<String, usize>,
    file: &'a str,
    line: usize,
}

impl Row<'_> {
    fn field(&self, name: &str) -> &str {
        self.record.get(self.columns[name]).unwrap_or("").trim()
    }

    fn fail(&self, message: String) -> Error {
        Error::Validation { file: self.file.into(), row: self.line, message }
    }

    fn parse<T: std::str::FromStr>(&self, name: &str) -> Result<T> {
        let raw = self.field(name);
        raw.parse().map_err(|_| self.fail(format!("column {name}: cannot parse {raw:?}")))
    }
}

pub(crate) fn load_records(path: &Path, schema: &Schema) -> Result<Portfolio> {
    read_records(std::fs::File::open(path)?, schema, &file_label(path))
}

pub(crate) fn read_records<R: std::io::Read>(reader: R, schema: &Schema, file: &str) -> Result<Portfolio> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let covariate_names: Vec<String> = schema.covariate_columns().into_iter().map(|c| c.name).collect();
    let columns = column_map(rdr.headers()?, &FIXED_COLUMNS, &covariate_names, file)?;
    let mut portfolio = Portfolio::empty(schema.clone());
    let mut raw = csv::StringRecord::new();
    while rdr.read_record(&mut raw)? {
        let line = raw.position().map(|p| p.line() as usize).unwrap_or(0);
        let row = Row { record: &raw, columns: &columns, file, line };
        let record = parse_record(&row, &mut portfolio)?;
        portfolio.records.push(record);
    }
    Ok(portfolio)
}

fn parse_record(row: &Row<'_>, portfolio: &mut Portfolio) -> Result<PolicyRecord> {
    let customer_id = row.field("customer_id");
    if customer_id.is_empty() {
        return Err(row.fail("empty customer_id".into()));
    }
    let product_name = row.field("product");
    let product = portfolio
        .schema
        .product_index(product_name)
        .ok_or_else(|| row.fail(format!("unknown product {product_name:?}")))?;
    let calendar_year: i32 = row.parse("calendar_year")?;
    let exposure: f64 = row.parse("exposure")?;
    let claim_count: u32 = row.parse("claim_count")?;
    let claim_total: f64 = row.parse("claim_total")?;
    check_amounts(exposure, claim_count, claim_total).map_err(|m| row.fail(m))?;

    let specs = portfolio.schema.products[product].covariates.clone();
    let mut covariates = Vec::with_capacity(specs.len());
    for spec in &specs {
        let raw = row.field(&spec.name);
        if raw.is_empty() {
            return Err(row.fail(format!("missing value for covariate {}", spec.name)));
        }
        covariates.push(match spec.kind {
            CovariateKind::Categorical => CovariateValue::Level(portfolio.intern_label(raw)),
            CovariateKind::Continuous => {
                let x: f64 = raw.parse().map_err(|_| row.fail(format!("column {}: cannot parse {raw:?}", spec.name)))?;
                if !x.is_finite() {
                    return Err(row.fail(format!("column {}: value must be finite", spec.name)));
                }
                CovariateValue::Real(x)
            }
        });
    }
    let customer = portfolio.intern_customer(customer_id);
    Ok(PolicyRecord { customer, product, calendar_year, spell: 0, exposure, claim_count, claim_total, covariates })
}

pub(crate) fn save_records(portfolio: &Portfolio, path: &Path) -> Result<()> {
    write_records(portfolio, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub(crate) fn write_records<W: std::io::Write>(portfolio: &Portfolio, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let columns = portfolio.schema.covariate_columns();
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(columns.iter().map(|c| c.name.clone()));
    wtr.write_record(&header)?;
    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for r in &portfolio.records {
        fields.clear();
        fields.push(portfolio.customer_id(r.customer).to_string());
        fields.push(portfolio.schema.product_name(r.product).to_string());
        fields.push(r.calendar_year.to_string());
        fields.push(r.exposure.to_string());
        fields.push(r.claim_count.to_string());
        fields.push(r.claim_total.to_string());
        let specs = &portfolio.schema.products[r.product].covariates;
        for c in &columns {
            let value = specs.iter().position(|s| s.name == c.name).map(|j| r.covariates[j]);
            fields.push(match value {
                Some(CovariateValue::Level(l)) => portfolio.label(l).to_string(),
                Some(CovariateValue::Real(x)) => x.to_string(),
                None => String::new(),
            });
        }
        wtr.write_record(&fields)?;
    }
    wtr.flush()?;
    Ok(())
}

pub(crate) fn load_history(path: &Path, portfolio: &Portfolio) -> Result<History> {
    read_history(std::fs::File::open(path)?, portfolio, &file_label(path))
}

pub(crate) fn read_history<R: std::io::Read>(reader: R, portfolio: &Portfolio, file: &str) -> Result<History> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let columns = column_map(rdr.headers()?, &HISTORY_COLUMNS, &[], file)?;
    let mut history = History::default();
    let mut raw = csv::StringRecord::new();
    while rdr.read_record(&mut raw)? {
        let line = raw.position().map(|p| p.line() as usize).unwrap_or(0);
        let row = Row { record: &raw, columns: &columns, file, line };
        let product_name = row.field("product");
        let product = portfolio
            .schema
            .product_index(product_name)
            .ok_or_else(|| row.fail(format!("unknown product {product_name:?}")))?;
        let period: i32 = row.parse("year")?;
        let exposure: f64 = row.parse("exposure")?;
        let claims: u32 = row.parse("claim_count")?;
        if !(exposure > 0.0) || !exposure.is_finite() {
            return Err(row.fail(format!("exposure must be positive, got {exposure}")));
        }
        let Some(customer) = portfolio.customers.get(row.field("customer_id")) else {
            continue;
        };
        history
            .insert(customer, product, PeriodExperience { period, exposure, claims })
            .map_err(|_| row.fail(format!("duplicate history year {period}")))?;
    }
    Ok(history)
}

pub(crate) fn save_history(history: &History, portfolio: &Portfolio, path: &Path) -> Result<()> {
    write_history(history, portfolio, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub(crate) fn write_history<W: std::io::Write>(history: &History, portfolio: &Portfolio, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(HISTORY_COLUMNS)?;
    for (&(customer, product), periods) in &history.entries {
        for p in periods {
            wtr.write_record([
                portfolio.customer_id(customer).to_string(),
                portfolio.schema.product_name(product).to_string(),
                p.period.to_string(),
                p.exposure.to_string(),
                p.claims.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
