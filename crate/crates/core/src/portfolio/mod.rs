//! Longitudinal multi-product portfolios.
//!
//! A [`Portfolio`] holds one [`PolicyRecord`] per customer, product, calendar
//! year and spell. Customer ids and categorical labels are interned; records
//! refer to them by index. The customer and label tables are shared by any
//! portfolio derived from the same source (e.g. a train/test split), so
//! indices stay comparable.

mod aggregate;
mod io;
mod overlap;
mod simulate;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::claim_score::PeriodExperience;
use crate::error::{Error, Result};

pub use overlap::{overlap_report, OverlapRow};
pub use simulate::{simulate, CovariateEffect, ProductSimulation, SimulationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateKind {
    Categorical,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    pub kind: CovariateKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductSchema {
    pub name: String,
    #[serde(default)]
    pub covariates: Vec<CovariateSpec>,
}

/// Products, their covariates, and the (abstract) units of the data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub products: Vec<ProductSchema>,
    #[serde(default = "default_exposure_unit")]
    pub exposure_unit: String,
    #[serde(default = "default_currency_unit")]
    pub currency_unit: String,
}

fn default_exposure_unit() -> String {
    "years".into()
}

fn default_currency_unit() -> String {
    "currency".into()
}

impl Schema {
    pub fn new(products: Vec<ProductSchema>) -> Result<Self> {
        let schema = Self { products, exposure_unit: default_exposure_unit(), currency_unit: default_currency_unit() };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.products.is_empty() {
            return Err(Error::Config("schema lists no products".into()));
        }
        let mut names = BTreeSet::new();
        for p in &self.products {
            if !names.insert(p.name.as_str()) {
                return Err(Error::Config(format!("duplicate product {}", p.name)));
            }
            let mut cov = BTreeSet::new();
            for c in &p.covariates {
                if !cov.insert(c.name.as_str()) {
                    return Err(Error::Config(format!("duplicate covariate {} in product {}", c.name, p.name)));
                }
            }
        }
        let mut kinds: HashMap<&str, CovariateKind> = HashMap::new();
        for c in self.products.iter().flat_map(|p| &p.covariates) {
            if let Some(k) = kinds.insert(&c.name, c.kind) {
                if k != c.kind {
                    return Err(Error::Config(format!("covariate {} declared with two kinds", c.name)));
                }
            }
            if io::FIXED_COLUMNS.contains(&c.name.as_str()) {
                return Err(Error::Config(format!("covariate name {} clashes with a record column", c.name)));
            }
        }
        Ok(())
    }

    pub fn load_json(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let schema: Schema = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn save_json(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn num_products(&self) -> usize {
        self.products.len()
    }

    pub fn product_index(&self, name: &str) -> Option<usize> {
        self.products.iter().position(|p| p.name == name)
    }

    pub fn product_name(&self, product: usize) -> &str {
        &self.products[product].name
    }

    /// Union of covariate names in order of first appearance.
    pub fn covariate_columns(&self) -> Vec<CovariateSpec> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for c in self.products.iter().flat_map(|p| &p.covariates) {
            if seen.insert(c.name.clone()) {
                out.push(c.clone());
            }
        }
        out
    }
}

/// A covariate value. Categorical labels are indices into the portfolio's
/// label table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovariateValue {
    Level(u32),
    Real(f64),
}

impl CovariateValue {
    fn key(&self) -> (u8, u64) {
        match *self {
            CovariateValue::Level(l) => (0, l as u64),
            CovariateValue::Real(x) => (1, x.to_bits()),
        }
    }
}

/// One customer-product-year spell.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRecord {
    pub customer: usize,
    pub product: usize,
    pub calendar_year: i32,
    /// Distinguishes same-year rows with different covariates.
    pub spell: u32,
    pub exposure: f64,
    pub claim_count: u32,
    pub claim_total: f64,
    /// Values aligned with the product's covariate list.
    pub covariates: Vec<CovariateValue>,
}

/// Interned customer ids and categorical labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Interner {
    names: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.lookup.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.lookup.insert(name.to_string(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.lookup.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    schema: Schema,
    customers: Interner,
    labels: Interner,
    records: Vec<PolicyRecord>,
}

impl Portfolio {
    pub fn empty(schema: Schema) -> Self {
        Self { schema, customers: Interner::default(), labels: Interner::default(), records: Vec::new() }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn records(&self) -> &[PolicyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn customers(&self) -> &Interner {
        &self.customers
    }

    pub fn labels(&self) -> &Interner {
        &self.labels
    }

    pub fn customer_id(&self, customer: usize) -> &str {
        self.customers.name(customer)
    }

    pub fn label(&self, level: u32) -> &str {
        self.labels.name(level as usize)
    }

    pub fn intern_customer(&mut self, id: &str) -> usize {
        self.customers.intern(id)
    }

    pub fn intern_label(&mut self, label: &str) -> u32 {
        self.labels.intern(label) as u32
    }

    /// Append a record after checking it against the schema.
    pub fn push(&mut self, record: PolicyRecord) -> Result<()> {
        self.check_record(&record).map_err(|message| Error::Validation {
            file: "portfolio".into(),
            row: self.records.len() + 1,
            message,
        })?;
        self.records.push(record);
        Ok(())
    }

    fn check_record(&self, r: &PolicyRecord) -> std::result::Result<(), String> {
        if r.customer >= self.customers.len() {
            return Err(format!("unknown customer index {}", r.customer));
        }
        let Some(product) = self.schema.products.get(r.product) else {
            return Err(format!("unknown product index {}", r.product));
        };
        check_amounts(r.exposure, r.claim_count, r.claim_total)?;
        if r.covariates.len() != product.covariates.len() {
            return Err(format!(
                "{} covariates given, product {} has {}",
                r.covariates.len(),
                product.name,
                product.covariates.len()
            ));
        }
        for (value, spec) in r.covariates.iter().zip(&product.covariates) {
            match (value, spec.kind) {
                (CovariateValue::Level(l), CovariateKind::Categorical) if (*l as usize) < self.labels.len() => {}
                (CovariateValue::Real(x), CovariateKind::Continuous) if x.is_finite() => {}
                _ => return Err(format!("invalid value for covariate {}", spec.name)),
            }
        }
        Ok(())
    }

    /// Same customers, labels and schema, different records.
    pub fn with_records(&self, records: Vec<PolicyRecord>) -> Portfolio {
        Portfolio {
            schema: self.schema.clone(),
            customers: self.customers.clone(),
            labels: self.labels.clone(),
            records,
        }
    }

    /// Distinct calendar years, ascending.
    pub fn years(&self) -> Vec<i32> {
        let set: BTreeSet<i32> = self.records.iter().map(|r| r.calendar_year).collect();
        set.into_iter().collect()
    }

    pub fn total_exposure(&self) -> f64 {
        self.records.iter().map(|r| r.exposure).sum()
    }

    pub fn product_records(&self, product: usize) -> impl Iterator<Item = &PolicyRecord> {
        self.records.iter().filter(move |r| r.product == product)
    }

    /// Test set = the last calendar year, training set = the rest.
    pub fn train_test_split(&self) -> Result<(Portfolio, Portfolio)> {
        let years = self.years();
        if years.len() < 2 {
            return Err(Error::Split(years.len()));
        }
        let last = *years.last().expect("at least two years");
        let (test, train): (Vec<_>, Vec<_>) = self.records.iter().cloned().partition(|r| r.calendar_year == last);
        Ok((self.with_records(train), self.with_records(test)))
    }

    /// Merge same customer-product-year spells with identical covariates.
    pub fn aggregate_policy_years(&self) -> Portfolio {
        self.with_records(aggregate::aggregate(&self.records))
    }

    pub fn load_csv(path: impl AsRef<std::path::Path>, schema: &Schema) -> Result<Portfolio> {
        io::load_records(path.as_ref(), schema)
    }

    pub fn read_csv<R: std::io::Read>(reader: R, schema: &Schema, file: &str) -> Result<Portfolio> {
        io::read_records(reader, schema, file)
    }

    pub fn save_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        io::save_records(self, path.as_ref())
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        io::write_records(self, writer)
    }

    /// Experience per calendar year for one customer and product: exposure
    /// summed over spells and capped at 1, claims summed.
    pub fn yearly_experience(&self) -> BTreeMap<(usize, usize), Vec<PeriodExperience>> {
        let mut acc: BTreeMap<(usize, usize), BTreeMap<i32, (f64, u32)>> = BTreeMap::new();
        for r in &self.records {
            let e = acc.entry((r.customer, r.product)).or_default().entry(r.calendar_year).or_insert((0.0, 0));
            e.0 += r.exposure;
            e.1 += r.claim_count;
        }
        acc.into_iter()
            .map(|(key, years)| {
                let periods = years
                    .into_iter()
                    .map(|(period, (exposure, claims))| PeriodExperience { period, exposure: exposure.min(1.0), claims })
                    .collect();
                (key, periods)
            })
            .collect()
    }
}

pub(crate) fn check_amounts(exposure: f64, claim_count: u32, claim_total: f64) -> std::result::Result<(), String> {
    if !(exposure > 0.0) || !exposure.is_finite() {
        return Err(format!("exposure must be positive, got {exposure}"));
    }
    if !(claim_total >= 0.0) || !claim_total.is_finite() {
        return Err(format!("claim_total must be nonnegative, got {claim_total}"));
    }
    if claim_total > 0.0 && claim_count == 0 {
        return Err("claim_total is positive but claim_count is 0".into());
    }
    Ok(())
}

/// Pre-sample claims history per customer and product, used to initialize
/// claim scores.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    entries: BTreeMap<(usize, usize), Vec<PeriodExperience>>,
}

impl History {
    /// Insert one year; years must be unique per customer and product.
    pub fn insert(&mut self, customer: usize, product: usize, period: PeriodExperience) -> Result<()> {
        let list = self.entries.entry((customer, product)).or_default();
        match list.binary_search_by_key(&period.period, |p| p.period) {
            Ok(_) => Err(Error::Validation {
                file: "history".into(),
                row: 0,
                message: format!("duplicate history year {}", period.period),
            }),
            Err(pos) => {
                list.insert(pos, period);
                Ok(())
            }
        }
    }

    pub fn get(&self, customer: usize, product: usize) -> &[PeriodExperience] {
        self.entries.get(&(customer, product)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &Vec<PeriodExperience>)> {
        self.entries.iter()
    }

    /// Read a history CSV; customers absent from `portfolio` are skipped.
    pub fn load_csv(path: impl AsRef<std::path::Path>, portfolio: &Portfolio) -> Result<History> {
        io::load_history(path.as_ref(), portfolio)
    }

    pub fn read_csv<R: std::io::Read>(reader: R, portfolio: &Portfolio, file: &str) -> Result<History> {
        io::read_history(reader, portfolio, file)
    }

    pub fn save_csv(&self, path: impl AsRef<std::path::Path>, portfolio: &Portfolio) -> Result<()> {
        io::save_history(self, portfolio, path.as_ref())
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W, portfolio: &Portfolio) -> Result<()> {
        io::write_history(self, portfolio, writer)
    }
}
