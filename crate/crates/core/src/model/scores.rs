//! Claim scores entering each calendar year, per customer and product.

use std::collections::BTreeMap;

use crate::claim_score::{initialize_from_history, trajectory, ClaimScoreConfig, PeriodExperience, ScoreState};
use crate::error::Result;
use crate::portfolio::{History, Portfolio};

/// Yearly experience of every customer-product pair, computed once per
/// portfolio and reused across claim-score configurations.
#[derive(Debug, Clone)]
pub struct Experience {
    num_customers: usize,
    num_products: usize,
    periods: BTreeMap<(usize, usize), Vec<PeriodExperience>>,
}

impl Experience {
    pub fn new(portfolio: &Portfolio) -> Self {
        Self {
            num_customers: portfolio.customers().len(),
            num_products: portfolio.schema().num_products(),
            periods: portfolio.yearly_experience(),
        }
    }
}

#[derive(Debug, Clone)]
struct CustomerPath {
    /// State before the first observed year (history-based or the entry level).
    initial: ScoreState,
    has_history: bool,
    first_year: Option<i32>,
    /// Score after each observed year.
    after: Vec<(i32, ScoreState)>,
}

/// Scores of one product under one configuration.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    product: usize,
    config: ClaimScoreConfig,
    paths: Vec<Option<CustomerPath>>,
}

impl ScoreTable {
    pub fn build(experience: &Experience, history: &History, product: usize, config: ClaimScoreConfig) -> Result<Self> {
        let mut paths: Vec<Option<CustomerPath>> = vec![None; experience.num_customers];
        for (&(customer, _), past) in history.iter().filter(|((c, p), _)| *p == product && *c < experience.num_customers) {
            paths[customer] = Some(CustomerPath {
                initial: initialize_from_history(past, &config)?,
                has_history: !past.is_empty(),
                first_year: None,
                after: Vec::new(),
            });
        }
        for (&(customer, _), periods) in experience.periods.iter().filter(|((_, p), _)| *p == product) {
            let path = paths[customer].get_or_insert_with(|| CustomerPath {
                initial: config.entry_state(),
                has_history: false,
                first_year: None,
                after: Vec::new(),
            });
            let states = trajectory(periods, &config, path.initial)?;
            path.first_year = periods.first().map(|p| p.period);
            path.after = periods.iter().zip(&states[1..]).map(|(p, &s)| (p.period, s)).collect();
        }
        Ok(Self { product, config, paths })
    }

    pub fn from_portfolio(portfolio: &Portfolio, history: &History, product: usize, config: ClaimScoreConfig) -> Result<Self> {
        Self::build(&Experience::new(portfolio), history, product, config)
    }

    pub fn product(&self) -> usize {
        self.product
    }

    pub fn config(&self) -> &ClaimScoreConfig {
        &self.config
    }

    /// Score used to price `year`: the state after all observed years
    /// before it. `None` when the customer has neither history nor any
    /// coverage of the product up to `year`.
    pub fn score(&self, customer: usize, year: i32) -> Option<ScoreState> {
        let path = self.paths.get(customer)?.as_ref()?;
        let before = path.after.partition_point(|&(y, _)| y < year);
        if before > 0 {
            return Some(path.after[before - 1].1);
        }
        let covered = path.first_year.is_some_and(|y| y <= year);
        (path.has_history || covered).then_some(path.initial)
    }
}

/// Score tables for every product a model uses, indexed by product.
#[derive(Debug, Clone, Default)]
pub struct ScoreTables {
    tables: Vec<Option<ScoreTable>>,
}

impl ScoreTables {
    pub fn build(experience: &Experience, history: &History, configs: &BTreeMap<usize, ClaimScoreConfig>) -> Result<Self> {
        let mut tables = vec![None; experience.num_products];
        for (&product, &cfg) in configs {
            if product < tables.len() {
                tables[product] = Some(ScoreTable::build(experience, history, product, cfg)?);
            }
        }
        Ok(Self { tables })
    }

    pub fn from_tables(tables: Vec<Option<ScoreTable>>) -> Self {
        Self { tables }
    }

    pub fn get(&self, product: usize) -> Option<&ScoreTable> {
        self.tables.get(product).and_then(Option::as_ref)
    }
}
