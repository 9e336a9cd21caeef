//! Synthetic multi-product portfolios.
//!
//! Each customer draws from an independent substream of a seeded ChaCha
//! generator, so the output depends only on the configuration. An optional
//! gamma frailty, shared across a customer's products and constant over
//! time, makes past claims predictive of future claims on every product.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, InverseGaussian, Poisson};
use serde::{Deserialize, Serialize};

use crate::claim_score::PeriodExperience;
use crate::error::{Error, Result};
use crate::family::FamilyKind;

use super::{CovariateKind, CovariateSpec, CovariateValue, History, PolicyRecord, Portfolio, ProductSchema, Schema};

/// A covariate and its effects on the log frequency and log severity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CovariateEffect {
    Categorical {
        name: String,
        levels: Vec<String>,
        probabilities: Vec<f64>,
        frequency_effects: Vec<f64>,
        severity_effects: Vec<f64>,
    },
    Continuous {
        name: String,
        low: f64,
        high: f64,
        frequency_effect: f64,
        severity_effect: f64,
    },
}

impl CovariateEffect {
    pub fn name(&self) -> &str {
        match self {
            CovariateEffect::Categorical { name, .. } | CovariateEffect::Continuous { name, .. } => name,
        }
    }

    fn kind(&self) -> CovariateKind {
        match self {
            CovariateEffect::Categorical { .. } => CovariateKind::Categorical,
            CovariateEffect::Continuous { .. } => CovariateKind::Continuous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductSimulation {
    pub name: String,
    pub ownership_probability: f64,
    pub frequency: FamilyKind,
    /// Negative binomial size of the extra count noise.
    #[serde(default = "default_nb_size")]
    pub nb_size: f64,
    pub log_frequency: f64,
    pub severity: FamilyKind,
    pub log_severity: f64,
    pub severity_dispersion: f64,
    #[serde(default)]
    pub covariates: Vec<CovariateEffect>,
}

fn default_nb_size() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub seed: u64,
    pub num_customers: usize,
    pub first_year: i32,
    pub num_years: u32,
    pub products: Vec<ProductSimulation>,
    /// Variance of the mean-one customer frailty; 0 disables it.
    pub frailty_variance: f64,
    /// Share of customers with pre-sample claims history.
    pub history_share: f64,
    pub history_years: u32,
    /// Probability that a policy year is only partly in force.
    pub partial_exposure_probability: f64,
}

fn region() -> CovariateEffect {
    CovariateEffect::Categorical {
        name: "region".into(),
        levels: vec!["north".into(), "central".into(), "south".into()],
        probabilities: vec![0.4, 0.35, 0.25],
        frequency_effects: vec![0.0, 0.15, -0.1],
        severity_effects: vec![0.0, 0.1, 0.05],
    }
}

fn age(effect: f64) -> CovariateEffect {
    CovariateEffect::Continuous { name: "age".into(), low: 18.0, high: 80.0, frequency_effect: effect, severity_effect: 0.002 }
}

fn product(name: &str, own: f64, log_frequency: f64, log_severity: f64, covariates: Vec<CovariateEffect>) -> ProductSimulation {
    ProductSimulation {
        name: name.into(),
        ownership_probability: own,
        frequency: FamilyKind::Poisson,
        nb_size: default_nb_size(),
        log_frequency,
        severity: FamilyKind::Gamma,
        log_severity,
        severity_dispersion: 1.5,
        covariates,
    }
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            num_customers: 5000,
            first_year: 2014,
            num_years: 5,
            products: vec![
                product("GL", 0.6, -2.0, 6.0, vec![region(), age(-0.01)]),
                product("HC", 0.55, -1.8, 6.5, vec![region(), age(-0.005)]),
                product("H", 0.35, -2.2, 7.5, vec![region()]),
                product("T", 0.45, -1.6, 5.5, vec![age(0.005)]),
            ],
            frailty_variance: 0.5,
            history_share: 0.5,
            history_years: 7,
            partial_exposure_probability: 0.1,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.products.is_empty() {
            return Err(Error::Config("simulation needs at least one product".into()));
        }
        if self.num_years == 0 {
            return Err(Error::Config("simulation needs at least one year".into()));
        }
        if !unit(self.history_share) || !unit(self.partial_exposure_probability) {
            return Err(Error::Config("shares and probabilities must lie in [0, 1]".into()));
        }
        if !(self.frailty_variance >= 0.0) || !self.frailty_variance.is_finite() {
            return Err(Error::Config("frailty variance must be nonnegative".into()));
        }
        if !self.products.iter().any(|p| p.ownership_probability > 0.0) {
            return Err(Error::Config("no product can be owned".into()));
        }
        for p in &self.products {
            if !unit(p.ownership_probability) {
                return Err(Error::Config(format!("{}: ownership probability outside [0, 1]", p.name)));
            }
            if !p.frequency.is_count() || p.severity.is_count() {
                return Err(Error::Config(format!("{}: frequency must be a count family, severity a positive one", p.name)));
            }
            if !(p.nb_size > 0.0) || !(p.severity_dispersion > 0.0) {
                return Err(Error::Config(format!("{}: size and dispersion must be positive", p.name)));
            }
            for c in &p.covariates {
                if let CovariateEffect::Categorical { levels, probabilities, frequency_effects, severity_effects, .. } = c {
                    let n = levels.len();
                    if n == 0 || probabilities.len() != n || frequency_effects.len() != n || severity_effects.len() != n {
                        return Err(Error::Config(format!("{}: inconsistent levels for {}", p.name, c.name())));
                    }
                    if probabilities.iter().any(|&q| !unit(q)) || !(probabilities.iter().sum::<f64>() > 0.0) {
                        return Err(Error::Config(format!("{}: invalid level probabilities for {}", p.name, c.name())));
                    }
                }
                if let CovariateEffect::Continuous { low, high, .. } = c {
                    if !(low <= high) {
                        return Err(Error::Config(format!("{}: empty range for {}", p.name, c.name())));
                    }
                }
            }
        }
        let schema = self.schema();
        schema.validate()
    }

    pub fn schema(&self) -> Schema {
        Schema {
            products: self
                .products
                .iter()
                .map(|p| ProductSchema {
                    name: p.name.clone(),
                    covariates: p.covariates.iter().map(|c| CovariateSpec { name: c.name().into(), kind: c.kind() }).collect(),
                })
                .collect(),
            exposure_unit: "years".into(),
            currency_unit: "currency".into(),
        }
    }
}

/// Covariate draws of one customer, keyed by covariate name.
enum Drawn {
    Level(usize),
    Real(f64),
}

fn draw_level(rng: &mut ChaCha8Rng, probabilities: &[f64]) -> usize {
    let total: f64 = probabilities.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &p) in probabilities.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn draw_count(rng: &mut ChaCha8Rng, p: &ProductSimulation, mean: f64) -> u32 {
    let mean = if p.frequency == FamilyKind::NegativeBinomial {
        mean * Gamma::new(p.nb_size, 1.0 / p.nb_size).expect("positive size").sample(rng)
    } else {
        mean
    };
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u32
}

fn draw_total(rng: &mut ChaCha8Rng, p: &ProductSimulation, mean: f64, n: u32) -> f64 {
    let n = n as f64;
    match p.severity {
        FamilyKind::InverseGaussian => {
            let shape = n * n / p.severity_dispersion;
            InverseGaussian::new(n * mean, shape).expect("valid inverse Gaussian").sample(rng)
        }
        _ => {
            let shape = 1.0 / p.severity_dispersion;
            Gamma::new(n * shape, mean / shape).expect("valid gamma").sample(rng)
        }
    }
    .max(f64::MIN_POSITIVE)
}

/// Generate a portfolio and its pre-sample history.
pub fn simulate(config: &SimulationConfig) -> Result<(Portfolio, History)> {
    config.validate()?;
    let schema = config.schema();
    let mut portfolio = Portfolio::empty(schema);
    let mut history = History::default();

    // covariate names in first-appearance order, with their first declaration
    let mut declared: Vec<&CovariateEffect> = Vec::new();
    for c in config.products.iter().flat_map(|p| &p.covariates) {
        if !declared.iter().any(|d| d.name() == c.name()) {
            declared.push(c);
        }
    }
    for c in &declared {
        if let CovariateEffect::Categorical { levels, .. } = c {
            for l in levels {
                portfolio.intern_label(l);
            }
        }
    }
    let width = config.num_customers.max(1).to_string().len();
    let frailty = (config.frailty_variance > 0.0).then(|| {
        let shape = 1.0 / config.frailty_variance;
        Gamma::new(shape, config.frailty_variance).expect("positive frailty variance")
    });

    for i in 0..config.num_customers {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64);
        let customer = portfolio.intern_customer(&format!("C{:0width$}", i + 1));

        let theta = frailty.as_ref().map_or(1.0, |g| g.sample(&mut rng));
        let owned: Vec<bool> = loop {
            let draw: Vec<bool> = config.products.iter().map(|p| rng.random::<f64>() < p.ownership_probability).collect();
            if draw.iter().any(|&o| o) {
                break draw;
            }
        };
        let drawn: Vec<Drawn> = declared
            .iter()
            .map(|c| match c {
                CovariateEffect::Categorical { probabilities, .. } => Drawn::Level(draw_level(&mut rng, probabilities)),
                CovariateEffect::Continuous { low, high, .. } => Drawn::Real(if low < high { rng.random_range(*low..*high) } else { *low }),
            })
            .collect();
        let has_history = rng.random::<f64>() < config.history_share;

        for (j, p) in config.products.iter().enumerate() {
            if !owned[j] {
                continue;
            }
            let mut log_freq = p.log_frequency;
            let mut log_sev = p.log_severity;
            let mut values = Vec::with_capacity(p.covariates.len());
            for c in &p.covariates {
                let slot = declared.iter().position(|d| d.name() == c.name()).expect("declared covariate");
                match (c, &drawn[slot]) {
                    (CovariateEffect::Categorical { levels, frequency_effects, severity_effects, .. }, Drawn::Level(l)) => {
                        let l = (*l).min(levels.len() - 1);
                        log_freq += frequency_effects[l];
                        log_sev += severity_effects[l];
                        values.push(CovariateValue::Level(portfolio.intern_label(&levels[l])));
                    }
                    (CovariateEffect::Continuous { frequency_effect, severity_effect, .. }, Drawn::Real(x)) => {
                        log_freq += frequency_effect * x;
                        log_sev += severity_effect * x;
                        values.push(CovariateValue::Real(*x));
                    }
                    _ => return Err(Error::Config(format!("covariate {} declared with two kinds", c.name()))),
                }
            }
            let rate = theta * log_freq.exp();
            let severity_mean = log_sev.exp();

            if has_history {
                for h in 0..config.history_years {
                    let period = config.first_year - config.history_years as i32 + h as i32;
                    let claims = draw_count(&mut rng, p, rate);
                    history.insert(customer, j, PeriodExperience { period, exposure: 1.0, claims })?;
                }
            }
            for t in 0..config.num_years {
                let exposure = if rng.random::<f64>() < config.partial_exposure_probability {
                    rng.random_range(0.1..1.0)
                } else {
                    1.0
                };
                let claim_count = draw_count(&mut rng, p, rate * exposure);
                let claim_total = if claim_count > 0 { draw_total(&mut rng, p, severity_mean, claim_count) } else { 0.0 };
                portfolio.records.push(PolicyRecord {
                    customer,
                    product: j,
                    calendar_year: config.first_year + t as i32,
                    spell: 0,
                    exposure,
                    claim_count,
                    claim_total,
                    covariates: values.clone(),
                });
            }
        }
    }
    Ok((portfolio, history))
}
