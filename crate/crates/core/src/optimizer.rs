//! Grid search over claim-score configurations.
//!
//! For each product, every configuration `(Ψ, s, ℓ₀)` that leaves enough
//! training exposure on every score level is used to fit a one-product cubic
//! GAM frequency model on the training years. Its test-year premia are
//! compared with a static benchmark through the ratio Gini; the best
//! configuration wins.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::claim_score::ClaimScoreConfig;
use crate::error::{Error, Result};
use crate::fitter::FitSettings;
use crate::gini::ratio_gini;
use crate::model::{expected_losses, fit_component, fit_model, Component, Experience, ModelSpec, ScoreEffect, ScoreTable, ScoreTables, Structure};
use crate::portfolio::{History, Portfolio};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub s_min: u32,
    pub s_max: u32,
    /// Restrict `Ψ` to these values (all of `1..s` when absent).
    pub psi_values: Option<Vec<u32>>,
    /// Restrict `ℓ₀` to these values (all of `2..s` when absent).
    pub entry_values: Option<Vec<u32>>,
    /// Smallest share of training exposure each score level must carry.
    pub min_exposure_share: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { s_min: 3, s_max: 25, psi_values: None, entry_values: None, min_exposure_share: 1e-4 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.s_min < 3 || self.s_max < self.s_min {
            return Err(Error::Config(format!("invalid range of maximum levels {}..={}", self.s_min, self.s_max)));
        }
        if !(0.0..1.0).contains(&self.min_exposure_share) {
            return Err(Error::Config("minimum exposure share must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// All configurations of the grid in lexicographic `(s, Ψ, ℓ₀)` order.
pub fn enumerate_grid(grid: &GridSpec) -> Vec<ClaimScoreConfig> {
    let allowed = |list: &Option<Vec<u32>>, v: u32| list.as_ref().is_none_or(|l| l.contains(&v));
    let mut out = Vec::new();
    for s in grid.s_min.max(3)..=grid.s_max {
        for psi in (1..s).filter(|&p| allowed(&grid.psi_values, p)) {
            for l0 in (2..s).filter(|&l| allowed(&grid.entry_values, l)) {
                out.push(ClaimScoreConfig::new(psi, s, l0).expect("grid values satisfy the configuration rules"));
            }
        }
    }
    out
}

/// Training exposure per score level `1..=s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub level_exposure: Vec<f64>,
    pub total_exposure: f64,
}

impl Feasibility {
    /// Levels whose exposure share falls below `share`.
    pub fn failing_levels(&self, share: f64) -> Vec<u32> {
        self.level_exposure
            .iter()
            .enumerate()
            .filter(|(_, &e)| e < share * self.total_exposure)
            .map(|(i, _)| i as u32 + 1)
            .collect()
    }
}

/// Check that every score level carries at least `min_share` of the
/// product's training exposure.
pub fn feasible(table: &ScoreTable, train: &Portfolio, min_share: f64) -> Result<Feasibility> {
    let cfg = table.config();
    let mut level_exposure = vec![0.0; cfg.max_level() as usize];
    let mut total = 0.0;
    for r in train.product_records(table.product()) {
        let state = table.score(r.customer, r.calendar_year).unwrap_or_else(|| cfg.entry_state());
        level_exposure[state.bucket(cfg) as usize - 1] += r.exposure;
        total += r.exposure;
    }
    if !(total > 0.0) {
        return Err(Error::Usage("no training exposure for this product".into()));
    }
    let feasible = level_exposure.iter().all(|&e| e >= min_share * total);
    Ok(Feasibility { feasible, level_exposure, total_exposure: total })
}

/// One row of the search log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub config: ClaimScoreConfig,
    pub feasible: bool,
    pub gini: Option<f64>,
    pub gini_se: Option<f64>,
    pub fit_iterations: Option<usize>,
    pub loglik: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub product: usize,
    pub best_config: ClaimScoreConfig,
    pub best_gini: f64,
    pub best_gini_se: f64,
    pub evaluations: Vec<Evaluation>,
}

impl SearchResult {
    pub fn best_index(&self) -> Option<usize> {
        self.evaluations.iter().position(|e| e.config == self.best_config)
    }
}

/// Training and test data for one product, with the benchmark already
/// fitted.
pub struct Tuner {
    product: usize,
    train: Portfolio,
    test: Portfolio,
    history: History,
    experience: Experience,
    spec_template: ModelSpec,
    benchmark_premia: Vec<f64>,
    test_severity: Vec<f64>,
    test_losses: Vec<f64>,
    settings: FitSettings,
}

impl Tuner {
    /// `benchmark` must be a static spec for `product`; the tuned model is
    /// the one-product cubic GAM with the benchmark's families.
    pub fn new(full: &Portfolio, history: &History, benchmark: &ModelSpec, settings: FitSettings) -> Result<Self> {
        if benchmark.structure != Structure::Static {
            return Err(Error::Config(format!("benchmark {benchmark} is not a static model")));
        }
        let product = benchmark.product;
        let (train, test) = full.train_test_split()?;
        let empty = ScoreTables::default();
        let (bench_freq, bench_sev) = fit_model(benchmark, &train, &empty, &settings)?;
        let benchmark_premia = expected_losses(&bench_freq, &bench_sev, &test, &empty)?;
        let test_severity = bench_sev.predict(&test, &empty)?;
        let test_losses: Vec<f64> = test.product_records(product).map(|r| r.claim_total).collect();
        if !(test_losses.iter().sum::<f64>() > 0.0) {
            return Err(Error::Degenerate(format!("no test-year losses for product {}", full.schema().product_name(product))));
        }
        let spec_template =
            ModelSpec::new(product, benchmark.frequency, benchmark.severity, Structure::OneProduct, ScoreEffect::CubicSpline)?;
        Ok(Self {
            product,
            experience: Experience::new(full),
            history: history.clone(),
            train,
            test,
            spec_template,
            benchmark_premia,
            test_severity,
            test_losses,
            settings,
        })
    }

    pub fn product(&self) -> usize {
        self.product
    }

    pub fn train(&self) -> &Portfolio {
        &self.train
    }

    pub fn score_table(&self, config: ClaimScoreConfig) -> Result<ScoreTable> {
        ScoreTable::build(&self.experience, &self.history, self.product, config)
    }

    /// Feasibility check, fit and test Gini of one configuration.
    pub fn evaluate(&self, config: ClaimScoreConfig, min_share: f64) -> Result<Evaluation> {
        let table = self.score_table(config)?;
        let feas = feasible(&table, &self.train, min_share)?;
        let mut eval =
            Evaluation { config, feasible: feas.feasible, gini: None, gini_se: None, fit_iterations: None, loglik: None, error: None };
        if !feas.feasible {
            return Ok(eval);
        }
        let mut tables = vec![None; self.train.schema().num_products()];
        tables[self.product] = Some(table);
        let tables = ScoreTables::from_tables(tables);
        let spec = self.spec_template.clone().with_configs(BTreeMap::from([(self.product, config)]));
        let result = fit_component(&spec, Component::Frequency, &self.train, &tables, &self.settings).and_then(|fit| {
            let counts = fit.predict(&self.test, &tables)?;
            let premia: Vec<f64> = counts.iter().zip(&self.test_severity).map(|(n, s)| n * s).collect();
            let g = ratio_gini(&self.benchmark_premia, &premia, &self.test_losses)?;
            Ok((fit, g))
        });
        match result {
            Ok((fit, g)) => {
                eval.gini = Some(g.gini);
                eval.gini_se = Some(g.std_error);
                eval.fit_iterations = Some(fit.iterations());
                eval.loglik = Some(fit.loglik());
            }
            Err(e) => eval.error = Some(e.to_string()),
        }
        Ok(eval)
    }
}

/// Evaluate the grid on a pool of `jobs` workers and pick the configuration
/// with the highest test Gini (ties: smaller `s`, then `Ψ`, then `ℓ₀`).
pub fn optimize_claim_score(tuner: &Tuner, grid: &GridSpec, jobs: usize) -> Result<SearchResult> {
    grid.validate()?;
    let configs = enumerate_grid(grid);
    if configs.is_empty() {
        return Err(Error::Config("the grid is empty".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let evaluations: Vec<Evaluation> = pool.install(|| {
        configs.par_iter().map(|&cfg| tuner.evaluate(cfg, grid.min_exposure_share)).collect::<Result<Vec<_>>>()
    })?;
    select_best(tuner, grid, evaluations)
}

fn select_best(tuner: &Tuner, grid: &GridSpec, evaluations: Vec<Evaluation>) -> Result<SearchResult> {
    let mut best: Option<&Evaluation> = None;
    for e in &evaluations {
        let Some(g) = e.gini else { continue };
        let better = match best {
            None => true,
            Some(b) => g > b.gini.expect("best has a Gini") || (g == b.gini.expect("best has a Gini") && e.config.grid_key() < b.config.grid_key()),
        };
        if better {
            best = Some(e);
        }
    }
    match best {
        Some(b) => Ok(SearchResult {
            product: tuner.product,
            best_config: b.config,
            best_gini: b.gini.expect("best has a Gini"),
            best_gini_se: b.gini_se.unwrap_or(0.0),
            evaluations,
        }),
        None => Err(Error::Infeasible(infeasibility_report(tuner, grid, &evaluations))),
    }
}

fn infeasibility_report(tuner: &Tuner, grid: &GridSpec, evaluations: &[Evaluation]) -> String {
    let failed_fits = evaluations.iter().filter(|e| e.feasible).count();
    // the configuration whose emptiest level comes closest to the threshold
    let mut tightest: Option<(f64, ClaimScoreConfig, Vec<u32>)> = None;
    for e in evaluations.iter().filter(|e| !e.feasible) {
        let Ok(table) = tuner.score_table(e.config) else { continue };
        let Ok(f) = feasible(&table, &tuner.train, grid.min_exposure_share) else { continue };
        let worst = f.level_exposure.iter().copied().fold(f64::INFINITY, f64::min) / f.total_exposure;
        if tightest.as_ref().is_none_or(|(w, _, _)| worst > *w) {
            tightest = Some((worst, e.config, f.failing_levels(grid.min_exposure_share)));
        }
    }
    let mut msg = format!("{} configurations, {} feasible but failed to fit", evaluations.len(), failed_fits);
    if let Some((share, cfg, levels)) = tightest {
        msg.push_str(&format!("; tightest {cfg}: levels {levels:?} below threshold, smallest share {share:.3e}"));
    }
    msg
}

/// Search log as CSV, one row per configuration, with the winner flagged.
pub fn write_log<W: std::io::Write>(result: &SearchResult, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["config_psi", "config_s", "config_l0", "feasible", "gini", "gini_se", "fit_iterations", "loglik", "best"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for e in &result.evaluations {
        wtr.write_record([
            e.config.psi().to_string(),
            e.config.max_level().to_string(),
            e.config.entry_level().to_string(),
            e.feasible.to_string(),
            opt(e.gini),
            opt(e.gini_se),
            e.fit_iterations.map(|i| i.to_string()).unwrap_or_default(),
            opt(e.loglik),
            (e.config == result.best_config).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
