//! Subcommand implementations. Every command reads its inputs from
//! [`Settings`] and writes CSV/JSON artifacts under the output directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use claimscore::gini::{gini_matrix, minimax_ranks, minimax_select, row_maxima};
use claimscore::model::{expected_losses, fit_component, lr_test, Component, Experience, ScoreTables};
use claimscore::optimizer::{enumerate_grid, optimize_claim_score, write_log, Tuner};
use claimscore::portfolio::{overlap_report, simulate as simulate_portfolio, History};
use claimscore::{ClaimScoreConfig, Error, FamilyKind, FitSettings, FittedModel, ModelSpec, Portfolio, Result, Schema, Structure};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::{Settings, OPTIMAL_CONFIGS_FILE};
use crate::table::{Cell, Table};

/// Result of a command that ran to completion. Per-model or per-product
/// failures are collected here instead of aborting the run.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outcome {
    pub warnings: Vec<String>,
    pub status: i32,
}

impl Outcome {
    fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    fn fail(&mut self, context: &str, err: &Error) {
        self.warnings.push(format!("{context}: {err}"));
        self.status = self.status.max(exit_code(err));
    }
}

/// 1 for bad input, 2 for fits that did not converge, 3 for a search with
/// no feasible configuration.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Convergence { .. } | Error::Rank { .. } => 2,
        Error::Infeasible(_) => 3,
        _ => 1,
    }
}

/// Significance marker at the 5%, 1% and 0.1% levels.
pub fn significance_stars(p_value: f64) -> &'static str {
    if p_value <= 0.001 {
        "***"
    } else if p_value <= 0.01 {
        "**"
    } else if p_value <= 0.05 {
        "*"
    } else {
        ""
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

pub struct Data {
    pub portfolio: Portfolio,
    pub history: History,
}

pub fn load(settings: &Settings) -> Result<Data> {
    let schema = Schema::load_json(&settings.schema)?;
    let portfolio = Portfolio::load_csv(&settings.data, &schema)?.aggregate_policy_years();
    let history = match &settings.history {
        Some(path) => History::load_csv(path, &portfolio)?,
        None => History::default(),
    };
    Ok(Data { portfolio, history })
}

pub fn simulate(settings: &Settings) -> Result<Outcome> {
    let (portfolio, history) = simulate_portfolio(&settings.simulation)?;
    std::fs::create_dir_all(&settings.out)?;
    for path in [&settings.data, &settings.schema] {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
    }
    settings.simulation.schema().save_json(&settings.schema)?;
    portfolio.save_csv(&settings.data)?;
    let history_path = settings.history.clone().unwrap_or_else(|| settings.out.join("history.csv"));
    history.save_csv(&history_path, &portfolio)?;
    std::fs::write(settings.out.join("simulation.json"), serde_json::to_string_pretty(&settings.simulation)? + "\n")?;
    Ok(Outcome::default())
}

/// Coefficient table with standard errors, Wald p-values and stars, plus
/// dispersion (and negative binomial size) rows.
pub fn coefficient_table(model: &FittedModel) -> Table {
    let normal = Normal::standard();
    let mut table = Table::new(["term", "estimate", "std_error", "p_value", "significance"]);
    for ((name, &est), se) in model.names().iter().zip(model.coefficients()).zip(model.std_errors()) {
        let p = (se > 0.0).then(|| 2.0 * normal.sf((est / se).abs()));
        let stars = p.map_or("", significance_stars);
        table.push(vec![name.as_str().into(), est.into(), se.into(), p.into(), stars.into()]);
    }
    table.push(vec!["Dispersion".into(), model.dispersion().into(), Cell::Missing, Cell::Missing, "".into()]);
    if let Some(size) = model.family().nb_size() {
        table.push(vec!["Size".into(), size.into(), Cell::Missing, Cell::Missing, "".into()]);
    }
    table
}

struct Prepared {
    data: Data,
    train: Portfolio,
    test: Portfolio,
    configs: BTreeMap<usize, ClaimScoreConfig>,
    tables: ScoreTables,
}

fn prepare(settings: &Settings, outcome: &mut Outcome) -> Result<Prepared> {
    let data = load(settings)?;
    let (train, test) = data.portfolio.train_test_split()?;
    let (configs, warnings) = settings.resolve_score_configs(data.portfolio.schema())?;
    warnings.into_iter().for_each(|w| outcome.warn(w));
    let tables = ScoreTables::build(&Experience::new(&data.portfolio), &data.history, &configs)?;
    Ok(Prepared { data, train, test, configs, tables })
}

fn specs_for(settings: &Settings, product: usize, configs: &BTreeMap<usize, ClaimScoreConfig>) -> Result<Vec<ModelSpec>> {
    Ok(settings.model_specs(product)?.into_iter().map(|s| s.with_configs(configs.clone())).collect())
}

/// Fit tasks run on the pool; results come back in task order.
fn run_fits(
    settings: &Settings,
    tasks: &[(ModelSpec, Component)],
    train: &Portfolio,
    tables: &ScoreTables,
) -> Result<Vec<Result<FittedModel>>> {
    let fit_settings = FitSettings::default();
    Ok(pool(settings.jobs)?.install(|| {
        tasks.par_iter().map(|(spec, comp)| fit_component(spec, *comp, train, tables, &fit_settings)).collect()
    }))
}

pub fn fit(settings: &Settings) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    let prep = prepare(settings, &mut outcome)?;
    let schema = prep.data.portfolio.schema();
    let mut tasks = Vec::new();
    for j in 0..schema.num_products() {
        for spec in specs_for(settings, j, &prep.configs)? {
            tasks.push((spec.clone(), Component::Frequency));
            tasks.push((spec, Component::Severity));
        }
    }
    let results = run_fits(settings, &tasks, &prep.train, &prep.tables)?;

    let dir = settings.out.join("fit");
    let mut summary = Table::new([
        "product", "model", "component", "status", "observations", "coefficients", "loglik", "dispersion", "iterations",
    ]);
    let mut relativities = Table::new(["product", "model", "score_product", "level", "relativity"]);
    for ((spec, comp), result) in tasks.iter().zip(&results) {
        let pname = schema.product_name(spec.product);
        let model = spec.abbreviation();
        match result {
            Ok(m) => {
                coefficient_table(m).save(&dir.join(pname), &format!("{model}.{}", comp.name()))?;
                summary.push(vec![
                    pname.into(),
                    model.as_str().into(),
                    comp.name().into(),
                    "ok".into(),
                    m.observations().into(),
                    m.num_coefficients().into(),
                    m.loglik().into(),
                    m.dispersion().into(),
                    m.iterations().into(),
                ]);
                for (_, block) in m.layout().score_blocks() {
                    let sp = block.product();
                    for level in 1..=block.config().max_level() {
                        let rel = m.relativity(sp, level as f64)?;
                        relativities.push(vec![
                            pname.into(),
                            model.as_str().into(),
                            schema.product_name(sp).into(),
                            level.into(),
                            rel.into(),
                        ]);
                    }
                }
            }
            Err(e) => {
                outcome.fail(&format!("{pname} {model} {}", comp.name()), e);
                let mut row = vec![pname.into(), model.as_str().into(), comp.name().into(), e.to_string().into()];
                row.extend(std::iter::repeat_n(Cell::Missing, 5));
                summary.push(row);
            }
        }
    }
    summary.save(&dir, "summary")?;
    relativities.save(&dir, "relativities")?;
    Ok(outcome)
}

pub fn optimize(settings: &Settings) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    settings.grid.validate()?;
    let data = load(settings)?;
    let schema = data.portfolio.schema();
    let dir = settings.out.join("optimize");
    std::fs::create_dir_all(&dir)?;
    let grid_size = enumerate_grid(&settings.grid).len();
    let mut optimal = BTreeMap::new();
    let mut table = Table::new(["product", "psi", "s", "l0", "gini_pct", "std_error_pct", "feasible", "evaluated"]);
    for j in 0..schema.num_products() {
        let pname = schema.product_name(j);
        let bench = ModelSpec::parse(&settings.benchmark, j)?;
        let result = Tuner::new(&data.portfolio, &data.history, &bench, FitSettings::default())
            .and_then(|tuner| optimize_claim_score(&tuner, &settings.grid, settings.jobs));
        match result {
            Ok(r) => {
                write_log(&r, std::fs::File::create(dir.join(format!("{pname}.log.csv")))?)?;
                let feasible = r.evaluations.iter().filter(|e| e.feasible).count();
                let c = r.best_config;
                table.push(vec![
                    pname.into(),
                    c.psi().into(),
                    c.max_level().into(),
                    c.entry_level().into(),
                    (100.0 * r.best_gini).into(),
                    (100.0 * r.best_gini_se).into(),
                    feasible.into(),
                    r.evaluations.len().into(),
                ]);
                optimal.insert(pname.to_string(), c);
            }
            Err(e @ (Error::Infeasible(_) | Error::Degenerate(_) | Error::Convergence { .. } | Error::Rank { .. })) => {
                outcome.fail(&format!("{pname} search"), &e);
                let mut row = vec![pname.into()];
                row.extend(std::iter::repeat_n(Cell::Missing, 5));
                row.extend([0usize.into(), grid_size.into()]);
                table.push(row);
            }
            Err(e) => return Err(e),
        }
    }
    table.save(&dir, "optimal")?;
    std::fs::write(settings.out.join(OPTIMAL_CONFIGS_FILE), serde_json::to_string_pretty(&optimal)? + "\n")?;
    Ok(outcome)
}

/// Null model of the likelihood-ratio comparison for `alt`: the static
/// model for a one-product score model, the one-product model for a
/// multi-product one.
fn lr_null(alt: &ModelSpec) -> Option<ModelSpec> {
    let mut null = alt.clone();
    match alt.structure {
        Structure::Static => return None,
        Structure::OneProduct => {
            null.structure = Structure::Static;
            null.score_effect = claimscore::ScoreEffect::None;
        }
        Structure::MultiProduct => null.structure = Structure::OneProduct,
    }
    Some(null)
}

pub fn evaluate(settings: &Settings) -> Result<Outcome> {
    let mut outcome = Outcome::default();
    let prep = prepare(settings, &mut outcome)?;
    let schema = prep.data.portfolio.schema();
    let dir = settings.out.join("evaluate");
    std::fs::create_dir_all(&dir)?;
    let mut lr_table = Table::new(["product", "null", "alternative", "statistic", "dof", "p_value", "significance"]);
    for j in 0..schema.num_products() {
        let pname = schema.product_name(j);
        let specs = specs_for(settings, j, &prep.configs)?;

        // frequency fits for requested models and their LR nulls; severity
        // carries no score terms, so one fit per family suffices
        let mut freq_specs: BTreeMap<String, ModelSpec> = BTreeMap::new();
        let mut sev_specs: BTreeMap<FamilyKind, ModelSpec> = BTreeMap::new();
        for spec in &specs {
            freq_specs.entry(spec.abbreviation()).or_insert_with(|| spec.clone());
            sev_specs.entry(spec.severity).or_insert_with(|| spec.clone());
            if let Some(null) = lr_null(spec) {
                freq_specs.entry(null.abbreviation()).or_insert(null);
            }
        }
        let mut tasks: Vec<(ModelSpec, Component)> = freq_specs.values().map(|s| (s.clone(), Component::Frequency)).collect();
        tasks.extend(sev_specs.values().map(|s| (s.clone(), Component::Severity)));
        let results = run_fits(settings, &tasks, &prep.train, &prep.tables)?;
        let mut freq_fits: BTreeMap<String, FittedModel> = BTreeMap::new();
        let mut sev_fits: BTreeMap<FamilyKind, FittedModel> = BTreeMap::new();
        for ((spec, comp), result) in tasks.into_iter().zip(results) {
            match (comp, result) {
                (Component::Frequency, Ok(m)) => {
                    freq_fits.insert(spec.abbreviation(), m);
                }
                (Component::Severity, Ok(m)) => {
                    sev_fits.insert(spec.severity, m);
                }
                (_, Err(e)) => outcome.fail(&format!("{pname} {} {}", spec.abbreviation(), comp.name()), &e),
            }
        }

        let mut names = Vec::new();
        let mut premia = Vec::new();
        for spec in &specs {
            let abbr = spec.abbreviation();
            if names.contains(&abbr) {
                continue;
            }
            let (Some(f), Some(s)) = (freq_fits.get(&abbr), sev_fits.get(&spec.severity)) else { continue };
            premia.push(expected_losses(f, s, &prep.test, &prep.tables)?);
            names.push(abbr);
        }
        let losses: Vec<f64> = prep.test.product_records(j).map(|r| r.claim_total).collect();
        match gini_matrix(&premia, &losses) {
            Ok(matrix) if !matrix.is_empty() => write_gini_tables(&dir, pname, &names, &matrix)?,
            Ok(_) => outcome.warn(format!("{pname}: no model fitted, Gini matrix skipped")),
            Err(e) => outcome.fail(&format!("{pname} Gini matrix"), &e),
        }

        let mut seen = BTreeSet::new();
        for spec in &specs {
            let Some(null) = lr_null(spec) else { continue };
            let (alt_name, null_name) = (spec.abbreviation(), null.abbreviation());
            if !seen.insert(alt_name.clone()) {
                continue;
            }
            let (Some(alt), Some(nul)) = (freq_fits.get(&alt_name), freq_fits.get(&null_name)) else { continue };
            let t = lr_test(nul, alt)?;
            lr_table.push(vec![
                pname.into(),
                null_name.into(),
                alt_name.into(),
                t.statistic.into(),
                t.dof.into(),
                t.p_value.into(),
                significance_stars(t.p_value).into(),
            ]);
        }
    }
    lr_table.save(&dir, "lr_tests")?;
    Ok(outcome)
}

fn write_gini_tables(dir: &Path, product: &str, names: &[String], matrix: &[Vec<claimscore::GiniResult>]) -> Result<()> {
    let mut long = Table::new(["benchmark", "alternative", "gini_pct", "std_error_pct", "degenerate"]);
    for (b, row) in matrix.iter().enumerate() {
        for (a, g) in row.iter().enumerate() {
            long.push(vec![
                names[b].as_str().into(),
                names[a].as_str().into(),
                (100.0 * g.gini).into(),
                (100.0 * g.std_error).into(),
                g.degenerate.into(),
            ]);
        }
    }
    long.save(dir, &format!("{product}.gini"))?;

    let values: Vec<Vec<f64>> = matrix.iter().map(|r| r.iter().map(|g| g.gini).collect()).collect();
    let maxima = row_maxima(&values);
    let ranks = minimax_ranks(&maxima);
    let selected = minimax_select(&values)?;
    let mut minimax = Table::new(["benchmark", "max_gini_pct", "std_error_pct", "against", "rank", "selected"]);
    for (b, row) in values.iter().enumerate() {
        let argmax = row
            .iter()
            .enumerate()
            .filter(|&(a, v)| a != b && !v.is_nan())
            .fold(None::<(usize, f64)>, |best, (a, &v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((a, v)),
            });
        let (max, se, against) = match argmax {
            Some((a, v)) => (Cell::Num(100.0 * v), Cell::Num(100.0 * matrix[b][a].std_error), Cell::from(names[a].as_str())),
            None => (Cell::Missing, Cell::Missing, Cell::Missing),
        };
        minimax.push(vec![names[b].as_str().into(), max, se, against, ranks[b].into(), (b == selected).into()]);
    }
    minimax.save(dir, &format!("{product}.minimax"))
}

pub fn report(settings: &Settings) -> Result<Outcome> {
    let data = load(settings)?;
    let portfolio = &data.portfolio;
    let schema = portfolio.schema();
    let dir = settings.out.join("report");
    let c = schema.num_products();
    let rows = overlap_report(portfolio);

    let mut holders = Table::new(
        std::iter::once("product".to_string())
            .chain((1..=c).map(|m| format!("owns_{m}")))
            .chain(std::iter::once("total".to_string()))
            .chain((1..=c).map(|m| format!("share_{m}_pct"))),
    );
    let mut claims = Table::new(
        std::iter::once("product".to_string())
            .chain((1..=c).map(|m| format!("owns_{m}")))
            .chain((1..=c).map(|m| format!("with_other_claim_{m}")))
            .chain(std::iter::once("total".to_string()))
            .chain((1..=c).map(|m| format!("share_{m}_pct"))),
    );
    for r in &rows {
        let mut h: Vec<Cell> = vec![r.product.as_str().into()];
        h.extend(r.holders.iter().map(|&v| v.into()));
        h.push(r.total_holders().into());
        h.extend(r.holder_shares().into_iter().map(Cell::from));
        holders.push(h);
        let mut k: Vec<Cell> = vec![r.product.as_str().into()];
        k.extend(r.claims.iter().map(|&v| v.into()));
        k.extend(r.claims_with_other.iter().map(|&v| v.into()));
        k.push(r.total_claims().into());
        k.extend(r.claim_shares().into_iter().map(Cell::from));
        claims.push(k);
    }
    holders.save(&dir, "overlap_holders")?;
    claims.save(&dir, "overlap_claims")?;

    #[derive(Default)]
    struct YearTotals {
        records: usize,
        customers: BTreeSet<usize>,
        exposure: f64,
        claims: u64,
        losses: f64,
    }
    let mut by_key: BTreeMap<(usize, i32), YearTotals> = BTreeMap::new();
    for r in portfolio.records() {
        let e = by_key.entry((r.product, r.calendar_year)).or_default();
        e.records += 1;
        e.customers.insert(r.customer);
        e.exposure += r.exposure;
        e.claims += r.claim_count as u64;
        e.losses += r.claim_total;
    }
    let mut summary = Table::new(["product", "year", "records", "customers", "exposure", "claims", "losses", "frequency", "severity"]);
    for ((j, year), e) in &by_key {
        summary.push(vec![
            schema.product_name(*j).into(),
            Cell::Int(*year as i64),
            e.records.into(),
            e.customers.len().into(),
            e.exposure.into(),
            e.claims.into(),
            e.losses.into(),
            (e.claims as f64 / e.exposure).into(),
            (e.claims > 0).then(|| e.losses / e.claims as f64).into(),
        ]);
    }
    summary.save(&dir, "summary")?;
    Ok(Outcome::default())
}
