//! Column layout and design-matrix assembly.
//!
//! Columns are ordered as: `Constant`, covariates in schema order
//! (categoricals as treatment dummies against the lexicographically smallest
//! label, continuous values as is), then one score block per scored product
//! in product order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::claim_score::ClaimScoreConfig;
use crate::error::{Error, Result};
use crate::fitter::Design;
use crate::portfolio::{CovariateKind, CovariateValue, PolicyRecord, Portfolio};
use crate::spline::{ConstrainedBasis, SplineBasis};

use super::scores::ScoreTables;
use super::spec::{ModelSpec, ScoreEffect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    Frequency,
    Severity,
}

impl Component {
    pub fn name(self) -> &'static str {
        match self {
            Component::Frequency => "frequency",
            Component::Severity => "severity",
        }
    }
}

#[derive(Debug, Clone)]
enum CovariateColumns {
    Dummies { slot: usize, levels: Vec<u32> },
    Continuous { slot: usize },
}

/// Score contribution of one product.
#[derive(Debug, Clone)]
pub enum ScoreBlock {
    Linear { product: usize, config: ClaimScoreConfig },
    Spline { product: usize, config: ClaimScoreConfig, basis: ConstrainedBasis },
}

impl ScoreBlock {
    fn new(product: usize, config: ClaimScoreConfig, effect: ScoreEffect, k: usize) -> Result<Self> {
        match effect.spline_degree() {
            None => Ok(ScoreBlock::Linear { product, config }),
            Some(degree) => {
                let base = SplineBasis::new(degree, k, 1.0, config.max_level() as f64)?;
                let basis = ConstrainedBasis::new(base, config.entry_level() as f64)?;
                Ok(ScoreBlock::Spline { product, config, basis })
            }
        }
    }

    pub fn product(&self) -> usize {
        match self {
            ScoreBlock::Linear { product, .. } | ScoreBlock::Spline { product, .. } => *product,
        }
    }

    pub fn config(&self) -> &ClaimScoreConfig {
        match self {
            ScoreBlock::Linear { config, .. } | ScoreBlock::Spline { config, .. } => config,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            ScoreBlock::Linear { .. } => 1,
            ScoreBlock::Spline { basis, .. } => basis.num_params(),
        }
    }

    /// Columns at score `level`; exactly zero at the entry level.
    pub fn evaluate(&self, level: f64) -> Result<Vec<f64>> {
        let cfg = self.config();
        let s = cfg.max_level() as f64;
        if !(1.0..=s).contains(&level) {
            return Err(Error::domain(format!("score {level} outside [1, {s}]")));
        }
        let l0 = cfg.entry_level() as f64;
        if level == l0 {
            return Ok(vec![0.0; self.width()]);
        }
        match self {
            ScoreBlock::Linear { .. } => Ok(vec![level - l0]),
            ScoreBlock::Spline { basis, .. } => basis.evaluate(level),
        }
    }

    /// `f(ℓ)` for this block's coefficients.
    pub fn value(&self, coefs: &[f64], level: f64) -> Result<f64> {
        let row = self.evaluate(level)?;
        if coefs.len() != row.len() {
            return Err(Error::Shape { expected: row.len(), got: coefs.len() });
        }
        Ok(row.iter().zip(coefs).map(|(a, b)| a * b).sum())
    }
}

/// Columns of a fitted component, learned from training data.
#[derive(Debug, Clone)]
pub struct Layout {
    product: usize,
    component: Component,
    covariates: Vec<CovariateColumns>,
    scores: Vec<(usize, ScoreBlock)>,
    names: Vec<String>,
}

impl Layout {
    pub fn new(spec: &ModelSpec, component: Component, train: &Portfolio) -> Result<Self> {
        let schema = train.schema();
        spec.validate(schema.num_products())?;
        let product = spec.product;
        let mut names = vec!["Constant".to_string()];
        let mut covariates = Vec::new();
        for (slot, cov) in schema.products[product].covariates.iter().enumerate() {
            match cov.kind {
                CovariateKind::Categorical => {
                    let mut labels: BTreeMap<&str, u32> = BTreeMap::new();
                    for r in train.product_records(product).filter(|r| uses_record(component, r)) {
                        if let CovariateValue::Level(l) = r.covariates[slot] {
                            labels.insert(train.label(l), l);
                        }
                    }
                    // the smallest label is the reference level
                    let levels: Vec<u32> = labels.values().skip(1).copied().collect();
                    for (label, _) in labels.iter().skip(1) {
                        names.push(format!("{}:{}", cov.name, label));
                    }
                    covariates.push(CovariateColumns::Dummies { slot, levels });
                }
                CovariateKind::Continuous => {
                    names.push(cov.name.clone());
                    covariates.push(CovariateColumns::Continuous { slot });
                }
            }
        }
        let mut scores = Vec::new();
        if component == Component::Frequency {
            for j in spec.score_products(schema.num_products()) {
                let cfg = spec.score_configs[&j];
                let block = ScoreBlock::new(j, cfg, spec.score_effect, spec.spline_k)?;
                let start = names.len();
                let sname = schema.product_name(j);
                if block.width() == 1 {
                    names.push(format!("score[{sname}]"));
                } else {
                    names.extend((1..=block.width()).map(|h| format!("score[{sname}]:{h}")));
                }
                scores.push((start, block));
            }
        }
        Ok(Self { product, component, covariates, scores, names })
    }

    pub fn product(&self) -> usize {
        self.product
    }

    pub fn component(&self) -> Component {
        self.component
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    /// Score blocks with their first column.
    pub fn score_blocks(&self) -> &[(usize, ScoreBlock)] {
        &self.scores
    }

    /// Columns holding score terms.
    pub fn score_columns(&self) -> Vec<usize> {
        self.scores.iter().flat_map(|(start, b)| *start..*start + b.width()).collect()
    }

    /// Design row of a record of this layout's product. Categorical levels
    /// unseen in training fall on the reference level; unknown scores give
    /// zero columns.
    pub fn row(&self, record: &PolicyRecord, scores: &ScoreTables, out: &mut Vec<f64>) -> Result<()> {
        if record.product != self.product {
            return Err(Error::Usage(format!("record of product {} passed to a product {} model", record.product, self.product)));
        }
        out.clear();
        out.push(1.0);
        for cov in &self.covariates {
            match cov {
                CovariateColumns::Dummies { slot, levels } => {
                    let CovariateValue::Level(l) = record.covariates[*slot] else {
                        return Err(Error::domain("categorical covariate holds a real value"));
                    };
                    out.extend(levels.iter().map(|&lv| if lv == l { 1.0 } else { 0.0 }));
                }
                CovariateColumns::Continuous { slot } => {
                    let CovariateValue::Real(x) = record.covariates[*slot] else {
                        return Err(Error::domain("continuous covariate holds a label"));
                    };
                    out.push(x);
                }
            }
        }
        for (_, block) in &self.scores {
            let table = scores
                .get(block.product())
                .ok_or_else(|| Error::Config(format!("no score table for product {}", block.product())))?;
            if table.config() != block.config() {
                return Err(Error::Config(format!(
                    "score table for product {} uses {} but the model expects {}",
                    block.product(),
                    table.config(),
                    block.config()
                )));
            }
            match table.score(record.customer, record.calendar_year) {
                Some(state) => out.extend(block.evaluate(state.level())?),
                None => out.extend(std::iter::repeat_n(0.0, block.width())),
            }
        }
        Ok(())
    }

    /// Records of this layout's product entering the component's fit:
    /// every record for frequency, records with claims for severity.
    pub fn rows<'a>(&self, portfolio: &'a Portfolio) -> impl Iterator<Item = &'a PolicyRecord> {
        let component = self.component;
        portfolio.product_records(self.product).filter(move |r| uses_record(component, r))
    }

    pub fn design(&self, portfolio: &Portfolio, scores: &ScoreTables) -> Result<Design> {
        let p = self.width();
        let mut x = Vec::new();
        let (mut y, mut offset, mut weight) = (Vec::new(), Vec::new(), Vec::new());
        let mut row = Vec::with_capacity(p);
        for r in self.rows(portfolio) {
            self.row(r, scores, &mut row)?;
            x.extend_from_slice(&row);
            let (resp, off, w) = response(self.component, r);
            y.push(resp);
            offset.push(off);
            weight.push(w);
        }
        let mut design = Design::new(x, y, offset, weight, self.names.clone())?;
        for (start, block) in &self.scores {
            if let ScoreBlock::Spline { basis, .. } = block {
                design = design.with_smooth(*start, basis.penalty())?;
            }
        }
        Ok(design)
    }
}

fn uses_record(component: Component, r: &PolicyRecord) -> bool {
    component == Component::Frequency || r.claim_count > 0
}

/// Response, offset and prior weight of a record.
pub(crate) fn response(component: Component, r: &PolicyRecord) -> (f64, f64, f64) {
    match component {
        Component::Frequency => (r.claim_count as f64, r.exposure.ln(), 1.0),
        Component::Severity => {
            let n = r.claim_count as f64;
            (r.claim_total / n, 0.0, n)
        }
    }
}
