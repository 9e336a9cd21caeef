//! Frequency and severity models with claim-score effects.
//!
//! A [`ModelSpec`] names the family pair, the structure (static, own-product
//! score, all-product scores) and the form of the score effect. Fitting
//! builds a [`Layout`] from training data, assembles the design and runs the
//! penalized fitter.

mod design;
mod scores;
mod spec;

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::family::Family;
use crate::fitter::{fit_pirls, FitOutcome, FitSettings};
use crate::portfolio::{PolicyRecord, Portfolio};

pub use design::{Component, Layout, ScoreBlock};
pub use scores::{Experience, ScoreTable, ScoreTables};
pub use spec::{ModelSpec, ScoreEffect, Structure};

/// A fitted frequency or severity component.
#[derive(Debug, Clone)]
pub struct FittedModel {
    spec: ModelSpec,
    layout: Layout,
    outcome: FitOutcome,
    observations: usize,
}

/// Fit one component of `spec` on `train`.
pub fn fit_component(
    spec: &ModelSpec,
    component: Component,
    train: &Portfolio,
    scores: &ScoreTables,
    settings: &FitSettings,
) -> Result<FittedModel> {
    let layout = Layout::new(spec, component, train)?;
    let design = layout.design(train, scores)?;
    let mut settings = settings.clone();
    if settings.penalties.is_empty() {
        settings.penalties = vec![spec.smoothing; design.smooths().len()];
    }
    let family = match component {
        Component::Frequency => spec.frequency.default_family(),
        Component::Severity => spec.severity.default_family(),
    };
    let outcome = fit_pirls(&design, family, &settings)?;
    Ok(FittedModel { spec: spec.clone(), layout, outcome, observations: design.n_rows() })
}

/// Fit the frequency and severity components.
pub fn fit_model(
    spec: &ModelSpec,
    train: &Portfolio,
    scores: &ScoreTables,
    settings: &FitSettings,
) -> Result<(FittedModel, FittedModel)> {
    Ok((
        fit_component(spec, Component::Frequency, train, scores, settings)?,
        fit_component(spec, Component::Severity, train, scores, settings)?,
    ))
}

impl FittedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn component(&self) -> Component {
        self.layout.component()
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn outcome(&self) -> &FitOutcome {
        &self.outcome
    }

    pub fn names(&self) -> &[String] {
        self.layout.names()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.outcome.coefficients
    }

    pub fn std_errors(&self) -> Vec<f64> {
        self.outcome.std_errors()
    }

    pub fn family(&self) -> Family {
        self.outcome.family
    }

    pub fn dispersion(&self) -> f64 {
        self.outcome.dispersion
    }

    pub fn loglik(&self) -> f64 {
        self.outcome.loglik
    }

    pub fn penalized_loglik(&self) -> f64 {
        self.outcome.penalized_loglik
    }

    pub fn information(&self) -> &DMatrix<f64> {
        &self.outcome.information
    }

    pub fn iterations(&self) -> usize {
        self.outcome.iterations
    }

    pub fn gradient_norm(&self) -> f64 {
        self.outcome.gradient_norm
    }

    pub fn num_coefficients(&self) -> usize {
        self.outcome.coefficients.len()
    }

    pub fn observations(&self) -> usize {
        self.observations
    }

    /// `exp(offset + xᵀδ)` for a design row.
    pub fn predict_mean(&self, row: &[f64], offset: f64) -> Result<f64> {
        let delta = self.coefficients();
        if row.len() != delta.len() {
            return Err(Error::Shape { expected: delta.len(), got: row.len() });
        }
        let eta = offset + row.iter().zip(delta).map(|(x, d)| x * d).sum::<f64>();
        Ok(crate::family::clamp_mean(eta.exp()))
    }

    /// Expected claim count (frequency) or average claim size (severity)
    /// of one record.
    pub fn predict_record(&self, record: &PolicyRecord, scores: &ScoreTables) -> Result<f64> {
        let mut row = Vec::with_capacity(self.num_coefficients());
        self.layout.row(record, scores, &mut row)?;
        let offset = match self.component() {
            Component::Frequency => record.exposure.ln(),
            Component::Severity => 0.0,
        };
        self.predict_mean(&row, offset)
    }

    /// Predictions for every record of the model's product, in record order.
    pub fn predict(&self, portfolio: &Portfolio, scores: &ScoreTables) -> Result<Vec<f64>> {
        portfolio.product_records(self.layout.product()).map(|r| self.predict_record(r, scores)).collect()
    }

    /// `exp(f_j(ℓ))` for the score of product `j`.
    pub fn relativity(&self, product: usize, level: f64) -> Result<f64> {
        let (start, block) = self
            .layout
            .score_blocks()
            .iter()
            .find(|(_, b)| b.product() == product)
            .ok_or_else(|| Error::Usage(format!("model has no score effect for product {product}")))?;
        let coefs = &self.coefficients()[*start..*start + block.width()];
        Ok(block.value(coefs, level)?.exp())
    }
}

fn check_pair(freq: &FittedModel, sev: &FittedModel) -> Result<()> {
    if freq.component() != Component::Frequency || sev.component() != Component::Severity {
        return Err(Error::Config("premium needs a frequency and a severity model".into()));
    }
    if freq.layout.product() != sev.layout.product() {
        return Err(Error::Config("frequency and severity models belong to different products".into()));
    }
    if freq.family().kind() != freq.spec.frequency || sev.family().kind() != sev.spec.severity {
        return Err(Error::Config("fitted family does not match the specification".into()));
    }
    Ok(())
}

/// Risk premium per unit exposure: expected frequency times expected
/// severity.
pub fn premium(freq: &FittedModel, sev: &FittedModel, record: &PolicyRecord, scores: &ScoreTables) -> Result<f64> {
    check_pair(freq, sev)?;
    let count = freq.predict_record(record, scores)?;
    let severity = sev.predict_record(record, scores)?;
    Ok(count / record.exposure * severity)
}

/// Expected loss of every record of the product (premium times exposure).
pub fn expected_losses(freq: &FittedModel, sev: &FittedModel, portfolio: &Portfolio, scores: &ScoreTables) -> Result<Vec<f64>> {
    check_pair(freq, sev)?;
    let counts = freq.predict(portfolio, scores)?;
    let severities = sev.predict(portfolio, scores)?;
    Ok(counts.iter().zip(&severities).map(|(n, s)| n * s).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn nested(null: &ModelSpec, alt: &ModelSpec) -> bool {
    if null.structure == Structure::Static {
        return true;
    }
    if null.score_effect != alt.score_effect || null.spline_k != alt.spline_k {
        return false;
    }
    let own = null.product;
    match (null.structure, alt.structure) {
        (Structure::OneProduct, Structure::OneProduct) | (Structure::OneProduct, Structure::MultiProduct) => {
            null.score_configs.get(&own) == alt.score_configs.get(&own)
        }
        (Structure::MultiProduct, Structure::MultiProduct) => null.score_configs == alt.score_configs,
        _ => false,
    }
}

/// Likelihood-ratio test of a nested pair fitted to the same data.
pub fn lr_test(null: &FittedModel, alt: &FittedModel) -> Result<LrTest> {
    let usage = |m: &str| Err(Error::Usage(format!("models {} and {} are not nested: {m}", null.spec, alt.spec)));
    if null.component() != alt.component() || null.layout.product() != alt.layout.product() {
        return usage("different product or component");
    }
    if null.family().kind() != alt.family().kind() {
        return usage("different families");
    }
    if null.observations != alt.observations {
        return usage("different data");
    }
    let score_nested = alt.component() == Component::Severity || nested(&null.spec, &alt.spec);
    if !score_nested || alt.num_coefficients() < null.num_coefficients() {
        return usage("the null score terms are not contained in the alternative");
    }
    let dof = alt.num_coefficients() - null.num_coefficients();
    let statistic = 2.0 * (alt.loglik() - null.loglik());
    let p_value = if dof == 0 || statistic <= 0.0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).map_err(|e| Error::Degenerate(e.to_string()))?.sf(statistic)
    };
    Ok(LrTest { statistic, dof, p_value })
}
