//! Model specifications and their abbreviations (`GLM-PG`, `GAM-NBIG-Multi-PL`, ...).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::claim_score::ClaimScoreConfig;
use crate::error::{Error, Result};
use crate::family::FamilyKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Structure {
    Static,
    OneProduct,
    MultiProduct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScoreEffect {
    None,
    /// One slope per score on `ℓ − ℓ₀`.
    LinearInScore,
    CubicSpline,
    PiecewiseLinearSpline,
}

impl ScoreEffect {
    pub fn is_spline(self) -> bool {
        matches!(self, ScoreEffect::CubicSpline | ScoreEffect::PiecewiseLinearSpline)
    }

    pub fn spline_degree(self) -> Option<usize> {
        match self {
            ScoreEffect::CubicSpline => Some(3),
            ScoreEffect::PiecewiseLinearSpline => Some(1),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub product: usize,
    pub frequency: FamilyKind,
    pub severity: FamilyKind,
    pub structure: Structure,
    pub score_effect: ScoreEffect,
    pub score_configs: BTreeMap<usize, ClaimScoreConfig>,
    pub spline_k: usize,
    /// Smoothing parameter applied to every spline block.
    pub smoothing: f64,
}

fn frequency_code(kind: FamilyKind) -> &'static str {
    match kind {
        FamilyKind::Poisson => "P",
        FamilyKind::NegativeBinomial => "NB",
        FamilyKind::Gamma => "G",
        FamilyKind::InverseGaussian => "IG",
    }
}

impl ModelSpec {
    pub const DEFAULT_SPLINE_K: usize = 4;

    pub fn new(product: usize, frequency: FamilyKind, severity: FamilyKind, structure: Structure, score_effect: ScoreEffect) -> Result<Self> {
        let spec = Self {
            product,
            frequency,
            severity,
            structure,
            score_effect,
            score_configs: BTreeMap::new(),
            spline_k: Self::DEFAULT_SPLINE_K,
            smoothing: 0.0,
        };
        spec.check_shape()?;
        Ok(spec)
    }

    /// Parse an abbreviation such as `GAM-NBG-Multi-PL`.
    pub fn parse(abbreviation: &str, product: usize) -> Result<Self> {
        let bad = || Error::Config(format!("unknown model abbreviation {abbreviation:?}"));
        let parts: Vec<&str> = abbreviation.trim().split('-').collect();
        if parts.len() < 2 || parts.len() > 4 {
            return Err(bad());
        }
        let gam = match parts[0] {
            "GLM" => false,
            "GAM" => true,
            _ => return Err(bad()),
        };
        let families = parts[1];
        let (frequency, rest) = if let Some(rest) = families.strip_prefix("NB") {
            (FamilyKind::NegativeBinomial, rest)
        } else if let Some(rest) = families.strip_prefix('P') {
            (FamilyKind::Poisson, rest)
        } else {
            return Err(bad());
        };
        let severity = match rest {
            "G" => FamilyKind::Gamma,
            "IG" => FamilyKind::InverseGaussian,
            _ => return Err(bad()),
        };
        let structure = match parts.get(2).copied() {
            None => Structure::Static,
            Some("One") => Structure::OneProduct,
            Some("Multi") => Structure::MultiProduct,
            Some(_) => return Err(bad()),
        };
        let pl = match parts.get(3).copied() {
            None => false,
            Some("PL") => true,
            Some(_) => return Err(bad()),
        };
        let score_effect = match (gam, structure, pl) {
            (false, Structure::Static, false) => ScoreEffect::None,
            (false, _, false) => ScoreEffect::LinearInScore,
            (true, Structure::Static, _) => return Err(bad()),
            (true, _, false) => ScoreEffect::CubicSpline,
            (true, _, true) => ScoreEffect::PiecewiseLinearSpline,
            (false, _, true) => return Err(bad()),
        };
        Self::new(product, frequency, severity, structure, score_effect)
    }

    pub fn abbreviation(&self) -> String {
        let head = if self.score_effect.is_spline() { "GAM" } else { "GLM" };
        let mut s = format!("{head}-{}{}", frequency_code(self.frequency), frequency_code(self.severity));
        match self.structure {
            Structure::Static => {}
            Structure::OneProduct => s.push_str("-One"),
            Structure::MultiProduct => s.push_str("-Multi"),
        }
        if self.score_effect == ScoreEffect::PiecewiseLinearSpline {
            s.push_str("-PL");
        }
        s
    }

    pub fn with_configs(mut self, configs: BTreeMap<usize, ClaimScoreConfig>) -> Self {
        self.score_configs = configs;
        self
    }

    fn check_shape(&self) -> Result<()> {
        if !self.frequency.is_count() {
            return Err(Error::Config(format!("frequency family {} is not a count family", self.frequency.name())));
        }
        if self.severity.is_count() {
            return Err(Error::Config(format!("severity family {} is a count family", self.severity.name())));
        }
        if (self.structure == Structure::Static) != (self.score_effect == ScoreEffect::None) {
            return Err(Error::Config("static models carry no score effect and dynamic ones need one".into()));
        }
        if self.score_effect.is_spline() && self.spline_k < 3 {
            return Err(Error::Config(format!("spline_k must be at least 3, got {}", self.spline_k)));
        }
        if !(self.smoothing >= 0.0) {
            return Err(Error::Config("smoothing parameter must be nonnegative".into()));
        }
        Ok(())
    }

    /// Products whose scores enter the predictor.
    pub fn score_products(&self, num_products: usize) -> Vec<usize> {
        match self.structure {
            Structure::Static => Vec::new(),
            Structure::OneProduct => vec![self.product],
            Structure::MultiProduct => (0..num_products).collect(),
        }
    }

    pub fn validate(&self, num_products: usize) -> Result<()> {
        self.check_shape()?;
        if self.product >= num_products {
            return Err(Error::Config(format!("product index {} out of range", self.product)));
        }
        for j in self.score_products(num_products) {
            if !self.score_configs.contains_key(&j) {
                return Err(Error::Config(format!("no claim-score configuration for product {j}")));
            }
        }
        Ok(())
    }

    /// Configurations actually used by the predictor.
    pub fn used_configs(&self, num_products: usize) -> BTreeMap<usize, ClaimScoreConfig> {
        self.score_products(num_products)
            .into_iter()
            .filter_map(|j| self.score_configs.get(&j).map(|c| (j, *c)))
            .collect()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.abbreviation())
    }
}
