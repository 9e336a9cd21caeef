//! Dynamic multi-product insurance risk classification.
//!
//! Claim scores summarise each customer's claiming history per product with
//! a bounded `+1 / -Ψ` bonus-malus recursion. The scores of every product a
//! customer holds enter a frequency regression as constrained B-spline (or
//! linear) effects, fitted by penalized Fisher scoring. Competing rate
//! structures are compared with ordered Lorenz curves and ratio Gini indices,
//! and the claim-score parameters themselves are tuned by a constrained grid
//! search on out-of-sample Gini.
//!
//! Module map:
//!
//! - [`family`]: exponential-family kernels (Poisson, NB2, Gamma, inverse Gaussian).
//! - [`spline`]: Cox–de Boor B-spline bases, curvature penalties and the
//!   anchor constraint `f(ℓ₀) = 0`.
//! - [`claim_score`]: the claim-score state machine.
//! - [`portfolio`]: longitudinal records, CSV ingestion, aggregation,
//!   overlap reporting and a synthetic portfolio simulator.
//! - [`model`]: model specifications, design matrices, prediction, premia and
//!   likelihood-ratio tests.
//! - [`fitter`]: penalized iteratively re-weighted least squares.
//! - [`gini`]: ordered Lorenz curves, ratio Gini indices and mini-max selection.
//! - [`optimizer`]: grid search over claim-score parameters.

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod claim_score;
pub mod error;
pub mod family;
pub mod fitter;
pub mod gini;
pub mod model;
pub mod optimizer;
pub mod portfolio;
pub mod spline;

mod linalg;

pub use claim_score::{ClaimScoreConfig, ScoreState};
pub use error::{Error, Result};
pub use family::{Family, FamilyKind, Link};
pub use fitter::{Design, FitOutcome, FitSettings};
pub use gini::{GiniResult, LorenzCurve};
pub use model::{FittedModel, ModelSpec, ScoreEffect, Structure};
pub use optimizer::{GridSpec, SearchResult};
pub use portfolio::{Portfolio, PolicyRecord, Schema, SimulationConfig};
pub use spline::{ConstrainedBasis, SplineBasis};
