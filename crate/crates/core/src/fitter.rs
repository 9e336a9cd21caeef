//! Penalized maximum likelihood by Fisher scoring (PIRLS).
//!
//! The dispersion is held at 1 while iterating and estimated once after
//! convergence. Every update is a Fisher step `δ ← δ + I⁻¹J` on the
//! penalized log-likelihood, halved until the objective does not decrease.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::family::{clamp_mean, estimate_dispersion, profile_nb_size, Family, FamilyKind};
use crate::linalg::{first_dependent_column, inverse_spd, solve_spd};

/// Lower bound on the starting mean.
const START_MEAN_FLOOR: f64 = 1e-6;
/// Relative tolerance for the rank check on `XᵀX + S`.
const RANK_TOLERANCE: f64 = 1e-10;
/// Relative slack allowed when comparing penalized log-likelihoods.
const OBJECTIVE_SLACK: f64 = 1e-12;
const NB_OUTER_MAX: usize = 50;
const NB_LOG_SIZE_TOLERANCE: f64 = 1e-7;

/// A block of columns carrying a quadratic roughness penalty.
#[derive(Debug, Clone)]
pub struct SmoothBlock {
    pub start: usize,
    pub penalty: DMatrix<f64>,
}

/// Model matrix with response, offsets and prior weights.
#[derive(Debug, Clone)]
pub struct Design {
    x: Vec<f64>,
    n: usize,
    p: usize,
    y: Vec<f64>,
    offset: Vec<f64>,
    weight: Vec<f64>,
    names: Vec<String>,
    smooths: Vec<SmoothBlock>,
}

impl Design {
    /// `x` is row-major with `names.len()` columns.
    pub fn new(x: Vec<f64>, y: Vec<f64>, offset: Vec<f64>, weight: Vec<f64>, names: Vec<String>) -> Result<Self> {
        let n = y.len();
        let p = names.len();
        if x.len() != n * p {
            return Err(Error::Shape { expected: n * p, got: x.len() });
        }
        if offset.len() != n {
            return Err(Error::Shape { expected: n, got: offset.len() });
        }
        if weight.len() != n {
            return Err(Error::Shape { expected: n, got: weight.len() });
        }
        Ok(Self { x, n, p, y, offset, weight, names, smooths: Vec::new() })
    }

    /// Attach a penalty to columns `start..start + penalty.nrows()`.
    pub fn with_smooth(mut self, start: usize, penalty: DMatrix<f64>) -> Result<Self> {
        if penalty.nrows() != penalty.ncols() || start + penalty.nrows() > self.p {
            return Err(Error::Shape { expected: self.p - start.min(self.p), got: penalty.nrows() });
        }
        self.smooths.push(SmoothBlock { start, penalty });
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offset
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn smooths(&self) -> &[SmoothBlock] {
        &self.smooths
    }

    /// First column that is identically one, if any.
    pub fn intercept(&self) -> Option<usize> {
        (0..self.p).find(|&j| self.n > 0 && (0..self.n).all(|i| self.x[i * self.p + j] == 1.0))
    }

    /// Keep only the listed columns (smooth blocks are dropped).
    pub fn select_columns(&self, columns: &[usize]) -> Result<Design> {
        if let Some(&bad) = columns.iter().find(|&&j| j >= self.p) {
            return Err(Error::Shape { expected: self.p, got: bad + 1 });
        }
        let mut x = Vec::with_capacity(self.n * columns.len());
        for i in 0..self.n {
            let row = self.row(i);
            x.extend(columns.iter().map(|&j| row[j]));
        }
        let names = columns.iter().map(|&j| self.names[j].clone()).collect();
        Design::new(x, self.y.clone(), self.offset.clone(), self.weight.clone(), names)
    }

    /// Rows reordered by `order`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Design> {
        if order.len() != self.n {
            return Err(Error::Shape { expected: self.n, got: order.len() });
        }
        let mut x = Vec::with_capacity(self.x.len());
        for &i in order {
            x.extend_from_slice(self.row(i));
        }
        let pick = |v: &[f64]| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let mut out = Design::new(x, pick(&self.y), pick(&self.offset), pick(&self.weight), self.names.clone())?;
        out.smooths = self.smooths.clone();
        Ok(out)
    }

    pub fn linear_predictor(&self, i: usize, delta: &[f64]) -> f64 {
        self.offset[i] + self.row(i).iter().zip(delta).map(|(x, d)| x * d).sum::<f64>()
    }

    pub fn mean(&self, i: usize, delta: &[f64]) -> f64 {
        clamp_mean(self.linear_predictor(i, delta).exp())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub max_iterations: usize,
    /// Tolerance on the max-norm of the penalized score.
    pub gradient_tolerance: f64,
    pub step_halving_max: usize,
    /// Smoothing parameters, one per smooth block; missing entries are 0.
    pub penalties: Vec<f64>,
    pub ridge_guard: f64,
    /// Profile the negative binomial size after each inner convergence.
    pub profile_nb_size: bool,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            gradient_tolerance: 1e-8,
            step_halving_max: 30,
            penalties: Vec::new(),
            ridge_guard: 1e-10,
            profile_nb_size: true,
        }
    }
}

/// Result of a converged fit.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub coefficients: Vec<f64>,
    pub names: Vec<String>,
    /// Family at the optimum, including the profiled NB size.
    pub family: Family,
    pub dispersion: f64,
    /// Unpenalized log-likelihood at the estimated dispersion.
    pub loglik: f64,
    /// Penalized log-likelihood with unit dispersion (the iterated objective).
    pub penalized_loglik: f64,
    /// Penalized Fisher information with unit dispersion.
    pub information: DMatrix<f64>,
    /// `φ̂ · I⁻¹` for free-scale families, `I⁻¹` otherwise.
    pub covariance: DMatrix<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Objective after each accepted step, starting value first.
    pub trace: Vec<f64>,
    pub fitted_means: Vec<f64>,
}

impl FitOutcome {
    pub fn std_errors(&self) -> Vec<f64> {
        self.covariance.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

/// `Σ λ_j S_j` embedded in the full coefficient space.
pub fn total_penalty(design: &Design, penalties: &[f64]) -> DMatrix<f64> {
    let p = design.p;
    let mut s = DMatrix::zeros(p, p);
    for (j, block) in design.smooths.iter().enumerate() {
        let lambda = penalties.get(j).copied().unwrap_or(0.0);
        if lambda == 0.0 {
            continue;
        }
        let k = block.penalty.nrows();
        for a in 0..k {
            for b in 0..k {
                s[(block.start + a, block.start + b)] += lambda * block.penalty[(a, b)];
            }
        }
    }
    s
}

fn check_delta(design: &Design, delta: &[f64]) -> Result<()> {
    if delta.len() != design.p {
        return Err(Error::Shape { expected: design.p, got: delta.len() });
    }
    Ok(())
}

fn penalty_term(s: &DMatrix<f64>, delta: &[f64]) -> f64 {
    let d = DVector::from_column_slice(delta);
    0.5 * d.dot(&(s * &d))
}

/// Gradient of the penalized log-likelihood (unit dispersion).
pub fn score_vector(delta: &[f64], design: &Design, family: &Family, penalties: &[f64]) -> Result<DVector<f64>> {
    check_delta(design, delta)?;
    let s = total_penalty(design, penalties);
    Ok(score_with(delta, design, family, &s))
}

fn score_with(delta: &[f64], design: &Design, family: &Family, s: &DMatrix<f64>) -> DVector<f64> {
    let mut g = vec![0.0; design.p];
    for i in 0..design.n {
        let mu = design.mean(i, delta);
        let c = design.weight[i] * (design.y[i] - mu) * mu / family.variance_unchecked(mu);
        for (gj, xj) in g.iter_mut().zip(design.row(i)) {
            *gj += c * xj;
        }
    }
    let mut g = DVector::from_vec(g);
    g -= s * DVector::from_column_slice(delta);
    g
}

/// Penalized expected information `Σ w μ²/v(μ) x xᵀ + Σ λ_j S_j` (unit
/// dispersion).
pub fn fisher_information(delta: &[f64], design: &Design, family: &Family, penalties: &[f64]) -> Result<DMatrix<f64>> {
    check_delta(design, delta)?;
    let s = total_penalty(design, penalties);
    Ok(information_with(delta, design, family, &s))
}

fn information_with(delta: &[f64], design: &Design, family: &Family, s: &DMatrix<f64>) -> DMatrix<f64> {
    let p = design.p;
    let mut upper = vec![0.0; p * p];
    for i in 0..design.n {
        let mu = design.mean(i, delta);
        let w = design.weight[i] * mu * mu / family.variance_unchecked(mu);
        let x = design.row(i);
        for a in 0..p {
            let wa = w * x[a];
            if wa == 0.0 {
                continue;
            }
            for b in a..p {
                upper[a * p + b] += wa * x[b];
            }
        }
    }
    let mut info = s.clone();
    for a in 0..p {
        for b in a..p {
            info[(a, b)] += upper[a * p + b];
            if a != b {
                info[(b, a)] += upper[a * p + b];
            }
        }
    }
    info
}

/// Penalized log-likelihood with unit dispersion.
pub fn penalized_loglik(delta: &[f64], design: &Design, family: &Family, penalties: &[f64]) -> Result<f64> {
    check_delta(design, delta)?;
    let s = total_penalty(design, penalties);
    Ok(objective_with(delta, design, family, &s))
}

fn objective_with(delta: &[f64], design: &Design, family: &Family, s: &DMatrix<f64>) -> f64 {
    loglik_at(delta, design, family, 1.0) - penalty_term(s, delta)
}

/// Neumaier-compensated sum of the log-density over rows.
fn loglik_at(delta: &[f64], design: &Design, family: &Family, phi: f64) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for i in 0..design.n {
        let term = family.log_density_kernel(design.y[i], design.mean(i, delta), phi, design.weight[i]);
        let t = sum + term;
        if sum.abs() >= term.abs() {
            carry += (sum - t) + term;
        } else {
            carry += (term - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Intercept at the log of the weighted mean rate (floored), everything
/// else zero.
pub fn starting_values(design: &Design) -> Vec<f64> {
    let mut delta = vec![0.0; design.p];
    if let Some(j) = design.intercept() {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..design.n {
            num += design.weight[i] * design.y[i];
            den += design.weight[i] * design.offset[i].exp();
        }
        let rate = if den > 0.0 { num / den } else { 0.0 };
        delta[j] = rate.max(START_MEAN_FLOOR).ln();
    }
    delta
}

fn check_support(design: &Design, family: &Family) -> Result<()> {
    for i in 0..design.n {
        let y = design.y[i];
        let w = design.weight[i];
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::Validation {
                file: "design".into(),
                row: i,
                message: format!("prior weight must be positive, got {w}"),
            });
        }
        let ok = if family.kind().is_count() { y >= 0.0 && y.fract() == 0.0 } else { y > 0.0 && y.is_finite() };
        if !ok {
            return Err(Error::Validation {
                file: "design".into(),
                row: i,
                message: format!("response {y} outside the {} support", family.kind().name()),
            });
        }
    }
    Ok(())
}

fn check_rank(design: &Design, s: &DMatrix<f64>) -> Result<()> {
    let p = design.p;
    let mut gram = s.clone();
    for i in 0..design.n {
        let x = design.row(i);
        for a in 0..p {
            if x[a] == 0.0 {
                continue;
            }
            for b in 0..p {
                gram[(a, b)] += x[a] * x[b];
            }
        }
    }
    match first_dependent_column(&gram, RANK_TOLERANCE) {
        Some(column) => Err(Error::Rank { column, name: design.names[column].clone() }),
        None => Ok(()),
    }
}

struct InnerFit {
    delta: Vec<f64>,
    iterations: usize,
    gradient_norm: f64,
    trace: Vec<f64>,
}

fn max_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn fisher_scoring(
    design: &Design,
    family: &Family,
    settings: &FitSettings,
    s: &DMatrix<f64>,
    start: Vec<f64>,
) -> Result<InnerFit> {
    let mut delta = start;
    let mut objective = objective_with(&delta, design, family, s);
    let mut trace = vec![objective];
    let mut iterations = 0;
    loop {
        let grad = score_with(&delta, design, family, s);
        let gradient_norm = max_norm(&grad);
        if gradient_norm < settings.gradient_tolerance {
            return Ok(InnerFit { delta, iterations, gradient_norm, trace });
        }
        if iterations >= settings.max_iterations {
            return Err(Error::Convergence { iterations, gradient_norm, last_iterate: delta });
        }
        let info = information_with(&delta, design, family, s);
        let step = solve_spd(&info, &grad, settings.ridge_guard).ok_or_else(|| Error::Convergence {
            iterations,
            gradient_norm,
            last_iterate: delta.clone(),
        })?;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=settings.step_halving_max {
            let candidate: Vec<f64> = delta.iter().zip(step.iter()).map(|(d, s)| d + scale * s).collect();
            let value = objective_with(&candidate, design, family, s);
            if value.is_finite() && value >= objective - OBJECTIVE_SLACK * (1.0 + objective.abs()) {
                accepted = Some((candidate, value));
                break;
            }
            scale *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((candidate, value)) => {
                delta = candidate;
                objective = value;
                trace.push(value);
            }
            None => return Err(Error::Convergence { iterations, gradient_norm, last_iterate: delta }),
        }
    }
}

/// Fit from the default starting values.
pub fn fit_pirls(design: &Design, family: Family, settings: &FitSettings) -> Result<FitOutcome> {
    fit_pirls_from(design, family, settings, starting_values(design))
}

/// Fit from a supplied starting point.
pub fn fit_pirls_from(design: &Design, family: Family, settings: &FitSettings, start: Vec<f64>) -> Result<FitOutcome> {
    check_delta(design, &start)?;
    if design.n == 0 {
        return Err(Error::Degenerate("design has no rows".into()));
    }
    if settings.gradient_tolerance <= 0.0 {
        return Err(Error::Config("gradient tolerance must be positive".into()));
    }
    check_support(design, &family)?;
    let s = total_penalty(design, &settings.penalties);
    check_rank(design, &s)?;

    let mut family = family;
    let mut fit = fisher_scoring(design, &family, settings, &s, start)?;
    if family.kind() == FamilyKind::NegativeBinomial && settings.profile_nb_size {
        let mut iterations = fit.iterations;
        let mut trace = fit.trace.clone();
        for _ in 0..NB_OUTER_MAX {
            let mu: Vec<f64> = (0..design.n).map(|i| design.mean(i, &fit.delta)).collect();
            let size = profile_nb_size(&design.y, &mu, &design.weight);
            let old = family.nb_size().unwrap_or(1.0);
            family = Family::negative_binomial(size)?;
            fit = fisher_scoring(design, &family, settings, &s, fit.delta)?;
            iterations += fit.iterations;
            trace.extend_from_slice(&fit.trace[1..]);
            if (size.ln() - old.ln()).abs() < NB_LOG_SIZE_TOLERANCE {
                break;
            }
        }
        fit.iterations = iterations;
        fit.trace = trace;
    }

    let delta = fit.delta;
    let fitted_means: Vec<f64> = (0..design.n).map(|i| design.mean(i, &delta)).collect();
    let dispersion = estimate_dispersion(&family, &design.y, &fitted_means, &design.weight, design.p)?;
    let phi = if family.kind().has_free_scale() { dispersion } else { 1.0 };
    let information = information_with(&delta, design, &family, &s);
    let covariance = inverse_spd(&information, settings.ridge_guard)
        .ok_or_else(|| Error::Degenerate("information matrix is not invertible".into()))?
        * phi;
    Ok(FitOutcome {
        loglik: loglik_at(&delta, design, &family, phi),
        penalized_loglik: objective_with(&delta, design, &family, &s),
        coefficients: delta,
        names: design.names.clone(),
        family,
        dispersion,
        information,
        covariance,
        iterations: fit.iterations,
        gradient_norm: fit.gradient_norm,
        trace: fit.trace,
        fitted_means,
    })
}
