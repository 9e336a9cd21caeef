//! Exponential-family kernels for claim frequencies and severities.
//!
//! Every family is used with the log link. Densities are written in the
//! dispersion/weight form `p(y) = exp(w/φ (ϑy − A(ϑ))) h(y, w, φ)`, so a
//! severity observation that is the average of `w` claims has dispersion
//! `φ / w`. Count families treat `w` as a multiplicative likelihood weight.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Lower clamp applied to fitted means after the inverse link.
pub const MU_MIN: f64 = 1e-12;
/// Upper clamp applied to fitted means after the inverse link.
pub const MU_MAX: f64 = 1e12;

/// Bounds of the profiled negative binomial size, on the log scale.
const LOG_SIZE_BOUNDS: (f64, f64) = (-10.0, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FamilyKind {
    Poisson,
    NegativeBinomial,
    Gamma,
    InverseGaussian,
}

impl FamilyKind {
    pub fn is_count(self) -> bool {
        matches!(self, FamilyKind::Poisson | FamilyKind::NegativeBinomial)
    }

    /// Families whose dispersion is a free scale parameter.
    pub fn has_free_scale(self) -> bool {
        matches!(self, FamilyKind::Gamma | FamilyKind::InverseGaussian)
    }

    /// Default member of the family (NB starts at size 1 before profiling).
    pub fn default_family(self) -> Family {
        match self {
            FamilyKind::Poisson => Family::Poisson,
            FamilyKind::NegativeBinomial => Family::NegativeBinomial { size: 1.0 },
            FamilyKind::Gamma => Family::Gamma,
            FamilyKind::InverseGaussian => Family::InverseGaussian,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Poisson => "Poisson",
            FamilyKind::NegativeBinomial => "Negative Binomial",
            FamilyKind::Gamma => "Gamma",
            FamilyKind::InverseGaussian => "Inverse-Gaussian",
        }
    }
}

/// A distribution family. The negative binomial uses the NB2 form with
/// variance `μ + μ²/size`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Poisson,
    NegativeBinomial { size: f64 },
    Gamma,
    InverseGaussian,
}

/// Link function descriptor. Only the log link is used for ratemaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Link {
    #[default]
    Log,
}

impl Link {
    /// `g(μ)`
    pub fn link(self, mu: f64) -> f64 {
        match self {
            Link::Log => mu.ln(),
        }
    }

    /// `g⁻¹(η)`
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Log => eta.exp(),
        }
    }

    /// `g′(μ)`
    pub fn derivative(self, mu: f64) -> f64 {
        match self {
            Link::Log => 1.0 / mu,
        }
    }
}

/// Clamp a mean into `[MU_MIN, MU_MAX]`.
pub fn clamp_mean(mu: f64) -> f64 {
    if mu.is_nan() {
        MU_MIN
    } else {
        mu.clamp(MU_MIN, MU_MAX)
    }
}

impl Family {
    pub fn kind(&self) -> FamilyKind {
        match self {
            Family::Poisson => FamilyKind::Poisson,
            Family::NegativeBinomial { .. } => FamilyKind::NegativeBinomial,
            Family::Gamma => FamilyKind::Gamma,
            Family::InverseGaussian => FamilyKind::InverseGaussian,
        }
    }

    pub fn nb_size(&self) -> Option<f64> {
        match self {
            Family::NegativeBinomial { size } => Some(*size),
            _ => None,
        }
    }

    pub fn negative_binomial(size: f64) -> Result<Self> {
        if !(size > 0.0 && size.is_finite()) {
            return Err(Error::domain(format!("negative binomial size must be positive, got {size}")));
        }
        Ok(Family::NegativeBinomial { size })
    }

    /// Variance function `v(μ)`.
    pub fn variance(&self, mu: f64) -> Result<f64> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::domain(format!("variance needs μ > 0, got {mu}")));
        }
        Ok(self.variance_unchecked(mu))
    }

    #[inline]
    pub(crate) fn variance_unchecked(&self, mu: f64) -> f64 {
        match *self {
            Family::Poisson => mu,
            Family::NegativeBinomial { size } => mu + mu * mu / size,
            Family::Gamma => mu * mu,
            Family::InverseGaussian => mu * mu * mu,
        }
    }

    /// Canonical parameter `ϑ = (A′)⁻¹(μ)`.
    pub fn canonical(&self, mu: f64) -> f64 {
        match *self {
            Family::Poisson => mu.ln(),
            Family::NegativeBinomial { size } => (mu / (mu + size)).ln(),
            Family::Gamma => -1.0 / mu,
            Family::InverseGaussian => -0.5 / (mu * mu),
        }
    }

    /// Mean mapping `μ = A′(ϑ)`.
    pub fn mean_from_canonical(&self, theta: f64) -> f64 {
        match *self {
            Family::Poisson => theta.exp(),
            Family::NegativeBinomial { size } => {
                let e = theta.exp();
                size * e / (1.0 - e)
            }
            Family::Gamma => -1.0 / theta,
            Family::InverseGaussian => (-2.0 * theta).powf(-0.5),
        }
    }

    fn check_support(&self, y: f64, mu: f64, phi: f64, w: f64) -> Result<()> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::domain(format!("mean must be positive, got {mu}")));
        }
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::domain(format!("weight must be positive, got {w}")));
        }
        if !(phi > 0.0) || !phi.is_finite() {
            return Err(Error::domain(format!("dispersion must be positive, got {phi}")));
        }
        match self.kind() {
            FamilyKind::Poisson | FamilyKind::NegativeBinomial => {
                if !(y >= 0.0) || (y - y.round()).abs() > 1e-9 {
                    return Err(Error::domain(format!(
                        "{} response must be a non-negative integer, got {y}",
                        self.kind().name()
                    )));
                }
            }
            FamilyKind::Gamma | FamilyKind::InverseGaussian => {
                if !(y > 0.0) || !y.is_finite() {
                    return Err(Error::domain(format!(
                        "{} response must be positive, got {y}",
                        self.kind().name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Exact log-density (or log-mass) at `y`, including normalizing terms.
    pub fn log_density(&self, y: f64, mu: f64, phi: f64, w: f64) -> Result<f64> {
        self.check_support(y, mu, phi, w)?;
        Ok(self.log_density_kernel(y, mu, phi, w))
    }

    /// Log-density without support checks. Count families use the
    /// continuous `lnΓ` extension in `y`, so the expression is smooth in both
    /// arguments.
    pub fn log_density_kernel(&self, y: f64, mu: f64, phi: f64, w: f64) -> f64 {
        match *self {
            Family::Poisson => w * (xlogy(y, mu) - mu - ln_gamma(y + 1.0)),
            Family::NegativeBinomial { size } => w * nb_log_mass(y, mu, size),
            Family::Gamma => {
                let shape = w / phi;
                shape * (shape / mu).ln() + (shape - 1.0) * y.ln() - shape * y / mu - ln_gamma(shape)
            }
            Family::InverseGaussian => {
                let psi = phi / w;
                let r = y - mu;
                -0.5 * (2.0 * std::f64::consts::PI * psi * y * y * y).ln() - r * r / (2.0 * psi * mu * mu * y)
            }
        }
    }

    /// Weighted unit deviance `w · d(y, μ)`.
    pub fn deviance(&self, y: f64, mu: f64, w: f64) -> Result<f64> {
        self.check_support(y, mu, 1.0, w)?;
        Ok(w * self.unit_deviance(y, mu))
    }

    pub(crate) fn unit_deviance(&self, y: f64, mu: f64) -> f64 {
        let d = match *self {
            Family::Poisson => 2.0 * mu * xlogx_excess((y - mu) / mu),
            Family::NegativeBinomial { size } => {
                let own = mu * xlogx_excess((y - mu) / mu);
                let pooled = (mu + size) * xlogx_excess((y - mu) / (mu + size));
                2.0 * (own - pooled)
            }
            Family::Gamma => 2.0 * log_excess((y - mu) / mu),
            Family::InverseGaussian => {
                let r = y - mu;
                r * r / (mu * mu * y)
            }
        };
        d.max(0.0)
    }
}

/// `y ln μ` with the convention `0 · ln μ = 0`.
fn xlogy(y: f64, mu: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        y * mu.ln()
    }
}

/// `(1+t) ln(1+t) − t`, accurate near `t = 0`; equals 1 at `t = −1`.
fn xlogx_excess(t: f64) -> f64 {
    if t <= -1.0 {
        return 1.0;
    }
    if t.abs() < 1e-4 {
        // Σ_{n≥2} (−1)ⁿ tⁿ / (n(n−1))
        let t2 = t * t;
        return t2 * (0.5 - t / 6.0 + t2 / 12.0 - t2 * t / 20.0);
    }
    (1.0 + t) * t.ln_1p() - t
}

/// `t − ln(1+t)`, accurate near `t = 0`.
fn log_excess(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        // Σ_{n≥2} (−1)ⁿ tⁿ / n
        let t2 = t * t;
        return t2 * (0.5 - t / 3.0 + t2 / 4.0 - t2 * t / 5.0);
    }
    t - t.ln_1p()
}

/// NB2 log-mass. For integral `y` the ratio `Γ(y+r)/Γ(r)` is summed exactly.
fn nb_log_mass(y: f64, mu: f64, size: f64) -> f64 {
    let ratio = if y == y.round() && y < 1000.0 {
        (0..y as u32).map(|i| (size + i as f64).ln()).sum::<f64>()
    } else {
        ln_gamma(y + size) - ln_gamma(size)
    };
    let log_total = (size + mu).ln();
    ratio - ln_gamma(y + 1.0) + size * (size.ln() - log_total) + xlogy(y, mu) - y * log_total
}

/// Pearson (moment) estimate of the dispersion, `Σ w (y−μ)² / v(μ) / (n − p)`.
///
/// Poisson returns 1 by convention.
pub fn estimate_dispersion(
    family: &Family,
    observations: &[f64],
    fitted_means: &[f64],
    weights: &[f64],
    model_dof: usize,
) -> Result<f64> {
    if family.kind() == FamilyKind::Poisson {
        return Ok(1.0);
    }
    let n = observations.len();
    if fitted_means.len() != n {
        return Err(Error::Shape { expected: n, got: fitted_means.len() });
    }
    if weights.len() != n {
        return Err(Error::Shape { expected: n, got: weights.len() });
    }
    if n <= model_dof {
        return Err(Error::DegreesOfFreedom { observations: n, parameters: model_dof });
    }
    let mut total = 0.0;
    for ((&y, &mu), &w) in observations.iter().zip(fitted_means).zip(weights) {
        let r = y - mu;
        total += w * r * r / family.variance(mu)?;
    }
    let phi = total / (n - model_dof) as f64;
    if phi <= 0.0 {
        return Err(Error::DegenerateDispersion);
    }
    Ok(phi)
}

/// Weighted NB log-likelihood as a function of the size, means held fixed.
pub(crate) fn nb_loglik(size: f64, y: &[f64], mu: &[f64], w: &[f64]) -> f64 {
    y.iter()
        .zip(mu)
        .zip(w)
        .map(|((&y, &mu), &w)| w * nb_log_mass(y, mu, size))
        .sum()
}

/// Maximize the NB log-likelihood over `ln(size) ∈ [−10, 10]` by golden
/// section with the means held fixed.
pub fn profile_nb_size(y: &[f64], mu: &[f64], w: &[f64]) -> f64 {
    let objective = |log_size: f64| nb_loglik(log_size.exp(), y, mu, w);
    let (mut lo, mut hi) = LOG_SIZE_BOUNDS;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = objective(a);
    let mut fb = objective(b);
    while hi - lo > 1e-9 {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = objective(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = objective(a);
        }
    }
    (0.5 * (lo + hi)).exp()
}
