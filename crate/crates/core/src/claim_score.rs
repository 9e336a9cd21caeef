//! The claim-score recursion.
//!
//! A customer's score on a product moves up by the exposure after a
//! claim-free period and down by `Ψ · N / e` after `N` claims, truncated to
//! `[1, s]`:
//!
//! ```text
//! ℓ′ = min(max(ℓ + e·𝟙(N = 0) − Ψ·N/e, 1), s)
//! ```
//!
//! New customers start at the entry level `ℓ₀`. Scores are real-valued
//! because of the exposure terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The triple `(Ψ, s, ℓ₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct ClaimScoreConfig {
    psi: u32,
    max_level: u32,
    entry_level: u32,
}

#[derive(Serialize, Deserialize)]
struct RawConfig {
    psi: u32,
    s: u32,
    l0: u32,
}

impl TryFrom<RawConfig> for ClaimScoreConfig {
    type Error = Error;

    fn try_from(raw: RawConfig) -> Result<Self> {
        ClaimScoreConfig::new(raw.psi, raw.s, raw.l0)
    }
}

impl From<ClaimScoreConfig> for RawConfig {
    fn from(cfg: ClaimScoreConfig) -> Self {
        RawConfig { psi: cfg.psi, s: cfg.max_level, l0: cfg.entry_level }
    }
}

impl ClaimScoreConfig {
    pub fn new(psi: u32, max_level: u32, entry_level: u32) -> Result<Self> {
        if max_level < 3 {
            return Err(Error::Config(format!("maximum level must be at least 3, got {max_level}")));
        }
        if psi < 1 || psi > max_level - 1 {
            return Err(Error::Config(format!("jump Ψ={psi} must lie in [1, {}]", max_level - 1)));
        }
        if entry_level < 2 || entry_level > max_level - 1 {
            return Err(Error::Config(format!("entry level ℓ₀={entry_level} must lie in [2, {}]", max_level - 1)));
        }
        Ok(Self { psi, max_level, entry_level })
    }

    /// Jump `Ψ` per claim.
    pub fn psi(&self) -> u32 {
        self.psi
    }

    /// Maximum level `s`.
    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    /// Entry level `ℓ₀`.
    pub fn entry_level(&self) -> u32 {
        self.entry_level
    }

    /// Lexicographic `(s, Ψ, ℓ₀)` key used for grid order and tie-breaks.
    pub fn grid_key(&self) -> (u32, u32, u32) {
        (self.max_level, self.psi, self.entry_level)
    }

    pub fn entry_state(&self) -> ScoreState {
        ScoreState(self.entry_level as f64)
    }
}

impl std::fmt::Display for ClaimScoreConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.psi, self.max_level, self.entry_level)
    }
}

/// A score level in `[1, s]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ScoreState(f64);

impl ScoreState {
    pub fn new(level: f64, cfg: &ClaimScoreConfig) -> Result<Self> {
        if !(level >= 1.0 && level <= cfg.max_level as f64) {
            return Err(Error::domain(format!("score {level} outside [1, {}]", cfg.max_level)));
        }
        Ok(Self(level))
    }

    pub fn level(&self) -> f64 {
        self.0
    }

    /// Integer level bucket in `1..=s`, rounding half-up.
    pub fn bucket(&self, cfg: &ClaimScoreConfig) -> u32 {
        (self.0 + 0.5).floor().clamp(1.0, cfg.max_level as f64) as u32
    }
}

/// Exposure and claim count of one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodExperience {
    pub period: i32,
    pub exposure: f64,
    pub claims: u32,
}

/// One application of the recursion.
pub fn step(state: ScoreState, exposure: f64, claims: u32, cfg: &ClaimScoreConfig) -> Result<ScoreState> {
    if !(exposure > 0.0) || !exposure.is_finite() {
        return Err(Error::domain(format!("exposure must be positive, got {exposure}")));
    }
    let reward = if claims == 0 { exposure } else { 0.0 };
    let penalty = cfg.psi as f64 * claims as f64 / exposure;
    let next = (state.0 + reward - penalty).max(1.0).min(cfg.max_level as f64);
    Ok(ScoreState(next))
}

/// Scores entering each period: element `t` prices period `t`, element 0 is
/// `initial`, and the last element is the score after all records.
pub fn trajectory(
    records: &[PeriodExperience],
    cfg: &ClaimScoreConfig,
    initial: ScoreState,
) -> Result<Vec<ScoreState>> {
    let mut out = Vec::with_capacity(records.len() + 1);
    out.push(initial);
    let mut state = initial;
    for (i, rec) in records.iter().enumerate() {
        if i > 0 && rec.period <= records[i - 1].period {
            return Err(Error::Ordering { previous: records[i - 1].period, current: rec.period });
        }
        state = step(state, rec.exposure, rec.claims, cfg)?;
        out.push(state);
    }
    Ok(out)
}

/// Run the recursion from `ℓ₀` over pre-sample history and return the final
/// level.
pub fn initialize_from_history(history: &[PeriodExperience], cfg: &ClaimScoreConfig) -> Result<ScoreState> {
    let path = trajectory(history, cfg, cfg.entry_state())?;
    Ok(*path.last().expect("trajectory always holds the initial state"))
}
