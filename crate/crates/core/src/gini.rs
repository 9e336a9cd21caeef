//! Ordered Lorenz curves, ratio Gini indices and mini-max selection.
//!
//! Policies are ordered by the relativity `R = P_alt / P_bench`. The curve
//! plots the cumulative share of benchmark premium against the cumulative
//! share of losses; policies with equal relativity enter as one block.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LorenzCurve {
    points: Vec<(f64, f64)>,
}

impl LorenzCurve {
    /// Points from `(0, 0)` to `(1, 1)`.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// The line of equality.
    pub fn diagonal() -> Self {
        Self { points: vec![(0.0, 0.0), (1.0, 1.0)] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GiniResult {
    pub gini: f64,
    pub std_error: f64,
    /// The variance estimate collapsed to zero.
    pub degenerate: bool,
    pub curve: LorenzCurve,
}

impl GiniResult {
    /// Half the ratio Gini, read as the attainable profit share.
    pub fn profit_potential(&self) -> f64 {
        self.gini / 2.0
    }
}

/// Elementwise `P_alt / P_bench`.
pub fn relativities(premium_alt: &[f64], premium_bench: &[f64]) -> Result<Vec<f64>> {
    if premium_alt.len() != premium_bench.len() {
        return Err(Error::Shape { expected: premium_bench.len(), got: premium_alt.len() });
    }
    premium_alt
        .iter()
        .zip(premium_bench)
        .map(|(&a, &b)| {
            if !(b > 0.0) || !b.is_finite() {
                Err(Error::domain(format!("benchmark premium must be positive, got {b}")))
            } else if !(a >= 0.0) || !a.is_finite() {
                Err(Error::domain(format!("alternative premium must be nonnegative, got {a}")))
            } else {
                Ok(a / b)
            }
        })
        .collect()
}

fn check_inputs(premium_bench: &[f64], losses: &[f64], rel: &[f64]) -> Result<()> {
    let n = premium_bench.len();
    for len in [losses.len(), rel.len()] {
        if len != n {
            return Err(Error::Shape { expected: n, got: len });
        }
    }
    if let Some(l) = losses.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(Error::domain(format!("losses must be nonnegative, got {l}")));
    }
    if let Some(p) = premium_bench.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
        return Err(Error::domain(format!("benchmark premium must be nonnegative, got {p}")));
    }
    if rel.iter().any(|r| r.is_nan()) {
        return Err(Error::domain("relativity is NaN"));
    }
    if !(losses.iter().sum::<f64>() > 0.0) {
        return Err(Error::Degenerate("total loss is zero".into()));
    }
    if !(premium_bench.iter().sum::<f64>() > 0.0) {
        return Err(Error::Degenerate("total benchmark premium is zero".into()));
    }
    Ok(())
}

/// Policy indices sorted by `(R, P, L)`, plus the group boundaries of equal
/// relativity.
fn ordered_groups(premium_bench: &[f64], losses: &[f64], rel: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..rel.len()).collect();
    order.sort_by(|&a, &b| {
        rel[a]
            .total_cmp(&rel[b])
            .then(premium_bench[a].total_cmp(&premium_bench[b]))
            .then(losses[a].total_cmp(&losses[b]))
    });
    let mut ends = Vec::new();
    for k in 0..order.len() {
        if k + 1 == order.len() || rel[order[k + 1]].total_cmp(&rel[order[k]]) != Ordering::Equal {
            ends.push(k + 1);
        }
    }
    (order, ends)
}

pub fn ordered_lorenz(premium_bench: &[f64], losses: &[f64], rel: &[f64]) -> Result<LorenzCurve> {
    check_inputs(premium_bench, losses, rel)?;
    let (order, ends) = ordered_groups(premium_bench, losses, rel);
    let mut cum = Vec::with_capacity(ends.len());
    let (mut p, mut l) = (0.0, 0.0);
    let mut start = 0;
    for &end in &ends {
        for &i in &order[start..end] {
            p += premium_bench[i];
            l += losses[i];
        }
        cum.push((p, l));
        start = end;
    }
    let mut points = Vec::with_capacity(cum.len() + 1);
    points.push((0.0, 0.0));
    points.extend(cum.iter().map(|&(cp, cl)| (cp / p, cl / l)));
    Ok(LorenzCurve { points })
}

/// `1 − Σ Δx (y_next + y_prev)`, twice the area between the diagonal and
/// the curve.
pub fn gini_index(curve: &LorenzCurve) -> f64 {
    let area: f64 = curve.points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1)).sum();
    1.0 - area
}

/// Asymptotic standard error of the ratio Gini from plug-in moments.
/// Returns the error and whether the variance estimate degenerated.
pub fn gini_std_error(premium_bench: &[f64], losses: &[f64], rel: &[f64]) -> Result<(f64, bool)> {
    check_inputs(premium_bench, losses, rel)?;
    let n = rel.len();
    if n < 2 {
        return Err(Error::Usage("standard error needs at least two policies".into()));
    }
    let hn = n as f64;
    let mean_l = losses.iter().sum::<f64>() / hn;
    let mean_p = premium_bench.iter().sum::<f64>() / hn;

    // empirical F_P(R_j) and F_L(R_j) with ties included
    let (order, ends) = ordered_groups(premium_bench, losses, rel);
    let total_p: f64 = premium_bench.iter().sum();
    let total_l: f64 = losses.iter().sum();
    let mut f_p = vec![0.0; n];
    let mut f_l = vec![0.0; n];
    let (mut cp, mut cl) = (0.0, 0.0);
    let mut start = 0;
    for &end in &ends {
        for &i in &order[start..end] {
            cp += premium_bench[i];
            cl += losses[i];
        }
        for &i in &order[start..end] {
            f_p[i] = cp / total_p;
            f_l[i] = cl / total_l;
        }
        start = end;
    }

    let h: Vec<f64> = (0..n)
        .map(|j| 0.5 * (mean_l * premium_bench[j] * f_l[j] + losses[j] * mean_p * (1.0 - f_p[j])))
        .collect();
    let mean_h = h.iter().sum::<f64>() / hn;
    let cov = |a: &[f64], ma: f64, b: &[f64], mb: f64| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / hn
    };
    let s_h = cov(&h, mean_h, &h, mean_h);
    let s_l = cov(losses, mean_l, losses, mean_l);
    let s_p = cov(premium_bench, mean_p, premium_bench, mean_p);
    let s_hl = cov(&h, mean_h, losses, mean_l);
    let s_hp = cov(&h, mean_h, premium_bench, mean_p);
    let s_lp = cov(losses, mean_l, premium_bench, mean_p);

    let inner = 4.0 * s_h + mean_h * mean_h / (mean_l * mean_l) * s_l + mean_h * mean_h / (mean_p * mean_p) * s_p
        - 4.0 * mean_h / mean_l * s_hl
        - 4.0 * mean_h / mean_p * s_hp
        + 2.0 * mean_h * mean_h / (mean_l * mean_p) * s_lp;
    let sigma = 4.0 / (mean_l * mean_l * mean_p * mean_p) * inner;
    if !(sigma > 0.0) || (s_h == 0.0 && s_l == 0.0 && s_p == 0.0) {
        return Ok((0.0, true));
    }
    Ok(((sigma / hn).sqrt(), false))
}

/// Ratio Gini of an alternative premium against a benchmark.
pub fn ratio_gini(premium_bench: &[f64], premium_alt: &[f64], losses: &[f64]) -> Result<GiniResult> {
    let rel = relativities(premium_alt, premium_bench)?;
    let curve = ordered_lorenz(premium_bench, losses, &rel)?;
    let (std_error, degenerate) = gini_std_error(premium_bench, losses, &rel)?;
    Ok(GiniResult { gini: gini_index(&curve), std_error, degenerate, curve })
}

/// All benchmark × alternative ratio Ginis. Entry `[b][a]` uses model `b`
/// as the benchmark and model `a` as the alternative.
pub fn gini_matrix(premia: &[Vec<f64>], losses: &[f64]) -> Result<Vec<Vec<GiniResult>>> {
    let m = premia.len();
    let cells: Vec<Result<GiniResult>> = (0..m * m)
        .into_par_iter()
        .map(|k| ratio_gini(&premia[k / m], &premia[k % m], losses))
        .collect();
    let mut rows = Vec::with_capacity(m);
    let mut it = cells.into_iter();
    for _ in 0..m {
        rows.push(it.by_ref().take(m).collect::<Result<Vec<_>>>()?);
    }
    Ok(rows)
}

/// Row maxima with the diagonal excluded. NaN entries are skipped; a row
/// with nothing left has maximum `−∞`.
pub fn row_maxima(matrix: &[Vec<f64>]) -> Vec<f64> {
    matrix
        .iter()
        .enumerate()
        .map(|(b, row)| {
            row.iter()
                .enumerate()
                .filter(|&(a, v)| a != b && !v.is_nan())
                .fold(f64::NEG_INFINITY, |m, (_, &v)| m.max(v))
        })
        .collect()
}

/// Index of the smallest row maximum; ties go to the lowest index.
pub fn argmin_row_maxima(maxima: &[f64]) -> Result<usize> {
    if maxima.is_empty() {
        return Err(Error::Usage("no benchmarks to select from".into()));
    }
    let mut best = 0;
    for (i, &v) in maxima.iter().enumerate().skip(1) {
        if v.total_cmp(&maxima[best]) == Ordering::Less {
            best = i;
        }
    }
    Ok(best)
}

/// The benchmark whose largest ratio Gini against any alternative is
/// smallest.
pub fn minimax_select(matrix: &[Vec<f64>]) -> Result<usize> {
    argmin_row_maxima(&row_maxima(matrix))
}

/// Ranks (1 = best) of benchmarks by row maximum, ties by index.
pub fn minimax_ranks(maxima: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..maxima.len()).collect();
    order.sort_by(|&a, &b| maxima[a].total_cmp(&maxima[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; maxima.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}
