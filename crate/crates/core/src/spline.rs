//! B-spline bases for claim-score effects.
//!
//! Bases are evaluated with the Cox–de Boor recursion on a clamped knot
//! vector (boundary knots repeated `degree + 1` times, interior knots equally
//! spaced). The curvature penalty `∫ f″(x)² dx` is integrated exactly per knot
//! span with Gauss–Legendre quadrature, and [`ConstrainedBasis`] removes one
//! degree of freedom so that every represented function vanishes at an
//! anchor level.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance for evaluating slightly outside the domain (the point is clamped).
const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    degree: usize,
    knots: Vec<f64>,
    num_params: usize,
    domain: (f64, f64),
}

impl SplineBasis {
    /// Clamped basis with `num_params` functions of the given degree on
    /// `[x_min, x_max]`, interior knots equally spaced.
    pub fn new(degree: usize, num_params: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if num_params < degree + 1 {
            return Err(Error::Config(format!(
                "a degree-{degree} basis needs at least {} parameters, got {num_params}",
                degree + 1
            )));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::Config(format!("empty spline domain [{x_min}, {x_max}]")));
        }
        let interior = num_params - degree - 1;
        let step = (x_max - x_min) / (interior + 1) as f64;
        let mut knots = vec![x_min; degree + 1];
        knots.extend((1..=interior).map(|i| x_min + step * i as f64));
        knots.extend(std::iter::repeat_n(x_max, degree + 1));
        Ok(Self { degree, knots, num_params, domain: (x_min, x_max) })
    }

    pub fn cubic(num_params: usize, x_min: f64, x_max: f64) -> Result<Self> {
        Self::new(3, num_params, x_min, x_max)
    }

    pub fn linear(num_params: usize, x_min: f64, x_max: f64) -> Result<Self> {
        Self::new(1, num_params, x_min, x_max)
    }

    /// Basis on an explicit nondecreasing knot vector. The domain is
    /// `[t_degree, t_k]`, where the functions form a partition of unity.
    pub fn from_knots(degree: usize, knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 * (degree + 1) {
            return Err(Error::Config(format!(
                "degree {degree} needs at least {} knots, got {}",
                2 * (degree + 1),
                knots.len()
            )));
        }
        if knots.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::Config("knots must be nondecreasing".into()));
        }
        let num_params = knots.len() - degree - 1;
        let domain = (knots[degree], knots[num_params]);
        if !(domain.1 > domain.0) {
            return Err(Error::Config("knot vector has an empty domain".into()));
        }
        Ok(Self { degree, knots, num_params, domain })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Greville abscissae; coefficients `a + b·ξ` reproduce the line `a + bx`.
    pub fn greville(&self) -> Vec<f64> {
        (0..self.num_params)
            .map(|i| self.knots[i + 1..=i + self.degree].iter().sum::<f64>() / self.degree.max(1) as f64)
            .collect()
    }

    fn clamp_to_domain(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain;
        let slack = DOMAIN_SLACK * (hi - lo).max(1.0);
        if !(x >= lo - slack && x <= hi + slack) {
            return Err(Error::domain(format!("{x} lies outside the spline domain [{lo}, {hi}]")));
        }
        Ok(x.clamp(lo, hi))
    }

    /// Index `j` of the nonempty knot span `[t_j, t_{j+1})` holding `x`; the
    /// right end of the domain belongs to the last span.
    fn span(&self, x: f64) -> usize {
        let mut found = self.degree;
        for j in self.degree..self.num_params {
            if self.knots[j] < self.knots[j + 1] && self.knots[j] <= x {
                found = j;
            }
        }
        found
    }

    /// All basis functions of degree `deg` supported by the knot vector.
    fn cox_de_boor(&self, deg: usize, span: usize, x: f64) -> Vec<f64> {
        let t = &self.knots;
        let m = t.len();
        let mut b = vec![0.0; m - 1];
        b[span] = 1.0;
        for p in 1..=deg {
            let next: Vec<f64> = (0..m - 1 - p)
                .map(|i| {
                    let left = ratio(x - t[i], t[i + p] - t[i]) * b[i];
                    let right = ratio(t[i + p + 1] - x, t[i + p + 1] - t[i + 1]) * b[i + 1];
                    left + right
                })
                .collect();
            b = next;
        }
        b
    }

    fn derivative_all(&self, deg: usize, order: usize, span: usize, x: f64) -> Vec<f64> {
        let len = self.knots.len() - deg - 1;
        if order == 0 {
            return self.cox_de_boor(deg, span, x);
        }
        if order > deg {
            return vec![0.0; len];
        }
        let lower = self.derivative_all(deg - 1, order - 1, span, x);
        let t = &self.knots;
        let p = deg as f64;
        (0..len)
            .map(|i| p * (ratio(lower[i], t[i + deg] - t[i]) - ratio(lower[i + 1], t[i + deg + 1] - t[i + 1])))
            .collect()
    }

    /// Evaluate all `k` basis functions at `x`.
    pub fn evaluate(&self, x: f64) -> Result<Vec<f64>> {
        self.evaluate_derivative(x, 0)
    }

    /// Evaluate the `order`-th derivative of all basis functions at `x`
    /// (right-sided at interior knots).
    pub fn evaluate_derivative(&self, x: f64, order: usize) -> Result<Vec<f64>> {
        let x = self.clamp_to_domain(x)?;
        let span = self.span(x);
        Ok(self.derivative_all(self.degree, order, span, x))
    }

    /// `S[a][b] = ∫ B_a″(x) B_b″(x) dx` over the domain.
    pub fn penalty_matrix(&self) -> PenaltyMatrix {
        let k = self.num_params;
        let mut entries = DMatrix::zeros(k, k);
        if self.degree < 2 {
            return PenaltyMatrix { entries };
        }
        // B″ has degree (d − 2); the integrand has degree 2d − 4 ≤ 2n − 1.
        let (nodes, weights) = gauss_legendre(self.degree.max(2));
        for j in self.degree..self.num_params {
            let (a, b) = (self.knots[j], self.knots[j + 1]);
            if !(b > a) {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (node, weight) in nodes.iter().zip(&weights) {
                let x = mid + half * node;
                let d2 = DVector::from(self.derivative_all(self.degree, 2, j, x));
                entries += (half * weight) * &d2 * d2.transpose();
            }
        }
        PenaltyMatrix { entries }
    }

    /// Value of the spline with coefficients `coefs` at `x`.
    pub fn value(&self, coefs: &[f64], x: f64) -> Result<f64> {
        if coefs.len() != self.num_params {
            return Err(Error::Shape { expected: self.num_params, got: coefs.len() });
        }
        Ok(self.evaluate(x)?.iter().zip(coefs).map(|(b, c)| b * c).sum())
    }
}

/// `num / den` with the convention `· / 0 = 0`.
#[inline]
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` (Newton on `P_n`).
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn_1 = if n == 1 { 1.0 } else { p0 };
            deriv = n as f64 * (x * pn - pn_1) / (x * x - 1.0);
            let dx = pn / deriv;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Symmetric positive semidefinite curvature penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    entries: DMatrix<f64>,
}

impl PenaltyMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn quadratic_form(&self, coefs: &[f64]) -> f64 {
        let c = DVector::from_column_slice(coefs);
        (c.transpose() * &self.entries * &c)[(0, 0)]
    }
}

/// A basis reparameterized through an orthonormal `k × (k−1)` transform `Z`
/// whose columns span the complement of `B(anchor)`, so that `f(anchor) = 0`
/// for every coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedBasis {
    base: SplineBasis,
    anchor: f64,
    transform: DMatrix<f64>,
}

impl ConstrainedBasis {
    pub fn new(base: SplineBasis, anchor: f64) -> Result<Self> {
        let b = base.evaluate(anchor)?;
        let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-12) {
            return Err(Error::DegenerateAnchor(anchor));
        }
        // Householder reflector H with H·b ∝ e₀; H is symmetric and
        // orthogonal, so its trailing columns are orthogonal to b.
        let k = b.len();
        let mut v = DVector::from_vec(b);
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * norm;
        let vtv = v.dot(&v);
        let householder = DMatrix::identity(k, k) - (2.0 / vtv) * &v * v.transpose();
        let transform = householder.columns(1, k - 1).into_owned();
        Ok(Self { base, anchor, transform })
    }

    pub fn base(&self) -> &SplineBasis {
        &self.base
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn transform(&self) -> &DMatrix<f64> {
        &self.transform
    }

    /// Effective number of parameters, `k − 1`.
    pub fn num_params(&self) -> usize {
        self.transform.ncols()
    }

    /// Constrained basis row `Zᵀ B(x)`.
    pub fn evaluate(&self, x: f64) -> Result<Vec<f64>> {
        let b = DVector::from_vec(self.base.evaluate(x)?);
        Ok((self.transform.transpose() * b).iter().copied().collect())
    }

    /// Transformed penalty `Zᵀ S Z`.
    pub fn penalty(&self) -> DMatrix<f64> {
        let s = self.base.penalty_matrix().into_inner();
        self.transform.transpose() * s * &self.transform
    }

    /// Coefficients on the unconstrained basis, `Z c`.
    pub fn expand(&self, coefs: &[f64]) -> Result<Vec<f64>> {
        if coefs.len() != self.num_params() {
            return Err(Error::Shape { expected: self.num_params(), got: coefs.len() });
        }
        Ok((&self.transform * DVector::from_column_slice(coefs)).iter().copied().collect())
    }

    /// `f(x)` for constrained coefficients.
    pub fn value(&self, coefs: &[f64], x: f64) -> Result<f64> {
        let row = self.evaluate(x)?;
        if coefs.len() != row.len() {
            return Err(Error::Shape { expected: row.len(), got: coefs.len() });
        }
        Ok(row.iter().zip(coefs).map(|(b, c)| b * c).sum())
    }
}

/// Constrain `basis` so that every represented function vanishes at `anchor`.
pub fn constrain(basis: SplineBasis, anchor: f64) -> Result<ConstrainedBasis> {
    ConstrainedBasis::new(basis, anchor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Composite Simpson rule, independent of the Gauss–Legendre path.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut total = f(a) + f(b);
        for i in 1..panels {
            let x = a + h * i as f64;
            total += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        total * h / 3.0
    }

    /// Second derivative by central differences of basis values.
    fn fd_second(basis: &SplineBasis, x: f64, idx: usize) -> f64 {
        let h = 1e-4;
        let (lo, hi) = basis.domain();
        let x = x.clamp(lo + h, hi - h);
        let f = |z: f64| basis.evaluate(z).unwrap()[idx];
        (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
    }

    #[test]
    fn second_derivative_matches_finite_differences() {
        let basis = SplineBasis::cubic(6, 1.0, 10.0).unwrap();
        for &x in &[1.7, 3.3, 5.2, 8.8] {
            let d2 = basis.evaluate_derivative(x, 2).unwrap();
            for (i, d) in d2.iter().enumerate() {
                assert!((fd_second(&basis, x, i) - d).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn clamped_knot_layout() {
        let cubic = SplineBasis::cubic(4, 1.0, 5.0).unwrap();
        assert_eq!(cubic.knots(), &[1.0, 1.0, 1.0, 1.0, 5.0, 5.0, 5.0, 5.0]);
        let linear = SplineBasis::linear(4, 1.0, 7.0).unwrap();
        assert_eq!(linear.knots(), &[1.0, 1.0, 3.0, 5.0, 7.0, 7.0]);
        assert_eq!(linear.knots().len(), 4 + 1 + 1);
    }

    #[test]
    fn hat_function_at_knot() {
        let basis = SplineBasis::linear(3, 1.0, 3.0).unwrap();
        assert_eq!(basis.knots(), &[1.0, 1.0, 2.0, 3.0, 3.0]);
        assert_eq!(basis.evaluate(2.0).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(basis.evaluate(1.5).unwrap(), vec![0.5, 0.5, 0.0]);
        assert_eq!(basis.evaluate(3.0).unwrap(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn compact_support() {
        let basis = SplineBasis::cubic(8, 0.0, 10.0).unwrap();
        // last function is supported on the last (degree+1) spans only
        let knots = basis.knots();
        let support_start = knots[basis.num_params() - 1];
        let x = 0.5 * support_start;
        assert_eq!(basis.evaluate(x).unwrap()[basis.num_params() - 1], 0.0);
    }

    #[test]
    fn out_of_domain_is_rejected() {
        let basis = SplineBasis::cubic(4, 1.0, 5.0).unwrap();
        assert!(matches!(basis.evaluate(0.5), Err(Error::Domain(_))));
        assert!(basis.evaluate(5.0 + 1e-12).is_ok());
    }

    #[test]
    fn partition_of_unity_random_points() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for basis in [
            SplineBasis::cubic(4, 1.0, 14.0).unwrap(),
            SplineBasis::cubic(7, 1.0, 25.0).unwrap(),
            SplineBasis::linear(4, 1.0, 3.0).unwrap(),
            SplineBasis::from_knots(3, (0..8).map(f64::from).collect()).unwrap(),
        ] {
            let (lo, hi) = basis.domain();
            for _ in 0..1000 {
                let x = rng.random_range(lo..=hi);
                let b = basis.evaluate(x).unwrap();
                assert!(b.iter().all(|&v| v >= 0.0));
                assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let basis = SplineBasis::cubic(7, 1.0, 13.0).unwrap();
        let h = 1e-6;
        for &x in &[1.3, 4.1, 6.9, 11.2] {
            let d1 = basis.evaluate_derivative(x, 1).unwrap();
            let plus = basis.evaluate(x + h).unwrap();
            let minus = basis.evaluate(x - h).unwrap();
            for i in 0..basis.num_params() {
                let fd = (plus[i] - minus[i]) / (2.0 * h);
                assert!((fd - d1[i]).abs() < 1e-6, "x={x} i={i}: {fd} vs {}", d1[i]);
            }
        }
    }

    #[test]
    fn cubic_is_c2_across_interior_knots() {
        let basis = SplineBasis::cubic(8, 1.0, 21.0).unwrap();
        let interior: Vec<f64> = basis.knots()[4..basis.num_params()].to_vec();
        assert!(!interior.is_empty());
        let h = 1e-7;
        for &t in &interior {
            for order in 0..=2 {
                let left = basis.evaluate_derivative(t - h, order).unwrap();
                let right = basis.evaluate_derivative(t + h, order).unwrap();
                let at = basis.evaluate_derivative(t, order).unwrap();
                for i in 0..basis.num_params() {
                    let tol = 1e-5 * (1.0 + at[i].abs());
                    assert!((left[i] - right[i]).abs() < tol, "knot {t} order {order} fn {i}");
                }
            }
        }
    }

    #[test]
    fn linear_penalty_is_zero() {
        let basis = SplineBasis::linear(4, 1.0, 9.0).unwrap();
        assert!(basis.penalty_matrix().entries().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn penalty_diagonal_matches_simpson_oracle() {
        let basis = SplineBasis::from_knots(3, (0..8).map(f64::from).collect()).unwrap();
        assert_eq!(basis.num_params(), 4);
        let s = basis.penalty_matrix();
        let (lo, hi) = basis.domain();
        for i in 0..4 {
            let oracle = simpson(|x| basis.evaluate_derivative(x, 2).unwrap()[i].powi(2), lo, hi, 10_000);
            let exact = s.entries()[(i, i)];
            assert!((oracle - exact).abs() < 1e-8, "{i}: {oracle} vs {exact}");
        }
    }

    #[test]
    fn penalty_entries_match_simpson_with_interior_knots() {
        let basis = SplineBasis::cubic(6, 1.0, 10.0).unwrap();
        let s = basis.penalty_matrix();
        let knots = basis.knots().to_vec();
        for a in 0..6 {
            for b in 0..6 {
                // integrate span by span so each panel sees a single polynomial piece
                let mut oracle = 0.0;
                for j in 3..6 {
                    let (l, r) = (knots[j], knots[j + 1]);
                    oracle += simpson(
                        |x| {
                            // stay inside the span to avoid knot-side ambiguity
                            let z = x.clamp(l + 1e-12, r - 1e-12);
                            let d = basis.evaluate_derivative(z, 2).unwrap();
                            d[a] * d[b]
                        },
                        l,
                        r,
                        10_000,
                    );
                }
                assert!((oracle - s.entries()[(a, b)]).abs() < 1e-8, "({a},{b})");
            }
        }
    }

    #[test]
    fn penalty_is_psd_and_kills_lines() {
        for basis in [SplineBasis::cubic(4, 1.0, 5.0).unwrap(), SplineBasis::cubic(9, 1.0, 25.0).unwrap()] {
            let s = basis.penalty_matrix();
            let eig = s.entries().clone().symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-10));
            let coefs: Vec<f64> = basis.greville().iter().map(|g| 0.7 - 1.3 * g).collect();
            // the coefficients really do reproduce the line
            assert!((basis.value(&coefs, 2.5).unwrap() - (0.7 - 1.3 * 2.5)).abs() < 1e-12);
            assert!(s.quadratic_form(&coefs).abs() < 1e-10);
            let constant = vec![2.0; basis.num_params()];
            assert!(s.quadratic_form(&constant).abs() < 1e-10);
        }
    }

    #[test]
    fn constrained_basis_dimensions() {
        let cb = constrain(SplineBasis::cubic(4, 1.0, 5.0).unwrap(), 2.0).unwrap();
        assert_eq!(cb.num_params(), 3);
        assert_eq!(cb.value(&[0.0, 0.0, 0.0], 2.0).unwrap(), 0.0);
        let zt_z = cb.transform().transpose() * cb.transform();
        assert!((zt_z - DMatrix::<f64>::identity(3, 3)).norm() < 1e-12);
        let pen = cb.penalty();
        assert!((&pen - pen.transpose()).norm() < 1e-12);
    }

    #[test]
    fn anchor_outside_domain_fails() {
        let basis = SplineBasis::cubic(4, 1.0, 5.0).unwrap();
        assert!(constrain(basis, 7.0).is_err());
    }

    proptest! {
        #[test]
        fn constrained_functions_vanish_at_anchor(
            s in 3u32..26,
            anchor_frac in 0.0f64..1.0,
            coefs in proptest::collection::vec(-50.0f64..50.0, 3),
            cubic in any::<bool>(),
        ) {
            let s = s as f64;
            let base = if cubic { SplineBasis::cubic(4, 1.0, s) } else { SplineBasis::linear(4, 1.0, s) }.unwrap();
            let anchor = 1.0 + anchor_frac * (s - 1.0);
            let cb = constrain(base, anchor).unwrap();
            prop_assert!(cb.value(&coefs, anchor).unwrap().abs() < 1e-10);
            let full = cb.expand(&coefs).unwrap();
            prop_assert!(cb.base().value(&full, anchor).unwrap().abs() < 1e-10);
        }
    }
}
