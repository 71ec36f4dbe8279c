//! Banded Laurent operators on l2(Z).
//!
//! A [`BandedSymbol`] stores coefficients `a_m`, `|m| <= range`, with the
//! operator convention `T[j, j + m] = a_m` and symbol `a(z) = sum_m a_m z^m`.
//! So `a_{-1}` (alpha) sits on the subdiagonal and `a_1` (gamma) on the
//! superdiagonal.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance below which a tridiagonal coefficient counts as zero.
pub const DEGENERATE_TOL: f64 = 1e-12;
/// Distance of a root modulus from 1 below which it counts as on the curve.
pub const CURVE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandedSymbol {
    range: usize,
    coeffs: Vec<C64>,
}

impl BandedSymbol {
    /// `coeffs[i]` is `a_{i - range}`.
    pub fn new(range: usize, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != 2 * range + 1 {
            return Err(Error::InvalidArgument(format!(
                "a symbol of range {range} needs {} coefficients, got {}",
                2 * range + 1,
                coeffs.len()
            )));
        }
        Ok(Self { range, coeffs })
    }

    pub fn zero() -> Self {
        Self {
            range: 0,
            coeffs: vec![C64::new(0.0, 0.0)],
        }
    }

    /// Builds a symbol from `(offset, coefficient)` pairs; repeated offsets add up.
    pub fn from_offsets<I: IntoIterator<Item = (i32, C64)>>(pairs: I) -> Self {
        let pairs: Vec<(i32, C64)> = pairs.into_iter().collect();
        let range = pairs
            .iter()
            .map(|(m, _)| m.unsigned_abs() as usize)
            .max()
            .unwrap_or(0);
        let mut coeffs = vec![C64::new(0.0, 0.0); 2 * range + 1];
        for (m, c) in pairs {
            coeffs[(m + range as i32) as usize] += c;
        }
        Self { range, coeffs }
    }

    pub fn tridiagonal(alpha: C64, beta: C64, gamma: C64) -> Self {
        Self {
            range: 1,
            coeffs: vec![alpha, beta, gamma],
        }
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn coeff(&self, m: i32) -> C64 {
        if m.unsigned_abs() as usize > self.range {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(m + self.range as i32) as usize]
        }
    }

    /// Iterates `(m, a_m)` over the stored band.
    pub fn iter(&self) -> impl Iterator<Item = (i32, C64)> + '_ {
        let r = self.range as i32;
        self.coeffs.iter().enumerate().map(move |(i, c)| (i as i32 - r, *c))
    }

    /// Largest `|m|` with a nonzero coefficient.
    pub fn effective_range(&self) -> usize {
        self.iter()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(m, _)| m.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// `(alpha, beta, gamma) = (a_{-1}, a_0, a_1)` when the band is at most tridiagonal.
    pub fn as_tridiagonal(&self) -> Option<(C64, C64, C64)> {
        (self.effective_range() <= 1).then(|| (self.coeff(-1), self.coeff(0), self.coeff(1)))
    }

    /// Laurent polynomial value at any nonzero `z`.
    pub fn eval_any(&self, z: C64) -> C64 {
        let zi = z.inv();
        let mut acc = self.coeff(0);
        let (mut zp, mut zn) = (z, zi);
        for m in 1..=self.range as i32 {
            acc += self.coeff(m) * zp + self.coeff(-m) * zn;
            zp *= z;
            zn *= zi;
        }
        acc
    }

    /// Symbol value at a point of the unit circle.
    pub fn eval(&self, z: C64) -> Result<C64> {
        if (z.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::NotOnUnitCircle(z));
        }
        Ok(self.eval_any(z))
    }

    pub fn at_angle(&self, theta: f64) -> C64 {
        self.eval_any(C64::from_polar(1.0, theta))
    }

    /// Samples `a(e^{i theta_k})` at `theta_k = 2 pi k / n_theta`.
    pub fn curve(&self, n_theta: usize) -> Result<Vec<C64>> {
        if n_theta < 3 {
            return Err(Error::InvalidArgument(format!(
                "symbol curve needs at least 3 samples, got {n_theta}"
            )));
        }
        Ok((0..n_theta)
            .map(|k| self.at_angle(std::f64::consts::TAU * k as f64 / n_theta as f64))
            .collect())
    }

    /// Symbol of `T - z`.
    pub fn shifted(&self, z: C64) -> Self {
        let mut out = self.clone();
        out.coeffs[self.range] -= z;
        out
    }

    /// Symbol of the Hilbert-space adjoint: `a*_m = conj(a_{-m})`.
    pub fn adjoint(&self) -> Self {
        let coeffs = (0..self.coeffs.len())
            .map(|i| self.coeffs[self.coeffs.len() - 1 - i].conj())
            .collect();
        Self {
            range: self.range,
            coeffs,
        }
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.iter()
            .all(|(m, c)| (c - self.coeff(-m).conj()).norm() <= tol)
    }

    /// `sum_m |a_m|`, an upper bound for the operator norm.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }
}

/// Square root with `Re >= 0`, and `Im >= 0` on the imaginary axis.
pub fn branch_sqrt(z: C64) -> C64 {
    let s = z.sqrt();
    if s.re < 0.0 || (s.re == 0.0 && s.im < 0.0) {
        -s
    } else {
        s
    }
}

/// Roots of `alpha + beta x + gamma x^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootPair {
    pub lambda_plus: C64,
    pub lambda_minus: C64,
    /// Root of larger modulus.
    pub lambda1: C64,
    /// Root of smaller modulus.
    pub lambda2: C64,
    /// `branch_sqrt(beta^2 - 4 alpha gamma)`.
    pub sqrt_disc: C64,
    /// `-1` when `|lambda_minus| < 1 < |lambda_plus|`, else `+1`.
    pub sign_factor: f64,
}

impl RootPair {
    /// Computes the roots without checking the split condition.
    pub fn compute(alpha: C64, beta: C64, gamma: C64) -> Result<Self> {
        if gamma.norm() <= DEGENERATE_TOL {
            return Err(Error::DegenerateGamma(gamma.norm()));
        }
        let s = branch_sqrt(beta * beta - 4.0 * alpha * gamma);
        let num_plus = -beta + s;
        let num_minus = -beta - s;
        // Vieta for the root that suffers cancellation.
        let (lambda_plus, lambda_minus) = if num_plus.norm() >= num_minus.norm() {
            let lp = num_plus / (2.0 * gamma);
            let lm = if lp.norm() > 0.0 {
                alpha / (gamma * lp)
            } else {
                num_minus / (2.0 * gamma)
            };
            (lp, lm)
        } else {
            let lm = num_minus / (2.0 * gamma);
            let lp = if lm.norm() > 0.0 {
                alpha / (gamma * lm)
            } else {
                num_plus / (2.0 * gamma)
            };
            (lp, lm)
        };
        let (lambda1, lambda2) = if lambda_plus.norm() >= lambda_minus.norm() {
            (lambda_plus, lambda_minus)
        } else {
            (lambda_minus, lambda_plus)
        };
        let sign_factor = if lambda_minus.norm() < 1.0 && lambda_plus.norm() > 1.0 {
            -1.0
        } else {
            1.0
        };
        Ok(Self {
            lambda_plus,
            lambda_minus,
            lambda1,
            lambda2,
            sqrt_disc: s,
            sign_factor,
        })
    }

    /// Smallest distance of a root modulus from 1.
    pub fn curve_distance(&self) -> f64 {
        (self.lambda1.norm() - 1.0)
            .abs()
            .min((self.lambda2.norm() - 1.0).abs())
    }

    pub fn splits(&self) -> bool {
        self.lambda2.norm() < 1.0 && self.lambda1.norm() > 1.0
    }
}

/// Roots of `alpha + beta x + gamma x^2`, required to split across the unit circle.
pub fn ordered_roots(alpha: C64, beta: C64, gamma: C64) -> Result<RootPair> {
    let roots = RootPair::compute(alpha, beta, gamma)?;
    let distance = roots.curve_distance();
    if distance < CURVE_TOL {
        return Err(Error::OnSymbolCurve { distance });
    }
    if !roots.splits() {
        return Err(Error::NoSplit {
            modulus_large: roots.lambda1.norm(),
            modulus_small: roots.lambda2.norm(),
        });
    }
    Ok(roots)
}

/// `<j| T^{-1} |k>` for the tridiagonal Laurent operator with split roots.
pub fn tridiag_inverse_element(alpha: C64, beta: C64, gamma: C64, j: i64, k: i64) -> Result<C64> {
    let r = ordered_roots(alpha, beta, gamma)?;
    let scale = r.sign_factor / r.sqrt_disc;
    Ok(if k >= j {
        scale * r.lambda1.powi(-((k - j) as i32))
    } else {
        scale * r.lambda2.powi((j - k) as i32)
    })
}

/// Matrix elements of the inverse of an invertible banded Laurent operator.
///
/// `element(m)` is `<j| T^{-1} |j + m>`, the coefficient of `z^m` in `1 / a(z)`.
#[derive(Clone, Debug)]
pub struct LaurentInverse {
    kind: Kind,
}

#[derive(Clone, Debug)]
enum Kind {
    Scalar(C64),
    /// `b_{-n} = first * ratio^n` for `n >= 0`.
    Lower { first: C64, ratio: C64 },
    /// `b_n = first * ratio^n` for `n >= 0`.
    Upper { first: C64, ratio: C64 },
    /// `b_{n+1} = first * ratio^n` for `n >= 0`.
    UpperShifted { first: C64, ratio: C64 },
    /// `b_{-(n+1)} = first * ratio^n` for `n >= 0`.
    LowerShifted { first: C64, ratio: C64 },
    Split { l1: C64, l2: C64, denom: C64 },
    Outside { l1: C64, l2: C64, gamma: C64 },
    Inside { l1: C64, l2: C64, gamma: C64 },
    /// Periodic coefficient table from quadrature, `table[m mod len]`.
    Fourier { table: Vec<C64> },
}

impl LaurentInverse {
    pub fn new(symbol: &BandedSymbol) -> Result<Self> {
        match symbol.as_tridiagonal() {
            Some((a, b, g)) => Self::tridiagonal(a, b, g),
            None => Self::quadrature(symbol),
        }
    }

    /// Closed-form inverse of `alpha S + beta + gamma S*`, any winding number.
    pub fn tridiagonal(alpha: C64, beta: C64, gamma: C64) -> Result<Self> {
        let small_a = alpha.norm() <= DEGENERATE_TOL;
        let small_g = gamma.norm() <= DEGENERATE_TOL;
        let kind = if small_a && small_g {
            if beta.norm() <= DEGENERATE_TOL {
                return Err(Error::OnSymbolCurve {
                    distance: beta.norm(),
                });
            }
            Kind::Scalar(beta.inv())
        } else if small_g {
            let distance = (beta.norm() - alpha.norm()).abs();
            if distance < CURVE_TOL {
                return Err(Error::OnSymbolCurve { distance });
            }
            if beta.norm() > alpha.norm() {
                Kind::Lower {
                    first: beta.inv(),
                    ratio: -alpha / beta,
                }
            } else {
                Kind::UpperShifted {
                    first: alpha.inv(),
                    ratio: -beta / alpha,
                }
            }
        } else if small_a {
            let distance = (beta.norm() - gamma.norm()).abs();
            if distance < CURVE_TOL {
                return Err(Error::OnSymbolCurve { distance });
            }
            if beta.norm() > gamma.norm() {
                Kind::Upper {
                    first: beta.inv(),
                    ratio: -gamma / beta,
                }
            } else {
                Kind::LowerShifted {
                    first: gamma.inv(),
                    ratio: -beta / gamma,
                }
            }
        } else {
            let r = RootPair::compute(alpha, beta, gamma)?;
            let distance = r.curve_distance();
            if distance < CURVE_TOL {
                return Err(Error::OnSymbolCurve { distance });
            }
            let (l1, l2) = (r.lambda1, r.lambda2);
            if r.splits() {
                Kind::Split {
                    l1,
                    l2,
                    denom: gamma * (l1 - l2),
                }
            } else if l2.norm() > 1.0 {
                Kind::Outside { l1, l2, gamma }
            } else {
                Kind::Inside { l1, l2, gamma }
            }
        };
        Ok(Self { kind })
    }

    /// Fourier coefficients of `1 / a` by trapezoid quadrature, doubling the
    /// grid until the coefficients settle.
    pub fn quadrature(symbol: &BandedSymbol) -> Result<Self> {
        let mut planner = FftPlanner::new();
        let mut n = 64usize.max(8 * (symbol.range() + 1).next_power_of_two());
        let mut previous: Option<Vec<C64>> = None;
        loop {
            let mut buf = Vec::with_capacity(n);
            let mut min_mod = f64::INFINITY;
            for k in 0..n {
                let a = symbol.at_angle(std::f64::consts::TAU * k as f64 / n as f64);
                min_mod = min_mod.min(a.norm());
                buf.push(a);
            }
            if min_mod < CURVE_TOL {
                return Err(Error::OnSymbolCurve { distance: min_mod });
            }
            for v in buf.iter_mut() {
                *v = v.inv() / n as f64;
            }
            planner.plan_fft_forward(n).process(&mut buf);
            if let Some(prev) = &previous {
                let half = prev.len() / 2;
                let scale = buf.iter().map(|c| c.norm()).fold(0.0, f64::max);
                let mut diff: f64 = 0.0;
                for m in -(half as i64 / 2)..(half as i64 / 2) {
                    let a = buf[m.rem_euclid(n as i64) as usize];
                    let b = prev[m.rem_euclid(prev.len() as i64) as usize];
                    diff = diff.max((a - b).norm());
                }
                let tail = buf[n / 2].norm();
                if diff <= 1e-14 * scale && tail <= 1e-15 * scale {
                    return Ok(Self {
                        kind: Kind::Fourier { table: buf },
                    });
                }
            }
            if n >= 1 << 22 {
                return Err(Error::OnSymbolCurve { distance: min_mod });
            }
            previous = Some(buf);
            n *= 2;
        }
    }

    /// `<j| T^{-1} |j + m>`.
    pub fn element(&self, m: i64) -> C64 {
        let zero = C64::new(0.0, 0.0);
        let p = |x: C64, e: i64| x.powi(e as i32);
        match &self.kind {
            Kind::Scalar(inv) => {
                if m == 0 {
                    *inv
                } else {
                    zero
                }
            }
            Kind::Lower { first, ratio } => {
                if m <= 0 {
                    first * p(*ratio, -m)
                } else {
                    zero
                }
            }
            Kind::Upper { first, ratio } => {
                if m >= 0 {
                    first * p(*ratio, m)
                } else {
                    zero
                }
            }
            Kind::UpperShifted { first, ratio } => {
                if m >= 1 {
                    first * p(*ratio, m - 1)
                } else {
                    zero
                }
            }
            Kind::LowerShifted { first, ratio } => {
                if m <= -1 {
                    first * p(*ratio, -m - 1)
                } else {
                    zero
                }
            }
            Kind::Split { l1, l2, denom } => {
                if m >= 0 {
                    -p(*l1, -m) / denom
                } else {
                    -p(*l2, -m) / denom
                }
            }
            Kind::Outside { l1, l2, gamma } => {
                if m <= 0 {
                    zero
                } else if close_roots(*l1, *l2) {
                    m as f64 * p(*l1, -m - 1) / gamma
                } else {
                    (p(*l2, -m) - p(*l1, -m)) / (gamma * (l1 - l2))
                }
            }
            Kind::Inside { l1, l2, gamma } => {
                if m >= 0 {
                    zero
                } else if close_roots(*l1, *l2) {
                    (-m) as f64 * p(*l1, -m - 1) / gamma
                } else {
                    (p(*l1, -m) - p(*l2, -m)) / (gamma * (l1 - l2))
                }
            }
            Kind::Fourier { table } => {
                let len = table.len() as i64;
                if m.abs() >= len / 2 {
                    zero
                } else {
                    table[m.rem_euclid(len) as usize]
                }
            }
        }
    }
}

fn close_roots(l1: C64, l2: C64) -> bool {
    (l1 - l2).norm() <= 1e-10 * (1.0 + l1.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn branch_sqrt_examples() {
        assert_eq!(branch_sqrt(c(-4.0, 0.0)), c(0.0, 2.0));
        assert_eq!(branch_sqrt(c(-4.0, -0.0)), c(0.0, 2.0));
        assert_eq!(branch_sqrt(c(4.0, 0.0)), c(2.0, 0.0));
        assert!((branch_sqrt(c(0.0, -2.0)) - c(1.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn worked_inverse_elements() {
        let (a, b, g) = (c(1.0, 0.0), c(-2.5, 0.0), c(1.0, 0.0));
        let r = ordered_roots(a, b, g).unwrap();
        assert!((r.lambda1 - c(2.0, 0.0)).norm() < 1e-15);
        assert!((r.lambda2 - c(0.5, 0.0)).norm() < 1e-15);
        assert_eq!(r.sign_factor, -1.0);
        let e = |j, k| tridiag_inverse_element(a, b, g, j, k).unwrap();
        assert!((e(0, 0) - c(-2.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!((e(4, 5) - c(-1.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!((e(7, 5) - c(-1.0 / 6.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn roots_on_curve_and_nosplit() {
        // roots +-i
        let err = ordered_roots(c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::OnSymbolCurve { .. }));
        // both roots outside: 2 and 3
        let err = ordered_roots(c(6.0, 0.0), c(-5.0, 0.0), c(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::NoSplit { .. }));
        let err = ordered_roots(c(1.0, 0.0), c(1.0, 0.0), c(1e-13, 0.0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateGamma(_)));
    }

    #[test]
    fn curve_sampling() {
        let s = BandedSymbol::tridiagonal(c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        let pts = s.curve(4).unwrap();
        assert!((pts[0] - c(2.0, 0.0)).norm() < 1e-15);
        assert!((pts[2] - c(-2.0, 0.0)).norm() < 1e-15);
        assert!(s.curve(2).is_err());
        assert!(matches!(s.eval(c(2.0, 0.0)), Err(Error::NotOnUnitCircle(_))));
    }

    #[test]
    fn adjoint_and_self_adjointness() {
        let s = BandedSymbol::from_offsets([(-1, c(-1.0, 0.0)), (1, c(-1.0, 0.0))]);
        assert!(s.is_self_adjoint(0.0));
        let t = BandedSymbol::tridiagonal(c(1.0, 2.0), c(0.0, 1.0), c(3.0, 0.0));
        assert!(!t.is_self_adjoint(1e-12));
        assert_eq!(t.adjoint().adjoint(), t);
        assert_eq!(t.adjoint().coeff(1), c(1.0, -2.0));
    }

    #[test]
    fn degenerate_inverse_paths_invert() {
        // alpha S + beta, beta S + ... in both regimes
        let cases = [
            (c(0.3, 0.1), c(1.0, -0.5), c(0.0, 0.0)),
            (c(1.2, 0.4), c(0.2, 0.5), c(0.0, 0.0)),
            (c(0.0, 0.0), c(1.0, 0.5), c(0.4, 0.0)),
            (c(0.0, 0.0), c(0.1, 0.2), c(0.0, 1.3)),
            (c(0.0, 0.0), c(0.0, 2.0), c(0.0, 0.0)),
        ];
        for (a, b, g) in cases {
            let inv = LaurentInverse::tridiagonal(a, b, g).unwrap();
            check_inverse(&inv, a, b, g);
        }
    }

    // (T T^{-1})[0, m] = alpha b_{m+1} + beta b_m + gamma b_{m-1} must be delta_{m,0}.
    fn check_inverse(inv: &LaurentInverse, a: C64, b: C64, g: C64) {
        for m in -30i64..=30 {
            let v = a * inv.element(m + 1) + b * inv.element(m) + g * inv.element(m - 1);
            let want = if m == 0 { 1.0 } else { 0.0 };
            assert!((v - want).norm() < 1e-10, "m={m} v={v}");
        }
    }

    fn arb_c() -> impl Strategy<Value = C64> {
        (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(r, i)| C64::new(r, i))
    }

    proptest! {
        #[test]
        fn closed_form_matches_quadrature(a in arb_c(), b in arb_c(), g in arb_c()) {
            prop_assume!(g.norm() > 0.05 && a.norm() > 0.05);
            let r = RootPair::compute(a, b, g).unwrap();
            prop_assume!(r.curve_distance() > 0.05);
            let closed = LaurentInverse::tridiagonal(a, b, g).unwrap();
            let quad = LaurentInverse::quadrature(&BandedSymbol::tridiagonal(a, b, g)).unwrap();
            let scale = (-3..=3).map(|m| quad.element(m).norm()).fold(1.0, f64::max);
            for m in -6i64..=6 {
                prop_assert!((closed.element(m) - quad.element(m)).norm() < 1e-9 * scale);
            }
            check_inverse(&closed, a, b, g);
        }

        #[test]
        fn split_formula_matches_general_form(a in arb_c(), b in arb_c(), g in arb_c()) {
            prop_assume!(g.norm() > 0.05);
            if let Ok(r) = ordered_roots(a, b, g) {
                prop_assume!(r.curve_distance() > 1e-3);
                let inv = LaurentInverse::tridiagonal(a, b, g).unwrap();
                for (j, k) in [(0i64, 0i64), (0, 3), (3, 0), (-2, 5), (5, -4)] {
                    let x = tridiag_inverse_element(a, b, g, j, k).unwrap();
                    let y = inv.element(k - j);
                    prop_assert!((x - y).norm() <= 1e-10 * (1.0 + y.norm()));
                }
            }
        }

        #[test]
        fn vieta_relations(a in arb_c(), b in arb_c(), g in arb_c()) {
            prop_assume!(g.norm() > 0.05);
            let r = RootPair::compute(a, b, g).unwrap();
            let scale = 1.0 + (a / g).norm() + (b / g).norm();
            prop_assert!((r.lambda_plus * r.lambda_minus - a / g).norm() < 1e-10 * scale);
            prop_assert!((r.lambda_plus + r.lambda_minus + b / g).norm() < 1e-10 * scale);
            prop_assert!(r.lambda1.norm() >= r.lambda2.norm());
        }
    }
}
