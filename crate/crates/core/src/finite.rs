//! Finite periodic and free systems: circulant fibers, the relative-coordinate
//! Fourier transform, dense full-system spectra and size studies.

use std::f64::consts::TAU;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laurent::{ordered_roots, BandedSymbol, DEGENERATE_TOL};
use crate::model::{Boundary, FiberOperator, LindbladModel};
use crate::numerics::{eigenvalues, hausdorff_distance, linear_fit};
use crate::spectrum::{ClosedFormSpectrum, SpectrumCloud, SpectrumPoint, Tag};

/// Default cap on the dense dimension `n^2`.
pub const DEFAULT_DENSE_CAP: usize = 6400;

const ZERO: C64 = C64::new(0.0, 0.0);

/// `C[j, k] = c[(j - k) mod n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CirculantOperator {
    first_column: Vec<C64>,
}

impl CirculantOperator {
    pub fn new(first_column: Vec<C64>) -> Result<Self> {
        if first_column.is_empty() {
            return Err(Error::InvalidArgument("circulant needs n >= 1".into()));
        }
        Ok(Self { first_column })
    }

    /// Circulant with symbol `alpha / z + beta + gamma z`.
    pub fn tridiagonal(alpha: C64, beta: C64, gamma: C64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("tridiagonal circulant needs n >= 3, got {n}")));
        }
        let mut c = vec![ZERO; n];
        c[0] = beta;
        c[1] = gamma;
        c[n - 1] = alpha;
        Self::new(c)
    }

    /// Periodic truncation of a Laurent operator with `T[d, d + m] = a_m`.
    pub fn from_laurent(symbol: &BandedSymbol, n: usize) -> Result<Self> {
        Self::new(laurent_column(symbol, n))
    }

    pub fn n(&self) -> usize {
        self.first_column.len()
    }

    pub fn first_column(&self) -> &[C64] {
        &self.first_column
    }

    pub fn matrix(&self) -> Array2<C64> {
        let n = self.n();
        Array2::from_shape_fn((n, n), |(j, k)| self.first_column[(j + n - k) % n])
    }

    /// `sum_p c_p z^p`.
    pub fn symbol_at(&self, z: C64) -> C64 {
        self.first_column
            .iter()
            .rev()
            .fold(ZERO, |acc, &c| acc * z + c)
    }

    /// `(alpha, beta, gamma)` if only `c_0`, `c_1`, `c_{n-1}` are nonzero.
    pub fn as_tridiagonal(&self) -> Option<(C64, C64, C64)> {
        let n = self.n();
        if n < 3 {
            return None;
        }
        let other = self.first_column[2..n - 1].iter().any(|c| *c != ZERO);
        (!other).then(|| (self.first_column[n - 1], self.first_column[0], self.first_column[1]))
    }
}

fn laurent_column(symbol: &BandedSymbol, n: usize) -> Vec<C64> {
    let mut c = vec![ZERO; n];
    if n > 0 {
        for (m, a) in symbol.iter() {
            c[(-(m as i64)).rem_euclid(n as i64) as usize] += a;
        }
    }
    c
}

/// `lambda_l = sum_p c_p omega^{lp}`, `omega = e^{2 pi i / n}`, by FFT.
pub fn circulant_eigs(c: &CirculantOperator) -> Vec<C64> {
    let mut buf = c.first_column.clone();
    FftPlanner::<f64>::new().plan_fft_inverse(buf.len()).process(&mut buf);
    buf
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// `<j| C^{-1} |k>`. Prime `n` with split roots uses the closed form, every
/// other case the DFT sum.
pub fn circulant_inverse_element(c: &CirculantOperator, j: usize, k: usize) -> Result<C64> {
    let n = c.n();
    if let Some((alpha, beta, gamma)) = c.as_tridiagonal() {
        if is_prime(n) && gamma.norm() > DEGENERATE_TOL {
            if let Ok(r) = ordered_roots(alpha, beta, gamma) {
                let t = (j + n - k % n) % n;
                let (l1, l2) = (r.lambda1, r.lambda2);
                let a = l1.powi(-(t as i32)) / (1.0 - l1.powi(-(n as i32)));
                let b = l2.powi((n - t) as i32) / (1.0 - l2.powi(n as i32));
                return Ok((a + b) / (gamma * (l2 - l1)));
            }
        }
    }
    circulant_inverse_element_dft(c, j, k)
}

/// `(1/n) sum_l omega^{l(k-j)} / lambda_l`.
pub fn circulant_inverse_element_dft(c: &CirculantOperator, j: usize, k: usize) -> Result<C64> {
    let n = c.n();
    let eigs = circulant_eigs(c);
    let scale = eigs.iter().map(|e| e.norm()).fold(0.0, f64::max).max(1.0);
    if let Some(e) = eigs.iter().find(|e| e.norm() < 1e-12 * scale) {
        return Err(Error::Linalg(format!("singular circulant (eigenvalue {e})")));
    }
    let shift = (k + n - j % n) % n;
    let sum: C64 = eigs
        .iter()
        .enumerate()
        .map(|(l, e)| C64::from_polar(1.0, TAU * ((l * shift) % n) as f64 / n as f64) / e)
        .sum();
    Ok(sum / n as f64)
}

/// `T_n(q) + F_n(q)` at `q = 2 pi k / n`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteFiber {
    pub q: f64,
    pub circ: CirculantOperator,
    pub gamma_l: Vec<C64>,
    pub gamma_r: Vec<C64>,
}

impl FiniteFiber {
    pub fn new(m: &LindbladModel, n: usize, k: usize) -> Result<Self> {
        check_periodic_size(m, n)?;
        let q = TAU * (k % n) as f64 / n as f64;
        Ok(Self::from_fiber(&m.fiber(q)?, n))
    }

    pub fn from_fiber(f: &FiberOperator, n: usize) -> Self {
        Self {
            q: f.q,
            circ: CirculantOperator {
                first_column: laurent_column(&f.t_symbol, n),
            },
            gamma_l: f.gamma_l.wrapped(n),
            gamma_r: f.gamma_r.wrapped(n),
        }
    }

    pub fn n(&self) -> usize {
        self.circ.n()
    }

    pub fn matrix(&self) -> Array2<C64> {
        let mut out = self.circ.matrix();
        for (a, gl) in self.gamma_l.iter().enumerate() {
            for (b, gr) in self.gamma_r.iter().enumerate() {
                out[[a, b]] += gl * gr.conj();
            }
        }
        out
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        eigenvalues(&self.matrix())
    }

    /// `1 + <Gamma_R| (C - z)^{-1} |Gamma_L>` through the circulant inverse.
    pub fn secular_value(&self, z: C64) -> Result<C64> {
        let mut col = self.circ.first_column.clone();
        col[0] -= z;
        let shifted = CirculantOperator::new(col)?;
        let n = self.n();
        let row: Vec<C64> = (0..n)
            .map(|t| circulant_inverse_element(&shifted, t, 0))
            .collect::<Result<_>>()?;
        let mut acc = C64::new(1.0, 0.0);
        for (b, gr) in self.gamma_r.iter().enumerate() {
            if *gr == ZERO {
                continue;
            }
            for (a, gl) in self.gamma_l.iter().enumerate() {
                acc += gr.conj() * row[(b + n - a) % n] * gl;
            }
        }
        Ok(acc)
    }
}

fn check_periodic_size(m: &LindbladModel, n: usize) -> Result<()> {
    if n < m.min_periodic_size() {
        return Err(Error::SizeTooSmall {
            n,
            range: m.lindblad_range().max(m.hopping_range()),
            needed: m.min_periodic_size() - 1,
        });
    }
    Ok(())
}

/// Eigenvalues of the fiber at `q = 2 pi k / n`.
pub fn finite_fiber_eigs(m: &LindbladModel, n: usize, k: usize) -> Result<Vec<C64>> {
    FiniteFiber::new(m, n, k)?.eigenvalues()
}

/// Spectrum of the `n`-site Lindbladian, with the default dense cap.
pub fn finite_spectrum(m: &LindbladModel, n: usize, bc: Boundary, potential: Option<&[f64]>) -> Result<SpectrumCloud> {
    finite_spectrum_capped(m, n, bc, potential, DEFAULT_DENSE_CAP)
}

/// Periodic systems without a potential go through the `n` fibers; everything
/// else is diagonalized densely, block-reduced when a transpose symmetry holds.
pub fn finite_spectrum_capped(
    m: &LindbladModel,
    n: usize,
    bc: Boundary,
    potential: Option<&[f64]>,
    cap: usize,
) -> Result<SpectrumCloud> {
    let dim = n.saturating_mul(n);
    if dim > cap {
        return Err(Error::SizeTooLarge { dim, cap });
    }
    if bc == Boundary::Periodic && potential.is_none() {
        check_periodic_size(m, n)?;
        let per_q: Vec<Vec<SpectrumPoint>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let f = FiniteFiber::new(m, n, k)?;
                let mut vals = f.eigenvalues()?;
                sort_values(&mut vals);
                Ok(vals
                    .into_iter()
                    .map(|z| SpectrumPoint {
                        z,
                        tag: Tag::Eig,
                        q: Some(f.q),
                        theta: None,
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        return Ok(SpectrumCloud::new(per_q.into_iter().flatten().collect()));
    }
    let l = m.vectorized_lindbladian(n, bc, potential)?;
    let mut vals = reduced_eigenvalues(&l, n)?;
    sort_values(&mut vals);
    Ok(SpectrumCloud::from_values(&vals, Tag::Eig))
}

fn sort_values(v: &mut [C64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Sign pattern `s(i, j)` of an involution `|i><j| -> s |j><i|`.
type SwapSign = fn(usize, usize) -> f64;

const SWAP_SIGNS: [SwapSign; 2] = [|i, j| if (i + j) % 2 == 0 { 1.0 } else { -1.0 }, |_, _| 1.0];

fn commutes_with_swap(l: &Array2<C64>, n: usize, s: SwapSign) -> bool {
    let scale = l.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    let sw = |a: usize| (a % n) * n + a / n;
    let sign = |a: usize| s(a / n, a % n);
    let dim = n * n;
    for a in 0..dim {
        for b in 0..dim {
            let v = l[[sw(a), sw(b)]] * (sign(a) * sign(b));
            if (v - l[[a, b]]).norm() > 1e-12 * scale {
                return false;
            }
        }
    }
    true
}

/// Dense eigenvalues of a vectorized `n`-site generator, split into the two
/// eigenspaces of a transpose-type symmetry when one commutes with it.
pub fn reduced_eigenvalues(l: &Array2<C64>, n: usize) -> Result<Vec<C64>> {
    let Some(s) = SWAP_SIGNS.into_iter().find(|s| commutes_with_swap(l, n, *s)) else {
        return eigenvalues(l);
    };
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut plus: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut minus: Vec<Vec<(usize, f64)>> = Vec::new();
    for i in 0..n {
        plus.push(vec![(i * n + i, 1.0)]);
        for j in i + 1..n {
            let sij = s(i, j);
            plus.push(vec![(i * n + j, h), (j * n + i, sij * h)]);
            minus.push(vec![(i * n + j, h), (j * n + i, -sij * h)]);
        }
    }
    let block = |basis: &[Vec<(usize, f64)>]| {
        let k = basis.len();
        Array2::from_shape_fn((k, k), |(x, y)| {
            let mut acc = ZERO;
            for &(a, va) in &basis[x] {
                for &(b, vb) in &basis[y] {
                    acc += l[[a, b]] * (va * vb);
                }
            }
            acc
        })
    };
    let mut vals = eigenvalues(&block(&plus))?;
    if !minus.is_empty() {
        vals.extend(eigenvalues(&block(&minus))?);
    }
    Ok(vals)
}

/// Unitary `J[(a, d), (j, k)] = omega^{aj} / sqrt(n)` for `d = k - j mod n`.
pub fn transform_jn(n: usize) -> Result<Array2<C64>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("transform needs n >= 2, got {n}")));
    }
    let norm = 1.0 / (n as f64).sqrt();
    let mut out = Array2::<C64>::zeros((n * n, n * n));
    for a in 0..n {
        for j in 0..n {
            let w = C64::from_polar(norm, TAU * ((a * j) % n) as f64 / n as f64);
            for d in 0..n {
                out[[a * n + d, j * n + (j + d) % n]] = w;
            }
        }
    }
    Ok(out)
}

/// Largest entry of `J L J* - diag_k(T_n(q_k) + F_n(q_k))` for the periodic system.
pub fn equivalence_check(m: &LindbladModel, n: usize) -> Result<f64> {
    check_periodic_size(m, n)?;
    let fibers = (0..n)
        .map(|k| Ok(FiniteFiber::new(m, n, k)?.matrix()))
        .collect::<Result<Vec<_>>>()?;
    equivalence_residual(m, n, &fibers)
}

fn equivalence_residual(m: &LindbladModel, n: usize, blocks: &[Array2<C64>]) -> Result<f64> {
    let l = m.vectorized_lindbladian(n, Boundary::Periodic, None)?;
    let j = transform_jn(n)?;
    let jh = j.t().mapv(|v| v.conj());
    let conj = j.dot(&l).dot(&jh);
    let mut worst: f64 = 0.0;
    for r in 0..n * n {
        for c in 0..n * n {
            let expected = if r / n == c / n {
                blocks[r / n][[r % n, c % n]]
            } else {
                ZERO
            };
            worst = worst.max((conj[[r, c]] - expected).norm());
        }
    }
    Ok(worst)
}

/// What a convergence study measures against.
#[derive(Clone, Debug)]
pub enum Reference<'a> {
    /// Closed form sampled at the given spacing.
    ClosedForm(&'a ClosedFormSpectrum, f64),
    Cloud(&'a SpectrumCloud),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Distances strictly decrease along the size list.
    pub decreasing: bool,
}

impl ConvergenceReport {
    pub fn last_distance(&self) -> Option<f64> {
        self.rows.last().map(|r| r.distance)
    }
}

/// Hausdorff distance of `finite_spectrum(n)` to a reference for each size.
pub fn convergence_study(
    m: &LindbladModel,
    sizes: &[usize],
    bc: Boundary,
    reference: &Reference,
) -> Result<ConvergenceReport> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("sizes must be strictly increasing".into()));
    }
    let target = match reference {
        Reference::ClosedForm(cf, spacing) => cf.sample(*spacing),
        Reference::Cloud(c) => c.values(),
    };
    let rows = sizes
        .iter()
        .map(|&n| {
            let cloud = finite_spectrum(m, n, bc, None)?;
            Ok(ConvergenceRow {
                n,
                distance: hausdorff_distance(&cloud.values(), &target)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let decreasing = rows.windows(2).all(|w| w[1].distance < w[0].distance);
    Ok(ConvergenceReport { rows, decreasing })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapScaling {
    #[serde(rename = "G")]
    pub g: f64,
    pub sizes: Vec<usize>,
    pub gaps: Vec<f64>,
    /// Slope of `log |gap|` against `log n`.
    pub fit_exponent: f64,
    /// `exp` of the intercept, so `|gap| ~ fit_constant * n^fit_exponent`.
    pub fit_constant: f64,
    /// `16 pi^2 / G`.
    pub heuristic_constant: f64,
    pub ratio: f64,
}

/// Gap of the dephasing chain from the largest real part on the `q = 2 pi / n` fiber.
pub fn gap_scaling(g: f64, sizes: &[usize]) -> Result<GapScaling> {
    if sizes.len() < 2 {
        return Err(Error::InvalidArgument("gap scaling needs at least two sizes".into()));
    }
    let m = LindbladModel::dephasing(g)?;
    let gaps = sizes
        .par_iter()
        .map(|&n| {
            let eigs = finite_fiber_eigs(&m, n, 1)?;
            Ok(-eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    if let Some(bad) = gaps.iter().find(|g| !(**g > 0.0)) {
        return Err(Error::Linalg(format!("non-positive gap {bad}")));
    }
    let x: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = gaps.iter().map(|v| v.ln()).collect();
    let (intercept, slope) = linear_fit(&x, &y)?;
    let fit_constant = intercept.exp();
    let heuristic_constant = 16.0 * std::f64::consts::PI.powi(2) / g;
    Ok(GapScaling {
        g,
        sizes: sizes.to_vec(),
        gaps,
        fit_exponent: slope,
        fit_constant,
        heuristic_constant,
        ratio: fit_constant / heuristic_constant,
    })
}
