//! Random on-site potentials: the exactly solvable dephasing chain without
//! hopping, numerical-range sampling against the classicality bound, and
//! spectral containment of disordered chains.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite::finite_spectrum;
use crate::model::{Boundary, LindbladModel, SparseVector};
use crate::numerics::{directed_distance, support_function};

/// i.i.d. uniform potential on `[-lambda, lambda]`, reproducible from the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub n: usize,
    pub lambda: f64,
    pub seed: u64,
    pub values: Vec<f64>,
}

impl DisorderRealization {
    pub fn new(n: usize, lambda: f64, seed: u64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("disorder strength must be >= 0, got {lambda}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..n)
            .map(|_| if lambda == 0.0 { 0.0 } else { rng.random_range(-lambda..=lambda) })
            .collect();
        Ok(Self { n, lambda, seed, values })
    }
}

/// `{0 (n times)} u {-G + i(V(j) - V(i)) : i != j}`, ordered like the vectorized basis.
pub fn exact_solvable_spectrum(v: &[f64], g: f64) -> Vec<C64> {
    let n = v.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out.push(C64::new(-g, v[j] - v[i]));
            }
        }
    }
    out
}

/// Dephasing without hopping, the model behind [`exact_solvable_spectrum`].
pub fn hopping_free_dephasing(g: f64) -> Result<LindbladModel> {
    LindbladModel::dephasing(g)?.with_hopping(SparseVector::new())
}

/// `f(a, lambda) = 4(1 - a + 2 sqrt(a) sqrt(1 - a)) + (1 - a) lambda`.
pub fn range_bound_f(a: f64, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) || !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("need a in [0, 1] and lambda >= 0, got a = {a}, lambda = {lambda}")));
    }
    Ok(4.0 * (1.0 - a + 2.0 * a.sqrt() * (1.0 - a).sqrt()) + (1.0 - a) * lambda)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeSample {
    /// `<rho, L rho>` for Hilbert-Schmidt normalized `rho`.
    pub z: C64,
    /// Diagonal weight `sum_x |rho(x, x)|^2`.
    pub a: f64,
}

/// Random `rho` with prescribed diagonal weight `a`: Gaussian diagonal and
/// off-diagonal parts normalized to `sqrt(a)` and `sqrt(1 - a)`.
pub fn random_state<R: Rng>(rng: &mut R, n: usize, a: f64) -> Array2<C64> {
    let mut rho = Array2::<C64>::zeros((n, n));
    let mut gauss = || C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    for x in 0..n {
        for y in 0..n {
            rho[[x, y]] = gauss();
        }
    }
    let (mut dn, mut on) = (0.0, 0.0);
    for ((x, y), v) in rho.indexed_iter() {
        if x == y {
            dn += v.norm_sqr();
        } else {
            on += v.norm_sqr();
        }
    }
    let (ds, os) = (a.sqrt() / dn.sqrt(), (1.0 - a).sqrt() / on.sqrt());
    for ((x, y), v) in rho.indexed_iter_mut() {
        *v *= if x == y { ds } else { os };
    }
    rho
}

fn hs_inner(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `n_samples` values of `<rho, L rho>` on the periodic chain with potential `v`.
///
/// Sample `k` draws from its own ChaCha stream, so the result does not depend
/// on the thread count. The first two samples are `a = 1` and `a = 0`, the rest
/// draw `a` uniformly.
pub fn numerical_range_sample(m: &LindbladModel, v: &[f64], n_samples: usize, seed: u64) -> Result<Vec<RangeSample>> {
    let n = v.len();
    let sys = m.finite_system(n, Boundary::Periodic, Some(v))?;
    if n < 2 {
        return Err(Error::InvalidArgument("numerical range sampling needs n >= 2".into()));
    }
    Ok((0..n_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let a = match k {
                0 => 1.0,
                1 => 0.0,
                _ => rng.random::<f64>(),
            };
            let rho = random_state(&mut rng, n, a);
            RangeSample {
                z: hs_inner(&rho, &sys.apply(&rho)),
                a,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RangeViolations {
    /// Samples with `|Re z - G(a - 1)| > tol`.
    pub real_part: usize,
    /// Samples with `|Im z| > f(a, lambda) + tol`.
    pub imaginary_part: usize,
    pub max_real_error: f64,
    /// Largest `|Im z| - f(a, lambda)`.
    pub max_imaginary_excess: f64,
}

pub fn count_range_violations(samples: &[RangeSample], g: f64, lambda: f64, tol: f64) -> Result<RangeViolations> {
    let mut out = RangeViolations {
        max_imaginary_excess: f64::NEG_INFINITY,
        ..Default::default()
    };
    for s in samples {
        let re_err = (s.z.re - g * (s.a - 1.0)).abs();
        let excess = s.z.im.abs() - range_bound_f(s.a, lambda)?;
        out.max_real_error = out.max_real_error.max(re_err);
        out.max_imaginary_excess = out.max_imaginary_excess.max(excess);
        out.real_part += (re_err > tol) as usize;
        out.imaginary_part += (excess > tol) as usize;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainmentRow {
    pub seed: u64,
    /// Eigenvalues outside `W(L_0) + i[-2 lambda, 2 lambda]` by more than the tolerance.
    pub outside: usize,
    /// Largest support-function excess over all probed directions.
    pub max_excess: f64,
    /// `sup_{z in sigma(L_0)} dist(z, sigma(L_V))`.
    pub clean_to_disordered: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub n: usize,
    pub lambda: f64,
    pub directions: usize,
    pub rows: Vec<ContainmentRow>,
}

impl ContainmentReport {
    pub fn all_contained(&self) -> bool {
        self.rows.iter().all(|r| r.outside == 0)
    }
}

/// Checks every eigenvalue of the disordered periodic chain against the
/// support function of `W(L_0) + i[-2 lambda, 2 lambda]` in `directions`
/// directions, and reports how far the clean spectrum is from the disordered one.
pub fn kunz_containment(
    m: &LindbladModel,
    n: usize,
    lambda: f64,
    seeds: &[u64],
    directions: usize,
) -> Result<ContainmentReport> {
    if directions < 3 {
        return Err(Error::InvalidArgument("containment check needs at least 3 directions".into()));
    }
    let l0 = m.vectorized_lindbladian(n, Boundary::Periodic, None)?;
    let angles: Vec<f64> = (0..directions)
        .map(|k| std::f64::consts::TAU * k as f64 / directions as f64)
        .collect();
    let support = angles
        .par_iter()
        .map(|&phi| Ok(support_function(&l0, phi)? + 2.0 * lambda * phi.sin().abs()))
        .collect::<Result<Vec<f64>>>()?;
    let clean = finite_spectrum(m, n, Boundary::Periodic, Some(&vec![0.0; n]))?.values();
    let scale = support.iter().map(|s| s.abs()).fold(1.0, f64::max);
    let rows = seeds
        .iter()
        .map(|&seed| {
            let v = DisorderRealization::new(n, lambda, seed)?;
            let spec = finite_spectrum(m, n, Boundary::Periodic, Some(&v.values))?.values();
            let mut outside = 0;
            let mut max_excess = f64::NEG_INFINITY;
            for z in &spec {
                let excess = angles
                    .iter()
                    .zip(&support)
                    .map(|(&phi, &h)| (C64::from_polar(1.0, -phi) * z).re - h)
                    .fold(f64::NEG_INFINITY, f64::max);
                max_excess = max_excess.max(excess);
                outside += (excess > 1e-6 * scale) as usize;
            }
            Ok(ContainmentRow {
                seed,
                outside,
                max_excess,
                clean_to_disordered: directed_distance(&clean, &spec)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContainmentReport {
        n,
        lambda,
        directions,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{eigenvalues, multiset_distance};

    #[test]
    fn realizations_are_reproducible_and_bounded() {
        let a = DisorderRealization::new(50, 2.5, 7).unwrap();
        let b = DisorderRealization::new(50, 2.5, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.values.iter().all(|v| v.abs() <= 2.5));
        assert_ne!(a.values, DisorderRealization::new(50, 2.5, 8).unwrap().values);
        assert!(DisorderRealization::new(4, 0.0, 1).unwrap().values.iter().all(|v| *v == 0.0));
        assert!(DisorderRealization::new(4, -1.0, 1).is_err());
    }

    #[test]
    fn exact_spectrum_without_potential() {
        let s = exact_solvable_spectrum(&[0.0; 3], 1.0);
        assert_eq!(s.iter().filter(|z| **z == C64::new(0.0, 0.0)).count(), 3);
        assert_eq!(s.iter().filter(|z| **z == C64::new(-1.0, 0.0)).count(), 6);
    }

    #[test]
    fn exact_spectrum_matches_dense() {
        let m = hopping_free_dephasing(1.5).unwrap();
        for seed in [1, 2] {
            let v = DisorderRealization::new(12, 3.0, seed).unwrap();
            let dense = eigenvalues(&m.vectorized_lindbladian(12, Boundary::Periodic, Some(&v.values)).unwrap()).unwrap();
            let exact = exact_solvable_spectrum(&v.values, 1.5);
            assert!(multiset_distance(&exact, &dense) < 1e-10);
            let spread = exact.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            assert!(spread <= 2.0 * v.lambda);
        }
    }

    #[test]
    fn f_examples() {
        assert_eq!(range_bound_f(1.0, 3.0).unwrap(), 0.0);
        assert_eq!(range_bound_f(0.0, 3.0).unwrap(), 7.0);
        assert!((range_bound_f(0.5, 2.0).unwrap() - 7.0).abs() < 1e-14);
        assert!(range_bound_f(1.5, 1.0).is_err());
    }

    #[test]
    fn range_samples_obey_the_real_part_identity() {
        let g = 2.0;
        let m = LindbladModel::dephasing(g).unwrap();
        let v = DisorderRealization::new(12, 5.0, 3).unwrap();
        let s = numerical_range_sample(&m, &v.values, 200, 11).unwrap();
        assert!(s[0].z.norm() < 1e-12);
        assert!((s[1].z.re + g).abs() < 1e-12);
        let viol = count_range_violations(&s, g, 5.0, 1e-9).unwrap();
        assert_eq!(viol.real_part, 0);
        assert_eq!(viol.imaginary_part, 0);
        // seed-split sampling is thread-count independent
        assert_eq!(s, numerical_range_sample(&m, &v.values, 200, 11).unwrap());
    }

    #[test]
    fn potential_term_can_exceed_lambda_for_a_symmetric_window() {
        // An off-diagonal rho on the two sites with V = -lambda and +lambda
        // picks up |Im| = 2 lambda (1 - a); only a shift of V into [0, lambda]
        // brings it below the lambda term of f.
        let lambda = 3.0;
        let m = hopping_free_dephasing(1.0).unwrap();
        let v = [-lambda, lambda, 0.0, 0.0, 0.0];
        let sys = m.finite_system(5, Boundary::Periodic, Some(&v)).unwrap();
        let mut rho = Array2::<C64>::zeros((5, 5));
        rho[[0, 1]] = C64::new(1.0, 0.0);
        let z = hs_inner(&rho, &sys.apply(&rho));
        assert!((z.im.abs() - 2.0 * lambda).abs() < 1e-12);
        assert!(z.im.abs() > (1.0 - 0.0) * lambda);
    }

    #[test]
    fn containment_with_and_without_disorder() {
        let m = LindbladModel::dephasing(1.0).unwrap();
        let clean = kunz_containment(&m, 8, 0.0, &[1], 32).unwrap();
        assert!(clean.all_contained());
        assert!(clean.rows[0].clean_to_disordered < 1e-10);
        let rep = kunz_containment(&m, 8, 1.5, &[1, 2, 3], 32).unwrap();
        assert!(rep.all_contained(), "{rep:?}");
        assert_eq!(rep, kunz_containment(&m, 8, 1.5, &[1, 2, 3], 32).unwrap());
    }
}
