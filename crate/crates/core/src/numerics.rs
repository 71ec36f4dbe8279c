//! Dense linear algebra, pseudospectra, point-set distances and root finding.

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use ndarray::{Array2, ArrayView2};
use ndarray_linalg::{Eig, EigValsh, EigVals, SVD, UPLO};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Residual above which an eigenpair is flagged.
pub const RESIDUAL_FLAG: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub values: Vec<C64>,
    /// `|A v - lambda v| / (|A|_F |v|)` per eigenpair.
    pub residuals: Vec<f64>,
}

impl EigenResult {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Indices whose residual exceeds [`RESIDUAL_FLAG`].
    pub fn flagged(&self) -> Vec<usize> {
        self.residuals
            .iter()
            .enumerate()
            .filter(|(_, r)| **r > RESIDUAL_FLAG)
            .map(|(i, _)| i)
            .collect()
    }
}

fn frobenius(m: &ArrayView2<C64>) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues with right-eigenvector residuals (LAPACK `zgeev`).
pub fn dense_eigenvalues(m: &Array2<C64>) -> Result<EigenResult> {
    check_square(m)?;
    if m.nrows() == 0 {
        return Ok(EigenResult {
            values: vec![],
            residuals: vec![],
        });
    }
    let (vals, vecs) = m.eig()?;
    let norm = frobenius(&m.view()).max(f64::MIN_POSITIVE);
    let av = m.dot(&vecs);
    let residuals = (0..vals.len())
        .map(|k| {
            let v = vecs.column(k);
            let vn = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            let r = av
                .column(k)
                .iter()
                .zip(v.iter())
                .map(|(a, x)| (a - vals[k] * x).norm_sqr())
                .sum::<f64>()
                .sqrt();
            r / (norm * vn.max(f64::MIN_POSITIVE))
        })
        .collect();
    Ok(EigenResult {
        values: vals.to_vec(),
        residuals,
    })
}

/// Eigenvalues only.
pub fn eigenvalues(m: &Array2<C64>) -> Result<Vec<C64>> {
    check_square(m)?;
    if m.nrows() == 0 {
        return Ok(vec![]);
    }
    Ok(m.eigvals()?.to_vec())
}

/// Ascending eigenvalues of a Hermitian matrix (lower triangle is read).
pub fn hermitian_eigenvalues(m: &Array2<C64>) -> Result<Vec<f64>> {
    check_square(m)?;
    Ok(m.eigvalsh(UPLO::Lower)?.to_vec())
}

/// Largest eigenvalue of `(e^{-i phi} A + e^{i phi} A*) / 2`.
pub fn support_function(m: &Array2<C64>, phi: f64) -> Result<f64> {
    let rot = C64::from_polar(1.0, -phi);
    let herm = Array2::from_shape_fn(m.dim(), |(a, b)| 0.5 * (rot * m[[a, b]] + (rot * m[[b, a]]).conj()));
    hermitian_eigenvalues(&herm)?
        .last()
        .copied()
        .ok_or(Error::EmptySet)
}

pub fn singular_values(m: &Array2<C64>) -> Result<Vec<f64>> {
    let (_, s, _) = m.svd(false, false)?;
    Ok(s.to_vec())
}

pub fn min_singular_value(m: &Array2<C64>) -> Result<f64> {
    check_square(m)?;
    singular_values(m)?
        .into_iter()
        .reduce(f64::min)
        .ok_or(Error::EmptySet)
}

fn check_square(m: &Array2<C64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument(format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridBox {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl GridBox {
    pub fn contains(&self, z: C64) -> bool {
        (self.re_min..=self.re_max).contains(&z.re) && (self.im_min..=self.im_max).contains(&z.im)
    }
}

#[derive(Clone, Debug)]
pub struct PseudospectrumField {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    /// `values[[iy, ix]] = sigma_min(A - (re[ix] + i im[iy]))`.
    pub values: Array2<f64>,
    /// Whether every eigenvalue of `A` lies inside the box.
    pub box_contains_spectrum: bool,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Smallest singular value of `A - z` on an `nx x ny` lattice.
pub fn pseudospectrum_grid(m: &Array2<C64>, bx: GridBox, nx: usize, ny: usize) -> Result<PseudospectrumField> {
    check_square(m)?;
    if nx == 0 || ny == 0 || !(bx.re_min <= bx.re_max && bx.im_min <= bx.im_max) {
        return Err(Error::InvalidArgument("empty pseudospectrum grid".into()));
    }
    let re = linspace(bx.re_min, bx.re_max, nx);
    let im = linspace(bx.im_min, bx.im_max, ny);
    let cells: Vec<(usize, usize)> = (0..ny).flat_map(|iy| (0..nx).map(move |ix| (iy, ix))).collect();
    let vals: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(iy, ix)| {
            let z = C64::new(re[ix], im[iy]);
            let mut shifted = m.clone();
            for k in 0..m.nrows() {
                shifted[[k, k]] -= z;
            }
            min_singular_value(&shifted)
        })
        .collect();
    let mut values = Array2::<f64>::zeros((ny, nx));
    for (&(iy, ix), v) in cells.iter().zip(vals) {
        values[[iy, ix]] = v?;
    }
    let box_contains_spectrum = eigenvalues(m)?.iter().all(|z| bx.contains(*z));
    Ok(PseudospectrumField {
        re,
        im,
        values,
        box_contains_spectrum,
    })
}

/// Nearest-neighbour queries in the plane, backed by a k-d tree.
///
/// Points are stored rotated by a fixed generic angle: spectra often lie on
/// axis-parallel segments, where axis-aligned splits cannot prune.
pub struct PointIndex {
    tree: ImmutableKdTree<f64, 2>,
    rotation: C64,
}

impl PointIndex {
    pub fn new(points: &[C64]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        let rotation = C64::from_polar(1.0, 0.6180339887498949);
        let mut unique = points.to_vec();
        unique.sort_unstable_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        unique.dedup();
        let coords: Vec<[f64; 2]> = unique
            .iter()
            .map(|p| {
                let r = p * rotation;
                [r.re, r.im]
            })
            .collect();
        Ok(Self {
            tree: ImmutableKdTree::new_from_slice(&coords),
            rotation,
        })
    }

    /// Distance from `z` to the nearest indexed point.
    pub fn nearest_distance(&self, z: C64) -> f64 {
        let r = z * self.rotation;
        self.tree.nearest_one::<SquaredEuclidean>(&[r.re, r.im]).distance.sqrt()
    }
}

/// `sup_{a in A} inf_{b in B} |a - b|`.
pub fn directed_distance(a: &[C64], b: &[C64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    if a.len().saturating_mul(b.len()) <= 1_000_000 {
        return Ok(a
            .iter()
            .map(|x| b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max));
    }
    let index = PointIndex::new(b)?;
    Ok(a.par_iter()
        .map(|x| index.nearest_distance(*x))
        .reduce(|| 0.0, f64::max))
}

pub fn hausdorff_distance(a: &[C64], b: &[C64]) -> Result<f64> {
    Ok(directed_distance(a, b)?.max(directed_distance(b, a)?))
}

/// Greedy matching distance between two multisets; infinite if sizes differ.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let key = |z: &C64| (z.re, z.im);
    let mut a: Vec<C64> = a.to_vec();
    a.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap_or(std::cmp::Ordering::Equal));
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in &a {
        let (mut bi, mut bd) = (usize::MAX, f64::INFINITY);
        for (j, y) in b.iter().enumerate() {
            if !used[j] {
                let d = (x - y).norm();
                if d < bd {
                    bd = d;
                    bi = j;
                }
            }
        }
        if bi == usize::MAX {
            return f64::INFINITY;
        }
        used[bi] = true;
        worst = worst.max(bd);
    }
    worst
}

/// Each point replaced by the centroid of its single-linkage cluster at `radius`.
///
/// Eigenvalues of a defective block split by `O(sqrt(eps))` under rounding,
/// while their mean stays accurate to `O(eps)`.
pub fn cluster_centroids(points: &[C64], radius: f64) -> Vec<C64> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (points[i] - points[j]).norm() <= radius {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut sum = vec![C64::new(0.0, 0.0); n];
    let mut count = vec![0usize; n];
    for (i, z) in points.iter().enumerate() {
        let r = find(&mut parent, i);
        sum[r] += z;
        count[r] += 1;
    }
    (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            sum[r] / count[r] as f64
        })
        .collect()
}

/// `multiset_distance` after replacing both sets by their cluster centroids.
pub fn centroid_multiset_distance(a: &[C64], b: &[C64], radius: f64) -> f64 {
    multiset_distance(&cluster_centroids(a, radius), &cluster_centroids(b, radius))
}

/// Number of clusters under single linkage at distance `threshold`.
pub fn cluster_count(points: &[C64], threshold: f64) -> usize {
    if points.is_empty() {
        return 0;
    }
    // Collapse near-duplicates first; they cannot change the linkage.
    let q = threshold / 10.0;
    let mut reps: Vec<C64> = points
        .iter()
        .map(|z| C64::new((z.re / q).round() * q, (z.im / q).round() * q))
        .collect();
    reps.sort_by(|x, y| (x.re, x.im).partial_cmp(&(y.re, y.im)).unwrap_or(std::cmp::Ordering::Equal));
    reps.dedup();
    let mut parent: Vec<usize> = (0..reps.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let cell = threshold + 2.0 * q;
    let mut grid: std::collections::HashMap<(i64, i64), Vec<usize>> = std::collections::HashMap::new();
    let key = |z: &C64| ((z.re / cell).floor() as i64, (z.im / cell).floor() as i64);
    for (i, z) in reps.iter().enumerate() {
        grid.entry(key(z)).or_default().push(i);
    }
    for (i, z) in reps.iter().enumerate() {
        let (cx, cy) = key(z);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = grid.get(&(cx + dx, cy + dy)) {
                    for &j in list {
                        if j > i && (reps[j] - z).norm() <= cell {
                            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                            if ri != rj {
                                parent[ri] = rj;
                            }
                        }
                    }
                }
            }
        }
    }
    (0..reps.len()).filter(|&i| find(&mut parent, i) == i).count()
}

#[derive(Clone, Debug)]
pub struct NewtonReport {
    pub roots: Vec<C64>,
    /// Seeds whose iteration did not reach the tolerance.
    pub failed_seeds: usize,
}

/// Newton iteration with central finite-difference derivative and step
/// halving. `g` returns `None` where it is undefined.
pub fn newton_roots<F>(g: F, seeds: &[C64], tol: f64) -> NewtonReport
where
    F: Fn(C64) -> Option<C64>,
{
    let mut roots: Vec<C64> = Vec::new();
    let mut failed = 0;
    for &seed in seeds {
        match newton_single(&g, seed, tol) {
            Some(z) => {
                if !roots.iter().any(|r| (r - z).norm() <= 1e-8 * (1.0 + z.norm())) {
                    roots.push(z);
                }
            }
            None => failed += 1,
        }
    }
    NewtonReport {
        roots,
        failed_seeds: failed,
    }
}

fn newton_single<F>(g: &F, seed: C64, tol: f64) -> Option<C64>
where
    F: Fn(C64) -> Option<C64>,
{
    let mut z = seed;
    let mut gz = g(z)?;
    for _ in 0..100 {
        if gz.norm() < tol * 1e-2 {
            return Some(z);
        }
        let h = 1e-6 * (1.0 + z.norm());
        let d = (g(z + h)? - g(z - h)?) / (2.0 * h);
        if d.norm() == 0.0 || !(d.re.is_finite() && d.im.is_finite()) {
            break;
        }
        let mut step = gz / d;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = z - step;
            if let Some(gc) = g(cand) {
                if gc.norm() < gz.norm() {
                    z = cand;
                    gz = gc;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted || step.norm() < 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    (gz.norm() < tol).then_some(z)
}

/// Solves a tridiagonal system by Gaussian elimination with partial pivoting.
/// `sub[i]` is `M[i+1, i]`, `sup[i]` is `M[i, i+1]`.
pub fn solve_tridiagonal(sub: &[C64], diag: &[C64], sup: &[C64], rhs: &[C64]) -> Result<Vec<C64>> {
    let n = diag.len();
    if sub.len() + 1 != n || sup.len() + 1 != n || rhs.len() != n {
        return Err(Error::InvalidArgument("tridiagonal band lengths disagree".into()));
    }
    let zero = C64::new(0.0, 0.0);
    let mut rows: Vec<[C64; 3]> = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut cur = [diag[0], if n > 1 { sup[0] } else { zero }, zero];
    let mut bcur = rhs[0];
    for i in 0..n.saturating_sub(1) {
        let mut nxt = [sub[i], diag[i + 1], if i + 1 < n - 1 { sup[i + 1] } else { zero }];
        let mut bn = rhs[i + 1];
        if nxt[0].norm() > cur[0].norm() {
            std::mem::swap(&mut cur, &mut nxt);
            std::mem::swap(&mut bcur, &mut bn);
        }
        if cur[0].norm() == 0.0 {
            return Err(Error::Linalg("singular tridiagonal matrix".into()));
        }
        let f = nxt[0] / cur[0];
        let next = [nxt[1] - f * cur[1], nxt[2] - f * cur[2], zero];
        rows.push(cur);
        y.push(bcur);
        cur = next;
        bcur = bn - f * bcur;
    }
    if cur[0].norm() == 0.0 {
        return Err(Error::Linalg("singular tridiagonal matrix".into()));
    }
    rows.push(cur);
    y.push(bcur);
    let mut x = vec![zero; n];
    for i in (0..n).rev() {
        let mut acc = y[i];
        if i + 1 < n {
            acc -= rows[i][1] * x[i + 1];
        }
        if i + 2 < n {
            acc -= rows[i][2] * x[i + 2];
        }
        x[i] = acc / rows[i][0];
    }
    Ok(x)
}

/// Least-squares line `y = intercept + slope x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("line fit needs two or more points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("line fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}
