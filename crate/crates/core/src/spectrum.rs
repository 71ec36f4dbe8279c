//! Infinite-volume spectra: symbol curves of the fibers (NHE part) and roots
//! of the secular function `g(z) = 1 + <Gamma_R| (T(q) - z)^{-1} |Gamma_L>`
//! (jump part).

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laurent::{LaurentInverse, DEGENERATE_TOL};
use crate::model::{Builtin, FiberOperator, LindbladModel};
use crate::numerics::{hausdorff_distance, newton_roots};

/// Secular residual below which a candidate counts as a root.
pub const ROOT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    #[serde(rename = "NHE")]
    Nhe,
    #[serde(rename = "JUMP")]
    Jump,
    #[serde(rename = "EIG")]
    Eig,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::Nhe => "NHE",
            Tag::Jump => "JUMP",
            Tag::Eig => "EIG",
        })
    }
}

impl FromStr for Tag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NHE" => Ok(Tag::Nhe),
            "JUMP" => Ok(Tag::Jump),
            "EIG" => Ok(Tag::Eig),
            other => Err(Error::InvalidArgument(format!("unknown tag '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub z: C64,
    pub tag: Tag,
    pub q: Option<f64>,
    pub theta: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCloud {
    pub points: Vec<SpectrumPoint>,
}

pub const CSV_HEADER: &str = "re,im,tag,q,theta";

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl SpectrumCloud {
    pub fn new(points: Vec<SpectrumPoint>) -> Self {
        Self { points }
    }

    pub fn from_values(values: &[C64], tag: Tag) -> Self {
        Self::new(
            values
                .iter()
                .map(|&z| SpectrumPoint {
                    z,
                    tag,
                    q: None,
                    theta: None,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self) -> Vec<C64> {
        self.points.iter().map(|p| p.z).collect()
    }

    pub fn values_with_tag(&self, tag: Tag) -> Vec<C64> {
        self.points.iter().filter(|p| p.tag == tag).map(|p| p.z).collect()
    }

    pub fn extend(&mut self, other: SpectrumCloud) {
        self.points.extend(other.points);
    }

    pub fn merged(mut self, other: SpectrumCloud) -> Self {
        self.extend(other);
        self
    }

    pub fn conjugated(&self) -> Self {
        Self::new(
            self.points
                .iter()
                .map(|p| SpectrumPoint { z: p.z.conj(), ..*p })
                .collect(),
        )
    }

    /// CSV with header `re,im,tag,q,theta`, LF line endings, round-trip floats.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(80 * (self.points.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            out.push_str(&fmt_float(p.z.re));
            out.push(',');
            out.push_str(&fmt_float(p.z.im));
            out.push(',');
            out.push_str(&p.tag.to_string());
            out.push(',');
            if let Some(q) = p.q {
                out.push_str(&fmt_float(q));
            }
            out.push(',');
            if let Some(t) = p.theta {
                out.push_str(&fmt_float(t));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim_end() == CSV_HEADER => {}
            _ => return Err(Error::InvalidArgument(format!("CSV must start with '{CSV_HEADER}'"))),
        }
        let mut points = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::InvalidArgument(format!("CSV row {} has {} fields", i + 2, fields.len())));
            }
            let num = |s: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad number '{s}' in CSV row {}", i + 2)))
            };
            let opt = |s: &str| -> Result<Option<f64>> {
                if s.trim().is_empty() {
                    Ok(None)
                } else {
                    num(s).map(Some)
                }
            };
            points.push(SpectrumPoint {
                z: C64::new(num(fields[0])?, num(fields[1])?),
                tag: fields[2].trim().parse()?,
                q: opt(fields[3])?,
                theta: opt(fields[4])?,
            });
        }
        Ok(Self { points })
    }

    /// Largest nearest-neighbour distance inside the cloud.
    pub fn max_nearest_neighbour(&self) -> Result<f64> {
        let v = self.values();
        if v.len() < 2 {
            return Err(Error::EmptySet);
        }
        // Sweep in order of real part, pruning by the horizontal gap.
        let mut worst: f64 = 0.0;
        let mut sorted = v.clone();
        sorted.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        for (i, z) in sorted.iter().enumerate() {
            let mut best = f64::INFINITY;
            for w in sorted[i + 1..].iter() {
                if w.re - z.re > best {
                    break;
                }
                best = best.min((w - z).norm());
            }
            for w in sorted[..i].iter().rev() {
                if z.re - w.re > best {
                    break;
                }
                best = best.min((w - z).norm());
            }
            worst = worst.max(best);
        }
        Ok(worst)
    }
}

fn q_grid(n_q: usize) -> Vec<f64> {
    (0..n_q).map(|k| TAU * k as f64 / n_q as f64).collect()
}

/// Union over `q_k = 2 pi k / n_q` of the sampled symbol curves of `T(q_k)`.
pub fn nhe_spectrum(m: &LindbladModel, n_q: usize, n_theta: usize) -> Result<SpectrumCloud> {
    if n_q == 0 || n_theta < 3 {
        return Err(Error::InvalidArgument(format!(
            "need n_q >= 1 and n_theta >= 3, got {n_q} and {n_theta}"
        )));
    }
    let per_q: Vec<Vec<SpectrumPoint>> = q_grid(n_q)
        .into_par_iter()
        .map(|q| {
            let symbol = m.fiber_symbol(q);
            (0..n_theta)
                .map(|j| {
                    let theta = TAU * j as f64 / n_theta as f64;
                    SpectrumPoint {
                        z: symbol.at_angle(theta),
                        tag: Tag::Nhe,
                        q: Some(q),
                        theta: Some(theta),
                    }
                })
                .collect()
        })
        .collect();
    Ok(SpectrumCloud::new(per_q.into_iter().flatten().collect()))
}

/// Precomputed secular function of one fiber.
struct Secular<'a> {
    fiber: &'a FiberOperator,
    offsets: Vec<(i64, i64, C64)>,
}

impl<'a> Secular<'a> {
    fn new(fiber: &'a FiberOperator) -> Self {
        let mut offsets = Vec::new();
        for (e, r) in fiber.gamma_r.iter() {
            for (d, l) in fiber.gamma_l.iter() {
                offsets.push((e as i64, d as i64, r.conj() * l));
            }
        }
        Self { fiber, offsets }
    }

    fn value(&self, z: C64) -> Result<C64> {
        let inv = LaurentInverse::new(&self.fiber.t_symbol.shifted(z))?;
        Ok(C64::new(1.0, 0.0)
            + self
                .offsets
                .iter()
                .map(|(e, d, w)| w * inv.element(d - e))
                .sum::<C64>())
    }
}

/// `g(z) = 1 + <Gamma_R| (T - z)^{-1} |Gamma_L>`; fails on the symbol curve.
pub fn secular_value(f: &FiberOperator, z: C64) -> Result<C64> {
    Secular::new(f).value(z)
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpOptions {
    /// Refine q-intervals whose root sets differ by more than this.
    pub spacing: f64,
    /// Maximum number of interval bisections.
    pub max_depth: u32,
    pub refine: bool,
}

impl Default for JumpOptions {
    fn default() -> Self {
        Self {
            spacing: 5e-3,
            max_depth: 22,
            refine: true,
        }
    }
}

/// Roots of the secular function of the fiber at `q`.
fn roots_at(m: &LindbladModel, q: f64, seeds: &[C64], coarse: bool) -> Result<Vec<C64>> {
    let fiber = m.fiber(q)?;
    fiber_roots(&fiber, seeds, coarse)
}

/// Roots of `g` for one fiber: closed form for an on-site rank-one jump on a
/// tridiagonal `T`, Newton continuation otherwise.
pub fn fiber_roots(fiber: &FiberOperator, seeds: &[C64], coarse: bool) -> Result<Vec<C64>> {
    if fiber.gamma_l.is_zero() || fiber.gamma_r.is_zero() {
        return Ok(vec![]);
    }
    let sec = Secular::new(fiber);
    let accept = |z: C64| sec.value(z).map(|g| g.norm() < ROOT_TOL).unwrap_or(false);
    let single_site = fiber.gamma_l.len() == 1
        && fiber.gamma_r.len() == 1
        && fiber.gamma_l.min_offset() == fiber.gamma_r.min_offset();
    let mut roots: Vec<C64> = Vec::new();
    let push = |z: C64, roots: &mut Vec<C64>| {
        if !roots.iter().any(|r| (r - z).norm() <= 1e-10 * (1.0 + z.norm())) {
            roots.push(z);
        }
    };
    if let (true, Some((a, b, g))) = (single_site, fiber.t_symbol.as_tridiagonal()) {
        let s = fiber.gamma_l.min_offset().unwrap();
        let kappa = fiber.gamma_r.get(s).conj() * fiber.gamma_l.get(s);
        let mut cands = vec![b + kappa];
        if a.norm() > DEGENERATE_TOL && g.norm() > DEGENERATE_TOL {
            let w = (kappa * kappa + 4.0 * a * g).sqrt();
            cands = vec![b + w, b - w];
        }
        for z in cands {
            if accept(z) {
                push(z, &mut roots);
            }
        }
        return Ok(roots);
    }
    let mut all_seeds = seeds.to_vec();
    if coarse {
        all_seeds.extend(seed_grid(fiber));
    }
    let report = newton_roots(|z| sec.value(z).ok(), &all_seeds, 1e-12);
    for z in report.roots {
        if accept(z) {
            push(z, &mut roots);
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(roots)
}

/// About forty seeds covering the symbol curve's bounding box, widened by
/// `|Gamma_L| |Gamma_R|`; every eigenvalue lies in that box.
fn seed_grid(fiber: &FiberOperator) -> Vec<C64> {
    let curve: Vec<C64> = (0..64)
        .map(|k| fiber.t_symbol.at_angle(TAU * k as f64 / 64.0))
        .collect();
    let pad = fiber.gamma_l.norm() * fiber.gamma_r.norm();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for z in &curve {
        x0 = x0.min(z.re);
        x1 = x1.max(z.re);
        y0 = y0.min(z.im);
        y1 = y1.max(z.im);
    }
    let (nx, ny) = (7, 6);
    let mut out = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            // Offset off the lattice so seeds avoid the symmetric axis.
            let x = x0 - pad + (x1 - x0 + 2.0 * pad) * (i as f64 + 0.37) / nx as f64;
            let y = y0 - pad + (y1 - y0 + 2.0 * pad) * (j as f64 + 0.41) / ny as f64;
            out.push(C64::new(x, y));
        }
    }
    out
}

fn needs_refinement(a: &[C64], b: &[C64], spacing: f64) -> bool {
    if a.len() != b.len() {
        return true;
    }
    if a.is_empty() {
        return false;
    }
    hausdorff_distance(a, b).map(|d| d > spacing).unwrap_or(false)
}

/// Jump spectrum on the uniform grid `q_k = 2 pi k / n_q` with default refinement.
pub fn jump_curve(m: &LindbladModel, n_q: usize) -> Result<SpectrumCloud> {
    jump_curve_with(m, n_q, &JumpOptions::default())
}

pub fn jump_curve_with(m: &LindbladModel, n_q: usize, opts: &JumpOptions) -> Result<SpectrumCloud> {
    if n_q == 0 {
        return Err(Error::InvalidArgument("n_q must be positive".into()));
    }
    let qs = q_grid(n_q);
    let first: Vec<Vec<C64>> = qs
        .par_iter()
        .map(|&q| roots_at(m, q, &[], true))
        .collect::<Result<_>>()?;
    // Continuation from both neighbours.
    let base: Vec<Vec<C64>> = (0..n_q)
        .into_par_iter()
        .map(|k| {
            let prev = &first[(k + n_q - 1) % n_q];
            let next = &first[(k + 1) % n_q];
            if prev.len() <= first[k].len() && next.len() <= first[k].len() {
                return Ok(first[k].clone());
            }
            let seeds: Vec<C64> = first[k].iter().chain(prev).chain(next).copied().collect();
            roots_at(m, qs[k], &seeds, false)
        })
        .collect::<Result<_>>()?;
    let refined: Vec<Vec<(f64, Vec<C64>)>> = if opts.refine {
        (0..n_q)
            .into_par_iter()
            .map(|k| {
                let (qa, qb) = (qs[k], qs[k] + TAU / n_q as f64);
                let (ra, rb) = (&base[k], &base[(k + 1) % n_q]);
                let mut out = Vec::new();
                refine(m, qa, ra, qb, rb, opts, 0, &mut out)?;
                Ok(out)
            })
            .collect::<Result<_>>()?
    } else {
        vec![Vec::new(); n_q]
    };
    let mut points = Vec::new();
    for k in 0..n_q {
        let mut block: Vec<(f64, Vec<C64>)> = vec![(qs[k], base[k].clone())];
        block.extend(refined[k].iter().cloned());
        block.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (q, roots) in block {
            for z in roots {
                points.push(SpectrumPoint {
                    z,
                    tag: Tag::Jump,
                    q: Some(q),
                    theta: None,
                });
            }
        }
    }
    Ok(SpectrumCloud::new(points))
}

#[allow(clippy::too_many_arguments)]
fn refine(
    m: &LindbladModel,
    qa: f64,
    ra: &[C64],
    qb: f64,
    rb: &[C64],
    opts: &JumpOptions,
    depth: u32,
    out: &mut Vec<(f64, Vec<C64>)>,
) -> Result<()> {
    if depth >= opts.max_depth || !needs_refinement(ra, rb, opts.spacing) {
        return Ok(());
    }
    let qm = 0.5 * (qa + qb);
    let seeds: Vec<C64> = ra.iter().chain(rb).copied().collect();
    let rm = roots_at(m, qm, &seeds, false)?;
    refine(m, qa, ra, qm, &rm, opts, depth + 1, out)?;
    refine(m, qm, &rm, qb, rb, opts, depth + 1, out)?;
    out.push((qm, rm));
    Ok(())
}

/// Geometric pieces of an exactly known spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Component {
    Segment { a: C64, b: C64 },
    /// Filled convex polygon, vertices in order.
    Polygon { vertices: Vec<C64> },
    /// Densely sampled curve.
    Curve { points: Vec<C64> },
}

fn segment_distance(z: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = (((z - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (z - (a + d * t)).norm()
}

fn cross(a: C64, b: C64) -> f64 {
    a.re * b.im - a.im * b.re
}

impl Component {
    pub fn distance(&self, z: C64) -> f64 {
        match self {
            Component::Segment { a, b } => segment_distance(z, *a, *b),
            Component::Polygon { vertices } => {
                let n = vertices.len();
                let edge = (0..n)
                    .map(|i| segment_distance(z, vertices[i], vertices[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min);
                if polygon_contains(vertices, z) {
                    0.0
                } else {
                    edge
                }
            }
            Component::Curve { points } => points
                .iter()
                .map(|p| (p - z).norm())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Points at roughly the given spacing; polygons are filled.
    pub fn sample(&self, spacing: f64) -> Vec<C64> {
        match self {
            Component::Segment { a, b } => {
                let k = ((b - a).norm() / spacing).ceil().max(1.0) as usize;
                (0..=k).map(|i| a + (b - a) * (i as f64 / k as f64)).collect()
            }
            Component::Polygon { vertices } => {
                let n = vertices.len();
                let mut out: Vec<C64> = (0..n)
                    .flat_map(|i| {
                        Component::Segment {
                            a: vertices[i],
                            b: vertices[(i + 1) % n],
                        }
                        .sample(spacing)
                    })
                    .collect();
                let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
                for v in vertices {
                    x0 = x0.min(v.re);
                    x1 = x1.max(v.re);
                    y0 = y0.min(v.im);
                    y1 = y1.max(v.im);
                }
                let nx = ((x1 - x0) / spacing).ceil() as usize;
                let ny = ((y1 - y0) / spacing).ceil() as usize;
                for i in 0..=nx {
                    for j in 0..=ny {
                        let z = C64::new(x0 + i as f64 * spacing, y0 + j as f64 * spacing);
                        if polygon_contains(vertices, z) {
                            out.push(z);
                        }
                    }
                }
                out
            }
            Component::Curve { points } => points.clone(),
        }
    }
}

/// Point-in-convex-polygon test, boundary included.
pub fn polygon_contains(vertices: &[C64], z: C64) -> bool {
    let n = vertices.len();
    if n < 3 {
        return false;
    }
    let mut sign = 0.0;
    for i in 0..n {
        let c = cross(vertices[(i + 1) % n] - vertices[i], z - vertices[i]);
        if c.abs() <= 1e-12 {
            continue;
        }
        if sign == 0.0 {
            sign = c.signum();
        } else if c.signum() != sign {
            return false;
        }
    }
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormSpectrum {
    pub builtin: String,
    #[serde(rename = "G")]
    pub g: f64,
    pub components: Vec<Component>,
    /// Jump part known only numerically and not part of the statement.
    pub jump_reported_only: bool,
}

impl ClosedFormSpectrum {
    pub fn distance(&self, z: C64) -> f64 {
        self.components
            .iter()
            .map(|c| c.distance(z))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sample(&self, spacing: f64) -> Vec<C64> {
        self.components.iter().flat_map(|c| c.sample(spacing)).collect()
    }
}

/// Exact spectrum of a builtin model.
pub fn closed_form_spectrum(builtin: Builtin, g: f64) -> Result<ClosedFormSpectrum> {
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::InvalidModel(format!("coupling G must be positive, got {g}")));
    }
    let c = C64::new;
    let nhe = |center: f64| Component::Segment {
        a: c(center, -4.0),
        b: c(center, 4.0),
    };
    let (components, jump_reported_only) = match builtin {
        Builtin::Dephasing => {
            let low = if g <= 4.0 { -g } else { -g + (g * g - 16.0).sqrt() };
            (
                vec![
                    nhe(-g),
                    Component::Segment {
                        a: c(low, 0.0),
                        b: c(0.0, 0.0),
                    },
                ],
                false,
            )
        }
        Builtin::Exclusion => (
            vec![
                nhe(-2.0 * g),
                Component::Segment {
                    a: c(-2.0 * g, 0.0),
                    b: c(0.0, 0.0),
                },
            ],
            false,
        ),
        Builtin::IncoherentHopping { l } => {
            let model = LindbladModel::incoherent_hopping(g, l)?;
            let opts = JumpOptions {
                spacing: 2e-3,
                max_depth: 24,
                refine: true,
            };
            let curve = jump_curve_with(&model, 2048, &opts)?.values();
            (vec![nhe(-g), Component::Curve { points: curve }], false)
        }
        Builtin::NonNormal { delta, .. } => {
            let k = (delta / std::f64::consts::PI).round();
            if (delta - k * std::f64::consts::PI).abs() > 1e-12 {
                return Err(Error::UnsupportedModel(format!(
                    "non_normal closed form needs delta in {{0, pi}}, got {delta}"
                )));
            }
            let s = if (k as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let center = -4.0 * g;
            let vertices = vec![
                c(center - s * 4.0 * g, 0.0),
                c(center, -4.0),
                c(center + s * 4.0 * g, 0.0),
                c(center, 4.0),
            ];
            (vec![Component::Polygon { vertices }], true)
        }
    };
    Ok(ClosedFormSpectrum {
        builtin: builtin.to_string(),
        g,
        components,
        jump_reported_only,
    })
}

/// `v_k = <k| (T - z)^{-1} |Gamma_L>` for `|k| <= k_max`, an eigenvector of
/// `T + F` at a root `z` of the secular function.
pub fn jump_eigenvector(f: &FiberOperator, z: C64, k_max: usize) -> Result<Vec<C64>> {
    let g = secular_value(f, z)?;
    if g.norm() > 1e-8 {
        return Err(Error::InvalidArgument(format!("z = {z} is not a secular root (|g| = {:.3e})", g.norm())));
    }
    let inv = LaurentInverse::new(&f.t_symbol.shifted(z))?;
    let k_max = k_max as i64;
    Ok((-k_max..=k_max)
        .map(|k| {
            f.gamma_l
                .iter()
                .map(|(d, l)| inv.element(d as i64 - k) * l)
                .sum()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub sup_re: f64,
    pub near_zero_count: usize,
}

/// Largest real part among points outside the disk `|z| <= radius`.
pub fn gap_report(cloud: &SpectrumCloud, exclusion_radius: f64) -> Result<GapReport> {
    let mut sup_re = f64::NEG_INFINITY;
    let mut near = 0;
    for p in &cloud.points {
        if p.z.norm() > exclusion_radius {
            sup_re = sup_re.max(p.z.re);
        } else {
            near += 1;
        }
    }
    if sup_re == f64::NEG_INFINITY {
        return Err(Error::EmptyAfterExclusion(exclusion_radius));
    }
    Ok(GapReport {
        sup_re,
        near_zero_count: near,
    })
}

/// NHE cloud plus refined jump curve on the same q-grid.
pub fn full_spectrum(m: &LindbladModel, n_q: usize, n_theta: usize) -> Result<SpectrumCloud> {
    Ok(nhe_spectrum(m, n_q, n_theta)?.merged(jump_curve(m, n_q)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laurent::branch_sqrt;
    use crate::model::SparseVector;
    use crate::numerics::solve_tridiagonal;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn dephasing_nhe_is_a_vertical_segment() {
        let m = LindbladModel::dephasing(2.0).unwrap();
        let cloud = nhe_spectrum(&m, 16, 16).unwrap();
        assert_eq!(cloud.len(), 256);
        for p in &cloud.points {
            assert!((p.z.re + 2.0).abs() < 1e-14);
            assert!(p.z.im.abs() <= 4.0 + 1e-14);
        }
        let at_pi = m.fiber_symbol(PI);
        for k in 0..8 {
            let th = TAU * k as f64 / 8.0;
            assert!((at_pi.at_angle(th) - c(-2.0, -4.0 * th.cos())).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_hopping_collapses_nhe() {
        let m = LindbladModel::dephasing(1.5).unwrap().with_hopping(SparseVector::new()).unwrap();
        let cloud = nhe_spectrum(&m, 8, 8).unwrap();
        assert!(cloud.values().iter().all(|z| (z - c(-1.5, 0.0)).norm() < 1e-15));
        let full = cloud.merged(jump_curve(&m, 8).unwrap());
        let r = gap_report(&full, 0.5).unwrap();
        assert_eq!(r.sup_re, -1.5);
        assert_eq!(r.near_zero_count, 8);
    }

    #[test]
    fn secular_value_off_the_curve_matches_truncated_solve() {
        let f = LindbladModel::dephasing(2.0).unwrap().fiber(PI).unwrap();
        let z = c(-2.0, 5.0);
        let g = secular_value(&f, z).unwrap();
        let (a, b, gm) = f.t_symbol.as_tridiagonal().unwrap();
        let r = crate::laurent::RootPair::compute(a, b - z, gm).unwrap();
        let closed = 1.0 + 2.0 * r.sign_factor / branch_sqrt((b - z) * (b - z) - 4.0 * a * gm);
        assert!((g - closed).norm() < 1e-13);
        // 401-site section centred at 0
        let n = 401;
        let diag = vec![b - z; n];
        let sub = vec![a; n - 1];
        let sup = vec![gm; n - 1];
        let mut rhs = vec![c(0.0, 0.0); n];
        rhs[200] = c(2f64.sqrt(), 0.0);
        let x = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
        let trunc = 1.0 + 2f64.sqrt() * x[200];
        assert!((g - trunc).norm() < 1e-12);
        assert!(g.norm() > 0.0);
    }

    #[test]
    fn secular_vanishes_on_dephasing_roots() {
        let g = 2.0;
        let m = LindbladModel::dephasing(g).unwrap();
        for q in [0.1, 0.5, 0.9, 1.0] {
            let f = m.fiber(q).unwrap();
            let z = c(-g + (g * g + 8.0 * (q.cos() - 1.0)).sqrt(), 0.0);
            assert!(secular_value(&f, z).unwrap().norm() < 1e-10, "q={q}");
            let roots = fiber_roots(&f, &[], true).unwrap();
            assert_eq!(roots.len(), 1);
            assert!((roots[0] - z).norm() < 1e-12);
        }
        // at q = 0 the only root is z = 0
        let r0 = fiber_roots(&m.fiber(0.0).unwrap(), &[], true).unwrap();
        assert_eq!(r0.len(), 1);
        assert!(r0[0].norm() < 1e-14);
    }

    #[test]
    fn secular_on_curve_is_an_error() {
        let f = LindbladModel::dephasing(2.0).unwrap().fiber(1.0).unwrap();
        let z = f.t_symbol.at_angle(0.3);
        assert!(matches!(secular_value(&f, z), Err(Error::OnSymbolCurve { .. })));
    }

    #[test]
    fn newton_path_agrees_with_closed_form() {
        // A negligible extra entry in Gamma_L forces the Newton path.
        let m = LindbladModel::dephasing(2.0).unwrap();
        let mut f = m.fiber(0.7).unwrap();
        let closed = fiber_roots(&f, &[], true).unwrap();
        f.gamma_l = SparseVector::from_pairs([(0, f.gamma_l.get(0)), (5, c(1e-300, 0.0))]);
        let general = fiber_roots(&f, &[], true).unwrap();
        assert_eq!(closed.len(), 1);
        assert_eq!(general.len(), 1);
        assert!((closed[0] - general[0]).norm() < 1e-9);
    }

    #[test]
    fn dephasing_jump_curve_traces_the_real_segment() {
        let m = LindbladModel::dephasing(2.0).unwrap();
        let cloud = jump_curve(&m, 64).unwrap();
        for p in &cloud.points {
            let q = p.q.unwrap();
            assert!(p.z.im.abs() < 1e-12);
            let want = -2.0 + (4.0 + 8.0 * (q.cos() - 1.0)).sqrt();
            assert!((p.z.re - want).abs() < 1e-10);
        }
        let target = Component::Segment {
            a: c(-2.0, 0.0),
            b: c(0.0, 0.0),
        }
        .sample(1e-3);
        assert!(hausdorff_distance(&cloud.values(), &target).unwrap() < 0.01);
    }

    #[test]
    fn incoherent_hopping_candidates_at_pi() {
        let (g, q) = (2.0, PI);
        let f = LindbladModel::incoherent_hopping(g, 1).unwrap().fiber(q).unwrap();
        let kappa = f.gamma_r.get(0).conj() * f.gamma_l.get(0);
        let (a, b, gm) = f.t_symbol.as_tridiagonal().unwrap();
        let w = (kappa * kappa + 4.0 * a * gm).sqrt();
        let cands = [b + w, b - w];
        for want in [c(-2.0, 2.0 * 3f64.sqrt()), c(-2.0, -2.0 * 3f64.sqrt())] {
            assert!(cands.iter().any(|z| (z - want).norm() < 1e-12));
        }
        // both candidates sit on the symbol segment -2 + i[-4, 4] of T(pi)
        for z in cands {
            assert!(matches!(secular_value(&f, z), Err(Error::OnSymbolCurve { .. })));
        }
        assert!(fiber_roots(&f, &[], true).unwrap().is_empty());
    }

    #[test]
    fn incoherent_hopping_keeps_one_candidate() {
        let g = 2.0;
        let m = LindbladModel::incoherent_hopping(g, 1).unwrap();
        let mut singles = 0;
        for k in 1..40 {
            let q = TAU * k as f64 / 40.0;
            let f = m.fiber(q).unwrap();
            let roots = fiber_roots(&f, &[], true).unwrap();
            assert!(roots.len() <= 1);
            singles += roots.len();
        }
        assert!(singles > 0);
    }

    #[test]
    fn exclusion_jump_roots() {
        let g = 1.0;
        let m = LindbladModel::exclusion(g).unwrap();
        for k in 0..32 {
            let q = TAU * k as f64 / 32.0;
            for z in fiber_roots(&m.fiber(q).unwrap(), &[], true).unwrap() {
                let w = (4.0 * q.cos().powi(2) * g * g + 8.0 * (q.cos() - 1.0)).sqrt();
                assert!((z.re - (-2.0 * g + w)).abs() < 1e-10 || (z.re - (-2.0 * g - w)).abs() < 1e-10);
                assert!(z.im.abs() < 1e-12 && z.re <= 1e-12 && z.re >= -2.0 * g - 1e-12);
            }
        }
    }

    #[test]
    fn eigenvector_residual_and_decay() {
        let m = LindbladModel::dephasing(2.0).unwrap();
        let q = 0.8;
        let f = m.fiber(q).unwrap();
        let z = fiber_roots(&f, &[], true).unwrap()[0];
        let v = jump_eigenvector(&f, z, 30).unwrap();
        let (a, b, gm) = f.t_symbol.as_tridiagonal().unwrap();
        let lam2 = crate::laurent::ordered_roots(a, b - z, gm).unwrap().lambda2;
        for k in 1..30usize {
            let ratio = v[30 + k].norm() / v[30].norm();
            assert!((ratio - lam2.norm().powi(k as i32)).abs() < 1e-12);
        }
        // (T + F - z) v = 0 away from the window edges
        let kappa = f.gamma_r.get(0).conj();
        for k in 2..59usize {
            let tv = a * v[k - 1] + (b - z) * v[k] + gm * v[k + 1];
            let fv = if k == 30 { f.gamma_l.get(0) * kappa * v[30] } else { c(0.0, 0.0) };
            assert!((tv + fv).norm() < 1e-12);
        }
        assert!(jump_eigenvector(&f, c(0.3, 0.2), 5).is_err());
    }

    #[test]
    fn gap_report_errors_when_everything_is_excluded() {
        let cloud = SpectrumCloud::from_values(&[c(0.0, 0.0), c(0.1, 0.0)], Tag::Eig);
        assert!(matches!(gap_report(&cloud, 1.0), Err(Error::EmptyAfterExclusion(_))));
    }

    #[test]
    fn closed_forms() {
        let d5 = closed_form_spectrum(Builtin::Dephasing, 5.0).unwrap();
        assert_eq!(
            d5.components[1],
            Component::Segment {
                a: c(-2.0, 0.0),
                b: c(0.0, 0.0)
            }
        );
        let d4 = closed_form_spectrum(Builtin::Dephasing, 4.0).unwrap();
        assert!(d4.distance(c(-4.0, 0.0)) < 1e-15);
        let ex = closed_form_spectrum(Builtin::Exclusion, 1.0).unwrap();
        assert!(ex.distance(c(-2.0, 3.9)) < 1e-15);
        assert!(ex.distance(c(-1.0, 0.0)) < 1e-15);
        assert!(closed_form_spectrum(Builtin::NonNormal { delta: 0.3, l: 1 }, 1.0).is_err());
        let nn = closed_form_spectrum(Builtin::NonNormal { delta: 0.0, l: 1 }, 1.0).unwrap();
        assert!(nn.jump_reported_only);
        assert!(nn.distance(c(-4.0, 0.0)) < 1e-15);
        assert!((nn.distance(c(1.0, 0.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_normal_nhe_fills_rhombus() {
        let g = 1.0;
        let m = LindbladModel::non_normal(g, 0.0, 1).unwrap();
        let cloud = nhe_spectrum(&m, 64, 64).unwrap().values();
        let cf = closed_form_spectrum(Builtin::NonNormal { delta: 0.0, l: 1 }, g).unwrap();
        assert!(cloud.iter().all(|z| cf.distance(*z) < 1e-9));
        // the vertices -4 +- 4i are attained
        for v in [c(-4.0, 4.0), c(-4.0, -4.0), c(0.0, 0.0), c(-8.0, 0.0)] {
            assert!(cloud.iter().any(|z| (z - v).norm() < 1e-9), "{v}");
        }
    }

    #[test]
    fn csv_round_trip_and_format() {
        let cloud = SpectrumCloud::new(vec![
            SpectrumPoint {
                z: c(-0.1, 1.0 / 3.0),
                tag: Tag::Nhe,
                q: Some(0.5),
                theta: Some(2.0),
            },
            SpectrumPoint {
                z: c(-0.0, 1e-300),
                tag: Tag::Jump,
                q: Some(0.25),
                theta: None,
            },
            SpectrumPoint {
                z: c(5.0, -2.0),
                tag: Tag::Eig,
                q: None,
                theta: None,
            },
        ]);
        let text = cloud.to_csv();
        assert!(text.starts_with("re,im,tag,q,theta\n"));
        assert!(!text.contains('\r'));
        assert!(text.lines().nth(2).unwrap().ends_with(",JUMP,2.5000000000000000e-1,"));
        let back = SpectrumCloud::from_csv(&text).unwrap();
        assert_eq!(back, cloud);
        assert_eq!(back.points[1].z.re.to_bits(), (-0.0f64).to_bits());
        assert!(SpectrumCloud::from_csv("x,y\n").is_err());
        assert!(SpectrumCloud::from_csv("re,im,tag,q,theta\n1,2,FOO,,\n").is_err());
    }

    #[test]
    fn conjugation_symmetry_of_clouds() {
        for m in [
            LindbladModel::dephasing(1.0).unwrap(),
            LindbladModel::non_normal(1.0, 0.0, 1).unwrap(),
            LindbladModel::incoherent_hopping(2.0, 1).unwrap(),
        ] {
            let cloud = nhe_spectrum(&m, 48, 48).unwrap();
            let spacing = cloud.max_nearest_neighbour().unwrap();
            let d = hausdorff_distance(&cloud.values(), &cloud.conjugated().values()).unwrap();
            assert!(d <= spacing + 1e-12, "d={d} spacing={spacing}");
        }
    }
}
