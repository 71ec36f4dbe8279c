//! Translation-covariant Lindbladians with rank-one jump operators
//! `L_k = S^k |phi><psi| S^{-k}`, their fiber operators `T(q) + F(q)`, and
//! finite-volume superoperators.
//!
//! Conventions: the Hamiltonian is `H = sum_l h_l S^l` with `S|x> = |x+1>`, so
//! `H[a, b] = h_{a-b}`. A density matrix is vectorized row-major, `|i><j|` at
//! index `i * n + j`. The fiber at momentum `q` acts on the relative
//! coordinate `d = k - j` of `rho(j, k)`, with Fourier kernel `e^{+iqj}`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laurent::BandedSymbol;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Finitely supported vector on `Z`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVector(BTreeMap<i32, C64>);

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn unit(x: i32) -> Self {
        Self::from_pairs([(x, C64::new(1.0, 0.0))])
    }

    /// Repeated offsets add up; exact zeros are dropped.
    pub fn from_pairs<I: IntoIterator<Item = (i32, C64)>>(pairs: I) -> Self {
        let mut out = Self::new();
        for (x, v) in pairs {
            out.add(x, v);
        }
        out
    }

    pub fn add(&mut self, x: i32, v: C64) {
        let e = self.0.entry(x).or_insert(ZERO);
        *e += v;
        if *e == ZERO {
            self.0.remove(&x);
        }
    }

    pub fn get(&self, x: i32) -> C64 {
        self.0.get(&x).copied().unwrap_or(ZERO)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, C64)> + '_ {
        self.0.iter().map(|(x, v)| (*x, *v))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.values().map(|v| v.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Largest `|x|` in the support.
    pub fn extent(&self) -> usize {
        self.0.keys().map(|x| x.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn min_offset(&self) -> Option<i32> {
        self.0.keys().next().copied()
    }

    pub fn max_offset(&self) -> Option<i32> {
        self.0.keys().next_back().copied()
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self::from_pairs(self.iter().map(|(x, v)| (x, v * s)))
    }

    /// `sum_x conj(self(x)) other(x)`.
    pub fn dot(&self, other: &Self) -> C64 {
        self.iter().map(|(x, v)| v.conj() * other.get(x)).sum()
    }

    /// Length-`n` vector with entries summed modulo `n`.
    pub fn wrapped(&self, n: usize) -> Vec<C64> {
        let mut out = vec![ZERO; n];
        for (x, v) in self.iter() {
            out[x.rem_euclid(n as i32) as usize] += v;
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.iter()
            .chain(other.iter())
            .map(|(x, _)| (self.get(x) - other.get(x)).norm())
            .fold(0.0, f64::max)
    }
}

/// One rank-one jump family `L_k = |phi_k><psi_k|`.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub phi: SparseVector,
    pub psi: SparseVector,
}

impl Channel {
    pub fn new(phi: SparseVector, psi: SparseVector) -> Self {
        Self { phi, psi }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Builtin {
    /// `L_k = |k><k|`.
    Dephasing,
    /// `L_k = |k><k+l|`.
    IncoherentHopping { l: i32 },
    /// `L_k = |k><k+1|` and `L'_k = |k+1><k|`.
    Exclusion,
    /// `phi = e_0 + e^{i delta} e_l`, `psi = e_0 - e^{i delta} e_l`.
    NonNormal { delta: f64, l: i32 },
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::Dephasing => write!(f, "dephasing"),
            Builtin::IncoherentHopping { l } => write!(f, "incoherent_hopping(l={l})"),
            Builtin::Exclusion => write!(f, "exclusion"),
            Builtin::NonNormal { delta, l } => write!(f, "non_normal(delta={delta:?},l={l})"),
        }
    }
}

impl FromStr for Builtin {
    type Err = Error;

    /// Accepts `name` or `name(key=value,...)`; missing parameters default to
    /// `l = 1`, `delta = 0`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(i) => {
                let rest = s[i + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| Error::InvalidModel(format!("unbalanced parentheses in '{s}'")))?;
                (&s[..i], rest)
            }
            None => (s, ""),
        };
        let mut l = 1i32;
        let mut delta = 0.0f64;
        for kv in args.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidModel(format!("expected key=value, got '{kv}'")))?;
            let bad = || Error::InvalidModel(format!("bad value in '{kv}'"));
            match k.trim() {
                "l" => l = v.trim().parse().map_err(|_| bad())?,
                "delta" => delta = v.trim().parse().map_err(|_| bad())?,
                other => return Err(Error::InvalidModel(format!("unknown parameter '{other}'"))),
            }
        }
        match name.trim() {
            "dephasing" => Ok(Builtin::Dephasing),
            "incoherent_hopping" => Ok(Builtin::IncoherentHopping { l }),
            "exclusion" => Ok(Builtin::Exclusion),
            "non_normal" => Ok(Builtin::NonNormal { delta, l }),
            other => Err(Error::InvalidModel(format!("unknown builtin '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Free,
}

impl FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "free" => Ok(Boundary::Free),
            other => Err(Error::InvalidArgument(format!("unknown boundary '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LindbladModel {
    hopping: SparseVector,
    channels: Vec<Channel>,
    g: f64,
    builtin: Option<Builtin>,
}

/// Nearest-neighbour Laplacian without the on-site term, `H = -(S + S*)`.
fn laplacian_hopping() -> SparseVector {
    SparseVector::from_pairs([(-1, C64::new(-1.0, 0.0)), (1, C64::new(-1.0, 0.0))])
}

impl LindbladModel {
    pub fn new(hopping: SparseVector, channels: Vec<Channel>, g: f64) -> Result<Self> {
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::InvalidModel(format!("coupling G must be positive, got {g}")));
        }
        for (l, h) in hopping.iter() {
            if !(h.re.is_finite() && h.im.is_finite()) {
                return Err(Error::InvalidModel("non-finite hopping".into()));
            }
            if (hopping.get(-l) - h.conj()).norm() > 1e-12 {
                return Err(Error::InvalidModel(format!(
                    "Hamiltonian is not self-adjoint: h_{{{}}} != conj(h_{{{l}}})",
                    -l
                )));
            }
        }
        for (i, c) in channels.iter().enumerate() {
            if c.phi.is_zero() || c.psi.is_zero() {
                return Err(Error::InvalidModel(format!("channel {i} has a zero vector")));
            }
            if c.phi.iter().chain(c.psi.iter()).any(|(_, v)| !(v.re.is_finite() && v.im.is_finite())) {
                return Err(Error::InvalidModel(format!("channel {i} has non-finite entries")));
            }
        }
        Ok(Self {
            hopping,
            channels,
            g,
            builtin: None,
        })
    }

    pub fn builtin(kind: Builtin, g: f64) -> Result<Self> {
        let e0 = SparseVector::unit(0);
        let channels = match kind {
            Builtin::Dephasing => vec![Channel::new(e0.clone(), e0)],
            Builtin::IncoherentHopping { l } => vec![Channel::new(e0, SparseVector::unit(l))],
            Builtin::Exclusion => vec![
                Channel::new(e0.clone(), SparseVector::unit(1)),
                Channel::new(SparseVector::unit(1), e0),
            ],
            Builtin::NonNormal { delta, l } => {
                if l == 0 {
                    return Err(Error::InvalidModel("non_normal needs l != 0".into()));
                }
                let p = C64::from_polar(1.0, delta);
                vec![Channel::new(
                    SparseVector::from_pairs([(0, C64::new(1.0, 0.0)), (l, p)]),
                    SparseVector::from_pairs([(0, C64::new(1.0, 0.0)), (l, -p)]),
                )]
            }
        };
        let mut m = Self::new(laplacian_hopping(), channels, g)?;
        m.builtin = Some(kind);
        Ok(m)
    }

    pub fn dephasing(g: f64) -> Result<Self> {
        Self::builtin(Builtin::Dephasing, g)
    }

    pub fn incoherent_hopping(g: f64, l: i32) -> Result<Self> {
        Self::builtin(Builtin::IncoherentHopping { l }, g)
    }

    pub fn exclusion(g: f64) -> Result<Self> {
        Self::builtin(Builtin::Exclusion, g)
    }

    pub fn non_normal(g: f64, delta: f64, l: i32) -> Result<Self> {
        Self::builtin(Builtin::NonNormal { delta, l }, g)
    }

    pub fn hopping(&self) -> &SparseVector {
        &self.hopping
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn builtin_kind(&self) -> Option<Builtin> {
        self.builtin
    }

    /// The same model with a different Hamiltonian; drops the builtin tag.
    pub fn with_hopping(&self, hopping: SparseVector) -> Result<Self> {
        Self::new(hopping, self.channels.clone(), self.g)
    }

    pub fn hopping_range(&self) -> usize {
        self.hopping.extent()
    }

    /// Smallest `r` such that every `phi`, `psi` is supported in `[-r, r]`.
    pub fn lindblad_range(&self) -> usize {
        self.channels
            .iter()
            .map(|c| c.phi.extent().max(c.psi.extent()))
            .max()
            .unwrap_or(0)
    }

    /// Smallest admissible periodic system size.
    pub fn min_periodic_size(&self) -> usize {
        (4 * self.lindblad_range()).max(2 * self.hopping_range()).max(2) + 1
    }

    /// Diagonals of `Q = sum_k L_k* L_k`: `q_l = sum_c |phi_c|^2 sum_m psi_c(m+l) conj(psi_c(m))`.
    pub fn q_diagonals(&self) -> SparseVector {
        let mut q = SparseVector::new();
        for c in &self.channels {
            let w = c.phi.norm_sqr();
            for (m, pm) in c.psi.iter() {
                for (x, px) in c.psi.iter() {
                    q.add(x - m, w * px * pm.conj());
                }
            }
        }
        q
    }

    /// Coefficients `h_l - (iG/2) q_l` of `H_eff = sum_l h_eff,l S^l`.
    pub fn effective_hopping(&self) -> BandedSymbol {
        let q = self.q_diagonals();
        let half = C64::new(0.0, self.g / 2.0);
        BandedSymbol::from_offsets(
            self.hopping
                .iter()
                .chain(q.iter().map(|(l, v)| (l, -half * v))),
        )
    }

    /// Fiber `T(q) + |Gamma_L><Gamma_R|` at momentum `q`.
    pub fn fiber(&self, q: f64) -> Result<FiberOperator> {
        let t_symbol = self.fiber_symbol(q);
        let pairs = self.channel_gammas(q);
        let (gamma_l, gamma_r) = combine_rank_one(&pairs)?;
        Ok(FiberOperator {
            q,
            t_symbol,
            gamma_l,
            gamma_r,
        })
    }

    /// `T(q)` with `a_m = -i h_eff,m e^{iqm} + i conj(h_eff,-m)`.
    pub fn fiber_symbol(&self, q: f64) -> BandedSymbol {
        let h = self.effective_hopping();
        let i = C64::new(0.0, 1.0);
        BandedSymbol::from_offsets(h.iter().flat_map(|(m, hm)| {
            [
                (m, -i * hm * C64::from_polar(1.0, q * m as f64)),
                (-m, i * hm.conj()),
            ]
        }))
    }

    /// Per-channel `(Gamma_L, Gamma_R)` with
    /// `Gamma_L(d) = sqrt(G) sum_r e^{iqr} phi(r) conj(phi(r+d))` and
    /// `conj(Gamma_R(e)) = sqrt(G) sum_s e^{-iqs} conj(psi(s)) psi(s+e)`.
    pub fn channel_gammas(&self, q: f64) -> Vec<(SparseVector, SparseVector)> {
        let sg = self.g.sqrt();
        self.channels
            .iter()
            .map(|c| {
                let mut gl = SparseVector::new();
                for (r, pr) in c.phi.iter() {
                    for (x, px) in c.phi.iter() {
                        gl.add(x - r, sg * C64::from_polar(1.0, q * r as f64) * pr * px.conj());
                    }
                }
                let mut gr = SparseVector::new();
                for (s, ps) in c.psi.iter() {
                    for (x, px) in c.psi.iter() {
                        let bra = sg * C64::from_polar(1.0, -q * s as f64) * ps.conj() * px;
                        gr.add(x - s, bra.conj());
                    }
                }
                (gl, gr)
            })
            .collect()
    }

    /// Cyclic/truncated operator data for an `n`-site system.
    pub fn finite_system(&self, n: usize, bc: Boundary, potential: Option<&[f64]>) -> Result<FiniteSystem> {
        if bc == Boundary::Periodic && n < self.min_periodic_size() {
            return Err(Error::SizeTooSmall {
                n,
                range: self.lindblad_range().max(self.hopping_range()),
                needed: self.min_periodic_size() - 1,
            });
        }
        if n == 0 {
            return Err(Error::SizeTooSmall { n, range: 0, needed: 0 });
        }
        if let Some(v) = potential {
            if v.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "potential has {} entries, system has {n} sites",
                    v.len()
                )));
            }
        }
        let place = |x: i64| -> Option<usize> {
            match bc {
                Boundary::Periodic => Some(x.rem_euclid(n as i64) as usize),
                Boundary::Free => (0..n as i64).contains(&x).then_some(x as usize),
            }
        };
        let mut ham = Array2::<C64>::zeros((n, n));
        for (l, h) in self.hopping.iter() {
            for b in 0..n {
                if let Some(a) = place(b as i64 + l as i64) {
                    ham[[a, b]] += h;
                }
            }
        }
        if let Some(v) = potential {
            for (a, va) in v.iter().enumerate() {
                ham[[a, a]] += *va;
            }
        }
        let mut jumps = Vec::new();
        for c in &self.channels {
            for k in 0..n as i64 {
                let shift = |v: &SparseVector| -> Option<Vec<(usize, C64)>> {
                    let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
                    for (x, val) in v.iter() {
                        *acc.entry(place(k + x as i64)?).or_insert(ZERO) += val;
                    }
                    Some(acc.into_iter().filter(|(_, v)| *v != ZERO).collect())
                };
                if let (Some(phi), Some(psi)) = (shift(&c.phi), shift(&c.psi)) {
                    jumps.push(Jump { phi, psi });
                }
            }
        }
        let mut q = Array2::<C64>::zeros((n, n));
        for jmp in &jumps {
            let w: f64 = jmp.phi.iter().map(|(_, v)| v.norm_sqr()).sum();
            for &(a, pa) in &jmp.psi {
                for &(b, pb) in &jmp.psi {
                    q[[a, b]] += w * pa * pb.conj();
                }
            }
        }
        let k_eff = &ham - &(q.mapv(|v| v * C64::new(0.0, self.g / 2.0)));
        Ok(FiniteSystem {
            n,
            g: self.g,
            ham,
            k_eff,
            jumps,
        })
    }

    /// Dense `n^2 x n^2` generator `-i K (x) 1 + i 1 (x) conj(K) + G sum_k L_k (x) conj(L_k)`,
    /// `K = H - (iG/2) Q`.
    pub fn vectorized_lindbladian(&self, n: usize, bc: Boundary, potential: Option<&[f64]>) -> Result<Array2<C64>> {
        Ok(self.finite_system(n, bc, potential)?.vectorized())
    }
}

/// Sums `Gamma_L Gamma_R*` over channels and refactors the result as one outer product.
fn combine_rank_one(pairs: &[(SparseVector, SparseVector)]) -> Result<(SparseVector, SparseVector)> {
    if pairs.len() == 1 {
        return Ok(pairs[0].clone());
    }
    let mut m: BTreeMap<(i32, i32), C64> = BTreeMap::new();
    for (gl, gr) in pairs {
        for (x, a) in gl.iter() {
            for (y, b) in gr.iter() {
                *m.entry((x, y)).or_insert(ZERO) += a * b.conj();
            }
        }
    }
    let Some((&(r0, c0), &pivot)) = m.iter().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())) else {
        return Ok((SparseVector::new(), SparseVector::new()));
    };
    let scale = pivot.norm();
    if scale <= 1e-300 {
        return Ok((SparseVector::new(), SparseVector::new()));
    }
    let gl = SparseVector::from_pairs(m.iter().filter(|((_, y), _)| *y == c0).map(|((x, _), v)| (*x, *v)));
    let gr = SparseVector::from_pairs(
        m.iter()
            .filter(|((x, _), _)| *x == r0)
            .map(|((_, y), v)| (*y, (*v / pivot).conj())),
    );
    let residual = m
        .iter()
        .map(|((x, y), v)| (v - gl.get(*x) * gr.get(*y).conj()).norm())
        .fold(0.0, f64::max);
    if residual > 1e-12 * scale {
        return Err(Error::NotRankOne(residual / scale));
    }
    Ok((gl, gr))
}

/// Fiber operator `T(q) + |Gamma_L><Gamma_R|` on `l2(Z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberOperator {
    pub q: f64,
    pub t_symbol: BandedSymbol,
    pub gamma_l: SparseVector,
    pub gamma_r: SparseVector,
}

impl FiberOperator {
    /// Dense `n x n` circulant truncation `T_n(q) + F_n(q)` with wraparound.
    pub fn periodic_matrix(&self, n: usize) -> Array2<C64> {
        let mut out = circulant_from_symbol(&self.t_symbol, n);
        let gl = self.gamma_l.wrapped(n);
        let gr = self.gamma_r.wrapped(n);
        for a in 0..n {
            for b in 0..n {
                out[[a, b]] += gl[a] * gr[b].conj();
            }
        }
        out
    }
}

/// `n x n` matrix with `M[d, d + m mod n] += a_m`.
pub fn circulant_from_symbol(symbol: &BandedSymbol, n: usize) -> Array2<C64> {
    let mut out = Array2::<C64>::zeros((n, n));
    for (m, a) in symbol.iter() {
        for d in 0..n {
            out[[d, (d as i64 + m as i64).rem_euclid(n as i64) as usize]] += a;
        }
    }
    out
}

#[derive(Clone, Debug)]
struct Jump {
    phi: Vec<(usize, C64)>,
    psi: Vec<(usize, C64)>,
}

/// A finite-volume Lindbladian in operator form.
#[derive(Clone, Debug)]
pub struct FiniteSystem {
    n: usize,
    g: f64,
    ham: Array2<C64>,
    k_eff: Array2<C64>,
    jumps: Vec<Jump>,
}

impl FiniteSystem {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hamiltonian(&self) -> &Array2<C64> {
        &self.ham
    }

    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }

    /// `L(rho) = -i K rho + i rho K* + G sum_k L_k rho L_k*`.
    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let i = C64::new(0.0, 1.0);
        let kr = self.k_eff.dot(rho);
        let rk = rho.dot(&self.k_eff.t().mapv(|v| v.conj()));
        let mut out = (kr - rk).mapv(|v| -i * v);
        for jmp in &self.jumps {
            let mut expect = ZERO;
            for &(u, pu) in &jmp.psi {
                for &(v, pv) in &jmp.psi {
                    expect += pu.conj() * rho[[u, v]] * pv;
                }
            }
            let w = self.g * expect;
            for &(a, fa) in &jmp.phi {
                for &(b, fb) in &jmp.phi {
                    out[[a, b]] += w * fa * fb.conj();
                }
            }
        }
        out
    }

    pub fn vectorized(&self) -> Array2<C64> {
        let n = self.n;
        let i = C64::new(0.0, 1.0);
        let mut l = Array2::<C64>::zeros((n * n, n * n));
        for a in 0..n {
            for b in 0..n {
                let k = self.k_eff[[a, b]];
                if k == ZERO {
                    continue;
                }
                for j in 0..n {
                    // -i K (x) 1 and +i 1 (x) conj(K)
                    l[[a * n + j, b * n + j]] += -i * k;
                    l[[j * n + a, j * n + b]] += i * k.conj();
                }
            }
        }
        for jmp in &self.jumps {
            for &(a, fa) in &jmp.phi {
                for &(b, pb) in &jmp.psi {
                    let lab = fa * pb.conj();
                    for &(c, fc) in &jmp.phi {
                        for &(d, pd) in &jmp.psi {
                            let lcd = fc * pd.conj();
                            l[[a * n + c, b * n + d]] += self.g * lab * lcd.conj();
                        }
                    }
                }
            }
        }
        l
    }
}

#[derive(Serialize, Deserialize)]
struct Entry {
    offset: i32,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HamiltonianSpec {
    hopping: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSpec {
    phi: Vec<Entry>,
    psi: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LindbladSpec {
    phi: Vec<Entry>,
    psi: Vec<Entry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    channels: Vec<ChannelSpec>,
}

/// On-disk model description. `lindblad.phi/psi` is the first channel and
/// `lindblad.channels` lists any further ones.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hamiltonian: Option<HamiltonianSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lindblad: Option<LindbladSpec>,
    #[serde(rename = "G")]
    g: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    builtin: Option<String>,
}

fn to_entries(v: &SparseVector) -> Vec<Entry> {
    v.iter()
        .map(|(offset, c)| Entry {
            offset,
            re: c.re,
            im: c.im,
        })
        .collect()
}

fn from_entries(v: &[Entry]) -> SparseVector {
    SparseVector::from_pairs(v.iter().map(|e| (e.offset, C64::new(e.re, e.im))))
}

impl LindbladModel {
    pub fn to_json_value(&self) -> serde_json::Value {
        let mut rest = self.channels.iter().skip(1);
        let first = &self.channels.first();
        let file = ModelFile {
            hamiltonian: Some(HamiltonianSpec {
                hopping: to_entries(&self.hopping),
            }),
            lindblad: first.map(|c| LindbladSpec {
                phi: to_entries(&c.phi),
                psi: to_entries(&c.psi),
                channels: rest
                    .by_ref()
                    .map(|c| ChannelSpec {
                        phi: to_entries(&c.phi),
                        psi: to_entries(&c.psi),
                    })
                    .collect(),
            }),
            g: self.g,
            builtin: self.builtin.map(|b| b.to_string()),
        };
        serde_json::to_value(file).expect("model serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidModel(format!("schema error: {e}")))?;
        let explicit = match (&file.hamiltonian, &file.lindblad) {
            (Some(h), Some(l)) => {
                let mut channels = vec![Channel::new(from_entries(&l.phi), from_entries(&l.psi))];
                channels.extend(
                    l.channels
                        .iter()
                        .map(|c| Channel::new(from_entries(&c.phi), from_entries(&c.psi))),
                );
                Some(Self::new(from_entries(&h.hopping), channels, file.g)?)
            }
            (None, None) => None,
            _ => {
                return Err(Error::InvalidModel(
                    "hamiltonian and lindblad must be given together".into(),
                ))
            }
        };
        match (&file.builtin, explicit) {
            (Some(tag), explicit) => {
                let m = Self::builtin(tag.parse()?, file.g)?;
                if let Some(e) = explicit {
                    let same = e.hopping.max_abs_diff(&m.hopping) <= 1e-12
                        && e.channels.len() == m.channels.len()
                        && e.channels.iter().zip(&m.channels).all(|(a, b)| {
                            a.phi.max_abs_diff(&b.phi) <= 1e-12 && a.psi.max_abs_diff(&b.psi) <= 1e-12
                        });
                    if !same {
                        return Err(Error::InvalidModel(format!(
                            "explicit data disagrees with builtin '{tag}'"
                        )));
                    }
                }
                Ok(m)
            }
            (None, Some(e)) => Ok(e),
            (None, None) => Err(Error::InvalidModel(
                "model needs either a builtin tag or hamiltonian and lindblad data".into(),
            )),
        }
    }
}
