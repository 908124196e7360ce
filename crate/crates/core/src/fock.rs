//! Truncated bosonic Fock space: occupation-number bases, sparse operators,
//! second-quantized Hamiltonians, coherent states and the lower/upper
//! symbol calculus.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{fft_in_place, ComplexField, Direction, FieldError, C64};
use crate::linalg::{hermitian_eigen, lobpcg, operator_norm, EigenError, LobpcgOptions};
use crate::quad::gauss_legendre_on;

#[derive(Debug, Error)]
pub enum FockError {
    #[error("invalid mode index {index} (basis has {modes} modes)")]
    InvalidMode { index: usize, modes: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("two-body tensor is not hermitian (deviation {0:.3e})")]
    NonHermitian(f64),
    #[error("sector N = {0} lies outside the truncation")]
    EmptySector(usize),
    #[error("coherent-state tail bound {0:.3e} exceeds 1e-8; raise the truncation")]
    TailBound(f64),
    #[error("symbol calculus needs degree ≤ 4, got {0}")]
    DegreeTooHigh(usize),
    #[error("cannot parse operator: {0}")]
    Parse(String),
    #[error("spectrum has {got} entries, need {need}")]
    MissingSpectrum { need: usize, got: usize },
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Default truncation for `j` modes (keeps dimensions near 10⁴ or below).
pub fn default_n_max(j: usize) -> usize {
    match j {
        0..=2 => 12,
        3 => 8,
        _ => 6,
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Occupation vectors `(n₁,…,n_J)` with `Σnⱼ ≤ N_max`, ordered by total
/// number and then lexicographically, so every sector is a contiguous range.
#[derive(Clone, Debug)]
pub struct FockBasis {
    modes: usize,
    n_max: usize,
    states: Vec<Vec<u16>>,
    index: HashMap<Vec<u16>, usize>,
    sector_start: Vec<usize>,
}

impl FockBasis {
    pub fn new(modes: usize, n_max: usize) -> Result<Self, FockError> {
        if modes == 0 {
            return Err(FockError::Invalid("need at least one mode".into()));
        }
        let dim = binomial(n_max + modes, modes);
        if dim > 2_000_000 {
            return Err(FockError::Invalid(format!("basis dimension {dim} too large")));
        }
        let mut states = Vec::with_capacity(dim);
        let mut sector_start = Vec::with_capacity(n_max + 2);
        for total in 0..=n_max {
            sector_start.push(states.len());
            let mut sector = Vec::new();
            compositions(modes, total, &mut vec![0; modes], 0, &mut sector);
            sector.sort_by(|a, b| b.cmp(a));
            states.extend(sector);
        }
        sector_start.push(states.len());
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(Self { modes, n_max, states, index, sector_start })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> &[u16] {
        &self.states[i]
    }

    pub fn index_of(&self, occ: &[u16]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    pub fn total(&self, i: usize) -> usize {
        self.states[i].iter().map(|&n| n as usize).sum()
    }

    /// Index range of the `N`-particle sector.
    pub fn sector(&self, n: usize) -> Result<std::ops::Range<usize>, FockError> {
        if n > self.n_max {
            return Err(FockError::EmptySector(n));
        }
        Ok(self.sector_start[n]..self.sector_start[n + 1])
    }
}

fn compositions(modes: usize, left: usize, cur: &mut Vec<u16>, pos: usize, out: &mut Vec<Vec<u16>>) {
    if pos == modes - 1 {
        cur[pos] = left as u16;
        out.push(cur.clone());
        return;
    }
    for k in 0..=left {
        cur[pos] = k as u16;
        compositions(modes, left - k, cur, pos + 1, out);
    }
    cur[pos] = 0;
}

/// Sparse operator on a [`FockBasis`] (compressed rows).
#[derive(Clone, Debug)]
pub struct FockOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    /// Basis states some part of whose image left the truncation.
    pub leakage: usize,
    pub hermitian: bool,
}

impl FockOperator {
    fn from_rows(rows: Vec<Vec<(usize, C64)>>, leakage: usize) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, C64)> = Vec::with_capacity(row.len());
            for (c, v) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            for (c, v) in merged {
                if v != C64::new(0.0, 0.0) {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        let mut op = Self { dim, row_ptr, cols, vals, leakage, hermitian: false };
        op.hermitian = op.hermiticity_defect() <= 1e-12;
        op
    }

    /// Builds the operator from its action on basis states: `image(i)`
    /// returns `(target, amplitude)` pairs, with `None` for targets outside
    /// the truncation.
    fn from_images<F>(dim: usize, image: F) -> Self
    where
        F: Fn(usize) -> Vec<(Option<usize>, C64)> + Sync + Send,
    {
        let cols: Vec<Vec<(Option<usize>, C64)>> = (0..dim).into_par_iter().map(image).collect();
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        let mut leakage = 0;
        for (j, col) in cols.into_iter().enumerate() {
            let mut leaked = false;
            for (t, v) in col {
                match t {
                    Some(i) => rows[i].push((j, v)),
                    None => leaked = true,
                }
            }
            leakage += leaked as usize;
        }
        Self::from_rows(rows, leakage)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_rows((0..dim).map(|i| vec![(i, C64::new(1.0, 0.0))]).collect(), 0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        (0..self.dim)
            .into_par_iter()
            .map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| self.vals[k] * v[self.cols[k]]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k])] = self.vals[k];
            }
        }
        m
    }

    /// Dense block on the index set `idx × idx`.
    pub fn block(&self, idx: &[usize]) -> DMatrix<C64> {
        let pos: HashMap<usize, usize> = idx.iter().enumerate().map(|(a, &b)| (b, a)).collect();
        let mut m = DMatrix::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if let Some(&b) = pos.get(&self.cols[k]) {
                    m[(a, b)] = self.vals[k];
                }
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); self.dim];
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                rows[self.cols[k]].push((i, self.vals[k].conj()));
            }
        }
        Self::from_rows(rows, self.leakage)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let rows = (0..self.dim)
            .into_par_iter()
            .map(|i| {
                let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    let j = self.cols[k];
                    for l in other.row_ptr[j]..other.row_ptr[j + 1] {
                        *acc.entry(other.cols[l]).or_insert(C64::new(0.0, 0.0)) += self.vals[k] * other.vals[l];
                    }
                }
                acc.into_iter().collect()
            })
            .collect();
        Self::from_rows(rows, self.leakage.max(other.leakage))
    }

    pub fn add_scaled(&self, other: &Self, c: C64) -> Self {
        let rows = (0..self.dim)
            .map(|i| {
                let mut row: Vec<(usize, C64)> =
                    (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| (self.cols[k], self.vals[k])).collect();
                row.extend((other.row_ptr[i]..other.row_ptr[i + 1]).map(|k| (other.cols[k], c * other.vals[k])));
                row
            })
            .collect();
        Self::from_rows(rows, self.leakage.max(other.leakage))
    }

    /// Largest entry of `A − A†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                worst = worst.max((self.vals[k] - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// A normal-ordered monomial `a†_{c₁}…a†_{c_p} a_{d₁}…a_{d_q}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Monomial {
    pub create: Vec<usize>,
    pub annihilate: Vec<usize>,
}

impl Monomial {
    pub fn degree(&self) -> usize {
        self.create.len() + self.annihilate.len()
    }

    fn max_mode(&self) -> Option<usize> {
        self.create.iter().chain(&self.annihilate).copied().max()
    }

    /// Image of an occupation vector; `None` amplitude vanishes.
    fn act(&self, occ: &[u16]) -> Option<(Vec<u16>, f64)> {
        let mut s = occ.to_vec();
        let mut amp = 1.0;
        for &d in self.annihilate.iter().rev() {
            if s[d] == 0 {
                return None;
            }
            amp *= (s[d] as f64).sqrt();
            s[d] -= 1;
        }
        for &c in self.create.iter().rev() {
            s[c] += 1;
            amp *= (s[c] as f64).sqrt();
        }
        Some((s, amp))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .create
            .iter()
            .map(|c| format!("adag{c}"))
            .chain(self.annihilate.iter().map(|d| format!("a{d}")))
            .collect();
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join(" "))
        }
    }
}

/// Linear combination of normal-ordered monomials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorPolynomial {
    pub terms: Vec<(C64, Monomial)>,
}

impl OperatorPolynomial {
    pub fn monomial(create: Vec<usize>, annihilate: Vec<usize>) -> Self {
        Self { terms: vec![(C64::new(1.0, 0.0), Monomial { create, annihilate })] }
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|t| t.1.degree()).max().unwrap_or(0)
    }

    pub fn modes(&self) -> usize {
        self.terms.iter().filter_map(|t| t.1.max_mode()).max().map_or(1, |m| m + 1)
    }

    /// Matrix on the basis; images leaving the truncation are dropped and
    /// counted in `leakage`.
    pub fn to_operator(&self, basis: &FockBasis) -> Result<FockOperator, FockError> {
        if let Some(m) = self.terms.iter().filter_map(|t| t.1.max_mode()).max() {
            if m >= basis.modes() {
                return Err(FockError::InvalidMode { index: m, modes: basis.modes() });
            }
        }
        Ok(FockOperator::from_images(basis.dim(), |j| {
            let occ = basis.state(j);
            self.terms
                .iter()
                .filter_map(|(c, m)| m.act(occ).map(|(s, amp)| (basis.index_of(&s), c * amp)))
                .collect()
        }))
    }

    /// Lower symbol `⟨z|op|z⟩`: substitute `a† → z̄`, `a → z`.
    pub fn lower_symbol(&self, z: &[C64]) -> C64 {
        self.terms
            .iter()
            .map(|(c, m)| {
                let cr: C64 = m.create.iter().map(|&k| z[k].conj()).product();
                let an: C64 = m.annihilate.iter().map(|&k| z[k]).product();
                c * cr * an
            })
            .sum()
    }

    /// The lower symbol as a polynomial in `z`, `z̄`.
    pub fn lower_polynomial(&self) -> SymbolPolynomial {
        let modes = self.modes();
        let mut out = SymbolPolynomial::zero(modes);
        for (c, m) in &self.terms {
            let mut pz = vec![0u32; modes];
            let mut pzb = vec![0u32; modes];
            for &k in &m.annihilate {
                pz[k] += 1;
            }
            for &k in &m.create {
                pzb[k] += 1;
            }
            out.add_term(pz, pzb, *c);
        }
        out
    }

    /// Upper symbol `U = e^{−Σ∂ⱼ∂̄ⱼ} u` of the lower symbol `u`.
    pub fn upper_polynomial(&self) -> Result<SymbolPolynomial, FockError> {
        let d = self.degree();
        if d > 4 {
            return Err(FockError::DegreeTooHigh(d));
        }
        Ok(self.lower_polynomial().heat_flow(-1.0))
    }

    pub fn upper_symbol(&self, z: &[C64]) -> Result<C64, FockError> {
        Ok(self.upper_polynomial()?.eval(z))
    }
}

/// Terms separated by `+`; a term is an optional real coefficient
/// followed by `*`, then space-separated factors `adag[k]` / `a[k]`
/// (mode `k`, default 0), creators first. `1` is the identity.
impl FromStr for OperatorPolynomial {
    type Err = FockError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut terms = Vec::new();
        for raw in s.split('+') {
            let raw = raw.trim();
            if raw.is_empty() {
                return Err(FockError::Parse(format!("empty term in {s:?}")));
            }
            let (coef, body) = match raw.split_once('*') {
                Some((c, b)) => {
                    let c: f64 = c.trim().parse().map_err(|_| FockError::Parse(format!("bad coefficient {c:?}")))?;
                    (c, b.trim())
                }
                None => (1.0, raw),
            };
            let mut create = Vec::new();
            let mut annihilate = Vec::new();
            for tok in body.split_whitespace() {
                if tok == "1" || tok == "id" {
                    continue;
                }
                let (is_create, rest) = if let Some(r) = tok.strip_prefix("adag") {
                    (true, r)
                } else if let Some(r) = tok.strip_prefix('a') {
                    (false, r)
                } else {
                    return Err(FockError::Parse(format!("unknown factor {tok:?}")));
                };
                let rest = rest.trim_start_matches('_');
                let mode = if rest.is_empty() {
                    0
                } else {
                    rest.parse().map_err(|_| FockError::Parse(format!("bad mode index in {tok:?}")))?
                };
                if is_create {
                    if !annihilate.is_empty() {
                        return Err(FockError::Parse(format!("{raw:?} is not normal ordered")));
                    }
                    create.push(mode);
                } else {
                    annihilate.push(mode);
                }
            }
            terms.push((C64::new(coef, 0.0), Monomial { create, annihilate }));
        }
        Ok(Self { terms })
    }
}

/// Polynomial in `z_j`, `z̄_j`: map from `(powers of z, powers of z̄)` to
/// coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolPolynomial {
    modes: usize,
    pub terms: BTreeMap<(Vec<u32>, Vec<u32>), C64>,
}

impl SymbolPolynomial {
    pub fn zero(modes: usize) -> Self {
        Self { modes, terms: BTreeMap::new() }
    }

    pub fn add_term(&mut self, pz: Vec<u32>, pzb: Vec<u32>, c: C64) {
        let e = self.terms.entry((pz, pzb)).or_insert(C64::new(0.0, 0.0));
        *e += c;
        self.terms.retain(|_, v| *v != C64::new(0.0, 0.0));
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        self.terms
            .iter()
            .map(|((pz, pzb), c)| {
                let mut t = *c;
                for k in 0..self.modes {
                    t *= z[k].powu(pz[k]) * z[k].conj().powu(pzb[k]);
                }
                t
            })
            .sum()
    }

    /// `Σⱼ ∂_{zⱼ}∂_{z̄ⱼ}`.
    pub fn laplacian(&self) -> Self {
        let mut out = Self::zero(self.modes);
        for ((pz, pzb), c) in &self.terms {
            for k in 0..self.modes {
                if pz[k] > 0 && pzb[k] > 0 {
                    let mut a = pz.clone();
                    let mut b = pzb.clone();
                    let f = (a[k] * b[k]) as f64;
                    a[k] -= 1;
                    b[k] -= 1;
                    out.add_term(a, b, c * f);
                }
            }
        }
        out
    }

    /// `e^{t Σ∂∂̄}` applied exactly (the series terminates on polynomials).
    pub fn heat_flow(&self, t: f64) -> Self {
        let mut out = self.clone();
        let mut term = self.clone();
        let mut k = 1.0;
        loop {
            term = term.laplacian();
            if term.terms.is_empty() {
                break;
            }
            let scale = t.powi(k as i32) / (1..=k as u64).product::<u64>() as f64;
            for ((a, b), c) in &term.terms {
                out.add_term(a.clone(), b.clone(), c * scale);
            }
            k += 1.0;
        }
        out
    }
}

/// One-particle energies, two-body tensor and number penalty for
/// `H = Σ eⱼ a†ⱼaⱼ + Σ W_{ijkl} a†ᵢa†ⱼa_k a_l + (C/M)(N̂ − M)²`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeBasis {
    pub e: Vec<f64>,
    /// Row-major `J⁴` tensor, index `((i·J + j)·J + k)·J + l`.
    pub w: Vec<C64>,
    pub c: f64,
    pub m: f64,
}

impl ModeBasis {
    pub fn new(e: Vec<f64>, w: Vec<C64>, c: f64, m: f64) -> Result<Self, FockError> {
        let j = e.len();
        if j == 0 || w.len() != j.pow(4) {
            return Err(FockError::Invalid(format!("need J ≥ 1 energies and J⁴ = {} tensor entries", j.pow(4))));
        }
        if e.iter().any(|x| !x.is_finite() || *x < 0.0) || e.windows(2).any(|p| p[1] < p[0]) {
            return Err(FockError::Invalid("energies must be finite, nonnegative and nondecreasing".into()));
        }
        if !(c >= 0.0 && c.is_finite()) || !(m > 0.0 && m.is_finite()) {
            return Err(FockError::Invalid("penalty weight must be ≥ 0 and target M > 0".into()));
        }
        let mb = Self { e, w, c, m };
        let defect = mb.symmetry_defect();
        if defect > 1e-12 * (1.0 + mb.w.iter().map(|v| v.norm()).fold(0.0, f64::max)) {
            return Err(FockError::NonHermitian(defect));
        }
        Ok(mb)
    }

    pub fn modes(&self) -> usize {
        self.e.len()
    }

    pub fn w_at(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        let n = self.modes();
        self.w[((i * n + j) * n + k) * n + l]
    }

    /// Deviation from `W_{ijkl} = W̄_{klij} = W_{jilk}`.
    fn symmetry_defect(&self) -> f64 {
        let n = self.modes();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let w = self.w_at(i, j, k, l);
                        worst = worst.max((w - self.w_at(k, l, i, j).conj()).norm());
                        worst = worst.max((w - self.w_at(j, i, l, k)).norm());
                    }
                }
            }
        }
        worst
    }

    /// The number-conserving part as a normal-ordered polynomial.
    pub fn polynomial(&self) -> OperatorPolynomial {
        let n = self.modes();
        let mut terms = Vec::new();
        for (j, &e) in self.e.iter().enumerate() {
            if e != 0.0 {
                terms.push((C64::new(e, 0.0), Monomial { create: vec![j], annihilate: vec![j] }));
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let w = self.w_at(i, j, k, l);
                        if w != C64::new(0.0, 0.0) {
                            terms.push((w, Monomial { create: vec![i, j], annihilate: vec![k, l] }));
                        }
                    }
                }
            }
        }
        OperatorPolynomial { terms }
    }
}

/// Ladder operators `(a_j, a†_j)`.
pub fn ladder_operators(basis: &FockBasis, j: usize) -> Result<(FockOperator, FockOperator), FockError> {
    if j >= basis.modes() {
        return Err(FockError::InvalidMode { index: j, modes: basis.modes() });
    }
    let a = OperatorPolynomial::monomial(vec![], vec![j]).to_operator(basis)?;
    let adag = OperatorPolynomial::monomial(vec![j], vec![]).to_operator(basis)?;
    Ok((a, adag))
}

pub fn number_operator(basis: &FockBasis) -> FockOperator {
    let rows = (0..basis.dim()).map(|i| vec![(i, C64::new(basis.total(i) as f64, 0.0))]).collect();
    FockOperator::from_rows(rows, 0)
}

/// `Ĥ` with or without the number penalty.
pub fn build_hamiltonian(mb: &ModeBasis, basis: &FockBasis, include_penalty: bool) -> Result<FockOperator, FockError> {
    if mb.modes() != basis.modes() {
        return Err(FockError::Invalid(format!("{} energies for a {}-mode basis", mb.modes(), basis.modes())));
    }
    let h = mb.polynomial().to_operator(basis)?;
    if !include_penalty || mb.c == 0.0 {
        return Ok(h);
    }
    let rows = (0..basis.dim())
        .map(|i| {
            let d = basis.total(i) as f64 - mb.m;
            vec![(i, C64::new(mb.c / mb.m * d * d, 0.0))]
        })
        .collect();
    Ok(h.add_scaled(&FockOperator::from_rows(rows, 0), C64::new(1.0, 0.0)))
}

/// Lowest eigenpair in the `N`-particle sector.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    /// Coefficients on the full basis (zero outside the sector).
    pub vector: Vec<C64>,
    pub residual: f64,
}

const DENSE_LIMIT: usize = 1500;

pub fn ground_state(h: &FockOperator, basis: &FockBasis, n: usize) -> Result<GroundState, FockError> {
    let range = basis.sector(n)?;
    let idx: Vec<usize> = range.clone().collect();
    let dim = idx.len();
    let sector_vec: Vec<C64> = if dim <= DENSE_LIMIT {
        let block = h.block(&idx);
        let block = (&block + block.adjoint()) * C64::new(0.5, 0.0);
        let (_, vecs) = hermitian_eigen(block);
        vecs.column(0).iter().copied().collect()
    } else {
        let apply = |v: &[C64]| {
            let mut full = vec![C64::new(0.0, 0.0); h.dim()];
            full[range.clone()].copy_from_slice(v);
            h.apply(&full)[range.clone()].to_vec()
        };
        let init: Vec<Vec<C64>> = (0..3)
            .map(|k| (0..dim).map(|i| C64::new(1.0 / (1.0 + ((i * (k + 1)) % 7) as f64), 0.0)).collect())
            .collect();
        let opts = LobpcgOptions { wanted: 1, tol: 1e-10, max_iter: 5000 };
        let pairs = lobpcg(apply, None::<fn(&[C64]) -> Vec<C64>>, init, &opts)?;
        pairs.vectors[0].clone()
    };
    let mut vector = vec![C64::new(0.0, 0.0); basis.dim()];
    vector[range].copy_from_slice(&sector_vec);
    let nrm = vector.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    vector.iter_mut().for_each(|x| *x /= nrm);
    let hv = h.apply(&vector);
    let energy = vector.iter().zip(&hv).map(|(a, b)| a.conj() * b).sum::<C64>().re;
    let residual = hv.iter().zip(&vector).map(|(a, b)| (a - b * energy).norm_sqr()).sum::<f64>().sqrt();
    Ok(GroundState { energy, vector, residual })
}

/// Hartree energy `min_{‖c‖=1} [Σ eⱼ|cⱼ|² + g Σ W_{ijkl} c̄ᵢc̄ⱼc_k c_l]`, by
/// projected gradient descent on the unit sphere from several starts.
pub fn hartree_minimum(mb: &ModeBasis, g: f64) -> (f64, Vec<C64>) {
    let n = mb.modes();
    let energy = |c: &[C64]| -> f64 {
        let mut e: f64 = mb.e.iter().zip(c).map(|(e, x)| e * x.norm_sqr()).sum();
        let mut q = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        q += mb.w_at(i, j, k, l) * c[i].conj() * c[j].conj() * c[k] * c[l];
                    }
                }
            }
        }
        e += g * q.re;
        e
    };
    // ∂/∂c̄ᵢ of the energy.
    let grad = |c: &[C64]| -> Vec<C64> {
        (0..n)
            .map(|i| {
                let mut v = c[i] * mb.e[i];
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            v += 2.0 * g * mb.w_at(i, j, k, l) * c[j].conj() * c[k] * c[l];
                        }
                    }
                }
                v
            })
            .collect()
    };
    let normalize = |c: &mut Vec<C64>| {
        let s = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        c.iter_mut().for_each(|x| *x /= s);
    };
    let mut best = (f64::INFINITY, vec![C64::new(0.0, 0.0); n]);
    let starts = 8 * n;
    for s in 0..starts {
        let mut c: Vec<C64> = (0..n)
            .map(|i| {
                let ph = 2.0 * PI * (((s + 1) * (i + 3)) as f64 * 0.618_033_988_7).fract();
                let amp = 1.0 + ((s * 7 + i * 3) % 5) as f64;
                C64::from_polar(amp, ph)
            })
            .collect();
        if s == 0 {
            c = (0..n).map(|i| C64::new((i == 0) as u8 as f64, 0.0)).collect();
        }
        normalize(&mut c);
        let mut e = energy(&c);
        let mut step = 0.1;
        for _ in 0..20000 {
            let gr = grad(&c);
            let lam: C64 = c.iter().zip(&gr).map(|(a, b)| a.conj() * b).sum();
            let tang: Vec<C64> = gr.iter().zip(&c).map(|(g, x)| g - x * lam).collect();
            let tn = tang.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if tn < 1e-13 {
                break;
            }
            loop {
                let mut trial: Vec<C64> = c.iter().zip(&tang).map(|(x, t)| x - t * step).collect();
                normalize(&mut trial);
                let et = energy(&trial);
                if et < e {
                    c = trial;
                    e = et;
                    step *= 1.5;
                    break;
                }
                step *= 0.5;
                if step < 1e-16 {
                    break;
                }
            }
            if step < 1e-16 {
                break;
            }
        }
        if e < best.0 {
            best = (e, c);
        }
    }
    best
}

/// Poisson tail `e^{−λ} Σ_{n>N} λⁿ/n!`.
pub fn poisson_tail(lambda: f64, n_max: usize) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let mut term = (-lambda).exp();
    for n in 1..=n_max + 1 {
        term *= lambda / n as f64;
    }
    let mut sum = 0.0;
    let mut n = n_max + 1;
    while term > 1e-300 && n < n_max + 10_000 {
        sum += term;
        n += 1;
        term *= lambda / n as f64;
        if (n as f64) > lambda && term < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// Truncated product coherent state `|z₁⊗…⊗z_J⟩`.
#[derive(Clone, Debug)]
pub struct CoherentVector {
    pub z: Vec<C64>,
    pub state: Vec<C64>,
    /// Weight of the untruncated state beyond `N_max`.
    pub truncation_error: f64,
}

pub fn coherent_state(z: &[C64], basis: &FockBasis) -> Result<CoherentVector, FockError> {
    if z.len() != basis.modes() {
        return Err(FockError::Invalid(format!("{} amplitudes for {} modes", z.len(), basis.modes())));
    }
    let lambda: f64 = z.iter().map(|x| x.norm_sqr()).sum();
    let tail = poisson_tail(lambda, basis.n_max());
    if tail > 1e-8 {
        return Err(FockError::TailBound(tail));
    }
    let pre = (-0.5 * lambda).exp();
    let state = (0..basis.dim())
        .map(|i| {
            let occ = basis.state(i);
            let mut c = C64::new(pre, 0.0);
            for (zj, &nj) in z.iter().zip(occ) {
                c *= zj.powu(nj as u32) / factorial(nj as usize).sqrt();
            }
            c
        })
        .collect();
    Ok(CoherentVector { z: z.to_vec(), state, truncation_error: tail })
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `Φ_z = Σ zⱼ φⱼ`.
pub fn coherent_field(z: &[C64], modes: &[ComplexField]) -> Result<ComplexField, FockError> {
    let first = modes.first().ok_or_else(|| FockError::Invalid("no modes".into()))?;
    let mut out = ComplexField::zeros(first.grid());
    for (zj, phi) in z.iter().zip(modes) {
        out.axpy(*zj, phi)?;
    }
    Ok(out)
}

/// Polar quadrature on the disk `|z| ≤ Z` with measure `π⁻¹ dx dy`:
/// Gauss–Legendre in the radius, uniform in the angle.
fn disk_rule(radius: f64, nodes: usize) -> Vec<(C64, f64)> {
    let (r, w) = gauss_legendre_on(0.0, radius, nodes);
    let angles = nodes.max(8);
    let mut out = Vec::with_capacity(nodes * angles);
    for (ri, wi) in r.iter().zip(&w) {
        for k in 0..angles {
            let th = 2.0 * PI * k as f64 / angles as f64;
            out.push((C64::from_polar(*ri, th), wi * ri * 2.0 / angles as f64));
        }
    }
    out
}

/// Single-mode moments `∫ dz z^α z̄^β ⟨m|Π(z)|n⟩` for all `m, n ≤ cut`.
fn mode_moments(rule: &[(C64, f64)], alpha: u32, beta: u32, cut: usize) -> DMatrix<C64> {
    DMatrix::from_fn(cut + 1, cut + 1, |m, n| {
        let norm = (factorial(m) * factorial(n)).sqrt();
        rule.iter()
            .map(|(z, w)| {
                let g = (-z.norm_sqr()).exp();
                z.powu(alpha + m as u32) * z.conj().powu(beta + n as u32) * (g * w / norm)
            })
            .sum()
    })
}

/// Result of reconstructing an operator from its upper symbol.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub identity_error: f64,
    pub reconstruction_error: f64,
    pub states: usize,
}

/// Integrates `Π(z)` and `U(z)Π(z)` over `|zⱼ| ≤ Z` (tensor product over
/// modes, `J ≤ 2`) and compares with the identity and with `op` on the
/// states with at most `n_cut` particles.
pub fn verify_resolution(
    op: &OperatorPolynomial,
    modes: usize,
    radius: f64,
    nodes: usize,
    n_cut: usize,
) -> Result<ResolutionReport, FockError> {
    if modes == 0 || modes > 2 {
        return Err(FockError::Invalid("resolution checks support one or two modes".into()));
    }
    if op.modes() > modes {
        return Err(FockError::InvalidMode { index: op.modes() - 1, modes });
    }
    let upper = op.upper_polynomial()?;
    let rule = disk_rule(radius, nodes);
    let basis = FockBasis::new(modes, n_cut + op.degree())?;
    let idx: Vec<usize> = (0..basis.dim()).filter(|&i| basis.total(i) <= n_cut).collect();
    let mut cache: HashMap<(u32, u32), DMatrix<C64>> = HashMap::new();
    let mut moments = |a: u32, b: u32| cache.entry((a, b)).or_insert_with(|| mode_moments(&rule, a, b, n_cut)).clone();
    let k = idx.len();
    let mut ident = DMatrix::<C64>::zeros(k, k);
    let mut recon = DMatrix::<C64>::zeros(k, k);
    let m0 = moments(0, 0);
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            let (si, sj) = (basis.state(i), basis.state(j));
            ident[(r, c)] = (0..modes).map(|q| m0[(si[q] as usize, sj[q] as usize)]).product();
        }
    }
    for ((pz, pzb), coef) in &upper.terms {
        let mats: Vec<DMatrix<C64>> = (0..modes)
            .map(|q| moments(pz.get(q).copied().unwrap_or(0), pzb.get(q).copied().unwrap_or(0)))
            .collect();
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                let (si, sj) = (basis.state(i), basis.state(j));
                let v: C64 = (0..modes).map(|q| mats[q][(si[q] as usize, sj[q] as usize)]).product();
                recon[(r, c)] += coef * v;
            }
        }
    }
    let exact = op.to_operator(&basis)?.block(&idx);
    let identity_error = operator_norm(&(ident - DMatrix::<C64>::identity(k, k)));
    let reconstruction_error = operator_norm(&(recon - exact));
    Ok(ResolutionReport { identity_error, reconstruction_error, states: k })
}

/// Inputs of the error constants.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorInputs {
    /// `‖W‖₁`
    pub w1: f64,
    /// `‖W‖∞`
    pub w_inf: f64,
    pub delta: f64,
    pub eta: f64,
    pub j: usize,
    pub m: f64,
    /// The energy bound `E`.
    pub e_bound: f64,
    pub c: f64,
    /// One-particle spectrum, at least `J` entries.
    pub spectrum: Vec<f64>,
}

impl ErrorInputs {
    /// `‖W‖₁ = 4πa/N`, `‖W‖∞ = 6a/(R³N)` with `R = N^{−1/2}` and `M = N`.
    pub fn gp_scaling(a: f64, n: f64, delta: f64, eta: f64, e_bound: f64, c: f64, spectrum: Vec<f64>) -> Self {
        let r = n.powf(-0.5);
        Self {
            w1: 4.0 * PI * a / n,
            w_inf: 6.0 * a / (r.powi(3) * n),
            delta,
            eta,
            j: spectrum.len(),
            m: n,
            e_bound,
            c,
            spectrum,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorConstants {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

pub fn error_constants(inp: &ErrorInputs) -> Result<ErrorConstants, FockError> {
    if inp.spectrum.len() < inp.j || inp.j == 0 {
        return Err(FockError::MissingSpectrum { need: inp.j.max(1), got: inp.spectrum.len() });
    }
    for (name, v) in [("‖W‖₁", inp.w1), ("‖W‖∞", inp.w_inf), ("δ", inp.delta), ("η", inp.eta), ("M", inp.m), ("E", inp.e_bound)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(FockError::Invalid(format!("{name} must be positive, got {v}")));
        }
    }
    let e = &inp.spectrum[..inp.j];
    if e.iter().any(|x| !(*x > 0.0)) {
        return Err(FockError::Invalid("spectrum entries must be positive".into()));
    }
    let (w1, wi, d, eta, m, big_e) = (inp.w1, inp.w_inf, inp.delta, inp.eta, inp.m, inp.e_bound);
    let e_j = e[inp.j - 1];
    let sum_e: f64 = e.iter().sum();
    let sum_sqrt: f64 = e.iter().map(|x| x.sqrt()).sum();
    let sum_34: f64 = e.iter().map(|x| x.powf(0.75)).sum();
    let two_pi2 = 2.0 * PI * PI;

    let t_inf = 2.0 * (2.0f64 / 3.0).sqrt() * two_pi2.powf(-1.0 / 3.0) * wi.powf(1.0 / 6.0) * w1.powf(1.0 / 3.0);
    let t_mix = 4.0 / (3.0 * PI.powf(2.0 / 3.0)) * eta.powf(-0.25) * w1.sqrt() * e_j.powf(-0.25) * (m * big_e).sqrt();
    let t_sqrt = (4.0f64 / 3.0).powf(1.5) / two_pi2;
    let t_34 = 4.0 * (4.0f64 / 3.0).powf(1.25) * two_pi2.powf(-5.0 / 6.0) * w1.powf(5.0 / 6.0) * wi.powf(1.0 / 6.0) * eta.powf(-0.75) * sum_34;

    let d1 = 1.0 - d - e_j.powf(-0.25) * w1 * m * big_e - t_inf - t_mix;
    let d2 = t_inf
        + t_mix
        + 4.0 / (PI * PI) * (2.0f64 / 27.0).sqrt() * eta.powf(-0.5) * w1 * (m * big_e).sqrt()
        + t_sqrt * eta.powf(-0.5) * w1 * sum_sqrt
        + t_34;
    let d3 = sum_e
        + 2.0 * inp.c * inp.j as f64 / m * (m * big_e / e_j + 0.5)
        + t_sqrt * eta.powf(-1.5) * w1 * m * big_e * sum_sqrt
        + t_34 * (m * big_e / e_j + 0.5)
        + wi / d;
    Ok(ErrorConstants { d1, d2, d3 })
}

/// Both sides of
/// `|∫∫|Φ(x)|²|Φ(y)|² U_R(x−y) − 4π‖Φ‖₄⁴| ≤ 8πR ‖Φ‖₆³ ‖∇Φ‖₂`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SmoothingEstimate {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates the smoothing estimate for a 3D field; the convolution uses
/// the analytic transform of `U_R`.
pub fn smoothing_estimate_check(phi: &ComplexField, big_r: f64) -> Result<SmoothingEstimate, FockError> {
    let grid = phi.grid();
    if grid.dim() != 3 {
        return Err(FockError::Invalid("the smoothing estimate is three-dimensional".into()));
    }
    if !(big_r > 0.0) {
        return Err(FockError::Invalid(format!("R must be positive, got {big_r}")));
    }
    let mut rho: Vec<C64> = phi.values().iter().map(|v| C64::new(v.norm_sqr(), 0.0)).collect();
    fft_in_place(grid, &mut rho, Direction::Forward);
    let k2 = grid.k_squared();
    let pair: f64 = grid.cell_volume()
        * rho.iter().zip(&k2).map(|(r, k)| r.norm_sqr() * crate::dyson::hat_transform(big_r, k.sqrt())).sum::<f64>();
    let lhs = (pair - 4.0 * PI * phi.l4_pow4()).abs();
    let rhs = 8.0 * PI * big_r * phi.l6_norm().powi(3) * phi.grad_norm_sqr().sqrt();
    Ok(SmoothingEstimate { lhs, rhs, holds: lhs <= rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Grid;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn basis_dimension_and_sectors() {
        for (j, n) in [(1, 5), (2, 12), (3, 8), (4, 6)] {
            let b = FockBasis::new(j, n).unwrap();
            assert_eq!(b.dim(), binomial(n + j, j));
            for s in 0..=n {
                assert!(b.sector(s).unwrap().all(|i| b.total(i) == s));
            }
            for i in 0..b.dim() {
                assert_eq!(b.index_of(b.state(i)), Some(i));
            }
        }
        assert!(FockBasis::new(2, 3).unwrap().sector(4).is_err());
    }

    #[test]
    fn ccr_below_the_edge() {
        let b = FockBasis::new(2, 5).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let (ai, _) = ladder_operators(&b, i).unwrap();
                let (_, adj) = ladder_operators(&b, j).unwrap();
                let comm = ai.mul(&adj).add_scaled(&adj.mul(&ai), c(-1.0));
                for s in 0..b.dim() {
                    if b.total(s) < 5 {
                        for t in 0..b.dim() {
                            let expect = if s == t && i == j { 1.0 } else { 0.0 };
                            assert!((comm.get(t, s) - c(expect)).norm() < 1e-14);
                        }
                    }
                }
            }
        }
        let (a, adag) = ladder_operators(&b, 0).unwrap();
        assert_eq!(adag.leakage, b.sector(5).unwrap().len());
        assert_eq!(a.leakage, 0);
        let vac: Vec<C64> = (0..b.dim()).map(|i| c((i == 0) as u8 as f64)).collect();
        assert!(a.apply(&vac).iter().all(|x| x.norm() == 0.0));
        let num = adag.mul(&a);
        for i in 0..b.dim() {
            assert!((num.get(i, i).re - b.state(i)[0] as f64).abs() < 1e-14);
        }
        assert!(matches!(ladder_operators(&b, 2), Err(FockError::InvalidMode { .. })));
    }

    #[test]
    fn single_mode_interaction_spectrum() {
        let g = 0.7;
        let mb = ModeBasis::new(vec![0.0], vec![c(g)], 0.0, 1.0).unwrap();
        let b = FockBasis::new(1, 10).unwrap();
        let h = build_hamiltonian(&mb, &b, false).unwrap();
        for n in 0..=10 {
            let gs = ground_state(&h, &b, n).unwrap();
            assert!((gs.energy - g * (n * n.saturating_sub(1)) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn free_ground_energy_and_penalty_zero() {
        let mut w = vec![c(0.0); 16];
        w[0] = c(0.0);
        let mb = ModeBasis::new(vec![0.5, 1.5], w, 2.0, 4.0).unwrap();
        let b = FockBasis::new(2, 8).unwrap();
        let h = build_hamiltonian(&mb, &b, true).unwrap();
        let gs = ground_state(&h, &b, 4).unwrap();
        assert!((gs.energy - 2.0).abs() < 1e-12);
        assert!(gs.residual < 1e-10);
        let h0 = build_hamiltonian(&mb, &b, false).unwrap();
        let diff = h.add_scaled(&h0, c(-1.0));
        for i in b.sector(4).unwrap() {
            assert!(diff.get(i, i).norm() < 1e-14);
        }
    }

    #[test]
    fn hamiltonian_conserves_number() {
        let mb = two_mode(0.3);
        let b = FockBasis::new(2, 9).unwrap();
        let h = build_hamiltonian(&mb, &b, true).unwrap();
        assert!(h.hermitian);
        let n = number_operator(&b);
        let comm = h.mul(&n).add_scaled(&n.mul(&h), c(-1.0));
        assert!(comm.max_abs() <= 1e-12);
    }

    /// A generic positive two-mode interaction.
    fn two_mode(mix: f64) -> ModeBasis {
        let mut w = vec![c(0.0); 16];
        let idx = |i: usize, j: usize, k: usize, l: usize| ((i * 2 + j) * 2 + k) * 2 + l;
        w[idx(0, 0, 0, 0)] = c(1.0);
        w[idx(1, 1, 1, 1)] = c(0.8);
        for (i, j, k, l) in [(0, 1, 0, 1), (1, 0, 1, 0), (0, 1, 1, 0), (1, 0, 0, 1)] {
            w[idx(i, j, k, l)] = c(0.25);
        }
        w[idx(0, 0, 1, 1)] = c(mix);
        w[idx(1, 1, 0, 0)] = c(mix);
        ModeBasis::new(vec![0.2, 0.5], w, 0.0, 1.0).unwrap()
    }

    #[test]
    fn rejects_non_hermitian_tensor() {
        let mut w = vec![c(0.0); 16];
        w[3] = C64::new(0.0, 1.0);
        assert!(matches!(ModeBasis::new(vec![0.1, 0.2], w, 0.0, 1.0), Err(FockError::NonHermitian(_))));
        assert!(ModeBasis::new(vec![0.3, 0.2], vec![c(0.0); 16], 0.0, 1.0).is_err());
    }

    #[test]
    fn relabeling_symmetry() {
        let mut w = vec![c(0.0); 16];
        let idx = |i: usize, j: usize, k: usize, l: usize| ((i * 2 + j) * 2 + k) * 2 + l;
        w[idx(0, 0, 0, 0)] = c(1.0);
        w[idx(1, 1, 1, 1)] = c(1.0);
        w[idx(0, 0, 1, 1)] = c(0.4);
        w[idx(1, 1, 0, 0)] = c(0.4);
        let mb = ModeBasis::new(vec![1.0, 1.0], w, 0.0, 1.0).unwrap();
        let b = FockBasis::new(2, 6).unwrap();
        let h = build_hamiltonian(&mb, &b, false).unwrap();
        let swap = |i: usize| {
            let s = b.state(i);
            b.index_of(&[s[1], s[0]]).unwrap()
        };
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                assert!((h.get(i, j) - h.get(swap(i), swap(j))).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn coherent_state_properties() {
        let b = FockBasis::new(1, 40).unwrap();
        let vac = coherent_state(&[c(0.0)], &b).unwrap();
        assert_eq!(vac.state[0], c(1.0));
        assert!(vac.state[1..].iter().all(|x| x.norm() == 0.0));
        let z = C64::new(0.7, 0.2);
        let zs = coherent_state(&[z], &b).unwrap();
        let nrm: f64 = zs.state.iter().map(|x| x.norm_sqr()).sum();
        assert!((nrm - 1.0).abs() <= zs.truncation_error + 1e-14);
        let (a, adag) = ladder_operators(&b, 0).unwrap();
        let num = adag.mul(&a);
        let mean: C64 = zs.state.iter().zip(num.apply(&zs.state)).map(|(x, y)| x.conj() * y).sum();
        assert!((mean.re - z.norm_sqr()).abs() < 1e-12);
        let az = a.apply(&zs.state);
        assert!(az.iter().zip(&zs.state).all(|(x, y)| (x - z * y).norm() < 1e-12));
        assert!(matches!(coherent_state(&[c(5.0)], &b), Err(FockError::TailBound(_))));
    }

    #[test]
    fn symbols_of_basic_monomials() {
        let z = [C64::new(0.7, 0.2)];
        let adag: OperatorPolynomial = "adag".parse().unwrap();
        assert_eq!(adag.lower_symbol(&z), z[0].conj());
        assert_eq!(adag.upper_symbol(&z).unwrap(), z[0].conj());
        let num: OperatorPolynomial = "adag a".parse().unwrap();
        assert_eq!(num.lower_symbol(&z), c(z[0].norm_sqr()));
        assert!((num.upper_symbol(&z).unwrap() - c(z[0].norm_sqr() - 1.0)).norm() < 1e-15);
        let quart: OperatorPolynomial = "adag adag a a".parse().unwrap();
        assert!((quart.lower_symbol(&z) - c(z[0].norm_sqr().powi(2))).norm() < 1e-15);
        let r2 = z[0].norm_sqr();
        assert!((quart.upper_symbol(&z).unwrap() - c(r2 * r2 - 4.0 * r2 + 2.0)).norm() < 1e-14);
        let five: OperatorPolynomial = "adag adag adag a a".parse().unwrap();
        assert!(matches!(five.upper_symbol(&z), Err(FockError::DegreeTooHigh(5))));
        assert!("a adag".parse::<OperatorPolynomial>().is_err());
        assert!("b".parse::<OperatorPolynomial>().is_err());
    }

    #[test]
    fn upper_and_lower_are_inverse_flows() {
        let op: OperatorPolynomial = "0.5*adag0 adag1 a0 a1 + 2*adag1 a0 + adag0 adag0 a0 a0 + 1".parse().unwrap();
        let lower = op.lower_polynomial();
        let back = op.upper_polynomial().unwrap().heat_flow(1.0);
        assert_eq!(back, lower);
    }

    #[test]
    fn resolution_of_identity_and_reconstruction() {
        for s in ["1", "adag a", "adag adag a a", "adag + a"] {
            let op: OperatorPolynomial = s.parse().unwrap();
            let rep = verify_resolution(&op, 1, 8.0, 96, 3).unwrap();
            assert!(rep.identity_error < 1e-10, "{s}: {rep:?}");
            assert!(rep.reconstruction_error < 1e-10, "{s}: {rep:?}");
        }
    }

    #[test]
    fn poisson_tail_matches_direct_sum() {
        let lam: f64 = 3.0;
        let direct: f64 = (11..200).map(|n| (-lam).exp() * lam.powi(n) / factorial(n as usize)).sum();
        assert!((poisson_tail(lam, 10) - direct).abs() < 1e-15);
    }

    #[test]
    fn error_constants_reject_short_spectrum() {
        let inp = ErrorInputs::gp_scaling(1e-3, 1e8, 0.1, 1.0, 1.0, 1.0, vec![1.0, 2.0]);
        let mut bad = inp.clone();
        bad.j = 3;
        assert!(matches!(error_constants(&bad), Err(FockError::MissingSpectrum { .. })));
        let d = error_constants(&inp).unwrap();
        assert!(d.d1 <= 1.0 && d.d2 >= 0.0 && d.d3 >= 0.0);
    }

    #[test]
    fn smoothing_estimate_for_gaussian() {
        let grid = Grid::new(3, 32, 10.0).unwrap();
        let mut phi = ComplexField::from_fn(&grid, |x| c((-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp()));
        phi.normalize();
        let mut prev = 0.0;
        for r in [0.05, 0.1, 0.2, 0.4] {
            let est = smoothing_estimate_check(&phi, r).unwrap();
            assert!(est.holds, "{r}: {est:?}");
            assert!(est.lhs > prev);
            prev = est.lhs;
        }
    }
}
