//! Exact 3-set cover instances and their reduction to sparse linear systems.
//!
//! Triples of `{1..m}` are indexed `1..=p` (`p = C(m, 3)`) in lexicographic
//! order. The cover matrix `M = [A 0; B C]` has `m + 3p` rows and `4p`
//! columns; a binary solution `u` of `M u = y` splits into four blocks of
//! length `p` that we call `(select, mirror, spare, absent)` per triple.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::estimators::{RegressionProblem, SparseEstimator};
use crate::linalg::binomial;
use crate::{Error, Result, DEFAULT_BUDGET};

pub type Triple = [usize; 3];

fn check_ground_set(m: usize) -> Result<()> {
    if m < 3 || m % 3 != 0 {
        return Err(Error::InvalidGroundSet(m));
    }
    Ok(())
}

/// A ground set `{1..m}` together with a collection of 3-element subsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct X3CInstance {
    m: usize,
    triples: Vec<Triple>,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    m: usize,
    triples: Vec<Triple>,
}

impl TryFrom<RawInstance> for X3CInstance {
    type Error = Error;

    fn try_from(raw: RawInstance) -> Result<Self> {
        X3CInstance::new(raw.m, raw.triples)
    }
}

impl From<X3CInstance> for RawInstance {
    fn from(inst: X3CInstance) -> Self {
        RawInstance { m: inst.m, triples: inst.triples }
    }
}

impl X3CInstance {
    /// Validates and normalises the collection: members are sorted inside
    /// each triple, the list order is kept.
    pub fn new(m: usize, triples: Vec<Triple>) -> Result<Self> {
        check_ground_set(m)?;
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(triples.len());
        for t in triples {
            let mut s = t;
            s.sort_unstable();
            if s[0] < 1 || s[2] > m || s[0] == s[1] || s[1] == s[2] {
                return Err(Error::InvalidInstance(format!("{t:?} is not a 3-subset of 1..={m}")));
            }
            if !seen.insert(s) {
                return Err(Error::InvalidInstance(format!("duplicate triple {s:?}")));
            }
            out.push(s);
        }
        Ok(X3CInstance { m, triples: out })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }

    /// Triple indices of the collection, ascending.
    pub fn indices(&self, index: &TripleIndex) -> Vec<usize> {
        let mut js: Vec<usize> = self.triples.iter().map(|t| index.index_of(t).expect("validated triple")).collect();
        js.sort_unstable();
        js
    }

    /// Random collection: each triple of `{1..m}` is kept with probability
    /// `density`. With `plant`, the triples of a uniformly random partition
    /// of the ground set are added, so an exact cover exists.
    pub fn random<R: Rng + ?Sized>(m: usize, density: f64, plant: bool, rng: &mut R) -> Result<Self> {
        if !(0.0..=1.0).contains(&density) {
            return Err(Error::InvalidParameter(format!("density {density} outside [0, 1]")));
        }
        let index = enumerate_triples(m)?;
        check_ground_set(m)?;
        let mut chosen = BTreeSet::new();
        for t in index.iter() {
            if rng.gen::<f64>() < density {
                chosen.insert(*t);
            }
        }
        if plant {
            for t in random_partition(m, rng) {
                chosen.insert(t);
            }
        }
        X3CInstance::new(m, chosen.into_iter().collect())
    }
}

/// Uniformly random partition of `{1..m}` into sorted triples.
pub fn random_partition<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<Triple> {
    let mut elems: Vec<usize> = (1..=m).collect();
    elems.shuffle(rng);
    elems
        .chunks(3)
        .map(|c| {
            let mut t = [c[0], c[1], c[2]];
            t.sort_unstable();
            t
        })
        .collect()
}

/// Bijection between `1..=p` and the lexicographically sorted triples of `{1..m}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleIndex {
    m: usize,
    triples: Vec<Triple>,
    lookup: BTreeMap<Triple, usize>,
}

impl TripleIndex {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.triples.len()
    }

    /// Triple with 1-based index `j`.
    pub fn triple(&self, j: usize) -> Option<&Triple> {
        j.checked_sub(1).and_then(|i| self.triples.get(i))
    }

    /// 1-based index of a sorted triple.
    pub fn index_of(&self, t: &Triple) -> Option<usize> {
        self.lookup.get(t).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }
}

/// All `C(m, 3)` triples of `{1..m}` in lexicographic order.
pub fn enumerate_triples(m: usize) -> Result<TripleIndex> {
    if m < 3 {
        return Err(Error::InvalidGroundSet(m));
    }
    let triples: Vec<Triple> = (1..=m).combinations(3).map(|c| [c[0], c[1], c[2]]).collect();
    let lookup = triples.iter().enumerate().map(|(i, t)| (*t, i + 1)).collect();
    Ok(TripleIndex { m, triples, lookup })
}

/// The `(m + 3p) × 4p` reduction matrix with entries in `{-1, 0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverMatrix {
    m: usize,
    p: usize,
    entries: DMatrix<f64>,
    index: TripleIndex,
}

impl CoverMatrix {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn index(&self) -> &TripleIndex {
        &self.index
    }

    /// Membership block, `m × p`.
    pub fn a(&self) -> DMatrix<f64> {
        self.entries.view((0, 0), (self.m, self.p)).into_owned()
    }

    /// `3p × p` block below `A`.
    pub fn b(&self) -> DMatrix<f64> {
        self.entries.view((self.m, 0), (3 * self.p, self.p)).into_owned()
    }

    /// `3p × 3p` block below the zero block.
    pub fn c(&self) -> DMatrix<f64> {
        self.entries.view((self.m, self.p), (3 * self.p, 3 * self.p)).into_owned()
    }

    pub fn nnz(&self) -> usize {
        self.entries.iter().filter(|v| **v != 0.0).count()
    }

    /// `‖M u − y‖₂`.
    pub fn residual(&self, u: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (&self.entries * u - y).norm()
    }
}

/// Builds `M = [A 0; B C]` for ground set size `m`.
pub fn build_cover_matrix(m: usize) -> Result<CoverMatrix> {
    check_ground_set(m)?;
    let index = enumerate_triples(m)?;
    let p = index.p();
    let mut e = DMatrix::zeros(m + 3 * p, 4 * p);
    for (j, t) in index.iter().enumerate() {
        for &a in t {
            e[(a - 1, j)] = 1.0;
        }
        // B_j = e_j, C_j = -f_j
        e[(m + j, j)] = 1.0;
        e[(m + j, p + j)] = -1.0;
        // B_{p+j} = e_j, C_{p+j} = f_{p+j}
        e[(m + p + j, j)] = 1.0;
        e[(m + p + j, 2 * p + j)] = 1.0;
        // B_{2p+j} = 0, C_{2p+j} = f_{2p+j}
        e[(m + 2 * p + j, 3 * p + j)] = 1.0;
    }
    Ok(CoverMatrix { m, p, entries: e, index })
}

/// Response vector encoding the collection of `inst`.
pub fn build_response(inst: &X3CInstance) -> DVector<f64> {
    let index = enumerate_triples(inst.m).expect("validated instance");
    response_with(&index, inst)
}

fn response_with(index: &TripleIndex, inst: &X3CInstance) -> DVector<f64> {
    let (m, p) = (inst.m, index.p());
    let mut y = DVector::zeros(m + 3 * p);
    y.rows_mut(0, m).fill(1.0);
    for (j, t) in index.iter().enumerate() {
        if inst.contains(t) {
            y[m + p + j] = 1.0;
        } else {
            y[m + 2 * p + j] = 1.0;
        }
    }
    y
}

/// A set of 1-based triple indices claimed to form an exact cover.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExactCover {
    pub selected: BTreeSet<usize>,
}

impl ExactCover {
    pub fn new(selected: impl IntoIterator<Item = usize>) -> Self {
        ExactCover { selected: selected.into_iter().collect() }
    }

    /// Checks count, disjointness, coverage and membership in the collection.
    pub fn validate(&self, inst: &X3CInstance) -> core::result::Result<(), String> {
        let index = enumerate_triples(inst.m).map_err(|e| format!("{e}"))?;
        self.validate_with(&index, inst)
    }

    fn validate_with(&self, index: &TripleIndex, inst: &X3CInstance) -> core::result::Result<(), String> {
        if self.selected.len() != inst.m / 3 {
            return Err(format!("{} triples selected, expected {}", self.selected.len(), inst.m / 3));
        }
        let mut covered = BTreeSet::new();
        for &j in &self.selected {
            let t = index.triple(j).ok_or_else(|| format!("triple index {j} out of range"))?;
            if !inst.contains(t) {
                return Err(format!("triple {t:?} (index {j}) is not in the collection"));
            }
            for &a in t {
                if !covered.insert(a) {
                    return Err(format!("element {a} covered twice"));
                }
            }
        }
        if covered.len() != inst.m {
            return Err(format!("{} of {} elements covered", covered.len(), inst.m));
        }
        Ok(())
    }
}

/// A `{0,1}` vector of length `4p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinarySolution {
    pub bits: Vec<bool>,
    pub nnz: usize,
}

impl BinarySolution {
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.bits.len(), self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }))
    }
}

/// Encodes an exact cover as the binary solution of `M u = y`.
pub fn encode_cover(inst: &X3CInstance, cover: &ExactCover) -> Result<BinarySolution> {
    let index = enumerate_triples(inst.m)?;
    cover.validate_with(&index, inst).map_err(Error::NotACover)?;
    let p = index.p();
    let mut bits = alloc::vec![false; 4 * p];
    for (j, t) in index.iter().enumerate() {
        if cover.selected.contains(&(j + 1)) {
            bits[j] = true;
            bits[p + j] = true;
        } else if inst.contains(t) {
            bits[2 * p + j] = true;
        } else {
            bits[3 * p + j] = true;
        }
    }
    let nnz = bits.iter().filter(|b| **b).count();
    Ok(BinarySolution { bits, nnz })
}

/// Recovers the exact cover from an approximate sparse solution.
pub fn decode_cover(inst: &X3CInstance, u: &DVector<f64>) -> Result<ExactCover> {
    let matrix = build_cover_matrix(inst.m)?;
    decode_cover_with(&matrix, inst, u)
}

/// [`decode_cover`] against an already built cover matrix.
pub fn decode_cover_with(matrix: &CoverMatrix, inst: &X3CInstance, u: &DVector<f64>) -> Result<ExactCover> {
    if matrix.m != inst.m {
        return Err(Error::ShapeError(format!("matrix built for m={}, instance has m={}", matrix.m, inst.m)));
    }
    let p = matrix.p;
    if u.len() != 4 * p {
        return Err(Error::ShapeError(format!("u has length {}, expected {}", u.len(), 4 * p)));
    }
    let allowed = inst.m / 3 + p;
    let nnz = u.iter().filter(|v| **v != 0.0).count();
    if nnz > allowed {
        return Err(Error::SparsityViolation { nnz, allowed });
    }
    let y = response_with(&matrix.index, inst);
    let residual = matrix.residual(u, &y);
    if !(residual < 0.5) {
        return Err(Error::NotASolution { residual });
    }
    let cover = ExactCover::new((0..p).filter(|&j| u[j] > 0.5).map(|j| j + 1));
    cover.validate_with(&matrix.index, inst).map_err(Error::DecodeInconsistency)?;
    Ok(cover)
}

fn cover_candidates(inst: &X3CInstance, index: &TripleIndex, budget: u128) -> Result<(Vec<usize>, usize)> {
    let js = inst.indices(index);
    let size = inst.m / 3;
    let needed = binomial(js.len(), size);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    Ok((js, size))
}

fn is_partition(index: &TripleIndex, m: usize, picks: &[usize]) -> bool {
    let mut covered = alloc::vec![false; m + 1];
    for &j in picks {
        for &a in index.triple(j).expect("index in range") {
            if covered[a] {
                return false;
            }
            covered[a] = true;
        }
    }
    true
}

/// First exact cover in lexicographic subset order, with the default budget.
pub fn solve_x3c_bruteforce(inst: &X3CInstance) -> Result<Option<ExactCover>> {
    solve_x3c_bruteforce_with_budget(inst, DEFAULT_BUDGET)
}

pub fn solve_x3c_bruteforce_with_budget(inst: &X3CInstance, budget: u128) -> Result<Option<ExactCover>> {
    let index = enumerate_triples(inst.m)?;
    let (js, size) = cover_candidates(inst, &index, budget)?;
    Ok(js.into_iter().combinations(size).find(|picks| is_partition(&index, inst.m, picks)).map(ExactCover::new))
}

/// Every exact cover of the instance, in lexicographic subset order.
pub fn all_exact_covers(inst: &X3CInstance, budget: u128) -> Result<Vec<ExactCover>> {
    let index = enumerate_triples(inst.m)?;
    let (js, size) = cover_candidates(inst, &index, budget)?;
    Ok(js
        .into_iter()
        .combinations(size)
        .filter(|picks| is_partition(&index, inst.m, picks))
        .map(ExactCover::new)
        .collect())
}

/// Solves X3C through a sparse-regression estimator run on the noiseless
/// system `(M, y)` with sparsity `m/3 + p`. Returns `None` when the
/// estimate does not decode to a cover.
pub fn solve_x3c_via_regression<E: SparseEstimator + ?Sized>(
    inst: &X3CInstance,
    estimator: &E,
) -> Result<Option<ExactCover>> {
    let matrix = build_cover_matrix(inst.m)?;
    let y = response_with(&matrix.index, inst);
    let k = inst.m / 3 + matrix.p;
    let problem = RegressionProblem::new(matrix.entries.clone(), y, 0.0, k)?;
    let estimate = estimator.estimate(&problem)?;
    let u = DVector::from_column_slice(&estimate.theta);
    Ok(decode_cover_with(&matrix, inst, &u).ok())
}
