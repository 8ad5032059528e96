//! Bosonic occupation-number basis for `N` particles on `M` ring sites.
//!
//! States are stored in lexicographically *descending* order of their
//! occupation vectors, so the first state is `(N, 0, ..., 0)` and the last is
//! `(0, ..., 0, N)`. Ranking is available either through a hash map or through
//! a closed-form combinatorial formula; both produce the same indices.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default upper bound on the number of basis states.
pub const DEFAULT_DIMENSION_CAP: usize = 5_000_000;

/// Above this dimension [`IndexStrategy::Auto`] switches from a hash map to
/// combinatorial ranking.
pub const HASH_INDEX_LIMIT: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BasisError {
    #[error("a basis needs at least 2 sites and 1 particle (got M={sites}, N={particles})")]
    InvalidShape { sites: usize, particles: usize },
    #[error("basis dimension {dimension} for M={sites}, N={particles} exceeds the cap of {cap} states")]
    DimensionOverflow {
        sites: usize,
        particles: usize,
        dimension: u128,
        cap: usize,
    },
    #[error("occupations {0:?} are not a member of the basis")]
    NotAMember(Vec<u32>),
    #[error("index {index} is out of range for a basis of dimension {dimension}")]
    OutOfRange { index: usize, dimension: usize },
}

/// One occupation-number configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FockState(Vec<u32>);

impl FockState {
    pub fn new(occupations: Vec<u32>) -> Self {
        FockState(occupations)
    }

    pub fn occupations(&self) -> &[u32] {
        &self.0
    }

    pub fn sites(&self) -> usize {
        self.0.len()
    }

    pub fn particles(&self) -> u64 {
        self.0.iter().map(|&n| n as u64).sum()
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ">")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexStrategy {
    /// Hash map up to [`HASH_INDEX_LIMIT`] states, combinatorial beyond.
    #[default]
    Auto,
    Hash,
    Combinatorial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisOptions {
    pub dimension_cap: usize,
    pub strategy: IndexStrategy,
}

impl Default for BasisOptions {
    fn default() -> Self {
        BasisOptions {
            dimension_cap: DEFAULT_DIMENSION_CAP,
            strategy: IndexStrategy::Auto,
        }
    }
}

/// `binomial(n + m - 1, m - 1)`, the number of ways to put `n` bosons on `m`
/// sites. Saturates instead of overflowing.
pub fn basis_dimension(sites: usize, particles: usize) -> u128 {
    if sites == 0 {
        return if particles == 0 { 1 } else { 0 };
    }
    binomial_u128((particles + sites - 1) as u128, (sites - 1) as u128)
}

fn binomial_u128(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Pascal table `table[n][k] = C(n, k)` for `n <= max_n`, `k <= max_k`.
#[derive(Debug, Clone)]
struct BinomialTable {
    max_k: usize,
    values: Vec<usize>,
}

impl BinomialTable {
    fn new(max_n: usize, max_k: usize) -> Self {
        let width = max_k + 1;
        let mut values = vec![0usize; (max_n + 1) * width];
        for n in 0..=max_n {
            values[n * width] = 1;
            for k in 1..=max_k.min(n) {
                let a = values[(n - 1) * width + k - 1];
                let b = if k < n { values[(n - 1) * width + k] } else { 0 };
                values[n * width + k] = a.saturating_add(b);
            }
        }
        BinomialTable { max_k, values }
    }

    #[inline]
    fn get(&self, n: usize, k: usize) -> usize {
        if k > n {
            0
        } else {
            self.values[n * (self.max_k + 1) + k]
        }
    }
}

#[derive(Debug, Clone)]
enum Index {
    Hash(HashMap<Vec<u32>, usize>),
    Combinatorial,
}

/// Canonically ordered occupation basis.
///
/// Immutable once built; all methods take `&self`.
#[derive(Debug, Clone)]
pub struct FockBasis {
    sites: usize,
    particles: usize,
    /// Row-major `dimension x sites` occupation table.
    occupations: Vec<u32>,
    binomials: BinomialTable,
    index: Index,
}

impl FockBasis {
    pub fn new(sites: usize, particles: usize) -> Result<Self, BasisError> {
        Self::with_options(sites, particles, BasisOptions::default())
    }

    pub fn with_options(sites: usize, particles: usize, options: BasisOptions) -> Result<Self, BasisError> {
        if sites < 2 || particles < 1 {
            return Err(BasisError::InvalidShape { sites, particles });
        }
        let dimension = basis_dimension(sites, particles);
        if dimension > options.dimension_cap as u128 {
            return Err(BasisError::DimensionOverflow {
                sites,
                particles,
                dimension,
                cap: options.dimension_cap,
            });
        }
        let dimension = dimension as usize;

        let mut occupations = Vec::with_capacity(dimension * sites);
        let mut current = vec![0u32; sites];
        enumerate_descending(&mut current, 0, particles as u32, &mut occupations);
        debug_assert_eq!(occupations.len(), dimension * sites);

        let binomials = BinomialTable::new(particles + sites, sites);
        let use_hash = match options.strategy {
            IndexStrategy::Auto => dimension <= HASH_INDEX_LIMIT,
            IndexStrategy::Hash => true,
            IndexStrategy::Combinatorial => false,
        };
        let index = if use_hash {
            let map = occupations
                .chunks_exact(sites)
                .enumerate()
                .map(|(i, s)| (s.to_vec(), i))
                .collect();
            Index::Hash(map)
        } else {
            Index::Combinatorial
        };

        Ok(FockBasis {
            sites,
            particles,
            occupations,
            binomials,
            index,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dimension(&self) -> usize {
        self.occupations.len() / self.sites
    }

    pub fn uses_hash_index(&self) -> bool {
        matches!(self.index, Index::Hash(_))
    }

    /// Occupations of the state at position `i`, without bounds promotion to
    /// an owned [`FockState`].
    #[inline]
    pub fn occupations(&self, i: usize) -> &[u32] {
        &self.occupations[i * self.sites..(i + 1) * self.sites]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        self.occupations.chunks_exact(self.sites)
    }

    pub fn unrank(&self, index: usize) -> Result<FockState, BasisError> {
        if index >= self.dimension() {
            return Err(BasisError::OutOfRange {
                index,
                dimension: self.dimension(),
            });
        }
        Ok(FockState(self.occupations(index).to_vec()))
    }

    pub fn rank(&self, state: &FockState) -> Result<usize, BasisError> {
        self.rank_occupations(state.occupations())
    }

    /// Rank of a raw occupation vector, validating membership.
    pub fn rank_occupations(&self, occ: &[u32]) -> Result<usize, BasisError> {
        if !self.is_member(occ) {
            return Err(BasisError::NotAMember(occ.to_vec()));
        }
        Ok(self.rank_unchecked(occ))
    }

    /// Rank of an occupation vector already known to be a member.
    #[inline]
    pub fn rank_unchecked(&self, occ: &[u32]) -> usize {
        match &self.index {
            Index::Hash(map) => map[occ],
            Index::Combinatorial => self.combinatorial_rank(occ),
        }
    }

    fn is_member(&self, occ: &[u32]) -> bool {
        occ.len() == self.sites && occ.iter().map(|&n| n as u64).sum::<u64>() == self.particles as u64
    }

    /// Closed-form rank in descending lexicographic order.
    ///
    /// At position `i` with `r` particles left and `k = M - 1 - i` sites after
    /// it, every value `v > s_i` precedes `s_i`; summing the completions of
    /// those prefixes gives `C(r - s_i - 1 + k, k)` by the hockey-stick
    /// identity.
    pub fn combinatorial_rank(&self, occ: &[u32]) -> usize {
        let mut remaining = self.particles;
        let mut rank = 0usize;
        for (i, &s) in occ.iter().enumerate().take(self.sites - 1) {
            let s = s as usize;
            let k = self.sites - 1 - i;
            if remaining > s {
                rank += self.binomials.get(remaining - s - 1 + k, k);
            }
            remaining -= s;
        }
        rank
    }

    /// Inverse of [`Self::combinatorial_rank`]; walks the same counts.
    pub fn combinatorial_unrank(&self, mut index: usize) -> Result<FockState, BasisError> {
        if index >= self.dimension() {
            return Err(BasisError::OutOfRange {
                index,
                dimension: self.dimension(),
            });
        }
        let mut occ = vec![0u32; self.sites];
        let mut remaining = self.particles;
        let last = self.sites - 1;
        for (i, slot) in occ[..last].iter_mut().enumerate() {
            let k = last - i;
            let mut v = remaining;
            loop {
                // states with s_i = v and the remaining particles on k sites
                let count = self.binomials.get(remaining - v + k - 1, k - 1);
                if index < count {
                    break;
                }
                index -= count;
                v -= 1;
            }
            *slot = v as u32;
            remaining -= v;
        }
        occ[last] = remaining as u32;
        Ok(FockState(occ))
    }
}

fn enumerate_descending(current: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<u32>) {
    if pos == current.len() - 1 {
        current[pos] = remaining;
        out.extend_from_slice(current);
        return;
    }
    for n in (0..=remaining).rev() {
        current[pos] = n;
        enumerate_descending(current, pos + 1, remaining - n, out);
    }
}
