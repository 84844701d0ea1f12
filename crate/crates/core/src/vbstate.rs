//! Valence-bond configurations, their transition graphs and the loop rules
//! for overlaps and two-spin matrix elements.
//!
//! Every singlet is oriented from sublattice A to sublattice B. With that
//! convention the overlap of two bipartite VB states is
//! `<a|b> = 2^(N_loops - N)` (for `2N` sites) and is always positive, and
//! `<a|S_i.S_j|b> / <a|b>` is `0` when `i` and `j` sit on different loops of
//! the transition graph, `+3/4` on the same loop and sublattice, and `-3/4`
//! on the same loop and opposite sublattices.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Lattice, Sublattice};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VbError {
    #[error("matching has {got} entries, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("site {0} is matched to itself")]
    FixedPoint(usize),
    #[error("partner of site {0} is out of range")]
    OutOfRange(usize),
    #[error("matching is not an involution at site {0}")]
    NotInvolution(usize),
    #[error("pair ({0}, {1}) joins sites of the same sublattice")]
    SameSublattice(usize, usize),
    #[error("pair ({0}, {1}) is not a nearest-neighbour bond")]
    NotNearestNeighbour(usize, usize),
    #[error("n_sites = {n_sites} is inconsistent with loops covering {covered} sites")]
    InconsistentSiteCount { n_sites: usize, covered: usize },
    #[error("the two-spin estimator needs distinct sites, got i = j = {0}")]
    SameSite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoveringKind {
    NearestNeighbour,
    FullBipartite,
}

/// A perfect matching of the sites, stored as a partner table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DimerCovering {
    partner: Vec<usize>,
    kind: CoveringKind,
}

impl DimerCovering {
    /// Validates the involution and bipartite-pairing invariants.
    pub fn new(
        partner: Vec<usize>,
        kind: CoveringKind,
        sublattice: &[Sublattice],
    ) -> Result<Self, VbError> {
        if partner.len() != sublattice.len() {
            return Err(VbError::LengthMismatch {
                expected: sublattice.len(),
                got: partner.len(),
            });
        }
        for (s, &t) in partner.iter().enumerate() {
            if t >= partner.len() {
                return Err(VbError::OutOfRange(s));
            }
            if t == s {
                return Err(VbError::FixedPoint(s));
            }
            if partner[t] != s {
                return Err(VbError::NotInvolution(s));
            }
            if sublattice[s] == sublattice[t] {
                return Err(VbError::SameSublattice(s, t));
            }
        }
        Ok(DimerCovering { partner, kind })
    }

    /// A covering of `lattice` using nearest-neighbour bonds only.
    pub fn nearest_neighbour(lattice: &Lattice, partner: Vec<usize>) -> Result<Self, VbError> {
        let cover = Self::new(partner, CoveringKind::NearestNeighbour, &lattice.sublattices())?;
        for (s, &t) in cover.partner.iter().enumerate() {
            if !lattice.are_neighbours(s, t) {
                return Err(VbError::NotNearestNeighbour(s, t));
            }
        }
        Ok(cover)
    }

    /// Columnar covering: every row paired as `(0,1), (2,3), ...`.
    pub fn columnar(lattice: &Lattice) -> Self {
        let partner = (0..lattice.n_sites())
            .map(|s| {
                let (x, y) = lattice.coords(s);
                lattice.site(x ^ 1, y)
            })
            .collect();
        DimerCovering {
            partner,
            kind: CoveringKind::NearestNeighbour,
        }
    }

    pub(crate) fn from_raw(partner: Vec<usize>, kind: CoveringKind) -> Self {
        DimerCovering { partner, kind }
    }

    pub fn kind(&self) -> CoveringKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.partner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partner.is_empty()
    }

    pub fn partner(&self, site: usize) -> usize {
        self.partner[site]
    }

    pub fn partners(&self) -> &[usize] {
        &self.partner
    }

    /// Pairs `(s, partner(s))` with `s < partner(s)`, in site order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.partner
            .iter()
            .enumerate()
            .filter(|&(s, &t)| s < t)
            .map(|(s, &t)| (s, t))
    }

    /// Re-pairs `a-b` and `c-d` in place. Callers must keep the matching valid.
    pub(crate) fn repair(&mut self, a: usize, b: usize, c: usize, d: usize) {
        self.partner[a] = b;
        self.partner[b] = a;
        self.partner[c] = d;
        self.partner[d] = c;
    }

    pub(crate) fn set_partner_unchecked(&mut self, s: usize, p: usize) {
        self.partner[s] = p;
    }

    pub(crate) fn set_pair(&mut self, a: usize, b: usize) {
        self.partner[a] = b;
        self.partner[b] = a;
    }
}

/// The union of two matchings split into closed loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopDecomposition {
    loop_id: Vec<u32>,
    loop_lengths: Vec<usize>,
}

impl LoopDecomposition {
    pub fn n_loops(&self) -> usize {
        self.loop_lengths.len()
    }

    pub fn loop_id(&self, site: usize) -> u32 {
        self.loop_id[site]
    }

    pub fn loop_lengths(&self) -> &[usize] {
        &self.loop_lengths
    }

    pub fn n_sites(&self) -> usize {
        self.loop_id.len()
    }

    pub fn same_loop(&self, i: usize, j: usize) -> bool {
        self.loop_id[i] == self.loop_id[j]
    }
}

/// Decomposes the transition graph of `a` and `b` by alternately following
/// the two partner tables.
pub fn transition_graph(a: &DimerCovering, b: &DimerCovering) -> Result<LoopDecomposition, VbError> {
    transition_graph_raw(a.partners(), b.partners())
}

pub(crate) fn transition_graph_raw(a: &[usize], b: &[usize]) -> Result<LoopDecomposition, VbError> {
    if a.len() != b.len() {
        return Err(VbError::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    const UNSET: u32 = u32::MAX;
    let mut loop_id = vec![UNSET; a.len()];
    let mut loop_lengths = Vec::new();
    for start in 0..a.len() {
        if loop_id[start] != UNSET {
            continue;
        }
        let label = loop_lengths.len() as u32;
        let mut len = 0;
        let mut s = start;
        loop {
            let t = a[s];
            loop_id[s] = label;
            loop_id[t] = label;
            len += 2;
            s = b[t];
            if s == start {
                break;
            }
        }
        loop_lengths.push(len);
    }
    Ok(LoopDecomposition {
        loop_id,
        loop_lengths,
    })
}

/// Loop count of the transition graph, reusing `stamp` as a visited buffer.
/// `stamp` must have one entry per site; `generation` must differ from every
/// value already stored in it.
pub(crate) fn count_loops(a: &[usize], b: &[usize], stamp: &mut [u32], generation: u32) -> usize {
    let mut n = 0;
    for start in 0..a.len() {
        if stamp[start] == generation {
            continue;
        }
        n += 1;
        let mut s = start;
        loop {
            let t = a[s];
            stamp[s] = generation;
            stamp[t] = generation;
            s = b[t];
            if s == start {
                break;
            }
        }
    }
    n
}

/// Overlap `<a|b> = 2^log2_weight` of two normalized bipartite VB states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OverlapWeight {
    pub log2_weight: i64,
}

impl OverlapWeight {
    pub fn value(&self) -> f64 {
        (self.log2_weight as f64).exp2()
    }

    pub fn exact(&self) -> BigRational {
        let two = BigRational::from_integer(BigInt::from(2));
        if self.log2_weight >= 0 {
            Pow::pow(two, self.log2_weight as u64)
        } else {
            BigRational::one() / Pow::pow(two, self.log2_weight.unsigned_abs())
        }
    }
}

pub fn overlap_weight(loops: &LoopDecomposition, n_sites: usize) -> Result<OverlapWeight, VbError> {
    let covered: usize = loops.loop_lengths.iter().sum();
    if covered != n_sites || n_sites % 2 == 1 {
        return Err(VbError::InconsistentSiteCount { n_sites, covered });
    }
    Ok(OverlapWeight {
        log2_weight: loops.n_loops() as i64 - (n_sites / 2) as i64,
    })
}

/// Value of `<a|S_i.S_j|b> / <a|b>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LoopEstimate {
    /// Different loops: 0.
    Disconnected,
    /// Same loop, same sublattice: +3/4.
    Parallel,
    /// Same loop, opposite sublattices: -3/4.
    Antiparallel,
}

impl LoopEstimate {
    /// The value in units of 1/4.
    pub fn quarters(self) -> i64 {
        match self {
            LoopEstimate::Disconnected => 0,
            LoopEstimate::Parallel => 3,
            LoopEstimate::Antiparallel => -3,
        }
    }

    pub fn value(self) -> f64 {
        self.quarters() as f64 / 4.0
    }

    pub fn exact(self) -> BigRational {
        BigRational::new(BigInt::from(self.quarters()), BigInt::from(4))
    }
}

pub fn loop_estimator(
    loops: &LoopDecomposition,
    i: usize,
    j: usize,
    sublattice: &[Sublattice],
) -> Result<LoopEstimate, VbError> {
    if i == j {
        return Err(VbError::SameSite(i));
    }
    Ok(estimate_unchecked(loops, i, j, sublattice))
}

#[inline]
pub(crate) fn estimate_unchecked(
    loops: &LoopDecomposition,
    i: usize,
    j: usize,
    sublattice: &[Sublattice],
) -> LoopEstimate {
    if !loops.same_loop(i, j) {
        LoopEstimate::Disconnected
    } else if sublattice[i] == sublattice[j] {
        LoopEstimate::Parallel
    } else {
        LoopEstimate::Antiparallel
    }
}

/// Change in the transition-graph loop count if the plaquette `sites`
/// (listed cyclically) is flipped in `flip`, with `other` held fixed.
/// Returns `None` when `flip` does not hold two parallel dimers on the
/// plaquette.
///
/// The walk starts from both flipped dimers at once and stops as soon as
/// either walker closes its loop or reaches the other dimer, so the cost is
/// bounded by the shorter of the paths involved.
pub fn plaquette_flip_delta(flip: &[usize], other: &[usize], sites: [usize; 4]) -> Option<i32> {
    let [p0, p1, p2, p3] = sites;
    // Relabel so that the current dimers are (s0, s1) and (s2, s3) and the
    // flipped ones become (s1, s2) and (s3, s0).
    let [s0, s1, s2, s3] = if flip[p0] == p1 && flip[p2] == p3 {
        [p0, p1, p2, p3]
    } else if flip[p1] == p2 && flip[p3] == p0 {
        [p1, p2, p3, p0]
    } else {
        return None;
    };

    let mut w1 = s1;
    let mut w2 = s3;
    loop {
        let u = other[w1];
        if u == s0 {
            return Some(-1);
        } else if u == s2 {
            return Some(1);
        } else if u == s3 {
            return Some(0);
        }
        w1 = flip[u];

        let v = other[w2];
        if v == s2 {
            return Some(-1);
        } else if v == s0 {
            return Some(1);
        } else if v == s1 {
            return Some(0);
        }
        w2 = flip[v];
    }
}

/// Applies the flip whose effect `plaquette_flip_delta` reports.
pub(crate) fn apply_plaquette_flip(cover: &mut DimerCovering, sites: [usize; 4]) {
    let [p0, p1, p2, p3] = sites;
    if cover.partner(p0) == p1 && cover.partner(p2) == p3 {
        cover.repair(p1, p2, p3, p0);
    } else {
        debug_assert!(cover.partner(p1) == p2 && cover.partner(p3) == p0);
        cover.repair(p0, p1, p2, p3);
    }
}
