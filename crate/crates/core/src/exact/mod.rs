//! Exhaustive enumeration and exact two-spin correlators.
//!
//! For an equal-amplitude superposition `|Psi> = sum_a |a>` of bipartite VB
//! states the correlator is
//!
//! ```text
//! <S_i.S_j> = sum_{a,b} 2^{N_loops(a,b)} E_ij(a,b) / sum_{a,b} 2^{N_loops(a,b)}
//! ```
//!
//! with `E_ij` the loop estimator. Weights are powers of two and estimators
//! are multiples of 1/4, so the sums are carried as integers and the result
//! is an exact rational.

mod statevector;
mod transfer;

pub use statevector::{pair_matrix_element, statevector_oracle, Statevector, MAX_ORACLE_SITES};
pub use transfer::count_nn_coverings_transfer;

use itertools::Itertools;
use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Boundary, BondOrbit, Lattice, LatticeError, Sublattice};
use crate::vbstate::{estimate_unchecked, transition_graph_raw, CoveringKind, DimerCovering, VbError};

/// Largest periodic lattice whose coverings are enumerated.
pub const MAX_PERIODIC_SIZE: usize = 6;
/// Largest open lattice whose coverings are enumerated (8x8 open has ~1.3e7
/// coverings, too many to hold in memory as partner tables).
pub const MAX_OPEN_SIZE: usize = 6;
/// Largest number of covering pairs summed in an exact correlator.
pub const MAX_PAIRS: u128 = 50_000_000;
pub const MAX_GAS_N: usize = 6;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Vb(#[from] VbError),
    #[error("{size}x{size} {bc} lattice exceeds the enumeration guard (max L = {max})")]
    SizeGuard { size: usize, bc: Boundary, max: usize },
    #[error("{pairs} covering pairs exceed the exact-sum guard of {max}")]
    PairGuard { pairs: u128, max: u128 },
    #[error("{sites} spins exceed the statevector guard of {max}")]
    DimensionGuard { sites: usize, max: usize },
    #[error("gas size N = {0} is outside 1..={MAX_GAS_N}")]
    GasRange(usize),
    #[error("a single singlet (N = 1) has no same-sublattice pair")]
    NoSameSublatticePair,
    #[error("site {site} out of range for {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("enumeration is empty")]
    Empty,
}

impl ExactError {
    /// True when the error is a refusal to run an oversized computation.
    pub fn is_resource_guard(&self) -> bool {
        matches!(
            self,
            ExactError::SizeGuard { .. } | ExactError::PairGuard { .. } | ExactError::DimensionGuard { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ensemble {
    #[serde(rename = "nn_liquid")]
    NNLiquid,
    #[serde(rename = "bipartite_gas")]
    BipartiteGas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnumerationSource {
    Lattice { size: usize, bc: Boundary },
    Gas { n: usize },
}

#[derive(Debug, Clone)]
pub struct EnumerationResult {
    pub coverings: Vec<DimerCovering>,
    pub sublattice: Vec<Sublattice>,
    pub source: EnumerationSource,
}

impl EnumerationResult {
    pub fn count(&self) -> usize {
        self.coverings.len()
    }

    pub fn n_sites(&self) -> usize {
        self.sublattice.len()
    }

    pub fn ensemble(&self) -> Ensemble {
        match self.source {
            EnumerationSource::Lattice { .. } => Ensemble::NNLiquid,
            EnumerationSource::Gas { .. } => Ensemble::BipartiteGas,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactCorrelator {
    pub value: BigRational,
    pub pair: (usize, usize),
    pub ensemble: Ensemble,
}

/// All nearest-neighbour perfect matchings, by backtracking on the lowest
/// unmatched site and trying its neighbours in ascending order.
pub fn enumerate_nn_coverings(lattice: &Lattice) -> Result<EnumerationResult, ExactError> {
    let max = match lattice.boundary() {
        Boundary::Periodic => MAX_PERIODIC_SIZE,
        Boundary::Open => MAX_OPEN_SIZE,
    };
    if lattice.size() > max {
        return Err(ExactError::SizeGuard {
            size: lattice.size(),
            bc: lattice.boundary(),
            max,
        });
    }

    const FREE: usize = usize::MAX;
    fn descend(lattice: &Lattice, partner: &mut Vec<usize>, from: usize, out: &mut Vec<DimerCovering>) {
        let Some(s) = (from..partner.len()).find(|&s| partner[s] == FREE) else {
            out.push(DimerCovering::from_raw(partner.clone(), CoveringKind::NearestNeighbour));
            return;
        };
        for &t in lattice.neighbours(s) {
            if partner[t] == FREE {
                partner[s] = t;
                partner[t] = s;
                descend(lattice, partner, s + 1, out);
                partner[s] = FREE;
                partner[t] = FREE;
            }
        }
    }

    let mut partner = vec![FREE; lattice.n_sites()];
    let mut coverings = Vec::new();
    descend(lattice, &mut partner, 0, &mut coverings);
    Ok(EnumerationResult {
        coverings,
        sublattice: lattice.sublattices(),
        source: EnumerationSource::Lattice {
            size: lattice.size(),
            bc: lattice.boundary(),
        },
    })
}

/// Sublattice labels of the abstract `2N`-site gas: even sites are A, odd B.
pub fn gas_sublattice(n: usize) -> Vec<Sublattice> {
    (0..2 * n).map(Sublattice::from_parity).collect()
}

/// All `N!` pairings of the A sites `0, 2, 4, ...` with the B sites
/// `1, 3, 5, ...`, in lexicographic order of the permutation.
pub fn enumerate_bipartite_pairings(n: usize) -> Result<EnumerationResult, ExactError> {
    if !(1..=MAX_GAS_N).contains(&n) {
        return Err(ExactError::GasRange(n));
    }
    let coverings = (0..n)
        .permutations(n)
        .map(|perm| {
            let mut partner = vec![0; 2 * n];
            for (k, &m) in perm.iter().enumerate() {
                partner[2 * k] = 2 * m + 1;
                partner[2 * m + 1] = 2 * k;
            }
            DimerCovering::from_raw(partner, CoveringKind::FullBipartite)
        })
        .collect();
    Ok(EnumerationResult {
        coverings,
        sublattice: gas_sublattice(n),
        source: EnumerationSource::Gas { n },
    })
}

/// Exact correlators for every requested site pair, from one double sum over
/// covering pairs. The outer index is split across threads; the integer
/// partial sums combine associatively so the result does not depend on the
/// split.
pub fn exact_correlators(
    enumeration: &EnumerationResult,
    pairs: &[(usize, usize)],
) -> Result<Vec<ExactCorrelator>, ExactError> {
    let m = enumeration.count();
    if m == 0 {
        return Err(ExactError::Empty);
    }
    let n_pairs = (m as u128) * (m as u128);
    if n_pairs > MAX_PAIRS {
        return Err(ExactError::PairGuard {
            pairs: n_pairs,
            max: MAX_PAIRS,
        });
    }
    let n_sites = enumeration.n_sites();
    for &(i, j) in pairs {
        for site in [i, j] {
            if site >= n_sites {
                return Err(ExactError::SiteOutOfRange { site, n_sites });
            }
        }
        if i == j {
            return Err(VbError::SameSite(i).into());
        }
    }

    let sub = &enumeration.sublattice;
    let covers = &enumeration.coverings;
    let zero = || (0i128, vec![0i128; pairs.len()]);
    let (den, num) = covers
        .par_iter()
        .map(|a| {
            let (mut den, mut num) = zero();
            for b in covers {
                let loops = transition_graph_raw(a.partners(), b.partners())
                    .expect("coverings of one enumeration share a site set");
                let w = 1i128 << loops.n_loops();
                den += w;
                for (acc, &(i, j)) in num.iter_mut().zip(pairs) {
                    *acc += w * estimate_unchecked(&loops, i, j, sub).quarters() as i128;
                }
            }
            (den, num)
        })
        .reduce(zero, |(d1, mut n1), (d2, n2)| {
            for (x, y) in n1.iter_mut().zip(n2) {
                *x += y;
            }
            (d1 + d2, n1)
        });

    let ensemble = enumeration.ensemble();
    Ok(pairs
        .iter()
        .zip(num)
        .map(|(&pair, q)| ExactCorrelator {
            value: BigRational::new(BigInt::from(q), BigInt::from(4 * den)),
            pair,
            ensemble,
        })
        .collect())
}

/// `<S_i.S_j>` in the nearest-neighbour RVB liquid on `lattice`.
pub fn exact_nn_correlator(lattice: &Lattice, i: usize, j: usize) -> Result<ExactCorrelator, ExactError> {
    let enumeration = enumerate_nn_coverings(lattice)?;
    Ok(exact_correlators(&enumeration, &[(i, j)])?.remove(0))
}

/// Exact nearest-neighbour correlator of one bond orbit.
#[derive(Debug, Clone)]
pub struct OrbitCorrelator {
    pub orbit: BondOrbit,
    /// Correlator of the orbit's representative (lowest-index) bond.
    pub correlator: ExactCorrelator,
    /// Whether every bond of the orbit gave the same exact value.
    pub uniform: bool,
}

/// Correlators of all bonds of `lattice`, grouped by symmetry orbit
/// (closest-to-center orbit first).
pub fn exact_orbit_correlators(
    lattice: &Lattice,
) -> Result<(EnumerationResult, Vec<OrbitCorrelator>), ExactError> {
    let enumeration = enumerate_nn_coverings(lattice)?;
    let pairs: Vec<(usize, usize)> = lattice.bonds().iter().map(|b| b.sites()).collect();
    let all = exact_correlators(&enumeration, &pairs)?;
    let table = lattice
        .bond_orbits()
        .into_iter()
        .map(|orbit| {
            let first = &all[orbit.representative()];
            let uniform = orbit.bonds.iter().all(|&b| all[b].value == first.value);
            OrbitCorrelator {
                correlator: first.clone(),
                orbit,
                uniform,
            }
        })
        .collect();
    Ok((enumeration, table))
}

/// `<S_i.S_j>` in the bipartite RVB gas of `2N` spins, for a pair on opposite
/// sublattices (sites 0 and 1) or on the same sublattice (sites 0 and 2).
pub fn exact_gas_correlator(n: usize, same_sublattice: bool) -> Result<ExactCorrelator, ExactError> {
    if !(1..=MAX_GAS_N).contains(&n) {
        return Err(ExactError::GasRange(n));
    }
    if same_sublattice && n == 1 {
        return Err(ExactError::NoSameSublatticePair);
    }
    let enumeration = enumerate_bipartite_pairings(n)?;
    let pair = if same_sublattice { (0, 2) } else { (0, 1) };
    Ok(exact_correlators(&enumeration, &[pair])?.remove(0))
}
