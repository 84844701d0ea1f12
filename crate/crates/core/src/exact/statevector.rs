//! Brute-force statevector oracle for up to ten spins.
//!
//! A VB state is built as an explicit vector in the `2^n` spin basis, each
//! singlet `(|up,down> - |down,up>)/sqrt 2` oriented from its A site to its B
//! site. Amplitudes are kept as integers scaled by `sqrt(2)^(n/2)`, so every
//! expectation value comes out as an exact rational. Nothing here uses the
//! loop rules.

use num_bigint::BigInt;
use num_rational::BigRational;

use super::ExactError;
use crate::lattice::Sublattice;
use crate::vbstate::DimerCovering;

pub const MAX_ORACLE_SITES: usize = 10;

/// Bit `s` of a basis index is 1 when spin `s` points up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statevector {
    n_sites: usize,
    amps: Vec<i64>,
}

impl Statevector {
    pub fn zero(n_sites: usize) -> Result<Self, ExactError> {
        if n_sites > MAX_ORACLE_SITES {
            return Err(ExactError::DimensionGuard {
                sites: n_sites,
                max: MAX_ORACLE_SITES,
            });
        }
        Ok(Statevector {
            n_sites,
            amps: vec![0; 1 << n_sites],
        })
    }

    /// Adds the product of singlets described by `cover`.
    pub fn add_covering(&mut self, cover: &DimerCovering, sublattice: &[Sublattice]) {
        assert_eq!(cover.len(), self.n_sites);
        let dimers: Vec<(usize, usize)> = cover
            .pairs()
            .map(|(s, t)| if sublattice[s] == Sublattice::A { (s, t) } else { (t, s) })
            .collect();
        for choice in 0u32..(1 << dimers.len()) {
            let mut index = 0usize;
            let mut sign = 1i64;
            for (k, &(a, b)) in dimers.iter().enumerate() {
                if choice >> k & 1 == 0 {
                    index |= 1 << a;
                } else {
                    index |= 1 << b;
                    sign = -sign;
                }
            }
            self.amps[index] += sign;
        }
    }

    pub fn from_coverings(coverings: &[DimerCovering], sublattice: &[Sublattice]) -> Result<Self, ExactError> {
        let mut psi = Statevector::zero(sublattice.len())?;
        for c in coverings {
            psi.add_covering(c, sublattice);
        }
        Ok(psi)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn amplitudes(&self) -> &[i64] {
        &self.amps
    }

    /// Unnormalized `<self|other>` in the scaled integer basis.
    pub fn inner(&self, other: &Statevector) -> i128 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(&x, &y)| x as i128 * y as i128)
            .sum()
    }

    /// Four times the unnormalized `<self|S_i.S_j|other>`. Uses
    /// `S_i.S_j = S^z_i S^z_j + (S^+_i S^-_j + S^-_i S^+_j)/2`: diagonal
    /// `+-1/4`, and an exchange of antiparallel spins with amplitude 1/2.
    pub fn spin_spin_quarters(&self, other: &Statevector, i: usize, j: usize) -> i128 {
        if i == j {
            return 3 * self.inner(other);
        }
        let (bi, bj) = (1usize << i, 1usize << j);
        let mut acc = 0i128;
        for (s, &amp) in other.amps.iter().enumerate() {
            if amp == 0 {
                continue;
            }
            let amp = amp as i128;
            let up_i = s & bi != 0;
            let up_j = s & bj != 0;
            if up_i == up_j {
                acc += self.amps[s] as i128 * amp;
            } else {
                acc -= self.amps[s] as i128 * amp;
                acc += 2 * self.amps[s ^ bi ^ bj] as i128 * amp;
            }
        }
        acc
    }

    /// `<S_i.S_j>` in this state (normalized). `i == j` gives 3/4.
    pub fn correlator(&self, i: usize, j: usize) -> BigRational {
        let norm = self.inner(self);
        BigRational::new(
            BigInt::from(self.spin_spin_quarters(self, i, j)),
            BigInt::from(4 * norm),
        )
    }

    /// `<(sum_{s in sites} S_s)^2>`, from all pair correlators.
    pub fn subset_spin_squared(&self, sites: &[usize]) -> BigRational {
        let norm = self.inner(self);
        let quarters: i128 = sites
            .iter()
            .flat_map(|&i| sites.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.spin_spin_quarters(self, i, j))
            .sum();
        BigRational::new(BigInt::from(quarters), BigInt::from(4 * norm))
    }

    pub fn total_spin_squared(&self) -> BigRational {
        let all: Vec<usize> = (0..self.n_sites).collect();
        self.subset_spin_squared(&all)
    }
}

/// `<S_i.S_j>` in the equal-amplitude superposition of `coverings`, by
/// explicit statevector construction.
pub fn statevector_oracle(
    coverings: &[DimerCovering],
    sublattice: &[Sublattice],
    i: usize,
    j: usize,
) -> Result<BigRational, ExactError> {
    let n = sublattice.len();
    for site in [i, j] {
        if site >= n {
            return Err(ExactError::SiteOutOfRange { site, n_sites: n });
        }
    }
    Ok(Statevector::from_coverings(coverings, sublattice)?.correlator(i, j))
}

/// For two single VB states returns the normalized overlap `<a|b>` and the
/// ratio `<a|S_i.S_j|b> / <a|b>`.
pub fn pair_matrix_element(
    a: &DimerCovering,
    b: &DimerCovering,
    sublattice: &[Sublattice],
    i: usize,
    j: usize,
) -> Result<(BigRational, BigRational), ExactError> {
    let va = Statevector::from_coverings(std::slice::from_ref(a), sublattice)?;
    let vb = Statevector::from_coverings(std::slice::from_ref(b), sublattice)?;
    let inner = va.inner(&vb);
    let scale = BigInt::from(1u64) << (sublattice.len() / 2);
    let overlap = BigRational::new(BigInt::from(inner), scale);
    let ratio = BigRational::new(
        BigInt::from(va.spin_spin_quarters(&vb, i, j)),
        BigInt::from(4 * inner),
    );
    Ok((overlap, ratio))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use crate::vbstate::CoveringKind;

    #[test]
    fn singlet_correlator() {
        let sub = [Sublattice::A, Sublattice::B];
        let c = DimerCovering::new(vec![1, 0], CoveringKind::FullBipartite, &sub).unwrap();
        let psi = Statevector::from_coverings(&[c], &sub).unwrap();
        assert_eq!(psi.amplitudes(), &[0, 1, -1, 0]);
        assert_eq!(psi.correlator(0, 1), ratio(-3, 4));
        assert_eq!(psi.correlator(0, 0), ratio(3, 4));
        assert_eq!(psi.total_spin_squared(), ratio(0, 1));
    }

    #[test]
    fn guard() {
        assert!(matches!(
            Statevector::zero(12),
            Err(ExactError::DimensionGuard { sites: 12, .. })
        ));
    }
}
