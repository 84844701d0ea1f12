//! Square-lattice geometry: sites, nearest-neighbour bonds, plaquettes,
//! sublattices and the spatial symmetry group acting on bonds.
//!
//! Sites are indexed row-major, `index = y * L + x`. Everything downstream
//! (enumeration order, Monte Carlo proposals) relies on this ordering being
//! stable.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("linear size {0} is odd: an odd number of sites admits no perfect matching")]
    OddSize(usize),
    #[error("linear size must be at least 2, got {0}")]
    TooSmall(usize),
    #[error("periodic lattice needs L >= 4 (L = {0} would create duplicate bonds)")]
    PeriodicTooSmall(usize),
    #[error("unknown boundary condition `{0}` (expected `periodic` or `open`)")]
    UnknownBoundary(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Periodic => f.write_str("periodic"),
            Boundary::Open => f.write_str("open"),
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "periodic" | "pbc" => Ok(Boundary::Periodic),
            "open" | "obc" => Ok(Boundary::Open),
            other => Err(LatticeError::UnknownBoundary(other.to_string())),
        }
    }
}

/// Bipartite sublattice label. `A` sites have even `x + y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sublattice {
    A,
    B,
}

impl Sublattice {
    pub fn from_parity(parity: usize) -> Self {
        if parity % 2 == 0 {
            Sublattice::A
        } else {
            Sublattice::B
        }
    }

    /// +1 for A, -1 for B.
    pub fn sign(self) -> i32 {
        match self {
            Sublattice::A => 1,
            Sublattice::B => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    X,
    Y,
}

/// A nearest-neighbour bond. `origin` is the site from which a unit step in
/// `dir` (possibly wrapping) reaches `target`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub origin: usize,
    pub target: usize,
    pub dir: Direction,
}

impl Bond {
    pub fn sites(&self) -> (usize, usize) {
        (self.origin.min(self.target), self.origin.max(self.target))
    }

    pub fn contains(&self, site: usize) -> bool {
        self.origin == site || self.target == site
    }
}

/// Elementary square, sites listed cyclically:
/// `(x, y), (x+1, y), (x+1, y+1), (x, y+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Plaquette {
    pub sites: [usize; 4],
}

/// A site permutation representing one element of the lattice symmetry group.
pub type SitePermutation = Vec<usize>;

#[derive(Debug, Clone)]
pub struct Lattice {
    size: usize,
    bc: Boundary,
    bonds: Vec<Bond>,
    plaquettes: Vec<Plaquette>,
    neighbours: Vec<Vec<usize>>,
    bond_index: HashMap<(usize, usize), usize>,
}

/// A class of bonds related by lattice symmetries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BondOrbit {
    /// Bond indices, ascending.
    pub bonds: Vec<usize>,
    /// Four times the squared distance between the lattice center and the
    /// closest bond midpoint in the orbit (kept integral so ordering is exact).
    pub distance_sq_x4: usize,
}

impl BondOrbit {
    pub fn representative(&self) -> usize {
        self.bonds[0]
    }

    pub fn distance(&self) -> f64 {
        (self.distance_sq_x4 as f64).sqrt() / 2.0
    }
}

impl Lattice {
    pub fn new(size: usize, bc: Boundary) -> Result<Self, LatticeError> {
        if size < 2 {
            return Err(LatticeError::TooSmall(size));
        }
        if size % 2 == 1 {
            return Err(LatticeError::OddSize(size));
        }
        if bc == Boundary::Periodic && size < 4 {
            return Err(LatticeError::PeriodicTooSmall(size));
        }

        let n = size * size;
        let mut bonds = Vec::with_capacity(2 * n);
        for y in 0..size {
            for x in 0..size {
                let s = y * size + x;
                for dir in [Direction::X, Direction::Y] {
                    let (nx, ny) = match dir {
                        Direction::X => (x + 1, y),
                        Direction::Y => (x, y + 1),
                    };
                    if nx >= size || ny >= size {
                        if bc == Boundary::Open {
                            continue;
                        }
                    }
                    let t = (ny % size) * size + nx % size;
                    bonds.push(Bond {
                        origin: s,
                        target: t,
                        dir,
                    });
                }
            }
        }
        bonds.sort_by_key(|b| {
            let (lo, hi) = b.sites();
            (lo, b.dir, hi)
        });

        let mut neighbours = vec![Vec::with_capacity(4); n];
        let mut bond_index = HashMap::with_capacity(bonds.len());
        for (k, b) in bonds.iter().enumerate() {
            neighbours[b.origin].push(b.target);
            neighbours[b.target].push(b.origin);
            bond_index.insert(b.sites(), k);
        }
        for nb in &mut neighbours {
            nb.sort_unstable();
        }

        let cells = match bc {
            Boundary::Periodic => size,
            Boundary::Open => size - 1,
        };
        let mut plaquettes = Vec::with_capacity(cells * cells);
        for y in 0..cells {
            for x in 0..cells {
                let x1 = (x + 1) % size;
                let y1 = (y + 1) % size;
                plaquettes.push(Plaquette {
                    sites: [
                        y * size + x,
                        y * size + x1,
                        y1 * size + x1,
                        y1 * size + x,
                    ],
                });
            }
        }

        Ok(Lattice {
            size,
            bc,
            bonds,
            plaquettes,
            neighbours,
            bond_index,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn boundary(&self) -> Boundary {
        self.bc
    }

    pub fn n_sites(&self) -> usize {
        self.size * self.size
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn plaquettes(&self) -> &[Plaquette] {
        &self.plaquettes
    }

    pub fn neighbours(&self, site: usize) -> &[usize] {
        &self.neighbours[site]
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site % self.size, site / self.size)
    }

    pub fn site(&self, x: usize, y: usize) -> usize {
        (y % self.size) * self.size + x % self.size
    }

    pub fn sublattice(&self, site: usize) -> Sublattice {
        let (x, y) = self.coords(site);
        Sublattice::from_parity(x + y)
    }

    /// Sublattice label of every site, in site order.
    pub fn sublattices(&self) -> Vec<Sublattice> {
        (0..self.n_sites()).map(|s| self.sublattice(s)).collect()
    }

    pub fn bond_between(&self, i: usize, j: usize) -> Option<usize> {
        self.bond_index.get(&(i.min(j), i.max(j))).copied()
    }

    pub fn are_neighbours(&self, i: usize, j: usize) -> bool {
        self.bond_between(i, j).is_some()
    }

    /// All elements of the spatial symmetry group as site permutations:
    /// the point group of the square (8 elements) for open boundaries,
    /// translations times the point group for periodic ones.
    pub fn symmetry_group(&self) -> Vec<SitePermutation> {
        let l = self.size;
        let point_ops: [fn(usize, usize, usize) -> (usize, usize); 8] = [
            |x, y, _| (x, y),
            |x, y, l| (l - 1 - y, x),
            |x, y, l| (l - 1 - x, l - 1 - y),
            |x, y, l| (y, l - 1 - x),
            |x, y, l| (l - 1 - x, y),
            |x, y, l| (x, l - 1 - y),
            |x, y, _| (y, x),
            |x, y, l| (l - 1 - y, l - 1 - x),
        ];
        let shifts: Vec<(usize, usize)> = match self.bc {
            Boundary::Open => vec![(0, 0)],
            Boundary::Periodic => (0..l).flat_map(|dy| (0..l).map(move |dx| (dx, dy))).collect(),
        };
        let mut group = Vec::with_capacity(point_ops.len() * shifts.len());
        for &(dx, dy) in &shifts {
            for op in &point_ops {
                let perm = (0..self.n_sites())
                    .map(|s| {
                        let (x, y) = self.coords(s);
                        let (u, v) = op(x, y, l);
                        self.site(u + dx, v + dy)
                    })
                    .collect();
                group.push(perm);
            }
        }
        group
    }

    /// Image of a bond under a site permutation.
    pub fn map_bond(&self, perm: &[usize], bond: usize) -> Option<usize> {
        let (i, j) = self.bonds[bond].sites();
        self.bond_between(perm[i], perm[j])
    }

    /// Partition of the bonds into symmetry orbits, closest-to-center first.
    pub fn bond_orbits(&self) -> Vec<BondOrbit> {
        let group = self.symmetry_group();
        let mut assigned = vec![false; self.bonds.len()];
        let mut orbits = Vec::new();
        for start in 0..self.bonds.len() {
            if assigned[start] {
                continue;
            }
            let mut members: Vec<usize> = group
                .iter()
                .map(|g| {
                    self.map_bond(g, start)
                        .expect("lattice symmetries map bonds onto bonds")
                })
                .collect();
            members.sort_unstable();
            members.dedup();
            for &m in &members {
                assigned[m] = true;
            }
            let distance_sq_x4 = members
                .iter()
                .map(|&b| self.midpoint_distance_sq_x4(b))
                .min()
                .unwrap_or(0);
            orbits.push(BondOrbit {
                bonds: members,
                distance_sq_x4,
            });
        }
        orbits.sort_by_key(|o| (o.distance_sq_x4, o.bonds[0]));
        orbits
    }

    fn midpoint_distance_sq_x4(&self, bond: usize) -> usize {
        let b = &self.bonds[bond];
        let (x, y) = self.coords(b.origin);
        // Doubled coordinates keep the half-integer midpoint integral.
        let (mx, my) = match b.dir {
            Direction::X => (2 * x + 1, 2 * y),
            Direction::Y => (2 * x, 2 * y + 1),
        };
        let c = self.size - 1;
        let dx = mx.abs_diff(c);
        let dy = my.abs_diff(c);
        dx * dx + dy * dy
    }

    /// Number of partners `j'` equivalent to `j` as seen from `i` (the orbit
    /// of `j` under the stabilizer of `i`), maximized over the two ends of the
    /// pair. This is the `z` entering the Anderson bound for the pair.
    pub fn equivalent_partner_count(&self, i: usize, j: usize) -> usize {
        let group = self.symmetry_group();
        let orbit_size = |fixed: usize, moved: usize| {
            let mut images: Vec<usize> = group
                .iter()
                .filter(|g| g[fixed] == fixed)
                .map(|g| g[moved])
                .collect();
            images.sort_unstable();
            images.dedup();
            images.len()
        };
        orbit_size(i, j).max(orbit_size(j, i))
    }
}
