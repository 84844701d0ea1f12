//! Markov-chain Monte Carlo over pairs of nearest-neighbour dimer coverings
//! `(a, b)` with weight `2^N_loops(a, b)`, measuring the nearest-neighbour
//! spin correlator of the RVB liquid on a torus.
//!
//! Three proposal types are used:
//!
//! * plaquette flips: rotate two parallel dimers on an elementary square in
//!   one replica. The loop-count change is found by a local walk
//!   (`vbstate::plaquette_flip_delta`).
//! * line shifts: when a whole row (column) of one replica is covered by
//!   dimers lying along it, shift them all by one lattice spacing. This
//!   changes the winding number of that replica by one and is what lets the
//!   chain leave a winding sector. The loop-count change is found by a full
//!   recount.
//! * worms: a single-replica dimer worm with uniform choices among all
//!   neighbours of the head (bounces allowed). Its proposal kernel is
//!   symmetric, so the move is accepted like the others. Plaquette flips and
//!   line shifts alone cannot reach every covering: the 4x4 torus has eight
//!   frozen coverings with neither a flippable plaquette nor a straight
//!   alternating line.
//!
//! All moves are accepted with probability `min(1, 2^dN)`.
//!
//! Chains are seeded from a 64-bit seed and a stream index; the generator
//! is ChaCha8 and `RNG_ALGORITHM` names it in every result. A campaign of
//! `k` chains uses streams `0..k` of one seed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Boundary, Lattice, LatticeError, Sublattice};
use crate::vbstate::{
    apply_plaquette_flip, count_loops, estimate_unchecked, plaquette_flip_delta, transition_graph_raw,
    DimerCovering, LoopDecomposition,
};

pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.3): seed_from_u64(seed), set_stream(stream)";
pub const SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MIN_BINS: usize = 32;

#[derive(Debug, Error)]
pub enum McError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("Monte Carlo runs need periodic boundaries")]
    OpenBoundary,
    #[error("need at least {MIN_BINS} bins, got {0}")]
    TooFewBins(usize),
    #[error("n_sweeps = {sweeps} is not a positive multiple of n_bins = {bins}")]
    SweepsNotDivisible { sweeps: usize, bins: usize },
    #[error("update fractions must be non-negative, sum to 1 and include plaquette moves (got {plaquette}, {winding}, {worm})")]
    BadMix { plaquette: f64, winding: f64, worm: f64 },
    #[error("without line shifts or worms the winding sector is frozen; set allow_frozen_winding to acknowledge")]
    FrozenSectors,
    #[error("bin {0} has a non-finite mean")]
    NonFiniteBin(usize),
    #[error("cannot merge results: {0}")]
    Merge(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateMix {
    pub plaquette: f64,
    pub winding: f64,
    pub worm: f64,
}

impl Default for UpdateMix {
    fn default() -> Self {
        UpdateMix {
            plaquette: 0.98,
            winding: 0.01,
            worm: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub size: usize,
    pub bc: Boundary,
    pub seed: u64,
    pub stream: u64,
    pub n_therm: usize,
    pub n_sweeps: usize,
    pub n_bins: usize,
    pub update_mix: UpdateMix,
    pub allow_frozen_winding: bool,
}

impl McConfig {
    /// Periodic `size x size` chain with default thermalization, 64 bins and
    /// 2^16 measurement sweeps.
    pub fn new(size: usize, seed: u64) -> Self {
        McConfig {
            size,
            bc: Boundary::Periodic,
            seed,
            stream: 0,
            n_therm: Self::default_therm(size),
            n_sweeps: 1 << 16,
            n_bins: 64,
            update_mix: UpdateMix::default(),
            allow_frozen_winding: false,
        }
    }

    pub fn default_therm(size: usize) -> usize {
        (100 * size).max(10_000)
    }

    pub fn validate(&self) -> Result<(), McError> {
        Lattice::new(self.size, self.bc)?;
        if self.bc != Boundary::Periodic {
            return Err(McError::OpenBoundary);
        }
        if self.n_bins < MIN_BINS {
            return Err(McError::TooFewBins(self.n_bins));
        }
        if self.n_sweeps == 0 || self.n_sweeps % self.n_bins != 0 {
            return Err(McError::SweepsNotDivisible {
                sweeps: self.n_sweeps,
                bins: self.n_bins,
            });
        }
        let UpdateMix { plaquette, winding, worm } = self.update_mix;
        let ok = plaquette > 0.0
            && winding >= 0.0
            && worm >= 0.0
            && [plaquette, winding, worm].iter().all(|f| f.is_finite())
            && (plaquette + winding + worm - 1.0).abs() <= 1e-12;
        if !ok {
            return Err(McError::BadMix { plaquette, winding, worm });
        }
        if winding == 0.0 && worm == 0.0 && !self.allow_frozen_winding {
            return Err(McError::FrozenSectors);
        }
        Ok(())
    }

    pub fn plaquette_proposals_per_sweep(&self) -> usize {
        self.size * self.size
    }

    fn proposals_for(&self, fraction: f64) -> usize {
        if fraction == 0.0 {
            return 0;
        }
        let n = self.plaquette_proposals_per_sweep() as f64 * fraction / self.update_mix.plaquette;
        (n.round() as usize).max(1)
    }

    /// Line-shift proposals following the `L^2` plaquette proposals of a sweep.
    pub fn winding_proposals_per_sweep(&self) -> usize {
        self.proposals_for(self.update_mix.winding)
    }

    /// Worm proposals closing a sweep.
    pub fn worm_proposals_per_sweep(&self) -> usize {
        self.proposals_for(self.update_mix.worm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LineOrientation {
    /// A row, shifted along x.
    Row,
    /// A column, shifted along y.
    Column,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateCounters {
    pub plaquette_proposed: u64,
    pub plaquette_accepted: u64,
    pub winding_proposed: u64,
    pub winding_eligible: u64,
    pub winding_accepted: u64,
    pub worm_proposed: u64,
    pub worm_accepted: u64,
    /// Head moves summed over all worms.
    pub worm_steps: u64,
}

impl UpdateCounters {
    fn add(&mut self, o: &UpdateCounters) {
        self.plaquette_proposed += o.plaquette_proposed;
        self.plaquette_accepted += o.plaquette_accepted;
        self.winding_proposed += o.winding_proposed;
        self.winding_eligible += o.winding_eligible;
        self.winding_accepted += o.winding_accepted;
        self.worm_proposed += o.worm_proposed;
        self.worm_accepted += o.worm_accepted;
        self.worm_steps += o.worm_steps;
    }

    pub fn plaquette_rate(&self) -> f64 {
        rate(self.plaquette_accepted, self.plaquette_proposed)
    }

    pub fn winding_rate(&self) -> f64 {
        rate(self.winding_accepted, self.winding_proposed)
    }

    pub fn worm_rate(&self) -> f64 {
        rate(self.worm_accepted, self.worm_proposed)
    }
}

fn rate(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Winding numbers `(W_x, W_y)` of one covering: signed dimer crossings of
/// the cut between columns 0 and 1 (rows 0 and 1), each crossing counted
/// `+1` when its left (lower) site is on sublattice A and `-1` otherwise.
/// Plaquette flips leave both unchanged.
pub fn winding_numbers(lattice: &Lattice, cover: &DimerCovering) -> (i32, i32) {
    let l = lattice.size();
    let wx = (0..l)
        .map(|y| lattice.site(0, y))
        .filter(|&s| cover.partner(s) == lattice.site(1, lattice.coords(s).1))
        .map(|s| lattice.sublattice(s).sign())
        .sum();
    let wy = (0..l)
        .map(|x| lattice.site(x, 0))
        .filter(|&s| cover.partner(s) == lattice.site(lattice.coords(s).0, 1))
        .map(|s| lattice.sublattice(s).sign())
        .sum();
    (wx, wy)
}

#[derive(Debug, Clone)]
pub struct McState {
    lattice: Lattice,
    sublattice: Vec<Sublattice>,
    replicas: [DimerCovering; 2],
    n_loops: usize,
    winding: [(i32, i32); 2],
    rng: ChaCha8Rng,
    counters: UpdateCounters,
    stamp: Vec<u32>,
    generation: u32,
    worm_undo: Vec<(usize, usize)>,
}

impl McState {
    /// Both replicas start in the columnar covering.
    pub fn new(cfg: &McConfig) -> Result<Self, McError> {
        let lattice = Lattice::new(cfg.size, cfg.bc)?;
        let cover = DimerCovering::columnar(&lattice);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(cfg.stream);
        let w = winding_numbers(&lattice, &cover);
        let n = lattice.n_sites();
        Ok(McState {
            sublattice: lattice.sublattices(),
            n_loops: n / 2,
            winding: [w, w],
            replicas: [cover.clone(), cover],
            lattice,
            rng,
            counters: UpdateCounters::default(),
            stamp: vec![0; n],
            generation: 0,
            worm_undo: Vec::new(),
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn replica(&self, r: usize) -> &DimerCovering {
        &self.replicas[r]
    }

    /// Loop count tracked incrementally through every accepted move.
    pub fn n_loops(&self) -> usize {
        self.n_loops
    }

    /// `N_loops - L^2/2`.
    pub fn log2_weight(&self) -> i64 {
        self.n_loops as i64 - (self.lattice.n_sites() / 2) as i64
    }

    pub fn winding(&self, r: usize) -> (i32, i32) {
        self.winding[r]
    }

    pub fn counters(&self) -> UpdateCounters {
        self.counters
    }

    pub fn reset_counters(&mut self) {
        self.counters = UpdateCounters::default();
    }

    /// Full decomposition of the current transition graph.
    pub fn loops(&self) -> LoopDecomposition {
        transition_graph_raw(self.replicas[0].partners(), self.replicas[1].partners())
            .expect("replicas share the lattice")
    }

    /// Loop count from scratch, for checking the incremental bookkeeping.
    pub fn recount_loops(&mut self) -> usize {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.fill(0);
            self.generation = 1;
        }
        count_loops(
            self.replicas[0].partners(),
            self.replicas[1].partners(),
            &mut self.stamp,
            self.generation,
        )
    }

    /// Loop-count change of flipping plaquette `q` in replica `r`, or `None`
    /// when it is not flippable there.
    pub fn plaquette_delta(&self, r: usize, q: usize) -> Option<i32> {
        let sites = self.lattice.plaquettes()[q].sites;
        plaquette_flip_delta(self.replicas[r].partners(), self.replicas[1 - r].partners(), sites)
    }

    /// Flips plaquette `q` of replica `r` unconditionally. Returns the loop
    /// change, or `None` (state untouched) when not flippable.
    pub fn flip_plaquette(&mut self, r: usize, q: usize) -> Option<i32> {
        let delta = self.plaquette_delta(r, q)?;
        let sites = self.lattice.plaquettes()[q].sites;
        apply_plaquette_flip(&mut self.replicas[r], sites);
        self.n_loops = (self.n_loops as i64 + delta as i64) as usize;
        Some(delta)
    }

    pub fn plaquette_update(&mut self) -> bool {
        let r = self.rng.gen_range(0..2);
        let q = self.rng.gen_range(0..self.lattice.plaquettes().len());
        self.counters.plaquette_proposed += 1;
        let Some(delta) = self.plaquette_delta(r, q) else {
            return false;
        };
        if !self.metropolis(delta) {
            return false;
        }
        self.flip_plaquette(r, q);
        self.counters.plaquette_accepted += 1;
        true
    }

    fn metropolis(&mut self, delta: i32) -> bool {
        delta >= 0 || self.rng.gen::<f64>() < (delta as f64).exp2()
    }

    fn line_sites(&self, orientation: LineOrientation, line: usize) -> Vec<usize> {
        let l = self.lattice.size();
        (0..l)
            .map(|k| match orientation {
                LineOrientation::Row => self.lattice.site(k, line),
                LineOrientation::Column => self.lattice.site(line, k),
            })
            .collect()
    }

    /// Whether every site of the line is paired with a neighbour on the line.
    pub fn line_shift_eligible(&self, r: usize, orientation: LineOrientation, line: usize) -> bool {
        let sites = self.line_sites(orientation, line);
        let l = sites.len();
        (0..l).all(|k| {
            let p = self.replicas[r].partner(sites[k]);
            p == sites[(k + 1) % l] || p == sites[(k + l - 1) % l]
        })
    }

    /// Shifts every dimer of an eligible line by one spacing and updates the
    /// loop count and winding bookkeeping. Returns the loop change, or
    /// `None` (state untouched) when the line is not eligible.
    pub fn shift_line(&mut self, r: usize, orientation: LineOrientation, line: usize) -> Option<i32> {
        if !self.line_shift_eligible(r, orientation, line) {
            return None;
        }
        let sites = self.line_sites(orientation, line);
        let l = sites.len();
        let starts_even = self.replicas[r].partner(sites[0]) == sites[1];
        let offset = if starts_even { 1 } else { 0 };
        for k in (0..l).step_by(2) {
            self.replicas[r].set_pair(sites[(k + offset) % l], sites[(k + offset + 1) % l]);
        }
        let before = self.n_loops as i64;
        self.n_loops = self.recount_loops();
        let sign = self.lattice.sublattice(sites[0]).sign();
        let change = if starts_even { -sign } else { sign };
        match orientation {
            LineOrientation::Row => self.winding[r].0 += change,
            LineOrientation::Column => self.winding[r].1 += change,
        }
        Some((self.n_loops as i64 - before) as i32)
    }

    pub fn winding_update(&mut self) -> bool {
        let r = self.rng.gen_range(0..2);
        let orientation = if self.rng.gen::<bool>() {
            LineOrientation::Row
        } else {
            LineOrientation::Column
        };
        let line = self.rng.gen_range(0..self.lattice.size());
        self.counters.winding_proposed += 1;
        let Some(delta) = self.shift_line(r, orientation, line) else {
            return false;
        };
        self.counters.winding_eligible += 1;
        if self.metropolis(delta) {
            self.counters.winding_accepted += 1;
            true
        } else {
            // A second shift restores the original line.
            self.shift_line(r, orientation, line);
            false
        }
    }

    /// Runs a worm through replica `r` and returns the loop change, leaving
    /// the new covering in place. `None` (state untouched) if the worm
    /// exceeded `max_steps` head moves.
    pub fn run_worm(&mut self, r: usize, max_steps: usize) -> Option<i32> {
        let n = self.lattice.n_sites();
        let tail = self.rng.gen_range(0..n);
        let mut head = self.replicas[r].partner(tail);
        let mut undo: Vec<(usize, usize)> = Vec::new();
        let mut steps = 0;
        loop {
            let nb = self.lattice.neighbours(head);
            let x = nb[self.rng.gen_range(0..nb.len())];
            steps += 1;
            if x == tail {
                undo.push((head, self.replicas[r].partner(head)));
                undo.push((tail, self.replicas[r].partner(tail)));
                self.replicas[r].set_pair(head, tail);
                break;
            }
            if steps > max_steps {
                for &(s, p) in undo.iter().rev() {
                    self.replicas[r].set_partner_unchecked(s, p);
                }
                self.counters.worm_steps += steps as u64;
                return None;
            }
            let y = self.replicas[r].partner(x);
            undo.push((head, self.replicas[r].partner(head)));
            undo.push((x, y));
            self.replicas[r].set_pair(head, x);
            head = y;
        }
        self.counters.worm_steps += steps as u64;
        let before = self.n_loops as i64;
        self.n_loops = self.recount_loops();
        self.worm_undo = undo;
        Some((self.n_loops as i64 - before) as i32)
    }

    fn undo_worm(&mut self, r: usize, delta: i32) {
        let undo = std::mem::take(&mut self.worm_undo);
        for &(s, p) in undo.iter().rev() {
            self.replicas[r].set_partner_unchecked(s, p);
        }
        self.n_loops = (self.n_loops as i64 - delta as i64) as usize;
    }

    pub fn worm_update(&mut self) -> bool {
        let r = self.rng.gen_range(0..2);
        self.counters.worm_proposed += 1;
        let max_steps = 100 * self.lattice.n_sites();
        let Some(delta) = self.run_worm(r, max_steps) else {
            return false;
        };
        if self.metropolis(delta) {
            self.winding[r] = winding_numbers(&self.lattice, &self.replicas[r]);
            self.counters.worm_accepted += 1;
            true
        } else {
            self.undo_worm(r, delta);
            false
        }
    }

    pub fn sweep(&mut self, cfg: &McConfig) {
        for _ in 0..cfg.plaquette_proposals_per_sweep() {
            self.plaquette_update();
        }
        for _ in 0..cfg.winding_proposals_per_sweep() {
            self.winding_update();
        }
        for _ in 0..cfg.worm_proposals_per_sweep() {
            self.worm_update();
        }
    }

    /// Loop estimator averaged over all nearest-neighbour bonds.
    pub fn measure(&self) -> f64 {
        let loops = self.loops();
        let bonds = self.lattice.bonds();
        let quarters: i64 = bonds
            .iter()
            .map(|b| estimate_unchecked(&loops, b.origin, b.target, &self.sublattice).quarters())
            .sum();
        quarters as f64 / (4.0 * bonds.len() as f64)
    }

    pub fn sector_key(&self) -> String {
        let [(ax, ay), (bx, by)] = self.winding;
        format!("({ax},{ay})|({bx},{by})")
    }
}

/// Count, mean and summed squared deviation of a sample stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn combine(&self, o: &Moments) -> Moments {
        if self.count == 0 {
            return *o;
        }
        if o.count == 0 {
            return *self;
        }
        let n = self.count + o.count;
        let d = o.mean - self.mean;
        Moments {
            count: n,
            mean: self.mean + d * o.count as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.count as f64 * o.count as f64) / n as f64,
        }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub seed: u64,
    pub stream: u64,
    pub n_bins: usize,
    pub samples: Moments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub plaquette: f64,
    pub winding: f64,
    pub worm: f64,
    pub counts: UpdateCounters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub schema_version: u32,
    pub code_version: String,
    pub rng_algorithm: String,
    pub size: usize,
    pub bc: Boundary,
    pub config: McConfig,
    pub chains: Vec<ChainRecord>,
    pub corr_mean: f64,
    pub corr_err: f64,
    pub p_mean: f64,
    pub p_err: f64,
    /// Integrated autocorrelation time in sweeps, from the ratio of the
    /// binned to the naive variance. `None` when the samples do not vary.
    pub tau_int: Option<f64>,
    pub bin_size: usize,
    pub bin_series: Vec<f64>,
    pub acceptance_rates: AcceptanceRates,
    pub sector_histogram: BTreeMap<String, u64>,
}

impl McResult {
    fn assemble(
        config: McConfig,
        chains: Vec<ChainRecord>,
        bin_size: usize,
        bin_series: Vec<f64>,
        counts: UpdateCounters,
        sector_histogram: BTreeMap<String, u64>,
    ) -> Result<Self, McError> {
        if let Some(k) = bin_series.iter().position(|b| !b.is_finite()) {
            return Err(McError::NonFiniteBin(k));
        }
        let n = bin_series.len() as f64;
        let corr_mean = bin_series.iter().sum::<f64>() / n;
        let ss: f64 = bin_series.iter().map(|b| (b - corr_mean).powi(2)).sum();
        let corr_err = (ss / (n * (n - 1.0))).sqrt();
        let samples = chains
            .iter()
            .fold(Moments::default(), |acc, c| acc.combine(&c.samples));
        let naive = samples.variance();
        let tau_int = (naive > 0.0).then(|| bin_size as f64 * (ss / (n - 1.0)) / (2.0 * naive));
        Ok(McResult {
            schema_version: SCHEMA_VERSION,
            code_version: CODE_VERSION.to_string(),
            rng_algorithm: RNG_ALGORITHM.to_string(),
            size: config.size,
            bc: config.bc,
            config,
            chains,
            corr_mean,
            corr_err,
            p_mean: -4.0 / 3.0 * corr_mean,
            p_err: 4.0 / 3.0 * corr_err,
            tau_int,
            bin_size,
            bin_series,
            acceptance_rates: AcceptanceRates {
                plaquette: counts.plaquette_rate(),
                winding: counts.winding_rate(),
                worm: counts.worm_rate(),
                counts,
            },
            sector_histogram,
        })
    }

    /// Pools the bins of two independent chains (or already merged sets of
    /// chains) on the same lattice with the same bin size. Chains are kept
    /// sorted by `(seed, stream)`, so merging is commutative and associative.
    pub fn merge(&self, other: &McResult) -> Result<McResult, McError> {
        if self.size != other.size || self.bc != other.bc {
            return Err(McError::Merge("different lattices".into()));
        }
        if self.bin_size != other.bin_size {
            return Err(McError::Merge(format!(
                "bin sizes differ ({} vs {})",
                self.bin_size, other.bin_size
            )));
        }
        let mut parts: Vec<(&ChainRecord, &[f64])> = self.chain_bins().chain(other.chain_bins()).collect();
        parts.sort_by_key(|(c, _)| (c.seed, c.stream));
        if parts.windows(2).any(|w| (w[0].0.seed, w[0].0.stream) == (w[1].0.seed, w[1].0.stream)) {
            return Err(McError::Merge("the same chain appears twice".into()));
        }
        let chains = parts.iter().map(|(c, _)| (*c).clone()).collect();
        let bins = parts.iter().flat_map(|(_, b)| b.iter().copied()).collect();
        let mut counts = self.acceptance_rates.counts;
        counts.add(&other.acceptance_rates.counts);
        let mut hist = self.sector_histogram.clone();
        for (k, v) in &other.sector_histogram {
            *hist.entry(k.clone()).or_default() += v;
        }
        let config = if (self.config.seed, self.config.stream) <= (other.config.seed, other.config.stream) {
            self.config.clone()
        } else {
            other.config.clone()
        };
        McResult::assemble(config, chains, self.bin_size, bins, counts, hist)
    }

    fn chain_bins(&self) -> impl Iterator<Item = (&ChainRecord, &[f64])> + '_ {
        let mut offset = 0;
        self.chains.iter().map(move |c| {
            let bins = &self.bin_series[offset..offset + c.n_bins];
            offset += c.n_bins;
            (c, bins)
        })
    }

    /// Bin series as CSV with header `bin_index,corr_mean`.
    pub fn bins_csv(&self) -> String {
        let mut out = String::from("bin_index,corr_mean\n");
        for (k, b) in self.bin_series.iter().enumerate() {
            out.push_str(&format!("{k},{b:.17e}\n"));
        }
        out
    }
}

/// Thermalizes, then measures once per sweep and bins the measurements.
pub fn run_chain(cfg: &McConfig) -> Result<McResult, McError> {
    cfg.validate()?;
    let mut state = McState::new(cfg)?;
    for _ in 0..cfg.n_therm {
        state.sweep(cfg);
    }
    state.reset_counters();

    let bin_size = cfg.n_sweeps / cfg.n_bins;
    let mut bins = Vec::with_capacity(cfg.n_bins);
    let mut samples = Moments::default();
    let mut hist = BTreeMap::new();
    for _ in 0..cfg.n_bins {
        let mut sum = 0.0;
        for _ in 0..bin_size {
            state.sweep(cfg);
            let x = state.measure();
            sum += x;
            samples.push(x);
            *hist.entry(state.sector_key()).or_insert(0u64) += 1;
        }
        bins.push(sum / bin_size as f64);
    }
    let chain = ChainRecord {
        seed: cfg.seed,
        stream: cfg.stream,
        n_bins: cfg.n_bins,
        samples,
    };
    McResult::assemble(cfg.clone(), vec![chain], bin_size, bins, state.counters(), hist)
}

/// Runs independent chains concurrently; results come back in input order.
pub fn run_chains(cfgs: &[McConfig]) -> Vec<Result<McResult, McError>> {
    cfgs.par_iter().map(run_chain).collect()
}

/// Runs `n_chains` copies of `cfg` on streams `0..n_chains` of its seed and
/// merges them.
pub fn run_campaign(cfg: &McConfig, n_chains: usize) -> Result<McResult, McError> {
    let cfgs: Vec<McConfig> = (0..n_chains.max(1) as u64)
        .map(|stream| McConfig { stream, ..cfg.clone() })
        .collect();
    let mut results = run_chains(&cfgs).into_iter();
    let first = results.next().expect("at least one chain")?;
    results.try_fold(first, |acc, r| acc.merge(&r?))
}
