//! Row transfer-matrix count of nearest-neighbour dimer coverings. Shares no
//! code with the backtracking enumerator, so the two cross-check each other.

use crate::lattice::Boundary;

/// Appends every outgoing vertical-dimer mask reachable from `occupied`.
fn fill_row(x: usize, width: usize, occupied: u32, out: u32, acc: &mut Vec<u32>) {
    if x == width {
        acc.push(out);
        return;
    }
    let bit = 1u32 << x;
    if occupied & bit != 0 {
        fill_row(x + 1, width, occupied, out, acc);
        return;
    }
    // Vertical dimer to the next row.
    fill_row(x + 1, width, occupied | bit, out | bit, acc);
    // Horizontal dimer to x + 1.
    if x + 1 < width && occupied & (bit << 1) == 0 {
        fill_row(x + 2, width, occupied | bit | (bit << 1), out, acc);
    }
}

fn transitions(width: usize, periodic_x: bool, incoming: u32) -> Vec<u32> {
    let mut acc = Vec::new();
    fill_row(0, width, incoming, 0, &mut acc);
    if periodic_x {
        let wrap = 1u32 | (1u32 << (width - 1));
        if incoming & wrap == 0 {
            fill_row(0, width, incoming | wrap, 0, &mut acc);
        }
    }
    acc
}

/// Number of nearest-neighbour dimer coverings of the `size x size` lattice.
/// `size` must be at least 2 (at least 4 when periodic) and at most 16.
pub fn count_nn_coverings_transfer(size: usize, bc: Boundary) -> u128 {
    assert!((2..=16).contains(&size), "transfer-matrix count supports 2 <= L <= 16");
    let periodic = bc == Boundary::Periodic;
    let n_states = 1usize << size;
    let table: Vec<Vec<u32>> = (0..n_states as u32)
        .map(|s| transitions(size, periodic, s))
        .collect();

    let run_from = |start: usize| -> Vec<u128> {
        let mut dp = vec![0u128; n_states];
        dp[start] = 1;
        for _ in 0..size {
            let mut next = vec![0u128; n_states];
            for (s, &c) in dp.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                for &t in &table[s] {
                    next[t as usize] += c;
                }
            }
            dp = next;
        }
        dp
    };

    if periodic {
        (0..n_states).map(|s| run_from(s)[s]).sum()
    } else {
        run_from(0)[0]
    }
}
