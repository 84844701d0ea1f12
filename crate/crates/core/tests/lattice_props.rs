use proptest::prelude::*;
use rvb_core::lattice::{Boundary, Lattice, Sublattice};

fn lattices() -> impl Strategy<Value = Lattice> {
    prop_oneof![
        (1usize..=8).prop_map(|h| Lattice::new(2 * h, Boundary::Open).unwrap()),
        (2usize..=8).prop_map(|h| Lattice::new(2 * h, Boundary::Periodic).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn degree_sum_is_twice_the_bond_count(lat in lattices()) {
        let degrees: usize = (0..lat.n_sites()).map(|s| lat.neighbours(s).len()).sum();
        prop_assert_eq!(degrees, 2 * lat.bonds().len());
    }

    #[test]
    fn every_bond_joins_the_two_sublattices(lat in lattices()) {
        for b in lat.bonds() {
            prop_assert_ne!(lat.sublattice(b.origin), lat.sublattice(b.target));
        }
        let a = lat.sublattices().iter().filter(|&&s| s == Sublattice::A).count();
        prop_assert_eq!(2 * a, lat.n_sites());
    }

    #[test]
    fn neighbour_relation_is_symmetric(lat in lattices()) {
        for s in 0..lat.n_sites() {
            for &t in lat.neighbours(s) {
                prop_assert!(lat.neighbours(t).contains(&s));
                prop_assert!(lat.bond_between(s, t).is_some());
            }
        }
    }

    #[test]
    fn orbits_partition_the_bonds_and_are_closed(lat in lattices()) {
        let orbits = lat.bond_orbits();
        let mut seen = vec![0usize; lat.bonds().len()];
        for orbit in &orbits {
            for &b in &orbit.bonds {
                seen[b] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));

        let mut orbit_of = vec![0usize; lat.bonds().len()];
        for (k, orbit) in orbits.iter().enumerate() {
            for &b in &orbit.bonds {
                orbit_of[b] = k;
            }
        }
        for g in lat.symmetry_group() {
            for b in 0..lat.bonds().len() {
                let image = lat.map_bond(&g, b).expect("symmetries map bonds to bonds");
                prop_assert_eq!(orbit_of[image], orbit_of[b]);
            }
        }
        prop_assert!(orbits.windows(2).all(|w| w[0].distance_sq_x4 <= w[1].distance_sq_x4));
    }
}

#[test]
fn expected_counts() {
    for (l, bc, sites, bonds, plaquettes) in [
        (2, Boundary::Open, 4, 4, 1),
        (4, Boundary::Open, 16, 24, 9),
        (4, Boundary::Periodic, 16, 32, 16),
        (16, Boundary::Periodic, 256, 512, 256),
    ] {
        let lat = Lattice::new(l, bc).unwrap();
        assert_eq!((lat.n_sites(), lat.bonds().len(), lat.plaquettes().len()), (sites, bonds, plaquettes));
    }
}

#[test]
fn two_by_two_open_has_a_single_orbit() {
    let lat = Lattice::new(2, Boundary::Open).unwrap();
    let orbits = lat.bond_orbits();
    assert_eq!(orbits.len(), 1);
    assert_eq!(orbits[0].bonds, vec![0, 1, 2, 3]);
}

#[test]
fn open_four_orbit_sizes() {
    let lat = Lattice::new(4, Boundary::Open).unwrap();
    let sizes: Vec<usize> = lat.bond_orbits().iter().map(|o| o.bonds.len()).collect();
    assert_eq!(sizes.iter().sum::<usize>(), 24);
    assert_eq!(sizes[0], 4);
}

#[test]
fn periodic_lattices_are_bond_transitive() {
    for l in [4, 6, 8] {
        let lat = Lattice::new(l, Boundary::Periodic).unwrap();
        assert_eq!(lat.bond_orbits().len(), 1);
        assert_eq!(lat.equivalent_partner_count(0, 1), 4);
    }
}

#[test]
fn symmetry_group_orders() {
    assert_eq!(Lattice::new(4, Boundary::Open).unwrap().symmetry_group().len(), 8);
    assert_eq!(Lattice::new(4, Boundary::Periodic).unwrap().symmetry_group().len(), 128);
}
