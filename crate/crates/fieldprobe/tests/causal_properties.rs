//! Property tests for the discrete causal structure: monotonicity,
//! transitivity, complement and hull identities, checked by brute-force
//! cell enumeration on small lattices.

use fieldprobe::{Cell, Lattice, Region};
use proptest::prelude::*;

fn lat() -> Lattice {
    Lattice::new(12, 12, 0.7, 1.0).unwrap()
}

fn cells_strategy() -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0usize..12, 0usize..12), 1..6)
}

fn region_of(cells: &[(usize, usize)]) -> Region {
    Region::new(lat(), cells.iter().map(|&(t, x)| Cell::new(t, x))).unwrap()
}

/// Brute-force J+ by scanning every cell pair.
fn brute_future(s: &Region) -> Region {
    let l = s.lattice();
    let mut out = Vec::new();
    for t in 0..l.n_t {
        for x in 0..l.n_x {
            let inside = s
                .cells()
                .any(|c| t >= c.t && l.circ_dist(x, c.x) <= t - c.t);
            if inside {
                out.push(Cell::new(t, x));
            }
        }
    }
    Region::new(l, out).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn future_matches_brute_force(cells in cells_strategy()) {
        let s = region_of(&cells);
        prop_assert_eq!(s.causal_future().unwrap(), brute_future(&s));
    }

    #[test]
    fn future_is_monotone_and_idempotent(a in cells_strategy(), b in cells_strategy()) {
        let ra = region_of(&a);
        let mut both = a.clone();
        both.extend(b.iter().copied());
        let rb = region_of(&both); // ra subset of rb
        let ja = ra.causal_future().unwrap();
        let jb = rb.causal_future().unwrap();
        prop_assert!(ja.is_subset(&jb));
        prop_assert_eq!(ja.causal_future().unwrap(), ja.clone());
    }

    #[test]
    fn complement_disjoint_from_influence(cells in cells_strategy()) {
        let k = region_of(&cells);
        let perp = k.causal_complement().unwrap();
        let j = k.causal_influence().unwrap();
        prop_assert!(perp.intersection(&j).unwrap().is_empty());
        // double complement contains the region
        if !perp.is_empty() {
            prop_assert!(k.is_subset(&perp.causal_complement().unwrap()));
        }
    }

    #[test]
    fn in_out_and_hull_cover_lattice(cells in prop::collection::vec((2usize..10, 0usize..12), 1..5)) {
        let k = region_of(&cells);
        let (m_plus, m_minus) = k.in_out_regions().unwrap();
        let hull = k.causal_hull().unwrap();
        let union = m_plus.union(&m_minus).unwrap().union(&hull).unwrap();
        prop_assert_eq!(union, Region::full(lat()));
        prop_assert_eq!(
            m_plus.intersection(&m_minus).unwrap(),
            k.causal_complement().unwrap()
        );
    }

    #[test]
    fn hull_is_smallest_causally_convex_superset(cells in cells_strategy()) {
        let k = region_of(&cells);
        let hull = k.causal_hull().unwrap();
        prop_assert!(k.is_subset(&hull));
        prop_assert!(hull.is_causally_convex().unwrap());
        // no causally convex proper subset of the hull contains k: check
        // by removing any single hull cell not in k
        for cell in hull.cells() {
            if k.contains(cell) {
                continue;
            }
            let smaller = hull
                .difference(&Region::new(lat(), [cell]).unwrap())
                .unwrap();
            if smaller.is_empty() {
                continue;
            }
            let convex = smaller.is_causally_convex().unwrap();
            prop_assert!(!convex || !k.is_subset(&smaller));
        }
    }
}
