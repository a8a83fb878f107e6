//! Connectivity events on positivity masks.
//!
//! A configuration enters every event only through which bonds carry a
//! positive (combined) current, so all predicates here take a [`BondSet`].
//! "Off b" is bond deletion: each event we evaluate is monotone in the
//! positivity of a single bond, so stability under changing `n_b` is the same
//! as holding with `n_b = 0`.

use crate::bits::{BondSet, SiteSet};
use crate::error::Result;
use crate::lattice::{DirectedBond, GraphSpec};

/// Adjacency of a graph in mask form.
#[derive(Clone, Debug)]
pub struct Topology {
    n_sites: usize,
    ends: Vec<(usize, usize)>,
    incident: Vec<BondSet>,
}

impl Topology {
    pub fn new(graph: &GraphSpec) -> Result<Self> {
        graph.require_small()?;
        let mut incident = vec![BondSet::EMPTY; graph.n_sites];
        for (i, b) in graph.bonds.iter().enumerate() {
            incident[b.u] = incident[b.u].with(i);
            incident[b.v] = incident[b.v].with(i);
        }
        Ok(Self { n_sites: graph.n_sites, ends: graph.bonds.iter().map(|b| (b.u, b.v)).collect(), incident })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_bonds(&self) -> usize {
        self.ends.len()
    }

    pub fn all_sites(&self) -> SiteSet {
        SiteSet::full(self.n_sites)
    }

    pub fn ends(&self, bond: usize) -> (usize, usize) {
        self.ends[bond]
    }

    pub fn incident(&self, site: usize) -> BondSet {
        self.incident[site]
    }

    /// Bonds with both endpoints in `sites` (B_A).
    pub fn bonds_within(&self, sites: SiteSet) -> BondSet {
        BondSet::from_indices(
            self.ends.iter().enumerate().filter(|(_, &(u, v))| sites.contains(u) && sites.contains(v)).map(|(i, _)| i),
        )
    }

    /// Sites of odd degree in the bond set (the source set of a parity pattern).
    pub fn boundary(&self, odd: BondSet) -> SiteSet {
        odd.iter().fold(SiteSet::EMPTY, |s, b| {
            let (u, v) = self.ends[b];
            s.toggle(u).toggle(v)
        })
    }

    /// Sites reachable from `x` along positive bonds whose endpoints stay in `within`.
    pub fn cluster(&self, pos: BondSet, x: usize, within: SiteSet) -> SiteSet {
        if !within.contains(x) {
            return SiteSet::EMPTY;
        }
        let mut seen = SiteSet::singleton(x);
        let mut stack = SiteSet::singleton(x);
        while let Some(s) = stack.iter().next() {
            stack = stack.without(s);
            for b in pos.intersect(self.incident[s]).iter() {
                let (u, v) = self.ends[b];
                let t = u ^ v ^ s;
                if within.contains(t) && !seen.contains(t) {
                    seen = seen.with(t);
                    stack = stack.with(t);
                }
            }
        }
        seen
    }

    pub fn connected_within(&self, pos: BondSet, x: usize, y: usize, within: SiteSet) -> bool {
        self.cluster(pos, x, within).contains(y)
    }

    pub fn connected(&self, pos: BondSet, x: usize, y: usize) -> bool {
        self.connected_within(pos, x, y, self.all_sites())
    }

    /// Connected in Λ but not inside `A^c`.
    pub fn connected_through(&self, pos: BondSet, x: usize, y: usize, a: SiteSet) -> bool {
        self.connected(pos, x, y) && !self.connected_within(pos, x, y, a.complement(self.n_sites))
    }

    /// `C^b(x)`: the cluster of `x` with bond `b` deleted.
    pub fn cluster_off_bond(&self, pos: BondSet, x: usize, bond: usize) -> SiteSet {
        self.cluster(pos.without(bond), x, self.all_sites())
    }

    /// Directed pivotal bonds for `x ↔ y` from `x`, in the order a walk from `x` crosses them.
    pub fn pivotal_bonds_from(&self, pos: BondSet, x: usize, y: usize) -> Vec<DirectedBond> {
        if x == y || !self.connected(pos, x, y) {
            return Vec::new();
        }
        let mut found: Vec<(usize, DirectedBond)> = Vec::new();
        for b in pos.iter() {
            let c = self.cluster_off_bond(pos, x, b);
            if c.contains(y) {
                continue;
            }
            let (u, v) = self.ends[b];
            let (tail, head) = match (c.contains(u), c.contains(v)) {
                (true, false) => (u, v),
                (false, true) => (v, u),
                _ => continue,
            };
            if self.connected_within(pos, head, y, c.complement(self.n_sites)) {
                found.push((c.len(), DirectedBond { bond: b, tail, head }));
            }
        }
        // Clusters behind successive pivotal bonds are strictly nested.
        found.sort_by_key(|&(size, _)| size);
        found.into_iter().map(|(_, b)| b).collect()
    }

    /// Connected with no pivotal bond; `x ⇒ x` always holds.
    pub fn doubly_connected(&self, pos: BondSet, x: usize, y: usize) -> bool {
        x == y || (self.connected(pos, x, y) && self.pivotal_bonds_from(pos, x, y).is_empty())
    }

    /// `E(v, x; A)`: through `A`, and no pivotal bond whose tail is already reached through `A`.
    pub fn event_e(&self, pos: BondSet, v: usize, x: usize, a: SiteSet) -> bool {
        if a.is_empty() {
            return false;
        }
        if a == self.all_sites() {
            return self.doubly_connected(pos, v, x);
        }
        self.event_e_generic(pos, v, x, a)
    }

    /// The definition evaluated literally, without the `A = ∅` / `A = Λ` shortcuts.
    pub fn event_e_generic(&self, pos: BondSet, v: usize, x: usize, a: SiteSet) -> bool {
        self.connected_through(pos, v, x, a)
            && self.pivotal_bonds_from(pos, v, x).iter().all(|b| !self.connected_through(pos, v, b.tail, a))
    }

    /// `E'(z, x; A)`: through `A` and doubly connected.
    pub fn event_e_prime(&self, pos: BondSet, z: usize, x: usize, a: SiteSet) -> bool {
        self.connected_through(pos, z, x, a) && self.doubly_connected(pos, z, x)
    }

    /// `E''(z, x, v; A)`: `E'` and `z ↔ v`.
    pub fn event_e_double_prime(&self, pos: BondSet, z: usize, x: usize, v: usize, a: SiteSet) -> bool {
        self.event_e_prime(pos, z, x, a) && self.connected(pos, z, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::catalog_graph;

    fn topo(name: &str) -> Topology {
        Topology::new(&catalog_graph(name).unwrap()).unwrap()
    }

    fn bonds(ix: &[usize]) -> BondSet {
        BondSet::from_indices(ix.iter().copied())
    }

    // triangle bonds: 0 = {0,1}, 1 = {1,2}, 2 = {0,2}
    #[test]
    fn connected_examples() {
        let t = topo("triangle");
        let all = t.all_sites();
        assert!(t.connected_within(BondSet::EMPTY, 1, 1, all));
        assert!(!t.connected_within(BondSet::EMPTY, 1, 1, SiteSet::singleton(0)));
        assert!(!t.connected(BondSet::EMPTY, 0, 1));
        assert!(t.connected(bonds(&[0]), 0, 1));
        assert!(!t.connected(bonds(&[0]), 0, 2));
    }

    #[test]
    fn through_examples() {
        let t = topo("triangle");
        let pos = bonds(&[0]);
        assert!(t.connected_through(pos, 0, 1, t.all_sites()));
        assert!(!t.connected_through(pos, 0, 1, SiteSet::EMPTY));
        let p = topo("path-3");
        assert!(p.connected_through(bonds(&[0, 1]), 0, 2, SiteSet::singleton(1)));
    }

    #[test]
    fn cluster_off_bond_examples() {
        let s = topo("single-bond");
        assert_eq!(s.cluster_off_bond(bonds(&[0]), 0, 0), SiteSet::singleton(0));
        let t = topo("triangle");
        assert_eq!(t.cluster_off_bond(bonds(&[0, 1, 2]), 0, 0), SiteSet::full(3));
        assert_eq!(t.cluster_off_bond(BondSet::EMPTY, 2, 1), SiteSet::singleton(2));
    }

    #[test]
    fn pivotal_examples() {
        let s = topo("single-bond");
        assert_eq!(s.pivotal_bonds_from(bonds(&[0]), 0, 1), vec![DirectedBond { bond: 0, tail: 0, head: 1 }]);
        let t = topo("triangle");
        assert!(t.pivotal_bonds_from(bonds(&[0, 1, 2]), 0, 1).is_empty());
        let p = topo("path-3");
        assert_eq!(
            p.pivotal_bonds_from(bonds(&[0, 1]), 2, 0),
            vec![DirectedBond { bond: 1, tail: 2, head: 1 }, DirectedBond { bond: 0, tail: 1, head: 0 }]
        );
    }

    #[test]
    fn double_connection_examples() {
        let s = topo("single-bond");
        assert!(s.doubly_connected(BondSet::EMPTY, 1, 1));
        assert!(!s.doubly_connected(bonds(&[0]), 0, 1));
        let t = topo("triangle");
        assert!(t.doubly_connected(bonds(&[0, 1, 2]), 0, 1));
    }

    #[test]
    fn event_e_examples() {
        let s = topo("single-bond");
        let pos = bonds(&[0]);
        // The only pivotal bond starts at v, which is itself reached through A = {0}.
        assert!(!s.event_e(pos, 0, 1, SiteSet::singleton(0)));
        assert!(s.event_e(pos, 1, 0, SiteSet::singleton(0)));
        assert!(!s.event_e(pos, 0, 1, SiteSet::EMPTY));
        let t = topo("triangle");
        assert!(t.event_e(bonds(&[0, 1, 2]), 0, 1, t.all_sites()));
        assert!(t.event_e_prime(bonds(&[0, 1, 2]), 0, 1, t.all_sites()));
        assert!(!t.event_e_prime(BondSet::EMPTY, 0, 1, t.all_sites()));
        assert!(!t.event_e_double_prime(BondSet::EMPTY, 0, 1, 0, t.all_sites()));
    }

    #[test]
    fn shortcuts_match_generic_evaluator() {
        for name in ["triangle", "square-diag", "K4", "box-2x3"] {
            let t = topo(name);
            let n = t.n_sites();
            for pos in 0..(1u64 << t.n_bonds()) {
                let pos = BondSet(pos);
                for v in 0..n {
                    for x in 0..n {
                        assert!(!t.event_e_generic(pos, v, x, SiteSet::EMPTY));
                        assert_eq!(
                            t.event_e_generic(pos, v, x, t.all_sites()),
                            t.doubly_connected(pos, v, x),
                            "{name} {pos:?} {v} {x}"
                        );
                        assert_eq!(t.event_e_double_prime(pos, v, x, v, t.all_sites()), t.event_e_prime(pos, v, x, t.all_sites()));
                    }
                }
            }
        }
    }

    #[test]
    fn e_on_diagonal_is_membership() {
        let t = topo("square");
        for a in 0..16u64 {
            for pos in 0..16u64 {
                for v in 0..4 {
                    assert_eq!(t.event_e(BondSet(pos), v, v, SiteSet(a)), SiteSet(a).contains(v));
                }
            }
        }
    }

    /// Deletion versus the literal reading of "off b": an event holds off `b`
    /// when it holds for every value of `n_b`, i.e. with `b` both positive and zero.
    #[test]
    fn off_bond_deletion_matches_literal_reading() {
        let t = topo("triangle");
        for pos in 0..8u64 {
            let pos = BondSet(pos);
            for b in 0..3 {
                for x in 0..3 {
                    for y in 0..3 {
                        let literal = t.connected(pos.with(b), x, y) && t.connected(pos.without(b), x, y);
                        assert_eq!(literal, t.cluster_off_bond(pos, x, b).contains(y));
                    }
                }
            }
        }
    }
}
