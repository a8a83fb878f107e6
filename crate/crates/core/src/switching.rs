//! Exact subgraph counting on labeled multigraphs.
//!
//! An integer current `N` becomes the multigraph `G_N` with `N_b` labeled
//! parallel edges on bond `b`. The switching identities are statements about
//! numbers of edge subsets with prescribed odd-degree sets; everything here
//! is integer arithmetic by brute force.

use crate::bits::SiteSet;
use crate::budget::Budget;
use crate::error::{invalid, Result};
use crate::lattice::GraphSpec;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// An integer current on the bonds of a graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MultiCurrent {
    pub n_sites: usize,
    pub ends: Vec<(usize, usize)>,
    pub counts: Vec<u32>,
}

/// Edge `bℓ` of `G_N`: copy `label ∈ 1..=N_b` of bond `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LabeledEdge {
    pub bond: usize,
    pub label: u32,
    pub u: usize,
    pub v: usize,
}

/// A set of labeled edges, bit `e` standing for `edges()[e]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SubgraphSelection(pub u64);

impl SubgraphSelection {
    pub fn contains(self, e: usize) -> bool {
        (self.0 >> e) & 1 == 1
    }

    pub fn from_edges<I: IntoIterator<Item = usize>>(edges: I) -> Self {
        Self(edges.into_iter().fold(0, |m, e| m | (1 << e)))
    }
}

impl MultiCurrent {
    pub fn new(graph: &GraphSpec, counts: Vec<u32>) -> Result<Self> {
        Self::from_bonds(graph.n_sites, graph.bonds.iter().map(|b| (b.u, b.v)).collect(), counts)
    }

    pub fn from_bonds(n_sites: usize, ends: Vec<(usize, usize)>, counts: Vec<u32>) -> Result<Self> {
        if ends.len() != counts.len() {
            return invalid("one count per bond is required");
        }
        if n_sites > 64 || ends.iter().any(|&(u, v)| u >= n_sites || v >= n_sites || u == v) {
            return invalid("bond endpoints must be distinct sites among at most 64");
        }
        let mc = Self { n_sites, ends, counts };
        if mc.total_edges() > 64 {
            return invalid("at most 64 labeled edges are supported");
        }
        Ok(mc)
    }

    pub fn total_edges(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    /// Labeled edges, bond-major, labels from 1.
    pub fn edges(&self) -> Vec<LabeledEdge> {
        self.ends
            .iter()
            .zip(&self.counts)
            .enumerate()
            .flat_map(|(b, (&(u, v), &n))| (1..=n).map(move |label| LabeledEdge { bond: b, label, u, v }))
            .collect()
    }

    /// Index of edge `bℓ` in [`edges`](Self::edges).
    pub fn edge_index(&self, bond: usize, label: u32) -> Option<usize> {
        if bond >= self.counts.len() || label == 0 || label > self.counts[bond] {
            return None;
        }
        Some(self.counts[..bond].iter().map(|&c| c as usize).sum::<usize>() + label as usize - 1)
    }

    pub fn boundary(&self, s: SubgraphSelection) -> SiteSet {
        self.edges()
            .iter()
            .enumerate()
            .filter(|(e, _)| s.contains(*e))
            .fold(SiteSet::EMPTY, |acc, (_, ed)| acc.toggle(ed.u).toggle(ed.v))
    }

    /// `v ↔ x` along bonds with `N_b > 0` whose endpoints lie in `within`.
    pub fn connected_within(&self, v: usize, x: usize, within: SiteSet) -> bool {
        if !within.contains(v) {
            return false;
        }
        let mut seen = SiteSet::singleton(v);
        let mut stack = vec![v];
        while let Some(s) = stack.pop() {
            for (&(a, b), &n) in self.ends.iter().zip(&self.counts) {
                if n == 0 {
                    continue;
                }
                let t = if a == s { b } else if b == s { a } else { continue };
                if within.contains(t) && !seen.contains(t) {
                    seen = seen.with(t);
                    stack.push(t);
                }
            }
        }
        seen.contains(x)
    }
}

/// Both sides of the switching identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SwitchingCounts {
    pub lhs: u64,
    pub rhs: u64,
}

/// Counts selections `S` of edges on `B_{A^c}` with prescribed boundary:
/// `lhs = 1[v↔x in A^c] · #{∂S = V △ {v,x}}`, `rhs = 1[v↔x in A^c] · #{∂S = V}`,
/// with `V = ∅` by default. For `V = ∅` the indicator on the left is implied.
pub fn count_switching_sides(
    mc: &MultiCurrent,
    a: SiteSet,
    v: usize,
    x: usize,
    vset: Option<SiteSet>,
    budget: &Budget,
) -> Result<SwitchingCounts> {
    if v == x || v >= mc.n_sites || x >= mc.n_sites {
        return invalid("need two distinct sites v and x");
    }
    let ac = a.complement(mc.n_sites);
    let edges = mc.edges();
    let allowed: Vec<LabeledEdge> = edges.into_iter().filter(|e| ac.contains(e.u) && ac.contains(e.v)).collect();
    budget.check_single("switching subsets", 2f64.powi(allowed.len() as i32))?;
    let base = vset.unwrap_or(SiteSet::EMPTY);
    let target_l = base.toggle(v).toggle(x);
    let masks: Vec<SiteSet> = allowed.iter().map(|e| SiteSet::singleton(e.u).with(e.v)).collect();
    let (mut l, mut r) = (0u64, 0u64);
    let mut boundary = SiteSet::EMPTY;
    // Gray-code walk: one edge flips per step.
    for i in 0u64..(1u64 << allowed.len()) {
        if i > 0 {
            boundary = boundary.sym_diff(masks[i.trailing_zeros() as usize]);
        }
        l += u64::from(boundary == target_l);
        r += u64::from(boundary == base);
    }
    let ind = u64::from(mc.connected_within(v, x, ac));
    Ok(SwitchingCounts { lhs: ind * l, rhs: ind * r })
}

/// `Π_b 2^{N_b − 1}`: both sides for a path whose end points are the sources.
pub fn path_closed_form(counts: &[u32]) -> Option<u64> {
    counts.iter().try_fold(1u64, |acc, &n| if n == 0 { None } else { acc.checked_mul(1u64 << (n - 1)) })
}

/// Checks that `omega` is a self-avoiding edge path from `v` to `x` whose
/// edges have both endpoints in `allowed`.
pub fn is_edge_path(mc: &MultiCurrent, omega: &[usize], v: usize, x: usize, allowed: SiteSet) -> bool {
    let edges = mc.edges();
    let mut at = v;
    let mut visited = SiteSet::singleton(v);
    for &e in omega {
        let Some(ed) = edges.get(e) else { return false };
        if !allowed.contains(ed.u) || !allowed.contains(ed.v) {
            return false;
        }
        let next = if ed.u == at { ed.v } else if ed.v == at { ed.u } else { return false };
        if visited.contains(next) {
            return false;
        }
        visited = visited.with(next);
        at = next;
    }
    at == x && allowed.contains(v)
}

/// `S △ ω` on edges.
pub fn switching_bijection(s: SubgraphSelection, omega: &[usize]) -> SubgraphSelection {
    SubgraphSelection(s.0 ^ SubgraphSelection::from_edges(omega.iter().copied()).0)
}

/// Cardinalities of the two partition sets compared by the GHS–BK switching lemma.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GhsCounts {
    pub s: u64,
    pub s_prime: u64,
}

struct PathSearch<'a> {
    edges: &'a [LabeledEdge],
    pairs: &'a [(usize, usize)],
}

impl PathSearch<'_> {
    /// Whether edge-disjoint self-avoiding paths `ω_i ⊆ S_0 ∪ S_i` exist jointly.
    fn exists(&self, assign: &[u8], i: usize, used: u64) -> bool {
        if i == self.pairs.len() {
            return true;
        }
        let (z, zp) = self.pairs[i];
        let label = (i + 1) as u8;
        self.extend(assign, i, label, z, zp, SiteSet::singleton(z), used)
    }

    #[allow(clippy::too_many_arguments)]
    fn extend(&self, assign: &[u8], i: usize, label: u8, at: usize, goal: usize, visited: SiteSet, used: u64) -> bool {
        if at == goal {
            return self.exists(assign, i + 1, used);
        }
        for (e, ed) in self.edges.iter().enumerate() {
            if (used >> e) & 1 == 1 || (assign[e] != 0 && assign[e] != label) {
                continue;
            }
            let next = if ed.u == at { ed.v } else if ed.v == at { ed.u } else { continue };
            if visited.contains(next) {
                continue;
            }
            if self.extend(assign, i, label, next, goal, visited.with(next), used | (1 << e)) {
                return true;
            }
        }
        false
    }
}

/// Brute force over all assignments of labeled edges to `S_0, …, S_k`.
///
/// `𝔖` asks for `∂S_0 = V`, `∂S_i = ∅`; `𝔖'` for `∂S_0 = V △ {z_1,z'_1} △ … `,
/// `∂S_i = {z_i, z'_i}`. Both additionally need pairwise edge-disjoint
/// paths `ω_i: z_i → z'_i` inside `S_0 ∪ S_i`, searched for jointly.
pub fn verify_ghs_bk(mc: &MultiCurrent, vset: SiteSet, pairs: &[(usize, usize)], budget: &Budget) -> Result<GhsCounts> {
    let k = pairs.len();
    if k == 0 || k > 3 {
        return invalid("between one and three source pairs are supported");
    }
    if pairs.iter().any(|&(z, zp)| z == zp || z >= mc.n_sites || zp >= mc.n_sites) {
        return invalid("each pair needs two distinct sites of the graph");
    }
    let edges = mc.edges();
    let m = edges.len();
    budget.check_single("edge assignments", ((k + 1) as f64).powi(m as i32))?;
    let ends: Vec<SiteSet> = edges.iter().map(|e| SiteSet::singleton(e.u).with(e.v)).collect();
    let pair_sets: Vec<SiteSet> = pairs.iter().map(|&(z, zp)| SiteSet::singleton(z).with(zp)).collect();
    let v_prime = pair_sets.iter().fold(vset, |acc, p| acc.sym_diff(*p));
    let search = PathSearch { edges: &edges, pairs };
    let radix = (k + 1) as u64;
    let total = radix.pow(m as u32);
    // Chunks are indexed by the leading digits; integer partials add in any order.
    let lead = m.min(4);
    let tail_len = m - lead;
    let tail_total = radix.pow(tail_len as u32);
    let (s, s_prime) = (0..radix.pow(lead as u32))
        .into_par_iter()
        .map(|head| {
            let mut assign = vec![0u8; m];
            let (mut s, mut sp) = (0u64, 0u64);
            for t in 0..tail_total {
                let code = head * tail_total + t;
                debug_assert!(code < total);
                let mut c = code;
                let mut bnd = vec![SiteSet::EMPTY; k + 1];
                for e in (0..m).rev() {
                    let d = (c % radix) as usize;
                    c /= radix;
                    assign[e] = d as u8;
                    bnd[d] = bnd[d].sym_diff(ends[e]);
                }
                let in_s = bnd[0] == vset && bnd[1..].iter().all(|b| b.is_empty());
                let in_sp = bnd[0] == v_prime && bnd[1..].iter().zip(&pair_sets).all(|(b, p)| b == p);
                if (in_s || in_sp) && search.exists(&assign, 0, 0) {
                    s += u64::from(in_s);
                    sp += u64::from(in_sp);
                }
            }
            (s, sp)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(GhsCounts { s, s_prime })
}

/// The two partition sets behind the `π^(0)` bound, `k = 2`, sources `{o, x}`.
///
/// `double` counts `(S_0, S_1, S_2)` with `∂S_0 = {o,x}`, `∂S_1 = ∂S_2 = ∅`
/// and two bond-disjoint `o–x` paths in `S_0`; `all_odd` counts partitions
/// with `∂S_i = {o,x}` for all three parts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DoubleConnectionCounts {
    pub double: u64,
    pub all_odd: u64,
}

pub fn double_connection_counts(mc: &MultiCurrent, o: usize, x: usize, budget: &Budget) -> Result<DoubleConnectionCounts> {
    if o == x || o >= mc.n_sites || x >= mc.n_sites {
        return invalid("need two distinct sites o and x");
    }
    let edges = mc.edges();
    let m = edges.len();
    budget.check_single("edge assignments", 3f64.powi(m as i32))?;
    let ends: Vec<SiteSet> = edges.iter().map(|e| SiteSet::singleton(e.u).with(e.v)).collect();
    let ox = SiteSet::from_indices([o, x]);
    let doubly = |bonds: &[bool]| {
        let sub = |skip: Option<usize>| {
            let counts: Vec<u32> = bonds.iter().enumerate().map(|(b, &on)| u32::from(on && Some(b) != skip)).collect();
            let view = MultiCurrent { n_sites: mc.n_sites, ends: mc.ends.clone(), counts };
            view.connected_within(o, x, SiteSet::full(mc.n_sites))
        };
        sub(None) && (0..bonds.len()).filter(|&b| bonds[b]).all(|b| sub(Some(b)))
    };
    let (double, all_odd) = (0..3u64.pow(m as u32))
        .into_par_iter()
        .map(|code| {
            let mut c = code;
            let mut bnd = [SiteSet::EMPTY; 3];
            let mut in_s0 = vec![false; mc.ends.len()];
            for e in 0..m {
                let d = (c % 3) as usize;
                c /= 3;
                bnd[d] = bnd[d].sym_diff(ends[e]);
                if d == 0 {
                    in_s0[edges[e].bond] = true;
                }
            }
            let all = u64::from(bnd.iter().all(|&b| b == ox));
            let dbl = u64::from(bnd[0] == ox && bnd[1].is_empty() && bnd[2].is_empty() && doubly(&in_s0));
            (dbl, all)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(DoubleConnectionCounts { double, all_odd })
}

/// A random switching instance: graph on 3–5 sites with at most 5 bonds,
/// integer currents with `Σ N_b ≤ max_edges`, a random `A` and `v ≠ x`.
#[derive(Clone, Debug, Serialize)]
pub struct SwitchingInstance {
    pub current: MultiCurrent,
    pub a: SiteSet,
    pub v: usize,
    pub x: usize,
}

fn random_current<R: Rng>(rng: &mut R, max_edges: u32) -> MultiCurrent {
    let n = rng.gen_range(3..=5);
    let mut all: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    all.shuffle(rng);
    let nb = rng.gen_range(2..=5.min(all.len()));
    let mut ends: Vec<(usize, usize)> = all[..nb].to_vec();
    ends.sort_unstable();
    let mut counts = vec![0u32; nb];
    let budget = rng.gen_range(1..=max_edges);
    for _ in 0..budget {
        let b = rng.gen_range(0..nb);
        counts[b] += 1;
    }
    MultiCurrent::from_bonds(n, ends, counts).expect("valid random current")
}

pub fn random_switching_instance<R: Rng>(rng: &mut R, max_edges: u32) -> SwitchingInstance {
    let current = random_current(rng, max_edges);
    let n = current.n_sites;
    let a = SiteSet((rng.gen::<u64>()) & ((1 << n) - 1));
    let v = rng.gen_range(0..n);
    let x = (v + rng.gen_range(1..n)) % n;
    SwitchingInstance { current, a, v, x }
}

#[derive(Clone, Debug, Serialize)]
pub struct GhsInstance {
    pub current: MultiCurrent,
    pub vset: SiteSet,
    pub pairs: Vec<(usize, usize)>,
}

/// Random GHS–BK instance with `k` pairs; `V` is a symmetric difference of
/// random pairs so that both sets can be non-empty.
pub fn random_ghs_instance<R: Rng>(rng: &mut R, k: usize, max_edges: u32) -> GhsInstance {
    let current = random_current(rng, max_edges);
    let n = current.n_sites;
    let pick = |rng: &mut R| {
        let z = rng.gen_range(0..n);
        (z, (z + rng.gen_range(1..n)) % n)
    };
    let pairs: Vec<(usize, usize)> = (0..k).map(|_| pick(rng)).collect();
    let mut vset = SiteSet::EMPTY;
    for _ in 0..rng.gen_range(0..=2) {
        let (a, b) = pick(rng);
        vset = vset.toggle(a).toggle(b);
    }
    GhsInstance { current, vset, pairs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path(counts: Vec<u32>) -> MultiCurrent {
        let n = counts.len() + 1;
        MultiCurrent::from_bonds(n, (0..n - 1).map(|i| (i, i + 1)).collect(), counts).unwrap()
    }

    #[test]
    fn five_bond_path_instance() {
        let mc = path(vec![3, 3, 1, 5, 1]);
        let c = count_switching_sides(&mc, SiteSet::EMPTY, 0, 5, None, &Budget::default()).unwrap();
        assert_eq!(c, SwitchingCounts { lhs: 256, rhs: 256 });
        assert_eq!(path_closed_form(&mc.counts), Some(256));
    }

    #[test]
    fn blocked_and_empty_currents() {
        let b = Budget::default();
        let mc = path(vec![3, 3, 1, 5, 1]);
        // Site 2 in A cuts every path from 0 to 5.
        let c = count_switching_sides(&mc, SiteSet::singleton(2), 0, 5, None, &b).unwrap();
        assert_eq!(c, SwitchingCounts { lhs: 0, rhs: 0 });
        let zero = path(vec![0, 0]);
        assert_eq!(count_switching_sides(&zero, SiteSet::EMPTY, 0, 2, None, &b).unwrap(), SwitchingCounts { lhs: 0, rhs: 0 });
        assert!(count_switching_sides(&zero, SiteSet::EMPTY, 1, 1, None, &b).is_err());
    }

    #[test]
    fn bijection_is_an_involution() {
        let mc = path(vec![3, 3, 1, 5, 1]);
        let omega: Vec<usize> = (0..5).map(|b| mc.edge_index(b, 1).unwrap()).collect();
        assert!(is_edge_path(&mc, &omega, 0, 5, SiteSet::full(6)));
        let s = SubgraphSelection::from_edges(omega.iter().copied());
        assert_eq!(switching_bijection(s, &omega), SubgraphSelection(0));
        assert_eq!(switching_bijection(SubgraphSelection(0), &omega), s);
        // A selection with boundary {0, 5} maps to an even one and back.
        let s = SubgraphSelection::from_edges([0, 1, 2, 4, 6, 7, 8, 11, 12]);
        assert_eq!(mc.boundary(s), SiteSet::from_indices([0, 5]));
        let t = switching_bijection(s, &omega);
        assert!(mc.boundary(t).is_empty());
        assert_eq!(switching_bijection(t, &omega), s);
    }

    #[test]
    fn ghs_examples() {
        let b = Budget::default();
        let tri = MultiCurrent::from_bonds(3, vec![(0, 1), (1, 2), (0, 2)], vec![1, 1, 1]).unwrap();
        let c = verify_ghs_bk(&tri, SiteSet::from_indices([0, 1]), &[(0, 1)], &b).unwrap();
        assert_eq!(c.s, c.s_prime);
        let zero = MultiCurrent::from_bonds(3, vec![(0, 1), (1, 2)], vec![0, 0]).unwrap();
        assert_eq!(verify_ghs_bk(&zero, SiteSet::EMPTY, &[(0, 2)], &b).unwrap(), GhsCounts { s: 0, s_prime: 0 });
        let two = MultiCurrent::from_bonds(2, vec![(0, 1)], vec![2]).unwrap();
        let ox = SiteSet::from_indices([0, 1]);
        assert_eq!(verify_ghs_bk(&two, ox, &[(0, 1), (0, 1)], &b).unwrap(), GhsCounts { s: 0, s_prime: 0 });
    }

    /// Joint path existence does not make the two sets equinumerous once
    /// `k ≥ 2`; the deviation goes both ways. Counts were checked by hand.
    #[test]
    fn ghs_two_pairs_counterexamples() {
        let b = Budget::default();
        let ox = SiteSet::from_indices([0, 1]);
        // Five parallel edges: parities (odd, even, even) vs (odd, odd, odd).
        let five = MultiCurrent::from_bonds(2, vec![(0, 1)], vec![5]).unwrap();
        assert_eq!(verify_ghs_bk(&five, ox, &[(0, 1), (0, 1)], &b).unwrap(), GhsCounts { s: 61, s_prime: 60 });
        let path = MultiCurrent::from_bonds(3, vec![(0, 1), (1, 2)], vec![3, 3]).unwrap();
        let oz = SiteSet::from_indices([0, 2]);
        assert_eq!(verify_ghs_bk(&path, oz, &[(0, 2), (0, 2)], &b).unwrap(), GhsCounts { s: 49, s_prime: 36 });
        let star = MultiCurrent::from_bonds(5, vec![(1, 4), (2, 3), (2, 4)], vec![2, 2, 2]).unwrap();
        assert_eq!(verify_ghs_bk(&star, SiteSet::EMPTY, &[(3, 4), (3, 2)], &b).unwrap(), GhsCounts { s: 6, s_prime: 12 });
    }

    #[test]
    fn ghs_single_pair_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = Budget::default();
        for _ in 0..50 {
            let inst = random_ghs_instance(&mut rng, 1, 10);
            let c = verify_ghs_bk(&inst.current, inst.vset, &inst.pairs, &b).unwrap();
            assert_eq!(c.s, c.s_prime, "{inst:?}");
        }
    }

    #[test]
    fn double_connection_bound() {
        let b = Budget::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..60 {
            let inst = random_ghs_instance(&mut rng, 1, 9);
            let (o, x) = inst.pairs[0];
            let c = double_connection_counts(&inst.current, o, x, &b).unwrap();
            assert!(c.double <= c.all_odd, "{inst:?} {c:?}");
        }
        // A 4-cycle: with single edges site 0 cannot be odd while S_0 uses both its bonds.
        let sq = MultiCurrent::from_bonds(4, vec![(0, 1), (1, 2), (2, 3), (0, 3)], vec![1, 1, 1, 1]).unwrap();
        let c = double_connection_counts(&sq, 0, 2, &b).unwrap();
        assert_eq!(c.double, 0);
        let sq2 = MultiCurrent::from_bonds(4, vec![(0, 1), (1, 2), (2, 3), (0, 3)], vec![1, 1, 2, 2]).unwrap();
        let c = double_connection_counts(&sq2, 0, 2, &b).unwrap();
        assert!(c.double > 0 && c.double <= c.all_odd, "{c:?}");
    }

    #[test]
    fn random_switching_instances_balance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = Budget::default();
        for _ in 0..40 {
            let inst = random_switching_instance(&mut rng, 10);
            let c = count_switching_sides(&inst.current, inst.a, inst.v, inst.x, None, &b).unwrap();
            assert_eq!(c.lhs, c.rhs, "{inst:?}");
            let vset = SiteSet((rng.gen::<u64>()) & ((1 << inst.current.n_sites) - 1));
            let g = count_switching_sides(&inst.current, inst.a, inst.v, inst.x, Some(vset), &b).unwrap();
            assert_eq!(g.lhs, g.rhs, "{inst:?} V = {vset:?}");
        }
    }
}
