//! The memoised expansion engine against a literal nested enumeration.
//!
//! The reference below walks every `(m, n)` pair with the plain three-class
//! reduction on every level, evaluates connectivity with its own adjacency-list
//! search, finds pivotal bonds by deletion, and takes restricted correlations
//! from the spin oracle.

use lacelab_core::currents::{BondState, BondWeights};
use lacelab_core::expansion::Expansion;
use lacelab_core::lattice::catalog_graph;
use lacelab_core::spin_oracle::{partition_function, two_point};
use lacelab_core::{Budget, GraphSpec, SiteSet};

struct Ref<'a> {
    g: &'a GraphSpec,
    p: f64,
    budget: Budget,
}

impl Ref<'_> {
    fn n(&self) -> usize {
        self.g.n_sites
    }

    fn reach(&self, pos: &[bool], x: usize, within: &[bool]) -> Vec<bool> {
        let mut seen = vec![false; self.n()];
        if !within[x] {
            return seen;
        }
        seen[x] = true;
        let mut stack = vec![x];
        while let Some(s) = stack.pop() {
            for (i, b) in self.g.bonds.iter().enumerate() {
                if !pos[i] {
                    continue;
                }
                let t = if b.u == s { b.v } else if b.v == s { b.u } else { continue };
                if within[t] && !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen
    }

    fn conn(&self, pos: &[bool], x: usize, y: usize) -> bool {
        self.reach(pos, x, &vec![true; self.n()])[y]
    }

    fn through(&self, pos: &[bool], x: usize, y: usize, a: &[bool]) -> bool {
        let ac: Vec<bool> = a.iter().map(|&v| !v).collect();
        self.conn(pos, x, y) && !self.reach(pos, x, &ac)[y]
    }

    /// Tails of bonds whose deletion disconnects `v` from `x`.
    fn pivot_tails(&self, pos: &[bool], v: usize, x: usize) -> Vec<usize> {
        let mut tails = vec![];
        for (i, b) in self.g.bonds.iter().enumerate() {
            if !pos[i] {
                continue;
            }
            let mut off = pos.to_vec();
            off[i] = false;
            if !self.conn(&off, v, x) {
                tails.push(if self.conn(&off, v, b.u) { b.u } else { b.v });
            }
        }
        tails
    }

    fn event_e(&self, pos: &[bool], v: usize, x: usize, a: &[bool]) -> bool {
        self.through(pos, v, x, a) && (v == x || self.pivot_tails(pos, v, x).iter().all(|&t| !self.through(pos, v, t, a)))
    }

    fn classes(&self, k: usize) -> Vec<Vec<BondState>> {
        let mut out = vec![vec![]];
        for _ in 0..k {
            out = out.into_iter().flat_map(|c| BondState::ALL.iter().map(move |&s| {
                let mut c = c.clone();
                c.push(s);
                c
            })).collect();
        }
        out
    }

    fn sources(&self, states: &[BondState]) -> Vec<bool> {
        let mut odd = vec![false; self.n()];
        for (b, s) in self.g.bonds.iter().zip(states) {
            if s.is_odd() {
                odd[b.u] ^= true;
                odd[b.v] ^= true;
            }
        }
        odd
    }

    fn weight(&self, states: &[BondState]) -> f64 {
        self.g.bonds.iter().zip(states).map(|(b, &s)| BondWeights::new(self.p, b.j).of(s)).product()
    }

    fn to_set(mask: &[bool]) -> SiteSet {
        SiteSet::from_indices(mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i))
    }

    /// Innermost value of `π^(k)` (`remainder = false`) or `R^(k)` started at `v` with set `a`.
    fn nested(&self, v: usize, a: &[bool], k: usize, x: usize, remainder: bool) -> f64 {
        let n = self.n();
        if !a.iter().any(|&b| b) {
            return 0.0;
        }
        let ac: Vec<bool> = a.iter().map(|&b| !b).collect();
        let inner: Vec<bool> = self.g.bonds.iter().map(|b| ac[b.u] && ac[b.v]).collect();
        let z_ac = partition_function(self.g, self.p, 0.0, Self::to_set(&ac), &self.budget).unwrap();
        let z = partition_function(self.g, self.p, 0.0, SiteSet::full(n), &self.budget).unwrap();
        let nb = self.g.bonds.len();
        let mut total = 0.0;
        for m in self.classes(nb) {
            if m.iter().zip(&inner).any(|(s, &ok)| !ok && *s != BondState::Zero) || self.sources(&m).iter().any(|&o| o) {
                continue;
            }
            let wm = self.weight(&m) / z_ac;
            for nn in self.classes(nb) {
                let src = self.sources(&nn);
                let odd: Vec<usize> = (0..n).filter(|&i| src[i]).collect();
                let u = match odd.as_slice() {
                    [] => v,
                    [s, t] if *s == v => *t,
                    [s, t] if *t == v => *s,
                    _ => continue,
                };
                let pos: Vec<bool> = m.iter().zip(&nn).map(|(a, b)| a.is_positive() || b.is_positive()).collect();
                if !self.event_e(&pos, v, u, a) {
                    continue;
                }
                let w = wm * self.weight(&nn) / z;
                if k == 0 {
                    if u == x && !remainder {
                        total += w;
                    }
                    continue;
                }
                for (i, b) in self.g.bonds.iter().enumerate() {
                    for (tail, head) in [(b.u, b.v), (b.v, b.u)] {
                        if tail != u {
                            continue;
                        }
                        let mut off = pos.clone();
                        off[i] = false;
                        let c = self.reach(&off, v, &vec![true; n]);
                        let tau = self.g.tau(self.p, i);
                        let val = if remainder && k == 1 {
                            let cc: Vec<bool> = c.iter().map(|&b| !b).collect();
                            two_point(self.g, self.p, SiteSet::full(n), head, x, &self.budget).unwrap()
                                - two_point(self.g, self.p, Self::to_set(&cc), head, x, &self.budget).unwrap()
                        } else {
                            self.nested(head, &c, k - 1, x, remainder)
                        };
                        total += w * tau * val;
                    }
                }
            }
        }
        total
    }
}

fn compare(g: &GraphSpec, p: f64) {
    let budget = Budget::default();
    let r = Ref { g, p, budget };
    let mut ex = Expansion::new(g, p, &budget).unwrap();
    let all = vec![true; g.n_sites];
    for k in 0..=2 {
        let pi = ex.pi(k).unwrap();
        for x in 0..g.n_sites {
            let want = r.nested(g.origin, &all, k, x, false);
            assert!((pi[x] - want).abs() < 1e-13, "{} pi^({k})({x}): {} vs {want}", g.name, pi[x]);
        }
    }
    for k in 1..=2 {
        let rem = ex.remainder(k).unwrap();
        for x in 0..g.n_sites {
            let want = r.nested(g.origin, &all, k, x, true);
            assert!((rem[x] - want).abs() < 1e-13, "{} R^({k})({x}): {} vs {want}", g.name, rem[x]);
        }
    }
}

#[test]
fn single_bond_matches_reference() {
    compare(&catalog_graph("single-bond").unwrap(), 0.8);
}

#[test]
fn path_matches_reference() {
    compare(&catalog_graph("path-3").unwrap(), 0.6);
}

#[test]
fn triangle_matches_reference() {
    compare(&catalog_graph("triangle").unwrap(), 0.5);
}

#[test]
fn mixed_sign_triangle_matches_reference() {
    let g = catalog_graph("triangle").unwrap().with_couplings(&[0.9, -1.1, 0.5]).unwrap();
    compare(&g, 0.7);
}
