//! Random-current sums with per-bond state reduction.
//!
//! Every event in the expansion reads a current only through the parity and
//! positivity of each `n_b`, so the integer sum on a bond collapses into three
//! classes with weights `1`, `cosh(pJ) − 1` and `sinh(pJ)`. For a pair
//! `(m, n)` on a bond of `B_{A^c}` the nine combinations of classes collapse
//! further into five: what survives is combined positivity and the two
//! parities, so the three ways to be even-even and positive merge.

use crate::bits::{BondSet, SiteSet};
use crate::budget::Budget;
use crate::connectivity::Topology;
use crate::error::{invalid, Result};
use crate::lattice::GraphSpec;
use crate::sum::CompensatedSum;
use std::collections::BTreeMap;

/// Class of an integer current on one bond.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BondState {
    Zero,
    EvenPositive,
    Odd,
}

impl BondState {
    pub const ALL: [BondState; 3] = [BondState::Zero, BondState::EvenPositive, BondState::Odd];

    pub fn is_positive(self) -> bool {
        self != BondState::Zero
    }

    pub fn is_odd(self) -> bool {
        self == BondState::Odd
    }
}

/// Marginal weights `Σ (pJ)^n / n!` over each class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BondWeights {
    pub cosh: f64,
    pub sinh: f64,
    /// `cosh − 1`, computed as `2 sinh²(pJ/2)` to keep relative accuracy at small `pJ`.
    pub even_positive: f64,
}

impl BondWeights {
    pub fn new(p: f64, j: f64) -> Self {
        let x = p * j;
        let h = (0.5 * x).sinh();
        Self { cosh: x.cosh(), sinh: x.sinh(), even_positive: 2.0 * h * h }
    }

    pub fn of(self, s: BondState) -> f64 {
        match s {
            BondState::Zero => 1.0,
            BondState::EvenPositive => self.even_positive,
            BondState::Odd => self.sinh,
        }
    }

    /// `cosh² − 1`, the even-even positive pair class.
    fn pair_even_positive(self) -> f64 {
        self.even_positive * (self.cosh + 1.0)
    }
}

/// One visited single-current class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurrentView {
    pub positive: BondSet,
    pub odd: BondSet,
    pub sources: SiteSet,
    pub weight: f64,
}

/// One visited pair class; `weight` is normalised by `Z_{A^c} Z_Λ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairView {
    /// Bonds where `m + n` is positive.
    pub positive: BondSet,
    pub m_odd: BondSet,
    pub n_odd: BondSet,
    pub m_sources: SiteSet,
    pub n_sources: SiteSet,
    pub weight: f64,
}

struct Level {
    bond: usize,
    ends: SiteSet,
    /// (positive, m odd, n odd, weight)
    options: Vec<(bool, bool, bool, f64)>,
}

fn single_levels(graph: &GraphSpec, p: f64, support: BondSet) -> Vec<Level> {
    support
        .iter()
        .map(|b| {
            let w = BondWeights::new(p, graph.bonds[b].j);
            Level {
                bond: b,
                ends: SiteSet::singleton(graph.bonds[b].u).with(graph.bonds[b].v),
                options: BondState::ALL.iter().map(|&s| (s.is_positive(), false, s.is_odd(), w.of(s))).collect(),
            }
        })
        .collect()
}

/// Pair classes in lexicographic bond order: five classes on `B_{A^c}`, the
/// three `n`-classes elsewhere (where `m ≡ 0`).
fn pair_levels(graph: &GraphSpec, p: f64, m_support: BondSet) -> Vec<Level> {
    (0..graph.bonds.len())
        .map(|b| {
            let w = BondWeights::new(p, graph.bonds[b].j);
            let options = if m_support.contains(b) {
                vec![
                    (false, false, false, 1.0),
                    (true, false, false, w.pair_even_positive()),
                    (true, false, true, w.cosh * w.sinh),
                    (true, true, false, w.sinh * w.cosh),
                    (true, true, true, w.sinh * w.sinh),
                ]
            } else {
                BondState::ALL.iter().map(|&s| (s.is_positive(), false, s.is_odd(), w.of(s))).collect()
            };
            Level { bond: b, ends: SiteSet::singleton(graph.bonds[b].u).with(graph.bonds[b].v), options }
        })
        .collect()
}

#[derive(Clone, Copy)]
struct Partial {
    positive: BondSet,
    m_odd: BondSet,
    n_odd: BondSet,
    m_src: SiteSet,
    n_src: SiteSet,
    weight: f64,
}

fn walk(levels: &[Level], i: usize, at: Partial, leaf: &mut dyn FnMut(&Partial)) {
    if i == levels.len() {
        leaf(&at);
        return;
    }
    let lv = &levels[i];
    for &(pos, mo, no, w) in &lv.options {
        if w == 0.0 {
            continue;
        }
        let mut next = at;
        next.weight *= w;
        if pos {
            next.positive = next.positive.with(lv.bond);
        }
        if mo {
            next.m_odd = next.m_odd.with(lv.bond);
            next.m_src = next.m_src.sym_diff(lv.ends);
        }
        if no {
            next.n_odd = next.n_odd.with(lv.bond);
            next.n_src = next.n_src.sym_diff(lv.ends);
        }
        walk(levels, i + 1, next, leaf);
    }
}

const START: Partial = Partial {
    positive: BondSet::EMPTY,
    m_odd: BondSet::EMPTY,
    n_odd: BondSet::EMPTY,
    m_src: SiteSet::EMPTY,
    n_src: SiteSet::EMPTY,
    weight: 1.0,
};

fn check_support(graph: &GraphSpec, support: BondSet) -> Result<()> {
    graph.require_small()?;
    if !support.is_subset(graph.all_bonds()) {
        return invalid("support contains bonds outside the graph");
    }
    Ok(())
}

/// Visits every current class on `support` with `∂n = sources` (any source
/// set when `None`) and returns the compensated sum of the visitor's values.
/// Classes of zero weight are skipped.
pub fn enumerate_currents<F>(
    graph: &GraphSpec,
    p: f64,
    support: BondSet,
    sources: Option<SiteSet>,
    budget: &Budget,
    mut visitor: F,
) -> Result<f64>
where
    F: FnMut(&CurrentView) -> f64,
{
    check_support(graph, support)?;
    budget.check_single("current sweep", 3f64.powi(support.len() as i32))?;
    let levels = single_levels(graph, p, support);
    let mut acc = CompensatedSum::new();
    walk(&levels, 0, START, &mut |c| {
        if sources.is_none_or(|s| s == c.n_src) {
            acc.add(visitor(&CurrentView { positive: c.positive, odd: c.n_odd, sources: c.n_src, weight: c.weight }));
        }
    });
    Ok(acc.value())
}

/// `Σ_{∂n=∅} w(n)` on `support`.
pub fn partition_function_currents(graph: &GraphSpec, p: f64, support: BondSet, budget: &Budget) -> Result<f64> {
    enumerate_currents(graph, p, support, Some(SiteSet::EMPTY), budget, |c| c.weight)
}

/// `⟨φ_x φ_y⟩_Λ = Σ_{∂n=x△y} w / Σ_{∂n=∅} w`.
pub fn two_point_via_currents(graph: &GraphSpec, p: f64, x: usize, y: usize, budget: &Budget) -> Result<f64> {
    if x >= graph.n_sites || y >= graph.n_sites {
        return invalid("unknown site");
    }
    let table = CurrentTable::build(graph, p, graph.all_bonds(), budget)?;
    Ok(table.weight_with_sources(SiteSet::singleton(x).toggle(y)) / table.weight_with_sources(SiteSet::EMPTY))
}

/// Number of pair classes visited for a given `A`.
pub fn pair_sweep_size(graph: &GraphSpec, a: SiteSet) -> Result<f64> {
    let topo = Topology::new(graph)?;
    let inner = topo.bonds_within(a.complement(graph.n_sites)).len() as i32;
    Ok(5f64.powi(inner) * 3f64.powi(graph.bonds.len() as i32 - inner))
}

/// Visits every pair class with `m` on `B_{A^c}`, `∂m = sources_m` and
/// `∂n = sources_n` (`None` = unconstrained). Weights are divided by
/// `Z_{A^c} Z_Λ`, both taken from current sums.
pub fn enumerate_current_pairs<F>(
    graph: &GraphSpec,
    p: f64,
    a: SiteSet,
    sources_m: Option<SiteSet>,
    sources_n: Option<SiteSet>,
    budget: &Budget,
    mut visitor: F,
) -> Result<f64>
where
    F: FnMut(&PairView) -> f64,
{
    let topo = Topology::new(graph)?;
    let n = graph.n_sites;
    if !a.is_subset(SiteSet::full(n)) {
        return invalid("A is not a subset of the sites");
    }
    let ac = a.complement(n);
    if let Some(sm) = sources_m {
        if !sm.is_subset(ac) {
            return invalid("sources of m must lie in the complement of A");
        }
    }
    budget.check_pair("pair sweep", pair_sweep_size(graph, a)?)?;
    let m_support = topo.bonds_within(ac);
    let norm = partition_function_currents(graph, p, m_support, budget)?
        * partition_function_currents(graph, p, graph.all_bonds(), budget)?;
    let levels = pair_levels(graph, p, m_support);
    let mut acc = CompensatedSum::new();
    walk(&levels, 0, START, &mut |c| {
        if sources_m.is_none_or(|s| s == c.m_src) && sources_n.is_none_or(|s| s == c.n_src) {
            acc.add(visitor(&PairView {
                positive: c.positive,
                m_odd: c.m_odd,
                n_odd: c.n_odd,
                m_sources: c.m_src,
                n_sources: c.n_src,
                weight: c.weight / norm,
            }));
        }
    });
    Ok(acc.value())
}

/// Single-current weights aggregated by (positivity, sources), unnormalised.
#[derive(Clone, Debug)]
pub struct CurrentTable {
    pub entries: Vec<(BondSet, SiteSet, f64)>,
}

impl CurrentTable {
    pub fn build(graph: &GraphSpec, p: f64, support: BondSet, budget: &Budget) -> Result<Self> {
        let mut map: BTreeMap<(BondSet, SiteSet), CompensatedSum> = BTreeMap::new();
        enumerate_currents(graph, p, support, None, budget, |c| {
            map.entry((c.positive, c.sources)).or_default().add(c.weight);
            0.0
        })?;
        Ok(Self { entries: map.into_iter().map(|((b, s), w)| (b, s, w.value())).collect() })
    }

    pub fn weight_with_sources(&self, sources: SiteSet) -> f64 {
        let mut acc = CompensatedSum::new();
        for &(_, s, w) in &self.entries {
            if s == sources {
                acc.add(w);
            }
        }
        acc.value()
    }
}

/// Normalised pair weights with `∂m = ∅`, aggregated by (combined positivity, `∂n`).
#[derive(Clone, Debug)]
pub struct PairTable {
    pub a: SiteSet,
    pub entries: Vec<(BondSet, SiteSet, f64)>,
}

impl PairTable {
    pub fn build(graph: &GraphSpec, p: f64, a: SiteSet, budget: &Budget) -> Result<Self> {
        let mut map: BTreeMap<(BondSet, SiteSet), CompensatedSum> = BTreeMap::new();
        enumerate_current_pairs(graph, p, a, Some(SiteSet::EMPTY), None, budget, |c| {
            map.entry((c.positive, c.n_sources)).or_default().add(c.weight);
            0.0
        })?;
        Ok(Self { a, entries: map.into_iter().map(|((b, s), w)| (b, s, w.value())).collect() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{catalog_graph, Bond};
    use crate::spin_oracle;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn single_bond_sweeps() {
        let b = Budget::default();
        let g = GraphSpec::new("b", 2, vec![Bond { u: 0, v: 1, j: 0.9 }], 0).unwrap();
        let all = g.all_bonds();
        let p = 0.8;
        let x = p * 0.9;
        let z = enumerate_currents(&g, p, all, Some(SiteSet::EMPTY), &b, |c| c.weight).unwrap();
        assert!(rel(z, f64::cosh(x)) < 1e-15);
        let s = enumerate_currents(&g, p, all, Some(SiteSet::full(2)), &b, |c| c.weight).unwrap();
        assert!(rel(s, f64::sinh(x)) < 1e-15);
        let odd = enumerate_currents(&g, p, all, Some(SiteSet::singleton(0)), &b, |c| c.weight).unwrap();
        assert_eq!(odd, 0.0);
        assert!(rel(two_point_via_currents(&g, p, 0, 1, &b).unwrap(), f64::tanh(x)) < 1e-15);
        assert_eq!(two_point_via_currents(&g, p, 1, 1, &b).unwrap(), 1.0);
    }

    #[test]
    fn triangle_two_point_matches_spins() {
        let b = Budget::default();
        let g = catalog_graph("triangle").unwrap();
        for p in [0.2, 0.5, 1.0] {
            let spin = spin_oracle::two_point(&g, p, SiteSet::full(3), 0, 1, &b).unwrap();
            assert!(rel(two_point_via_currents(&g, p, 0, 1, &b).unwrap(), spin) < 1e-12);
        }
    }

    #[test]
    fn small_arguments_keep_relative_accuracy() {
        let w = BondWeights::new(1e-9, 1.0);
        assert!(rel(w.even_positive, 0.5e-18) < 1e-12);
    }

    #[test]
    fn pairs_with_a_everything_normalise_to_one() {
        let b = Budget::default();
        let g = catalog_graph("square").unwrap();
        let all = SiteSet::full(4);
        let total =
            enumerate_current_pairs(&g, 0.6, all, Some(SiteSet::EMPTY), Some(SiteSet::EMPTY), &b, |c| c.weight).unwrap();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pairs_marginalise_to_single_current() {
        let b = Budget::default();
        let g = catalog_graph("triangle").unwrap();
        let sources = SiteSet::from_indices([0, 1]);
        for a in [SiteSet::singleton(0), SiteSet::EMPTY, SiteSet::singleton(2)] {
            let s = enumerate_current_pairs(&g, 0.7, a, Some(SiteSet::EMPTY), Some(sources), &b, |c| c.weight).unwrap();
            assert!(rel(s, two_point_via_currents(&g, 0.7, 0, 1, &b).unwrap()) < 1e-13);
        }
    }

    #[test]
    fn five_class_reduction_matches_nine_class_sweep() {
        // Brute force over 3 × 3 classes per bond of B_{A^c}.
        let b = Budget::default();
        let g = catalog_graph("path-3").unwrap().with_couplings(&[0.7, -1.2]).unwrap();
        let p = 0.9;
        let a = SiteSet::EMPTY;
        let mut by_key: BTreeMap<(u64, u64, u64, u64), f64> = BTreeMap::new();
        enumerate_current_pairs(&g, p, a, None, None, &b, |c| {
            *by_key.entry((c.positive.0, c.m_odd.0, c.n_odd.0, 0)).or_default() += c.weight;
            0.0
        })
        .unwrap();
        let mut brute: BTreeMap<(u64, u64, u64, u64), f64> = BTreeMap::new();
        let w: Vec<BondWeights> = g.bonds.iter().map(|bd| BondWeights::new(p, bd.j)).collect();
        let z = partition_function_currents(&g, p, g.all_bonds(), &b).unwrap();
        for code in 0..81u32 {
            let (mut pos, mut mo, mut no, mut wt) = (0u64, 0u64, 0u64, 1.0);
            for bond in 0..2 {
                let digit = (code / 9u32.pow(bond as u32)) % 9;
                let (ms, ns) = (BondState::ALL[(digit / 3) as usize], BondState::ALL[(digit % 3) as usize]);
                wt *= w[bond].of(ms) * w[bond].of(ns);
                if ms.is_positive() || ns.is_positive() {
                    pos |= 1 << bond;
                }
                if ms.is_odd() {
                    mo |= 1 << bond;
                }
                if ns.is_odd() {
                    no |= 1 << bond;
                }
            }
            *brute.entry((pos, mo, no, 0)).or_default() += wt / (z * z);
        }
        assert_eq!(by_key.len(), brute.len());
        for (k, v) in &brute {
            assert!((by_key[k] - v).abs() < 1e-14, "{k:?}");
        }
    }

    #[test]
    fn m_sources_must_avoid_a() {
        let b = Budget::default();
        let g = catalog_graph("triangle").unwrap();
        let r = enumerate_current_pairs(&g, 0.5, SiteSet::singleton(0), Some(SiteSet::from_indices([0, 1])), None, &b, |_| 0.0);
        assert!(r.is_err());
    }

    #[test]
    fn pair_table_total_is_normalised() {
        let b = Budget::default();
        let g = catalog_graph("K4").unwrap();
        let t = PairTable::build(&g, 0.5, SiteSet::singleton(1), &b).unwrap();
        let z: f64 = t.entries.iter().filter(|e| e.1.is_empty()).map(|e| e.2).sum();
        assert!((z - 1.0).abs() < 1e-13);
    }
}
