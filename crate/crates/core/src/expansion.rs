//! Lace-expansion coefficients on a finite graph.
//!
//! The nested sums defining `π^(j)` and `R^(j)` are evaluated level by level.
//! A level is fully described by its start site `v` and the set `A` it must
//! connect through, so one pair sweep per state `(v, A)` yields
//!
//! * `Θ_{v,x;A}` for every `x`, and
//! * for every directed bond `b` leaving `x`, the weight with which the
//!   event `E(v, b̲; A)` occurs together with each cluster `C^b(v)`;
//!
//! the next level then starts at `b̄` with `A = C^b(v)`. States, pair tables
//! and restricted two-point functions are memoised.

use crate::bits::{BondSet, SiteSet};
use crate::budget::Budget;
use crate::connectivity::Topology;
use crate::currents::{enumerate_current_pairs, CurrentTable, PairTable};
use crate::error::{invalid, Result};
use crate::lattice::{step_distribution, DirectedBond, GraphSpec};
use crate::spin_oracle::{two_point_matrix, SpinSystem};
use crate::sum::{csum, CompensatedSum};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

/// Output of one `(v, A)` sweep.
struct State {
    theta: Vec<f64>,
    /// (directed bond index, cluster C^b(v), weight), sorted.
    trans: Vec<(usize, SiteSet, f64)>,
}

/// Memoising evaluator for a fixed graph and inverse temperature.
pub struct Expansion<'g> {
    graph: &'g GraphSpec,
    topo: Topology,
    p: f64,
    budget: Budget,
    dbonds: Vec<DirectedBond>,
    tau_dir: Vec<f64>,
    out_of: Vec<Vec<usize>>,
    g: Vec<Vec<f64>>,
    tables: HashMap<SiteSet, Rc<PairTable>>,
    states: HashMap<(usize, SiteSet), Rc<State>>,
    restricted: HashMap<SiteSet, Rc<Vec<Vec<f64>>>>,
    v_memo: HashMap<(usize, usize, SiteSet), Rc<Vec<f64>>>,
    u_memo: HashMap<(usize, usize, SiteSet), Rc<Vec<f64>>>,
}

impl<'g> Expansion<'g> {
    pub fn new(graph: &'g GraphSpec, p: f64, budget: &Budget) -> Result<Self> {
        let topo = Topology::new(graph)?;
        let dbonds = graph.directed_bonds();
        let tau_dir = dbonds.iter().map(|b| graph.tau(p, b.bond)).collect();
        let mut out_of = vec![Vec::new(); graph.n_sites];
        for (i, b) in dbonds.iter().enumerate() {
            out_of[b.tail].push(i);
        }
        let g = two_point_matrix(graph, p, SiteSet::full(graph.n_sites), budget)?;
        Ok(Self {
            graph,
            topo,
            p,
            budget: *budget,
            dbonds,
            tau_dir,
            out_of,
            g,
            tables: HashMap::new(),
            states: HashMap::new(),
            restricted: HashMap::new(),
            v_memo: HashMap::new(),
            u_memo: HashMap::new(),
        })
    }

    pub fn graph(&self) -> &'g GraphSpec {
        self.graph
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    fn n(&self) -> usize {
        self.graph.n_sites
    }

    fn everything(&self) -> SiteSet {
        SiteSet::full(self.n())
    }

    /// `⟨φ_x φ_y⟩_Λ`.
    pub fn two_point(&self) -> &[Vec<f64>] {
        &self.g
    }

    fn check_sites(&self, sites: &[usize], a: SiteSet) -> Result<()> {
        if let Some(&s) = sites.iter().find(|&&s| s >= self.n()) {
            return invalid(format!("unknown site {s}"));
        }
        if !a.is_subset(self.everything()) {
            return invalid("A is not a subset of the sites");
        }
        Ok(())
    }

    pub fn pair_table(&mut self, a: SiteSet) -> Result<Rc<PairTable>> {
        if let Some(t) = self.tables.get(&a) {
            return Ok(t.clone());
        }
        let t = Rc::new(PairTable::build(self.graph, self.p, a, &self.budget)?);
        self.tables.insert(a, t.clone());
        Ok(t)
    }

    /// `⟨φ_x φ_y⟩` on the subgraph induced by `sites`.
    fn restricted_two_point(&mut self, sites: SiteSet) -> Result<Rc<Vec<Vec<f64>>>> {
        if let Some(m) = self.restricted.get(&sites) {
            return Ok(m.clone());
        }
        let m = Rc::new(two_point_matrix(self.graph, self.p, sites, &self.budget)?);
        self.restricted.insert(sites, m.clone());
        Ok(m)
    }

    /// Target `u` of a pair with `∂n = sources` read as `v △ u`.
    fn target(v: usize, sources: SiteSet) -> Option<usize> {
        if sources.is_empty() {
            Some(v)
        } else if sources.len() == 2 && sources.contains(v) {
            sources.without(v).iter().next()
        } else {
            None
        }
    }

    fn state(&mut self, v: usize, a: SiteSet) -> Result<Rc<State>> {
        if let Some(s) = self.states.get(&(v, a)) {
            return Ok(s.clone());
        }
        let n = self.n();
        let mut theta = vec![CompensatedSum::new(); n];
        let mut trans: BTreeMap<(usize, SiteSet), CompensatedSum> = BTreeMap::new();
        if !a.is_empty() {
            let table = self.pair_table(a)?;
            for &(pos, sources, w) in &table.entries {
                let Some(u) = Self::target(v, sources) else { continue };
                if !self.topo.event_e(pos, v, u, a) {
                    continue;
                }
                theta[u].add(w);
                for &db in &self.out_of[u] {
                    let c = self.topo.cluster_off_bond(pos, v, self.dbonds[db].bond);
                    trans.entry((db, c)).or_default().add(w);
                }
            }
        }
        let s = Rc::new(State {
            theta: theta.iter().map(CompensatedSum::value).collect(),
            trans: trans.into_iter().map(|((db, c), w)| (db, c, w.value())).collect(),
        });
        self.states.insert((v, a), s.clone());
        Ok(s)
    }

    /// `Θ_{v,x;A}` for all `x`.
    pub fn theta_row(&mut self, v: usize, a: SiteSet) -> Result<Vec<f64>> {
        self.check_sites(&[v], a)?;
        Ok(self.state(v, a)?.theta.clone())
    }

    /// `Θ_{v,x;A}[X]` for a functional of the combined positivity mask.
    pub fn theta_with<F: Fn(BondSet) -> f64>(&mut self, v: usize, x: usize, a: SiteSet, functional: F) -> Result<f64> {
        self.check_sites(&[v, x], a)?;
        self.theta_by(v, x, a, |topo, pos| if topo.event_e(pos, v, x, a) { functional(pos) } else { 0.0 })
    }

    pub fn theta(&mut self, v: usize, x: usize, a: SiteSet) -> Result<f64> {
        self.theta_with(v, x, a, |_| 1.0)
    }

    /// `Θ'_{z,x;A}`: the same sum with `E'` in place of `E`.
    pub fn theta_prime(&mut self, z: usize, x: usize, a: SiteSet) -> Result<f64> {
        self.check_sites(&[z, x], a)?;
        self.theta_by(z, x, a, |topo, pos| f64::from(u8::from(topo.event_e_prime(pos, z, x, a))))
    }

    /// `Θ''_{z,x,v;A}`: the same sum with `E''`.
    pub fn theta_double_prime(&mut self, z: usize, x: usize, v: usize, a: SiteSet) -> Result<f64> {
        self.check_sites(&[z, x, v], a)?;
        self.theta_by(z, x, a, |topo, pos| f64::from(u8::from(topo.event_e_double_prime(pos, z, x, v, a))))
    }

    /// Sum of `weight · f(mask)` over pairs with `∂m = ∅`, `∂n = v △ x`.
    fn theta_by<F: Fn(&Topology, BondSet) -> f64>(&mut self, v: usize, x: usize, a: SiteSet, f: F) -> Result<f64> {
        if a.is_empty() {
            return Ok(0.0);
        }
        let table = self.pair_table(a)?;
        let want = SiteSet::singleton(v).toggle(x);
        let mut acc = CompensatedSum::new();
        for &(pos, sources, w) in &table.entries {
            if sources == want {
                acc.add(w * f(&self.topo, pos));
            }
        }
        Ok(acc.value())
    }

    /// `π^(0)(x) = Σ_{∂n = o△x} w(n)/Z · 1[o ⇒ x]` from a single-current sweep.
    pub fn pi0_single_current(&self) -> Result<Vec<f64>> {
        let table = CurrentTable::build(self.graph, self.p, self.graph.all_bonds(), &self.budget)?;
        let o = self.graph.origin;
        let z = table.weight_with_sources(SiteSet::EMPTY);
        Ok((0..self.n())
            .map(|x| {
                let want = SiteSet::singleton(o).toggle(x);
                csum(table.entries.iter().filter(|e| e.1 == want && self.topo.doubly_connected(e.0, o, x)).map(|e| e.2)) / z
            })
            .collect())
    }

    fn v_level(&mut self, k: usize, v: usize, a: SiteSet) -> Result<Rc<Vec<f64>>> {
        if let Some(r) = self.v_memo.get(&(k, v, a)) {
            return Ok(r.clone());
        }
        let st = self.state(v, a)?;
        let out = if k == 0 {
            st.theta.clone()
        } else {
            let mut acc = vec![CompensatedSum::new(); self.n()];
            for &(db, c, w) in &st.trans {
                let t = self.tau_dir[db];
                if t == 0.0 {
                    continue;
                }
                let inner = self.v_level(k - 1, self.dbonds[db].head, c)?;
                for (a, &y) in acc.iter_mut().zip(inner.iter()) {
                    a.add(w * t * y);
                }
            }
            acc.iter().map(CompensatedSum::value).collect()
        };
        let out = Rc::new(out);
        self.v_memo.insert((k, v, a), out.clone());
        Ok(out)
    }

    fn u_level(&mut self, k: usize, v: usize, a: SiteSet) -> Result<Rc<Vec<f64>>> {
        debug_assert!(k >= 1);
        if let Some(r) = self.u_memo.get(&(k, v, a)) {
            return Ok(r.clone());
        }
        let st = self.state(v, a)?;
        let n = self.n();
        let mut acc = vec![CompensatedSum::new(); n];
        for &(db, c, w) in &st.trans {
            let t = self.tau_dir[db];
            if t == 0.0 {
                continue;
            }
            let head = self.dbonds[db].head;
            if k == 1 {
                let gc = self.restricted_two_point(c.complement(n))?;
                for x in 0..n {
                    acc[x].add(w * t * (self.g[head][x] - gc[head][x]));
                }
            } else {
                let inner = self.u_level(k - 1, head, c)?;
                for (a, &y) in acc.iter_mut().zip(inner.iter()) {
                    a.add(w * t * y);
                }
            }
        }
        let out = Rc::new(acc.iter().map(CompensatedSum::value).collect::<Vec<_>>());
        self.u_memo.insert((k, v, a), out.clone());
        Ok(out)
    }

    /// `π^(j)(x)` for all `x`.
    pub fn pi(&mut self, j: usize) -> Result<Vec<f64>> {
        let (o, all) = (self.graph.origin, self.everything());
        Ok(self.v_level(j, o, all)?.as_ref().clone())
    }

    /// `R^(j)(x)` for all `x`, `j ≥ 1`.
    pub fn remainder(&mut self, j: usize) -> Result<Vec<f64>> {
        if j == 0 {
            return invalid("the remainder is defined for j >= 1");
        }
        let (o, all) = (self.graph.origin, self.everything());
        Ok(self.u_level(j, o, all)?.as_ref().clone())
    }

    /// `Π^(j)(x) = Σ_{i≤j} (−1)^i π^(i)(x)`.
    pub fn big_pi(&mut self, j: usize) -> Result<Vec<f64>> {
        let pis: Vec<Vec<f64>> = (0..=j).map(|i| self.pi(i)).collect::<Result<_>>()?;
        Ok(alternating_sum(&pis))
    }

    /// `Σ_{u,v} f(u) τ_{u,v} ⟨φ_v φ_x⟩` over directed bonds `(u, v)`.
    pub fn convolve_tau_g(&self, f: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|x| csum(self.dbonds.iter().zip(&self.tau_dir).map(|(b, &t)| f[b.tail] * t * self.g[b.head][x])))
            .collect()
    }

    pub fn budget(&self) -> &Budget {
        &self.budget
    }
}

fn alternating_sum(pis: &[Vec<f64>]) -> Vec<f64> {
    let n = pis.first().map_or(0, Vec::len);
    (0..n)
        .map(|x| csum(pis.iter().enumerate().map(|(i, p)| if i % 2 == 0 { p[x] } else { -p[x] })))
        .collect()
}

/// A named inequality slack; non-negative means the inequality holds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Margin {
    pub name: String,
    pub value: f64,
}

/// Identity tolerance for [`verify_lace_identity`] (relative).
pub const IDENTITY_TOL: f64 = 1e-9;
/// Slack allowed in the ferromagnetic sign/sandwich bounds.
pub const BOUND_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionReport {
    pub graph: String,
    pub p: f64,
    pub j: usize,
    /// `pi[i][x] = π^(i)(x)` for `i ≤ j`.
    pub pi: Vec<Vec<f64>>,
    #[serde(rename = "Pi")]
    pub big_pi: Vec<f64>,
    /// `R^(j+1)(x)`.
    #[serde(rename = "R")]
    pub remainder: Vec<f64>,
    /// Identity defect per site, relative to the size of the terms.
    pub residuals: Vec<f64>,
    pub residual_max: f64,
    /// Ferromagnetic sign and sandwich bounds; empty for mixed signs.
    pub margins: Vec<Margin>,
    pub pass: bool,
}

/// Checks `G = Π^(j) + Π^(j) τ G + (−1)^{j+1} R^(j+1)` site by site.
pub fn verify_lace_identity(graph: &GraphSpec, p: f64, j: usize, budget: &Budget) -> Result<ExpansionReport> {
    let mut ex = Expansion::new(graph, p, budget)?;
    lace_report(&mut ex, j)
}

pub fn lace_report(ex: &mut Expansion<'_>, j: usize) -> Result<ExpansionReport> {
    let graph = ex.graph();
    let o = graph.origin;
    let n = graph.n_sites;
    let pis: Vec<Vec<f64>> = (0..=j).map(|i| ex.pi(i)).collect::<Result<_>>()?;
    let big_pi = alternating_sum(&pis);
    let r = ex.remainder(j + 1)?;
    let conv = ex.convolve_tau_g(&big_pi);
    let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
    let g = ex.two_point().to_vec();
    let residuals: Vec<f64> = (0..n)
        .map(|x| {
            let terms = [g[o][x], -big_pi[x], -conv[x], -sign * r[x]];
            let scale: f64 = terms.iter().map(|t| t.abs()).sum();
            let defect = csum(terms);
            if scale == 0.0 {
                0.0
            } else {
                defect.abs() / scale
            }
        })
        .collect();
    let residual_max = residuals.iter().copied().fold(0.0, f64::max);
    let mut margins = Vec::new();
    if graph.is_ferromagnetic() {
        let pi_min = pis
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(x, &v)| v - f64::from(u8::from(i == 0 && x == o))))
            .fold(f64::INFINITY, f64::min);
        let upper = ex.convolve_tau_g(&pis[j]);
        margins.push(Margin { name: "pi_lower".into(), value: pi_min });
        margins.push(Margin { name: "R_lower".into(), value: r.iter().copied().fold(f64::INFINITY, f64::min) });
        margins.push(Margin {
            name: "R_upper".into(),
            value: upper.iter().zip(&r).map(|(u, r)| u - r).fold(f64::INFINITY, f64::min),
        });
    }
    let pass = residual_max <= IDENTITY_TOL && margins.iter().all(|m| m.value >= -BOUND_TOL);
    Ok(ExpansionReport {
        graph: graph.name.clone(),
        p: ex.p(),
        j,
        pi: pis,
        big_pi,
        remainder: r,
        residuals,
        residual_max,
        margins,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThroughCheck {
    /// `⟨φ_vφ_x⟩_Λ − ⟨φ_vφ_x⟩_{A^c}` from spin sums.
    pub lhs: f64,
    /// Pair sum with the through-`A` indicator.
    pub rhs: f64,
    pub residual: f64,
}

/// Both sides of the through-`A` representation of `G_Λ − G_{A^c}`.
pub fn verify_through_identity(
    graph: &GraphSpec,
    p: f64,
    a: SiteSet,
    v: usize,
    x: usize,
    budget: &Budget,
) -> Result<ThroughCheck> {
    let topo = Topology::new(graph)?;
    let n = graph.n_sites;
    if v >= n || x >= n || !a.is_subset(SiteSet::full(n)) {
        return invalid("site or set outside the graph");
    }
    let full = SpinSystem::new(graph, p, 0.0, SiteSet::full(n), budget)?.two_point(v, x)?;
    let rest = SpinSystem::new(graph, p, 0.0, a.complement(n), budget)?.two_point(v, x)?;
    let lhs = full - rest;
    let rhs = enumerate_current_pairs(
        graph,
        p,
        a,
        Some(SiteSet::EMPTY),
        Some(SiteSet::singleton(v).toggle(x)),
        budget,
        |c| if topo.connected_through(c.positive, v, x, a) { c.weight } else { 0.0 },
    )?;
    Ok(ThroughCheck { lhs, rhs, residual: (lhs - rhs).abs() })
}

/// `τ(p) Σ_x Π^(j)_p(x)`.
pub fn lace_criticality_function(graph: &GraphSpec, p: f64, j: usize, budget: &Budget) -> Result<f64> {
    let tau = step_distribution(graph, p)?.tau_total;
    if tau == 0.0 {
        return Ok(0.0);
    }
    let mut ex = Expansion::new(graph, p, budget)?;
    Ok(tau * csum(ex.big_pi(j)?))
}

/// Root of `τ(p) Σ_x Π^(j)_p(x) = 1` in `[0, p_max]`: the first sign change on
/// a uniform grid of `grid` points, refined by bisection. `None` if the grid
/// shows no crossing.
pub fn critical_point_heuristic(
    graph: &GraphSpec,
    j: usize,
    p_max: f64,
    grid: usize,
    budget: &Budget,
) -> Result<Option<f64>> {
    graph.require_ferromagnetic()?;
    if !(p_max > 0.0) || grid < 2 {
        return invalid("need p_max > 0 and at least two grid points");
    }
    let f = |p: f64| lace_criticality_function(graph, p, j, budget).map(|v| v - 1.0);
    let mut lo = 0.0;
    let mut f_lo = f(lo)?;
    for k in 1..grid {
        let hi = p_max * k as f64 / (grid - 1) as f64;
        let f_hi = f(hi)?;
        if f_lo < 0.0 && f_hi >= 0.0 {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                if f(mid)? < 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
                if b - a < 1e-13 {
                    break;
                }
            }
            return Ok(Some(0.5 * (a + b)));
        }
        lo = hi;
        f_lo = f_hi;
    }
    Ok(None)
}
