//! Finite graphs, coupling families and the one-step distribution `D`.

use crate::bits::BondSet;
use crate::budget::Budget;
use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// An undirected bond with its coupling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bond {
    pub u: usize,
    pub v: usize,
    pub j: f64,
}

/// One orientation of a bond: `tail` is b̲ and `head` is b̄.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectedBond {
    pub bond: usize,
    pub tail: usize,
    pub head: usize,
}

/// A finite graph Λ with real couplings and a distinguished origin.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSpec {
    pub name: String,
    pub n_sites: usize,
    pub bonds: Vec<Bond>,
    pub origin: usize,
    /// Optional embedding in Z^d, used only for distances and symmetry checks.
    pub coords: Option<Vec<Vec<i64>>>,
}

#[inline]
pub fn tau_bond(p: f64, j: f64) -> f64 {
    (p * j).tanh()
}

impl GraphSpec {
    pub fn new(name: impl Into<String>, n_sites: usize, bonds: Vec<Bond>, origin: usize) -> Result<Self> {
        let g = Self { name: name.into(), n_sites, bonds, origin, coords: None };
        g.validate()?;
        Ok(g)
    }

    pub fn with_coords(mut self, coords: Vec<Vec<i64>>) -> Result<Self> {
        if coords.len() != self.n_sites {
            return invalid(format!("{} coordinates for {} sites", coords.len(), self.n_sites));
        }
        if let Some(d) = coords.first().map(Vec::len) {
            if coords.iter().any(|c| c.len() != d) {
                return invalid("coordinates of mixed dimension");
            }
        }
        self.coords = Some(coords);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return invalid("graph has no sites");
        }
        if self.origin >= self.n_sites {
            return invalid(format!("origin {} is not a site", self.origin));
        }
        let mut seen = BTreeSet::new();
        for b in &self.bonds {
            if b.u >= self.n_sites || b.v >= self.n_sites {
                return invalid(format!("bond ({}, {}) has an endpoint outside the site list", b.u, b.v));
            }
            if b.u == b.v {
                return invalid(format!("self-loop at site {}", b.u));
            }
            if !b.j.is_finite() {
                return invalid(format!("non-finite coupling on bond ({}, {})", b.u, b.v));
            }
            if !seen.insert((b.u.min(b.v), b.u.max(b.v))) {
                return invalid(format!("duplicate bond ({}, {})", b.u, b.v));
            }
        }
        Ok(())
    }

    pub fn n_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_ferromagnetic(&self) -> bool {
        self.bonds.iter().all(|b| b.j >= 0.0)
    }

    pub fn require_ferromagnetic(&self) -> Result<()> {
        if self.is_ferromagnetic() {
            Ok(())
        } else {
            Err(Error::NotFerromagnetic)
        }
    }

    /// Rejects graphs that do not fit the 64-bit site and bond masks.
    pub fn require_small(&self) -> Result<()> {
        if self.n_sites > 64 || self.bonds.len() > 64 {
            return invalid(format!(
                "graph {} has {} sites and {} bonds; exact routines support at most 64 of each",
                self.name,
                self.n_sites,
                self.bonds.len()
            ));
        }
        Ok(())
    }

    /// Both orientations of every bond: index `2b` is `u → v`, `2b + 1` is `v → u`.
    pub fn directed_bonds(&self) -> Vec<DirectedBond> {
        self.bonds
            .iter()
            .enumerate()
            .flat_map(|(i, b)| {
                [DirectedBond { bond: i, tail: b.u, head: b.v }, DirectedBond { bond: i, tail: b.v, head: b.u }]
            })
            .collect()
    }

    pub fn tau(&self, p: f64, bond: usize) -> f64 {
        tau_bond(p, self.bonds[bond].j)
    }

    /// Dense matrix of τ_{x,y}, zero off the bond set.
    pub fn tau_matrix(&self, p: f64) -> Vec<Vec<f64>> {
        let mut t = vec![vec![0.0; self.n_sites]; self.n_sites];
        for b in &self.bonds {
            let x = tau_bond(p, b.j);
            t[b.u][b.v] = x;
            t[b.v][b.u] = x;
        }
        t
    }

    pub fn all_bonds(&self) -> BondSet {
        BondSet::full(self.bonds.len())
    }

    pub fn bond_between(&self, x: usize, y: usize) -> Option<usize> {
        self.bonds.iter().position(|b| (b.u == x && b.v == y) || (b.u == y && b.v == x))
    }

    /// Same topology with new couplings.
    pub fn with_couplings(&self, js: &[f64]) -> Result<Self> {
        if js.len() != self.bonds.len() {
            return invalid("coupling list does not match the bond list");
        }
        let mut g = self.clone();
        for (b, &j) in g.bonds.iter_mut().zip(js) {
            b.j = j;
        }
        g.validate()?;
        Ok(g)
    }

    pub fn max_abs_tau(&self, p: f64) -> f64 {
        self.bonds.iter().map(|b| tau_bond(p, b.j).abs()).fold(0.0, f64::max)
    }

    /// Number of single-current states, `3^|B|`.
    pub fn single_sweep_size(&self) -> f64 {
        3f64.powi(self.bonds.len() as i32)
    }

    /// Nominal number of current pairs, `9^|B|`.
    pub fn pair_sweep_size(&self) -> f64 {
        9f64.powi(self.bonds.len() as i32)
    }
}

/// Coupling families for [`build_graph`].
#[derive(Clone, Debug, PartialEq)]
pub enum Lattice {
    /// Box `{0,…,side−1}^d`, free boundary, `J = 1` on nearest neighbours.
    NearestNeighbor { d: usize, side: usize },
    /// Box with uniform couplings over `0 < ‖x−y‖_∞ ≤ range`, normalised to sum to one.
    SpreadOut { d: usize, side: usize, range: usize },
    Custom { n_sites: usize, bonds: Vec<(usize, usize, f64)>, origin: usize },
}

/// Translation-invariant coupling stencil `x ↦ J_{o,x}` of a family on Z^d.
pub fn lattice_stencil(d: usize, range: Option<usize>) -> Vec<(Vec<i64>, f64)> {
    match range {
        None => (0..d)
            .flat_map(|i| {
                [-1i64, 1].into_iter().map(move |s| {
                    let mut x = vec![0i64; d];
                    x[i] = s;
                    (x, 1.0)
                })
            })
            .collect(),
        Some(l) => {
            let pts: Vec<Vec<i64>> = cube_points(d, -(l as i64), l as i64)
                .into_iter()
                .filter(|x| x.iter().any(|&c| c != 0))
                .collect();
            let j = 1.0 / pts.len() as f64;
            pts.into_iter().map(|x| (x, j)).collect()
        }
    }
}

fn cube_points(d: usize, lo: i64, hi: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                (lo..=hi).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

/// Builds a box or custom graph. With `exact` set, the graph must also fit a
/// single-current sweep (`3^|B|`) inside that budget.
pub fn build_graph(kind: &Lattice, exact: Option<&Budget>) -> Result<GraphSpec> {
    let g = match kind {
        Lattice::NearestNeighbor { d, side } => box_graph(*d, *side, None)?,
        Lattice::SpreadOut { d, side, range } => {
            if *range < 1 || range >= side {
                return invalid(format!("spread-out range {range} must satisfy 1 <= L < side = {side}"));
            }
            box_graph(*d, *side, Some(*range))?
        }
        Lattice::Custom { n_sites, bonds, origin } => GraphSpec::new(
            "custom",
            *n_sites,
            bonds.iter().map(|&(u, v, j)| Bond { u, v, j }).collect(),
            *origin,
        )?,
    };
    if let Some(budget) = exact {
        g.require_small()?;
        budget.check_single("graph flagged for exact enumeration", g.single_sweep_size())?;
    }
    Ok(g)
}

fn box_graph(d: usize, side: usize, range: Option<usize>) -> Result<GraphSpec> {
    if d == 0 || side == 0 {
        return invalid("box needs d >= 1 and side >= 1");
    }
    let n = side.checked_pow(d as u32).filter(|&n| n <= 1 << 20);
    let Some(n) = n else {
        return invalid(format!("box of side {side} in d = {d} is too large"));
    };
    let coords = cube_points(d, 0, side as i64 - 1);
    let index = |x: &[i64]| x.iter().fold(0usize, |acc, &c| acc * side + c as usize);
    let stencil = lattice_stencil(d, range);
    let mut bonds = Vec::new();
    for x in &coords {
        let ix = index(x);
        for (dx, j) in &stencil {
            let y: Vec<i64> = x.iter().zip(dx).map(|(a, b)| a + b).collect();
            if y.iter().all(|&c| (0..side as i64).contains(&c)) {
                let iy = index(&y);
                if ix < iy {
                    bonds.push(Bond { u: ix, v: iy, j: *j });
                }
            }
        }
    }
    let name = match range {
        None => format!("nn-d{d}-side{side}"),
        Some(l) => format!("spread-d{d}-side{side}-L{l}"),
    };
    GraphSpec::new(name, n, bonds, 0)?.with_coords(coords)
}

/// The one-step distribution `D(x) = τ_{o,x}/τ` and its variance.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDistribution<K> {
    pub tau_total: f64,
    /// `None` when `tau_total = 0`, where `D` is undefined.
    pub d: Option<Vec<(K, f64)>>,
    /// `Σ |x|² D(x)`; needs coordinates and a defined `D`.
    pub sigma2: Option<f64>,
}

fn norm2(x: &[i64]) -> f64 {
    x.iter().map(|&c| (c * c) as f64).sum()
}

/// Step distribution seen from the origin of a finite graph, keyed by site.
pub fn step_distribution(graph: &GraphSpec, p: f64) -> Result<StepDistribution<usize>> {
    if p < 0.0 || p.is_nan() {
        return invalid("inverse temperature must be non-negative");
    }
    let o = graph.origin;
    let mut taus: BTreeMap<usize, f64> = BTreeMap::new();
    for b in &graph.bonds {
        if b.u == o {
            taus.insert(b.v, tau_bond(p, b.j));
        } else if b.v == o {
            taus.insert(b.u, tau_bond(p, b.j));
        }
    }
    let tau_total: f64 = taus.values().sum();
    if tau_total == 0.0 {
        return Ok(StepDistribution { tau_total, d: None, sigma2: None });
    }
    let d: Vec<(usize, f64)> = taus.into_iter().map(|(x, t)| (x, t / tau_total)).collect();
    let sigma2 = graph.coords.as_ref().map(|c| {
        d.iter()
            .map(|&(x, w)| {
                let dx: Vec<i64> = c[x].iter().zip(&c[o]).map(|(a, b)| a - b).collect();
                norm2(&dx) * w
            })
            .sum()
    });
    Ok(StepDistribution { tau_total, d: Some(d), sigma2 })
}

/// Step distribution of a translation-invariant stencil on Z^d.
pub fn stencil_step_distribution(stencil: &[(Vec<i64>, f64)], p: f64) -> Result<StepDistribution<Vec<i64>>> {
    if p < 0.0 || p.is_nan() {
        return invalid("inverse temperature must be non-negative");
    }
    let tau_total: f64 = stencil.iter().map(|(_, j)| tau_bond(p, *j)).sum();
    if tau_total == 0.0 {
        return Ok(StepDistribution { tau_total, d: None, sigma2: None });
    }
    let d: Vec<(Vec<i64>, f64)> = stencil.iter().map(|(x, j)| (x.clone(), tau_bond(p, *j) / tau_total)).collect();
    let sigma2 = d.iter().map(|(x, w)| norm2(x) * w).sum();
    Ok(StepDistribution { tau_total, d: Some(d), sigma2: Some(sigma2) })
}

/// Names of the built-in graphs, in catalog order.
pub const CATALOG_NAMES: [&str; 8] =
    ["single-bond", "path-3", "triangle", "square", "square-diag", "K4", "box-2x2", "box-2x3"];

/// The built-in catalog; all couplings are 1 and the origin is site 0.
pub fn catalog() -> Vec<GraphSpec> {
    CATALOG_NAMES.iter().map(|n| catalog_graph(n).expect("built-in graph")).collect()
}

pub fn catalog_graph(name: &str) -> Option<GraphSpec> {
    let unit = |edges: &[(usize, usize)]| edges.iter().map(|&(u, v)| Bond { u, v, j: 1.0 }).collect::<Vec<_>>();
    let g = match name {
        "single-bond" => GraphSpec::new(name, 2, unit(&[(0, 1)]), 0).and_then(|g| g.with_coords(vec![vec![0], vec![1]])),
        "path-3" => GraphSpec::new(name, 3, unit(&[(0, 1), (1, 2)]), 0)
            .and_then(|g| g.with_coords(vec![vec![0], vec![1], vec![2]])),
        "triangle" => GraphSpec::new(name, 3, unit(&[(0, 1), (1, 2), (0, 2)]), 0),
        "square" => GraphSpec::new(name, 4, unit(&[(0, 1), (1, 2), (2, 3), (0, 3)]), 0),
        "square-diag" => GraphSpec::new(name, 4, unit(&[(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)]), 0),
        "K4" => GraphSpec::new(name, 4, unit(&[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]), 0),
        "box-2x2" => box_graph(2, 2, None).map(|g| GraphSpec { name: name.into(), ..g }),
        "box-2x3" => box_rect(&[2, 3]).map(|g| GraphSpec { name: name.into(), ..g }),
        _ => return None,
    };
    Some(g.expect("built-in graphs are valid"))
}

/// Nearest-neighbour box with unequal sides.
fn box_rect(sides: &[usize]) -> Result<GraphSpec> {
    let mut coords: Vec<Vec<i64>> = vec![vec![]];
    for &s in sides {
        coords = coords
            .into_iter()
            .flat_map(|p| {
                (0..s as i64).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    let mut bonds = Vec::new();
    for (i, x) in coords.iter().enumerate() {
        for (k, y) in coords.iter().enumerate().skip(i + 1) {
            let dist: i64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
            if dist == 1 {
                bonds.push(Bond { u: i, v: k, j: 1.0 });
            }
        }
    }
    let n = coords.len();
    GraphSpec::new("box", n, bonds, 0)?.with_coords(coords)
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SitesField {
    Count(usize),
    Coords(Vec<Vec<i64>>),
}

#[derive(Serialize, Deserialize)]
struct CatalogEntry {
    name: String,
    sites: SitesField,
    bonds: Vec<(usize, usize, f64)>,
    origin: usize,
}

/// Parses a catalog file: a JSON array of `{name, sites, bonds: [[u, v, J], …], origin}`.
/// `sites` is either a site count or a list of integer coordinates.
pub fn parse_catalog(json: &str) -> Result<Vec<GraphSpec>> {
    let entries: Vec<CatalogEntry> = serde_json::from_str(json)?;
    entries
        .into_iter()
        .map(|e| {
            let bonds = e.bonds.iter().map(|&(u, v, j)| Bond { u, v, j }).collect();
            match e.sites {
                SitesField::Count(n) => GraphSpec::new(e.name, n, bonds, e.origin),
                SitesField::Coords(c) => GraphSpec::new(e.name, c.len(), bonds, e.origin)?.with_coords(c),
            }
        })
        .collect()
}

pub fn catalog_to_json(graphs: &[GraphSpec]) -> String {
    let entries: Vec<CatalogEntry> = graphs
        .iter()
        .map(|g| CatalogEntry {
            name: g.name.clone(),
            sites: match &g.coords {
                Some(c) => SitesField::Coords(c.clone()),
                None => SitesField::Count(g.n_sites),
            },
            bonds: g.bonds.iter().map(|b| (b.u, b.v, b.j)).collect(),
            origin: g.origin,
        })
        .collect();
    serde_json::to_string_pretty(&entries).expect("catalog serialises")
}

/// Seed behind [`mixed_sign_variants`]; fixed so that expansion sweeps stay deterministic.
pub const MIXED_SIGN_SEED: u64 = 0x00c0_ffee;

/// `count` copies of `graph` with couplings drawn uniformly from
/// `±[0.3, 1.5]`, each containing both signs when the graph has two or more
/// bonds. The draws depend only on the graph name and `count`.
pub fn mixed_sign_variants(graph: &GraphSpec, count: usize) -> Result<Vec<GraphSpec>> {
    use rand::{Rng, SeedableRng};
    let salt = graph.name.bytes().fold(MIXED_SIGN_SEED, |h, b| h.rotate_left(5) ^ u64::from(b));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(salt);
    let m = graph.bonds.len();
    (0..count)
        .map(|i| {
            let js: Vec<f64> = loop {
                let js: Vec<f64> = (0..m)
                    .map(|_| {
                        let mag = rng.gen_range(0.3..1.5);
                        if rng.gen_bool(0.5) {
                            mag
                        } else {
                            -mag
                        }
                    })
                    .collect();
                if m < 2 || (js.iter().any(|&j| j < 0.0) && js.iter().any(|&j| j > 0.0)) {
                    break js;
                }
            };
            let mut g = graph.with_couplings(&js)?;
            g.name = format!("{}~mixed{i}", graph.name);
            Ok(g)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn custom_single_bond() {
        let g = build_graph(&Lattice::Custom { n_sites: 2, bonds: vec![(0, 1, 1.0)], origin: 0 }, None).unwrap();
        assert_eq!(g.n_bonds(), 1);
    }

    #[test]
    fn spread_out_uniform_weight() {
        let g = build_graph(&Lattice::SpreadOut { d: 2, side: 3, range: 1 }, None).unwrap();
        assert!(g.bonds.iter().all(|b| (b.j - 0.125).abs() < 1e-15));
        assert!(build_graph(&Lattice::SpreadOut { d: 2, side: 3, range: 3 }, None).is_err());
    }

    #[test]
    fn nn_path() {
        let g = build_graph(&Lattice::NearestNeighbor { d: 1, side: 3 }, None).unwrap();
        assert_eq!(g.n_bonds(), 2);
        assert!(g.bonds.iter().all(|b| b.j == 1.0));
    }

    #[test]
    fn exact_flag_enforces_budget() {
        let kind = Lattice::NearestNeighbor { d: 2, side: 6 };
        assert!(build_graph(&kind, None).is_ok());
        let err = build_graph(&kind, Some(&Budget::default())).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn invalid_graphs_rejected() {
        assert!(GraphSpec::new("x", 2, vec![Bond { u: 0, v: 0, j: 1.0 }], 0).is_err());
        assert!(GraphSpec::new("x", 2, vec![Bond { u: 0, v: 1, j: 1.0 }, Bond { u: 1, v: 0, j: 2.0 }], 0).is_err());
        assert!(GraphSpec::new("x", 2, vec![Bond { u: 0, v: 2, j: 1.0 }], 0).is_err());
        assert!(GraphSpec::new("x", 2, vec![], 5).is_err());
    }

    #[test]
    fn tau_values() {
        assert_eq!(tau_bond(0.0, 5.0), 0.0);
        assert!((tau_bond(1.0, 1.0) - 0.761_594_155_955_764_9).abs() < 1e-15);
        assert_eq!(tau_bond(1.0, -1.0), -tau_bond(1.0, 1.0));
    }

    #[test]
    fn nn_stencil_distribution() {
        for d in 1..=4 {
            let s = stencil_step_distribution(&lattice_stencil(d, None), 0.3).unwrap();
            let dist = s.d.unwrap();
            assert_eq!(dist.len(), 2 * d);
            assert!(dist.iter().all(|(_, w)| (w - 1.0 / (2 * d) as f64).abs() < 1e-15));
            assert!((s.sigma2.unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn spread_out_stencil_variance() {
        let s = stencil_step_distribution(&lattice_stencil(1, Some(2)), 0.7).unwrap();
        assert!(s.d.unwrap().iter().all(|(_, w)| (w - 0.25).abs() < 1e-15));
        assert!((s.sigma2.unwrap() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn single_bond_tau_total() {
        let g = catalog_graph("single-bond").unwrap();
        let s = step_distribution(&g, 1.0).unwrap();
        assert!((s.tau_total - 1f64.tanh()).abs() < 1e-15);
        let s0 = step_distribution(&g, 0.0).unwrap();
        assert_eq!(s0.tau_total, 0.0);
        assert!(s0.d.is_none());
        assert!(step_distribution(&g, -1.0).is_err());
    }

    #[test]
    fn catalog_shape() {
        let c = catalog();
        assert_eq!(c.len(), 8);
        let bonds: Vec<usize> = c.iter().map(GraphSpec::n_bonds).collect();
        assert_eq!(bonds, vec![1, 2, 3, 4, 5, 6, 4, 7]);
    }

    #[test]
    fn catalog_round_trip() {
        let c = catalog();
        let back = parse_catalog(&catalog_to_json(&c)).unwrap();
        assert_eq!(back, c);
        assert!(parse_catalog(r#"[{"name":"bad","sites":2,"bonds":[[0,3,1.0]],"origin":0}]"#).is_err());
    }
}
