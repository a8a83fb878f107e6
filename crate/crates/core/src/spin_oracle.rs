//! Ground truth by direct summation over spin configurations.
//!
//! Configurations are visited in lexicographic order in fixed chunks, each
//! chunk summed with compensation and the chunks merged in order, so results
//! do not depend on the number of worker threads.

use crate::bits::SiteSet;
use crate::budget::Budget;
use crate::error::{invalid, Error, Result};
use crate::lattice::GraphSpec;
use crate::sum::CompensatedSum;
use rayon::prelude::*;

const CHUNK_BITS: usize = 12;

/// Restriction of a graph to a site subset, with the field `h`.
#[derive(Clone, Debug)]
pub struct SpinSystem<'g> {
    graph: &'g GraphSpec,
    p: f64,
    h: f64,
    members: Vec<usize>,
    /// Bonds of B_A as compact index pairs.
    bonds: Vec<(usize, usize, f64)>,
    /// Largest possible value of `−pH`, subtracted before exponentiating.
    shift: f64,
}

impl<'g> SpinSystem<'g> {
    pub fn new(graph: &'g GraphSpec, p: f64, h: f64, restriction: SiteSet, budget: &Budget) -> Result<Self> {
        if !restriction.is_subset(SiteSet::full(graph.n_sites.min(64))) || graph.n_sites > 64 {
            return invalid("restriction is not a subset of the sites");
        }
        let members: Vec<usize> = restriction.iter().collect();
        budget.check_single("spin enumeration", 2f64.powi(members.len() as i32))?;
        let pos = |s: usize| members.iter().position(|&m| m == s);
        let bonds: Vec<(usize, usize, f64)> = graph
            .bonds
            .iter()
            .filter_map(|b| Some((pos(b.u)?, pos(b.v)?, b.j)))
            .collect();
        let shift = p.abs() * (bonds.iter().map(|b| b.2.abs()).sum::<f64>() + h.abs() * members.len() as f64);
        Ok(Self { graph, p, h, members, bonds, shift })
    }

    pub fn whole(graph: &'g GraphSpec, p: f64, budget: &Budget) -> Result<Self> {
        Self::new(graph, p, 0.0, SiteSet::full(graph.n_sites), budget)
    }

    fn log_weight(&self, sigma: u64) -> f64 {
        let spin = |i: usize| if (sigma >> i) & 1 == 1 { -1.0 } else { 1.0 };
        let mut e = 0.0;
        for &(u, v, j) in &self.bonds {
            e += j * spin(u) * spin(v);
        }
        if self.h != 0.0 {
            for i in 0..self.members.len() {
                e += self.h * spin(i);
            }
        }
        self.p * e - self.shift
    }

    /// Chunked compensated sums of `w(σ)·f_k(σ)` for each observable `k`.
    fn sweep<F>(&self, n_obs: usize, obs: F) -> Vec<f64>
    where
        F: Fn(u64, f64, &mut [CompensatedSum]) + Sync,
    {
        let k = self.members.len();
        let total: u64 = 1 << k;
        let chunk: u64 = 1 << CHUNK_BITS.min(k);
        let n_chunks = total / chunk;
        let partials: Vec<Vec<CompensatedSum>> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = vec![CompensatedSum::new(); n_obs];
                for sigma in c * chunk..(c + 1) * chunk {
                    obs(sigma, self.log_weight(sigma).exp(), &mut acc);
                }
                acc
            })
            .collect();
        let mut acc = vec![CompensatedSum::new(); n_obs];
        for part in &partials {
            for (a, p) in acc.iter_mut().zip(part) {
                a.merge(p);
            }
        }
        acc.iter().map(CompensatedSum::value).collect()
    }

    /// `Z_A = 2^{-|A|} Σ_φ exp(−p H_A(φ))`; the empty set gives 1.
    pub fn partition_function(&self) -> f64 {
        let s = self.sweep(1, |_, w, acc| acc[0].add(w));
        let k = self.members.len() as i32;
        s[0] * (self.shift - k as f64 * std::f64::consts::LN_2).exp()
    }

    /// `⟨φ_x φ_y⟩_A`, with 0 outside `A` and 1 on the diagonal of `A`.
    pub fn two_point(&self, x: usize, y: usize) -> Result<f64> {
        check_site(self.graph, x)?;
        check_site(self.graph, y)?;
        let (Some(ix), Some(iy)) = (self.index(x), self.index(y)) else {
            return Ok(0.0);
        };
        if ix == iy {
            return Ok(1.0);
        }
        let mask = (1u64 << ix) | (1u64 << iy);
        let s = self.sweep(2, |sigma, w, acc| {
            acc[0].add(w);
            acc[1].add(if (sigma & mask).count_ones() == 1 { -w } else { w });
        });
        Ok(s[1] / s[0])
    }

    /// All correlations at once, indexed by full-graph site; cost `2^|A|·|A|²`.
    pub fn two_point_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.graph.n_sites;
        let k = self.members.len();
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
        let s = self.sweep(1 + pairs.len(), |sigma, w, acc| {
            acc[0].add(w);
            for (i, &(a, b)) in pairs.iter().enumerate() {
                let same = ((sigma >> a) ^ (sigma >> b)) & 1 == 0;
                acc[1 + i].add(if same { w } else { -w });
            }
        });
        let mut g = vec![vec![0.0; n]; n];
        for &m in &self.members {
            g[m][m] = 1.0;
        }
        for (i, &(a, b)) in pairs.iter().enumerate() {
            let c = s[1 + i] / s[0];
            let (x, y) = (self.members[a], self.members[b]);
            g[x][y] = c;
            g[y][x] = c;
        }
        g
    }

    fn index(&self, site: usize) -> Option<usize> {
        self.members.iter().position(|&m| m == site)
    }
}

fn check_site(graph: &GraphSpec, x: usize) -> Result<()> {
    if x >= graph.n_sites {
        invalid(format!("unknown site {x}"))
    } else {
        Ok(())
    }
}

/// Partition function of `graph` restricted to `restriction`.
pub fn partition_function(graph: &GraphSpec, p: f64, h: f64, restriction: SiteSet, budget: &Budget) -> Result<f64> {
    Ok(SpinSystem::new(graph, p, h, restriction, budget)?.partition_function())
}

/// `⟨φ_x φ_y⟩` at zero field on the subgraph induced by `restriction`.
pub fn two_point(graph: &GraphSpec, p: f64, restriction: SiteSet, x: usize, y: usize, budget: &Budget) -> Result<f64> {
    SpinSystem::new(graph, p, 0.0, restriction, budget)?.two_point(x, y)
}

pub fn two_point_matrix(graph: &GraphSpec, p: f64, restriction: SiteSet, budget: &Budget) -> Result<Vec<Vec<f64>>> {
    Ok(SpinSystem::new(graph, p, 0.0, restriction, budget)?.two_point_matrix())
}

/// `⟨φ_xφ_y⟩_Λ − ⟨φ_xφ_y⟩_{A^c}`; non-negative for ferromagnets.
pub fn two_point_monotonicity_check(
    graph: &GraphSpec,
    p: f64,
    a: SiteSet,
    x: usize,
    y: usize,
    budget: &Budget,
) -> Result<f64> {
    if !graph.is_ferromagnetic() {
        return Err(Error::NotFerromagnetic);
    }
    let all = SiteSet::full(graph.n_sites);
    Ok(two_point(graph, p, all, x, y, budget)? - two_point(graph, p, a.complement(graph.n_sites), x, y, budget)?)
}
