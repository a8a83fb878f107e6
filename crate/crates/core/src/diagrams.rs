//! Bounding diagrams built from two-point functions, and numerical checks
//! of the diagrammatic bounds on the expansion coefficients.
//!
//! All kernels are dense `n × n` matrices stored row-major (`k[y * n + x]`).
//! The chain diagrams `P^(j)` are evaluated with a ladder transfer: the
//! sequence `v_1, v_2, v'_1, v_3, v'_2, …, v_j, v'_{j-1}, v'_j` is joined by
//! two-point "edges", and rungs `ψ − δ` join `v_i` to `v'_i`. The one- and
//! two-replacement variants `P'`, `P''` are the first-order coefficients of
//! the same ladder over a truncated polynomial algebra, so every replacement
//! position is generated by the algebra rather than written out.

use crate::bits::SiteSet;
use crate::budget::Budget;
use crate::currents::CurrentTable;
use crate::error::{invalid, Error, Result};
use crate::expansion::{Expansion, Margin};
use crate::lattice::GraphSpec;
use crate::spin_oracle::two_point_matrix;
use crate::sum::csum;
use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use serde::Serialize;
use std::ops::{Add, Mul};

/// Series over `j` stop at the first term whose largest entry is below this.
pub const SERIES_TOL: f64 = 1e-14;
pub const SERIES_CAP: usize = 200;
/// A series whose terms still grow after this many terms is declared divergent.
const GROWTH_CHECK_FROM: usize = 10;
/// Slack for bound checks whose two sides come from different pipelines.
pub const DIAGRAM_TOL: f64 = 1e-9;
const RADIUS_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum KernelName {
    G,
    TildeG,
    Psi,
    P(usize),
    PPrime,
    PDPrime,
    QPrime,
    QDPrime,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairKernel {
    pub name: KernelName,
    pub values: Vec<Vec<f64>>,
}

impl PairKernel {
    fn from_flat(name: KernelName, n: usize, flat: &[f64]) -> Self {
        Self { name, values: flat.chunks(n).map(<[f64]>::to_vec).collect() }
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y][x]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_entry(&self) -> f64 {
        self.values.iter().flatten().fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

trait Scalar: Copy + Add<Output = Self> + Mul<Output = Self> {
    const ZERO: Self;
    fn lift(x: f64) -> Self;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    fn lift(x: f64) -> Self {
        x
    }
}

/// `a + bε + cη + dεη` with `ε² = η² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Jet([f64; 4]);

impl Add for Jet {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        Jet([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]])
    }
}

impl Mul for Jet {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        Jet([
            a[0] * b[0],
            a[0] * b[1] + a[1] * b[0],
            a[0] * b[2] + a[2] * b[0],
            a[0] * b[3] + a[1] * b[2] + a[2] * b[1] + a[3] * b[0],
        ])
    }
}

impl Scalar for Jet {
    const ZERO: Self = Jet([0.0; 4]);
    fn lift(x: f64) -> Self {
        Jet([x, 0.0, 0.0, 0.0])
    }
}

fn jets(base: &[f64], eps: Option<&[f64]>, eta: Option<&[f64]>) -> Vec<Jet> {
    (0..base.len())
        .map(|i| Jet([base[i], eps.map_or(0.0, |e| e[i]), eta.map_or(0.0, |e| e[i]), 0.0]))
        .collect()
}

/// Feeds `P^(1), P^(2), …` for edge kernel `e` and rung kernel `r` to
/// `visit` until it returns `false`.
fn ladder<T: Scalar>(n: usize, e: &[T], r: &[T], mut visit: impl FnMut(&[T]) -> bool) {
    let two = T::lift(2.0);
    let first: Vec<T> = (0..n * n).map(|i| two * r[i] * e[i]).collect();
    if !visit(&first) {
        return;
    }
    // t[(y, a, b)]: y = v_1, a = v_{i+1} (rung still open), b = v'_i.
    let mut t = vec![T::ZERO; n * n * n];
    for y in 0..n {
        for a in 0..n {
            for b in 0..n {
                t[(y * n + a) * n + b] = e[y * n + a] * e[a * n + b] * r[y * n + b];
            }
        }
    }
    let mut xt = vec![T::ZERO; n * n * n];
    let mut p = vec![T::ZERO; n * n];
    loop {
        // xt[(y, a, c)] = Σ_b t[(y, a, b)] e[b, c]
        for ya in 0..n * n {
            for c in 0..n {
                let mut s = T::ZERO;
                for b in 0..n {
                    s = s + t[ya * n + b] * e[b * n + c];
                }
                xt[ya * n + c] = s;
            }
        }
        for y in 0..n {
            for x in 0..n {
                let mut s = T::ZERO;
                for a in 0..n {
                    s = s + xt[(y * n + a) * n + x] * r[a * n + x];
                }
                p[y * n + x] = s;
            }
        }
        if !visit(&p) {
            return;
        }
        for y in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut s = T::ZERO;
                    for a in 0..n {
                        s = s + xt[(y * n + a) * n + c] * r[a * n + d];
                    }
                    t[(y * n + c) * n + d] = s * e[c * n + d];
                }
            }
        }
    }
}

/// The `j`-th ladder term (`j ≥ 1`).
fn ladder_term<T: Scalar>(n: usize, e: &[T], r: &[T], j: usize) -> Vec<T> {
    let mut k = 0;
    let mut out = Vec::new();
    ladder(n, e, r, |t| {
        k += 1;
        if k == j {
            out = t.to_vec();
        }
        k < j
    });
    out
}

/// Running sum of ladder terms with the truncation rule of [`SERIES_TOL`].
struct Series {
    acc: Vec<f64>,
    prev: f64,
    terms: usize,
    outcome: Option<std::result::Result<(), f64>>,
}

impl Series {
    fn new(start: Vec<f64>) -> Self {
        Self { acc: start, prev: f64::INFINITY, terms: 0, outcome: None }
    }

    /// Adds a term; `false` once the series is finished either way.
    fn push(&mut self, term: impl Iterator<Item = f64>) -> bool {
        let mut m = 0.0_f64;
        for (a, v) in self.acc.iter_mut().zip(term) {
            *a += v;
            m = m.max(v.abs());
        }
        self.terms += 1;
        if m < SERIES_TOL {
            self.outcome = Some(Ok(()));
        } else if self.terms >= SERIES_CAP || (self.terms >= GROWTH_CHECK_FROM && m >= self.prev) {
            self.outcome = Some(Err(m));
        }
        self.prev = m;
        self.outcome.is_none()
    }

    fn finish(self) -> Result<Vec<f64>> {
        match self.outcome {
            Some(Ok(())) => Ok(self.acc),
            Some(Err(last)) => Err(Error::SeriesTruncation { cap: self.terms, last }),
            None => unreachable!("series consumed without a verdict"),
        }
    }
}

fn matmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            out[y * n + x] = csum((0..n).map(|k| a[y * n + k] * b[k * n + x]));
        }
    }
    out
}

/// Spectral radius of an entrywise non-negative matrix.
fn spectral_radius(b: &DMatrix<f64>) -> f64 {
    let scale = b.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let m = b / scale;
    if let Some(schur) = Schur::try_new(m.clone(), f64::EPSILON, 10_000) {
        return scale * schur.complex_eigenvalues().iter().fold(0.0, |r: f64, z| r.max(z.norm()));
    }
    // Gelfand's formula with renormalised repeated squaring.
    let (mut m, mut log_norm, mut power) = (m, 0.0_f64, 1.0_f64);
    for _ in 0..60 {
        let nrm = m.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        m /= nrm;
        log_norm += nrm.ln() / power;
        m = &m * &m;
        power *= 2.0;
    }
    scale * (log_norm + m.norm().ln() / power).exp()
}

/// Two-point kernels of one graph at one `p`, with the bubble resolvent
/// `ψ` when its series converges.
#[derive(Clone, Debug)]
pub struct Diagrams {
    n: usize,
    p: f64,
    g: Vec<f64>,
    gt: Vec<f64>,
    psi: Vec<f64>,
    phi: Vec<f64>,
    converges: bool,
    radius: f64,
    /// `(tail, head, τ)` for every directed bond.
    dbonds: Vec<(usize, usize, f64)>,
}

impl Diagrams {
    pub fn new(graph: &GraphSpec, p: f64, budget: &Budget) -> Result<Self> {
        let g = two_point_matrix(graph, p, SiteSet::full(graph.n_sites), budget)?;
        Self::from_two_point(graph, p, &g)
    }

    pub fn from_two_point(graph: &GraphSpec, p: f64, g: &[Vec<f64>]) -> Result<Self> {
        let n = graph.n_sites;
        if g.len() != n || g.iter().any(|r| r.len() != n) {
            return invalid("two-point matrix has the wrong shape");
        }
        let dbonds: Vec<(usize, usize, f64)> =
            graph.directed_bonds().iter().map(|d| (d.tail, d.head, graph.tau(p, d.bond))).collect();
        let g: Vec<f64> = g.iter().flatten().copied().collect();
        let mut gt = vec![0.0; n * n];
        for y in 0..n {
            for &(tail, head, tau) in &dbonds {
                gt[y * n + head] += g[y * n + tail] * tau;
            }
        }
        let bubble = DMatrix::from_row_slice(n, n, &gt.iter().map(|v| v * v).collect::<Vec<_>>());
        let radius = spectral_radius(&bubble);
        let inv = if radius < 1.0 - RADIUS_SLACK { (DMatrix::identity(n, n) - bubble).try_inverse() } else { None };
        let converges = inv.is_some();
        let psi: Vec<f64> = match inv {
            Some(inv) => (0..n).flat_map(|y| (0..n).map(move |x| (y, x))).map(|(y, x)| inv[(y, x)]).collect(),
            None => vec![f64::NAN; n * n],
        };
        let mut phi = psi.clone();
        for y in 0..n {
            phi[y * n + y] -= 1.0;
        }
        Ok(Self { n, p, g, gt, psi, phi, converges, radius, dbonds })
    }

    /// Whether `ψ` is finite; otherwise every kernel built on it is `+∞`
    /// (all terms are non-negative) and the corresponding bounds are vacuous.
    pub fn psi_converges(&self) -> bool {
        self.converges
    }

    fn need_psi(&self) -> Result<()> {
        if self.converges {
            Ok(())
        } else {
            Err(Error::Diverged { p: self.p, radius: self.radius })
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Spectral radius of the bubble kernel `G̃(y,x)²`.
    pub fn bubble_radius(&self) -> f64 {
        self.radius
    }

    fn kernel(&self, name: KernelName, flat: &[f64]) -> PairKernel {
        PairKernel::from_flat(name, self.n, flat)
    }

    pub fn two_point(&self) -> PairKernel {
        self.kernel(KernelName::G, &self.g)
    }

    /// `G̃(y,x) = Σ_{b: head = x} ⟨φ_y φ_tail⟩ τ_b`.
    pub fn tilde_g(&self) -> PairKernel {
        self.kernel(KernelName::TildeG, &self.gt)
    }

    /// `ψ = Σ_k (G̃²)^{*k}`, from a linear solve.
    pub fn psi(&self) -> Result<PairKernel> {
        self.need_psi()?;
        Ok(self.kernel(KernelName::Psi, &self.psi))
    }

    /// The same series summed term by term; returns the kernel and the
    /// number of terms used, or an error if `cap` terms do not reach `tol`.
    pub fn psi_series(&self, tol: f64, cap: usize) -> Result<(PairKernel, usize)> {
        self.need_psi()?;
        let n = self.n;
        let b: Vec<f64> = self.gt.iter().map(|v| v * v).collect();
        let mut term: Vec<f64> = (0..n * n).map(|i| f64::from(u8::from(i % (n + 1) == 0))).collect();
        let mut acc = term.clone();
        for k in 1..=cap {
            term = matmul(n, &term, &b);
            let m = term.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            for (a, v) in acc.iter_mut().zip(&term) {
                *a += v;
            }
            if m < tol {
                return Ok((self.kernel(KernelName::Psi, &acc), k));
            }
        }
        Err(Error::SeriesTruncation { cap, last: term.iter().fold(0.0, |m: f64, v| m.max(v.abs())) })
    }

    /// `⟨φ_z φ_u⟩⟨φ_u φ_z'⟩`: one two-point function split at `u`.
    fn split_at(&self, u: usize) -> Vec<f64> {
        let n = self.n;
        (0..n * n).map(|i| self.g[(i / n) * n + u] * self.g[u * n + i % n]).collect()
    }

    /// `Σ_{v'} ⟨φ_z φ_v'⟩⟨φ_v' φ_z'⟩ ψ(v', v)`.
    fn split_to_psi(&self, v: usize) -> Vec<f64> {
        let n = self.n;
        (0..n * n)
            .map(|i| csum((0..n).map(|w| self.g[(i / n) * n + w] * self.g[w * n + i % n] * self.psi[w * n + v])))
            .collect()
    }

    /// `⟨φ_z φ_u⟩ G̃(u, z') + G̃(z, z') δ_{u,z'}`.
    fn bubble_line_at(&self, u: usize) -> Vec<f64> {
        let n = self.n;
        (0..n * n)
            .map(|i| {
                let (z, zp) = (i / n, i % n);
                self.g[z * n + u] * self.gt[u * n + zp] + if zp == u { self.gt[i] } else { 0.0 }
            })
            .collect()
    }

    /// `Σ_{v'} (⟨φ_z φ_v'⟩ G̃(v', z') + G̃(z, z') δ_{v',z'}) ψ(v', v)`.
    fn bubble_line_to_psi(&self, v: usize) -> Vec<f64> {
        let n = self.n;
        (0..n * n)
            .map(|i| {
                let (z, zp) = (i / n, i % n);
                csum((0..n).map(|w| self.g[z * n + w] * self.gt[w * n + zp] * self.psi[w * n + v]))
                    + self.gt[i] * self.psi[zp * n + v]
            })
            .collect()
    }

    /// `ψ (G̃ ∘ m) ψ`: one bubble of a `ψ − δ` chain with a line replaced by `m`.
    fn bubble_insert(&self, m: &[f64]) -> Vec<f64> {
        let c: Vec<f64> = self.gt.iter().zip(m).map(|(a, b)| a * b).collect();
        matmul(self.n, &matmul(self.n, &self.psi, &c), &self.psi)
    }

    fn p_prime_ladder(&self, u: usize) -> (Vec<Jet>, Vec<Jet>) {
        (jets(&self.g, Some(&self.split_at(u)), None), jets(&self.phi, None, None))
    }

    /// The two ladders whose `εη` coefficients add up to `P''_{u,v}`.
    fn p_dprime_ladders(&self, u: usize, v: usize) -> [(Vec<Jet>, Vec<Jet>); 2] {
        [
            (
                jets(&self.g, Some(&self.split_to_psi(v)), None),
                jets(&self.phi, None, Some(&self.bubble_insert(&self.bubble_line_at(u)))),
            ),
            (
                jets(&self.g, Some(&self.split_at(u)), None),
                jets(&self.phi, None, Some(&self.bubble_insert(&self.bubble_line_to_psi(v)))),
            ),
        ]
    }

    fn p_prime0(&self, u: usize) -> Vec<f64> {
        self.split_at(u).iter().zip(&self.g).map(|(k, g)| g * g * k).collect()
    }

    fn p_dprime0(&self, u: usize, v: usize) -> Vec<f64> {
        let (ku, kv) = (self.split_at(u), self.split_to_psi(v));
        (0..self.n * self.n).map(|i| self.g[i] * ku[i] * kv[i]).collect()
    }

    fn check_site(&self, s: usize) -> Result<()> {
        if s >= self.n {
            return invalid(format!("site {s} is outside the graph"));
        }
        Ok(())
    }

    pub fn p_j(&self, j: usize) -> Result<PairKernel> {
        if j == 0 {
            return invalid("P^(j) is defined for j >= 1");
        }
        self.need_psi()?;
        Ok(self.kernel(KernelName::P(j), &ladder_term(self.n, &self.g, &self.phi, j)))
    }

    /// `P'^(j)_u`; `j = 0` is the leading `⟨φ_yφ_x⟩²⟨φ_yφ_u⟩⟨φ_uφ_x⟩`.
    pub fn p_prime_j(&self, j: usize, u: usize) -> Result<PairKernel> {
        self.check_site(u)?;
        if j > 0 {
            self.need_psi()?;
        }
        let flat = if j == 0 {
            self.p_prime0(u)
        } else {
            let (e, r) = self.p_prime_ladder(u);
            ladder_term(self.n, &e, &r, j).iter().map(|t| t.0[1]).collect()
        };
        Ok(self.kernel(KernelName::PPrime, &flat))
    }

    pub fn p_dprime_j(&self, j: usize, u: usize, v: usize) -> Result<PairKernel> {
        self.check_site(u)?;
        self.check_site(v)?;
        self.need_psi()?;
        let flat = if j == 0 {
            self.p_dprime0(u, v)
        } else {
            let mut out = vec![0.0; self.n * self.n];
            for (e, r) in self.p_dprime_ladders(u, v) {
                for (o, t) in out.iter_mut().zip(ladder_term(self.n, &e, &r, j)) {
                    *o += t.0[3];
                }
            }
            out
        };
        Ok(self.kernel(KernelName::PDPrime, &flat))
    }

    fn p_prime_flat(&self, u: usize) -> Result<Vec<f64>> {
        self.need_psi()?;
        let (e, r) = self.p_prime_ladder(u);
        let mut series = Series::new(self.p_prime0(u));
        ladder(self.n, &e, &r, |t| series.push(t.iter().map(|j| j.0[1])));
        series.finish()
    }

    fn p_dprime_flat(&self, u: usize, v: usize) -> Result<Vec<f64>> {
        self.need_psi()?;
        // Both ladders have non-negative terms, so each is truncated on its own.
        let mut acc = self.p_dprime0(u, v);
        for (e, r) in self.p_dprime_ladders(u, v) {
            let mut series = Series::new(vec![0.0; self.n * self.n]);
            ladder(self.n, &e, &r, |t| series.push(t.iter().map(|j| j.0[3])));
            for (a, s) in acc.iter_mut().zip(series.finish()?) {
                *a += s;
            }
        }
        Ok(acc)
    }

    /// `P'_u = Σ_{j≥0} P'^(j)_u`.
    pub fn p_prime(&self, u: usize) -> Result<PairKernel> {
        self.check_site(u)?;
        Ok(self.kernel(KernelName::PPrime, &self.p_prime_flat(u)?))
    }

    pub fn p_dprime(&self, u: usize, v: usize) -> Result<PairKernel> {
        self.check_site(u)?;
        self.check_site(v)?;
        Ok(self.kernel(KernelName::PDPrime, &self.p_dprime_flat(u, v)?))
    }

    /// `(δ + G̃) · k`.
    fn dress(&self, k: &[f64]) -> Vec<f64> {
        let mut d = self.gt.clone();
        for y in 0..self.n {
            d[y * self.n + y] += 1.0;
        }
        matmul(self.n, &d, k)
    }

    fn q_prime_from(&self, pp: &[f64]) -> Vec<f64> {
        self.dress(pp)
    }

    fn q_dprime_from(&self, pdp: &[f64], pp_u: &[f64], v: usize) -> Vec<f64> {
        let n = self.n;
        let first = self.dress(pdp);
        // Σ_{v'} (δ + G̃)(y, v') ψ(v', v) (G̃ P'_u)(v', x)
        let gp = matmul(n, &self.gt, pp_u);
        let mut second = vec![0.0; n * n];
        for y in 0..n {
            for x in 0..n {
                second[y * n + x] = csum((0..n).map(|w| {
                    let d = self.gt[y * n + w] + if w == y { 1.0 } else { 0.0 };
                    d * self.psi[w * n + v] * gp[w * n + x]
                }));
            }
        }
        first.iter().zip(&second).map(|(a, b)| a + b).collect()
    }

    pub fn q_prime(&self, u: usize) -> Result<PairKernel> {
        self.check_site(u)?;
        Ok(self.kernel(KernelName::QPrime, &self.q_prime_from(&self.p_prime_flat(u)?)))
    }

    pub fn q_dprime(&self, u: usize, v: usize) -> Result<PairKernel> {
        self.check_site(u)?;
        self.check_site(v)?;
        let flat = self.q_dprime_from(&self.p_dprime_flat(u, v)?, &self.p_prime_flat(u)?, v);
        Ok(self.kernel(KernelName::QDPrime, &flat))
    }

    /// Right-hand side of the diagrammatic bound on `π^(j)(x)` for all `x`.
    ///
    /// `j = 0` gives `⟨φ_oφ_x⟩³`; for `j ≥ 1` the sum over bonds `b_i` and
    /// sites `v_i` of `P'^(0)_{v_1}(o, b̲_1) Π τ_{b_i} Q''_{v_i,v_{i+1}}(b̄_i, b̲_{i+1}) τ_{b_j} Q'_{v_j}(b̄_j, x)`
    /// is done as a chain over `(v_i, b̄_i)`.
    pub fn pi_bound(&self, o: usize, j: usize) -> Result<Vec<f64>> {
        self.check_site(o)?;
        let n = self.n;
        if j == 0 {
            return Ok((0..n).map(|x| self.g[o * n + x].powi(3)).collect());
        }
        // h[v * n + w]: chain weight ending at site v_i, bond head w.
        let mut h = vec![0.0; n * n];
        for v1 in 0..n {
            let p0 = self.p_prime0(v1);
            for &(tail, head, tau) in &self.dbonds {
                h[v1 * n + head] += p0[o * n + tail] * tau;
            }
        }
        let pp: Vec<Vec<f64>> = (0..n).map(|u| self.p_prime_flat(u)).collect::<Result<_>>()?;
        if j >= 2 {
            // qt[(u, v)][w * n + w'] = Σ_{b: head = w'} Q''_{u,v}(w, tail) τ_b
            let mut qt = Vec::with_capacity(n * n);
            for u in 0..n {
                for v in 0..n {
                    let q = self.q_dprime_from(&self.p_dprime_flat(u, v)?, &pp[u], v);
                    let mut t = vec![0.0; n * n];
                    for w in 0..n {
                        for &(tail, head, tau) in &self.dbonds {
                            t[w * n + head] += q[w * n + tail] * tau;
                        }
                    }
                    qt.push(t);
                }
            }
            for _ in 1..j {
                let mut next = vec![0.0; n * n];
                for v in 0..n {
                    for w in 0..n {
                        let hv = h[v * n + w];
                        if hv == 0.0 {
                            continue;
                        }
                        for v2 in 0..n {
                            let t = &qt[v * n + v2];
                            for w2 in 0..n {
                                next[v2 * n + w2] += hv * t[w * n + w2];
                            }
                        }
                    }
                }
                h = next;
            }
        }
        let qp: Vec<Vec<f64>> = pp.iter().map(|p| self.q_prime_from(p)).collect();
        Ok((0..n)
            .map(|x| csum((0..n).flat_map(|v| (0..n).map(move |w| (v, w))).map(|(v, w)| h[v * n + w] * qp[v][w * n + x])))
            .collect())
    }

    /// `δ_{y,x} + G̃(y,x) − ⟨φ_yφ_x⟩`, smallest over all pairs.
    pub fn g_delta_margin(&self) -> f64 {
        let n = self.n;
        (0..n * n)
            .map(|i| f64::from(u8::from(i / n == i % n)) + self.gt[i] - self.g[i])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Outcome of the bound `π^(j)(x) ≤ RHS(x)` on one graph.
///
/// When `ψ` diverges the right-hand side is `+∞` for `j ≥ 1`: `bound` and
/// `margins` are then absent and `vacuous` is set.
#[derive(Clone, Debug, Serialize)]
pub struct DiagramReport {
    pub graph: String,
    pub p: f64,
    pub j: usize,
    pub bubble_radius: f64,
    pub pi: Vec<f64>,
    pub bound: Option<Vec<f64>>,
    pub margins: Option<Vec<f64>>,
    pub min_margin: Option<f64>,
    pub vacuous: bool,
    pub pass: bool,
}

pub fn verify_diagrammatic_bounds(graph: &GraphSpec, p: f64, j: usize, budget: &Budget) -> Result<DiagramReport> {
    graph.require_ferromagnetic()?;
    let mut ex = Expansion::new(graph, p, budget)?;
    let dg = Diagrams::from_two_point(graph, p, ex.two_point())?;
    let pi = ex.pi(j)?;
    let vacuous = j > 0 && !dg.psi_converges();
    let bound = if vacuous { None } else { Some(dg.pi_bound(graph.origin, j)?) };
    let margins: Option<Vec<f64>> = bound.as_ref().map(|b| b.iter().zip(&pi).map(|(b, v)| b - v).collect());
    let min_margin = margins.as_ref().map(|m| m.iter().copied().fold(f64::INFINITY, f64::min));
    Ok(DiagramReport {
        graph: graph.name.clone(),
        p,
        j,
        bubble_radius: dg.bubble_radius(),
        pi,
        bound,
        margins,
        min_margin,
        vacuous,
        pass: min_margin.map_or(true, |m| m >= -DIAGRAM_TOL),
    })
}

/// Names of the auxiliary inequalities, in the order [`BoundChecker::margins`] returns them.
pub const AUX_BOUNDS: [&str; 5] = ["double_connection", "theta", "theta_connected", "theta_prime", "theta_double_prime"];

/// Evaluates the auxiliary bounds on `Θ`, `Θ'`, `Θ''` and the
/// double-connection sum, sharing kernels and pair tables across calls.
pub struct BoundChecker<'g> {
    ex: Expansion<'g>,
    dg: Diagrams,
    single: CurrentTable,
    p_prime: Vec<Vec<f64>>,
    p_dprime: Vec<Option<Vec<f64>>>,
}

impl<'g> BoundChecker<'g> {
    pub fn new(graph: &'g GraphSpec, p: f64, budget: &Budget) -> Result<Self> {
        graph.require_ferromagnetic()?;
        let ex = Expansion::new(graph, p, budget)?;
        let dg = Diagrams::from_two_point(graph, p, ex.two_point())?;
        let single = CurrentTable::build(graph, p, graph.all_bonds(), budget)?;
        let n = graph.n_sites;
        let p_prime = if dg.psi_converges() { (0..n).map(|u| dg.p_prime_flat(u)).collect::<Result<_>>()? } else { vec![] };
        Ok(Self { ex, dg, single, p_prime, p_dprime: vec![None; n * n] })
    }

    pub fn diagrams(&self) -> &Diagrams {
        &self.dg
    }

    fn p_dprime(&mut self, u: usize, v: usize) -> Result<&[f64]> {
        let n = self.dg.n;
        if self.p_dprime[u * n + v].is_none() {
            self.p_dprime[u * n + v] = Some(self.dg.p_dprime_flat(u, v)?);
        }
        Ok(self.p_dprime[u * n + v].as_deref().unwrap())
    }

    /// `Σ_{∂n = o△x} w(n)/Z · 1[o ⇒ x, o ↔ y]`.
    pub fn double_connection_through(&self, o: usize, x: usize, y: usize) -> f64 {
        let topo = self.ex.topology();
        let want = SiteSet::singleton(o).toggle(x);
        let z = self.single.weight_with_sources(SiteSet::EMPTY);
        csum(
            self.single
                .entries
                .iter()
                .filter(|e| e.1 == want && topo.doubly_connected(e.0, o, x) && topo.connected(e.0, o, y))
                .map(|e| e.2),
        ) / z
    }

    /// Margins (RHS − LHS) for one `(A, y, x, v)`, named as in [`AUX_BOUNDS`].
    /// Bounds whose right-hand side involves a divergent `ψ` are `+∞` and
    /// left out of the returned list.
    pub fn margins(&mut self, a: SiteSet, y: usize, x: usize, v: usize) -> Result<Vec<Margin>> {
        let n = self.dg.n;
        for s in [y, x, v] {
            self.dg.check_site(s)?;
        }
        let o = self.ex.graph().origin;
        let gt = self.dg.gt.clone();
        let d = |s: usize, t: usize| gt[s * n + t] + f64::from(u8::from(s == t));
        let margin = |name: &str, value: f64| Margin { name: name.into(), value };

        let lhs_a = self.double_connection_through(o, x, y);
        let rhs_a = self.dg.p_prime0(y)[o * n + x];

        let theta = self.ex.theta(y, x, a)?;
        let theta_p: Vec<f64> = (0..n).map(|z| self.ex.theta_prime(z, x, a)).collect::<Result<_>>()?;
        let rhs_b = csum((0..n).map(|z| d(y, z) * theta_p[z]));
        let mut out = vec![margin(AUX_BOUNDS[0], rhs_a - lhs_a), margin(AUX_BOUNDS[1], rhs_b - theta)];
        if !self.dg.psi_converges() {
            return Ok(out);
        }

        let topo = self.ex.topology().clone();
        let lhs_c = self.ex.theta_with(y, x, a, |pos| f64::from(u8::from(topo.connected(pos, y, v))))?;
        let theta_pp: Vec<f64> = (0..n).map(|z| self.ex.theta_double_prime(z, x, v, a)).collect::<Result<_>>()?;
        let psi = &self.dg.psi;
        let rhs_c = csum((0..n).map(|z| d(y, z) * theta_pp[z]))
            + csum((0..n).flat_map(|w| (0..n).map(move |z| (w, z))).map(|(w, z)| d(y, w) * gt[w * n + z] * theta_p[z] * psi[w * n + v]));

        let rhs_d1 = csum(a.iter().map(|u| self.p_prime[u][y * n + x]));
        let mut rhs_d2 = 0.0;
        for u in a.iter() {
            rhs_d2 += self.p_dprime(u, v)?[y * n + x];
        }
        out.push(margin(AUX_BOUNDS[2], rhs_c - lhs_c));
        out.push(margin(AUX_BOUNDS[3], rhs_d1 - theta_p[y]));
        out.push(margin(AUX_BOUNDS[4], rhs_d2 - theta_pp[y]));
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AuxReport {
    pub graph: String,
    pub p: f64,
    pub bubble_radius: f64,
    pub checks: usize,
    /// Smallest margin per inequality that has a finite right-hand side.
    pub worst: Vec<Margin>,
    /// Inequalities whose right-hand side is `+∞` because `ψ` diverges.
    pub vacuous: Vec<String>,
    pub pass: bool,
}

/// Single-point auxiliary bound check.
pub fn verify_aux_bounds(graph: &GraphSpec, p: f64, a: SiteSet, y: usize, x: usize, v: usize, budget: &Budget) -> Result<Vec<Margin>> {
    BoundChecker::new(graph, p, budget)?.margins(a, y, x, v)
}

/// Every `A` with `|A| ≤ max_a` and every `(y, x, v)`.
pub fn aux_bound_sweep(graph: &GraphSpec, p: f64, max_a: usize, budget: &Budget) -> Result<AuxReport> {
    let mut chk = BoundChecker::new(graph, p, budget)?;
    let n = graph.n_sites;
    let mut worst: Vec<Margin> = Vec::new();
    let mut checks = 0;
    for bits in 0u64..(1 << n) {
        let a = SiteSet(bits);
        if a.len() > max_a {
            continue;
        }
        for y in 0..n {
            for x in 0..n {
                for v in 0..n {
                    let ms = chk.margins(a, y, x, v)?;
                    checks += 1;
                    if worst.is_empty() {
                        worst = ms;
                    } else {
                        for (w, m) in worst.iter_mut().zip(ms) {
                            w.value = w.value.min(m.value);
                        }
                    }
                }
            }
        }
    }
    let vacuous = AUX_BOUNDS[worst.len()..].iter().map(|s| s.to_string()).collect();
    let pass = worst.iter().all(|m| m.value >= -DIAGRAM_TOL);
    Ok(AuxReport { graph: graph.name.clone(), p, bubble_radius: chk.dg.bubble_radius(), checks, worst, vacuous, pass })
}
