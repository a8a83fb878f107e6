//! Random-walk Green's functions on the torus `(Z/MZ)^d` and the
//! convolution estimates used to close the bootstrap for long-range
//! ("spread-out") models.
//!
//! Fields are stored row-major with the first coordinate slowest. Distances
//! always use the minimal-image Euclidean norm, and `⟨x⟩ = |x| ∨ 1`.

use crate::bits::SiteSet;
use crate::budget::Budget;
use crate::error::{invalid, Result};
use crate::lattice::{tau_bond, GraphSpec};
use crate::spin_oracle::two_point_matrix;
use gauss_quad::legendre::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Largest torus we are willing to allocate.
pub const MAX_FIELD_POINTS: usize = 1 << 24;
/// Fixed-point iteration stops once the ℓ¹ update (which bounds the sup-norm
/// update) falls below this; the ℓ¹ criterion also pins down `Σ_x S`.
pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const FIXED_POINT_CAP: usize = 200_000;
/// A sup-ratio sequence is called stable when `last / first` stays below this.
pub const STABILITY_FACTOR: f64 = 1.05;
/// Point pairs (after factoring out translations) swept exhaustively.
pub const FULL_SWEEP_LIMIT: usize = 1_000_000;
pub const CONV_SAMPLES: usize = 100_000;
pub const STAR_SAMPLES: usize = 10_000;
pub const SAMPLING_SEED: u64 = 0x5eed_1a7e;

const QUAD_NODES: usize = 48;

/// A real field on the torus of side `side` in dimension `d`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatticeField {
    pub d: usize,
    pub side: usize,
    pub values: Vec<f64>,
}

impl LatticeField {
    pub fn zeros(d: usize, side: usize) -> Result<Self> {
        if d == 0 || side == 0 {
            return invalid("torus needs d >= 1 and side >= 1");
        }
        match side.checked_pow(d as u32).filter(|&n| n <= MAX_FIELD_POINTS) {
            Some(n) => Ok(Self { d, side, values: vec![0.0; n] }),
            None => invalid(format!("torus of side {side} in d = {d} exceeds {MAX_FIELD_POINTS} points")),
        }
    }

    pub fn delta(d: usize, side: usize) -> Result<Self> {
        let mut f = Self::zeros(d, side)?;
        f.values[0] = 1.0;
        Ok(f)
    }

    /// Field with the given (wrapped) displacements; repeated entries add up.
    pub fn from_stencil(d: usize, side: usize, stencil: &[(Vec<i64>, f64)]) -> Result<Self> {
        let mut f = Self::zeros(d, side)?;
        for (x, w) in stencil {
            if x.len() != d {
                return invalid("stencil point of the wrong dimension");
            }
            let i = f.index(x);
            f.values[i] += w;
        }
        Ok(f)
    }

    /// Simple random walk step distribution, `1/(2d)` on each neighbour.
    pub fn nearest_neighbor(d: usize, side: usize) -> Result<Self> {
        let mut stencil = Vec::with_capacity(2 * d);
        for i in 0..d {
            for s in [-1i64, 1] {
                let mut x = vec![0i64; d];
                x[i] = s;
                stencil.push((x, 1.0 / (2 * d) as f64));
            }
        }
        Self::from_stencil(d, side, &stencil)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, x: &[i64]) -> usize {
        let m = self.side as i64;
        x.iter().fold(0usize, |acc, &c| acc * self.side + c.rem_euclid(m) as usize)
    }

    /// Minimal-image coordinates of a point, each in `(−M/2, M/2]`.
    pub fn coords(&self, mut i: usize) -> Vec<i64> {
        let mut x = vec![0i64; self.d];
        for c in x.iter_mut().rev() {
            *c = minimal_image((i % self.side) as i64, self.side);
            i /= self.side;
        }
        x
    }

    pub fn get(&self, x: &[i64]) -> f64 {
        self.values[self.index(x)]
    }

    pub fn norm(&self, i: usize) -> f64 {
        norm(&self.coords(i))
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    fn same_torus(&self, other: &Self) -> Result<()> {
        if self.d != other.d || self.side != other.side {
            return invalid("fields live on different tori");
        }
        Ok(())
    }

    /// Cyclic convolution `(self * other)(x) = Σ_y self(y) other(x − y)`.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.same_torus(other)?;
        let support: Vec<(Vec<i64>, f64)> = self
            .values
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(i, &w)| (self.coords(i), w))
            .collect();
        Ok(Self { d: self.d, side: self.side, values: sparse_convolve(&support, other) })
    }
}

fn minimal_image(c: i64, side: usize) -> i64 {
    let m = side as i64;
    let c = c.rem_euclid(m);
    if 2 * c > m {
        c - m
    } else {
        c
    }
}

fn norm(x: &[i64]) -> f64 {
    (x.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt()
}

/// `⟨x⟩ = |x| ∨ 1`.
fn bracket(x: &[i64]) -> f64 {
    norm(x).max(1.0)
}

/// Per-axis tables for `z ↦ index(z − s)`: entry `[i][c]` is the contribution
/// of coordinate `c` on axis `i`.
fn shift_tables(side: usize, d: usize, s: &[i64]) -> Vec<Vec<usize>> {
    let m = side as i64;
    (0..d)
        .map(|i| {
            let stride = side.pow((d - 1 - i) as u32);
            (0..m).map(|c| (c - s[i]).rem_euclid(m) as usize * stride).collect()
        })
        .collect()
}

/// `out(x) = Σ_k w_k f(x − k)`, parallel over slabs of the first coordinate.
fn sparse_convolve(support: &[(Vec<i64>, f64)], f: &LatticeField) -> Vec<f64> {
    let (d, side) = (f.d, f.side);
    let slab = f.len() / side;
    let mut out = vec![0.0; f.len()];
    out.par_chunks_mut(slab).enumerate().for_each(|(first, chunk)| {
        for (j, o) in chunk.iter_mut().enumerate() {
            let mut x = vec![0i64; d];
            let mut rest = first * slab + j;
            for c in x.iter_mut().rev() {
                *c = (rest % side) as i64;
                rest /= side;
            }
            let mut acc = 0.0;
            let mut y = vec![0i64; d];
            for (k, w) in support {
                for i in 0..d {
                    y[i] = x[i] - k[i];
                }
                acc += w * f.values[f.index(&y)];
            }
            *o = acc;
        }
    });
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenMethod {
    FixedPoint,
    /// Spectral time integral with the zero mode removed (`r = 1` only).
    Spectral,
}

#[derive(Clone, Debug, Serialize)]
pub struct GreenSolution {
    pub field: LatticeField,
    pub method: GreenMethod,
    /// Fixed-point sweeps, or quadrature panels for the spectral method.
    pub iterations: usize,
    /// Last ℓ¹ update, or the largest contribution of the last panel.
    pub last_update: f64,
    pub converged: bool,
}

/// Solves `S = δ + r D * S` on the torus.
///
/// For `r Σ|D| < 1` this is plain fixed-point iteration. At `r = 1` the
/// torus Green's function does not exist; for nearest-neighbour `D` in
/// `d ≥ 3` we return the zero-mode-regularized one,
/// `S(x) = M^{−d} Σ_{k≠0} e^{ik·x} / (1 − D̂(k))`, which satisfies
/// `S = δ − M^{−d} + D * S`.
pub fn green_function(dist: &LatticeField, r: f64) -> Result<GreenSolution> {
    if !(0.0..=1.0).contains(&r) {
        return invalid(format!("r = {r} is outside [0, 1]"));
    }
    let mass: f64 = dist.values.iter().map(|v| v.abs()).sum();
    if r * mass < 1.0 - 1e-12 {
        return Ok(fixed_point(dist, r));
    }
    if r < 1.0 {
        return invalid(format!("r·Σ|D| = {} >= 1: the series diverges", r * mass));
    }
    if dist.d <= 2 {
        return invalid(format!("the random-walk Green's function diverges at r = 1 in d = {}", dist.d));
    }
    let nn = LatticeField::nearest_neighbor(dist.d, dist.side)?;
    if dist.side < 3 || dist.values.iter().zip(&nn.values).any(|(a, b)| (a - b).abs() > 1e-15) {
        return invalid("r = 1 is only supported for the nearest-neighbour walk on a torus of side >= 3");
    }
    let spec = SpectralGreen::new(dist.d, dist.side, 1.0);
    let mut field = LatticeField::zeros(dist.d, dist.side)?;
    let mut classes: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for i in 0..field.len() {
        classes.entry(spec.class_of(&field.coords(i))).or_default().push(i);
    }
    let keys: Vec<&Vec<usize>> = classes.keys().collect();
    let vals: Vec<(f64, f64)> = keys.par_iter().map(|k| spec.eval(k)).collect();
    let mut last = 0.0f64;
    for ((_, members), (v, tail)) in classes.iter().zip(vals) {
        for &i in members {
            field.values[i] = v;
        }
        last = last.max(tail);
    }
    Ok(GreenSolution { field, method: GreenMethod::Spectral, iterations: spec.panels.len(), last_update: last, converged: true })
}

fn fixed_point(dist: &LatticeField, r: f64) -> GreenSolution {
    let (d, side) = (dist.d, dist.side);
    let support: Vec<(Vec<i64>, f64)> = dist
        .values
        .iter()
        .enumerate()
        .filter(|(_, &w)| w != 0.0)
        .map(|(i, &w)| (dist.coords(i), r * w))
        .collect();
    let mut s = LatticeField::delta(d, side).expect("same torus as D");
    let mut update = 0.0;
    for it in 1..=FIXED_POINT_CAP {
        let mut next = sparse_convolve(&support, &s);
        next[0] += 1.0;
        update = next.iter().zip(&s.values).map(|(a, b)| (a - b).abs()).sum();
        s.values = next;
        if update < FIXED_POINT_TOL {
            return GreenSolution { field: s, method: GreenMethod::FixedPoint, iterations: it, last_update: update, converged: true };
        }
    }
    GreenSolution { field: s, method: GreenMethod::FixedPoint, iterations: FIXED_POINT_CAP, last_update: update, converged: false }
}

/// `‖S − δ − r D * S‖_∞`.
pub fn fixed_point_residual(dist: &LatticeField, r: f64, s: &LatticeField) -> Result<f64> {
    let ds = dist.convolve(s)?;
    Ok(s
        .values
        .iter()
        .zip(&ds.values)
        .enumerate()
        .map(|(i, (sv, dv))| (sv - f64::from(u8::from(i == 0)) - r * dv).abs())
        .fold(0.0, f64::max))
}

/// Nearest-neighbour torus Green's function through
/// `1/(1 − rD̂) = ∫_0^∞ e^{−t(1 − rD̂)} dt`, which factorizes over axes:
/// `S_r(x) = ∫ e^{−(1−r)t} Π_i h_{x_i}(rt/d) dt` with
/// `h_a(s) = M^{−1} Σ_k e^{s(cos θ_k − 1)} cos(θ_k a)`. At `r = 1` the zero
/// mode `M^{−d}` is subtracted from the product.
struct SpectralGreen {
    d: usize,
    zero_mode: f64,
    /// Per panel: weights (including `e^{−(1−r)t}`) and `h_a` for `a = 0..=M/2`.
    panels: Vec<(Vec<f64>, Vec<Vec<f64>>)>,
}

impl SpectralGreen {
    fn new(d: usize, side: usize, r: f64) -> Self {
        let m = side as f64;
        let gap = 1.0 - (2.0 * PI / m).cos();
        let slowest = if r < 1.0 { 1.0 - r } else { r * gap / d as f64 };
        let t_end = 40.0 / slowest;
        let rule = GaussLegendre::new(QUAD_NODES).expect("valid degree");
        let thetas: Vec<f64> = (0..side).map(|k| 2.0 * PI * k as f64 / m).collect();
        let mut panels = Vec::new();
        let (mut a, mut b) = (0.0, 1.0);
        while a < t_end {
            let half = 0.5 * (b - a);
            let mut weights = Vec::with_capacity(QUAD_NODES);
            let mut hs = Vec::with_capacity(QUAD_NODES);
            for &(x, w) in rule.as_node_weight_pairs() {
                let t = a + half * (x + 1.0);
                weights.push(w * half * (-(1.0 - r) * t).exp());
                let s = r * t / d as f64;
                let e: Vec<f64> = thetas.iter().map(|th| (s * (th.cos() - 1.0)).exp()).collect();
                hs.push(
                    (0..=side / 2)
                        .map(|dist| thetas.iter().zip(&e).map(|(th, ek)| ek * (th * dist as f64).cos()).sum::<f64>() / m)
                        .collect(),
                );
            }
            panels.push((weights, hs));
            a = b;
            b *= 2.0;
        }
        let zero_mode = if r < 1.0 { 0.0 } else { m.powi(-(d as i32)) };
        Self { d, zero_mode, panels }
    }

    /// Sorted absolute minimal-image coordinates: the value depends only on these.
    fn class_of(&self, x: &[i64]) -> Vec<usize> {
        let mut k: Vec<usize> = x.iter().map(|c| c.unsigned_abs() as usize).collect();
        k.sort_unstable();
        k
    }

    /// Value at a point of the given class, and the size of the last panel.
    fn eval(&self, class: &[usize]) -> (f64, f64) {
        debug_assert_eq!(class.len(), self.d);
        let mut total = 0.0;
        let mut last = 0.0;
        for (weights, hs) in &self.panels {
            last = weights
                .iter()
                .zip(hs)
                .map(|(w, h)| w * (class.iter().map(|&a| h[a]).product::<f64>() - self.zero_mode))
                .sum::<f64>();
            total += last;
        }
        (total, last.abs())
    }
}

/// Nearest-neighbour `S_r` at selected points through the spectral integral,
/// without allocating the field. At `r = 1` (needs `d ≥ 3`) the value is the
/// zero-mode-regularized one of [`green_function`].
pub fn nn_green_at(d: usize, side: usize, r: f64, points: &[Vec<i64>]) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&r) {
        return invalid(format!("r = {r} is outside [0, 1]"));
    }
    if r == 1.0 && d <= 2 {
        return invalid(format!("the random-walk Green's function diverges at r = 1 in d = {d}"));
    }
    if d == 0 || side < 3 {
        return invalid("need d >= 1 and a torus side >= 3");
    }
    if points.iter().any(|x| x.len() != d) {
        return invalid("point of the wrong dimension");
    }
    let spec = SpectralGreen::new(d, side, r);
    Ok(points
        .par_iter()
        .map(|x| {
            let wrapped: Vec<i64> = x.iter().map(|&c| minimal_image(c, side)).collect();
            spec.eval(&spec.class_of(&wrapped)).0
        })
        .collect())
}

/// The constant in `S_1(x) ~ (a_d/σ²)|x|^{−(d−2)}`: `(d/2) π^{−d/2} Γ(d/2 − 1)`.
pub fn a_d(d: usize) -> Result<f64> {
    if d <= 2 {
        return invalid(format!("a_d needs d > 2, got {d}"));
    }
    let h = d as f64 / 2.0;
    Ok(h * PI.powf(-h) * statrs::function::gamma::gamma(h - 1.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticsReport {
    pub d: usize,
    pub side: usize,
    pub window: (f64, f64),
    /// Number of symmetry classes of points in the window.
    pub classes: usize,
    pub max_deviation: f64,
    pub worst_point: Vec<i64>,
}

/// `sup_{lo ≤ |x| ≤ hi} |S_1(x) σ² |x|^{d−2} / a_d − 1|` for the
/// nearest-neighbour walk (`σ² = 1`). The window must stay within `M/4` so
/// that wrap-around does not dominate.
pub fn check_green_asymptotics(d: usize, side: usize, r: f64, window: (f64, f64)) -> Result<AsymptoticsReport> {
    if r != 1.0 {
        return invalid(format!("asymptotics are only claimed at r = 1, got r = {r}"));
    }
    let ad = a_d(d)?;
    let (lo, hi) = window;
    if !(lo >= 1.0 && lo <= hi) {
        return invalid("window must satisfy 1 <= lo <= hi");
    }
    if hi > side as f64 / 4.0 {
        return invalid(format!("window upper end {hi} exceeds M/4 = {}", side as f64 / 4.0));
    }
    if side < 3 {
        return invalid("torus side must be at least 3");
    }
    // Non-decreasing tuples of absolute coordinates with norm in the window.
    let mut classes = Vec::new();
    let mut cur = vec![0usize; d];
    let hi_c = hi.floor() as usize;
    fn rec(i: usize, min: usize, hi_c: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, lo: f64, hi: f64) {
        if i == cur.len() {
            let n = (cur.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt();
            if n >= lo && n <= hi {
                out.push(cur.clone());
            }
            return;
        }
        for c in min..=hi_c {
            cur[i] = c;
            rec(i + 1, c, hi_c, cur, out, lo, hi);
        }
    }
    rec(0, 0, hi_c, &mut cur, &mut classes, lo, hi);
    if classes.is_empty() {
        return invalid("no lattice points in the window");
    }
    let spec = SpectralGreen::new(d, side, 1.0);
    let devs: Vec<f64> = classes
        .par_iter()
        .map(|k| {
            let n = (k.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt();
            (spec.eval(k).0 * n.powi(d as i32 - 2) / ad - 1.0).abs()
        })
        .collect();
    let (worst, &max_deviation) = devs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    Ok(AsymptoticsReport {
        d,
        side,
        window,
        classes: classes.len(),
        max_deviation,
        worst_point: classes[worst].iter().map(|&c| c as i64).collect(),
    })
}

/// Sup of a scale-invariant ratio at one torus size.
#[derive(Clone, Debug, Serialize)]
pub struct SupRatio {
    pub side: usize,
    pub sup: f64,
    /// Configurations evaluated (translations factored out).
    pub samples: usize,
    pub full_sweep: bool,
    /// The maximizing configuration, first point translated to the origin.
    pub argmax: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub d: usize,
    pub sizes: Vec<SupRatio>,
    /// `last.sup / first.sup`.
    pub growth: f64,
    pub stable: bool,
}

impl StabilityReport {
    fn new(d: usize, sizes: Vec<SupRatio>) -> Self {
        let growth = match (sizes.first(), sizes.last()) {
            (Some(a), Some(b)) => b.sup / a.sup,
            _ => 1.0,
        };
        let stable = sizes.iter().all(|s| s.sup.is_finite() && s.sup > 0.0) && growth <= STABILITY_FACTOR;
        Self { d, sizes, growth, stable }
    }
}

/// The table `i ↦ ⟨i⟩^{−a}` over the torus.
fn power_table(d: usize, side: usize, a: f64) -> Result<LatticeField> {
    let mut f = LatticeField::zeros(d, side)?;
    for i in 0..f.len() {
        f.values[i] = bracket(&f.coords(i)).powf(-a);
    }
    Ok(f)
}

fn check_sides(boxes: &[usize]) -> Result<()> {
    if boxes.is_empty() || boxes.iter().any(|&m| m < 2) {
        return invalid("need at least one box side, each >= 2");
    }
    Ok(())
}

/// Points lying on coordinate axes at distances 1, M/4 and M/2, plus the origin.
fn axis_extremes(d: usize, side: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![0i64; d]];
    let mut ks = vec![1i64, (side / 4) as i64, (side / 2) as i64];
    ks.sort_unstable();
    ks.dedup();
    for i in 0..d {
        for &k in ks.iter().filter(|&&k| k > 0) {
            for s in [-1, 1] {
                let mut x = vec![0i64; d];
                x[i] = s * k;
                out.push(x);
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

fn random_point(rng: &mut ChaCha8Rng, d: usize, side: usize) -> Vec<i64> {
    (0..d).map(|_| minimal_image(rng.gen_range(0..side as i64), side)).collect()
}

/// `sup_{v,x} [Σ_y ⟨y−v⟩^{−a} ⟨x−y⟩^{−b}] · ⟨x−v⟩^{(a∧d + b) − d}` at each
/// torus side. By translation invariance `v = 0`.
pub fn convolution_bound_check(d: usize, a: f64, b: f64, boxes: &[usize]) -> Result<StabilityReport> {
    convolution_bound_check_seeded(d, a, b, boxes, SAMPLING_SEED)
}

/// [`convolution_bound_check`] with an explicit seed for the subsample used on
/// tori too large to sweep.
pub fn convolution_bound_check_seeded(d: usize, a: f64, b: f64, boxes: &[usize], seed: u64) -> Result<StabilityReport> {
    if !(a >= b && b > 0.0) || a + b <= d as f64 {
        return invalid(format!("need a >= b > 0 and a + b > d; got a = {a}, b = {b}, d = {d}"));
    }
    check_sides(boxes)?;
    let expo = a.min(d as f64) + b - d as f64;
    let mut sizes = Vec::new();
    for &side in boxes {
        let fa = power_table(d, side, a)?;
        let fb = power_table(d, side, b)?;
        let n = fa.len();
        let full = n <= FULL_SWEEP_LIMIT;
        let points: Vec<Vec<i64>> = if full {
            (0..n).map(|i| fa.coords(i)).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pts = axis_extremes(d, side);
            pts.extend((0..CONV_SAMPLES).map(|_| random_point(&mut rng, d, side)));
            pts
        };
        let ratios: Vec<f64> = points
            .par_iter()
            .map(|x| {
                let t = shift_tables(side, d, x);
                let lhs: f64 = (0..n)
                    .map(|y| {
                        // index(x − y) = index(−(y − x)); ⟨·⟩ is even.
                        let mut rest = y;
                        let mut idx = 0;
                        for tab in t.iter().rev() {
                            idx += tab[rest % side];
                            rest /= side;
                        }
                        fa.values[y] * fb.values[idx]
                    })
                    .sum();
                lhs * bracket(x).powf(expo)
            })
            .collect();
        let (k, &sup) = ratios.iter().enumerate().max_by(|p, q| p.1.total_cmp(q.1)).expect("non-empty");
        sizes.push(SupRatio { side, sup, samples: points.len(), full_sweep: full, argmax: vec![vec![0; d], points[k].clone()] });
    }
    Ok(StabilityReport::new(d, sizes))
}

/// `sup Σ_z ⟨x−z⟩^{−q}⟨x′−z⟩^{−q}⟨z−y⟩^{−q}⟨z−y′⟩^{−q} · ⟨x−y⟩^q ⟨x′−y′⟩^q`
/// with `x = 0`. Candidates: every configuration inside `[−1,1]^d`, every
/// configuration of axis extremes, and a fixed-seed random sample.
pub fn star_bound_check(d: usize, q: f64, boxes: &[usize]) -> Result<StabilityReport> {
    star_bound_check_seeded(d, q, boxes, SAMPLING_SEED)
}

pub fn star_bound_check_seeded(d: usize, q: f64, boxes: &[usize], seed: u64) -> Result<StabilityReport> {
    if !(q > d as f64 / 2.0 && q < d as f64) {
        return invalid(format!("need d/2 < q < d; got q = {q}, d = {d}"));
    }
    check_sides(boxes)?;
    let mut sizes = Vec::new();
    for &side in boxes {
        let f = power_table(d, side, q)?;
        let n = f.len();
        let full = n.checked_pow(3).is_some_and(|c| c <= FULL_SWEEP_LIMIT);
        let mut triples: Vec<[Vec<i64>; 3]> = Vec::new();
        let add_all = |pts: &[Vec<i64>], out: &mut Vec<[Vec<i64>; 3]>| {
            for a in pts {
                for b in pts {
                    for c in pts {
                        out.push([a.clone(), b.clone(), c.clone()]);
                    }
                }
            }
        };
        if full {
            let all: Vec<Vec<i64>> = (0..n).map(|i| f.coords(i)).collect();
            add_all(&all, &mut triples);
        } else {
            let cube: Vec<Vec<i64>> = (0..3usize.pow(d as u32))
                .map(|mut i| {
                    (0..d)
                        .map(|_| {
                            let c = (i % 3) as i64 - 1;
                            i /= 3;
                            c
                        })
                        .collect()
                })
                .collect();
            add_all(&cube, &mut triples);
            add_all(&axis_extremes(d, side), &mut triples);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..STAR_SAMPLES {
                triples.push([random_point(&mut rng, d, side), random_point(&mut rng, d, side), random_point(&mut rng, d, side)]);
            }
        }
        let origin = vec![0i64; d];
        let last = side.pow(d as u32 - 1);
        let ratios: Vec<f64> = triples
            .par_iter()
            .map(|[xp, y, yp]| {
                let tabs: Vec<Vec<Vec<usize>>> = [&origin, xp, y, yp].iter().map(|s| shift_tables(side, d, s)).collect();
                let mut lhs = 0.0;
                // Odometer over all but the last axis; the last axis is the inner loop.
                for prefix in 0..last {
                    let mut base = [0usize; 4];
                    let mut rest = prefix;
                    for i in (0..d - 1).rev() {
                        let c = rest % side;
                        rest /= side;
                        for (bs, t) in base.iter_mut().zip(&tabs) {
                            *bs += t[i][c];
                        }
                    }
                    for c in 0..side {
                        let mut prod = 1.0;
                        for (bs, t) in base.iter().zip(&tabs) {
                            prod *= f.values[bs + t[d - 1][c]];
                        }
                        lhs += prod;
                    }
                }
                let dxy: Vec<i64> = y.iter().map(|c| -c).collect();
                let dxpyp: Vec<i64> = xp.iter().zip(yp).map(|(a, b)| a - b).collect();
                let wrap = |v: &[i64]| v.iter().map(|&c| minimal_image(c, side)).collect::<Vec<_>>();
                lhs * (bracket(&wrap(&dxy)) * bracket(&wrap(&dxpyp))).powf(q)
            })
            .collect();
        let (k, &sup) = ratios.iter().enumerate().max_by(|p, q| p.1.total_cmp(q.1)).expect("non-empty");
        let [xp, y, yp] = triples[k].clone();
        sizes.push(SupRatio { side, sup, samples: triples.len(), full_sweep: full, argmax: vec![origin, xp, y, yp] });
    }
    Ok(StabilityReport::new(d, sizes))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BarNorms {
    /// `Ḡ^(s) = max_x |x|^s G(x)`.
    pub g_bar: f64,
    /// `W̄^(t) = max_x Σ_y |y|^t G(y) G(x − y)`.
    pub w_bar: f64,
}

pub fn bar_norms(g: &LatticeField, s: f64, t: f64) -> Result<BarNorms> {
    let g_bar = (0..g.len()).map(|i| g.norm(i).powf(s) * g.values[i]).fold(f64::NEG_INFINITY, f64::max);
    let mut weighted = g.clone();
    for (i, v) in weighted.values.iter_mut().enumerate() {
        *v *= g.norm(i).powf(t);
    }
    let w = weighted.convolve(g)?;
    let w_bar = w.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(BarNorms { g_bar, w_bar })
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationReport {
    pub graph: String,
    pub p: f64,
    /// `Σ_x τ_{o,x}` of the translation-invariant extension.
    pub tau: f64,
    pub torus_side: usize,
    /// `S_τ(x − o) − ⟨φ_o φ_x⟩` per site.
    pub margins: Vec<f64>,
    pub min_margin: f64,
    pub pass: bool,
}

/// `⟨φ_o φ_x⟩_Λ ≤ S_τ(x)`: the two-point function is dominated by the sum
/// over walks, and the walks of Λ embed in those of a torus padding it.
pub fn random_walk_domination_check(graph: &GraphSpec, p: f64, budget: &Budget) -> Result<DominationReport> {
    graph.require_ferromagnetic()?;
    let Some(coords) = graph.coords.as_ref() else {
        return invalid(format!("{} has no lattice embedding", graph.name));
    };
    let d = coords.first().map_or(0, Vec::len);
    if d == 0 {
        return invalid("embedding of dimension 0");
    }
    let mut stencil: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for bond in &graph.bonds {
        let t = tau_bond(p, bond.j);
        let disp: Vec<i64> = coords[bond.v].iter().zip(&coords[bond.u]).map(|(a, b)| a - b).collect();
        for dx in [disp.clone(), disp.iter().map(|c| -c).collect()] {
            if let Some(&old) = stencil.get(&dx) {
                if (old - t).abs() > 1e-15 {
                    return invalid(format!("{} is not translation invariant along {dx:?}", graph.name));
                }
            }
            stencil.insert(dx, t);
        }
    }
    let tau: f64 = stencil.values().sum();
    if tau > 1.0 {
        return invalid(format!("τ = {tau} > 1: the walk sum is not summable"));
    }
    let extent = (0..d)
        .map(|i| {
            let (lo, hi) = coords.iter().fold((i64::MAX, i64::MIN), |(l, h), c| (l.min(c[i]), h.max(c[i])));
            (hi - lo + 1) as usize
        })
        .max()
        .unwrap_or(1);
    let side = (4 * extent).max(32);
    let s = if tau == 0.0 {
        LatticeField::delta(d, side)?
    } else {
        let st: Vec<(Vec<i64>, f64)> = stencil.iter().map(|(x, t)| (x.clone(), t / tau)).collect();
        let sol = green_function(&LatticeField::from_stencil(d, side, &st)?, tau)?;
        if !sol.converged {
            return invalid(format!("walk sum did not converge at τ = {tau}"));
        }
        sol.field
    };
    let g = two_point_matrix(graph, p, SiteSet::full(graph.n_sites), budget)?;
    let o = graph.origin;
    let margins: Vec<f64> = (0..graph.n_sites)
        .map(|x| {
            let dx: Vec<i64> = coords[x].iter().zip(&coords[o]).map(|(a, b)| a - b).collect();
            s.get(&dx) - g[o][x]
        })
        .collect();
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DominationReport { graph: graph.name.clone(), p, tau, torus_side: side, margins, min_margin, pass: min_margin >= -1e-9 })
}
