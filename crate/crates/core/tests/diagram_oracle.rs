//! Diagram kernels against literal nested sums written straight from their
//! definitions, with no transfer matrices and no truncated-polynomial tricks.

use lacelab_core::diagrams::Diagrams;
use lacelab_core::lattice::catalog_graph;
use lacelab_core::{Budget, GraphSpec};

type M = Vec<Vec<f64>>;

struct Lit {
    n: usize,
    g: M,
    gt: M,
    psi: M,
    phi: M,
}

impl Lit {
    fn new(dg: &Diagrams) -> Self {
        let g = dg.two_point().values;
        let gt = dg.tilde_g().values;
        let psi = dg.psi().unwrap().values;
        let n = g.len();
        let phi = (0..n).map(|y| (0..n).map(|x| psi[y][x] - f64::from(u8::from(x == y))).collect()).collect();
        Self { n, g, gt, psi, phi }
    }

    fn sum(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.n).map(f).sum()
    }

    /// `⟨φ_z φ_u⟩⟨φ_u φ_z'⟩`.
    fn ku(&self, u: usize) -> M {
        (0..self.n).map(|z| (0..self.n).map(|zp| self.g[z][u] * self.g[u][zp]).collect()).collect()
    }

    /// `Σ_{v'} ⟨φ_z φ_v'⟩⟨φ_v' φ_z'⟩ ψ(v', v)`.
    fn kv(&self, v: usize) -> M {
        (0..self.n)
            .map(|z| (0..self.n).map(|zp| self.sum(|w| self.g[z][w] * self.g[w][zp] * self.psi[w][v])).collect())
            .collect()
    }

    /// `ψ − δ` chain with one bubble line `G̃(u',u'')` replaced by `line(u', u'')`.
    fn rung(&self, line: impl Fn(usize, usize) -> f64) -> M {
        let n = self.n;
        (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        let mut s = 0.0;
                        for u1 in 0..n {
                            for u2 in 0..n {
                                s += self.psi[a][u1] * self.gt[u1][u2] * line(u1, u2) * self.psi[u2][b];
                            }
                        }
                        s
                    })
                    .collect()
            })
            .collect()
    }

    fn ru(&self, u: usize) -> M {
        self.rung(|a, b| self.g[a][u] * self.gt[u][b] + if b == u { self.gt[a][b] } else { 0.0 })
    }

    fn rv(&self, v: usize) -> M {
        self.rung(|a, b| self.sum(|w| (self.g[a][w] * self.gt[w][b] + if w == b { self.gt[a][b] } else { 0.0 }) * self.psi[w][v]))
    }

    /// `P^(2)(y, x)` with the three edges and two rungs given explicitly.
    fn p2(&self, e: [&M; 3], r: [&M; 2], y: usize, x: usize) -> f64 {
        let mut s = 0.0;
        for v2 in 0..self.n {
            for v1p in 0..self.n {
                s += r[0][y][v1p] * r[1][v2][x] * e[0][y][v2] * e[1][v2][v1p] * e[2][v1p][x];
            }
        }
        s
    }

    fn p3(&self, y: usize, x: usize) -> f64 {
        let (g, phi, n) = (&self.g, &self.phi, self.n);
        let mut s = 0.0;
        for v2 in 0..n {
            for v3 in 0..n {
                for v1p in 0..n {
                    for v2p in 0..n {
                        s += phi[y][v1p] * phi[v2][v2p] * phi[v3][x] * g[y][v2] * g[v2][v1p] * g[v1p][v3] * g[v3][v2p] * g[v2p][x];
                    }
                }
            }
        }
        s
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

fn check_graph(graph: &GraphSpec, p: f64) {
    let dg = Diagrams::new(graph, p, &Budget::default()).unwrap();
    let l = Lit::new(&dg);
    let n = l.n;
    let (g, phi) = (&l.g, &l.phi);
    let p2 = dg.p_j(2).unwrap();
    let p3 = dg.p_j(3).unwrap();
    for y in 0..n {
        for x in 0..n {
            assert!(close(p2.get(y, x), l.p2([g, g, g], [phi, phi], y, x)), "{} P2({y},{x})", graph.name);
            assert!(close(p3.get(y, x), l.p3(y, x)), "{} P3({y},{x})", graph.name);
        }
    }
    for u in 0..n {
        let ku = l.ku(u);
        let pp1 = dg.p_prime_j(1, u).unwrap();
        let pp2 = dg.p_prime_j(2, u).unwrap();
        for y in 0..n {
            for x in 0..n {
                let want1 = 2.0 * phi[y][x] * ku[y][x];
                assert!(close(pp1.get(y, x), want1), "P'1");
                let want2 = l.p2([&ku, g, g], [phi, phi], y, x) + l.p2([g, &ku, g], [phi, phi], y, x) + l.p2([g, g, &ku], [phi, phi], y, x);
                assert!(close(pp2.get(y, x), want2), "{} P'2_{u}({y},{x})", graph.name);
            }
        }
        for v in 0..n {
            let (kv, ru, rv) = (l.kv(v), l.ru(u), l.rv(v));
            let pd1 = dg.p_dprime_j(1, u, v).unwrap();
            let pd2 = dg.p_dprime_j(2, u, v).unwrap();
            for y in 0..n {
                for x in 0..n {
                    let want1 = 2.0 * (ru[y][x] * kv[y][x] + rv[y][x] * ku[y][x]);
                    assert!(close(pd1.get(y, x), want1), "{} P''1_{u},{v}({y},{x})", graph.name);
                    let mut want2 = 0.0;
                    for edge in 0..3 {
                        for rung in 0..2 {
                            for (k, r) in [(&kv, &ru), (&ku, &rv)] {
                                let mut e = [g, g, g];
                                e[edge] = k;
                                let mut rr = [phi, phi];
                                rr[rung] = r;
                                want2 += l.p2(e, rr, y, x);
                            }
                        }
                    }
                    assert!(close(pd2.get(y, x), want2), "{} P''2_{u},{v}({y},{x})", graph.name);
                    let want0 = g[y][x] * ku[y][x] * kv[y][x];
                    assert!(close(dg.p_dprime_j(0, u, v).unwrap().get(y, x), want0));
                }
            }
        }
    }
}

#[test]
fn kernels_match_literal_sums() {
    check_graph(&catalog_graph("triangle").unwrap(), 0.25);
    check_graph(&catalog_graph("path-3").unwrap(), 0.4);
    check_graph(&catalog_graph("square").unwrap(), 0.2);
}

#[test]
fn series_and_chain_bounds_match_literal_sums() {
    let graph = catalog_graph("triangle").unwrap();
    let dg = Diagrams::new(&graph, 0.2, &Budget::default()).unwrap();
    let l = Lit::new(&dg);
    let n = l.n;
    let d = |y: usize, z: usize| l.gt[y][z] + f64::from(u8::from(y == z));
    // P' as an explicit partial sum.
    for u in 0..n {
        let pp = dg.p_prime(u).unwrap();
        for y in 0..n {
            for x in 0..n {
                let want: f64 = (0..60).map(|j| dg.p_prime_j(j, u).unwrap().get(y, x)).sum();
                assert!(close(pp.get(y, x), want));
            }
        }
    }
    let pp: Vec<_> = (0..n).map(|u| dg.p_prime(u).unwrap()).collect();
    let qp: Vec<_> = (0..n).map(|u| dg.q_prime(u).unwrap()).collect();
    let mut qd = vec![];
    for u in 0..n {
        for v in 0..n {
            let pd = dg.p_dprime(u, v).unwrap();
            let q = dg.q_dprime(u, v).unwrap();
            for y in 0..n {
                for x in 0..n {
                    let mut want = l.sum(|z| d(y, z) * pd.get(z, x));
                    for w in 0..n {
                        for z in 0..n {
                            want += d(y, w) * l.gt[w][z] * pp[u].get(z, x) * l.psi[w][v];
                        }
                    }
                    assert!(close(q.get(y, x), want));
                    if v == 0 {
                        assert!(close(qp[u].get(y, x), l.sum(|z| d(y, z) * pp[u].get(z, x))));
                    }
                }
            }
            qd.push(q);
        }
    }
    let dbonds: Vec<(usize, usize, f64)> =
        graph.directed_bonds().iter().map(|b| (b.tail, b.head, graph.tau(0.2, b.bond))).collect();
    let p0 = |v: usize, y: usize, x: usize| l.g[y][x].powi(2) * l.g[y][v] * l.g[v][x];
    let o = graph.origin;
    let b1 = dg.pi_bound(o, 1).unwrap();
    let b2 = dg.pi_bound(o, 2).unwrap();
    for x in 0..n {
        let mut w1 = 0.0;
        let mut w2 = 0.0;
        for &(t1, h1, tau1) in &dbonds {
            for v1 in 0..n {
                w1 += p0(v1, o, t1) * tau1 * qp[v1].get(h1, x);
                for &(t2, h2, tau2) in &dbonds {
                    for v2 in 0..n {
                        w2 += p0(v1, o, t1) * tau1 * qd[v1 * n + v2].get(h1, t2) * tau2 * qp[v2].get(h2, x);
                    }
                }
            }
        }
        assert!(close(b1[x], w1), "j=1 x={x}: {} vs {w1}", b1[x]);
        assert!(close(b2[x], w2), "j=2 x={x}: {} vs {w2}", b2[x]);
    }
}
