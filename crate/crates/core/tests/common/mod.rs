//! Shared fixtures: a naive collision oracle and the standard scenario.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use haldane_kinetic::grid::{PhaseGrid, SphereNode, SphereRule};
use haldane_kinetic::kernel::KernelSpec;
use haldane_kinetic::statistics::StatisticsParam;
use haldane_kinetic::DistributionField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STANDARD: &str = include_str!("../../../../configs/standard.toml");

/// Eight body-diagonal directions with equal weights.
pub fn body_diagonal_rule() -> SphereRule {
    let s = 1.0 / 3f64.sqrt();
    let mut nodes = Vec::new();
    for a in [-1.0, 1.0] {
        for b in [-1.0, 1.0] {
            for c in [-1.0, 1.0] {
                nodes.push(SphereNode {
                    n: [a * s, b * s, c * s],
                    weight: PI / 2.0,
                });
            }
        }
    }
    SphereRule::Custom(nodes)
}

/// Single-cell grid with a 4³ lattice of unit spacing and the body-diagonal rule.
pub fn oracle_grid(j: f64) -> Arc<PhaseGrid> {
    Arc::new(PhaseGrid::build(1, 1, j, 4, body_diagonal_rule()).unwrap())
}

/// Random admissible field with some empty and some saturated nodes.
pub fn random_field(g: &Arc<PhaseGrid>, alpha: f64, seed: u64) -> DistributionField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ceiling = 1.0 / alpha;
    let data = (0..g.num_cells() * g.num_nodes())
        .map(|_| match rng.random_range(0..10) {
            0 => 0.0,
            1 => ceiling,
            _ => rng.random_range(0.0..ceiling),
        })
        .collect();
    DistributionField::from_data(g.clone(), alpha, data).unwrap()
}

/// Naive evaluation of the truncated collision integrals on one cell.
pub struct Oracle<'a> {
    g: &'a PhaseGrid,
    ks: &'a KernelSpec,
    s: &'a StatisticsParam,
    y: Vec<f64>,
    eta: Vec<f64>,
}

pub struct OracleRates {
    pub gain: Vec<f64>,
    pub gain_rate: Vec<f64>,
    pub loss_rate: Vec<f64>,
    pub bony: f64,
}

impl<'a> Oracle<'a> {
    pub fn new(g: &'a PhaseGrid, ks: &'a KernelSpec, s: &'a StatisticsParam, y: &[f64]) -> Self {
        let eta = y.iter().map(|&v| s.log_ratio(v)).collect();
        Self {
            g,
            ks,
            s,
            y: y.to_vec(),
            eta,
        }
    }

    fn index_of(&self, p: [i32; 3]) -> Option<usize> {
        self.g.lattice_indices().iter().position(|&q| q == p)
    }

    fn finite_eta(&self, p: [i32; 3]) -> Option<f64> {
        self.index_of(p).map(|i| self.eta[i]).filter(|e| e.is_finite())
    }

    /// Second difference of `η` along `axis` at node `p`.
    fn curvature(&self, p: [i32; 3], axis: usize) -> f64 {
        let at = |o: i32| {
            let mut q = p;
            q[axis] += o;
            self.finite_eta(q)
        };
        let e = at(0).unwrap();
        match (at(-2), at(-1), at(1), at(2)) {
            (_, Some(m), Some(p1), _) => p1 - 2.0 * e + m,
            (_, _, Some(p1), Some(p2)) => e - 2.0 * p1 + p2,
            (Some(m2), Some(m1), _, _) => e - 2.0 * m1 + m2,
            _ => 0.0,
        }
    }

    /// `(y, F(y))` at lattice-index coordinates `x`.
    fn value_at(&self, x: [f64; 3]) -> (f64, f64) {
        let empty = (0.0, self.s.factor(0.0));
        let v: Vec<f64> = x.iter().map(|&c| (c + 0.5) * self.g.dv() - self.g.half_width()).collect();
        let r = self.g.ball_radius();
        if v.iter().map(|c| c * c).sum::<f64>() > r * r * (1.0 + 1e-12) {
            return empty;
        }
        let mut base = [0i32; 3];
        let mut t = [0.0; 3];
        for d in 0..3 {
            let fl = x[d].floor();
            let fr = x[d] - fl;
            (base[d], t[d]) = if fr < 1e-9 {
                (fl as i32, 0.0)
            } else if fr > 1.0 - 1e-9 {
                (fl as i32 + 1, 0.0)
            } else {
                (fl as i32, fr)
            };
        }
        let mut corners = Vec::new();
        for bits in 0..8u32 {
            let mut p = base;
            let mut w = 1.0;
            let mut used = true;
            for d in 0..3 {
                let up = bits >> d & 1 == 1;
                if t[d] == 0.0 {
                    used &= !up;
                } else if up {
                    p[d] += 1;
                    w *= t[d];
                } else {
                    w *= 1.0 - t[d];
                }
            }
            if used {
                corners.push((p, w));
            }
        }
        if corners.len() == 1 {
            return match self.index_of(corners[0].0) {
                Some(i) => (self.y[i], self.s.factor(self.y[i])),
                None => empty,
            };
        }
        let mut ids = Vec::new();
        for &(p, _) in &corners {
            match self.index_of(p) {
                Some(i) if self.eta[i] != f64::NEG_INFINITY => ids.push(i),
                _ => return empty,
            }
        }
        if ids.iter().any(|&i| self.eta[i] == f64::INFINITY) {
            return (self.s.ceiling(), 0.0);
        }
        let mut eta = 0.0;
        for (&(p, w), &i) in corners.iter().zip(&ids) {
            eta += w * self.eta[i];
            for d in 0..3 {
                if t[d] > 0.0 {
                    eta -= 0.5 * w * self.curvature(p, d) * t[d] * (1.0 - t[d]);
                }
            }
        }
        let y = self.s.invert_log_ratio(eta).unwrap();
        (y, self.s.factor(y))
    }

    pub fn evaluate(&self) -> OracleRates {
        let g = self.g;
        let n = g.num_nodes();
        let lat = g.lattice_indices();
        let vel = g.velocities();
        let mut gain_rate = vec![0.0; n];
        let mut loss_rate = vec![0.0; n];
        let mut bony = 0.0;
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let (va, vb) = (vel[a], vel[b]);
                let r2: f64 = (0..3).map(|d| va[d] * va[d] + vb[d] * vb[d]).sum();
                if r2 > g.j_level() * g.j_level() {
                    continue;
                }
                let gv: Vec<f64> = (0..3).map(|d| va[d] - vb[d]).collect();
                let u = gv.iter().map(|c| c * c).sum::<f64>().sqrt();
                for node in g.sphere_nodes() {
                    let nn = node.n;
                    let gn: f64 = (0..3).map(|d| gv[d] * nn[d]).sum();
                    let w = node.weight * self.ks.eval(u, gn / u);
                    if w == 0.0 {
                        continue;
                    }
                    let shift = gn / g.dv();
                    let xa = [0, 1, 2].map(|d| lat[a][d] as f64 - shift * nn[d]);
                    let xb = [0, 1, 2].map(|d| lat[b][d] as f64 + shift * nn[d]);
                    let (ya, fa) = self.value_at(xa);
                    let (yb, fb) = self.value_at(xb);
                    gain_rate[a] += w * ya * yb * self.s.factor(self.y[b]);
                    loss_rate[a] += w * fa * fb * self.y[b];
                    bony += w * (nn[0] * gn).powi(2) * self.y[a] * self.y[b] * fa * fb;
                }
            }
        }
        let dv3 = g.velocity_weight();
        for x in gain_rate.iter_mut().chain(loss_rate.iter_mut()) {
            *x *= dv3;
        }
        let gain = gain_rate.iter().zip(&self.y).map(|(a, &y)| self.s.factor(y) * a).collect();
        OracleRates {
            gain,
            gain_rate,
            loss_rate,
            bony: bony * dv3 * dv3,
        }
    }
}

/// Largest relative deviation, measured against the largest magnitude.
pub fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}
