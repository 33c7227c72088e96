//! Values of `f` at off-lattice post-collision velocities.
//!
//! Interpolation acts on `η = ln(y / F(y))`: multilinear weights plus a
//! per-axis curvature correction, so any `η` quadratic in `v` (every
//! equilibrium) is reproduced exactly. Corners that are empty or outside the
//! ball absorb (`y' = 0`); saturated corners pin `y' = 1/α`.

use crate::grid::PhaseGrid;
use crate::statistics::StatisticsParam;

pub(crate) const OUTSIDE: u32 = u32::MAX;

/// Fractional parts closer than this to an integer are snapped.
pub(crate) const SNAP: f64 = 1e-9;

/// Lattice neighbours of every node: per axis `[-2, -1, +1, +2]`.
#[derive(Clone, Debug)]
pub(crate) struct Neighbors {
    nb: Vec<[[u32; 4]; 3]>,
}

impl Neighbors {
    pub fn new(grid: &PhaseGrid) -> Self {
        let lookup = |p: [i32; 3]| grid.node_at(p).map_or(OUTSIDE, |i| i as u32);
        let nb = grid
            .lattice_indices()
            .iter()
            .map(|&ijk| {
                let mut out = [[OUTSIDE; 4]; 3];
                for (d, row) in out.iter_mut().enumerate() {
                    for (slot, off) in [-2, -1, 1, 2].into_iter().enumerate() {
                        let mut p = ijk;
                        p[d] += off;
                        row[slot] = lookup(p);
                    }
                }
                out
            })
            .collect();
        Self { nb }
    }
}

/// Per-cell node data needed by the reconstruction.
#[derive(Clone, Debug, Default)]
pub(crate) struct NodeTables {
    pub y: Vec<f64>,
    pub factor: Vec<f64>,
    pub eta: Vec<f64>,
    pub kappa: Vec<[f64; 3]>,
    pub empty_factor: f64,
    pub ceiling: f64,
}

impl NodeTables {
    pub fn fill(&mut self, y: &[f64], stats: &StatisticsParam, nb: &Neighbors) {
        let n = y.len();
        self.y.clear();
        self.y.extend_from_slice(y);
        self.factor.clear();
        self.factor.extend(y.iter().map(|&v| stats.factor(v)));
        self.eta.clear();
        self.eta.extend(y.iter().map(|&v| stats.log_ratio(v)));
        self.kappa.clear();
        self.kappa.resize(n, [0.0; 3]);
        self.empty_factor = stats.factor(0.0);
        self.ceiling = stats.ceiling();
        let eta = &self.eta;
        let fin = |i: u32| i != OUTSIDE && eta[i as usize].is_finite();
        let at = |i: u32| eta[i as usize];
        for a in 0..n {
            let e = eta[a];
            if !e.is_finite() {
                continue;
            }
            for d in 0..3 {
                let [m2, m1, p1, p2] = nb.nb[a][d];
                self.kappa[a][d] = if fin(m1) && fin(p1) {
                    at(p1) - 2.0 * e + at(m1)
                } else if fin(p1) && fin(p2) {
                    e - 2.0 * at(p1) + at(p2)
                } else if fin(m1) && fin(m2) {
                    e - 2.0 * at(m1) + at(m2)
                } else {
                    0.0
                };
            }
        }
    }
}

/// Interpolation stencil of one point given in lattice-index coordinates.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Stencil {
    corners: [u32; 8],
    weights: [f64; 8],
    len: u8,
    t: [f64; 3],
}

impl Stencil {
    /// Stencil of the point `x` (lattice-index coordinates).
    pub fn at(grid: &PhaseGrid, x: [f64; 3]) -> Self {
        let mut base = [0i32; 3];
        let mut t = [0.0; 3];
        for d in 0..3 {
            let mut fl = x[d].floor();
            let mut frac = x[d] - fl;
            if frac < SNAP {
                frac = 0.0;
            } else if frac > 1.0 - SNAP {
                fl += 1.0;
                frac = 0.0;
            }
            base[d] = fl as i32;
            t[d] = frac;
        }
        let active: Vec<usize> = (0..3).filter(|&d| t[d] > 0.0).collect();
        let mut corners = [OUTSIDE; 8];
        let mut weights = [0.0; 8];
        let len = 1usize << active.len();
        for (bits, (corner, weight)) in corners.iter_mut().zip(weights.iter_mut()).take(len).enumerate() {
            let mut p = base;
            let mut w = 1.0;
            for (k, &d) in active.iter().enumerate() {
                if bits >> k & 1 == 1 {
                    p[d] += 1;
                    w *= t[d];
                } else {
                    w *= 1.0 - t[d];
                }
            }
            *corner = grid.node_at(p).map_or(OUTSIDE, |i| i as u32);
            *weight = w;
        }
        Self {
            corners,
            weights,
            len: len as u8,
            t,
        }
    }

    /// `(y, F(y))` at the stencil point.
    #[inline]
    pub fn evaluate(&self, tab: &NodeTables, stats: &StatisticsParam) -> (f64, f64) {
        let len = self.len as usize;
        if len == 1 {
            let c = self.corners[0];
            if c == OUTSIDE {
                return (0.0, tab.empty_factor);
            }
            return (tab.y[c as usize], tab.factor[c as usize]);
        }
        let mut saturated = false;
        let mut eta = 0.0;
        let mut kap = [0.0; 3];
        for i in 0..len {
            let c = self.corners[i];
            if c == OUTSIDE {
                return (0.0, tab.empty_factor);
            }
            let e = tab.eta[c as usize];
            if e == f64::NEG_INFINITY {
                return (0.0, tab.empty_factor);
            }
            if e == f64::INFINITY {
                saturated = true;
                continue;
            }
            let w = self.weights[i];
            eta += w * e;
            let k = tab.kappa[c as usize];
            kap[0] += w * k[0];
            kap[1] += w * k[1];
            kap[2] += w * k[2];
        }
        if saturated {
            return (tab.ceiling, 0.0);
        }
        for d in 0..3 {
            let t = self.t[d];
            if t > 0.0 {
                eta -= 0.5 * kap[d] * t * (1.0 - t);
            }
        }
        stats.invert_fast(eta)
    }
}

/// Whether lattice-index coordinates `x` lie in the velocity ball.
pub(crate) fn inside_ball(grid: &PhaseGrid, x: [f64; 3]) -> bool {
    let (dv, hw) = (grid.dv(), grid.half_width());
    let r = grid.ball_radius();
    let v2: f64 = x.iter().map(|&c| ((c + 0.5) * dv - hw).powi(2)).sum();
    v2 <= r * r * (1.0 + 1e-12)
}
