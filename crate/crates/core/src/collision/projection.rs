//! Restores the discrete collision invariants `1, v, |v|²`.
//!
//! A defect `d` with moments `m = Σ φ d` is corrected by `c = s·p`, where
//! `p ∈ span{1, v₁, v₂, v₃, |v|²}` and `s = y(1/α − y)` is the mobility of
//! the reference state. `|p| ≤ α` keeps `y + c` inside `[0, 1/α]`.

use nalgebra::{Matrix5, Vector5};

use crate::grid::PhaseGrid;

/// Cap on repeated bounded corrections.
const MAX_ROUNDS: usize = 200;

#[derive(Clone, Debug)]
pub(crate) struct Projector {
    basis: Vec<[f64; 5]>,
}

/// Outcome of one projection.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Projection {
    /// `Σ |c|` over the nodes (no quadrature weight).
    pub magnitude: f64,
    /// True when the correction had to be scaled down to keep the bounds.
    pub limited: bool,
}

impl Projector {
    pub fn new(grid: &PhaseGrid) -> Self {
        let r = grid.ball_radius();
        let basis = grid
            .velocities()
            .iter()
            .map(|v| {
                let w = [v[0] / r, v[1] / r, v[2] / r];
                [1.0, w[0], w[1], w[2], w[0] * w[0] + w[1] * w[1] + w[2] * w[2]]
            })
            .collect();
        Self { basis }
    }

    /// Scaled moments `Σ φ x`.
    pub fn moments(&self, x: &[f64]) -> [f64; 5] {
        let mut m = [0.0; 5];
        for (phi, &xi) in self.basis.iter().zip(x) {
            for k in 0..5 {
                m[k] += phi[k] * xi;
            }
        }
        m
    }

    fn coefficients(&self, mobility: &[f64], defect: [f64; 5]) -> Option<Vector5<f64>> {
        let mut gram = Matrix5::zeros();
        for (phi, &s) in self.basis.iter().zip(mobility) {
            if s == 0.0 {
                continue;
            }
            for i in 0..5 {
                for j in i..5 {
                    gram[(i, j)] += s * phi[i] * phi[j];
                }
            }
        }
        for i in 0..5 {
            for j in 0..i {
                gram[(i, j)] = gram[(j, i)];
            }
        }
        let rhs = -Vector5::from(defect);
        if let Some(ch) = gram.cholesky() {
            let sol = ch.solve(&rhs);
            if sol.iter().all(|x| x.is_finite()) {
                return Some(sol);
            }
        }
        let svd = gram.svd(true, true);
        let eps = 1e-14 * svd.singular_values.max();
        svd.solve(&rhs, eps).ok().filter(|s| s.iter().all(|x| x.is_finite()))
    }

    /// Adds `s·p` to `x` so that `Σ φ x` equals `target`; `s` is built from
    /// `reference`. With `bounded` the multiplier is capped so that `|p| ≤ α`
    /// and the result is clamped to `[0, 1/α]`.
    pub fn correct(&self, reference: &[f64], ceiling: f64, x: &mut [f64], target: [f64; 5], bounded: bool) -> Projection {
        let first = self.correct_once(reference, ceiling, x, target, bounded);
        if !(bounded && first.limited) {
            return first;
        }
        // A capped correction removes only part of the defect; repeat with
        // the mobility of the corrected state.
        let mut total = first;
        let scale = target.iter().fold(0.0f64, |m, t| m.max(t.abs())).max(f64::MIN_POSITIVE);
        for _ in 0..MAX_ROUNDS {
            let m = self.moments(x);
            if (0..5).all(|k| (m[k] - target[k]).abs() <= 1e-15 * scale) {
                total.limited = false;
                break;
            }
            let reference = x.to_vec();
            let p = self.correct_once(&reference, ceiling, x, target, true);
            total.magnitude += p.magnitude;
            if p.magnitude == 0.0 {
                break;
            }
        }
        total
    }

    fn correct_once(&self, reference: &[f64], ceiling: f64, x: &mut [f64], target: [f64; 5], bounded: bool) -> Projection {
        let m = self.moments(x);
        let defect = [0, 1, 2, 3, 4].map(|k| m[k] - target[k]);
        if defect.iter().all(|&d| d == 0.0) {
            return Projection::default();
        }
        let mobility: Vec<f64> = reference.iter().map(|&y| (y * (ceiling - y)).max(0.0)).collect();
        let Some(lam) = self.coefficients(&mobility, defect) else {
            return Projection {
                magnitude: 0.0,
                limited: true,
            };
        };
        let poly = |phi: &[f64; 5]| (0..5).map(|k| lam[k] * phi[k]).sum::<f64>();
        let mut scale = 1.0;
        let mut limited = false;
        if bounded {
            let alpha = 1.0 / ceiling;
            let pmax = self
                .basis
                .iter()
                .zip(&mobility)
                .filter(|(_, &s)| s > 0.0)
                .map(|(phi, _)| poly(phi).abs())
                .fold(0.0, f64::max);
            if pmax > alpha {
                scale = alpha / pmax;
                limited = true;
            }
        }
        let mut magnitude = 0.0;
        for ((phi, &s), xi) in self.basis.iter().zip(&mobility).zip(x.iter_mut()) {
            if s == 0.0 {
                continue;
            }
            let c = scale * s * poly(phi);
            magnitude += c.abs();
            *xi += c;
            if bounded {
                *xi = xi.clamp(0.0, ceiling);
            }
        }
        Projection { magnitude, limited }
    }
}
