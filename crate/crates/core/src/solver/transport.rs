//! Free transport `∂_t f + v̄·∇_x f = 0` on the periodic box.
//!
//! Each velocity slice is shifted by `dt·v̄` axis by axis with conservative
//! linear interpolation: a shift of `m + θ` cells sends `(1 − θ)` of every
//! cell to `i + m` and `θ` to `i + m + 1`. Values stay convex combinations of
//! old values, so the bounds hold exactly and the slice mass is preserved.

use rayon::prelude::*;

use crate::field::DistributionField;
use crate::grid::PhaseGrid;

/// Fractional shifts within this distance of an integer are exact permutations.
const SHIFT_SNAP: f64 = 1e-9;

/// `f(t + dt, x, v) = f(t, x − dt·v̄, v)`.
pub fn transport(f: &DistributionField, dt: f64) -> DistributionField {
    let mut out = f.clone();
    transport_in_place(&mut out, dt);
    out
}

/// The characteristic frame `f♯(x, v) = f(x + t·v̄, v)`.
pub fn to_characteristic_frame(f: &DistributionField, t: f64) -> DistributionField {
    transport(f, -t)
}

pub(crate) fn transport_in_place(f: &mut DistributionField, dt: f64) {
    if dt == 0.0 {
        return;
    }
    let g = f.grid_arc().clone();
    let nn = g.num_nodes();
    let nc = g.num_cells();
    let slices: Vec<Vec<f64>> = (0..nn)
        .into_par_iter()
        .map(|node| {
            let mut s: Vec<f64> = (0..nc).map(|c| f.data()[c * nn + node]).collect();
            let v = g.velocities()[node];
            let mut tmp = vec![0.0; nc];
            for axis in 0..g.k() {
                let shift = dt * v[axis] / g.dx();
                if shift_axis(&g, axis, shift, &s, &mut tmp) {
                    std::mem::swap(&mut s, &mut tmp);
                }
            }
            s
        })
        .collect();
    let data = f.data_mut();
    for (node, s) in slices.iter().enumerate() {
        for (c, &y) in s.iter().enumerate() {
            data[c * nn + node] = y;
        }
    }
}

/// Writes the shifted slice into `out`; returns false when the shift is a
/// whole number of periods and `src` is unchanged.
fn shift_axis(g: &PhaseGrid, axis: usize, shift: f64, src: &[f64], out: &mut [f64]) -> bool {
    let nx = g.nx() as i64;
    let mut m = shift.floor();
    let mut theta = shift - m;
    if theta < SHIFT_SNAP {
        theta = 0.0;
    } else if theta > 1.0 - SHIFT_SNAP {
        theta = 0.0;
        m += 1.0;
    }
    let m = (m as i64).rem_euclid(nx);
    if m == 0 && theta == 0.0 {
        return false;
    }
    // First axis slowest.
    let stride = g.nx().pow((g.k() - 1 - axis) as u32);
    for (c, o) in out.iter_mut().enumerate() {
        let i = ((c / stride) % g.nx()) as i64;
        let base = c - (i as usize) * stride;
        let from = |off: i64| base + ((i - off).rem_euclid(nx) as usize) * stride;
        *o = if theta == 0.0 {
            src[from(m)]
        } else {
            let (a, b) = (src[from(m)], src[from(m + 1)]);
            (a + theta * (b - a)).clamp(a.min(b), a.max(b))
        };
    }
    true
}
