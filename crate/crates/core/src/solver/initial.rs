//! Initial data and its mollification `f_{0,j}`.
//!
//! `f_{0,j}` is the restriction to `|v| ≤ j` of `min(f0, 1/α − 1/j) ∗ φ_j`.
//! `φ_j` is the product of bump profiles `ρ(2j·x_d)` per spatial axis and
//! `ρ(j·|v|)` in velocity, `ρ(r) = exp(−1/(1 − r²))` on `r < 1`, normalized
//! to unit discrete mass on its full stencil. The convolution wraps
//! periodically in `x` and extends by zero outside the node set in `v`; mass
//! that would land on lattice points outside the ball is dropped, not
//! renormalized.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::field::DistributionField;
use crate::grid::PhaseGrid;

/// Absolute tolerance on the declared range of `f0`.
const RANGE_TOL: f64 = 1e-12;

type Profile = dyn Fn(&[f64; 3], &[f64; 3]) -> f64 + Send + Sync;

/// How `f0` is given.
#[derive(Clone)]
pub enum InitialProfile {
    /// `f0(x, v)` evaluated at cell centres and velocity nodes.
    Function(Arc<Profile>),
    /// Cell-major values on the nodes of the target grid.
    Samples(Arc<Vec<f64>>),
}

impl fmt::Debug for InitialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Function(_) => f.write_str("Function(..)"),
            Self::Samples(s) => write!(f, "Samples({} values)", s.len()),
        }
    }
}

/// Initial datum `f0 ∈ [0, 1/α]` and the truncation level `j`.
#[derive(Clone, Debug)]
pub struct InitialData {
    pub f0: InitialProfile,
    pub alpha: f64,
    pub j_level: f64,
}

impl InitialData {
    pub fn from_fn<F>(alpha: f64, j_level: f64, f0: F) -> Result<Self>
    where
        F: Fn(&[f64; 3], &[f64; 3]) -> f64 + Send + Sync + 'static,
    {
        Self::new(InitialProfile::Function(Arc::new(f0)), alpha, j_level)
    }

    pub fn from_samples(alpha: f64, j_level: f64, samples: Vec<f64>) -> Result<Self> {
        Self::new(InitialProfile::Samples(Arc::new(samples)), alpha, j_level)
    }

    pub fn new(f0: InitialProfile, alpha: f64, j_level: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid("alpha", format!("{alpha} not in (0, 1]")));
        }
        if !(j_level.is_finite() && 1.0 / j_level < 1.0 / alpha) {
            return Err(invalid("j_level", format!("{j_level} must exceed alpha = {alpha}")));
        }
        Ok(Self { f0, alpha, j_level })
    }

    /// Width `1/j` of the mollifier.
    pub fn mollifier_width(&self) -> f64 {
        1.0 / self.j_level
    }

    /// Clamp level `1/α − 1/j`.
    pub fn cap(&self) -> f64 {
        1.0 / self.alpha - 1.0 / self.j_level
    }

    /// `f0` at every node of `g`, cell-major, checked against `[0, 1/α]`.
    pub fn sample(&self, g: &PhaseGrid) -> Result<Vec<f64>> {
        let ceiling = 1.0 / self.alpha;
        let values = match &self.f0 {
            InitialProfile::Samples(s) => {
                if s.len() != g.num_cells() * g.num_nodes() {
                    return Err(invalid(
                        "f0",
                        format!("{} samples for a grid of {} values", s.len(), g.num_cells() * g.num_nodes()),
                    ));
                }
                s.as_ref().clone()
            }
            InitialProfile::Function(f) => {
                let mut out = Vec::with_capacity(g.num_cells() * g.num_nodes());
                for c in 0..g.num_cells() {
                    let x = g.cell_center(c);
                    out.extend(g.velocities().iter().map(|v| f(&x, v)));
                }
                out
            }
        };
        for (i, &y) in values.iter().enumerate() {
            if !(y >= -RANGE_TOL && y <= ceiling + RANGE_TOL) {
                return Err(invalid(
                    "f0",
                    format!("value {y} at cell {}, node {} outside [0, {ceiling}]", i / g.num_nodes(), i % g.num_nodes()),
                ));
            }
        }
        Ok(values)
    }
}

fn bump(r: f64) -> f64 {
    if r.abs() < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// Normalized one-dimensional spatial stencil `(offset, weight)`.
fn space_stencil(j: f64, dx: f64) -> Vec<(i64, f64)> {
    let mut s = vec![(0, bump(0.0))];
    let mut o = 1i64;
    loop {
        let w = bump(2.0 * j * o as f64 * dx);
        if w <= 0.0 {
            break;
        }
        s.push((o, w));
        s.push((-o, w));
        o += 1;
    }
    let total: f64 = s.iter().map(|p| p.1).sum();
    s.iter().map(|&(o, w)| (o, w / total)).collect()
}

/// Normalized velocity stencil `(lattice offset, weight)`.
fn velocity_stencil(j: f64, dv: f64) -> Vec<([i32; 3], f64)> {
    let reach = (1.0 / (j * dv)).ceil() as i32;
    let mut s = Vec::new();
    for a in -reach..=reach {
        for b in -reach..=reach {
            for c in -reach..=reach {
                let r = j * dv * ((a * a + b * b + c * c) as f64).sqrt();
                let w = bump(r);
                if w > 0.0 {
                    s.push(([a, b, c], w));
                }
            }
        }
    }
    let total: f64 = s.iter().map(|p| p.1).sum();
    s.iter().map(|&(o, w)| (o, w / total)).collect()
}

/// Mollified and truncated initial field `f_{0,j}` on `g`.
pub fn mollify_initial(data: &InitialData, g: &Arc<PhaseGrid>) -> Result<DistributionField> {
    let cap = data.cap();
    let mut y: Vec<f64> = data.sample(g)?.into_iter().map(|v| v.clamp(0.0, cap)).collect();
    let nn = g.num_nodes();
    let nc = g.num_cells();

    let xs = space_stencil(data.j_level, g.dx());
    if xs.len() > 1 {
        let mut tmp = vec![0.0; y.len()];
        for axis in 0..g.k() {
            for c in 0..nc {
                let coords = g.cell_coords(c);
                let out = &mut tmp[c * nn..(c + 1) * nn];
                out.fill(0.0);
                for &(o, w) in &xs {
                    let mut src = coords;
                    src[axis] = (coords[axis] as i64 - o).rem_euclid(g.nx() as i64) as usize;
                    let sc = g.cell_index(src);
                    for (t, &s) in out.iter_mut().zip(&y[sc * nn..(sc + 1) * nn]) {
                        *t += w * s;
                    }
                }
            }
            std::mem::swap(&mut y, &mut tmp);
        }
    }

    let vs = velocity_stencil(data.j_level, g.dv());
    if vs.len() > 1 {
        let sources: Vec<Vec<(usize, f64)>> = g
            .lattice_indices()
            .iter()
            .map(|ijk| {
                vs.iter()
                    .filter_map(|&(o, w)| g.node_at([ijk[0] - o[0], ijk[1] - o[1], ijk[2] - o[2]]).map(|n| (n, w)))
                    .collect()
            })
            .collect();
        let mut tmp = vec![0.0; y.len()];
        for c in 0..nc {
            let src = &y[c * nn..(c + 1) * nn];
            for (node, list) in sources.iter().enumerate() {
                tmp[c * nn + node] = list.iter().map(|&(n, w)| w * src[n]).sum();
            }
        }
        y = tmp;
    }

    let r2 = data.j_level * data.j_level;
    for c in 0..nc {
        for (n, v) in g.velocities().iter().enumerate() {
            let i = c * nn + n;
            if v[0] * v[0] + v[1] * v[1] + v[2] * v[2] > r2 * (1.0 + 1e-12) {
                y[i] = 0.0;
            }
            y[i] = y[i].clamp(0.0, cap);
        }
    }
    DistributionField::from_data(g.clone(), data.alpha, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SphereRule;

    #[test]
    fn stencils_have_unit_mass() {
        for (j, dx) in [(8.0, 1.0 / 32.0), (2.0, 0.01), (100.0, 0.1)] {
            let s: f64 = space_stencil(j, dx).iter().map(|p| p.1).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
        let s = velocity_stencil(4.0, 0.05);
        assert!(s.len() > 100);
        assert!((s.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-14);
        assert_eq!(velocity_stencil(6.0, 0.75).len(), 1);
    }

    #[test]
    fn zero_and_saturated_data() {
        let g = Arc::new(PhaseGrid::build(1, 16, 2.0, 16, SphereRule::Lebedev26).unwrap());
        let zero = InitialData::from_fn(0.5, 2.0, |_, _| 0.0).unwrap();
        assert!(mollify_initial(&zero, &g).unwrap().data().iter().all(|&y| y == 0.0));
        // dv = 0.25 < 1/j: the velocity stencil is nontrivial and the rim loses mass.
        let full = InitialData::from_fn(0.5, 2.0, |_, _| 2.0).unwrap();
        let f = mollify_initial(&full, &g).unwrap();
        let cap = 2.0 - 0.5;
        assert!(f.data().iter().all(|&y| y <= cap));
        assert!(f.get(0, 0) == cap || (f.get(0, 0) - cap).abs() < 1e-14);
        let rim = f.data().iter().fold(cap, |m: f64, &y| m.min(y));
        assert!(rim < cap);
    }

    #[test]
    fn rejects_out_of_range_data() {
        let g = Arc::new(PhaseGrid::build(1, 4, 2.0, 4, SphereRule::Lebedev26).unwrap());
        let bad = InitialData::from_fn(1.0, 2.0, |_, _| 1.5).unwrap();
        assert!(mollify_initial(&bad, &g).is_err());
        assert!(InitialData::from_fn(0.5, 1.0, |_, _| 0.0).is_ok());
        assert!(InitialData::from_fn(0.5, 0.4, |_, _| 0.0).is_err());
        let short = InitialData::from_samples(1.0, 2.0, vec![0.0; 3]).unwrap();
        assert!(mollify_initial(&short, &g).is_err());
    }
}
