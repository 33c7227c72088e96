//! Direct quadrature for arbitrary sphere rules and kernels.

use crate::grid::PhaseGrid;
use crate::kernel::KernelSpec;
use crate::statistics::StatisticsParam;

use super::lattice::chi_limits;
use super::reconstruct::{inside_ball, NodeTables, Stencil};

/// Pairs `(a, b)`, `a < b`, with `χ_j = 1`.
#[derive(Debug)]
pub(crate) struct GeneralPlan {
    pairs: Vec<(u32, u32)>,
}

impl GeneralPlan {
    pub fn build(grid: &PhaseGrid) -> Self {
        let limits = chi_limits(grid);
        let mut pairs = Vec::new();
        for (b, &lim) in limits.iter().enumerate() {
            for a in 0..lim.min(b) {
                pairs.push((a as u32, b as u32));
            }
        }
        Self { pairs }
    }

    /// Calls `f(a, b, w·B(u, c), w·B(u, −c), n, g·n, (y', F'), (y'_*, F'_*))`
    /// for every pair and sphere node with a nonzero kernel value.
    #[allow(clippy::too_many_arguments)]
    fn visit(
        &self,
        grid: &PhaseGrid,
        kernel: &KernelSpec,
        stats: &StatisticsParam,
        tab: &NodeTables,
        mut f: impl FnMut(usize, usize, f64, f64, [f64; 3], f64, (f64, f64), (f64, f64)),
    ) {
        let lat = grid.lattice_indices();
        let vel = grid.velocities();
        let empty = (0.0, tab.empty_factor);
        let post = |x: [f64; 3]| {
            if inside_ball(grid, x) {
                Stencil::at(grid, x).evaluate(tab, stats)
            } else {
                empty
            }
        };
        for &(a, b) in &self.pairs {
            let (a, b) = (a as usize, b as usize);
            let gi = [0, 1, 2].map(|d| (lat[a][d] - lat[b][d]) as f64);
            let gv = [0, 1, 2].map(|d| vel[a][d] - vel[b][d]);
            let u = (gv[0] * gv[0] + gv[1] * gv[1] + gv[2] * gv[2]).sqrt();
            if u == 0.0 {
                continue;
            }
            for node in grid.sphere_nodes() {
                let n = node.n;
                let gn = gv[0] * n[0] + gv[1] * n[1] + gv[2] * n[2];
                let c = gn / u;
                let w1 = node.weight * kernel.eval(u, c);
                let w2 = node.weight * kernel.eval(u, -c);
                if w1 == 0.0 && w2 == 0.0 {
                    continue;
                }
                let gin = gi[0] * n[0] + gi[1] * n[1] + gi[2] * n[2];
                let xa = [0, 1, 2].map(|d| lat[a][d] as f64 - gin * n[d]);
                let xb = [0, 1, 2].map(|d| lat[b][d] as f64 + gin * n[d]);
                f(a, b, w1, w2, n, gn, post(xa), post(xb));
            }
        }
    }

    /// Gain and loss rates without the `dv³` factor.
    pub fn accumulate(
        &self,
        grid: &PhaseGrid,
        kernel: &KernelSpec,
        stats: &StatisticsParam,
        tab: &NodeTables,
        gain: &mut [f64],
        loss: &mut [f64],
    ) {
        let y = tab.y.clone();
        let fac = tab.factor.clone();
        self.visit(grid, kernel, stats, tab, |a, b, w1, w2, _, _, (y1, f1), (y2, f2)| {
            let pp = y1 * y2;
            let ss = f1 * f2;
            gain[a] += w1 * pp * fac[b];
            gain[b] += w2 * pp * fac[a];
            loss[a] += w1 * ss * y[b];
            loss[b] += w2 * ss * y[a];
        });
    }

    /// Bony integrand summed over ordered pairs, without `dv⁶`.
    pub fn bony(&self, grid: &PhaseGrid, kernel: &KernelSpec, stats: &StatisticsParam, tab: &NodeTables) -> f64 {
        let mut total = 0.0;
        let y = &tab.y;
        self.visit(grid, kernel, stats, tab, |a, b, w1, w2, n, gn, (_, f1), (_, f2)| {
            total += (w1 + w2) * n[0] * n[0] * gn * gn * y[a] * y[b] * f1 * f2;
        });
        total
    }
}
