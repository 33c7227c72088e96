//! The truncated collision operator `Q_j = F_j(f)·A − f·L`.
//!
//! `A` (gain rate) and `L` (loss rate) are quadratures over the partner node
//! `v_*` and the sphere rule:
//!
//! ```text
//! A(v) = Σ w B χ_j f' f'_* F_j(f_*),   L(v) = Σ w B χ_j f_* F_j(f') F_j(f'_*)
//! ```
//!
//! Post-collision values come from [`reconstruct`]. Rules made of lattice
//! directions with a separable kernel take the tabulated [`lattice`] path;
//! anything else is summed directly.

mod general;
mod lattice;
mod projection;
mod reconstruct;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::field::DistributionField;
use crate::grid::PhaseGrid;
use crate::kernel::KernelSpec;
use crate::statistics::StatisticsParam;

pub use projection::Projection;
pub(crate) use projection::Projector;

use general::GeneralPlan;
use lattice::{lattice_directions_of, LatticePlan};
use reconstruct::{Neighbors, NodeTables};

/// `v' = v − ((v − v_*)·n) n`, `v'_* = v_* + ((v − v_*)·n) n`.
pub fn collision_geometry(v: &[f64; 3], v_star: &[f64; 3], n: &[f64; 3]) -> Result<([f64; 3], [f64; 3])> {
    let nn = n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
    if !((nn - 1.0).abs() <= 1e-12) {
        return Err(invalid("n", format!("|n|² = {nn}, expected 1")));
    }
    let g = [v[0] - v_star[0], v[1] - v_star[1], v[2] - v_star[2]];
    let gn = g[0] * n[0] + g[1] * n[1] + g[2] * n[2];
    let vp = [0, 1, 2].map(|d| v[d] - gn * n[d]);
    let vsp = [0, 1, 2].map(|d| v_star[d] + gn * n[d]);
    Ok((vp, vsp))
}

/// Per-node gain rate `A` and loss rate `L` of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionRates {
    pub gain_rate: Vec<f64>,
    pub loss_rate: Vec<f64>,
}

/// `Q_j` of one cell, before and after the conservation correction.
#[derive(Clone, Debug)]
pub struct CellOperator {
    pub raw: Vec<f64>,
    pub corrected: Vec<f64>,
    pub projection: Projection,
}

/// `Q_j` over a whole field.
#[derive(Clone, Debug)]
pub struct OperatorOutput {
    /// Corrected values, cell-major like the field.
    pub q: Vec<f64>,
    /// `max |Q_j|` before the correction.
    pub raw_max_abs: f64,
    /// `Σ |correction| · dx^k dv³`.
    pub projection_residual: f64,
}

/// Evaluation counters.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CollisionTiming {
    pub cell_evaluations: u64,
    pub seconds: f64,
}

impl CollisionTiming {
    pub fn seconds_per_cell(&self) -> f64 {
        if self.cell_evaluations == 0 {
            0.0
        } else {
            self.seconds / self.cell_evaluations as f64
        }
    }
}

/// Tuning knobs of [`CollisionOperator`].
#[derive(Clone, Copy, Debug)]
pub struct CollisionOptions {
    /// Use direct summation even when the tabulated path applies.
    pub force_general: bool,
    /// Store the tabulated entries when they fit in this many bytes.
    pub store_limit_bytes: u64,
}

impl Default for CollisionOptions {
    fn default() -> Self {
        Self {
            force_general: false,
            store_limit_bytes: 1 << 30,
        }
    }
}

#[derive(Debug)]
enum Plan {
    Lattice(LatticePlan),
    General(GeneralPlan),
}

/// Precomputed collision quadrature for one grid, kernel and statistics.
pub struct CollisionOperator {
    grid: Arc<PhaseGrid>,
    kernel: KernelSpec,
    stats: StatisticsParam,
    neighbors: Neighbors,
    plan: Plan,
    projector: Projector,
    evals: AtomicU64,
    nanos: AtomicU64,
}

impl std::fmt::Debug for CollisionOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CollisionOperator")
            .field("grid", &self.grid.header())
            .field("kernel", &self.kernel)
            .field("stats", &self.stats)
            .field("lattice_path", &self.uses_lattice_path())
            .finish()
    }
}

impl CollisionOperator {
    pub fn new(grid: Arc<PhaseGrid>, kernel: KernelSpec, stats: StatisticsParam) -> Self {
        Self::with_options(grid, kernel, stats, CollisionOptions::default())
    }

    pub fn with_options(
        grid: Arc<PhaseGrid>,
        kernel: KernelSpec,
        stats: StatisticsParam,
        options: CollisionOptions,
    ) -> Self {
        let lattice_dirs = if options.force_general || kernel.speed_factor(1.0).is_none() {
            None
        } else {
            lattice_directions_of(&grid)
        };
        let plan = match lattice_dirs {
            Some(dirs) => Plan::Lattice(LatticePlan::build(&grid, &kernel, dirs, options.store_limit_bytes)),
            None => Plan::General(GeneralPlan::build(&grid)),
        };
        if let Plan::Lattice(p) = &plan {
            log::debug!(
                "collision table: {} pairs, {} entries, {} slots, stored={}",
                p.pairs.len(),
                p.num_entries(),
                p.num_slots(),
                p.is_stored()
            );
        }
        Self {
            neighbors: Neighbors::new(&grid),
            projector: Projector::new(&grid),
            grid,
            kernel,
            stats,
            plan,
            evals: AtomicU64::new(0),
            nanos: AtomicU64::new(0),
        }
    }

    pub fn grid(&self) -> &Arc<PhaseGrid> {
        &self.grid
    }
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }
    pub fn stats(&self) -> &StatisticsParam {
        &self.stats
    }

    pub fn uses_lattice_path(&self) -> bool {
        matches!(self.plan, Plan::Lattice(_))
    }

    /// Whether the tabulated path keeps its entries in memory.
    pub fn is_stored(&self) -> bool {
        matches!(&self.plan, Plan::Lattice(p) if p.is_stored())
    }

    /// Number of `(pair, direction)` entries of the tabulated path.
    pub fn num_entries(&self) -> Option<u64> {
        match &self.plan {
            Plan::Lattice(p) => Some(p.num_entries()),
            Plan::General(_) => None,
        }
    }

    /// Forces on-the-fly entry generation (mainly for testing).
    pub fn drop_storage(&mut self) {
        if let Plan::Lattice(p) = &mut self.plan {
            p.drop_storage();
        }
    }

    pub fn timing(&self) -> CollisionTiming {
        CollisionTiming {
            cell_evaluations: self.evals.load(Ordering::Relaxed),
            seconds: self.nanos.load(Ordering::Relaxed) as f64 * 1e-9,
        }
    }

    fn evaluate<const C: usize>(&self, ys: [&[f64]; C], want_bony: bool) -> [(CollisionRates, f64); C] {
        let start = Instant::now();
        let n = self.grid.num_nodes();
        let tabs: [NodeTables; C] = ys.map(|y| {
            assert_eq!(y.len(), n, "cell slice has the wrong length");
            let mut tab = NodeTables::default();
            tab.fill(y, &self.stats, &self.neighbors);
            tab
        });
        let tab_refs: [&NodeTables; C] = std::array::from_fn(|c| &tabs[c]);
        let mut gain: [Vec<f64>; C] = std::array::from_fn(|_| vec![0.0; n]);
        let mut loss: [Vec<f64>; C] = std::array::from_fn(|_| vec![0.0; n]);
        let dv = self.grid.dv();
        let w = self.grid.velocity_weight();
        let bony = match &self.plan {
            Plan::Lattice(p) => {
                let mut slots = Vec::new();
                p.fill_slots(tab_refs, &self.stats, &mut slots);
                if want_bony {
                    p.accumulate::<C, true>(tab_refs, &slots, &mut gain, &mut loss, dv)
                } else {
                    p.accumulate::<C, false>(tab_refs, &slots, &mut gain, &mut loss, dv)
                }
            }
            Plan::General(p) => std::array::from_fn(|c| {
                p.accumulate(&self.grid, &self.kernel, &self.stats, &tabs[c], &mut gain[c], &mut loss[c]);
                if want_bony {
                    p.bony(&self.grid, &self.kernel, &self.stats, &tabs[c])
                } else {
                    0.0
                }
            }),
        };
        self.evals.fetch_add(C as u64, Ordering::Relaxed);
        self.nanos.fetch_add(start.elapsed().as_nanos() as u64, Ordering::Relaxed);
        let mut out = gain.into_iter().zip(loss).zip(bony).map(|((mut gain, mut loss), b)| {
            for x in gain.iter_mut().chain(loss.iter_mut()) {
                *x *= w;
            }
            (
                CollisionRates {
                    gain_rate: gain,
                    loss_rate: loss,
                },
                b * w * w,
            )
        });
        std::array::from_fn(|_| out.next().unwrap())
    }

    /// Rates (and optionally the Bony integrand) of several cells. Cells
    /// share passes over the collision table; each result equals the
    /// single-cell evaluation exactly.
    pub fn rates_batch(&self, ys: &[&[f64]], want_bony: bool) -> Vec<(CollisionRates, f64)> {
        let mut out = Vec::with_capacity(ys.len());
        let mut chunks = ys.chunks_exact(4);
        for q in &mut chunks {
            out.extend(self.evaluate([q[0], q[1], q[2], q[3]], want_bony));
        }
        let mut rest = chunks.remainder().chunks_exact(2);
        for q in &mut rest {
            out.extend(self.evaluate([q[0], q[1]], want_bony));
        }
        for &y in rest.remainder() {
            out.extend(self.evaluate([y], want_bony));
        }
        out
    }

    /// Rates of one cell given its occupations.
    pub fn rates(&self, y: &[f64]) -> CollisionRates {
        let [(r, _)] = self.evaluate([y], false);
        r
    }

    /// Rates plus the velocity part of the Bony integrand of one cell.
    pub fn rates_and_bony(&self, y: &[f64]) -> (CollisionRates, f64) {
        let [r] = self.evaluate([y], true);
        r
    }

    /// Velocity part of the Bony integrand of one cell.
    pub fn bony_cell(&self, y: &[f64]) -> f64 {
        self.rates_and_bony(y).1
    }

    /// `Q_j` of one cell, raw and with conserved moments restored.
    pub fn operator_cell(&self, y: &[f64]) -> CellOperator {
        let r = self.rates(y);
        let raw: Vec<f64> = y
            .iter()
            .zip(r.gain_rate.iter().zip(&r.loss_rate))
            .map(|(&yi, (&a, &l))| self.stats.factor(yi) * a - yi * l)
            .collect();
        let mut corrected = raw.clone();
        let projection = self
            .projector
            .correct(y, self.stats.ceiling(), &mut corrected, [0.0; 5], false);
        CellOperator {
            raw,
            corrected,
            projection,
        }
    }

    pub(crate) fn projector(&self) -> &Projector {
        &self.projector
    }
}

fn check_cell(f: &DistributionField, cell: usize) -> Result<()> {
    if cell >= f.grid().num_cells() {
        return Err(invalid("cell", format!("{cell} >= {}", f.grid().num_cells())));
    }
    f.check_invariants(0)
}

/// Gain part `Q_j⁺ = F_j(f)·A` at every node of one cell.
///
/// Builds the quadrature tables on every call; use [`CollisionOperator`]
/// for repeated evaluation.
pub fn gain(f: &DistributionField, ks: &KernelSpec, s: &StatisticsParam, cell: usize) -> Result<Vec<f64>> {
    check_cell(f, cell)?;
    let op = CollisionOperator::new(f.grid_arc().clone(), ks.clone(), *s);
    let y = f.cell(cell);
    let r = op.rates(y);
    Ok(y.iter().zip(&r.gain_rate).map(|(&yi, &a)| s.factor(yi) * a).collect())
}

/// Gain and loss rates of one cell.
pub fn loss_rates(f: &DistributionField, ks: &KernelSpec, s: &StatisticsParam, cell: usize) -> Result<CollisionRates> {
    check_cell(f, cell)?;
    let op = CollisionOperator::new(f.grid_arc().clone(), ks.clone(), *s);
    Ok(op.rates(f.cell(cell)))
}

/// `Q_j` over all cells with the conserved moments of every cell restored.
pub fn collision_operator(f: &DistributionField, ks: &KernelSpec, s: &StatisticsParam) -> Result<OperatorOutput> {
    f.check_invariants(0)?;
    let op = CollisionOperator::new(f.grid_arc().clone(), ks.clone(), *s);
    Ok(apply_operator(&op, f))
}

/// As [`collision_operator`] with a prepared operator.
pub fn apply_operator(op: &CollisionOperator, f: &DistributionField) -> OperatorOutput {
    let g = f.grid();
    let cells: Vec<CellOperator> = (0..g.num_cells())
        .into_par_iter()
        .map(|c| op.operator_cell(f.cell(c)))
        .collect();
    let weight = g.cell_volume() * g.velocity_weight();
    let mut q = Vec::with_capacity(f.data().len());
    let mut raw_max_abs: f64 = 0.0;
    let mut residual = 0.0;
    for c in cells {
        raw_max_abs = c.raw.iter().fold(raw_max_abs, |m, x| m.max(x.abs()));
        residual += c.projection.magnitude * weight;
        q.extend(c.corrected);
    }
    OperatorOutput {
        q,
        raw_max_abs,
        projection_residual: residual,
    }
}
