//! Time stepping: mollified data, exact free transport and the exponential
//! collision step, combined by Lie or Strang splitting.
//!
//! The collision step freezes the gain rate `A`, loss rate `L` and residual
//! `R = F_j(z)/(1 − αz)` at a state `z` and solves the linear equation
//! `y' = A(1 − αy)R − yL` exactly:
//!
//! ```text
//! y(dt) = y∞ + (y0 − y∞) e^{−λ dt},   λ = αAR + L,   y∞ = AR/λ ∈ [0, 1/α]
//! ```
//!
//! The first sweep freezes at `z = y0`; later sweeps freeze at the midpoint
//! `(y0 + y)/2` of the previous result. Every sweep ends with the bounded
//! projection that restores the cell's mass, momentum and energy.

mod checkpoint;
mod initial;
mod transport;

use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{CollisionOperator, CollisionRates};
use crate::diagnostics::{
    conserved_moments, tail_mass, DiagnosticsRecord, DiagnosticsSink, Moments, RunningMax,
};
use crate::error::{invalid, Error, Result};
use crate::field::DistributionField;
use crate::grid::PhaseGrid;
use crate::kernel::KernelSpec;
use crate::statistics::StatisticsParam;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use initial::{mollify_initial, InitialData, InitialProfile};
pub use transport::{to_characteristic_frame, transport};

/// Operator splitting order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Splitting {
    /// Collide for `dt`, then transport for `dt`.
    Lie,
    /// Transport `dt/2`, collide `dt`, transport `dt/2`.
    #[default]
    Strang,
}

impl FromStr for Splitting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lie" => Ok(Self::Lie),
            "strang" => Ok(Self::Strang),
            _ => Err(invalid("splitting", format!("`{s}` is not lie or strang"))),
        }
    }
}

/// Time-stepping parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Per-cell `L¹` change below which the sub-iteration stops.
    pub picard_tol: f64,
    pub picard_max: u32,
    pub splitting: Splitting,
    /// Skip transport.
    pub homogeneous: bool,
    /// Emit a diagnostics record every `cadence` steps (and at the end).
    pub cadence: u64,
    /// Speeds `λ` for the tail monitor.
    pub tail_lambdas: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_end: 1.0,
            picard_tol: 1e-8,
            picard_max: 2,
            splitting: Splitting::Strang,
            homogeneous: false,
            cadence: 1,
            tail_lambdas: vec![2.0, 3.0, 4.0],
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", format!("{} must be positive", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(invalid("t_end", format!("{} must be nonnegative", self.t_end)));
        }
        if !(self.picard_tol > 0.0) {
            return Err(invalid("picard_tol", format!("{} must be positive", self.picard_tol)));
        }
        if self.picard_max < 1 {
            return Err(invalid("picard_max", "must be at least 1"));
        }
        if self.cadence < 1 {
            return Err(invalid("cadence", "must be at least 1"));
        }
        if self.tail_lambdas.iter().any(|&l| !(l > 0.0)) {
            return Err(invalid("tail_lambdas", "speeds must be positive"));
        }
        self.num_steps().map(|_| ())
    }

    /// `t_end / dt`, which must be a whole number.
    pub fn num_steps(&self) -> Result<u64> {
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(1.0) {
            return Err(invalid(
                "t_end",
                format!("{} is not a whole number of steps dt = {}", self.t_end, self.dt),
            ));
        }
        Ok(n as u64)
    }
}

/// Outcome of the collision step on one cell.
#[derive(Clone, Debug)]
pub(crate) struct CellStep {
    pub y: Vec<f64>,
    /// Velocity part of the Bony integrand at the input state.
    pub bony: f64,
    pub sweeps: u32,
    pub converged: bool,
    /// `Σ |correction|` of the last projection.
    pub projection: f64,
    pub limited: bool,
}

/// Exponential update of one cell with rates frozen at the state they were
/// computed from, `z`.
fn exponential_update(op: &CollisionOperator, y0: &[f64], z: &[f64], rates: &CollisionRates, dt: f64) -> Vec<f64> {
    let s = op.stats();
    let alpha = s.alpha();
    let ceiling = s.ceiling();
    y0.iter()
        .zip(z)
        .zip(rates.gain_rate.iter().zip(&rates.loss_rate))
        .map(|((&y0, &z), (&a, &l))| {
            let ar = a * s.residual(z);
            let lambda = alpha * ar + l;
            if lambda <= 0.0 {
                return y0;
            }
            let y_inf = (ar / lambda).min(ceiling);
            (y_inf + (y0 - y_inf) * (-lambda * dt).exp()).clamp(0.0, ceiling)
        })
        .collect()
}

/// Picard sweeps for several cells in lockstep; cells leave the batch once
/// converged. Each result equals the single-cell computation.
pub(crate) fn collide_cells(op: &CollisionOperator, y0s: &[&[f64]], dt: f64, tol: f64, max_sweeps: u32) -> Vec<CellStep> {
    let projector = op.projector();
    let ceiling = op.stats().ceiling();
    let w = op.grid().velocity_weight();
    let targets: Vec<[f64; 5]> = y0s.iter().map(|y0| projector.moments(y0)).collect();
    let mut z: Vec<Vec<f64>> = y0s.iter().map(|y0| y0.to_vec()).collect();
    let mut prev: Vec<Option<Vec<f64>>> = vec![None; y0s.len()];
    let mut out: Vec<CellStep> = (0..y0s.len())
        .map(|_| CellStep {
            y: Vec::new(),
            bony: 0.0,
            sweeps: 0,
            converged: max_sweeps == 1,
            projection: 0.0,
            limited: false,
        })
        .collect();
    let mut active: Vec<usize> = (0..y0s.len()).collect();
    for sweep in 1..=max_sweeps {
        if active.is_empty() {
            break;
        }
        let zs: Vec<&[f64]> = active.iter().map(|&i| z[i].as_slice()).collect();
        let rates = op.rates_batch(&zs, sweep == 1);
        let mut still = Vec::with_capacity(active.len());
        for (&i, (r, b)) in active.iter().zip(rates) {
            let o = &mut out[i];
            if sweep == 1 {
                o.bony = b;
            }
            let reference = exponential_update(op, y0s[i], &z[i], &r, dt);
            let mut y = reference.clone();
            let p = projector.correct(&reference, ceiling, &mut y, targets[i], true);
            o.projection = p.magnitude;
            o.limited = p.limited;
            o.sweeps = sweep;
            if let Some(prev) = &prev[i] {
                let change: f64 = prev.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum::<f64>() * w;
                if change <= tol {
                    o.converged = true;
                    o.y = y;
                    continue;
                }
            }
            if sweep < max_sweeps {
                z[i] = y0s[i].iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
                still.push(i);
            }
            o.y = y.clone();
            prev[i] = Some(y);
        }
        active = still;
    }
    out
}

/// Cells per collision batch; a multiple of the table pass width.
const BATCH: usize = 4;

/// Statistics of one collision sub-step over all cells.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct CollisionSummary {
    pub bony_rate: f64,
    pub sweeps: u64,
    pub unconverged: u64,
    pub limited: u64,
    pub projection_residual: f64,
}

pub(crate) fn collide_in_place(
    op: &CollisionOperator,
    f: &mut DistributionField,
    dt: f64,
    tol: f64,
    max_sweeps: u32,
) -> CollisionSummary {
    let g = f.grid_arc().clone();
    let nn = g.num_nodes();
    let cells: Vec<usize> = (0..g.num_cells()).collect();
    let steps: Vec<CellStep> = cells
        .par_chunks(BATCH)
        .flat_map_iter(|chunk| {
            let ys: Vec<&[f64]> = chunk.iter().map(|&c| f.cell(c)).collect();
            collide_cells(op, &ys, dt, tol, max_sweeps)
        })
        .collect();
    let mut sum = CollisionSummary::default();
    let data = f.data_mut();
    for (c, s) in steps.into_iter().enumerate() {
        data[c * nn..(c + 1) * nn].copy_from_slice(&s.y);
        sum.bony_rate += s.bony;
        sum.sweeps += s.sweeps as u64;
        sum.unconverged += (!s.converged) as u64;
        sum.limited += s.limited as u64;
        sum.projection_residual += s.projection;
    }
    sum.bony_rate *= g.cell_volume();
    sum.projection_residual *= g.cell_volume() * g.velocity_weight();
    sum
}

/// One exponential collision step of length `cfg.dt` on every cell.
pub fn exponential_collision_step(
    f: &DistributionField,
    ks: &KernelSpec,
    s: &StatisticsParam,
    cfg: &SolverConfig,
) -> Result<DistributionField> {
    cfg.validate()?;
    f.check_invariants(0)?;
    let op = CollisionOperator::new(f.grid_arc().clone(), ks.clone(), *s);
    let mut out = f.clone();
    let sum = collide_in_place(&op, &mut out, cfg.dt, cfg.picard_tol, cfg.picard_max);
    if sum.unconverged > 0 {
        log::warn!(
            "sub-iteration reached picard_max = {} in {} of {} cells",
            cfg.picard_max,
            sum.unconverged,
            f.grid().num_cells()
        );
    }
    out.check_invariants(0)?;
    Ok(out)
}

/// Mutable state of a run between steps.
pub struct Simulation {
    op: Arc<CollisionOperator>,
    cfg: SolverConfig,
    field: DistributionField,
    step: u64,
    num_steps: u64,
    initial_moments: Moments,
    running_max: RunningMax,
    bony_cumulative: f64,
    bony_rate: f64,
    sweeps: u64,
    unconverged: u64,
    limited: u64,
    projection_residual: f64,
}

impl Simulation {
    /// Starts from an already mollified field at step 0.
    pub fn new(op: Arc<CollisionOperator>, cfg: SolverConfig, initial: DistributionField) -> Result<Self> {
        cfg.validate()?;
        initial.check_invariants(0)?;
        if !initial.grid().same_as(op.grid()) {
            return Err(Error::GridMismatch("initial field and collision operator".into()));
        }
        if initial.ceiling() != op.stats().ceiling() {
            return Err(invalid("alpha", "initial field and statistics disagree"));
        }
        let num_steps = cfg.num_steps()?;
        let mut field = initial;
        field.set_time(0.0);
        let bony_rate = crate::diagnostics::bony_with(&op, &field);
        Ok(Self {
            initial_moments: conserved_moments(&field),
            running_max: RunningMax::new(op.grid()),
            op,
            cfg,
            field,
            step: 0,
            num_steps,
            bony_cumulative: 0.0,
            bony_rate,
            sweeps: 0,
            unconverged: 0,
            limited: 0,
            projection_residual: 0.0,
        })
    }

    pub fn field(&self) -> &DistributionField {
        &self.field
    }

    pub fn into_field(self) -> DistributionField {
        self.field
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn num_steps(&self) -> u64 {
        self.num_steps
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.num_steps
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn operator(&self) -> &Arc<CollisionOperator> {
        &self.op
    }

    pub fn initial_moments(&self) -> Moments {
        self.initial_moments
    }

    /// Cells whose sub-iteration stopped at `picard_max`, summed over steps.
    pub fn picard_unconverged(&self) -> u64 {
        self.unconverged
    }

    /// Cells whose projection was scaled down to respect the bounds.
    pub fn projection_limited(&self) -> u64 {
        self.limited
    }

    fn should_emit(&self) -> bool {
        self.step % self.cfg.cadence == 0 || self.step == self.num_steps
    }

    /// Advances one step; invariant breaches abort with the step index.
    pub fn advance(&mut self) -> Result<()> {
        if self.is_finished() {
            return Ok(());
        }
        let step = self.step + 1;
        let dt = self.cfg.dt;
        let transport = !self.cfg.homogeneous;
        let sum = match self.cfg.splitting {
            Splitting::Strang => {
                if transport {
                    transport::transport_in_place(&mut self.field, 0.5 * dt);
                    self.field.check_invariants(step)?;
                }
                let sum = self.collide(step)?;
                if transport {
                    transport::transport_in_place(&mut self.field, 0.5 * dt);
                    self.field.check_invariants(step)?;
                }
                sum
            }
            Splitting::Lie => {
                let sum = self.collide(step)?;
                if transport {
                    transport::transport_in_place(&mut self.field, dt);
                    self.field.check_invariants(step)?;
                }
                sum
            }
        };
        self.step = step;
        self.field.set_time(step as f64 * dt);
        self.bony_rate = sum.bony_rate;
        self.bony_cumulative += dt * sum.bony_rate;
        self.sweeps += sum.sweeps;
        self.unconverged += sum.unconverged;
        self.limited += sum.limited;
        self.projection_residual = sum.projection_residual;
        if sum.unconverged > 0 {
            log::debug!("step {step}: {} cells stopped at picard_max", sum.unconverged);
        }
        if sum.limited > 0 {
            log::warn!("step {step}: conservation correction limited in {} cells", sum.limited);
        }
        Ok(())
    }

    fn collide(&mut self, step: u64) -> Result<CollisionSummary> {
        let sum = collide_in_place(&self.op, &mut self.field, self.cfg.dt, self.cfg.picard_tol, self.cfg.picard_max);
        self.field.check_invariants(step)?;
        Ok(sum)
    }

    /// Diagnostics of the current state; updates the running maximum.
    pub fn record(&mut self) -> DiagnosticsRecord {
        self.running_max.update(&self.field);
        let m = conserved_moments(&self.field);
        let (mass_drift, momentum_drift, energy_drift) = m.drift_from(&self.initial_moments);
        let (min_f, max_f) = self
            .field
            .data()
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &y| (lo.min(y), hi.max(y)));
        DiagnosticsRecord {
            step: self.step,
            t: self.field.time(),
            mass: m.mass,
            momentum: m.momentum,
            energy: m.energy,
            mass_drift,
            momentum_drift,
            energy_drift,
            sup_mass_density: self.running_max.value(),
            bony_rate: self.bony_rate,
            bony_cumulative: self.bony_cumulative,
            tail_mass: tail_mass(&self.field, &self.cfg.tail_lambdas),
            min_f,
            max_f,
            layer_gap: self.field.ceiling() - max_f,
            projection_residual: self.projection_residual,
            picard_iterations: self.sweeps,
            picard_unconverged: self.unconverged,
        }
    }

    /// Runs to `t_end`, emitting records at step 0, every `cadence` steps and
    /// at the end. `after_step` sees the state after every step.
    pub fn run_with<F>(&mut self, sinks: &mut [&mut dyn DiagnosticsSink], mut after_step: F) -> Result<()>
    where
        F: FnMut(&Simulation) -> Result<()>,
    {
        if self.step == 0 {
            let rec = self.record();
            for s in sinks.iter_mut() {
                s.record(&rec)?;
            }
        }
        while !self.is_finished() {
            self.advance()?;
            if self.should_emit() {
                let rec = self.record();
                for s in sinks.iter_mut() {
                    s.record(&rec)?;
                }
            }
            after_step(self)?;
        }
        if self.unconverged > 0 {
            log::warn!(
                "sub-iteration reached picard_max = {} in {} cell-steps",
                self.cfg.picard_max,
                self.unconverged
            );
        }
        Ok(())
    }

    /// Snapshot of the full state.
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            header: self.field.grid().header(),
            alpha: self.field.alpha(),
            step: self.step,
            time: self.field.time(),
            data: self.field.data().to_vec(),
            running_max: self.running_max.values().to_vec(),
            initial_moments: self.initial_moments.to_array(),
            bony_cumulative: self.bony_cumulative,
            bony_rate: self.bony_rate,
            projection_residual: self.projection_residual,
            sweeps: self.sweeps,
            unconverged: self.unconverged,
            limited: self.limited,
        }
    }

    /// Restores a snapshot taken with the same grid and statistics.
    pub fn resume(op: Arc<CollisionOperator>, cfg: SolverConfig, ck: Checkpoint) -> Result<Self> {
        cfg.validate()?;
        let g = op.grid();
        if ck.header != g.header() {
            return Err(Error::GridMismatch(format!(
                "checkpoint `{}` vs `{}`",
                ck.header.to_line(),
                g.header().to_line()
            )));
        }
        if ck.alpha != op.stats().alpha() {
            return Err(invalid("alpha", format!("checkpoint has {}, run has {}", ck.alpha, op.stats().alpha())));
        }
        let num_steps = cfg.num_steps()?;
        if ck.step > num_steps {
            return Err(invalid("t_end", format!("checkpoint at step {} is past the end", ck.step)));
        }
        let mut field = DistributionField::from_data(g.clone(), ck.alpha, ck.data)?;
        field.set_time(ck.time);
        Ok(Self {
            running_max: RunningMax::from_values(g, ck.running_max)?,
            op,
            cfg,
            field,
            step: ck.step,
            num_steps,
            initial_moments: Moments::from_array(ck.initial_moments),
            bony_cumulative: ck.bony_cumulative,
            bony_rate: ck.bony_rate,
            sweeps: ck.sweeps,
            unconverged: ck.unconverged,
            limited: ck.limited,
            projection_residual: ck.projection_residual,
        })
    }
}

/// Mollifies `data` on `g` and integrates to `cfg.t_end`.
pub fn run(
    data: &InitialData,
    ks: &KernelSpec,
    s: &StatisticsParam,
    g: &Arc<PhaseGrid>,
    cfg: &SolverConfig,
    sinks: &mut [&mut dyn DiagnosticsSink],
) -> Result<DistributionField> {
    if (data.alpha - s.alpha()).abs() > 0.0 {
        return Err(invalid("alpha", "initial data and statistics disagree"));
    }
    let f0 = mollify_initial(data, g)?;
    let op = Arc::new(CollisionOperator::new(g.clone(), ks.clone(), *s));
    let mut sim = Simulation::new(op, cfg.clone(), f0)?;
    sim.run_with(sinks, |_| Ok(()))?;
    Ok(sim.into_field())
}
