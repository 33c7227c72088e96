//! Scenario orchestration: single runs, the resolution study in `j`, the
//! initial-data stability study and the `α` sweep, plus file output.
//!
//! Files written by [`run_single`] into the output directory:
//! `diagnostics.csv`, `summary.json`, `checkpoint.bin` (final state) and
//! `checkpoint_<step>.bin` when periodic checkpoints are enabled.

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::collision::CollisionOperator;
use crate::diagnostics::{self, conserved_moments, l1_distance, CsvSink, DiagnosticsRecord, DiagnosticsSink, Moments};
use crate::error::{Error, Result};
use crate::field::DistributionField;
use crate::grid::PhaseGrid;
use crate::kernel::{validate_kernel, KernelCertificate};
use crate::solver::{mollify_initial, read_checkpoint, write_checkpoint, InitialData, Simulation};
use crate::statistics::equilibrium_field;

pub use config::{
    read_tabulated, GridSection, InitialKind, InitialSection, KernelModel, KernelSection, OutputSection, RunConfig,
    RunSection, SolverSection, StatisticsSection, StudySection, SCHEMA_VERSION,
};

/// Runs `f` on a pool of `workers` threads (0: rayon's default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("[run] workers: {e}")))?;
    Ok(pool.install(f))
}

/// Machine-readable result of a single run.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub grid: String,
    pub alpha: f64,
    pub j_level: f64,
    pub kernel: String,
    pub steps: u64,
    pub t_end: f64,
    pub initial: Moments,
    pub final_moments: Moments,
    pub max_mass_drift: f64,
    pub max_momentum_drift: f64,
    pub max_energy_drift: f64,
    pub max_projection_residual: f64,
    pub min_layer_gap: f64,
    pub sup_mass_density_initial: f64,
    pub sup_mass_density_final: f64,
    pub bony_cumulative: f64,
    /// The Bony bound is proven in one space dimension only.
    pub bony_certified: bool,
    /// Mass of the clamped datum minus mass of the mollified field.
    pub mollifier_rim_loss: f64,
    pub picard_unconverged: u64,
    pub projection_limited: u64,
    pub seconds_per_cell_evaluation: f64,
    pub wall_seconds: f64,
}

fn summarize(
    cfg: &RunConfig,
    sim: &Simulation,
    records: &[DiagnosticsRecord],
    rim_loss: f64,
    wall: f64,
) -> RunSummary {
    let f = sim.field();
    let g = f.grid();
    let first = records.first();
    let fold = |sel: fn(&DiagnosticsRecord) -> f64| records.iter().map(sel).fold(0.0, f64::max);
    RunSummary {
        scenario: cfg.scenario.clone(),
        grid: g.header().to_line(),
        alpha: f.alpha(),
        j_level: g.j_level(),
        kernel: sim.operator().kernel().label().into(),
        steps: sim.step_index(),
        t_end: f.time(),
        initial: sim.initial_moments(),
        final_moments: conserved_moments(f),
        max_mass_drift: fold(|r| r.mass_drift),
        max_momentum_drift: fold(|r| r.momentum_drift),
        max_energy_drift: fold(|r| r.energy_drift),
        max_projection_residual: fold(|r| r.projection_residual),
        min_layer_gap: records.iter().map(|r| r.layer_gap).fold(f.ceiling(), f64::min),
        sup_mass_density_initial: first.map_or(0.0, |r| r.sup_mass_density),
        sup_mass_density_final: records.last().map_or(0.0, |r| r.sup_mass_density),
        bony_cumulative: records.last().map_or(0.0, |r| r.bony_cumulative),
        bony_certified: g.k() == 1,
        mollifier_rim_loss: rim_loss,
        picard_unconverged: sim.picard_unconverged(),
        projection_limited: sim.projection_limited(),
        seconds_per_cell_evaluation: sim.operator().timing().seconds_per_cell(),
        wall_seconds: wall,
    }
}

/// Mollified initial field for truncation level `j` and the mass lost at
/// the rim of the velocity ball.
pub fn prepare_initial(cfg: &RunConfig, g: &Arc<PhaseGrid>, j: f64, alpha: f64) -> Result<(DistributionField, f64)> {
    let data = cfg.initial_data(g, j, alpha)?;
    let f0 = mollify_initial(&data, g)?;
    Ok((f0.clone(), rim_loss(&data, g, &f0)?))
}

fn rim_loss(data: &InitialData, g: &PhaseGrid, f0: &DistributionField) -> Result<f64> {
    let cap = data.cap();
    let clamped: f64 = data.sample(g)?.iter().map(|y| y.clamp(0.0, cap)).sum();
    Ok(clamped * g.cell_volume() * g.velocity_weight() - conserved_moments(f0).mass)
}

struct Collect<'a>(&'a mut Vec<DiagnosticsRecord>);

impl DiagnosticsSink for Collect<'_> {
    fn record(&mut self, rec: &DiagnosticsRecord) -> Result<()> {
        self.0.push(rec.clone());
        Ok(())
    }
}

/// Single run: diagnostics CSV, JSON summary and checkpoints in `out`.
///
/// With `resume`, the run continues from the given checkpoint; rows of an
/// existing `diagnostics.csv` up to the checkpoint step are kept, so the
/// final files equal those of an uninterrupted run.
pub fn run_single(cfg: &RunConfig, out: &Path, resume: Option<&Path>) -> Result<RunSummary> {
    let start = Instant::now();
    fs::create_dir_all(out)?;
    let g = cfg.grid()?;
    let stats = cfg.stats()?;
    let kernel = cfg.kernel()?;
    let scfg = cfg.solver_config()?;
    let (f0, rim) = prepare_initial(cfg, &g, g.j_level(), stats.alpha())?;
    if rim > 0.0 {
        log::info!("mollification dropped mass {rim:e} at the rim of the velocity ball");
    }
    let op = Arc::new(CollisionOperator::new(g.clone(), kernel, stats));

    let csv_path = out.join("diagnostics.csv");
    let mut records: Vec<DiagnosticsRecord> = Vec::new();
    let mut sim = match resume {
        None => Simulation::new(op, scfg, f0)?,
        Some(path) => {
            let ck = read_checkpoint(path)?;
            if csv_path.exists() {
                let text = fs::read_to_string(&csv_path)?;
                records = diagnostics::read_csv(&text)?
                    .into_iter()
                    .filter(|r| r.step <= ck.step)
                    .collect();
            }
            Simulation::resume(op, scfg, ck)?
        }
    };

    let extra = vec![
        format!("scenario: {}", cfg.scenario),
        format!("alpha: {}", stats.alpha()),
        format!("kernel: {}", sim.operator().kernel().label()),
    ];
    let mut csv = CsvSink::new(BufWriter::new(File::create(&csv_path)?), &g, &extra)?;
    for r in &records {
        csv.record(r)?;
    }
    let every = cfg.output.checkpoint_every;
    {
        let mut collect = Collect(&mut records);
        sim.run_with(&mut [&mut csv, &mut collect], |s| {
            if every > 0 && s.step_index() % every == 0 && !s.is_finished() {
                write_checkpoint(&out.join(format!("checkpoint_{:06}.bin", s.step_index())), &s.checkpoint())?;
            }
            Ok(())
        })?;
    }
    csv.flush()?;
    write_checkpoint(&out.join("checkpoint.bin"), &sim.checkpoint())?;
    let summary = summarize(cfg, &sim, &records, rim, start.elapsed().as_secs_f64());
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// Runs without writing files and returns the records and final field.
pub fn run_in_memory(cfg: &RunConfig) -> Result<(Vec<DiagnosticsRecord>, DistributionField)> {
    let g = cfg.grid()?;
    let stats = cfg.stats()?;
    let (f0, _) = prepare_initial(cfg, &g, g.j_level(), stats.alpha())?;
    let op = Arc::new(CollisionOperator::new(g, cfg.kernel()?, stats));
    let mut sim = Simulation::new(op, cfg.solver_config()?, f0)?;
    let mut records = Vec::new();
    sim.run_with(&mut [&mut records], |_| Ok(()))?;
    Ok((records, sim.into_field()))
}

/// Prolongs `f` to `fine` by node injection on the shared lattice; nodes
/// of `fine` absent from `f`'s grid are zero.
pub fn inject(f: &DistributionField, fine: &Arc<PhaseGrid>) -> Result<DistributionField> {
    let g = f.grid();
    if g.nv() != fine.nv() || g.half_width() != fine.half_width() || g.k() != fine.k() || g.nx() != fine.nx() {
        return Err(Error::GridMismatch("injection needs a shared lattice".into()));
    }
    let map: Vec<Option<usize>> = fine.lattice_indices().iter().map(|&ijk| g.node_at(ijk)).collect();
    let mut out = DistributionField::zeros(fine.clone(), f.alpha());
    let nn = fine.num_nodes();
    let data = out.data_mut();
    for c in 0..fine.num_cells() {
        for (n, m) in map.iter().enumerate() {
            if let Some(m) = m {
                data[c * nn + n] = f.get(c, *m);
            }
        }
    }
    Ok(out)
}

/// Result of [`run_convergence_study`].
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub j_levels: Vec<f64>,
    pub times: Vec<f64>,
    /// `distances[t][i] = ‖f_{j_i} − f_{j_{i+1}}‖₁` at `times[t]`.
    pub distances: Vec<Vec<f64>>,
    /// Fitted slope of `ln d` against `ln j` (per time).
    pub rates: Vec<f64>,
    pub strictly_decreasing: bool,
    pub status: String,
}

/// Field at each sample time for truncation level `j` on the shared lattice.
fn level_snapshots(cfg: &RunConfig, j: f64, steps: &[u64]) -> Result<Vec<DistributionField>> {
    let g = cfg.grid_at(j)?;
    let stats = cfg.stats_at(j, cfg.statistics.alpha)?;
    let (f0, _) = prepare_initial(cfg, &g, j, stats.alpha())?;
    let mut scfg = cfg.solver_config()?;
    scfg.t_end = steps.iter().copied().max().unwrap_or(0) as f64 * scfg.dt;
    let op = Arc::new(CollisionOperator::new(g, cfg.kernel()?, stats));
    let mut sim = Simulation::new(op, scfg, f0)?;
    let mut snaps: Vec<(u64, DistributionField)> = Vec::new();
    if steps.contains(&0) {
        snaps.push((0, sim.field().clone()));
    }
    sim.run_with(&mut [], |s| {
        if steps.contains(&s.step_index()) {
            snaps.push((s.step_index(), s.field().clone()));
        }
        Ok(())
    })?;
    steps
        .iter()
        .map(|st| {
            snaps
                .iter()
                .find(|(k, _)| k == st)
                .map(|(_, f)| f.clone())
                .ok_or_else(|| Error::Config(format!("[study] sample step {st} not reached")))
        })
        .collect()
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    crate::quadrature::linear_fit(&x, &y).0
}

/// Cauchy study in `j` on the configured velocity lattice.
///
/// Each level runs the scenario with truncation, regularization and
/// mollification at `j`; consecutive levels are compared at the sample
/// times after injecting the smaller ball into the larger.
pub fn run_convergence_study(cfg: &RunConfig, j_list: &[f64]) -> Result<ConvergenceReport> {
    if j_list.len() < 3 || j_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("[study] j_levels: need at least three ascending levels".into()));
    }
    let dt = cfg.solver.dt;
    if cfg.study.sample_times.iter().any(|&t| (t / dt - (t / dt).round()).abs() > 1e-9) {
        return Err(Error::Config("[study] sample_times: must be multiples of dt".into()));
    }
    let steps: Vec<u64> = cfg.study.sample_times.iter().map(|t| (t / dt).round() as u64).collect();
    let snaps: Vec<Vec<DistributionField>> = j_list
        .par_iter()
        .map(|&j| level_snapshots(cfg, j, &steps))
        .collect::<Result<_>>()?;
    let mut distances = Vec::new();
    for t in 0..steps.len() {
        let mut row = Vec::new();
        for i in 0..j_list.len() - 1 {
            let (a, b) = (&snaps[i][t], &snaps[i + 1][t]);
            let (small, large) = if a.grid().num_nodes() <= b.grid().num_nodes() { (a, b) } else { (b, a) };
            row.push(l1_distance(&inject(small, large.grid_arc())?, large)?);
        }
        distances.push(row);
    }
    let strictly_decreasing = distances.iter().all(|row| row.windows(2).all(|w| w[1] < w[0]));
    let rates = distances.iter().map(|row| fit_slope(&j_list[..j_list.len() - 1], row)).collect();
    Ok(ConvergenceReport {
        j_levels: j_list.to_vec(),
        times: cfg.study.sample_times.clone(),
        distances,
        rates,
        strictly_decreasing,
        status: if strictly_decreasing { "PASSED" } else { "FAILED" }.into(),
    })
}

/// One member of the stability study.
#[derive(Clone, Debug, Serialize)]
pub struct StabilityEntry {
    pub epsilon: f64,
    pub initial_distance: f64,
    pub sup_distance: f64,
    /// `sup_t ‖f_ε − f‖₁ / ε`; zero when `ε = 0` and the runs coincide.
    pub ratio: f64,
    pub exact_match: bool,
    pub clamped_nodes: usize,
}

/// Result of [`run_stability_study`].
#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub seed: u64,
    pub entries: Vec<StabilityEntry>,
    /// Largest over smallest ratio among `ε > 0`.
    pub spread: f64,
}

/// Unit-`L¹` Gaussian bump in `(x, v)` with seeded centre.
pub fn perturbation_shape(g: &PhaseGrid, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xc: [f64; 3] = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
    let vc: [f64; 3] = [0, 1, 2].map(|_| rng.random_range(-1.5..1.5));
    let (sx, sv) = (0.1, 0.75);
    let mut b = Vec::with_capacity(g.num_cells() * g.num_nodes());
    for c in 0..g.num_cells() {
        let x = g.cell_center(c);
        let rx: f64 = (0..g.k())
            .map(|d| {
                let dx = (x[d] - xc[d]).rem_euclid(1.0);
                dx.min(1.0 - dx).powi(2)
            })
            .sum();
        for v in g.velocities() {
            let rv: f64 = (0..3).map(|d| (v[d] - vc[d]).powi(2)).sum();
            b.push((-0.5 * rx / (sx * sx) - 0.5 * rv / (sv * sv)).exp());
        }
    }
    let total: f64 = b.iter().sum::<f64>() * g.cell_volume() * g.velocity_weight();
    b.iter().map(|x| x / total).collect()
}

/// Adds `ε·shape` to `f`, clamping to `[0, 1/α]`; returns the clamp count.
pub fn perturb(f: &DistributionField, shape: &[f64], eps: f64) -> Result<(DistributionField, usize)> {
    let ceiling = f.ceiling();
    let mut clamped = 0;
    let data: Vec<f64> = f
        .data()
        .iter()
        .zip(shape)
        .map(|(&y, &b)| {
            let z = y + eps * b;
            if z > ceiling || z < 0.0 {
                clamped += 1;
            }
            z.clamp(0.0, ceiling)
        })
        .collect();
    if clamped > 0 {
        log::warn!("perturbation of size {eps:e} clamped at {clamped} nodes");
    }
    let mut out = DistributionField::from_data(f.grid_arc().clone(), f.alpha(), data)?;
    out.set_time(f.time());
    Ok((out, clamped))
}

/// Continuity in the initial datum: `sup_t ‖f_ε(t) − f(t)‖₁ / ε`.
pub fn run_stability_study(cfg: &RunConfig, epsilons: &[f64]) -> Result<StabilityReport> {
    if epsilons.iter().any(|&e| !(e >= 0.0)) {
        return Err(Error::Config("[study] epsilons: must be nonnegative".into()));
    }
    let g = cfg.grid()?;
    let stats = cfg.stats()?;
    let (f0, _) = prepare_initial(cfg, &g, g.j_level(), stats.alpha())?;
    let op = Arc::new(CollisionOperator::new(g.clone(), cfg.kernel()?, stats));
    let scfg = cfg.solver_config()?;

    let mut base = vec![f0.clone()];
    let mut sim = Simulation::new(op.clone(), scfg.clone(), f0.clone())?;
    sim.run_with(&mut [], |s| {
        base.push(s.field().clone());
        Ok(())
    })?;

    let shape = perturbation_shape(&g, cfg.run.seed);
    let entries = epsilons
        .par_iter()
        .map(|&eps| -> Result<StabilityEntry> {
            let (p0, clamped) = perturb(&f0, &shape, eps)?;
            let initial = l1_distance(&p0, &f0)?;
            let mut sup = initial;
            let mut err = None;
            let mut sim = Simulation::new(op.clone(), scfg.clone(), p0)?;
            sim.run_with(&mut [], |s| {
                match l1_distance(s.field(), &base[s.step_index() as usize]) {
                    Ok(d) => sup = sup.max(d),
                    Err(e) => err = Some(e),
                }
                Ok(())
            })?;
            if let Some(e) = err {
                return Err(e);
            }
            let exact = sup == 0.0;
            Ok(StabilityEntry {
                epsilon: eps,
                initial_distance: initial,
                sup_distance: sup,
                ratio: if eps > 0.0 { sup / eps } else { 0.0 },
                exact_match: exact,
                clamped_nodes: clamped,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = entries.iter().filter(|e| e.epsilon > 0.0).map(|e| e.ratio).collect();
    let spread = if ratios.is_empty() {
        1.0
    } else {
        ratios.iter().copied().fold(0.0, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min)
    };
    Ok(StabilityReport {
        seed: cfg.run.seed,
        entries,
        spread,
    })
}

/// One member of the `α` sweep.
#[derive(Clone, Debug, Serialize)]
pub struct AlphaSweepEntry {
    pub alpha: f64,
    pub initial: Moments,
    pub final_moments: Moments,
    pub max_mass_drift: f64,
    pub max_energy_drift: f64,
    pub min_layer_gap: f64,
    pub sup_mass_density_ratio: f64,
    pub bony_cumulative: f64,
}

/// The configured scenario for every `α` in the list.
pub fn alpha_sweep(cfg: &RunConfig, alphas: &[f64]) -> Result<Vec<AlphaSweepEntry>> {
    alphas
        .par_iter()
        .map(|&alpha| {
            let mut c = cfg.clone();
            c.statistics.alpha = alpha;
            c.validate()?;
            let (rec, f) = run_in_memory(&c)?;
            let first = rec.first().expect("step 0 record");
            let last = rec.last().expect("final record");
            Ok(AlphaSweepEntry {
                alpha,
                initial: Moments {
                    mass: first.mass,
                    momentum: first.momentum,
                    energy: first.energy,
                },
                final_moments: conserved_moments(&f),
                max_mass_drift: rec.iter().map(|r| r.mass_drift).fold(0.0, f64::max),
                max_energy_drift: rec.iter().map(|r| r.energy_drift).fold(0.0, f64::max),
                min_layer_gap: rec.iter().map(|r| r.layer_gap).fold(f64::INFINITY, f64::min),
                sup_mass_density_ratio: last.sup_mass_density / first.sup_mass_density,
                bony_cumulative: last.bony_cumulative,
            })
        })
        .collect()
}

/// Kernel certificate for the configured kernel.
pub fn validate_configured_kernel(cfg: &RunConfig) -> Result<KernelCertificate> {
    let ks = cfg.kernel()?;
    let gammas = [1.0, 2.0, 4.0, 2.0 * cfg.grid.j_level];
    Ok(validate_kernel(&ks, &gammas, 20_000))
}

/// Writes `equilibrium.csv` (one row per node) and returns its moments.
pub fn write_equilibrium(cfg: &RunConfig, out: &Path) -> Result<(PathBuf, Moments)> {
    fs::create_dir_all(out)?;
    let g = Arc::new(PhaseGrid::with_lattice(
        cfg.grid.k,
        1,
        cfg.grid.j_level,
        cfg.grid.nv,
        cfg.grid.half_width.unwrap_or(cfg.grid.j_level),
        cfg.sphere_rule()?,
    )?);
    let f = equilibrium_field(&cfg.stats()?, &cfg.equilibrium()?, &g)?;
    let path = out.join("equilibrium.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["node", "v1", "v2", "v3", "f"])?;
    for (n, v) in g.velocities().iter().enumerate() {
        w.write_record([
            n.to_string(),
            v[0].to_string(),
            v[1].to_string(),
            v[2].to_string(),
            format!("{:.17e}", f.get(0, n)),
        ])?;
    }
    w.flush()?;
    Ok((path, conserved_moments(&f)))
}
