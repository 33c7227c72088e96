//! Moments, mass-density monitors, the Bony functional and tails.
//!
//! All integrals use the weights `dx^k · dv³`. Because the spatial shift
//! `f ↦ f♯` is a permutation of each velocity slice up to interpolation,
//! `sup_x f♯(t, ·, v) = sup_x f(t, ·, v)` on the grid; the monitors below are
//! evaluated on `f` directly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::collision::CollisionOperator;
use crate::error::{Error, Result};
use crate::field::DistributionField;
use crate::grid::PhaseGrid;
use crate::kernel::KernelSpec;
use crate::statistics::StatisticsParam;

/// Mass, momentum and energy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mass: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
}

impl Moments {
    pub fn to_array(&self) -> [f64; 5] {
        [self.mass, self.momentum[0], self.momentum[1], self.momentum[2], self.energy]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            mass: a[0],
            momentum: [a[1], a[2], a[3]],
            energy: a[4],
        }
    }

    /// `(mass, momentum, energy)` drifts relative to `reference`. Momentum is
    /// measured against `mass · sqrt(energy / mass)`, the natural momentum
    /// scale, because the reference momentum may vanish.
    pub fn drift_from(&self, reference: &Moments) -> (f64, f64, f64) {
        let rel = |a: f64, b: f64| if b == 0.0 { (a - b).abs() } else { ((a - b) / b).abs() };
        let scale = if reference.mass > 0.0 && reference.energy > 0.0 {
            (reference.mass * reference.energy).sqrt()
        } else {
            1.0
        };
        let dp = (0..3)
            .map(|d| (self.momentum[d] - reference.momentum[d]).abs())
            .fold(0.0, f64::max)
            / scale;
        (rel(self.mass, reference.mass), dp, rel(self.energy, reference.energy))
    }
}

/// Quadrature moments of `f`.
pub fn conserved_moments(f: &DistributionField) -> Moments {
    let g = f.grid();
    let vel = g.velocities();
    let mut acc = [0.0; 5];
    for cell in 0..g.num_cells() {
        let mut c = [0.0; 5];
        for (y, v) in f.cell(cell).iter().zip(vel) {
            c[0] += y;
            c[1] += y * v[0];
            c[2] += y * v[1];
            c[3] += y * v[2];
            c[4] += y * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        }
        for k in 0..5 {
            acc[k] += c[k];
        }
    }
    let w = g.cell_volume() * g.velocity_weight();
    Moments::from_array(acc.map(|x| x * w))
}

/// `max_x f(·, x, v)` at every node.
pub fn sup_over_x(f: &DistributionField) -> Vec<f64> {
    let g = f.grid();
    let mut out = vec![0.0f64; g.num_nodes()];
    for cell in 0..g.num_cells() {
        for (m, &y) in out.iter_mut().zip(f.cell(cell)) {
            *m = m.max(y);
        }
    }
    out
}

/// `∫ history(v) dv` for a running per-node maximum.
pub fn sup_mass_density(history: &RunningMax) -> f64 {
    history.value()
}

/// Per-node maximum over all snapshots seen so far.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningMax {
    max: Vec<f64>,
    weight: f64,
}

impl RunningMax {
    pub fn new(grid: &PhaseGrid) -> Self {
        Self {
            max: vec![0.0; grid.num_nodes()],
            weight: grid.velocity_weight(),
        }
    }

    pub fn from_values(grid: &PhaseGrid, max: Vec<f64>) -> Result<Self> {
        if max.len() != grid.num_nodes() {
            return Err(Error::GridMismatch("running maximum has the wrong length".into()));
        }
        Ok(Self {
            max,
            weight: grid.velocity_weight(),
        })
    }

    pub fn update(&mut self, f: &DistributionField) {
        for (m, s) in self.max.iter_mut().zip(sup_over_x(f)) {
            *m = m.max(s);
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.max
    }

    pub fn value(&self) -> f64 {
        self.max.iter().sum::<f64>() * self.weight
    }
}

/// Instantaneous Bony integral
/// `∫ n₁² ((v − v_*)·n)² B χ_j f f_* F_j(f') F_j(f'_*)` over `x, v, v_*, n`.
///
/// Proven bounds exist for `k = 1` only; other dimensions are reported as
/// uncertified by the run diagnostics.
pub fn bony_functional(f: &DistributionField, ks: &KernelSpec, s: &StatisticsParam) -> Result<f64> {
    f.check_invariants(0)?;
    let op = CollisionOperator::new(f.grid_arc().clone(), ks.clone(), *s);
    Ok(bony_with(&op, f))
}

/// As [`bony_functional`] with a prepared operator.
pub fn bony_with(op: &CollisionOperator, f: &DistributionField) -> f64 {
    use rayon::prelude::*;
    let g = f.grid();
    let per_cell: Vec<f64> = (0..g.num_cells())
        .into_par_iter()
        .map(|c| op.bony_cell(f.cell(c)))
        .collect();
    per_cell.iter().sum::<f64>() * g.cell_volume()
}

/// `∫_{|v| > λ} sup_x f dv` for each `λ`.
pub fn tail_mass(f: &DistributionField, lambdas: &[f64]) -> Vec<(f64, f64)> {
    let g = f.grid();
    let sup = sup_over_x(f);
    let w = g.velocity_weight();
    lambdas
        .iter()
        .map(|&lam| {
            let m: f64 = g
                .velocities()
                .iter()
                .zip(&sup)
                .filter(|(v, _)| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() > lam)
                .map(|(_, s)| s)
                .sum();
            (lam, m * w)
        })
        .collect()
}

/// `Σ dx^k dv³ |f − g|`.
pub fn l1_distance(f: &DistributionField, g: &DistributionField) -> Result<f64> {
    f.ensure_same_grid(g)?;
    let grid = f.grid();
    let s: f64 = f.data().iter().zip(g.data()).map(|(a, b)| (a - b).abs()).sum();
    Ok(s * grid.cell_volume() * grid.velocity_weight())
}

/// `max f` over nodes with `|v| < radius` (all cells).
pub fn max_below_speed(f: &DistributionField, radius: f64) -> f64 {
    let g = f.grid();
    let sup = sup_over_x(f);
    g.velocities()
        .iter()
        .zip(&sup)
        .filter(|(v, _)| v[0] * v[0] + v[1] * v[1] + v[2] * v[2] < radius * radius)
        .map(|(_, &s)| s)
        .fold(0.0, f64::max)
}

/// One row of the diagnostics time series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub t: f64,
    pub mass: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
    pub mass_drift: f64,
    pub momentum_drift: f64,
    pub energy_drift: f64,
    pub sup_mass_density: f64,
    pub bony_rate: f64,
    pub bony_cumulative: f64,
    pub tail_mass: Vec<(f64, f64)>,
    pub min_f: f64,
    pub max_f: f64,
    pub layer_gap: f64,
    pub projection_residual: f64,
    pub picard_iterations: u64,
    pub picard_unconverged: u64,
}

/// Fixed column order of the CSV output; tail columns follow as `tail_<λ>`.
pub const CSV_COLUMNS: [&str; 19] = [
    "step",
    "t",
    "mass",
    "momentum_1",
    "momentum_2",
    "momentum_3",
    "energy",
    "mass_drift",
    "momentum_drift",
    "energy_drift",
    "sup_mass_density",
    "bony_rate",
    "bony_cumulative",
    "min_f",
    "max_f",
    "layer_gap",
    "projection_residual",
    "picard_iterations",
    "picard_unconverged",
];

impl DiagnosticsRecord {
    fn csv_fields(&self) -> Vec<String> {
        let mut v = vec![self.step.to_string()];
        let nums = [
            self.t,
            self.mass,
            self.momentum[0],
            self.momentum[1],
            self.momentum[2],
            self.energy,
            self.mass_drift,
            self.momentum_drift,
            self.energy_drift,
            self.sup_mass_density,
            self.bony_rate,
            self.bony_cumulative,
            self.min_f,
            self.max_f,
            self.layer_gap,
            self.projection_residual,
        ];
        v.extend(nums.iter().map(|x| format!("{x:.17e}")));
        v.push(self.picard_iterations.to_string());
        v.push(self.picard_unconverged.to_string());
        v.extend(self.tail_mass.iter().map(|(_, m)| format!("{m:.17e}")));
        v
    }
}

/// Receives diagnostics records as they are produced.
pub trait DiagnosticsSink {
    fn record(&mut self, rec: &DiagnosticsRecord) -> Result<()>;
}

impl DiagnosticsSink for Vec<DiagnosticsRecord> {
    fn record(&mut self, rec: &DiagnosticsRecord) -> Result<()> {
        self.push(rec.clone());
        Ok(())
    }
}

/// CSV writer with `#` comment lines carrying the grid header.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
    header_written: bool,
    preamble: Vec<String>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut inner: W, grid: &PhaseGrid, extra: &[String]) -> Result<Self> {
        writeln!(inner, "# grid: {}", grid.header().to_line())?;
        for line in extra {
            writeln!(inner, "# {line}")?;
        }
        Ok(Self {
            writer: csv::Writer::from_writer(inner),
            header_written: false,
            preamble: Vec::new(),
        })
    }

    pub fn flush(&mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

impl<W: Write> DiagnosticsSink for CsvSink<W> {
    fn record(&mut self, rec: &DiagnosticsRecord) -> Result<()> {
        if !self.header_written {
            let mut cols: Vec<String> = CSV_COLUMNS.iter().map(|s| s.to_string()).collect();
            cols.extend(rec.tail_mass.iter().map(|(l, _)| format!("tail_{l}")));
            cols.append(&mut self.preamble);
            self.writer.write_record(&cols)?;
            self.header_written = true;
        }
        self.writer.write_record(rec.csv_fields())?;
        self.writer.flush()?;
        Ok(())
    }
}

/// Reads a diagnostics CSV back, skipping `#` lines.
pub fn read_csv(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let headers = rdr.headers()?.clone();
    let lambdas: Vec<f64> = headers
        .iter()
        .filter_map(|h| h.strip_prefix("tail_").and_then(|x| x.parse().ok()))
        .collect();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let num = |i: usize| -> Result<f64> {
            row.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Config(format!("diagnostics csv: bad value in column {i}")))
        };
        let int = |i: usize| -> Result<u64> {
            row.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Config(format!("diagnostics csv: bad value in column {i}")))
        };
        let n = CSV_COLUMNS.len();
        out.push(DiagnosticsRecord {
            step: int(0)?,
            t: num(1)?,
            mass: num(2)?,
            momentum: [num(3)?, num(4)?, num(5)?],
            energy: num(6)?,
            mass_drift: num(7)?,
            momentum_drift: num(8)?,
            energy_drift: num(9)?,
            sup_mass_density: num(10)?,
            bony_rate: num(11)?,
            bony_cumulative: num(12)?,
            min_f: num(13)?,
            max_f: num(14)?,
            layer_gap: num(15)?,
            projection_residual: num(16)?,
            picard_iterations: int(17)?,
            picard_unconverged: int(18)?,
            tail_mass: lambdas
                .iter()
                .enumerate()
                .map(|(i, &l)| Ok((l, num(n + i)?)))
                .collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SphereRule;
    use std::sync::Arc;

    fn grid() -> Arc<PhaseGrid> {
        Arc::new(PhaseGrid::build(1, 4, 3.0, 8, SphereRule::Lebedev26).unwrap())
    }

    #[test]
    fn moments_of_constant_field() {
        let g = grid();
        let f = DistributionField::constant(g.clone(), 0.5, 0.7).unwrap();
        let m = conserved_moments(&f);
        let vol = g.num_nodes() as f64 * g.velocity_weight();
        assert!((m.mass - 0.7 * vol).abs() < 1e-12);
        assert!(m.momentum.iter().all(|p| p.abs() < 1e-12));
        let z = conserved_moments(&DistributionField::zeros(g, 0.5));
        assert_eq!(z, Moments::default());
    }

    #[test]
    fn tails_and_distances() {
        let g = grid();
        let f = DistributionField::constant(g.clone(), 0.5, 0.4).unwrap();
        assert_eq!(tail_mass(&f, &[3.0])[0].1, 0.0);
        let shell = g
            .velocities()
            .iter()
            .filter(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() > 1.0)
            .count() as f64;
        assert!((tail_mass(&f, &[1.0])[0].1 - 0.4 * shell * g.velocity_weight()).abs() < 1e-12);
        assert_eq!(l1_distance(&f, &f).unwrap(), 0.0);
        let z = DistributionField::zeros(g, 0.5);
        let (l1, mass) = (l1_distance(&f, &z).unwrap(), conserved_moments(&f).mass);
        assert!((l1 - mass).abs() < 1e-12 * mass, "{l1} vs {mass}");
    }

    #[test]
    fn running_max_is_monotone() {
        let g = grid();
        let mut rm = RunningMax::new(&g);
        let f = DistributionField::constant(g.clone(), 0.5, 0.4).unwrap();
        rm.update(&f);
        let first = sup_mass_density(&rm);
        assert!((first - 0.4 * g.num_nodes() as f64 * g.velocity_weight()).abs() < 1e-12);
        rm.update(&DistributionField::constant(g, 0.5, 0.1).unwrap());
        assert_eq!(sup_mass_density(&rm), first);
    }

    #[test]
    fn csv_round_trip() {
        let g = grid();
        let rec = DiagnosticsRecord {
            step: 3,
            t: 0.03,
            mass: 1.5,
            momentum: [0.1, -0.2, 0.0],
            energy: 4.0,
            mass_drift: 1e-16,
            momentum_drift: 0.0,
            energy_drift: 2e-15,
            sup_mass_density: 2.0,
            bony_rate: 0.3,
            bony_cumulative: 0.009,
            tail_mass: vec![(2.0, 0.25), (3.0, 0.125)],
            min_f: 0.0,
            max_f: 1.2,
            layer_gap: 0.8,
            projection_residual: 1e-9,
            picard_iterations: 64,
            picard_unconverged: 0,
        };
        let mut buf = Vec::new();
        {
            let mut sink = CsvSink::new(&mut buf, &g, &["alpha=0.5".into()]).unwrap();
            sink.record(&rec).unwrap();
            sink.flush().unwrap();
        }
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# grid: k=1 nx=4 nv=8"));
        assert_eq!(read_csv(&text).unwrap(), vec![rec]);
    }
}
