//! TOML run configuration.
//!
//! Required sections: `[grid]`, `[kernel]`, `[statistics]`, `[initial]`.
//! Optional sections with defaults: `[solver]`, `[output]`, `[run]`,
//! `[study]`. Unknown keys are rejected. Errors name the section and field.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PhaseGrid, SphereRule};
use crate::kernel::{make_maxwellian_type_kernel, make_soft_kernel, KernelSpec};
use crate::solver::{InitialData, SolverConfig, Splitting};
use crate::statistics::{EquilibriumSpec, StatisticsParam};

pub const SCHEMA_VERSION: u32 = 1;

fn config_err(section: &str, field: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("[{section}] {field}: {reason}"))
}

/// Maps a library error raised while building `[section]` to a config error.
fn in_section(section: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::InvalidParameter { name, reason } => config_err(section, name, reason),
        Error::Config(m) => Error::Config(format!("[{section}] {m}")),
        other => other,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_k")]
    pub k: usize,
    pub nx: usize,
    pub j_level: f64,
    pub nv: usize,
    /// Half width of the velocity lattice; defaults to `j_level`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default = "default_rule")]
    pub sphere_rule: String,
}

fn default_k() -> usize {
    1
}

fn default_rule() -> String {
    "lebedev26".into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelModel {
    Band,
    Soft,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub model: KernelModel,
    #[serde(default = "one")]
    pub b0: f64,
    #[serde(default = "tenth")]
    pub gamma: f64,
    #[serde(default = "tenth")]
    pub gamma_prime: f64,
    /// Soft model: `B = c·|u|^(−3−eta)` on the band.
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub eta: f64,
}

fn one() -> f64 {
    1.0
}

fn tenth() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatisticsSection {
    pub alpha: f64,
    /// Use `F_j` with `j = [grid] j_level` instead of `F_α`.
    #[serde(default = "yes")]
    pub regularized: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Equilibrium,
    EquilibriumWithBump,
    NearSaturation,
    Tabulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "one")]
    pub temperature: f64,
    #[serde(default)]
    pub bulk_velocity: [f64; 3],
    /// Relative amplitude of the spatial Gaussian bump.
    #[serde(default = "bump_amplitude")]
    pub bump_amplitude: f64,
    #[serde(default = "bump_center")]
    pub bump_center: [f64; 3],
    #[serde(default = "tenth")]
    pub bump_width: f64,
    /// Near-saturation data: the equilibrium, raised to `1/α` on `|v| ≤ radius`.
    #[serde(default = "saturation_radius")]
    pub saturation_radius: f64,
    /// Tabulated data: CSV with columns `cell,v1,v2,v3,f`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

fn bump_amplitude() -> f64 {
    0.2
}

fn bump_center() -> [f64; 3] {
    [0.5; 3]
}

fn saturation_radius() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "dt")]
    pub dt: f64,
    #[serde(default = "one")]
    pub t_end: f64,
    #[serde(default = "picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "picard_max")]
    pub picard_max: u32,
    #[serde(default)]
    pub splitting: Splitting,
    #[serde(default)]
    pub homogeneous: bool,
    #[serde(default = "tail_lambdas")]
    pub tail_lambdas: Vec<f64>,
}

fn dt() -> f64 {
    0.01
}

fn picard_tol() -> f64 {
    1e-8
}

fn picard_max() -> u32 {
    2
}

fn tail_lambdas() -> Vec<f64> {
    vec![2.0, 3.0, 4.0]
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            dt: dt(),
            t_end: 1.0,
            picard_tol: picard_tol(),
            picard_max: picard_max(),
            splitting: Splitting::Strang,
            homogeneous: false,
            tail_lambdas: tail_lambdas(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "out_dir")]
    pub dir: PathBuf,
    #[serde(default = "cadence")]
    pub cadence: u64,
    /// Write a checkpoint every this many steps; 0 writes only the final one.
    #[serde(default)]
    pub checkpoint_every: u64,
}

fn out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn cadence() -> u64 {
    1
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: out_dir(),
            cadence: 1,
            checkpoint_every: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Worker threads; 0 uses all cores.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    #[serde(default = "j_levels")]
    pub j_levels: Vec<f64>,
    #[serde(default = "sample_times")]
    pub sample_times: Vec<f64>,
    #[serde(default = "epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "alphas")]
    pub alphas: Vec<f64>,
}

fn j_levels() -> Vec<f64> {
    vec![4.0, 8.0, 16.0]
}

fn sample_times() -> Vec<f64> {
    vec![0.5]
}

fn epsilons() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4]
}

fn alphas() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0]
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            j_levels: j_levels(),
            sample_times: sample_times(),
            epsilons: epsilons(),
            alphas: alphas(),
        }
    }
}

/// Raw file layout; required sections are optional here so that a missing
/// one is reported by name.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: Option<u32>,
    scenario: Option<String>,
    grid: Option<GridSection>,
    kernel: Option<KernelSection>,
    statistics: Option<StatisticsSection>,
    initial: Option<InitialSection>,
    #[serde(default)]
    solver: SolverSection,
    #[serde(default)]
    output: OutputSection,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    study: StudySection,
}

/// A complete, validated run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema_version: u32,
    pub scenario: String,
    pub grid: GridSection,
    pub kernel: KernelSection,
    pub statistics: StatisticsSection,
    pub initial: InitialSection,
    pub solver: SolverSection,
    pub output: OutputSection,
    pub run: RunSection,
    pub study: StudySection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        let version = raw
            .schema_version
            .ok_or_else(|| Error::Config("missing key `schema_version`".into()))?;
        if version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {version} is not supported (expected {SCHEMA_VERSION})"
            )));
        }
        let missing = |name: &str| Error::Config(format!("missing section [{name}]"));
        let cfg = Self {
            schema_version: version,
            scenario: raw.scenario.unwrap_or_else(|| "run".into()),
            grid: raw.grid.ok_or_else(|| missing("grid"))?,
            kernel: raw.kernel.ok_or_else(|| missing("kernel"))?,
            statistics: raw.statistics.ok_or_else(|| missing("statistics"))?,
            initial: raw.initial.ok_or_else(|| missing("initial"))?,
            solver: raw.solver,
            output: raw.output,
            run: raw.run,
            study: raw.study,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read `{}`: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(p) = &cfg.initial.path {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.initial.path = Some(dir.join(p));
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks every section without building the collision tables.
    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.kernel()?;
        self.stats()?;
        self.solver_config()?;
        let i = &self.initial;
        EquilibriumSpec::new(i.mu, i.temperature, i.bulk_velocity).map_err(in_section("initial"))?;
        if !(i.bump_width > 0.0) {
            return Err(config_err("initial", "bump_width", "must be positive"));
        }
        if !(i.bump_amplitude > -1.0 && i.bump_amplitude.is_finite()) {
            return Err(config_err("initial", "bump_amplitude", "must exceed -1"));
        }
        if !(i.saturation_radius > 0.0) {
            return Err(config_err("initial", "saturation_radius", "must be positive"));
        }
        if i.kind == InitialKind::Tabulated && i.path.is_none() {
            return Err(config_err("initial", "path", "required for tabulated data"));
        }
        let s = &self.study;
        if s.j_levels.iter().any(|&j| !(j > self.statistics.alpha && j.is_finite())) {
            return Err(config_err("study", "j_levels", "levels must exceed alpha"));
        }
        if s.epsilons.iter().any(|&e| !(e >= 0.0)) {
            return Err(config_err("study", "epsilons", "must be nonnegative"));
        }
        if s.alphas.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return Err(config_err("study", "alphas", "must lie in (0, 1]"));
        }
        if s.sample_times.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
            return Err(config_err("study", "sample_times", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn sphere_rule(&self) -> Result<SphereRule> {
        self.grid.sphere_rule.parse().map_err(in_section("grid"))
    }

    /// Grid at the configured truncation level.
    pub fn grid(&self) -> Result<Arc<PhaseGrid>> {
        self.grid_at(self.grid.j_level)
    }

    /// Grid on the configured lattice with truncation level `j`.
    pub fn grid_at(&self, j: f64) -> Result<Arc<PhaseGrid>> {
        let g = &self.grid;
        let hw = g.half_width.unwrap_or(g.j_level);
        PhaseGrid::with_lattice(g.k, g.nx, j, g.nv, hw, self.sphere_rule()?)
            .map(Arc::new)
            .map_err(in_section("grid"))
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        let k = &self.kernel;
        match k.model {
            KernelModel::Band => make_maxwellian_type_kernel(k.b0, k.gamma, k.gamma_prime),
            KernelModel::Soft => make_soft_kernel(k.c, k.eta, k.gamma, k.gamma_prime),
            KernelModel::Zero => Ok(KernelSpec::zero()),
        }
        .map_err(in_section("kernel"))
    }

    /// Statistics at the configured truncation level.
    pub fn stats(&self) -> Result<StatisticsParam> {
        self.stats_at(self.grid.j_level, self.statistics.alpha)
    }

    pub fn stats_at(&self, j: f64, alpha: f64) -> Result<StatisticsParam> {
        let j = self.statistics.regularized.then_some(j);
        StatisticsParam::new(alpha, j).map_err(in_section("statistics"))
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let s = &self.solver;
        let cfg = SolverConfig {
            dt: s.dt,
            t_end: s.t_end,
            picard_tol: s.picard_tol,
            picard_max: s.picard_max,
            splitting: s.splitting,
            homogeneous: s.homogeneous,
            cadence: self.output.cadence,
            tail_lambdas: s.tail_lambdas.clone(),
        };
        cfg.validate().map_err(|e| match e {
            Error::InvalidParameter { name: "cadence", reason } => config_err("output", "cadence", reason),
            other => in_section("solver")(other),
        })?;
        Ok(cfg)
    }

    pub fn equilibrium(&self) -> Result<EquilibriumSpec> {
        let i = &self.initial;
        EquilibriumSpec::new(i.mu, i.temperature, i.bulk_velocity).map_err(in_section("initial"))
    }

    /// Initial datum for truncation level `j` and exclusion parameter `alpha`.
    pub fn initial_data(&self, g: &PhaseGrid, j: f64, alpha: f64) -> Result<InitialData> {
        let i = self.initial.clone();
        let stats = self.stats_at(j, alpha)?;
        let eq = self.equilibrium()?;
        let k = g.k();
        let data = match i.kind {
            InitialKind::Equilibrium => InitialData::from_fn(alpha, j, move |_, v| {
                eq.occupation(&stats, v).unwrap_or(0.0)
            }),
            InitialKind::EquilibriumWithBump => {
                let ceiling = 1.0 / alpha;
                InitialData::from_fn(alpha, j, move |x, v| {
                    let r2: f64 = (0..k)
                        .map(|d| {
                            let dx = (x[d] - i.bump_center[d]).rem_euclid(1.0);
                            let dx = dx.min(1.0 - dx);
                            dx * dx
                        })
                        .sum();
                    let bump = 1.0 + i.bump_amplitude * (-0.5 * r2 / (i.bump_width * i.bump_width)).exp();
                    (eq.occupation(&stats, v).unwrap_or(0.0) * bump).clamp(0.0, ceiling)
                })
            }
            InitialKind::NearSaturation => {
                let r2 = i.saturation_radius * i.saturation_radius;
                InitialData::from_fn(alpha, j, move |_, v| {
                    if v.iter().map(|c| c * c).sum::<f64>() <= r2 {
                        1.0 / alpha
                    } else {
                        eq.occupation(&stats, v).unwrap_or(0.0)
                    }
                })
            }
            InitialKind::Tabulated => {
                let path = i.path.as_ref().expect("validated");
                let samples = read_tabulated(path, g)?;
                InitialData::from_samples(alpha, j, samples)
            }
        };
        data.map_err(in_section("initial"))
    }
}

/// Reads `cell,v1,v2,v3,f` rows onto the nodes of `g`; absent nodes are 0.
pub fn read_tabulated(path: &Path, g: &PhaseGrid) -> Result<Vec<f64>> {
    let err = |m: String| config_err("initial", "path", format!("{}: {m}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let mut out = vec![0.0; g.num_cells() * g.num_nodes()];
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| err(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            row.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| err(format!("row {}: bad column {}", line + 1, i + 1)))
        };
        let cell = num(0)?;
        if cell < 0.0 || cell.fract() != 0.0 || cell as usize >= g.num_cells() {
            return Err(err(format!("row {}: cell {cell} out of range", line + 1)));
        }
        let v = [num(1)?, num(2)?, num(3)?];
        let ijk = [0, 1, 2].map(|d| ((v[d] + g.half_width()) / g.dv() - 0.5).round() as i32);
        let node = g
            .node_at(ijk)
            .filter(|&n| (0..3).all(|d| (g.velocities()[n][d] - v[d]).abs() <= 1e-9 * g.dv().max(1.0)))
            .ok_or_else(|| err(format!("row {}: velocity {v:?} is not a grid node", line + 1)))?;
        out[cell as usize * g.num_nodes() + node] = num(4)?;
    }
    Ok(out)
}
