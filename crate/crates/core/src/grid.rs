//! Phase-space discretization: periodic cells on `[0,1]^k`, a symmetric
//! Cartesian velocity lattice truncated to a ball, and a quadrature rule on
//! the unit sphere.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::gauss_legendre;

/// Tolerance on the total sphere weight.
pub const SPHERE_WEIGHT_TOL: f64 = 1e-12;

/// A node of a sphere rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereNode {
    pub n: [f64; 3],
    pub weight: f64,
}

/// Quadrature rules on S².
#[derive(Clone, Debug, PartialEq)]
pub enum SphereRule {
    /// The 26-point Lebedev rule (degree 7). Its nodes are the 6 axis, 12
    /// face-diagonal and 8 body-diagonal lattice directions.
    Lebedev26,
    /// Gauss-Legendre in the polar cosine times the trapezoid rule in azimuth.
    ProductGauss { polar: usize, azimuth: usize },
    /// User supplied nodes; validated on construction.
    Custom(Vec<SphereNode>),
}

impl SphereRule {
    pub fn id(&self) -> String {
        match self {
            SphereRule::Lebedev26 => "lebedev26".to_string(),
            SphereRule::ProductGauss { polar, azimuth } => format!("gauss-{polar}x{azimuth}"),
            SphereRule::Custom(nodes) => format!("custom-{}", nodes.len()),
        }
    }

    pub fn nodes(&self) -> Vec<SphereNode> {
        match self {
            SphereRule::Lebedev26 => lebedev26(),
            SphereRule::ProductGauss { polar, azimuth } => product_gauss(*polar, *azimuth),
            SphereRule::Custom(nodes) => nodes.clone(),
        }
    }
}

impl fmt::Display for SphereRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for SphereRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("lebedev26") {
            return Ok(SphereRule::Lebedev26);
        }
        if let Some(rest) = s.strip_prefix("gauss-") {
            if let Some((a, b)) = rest.split_once('x') {
                let polar = a.parse().map_err(|_| invalid("sphere_rule", s))?;
                let azimuth = b.parse().map_err(|_| invalid("sphere_rule", s))?;
                if polar == 0 || azimuth == 0 {
                    return Err(invalid("sphere_rule", "empty product rule"));
                }
                return Ok(SphereRule::ProductGauss { polar, azimuth });
            }
        }
        Err(invalid("sphere_rule", format!("unknown rule id `{s}`")))
    }
}

fn lebedev26() -> Vec<SphereNode> {
    let mut out = Vec::with_capacity(26);
    let mut push = |m: [i32; 3], w: f64| {
        let norm = ((m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as f64).sqrt();
        out.push(SphereNode {
            n: [m[0] as f64 / norm, m[1] as f64 / norm, m[2] as f64 / norm],
            weight: 4.0 * PI * w,
        });
    };
    for m in lattice_directions() {
        let s = m[0].abs() + m[1].abs() + m[2].abs();
        let w = match s {
            1 => 1.0 / 21.0,
            2 => 4.0 / 105.0,
            _ => 9.0 / 280.0,
        };
        push(m, w);
    }
    out
}

/// All 26 nonzero vectors with entries in {-1, 0, 1}.
pub(crate) fn lattice_directions() -> Vec<[i32; 3]> {
    let mut out = Vec::with_capacity(26);
    for a in -1..=1 {
        for b in -1..=1 {
            for c in -1..=1 {
                if (a, b, c) != (0, 0, 0) {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

fn product_gauss(polar: usize, azimuth: usize) -> Vec<SphereNode> {
    let (xs, ws) = gauss_legendre(polar);
    let dphi = 2.0 * PI / azimuth as f64;
    let mut out = Vec::with_capacity(polar * azimuth);
    for (c, w) in xs.iter().zip(&ws) {
        let s = (1.0 - c * c).max(0.0).sqrt();
        for k in 0..azimuth {
            let phi = k as f64 * dphi;
            out.push(SphereNode {
                n: [s * phi.cos(), s * phi.sin(), *c],
                weight: w * dphi,
            });
        }
    }
    out
}

/// The sharp cutoff ψ_j applied to |v|² + |v_*|².
pub fn chi_j(v: &[f64; 3], v_star: &[f64; 3], j_level: f64) -> u8 {
    let r = dot(v, v) + dot(v_star, v_star);
    u8::from(r <= j_level * j_level)
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Immutable phase-space grid.
#[derive(Clone, Debug)]
pub struct PhaseGrid {
    k: usize,
    nx: usize,
    j_level: f64,
    nv: usize,
    half_width: f64,
    dv: f64,
    ball_radius: f64,
    rule: SphereRule,
    sphere_nodes: Vec<SphereNode>,
    velocities: Vec<[f64; 3]>,
    lattice: Vec<[i32; 3]>,
    cube_to_node: Vec<u32>,
}

pub(crate) const NO_NODE: u32 = u32::MAX;

impl PhaseGrid {
    /// Grid whose velocity lattice spans `[-j_level, j_level]^3`.
    pub fn build(k: usize, nx: usize, j_level: f64, nv: usize, rule: SphereRule) -> Result<Self> {
        Self::with_lattice(k, nx, j_level, nv, j_level, rule)
    }

    /// Grid with an explicit lattice half-width. Nodes are kept when
    /// `|v| <= min(j_level, half_width)`; the pair cutoff χ_j always uses
    /// `j_level`.
    pub fn with_lattice(
        k: usize,
        nx: usize,
        j_level: f64,
        nv: usize,
        half_width: f64,
        rule: SphereRule,
    ) -> Result<Self> {
        if !(1..=3).contains(&k) {
            return Err(invalid("k", format!("spatial dimension {k} not in 1..=3")));
        }
        if nx == 0 {
            return Err(invalid("nx", "need at least one cell per axis"));
        }
        if !(j_level > 0.0 && j_level.is_finite()) {
            return Err(invalid("j_level", format!("{j_level} must be positive")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(invalid("half_width", format!("{half_width} must be positive")));
        }
        if nv == 0 || nv % 2 == 1 {
            return Err(invalid("nv", format!("{nv} must be even and positive")));
        }
        if nv > 1024 {
            return Err(invalid("nv", "at most 1024 nodes per axis"));
        }
        let sphere_nodes = rule.nodes();
        let total: f64 = sphere_nodes.iter().map(|s| s.weight).sum();
        if ((total - 4.0 * PI) / (4.0 * PI)).abs() > SPHERE_WEIGHT_TOL {
            return Err(invalid(
                "sphere_rule",
                format!("weights sum to {total}, expected 4π"),
            ));
        }
        for s in &sphere_nodes {
            if (dot(&s.n, &s.n) - 1.0).abs() > 1e-12 || s.weight < 0.0 {
                return Err(invalid("sphere_rule", "nodes must be unit vectors with w >= 0"));
            }
        }

        let dv = 2.0 * half_width / nv as f64;
        let ball_radius = j_level.min(half_width);
        let r2 = ball_radius * ball_radius * (1.0 + 1e-12);

        // (sum of squared half-integer coordinates, lattice index)
        let mut keyed: Vec<(i64, [i32; 3])> = Vec::new();
        for a in 0..nv as i32 {
            for b in 0..nv as i32 {
                for c in 0..nv as i32 {
                    let h = [2 * a + 1 - nv as i32, 2 * b + 1 - nv as i32, 2 * c + 1 - nv as i32];
                    let s2: i64 = h.iter().map(|&x| (x as i64) * (x as i64)).sum();
                    let v2 = s2 as f64 * 0.25 * dv * dv;
                    if v2 <= r2 {
                        keyed.push((s2, [a, b, c]));
                    }
                }
            }
        }
        keyed.sort();
        let mut cube_to_node = vec![NO_NODE; nv * nv * nv];
        let mut velocities = Vec::with_capacity(keyed.len());
        let mut lattice = Vec::with_capacity(keyed.len());
        for (idx, (_, ijk)) in keyed.iter().enumerate() {
            let v = [
                (ijk[0] as f64 + 0.5) * dv - half_width,
                (ijk[1] as f64 + 0.5) * dv - half_width,
                (ijk[2] as f64 + 0.5) * dv - half_width,
            ];
            velocities.push(v);
            lattice.push(*ijk);
            cube_to_node[(ijk[0] as usize * nv + ijk[1] as usize) * nv + ijk[2] as usize] = idx as u32;
        }
        if velocities.is_empty() {
            return Err(invalid("nv", "no velocity node inside the ball"));
        }
        Ok(Self {
            k,
            nx,
            j_level,
            nv,
            half_width,
            dv,
            ball_radius,
            rule,
            sphere_nodes,
            velocities,
            lattice,
            cube_to_node,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn j_level(&self) -> f64 {
        self.j_level
    }
    pub fn nv(&self) -> usize {
        self.nv
    }
    pub fn dv(&self) -> f64 {
        self.dv
    }
    pub fn dx(&self) -> f64 {
        1.0 / self.nx as f64
    }
    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    pub fn ball_radius(&self) -> f64 {
        self.ball_radius
    }
    pub fn sphere_rule(&self) -> &SphereRule {
        &self.rule
    }
    pub fn sphere_nodes(&self) -> &[SphereNode] {
        &self.sphere_nodes
    }

    /// Number of spatial cells, `nx^k`.
    pub fn num_cells(&self) -> usize {
        self.nx.pow(self.k as u32)
    }

    /// Number of velocity nodes inside the ball.
    pub fn num_nodes(&self) -> usize {
        self.velocities.len()
    }

    /// Velocity nodes, ordered by increasing |v|.
    pub fn velocities(&self) -> &[[f64; 3]] {
        &self.velocities
    }

    /// Lattice index (0..nv per axis) of every node.
    pub fn lattice_indices(&self) -> &[[i32; 3]] {
        &self.lattice
    }

    /// Node at a lattice position, if it lies inside the ball.
    pub fn node_at(&self, ijk: [i32; 3]) -> Option<usize> {
        let nv = self.nv as i32;
        if ijk.iter().any(|&c| c < 0 || c >= nv) {
            return None;
        }
        let id = self.cube_to_node
            [(ijk[0] as usize * self.nv + ijk[1] as usize) * self.nv + ijk[2] as usize];
        (id != NO_NODE).then_some(id as usize)
    }

    /// Index of the node `-v`.
    pub fn mirror(&self, node: usize) -> usize {
        let nv = self.nv as i32;
        let m = self.lattice[node].map(|c| nv - 1 - c);
        self.node_at(m).expect("ball is symmetric")
    }

    /// Velocity quadrature weight (midpoint rule).
    pub fn velocity_weight(&self) -> f64 {
        self.dv * self.dv * self.dv
    }

    /// Spatial quadrature weight of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.k as i32)
    }

    /// Multi-index of a cell (first axis slowest).
    pub fn cell_coords(&self, cell: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rem = cell;
        for d in (0..self.k).rev() {
            out[d] = rem % self.nx;
            rem /= self.nx;
        }
        out
    }

    pub fn cell_index(&self, coords: [usize; 3]) -> usize {
        (0..self.k).fold(0, |acc, d| acc * self.nx + coords[d] % self.nx)
    }

    /// Cell centre in `[0,1]^k`; unused axes are zero.
    pub fn cell_center(&self, cell: usize) -> [f64; 3] {
        let c = self.cell_coords(cell);
        let dx = self.dx();
        let mut x = [0.0; 3];
        for d in 0..self.k {
            x[d] = (c[d] as f64 + 0.5) * dx;
        }
        x
    }

    /// Text header identifying the grid in every output file.
    pub fn header(&self) -> GridHeader {
        GridHeader {
            k: self.k,
            nx: self.nx,
            nv: self.nv,
            j_level: self.j_level,
            half_width: self.half_width,
            sphere_rule: self.rule.id(),
        }
    }

    /// True when both grids discretize the same phase space.
    pub fn same_as(&self, other: &PhaseGrid) -> bool {
        self.k == other.k
            && self.nx == other.nx
            && self.nv == other.nv
            && self.j_level == other.j_level
            && self.half_width == other.half_width
            && self.rule == other.rule
    }
}

/// Serializable grid description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub k: usize,
    pub nx: usize,
    pub nv: usize,
    pub j_level: f64,
    pub half_width: f64,
    pub sphere_rule: String,
}

impl GridHeader {
    pub fn to_line(&self) -> String {
        format!(
            "k={} nx={} nv={} j_level={} half_width={} sphere_rule={}",
            self.k, self.nx, self.nv, self.j_level, self.half_width, self.sphere_rule
        )
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let mut k = None;
        let mut nx = None;
        let mut nv = None;
        let mut j = None;
        let mut hw = None;
        let mut rule = None;
        let bad = |what: &str| Error::Config(format!("grid header: bad field `{what}`"));
        for tok in line.split_whitespace() {
            let (key, val) = tok.split_once('=').ok_or_else(|| bad(tok))?;
            match key {
                "k" => k = Some(val.parse().map_err(|_| bad(tok))?),
                "nx" => nx = Some(val.parse().map_err(|_| bad(tok))?),
                "nv" => nv = Some(val.parse().map_err(|_| bad(tok))?),
                "j_level" => j = Some(val.parse().map_err(|_| bad(tok))?),
                "half_width" => hw = Some(val.parse().map_err(|_| bad(tok))?),
                "sphere_rule" => rule = Some(val.to_string()),
                _ => {}
            }
        }
        Ok(GridHeader {
            k: k.ok_or_else(|| bad("k"))?,
            nx: nx.ok_or_else(|| bad("nx"))?,
            nv: nv.ok_or_else(|| bad("nv"))?,
            j_level: j.ok_or_else(|| bad("j_level"))?,
            half_width: hw.ok_or_else(|| bad("half_width"))?,
            sphere_rule: rule.ok_or_else(|| bad("sphere_rule"))?,
        })
    }

    /// Rebuilds the grid. Custom sphere rules cannot be recovered from text.
    pub fn build(&self) -> Result<PhaseGrid> {
        let rule: SphereRule = self.sphere_rule.parse()?;
        PhaseGrid::with_lattice(self.k, self.nx, self.j_level, self.nv, self.half_width, rule)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_nv() {
        assert!(PhaseGrid::build(1, 4, 1.0, 3, SphereRule::Lebedev26).is_err());
    }

    #[test]
    fn rejects_bad_custom_rule() {
        let rule = SphereRule::Custom(vec![SphereNode {
            n: [0.0, 0.0, 1.0],
            weight: 4.0 * PI * (1.0 + 1e-9),
        }]);
        assert!(PhaseGrid::build(1, 4, 1.0, 2, rule).is_err());
        let ok = SphereRule::Custom(vec![SphereNode { n: [0.0, 0.0, 1.0], weight: 4.0 * PI }]);
        assert!(PhaseGrid::build(1, 4, 1.0, 2, ok).is_ok());
    }

    #[test]
    fn smallest_grid_inside_ball() {
        let g = PhaseGrid::build(1, 1, 1.0, 2, SphereRule::Lebedev26).unwrap();
        // nodes at (±0.5, ±0.5, ±0.5), |v| = 0.866
        assert_eq!(g.num_nodes(), 8);
        assert!(g.velocities().iter().all(|v| dot(v, v).sqrt() <= 1.0));
    }

    #[test]
    fn sphere_weights_sum_to_four_pi() {
        for rule in [
            SphereRule::Lebedev26,
            SphereRule::ProductGauss { polar: 2, azimuth: 4 },
            SphereRule::ProductGauss { polar: 9, azimuth: 18 },
        ] {
            let total: f64 = rule.nodes().iter().map(|s| s.weight).sum();
            assert!(((total - 4.0 * PI) / (4.0 * PI)).abs() <= SPHERE_WEIGHT_TOL, "{rule}");
        }
    }

    #[test]
    fn lebedev26_is_degree_seven() {
        // ∫ n_z^6 dn = 4π/7, ∫ n_x^2 n_y^2 n_z^2 dn = 4π/105
        let nodes = lebedev26();
        let z6: f64 = nodes.iter().map(|s| s.weight * s.n[2].powi(6)).sum();
        let xyz: f64 = nodes
            .iter()
            .map(|s| s.weight * (s.n[0] * s.n[1] * s.n[2]).powi(2))
            .sum();
        assert!((z6 - 4.0 * PI / 7.0).abs() < 1e-14);
        assert!((xyz - 4.0 * PI / 105.0).abs() < 1e-14);
    }

    #[test]
    fn chi_examples() {
        assert_eq!(chi_j(&[0.0; 3], &[0.0; 3], 1.0), 1);
        assert_eq!(chi_j(&[1.0, 0.0, 0.0], &[0.0, 0.1, 0.0], 1.0), 0);
        assert_eq!(chi_j(&[1.0, 0.0, 0.0], &[0.0, 2.0, 0.0], 3.0), 1);
    }

    #[test]
    fn header_round_trip() {
        let g = PhaseGrid::build(2, 8, 6.0, 16, SphereRule::ProductGauss { polar: 3, azimuth: 6 })
            .unwrap();
        let h = GridHeader::parse_line(&g.header().to_line()).unwrap();
        assert_eq!(h, g.header());
        assert!(h.build().unwrap().same_as(&g));
    }

    #[test]
    fn cell_indexing() {
        let g = PhaseGrid::build(3, 4, 1.0, 2, SphereRule::Lebedev26).unwrap();
        for c in 0..g.num_cells() {
            assert_eq!(g.cell_index(g.cell_coords(c)), c);
        }
    }
}
