//! Fast path for sphere rules whose nodes are lattice directions.
//!
//! For a direction `m ∈ {−1,0,1}³` with `s = |m|²` and lattice difference
//! `g = i_a − i_b`, write `q = g·m = s·t + r`. Then
//! `v' = (i_a − t m) − (r/s) m` and `v'_* = (i_b + (t+1) m) − ((s−r)/s) m`,
//! so every post-collision point is a lattice point shifted by `k/s · m`,
//! `k ∈ 1..s`. Those points are tabulated once per cell ("slots") and the
//! pair loop reduces to lookups. Slot 0 is the empty state; slots `1..=N`
//! are the nodes.

use crate::grid::{chi_j, PhaseGrid};
use crate::kernel::KernelSpec;

use super::reconstruct::{inside_ball, NodeTables, Stencil};

const UNSET: u32 = u32::MAX;
pub(crate) const EMPTY_SLOT: u32 = 0;

/// A representative direction; `n` and `−n` are folded together.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Direction {
    pub m: [i32; 3],
    pub s: i32,
    /// `w(n) + w(−n)`.
    pub weight: f64,
    /// First family index for this direction (`s − 1` families).
    family: usize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Pair {
    pub a: u32,
    pub b: u32,
    /// Speed factor `B1(|v_a − v_b|)`.
    pub speed: f64,
}

/// Entry table: per pair a bitmask of admitted directions, then one
/// `(slot', slot'_*)` per set bit in ascending direction order.
#[derive(Debug)]
struct Stored {
    masks: Vec<u16>,
    ends: Ends,
}

#[derive(Debug)]
enum Ends {
    Narrow(Vec<[u16; 2]>),
    Wide(Vec<[u32; 2]>),
}

trait SlotIndex: Copy {
    fn ix(self) -> usize;
}

impl SlotIndex for u16 {
    #[inline(always)]
    fn ix(self) -> usize {
        self as usize
    }
}

impl SlotIndex for u32 {
    #[inline(always)]
    fn ix(self) -> usize {
        self as usize
    }
}

#[derive(Debug)]
pub(crate) struct LatticePlan {
    pub dirs: Vec<Direction>,
    pub pairs: Vec<Pair>,
    pub stencils: Vec<Stencil>,
    lattice: Vec<[i32; 3]>,
    cube: Vec<u32>,
    family_map: Vec<u32>,
    pad: i32,
    side: usize,
    num_nodes: usize,
    entries: u64,
    stored: Option<Stored>,
    gamma_prime: f64,
}

/// Groups the rule into `±` pairs of lattice directions; `None` when the
/// rule does not have that structure.
pub(crate) fn lattice_directions_of(grid: &PhaseGrid) -> Option<Vec<Direction>> {
    let nodes = grid.sphere_nodes();
    let mut reps: Vec<([i32; 3], f64, f64)> = Vec::new();
    for node in nodes {
        let m = node.n.map(|c| {
            if c > 1e-12 {
                1
            } else if c < -1e-12 {
                -1
            } else {
                0
            }
        });
        let s = m.iter().map(|c| c * c).sum::<i32>();
        if s == 0 {
            return None;
        }
        let norm = (s as f64).sqrt();
        if (0..3).any(|d| (node.n[d] - m[d] as f64 / norm).abs() > 1e-12) {
            return None;
        }
        let first = m.iter().find(|&&c| c != 0).copied().unwrap_or(1);
        let (rep, plus) = if first > 0 { (m, true) } else { (m.map(|c| -c), false) };
        match reps.iter_mut().find(|r| r.0 == rep) {
            Some(r) => {
                if plus {
                    r.1 += node.weight
                } else {
                    r.2 += node.weight
                }
            }
            None => reps.push(if plus { (rep, node.weight, 0.0) } else { (rep, 0.0, node.weight) }),
        }
    }
    if reps.iter().any(|r| (r.1 - r.2).abs() > 1e-14 * (r.1 + r.2)) {
        return None;
    }
    reps.sort_by_key(|r| {
        let s: i32 = r.0.iter().map(|c| c * c).sum();
        (s, std::cmp::Reverse(r.0))
    });
    let mut family = 0;
    Some(
        reps.into_iter()
            .map(|(m, wp, wm)| {
                let s = m.iter().map(|c| c * c).sum::<i32>();
                let d = Direction {
                    m,
                    s,
                    weight: wp + wm,
                    family,
                };
                family += (s - 1) as usize;
                d
            })
            .collect(),
    )
}

/// Number of admissible partners of each node: `χ_j(v_b, v_a) = 1` holds
/// exactly for `a < limit[b]` because nodes are sorted by `|v|`.
pub(crate) fn chi_limits(grid: &PhaseGrid) -> Vec<usize> {
    let vel = grid.velocities();
    let j = grid.j_level();
    vel.iter()
        .map(|vb| vel.partition_point(|va| chi_j(va, vb, j) == 1))
        .collect()
}

enum Point {
    Lattice([i32; 3]),
    Off { family: usize, k: i32, dir: usize, base: [i32; 3] },
}

#[inline]
fn post_points(ia: [i32; 3], ib: [i32; 3], dir: &Direction, dir_idx: usize, q: i32) -> (Point, Point) {
    let (m, s) = (dir.m, dir.s);
    let t = q.div_euclid(s);
    let r = q.rem_euclid(s);
    let pa = [ia[0] - t * m[0], ia[1] - t * m[1], ia[2] - t * m[2]];
    if r == 0 {
        let pb = [ib[0] + t * m[0], ib[1] + t * m[1], ib[2] + t * m[2]];
        return (Point::Lattice(pa), Point::Lattice(pb));
    }
    let pb = [ib[0] + (t + 1) * m[0], ib[1] + (t + 1) * m[1], ib[2] + (t + 1) * m[2]];
    (
        Point::Off {
            family: dir.family + (r - 1) as usize,
            k: r,
            dir: dir_idx,
            base: pa,
        },
        Point::Off {
            family: dir.family + (s - r - 1) as usize,
            k: s - r,
            dir: dir_idx,
            base: pb,
        },
    )
}

impl LatticePlan {
    pub fn build(grid: &PhaseGrid, kernel: &KernelSpec, dirs: Vec<Direction>, store_limit_bytes: u64) -> Self {
        let nv = grid.nv() as i32;
        let pad = 2;
        let side = (nv + 2 * pad) as usize;
        let families = dirs.iter().map(|d| (d.s - 1) as usize).sum::<usize>();
        let lattice = grid.lattice_indices().to_vec();
        let n = grid.num_nodes();
        let limits = chi_limits(grid);
        let dv = grid.dv();

        let mut pairs = Vec::new();
        for b in 0..n {
            for a in 0..limits[b].min(b) {
                let g = sub(lattice[a], lattice[b]);
                let g2 = dot(g, g);
                let u = dv * (g2 as f64).sqrt();
                let speed = kernel.speed_factor(u).unwrap_or(0.0);
                if speed > 0.0 {
                    pairs.push(Pair {
                        a: a as u32,
                        b: b as u32,
                        speed,
                    });
                }
            }
        }

        let mut cube = vec![UNSET; (nv * nv * nv) as usize];
        for (i, ijk) in lattice.iter().enumerate() {
            cube[((ijk[0] * nv + ijk[1]) * nv + ijk[2]) as usize] = i as u32;
        }
        let mut plan = Self {
            dirs,
            pairs,
            stencils: Vec::new(),
            lattice,
            cube,
            family_map: vec![UNSET; families * side * side * side],
            pad,
            side,
            num_nodes: n,
            entries: 0,
            stored: None,
            gamma_prime: kernel.gamma_prime(),
        };

        // first pass: assign slots and count entries
        let mut count = 0u64;
        for p in 0..plan.pairs.len() {
            let pair = plan.pairs[p];
            let (ia, ib) = (plan.lattice[pair.a as usize], plan.lattice[pair.b as usize]);
            let g = sub(ia, ib);
            let g2 = dot(g, g);
            for di in 0..plan.dirs.len() {
                let dir = plan.dirs[di];
                let q = dot(g, dir.m);
                if !plan.admits(q, dir.s, g2) {
                    continue;
                }
                let (p1, p2) = post_points(ia, ib, &dir, di, q);
                plan.assign(grid, &p1);
                plan.assign(grid, &p2);
                count += 1;
            }
        }
        plan.entries = count;

        let narrow = plan.num_slots() <= u16::MAX as usize + 1;
        let bytes = count * if narrow { 4 } else { 8 } + plan.pairs.len() as u64 * 2;
        if plan.dirs.len() <= 16 && bytes <= store_limit_bytes {
            let mut masks = Vec::with_capacity(plan.pairs.len());
            let mut ends = Vec::with_capacity(count as usize);
            for p in 0..plan.pairs.len() {
                let mut mask = 0u16;
                plan.for_each_entry(p, |d, s1, s2| {
                    mask |= 1 << d;
                    ends.push([s1, s2]);
                });
                masks.push(mask);
            }
            let ends = if narrow {
                Ends::Narrow(ends.iter().map(|e| e.map(|s| s as u16)).collect())
            } else {
                Ends::Wide(ends)
            };
            plan.stored = Some(Stored { masks, ends });
        }
        plan
    }

    pub fn num_entries(&self) -> u64 {
        self.entries
    }

    pub fn is_stored(&self) -> bool {
        self.stored.is_some()
    }

    pub fn num_slots(&self) -> usize {
        1 + self.num_nodes + self.stencils.len()
    }

    /// Drops the stored entry table so evaluation recomputes entries.
    pub fn drop_storage(&mut self) {
        self.stored = None;
    }

    #[inline]
    fn admits(&self, q: i32, s: i32, g2: i32) -> bool {
        if q == 0 {
            return false;
        }
        let c = (q as f64 / ((s * g2) as f64).sqrt()).abs();
        c >= self.gamma_prime && c <= 1.0 - self.gamma_prime
    }

    fn map_index(&self, family: usize, base: [i32; 3]) -> Option<usize> {
        let side = self.side as i32;
        let p = base.map(|c| c + self.pad);
        if p.iter().any(|&c| c < 0 || c >= side) {
            return None;
        }
        let s = self.side;
        Some(((family * s + p[0] as usize) * s + p[1] as usize) * s + p[2] as usize)
    }

    fn assign(&mut self, grid: &PhaseGrid, p: &Point) {
        if let Point::Off { family, k, dir, base } = *p {
            let Some(idx) = self.map_index(family, base) else {
                return;
            };
            if self.family_map[idx] != UNSET {
                return;
            }
            let m = self.dirs[dir].m;
            let s = self.dirs[dir].s as f64;
            let x = [0, 1, 2].map(|d| base[d] as f64 - k as f64 / s * m[d] as f64);
            self.family_map[idx] = if inside_ball(grid, x) {
                self.stencils.push(Stencil::at(grid, x));
                (self.num_nodes + self.stencils.len()) as u32
            } else {
                EMPTY_SLOT
            };
        }
    }

    #[inline]
    fn slot(&self, p: &Point) -> u32 {
        match *p {
            Point::Lattice(ijk) => {
                let nv = self.side as i32 - 2 * self.pad;
                if ijk.iter().any(|&c| c < 0 || c >= nv) {
                    return EMPTY_SLOT;
                }
                self.node_slot(ijk)
            }
            Point::Off { family, base, .. } => match self.map_index(family, base) {
                Some(i) => {
                    let s = self.family_map[i];
                    debug_assert_ne!(s, UNSET);
                    s
                }
                None => EMPTY_SLOT,
            },
        }
    }

    #[inline]
    fn node_slot(&self, ijk: [i32; 3]) -> u32 {
        let nv = (self.side as i32 - 2 * self.pad) as usize;
        let id = self.cube[(ijk[0] as usize * nv + ijk[1] as usize) * nv + ijk[2] as usize];
        if id == UNSET {
            EMPTY_SLOT
        } else {
            id + 1
        }
    }

    /// Calls `f(dir, slot', slot'_*)` for every admitted direction of a pair.
    #[inline]
    fn for_each_entry(&self, p: usize, mut f: impl FnMut(usize, u32, u32)) {
        let pair = self.pairs[p];
        let (ia, ib) = (self.lattice[pair.a as usize], self.lattice[pair.b as usize]);
        let g = sub(ia, ib);
        let g2 = dot(g, g);
        for (di, dir) in self.dirs.iter().enumerate() {
            let q = dot(g, dir.m);
            if !self.admits(q, dir.s, g2) {
                continue;
            }
            let (p1, p2) = post_points(ia, ib, dir, di, q);
            f(di, self.slot(&p1), self.slot(&p2));
        }
    }

    /// Fills the `(y, F)` slot values of `C` cells, interleaved per slot.
    pub fn fill_slots<const C: usize>(
        &self,
        tabs: [&NodeTables; C],
        stats: &crate::statistics::StatisticsParam,
        slots: &mut Vec<[[f64; 2]; C]>,
    ) {
        slots.clear();
        slots.resize(self.num_slots(), [[0.0; 2]; C]);
        for (c, tab) in tabs.iter().enumerate() {
            slots[0][c] = [0.0, tab.empty_factor];
            for (i, (&y, &f)) in tab.y.iter().zip(&tab.factor).enumerate() {
                slots[1 + i][c] = [y, f];
            }
            for (i, st) in self.stencils.iter().enumerate() {
                let (y, f) = st.evaluate(tab, stats);
                slots[1 + self.num_nodes + i][c] = [y, f];
            }
        }
    }

    /// Accumulates gain and loss rates of `C` cells (without the `dv³`
    /// factor). With `BONY`, also returns per cell
    /// `Σ_{a,b} y_a y_b Σ_n w B n₁² ((v_a − v_b)·n)² F'F'_*` (without `dv⁶`).
    /// Each cell is summed in the same order whatever `C` is.
    pub fn accumulate<const C: usize, const BONY: bool>(
        &self,
        tabs: [&NodeTables; C],
        slots: &[[[f64; 2]; C]],
        gain: &mut [Vec<f64>; C],
        loss: &mut [Vec<f64>; C],
        dv: f64,
    ) -> [f64; C] {
        let k = Weights {
            wd: self.dirs.iter().map(|d| d.weight).collect(),
            // w · m₁² dv² / s², to be multiplied by q².
            wb: self
                .dirs
                .iter()
                .map(|d| d.weight * (d.m[0] * d.m[0]) as f64 * dv * dv / (d.s as f64 * d.s as f64))
                .collect(),
            ms: self.dirs.iter().map(|d| d.m).collect(),
        };
        let mut total = [0.0; C];
        let mut pair_sum = |p: usize, acc: &[[f64; 3]; C]| {
            let pair = self.pairs[p];
            let (a, b) = (pair.a as usize, pair.b as usize);
            for c in 0..C {
                let (y, fa) = (&tabs[c].y, &tabs[c].factor);
                let [pp, ss, bb] = acc[c];
                let pp = pp * pair.speed;
                let ss = ss * pair.speed;
                gain[c][a] += pp * fa[b];
                gain[c][b] += pp * fa[a];
                loss[c][a] += ss * y[b];
                loss[c][b] += ss * y[a];
                if BONY {
                    total[c] += 2.0 * pair.speed * y[a] * y[b] * bb;
                }
            }
        };
        let gap = |p: usize| {
            let pair = self.pairs[p];
            sub(self.lattice[pair.a as usize], self.lattice[pair.b as usize])
        };
        match &self.stored {
            Some(st) => match &st.ends {
                Ends::Narrow(v) => stored_pass::<_, C, BONY>(&st.masks, v, slots, &k, gap, &mut pair_sum),
                Ends::Wide(v) => stored_pass::<_, C, BONY>(&st.masks, v, slots, &k, gap, &mut pair_sum),
            },
            None => {
                for p in 0..self.pairs.len() {
                    let g = gap(p);
                    let mut acc = [[0.0; 3]; C];
                    self.for_each_entry(p, |d, s1, s2| {
                        entry::<C, BONY>(&mut acc, &slots[s1 as usize], &slots[s2 as usize], &k, d, g);
                    });
                    pair_sum(p, &acc);
                }
            }
        }
        total
    }
}

struct Weights {
    wd: Vec<f64>,
    wb: Vec<f64>,
    ms: Vec<[i32; 3]>,
}

#[inline(always)]
fn entry<const C: usize, const BONY: bool>(
    acc: &mut [[f64; 3]; C],
    v1: &[[f64; 2]; C],
    v2: &[[f64; 2]; C],
    k: &Weights,
    d: usize,
    g: [i32; 3],
) {
    let w = k.wd[d];
    let wq = if BONY {
        let q = dot(g, k.ms[d]) as f64;
        k.wb[d] * q * q
    } else {
        0.0
    };
    for c in 0..C {
        let ([y1, f1], [y2, f2]) = (v1[c], v2[c]);
        let ff = f1 * f2;
        acc[c][0] += w * y1 * y2;
        acc[c][1] += w * ff;
        if BONY {
            acc[c][2] += wq * ff;
        }
    }
}

#[inline(always)]
fn stored_pass<T: SlotIndex, const C: usize, const BONY: bool>(
    masks: &[u16],
    ends: &[[T; 2]],
    slots: &[[[f64; 2]; C]],
    k: &Weights,
    gap: impl Fn(usize) -> [i32; 3],
    pair_sum: &mut impl FnMut(usize, &[[f64; 3]; C]),
) {
    let mut e = 0;
    for (p, &mask) in masks.iter().enumerate() {
        let g = if BONY { gap(p) } else { [0; 3] };
        let mut acc = [[0.0; 3]; C];
        let mut m = mask;
        while m != 0 {
            let d = m.trailing_zeros() as usize;
            m &= m - 1;
            let [s1, s2] = ends[e];
            e += 1;
            entry::<C, BONY>(&mut acc, &slots[s1.ix()], &slots[s2.ix()], k, d, g);
        }
        pair_sum(p, &acc);
    }
}

#[inline]
fn sub(a: [i32; 3], b: [i32; 3]) -> [i32; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn dot(a: [i32; 3], b: [i32; 3]) -> i32 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
