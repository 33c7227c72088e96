use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::PhaseGrid;

/// Occupation numbers `f(x, v)` on a phase grid, bounded by `1/α`.
///
/// Storage is cell-major: all velocity nodes of cell 0, then cell 1, ...
#[derive(Clone, Debug)]
pub struct DistributionField {
    grid: Arc<PhaseGrid>,
    ceiling: f64,
    time: f64,
    data: Vec<f64>,
}

impl DistributionField {
    pub fn zeros(grid: Arc<PhaseGrid>, alpha: f64) -> Self {
        let n = grid.num_cells() * grid.num_nodes();
        Self {
            grid,
            ceiling: 1.0 / alpha,
            time: 0.0,
            data: vec![0.0; n],
        }
    }

    /// Wraps raw data after checking the bounds.
    pub fn from_data(grid: Arc<PhaseGrid>, alpha: f64, data: Vec<f64>) -> Result<Self> {
        let n = grid.num_cells() * grid.num_nodes();
        if data.len() != n {
            return Err(Error::GridMismatch(format!(
                "expected {n} values, got {}",
                data.len()
            )));
        }
        let f = Self {
            grid,
            ceiling: 1.0 / alpha,
            time: 0.0,
            data,
        };
        f.check_invariants(0)?;
        Ok(f)
    }

    /// The same value everywhere.
    pub fn constant(grid: Arc<PhaseGrid>, alpha: f64, value: f64) -> Result<Self> {
        let mut f = Self::zeros(grid, alpha);
        f.data.fill(value);
        f.check_invariants(0)?;
        Ok(f)
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<PhaseGrid> {
        &self.grid
    }

    /// The hard ceiling `1/α`.
    pub fn ceiling(&self) -> f64 {
        self.ceiling
    }

    pub fn alpha(&self) -> f64 {
        1.0 / self.ceiling
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access; callers must re-establish the bounds.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn cell(&self, cell: usize) -> &[f64] {
        let n = self.grid.num_nodes();
        &self.data[cell * n..(cell + 1) * n]
    }

    pub fn cell_mut(&mut self, cell: usize) -> &mut [f64] {
        let n = self.grid.num_nodes();
        &mut self.data[cell * n..(cell + 1) * n]
    }

    pub fn get(&self, cell: usize, node: usize) -> f64 {
        self.data[cell * self.grid.num_nodes() + node]
    }

    pub fn set(&mut self, cell: usize, node: usize, value: f64) {
        let n = self.grid.num_nodes();
        self.data[cell * n + node] = value;
    }

    /// Checks `0 <= f <= 1/α` and finiteness everywhere, without tolerance.
    pub fn check_invariants(&self, step: u64) -> Result<()> {
        let n = self.grid.num_nodes();
        for (i, &y) in self.data.iter().enumerate() {
            let what = if !y.is_finite() {
                "non-finite value"
            } else if y < 0.0 {
                "negative occupation"
            } else if y > self.ceiling {
                "occupation above 1/alpha"
            } else {
                continue;
            };
            return Err(Error::InvariantBreach {
                step,
                cell: i / n,
                node: i % n,
                value: y,
                what,
            });
        }
        Ok(())
    }

    /// Errors unless both fields live on the same grid.
    pub fn ensure_same_grid(&self, other: &DistributionField) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "`{}` vs `{}`",
                self.grid.header().to_line(),
                other.grid.header().to_line()
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SphereRule;

    fn grid() -> Arc<PhaseGrid> {
        Arc::new(PhaseGrid::build(1, 3, 1.0, 2, SphereRule::Lebedev26).unwrap())
    }

    #[test]
    fn bounds_are_exact() {
        let g = grid();
        assert!(DistributionField::constant(g.clone(), 0.5, 2.0).is_ok());
        let err = DistributionField::constant(g.clone(), 0.5, 2.0 + 1e-15).unwrap_err();
        assert!(matches!(err, Error::InvariantBreach { .. }));
        assert!(DistributionField::constant(g, 0.5, f64::NAN).is_err());
    }

    #[test]
    fn cell_major_layout() {
        let g = grid();
        let mut f = DistributionField::zeros(g.clone(), 1.0);
        f.set(2, 5, 0.25);
        assert_eq!(f.data()[2 * g.num_nodes() + 5], 0.25);
        assert_eq!(f.cell(2)[5], 0.25);
    }
}
