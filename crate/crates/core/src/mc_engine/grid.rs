use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};

/// Simulation time grid. Each key date is an exact node; between consecutive
/// key dates the nodes are uniform with at most `1 / steps_per_year` spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    steps_per_year: f64,
    nodes: Vec<f64>,
    key_dates: Vec<f64>,
    key_index: Vec<usize>,
}

impl SimGrid {
    pub fn new(t0: f64, key_dates: &[f64], steps_per_year: f64) -> Result<Self> {
        finite(t0, "t0")?;
        finite(steps_per_year, "steps_per_year")?;
        if steps_per_year <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "steps_per_year must be > 0, got {steps_per_year}"
            )));
        }
        let mut dates: Vec<f64> = Vec::with_capacity(key_dates.len());
        for &d in key_dates {
            finite(d, "key date")?;
            if d < t0 {
                return Err(Error::InvalidInput(format!("key date {d} precedes grid start {t0}")));
            }
            if d > t0 {
                dates.push(d);
            }
        }
        dates.sort_by(f64::total_cmp);
        dates.dedup();
        if dates.is_empty() {
            return Err(Error::InvalidInput("grid needs a key date after its start".into()));
        }

        let mut nodes = vec![t0];
        let mut key_index = Vec::with_capacity(dates.len());
        let mut left = t0;
        for &d in &dates {
            let n = (((d - left) * steps_per_year) - 1e-9).ceil().max(1.0) as usize;
            let dt = (d - left) / n as f64;
            for k in 1..n {
                nodes.push(left + k as f64 * dt);
            }
            nodes.push(d);
            key_index.push(nodes.len() - 1);
            left = d;
        }
        Ok(Self { steps_per_year, nodes, key_dates: dates, key_index })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        *self.nodes.last().expect("grid has nodes")
    }

    pub fn n_steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn steps_per_year(&self) -> f64 {
        self.steps_per_year
    }

    pub fn key_dates(&self) -> &[f64] {
        &self.key_dates
    }

    /// Index of `date`, which must be the grid start or one of its key dates.
    pub fn index_of(&self, date: f64) -> Result<usize> {
        let tol = 1e-12 * (1.0 + date.abs());
        if (date - self.start()).abs() <= tol {
            return Ok(0);
        }
        self.key_dates
            .iter()
            .position(|&d| (d - date).abs() <= tol)
            .map(|p| self.key_index[p])
            .ok_or(Error::OffGrid(date))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_dates_are_exact_nodes() {
        let g = SimGrid::new(0.0, &[0.5, 0.525], 400.0).unwrap();
        assert_eq!(g.nodes()[g.index_of(0.5).unwrap()], 0.5);
        assert_eq!(g.nodes()[g.index_of(0.525).unwrap()], 0.525);
        assert_eq!(g.index_of(0.0).unwrap(), 0);
        assert_eq!(g.index_of(0.5).unwrap(), 200);
        assert_eq!(g.n_steps(), 210);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.index_of(0.3), Err(Error::OffGrid(0.3)));
    }

    #[test]
    fn short_segments_get_one_step() {
        let g = SimGrid::new(0.0, &[0.001, 1.0], 10.0).unwrap();
        assert_eq!(g.index_of(0.001).unwrap(), 1);
        assert_eq!(g.n_steps(), 11);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(SimGrid::new(0.0, &[], 100.0).is_err());
        assert!(SimGrid::new(0.0, &[0.5], 0.0).is_err());
        assert!(SimGrid::new(1.0, &[0.5], 10.0).is_err());
    }
}
