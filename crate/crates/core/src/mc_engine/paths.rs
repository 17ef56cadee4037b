use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::grid::SimGrid;
use crate::error::{Error, Result};
use crate::models::{ModelSpec, VolModel};
use crate::rng::{self, Domain};

/// Time-stepping scheme for the volatility factor. `X` is always stepped by
/// log-Euler with the left-point volatility.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Euler,
    /// Exact Gaussian OU transition, driven by the same normal as the `W`
    /// increment of `X`.
    ExactOu,
}

/// One simulated path on the grid nodes. `dw[k]`, `db[k]` are the standard
/// normal innovations of step `k` (from node `k` to `k + 1`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Path {
    pub y: Vec<f64>,
    pub sigma: Vec<f64>,
    pub x: Vec<f64>,
    pub dw: Vec<f64>,
    pub db: Vec<f64>,
}

/// A reproducible batch of paths.
///
/// Paths are generated on demand from the per-path stream `(seed, index)`, so
/// a batch never needs to be held in memory and any single path can be
/// regenerated in isolation. Use [`PathBatch::materialize`] for small batches.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    model: ModelSpec,
    grid: SimGrid,
    n_paths: u64,
    seed: u64,
    scheme: Scheme,
}

/// Euler batch; see [`simulate_with`].
pub fn simulate(model: &ModelSpec, grid: &SimGrid, n_paths: u64, seed: u64) -> Result<PathBatch> {
    simulate_with(model, grid, n_paths, seed, Scheme::Euler)
}

pub fn simulate_with(
    model: &ModelSpec,
    grid: &SimGrid,
    n_paths: u64,
    seed: u64,
    scheme: Scheme,
) -> Result<PathBatch> {
    model.validate()?;
    if n_paths == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok(PathBatch { model: *model, grid: grid.clone(), n_paths, seed, scheme })
}

impl PathBatch {
    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn grid(&self) -> &SimGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> u64 {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn path(&self, index: u64) -> Result<Path> {
        let mut p = Path::default();
        self.path_into(index, &mut p)?;
        Ok(p)
    }

    /// Regenerates path `index` into `out`, reusing its buffers.
    pub fn path_into(&self, index: u64, out: &mut Path) -> Result<()> {
        let nodes = self.grid.nodes();
        let n = nodes.len();
        for v in [&mut out.y, &mut out.sigma, &mut out.x] {
            v.clear();
            v.reserve(n);
        }
        out.dw.clear();
        out.db.clear();

        let mut rng = rng::stream(self.seed, Domain::Paths, index);
        let m = &self.model;
        let rho = m.rho;
        let rho_bar = (1.0 - rho * rho).max(0.0).sqrt();

        let mut y = m.y0();
        let mut x = m.x0;
        for k in 0..n {
            let sigma = m.sigma(y);
            out.y.push(y);
            out.sigma.push(sigma);
            out.x.push(x);
            if k + 1 == n {
                break;
            }
            let dt = nodes[k + 1] - nodes[k];
            let sq = dt.sqrt();
            let zw: f64 = StandardNormal.sample(&mut rng);
            let zb: f64 = StandardNormal.sample(&mut rng);
            out.dw.push(zw);
            out.db.push(zb);

            x += (m.rate - 0.5 * sigma * sigma) * dt + sigma * sq * (rho * zw + rho_bar * zb);
            if let VolModel::SteinStein { ou, .. } = &m.vol {
                y = match self.scheme {
                    Scheme::Euler => y + ou.kappa * (ou.m - y) * dt + ou.lambda * sq * zw,
                    Scheme::ExactOu => {
                        ou.mean_unchecked(y, dt) + ou.variance_unchecked(dt).sqrt() * zw
                    }
                };
            }
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::NonFiniteState { path: index, step: k + 1, y, x });
            }
        }
        Ok(())
    }

    /// All paths, in index order.
    pub fn materialize(&self) -> Result<Vec<Path>> {
        (0..self.n_paths).map(|i| self.path(i)).collect()
    }
}
