use serde::{Deserialize, Serialize};

use super::paths::Scheme;
use crate::error::{Error, Result};
use crate::forward_smile::FdStep;

/// Budget for the nested estimate of the first curvature term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerConfig {
    /// Number of `u` nodes on `[t, s]`, endpoints included.
    pub u_nodes: usize,
    /// Samples of `Y_s` drawn from each `(outer path, u)` state.
    pub sub_paths: u64,
    /// Outer paths of the factor on the `u` nodes.
    pub outer_paths: u64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self { u_nodes: 20, sub_paths: 20_000, outer_paths: 2_000 }
    }
}

/// Monte Carlo settings shared by the smile and asymptotics routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: u64,
    pub steps_per_year: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub fd_step: FdStep,
    pub inner: InnerConfig,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 200_000,
            steps_per_year: 400.0,
            seed: 20_170_101,
            scheme: Scheme::Euler,
            fd_step: FdStep::Auto,
            inner: InnerConfig::default(),
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::EmptyBatch);
        }
        if !(self.steps_per_year.is_finite() && self.steps_per_year > 0.0) {
            return Err(Error::InvalidInput("steps_per_year must be positive".into()));
        }
        if self.inner.u_nodes < 3 || self.inner.sub_paths == 0 || self.inner.outer_paths == 0 {
            return Err(Error::InvalidInput(
                "inner budget needs >= 3 u-nodes and positive path counts".into(),
            ));
        }
        if let FdStep::Fixed(h) = self.fd_step {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidInput(format!("finite-difference step must be > 0, got {h}")));
            }
        }
        Ok(())
    }
}
