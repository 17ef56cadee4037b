//! Path simulation and forward-start pricing.

mod config;
mod decomposition;
pub mod dump;
mod functionals;
mod grid;
mod paths;
mod pricing;

pub use config::{InnerConfig, McConfig};
pub use decomposition::{price_decomposition, Decomposition};
pub use functionals::{path_functionals, PathFunctionals};
pub use grid::SimGrid;
pub use paths::{simulate, simulate_with, Path, PathBatch, Scheme};
pub use pricing::{price_forward_start, ForwardSample};
