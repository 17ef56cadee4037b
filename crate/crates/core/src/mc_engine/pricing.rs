use super::paths::{Path, PathBatch};
use crate::contract::ContractSpec;
use crate::error::{Error, Result};
use crate::stats::{chunked_map, Accumulator, McEstimate};

/// Grid indices of the valuation, start and maturity dates of a contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct DateIndex {
    pub start: usize,
    pub maturity: usize,
}

pub(crate) fn date_index(batch: &PathBatch, contract: &ContractSpec) -> Result<DateIndex> {
    let grid = batch.grid();
    if grid.index_of(contract.t)? != 0 {
        return Err(Error::InvalidInput(format!(
            "valuation time {} must be the grid start {}",
            contract.t,
            grid.start()
        )));
    }
    Ok(DateIndex {
        start: grid.index_of(contract.start)?,
        maturity: grid.index_of(contract.maturity)?,
    })
}

/// The pair `(X_s, X_T)` of every path, which is all the direct payoff needs.
///
/// Collected once per batch so that any number of moneyness levels can be
/// priced on identical paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSample {
    contract: ContractSpec,
    x_start: Vec<f64>,
    x_maturity: Vec<f64>,
    discount: f64,
    seed: u64,
}

impl ForwardSample {
    pub fn collect(batch: &PathBatch, contract: &ContractSpec) -> Result<Self> {
        let idx = date_index(batch, contract)?;
        let pairs = chunked_map(batch.n_paths(), |i| {
            let mut p = Path::default();
            batch.path_into(i, &mut p)?;
            Ok((p.x[idx.start], p.x[idx.maturity]))
        })?;
        let (x_start, x_maturity) = pairs.into_iter().unzip();
        Ok(Self {
            contract: *contract,
            x_start,
            x_maturity,
            discount: (-batch.model().rate * (contract.maturity - contract.t)).exp(),
            seed: batch.seed(),
        })
    }

    pub fn contract(&self) -> &ContractSpec {
        &self.contract
    }

    pub fn len(&self) -> usize {
        self.x_start.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_start.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Discounted payoff `e^{-r(T-t)} (e^{X_T} - e^{alpha + X_s})_+` of path `i`.
    #[inline]
    pub fn payoff(&self, i: usize, alpha: f64) -> f64 {
        let xt = self.x_maturity[i];
        let strike = alpha + self.x_start[i];
        self.discount * (xt.exp() - strike.exp()).max(0.0)
    }

    pub fn price(&self, alpha: f64) -> Result<McEstimate> {
        let mut acc = Accumulator::default();
        for i in 0..self.len() {
            acc.push(self.payoff(i, alpha));
        }
        acc.estimate(self.seed)
    }

    /// Prices at several moneyness levels from the same paths.
    pub fn prices(&self, alphas: &[f64]) -> Result<Vec<McEstimate>> {
        alphas.iter().map(|&a| self.price(a)).collect()
    }

    /// Sample of discounted `e^{X_T}`, for martingale checks.
    pub fn discounted_terminal(&self) -> Result<McEstimate> {
        let mut acc = Accumulator::default();
        for &xt in &self.x_maturity {
            acc.push(self.discount * xt.exp());
        }
        acc.estimate(self.seed)
    }
}

/// Discounted sample mean of the forward-start payoff with its standard error.
pub fn price_forward_start(batch: &PathBatch, contract: &ContractSpec) -> Result<McEstimate> {
    ForwardSample::collect(batch, contract)?.price(contract.alpha)
}
