//! Forward-start price through the Malliavin decomposition
//!
//! `V_t = E_t[ e^{X_t} BS(s, 0, e^alpha, v_s)
//!        + rho/2 int_s^T e^{-r(u-t)} H(u, X_u, M_u, v_u) sigma_u Lambda_u du
//!        + rho/2 G(s, 0, e^alpha, v_s) int_t^s e^{-r(u-t)} e^{X_u} sigma_u Lambda_u du ]`,
//!
//! evaluated path by path alongside the direct payoff so that the two pricers
//! can be compared on identical paths.

use serde::{Deserialize, Serialize};

use super::functionals::{fill_functionals, PathFunctionals};
use super::paths::{Path, PathBatch};
use super::pricing::date_index;
use crate::blackscholes::{bs_call, g_function, h_function, BsInputs};
use crate::contract::ContractSpec;
use crate::error::{Error, Result};
use crate::stats::{chunked_reduce, z_score, CovAccumulator, McEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Sum of the three terms.
    pub total: McEstimate,
    /// `E[e^{X_t} BS(s, 0, e^alpha, v_s)]`.
    pub bs_term: McEstimate,
    /// Correction integrated over `[t, s]` (the `G` term).
    pub early_term: McEstimate,
    /// Correction integrated over `[s, T]` (the `H` term).
    pub late_term: McEstimate,
    /// Direct payoff average on the same paths.
    pub direct: McEstimate,
    /// `direct - total` with its paired standard error.
    pub difference: McEstimate,
    pub corner_hits: u64,
}

impl Decomposition {
    /// z-score of the direct/decomposition gap, using the paired standard error.
    pub fn z_score(&self) -> f64 {
        z_score(self.difference.value, self.difference.std_error)
    }
}

#[derive(Default)]
struct Scratch {
    acc: CovAccumulator<4>,
    corner_hits: u64,
    path: Path,
    functionals: PathFunctionals,
}

/// Per-path evaluation of the decomposition terms.
pub fn price_decomposition(batch: &PathBatch, contract: &ContractSpec) -> Result<Decomposition> {
    let idx = date_index(batch, contract)?;
    let model = *batch.model();
    let nodes = batch.grid().nodes();
    let (t0, start, maturity) = (contract.t, contract.start, contract.maturity);
    let rate = model.rate;
    let rho = model.rho;
    let strike = contract.alpha.exp();
    let gap = maturity - start;
    let x_t = model.x0;
    let discount = (-rate * (maturity - t0)).exp();

    let scratch = chunked_reduce(
        batch.n_paths(),
        Scratch::default,
        |sc: &mut Scratch, i| {
            batch.path_into(i, &mut sc.path)?;
            let p = &sc.path;
            let f = &mut sc.functionals;
            fill_functionals(&model, nodes, p, idx, contract.alpha, f);
            sc.corner_hits += f.corner_hits as u64;
            if !(f.v_start > 0.0) {
                return Err(Error::DegenerateVol);
            }

            let at_start = BsInputs::new(gap, 0.0, strike, f.v_start, rate)?;
            let bs = x_t.exp() * bs_call(&at_start);

            let mut early_integral = 0.0;
            let integrand = |j: usize| (-rate * (nodes[j] - t0)).exp() * p.x[j].exp() * p.sigma[j] * f.lambda[j];
            let mut prev = integrand(0);
            for j in 1..=idx.start {
                let cur = integrand(j);
                early_integral += 0.5 * (nodes[j] - nodes[j - 1]) * (prev + cur);
                prev = cur;
            }
            let early = 0.5 * rho * g_function(&at_start)? * early_integral;

            // Lambda_T = 0, so the integrand vanishes at the maturity node.
            let mut late_integral = 0.0;
            let mut prev = 0.0;
            for j in idx.start..idx.maturity {
                let lam = f.lambda[j];
                let cur = if lam == 0.0 {
                    0.0
                } else {
                    let v = f.realized_vol[j - idx.start];
                    let inp = BsInputs::new(maturity - nodes[j], p.x[j], f.forward_strike[j], v, rate)?;
                    (-rate * (nodes[j] - t0)).exp() * h_function(&inp)? * p.sigma[j] * lam
                };
                if j > idx.start {
                    late_integral += 0.5 * (nodes[j] - nodes[j - 1]) * (prev + cur);
                }
                prev = cur;
            }
            late_integral += 0.5 * (nodes[idx.maturity] - nodes[idx.maturity - 1]) * prev;
            let late = 0.5 * rho * late_integral;

            let payoff = discount * (p.x[idx.maturity].exp() - (contract.alpha + p.x[idx.start]).exp()).max(0.0);
            sc.acc.push(&[payoff, bs, early, late]);
            Ok(())
        },
        |a: &mut Scratch, b: &Scratch| {
            a.acc.merge(&b.acc);
            a.corner_hits += b.corner_hits;
        },
    )?;

    let seed = batch.seed();
    let acc = &scratch.acc;
    Ok(Decomposition {
        total: acc.estimate_of(&[0.0, 1.0, 1.0, 1.0], seed)?,
        bs_term: acc.marginal(1, seed)?,
        early_term: acc.marginal(2, seed)?,
        late_term: acc.marginal(3, seed)?,
        direct: acc.marginal(0, seed)?,
        difference: acc.estimate_of(&[1.0, -1.0, -1.0, -1.0], seed)?,
        corner_hits: scratch.corner_hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackscholes::forward_start_bs_price;
    use crate::mc_engine::{simulate, SimGrid};
    use crate::models::{ModelSpec, OuParams, VolFunction};

    #[test]
    fn constant_vol_is_exact() {
        let m = ModelSpec::constant(0.25, 0.02, -0.7, 0.3).unwrap();
        let grid = SimGrid::new(0.0, &[0.5, 0.6], 200.0).unwrap();
        let batch = simulate(&m, &grid, 2000, 3).unwrap();
        let c = ContractSpec::new(0.0, 0.5, 0.6, 0.01).unwrap();
        let d = price_decomposition(&batch, &c).unwrap();
        let exact = forward_start_bs_price(0.3, 0.5, 0.6, 0.01, 0.25, 0.02).unwrap();
        assert!((d.total.value - exact).abs() < 1e-12 * exact);
        assert!(d.total.std_error < 1e-12);
        assert_eq!(d.early_term.value, 0.0);
        assert_eq!(d.late_term.value, 0.0);
        assert!(d.z_score().abs() < 3.0);
    }

    #[test]
    fn zero_correlation_drops_corrections() {
        let ou = OuParams::new(1.0, 0.2, 0.25, 0.25).unwrap();
        let m = ModelSpec::stein_stein(ou, VolFunction::default(), 0.01, 0.0, 0.0).unwrap();
        let grid = SimGrid::new(0.0, &[0.5, 0.6], 200.0).unwrap();
        let batch = simulate(&m, &grid, 500, 3).unwrap();
        let c = ContractSpec::new(0.0, 0.5, 0.6, 0.001).unwrap();
        let d = price_decomposition(&batch, &c).unwrap();
        assert_eq!(d.early_term.value, 0.0);
        assert_eq!(d.late_term.value, 0.0);
        assert_eq!(d.total.value, d.bs_term.value);
    }
}
