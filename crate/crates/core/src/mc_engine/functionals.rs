//! Per-path functionals entering the decomposition: realized volatility over
//! `[u ∨ s, T]`, the integrated Malliavin weight `Lambda_u`, and the
//! strike-adjusted forward `M_u`.

use super::paths::{Path, PathBatch};
use super::pricing::{date_index, DateIndex};
use crate::contract::ContractSpec;
use crate::error::Result;
use crate::models::{ModelSpec, VolModel};
use crate::stats::chunked_map;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathFunctionals {
    /// `v_s = sqrt(int_s^T sigma² / (T - s))`.
    pub v_start: f64,
    /// `v_u` on the nodes of `[s, T]`; entry 0 is `u = s`. At `u = T` the
    /// limit `|sigma_T|` is stored.
    pub realized_vol: Vec<f64>,
    /// `Lambda_u = int_{u ∨ s}^T D_u sigma_theta² dtheta` on the nodes of `[t, T]`.
    pub lambda: Vec<f64>,
    /// `M_u` on the nodes of `[t, T]`.
    pub forward_strike: Vec<f64>,
    /// Evaluations of `f'` that landed exactly on a clamp corner.
    pub corner_hits: u32,
}

/// Fills `out` for one path. Trapezoidal rule on the simulation nodes.
///
/// The Malliavin kernel factorizes as `D_u sigma_theta² = k(theta) e^{-kappa (theta - u)}`,
/// which gives the O(n) backward recursion
/// `Lambda_j = e^{-kappa dt} Lambda_{j+1} + dt/2 (k_j + e^{-kappa dt} k_{j+1})` on `[s, T]`
/// and `Lambda_u = e^{-kappa (s - u)} Lambda_s` before the start date. Both agree exactly
/// with the direct trapezoid of `theta -> D_u sigma_theta²`.
pub(crate) fn fill_functionals(
    model: &ModelSpec,
    nodes: &[f64],
    path: &Path,
    idx: DateIndex,
    alpha: f64,
    out: &mut PathFunctionals,
) {
    let (s_i, t_i) = (idx.start, idx.maturity);
    let maturity = nodes[t_i];
    let kappa = match &model.vol {
        VolModel::SteinStein { ou, .. } => ou.kappa,
        VolModel::Constant { .. } => 0.0,
    };

    out.corner_hits = 0;
    out.realized_vol.clear();
    out.realized_vol.resize(t_i - s_i + 1, 0.0);
    out.lambda.clear();
    out.lambda.resize(t_i + 1, 0.0);
    out.forward_strike.clear();
    out.forward_strike.reserve(t_i + 1);

    let kernel = |j: usize, hits: &mut u32| -> f64 {
        let y = path.y[j];
        if model.sigma_slope(y).corner {
            *hits += 1;
        }
        model.sigma_bar_sq(y)
    };

    let mut integrated_var = 0.0;
    let mut hits = 0;
    out.realized_vol[t_i - s_i] = path.sigma[t_i].abs();
    let mut k_next = kernel(t_i, &mut hits);
    let mut lam_next = 0.0;
    for j in (s_i..t_i).rev() {
        let dt = nodes[j + 1] - nodes[j];
        let (a, b) = (path.sigma[j], path.sigma[j + 1]);
        integrated_var += 0.5 * dt * (a * a + b * b);
        out.realized_vol[j - s_i] = (integrated_var / (maturity - nodes[j])).sqrt();

        let k_j = kernel(j, &mut hits);
        let decay = (-kappa * dt).exp();
        let lam = decay * lam_next + 0.5 * dt * (k_j + decay * k_next);
        out.lambda[j] = lam;
        lam_next = lam;
        k_next = k_j;
    }
    out.v_start = out.realized_vol[0];
    let lam_s = out.lambda[s_i];
    let s = nodes[s_i];
    for j in 0..s_i {
        out.lambda[j] = (-kappa * (s - nodes[j])).exp() * lam_s;
    }

    let rate = model.rate;
    for j in 0..=t_i {
        let m = if j <= s_i {
            alpha + rate * (s - nodes[j]) + path.x[j]
        } else {
            alpha + path.x[s_i]
        };
        out.forward_strike.push(m.exp());
    }
    out.corner_hits = hits;
}

/// Functionals of every path in the batch, in index order.
pub fn path_functionals(batch: &PathBatch, contract: &ContractSpec) -> Result<Vec<PathFunctionals>> {
    let idx = date_index(batch, contract)?;
    let nodes = batch.grid().nodes();
    chunked_map(batch.n_paths(), |i| {
        let path = batch.path(i)?;
        let mut f = PathFunctionals::default();
        fill_functionals(batch.model(), nodes, &path, idx, contract.alpha, &mut f);
        Ok(f)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc_engine::{simulate, SimGrid};
    use crate::models::{OuParams, VolFunction};

    fn ss(lambda: f64) -> ModelSpec {
        let ou = OuParams::new(1.0, 0.2, lambda, 0.25).unwrap();
        ModelSpec::stein_stein(ou, VolFunction::default(), 0.01, -0.5, 0.0).unwrap()
    }

    #[test]
    fn constant_vol_functionals() {
        let m = ModelSpec::constant(0.2, 0.01, -0.5, 0.0).unwrap();
        let grid = SimGrid::new(0.0, &[0.5, 0.6], 400.0).unwrap();
        let batch = simulate(&m, &grid, 5, 1).unwrap();
        let c = ContractSpec::new(0.0, 0.5, 0.6, 0.0).unwrap();
        for f in path_functionals(&batch, &c).unwrap() {
            assert!((f.v_start - 0.2).abs() < 1e-14);
            assert!(f.lambda.iter().all(|&l| l == 0.0));
            assert!(f.realized_vol.iter().all(|&v| (v - 0.2).abs() < 1e-14));
        }
    }

    #[test]
    fn deterministic_vol_has_no_malliavin_weight() {
        let grid = SimGrid::new(0.0, &[0.5, 0.6], 400.0).unwrap();
        let batch = simulate(&ss(0.0), &grid, 3, 1).unwrap();
        let c = ContractSpec::new(0.0, 0.5, 0.6, 0.0).unwrap();
        for f in path_functionals(&batch, &c).unwrap() {
            assert!(f.lambda.iter().all(|&l| l == 0.0));
        }
    }

    #[test]
    fn recursion_matches_direct_quadrature() {
        let m = ss(0.25);
        let grid = SimGrid::new(0.0, &[0.5, 0.6], 200.0).unwrap();
        let batch = simulate(&m, &grid, 4, 21).unwrap();
        let c = ContractSpec::new(0.0, 0.5, 0.6, 0.01).unwrap();
        let nodes = grid.nodes();
        let s_i = grid.index_of(0.5).unwrap();
        let t_i = grid.index_of(0.6).unwrap();
        let fs = path_functionals(&batch, &c).unwrap();
        for (i, f) in fs.iter().enumerate() {
            let p = batch.path(i as u64).unwrap();
            for u in 0..=t_i {
                let from = u.max(s_i);
                let mut direct = 0.0;
                for j in from..t_i {
                    let a = m.malliavin_d_sigma_sq(p.y[j], nodes[u], nodes[j]).unwrap();
                    let b = m.malliavin_d_sigma_sq(p.y[j + 1], nodes[u], nodes[j + 1]).unwrap();
                    direct += 0.5 * (nodes[j + 1] - nodes[j]) * (a + b);
                }
                assert!((f.lambda[u] - direct).abs() < 1e-13 * (1.0 + direct.abs()));
            }
            let m_s = (0.01 + p.x[s_i]).exp();
            assert!((f.forward_strike[s_i] - m_s).abs() < 1e-14);
            assert_eq!(f.forward_strike[t_i], f.forward_strike[s_i]);
            assert!((f.forward_strike[0] - (0.01 + 0.01 * 0.5 + p.x[0]).exp()).abs() < 1e-14);
        }
    }
}
