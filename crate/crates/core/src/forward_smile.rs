//! Forward implied volatility, ATM finite-difference skew and curvature, and
//! convergence studies as `T - s` shrinks.

use serde::{Deserialize, Serialize};

pub use crate::contract::ContractSpec;
use crate::blackscholes::{bs_vega, dk_bs, implied_vol, BsInputs};
use crate::error::{Error, Result};
use crate::mc_engine::{simulate_with, ForwardSample, McConfig, PathBatch, SimGrid};
use crate::models::ModelSpec;
use crate::rng::derive_seed;
use crate::stats::{richardson_linear, Accumulator, CovAccumulator, McEstimate, ValueSe};

/// One point of the forward smile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmilePoint {
    pub alpha: f64,
    pub vol: f64,
    /// `SE(V) e^{-x_t} / vega`; infinite at the intrinsic boundary.
    pub vol_se: f64,
    pub price: McEstimate,
    pub at_intrinsic: bool,
}

/// At-the-money forward log-moneyness `r (T - s)`.
pub fn atm_alpha(start: f64, maturity: f64, rate: f64) -> f64 {
    rate * (maturity - start)
}

/// Normalized vega of the forward-start BS price at `(alpha, vol)`.
fn forward_vega(gap: f64, alpha: f64, vol: f64, rate: f64) -> Result<f64> {
    bs_vega(&BsInputs::new(gap, 0.0, alpha.exp(), vol, rate)?)
}

/// Inverts `V = e^{x_t} BS(s, 0, e^alpha, I)` for the forward implied volatility.
pub fn implied_forward_vol(
    price: &McEstimate,
    x_t: f64,
    start: f64,
    maturity: f64,
    alpha: f64,
    rate: f64,
) -> Result<SmilePoint> {
    if start >= maturity {
        return Err(Error::InvalidInput(format!("need s < T, got s = {start}, T = {maturity}")));
    }
    let scale = (-x_t).exp();
    let gap = maturity - start;
    let iv = implied_vol(price.value * scale, gap, 0.0, alpha.exp(), rate)?;
    let vol_se = if iv.at_intrinsic {
        f64::INFINITY
    } else {
        price.std_error * scale / forward_vega(gap, alpha, iv.vol, rate)?
    };
    Ok(SmilePoint { alpha, vol: iv.vol, vol_se, price: *price, at_intrinsic: iv.at_intrinsic })
}

/// Smile points at every `alpha`, all priced on the same paths. A failed
/// inversion is reported in place and does not abort the slice.
pub fn smile_slice(
    batch: &PathBatch,
    contract: &ContractSpec,
    alphas: &[f64],
) -> Result<Vec<Result<SmilePoint>>> {
    let sample = ForwardSample::collect(batch, contract)?;
    Ok(smile_from_sample(&sample, batch.model(), alphas))
}

pub fn smile_from_sample(sample: &ForwardSample, model: &ModelSpec, alphas: &[f64]) -> Vec<Result<SmilePoint>> {
    let c = sample.contract();
    alphas
        .iter()
        .map(|&a| {
            let price = sample.price(a)?;
            implied_forward_vol(&price, model.x0, c.start, c.maturity, a, model.rate)
        })
        .collect()
}

/// Finite-difference step in log-moneyness for the ATM derivatives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdStep {
    /// `h = max(0.05 sqrt(T - s) I_0, 10 SE(V_0) / |dBS/dk|)`.
    #[default]
    Auto,
    Fixed(f64),
}

/// ATM level, skew and curvature of the forward smile at one remaining maturity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmileReport {
    pub gap: f64,
    pub level: f64,
    pub level_se: f64,
    pub skew: f64,
    pub skew_se: f64,
    pub curvature: f64,
    pub curvature_se: f64,
    /// `(T - s)` times the curvature.
    pub scaled_curvature: f64,
    pub scaled_curvature_se: f64,
    pub h: f64,
    pub n_paths: u64,
    pub seed: u64,
    /// The curvature standard error exceeds its magnitude.
    pub underpowered: bool,
}

/// Central differences of the forward smile at `alpha*` from one batch.
pub fn atm_derivatives(batch: &PathBatch, contract: &ContractSpec, step: FdStep) -> Result<SmileReport> {
    let sample = ForwardSample::collect(batch, contract)?;
    atm_derivatives_from_sample(&sample, batch.model(), step)
}

pub fn atm_derivatives_from_sample(sample: &ForwardSample, model: &ModelSpec, step: FdStep) -> Result<SmileReport> {
    let c = *sample.contract();
    let gap = c.gap();
    let rate = model.rate;
    let a0 = atm_alpha(c.start, c.maturity, rate);
    let scale = (-model.x0).exp();

    let h = match step {
        FdStep::Fixed(h) => h,
        FdStep::Auto => {
            let mut acc = Accumulator::default();
            for i in 0..sample.len() {
                acc.push(scale * sample.payoff(i, a0));
            }
            let p0 = acc.estimate(sample.seed())?;
            let iv = implied_vol(p0.value, gap, 0.0, a0.exp(), rate)?;
            let slope = dk_bs(&BsInputs::new(gap, 0.0, a0.exp(), iv.vol, rate)?)?.abs();
            (0.05 * gap.sqrt() * iv.vol).max(10.0 * p0.std_error / slope)
        }
    };
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidInput(format!("finite-difference step must be > 0, got {h}")));
    }

    let alphas = [a0 - h, a0, a0 + h];
    let mut acc = CovAccumulator::<3>::default();
    for i in 0..sample.len() {
        acc.push(&alphas.map(|a| scale * sample.payoff(i, a)));
    }
    let means = acc.mean();
    let mut vols = [0.0; 3];
    let mut vegas = [0.0; 3];
    for k in 0..3 {
        let iv = implied_vol(means[k], gap, 0.0, alphas[k].exp(), rate)?;
        if iv.at_intrinsic {
            return Err(Error::InvalidInput(format!(
                "price at alpha = {} is at the intrinsic boundary; step h = {h} is too large",
                alphas[k]
            )));
        }
        vols[k] = iv.vol;
        vegas[k] = forward_vega(gap, alphas[k], iv.vol, rate)?;
    }
    let level_se = acc.std_error_of(&[0.0, 1.0 / vegas[1], 0.0]);
    let skew = (vols[2] - vols[0]) / (2.0 * h);
    let skew_se = acc.std_error_of(&[-1.0 / vegas[0], 0.0, 1.0 / vegas[2]]) / (2.0 * h);
    let curvature = (vols[2] - 2.0 * vols[1] + vols[0]) / (h * h);
    let curvature_se = acc.std_error_of(&[1.0 / vegas[0], -2.0 / vegas[1], 1.0 / vegas[2]]) / (h * h);

    Ok(SmileReport {
        gap,
        level: vols[1],
        level_se,
        skew,
        skew_se,
        curvature,
        curvature_se,
        scaled_curvature: gap * curvature,
        scaled_curvature_se: gap * curvature_se,
        h,
        n_paths: acc.count(),
        seed: sample.seed(),
        underpowered: curvature_se > curvature.abs(),
    })
}

/// Reports per gap and their extrapolation to `T - s -> 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub reports: Vec<SmileReport>,
    /// Two-point Richardson extrapolation from the two smallest gaps.
    pub level: ValueSe,
    pub skew: ValueSe,
    pub scaled_curvature: ValueSe,
    /// Soft diagnostics: non-monotone convergence, underpowered curvature.
    pub warnings: Vec<String>,
}

/// Independent ATM studies at each gap (seed derived from the base seed and
/// the gap's position), followed by Richardson extrapolation.
pub fn convergence_study(
    model: &ModelSpec,
    t: f64,
    start: f64,
    gaps: &[f64],
    mc: &McConfig,
) -> Result<ConvergenceStudy> {
    mc.validate()?;
    if gaps.len() < 2 {
        return Err(Error::InvalidInput("convergence study needs at least two gaps".into()));
    }
    let resolution = 1.0 / mc.steps_per_year;
    for w in gaps.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::InvalidInput(format!("gaps must be strictly decreasing: {gaps:?}")));
        }
    }
    if let Some(g) = gaps.iter().find(|&&g| !(g >= resolution * (1.0 - 1e-9))) {
        return Err(Error::InvalidInput(format!(
            "gap {g} is below the grid resolution {resolution}"
        )));
    }

    let mut reports = Vec::with_capacity(gaps.len());
    for (k, &gap) in gaps.iter().enumerate() {
        let maturity = start + gap;
        let contract = ContractSpec::new(t, start, maturity, atm_alpha(start, maturity, model.rate))?;
        let grid = SimGrid::new(t, &[start, maturity], mc.steps_per_year)?;
        let batch = simulate_with(model, &grid, mc.n_paths, derive_seed(mc.seed, k as u64), mc.scheme)?;
        reports.push(atm_derivatives(&batch, &contract, mc.fd_step)?);
    }

    let n = reports.len();
    let (a, b) = (&reports[n - 2], &reports[n - 1]);
    let extrapolate = |f: fn(&SmileReport) -> ValueSe| richardson_linear(a.gap, f(a), b.gap, f(b));
    let level = extrapolate(|r| ValueSe { value: r.level, se: r.level_se })?;
    let skew = extrapolate(|r| ValueSe { value: r.skew, se: r.skew_se })?;
    let scaled_curvature =
        extrapolate(|r| ValueSe { value: r.scaled_curvature, se: r.scaled_curvature_se })?;

    let mut warnings = Vec::new();
    let dists: Vec<f64> = reports.iter().map(|r| (r.level - level.value).abs()).collect();
    if dists.windows(2).any(|w| w[1] > w[0]) {
        warnings.push("ATM level does not approach its extrapolation monotonically".to_string());
    }
    for r in &reports {
        if r.underpowered {
            warnings.push(format!("curvature at gap {} is underpowered (SE exceeds |value|)", r.gap));
        }
        if !r.scaled_curvature.is_finite() {
            warnings.push(format!("scaled curvature at gap {} is not finite", r.gap));
        }
    }

    Ok(ConvergenceStudy { reports, level, skew, scaled_curvature, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackscholes::forward_start_bs_price;
    use crate::mc_engine::simulate;

    #[test]
    fn atm_alpha_examples() {
        assert_eq!(atm_alpha(0.5, 0.7, 0.0), 0.0);
        assert!((atm_alpha(0.5, 0.6, 0.05) - 0.005).abs() < 1e-16);
    }

    #[test]
    fn closed_form_price_inverts_to_its_vol() {
        let (s, t_mat, r) = (0.5, 0.55, 0.03);
        for &alpha in &[-0.05, 0.0, 0.0015, 0.04] {
            let p = forward_start_bs_price(0.2, s, t_mat, alpha, 0.3, r).unwrap();
            let est = McEstimate { value: p, std_error: 1e-4, n_paths: 1, seed: 0 };
            let pt = implied_forward_vol(&est, 0.2, s, t_mat, alpha, r).unwrap();
            assert!((pt.vol - 0.3).abs() < 1e-10);
            assert!(pt.vol_se > 0.0);
        }
    }

    #[test]
    fn constant_vol_slice_is_flat() {
        let m = ModelSpec::constant(0.2, 0.01, -0.3, 0.0).unwrap();
        let grid = SimGrid::new(0.0, &[0.5, 0.6], 400.0).unwrap();
        let batch = simulate(&m, &grid, 20_000, 17).unwrap();
        let c = ContractSpec::new(0.0, 0.5, 0.6, 0.0).unwrap();
        let alphas = [-0.05, -0.02, 0.0, 0.001, 0.03];
        let slice = smile_slice(&batch, &c, &alphas).unwrap();
        for p in slice {
            let p = p.unwrap();
            assert!((p.vol - 0.2).abs() < 3.0 * p.vol_se, "{p:?}");
        }
        let again = smile_slice(&batch, &c, &alphas).unwrap();
        let first = smile_slice(&batch, &c, &alphas).unwrap();
        for (a, b) in first.iter().zip(again.iter()) {
            assert_eq!(a.as_ref().unwrap().vol.to_bits(), b.as_ref().unwrap().vol.to_bits());
        }
    }

    #[test]
    fn failed_points_do_not_abort_the_slice() {
        let m = ModelSpec::constant(0.2, 0.0, 0.0, 0.0).unwrap();
        let grid = SimGrid::new(0.0, &[0.1, 0.2], 100.0).unwrap();
        let batch = simulate(&m, &grid, 200, 1).unwrap();
        let c = ContractSpec::new(0.0, 0.1, 0.2, 0.0).unwrap();
        let slice = smile_slice(&batch, &c, &[-60.0, 0.0, 60.0]).unwrap();
        assert!(slice[1].is_ok());
        assert!(slice[0].as_ref().map_or(true, |p| p.at_intrinsic || p.vol_se > 0.0));
        assert!(slice[2].as_ref().map_or(true, |p| p.at_intrinsic));
    }

    #[test]
    fn constant_vol_derivatives_vanish() {
        let m = ModelSpec::constant(0.2, 0.01, -0.5, 0.0).unwrap();
        let grid = SimGrid::new(0.0, &[0.5, 0.55], 400.0).unwrap();
        let batch = simulate(&m, &grid, 50_000, 2).unwrap();
        let c = ContractSpec::new(0.0, 0.5, 0.55, 0.0).unwrap();
        let r = atm_derivatives(&batch, &c, FdStep::Auto).unwrap();
        assert!((r.level - 0.2).abs() < 3.0 * r.level_se);
        assert!(r.skew.abs() < 3.0 * r.skew_se, "{r:?}");
        assert!(r.curvature.abs() < 3.0 * r.curvature_se, "{r:?}");
    }

    #[test]
    fn study_rejects_bad_gap_lists() {
        let m = ModelSpec::constant(0.2, 0.0, 0.0, 0.0).unwrap();
        let mc = McConfig { n_paths: 10, ..McConfig::default() };
        assert!(convergence_study(&m, 0.0, 0.5, &[0.1, 0.2], &mc).is_err());
        assert!(convergence_study(&m, 0.0, 0.5, &[0.1], &mc).is_err());
        assert!(convergence_study(&m, 0.0, 0.5, &[0.1, 0.001], &mc).is_err());
    }
}
