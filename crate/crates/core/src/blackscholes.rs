//! Black–Scholes call analytics in the log-spot variable.
//!
//! Besides the price and vega this module provides the two kernels of the
//! forward-start decomposition, `G = (d²/dx² - d/dx) BS` and `H = dG/dx`,
//! their log-strike derivatives, and a safeguarded implied-volatility solver.

use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Inputs of a European call: `tau` years to expiry, log-spot `x`, strike,
/// annualized volatility and continuously compounded rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsInputs {
    pub tau: f64,
    pub log_spot: f64,
    pub strike: f64,
    pub vol: f64,
    pub rate: f64,
}

impl BsInputs {
    pub fn new(tau: f64, log_spot: f64, strike: f64, vol: f64, rate: f64) -> Result<Self> {
        finite(tau, "tau")?;
        finite(log_spot, "log_spot")?;
        finite(strike, "strike")?;
        finite(vol, "vol")?;
        finite(rate, "rate")?;
        if tau < 0.0 {
            return Err(Error::InvalidInput(format!("tau must be >= 0, got {tau}")));
        }
        if strike <= 0.0 {
            return Err(Error::InvalidInput(format!("strike must be > 0, got {strike}")));
        }
        if vol < 0.0 {
            return Err(Error::InvalidInput(format!("vol must be >= 0, got {vol}")));
        }
        Ok(Self { tau, log_spot, strike, vol, rate })
    }

    pub fn with_vol(self, vol: f64) -> Self {
        Self { vol, ..self }
    }

    pub fn with_log_spot(self, log_spot: f64) -> Self {
        Self { log_spot, ..self }
    }

    pub fn with_strike(self, strike: f64) -> Self {
        Self { strike, ..self }
    }

    pub fn spot(&self) -> f64 {
        self.log_spot.exp()
    }

    /// `K e^{-r tau}`.
    pub fn discounted_strike(&self) -> f64 {
        self.strike * (-self.rate * self.tau).exp()
    }

    pub fn intrinsic(&self) -> f64 {
        (self.spot() - self.discounted_strike()).max(0.0)
    }

    /// `sigma * sqrt(tau)`.
    pub fn total_vol(&self) -> f64 {
        self.vol * self.tau.sqrt()
    }
}

/// Call price `e^x N(d+) - K e^{-r tau} N(d-)`; intrinsic value when
/// `sigma * sqrt(tau) = 0`.
pub fn bs_call(inp: &BsInputs) -> f64 {
    let w = inp.total_vol();
    if w <= 0.0 {
        return inp.intrinsic();
    }
    let (dp, dm) = d_pm_unchecked(inp, w);
    let price = inp.spot() * norm_cdf(dp) - inp.discounted_strike() * norm_cdf(dm);
    price.max(inp.intrinsic()).min(inp.spot())
}

fn d_pm_unchecked(inp: &BsInputs, w: f64) -> (f64, f64) {
    let m = inp.log_spot - inp.strike.ln() + inp.rate * inp.tau;
    (m / w + 0.5 * w, m / w - 0.5 * w)
}

fn checked_total_vol(inp: &BsInputs) -> Result<f64> {
    let w = inp.total_vol();
    if w > 0.0 {
        Ok(w)
    } else {
        Err(Error::DegenerateVol)
    }
}

/// `(d+, d-)`.
pub fn d_plus_minus(inp: &BsInputs) -> Result<(f64, f64)> {
    let w = checked_total_vol(inp)?;
    Ok(d_pm_unchecked(inp, w))
}

/// `dBS/dsigma = e^x N'(d+) sqrt(tau)`.
pub fn bs_vega(inp: &BsInputs) -> Result<f64> {
    let (dp, _) = d_plus_minus(inp)?;
    Ok(inp.spot() * norm_pdf(dp) * inp.tau.sqrt())
}

/// `G = (d²/dx² - d/dx) BS = e^x N'(d+) / (sigma sqrt(tau))`.
pub fn g_function(inp: &BsInputs) -> Result<f64> {
    let w = checked_total_vol(inp)?;
    let (dp, _) = d_pm_unchecked(inp, w);
    Ok(inp.spot() * norm_pdf(dp) / w)
}

/// `H = dG/dx = G (1 - d+ / (sigma sqrt(tau)))`.
pub fn h_function(inp: &BsInputs) -> Result<f64> {
    let w = checked_total_vol(inp)?;
    let (dp, _) = d_pm_unchecked(inp, w);
    Ok(inp.spot() * norm_pdf(dp) / w * (1.0 - dp / w))
}

/// `dG/dk` with `k = ln K`: `e^x N'(d+) d+ / (sigma² tau)`.
pub fn dk_g(inp: &BsInputs) -> Result<f64> {
    let w = checked_total_vol(inp)?;
    let (dp, _) = d_pm_unchecked(inp, w);
    Ok(inp.spot() * norm_pdf(dp) * dp / (w * w))
}

/// `d²G/dk²`: `e^x N'(d+) (d+² - 1) / (sigma sqrt(tau))³`.
pub fn dkk_g(inp: &BsInputs) -> Result<f64> {
    let w = checked_total_vol(inp)?;
    let (dp, _) = d_pm_unchecked(inp, w);
    Ok(inp.spot() * norm_pdf(dp) * (dp * dp - 1.0) / (w * w * w))
}

/// `dBS/dk = -K e^{-r tau} N(d-)`.
pub fn dk_bs(inp: &BsInputs) -> Result<f64> {
    let w = checked_total_vol(inp)?;
    let (_, dm) = d_pm_unchecked(inp, w);
    Ok(-inp.discounted_strike() * norm_cdf(dm))
}

/// `d²BS/dk² = -K e^{-r tau} N(d-) + K e^{-r tau} N'(d-) / (sigma sqrt(tau))`.
pub fn dkk_bs(inp: &BsInputs) -> Result<f64> {
    let w = checked_total_vol(inp)?;
    let (_, dm) = d_pm_unchecked(inp, w);
    let kd = inp.discounted_strike();
    Ok(-kd * norm_cdf(dm) + kd * norm_pdf(dm) / w)
}

/// Constant-volatility forward-start call price `e^{x_t} BS(tau = T - s, x = 0, K = e^alpha)`.
///
/// The price does not depend on the time left until the start date.
pub fn forward_start_bs_price(
    x_t: f64,
    start: f64,
    maturity: f64,
    alpha: f64,
    vol: f64,
    rate: f64,
) -> Result<f64> {
    finite(start, "start")?;
    finite(maturity, "maturity")?;
    finite(alpha, "alpha")?;
    if start >= maturity {
        return Err(Error::InvalidInput(format!(
            "forward-start date {start} must precede maturity {maturity}"
        )));
    }
    let inp = BsInputs::new(maturity - start, 0.0, alpha.exp(), vol, rate)?;
    Ok(finite(x_t, "x_t")?.exp() * bs_call(&inp))
}

/// Result of an implied-volatility inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpliedVol {
    pub vol: f64,
    /// The target was at or below intrinsic value; `vol` is the boundary 0.
    pub at_intrinsic: bool,
    pub iterations: usize,
}

pub const MAX_IV_ITERATIONS: usize = 100;

/// Rational first guess of Corrado and Miller, or 0.2 when it is undefined.
fn corrado_miller_guess(price: f64, spot: f64, disc_strike: f64, tau: f64) -> f64 {
    let gap = spot - disc_strike;
    let a = price - 0.5 * gap;
    let disc = (a * a - gap * gap / std::f64::consts::PI).max(0.0);
    let w = SQRT_2PI / (spot + disc_strike) * (a + disc.sqrt());
    let vol = w / tau.sqrt();
    if vol.is_finite() && vol > 0.0 {
        vol
    } else {
        0.2
    }
}

/// Volatility `v >= 0` with `bs_call(v) = target`.
///
/// Newton iterations on the price, seeded by the Corrado–Miller guess and kept
/// inside a bracket that is updated every step; any Newton step leaving the
/// bracket is replaced by bisection.
pub fn implied_vol(target: f64, tau: f64, log_spot: f64, strike: f64, rate: f64) -> Result<ImpliedVol> {
    finite(target, "target_price")?;
    let inp = BsInputs::new(tau, log_spot, strike, 0.0, rate)?;
    if tau <= 0.0 {
        return Err(Error::InvalidInput("implied vol needs tau > 0".into()));
    }
    let spot = inp.spot();
    if target >= spot {
        return Err(Error::NoSolution { price: target, upper: spot });
    }
    if target <= inp.intrinsic() {
        return Ok(ImpliedVol { vol: 0.0, at_intrinsic: true, iterations: 0 });
    }

    let price_at = |v: f64| bs_call(&inp.with_vol(v));

    let mut lo = 0.0;
    let mut hi = 1.0 / tau.sqrt();
    let mut grow = 0;
    while price_at(hi) < target {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::NoConvergence { iterations: grow, lo, hi });
        }
    }

    let mut vol = corrado_miller_guess(target, spot, inp.discounted_strike(), tau);
    if !(vol > lo && vol < hi) {
        vol = 0.5 * (lo + hi);
    }
    let tol = 1e-12 * spot;
    for it in 1..=MAX_IV_ITERATIONS {
        let diff = price_at(vol) - target;
        if diff == 0.0 {
            return Ok(ImpliedVol { vol, at_intrinsic: false, iterations: it });
        }
        if diff > 0.0 {
            hi = vol;
        } else {
            lo = vol;
        }
        let vega = bs_vega(&inp.with_vol(vol)).unwrap_or(0.0);
        let mut next = vol - diff / vega;
        if !(next.is_finite() && next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - vol).abs();
        vol = next;
        if step <= 4.0 * f64::EPSILON * vol || hi - lo <= 4.0 * f64::EPSILON * hi {
            if (price_at(vol) - target).abs() <= tol {
                return Ok(ImpliedVol { vol, at_intrinsic: false, iterations: it });
            }
            break;
        }
    }
    if (price_at(vol) - target).abs() <= tol {
        return Ok(ImpliedVol { vol, at_intrinsic: false, iterations: MAX_IV_ITERATIONS });
    }
    Err(Error::NoConvergence { iterations: MAX_IV_ITERATIONS, lo, hi })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atm() -> BsInputs {
        BsInputs::new(1.0, 0.0, 1.0, 0.2, 0.0).unwrap()
    }

    #[test]
    fn zero_vol_gives_intrinsic() {
        assert_eq!(bs_call(&atm().with_vol(0.0)), 0.0);
        let itm = BsInputs::new(1.0, 0.1, 1.0, 0.0, 0.0).unwrap();
        assert!((bs_call(&itm) - (0.1f64.exp() - 1.0)).abs() < 1e-15);
        let expired = BsInputs::new(0.0, 0.2, 1.0, 0.3, 0.05).unwrap();
        assert!((bs_call(&expired) - (0.2f64.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn tiny_strike_gives_spot() {
        let inp = BsInputs::new(1.0, 0.0, 1e-300, 0.4, 0.0).unwrap();
        assert!((bs_call(&inp) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn construction_rejects_bad_inputs() {
        assert!(BsInputs::new(-1.0, 0.0, 1.0, 0.2, 0.0).is_err());
        assert!(BsInputs::new(1.0, 0.0, 0.0, 0.2, 0.0).is_err());
        assert!(BsInputs::new(1.0, 0.0, 1.0, -0.2, 0.0).is_err());
        assert_eq!(
            BsInputs::new(1.0, f64::NAN, 1.0, 0.2, 0.0),
            Err(Error::NonFinite("log_spot"))
        );
    }

    #[test]
    fn d_symmetry_at_the_money_forward() {
        let (tau, r, v) = (0.7, 0.03, 0.25);
        let inp = BsInputs::new(tau, -r * tau, 1.0, v, r).unwrap();
        let (dp, dm) = d_plus_minus(&inp).unwrap();
        assert!((dp - 0.5 * v * tau.sqrt()).abs() < 1e-15);
        assert!((dp + dm).abs() < 1e-15);
        assert_eq!(d_plus_minus(&inp.with_vol(0.0)), Err(Error::DegenerateVol));
    }

    #[test]
    fn vega_plug_in() {
        let vega = bs_vega(&atm()).unwrap();
        assert!((vega - norm_pdf(0.1)).abs() < 1e-16);
    }

    #[test]
    fn g_at_the_money_forward_and_positive() {
        let (tau, v) = (0.1, 0.3);
        let inp = BsInputs::new(tau, 0.0, 1.0, v, 0.0).unwrap();
        let w = v * tau.sqrt();
        let g = g_function(&inp).unwrap();
        assert!((g - norm_pdf(0.5 * w) / w).abs() < 1e-14);
        for k in [-0.3, -0.05, 0.0, 0.07, 0.4] {
            assert!(g_function(&inp.with_strike(f64::exp(k))).unwrap() > 0.0);
        }
    }

    #[test]
    fn atm_strike_derivative_identity() {
        for &(tau, r, v) in &[(0.1, 0.01, 0.2), (1.0, 0.05, 0.6), (0.01, 0.0, 0.05)] {
            let inp = BsInputs::new(tau, 0.0, f64::exp(r * tau), v, r).unwrap();
            let w = v * f64::sqrt(tau);
            let price = bs_call(&inp);
            assert!((price - (norm_cdf(0.5 * w) - norm_cdf(-0.5 * w))).abs() < 1e-15);
            assert!((dk_bs(&inp).unwrap() - 0.5 * (price - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_start_price_properties() {
        let r = 0.04;
        let p = forward_start_bs_price(0.0, 0.5, 0.75, r * 0.25, 0.0, r).unwrap();
        assert!(p.abs() < 1e-16);
        let base = forward_start_bs_price(0.0, 0.5, 0.75, 0.02, 0.3, r).unwrap();
        let shifted = forward_start_bs_price(0.4, 0.5, 0.75, 0.02, 0.3, r).unwrap();
        assert!((shifted - base * 0.4f64.exp()).abs() < 1e-14);
        assert!(forward_start_bs_price(0.0, 0.75, 0.75, 0.0, 0.3, r).is_err());
    }

    #[test]
    fn implied_vol_round_trip_and_boundaries() {
        let inp = BsInputs::new(0.25, 0.0, 1.0, 0.2, 0.0).unwrap();
        let iv = implied_vol(bs_call(&inp), 0.25, 0.0, 1.0, 0.0).unwrap();
        assert!((iv.vol - 0.2).abs() < 1e-10);
        assert!(!iv.at_intrinsic);

        let itm = BsInputs::new(0.25, 0.1, 1.0, 0.0, 0.0).unwrap();
        let at = implied_vol(itm.intrinsic(), 0.25, 0.1, 1.0, 0.0).unwrap();
        assert!(at.at_intrinsic);
        assert_eq!(at.vol, 0.0);

        assert!(matches!(
            implied_vol(1.0, 0.25, 0.0, 1.0, 0.0),
            Err(Error::NoSolution { .. })
        ));
    }

    #[test]
    fn implied_vol_tiny_maturity() {
        for &tau in &[1e-6, 1e-4, 0.025] {
            let inp = BsInputs::new(tau, 0.0, f64::exp(0.01 * tau), 0.35, 0.01).unwrap();
            let iv = implied_vol(bs_call(&inp), tau, 0.0, inp.strike, 0.01).unwrap();
            assert!((iv.vol - 0.35).abs() < 1e-9, "tau {tau}: {}", iv.vol);
        }
    }
}
