//! Volatility models: constant volatility and the extended Stein–Stein family
//! `sigma_t = f(Y_t)` driven by an Ornstein–Uhlenbeck factor
//! `dY = kappa (m - Y) dt + lambda dW`.

use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};

/// Parameters of the Ornstein–Uhlenbeck volatility factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuParams {
    pub kappa: f64,
    pub m: f64,
    pub lambda: f64,
    pub y0: f64,
}

/// `(1 - e^{-a h}) / a`, continuous at `a = 0`.
fn decay_integral(a: f64, h: f64) -> f64 {
    if a == 0.0 {
        h
    } else {
        -(-a * h).exp_m1() / a
    }
}

fn check_order(t: f64, s: f64) -> Result<()> {
    finite(t, "t")?;
    finite(s, "s")?;
    if s < t {
        return Err(Error::InvalidInput(format!("need s >= t, got t = {t}, s = {s}")));
    }
    Ok(())
}

impl OuParams {
    /// `kappa` and `lambda` may be zero (driftless / deterministic factor).
    pub fn new(kappa: f64, m: f64, lambda: f64, y0: f64) -> Result<Self> {
        finite(kappa, "kappa")?;
        finite(m, "m")?;
        finite(lambda, "lambda")?;
        finite(y0, "y0")?;
        if kappa < 0.0 || lambda < 0.0 {
            return Err(Error::InvalidInput(format!(
                "kappa and lambda must be non-negative, got {kappa} and {lambda}"
            )));
        }
        Ok(Self { kappa, m, lambda, y0 })
    }

    /// `g(t, s) = y e^{-kappa (s-t)} + m (1 - e^{-kappa (s-t)})`, the mean of
    /// `Y_s` given `Y_t = y`.
    pub fn mean(&self, y: f64, t: f64, s: f64) -> Result<f64> {
        check_order(t, s)?;
        Ok(self.mean_unchecked(y, s - t))
    }

    pub(crate) fn mean_unchecked(&self, y: f64, h: f64) -> f64 {
        let decay = (-self.kappa * h).exp();
        y * decay + self.m * (1.0 - decay)
    }

    /// Variance of `Y_s` given `Y_t`: `lambda² (1 - e^{-2 kappa (s-t)}) / (2 kappa)`.
    pub fn variance(&self, t: f64, s: f64) -> Result<f64> {
        check_order(t, s)?;
        Ok(self.variance_unchecked(s - t))
    }

    pub(crate) fn variance_unchecked(&self, h: f64) -> f64 {
        self.lambda * self.lambda * decay_integral(2.0 * self.kappa, h)
    }

    pub fn stationary_variance(&self) -> f64 {
        if self.kappa > 0.0 {
            self.lambda * self.lambda / (2.0 * self.kappa)
        } else {
            f64::INFINITY
        }
    }

    /// Malliavin derivative `D_u Y_s = lambda e^{-kappa (s-u)}` (deterministic).
    pub fn malliavin_d_y(&self, u: f64, s: f64) -> Result<f64> {
        check_order(u, s)?;
        Ok(self.d_y_unchecked(s - u))
    }

    #[inline]
    pub(crate) fn d_y_unchecked(&self, h: f64) -> f64 {
        self.lambda * (-self.kappa * h).exp()
    }
}

/// The map from the factor to the instantaneous volatility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "VolFunctionRepr", into = "VolFunctionRepr")]
pub enum VolFunction {
    /// `f(y) = y`. Unbounded below, so the model leaves the regime where the
    /// short-maturity limits are guaranteed; see [`VolFunction::is_bounded`].
    Identity,
    /// `f(y) = clamp(|y|, sigma_min, sigma_max)`.
    AbsClamped { sigma_min: f64, sigma_max: f64 },
    /// `f(y) = clamp(sqrt(y² + eps²), sigma_min, sigma_max)`.
    SmoothedAbs { eps: f64, sigma_min: f64, sigma_max: f64 },
}

// Serialized form. A unit variant of an internally tagged enum would accept
// stray keys, so the identity map is an empty struct here.
#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum VolFunctionRepr {
    Identity {},
    AbsClamped { sigma_min: f64, sigma_max: f64 },
    SmoothedAbs { eps: f64, sigma_min: f64, sigma_max: f64 },
}

impl From<VolFunctionRepr> for VolFunction {
    fn from(r: VolFunctionRepr) -> Self {
        match r {
            VolFunctionRepr::Identity {} => VolFunction::Identity,
            VolFunctionRepr::AbsClamped { sigma_min, sigma_max } => VolFunction::AbsClamped { sigma_min, sigma_max },
            VolFunctionRepr::SmoothedAbs { eps, sigma_min, sigma_max } => {
                VolFunction::SmoothedAbs { eps, sigma_min, sigma_max }
            }
        }
    }
}

impl From<VolFunction> for VolFunctionRepr {
    fn from(f: VolFunction) -> Self {
        match f {
            VolFunction::Identity => VolFunctionRepr::Identity {},
            VolFunction::AbsClamped { sigma_min, sigma_max } => VolFunctionRepr::AbsClamped { sigma_min, sigma_max },
            VolFunction::SmoothedAbs { eps, sigma_min, sigma_max } => {
                VolFunctionRepr::SmoothedAbs { eps, sigma_min, sigma_max }
            }
        }
    }
}

impl Default for VolFunction {
    fn default() -> Self {
        VolFunction::SmoothedAbs { eps: 1e-3, sigma_min: 0.01, sigma_max: 2.0 }
    }
}

/// Value of `f'(y)` and whether `y` sat exactly on a clamp corner, where the
/// right derivative is returned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slope {
    pub value: f64,
    pub corner: bool,
}

impl VolFunction {
    pub fn validate(&self) -> Result<()> {
        let check = |lo: f64, hi: f64| {
            if lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!(
                    "need 0 < sigma_min <= sigma_max, got [{lo}, {hi}]"
                )))
            }
        };
        match *self {
            VolFunction::Identity => Ok(()),
            VolFunction::AbsClamped { sigma_min, sigma_max } => check(sigma_min, sigma_max),
            VolFunction::SmoothedAbs { eps, sigma_min, sigma_max } => {
                if !(eps.is_finite() && eps >= 0.0) {
                    return Err(Error::InvalidInput(format!("eps must be >= 0, got {eps}")));
                }
                check(sigma_min, sigma_max)
            }
        }
    }

    /// Whether `f` is bounded away from 0 and infinity.
    pub fn is_bounded(&self) -> bool {
        !matches!(self, VolFunction::Identity)
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            VolFunction::Identity => None,
            VolFunction::AbsClamped { sigma_min, sigma_max }
            | VolFunction::SmoothedAbs { sigma_min, sigma_max, .. } => Some((sigma_min, sigma_max)),
        }
    }

    #[inline]
    pub fn value(&self, y: f64) -> f64 {
        match *self {
            VolFunction::Identity => y,
            VolFunction::AbsClamped { sigma_min, sigma_max } => y.abs().clamp(sigma_min, sigma_max),
            VolFunction::SmoothedAbs { eps, sigma_min, sigma_max } => {
                y.hypot(eps).clamp(sigma_min, sigma_max)
            }
        }
    }

    #[inline]
    pub fn slope(&self, y: f64) -> Slope {
        // g(y) is the unclamped map and g' its derivative; the clamp is active
        // where g leaves (lo, hi). On a corner the right derivative is kept.
        let clamped = |g: f64, dg: f64, lo: f64, hi: f64| {
            if g > lo && g < hi {
                Slope { value: dg, corner: false }
            } else if g == lo {
                Slope { value: if dg > 0.0 { dg } else { 0.0 }, corner: true }
            } else if g == hi {
                Slope { value: if dg < 0.0 { dg } else { 0.0 }, corner: true }
            } else {
                Slope { value: 0.0, corner: false }
            }
        };
        match *self {
            VolFunction::Identity => Slope { value: 1.0, corner: false },
            VolFunction::AbsClamped { sigma_min, sigma_max } => {
                let dg = if y >= 0.0 { 1.0 } else { -1.0 };
                clamped(y.abs(), dg, sigma_min, sigma_max)
            }
            VolFunction::SmoothedAbs { eps, sigma_min, sigma_max } => {
                let g = y.hypot(eps);
                let dg = if g > 0.0 { y / g } else { 1.0 };
                clamped(g, dg, sigma_min, sigma_max)
            }
        }
    }

    #[inline]
    pub fn derivative(&self, y: f64) -> f64 {
        self.slope(y).value
    }
}

/// The volatility dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VolModel {
    Constant { sigma: f64 },
    SteinStein { ou: OuParams, function: VolFunction },
}

/// Market and model: `dX = (r - sigma²/2) dt + sigma (rho dW + sqrt(1 - rho²) dB)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub rate: f64,
    pub rho: f64,
    pub x0: f64,
    pub vol: VolModel,
}

impl ModelSpec {
    pub fn new(rate: f64, rho: f64, x0: f64, vol: VolModel) -> Result<Self> {
        let spec = Self { rate, rho, x0, vol };
        spec.validate()?;
        Ok(spec)
    }

    pub fn constant(sigma: f64, rate: f64, rho: f64, x0: f64) -> Result<Self> {
        Self::new(rate, rho, x0, VolModel::Constant { sigma })
    }

    pub fn stein_stein(ou: OuParams, function: VolFunction, rate: f64, rho: f64, x0: f64) -> Result<Self> {
        Self::new(rate, rho, x0, VolModel::SteinStein { ou, function })
    }

    pub fn validate(&self) -> Result<()> {
        finite(self.rate, "rate")?;
        finite(self.rho, "rho")?;
        finite(self.x0, "x0")?;
        if self.rho.abs() > 1.0 {
            return Err(Error::InvalidInput(format!("|rho| must be <= 1, got {}", self.rho)));
        }
        match self.vol {
            VolModel::Constant { sigma } => {
                finite(sigma, "sigma")?;
                if sigma <= 0.0 {
                    return Err(Error::InvalidInput(format!("constant vol must be > 0, got {sigma}")));
                }
            }
            VolModel::SteinStein { ou, function } => {
                OuParams::new(ou.kappa, ou.m, ou.lambda, ou.y0)?;
                function.validate()?;
            }
        }
        Ok(())
    }

    pub fn ou(&self) -> Option<&OuParams> {
        match &self.vol {
            VolModel::SteinStein { ou, .. } => Some(ou),
            VolModel::Constant { .. } => None,
        }
    }

    /// Initial factor value (0 for constant vol, where the factor is unused).
    pub fn y0(&self) -> f64 {
        self.ou().map_or(0.0, |ou| ou.y0)
    }

    /// `sigma = f(y)`.
    #[inline]
    pub fn sigma(&self, y: f64) -> f64 {
        match &self.vol {
            VolModel::Constant { sigma } => *sigma,
            VolModel::SteinStein { function, .. } => function.value(y),
        }
    }

    /// `f'(y)`, 0 for constant vol.
    #[inline]
    pub fn sigma_slope(&self, y: f64) -> Slope {
        match &self.vol {
            VolModel::Constant { .. } => Slope { value: 0.0, corner: false },
            VolModel::SteinStein { function, .. } => function.slope(y),
        }
    }

    /// `D_u sigma_s² = 2 f(Y_s) f'(Y_s) lambda e^{-kappa (s-u)}` for `u <= s`.
    pub fn malliavin_d_sigma_sq(&self, y_s: f64, u: f64, s: f64) -> Result<f64> {
        check_order(u, s)?;
        Ok(self.d_sigma_sq_unchecked(y_s, s - u))
    }

    #[inline]
    pub(crate) fn d_sigma_sq_unchecked(&self, y_s: f64, h: f64) -> f64 {
        match &self.vol {
            VolModel::Constant { .. } => 0.0,
            VolModel::SteinStein { ou, function } => {
                2.0 * function.value(y_s) * function.derivative(y_s) * ou.d_y_unchecked(h)
            }
        }
    }

    /// `sigma_bar_s² = lim_{u -> s} D_u sigma_s² = 2 lambda f(Y_s) f'(Y_s)`.
    pub fn sigma_bar_sq(&self, y_s: f64) -> f64 {
        self.d_sigma_sq_unchecked(y_s, 0.0)
    }

    /// `sigma_bar_s² / sigma_s² = 2 lambda f'(Y_s) / f(Y_s)`.
    pub fn skew_quotient(&self, y_s: f64) -> f64 {
        match &self.vol {
            VolModel::Constant { .. } => 0.0,
            VolModel::SteinStein { ou, function } => {
                2.0 * ou.lambda * function.derivative(y_s) / function.value(y_s)
            }
        }
    }

    /// `D_u sigma_s² / sigma_s = 2 lambda e^{-kappa h} f'(Y_s)` with `h = s - u`.
    #[inline]
    pub fn d_sigma_sq_over_sigma(&self, y_s: f64, h: f64) -> f64 {
        match &self.vol {
            VolModel::Constant { .. } => 0.0,
            VolModel::SteinStein { ou, function } => 2.0 * ou.d_y_unchecked(h) * function.derivative(y_s),
        }
    }
}
