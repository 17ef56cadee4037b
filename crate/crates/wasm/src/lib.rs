//! Browser bindings: a forward smile slice, the short-maturity limits and the
//! ATM level against the remaining maturity, all for an absolute-value
//! Stein-Stein model. Inputs and outputs are plain JS objects.

use fwdsmile::asymptotics;
use fwdsmile::forward_smile::{self, atm_alpha};
use fwdsmile::mc_engine::{simulate, InnerConfig, McConfig, SimGrid};
use fwdsmile::models::{ModelSpec, OuParams, VolFunction, VolModel};
use fwdsmile::ContractSpec;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Model and budget shared by every export. Missing fields take the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default)]
pub struct Params {
    pub kappa: f64,
    pub m: f64,
    pub lambda: f64,
    pub y0: f64,
    pub rho: f64,
    pub rate: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Forward-start date; valuation is at time 0.
    pub s: f64,
    pub n_paths: u64,
    pub steps_per_year: f64,
    pub seed: u64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            m: 0.2,
            lambda: 0.25,
            y0: 0.25,
            rho: -0.5,
            rate: 0.01,
            sigma_min: 0.01,
            sigma_max: 2.0,
            s: 0.5,
            n_paths: 20_000,
            steps_per_year: 200.0,
            seed: 1,
        }
    }
}

impl Params {
    pub fn model(&self) -> Result<ModelSpec, String> {
        let ou = OuParams::new(self.kappa, self.m, self.lambda, self.y0).map_err(|e| e.to_string())?;
        let function = VolFunction::AbsClamped { sigma_min: self.sigma_min, sigma_max: self.sigma_max };
        ModelSpec::new(self.rate, self.rho, 0.0, VolModel::SteinStein { ou, function }).map_err(|e| e.to_string())
    }

    pub fn mc(&self) -> McConfig {
        McConfig {
            n_paths: self.n_paths,
            steps_per_year: self.steps_per_year,
            seed: self.seed,
            inner: InnerConfig { u_nodes: 20, sub_paths: 500, outer_paths: 200 },
            ..McConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmileCurve {
    pub alpha: Vec<f64>,
    /// `NaN` where the price sat at its no-arbitrage bound.
    pub vol: Vec<f64>,
    pub vol_se: Vec<f64>,
}

/// Forward implied vols at `n` log-moneyness points spanning `alpha* ± width`.
pub fn smile_curve(p: &Params, gap: f64, width: f64, n: usize) -> Result<SmileCurve, String> {
    let model = p.model()?;
    let maturity = p.s + gap;
    let a0 = atm_alpha(p.s, maturity, p.rate);
    let n = n.max(2);
    let alpha: Vec<f64> = (0..n).map(|i| a0 - width + 2.0 * width * i as f64 / (n - 1) as f64).collect();
    let grid = SimGrid::new(0.0, &[p.s, maturity], p.steps_per_year).map_err(|e| e.to_string())?;
    let batch = simulate(&model, &grid, p.n_paths, p.seed).map_err(|e| e.to_string())?;
    let contract = ContractSpec::new(0.0, p.s, maturity, a0).map_err(|e| e.to_string())?;
    let points = forward_smile::smile_slice(&batch, &contract, &alpha).map_err(|e| e.to_string())?;
    let (vol, vol_se) = points
        .into_iter()
        .map(|r| r.map(|q| (q.vol, q.vol_se)).unwrap_or((f64::NAN, f64::NAN)))
        .unzip();
    Ok(SmileCurve { alpha, vol, vol_se })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Limits {
    pub level: f64,
    pub level_se: f64,
    pub skew: f64,
    pub skew_se: f64,
    pub scaled_curvature: f64,
    pub scaled_curvature_se: f64,
}

/// Limits of the ATM level, skew and scaled curvature as the gap goes to zero.
pub fn limit_values(p: &Params) -> Result<Limits, String> {
    let r = asymptotics::limits(&p.model()?, 0.0, p.s, &p.mc()).map_err(|e| e.to_string())?;
    Ok(Limits {
        level: r.level.value,
        level_se: r.level.std_error,
        skew: r.skew.value,
        skew_se: r.skew.std_error,
        scaled_curvature: r.curvature.total.value,
        scaled_curvature_se: r.curvature.total.std_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelCurve {
    pub gap: Vec<f64>,
    pub level: Vec<f64>,
    pub level_se: Vec<f64>,
    pub extrapolated: f64,
    pub extrapolated_se: f64,
}

/// ATM forward vol at each gap (strictly decreasing) with its extrapolation.
pub fn level_curve(p: &Params, gaps: &[f64]) -> Result<LevelCurve, String> {
    let study = forward_smile::convergence_study(&p.model()?, 0.0, p.s, gaps, &p.mc()).map_err(|e| e.to_string())?;
    Ok(LevelCurve {
        gap: study.reports.iter().map(|r| r.gap).collect(),
        level: study.reports.iter().map(|r| r.level).collect(),
        level_se: study.reports.iter().map(|r| r.level_se).collect(),
        extrapolated: study.level.value,
        extrapolated_se: study.level.se,
    })
}

fn params(v: JsValue) -> Result<Params, JsError> {
    if v.is_undefined() || v.is_null() {
        return Ok(Params::default());
    }
    serde_wasm_bindgen::from_value(v).map_err(|e| JsError::new(&e.to_string()))
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<JsValue, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_wasm_bindgen::to_value(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn smile(params_js: JsValue, gap: f64, width: f64, n: usize) -> Result<JsValue, JsError> {
    to_js(smile_curve(&params(params_js)?, gap, width, n))
}

#[wasm_bindgen]
pub fn limits(params_js: JsValue) -> Result<JsValue, JsError> {
    to_js(limit_values(&params(params_js)?))
}

#[wasm_bindgen(js_name = levelCurve)]
pub fn level_curve_js(params_js: JsValue, gaps: Vec<f64>) -> Result<JsValue, JsError> {
    to_js(level_curve(&params(params_js)?, &gaps))
}
