//! Short-maturity limits of the ATM forward smile.
//!
//! With `Z_u = e^{X_u - X_t - r(u-t)}` and the correction
//! `E_{t,s} = e^{-X_t}/2 E_t[ sigma_s^{-1} int_t^s e^{-r(u-t)} e^{X_u} sigma_u D_u sigma_s² du ]`:
//!
//! * level:     `lim I(alpha*)             = E_t[sigma_s] + rho E_{t,s}`
//! * skew:      `lim dI/dalpha(alpha*)      = rho e^{-r(s-t)} / (4 e^{X_t}) E_t[e^{X_s} sigma_bar_s² / sigma_s²]`
//! * curvature: `lim (T-s) d²I/dalpha²(alpha*) = term1 + 1/E_t[sigma_s] - 1/(E_t[sigma_s] + rho E_{t,s}) - term4`
//!
//! where `term1 = 1/4 E_t[ int_t^s E_u[D_u sigma_s² / sigma_s]² / E_u[sigma_s]³ du ]` (the square
//! of the conditional expectation) and
//! `term4 = rho/2 e^{-X_t} E_t[ sigma_s^{-3} int_t^s e^{-r(u-t)} e^{X_u} sigma_u D_u sigma_s² du ]`.
//!
//! Outer expectations are Monte Carlo averages over joint `(X, Y)` paths on
//! `[t, s]`; time integrals use the trapezoidal rule on the simulation grid.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward_smile::{convergence_study, ConvergenceStudy};
use crate::mc_engine::{simulate_with, InnerConfig, McConfig, Path, SimGrid};
use crate::models::{ModelSpec, VolFunction, VolModel};
use crate::rng::{self, derive_seed, Domain};
use crate::stats::{chunked_reduce, z_score, Accumulator, CovAccumulator, McEstimate, ValueSe};

/// Samples with `|sigma_s|` below this are excluded under the identity map.
pub const DIVISION_THRESHOLD: f64 = 1e-4;
/// Largest tolerated fraction of excluded samples.
pub const MAX_EXCLUDED_FRACTION: f64 = 1e-4;

/// The correlation correction `E_{t,s}`, estimated through the specialized
/// form `lambda e^{-X_t} E_t[f'(Y_s) int_t^s e^{-r(u-t)} e^{X_u} f(Y_u) e^{-kappa(s-u)} du]`
/// and through the general Malliavin form on the same paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionTerm {
    pub value: McEstimate,
    pub general: McEstimate,
    /// Paths excluded by the division guard.
    pub excluded: u64,
}

impl CorrectionTerm {
    /// z-score between the two forms with independent-error combination.
    pub fn dual_form_z(&self) -> f64 {
        self.value.z_score(&self.general)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBreakdown {
    pub total: McEstimate,
    pub term1: McEstimate,
    pub term2: McEstimate,
    pub term3: McEstimate,
    /// Entered with a minus sign: `total = term1 + term2 - term3 - term4`.
    pub term4: McEstimate,
    /// `rho E_{t,s} E_t[f(Y_s)^{-2}]`, the rewritten fourth term for the
    /// Stein–Stein family; a diagnostic only.
    pub term4_specialized: McEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub level: McEstimate,
    pub skew: McEstimate,
    pub curvature: CurvatureBreakdown,
    pub correction: CorrectionTerm,
    /// `E_t[sigma_s]`.
    pub mean_vol: McEstimate,
    /// Evaluations of `f'(Y_s)` on a clamp corner.
    pub corner_hits: u64,
}

/// How the inner conditional expectations of the first curvature term are computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerMethod {
    /// Gaussian closed forms for the identity map, sub-simulation otherwise.
    #[default]
    Auto,
    SubSimulation,
}

fn check_dates(t: f64, s: f64) -> Result<()> {
    if !(t.is_finite() && s.is_finite() && t < s) {
        return Err(Error::InvalidInput(format!("need t < s, got t = {t}, s = {s}")));
    }
    Ok(())
}

fn guard_exclusions(excluded: u64, total: u64) -> Result<()> {
    if excluded as f64 > MAX_EXCLUDED_FRACTION * total as f64 {
        Err(Error::DivisionHazard { excluded, total })
    } else {
        Ok(())
    }
}

const N_JOINT: usize = 6;
// Per-path quantities of the joint pass.
const SIGMA_S: usize = 0;
const E_SPECIAL: usize = 1;
const E_GENERAL: usize = 2;
const SKEW: usize = 3;
const TERM4: usize = 4;
const INV_SIGMA_SQ: usize = 5;

#[derive(Default)]
struct JointScratch {
    acc: CovAccumulator<N_JOINT>,
    excluded: u64,
    corner_hits: u64,
    path: Path,
}

struct JointPass {
    acc: CovAccumulator<N_JOINT>,
    excluded: u64,
    corner_hits: u64,
    seed: u64,
}

fn joint_pass(model: &ModelSpec, t: f64, s: f64, mc: &McConfig) -> Result<JointPass> {
    let grid = SimGrid::new(t, &[s], mc.steps_per_year)?;
    let seed = derive_seed(mc.seed, 0x4c49_4d49_5453);
    let batch = simulate_with(model, &grid, mc.n_paths, seed, mc.scheme)?;
    let nodes = grid.nodes();
    let s_i = grid.index_of(s)?;
    let identity = matches!(model.vol, VolModel::SteinStein { function: VolFunction::Identity, .. });
    let (lambda, kappa) = model.ou().map_or((0.0, 0.0), |ou| (ou.lambda, ou.kappa));
    let rate = model.rate;
    let scale_t = (-model.x0).exp();

    let out = chunked_reduce(
        mc.n_paths,
        JointScratch::default,
        |sc: &mut JointScratch, i| {
            batch.path_into(i, &mut sc.path)?;
            let p = &sc.path;
            let y_s = p.y[s_i];
            let sigma_s = p.sigma[s_i];
            if identity && sigma_s.abs() < DIVISION_THRESHOLD {
                sc.excluded += 1;
                return Ok(());
            }
            let slope = model.sigma_slope(y_s);
            if slope.corner {
                sc.corner_hits += 1;
            }

            // Trapezoid of e^{-r(u-t)} e^{X_u} f(Y_u) e^{-kappa(s-u)} and of
            // e^{-r(u-t)} e^{X_u} sigma_u D_u sigma_s² over [t, s].
            let mut special = 0.0;
            let mut general = 0.0;
            let mut prev: Option<(f64, f64)> = None;
            for j in 0..=s_i {
                let w = (-rate * (nodes[j] - t)).exp() * p.x[j].exp() * p.sigma[j];
                let a = w * (-kappa * (s - nodes[j])).exp();
                let b = w * model.malliavin_d_sigma_sq(y_s, nodes[j], s)?;
                if let Some((pa, pb)) = prev {
                    let dt = nodes[j] - nodes[j - 1];
                    special += 0.5 * dt * (pa + a);
                    general += 0.5 * dt * (pb + b);
                }
                prev = Some((a, b));
            }
            let e_special = lambda * scale_t * slope.value * special;
            let e_general = 0.5 * scale_t * general / sigma_s;
            let skew = p.x[s_i].exp() * model.skew_quotient(y_s);
            let term4 = general / (sigma_s * sigma_s * sigma_s);
            sc.acc.push(&[sigma_s, e_special, e_general, skew, term4, 1.0 / (sigma_s * sigma_s)]);
            Ok(())
        },
        |a: &mut JointScratch, b: &JointScratch| {
            a.acc.merge(&b.acc);
            a.excluded += b.excluded;
            a.corner_hits += b.corner_hits;
        },
    )?;
    guard_exclusions(out.excluded, mc.n_paths)?;
    Ok(JointPass { acc: out.acc, excluded: out.excluded, corner_hits: out.corner_hits, seed })
}

/// `E_{t,s}` in both forms. Exactly 0 when `t = s`.
pub fn correction_e(model: &ModelSpec, t: f64, s: f64, mc: &McConfig) -> Result<CorrectionTerm> {
    if t == s && t.is_finite() {
        let zero = McEstimate::exact(0.0, 0, mc.seed);
        return Ok(CorrectionTerm { value: zero, general: zero, excluded: 0 });
    }
    check_dates(t, s)?;
    mc.validate()?;
    let pass = joint_pass(model, t, s, mc)?;
    correction_from(&pass)
}

fn correction_from(pass: &JointPass) -> Result<CorrectionTerm> {
    Ok(CorrectionTerm {
        value: pass.acc.marginal(E_SPECIAL, pass.seed)?,
        general: pass.acc.marginal(E_GENERAL, pass.seed)?,
        excluded: pass.excluded,
    })
}

/// Smallest nonzero `s - u` node of the term-1 grid, relative to `s - t`.
pub const TERM1_GRADING: f64 = 1e-6;

/// Distances `h = s - u` of the term-1 quadrature nodes: `n - 1` geometric
/// nodes from `s - t` down to `(s - t) TERM1_GRADING`, then `0`.
pub fn term1_offsets(t: f64, s: f64, n: usize) -> Vec<f64> {
    let span = s - t;
    let mut h: Vec<f64> = (0..n - 1)
        .map(|j| span * TERM1_GRADING.powf(j as f64 / (n - 2).max(1) as f64))
        .collect();
    h.push(0.0);
    h
}

/// Integral over `[h2, h1]` of the `a + b / h` interpolant through two nodes.
fn two_point_panel(h: [f64; 2], v: [f64; 2]) -> f64 {
    let b = (v[0] - v[1]) / (1.0 / h[0] - 1.0 / h[1]);
    let a = v[0] - b / h[0];
    a * (h[0] - h[1]) + b * (h[0] / h[1]).ln()
}

/// Integral over `[h3, h1]` of the `a + b / h + c h` interpolant through three nodes.
fn three_point_panel(h: [f64; 3], v: [f64; 3]) -> f64 {
    let rows = h.map(|x| [1.0, 1.0 / x, x]);
    let det3 = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(rows);
    let coef = |k: usize| {
        let mut m = rows;
        for i in 0..3 {
            m[i][k] = v[i];
        }
        det3(m) / d
    };
    let (a, b, c) = (coef(0), coef(1), coef(2));
    a * (h[0] - h[2]) + b * (h[0] / h[2]).ln() + 0.5 * c * (h[0] * h[0] - h[2] * h[2])
}

/// `int_t^s v(u) du` from values on [`term1_offsets`]. Pairs of geometric
/// intervals use the `a + b / h + c h` interpolant (exact for smooth and
/// `1/h`-type integrands), a leftover single interval uses `a + b / h`, and
/// the last interval down to `h = 0` uses the trapezoid.
fn graded_integral(h: &[f64], v: &[f64]) -> f64 {
    let n = h.len();
    let geometric = n - 1;
    let mut total = 0.5 * h[n - 2] * (v[n - 2] + v[n - 1]);
    let mut j = 0;
    while j + 2 < geometric {
        total += three_point_panel([h[j], h[j + 1], h[j + 2]], [v[j], v[j + 1], v[j + 2]]);
        j += 2;
    }
    if j + 1 < geometric {
        total += two_point_panel([h[j], h[j + 1]], [v[j], v[j + 1]]);
    }
    total
}

/// Nested estimate of the first curvature term,
/// `lambda² E_t[ int_t^s e^{-2 kappa (s-u)} E_u[f'(Y_s)]² / E_u[f(Y_s)]³ du ]`.
///
/// Outer paths sample the factor exactly on `inner.u_nodes` dates graded
/// towards `s` (the `u`-integrand is log-singular there when `sigma` can
/// approach zero). From each state the inner expectations use
/// `inner.sub_paths` exact draws of `Y_s | Y_u` (keys `(seed, outer, u-node)`),
/// or the Gaussian closed forms `E_u[f'] = 1`, `E_u[f] = g(u, s)` for the
/// identity map under [`InnerMethod::Auto`].
pub fn curvature_term1(
    model: &ModelSpec,
    t: f64,
    s: f64,
    inner: &InnerConfig,
    seed: u64,
    method: InnerMethod,
) -> Result<McEstimate> {
    check_dates(t, s)?;
    let (ou, function) = match model.vol {
        VolModel::Constant { .. } => return Ok(McEstimate::exact(0.0, 0, seed)),
        VolModel::SteinStein { ou, function } => (ou, function),
    };
    if inner.u_nodes < 3 || inner.sub_paths == 0 || inner.outer_paths == 0 {
        return Err(Error::InvalidInput("inner budget needs >= 3 u-nodes and positive counts".into()));
    }
    let closed_form = method == InnerMethod::Auto && function == VolFunction::Identity;
    let identity = function == VolFunction::Identity;
    let h = term1_offsets(t, s, inner.u_nodes);
    let n_u = h.len();
    let lambda_sq = ou.lambda * ou.lambda;
    // Exact transition from the node at h[j - 1] to h[j], and from each node to s.
    let step_sd: Vec<f64> = (0..n_u)
        .map(|j| if j == 0 { 0.0 } else { ou.variance_unchecked(h[j - 1] - h[j]).sqrt() })
        .collect();
    let to_s_sd: Vec<f64> = h.iter().map(|&hj| ou.variance_unchecked(hj).sqrt()).collect();

    #[derive(Default)]
    struct Acc {
        acc: Accumulator,
        excluded: u64,
        values: Vec<f64>,
    }

    let out = chunked_reduce(
        inner.outer_paths,
        Acc::default,
        |a: &mut Acc, i| {
            let mut rng = rng::stream(seed, Domain::Outer, i);
            let mut y = ou.y0;
            a.values.clear();
            for j in 0..n_u {
                if j > 0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    y = ou.mean_unchecked(y, h[j - 1] - h[j]) + step_sd[j] * z;
                }
                let (m1, m0) = if closed_form {
                    (1.0, ou.mean_unchecked(y, h[j]))
                } else if h[j] == 0.0 {
                    (function.derivative(y), function.value(y))
                } else {
                    let mean = ou.mean_unchecked(y, h[j]);
                    let mut irng = rng::nested(seed, Domain::Inner, &[i, j as u64]);
                    let (mut s1, mut s0) = (0.0, 0.0);
                    for _ in 0..inner.sub_paths {
                        let z: f64 = StandardNormal.sample(&mut irng);
                        let ys = mean + to_s_sd[j] * z;
                        s1 += function.derivative(ys);
                        s0 += function.value(ys);
                    }
                    let n = inner.sub_paths as f64;
                    (s1 / n, s0 / n)
                };
                if identity && m0.abs() < DIVISION_THRESHOLD {
                    a.excluded += 1;
                    return Ok(());
                }
                a.values.push(lambda_sq * (-2.0 * ou.kappa * h[j]).exp() * m1 * m1 / (m0 * m0 * m0));
            }
            let integral = graded_integral(&h, &a.values);
            a.acc.push(integral);
            Ok(())
        },
        |a: &mut Acc, b: &Acc| {
            a.acc.merge(&b.acc);
            a.excluded += b.excluded;
        },
    )?;
    guard_exclusions(out.excluded, inner.outer_paths)?;
    out.acc.estimate(seed)
}

/// Level, skew and curvature limits with the correction term.
pub fn limits(model: &ModelSpec, t: f64, s: f64, mc: &McConfig) -> Result<AsymptoticsReport> {
    limits_with(model, t, s, mc, InnerMethod::Auto)
}

pub fn limits_with(
    model: &ModelSpec,
    t: f64,
    s: f64,
    mc: &McConfig,
    method: InnerMethod,
) -> Result<AsymptoticsReport> {
    check_dates(t, s)?;
    mc.validate()?;
    let pass = joint_pass(model, t, s, mc)?;
    let seed = pass.seed;
    let acc = &pass.acc;
    let rho = model.rho;
    let correction = correction_from(&pass)?;

    // E_t[sigma_s]: exact Gaussian mean for the identity map.
    let exact_mean = match model.vol {
        VolModel::SteinStein { ou, function: VolFunction::Identity } => Some(ou.mean(ou.y0, t, s)?),
        _ => None,
    };
    let mean_weight = if exact_mean.is_some() { 0.0 } else { 1.0 };
    let offset = exact_mean.unwrap_or(0.0);
    let mean_vol = match exact_mean {
        Some(g) => McEstimate::exact(g, acc.count(), seed),
        None => acc.marginal(SIGMA_S, seed)?,
    };

    let mut w = [0.0; N_JOINT];
    w[SIGMA_S] = mean_weight;
    w[E_SPECIAL] = rho;
    let mut level = acc.estimate_of(&w, seed)?;
    level.value += offset;

    let skew_scale = rho * (-model.rate * (s - t)).exp() / (4.0 * model.x0.exp());
    let mut w = [0.0; N_JOINT];
    w[SKEW] = skew_scale;
    let skew = acc.estimate_of(&w, seed)?;

    let a = mean_vol.value;
    let b = correction.value.value;
    let shifted = a + rho * b;
    let t4_scale = 0.5 * rho * (-model.x0).exp();
    let means = acc.mean();

    let term1 = curvature_term1(model, t, s, &mc.inner, mc.seed, method)?;
    let with_se = |value: f64, weights: [f64; N_JOINT]| McEstimate {
        value,
        std_error: acc.std_error_of(&weights),
        n_paths: acc.count(),
        seed,
    };
    let mut g2 = [0.0; N_JOINT];
    g2[SIGMA_S] = -mean_weight / (a * a);
    let term2 = with_se(1.0 / a, g2);
    let mut g3 = [0.0; N_JOINT];
    g3[SIGMA_S] = -mean_weight / (shifted * shifted);
    g3[E_SPECIAL] = -rho / (shifted * shifted);
    let term3 = with_se(1.0 / shifted, g3);
    let mut g4 = [0.0; N_JOINT];
    g4[TERM4] = t4_scale;
    let term4 = with_se(t4_scale * means[TERM4], g4);
    let mut gs = [0.0; N_JOINT];
    gs[E_SPECIAL] = rho * means[INV_SIGMA_SQ];
    gs[INV_SIGMA_SQ] = rho * b;
    let term4_specialized = with_se(rho * b * means[INV_SIGMA_SQ], gs);

    let mut gt = [0.0; N_JOINT];
    for k in 0..N_JOINT {
        gt[k] = g2[k] - g3[k] - g4[k];
    }
    let total = McEstimate {
        value: term1.value + term2.value - term3.value - term4.value,
        std_error: acc.std_error_of(&gt).hypot(term1.std_error),
        n_paths: acc.count(),
        seed,
    };

    Ok(AsymptoticsReport {
        level,
        skew,
        curvature: CurvatureBreakdown { total, term1, term2, term3, term4, term4_specialized },
        correction,
        mean_vol,
        corner_hits: pass.corner_hits,
    })
}

pub fn level_limit(model: &ModelSpec, t: f64, s: f64, mc: &McConfig) -> Result<McEstimate> {
    Ok(limits(model, t, s, mc)?.level)
}

pub fn skew_limit(model: &ModelSpec, t: f64, s: f64, mc: &McConfig) -> Result<McEstimate> {
    Ok(limits(model, t, s, mc)?.skew)
}

pub fn curvature_limit(model: &ModelSpec, t: f64, s: f64, mc: &McConfig) -> Result<CurvatureBreakdown> {
    Ok(limits(model, t, s, mc)?.curvature)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    Level,
    Skew,
    ScaledCurvature,
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Level => "level",
            Quantity::Skew => "skew",
            Quantity::ScaledCurvature => "scaled_curvature",
        }
    }
}

/// Extrapolated finite-difference value against its closed-form limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub quantity: Quantity,
    pub extrapolated: ValueSe,
    pub limit: ValueSe,
    pub combined_se: f64,
    pub z: f64,
    pub pass: bool,
}

impl ComparisonRow {
    pub fn new(quantity: Quantity, extrapolated: ValueSe, limit: ValueSe) -> Self {
        let combined_se = extrapolated.se.hypot(limit.se);
        let z = z_score(extrapolated.value - limit.value, combined_se);
        Self { quantity, extrapolated, limit, combined_se, z, pass: z.abs() < 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub study: ConvergenceStudy,
    pub limits: AsymptoticsReport,
}

/// Convergence study of the simulated smile joined with the closed-form limits.
pub fn compare(model: &ModelSpec, t: f64, s: f64, gaps: &[f64], mc: &McConfig) -> Result<Comparison> {
    compare_with(model, t, s, gaps, mc, InnerMethod::Auto)
}

pub fn compare_with(
    model: &ModelSpec,
    t: f64,
    s: f64,
    gaps: &[f64],
    mc: &McConfig,
    method: InnerMethod,
) -> Result<Comparison> {
    let study = convergence_study(model, t, s, gaps, mc)?;
    let lim = limits_with(model, t, s, mc, method)?;
    let vs = |e: &McEstimate| ValueSe { value: e.value, se: e.std_error };
    let rows = vec![
        ComparisonRow::new(Quantity::Level, study.level, vs(&lim.level)),
        ComparisonRow::new(Quantity::Skew, study.skew, vs(&lim.skew)),
        ComparisonRow::new(Quantity::ScaledCurvature, study.scaled_curvature, vs(&lim.curvature.total)),
    ];
    Ok(Comparison { rows, study, limits: lim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::OuParams;

    fn small_mc() -> McConfig {
        McConfig {
            n_paths: 4000,
            steps_per_year: 200.0,
            inner: InnerConfig { u_nodes: 8, sub_paths: 500, outer_paths: 50 },
            ..McConfig::default()
        }
    }

    fn ss(lambda: f64, rho: f64, f: VolFunction) -> ModelSpec {
        let ou = OuParams::new(1.0, 0.2, lambda, 0.25).unwrap();
        ModelSpec::stein_stein(ou, f, 0.01, rho, 0.0).unwrap()
    }

    #[test]
    fn correction_vanishes_in_degenerate_cases() {
        let mc = small_mc();
        let m = ss(0.25, -0.5, VolFunction::default());
        let same = correction_e(&m, 0.5, 0.5, &mc).unwrap();
        assert_eq!(same.value.value, 0.0);
        let flat = correction_e(&ss(0.0, -0.5, VolFunction::default()), 0.0, 0.5, &mc).unwrap();
        assert_eq!(flat.value.value, 0.0);
        assert_eq!(flat.general.value, 0.0);
        let c = ModelSpec::constant(0.2, 0.01, -0.5, 0.0).unwrap();
        assert_eq!(correction_e(&c, 0.0, 0.5, &mc).unwrap().value.value, 0.0);
    }

    #[test]
    fn constant_vol_limits_are_exact() {
        let c = ModelSpec::constant(0.2, 0.01, -0.5, 0.0).unwrap();
        let r = limits(&c, 0.0, 0.5, &small_mc()).unwrap();
        assert_eq!(r.level.value, 0.2);
        assert_eq!(r.skew.value, 0.0);
        assert_eq!(r.curvature.total.value, 0.0);
        assert_eq!(r.curvature.term1.value, 0.0);
        assert_eq!(r.curvature.term4.value, 0.0);
    }

    #[test]
    fn zero_vol_of_vol_curvature_cancels() {
        let r = limits(&ss(0.0, -0.5, VolFunction::default()), 0.0, 0.5, &small_mc()).unwrap();
        assert!(r.curvature.total.value.abs() < 1e-15);
        assert_eq!(r.skew.value, 0.0);
    }

    #[test]
    fn zero_correlation_level_is_mean_vol() {
        let m = ss(0.25, 0.0, VolFunction::default());
        let r = limits(&m, 0.0, 0.5, &small_mc()).unwrap();
        assert_eq!(r.level.value, r.mean_vol.value);
        assert_eq!(r.skew.value, 0.0);
    }

    #[test]
    fn identity_level_uses_exact_mean() {
        let ou = OuParams::new(1.0, 0.3, 0.1, 0.3).unwrap();
        let m = ModelSpec::stein_stein(ou, VolFunction::Identity, 0.01, 0.0, 0.0).unwrap();
        let r = limits(&m, 0.0, 0.5, &small_mc()).unwrap();
        assert_eq!(r.mean_vol.value, ou.mean(0.3, 0.0, 0.5).unwrap());
        assert_eq!(r.mean_vol.std_error, 0.0);
        assert_eq!(r.level.value, r.mean_vol.value);
    }

    #[test]
    fn identity_with_mass_near_zero_fails_loudly() {
        let ou = OuParams::new(1.0, 0.0, 0.5, 0.0).unwrap();
        let m = ModelSpec::stein_stein(ou, VolFunction::Identity, 0.0, -0.5, 0.0).unwrap();
        let mc = McConfig { n_paths: 50_000, ..small_mc() };
        assert!(matches!(limits(&m, 0.0, 0.5, &mc), Err(Error::DivisionHazard { .. })));
    }

    #[test]
    fn dual_forms_agree_pathwise() {
        let m = ss(0.25, -0.5, VolFunction::default());
        let e = correction_e(&m, 0.0, 0.5, &small_mc()).unwrap();
        assert!((e.value.value - e.general.value).abs() < 1e-12 * e.value.value.abs());
        assert!(e.dual_form_z().abs() < 1e-6);
        assert!(e.value.value > 0.0);
    }

    #[test]
    fn graded_integral_handles_smooth_and_log_singular_integrands() {
        let h = term1_offsets(0.0, 0.5, 20);
        assert_eq!(h.len(), 20);
        assert_eq!(h[0], 0.5);
        assert_eq!(h[19], 0.0);
        let ones = vec![1.0; 20];
        assert!((graded_integral(&h, &ones) - 0.5).abs() < 1e-14);
        let inv: Vec<f64> = h.iter().map(|&x| 1.0 / (x + 1e-3)).collect();
        let exact = (0.501f64 / 1e-3).ln();
        assert!((graded_integral(&h, &inv) - exact).abs() < 3e-3 * exact);
        let smooth: Vec<f64> = h.iter().map(|&x| (-2.0 * x).exp()).collect();
        let exact = 0.5 * (1.0 - (-1.0f64).exp());
        assert!((graded_integral(&h, &smooth) - exact).abs() < 5e-3 * exact);
        let odd = term1_offsets(0.0, 0.5, 19);
        let ones = vec![1.0; 19];
        assert!((graded_integral(&odd, &ones) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn comparison_rows() {
        let row = ComparisonRow::new(
            Quantity::Level,
            ValueSe { value: 0.21, se: 0.003 },
            ValueSe { value: 0.2, se: 0.004 },
        );
        assert!((row.combined_se - 0.005).abs() < 1e-15);
        assert!((row.z - 2.0).abs() < 1e-12);
        assert!(row.pass);
        let exact = ComparisonRow::new(
            Quantity::Skew,
            ValueSe { value: 0.0, se: 0.0 },
            ValueSe { value: 0.0, se: 0.0 },
        );
        assert!(exact.pass);
    }
}
