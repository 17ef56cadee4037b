//! Run configuration: a TOML file whose every block has explicit defaults.

use std::path::PathBuf;

use fwdsmile::asymptotics::InnerMethod;
use fwdsmile::forward_smile::{atm_alpha, FdStep};
use fwdsmile::mc_engine::dump::fnv1a64;
use fwdsmile::mc_engine::{InnerConfig, McConfig, Scheme};
use fwdsmile::models::{ModelSpec, OuParams, VolFunction, VolModel};
use fwdsmile::ContractSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelBlock,
    pub contract: ContractBlock,
    pub mc: McBlock,
    pub fd: FdBlock,
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Constant,
    SteinStein,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelBlock {
    pub kind: ModelKind,
    pub rate: f64,
    pub rho: f64,
    pub x0: f64,
    /// Volatility of the constant model.
    pub sigma: f64,
    pub ou: OuParams,
    pub function: VolFunction,
}

impl Default for ModelBlock {
    fn default() -> Self {
        Self {
            kind: ModelKind::SteinStein,
            rate: 0.01,
            rho: -0.5,
            x0: 0.0,
            sigma: 0.2,
            ou: OuParams { kappa: 1.0, m: 0.2, lambda: 0.25, y0: 0.25 },
            function: VolFunction::default(),
        }
    }
}

impl ModelBlock {
    pub fn to_model(&self) -> Result<ModelSpec, CliError> {
        let vol = match self.kind {
            ModelKind::Constant => VolModel::Constant { sigma: self.sigma },
            ModelKind::SteinStein => VolModel::SteinStein { ou: self.ou, function: self.function },
        };
        ModelSpec::new(self.rate, self.rho, self.x0, vol).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContractBlock {
    /// Valuation time.
    pub t: f64,
    /// Forward-start date.
    pub s: f64,
    /// Remaining maturities `T - s` of the convergence study, strictly decreasing.
    pub gaps: Vec<f64>,
    /// Maturity for `price` and `smile`; defaults to `s + 0.1`.
    pub maturity: Option<f64>,
    /// Log-moneyness grid for `price` and `smile`; defaults to
    /// `alpha* + 0.02 k` for `k = -5..=5`.
    pub alphas: Option<Vec<f64>>,
}

impl Default for ContractBlock {
    fn default() -> Self {
        Self { t: 0.0, s: 0.5, gaps: vec![0.2, 0.1, 0.05, 0.025], maturity: None, alphas: None }
    }
}

impl ContractBlock {
    pub fn maturity(&self) -> f64 {
        self.maturity.unwrap_or(self.s + 0.1)
    }

    pub fn contract(&self, rate: f64) -> Result<ContractSpec, CliError> {
        let maturity = self.maturity();
        ContractSpec::new(self.t, self.s, maturity, atm_alpha(self.s, maturity, rate))
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McBlock {
    pub n_paths: u64,
    pub steps_per_year: f64,
    pub seed: u64,
    pub scheme: Scheme,
    /// Dates on `[t, s]` for the first curvature term.
    pub u_nodes: usize,
    /// Inner samples per outer state for the first curvature term.
    pub sub_paths: u64,
    /// Outer factor paths for the first curvature term.
    pub outer_paths: u64,
    pub inner_method: InnerMethod,
}

impl Default for McBlock {
    fn default() -> Self {
        let mc = McConfig::default();
        Self {
            n_paths: mc.n_paths,
            steps_per_year: mc.steps_per_year,
            seed: mc.seed,
            scheme: mc.scheme,
            u_nodes: mc.inner.u_nodes,
            sub_paths: mc.inner.sub_paths,
            outer_paths: mc.inner.outer_paths,
            inner_method: InnerMethod::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FdBlock {
    /// `"auto"` or `{ fixed = h }`.
    pub step: FdStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: PathBuf,
    pub prefix: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), prefix: "fwdsmile".to_string() }
    }
}

/// The parts of a run that determine its numbers; output placement is excluded
/// so that the same experiment written to two directories hashes equally.
#[derive(Serialize)]
struct HashedParts<'a> {
    model: &'a ModelBlock,
    contract: &'a ContractBlock,
    mc: &'a McBlock,
    fd: &'a FdBlock,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Fills every optional field with the value the run will use.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let model = self.model.to_model()?;
        let maturity = self.contract.maturity();
        self.contract.maturity = Some(maturity);
        if self.contract.alphas.is_none() {
            let a0 = atm_alpha(self.contract.s, maturity, model.rate);
            self.contract.alphas = Some((-5..=5).map(|k| a0 + 0.02 * k as f64).collect());
        }
        self.contract.contract(model.rate)?;
        self.mc_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.output.prefix.is_empty() {
            return Err(CliError::Config("output.prefix must not be empty".into()));
        }
        Ok(self)
    }

    pub fn mc_config(&self) -> McConfig {
        McConfig {
            n_paths: self.mc.n_paths,
            steps_per_year: self.mc.steps_per_year,
            seed: self.mc.seed,
            scheme: self.mc.scheme,
            fd_step: self.fd.step,
            inner: InnerConfig {
                u_nodes: self.mc.u_nodes,
                sub_paths: self.mc.sub_paths,
                outer_paths: self.mc.outer_paths,
            },
        }
    }

    pub fn alphas(&self) -> &[f64] {
        self.contract.alphas.as_deref().unwrap_or(&[])
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn hash(&self) -> u64 {
        let parts = HashedParts { model: &self.model, contract: &self.contract, mc: &self.mc, fd: &self.fd };
        fnv1a64(toml::to_string(&parts).expect("run config serializes").as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_desk_defaults() {
        let c = RunConfig::parse("").unwrap().resolve().unwrap();
        assert_eq!(c.model.kind, ModelKind::SteinStein);
        assert_eq!(c.mc.n_paths, 200_000);
        assert_eq!(c.contract.maturity, Some(0.6));
        assert_eq!(c.alphas().len(), 11);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[model]\nrate = 0.01\nvolatility = 0.3\n").is_err());
        assert!(RunConfig::parse("[mc]\npaths = 10\n").is_err());
        assert!(RunConfig::parse("[model.function]\nkind = \"identity\"\nfoo = 1\n").is_err());
        assert!(RunConfig::parse("[extra]\n").is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = "[model]\nkind = \"constant\"\nsigma = 0.3\n[fd]\nstep = { fixed = 0.002 }\n";
        let c = RunConfig::parse(text).unwrap().resolve().unwrap();
        let again = RunConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash(), again.hash());
        assert_eq!(c.fd.step, FdStep::Fixed(0.002));

        let identity = RunConfig::parse("[model.function]\nkind = \"identity\"\n").unwrap();
        assert_eq!(identity.model.function, VolFunction::Identity);
        assert_eq!(RunConfig::parse(&identity.to_toml()).unwrap(), identity);
    }

    #[test]
    fn hash_ignores_output_placement() {
        let a = RunConfig::parse("").unwrap().resolve().unwrap();
        let mut b = a.clone();
        b.output.dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.mc.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        assert!(RunConfig::parse("[model]\nrho = 1.5\n").unwrap().resolve().is_err());
        assert!(RunConfig::parse("[contract]\nmaturity = 0.4\n").unwrap().resolve().is_err());
        assert!(RunConfig::parse("[mc]\nn_paths = 0\n").unwrap().resolve().is_err());
    }
}
