//! The five subcommands. Each returns its tables; writing is left to the caller.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use fwdsmile::asymptotics::{self, AsymptoticsReport, ComparisonRow, CurvatureBreakdown};
use fwdsmile::blackscholes::forward_start_bs_price;
use fwdsmile::forward_smile::{self, ConvergenceStudy};
use fwdsmile::mc_engine::{dump, price_decomposition, simulate_with, PathBatch, SimGrid};
use fwdsmile::models::VolModel;
use fwdsmile::McEstimate;

use crate::config::RunConfig;
use crate::error::{io_err, CliError};
use crate::output::{int, num, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Price,
    Smile,
    Converge,
    Limits,
    Compare,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Price => "price",
            Command::Smile => "smile",
            Command::Converge => "converge",
            Command::Limits => "limits",
            Command::Compare => "compare",
        }
    }
}

/// Tables of one subcommand and the number of failed comparison rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub tables: Vec<Table>,
    pub failed_rows: usize,
}

fn batch_for(cfg: &RunConfig) -> Result<PathBatch, CliError> {
    let model = cfg.model.to_model()?;
    let c = &cfg.contract;
    let grid = SimGrid::new(c.t, &[c.s, c.maturity()], cfg.mc.steps_per_year)?;
    Ok(simulate_with(&model, &grid, cfg.mc.n_paths, cfg.mc.seed, cfg.mc.scheme)?)
}

fn dump_paths(batch: &PathBatch, path: Option<&Path>) -> Result<(), CliError> {
    if let Some(path) = path {
        let file = File::create(path).map_err(io_err(path))?;
        dump::write_summary(batch, BufWriter::new(file))?;
    }
    Ok(())
}

fn est(e: &McEstimate) -> [String; 2] {
    [num(e.value), num(e.std_error)]
}

/// Direct and decomposition prices side by side, one row per alpha.
pub fn price(cfg: &RunConfig, dump_to: Option<&Path>) -> Result<Report, CliError> {
    let model = cfg.model.to_model()?;
    let batch = batch_for(cfg)?;
    dump_paths(&batch, dump_to)?;
    let base = cfg.contract.contract(model.rate)?;
    let mut t = Table::new(
        "price",
        &[
            "alpha", "maturity", "direct", "direct_se", "decomposition", "decomposition_se", "bs_term",
            "bs_term_se", "early_term", "early_term_se", "late_term", "late_term_se", "difference",
            "difference_se", "z", "closed_form", "corner_hits", "n_paths", "seed",
        ],
    );
    for &alpha in cfg.alphas() {
        let c = base.with_alpha(alpha);
        let d = price_decomposition(&batch, &c)?;
        let closed = match model.vol {
            VolModel::Constant { sigma } => {
                num(forward_start_bs_price(model.x0, c.start, c.maturity, alpha, sigma, model.rate)?)
            }
            VolModel::SteinStein { .. } => String::new(),
        };
        let mut row = vec![num(alpha), num(c.maturity)];
        for e in [&d.direct, &d.total, &d.bs_term, &d.early_term, &d.late_term, &d.difference] {
            row.extend(est(e));
        }
        row.extend([num(d.z_score()), closed, int(d.corner_hits), int(batch.n_paths()), int(batch.seed())]);
        t.push(row);
    }
    Ok(Report { tables: vec![t], failed_rows: 0 })
}

/// Forward implied volatilities over the alpha grid from one batch.
pub fn smile(cfg: &RunConfig, dump_to: Option<&Path>) -> Result<Report, CliError> {
    let model = cfg.model.to_model()?;
    let batch = batch_for(cfg)?;
    dump_paths(&batch, dump_to)?;
    let c = cfg.contract.contract(model.rate)?;
    let points = forward_smile::smile_slice(&batch, &c, cfg.alphas())?;
    let mut t = Table::new(
        "smile",
        &["alpha", "vol", "vol_se", "price", "price_se", "at_intrinsic", "error", "n_paths", "seed"],
    );
    for (&alpha, p) in cfg.alphas().iter().zip(points) {
        let row = match p {
            Ok(p) => {
                let [v, se] = est(&p.price);
                vec![num(alpha), num(p.vol), num(p.vol_se), v, se, p.at_intrinsic.to_string(), String::new()]
            }
            Err(e) => {
                let mut row = vec![num(alpha)];
                row.extend(std::iter::repeat_n(String::new(), 5));
                row.push(e.to_string());
                row
            }
        };
        let mut row = row;
        row.extend([int(batch.n_paths()), int(batch.seed())]);
        t.push(row);
    }
    Ok(Report { tables: vec![t], failed_rows: 0 })
}

fn converge_tables(study: &ConvergenceStudy) -> [Table; 2] {
    let mut t = Table::new(
        "converge",
        &[
            "gap", "level", "level_se", "skew", "skew_se", "curv", "curv_se", "scaled_curv", "scaled_curv_se",
            "h", "n_paths", "seed",
        ],
    );
    for r in &study.reports {
        t.push(vec![
            num(r.gap),
            num(r.level),
            num(r.level_se),
            num(r.skew),
            num(r.skew_se),
            num(r.curvature),
            num(r.curvature_se),
            num(r.scaled_curvature),
            num(r.scaled_curvature_se),
            num(r.h),
            int(r.n_paths),
            int(r.seed),
        ]);
    }
    let mut x = Table::new("extrapolation", &["quantity", "value", "se"]);
    for (name, v) in [("level", study.level), ("skew", study.skew), ("scaled_curv", study.scaled_curvature)] {
        x.push(vec![name.to_string(), num(v.value), num(v.se)]);
    }
    [t, x]
}

pub fn converge(cfg: &RunConfig) -> Result<Report, CliError> {
    let model = cfg.model.to_model()?;
    let c = &cfg.contract;
    let study = forward_smile::convergence_study(&model, c.t, c.s, &c.gaps, &cfg.mc_config())?;
    for w in &study.warnings {
        eprintln!("warning: {w}");
    }
    Ok(Report { tables: converge_tables(&study).into(), failed_rows: 0 })
}

fn curvature_table(b: &CurvatureBreakdown) -> Table {
    let mut t = Table::new("curvature_terms", &["term", "value", "se", "n_paths", "seed"]);
    for (name, e) in [
        ("term1", &b.term1),
        ("term2", &b.term2),
        ("term3", &b.term3),
        ("term4", &b.term4),
        ("term4_specialized", &b.term4_specialized),
        ("total", &b.total),
    ] {
        let [v, se] = est(e);
        t.push(vec![name.to_string(), v, se, int(e.n_paths), int(e.seed)]);
    }
    t
}

fn limits_table(r: &AsymptoticsReport) -> Table {
    let mut t = Table::new("limits", &["quantity", "value", "se", "n_paths", "seed"]);
    let rows = [
        ("mean_vol", &r.mean_vol),
        ("correction", &r.correction.value),
        ("correction_general", &r.correction.general),
        ("level", &r.level),
        ("skew", &r.skew),
        ("scaled_curv", &r.curvature.total),
    ];
    for (name, e) in rows {
        let [v, se] = est(e);
        t.push(vec![name.to_string(), v, se, int(e.n_paths), int(e.seed)]);
    }
    let dual = r.correction.dual_form_z();
    t.push(vec!["correction_dual_z".into(), num(dual), String::new(), String::new(), String::new()]);
    t.push(vec!["corner_hits".into(), int(r.corner_hits), String::new(), String::new(), String::new()]);
    t.push(vec![
        "excluded".into(),
        int(r.correction.excluded),
        String::new(),
        String::new(),
        String::new(),
    ]);
    t
}

pub fn limits(cfg: &RunConfig) -> Result<Report, CliError> {
    let model = cfg.model.to_model()?;
    let c = &cfg.contract;
    let r = asymptotics::limits_with(&model, c.t, c.s, &cfg.mc_config(), cfg.mc.inner_method)?;
    Ok(Report { tables: vec![limits_table(&r), curvature_table(&r.curvature)], failed_rows: 0 })
}

fn compare_table(rows: &[ComparisonRow]) -> Table {
    let mut t = Table::new(
        "compare",
        &["quantity", "fd_extrapolated", "fd_se", "limit", "limit_se", "combined_se", "z", "pass"],
    );
    for r in rows {
        t.push(vec![
            r.quantity.name().to_string(),
            num(r.extrapolated.value),
            num(r.extrapolated.se),
            num(r.limit.value),
            num(r.limit.se),
            num(r.combined_se),
            num(r.z),
            r.pass.to_string(),
        ]);
    }
    t
}

pub fn compare(cfg: &RunConfig) -> Result<Report, CliError> {
    let model = cfg.model.to_model()?;
    let c = &cfg.contract;
    let mc = cfg.mc_config();
    let cmp = asymptotics::compare_with(&model, c.t, c.s, &c.gaps, &mc, cfg.mc.inner_method)?;
    let (rows, study, lim) = (&cmp.rows, &cmp.study, &cmp.limits);
    for w in &study.warnings {
        eprintln!("warning: {w}");
    }
    let failed_rows = rows.iter().filter(|r| !r.pass).count();
    let [conv, extra] = converge_tables(study);
    Ok(Report {
        tables: vec![compare_table(rows), curvature_table(&lim.curvature), limits_table(lim), conv, extra],
        failed_rows,
    })
}

pub fn execute(command: Command, cfg: &RunConfig, dump_to: Option<&Path>) -> Result<Report, CliError> {
    if dump_to.is_some() && !matches!(command, Command::Price | Command::Smile) {
        return Err(CliError::Usage("--dump-paths applies to price and smile only".into()));
    }
    match command {
        Command::Price => price(cfg, dump_to),
        Command::Smile => smile(cfg, dump_to),
        Command::Converge => converge(cfg),
        Command::Limits => limits(cfg),
        Command::Compare => compare(cfg),
    }
}
