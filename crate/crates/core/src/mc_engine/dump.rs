//! Binary dump of per-path summaries, for debugging.
//!
//! Layout (little endian): magic `FWDSPB`, `u16` version, `u64` seed,
//! `u64` path count, `u8` scheme, grid spec (`f64` start, `f64` steps per year,
//! `u32` key-date count, key dates as `f64`), `u64` model hash, then one
//! record per path: final `X`, final `Y`, min `sigma`, max `sigma` as `f64`.

use std::io::{self, Read, Write};

use super::paths::{Path, PathBatch, Scheme};
use crate::error::Result;
use crate::models::{ModelSpec, VolFunction, VolModel};
use crate::stats::chunked_map;

pub const MAGIC: &[u8; 6] = b"FWDSPB";
pub const VERSION: u16 = 1;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Stable hash of the model parameters.
pub fn model_hash(model: &ModelSpec) -> u64 {
    let mut bytes = Vec::new();
    let mut put = |v: f64| bytes.extend_from_slice(&v.to_le_bytes());
    put(model.rate);
    put(model.rho);
    put(model.x0);
    match model.vol {
        VolModel::Constant { sigma } => {
            put(0.0);
            put(sigma);
        }
        VolModel::SteinStein { ou, function } => {
            put(1.0);
            put(ou.kappa);
            put(ou.m);
            put(ou.lambda);
            put(ou.y0);
            match function {
                VolFunction::Identity => put(0.0),
                VolFunction::AbsClamped { sigma_min, sigma_max } => {
                    put(1.0);
                    put(sigma_min);
                    put(sigma_max);
                }
                VolFunction::SmoothedAbs { eps, sigma_min, sigma_max } => {
                    put(2.0);
                    put(eps);
                    put(sigma_min);
                    put(sigma_max);
                }
            }
        }
    }
    fnv1a64(&bytes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DumpHeader {
    pub version: u16,
    pub seed: u64,
    pub n_paths: u64,
    pub scheme: Scheme,
    pub grid_start: f64,
    pub steps_per_year: f64,
    pub key_dates: Vec<f64>,
    pub model_hash: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSummary {
    pub x_end: f64,
    pub y_end: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

fn summarize(p: &Path) -> PathSummary {
    let (lo, hi) = p
        .sigma
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    PathSummary {
        x_end: *p.x.last().expect("non-empty path"),
        y_end: *p.y.last().expect("non-empty path"),
        sigma_min: lo,
        sigma_max: hi,
    }
}

pub fn write_summary<W: Write>(batch: &PathBatch, mut w: W) -> Result<()> {
    let summaries = chunked_map(batch.n_paths(), |i| Ok(summarize(&batch.path(i)?)))?;
    let io = |e: io::Error| crate::error::Error::InvalidInput(format!("dump write failed: {e}"));
    let grid = batch.grid();
    let mut buf = Vec::with_capacity(64 + summaries.len() * 32);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&batch.seed().to_le_bytes());
    buf.extend_from_slice(&batch.n_paths().to_le_bytes());
    buf.push(match batch.scheme() {
        Scheme::Euler => 0,
        Scheme::ExactOu => 1,
    });
    buf.extend_from_slice(&grid.start().to_le_bytes());
    buf.extend_from_slice(&grid.steps_per_year().to_le_bytes());
    buf.extend_from_slice(&(grid.key_dates().len() as u32).to_le_bytes());
    for d in grid.key_dates() {
        buf.extend_from_slice(&d.to_le_bytes());
    }
    buf.extend_from_slice(&model_hash(batch.model()).to_le_bytes());
    for s in &summaries {
        for v in [s.x_end, s.y_end, s.sigma_min, s.sigma_max] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf).map_err(io)
}

pub fn read_summary<R: Read>(mut r: R) -> io::Result<(DumpHeader, Vec<PathSummary>)> {
    fn take<const N: usize, R: Read>(r: &mut R) -> io::Result<[u8; N]> {
        let mut b = [0u8; N];
        r.read_exact(&mut b)?;
        Ok(b)
    }
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    if &take::<6, _>(&mut r)? != MAGIC {
        return Err(bad("not a path summary dump"));
    }
    let version = u16::from_le_bytes(take(&mut r)?);
    if version != VERSION {
        return Err(bad("unsupported dump version"));
    }
    let seed = u64::from_le_bytes(take(&mut r)?);
    let n_paths = u64::from_le_bytes(take(&mut r)?);
    let scheme = match take::<1, _>(&mut r)?[0] {
        0 => Scheme::Euler,
        1 => Scheme::ExactOu,
        _ => return Err(bad("unknown scheme tag")),
    };
    let grid_start = f64::from_le_bytes(take(&mut r)?);
    let steps_per_year = f64::from_le_bytes(take(&mut r)?);
    let n_keys = u32::from_le_bytes(take(&mut r)?);
    let key_dates = (0..n_keys)
        .map(|_| take(&mut r).map(f64::from_le_bytes))
        .collect::<io::Result<Vec<_>>>()?;
    let model_hash = u64::from_le_bytes(take(&mut r)?);
    let mut paths = Vec::with_capacity(n_paths as usize);
    for _ in 0..n_paths {
        let mut v = [0.0; 4];
        for x in &mut v {
            *x = f64::from_le_bytes(take(&mut r)?);
        }
        paths.push(PathSummary { x_end: v[0], y_end: v[1], sigma_min: v[2], sigma_max: v[3] });
    }
    let header = DumpHeader { version, seed, n_paths, scheme, grid_start, steps_per_year, key_dates, model_hash };
    Ok((header, paths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc_engine::{simulate, SimGrid};
    use crate::models::OuParams;

    #[test]
    fn dump_round_trip() {
        let ou = OuParams::new(1.0, 0.2, 0.25, 0.25).unwrap();
        let m = ModelSpec::stein_stein(ou, VolFunction::default(), 0.01, -0.5, 0.0).unwrap();
        let grid = SimGrid::new(0.0, &[0.5, 0.6], 100.0).unwrap();
        let batch = simulate(&m, &grid, 17, 99).unwrap();
        let mut bytes = Vec::new();
        write_summary(&batch, &mut bytes).unwrap();
        let (h, paths) = read_summary(bytes.as_slice()).unwrap();
        assert_eq!(h.seed, 99);
        assert_eq!(h.n_paths, 17);
        assert_eq!(h.key_dates, vec![0.5, 0.6]);
        assert_eq!(h.model_hash, model_hash(&m));
        let p3 = batch.path(3).unwrap();
        assert_eq!(paths[3].x_end, *p3.x.last().unwrap());
        assert!(paths.iter().all(|p| p.sigma_min >= 0.01 && p.sigma_max <= 2.0));
        assert!(read_summary(&bytes[1..]).is_err());
    }

    #[test]
    fn hash_separates_models() {
        let a = ModelSpec::constant(0.2, 0.0, 0.0, 0.0).unwrap();
        let b = ModelSpec::constant(0.2000001, 0.0, 0.0, 0.0).unwrap();
        assert_ne!(model_hash(&a), model_hash(&b));
    }
}
