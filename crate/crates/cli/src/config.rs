//! Run configuration: defaults, an optional flat TOML file, and flags.
//!
//! Keys in the file are the long flag names (`t-max = 3000`). Precedence is
//! flags over file over defaults.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, CommandFactory};
use serde::{Deserialize, Serialize};

use mrho_core::functional::DEFAULT_TOL;
use mrho_core::poincare::DEFAULT_QUAD_NODES;
use mrho_core::systems::{BenchmarkParams, DEFAULT_FD_STEP};
use mrho_core::{FunctionalConfig, GridSpec, IntegrationConfig, Method};

/// Every tunable, as a flag and as a config-file key. Unset means "inherit".
#[derive(Args, Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Overrides {
    /// Density coefficient in rho = 1 + epsilon |u|^2
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// Oscillator coupling
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Cubic nonlinearity strength
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Grid points per axis on the (x1, y1) plane
    #[arg(long, global = true)]
    pub grid_nx: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub box_lo: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub box_hi: Option<f64>,
    /// Initial x1 for `trajectory`
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub x1: Option<f64>,
    /// Initial y1 for `trajectory`
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub y1: Option<f64>,
    /// Fixed x2 of every initial condition
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub x2: Option<f64>,
    /// Fixed y2 of every initial condition
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub y2: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub t_max: Option<f64>,
    /// FTLE threshold below which a bounded orbit counts as regular
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Finite-difference increment for the Jacobian
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub fd_h: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub escape_radius: Option<f64>,
    /// euler or rk4
    #[arg(long, global = true)]
    pub method: Option<Method>,
    /// Simpson nodes for the first-order Poincare map
    #[arg(long, global = true)]
    pub quad_nodes: Option<usize>,
    /// Comma-separated alpha values for `sweep` and `trajectory`
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub alphas: Option<Vec<f64>>,
    /// Worker threads (0: all cores)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Random sample count for `verify-divergence`
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Keep every n-th state in trajectory output
    #[arg(long, global = true)]
    pub stride: Option<usize>,
    /// Main output file of the subcommand
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub ftle_csv: Option<PathBuf>,
    /// Trajectory CSV; one file per alpha, suffixed `_alpha<value>`
    #[arg(long, global = true)]
    pub traj_csv: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($dst:expr, $src:expr; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Overrides {
    /// Fields set in `other` replace ours.
    pub fn merge(&mut self, other: &Overrides) {
        merge_fields!(self, other; epsilon, delta, alpha, grid_nx, box_lo, box_hi, x1, y1, x2, y2, dt,
            t_max, tol, fd_h, escape_radius, method, quad_nodes, alphas, workers, seed, samples, stride,
            out, ftle_csv, traj_csv);
    }
}

/// Config-file keys, taken from the flag names.
pub fn valid_keys() -> Vec<String> {
    #[derive(clap::Parser)]
    struct Probe {
        #[command(flatten)]
        o: Overrides,
    }
    let mut keys: Vec<String> = Probe::command()
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();
    keys.sort();
    keys
}

pub fn parse_config_str(text: &str) -> anyhow::Result<Overrides> {
    let table: toml::Table = toml::from_str(text).context("config file is not valid TOML")?;
    let valid = valid_keys();
    for key in table.keys() {
        if !valid.iter().any(|k| k == key) {
            bail!("unknown config key {key:?}; valid keys: {}", valid.join(", "));
        }
    }
    table.try_into().map_err(|e| anyhow!("invalid config value: {e}"))
}

pub fn load_config_file(path: &Path) -> anyhow::Result<Overrides> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    parse_config_str(&text).with_context(|| format!("in config {}", path.display()))
}

/// Fully resolved numeric parameters. This is what output files embed under
/// `params`; worker count and paths are left out so that outputs do not
/// depend on them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    pub grid_nx: usize,
    pub box_lo: f64,
    pub box_hi: f64,
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub dt: f64,
    pub t_max: f64,
    pub tol: f64,
    pub fd_h: f64,
    pub escape_radius: f64,
    pub method: Method,
    pub quad_nodes: usize,
    pub alphas: Option<Vec<f64>>,
    pub seed: u64,
    pub samples: usize,
    pub stride: usize,
}

impl Default for Params {
    fn default() -> Self {
        let b = BenchmarkParams::default();
        let g = GridSpec::default();
        let ic = IntegrationConfig::default();
        Self {
            epsilon: b.epsilon,
            delta: b.delta,
            alpha: b.alpha,
            grid_nx: g.nx,
            box_lo: g.box_lo,
            box_hi: g.box_hi,
            x1: 0.5,
            y1: 0.5,
            x2: g.fixed_coords[0],
            y2: g.fixed_coords[1],
            dt: ic.dt,
            t_max: ic.t_max,
            tol: DEFAULT_TOL,
            fd_h: DEFAULT_FD_STEP,
            escape_radius: ic.escape_radius,
            method: ic.method,
            quad_nodes: DEFAULT_QUAD_NODES,
            alphas: None,
            seed: 0,
            samples: 1000,
            stride: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: Params,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub ftle_csv: Option<PathBuf>,
    pub traj_csv: Option<PathBuf>,
}

macro_rules! take {
    ($p:expr, $o:expr; $($f:ident),*) => {
        $( if let Some(v) = $o.$f.clone() { $p.$f = v; } )*
    };
}

impl RunConfig {
    /// Apply `file` then `flags` on top of the defaults, and validate.
    pub fn resolve(file: Option<&Overrides>, flags: &Overrides) -> anyhow::Result<Self> {
        let mut o = file.cloned().unwrap_or_default();
        o.merge(flags);
        let mut p = Params::default();
        take!(p, o; epsilon, delta, alpha, grid_nx, box_lo, box_hi, x1, y1, x2, y2, dt, t_max, tol, fd_h,
            escape_radius, method, quad_nodes, seed, samples, stride);
        p.alphas = o.alphas.clone();
        let cfg = Self { params: p, workers: o.workers.unwrap_or(0), out: o.out, ftle_csv: o.ftle_csv, traj_csv: o.traj_csv };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let p = &self.params;
        self.benchmark()?;
        self.integration().validate()?;
        self.grid().validate()?;
        if !(p.tol > 0.0 && p.tol.is_finite()) {
            bail!("tol must be positive, got {}", p.tol);
        }
        if p.quad_nodes < 64 || p.quad_nodes % 2 != 0 {
            bail!("quad-nodes must be even and >= 64, got {}", p.quad_nodes);
        }
        if p.samples == 0 {
            bail!("samples must be >= 1");
        }
        if p.stride == 0 {
            bail!("stride must be >= 1");
        }
        for v in [p.x1, p.y1, p.x2, p.y2] {
            if !v.is_finite() {
                bail!("initial coordinates must be finite");
            }
        }
        if let Some(a) = &p.alphas {
            if a.is_empty() || a.iter().any(|x| !x.is_finite()) {
                bail!("alphas must be a non-empty list of finite numbers");
            }
        }
        Ok(())
    }

    pub fn benchmark(&self) -> anyhow::Result<BenchmarkParams> {
        let p = &self.params;
        Ok(BenchmarkParams::new(p.epsilon, p.delta, p.alpha)?)
    }

    pub fn grid(&self) -> GridSpec {
        let p = &self.params;
        GridSpec { nx: p.grid_nx, box_lo: p.box_lo, box_hi: p.box_hi, fixed_coords: vec![p.x2, p.y2] }
    }

    pub fn integration(&self) -> IntegrationConfig {
        let p = &self.params;
        IntegrationConfig {
            dt: p.dt,
            t_max: p.t_max,
            method: p.method,
            escape_radius: p.escape_radius,
            fd_step: p.fd_h,
            output_stride: p.stride,
            ..IntegrationConfig::default()
        }
    }

    pub fn functional(&self) -> FunctionalConfig {
        FunctionalConfig { tol: self.params.tol, workers: self.workers, seed: self.params.seed }
    }
}
