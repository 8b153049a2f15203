//! Run configuration: a flat TOML file overridden by command-line flags. The
//! effective configuration is saved next to each run's outputs.

use std::path::{Path, PathBuf};

use immersa::geodesic::SolverOptions;
use immersa::variations::Engine;
use immersa::{Error, MetricConfig, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EngineName {
    Analytic,
    Fd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub inputs: Vec<String>,
    pub out: PathBuf,
    /// Grid size for generated surfaces without an explicit size.
    pub grid: usize,
    pub stencil_order: usize,
    pub k: usize,
    pub weight_exp: f64,
    pub included_orders: Vec<usize>,
    pub immersion_floor: f64,
    pub max_order: usize,
    pub steps: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub engine: EngineName,
    pub perturbation: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = MetricConfig::default();
        let s = SolverOptions::default();
        RunConfig {
            command: String::new(),
            inputs: Vec::new(),
            out: PathBuf::from("."),
            grid: 32,
            stencil_order: immersa::ParamGrid::DEFAULT_STENCIL_ORDER,
            k: m.k,
            weight_exp: m.weight_exponent,
            included_orders: m.included_orders,
            immersion_floor: m.immersion_floor,
            max_order: m.max_order,
            steps: 8,
            max_iters: s.max_iters,
            tol: s.grad_tol,
            engine: EngineName::Analytic,
            perturbation: s.perturbation,
            seed: 0,
        }
    }
}

/// Values given on the command line; `None` keeps the file or default value.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Grid size for generated surfaces.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Metric order k.
    #[arg(long, global = true)]
    pub order: Option<usize>,
    /// Finite-difference stencil order (2, 4 or 6).
    #[arg(long, global = true)]
    pub stencil: Option<usize>,
    /// Exponent of |H| in the metric weight.
    #[arg(long = "weight-exp", global = true)]
    pub weight_exp: Option<f64>,
    /// Time steps of discrete paths.
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Gradient sup-norm tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long = "max-iters", global = true)]
    pub max_iters: Option<usize>,
    #[arg(long, value_enum, global = true)]
    pub engine: Option<EngineName>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn resolve(flags: &Overrides, command: &str, inputs: Vec<String>) -> Result<RunConfig> {
        let mut c = match &flags.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        c.command = command.to_string();
        if !inputs.is_empty() {
            c.inputs = inputs;
        }
        macro_rules! take {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = flags.$flag.clone() {
                    c.$field = v;
                })*
            };
        }
        take!(grid => grid, order => k, stencil => stencil_order, weight_exp => weight_exp,
              steps => steps, tol => tol, max_iters => max_iters, engine => engine,
              seed => seed, out => out);
        c.metric().validate()?;
        if c.steps == 0 {
            return Err(Error::InvalidConfig("steps must be positive".into()));
        }
        Ok(c)
    }

    pub fn metric(&self) -> MetricConfig {
        MetricConfig {
            k: self.k,
            weight_exponent: self.weight_exp,
            included_orders: self.included_orders.clone(),
            immersion_floor: self.immersion_floor,
            max_order: self.max_order,
        }
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            max_iters: self.max_iters,
            grad_tol: self.tol,
            engine: match self.engine {
                EngineName::Analytic => Engine::Analytic,
                EngineName::Fd => Engine::FiniteDifference,
            },
            perturbation: self.perturbation,
            seed: self.seed,
            ..SolverOptions::default()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}
