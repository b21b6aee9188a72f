//! Resolution of the solver configuration: defaults, then the config
//! blocks of the contour specs, then command-line flags.

use plateau_core::contour::ContourSpec;
use plateau_core::solver::SolverConfig;
use plateau_core::{PlateauError, Result};
use serde_json::Value;

/// Flags that override configuration fields.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Boundary nodes N.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    /// Randomized restarts besides the arclength start.
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, o) => *b = o.clone(),
    }
}

pub fn resolve(specs: &[&ContourSpec], flags: &Overrides, bracket: Option<[f64; 2]>) -> Result<SolverConfig> {
    let mut value = serde_json::to_value(SolverConfig::default())?;
    for spec in specs {
        match &spec.config {
            None => {}
            Some(block @ Value::Object(_)) => merge(&mut value, block),
            Some(_) => return Err(PlateauError::Config("\"config\" must be a JSON object".into())),
        }
    }
    let mut cfg: SolverConfig =
        serde_json::from_value(value).map_err(|e| PlateauError::Config(format!("config block: {e}")))?;
    if let Some(n) = flags.nodes {
        cfg.nodes = n;
    }
    if let Some(t) = flags.grad_tol {
        cfg.grad_tol = t;
    }
    if let Some(k) = flags.restarts {
        cfg.restarts = k;
    }
    if let Some(m) = flags.max_iters {
        cfg.max_iters = m;
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(b) = bracket {
        cfg.modulus_bracket = b;
    }
    cfg.validate()?;
    Ok(cfg)
}
