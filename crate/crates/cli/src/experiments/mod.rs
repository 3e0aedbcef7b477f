//! The experiment pipelines. Each one composes module operations, checks
//! its hard invariants and returns its artifacts in memory; nothing here
//! touches the file system.

mod dynamics;
mod measures;

use nuh_core::torus::make_da_map;
use nuh_core::{NoiseModel, TorusMap};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::CliError;
use crate::output::RunOutput;

/// Resolved inputs shared by all pipelines.
pub(crate) struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub map: TorusMap,
    pub model: NoiseModel,
    pub seed: u64,
    pub streams: usize,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self, CliError> {
        let map = make_da_map(&cfg.map).map_err(|e| CliError::Usage(format!("map: {e}")))?;
        let model = NoiseModel::new(cfg.noise.epsilon).map_err(|e| CliError::Usage(format!("noise: {e}")))?;
        require(cfg.noise.streams >= 1, "noise.streams must be >= 1")?;
        Ok(Context { cfg, map, model, seed: cfg.noise.seed, streams: cfg.noise.streams })
    }
}

pub(crate) fn require(cond: bool, msg: &str) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Usage(msg.to_string()))
    }
}

pub(crate) fn csv_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Runs `experiment` on `cfg`.
///
/// The result depends only on the config (seed included), never on the
/// number of worker threads.
pub fn run_experiment(experiment: Experiment, cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    if let Some(named) = cfg.experiment {
        if named != experiment {
            return Err(CliError::Usage(format!("config is for `{named}`, not `{experiment}`")));
        }
    }
    let ctx = Context::new(cfg)?;
    let (statistics, invariants, artifacts) = match experiment {
        Experiment::VerifyMap => dynamics::verify_map(&ctx)?,
        Experiment::PlissDemo => dynamics::pliss_demo(&ctx)?,
        Experiment::HypTimes => dynamics::hyp_times(&ctx)?,
        Experiment::Contraction => dynamics::contraction(&ctx)?,
        Experiment::Distortion => dynamics::distortion(&ctx)?,
        Experiment::Rnue => measures::rnue(&ctx)?,
        Experiment::Frequency => measures::frequency(&ctx)?,
        Experiment::Ulam => measures::ulam(&ctx)?,
        Experiment::Stability => measures::stability(&ctx)?,
        Experiment::Basins => measures::basins(&ctx)?,
    };
    Ok(RunOutput { experiment, config: cfg.effective(experiment), statistics, invariants, artifacts })
}

pub(crate) type Pipeline = (serde_json::Value, Vec<crate::output::Invariant>, Vec<crate::output::Artifact>);
