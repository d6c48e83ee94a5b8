//! The full learning pipeline: estimate the hidden product chain from
//! episodes, distill a task automaton by cone lumping, and remove
//! environmental bias.

use crate::automata::TaskAutomaton;
use crate::debias::{is_consistent, remove_environmental_bias, DebiasOutcome};
use crate::distill::distill_ta;
use crate::episode::Episode;
use crate::error::Result;
use crate::hmm::{
    encode_episodes, spatial_initialization, train, uniform_initialization, HmmParams,
    ObservationMode, TrainOptions, TrainReport,
};
use crate::mdp::LabelledMdp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Uniform,
    Spatial,
}

impl std::str::FromStr for InitKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uniform" => Ok(InitKind::Uniform),
            "spatial" => Ok(InitKind::Spatial),
            other => Err(format!("unknown init kind {other:?} (uniform|spatial)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub k: usize,
    pub init: InitKind,
    pub seed: u64,
    pub smoothing: f64,
    pub threshold: f64,
    pub obs_mode: ObservationMode,
    pub train: TrainOptions,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            k: 3,
            init: InitKind::Spatial,
            seed: 0,
            smoothing: 1.0,
            threshold: 0.01,
            obs_mode: ObservationMode::State,
            train: TrainOptions::default(),
        }
    }
}

/// Initial parameters for the requested mode.
pub fn initial_params(mdp: &LabelledMdp, opts: &PipelineOptions) -> Result<HmmParams> {
    let transition = match opts.init {
        InitKind::Spatial => spatial_initialization(mdp, opts.k, opts.smoothing),
        InitKind::Uniform => uniform_initialization(opts.k * mdp.num_states(), opts.seed),
    };
    HmmParams::for_mdp(mdp, opts.k, transition, opts.obs_mode)
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub params: HmmParams,
    pub report: TrainReport,
    pub distilled: TaskAutomaton,
    pub debias: DebiasOutcome,
}

impl PipelineResult {
    pub fn automaton(&self) -> &TaskAutomaton {
        &self.debias.ta
    }
}

/// Run all three steps on pre-collected episodes.
pub fn learn_task_automaton(
    mdp: &LabelledMdp,
    episodes: &[Episode],
    opts: &PipelineOptions,
) -> Result<PipelineResult> {
    let init = initial_params(mdp, opts)?;
    let seqs = encode_episodes(episodes, mdp, opts.obs_mode);
    let (params, report) = train(&init, &seqs, &opts.train)?;
    let distilled = distill_ta(&params, mdp.labels(), opts.threshold)?;
    let debias = remove_environmental_bias(&distilled, episodes)?;
    Ok(PipelineResult {
        params,
        report,
        distilled,
        debias,
    })
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub chosen_k: usize,
    pub result: PipelineResult,
    /// `(k, reason)` for every rejected size.
    pub failures: Vec<(usize, String)>,
}

/// Try k = 1..=k_max and keep the smallest k whose distilled, de-biased
/// automaton is consistent with every episode.
pub fn sweep_k(
    mdp: &LabelledMdp,
    episodes: &[Episode],
    k_max: usize,
    opts: &PipelineOptions,
) -> Result<SweepOutcome> {
    let mut failures = Vec::new();
    for k in 1..=k_max {
        let attempt = PipelineOptions {
            k,
            ..opts.clone()
        };
        match learn_task_automaton(mdp, episodes, &attempt) {
            Ok(result) => {
                if is_consistent(result.automaton(), episodes) {
                    return Ok(SweepOutcome {
                        chosen_k: k,
                        result,
                        failures,
                    });
                }
                failures.push((k, "output automaton inconsistent with episodes".into()));
            }
            Err(e) => failures.push((k, e.to_string())),
        }
    }
    Err(crate::error::Error::Structural(format!(
        "no k in 1..={k_max} produced a consistent automaton: {failures:?}"
    )))
}
