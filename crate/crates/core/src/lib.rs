//! Learn task automata from episodes of agent experience in labelled
//! gridworld MDPs with sparse, non-Markovian reward.
//!
//! The pipeline has three steps:
//!
//! 1. [`hmm`] — treat the unknown product of the environment with the task
//!    automaton as a hidden Markov chain over `k` blocks of MDP states and
//!    estimate its transition matrix with Baum-Welch, using the structured
//!    0/1 emission matrix and optionally a grid-adjacency prior.
//! 2. [`distill`] — threshold the learned matrix into a digraph, read off
//!    the NFA whose edges carry the target state's label, and determinize
//!    it with cone lumping.
//! 3. [`debias`] — merge away labels that the training episodes cannot
//!    distinguish from no-ops, then minimize.
//!
//! [`mdp`], [`episode`], [`product`] and [`automata`] provide the
//! environment simulator, the ground-truth product construction, and the
//! classical automata algorithms used as oracles.

pub mod automata;
pub mod config;
pub mod debias;
pub mod digraph;
pub mod distill;
pub mod episode;
pub mod error;
pub mod hmm;
pub mod label;
pub mod matrixio;
pub mod mdp;
pub mod pipeline;
pub mod presets;
pub mod product;
pub mod unionfind;

pub use automata::{
    isomorphic, language_equivalent, minimize, subset_construction, Completion, Nfa,
    TaskAutomaton,
};
pub use debias::{is_consistent, merge_on_label, remove_environmental_bias};
pub use episode::{simulate_episodes, Episode};
pub use error::{Error, Result};
pub use label::Label;
pub use mdp::{Action, LabelledMdp, Policy};
pub use product::{build_product, extract_nfa, induce_chain, recover_mdp_probabilities};

use std::path::Path;

/// Write a file via a temporary sibling and rename, so failed commands
/// leave no partial outputs behind.
pub fn write_atomic(path: impl AsRef<Path>, content: &str) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
