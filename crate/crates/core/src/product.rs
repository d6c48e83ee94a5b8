//! Product of a labelled MDP with a task automaton.
//!
//! Product states pair an MDP state with an automaton state and are indexed
//! in automaton-major blocks: `index = q * |S| + s`. This block layout is
//! the one convention shared with the hidden-state space of the HMM learner
//! and the structured emission matrix.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};

use crate::automata::{Nfa, TaskAutomaton};
use crate::digraph::Digraph;
use crate::error::{Error, Result};
use crate::label::Label;
use crate::mdp::{Action, LabelledMdp, Policy};

/// The synchronized product MDP: per-action transition matrices over
/// `S × Q`, with reward 1 exactly on transitions into accepting product
/// states.
#[derive(Debug, Clone)]
pub struct ProductModel {
    n_mdp: usize,
    n_ta: usize,
    initial: usize,
    per_action: Vec<Array2<f64>>,
    accepting: Vec<bool>,
    state_to_label: Vec<Label>,
}

impl ProductModel {
    pub fn num_states(&self) -> usize {
        self.n_mdp * self.n_ta
    }

    pub fn num_mdp_states(&self) -> usize {
        self.n_mdp
    }

    pub fn num_ta_states(&self) -> usize {
        self.n_ta
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn action_matrix(&self, action: Action) -> &Array2<f64> {
        &self.per_action[action.index()]
    }

    pub fn is_accepting(&self, state: usize) -> bool {
        self.accepting[state]
    }

    /// Reward of a transition: 1 iff the target is accepting.
    pub fn reward(&self, target: usize) -> u8 {
        self.accepting[target] as u8
    }

    pub fn mdp_component(&self, state: usize) -> usize {
        state % self.n_mdp
    }

    pub fn ta_component(&self, state: usize) -> usize {
        state / self.n_mdp
    }
}

/// Build the product of an MDP and a (complete) task automaton.
pub fn build_product(mdp: &LabelledMdp, ta: &TaskAutomaton) -> Result<ProductModel> {
    let range = mdp.label_range();
    for q in 0..ta.num_states() {
        for label in &range {
            if ta.target(q, label).is_none() {
                return Err(Error::IncompleteAutomaton {
                    state: ta.name(q).to_string(),
                    symbol: label.to_string(),
                });
            }
        }
    }
    let n_mdp = mdp.num_states();
    let n_ta = ta.num_states();
    let n = n_mdp * n_ta;
    let mut per_action = vec![Array2::<f64>::zeros((n, n)); 4];
    for action in Action::ALL {
        let m = &mut per_action[action.index()];
        for s in 0..n_mdp {
            let s_next = mdp.step(s, action);
            let label = mdp.label(s_next);
            for q in 0..n_ta {
                let q_next = ta.target(q, label).expect("checked complete");
                m[[q * n_mdp + s, q_next * n_mdp + s_next]] = 1.0;
            }
        }
    }
    let accepting: Vec<bool> = (0..n).map(|i| ta.is_accepting(i / n_mdp)).collect();
    let state_to_label: Vec<Label> = (0..n).map(|i| mdp.label(i % n_mdp).clone()).collect();
    Ok(ProductModel {
        n_mdp,
        n_ta,
        initial: ta.initial() * n_mdp + mdp.initial_state(),
        per_action,
        accepting,
        state_to_label,
    })
}

/// A product Markov chain: the product MDP closed under a fixed policy.
#[derive(Debug, Clone)]
pub struct ProductChain {
    pub transition: Array2<f64>,
    pub initial: usize,
    pub accepting: Vec<bool>,
    pub state_to_mdp: Vec<usize>,
    pub state_to_label: Vec<Label>,
    pub n_mdp: usize,
}

impl ProductChain {
    pub fn num_states(&self) -> usize {
        self.transition.nrows()
    }

    pub fn digraph(&self, threshold: f64) -> Digraph {
        Digraph::from_matrix(&self.transition, self.initial, threshold)
    }

    /// Observation of a hidden state: the visible MDP component plus the
    /// reward bit.
    pub fn observation(&self, state: usize) -> (usize, u8) {
        (self.state_to_mdp[state], self.accepting[state] as u8)
    }
}

/// Close a product MDP under a policy: `P = Σ_a π(a|s) · T_a`.
pub fn induce_chain(product: &ProductModel, policy: &Policy) -> ProductChain {
    let n = product.num_states();
    let n_mdp = product.n_mdp;
    let mut transition = Array2::<f64>::zeros((n, n));
    for action in Action::ALL {
        let m = product.action_matrix(action);
        for i in 0..n {
            let w = policy.action_prob(i % n_mdp, action);
            if w == 0.0 {
                continue;
            }
            for j in 0..n {
                let p = m[[i, j]];
                if p != 0.0 {
                    transition[[i, j]] += w * p;
                }
            }
        }
    }
    ProductChain {
        transition,
        initial: product.initial,
        accepting: product.accepting.clone(),
        state_to_mdp: (0..n).map(|i| i % n_mdp).collect(),
        state_to_label: product.state_to_label.clone(),
        n_mdp,
    }
}

/// The policy-closed transition matrix of the MDP itself (|S| × |S|).
pub fn mdp_chain(mdp: &LabelledMdp, policy: &Policy) -> Array2<f64> {
    let n = mdp.num_states();
    let mut m = Array2::<f64>::zeros((n, n));
    for s in 0..n {
        for action in Action::ALL {
            m[[s, mdp.step(s, action)]] += policy.action_prob(s, action);
        }
    }
    m
}

/// Read off the NFA underlying a product chain: states are the reachable
/// product states, each edge is labelled with the label of its target's MDP
/// component, and accepting states are those with reward 1.
pub fn extract_nfa(chain: &ProductChain, threshold: f64) -> Nfa {
    let digraph = chain.digraph(threshold);
    let nodes: Vec<usize> = digraph.nodes.iter().copied().collect();
    let mut new_id = vec![usize::MAX; chain.num_states()];
    for (i, &node) in nodes.iter().enumerate() {
        new_id[node] = i;
    }
    let alphabet = chain.state_to_label.iter().cloned().collect();
    let names = nodes
        .iter()
        .map(|&p| format!("s{}q{}", chain.state_to_mdp[p], p / chain.n_mdp))
        .collect();
    let mut nfa = Nfa::new(nodes.len(), new_id[chain.initial], alphabet).with_names(names);
    for &(i, j) in &digraph.edges {
        nfa.add_transition(new_id[i], chain.state_to_label[j].clone(), new_id[j]);
    }
    for &node in &nodes {
        nfa.set_accepting(new_id[node], chain.accepting[node]);
    }
    nfa
}

#[derive(Debug, Clone, Copy)]
pub struct RecoveryOptions {
    /// Edges above this value count as present when restricting to the
    /// reachable part of the chain.
    pub edge_threshold: f64,
    /// Maximum allowed total-variation distance between the marginals
    /// recovered from different hidden states observing the same MDP state.
    pub consistency_tol: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions {
            edge_threshold: 0.0,
            consistency_tol: 0.1,
        }
    }
}

/// Recover the MDP transition matrix from a product chain by marginalizing
/// each hidden row over the rows' MDP observations.
///
/// Every reachable hidden state observing the same MDP state must yield the
/// same marginal (up to `consistency_tol`); disagreement signals a
/// structurally wrong chain. The returned row is the average over the
/// agreeing hidden states.
pub fn recover_mdp_probabilities(
    chain: &ProductChain,
    opts: RecoveryOptions,
) -> Result<Array2<f64>> {
    let n_mdp = chain.n_mdp;
    let reachable = chain.digraph(opts.edge_threshold).nodes;
    let mut rows: Vec<Vec<Array1<f64>>> = vec![Vec::new(); n_mdp];
    for &i in &reachable {
        let mut marginal = Array1::<f64>::zeros(n_mdp);
        for j in 0..chain.num_states() {
            marginal[chain.state_to_mdp[j]] += chain.transition[[i, j]];
        }
        rows[chain.state_to_mdp[i]].push(marginal);
    }
    let mut out = Array2::<f64>::zeros((n_mdp, n_mdp));
    for (s, group) in rows.iter().enumerate() {
        if group.is_empty() {
            return Err(Error::Structural(format!(
                "no reachable hidden state observes MDP state {s}"
            )));
        }
        for other in &group[1..] {
            let tv = 0.5
                * group[0]
                    .iter()
                    .zip(other.iter())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>();
            if tv > opts.consistency_tol {
                return Err(Error::MarginalMismatch {
                    state: s,
                    tv,
                    tol: opts.consistency_tol,
                });
            }
        }
        let mut avg = Array1::<f64>::zeros(n_mdp);
        for m in group {
            avg += m;
        }
        avg /= group.len() as f64;
        out.row_mut(s).assign(&avg);
    }
    Ok(out)
}

/// Per-action variant of the recovery, given the full product MDP.
pub fn recover_mdp_action_probabilities(
    product: &ProductModel,
    opts: RecoveryOptions,
) -> Result<Vec<Array2<f64>>> {
    Action::ALL
        .iter()
        .map(|&a| {
            let chain = ProductChain {
                transition: product.action_matrix(a).clone(),
                initial: product.initial,
                accepting: product.accepting.clone(),
                state_to_mdp: (0..product.num_states())
                    .map(|i| i % product.n_mdp)
                    .collect(),
                state_to_label: product.state_to_label.clone(),
                n_mdp: product.n_mdp,
            };
            recover_mdp_probabilities(&chain, opts)
        })
        .collect()
}

/// Exhaustively compare observation-sequence probabilities of two chains up
/// to the given horizon (test utility for small instances only).
///
/// Observations are `(mdp state, reward bit)` pairs; the chains must share
/// the MDP observation space.
pub fn observationally_equivalent(
    a: &ProductChain,
    b: &ProductChain,
    horizon: usize,
    tol: f64,
    state_cap: usize,
) -> Result<bool> {
    if a.num_states() > state_cap || b.num_states() > state_cap {
        return Err(Error::StateSpaceTooLarge {
            size: a.num_states().max(b.num_states()),
            cap: state_cap,
        });
    }
    if a.n_mdp != b.n_mdp {
        return Err(Error::Simulation(
            "observation spaces differ (different MDP state counts)".into(),
        ));
    }
    // The initial observation has probability 1 in both chains.
    if a.observation(a.initial) != b.observation(b.initial) {
        return Ok(false);
    }
    let mut alpha_a = vec![0.0; a.num_states()];
    alpha_a[a.initial] = 1.0;
    let mut alpha_b = vec![0.0; b.num_states()];
    alpha_b[b.initial] = 1.0;
    obs_equiv_rec(a, b, &alpha_a, &alpha_b, horizon, tol)
}

fn obs_prefix_step(
    chain: &ProductChain,
    alpha: &[f64],
    obs: (usize, u8),
) -> (Vec<f64>, f64) {
    let n = chain.num_states();
    let mut next = vec![0.0; n];
    for i in 0..n {
        let w = alpha[i];
        if w == 0.0 {
            continue;
        }
        for j in 0..n {
            if chain.observation(j) == obs {
                next[j] += w * chain.transition[[i, j]];
            }
        }
    }
    let total = next.iter().sum();
    (next, total)
}

fn obs_equiv_rec(
    a: &ProductChain,
    b: &ProductChain,
    alpha_a: &[f64],
    alpha_b: &[f64],
    horizon: usize,
    tol: f64,
) -> Result<bool> {
    if horizon == 0 {
        return Ok(true);
    }
    // Candidate next observations: anything with support in either chain.
    let mut candidates: BTreeSet<(usize, u8)> = BTreeSet::new();
    for (chain, alpha) in [(a, alpha_a), (b, alpha_b)] {
        for i in 0..chain.num_states() {
            if alpha[i] == 0.0 {
                continue;
            }
            for j in 0..chain.num_states() {
                if chain.transition[[i, j]] > 0.0 {
                    candidates.insert(chain.observation(j));
                }
            }
        }
    }
    for obs in candidates {
        let (next_a, pa) = obs_prefix_step(a, alpha_a, obs);
        let (next_b, pb) = obs_prefix_step(b, alpha_b, obs);
        if (pa - pb).abs() > tol {
            return Ok(false);
        }
        if pa > 0.0 || pb > 0.0 {
            if !obs_equiv_rec(a, b, &next_a, &next_b, horizon - 1, tol)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The MDP-restricted task automaton: the sub-automaton of `ta` covered by
/// transitions of the reachable product, i.e. the fragment of the task
/// reachable via traces attainable in this MDP.
pub fn mdp_restricted_ta(mdp: &LabelledMdp, ta: &TaskAutomaton) -> Result<TaskAutomaton> {
    let product = build_product(mdp, ta)?;
    let chain = induce_chain(&product, &Policy::uniform(mdp));
    let digraph = chain.digraph(0.0);
    let mut out = TaskAutomaton::new(ta.num_states(), ta.initial(), ta.alphabet().clone())
        .with_names((0..ta.num_states()).map(|q| ta.name(q).to_string()).collect());
    for &(i, j) in &digraph.edges {
        let qi = product.ta_component(i);
        let qj = product.ta_component(j);
        out.add_transition(qi, chain.state_to_label[j].clone(), qj)?;
    }
    for q in 0..ta.num_states() {
        out.set_accepting(q, ta.is_accepting(q));
    }
    Ok(out.trimmed())
}
