//! Baum-Welch estimation of the hidden product chain from observation
//! sequences.
//!
//! Hidden states live in `k` blocks of `|S|` (`index = block * |S| + s`);
//! the last block is the accepting one. Observations pair the visible MDP
//! state (or its label) with the reward bit, so the emission matrix is a
//! fixed 0/1 block matrix and is not re-estimated unless asked.
//!
//! The forward/backward recursions are scaled per step; the scaling
//! constants define the log-likelihood. Since emissions are deterministic,
//! each observation pins the hidden state to at most `k` candidates, and the
//! E-step only ever touches those supports.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::digraph::Digraph;
use crate::episode::Episode;
use crate::error::{Error, Result};
use crate::label::Label;
use crate::mdp::{Action, LabelledMdp};
use crate::product::ProductChain;

/// What the observations encode alongside the reward bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObservationMode {
    /// `(s, r)` pairs: `o = r * |S| + s`. What the experiments use.
    #[default]
    State,
    /// `(L(s), r)` pairs: `o = r * |labels| + label_index`.
    Label,
}

/// An encoded observation sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationSeq(pub Vec<usize>);

/// Encode episodes for the given mode. In label mode the label index is its
/// position in the sorted label range of the MDP.
pub fn encode_episodes(
    episodes: &[Episode],
    mdp: &LabelledMdp,
    mode: ObservationMode,
) -> Vec<ObservationSeq> {
    let labels: Vec<Label> = mdp.label_range().into_iter().collect();
    episodes
        .iter()
        .map(|ep| {
            let seq = ep
                .states
                .iter()
                .zip(&ep.rewards)
                .map(|(&s, &r)| match mode {
                    ObservationMode::State => (r as usize) * mdp.num_states() + s,
                    ObservationMode::Label => {
                        let idx = labels
                            .iter()
                            .position(|l| l == mdp.label(s))
                            .expect("state label is in the label range");
                        (r as usize) * labels.len() + idx
                    }
                })
                .collect();
            ObservationSeq(seq)
        })
        .collect()
}

/// The structured emission matrix: `k·n` hidden states × `2·n` observations;
/// block `q` emits `(s, 0)` deterministically except the last block, which
/// emits `(s, 1)`. (The binary block column pattern Kronecker-multiplied
/// with the identity.)
pub fn build_emission_matrix(k: usize, n_states: usize) -> Array2<f64> {
    assert!(k >= 1 && n_states >= 1);
    let mut e = Array2::<f64>::zeros((k * n_states, 2 * n_states));
    for q in 0..k {
        let r = usize::from(q == k - 1);
        for s in 0..n_states {
            e[[q * n_states + s, r * n_states + s]] = 1.0;
        }
    }
    e
}

/// Label-observation variant: block `q`, state `s` emits
/// `(label_index(L(s)), reward_bit)`.
pub fn build_label_emission_matrix(k: usize, mdp: &LabelledMdp) -> Array2<f64> {
    let labels: Vec<Label> = mdp.label_range().into_iter().collect();
    let n = mdp.num_states();
    let m = labels.len();
    let mut e = Array2::<f64>::zeros((k * n, 2 * m));
    for q in 0..k {
        let r = usize::from(q == k - 1);
        for s in 0..n {
            let idx = labels.iter().position(|l| l == mdp.label(s)).unwrap();
            e[[q * n + s, r * m + idx]] = 1.0;
        }
    }
    e
}

/// Grid-adjacency prior for the transition matrix: 0.25 to each reachable
/// neighbour, 0.25 per adjacent wall staying put, lifted block-diagonally
/// across the `k` hidden blocks, then smoothed by `smoothing / (k·|S|)` on
/// zero entries and renormalized.
pub fn spatial_initialization(mdp: &LabelledMdp, k: usize, smoothing: f64) -> Array2<f64> {
    assert!(k >= 1 && smoothing > 0.0);
    let n = mdp.num_states();
    let mut base = Array2::<f64>::zeros((n, n));
    for s in 0..n {
        for action in Action::ALL {
            base[[s, mdp.step(s, action)]] += 0.25;
        }
    }
    let nh = k * n;
    let eps = smoothing / nh as f64;
    let mut m = Array2::<f64>::zeros((nh, nh));
    for q in 0..k {
        for s in 0..n {
            for s2 in 0..n {
                m[[q * n + s, q * n + s2]] = base[[s, s2]];
            }
        }
    }
    m.mapv_inplace(|v| if v == 0.0 { eps } else { v });
    for mut row in m.rows_mut() {
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    m
}

/// Random row-stochastic matrix (uniform on the simplex per row), seeded.
pub fn uniform_initialization(n_hidden: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Array2::<f64>::zeros((n_hidden, n_hidden));
    for mut row in m.rows_mut() {
        let mut sum = 0.0;
        for v in row.iter_mut() {
            // Exponential(1) draws normalized to the simplex; strictly
            // positive since `random()` is in [0, 1).
            let u: f64 = rng.random();
            *v = -f64::ln(1.0 - u);
            sum += *v;
        }
        row.mapv_inplace(|v| v / sum);
    }
    m
}

/// The parameters of the hidden product chain under a fixed policy.
#[derive(Debug, Clone)]
pub struct HmmParams {
    pub transition: Array2<f64>,
    pub emission: Array2<f64>,
    /// One-hot initial distribution (the start state is always known).
    pub initial: Array1<f64>,
    n_mdp: usize,
    num_blocks: usize,
}

impl HmmParams {
    pub fn new(
        transition: Array2<f64>,
        emission: Array2<f64>,
        initial: Array1<f64>,
        n_mdp: usize,
        num_blocks: usize,
    ) -> Result<Self> {
        let n = num_blocks * n_mdp;
        if transition.nrows() != n || transition.ncols() != n {
            return Err(Error::Structural(format!(
                "transition matrix must be {n}x{n} for {num_blocks} blocks of {n_mdp} states"
            )));
        }
        if emission.nrows() != n {
            return Err(Error::Structural(
                "emission matrix row count must match the hidden state count".into(),
            ));
        }
        if initial.len() != n {
            return Err(Error::Structural(
                "initial distribution length must match the hidden state count".into(),
            ));
        }
        for (name, m) in [("transition", &transition), ("emission", &emission)] {
            for (i, row) in m.rows().into_iter().enumerate() {
                if row.iter().any(|&v| v < 0.0) || (row.sum() - 1.0).abs() > 1e-9 {
                    return Err(Error::Structural(format!(
                        "{name} row {i} is not a probability distribution"
                    )));
                }
            }
        }
        let ones: Vec<usize> = initial
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, _)| i)
            .collect();
        if ones.len() != 1 || initial[ones[0]] != 1.0 {
            return Err(Error::Structural(
                "initial distribution must have support 1".into(),
            ));
        }
        Ok(HmmParams {
            transition,
            emission,
            initial,
            n_mdp,
            num_blocks,
        })
    }

    /// Parameters with the given initialization mode for the transition
    /// matrix and the fixed structured emissions.
    pub fn for_mdp(
        mdp: &LabelledMdp,
        k: usize,
        transition: Array2<f64>,
        mode: ObservationMode,
    ) -> Result<Self> {
        let emission = match mode {
            ObservationMode::State => build_emission_matrix(k, mdp.num_states()),
            ObservationMode::Label => build_label_emission_matrix(k, mdp),
        };
        let n = k * mdp.num_states();
        let mut initial = Array1::<f64>::zeros(n);
        initial[mdp.initial_state()] = 1.0; // block 0
        HmmParams::new(transition, emission, initial, mdp.num_states(), k)
    }

    /// Ground-truth parameters from a product chain. The chain's accepting
    /// states must be exactly the last block (reorder the automaton with
    /// accepting states last before building the product).
    pub fn from_product_chain(chain: &ProductChain, mode: ObservationMode) -> Result<Self> {
        let n = chain.num_states();
        let n_mdp = chain.n_mdp;
        if n % n_mdp != 0 {
            return Err(Error::Structural("chain is not block-shaped".into()));
        }
        let k = n / n_mdp;
        for i in 0..n {
            let expected = i / n_mdp == k - 1;
            if chain.accepting[i] != expected {
                return Err(Error::Structural(format!(
                    "accepting states must form the last hidden block (state {i})"
                )));
            }
        }
        let emission = match mode {
            ObservationMode::State => build_emission_matrix(k, n_mdp),
            ObservationMode::Label => {
                return Err(Error::Structural(
                    "label-mode ground truth needs the MDP; use for_mdp".into(),
                ))
            }
        };
        let mut initial = Array1::<f64>::zeros(n);
        initial[chain.initial] = 1.0;
        HmmParams::new(chain.transition.clone(), emission, initial, n_mdp, k)
    }

    pub fn n_hidden(&self) -> usize {
        self.transition.nrows()
    }

    pub fn n_obs(&self) -> usize {
        self.emission.ncols()
    }

    pub fn n_mdp_states(&self) -> usize {
        self.n_mdp
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn initial_index(&self) -> usize {
        self.initial
            .iter()
            .position(|&v| v != 0.0)
            .expect("validated one-hot")
    }

    /// Positive-support sets per observation, the key to the sparse E-step.
    fn supports(&self) -> Vec<Vec<usize>> {
        let mut supports = vec![Vec::new(); self.n_obs()];
        for i in 0..self.n_hidden() {
            for (o, &p) in self.emission.row(i).iter().enumerate() {
                if p > 0.0 {
                    supports[o].push(i);
                }
            }
        }
        supports
    }
}

/// Result of one forward-backward sweep over a single sequence.
#[derive(Debug, Clone)]
pub struct ForwardBackward {
    /// `gamma[[t, i]]`: posterior of hidden state `i` at time `t`.
    pub gamma: Array2<f64>,
    /// `xi_sum[[i, j]]`: expected transition counts, summed over time.
    pub xi_sum: Array2<f64>,
    pub log_likelihood: f64,
}

struct SparseSweep {
    /// Per step: (support states, scaled alpha on the support).
    alphas: Vec<(Vec<usize>, Vec<f64>)>,
    scales: Vec<f64>,
    log_likelihood: f64,
}

fn forward_sweep(params: &HmmParams, supports: &[Vec<usize>], obs: &[usize]) -> Result<SparseSweep> {
    let mut alphas = Vec::with_capacity(obs.len());
    let mut scales = Vec::with_capacity(obs.len());
    let mut log_likelihood = 0.0;

    for (t, &o) in obs.iter().enumerate() {
        if o >= params.n_obs() {
            return Err(Error::Structural(format!(
                "observation index {o} out of range at step {t}"
            )));
        }
        let support = &supports[o];
        let mut alpha = vec![0.0; support.len()];
        if t == 0 {
            for (idx, &i) in support.iter().enumerate() {
                alpha[idx] = params.initial[i] * params.emission[[i, o]];
            }
        } else {
            let (prev_support, prev_alpha): &(Vec<usize>, Vec<f64>) = alphas.last().unwrap();
            for (idx, &j) in support.iter().enumerate() {
                let mut sum = 0.0;
                for (pidx, &i) in prev_support.iter().enumerate() {
                    sum += prev_alpha[pidx] * params.transition[[i, j]];
                }
                alpha[idx] = params.emission[[j, o]] * sum;
            }
        }
        let c: f64 = alpha.iter().sum();
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::ImpossibleObservation { step: t });
        }
        for a in alpha.iter_mut() {
            *a /= c;
        }
        scales.push(c);
        log_likelihood += c.ln();
        alphas.push((support.clone(), alpha));
    }
    Ok(SparseSweep {
        alphas,
        scales,
        log_likelihood,
    })
}

/// Accumulators produced by the E-step for one sequence (or merged across
/// sequences).
#[derive(Debug, Clone)]
struct EStep {
    xi_sum: Array2<f64>,
    /// Σ_{t < T} gamma_i(t): the transition-update denominators.
    gamma_den: Array1<f64>,
    /// Σ_t gamma over all t per (observation, state), for optional emission
    /// re-estimation. Empty when not requested.
    gamma_obs: Option<Array2<f64>>,
    log_likelihood: f64,
}

impl EStep {
    fn zeros(n: usize, n_obs: usize, with_obs: bool) -> Self {
        EStep {
            xi_sum: Array2::zeros((n, n)),
            gamma_den: Array1::zeros(n),
            gamma_obs: with_obs.then(|| Array2::zeros((n_obs, n))),
            log_likelihood: 0.0,
        }
    }

    fn merge(&mut self, other: &EStep) {
        self.xi_sum += &other.xi_sum;
        self.gamma_den += &other.gamma_den;
        if let (Some(a), Some(b)) = (self.gamma_obs.as_mut(), other.gamma_obs.as_ref()) {
            *a += b;
        }
        self.log_likelihood += other.log_likelihood;
    }
}

/// Backward sweep fused with accumulation, walking only emission supports.
fn accumulate_sequence(
    params: &HmmParams,
    supports: &[Vec<usize>],
    obs: &[usize],
    acc: &mut EStep,
) -> Result<f64> {
    let sweep = forward_sweep(params, supports, obs)?;
    let t_max = obs.len();
    acc.log_likelihood += sweep.log_likelihood;

    // beta on the support of the current step, walked backwards.
    let (last_support, _) = &sweep.alphas[t_max - 1];
    let mut beta: Vec<f64> = vec![1.0; last_support.len()];

    for t in (0..t_max).rev() {
        let (support, alpha) = &sweep.alphas[t];
        if t + 1 < t_max {
            let (next_support, _) = &sweep.alphas[t + 1];
            let o_next = obs[t + 1];
            let scale = sweep.scales[t + 1];
            let mut new_beta = vec![0.0; support.len()];
            for (idx, &i) in support.iter().enumerate() {
                let mut sum = 0.0;
                for (nidx, &j) in next_support.iter().enumerate() {
                    sum += params.transition[[i, j]]
                        * params.emission[[j, o_next]]
                        * beta[nidx];
                }
                new_beta[idx] = sum / scale;
            }
            // xi(t) over the two supports.
            for (idx, &i) in support.iter().enumerate() {
                let base = alpha[idx] / scale;
                if base == 0.0 {
                    continue;
                }
                for (nidx, &j) in next_support.iter().enumerate() {
                    let v = base
                        * params.transition[[i, j]]
                        * params.emission[[j, o_next]]
                        * beta[nidx];
                    if v != 0.0 {
                        acc.xi_sum[[i, j]] += v;
                    }
                }
            }
            // gamma(t) enters the denominator for t < T.
            for (idx, &i) in support.iter().enumerate() {
                acc.gamma_den[i] += alpha[idx] * new_beta[idx];
            }
            if let Some(go) = acc.gamma_obs.as_mut() {
                for (idx, &i) in support.iter().enumerate() {
                    go[[obs[t], i]] += alpha[idx] * new_beta[idx];
                }
            }
            beta = new_beta;
        } else if let Some(go) = acc.gamma_obs.as_mut() {
            // Final step contributes to emission statistics only.
            for (idx, &i) in support.iter().enumerate() {
                go[[obs[t], i]] += alpha[idx] * beta[idx];
            }
        }
    }
    Ok(sweep.log_likelihood)
}

/// Scaled forward-backward over one observation sequence, returning dense
/// posteriors. `gamma` rows sum to 1; `xi_sum` is the per-transition
/// expected-count matrix summed over time.
pub fn forward_backward(params: &HmmParams, obs: &ObservationSeq) -> Result<ForwardBackward> {
    if obs.0.is_empty() {
        return Err(Error::Structural("empty observation sequence".into()));
    }
    let supports = params.supports();
    let sweep = forward_sweep(params, &supports, &obs.0)?;
    let n = params.n_hidden();
    let t_max = obs.0.len();
    let mut gamma = Array2::<f64>::zeros((t_max, n));
    let mut xi_sum = Array2::<f64>::zeros((n, n));

    let (last_support, _) = &sweep.alphas[t_max - 1];
    let mut beta: Vec<f64> = vec![1.0; last_support.len()];
    for t in (0..t_max).rev() {
        let (support, alpha) = &sweep.alphas[t];
        if t + 1 < t_max {
            let (next_support, _) = &sweep.alphas[t + 1];
            let o_next = obs.0[t + 1];
            let scale = sweep.scales[t + 1];
            let mut new_beta = vec![0.0; support.len()];
            for (idx, &i) in support.iter().enumerate() {
                let mut sum = 0.0;
                for (nidx, &j) in next_support.iter().enumerate() {
                    sum +=
                        params.transition[[i, j]] * params.emission[[j, o_next]] * beta[nidx];
                }
                new_beta[idx] = sum / scale;
                for (nidx, &j) in next_support.iter().enumerate() {
                    xi_sum[[i, j]] += alpha[idx] / scale
                        * params.transition[[i, j]]
                        * params.emission[[j, o_next]]
                        * beta[nidx];
                }
            }
            beta = new_beta;
        }
        for (idx, &i) in support.iter().enumerate() {
            gamma[[t, i]] = alpha[idx] * beta[idx];
        }
    }
    Ok(ForwardBackward {
        gamma,
        xi_sum,
        log_likelihood: sweep.log_likelihood,
    })
}

#[derive(Debug, Clone)]
pub struct PassStats {
    /// Maximum absolute row sum of the transition-matrix change.
    pub delta: f64,
    /// Total log-likelihood of the data under the parameters *before* the
    /// update.
    pub log_likelihood: f64,
    /// Hidden states never visited this pass; their rows were kept.
    pub stale_rows: usize,
}

fn estep(
    params: &HmmParams,
    episodes: &[ObservationSeq],
    with_obs: bool,
) -> Result<EStep> {
    let supports = params.supports();
    let n = params.n_hidden();
    let n_obs = params.n_obs();
    // Fixed-size chunks merged in order keep the reduction deterministic
    // regardless of thread count.
    const CHUNK: usize = 32;
    let chunks: Vec<Result<EStep>> = episodes
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = EStep::zeros(n, n_obs, with_obs);
            for seq in chunk {
                if seq.0.is_empty() {
                    return Err(Error::Structural("empty observation sequence".into()));
                }
                accumulate_sequence(params, &supports, &seq.0, &mut acc)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = EStep::zeros(n, n_obs, with_obs);
    for chunk in chunks {
        total.merge(&chunk?);
    }
    Ok(total)
}

/// One multi-sequence EM pass: accumulate expected counts across all
/// episodes, then re-estimate the transition matrix. Emissions stay fixed
/// unless `reestimate_emissions` is set. Rows of hidden states that were
/// never visited keep their previous values.
pub fn baum_welch_pass(
    params: &HmmParams,
    episodes: &[ObservationSeq],
    reestimate_emissions: bool,
) -> Result<(HmmParams, PassStats)> {
    if episodes.is_empty() {
        return Err(Error::Structural("no episodes to train on".into()));
    }
    let acc = estep(params, episodes, reestimate_emissions)?;
    let n = params.n_hidden();
    let mut new_transition = params.transition.clone();
    let mut stale_rows = 0;
    let mut delta = 0.0f64;
    for i in 0..n {
        let den = acc.gamma_den[i];
        if den <= 0.0 {
            stale_rows += 1;
            continue;
        }
        let mut row_delta = 0.0;
        let mut row_sum = 0.0;
        for j in 0..n {
            let v = acc.xi_sum[[i, j]] / den;
            row_sum += v;
            row_delta += (v - params.transition[[i, j]]).abs();
            new_transition[[i, j]] = v;
        }
        // Defensive renormalization against accumulated round-off.
        if row_sum > 0.0 && (row_sum - 1.0).abs() > 1e-15 {
            for j in 0..n {
                new_transition[[i, j]] /= row_sum;
            }
        }
        delta = delta.max(row_delta);
    }
    let new_emission = match (reestimate_emissions, acc.gamma_obs) {
        (true, Some(go)) => {
            let mut e = params.emission.clone();
            for i in 0..n {
                let den: f64 = go.column(i).sum();
                if den <= 0.0 {
                    continue;
                }
                for o in 0..params.n_obs() {
                    e[[i, o]] = go[[o, i]] / den;
                }
            }
            e
        }
        _ => params.emission.clone(),
    };
    let new_params = HmmParams {
        transition: new_transition,
        emission: new_emission,
        initial: params.initial.clone(),
        n_mdp: params.n_mdp,
        num_blocks: params.num_blocks,
    };
    Ok((
        new_params,
        PassStats {
            delta,
            log_likelihood: acc.log_likelihood,
            stale_rows,
        },
    ))
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    /// Convergence threshold on the maximum absolute row sum of the
    /// transition change over one pass.
    pub tol: f64,
    pub max_iters: usize,
    pub reestimate_emissions: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            tol: 1e-6,
            max_iters: 10_000,
            reestimate_emissions: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub iterations: usize,
    pub final_delta: f64,
    pub converged: bool,
    pub log_likelihood_trace: Vec<f64>,
    pub wall_time_secs: f64,
    pub stale_rows: usize,
}

impl TrainReport {
    /// Flat `key=value` block.
    pub fn to_kv(&self) -> String {
        let ll = self
            .log_likelihood_trace
            .last()
            .copied()
            .unwrap_or(f64::NAN);
        format!(
            "iterations={}\nfinal_delta={}\nconverged={}\nlog_likelihood={}\nwall_time_secs={:.3}\nstale_rows={}\n",
            self.iterations, self.final_delta, self.converged, ll, self.wall_time_secs, self.stale_rows
        )
    }
}

pub fn train(
    init: &HmmParams,
    episodes: &[ObservationSeq],
    opts: &TrainOptions,
) -> Result<(HmmParams, TrainReport)> {
    train_with(init, episodes, opts, &mut |_, _| {})
}

/// Training loop with a per-pass callback (used for checkpointing).
pub fn train_with(
    init: &HmmParams,
    episodes: &[ObservationSeq],
    opts: &TrainOptions,
    on_pass: &mut dyn FnMut(usize, &HmmParams),
) -> Result<(HmmParams, TrainReport)> {
    let start = Instant::now();
    let mut params = init.clone();
    let mut trace = Vec::new();
    let mut final_delta = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut stale_rows = 0;
    for pass in 1..=opts.max_iters {
        let (next, stats) = baum_welch_pass(&params, episodes, opts.reestimate_emissions)?;
        if !stats.delta.is_finite()
            || !stats.log_likelihood.is_finite()
            || next.transition.iter().any(|v| !v.is_finite())
        {
            return Err(Error::NumericalFailure { iteration: pass });
        }
        params = next;
        trace.push(stats.log_likelihood);
        final_delta = stats.delta;
        stale_rows = stats.stale_rows;
        iterations = pass;
        on_pass(pass, &params);
        if stats.delta < opts.tol {
            converged = true;
            break;
        }
    }
    let report = TrainReport {
        iterations,
        final_delta,
        converged,
        log_likelihood_trace: trace,
        wall_time_secs: start.elapsed().as_secs_f64(),
        stale_rows,
    };
    Ok((params, report))
}

/// Thresholded digraph of a learned transition matrix, restricted to states
/// reachable from the initial hidden state.
pub fn extract_digraph(transition: &Array2<f64>, initial: usize, threshold: f64) -> Digraph {
    Digraph::from_matrix(transition, initial, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Policy;
    use crate::presets;
    use crate::product::{build_product, induce_chain};

    #[test]
    fn emission_matrix_shape_and_blocks() {
        let e = build_emission_matrix(3, 9);
        assert_eq!(e.dim(), (27, 18));
        // Every row has exactly one unit entry.
        for row in e.rows() {
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(row.sum(), 1.0);
        }
        // Non-accepting blocks emit reward 0, last block reward 1.
        assert_eq!(e[[0, 0]], 1.0);
        assert_eq!(e[[9 + 4, 4]], 1.0);
        assert_eq!(e[[2 * 9 + 4, 9 + 4]], 1.0);
    }

    #[test]
    fn emission_matrix_k1_is_all_reward_one() {
        let e = build_emission_matrix(1, 4);
        for s in 0..4 {
            assert_eq!(e[[s, 4 + s]], 1.0);
        }
    }

    #[test]
    fn spatial_init_wall_structure() {
        let g = presets::coffee_world_3x3();
        let m = spatial_initialization(&g, 1, 1.0);
        let eps = 1.0 / 9.0;
        let corner = g.index(0, 0);
        let edge = g.index(0, 1);
        // Corner: self 0.5, two neighbours 0.25 (before smoothing).
        let norm = 1.0 + 6.0 * eps; // six zero entries get smoothed in
        assert!((m[[corner, corner]] - 0.5 / norm).abs() < 1e-12);
        assert!((m[[corner, g.index(1, 0)]] - 0.25 / norm).abs() < 1e-12);
        // Edge (one wall): self 0.25 and three neighbours 0.25.
        let norm_e = 1.0 + 5.0 * eps;
        assert!((m[[edge, edge]] - 0.25 / norm_e).abs() < 1e-12);
        for row in m.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn spatial_init_is_block_diagonal_before_smoothing() {
        let g = presets::coffee_world_3x3();
        let m = spatial_initialization(&g, 3, 1.0);
        let eps = 1.0 / 27.0;
        // Off-block entries only carry the smoothing mass.
        let i = g.num_states() + 2; // block 1
        let j = 4; // block 0
        let row_sum_raw = 1.0 + eps * (27.0 - 4.0); // interior cell: 4 nonzeros
        let _ = row_sum_raw;
        assert!(m[[i, j]] > 0.0 && m[[i, j]] < 2.0 * eps);
    }

    #[test]
    fn uniform_init_is_seeded_and_positive() {
        for seed in 0..100 {
            let m = uniform_initialization(12, seed);
            assert!(m.iter().all(|&v| v > 0.0));
            for row in m.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(uniform_initialization(8, 5), uniform_initialization(8, 5));
        assert_ne!(uniform_initialization(8, 5), uniform_initialization(8, 6));
    }

    fn ground_truth_3x3() -> (HmmParams, crate::mdp::LabelledMdp) {
        let g = presets::coffee_world_3x3();
        let ta = presets::sequence_ta(&["coffee", "stairs"], &g.label_range());
        let chain = induce_chain(&build_product(&g, &ta).unwrap(), &Policy::uniform(&g));
        (
            HmmParams::from_product_chain(&chain, ObservationMode::State).unwrap(),
            g,
        )
    }

    #[test]
    fn single_observation_gamma_is_normalized_initial_row() {
        let (params, g) = ground_truth_3x3();
        let obs = ObservationSeq(vec![g.initial_state()]);
        let fb = forward_backward(&params, &obs).unwrap();
        assert_eq!(fb.gamma.nrows(), 1);
        assert!((fb.gamma[[0, g.initial_state()]] - 1.0).abs() < 1e-12);
        assert!((fb.gamma.row(0).sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_rows_sum_to_one() {
        let (params, g) = ground_truth_3x3();
        let ta = presets::sequence_ta(&["coffee", "stairs"], &g.label_range());
        let eps = crate::episode::simulate_episodes(
            &g,
            &ta,
            &Policy::uniform(&g),
            20,
            5,
            3,
        )
        .unwrap();
        for seq in encode_episodes(&eps, &g, ObservationMode::State) {
            let fb = forward_backward(&params, &seq).unwrap();
            for row in fb.gamma.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn impossible_observation_is_reported_with_step() {
        let (params, g) = ground_truth_3x3();
        // Claim a reward-1 observation at the very start: the initial state
        // is in block 0, which cannot emit reward 1.
        let obs = ObservationSeq(vec![g.num_states() + g.initial_state()]);
        match forward_backward(&params, &obs) {
            Err(Error::ImpossibleObservation { step }) => assert_eq!(step, 0),
            other => panic!("expected impossible observation, got {other:?}"),
        }
    }

    #[test]
    fn all_zero_rewards_with_k1_is_impossible() {
        let g = presets::coffee_world_3x3();
        let transition = uniform_initialization(g.num_states(), 0);
        let params = HmmParams::for_mdp(&g, 1, transition, ObservationMode::State).unwrap();
        // k = 1 means the sole block is accepting, but the data starts with
        // reward 0.
        let obs = ObservationSeq(vec![g.initial_state()]);
        assert!(matches!(
            baum_welch_pass(&params, &[obs], false),
            Err(Error::ImpossibleObservation { step: 0 })
        ));
    }

    #[test]
    fn pass_preserves_row_stochasticity_and_fixed_emissions() {
        let (truth, g) = ground_truth_3x3();
        let ta = presets::sequence_ta(&["coffee", "stairs"], &g.label_range());
        let eps = crate::episode::simulate_episodes(
            &g,
            &ta,
            &Policy::uniform(&g),
            34,
            40,
            11,
        )
        .unwrap();
        let seqs = encode_episodes(&eps, &g, ObservationMode::State);
        let init = HmmParams::for_mdp(
            &g,
            3,
            spatial_initialization(&g, 3, 1.0),
            ObservationMode::State,
        )
        .unwrap();
        let (next, stats) = baum_welch_pass(&init, &seqs, false).unwrap();
        assert!(stats.delta.is_finite());
        assert_eq!(next.emission, init.emission, "emissions stay fixed");
        for (i, row) in next.transition.rows().into_iter().enumerate() {
            let s = row.sum();
            assert!(
                (s - 1.0).abs() < 1e-9 || s == 0.0 || init.transition.row(i).sum() > 0.0,
                "row {i} sums to {s}"
            );
        }
        let _ = truth;
    }

    #[test]
    fn near_fixed_point_at_ground_truth() {
        // From exact ground-truth parameters with plenty of data, one pass
        // barely moves the estimate.
        let g = crate::mdp::LabelledMdp::gridworld(
            2,
            2,
            &[((1, 1), Label::new("goal"))].into_iter().collect(),
            (0, 0),
        )
        .unwrap();
        let ta = presets::reach_ta("goal", &g.label_range());
        let pi = Policy::uniform(&g);
        let chain = induce_chain(&build_product(&g, &ta).unwrap(), &pi);
        let truth = HmmParams::from_product_chain(&chain, ObservationMode::State).unwrap();
        let eps = crate::episode::simulate_episodes(&g, &ta, &pi, 10, 10_000, 5).unwrap();
        let seqs = encode_episodes(&eps, &g, ObservationMode::State);
        let (_, stats) = baum_welch_pass(&truth, &seqs, false).unwrap();
        assert!(stats.delta < 0.05, "delta {} too large", stats.delta);
    }

    #[test]
    fn train_stops_after_one_pass_with_huge_tol() {
        let (truth, g) = ground_truth_3x3();
        let ta = presets::sequence_ta(&["coffee", "stairs"], &g.label_range());
        let eps =
            crate::episode::simulate_episodes(&g, &ta, &Policy::uniform(&g), 10, 10, 2).unwrap();
        let seqs = encode_episodes(&eps, &g, ObservationMode::State);
        let opts = TrainOptions {
            tol: 10.0,
            ..Default::default()
        };
        let (_, report) = train(&truth, &seqs, &opts).unwrap();
        assert_eq!(report.iterations, 1);
        assert!(report.converged);
    }

    #[test]
    fn digraph_of_ground_truth_matches_chain() {
        let (params, g) = ground_truth_3x3();
        let ta = presets::sequence_ta(&["coffee", "stairs"], &g.label_range());
        let chain = induce_chain(&build_product(&g, &ta).unwrap(), &Policy::uniform(&g));
        let dg = extract_digraph(&params.transition, params.initial_index(), 1e-6);
        assert!(dg.is_identical(&chain.digraph(0.0)));
    }

    use crate::label::Label;
}
