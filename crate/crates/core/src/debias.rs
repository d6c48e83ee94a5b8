//! Step 3: remove environmentally-biased labels from a distilled automaton.
//!
//! For each label (least frequent in the training traces first) we guess
//! that it has no effect on the task: states joined by a non-loop edge with
//! that label are merged, the quotient is re-determinized, and the guess is
//! kept only if the result still reproduces every reward prefix of every
//! training episode. The survivor is minimized at the end.

use std::collections::BTreeMap;

use crate::automata::{
    minimize, subset_construction, Completion, Nfa, TaskAutomaton,
};
use crate::episode::Episode;
use crate::error::{Error, Result};
use crate::label::Label;
use crate::unionfind::UnionFind;

/// Prefix-wise consistency: at every step of every episode the automaton
/// run over the consumed trace is accepting exactly when the observed
/// reward bit is 1. Missing transitions and unknown labels behave as
/// self-loops.
pub fn is_consistent(ta: &TaskAutomaton, episodes: &[Episode]) -> bool {
    for ep in episodes {
        let mut q = ta.initial();
        if ep.rewards.first() != Some(&(ta.is_accepting(q) as u8)) {
            return false;
        }
        for t in 1..ep.trace.len() {
            q = ta.target(q, &ep.trace[t]).unwrap_or(q);
            if ep.rewards[t] != ta.is_accepting(q) as u8 {
                return false;
            }
        }
    }
    true
}

/// Merge all states connected by a non-loop edge carrying `label`
/// (transitively), then determinize the quotient. In the result the label
/// self-loops on every state; a class accepts iff any member does.
pub fn merge_on_label(ta: &TaskAutomaton, label: &Label) -> TaskAutomaton {
    let ta = ta.complete(Completion::SelfLoop);
    let mut uf = UnionFind::new(ta.num_states());
    for q in 0..ta.num_states() {
        if let Some(dst) = ta.target(q, label) {
            if dst != q {
                uf.union(q, dst);
            }
        }
    }
    let (class_of, members) = uf.classes();
    let mut quotient = Nfa::new(members.len(), class_of[ta.initial()], ta.alphabet().clone());
    for (src, symbol, dst) in ta.edges() {
        quotient.add_transition(class_of[src], symbol.clone(), class_of[dst]);
    }
    for (c, ms) in members.iter().enumerate() {
        quotient.set_accepting(c, ms.iter().any(|&q| ta.is_accepting(q)));
    }
    subset_construction(&quotient)
}

/// Labels ordered by ascending frequency in the training traces, ties
/// broken lexicographically. Labels never seen in the traces come first.
fn label_order(ta: &TaskAutomaton, episodes: &[Episode]) -> Vec<Label> {
    let mut counts: BTreeMap<&Label, usize> = ta.alphabet().iter().map(|l| (l, 0)).collect();
    for ep in episodes {
        for l in &ep.trace {
            if let Some(c) = counts.get_mut(l) {
                *c += 1;
            }
        }
    }
    let mut order: Vec<(usize, Label)> = counts
        .into_iter()
        .map(|(l, c)| (c, l.clone()))
        .collect();
    order.sort();
    order.into_iter().map(|(_, l)| l).collect()
}

#[derive(Debug, Clone)]
pub struct DebiasOutcome {
    pub ta: TaskAutomaton,
    /// Labels whose merge was accepted (they self-loop everywhere in the
    /// output).
    pub removed: Vec<Label>,
    pub states_before: usize,
    pub states_after: usize,
}

impl DebiasOutcome {
    pub fn report(&self) -> String {
        let removed: Vec<String> = self.removed.iter().map(|l| l.to_string()).collect();
        format!(
            "removed_labels={}\nstates_before={}\nstates_after={}\n",
            if removed.is_empty() {
                "-".to_string()
            } else {
                removed.join(",")
            },
            self.states_before,
            self.states_after
        )
    }
}

/// Greedy de-biasing loop followed by minimization. Fails if the input is
/// already inconsistent with the episodes.
pub fn remove_environmental_bias(
    ta: &TaskAutomaton,
    episodes: &[Episode],
) -> Result<DebiasOutcome> {
    let current = ta.complete(Completion::SelfLoop);
    if !is_consistent(&current, episodes) {
        return Err(Error::Inconsistent(
            "input automaton disagrees with the episodes; nothing to de-bias".into(),
        ));
    }
    let states_before = current.num_states();
    let mut current = current;
    let mut removed = Vec::new();
    for label in label_order(&current, episodes) {
        let has_nonloop = (0..current.num_states())
            .any(|q| current.target(q, &label).is_some_and(|d| d != q));
        if !has_nonloop {
            continue;
        }
        let candidate = merge_on_label(&current, &label);
        if is_consistent(&candidate, episodes) {
            current = candidate;
            removed.push(label);
        }
    }
    let minimized = minimize(&current)?.renamed_sequential();
    let states_after = minimized.num_states();
    Ok(DebiasOutcome {
        ta: minimized,
        removed,
        states_before,
        states_after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::{isomorphic, language_equivalent};
    use crate::episode::simulate_episodes;
    use crate::label::Alphabet;
    use crate::mdp::Policy;
    use crate::presets;

    #[test]
    fn ground_truth_is_consistent_with_its_own_episodes() {
        let g = presets::coffee_world_3x3();
        let ta = presets::sequence_ta(&["coffee", "stairs"], &g.label_range());
        let eps = simulate_episodes(&g, &ta, &Policy::uniform(&g), 30, 40, 9).unwrap();
        assert!(is_consistent(&ta, &eps));
    }

    #[test]
    fn accepting_initial_state_breaks_consistency() {
        let g = presets::coffee_world_3x3();
        let ta = presets::sequence_ta(&["coffee", "stairs"], &g.label_range());
        let eps = simulate_episodes(&g, &ta, &Policy::uniform(&g), 10, 5, 9).unwrap();
        let mut wrong = ta.clone();
        wrong.set_accepting(wrong.initial(), true);
        assert!(!is_consistent(&wrong, &eps));
    }

    #[test]
    fn merge_on_selfloop_only_label_is_identity() {
        let g = presets::coffee_world_3x3();
        let ta = presets::sequence_ta(&["coffee", "stairs"], &g.label_range());
        // The empty label only self-loops in a chain task.
        let merged = merge_on_label(&ta, &Label::empty());
        assert!(isomorphic(&merged, &ta));
    }

    #[test]
    fn merging_the_step_label_of_a_chain_collapses_it() {
        let alphabet: Alphabet = [Label::new("a")].into_iter().collect();
        let ta = presets::sequence_ta(&["a", "a"], &alphabet);
        let merged = merge_on_label(&ta, &Label::new("a"));
        assert_eq!(merged.trimmed().num_states(), 1);
    }

    #[test]
    fn carpet_merge_recovers_book_task() {
        // The carpet→book chain with carpet merged away is exactly the
        // plain book task (over the same alphabet).
        let g = presets::office_world_5x5();
        let biased = presets::sequence_ta(&["carpet", "book"], &g.label_range());
        let merged = merge_on_label(&biased, &Label::new("carpet"));
        let book = presets::reach_ta("book", &g.label_range());
        assert!(language_equivalent(&minimize(&merged).unwrap(), &book).unwrap());
    }

    #[test]
    fn debias_removes_carpet_in_office_world() {
        let g = presets::office_world_5x5();
        let biased = presets::sequence_ta(&["carpet", "book"], &g.label_range());
        // Episodes generated by the *biased* automaton: in this world it is
        // observationally identical to the plain book task.
        let eps = simulate_episodes(&g, &biased, &Policy::uniform(&g), 40, 120, 5).unwrap();
        let out = remove_environmental_bias(&biased, &eps).unwrap();
        assert!(out.removed.contains(&Label::new("carpet")));
        let book = presets::reach_ta("book", &g.label_range());
        assert!(language_equivalent(&out.ta, &book).unwrap());
        assert!(out.states_after <= out.states_before);
    }

    #[test]
    fn necessary_labels_survive() {
        let g = presets::coffee_world_3x3();
        let ta = presets::sequence_ta(&["coffee", "stairs"], &g.label_range());
        let eps = simulate_episodes(&g, &ta, &Policy::uniform(&g), 34, 150, 21).unwrap();
        // Sanity: both steps of the task show up in the data.
        assert!(eps.iter().any(|e| e.goal_reached()));
        assert!(eps.iter().any(|e| !e.goal_reached()));
        let out = remove_environmental_bias(&ta, &eps).unwrap();
        assert!(out.removed.is_empty(), "removed {:?}", out.removed);
        assert!(language_equivalent(&out.ta, &ta).unwrap());
    }

    #[test]
    fn rewardless_episodes_strip_every_safe_label() {
        let g = presets::coffee_world_3x3();
        let ta = presets::sequence_ta(&["coffee", "stairs"], &g.label_range());
        // Too short to ever reach coffee then stairs.
        let eps = simulate_episodes(&g, &ta, &Policy::uniform(&g), 2, 30, 4).unwrap();
        assert!(eps.iter().all(|e| !e.goal_reached()));
        let out = remove_environmental_bias(&ta, &eps).unwrap();
        // Merges are accepted while they keep every (rewardless) prefix
        // rejecting; merging the final step label would make the start
        // class accepting, so at least two states survive, and the output
        // keeps rejecting all prefixes.
        assert!(!out.removed.is_empty());
        assert!(out.ta.num_states() <= ta.num_states());
        assert!(is_consistent(&out.ta, &eps));
        assert!(!out.ta.is_accepting(out.ta.initial()));
    }

    #[test]
    fn inconsistent_input_is_a_precondition_error() {
        let g = presets::coffee_world_3x3();
        let ta = presets::sequence_ta(&["coffee", "stairs"], &g.label_range());
        let eps = simulate_episodes(&g, &ta, &Policy::uniform(&g), 20, 20, 4).unwrap();
        let wrong = presets::reach_ta("stairs", &g.label_range());
        // Reaching stairs without coffee gives reward under `wrong` but not
        // in the data, unless no episode ever hits stairs first (it does).
        assert!(matches!(
            remove_environmental_bias(&wrong, &eps),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn debias_is_idempotent() {
        let g = presets::office_world_5x5();
        let biased = presets::sequence_ta(&["carpet", "book"], &g.label_range());
        let eps = simulate_episodes(&g, &biased, &Policy::uniform(&g), 40, 120, 5).unwrap();
        let once = remove_environmental_bias(&biased, &eps).unwrap();
        let twice = remove_environmental_bias(&once.ta, &eps).unwrap();
        assert!(isomorphic(&once.ta, &twice.ta));
        assert!(twice.removed.is_empty());
    }
}
