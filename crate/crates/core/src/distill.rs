//! Cone lumping: determinize the NFA underlying a product chain by merging,
//! for every state and label, all same-label successors into one class — in
//! a true product these successors must share their hidden automaton
//! component, so the quotient is a deterministic task automaton.
//!
//! On digraphs that do not come from a genuine product (a badly learned
//! chain), the merge can mix accepting with non-accepting states or leave
//! residual nondeterminism; both surface as structural errors rather than
//! being patched over.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::automata::{Completion, Nfa, TaskAutomaton};
use crate::digraph::Digraph;
use crate::error::{Error, Result};
use crate::hmm::{extract_digraph, HmmParams};
use crate::label::{Alphabet, Label};
use crate::unionfind::UnionFind;

/// The state partition computed by cone lumping.
#[derive(Debug, Clone)]
pub struct LumpPartition {
    /// NFA state -> class id (class ids ordered by smallest member).
    pub class_of: Vec<usize>,
    /// Members per class, ascending.
    pub members: Vec<Vec<usize>>,
}

impl LumpPartition {
    pub fn num_classes(&self) -> usize {
        self.members.len()
    }

    /// Smallest member of each class.
    pub fn representative(&self, class: usize) -> usize {
        self.members[class][0]
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LumpStats {
    /// Successor-class checks performed (one per edge per sweep).
    pub check_ops: u64,
    /// Fixpoint sweeps, including the final sweep that changes nothing.
    pub iterations: usize,
    pub merges: usize,
}

/// Compute the cone-lumping partition: sweep all states in index order,
/// merging same-label successors, until a full sweep performs no merge.
pub fn lump_partition(nfa: &Nfa) -> (LumpPartition, LumpStats) {
    let edges: Vec<(usize, &Label, usize)> = nfa.edges().collect();
    let mut uf = UnionFind::new(nfa.num_states());
    let mut stats = LumpStats::default();
    loop {
        stats.iterations += 1;
        let mut changed = false;
        let mut cone: BTreeMap<(usize, &Label), usize> = BTreeMap::new();
        for &(src, label, dst) in &edges {
            stats.check_ops += 1;
            let s = uf.find(src);
            let d = uf.find(dst);
            match cone.get(&(s, label)) {
                None => {
                    cone.insert((s, label), d);
                }
                Some(&prev) => {
                    if uf.union(prev, d) {
                        stats.merges += 1;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let (class_of, members) = uf.classes();
    (LumpPartition { class_of, members }, stats)
}

/// Quotient the NFA by a partition, requiring the result to be a
/// deterministic automaton with accept-consistent classes.
pub fn quotient(nfa: &Nfa, partition: &LumpPartition) -> Result<TaskAutomaton> {
    let num_classes = partition.num_classes();
    for (c, members) in partition.members.iter().enumerate() {
        let accepting = members.iter().filter(|&&q| nfa.is_accepting(q)).count();
        if accepting != 0 && accepting != members.len() {
            return Err(Error::Structural(format!(
                "class c{c} mixes accepting and non-accepting states ({} of {})",
                accepting,
                members.len()
            )));
        }
    }
    let names = (0..num_classes).map(|c| format!("c{c}")).collect();
    let mut ta = TaskAutomaton::new(
        num_classes,
        partition.class_of[nfa.initial()],
        nfa.alphabet().clone(),
    )
    .with_names(names);
    for (src, label, dst) in nfa.edges() {
        let (cs, cd) = (partition.class_of[src], partition.class_of[dst]);
        ta.add_transition(cs, label.clone(), cd).map_err(|_| {
            Error::Structural(format!(
                "residual nondeterminism after lumping: class c{cs} on {label}"
            ))
        })?;
    }
    for (c, members) in partition.members.iter().enumerate() {
        ta.set_accepting(c, nfa.is_accepting(members[0]));
    }
    Ok(ta)
}

/// Determinize a product NFA via cone lumping. The result may be partial;
/// complete it per the caller's convention.
pub fn cone_lump(nfa: &Nfa) -> Result<TaskAutomaton> {
    let (partition, _) = lump_partition(nfa);
    quotient(nfa, &partition)
}

pub fn cone_lump_with_partition(nfa: &Nfa) -> Result<(TaskAutomaton, LumpPartition, LumpStats)> {
    let (partition, stats) = lump_partition(nfa);
    let ta = quotient(nfa, &partition)?;
    Ok((ta, partition, stats))
}

/// Count merge-check operations without requiring a well-formed quotient.
pub fn lump_complexity_probe(nfa: &Nfa) -> LumpStats {
    lump_partition(nfa).1
}

/// DOT rendering of the class mapping (class nodes listing their members),
/// for debugging structural errors.
pub fn partition_to_dot(nfa: &Nfa, partition: &LumpPartition) -> String {
    let mut out = String::new();
    out.push_str("digraph {\n  rankdir=LR;\n  node [shape=box];\n");
    for (c, members) in partition.members.iter().enumerate() {
        let names: Vec<&str> = members.iter().map(|&q| nfa.name(q)).collect();
        let acc = members.iter().any(|&q| nfa.is_accepting(q));
        let style = if acc { ", peripheries=2" } else { "" };
        writeln!(out, "  c{c} [label=\"c{c}: {}\"{style}];", names.join(" ")).unwrap();
    }
    let mut drawn: BTreeMap<(usize, usize), Vec<String>> = BTreeMap::new();
    for (src, label, dst) in nfa.edges() {
        let key = (partition.class_of[src], partition.class_of[dst]);
        let entry = drawn.entry(key).or_default();
        let text = label.pretty();
        if !entry.contains(&text) {
            entry.push(text);
        }
    }
    for ((cs, cd), labels) in drawn {
        writeln!(out, "  c{cs} -> c{cd} [label=\"{}\"];", labels.join(", ")).unwrap();
    }
    out.push_str("}\n");
    out
}

/// Turn a learned chain's thresholded digraph into the product NFA of
/// Step 2: edges are labelled by the target state's MDP label, accepting
/// states are the last hidden block.
pub fn digraph_to_nfa(digraph: &Digraph, mdp_labels: &[Label], num_blocks: usize) -> Nfa {
    let n_mdp = mdp_labels.len();
    let nodes: Vec<usize> = digraph.nodes.iter().copied().collect();
    let mut new_id = vec![usize::MAX; n_mdp * num_blocks];
    for (i, &node) in nodes.iter().enumerate() {
        new_id[node] = i;
    }
    let alphabet: Alphabet = mdp_labels.iter().cloned().collect();
    let names = nodes
        .iter()
        .map(|&p| format!("s{}q{}", p % n_mdp, p / n_mdp))
        .collect();
    let mut nfa = Nfa::new(nodes.len(), new_id[digraph.initial], alphabet).with_names(names);
    for &(i, j) in &digraph.edges {
        nfa.add_transition(new_id[i], mdp_labels[j % n_mdp].clone(), new_id[j]);
    }
    for &node in &nodes {
        nfa.set_accepting(new_id[node], node / n_mdp == num_blocks - 1);
    }
    nfa
}

/// Step 2 end to end: threshold the learned transition matrix, read off the
/// labelled NFA, cone-lump it, and complete the result with self-loops.
pub fn distill_ta(
    learned: &HmmParams,
    mdp_labels: &[Label],
    threshold: f64,
) -> Result<TaskAutomaton> {
    let digraph = extract_digraph(&learned.transition, learned.initial_index(), threshold);
    let nfa = digraph_to_nfa(&digraph, mdp_labels, learned.num_blocks());
    let ta = cone_lump(&nfa)?;
    Ok(ta.complete(Completion::SelfLoop))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::{isomorphic, language_equivalent, minimize, subset_construction};
    use crate::mdp::Policy;
    use crate::presets;
    use crate::product::{build_product, extract_nfa, induce_chain};

    #[test]
    fn deterministic_nfa_lumps_to_itself() {
        let g = presets::coffee_world_3x3();
        let ta = presets::sequence_ta(&["coffee", "stairs"], &g.label_range());
        let nfa = ta.to_nfa();
        let lumped = cone_lump(&nfa).unwrap();
        assert!(isomorphic(
            &lumped.complete(Completion::SelfLoop),
            &ta.complete(Completion::SelfLoop)
        ));
    }

    #[test]
    fn clustered_product_recovers_task_exactly() {
        // Ground-truth product of the clustered coffee world; lumping plus
        // minimization recovers exactly the 3-state task automaton.
        let g = presets::coffee_column_world_3x3();
        let ta = presets::sequence_ta(&["coffee", "stairs"], &g.label_range());
        let chain = induce_chain(&build_product(&g, &ta).unwrap(), &Policy::uniform(&g));
        let nfa = extract_nfa(&chain, 0.0);
        let lumped = cone_lump(&nfa).unwrap().complete(Completion::SelfLoop);
        let min = minimize(&lumped).unwrap();
        assert_eq!(min.num_states(), 3);
        assert!(isomorphic(&min, &ta));
        assert!(language_equivalent(&min, &ta).unwrap());
    }

    #[test]
    fn lumped_language_sits_between_rooted_and_restricted() {
        // The lumped automaton accepts at least the rooted NFA's language
        // (quotients only add runs) and at most the MDP-restricted task.
        let g = presets::coffee_world_3x3();
        let ta = presets::sequence_ta(&["coffee", "stairs"], &g.label_range());
        let chain = induce_chain(&build_product(&g, &ta).unwrap(), &Policy::uniform(&g));
        let nfa = extract_nfa(&chain, 0.0);
        let rooted = subset_construction(&nfa);
        let lumped = cone_lump(&nfa).unwrap().complete(Completion::RejectSink);
        let restricted = crate::product::mdp_restricted_ta(&g, &ta).unwrap();
        let words = crate::automata::tests_support::all_words(nfa.alphabet(), 5);
        for w in words {
            let in_rooted = rooted.accepts(&w).unwrap();
            let in_lumped = lumped.accepts(&w).unwrap();
            let in_restricted = restricted
                .complete(Completion::SelfLoop)
                .accepts(&w)
                .unwrap();
            assert!(!in_rooted || in_lumped, "rooted ⊆ lumped fails on {w:?}");
            assert!(
                !in_lumped || in_restricted,
                "lumped ⊆ restricted fails on {w:?}"
            );
        }
    }

    #[test]
    fn single_state_nfa_needs_no_merges() {
        let alphabet: Alphabet = [Label::empty()].into_iter().collect();
        let mut nfa = Nfa::new(1, 0, alphabet);
        nfa.add_transition(0, Label::empty(), 0);
        let stats = lump_complexity_probe(&nfa);
        assert_eq!(stats.merges, 0);
    }

    #[test]
    fn fully_connected_single_label_collapses() {
        let alphabet: Alphabet = [Label::new("a")].into_iter().collect();
        let mut nfa = Nfa::new(6, 0, alphabet);
        for i in 0..6 {
            for j in 0..6 {
                nfa.add_transition(i, Label::new("a"), j);
            }
        }
        let (partition, stats) = lump_partition(&nfa);
        assert!(partition.num_classes() <= 2);
        assert!(stats.merges >= 4);
    }

    #[test]
    fn mixed_accepting_class_is_an_error() {
        // Two same-label successors, one accepting and one not: the cone
        // rule wants to merge them, which must surface as a structural
        // error.
        let alphabet: Alphabet = [Label::new("a")].into_iter().collect();
        let mut nfa = Nfa::new(3, 0, alphabet);
        nfa.add_transition(0, Label::new("a"), 1);
        nfa.add_transition(0, Label::new("a"), 2);
        nfa.set_accepting(2, true);
        match cone_lump(&nfa) {
            Err(Error::Structural(_)) => {}
            other => panic!("expected structural error, got {other:?}"),
        }
    }

    #[test]
    fn distill_ground_truth_params() {
        let g = presets::coffee_column_world_3x3();
        let ta = presets::sequence_ta(&["coffee", "stairs"], &g.label_range());
        let chain = induce_chain(&build_product(&g, &ta).unwrap(), &Policy::uniform(&g));
        let params =
            HmmParams::from_product_chain(&chain, crate::hmm::ObservationMode::State).unwrap();
        let distilled = distill_ta(&params, g.labels(), 1e-6).unwrap();
        let min = minimize(&distilled).unwrap();
        assert!(isomorphic(&min, &ta));
    }
}
