//! Ready-made gridworlds and task automata used by the test corpus, the
//! bundled data files, and the benchmark configs.

use std::collections::BTreeMap;

use crate::automata::{Completion, TaskAutomaton};
use crate::label::{Alphabet, Label};
use crate::mdp::LabelledMdp;

fn world(width: usize, height: usize, cells: &[((usize, usize), &str)]) -> LabelledMdp {
    let map: BTreeMap<(usize, usize), Label> = cells
        .iter()
        .map(|&(cell, prop)| (cell, Label::new(prop)))
        .collect();
    LabelledMdp::gridworld(width, height, &map, (0, 0)).expect("preset grid is valid")
}

/// 3x3 world: coffee machine in the bottom-right corner, stairs in the
/// top-left. The agent starts in the bottom-left corner; a 34-step random
/// walk completes the coffee-then-stairs task in 30-45% of episodes.
pub fn coffee_world_3x3() -> LabelledMdp {
    world(3, 3, &[((0, 2), "coffee"), ((2, 0), "stairs")])
}

/// 3x3 world with two coffee cells stacked under the stairs corner. With
/// the labels clustered like this, cone lumping alone (no de-biasing)
/// recovers the exact coffee-then-stairs automaton from the true product,
/// which makes this the canonical worked example for the distiller.
pub fn coffee_column_world_3x3() -> LabelledMdp {
    world(
        3,
        3,
        &[((0, 2), "coffee"), ((1, 2), "coffee"), ((2, 2), "stairs")],
    )
}

/// 4x4 world: coffee bottom-right, a couch on the left, stairs top-right.
pub fn coffee_world_4x4() -> LabelledMdp {
    world(
        4,
        4,
        &[
            ((0, 3), "coffee"),
            ((1, 3), "coffee"),
            ((2, 0), "couch"),
            ((3, 3), "stairs"),
        ],
    )
}

/// 5x5 world: coffee, couch, TV and stairs spread over the grid.
pub fn coffee_world_5x5() -> LabelledMdp {
    world(
        5,
        5,
        &[
            ((0, 4), "coffee"),
            ((1, 4), "coffee"),
            ((3, 0), "couch"),
            ((2, 2), "tv"),
            ((4, 4), "stairs"),
        ],
    )
}

/// 5x5 office world. The book in the top-right corner can only be entered
/// through carpet cells, so any automaton learned from reward-on-book data
/// here picks up a spurious carpet transition.
pub fn office_world_5x5() -> LabelledMdp {
    world(
        5,
        5,
        &[
            ((2, 2), "coffee"),
            ((4, 0), "stairs"),
            ((3, 1), "tv"),
            ((1, 3), "couch"),
            ((4, 3), "carpet"),
            ((3, 4), "carpet"),
            ((4, 4), "book"),
        ],
    )
}

/// Small 3x3 variant of the office trap: the book corner is guarded by
/// carpet on both sides.
pub fn carpet_book_world_3x3() -> LabelledMdp {
    world(
        3,
        3,
        &[((1, 2), "carpet"), ((2, 1), "carpet"), ((2, 2), "book")],
    )
}

/// A chain task: visit the given features in order. `props.len() + 1`
/// states; every other symbol self-loops; the final state is accepting and
/// absorbing (and last, matching the hidden-block convention).
pub fn sequence_ta(props: &[&str], alphabet: &Alphabet) -> TaskAutomaton {
    let k = props.len() + 1;
    let mut alphabet = alphabet.clone();
    for p in props {
        alphabet.insert(Label::new(p));
    }
    let mut ta = TaskAutomaton::new(k, 0, alphabet);
    for (i, prop) in props.iter().enumerate() {
        ta.add_transition(i, Label::new(prop), i + 1)
            .expect("chain transitions are deterministic");
    }
    ta.set_accepting(k - 1, true);
    ta.complete(Completion::SelfLoop)
}

/// Single-feature task: reach the given feature.
pub fn reach_ta(prop: &str, alphabet: &Alphabet) -> TaskAutomaton {
    sequence_ta(&[prop], alphabet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Label;

    #[test]
    fn office_book_is_guarded_by_carpet() {
        let g = office_world_5x5();
        let book = g.index(4, 4);
        for a in crate::mdp::Action::ALL {
            for s in 0..g.num_states() {
                if s != book && g.step(s, a) == book {
                    assert_eq!(g.label(s), &Label::new("carpet"));
                }
            }
        }
    }

    #[test]
    fn sequence_ta_is_complete_and_absorbing() {
        let g = coffee_world_3x3();
        let ta = sequence_ta(&["coffee", "stairs"], &g.label_range());
        assert!(ta.is_complete());
        assert_eq!(ta.num_states(), 3);
        let accept = 2;
        assert!(ta.is_accepting(accept));
        for sym in ta.alphabet().clone() {
            assert_eq!(ta.target(accept, &sym), Some(accept));
        }
    }
}
