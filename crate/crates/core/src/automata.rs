//! Finite automata over label alphabets: NFAs, task automata (DFAs), and the
//! classical algorithms used both inside the pipeline and as independent
//! oracles (subset construction, Hopcroft minimization, product-based
//! language equivalence).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::label::{Alphabet, Label};

pub type StateId = usize;

/// What to do with missing transitions when completing an automaton.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Completion {
    /// Missing symbols self-loop (the usual drawing convention where
    /// unlisted labels loop on the state).
    SelfLoop,
    /// Missing symbols route to a fresh rejecting sink.
    RejectSink,
}

/// A nondeterministic finite automaton.
#[derive(Debug, Clone, PartialEq)]
pub struct Nfa {
    names: Vec<String>,
    initial: StateId,
    alphabet: Alphabet,
    transitions: Vec<BTreeMap<Label, BTreeSet<StateId>>>,
    accepting: Vec<bool>,
}

/// A task automaton: a DFA over the label alphabet. Accepting states mark
/// task completion. The transition function may be partial until
/// [`TaskAutomaton::complete`] is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskAutomaton {
    names: Vec<String>,
    initial: StateId,
    alphabet: Alphabet,
    transitions: Vec<BTreeMap<Label, StateId>>,
    accepting: Vec<bool>,
}

fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("q{i}")).collect()
}

impl Nfa {
    pub fn new(num_states: usize, initial: StateId, alphabet: Alphabet) -> Self {
        assert!(initial < num_states, "initial state out of range");
        Nfa {
            names: default_names(num_states),
            initial,
            alphabet,
            transitions: vec![BTreeMap::new(); num_states],
            accepting: vec![false; num_states],
        }
    }

    pub fn with_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.names.len());
        self.names = names;
        self
    }

    pub fn add_transition(&mut self, src: StateId, label: Label, dst: StateId) {
        assert!(src < self.num_states() && dst < self.num_states());
        self.alphabet.insert(label.clone());
        self.transitions[src].entry(label).or_default().insert(dst);
    }

    pub fn set_accepting(&mut self, state: StateId, accepting: bool) {
        self.accepting[state] = accepting;
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn is_accepting(&self, state: StateId) -> bool {
        self.accepting[state]
    }

    pub fn name(&self, state: StateId) -> &str {
        &self.names[state]
    }

    pub fn successors(&self, src: StateId, label: &Label) -> impl Iterator<Item = StateId> + '_ {
        self.transitions[src]
            .get(label)
            .into_iter()
            .flat_map(|s| s.iter().copied())
    }

    /// All transitions as `(src, label, dst)`, in deterministic order.
    pub fn edges(&self) -> impl Iterator<Item = (StateId, &Label, StateId)> + '_ {
        self.transitions.iter().enumerate().flat_map(|(src, map)| {
            map.iter()
                .flat_map(move |(label, dsts)| dsts.iter().map(move |&dst| (src, label, dst)))
        })
    }

    pub fn num_edges(&self) -> usize {
        self.edges().count()
    }

    /// Direct subset simulation; symbols outside the alphabet have no
    /// transitions and lead to rejection.
    pub fn accepts(&self, word: &[Label]) -> bool {
        let mut current: BTreeSet<StateId> = BTreeSet::from([self.initial]);
        for symbol in word {
            let mut next = BTreeSet::new();
            for &q in &current {
                next.extend(self.successors(q, symbol));
            }
            if next.is_empty() {
                return false;
            }
            current = next;
        }
        current.iter().any(|&q| self.accepting[q])
    }

    pub fn complete(&self, policy: Completion) -> Nfa {
        let mut out = self.clone();
        match policy {
            Completion::SelfLoop => {
                for q in 0..out.num_states() {
                    for symbol in self.alphabet.iter() {
                        out.transitions[q]
                            .entry(symbol.clone())
                            .or_default()
                            .insert(q);
                    }
                }
            }
            Completion::RejectSink => {
                let sink = out.num_states();
                let mut need_sink = false;
                for q in 0..out.num_states() {
                    for symbol in self.alphabet.iter() {
                        let entry = out.transitions[q].entry(symbol.clone()).or_default();
                        if entry.is_empty() {
                            entry.insert(sink);
                            need_sink = true;
                        }
                    }
                }
                if need_sink {
                    out.names.push("sink".into());
                    out.accepting.push(false);
                    let mut sink_row = BTreeMap::new();
                    for symbol in self.alphabet.iter() {
                        sink_row.insert(symbol.clone(), BTreeSet::from([sink]));
                    }
                    out.transitions.push(sink_row);
                }
            }
        }
        out
    }
}

impl TaskAutomaton {
    pub fn new(num_states: usize, initial: StateId, alphabet: Alphabet) -> Self {
        assert!(initial < num_states, "initial state out of range");
        TaskAutomaton {
            names: default_names(num_states),
            initial,
            alphabet,
            transitions: vec![BTreeMap::new(); num_states],
            accepting: vec![false; num_states],
        }
    }

    pub fn with_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.names.len());
        self.names = names;
        self
    }

    /// Insert a transition; fails if it would make the automaton
    /// nondeterministic.
    pub fn add_transition(&mut self, src: StateId, label: Label, dst: StateId) -> Result<()> {
        assert!(src < self.num_states() && dst < self.num_states());
        if let Some(&existing) = self.transitions[src].get(&label) {
            if existing != dst {
                return Err(Error::Automaton(format!(
                    "duplicate transition from {} on {}: {} vs {}",
                    self.names[src], label, self.names[existing], self.names[dst]
                )));
            }
            return Ok(());
        }
        self.alphabet.insert(label.clone());
        self.transitions[src].insert(label, dst);
        Ok(())
    }

    pub fn set_accepting(&mut self, state: StateId, accepting: bool) {
        self.accepting[state] = accepting;
    }

    /// Add symbols to the alphabet without transitions (they become
    /// self-loops on completion).
    pub fn extend_alphabet<I: IntoIterator<Item = Label>>(&mut self, labels: I) {
        self.alphabet.extend(labels);
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn is_accepting(&self, state: StateId) -> bool {
        self.accepting[state]
    }

    pub fn accepting_states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.num_states()).filter(|&q| self.accepting[q])
    }

    pub fn name(&self, state: StateId) -> &str {
        &self.names[state]
    }

    pub fn target(&self, src: StateId, label: &Label) -> Option<StateId> {
        self.transitions[src].get(label).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (StateId, &Label, StateId)> + '_ {
        self.transitions
            .iter()
            .enumerate()
            .flat_map(|(src, map)| map.iter().map(move |(label, &dst)| (src, label, dst)))
    }

    pub fn is_complete(&self) -> bool {
        self.transitions
            .iter()
            .all(|row| self.alphabet.iter().all(|l| row.contains_key(l)))
    }

    /// Run the automaton over a word. Fails on symbols outside the alphabet
    /// and on missing transitions (complete the automaton first).
    pub fn run(&self, word: &[Label]) -> Result<(StateId, bool)> {
        let mut q = self.initial;
        for symbol in word {
            if !self.alphabet.contains(symbol) {
                return Err(Error::AlphabetMismatch(format!(
                    "symbol {symbol} not in the automaton's alphabet"
                )));
            }
            q = self
                .target(q, symbol)
                .ok_or_else(|| Error::IncompleteAutomaton {
                    state: self.names[q].clone(),
                    symbol: symbol.to_string(),
                })?;
        }
        Ok((q, self.accepting[q]))
    }

    pub fn accepts(&self, word: &[Label]) -> Result<bool> {
        self.run(word).map(|(_, acc)| acc)
    }

    pub fn complete(&self, policy: Completion) -> TaskAutomaton {
        let mut out = self.clone();
        match policy {
            Completion::SelfLoop => {
                for q in 0..out.num_states() {
                    for symbol in self.alphabet.iter() {
                        out.transitions[q].entry(symbol.clone()).or_insert(q);
                    }
                }
            }
            Completion::RejectSink => {
                let sink = out.num_states();
                let mut need_sink = false;
                for q in 0..out.num_states() {
                    for symbol in self.alphabet.iter() {
                        need_sink |= !out.transitions[q].contains_key(symbol);
                        out.transitions[q].entry(symbol.clone()).or_insert(sink);
                    }
                }
                if need_sink {
                    out.names.push("sink".into());
                    out.accepting.push(false);
                    let mut sink_row = BTreeMap::new();
                    for symbol in self.alphabet.iter() {
                        sink_row.insert(symbol.clone(), sink);
                    }
                    out.transitions.push(sink_row);
                }
            }
        }
        out
    }

    pub fn to_nfa(&self) -> Nfa {
        let mut nfa = Nfa::new(self.num_states(), self.initial, self.alphabet.clone())
            .with_names(self.names.clone());
        for (src, label, dst) in self.edges() {
            nfa.add_transition(src, label.clone(), dst);
        }
        for q in 0..self.num_states() {
            nfa.set_accepting(q, self.accepting[q]);
        }
        nfa
    }

    pub fn states_reachable(&self) -> Vec<StateId> {
        let mut seen = vec![false; self.num_states()];
        let mut queue = VecDeque::from([self.initial]);
        seen[self.initial] = true;
        let mut order = Vec::new();
        while let Some(q) = queue.pop_front() {
            order.push(q);
            for (_, &dst) in &self.transitions[q] {
                if !seen[dst] {
                    seen[dst] = true;
                    queue.push_back(dst);
                }
            }
        }
        order
    }

    /// Restrict to reachable states, renumbering in BFS order.
    pub fn trimmed(&self) -> TaskAutomaton {
        let order = self.states_reachable();
        let mut new_id = vec![usize::MAX; self.num_states()];
        for (i, &q) in order.iter().enumerate() {
            new_id[q] = i;
        }
        let mut out = TaskAutomaton::new(order.len(), 0, self.alphabet.clone()).with_names(
            order.iter().map(|&q| self.names[q].clone()).collect(),
        );
        for &q in &order {
            out.accepting[new_id[q]] = self.accepting[q];
            for (label, &dst) in &self.transitions[q] {
                out.transitions[new_id[q]].insert(label.clone(), new_id[dst]);
            }
        }
        out
    }

    /// Fresh sequential state names (`q0`, `q1`, ...) in BFS order from the
    /// initial state; drops unreachable states.
    pub fn renamed_sequential(&self) -> TaskAutomaton {
        let mut out = self.trimmed();
        out.names = default_names(out.num_states());
        out
    }

    /// Reorder states so all accepting states come last (needed wherever the
    /// hidden-state block convention puts the accepting block at the end).
    pub fn with_accepting_last(&self) -> TaskAutomaton {
        let mut order: Vec<StateId> = (0..self.num_states()).collect();
        order.sort_by_key(|&q| (self.accepting[q], q));
        let mut new_id = vec![0; self.num_states()];
        for (i, &q) in order.iter().enumerate() {
            new_id[q] = i;
        }
        let mut out = TaskAutomaton::new(order.len(), new_id[self.initial], self.alphabet.clone())
            .with_names(order.iter().map(|&q| self.names[q].clone()).collect());
        for &q in &order {
            out.accepting[new_id[q]] = self.accepting[q];
            for (label, &dst) in &self.transitions[q] {
                out.transitions[new_id[q]].insert(label.clone(), new_id[dst]);
            }
        }
        out
    }
}

/// Determinize an NFA with the classic worklist subset construction,
/// exploring reachable subsets only. The result is complete (the empty
/// subset acts as a rejecting sink when reachable).
pub fn subset_construction(nfa: &Nfa) -> TaskAutomaton {
    let mut subset_ids: BTreeMap<BTreeSet<StateId>, StateId> = BTreeMap::new();
    let mut subsets: Vec<BTreeSet<StateId>> = Vec::new();
    let mut queue = VecDeque::new();

    let start: BTreeSet<StateId> = BTreeSet::from([nfa.initial()]);
    subset_ids.insert(start.clone(), 0);
    subsets.push(start.clone());
    queue.push_back(start);

    let mut transitions: Vec<BTreeMap<Label, StateId>> = Vec::new();
    while let Some(subset) = queue.pop_front() {
        let mut row = BTreeMap::new();
        for symbol in nfa.alphabet().iter() {
            let mut next = BTreeSet::new();
            for &q in &subset {
                next.extend(nfa.successors(q, symbol));
            }
            let id = match subset_ids.get(&next) {
                Some(&id) => id,
                None => {
                    let id = subsets.len();
                    subset_ids.insert(next.clone(), id);
                    subsets.push(next.clone());
                    queue.push_back(next);
                    id
                }
            };
            row.insert(symbol.clone(), id);
        }
        transitions.push(row);
    }

    let names: Vec<String> = subsets
        .iter()
        .map(|s| {
            if s.is_empty() {
                "{}".to_string()
            } else {
                let inner: Vec<&str> = s.iter().map(|&q| nfa.name(q)).collect();
                format!("{{{}}}", inner.join(","))
            }
        })
        .collect();
    let mut out = TaskAutomaton::new(subsets.len(), 0, nfa.alphabet().clone()).with_names(names);
    out.transitions = transitions;
    for (id, subset) in subsets.iter().enumerate() {
        out.accepting[id] = subset.iter().any(|&q| nfa.is_accepting(q));
    }
    out
}

/// Hopcroft partition refinement. Requires a complete DFA; returns the
/// minimal complete DFA recognising the same language.
pub fn minimize(dfa: &TaskAutomaton) -> Result<TaskAutomaton> {
    if !dfa.is_complete() {
        return Err(Error::Automaton(
            "minimize requires a complete automaton".into(),
        ));
    }
    let dfa = dfa.trimmed();
    let n = dfa.num_states();
    let symbols: Vec<Label> = dfa.alphabet.iter().cloned().collect();

    // Predecessor lists per symbol.
    let mut preimage: Vec<Vec<Vec<StateId>>> = vec![vec![Vec::new(); n]; symbols.len()];
    for (src, label, dst) in dfa.edges() {
        let c = symbols.iter().position(|l| l == label).unwrap();
        preimage[c][dst].push(src);
    }

    let accepting: BTreeSet<StateId> = dfa.accepting_states().collect();
    let rejecting: BTreeSet<StateId> = (0..n).filter(|q| !dfa.accepting[*q]).collect();

    let mut blocks: Vec<BTreeSet<StateId>> = Vec::new();
    for b in [accepting, rejecting] {
        if !b.is_empty() {
            blocks.push(b);
        }
    }
    let mut block_of: Vec<usize> = vec![0; n];
    for (i, b) in blocks.iter().enumerate() {
        for &q in b {
            block_of[q] = i;
        }
    }
    let mut worklist: VecDeque<(usize, usize)> = VecDeque::new();
    for c in 0..symbols.len() {
        for b in 0..blocks.len() {
            worklist.push_back((b, c));
        }
    }

    while let Some((splitter, c)) = worklist.pop_front() {
        // States with a c-transition into the splitter block.
        let mut x: BTreeSet<StateId> = BTreeSet::new();
        for &q in &blocks[splitter] {
            x.extend(preimage[c][q].iter().copied());
        }
        if x.is_empty() {
            continue;
        }
        let affected: BTreeSet<usize> = x.iter().map(|&q| block_of[q]).collect();
        for b in affected {
            let inside: BTreeSet<StateId> =
                blocks[b].iter().copied().filter(|q| x.contains(q)).collect();
            if inside.len() == blocks[b].len() || inside.is_empty() {
                continue;
            }
            let outside: BTreeSet<StateId> = blocks[b].difference(&inside).copied().collect();
            let (small, large) = if inside.len() <= outside.len() {
                (inside, outside)
            } else {
                (outside, inside)
            };
            let new_id = blocks.len();
            blocks[b] = large;
            blocks.push(small);
            for &q in &blocks[new_id] {
                block_of[q] = new_id;
            }
            for cc in 0..symbols.len() {
                worklist.push_back((new_id, cc));
            }
        }
    }

    // Renumber blocks by smallest member for a deterministic result.
    let mut order: Vec<usize> = (0..blocks.len()).collect();
    order.sort_by_key(|&b| *blocks[b].iter().next().unwrap());
    let mut renumber = vec![0; blocks.len()];
    for (i, &b) in order.iter().enumerate() {
        renumber[b] = i;
    }

    let names: Vec<String> = order
        .iter()
        .map(|&b| dfa.names[*blocks[b].iter().next().unwrap()].clone())
        .collect();
    let mut out = TaskAutomaton::new(
        blocks.len(),
        renumber[block_of[dfa.initial]],
        dfa.alphabet.clone(),
    )
    .with_names(names);
    for (i, &b) in order.iter().enumerate() {
        let repr = *blocks[b].iter().next().unwrap();
        out.accepting[i] = dfa.accepting[repr];
        for (label, &dst) in &dfa.transitions[repr] {
            out.transitions[i].insert(label.clone(), renumber[block_of[dst]]);
        }
    }
    Ok(out)
}

/// True iff the two complete DFAs recognise the same language. Implemented
/// as reachability of a distinguishing pair in the product automaton.
pub fn language_equivalent(a: &TaskAutomaton, b: &TaskAutomaton) -> Result<bool> {
    if a.alphabet != b.alphabet {
        return Err(Error::AlphabetMismatch(
            "language comparison needs identical alphabets".into(),
        ));
    }
    for (dfa, which) in [(a, "left"), (b, "right")] {
        if !dfa.is_complete() {
            return Err(Error::Automaton(format!(
                "language comparison needs complete automata ({which} side is partial)"
            )));
        }
    }
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([(a.initial, b.initial)]);
    seen.insert((a.initial, b.initial));
    while let Some((qa, qb)) = queue.pop_front() {
        if a.accepting[qa] != b.accepting[qb] {
            return Ok(false);
        }
        for symbol in a.alphabet.iter() {
            let pair = (
                a.target(qa, symbol).unwrap(),
                b.target(qb, symbol).unwrap(),
            );
            if seen.insert(pair) {
                queue.push_back(pair);
            }
        }
    }
    Ok(true)
}

/// True iff the reachable parts of the two complete DFAs are isomorphic
/// (identical up to state renaming).
pub fn isomorphic(a: &TaskAutomaton, b: &TaskAutomaton) -> bool {
    if a.alphabet != b.alphabet || !a.is_complete() || !b.is_complete() {
        return false;
    }
    let (a, b) = (a.trimmed(), b.trimmed());
    if a.num_states() != b.num_states() {
        return false;
    }
    // Both are BFS-renumbered with the same symbol order, so isomorphic
    // automata are now literally identical apart from names.
    for q in 0..a.num_states() {
        if a.accepting[q] != b.accepting[q] {
            return false;
        }
        if a.transitions[q] != b.transitions[q] {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Text format and DOT export
// ---------------------------------------------------------------------------

fn render_text(
    alphabet: &Alphabet,
    names: &[String],
    initial: StateId,
    accepting: &[bool],
    edges: Vec<(StateId, &Label, StateId)>,
) -> String {
    // State names are whitespace-delimited tokens in this format.
    let names: Vec<String> = names.iter().map(|n| n.replace(char::is_whitespace, "_")).collect();
    let mut out = String::new();
    let symbols: Vec<String> = alphabet.iter().map(|l| l.to_string()).collect();
    writeln!(out, "alphabet {}", symbols.join(" ")).unwrap();
    writeln!(out, "initial {}", names[initial]).unwrap();
    let acc: Vec<&str> = accepting
        .iter()
        .enumerate()
        .filter(|(_, &a)| a)
        .map(|(q, _)| names[q].as_str())
        .collect();
    writeln!(out, "accepting {}", acc.join(" ")).unwrap();
    for (src, label, dst) in edges {
        writeln!(out, "{} {} {}", names[src], label, names[dst]).unwrap();
    }
    out
}

struct ParsedAutomaton {
    names: Vec<String>,
    initial: StateId,
    alphabet: Alphabet,
    accepting: Vec<bool>,
    edges: Vec<(StateId, Label, StateId)>,
}

/// Shared parser for the `src symbol dst` text format with
/// `alphabet`/`initial`/`accepting` headers.
fn parse_text(text: &str, path: &str) -> Result<ParsedAutomaton> {
    let mut names: Vec<String> = Vec::new();
    let mut ids: BTreeMap<String, StateId> = BTreeMap::new();
    let mut intern = |name: &str, names: &mut Vec<String>| -> StateId {
        if let Some(&id) = ids.get(name) {
            return id;
        }
        let id = names.len();
        names.push(name.to_string());
        ids.insert(name.to_string(), id);
        id
    };

    let mut alphabet = Alphabet::new();
    let mut initial: Option<StateId> = None;
    let mut accepting_names: Vec<String> = Vec::new();
    let mut edges: Vec<(StateId, Label, StateId)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            "alphabet" => {
                for t in &tokens[1..] {
                    alphabet.insert(
                        Label::parse(t).map_err(|e| Error::parse(path, lineno, e.to_string()))?,
                    );
                }
            }
            "initial" => {
                if tokens.len() != 2 {
                    return Err(Error::parse(path, lineno, "expected `initial <state>`"));
                }
                initial = Some(intern(tokens[1], &mut names));
            }
            "accepting" => {
                accepting_names.extend(tokens[1..].iter().map(|t| t.to_string()));
            }
            _ => {
                if tokens.len() != 3 {
                    return Err(Error::parse(path, lineno, "expected `<src> <symbol> <dst>`"));
                }
                let src = intern(tokens[0], &mut names);
                let label =
                    Label::parse(tokens[1]).map_err(|e| Error::parse(path, lineno, e.to_string()))?;
                let dst = intern(tokens[2], &mut names);
                alphabet.insert(label.clone());
                edges.push((src, label, dst));
            }
        }
    }

    let initial = initial.ok_or_else(|| Error::parse(path, 0, "missing `initial` header"))?;
    let mut accepting = vec![false; names.len()];
    for name in accepting_names {
        let id = ids.get(&name).copied().ok_or_else(|| {
            Error::parse(path, 0, format!("accepting state {name:?} never mentioned"))
        })?;
        accepting[id] = true;
    }
    Ok(ParsedAutomaton {
        names,
        initial,
        alphabet,
        accepting,
        edges,
    })
}

fn dot_render(
    names: &[String],
    initial: StateId,
    accepting: &[bool],
    edges: Vec<(StateId, &Label, StateId)>,
) -> String {
    let mut out = String::new();
    out.push_str("digraph {\n  rankdir=LR;\n");
    out.push_str("  start [shape=none, label=\"\", width=0, height=0];\n");
    for (q, name) in names.iter().enumerate() {
        let shape = if accepting[q] { "doublecircle" } else { "circle" };
        writeln!(out, "  {q} [shape={shape}, label=\"{name}\"];").unwrap();
    }
    writeln!(out, "  start -> {initial};").unwrap();
    // One drawn edge per (src, dst), labels joined.
    let mut grouped: BTreeMap<(StateId, StateId), Vec<String>> = BTreeMap::new();
    for (src, label, dst) in edges {
        grouped.entry((src, dst)).or_default().push(label.pretty());
    }
    for ((src, dst), labels) in grouped {
        writeln!(out, "  {src} -> {dst} [label=\"{}\"];", labels.join(", ")).unwrap();
    }
    out.push_str("}\n");
    out
}

impl TaskAutomaton {
    pub fn to_text(&self) -> String {
        render_text(
            &self.alphabet,
            &self.names,
            self.initial,
            &self.accepting,
            self.edges().collect(),
        )
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let p = parse_text(text, path)?;
        let mut out =
            TaskAutomaton::new(p.names.len(), p.initial, p.alphabet).with_names(p.names);
        for (src, label, dst) in p.edges {
            out.add_transition(src, label, dst)?;
        }
        out.accepting = p.accepting;
        Ok(out)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::parse(path.display().to_string(), 0, e.to_string()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_dot(&self) -> String {
        dot_render(&self.names, self.initial, &self.accepting, self.edges().collect())
    }
}

impl Nfa {
    pub fn to_text(&self) -> String {
        render_text(
            &self.alphabet,
            &self.names,
            self.initial,
            &self.accepting,
            self.edges().collect(),
        )
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let p = parse_text(text, path)?;
        let mut out = Nfa::new(p.names.len(), p.initial, p.alphabet).with_names(p.names);
        for (src, label, dst) in p.edges {
            out.add_transition(src, label, dst);
        }
        out.accepting = p.accepting;
        Ok(out)
    }

    pub fn to_dot(&self) -> String {
        dot_render(&self.names, self.initial, &self.accepting, self.edges().collect())
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;

    /// Every word over the alphabet up to the given length (including the
    /// empty word), in deterministic order.
    pub fn all_words(alphabet: &Alphabet, max_len: usize) -> Vec<Vec<Label>> {
        let symbols: Vec<Label> = alphabet.iter().cloned().collect();
        let mut words: Vec<Vec<Label>> = vec![Vec::new()];
        let mut frontier: Vec<Vec<Label>> = vec![Vec::new()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &frontier {
                for s in &symbols {
                    let mut w2 = w.clone();
                    w2.push(s.clone());
                    next.push(w2);
                }
            }
            words.extend(next.iter().cloned());
            frontier = next;
        }
        words
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn coffee_stairs_alphabet() -> Alphabet {
        [Label::empty(), Label::new("coffee"), Label::new("stairs")]
            .into_iter()
            .collect()
    }

    #[test]
    fn run_coffee_then_stairs() {
        let ta = presets::sequence_ta(&["coffee", "stairs"], &coffee_stairs_alphabet());
        let word: Vec<Label> = [".", ".", "coffee", ".", "stairs"]
            .iter()
            .map(|t| Label::parse(t).unwrap())
            .collect();
        assert!(ta.accepts(&word).unwrap());

        // Wrong order is rejected.
        let word: Vec<Label> = [Label::new("stairs"), Label::new("coffee")].to_vec();
        assert!(!ta.accepts(&word).unwrap());

        // Empty word on a non-accepting initial state.
        assert!(!ta.accepts(&[]).unwrap());
    }

    #[test]
    fn run_rejects_foreign_symbols() {
        let ta = presets::sequence_ta(&["coffee", "stairs"], &coffee_stairs_alphabet());
        assert!(ta.accepts(&[Label::new("tv")]).is_err());
    }

    #[test]
    fn completion_preserves_defined_runs() {
        let mut partial = TaskAutomaton::new(2, 0, coffee_stairs_alphabet());
        partial.add_transition(0, Label::new("coffee"), 1).unwrap();
        partial.set_accepting(1, true);

        let complete = partial.complete(Completion::SelfLoop);
        assert!(complete.is_complete());
        assert!(complete.accepts(&[Label::new("coffee")]).unwrap());
        // Self-loop policy: empty symbols no-op.
        assert!(complete
            .accepts(&[Label::empty(), Label::new("coffee")])
            .unwrap());

        // Completing an already complete automaton is the identity.
        let again = complete.complete(Completion::SelfLoop);
        assert_eq!(again, complete);
        let again = complete.complete(Completion::RejectSink);
        assert_eq!(again, complete);

        // Sink policy rejects words through missing symbols.
        let sunk = partial.complete(Completion::RejectSink);
        assert!(sunk.is_complete());
        assert!(!sunk
            .accepts(&[Label::empty(), Label::new("coffee")])
            .unwrap());
    }

    #[test]
    fn subset_construction_of_dfa_is_isomorphic() {
        let ta = presets::sequence_ta(&["coffee", "stairs"], &coffee_stairs_alphabet());
        let det = subset_construction(&ta.to_nfa());
        assert!(isomorphic(&det, &ta));
    }

    #[test]
    fn minimize_merges_bisimilar_accepting_states() {
        // q2 and q3 are both accepting sinks reached on "coffee".
        let alphabet: Alphabet = [Label::empty(), Label::new("coffee")].into_iter().collect();
        let mut ta = TaskAutomaton::new(4, 0, alphabet);
        ta.add_transition(0, Label::new("coffee"), 2).unwrap();
        ta.add_transition(0, Label::empty(), 1).unwrap();
        ta.add_transition(1, Label::new("coffee"), 3).unwrap();
        ta.add_transition(1, Label::empty(), 1).unwrap();
        for q in 2..4 {
            ta.add_transition(q, Label::new("coffee"), q).unwrap();
            ta.add_transition(q, Label::empty(), q).unwrap();
            ta.set_accepting(q, true);
        }
        let min = minimize(&ta).unwrap();
        assert_eq!(min.num_states(), 2);
        assert!(language_equivalent(&min, &ta).unwrap());
    }

    #[test]
    fn minimize_is_idempotent_on_minimal_input() {
        let ta = presets::sequence_ta(&["coffee", "stairs"], &coffee_stairs_alphabet());
        let once = minimize(&ta).unwrap();
        assert_eq!(once.num_states(), 3);
        let twice = minimize(&once).unwrap();
        assert!(isomorphic(&once, &twice));
    }

    #[test]
    fn minimize_rejects_partial_automata() {
        let mut partial = TaskAutomaton::new(2, 0, coffee_stairs_alphabet());
        partial.add_transition(0, Label::new("coffee"), 1).unwrap();
        assert!(minimize(&partial).is_err());
    }

    #[test]
    fn language_equivalence_basics() {
        let ta = presets::sequence_ta(&["coffee", "stairs"], &coffee_stairs_alphabet());
        assert!(language_equivalent(&ta, &ta).unwrap());

        // Complement-accepting version differs (language is not trivial).
        let mut flipped = ta.clone();
        for q in 0..flipped.num_states() {
            let acc = flipped.is_accepting(q);
            flipped.set_accepting(q, !acc);
        }
        assert!(!language_equivalent(&ta, &flipped).unwrap());

        let other_alphabet: Alphabet = [Label::empty()].into_iter().collect();
        let other = TaskAutomaton::new(1, 0, other_alphabet).complete(Completion::SelfLoop);
        assert!(language_equivalent(&ta, &other).is_err());
    }

    #[test]
    fn text_format_round_trip() {
        let ta = presets::sequence_ta(&["coffee", "stairs"], &coffee_stairs_alphabet());
        let text = ta.to_text();
        let back = TaskAutomaton::parse(&text, "mem").unwrap();
        assert!(isomorphic(&ta, &back));
        assert!(language_equivalent(&ta, &back).unwrap());
    }

    #[test]
    fn dot_marks_accepting_with_doublecircle() {
        let ta = presets::sequence_ta(&["coffee", "stairs"], &coffee_stairs_alphabet());
        let dot = ta.to_dot();
        assert!(dot.contains("doublecircle"));
        assert!(dot.contains("∅"));
    }

    #[test]
    fn nfa_membership_via_simulation() {
        let alphabet: Alphabet = [Label::new("a"), Label::new("b")].into_iter().collect();
        let mut nfa = Nfa::new(3, 0, alphabet);
        nfa.add_transition(0, Label::new("a"), 0);
        nfa.add_transition(0, Label::new("b"), 0);
        nfa.add_transition(0, Label::new("a"), 1);
        nfa.add_transition(1, Label::new("b"), 2);
        nfa.set_accepting(2, true);
        // Language: words ending in "ab".
        let a = Label::new("a");
        let b = Label::new("b");
        assert!(nfa.accepts(&[a.clone(), b.clone()]));
        assert!(nfa.accepts(&[b.clone(), a.clone(), a.clone(), b.clone()]));
        assert!(!nfa.accepts(&[a.clone(), a.clone()]));
        let det = subset_construction(&nfa);
        assert!(det.is_complete());
        assert_eq!(det.accepts(&[a, b]).unwrap(), true);
    }
}
