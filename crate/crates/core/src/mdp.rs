//! Labelled gridworld MDPs.
//!
//! States are grid cells indexed row-major with row 0 at the *bottom*
//! (`index = row * width + col`). Per-action moves are deterministic with
//! wall clamping: moving against a wall keeps the agent in the same cell.
//! All stochasticity comes from the policy.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::label::{Alphabet, Label};

/// The four move actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        match self {
            Action::Up => 0,
            Action::Down => 1,
            Action::Left => 2,
            Action::Right => 3,
        }
    }
}

/// A finite labelled MDP over grid cells.
///
/// The type itself is general enough for any finite state space, but the only
/// provided constructor builds gridworlds.
#[derive(Debug, Clone)]
pub struct LabelledMdp {
    width: usize,
    height: usize,
    initial: usize,
    labels: Vec<Label>,
}

impl LabelledMdp {
    /// Build a gridworld. `labelled_cells` maps `(row, col)` (row 0 = bottom)
    /// to labels; unlabelled cells carry the empty label.
    pub fn gridworld(
        width: usize,
        height: usize,
        labelled_cells: &BTreeMap<(usize, usize), Label>,
        initial_cell: (usize, usize),
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::GridConstruction(
                "grid dimensions must be at least 1x1".into(),
            ));
        }
        let in_range = |(row, col): (usize, usize)| row < height && col < width;
        if !in_range(initial_cell) {
            return Err(Error::GridConstruction(format!(
                "initial cell ({}, {}) outside {width}x{height} grid",
                initial_cell.0, initial_cell.1
            )));
        }
        let mut labels = vec![Label::empty(); width * height];
        for (&cell, label) in labelled_cells {
            if !in_range(cell) {
                return Err(Error::GridConstruction(format!(
                    "labelled cell ({}, {}) outside {width}x{height} grid",
                    cell.0, cell.1
                )));
            }
            labels[cell.0 * width + cell.1] = label.clone();
        }
        Ok(LabelledMdp {
            width,
            height,
            initial: initial_cell.0 * width + initial_cell.1,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// |S| = width × height.
    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    pub fn initial_state(&self) -> usize {
        self.initial
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.height && col < self.width);
        row * self.width + col
    }

    pub fn cell(&self, state: usize) -> (usize, usize) {
        (state / self.width, state % self.width)
    }

    pub fn label(&self, state: usize) -> &Label {
        &self.labels[state]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// The set of distinct labels in use (the range of the labelling
    /// function), which serves as the working alphabet downstream.
    pub fn label_range(&self) -> Alphabet {
        self.labels.iter().cloned().collect()
    }

    /// Deterministic per-action successor with wall clamping.
    pub fn step(&self, state: usize, action: Action) -> usize {
        let (row, col) = self.cell(state);
        let (nrow, ncol) = match action {
            Action::Up if row + 1 < self.height => (row + 1, col),
            Action::Down if row > 0 => (row - 1, col),
            Action::Left if col > 0 => (row, col - 1),
            Action::Right if col + 1 < self.width => (row, col + 1),
            _ => (row, col),
        };
        nrow * self.width + ncol
    }

    /// Number of walls adjacent to a cell (0 for interior cells).
    pub fn wall_count(&self, state: usize) -> usize {
        Action::ALL
            .iter()
            .filter(|&&a| self.step(state, a) == state)
            .count()
    }

    /// Parse the grid description format:
    ///
    /// ```text
    /// width 3
    /// height 3
    /// start 0 0            # row col, row 0 = bottom row
    /// . . stairs           # rows follow top-to-bottom
    /// . . coffee
    /// . . coffee
    /// ```
    ///
    /// `#` starts a comment; blank lines are ignored.
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut width: Option<usize> = None;
        let mut height: Option<usize> = None;
        let mut start: Option<(usize, usize)> = None;
        let mut rows: Vec<(usize, Vec<Label>)> = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens[0] {
                "width" | "height" => {
                    let v = tokens
                        .get(1)
                        .and_then(|t| t.parse::<usize>().ok())
                        .ok_or_else(|| {
                            Error::parse(path, lineno, format!("expected `{} <number>`", tokens[0]))
                        })?;
                    if tokens[0] == "width" {
                        width = Some(v);
                    } else {
                        height = Some(v);
                    }
                }
                "start" => {
                    if tokens.len() != 3 {
                        return Err(Error::parse(path, lineno, "expected `start <row> <col>`"));
                    }
                    let row = tokens[1].parse::<usize>().map_err(|_| {
                        Error::parse(path, lineno, format!("bad row {:?}", tokens[1]))
                    })?;
                    let col = tokens[2].parse::<usize>().map_err(|_| {
                        Error::parse(path, lineno, format!("bad col {:?}", tokens[2]))
                    })?;
                    start = Some((row, col));
                }
                _ => {
                    let mut cells = Vec::with_capacity(tokens.len());
                    for t in &tokens {
                        cells.push(
                            Label::parse(t)
                                .map_err(|e| Error::parse(path, lineno, e.to_string()))?,
                        );
                    }
                    rows.push((lineno, cells));
                }
            }
        }

        let width = width.ok_or_else(|| Error::parse(path, 0, "missing `width` header"))?;
        let height = height.ok_or_else(|| Error::parse(path, 0, "missing `height` header"))?;
        let start = start.ok_or_else(|| Error::parse(path, 0, "missing `start` header"))?;
        if rows.len() != height {
            return Err(Error::parse(
                path,
                rows.last().map(|r| r.0).unwrap_or(0),
                format!("expected {height} grid rows, found {}", rows.len()),
            ));
        }
        let mut cells = BTreeMap::new();
        // Grid rows are written top-to-bottom; internal row 0 is the bottom.
        for (i, (lineno, row)) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::parse(
                    path,
                    *lineno,
                    format!("expected {width} cells, found {}", row.len()),
                ));
            }
            let grid_row = height - 1 - i;
            for (col, label) in row.iter().enumerate() {
                if !label.is_empty() {
                    cells.insert((grid_row, col), label.clone());
                }
            }
        }
        LabelledMdp::gridworld(width, height, &cells, start)
            .map_err(|e| Error::parse(path, 0, e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::parse(path.display().to_string(), 0, e.to_string()))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Serialize back to the grid description format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let (srow, scol) = self.cell(self.initial);
        writeln!(out, "width {}", self.width).unwrap();
        writeln!(out, "height {}", self.height).unwrap();
        writeln!(out, "start {srow} {scol}").unwrap();
        for row in (0..self.height).rev() {
            let line: Vec<String> = (0..self.width)
                .map(|col| self.labels[self.index(row, col)].to_string())
                .collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        out
    }
}

/// A stationary stochastic policy: one action distribution per state.
#[derive(Debug, Clone)]
pub struct Policy {
    probs: Vec<[f64; 4]>,
}

impl Policy {
    /// The uniform-random exploration policy (1/4 per action everywhere).
    pub fn uniform(mdp: &LabelledMdp) -> Self {
        Policy {
            probs: vec![[0.25; 4]; mdp.num_states()],
        }
    }

    pub fn new(probs: Vec<[f64; 4]>) -> Result<Self> {
        for (s, row) in probs.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::Simulation(format!(
                    "policy row for state {s} is not a distribution (sum {sum})"
                )));
            }
        }
        Ok(Policy { probs })
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn action_prob(&self, state: usize, action: Action) -> f64 {
        self.probs[state][action.index()]
    }

    pub fn distribution(&self, state: usize) -> &[f64; 4] {
        &self.probs[state]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3() -> LabelledMdp {
        let mut cells = BTreeMap::new();
        cells.insert((0, 2), Label::new("coffee"));
        cells.insert((2, 2), Label::new("stairs"));
        LabelledMdp::gridworld(3, 3, &cells, (0, 0)).unwrap()
    }

    #[test]
    fn state_count_matches_dimensions() {
        assert_eq!(grid3().num_states(), 9);
        let g5 = LabelledMdp::gridworld(5, 5, &BTreeMap::new(), (0, 0)).unwrap();
        assert_eq!(g5.num_states(), 25);
    }

    #[test]
    fn single_cell_grid_self_loops() {
        let g = LabelledMdp::gridworld(1, 1, &BTreeMap::new(), (0, 0)).unwrap();
        for a in Action::ALL {
            assert_eq!(g.step(0, a), 0);
        }
        assert_eq!(g.wall_count(0), 4);
    }

    #[test]
    fn out_of_range_cell_is_rejected() {
        let mut cells = BTreeMap::new();
        cells.insert((3, 0), Label::new("x"));
        assert!(LabelledMdp::gridworld(3, 3, &cells, (0, 0)).is_err());
        assert!(LabelledMdp::gridworld(3, 3, &BTreeMap::new(), (0, 3)).is_err());
        assert!(LabelledMdp::gridworld(0, 3, &BTreeMap::new(), (0, 0)).is_err());
    }

    #[test]
    fn wall_clamp_and_open_moves() {
        let g = grid3();
        let bl = g.index(0, 0);
        assert_eq!(g.step(bl, Action::Left), bl);
        assert_eq!(g.step(bl, Action::Down), bl);
        assert_eq!(g.step(bl, Action::Up), g.index(1, 0));
        assert_eq!(g.step(bl, Action::Right), g.index(0, 1));
    }

    #[test]
    fn interior_cell_has_four_distinct_neighbours() {
        // Enumerate the full 3x3 neighbourhood structure by hand for the
        // centre cell.
        let g = grid3();
        let c = g.index(1, 1);
        let succs: Vec<usize> = Action::ALL.iter().map(|&a| g.step(c, a)).collect();
        assert_eq!(
            succs,
            vec![g.index(2, 1), g.index(0, 1), g.index(1, 0), g.index(1, 2)]
        );
        let mut sorted = succs.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 4, "four distinct neighbours");
    }

    #[test]
    fn uniform_policy_rows() {
        let g = grid3();
        let pi = Policy::uniform(&g);
        for s in 0..g.num_states() {
            assert_eq!(pi.distribution(s), &[0.25, 0.25, 0.25, 0.25]);
            let sum: f64 = pi.distribution(s).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_text_round_trip() {
        let g = grid3();
        let text = g.to_text();
        let g2 = LabelledMdp::parse(&text, "mem").unwrap();
        assert_eq!(g2.num_states(), g.num_states());
        assert_eq!(g2.initial_state(), g.initial_state());
        assert_eq!(g2.labels(), g.labels());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "width 2\nheight 2\nstart 0 0\n. .\n. a,,b\n";
        let err = LabelledMdp::parse(bad, "g.txt").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("g.txt:5"), "got {msg}");
    }
}
