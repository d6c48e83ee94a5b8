//! Labels: sets of atomic propositions attached to MDP states.
//!
//! A label is an element of `2^AP`, canonicalized so that equal sets compare
//! equal: propositions are kept sorted and the text form joins them with
//! commas. The empty label is written `.` in all text formats.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

/// The canonical text token for the empty label.
pub const EMPTY_TOKEN: &str = ".";

/// A set of atomic propositions (possibly empty).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Label {
    props: BTreeSet<String>,
}

impl Label {
    /// The empty label `∅`.
    pub fn empty() -> Self {
        Label::default()
    }

    /// A singleton label `{prop}`.
    pub fn new(prop: &str) -> Self {
        let mut props = BTreeSet::new();
        props.insert(prop.to_string());
        Label { props }
    }

    pub fn from_props<I: IntoIterator<Item = S>, S: Into<String>>(iter: I) -> Self {
        Label {
            props: iter.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.props.is_empty()
    }

    pub fn props(&self) -> impl Iterator<Item = &str> {
        self.props.iter().map(String::as_str)
    }

    /// Parse a text token: `.` is the empty label, otherwise a
    /// comma-separated list of proposition names.
    pub fn parse(token: &str) -> Result<Self> {
        if token == EMPTY_TOKEN {
            return Ok(Label::empty());
        }
        let mut props = BTreeSet::new();
        for part in token.split(',') {
            if part.is_empty() {
                return Err(Error::GridConstruction(format!(
                    "bad label token {token:?}: empty proposition name"
                )));
            }
            if part.contains(char::is_whitespace) || part == EMPTY_TOKEN {
                return Err(Error::GridConstruction(format!(
                    "bad proposition name {part:?}"
                )));
            }
            props.insert(part.to_string());
        }
        Ok(Label { props })
    }

    /// Display form for DOT output; uses `∅` for the empty label.
    pub fn pretty(&self) -> String {
        if self.is_empty() {
            "∅".to_string()
        } else {
            self.to_string()
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.props.is_empty() {
            return f.write_str(EMPTY_TOKEN);
        }
        let mut first = true;
        for p in &self.props {
            if !first {
                f.write_str(",")?;
            }
            f.write_str(p)?;
            first = false;
        }
        Ok(())
    }
}

/// An ordered set of labels; ordering fixes iteration order everywhere an
/// alphabet is walked, which keeps all outputs deterministic.
pub type Alphabet = BTreeSet<Label>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_ordering() {
        let a = Label::from_props(["tv", "couch"]);
        let b = Label::from_props(["couch", "tv"]);
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "couch,tv");
    }

    #[test]
    fn empty_round_trip() {
        let e = Label::parse(".").unwrap();
        assert!(e.is_empty());
        assert_eq!(e.to_string(), ".");
        assert_eq!(e, Label::empty());
    }

    #[test]
    fn rejects_bad_tokens() {
        assert!(Label::parse("a,,b").is_err());
        assert!(Label::parse("").is_err());
    }

    #[test]
    fn parse_round_trips_multi_prop() {
        let l = Label::parse("couch,tv").unwrap();
        assert_eq!(Label::parse(&l.to_string()).unwrap(), l);
    }
}
