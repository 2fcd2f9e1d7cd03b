//! Slot-filling text frames.
//!
//! A frame is literal text with `{slot}` placeholders. A slot may carry a
//! determiner modifier, `{a:word}` or `{the:word}`, which is applied to the
//! value (or to every element of a list value) before it is spliced in.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Determiner applied to a slot value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Determiner {
    /// "a" / "an", chosen by [`Articles`].
    Indefinite,
    Definite,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot {
        name: String,
        determiner: Option<Determiner>,
    },
}

/// A parsed frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    source: String,
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameError(pub String);

impl fmt::Display for FrameError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for FrameError {}

/// Value bound to a slot during rendering.
#[derive(Debug, Clone, Copy)]
pub enum SlotValue<'a> {
    One(&'a str),
    /// Rendered as a coordinated list: "A", "A and B", "A, B, and C".
    List(&'a [String]),
}

impl Frame {
    pub fn parse(source: &str) -> Result<Self, FrameError> {
        let mut segments = Vec::new();
        let mut text = String::new();
        let mut chars = source.chars();
        while let Some(c) = chars.next() {
            match c {
                '{' => {
                    let mut inner = String::new();
                    let mut closed = false;
                    for c in chars.by_ref() {
                        if c == '}' {
                            closed = true;
                            break;
                        }
                        if c == '{' {
                            return Err(FrameError(format!("nested '{{' in frame {source:?}")));
                        }
                        inner.push(c);
                    }
                    if !closed {
                        return Err(FrameError(format!("unclosed slot in frame {source:?}")));
                    }
                    let (determiner, name) = match inner.split_once(':') {
                        Some(("a", name)) => (Some(Determiner::Indefinite), name),
                        Some(("the", name)) => (Some(Determiner::Definite), name),
                        Some((other, _)) => {
                            return Err(FrameError(format!(
                                "unknown determiner {other:?} in frame {source:?}"
                            )))
                        }
                        None => (None, inner.as_str()),
                    };
                    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                    {
                        return Err(FrameError(format!("bad slot name {name:?} in frame {source:?}")));
                    }
                    if !text.is_empty() {
                        segments.push(Segment::Text(std::mem::take(&mut text)));
                    }
                    segments.push(Segment::Slot {
                        name: name.to_string(),
                        determiner,
                    });
                }
                '}' => return Err(FrameError(format!("stray '}}' in frame {source:?}"))),
                c => text.push(c),
            }
        }
        if !text.is_empty() {
            segments.push(Segment::Text(text));
        }
        Ok(Frame {
            source: source.to_string(),
            segments,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Slot names in order of appearance, with repeats.
    pub fn slots(&self) -> Vec<&str> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Slot { name, .. } => Some(name.as_str()),
                Segment::Text(_) => None,
            })
            .collect()
    }

    /// Checks that every slot in `expected` occurs exactly once and no other
    /// slot occurs.
    pub fn check_slots(&self, expected: &[&str]) -> Result<(), FrameError> {
        let mut found = self.slots();
        found.sort_unstable();
        let mut want = expected.to_vec();
        want.sort_unstable();
        if found == want {
            Ok(())
        } else {
            Err(FrameError(format!(
                "frame {:?} has slots {:?}, expected exactly {:?}",
                self.source, found, want
            )))
        }
    }

    /// Occurrences of `needle` in the literal text of the frame.
    pub fn count_literal(&self, needle: &str) -> usize {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Text(t) => t.matches(needle).count(),
                Segment::Slot { .. } => 0,
            })
            .sum()
    }

    /// Renders the frame. Panics if a slot has no binding; frames are
    /// slot-checked when the item bank is validated.
    pub fn render<'v>(&self, articles: &Articles, bind: &dyn Fn(&str) -> Option<SlotValue<'v>>) -> String {
        let mut out = String::new();
        for segment in &self.segments {
            match segment {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot { name, determiner } => {
                    let value = bind(name)
                        .unwrap_or_else(|| panic!("unbound slot {name:?} in frame {:?}", self.source));
                    match value {
                        SlotValue::One(v) => out.push_str(&articles.apply(*determiner, v)),
                        SlotValue::List(items) => {
                            let items: Vec<String> =
                                items.iter().map(|v| articles.apply(*determiner, v)).collect();
                            out.push_str(&join_list(&items));
                        }
                    }
                }
            }
        }
        out
    }
}

impl Serialize for Frame {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Frame {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Frame::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Coordinated list with a serial comma: "A", "A and B", "A, B, and C".
pub fn join_list<S: AsRef<str>>(items: &[S]) -> String {
    match items {
        [] => String::new(),
        [one] => one.as_ref().to_string(),
        [a, b] => format!("{} and {}", a.as_ref(), b.as_ref()),
        [init @ .., last] => {
            let head: Vec<&str> = init.iter().map(AsRef::as_ref).collect();
            format!("{}, and {}", head.join(", "), last.as_ref())
        }
    }
}

/// Indefinite-article selection: per-word overrides, otherwise "an" before a
/// vowel letter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Articles(pub BTreeMap<String, String>);

impl Articles {
    pub fn indefinite(&self, word: &str) -> &str {
        if let Some(a) = self.0.get(&word.to_lowercase()) {
            return a;
        }
        match word.chars().next().map(|c| c.to_ascii_lowercase()) {
            Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
            _ => "a",
        }
    }

    fn apply(&self, determiner: Option<Determiner>, word: &str) -> String {
        match determiner {
            None => word.to_string(),
            Some(Determiner::Definite) => format!("the {word}"),
            Some(Determiner::Indefinite) => format!("{} {word}", self.indefinite(word)),
        }
    }
}
