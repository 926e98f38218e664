use serde::{Deserialize, Serialize};

use super::partial::Location;

/// How the DP reached a cell of a path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    /// Next component matched in the next document.
    Match,
    /// Same component matched again in the next document.
    Continuation,
    /// A document without a hit inside the match.
    Insertion,
    /// A component skipped within the same document.
    Deletion,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distortions {
    pub insertions: u32,
    pub deletions: u32,
    pub continuations: u32,
}

impl Distortions {
    pub fn of(steps: impl IntoIterator<Item = Step>) -> Distortions {
        let mut d = Distortions::default();
        for s in steps {
            match s {
                Step::Insertion => d.insertions += 1,
                Step::Deletion => d.deletions += 1,
                Step::Continuation => d.continuations += 1,
                Step::Match => {}
            }
        }
        d
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathCell {
    pub document: u32,
    pub component: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<Step>,
    pub locations: Vec<Location>,
}

/// A scored segment `[start, end]` of documents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullMatch {
    pub start: u32,
    pub end: u32,
    pub score: f64,
    pub path: Vec<PathCell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortions: Option<Distortions>,
}

impl FullMatch {
    pub fn overlaps(&self, start: u32, end: u32) -> bool {
        self.start <= end && start <= self.end
    }
}
