//! Queries, partial matches and the two full-match assemblers.

mod dp;
mod greedy;
mod matches;
mod partial;
mod query;

pub use dp::{dp_full_matches, DpMatrix};
pub use greedy::{best_extent, coverage_counts, greedy_full_matches};
pub use matches::{Distortions, FullMatch, PathCell, Step};
pub use partial::{partial_matches, Location, PartialMatchSet, ProbeStats};
pub use query::{
    compile_query, roi_atoms, ActionComponent, ActivityConstraint, ColorConstraint,
    CompiledComponent, Constraints, Direction, DisplacementConstraint, MotionConstraint,
    PersistenceConstraint, Query, Roi, SizeConstraint, DEFAULT_MOTION_COVERAGE, QUERY_VERSION,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsh::IndexSet;

/// DP step weights. `insertion` is added when a component is skipped inside
/// a document and `deletion` when a document passes without a hit, matching
/// the recurrence's use of `W_I` and `W_D`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpWeights {
    pub insertion: f64,
    pub deletion: f64,
    pub continuation: f64,
    #[serde(rename = "match")]
    pub r#match: f64,
    /// Extra score when a match continues the previous component's track.
    pub track_bonus: f64,
}

impl Default for DpWeights {
    fn default() -> Self {
        DpWeights {
            insertion: -1.0,
            deletion: -2.0,
            continuation: 1.0,
            r#match: 3.0,
            track_bonus: 5.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Greedy,
    Dp,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Greedy => "greedy",
            Algorithm::Dp => "dp",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Algorithm::Greedy),
            "dp" => Ok(Algorithm::Dp),
            other => Err(Error::Argument(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchParams {
    pub weights: DpWeights,
    /// DP retrieval threshold; twice the match weight when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Minimum greedy log-value `|R| − λΔ`.
    pub greedy_threshold: f64,
    pub lambda: f64,
    /// Longest greedy segment, in documents.
    pub horizon: u32,
    /// Cap on extracted DP paths.
    pub max_paths: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            weights: DpWeights::default(),
            threshold: None,
            greedy_threshold: 3.0,
            lambda: 0.5,
            horizon: 32,
            max_paths: 100,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.weights.r#match > 0.0) {
            return Err(Error::Config("search.weights.match must be > 0".into()));
        }
        if self.threshold.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Config("search.threshold must be > 0".into()));
        }
        if !(self.lambda >= 0.0) || self.horizon == 0 {
            return Err(Error::Config(
                "search.lambda must be >= 0 and search.horizon >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Settings for one query: query overrides win over these defaults.
    pub fn resolve(&self, query: &Query) -> SearchParams {
        let weights = query.weights.unwrap_or(self.weights);
        SearchParams {
            weights,
            threshold: Some(
                query
                    .threshold
                    .or(self.threshold)
                    .unwrap_or(2.0 * weights.r#match),
            ),
            greedy_threshold: query.greedy_threshold.unwrap_or(self.greedy_threshold),
            lambda: query.lambda.unwrap_or(self.lambda),
            horizon: query.horizon.unwrap_or(self.horizon),
            max_paths: self.max_paths,
        }
    }

    pub fn dp_threshold(&self) -> f64 {
        self.threshold.unwrap_or(2.0 * self.weights.r#match)
    }
}

pub const RESULT_VERSION: u32 = 1;

/// One ranked match as reported to clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub rank: usize,
    pub start_document: u32,
    pub end_document: u32,
    pub start_frame: u64,
    pub end_frame: u64,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortions: Option<Distortions>,
    /// Matching locations per component, in query order.
    pub components: Vec<Vec<Location>>,
    pub path: Vec<PathCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub version: u32,
    pub algorithm: Algorithm,
    pub frames_per_document: u32,
    pub documents: u32,
    pub matches: Vec<MatchRecord>,
}

impl ResultDocument {
    pub fn from_matches(
        algorithm: Algorithm,
        frames_per_document: u32,
        documents: u32,
        components: usize,
        found: &[FullMatch],
    ) -> ResultDocument {
        let a = frames_per_document as u64;
        let matches = found
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let mut per = vec![Vec::new(); components];
                for cell in &f.path {
                    per[cell.component].extend(cell.locations.iter().copied());
                }
                MatchRecord {
                    rank: i + 1,
                    start_document: f.start,
                    end_document: f.end,
                    start_frame: f.start as u64 * a,
                    end_frame: (f.end as u64 + 1) * a - 1,
                    score: f.score,
                    distortions: f.distortions,
                    components: per,
                    path: f.path.clone(),
                }
            })
            .collect();
        ResultDocument {
            version: RESULT_VERSION,
            algorithm,
            frames_per_document,
            documents,
            matches,
        }
    }
}

/// Everything one query run produces.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub result: ResultDocument,
    pub partial: PartialMatchSet,
    pub probes: ProbeStats,
}

/// Runs a parsed query against an archive.
pub fn run_query(
    query: &Query,
    index: &IndexSet,
    params: &SearchParams,
    algorithm: Algorithm,
) -> Result<SearchOutcome> {
    query.validate()?;
    let p = params.resolve(query);
    let compiled = compile_query(query, &index.geometry, index.feature_set)?;
    let (partial, probes) = partial_matches(&compiled, index)?;
    let found = match algorithm {
        Algorithm::Dp => dp_full_matches(&partial, &p.weights, p.dp_threshold(), p.max_paths),
        Algorithm::Greedy => greedy_full_matches(&partial, p.lambda, p.horizon, p.greedy_threshold),
    };
    let result = ResultDocument::from_matches(
        algorithm,
        index.geometry.frames_per_document,
        index.documents,
        query.components.len(),
        &found,
    );
    Ok(SearchOutcome {
        result,
        partial,
        probes,
    })
}
