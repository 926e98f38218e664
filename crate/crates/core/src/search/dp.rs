//! Local alignment of the query's components against the document sequence.

use super::matches::{Distortions, FullMatch, PathCell, Step};
use super::partial::PartialMatchSet;
use super::DpWeights;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Choice {
    Zero,
    Step(Step),
}

/// The value matrix `V` (documents × components) with back-pointers.
#[derive(Clone, Debug)]
pub struct DpMatrix {
    pub documents: usize,
    pub components: usize,
    values: Vec<f64>,
    choices: Vec<Choice>,
}

impl DpMatrix {
    /// Fills `V` row by row. `blocked` cells (already part of an extracted
    /// path) are pinned to zero. Ties go to the earlier option in the order
    /// zero, match, continuation, insertion, deletion.
    pub fn fill(m: &PartialMatchSet, w: &DpWeights, blocked: Option<&[bool]>) -> DpMatrix {
        let (docs, comps) = (m.documents as usize, m.components());
        let mut values = vec![0.0; docs * comps];
        let mut choices = vec![Choice::Zero; docs * comps];
        let at = |vals: &[f64], t: isize, a: isize| {
            if t < 0 || a < 0 {
                0.0
            } else {
                vals[t as usize * comps + a as usize]
            }
        };
        for t in 0..docs {
            for a in 0..comps {
                let i = t * comps + a;
                if blocked.is_some_and(|b| b[i]) {
                    continue;
                }
                let hit = m.hit(t as u32, a);
                let (ti, ai) = (t as isize, a as isize);
                let options = if hit {
                    [
                        (Step::Match, at(&values, ti - 1, ai - 1) + w.r#match),
                        (Step::Continuation, at(&values, ti - 1, ai) + w.continuation),
                    ]
                } else {
                    [
                        (Step::Insertion, at(&values, ti - 1, ai) + w.deletion),
                        (Step::Deletion, at(&values, ti, ai - 1) + w.insertion),
                    ]
                };
                let (mut best, mut choice) = (0.0, Choice::Zero);
                for (step, v) in options {
                    if v > best {
                        best = v;
                        choice = Choice::Step(step);
                    }
                }
                if hit && t > 0 && a > 0 {
                    let here = m.dominant_track(t as u32, a);
                    if here.is_some() && here == m.dominant_track(t as u32 - 1, a - 1) {
                        best += w.track_bonus;
                    }
                }
                values[i] = best;
                choices[i] = choice;
            }
        }
        DpMatrix {
            documents: docs,
            components: comps,
            values,
            choices,
        }
    }

    pub fn value(&self, document: usize, component: usize) -> f64 {
        self.values[document * self.components + component]
    }

    /// Largest value and its cell; ties go to the earliest document, then component.
    pub fn max(&self) -> Option<(f64, usize, usize)> {
        let mut best: Option<(f64, usize, usize)> = None;
        for t in 0..self.documents {
            for a in 0..self.components {
                let v = self.value(t, a);
                if best.is_none_or(|(b, _, _)| v > b) {
                    best = Some((v, t, a));
                }
            }
        }
        best
    }

    /// Cells of the path ending at `(t, a)` in time order, each with the step
    /// that reached it. Only cells with a positive value belong to a path.
    pub fn trace(&self, mut t: usize, mut a: usize) -> Vec<(usize, usize, Step)> {
        let mut out = Vec::new();
        loop {
            if self.value(t, a) <= 0.0 {
                break;
            }
            let Choice::Step(step) = self.choices[t * self.components + a] else {
                break;
            };
            out.push((t, a, step));
            let prev = match step {
                Step::Match => (t.checked_sub(1), a.checked_sub(1)),
                Step::Continuation | Step::Insertion => (t.checked_sub(1), Some(a)),
                Step::Deletion => (Some(t), a.checked_sub(1)),
            };
            match prev {
                (Some(pt), Some(pa)) => {
                    t = pt;
                    a = pa;
                }
                _ => break,
            }
        }
        out.reverse();
        out
    }
}

/// Extracts paths in descending score while the best remaining value
/// exceeds `threshold`. After each extraction its cells are blocked and `V`
/// is recomputed, so paths never share a cell and scores never increase.
pub fn dp_full_matches(
    m: &PartialMatchSet,
    weights: &DpWeights,
    threshold: f64,
    max_paths: usize,
) -> Vec<FullMatch> {
    let comps = m.components();
    let mut blocked = vec![false; m.documents as usize * comps];
    let mut out = Vec::new();
    while out.len() < max_paths {
        let v = DpMatrix::fill(m, weights, Some(&blocked));
        let Some((best, t, a)) = v.max() else {
            break;
        };
        if best <= threshold {
            break;
        }
        let cells = v.trace(t, a);
        for &(ct, ca, _) in &cells {
            blocked[ct * comps + ca] = true;
        }
        let path: Vec<PathCell> = cells
            .iter()
            .map(|&(ct, ca, step)| PathCell {
                document: ct as u32,
                component: ca,
                step: Some(step),
                locations: m.locations(ct as u32, ca).to_vec(),
            })
            .collect();
        // The first cell opens the path; only later steps are distortions.
        let distortions = Distortions::of(cells.iter().skip(1).map(|c| c.2));
        out.push(FullMatch {
            start: cells.first().map_or(t, |c| c.0) as u32,
            end: t as u32,
            score: best,
            path,
            distortions: Some(distortions),
        });
    }
    out
}
