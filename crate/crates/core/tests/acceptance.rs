//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::io::Write;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vidsift_core::airborne::{detect_bodies, match_cost, size_filter, AirborneParams, Tracker};
use vidsift_core::bounds::{random_match_bound, to_f64, windowed_bound};
use vidsift_core::config::Config;
use vidsift_core::frame::FrameSource;
use vidsift_core::ingest::{ingest_path, ingest_stream, IngestOutput};
use vidsift_core::lsh::{collision_probability, StableHashFunction};
use vidsift_core::search::{
    dp_full_matches, run_query, Algorithm, DpMatrix, DpWeights, Distortions, MatchRecord,
    PartialMatchSet, SearchParams,
};
use vidsift_core::synth::{
    write_scene, AirborneScene, AirborneScenePlan, CctvCorpus, CctvCorpusPlan, Scene, SceneSource,
};

// Criteria run one at a time so their timings do not interfere.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Prints past the test harness's capture so the line always reaches the log.
fn verdict(name: &str, pass: bool, elapsed: Duration, detail: &str) {
    let line = format!(
        "{} {name} ({:.1?}): {detail}\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "{name}: {detail}");
}

fn ingest_scene(scene: Arc<dyn Scene>, config: &Config) -> IngestOutput {
    let mut open = || Ok(Box::new(SceneSource::new(scene.clone())) as Box<dyn FrameSource + Send>);
    ingest_stream(&mut open, config).unwrap()
}

fn cctv_config() -> Config {
    let mut c = Config::cctv();
    c.cctv.background_init_frames = 60;
    c
}

#[test]
fn worked_alignment_example() {
    let _g = serial();
    let query = ['A', 'C', 'A', 'T'];
    let docs = ['T', 'A', 'A', 'C', 'A', 'G', 'T'];
    let m: Vec<Vec<bool>> = docs
        .iter()
        .map(|d| query.iter().map(|q| q == d).collect())
        .collect();
    let set = PartialMatchSet::from_indicator(&m);
    let w = DpWeights {
        insertion: -1.0,
        deletion: -2.0,
        continuation: 1.0,
        r#match: 3.0,
        track_bonus: 0.0,
    };
    let mut elapsed = Duration::MAX;
    let mut best = None;
    for _ in 0..5 {
        let start = Instant::now();
        let v = DpMatrix::fill(&set, &w, None);
        let (value, t, a) = v.max().unwrap();
        let path = v.trace(t, a);
        elapsed = elapsed.min(start.elapsed());
        best = Some((value, path));
    }
    let (value, path) = best.unwrap();
    let path_docs: Vec<usize> = path.iter().map(|c| c.0).collect();
    let found = dp_full_matches(&set, &w, 0.0, 1);
    let d = found[0].distortions.unwrap();
    let want = Distortions {
        insertions: 1,
        deletions: 1,
        continuations: 1,
    };
    let value_ok = value == 11.0 && path_docs == [1, 2, 3, 4, 5, 6] && found[0].score == 11.0;
    let pass = value_ok && d == want && elapsed < Duration::from_millis(1);
    verdict(
        "worked alignment",
        pass,
        elapsed,
        &format!(
            "value {value} over documents {path_docs:?}; distortions I={} D={} C={} (want 1/1/1)",
            d.insertions, d.deletions, d.continuations
        ),
    );
}

#[test]
fn dp_matches_exhaustive_enumeration() {
    let _g = serial();
    let start = Instant::now();
    let w = DpWeights::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xd9);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let docs = rng.gen_range(1..=8);
        let comps = rng.gen_range(1..=5);
        let density = rng.gen_range(0.1..0.9);
        let m: Vec<Vec<bool>> = (0..docs)
            .map(|_| (0..comps).map(|_| rng.gen_bool(density)).collect())
            .collect();
        let got = DpMatrix::fill(&PartialMatchSet::from_indicator(&m), &w, None)
            .max()
            .map_or(0.0, |b| b.0);
        if got != vidsift_brute::alignment_value(
            &m,
            &vidsift_brute::AlignWeights {
                insertion: w.insertion,
                deletion: w.deletion,
                continuation: w.continuation,
                matched: w.r#match,
            },
        ) {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "dp oracle equivalence",
        mismatches == 0 && elapsed < Duration::from_secs(10),
        elapsed,
        &format!("{mismatches} mismatches over 1000 matrices up to 8x5"),
    );
}

#[test]
fn lsh_collision_statistics() {
    let _g = serial();
    let start = Instant::now();
    let (r, dims, functions) = (0.5, 14 * 9, 10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(0x15);
    let hashes: Vec<StableHashFunction> = (0..functions)
        .map(|_| StableHashFunction::random(dims, r, &mut rng))
        .collect();
    let x: Vec<f64> = (0..dims).map(|_| rng.gen::<f64>()).collect();
    let dir: Vec<f64> = (0..dims).map(|_| rng.gen::<f64>() - 0.5).collect();
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();

    let mut rates = Vec::new();
    let mut worst: f64 = 0.0;
    let mut formula_gap: f64 = 0.0;
    let mut detail = Vec::new();
    for c in [0.0, r / 2.0, r, 2.0 * r, 4.0 * r] {
        let y: Vec<f64> = x.iter().zip(&dir).map(|(x, d)| x + c * d / norm).collect();
        let hits = hashes
            .iter()
            .filter(|h| h.hash(&x).unwrap() == h.hash(&y).unwrap())
            .count();
        let rate = hits as f64 / functions as f64;
        let analytic = vidsift_brute::collision_probability(c, r);
        worst = worst.max((rate - analytic).abs());
        formula_gap = formula_gap.max((collision_probability(c, r) - analytic).abs());
        detail.push(format!("{c}:{rate:.4}/{analytic:.4}"));
        rates.push(rate);
    }
    let monotone = rates.windows(2).all(|w| w[1] <= w[0]);
    let elapsed = start.elapsed();
    verdict(
        "lsh collision statistics",
        worst <= 0.02 && formula_gap < 1e-6 && monotone && elapsed < Duration::from_secs(30),
        elapsed,
        &format!(
            "distance:empirical/analytic {}; max deviation {worst:.4}; monotone {monotone}",
            detail.join(" ")
        ),
    );
}

#[test]
fn chance_match_bounds() {
    let _g = serial();
    let start = Instant::now();
    let unordered = random_match_bound(10, 2, false).unwrap();
    let ordered = random_match_bound(10, 2, true).unwrap();
    let exact_ok = to_f64(&unordered) == 0.45
        && (vidsift_brute::binomial(10, 2) / 100.0 - 0.45).abs() < 1e-15
        && ordered.clone() * num_rational::BigRational::from_integer(2.into()) == unordered;

    let (d, n, window, trials) = (20u32, 3usize, 10usize, 100_000);
    let query: Vec<u32> = (0..n as u32).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xb0);
    let mut seq = vec![0u32; window];
    let mut hits = 0;
    for _ in 0..trials {
        for s in seq.iter_mut() {
            *s = rng.gen_range(0..d);
        }
        if vidsift_brute::is_subsequence(&query, &seq) {
            hits += 1;
        }
    }
    let freq = hits as f64 / trials as f64;
    let bound = windowed_bound(d as u64, n as u64, window as u64, true).unwrap();
    let elapsed = start.elapsed();
    verdict(
        "chance-match bounds",
        exact_ok && freq < 3.0 * bound && elapsed < Duration::from_secs(60),
        elapsed,
        &format!(
            "unordered {unordered} = {}, ordered {ordered}; Monte Carlo {freq:.5} vs 3 x {bound:.5}",
            to_f64(&unordered)
        ),
    );
}

/// Recall and false alarms of a ranked list against ground-truth intervals.
fn score_matches(matches: &[MatchRecord], truth: &[(u32, u32)]) -> (usize, usize) {
    let mut found = vec![false; truth.len()];
    let mut false_alarms = 0;
    for m in matches {
        let mut any = false;
        for (i, &(a, b)) in truth.iter().enumerate() {
            if a <= m.end_document && m.start_document <= b {
                found[i] = true;
                any = true;
            }
        }
        if !any {
            false_alarms += 1;
        }
    }
    (found.iter().filter(|&&f| f).count(), false_alarms)
}

/// Operating points `(false alarms, recall)` of every prefix of a ranked list.
/// Both assemblers emit the list for a lower threshold as an extension of the
/// list for a higher one, so prefixes are exactly the threshold sweep.
fn roc(matches: &[MatchRecord], truth: &[(u32, u32)]) -> Vec<(usize, usize)> {
    (0..=matches.len())
        .map(|k| {
            let (rec, fa) = score_matches(&matches[..k], truth);
            (fa, rec)
        })
        .collect()
}

#[test]
fn planted_event_recall() {
    let _g = serial();
    let start = Instant::now();
    let corpus = Arc::new(CctvCorpus::generate(CctvCorpusPlan::default()).unwrap());
    let out = ingest_scene(corpus.clone(), &cctv_config());
    let truth = corpus.route_documents();
    let query = corpus.route_query();
    let defaults = SearchParams::default();

    let dp = run_query(&query, &out.index, &defaults, Algorithm::Dp).unwrap().result;
    let greedy = run_query(&query, &out.index, &defaults, Algorithm::Greedy).unwrap().result;
    let (dp_rec, dp_fa) = score_matches(&dp.matches, &truth);
    let (gr_rec, gr_fa) = score_matches(&greedy.matches, &truth);

    let sweep = SearchParams {
        threshold: Some(1e-9),
        greedy_threshold: f64::NEG_INFINITY,
        ..SearchParams::default()
    };
    let dp_all = run_query(&query, &out.index, &sweep, Algorithm::Dp).unwrap().result;
    let gr_all = run_query(&query, &out.index, &sweep, Algorithm::Greedy).unwrap().result;
    let dp_roc = roc(&dp_all.matches, &truth);
    let gr_roc = roc(&gr_all.matches, &truth);
    let undominated: Vec<&(usize, usize)> = gr_roc
        .iter()
        .filter(|&&(fa, rec)| !dp_roc.iter().any(|&(f, r)| f <= fa && r >= rec))
        .collect();

    let elapsed = start.elapsed();
    let pass = dp_rec >= 9
        && dp_fa <= 1
        && gr_rec >= 8
        && gr_fa <= 3
        && undominated.is_empty()
        && elapsed < Duration::from_secs(300);
    verdict(
        "planted-event recall",
        pass,
        elapsed,
        &format!(
            "{} documents, {} entries; dp {dp_rec}/10 with {dp_fa} FA, greedy {gr_rec}/10 with {gr_fa} FA; \
             {} greedy ROC points, {} not dominated by dp",
            out.index.documents,
            out.stats.entries,
            gr_roc.len(),
            undominated.len()
        ),
    );
}

#[test]
fn airborne_pipeline() {
    let _g = serial();
    let start = Instant::now();
    let scene = Arc::new(AirborneScene::generate(AirborneScenePlan::default()).unwrap());
    let params = AirborneParams::default();
    let spacing = params.frame_spacing as u64;

    let (mut noise, mut removed, mut steps, mut disagreements) = (0usize, 0usize, 0usize, 0usize);
    let mut tracker = Tracker::new(params.clone());
    for n in 0..scene.plan.frames - spacing {
        let frame = n + spacing;
        let bodies = detect_bodies(&scene.render(n), &scene.render(frame), params.difference_threshold).unwrap();
        for b in &bodies {
            let on_mover = scene.near_mover(n, b.x, b.y, 6.0) || scene.near_mover(frame, b.x, b.y, 6.0);
            if !on_mover {
                noise += 1;
                if b.size > params.max_body_size {
                    removed += 1;
                }
            }
        }
        let kept = size_filter(bodies, params.max_body_size);
        let costs: Vec<Vec<f64>> = tracker
            .active()
            .iter()
            .map(|t| kept.iter().map(|m| match_cost(t, m, frame, &params.weights)).collect())
            .collect();
        let expected = vidsift_brute::greedy_assignment(&costs, params.gate);
        if tracker.step(frame, kept) != expected {
            disagreements += 1;
        }
        steps += 1;
    }
    let removal = removed as f64 / noise.max(1) as f64;

    let out = ingest_scene(scene.clone(), &Config::airborne());
    let result = run_query(&scene.route_query(), &out.index, &SearchParams::default(), Algorithm::Dp)
        .unwrap()
        .result;
    let (a, b) = scene.route_documents();
    let top = result.matches.first();
    let first = top.is_some_and(|m| a <= m.end_document && m.start_document <= b);
    let elapsed = start.elapsed();
    verdict(
        "airborne tracklet pipeline",
        noise > 0 && removal >= 0.95 && disagreements == 0 && first && elapsed < Duration::from_secs(180),
        elapsed,
        &format!(
            "size filter removed {removed}/{noise} noise bodies ({:.1}%); assignment agreed on {}/{steps} steps; \
             top match {:?} score {:?}, route documents {a}-{b}",
            100.0 * removal,
            steps - disagreements,
            top.map(|m| (m.start_document, m.end_document)),
            top.map(|m| m.score)
        ),
    );
}

fn planted_activity(corpus: &CctvCorpus) -> f64 {
    corpus
        .events
        .iter()
        .map(|e| (e.end_frame() - e.start_frame() + 1) as f64)
        .sum()
}

#[test]
fn scaling_properties() {
    let _g = serial();
    let start = Instant::now();
    let config = cctv_config();

    let mut ratios = Vec::new();
    let mut detail = Vec::new();
    for routes in [1, 2, 4] {
        let corpus = Arc::new(
            CctvCorpus::generate(CctvCorpusPlan {
                frames: 600,
                routes,
                clutter: 0,
                ..CctvCorpusPlan::default()
            })
            .unwrap(),
        );
        let out = ingest_scene(corpus.clone(), &config);
        let activity = planted_activity(&corpus);
        ratios.push(out.stats.entries as f64 / activity);
        detail.push(format!("{routes} routes: {} entries / {activity} event frames", out.stats.entries));
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let proportional = ratios.iter().all(|r| (r / mean - 1.0).abs() <= 0.20);

    let mut probes = Vec::new();
    for frames in [240, 960] {
        let corpus = Arc::new(
            CctvCorpus::generate(CctvCorpusPlan {
                frames,
                routes: 1,
                clutter: 0,
                ..CctvCorpusPlan::default()
            })
            .unwrap(),
        );
        let out = ingest_scene(corpus.clone(), &config);
        let o = run_query(&corpus.route_query(), &out.index, &SearchParams::default(), Algorithm::Dp).unwrap();
        probes.push((out.index.documents, o.probes.lookups, o.probes.buckets));
    }
    let tables = config.lsh.tables as usize;
    let constant_probes = probes.iter().all(|&(_, l, b)| b == tables * l) && probes[0].1 == probes[1].1;

    let dir = tempfile::tempdir().unwrap();
    let video = dir.path().join("quiet.svf");
    let quiet = CctvCorpus::generate(CctvCorpusPlan {
        frames: 400,
        routes: 1,
        clutter: 0,
        ..CctvCorpusPlan::default()
    })
    .unwrap();
    write_scene(&quiet, &video).unwrap();
    let raw = std::fs::metadata(&video).unwrap().len();
    let index_bytes = ingest_path(&video, &config).unwrap().index.to_bytes().len() as u64;
    let shrink = raw as f64 / index_bytes as f64;

    let elapsed = start.elapsed();
    verdict(
        "scaling properties",
        proportional && constant_probes && shrink >= 100.0,
        elapsed,
        &format!(
            "{}; entries per event frame {:?} (mean {mean:.3}); (documents, lookups, buckets) {probes:?} with n={tables}; \
             index {index_bytes} B vs container {raw} B ({shrink:.0}x)",
            detail.join(", "),
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn determinism() {
    let _g = serial();
    let start = Instant::now();
    let plan = CctvCorpusPlan {
        frames: 300,
        routes: 1,
        clutter: 3,
        ..CctvCorpusPlan::default()
    };
    let config = cctv_config();
    let a = ingest_scene(Arc::new(CctvCorpus::generate(plan.clone()).unwrap()), &config);
    let corpus = Arc::new(CctvCorpus::generate(plan).unwrap());
    let b = ingest_scene(corpus.clone(), &config);
    let same_index = a.index.to_bytes() == b.index.to_bytes();

    let q = corpus.route_query();
    let mut same_results = true;
    for alg in [Algorithm::Dp, Algorithm::Greedy] {
        let first = run_query(&q, &a.index, &SearchParams::default(), alg).unwrap().result;
        let second = run_query(&q, &a.index, &SearchParams::default(), alg).unwrap().result;
        same_results &= first == second
            && serde_json::to_string(&first).unwrap() == serde_json::to_string(&second).unwrap();
    }
    let elapsed = start.elapsed();
    verdict(
        "determinism",
        same_index && same_results,
        elapsed,
        &format!(
            "index bytes identical: {same_index} ({} B); repeated query results identical: {same_results}",
            a.index.to_bytes().len()
        ),
    );
}
