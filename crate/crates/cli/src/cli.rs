use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use vidsift_core::bounds::{random_match_bound, to_f64, windowed_bound};
use vidsift_core::config::{Config, FeatureSet};
use vidsift_core::ingest::{ingest_path, write_archive, write_atomic, Archive};
use vidsift_core::search::{run_query, Algorithm, Query, ResultDocument, Roi};
use vidsift_core::synth::{
    write_scene, AirborneScene, AirborneScenePlan, CctvCorpus, CctvCorpusPlan, Flicker, PlantedEvent,
};
use vidsift_core::{Error, Result};

pub const EXIT_MATCH: i32 = 0;
pub const EXIT_NO_MATCH: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "vidsift", version, about = "Index long surveillance videos and search them for activity patterns")]
pub struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build an archive (manifest + index) from a video container or PNM directory.
    Ingest(IngestArgs),
    /// Run a query file against an archive.
    Search(SearchArgs),
    /// Serve archives over HTTP.
    Serve(ServeArgs),
    /// Chance-match probability for a query of N components.
    Analyze(AnalyzeArgs),
    /// Export the tracklets of an airborne archive.
    DumpTracklets(DumpArgs),
    /// Render a synthetic video with ground truth.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    pub source: PathBuf,
    /// Archive directory to create.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML configuration; defaults to the preset of --feature-set.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub feature_set: Option<SetArg>,
    /// Video id; defaults to the source file stem.
    #[arg(long)]
    pub id: Option<String>,
    /// Overrides the hash seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SetArg {
    Cctv,
    Airborne,
}

impl From<SetArg> for FeatureSet {
    fn from(s: SetArg) -> Self {
        match s {
            SetArg::Cctv => FeatureSet::Cctv,
            SetArg::Airborne => FeatureSet::Airborne,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AlgorithmArg {
    Dp,
    Greedy,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Dp => Algorithm::Dp,
            AlgorithmArg::Greedy => Algorithm::Greedy,
        }
    }
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    pub archive: PathBuf,
    pub query: PathBuf,
    #[arg(long, value_enum, default_value = "dp")]
    pub algorithm: AlgorithmArg,
    /// Write the result JSON here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Print a ranked table instead of JSON.
    #[arg(long)]
    pub summary: bool,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Archive directory; repeat to serve several.
    #[arg(long = "archive", required = true)]
    pub archives: Vec<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Dictionary size |D|.
    #[arg(long)]
    pub dictionary: u64,
    /// Query components N.
    #[arg(long)]
    pub components: u64,
    /// Also report the approximation for a window of this many documents.
    #[arg(long)]
    pub window: Option<u64>,
    #[arg(long)]
    pub ordered: bool,
}

#[derive(Args, Debug)]
pub struct DumpArgs {
    pub archive: PathBuf,
    /// CSV file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum SynthCommand {
    /// Fixed-camera corpus with planted route events and clutter.
    Cctv(SynthCctvArgs),
    /// Aerial scene with small movers and flicker noise.
    Airborne(SynthAirborneArgs),
}

#[derive(Args, Debug)]
pub struct SynthOut {
    /// Container file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth JSON.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Query JSON for the planted route.
    #[arg(long)]
    pub query: Option<PathBuf>,
    #[arg(long)]
    pub frames: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SynthCctvArgs {
    #[command(flatten)]
    pub common: SynthOut,
    #[arg(long)]
    pub routes: Option<usize>,
    #[arg(long)]
    pub clutter: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SynthAirborneArgs {
    #[command(flatten)]
    pub common: SynthOut,
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Ingest(a) => ingest(a).map(|_| EXIT_MATCH),
        Command::Search(a) => search(a),
        Command::Serve(a) => serve(a).map(|_| EXIT_MATCH),
        Command::Analyze(a) => analyze(a).map(|_| EXIT_MATCH),
        Command::DumpTracklets(a) => dump_tracklets(a).map(|_| EXIT_MATCH),
        Command::Synth(s) => synth(s).map(|_| EXIT_MATCH),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn ingest(a: IngestArgs) -> Result<()> {
    let mut config = match (&a.config, a.feature_set) {
        (Some(path), set) => {
            let c = Config::load(path)?;
            if let Some(set) = set {
                if c.feature_set != FeatureSet::from(set) {
                    return Err(Error::Argument(format!(
                        "--feature-set disagrees with {}",
                        path.display()
                    )));
                }
            }
            c
        }
        (None, set) => Config::preset(set.map_or(FeatureSet::Cctv, FeatureSet::from)),
    };
    if let Some(seed) = a.seed {
        config.lsh.seed = seed;
    }
    config.validate()?;
    let id = match a.id {
        Some(id) => id,
        None => a
            .source
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| Error::Argument("cannot derive a video id; pass --id".into()))?,
    };
    let output = ingest_path(&a.source, &config)?;
    let manifest = write_archive(&a.out, &id, &a.source, &output, &config)?;
    println!(
        "{}: {} frames, {} documents, {} entries, {} index bytes -> {}",
        manifest.video_id,
        manifest.frames,
        manifest.documents,
        manifest.entries,
        manifest.index_bytes,
        a.out.display()
    );
    Ok(())
}

fn search(a: SearchArgs) -> Result<i32> {
    let text = fs::read_to_string(&a.query)?;
    let query = Query::from_json(&text)?;
    let archive = Archive::open(&a.archive)?;
    let outcome = run_query(
        &query,
        &archive.index,
        &archive.manifest.config.search,
        a.algorithm.into(),
    )?;
    let result = outcome.result;
    let rendered = if a.summary {
        summary_table(&result)
    } else {
        serde_json::to_string_pretty(&result)? + "\n"
    };
    match &a.output {
        Some(path) => write_atomic(path, rendered.as_bytes())?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(rendered.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(if result.matches.is_empty() {
        EXIT_NO_MATCH
    } else {
        EXIT_MATCH
    })
}

fn summary_table(r: &ResultDocument) -> String {
    let mut s = format!(
        "{} match(es), {} over {} documents of {} frames\n",
        r.matches.len(),
        r.algorithm,
        r.documents,
        r.frames_per_document
    );
    s.push_str("rank  score    documents    frames\n");
    for m in &r.matches {
        s.push_str(&format!(
            "{:>4}  {:>7.2}  {:>5}-{:<5}  {}-{}\n",
            m.rank, m.score, m.start_document, m.end_document, m.start_frame, m.end_frame
        ));
    }
    s
}

fn serve(a: ServeArgs) -> Result<()> {
    let archives = crate::server::load_archives(&a.archives)?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(crate::server::serve(archives, a.bind))?;
    Ok(())
}

#[derive(Serialize)]
struct Analysis {
    dictionary: u64,
    components: u64,
    ordered: bool,
    exact: String,
    probability: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    windowed_probability: Option<f64>,
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let exact = random_match_bound(a.dictionary, a.components, a.ordered)?;
    let windowed = a
        .window
        .map(|w| windowed_bound(a.dictionary, a.components, w, a.ordered))
        .transpose()?;
    let report = Analysis {
        dictionary: a.dictionary,
        components: a.components,
        ordered: a.ordered,
        exact: exact.to_string(),
        probability: to_f64(&exact),
        window: a.window,
        windowed_probability: windowed,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn dump_tracklets(a: DumpArgs) -> Result<()> {
    let archive = Archive::open(&a.archive)?;
    let records = archive.track_records()?;
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in &records {
            w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush()?;
    }
    match &a.output {
        Some(path) => write_atomic(path, &buf)?,
        None => io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct CctvTruth<'a> {
    frames_per_document: u32,
    rois: &'a [Roi; 3],
    events: &'a [PlantedEvent],
    route_documents: Vec<(u32, u32)>,
}

#[derive(Serialize)]
struct AirborneTruth<'a> {
    frames_per_document: u32,
    rois: &'a [Roi; 2],
    movers: &'a [PlantedEvent],
    flickers: &'a [Flicker],
    route_documents: (u32, u32),
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_atomic(path, serde_json::to_string_pretty(value)?.as_bytes())
}

fn synth(cmd: SynthCommand) -> Result<()> {
    match cmd {
        SynthCommand::Cctv(a) => {
            let mut plan = CctvCorpusPlan::default();
            let c = &a.common;
            if let Some(f) = c.frames {
                plan.frames = f;
            }
            if let Some(s) = c.seed {
                plan.seed = s;
            }
            if let Some(r) = a.routes {
                plan.routes = r;
            }
            if let Some(n) = a.clutter {
                plan.clutter = n;
            }
            let corpus = CctvCorpus::generate(plan)?;
            let frames = write_scene(&corpus, &c.out)?;
            if let Some(path) = &c.truth {
                write_json(
                    path,
                    &CctvTruth {
                        frames_per_document: corpus.plan.frames_per_document,
                        rois: &corpus.rois,
                        events: &corpus.events,
                        route_documents: corpus.route_documents(),
                    },
                )?;
            }
            if let Some(path) = &c.query {
                write_atomic(path, corpus.route_query().to_json().as_bytes())?;
            }
            println!("wrote {frames} frames to {}", c.out.display());
        }
        SynthCommand::Airborne(a) => {
            let mut plan = AirborneScenePlan::default();
            let c = &a.common;
            if let Some(f) = c.frames {
                plan.frames = f;
            }
            if let Some(s) = c.seed {
                plan.seed = s;
            }
            let scene = AirborneScene::generate(plan)?;
            let frames = write_scene(&scene, &c.out)?;
            if let Some(path) = &c.truth {
                write_json(
                    path,
                    &AirborneTruth {
                        frames_per_document: scene.plan.frames_per_document,
                        rois: &scene.rois,
                        movers: &scene.movers,
                        flickers: &scene.flickers,
                        route_documents: scene.route_documents(),
                    },
                )?;
            }
            if let Some(path) = &c.query {
                write_atomic(path, scene.route_query().to_json().as_bytes())?;
            }
            println!("wrote {frames} frames to {}", c.out.display());
        }
    }
    Ok(())
}
