//! Turning a video into an archive: one streaming pass of feature extraction
//! into the index, then an atomic write of the index and its manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::airborne::{track_records, tracklet_features, AirbornePipeline, TrackPointRecord, Tracklet};
use crate::cctv::{median_u8, BackgroundModel, CctvExtractor};
use crate::config::{Config, FeatureSet};
use crate::error::{Error, Result};
use crate::frame::{open_source, read_frame_at, Frame, FrameSource};
use crate::geometry::GridGeometry;
use crate::lsh::IndexSet;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const INDEX_FILE: &str = "index.svix";
pub const TRACKS_FILE: &str = "tracklets.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveManifest {
    pub version: u32,
    pub video_id: String,
    /// Where frames are read back from for previews.
    pub source: PathBuf,
    pub geometry: GridGeometry,
    pub frames: u64,
    pub documents: u32,
    pub feature_set: FeatureSet,
    /// Index file name, relative to the archive directory.
    pub index_file: String,
    pub index_bytes: u64,
    pub entries: usize,
    pub seed: u64,
    pub created_unix: u64,
    pub config: Config,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestStats {
    pub frames: u64,
    pub documents: u32,
    /// Tree positions (CCTV) or displacement trees (airborne) indexed.
    pub indexed_trees: usize,
    pub entries: usize,
    /// Largest number of frames, in whole-frame equivalents, held at once.
    pub peak_buffered_frames: f64,
    pub tracklets: usize,
    pub bodies: usize,
    pub kept_bodies: usize,
}

pub struct IngestOutput {
    pub index: IndexSet,
    pub stats: IngestStats,
    /// Empty for CCTV archives.
    pub tracklets: Vec<Tracklet>,
}

type Opener<'a> = dyn FnMut() -> Result<Box<dyn FrameSource + Send>> + 'a;

/// Per-pixel median of the first `n` frames, computed in horizontal bands
/// so that no more than about `budget` frames of pixels are held at once.
/// Returns the model and the peak residency in frame equivalents.
pub fn banded_median_background(
    open: &mut Opener<'_>,
    n: usize,
    budget: usize,
    learning_rate: f32,
    threshold: f32,
) -> Result<(BackgroundModel, f64)> {
    if n == 0 {
        return Err(Error::Argument("background needs at least one frame".into()));
    }
    let (w, h) = open()?.dimensions();
    let row_bytes = w as usize * 3;
    let band_rows = ((h as usize * budget.max(1)) / n).clamp(1, h as usize);
    let mut estimate = vec![0f32; row_bytes * h as usize];
    let mut peak = 0.0f64;
    let mut y0 = 0usize;
    while y0 < h as usize {
        let rows = band_rows.min(h as usize - y0);
        let span = y0 * row_bytes..(y0 + rows) * row_bytes;
        let mut band: Vec<u8> = Vec::with_capacity(n * span.len());
        let mut src = open()?;
        let mut taken = 0usize;
        while taken < n {
            let Some(frame) = src.next_frame()? else { break };
            if (frame.width, frame.height) != (w, h) {
                return Err(Error::dimension(
                    format!("{w}x{h}"),
                    format!("{}x{}", frame.width, frame.height),
                ));
            }
            band.extend_from_slice(&frame.pixels[span.clone()]);
            taken += 1;
        }
        if taken == 0 {
            return Err(Error::Empty("video frames"));
        }
        peak = peak.max(band.len() as f64 / (row_bytes * h as usize) as f64);
        let mut column = vec![0u8; taken];
        for (j, out) in estimate[span.clone()].iter_mut().enumerate() {
            for (k, slot) in column.iter_mut().enumerate() {
                *slot = band[k * span.len() + j];
            }
            *out = median_u8(&mut column);
        }
        y0 += rows;
    }
    let model = BackgroundModel::from_estimate(w, h, estimate, learning_rate, threshold)?;
    Ok((model, peak))
}

/// Extracts features from a re-openable frame stream and builds the index.
/// CCTV footage is opened once per background band and once for the main
/// pass; airborne footage is read once.
pub fn ingest_stream(open: &mut Opener<'_>, config: &Config) -> Result<IngestOutput> {
    config.validate()?;
    let (w, h) = open()?.dimensions();
    let geometry = config.tiling.for_frames(w, h)?;
    let mut index = IndexSet::new(geometry, config.feature_set, &config.lsh)?;
    let mut stats = IngestStats::default();
    let mut tracklets = Vec::new();
    match config.feature_set {
        FeatureSet::Cctv => {
            let p = &config.cctv;
            let a = geometry.frames_per_document as usize;
            let (background, peak) = banded_median_background(
                open,
                p.background_init_frames.max(1),
                a,
                p.learning_rate,
                p.activity_threshold,
            )?;
            // The extractor keeps one previous gray frame beside the current one.
            stats.peak_buffered_frames = peak.max(2.0);
            let mut extractor = CctvExtractor::new(geometry, p.clone(), background);
            let mut src = open()?;
            while let Some(frame) = src.next_frame()? {
                if let Some((doc, features)) = extractor.push(&frame)? {
                    stats.indexed_trees += index.insert_cctv_document(
                        doc,
                        &features,
                        config.lsh.activity_threshold,
                    )?;
                }
                stats.frames += 1;
            }
        }
        FeatureSet::Airborne => {
            let mut pipeline = AirbornePipeline::new(config.airborne.clone());
            let mut src = open()?;
            while let Some(frame) = src.next_frame()? {
                pipeline.push(frame)?;
                stats.frames += 1;
            }
            stats.peak_buffered_frames = config.airborne.frame_spacing as f64 + 1.0;
            stats.bodies = pipeline.stats.bodies;
            stats.kept_bodies = pipeline.stats.kept;
            tracklets = pipeline.finish();
            for doc in 0..geometry.documents_in(stats.frames) {
                let trees = tracklet_features(&tracklets, &geometry, doc)?;
                stats.indexed_trees += trees.len();
                index.insert_trees(&trees)?;
            }
            stats.tracklets = tracklets.len();
        }
    }
    if stats.frames == 0 {
        return Err(Error::Empty("video frames"));
    }
    stats.documents = geometry.documents_in(stats.frames);
    index.mark_documents(stats.documents);
    stats.entries = index.entry_count();
    Ok(IngestOutput {
        index,
        stats,
        tracklets,
    })
}

/// Ingests a container file or PNM directory.
pub fn ingest_path(source: &Path, config: &Config) -> Result<IngestOutput> {
    let mut open = || open_source(source);
    ingest_stream(&mut open, config)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Argument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io(e)
    })
}

/// Writes the index, the tracklets (airborne only) and finally the manifest.
pub fn write_archive(
    dir: &Path,
    video_id: &str,
    source: &Path,
    output: &IngestOutput,
    config: &Config,
) -> Result<ArchiveManifest> {
    if video_id.is_empty() || video_id.contains(['/', '\\']) || video_id.starts_with('.') {
        return Err(Error::Argument(format!("invalid video id {video_id:?}")));
    }
    fs::create_dir_all(dir)?;
    let bytes = output.index.to_bytes();
    write_atomic(&dir.join(INDEX_FILE), &bytes)?;
    if config.feature_set == FeatureSet::Airborne {
        let records = track_records(&output.tracklets);
        write_atomic(&dir.join(TRACKS_FILE), &serde_json::to_vec(&records)?)?;
    }
    let manifest = ArchiveManifest {
        version: MANIFEST_VERSION,
        video_id: video_id.to_string(),
        source: fs::canonicalize(source).unwrap_or_else(|_| source.to_path_buf()),
        geometry: output.index.geometry,
        frames: output.stats.frames,
        documents: output.index.documents,
        feature_set: output.index.feature_set,
        index_file: INDEX_FILE.into(),
        index_bytes: bytes.len() as u64,
        entries: output.stats.entries,
        seed: output.index.seed,
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config: config.clone(),
    };
    write_atomic(
        &dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    Ok(manifest)
}

/// An archive directory loaded for search.
#[derive(Clone, Debug)]
pub struct Archive {
    pub dir: PathBuf,
    pub manifest: ArchiveManifest,
    pub index: IndexSet,
}

impl Archive {
    pub fn open(dir: &Path) -> Result<Archive> {
        let manifest: ArchiveManifest =
            serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Format(format!(
                "manifest version {} is not supported",
                manifest.version
            )));
        }
        let index = IndexSet::from_bytes(&fs::read(dir.join(&manifest.index_file))?)?;
        if index.geometry != manifest.geometry
            || index.seed != manifest.seed
            || index.feature_set != manifest.feature_set
        {
            return Err(Error::IndexMismatch(format!(
                "index in {} does not match its manifest",
                dir.display()
            )));
        }
        Ok(Archive {
            dir: dir.to_path_buf(),
            manifest,
            index,
        })
    }

    pub fn frame(&self, index: u64) -> Result<Frame> {
        if index >= self.manifest.frames {
            return Err(Error::Frames(format!("frame {index} out of range")));
        }
        read_frame_at(&self.manifest.source, index)
    }

    /// Tracklet points stored with an airborne archive.
    pub fn track_records(&self) -> Result<Vec<TrackPointRecord>> {
        if self.manifest.feature_set != FeatureSet::Airborne {
            return Err(Error::Argument("only airborne archives keep tracklets".into()));
        }
        Ok(serde_json::from_slice(&fs::read(self.dir.join(TRACKS_FILE))?)?)
    }
}
