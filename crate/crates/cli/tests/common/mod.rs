#![allow(dead_code)]

use std::path::Path;

use vidsift_core::config::{Config, FeatureSet, Tiling};
use vidsift_core::feature::{FeatureKind, FeatureVector};
use vidsift_core::frame::{ContainerWriter, Frame};
use vidsift_core::geometry::AtomCoord;
use vidsift_core::ingest::{write_atomic, ArchiveManifest, INDEX_FILE, MANIFEST_FILE, MANIFEST_VERSION, TRACKS_FILE};
use vidsift_core::lsh::IndexSet;
use vidsift_core::FeatureTree;

pub const DOCS: &str = "TAACAGT";
pub const QUERY: &str = "ACAT";
pub const SPEED: f64 = 40.0;

pub fn symbol(c: char) -> (f64, f64) {
    match c {
        'A' => (SPEED, 0.0),
        'C' => (0.0, SPEED),
        'G' => (-SPEED, 0.0),
        'T' => (0.0, -SPEED),
        _ => unreachable!(),
    }
}

pub fn toy_config() -> Config {
    let mut c = Config::airborne();
    c.feature_set = FeatureSet::Airborne;
    c.tiling = Tiling {
        tile_size: 16,
        frames_per_document: 2,
        tree_depth: 1,
    };
    c.lsh.bucket_width.insert(FeatureKind::Displacement, 0.01);
    c
}

/// A 32x32 airborne archive of seven documents, one displacement symbol each
/// at the top-left tile, every document on its own track.
pub fn toy_archive(dir: &Path, id: &str) {
    toy_archive_with(dir, id, DOCS);
}

pub fn toy_archive_with(dir: &Path, id: &str, docs: &str) {
    std::fs::create_dir_all(dir).unwrap();
    let config = toy_config();
    let geometry = config.tiling.for_frames(32, 32).unwrap();
    let mut index = IndexSet::new(geometry, FeatureSet::Airborne, &config.lsh).unwrap();
    let trees: Vec<FeatureTree> = docs
        .chars()
        .enumerate()
        .map(|(t, c)| {
            let (dx, dy) = symbol(c);
            FeatureTree::leaf(FeatureVector::Displacement { dx, dy }, AtomCoord::new(0, 0, t as u32))
                .with_track(100 + t as u32)
        })
        .collect();
    index.insert_trees(&trees).unwrap();
    index.mark_documents(docs.len() as u32);

    let video = dir.join("toy.svf");
    let mut w = ContainerWriter::create(&video, 32, 32).unwrap();
    for i in 0..docs.len() * 2 {
        w.push(&Frame::filled(32, 32, [i as u8 * 10, 40, 90])).unwrap();
    }
    w.finish().unwrap();

    let bytes = index.to_bytes();
    write_atomic(&dir.join(INDEX_FILE), &bytes).unwrap();
    write_atomic(&dir.join(TRACKS_FILE), b"[]").unwrap();
    let manifest = ArchiveManifest {
        version: MANIFEST_VERSION,
        video_id: id.into(),
        source: video,
        geometry,
        frames: docs.len() as u64 * 2,
        documents: docs.len() as u32,
        feature_set: FeatureSet::Airborne,
        index_file: INDEX_FILE.into(),
        index_bytes: bytes.len() as u64,
        entries: index.entry_count(),
        seed: index.seed,
        created_unix: 0,
        config,
    };
    write_atomic(&dir.join(MANIFEST_FILE), serde_json::to_string(&manifest).unwrap().as_bytes()).unwrap();
}

pub fn toy_query() -> String {
    let comps: Vec<String> = QUERY
        .chars()
        .map(|c| {
            let (dx, dy) = symbol(c);
            format!(
                r#"{{"roi": {{"x": 0, "y": 0, "w": 16, "h": 16}}, "constraints": {{"displacement": {{"dx": {dx}, "dy": {dy}}}}}, "label": "{c}"}}"#
            )
        })
        .collect();
    format!(r#"{{"version": 1, "components": [{}]}}"#, comps.join(", "))
}
