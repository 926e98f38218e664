//! Archive configuration, loadable from TOML.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::airborne::AirborneParams;
use crate::cctv::CctvParams;
use crate::error::{Error, Result};
use crate::feature::FeatureKind;
use crate::geometry::{plan_grid, GridGeometry};
use crate::lsh::LshParams;
use crate::search::SearchParams;

/// Which pipeline produces the features of an archive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Cctv,
    Airborne,
}

impl FeatureSet {
    pub fn features(self) -> &'static [FeatureKind] {
        match self {
            FeatureSet::Cctv => &FeatureKind::CCTV,
            FeatureSet::Airborne => &[FeatureKind::Displacement],
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            FeatureSet::Cctv => 0,
            FeatureSet::Airborne => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<FeatureSet> {
        match tag {
            0 => Some(FeatureSet::Cctv),
            1 => Some(FeatureSet::Airborne),
            _ => None,
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSet::Cctv => "cctv",
            FeatureSet::Airborne => "airborne",
        })
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cctv" => Ok(FeatureSet::Cctv),
            "airborne" => Ok(FeatureSet::Airborne),
            other => Err(Error::Config(format!("unknown feature set {other:?}"))),
        }
    }
}

/// Tiling without the frame size, which comes from the video itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tiling {
    pub tile_size: u32,
    pub frames_per_document: u32,
    pub tree_depth: u32,
}

impl Tiling {
    pub fn for_frames(&self, width: u32, height: u32) -> Result<GridGeometry> {
        plan_grid(
            width,
            height,
            self.tile_size,
            self.frames_per_document,
            self.tree_depth,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub feature_set: FeatureSet,
    pub tiling: Tiling,
    #[serde(default)]
    pub cctv: CctvParams,
    #[serde(default)]
    pub airborne: AirborneParams,
    #[serde(default)]
    pub lsh: LshParams,
    #[serde(default)]
    pub search: SearchParams,
}

impl Default for Config {
    fn default() -> Self {
        Config::cctv()
    }
}

impl Config {
    /// Fixed-camera defaults: 16 px tiles, 30-frame documents, depth-3 trees.
    pub fn cctv() -> Self {
        Config {
            feature_set: FeatureSet::Cctv,
            tiling: Tiling {
                tile_size: 16,
                frames_per_document: 30,
                tree_depth: 3,
            },
            cctv: CctvParams::default(),
            airborne: AirborneParams::default(),
            lsh: LshParams::default(),
            search: SearchParams::default(),
        }
    }

    /// Aerial defaults: 16 px tiles, 15-frame documents, single-node trees.
    pub fn airborne() -> Self {
        Config {
            feature_set: FeatureSet::Airborne,
            tiling: Tiling {
                tile_size: 16,
                frames_per_document: 15,
                tree_depth: 1,
            },
            ..Config::cctv()
        }
    }

    pub fn preset(set: FeatureSet) -> Self {
        match set {
            FeatureSet::Cctv => Config::cctv(),
            FeatureSet::Airborne => Config::airborne(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Config::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tiling;
        if t.tile_size == 0 || t.frames_per_document == 0 || t.tree_depth == 0 {
            return Err(Error::Config("tiling values must be >= 1".into()));
        }
        if self.feature_set == FeatureSet::Airborne && t.tree_depth != 1 {
            return Err(Error::Config("airborne archives use depth-1 trees".into()));
        }
        if self.lsh.tables == 0 {
            return Err(Error::Config("lsh.tables must be >= 1".into()));
        }
        for (kind, r) in &self.lsh.bucket_width {
            if !(*r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("lsh bucket width for {kind} must be > 0")));
            }
        }
        self.search.validate()?;
        self.airborne.validate()?;
        Ok(())
    }
}
