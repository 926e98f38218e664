//! Frames and frame sources.
//!
//! Two on-disk sources are supported: a directory of numbered binary PPM
//! (`P6`) or PGM (`P5`) files, and a packed container with a 16-byte header
//! (`"SVFR"`, `u32` width, `u32` height, `u32` frame count, little-endian)
//! followed by raw row-major RGB frames.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const CONTAINER_MAGIC: &[u8; 4] = b"SVFR";
pub const CONTAINER_HEADER_LEN: u64 = 16;

/// Row-major 8-bit RGB frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: u32, height: u32) -> Self {
        Frame {
            width,
            height,
            pixels: vec![0; width as usize * height as usize * 3],
        }
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let mut f = Frame::new(width, height);
        for px in f.pixels.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        f
    }

    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(Error::dimension(expected, pixels.len()));
        }
        Ok(Frame {
            width,
            height,
            pixels,
        })
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn rgb(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_rgb(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// ITU-R 601 luma.
    pub fn to_gray(&self) -> GrayFrame {
        let data = self
            .pixels
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32)
            .collect();
        GrayFrame {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn same_size(&self, other: &Frame) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::dimension(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        Ok(())
    }
}

/// Single-channel frame in gray levels.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayFrame {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl GrayFrame {
    pub fn new(width: u32, height: u32) -> Self {
        GrayFrame {
            width,
            height,
            data: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> f32) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayFrame {
            width,
            height,
            data,
        }
    }

    pub fn at(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn same_size(&self, other: &GrayFrame) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::dimension(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        Ok(())
    }
}

/// A sequential stream of equally sized frames.
pub trait FrameSource {
    fn dimensions(&self) -> (u32, u32);
    /// Total frame count when known up front.
    fn len_hint(&self) -> Option<u64>;
    fn next_frame(&mut self) -> Result<Option<Frame>>;
}

/// Opens a container file or a directory of numbered PPM/PGM files.
pub fn open_source(path: &Path) -> Result<Box<dyn FrameSource + Send>> {
    if path.is_dir() {
        Ok(Box::new(PnmDirectory::open(path)?))
    } else {
        Ok(Box::new(ContainerReader::open(path)?))
    }
}

/// Reads frame `index` without streaming the whole source.
pub fn read_frame_at(path: &Path, index: u64) -> Result<Frame> {
    if path.is_dir() {
        let files = numbered_files(path)?;
        let file = files
            .get(index as usize)
            .ok_or_else(|| Error::Frames(format!("frame {index} out of range")))?;
        read_pnm(file)
    } else {
        let mut reader = ContainerReader::open(path)?;
        if index >= reader.frame_count as u64 {
            return Err(Error::Frames(format!("frame {index} out of range")));
        }
        let frame_len = reader.frame_len() as u64;
        reader
            .inner
            .seek(SeekFrom::Start(CONTAINER_HEADER_LEN + index * frame_len))?;
        reader.read_index = index as u32;
        reader
            .next_frame()?
            .ok_or_else(|| Error::Frames("truncated container".into()))
    }
}

pub struct ContainerReader {
    inner: BufReader<File>,
    width: u32,
    height: u32,
    frame_count: u32,
    read_index: u32,
}

impl ContainerReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path)
            .map_err(|e| Error::Frames(format!("cannot open {}: {e}", path.display())))?;
        let mut inner = BufReader::with_capacity(1 << 20, file);
        let mut header = [0u8; CONTAINER_HEADER_LEN as usize];
        inner
            .read_exact(&mut header)
            .map_err(|_| Error::Frames("container shorter than its header".into()))?;
        if &header[0..4] != CONTAINER_MAGIC {
            return Err(Error::Frames("bad container magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
        let (width, height, frame_count) = (word(4), word(8), word(12));
        if width == 0 || height == 0 {
            return Err(Error::Frames("container has zero-sized frames".into()));
        }
        Ok(ContainerReader {
            inner,
            width,
            height,
            frame_count,
            read_index: 0,
        })
    }

    pub fn frame_count(&self) -> u32 {
        self.frame_count
    }

    fn frame_len(&self) -> usize {
        self.width as usize * self.height as usize * 3
    }
}

impl FrameSource for ContainerReader {
    fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn len_hint(&self) -> Option<u64> {
        Some(self.frame_count as u64)
    }

    fn next_frame(&mut self) -> Result<Option<Frame>> {
        if self.read_index >= self.frame_count {
            return Ok(None);
        }
        let mut pixels = vec![0u8; self.frame_len()];
        self.inner.read_exact(&mut pixels).map_err(|_| {
            Error::Frames(format!("container truncated at frame {}", self.read_index))
        })?;
        self.read_index += 1;
        Ok(Some(Frame {
            width: self.width,
            height: self.height,
            pixels,
        }))
    }
}

/// Streams frames into a container; the frame count is patched on `finish`.
pub struct ContainerWriter {
    inner: BufWriter<File>,
    width: u32,
    height: u32,
    written: u32,
}

impl ContainerWriter {
    pub fn create(path: &Path, width: u32, height: u32) -> Result<Self> {
        let mut inner = BufWriter::with_capacity(1 << 20, File::create(path)?);
        inner.write_all(CONTAINER_MAGIC)?;
        inner.write_all(&width.to_le_bytes())?;
        inner.write_all(&height.to_le_bytes())?;
        inner.write_all(&0u32.to_le_bytes())?;
        Ok(ContainerWriter {
            inner,
            width,
            height,
            written: 0,
        })
    }

    pub fn push(&mut self, frame: &Frame) -> Result<()> {
        if frame.width != self.width || frame.height != self.height {
            return Err(Error::dimension(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", frame.width, frame.height),
            ));
        }
        self.inner.write_all(&frame.pixels)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<u32> {
        self.inner.flush()?;
        let mut file = self
            .inner
            .into_inner()
            .map_err(|e| Error::Io(e.into_error()))?;
        file.seek(SeekFrom::Start(12))?;
        file.write_all(&self.written.to_le_bytes())?;
        file.sync_all()?;
        Ok(self.written)
    }
}

pub struct PnmDirectory {
    files: Vec<PathBuf>,
    next: usize,
    width: u32,
    height: u32,
}

impl PnmDirectory {
    pub fn open(dir: &Path) -> Result<Self> {
        let files = numbered_files(dir)?;
        let first = files
            .first()
            .ok_or_else(|| Error::Frames(format!("no PPM/PGM frames in {}", dir.display())))?;
        let frame = read_pnm(first)?;
        Ok(PnmDirectory {
            width: frame.width,
            height: frame.height,
            files,
            next: 0,
        })
    }
}

impl FrameSource for PnmDirectory {
    fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn len_hint(&self) -> Option<u64> {
        Some(self.files.len() as u64)
    }

    fn next_frame(&mut self) -> Result<Option<Frame>> {
        let Some(path) = self.files.get(self.next) else {
            return Ok(None);
        };
        let frame = read_pnm(path)?;
        if frame.width != self.width || frame.height != self.height {
            return Err(Error::Frames(format!(
                "{} is {}x{}, expected {}x{}",
                path.display(),
                frame.width,
                frame.height,
                self.width,
                self.height
            )));
        }
        self.next += 1;
        Ok(Some(frame))
    }
}

/// `.ppm`/`.pgm` files sorted by the number embedded in their name.
fn numbered_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(u64, PathBuf)> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("ppm") | Some("pgm")
            )
        })
        .filter_map(|p| {
            let stem = p.file_stem()?.to_str()?;
            let digits: String = stem.chars().filter(|c| c.is_ascii_digit()).collect();
            Some((digits.parse().ok()?, p))
        })
        .collect();
    files.sort();
    Ok(files.into_iter().map(|(_, p)| p).collect())
}

pub fn read_pnm(path: &Path) -> Result<Frame> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Frames(format!("cannot read {}: {e}", path.display())))?;
    parse_pnm(&bytes).map_err(|e| Error::Frames(format!("{}: {e}", path.display())))
}

pub fn parse_pnm(bytes: &[u8]) -> std::result::Result<Frame, String> {
    let mut pos = 0;
    let mut token = || -> std::result::Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let channels = match magic.as_str() {
        "P6" => 3,
        "P5" => 1,
        other => return Err(format!("unsupported magic {other}")),
    };
    let num = |s: String| s.parse::<u32>().map_err(|_| format!("bad header field {s}"));
    let width = num(token()?)?;
    let height = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let start = pos + 1;
    let len = width as usize * height as usize * channels;
    let raster = bytes
        .get(start..start + len)
        .ok_or_else(|| "truncated raster".to_string())?;
    let scale = |v: u8| -> u8 { ((v as u32 * 255 + maxval / 2) / maxval).min(255) as u8 };
    let pixels = if channels == 3 {
        raster.iter().map(|&v| scale(v)).collect()
    } else {
        raster.iter().flat_map(|&v| [scale(v); 3]).collect()
    };
    Ok(Frame {
        width,
        height,
        pixels,
    })
}

pub fn write_ppm(path: &Path, frame: &Frame) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P6\n{} {}\n255\n", frame.width, frame.height)?;
    out.write_all(&frame.pixels)?;
    out.flush()?;
    Ok(())
}
