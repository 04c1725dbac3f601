//! Spatio-temporal frame aggregation.
//!
//! Each keyframe becomes one composite: the `k = rows·cols − 1` frames leading
//! up to it are tiled row-major in temporal order, the keyframe takes the
//! last (bottom-right) cell, and the mosaic is resized nearest-neighbour to the
//! encoder resolution.

use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{create_dir_all, write_atomic};

/// Default number of keyframes per episode.
pub const DEFAULT_KEYFRAMES: usize = 8;
/// Default encoder input resolution (square).
pub const DEFAULT_OUTPUT_SIZE: (u32, u32) = (448, 448);

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<RgbImage>,
    pub fps: Option<f64>,
}

impl FrameSequence {
    pub fn new(frames: Vec<RgbImage>, fps: Option<f64>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidArgument("frame sequence is empty".into()))?;
        let dims = first.dimensions();
        if dims.0 == 0 || dims.1 == 0 {
            return Err(Error::InvalidArgument("frames must have nonzero size".into()));
        }
        if let Some(i) = frames.iter().position(|f| f.dimensions() != dims) {
            return Err(Error::InvalidArgument(format!(
                "frame {i} is {:?}, expected {dims:?}",
                frames[i].dimensions()
            )));
        }
        Ok(Self { frames, fps })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[RgbImage] {
        &self.frames
    }

    pub fn frame_size(&self) -> (u32, u32) {
        self.frames[0].dimensions()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: u32,
    pub cols: u32,
    pub output_size: (u32, u32),
}

impl GridSpec {
    pub fn new(rows: u32, cols: u32, output_size: (u32, u32)) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!("grid {rows}x{cols} has no cells")));
        }
        if output_size.0 == 0 || output_size.1 == 0 {
            return Err(Error::InvalidArgument("output size must be nonzero".into()));
        }
        Ok(Self {
            rows,
            cols,
            output_size,
        })
    }

    pub fn cells(&self) -> usize {
        (self.rows * self.cols) as usize
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            rows: 2,
            cols: 2,
            output_size: DEFAULT_OUTPUT_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSequence {
    pub composites: Vec<RgbImage>,
}

/// The stitching configurations compared in the grid-size ablation.
pub fn ablation_grids() -> Vec<GridSpec> {
    [2, 3, 4]
        .into_iter()
        .map(|n| GridSpec {
            rows: n,
            cols: n,
            output_size: DEFAULT_OUTPUT_SIZE,
        })
        .collect()
}

/// `n` indices spread uniformly over `0..len`, rounding half up.
/// Indices repeat when `len < n`.
pub fn select_keyframes(len: usize, n: usize) -> Result<Vec<usize>> {
    if len == 0 {
        return Err(Error::InvalidArgument("cannot select keyframes from an empty sequence".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("keyframe count must be >= 1".into()));
    }
    if n == 1 {
        return Ok(vec![0]);
    }
    let span = len - 1;
    let steps = n - 1;
    Ok((0..n).map(|i| (2 * i * span + steps) / (2 * steps)).collect())
}

/// Source frame index for every cell of every composite, row-major.
///
/// For keyframe `key` with predecessor keyframe `prev`, the candidates are
/// the frames strictly between them (or before `key` for the first one).
/// With at least `k` candidates, `k` are picked at uniform spacing; otherwise
/// all candidates are used and the earliest one (or the keyframe itself when
/// there are none) is repeated to fill the leading cells.
pub fn cell_sources(keyframes: &[usize], cells: usize) -> Result<Vec<Vec<usize>>> {
    if cells == 0 {
        return Err(Error::InvalidArgument("grid has no cells".into()));
    }
    if keyframes.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("keyframes must be non-decreasing".into()));
    }
    let k = cells - 1;
    let mut out = Vec::with_capacity(keyframes.len());
    for (i, &key) in keyframes.iter().enumerate() {
        let lo = if i == 0 { 0 } else { keyframes[i - 1] + 1 };
        let available = key.saturating_sub(lo);
        let mut cell = Vec::with_capacity(cells);
        if available >= k {
            // uniform points in (lo - 1, key), exclusive on both ends
            let base = lo as i64 - 1;
            let d = key as i64 - base;
            let parts = k as i64 + 1;
            for j in 1..=k as i64 {
                cell.push((base + (2 * j * d + parts) / (2 * parts)) as usize);
            }
        } else {
            let pad = if available > 0 { lo } else { key };
            cell.extend(std::iter::repeat_n(pad, k - available));
            cell.extend(lo..key);
        }
        cell.push(key);
        out.push(cell);
    }
    Ok(out)
}

/// Nearest-neighbour resize: destination pixel `x` samples source `⌊x·w_src / w_dst⌋`.
pub fn resize_nearest(src: &RgbImage, width: u32, height: u32) -> RgbImage {
    if src.dimensions() == (width, height) {
        return src.clone();
    }
    let (sw, sh) = src.dimensions();
    RgbImage::from_fn(width, height, |x, y| {
        let sx = (u64::from(x) * u64::from(sw) / u64::from(width)) as u32;
        let sy = (u64::from(y) * u64::from(sh) / u64::from(height)) as u32;
        *src.get_pixel(sx, sy)
    })
}

/// Tiles `sources` (row-major) into a `cols·w × rows·h` mosaic.
pub fn mosaic(frames: &[RgbImage], sources: &[usize], grid: &GridSpec) -> RgbImage {
    let (w, h) = frames[0].dimensions();
    let mut out = RgbImage::new(grid.cols * w, grid.rows * h);
    for (cell, &src) in sources.iter().enumerate() {
        let (r, c) = (cell as u32 / grid.cols, cell as u32 % grid.cols);
        image::imageops::replace(&mut out, &frames[src], i64::from(c * w), i64::from(r * h));
    }
    out
}

pub fn stitch(seq: &FrameSequence, keyframes: &[usize], grid: &GridSpec) -> Result<CompositeSequence> {
    if let Some(&bad) = keyframes.iter().find(|&&k| k >= seq.len()) {
        return Err(Error::InvalidArgument(format!(
            "keyframe {bad} out of range for {} frames",
            seq.len()
        )));
    }
    let sources = cell_sources(keyframes, grid.cells())?;
    let composites = sources
        .par_iter()
        .map(|cells| {
            let m = mosaic(seq.frames(), cells, grid);
            resize_nearest(&m, grid.output_size.0, grid.output_size.1)
        })
        .collect();
    Ok(CompositeSequence { composites })
}

/// Selects `n` keyframes and stitches them.
pub fn aggregate(seq: &FrameSequence, n: usize, grid: &GridSpec) -> Result<CompositeSequence> {
    let keys = select_keyframes(seq.len(), n)?;
    stitch(seq, &keys, grid)
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.png")
}

fn image_err(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

/// Loads every `frame_NNNNN.png` in `dir`, ordered by index.
pub fn load_frame_dir(dir: &Path) -> Result<FrameSequence> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(usize, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(idx) = name
            .strip_prefix("frame_")
            .and_then(|r| r.strip_suffix(".png"))
            .and_then(|d| d.parse::<usize>().ok())
        {
            files.push((idx, path));
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::Validation(format!("no frame_*.png files in {}", dir.display())));
    }
    let frames = files
        .iter()
        .map(|(_, p)| image::open(p).map(|img| img.to_rgb8()).map_err(|e| image_err(p, e)))
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames, None).map_err(|e| Error::Validation(format!("{}: {e}", dir.display())))
}

/// Encodes in memory, then writes atomically.
pub fn save_png(path: &Path, img: &RgbImage) -> Result<()> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)
        .map_err(|e| image_err(path, e))?;
    write_atomic(path, buf.get_ref())
}

/// Writes composites as `composite_NNNNN.png` and returns the file names.
pub fn save_composites(dir: &Path, seq: &CompositeSequence) -> Result<Vec<String>> {
    create_dir_all(dir)?;
    let mut names = Vec::new();
    for (i, img) in seq.composites.iter().enumerate() {
        let name = format!("composite_{i:05}.png");
        save_png(&dir.join(&name), img)?;
        names.push(name);
    }
    Ok(names)
}
