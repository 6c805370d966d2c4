//! Panorama thumbnail montage and single-strip concatenation.

use std::io::Cursor;
use std::path::Path;

use image::imageops::{self, FilterType};
use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

use super::ReasoningError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThumbnailParams {
    pub max_views: usize,
    /// Long edge of each tile in pixels. Tiles are only ever shrunk.
    pub tile_edge: u32,
}

impl Default for ThumbnailParams {
    fn default() -> Self {
        Self {
            max_views: 8,
            tile_edge: 336,
        }
    }
}

impl ThumbnailParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_views == 0 {
            return Err("thumbnail.max_views must be at least 1".into());
        }
        if self.tile_edge == 0 {
            return Err("thumbnail.tile_edge must be at least 1".into());
        }
        Ok(())
    }
}

/// `min(n, max_views)` evenly spaced indices `floor(i * n / m)`.
pub fn select_views(n: usize, max_views: usize) -> Vec<usize> {
    let m = n.min(max_views);
    (0..m).map(|i| i * n / m).collect()
}

pub fn decode(path: &Path, image_ref: &str) -> Result<RgbImage, ReasoningError> {
    let bytes = std::fs::read(path).map_err(|e| ReasoningError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    image::load_from_memory(&bytes)
        .map(|img| img.to_rgb8())
        .map_err(|e| ReasoningError::ImageDecode {
            image: image_ref.to_string(),
            reason: e.to_string(),
        })
}

fn shrink(img: &RgbImage, edge: u32) -> RgbImage {
    let (w, h) = img.dimensions();
    let long = w.max(h);
    if long <= edge {
        return img.clone();
    }
    let scale = edge as f64 / long as f64;
    let nw = ((w as f64 * scale).round() as u32).max(1);
    let nh = ((h as f64 * scale).round() as u32).max(1);
    imageops::resize(img, nw, nh, FilterType::Triangle)
}

/// Tiles the views row-major into a grid `ceil(sqrt(m))` columns wide. Every
/// cell is as large as the largest tile; tiles sit at the cell's top-left
/// corner on a black background.
pub fn montage(tiles: &[RgbImage]) -> RgbImage {
    let m = tiles.len().max(1);
    let cols = (m as f64).sqrt().ceil() as u32;
    let rows = (m as u32).div_ceil(cols);
    let cell_w = tiles.iter().map(|t| t.width()).max().unwrap_or(1);
    let cell_h = tiles.iter().map(|t| t.height()).max().unwrap_or(1);
    let mut canvas = RgbImage::new(cell_w * cols, cell_h * rows);
    for (i, tile) in tiles.iter().enumerate() {
        let (c, r) = (i as u32 % cols, i as u32 / cols);
        imageops::replace(&mut canvas, tile, (c * cell_w) as i64, (r * cell_h) as i64);
    }
    canvas
}

/// Places images left to right, top-aligned.
pub fn concat_strip(images: &[RgbImage]) -> RgbImage {
    let width = images.iter().map(|i| i.width()).sum::<u32>().max(1);
    let height = images.iter().map(|i| i.height()).max().unwrap_or(1);
    let mut canvas = RgbImage::new(width, height);
    let mut x = 0;
    for img in images {
        imageops::replace(&mut canvas, img, x as i64, 0);
        x += img.width();
    }
    canvas
}

pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).expect("png encoding into memory");
    out.into_inner()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thumbnail {
    /// Panorama indices that were tiled.
    pub views: Vec<usize>,
    pub image: RgbImage,
}

/// Builds the montage for `panorama` (image references resolved under
/// `root`).
pub fn make_thumbnail(root: &Path, panorama: &[String], params: &ThumbnailParams) -> Result<Thumbnail, ReasoningError> {
    if panorama.is_empty() {
        return Err(ReasoningError::EmptyPanorama);
    }
    let views = select_views(panorama.len(), params.max_views);
    let mut tiles = Vec::with_capacity(views.len());
    for &i in &views {
        let img = decode(&root.join(&panorama[i]), &panorama[i])?;
        tiles.push(shrink(&img, params.tile_edge));
    }
    Ok(Thumbnail {
        views,
        image: montage(&tiles),
    })
}
