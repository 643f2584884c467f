//! Image-side preparation: lidar depth targets, sparse radar pseudo-depth
//! images, RGB-D composition and linear depth binning.

use std::path::Path;

use image::RgbImage;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::cloudio::{RadarCloud, SceneManifest};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::par;

pub const DPTH_MAGIC: &[u8; 4] = b"DPTH";
pub const DPTH_VERSION: u32 = 1;
pub const DPTH_HEADER_LEN: usize = 16;
/// Category assigned to pixels without a measurement.
pub const EMPTY_BIN: u8 = u8::MAX;

/// Network input size (height, width) and feature stride.
pub const WORKING_HEIGHT: u32 = 256;
pub const WORKING_WIDTH: u32 = 704;
pub const DEFAULT_STRIDE: u32 = 16;

/// Sparse depth image in meters; 0.0 marks an empty pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: u32,
    height: u32,
    depth: Vec<f32>,
}

impl DepthImage {
    pub fn empty(width: u32, height: u32) -> Self {
        Self { width, height, depth: vec![0.0; width as usize * height as usize] }
    }

    pub fn from_vec(width: u32, height: u32, depth: Vec<f32>) -> Result<Self> {
        if depth.len() != width as usize * height as usize {
            return Err(Error::Geometry(format!("{} depth values for a {width}x{height} image", depth.len())));
        }
        if let Some(d) = depth.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::Geometry(format!("invalid depth value {d}")));
        }
        Ok(Self { width, height, depth })
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn as_slice(&self) -> &[f32] {
        &self.depth
    }
    pub fn get(&self, col: u32, row: u32) -> f32 {
        self.depth[(row * self.width + col) as usize]
    }
    pub fn nonzero(&self) -> usize {
        self.depth.iter().filter(|&&d| d > 0.0).count()
    }
}

/// Color image with a sparse depth channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbdImage {
    width: u32,
    height: u32,
    /// Row-major RGB in [0, 1].
    rgb: Vec<[f32; 3]>,
    depth: DepthImage,
}

impl RgbdImage {
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn rgb(&self) -> &[[f32; 3]] {
        &self.rgb
    }
    pub fn depth(&self) -> &DepthImage {
        &self.depth
    }

    /// RGB channels back as an 8-bit image.
    pub fn to_rgb8(&self) -> RgbImage {
        RgbImage::from_fn(self.width, self.height, |x, y| {
            let px = self.rgb[(y * self.width + x) as usize];
            image::Rgb(px.map(|c| (c * 255.0).round() as u8))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DepthBinning {
    pub d_min: f64,
    pub d_max: f64,
    pub bins: u32,
}

impl Default for DepthBinning {
    fn default() -> Self {
        Self { d_min: 2.0, d_max: 42.0, bins: 80 }
    }
}

impl DepthBinning {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_min > 0.0 && self.d_max > self.d_min && self.d_max.is_finite()) {
            return Err(Error::config(
                "depth_binning",
                format!("need 0 < d_min < d_max, got [{}, {}]", self.d_min, self.d_max),
            ));
        }
        if self.bins == 0 || self.bins >= EMPTY_BIN as u32 {
            return Err(Error::config("depth_binning.bins", format!("must be in 1..=254, got {}", self.bins)));
        }
        Ok(())
    }

    /// Linear-spaced category of depth `d` (> 0), clamped to the bin range.
    pub fn category(&self, d: f64) -> u8 {
        let c = (self.bins as f64 * (d - self.d_min) / (self.d_max - self.d_min)).floor();
        c.clamp(0.0, (self.bins - 1) as f64) as u8
    }
}

/// Per-pixel depth category map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthBins {
    pub width: u32,
    pub height: u32,
    /// Row-major categories; [`EMPTY_BIN`] where the depth image is empty.
    pub bins: Vec<u8>,
}

pub fn bin_depth(depth: &DepthImage, binning: &DepthBinning) -> DepthBins {
    DepthBins {
        width: depth.width,
        height: depth.height,
        bins: depth.depth.iter().map(|&d| if d > 0.0 { binning.category(d as f64) } else { EMPTY_BIN }).collect(),
    }
}

/// Projects sensor-frame points into the image described by `k`, keeping the
/// nearest camera-frame depth at each rounded pixel.
pub fn project_depth_map(points: &[Vector3<f64>], k: &CameraIntrinsics, sensor_to_cam: &Pose) -> DepthImage {
    let hits: Vec<Vec<(usize, f32)>> = par::map_chunks(points, 4096, |chunk| {
        chunk
            .iter()
            .filter_map(|p| {
                let c = sensor_to_cam.transform_point(p);
                let (u, v, d) = k.project(&c).visible()?;
                let (col, row) = k.pixel(u, v)?;
                Some(((row * k.width() + col) as usize, d as f32))
            })
            .collect()
    });
    let mut img = DepthImage::empty(k.width(), k.height());
    for (idx, d) in hits.into_iter().flatten() {
        // f32 rounding can take a tiny positive depth to 0; keep it measurable
        let d = d.max(f32::MIN_POSITIVE);
        let slot = &mut img.depth[idx];
        if *slot == 0.0 || d < *slot {
            *slot = d;
        }
    }
    img
}

/// Camera model and sensor-to-camera transforms at the working resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageCalib {
    pub intrinsics: CameraIntrinsics,
    pub radar_to_cam: Pose,
    pub lidar_to_cam: Pose,
}

impl ImageCalib {
    /// Calibration for images resized to `width × height`.
    pub fn from_manifest(m: &SceneManifest, width: u32, height: u32) -> Result<Self> {
        Ok(Self {
            intrinsics: m.intrinsics.resized(width, height)?,
            radar_to_cam: m.radar_to_camera(),
            lidar_to_cam: m.lidar_to_camera(),
        })
    }
}

fn radar_positions(radar: &RadarCloud) -> Vec<Vector3<f64>> {
    radar.points.iter().map(|p| p.position()).collect()
}

/// Sparse radar depth image aligned with a feature map downsampled by `stride`.
pub fn make_pseudo_depth(radar: &RadarCloud, calib: &ImageCalib, stride: u32) -> Result<DepthImage> {
    let k = calib.intrinsics.downsampled(stride)?;
    Ok(project_depth_map(&radar_positions(radar), &k, &calib.radar_to_cam))
}

/// Appends radar depth as a fourth channel of a working-resolution image.
pub fn make_rgbd(image: &RgbImage, radar: &RadarCloud, calib: &ImageCalib) -> Result<RgbdImage> {
    let k = &calib.intrinsics;
    if image.width() != k.width() || image.height() != k.height() {
        return Err(Error::config(
            "image",
            format!(
                "image is {}x{}, working resolution is {}x{}",
                image.width(),
                image.height(),
                k.width(),
                k.height()
            ),
        ));
    }
    let depth = make_pseudo_depth(radar, calib, 1)?;
    let rgb = image.pixels().map(|p| p.0.map(|c| c as f32 / 255.0)).collect();
    Ok(RgbdImage { width: image.width(), height: image.height(), rgb, depth })
}

pub fn encode_depth(img: &DepthImage) -> Vec<u8> {
    let mut buf = Vec::with_capacity(DPTH_HEADER_LEN + img.depth.len() * 4);
    buf.extend_from_slice(DPTH_MAGIC);
    buf.extend_from_slice(&DPTH_VERSION.to_le_bytes());
    buf.extend_from_slice(&img.width.to_le_bytes());
    buf.extend_from_slice(&img.height.to_le_bytes());
    for d in &img.depth {
        buf.extend_from_slice(&d.to_le_bytes());
    }
    buf
}

pub fn decode_depth(bytes: &[u8], path: &Path) -> Result<DepthImage> {
    let err = |off: usize, msg: String| Error::format(path, off as u64, msg);
    if bytes.len() < DPTH_HEADER_LEN {
        return Err(err(bytes.len(), "truncated header".into()));
    }
    if &bytes[0..4] != DPTH_MAGIC {
        return Err(err(0, format!("bad magic {:?}", &bytes[0..4])));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    if u32_at(4) != DPTH_VERSION {
        return Err(err(4, format!("unsupported version {}", u32_at(4))));
    }
    let (w, h) = (u32_at(8), u32_at(12));
    let n = w as usize * h as usize;
    let body = &bytes[DPTH_HEADER_LEN..];
    if body.len() != n * 4 {
        return Err(err(
            DPTH_HEADER_LEN + body.len().min(n * 4),
            format!("payload holds {} bytes, {w}x{h} needs {}", body.len(), n * 4),
        ));
    }
    let mut depth = Vec::with_capacity(n);
    for (i, c) in body.chunks_exact(4).enumerate() {
        let d = f32::from_le_bytes(c.try_into().unwrap());
        if !(d.is_finite() && d >= 0.0) {
            return Err(err(DPTH_HEADER_LEN + i * 4, format!("invalid depth {d}")));
        }
        depth.push(d);
    }
    Ok(DepthImage { width: w, height: h, depth })
}

pub fn write_depth(path: impl AsRef<Path>, img: &DepthImage) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_depth(img)).map_err(|e| Error::io(path, e))
}

pub fn read_depth(path: impl AsRef<Path>) -> Result<DepthImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_depth(&bytes, path)
}
