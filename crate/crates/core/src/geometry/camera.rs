use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points closer than this to the image plane (camera z) are rejected.
pub const MIN_DEPTH: f64 = 1e-6;

/// Pinhole intrinsics for rectified images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics", into = "RawIntrinsics")]
pub struct CameraIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

#[derive(Serialize, Deserialize)]
struct RawIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

impl TryFrom<RawIntrinsics> for CameraIntrinsics {
    type Error = Error;
    fn try_from(r: RawIntrinsics) -> Result<Self> {
        CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl From<CameraIntrinsics> for RawIntrinsics {
    fn from(k: CameraIntrinsics) -> Self {
        RawIntrinsics { fx: k.fx, fy: k.fy, cx: k.cx, cy: k.cy, width: k.width, height: k.height }
    }
}

/// Result of projecting a camera-frame point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Visible {
        u: f64,
        v: f64,
        depth: f64,
    },
    /// The point lies on or behind the image plane.
    Behind,
}

impl Projection {
    pub fn visible(self) -> Option<(f64, f64, f64)> {
        match self {
            Projection::Visible { u, v, depth } => Some((u, v, depth)),
            Projection::Behind => None,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let ok = fx.is_finite()
            && fy.is_finite()
            && fx > 0.0
            && fy > 0.0
            && cx > 0.0
            && cx < width as f64
            && cy > 0.0
            && cy < height as f64;
        if !ok {
            return Err(Error::Geometry(format!(
                "invalid intrinsics fx={fx} fy={fy} cx={cx} cy={cy} size={width}x{height}"
            )));
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }

    /// Centered principal point with focal lengths derived from the full
    /// horizontal and vertical fields of view (degrees).
    pub fn from_fov(width: u32, height: u32, hfov_deg: f64, vfov_deg: f64) -> Result<Self> {
        let fx = focal_from_fov(width, hfov_deg);
        let fy = focal_from_fov(height, vfov_deg);
        Self::new(fx, fy, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    /// Intrinsics for the same camera after resizing the image to
    /// `width × height`. Horizontal terms scale with the width ratio, vertical
    /// terms with the height ratio.
    pub fn resized(&self, width: u32, height: u32) -> Result<Self> {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self::new(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy, width, height)
    }

    /// Intrinsics for a feature map downsampled by an integer `stride`.
    pub fn downsampled(&self, stride: u32) -> Result<Self> {
        if stride == 0 || self.width % stride != 0 || self.height % stride != 0 {
            return Err(Error::config(
                "stride",
                format!("stride {stride} does not divide the image size {}x{}", self.width, self.height),
            ));
        }
        let s = stride as f64;
        Self::new(self.fx / s, self.fy / s, self.cx / s, self.cy / s, self.width / stride, self.height / stride)
    }

    pub fn project(&self, p: &Vector3<f64>) -> Projection {
        if p.z <= MIN_DEPTH {
            return Projection::Behind;
        }
        Projection::Visible { u: self.fx * p.x / p.z + self.cx, v: self.fy * p.y / p.z + self.cy, depth: p.z }
    }

    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx * depth, (v - self.cy) / self.fy * depth, depth)
    }

    /// Nearest integer pixel `(col, row)` when it falls inside the image.
    pub fn pixel(&self, u: f64, v: f64) -> Option<(u32, u32)> {
        let col = u.round();
        let row = v.round();
        if col >= 0.0 && row >= 0.0 && col < self.width as f64 && row < self.height as f64 {
            Some((col as u32, row as u32))
        } else {
            None
        }
    }

    /// True when the continuous image coordinate lies in `[0, W) × [0, H)`.
    pub fn in_image(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }
}

/// Focal length (pixels) giving a full field of view of `fov_deg` across `extent_px`.
pub fn focal_from_fov(extent_px: u32, fov_deg: f64) -> f64 {
    (extent_px as f64 / 2.0) / (fov_deg.to_radians() / 2.0).tan()
}
