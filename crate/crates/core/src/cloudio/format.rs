//! Fixed-stride little-endian point-cloud files.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "OCPC"
//! 4       4     u32 version (1)
//! 8       1     u8 schema (1 = lidar, 2 = radar)
//! 9       4     u32 point count
//! 13      ...   records, 24 bytes each
//! ```
//!
//! Lidar record: 3×f32 position, f32 intensity, u8 label, u8 pad (0),
//! u16 time offset in 0.1 ms ticks, 4 zero bytes.
//! Radar record: 6×f32 (x, y, z, velocity, rcs, confidence).

use std::path::Path;

use nalgebra::Vector3;

use crate::classes::NUM_SEMANTIC;
use crate::error::{Error, Result};

pub const CLOUD_MAGIC: &[u8; 4] = b"OCPC";
pub const CLOUD_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 13;
pub const RECORD_LEN: usize = 24;
/// Seconds per stored time tick.
pub const TICK: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Schema {
    Lidar = 1,
    Radar = 2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarPoint {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub intensity: f32,
    pub label: u8,
    /// Capture time within the sweep in [`TICK`] units.
    pub t_ticks: u16,
}

impl LidarPoint {
    pub fn new(pos: Vector3<f64>, intensity: f32, label: u8, t_offset: f64) -> Self {
        Self {
            x: pos.x as f32,
            y: pos.y as f32,
            z: pos.z as f32,
            intensity,
            label,
            t_ticks: seconds_to_ticks(t_offset),
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x as f64, self.y as f64, self.z as f64)
    }

    /// Capture time within the sweep, seconds.
    pub fn t_offset(&self) -> f64 {
        self.t_ticks as f64 * TICK
    }
}

pub fn seconds_to_ticks(t: f64) -> u16 {
    (t / TICK).round().clamp(0.0, u16::MAX as f64) as u16
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarPoint {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    /// Radial velocity, m/s.
    pub velocity: f32,
    /// Radar cross-section, dBsm.
    pub rcs: f32,
    pub confidence: f32,
}

impl RadarPoint {
    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x as f64, self.y as f64, self.z as f64)
    }
}

/// A lidar sweep with per-point semantic labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledCloud {
    pub points: Vec<LidarPoint>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RadarCloud {
    pub points: Vec<RadarPoint>,
}

impl LabeledCloud {
    pub fn new(points: Vec<LidarPoint>) -> Self {
        Self { points }
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl RadarCloud {
    pub fn new(points: Vec<RadarPoint>) -> Self {
        Self { points }
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cloud {
    Lidar(LabeledCloud),
    Radar(RadarCloud),
}

impl Cloud {
    pub fn schema(&self) -> Schema {
        match self {
            Cloud::Lidar(_) => Schema::Lidar,
            Cloud::Radar(_) => Schema::Radar,
        }
    }
}

fn header(schema: Schema, count: usize) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + count * RECORD_LEN);
    buf.extend_from_slice(CLOUD_MAGIC);
    buf.extend_from_slice(&CLOUD_VERSION.to_le_bytes());
    buf.push(schema as u8);
    buf.extend_from_slice(&(count as u32).to_le_bytes());
    buf
}

pub fn encode_lidar(cloud: &LabeledCloud) -> Vec<u8> {
    let mut buf = header(Schema::Lidar, cloud.len());
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.intensity] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.push(p.label);
        buf.push(0);
        buf.extend_from_slice(&p.t_ticks.to_le_bytes());
        buf.extend_from_slice(&[0; 4]);
    }
    buf
}

pub fn encode_radar(cloud: &RadarCloud) -> Vec<u8> {
    let mut buf = header(Schema::Radar, cloud.len());
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.velocity, p.rcs, p.confidence] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn encode_cloud(cloud: &Cloud) -> Vec<u8> {
    match cloud {
        Cloud::Lidar(c) => encode_lidar(c),
        Cloud::Radar(c) => encode_radar(c),
    }
}

fn f32_at(b: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

/// Parses a cloud file image. `path` is used only in error messages.
pub fn decode_cloud(bytes: &[u8], expected: Schema, path: &Path) -> Result<Cloud> {
    let err = |off: usize, msg: String| Error::format(path, off as u64, msg);
    if bytes.len() < HEADER_LEN {
        return Err(err(bytes.len(), format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != CLOUD_MAGIC {
        return Err(err(0, format!("bad magic {:?}", &bytes[0..4])));
    }
    let version = u32_at(bytes, 4);
    if version != CLOUD_VERSION {
        return Err(err(4, format!("unsupported version {version}")));
    }
    let schema = match bytes[8] {
        1 => Schema::Lidar,
        2 => Schema::Radar,
        s => return Err(err(8, format!("unknown schema byte {s}"))),
    };
    if schema != expected {
        return Err(err(8, format!("expected {expected:?} cloud, file holds {schema:?}")));
    }
    let count = u32_at(bytes, 9) as usize;
    let payload = &bytes[HEADER_LEN..];
    let expected_len = count.checked_mul(RECORD_LEN).ok_or_else(|| err(9, format!("point count {count} overflows")))?;
    if payload.len() < expected_len {
        return Err(err(
            bytes.len(),
            format!("truncated payload: {count} points need {expected_len} bytes, found {}", payload.len()),
        ));
    }
    if payload.len() > expected_len {
        return Err(err(HEADER_LEN + expected_len, "trailing bytes after last record".into()));
    }

    match schema {
        Schema::Lidar => {
            let mut points = Vec::with_capacity(count);
            for (i, rec) in payload.chunks_exact(RECORD_LEN).enumerate() {
                let off = HEADER_LEN + i * RECORD_LEN;
                let p = LidarPoint {
                    x: f32_at(rec, 0),
                    y: f32_at(rec, 4),
                    z: f32_at(rec, 8),
                    intensity: f32_at(rec, 12),
                    label: rec[16],
                    t_ticks: u16::from_le_bytes([rec[18], rec[19]]),
                };
                if ![p.x, p.y, p.z].iter().all(|v| v.is_finite()) {
                    return Err(err(off, format!("point {i} has a non-finite position")));
                }
                if !(0.0..=1.0).contains(&p.intensity) {
                    return Err(err(off + 12, format!("point {i} intensity {} outside [0, 1]", p.intensity)));
                }
                if p.label as usize >= NUM_SEMANTIC {
                    return Err(err(off + 16, format!("point {i} label {} outside 0..=16", p.label)));
                }
                if rec[17] != 0 || rec[20..24].iter().any(|&b| b != 0) {
                    return Err(err(off + 17, format!("point {i} has nonzero padding")));
                }
                points.push(p);
            }
            Ok(Cloud::Lidar(LabeledCloud { points }))
        }
        Schema::Radar => {
            let mut points = Vec::with_capacity(count);
            for (i, rec) in payload.chunks_exact(RECORD_LEN).enumerate() {
                let off = HEADER_LEN + i * RECORD_LEN;
                let p = RadarPoint {
                    x: f32_at(rec, 0),
                    y: f32_at(rec, 4),
                    z: f32_at(rec, 8),
                    velocity: f32_at(rec, 12),
                    rcs: f32_at(rec, 16),
                    confidence: f32_at(rec, 20),
                };
                if ![p.x, p.y, p.z, p.velocity, p.rcs].iter().all(|v| v.is_finite()) {
                    return Err(err(off, format!("radar point {i} has a non-finite field")));
                }
                if !(0.0..=1.0).contains(&p.confidence) {
                    return Err(err(off + 20, format!("radar point {i} confidence {} outside [0, 1]", p.confidence)));
                }
                points.push(p);
            }
            Ok(Cloud::Radar(RadarCloud { points }))
        }
    }
}

pub fn read_cloud(path: impl AsRef<Path>, schema: Schema) -> Result<Cloud> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cloud(&bytes, schema, path)
}

pub fn read_lidar(path: impl AsRef<Path>) -> Result<LabeledCloud> {
    match read_cloud(path, Schema::Lidar)? {
        Cloud::Lidar(c) => Ok(c),
        Cloud::Radar(_) => unreachable!("schema checked by decode_cloud"),
    }
}

pub fn read_radar(path: impl AsRef<Path>) -> Result<RadarCloud> {
    match read_cloud(path, Schema::Radar)? {
        Cloud::Radar(c) => Ok(c),
        Cloud::Lidar(_) => unreachable!("schema checked by decode_cloud"),
    }
}

pub fn write_cloud(path: impl AsRef<Path>, cloud: &Cloud) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_cloud(cloud)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    /// Byte-level writer independent of `encode_lidar`.
    fn hand_lidar_record(buf: &mut Vec<u8>, vals: [f32; 4], label: u8, ticks: u16) {
        for v in vals {
            buf.extend(v.to_le_bytes());
        }
        buf.extend([label, 0]);
        buf.extend(ticks.to_le_bytes());
        buf.extend([0u8; 4]);
    }

    fn hand_header(schema: u8, count: u32) -> Vec<u8> {
        let mut b = b"OCPC".to_vec();
        b.extend(1u32.to_le_bytes());
        b.push(schema);
        b.extend(count.to_le_bytes());
        b
    }

    #[test]
    fn empty_cloud() {
        let bytes = hand_header(1, 0);
        let c = decode_cloud(&bytes, Schema::Lidar, p()).unwrap();
        assert_eq!(c, Cloud::Lidar(LabeledCloud::default()));
        assert_eq!(encode_cloud(&c), bytes);
    }

    #[test]
    fn hand_built_two_point_file() {
        let mut bytes = hand_header(1, 2);
        hand_lidar_record(&mut bytes, [1.0, 2.0, 3.0, 0.5], 4, 100);
        hand_lidar_record(&mut bytes, [-7.25, 0.0, 1.5, 1.0], 16, 499);
        assert_eq!(bytes.len(), 13 + 48);
        let Cloud::Lidar(c) = decode_cloud(&bytes, Schema::Lidar, p()).unwrap() else {
            panic!("wrong schema");
        };
        let a = c.points[0];
        assert_eq!((a.x, a.y, a.z, a.intensity, a.label), (1.0, 2.0, 3.0, 0.5, 4));
        assert!((a.t_offset() - 0.01).abs() < 1e-12);
        let b = c.points[1];
        assert_eq!((b.x, b.label, b.t_ticks), (-7.25, 16, 499));
        assert_eq!(encode_lidar(&c), bytes);
    }

    #[test]
    fn radar_fields() {
        let mut bytes = hand_header(2, 1);
        for v in [10.0f32, -1.0, 0.5, 3.25, -5.0, 0.75] {
            bytes.extend(v.to_le_bytes());
        }
        let Cloud::Radar(c) = decode_cloud(&bytes, Schema::Radar, p()).unwrap() else {
            panic!("wrong schema");
        };
        let r = c.points[0];
        assert_eq!((r.x, r.y, r.z, r.velocity, r.rcs, r.confidence), (10.0, -1.0, 0.5, 3.25, -5.0, 0.75));
    }

    fn offset_of(e: Error) -> u64 {
        match e {
            Error::Format { offset, .. } => offset,
            other => panic!("expected format error, got {other}"),
        }
    }

    #[test]
    fn errors_identify_offsets() {
        let mut bad_magic = hand_header(1, 0);
        bad_magic[0] = b'X';
        assert_eq!(offset_of(decode_cloud(&bad_magic, Schema::Lidar, p()).unwrap_err()), 0);

        let mut truncated = hand_header(1, 2);
        hand_lidar_record(&mut truncated, [0.0, 0.0, 0.0, 0.0], 1, 0);
        assert_eq!(offset_of(decode_cloud(&truncated, Schema::Lidar, p()).unwrap_err()), 37);

        let mut bad_label = hand_header(1, 2);
        hand_lidar_record(&mut bad_label, [0.0, 0.0, 0.0, 0.0], 1, 0);
        hand_lidar_record(&mut bad_label, [0.0, 0.0, 0.0, 0.0], 17, 0);
        assert_eq!(offset_of(decode_cloud(&bad_label, Schema::Lidar, p()).unwrap_err()), 13 + 24 + 16);

        let radar = hand_header(2, 0);
        assert_eq!(offset_of(decode_cloud(&radar, Schema::Lidar, p()).unwrap_err()), 8);

        assert_eq!(offset_of(decode_cloud(b"OCP", Schema::Lidar, p()).unwrap_err()), 3);
    }

    #[test]
    fn radar_confidence_validated() {
        let mut bytes = hand_header(2, 1);
        for v in [0.0f32, 0.0, 0.0, 0.0, 0.0, 1.5] {
            bytes.extend(v.to_le_bytes());
        }
        assert_eq!(offset_of(decode_cloud(&bytes, Schema::Radar, p()).unwrap_err()), 13 + 20);
    }
}
