use std::io::{BufReader, BufWriter};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageFormat, RgbImage};

use crate::error::{Error, Result};

/// Reads a binary PPM (P6, 8-bit).
pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let img = image::load(BufReader::new(file), ImageFormat::Pnm).map_err(|e| Error::format(path, 0, e.to_string()))?;
    Ok(img.to_rgb8())
}

pub fn write_ppm(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    PnmEncoder::new(BufWriter::new(file))
        .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
        .write_image(img.as_raw(), img.width(), img.height(), ExtendedColorType::Rgb8)
        .map_err(|e| Error::format(path, 0, e.to_string()))
}

/// Writes an 8-bit binary greymap (P5).
pub fn write_pgm(path: impl AsRef<Path>, width: u32, height: u32, data: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    PnmEncoder::new(BufWriter::new(file))
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(data, width, height, ExtendedColorType::L8)
        .map_err(|e| Error::format(path, 0, e.to_string()))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<image::GrayImage> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let img = image::load(BufReader::new(file), ImageFormat::Pnm).map_err(|e| Error::format(path, 0, e.to_string()))?;
    Ok(img.to_luma8())
}
