use std::path::Path;

use image::{ColorType, ImageBuffer, Rgb};

use crate::error::IoError;
use crate::image::Image;

/// Loads an 8-bit RGB image as values `v / 255`.
pub fn load_image(path: &Path) -> Result<Image, IoError> {
    let img = image::open(path).map_err(|source| IoError::Image {
        path: path.to_path_buf(),
        source,
    })?;
    if img.color() != ColorType::Rgb8 {
        return Err(IoError::ImageFormat {
            path: path.to_path_buf(),
            found: format!("{:?}", img.color()),
        });
    }
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb.into_raw().into_iter().map(|v| v as f64 / 255.0).collect();
    Ok(Image {
        width: w as usize,
        height: h as usize,
        channels: 3,
        data,
    })
}

pub fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Saves a 3-channel image, or a 1-channel image as gray, quantizing by
/// `round(v·255)` clamped to 0..=255. The format follows the extension.
pub fn save_image(img: &Image, path: &Path) -> Result<(), IoError> {
    let bytes: Vec<u8> = match img.channels {
        3 => img.data.iter().map(|&v| quantize(v)).collect(),
        1 => img.data.iter().flat_map(|&v| [quantize(v); 3]).collect(),
        c => return Err(IoError::Invalid(format!("cannot save a {c}-channel image"))),
    };
    let buf: ImageBuffer<Rgb<u8>, _> = ImageBuffer::from_raw(img.width as u32, img.height as u32, bytes)
        .ok_or_else(|| IoError::Invalid("image buffer size does not match its shape".into()))?;
    buf.save(path).map_err(|source| IoError::Image {
        path: path.to_path_buf(),
        source,
    })
}
