use std::path::Path;

use image::{ImageBuffer, Rgb};

use crate::error::{Error, Result};
use crate::metrics::{to_u8, ImagePlane};

fn image_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image {
        path: path.to_owned(),
        message: e.to_string(),
    }
}

/// Reads a PNG as a 3-channel `[0, 1]` plane; grayscale is replicated to RGB.
pub fn read_png(path: &Path) -> Result<ImagePlane> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| image_error(path, e))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut values = vec![0.0; 3 * h * w];
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..3 {
            values[(c * h + y as usize) * w + x as usize] = px[c] as f64 / 255.0;
        }
    }
    ImagePlane::new(3, h, w, values)
}

/// Encodes a 3-channel plane as 8-bit RGB PNG bytes (clamped, rounded half away from zero).
pub fn encode_png(img: &ImagePlane) -> Result<Vec<u8>> {
    if img.channels() != 3 {
        return Err(Error::shape(format!(
            "PNG output needs 3 channels, got {}",
            img.channels()
        )));
    }
    let (h, w) = (img.height(), img.width());
    let buf = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let px = |c| to_u8(img.at(c, y as usize, x as usize));
        Rgb([px(0), px(1), px(2)])
    });
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| image_error(Path::new("<memory>"), e))?;
    Ok(out.into_inner())
}

pub fn write_png(path: &Path, img: &ImagePlane) -> Result<()> {
    let bytes = encode_png(img)?;
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}
