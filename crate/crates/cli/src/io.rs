//! Image, mask and overlay files.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, GrayImage, ImageReader, Luma, Rgb, RgbImage};

use cvxseg::{boundary_extract, BinaryField, Image, PixelSet};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{}: {source}", path.display())]
    Open {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: unsupported pixel format {format}, expected 8-bit {expected}", path.display())]
    Unsupported {
        path: PathBuf,
        format: String,
        expected: &'static str,
    },
    #[error("{}: mask is {found:?}, image is {expected:?}", path.display())]
    DimensionMismatch {
        path: PathBuf,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("{}: no object labels", path.display())]
    NoObjectLabels { path: PathBuf },
    #[error("{}: {source}", path.display())]
    Encode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

fn decode(path: &Path) -> Result<DynamicImage, IoError> {
    ImageReader::open(path)
        .map_err(|source| IoError::Open {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| IoError::Open {
            path: path.to_path_buf(),
            source,
        })?
        .decode()
        .map_err(|source| IoError::Decode {
            path: path.to_path_buf(),
            source,
        })
}

/// Grayscale files load as one channel, color files as three. Values stay in `[0, 255]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image<f64>, IoError> {
    let path = path.as_ref();
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, bytes) = match img {
        DynamicImage::ImageLuma8(g) => (1, g.into_raw()),
        DynamicImage::ImageLumaA8(_) => (1, img.to_luma8().into_raw()),
        DynamicImage::ImageRgb8(c) => (3, c.into_raw()),
        DynamicImage::ImageRgba8(_) => (3, img.to_rgb8().into_raw()),
        other => {
            return Err(IoError::Unsupported {
                path: path.to_path_buf(),
                format: format!("{:?}", other.color()),
                expected: "gray or RGB",
            })
        }
    };
    let data = bytes.into_iter().map(f64::from).collect();
    Ok(Image::new(w, h, channels, data).expect("decoded buffer matches its dimensions"))
}

fn load_mask(path: &Path, dims: (usize, usize)) -> Result<PixelSet, IoError> {
    let gray = match decode(path)? {
        DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(IoError::Unsupported {
                path: path.to_path_buf(),
                format: format!("{:?}", other.color()),
                expected: "single-channel",
            })
        }
    };
    let found = (gray.width() as usize, gray.height() as usize);
    if found != dims {
        return Err(IoError::DimensionMismatch {
            path: path.to_path_buf(),
            expected: dims,
            found,
        });
    }
    let pixels = gray
        .enumerate_pixels()
        .filter(|(_, _, p)| p.0[0] != 0)
        .map(|(x, y, _)| (x as usize, y as usize))
        .collect();
    Ok(PixelSet::new(dims.0, dims.1, pixels).expect("mask pixels are in bounds"))
}

/// Nonzero mask pixels are labeled. A missing background mask means no background labels.
pub fn load_labels(
    fg_path: impl AsRef<Path>,
    bg_path: Option<&Path>,
    dims: (usize, usize),
) -> Result<(PixelSet, PixelSet), IoError> {
    let fg_path = fg_path.as_ref();
    let r_ob = load_mask(fg_path, dims)?;
    if r_ob.is_empty() {
        return Err(IoError::NoObjectLabels {
            path: fg_path.to_path_buf(),
        });
    }
    let r_bg = match bg_path {
        Some(p) => load_mask(p, dims)?,
        None => PixelSet::empty(dims.0, dims.1),
    };
    Ok((r_ob, r_bg))
}

/// `.pgm` and `.ppm` get binary P5/P6 files, everything else goes by extension.
fn save(img: DynamicImage, path: &Path) -> Result<(), IoError> {
    let encode_err = |source| IoError::Encode {
        path: path.to_path_buf(),
        source,
    };
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let subtype = match ext.as_deref() {
        Some("pgm") => PnmSubtype::Graymap(SampleEncoding::Binary),
        Some("ppm") => PnmSubtype::Pixmap(SampleEncoding::Binary),
        _ => return img.save(path).map_err(encode_err),
    };
    let img = match subtype {
        PnmSubtype::Graymap(_) => DynamicImage::ImageLuma8(img.to_luma8()),
        _ => DynamicImage::ImageRgb8(img.to_rgb8()),
    };
    let file = File::create(path).map_err(|source| IoError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    img.write_with_encoder(PnmEncoder::new(BufWriter::new(file)).with_subtype(subtype))
        .map_err(encode_err)
}

/// Object pixels are written as 0, background as 255.
pub fn write_mask(path: impl AsRef<Path>, u: &BinaryField) -> Result<(), IoError> {
    let (w, h) = u.dims();
    let img = GrayImage::from_fn(w as u32, h as u32, |x, y| Luma([u.get(x as usize, y as usize) * 255]));
    save(DynamicImage::ImageLuma8(img), path.as_ref())
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryField, IoError> {
    let path = path.as_ref();
    let img = decode(path)?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values = img.into_raw().into_iter().map(|v| (v != 0) as u8).collect();
    Ok(BinaryField::from_vec(w, h, values).expect("decoded buffer matches its dimensions"))
}

/// Writes an 8-bit gray or RGB image; values are rounded and clamped.
pub fn write_image(path: impl AsRef<Path>, image: &Image<f64>) -> Result<(), IoError> {
    let (w, h) = image.dims();
    let bytes: Vec<u8> = image.data().iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    let img = match image.channels() {
        1 => DynamicImage::ImageLuma8(GrayImage::from_raw(w as u32, h as u32, bytes).expect("buffer size")),
        _ => DynamicImage::ImageRgb8(RgbImage::from_raw(w as u32, h as u32, bytes).expect("buffer size")),
    };
    save(img, path.as_ref())
}

/// Binary label mask with labeled pixels at 255.
pub fn write_labels(path: impl AsRef<Path>, labels: &PixelSet) -> Result<(), IoError> {
    let mut img = GrayImage::new(labels.width() as u32, labels.height() as u32);
    for &(x, y) in labels {
        img.put_pixel(x as u32, y as u32, Luma([255]));
    }
    save(DynamicImage::ImageLuma8(img), path.as_ref())
}

/// The input image in RGB with the object perimeter drawn in red.
pub fn write_overlay(path: impl AsRef<Path>, image: &Image<f64>, u: &BinaryField) -> Result<(), IoError> {
    let (w, h) = image.dims();
    let byte = |v: f64| v.round().clamp(0.0, 255.0) as u8;
    let mut img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let p = image.pixel(x as usize, y as usize);
        match p.len() {
            1 => Rgb([byte(p[0]); 3]),
            _ => Rgb([byte(p[0]), byte(p[1]), byte(p[2])]),
        }
    });
    for &(x, y) in &boundary_extract(u) {
        img.put_pixel(x as u32, y as u32, Rgb([255, 0, 0]));
    }
    save(DynamicImage::ImageRgb8(img), path.as_ref())
}
