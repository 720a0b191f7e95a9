//! CT scan volumes as ordered stacks of grayscale slices.
//!
//! A scan lives on disk as one directory per scan with one lossless
//! grayscale raster per slice (`png`, `pgm`, `tif`/`tiff`). The slice order
//! is taken from the trailing decimal integer of each file stem, so
//! `s2.png` sorts before `s10.png`.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};

use crate::error::{io_err, Error, Result};

/// Extensions accepted by [`load_scan`], compared case-insensitively.
pub const SLICE_EXTENSIONS: &[&str] = &["png", "pgm", "tif", "tiff"];

/// A single grayscale slice stored row-major.
///
/// Row `i` and column `j` address pixel `pixels[i * width + j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceImage {
    width: usize,
    height: usize,
    max_intensity: u16,
    pixels: Vec<u16>,
}

impl SliceImage {
    pub fn new(width: usize, height: usize, max_intensity: u16, pixels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "{width}x{height} slice has no pixels"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} pixels for a {width}x{height} slice",
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().find(|&&p| p > max_intensity) {
            return Err(Error::InvalidImage(format!(
                "pixel value {p} exceeds max intensity {max_intensity}"
            )));
        }
        Ok(Self {
            width,
            height,
            max_intensity,
            pixels,
        })
    }

    /// A slice where every pixel has the same value.
    pub fn filled(width: usize, height: usize, max_intensity: u16, value: u16) -> Result<Self> {
        Self::new(width, height, max_intensity, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn max_intensity(&self) -> u16 {
        self.max_intensity
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.pixels[row * self.width + col]
    }

    /// Bit depth implied by the intensity range: 8 up to 255, 16 otherwise.
    pub fn bit_depth(&self) -> u8 {
        if self.max_intensity <= u8::MAX as u16 {
            8
        } else {
            16
        }
    }

    fn from_dynamic(img: DynamicImage, path: &Path) -> Result<Self> {
        let (width, height) = (img.width() as usize, img.height() as usize);
        match img {
            DynamicImage::ImageLuma8(buf) => Self::new(
                width,
                height,
                u8::MAX as u16,
                buf.into_raw().into_iter().map(u16::from).collect(),
            ),
            DynamicImage::ImageLumaA8(_) => {
                let buf = img.to_luma8();
                Self::new(
                    width,
                    height,
                    u8::MAX as u16,
                    buf.into_raw().into_iter().map(u16::from).collect(),
                )
            }
            DynamicImage::ImageLuma16(buf) => Self::new(width, height, u16::MAX, buf.into_raw()),
            DynamicImage::ImageLumaA16(_) => {
                Self::new(width, height, u16::MAX, img.to_luma16().into_raw())
            }
            other => Err(Error::Decode {
                path: path.to_path_buf(),
                reason: format!("expected a grayscale image, found {:?}", other.color()),
            }),
        }
    }

    /// Decodes a grayscale raster file.
    pub fn open(path: &Path) -> Result<Self> {
        let img = image::ImageReader::open(path)
            .map_err(io_err(path))?
            .with_guessed_format()
            .map_err(io_err(path))?
            .decode()
            .map_err(|e| Error::Decode {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        Self::from_dynamic(img, path)
    }

    /// Writes the slice losslessly. The format follows the file extension;
    /// slices with `max_intensity > 255` are written as 16-bit.
    pub fn save(&self, path: &Path) -> Result<()> {
        let (w, h) = (self.width as u32, self.height as u32);
        let res = if self.bit_depth() == 8 {
            let raw: Vec<u8> = self.pixels.iter().map(|&p| p as u8).collect();
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw)
                .expect("buffer length matches dimensions")
                .save(path)
        } else {
            ImageBuffer::<Luma<u16>, _>::from_raw(w, h, self.pixels.clone())
                .expect("buffer length matches dimensions")
                .save(path)
        };
        res.map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// An ordered stack of slices sharing one geometry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanVolume {
    scan_id: String,
    slices: Vec<SliceImage>,
    slice_indices: Vec<u64>,
}

impl ScanVolume {
    pub fn new(
        scan_id: impl Into<String>,
        slices: Vec<SliceImage>,
        slice_indices: Vec<u64>,
    ) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::InvalidVolume("a volume needs at least one slice".into()))?;
        if slices.len() != slice_indices.len() {
            return Err(Error::InvalidVolume(format!(
                "{} slices but {} slice indices",
                slices.len(),
                slice_indices.len()
            )));
        }
        let (w, h, max) = (first.width, first.height, first.max_intensity);
        if slices
            .iter()
            .any(|s| s.width != w || s.height != h || s.max_intensity != max)
        {
            return Err(Error::InvalidVolume(
                "slices differ in geometry or bit depth".into(),
            ));
        }
        if slice_indices.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidVolume(
                "slice indices are not strictly increasing".into(),
            ));
        }
        Ok(Self {
            scan_id: scan_id.into(),
            slices,
            slice_indices,
        })
    }

    pub fn scan_id(&self) -> &str {
        &self.scan_id
    }

    pub fn slices(&self) -> &[SliceImage] {
        &self.slices
    }

    pub fn slice_indices(&self) -> &[u64] {
        &self.slice_indices
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn width(&self) -> usize {
        self.slices[0].width
    }

    pub fn height(&self) -> usize {
        self.slices[0].height
    }

    pub fn max_intensity(&self) -> u16 {
        self.slices[0].max_intensity
    }
}

/// Parses the trailing decimal integer of a file stem (`slice_012` -> 12).
pub fn trailing_index(stem: &str) -> Option<u64> {
    let digits = stem.len() - stem.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    stem[stem.len() - digits..].parse().ok()
}

fn is_slice_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| SLICE_EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)))
        .unwrap_or(false)
}

/// Slice files of a scan directory ordered by their numeric suffix.
pub fn list_slice_files(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if !path.is_file() || !is_slice_file(&path) {
            continue;
        }
        let index = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(trailing_index)
            .ok_or_else(|| Error::UnparsableIndex(path.clone()))?;
        files.push((index, path));
    }
    if files.is_empty() {
        return Err(Error::EmptyScan(dir.to_path_buf()));
    }
    files.sort();
    if let Some(pair) = files.windows(2).find(|p| p[0].0 == p[1].0) {
        return Err(Error::DuplicateIndex {
            dir: dir.to_path_buf(),
            index: pair[0].0,
        });
    }
    Ok(files)
}

/// Loads every slice of a scan directory. The scan id is the directory name.
pub fn load_scan(dir: &Path) -> Result<ScanVolume> {
    let files = list_slice_files(dir)?;
    let mut slices: Vec<SliceImage> = Vec::with_capacity(files.len());
    let mut indices = Vec::with_capacity(files.len());
    for (index, path) in files {
        let slice = SliceImage::open(&path)?;
        if let Some(first) = slices.first() {
            if (slice.width, slice.height) != (first.width, first.height) {
                return Err(Error::MixedDimensions {
                    path,
                    width: first.width as u32,
                    height: first.height as u32,
                    found_width: slice.width as u32,
                    found_height: slice.height as u32,
                });
            }
            if slice.max_intensity != first.max_intensity {
                return Err(Error::MixedDepth {
                    path,
                    expected: first.max_intensity,
                    found: slice.max_intensity,
                });
            }
        }
        slices.push(slice);
        indices.push(index);
    }
    let scan_id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    ScanVolume::new(scan_id, slices, indices)
}
