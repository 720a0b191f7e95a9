//! Spatial region of interest: low-pass filtering, threshold segmentation,
//! the minimal bounding box of the body and crop + resize.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{ScanVolume, SliceImage};

/// Relative slack on the threshold level so that `t * max_intensity`
/// landing a rounding error above an integer does not flip the `>=` test.
const THRESHOLD_SLACK: f64 = 1e-9;

/// Parameters of the spatial step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialConfig {
    /// Half width `k` of the square `(2k+1) x (2k+1)` filter window.
    pub kernel_half_width: usize,
    /// Segmentation threshold as a fraction of the slice's max intensity.
    pub threshold: f64,
    pub output_height: usize,
    pub output_width: usize,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        Self {
            kernel_half_width: 2,
            threshold: 0.1,
            output_height: 384,
            output_width: 384,
        }
    }
}

impl SpatialConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "spatial.threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.output_height == 0 || self.output_width == 0 {
            return Err(Error::InvalidConfig(
                "spatial output size must be at least 1x1".into(),
            ));
        }
        Ok(())
    }
}

/// A low-pass filtered slice. Values are kept unrounded so that the
/// threshold sees the exact window mean.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredImage {
    pub width: usize,
    pub height: usize,
    pub max_intensity: u16,
    pub values: Vec<f64>,
}

impl FilteredImage {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Rounds half-up back to integer intensities.
    pub fn to_slice(&self) -> SliceImage {
        let px = self
            .values
            .iter()
            .map(|&v| (v + 0.5).floor().clamp(0.0, self.max_intensity as f64) as u16)
            .collect();
        SliceImage::new(self.width, self.height, self.max_intensity, px)
            .expect("filter keeps geometry and range")
    }
}

impl From<&SliceImage> for FilteredImage {
    fn from(s: &SliceImage) -> Self {
        Self {
            width: s.width(),
            height: s.height(),
            max_intensity: s.max_intensity(),
            values: s.pixels().iter().map(|&p| p as f64).collect(),
        }
    }
}

/// Box filter with uniform weights over the `(2k+1) x (2k+1)` window.
///
/// Neighbours outside the slice are dropped and the mean is taken over the
/// in-bounds ones only, so borders are not darkened. Runs in O(pixels)
/// through a summed-area table.
pub fn low_pass_filter(slice: &SliceImage, k: usize) -> FilteredImage {
    let (w, h) = (slice.width(), slice.height());
    if k == 0 {
        return FilteredImage::from(slice);
    }
    // sat[(i+1)*(w+1) + (j+1)] = sum of pixels in rows 0..=i, cols 0..=j
    let stride = w + 1;
    let mut sat = vec![0u64; (h + 1) * stride];
    for i in 0..h {
        let mut row_sum = 0u64;
        for j in 0..w {
            row_sum += slice.get(i, j) as u64;
            sat[(i + 1) * stride + j + 1] = sat[i * stride + j + 1] + row_sum;
        }
    }
    let mut values = Vec::with_capacity(w * h);
    for i in 0..h {
        let (r0, r1) = (i.saturating_sub(k), (i + k + 1).min(h));
        for j in 0..w {
            let (c0, c1) = (j.saturating_sub(k), (j + k + 1).min(w));
            let sum = sat[r1 * stride + c1] + sat[r0 * stride + c0]
                - sat[r0 * stride + c1]
                - sat[r1 * stride + c0];
            let count = ((r1 - r0) * (c1 - c0)) as f64;
            values.push(sum as f64 / count);
        }
    }
    FilteredImage {
        width: w,
        height: h,
        max_intensity: slice.max_intensity(),
        values,
    }
}

/// Binary body mask of a slice.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SegmentationMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl SegmentationMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} mask bits for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    /// Builds a mask from rows of `0`/`1` (anything else is foreground).
    pub fn from_rows(rows: &[&[u8]]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == width), "ragged mask rows");
        let bits = rows
            .iter()
            .flat_map(|r| r.iter().map(|&b| b != 0))
            .collect();
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    /// Sub-mask inside `crop` (inclusive bounds).
    pub fn crop(&self, crop: &CropBox) -> Result<Self> {
        crop.check_fits(self.width, self.height)?;
        let (w, h) = (crop.width(), crop.height());
        let mut bits = Vec::with_capacity(w * h);
        for i in crop.x_min..=crop.x_max {
            let start = i * self.width + crop.y_min;
            bits.extend_from_slice(&self.bits[start..start + w]);
        }
        Ok(Self {
            width: w,
            height: h,
            bits,
        })
    }
}

/// Foreground wherever the filtered value reaches `t * max_intensity`.
pub fn threshold_mask(filtered: &FilteredImage, t: f64) -> SegmentationMask {
    let max = filtered.max_intensity as f64;
    let level = t * max - THRESHOLD_SLACK * max;
    SegmentationMask {
        width: filtered.width,
        height: filtered.height,
        bits: filtered.values.iter().map(|&v| v >= level).collect(),
    }
}

/// Inclusive pixel bounds: `x` runs over rows, `y` over columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CropBox {
    pub x_min: usize,
    pub x_max: usize,
    pub y_min: usize,
    pub y_max: usize,
}

impl CropBox {
    pub fn new(x_min: usize, x_max: usize, y_min: usize, y_max: usize) -> Self {
        debug_assert!(x_min <= x_max && y_min <= y_max);
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    /// The box covering a whole `width x height` slice.
    pub fn full(width: usize, height: usize) -> Self {
        Self::new(0, height - 1, 0, width - 1)
    }

    pub fn height(&self) -> usize {
        self.x_max - self.x_min + 1
    }

    pub fn width(&self) -> usize {
        self.y_max - self.y_min + 1
    }

    pub fn area(&self) -> u64 {
        self.height() as u64 * self.width() as u64
    }

    pub fn union(&self, other: &CropBox) -> CropBox {
        CropBox {
            x_min: self.x_min.min(other.x_min),
            x_max: self.x_max.max(other.x_max),
            y_min: self.y_min.min(other.y_min),
            y_max: self.y_max.max(other.y_max),
        }
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.x_min..=self.x_max).contains(&row) && (self.y_min..=self.y_max).contains(&col)
    }

    pub fn check_fits(&self, width: usize, height: usize) -> Result<()> {
        if self.x_min > self.x_max
            || self.y_min > self.y_max
            || self.x_max >= height
            || self.y_max >= width
        {
            return Err(Error::BoxOutOfBounds {
                box_: *self,
                width,
                height,
            });
        }
        Ok(())
    }
}

/// Minimal box around the foreground of `mask`.
pub fn crop_box(mask: &SegmentationMask) -> Result<CropBox> {
    let mut found: Option<CropBox> = None;
    for i in 0..mask.height {
        let row = &mask.bits[i * mask.width..(i + 1) * mask.width];
        let (Some(first), Some(last)) = (row.iter().position(|&b| b), row.iter().rposition(|&b| b))
        else {
            continue;
        };
        let b = CropBox::new(i, i, first, last);
        found = Some(found.map_or(b, |f| f.union(&b)));
    }
    found.ok_or(Error::EmptyMask)
}

/// Filter then threshold one slice.
pub fn slice_mask(slice: &SliceImage, cfg: &SpatialConfig) -> SegmentationMask {
    threshold_mask(
        &low_pass_filter(slice, cfg.kernel_half_width),
        cfg.threshold,
    )
}

/// Segmentation masks of every slice, in slice order.
pub fn scan_masks(volume: &ScanVolume, cfg: &SpatialConfig) -> Vec<SegmentationMask> {
    volume
        .slices()
        .par_iter()
        .map(|s| slice_mask(s, cfg))
        .collect()
}

/// Union of the per-mask boxes; masks without foreground are skipped.
pub fn union_crop_box(masks: &[SegmentationMask]) -> Result<CropBox> {
    masks
        .par_iter()
        .filter_map(|m| crop_box(m).ok())
        .reduce_with(|a, b| a.union(&b))
        .ok_or(Error::AllSlicesEmpty)
}

/// One crop box for the whole scan so every slice keeps the same geometry.
pub fn scan_crop_box(volume: &ScanVolume, cfg: &SpatialConfig) -> Result<CropBox> {
    union_crop_box(&scan_masks(volume, cfg))
}

/// Crops to `crop` and resamples bilinearly to `out_height x out_width`.
///
/// Sample positions use pixel-centre alignment and results are rounded
/// half-up, so a same-size crop is copied exactly.
pub fn apply_crop_and_resize(
    slice: &SliceImage,
    crop: &CropBox,
    out_height: usize,
    out_width: usize,
) -> Result<SliceImage> {
    crop.check_fits(slice.width(), slice.height())?;
    if out_height == 0 || out_width == 0 {
        return Err(Error::InvalidConfig(
            "output size must be at least 1x1".into(),
        ));
    }
    let (ch, cw) = (crop.height(), crop.width());
    let axis = |out_idx: usize, out_len: usize, in_len: usize| -> (usize, usize, f64) {
        let pos = ((out_idx as f64 + 0.5) * in_len as f64 / out_len as f64 - 0.5)
            .clamp(0.0, (in_len - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(in_len - 1);
        (lo, hi, pos - lo as f64)
    };
    let cols: Vec<_> = (0..out_width).map(|j| axis(j, out_width, cw)).collect();
    let mut pixels = Vec::with_capacity(out_height * out_width);
    for i in 0..out_height {
        let (r0, r1, fr) = axis(i, out_height, ch);
        for &(c0, c1, fc) in &cols {
            let p = |r: usize, c: usize| slice.get(crop.x_min + r, crop.y_min + c) as f64;
            let top = p(r0, c0) * (1.0 - fc) + p(r0, c1) * fc;
            let bottom = p(r1, c0) * (1.0 - fc) + p(r1, c1) * fc;
            let v = top * (1.0 - fr) + bottom * fr;
            pixels.push((v + 0.5).floor().clamp(0.0, slice.max_intensity() as f64) as u16);
        }
    }
    SliceImage::new(out_width, out_height, slice.max_intensity(), pixels)
}
