//! Slice region of interest: enclosed-cavity (lung) area per slice and the
//! contiguous slice window that carries the most of it.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{scan_masks, union_crop_box, CropBox, SegmentationMask, SpatialConfig};
use crate::volume::ScanVolume;

/// Parameters of the slice step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceConfig {
    /// Fraction of the scan's slices that bounds the window: `n_c = ceil(f * n)`.
    pub window_fraction: f64,
    /// Share of the scan's total lung area the window should cover.
    pub alpha: f64,
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self {
            window_fraction: 0.5,
            alpha: 0.7,
        }
    }
}

impl SliceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "slice.window_fraction must lie in (0, 1], got {}",
                self.window_fraction
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "slice.alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// The bound `n_c` on `e - s` for a scan of `num_slices` slices.
    pub fn max_index_span(&self, num_slices: usize) -> usize {
        (self.window_fraction * num_slices as f64).ceil() as usize
    }

    /// Number of slices in a maximal window: `n_c + 1`, capped by the scan length.
    pub fn window_len(&self, num_slices: usize) -> usize {
        (self.max_index_span(num_slices) + 1).min(num_slices)
    }
}

/// Lung area of each slice, in slice order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AreaProfile {
    pub scan_id: String,
    pub areas: Vec<u64>,
}

impl AreaProfile {
    pub fn new(scan_id: impl Into<String>, areas: Vec<u64>) -> Self {
        Self {
            scan_id: scan_id.into(),
            areas,
        }
    }

    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.areas.iter().sum()
    }
}

/// Contiguous slice range `[s, e]`, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionWindow {
    pub s: usize,
    pub e: usize,
    pub area_sum: u64,
    pub area_fraction: f64,
    pub alpha_satisfied: bool,
}

impl SelectionWindow {
    pub fn len(&self) -> usize {
        self.e - self.s + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.s..=self.e).contains(&index)
    }
}

/// Fills every background region that cannot reach the mask border through
/// 4-connected background pixels.
pub fn fill_holes(mask: &SegmentationMask) -> SegmentationMask {
    let (w, h) = (mask.width(), mask.height());
    let bits = mask.bits();
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    let seed = |idx: usize, outside: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
        if !bits[idx] && !outside[idx] {
            outside[idx] = true;
            queue.push_back(idx);
        }
    };
    for j in 0..w {
        seed(j, &mut outside, &mut queue);
        seed((h - 1) * w + j, &mut outside, &mut queue);
    }
    for i in 0..h {
        seed(i * w, &mut outside, &mut queue);
        seed(i * w + w - 1, &mut outside, &mut queue);
    }
    while let Some(idx) = queue.pop_front() {
        let (i, j) = (idx / w, idx % w);
        if i > 0 {
            seed(idx - w, &mut outside, &mut queue);
        }
        if i + 1 < h {
            seed(idx + w, &mut outside, &mut queue);
        }
        if j > 0 {
            seed(idx - 1, &mut outside, &mut queue);
        }
        if j + 1 < w {
            seed(idx + 1, &mut outside, &mut queue);
        }
    }
    let filled = outside.into_iter().map(|o| !o).collect();
    SegmentationMask::new(w, h, filled).expect("same geometry")
}

/// Number of enclosed background pixels: `sum(filled) - sum(mask)`.
pub fn lung_area(mask: &SegmentationMask) -> u64 {
    fill_holes(mask).count_ones() - mask.count_ones()
}

/// Lung areas of already segmented slices inside the scan crop box.
pub fn areas_in_box(masks: &[SegmentationMask], crop: &CropBox) -> Result<Vec<u64>> {
    masks
        .par_iter()
        .map(|m| Ok(lung_area(&m.crop(crop)?)))
        .collect()
}

/// The scan crop box together with the lung-area profile inside it.
pub fn crop_and_profile(
    volume: &ScanVolume,
    cfg: &SpatialConfig,
) -> Result<(CropBox, AreaProfile)> {
    let masks = scan_masks(volume, cfg);
    let crop = union_crop_box(&masks)?;
    let areas = areas_in_box(&masks, &crop)?;
    Ok((crop, AreaProfile::new(volume.scan_id(), areas)))
}

/// Per slice: filter, threshold, crop to the scan box, fill and count the
/// enclosed area. Blank slices contribute 0.
pub fn area_profile(volume: &ScanVolume, cfg: &SpatialConfig) -> Result<AreaProfile> {
    crop_and_profile(volume, cfg).map(|(_, p)| p)
}

/// Picks the contiguous window of at most `n_c + 1` slices with the largest
/// lung area; ties go to the smallest start.
///
/// Areas are non-negative, so some optimal window always has the maximal
/// allowed length and a single sliding pass finds it.
pub fn select_window(profile: &AreaProfile, cfg: &SliceConfig) -> Result<SelectionWindow> {
    let areas = &profile.areas;
    if areas.is_empty() {
        return Err(Error::EmptyProfile);
    }
    let len = cfg.window_len(areas.len());
    let mut sum: u64 = areas[..len].iter().sum();
    let (mut best_s, mut best_sum) = (0, sum);
    for s in 1..=areas.len() - len {
        sum = sum - areas[s - 1] + areas[s + len - 1];
        if sum > best_sum {
            best_s = s;
            best_sum = sum;
        }
    }
    let total = profile.total();
    let area_fraction = if total > 0 {
        best_sum as f64 / total as f64
    } else {
        0.0
    };
    Ok(SelectionWindow {
        s: best_s,
        e: best_s + len - 1,
        area_sum: best_sum,
        area_fraction,
        alpha_satisfied: total > 0 && area_fraction >= cfg.alpha,
    })
}
