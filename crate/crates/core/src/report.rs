//! Per-scan manifests and the corpus redundancy report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::kds::Strategy;
use crate::slice::SelectionWindow;
use crate::spatial::CropBox;

/// Name of the group covering every successfully processed scan.
pub const TOTAL_GROUP: &str = "total";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
    pub num_slices: usize,
}

/// Everything a downstream consumer needs to reproduce a scan's selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanManifest {
    pub scan_id: String,
    pub original_dims: Dims,
    pub crop_box: CropBox,
    pub window: SelectionWindow,
    /// Positions in slice order (0-based), sorted.
    pub sampled_indices: Vec<usize>,
    pub strategy: Strategy,
    /// Run seed; the sampler stream is derived from it and the scan id.
    pub seed: u64,
    /// Lung area of every slice.
    pub areas: Vec<u64>,
}

impl ScanManifest {
    pub fn spatial_area_before(&self) -> f64 {
        (self.original_dims.width * self.original_dims.height) as f64
    }

    pub fn spatial_area_after(&self) -> f64 {
        self.crop_box.area() as f64
    }

    pub fn slice_len_before(&self) -> f64 {
        self.original_dims.num_slices as f64
    }

    pub fn slice_len_after(&self) -> f64 {
        self.window.len() as f64
    }

    /// Checks the manifest's internal consistency.
    pub fn is_consistent(&self) -> bool {
        let d = &self.original_dims;
        self.crop_box.check_fits(d.width, d.height).is_ok()
            && self.window.e < d.num_slices
            && self.areas.len() == d.num_slices
            && self.sampled_indices.windows(2).all(|p| p[0] < p[1])
            && self
                .sampled_indices
                .iter()
                .all(|&i| self.window.contains(i))
    }
}

/// Reduction of one group of scans.
///
/// Before/after quantities are group means; each delta is
/// `1 - mean(after) / mean(before)`, i.e. means are taken first and the
/// ratio second. For a corpus whose scans share one geometry the identity
/// `1 - total = (1 - spatial) * (1 - slice)` then holds exactly; with
/// mixed geometries it holds only approximately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReduction {
    pub group: String,
    pub scans: usize,
    pub spatial_area_before: f64,
    pub spatial_area_after: f64,
    pub spatial_delta: f64,
    pub slice_len_before: f64,
    pub slice_len_after: f64,
    pub slice_delta: f64,
    pub product_before: f64,
    pub product_after: f64,
    pub total_delta: f64,
}

impl GroupReduction {
    pub fn from_manifests<'a>(
        group: &str,
        manifests: impl IntoIterator<Item = &'a ScanManifest>,
    ) -> Option<Self> {
        let (mut n, mut ab, mut aa, mut lb, mut la, mut pb, mut pa) =
            (0usize, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for m in manifests {
            n += 1;
            ab += m.spatial_area_before();
            aa += m.spatial_area_after();
            lb += m.slice_len_before();
            la += m.slice_len_after();
            pb += m.spatial_area_before() * m.slice_len_before();
            pa += m.spatial_area_after() * m.slice_len_after();
        }
        if n == 0 {
            return None;
        }
        let k = n as f64;
        let (ab, aa, lb, la, pb, pa) = (ab / k, aa / k, lb / k, la / k, pb / k, pa / k);
        Some(Self {
            group: group.to_string(),
            scans: n,
            spatial_area_before: ab,
            spatial_area_after: aa,
            spatial_delta: 1.0 - aa / ab,
            slice_len_before: lb,
            slice_len_after: la,
            slice_delta: 1.0 - la / lb,
            product_before: pb,
            product_after: pa,
            total_delta: 1.0 - pa / pb,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyReport {
    /// Label groups in name order, then the corpus total.
    pub groups: Vec<GroupReduction>,
}

impl RedundancyReport {
    /// `labels` maps scan ids to group names; unlabeled scans only count
    /// towards the total.
    pub fn build(manifests: &[ScanManifest], labels: Option<&BTreeMap<String, String>>) -> Self {
        let mut groups = Vec::new();
        if let Some(labels) = labels {
            let mut by_label: BTreeMap<&str, Vec<&ScanManifest>> = BTreeMap::new();
            for m in manifests {
                if let Some(l) = labels.get(&m.scan_id) {
                    by_label.entry(l.as_str()).or_default().push(m);
                }
            }
            for (label, ms) in by_label {
                groups.extend(GroupReduction::from_manifests(label, ms));
            }
        }
        groups.extend(GroupReduction::from_manifests(TOTAL_GROUP, manifests));
        Self { groups }
    }

    pub fn total(&self) -> Option<&GroupReduction> {
        self.groups.iter().find(|g| g.group == TOTAL_GROUP)
    }

    /// Plain-text table: spatial area in thousands of pixels, products in
    /// millions of pixel-slices, deltas as fractions with four decimals.
    pub fn render(&self) -> String {
        let mut s = format!(
            "{:<16} {:>5} | {:>28} | {:>26} | {:>26}\n",
            "", "", "Spatial Area (K)", "Slice Length", "Spatial x Slice (M)"
        );
        s += &format!(
            "{:<16} {:>5} | {:>9} {:>9} {:>8} | {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8}\n",
            "group",
            "scans",
            "before",
            "after",
            "delta",
            "before",
            "after",
            "delta",
            "before",
            "after",
            "delta"
        );
        for g in &self.groups {
            s += &format!(
                "{:<16} {:>5} | {:>9.2} {:>9.2} {:>8.4} | {:>8.2} {:>8.2} {:>8.4} | {:>8.2} {:>8.2} {:>8.4}\n",
                g.group,
                g.scans,
                g.spatial_area_before / 1e3,
                g.spatial_area_after / 1e3,
                g.spatial_delta,
                g.slice_len_before,
                g.slice_len_after,
                g.slice_delta,
                g.product_before / 1e6,
                g.product_after / 1e6,
                g.total_delta,
            );
        }
        s
    }
}
