//! Parametric synthetic scans with exact ground truth.
//!
//! Each slice is a dark frame around a bright rounded-square body holding two
//! dark elliptical lungs whose combined area follows a Gaussian curve over
//! the slice index.
//!
//! The binary body/lung layout is smoothed to a fixed point of the binary
//! majority filter of radius `smoothing_radius` before it is rendered. With
//! the body drawn at twice the segmentation threshold, a uniform low-pass
//! filter of that radius followed by thresholding reproduces the layout
//! pixel for pixel, which is what makes the crop box and hole counts exact
//! ground truth. The majority filter here counts neighbours directly and
//! shares no code with the spatial module.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::CropBox;
use crate::volume::{ScanVolume, SliceImage};

/// Smoothing passes after which generation gives up.
const MAX_SMOOTHING_PASSES: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScanSpec {
    pub num_slices: usize,
    /// Side of the square slices.
    pub image_size: usize,
    /// Width of the background frame around the body.
    pub body_margin: usize,
    /// Combined area of both lungs on the central slice, in pixels.
    pub lung_area_peak: u64,
    /// Standard deviation of the lung-area curve as a fraction of `num_slices`.
    pub lung_area_curve: f64,
    /// Uniform noise in `[-a, a]` added to every pixel.
    pub noise_amplitude: u16,
    pub seed: u64,
    /// 8 or 16.
    pub bit_depth: u8,
    /// Body intensity as a fraction of the max intensity.
    pub body_intensity: f64,
    /// Filter half width the layout is made stable for.
    pub smoothing_radius: usize,
}

impl Default for SyntheticScanSpec {
    fn default() -> Self {
        Self {
            num_slices: 40,
            image_size: 100,
            body_margin: 10,
            lung_area_peak: 1200,
            lung_area_curve: 0.2,
            noise_amplitude: 0,
            seed: 0,
            bit_depth: 8,
            body_intensity: 0.2,
            smoothing_radius: 2,
        }
    }
}

impl SyntheticScanSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.num_slices == 0 {
            return bad("num_slices must be at least 1".into());
        }
        if self.body_margin * 2 >= self.image_size {
            return bad(format!(
                "body_margin {} leaves no body inside a {} pixel slice",
                self.body_margin, self.image_size
            ));
        }
        if self.bit_depth != 8 && self.bit_depth != 16 {
            return bad(format!("bit_depth must be 8 or 16, got {}", self.bit_depth));
        }
        if !(self.body_intensity > 0.0 && self.body_intensity <= 1.0) {
            return bad(format!(
                "body_intensity must lie in (0, 1], got {}",
                self.body_intensity
            ));
        }
        if !(self.lung_area_curve.is_finite() && self.lung_area_curve > 0.0) {
            return bad(format!(
                "lung_area_curve must be positive, got {}",
                self.lung_area_curve
            ));
        }
        Ok(())
    }

    pub fn max_intensity(&self) -> u16 {
        if self.bit_depth == 8 {
            u8::MAX as u16
        } else {
            u16::MAX
        }
    }

    /// Target combined lung area of slice `i` before quantization to a
    /// renderable lung size.
    pub fn target_area(&self, i: usize) -> f64 {
        let centre = (self.num_slices as f64 - 1.0) / 2.0;
        let sigma = self.lung_area_curve * self.num_slices as f64;
        let d = i as f64 - centre;
        self.lung_area_peak as f64 * (-d * d / (2.0 * sigma * sigma)).exp()
    }
}

/// Exact geometry of a generated scan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Body bounding box of each slice.
    pub crop_boxes: Vec<CropBox>,
    /// Enclosed lung pixels of each slice.
    pub lung_areas: Vec<u64>,
}

impl GroundTruth {
    pub fn scan_box(&self) -> CropBox {
        self.crop_boxes
            .iter()
            .copied()
            .reduce(|a, b| a.union(&b))
            .expect("at least one slice")
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScan {
    pub volume: ScanVolume,
    pub truth: GroundTruth,
}

/// Row-major binary raster used while laying out a slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    pub rows: usize,
    pub cols: usize,
    pub on: Vec<bool>,
}

impl Layout {
    fn new(rows: usize, cols: usize, value: bool) -> Self {
        Self {
            rows,
            cols,
            on: vec![value; rows * cols],
        }
    }

    fn at(&self, r: usize, c: usize) -> bool {
        self.on[r * self.cols + c]
    }

    /// One pass of the binary majority filter: a pixel is on when at least
    /// half of its in-bounds `(2r+1)^2` neighbourhood is on.
    pub(crate) fn majority(&self, radius: usize) -> Layout {
        let mut out = Layout::new(self.rows, self.cols, false);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let (mut on, mut n) = (0usize, 0usize);
                for r in i.saturating_sub(radius)..(i + radius + 1).min(self.rows) {
                    for c in j.saturating_sub(radius)..(j + radius + 1).min(self.cols) {
                        n += 1;
                        on += self.at(r, c) as usize;
                    }
                }
                out.on[i * self.cols + j] = 2 * on >= n;
            }
        }
        out
    }

    fn smooth_to_root(mut self, radius: usize) -> Result<Layout> {
        if radius == 0 {
            return Ok(self);
        }
        for _ in 0..MAX_SMOOTHING_PASSES {
            let next = self.majority(radius);
            if next == self {
                return Ok(self);
            }
            self = next;
        }
        Err(Error::InvalidSpec(
            "layout did not settle under smoothing".into(),
        ))
    }

    fn bounding_box(&self) -> Option<CropBox> {
        let mut b: Option<CropBox> = None;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if self.at(i, j) {
                    let p = CropBox::new(i, i, j, j);
                    b = Some(b.map_or(p, |q| q.union(&p)));
                }
            }
        }
        b
    }
}

/// A stable lung shape: `holes` marks lung pixels in a patch centred on the
/// lung centre.
#[derive(Debug, Clone)]
struct LungShape {
    area: u64,
    half_rows: usize,
    half_cols: usize,
    holes: Layout,
}

/// Lung shapes depend only on size and radius, so they are shared across scans.
fn cached_lung_shape(semi_minor: f64, radius: usize) -> Result<Arc<LungShape>> {
    type ShapeCache = Mutex<HashMap<(u64, usize), Arc<LungShape>>>;
    static CACHE: OnceLock<ShapeCache> = OnceLock::new();
    let key = (semi_minor.to_bits(), radius);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(s) = cache.lock().expect("shape cache").get(&key) {
        return Ok(s.clone());
    }
    let shape = Arc::new(lung_shape(semi_minor, radius)?);
    cache
        .lock()
        .expect("shape cache")
        .insert(key, shape.clone());
    Ok(shape)
}

fn lung_shape(semi_minor: f64, radius: usize) -> Result<LungShape> {
    let semi_major = 2.0 * semi_minor;
    let (half_rows, half_cols) = (semi_major.floor() as usize, semi_minor.floor() as usize);
    let pad = 2 * radius + 2;
    let (rows, cols) = (2 * (half_rows + pad) + 1, 2 * (half_cols + pad) + 1);
    let (cr, cc) = (rows / 2, cols / 2);
    let mut body = Layout::new(rows, cols, true);
    for i in 0..rows {
        for j in 0..cols {
            let di = (i as f64 - cr as f64) / semi_major;
            let dj = (j as f64 - cc as f64) / semi_minor;
            if di * di + dj * dj <= 1.0 {
                body.on[i * cols + j] = false;
            }
        }
    }
    let root = body.smooth_to_root(radius)?;
    let holes = Layout {
        rows,
        cols,
        on: root.on.iter().map(|&b| !b).collect(),
    };
    let area = holes.on.iter().filter(|&&h| h).count() as u64;
    Ok(LungShape {
        area,
        half_rows: half_rows + pad,
        half_cols: half_cols + pad,
        holes,
    })
}

struct Geometry {
    body: Layout,
    body_box: CropBox,
    left_centre: (usize, usize),
    right_centre: (usize, usize),
    /// Renderable lung shapes in increasing size.
    shapes: Vec<Arc<LungShape>>,
}

fn rounded_square_body(spec: &SyntheticScanSpec) -> Layout {
    let n = spec.image_size;
    let side = n - 2 * spec.body_margin;
    let cut = side / 4;
    let mut body = Layout::new(n, n, false);
    for u in 0..side {
        for v in 0..side {
            let du = u.min(side - 1 - u);
            let dv = v.min(side - 1 - v);
            if du + dv >= cut {
                body.on[(u + spec.body_margin) * n + v + spec.body_margin] = true;
            }
        }
    }
    body
}

fn geometry(spec: &SyntheticScanSpec) -> Result<Geometry> {
    let radius = spec.smoothing_radius;
    let body = rounded_square_body(spec).smooth_to_root(radius)?;
    let body_box = body
        .bounding_box()
        .ok_or_else(|| Error::InvalidSpec("body vanishes under smoothing".into()))?;
    let n = spec.image_size;
    let wall = 2 * radius + 2;
    let centre = n / 2;

    // both lungs plus their walls must sit on body pixels
    let placement = |shape: &LungShape| -> Option<((usize, usize), (usize, usize))> {
        let inner = shape.half_cols - (2 * radius + 2);
        let offset = inner + wall / 2 + 1;
        let left = (centre, centre.checked_sub(offset)?);
        let right = (centre, centre + offset);
        let lung_rows = shape.half_rows - (2 * radius + 2);
        for &(r, c) in &[left, right] {
            let (r0, r1) = (r.checked_sub(lung_rows + wall)?, r + lung_rows + wall);
            let (c0, c1) = (c.checked_sub(inner + wall)?, c + inner + wall);
            if r1 >= n || c1 >= n {
                return None;
            }
            for i in r0..=r1 {
                for j in c0..=c1 {
                    if !body.at(i, j) {
                        return None;
                    }
                }
            }
        }
        Some((left, right))
    };

    let mut shapes = Vec::new();
    let mut centres = None;
    let mut semi_minor = 1.0;
    loop {
        let shape = cached_lung_shape(semi_minor, radius)?;
        let Some(c) = placement(&shape) else { break };
        if shape.area > 0
            && shapes
                .last()
                .is_none_or(|s: &Arc<LungShape>| s.area != shape.area)
        {
            centres = Some(c);
            shapes.push(shape);
        }
        semi_minor += 0.25;
    }
    // every shape shares the centres of the largest one that fits
    let (left_centre, right_centre) = centres.unwrap_or(((centre, centre), (centre, centre)));
    Ok(Geometry {
        body,
        body_box,
        left_centre,
        right_centre,
        shapes,
    })
}

fn stamp(layout: &mut Layout, shape: &LungShape, centre: (usize, usize)) -> u64 {
    let (r0, c0) = (centre.0 - shape.half_rows, centre.1 - shape.half_cols);
    let mut carved = 0;
    for i in 0..shape.holes.rows {
        for j in 0..shape.holes.cols {
            if shape.holes.at(i, j) {
                layout.on[(r0 + i) * layout.cols + c0 + j] = false;
                carved += 1;
            }
        }
    }
    carved
}

/// Builds a scan and its exact ground truth. Deterministic in `spec.seed`.
pub fn generate_synthetic_scan(spec: &SyntheticScanSpec, scan_id: &str) -> Result<SyntheticScan> {
    spec.validate()?;
    let geo = geometry(spec)?;
    let largest = geo.shapes.last().map_or(0, |s| s.area);
    if spec.lung_area_peak > 0 && (spec.lung_area_peak as f64 / 2.0) > largest as f64 * 1.05 {
        return Err(Error::InvalidSpec(format!(
            "lung_area_peak {} does not fit inside the body (at most {} per scan)",
            spec.lung_area_peak,
            2 * largest
        )));
    }
    let max = spec.max_intensity();
    let level = (spec.body_intensity * max as f64).round() as i64;
    let amp = spec.noise_amplitude as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut slices = Vec::with_capacity(spec.num_slices);
    let mut truth = GroundTruth {
        crop_boxes: Vec::with_capacity(spec.num_slices),
        lung_areas: Vec::with_capacity(spec.num_slices),
    };
    for i in 0..spec.num_slices {
        let per_lung = spec.target_area(i) / 2.0;
        // closest renderable size; no lungs at all when that is nearer
        let shape = geo
            .shapes
            .iter()
            .min_by(|a, b| {
                (a.area as f64 - per_lung)
                    .abs()
                    .total_cmp(&(b.area as f64 - per_lung).abs())
            })
            .filter(|s| (s.area as f64 - per_lung).abs() < per_lung);
        let mut layout = geo.body.clone();
        let area = match shape {
            Some(s) => {
                stamp(&mut layout, s, geo.left_centre) + stamp(&mut layout, s, geo.right_centre)
            }
            None => 0,
        };
        let pixels = layout
            .on
            .iter()
            .map(|&on| {
                let base = if on { level } else { 0 };
                let noise = if amp > 0 {
                    rng.random_range(-amp..=amp)
                } else {
                    0
                };
                (base + noise).clamp(0, max as i64) as u16
            })
            .collect();
        slices.push(SliceImage::new(
            spec.image_size,
            spec.image_size,
            max,
            pixels,
        )?);
        truth.crop_boxes.push(geo.body_box);
        truth.lung_areas.push(area);
    }
    let indices = (0..spec.num_slices as u64).collect();
    Ok(SyntheticScan {
        volume: ScanVolume::new(scan_id, slices, indices)?,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(volume: &ScanVolume, i: usize) -> Layout {
        let s = &volume.slices()[i];
        Layout {
            rows: s.height(),
            cols: s.width(),
            on: s.pixels().iter().map(|&p| p > 0).collect(),
        }
    }

    #[test]
    fn margin_ten_box() {
        let spec = SyntheticScanSpec {
            num_slices: 1,
            image_size: 100,
            body_margin: 10,
            ..Default::default()
        };
        let scan = generate_synthetic_scan(&spec, "s").unwrap();
        assert_eq!(scan.truth.crop_boxes, vec![CropBox::new(10, 89, 10, 89)]);
        assert!(scan.truth.lung_areas[0] > 0);
    }

    #[test]
    fn peaked_three_slice_profile() {
        let spec = SyntheticScanSpec {
            num_slices: 3,
            lung_area_curve: 0.1,
            ..Default::default()
        };
        let scan = generate_synthetic_scan(&spec, "s").unwrap();
        let a = &scan.truth.lung_areas;
        assert_eq!(a[0], 0);
        assert_eq!(a[2], 0);
        assert!(a[1] > 0);
    }

    #[test]
    fn deterministic_for_seed() {
        let spec = SyntheticScanSpec {
            num_slices: 5,
            noise_amplitude: 6,
            seed: 17,
            ..Default::default()
        };
        let a = generate_synthetic_scan(&spec, "s").unwrap();
        let b = generate_synthetic_scan(&spec, "s").unwrap();
        assert_eq!(a.volume, b.volume);
        assert_eq!(a.truth, b.truth);
        let c = generate_synthetic_scan(&SyntheticScanSpec { seed: 18, ..spec }, "s").unwrap();
        assert_ne!(a.volume, c.volume);
    }

    #[test]
    fn layout_is_a_smoothing_fixed_point() {
        for radius in 0..=2 {
            let spec = SyntheticScanSpec {
                num_slices: 9,
                smoothing_radius: radius,
                ..Default::default()
            };
            let scan = generate_synthetic_scan(&spec, "s").unwrap();
            for i in 0..spec.num_slices {
                let l = binary(&scan.volume, i);
                if radius > 0 {
                    assert_eq!(l.majority(radius), l);
                }
            }
        }
    }

    #[test]
    fn areas_follow_the_curve() {
        let spec = SyntheticScanSpec {
            num_slices: 41,
            ..Default::default()
        };
        let scan = generate_synthetic_scan(&spec, "s").unwrap();
        let a = &scan.truth.lung_areas;
        let peak = a
            .iter()
            .copied()
            .enumerate()
            .max_by_key(|&(_, v)| v)
            .unwrap()
            .0;
        assert_eq!(a[peak], a[20]);
        assert!((a[20] as f64 - 1200.0).abs() / 1200.0 < 0.1);
        assert!(a[..20].windows(2).all(|w| w[0] <= w[1]));
        assert!(a[20..].windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn sixteen_bit_levels() {
        let spec = SyntheticScanSpec {
            num_slices: 1,
            bit_depth: 16,
            ..Default::default()
        };
        let scan = generate_synthetic_scan(&spec, "s").unwrap();
        assert_eq!(scan.volume.max_intensity(), u16::MAX);
        assert_eq!(
            *scan.volume.slices()[0].pixels().iter().max().unwrap(),
            13107
        );
    }

    #[test]
    fn invalid_specs() {
        let base = SyntheticScanSpec::default();
        for bad in [
            SyntheticScanSpec {
                body_margin: 50,
                ..base.clone()
            },
            SyntheticScanSpec {
                num_slices: 0,
                ..base.clone()
            },
            SyntheticScanSpec {
                bit_depth: 12,
                ..base.clone()
            },
            SyntheticScanSpec {
                lung_area_peak: 100_000,
                ..base.clone()
            },
        ] {
            assert!(
                matches!(
                    generate_synthetic_scan(&bad, "s"),
                    Err(Error::InvalidSpec(_))
                ),
                "{bad:?}"
            );
        }
    }
}
