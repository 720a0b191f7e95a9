//! Kernel-density slice sampling.
//!
//! The density lives on the slice-index axis of the selected window: each
//! slice contributes a Gaussian kernel at its index, weighted by its lung
//! area. The window is cut at the density's `j/m` percentiles into `m`
//! sub-intervals of equal probability and one slice is drawn from each,
//! with probability proportional to the density at the candidate index.
//! Random and systematic sampling are provided as baselines.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded_rng, SampleRng};
use crate::slice::{AreaProfile, SelectionWindow};

/// Bandwidth used when the weighted positions have no spread.
pub const FALLBACK_BANDWIDTH: f64 = 1.0;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Kds,
    Random,
    Systematic,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Kds, Strategy::Random, Strategy::Systematic];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Kds => "kds",
            Strategy::Random => "random",
            Strategy::Systematic => "systematic",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown strategy {s:?} (expected kds, random or systematic)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthRule {
    Scott,
}

impl FromStr for BandwidthRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scott" => Ok(BandwidthRule::Scott),
            _ => Err(Error::InvalidConfig(format!(
                "unknown bandwidth rule {s:?} (expected scott)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KdsConfig {
    pub num_samples: usize,
    /// Number of evaluation points of the density over the window.
    pub grid_size: usize,
    pub bandwidth_rule: BandwidthRule,
}

impl Default for KdsConfig {
    fn default() -> Self {
        Self {
            num_samples: 16,
            grid_size: 100,
            bandwidth_rule: BandwidthRule::Scott,
        }
    }
}

impl KdsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_samples == 0 {
            return Err(Error::InvalidConfig(
                "kds.num_samples must be at least 1".into(),
            ));
        }
        if self.grid_size < 2 {
            return Err(Error::InvalidConfig(
                "kds.grid_size must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

fn check_weights(positions: &[f64], weights: &[f64]) -> Result<f64> {
    if positions.is_empty() {
        return Err(Error::NoData);
    }
    if positions.len() != weights.len() {
        return Err(Error::InvalidConfig(format!(
            "{} positions but {} weights",
            positions.len(),
            weights.len()
        )));
    }
    if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidWeight(w));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllZeroWeights);
    }
    Ok(total)
}

/// Scott's rule for weighted data: `sigma_w * n_eff^(-1/5)` with the
/// weighted standard deviation and the effective sample size
/// `(sum w)^2 / sum w^2`.
pub fn scott_bandwidth(positions: &[f64], weights: &[f64]) -> Result<f64> {
    let total = check_weights(positions, weights)?;
    let mean = positions
        .iter()
        .zip(weights)
        .map(|(x, w)| x * w)
        .sum::<f64>()
        / total;
    let var = positions
        .iter()
        .zip(weights)
        .map(|(x, w)| w * (x - mean) * (x - mean))
        .sum::<f64>()
        / total;
    let sigma = var.sqrt();
    if sigma == 0.0 || !sigma.is_finite() {
        return Ok(FALLBACK_BANDWIDTH);
    }
    let n_eff = total * total / weights.iter().map(|w| w * w).sum::<f64>();
    Ok(sigma * n_eff.powf(-0.2))
}

/// Weighted Gaussian KDE tabulated on an even grid, with its CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityModel {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub cdf: Vec<f64>,
    positions: Vec<f64>,
    weights: Vec<f64>,
    /// Trapezoidal mass of the raw estimate over the grid.
    mass: f64,
}

impl DensityModel {
    fn raw(&self, x: f64) -> f64 {
        raw_density(&self.positions, &self.weights, self.bandwidth, x)
    }

    /// Density at an arbitrary position, on the same normalization as `density`.
    pub fn evaluate(&self, x: f64) -> f64 {
        self.raw(x) / self.mass
    }

    pub fn start(&self) -> f64 {
        self.grid[0]
    }

    pub fn end(&self) -> f64 {
        *self.grid.last().expect("grid has at least two points")
    }

    pub fn step(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    /// Trapezoidal integral of the tabulated density.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.density, self.step())
    }

    pub fn percentile(&self, p: f64) -> Result<f64> {
        percentile(self, p)
    }
}

/// `sum_i w_i K((x - x_i)/h) / (h sum_i w_i)` with the unit-mass Gaussian `K`.
fn raw_density(positions: &[f64], weights: &[f64], h: f64, x: f64) -> f64 {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (xi, wi) in positions.iter().zip(weights) {
        let u = (x - xi) / h;
        acc += wi * (-0.5 * u * u).exp();
    }
    acc * INV_SQRT_2PI / (h * total)
}

fn trapezoid(values: &[f64], step: f64) -> f64 {
    values.windows(2).map(|p| 0.5 * (p[0] + p[1]) * step).sum()
}

/// Tabulates the weighted KDE on `grid_size` evenly spaced points over
/// `span` and renormalizes it to unit trapezoidal mass there.
pub fn estimate_density(
    positions: &[f64],
    weights: &[f64],
    bandwidth: f64,
    span: (f64, f64),
    grid_size: usize,
) -> Result<DensityModel> {
    let total = check_weights(positions, weights)?;
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::InvalidBandwidth(bandwidth));
    }
    let (lo, hi) = span;
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(Error::EmptySpan(lo, hi));
    }
    if grid_size < 2 {
        return Err(Error::InvalidConfig("grid_size must be at least 2".into()));
    }
    let step = (hi - lo) / (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size)
        .map(|k| {
            if k + 1 == grid_size {
                hi
            } else {
                lo + step * k as f64
            }
        })
        .collect();

    // accumulate kernel by kernel over the whole grid
    let mut raw = vec![0.0; grid_size];
    for (xi, wi) in positions.iter().zip(weights) {
        if *wi == 0.0 {
            continue;
        }
        for (r, g) in raw.iter_mut().zip(&grid) {
            let u = (g - xi) / bandwidth;
            *r += wi * (-0.5 * u * u).exp();
        }
    }
    let scale = INV_SQRT_2PI / (bandwidth * total);
    raw.iter_mut().for_each(|r| *r *= scale);

    let mass = trapezoid(&raw, step);
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::InvalidBandwidth(bandwidth));
    }
    let density: Vec<f64> = raw.iter().map(|r| r / mass).collect();

    let mut cdf = Vec::with_capacity(grid_size);
    let mut acc = 0.0;
    cdf.push(0.0);
    for p in density.windows(2) {
        acc += 0.5 * (p[0] + p[1]) * step;
        cdf.push(acc);
    }
    let last = acc;
    cdf.iter_mut().for_each(|c| *c /= last);
    *cdf.last_mut().expect("non-empty") = 1.0;

    Ok(DensityModel {
        grid,
        density,
        bandwidth,
        cdf,
        positions: positions.to_vec(),
        weights: weights.to_vec(),
        mass,
    })
}

/// Position `q` with `F(q) = p`, by linear interpolation of the tabulated CDF.
pub fn percentile(model: &DensityModel, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    if p == 0.0 {
        return Ok(model.start());
    }
    if p == 1.0 {
        return Ok(model.end());
    }
    let k = model.cdf.partition_point(|&c| c < p).max(1);
    let (c0, c1) = (model.cdf[k - 1], model.cdf[k]);
    let (g0, g1) = (model.grid[k - 1], model.grid[k]);
    if c1 <= c0 {
        return Ok(g1);
    }
    Ok(g0 + (p - c0) / (c1 - c0) * (g1 - g0))
}

/// Slices drawn from a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub scan_id: String,
    pub window: SelectionWindow,
    /// Sorted positions in the scan's slice order.
    pub indices: Vec<usize>,
    pub strategy: Strategy,
    pub seed: u64,
}

/// How a stratified draw was made: the interval cut points and the slice
/// assigned to each interval.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedDraw {
    /// `m + 1` increasing cut points from the window start to its end.
    pub cuts: Vec<f64>,
    /// Slice assigned to each of the `m` intervals.
    pub picks: Vec<usize>,
    /// Whether the pick was taken from outside its interval because the
    /// interval held no unclaimed slice.
    pub stolen: Vec<bool>,
}

impl StratifiedDraw {
    pub fn intervals(&self) -> usize {
        self.picks.len()
    }

    /// Interval `j` is half open except for the last one, which ends at the
    /// window end inclusively.
    pub fn interval_contains(&self, j: usize, index: usize) -> bool {
        let x = index as f64;
        let last = j + 2 == self.cuts.len();
        x >= self.cuts[j] && (x < self.cuts[j + 1] || (last && x <= self.cuts[j + 1]))
    }

    pub fn members(&self, j: usize, window: &SelectionWindow) -> Vec<usize> {
        (window.s..=window.e)
            .filter(|&i| self.interval_contains(j, i))
            .collect()
    }

    pub fn sorted_indices(&self) -> Vec<usize> {
        let mut v = self.picks.clone();
        v.sort_unstable();
        v
    }
}

fn distance_to_interval(index: usize, lo: f64, hi: f64) -> f64 {
    let x = index as f64;
    if x < lo {
        lo - x
    } else if x > hi {
        x - hi
    } else {
        0.0
    }
}

/// One slice per interval. Non-empty intervals draw from their own members
/// through `draw`; empty ones then take the nearest unclaimed slice.
fn stratify(
    window: &SelectionWindow,
    cuts: Vec<f64>,
    rng: &mut SampleRng,
    mut draw: impl FnMut(&[usize], &mut SampleRng) -> usize,
) -> StratifiedDraw {
    let m = cuts.len() - 1;
    let mut plan = StratifiedDraw {
        cuts,
        picks: vec![usize::MAX; m],
        stolen: vec![false; m],
    };
    let mut claimed = vec![false; window.len()];
    let mut empty = Vec::new();
    for j in 0..m {
        let members = plan.members(j, window);
        if members.is_empty() {
            empty.push(j);
            continue;
        }
        let pick = draw(&members, rng);
        claimed[pick - window.s] = true;
        plan.picks[j] = pick;
    }
    for j in empty {
        let (lo, hi) = (plan.cuts[j], plan.cuts[j + 1]);
        let pick = (window.s..=window.e)
            .filter(|&i| !claimed[i - window.s])
            .min_by(|&a, &b| {
                distance_to_interval(a, lo, hi).total_cmp(&distance_to_interval(b, lo, hi))
            })
            .expect("fewer intervals than slices");
        claimed[pick - window.s] = true;
        plan.picks[j] = pick;
        plan.stolen[j] = true;
    }
    plan
}

/// Draws one member with probability proportional to `weight`.
fn weighted_pick(members: &[usize], weight: impl Fn(usize) -> f64, rng: &mut SampleRng) -> usize {
    let weights: Vec<f64> = members.iter().map(|&i| weight(i).max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return members[rng.random_range(0..members.len())];
    }
    let mut u = rng.random::<f64>() * total;
    for (&i, w) in members.iter().zip(&weights) {
        if u < *w {
            return i;
        }
        u -= w;
    }
    *members.last().expect("members is non-empty")
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Kernel weights for the window's slices: lung areas divided by their
/// common divisor, so that rescaled profiles give bit-identical densities.
/// A window without any lung area falls back to equal weights.
pub fn window_weights(profile: &AreaProfile, window: &SelectionWindow) -> Vec<f64> {
    let areas = &profile.areas[window.s..=window.e];
    let g = areas.iter().fold(0, |g, &a| gcd(g, a));
    if g == 0 {
        return vec![1.0; areas.len()];
    }
    areas.iter().map(|&a| (a / g) as f64).collect()
}

fn check_window(profile_len: usize, window: &SelectionWindow) -> Result<()> {
    if window.s > window.e || window.e >= profile_len {
        return Err(Error::EmptyWindow);
    }
    Ok(())
}

/// Density model of the window's slices, weighted by lung area.
pub fn window_density(
    profile: &AreaProfile,
    window: &SelectionWindow,
    cfg: &KdsConfig,
) -> Result<DensityModel> {
    check_window(profile.len(), window)?;
    let positions: Vec<f64> = (window.s..=window.e).map(|i| i as f64).collect();
    let weights = window_weights(profile, window);
    let h = match cfg.bandwidth_rule {
        BandwidthRule::Scott => scott_bandwidth(&positions, &weights)?,
    };
    estimate_density(
        &positions,
        &weights,
        h,
        (window.s as f64, window.e as f64),
        cfg.grid_size,
    )
}

/// The full KDS draw, exposing the intervals for inspection. Returns `None`
/// when the window has no more slices than requested samples.
pub fn kds_draw(
    profile: &AreaProfile,
    window: &SelectionWindow,
    cfg: &KdsConfig,
    seed: u64,
) -> Result<Option<(DensityModel, StratifiedDraw)>> {
    check_window(profile.len(), window)?;
    let m = cfg.num_samples.min(window.len());
    if m == window.len() {
        return Ok(None);
    }
    let model = window_density(profile, window, cfg)?;
    let mut cuts = Vec::with_capacity(m + 1);
    cuts.push(window.s as f64);
    for j in 1..m {
        cuts.push(model.percentile(j as f64 / m as f64)?);
    }
    cuts.push(window.e as f64);
    let mut rng = seeded_rng(seed);
    let plan = stratify(window, cuts, &mut rng, |members, rng| {
        weighted_pick(members, |i| model.evaluate(i as f64), rng)
    });
    Ok(Some((model, plan)))
}

fn all_indices(
    scan_id: &str,
    window: &SelectionWindow,
    strategy: Strategy,
    seed: u64,
) -> SampleSet {
    SampleSet {
        scan_id: scan_id.to_string(),
        window: *window,
        indices: (window.s..=window.e).collect(),
        strategy,
        seed,
    }
}

pub fn kds_sample(
    profile: &AreaProfile,
    window: &SelectionWindow,
    cfg: &KdsConfig,
    seed: u64,
) -> Result<SampleSet> {
    Ok(match kds_draw(profile, window, cfg, seed)? {
        None => all_indices(&profile.scan_id, window, Strategy::Kds, seed),
        Some((_, plan)) => SampleSet {
            scan_id: profile.scan_id.clone(),
            window: *window,
            indices: plan.sorted_indices(),
            strategy: Strategy::Kds,
            seed,
        },
    })
}

/// Uniform sample without replacement.
pub fn random_sample(
    scan_id: &str,
    window: &SelectionWindow,
    m: usize,
    seed: u64,
) -> Result<SampleSet> {
    if window.s > window.e || m == 0 {
        return Err(Error::EmptyWindow);
    }
    let count = window.len();
    if m >= count {
        return Ok(all_indices(scan_id, window, Strategy::Random, seed));
    }
    let mut rng = seeded_rng(seed);
    let mut indices: Vec<usize> = index::sample(&mut rng, count, m)
        .into_iter()
        .map(|i| i + window.s)
        .collect();
    indices.sort_unstable();
    Ok(SampleSet {
        scan_id: scan_id.to_string(),
        window: *window,
        indices,
        strategy: Strategy::Random,
        seed,
    })
}

/// Cut points of `m` equal-length intervals over the window's slice cells
/// `[s, e + 1)`.
pub fn systematic_cuts(window: &SelectionWindow, m: usize) -> Vec<f64> {
    let count = window.len() as f64;
    let mut cuts: Vec<f64> = (0..=m)
        .map(|j| window.s as f64 + count * j as f64 / m as f64)
        .collect();
    // the last interval is closed, so end it on the last slice
    *cuts.last_mut().expect("m + 1 cuts") = window.e as f64;
    cuts
}

/// The systematic draw with its intervals, `None` when every slice is taken.
pub fn systematic_draw(
    window: &SelectionWindow,
    m: usize,
    seed: u64,
) -> Result<Option<StratifiedDraw>> {
    if window.s > window.e || m == 0 {
        return Err(Error::EmptyWindow);
    }
    let m = m.min(window.len());
    if m == window.len() {
        return Ok(None);
    }
    let mut rng = seeded_rng(seed);
    Ok(Some(stratify(
        window,
        systematic_cuts(window, m),
        &mut rng,
        |members, rng| members[rng.random_range(0..members.len())],
    )))
}

/// One uniform draw from each of `m` equal-length intervals.
pub fn systematic_sample(
    scan_id: &str,
    window: &SelectionWindow,
    m: usize,
    seed: u64,
) -> Result<SampleSet> {
    Ok(match systematic_draw(window, m, seed)? {
        None => all_indices(scan_id, window, Strategy::Systematic, seed),
        Some(plan) => SampleSet {
            scan_id: scan_id.to_string(),
            window: *window,
            indices: plan.sorted_indices(),
            strategy: Strategy::Systematic,
            seed,
        },
    })
}

/// Dispatches on the configured strategy.
pub fn sample(
    strategy: Strategy,
    profile: &AreaProfile,
    window: &SelectionWindow,
    cfg: &KdsConfig,
    seed: u64,
) -> Result<SampleSet> {
    match strategy {
        Strategy::Kds => kds_sample(profile, window, cfg, seed),
        Strategy::Random => random_sample(&profile.scan_id, window, cfg.num_samples, seed),
        Strategy::Systematic => systematic_sample(&profile.scan_id, window, cfg.num_samples, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop, prop_assert, prop_assert_eq, proptest};
    use proptest::strategy::Strategy as _;

    fn window(s: usize, e: usize) -> SelectionWindow {
        SelectionWindow {
            s,
            e,
            area_sum: 0,
            area_fraction: 0.0,
            alpha_satisfied: false,
        }
    }

    /// Straight double loop over grid points and kernels, normalized by
    /// its own trapezoid rule.
    fn naive_density(pos: &[f64], w: &[f64], h: f64, lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let grid: Vec<f64> = (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect();
        let wsum: f64 = w.iter().sum();
        let mut f = Vec::new();
        for g in &grid {
            let mut s = 0.0;
            for i in 0..pos.len() {
                let u = (g - pos[i]) / h;
                s += w[i] * (-u * u / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            }
            f.push(s / (h * wsum));
        }
        let dx = (hi - lo) / (n - 1) as f64;
        let mass: f64 = (0..n - 1).map(|k| (f[k] + f[k + 1]) * dx / 2.0).sum();
        f.iter().map(|v| v / mass).collect()
    }

    #[test]
    fn scott_examples() {
        assert_eq!(scott_bandwidth(&[4.0], &[3.0]).unwrap(), FALLBACK_BANDWIDTH);
        let pos: Vec<f64> = (0..100).map(f64::from).collect();
        let h = scott_bandwidth(&pos, &vec![1.0; 100]).unwrap();
        // population sd of 0..=99 is sqrt((100^2 - 1) / 12)
        let expected = (9999.0f64 / 12.0).sqrt() * 100f64.powf(-0.2);
        assert!((h - expected).abs() < 1e-9);
        assert!((h - 11.492).abs() < 1e-3);
        let scaled = scott_bandwidth(&pos, &vec![7.5; 100]).unwrap();
        assert!((scaled - h).abs() < 1e-12);
        assert!(matches!(scott_bandwidth(&[], &[]), Err(Error::NoData)));
        assert!(matches!(
            scott_bandwidth(&[1.0, 2.0], &[0.0, 0.0]),
            Err(Error::AllZeroWeights)
        ));
        assert!(matches!(
            scott_bandwidth(&[1.0], &[-1.0]),
            Err(Error::InvalidWeight(_))
        ));
    }

    #[test]
    fn single_kernel_peaks_at_its_position() {
        let m = estimate_density(&[13.3], &[5.0], 2.0, (0.0, 20.0), 101).unwrap();
        let argmax = m
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((m.grid[argmax] - 13.3).abs() <= m.step() / 2.0);
        assert!((m.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_weights_are_nearly_flat_inside() {
        let pos: Vec<f64> = (0..=200).map(|i| i as f64 * 0.5).collect();
        let w = vec![1.0; pos.len()];
        let h = scott_bandwidth(&pos, &w).unwrap();
        let m = estimate_density(&pos, &w, h, (0.0, 100.0), 100).unwrap();
        let inner = &m.density[25..75];
        let (lo, hi) = inner
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi / lo <= 1.2, "ratio {}", hi / lo);
    }

    #[test]
    fn percentile_examples() {
        let pos: Vec<f64> = (10..=30).map(f64::from).collect();
        let m = estimate_density(&pos, &vec![1.0; pos.len()], 3.0, (10.0, 30.0), 100).unwrap();
        assert_eq!(m.percentile(0.0).unwrap(), 10.0);
        assert_eq!(m.percentile(1.0).unwrap(), 30.0);
        assert!((m.percentile(0.5).unwrap() - 20.0).abs() <= m.step());
        assert!(matches!(
            m.percentile(1.5),
            Err(Error::InvalidProbability(_))
        ));
        assert!(matches!(
            m.percentile(f64::NAN),
            Err(Error::InvalidProbability(_))
        ));
    }

    #[test]
    fn flat_density_percentiles_are_linear() {
        // a very wide kernel is flat over the span
        let m = estimate_density(&[50.0], &[1.0], 1e6, (0.0, 100.0), 100).unwrap();
        for j in 1..10 {
            let p = j as f64 / 10.0;
            assert!((m.percentile(p).unwrap() - 100.0 * p).abs() <= m.step());
        }
    }

    #[test]
    fn clamp_and_single_sample() {
        let p = AreaProfile::new("s", vec![0, 3, 9, 27, 9, 3, 0]);
        let w = window(1, 5);
        let all = kds_sample(
            &p,
            &w,
            &KdsConfig {
                num_samples: 8,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        assert_eq!(all.indices, vec![1, 2, 3, 4, 5]);
        let one = kds_sample(
            &p,
            &w,
            &KdsConfig {
                num_samples: 1,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        assert_eq!(one.indices.len(), 1);
        assert!(w.contains(one.indices[0]));
    }

    #[test]
    fn single_sample_mode_is_profile_peak() {
        let areas: Vec<u64> = (0..21)
            .map(|i| (1000.0 * (-((i as f64 - 12.0).powi(2)) / 4.5).exp()) as u64)
            .collect();
        let p = AreaProfile::new("u", areas);
        let w = window(0, 20);
        let cfg = KdsConfig {
            num_samples: 1,
            ..Default::default()
        };
        let mut counts = [0usize; 21];
        for seed in 0..10_000 {
            counts[kds_sample(&p, &w, &cfg, seed).unwrap().indices[0]] += 1;
        }
        let mode = counts.iter().enumerate().max_by_key(|c| c.1).unwrap().0;
        assert_eq!(mode, 12);
    }

    #[test]
    fn baseline_examples() {
        let w = window(0, 9);
        assert_eq!(
            random_sample("r", &w, 12, 0).unwrap().indices,
            (0..10).collect::<Vec<_>>()
        );
        let nine = random_sample("r", &w, 9, 4).unwrap();
        assert_eq!(nine.indices.len(), 9);
        assert_eq!(
            random_sample("r", &w, 5, 99).unwrap(),
            random_sample("r", &w, 5, 99).unwrap()
        );

        assert_eq!(
            systematic_sample("y", &w, 10, 3).unwrap().indices,
            (0..10).collect::<Vec<_>>()
        );
        for seed in 0..50 {
            let two = systematic_sample("y", &w, 2, seed).unwrap().indices;
            assert!(two[0] <= 4 && (5..=9).contains(&two[1]), "{two:?}");
        }
        assert_eq!(
            systematic_sample("y", &w, 3, 8).unwrap(),
            systematic_sample("y", &w, 3, 8).unwrap()
        );
    }

    #[test]
    fn zero_area_window_uses_equal_weights() {
        let p = AreaProfile::new("z", vec![0; 30]);
        let s = kds_sample(
            &p,
            &window(5, 24),
            &KdsConfig {
                num_samples: 4,
                ..Default::default()
            },
            2,
        )
        .unwrap();
        assert_eq!(s.indices.len(), 4);
        assert!(s.indices.iter().all(|&i| (5..=24).contains(&i)));
    }

    #[test]
    fn bad_windows() {
        let p = AreaProfile::new("b", vec![1, 2, 3]);
        assert!(matches!(
            kds_sample(&p, &window(1, 5), &KdsConfig::default(), 0),
            Err(Error::EmptyWindow)
        ));
        assert!(matches!(
            random_sample("b", &window(3, 2), 2, 0),
            Err(Error::EmptyWindow)
        ));
    }

    #[test]
    fn strategy_names() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{s}\""));
        }
        assert!("stratified".parse::<Strategy>().is_err());
    }

    fn arb_weighted() -> impl proptest::strategy::Strategy<Value = (Vec<f64>, Vec<f64>)> {
        proptest::collection::vec((0.0f64..60.0, 0.0f64..1e6), 1..40).prop_map(|v| {
            let (mut p, mut w): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            w[0] += 1.0;
            p.push(0.0);
            p.push(60.0);
            w.push(0.5);
            w.push(0.5);
            (p, w)
        })
    }

    proptest! {
        #[test]
        fn density_matches_naive_sum((pos, w) in arb_weighted(), grid in 2usize..150) {
            let h = scott_bandwidth(&pos, &w).unwrap();
            let m = estimate_density(&pos, &w, h, (0.0, 60.0), grid).unwrap();
            let naive = naive_density(&pos, &w, h, 0.0, 60.0, grid);
            for (a, b) in m.density.iter().zip(&naive) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            prop_assert!((m.integral() - 1.0).abs() < 1e-3);
            prop_assert!(m.cdf.windows(2).all(|c| c[0] <= c[1]));
            prop_assert_eq!(*m.cdf.last().unwrap(), 1.0);
        }

        #[test]
        fn percentile_monotone((pos, w) in arb_weighted(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let h = scott_bandwidth(&pos, &w).unwrap();
            let m = estimate_density(&pos, &w, h, (0.0, 60.0), 100).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(m.percentile(lo).unwrap() <= m.percentile(hi).unwrap());
        }

        #[test]
        fn all_strategies_return_sorted_subsets(
            areas in proptest::collection::vec(0u64..10_000, 1..80),
            m in 1usize..20,
            seed in any::<u64>(),
            a in any::<prop::sample::Index>(),
            b in any::<prop::sample::Index>(),
        ) {
            let (x, y) = (a.index(areas.len()), b.index(areas.len()));
            let w = window(x.min(y), x.max(y));
            let p = AreaProfile::new("p", areas);
            let cfg = KdsConfig { num_samples: m, ..Default::default() };
            for strategy in Strategy::ALL {
                let s = sample(strategy, &p, &w, &cfg, seed).unwrap();
                prop_assert_eq!(s.indices.len(), m.min(w.len()));
                prop_assert!(s.indices.windows(2).all(|p| p[0] < p[1]));
                prop_assert!(s.indices.iter().all(|&i| w.contains(i)));
            }
        }
    }
}
