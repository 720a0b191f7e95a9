//! Corpus-level orchestration: reduce every scan of a corpus, write the
//! manifests and the redundancy report, and generate synthetic corpora.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CorpusSpec, PipelineConfig};
use crate::error::{io_err, Error, Result};
use crate::kds;
use crate::report::{Dims, RedundancyReport, ScanManifest};
use crate::rng::scan_seed;
use crate::slice::{crop_and_profile, select_window};
use crate::spatial::apply_crop_and_resize;
use crate::synthetic::{generate_synthetic_scan, GroundTruth};
use crate::volume::load_scan;

pub const MANIFEST_DIR: &str = "manifests";
pub const INDEX_FILE: &str = "index.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const SUMMARY_FILE: &str = "summary.json";
pub const IMAGE_DIR: &str = "images";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const LABELS_FILE: &str = "labels.csv";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanFailure {
    pub scan_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scans_total: usize,
    pub scans_ok: usize,
    pub failures: Vec<ScanFailure>,
    pub alpha_unsatisfied: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// One manifest per processed scan, ordered by scan id.
    pub manifests: Vec<ScanManifest>,
    pub report: RedundancyReport,
    pub summary: RunSummary,
}

/// Scan directories of a corpus, sorted by name.
pub fn scan_dirs(corpus: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(corpus).map_err(io_err(corpus))? {
        let path = entry.map_err(io_err(corpus))?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    if dirs.is_empty() {
        return Err(Error::NoScans(corpus.to_path_buf()));
    }
    dirs.sort();
    Ok(dirs)
}

/// Reads `scan_id,label` rows; a `scan_id,label` header is skipped.
pub fn read_labels(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Parse {
            line: 0,
            reason: format!("{}: {e}", path.display()),
        })?;
    let mut labels = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        if labels.is_empty() && record.iter().eq(["scan_id", "label"]) {
            continue;
        }
        if record.len() != 2 {
            return Err(Error::Parse {
                line: record.position().map_or(0, |p| p.line() as usize),
                reason: format!("expected scan_id,label, found {} fields", record.len()),
            });
        }
        labels.insert(record[0].to_string(), record[1].to_string());
    }
    Ok(labels)
}

/// Load, crop, profile, window and sample one scan.
pub fn process_scan(
    dir: &Path,
    cfg: &PipelineConfig,
    image_dir: Option<&Path>,
) -> Result<ScanManifest> {
    let volume = load_scan(dir)?;
    let (crop, profile) = crop_and_profile(&volume, &cfg.spatial)?;
    let window = select_window(&profile, &cfg.slice)?;
    let stream = scan_seed(cfg.seed, volume.scan_id());
    let samples = kds::sample(cfg.strategy, &profile, &window, &cfg.kds, stream)?;
    if let Some(root) = image_dir {
        let out = root.join(volume.scan_id());
        fs::create_dir_all(&out).map_err(io_err(&out))?;
        for &i in &samples.indices {
            let img = apply_crop_and_resize(
                &volume.slices()[i],
                &crop,
                cfg.spatial.output_height,
                cfg.spatial.output_width,
            )?;
            img.save(&out.join(format!("slice_{}.png", volume.slice_indices()[i])))?;
        }
    }
    Ok(ScanManifest {
        scan_id: volume.scan_id().to_string(),
        original_dims: Dims {
            width: volume.width(),
            height: volume.height(),
            num_slices: volume.len(),
        },
        crop_box: crop,
        window,
        sampled_indices: samples.indices,
        strategy: cfg.strategy,
        seed: cfg.seed,
        areas: profile.areas,
    })
}

fn thread_pool(parallelism: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {parallelism} workers: {e}")))
}

/// Runs the reduction over every scan directory of `corpus`. Scans that
/// fail are recorded in the summary and left out of the report.
pub fn run_pipeline(
    corpus: &Path,
    cfg: &PipelineConfig,
    labels: Option<&BTreeMap<String, String>>,
    image_dir: Option<&Path>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let dirs = scan_dirs(corpus)?;
    let pool = thread_pool(cfg.parallelism)?;
    let results: Vec<(String, Result<ScanManifest>)> = pool.install(|| {
        dirs.par_iter()
            .map(|d| {
                let id = d
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                (id, process_scan(d, cfg, image_dir))
            })
            .collect()
    });

    let mut manifests = Vec::new();
    let mut failures = Vec::new();
    for (scan_id, res) in results {
        match res {
            Ok(m) => manifests.push(m),
            Err(e) => {
                log::error!("scan {scan_id} failed: {e}");
                failures.push(ScanFailure {
                    scan_id,
                    error: e.to_string(),
                });
            }
        }
    }
    let alpha_unsatisfied: Vec<String> = manifests
        .iter()
        .filter(|m| !m.window.alpha_satisfied)
        .map(|m| m.scan_id.clone())
        .collect();
    for id in &alpha_unsatisfied {
        log::warn!(
            "scan {id}: no window of the allowed length reaches alpha = {}",
            cfg.slice.alpha
        );
    }
    let report = RedundancyReport::build(&manifests, labels);
    Ok(RunOutcome {
        summary: RunSummary {
            scans_total: dirs.len(),
            scans_ok: manifests.len(),
            failures,
            alpha_unsatisfied,
        },
        manifests,
        report,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

fn pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Writes manifests, the JSON-lines index, the report and the run summary.
pub fn write_outcome(out: &Path, outcome: &RunOutcome) -> Result<()> {
    let manifest_dir = out.join(MANIFEST_DIR);
    fs::create_dir_all(&manifest_dir).map_err(io_err(&manifest_dir))?;
    let mut index = String::new();
    for m in &outcome.manifests {
        write_file(
            &manifest_dir.join(format!("{}.json", m.scan_id)),
            &pretty(m)?,
        )?;
        index += &serde_json::to_string(m)?;
        index.push('\n');
    }
    write_file(&out.join(INDEX_FILE), &index)?;
    write_file(&out.join(REPORT_JSON), &pretty(&outcome.report)?)?;
    write_file(&out.join(REPORT_TEXT), &outcome.report.render())?;
    write_file(&out.join(SUMMARY_FILE), &pretty(&outcome.summary)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTruth {
    pub scan_id: String,
    pub label: String,
    #[serde(flatten)]
    pub truth: GroundTruth,
}

/// Writes a synthetic corpus in the loader's layout plus a ground-truth
/// sidecar and a labels file alternating `covid` / `non-covid`.
pub fn generate_corpus(spec: &CorpusSpec, out: &Path) -> Result<Vec<ScanTruth>> {
    spec.scan.validate()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let truths: Vec<ScanTruth> = (0..spec.num_scans)
        .into_par_iter()
        .map(|n| {
            let scan_id = format!("scan_{n:03}");
            let mut scan_spec = spec.scan.clone();
            scan_spec.seed = scan_seed(spec.scan.seed, &scan_id);
            let scan = generate_synthetic_scan(&scan_spec, &scan_id)?;
            let dir = out.join(&scan_id);
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            for (slice, idx) in scan.volume.slices().iter().zip(scan.volume.slice_indices()) {
                slice.save(&dir.join(format!("slice_{idx}.png")))?;
            }
            Ok(ScanTruth {
                scan_id,
                label: crate::metrics::CLASSES[n % 2].to_string(),
                truth: scan.truth,
            })
        })
        .collect::<Result<_>>()?;
    write_file(&out.join(GROUND_TRUTH_FILE), &pretty(&truths)?)?;
    let mut labels = String::from("scan_id,label\n");
    for t in &truths {
        labels += &format!("{},{}\n", t.scan_id, t.label);
    }
    write_file(&out.join(LABELS_FILE), &labels)?;
    Ok(truths)
}
