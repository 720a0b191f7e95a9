use std::fs;

use ctreduce::config::{CorpusSpec, PipelineConfig};
use ctreduce::pipeline::{self, ScanTruth, GROUND_TRUTH_FILE, INDEX_FILE, MANIFEST_DIR};
use ctreduce::report::ScanManifest;
use ctreduce::rng::scan_seed;
use ctreduce::synthetic::{generate_synthetic_scan, SyntheticScanSpec};
use ctreduce::volume::load_scan;

fn spec() -> CorpusSpec {
    CorpusSpec {
        num_scans: 3,
        scan: SyntheticScanSpec {
            num_slices: 16,
            noise_amplitude: 5,
            bit_depth: 16,
            seed: 42,
            ..Default::default()
        },
    }
}

#[test]
fn written_scans_load_back_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec();
    pipeline::generate_corpus(&spec, dir.path()).unwrap();
    for id in ["scan_000", "scan_002"] {
        let mut s = spec.scan.clone();
        s.seed = scan_seed(spec.scan.seed, id);
        let expected = generate_synthetic_scan(&s, id).unwrap().volume;
        let loaded = load_scan(&dir.path().join(id)).unwrap();
        assert_eq!(loaded.scan_id(), id);
        assert_eq!(loaded.slices(), expected.slices());
        assert_eq!(loaded.slice_indices(), (0..16).collect::<Vec<u64>>());
    }
}

#[test]
fn manifests_round_trip_and_match_truth_without_noise() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let mut spec = spec();
    spec.scan.noise_amplitude = 0;
    pipeline::generate_corpus(&spec, &corpus).unwrap();
    let truths: Vec<ScanTruth> =
        serde_json::from_str(&fs::read_to_string(corpus.join(GROUND_TRUTH_FILE)).unwrap()).unwrap();

    let out = dir.path().join("out");
    let outcome = pipeline::run_pipeline(&corpus, &PipelineConfig::default(), None, None).unwrap();
    pipeline::write_outcome(&out, &outcome).unwrap();

    let index = fs::read_to_string(out.join(INDEX_FILE)).unwrap();
    for (line, truth) in index.lines().zip(&truths) {
        let m: ScanManifest = serde_json::from_str(line).unwrap();
        let single: ScanManifest = serde_json::from_str(
            &fs::read_to_string(out.join(MANIFEST_DIR).join(format!("{}.json", m.scan_id)))
                .unwrap(),
        )
        .unwrap();
        assert_eq!(m, single);
        assert_eq!(m.scan_id, truth.scan_id);
        assert_eq!(m.crop_box, truth.truth.scan_box());
        assert_eq!(m.areas, truth.truth.lung_areas);
        assert!(m.is_consistent());
        assert_eq!(m.sampled_indices.len(), 16.min(m.window.len()));
    }
}
