//! Detector-sensitivity proof: a pristine generated dataset passes
//! verification, and every catalogued single-fault mutation is caught by
//! the exact rule the catalog promises.

use std::path::Path;

use rscm_core::curate::{balance, split, BalanceRecord, BalanceSpec, Split, BALANCE_RECORD_FILE};
use rscm_core::dataset::{split_file_path, write_split_file, write_triples, TRIPLES_FILE};
use rscm_core::oracle::faults::fault_catalog;
use rscm_core::oracle::verify_dataset;
use rscm_core::pipeline::{generate, GenerateConfig};
use rscm_core::qa::{DatasetKind, Registry};
use rscm_core::synth::build_corpus;
use tempfile::TempDir;

const SEED: u64 = 2024;
const BALANCED_FILE: &str = "triples.balanced.jsonl";

/// Generate a dataset with split files and a balanced subset, so every
/// verifier check is armed.
fn build_fixture(root: &Path, registry: &Registry) {
    let corpus = build_corpus(6, 77);
    let config = GenerateConfig {
        dataset_kind: DatasetKind::Tqa,
        global_seed: SEED,
        workers: 2,
        ..GenerateConfig::default()
    };
    let outcome = generate(&corpus, registry, &config, root).unwrap();

    let groups: Vec<String> = corpus.iter().map(|c| c.image_id.clone()).collect();
    let assignment = split(&groups, (0.70, 0.15, 0.15), SEED).unwrap();
    for (name, kind) in [
        ("train", Split::Train),
        ("val", Split::Val),
        ("test", Split::Test),
    ] {
        let raw_ids = assignment.ids_for(kind);
        let ids: Vec<String> = outcome
            .manifest
            .items
            .iter()
            .filter(|e| raw_ids.contains(&e.raw_image_id))
            .map(|e| e.image_id.clone())
            .collect();
        write_split_file(&ids, &split_file_path(root, name)).unwrap();
    }

    let spec = BalanceSpec {
        tolerance: 0.02,
        per_qid_target: None,
        seed: SEED,
    };
    let balanced = balance(&outcome.triples, &spec).unwrap();
    write_triples(&balanced, &root.join(BALANCED_FILE)).unwrap();
    let record = BalanceRecord {
        spec,
        source: TRIPLES_FILE.to_string(),
        output: BALANCED_FILE.to_string(),
    };
    std::fs::write(
        root.join(BALANCE_RECORD_FILE),
        serde_json::to_string_pretty(&record).unwrap(),
    )
    .unwrap();
}

fn copy_tree(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), &target).unwrap();
        }
    }
}

#[test]
fn pristine_dataset_passes_and_every_fault_is_detected() {
    let registry = Registry::builtin();
    let pristine = TempDir::new().unwrap();
    build_fixture(pristine.path(), &registry);

    let report = verify_dataset(pristine.path(), &registry, false).unwrap();
    assert!(report.pass, "pristine violations: {:#?}", report.violations);

    let catalog = fault_catalog();
    assert!(catalog.len() >= 10, "catalog holds {} entries", catalog.len());
    for fault in catalog {
        let scratch = TempDir::new().unwrap();
        copy_tree(pristine.path(), scratch.path());
        fault.inject(scratch.path()).unwrap();
        let report = verify_dataset(scratch.path(), &registry, false).unwrap();
        assert!(!report.pass, "fault '{}' went undetected", fault.name);
        assert!(
            report
                .violations
                .iter()
                .any(|v| v.rule_id == fault.expected_rule),
            "fault '{}' expected rule '{}', raised: {:?}",
            fault.name,
            fault.expected_rule,
            report
                .violations
                .iter()
                .map(|v| v.rule_id.as_str())
                .collect::<Vec<_>>()
        );
    }
}
