//! End-to-end generation driver: corpus in, dataset tree out.
//!
//! Each corpus image yields one untampered record (all-zero source and
//! tampering masks) plus one tamper record per eligible instance. Every
//! record derives its own random stream from (global seed, image id,
//! instance id), so output bytes are invariant to worker count and
//! scheduling order. The manifest is assembled single-threaded from
//! results sorted by record id and written last, atomically.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::Rng;

use crate::dataset::{
    ensure_layout, output_image_id, write_item, write_manifest, write_triples, CorpusItem,
    ItemEntry, ItemRasters, Manifest, RecordKind, WrittenItem, MANIFEST_FILE, TRIPLES_FILE,
};
use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::qa::{synthesize, DatasetKind, FactContext, QaInput, Registry, Triple};
use crate::rng::derive_rng;
use crate::tamper::{
    apply_blur, apply_copy_move, check_eligibility, place, sample_params, Eligibility,
    SourceInstance, TamperKind, TamperRecord,
};

/// Generation settings; everything that shapes output bytes is recorded in
/// the manifest.
#[derive(Clone, Debug)]
pub struct GenerateConfig {
    pub dataset_kind: DatasetKind,
    pub global_seed: u64,
    pub workers: usize,
    pub max_attempts: u32,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            dataset_kind: DatasetKind::Cmqa,
            global_seed: 0,
            workers: 1,
            max_attempts: 100,
        }
    }
}

/// An instance that produced no record, and why.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkippedInstance {
    pub image_id: String,
    pub instance_id: String,
    pub reason: String,
}

/// What a finished run produced.
#[derive(Debug)]
pub struct GenerateOutcome {
    pub manifest: Manifest,
    pub triples: Vec<Triple>,
    pub skipped: Vec<SkippedInstance>,
}

struct ItemOutput {
    written: Vec<WrittenItem>,
    triples: Vec<Triple>,
    skipped: Vec<SkippedInstance>,
}

/// Process one corpus item: the untampered record plus one tamper record
/// per eligible instance.
fn process_item(
    item: &CorpusItem,
    registry: &Registry,
    config: &GenerateConfig,
    out_root: &Path,
) -> Result<ItemOutput> {
    let dims = item.image.dimensions();
    let mut written = Vec::new();
    let mut triples = Vec::new();
    let mut skipped = Vec::new();

    // untampered original: five-raster invariant with all-zero masks
    let zero = BinaryMask::zeros(dims.0, dims.1);
    let orig_id = output_image_id(&item.image_id, "orig");
    written.push(write_item(
        out_root,
        &item.image_id,
        "orig",
        RecordKind::Untampered,
        None,
        None,
        &ItemRasters {
            tampered: &item.image,
            original: &item.image,
            seg: &item.semantic_mask,
            src_mask: &zero,
            tmp_mask: &zero,
        },
    )?);
    triples.extend(synthesize(
        registry,
        &QaInput::Untampered { image_id: &orig_id },
        &FactContext::default(),
        config.dataset_kind,
    )?);

    for inst in &item.instances {
        let instance = SourceInstance {
            instance_id: inst.instance_id.clone(),
            class_label: inst.class_label,
            mask: inst.mask.clone(),
            image_id: item.image_id.clone(),
        };
        let mut skip = |reason: &str| {
            skipped.push(SkippedInstance {
                image_id: item.image_id.clone(),
                instance_id: inst.instance_id.clone(),
                reason: reason.to_string(),
            });
        };
        match check_eligibility(&instance, dims)? {
            Eligibility::Rejected(reason) => {
                skip(reason.label());
                continue;
            }
            Eligibility::Eligible => {}
        }

        let mut rng = derive_rng(
            config.global_seed,
            &["record", &item.image_id, &inst.instance_id],
        );
        // cmqa is copy-move only; tqa flips a per-record coin
        let kind = match config.dataset_kind {
            DatasetKind::Cmqa => TamperKind::CopyMove,
            DatasetKind::Tqa => {
                if rng.random_range(0..2u8) == 0 {
                    TamperKind::CopyMove
                } else {
                    TamperKind::Blur
                }
            }
        };
        let mut params = sample_params(&mut rng, kind);
        let (record_id, record_kind, tampered, src_mask, tmp_mask) = match kind {
            TamperKind::CopyMove => {
                let Some(placement) =
                    place(&mut rng, &instance, &params, dims, config.max_attempts)?
                else {
                    skip("no_placement");
                    continue;
                };
                params.translation = placement.translation;
                let (tampered, src_mask, tmp_mask) =
                    apply_copy_move(&item.image, &instance, &params, &placement)?;
                (
                    format!("cm_{}", inst.instance_id),
                    RecordKind::CopyMove,
                    tampered,
                    src_mask,
                    tmp_mask,
                )
            }
            TamperKind::Blur => {
                let blur_kind = params.blur_kind.expect("blur params carry a kind");
                let strength = params.blur_strength.expect("blur params carry a strength");
                let (tampered, region) = apply_blur(&item.image, &instance, blur_kind, strength)?;
                (
                    format!("bl_{}", inst.instance_id),
                    RecordKind::Blur,
                    tampered,
                    region.clone(),
                    region,
                )
            }
        };

        let out_id = output_image_id(&item.image_id, &record_id);
        let record = TamperRecord {
            record_id: record_id.clone(),
            image_id: out_id,
            instance,
            params,
            src_mask,
            tmp_mask,
            kind,
        };
        let ctx = FactContext {
            theme: item.theme.clone(),
            same_class_count: item
                .instances
                .iter()
                .filter(|other| other.class_label == inst.class_label)
                .count() as u32,
            ..FactContext::default()
        };
        triples.extend(synthesize(
            registry,
            &QaInput::Tampered(&record),
            &ctx,
            config.dataset_kind,
        )?);
        written.push(write_item(
            out_root,
            &item.image_id,
            &record_id,
            record_kind,
            Some(inst.class_label),
            Some(&record.params),
            &ItemRasters {
                tampered: &tampered,
                original: &item.image,
                seg: &item.semantic_mask,
                src_mask: &record.src_mask,
                tmp_mask: &record.tmp_mask,
            },
        )?);
    }

    Ok(ItemOutput {
        written,
        triples,
        skipped,
    })
}

/// Run generation over the whole corpus, fanning out per item across
/// `config.workers` threads. Returns the manifest that was written.
pub fn generate(
    corpus: &[CorpusItem],
    registry: &Registry,
    config: &GenerateConfig,
    out_root: &Path,
) -> Result<GenerateOutcome> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput);
    }
    if config.workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    {
        let mut ids = std::collections::BTreeSet::new();
        for item in corpus {
            if !ids.insert(&item.image_id) {
                return Err(Error::InvalidRecord(
                    item.image_id.clone(),
                    "duplicate image id in corpus".into(),
                ));
            }
        }
    }
    ensure_layout(out_root)?;

    // fan out by item index; results keyed by index so assembly order is
    // scheduling-independent
    let workers = config.workers.min(corpus.len());
    let mut outputs: Vec<Option<Result<ItemOutput>>> = Vec::new();
    if workers <= 1 {
        for item in corpus {
            outputs.push(Some(process_item(item, registry, config, out_root)));
        }
    } else {
        let slots: Mutex<Vec<Option<Result<ItemOutput>>>> =
            Mutex::new((0..corpus.len()).map(|_| None).collect());
        let cursor = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = cursor.fetch_add(1, Ordering::Relaxed);
                    if i >= corpus.len() {
                        break;
                    }
                    let result = process_item(&corpus[i], registry, config, out_root);
                    slots.lock().expect("worker poisoned the slot lock")[i] = Some(result);
                });
            }
        });
        outputs = slots.into_inner().expect("worker poisoned the slot lock");
    }

    let mut entries: Vec<ItemEntry> = Vec::new();
    let mut checksums = std::collections::BTreeMap::new();
    let mut triples: Vec<Triple> = Vec::new();
    let mut skipped: Vec<SkippedInstance> = Vec::new();
    for slot in outputs {
        let output = slot.expect("every item slot is filled")?;
        for w in output.written {
            for (path, digest) in w.checksums {
                checksums.insert(path, digest);
            }
            entries.push(w.entry);
        }
        triples.extend(output.triples);
        skipped.extend(output.skipped);
    }
    entries.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    triples.sort_by(|a, b| (&a.image_id, a.qid).cmp(&(&b.image_id, b.qid)));

    let triples_path = out_root.join(TRIPLES_FILE);
    write_triples(&triples, &triples_path)?;
    let triples_bytes = std::fs::read(&triples_path)
        .map_err(|e| Error::io(triples_path.display().to_string(), e))?;
    checksums.insert(
        TRIPLES_FILE.to_string(),
        crate::dataset::sha256_hex(&triples_bytes),
    );

    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        global_seed: config.global_seed,
        dataset_kind: config.dataset_kind,
        items: entries,
        triple_count: triples.len() as u64,
        checksums,
    };
    write_manifest(&manifest, &out_root.join(MANIFEST_FILE))?;

    Ok(GenerateOutcome {
        manifest,
        triples,
        skipped,
    })
}
