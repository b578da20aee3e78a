//! Fault-injection catalog: a set of surgical single-fault mutations, each
//! paired with the violation rule the verifier must raise for it.
//!
//! The catalog proves detector sensitivity, not just absence of alarms:
//! every mutation keeps the surrounding bookkeeping consistent (file
//! digests and counts are re-recorded after the edit) so detection has to
//! come from the deep check, never from a stale checksum — except for the
//! one fault that edits a checksum on purpose.

use std::path::Path;

use crate::dataset::{
    encode_gray_png, read_gray_png, read_triples, sha256_hex, Manifest, RecordKind, MANIFEST_FILE,
    TRIPLES_FILE,
};
use crate::error::{Error, Result};
use crate::tamper::TargetClass;

/// One catalogued mutation and the rule that must catch it.
pub struct Fault {
    pub name: &'static str,
    pub expected_rule: &'static str,
    inject: fn(&Path) -> Result<()>,
}

impl Fault {
    /// Apply the mutation to the dataset under `root` (destructive; run it
    /// on a scratch copy).
    pub fn inject(&self, root: &Path) -> Result<()> {
        (self.inject)(root)
    }
}

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::io(path.display().to_string(), e)
}

fn read_manifest_value(root: &Path) -> Result<serde_json::Value> {
    let path = root.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::ParseError {
        path: path.display().to_string(),
        line: e.line(),
        detail: e.to_string(),
    })
}

fn write_manifest_value(root: &Path, value: &serde_json::Value) -> Result<()> {
    let path = root.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Registry(format!("serialize: {e}")))?;
    std::fs::write(&path, text).map_err(|e| io(&path, e))
}

/// Re-record the digest of `rel` so detection cannot fall back to a stale
/// checksum.
fn refresh_checksum(root: &Path, rel: &str) -> Result<()> {
    let bytes = std::fs::read(root.join(rel)).map_err(|e| io(&root.join(rel), e))?;
    let mut manifest = read_manifest_value(root)?;
    manifest["checksums"][rel] = serde_json::Value::String(sha256_hex(&bytes));
    write_manifest_value(root, &manifest)
}

fn load_manifest(root: &Path) -> Result<Manifest> {
    crate::dataset::read_manifest(&root.join(MANIFEST_FILE), false)
}

/// First copy-move record of a non-road class.
fn pick_copy_move(manifest: &Manifest) -> &crate::dataset::ItemEntry {
    manifest
        .items
        .iter()
        .find(|e| e.kind == RecordKind::CopyMove && e.class != Some(TargetClass::Road))
        .expect("fixture datasets carry a non-road copy-move record")
}

fn pick_blur(manifest: &Manifest) -> Option<&crate::dataset::ItemEntry> {
    manifest.items.iter().find(|e| e.kind == RecordKind::Blur)
}

/// Rewrite the triples file from edited lines, fixing its digest and the
/// recorded count so only the intended fault remains.
fn save_triples_text(root: &Path, lines: &[String]) -> Result<()> {
    let path = root.join(TRIPLES_FILE);
    let mut text = lines.join("\n");
    text.push('\n');
    std::fs::write(&path, &text).map_err(|e| io(&path, e))?;
    let mut manifest = read_manifest_value(root)?;
    manifest["checksums"][TRIPLES_FILE] = serde_json::Value::String(sha256_hex(text.as_bytes()));
    manifest["triple_count"] = serde_json::Value::from(lines.len() as u64);
    write_manifest_value(root, &manifest)
}

fn triples_lines(root: &Path) -> Result<Vec<String>> {
    let path = root.join(TRIPLES_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| io(&path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn flip_yes_no(answer: &str) -> &'static str {
    if answer == "yes" {
        "no"
    } else {
        "yes"
    }
}

// ---------------------------------------------------------------------------
// the injections

/// Corrupt one original pixel outside the tampering mask.
fn inject_original_pixel(root: &Path) -> Result<()> {
    let manifest = load_manifest(root)?;
    let entry = pick_copy_move(&manifest);
    let tmp = read_gray_png(&root.join(&entry.files.tmp_mask))?;
    let original_path = root.join(&entry.files.original);
    let mut original = crate::dataset::read_rgb_png(&original_path)?;
    let (w, h) = original.dimensions();
    let (x, y) = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .find(|&(x, y)| tmp.get_pixel(x, y).0[0] == 0)
        .expect("tampering mask never covers the whole frame");
    let px = original.get_pixel_mut(x, y);
    px.0[0] = px.0[0].wrapping_add(40);
    let bytes = crate::dataset::encode_rgb_png(&original)?;
    std::fs::write(&original_path, bytes).map_err(|e| io(&original_path, e))?;
    refresh_checksum(root, &entry.files.original)
}

/// Set a border pixel of a non-road pasted footprint.
fn inject_border_mask_bit(root: &Path) -> Result<()> {
    let manifest = load_manifest(root)?;
    let entry = pick_copy_move(&manifest);
    let path = root.join(&entry.files.tmp_mask);
    let mut mask = read_gray_png(&path)?;
    mask.put_pixel(0, 0, image::Luma([255]));
    std::fs::write(&path, encode_gray_png(&mask)?).map_err(|e| io(&path, e))?;
    refresh_checksum(root, &entry.files.tmp_mask)
}

/// Flip one stored yes/no answer.
fn inject_answer_flip(root: &Path) -> Result<()> {
    let mut lines = triples_lines(root)?;
    let idx = lines
        .iter()
        .position(|l| l.contains("\"qid\":14"))
        .expect("fixture datasets ask the rotation question");
    let mut value: serde_json::Value =
        serde_json::from_str(&lines[idx]).map_err(|e| Error::ParseError {
            path: TRIPLES_FILE.into(),
            line: idx + 1,
            detail: e.to_string(),
        })?;
    let flipped = flip_yes_no(value["answer"].as_str().unwrap_or_default());
    value["answer"] = serde_json::Value::String(flipped.into());
    lines[idx] = serde_json::to_string(&value).map_err(|e| Error::Registry(e.to_string()))?;
    save_triples_text(root, &lines)
}

/// Corrupt one recorded digest without touching the file.
fn inject_checksum_edit(root: &Path) -> Result<()> {
    let mut manifest = read_manifest_value(root)?;
    let rel = manifest["checksums"]
        .as_object()
        .and_then(|m| m.keys().next().cloned())
        .expect("manifests record checksums");
    manifest["checksums"][&rel] = serde_json::Value::String("0".repeat(64));
    write_manifest_value(root, &manifest)
}

/// Remove one triple (count and digest re-recorded).
fn inject_triple_deletion(root: &Path) -> Result<()> {
    let mut lines = triples_lines(root)?;
    let idx = lines
        .iter()
        .position(|l| l.contains("\"qid\":8"))
        .expect("fixture datasets ask the distance question");
    lines.remove(idx);
    save_triples_text(root, &lines)
}

/// Append a copy of an existing triple (count and digest re-recorded).
fn inject_triple_duplicate(root: &Path) -> Result<()> {
    let mut lines = triples_lines(root)?;
    let first = lines.first().expect("triples file is never empty").clone();
    lines.push(first);
    save_triples_text(root, &lines)
}

/// Clear one interior source-mask pixel of a blur record.
fn inject_blur_mask_divergence(root: &Path) -> Result<()> {
    let manifest = load_manifest(root)?;
    let entry = pick_blur(&manifest).expect("fixture datasets carry a blur record");
    let path = root.join(&entry.files.src_mask);
    let mut mask = read_gray_png(&path)?;
    let (w, h) = mask.dimensions();
    let (x, y) = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .find(|&(x, y)| mask.get_pixel(x, y).0[0] == 255)
        .expect("blur region is never empty");
    mask.put_pixel(x, y, image::Luma([0]));
    std::fs::write(&path, encode_gray_png(&mask)?).map_err(|e| io(&path, e))?;
    refresh_checksum(root, &entry.files.src_mask)
}

/// Replace a copy-move tampering mask with its source mask (100% overlap).
fn inject_full_overlap(root: &Path) -> Result<()> {
    let manifest = load_manifest(root)?;
    let entry = pick_copy_move(&manifest);
    let src = std::fs::read(root.join(&entry.files.src_mask))
        .map_err(|e| io(&root.join(&entry.files.src_mask), e))?;
    let path = root.join(&entry.files.tmp_mask);
    std::fs::write(&path, src).map_err(|e| io(&path, e))?;
    refresh_checksum(root, &entry.files.tmp_mask)
}

/// Shrink a source mask below the area floor.
fn inject_tiny_source(root: &Path) -> Result<()> {
    let manifest = load_manifest(root)?;
    let entry = pick_copy_move(&manifest);
    let path = root.join(&entry.files.src_mask);
    let old = read_gray_png(&path)?;
    let mut mask = image::GrayImage::new(old.width(), old.height());
    mask.put_pixel(10, 10, image::Luma([255]));
    mask.put_pixel(11, 10, image::Luma([255]));
    std::fs::write(&path, encode_gray_png(&mask)?).map_err(|e| io(&path, e))?;
    refresh_checksum(root, &entry.files.src_mask)
}

/// Write a pixel value that is neither 0 nor 255.
fn inject_nonbinary_mask(root: &Path) -> Result<()> {
    let manifest = load_manifest(root)?;
    let entry = pick_copy_move(&manifest);
    let path = root.join(&entry.files.src_mask);
    let mut mask = read_gray_png(&path)?;
    mask.put_pixel(5, 5, image::Luma([7]));
    std::fs::write(&path, encode_gray_png(&mask)?).map_err(|e| io(&path, e))?;
    refresh_checksum(root, &entry.files.src_mask)
}

fn split_paths(root: &Path) -> [std::path::PathBuf; 3] {
    ["train", "val", "test"].map(|n| crate::dataset::split_file_path(root, n))
}

/// Move one derivative of a multi-record group into another split.
fn inject_split_tear(root: &Path) -> Result<()> {
    let manifest = load_manifest(root)?;
    let group = manifest
        .items
        .iter()
        .find(|e| {
            manifest
                .items
                .iter()
                .filter(|o| o.raw_image_id == e.raw_image_id)
                .count()
                >= 2
        })
        .expect("fixture datasets hold a multi-record group");
    let [train, val, test] = split_paths(root);
    for (path, other) in [(&train, &val), (&val, &test), (&test, &train)] {
        let ids = crate::dataset::read_split_file(path)?;
        if let Some(pos) = ids.iter().position(|id| id == &group.image_id) {
            let mut from = ids;
            let moved = from.remove(pos);
            crate::dataset::write_split_file(&from, path)?;
            let mut to = crate::dataset::read_split_file(other)?;
            to.push(moved);
            return crate::dataset::write_split_file(&to, other);
        }
    }
    unreachable!("every manifest item belongs to a split");
}

/// Drop one id from its split file entirely.
fn inject_split_drop(root: &Path) -> Result<()> {
    for path in &split_paths(root) {
        let mut ids = crate::dataset::read_split_file(path)?;
        if !ids.is_empty() {
            ids.remove(0);
            return crate::dataset::write_split_file(&ids, path);
        }
    }
    unreachable!("at least one split file is non-empty");
}

/// Prune 5% of one qid from the balanced subset.
fn inject_balance_prune(root: &Path) -> Result<()> {
    let record_path = root.join(crate::curate::BALANCE_RECORD_FILE);
    let text = std::fs::read_to_string(&record_path).map_err(|e| io(&record_path, e))?;
    let record: crate::curate::BalanceRecord =
        serde_json::from_str(&text).map_err(|e| Error::ParseError {
            path: record_path.display().to_string(),
            line: e.line(),
            detail: e.to_string(),
        })?;
    let out_path = root.join(&record.output);
    let triples = read_triples(&out_path)?;
    let qid = triples.first().expect("balanced subset is non-empty").qid;
    let total = triples.iter().filter(|t| t.qid == qid).count();
    let drop = (total / 20).max(1);
    let mut dropped = 0;
    let kept: Vec<_> = triples
        .into_iter()
        .filter(|t| {
            if t.qid == qid && dropped < drop {
                dropped += 1;
                false
            } else {
                true
            }
        })
        .collect();
    crate::dataset::write_triples(&kept, &out_path)
}

/// Smuggle a fabricated triple into the balanced subset.
fn inject_balance_foreign(root: &Path) -> Result<()> {
    let record_path = root.join(crate::curate::BALANCE_RECORD_FILE);
    let text = std::fs::read_to_string(&record_path).map_err(|e| io(&record_path, e))?;
    let record: crate::curate::BalanceRecord =
        serde_json::from_str(&text).map_err(|e| Error::ParseError {
            path: record_path.display().to_string(),
            line: e.line(),
            detail: e.to_string(),
        })?;
    let out_path = root.join(&record.output);
    let mut triples = read_triples(&out_path)?;
    let mut forged = triples.first().expect("balanced subset is non-empty").clone();
    forged.triple_id = "feedfacefeedface".into();
    triples.push(forged);
    crate::dataset::write_triples(&triples, &out_path)
}

/// Misstate the triple count in the manifest.
fn inject_count_edit(root: &Path) -> Result<()> {
    let mut manifest = read_manifest_value(root)?;
    let count = manifest["triple_count"].as_u64().unwrap_or(0);
    manifest["triple_count"] = serde_json::Value::from(count + 1);
    write_manifest_value(root, &manifest)
}

/// Append a triple pointing at a nonexistent item.
fn inject_unknown_image(root: &Path) -> Result<()> {
    let mut lines = triples_lines(root)?;
    let mut value: serde_json::Value = serde_json::from_str(
        lines.first().expect("triples file is never empty"),
    )
    .map_err(|e| Error::ParseError {
        path: TRIPLES_FILE.into(),
        line: 1,
        detail: e.to_string(),
    })?;
    value["image_id"] = serde_json::Value::String("ghost__orig".into());
    value["triple_id"] = serde_json::Value::String("deadbeefdeadbeef".into());
    lines.push(serde_json::to_string(&value).map_err(|e| Error::Registry(e.to_string()))?);
    save_triples_text(root, &lines)
}

/// The full catalog. Every fixture produced by the generation pipeline
/// with splits and a balanced subset supports every entry.
pub fn fault_catalog() -> Vec<Fault> {
    vec![
        Fault {
            name: "original_pixel_outside_mask",
            expected_rule: "diff_outside_mask",
            inject: inject_original_pixel,
        },
        Fault {
            name: "mask_bit_on_border",
            expected_rule: "tmp_touches_border",
            inject: inject_border_mask_bit,
        },
        Fault {
            name: "answer_flip",
            expected_rule: "answer_mismatch",
            inject: inject_answer_flip,
        },
        Fault {
            name: "checksum_edit",
            expected_rule: "checksum_mismatch",
            inject: inject_checksum_edit,
        },
        Fault {
            name: "triple_deletion",
            expected_rule: "missing_triple",
            inject: inject_triple_deletion,
        },
        Fault {
            name: "triple_duplicate",
            expected_rule: "duplicate_id",
            inject: inject_triple_duplicate,
        },
        Fault {
            name: "blur_mask_divergence",
            expected_rule: "blur_mask_mismatch",
            inject: inject_blur_mask_divergence,
        },
        Fault {
            name: "full_overlap",
            expected_rule: "overlap_exceeded",
            inject: inject_full_overlap,
        },
        Fault {
            name: "tiny_source_region",
            expected_rule: "area_out_of_bounds",
            inject: inject_tiny_source,
        },
        Fault {
            name: "nonbinary_mask_value",
            expected_rule: "mask_not_binary",
            inject: inject_nonbinary_mask,
        },
        Fault {
            name: "split_tear",
            expected_rule: "split_group_torn",
            inject: inject_split_tear,
        },
        Fault {
            name: "split_drop",
            expected_rule: "split_incomplete",
            inject: inject_split_drop,
        },
        Fault {
            name: "balance_prune",
            expected_rule: "balance_tolerance",
            inject: inject_balance_prune,
        },
        Fault {
            name: "balance_foreign_triple",
            expected_rule: "balance_foreign_triple",
            inject: inject_balance_foreign,
        },
        Fault {
            name: "triple_count_edit",
            expected_rule: "triple_count_mismatch",
            inject: inject_count_edit,
        },
        Fault {
            name: "unknown_image_reference",
            expected_rule: "unknown_image_id",
            inject: inject_unknown_image,
        },
    ]
}
