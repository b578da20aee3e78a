//! Independent brute-force verifier: re-checks every generation constraint
//! pixel-by-pixel, re-derives geometric answers from the rasters alone, and
//! validates whole datasets.
//!
//! Nothing here calls the mask-geometry or QA derivation helpers — every
//! count, centroid, bin, and bearing below is recomputed from first
//! principles with naive scans. Agreement with the generator is the test,
//! not an assumption.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use image::GrayImage;

pub mod faults;

use crate::curate::{BalanceRecord, BALANCE_RECORD_FILE};
use crate::dataset::{
    read_manifest, read_triples, sha256_hex, ItemEntry, Manifest, RecordKind, MANIFEST_FILE,
    TRIPLES_FILE,
};
use crate::error::{Error, Result};
use crate::qa::{Applicability, DatasetKind, Registry, Thresholds, Triple};
use crate::tamper::TargetClass;

/// One broken rule on one item.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub item_id: String,
    pub rule_id: String,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: [{}] {}", self.item_id, self.rule_id, self.detail)
    }
}

/// Outcome of a verification run; `pass` holds exactly when no violations
/// were found (warnings alone do not fail a run unless escalated).
#[derive(Clone, Debug, Default)]
pub struct VerificationReport {
    pub items_checked: u64,
    pub violations: Vec<Violation>,
    pub warnings: Vec<Violation>,
    pub pass: bool,
}

impl VerificationReport {
    fn finish(mut self, strict: bool) -> VerificationReport {
        if strict {
            self.violations.append(&mut self.warnings);
        }
        self.violations
            .sort_by(|a, b| (&a.item_id, &a.rule_id).cmp(&(&b.item_id, &b.rule_id)));
        self.warnings
            .sort_by(|a, b| (&a.item_id, &a.rule_id).cmp(&(&b.item_id, &b.rule_id)));
        self.pass = self.violations.is_empty();
        self
    }
}

/// Stored answer vs. independently recomputed answer for one triple.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub triple_id: String,
    pub qid: u8,
    pub stored: String,
    pub recomputed: String,
}

// ---------------------------------------------------------------------------
// naive raster scans (no shared geometry code)

/// A decoded mask file: plain bit vector plus a tally of non-{0,255}
/// pixels, reported as a violation rather than an error.
struct ScannedMask {
    w: u32,
    h: u32,
    bits: Vec<bool>,
    bad_values: u64,
}

fn scan_mask(gray: &GrayImage) -> ScannedMask {
    let (w, h) = gray.dimensions();
    let mut bits = Vec::with_capacity((w * h) as usize);
    let mut bad_values = 0;
    for p in gray.pixels() {
        match p.0[0] {
            0 => bits.push(false),
            255 => bits.push(true),
            _ => {
                bad_values += 1;
                bits.push(false);
            }
        }
    }
    ScannedMask { w, h, bits, bad_values }
}

impl ScannedMask {
    fn area(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0u64);
        for y in 0..self.h {
            for x in 0..self.w {
                if self.bits[(y * self.w + x) as usize] {
                    sx += f64::from(x);
                    sy += f64::from(y);
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    fn touches_border(&self) -> bool {
        for x in 0..self.w {
            if self.bits[x as usize] || self.bits[((self.h - 1) * self.w + x) as usize] {
                return true;
            }
        }
        for y in 0..self.h {
            if self.bits[(y * self.w) as usize] || self.bits[(y * self.w + self.w - 1) as usize] {
                return true;
            }
        }
        false
    }

    fn intersection(&self, other: &ScannedMask) -> u64 {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a && b)
            .count() as u64
    }
}

/// Nine-cell label by thirds, clamped at the far edge.
fn cell_label(c: (f64, f64), w: u32, h: u32) -> &'static str {
    const LABELS: [&str; 9] = [
        "top-left", "top", "top-right", "left", "center", "right", "bottom-left", "bottom",
        "bottom-right",
    ];
    let col = (((3.0 * c.0) / f64::from(w)).floor() as usize).min(2);
    let row = (((3.0 * c.1) / f64::from(h)).floor() as usize).min(2);
    LABELS[row * 3 + col]
}

fn size_label(area: u64, w: u32, h: u32, th: &Thresholds) -> &'static str {
    let ratio = area as f64 / (f64::from(w) * f64::from(h));
    if ratio < th.size_bins[0] {
        "tiny"
    } else if ratio < th.size_bins[1] {
        "small"
    } else if ratio < th.size_bins[2] {
        "medium"
    } else {
        "large"
    }
}

fn distance_label(src: (f64, f64), tmp: (f64, f64), w: u32, h: u32, th: &Thresholds) -> &'static str {
    let d = (tmp.0 - src.0).hypot(tmp.1 - src.1);
    let norm = d / f64::from(w).hypot(f64::from(h));
    if norm < th.distance_bins[0] {
        "adjacent"
    } else if norm < th.distance_bins[1] {
        "near"
    } else if norm < th.distance_bins[2] {
        "medium"
    } else {
        "far"
    }
}

/// Eight-wind label via compass bearing: clockwise degrees from screen
/// north, sectored by flooring into 45-degree wedges.
fn direction_label(src: (f64, f64), tmp: (f64, f64)) -> &'static str {
    const WINDS: [&str; 8] = [
        "north", "northeast", "east", "southeast", "south", "southwest", "west", "northwest",
    ];
    let dx = tmp.0 - src.0;
    let dy = tmp.1 - src.1;
    // y grows downward, so screen north is -dy
    let bearing = dx.atan2(-dy).to_degrees().rem_euclid(360.0);
    WINDS[(((bearing + 22.5).rem_euclid(360.0)) / 45.0).floor() as usize % 8]
}

// ---------------------------------------------------------------------------
// per-item constraint checks

fn read_gray(path: &Path) -> Result<GrayImage> {
    crate::dataset::read_gray_png(path)
}

struct LoadedItem {
    tampered: image::RgbImage,
    original: image::RgbImage,
    src: ScannedMask,
    tmp: ScannedMask,
}

fn load_item(root: &Path, entry: &ItemEntry) -> Result<LoadedItem> {
    Ok(LoadedItem {
        tampered: crate::dataset::read_rgb_png(&root.join(&entry.files.image))?,
        original: crate::dataset::read_rgb_png(&root.join(&entry.files.original))?,
        src: scan_mask(&read_gray(&root.join(&entry.files.src_mask))?),
        tmp: scan_mask(&read_gray(&root.join(&entry.files.tmp_mask))?),
    })
}

/// Re-check one record's generation constraints against its rasters.
pub fn verify_item(root: &Path, entry: &ItemEntry) -> Result<(Vec<Violation>, Vec<Violation>)> {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    let item = load_item(root, entry)?;
    let id = &entry.image_id;
    let mut flag = |rule: &str, detail: String| {
        violations.push(Violation {
            item_id: id.clone(),
            rule_id: rule.to_string(),
            detail,
        });
    };

    let (w, h) = item.original.dimensions();
    if item.tampered.dimensions() != (w, h)
        || (item.src.w, item.src.h) != (w, h)
        || (item.tmp.w, item.tmp.h) != (w, h)
    {
        flag("dimension_mismatch", "raster dimensions disagree".into());
        return Ok((violations, warnings));
    }
    for (mask, name) in [(&item.src, "source"), (&item.tmp, "tampering")] {
        if mask.bad_values > 0 {
            flag(
                "mask_not_binary",
                format!("{name} mask holds {} non-binary pixels", mask.bad_values),
            );
        }
    }

    // byte-diff support: every differing pixel must sit inside the
    // tampering mask, and tampered records should differ somewhere
    let mut outside = 0u64;
    let mut inside = 0u64;
    for y in 0..h {
        for x in 0..w {
            if item.tampered.get_pixel(x, y) != item.original.get_pixel(x, y) {
                if item.tmp.bits[(y * w + x) as usize] {
                    inside += 1;
                } else {
                    outside += 1;
                }
            }
        }
    }
    if outside > 0 {
        flag(
            "diff_outside_mask",
            format!("{outside} differing pixels outside the tampering mask"),
        );
    }

    let src_area = item.src.area();
    let tmp_area = item.tmp.area();
    match entry.kind {
        RecordKind::Untampered => {
            if src_area > 0 || tmp_area > 0 {
                flag(
                    "untampered_mask_nonzero",
                    format!("masks hold {src_area}+{tmp_area} set pixels"),
                );
            }
            if inside > 0 || outside > 0 {
                flag(
                    "untampered_pixels_changed",
                    format!("{} differing pixels", inside + outside),
                );
            }
            if entry.params.is_some() {
                flag("unexpected_params", "untampered record carries params".into());
            }
        }
        RecordKind::CopyMove | RecordKind::Blur => {
            if entry.params.is_none() {
                flag("missing_params", "tamper record lacks params".into());
            }
            if entry.class.is_none() {
                flag("missing_class", "tamper record lacks a class label".into());
            }
            if inside == 0 {
                warnings.push(Violation {
                    item_id: id.clone(),
                    rule_id: "degenerate_diff".into(),
                    detail: "no pixel differs inside the tampering mask".into(),
                });
            }
            // area bounds on the source region, integer-exact:
            // 0.1% <= area/(w*h) <= 15%
            let total = u64::from(w) * u64::from(h);
            if src_area * 1000 < total {
                flag(
                    "area_out_of_bounds",
                    format!("source area {src_area} below 0.1% of {total}"),
                );
            }
            if src_area * 20 > total * 3 {
                flag(
                    "area_out_of_bounds",
                    format!("source area {src_area} above 15% of {total}"),
                );
            }
            let is_road = entry.class == Some(TargetClass::Road);
            match entry.kind {
                RecordKind::CopyMove => {
                    // overlap <= 5% of the source region, integer-exact
                    let inter = item.src.intersection(&item.tmp);
                    if inter * 20 > src_area {
                        flag(
                            "overlap_exceeded",
                            format!("overlap {inter} of source {src_area} exceeds 5%"),
                        );
                    }
                    if !is_road {
                        if item.tmp.touches_border() {
                            flag(
                                "tmp_touches_border",
                                "pasted footprint touches the frame".into(),
                            );
                        }
                        if item.src.touches_border() {
                            flag(
                                "src_touches_border",
                                "source region touches the frame".into(),
                            );
                        }
                    }
                    if tmp_area == 0 {
                        flag("empty_mask", "tampering mask is empty".into());
                    }
                }
                RecordKind::Blur => {
                    if item.src.bits != item.tmp.bits {
                        let differing = item
                            .src
                            .bits
                            .iter()
                            .zip(&item.tmp.bits)
                            .filter(|(a, b)| a != b)
                            .count();
                        flag(
                            "blur_mask_mismatch",
                            format!("source and tampering masks differ in {differing} pixels"),
                        );
                    }
                    if !is_road && item.tmp.touches_border() {
                        flag("tmp_touches_border", "blur region touches the frame".into());
                    }
                }
                RecordKind::Untampered => unreachable!(),
            }
        }
    }
    Ok((violations, warnings))
}

// ---------------------------------------------------------------------------
// answer recomputation

fn applicability_of(kind: RecordKind) -> Applicability {
    match kind {
        RecordKind::CopyMove => Applicability::CopyMove,
        RecordKind::Blur => Applicability::Blur,
        RecordKind::Untampered => Applicability::Untampered,
    }
}

/// Recompute every derivable answer of one record from its rasters and
/// manifest params, through this module's own scans. Returns one mismatch
/// per disagreement; errors if an expected triple is absent.
pub fn recompute_answers(
    root: &Path,
    entry: &ItemEntry,
    triples: &[Triple],
    registry: &Registry,
    dataset_kind: DatasetKind,
) -> Result<Vec<Mismatch>> {
    let th = registry.thresholds();
    let item = load_item(root, entry)?;
    let (w, h) = item.original.dimensions();
    let applicability = applicability_of(entry.kind);

    let by_qid: BTreeMap<u8, &Triple> = triples
        .iter()
        .filter(|t| t.image_id == entry.image_id)
        .map(|t| (t.qid, t))
        .collect();

    let src_centroid = item.src.centroid();
    let tmp_centroid = item.tmp.centroid();
    let mut mismatches = Vec::new();
    for template in registry.templates(dataset_kind) {
        if !template.applicability.contains(&applicability) {
            continue;
        }
        let triple = by_qid.get(&template.qid).copied().ok_or_else(|| {
            Error::MissingTriple(format!("{} q{}", entry.image_id, template.qid))
        })?;
        // corpus-metadata answers (theme, sole-in-class) cannot be
        // recomputed from rasters; everything else can
        let recomputed: Option<String> = match template.qid {
            1 => Some(if entry.kind == RecordKind::Untampered { "no" } else { "yes" }.into()),
            2 => entry.class.map(|c| c.label().to_string()),
            4 => tmp_centroid.map(|c| cell_label(c, w, h).to_string()),
            5 => Some(size_label(item.tmp.area(), w, h, &th).into()),
            6 => src_centroid.map(|c| cell_label(c, w, h).to_string()),
            7 => src_centroid
                .zip(tmp_centroid)
                .map(|(s, t)| direction_label(s, t).to_string()),
            8 => src_centroid
                .zip(tmp_centroid)
                .map(|(s, t)| distance_label(s, t, w, h, &th).to_string()),
            9 => Some(size_label(item.src.area(), w, h, &th).into()),
            10 => Some(if item.tmp.touches_border() { "yes" } else { "no" }.into()),
            12 => entry.params.as_ref().map(|p| {
                if p.scale > th.size_relation[1] {
                    "enlarged".into()
                } else if p.scale < th.size_relation[0] {
                    "shrunk".into()
                } else {
                    "unchanged".to_string()
                }
            }),
            13 => Some(if item.src.intersection(&item.tmp) > 0 { "yes" } else { "no" }.into()),
            14 => entry
                .params
                .as_ref()
                .map(|p| if p.rotation_deg != 0.0 { "yes" } else { "no" }.into()),
            15 => match entry.kind {
                RecordKind::CopyMove => Some("copy-move".into()),
                RecordKind::Blur => entry
                    .params
                    .as_ref()
                    .and_then(|p| p.blur_kind)
                    .map(|k| k.answer_label().to_string()),
                RecordKind::Untampered => None,
            },
            _ => None,
        };
        if let Some(value) = recomputed {
            if value != triple.answer {
                mismatches.push(Mismatch {
                    triple_id: triple.triple_id.clone(),
                    qid: template.qid,
                    stored: triple.answer.clone(),
                    recomputed: value,
                });
            }
        }
    }
    Ok(mismatches)
}

// ---------------------------------------------------------------------------
// whole-dataset verification

fn check_files(root: &Path, manifest: &Manifest, report: &mut VerificationReport) {
    for (rel, recorded) in &manifest.checksums {
        let path = root.join(rel);
        match std::fs::read(&path) {
            Err(_) => report.violations.push(Violation {
                item_id: rel.clone(),
                rule_id: "file_missing".into(),
                detail: "checksummed file cannot be read".into(),
            }),
            Ok(bytes) => {
                let actual = sha256_hex(&bytes);
                if &actual != recorded {
                    report.violations.push(Violation {
                        item_id: rel.clone(),
                        rule_id: "checksum_mismatch".into(),
                        detail: format!("recorded {recorded} actual {actual}"),
                    });
                }
            }
        }
    }
    for entry in &manifest.items {
        for rel in entry.files.all() {
            if !manifest.checksums.contains_key(rel) {
                report.violations.push(Violation {
                    item_id: entry.image_id.clone(),
                    rule_id: "missing_checksum".into(),
                    detail: format!("{rel} has no recorded digest"),
                });
            }
        }
    }
}

fn check_triples(
    manifest: &Manifest,
    triples: &[Triple],
    report: &mut VerificationReport,
) -> BTreeMap<String, Vec<Triple>> {
    let mut seen = BTreeSet::new();
    for t in triples {
        if !seen.insert(&t.triple_id) {
            report.violations.push(Violation {
                item_id: t.triple_id.clone(),
                rule_id: "duplicate_id".into(),
                detail: "triple id appears more than once".into(),
            });
        }
    }
    if manifest.triple_count != triples.len() as u64 {
        report.violations.push(Violation {
            item_id: TRIPLES_FILE.into(),
            rule_id: "triple_count_mismatch".into(),
            detail: format!(
                "manifest records {} triples, file holds {}",
                manifest.triple_count,
                triples.len()
            ),
        });
    }
    let known: BTreeSet<&str> = manifest.items.iter().map(|e| e.image_id.as_str()).collect();
    let mut by_image: BTreeMap<String, Vec<Triple>> = BTreeMap::new();
    for t in triples {
        if !known.contains(t.image_id.as_str()) {
            report.violations.push(Violation {
                item_id: t.triple_id.clone(),
                rule_id: "unknown_image_id".into(),
                detail: format!("triple references absent item '{}'", t.image_id),
            });
            continue;
        }
        by_image.entry(t.image_id.clone()).or_default().push(t.clone());
    }
    by_image
}

fn check_splits(root: &Path, manifest: &Manifest, report: &mut VerificationReport) {
    let names = ["train", "val", "test"];
    let paths: Vec<_> = names
        .iter()
        .map(|n| crate::dataset::split_file_path(root, n))
        .collect();
    if !paths.iter().any(|p| p.exists()) {
        return;
    }
    let mut assignment: BTreeMap<String, &str> = BTreeMap::new();
    for (name, path) in names.iter().zip(&paths) {
        let Ok(ids) = crate::dataset::read_split_file(path) else {
            continue;
        };
        for id in ids {
            if let Some(prev) = assignment.insert(id.clone(), name) {
                report.violations.push(Violation {
                    item_id: id,
                    rule_id: "split_overlap".into(),
                    detail: format!("listed in both {prev} and {name}"),
                });
            }
        }
    }
    let mut group_split: BTreeMap<&str, &str> = BTreeMap::new();
    for entry in &manifest.items {
        match assignment.get(&entry.image_id) {
            None => report.violations.push(Violation {
                item_id: entry.image_id.clone(),
                rule_id: "split_incomplete".into(),
                detail: "item missing from every split".into(),
            }),
            Some(split) => {
                // derivatives of one original stay together
                match group_split.get(entry.raw_image_id.as_str()) {
                    None => {
                        group_split.insert(&entry.raw_image_id, split);
                    }
                    Some(prev) if prev != split => report.violations.push(Violation {
                        item_id: entry.image_id.clone(),
                        rule_id: "split_group_torn".into(),
                        detail: format!(
                            "group '{}' spans {prev} and {split}",
                            entry.raw_image_id
                        ),
                    }),
                    Some(_) => {}
                }
            }
        }
    }
    let known: BTreeSet<&str> = manifest.items.iter().map(|e| e.image_id.as_str()).collect();
    for (id, split) in &assignment {
        if !known.contains(id.as_str()) {
            report.violations.push(Violation {
                item_id: id.clone(),
                rule_id: "unknown_split_id".into(),
                detail: format!("{split} lists an id absent from the manifest"),
            });
        }
    }
}

fn check_balance(root: &Path, triples: &[Triple], report: &mut VerificationReport) {
    let path = root.join(BALANCE_RECORD_FILE);
    if !path.exists() {
        return;
    }
    let record: BalanceRecord = match std::fs::read_to_string(&path)
        .map_err(|e| Error::io(path.display().to_string(), e))
        .and_then(|text| {
            serde_json::from_str(&text).map_err(|e| Error::ParseError {
                path: path.display().to_string(),
                line: e.line(),
                detail: e.to_string(),
            })
        }) {
        Ok(r) => r,
        Err(e) => {
            report.violations.push(Violation {
                item_id: BALANCE_RECORD_FILE.into(),
                rule_id: "balance_record_unreadable".into(),
                detail: e.to_string(),
            });
            return;
        }
    };
    let balanced = match read_triples(&root.join(&record.output)) {
        Ok(t) => t,
        Err(e) => {
            report.violations.push(Violation {
                item_id: record.output.clone(),
                rule_id: "balance_output_unreadable".into(),
                detail: e.to_string(),
            });
            return;
        }
    };
    let known: BTreeSet<&str> = triples.iter().map(|t| t.triple_id.as_str()).collect();
    for t in &balanced {
        if !known.contains(t.triple_id.as_str()) {
            report.violations.push(Violation {
                item_id: t.triple_id.clone(),
                rule_id: "balance_foreign_triple".into(),
                detail: "balanced subset holds a triple absent from the source".into(),
            });
        }
    }
    let mut per_qid: BTreeMap<u8, u64> = BTreeMap::new();
    for t in &balanced {
        *per_qid.entry(t.qid).or_default() += 1;
    }
    let (min, max) = (
        per_qid.values().copied().min().unwrap_or(0),
        per_qid.values().copied().max().unwrap_or(0),
    );
    if min == 0 || (max as f64 / min as f64) - 1.0 > record.spec.tolerance {
        report.violations.push(Violation {
            item_id: record.output.clone(),
            rule_id: "balance_tolerance".into(),
            detail: format!(
                "per-qid counts span {min}..{max}, beyond tolerance {}",
                record.spec.tolerance
            ),
        });
    }
}

/// Verify a whole generated dataset: file digests, per-item constraints,
/// answer recomputation, split partition, and recorded balance tolerance.
/// With `strict`, warnings count as violations.
pub fn verify_dataset(root: &Path, registry: &Registry, strict: bool) -> Result<VerificationReport> {
    let manifest = read_manifest(&root.join(MANIFEST_FILE), false)?;
    let triples = read_triples(&root.join(TRIPLES_FILE))?;
    let mut report = VerificationReport::default();

    check_files(root, &manifest, &mut report);
    let by_image = check_triples(&manifest, &triples, &mut report);
    check_splits(root, &manifest, &mut report);
    check_balance(root, &triples, &mut report);

    let no_triples = Vec::new();
    for entry in &manifest.items {
        let (violations, warnings) = verify_item(root, entry)?;
        report.violations.extend(violations);
        report.warnings.extend(warnings);

        let item_triples = by_image.get(&entry.image_id).unwrap_or(&no_triples);
        match recompute_answers(root, entry, item_triples, registry, manifest.dataset_kind) {
            Ok(mismatches) => {
                for m in mismatches {
                    report.violations.push(Violation {
                        item_id: entry.image_id.clone(),
                        rule_id: "answer_mismatch".into(),
                        detail: format!(
                            "q{} '{}' stored '{}' recomputed '{}'",
                            m.qid, m.triple_id, m.stored, m.recomputed
                        ),
                    });
                }
            }
            Err(Error::MissingTriple(which)) => report.violations.push(Violation {
                item_id: entry.image_id.clone(),
                rule_id: "missing_triple".into(),
                detail: format!("expected triple {which} is absent"),
            }),
            Err(other) => return Err(other),
        }

        // no triple may carry a qid outside the record's expected set
        let applicability = applicability_of(entry.kind);
        let expected: BTreeSet<u8> = registry
            .templates(manifest.dataset_kind)
            .filter(|t| t.applicability.contains(&applicability))
            .map(|t| t.qid)
            .collect();
        for t in item_triples {
            if !expected.contains(&t.qid) {
                report.violations.push(Violation {
                    item_id: entry.image_id.clone(),
                    rule_id: "unexpected_qid".into(),
                    detail: format!("triple '{}' asks q{}", t.triple_id, t.qid),
                });
            }
        }
    }
    report.items_checked = manifest.items.len() as u64;
    Ok(report.finish(strict))
}
