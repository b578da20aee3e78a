//! On-disk contracts: corpus layout, per-record output quintuple, the
//! triples file, split lists, and the checksummed manifest.
//!
//! Every writer is deterministic: the PNG encoder is pinned to one
//! filter/compression configuration, JSON keys serialize in sorted order,
//! and the manifest is written atomically via rename so an interrupted run
//! never leaves a half-registered dataset.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, GrayImage, ImageEncoder, RgbImage};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::qa::{DatasetKind, Triple};
use crate::tamper::{TamperParams, TargetClass};

/// Corpus images are fixed-size tiles.
pub const CORPUS_EDGE: u32 = 512;

/// Name of the corpus index file under the corpus root.
pub const CORPUS_INDEX: &str = "corpus.json";

pub const DIR_IMAGES: &str = "images";
pub const DIR_ORIGINALS: &str = "originals";
pub const DIR_MASKS_SEG: &str = "masks_seg";
pub const DIR_MASKS_SRC: &str = "masks_src";
pub const DIR_MASKS_TMP: &str = "masks_tmp";
pub const DIR_SPLITS: &str = "splits";
pub const TRIPLES_FILE: &str = "triples.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

fn io_err(path: &Path, e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::NotFound {
        Error::MissingFile(path.display().to_string())
    } else {
        Error::io(path.display().to_string(), e)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

// ---------------------------------------------------------------------------
// corpus input

/// One annotated object in a corpus image.
#[derive(Clone, Debug)]
pub struct CorpusInstance {
    pub instance_id: String,
    pub class_label: TargetClass,
    pub mask: BinaryMask,
}

/// One validated corpus item with its pixel data loaded.
#[derive(Clone, Debug)]
pub struct CorpusItem {
    pub image_id: String,
    pub image: RgbImage,
    pub semantic_mask: GrayImage,
    pub theme: Option<String>,
    pub instances: Vec<CorpusInstance>,
}

#[derive(Debug, Deserialize)]
struct IndexInstance {
    instance_id: String,
    class: TargetClass,
    mask: String,
}

#[derive(Debug, Deserialize)]
struct IndexItem {
    image_id: String,
    image: String,
    semantic_mask: String,
    #[serde(default)]
    theme: Option<String>,
    instances: Vec<IndexInstance>,
}

#[derive(Debug, Deserialize)]
struct IndexFile {
    items: Vec<IndexItem>,
}

fn open_image(path: &Path) -> Result<image::DynamicImage> {
    if !path.exists() {
        return Err(Error::MissingFile(path.display().to_string()));
    }
    image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => io_err(path, io),
        other => Error::ParseError {
            path: path.display().to_string(),
            line: 0,
            detail: other.to_string(),
        },
    })
}

fn check_dims(path: &Path, got: (u32, u32)) -> Result<()> {
    if got != (CORPUS_EDGE, CORPUS_EDGE) {
        return Err(Error::BadDimensions {
            path: path.display().to_string(),
            got_w: got.0,
            got_h: got.1,
            want_w: CORPUS_EDGE,
            want_h: CORPUS_EDGE,
        });
    }
    Ok(())
}

/// Read a {0,255} single-channel PNG as a binary mask.
pub fn read_mask_png(path: &Path) -> Result<BinaryMask> {
    let gray = open_image(path)?.to_luma8();
    let (w, h) = gray.dimensions();
    let mut bits = Vec::with_capacity(w as usize * h as usize);
    for value in gray.pixels() {
        match value.0[0] {
            0 => bits.push(0),
            255 => bits.push(1),
            v => {
                return Err(Error::NonBinaryMask {
                    path: path.display().to_string(),
                    value: v,
                })
            }
        }
    }
    BinaryMask::from_bits(w, h, bits)
}

pub fn read_rgb_png(path: &Path) -> Result<RgbImage> {
    Ok(open_image(path)?.to_rgb8())
}

pub fn read_gray_png(path: &Path) -> Result<GrayImage> {
    Ok(open_image(path)?.to_luma8())
}

/// Load and validate the whole corpus under `root`: images must be
/// 512x512, masks must match dimensions and hold only values 0 and 255.
pub fn load_corpus(root: &Path) -> Result<Vec<CorpusItem>> {
    let index_path = root.join(CORPUS_INDEX);
    let text = std::fs::read_to_string(&index_path).map_err(|e| io_err(&index_path, e))?;
    let index: IndexFile = serde_json::from_str(&text).map_err(|e| Error::ParseError {
        path: index_path.display().to_string(),
        line: e.line(),
        detail: e.to_string(),
    })?;
    let mut seen_ids = std::collections::BTreeSet::new();
    let mut items = Vec::with_capacity(index.items.len());
    for entry in index.items {
        if !seen_ids.insert(entry.image_id.clone()) {
            return Err(Error::InvalidRecord(
                entry.image_id.clone(),
                "duplicate image id in corpus index".into(),
            ));
        }
        let image_path = root.join(&entry.image);
        let image = open_image(&image_path)?.to_rgb8();
        check_dims(&image_path, image.dimensions())?;

        let seg_path = root.join(&entry.semantic_mask);
        let semantic_mask = read_gray_png(&seg_path)?;
        check_dims(&seg_path, semantic_mask.dimensions())?;

        let mut instances = Vec::with_capacity(entry.instances.len());
        let mut seen_instances = std::collections::BTreeSet::new();
        for inst in entry.instances {
            if !seen_instances.insert(inst.instance_id.clone()) {
                return Err(Error::InvalidRecord(
                    inst.instance_id.clone(),
                    format!("duplicate instance id in item '{}'", entry.image_id),
                ));
            }
            let mask_path = root.join(&inst.mask);
            let mask = read_mask_png(&mask_path)?;
            check_dims(&mask_path, mask.dims())?;
            instances.push(CorpusInstance {
                instance_id: inst.instance_id,
                class_label: inst.class,
                mask,
            });
        }
        items.push(CorpusItem {
            image_id: entry.image_id,
            image,
            semantic_mask,
            theme: entry.theme,
            instances,
        });
    }
    Ok(items)
}

// ---------------------------------------------------------------------------
// deterministic PNG output

fn encode_png(bytes: &[u8], w: u32, h: u32, color: ExtendedColorType) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    // pinned encoder settings: byte-identical output is part of the contract
    PngEncoder::new_with_quality(&mut out, CompressionType::Fast, FilterType::NoFilter)
        .write_image(bytes, w, h, color)
        .map_err(|e| Error::Registry(format!("png encode: {e}")))?;
    Ok(out)
}

pub fn encode_rgb_png(image: &RgbImage) -> Result<Vec<u8>> {
    let (w, h) = image.dimensions();
    encode_png(image.as_raw(), w, h, ExtendedColorType::Rgb8)
}

pub fn encode_gray_png(image: &GrayImage) -> Result<Vec<u8>> {
    let (w, h) = image.dimensions();
    encode_png(image.as_raw(), w, h, ExtendedColorType::L8)
}

/// Render a binary mask as the on-disk {0,255} grayscale convention.
pub fn mask_to_gray(mask: &BinaryMask) -> GrayImage {
    let (w, h) = mask.dims();
    let bytes: Vec<u8> = mask.bits().iter().map(|&b| b * 255).collect();
    GrayImage::from_raw(w, h, bytes).expect("mask dimensions are consistent")
}

pub fn encode_mask_png(mask: &BinaryMask) -> Result<Vec<u8>> {
    encode_gray_png(&mask_to_gray(mask))
}

// ---------------------------------------------------------------------------
// output records and manifest

/// Record flavor as recorded in the manifest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    CopyMove,
    Blur,
    Untampered,
}

/// Relative paths of the five rasters of one record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSet {
    pub image: String,
    pub original: String,
    pub seg: String,
    pub src_mask: String,
    pub tmp_mask: String,
}

impl FileSet {
    pub fn all(&self) -> [&str; 5] {
        [
            &self.image,
            &self.original,
            &self.seg,
            &self.src_mask,
            &self.tmp_mask,
        ]
    }
}

/// One dataset record in the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemEntry {
    pub image_id: String,
    pub raw_image_id: String,
    pub record_id: String,
    pub kind: RecordKind,
    /// Tampered instance class; absent for untampered records.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub class: Option<TargetClass>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub params: Option<TamperParams>,
    pub files: FileSet,
}

/// The dataset's self-describing index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub global_seed: u64,
    pub dataset_kind: DatasetKind,
    pub items: Vec<ItemEntry>,
    pub triple_count: u64,
    pub checksums: BTreeMap<String, String>,
}

/// The five rasters of one record, ready to write.
pub struct ItemRasters<'a> {
    pub tampered: &'a RgbImage,
    pub original: &'a RgbImage,
    pub seg: &'a GrayImage,
    pub src_mask: &'a BinaryMask,
    pub tmp_mask: &'a BinaryMask,
}

/// Output image id for a record of a raw corpus image.
pub fn output_image_id(raw_image_id: &str, record_id: &str) -> String {
    format!("{raw_image_id}__{record_id}")
}

/// A written record: its manifest entry plus per-file digests.
pub struct WrittenItem {
    pub entry: ItemEntry,
    pub checksums: Vec<(String, String)>,
}

pub fn ensure_layout(root: &Path) -> Result<()> {
    for dir in [
        DIR_IMAGES,
        DIR_ORIGINALS,
        DIR_MASKS_SEG,
        DIR_MASKS_SRC,
        DIR_MASKS_TMP,
        DIR_SPLITS,
    ] {
        let p = root.join(dir);
        std::fs::create_dir_all(&p).map_err(|e| io_err(&p, e))?;
    }
    Ok(())
}

/// Write one record's five rasters under the output layout and return its
/// manifest entry. Identical inputs produce identical bytes.
pub fn write_item(
    root: &Path,
    raw_image_id: &str,
    record_id: &str,
    kind: RecordKind,
    class: Option<TargetClass>,
    params: Option<&TamperParams>,
    rasters: &ItemRasters,
) -> Result<WrittenItem> {
    let id = output_image_id(raw_image_id, record_id);
    let files = FileSet {
        image: format!("{DIR_IMAGES}/{id}__image.png"),
        original: format!("{DIR_ORIGINALS}/{id}__original.png"),
        seg: format!("{DIR_MASKS_SEG}/{id}__seg.png"),
        src_mask: format!("{DIR_MASKS_SRC}/{id}__src.png"),
        tmp_mask: format!("{DIR_MASKS_TMP}/{id}__tmp.png"),
    };
    let encoded = [
        (files.image.clone(), encode_rgb_png(rasters.tampered)?),
        (files.original.clone(), encode_rgb_png(rasters.original)?),
        (files.seg.clone(), encode_gray_png(rasters.seg)?),
        (files.src_mask.clone(), encode_mask_png(rasters.src_mask)?),
        (files.tmp_mask.clone(), encode_mask_png(rasters.tmp_mask)?),
    ];
    let mut checksums = Vec::with_capacity(5);
    for (rel, bytes) in &encoded {
        let path = root.join(rel);
        std::fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        checksums.push((rel.clone(), sha256_hex(bytes)));
    }
    Ok(WrittenItem {
        entry: ItemEntry {
            image_id: id,
            raw_image_id: raw_image_id.to_string(),
            record_id: record_id.to_string(),
            kind,
            class,
            params: params.cloned(),
            files,
        },
        checksums,
    })
}

// ---------------------------------------------------------------------------
// canonical JSON

/// Serialize with sorted keys (serde_json maps are ordered) and a trailing
/// newline.
fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Registry(format!("serialize: {e}")))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Registry(format!("serialize: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn to_canonical_json_line<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Registry(format!("serialize: {e}")))?;
    serde_json::to_string(&v).map_err(|e| Error::Registry(format!("serialize: {e}")))
}

// ---------------------------------------------------------------------------
// triples file

/// One triple per line, keys in sorted order; byte-stable across writes.
pub fn write_triples(triples: &[Triple], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for t in triples {
        let line = to_canonical_json_line(t)?;
        writeln!(w, "{line}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_triples(path: &Path) -> Result<Vec<Triple>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let t: Triple = serde_json::from_str(line).map_err(|e| Error::ParseError {
            path: path.display().to_string(),
            line: i + 1,
            detail: e.to_string(),
        })?;
        out.push(t);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// manifest

/// Canonical write, atomic via rename: readers never observe a partial
/// manifest and an interrupted run registers nothing.
pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let text = to_canonical_json(manifest)?;
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// Read the manifest; with `verify_checksums` every referenced file is
/// re-hashed against its recorded digest.
pub fn read_manifest(path: &Path, verify_checksums: bool) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::ParseError {
        path: path.display().to_string(),
        line: e.line(),
        detail: e.to_string(),
    })?;
    if verify_checksums {
        let root = path.parent().unwrap_or_else(|| Path::new("."));
        for (rel, recorded) in &manifest.checksums {
            let file = root.join(rel);
            let bytes = std::fs::read(&file).map_err(|_| Error::MissingFile(rel.clone()))?;
            let actual = sha256_hex(&bytes);
            if &actual != recorded {
                return Err(Error::ChecksumMismatch {
                    path: rel.clone(),
                    recorded: recorded.clone(),
                    actual,
                });
            }
        }
        for item in &manifest.items {
            for rel in item.files.all() {
                if !root.join(rel).exists() {
                    return Err(Error::MissingFile(rel.to_string()));
                }
            }
        }
    }
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// split lists

pub fn split_file_path(root: &Path, split: &str) -> PathBuf {
    root.join(DIR_SPLITS).join(format!("{split}.txt"))
}

/// One raw image id per line.
pub fn write_split_file(ids: &[String], path: &Path) -> Result<()> {
    let mut text = String::new();
    for id in ids {
        text.push_str(id);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_split_file(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(text.lines().filter(|l| !l.is_empty()).map(str::to_string).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qa::Category;
    use tempfile::TempDir;

    fn sample_triple(n: u8) -> Triple {
        Triple {
            triple_id: format!("id{n:02}"),
            image_id: format!("img__{n}"),
            qid: n,
            category: Category::Basic,
            question_text: "Has this image been tampered with?".into(),
            answer: "yes".into(),
        }
    }

    fn test_rgb(seed: u8) -> RgbImage {
        RgbImage::from_fn(CORPUS_EDGE, CORPUS_EDGE, |x, y| {
            image::Rgb([
                (x % 251) as u8 ^ seed,
                (y % 241) as u8,
                ((x + y) % 253) as u8,
            ])
        })
    }

    fn test_mask() -> BinaryMask {
        BinaryMask::from_fn(CORPUS_EDGE, CORPUS_EDGE, |x, y| {
            (100..150).contains(&x) && (200..260).contains(&y)
        })
    }

    #[test]
    fn triples_round_trip_and_canonical_bytes() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join(TRIPLES_FILE);
        let triples: Vec<Triple> = (1..=15).map(sample_triple).collect();
        write_triples(&triples, &path).unwrap();
        let back = read_triples(&path).unwrap();
        assert_eq!(back, triples);

        let first = std::fs::read(&path).unwrap();
        write_triples(&triples, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);

        // keys appear in sorted order on every line
        let text = String::from_utf8(first).unwrap();
        let line = text.lines().next().unwrap();
        let positions: Vec<usize> = [
            "\"answer\"",
            "\"category\"",
            "\"image_id\"",
            "\"qid\"",
            "\"question_text\"",
            "\"triple_id\"",
        ]
        .iter()
        .map(|k| line.find(k).unwrap())
        .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{line}");
    }

    #[test]
    fn malformed_triple_line_reports_line_number() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join(TRIPLES_FILE);
        let triples: Vec<Triple> = (1..=10).map(sample_triple).collect();
        write_triples(&triples, &path).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let mut broken: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        broken[6] = "{not json".into();
        text = broken.join("\n");
        std::fs::write(&path, text).unwrap();
        match read_triples(&path).unwrap_err() {
            Error::ParseError { line, .. } => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn write_item_emits_five_deterministic_files() {
        let dir = TempDir::new().unwrap();
        ensure_layout(dir.path()).unwrap();
        let tampered = test_rgb(3);
        let original = test_rgb(0);
        let seg = GrayImage::from_pixel(CORPUS_EDGE, CORPUS_EDGE, image::Luma([7]));
        let mask = test_mask();
        let rasters = ItemRasters {
            tampered: &tampered,
            original: &original,
            seg: &seg,
            src_mask: &mask,
            tmp_mask: &mask,
        };
        let written = write_item(dir.path(), "imgA", "i1-bl", RecordKind::Blur, None, None, &rasters)
            .unwrap();
        assert_eq!(written.entry.image_id, "imgA__i1-bl");
        assert_eq!(written.checksums.len(), 5);
        for rel in written.entry.files.all() {
            assert!(dir.path().join(rel).exists(), "{rel}");
        }
        // blur record: identical masks serialize to identical bytes
        let src = std::fs::read(dir.path().join(&written.entry.files.src_mask)).unwrap();
        let tmp = std::fs::read(dir.path().join(&written.entry.files.tmp_mask)).unwrap();
        assert_eq!(src, tmp);

        // second write is byte-identical
        let again = write_item(dir.path(), "imgA", "i1-bl", RecordKind::Blur, None, None, &rasters)
            .unwrap();
        assert_eq!(written.checksums, again.checksums);
        for (rel, digest) in &written.checksums {
            let bytes = std::fs::read(dir.path().join(rel)).unwrap();
            assert_eq!(&sha256_hex(&bytes), digest);
        }
    }

    #[test]
    fn mask_png_round_trip() {
        let dir = TempDir::new().unwrap();
        let mask = test_mask();
        let path = dir.path().join("m.png");
        std::fs::write(&path, encode_mask_png(&mask).unwrap()).unwrap();
        let back = read_mask_png(&path).unwrap();
        assert_eq!(back, mask);
    }

    #[test]
    fn non_binary_mask_is_rejected() {
        let dir = TempDir::new().unwrap();
        let mut gray = GrayImage::from_pixel(8, 8, image::Luma([0]));
        gray.put_pixel(3, 3, image::Luma([7]));
        let path = dir.path().join("bad.png");
        std::fs::write(&path, encode_gray_png(&gray).unwrap()).unwrap();
        match read_mask_png(&path).unwrap_err() {
            Error::NonBinaryMask { value, .. } => assert_eq!(value, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn manifest_fixture(dir: &Path) -> Manifest {
        ensure_layout(dir).unwrap();
        let tampered = test_rgb(1);
        let original = test_rgb(0);
        let seg = GrayImage::from_pixel(CORPUS_EDGE, CORPUS_EDGE, image::Luma([1]));
        let mask = test_mask();
        let rasters = ItemRasters {
            tampered: &tampered,
            original: &original,
            seg: &seg,
            src_mask: &mask,
            tmp_mask: &mask,
        };
        let written =
            write_item(dir, "imgA", "i1-cm", RecordKind::CopyMove, None, None, &rasters).unwrap();
        Manifest {
            tool_version: "0.0-test".into(),
            global_seed: 7,
            dataset_kind: DatasetKind::Cmqa,
            items: vec![written.entry],
            triple_count: 14,
            checksums: written.checksums.into_iter().collect(),
        }
    }

    #[test]
    fn manifest_round_trip_and_verification() {
        let dir = TempDir::new().unwrap();
        let manifest = manifest_fixture(dir.path());
        let path = dir.path().join(MANIFEST_FILE);
        write_manifest(&manifest, &path).unwrap();
        let back = read_manifest(&path, true).unwrap();
        assert_eq!(back, manifest);

        // canonical: double write is byte-identical
        let bytes = std::fs::read(&path).unwrap();
        write_manifest(&manifest, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes);
    }

    #[test]
    fn manifest_detects_corruption_and_missing_files() {
        let dir = TempDir::new().unwrap();
        let manifest = manifest_fixture(dir.path());
        let path = dir.path().join(MANIFEST_FILE);
        write_manifest(&manifest, &path).unwrap();

        // flip one byte inside a referenced png
        let target = dir.path().join(&manifest.items[0].files.image);
        let mut bytes = std::fs::read(&target).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xff;
        std::fs::write(&target, &bytes).unwrap();
        assert!(matches!(
            read_manifest(&path, true).unwrap_err(),
            Error::ChecksumMismatch { .. }
        ));
        // opt-out skips the check
        assert!(read_manifest(&path, false).is_ok());

        // remove a file entirely
        std::fs::remove_file(&target).unwrap();
        assert!(matches!(
            read_manifest(&path, true).unwrap_err(),
            Error::MissingFile(_)
        ));
    }

    fn write_corpus_fixture(dir: &Path, edge: u32) -> PathBuf {
        std::fs::create_dir_all(dir.join("img")).unwrap();
        let image = RgbImage::from_fn(edge, edge, |x, y| {
            image::Rgb([(x % 256) as u8, (y % 256) as u8, 9])
        });
        std::fs::write(dir.join("img/a.png"), encode_rgb_png(&image).unwrap()).unwrap();
        let seg = GrayImage::from_pixel(edge, edge, image::Luma([2]));
        std::fs::write(dir.join("img/a_seg.png"), encode_gray_png(&seg).unwrap()).unwrap();
        let mask = BinaryMask::from_fn(edge, edge, |x, y| x > 40 && x < 90 && y > 40 && y < 90);
        std::fs::write(dir.join("img/a_i0.png"), encode_mask_png(&mask).unwrap()).unwrap();
        let index = serde_json::json!({
            "items": [{
                "image_id": "a",
                "image": "img/a.png",
                "semantic_mask": "img/a_seg.png",
                "theme": "urban",
                "instances": [
                    {"instance_id": "a_i0", "class": "building", "mask": "img/a_i0.png"}
                ]
            }]
        });
        let index_path = dir.join(CORPUS_INDEX);
        std::fs::write(&index_path, serde_json::to_string_pretty(&index).unwrap()).unwrap();
        index_path
    }

    #[test]
    fn load_corpus_happy_path() {
        let dir = TempDir::new().unwrap();
        write_corpus_fixture(dir.path(), CORPUS_EDGE);
        let items = load_corpus(dir.path()).unwrap();
        assert_eq!(items.len(), 1);
        let item = &items[0];
        assert_eq!(item.image_id, "a");
        assert_eq!(item.theme.as_deref(), Some("urban"));
        assert_eq!(item.instances.len(), 1);
        assert_eq!(item.instances[0].class_label, TargetClass::Building);
        assert!(item.instances[0].mask.count_ones() > 0);
    }

    #[test]
    fn load_corpus_rejects_wrong_dimensions() {
        let dir = TempDir::new().unwrap();
        write_corpus_fixture(dir.path(), 511);
        match load_corpus(dir.path()).unwrap_err() {
            Error::BadDimensions { got_w, want_w, .. } => {
                assert_eq!(got_w, 511);
                assert_eq!(want_w, CORPUS_EDGE);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_corpus_rejects_missing_file() {
        let dir = TempDir::new().unwrap();
        write_corpus_fixture(dir.path(), CORPUS_EDGE);
        std::fs::remove_file(dir.path().join("img/a_i0.png")).unwrap();
        assert!(matches!(
            load_corpus(dir.path()).unwrap_err(),
            Error::MissingFile(_)
        ));
    }

    #[test]
    fn split_file_round_trip() {
        let dir = TempDir::new().unwrap();
        let ids = vec!["b".to_string(), "a".to_string(), "c".to_string()];
        let path = dir.path().join("train.txt");
        write_split_file(&ids, &path).unwrap();
        assert_eq!(read_split_file(&path).unwrap(), ids);
    }
}
