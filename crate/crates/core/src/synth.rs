//! Seeded synthetic corpus builder: textured scenes with labeled object
//! instances, used for fixtures, smoke runs, and demos.
//!
//! Scenes are drawn entirely from a derived random stream, so the same
//! (seed, item count) always yields byte-identical corpora. Objects are
//! sized to pass the tampering eligibility gate and painted with noisy
//! per-class palettes so manipulations leave real pixel evidence.

use image::{GrayImage, RgbImage};
use rand::Rng;

use crate::dataset::{
    encode_gray_png, encode_mask_png, encode_rgb_png, CorpusInstance, CorpusItem, CORPUS_EDGE,
    CORPUS_INDEX,
};
use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::rng::derive_rng;
use crate::tamper::TargetClass;

/// Scene labels rotated across generated items; the final item of every
/// cycle carries no theme to exercise the unlabeled path.
const THEMES: [&str; 9] = [
    "urban", "rural", "coastal", "industrial", "agricultural", "forest", "water", "harbor",
    "airport",
];

/// Per-class paint: base RGB plus noise amplitude.
fn class_paint(class: TargetClass) -> ([u8; 3], u8) {
    match class {
        TargetClass::Vehicle => ([200, 60, 50], 24),
        TargetClass::Airplane => ([220, 220, 225], 18),
        TargetClass::Ship => ([90, 110, 160], 22),
        TargetClass::Building => ([170, 140, 110], 28),
        TargetClass::Road => ([70, 70, 75], 14),
        TargetClass::Tree => ([50, 120, 60], 30),
        TargetClass::Farmland => ([150, 160, 80], 26),
    }
}

/// Gray level used for a class in the semantic mask.
pub fn seg_level(class: TargetClass) -> u8 {
    let idx = TargetClass::ALL.iter().position(|&c| c == class).unwrap() as u8;
    (idx + 1) * 30
}

fn clamp_u8(v: i32) -> u8 {
    v.clamp(0, 255) as u8
}

/// One drawable object, disjoint from everything drawn before it.
enum Shape {
    Ellipse { cx: u32, cy: u32, rx: u32, ry: u32 },
    Rect { x0: u32, y0: u32, x1: u32, y1: u32 },
    /// Full-frame band (roads); horizontal if `horizontal`, at `pos` with
    /// the given half-width.
    Band { horizontal: bool, pos: u32, half: u32 },
}

impl Shape {
    fn contains(&self, x: u32, y: u32) -> bool {
        match *self {
            Shape::Ellipse { cx, cy, rx, ry } => {
                let dx = (f64::from(x) - f64::from(cx)) / f64::from(rx);
                let dy = (f64::from(y) - f64::from(cy)) / f64::from(ry);
                dx * dx + dy * dy <= 1.0
            }
            Shape::Rect { x0, y0, x1, y1 } => x >= x0 && x <= x1 && y >= y0 && y <= y1,
            Shape::Band { horizontal, pos, half } => {
                let c = if horizontal { y } else { x };
                c >= pos.saturating_sub(half) && c <= pos + half
            }
        }
    }

    fn to_mask(&self, edge: u32) -> BinaryMask {
        BinaryMask::from_fn(edge, edge, |x, y| self.contains(x, y))
    }
}

/// Build one scene: gradient-plus-noise background, then each instance
/// painted with its class palette.
fn draw_item(index: usize, seed: u64) -> CorpusItem {
    let image_id = format!("synth{index:04}");
    let mut rng = derive_rng(seed, &["corpus", &image_id]);
    let edge = CORPUS_EDGE;

    // background: smooth two-axis gradient with per-pixel noise
    let base: [i32; 3] = [
        rng.random_range(60..160),
        rng.random_range(60..160),
        rng.random_range(60..160),
    ];
    let tilt: [i32; 3] = [
        rng.random_range(-40..40),
        rng.random_range(-40..40),
        rng.random_range(-40..40),
    ];
    let mut image = RgbImage::new(edge, edge);
    for y in 0..edge {
        for x in 0..edge {
            let fx = i64::from(x) as i32;
            let fy = i64::from(y) as i32;
            let noise = rng.random_range(-12..=12);
            let px = image.get_pixel_mut(x, y);
            for c in 0..3 {
                let grad = (tilt[c] * fx + (tilt[(c + 1) % 3]) * fy) / edge as i32;
                px.0[c] = clamp_u8(base[c] + grad + noise);
            }
        }
    }

    let theme = THEMES
        .get(index % (THEMES.len() + 1))
        .map(|t| (*t).to_string());

    // instances: jittered class cycle, one road band at most, drawn first
    // so later shapes can avoid it
    let count = rng.random_range(2..=3usize);
    let mut shapes: Vec<(TargetClass, Shape)> = Vec::with_capacity(count);
    let want_road = rng.random_range(0..4u8) == 0;
    if want_road {
        let horizontal = rng.random_range(0..2u8) == 0;
        let half = rng.random_range(6..20u32);
        let pos = rng.random_range(60..edge - 60);
        shapes.push((TargetClass::Road, Shape::Band { horizontal, pos, half }));
    }
    let non_road: Vec<TargetClass> = TargetClass::ALL
        .into_iter()
        .filter(|&c| c != TargetClass::Road)
        .collect();
    while shapes.len() < count {
        let class = non_road[rng.random_range(0..non_road.len())];
        // rejection-sample a spot disjoint from everything so far
        let mut placed = false;
        for _ in 0..40 {
            let rx = rng.random_range(12..44u32);
            let ry = rng.random_range(12..44u32);
            let cx = rng.random_range(rx + 4..edge - rx - 4);
            let cy = rng.random_range(ry + 4..edge - ry - 4);
            let candidate = if rng.random_range(0..2u8) == 0 {
                Shape::Ellipse { cx, cy, rx, ry }
            } else {
                Shape::Rect {
                    x0: cx - rx,
                    y0: cy - ry,
                    x1: cx + rx,
                    y1: cy + ry,
                }
            };
            let clear = {
                let (bx0, bx1) = (cx - rx, cx + rx);
                let (by0, by1) = (cy - ry, cy + ry);
                let mut ok = true;
                'scan: for y in by0..=by1 {
                    for x in bx0..=bx1 {
                        if candidate.contains(x, y) && shapes.iter().any(|(_, s)| s.contains(x, y))
                        {
                            ok = false;
                            break 'scan;
                        }
                    }
                }
                ok
            };
            if clear {
                shapes.push((class, candidate));
                placed = true;
                break;
            }
        }
        if !placed {
            break; // crowded scene; live with fewer instances
        }
    }

    // paint instances and build masks
    let mut semantic_mask = GrayImage::new(edge, edge);
    let mut instances = Vec::with_capacity(shapes.len());
    for (j, (class, shape)) in shapes.iter().enumerate() {
        let ([r, g, b], amp) = class_paint(*class);
        let mask = shape.to_mask(edge);
        let level = seg_level(*class);
        for (x, y) in mask.iter_set() {
            let noise = rng.random_range(-i32::from(amp)..=i32::from(amp));
            let px = image.get_pixel_mut(x, y);
            px.0 = [
                clamp_u8(i32::from(r) + noise),
                clamp_u8(i32::from(g) + noise / 2),
                clamp_u8(i32::from(b) + noise),
            ];
            semantic_mask.put_pixel(x, y, image::Luma([level]));
        }
        instances.push(CorpusInstance {
            instance_id: format!("obj{j}"),
            class_label: *class,
            mask,
        });
    }

    CorpusItem {
        image_id,
        image,
        semantic_mask,
        theme,
        instances,
    }
}

/// Build `count` synthetic corpus items for `seed`.
pub fn build_corpus(count: usize, seed: u64) -> Vec<CorpusItem> {
    (0..count).map(|i| draw_item(i, seed)).collect()
}

/// Write corpus items to `root` in the input layout consumed by
/// `load_corpus`: an index file plus per-item image, semantic-mask, and
/// instance-mask PNGs.
pub fn write_corpus(items: &[CorpusItem], root: &std::path::Path) -> Result<()> {
    let img_dir = root.join("img");
    let mask_dir = root.join("mask");
    for dir in [&img_dir, &mask_dir] {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    }
    let write = |path: &std::path::Path, bytes: &[u8]| -> Result<()> {
        std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
    };

    let mut index_items = Vec::with_capacity(items.len());
    for item in items {
        let id = &item.image_id;
        let image_rel = format!("img/{id}.png");
        let seg_rel = format!("mask/{id}__seg.png");
        write(&root.join(&image_rel), &encode_rgb_png(&item.image)?)?;
        write(&root.join(&seg_rel), &encode_gray_png(&item.semantic_mask)?)?;
        let mut instance_entries = Vec::with_capacity(item.instances.len());
        for inst in &item.instances {
            let mask_rel = format!("mask/{id}__{}.png", inst.instance_id);
            write(&root.join(&mask_rel), &encode_mask_png(&inst.mask)?)?;
            instance_entries.push(serde_json::json!({
                "instance_id": inst.instance_id,
                "class": inst.class_label,
                "mask": mask_rel,
            }));
        }
        index_items.push(serde_json::json!({
            "image_id": id,
            "image": image_rel,
            "semantic_mask": seg_rel,
            "theme": item.theme,
            "instances": instance_entries,
        }));
    }
    let index = serde_json::json!({ "items": index_items });
    let text = serde_json::to_string_pretty(&index)
        .map_err(|e| Error::Registry(format!("serialize: {e}")))?;
    write(&root.join(CORPUS_INDEX), format!("{text}\n").as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::load_corpus;
    use crate::tamper::{check_eligibility, Eligibility, SourceInstance};

    #[test]
    fn corpus_is_deterministic() {
        let a = build_corpus(3, 11);
        let b = build_corpus(3, 11);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.image_id, y.image_id);
            assert_eq!(x.image.as_raw(), y.image.as_raw());
            assert_eq!(x.semantic_mask.as_raw(), y.semantic_mask.as_raw());
            assert_eq!(x.instances.len(), y.instances.len());
            for (i, j) in x.instances.iter().zip(&y.instances) {
                assert_eq!(i.mask.bits(), j.mask.bits());
            }
        }
    }

    #[test]
    fn different_seeds_differ() {
        let a = build_corpus(1, 11);
        let b = build_corpus(1, 12);
        assert_ne!(a[0].image.as_raw(), b[0].image.as_raw());
    }

    #[test]
    fn instances_pass_eligibility() {
        for item in build_corpus(12, 5) {
            assert!(!item.instances.is_empty(), "{}", item.image_id);
            for inst in &item.instances {
                let instance = SourceInstance {
                    instance_id: inst.instance_id.clone(),
                    class_label: inst.class_label,
                    mask: inst.mask.clone(),
                    image_id: item.image_id.clone(),
                };
                assert_eq!(
                    check_eligibility(&instance, (CORPUS_EDGE, CORPUS_EDGE)).unwrap(),
                    Eligibility::Eligible,
                    "{} {}",
                    item.image_id,
                    inst.instance_id
                );
            }
        }
    }

    #[test]
    fn instances_are_disjoint() {
        for item in build_corpus(8, 9) {
            for (i, a) in item.instances.iter().enumerate() {
                for b in &item.instances[i + 1..] {
                    assert_eq!(a.mask.intersection_count(&b.mask).unwrap(), 0);
                }
            }
        }
    }

    #[test]
    fn themes_cycle_with_gaps() {
        let items = build_corpus(THEMES.len() + 1, 3);
        assert_eq!(items[0].theme.as_deref(), Some("urban"));
        assert!(items[THEMES.len()].theme.is_none());
    }

    #[test]
    fn round_trips_through_corpus_loader() {
        let dir = tempfile::TempDir::new().unwrap();
        let items = build_corpus(2, 21);
        write_corpus(&items, dir.path()).unwrap();
        let loaded = load_corpus(dir.path()).unwrap();
        assert_eq!(loaded.len(), 2);
        for (a, b) in items.iter().zip(&loaded) {
            assert_eq!(a.image_id, b.image_id);
            assert_eq!(a.theme, b.theme);
            assert_eq!(a.image.as_raw(), b.image.as_raw());
            assert_eq!(a.semantic_mask.as_raw(), b.semantic_mask.as_raw());
            assert_eq!(a.instances.len(), b.instances.len());
            for (i, j) in a.instances.iter().zip(&b.instances) {
                assert_eq!(i.instance_id, j.instance_id);
                assert_eq!(i.class_label, j.class_label);
                assert_eq!(i.mask.bits(), j.mask.bits());
            }
        }
    }
}
