//! Tampering engine: eligibility checks, parameter sampling, constrained
//! placement, copy-move compositing, and the three blur kinds.
//!
//! Copy-move pastes a rotated/scaled copy of an instance at a random
//! translation, keeping the pasted footprint's overlap with the source
//! region at or below 5% of the source area. Blur tampers obscure the
//! instance in place, so source and tampering regions coincide.

use image::RgbImage;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{region_stats, BinaryMask};

/// The seven target classes elected for tampering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetClass {
    Vehicle,
    Airplane,
    Ship,
    Building,
    Road,
    Tree,
    Farmland,
}

impl TargetClass {
    pub const ALL: [TargetClass; 7] = [
        TargetClass::Vehicle,
        TargetClass::Airplane,
        TargetClass::Ship,
        TargetClass::Building,
        TargetClass::Road,
        TargetClass::Tree,
        TargetClass::Farmland,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TargetClass::Vehicle => "vehicle",
            TargetClass::Airplane => "airplane",
            TargetClass::Ship => "ship",
            TargetClass::Building => "building",
            TargetClass::Road => "road",
            TargetClass::Tree => "tree",
            TargetClass::Farmland => "farmland",
        }
    }

    pub fn from_label(s: &str) -> Result<TargetClass> {
        Self::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| Error::InvalidRecord(s.to_string(), "unknown class label".into()))
    }
}

/// Blur tamper kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlurKind {
    Gaussian,
    Mosaic,
    Daub,
}

impl BlurKind {
    pub const ALL: [BlurKind; 3] = [BlurKind::Gaussian, BlurKind::Mosaic, BlurKind::Daub];

    /// The label used in tamper-type answers.
    pub fn answer_label(self) -> &'static str {
        match self {
            BlurKind::Gaussian => "gaussian-blur",
            BlurKind::Mosaic => "mosaic-blur",
            BlurKind::Daub => "daub",
        }
    }
}

/// Manipulation family of a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TamperKind {
    CopyMove,
    Blur,
}

/// One candidate object in a corpus image.
#[derive(Clone, Debug)]
pub struct SourceInstance {
    pub instance_id: String,
    pub class_label: TargetClass,
    pub mask: BinaryMask,
    pub image_id: String,
}

/// Sampled manipulation parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TamperParams {
    pub scale: f64,
    pub rotation_deg: f64,
    pub translation: (i32, i32),
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub blur_kind: Option<BlurKind>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub blur_strength: Option<f64>,
}

/// One manipulation event with its resulting masks.
#[derive(Clone, Debug)]
pub struct TamperRecord {
    pub record_id: String,
    pub image_id: String,
    pub instance: SourceInstance,
    pub params: TamperParams,
    pub src_mask: BinaryMask,
    pub tmp_mask: BinaryMask,
    pub kind: TamperKind,
}

/// Outcome of the eligibility check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Eligibility {
    Eligible,
    Rejected(RejectReason),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RejectReason {
    TooSmall,
    TooLarge,
    MultipleComponents,
    TouchesBorder,
}

impl RejectReason {
    pub fn label(self) -> &'static str {
        match self {
            RejectReason::TooSmall => "too_small",
            RejectReason::TooLarge => "too_large",
            RejectReason::MultipleComponents => "multiple_components",
            RejectReason::TouchesBorder => "touches_border",
        }
    }
}

/// Area bounds as exact integer comparisons: ratio >= 0.1% is
/// 1000*area >= w*h, ratio <= 15% is 20*area <= 3*w*h.
fn area_in_bounds(area: u64, w: u32, h: u32) -> Option<RejectReason> {
    let total = w as u64 * h as u64;
    if area * 1000 < total {
        Some(RejectReason::TooSmall)
    } else if area * 20 > total * 3 {
        Some(RejectReason::TooLarge)
    } else {
        None
    }
}

/// Eligibility of an instance for tampering: area ratio within
/// [0.1%, 15%] inclusive, a single 4-connected component, and — except for
/// roads — a bounding box that stays clear of the image border.
pub fn check_eligibility(instance: &SourceInstance, image: (u32, u32)) -> Result<Eligibility> {
    let (w, h) = image;
    if instance.mask.dims() != (w, h) {
        return Err(Error::DimensionMismatch(
            instance.mask.width(),
            instance.mask.height(),
            w,
            h,
        ));
    }
    let area = instance.mask.count_ones();
    if let Some(reason) = area_in_bounds(area, w, h) {
        return Ok(Eligibility::Rejected(reason));
    }
    let stats = region_stats(&instance.mask)?;
    if stats.component_count != 1 {
        return Ok(Eligibility::Rejected(RejectReason::MultipleComponents));
    }
    if instance.class_label != TargetClass::Road {
        let (x0, y0, x1, y1) = stats.bbox;
        if x0 == 0 || y0 == 0 || x1 == w - 1 || y1 == h - 1 {
            return Ok(Eligibility::Rejected(RejectReason::TouchesBorder));
        }
    }
    Ok(Eligibility::Eligible)
}

/// Draw manipulation parameters.
///
/// Copy-move: scale is exactly 1.0 with probability 1/3, otherwise uniform
/// in [0.5, 1.5]; rotation is exactly 0 with probability 1/2, otherwise
/// uniform in [5, 355] degrees. Blur: kind uniform over the three kinds,
/// strength per kind (gaussian sigma in [2, 6], mosaic block in {8, 16, 32},
/// daub radius 4).
pub fn sample_params<R: Rng>(rng: &mut R, kind: TamperKind) -> TamperParams {
    match kind {
        TamperKind::CopyMove => {
            let u: f64 = rng.random();
            let scale = if u < 1.0 / 3.0 {
                1.0
            } else {
                rng.random_range(0.5..=1.5)
            };
            let v: f64 = rng.random();
            let rotation_deg = if v < 0.5 {
                0.0
            } else {
                rng.random_range(5.0..=355.0)
            };
            TamperParams {
                scale,
                rotation_deg,
                translation: (0, 0),
                blur_kind: None,
                blur_strength: None,
            }
        }
        TamperKind::Blur => {
            let blur_kind = BlurKind::ALL[rng.random_range(0..3)];
            let blur_strength = match blur_kind {
                BlurKind::Gaussian => rng.random_range(2.0..=6.0),
                BlurKind::Mosaic => [8.0, 16.0, 32.0][rng.random_range(0..3)],
                BlurKind::Daub => 4.0,
            };
            TamperParams {
                scale: 1.0,
                rotation_deg: 0.0,
                translation: (0, 0),
                blur_kind: Some(blur_kind),
                blur_strength: Some(blur_strength),
            }
        }
    }
}

/// Similarity transform about the instance centroid (translation handled
/// separately so one rasterized footprint serves every translation draw).
#[derive(Clone, Copy, Debug)]
struct Transform {
    scale: f64,
    cos_t: f64,
    sin_t: f64,
    cx: f64,
    cy: f64,
}

impl Transform {
    fn new(scale: f64, rotation_deg: f64, centroid: (f64, f64)) -> Transform {
        let rad = rotation_deg.to_radians();
        Transform {
            scale,
            cos_t: rad.cos(),
            sin_t: rad.sin(),
            cx: centroid.0,
            cy: centroid.1,
        }
    }

    fn forward(&self, p: (f64, f64)) -> (f64, f64) {
        let (dx, dy) = (p.0 - self.cx, p.1 - self.cy);
        (
            self.cx + self.scale * (self.cos_t * dx - self.sin_t * dy),
            self.cy + self.scale * (self.sin_t * dx + self.cos_t * dy),
        )
    }

    fn inverse(&self, q: (f64, f64)) -> (f64, f64) {
        let (dx, dy) = ((q.0 - self.cx) / self.scale, (q.1 - self.cy) / self.scale);
        (
            self.cx + self.cos_t * dx + self.sin_t * dy,
            self.cy - self.sin_t * dx + self.cos_t * dy,
        )
    }
}

/// Rasterized transformed instance mask before translation. Cell
/// coordinates live in the unclipped image plane and may be negative.
#[derive(Clone, Debug)]
pub(crate) struct Footprint {
    origin: (i64, i64),
    width: u32,
    bits: Vec<u8>,
    /// Tight bounds of set cells in plane coordinates.
    bbox: (i64, i64, i64, i64),
    area: u64,
}

impl Footprint {
    /// Plane coordinates of set cells.
    fn iter_set(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let (ox, oy) = self.origin;
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(move |(i, _)| (ox + (i as i64 % w as i64), oy + (i as i64 / w as i64)))
    }
}

/// Bilinear sample of a binary mask at a real-valued point; outside reads 0.
fn mask_coverage(mask: &BinaryMask, p: (f64, f64)) -> f64 {
    let x0 = p.0.floor();
    let y0 = p.1.floor();
    let fx = p.0 - x0;
    let fy = p.1 - y0;
    let sample = |xi: f64, yi: f64| -> f64 {
        if xi < 0.0 || yi < 0.0 || xi >= mask.width() as f64 || yi >= mask.height() as f64 {
            0.0
        } else {
            f64::from(mask.get(xi as u32, yi as u32))
        }
    };
    sample(x0, y0) * (1.0 - fx) * (1.0 - fy)
        + sample(x0 + 1.0, y0) * fx * (1.0 - fy)
        + sample(x0, y0 + 1.0) * (1.0 - fx) * fy
        + sample(x0 + 1.0, y0 + 1.0) * fx * fy
}

/// Rasterize the rotated/scaled instance mask: a plane cell is set when its
/// bilinear coverage of the source mask is at least 0.5.
pub(crate) fn rasterize_footprint(mask: &BinaryMask, params: &TamperParams) -> Result<Footprint> {
    let stats = region_stats(mask)?;
    let tf = Transform::new(params.scale, params.rotation_deg, stats.centroid);
    let (bx0, by0, bx1, by1) = stats.bbox;
    let corners = [
        (bx0 as f64, by0 as f64),
        (bx1 as f64, by0 as f64),
        (bx0 as f64, by1 as f64),
        (bx1 as f64, by1 as f64),
    ];
    let mut min_x = f64::INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for c in corners {
        let (x, y) = tf.forward(c);
        min_x = min_x.min(x);
        min_y = min_y.min(y);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    // 2-cell margin covers bilinear support at the transformed silhouette edge
    let ox = min_x.floor() as i64 - 2;
    let oy = min_y.floor() as i64 - 2;
    let w = (max_x.ceil() as i64 + 2 - ox + 1) as u32;
    let h = (max_y.ceil() as i64 + 2 - oy + 1) as u32;

    let mut bits = vec![0u8; w as usize * h as usize];
    let mut area = 0u64;
    let (mut fx0, mut fy0, mut fx1, mut fy1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for ly in 0..h {
        for lx in 0..w {
            let q = ((ox + lx as i64) as f64, (oy + ly as i64) as f64);
            let p = tf.inverse(q);
            if mask_coverage(mask, p) >= 0.5 {
                bits[ly as usize * w as usize + lx as usize] = 1;
                area += 1;
                fx0 = fx0.min(ox + lx as i64);
                fy0 = fy0.min(oy + ly as i64);
                fx1 = fx1.max(ox + lx as i64);
                fy1 = fy1.max(oy + ly as i64);
            }
        }
    }
    Ok(Footprint {
        origin: (ox, oy),
        width: w,
        bits,
        bbox: if area == 0 { (0, 0, -1, -1) } else { (fx0, fy0, fx1, fy1) },
        area,
    })
}

/// A chosen translation together with the resulting full-image footprint.
#[derive(Clone, Debug)]
pub struct Placement {
    pub translation: (i32, i32),
    pub footprint: BinaryMask,
}

/// Count footprint pixels shifted by `t` that fall inside the image, and how
/// many of those land on set pixels of `src`.
pub(crate) fn shifted_overlap(
    src: &BinaryMask,
    footprint: &Footprint,
    t: (i64, i64),
) -> (u64, u64) {
    let (w, h) = (src.width() as i64, src.height() as i64);
    let mut inside = 0u64;
    let mut inter = 0u64;
    for (px, py) in footprint.iter_set() {
        let (x, y) = (px + t.0, py + t.1);
        if x >= 0 && y >= 0 && x < w && y < h {
            inside += 1;
            if src.get(x as u32, y as u32) {
                inter += 1;
            }
        }
    }
    (inside, inter)
}

fn footprint_to_mask(footprint: &Footprint, t: (i64, i64), image: (u32, u32)) -> BinaryMask {
    let mut out = BinaryMask::zeros(image.0, image.1);
    let (w, h) = (image.0 as i64, image.1 as i64);
    for (px, py) in footprint.iter_set() {
        let (x, y) = (px + t.0, py + t.1);
        if x >= 0 && y >= 0 && x < w && y < h {
            out.set(x as u32, y as u32, true);
        }
    }
    out
}

/// Find a translation for the transformed instance so that the pasted
/// footprint sits inside the image (roads may clip at the frame) and
/// overlaps at most 5% of the source region. Gives up after `max_attempts`
/// rejected draws.
pub fn place<R: Rng>(
    rng: &mut R,
    instance: &SourceInstance,
    params: &TamperParams,
    image: (u32, u32),
    max_attempts: u32,
) -> Result<Option<Placement>> {
    let (w, h) = image;
    if instance.mask.dims() != (w, h) {
        return Err(Error::DimensionMismatch(
            instance.mask.width(),
            instance.mask.height(),
            w,
            h,
        ));
    }
    if instance.mask.is_empty() {
        return Err(Error::IneligibleInstance(
            instance.instance_id.clone(),
            "empty mask".into(),
        ));
    }
    let footprint = rasterize_footprint(&instance.mask, params)?;
    if footprint.area == 0 {
        return Ok(None);
    }
    let (bx0, by0, bx1, by1) = footprint.bbox;
    let clipping_allowed = instance.class_label == TargetClass::Road;
    let (tx_lo, tx_hi, ty_lo, ty_hi) = if clipping_allowed {
        // keep at least one footprint column/row inside the frame
        (-bx1, (w as i64 - 1) - bx0, -by1, (h as i64 - 1) - by0)
    } else {
        // strictly inside: the pasted mask must never touch the frame edge
        (1 - bx0, (w as i64 - 2) - bx1, 1 - by0, (h as i64 - 2) - by1)
    };
    if tx_lo > tx_hi || ty_lo > ty_hi {
        return Ok(None);
    }
    let src_area = instance.mask.count_ones();
    for _ in 0..max_attempts {
        let t = (
            rng.random_range(tx_lo..=tx_hi),
            rng.random_range(ty_lo..=ty_hi),
        );
        let (inside, inter) = shifted_overlap(&instance.mask, &footprint, t);
        if inside == 0 {
            continue;
        }
        // overlap_fraction(src, footprint) <= 0.05, integer-exact
        if inter * 20 > src_area {
            continue;
        }
        return Ok(Some(Placement {
            translation: (t.0 as i32, t.1 as i32),
            footprint: footprint_to_mask(&footprint, t, image),
        }));
    }
    Ok(None)
}

/// Bilinear sample of one channel with edge clamping.
fn bilinear_channel(image: &RgbImage, p: (f64, f64), ch: usize) -> f64 {
    let (w, h) = image.dimensions();
    let clamp = |v: f64, hi: u32| -> u32 { v.max(0.0).min((hi - 1) as f64) as u32 };
    let x0f = p.0.floor();
    let y0f = p.1.floor();
    let fx = p.0 - x0f;
    let fy = p.1 - y0f;
    let sample = |xf: f64, yf: f64| -> f64 {
        let x = clamp(xf, w);
        let y = clamp(yf, h);
        f64::from(image.get_pixel(x, y).0[ch])
    };
    sample(x0f, y0f) * (1.0 - fx) * (1.0 - fy)
        + sample(x0f + 1.0, y0f) * fx * (1.0 - fy)
        + sample(x0f, y0f + 1.0) * (1.0 - fx) * fy
        + sample(x0f + 1.0, y0f + 1.0) * fx * fy
}

/// Paste the transformed instance patch at the placement. Pixels outside
/// the tampering mask stay byte-identical to the input; pixels inside are
/// bilinearly resampled from the original image.
pub fn apply_copy_move(
    image: &RgbImage,
    instance: &SourceInstance,
    params: &TamperParams,
    placement: &Placement,
) -> Result<(RgbImage, BinaryMask, BinaryMask)> {
    let (w, h) = image.dimensions();
    if instance.mask.dims() != (w, h) || placement.footprint.dims() != (w, h) {
        return Err(Error::DimensionMismatch(
            instance.mask.width(),
            instance.mask.height(),
            w,
            h,
        ));
    }
    let stats = region_stats(&instance.mask)?;
    let tf = Transform::new(params.scale, params.rotation_deg, stats.centroid);
    let t = placement.translation;
    let mut out = image.clone();
    for (x, y) in placement.footprint.iter_set() {
        let q = (x as f64 - t.0 as f64, y as f64 - t.1 as f64);
        let p = tf.inverse(q);
        let px = image::Rgb([
            bilinear_channel(image, p, 0).round().clamp(0.0, 255.0) as u8,
            bilinear_channel(image, p, 1).round().clamp(0.0, 255.0) as u8,
            bilinear_channel(image, p, 2).round().clamp(0.0, 255.0) as u8,
        ]);
        out.put_pixel(x, y, px);
    }
    Ok((out, instance.mask.clone(), placement.footprint.clone()))
}

fn luma(p: &image::Rgb<u8>) -> u8 {
    ((p.0[0] as u16 + p.0[1] as u16 + p.0[2] as u16) / 3) as u8
}

/// Obscure the instance region in place. Only pixels inside the instance
/// mask change, and every filter reads only pixels inside the region, so
/// nothing leaks across the region boundary in either direction.
pub fn apply_blur(
    image: &RgbImage,
    instance: &SourceInstance,
    kind: BlurKind,
    strength: f64,
) -> Result<(RgbImage, BinaryMask)> {
    let (w, h) = image.dimensions();
    if instance.mask.dims() != (w, h) {
        return Err(Error::DimensionMismatch(
            instance.mask.width(),
            instance.mask.height(),
            w,
            h,
        ));
    }
    let region = &instance.mask;
    let mut out = image.clone();
    match kind {
        BlurKind::Gaussian => {
            let sigma = strength;
            let radius = (3.0 * sigma).ceil() as i64;
            let inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
            for (x, y) in region.iter_set() {
                let mut num = [0.0f64; 3];
                let mut den = 0.0f64;
                for dy in -radius..=radius {
                    for dx in -radius..=radius {
                        let nx = x as i64 + dx;
                        let ny = y as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        if !region.get(nx as u32, ny as u32) {
                            continue;
                        }
                        let wgt = (-((dx * dx + dy * dy) as f64) * inv_two_sigma_sq).exp();
                        let p = image.get_pixel(nx as u32, ny as u32);
                        for c in 0..3 {
                            num[c] += wgt * f64::from(p.0[c]);
                        }
                        den += wgt;
                    }
                }
                let px = image::Rgb([
                    (num[0] / den).round().clamp(0.0, 255.0) as u8,
                    (num[1] / den).round().clamp(0.0, 255.0) as u8,
                    (num[2] / den).round().clamp(0.0, 255.0) as u8,
                ]);
                out.put_pixel(x, y, px);
            }
        }
        BlurKind::Mosaic => {
            let block = strength as u32;
            if block == 0 {
                return Err(Error::UnknownBlurKind(format!("mosaic block {strength}")));
            }
            // blocks are aligned to the image origin
            for by in 0..h.div_ceil(block) {
                for bx in 0..w.div_ceil(block) {
                    let mut sums = [0u64; 3];
                    let mut count = 0u64;
                    for y in (by * block)..((by + 1) * block).min(h) {
                        for x in (bx * block)..((bx + 1) * block).min(w) {
                            if region.get(x, y) {
                                let p = image.get_pixel(x, y);
                                for c in 0..3 {
                                    sums[c] += u64::from(p.0[c]);
                                }
                                count += 1;
                            }
                        }
                    }
                    if count == 0 {
                        continue;
                    }
                    let mean = image::Rgb([
                        (sums[0] as f64 / count as f64).round() as u8,
                        (sums[1] as f64 / count as f64).round() as u8,
                        (sums[2] as f64 / count as f64).round() as u8,
                    ]);
                    for y in (by * block)..((by + 1) * block).min(h) {
                        for x in (bx * block)..((bx + 1) * block).min(w) {
                            if region.get(x, y) {
                                out.put_pixel(x, y, mean);
                            }
                        }
                    }
                }
            }
        }
        BlurKind::Daub => {
            // oil-paint: replace each pixel by the mean of the most
            // populated of 8 equal intensity bins in its neighborhood
            let radius = strength as i64;
            for (x, y) in region.iter_set() {
                let mut bin_count = [0u32; 8];
                let mut bin_sums = [[0u64; 3]; 8];
                for dy in -radius..=radius {
                    for dx in -radius..=radius {
                        let nx = x as i64 + dx;
                        let ny = y as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        if !region.get(nx as u32, ny as u32) {
                            continue;
                        }
                        let p = image.get_pixel(nx as u32, ny as u32);
                        let bin = (luma(p) / 32) as usize;
                        bin_count[bin] += 1;
                        for c in 0..3 {
                            bin_sums[bin][c] += u64::from(p.0[c]);
                        }
                    }
                }
                // ties resolve to the lowest bin index
                let best = (0..8).max_by_key(|&b| (bin_count[b], std::cmp::Reverse(b))).unwrap();
                let n = bin_count[best] as f64;
                let px = image::Rgb([
                    (bin_sums[best][0] as f64 / n).round() as u8,
                    (bin_sums[best][1] as f64 / n).round() as u8,
                    (bin_sums[best][2] as f64 / n).round() as u8,
                ]);
                out.put_pixel(x, y, px);
            }
        }
    }
    Ok((out, instance.mask.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::overlap_fraction;
    use crate::rng::derive_rng;

    fn rect_instance(
        x0: u32,
        y0: u32,
        w: u32,
        h: u32,
        img: (u32, u32),
        class: TargetClass,
    ) -> SourceInstance {
        SourceInstance {
            instance_id: "inst".into(),
            class_label: class,
            mask: BinaryMask::from_fn(img.0, img.1, |x, y| {
                x >= x0 && x < x0 + w && y >= y0 && y < y0 + h
            }),
            image_id: "img".into(),
        }
    }

    fn identity_params() -> TamperParams {
        TamperParams {
            scale: 1.0,
            rotation_deg: 0.0,
            translation: (0, 0),
            blur_kind: None,
            blur_strength: None,
        }
    }

    #[test]
    fn eligibility_interior_building() {
        // area ratio 0.10 of 512x512: 162x162 block minus a bit; use 165x159
        // = 26235 px -> ratio 0.10008...; inside bounds, interior, one comp
        let inst = rect_instance(100, 100, 165, 159, (512, 512), TargetClass::Building);
        assert_eq!(
            check_eligibility(&inst, (512, 512)).unwrap(),
            Eligibility::Eligible
        );
    }

    #[test]
    fn eligibility_too_small_vehicle() {
        // ratio 0.0005 of 512x512 = 131 px < 0.001 threshold
        let inst = rect_instance(50, 50, 131, 1, (512, 512), TargetClass::Vehicle);
        assert_eq!(
            check_eligibility(&inst, (512, 512)).unwrap(),
            Eligibility::Rejected(RejectReason::TooSmall)
        );
    }

    #[test]
    fn eligibility_inclusive_bounds() {
        // exactly 0.1% of a 100x100 image is 10 px
        let inst = rect_instance(10, 10, 10, 1, (100, 100), TargetClass::Vehicle);
        assert_eq!(
            check_eligibility(&inst, (100, 100)).unwrap(),
            Eligibility::Eligible
        );
        // exactly 15% is 1500 px
        let inst = rect_instance(10, 10, 50, 30, (100, 100), TargetClass::Building);
        assert_eq!(
            check_eligibility(&inst, (100, 100)).unwrap(),
            Eligibility::Eligible
        );
        // one more pixel tips it over
        let mut too_big = rect_instance(10, 10, 50, 30, (100, 100), TargetClass::Building);
        too_big.mask.set(70, 70, true);
        assert_eq!(
            check_eligibility(&too_big, (100, 100)).unwrap(),
            Eligibility::Rejected(RejectReason::TooLarge)
        );
    }

    #[test]
    fn eligibility_road_may_touch_border() {
        // ratio 0.05 of 512x512 = 13107.2; 26x512 column on the left border
        let road = rect_instance(0, 0, 26, 504, (512, 512), TargetClass::Road);
        assert_eq!(
            check_eligibility(&road, (512, 512)).unwrap(),
            Eligibility::Eligible
        );
        let building = rect_instance(0, 0, 26, 504, (512, 512), TargetClass::Building);
        assert_eq!(
            check_eligibility(&building, (512, 512)).unwrap(),
            Eligibility::Rejected(RejectReason::TouchesBorder)
        );
    }

    #[test]
    fn eligibility_multiple_components() {
        let mut inst = rect_instance(100, 100, 100, 100, (512, 512), TargetClass::Tree);
        inst.mask.set(400, 400, true);
        assert_eq!(
            check_eligibility(&inst, (512, 512)).unwrap(),
            Eligibility::Rejected(RejectReason::MultipleComponents)
        );
    }

    #[test]
    fn sampler_is_deterministic() {
        let a = sample_params(&mut derive_rng(11, &["x"]), TamperKind::CopyMove);
        let b = sample_params(&mut derive_rng(11, &["x"]), TamperKind::CopyMove);
        assert_eq!(a, b);
    }

    #[test]
    fn sampler_statistics() {
        let mut rng = derive_rng(42, &["sampler"]);
        let mut zero_rot = 0u32;
        let mut unit_scale = 0u32;
        for _ in 0..10_000 {
            let p = sample_params(&mut rng, TamperKind::CopyMove);
            assert!((0.5..=1.5).contains(&p.scale), "scale {}", p.scale);
            assert!(
                p.rotation_deg == 0.0 || (5.0..=355.0).contains(&p.rotation_deg),
                "rotation {}",
                p.rotation_deg
            );
            if p.rotation_deg == 0.0 {
                zero_rot += 1;
            }
            if p.scale == 1.0 {
                unit_scale += 1;
            }
        }
        let zero_frac = zero_rot as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&zero_frac), "rotation==0 freq {zero_frac}");
        let unit_frac = unit_scale as f64 / 10_000.0;
        assert!((0.30..=0.37).contains(&unit_frac), "scale==1 freq {unit_frac}");
    }

    #[test]
    fn sampler_blur_kinds() {
        let mut rng = derive_rng(42, &["blur"]);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..100 {
            let p = sample_params(&mut rng, TamperKind::Blur);
            let kind = p.blur_kind.unwrap();
            seen.insert(kind);
            match kind {
                BlurKind::Gaussian => {
                    let s = p.blur_strength.unwrap();
                    assert!((2.0..=6.0).contains(&s));
                }
                BlurKind::Mosaic => {
                    assert!([8.0, 16.0, 32.0].contains(&p.blur_strength.unwrap()));
                }
                BlurKind::Daub => assert_eq!(p.blur_strength.unwrap(), 4.0),
            }
        }
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn footprint_identity_matches_mask() {
        let inst = rect_instance(100, 100, 20, 10, (256, 256), TargetClass::Ship);
        let fp = rasterize_footprint(&inst.mask, &identity_params()).unwrap();
        assert_eq!(fp.area, 200);
        assert_eq!(fp.bbox, (100, 100, 119, 109));
        let as_mask = footprint_to_mask(&fp, (0, 0), (256, 256));
        assert_eq!(as_mask, inst.mask);
    }

    #[test]
    fn footprint_rotation_90_swaps_bbox() {
        // axis-asymmetric 30x8 patch
        let inst = rect_instance(100, 100, 30, 8, (256, 256), TargetClass::Ship);
        let params = TamperParams {
            rotation_deg: 90.0,
            ..identity_params()
        };
        let fp = rasterize_footprint(&inst.mask, &params).unwrap();
        let (x0, y0, x1, y1) = fp.bbox;
        let (w, h) = ((x1 - x0 + 1), (y1 - y0 + 1));
        assert!((w - 8).abs() <= 1, "w {w}");
        assert!((h - 30).abs() <= 1, "h {h}");
    }

    #[test]
    fn footprint_scale_changes_area() {
        let inst = rect_instance(100, 100, 40, 40, (256, 256), TargetClass::Farmland);
        let double = TamperParams {
            scale: 1.5,
            ..identity_params()
        };
        let fp = rasterize_footprint(&inst.mask, &double).unwrap();
        let ratio = fp.area as f64 / 1600.0;
        assert!((ratio - 2.25).abs() < 0.1, "area ratio {ratio}");
        let half = TamperParams {
            scale: 0.5,
            ..identity_params()
        };
        let fp = rasterize_footprint(&inst.mask, &half).unwrap();
        let ratio = fp.area as f64 / 1600.0;
        assert!((ratio - 0.25).abs() < 0.05, "area ratio {ratio}");
    }

    #[test]
    fn place_full_cover_instance_has_nowhere_to_go() {
        let inst = SourceInstance {
            instance_id: "full".into(),
            class_label: TargetClass::Farmland,
            mask: BinaryMask::from_fn(64, 64, |_, _| true),
            image_id: "img".into(),
        };
        let mut rng = derive_rng(3, &["place"]);
        let placed = place(&mut rng, &inst, &identity_params(), (64, 64), 50).unwrap();
        assert!(placed.is_none());
    }

    #[test]
    fn place_small_square_succeeds_with_zero_overlap() {
        let inst = rect_instance(100, 100, 10, 10, (512, 512), TargetClass::Vehicle);
        let mut rng = derive_rng(5, &["place2"]);
        let placed = place(&mut rng, &inst, &identity_params(), (512, 512), 100)
            .unwrap()
            .expect("should place");
        // brute-force overlap count on the result
        let mut inter = 0u64;
        for y in 0..512 {
            for x in 0..512 {
                if inst.mask.get(x, y) && placed.footprint.get(x, y) {
                    inter += 1;
                }
            }
        }
        assert!(inter * 20 <= 100, "overlap {inter} px");
        assert_eq!(placed.footprint.count_ones(), 100);
        let frac = overlap_fraction(&inst.mask, &placed.footprint).unwrap();
        assert!(frac <= 0.05);
    }

    #[test]
    fn placement_never_touches_border_for_non_road() {
        // tight frame so edge placements would be common if permitted
        let inst = rect_instance(24, 20, 20, 14, (64, 64), TargetClass::Building);
        let mut successes = 0u32;
        for seed in 0..200u64 {
            let mut rng = derive_rng(seed, &["place-border"]);
            let params = sample_params(&mut rng, TamperKind::CopyMove);
            let Some(placed) = place(&mut rng, &inst, &params, (64, 64), 100).unwrap() else {
                continue;
            };
            successes += 1;
            let fp = &placed.footprint;
            for x in 0..64 {
                assert!(!fp.get(x, 0) && !fp.get(x, 63), "seed {seed}: row contact");
            }
            for y in 0..64 {
                assert!(!fp.get(0, y) && !fp.get(63, y), "seed {seed}: column contact");
            }
        }
        assert!(successes > 100, "only {successes}/200 seeds placed");
    }

    #[test]
    fn overlap_rule_rejects_six_percent() {
        // src area 1000 px; a forced shift with 6% intersection fails the
        // integer rule, 5% passes
        let inst = rect_instance(100, 100, 40, 25, (512, 512), TargetClass::Building);
        let fp = rasterize_footprint(&inst.mask, &identity_params()).unwrap();
        // shift right by 38 columns: intersection = 2 cols x 25 rows = 50 px (5%)
        let (_, inter) = shifted_overlap(&inst.mask, &fp, (38, 0));
        assert_eq!(inter, 50);
        assert!(inter * 20 <= 1000);
        // shift right by 37 columns: 3 cols x 25 = 75 px (7.5%) -> reject
        let (_, inter) = shifted_overlap(&inst.mask, &fp, (37, 0));
        assert_eq!(inter, 75);
        assert!(inter * 20 > 1000);
        // 60 px would be exactly 6%
        assert!(60 * 20 > 1000);
    }

    #[test]
    fn copy_move_identity_on_self_is_noop() {
        let mut img = RgbImage::new(64, 64);
        for (x, y, p) in img.enumerate_pixels_mut() {
            *p = image::Rgb([(x * 3) as u8, (y * 5) as u8, (x ^ y) as u8]);
        }
        let inst = rect_instance(20, 20, 10, 10, (64, 64), TargetClass::Ship);
        let placement = Placement {
            translation: (0, 0),
            footprint: inst.mask.clone(),
        };
        let (out, src, tmp) = apply_copy_move(&img, &inst, &identity_params(), &placement).unwrap();
        assert_eq!(out.as_raw(), img.as_raw());
        assert_eq!(src, tmp);
    }

    #[test]
    fn copy_move_diff_support_within_tmp_mask() {
        let mut img = RgbImage::new(128, 128);
        for (x, y, p) in img.enumerate_pixels_mut() {
            *p = image::Rgb([(x * 2) as u8, (y * 2) as u8, ((x + y) % 251) as u8]);
        }
        let inst = rect_instance(30, 30, 16, 12, (128, 128), TargetClass::Building);
        let params = TamperParams {
            scale: 1.2,
            rotation_deg: 30.0,
            ..identity_params()
        };
        let mut rng = derive_rng(9, &["cm"]);
        let placement = place(&mut rng, &inst, &params, (128, 128), 200)
            .unwrap()
            .expect("place");
        let (out, _src, tmp) = apply_copy_move(&img, &inst, &params, &placement).unwrap();
        let mut diff_outside = 0u32;
        let mut diff_inside = 0u32;
        for y in 0..128 {
            for x in 0..128 {
                if out.get_pixel(x, y) != img.get_pixel(x, y) {
                    if tmp.get(x, y) {
                        diff_inside += 1;
                    } else {
                        diff_outside += 1;
                    }
                }
            }
        }
        assert_eq!(diff_outside, 0);
        assert!(diff_inside > 0);
    }

    #[test]
    fn blur_constant_region_is_unchanged() {
        let img = RgbImage::from_pixel(64, 64, image::Rgb([90, 140, 200]));
        let inst = rect_instance(10, 10, 30, 30, (64, 64), TargetClass::Farmland);
        for (kind, strength) in [
            (BlurKind::Gaussian, 3.0),
            (BlurKind::Mosaic, 16.0),
            (BlurKind::Daub, 4.0),
        ] {
            let (out, region) = apply_blur(&img, &inst, kind, strength).unwrap();
            assert_eq!(out.as_raw(), img.as_raw(), "{kind:?}");
            assert_eq!(region, inst.mask);
        }
    }

    #[test]
    fn blur_diff_support_within_region() {
        let mut img = RgbImage::new(64, 64);
        for (x, y, p) in img.enumerate_pixels_mut() {
            *p = image::Rgb([(x * 4) as u8, (y * 4) as u8, 37]);
        }
        let inst = rect_instance(12, 12, 24, 20, (64, 64), TargetClass::Tree);
        for (kind, strength) in [
            (BlurKind::Gaussian, 2.5),
            (BlurKind::Mosaic, 8.0),
            (BlurKind::Daub, 4.0),
        ] {
            let (out, region) = apply_blur(&img, &inst, kind, strength).unwrap();
            for y in 0..64 {
                for x in 0..64 {
                    if !region.get(x, y) {
                        assert_eq!(out.get_pixel(x, y), img.get_pixel(x, y), "{kind:?} ({x},{y})");
                    }
                }
            }
        }
    }

    #[test]
    fn mosaic_checkerboard_blocks_take_block_mean() {
        // 2-color checkerboard: complete 16x16 blocks hold 128 px of each
        // color, mean = (100 + 200) / 2 = 150 on every channel
        let mut img = RgbImage::new(64, 64);
        for (x, y, p) in img.enumerate_pixels_mut() {
            let v = if (x + y) % 2 == 0 { 100 } else { 200 };
            *p = image::Rgb([v, v, v]);
        }
        // region covers blocks (1,1) and (2,1) completely
        let inst = rect_instance(16, 16, 32, 16, (64, 64), TargetClass::Farmland);
        let (out, _) = apply_blur(&img, &inst, BlurKind::Mosaic, 16.0).unwrap();
        for y in 16..32 {
            for x in 16..48 {
                assert_eq!(out.get_pixel(x, y).0, [150, 150, 150], "({x},{y})");
            }
        }
    }

    #[test]
    fn road_placement_may_clip() {
        // a road column taller than the frame margin allows: clipping keeps
        // a partial footprint legal
        let road = rect_instance(200, 0, 20, 512, (512, 512), TargetClass::Road);
        let mut rng = derive_rng(21, &["road"]);
        let placed = place(&mut rng, &road, &identity_params(), (512, 512), 200)
            .unwrap()
            .expect("roads can clip");
        assert!(!placed.footprint.is_empty());
        let frac = overlap_fraction(&road.mask, &placed.footprint).unwrap();
        assert!(frac <= 0.05, "overlap {frac}");
    }
}
