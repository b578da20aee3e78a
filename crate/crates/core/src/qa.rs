//! Question/answer synthesis: a data-driven template registry, fact
//! derivation from tamper records, and triple emission.
//!
//! The registry is a JSON data file; question wording, answer domains,
//! bin thresholds, and per-record applicability all live there so they can
//! be re-mapped without code changes. Copy-move records emit 14 triples in
//! a cmqa dataset and 15 in a tqa dataset (the tamper-type question is
//! tqa-only), blur records emit 8, untampered items emit exactly one
//! tamper-presence triple answered "no".

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mask::{direction, grid_cell, normalized_distance, region_stats, Direction8, GridCell};
use crate::tamper::{BlurKind, TamperKind, TamperRecord, TargetClass};

/// Which dataset flavor a registry view or generation run targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Cmqa,
    Tqa,
}

impl DatasetKind {
    pub fn label(self) -> &'static str {
        match self {
            DatasetKind::Cmqa => "cmqa",
            DatasetKind::Tqa => "tqa",
        }
    }

    pub fn from_label(s: &str) -> Result<DatasetKind> {
        match s {
            "cmqa" => Ok(DatasetKind::Cmqa),
            "tqa" => Ok(DatasetKind::Tqa),
            other => Err(Error::Registry(format!("unknown dataset kind '{other}'"))),
        }
    }
}

/// Question grouping used throughout reporting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Basic,
    Independent,
    Related,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Basic, Category::Independent, Category::Related];

    pub fn label(self) -> &'static str {
        match self {
            Category::Basic => "basic",
            Category::Independent => "independent",
            Category::Related => "related",
        }
    }
}

/// Record kinds a template applies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Applicability {
    CopyMove,
    Blur,
    Untampered,
}

/// Which derived fact answers a template.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactKey {
    Presence,
    ObjectClass,
    Theme,
    TmpCell,
    TmpSize,
    SrcCell,
    Direction,
    Distance,
    SrcSize,
    BorderTouch,
    SoleInClass,
    SizeRelation,
    Overlap,
    Rotated,
    TamperType,
}

/// Answer-bin thresholds, shipped as registry data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Area-ratio upper bounds for tiny / small / medium; above is large.
    pub size_bins: [f64; 3],
    /// Normalized-distance upper bounds for adjacent / near / medium; above is far.
    pub distance_bins: [f64; 3],
    /// Scale factors (shrunk_below, enlarged_above); between is unchanged.
    pub size_relation: [f64; 2],
}

impl Default for Thresholds {
    fn default() -> Thresholds {
        Thresholds {
            size_bins: [0.005, 0.02, 0.08],
            distance_bins: [0.05, 0.2, 0.45],
            size_relation: [0.95, 1.05],
        }
    }
}

/// One question template from the registry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionTemplate {
    pub qid: u8,
    pub category: Category,
    pub fact: FactKey,
    pub text_pattern: String,
    pub answer_domain: Vec<String>,
    pub applicability: BTreeSet<Applicability>,
    pub datasets: BTreeSet<DatasetKind>,
}

#[derive(Debug, Deserialize)]
struct RegistryFile {
    #[serde(default)]
    thresholds: Option<Thresholds>,
    templates: Vec<QuestionTemplate>,
}

/// The loaded question registry covering both dataset flavors.
#[derive(Clone, Debug)]
pub struct Registry {
    thresholds: Thresholds,
    templates: Vec<QuestionTemplate>,
}

const BUILTIN_REGISTRY: &str = include_str!("../data/registry.json");

impl Registry {
    /// The registry shipped with the crate.
    pub fn builtin() -> Registry {
        Registry::from_json_str(BUILTIN_REGISTRY).expect("builtin registry is valid")
    }

    pub fn from_json_str(s: &str) -> Result<Registry> {
        let file: RegistryFile =
            serde_json::from_str(s).map_err(|e| Error::Registry(format!("parse: {e}")))?;
        let reg = Registry {
            thresholds: file.thresholds.unwrap_or_default(),
            templates: file.templates,
        };
        reg.validate()?;
        Ok(reg)
    }

    pub fn from_path(path: &Path) -> Result<Registry> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Registry::from_json_str(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.templates.is_empty() {
            return Err(Error::Registry("registry has no templates".into()));
        }
        let mut seen = BTreeSet::new();
        for t in &self.templates {
            if t.qid == 0 {
                return Err(Error::Registry("qid 0 is reserved".into()));
            }
            if !seen.insert(t.qid) {
                return Err(Error::Registry(format!("duplicate qid {}", t.qid)));
            }
            if t.answer_domain.is_empty() {
                return Err(Error::Registry(format!("qid {} has empty answer domain", t.qid)));
            }
            let distinct: BTreeSet<&String> = t.answer_domain.iter().collect();
            if distinct.len() != t.answer_domain.len() {
                return Err(Error::Registry(format!(
                    "qid {} repeats an answer in its domain",
                    t.qid
                )));
            }
            if t.applicability.is_empty() || t.datasets.is_empty() {
                return Err(Error::Registry(format!(
                    "qid {} must name at least one applicability and dataset",
                    t.qid
                )));
            }
            if t.text_pattern.trim().is_empty() {
                return Err(Error::Registry(format!("qid {} has empty text", t.qid)));
            }
        }
        Ok(())
    }

    pub fn thresholds(&self) -> Thresholds {
        self.thresholds
    }

    /// Templates belonging to one dataset flavor, in registry order.
    pub fn templates(&self, kind: DatasetKind) -> impl Iterator<Item = &QuestionTemplate> {
        self.templates.iter().filter(move |t| t.datasets.contains(&kind))
    }

    pub fn template(&self, kind: DatasetKind, qid: u8) -> Option<&QuestionTemplate> {
        self.templates(kind).find(|t| t.qid == qid)
    }
}

/// Deduplicated union of all answer domains of one dataset flavor, in
/// registry order of first appearance.
pub fn answer_vocabulary(registry: &Registry, kind: DatasetKind) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for t in registry.templates(kind) {
        for a in &t.answer_domain {
            if seen.insert(a.clone()) {
                out.push(a.clone());
            }
        }
    }
    out
}

/// Tamper type as answered by the tamper-type question.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TamperType {
    CopyMove,
    GaussianBlur,
    MosaicBlur,
    Daub,
    None,
}

impl TamperType {
    pub fn label(self) -> &'static str {
        match self {
            TamperType::CopyMove => "copy-move",
            TamperType::GaussianBlur => "gaussian-blur",
            TamperType::MosaicBlur => "mosaic-blur",
            TamperType::Daub => "daub",
            TamperType::None => "none",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizeBin {
    Tiny,
    Small,
    Medium,
    Large,
}

impl SizeBin {
    pub fn label(self) -> &'static str {
        match self {
            SizeBin::Tiny => "tiny",
            SizeBin::Small => "small",
            SizeBin::Medium => "medium",
            SizeBin::Large => "large",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceBin {
    Adjacent,
    Near,
    Medium,
    Far,
}

impl DistanceBin {
    pub fn label(self) -> &'static str {
        match self {
            DistanceBin::Adjacent => "adjacent",
            DistanceBin::Near => "near",
            DistanceBin::Medium => "medium",
            DistanceBin::Far => "far",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizeRelation {
    Enlarged,
    Shrunk,
    Unchanged,
}

impl SizeRelation {
    pub fn label(self) -> &'static str {
        match self {
            SizeRelation::Enlarged => "enlarged",
            SizeRelation::Shrunk => "shrunk",
            SizeRelation::Unchanged => "unchanged",
        }
    }
}

/// Everything the questions interrogate about one record. Copy-move
/// records populate all fields; blur records leave the src-vs-tmp
/// relational fields empty; untampered items carry only the presence facts.
#[derive(Clone, Debug, PartialEq)]
pub struct FactSheet {
    pub tampered: bool,
    pub tamper_type: TamperType,
    pub object_class: Option<TargetClass>,
    pub theme: Option<String>,
    pub sole_in_class: Option<bool>,
    pub tmp_cell: Option<GridCell>,
    pub src_cell: Option<GridCell>,
    pub tmp_size_bin: Option<SizeBin>,
    pub src_size_bin: Option<SizeBin>,
    pub tmp_touches_border: Option<bool>,
    pub direction_src_to_tmp: Option<Direction8>,
    pub distance_bin: Option<DistanceBin>,
    pub size_relation: Option<SizeRelation>,
    pub rotated: Option<bool>,
    pub overlapping: Option<bool>,
}

impl FactSheet {
    fn untampered() -> FactSheet {
        FactSheet {
            tampered: false,
            tamper_type: TamperType::None,
            object_class: None,
            theme: None,
            sole_in_class: None,
            tmp_cell: None,
            src_cell: None,
            tmp_size_bin: None,
            src_size_bin: None,
            tmp_touches_border: None,
            direction_src_to_tmp: None,
            distance_bin: None,
            size_relation: None,
            rotated: None,
            overlapping: None,
        }
    }
}

/// Image-level context the record itself does not carry: the scene theme
/// from corpus metadata and how many annotated instances of the tampered
/// class the image holds.
#[derive(Clone, Debug)]
pub struct FactContext {
    pub theme: Option<String>,
    pub same_class_count: u32,
    pub thresholds: Thresholds,
}

impl Default for FactContext {
    fn default() -> FactContext {
        FactContext {
            theme: None,
            same_class_count: 1,
            thresholds: Thresholds::default(),
        }
    }
}

/// A record as seen by question synthesis: a tamper record or an
/// untampered item that only answers the presence question.
#[derive(Clone, Copy, Debug)]
pub enum QaInput<'a> {
    Tampered(&'a TamperRecord),
    Untampered { image_id: &'a str },
}

impl QaInput<'_> {
    pub fn image_id(&self) -> &str {
        match self {
            QaInput::Tampered(r) => &r.image_id,
            QaInput::Untampered { image_id } => image_id,
        }
    }

    fn applicability(&self) -> Applicability {
        match self {
            QaInput::Tampered(r) => match r.kind {
                TamperKind::CopyMove => Applicability::CopyMove,
                TamperKind::Blur => Applicability::Blur,
            },
            QaInput::Untampered { .. } => Applicability::Untampered,
        }
    }
}

fn size_bin(area: u64, dims: (u32, u32), thresholds: &Thresholds) -> SizeBin {
    let ratio = area as f64 / (dims.0 as f64 * dims.1 as f64);
    let [t0, t1, t2] = thresholds.size_bins;
    if ratio < t0 {
        SizeBin::Tiny
    } else if ratio < t1 {
        SizeBin::Small
    } else if ratio < t2 {
        SizeBin::Medium
    } else {
        SizeBin::Large
    }
}

fn distance_bin(norm: f64, thresholds: &Thresholds) -> DistanceBin {
    let [t0, t1, t2] = thresholds.distance_bins;
    if norm < t0 {
        DistanceBin::Adjacent
    } else if norm < t1 {
        DistanceBin::Near
    } else if norm < t2 {
        DistanceBin::Medium
    } else {
        DistanceBin::Far
    }
}

fn size_relation(scale: f64, thresholds: &Thresholds) -> SizeRelation {
    let [shrunk_below, enlarged_above] = thresholds.size_relation;
    if scale > enlarged_above {
        SizeRelation::Enlarged
    } else if scale < shrunk_below {
        SizeRelation::Shrunk
    } else {
        SizeRelation::Unchanged
    }
}

fn invalid(record_id: &str, detail: impl std::fmt::Display) -> Error {
    Error::InvalidRecord(record_id.to_string(), detail.to_string())
}

/// Derive the fact sheet one record answers questions from. Geometric
/// facts come from the record's masks; the theme and class-count facts
/// come from `ctx`.
pub fn derive_facts(input: &QaInput, ctx: &FactContext) -> Result<FactSheet> {
    let record = match input {
        QaInput::Untampered { .. } => return Ok(FactSheet::untampered()),
        QaInput::Tampered(r) => r,
    };
    let th = &ctx.thresholds;
    let dims = record.src_mask.dims();
    if record.tmp_mask.dims() != dims {
        return Err(invalid(&record.record_id, "mask dimension mismatch"));
    }
    let src_stats =
        region_stats(&record.src_mask).map_err(|e| invalid(&record.record_id, e))?;
    let tmp_stats =
        region_stats(&record.tmp_mask).map_err(|e| invalid(&record.record_id, e))?;
    let src_cell =
        grid_cell(src_stats.centroid, dims).map_err(|e| invalid(&record.record_id, e))?;
    let tmp_cell =
        grid_cell(tmp_stats.centroid, dims).map_err(|e| invalid(&record.record_id, e))?;

    let mut facts = FactSheet {
        tampered: true,
        tamper_type: TamperType::CopyMove,
        object_class: Some(record.instance.class_label),
        theme: Some(ctx.theme.clone().unwrap_or_else(|| "unknown".to_string())),
        sole_in_class: Some(ctx.same_class_count == 1),
        tmp_cell: Some(tmp_cell),
        src_cell: Some(src_cell),
        tmp_size_bin: Some(size_bin(tmp_stats.area_px, dims, th)),
        src_size_bin: Some(size_bin(src_stats.area_px, dims, th)),
        tmp_touches_border: Some(record.tmp_mask.touches_border()),
        direction_src_to_tmp: None,
        distance_bin: None,
        size_relation: None,
        rotated: None,
        overlapping: None,
    };
    match record.kind {
        TamperKind::Blur => {
            let kind = record
                .params
                .blur_kind
                .ok_or_else(|| invalid(&record.record_id, "blur record missing blur kind"))?;
            facts.tamper_type = match kind {
                BlurKind::Gaussian => TamperType::GaussianBlur,
                BlurKind::Mosaic => TamperType::MosaicBlur,
                BlurKind::Daub => TamperType::Daub,
            };
        }
        TamperKind::CopyMove => {
            let dir = direction(src_stats.centroid, tmp_stats.centroid)
                .map_err(|e| invalid(&record.record_id, e))?;
            let dist = normalized_distance(src_stats.centroid, tmp_stats.centroid, dims)
                .map_err(|e| invalid(&record.record_id, e))?;
            let inter = record
                .src_mask
                .intersection_count(&record.tmp_mask)
                .map_err(|e| invalid(&record.record_id, e))?;
            facts.direction_src_to_tmp = Some(dir);
            facts.distance_bin = Some(distance_bin(dist, th));
            facts.size_relation = Some(size_relation(record.params.scale, th));
            facts.rotated = Some(record.params.rotation_deg != 0.0);
            facts.overlapping = Some(inter > 0);
        }
    }
    Ok(facts)
}

/// Fill a template's text pattern from the facts. Patterns may embed
/// `{class}`; unknown or unfillable slots are an error.
pub fn render_text(template: &QuestionTemplate, facts: &FactSheet) -> Result<String> {
    let mut out = String::with_capacity(template.text_pattern.len());
    let mut rest = template.text_pattern.as_str();
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let tail = &rest[start + 1..];
        let end = tail.find('}').ok_or_else(|| Error::MissingSlot {
            qid: template.qid,
            slot: tail.chars().take(16).collect(),
        })?;
        let slot = &tail[..end];
        match slot {
            "class" => {
                let class = facts.object_class.ok_or(Error::MissingSlot {
                    qid: template.qid,
                    slot: slot.to_string(),
                })?;
                out.push_str(class.label());
            }
            other => {
                return Err(Error::MissingSlot {
                    qid: template.qid,
                    slot: other.to_string(),
                })
            }
        }
        rest = &tail[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// One question/answer pair bound to an image.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub triple_id: String,
    pub image_id: String,
    pub qid: u8,
    pub category: Category,
    pub question_text: String,
    pub answer: String,
}

/// Stable triple id: truncated digest of image id and qid.
pub fn triple_id(image_id: &str, qid: u8) -> String {
    let mut hasher = Sha256::new();
    hasher.update(image_id.as_bytes());
    hasher.update(b"|");
    hasher.update(qid.to_string().as_bytes());
    hex::encode(&hasher.finalize()[..8])
}

fn answer_for(fact: FactKey, facts: &FactSheet) -> Option<String> {
    fn yes_no(v: bool) -> String {
        if v { "yes" } else { "no" }.to_string()
    }
    match fact {
        FactKey::Presence => Some(yes_no(facts.tampered)),
        FactKey::ObjectClass => facts.object_class.map(|c| c.label().to_string()),
        FactKey::Theme => facts.theme.clone(),
        FactKey::TmpCell => facts.tmp_cell.map(|c| c.label().to_string()),
        FactKey::TmpSize => facts.tmp_size_bin.map(|b| b.label().to_string()),
        FactKey::SrcCell => facts.src_cell.map(|c| c.label().to_string()),
        FactKey::Direction => facts.direction_src_to_tmp.map(|d| d.label().to_string()),
        FactKey::Distance => facts.distance_bin.map(|b| b.label().to_string()),
        FactKey::SrcSize => facts.src_size_bin.map(|b| b.label().to_string()),
        FactKey::BorderTouch => facts.tmp_touches_border.map(yes_no),
        FactKey::SoleInClass => facts.sole_in_class.map(yes_no),
        FactKey::SizeRelation => facts.size_relation.map(|r| r.label().to_string()),
        FactKey::Overlap => facts.overlapping.map(yes_no),
        FactKey::Rotated => facts.rotated.map(yes_no),
        FactKey::TamperType => {
            if facts.tampered {
                Some(facts.tamper_type.label().to_string())
            } else {
                None
            }
        }
    }
}

/// Emit all applicable triples for one record under one dataset flavor.
/// Every answer is validated against its template's answer domain.
pub fn synthesize(
    registry: &Registry,
    input: &QaInput,
    ctx: &FactContext,
    kind: DatasetKind,
) -> Result<Vec<Triple>> {
    if kind == DatasetKind::Cmqa {
        if let QaInput::Tampered(r) = input {
            if r.kind == TamperKind::Blur {
                return Err(invalid(&r.record_id, "blur records do not belong in a cmqa dataset"));
            }
        }
    }
    let facts = derive_facts(input, ctx)?;
    let applicability = input.applicability();
    let image_id = input.image_id();
    let mut out = Vec::new();
    for template in registry.templates(kind) {
        if !template.applicability.contains(&applicability) {
            continue;
        }
        let answer = answer_for(template.fact, &facts).ok_or(Error::TemplateGap {
            qid: template.qid,
            record: image_id.to_string(),
        })?;
        if !template.answer_domain.contains(&answer) {
            return Err(Error::TemplateGap {
                qid: template.qid,
                record: format!("{image_id}: answer '{answer}' outside domain"),
            });
        }
        out.push(Triple {
            triple_id: triple_id(image_id, template.qid),
            image_id: image_id.to_string(),
            qid: template.qid,
            category: template.category,
            question_text: render_text(template, &facts)?,
            answer,
        });
    }
    Ok(out)
}
