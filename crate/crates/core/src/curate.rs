//! Dataset curation: group-level train/val/test splitting and balanced
//! subset construction by weighted random sampling.
//!
//! Splitting assigns whole raw-image groups so an original and all of its
//! tampered derivatives land in the same split. Balancing downsamples every
//! question id to a common target count, favoring rare answers so the
//! answer distribution within each question flattens.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qa::Triple;
use crate::rng::derive_rng;

pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.70, 0.15, 0.15);

/// Sidecar file recording how a balanced subset was produced.
pub const BALANCE_RECORD_FILE: &str = "balance.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn label(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// A complete group-level split assignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub assignment: BTreeMap<String, Split>,
    pub ratios: (f64, f64, f64),
    pub seed: u64,
}

impl SplitAssignment {
    /// Ids of one split, sorted.
    pub fn ids_for(&self, split: Split) -> Vec<String> {
        self.assignment
            .iter()
            .filter(|(_, s)| **s == split)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for s in self.assignment.values() {
            match s {
                Split::Train => c.0 += 1,
                Split::Val => c.1 += 1,
                Split::Test => c.2 += 1,
            }
        }
        c
    }
}

/// Split counts by the largest-remainder rule; fractional-part ties are
/// broken by the seed.
fn quota_counts<R: Rng>(n: usize, ratios: (f64, f64, f64), rng: &mut R) -> [usize; 3] {
    let shares = [ratios.0, ratios.1, ratios.2];
    let mut counts = [0usize; 3];
    let mut fracs = [0f64; 3];
    let mut assigned = 0usize;
    for i in 0..3 {
        let quota = n as f64 * shares[i];
        counts[i] = quota.floor() as usize;
        fracs[i] = quota - quota.floor();
        assigned += counts[i];
    }
    let tiebreak: [u64; 3] = [rng.random(), rng.random(), rng.random()];
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        fracs[b]
            .partial_cmp(&fracs[a])
            .unwrap()
            .then(tiebreak[a].cmp(&tiebreak[b]))
    });
    for i in 0..(n - assigned) {
        counts[order[i]] += 1;
    }
    counts
}

/// Assign raw-image groups to train/val/test. Deterministic in the seed and
/// independent of input order; duplicate ids collapse to one group.
pub fn split(group_ids: &[String], ratios: (f64, f64, f64), seed: u64) -> Result<SplitAssignment> {
    if group_ids.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum = ratios.0 + ratios.1 + ratios.2;
    if !(ratios.0 >= 0.0 && ratios.1 >= 0.0 && ratios.2 >= 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios must be non-negative and sum to 1, got {ratios:?}"
        )));
    }
    let mut ids: Vec<String> = group_ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let counts = quota_counts(ids.len(), ratios, &mut derive_rng(seed, &["split", "tiebreak"]));
    ids.shuffle(&mut derive_rng(seed, &["split", "shuffle"]));
    let mut assignment = BTreeMap::new();
    for (i, id) in ids.into_iter().enumerate() {
        let split = if i < counts[0] {
            Split::Train
        } else if i < counts[0] + counts[1] {
            Split::Val
        } else {
            Split::Test
        };
        assignment.insert(id, split);
    }
    Ok(SplitAssignment {
        assignment,
        ratios,
        seed,
    })
}

/// Parameters of a balancing run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceSpec {
    /// Maximum relative deviation between per-qid counts (and headroom on
    /// per-answer caps).
    pub tolerance: f64,
    /// Per-qid output count; clamped to the smallest qid count. Defaults to
    /// the smallest qid count itself.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_qid_target: Option<u64>,
    pub seed: u64,
}

impl Default for BalanceSpec {
    fn default() -> BalanceSpec {
        BalanceSpec {
            tolerance: 0.02,
            per_qid_target: None,
            seed: 0,
        }
    }
}

/// Sidecar record written next to a balanced triples file so verification
/// can recheck the tolerance claim later.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceRecord {
    pub spec: BalanceSpec,
    /// Triples file the subset was drawn from, relative to the dataset root.
    pub source: String,
    /// Balanced triples file, relative to the dataset root.
    pub output: String,
}

/// Build a balanced subset: every qid is downsampled to a common target by
/// weighted sampling without replacement (weight 1/count(answer)), with a
/// per-answer cap of ceil(target/answers)·(1+tolerance); remaining slots
/// fill past the caps so every qid lands on the target exactly.
pub fn balance(triples: &[Triple], spec: &BalanceSpec) -> Result<Vec<Triple>> {
    if triples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(spec.tolerance > 0.0) {
        return Err(Error::Config(format!(
            "balance tolerance must be positive, got {}",
            spec.tolerance
        )));
    }
    let mut by_qid: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, t) in triples.iter().enumerate() {
        by_qid.entry(t.qid).or_default().push(i);
    }
    let min_count = by_qid.values().map(Vec::len).min().unwrap() as u64;
    let target = spec.per_qid_target.unwrap_or(min_count).min(min_count) as usize;
    if target == 0 {
        return Err(Error::Config("balance target is zero".into()));
    }

    let mut selected: Vec<usize> = Vec::with_capacity(by_qid.len() * target);
    for (qid, mut indices) in by_qid {
        // deterministic candidate order before drawing keys
        indices.sort_by(|&a, &b| triples[a].triple_id.cmp(&triples[b].triple_id));
        let mut answer_count: BTreeMap<&str, u64> = BTreeMap::new();
        for &i in &indices {
            *answer_count.entry(triples[i].answer.as_str()).or_default() += 1;
        }
        let answers = answer_count.len() as u64;
        let cap = ((target as u64).div_ceil(answers) as f64 * (1.0 + spec.tolerance)).floor() as u64;

        // weighted reservoir keys: u^(1/w) with w = 1/count(answer), so the
        // key is u^count and common answers sink
        let mut rng = derive_rng(spec.seed, &["balance", &qid.to_string()]);
        let mut keyed: Vec<(f64, usize)> = indices
            .iter()
            .map(|&i| {
                let u: f64 = rng.random();
                let c = answer_count[triples[i].answer.as_str()] as f64;
                (u.powf(c), i)
            })
            .collect();
        keyed.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then_with(|| triples[a.1].triple_id.cmp(&triples[b.1].triple_id))
        });

        let mut taken: BTreeMap<&str, u64> = BTreeMap::new();
        let mut chosen: Vec<usize> = Vec::with_capacity(target);
        let mut skipped: Vec<usize> = Vec::new();
        for &(_, i) in &keyed {
            if chosen.len() == target {
                break;
            }
            let entry = taken.entry(triples[i].answer.as_str()).or_default();
            if *entry < cap {
                *entry += 1;
                chosen.push(i);
            } else {
                skipped.push(i);
            }
        }
        // fill past the caps so the qid lands exactly on the target
        for i in skipped {
            if chosen.len() == target {
                break;
            }
            chosen.push(i);
        }
        selected.extend(chosen);
    }
    let selected: BTreeSet<usize> = selected.into_iter().collect();
    Ok(triples
        .iter()
        .enumerate()
        .filter(|(i, _)| selected.contains(i))
        .map(|(_, t)| t.clone())
        .collect())
}

/// Count summary of a triples list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub total: u64,
    pub per_qid: BTreeMap<u8, u64>,
    pub per_answer: BTreeMap<u8, BTreeMap<String, u64>>,
    pub per_category: BTreeMap<String, u64>,
}

pub fn distribution_report(triples: &[Triple]) -> DistributionReport {
    let mut per_qid: BTreeMap<u8, u64> = BTreeMap::new();
    let mut per_answer: BTreeMap<u8, BTreeMap<String, u64>> = BTreeMap::new();
    let mut per_category: BTreeMap<String, u64> = BTreeMap::new();
    for t in triples {
        *per_qid.entry(t.qid).or_default() += 1;
        *per_answer
            .entry(t.qid)
            .or_default()
            .entry(t.answer.clone())
            .or_default() += 1;
        *per_category.entry(t.category.label().to_string()).or_default() += 1;
    }
    DistributionReport {
        total: triples.len() as u64,
        per_qid,
        per_answer,
        per_category,
    }
}

/// Relative spread of per-qid counts: max/min − 1. Zero when perfectly
/// level; `None` for an empty report.
pub fn qid_deviation(report: &DistributionReport) -> Option<f64> {
    let min = report.per_qid.values().min()?;
    let max = report.per_qid.values().max()?;
    if *min == 0 {
        return Some(f64::INFINITY);
    }
    Some(*max as f64 / *min as f64 - 1.0)
}

/// Sample-size-normalized Pearson chi-square against the uniform
/// distribution over the given counts (zeros allowed). Strictly smaller
/// means strictly more uniform at any sample size.
pub fn normalized_chi_square(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let k = counts.len();
    if n == 0 || k < 2 {
        return 0.0;
    }
    let p = 1.0 / k as f64;
    counts
        .iter()
        .map(|&c| {
            let q = c as f64 / n as f64;
            (q - p) * (q - p) / p
        })
        .sum()
}
