//! Scoring: overall accuracy, average accuracy, per-qid breakdowns,
//! confusion matrices, and report comparison.
//!
//! Correctness is exact string match after case-folding and trimming; the
//! answer vocabulary is closed, so no fuzzier matching is wanted. OA is
//! the fraction of all triples answered correctly; AA is the unweighted
//! mean of per-qid accuracies, so duplicating one qid's triples moves OA
//! but never AA.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::qa::Triple;

/// One model prediction for a gold triple.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub triple_id: String,
    pub answer: String,
}

/// How to treat predictions that do not line up with the gold set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ScorePolicy {
    /// Missing predictions are counted incorrect (with a warning count);
    /// unknown triple ids are tallied and ignored.
    #[default]
    Lenient,
    /// Any missing or unknown triple id is an error.
    Strict,
}

/// Accuracy of one qid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QidScore {
    pub correct: u64,
    pub total: u64,
    pub accuracy: f64,
}

/// Confusion counts for one qid: rows are gold answers over the observed
/// gold domain, columns add a trailing "other/missing" bucket for
/// predictions outside the domain or absent entirely.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub answers: Vec<String>,
    /// rows[gold][pred]; the last column is "other/missing".
    pub rows: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.rows.iter().flatten().sum()
    }
}

/// The full scoring output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub oa: f64,
    pub aa: f64,
    pub per_qid: BTreeMap<u8, QidScore>,
    pub confusion: BTreeMap<u8, ConfusionMatrix>,
    pub unmatched_predictions: u64,
    pub missing_predictions: u64,
    /// Digest of the gold triple ids and answers; reports are only
    /// comparable when they were scored against the same gold set.
    pub gold_digest: String,
}

fn normalize(answer: &str) -> String {
    answer.trim().to_lowercase()
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Digest of the gold basis: order-independent over (triple_id, answer).
fn gold_digest(gold: &[Triple]) -> String {
    let mut lines: Vec<String> = gold
        .iter()
        .map(|t| format!("{}\t{}", t.triple_id, normalize(&t.answer)))
        .collect();
    lines.sort();
    let mut hasher = Sha256::new();
    for line in lines {
        hasher.update(line.as_bytes());
        hasher.update([0u8]);
    }
    hex::encode(&hasher.finalize()[..16])
}

/// Score predictions against gold triples.
///
/// Percentages are rounded to 2 decimals at report time; AA averages the
/// unrounded per-qid accuracies first.
pub fn score(gold: &[Triple], preds: &[Prediction], policy: ScorePolicy) -> Result<MetricsReport> {
    if gold.is_empty() {
        return Err(Error::EmptyGold);
    }
    let mut by_id: BTreeMap<&str, &Triple> = BTreeMap::new();
    for t in gold {
        if by_id.insert(t.triple_id.as_str(), t).is_some() {
            return Err(Error::DuplicateTripleId(t.triple_id.clone()));
        }
    }
    let mut pred_by_id: BTreeMap<&str, &str> = BTreeMap::new();
    let mut unmatched = 0u64;
    for p in preds {
        if pred_by_id.insert(p.triple_id.as_str(), p.answer.as_str()).is_some() {
            return Err(Error::DuplicateTripleId(p.triple_id.clone()));
        }
        if !by_id.contains_key(p.triple_id.as_str()) {
            if policy == ScorePolicy::Strict {
                return Err(Error::UnknownTripleId(p.triple_id.clone()));
            }
            unmatched += 1;
        }
    }

    // per-qid tallies and confusion in one deterministic pass
    let mut per_qid_counts: BTreeMap<u8, (u64, u64)> = BTreeMap::new();
    let mut gold_domains: BTreeMap<u8, BTreeSet<String>> = BTreeMap::new();
    let mut missing = 0u64;
    for t in gold {
        gold_domains
            .entry(t.qid)
            .or_default()
            .insert(normalize(&t.answer));
    }
    let mut confusion_counts: BTreeMap<u8, BTreeMap<(String, Option<String>), u64>> =
        BTreeMap::new();
    for t in gold {
        let gold_answer = normalize(&t.answer);
        let predicted = pred_by_id.get(t.triple_id.as_str()).map(|a| normalize(a));
        if predicted.is_none() {
            if policy == ScorePolicy::Strict {
                return Err(Error::MissingTriple(t.triple_id.clone()));
            }
            missing += 1;
        }
        let correct = predicted.as_deref() == Some(gold_answer.as_str());
        let entry = per_qid_counts.entry(t.qid).or_default();
        entry.1 += 1;
        if correct {
            entry.0 += 1;
        }
        // column: a prediction inside the gold domain keeps its label,
        // anything else lands in the other/missing bucket
        let col = predicted.filter(|p| gold_domains[&t.qid].contains(p));
        *confusion_counts
            .entry(t.qid)
            .or_default()
            .entry((gold_answer, col))
            .or_default() += 1;
    }

    let mut per_qid = BTreeMap::new();
    let mut acc_sum = 0.0;
    for (&qid, &(correct, total)) in &per_qid_counts {
        let accuracy = 100.0 * correct as f64 / total as f64;
        acc_sum += accuracy;
        per_qid.insert(
            qid,
            QidScore {
                correct,
                total,
                accuracy: round2(accuracy),
            },
        );
    }
    let total_correct: u64 = per_qid_counts.values().map(|(c, _)| c).sum();
    let total: u64 = per_qid_counts.values().map(|(_, t)| t).sum();
    let oa = round2(100.0 * total_correct as f64 / total as f64);
    let aa = round2(acc_sum / per_qid_counts.len() as f64);

    let mut confusion = BTreeMap::new();
    for (qid, counts) in confusion_counts {
        let answers: Vec<String> = gold_domains[&qid].iter().cloned().collect();
        let index: BTreeMap<&str, usize> =
            answers.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
        let cols = answers.len() + 1;
        let mut rows = vec![vec![0u64; cols]; answers.len()];
        for ((gold_answer, col), n) in counts {
            let r = index[gold_answer.as_str()];
            let c = col.as_deref().map_or(cols - 1, |p| index[p]);
            rows[r][c] += n;
        }
        confusion.insert(qid, ConfusionMatrix { answers, rows });
    }

    Ok(MetricsReport {
        oa,
        aa,
        per_qid,
        confusion,
        unmatched_predictions: unmatched,
        missing_predictions: missing,
        gold_digest: gold_digest(gold),
    })
}

/// Confusion matrix for a single qid.
pub fn confusion(gold: &[Triple], preds: &[Prediction], qid: u8) -> Result<ConfusionMatrix> {
    if !gold.iter().any(|t| t.qid == qid) {
        return Err(Error::UnknownQid(qid));
    }
    let report = score(gold, preds, ScorePolicy::Lenient)?;
    Ok(report.confusion[&qid].clone())
}

/// Signed per-qid and aggregate deltas between two reports over the same
/// gold basis (b minus a).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDelta {
    pub oa: f64,
    pub aa: f64,
    pub per_qid: BTreeMap<u8, f64>,
}

pub fn compare_reports(a: &MetricsReport, b: &MetricsReport) -> Result<ReportDelta> {
    if a.gold_digest != b.gold_digest {
        return Err(Error::BasisMismatch);
    }
    let mut per_qid = BTreeMap::new();
    for (qid, sa) in &a.per_qid {
        let sb = &b.per_qid[qid];
        per_qid.insert(*qid, round2(sb.accuracy - sa.accuracy));
    }
    Ok(ReportDelta {
        oa: round2(b.oa - a.oa),
        aa: round2(b.aa - a.aa),
        per_qid,
    })
}

/// Prediction file: one JSON record per line with triple_id and answer.
pub fn read_predictions(path: &std::path::Path) -> Result<Vec<Prediction>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(line).map_err(|e| Error::ParseError {
            path: path.display().to_string(),
            line: i + 1,
            detail: e.to_string(),
        })?;
        out.push(p);
    }
    Ok(out)
}

pub fn write_predictions(preds: &[Prediction], path: &std::path::Path) -> Result<()> {
    let mut text = String::new();
    for p in preds {
        let v = serde_json::to_value(p).map_err(|e| Error::Registry(format!("serialize: {e}")))?;
        text.push_str(&v.to_string());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qa::Category;

    fn gold(qid: u8, n: usize, answer: &str) -> Triple {
        Triple {
            triple_id: format!("q{qid}-{n}"),
            image_id: format!("img{n}"),
            qid,
            category: Category::Basic,
            question_text: "q".into(),
            answer: answer.into(),
        }
    }

    fn pred(id: &str, answer: &str) -> Prediction {
        Prediction {
            triple_id: id.into(),
            answer: answer.into(),
        }
    }

    #[test]
    fn all_correct_is_100() {
        let g = vec![gold(1, 0, "yes"), gold(2, 0, "ship")];
        let p = vec![pred("q1-0", "yes"), pred("q2-0", "ship")];
        let r = score(&g, &p, ScorePolicy::Strict).unwrap();
        assert_eq!(r.oa, 100.00);
        assert_eq!(r.aa, 100.00);
        assert_eq!(r.missing_predictions, 0);
        assert_eq!(r.unmatched_predictions, 0);
    }

    #[test]
    fn hand_fixture_oa_75_aa_75() {
        // qA 1-of-2 correct, qB 2-of-2 correct: OA 3/4 = 75.00, AA (50+100)/2
        let g = vec![
            gold(1, 0, "yes"),
            gold(1, 1, "no"),
            gold(2, 0, "ship"),
            gold(2, 1, "road"),
        ];
        let p = vec![
            pred("q1-0", "yes"),
            pred("q1-1", "yes"),
            pred("q2-0", "ship"),
            pred("q2-1", "road"),
        ];
        let r = score(&g, &p, ScorePolicy::Strict).unwrap();
        assert_eq!(r.oa, 75.00);
        assert_eq!(r.aa, 75.00);
        assert_eq!(r.per_qid[&1].accuracy, 50.00);
        assert_eq!(r.per_qid[&2].accuracy, 100.00);
    }

    #[test]
    fn hand_fixture_oa_50_aa_66_67() {
        // qA 1-of-1, qB 1-of-3: OA 2/4 = 50.00, AA (100 + 33.33...)/2 = 66.67
        let g = vec![
            gold(1, 0, "yes"),
            gold(2, 0, "east"),
            gold(2, 1, "west"),
            gold(2, 2, "north"),
        ];
        let p = vec![
            pred("q1-0", "yes"),
            pred("q2-0", "east"),
            pred("q2-1", "east"),
            pred("q2-2", "east"),
        ];
        let r = score(&g, &p, ScorePolicy::Strict).unwrap();
        assert_eq!(r.oa, 50.00);
        assert_eq!(r.aa, 66.67);
    }

    #[test]
    fn matching_folds_case_and_whitespace() {
        let g = vec![gold(1, 0, "Yes")];
        let p = vec![pred("q1-0", "  yES ")];
        let r = score(&g, &p, ScorePolicy::Strict).unwrap();
        assert_eq!(r.oa, 100.00);
    }

    #[test]
    fn lenient_counts_missing_incorrect_strict_errors() {
        let g = vec![gold(1, 0, "yes"), gold(1, 1, "no")];
        let p = vec![pred("q1-0", "yes")];
        let r = score(&g, &p, ScorePolicy::Lenient).unwrap();
        assert_eq!(r.oa, 50.00);
        assert_eq!(r.missing_predictions, 1);
        assert!(matches!(
            score(&g, &p, ScorePolicy::Strict).unwrap_err(),
            Error::MissingTriple(_)
        ));
    }

    #[test]
    fn unknown_prediction_ids() {
        let g = vec![gold(1, 0, "yes")];
        let p = vec![pred("q1-0", "yes"), pred("zzz", "no")];
        let r = score(&g, &p, ScorePolicy::Lenient).unwrap();
        assert_eq!(r.unmatched_predictions, 1);
        assert_eq!(r.oa, 100.00);
        assert!(matches!(
            score(&g, &p, ScorePolicy::Strict).unwrap_err(),
            Error::UnknownTripleId(_)
        ));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let g = vec![gold(1, 0, "yes"), gold(1, 0, "no")];
        assert!(matches!(
            score(&g, &[], ScorePolicy::Lenient).unwrap_err(),
            Error::DuplicateTripleId(_)
        ));
        let g = vec![gold(1, 0, "yes")];
        let p = vec![pred("q1-0", "yes"), pred("q1-0", "no")];
        assert!(matches!(
            score(&g, &p, ScorePolicy::Lenient).unwrap_err(),
            Error::DuplicateTripleId(_)
        ));
    }

    #[test]
    fn empty_gold_is_an_error() {
        assert!(matches!(
            score(&[], &[], ScorePolicy::Lenient).unwrap_err(),
            Error::EmptyGold
        ));
    }

    #[test]
    fn aa_invariant_under_qid_duplication_oa_not() {
        // duplicating all triples of one qid: per-qid accuracies unchanged
        // so AA holds; OA moves toward that qid's accuracy
        let g = vec![
            gold(1, 0, "yes"),
            gold(1, 1, "no"),
            gold(2, 0, "ship"),
            gold(2, 1, "road"),
        ];
        let p = vec![
            pred("q1-0", "yes"),
            pred("q1-1", "yes"),
            pred("q2-0", "ship"),
            pred("q2-1", "road"),
        ];
        let base = score(&g, &p, ScorePolicy::Lenient).unwrap();

        let mut g2 = g.clone();
        let mut p2 = p.clone();
        for n in 0..2 {
            let mut dup = gold(1, n, if n == 0 { "yes" } else { "no" });
            dup.triple_id = format!("dup-q1-{n}");
            g2.push(dup);
        }
        p2.push(pred("dup-q1-0", "yes"));
        p2.push(pred("dup-q1-1", "yes"));
        let doubled = score(&g2, &p2, ScorePolicy::Lenient).unwrap();

        assert_eq!(base.aa, doubled.aa);
        assert_ne!(base.oa, doubled.oa);
        assert_eq!(doubled.oa, round2(100.0 * 4.0 / 6.0));
    }

    #[test]
    fn confusion_diagonal_when_perfect() {
        let g = vec![gold(2, 0, "ship"), gold(2, 1, "road"), gold(2, 2, "ship")];
        let p = vec![
            pred("q2-0", "ship"),
            pred("q2-1", "road"),
            pred("q2-2", "ship"),
        ];
        let m = confusion(&g, &p, 2).unwrap();
        assert_eq!(m.answers, vec!["road".to_string(), "ship".to_string()]);
        // rows ordered by answer: road then ship; last column is other/missing
        assert_eq!(m.rows, vec![vec![1, 0, 0], vec![0, 2, 0]]);
    }

    #[test]
    fn confusion_single_column_when_constant() {
        let g = vec![gold(2, 0, "ship"), gold(2, 1, "road"), gold(2, 2, "tree")];
        let p = vec![
            pred("q2-0", "ship"),
            pred("q2-1", "ship"),
            pred("q2-2", "ship"),
        ];
        let m = confusion(&g, &p, 2).unwrap();
        let ship_col = m.answers.iter().position(|a| a == "ship").unwrap();
        for (r, row) in m.rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if c == ship_col {
                    assert_eq!(v, 1, "row {r}");
                } else {
                    assert_eq!(v, 0, "row {r} col {c}");
                }
            }
        }
    }

    #[test]
    fn confusion_four_sample_hand_tally() {
        let g = vec![
            gold(1, 0, "yes"),
            gold(1, 1, "yes"),
            gold(1, 2, "no"),
            gold(1, 3, "no"),
        ];
        let p = vec![
            pred("q1-0", "yes"),
            pred("q1-1", "no"),
            pred("q1-2", "maybe"),
            // q1-3 missing
        ];
        let m = confusion(&g, &p, 1).unwrap();
        assert_eq!(m.answers, vec!["no".to_string(), "yes".to_string()]);
        // gold "no": one out-of-domain ("maybe"), one missing -> 2 in last col
        assert_eq!(m.rows[0], vec![0, 0, 2]);
        // gold "yes": one correct, one predicted "no"
        assert_eq!(m.rows[1], vec![1, 1, 0]);
        assert_eq!(m.total(), 4);
    }

    #[test]
    fn confusion_totals_cover_all_gold() {
        let g = vec![
            gold(1, 0, "yes"),
            gold(1, 1, "no"),
            gold(2, 0, "ship"),
            gold(2, 1, "road"),
            gold(3, 0, "east"),
        ];
        let p = vec![pred("q1-0", "yes"), pred("q2-0", "tree")];
        let r = score(&g, &p, ScorePolicy::Lenient).unwrap();
        let total: u64 = r.confusion.values().map(ConfusionMatrix::total).sum();
        assert_eq!(total, g.len() as u64);
    }

    #[test]
    fn unknown_qid_for_confusion() {
        let g = vec![gold(1, 0, "yes")];
        assert!(matches!(confusion(&g, &[], 9).unwrap_err(), Error::UnknownQid(9)));
    }

    #[test]
    fn scoring_is_order_independent() {
        let g = vec![
            gold(1, 0, "yes"),
            gold(1, 1, "no"),
            gold(2, 0, "ship"),
            gold(2, 1, "road"),
        ];
        let mut p = vec![
            pred("q1-0", "yes"),
            pred("q1-1", "yes"),
            pred("q2-0", "ship"),
            pred("q2-1", "road"),
        ];
        let a = score(&g, &p, ScorePolicy::Lenient).unwrap();
        p.reverse();
        let b = score(&g, &p, ScorePolicy::Lenient).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn compare_reports_deltas() {
        let g = vec![
            gold(1, 0, "yes"),
            gold(1, 1, "no"),
            gold(2, 0, "ship"),
            gold(2, 1, "road"),
        ];
        let perfect = vec![
            pred("q1-0", "yes"),
            pred("q1-1", "no"),
            pred("q2-0", "ship"),
            pred("q2-1", "road"),
        ];
        let worse = vec![
            pred("q1-0", "yes"),
            pred("q1-1", "yes"),
            pred("q2-0", "ship"),
            pred("q2-1", "road"),
        ];
        let a = score(&g, &perfect, ScorePolicy::Lenient).unwrap();
        let b = score(&g, &worse, ScorePolicy::Lenient).unwrap();
        let same = compare_reports(&a, &a).unwrap();
        assert_eq!(same.oa, 0.0);
        assert_eq!(same.aa, 0.0);
        assert!(same.per_qid.values().all(|&d| d == 0.0));
        let delta = compare_reports(&a, &b).unwrap();
        assert_eq!(delta.oa, -25.00);
        assert_eq!(delta.per_qid[&1], -50.00);
        assert_eq!(delta.per_qid[&2], 0.00);

        // different gold basis
        let other_gold = vec![gold(1, 0, "yes"), gold(1, 1, "yes")];
        let c = score(&other_gold, &perfect, ScorePolicy::Lenient).unwrap();
        assert!(matches!(compare_reports(&a, &c).unwrap_err(), Error::BasisMismatch));
    }

    #[test]
    fn prediction_file_round_trip() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("preds.jsonl");
        let preds = vec![pred("a", "yes"), pred("b", "ship")];
        write_predictions(&preds, &path).unwrap();
        assert_eq!(read_predictions(&path).unwrap(), preds);
    }
}
