//! Open-vocabulary scene-graph evaluation and the predicate-classification
//! probe.
//!
//! A predicted triplet can match a ground-truth triplet only when all three
//! labels agree and both box overlaps clear the IoU threshold; matching
//! within an image is one-to-one and maximal, so recall never depends on
//! which of several equivalent assignments a greedy pass would have picked.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::types::{iou, NormBox, RelationTriplet, SemanticTag};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("predictions reference image {0} absent from the ground truth")]
    UnknownImage(String),
    #[error("image {0} appears more than once")]
    DuplicateImage(String),
    #[error("duplicate score vector for image {image_id}, pair ({subject_box}, {object_box})")]
    DuplicateQuery { image_id: String, subject_box: NormBox, object_box: NormBox },
    #[error("no score vector for ground-truth pair ({subject_box}, {object_box}) in image {image_id}")]
    MissingScores { image_id: String, subject_box: NormBox, object_box: NormBox },
    #[error("invalid score vector: {0}")]
    InvalidScore(String),
}

/// Label comparison policy. Only one policy exists today; the enum keeps the
/// config serializable and the choice explicit at call sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMatch {
    #[default]
    CaseInsensitiveExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsConfig {
    iou_threshold: f64,
    label_match: LabelMatch,
}

impl MetricsConfig {
    pub fn new(iou_threshold: f64, label_match: LabelMatch) -> Result<Self, MetricsError> {
        if !iou_threshold.is_finite() || iou_threshold <= 0.0 || iou_threshold >= 1.0 {
            return Err(MetricsError::InvalidConfig(format!(
                "iou_threshold must lie in (0, 1), got {iou_threshold}"
            )));
        }
        Ok(MetricsConfig { iou_threshold, label_match })
    }

    pub fn iou_threshold(&self) -> f64 {
        self.iou_threshold
    }

    pub fn label_match(&self) -> LabelMatch {
        self.label_match
    }
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { iou_threshold: 0.5, label_match: LabelMatch::CaseInsensitiveExact }
    }
}

/// Case-insensitive exact comparison: "Person" matches "person", while
/// "people" and "person" stay distinct.
pub fn labels_match(a: &str, b: &str, policy: LabelMatch) -> bool {
    match policy {
        LabelMatch::CaseInsensitiveExact => a.eq_ignore_ascii_case(b),
    }
}

fn eligible(pred: &RelationTriplet, gt: &RelationTriplet, config: &MetricsConfig) -> bool {
    let policy = config.label_match;
    labels_match(pred.subject_tag.as_str(), gt.subject_tag.as_str(), policy)
        && labels_match(pred.predicate.as_str(), gt.predicate.as_str(), policy)
        && labels_match(pred.object_tag.as_str(), gt.object_tag.as_str(), policy)
        && iou(&pred.subject_box, &gt.subject_box) > config.iou_threshold
        && iou(&pred.object_box, &gt.object_box) > config.iou_threshold
}

fn augment(
    u: usize,
    adj: &[Vec<usize>],
    visited: &mut [bool],
    matched_gt: &mut [Option<usize>],
) -> bool {
    for &v in &adj[u] {
        if visited[v] {
            continue;
        }
        visited[v] = true;
        if matched_gt[v].is_none() || augment(matched_gt[v].unwrap(), adj, visited, matched_gt) {
            matched_gt[v] = Some(u);
            return true;
        }
    }
    false
}

/// Maximum one-to-one assignment of predicted triplets to ground-truth
/// triplets under the eligibility rule. Returns (prediction index, ground
/// truth index) pairs sorted by ground-truth index.
pub fn match_triplets(
    preds: &[RelationTriplet],
    gts: &[RelationTriplet],
    config: &MetricsConfig,
) -> Vec<(usize, usize)> {
    let adj: Vec<Vec<usize>> = preds
        .iter()
        .map(|p| (0..gts.len()).filter(|&g| eligible(p, &gts[g], config)).collect())
        .collect();
    let mut matched_gt: Vec<Option<usize>> = vec![None; gts.len()];
    let mut visited = vec![false; gts.len()];
    for u in 0..preds.len() {
        visited.fill(false);
        augment(u, &adj, &mut visited, &mut matched_gt);
    }
    matched_gt
        .iter()
        .enumerate()
        .filter_map(|(g, m)| m.map(|u| (u, g)))
        .collect()
}

/// One image's triplets, predicted or ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImageTriplets {
    pub image_id: String,
    pub triplets: Vec<RelationTriplet>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SggEvalResult {
    /// Micro recall: matched ground-truth triplets over all images, divided
    /// by the total ground-truth count.
    pub recall: f64,
    /// Unweighted mean of per-predicate recall over predicates that occur in
    /// the ground truth.
    pub mean_recall: f64,
    pub per_predicate_recall: BTreeMap<String, f64>,
    /// Mean count of distinct predicted triplets per ground-truth image.
    pub avg_tuples: f64,
    pub images_evaluated: usize,
}

fn dedup_triplets(triplets: &[RelationTriplet]) -> Vec<RelationTriplet> {
    let mut seen = BTreeSet::new();
    triplets.iter().filter(|t| seen.insert((*t).clone())).cloned().collect()
}

/// Evaluate predicted scene graphs against ground truth. Every prediction
/// image must exist in the ground truth; ground-truth images without
/// predictions simply contribute misses. Duplicate predicted triplets within
/// an image count once.
pub fn sgg_evaluate(
    preds: &[ImageTriplets],
    gts: &[ImageTriplets],
    config: &MetricsConfig,
) -> Result<SggEvalResult, MetricsError> {
    let mut gt_by_image: BTreeMap<&str, &ImageTriplets> = BTreeMap::new();
    for gt in gts {
        if gt_by_image.insert(gt.image_id.as_str(), gt).is_some() {
            return Err(MetricsError::DuplicateImage(gt.image_id.clone()));
        }
    }
    let mut pred_by_image: BTreeMap<&str, &ImageTriplets> = BTreeMap::new();
    for pred in preds {
        if !gt_by_image.contains_key(pred.image_id.as_str()) {
            return Err(MetricsError::UnknownImage(pred.image_id.clone()));
        }
        if pred_by_image.insert(pred.image_id.as_str(), pred).is_some() {
            return Err(MetricsError::DuplicateImage(pred.image_id.clone()));
        }
    }

    let mut matched_total = 0usize;
    let mut gt_total = 0usize;
    let mut pred_tuple_total = 0usize;
    let mut per_pred_gt: BTreeMap<String, usize> = BTreeMap::new();
    let mut per_pred_matched: BTreeMap<String, usize> = BTreeMap::new();

    for (image_id, gt) in &gt_by_image {
        let gt_triplets = dedup_triplets(&gt.triplets);
        gt_total += gt_triplets.len();
        for t in &gt_triplets {
            *per_pred_gt.entry(t.predicate.as_str().to_owned()).or_insert(0) += 1;
        }
        let pred_triplets = pred_by_image
            .get(image_id)
            .map(|p| dedup_triplets(&p.triplets))
            .unwrap_or_default();
        pred_tuple_total += pred_triplets.len();
        let pairs = match_triplets(&pred_triplets, &gt_triplets, config);
        matched_total += pairs.len();
        for (_, g) in pairs {
            *per_pred_matched
                .entry(gt_triplets[g].predicate.as_str().to_owned())
                .or_insert(0) += 1;
        }
    }

    let per_predicate_recall: BTreeMap<String, f64> = per_pred_gt
        .iter()
        .map(|(p, &n)| {
            let m = per_pred_matched.get(p).copied().unwrap_or(0);
            (p.clone(), m as f64 / n as f64)
        })
        .collect();
    let recall = if gt_total == 0 { 0.0 } else { matched_total as f64 / gt_total as f64 };
    let mean_recall = if per_predicate_recall.is_empty() {
        0.0
    } else {
        per_predicate_recall.values().sum::<f64>() / per_predicate_recall.len() as f64
    };
    let images_evaluated = gt_by_image.len();
    let avg_tuples = if images_evaluated == 0 {
        0.0
    } else {
        pred_tuple_total as f64 / images_evaluated as f64
    };
    Ok(SggEvalResult { recall, mean_recall, per_predicate_recall, avg_tuples, images_evaluated })
}

/// A grounded object handed to the model in a predicate-classification
/// prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObjectRef {
    pub tag: SemanticTag,
    #[serde(rename = "box")]
    pub bbox: NormBox,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PredClsQuery {
    pub image_id: String,
    pub subject: ObjectRef,
    pub object: ObjectRef,
    pub prompt_text: String,
}

pub fn predcls_prompt(subject: &SemanticTag, object: &SemanticTag) -> String {
    format!(
        "What is the relation between the {subject} and the {object}? Answer the question using a single word or phrase."
    )
}

/// All ordered pairs over the image's ground-truth objects, subject index
/// varying slowest: n objects yield n * (n - 1) queries.
pub fn predcls_queries(image_id: &str, objects: &[(SemanticTag, NormBox)]) -> Vec<PredClsQuery> {
    let mut out = Vec::with_capacity(objects.len().saturating_mul(objects.len().saturating_sub(1)));
    for (i, (s_tag, s_box)) in objects.iter().enumerate() {
        for (j, (o_tag, o_box)) in objects.iter().enumerate() {
            if i == j {
                continue;
            }
            out.push(PredClsQuery {
                image_id: image_id.to_owned(),
                subject: ObjectRef { tag: s_tag.clone(), bbox: *s_box },
                object: ObjectRef { tag: o_tag.clone(), bbox: *o_box },
                prompt_text: predcls_prompt(s_tag, o_tag),
            });
        }
    }
    out
}

/// Per-label scores for one queried pair. Keys are canonicalized like
/// semantic tags; when two raw labels collapse to the same key the larger
/// score wins. All scores must be finite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreVector(BTreeMap<String, f64>);

impl ScoreVector {
    pub fn new(raw: BTreeMap<String, f64>) -> Result<Self, MetricsError> {
        if raw.is_empty() {
            return Err(MetricsError::InvalidScore("score vector is empty".into()));
        }
        let mut scores: BTreeMap<String, f64> = BTreeMap::new();
        for (label, value) in raw {
            if !value.is_finite() {
                return Err(MetricsError::InvalidScore(format!(
                    "score for {label:?} is not finite"
                )));
            }
            let tag = SemanticTag::new(&label).map_err(|e| {
                MetricsError::InvalidScore(format!("label {label:?}: {e}"))
            })?;
            let key = tag.as_str().to_owned();
            match scores.get_mut(&key) {
                Some(existing) => *existing = existing.max(value),
                None => {
                    scores.insert(key, value);
                }
            }
        }
        Ok(ScoreVector(scores))
    }

    pub fn scores(&self) -> &BTreeMap<String, f64> {
        &self.0
    }
}

/// Scores returned for one predicate-classification query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredQuery {
    pub image_id: String,
    pub subject_box: NormBox,
    pub object_box: NormBox,
    pub scores: ScoreVector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredClsResult {
    /// R@K, averaged over images that have ground-truth relations.
    pub recall_at: BTreeMap<usize, f64>,
    /// mR@K: per-predicate recall pooled across images, averaged over
    /// predicates.
    pub mean_recall_at: BTreeMap<usize, f64>,
    pub images_evaluated: usize,
}

/// Rank every (pair, label) candidate by score within each image and measure
/// how much of the ground truth the top K covers. Boxes are the ground-truth
/// boxes themselves here, so matching is exact equality on both boxes plus
/// the label; no IoU threshold participates.
pub fn predcls_evaluate(
    scored: &[ScoredQuery],
    gts: &[ImageTriplets],
    ks: &[usize],
) -> Result<PredClsResult, MetricsError> {
    if ks.is_empty() || ks.iter().any(|&k| k == 0) {
        return Err(MetricsError::InvalidConfig("ranks must be positive and non-empty".into()));
    }
    let mut gt_by_image: BTreeMap<&str, &ImageTriplets> = BTreeMap::new();
    for gt in gts {
        if gt_by_image.insert(gt.image_id.as_str(), gt).is_some() {
            return Err(MetricsError::DuplicateImage(gt.image_id.clone()));
        }
    }
    type PairKey = (NormBox, NormBox);
    let mut scored_by_image: BTreeMap<&str, BTreeMap<PairKey, &ScoreVector>> = BTreeMap::new();
    for sq in scored {
        if !gt_by_image.contains_key(sq.image_id.as_str()) {
            return Err(MetricsError::UnknownImage(sq.image_id.clone()));
        }
        let pairs = scored_by_image.entry(sq.image_id.as_str()).or_default();
        if pairs.insert((sq.subject_box, sq.object_box), &sq.scores).is_some() {
            return Err(MetricsError::DuplicateQuery {
                image_id: sq.image_id.clone(),
                subject_box: sq.subject_box,
                object_box: sq.object_box,
            });
        }
    }

    let ks_sorted: BTreeSet<usize> = ks.iter().copied().collect();
    let mut per_image_recall: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut per_pred_gt: BTreeMap<String, usize> = BTreeMap::new();
    let mut per_pred_hit: BTreeMap<(usize, String), usize> = BTreeMap::new();
    let mut images_evaluated = 0usize;

    for (image_id, gt) in &gt_by_image {
        let gt_triplets = dedup_triplets(&gt.triplets);
        if gt_triplets.is_empty() {
            continue;
        }
        images_evaluated += 1;
        let pairs = scored_by_image.get(image_id);
        for t in &gt_triplets {
            let has_scores = pairs
                .map(|p| p.contains_key(&(t.subject_box, t.object_box)))
                .unwrap_or(false);
            if !has_scores {
                return Err(MetricsError::MissingScores {
                    image_id: (*image_id).to_owned(),
                    subject_box: t.subject_box,
                    object_box: t.object_box,
                });
            }
            *per_pred_gt.entry(t.predicate.as_str().to_owned()).or_insert(0) += 1;
        }

        // Flatten to candidates and rank. Ties break on the pair key and
        // label so the ranking is independent of input order.
        let mut candidates: Vec<(f64, PairKey, &str)> = Vec::new();
        for (pair, vector) in pairs.expect("checked above") {
            for (label, &score) in vector.scores() {
                candidates.push((score, *pair, label.as_str()));
            }
        }
        candidates.sort_by(|a, b| {
            b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)).then_with(|| a.2.cmp(b.2))
        });

        // rank_of[(pair, label)] = 1-based position in the candidate list.
        let mut rank_of: BTreeMap<(PairKey, &str), usize> = BTreeMap::new();
        for (idx, (_, pair, label)) in candidates.iter().enumerate() {
            rank_of.insert((*pair, label), idx + 1);
        }

        for &k in &ks_sorted {
            let mut hits = 0usize;
            for t in &gt_triplets {
                let key = ((t.subject_box, t.object_box), t.predicate.as_str());
                let hit = rank_of.get(&key).is_some_and(|&r| r <= k);
                if hit {
                    hits += 1;
                    *per_pred_hit.entry((k, t.predicate.as_str().to_owned())).or_insert(0) += 1;
                }
            }
            per_image_recall.entry(k).or_default().push(hits as f64 / gt_triplets.len() as f64);
        }
    }

    let mut recall_at = BTreeMap::new();
    let mut mean_recall_at = BTreeMap::new();
    for &k in &ks_sorted {
        let rs = per_image_recall.get(&k).map(Vec::as_slice).unwrap_or(&[]);
        let r = if rs.is_empty() { 0.0 } else { rs.iter().sum::<f64>() / rs.len() as f64 };
        recall_at.insert(k, r);
        let mr = if per_pred_gt.is_empty() {
            0.0
        } else {
            per_pred_gt
                .iter()
                .map(|(p, &n)| {
                    per_pred_hit.get(&(k, p.clone())).copied().unwrap_or(0) as f64 / n as f64
                })
                .sum::<f64>()
                / per_pred_gt.len() as f64
        };
        mean_recall_at.insert(k, mr);
    }
    Ok(PredClsResult { recall_at, mean_recall_at, images_evaluated })
}
