//! Circular relation-probing benchmark: item generation from relation
//! annotations, circular expansion, and consistency scoring.
//!
//! Items are four-way single-choice questions over four splits. Existence
//! asks which object is present; Subject, Predicate, and Object each mask one
//! slot of an annotated (subject, predicate, object) triplet. An item counts
//! as correct only when the model answers every circular rotation of its
//! choices correctly.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{ImageSize, NormBox, SemanticTag};

pub const CHOICES_PER_ITEM: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrpeError {
    #[error("annotation corpus is empty")]
    EmptyCorpus,
    #[error("invalid annotation for image {image_id}: {reason}")]
    InvalidAnnotation { image_id: String, reason: String },
    #[error("invalid benchmark item {item_id}: {reason}")]
    InvalidItem { item_id: String, reason: String },
    #[error("duplicate item id {0}")]
    DuplicateItem(String),
    #[error("variant references unknown item {0}")]
    UnknownItem(String),
    #[error("invalid variant for item {item_id}: {reason}")]
    InvalidVariant { item_id: String, reason: String },
    #[error("item {0} does not have exactly one variant per rotation")]
    IncompleteVariants(String),
    #[error("duplicate response for item {item_id} rotation {rotation}")]
    DuplicateResponse { item_id: String, rotation: usize },
    #[error("response targets unknown item or rotation: {item_id} rotation {rotation}")]
    UnknownResponse { item_id: String, rotation: usize },
    #[error("invalid response for item {item_id}: {reason}")]
    InvalidResponse { item_id: String, reason: String },
    #[error("missing responses for (item, rotation) pairs: {0:?}")]
    MissingResponse(Vec<(String, usize)>),
}

/// One annotated object: a grounded, tagged region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnnotatedObject {
    pub id: u32,
    pub tag: SemanticTag,
    #[serde(rename = "box")]
    pub bbox: NormBox,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnnotatedRelation {
    pub subject_id: u32,
    pub predicate: SemanticTag,
    pub object_id: u32,
}

/// Ground-truth annotations for one image. Construction validates that
/// object ids are unique, relation endpoints resolve, and no relation
/// relates an object to an identically tagged, identically boxed object
/// (which nothing downstream can represent).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRecord {
    image_id: String,
    size: ImageSize,
    objects: Vec<AnnotatedObject>,
    relations: Vec<AnnotatedRelation>,
}

impl AnnotationRecord {
    pub fn new(
        image_id: String,
        size: ImageSize,
        objects: Vec<AnnotatedObject>,
        relations: Vec<AnnotatedRelation>,
    ) -> Result<Self, CrpeError> {
        let invalid = |reason: String| CrpeError::InvalidAnnotation {
            image_id: image_id.clone(),
            reason,
        };
        let mut by_id: HashMap<u32, &AnnotatedObject> = HashMap::new();
        for obj in &objects {
            if by_id.insert(obj.id, obj).is_some() {
                return Err(invalid(format!("duplicate object id {}", obj.id)));
            }
        }
        for rel in &relations {
            let subject = by_id
                .get(&rel.subject_id)
                .ok_or_else(|| invalid(format!("relation references missing object {}", rel.subject_id)))?;
            let object = by_id
                .get(&rel.object_id)
                .ok_or_else(|| invalid(format!("relation references missing object {}", rel.object_id)))?;
            if subject.tag == object.tag && subject.bbox == object.bbox {
                return Err(invalid(format!(
                    "relation {} -{}-> {} relates an object to itself",
                    rel.subject_id, rel.predicate, rel.object_id
                )));
            }
        }
        Ok(AnnotationRecord { image_id, size, objects, relations })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn size(&self) -> ImageSize {
        self.size
    }

    pub fn objects(&self) -> &[AnnotatedObject] {
        &self.objects
    }

    pub fn relations(&self) -> &[AnnotatedRelation] {
        &self.relations
    }

    pub fn object_by_id(&self, id: u32) -> Option<&AnnotatedObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Distinct object tags, sorted.
    pub fn present_tags(&self) -> BTreeSet<String> {
        self.objects.iter().map(|o| o.tag.as_str().to_owned()).collect()
    }
}

/// Co-occurrence counts over a corpus of relation annotations, at the
/// semantic-tag level. Conditionals like P(p|s) are raw count ratios.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusStats {
    c_ps: BTreeMap<(String, String), u64>,
    c_po: BTreeMap<(String, String), u64>,
    c_pso: BTreeMap<(String, String, String), u64>,
    c_so: BTreeMap<(String, String), u64>,
    c_s: BTreeMap<String, u64>,
    c_o: BTreeMap<String, u64>,
    c_p: BTreeMap<String, u64>,
    relation_count: u64,
    tag_vocabulary: BTreeSet<String>,
    predicate_vocabulary: BTreeSet<String>,
}

impl CorpusStats {
    pub fn relation_count(&self) -> u64 {
        self.relation_count
    }

    /// All object tags seen anywhere in the corpus, relation or not.
    pub fn tag_vocabulary(&self) -> &BTreeSet<String> {
        &self.tag_vocabulary
    }

    pub fn predicate_vocabulary(&self) -> &BTreeSet<String> {
        &self.predicate_vocabulary
    }

    fn count(map: &BTreeMap<(String, String), u64>, a: &str, b: &str) -> u64 {
        map.get(&(a.to_owned(), b.to_owned())).copied().unwrap_or(0)
    }

    pub fn c_subject(&self, s: &str) -> u64 {
        self.c_s.get(s).copied().unwrap_or(0)
    }

    pub fn c_pair(&self, s: &str, o: &str) -> u64 {
        Self::count(&self.c_so, s, o)
    }

    /// P(p|s) = c(p,s) / c(s); zero when s never appears as a subject.
    pub fn p_given_subject(&self, p: &str, s: &str) -> f64 {
        let denom = self.c_subject(s);
        if denom == 0 {
            return 0.0;
        }
        Self::count(&self.c_ps, p, s) as f64 / denom as f64
    }

    pub fn p_given_object(&self, p: &str, o: &str) -> f64 {
        let denom = self.c_o.get(o).copied().unwrap_or(0);
        if denom == 0 {
            return 0.0;
        }
        Self::count(&self.c_po, p, o) as f64 / denom as f64
    }

    /// Add-one smoothed P(p|s,o) over the predicate vocabulary. Used only
    /// for ranking rare triplets, so unseen ones order deterministically
    /// below rare ones; the feasibility tests above stay unsmoothed.
    pub fn p_given_pair_smoothed(&self, p: &str, s: &str, o: &str) -> f64 {
        let c_pso = self
            .c_pso
            .get(&(p.to_owned(), s.to_owned(), o.to_owned()))
            .copied()
            .unwrap_or(0);
        let denom = self.c_pair(s, o) + self.predicate_vocabulary.len() as u64;
        (c_pso + 1) as f64 / denom as f64
    }

    /// Predicates p with P(p|s) > 0 and P(p|o) > 0, sorted.
    pub fn feasible_predicates(&self, s: &str, o: &str) -> Vec<String> {
        self.predicate_vocabulary
            .iter()
            .filter(|p| Self::count(&self.c_ps, p, s) > 0 && Self::count(&self.c_po, p, o) > 0)
            .cloned()
            .collect()
    }
}

/// Tally tag-level co-occurrence counts over every relation occurrence.
pub fn corpus_stats(annotations: &[AnnotationRecord]) -> Result<CorpusStats, CrpeError> {
    if annotations.is_empty() {
        return Err(CrpeError::EmptyCorpus);
    }
    let mut stats = CorpusStats::default();
    for record in annotations {
        for obj in record.objects() {
            stats.tag_vocabulary.insert(obj.tag.as_str().to_owned());
        }
        for rel in record.relations() {
            let s = record.object_by_id(rel.subject_id).expect("validated").tag.as_str().to_owned();
            let o = record.object_by_id(rel.object_id).expect("validated").tag.as_str().to_owned();
            let p = rel.predicate.as_str().to_owned();
            *stats.c_ps.entry((p.clone(), s.clone())).or_insert(0) += 1;
            *stats.c_po.entry((p.clone(), o.clone())).or_insert(0) += 1;
            *stats.c_pso.entry((p.clone(), s.clone(), o.clone())).or_insert(0) += 1;
            *stats.c_so.entry((s.clone(), o.clone())).or_insert(0) += 1;
            *stats.c_s.entry(s).or_insert(0) += 1;
            *stats.c_o.entry(o).or_insert(0) += 1;
            *stats.c_p.entry(p.clone()).or_insert(0) += 1;
            stats.predicate_vocabulary.insert(p);
            stats.relation_count += 1;
        }
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Existence,
    Subject,
    Predicate,
    Object,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Existence, Split::Subject, Split::Predicate, Split::Object];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Existence => "existence",
            Split::Subject => "subject",
            Split::Predicate => "predicate",
            Split::Object => "object",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One single-choice question: four pairwise-distinct choices, one correct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BenchmarkItem {
    pub item_id: String,
    pub split: Split,
    pub image_id: String,
    pub question: String,
    pub choices: [String; 4],
    pub answer_index: usize,
    /// Set on items probing deliberately rare relations; the generator here
    /// always produces normal items.
    pub abnormal: bool,
}

impl BenchmarkItem {
    pub fn new(
        item_id: String,
        split: Split,
        image_id: String,
        question: String,
        choices: [String; 4],
        answer_index: usize,
        abnormal: bool,
    ) -> Result<Self, CrpeError> {
        let invalid = |reason: String| CrpeError::InvalidItem { item_id: item_id.clone(), reason };
        if question.trim().is_empty() {
            return Err(invalid("question is empty".into()));
        }
        if answer_index >= CHOICES_PER_ITEM {
            return Err(invalid(format!("answer_index {answer_index} out of range")));
        }
        for (i, c) in choices.iter().enumerate() {
            if c.is_empty() {
                return Err(invalid(format!("choice {i} is empty")));
            }
            if choices[..i].contains(c) {
                return Err(invalid(format!("choice {c:?} appears more than once")));
            }
        }
        Ok(BenchmarkItem { item_id, split, image_id, question, choices, answer_index, abnormal })
    }

    pub fn correct_answer(&self) -> &str {
        &self.choices[self.answer_index]
    }
}

/// Rotation `k` of an item's choices. `choices[i]` holds the base choice
/// `(i + 4 - k) % 4`, i.e. every choice moves `k` positions to the right, so
/// the correct string lands at `(base answer + k) % 4`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CircularVariant {
    pub item_id: String,
    pub rotation: usize,
    pub choices: [String; 4],
    pub answer_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResponseRecord {
    pub item_id: String,
    pub rotation: usize,
    pub chosen_index: usize,
}

impl ResponseRecord {
    pub fn new(item_id: String, rotation: usize, chosen_index: usize) -> Result<Self, CrpeError> {
        if rotation >= CHOICES_PER_ITEM || chosen_index >= CHOICES_PER_ITEM {
            return Err(CrpeError::InvalidResponse {
                item_id,
                reason: format!(
                    "rotation {rotation} and chosen_index {chosen_index} must be < {CHOICES_PER_ITEM}"
                ),
            });
        }
        Ok(ResponseRecord { item_id, rotation, chosen_index })
    }
}

pub fn circular_expand(item: &BenchmarkItem) -> Vec<CircularVariant> {
    (0..CHOICES_PER_ITEM)
        .map(|k| {
            let mut choices: [String; 4] = Default::default();
            for (i, slot) in choices.iter_mut().enumerate() {
                *slot = item.choices[(i + CHOICES_PER_ITEM - k) % CHOICES_PER_ITEM].clone();
            }
            CircularVariant {
                item_id: item.item_id.clone(),
                rotation: k,
                choices,
                answer_index: (item.answer_index + k) % CHOICES_PER_ITEM,
            }
        })
        .collect()
}

/// Generation knobs beyond the seed. `per_image_cap` bounds how many
/// relations per image are expanded into items (per relation split); the
/// source procedure does not state a bound, so none is claimed by default.
#[derive(Debug, Clone, Default)]
pub struct GenConfig {
    pub per_image_cap: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// Subject and object carry the same tag, so the question would be
    /// ambiguous within the image.
    SharedTag,
    /// Fewer than 3 valid negatives exist for the split's constraint.
    InsufficientNegatives,
    /// Existence needs at least one annotated object.
    NoObjects,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkipEntry {
    pub image_id: String,
    /// None when the relation is ineligible for all three relation splits.
    pub split: Option<Split>,
    pub context: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GenerationOutcome {
    pub items: Vec<BenchmarkItem>,
    pub skipped: Vec<SkipEntry>,
}

/// FNV-1a, 64-bit. Stable across platforms and releases; used only to spread
/// image ids into rng seeds.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

/// Every image draws from its own stream derived from (seed, image_id), so
/// generation order and parallelism cannot change any image's items.
pub fn image_rng(seed: u64, image_id: &str) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a64(image_id.as_bytes()).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn shuffle<T>(rng: &mut ChaCha8Rng, v: &mut [T]) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

/// First `k` elements of a uniform random permutation of `pool`.
fn sample_distinct(rng: &mut ChaCha8Rng, pool: &[String], k: usize) -> Vec<String> {
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    for i in 0..k {
        let j = rng.random_range(i..idx.len());
        idx.swap(i, j);
    }
    idx[..k].iter().map(|&i| pool[i].clone()).collect()
}

/// Generate this image's benchmark items. Existence gets one item; every
/// eligible relation yields up to one item per relation split. Negatives per
/// split: Existence draws from vocabulary tags absent from the image;
/// Subject and Object draw from other tags present in the image, excluding
/// any tag that would make the question ambiguous (a tag the image also
/// annotates in the masked slot of the same predicate/endpoint); Predicate
/// draws from predicates with P(p|s) > 0 and P(p|o) > 0, excluding
/// predicates annotated between that tag pair in the image.
pub fn generate_items(
    ann: &AnnotationRecord,
    stats: &CorpusStats,
    seed: u64,
    cfg: &GenConfig,
) -> GenerationOutcome {
    let mut rng = image_rng(seed, ann.image_id());
    let mut out = GenerationOutcome::default();
    let image_id = ann.image_id().to_owned();
    let mut counters: BTreeMap<Split, usize> = BTreeMap::new();

    let present: Vec<String> = ann.present_tags().into_iter().collect();

    // Tag-level view of this image's relations, for ambiguity exclusions.
    let tag_relations: BTreeSet<(String, String, String)> = ann
        .relations()
        .iter()
        .map(|rel| {
            let s = ann.object_by_id(rel.subject_id).expect("validated");
            let o = ann.object_by_id(rel.object_id).expect("validated");
            (
                s.tag.as_str().to_owned(),
                rel.predicate.as_str().to_owned(),
                o.tag.as_str().to_owned(),
            )
        })
        .collect();

    let next_item = |split: Split, counters: &mut BTreeMap<Split, usize>| -> String {
        let n = counters.entry(split).or_insert(0);
        let id = format!("{image_id}/{split}/{n}");
        *n += 1;
        id
    };

    // Existence: one item per image.
    if present.is_empty() {
        out.skipped.push(SkipEntry {
            image_id: image_id.clone(),
            split: Some(Split::Existence),
            context: "existence".into(),
            reason: SkipReason::NoObjects,
        });
    } else {
        let absent: Vec<String> = stats
            .tag_vocabulary()
            .iter()
            .filter(|t| !present.contains(t))
            .cloned()
            .collect();
        if absent.len() < 3 {
            out.skipped.push(SkipEntry {
                image_id: image_id.clone(),
                split: Some(Split::Existence),
                context: "existence".into(),
                reason: SkipReason::InsufficientNegatives,
            });
        } else {
            let correct = present[rng.random_range(0..present.len())].clone();
            let negatives = sample_distinct(&mut rng, &absent, 3);
            let item_id = next_item(Split::Existence, &mut counters);
            out.items.push(finish_item(
                &mut rng,
                item_id,
                Split::Existence,
                &image_id,
                "Which of the following objects exists in the images?".to_owned(),
                correct,
                negatives,
            ));
        }
    }

    let cap = cfg.per_image_cap.unwrap_or(usize::MAX);
    for rel in ann.relations() {
        let s = ann.object_by_id(rel.subject_id).expect("validated").tag.as_str().to_owned();
        let o = ann.object_by_id(rel.object_id).expect("validated").tag.as_str().to_owned();
        let p = rel.predicate.as_str().to_owned();
        let context = format!("({s}, {p}, {o})");

        if s == o {
            out.skipped.push(SkipEntry {
                image_id: image_id.clone(),
                split: None,
                context,
                reason: SkipReason::SharedTag,
            });
            continue;
        }

        // Subject: which tag is <predicate> the <object>?
        if counters.get(&Split::Subject).copied().unwrap_or(0) < cap {
            let pool: Vec<String> = present
                .iter()
                .filter(|t| **t != s)
                .filter(|t| !tag_relations.contains(&((*t).clone(), p.clone(), o.clone())))
                .cloned()
                .collect();
            if pool.len() < 3 {
                out.skipped.push(SkipEntry {
                    image_id: image_id.clone(),
                    split: Some(Split::Subject),
                    context: context.clone(),
                    reason: SkipReason::InsufficientNegatives,
                });
            } else {
                let negatives = sample_distinct(&mut rng, &pool, 3);
                let item_id = next_item(Split::Subject, &mut counters);
                out.items.push(finish_item(
                    &mut rng,
                    item_id,
                    Split::Subject,
                    &image_id,
                    format!("What is {p} the {o}?"),
                    s.clone(),
                    negatives,
                ));
            }
        }

        // Predicate: what relation holds between <subject> and <object>?
        if counters.get(&Split::Predicate).copied().unwrap_or(0) < cap {
            let pool: Vec<String> = stats
                .feasible_predicates(&s, &o)
                .into_iter()
                .filter(|q| !tag_relations.contains(&(s.clone(), q.clone(), o.clone())))
                .collect();
            if pool.len() < 3 {
                out.skipped.push(SkipEntry {
                    image_id: image_id.clone(),
                    split: Some(Split::Predicate),
                    context: context.clone(),
                    reason: SkipReason::InsufficientNegatives,
                });
            } else {
                let negatives = sample_distinct(&mut rng, &pool, 3);
                let item_id = next_item(Split::Predicate, &mut counters);
                out.items.push(finish_item(
                    &mut rng,
                    item_id,
                    Split::Predicate,
                    &image_id,
                    format!("What is the relation between {s} and {o}?"),
                    p.clone(),
                    negatives,
                ));
            }
        }

        // Object: the <subject> is <predicate> which tag?
        if counters.get(&Split::Object).copied().unwrap_or(0) < cap {
            let pool: Vec<String> = present
                .iter()
                .filter(|t| **t != o)
                .filter(|t| !tag_relations.contains(&(s.clone(), p.clone(), (*t).clone())))
                .cloned()
                .collect();
            if pool.len() < 3 {
                out.skipped.push(SkipEntry {
                    image_id: image_id.clone(),
                    split: Some(Split::Object),
                    context: context.clone(),
                    reason: SkipReason::InsufficientNegatives,
                });
            } else {
                let negatives = sample_distinct(&mut rng, &pool, 3);
                let item_id = next_item(Split::Object, &mut counters);
                out.items.push(finish_item(
                    &mut rng,
                    item_id,
                    Split::Object,
                    &image_id,
                    format!("What is the {s} {p}?"),
                    o.clone(),
                    negatives,
                ));
            }
        }
    }

    out
}

fn finish_item(
    rng: &mut ChaCha8Rng,
    item_id: String,
    split: Split,
    image_id: &str,
    question: String,
    correct: String,
    negatives: Vec<String>,
) -> BenchmarkItem {
    debug_assert_eq!(negatives.len(), 3);
    let mut choices = vec![correct.clone()];
    choices.extend(negatives);
    shuffle(rng, &mut choices);
    let answer_index = choices.iter().position(|c| *c == correct).expect("correct is present");
    let choices: [String; 4] = choices.try_into().expect("exactly four choices");
    BenchmarkItem::new(
        item_id,
        split,
        image_id.to_owned(),
        question,
        choices,
        answer_index,
        false,
    )
    .expect("generated choices are distinct")
}

/// Candidate abnormal triplet: a pair that co-occurs but rarely (or never)
/// under this predicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbnormalCandidate {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    /// Smoothed P(p|s,o) the ranking sorted by.
    pub probability: f64,
}

/// Rank every (s, p, o) with c(s,o) > 0 by ascending smoothed P(p|s,o), ties
/// lexicographic, and return the first `k`. These seed downstream synthesis
/// of implausible scenes; nothing here claims they are filtered for sense.
pub fn select_abnormal(stats: &CorpusStats, k: usize) -> Vec<AbnormalCandidate> {
    let mut candidates: Vec<AbnormalCandidate> = Vec::new();
    for ((s, o), _count) in &stats.c_so {
        for p in stats.predicate_vocabulary() {
            candidates.push(AbnormalCandidate {
                subject: s.clone(),
                predicate: p.clone(),
                object: o.clone(),
                probability: stats.p_given_pair_smoothed(p, s, o),
            });
        }
    }
    candidates.sort_by(|a, b| {
        a.probability
            .total_cmp(&b.probability)
            .then_with(|| a.subject.cmp(&b.subject))
            .then_with(|| a.predicate.cmp(&b.predicate))
            .then_with(|| a.object.cmp(&b.object))
    });
    candidates.truncate(k);
    candidates
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitTally {
    pub correct: usize,
    pub total: usize,
    /// 100 × correct / total; 0 when the split is empty.
    pub accuracy: f64,
}

impl SplitTally {
    fn new(correct: usize, total: usize) -> Self {
        let accuracy = if total == 0 { 0.0 } else { 100.0 * correct as f64 / total as f64 };
        SplitTally { correct, total, accuracy }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrpeScores {
    pub existence: SplitTally,
    pub subject: SplitTally,
    pub predicate: SplitTally,
    pub object: SplitTally,
    /// Mean of the subject, predicate, and object accuracies. Existence is
    /// reported but kept out of the headline number.
    pub overall: f64,
}

/// The headline score: unweighted mean of the three relation splits.
pub fn overall_score(subject: f64, predicate: f64, object: f64) -> f64 {
    (subject + predicate + object) / 3.0
}

/// Score responses under circular consistency: an item is correct only if
/// every one of its rotations got the correct answer. Every (item, rotation)
/// pair must be answered; gaps are an error listing each missing pair.
pub fn score(
    items: &[BenchmarkItem],
    variants: &[CircularVariant],
    responses: &[ResponseRecord],
) -> Result<CrpeScores, CrpeError> {
    let mut by_id: BTreeMap<&str, &BenchmarkItem> = BTreeMap::new();
    for item in items {
        if by_id.insert(item.item_id.as_str(), item).is_some() {
            return Err(CrpeError::DuplicateItem(item.item_id.clone()));
        }
    }

    // Validate variants against their item's own expansion.
    let mut seen_rotations: BTreeMap<&str, HashSet<usize>> = BTreeMap::new();
    let mut answer_key: HashMap<(&str, usize), usize> = HashMap::new();
    for variant in variants {
        let item = by_id
            .get(variant.item_id.as_str())
            .ok_or_else(|| CrpeError::UnknownItem(variant.item_id.clone()))?;
        if variant.rotation >= CHOICES_PER_ITEM {
            return Err(CrpeError::InvalidVariant {
                item_id: variant.item_id.clone(),
                reason: format!("rotation {} out of range", variant.rotation),
            });
        }
        let expected = &circular_expand(item)[variant.rotation];
        if variant != expected {
            return Err(CrpeError::InvalidVariant {
                item_id: variant.item_id.clone(),
                reason: format!("rotation {} does not match the item's expansion", variant.rotation),
            });
        }
        if !seen_rotations
            .entry(variant.item_id.as_str())
            .or_default()
            .insert(variant.rotation)
        {
            return Err(CrpeError::InvalidVariant {
                item_id: variant.item_id.clone(),
                reason: format!("rotation {} appears twice", variant.rotation),
            });
        }
        answer_key.insert((variant.item_id.as_str(), variant.rotation), variant.answer_index);
    }
    for item in items {
        let n = seen_rotations.get(item.item_id.as_str()).map(|s| s.len()).unwrap_or(0);
        if n != CHOICES_PER_ITEM {
            return Err(CrpeError::IncompleteVariants(item.item_id.clone()));
        }
    }

    let mut chosen: HashMap<(&str, usize), usize> = HashMap::new();
    for resp in responses {
        if resp.rotation >= CHOICES_PER_ITEM || resp.chosen_index >= CHOICES_PER_ITEM {
            return Err(CrpeError::InvalidResponse {
                item_id: resp.item_id.clone(),
                reason: format!(
                    "rotation {} / chosen_index {} out of range",
                    resp.rotation, resp.chosen_index
                ),
            });
        }
        if !answer_key.contains_key(&(resp.item_id.as_str(), resp.rotation)) {
            return Err(CrpeError::UnknownResponse {
                item_id: resp.item_id.clone(),
                rotation: resp.rotation,
            });
        }
        if chosen.insert((resp.item_id.as_str(), resp.rotation), resp.chosen_index).is_some() {
            return Err(CrpeError::DuplicateResponse {
                item_id: resp.item_id.clone(),
                rotation: resp.rotation,
            });
        }
    }

    let mut missing: Vec<(String, usize)> = Vec::new();
    for item in items {
        for k in 0..CHOICES_PER_ITEM {
            if !chosen.contains_key(&(item.item_id.as_str(), k)) {
                missing.push((item.item_id.clone(), k));
            }
        }
    }
    if !missing.is_empty() {
        return Err(CrpeError::MissingResponse(missing));
    }

    let mut tallies: BTreeMap<Split, (usize, usize)> = BTreeMap::new();
    for item in items {
        let correct = (0..CHOICES_PER_ITEM).all(|k| {
            chosen[&(item.item_id.as_str(), k)] == answer_key[&(item.item_id.as_str(), k)]
        });
        let entry = tallies.entry(item.split).or_insert((0, 0));
        entry.1 += 1;
        if correct {
            entry.0 += 1;
        }
    }
    let tally = |split: Split| {
        let (c, t) = tallies.get(&split).copied().unwrap_or((0, 0));
        SplitTally::new(c, t)
    };
    let subject = tally(Split::Subject);
    let predicate = tally(Split::Predicate);
    let object = tally(Split::Object);
    Ok(CrpeScores {
        existence: tally(Split::Existence),
        overall: overall_score(subject.accuracy, predicate.accuracy, object.accuracy),
        subject,
        predicate,
        object,
    })
}
