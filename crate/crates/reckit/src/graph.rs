//! Scene-graph conversion: resolve box coordinates to tags, broadcast
//! predicate box groups into pairs, and emit nodes and edges.
//!
//! Boxes act as exact keys throughout. A `<pred>` box that matches a `<ref>`
//! box picks up its tag; one that matches nothing becomes an `Unknown` node.
//! Tolerance for near-miss coordinates belongs to metrics, not here.

use std::collections::{HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::crpe::AnnotationRecord;
use crate::parser::{BoxGroup, RecDocument, RecSegment};
use crate::types::{NormBox, RelationTriplet, SemanticTag};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("cannot pair {subject_len} subject boxes with {object_len} object boxes")]
    BroadcastMismatch { subject_len: usize, object_len: usize },
    /// A hand-built document can carry a whitespace-only label; parsed
    /// documents never do.
    #[error("segment label {0:?} canonicalizes to nothing")]
    InvalidLabel(String),
}

/// Scene-graph node. The box is the node's identity within a graph; the tag
/// is [`SemanticTag::unknown`] when no `<ref>` named the box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Node {
    pub id: usize,
    pub tag: SemanticTag,
    #[serde(rename = "box")]
    pub bbox: NormBox,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub subject_id: usize,
    pub predicate: SemanticTag,
    pub object_id: usize,
}

/// Directed multigraph over grounded objects. Invariants: node ids are dense
/// and index `nodes`; boxes are unique across nodes; edges reference valid
/// ids; no duplicate (subject_id, predicate, object_id); no self-loops.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct SceneGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TagCollision {
    #[serde(rename = "box")]
    pub bbox: NormBox,
    pub kept: SemanticTag,
    pub ignored: SemanticTag,
}

/// Map from exact box coordinates to the tag of the earliest `<ref>` mention.
#[derive(Debug, Clone, Default)]
pub struct TagIndex {
    entries: Vec<(NormBox, SemanticTag)>,
    by_box: HashMap<NormBox, usize>,
    collisions: Vec<TagCollision>,
}

impl TagIndex {
    pub fn get(&self, bbox: &NormBox) -> Option<&SemanticTag> {
        self.by_box.get(bbox).map(|&i| &self.entries[i].1)
    }

    /// Entries in first-mention order.
    pub fn entries(&self) -> &[(NormBox, SemanticTag)] {
        &self.entries
    }

    pub fn collisions(&self) -> &[TagCollision] {
        &self.collisions
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn insert(&mut self, bbox: NormBox, tag: SemanticTag) {
        match self.by_box.get(&bbox) {
            None => {
                self.by_box.insert(bbox, self.entries.len());
                self.entries.push((bbox, tag));
            }
            Some(&i) => {
                let kept = &self.entries[i].1;
                if *kept != tag {
                    self.collisions.push(TagCollision { bbox, kept: kept.clone(), ignored: tag });
                }
            }
        }
    }
}

/// Index every `<ref>` box to its canonicalized label. On collision the
/// earliest mention wins and the loser is recorded. Refs whose label cannot
/// canonicalize (hand-built documents only) contribute nothing here; strict
/// conversion rejects them separately.
pub fn build_tag_index(doc: &RecDocument) -> TagIndex {
    let mut index = TagIndex::default();
    for seg in doc.segments() {
        if let RecSegment::Ref { label, group } = seg {
            let Ok(tag) = SemanticTag::new(label) else { continue };
            for bbox in group.boxes() {
                index.insert(*bbox, tag.clone());
            }
        }
    }
    index
}

/// Pair subject boxes with object boxes: equal lengths zip in order, a
/// length-1 group replicates against the other side.
pub fn broadcast_groups(
    subject: &BoxGroup,
    object: &BoxGroup,
) -> Result<Vec<(NormBox, NormBox)>, GraphError> {
    let s = subject.boxes();
    let o = object.boxes();
    let pairs = if s.len() == o.len() {
        s.iter().copied().zip(o.iter().copied()).collect()
    } else if s.len() == 1 {
        o.iter().map(|&ob| (s[0], ob)).collect()
    } else if o.len() == 1 {
        s.iter().map(|&sb| (sb, o[0])).collect()
    } else {
        return Err(GraphError::BroadcastMismatch {
            subject_len: s.len(),
            object_len: o.len(),
        });
    };
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphWarning {
    /// Two refs disagreed on one box; the earlier tag stands.
    TagCollision {
        #[serde(rename = "box")]
        bbox: NormBox,
        kept: SemanticTag,
        ignored: SemanticTag,
    },
    /// A pred box matched no ref; its node carries the Unknown tag.
    UnknownBox {
        #[serde(rename = "box")]
        bbox: NormBox,
    },
    SelfLoopDropped {
        #[serde(rename = "box")]
        bbox: NormBox,
        predicate: SemanticTag,
    },
    DuplicateEdgeDropped {
        subject_id: usize,
        predicate: SemanticTag,
        object_id: usize,
    },
    /// Lossy conversion only: the segment was left out of the graph.
    SegmentSkipped { label: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneGraphBuild {
    pub graph: SceneGraph,
    pub warnings: Vec<GraphWarning>,
}

/// Convert a document into a scene graph. Node ids follow first appearance
/// of each distinct box in segment order (within a pred: subject group, then
/// object group). Fails on a broadcast mismatch or an uncanonicalizable
/// label.
pub fn to_scene_graph(doc: &RecDocument) -> Result<SceneGraphBuild, GraphError> {
    convert(doc, false)
}

/// Like [`to_scene_graph`] but total: segments that would fail are skipped
/// with a [`GraphWarning::SegmentSkipped`]. Meant for model output.
pub fn to_scene_graph_lossy(doc: &RecDocument) -> SceneGraphBuild {
    convert(doc, true).expect("lossy conversion skips all failures")
}

fn convert(doc: &RecDocument, lossy: bool) -> Result<SceneGraphBuild, GraphError> {
    let index = build_tag_index(doc);
    let mut warnings: Vec<GraphWarning> = index
        .collisions()
        .iter()
        .map(|c| GraphWarning::TagCollision {
            bbox: c.bbox,
            kept: c.kept.clone(),
            ignored: c.ignored.clone(),
        })
        .collect();

    let mut nodes: Vec<Node> = Vec::new();
    let mut id_by_box: HashMap<NormBox, usize> = HashMap::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut edge_keys: HashSet<(usize, SemanticTag, usize)> = HashSet::new();

    let mut ensure_node = |bbox: NormBox,
                           nodes: &mut Vec<Node>,
                           warnings: &mut Vec<GraphWarning>|
     -> usize {
        if let Some(&id) = id_by_box.get(&bbox) {
            return id;
        }
        let tag = match index.get(&bbox) {
            Some(tag) => tag.clone(),
            None => {
                warnings.push(GraphWarning::UnknownBox { bbox });
                SemanticTag::unknown()
            }
        };
        let id = nodes.len();
        nodes.push(Node { id, tag, bbox });
        id_by_box.insert(bbox, id);
        id
    };

    for seg in doc.segments() {
        match seg {
            RecSegment::Text { .. } => {}
            RecSegment::Ref { label, group } => {
                if SemanticTag::new(label).is_err() {
                    if lossy {
                        warnings.push(GraphWarning::SegmentSkipped {
                            label: label.clone(),
                            reason: "label canonicalizes to nothing".into(),
                        });
                        continue;
                    }
                    return Err(GraphError::InvalidLabel(label.clone()));
                }
                for &bbox in group.boxes() {
                    ensure_node(bbox, &mut nodes, &mut warnings);
                }
            }
            RecSegment::Pred { label, subject, object } => {
                let predicate = match SemanticTag::new(label) {
                    Ok(tag) => tag,
                    Err(_) => {
                        if lossy {
                            warnings.push(GraphWarning::SegmentSkipped {
                                label: label.clone(),
                                reason: "label canonicalizes to nothing".into(),
                            });
                            continue;
                        }
                        return Err(GraphError::InvalidLabel(label.clone()));
                    }
                };
                let pairs = match broadcast_groups(subject, object) {
                    Ok(pairs) => pairs,
                    Err(e) => {
                        if lossy {
                            warnings.push(GraphWarning::SegmentSkipped {
                                label: label.clone(),
                                reason: e.to_string(),
                            });
                            continue;
                        }
                        return Err(e);
                    }
                };
                for &bbox in subject.boxes().iter().chain(object.boxes()) {
                    ensure_node(bbox, &mut nodes, &mut warnings);
                }
                for (sb, ob) in pairs {
                    let sid = ensure_node(sb, &mut nodes, &mut warnings);
                    let oid = ensure_node(ob, &mut nodes, &mut warnings);
                    if sid == oid {
                        warnings.push(GraphWarning::SelfLoopDropped {
                            bbox: sb,
                            predicate: predicate.clone(),
                        });
                        continue;
                    }
                    if !edge_keys.insert((sid, predicate.clone(), oid)) {
                        warnings.push(GraphWarning::DuplicateEdgeDropped {
                            subject_id: sid,
                            predicate: predicate.clone(),
                            object_id: oid,
                        });
                        continue;
                    }
                    edges.push(Edge { subject_id: sid, predicate: predicate.clone(), object_id: oid });
                }
            }
        }
    }

    Ok(SceneGraphBuild { graph: SceneGraph { nodes, edges }, warnings })
}

/// One triplet per edge, in edge order. Distinct nodes always have distinct
/// boxes, so every edge is expressible.
pub fn to_triplets(graph: &SceneGraph) -> Vec<RelationTriplet> {
    graph
        .edges
        .iter()
        .map(|e| {
            let s = &graph.nodes[e.subject_id];
            let o = &graph.nodes[e.object_id];
            RelationTriplet::new(s.tag.clone(), s.bbox, e.predicate.clone(), o.tag.clone(), o.bbox)
                .expect("nodes with distinct ids have distinct boxes")
        })
        .collect()
}

/// Consistency check of a document against its source annotations.
///
/// Boxes compare by exact coordinates. Triplets compare by (subject box,
/// predicate, object box): the boxes are the identity of the endpoints, and
/// an annotation may word a tag differently ("person") than the document
/// ("people") without the mention being wrong.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub unmatched_box_count: usize,
    pub unmatched_triplet_count: usize,
    pub unmentioned_relation_count: usize,
    /// Document boxes with no exact match among annotated objects.
    pub unmatched_boxes: Vec<NormBox>,
    /// Document triplets absent from the annotated relations.
    pub unmatched_triplets: Vec<RelationTriplet>,
    /// Annotated relations the document never mentions.
    pub unmentioned_relations: Vec<RelationTriplet>,
}

impl ValidationReport {
    fn new(
        unmatched_boxes: Vec<NormBox>,
        unmatched_triplets: Vec<RelationTriplet>,
        unmentioned_relations: Vec<RelationTriplet>,
    ) -> Self {
        ValidationReport {
            unmatched_box_count: unmatched_boxes.len(),
            unmatched_triplet_count: unmatched_triplets.len(),
            unmentioned_relation_count: unmentioned_relations.len(),
            unmatched_boxes,
            unmatched_triplets,
            unmentioned_relations,
        }
    }

    /// True when every document box and triplet is backed by the
    /// annotations. Unmentioned relations do not count against the document.
    pub fn document_is_consistent(&self) -> bool {
        self.unmatched_boxes.is_empty() && self.unmatched_triplets.is_empty()
    }
}

pub fn validate_against_annotations(doc: &RecDocument, ann: &AnnotationRecord) -> ValidationReport {
    let ann_boxes: HashSet<NormBox> = ann.objects().iter().map(|o| o.bbox).collect();

    type RelKey = (NormBox, SemanticTag, NormBox);
    let mut ann_relations: Vec<(RelKey, RelationTriplet)> = Vec::new();
    for rel in ann.relations() {
        let subject = ann.object_by_id(rel.subject_id).expect("validated record");
        let object = ann.object_by_id(rel.object_id).expect("validated record");
        let triplet = RelationTriplet::new(
            subject.tag.clone(),
            subject.bbox,
            rel.predicate.clone(),
            object.tag.clone(),
            object.bbox,
        )
        .expect("validated record has no self-relations");
        ann_relations.push(((subject.bbox, rel.predicate.clone(), object.bbox), triplet));
    }
    let ann_keys: HashSet<&RelKey> = ann_relations.iter().map(|(k, _)| k).collect();

    // Every box the document mentions, ref or pred, in first-appearance order.
    let mut doc_boxes: Vec<NormBox> = Vec::new();
    let mut seen: HashSet<NormBox> = HashSet::new();
    let mut groups: Vec<&BoxGroup> = Vec::new();
    for seg in doc.segments() {
        match seg {
            RecSegment::Text { .. } => {}
            RecSegment::Ref { group, .. } => groups.push(group),
            RecSegment::Pred { subject, object, .. } => {
                groups.push(subject);
                groups.push(object);
            }
        }
    }
    for group in groups {
        for &bbox in group.boxes() {
            if seen.insert(bbox) {
                doc_boxes.push(bbox);
            }
        }
    }
    let unmatched_boxes: Vec<NormBox> =
        doc_boxes.into_iter().filter(|b| !ann_boxes.contains(b)).collect();

    // Triplets via lossy conversion: validation is total, so a pred that
    // cannot broadcast just contributes no triplets (its boxes were already
    // checked above).
    let doc_triplets = to_triplets(&to_scene_graph_lossy(doc).graph);
    let doc_keys: HashSet<RelKey> = doc_triplets
        .iter()
        .map(|t| (t.subject_box, t.predicate.clone(), t.object_box))
        .collect();
    let unmatched_triplets: Vec<RelationTriplet> = doc_triplets
        .iter()
        .filter(|t| !ann_keys.contains(&(t.subject_box, t.predicate.clone(), t.object_box)))
        .cloned()
        .collect();
    let unmentioned_relations: Vec<RelationTriplet> = ann_relations
        .into_iter()
        .filter(|(k, _)| !doc_keys.contains(k))
        .map(|(_, t)| t)
        .collect();

    ValidationReport::new(unmatched_boxes, unmatched_triplets, unmentioned_relations)
}
