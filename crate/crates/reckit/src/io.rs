//! Line-delimited record schemas: the wire contract every pipeline stage
//! reads and writes.
//!
//! One JSON record per line. Strict mode rejects a file on the first
//! violation; Lenient mode skips offending lines and reports each one.
//! Unknown fields are errors in Strict and warnings in Lenient (the record
//! still loads). Writers emit canonical bytes: fixed key order, one record
//! per line, newline-terminated, so equal inputs produce equal files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::crpe::{
    AnnotatedObject, AnnotatedRelation, AnnotationRecord, BenchmarkItem, CircularVariant,
    ResponseRecord, Split, CHOICES_PER_ITEM,
};
use crate::metrics::{ImageTriplets, ScoreVector, ScoredQuery};
use crate::parser::ParseMode;
use crate::types::{normalize_box, ImageSize, NormBox, PixelBox, RelationTriplet, SemanticTag};

/// The record schemas this module understands. `Scores` carries the ranked
/// per-pair label scores consumed by predicate-classification evaluation; the
/// other four are the core corpus formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    Annotation,
    Prediction,
    Benchmark,
    Response,
    Scores,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("line {line}, field {field}: {reason}")]
pub struct SchemaViolation {
    /// 1-based line number in the input file.
    pub line: usize,
    pub field: String,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Schema(#[from] SchemaViolation),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn violation(line: usize, field: &str, reason: impl Into<String>) -> SchemaViolation {
    SchemaViolation { line, field: field.to_owned(), reason: reason.into() }
}

/// Strict mode turns the violation into an immediate error; Lenient mode
/// collects it and lets the caller skip the line.
struct Diagnostics {
    mode: ParseMode,
    violations: Vec<SchemaViolation>,
}

impl Diagnostics {
    fn new(mode: ParseMode) -> Self {
        Diagnostics { mode, violations: Vec::new() }
    }

    fn report(&mut self, v: SchemaViolation) -> Result<(), IoError> {
        match self.mode {
            ParseMode::Strict => Err(IoError::Schema(v)),
            ParseMode::Lenient => {
                self.violations.push(v);
                Ok(())
            }
        }
    }
}

/// Field accessor over one record's JSON object that tracks which keys were
/// consumed, so leftovers surface as unknown-field diagnostics.
struct Fields<'a> {
    line: usize,
    prefix: String,
    map: &'a Map<String, Value>,
    used: BTreeSet<&'a str>,
}

impl<'a> Fields<'a> {
    fn new(line: usize, prefix: &str, value: &'a Value) -> Result<Self, SchemaViolation> {
        let map = value.as_object().ok_or_else(|| {
            violation(line, if prefix.is_empty() { "record" } else { prefix }, "must be a JSON object")
        })?;
        Ok(Fields { line, prefix: prefix.to_owned(), map, used: BTreeSet::new() })
    }

    fn path(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_owned()
        } else {
            format!("{}.{}", self.prefix, name)
        }
    }

    fn take(&mut self, name: &'a str) -> Result<&'a Value, SchemaViolation> {
        self.used.insert(name);
        self.map
            .get(name)
            .ok_or_else(|| violation(self.line, &self.path(name), "missing required field"))
    }

    fn has(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    fn unknown(&self) -> Vec<String> {
        self.map.keys().filter(|k| !self.used.contains(k.as_str())).map(|k| self.path(k)).collect()
    }
}

fn as_string(line: usize, field: &str, v: &Value) -> Result<String, SchemaViolation> {
    v.as_str().map(str::to_owned).ok_or_else(|| violation(line, field, "must be a string"))
}

fn as_u32(line: usize, field: &str, v: &Value) -> Result<u32, SchemaViolation> {
    v.as_u64()
        .and_then(|n| u32::try_from(n).ok())
        .ok_or_else(|| violation(line, field, "must be a non-negative 32-bit integer"))
}

fn as_index(line: usize, field: &str, v: &Value, bound: usize) -> Result<usize, SchemaViolation> {
    v.as_u64()
        .and_then(|n| usize::try_from(n).ok())
        .filter(|&n| n < bound)
        .ok_or_else(|| violation(line, field, format!("must be an integer in 0..{bound}")))
}

fn as_tag(line: usize, field: &str, v: &Value) -> Result<SemanticTag, SchemaViolation> {
    let s = as_string(line, field, v)?;
    SemanticTag::new(&s).map_err(|e| violation(line, field, e.to_string()))
}

fn as_norm_box(line: usize, field: &str, v: &Value) -> Result<NormBox, SchemaViolation> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == 4)
        .ok_or_else(|| violation(line, field, "must be an array of 4 integers"))?;
    let mut c = [0u16; 4];
    for (i, item) in arr.iter().enumerate() {
        c[i] = item
            .as_u64()
            .and_then(|n| u16::try_from(n).ok())
            .filter(|&n| n <= 999)
            .ok_or_else(|| {
                violation(line, field, format!("coordinate {i} must be an integer in 0..=999"))
            })?;
    }
    NormBox::new(c[0], c[1], c[2], c[3]).map_err(|e| violation(line, field, e.to_string()))
}

fn as_pixel_box(line: usize, field: &str, v: &Value) -> Result<PixelBox, SchemaViolation> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == 4)
        .ok_or_else(|| violation(line, field, "must be an array of 4 numbers"))?;
    let mut c = [0f64; 4];
    for (i, item) in arr.iter().enumerate() {
        c[i] = item
            .as_f64()
            .ok_or_else(|| violation(line, field, format!("coordinate {i} must be a number")))?;
    }
    Ok(PixelBox { x1: c[0], y1: c[1], x2: c[2], y2: c[3] })
}

fn as_choices(line: usize, field: &str, v: &Value) -> Result<[String; 4], SchemaViolation> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == CHOICES_PER_ITEM)
        .ok_or_else(|| violation(line, field, "must be an array of exactly 4 strings"))?;
    let mut out: [String; 4] = Default::default();
    for (i, item) in arr.iter().enumerate() {
        out[i] = as_string(line, &format!("{field}[{i}]"), item)?;
    }
    Ok(out)
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, IoError> {
    let file = File::open(path)?;
    let mut lines = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            lines.push((idx + 1, line));
        }
    }
    Ok(lines)
}

fn parse_value(line: usize, text: &str) -> Result<Value, SchemaViolation> {
    serde_json::from_str(text).map_err(|e| violation(line, "record", format!("invalid JSON: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Space {
    Normalized,
    Pixel,
}

/// Load an annotation file. An optional first record `{"coordinate_space":
/// "pixel"}` declares pixel boxes, which are normalized on load using each
/// record's width and height; without the header boxes are already
/// normalized and load verbatim, so normalization can never run twice.
pub fn load_annotations(
    path: &Path,
    mode: ParseMode,
) -> Result<(Vec<AnnotationRecord>, Vec<SchemaViolation>), IoError> {
    let lines = read_lines(path)?;
    let mut diag = Diagnostics::new(mode);
    let mut records = Vec::new();
    let mut seen_ids: BTreeSet<String> = BTreeSet::new();
    let mut space = Space::Normalized;
    let mut start = 0;

    if let Some((line_no, text)) = lines.first() {
        if let Ok(value) = parse_value(*line_no, text) {
            if value.get("coordinate_space").is_some() {
                start = 1;
                match parse_header(*line_no, &value) {
                    Ok((parsed, unknown)) => {
                        space = parsed;
                        for field in unknown {
                            diag.report(violation(*line_no, &field, "unknown field"))?;
                        }
                    }
                    Err(v) => diag.report(v)?,
                }
            }
        }
    }

    for (line_no, text) in &lines[start..] {
        let value = match parse_value(*line_no, text) {
            Ok(v) => v,
            Err(v) => {
                diag.report(v)?;
                continue;
            }
        };
        match parse_annotation(*line_no, &value, space) {
            Ok((record, unknown)) => {
                for field in unknown {
                    diag.report(violation(*line_no, &field, "unknown field"))?;
                }
                if !seen_ids.insert(record.image_id().to_owned()) {
                    diag.report(violation(
                        *line_no,
                        "image_id",
                        format!("duplicate image_id {:?}", record.image_id()),
                    ))?;
                    continue;
                }
                records.push(record);
            }
            Err(v) => diag.report(v)?,
        }
    }
    Ok((records, diag.violations))
}

fn parse_header(line: usize, value: &Value) -> Result<(Space, Vec<String>), SchemaViolation> {
    let mut f = Fields::new(line, "", value)?;
    let space = match as_string(line, "coordinate_space", f.take("coordinate_space")?)?.as_str() {
        "normalized" => Space::Normalized,
        "pixel" => Space::Pixel,
        other => {
            return Err(violation(
                line,
                "coordinate_space",
                format!("must be \"normalized\" or \"pixel\", got {other:?}"),
            ))
        }
    };
    Ok((space, f.unknown()))
}

fn parse_annotation(
    line: usize,
    value: &Value,
    space: Space,
) -> Result<(AnnotationRecord, Vec<String>), SchemaViolation> {
    let mut f = Fields::new(line, "", value)?;
    let image_id = as_string(line, "image_id", f.take("image_id")?)?;
    let width = as_u32(line, "width", f.take("width")?)?;
    let height = as_u32(line, "height", f.take("height")?)?;
    let size = ImageSize::new(width, height)
        .map_err(|e| violation(line, "width", e.to_string()))?;

    let mut unknown = Vec::new();
    let objects_v = f
        .take("objects")?
        .as_array()
        .ok_or_else(|| violation(line, "objects", "must be an array"))?;
    let mut objects = Vec::with_capacity(objects_v.len());
    for (i, ov) in objects_v.iter().enumerate() {
        let prefix = format!("objects[{i}]");
        let mut of = Fields::new(line, &prefix, ov)?;
        let id = as_u32(line, &of.path("id"), of.take("id")?)?;
        let tag = as_tag(line, &of.path("tag"), of.take("tag")?)?;
        let box_v = of.take("box")?;
        let bbox = match space {
            Space::Normalized => as_norm_box(line, &of.path("box"), box_v)?,
            Space::Pixel => {
                let px = as_pixel_box(line, &of.path("box"), box_v)?;
                normalize_box(&px, size).map_err(|e| violation(line, &of.path("box"), e.to_string()))?
            }
        };
        unknown.extend(of.unknown());
        objects.push(AnnotatedObject { id, tag, bbox });
    }

    let relations_v = f
        .take("relations")?
        .as_array()
        .ok_or_else(|| violation(line, "relations", "must be an array"))?;
    let mut relations = Vec::with_capacity(relations_v.len());
    for (i, rv) in relations_v.iter().enumerate() {
        let prefix = format!("relations[{i}]");
        let mut rf = Fields::new(line, &prefix, rv)?;
        let subject_id = as_u32(line, &rf.path("subject_id"), rf.take("subject_id")?)?;
        let predicate = as_tag(line, &rf.path("predicate"), rf.take("predicate")?)?;
        let object_id = as_u32(line, &rf.path("object_id"), rf.take("object_id")?)?;
        unknown.extend(rf.unknown());
        relations.push(AnnotatedRelation { subject_id, predicate, object_id });
    }
    unknown.extend(f.unknown());

    let record = AnnotationRecord::new(image_id, size, objects, relations)
        .map_err(|e| violation(line, "record", e.to_string()))?;
    Ok((record, unknown))
}

#[derive(Serialize)]
struct ObjectWire<'a> {
    id: u32,
    tag: &'a SemanticTag,
    #[serde(rename = "box")]
    bbox: &'a NormBox,
}

#[derive(Serialize)]
struct RelationWire<'a> {
    subject_id: u32,
    predicate: &'a SemanticTag,
    object_id: u32,
}

#[derive(Serialize)]
struct AnnotationWire<'a> {
    image_id: &'a str,
    width: u32,
    height: u32,
    objects: Vec<ObjectWire<'a>>,
    relations: Vec<RelationWire<'a>>,
}

fn write_lines<T: Serialize>(path: &Path, records: impl Iterator<Item = T>) -> Result<(), IoError> {
    let mut out = BufWriter::new(File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut out, &record).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Write annotation records. Output boxes are always normalized, so no
/// coordinate-space header is emitted; zero records produce an empty file.
pub fn write_annotations(records: &[AnnotationRecord], path: &Path) -> Result<(), IoError> {
    write_lines(
        path,
        records.iter().map(|r| AnnotationWire {
            image_id: r.image_id(),
            width: r.size().width(),
            height: r.size().height(),
            objects: r
                .objects()
                .iter()
                .map(|o| ObjectWire { id: o.id, tag: &o.tag, bbox: &o.bbox })
                .collect(),
            relations: r
                .relations()
                .iter()
                .map(|rel| RelationWire {
                    subject_id: rel.subject_id,
                    predicate: &rel.predicate,
                    object_id: rel.object_id,
                })
                .collect(),
        }),
    )
}

/// One image's raw markup prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecTextRecord {
    pub image_id: String,
    pub rec_text: String,
}

/// A prediction file holds exactly one of the two record forms. An empty
/// file loads as an empty triplet set.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    RecText(Vec<RecTextRecord>),
    Triplets(Vec<ImageTriplets>),
}

pub fn load_predictions(
    path: &Path,
    mode: ParseMode,
) -> Result<(Predictions, Vec<SchemaViolation>), IoError> {
    let lines = read_lines(path)?;
    let mut diag = Diagnostics::new(mode);
    let mut rec_texts: Vec<RecTextRecord> = Vec::new();
    let mut triplets: Vec<ImageTriplets> = Vec::new();
    let mut form: Option<bool> = None; // true = rec_text form
    let mut seen_ids: BTreeSet<String> = BTreeSet::new();

    for (line_no, text) in &lines {
        let value = match parse_value(*line_no, text) {
            Ok(v) => v,
            Err(v) => {
                diag.report(v)?;
                continue;
            }
        };
        match parse_prediction(*line_no, &value, &mut form) {
            Ok((record, unknown)) => {
                for field in unknown {
                    diag.report(violation(*line_no, &field, "unknown field"))?;
                }
                let image_id = match &record {
                    PredictionLine::RecText(r) => r.image_id.clone(),
                    PredictionLine::Triplets(t) => t.image_id.clone(),
                };
                if !seen_ids.insert(image_id.clone()) {
                    diag.report(violation(
                        *line_no,
                        "image_id",
                        format!("duplicate image_id {image_id:?}"),
                    ))?;
                    continue;
                }
                match record {
                    PredictionLine::RecText(r) => rec_texts.push(r),
                    PredictionLine::Triplets(t) => triplets.push(t),
                }
            }
            Err(v) => diag.report(v)?,
        }
    }
    let predictions = match form {
        Some(true) => Predictions::RecText(rec_texts),
        _ => Predictions::Triplets(triplets),
    };
    Ok((predictions, diag.violations))
}

enum PredictionLine {
    RecText(RecTextRecord),
    Triplets(ImageTriplets),
}

fn parse_prediction(
    line: usize,
    value: &Value,
    form: &mut Option<bool>,
) -> Result<(PredictionLine, Vec<String>), SchemaViolation> {
    let mut f = Fields::new(line, "", value)?;
    let image_id = as_string(line, "image_id", f.take("image_id")?)?;
    let is_rec = match (f.has("rec_text"), f.has("triplets")) {
        (true, true) => {
            return Err(violation(line, "record", "record has both rec_text and triplets"))
        }
        (false, false) => {
            return Err(violation(line, "record", "record needs rec_text or triplets"))
        }
        (is_rec, _) => is_rec,
    };
    match form {
        Some(fixed) if *fixed != is_rec => {
            return Err(violation(
                line,
                "record",
                "file mixes rec_text and triplet record forms",
            ))
        }
        Some(_) => {}
        None => *form = Some(is_rec),
    }
    if is_rec {
        let rec_text = as_string(line, "rec_text", f.take("rec_text")?)?;
        let unknown = f.unknown();
        Ok((PredictionLine::RecText(RecTextRecord { image_id, rec_text }), unknown))
    } else {
        let arr = f
            .take("triplets")?
            .as_array()
            .ok_or_else(|| violation(line, "triplets", "must be an array"))?;
        let mut unknown = Vec::new();
        let mut parsed = Vec::with_capacity(arr.len());
        for (i, tv) in arr.iter().enumerate() {
            let prefix = format!("triplets[{i}]");
            let mut tf = Fields::new(line, &prefix, tv)?;
            let subject_tag = as_tag(line, &tf.path("subject_tag"), tf.take("subject_tag")?)?;
            let subject_box = as_norm_box(line, &tf.path("subject_box"), tf.take("subject_box")?)?;
            let predicate = as_tag(line, &tf.path("predicate"), tf.take("predicate")?)?;
            let object_tag = as_tag(line, &tf.path("object_tag"), tf.take("object_tag")?)?;
            let object_box = as_norm_box(line, &tf.path("object_box"), tf.take("object_box")?)?;
            unknown.extend(tf.unknown());
            let triplet =
                RelationTriplet::new(subject_tag, subject_box, predicate, object_tag, object_box)
                    .map_err(|e| violation(line, &prefix, e.to_string()))?;
            parsed.push(triplet);
        }
        unknown.extend(f.unknown());
        Ok((PredictionLine::Triplets(ImageTriplets { image_id, triplets: parsed }), unknown))
    }
}

pub fn write_predictions(predictions: &Predictions, path: &Path) -> Result<(), IoError> {
    #[derive(Serialize)]
    struct TripletsWire<'a> {
        image_id: &'a str,
        triplets: &'a [RelationTriplet],
    }
    match predictions {
        Predictions::RecText(records) => write_lines(path, records.iter()),
        Predictions::Triplets(images) => write_lines(
            path,
            images
                .iter()
                .map(|t| TripletsWire { image_id: &t.image_id, triplets: &t.triplets }),
        ),
    }
}

/// Load a benchmark file holding item records and circular-variant records
/// in any interleaving. Variant records are recognized by their `rotation`
/// field. Every variant must reference an item defined in the same file.
pub fn load_benchmark(
    path: &Path,
    mode: ParseMode,
) -> Result<(Vec<BenchmarkItem>, Vec<CircularVariant>, Vec<SchemaViolation>), IoError> {
    let lines = read_lines(path)?;
    let mut diag = Diagnostics::new(mode);
    let mut items: Vec<BenchmarkItem> = Vec::new();
    let mut variants: Vec<(usize, CircularVariant)> = Vec::new();
    let mut item_ids: BTreeSet<String> = BTreeSet::new();
    let mut variant_keys: BTreeSet<(String, usize)> = BTreeSet::new();

    for (line_no, text) in &lines {
        let value = match parse_value(*line_no, text) {
            Ok(v) => v,
            Err(v) => {
                diag.report(v)?;
                continue;
            }
        };
        let is_variant = value.get("rotation").is_some();
        if is_variant {
            match parse_variant(*line_no, &value) {
                Ok((variant, unknown)) => {
                    for field in unknown {
                        diag.report(violation(*line_no, &field, "unknown field"))?;
                    }
                    let key = (variant.item_id.clone(), variant.rotation);
                    if !variant_keys.insert(key) {
                        diag.report(violation(
                            *line_no,
                            "rotation",
                            format!(
                                "duplicate variant for item {:?} rotation {}",
                                variant.item_id, variant.rotation
                            ),
                        ))?;
                        continue;
                    }
                    variants.push((*line_no, variant));
                }
                Err(v) => diag.report(v)?,
            }
        } else {
            match parse_item(*line_no, &value) {
                Ok((item, unknown)) => {
                    for field in unknown {
                        diag.report(violation(*line_no, &field, "unknown field"))?;
                    }
                    if !item_ids.insert(item.item_id.clone()) {
                        diag.report(violation(
                            *line_no,
                            "item_id",
                            format!("duplicate item_id {:?}", item.item_id),
                        ))?;
                        continue;
                    }
                    items.push(item);
                }
                Err(v) => diag.report(v)?,
            }
        }
    }

    // Items may appear after their variants, so reference checks run last.
    let mut kept = Vec::with_capacity(variants.len());
    for (line_no, variant) in variants {
        if !item_ids.contains(&variant.item_id) {
            diag.report(violation(
                line_no,
                "item_id",
                format!("variant references undefined item {:?}", variant.item_id),
            ))?;
            continue;
        }
        kept.push(variant);
    }
    Ok((items, kept, diag.violations))
}

fn parse_split(line: usize, field: &str, v: &Value) -> Result<Split, SchemaViolation> {
    match as_string(line, field, v)?.as_str() {
        "existence" => Ok(Split::Existence),
        "subject" => Ok(Split::Subject),
        "predicate" => Ok(Split::Predicate),
        "object" => Ok(Split::Object),
        other => Err(violation(
            line,
            field,
            format!("must be one of existence, subject, predicate, object; got {other:?}"),
        )),
    }
}

fn parse_item(line: usize, value: &Value) -> Result<(BenchmarkItem, Vec<String>), SchemaViolation> {
    let mut f = Fields::new(line, "", value)?;
    let item_id = as_string(line, "item_id", f.take("item_id")?)?;
    let split = parse_split(line, "split", f.take("split")?)?;
    let image_id = as_string(line, "image_id", f.take("image_id")?)?;
    let question = as_string(line, "question", f.take("question")?)?;
    let choices = as_choices(line, "choices", f.take("choices")?)?;
    let answer_index = as_index(line, "answer_index", f.take("answer_index")?, CHOICES_PER_ITEM)?;
    let abnormal = f
        .take("abnormal")?
        .as_bool()
        .ok_or_else(|| violation(line, "abnormal", "must be a boolean"))?;
    let unknown = f.unknown();
    let item = BenchmarkItem::new(item_id, split, image_id, question, choices, answer_index, abnormal)
        .map_err(|e| violation(line, "record", e.to_string()))?;
    Ok((item, unknown))
}

fn parse_variant(
    line: usize,
    value: &Value,
) -> Result<(CircularVariant, Vec<String>), SchemaViolation> {
    let mut f = Fields::new(line, "", value)?;
    let item_id = as_string(line, "item_id", f.take("item_id")?)?;
    let rotation = as_index(line, "rotation", f.take("rotation")?, CHOICES_PER_ITEM)?;
    let choices = as_choices(line, "choices", f.take("choices")?)?;
    let answer_index = as_index(line, "answer_index", f.take("answer_index")?, CHOICES_PER_ITEM)?;
    for (i, c) in choices.iter().enumerate() {
        if c.is_empty() {
            return Err(violation(line, &format!("choices[{i}]"), "must not be empty"));
        }
        if choices[..i].contains(c) {
            return Err(violation(line, &format!("choices[{i}]"), "choices must be distinct"));
        }
    }
    let unknown = f.unknown();
    Ok((CircularVariant { item_id, rotation, choices, answer_index }, unknown))
}

/// Write items then variants; both in the order given.
pub fn write_benchmark(
    items: &[BenchmarkItem],
    variants: &[CircularVariant],
    path: &Path,
) -> Result<(), IoError> {
    let mut out = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    for variant in variants {
        serde_json::to_writer(&mut out, variant).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_responses(
    path: &Path,
    mode: ParseMode,
) -> Result<(Vec<ResponseRecord>, Vec<SchemaViolation>), IoError> {
    let lines = read_lines(path)?;
    let mut diag = Diagnostics::new(mode);
    let mut records = Vec::new();
    for (line_no, text) in &lines {
        let value = match parse_value(*line_no, text) {
            Ok(v) => v,
            Err(v) => {
                diag.report(v)?;
                continue;
            }
        };
        match parse_response(*line_no, &value) {
            Ok((record, unknown)) => {
                for field in unknown {
                    diag.report(violation(*line_no, &field, "unknown field"))?;
                }
                records.push(record);
            }
            Err(v) => diag.report(v)?,
        }
    }
    Ok((records, diag.violations))
}

fn parse_response(
    line: usize,
    value: &Value,
) -> Result<(ResponseRecord, Vec<String>), SchemaViolation> {
    let mut f = Fields::new(line, "", value)?;
    let item_id = as_string(line, "item_id", f.take("item_id")?)?;
    let rotation = as_index(line, "rotation", f.take("rotation")?, CHOICES_PER_ITEM)?;
    let chosen_index = as_index(line, "chosen_index", f.take("chosen_index")?, CHOICES_PER_ITEM)?;
    let unknown = f.unknown();
    let record = ResponseRecord::new(item_id, rotation, chosen_index)
        .map_err(|e| violation(line, "record", e.to_string()))?;
    Ok((record, unknown))
}

pub fn write_responses(records: &[ResponseRecord], path: &Path) -> Result<(), IoError> {
    write_lines(path, records.iter())
}

/// Load per-pair label scores for predicate-classification evaluation:
/// `{image_id, subject_box, object_box, scores: {label: number}}`.
pub fn load_scores(
    path: &Path,
    mode: ParseMode,
) -> Result<(Vec<ScoredQuery>, Vec<SchemaViolation>), IoError> {
    let lines = read_lines(path)?;
    let mut diag = Diagnostics::new(mode);
    let mut records = Vec::new();
    for (line_no, text) in &lines {
        let value = match parse_value(*line_no, text) {
            Ok(v) => v,
            Err(v) => {
                diag.report(v)?;
                continue;
            }
        };
        match parse_scored(*line_no, &value) {
            Ok((record, unknown)) => {
                for field in unknown {
                    diag.report(violation(*line_no, &field, "unknown field"))?;
                }
                records.push(record);
            }
            Err(v) => diag.report(v)?,
        }
    }
    Ok((records, diag.violations))
}

fn parse_scored(line: usize, value: &Value) -> Result<(ScoredQuery, Vec<String>), SchemaViolation> {
    let mut f = Fields::new(line, "", value)?;
    let image_id = as_string(line, "image_id", f.take("image_id")?)?;
    let subject_box = as_norm_box(line, "subject_box", f.take("subject_box")?)?;
    let object_box = as_norm_box(line, "object_box", f.take("object_box")?)?;
    let scores_v = f
        .take("scores")?
        .as_object()
        .ok_or_else(|| violation(line, "scores", "must be an object of label: number"))?;
    let mut raw: BTreeMap<String, f64> = BTreeMap::new();
    for (label, sv) in scores_v {
        let score = sv.as_f64().ok_or_else(|| {
            violation(line, &format!("scores.{label}"), "must be a finite number")
        })?;
        raw.insert(label.clone(), score);
    }
    let scores = ScoreVector::new(raw).map_err(|e| violation(line, "scores", e.to_string()))?;
    let unknown = f.unknown();
    Ok((ScoredQuery { image_id, subject_box, object_box, scores }, unknown))
}

pub fn write_scores(records: &[ScoredQuery], path: &Path) -> Result<(), IoError> {
    write_lines(path, records.iter())
}
