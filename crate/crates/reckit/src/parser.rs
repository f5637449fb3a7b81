//! Parser and serializer for relation-conversation markup.
//!
//! The surface syntax embeds grounding in otherwise plain text:
//!
//! ```text
//! <ref>label</ref><box>[[x1, y1, x2, y2]]</box>
//! <pred>label</pred><box>[[...]]</box><box>[[...]]</box>
//! ```
//!
//! A `<ref>` carries exactly one box group, a `<pred>` exactly two (subject
//! boxes, then object boxes). A group may hold several boxes. Anything else,
//! including stray `</ref>` or `<box>` tokens that follow no open tag, is
//! plain text.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::types::{DomainError, NormBox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorKind {
    /// `<ref>` or `<pred>` with no matching close before end of input.
    UnclosedTag,
    /// Closed tag followed by no `<box>` group at all.
    MissingBoxGroup,
    /// `<pred>` with one box group where two are required.
    WrongBoxGroupCount,
    /// Box group contents that do not parse as a list of 4-integer lists.
    MalformedBoxList,
    /// Coordinate outside `0..=999`, or a box with no positive extent.
    CoordinateOutOfRange,
    /// A markup token opened inside another tag's label.
    NestedTag,
    /// Label that is empty or whitespace-only.
    EmptyLabel,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParseErrorKind::UnclosedTag => "unclosed tag",
            ParseErrorKind::MissingBoxGroup => "missing box group",
            ParseErrorKind::WrongBoxGroupCount => "wrong box group count",
            ParseErrorKind::MalformedBoxList => "malformed box list",
            ParseErrorKind::CoordinateOutOfRange => "coordinate out of range",
            ParseErrorKind::NestedTag => "nested tag",
            ParseErrorKind::EmptyLabel => "empty label",
        };
        f.write_str(s)
    }
}

/// A parse failure (Strict) or a demoted span (Lenient warning). `offset` is
/// a byte offset into the original input.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{kind} at byte {offset}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    fn new(kind: ParseErrorKind, offset: usize, message: impl Into<String>) -> Self {
        ParseError { kind, offset, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// First malformed construct aborts the parse.
    Strict,
    /// Malformed constructs demote to plain text: label text is kept, markup
    /// tokens and their box payloads are dropped, and a warning records what
    /// happened. Never fails.
    Lenient,
}

/// One or more boxes attached to a single mention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoxGroup(Vec<NormBox>);

impl BoxGroup {
    pub fn new(boxes: Vec<NormBox>) -> Result<Self, DomainError> {
        if boxes.is_empty() {
            return Err(DomainError::InvalidInput("box group must be non-empty".into()));
        }
        Ok(BoxGroup(boxes))
    }

    pub fn boxes(&self) -> &[NormBox] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecSegment {
    Text { text: String },
    /// Entity mention: the label names whatever the boxes cover.
    Ref { label: String, group: BoxGroup },
    /// Relation mention: subject boxes, then object boxes.
    Pred { label: String, subject: BoxGroup, object: BoxGroup },
}

impl RecSegment {
    pub fn text(s: impl Into<String>) -> Self {
        RecSegment::Text { text: s.into() }
    }
}

/// Parsed document: segments in input order plus, per segment, the byte span
/// of the source region it came from. For documents built programmatically
/// the spans refer to the canonical serialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecDocument {
    segments: Vec<RecSegment>,
    source_spans: Vec<(usize, usize)>,
}

impl RecDocument {
    /// Build a document from segments. Adjacent `Text` segments merge and
    /// empty `Text` segments drop, so structurally equal content compares
    /// equal no matter how it was assembled. Spans are computed against
    /// [`serialize`], which makes `parse(serialize(d))` reproduce `d` exactly
    /// as long as no `Text` segment itself contains markup tokens.
    pub fn from_segments(segments: Vec<RecSegment>) -> Self {
        let mut merged: Vec<RecSegment> = Vec::with_capacity(segments.len());
        for seg in segments {
            match seg {
                RecSegment::Text { text } if text.is_empty() => {}
                RecSegment::Text { text } => match merged.last_mut() {
                    Some(RecSegment::Text { text: prev }) => prev.push_str(&text),
                    _ => merged.push(RecSegment::Text { text }),
                },
                other => merged.push(other),
            }
        }
        let mut spans = Vec::with_capacity(merged.len());
        let mut pos = 0;
        for seg in &merged {
            let len = serialize_segment(seg).len();
            spans.push((pos, pos + len));
            pos += len;
        }
        RecDocument { segments: merged, source_spans: spans }
    }

    pub fn segments(&self) -> &[RecSegment] {
        &self.segments
    }

    pub fn source_spans(&self) -> &[(usize, usize)] {
        &self.source_spans
    }
}

/// Result of a parse: the document plus any demotion warnings (always empty
/// in Strict mode, since Strict turns the first of them into an error).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed {
    pub document: RecDocument,
    pub warnings: Vec<ParseError>,
}

const REF_OPEN: &str = "<ref>";
const REF_CLOSE: &str = "</ref>";
const PRED_OPEN: &str = "<pred>";
const PRED_CLOSE: &str = "</pred>";
const BOX_OPEN: &str = "<box>";
const BOX_CLOSE: &str = "</box>";

/// Tokens that may not appear inside a label.
const NESTING_TOKENS: [&str; 6] = [REF_OPEN, PRED_OPEN, BOX_OPEN, REF_CLOSE, PRED_CLOSE, BOX_CLOSE];

pub fn parse(input: &str, mode: ParseMode) -> Result<Parsed, ParseError> {
    let mut segments: Vec<RecSegment> = Vec::new();
    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut warnings: Vec<ParseError> = Vec::new();

    // Text accumulates across demotions; `text_start` tracks where the
    // current run began in the input.
    let mut text_buf = String::new();
    let mut text_start = 0;
    let mut pos = 0;

    let flush_text = |buf: &mut String,
                      start: usize,
                      end: usize,
                      segments: &mut Vec<RecSegment>,
                      spans: &mut Vec<(usize, usize)>| {
        if !buf.is_empty() {
            segments.push(RecSegment::Text { text: std::mem::take(buf) });
            spans.push((start, end));
        }
    };

    while let Some((tag_pos, is_pred)) = next_open_tag(input, pos) {
        text_buf.push_str(&input[pos..tag_pos]);
        match parse_construct(input, tag_pos, is_pred) {
            Ok((segment, end)) => {
                flush_text(&mut text_buf, text_start, tag_pos, &mut segments, &mut spans);
                segments.push(segment);
                spans.push((tag_pos, end));
                pos = end;
                text_start = end;
            }
            Err(fail) => {
                if mode == ParseMode::Strict {
                    return Err(fail.error);
                }
                warnings.push(fail.error);
                text_buf.push_str(&fail.demoted);
                pos = fail.resume;
            }
        }
    }
    text_buf.push_str(&input[pos..]);
    flush_text(&mut text_buf, text_start, input.len(), &mut segments, &mut spans);

    Ok(Parsed {
        document: RecDocument { segments, source_spans: spans },
        warnings,
    })
}

/// Earliest `<ref>` or `<pred>` at or after `from`.
fn next_open_tag(input: &str, from: usize) -> Option<(usize, bool)> {
    let hay = &input[from..];
    let r = hay.find(REF_OPEN).map(|i| (from + i, false));
    let p = hay.find(PRED_OPEN).map(|i| (from + i, true));
    match (r, p) {
        (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
        (a, b) => a.or(b),
    }
}

/// A failed construct, with what Lenient mode should do about it: append
/// `demoted` to the surrounding text and continue scanning at `resume`.
/// `resume` always lands past the construct's opening tag, so the scan makes
/// progress.
struct ConstructFail {
    error: ParseError,
    demoted: String,
    resume: usize,
}

fn parse_construct(
    input: &str,
    tag_pos: usize,
    is_pred: bool,
) -> Result<(RecSegment, usize), ConstructFail> {
    let (open, close, name) = if is_pred {
        (PRED_OPEN, PRED_CLOSE, "<pred>")
    } else {
        (REF_OPEN, REF_CLOSE, "<ref>")
    };
    let label_start = tag_pos + open.len();

    // The label runs to the matching close tag; any markup token first is a
    // nesting violation. Demote up to the offending token and rescan from it,
    // so a well-formed construct inside a broken one still parses.
    let (token, token_pos) = match next_markup_token(input, label_start) {
        Some(hit) => hit,
        None => {
            return Err(ConstructFail {
                error: ParseError::new(
                    ParseErrorKind::UnclosedTag,
                    tag_pos,
                    format!("{name} is never closed"),
                ),
                demoted: String::new(),
                resume: label_start,
            })
        }
    };
    if token != close {
        return Err(ConstructFail {
            error: ParseError::new(
                ParseErrorKind::NestedTag,
                token_pos,
                format!("{token} inside {name} label"),
            ),
            demoted: input[label_start..token_pos].to_owned(),
            resume: token_pos,
        });
    }
    let label = &input[label_start..token_pos];
    let after_close = token_pos + close.len();
    if label.trim().is_empty() {
        return Err(ConstructFail {
            error: ParseError::new(
                ParseErrorKind::EmptyLabel,
                label_start,
                format!("{name} label is empty"),
            ),
            demoted: label.to_owned(),
            resume: after_close,
        });
    }

    let (first, after_first) =
        parse_box_group(input, after_close, tag_pos).map_err(|mut fail| {
            fail.prepend_label(label);
            fail
        })?;

    if !is_pred {
        let seg = RecSegment::Ref { label: label.to_owned(), group: first };
        return Ok((seg, after_first));
    }

    let (second, after_second) = match parse_box_group(input, after_first, tag_pos) {
        Ok(v) => v,
        Err(mut fail) => {
            if fail.error.kind == ParseErrorKind::MissingBoxGroup {
                fail.error = ParseError::new(
                    ParseErrorKind::WrongBoxGroupCount,
                    fail.error.offset,
                    "<pred> requires two box groups, found one",
                );
            }
            fail.prepend_label(label);
            return Err(fail);
        }
    };
    let seg = RecSegment::Pred { label: label.to_owned(), subject: first, object: second };
    Ok((seg, after_second))
}

impl ConstructFail {
    /// Box-group failures keep the already-validated label visible.
    fn prepend_label(&mut self, label: &str) {
        if self.demoted.is_empty() {
            self.demoted = label.to_owned();
        } else {
            self.demoted = format!("{label}{}", self.demoted);
        }
    }
}

/// Earliest markup token at or after `from`.
fn next_markup_token(input: &str, from: usize) -> Option<(&'static str, usize)> {
    let hay = &input[from..];
    NESTING_TOKENS
        .iter()
        .filter_map(|t| hay.find(t).map(|i| (*t, from + i)))
        .min_by_key(|(t, i)| (*i, std::cmp::Reverse(t.len())))
}

/// Parse one `<box>[[...]]</box>` group starting at the first non-whitespace
/// byte at or after `from`. `construct_pos` is only for error demotion
/// bookkeeping (resume points never precede it).
fn parse_box_group(
    input: &str,
    from: usize,
    _construct_pos: usize,
) -> Result<(BoxGroup, usize), ConstructFail> {
    let group_start = skip_ws(input, from);
    if !input[group_start..].starts_with(BOX_OPEN) {
        return Err(ConstructFail {
            error: ParseError::new(
                ParseErrorKind::MissingBoxGroup,
                group_start.min(input.len()),
                "expected <box> group",
            ),
            demoted: String::new(),
            // Resume at `from`, not past the whitespace: the gap stays text.
            resume: from,
        });
    }
    let content_start = group_start + BOX_OPEN.len();
    let close_rel = match input[content_start..].find(BOX_CLOSE) {
        Some(i) => i,
        None => {
            return Err(ConstructFail {
                error: ParseError::new(
                    ParseErrorKind::UnclosedTag,
                    group_start,
                    "<box> is never closed",
                ),
                demoted: String::new(),
                // Contents stay in the input as text.
                resume: content_start,
            })
        }
    };
    let content = &input[content_start..content_start + close_rel];
    let end = content_start + close_rel + BOX_CLOSE.len();
    match parse_box_list(content, content_start) {
        Ok(boxes) => Ok((BoxGroup(boxes), end)),
        Err(error) => Err(ConstructFail { error, demoted: String::new(), resume: end }),
    }
}

/// Grammar for group contents: `[ box (, box)* ]` with `box` a bracketed list
/// of exactly four integers. Whitespace is free between tokens. `base` is the
/// byte offset of `content` in the original input, for error positions.
fn parse_box_list(content: &str, base: usize) -> Result<Vec<NormBox>, ParseError> {
    let bytes = content.as_bytes();
    let mut i = 0;
    let malformed = |at: usize, msg: &str| {
        ParseError::new(ParseErrorKind::MalformedBoxList, base + at, msg.to_owned())
    };

    let skip = |i: &mut usize| {
        while *i < bytes.len() && bytes[*i].is_ascii_whitespace() {
            *i += 1;
        }
    };
    let expect = |i: &mut usize, ch: u8, what: &str| -> Result<(), ParseError> {
        skip(i);
        if *i < bytes.len() && bytes[*i] == ch {
            *i += 1;
            Ok(())
        } else {
            Err(malformed(*i, what))
        }
    };
    let integer = |i: &mut usize| -> Result<(u32, usize), ParseError> {
        skip(i);
        let start = *i;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
        if *i == start {
            return Err(malformed(start, "expected an unsigned integer"));
        }
        // At most 10 digits fit the screen; longer runs cannot be in range.
        content[start..*i]
            .parse::<u32>()
            .map(|v| (v, start))
            .map_err(|_| {
                ParseError::new(
                    ParseErrorKind::CoordinateOutOfRange,
                    base + start,
                    "coordinate does not fit in 32 bits".to_owned(),
                )
            })
    };

    expect(&mut i, b'[', "expected '[' to open the box list")?;
    let mut boxes = Vec::new();
    loop {
        expect(&mut i, b'[', "expected '[' to open a box")?;
        let mut coords = [0u32; 4];
        let mut starts = [0usize; 4];
        for k in 0..4 {
            if k > 0 {
                expect(&mut i, b',', "expected ',' between coordinates")?;
            }
            let (v, at) = integer(&mut i)?;
            coords[k] = v;
            starts[k] = at;
        }
        expect(&mut i, b']', "expected ']' after four coordinates")?;
        for (k, v) in coords.iter().enumerate() {
            if *v > 999 {
                return Err(ParseError::new(
                    ParseErrorKind::CoordinateOutOfRange,
                    base + starts[k],
                    format!("coordinate {v} exceeds 999"),
                ));
            }
        }
        let bx = NormBox::new(coords[0] as u16, coords[1] as u16, coords[2] as u16, coords[3] as u16)
            .map_err(|e| {
                ParseError::new(ParseErrorKind::CoordinateOutOfRange, base + starts[0], e.to_string())
            })?;
        boxes.push(bx);
        skip(&mut i);
        if i < bytes.len() && bytes[i] == b',' {
            i += 1;
            continue;
        }
        break;
    }
    expect(&mut i, b']', "expected ']' to close the box list")?;
    skip(&mut i);
    if i != bytes.len() {
        return Err(malformed(i, "trailing content after box list"));
    }
    Ok(boxes)
}

fn skip_ws(input: &str, from: usize) -> usize {
    input[from..]
        .char_indices()
        .find(|(_, c)| !c.is_whitespace())
        .map(|(i, _)| from + i)
        .unwrap_or(input.len())
}

/// Canonical text form: labels verbatim, coordinates re-rendered with `", "`
/// separators, no whitespace between a tag and its box groups.
pub fn serialize(doc: &RecDocument) -> String {
    doc.segments.iter().map(serialize_segment).collect()
}

fn serialize_segment(seg: &RecSegment) -> String {
    match seg {
        RecSegment::Text { text } => text.clone(),
        RecSegment::Ref { label, group } => {
            format!("{REF_OPEN}{label}{REF_CLOSE}{}", serialize_group(group))
        }
        RecSegment::Pred { label, subject, object } => format!(
            "{PRED_OPEN}{label}{PRED_CLOSE}{}{}",
            serialize_group(subject),
            serialize_group(object)
        ),
    }
}

fn serialize_group(group: &BoxGroup) -> String {
    let inner = group
        .boxes()
        .iter()
        .map(|b| b.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    format!("{BOX_OPEN}[{inner}]{BOX_CLOSE}")
}

/// The plain sentence a reader would see: text plus labels, with tags and
/// coordinates removed. A doubled space created at a removal seam collapses
/// to one.
pub fn strip_markup(doc: &RecDocument) -> String {
    let mut out = String::new();
    for seg in &doc.segments {
        let piece = match seg {
            RecSegment::Text { text } => text.as_str(),
            RecSegment::Ref { label, .. } => label.as_str(),
            RecSegment::Pred { label, .. } => label.as_str(),
        };
        let mut piece = piece;
        while out.ends_with(' ') && piece.starts_with(' ') {
            piece = &piece[1..];
        }
        out.push_str(piece);
    }
    out
}
