//! Single-binary command surface over the whole pipeline: parsing,
//! conversion, rendering, evaluation, and benchmark generation.
//!
//! Exit codes: 0 success, 1 validation or evaluation failure, 2 usage error.
//! Records and metrics go to `--out` or stdout; every diagnostic goes to
//! stderr. Identical inputs and flags produce byte-identical outputs.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::crpe::{
    self, circular_expand, corpus_stats, generate_items, select_abnormal, AnnotationRecord,
    GenConfig,
};
use crate::graph::{
    to_scene_graph, to_scene_graph_lossy, to_triplets, validate_against_annotations, SceneGraph,
};
use crate::io::{
    load_annotations, load_benchmark, load_predictions, load_responses, load_scores, Predictions,
    RecTextRecord, SchemaViolation,
};
use crate::metrics::{
    predcls_evaluate, predcls_queries, sgg_evaluate, ImageTriplets, LabelMatch, MetricsConfig,
};
use crate::parser::{self, ParseMode};
use crate::types::RelationTriplet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Strict,
    Lenient,
}

impl From<ModeArg> for ParseMode {
    fn from(m: ModeArg) -> ParseMode {
        match m {
            ModeArg::Strict => ParseMode::Strict,
            ModeArg::Lenient => ParseMode::Lenient,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemaArg {
    Annotation,
    Prediction,
    Benchmark,
    Response,
    Scores,
}

fn parse_iou(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err("must lie strictly between 0 and 1".into())
    }
}

fn parse_rank(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 1 {
        Ok(v)
    } else {
        Err("ranks must be at least 1".into())
    }
}

#[derive(Parser)]
#[command(
    name = "reckit",
    version,
    about = "Relation-markup parsing, scene-graph conversion, and evaluation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a markup text file and emit its segments as JSON.
    Parse {
        /// Markup text file; the whole file is one document.
        input: PathBuf,
        /// strict aborts on the first malformed construct; lenient demotes it
        /// to plain text and reports a warning.
        #[arg(long, value_enum, default_value = "strict")]
        mode: ModeArg,
        /// Write the JSON document here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a record file against one of the line-delimited schemas.
    Validate {
        /// Record file, one JSON object per line.
        input: PathBuf,
        /// Which schema the file must satisfy.
        #[arg(long, value_enum)]
        schema: SchemaArg,
        /// strict fails on the first violation; lenient reports all of them.
        #[arg(long, value_enum, default_value = "strict")]
        mode: ModeArg,
    },
    /// Parse markup and emit the scene graph's triplets as a prediction file.
    ToGraph {
        /// Markup text file; the whole file is one document.
        input: PathBuf,
        /// strict fails on malformed markup or broadcast mismatches; lenient
        /// skips what cannot convert.
        #[arg(long, value_enum, default_value = "strict")]
        mode: ModeArg,
        /// Write the triplet records here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse markup and emit its scene graph as Graphviz DOT.
    Render {
        /// Markup text file; the whole file is one document.
        input: PathBuf,
        #[arg(long, value_enum, default_value = "strict")]
        mode: ModeArg,
        /// Write the DOT text here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predicted scene graphs against ground-truth annotations.
    EvalSgg {
        /// Prediction file: rec_text records or triplet records.
        predictions: PathBuf,
        /// Ground-truth annotation file.
        annotations: PathBuf,
        /// Box-overlap threshold; a match needs IoU strictly above it.
        #[arg(long, default_value_t = 0.5, value_parser = parse_iou)]
        iou_threshold: f64,
        /// How to treat malformed prediction markup.
        #[arg(long, value_enum, default_value = "lenient")]
        mode: ModeArg,
        /// Write the full result as JSON here as well.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit one relation query per ordered ground-truth object pair.
    PredclsQueries {
        /// Ground-truth annotation file.
        annotations: PathBuf,
        /// Write the query records here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score ranked per-pair label scores against ground-truth relations.
    EvalPredcls {
        /// Score file: one record per queried pair.
        scores: PathBuf,
        /// Ground-truth annotation file.
        annotations: PathBuf,
        /// Ranks to report recall at.
        #[arg(long, value_delimiter = ',', default_values_t = vec![20usize, 50, 100], value_parser = parse_rank)]
        k: Vec<usize>,
        /// Write the full result as JSON here as well.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate benchmark items (with circular variants) from annotations.
    CrpeGen {
        /// Ground-truth annotation file.
        annotations: PathBuf,
        /// Generation seed; required so runs are reproducible by construction.
        #[arg(long)]
        seed: u64,
        /// Cap on generated items per relation split per image.
        #[arg(long)]
        max_items_per_image: Option<usize>,
        /// Write the benchmark records here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write one record per skipped generation opportunity.
        #[arg(long)]
        report_out: Option<PathBuf>,
        /// Also write the lowest-probability triplet candidates.
        #[arg(long)]
        abnormal_out: Option<PathBuf>,
        /// How many abnormal candidates to keep.
        #[arg(long, default_value_t = 100)]
        abnormal_k: usize,
    },
    /// Rewrite a benchmark file with a fresh circular expansion of its items.
    CrpeExpand {
        /// Benchmark file; existing variant records are replaced.
        benchmark: PathBuf,
        /// Write the expanded records here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a response file against a benchmark under circular consistency.
    CrpeScore {
        /// Benchmark file with items and variants.
        benchmark: PathBuf,
        /// Response file: one chosen index per (item, rotation).
        responses: PathBuf,
        /// Write the scores as JSON here as well.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check rec_text predictions against annotations per image.
    CheckData {
        /// Prediction file in rec_text form.
        predictions: PathBuf,
        /// Ground-truth annotation file.
        annotations: PathBuf,
        /// strict fails on the first malformed record; lenient checks
        /// whatever parses.
        #[arg(long, value_enum, default_value = "lenient")]
        mode: ModeArg,
    },
}

/// Run the CLI against an argument vector and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            1
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<i32, String> {
    match cmd {
        Cmd::Parse { input, mode, out } => cmd_parse(&input, mode.into(), out.as_deref()),
        Cmd::Validate { input, schema, mode } => cmd_validate(&input, schema, mode.into()),
        Cmd::ToGraph { input, mode, out } => cmd_to_graph(&input, mode.into(), out.as_deref()),
        Cmd::Render { input, mode, out } => cmd_render(&input, mode.into(), out.as_deref()),
        Cmd::EvalSgg { predictions, annotations, iou_threshold, mode, out } => {
            cmd_eval_sgg(&predictions, &annotations, iou_threshold, mode.into(), out.as_deref())
        }
        Cmd::PredclsQueries { annotations, out } => {
            cmd_predcls_queries(&annotations, out.as_deref())
        }
        Cmd::EvalPredcls { scores, annotations, k, out } => {
            cmd_eval_predcls(&scores, &annotations, &k, out.as_deref())
        }
        Cmd::CrpeGen {
            annotations,
            seed,
            max_items_per_image,
            out,
            report_out,
            abnormal_out,
            abnormal_k,
        } => cmd_crpe_gen(
            &annotations,
            seed,
            max_items_per_image,
            out.as_deref(),
            report_out.as_deref(),
            abnormal_out.as_deref(),
            abnormal_k,
        ),
        Cmd::CrpeExpand { benchmark, out } => cmd_crpe_expand(&benchmark, out.as_deref()),
        Cmd::CrpeScore { benchmark, responses, out } => {
            cmd_crpe_score(&benchmark, &responses, out.as_deref())
        }
        Cmd::CheckData { predictions, annotations, mode } => {
            cmd_check_data(&predictions, &annotations, mode.into())
        }
    }
}

fn read_text(path: &Path) -> Result<String, String> {
    let mut text =
        fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    // Exactly one trailing newline belongs to the file, not the document.
    if text.ends_with('\n') {
        text.pop();
        if text.ends_with('\r') {
            text.pop();
        }
    }
    Ok(text)
}

fn deliver(out: Option<&Path>, content: &str) -> Result<(), String> {
    match out {
        Some(path) => {
            fs::write(path, content).map_err(|e| format!("{}: {e}", path.display()))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn emit_lines<T: Serialize>(records: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(&record).expect("records serialize"));
        out.push('\n');
    }
    out
}

fn report_violations(violations: &[SchemaViolation]) {
    for v in violations {
        eprintln!("warning: {v}");
    }
}

fn cmd_parse(input: &Path, mode: ParseMode, out: Option<&Path>) -> Result<i32, String> {
    let text = read_text(input)?;
    let parsed = parser::parse(&text, mode).map_err(|e| e.to_string())?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    let mut json = serde_json::to_string(&parsed.document).expect("document serializes");
    json.push('\n');
    deliver(out, &json)?;
    Ok(0)
}

fn cmd_validate(input: &Path, schema: SchemaArg, mode: ParseMode) -> Result<i32, String> {
    let (count, violations) = match schema {
        SchemaArg::Annotation => {
            let (records, v) = load_annotations(input, mode).map_err(|e| e.to_string())?;
            (records.len(), v)
        }
        SchemaArg::Prediction => {
            let (records, v) = load_predictions(input, mode).map_err(|e| e.to_string())?;
            let count = match &records {
                Predictions::RecText(r) => r.len(),
                Predictions::Triplets(t) => t.len(),
            };
            (count, v)
        }
        SchemaArg::Benchmark => {
            let (items, variants, v) = load_benchmark(input, mode).map_err(|e| e.to_string())?;
            (items.len() + variants.len(), v)
        }
        SchemaArg::Response => {
            let (records, v) = load_responses(input, mode).map_err(|e| e.to_string())?;
            (records.len(), v)
        }
        SchemaArg::Scores => {
            let (records, v) = load_scores(input, mode).map_err(|e| e.to_string())?;
            (records.len(), v)
        }
    };
    report_violations(&violations);
    eprintln!("{count} record(s), {} violation(s)", violations.len());
    Ok(if violations.is_empty() { 0 } else { 1 })
}

fn document_graph(text: &str, mode: ParseMode) -> Result<SceneGraph, String> {
    let parsed = parser::parse(text, mode).map_err(|e| e.to_string())?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    let build = match mode {
        ParseMode::Strict => to_scene_graph(&parsed.document).map_err(|e| e.to_string())?,
        ParseMode::Lenient => to_scene_graph_lossy(&parsed.document),
    };
    for w in &build.warnings {
        eprintln!("warning: {}", serde_json::to_string(&w).expect("warning serializes"));
    }
    Ok(build.graph)
}

fn cmd_to_graph(input: &Path, mode: ParseMode, out: Option<&Path>) -> Result<i32, String> {
    let text = read_text(input)?;
    let graph = document_graph(&text, mode)?;
    let image_id = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "document".to_owned());
    let record = ImageTriplets { image_id, triplets: to_triplets(&graph) };
    deliver(out, &emit_lines([record]))?;
    Ok(0)
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn render_dot(graph: &SceneGraph) -> String {
    let mut out = String::from("digraph scene {\n");
    for node in &graph.nodes {
        let label = format!("{} {}", node.tag, node.bbox.compact());
        out.push_str(&format!("  n{} [label=\"{}\"];\n", node.id, dot_escape(&label)));
    }
    for edge in &graph.edges {
        out.push_str(&format!(
            "  n{} -> n{} [label=\"{}\"];\n",
            edge.subject_id,
            edge.object_id,
            dot_escape(edge.predicate.as_str())
        ));
    }
    out.push_str("}\n");
    out
}

fn cmd_render(input: &Path, mode: ParseMode, out: Option<&Path>) -> Result<i32, String> {
    let text = read_text(input)?;
    let graph = document_graph(&text, mode)?;
    deliver(out, &render_dot(&graph))?;
    Ok(0)
}

fn annotation_triplets(records: &[AnnotationRecord]) -> Vec<ImageTriplets> {
    records
        .iter()
        .map(|r| ImageTriplets {
            image_id: r.image_id().to_owned(),
            triplets: r
                .relations()
                .iter()
                .map(|rel| {
                    let s = r.object_by_id(rel.subject_id).expect("validated annotation");
                    let o = r.object_by_id(rel.object_id).expect("validated annotation");
                    RelationTriplet::new(
                        s.tag.clone(),
                        s.bbox,
                        rel.predicate.clone(),
                        o.tag.clone(),
                        o.bbox,
                    )
                    .expect("annotation construction forbids indistinguishable endpoints")
                })
                .collect(),
        })
        .collect()
}

fn rec_predictions_to_triplets(
    records: &[RecTextRecord],
    mode: ParseMode,
) -> Result<Vec<ImageTriplets>, String> {
    records
        .iter()
        .map(|r| {
            let parsed = parser::parse(&r.rec_text, mode)
                .map_err(|e| format!("image {}: {e}", r.image_id))?;
            let build = match mode {
                ParseMode::Strict => to_scene_graph(&parsed.document)
                    .map_err(|e| format!("image {}: {e}", r.image_id))?,
                ParseMode::Lenient => to_scene_graph_lossy(&parsed.document),
            };
            Ok(ImageTriplets { image_id: r.image_id.clone(), triplets: to_triplets(&build.graph) })
        })
        .collect()
}

fn cmd_eval_sgg(
    predictions: &Path,
    annotations: &Path,
    iou_threshold: f64,
    mode: ParseMode,
    out: Option<&Path>,
) -> Result<i32, String> {
    let (preds, pred_diags) = load_predictions(predictions, mode).map_err(|e| e.to_string())?;
    report_violations(&pred_diags);
    let (anns, ann_diags) = load_annotations(annotations, mode).map_err(|e| e.to_string())?;
    report_violations(&ann_diags);
    let pred_triplets = match &preds {
        Predictions::RecText(records) => rec_predictions_to_triplets(records, mode)?,
        Predictions::Triplets(images) => images.clone(),
    };
    let gt = annotation_triplets(&anns);
    let config = MetricsConfig::new(iou_threshold, LabelMatch::CaseInsensitiveExact)
        .map_err(|e| e.to_string())?;
    let result = sgg_evaluate(&pred_triplets, &gt, &config).map_err(|e| e.to_string())?;
    println!("recall {:.6}", result.recall);
    println!("mean_recall {:.6}", result.mean_recall);
    println!("avg_tuples {:.6}", result.avg_tuples);
    println!("images_evaluated {}", result.images_evaluated);
    if let Some(path) = out {
        let mut json = serde_json::to_string(&result).expect("result serializes");
        json.push('\n');
        fs::write(path, json).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(0)
}

fn cmd_predcls_queries(annotations: &Path, out: Option<&Path>) -> Result<i32, String> {
    let (anns, diags) =
        load_annotations(annotations, ParseMode::Strict).map_err(|e| e.to_string())?;
    report_violations(&diags);
    let mut content = String::new();
    for record in &anns {
        let objects: Vec<_> =
            record.objects().iter().map(|o| (o.tag.clone(), o.bbox)).collect();
        content.push_str(&emit_lines(predcls_queries(record.image_id(), &objects)));
    }
    deliver(out, &content)?;
    Ok(0)
}

fn cmd_eval_predcls(
    scores: &Path,
    annotations: &Path,
    ks: &[usize],
    out: Option<&Path>,
) -> Result<i32, String> {
    let (scored, score_diags) =
        load_scores(scores, ParseMode::Strict).map_err(|e| e.to_string())?;
    report_violations(&score_diags);
    let (anns, ann_diags) =
        load_annotations(annotations, ParseMode::Strict).map_err(|e| e.to_string())?;
    report_violations(&ann_diags);
    let gt = annotation_triplets(&anns);
    let result = predcls_evaluate(&scored, &gt, ks).map_err(|e| e.to_string())?;
    for (k, r) in &result.recall_at {
        println!("recall@{k} {r:.6}");
    }
    for (k, r) in &result.mean_recall_at {
        println!("mean_recall@{k} {r:.6}");
    }
    println!("images_evaluated {}", result.images_evaluated);
    if let Some(path) = out {
        let mut json = serde_json::to_string(&result).expect("result serializes");
        json.push('\n');
        fs::write(path, json).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(0)
}

fn cmd_crpe_gen(
    annotations: &Path,
    seed: u64,
    max_items_per_image: Option<usize>,
    out: Option<&Path>,
    report_out: Option<&Path>,
    abnormal_out: Option<&Path>,
    abnormal_k: usize,
) -> Result<i32, String> {
    let (anns, diags) =
        load_annotations(annotations, ParseMode::Strict).map_err(|e| e.to_string())?;
    report_violations(&diags);
    let stats = corpus_stats(&anns).map_err(|e| e.to_string())?;
    let cfg = GenConfig { per_image_cap: max_items_per_image };
    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for record in &anns {
        let mut outcome = generate_items(record, &stats, seed, &cfg);
        items.append(&mut outcome.items);
        skipped.append(&mut outcome.skipped);
    }
    let mut content = emit_lines(&items);
    for item in &items {
        content.push_str(&emit_lines(circular_expand(item)));
    }
    deliver(out, &content)?;
    if let Some(path) = report_out {
        fs::write(path, emit_lines(&skipped)).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let Some(path) = abnormal_out {
        fs::write(path, emit_lines(select_abnormal(&stats, abnormal_k)))
            .map_err(|e| format!("{}: {e}", path.display()))?;
    }
    eprintln!("{} item(s) generated, {} opportunity(ies) skipped", items.len(), skipped.len());
    Ok(0)
}

fn cmd_crpe_expand(benchmark: &Path, out: Option<&Path>) -> Result<i32, String> {
    let (items, _old_variants, diags) =
        load_benchmark(benchmark, ParseMode::Strict).map_err(|e| e.to_string())?;
    report_violations(&diags);
    let mut content = emit_lines(&items);
    for item in &items {
        content.push_str(&emit_lines(circular_expand(item)));
    }
    deliver(out, &content)?;
    Ok(0)
}

fn cmd_crpe_score(benchmark: &Path, responses: &Path, out: Option<&Path>) -> Result<i32, String> {
    let (items, variants, bench_diags) =
        load_benchmark(benchmark, ParseMode::Strict).map_err(|e| e.to_string())?;
    report_violations(&bench_diags);
    let (resps, resp_diags) =
        load_responses(responses, ParseMode::Strict).map_err(|e| e.to_string())?;
    report_violations(&resp_diags);
    let scores = crpe::score(&items, &variants, &resps).map_err(|e| e.to_string())?;
    println!("existence {:.2}", scores.existence.accuracy);
    println!("subject {:.2}", scores.subject.accuracy);
    println!("predicate {:.2}", scores.predicate.accuracy);
    println!("object {:.2}", scores.object.accuracy);
    println!("overall {:.2}", scores.overall);
    if let Some(path) = out {
        let mut json = serde_json::to_string(&scores).expect("scores serialize");
        json.push('\n');
        fs::write(path, json).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(0)
}

fn cmd_check_data(predictions: &Path, annotations: &Path, mode: ParseMode) -> Result<i32, String> {
    let (preds, pred_diags) = load_predictions(predictions, mode).map_err(|e| e.to_string())?;
    report_violations(&pred_diags);
    let records = match preds {
        Predictions::RecText(records) => records,
        Predictions::Triplets(_) => {
            return Err("check-data needs predictions in rec_text form".into())
        }
    };
    let (anns, ann_diags) = load_annotations(annotations, mode).map_err(|e| e.to_string())?;
    report_violations(&ann_diags);
    let by_id: BTreeMap<&str, &AnnotationRecord> =
        anns.iter().map(|a| (a.image_id(), a)).collect();
    let mut inconsistent = 0usize;
    for record in &records {
        let ann = by_id
            .get(record.image_id.as_str())
            .ok_or_else(|| format!("no annotations for image {:?}", record.image_id))?;
        let parsed = parser::parse(&record.rec_text, mode)
            .map_err(|e| format!("image {}: {e}", record.image_id))?;
        let report = validate_against_annotations(&parsed.document, ann);
        println!(
            "{} unmatched_boxes {} unmatched_triplets {} unmentioned_relations {}",
            record.image_id,
            report.unmatched_box_count,
            report.unmatched_triplet_count,
            report.unmentioned_relation_count
        );
        if !report.document_is_consistent() {
            inconsistent += 1;
        }
    }
    eprintln!("{} image(s) checked, {} inconsistent", records.len(), inconsistent);
    Ok(if inconsistent == 0 { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{NormBox, SemanticTag};

    #[test]
    fn dot_renderer_quotes_and_structures() {
        let graph = SceneGraph {
            nodes: vec![
                crate::graph::Node {
                    id: 0,
                    tag: SemanticTag::new("a \"quoted\" person").unwrap(),
                    bbox: NormBox::new(1, 2, 3, 4).unwrap(),
                },
                crate::graph::Node {
                    id: 1,
                    tag: SemanticTag::new("grass").unwrap(),
                    bbox: NormBox::new(0, 444, 999, 999).unwrap(),
                },
            ],
            edges: vec![crate::graph::Edge {
                subject_id: 0,
                predicate: SemanticTag::new("standing on").unwrap(),
                object_id: 1,
            }],
        };
        let dot = render_dot(&graph);
        assert!(dot.starts_with("digraph scene {\n"));
        assert!(dot.ends_with("}\n"));
        assert!(dot.contains("n0 [label=\"a \\\"quoted\\\" person [1,2,3,4]\"];"));
        assert!(dot.contains("n1 [label=\"grass [0,444,999,999]\"];"));
        assert!(dot.contains("n0 -> n1 [label=\"standing on\"];"));
    }

    #[test]
    fn usage_and_version_exit_codes() {
        assert_eq!(run(["reckit", "--version"]), 0);
        assert_eq!(run(["reckit", "--help"]), 0);
        assert_eq!(run(["reckit", "no-such-command"]), 2);
        assert_eq!(run(["reckit", "parse"]), 2, "missing required input path");
        assert_eq!(run(["reckit", "crpe-gen", "x.jsonl"]), 2, "missing required --seed");
        assert_eq!(
            run(["reckit", "eval-sgg", "a", "b", "--iou-threshold", "1.5"]),
            2,
            "out-of-range threshold is a usage error"
        );
    }

    #[test]
    fn missing_input_file_is_a_work_error() {
        assert_eq!(run(["reckit", "parse", "/nonexistent/input.txt"]), 1);
    }

    #[test]
    fn iou_flag_parser_bounds() {
        assert!(parse_iou("0.5").is_ok());
        assert!(parse_iou("0").is_err());
        assert!(parse_iou("1").is_err());
        assert!(parse_iou("nan").is_err());
        assert!(parse_rank("1").is_ok());
        assert!(parse_rank("0").is_err());
    }
}
