//! Acceptance gate: one test per release criterion, each printing a single
//! PASS/FAIL line (run with `--nocapture` to see them on success).

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reckit::crpe::{
    circular_expand, corpus_stats, generate_items, overall_score, score, AnnotatedObject,
    AnnotatedRelation, AnnotationRecord, BenchmarkItem, CorpusStats, GenConfig, ResponseRecord,
    Split,
};
use reckit::graph::{to_scene_graph, to_triplets};
use reckit::metrics::{
    match_triplets, predcls_evaluate, predcls_prompt, predcls_queries, sgg_evaluate,
    ImageTriplets, LabelMatch, MetricsConfig, ScoreVector, ScoredQuery,
};
use reckit::parser::{parse, serialize, BoxGroup, ParseMode, RecDocument, RecSegment};
use reckit::types::{iou, ImageSize, NormBox, RelationTriplet, SemanticTag};

fn criterion<F: FnOnce() + std::panic::UnwindSafe>(name: &str, f: F) {
    match std::panic::catch_unwind(f) {
        Ok(()) => println!("criterion {name}: PASS"),
        Err(cause) => {
            println!("criterion {name}: FAIL");
            std::panic::resume_unwind(cause);
        }
    }
}

fn tag(s: &str) -> SemanticTag {
    SemanticTag::new(s).unwrap()
}

fn nb(x1: u16, y1: u16, x2: u16, y2: u16) -> NormBox {
    NormBox::new(x1, y1, x2, y2).unwrap()
}

fn triplet(st: &str, sb: NormBox, p: &str, ot: &str, ob: NormBox) -> RelationTriplet {
    RelationTriplet::new(tag(st), sb, tag(p), tag(ot), ob).unwrap()
}

// --- criterion 1: golden parse and conversion ------------------------------

const DETAILED: &str = "In the image, two <ref>people</ref><box>[[101, 252, 430, 963], \
[539, 246, 826, 984]]</box> are <pred>standing on</pred><box>[[101, 252, 430, 963], \
[539, 246, 826, 984]]</box><box>[[0, 444, 999, 999]]</box> a <ref>grass</ref>\
<box>[[0, 444, 999, 999]]</box>.";

const CAPTION: &str = "A <ref>girl</ref><box>[[101, 252, 430, 963]]</box> in a Pikachu \
suit standing <pred>beside</pred><box>[[101, 252, 430, 963]]</box>\
<box>[[539, 246, 826, 984]]</box> a <ref>girl</ref><box>[[539, 246, 826, 984]]</box>.";

#[test]
fn golden_parse_and_convert() {
    criterion("golden-parse-convert", || {
        let started = Instant::now();

        let parsed = parse(DETAILED, ParseMode::Strict).unwrap();
        assert!(parsed.warnings.is_empty());
        let build = to_scene_graph(&parsed.document).unwrap();
        assert!(build.warnings.is_empty());
        assert_eq!(build.graph.nodes.len(), 3);
        let mut got = to_triplets(&build.graph);
        got.sort();
        let person_a = nb(101, 252, 430, 963);
        let person_b = nb(539, 246, 826, 984);
        let grass = nb(0, 444, 999, 999);
        let mut want = vec![
            triplet("people", person_a, "standing on", "grass", grass),
            triplet("people", person_b, "standing on", "grass", grass),
        ];
        want.sort();
        assert_eq!(got, want);

        let parsed = parse(CAPTION, ParseMode::Strict).unwrap();
        assert!(parsed.warnings.is_empty());
        let build = to_scene_graph(&parsed.document).unwrap();
        assert!(build.warnings.is_empty());
        let got = to_triplets(&build.graph);
        let want = vec![triplet("girl", person_a, "beside", "girl", person_b)];
        assert_eq!(got, want);

        assert!(started.elapsed().as_secs_f64() < 1.0, "took {:?}", started.elapsed());
    });
}

// --- criterion 2: round trip and lenient totality --------------------------

fn gen_box(rng: &mut ChaCha8Rng) -> NormBox {
    let x1 = rng.random_range(0..999u16);
    let y1 = rng.random_range(0..999u16);
    let x2 = rng.random_range(x1 + 1..=999);
    let y2 = rng.random_range(y1 + 1..=999);
    nb(x1, y1, x2, y2)
}

fn gen_group(rng: &mut ChaCha8Rng, len: usize) -> BoxGroup {
    BoxGroup::new((0..len).map(|_| gen_box(rng)).collect()).unwrap()
}

fn gen_label(rng: &mut ChaCha8Rng) -> String {
    const WORDS: [&str; 8] =
        ["person", "grass", "dog", "umbrella", "standing on", "beside", "holding", "tree"];
    WORDS[rng.random_range(0..WORDS.len())].to_owned()
}

fn gen_text(rng: &mut ChaCha8Rng) -> String {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz ,.0123456789";
    let len = rng.random_range(1..20);
    (0..len).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())] as char).collect()
}

fn gen_document(rng: &mut ChaCha8Rng) -> RecDocument {
    let n = rng.random_range(1..=6);
    let mut segments = Vec::with_capacity(n);
    for _ in 0..n {
        segments.push(match rng.random_range(0..3u8) {
            0 => RecSegment::text(gen_text(rng)),
            1 => {
                let len = rng.random_range(1..=3);
                RecSegment::Ref { label: gen_label(rng), group: gen_group(rng, len) }
            }
            _ => {
                let n_subjects = rng.random_range(1..=3);
                let n_objects = if rng.random_range(0..2u8) == 0 { 1 } else { n_subjects };
                RecSegment::Pred {
                    label: gen_label(rng),
                    subject: gen_group(rng, n_subjects),
                    object: gen_group(rng, n_objects),
                }
            }
        });
    }
    RecDocument::from_segments(segments)
}

#[test]
fn round_trip_and_lenient_totality() {
    criterion("round-trip", || {
        let started = Instant::now();

        let mut rng = ChaCha8Rng::from_seed([11u8; 32]);
        for _ in 0..1_000 {
            let doc = gen_document(&mut rng);
            let text = serialize(&doc);
            let parsed = parse(&text, ParseMode::Strict).unwrap();
            assert!(parsed.warnings.is_empty());
            assert_eq!(parsed.document, doc);
        }

        // Lenient parsing is total: arbitrary bytes (lossily decoded) never
        // return an error. Half the strings are raw noise, half are noise
        // biased toward markup fragments so the demotion paths get hit.
        const FRAGMENTS: [&str; 14] = [
            "<ref>", "</ref>", "<pred>", "</pred>", "<box>", "</box>", "[[", "]]", ",", " ",
            "1000", "-3", "people", "[[101, 252, 430, 963]]",
        ];
        for case in 0..10_000 {
            let s = if case % 2 == 0 {
                let len = rng.random_range(0..=120);
                let bytes: Vec<u8> = (0..len).map(|_| rng.random_range(0..=255u8)).collect();
                String::from_utf8_lossy(&bytes).into_owned()
            } else {
                let len = rng.random_range(0..=30);
                (0..len).map(|_| FRAGMENTS[rng.random_range(0..FRAGMENTS.len())]).collect()
            };
            assert!(parse(&s, ParseMode::Lenient).is_ok(), "lenient failed on {s:?}");
        }

        assert!(started.elapsed().as_secs_f64() < 30.0, "took {:?}", started.elapsed());
    });
}

// --- criterion 3: headline score arithmetic --------------------------------

#[test]
fn overall_score_arithmetic() {
    criterion("overall-arithmetic", || {
        for (s, p, o, want) in [
            (69.21, 58.95, 65.34, 64.50),
            (57.44, 54.24, 55.21, 55.63),
            (45.66, 38.19, 31.60, 38.48),
        ] {
            let got = overall_score(s, p, o);
            assert!(
                (got - want).abs() <= 0.005,
                "overall({s}, {p}, {o}) = {got}, want {want} +/- 0.005"
            );
        }
    });
}

// --- criterion 4: circular scoring under known responders ------------------

fn synthetic_item(n: usize, split: Split) -> BenchmarkItem {
    BenchmarkItem::new(
        format!("img{n:05}/{split}/0"),
        split,
        format!("img{n:05}"),
        "Which choice is right?".to_owned(),
        ["alpha".into(), "beta".into(), "gamma".into(), "delta".into()],
        n % 4,
        false,
    )
    .unwrap()
}

fn respond_with(
    items: &[BenchmarkItem],
    mut choose: impl FnMut(&reckit::crpe::CircularVariant) -> usize,
) -> (Vec<reckit::crpe::CircularVariant>, Vec<ResponseRecord>) {
    let mut variants = Vec::new();
    let mut responses = Vec::new();
    for item in items {
        for v in circular_expand(item) {
            let chosen = choose(&v);
            responses.push(ResponseRecord::new(v.item_id.clone(), v.rotation, chosen).unwrap());
            variants.push(v);
        }
    }
    (variants, responses)
}

#[test]
fn circular_scoring_statistics() {
    criterion("circular-eval", || {
        let started = Instant::now();

        // A corpus covering all four splits: the oracle scores 100 on each,
        // a fixed-first-choice responder exactly 0 (the correct answer lands
        // at index 0 in exactly one of the four rotations).
        let mixed: Vec<BenchmarkItem> = (0..200)
            .map(|n| synthetic_item(n, Split::ALL[n % 4]))
            .collect();
        let (variants, responses) = respond_with(&mixed, |v| v.answer_index);
        let scores = score(&mixed, &variants, &responses).unwrap();
        for tally in [&scores.existence, &scores.subject, &scores.predicate, &scores.object] {
            assert_eq!(tally.accuracy, 100.0);
            assert_eq!(tally.correct, tally.total);
        }
        assert_eq!(scores.overall, 100.0);

        let (variants, responses) = respond_with(&mixed, |_| 0);
        let scores = score(&mixed, &variants, &responses).unwrap();
        for tally in [&scores.existence, &scores.subject, &scores.predicate, &scores.object] {
            assert_eq!(tally.accuracy, 0.0);
            assert_eq!(tally.correct, 0);
        }
        assert_eq!(scores.overall, 0.0);

        // A uniform random responder passes a rotation with probability 1/4,
        // so a full item with probability (1/4)^4. Over 10,000 items the
        // observed rate must sit within 3 standard errors of that.
        let big: Vec<BenchmarkItem> =
            (0..10_000).map(|n| synthetic_item(n, Split::Subject)).collect();
        let mut rng = ChaCha8Rng::from_seed([4u8; 32]);
        let (variants, responses) = respond_with(&big, |_| rng.random_range(0..4));
        let scores = score(&big, &variants, &responses).unwrap();
        let p = 0.25f64.powi(4);
        let se = (p * (1.0 - p) / 10_000.0).sqrt();
        let rate = scores.subject.accuracy / 100.0;
        assert!(
            (rate - p).abs() <= 3.0 * se,
            "random responder rate {rate} outside {p} +/- {}",
            3.0 * se
        );

        assert!(started.elapsed().as_secs_f64() < 10.0, "took {:?}", started.elapsed());
    });
}

// --- criterion 5: matching equals brute-force optimum ----------------------

/// Maximum bipartite matching by exhaustive search over the given
/// eligibility matrix: for each prediction, either skip it or assign it any
/// unused eligible ground truth.
fn brute_force_max(adj: &[Vec<bool>], used: &mut [bool], u: usize) -> usize {
    if u == adj.len() {
        return 0;
    }
    let mut best = brute_force_max(adj, used, u + 1);
    for g in 0..used.len() {
        if adj[u][g] && !used[g] {
            used[g] = true;
            best = best.max(1 + brute_force_max(adj, used, u + 1));
            used[g] = false;
        }
    }
    best
}

/// Tiny pools so label agreement and IoU collisions are both common: the
/// first three boxes overlap each other above 0.5, the last two touch
/// nothing but themselves.
const CLUTTER_TAGS: [&str; 2] = ["cat", "dog"];
const CLUTTER_PREDS: [&str; 2] = ["on", "near"];

fn clutter_box(rng: &mut ChaCha8Rng) -> NormBox {
    let pool = [
        nb(0, 0, 100, 100),
        nb(0, 10, 100, 110),
        nb(5, 0, 105, 100),
        nb(200, 200, 320, 320),
        nb(500, 500, 700, 700),
    ];
    pool[rng.random_range(0..pool.len())]
}

fn gen_cluttered_triplet(rng: &mut ChaCha8Rng) -> RelationTriplet {
    loop {
        let candidate = RelationTriplet::new(
            tag(CLUTTER_TAGS[rng.random_range(0..CLUTTER_TAGS.len())]),
            clutter_box(rng),
            tag(CLUTTER_PREDS[rng.random_range(0..CLUTTER_PREDS.len())]),
            tag(CLUTTER_TAGS[rng.random_range(0..CLUTTER_TAGS.len())]),
            clutter_box(rng),
        );
        if let Ok(t) = candidate {
            return t;
        }
    }
}

/// A prediction that keeps `gt`'s labels but re-rolls both boxes, so crowded
/// eligibility graphs (several predictions per ground truth and vice versa)
/// show up often.
fn gen_noisy_copy(rng: &mut ChaCha8Rng, gt: &RelationTriplet) -> RelationTriplet {
    loop {
        let candidate = RelationTriplet::new(
            gt.subject_tag.clone(),
            clutter_box(rng),
            gt.predicate.clone(),
            gt.object_tag.clone(),
            clutter_box(rng),
        );
        if let Ok(t) = candidate {
            return t;
        }
    }
}

#[test]
fn matching_equals_brute_force() {
    criterion("matching-oracle", || {
        let config = MetricsConfig::new(0.5, LabelMatch::CaseInsensitiveExact).unwrap();
        let mut rng = ChaCha8Rng::from_seed([5u8; 32]);
        let mut nontrivial = 0usize;
        for _ in 0..200 {
            let gts: Vec<RelationTriplet> =
                (0..rng.random_range(0..=6)).map(|_| gen_cluttered_triplet(&mut rng)).collect();
            let preds: Vec<RelationTriplet> = (0..rng.random_range(0..=6))
                .map(|_| match gts.is_empty() || rng.random_range(0..2u8) == 0 {
                    true => gen_cluttered_triplet(&mut rng),
                    false => {
                        let donor = &gts[rng.random_range(0..gts.len())];
                        gen_noisy_copy(&mut rng, donor)
                    }
                })
                .collect();

            // Eligibility oracle: a 1x1 matching succeeds iff the pair is
            // eligible, so the brute force exercises only the assignment.
            let adj: Vec<Vec<bool>> = preds
                .iter()
                .map(|p| {
                    gts.iter()
                        .map(|g| {
                            match_triplets(
                                std::slice::from_ref(p),
                                std::slice::from_ref(g),
                                &config,
                            )
                            .len() == 1
                        })
                        .collect()
                })
                .collect();
            let mut used = vec![false; gts.len()];
            let want = brute_force_max(&adj, &mut used, 0);
            let got = match_triplets(&preds, &gts, &config).len();
            assert_eq!(got, want, "preds {preds:?} gts {gts:?}");
            if want > 0 {
                nontrivial += 1;
            }
        }
        assert!(nontrivial >= 20, "only {nontrivial} instances had a non-empty matching");
    });
}

// --- criterion 6: IoU against unit-cell counting ----------------------------

/// IoU by counting integer unit cells. For integer-coordinate boxes the cell
/// count equals the continuous area exactly, so this is an independent oracle
/// for the closed-form computation.
fn cell_iou(a: &NormBox, b: &NormBox) -> f64 {
    let inside = |bx: &NormBox, x: u16, y: u16| {
        x >= bx.x1() && x < bx.x2() && y >= bx.y1() && y < bx.y2()
    };
    let x_lo = a.x1().min(b.x1());
    let x_hi = a.x2().max(b.x2());
    let y_lo = a.y1().min(b.y1());
    let y_hi = a.y2().max(b.y2());
    let mut inter = 0u64;
    let mut union = 0u64;
    for x in x_lo..x_hi {
        for y in y_lo..y_hi {
            let in_a = inside(a, x, y);
            let in_b = inside(b, x, y);
            if in_a && in_b {
                inter += 1;
            }
            if in_a || in_b {
                union += 1;
            }
        }
    }
    inter as f64 / union as f64
}

#[test]
fn iou_matches_cell_counting() {
    criterion("iou-oracle", || {
        let mut rng = ChaCha8Rng::from_seed([6u8; 32]);
        let small_box = |rng: &mut ChaCha8Rng| {
            let x1 = rng.random_range(0..=300u16);
            let y1 = rng.random_range(0..=300u16);
            let x2 = x1 + rng.random_range(1..=60u16);
            let y2 = y1 + rng.random_range(1..=60u16);
            nb(x1, y1, x2, y2)
        };
        for _ in 0..1_000 {
            let a = small_box(&mut rng);
            let b = small_box(&mut rng);
            let got = iou(&a, &b);
            let want = cell_iou(&a, &b);
            assert!((got - want).abs() <= 1e-3, "iou({a}, {b}) = {got}, cells say {want}");
            assert_eq!(iou(&a, &a), 1.0);

            // Sharing only an edge is zero overlap, exactly.
            let touching = nb(a.x2(), a.y1(), a.x2() + 10, a.y2());
            assert_eq!(iou(&a, &touching), 0.0);
            let far = nb(a.x1(), a.y2().min(900) + 50, a.x2(), a.y2().min(900) + 80);
            assert_eq!(iou(&a, &far), 0.0);
        }
    });
}

// --- criterion 7: label matching is exact ----------------------------------

#[test]
fn near_synonyms_do_not_match() {
    criterion("exact-labels", || {
        let subject = nb(100, 100, 400, 900);
        let ground = nb(0, 444, 999, 999);
        let preds = vec![ImageTriplets {
            image_id: "img0".into(),
            triplets: vec![triplet("person", subject, "standing on", "grass", ground)],
        }];
        let gts = vec![ImageTriplets {
            image_id: "img0".into(),
            triplets: vec![triplet("people", subject, "standing on", "grass", ground)],
        }];
        let config = MetricsConfig::default();
        let result = sgg_evaluate(&preds, &gts, &config).unwrap();
        assert_eq!(result.recall, 0.0);
        assert_eq!(result.mean_recall, 0.0);

        // Same instance with the labels agreeing scores 1, so the zero above
        // is the label policy and nothing else.
        let preds = vec![ImageTriplets {
            image_id: "img0".into(),
            triplets: vec![triplet("people", subject, "standing on", "grass", ground)],
        }];
        let result = sgg_evaluate(&preds, &gts, &config).unwrap();
        assert_eq!(result.recall, 1.0);
    });
}

// --- criterion 8: generated benchmarks re-validate -------------------------

struct SyntheticCorpus {
    records: Vec<AnnotationRecord>,
}

fn build_corpus() -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::from_seed([8u8; 32]);
    let tags: Vec<String> = (0..20).map(|i| format!("tag{i:02}")).collect();
    let preds: Vec<String> = (0..8).map(|i| format!("relpred{i}")).collect();
    let size = ImageSize::new(640, 480).unwrap();
    let mut records = Vec::new();
    for img in 0..50 {
        let n_obj = rng.random_range(3..=6);
        let mut boxes = BTreeSet::new();
        while boxes.len() < n_obj {
            boxes.insert(gen_box(&mut rng));
        }
        let objects: Vec<AnnotatedObject> = boxes
            .into_iter()
            .enumerate()
            .map(|(i, bbox)| AnnotatedObject {
                id: i as u32,
                tag: tag(&tags[rng.random_range(0..tags.len())]),
                bbox,
            })
            .collect();
        let mut relations = Vec::new();
        for _ in 0..rng.random_range(2..=5) {
            for _attempt in 0..20 {
                let i = rng.random_range(0..objects.len());
                let j = rng.random_range(0..objects.len());
                if i == j || objects[i].tag == objects[j].tag {
                    continue;
                }
                relations.push(AnnotatedRelation {
                    subject_id: objects[i].id,
                    predicate: tag(&preds[rng.random_range(0..preds.len())]),
                    object_id: objects[j].id,
                });
                break;
            }
        }
        records.push(
            AnnotationRecord::new(format!("img{img:03}"), size, objects, relations).unwrap(),
        );
    }
    SyntheticCorpus { records }
}

/// Serialized items plus their circular expansions for one image, the byte
/// content the determinism checks compare.
fn image_output(ann: &AnnotationRecord, stats: &CorpusStats, seed: u64) -> String {
    let mut out = String::new();
    for item in generate_items(ann, stats, seed, &GenConfig::default()).items {
        out.push_str(&serde_json::to_string(&item).unwrap());
        out.push('\n');
        for v in circular_expand(&item) {
            out.push_str(&serde_json::to_string(&v).unwrap());
            out.push('\n');
        }
    }
    out
}

fn tag_relations(ann: &AnnotationRecord) -> BTreeSet<(String, String, String)> {
    ann.relations()
        .iter()
        .map(|rel| {
            let s = ann.object_by_id(rel.subject_id).unwrap();
            let o = ann.object_by_id(rel.object_id).unwrap();
            (s.tag.to_string(), rel.predicate.to_string(), o.tag.to_string())
        })
        .collect()
}

fn question_parts<'q>(question: &'q str, prefix: &str, separator: &str) -> (&'q str, &'q str) {
    let body = question
        .strip_prefix(prefix)
        .and_then(|rest| rest.strip_suffix('?'))
        .unwrap_or_else(|| panic!("question {question:?} does not match template"));
    let at = body.find(separator).expect("separator present");
    (&body[..at], &body[at + separator.len()..])
}

fn validate_item(item: &BenchmarkItem, ann: &AnnotationRecord, stats: &CorpusStats) {
    let choices: BTreeSet<&String> = item.choices.iter().collect();
    assert_eq!(choices.len(), 4, "choices not distinct in {item:?}");
    assert!(item.choices.iter().all(|c| !c.is_empty()));
    let correct = item.correct_answer().to_owned();
    assert_eq!(item.choices.iter().filter(|c| **c == correct).count(), 1);

    let present = ann.present_tags();
    let relations = tag_relations(ann);
    let negatives: Vec<&String> =
        item.choices.iter().filter(|c| **c != correct).collect();

    match item.split {
        Split::Existence => {
            assert!(present.contains(&correct));
            for n in negatives {
                assert!(stats.tag_vocabulary().contains(n), "{n} not in vocabulary");
                assert!(!present.contains(n), "{n} is present in {}", ann.image_id());
            }
        }
        Split::Subject => {
            let (p, o) = question_parts(&item.question, "What is ", " the ");
            assert_ne!(correct, o, "subject and object tags must differ");
            assert!(relations.contains(&(correct.clone(), p.into(), o.into())));
            for n in negatives {
                assert!(present.contains(n));
                assert_ne!(n, &correct);
                assert!(
                    !relations.contains(&(n.clone(), p.into(), o.into())),
                    "negative {n} is a true subject for ({p}, {o})"
                );
            }
        }
        Split::Predicate => {
            let (s, o) = question_parts(&item.question, "What is the relation between ", " and ");
            assert_ne!(s, o, "subject and object tags must differ");
            assert!(relations.contains(&(s.into(), correct.clone(), o.into())));
            for n in negatives {
                assert!(
                    stats.p_given_subject(n, s) > 0.0,
                    "negative {n} never has subject {s} in the corpus"
                );
                assert!(
                    stats.p_given_object(n, o) > 0.0,
                    "negative {n} never has object {o} in the corpus"
                );
                assert!(!relations.contains(&(s.into(), n.clone(), o.into())));
            }
        }
        Split::Object => {
            let (s, p) = question_parts(&item.question, "What is the ", " ");
            assert_ne!(correct, s, "subject and object tags must differ");
            assert!(relations.contains(&(s.into(), p.into(), correct.clone())));
            for n in negatives {
                assert!(present.contains(n));
                assert_ne!(n, &correct);
                assert!(!relations.contains(&(s.into(), p.into(), n.clone())));
            }
        }
    }
}

#[test]
fn generated_benchmark_revalidates() {
    criterion("generation-validity", || {
        let corpus = build_corpus();
        let stats = corpus_stats(&corpus.records).unwrap();
        let seed = 0xA11CE;

        let mut per_split: BTreeMap<Split, usize> = BTreeMap::new();
        for ann in &corpus.records {
            let outcome = generate_items(ann, &stats, seed, &GenConfig::default());
            for item in &outcome.items {
                assert_eq!(item.image_id, ann.image_id());
                validate_item(item, ann, &stats);
                *per_split.entry(item.split).or_default() += 1;
            }
        }
        assert_eq!(per_split.get(&Split::Existence), Some(&50));
        for split in [Split::Subject, Split::Predicate, Split::Object] {
            assert!(per_split.get(&split).copied().unwrap_or(0) > 0, "no {split} items");
        }

        // Same seed, same bytes.
        let sequential: String =
            corpus.records.iter().map(|ann| image_output(ann, &stats, seed)).collect();
        let again: String =
            corpus.records.iter().map(|ann| image_output(ann, &stats, seed)).collect();
        assert_eq!(sequential, again);

        // Same bytes no matter how the images are spread over threads.
        for workers in [2usize, 5] {
            let slots: Vec<std::sync::Mutex<String>> =
                corpus.records.iter().map(|_| std::sync::Mutex::new(String::new())).collect();
            std::thread::scope(|scope| {
                for w in 0..workers {
                    let stats = &stats;
                    let records = &corpus.records;
                    let slots = &slots;
                    scope.spawn(move || {
                        for i in (w..records.len()).step_by(workers) {
                            *slots[i].lock().unwrap() = image_output(&records[i], stats, seed);
                        }
                    });
                }
            });
            let parallel: String =
                slots.iter().map(|s| s.lock().unwrap().clone()).collect();
            assert_eq!(parallel, sequential, "{workers}-thread output differs");
        }
    });
}

// --- criterion 9: predicate-classification protocol ------------------------

#[test]
fn predcls_protocol() {
    criterion("predcls-protocol", || {
        assert_eq!(
            predcls_prompt(&tag("person"), &tag("umbrella")),
            "What is the relation between the person and the umbrella? \
             Answer the question using a single word or phrase."
        );

        let mut rng = ChaCha8Rng::from_seed([9u8; 32]);
        const TAGS: [&str; 5] = ["cat", "dog", "person", "tree", "car"];
        const PREDS: [&str; 6] = ["on", "near", "holding", "behind", "under", "riding"];

        for n in 2..=8usize {
            let objects: Vec<(SemanticTag, NormBox)> = (0..n)
                .map(|i| (tag(TAGS[i % TAGS.len()]), nb(0, 10 * i as u16, 50, 10 * i as u16 + 5)))
                .collect();
            let queries = predcls_queries("img", &objects);
            assert_eq!(queries.len(), n * (n - 1));
            for q in &queries {
                assert_eq!(q.prompt_text, predcls_prompt(&q.subject.tag, &q.object.tag));
                assert_ne!((q.subject.tag.clone(), q.subject.bbox), (q.object.tag.clone(), q.object.bbox));
            }
        }

        // R@K never decreases in K, on randomly scored instances.
        let ks = [1usize, 2, 5, 10, 20];
        for case in 0..100 {
            let image_id = format!("case{case}");
            let m = rng.random_range(2..=5usize);
            let mut boxes = BTreeSet::new();
            while boxes.len() < m {
                boxes.insert(gen_box(&mut rng));
            }
            let objects: Vec<(SemanticTag, NormBox)> = boxes
                .into_iter()
                .map(|b| (tag(TAGS[rng.random_range(0..TAGS.len())]), b))
                .collect();

            let mut gt = Vec::new();
            for i in 0..m {
                for j in 0..m {
                    if i != j && rng.random_range(0..3u8) == 0 {
                        gt.push(triplet(
                            objects[i].0.as_str(),
                            objects[i].1,
                            PREDS[rng.random_range(0..PREDS.len())],
                            objects[j].0.as_str(),
                            objects[j].1,
                        ));
                    }
                }
            }
            if gt.is_empty() {
                gt.push(triplet(
                    objects[0].0.as_str(),
                    objects[0].1,
                    PREDS[0],
                    objects[1].0.as_str(),
                    objects[1].1,
                ));
            }

            let pairs: BTreeSet<(NormBox, NormBox)> =
                gt.iter().map(|t| (t.subject_box, t.object_box)).collect();
            let scored: Vec<ScoredQuery> = pairs
                .into_iter()
                .map(|(sb, ob)| {
                    let scores: BTreeMap<String, f64> = PREDS
                        .iter()
                        .map(|p| ((*p).to_owned(), rng.random_range(0.0..1.0)))
                        .collect();
                    ScoredQuery {
                        image_id: image_id.clone(),
                        subject_box: sb,
                        object_box: ob,
                        scores: ScoreVector::new(scores).unwrap(),
                    }
                })
                .collect();

            let gts = vec![ImageTriplets { image_id: image_id.clone(), triplets: gt }];
            let result = predcls_evaluate(&scored, &gts, &ks).unwrap();
            for pair in ks.windows(2) {
                assert!(
                    result.recall_at[&pair[0]] <= result.recall_at[&pair[1]] + 1e-12,
                    "R@{} > R@{} in case {case}",
                    pair[0],
                    pair[1]
                );
                assert!(
                    result.mean_recall_at[&pair[0]] <= result.mean_recall_at[&pair[1]] + 1e-12,
                    "mR@{} > mR@{} in case {case}",
                    pair[0],
                    pair[1]
                );
            }
        }
    });
}
