//! Test oracles and generators shared by the integration suites.
//!
//! Everything here is written independently of the library algorithms it
//! checks: tree edit distance by exhaustive mapping search, BLEU by greedy
//! n-gram matching, retrieval by direct application of the selection rules,
//! gradients by central differences.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use mwpcl_core::corpus::Origin;
use mwpcl_core::equation::{EquationTree, Leaf, Operator, SlotId, Slots};
use mwpcl_core::retrieval::{EqStrategy, TextMetric, TripletPair};
use mwpcl_core::similarity::{bi_bleu, cosine_similarity, equation_similarity, EmbeddingTable, OrderedTree};
use mwpcl_core::trainer::{batch_loss, EncodedTriplet, EncoderParams};
use mwpcl_core::{ProblemRecord, TrainConfig};
use rand::seq::IndexedRandom;
use rand::Rng;

// ---------------------------------------------------------------------------
// Tree edit distance by mapping enumeration

/// Tree in preorder with parent links.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatTree<L> {
    pub labels: Vec<L>,
    pub parent: Vec<Option<usize>>,
}

pub fn flatten<L: Clone>(tree: &OrderedTree<L>) -> FlatTree<L> {
    fn walk<L: Clone>(t: &OrderedTree<L>, parent: Option<usize>, out: &mut FlatTree<L>) {
        let me = out.labels.len();
        out.labels.push(t.label.clone());
        out.parent.push(parent);
        for c in &t.children {
            walk(c, Some(me), out);
        }
    }
    let mut out = FlatTree { labels: Vec::new(), parent: Vec::new() };
    walk(tree, None, &mut out);
    out
}

/// Shape-only relations: `anc[i][j]` when i is a proper ancestor of j,
/// `left[i][j]` when i precedes j and is not its ancestor.
struct Relations {
    anc: Vec<Vec<bool>>,
    left: Vec<Vec<bool>>,
}

fn relations(parent: &[Option<usize>]) -> Relations {
    let n = parent.len();
    let mut anc = vec![vec![false; n]; n];
    for j in 0..n {
        let mut p = parent[j];
        while let Some(i) = p {
            anc[i][j] = true;
            p = parent[i];
        }
    }
    let left = (0..n)
        .map(|i| (0..n).map(|j| i < j && !anc[i][j]).collect())
        .collect();
    Relations { anc, left }
}

/// Every valid ordered edit mapping between two shapes: one-to-one pairs
/// preserving ancestry and sibling order.
pub fn valid_mappings(a: &[Option<usize>], b: &[Option<usize>]) -> Vec<Vec<(usize, usize)>> {
    let ra = relations(a);
    let rb = relations(b);
    let mut out = Vec::new();
    let mut current = Vec::new();
    let mut used = vec![false; b.len()];
    fn rec(
        i: usize,
        ra: &Relations,
        rb: &Relations,
        used: &mut Vec<bool>,
        current: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if i == ra.anc.len() {
            out.push(current.clone());
            return;
        }
        rec(i + 1, ra, rb, used, current, out);
        for j in 0..rb.anc.len() {
            if used[j] {
                continue;
            }
            let consistent = current.iter().all(|&(pi, pj)| {
                ra.anc[pi][i] == rb.anc[pj][j]
                    && ra.anc[i][pi] == rb.anc[j][pj]
                    && ra.left[pi][i] == rb.left[pj][j]
                    && ra.left[i][pi] == rb.left[j][pj]
            });
            if consistent {
                used[j] = true;
                current.push((i, j));
                rec(i + 1, ra, rb, used, current, out);
                current.pop();
                used[j] = false;
            }
        }
    }
    rec(0, &ra, &rb, &mut used, &mut current, &mut out);
    out
}

/// Minimum unit-cost edit script over the given mappings.
pub fn cost_over_mappings<L: PartialEq>(
    mappings: &[Vec<(usize, usize)>],
    a: &[L],
    b: &[L],
) -> u32 {
    mappings
        .iter()
        .map(|m| {
            let relabels = m.iter().filter(|&&(i, j)| a[i] != b[j]).count();
            (a.len() + b.len() - 2 * m.len() + relabels) as u32
        })
        .min()
        .expect("the empty mapping is always valid")
}

pub fn brute_force_ted<L: PartialEq + Clone>(a: &OrderedTree<L>, b: &OrderedTree<L>) -> u32 {
    let fa = flatten(a);
    let fb = flatten(b);
    cost_over_mappings(&valid_mappings(&fa.parent, &fb.parent), &fa.labels, &fb.labels)
}

/// Label of an equation node as the TED sees it.
pub fn label_tree(t: &EquationTree) -> OrderedTree<String> {
    match t {
        EquationTree::Leaf(l) => OrderedTree::leaf(l.token()),
        EquationTree::Node { op, left, right } => {
            OrderedTree::new(op.symbol().to_string(), vec![label_tree(left), label_tree(right)])
        }
    }
}

/// All full binary equation trees with at most `max_nodes` nodes.
pub fn all_equation_trees(max_nodes: usize, ops: &[Operator], leaves: &[u32]) -> Vec<EquationTree> {
    let mut by_size: Vec<Vec<EquationTree>> = vec![Vec::new(); max_nodes + 1];
    if max_nodes >= 1 {
        by_size[1] = leaves.iter().map(|&s| EquationTree::slot(s)).collect();
    }
    for n in (3..=max_nodes).step_by(2) {
        let mut trees = Vec::new();
        for ls in (1..n - 1).step_by(2) {
            let rs = n - 1 - ls;
            for op in ops {
                for l in &by_size[ls] {
                    for r in &by_size[rs] {
                        trees.push(EquationTree::node(*op, l.clone(), r.clone()));
                    }
                }
            }
        }
        by_size[n] = trees;
    }
    by_size.into_iter().flatten().collect()
}

/// All ordered trees with exactly `n` nodes over `labels`.
pub fn ordered_trees_of_size<L: Clone>(n: usize, labels: &[L]) -> Vec<OrderedTree<L>> {
    fn forests<L: Clone>(k: usize, labels: &[L]) -> Vec<Vec<OrderedTree<L>>> {
        if k == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for first in 1..=k {
            for head in ordered_trees_of_size(first, labels) {
                for tail in forests(k - first, labels) {
                    let mut f = vec![head.clone()];
                    f.extend(tail);
                    out.push(f);
                }
            }
        }
        out
    }
    if n == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for label in labels {
        for children in forests(n - 1, labels) {
            out.push(OrderedTree::new(label.clone(), children));
        }
    }
    out
}

pub fn all_ordered_trees<L: Clone>(max_nodes: usize, labels: &[L]) -> Vec<OrderedTree<L>> {
    (1..=max_nodes).flat_map(|n| ordered_trees_of_size(n, labels)).collect()
}

/// Random ordered tree: each new node becomes the last child of a node on
/// the current rightmost path, which reaches every ordered shape.
pub fn random_ordered_tree<L: Clone, R: Rng>(rng: &mut R, n: usize, labels: &[L]) -> OrderedTree<L> {
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut rightmost = vec![0usize];
    for node in 1..n {
        let depth = rng.random_range(0..rightmost.len());
        let p = rightmost[depth];
        parent.push(Some(p));
        rightmost.truncate(depth + 1);
        rightmost.push(node);
    }
    let lab: Vec<L> = (0..n).map(|_| labels.choose(rng).unwrap().clone()).collect();
    fn build<L: Clone>(i: usize, parent: &[Option<usize>], lab: &[L]) -> OrderedTree<L> {
        let children = (0..parent.len())
            .filter(|&j| parent[j] == Some(i))
            .map(|j| build(j, parent, lab))
            .collect();
        OrderedTree::new(lab[i].clone(), children)
    }
    build(0, &parent, &lab)
}

// ---------------------------------------------------------------------------
// BLEU by greedy matching

/// Sentence BLEU-4, no smoothing, orders capped at the candidate length.
pub fn reference_bleu<T: PartialEq>(candidate: &[T], reference: &[T]) -> f64 {
    let orders = candidate.len().min(4);
    let mut product = 1.0;
    for n in 1..=orders {
        let cand: Vec<&[T]> = candidate.windows(n).collect();
        let refs: Vec<&[T]> = reference.windows(n).collect();
        let mut taken = vec![false; refs.len()];
        let mut matched = 0usize;
        for g in &cand {
            if let Some(k) = (0..refs.len()).find(|&k| !taken[k] && refs[k] == *g) {
                taken[k] = true;
                matched += 1;
            }
        }
        product *= matched as f64 / cand.len() as f64;
    }
    if product == 0.0 {
        return 0.0;
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    bp * product.powf(1.0 / orders as f64)
}

pub fn reference_bi_bleu<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    0.5 * (reference_bleu(a, b) + reference_bleu(b, a))
}

/// Fixed pairs with two-direction averaged BLEU from a third-party
/// implementation (uniform weights over the feasible orders, no smoothing).
/// Values around 1e-77 and below are that implementation's stand-in for a
/// zero precision.
pub const BLEU_REFERENCE_SUITE: [(&str, &str, f64); 20] = [
    ("the cat sat on the mat", "the cat is on the mat", 7.262123179505913e-78),
    ("a b c d e f", "a b c x e f", 7.262123179505913e-78),
    ("tom has n1 apples .", "tom has n1 apples and n2 pears .", 0.3768118261653411),
    ("tom has n1 apples and n2 pears .", "tom has n1 apples .", 0.3768118261653411),
    ("the the the the", "the cat the dog", 1.5319719891192393e-231),
    ("how many apples does tom have now ?", "how many pears does mary have now ?", 5.87583260478785e-78),
    ("a", "a", 1.0),
    ("a b", "a b c d e", 0.11156508007421491),
    ("a b c", "c b a", 7.910967875272498e-206),
    ("x y z w", "x y z w x y z w", 0.35680011290669167),
    ("he buys n2 more books at the store .", "she sells n2 books at the market .", 4.530298279523123e-78),
    ("one two three four five six seven eight", "one two three four five six seven nine", 0.8408964152537145),
    ("小 明 有 n1 个 苹 果 。", "小 红 有 n1 个 苹 果 。", 0.7071067811865475),
    ("n1 n2 n3 n4 n5", "n1 n2 n3 n4 n5 n6", 0.7892832193647872),
    ("a b a b a b", "a b a b", 0.5573317039336241),
    ("the price is n1 dollars per kilogram .", "the price of n1 kilograms is n2 dollars .", 7.772958657488535e-155),
    ("what is the total cost ?", "what is the total ?", 0.5581075166895904),
    ("apples and pears and plums and apples", "pears and apples and plums", 1.1195132726542244e-154),
    ("q w e r t y u i o p", "q w e r t y u i o p", 1.0),
    ("a rope is n1 meters long . it is cut n2 times .", "a rope is n1 meters long . n2 meters are cut off .", 0.5142401605028263),
];

pub fn random_tokens<R: Rng>(rng: &mut R, vocab: &[&str], max_len: usize) -> Vec<String> {
    let len = rng.random_range(1..=max_len);
    (0..len).map(|_| vocab.choose(rng).unwrap().to_string()).collect()
}

// ---------------------------------------------------------------------------
// Synthetic records

const NAMES: [&str; 8] = ["Tom", "Amy", "Lily", "Jack", "Sam", "Nina", "Omar", "Wei"];
const OBJECTS: [&str; 8] = ["apples", "books", "coins", "pens", "cards", "shells", "stamps", "eggs"];
const VERBS: [&str; 6] = ["has", "buys", "finds", "sells", "gives", "keeps"];

/// Random equation of depth at most `depth` over slots `1..=slots`
/// (occasionally the constant 2).
pub fn random_equation<R: Rng>(rng: &mut R, depth: usize, slots: u32) -> EquationTree {
    let ops = [Operator::Add, Operator::Sub, Operator::Mul, Operator::Div];
    if depth == 0 || rng.random_bool(0.3) {
        return if rng.random_bool(0.05) {
            EquationTree::constant(2.0)
        } else {
            EquationTree::slot(rng.random_range(1..=slots))
        };
    }
    EquationTree::node(
        *ops.choose(rng).unwrap(),
        random_equation(rng, depth - 1, slots),
        random_equation(rng, depth - 1, slots),
    )
}

/// A valid record for `equation`: one declarative sentence per slot, the
/// question last. With `numeral_in_question` the last slot is mentioned in
/// the question instead.
pub fn record_for<R: Rng>(
    rng: &mut R,
    id: &str,
    equation: EquationTree,
    slots: u32,
    numeral_in_question: bool,
) -> Option<ProblemRecord> {
    let values: Slots = (1..=slots)
        .map(|s| (SlotId(s), (rng.random_range(1.0..100.0f64) * 100.0).round() / 100.0))
        .collect();
    let answer = equation.evaluate(&values).ok()?;
    if !answer.is_finite() || answer.abs() > 1e9 {
        return None;
    }
    let declared = if numeral_in_question && slots > 1 { slots - 1 } else { slots };
    let mut sentences = Vec::new();
    for s in 1..=declared {
        sentences.push(
            [
                NAMES.choose(rng).unwrap().to_string(),
                VERBS.choose(rng).unwrap().to_string(),
                format!("n{s}"),
                OBJECTS.choose(rng).unwrap().to_string(),
                ".".into(),
            ]
            .to_vec(),
        );
    }
    let obj = OBJECTS.choose(rng).unwrap().to_string();
    let mut question: Vec<String> = ["how", "many", obj.as_str()].iter().map(|s| s.to_string()).collect();
    if declared < slots {
        question.extend(["with".to_string(), format!("n{slots}"), "more".to_string()]);
    }
    question.extend(["are".to_string(), "there".to_string(), "?".to_string()]);
    sentences.push(question);
    let record = ProblemRecord {
        id: id.to_string(),
        question_index: sentences.len() - 1,
        sentences,
        slots: values,
        equation,
        answer,
        origin: Origin::Train,
    };
    record.validate().ok()?;
    Some(record)
}

/// `count` valid records with random depth-limited equations.
pub fn synthetic_records<R: Rng>(rng: &mut R, count: usize, max_depth: usize) -> Vec<ProblemRecord> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let slots = rng.random_range(1..=4);
        let depth = rng.random_range(1..=max_depth);
        let eq = random_equation(rng, depth, slots);
        let in_question = rng.random_bool(0.25);
        if let Some(r) = record_for(rng, &format!("s{:05}", out.len()), eq, slots, in_question) {
            out.push(r);
        }
    }
    out
}

/// A pool for retrieval checks: few templates, small vocabulary (so text
/// duplicates and ties occur), random embeddings for every record.
pub fn retrieval_pool<R: Rng>(rng: &mut R, size: usize) -> (Vec<ProblemRecord>, EmbeddingTable) {
    let template_count = rng.random_range(2..=12);
    let templates: Vec<(EquationTree, u32)> = (0..template_count)
        .map(|_| {
            let slots = rng.random_range(2..=3);
            (random_equation(rng, 2, slots), slots)
        })
        .collect();
    let words = ["a", "b", "c", "d", "e"];
    let mut records = Vec::new();
    let mut attempts = 0;
    while records.len() < size && attempts < size * 50 {
        attempts += 1;
        let (eq, slots) = templates.choose(rng).unwrap().clone();
        let values: Slots = (1..=slots).map(|s| (SlotId(s), rng.random_range(1..20) as f64)).collect();
        let Ok(answer) = eq.evaluate(&values) else { continue };
        let mut sentence: Vec<String> = Vec::new();
        for s in 1..=slots {
            sentence.push(words.choose(rng).unwrap().to_string());
            sentence.push(format!("n{s}"));
        }
        sentence.push(words.choose(rng).unwrap().to_string());
        sentence.push("?".into());
        let r = ProblemRecord {
            id: format!("r{:03}", records.len()),
            sentences: vec![sentence],
            question_index: 0,
            slots: values,
            equation: eq,
            answer,
            origin: Origin::Train,
        };
        if r.validate().is_ok() {
            records.push(r);
        }
    }
    let mut table = EmbeddingTable::new(4);
    for r in &records {
        let v = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        table.insert(r.id.clone(), v).unwrap();
    }
    (records, table)
}

// ---------------------------------------------------------------------------
// Retrieval by direct rule application

fn argmax_sim_set(anchor: &ProblemRecord, candidates: &[&ProblemRecord]) -> Vec<String> {
    let sims: Vec<f64> = candidates
        .iter()
        .map(|c| equation_similarity(&anchor.equation, &c.equation))
        .collect();
    let best = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    candidates
        .iter()
        .zip(&sims)
        .filter(|(_, s)| **s == best)
        .map(|(c, _)| c.id.clone())
        .collect()
}

fn text_sim(a: &ProblemRecord, b: &ProblemRecord, metric: TextMetric, table: &EmbeddingTable) -> f64 {
    match metric {
        TextMetric::EmbeddingCos => {
            cosine_similarity(table.get(&a.id).unwrap(), table.get(&b.id).unwrap()).unwrap()
        }
        _ => bi_bleu(&a.flat_tokens(), &b.flat_tokens()).unwrap(),
    }
}

/// Expected (positive id, negative id) for every anchor, or `None` when the
/// anchor has no negative.
pub fn brute_force_retrieval(
    records: &[ProblemRecord],
    table: &EmbeddingTable,
    strategy: EqStrategy,
    metric: TextMetric,
) -> BTreeMap<String, Option<(String, String)>> {
    let by_id: HashMap<&str, &ProblemRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut out = BTreeMap::new();
    for a in records {
        let key = a.template_key();
        let positives: Vec<String> = match strategy {
            EqStrategy::Em => records
                .iter()
                .filter(|r| r.template_key() == key)
                .map(|r| r.id.clone())
                .collect(),
            EqStrategy::Nn => {
                let cands: Vec<&ProblemRecord> =
                    records.iter().filter(|r| r.flat_tokens() != a.flat_tokens()).collect();
                argmax_sim_set(a, &cands)
            }
        };
        let mut excluded = vec![key.clone()];
        if strategy == EqStrategy::Nn {
            excluded.extend(positives.iter().map(|p| by_id[p.as_str()].template_key()));
        }
        let neg_cands: Vec<&ProblemRecord> = records
            .iter()
            .filter(|r| !excluded.contains(&r.template_key()))
            .collect();
        let negatives = argmax_sim_set(a, &neg_cands);
        if negatives.is_empty() || positives.is_empty() {
            out.insert(a.id.clone(), None);
            continue;
        }
        let mut pos_pool: Vec<&String> = positives.iter().filter(|p| **p != a.id).collect();
        if pos_pool.is_empty() {
            pos_pool = positives.iter().collect();
        }
        let score = |id: &str| text_sim(a, by_id[id], metric, table);
        let pos = pos_pool
            .iter()
            .map(|id| (score(id), id.as_str()))
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(y.1)))
            .unwrap()
            .1
            .to_string();
        let neg = negatives
            .iter()
            .map(|id| (score(id), id.as_str()))
            .min_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(y.1)))
            .unwrap()
            .1
            .to_string();
        out.insert(a.id.clone(), Some((pos, neg)));
    }
    out
}

pub fn triplet_map(triplets: &[TripletPair]) -> BTreeMap<String, (String, String)> {
    triplets
        .iter()
        .map(|t| (t.anchor_id.clone(), (t.positive_id.clone(), t.negative_id.clone())))
        .collect()
}

// ---------------------------------------------------------------------------
// Gradient check by central differences

/// Largest relative error `|a - n| / max(|a|, |n|, floor)` per parameter
/// block (embedding, classifier).
pub fn gradient_check(
    params: &EncoderParams,
    batch: &[EncodedTriplet],
    config: &TrainConfig,
    analytic_embed: &[f64],
    analytic_classifier: &[f64],
    eps: f64,
    floor: f64,
) -> (f64, f64) {
    assert_eq!(analytic_embed.len(), params.embed.len());
    assert_eq!(analytic_classifier.len(), params.classifier.len());
    let loss = |p: &EncoderParams| batch_loss(p, batch, config).unwrap().total;
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(floor);
    let mut worst_embed = 0.0f64;
    for (i, &analytic) in analytic_embed.iter().enumerate() {
        let mut hi = params.clone();
        hi.embed[i] += eps;
        let mut lo = params.clone();
        lo.embed[i] -= eps;
        let numeric = (loss(&hi) - loss(&lo)) / (2.0 * eps);
        worst_embed = worst_embed.max(rel(analytic, numeric));
    }
    let mut worst_cls = 0.0f64;
    for (i, &analytic) in analytic_classifier.iter().enumerate() {
        let mut hi = params.clone();
        hi.classifier[i] += eps;
        let mut lo = params.clone();
        lo.classifier[i] -= eps;
        let numeric = (loss(&hi) - loss(&lo)) / (2.0 * eps);
        worst_cls = worst_cls.max(rel(analytic, numeric));
    }
    (worst_embed, worst_cls)
}

// ---------------------------------------------------------------------------
// Two-template corpus for the contrastive run

/// `count` records, built in pairs sharing a person and an object that no
/// other pair uses: one `n1+n2` record ("puts in") and one `n1-n2` record
/// ("takes out"). Every record differs from its twin, and from any other
/// record of its own template, in exactly two tokens.
pub fn two_template_corpus<R: Rng>(rng: &mut R, count: usize) -> Vec<ProblemRecord> {
    (0..count)
        .map(|i| {
            let add = i % 2 == 0;
            let (name, thing) = (format!("person{}", i / 2), format!("item{}", i / 2));
            let (w1, w2) = if add { ("puts", "in") } else { ("takes", "out") };
            let a = rng.random_range(20..60) as f64;
            let b = rng.random_range(1..20) as f64;
            let text = [
                vec!["a".into(), "box".into(), "has".into(), "n1".into(), thing, ".".into()],
                vec![name, w1.into(), w2.into(), "n2".into(), ".".into()],
                vec!["how".into(), "many".into(), "are".into(), "there".into(), "now".into(), "?".into()],
            ];
            let op = if add { Operator::Add } else { Operator::Sub };
            let equation = EquationTree::node(op, EquationTree::slot(1), EquationTree::slot(2));
            let slots: Slots = [(SlotId(1), a), (SlotId(2), b)].into_iter().collect();
            let answer = if add { a + b } else { a - b };
            ProblemRecord {
                id: format!("t{i:04}"),
                sentences: text.to_vec(),
                question_index: 2,
                slots,
                equation,
                answer,
                origin: Origin::Train,
            }
        })
        .collect()
}

pub fn leaf_token(l: &Leaf) -> String {
    l.token()
}
