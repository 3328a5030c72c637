//! Test fixtures shared by the integration suites: tree shapes, random
//! labelings, and an exact shortest-edit-script oracle.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use propmatch_core::corpus::{DepTree, NodeLabel, Side, Sym};
use propmatch_core::tree_edit::{apply_edit, EditOp, SiblingPosition};
use rand::seq::IndexedRandom;
use rand::Rng;

/// An unlabeled ordered tree: left children (far to near), right children (near to far).
#[derive(Clone, Debug)]
pub struct Shape {
    pub left: Vec<Shape>,
    pub right: Vec<Shape>,
}

impl Shape {
    pub fn size(&self) -> usize {
        1 + self.left.iter().chain(&self.right).map(Shape::size).sum::<usize>()
    }
}

/// Ordered sequences of subtrees with `n` nodes in total.
fn forests(n: usize) -> Vec<Vec<Shape>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 1..=n {
        for head in shapes(first) {
            for rest in forests(n - first) {
                let mut f = vec![head.clone()];
                f.extend(rest);
                out.push(f);
            }
        }
    }
    out
}

/// Every shape with exactly `n` nodes.
pub fn shapes(n: usize) -> Vec<Shape> {
    if n == 0 {
        return vec![];
    }
    let mut out = Vec::new();
    for forest in forests(n - 1) {
        for split in 0..=forest.len() {
            out.push(Shape {
                left: forest[..split].to_vec(),
                right: forest[split..].to_vec(),
            });
        }
    }
    out
}

/// Every shape with 1..=max nodes.
pub fn shapes_up_to(max: usize) -> Vec<Shape> {
    (1..=max).flat_map(shapes).collect()
}

#[derive(Clone, Debug)]
pub struct Inventory {
    pub lemmas: Vec<&'static str>,
    pub tags: Vec<&'static str>,
    pub deprels: Vec<&'static str>,
}

impl Inventory {
    pub fn small() -> Self {
        Inventory {
            lemmas: vec!["a", "b", "c", "d"],
            tags: vec!["NOUN", "VERB"],
            deprels: vec!["root", "nsubj", "obj"],
        }
    }

    pub fn with_lemmas(n: usize) -> Self {
        const WORDS: [&str; 10] = ["cat", "dog", "eat", "fish", "see", "big", "run", "red", "sun", "sky"];
        Inventory {
            lemmas: WORDS[..n].to_vec(),
            tags: vec!["NOUN", "VERB", "ADJ"],
            deprels: vec!["nsubj", "obj", "amod", "xcomp"],
        }
    }

    pub fn labels(&self) -> Vec<NodeLabel> {
        let mut out = Vec::new();
        for l in &self.lemmas {
            for t in &self.tags {
                for d in &self.deprels {
                    out.push(NodeLabel::new(l, t, d));
                }
            }
        }
        out
    }
}

/// Builds a tree of the given shape with random labels. The root's label is "root".
pub fn label_shape<R: Rng>(shape: &Shape, inv: &Inventory, rng: &mut R) -> DepTree {
    let mut t = DepTree::leaf(inv.lemmas.choose(rng).unwrap(), inv.tags.choose(rng).unwrap(), "root");
    fill(&mut t, 0, shape, inv, rng);
    t
}

fn fill<R: Rng>(t: &mut DepTree, at: usize, shape: &Shape, inv: &Inventory, rng: &mut R) {
    // add_child attaches farthest, so left children go in near-to-far order
    for (side, kids) in [
        (Side::Left, shape.left.iter().rev().collect::<Vec<_>>()),
        (Side::Right, shape.right.iter().collect()),
    ] {
        for kid in kids {
            let id = t
                .add_child(
                    at,
                    side,
                    inv.lemmas.choose(rng).unwrap(),
                    inv.tags.choose(rng).unwrap(),
                    inv.deprels.choose(rng).unwrap(),
                )
                .unwrap();
            fill(t, id, kid, inv, rng);
        }
    }
}

/// Random tree with 1..=max_nodes nodes.
pub fn random_tree<R: Rng>(max_nodes: usize, inv: &Inventory, rng: &mut R) -> DepTree {
    let n = rng.random_range(1..=max_nodes);
    let mut t = DepTree::leaf(inv.lemmas.choose(rng).unwrap(), inv.tags.choose(rng).unwrap(), "root");
    let mut ids = vec![0];
    for _ in 1..n {
        let parent = *ids.choose(rng).unwrap();
        let side = if rng.random_bool(0.5) { Side::Left } else { Side::Right };
        let id = t
            .add_child(
                parent,
                side,
                inv.lemmas.choose(rng).unwrap(),
                inv.tags.choose(rng).unwrap(),
                inv.deprels.choose(rng).unwrap(),
            )
            .unwrap();
        ids.push(id);
    }
    t
}

/// Every edit applicable to `tree` with insert/relabel arguments from `labels`.
pub fn all_edits(tree: &DepTree, labels: &[NodeLabel]) -> Vec<EditOp> {
    let mut pairs: Vec<(Sym, Sym)> = labels.iter().map(|l| (l.lemma, l.pos)).collect();
    pairs.sort();
    pairs.dedup();
    let mut deprels: Vec<Sym> = labels.iter().map(|l| l.deprel).collect();
    deprels.sort();
    deprels.dedup();
    let ids: Vec<usize> = tree.ids().collect();
    let mut ops = Vec::new();
    for &n in &ids {
        for l in labels {
            for side in Side::BOTH {
                ops.push(EditOp::InsertChild {
                    node: n,
                    lemma: l.lemma,
                    pos: l.pos,
                    deprel: l.deprel,
                    side,
                });
                ops.push(EditOp::InsertParent {
                    node: n,
                    lemma: l.lemma,
                    pos: l.pos,
                    deprel: l.deprel,
                    side,
                });
            }
        }
        ops.push(EditOp::DeleteLeaf { node: n });
        ops.push(EditOp::DeleteMerge { node: n });
        for &(lemma, pos) in &pairs {
            ops.push(EditOp::RelabelNode { node: n, lemma, pos });
        }
        for &deprel in &deprels {
            ops.push(EditOp::RelabelEdge { node: n, deprel });
        }
        for &m in &ids {
            for side in Side::BOTH {
                ops.push(EditOp::MoveSubtree { node: n, dest: m, side });
            }
        }
        for side in Side::BOTH {
            ops.push(EditOp::NewRoot { node: n, side });
            for position in [SiblingPosition::First, SiblingPosition::Last] {
                ops.push(EditOp::MoveSibling {
                    node: n,
                    side,
                    position,
                });
            }
        }
    }
    ops
}

fn label_multiset(t: &DepTree) -> Vec<NodeLabel> {
    let mut v: Vec<NodeLabel> = t.nodes().map(|(_, n)| n.label()).collect();
    v.sort();
    v
}

/// Larger side of a sorted multiset difference.
fn excess<T: Ord>(a: &[T], b: &[T]) -> (usize, usize) {
    let (mut i, mut j, mut only_a, mut only_b) = (0, 0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                only_a += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                only_b += 1;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    (only_a + a.len() - i, only_b + b.len() - j)
}

/// Label used for inserted nodes inside the oracle; it matches anything.
const WILD: &str = "*";

/// Lower bound on the remaining script length given the unlabeled shape
/// distance `shape`.
///
/// Inserts add one (lemma, tag) pair and one arc label, deletes remove one of
/// each, node relabels swap one pair, and edge relabels or NEW-ROOT swap one
/// arc label. Inserts, deletes, NEW-ROOT and moves are the only edits that
/// change the unlabeled shape. With `i` inserts the node count fixes the
/// deletes at `i - growth`; the cheapest `i` gives the bound. Wildcard parts
/// of the state can fill any missing target part.
fn combined_bound(state: &DepTree, target: &DepTree, shape: usize) -> usize {
    let missing = |f: &dyn Fn(NodeLabel) -> (Sym, Sym)| {
        let mut v: Vec<(Sym, Sym)> = state.nodes().map(|(_, n)| f(n.label())).collect();
        let wild = v.iter().filter(|p| p.1 == WILD).count();
        v.retain(|p| p.1 != WILD);
        let mut w: Vec<(Sym, Sym)> = target.nodes().map(|(_, n)| f(n.label())).collect();
        v.sort();
        w.sort();
        excess(&w, &v).0.saturating_sub(wild)
    };
    let pairs_missing = missing(&|l| (l.lemma, l.pos));
    let arcs_missing = missing(&|l| (l.deprel, l.deprel));
    let growth = target.len() as isize - state.len() as isize;
    let lo = growth.max(0) as usize;
    let hi = lo + pairs_missing.max(arcs_missing).max(shape) + 1;
    (lo..=hi)
        .map(|i| {
            let ins_del = i + (i as isize - growth) as usize;
            let relabel_nodes = pairs_missing.saturating_sub(i);
            // cheapest case: every arc fix is a NEW-ROOT, which also counts as a shape step
            let arc_fixes = arcs_missing.saturating_sub(i);
            let moves = shape.saturating_sub(ins_del + arc_fixes);
            ins_del + relabel_nodes + arc_fixes + moves
        })
        .min()
        .unwrap()
}

/// Exact edit distances between unlabeled shapes, used as a second lower
/// bound: every edit moves the unlabeled shape by at most one step.
pub struct ShapeDistances {
    cap: usize,
    ids: HashMap<Vec<u8>, usize>,
    sizes: Vec<usize>,
    // reverse adjacency
    preds: Vec<Vec<usize>>,
    to_target: HashMap<usize, Vec<usize>>,
}

fn blank() -> Sym {
    Sym::new("root")
}

/// Preorder child counts per side; identifies the unlabeled shape.
fn shape_key(tree: &DepTree) -> Vec<u8> {
    fn walk(t: &DepTree, at: usize, out: &mut Vec<u8>) {
        let n = t.node(at).unwrap();
        for side in Side::BOTH {
            out.push(n.children(side).len() as u8);
            for &c in n.children(side) {
                walk(t, c, out);
            }
        }
    }
    let mut out = Vec::with_capacity(2 * tree.len());
    walk(tree, tree.root(), &mut out);
    out
}

fn unlabeled(tree: &DepTree) -> DepTree {
    let mut t = DepTree::leaf("root", "root", "root");
    copy_shape(tree, tree.root(), &mut t, 0);
    t
}

fn copy_shape(src: &DepTree, at: usize, dst: &mut DepTree, to: usize) {
    let node = src.node(at).unwrap();
    for &c in node.children(Side::Left).iter().rev() {
        let id = dst.add_child(to, Side::Left, "root", "root", "root").unwrap();
        copy_shape(src, c, dst, id);
    }
    for &c in node.children(Side::Right).iter() {
        let id = dst.add_child(to, Side::Right, "root", "root", "root").unwrap();
        copy_shape(src, c, dst, id);
    }
}

fn structural_edits(tree: &DepTree) -> Vec<EditOp> {
    let label = NodeLabel {
        lemma: blank(),
        pos: blank(),
        deprel: blank(),
    };
    all_edits(tree, &[label])
        .into_iter()
        .filter(|op| !matches!(op, EditOp::RelabelNode { .. } | EditOp::RelabelEdge { .. }))
        .collect()
}

impl ShapeDistances {
    /// Explores every shape with at most `cap` nodes.
    pub fn new(cap: usize) -> Self {
        let mut ids = HashMap::new();
        let mut trees = Vec::new();
        for shape in shapes_up_to(cap) {
            let mut t = DepTree::leaf("root", "root", "root");
            build_blank(&mut t, 0, &shape);
            ids.insert(shape_key(&t), trees.len());
            trees.push(t);
        }
        let mut preds = vec![Vec::new(); trees.len()];
        for (from, t) in trees.iter().enumerate() {
            for op in structural_edits(t) {
                let Ok(next) = apply_edit(t, &op) else { continue };
                if let Some(&to) = ids.get(&shape_key(&next)) {
                    preds[to].push(from);
                }
            }
        }
        let sizes = trees.iter().map(DepTree::len).collect();
        ShapeDistances {
            cap,
            ids,
            sizes,
            preds,
            to_target: HashMap::new(),
        }
    }

    fn table(&mut self, target: usize) -> &Vec<usize> {
        let preds = &self.preds;
        self.to_target.entry(target).or_insert_with(|| {
            let mut dist = vec![usize::MAX; preds.len()];
            let mut queue = std::collections::VecDeque::from([target]);
            dist[target] = 0;
            while let Some(x) = queue.pop_front() {
                for &p in &preds[x] {
                    if dist[p] == usize::MAX {
                        dist[p] = dist[x] + 1;
                        queue.push_back(p);
                    }
                }
            }
            dist
        })
    }

    /// Lower bound on the edits from `state` to `target`. Scripts that pass
    /// through shapes larger than the cap need enough inserts and deletes
    /// to get there and back.
    pub fn bound(&mut self, state: &DepTree, target: &DepTree) -> usize {
        let escape = (self.cap + 1).saturating_sub(state.len()) + (self.cap + 1).saturating_sub(target.len());
        let t = self.ids[&shape_key(target)];
        let Some(&s) = self.ids.get(&shape_key(state)) else {
            return state.len().abs_diff(target.len());
        };
        debug_assert!(self.sizes[s] <= self.cap);
        self.table(t)[s].min(escape)
    }
}

fn build_blank(t: &mut DepTree, at: usize, shape: &Shape) {
    for kid in shape.left.iter().rev() {
        let id = t.add_child(at, Side::Left, "root", "root", "root").unwrap();
        build_blank(t, id, kid);
    }
    for kid in &shape.right {
        let id = t.add_child(at, Side::Right, "root", "root", "root").unwrap();
        build_blank(t, id, kid);
    }
}

/// Relabels turning `state` into `target` when both have the same unlabeled
/// shape, or `None` if the shapes differ. Wildcard parts cost nothing; the
/// final label of each wildcard node is recorded in `fill`.
fn finish(state: &DepTree, target: &DepTree, fill: &mut HashMap<usize, NodeLabel>) -> Option<Vec<EditOp>> {
    fn walk(
        s: &DepTree,
        x: usize,
        t: &DepTree,
        y: usize,
        out: &mut Vec<EditOp>,
        fill: &mut HashMap<usize, NodeLabel>,
    ) -> bool {
        let (a, b) = (s.node(x).unwrap(), t.node(y).unwrap());
        if a.pos == WILD {
            fill.insert(x, b.label());
        } else if a.lemma != b.lemma || a.pos != b.pos {
            out.push(EditOp::RelabelNode {
                node: x,
                lemma: b.lemma,
                pos: b.pos,
            });
        }
        if a.deprel != WILD && a.deprel != b.deprel {
            out.push(EditOp::RelabelEdge {
                node: x,
                deprel: b.deprel,
            });
        }
        Side::BOTH.into_iter().all(|side| {
            let (ka, kb) = (a.children(side), b.children(side));
            ka.len() == kb.len() && ka.iter().zip(kb.iter()).all(|(&p, &q)| walk(s, p, t, q, out, fill))
        })
    }
    let mut out = Vec::new();
    walk(state, state.root(), target, target.root(), &mut out, fill).then_some(out)
}

/// Unlabeled edits, with inserts creating wildcard nodes.
fn structural_wild_edits(tree: &DepTree) -> Vec<EditOp> {
    let wild = NodeLabel::new(WILD, WILD, WILD);
    all_edits(tree, &[wild])
        .into_iter()
        .filter(|op| !matches!(op, EditOp::RelabelNode { .. } | EditOp::RelabelEdge { .. }))
        .collect()
}

/// Replaces wildcard insert labels in `path` by the labels the inserted
/// nodes need in the end.
fn concretize(source: &DepTree, path: &mut [EditOp], fill: &HashMap<usize, NodeLabel>) {
    let mut tree = source.clone();
    for op in path.iter_mut() {
        let created = tree.next_id();
        tree = apply_edit(&tree, op).unwrap();
        if let EditOp::InsertChild { lemma, pos, deprel, .. } | EditOp::InsertParent { lemma, pos, deprel, .. } = op {
            // nodes deleted later keep an arbitrary label
            let l = fill
                .get(&created)
                .copied()
                .unwrap_or_else(|| NodeLabel::new("x", "X", "dep"));
            (*lemma, *pos, *deprel) = (l.lemma, l.pos, l.deprel);
        }
    }
}

/// A shortest edit script from `source` to `target`, by A* over every
/// applicable edit. Returns `None` if none is at most `max_len` long.
///
/// No edit's legality depends on labels, node relabels overwrite each other
/// and commute with everything else, and an edge relabel only conflicts with
/// a later NEW-ROOT on the same node (which overwrites it). So some shortest
/// script performs its structural edits first and ends with at most one
/// relabel of each kind per surviving source node, while each inserted node
/// can be given its final label when it is created. The search therefore
/// explores structural edits only, inserting wildcard nodes, and finishes
/// any state whose unlabeled shape matches the target with the relabels its
/// source nodes need. The returned script has concrete labels.
pub fn shortest_script(
    source: &DepTree,
    target: &DepTree,
    shapes: &mut ShapeDistances,
    max_len: usize,
) -> Option<Vec<EditOp>> {
    let mut h = |t: &DepTree| combined_bound(t, target, shapes.bound(t, target));
    let mut best: HashMap<u64, usize> = HashMap::new();
    let mut open = BinaryHeap::new();
    let mut seq = 0usize;
    best.insert(source.canonical_hash(), 0);
    // ties go to deeper states
    open.push(Reverse((
        h(source),
        usize::MAX,
        seq,
        Node(source.clone(), Vec::new(), false),
    )));
    while let Some(Reverse((f, depth_key, _, Node(tree, mut path, done)))) = open.pop() {
        let g = usize::MAX - depth_key;
        if done {
            let mut fill = HashMap::new();
            let relabels = finish(&tree, target, &mut fill).unwrap();
            concretize(source, &mut path, &fill);
            path.extend(relabels);
            return Some(path);
        }
        if best.get(&tree.canonical_hash()).is_some_and(|&b| b < g) {
            continue;
        }
        if let Some(relabels) = finish(&tree, target, &mut HashMap::new()) {
            let total = g + relabels.len();
            if total <= max_len {
                seq += 1;
                open.push(Reverse((
                    total.max(f),
                    usize::MAX - total,
                    seq,
                    Node(tree.clone(), path.clone(), true),
                )));
            }
        }
        if g >= max_len {
            continue;
        }
        for op in structural_wild_edits(&tree) {
            let Ok(next) = apply_edit(&tree, &op) else { continue };
            let key = next.canonical_hash();
            if best.get(&key).is_some_and(|&b| b <= g + 1) {
                continue;
            }
            best.insert(key, g + 1);
            let f = g + 1 + h(&next);
            if f > max_len {
                continue;
            }
            seq += 1;
            let mut p = path.clone();
            p.push(op);
            open.push(Reverse((f, usize::MAX - (g + 1), seq, Node(next, p, false))));
        }
    }
    None
}

// Heap payload that never takes part in ordering.
struct Node(DepTree, Vec<EditOp>, bool);

impl PartialEq for Node {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, _: &Self) -> std::cmp::Ordering {
        std::cmp::Ordering::Equal
    }
}
