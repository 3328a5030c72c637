//! Beam search for an edit script that turns one dependency tree into another.
//!
//! Node and edge relabels commute with the structural edits and never need
//! to touch a node twice, so the search only explores insertions, deletions
//! and moves, and appends the relabels once a state has the target's
//! unlabeled shape. Inserted nodes start with a placeholder label and receive
//! the label of the target node they end up matching, so every argument of
//! the final script is drawn from the target tree.
//!
//! Each round expands every state in the beam, drops trees already seen (by
//! canonical hash), and keeps the `beam_width` children with the smallest
//! `4 * (depth + lower bound) + gap`, where the gap counts structural
//! mismatches in shape, arc sides and sibling order. Ties go to the smaller
//! gap. Once a complete script is known, children whose bound cannot beat it
//! are pruned.

use std::collections::{BinaryHeap, HashMap};
use std::rc::Rc;
use std::sync::OnceLock;

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use super::categories::{is_noun, is_numeric, is_proper_noun, is_verb};
use super::ops::{apply_in_place, EditKind, EditOp, SiblingPosition};
use crate::corpus::{trees_equal, DepTree, NodeId, NodeLabel, Side, Sym};
use crate::error::Result;

/// Weight of the bound against the structural gap in the ranking key.
const GAP_WEIGHT_INVERSE: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub beam_width: usize,
    /// Cap on the number of beam states expanded.
    pub max_expansions: usize,
    /// Cap on script length; `None` means `2 * (|source| + |target|)`.
    pub max_depth: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            beam_width: 100,
            max_expansions: 10_000,
            max_depth: None,
        }
    }
}

impl SearchConfig {
    pub fn with_beam_width(beam_width: usize) -> Self {
        SearchConfig {
            beam_width,
            ..Self::default()
        }
    }

    fn depth_limit(&self, source: &DepTree, target: &DepTree) -> usize {
        self.max_depth.unwrap_or(2 * (source.len() + target.len()))
    }
}

/// Counts of source nodes that no edit touched.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UneditedCounts {
    pub total: u32,
    pub numeric: u32,
    pub verbs: u32,
    pub nouns: u32,
    pub proper_nouns: u32,
}

impl UneditedCounts {
    fn tally<'a>(labels: impl Iterator<Item = &'a NodeLabel>) -> Self {
        let mut c = UneditedCounts::default();
        for l in labels {
            c.total += 1;
            c.numeric += u32::from(is_numeric(&l.pos, &l.lemma));
            c.verbs += u32::from(is_verb(&l.pos));
            c.nouns += u32::from(is_noun(&l.pos));
            c.proper_nouns += u32::from(is_proper_noun(&l.pos));
        }
        c
    }

    /// Every node of `tree` counted as unedited.
    pub fn of_tree(tree: &DepTree) -> Self {
        let labels: Vec<NodeLabel> = tree.nodes().map(|(_, n)| n.label()).collect();
        Self::tally(labels.iter())
    }
}

/// An edit script from a source tree to a target tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditSequence {
    pub ops: Vec<EditOp>,
    pub found: bool,
    pub source_unedited: UneditedCounts,
    /// Label of each op's node `n` just before the op ran. For INSERT-CHILD
    /// this is the node the new child was attached to.
    pub prior_labels: Vec<NodeLabel>,
}

impl EditSequence {
    /// Replays `ops` on `source`, recording prior labels and unedited counts.
    ///
    /// A source node counts as edited when it is the addressed node of any op
    /// other than INSERT-CHILD (whose node only receives a new dependent), or
    /// when NEW-ROOT demotes it from the root.
    pub fn from_ops(source: &DepTree, ops: Vec<EditOp>) -> Result<Self> {
        let source_ids = source.next_id();
        let mut touched = vec![false; source_ids];
        let mut prior_labels = Vec::with_capacity(ops.len());
        let mut tree = source.clone();
        for op in &ops {
            let node = op.node();
            let label = tree
                .node(node)
                .map(|n| n.label())
                .ok_or_else(|| crate::Error::IllegalEdit(format!("no node {node}")))?;
            prior_labels.push(label);
            if op.kind() != EditKind::InsertChild && node < source_ids {
                touched[node] = true;
            }
            if op.kind() == EditKind::NewRoot && tree.root() < source_ids {
                touched[tree.root()] = true;
            }
            apply_in_place(&mut tree, op)?;
        }
        let untouched: Vec<NodeLabel> = source
            .nodes()
            .filter(|&(id, _)| !touched[id])
            .map(|(_, n)| n.label())
            .collect();
        Ok(EditSequence {
            ops,
            found: true,
            source_unedited: UneditedCounts::tally(untouched.iter()),
            prior_labels,
        })
    }

    pub fn not_found(source: &DepTree) -> Self {
        EditSequence {
            ops: Vec::new(),
            found: false,
            source_unedited: UneditedCounts::of_tree(source),
            prior_labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Folds the ops over `source`.
    pub fn apply_to(&self, source: &DepTree) -> Result<DepTree> {
        let mut tree = source.clone();
        for op in &self.ops {
            apply_in_place(&mut tree, op)?;
        }
        Ok(tree)
    }
}

/// Sorted multiset difference: entries of `a` unmatched in `b` and entries
/// of `b` unmatched in `a`. Both slices must be sorted.
fn multiset_distance<T: Ord>(a: &[T], b: &[T]) -> (u32, u32) {
    let (mut i, mut j) = (0, 0);
    let (mut only_a, mut only_b) = (0u32, 0u32);
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
    only_a += (a.len() - i) as u32;
    only_b += (b.len() - j) as u32;
    (only_a, only_b)
}

/// Label of nodes inserted during the search. Their real labels are chosen
/// once the script is complete.
fn placeholder() -> Sym {
    static HOLE: OnceLock<Sym> = OnceLock::new();
    *HOLE.get_or_init(|| Sym::new("\u{1}"))
}

/// Multisets describing a tree, keyed by symbol address. Placeholder parts
/// are counted separately.
#[derive(Default)]
struct Profile {
    len: u32,
    tagged: Vec<(usize, usize)>,
    deprels: Vec<usize>,
    open_tags: u32,
    open_deprels: u32,
    // (lemma, head lemma, side)
    attachments: Vec<(usize, usize, u8)>,
    // (lemma, head lemma, side, distance rank from head)
    placements: Vec<(usize, usize, u8, usize)>,
    // (depth, left children, right children)
    shape: Vec<(u32, u32, u32)>,
}

impl Profile {
    fn of(tree: &DepTree) -> Profile {
        let mut p = Profile::default();
        p.rebuild(tree, &mut Vec::new());
        p.rebuild_structure(tree);
        p
    }

    /// Recomputes the profile for `tree`, reusing the buffers.
    fn rebuild(&mut self, tree: &DepTree, stack: &mut Vec<(NodeId, u32)>) {
        let hole = placeholder();
        self.len = tree.len() as u32;
        self.open_tags = 0;
        self.open_deprels = 0;
        self.tagged.clear();
        self.deprels.clear();
        self.shape.clear();
        stack.clear();
        stack.push((tree.root(), 0));
        while let Some((id, depth)) = stack.pop() {
            let node = tree.node(id).expect("live node");
            if node.pos == hole {
                self.open_tags += 1;
            } else {
                self.tagged.push((node.lemma.addr(), node.pos.addr()));
            }
            if node.deprel == hole {
                self.open_deprels += 1;
            } else {
                self.deprels.push(node.deprel.addr());
            }
            self.shape
                .push((depth, node.left.len() as u32, node.right.len() as u32));
            for side in Side::BOTH {
                stack.extend(node.children(side).iter().map(|&c| (c, depth + 1)));
            }
        }
        self.tagged.sort_unstable();
        self.deprels.sort_unstable();
        self.shape.sort_unstable();
    }

    /// Fills the attachment and placement multisets, which only the
    /// structural gap reads.
    fn rebuild_structure(&mut self, tree: &DepTree) {
        self.attachments.clear();
        self.placements.clear();
        for (_, node) in tree.nodes() {
            let lemma = node.lemma.addr();
            for side in Side::BOTH {
                let kids = node.children(side);
                let k = kids.len();
                for (i, &c) in kids.iter().enumerate() {
                    let child = tree.node(c).expect("live child").lemma.addr();
                    let (s, rank) = match side {
                        Side::Left => (0u8, k - 1 - i),
                        Side::Right => (1u8, i),
                    };
                    self.attachments.push((child, lemma, s));
                    self.placements.push((child, lemma, s, rank));
                }
            }
        }
        self.attachments.sort_unstable();
        self.placements.sort_unstable();
    }

    /// Lower bound on the edits still needed to reach `target`.
    ///
    /// Inserts supply one (lemma, POS) pair and one arc label, deletes remove
    /// one of each, and each relabel (or NEW-ROOT) fixes a single pair or arc
    /// label. Placeholder parts can take any label. The node count ties
    /// deletes to inserts, so the bound minimizes over the number of inserts.
    fn lower_bound(&self, target: &Profile) -> u32 {
        let tags_missing = multiset_distance(&target.tagged, &self.tagged)
            .0
            .saturating_sub(self.open_tags);
        let arcs_missing = multiset_distance(&target.deprels, &self.deprels)
            .0
            .saturating_sub(self.open_deprels);
        let growth = target.len as i64 - self.len as i64;
        let lo = growth.max(0) as u32;
        (lo..=lo + tags_missing.max(arcs_missing))
            .map(|i| {
                let deletes = (i as i64 - growth) as u32;
                i + deletes + tags_missing.saturating_sub(i) + arcs_missing.saturating_sub(i)
            })
            .min()
            .unwrap_or(0)
    }

    /// Structural mismatch used to order states with equal bounds.
    fn structure_gap(&self, target: &Profile) -> u32 {
        let sum = |(a, b): (u32, u32)| a + b;
        sum(multiset_distance(&self.shape, &target.shape))
            + sum(multiset_distance(&self.attachments, &target.attachments))
            + sum(multiset_distance(&self.placements, &target.placements))
    }
}

/// The search heuristic for `state` against `target`: a lower bound on the
/// remaining script length and a structural tie-breaker. Both are zero when
/// the trees are equal.
pub fn heuristic(state: &DepTree, target: &DepTree) -> (u32, u32) {
    let (s, t) = (Profile::of(state), Profile::of(target));
    (s.lower_bound(&t), s.structure_gap(&t))
}

/// Structural edits from `tree`, in deterministic order. Inserted nodes carry
/// the placeholder label.
fn candidate_ops(tree: &DepTree) -> Vec<EditOp> {
    let hole = placeholder();
    let root = tree.root();
    let ids: Vec<NodeId> = tree.ids().collect();
    let mut ops = Vec::new();
    for &n in &ids {
        let node = tree.node(n).expect("live");
        let is_root = n == root;
        for side in Side::BOTH {
            ops.push(EditOp::InsertChild {
                node: n,
                lemma: hole,
                pos: hole,
                deprel: hole,
                side,
            });
            if !is_root {
                ops.push(EditOp::InsertParent {
                    node: n,
                    lemma: hole,
                    pos: hole,
                    deprel: hole,
                    side,
                });
            }
        }
        if is_root {
            continue;
        }
        if node.is_leaf() {
            ops.push(EditOp::DeleteLeaf { node: n });
        } else if node.child_count() == 1 {
            ops.push(EditOp::DeleteMerge { node: n });
        }
        let mut inside = vec![false; tree.next_id()];
        for d in tree.subtree(n) {
            inside[d] = true;
        }
        for &m in ids.iter().filter(|&&m| !inside[m]) {
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

/// Relabels that turn `state` into `target` if the two have the same
/// unlabeled shape. Placeholder nodes are not relabeled; the target label at
/// their position is recorded in `fill` instead.
fn finishing_relabels(
    state: &DepTree,
    target: &DepTree,
    mut fill: Option<&mut HashMap<NodeId, NodeLabel>>,
) -> Option<Vec<EditOp>> {
    let hole = placeholder();
    let mut out = Vec::new();
    let mut stack = vec![(state.root(), target.root())];
    while let Some((x, y)) = stack.pop() {
        let (a, b) = (state.node(x)?, target.node(y)?);
        if a.left.len() != b.left.len() || a.right.len() != b.right.len() {
            return None;
        }
        if a.pos == hole {
            if let Some(fill) = fill.as_deref_mut() {
                fill.insert(x, b.label());
            }
        } else if a.lemma != b.lemma || a.pos != b.pos {
            out.push(EditOp::RelabelNode {
                node: x,
                lemma: b.lemma,
                pos: b.pos,
            });
        }
        if a.deprel != hole && a.deprel != b.deprel {
            out.push(EditOp::RelabelEdge {
                node: x,
                deprel: b.deprel,
            });
        }
        for side in Side::BOTH {
            stack.extend(a.children(side).iter().copied().zip(b.children(side).iter().copied()));
        }
    }
    out.sort_by_key(|op| (op.node(), op.kind().index()));
    Some(out)
}

/// Replaces placeholder labels in the inserts of `ops` with the labels the
/// inserted nodes end up needing. Nodes deleted again get `spare`.
fn fill_inserts(source: &DepTree, ops: &mut [EditOp], fill: &HashMap<NodeId, NodeLabel>, spare: NodeLabel) {
    let mut tree = source.clone();
    for op in ops.iter_mut() {
        let created = tree.next_id();
        apply_in_place(&mut tree, op).expect("replay of a legal script");
        if let EditOp::InsertChild { lemma, pos, deprel, .. } | EditOp::InsertParent { lemma, pos, deprel, .. } = op {
            let l = fill.get(&created).copied().unwrap_or(spare);
            (*lemma, *pos, *deprel) = (l.lemma, l.pos, l.deprel);
        }
    }
}

struct Trail {
    op: EditOp,
    prev: Option<Rc<Trail>>,
}

fn unwind(trail: &Option<Rc<Trail>>) -> Vec<EditOp> {
    let mut ops = Vec::new();
    let mut cur = trail.as_ref();
    while let Some(t) = cur {
        ops.push(t.op.clone());
        cur = t.prev.as_ref();
    }
    ops.reverse();
    ops
}

struct Candidate {
    key: (u32, u32, u64),
    bound: u32,
    tree: DepTree,
    trail: Option<Rc<Trail>>,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

struct Best {
    len: usize,
    tree: DepTree,
    trail: Option<Rc<Trail>>,
}

/// Searches for an edit script transforming `source` into `target`.
///
/// The search explores insertions, deletions and moves; whenever a state has
/// the target's unlabeled shape, node and edge relabels complete it into a
/// script. The shortest script seen is kept, and the search stops once no
/// state in the beam can beat it. Failure (expansion or depth cap reached
/// with nothing found, or the beam empties) is reported as `found == false`
/// with no ops.
pub fn find_edit_sequence(source: &DepTree, target: &DepTree, config: &SearchConfig) -> EditSequence {
    if trees_equal(source, target) {
        return EditSequence::from_ops(source, Vec::new()).expect("empty script");
    }
    let depth_limit = config.depth_limit(source, target);
    let width = config.beam_width.max(1);
    let goal = Profile::of(target);

    let mut best = finishing_relabels(source, target, None).map(|relabels| Best {
        len: relabels.len(),
        tree: source.clone(),
        trail: None,
    });

    let mut seen: FxHashSet<u64> = FxHashSet::default();
    seen.insert(source.canonical_hash());
    // (tree, trail, depth + lower bound)
    let mut beam: Vec<(DepTree, Option<Rc<Trail>>, u32)> = vec![(source.clone(), None, 0)];
    let mut expansions = 0usize;
    let mut seq = 0u64;
    let mut profile = Profile::default();
    let mut stack = Vec::new();
    let mut child = source.clone();

    'depth: for depth in 1..=depth_limit {
        let mut next: BinaryHeap<Candidate> = BinaryHeap::with_capacity(width + 1);
        for (tree, trail, bound) in &beam {
            if best.as_ref().is_some_and(|b| *bound as usize >= b.len) {
                continue;
            }
            if expansions >= config.max_expansions {
                break 'depth;
            }
            expansions += 1;
            for op in candidate_ops(tree) {
                child.clone_from(tree);
                if apply_in_place(&mut child, &op).is_err() {
                    continue;
                }
                if !seen.insert(child.canonical_hash()) {
                    continue;
                }
                profile.rebuild(&child, &mut stack);
                let mut child_trail = None;
                // equal shape multisets are necessary for a relabel-only finish
                if profile.shape == goal.shape {
                    if let Some(relabels) = finishing_relabels(&child, target, None) {
                        let len = depth + relabels.len();
                        if best.as_ref().is_none_or(|b| len < b.len) {
                            let t = Some(Rc::new(Trail {
                                op: op.clone(),
                                prev: trail.clone(),
                            }));
                            best = Some(Best {
                                len,
                                tree: child.clone(),
                                trail: t.clone(),
                            });
                            child_trail = t;
                        }
                    }
                }
                let bound = depth as u32 + profile.lower_bound(&goal);
                if best.as_ref().is_some_and(|b| bound as usize >= b.len) {
                    continue;
                }
                seq += 1;
                profile.rebuild_structure(&child);
                let gap = profile.structure_gap(&goal);
                let key = (bound * GAP_WEIGHT_INVERSE + gap, gap, seq);
                if next.len() >= width && key >= next.peek().expect("non-empty").key {
                    continue;
                }
                let trail = child_trail.unwrap_or_else(|| {
                    Rc::new(Trail {
                        op,
                        prev: trail.clone(),
                    })
                });
                let cand = Candidate {
                    key,
                    bound,
                    tree: child.clone(),
                    trail: Some(trail),
                };
                if next.len() >= width {
                    next.pop();
                }
                next.push(cand);
            }
        }
        if next.is_empty() {
            break;
        }
        beam = next
            .into_sorted_vec()
            .into_iter()
            .map(|c| (c.tree, c.trail, c.bound))
            .collect();
    }

    let Some(best) = best else {
        return EditSequence::not_found(source);
    };
    let mut ops = unwind(&best.trail);
    let mut fill = HashMap::new();
    let relabels = finishing_relabels(&best.tree, target, Some(&mut fill)).expect("shape matched");
    let spare = target.node(target.root()).expect("root").label();
    fill_inserts(source, &mut ops, &fill, spare);
    ops.extend(relabels);
    EditSequence::from_ops(source, ops).expect("search only applies legal edits")
}
