//! Dependency trees with ordered left and right dependents.
//!
//! Nodes live in a slot arena: ids stay stable while a tree is edited, and a
//! deleted node leaves an empty slot behind. Each side's child list is kept in
//! surface order, so the left list runs from the farthest dependent to the
//! nearest one and the right list runs from the nearest to the farthest.

use std::fmt;
use std::hash::{Hash, Hasher};

use rustc_hash::FxHasher;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::{Sym, Token};
use crate::error::{Error, Result};

pub type NodeId = usize;

/// Which side of its head a dependent sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

pub type Children = SmallVec<[NodeId; 4]>;

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub lemma: Sym,
    pub pos: Sym,
    pub deprel: Sym,
    pub parent: Option<NodeId>,
    pub left: Children,
    pub right: Children,
}

// The derived clone goes through `Extend`; trees are cloned on every search
// step, so copy the child lists as slices.
impl Clone for Node {
    fn clone(&self) -> Self {
        Node {
            lemma: self.lemma,
            pos: self.pos,
            deprel: self.deprel,
            parent: self.parent,
            left: Children::from_slice(&self.left),
            right: Children::from_slice(&self.right),
        }
    }

    fn clone_from(&mut self, source: &Self) {
        self.lemma = source.lemma;
        self.pos = source.pos;
        self.deprel = source.deprel;
        self.parent = source.parent;
        copy_children(&mut self.left, &source.left);
        copy_children(&mut self.right, &source.right);
    }
}

fn copy_children(to: &mut Children, from: &Children) {
    if to.len() == from.len() {
        to.copy_from_slice(from);
    } else {
        to.clear();
        to.extend_from_slice(from);
    }
}

impl Node {
    pub(crate) fn new(lemma: Sym, pos: Sym, deprel: Sym, parent: Option<NodeId>) -> Self {
        Node {
            lemma,
            pos,
            deprel,
            parent,
            left: Children::new(),
            right: Children::new(),
        }
    }

    pub fn children(&self, side: Side) -> &Children {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub(crate) fn children_mut(&mut self, side: Side) -> &mut Children {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.left.is_empty() && self.right.is_empty()
    }

    pub fn child_count(&self) -> usize {
        self.left.len() + self.right.len()
    }

    pub fn label(&self) -> NodeLabel {
        NodeLabel {
            lemma: self.lemma,
            pos: self.pos,
            deprel: self.deprel,
        }
    }
}

/// The decoration of a node, detached from its position in a tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeLabel {
    pub lemma: Sym,
    pub pos: Sym,
    pub deprel: Sym,
}

impl NodeLabel {
    pub fn new(lemma: &str, pos: &str, deprel: &str) -> Self {
        NodeLabel {
            lemma: lemma.into(),
            pos: pos.into(),
            deprel: deprel.into(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DepTree {
    slots: Vec<Option<Node>>,
    root: NodeId,
}

impl Clone for DepTree {
    fn clone(&self) -> Self {
        DepTree {
            slots: self.slots.clone(),
            root: self.root,
        }
    }

    // reuses the slot buffer and child lists
    fn clone_from(&mut self, source: &Self) {
        self.slots.clone_from(&source.slots);
        self.root = source.root;
    }
}

impl DepTree {
    /// A one-node tree.
    pub fn leaf(lemma: &str, pos: &str, deprel: &str) -> Self {
        DepTree {
            slots: vec![Some(Node::new(lemma.into(), pos.into(), deprel.into(), None))],
            root: 0,
        }
    }

    /// Builds the tree described by the head/deprel columns of `tokens`.
    ///
    /// Token `i` (1-based) becomes node `i - 1`.
    pub fn from_tokens(tokens: &[Token]) -> Result<Self> {
        let malformed = |reason: String| Error::MalformedParse { line: 0, reason };
        if tokens.is_empty() {
            return Err(malformed("sentence has no tokens".into()));
        }
        let n = tokens.len();
        let mut root = None;
        for (i, tok) in tokens.iter().enumerate() {
            if tok.index != i + 1 {
                return Err(malformed(format!(
                    "token indices must run 1..{n}, found {} at position {}",
                    tok.index,
                    i + 1
                )));
            }
            let head = tok
                .head
                .ok_or_else(|| malformed(format!("token {} has no head", tok.index)))?;
            if head > n {
                return Err(malformed(format!("token {} has out-of-range head {head}", tok.index)));
            }
            if head == tok.index {
                return Err(malformed(format!("token {} heads itself", tok.index)));
            }
            if tok.deprel.as_deref().is_none_or(str::is_empty) {
                return Err(malformed(format!("token {} has no deprel", tok.index)));
            }
            if head == 0 {
                if root.is_some() {
                    return Err(malformed("multiple root tokens".into()));
                }
                root = Some(i);
            }
        }
        let root = root.ok_or_else(|| malformed("no root token".into()))?;

        let mut slots: Vec<Option<Node>> = tokens
            .iter()
            .map(|t| {
                let parent = t.head.filter(|&h| h > 0).map(|h| h - 1);
                Some(Node::new(
                    Sym::new(&t.lemma),
                    Sym::new(&t.pos),
                    Sym::new(t.deprel.as_deref().unwrap_or("")),
                    parent,
                ))
            })
            .collect();
        for (i, tok) in tokens.iter().enumerate() {
            let head = tok.head.unwrap_or(0);
            if head == 0 {
                continue;
            }
            let parent = slots[head - 1].as_mut().expect("fresh slot");
            if i < head - 1 {
                parent.left.push(i);
            } else {
                parent.right.push(i);
            }
        }
        let tree = DepTree { slots, root };

        // Every node must be reachable from the root; anything else sits on a cycle.
        let reachable = tree.subtree(root).len();
        if reachable != n {
            return Err(malformed("head assignments contain a cycle".into()));
        }
        Ok(tree)
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.slots.get(id).and_then(Option::as_ref)
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> Option<&mut Node> {
        self.slots.get_mut(id).and_then(Option::as_mut)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.node(id).is_some()
    }

    /// Number of live nodes.
    pub fn len(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Ids of live nodes in slot order.
    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.slots.iter().enumerate().filter_map(|(i, s)| s.as_ref().map(|_| i))
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_ref().map(|n| (i, n)))
    }

    /// Id that the next inserted node will receive.
    pub fn next_id(&self) -> NodeId {
        self.slots.len()
    }

    /// Appends a new dependent as the farthest child on `side` of `parent`.
    pub fn add_child(&mut self, parent: NodeId, side: Side, lemma: &str, pos: &str, deprel: &str) -> Result<NodeId> {
        if !self.contains(parent) {
            return Err(Error::IllegalEdit(format!("no node {parent}")));
        }
        let id = self.slots.len();
        self.slots
            .push(Some(Node::new(lemma.into(), pos.into(), deprel.into(), Some(parent))));
        self.attach_far(parent, side, id);
        Ok(id)
    }

    pub(crate) fn push_detached(&mut self, node: Node) -> NodeId {
        self.slots.push(Some(node));
        self.slots.len() - 1
    }

    pub(crate) fn remove_slot(&mut self, id: NodeId) {
        self.slots[id] = None;
    }

    pub(crate) fn set_root(&mut self, id: NodeId) {
        self.root = id;
    }

    /// Side of `id` relative to its parent and its index within that side's list.
    pub fn position(&self, id: NodeId) -> Option<(NodeId, Side, usize)> {
        let parent = self.node(id)?.parent?;
        let p = self.node(parent)?;
        for side in Side::BOTH {
            if let Some(i) = p.children(side).iter().position(|&c| c == id) {
                return Some((parent, side, i));
            }
        }
        None
    }

    /// Unlinks `id` from its parent's child list, leaving the node itself in place.
    pub(crate) fn detach(&mut self, id: NodeId) -> Option<(NodeId, Side, usize)> {
        let pos = self.position(id)?;
        let (parent, side, i) = pos;
        self.node_mut(parent).expect("parent").children_mut(side).remove(i);
        self.node_mut(id).expect("node").parent = None;
        Some(pos)
    }

    /// Links `child` as the farthest dependent on `side` of `parent`.
    pub(crate) fn attach_far(&mut self, parent: NodeId, side: Side, child: NodeId) {
        let list = self.node_mut(parent).expect("parent").children_mut(side);
        match side {
            Side::Left => list.insert(0, child),
            Side::Right => list.push(child),
        }
        self.node_mut(child).expect("child").parent = Some(parent);
    }

    /// Links `child` as the nearest dependent on `side` of `parent`.
    pub(crate) fn attach_near(&mut self, parent: NodeId, side: Side, child: NodeId) {
        let list = self.node_mut(parent).expect("parent").children_mut(side);
        match side {
            Side::Left => list.push(child),
            Side::Right => list.insert(0, child),
        }
        self.node_mut(child).expect("child").parent = Some(parent);
    }

    pub(crate) fn attach_at(&mut self, parent: NodeId, side: Side, index: usize, child: NodeId) {
        self.node_mut(parent)
            .expect("parent")
            .children_mut(side)
            .insert(index, child);
        self.node_mut(child).expect("child").parent = Some(parent);
    }

    /// All nodes of the subtree rooted at `id`, in pre-order.
    pub fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(cur) = stack.pop() {
            if out.len() > self.slots.len() {
                // Only reachable on corrupted (cyclic) link structure.
                break;
            }
            out.push(cur);
            if let Some(n) = self.node(cur) {
                stack.extend(n.right.iter().rev().copied());
                stack.extend(n.left.iter().rev().copied());
            }
        }
        out
    }

    /// True if `candidate` lies in the subtree rooted at `ancestor` (inclusive).
    pub fn is_descendant(&self, candidate: NodeId, ancestor: NodeId) -> bool {
        let mut cur = Some(candidate);
        while let Some(id) = cur {
            if id == ancestor {
                return true;
            }
            cur = self.node(id).and_then(|n| n.parent);
        }
        false
    }

    /// Surface order: left dependents, the node, then right dependents, recursively.
    pub fn in_order(&self) -> Vec<NodeId> {
        fn walk(t: &DepTree, id: NodeId, out: &mut Vec<NodeId>) {
            let n = t.node(id).expect("live node");
            for &c in &n.left {
                walk(t, c, out);
            }
            out.push(id);
            for &c in &n.right {
                walk(t, c, out);
            }
        }
        let mut out = Vec::with_capacity(self.len());
        walk(self, self.root, &mut out);
        out
    }

    /// Re-indexes the tree in surface order and returns it as CoNLL-U style tokens
    /// (form = lemma).
    pub fn to_tokens(&self) -> Vec<Token> {
        let order = self.in_order();
        let mut index_of = vec![0usize; self.slots.len()];
        for (i, &id) in order.iter().enumerate() {
            index_of[id] = i + 1;
        }
        order
            .iter()
            .enumerate()
            .map(|(i, &id)| {
                let n = self.node(id).expect("live node");
                Token {
                    index: i + 1,
                    form: n.lemma.to_string(),
                    lemma: n.lemma.to_string(),
                    pos: n.pos.to_string(),
                    head: Some(n.parent.map_or(0, |p| index_of[p])),
                    deprel: Some(n.deprel.to_string()),
                }
            })
            .collect()
    }

    /// Order-sensitive structural hash over labels; node ids do not contribute.
    pub fn canonical_hash(&self) -> u64 {
        fn walk(t: &DepTree, id: NodeId, h: &mut FxHasher) {
            let n = t.node(id).expect("live node");
            n.lemma.hash(h);
            n.pos.hash(h);
            n.deprel.hash(h);
            n.left.len().hash(h);
            for &c in &n.left {
                walk(t, c, h);
            }
            n.right.len().hash(h);
            for &c in &n.right {
                walk(t, c, h);
            }
        }
        let mut h = FxHasher::default();
        walk(self, self.root, &mut h);
        h.finish()
    }

    /// Checks the structural invariants: one root, parent/child links agree,
    /// every live node reachable from the root.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::MalformedParse { line: 0, reason };
        let root = self.node(self.root).ok_or_else(|| bad("root slot is empty".into()))?;
        if root.parent.is_some() {
            return Err(bad("root has a parent".into()));
        }
        for (id, n) in self.nodes() {
            for side in Side::BOTH {
                for &c in n.children(side) {
                    let child = self.node(c).ok_or_else(|| bad(format!("dangling child {c}")))?;
                    if child.parent != Some(id) {
                        return Err(bad(format!("child {c} does not point back to {id}")));
                    }
                }
            }
        }
        if self.subtree(self.root).len() != self.len() {
            return Err(bad("unreachable or cyclic nodes".into()));
        }
        Ok(())
    }
}

/// Recursive equality over lemma, POS, incoming label and ordered child lists.
pub fn trees_equal(a: &DepTree, b: &DepTree) -> bool {
    fn eq(a: &DepTree, x: NodeId, b: &DepTree, y: NodeId) -> bool {
        let (nx, ny) = match (a.node(x), b.node(y)) {
            (Some(nx), Some(ny)) => (nx, ny),
            _ => return false,
        };
        nx.lemma == ny.lemma
            && nx.pos == ny.pos
            && nx.deprel == ny.deprel
            && nx.left.len() == ny.left.len()
            && nx.right.len() == ny.right.len()
            && nx.left.iter().zip(&ny.left).all(|(&c, &d)| eq(a, c, b, d))
            && nx.right.iter().zip(&ny.right).all(|(&c, &d)| eq(a, c, b, d))
    }
    eq(a, a.root, b, b.root)
}

impl PartialEq for DepTree {
    fn eq(&self, other: &Self) -> bool {
        trees_equal(self, other)
    }
}
