use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{DepTree, Node, NodeId, Side, Sym};
use crate::error::{Error, Result};

/// The nine edit operation kinds, in feature/one-hot order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EditKind {
    #[serde(rename = "INSERT-CHILD")]
    InsertChild,
    #[serde(rename = "INSERT-PARENT")]
    InsertParent,
    #[serde(rename = "DELETE-LEAF")]
    DeleteLeaf,
    #[serde(rename = "DELETE-&-MERGE")]
    DeleteMerge,
    #[serde(rename = "RELABEL-NODE")]
    RelabelNode,
    #[serde(rename = "RELABEL-EDGE")]
    RelabelEdge,
    #[serde(rename = "MOVE-SUBTREE")]
    MoveSubtree,
    #[serde(rename = "NEW-ROOT")]
    NewRoot,
    #[serde(rename = "MOVE-SIBLING")]
    MoveSibling,
}

impl EditKind {
    pub const COUNT: usize = 9;

    pub const ALL: [EditKind; EditKind::COUNT] = [
        EditKind::InsertChild,
        EditKind::InsertParent,
        EditKind::DeleteLeaf,
        EditKind::DeleteMerge,
        EditKind::RelabelNode,
        EditKind::RelabelEdge,
        EditKind::MoveSubtree,
        EditKind::NewRoot,
        EditKind::MoveSibling,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EditKind::InsertChild => "INSERT-CHILD",
            EditKind::InsertParent => "INSERT-PARENT",
            EditKind::DeleteLeaf => "DELETE-LEAF",
            EditKind::DeleteMerge => "DELETE-&-MERGE",
            EditKind::RelabelNode => "RELABEL-NODE",
            EditKind::RelabelEdge => "RELABEL-EDGE",
            EditKind::MoveSubtree => "MOVE-SUBTREE",
            EditKind::NewRoot => "NEW-ROOT",
            EditKind::MoveSibling => "MOVE-SIBLING",
        }
    }
}

impl fmt::Display for EditKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which end of a side's child list: `First` is nearest the head, `Last` farthest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiblingPosition {
    First,
    Last,
}

/// One tree edit. Node ids refer to the tree the edit is applied to; inserted
/// nodes take the next free id.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum EditOp {
    /// New node as the farthest child on `side` of `node`.
    #[serde(rename = "INSERT-CHILD")]
    InsertChild {
        node: NodeId,
        lemma: Sym,
        pos: Sym,
        deprel: Sym,
        side: Side,
    },
    /// New node takes the place of non-root `node`, which becomes its only
    /// child on `side`.
    #[serde(rename = "INSERT-PARENT")]
    InsertParent {
        node: NodeId,
        lemma: Sym,
        pos: Sym,
        deprel: Sym,
        side: Side,
    },
    #[serde(rename = "DELETE-LEAF")]
    DeleteLeaf { node: NodeId },
    /// Removes a node with exactly one child; the child takes its place.
    #[serde(rename = "DELETE-&-MERGE")]
    DeleteMerge { node: NodeId },
    #[serde(rename = "RELABEL-NODE")]
    RelabelNode { node: NodeId, lemma: Sym, pos: Sym },
    #[serde(rename = "RELABEL-EDGE")]
    RelabelEdge { node: NodeId, deprel: Sym },
    /// Moves the subtree at `node` to be the farthest child on `side` of `dest`.
    #[serde(rename = "MOVE-SUBTREE")]
    MoveSubtree { node: NodeId, dest: NodeId, side: Side },
    /// Promotes `node` to root; the former root becomes its farthest child on `side`.
    #[serde(rename = "NEW-ROOT")]
    NewRoot { node: NodeId, side: Side },
    #[serde(rename = "MOVE-SIBLING")]
    MoveSibling {
        node: NodeId,
        side: Side,
        position: SiblingPosition,
    },
}

impl EditOp {
    pub fn kind(&self) -> EditKind {
        match self {
            EditOp::InsertChild { .. } => EditKind::InsertChild,
            EditOp::InsertParent { .. } => EditKind::InsertParent,
            EditOp::DeleteLeaf { .. } => EditKind::DeleteLeaf,
            EditOp::DeleteMerge { .. } => EditKind::DeleteMerge,
            EditOp::RelabelNode { .. } => EditKind::RelabelNode,
            EditOp::RelabelEdge { .. } => EditKind::RelabelEdge,
            EditOp::MoveSubtree { .. } => EditKind::MoveSubtree,
            EditOp::NewRoot { .. } => EditKind::NewRoot,
            EditOp::MoveSibling { .. } => EditKind::MoveSibling,
        }
    }

    /// The node the operation is addressed to (`n` in every variant).
    pub fn node(&self) -> NodeId {
        match *self {
            EditOp::InsertChild { node, .. }
            | EditOp::InsertParent { node, .. }
            | EditOp::DeleteLeaf { node }
            | EditOp::DeleteMerge { node }
            | EditOp::RelabelNode { node, .. }
            | EditOp::RelabelEdge { node, .. }
            | EditOp::MoveSubtree { node, .. }
            | EditOp::NewRoot { node, .. }
            | EditOp::MoveSibling { node, .. } => node,
        }
    }
}

impl fmt::Display for EditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EditOp::InsertChild {
                node,
                lemma,
                pos,
                deprel,
                side,
            }
            | EditOp::InsertParent {
                node,
                lemma,
                pos,
                deprel,
                side,
            } => write!(f, "{}(n={node}, {lemma}/{pos}, {deprel}, {side})", self.kind()),
            EditOp::DeleteLeaf { node } | EditOp::DeleteMerge { node } => {
                write!(f, "{}(n={node})", self.kind())
            }
            EditOp::RelabelNode { node, lemma, pos } => {
                write!(f, "RELABEL-NODE(n={node}, {lemma}/{pos})")
            }
            EditOp::RelabelEdge { node, deprel } => write!(f, "RELABEL-EDGE(n={node}, {deprel})"),
            EditOp::MoveSubtree { node, dest, side } => {
                write!(f, "MOVE-SUBTREE(n={node}, m={dest}, {side})")
            }
            EditOp::NewRoot { node, side } => write!(f, "NEW-ROOT(n={node}, {side})"),
            EditOp::MoveSibling { node, side, position } => {
                write!(f, "MOVE-SIBLING(n={node}, {side}, {position:?})")
            }
        }
    }
}

fn illegal(msg: impl Into<String>) -> Error {
    Error::IllegalEdit(msg.into())
}

fn live(tree: &DepTree, id: NodeId) -> Result<&Node> {
    tree.node(id).ok_or_else(|| illegal(format!("no node {id}")))
}

fn non_root(tree: &DepTree, id: NodeId, kind: EditKind) -> Result<&Node> {
    let n = live(tree, id)?;
    if id == tree.root() {
        return Err(illegal(format!("{kind} cannot target the root")));
    }
    Ok(n)
}

/// Applies `op` in place. On error the tree is left untouched.
pub(crate) fn apply_in_place(tree: &mut DepTree, op: &EditOp) -> Result<()> {
    let kind = op.kind();
    match *op {
        EditOp::InsertChild {
            node,
            lemma,
            pos,
            deprel,
            side,
        } => {
            live(tree, node)?;
            let id = tree.push_detached(Node::new(lemma, pos, deprel, None));
            tree.attach_far(node, side, id);
        }
        EditOp::InsertParent {
            node,
            lemma,
            pos,
            deprel,
            side,
        } => {
            non_root(tree, node, kind)?;
            let (parent, pside, idx) = tree.detach(node).expect("non-root has a parent");
            let id = tree.push_detached(Node::new(lemma, pos, deprel, None));
            tree.attach_at(parent, pside, idx, id);
            tree.attach_far(id, side, node);
        }
        EditOp::DeleteLeaf { node } => {
            if !non_root(tree, node, kind)?.is_leaf() {
                return Err(illegal(format!("DELETE-LEAF on non-leaf node {node}")));
            }
            tree.detach(node);
            tree.remove_slot(node);
        }
        EditOp::DeleteMerge { node } => {
            let n = non_root(tree, node, kind)?;
            if n.child_count() != 1 {
                return Err(illegal(format!(
                    "DELETE-&-MERGE on node {node} with {} children",
                    n.child_count()
                )));
            }
            let child = n.left.first().or(n.right.first()).copied().expect("one child");
            let (parent, pside, idx) = tree.detach(node).expect("non-root has a parent");
            tree.detach(child);
            tree.attach_at(parent, pside, idx, child);
            tree.remove_slot(node);
        }
        EditOp::RelabelNode { node, lemma, pos } => {
            live(tree, node)?;
            let n = tree.node_mut(node).expect("checked");
            n.lemma = lemma;
            n.pos = pos;
        }
        EditOp::RelabelEdge { node, deprel } => {
            live(tree, node)?;
            tree.node_mut(node).expect("checked").deprel = deprel;
        }
        EditOp::MoveSubtree { node, dest, side } => {
            non_root(tree, node, kind)?;
            live(tree, dest)?;
            if tree.is_descendant(dest, node) {
                return Err(illegal(format!(
                    "MOVE-SUBTREE destination {dest} lies inside the moved subtree {node}"
                )));
            }
            tree.detach(node);
            tree.attach_far(dest, side, node);
        }
        EditOp::NewRoot { node, side } => {
            non_root(tree, node, kind)?;
            let old = tree.root();
            tree.detach(node);
            tree.node_mut(node).expect("checked").deprel = Sym::new("root");
            tree.attach_far(node, side, old);
            tree.set_root(node);
        }
        EditOp::MoveSibling { node, side, position } => {
            non_root(tree, node, kind)?;
            let (parent, _, _) = tree.detach(node).expect("non-root has a parent");
            match position {
                SiblingPosition::First => tree.attach_near(parent, side, node),
                SiblingPosition::Last => tree.attach_far(parent, side, node),
            }
        }
    }
    Ok(())
}

/// Returns the edited copy of `tree`; the input is never modified.
pub fn apply_edit(tree: &DepTree, op: &EditOp) -> Result<DepTree> {
    let mut out = tree.clone();
    apply_in_place(&mut out, op)?;
    Ok(out)
}
