//! Tree-structured data model.
//!
//! Every variable and every message payload is a [`ValueNode`]: an optional
//! basic root value plus an ordered map from child names to non-empty vectors
//! of nodes. Reading an absent path never fails, it yields a void node.

pub(crate) mod path;
mod token;
mod types;

use std::fmt;

use indexmap::IndexMap;

pub use path::{Path, PathParseError, Segment};
pub use token::{fresh_token, TokenSource};
pub(crate) use types::resolve;
pub use types::{
    type_conforms, BasicKind, Cardinality, ConformError, FieldType, TypeEnv, TypeExpr, Violation,
    ViolationReason,
};

/// A scalar value held at the root of a node.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum BasicValue {
    #[default]
    Void,
    Bool(bool),
    Int(i64),
    Double(f64),
    String(String),
}

impl BasicValue {
    pub fn kind(&self) -> BasicKind {
        match self {
            BasicValue::Void => BasicKind::Void,
            BasicValue::Bool(_) => BasicKind::Bool,
            BasicValue::Int(_) => BasicKind::Int,
            BasicValue::Double(_) => BasicKind::Double,
            BasicValue::String(_) => BasicKind::String,
        }
    }

    pub fn is_void(&self) -> bool {
        matches!(self, BasicValue::Void)
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            BasicValue::String(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for BasicValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasicValue::Void => f.write_str("void"),
            BasicValue::Bool(b) => write!(f, "{b}"),
            BasicValue::Int(i) => write!(f, "{i}"),
            BasicValue::Double(d) => write!(f, "{d:?}"),
            BasicValue::String(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<bool> for BasicValue {
    fn from(b: bool) -> Self {
        BasicValue::Bool(b)
    }
}

impl From<i64> for BasicValue {
    fn from(i: i64) -> Self {
        BasicValue::Int(i)
    }
}

impl From<f64> for BasicValue {
    fn from(d: f64) -> Self {
        BasicValue::Double(d)
    }
}

impl From<&str> for BasicValue {
    fn from(s: &str) -> Self {
        BasicValue::String(s.to_owned())
    }
}

impl From<String> for BasicValue {
    fn from(s: String) -> Self {
        BasicValue::String(s)
    }
}

/// A tree-structured value.
///
/// Child vectors are never empty: a name is either absent or maps to at least
/// one node. Equality is structural and ignores the insertion order of child
/// names (but not the order of elements within a vector).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValueNode {
    root: BasicValue,
    children: IndexMap<String, Vec<ValueNode>>,
}

impl ValueNode {
    /// A void-rooted node with no children.
    pub fn void() -> Self {
        Self::default()
    }

    pub fn leaf(root: impl Into<BasicValue>) -> Self {
        ValueNode {
            root: root.into(),
            children: IndexMap::new(),
        }
    }

    pub fn root(&self) -> &BasicValue {
        &self.root
    }

    pub fn set_root(&mut self, root: impl Into<BasicValue>) {
        self.root = root.into();
    }

    pub fn children(&self) -> &IndexMap<String, Vec<ValueNode>> {
        &self.children
    }

    /// The vector stored under `name`, if any.
    pub fn child(&self, name: &str) -> Option<&[ValueNode]> {
        self.children.get(name).map(Vec::as_slice)
    }

    pub fn has_children(&self) -> bool {
        !self.children.is_empty()
    }

    /// True for a void root with no children.
    pub fn is_empty(&self) -> bool {
        self.root.is_void() && self.children.is_empty()
    }

    /// Appends `node` to the vector under `name`, creating it if needed.
    pub fn push_child(&mut self, name: impl Into<String>, node: ValueNode) {
        self.children.entry(name.into()).or_default().push(node);
    }

    /// Builder form of [`push_child`](Self::push_child).
    pub fn with_child(mut self, name: impl Into<String>, node: ValueNode) -> Self {
        self.push_child(name, node);
        self
    }

    /// Replaces the whole vector under `name`. An empty vector removes the name.
    pub fn set_children(&mut self, name: impl Into<String>, nodes: Vec<ValueNode>) {
        let name = name.into();
        if nodes.is_empty() {
            self.children.shift_remove(&name);
        } else {
            self.children.insert(name, nodes);
        }
    }

    pub fn remove_children(&mut self, name: &str) -> Option<Vec<ValueNode>> {
        self.children.shift_remove(name)
    }

    /// Reads the node at `path`; absent paths read as a fresh void node.
    pub fn get(&self, path: &Path) -> ValueNode {
        path_get(self, path)
    }

    /// Borrowing variant of [`get`](Self::get); `None` when the path is absent.
    pub fn lookup(&self, path: &Path) -> Option<&ValueNode> {
        let mut cur = self;
        for seg in path.segments() {
            cur = cur.children.get(&seg.name)?.get(seg.index)?;
        }
        Some(cur)
    }

    /// Writes `value` at `path`, creating intermediate nodes as needed.
    pub fn set(&mut self, path: &Path, value: ValueNode) {
        *self.slot_mut(path) = value;
    }

    /// Mutable access to the node at `path`, auto-vivifying void nodes along
    /// the way and padding vectors up to the requested index.
    pub fn slot_mut(&mut self, path: &Path) -> &mut ValueNode {
        let mut cur = self;
        for seg in path.segments() {
            let vec = cur.children.entry(seg.name.clone()).or_default();
            if vec.len() <= seg.index {
                vec.resize_with(seg.index + 1, ValueNode::void);
            }
            cur = &mut vec[seg.index];
        }
        cur
    }

    /// Number of elements in the vector addressed by `path` (the index of the
    /// last segment is ignored). The empty path counts the node itself.
    pub fn count(&self, path: &Path) -> usize {
        let segs = path.segments();
        let Some((last, prefix)) = segs.split_last() else {
            return 1;
        };
        let mut cur = self;
        for seg in prefix {
            match cur.children.get(&seg.name).and_then(|v| v.get(seg.index)) {
                Some(n) => cur = n,
                None => return 0,
            }
        }
        cur.children.get(&last.name).map_or(0, Vec::len)
    }

    /// Depth of the tree: a leaf has depth 0.
    pub fn depth(&self) -> usize {
        self.children
            .values()
            .flatten()
            .map(|c| c.depth() + 1)
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for ValueNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)?;
        if self.children.is_empty() {
            return Ok(());
        }
        f.write_str(" {")?;
        for (i, (name, nodes)) in self.children.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, " {name}: [")?;
            for (j, n) in nodes.iter().enumerate() {
                if j > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{n}")?;
            }
            f.write_str("]")?;
        }
        f.write_str(" }")
    }
}

/// Returns the node at `path`, or a fresh void node if any segment is absent.
pub fn path_get(state: &ValueNode, path: &Path) -> ValueNode {
    state.lookup(path).cloned().unwrap_or_default()
}

/// Returns `state` with the node at `path` replaced by `value`.
pub fn path_set(mut state: ValueNode, path: &Path, value: ValueNode) -> ValueNode {
    state.set(path, value);
    state
}
