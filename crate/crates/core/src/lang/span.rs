use std::fmt;
use std::sync::Arc;

/// A 1-based line/column position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl Pos {
    pub const START: Pos = Pos { line: 1, col: 1 };
}

impl Default for Pos {
    fn default() -> Self {
        Pos::START
    }
}

/// Source range of a token or AST node.
///
/// Spans never affect the structural equality of the trees that carry them:
/// `==` on two spans is always true. Use [`SourceSpan::same_range`] to compare
/// positions.
#[derive(Clone, Default)]
pub struct SourceSpan {
    pub file: Arc<str>,
    pub start: Pos,
    pub end: Pos,
}

impl SourceSpan {
    pub fn new(file: Arc<str>, start: Pos, end: Pos) -> Self {
        SourceSpan { file, start, end }
    }

    /// Smallest span covering both `self` and `other`.
    pub fn to(&self, other: &SourceSpan) -> SourceSpan {
        SourceSpan {
            file: self.file.clone(),
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }

    pub fn same_range(&self, other: &SourceSpan) -> bool {
        self.file == other.file && self.start == other.start && self.end == other.end
    }
}

impl PartialEq for SourceSpan {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl fmt::Debug for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}-{}:{}",
            self.file, self.start.line, self.start.col, self.end.line, self.end.col
        )
    }
}

impl fmt::Display for SourceSpan {
    /// `file:line:col`, the prefix used by diagnostics.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.start.line, self.start.col)
    }
}
