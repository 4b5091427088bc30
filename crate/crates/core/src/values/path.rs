use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// One step of a [`Path`]: a child name and an index into its vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Segment {
    pub name: String,
    pub index: usize,
}

impl Segment {
    pub fn new(name: impl Into<String>, index: usize) -> Self {
        Segment {
            name: name.into(),
            index,
        }
    }
}

/// A dotted path into a [`ValueNode`](super::ValueNode), e.g. `csets.sid` or
/// `cart.item[2]`. An omitted index means index 0.
///
/// The empty path addresses the node itself and prints as `(root)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Path {
    segments: Vec<Segment>,
}

impl Path {
    pub fn root() -> Self {
        Path::default()
    }

    pub fn new(segments: Vec<Segment>) -> Self {
        Path { segments }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_root(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn child(&self, name: impl Into<String>, index: usize) -> Path {
        let mut segments = self.segments.clone();
        segments.push(Segment::new(name, index));
        Path { segments }
    }

    pub fn push(&mut self, name: impl Into<String>, index: usize) {
        self.segments.push(Segment::new(name, index));
    }

    pub fn pop(&mut self) -> Option<Segment> {
        self.segments.pop()
    }

    /// True if `self` is a (non-strict) prefix of `other`.
    pub fn is_prefix_of(&self, other: &Path) -> bool {
        other.segments.len() >= self.segments.len()
            && self.segments.iter().zip(&other.segments).all(|(a, b)| a == b)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.segments.is_empty() {
            return f.write_str("(root)");
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            f.write_str(&seg.name)?;
            if seg.index != 0 {
                write!(f, "[{}]", seg.index)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid path {input:?}: {reason}")]
pub struct PathParseError {
    pub input: String,
    pub reason: &'static str,
}

pub(crate) fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub(crate) fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl FromStr for Path {
    type Err = PathParseError;

    /// Parses `name[idx].name...`; whitespace is not allowed.
    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let err = |reason| PathParseError {
            input: input.to_owned(),
            reason,
        };
        if input.is_empty() {
            return Err(err("empty path"));
        }
        let mut segments = Vec::new();
        for part in input.split('.') {
            let (name, index) = match part.find('[') {
                Some(open) => {
                    let rest = &part[open + 1..];
                    let digits = rest.strip_suffix(']').ok_or_else(|| err("unclosed index"))?;
                    let index = digits.parse().map_err(|_| err("bad index"))?;
                    (&part[..open], index)
                }
                None => (part, 0),
            };
            let mut chars = name.chars();
            match chars.next() {
                Some(c) if is_ident_start(c) => {}
                _ => return Err(err("segment is not an identifier")),
            }
            if !chars.all(is_ident_continue) {
                return Err(err("segment is not an identifier"));
            }
            segments.push(Segment::new(name, index));
        }
        Ok(Path { segments })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let p: Path = "x.y[2]".parse().unwrap();
        assert_eq!(p.segments(), &[Segment::new("x", 0), Segment::new("y", 2)]);
        assert_eq!(p.to_string(), "x.y[2]");
        assert_eq!("a[0].b".parse::<Path>().unwrap().to_string(), "a.b");
    }

    #[test]
    fn parse_rejects_garbage() {
        for bad in ["", "a..b", "1a", "a[", "a[x]", "a b"] {
            assert!(bad.parse::<Path>().is_err(), "{bad}");
        }
    }

    #[test]
    fn prefix() {
        let a: Path = "a".parse().unwrap();
        let ab: Path = "a.b".parse().unwrap();
        assert!(a.is_prefix_of(&ab));
        assert!(!ab.is_prefix_of(&a));
        assert!(Path::root().is_prefix_of(&a));
    }
}
