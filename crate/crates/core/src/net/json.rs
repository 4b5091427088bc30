//! JSON mapping of value trees.
//!
//! The root value sits under `"$"` (omitted when void) and every child name
//! maps to an array. A leaf element (non-void root, no children) is written
//! as a bare scalar inside its array. The decoder additionally accepts a bare
//! scalar or object where an array is expected.

use indexmap::IndexMap;
use serde_json::{Map, Number, Value};
use thiserror::Error;

use crate::values::{resolve, BasicKind, BasicValue, Path, TypeEnv, TypeExpr, ValueNode};

const ROOT_KEY: &str = "$";
const MAX_DEPTH: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot decode JSON at {path}: {reason}")]
pub struct JsonDecodeError {
    pub path: Path,
    pub reason: String,
}

/// Canonical JSON text for `value`.
pub fn encode_json(value: &ValueNode) -> String {
    to_json(value).to_string()
}

/// The JSON object for `value` (always an object at the top level).
pub fn to_json(value: &ValueNode) -> Value {
    let mut obj = Map::new();
    if let Some(v) = scalar(value.root()) {
        obj.insert(ROOT_KEY.to_owned(), v);
    }
    for (name, elems) in value.children() {
        let arr = elems.iter().map(element).collect();
        obj.insert(name.clone(), Value::Array(arr));
    }
    Value::Object(obj)
}

fn element(node: &ValueNode) -> Value {
    if !node.has_children() {
        if let Some(v) = scalar(node.root()) {
            return v;
        }
    }
    to_json(node)
}

fn scalar(v: &BasicValue) -> Option<Value> {
    match v {
        BasicValue::Void => None,
        BasicValue::Bool(b) => Some(Value::Bool(*b)),
        BasicValue::Int(i) => Some(Value::Number((*i).into())),
        // Non-finite doubles have no JSON form.
        BasicValue::Double(d) => Some(Number::from_f64(*d).map_or(Value::Null, Value::Number)),
        BasicValue::String(s) => Some(Value::String(s.clone())),
    }
}

/// Parses `text` into a value tree.
///
/// With an expected type, integral numbers in positions typed `double` are
/// read as doubles; no other coercion happens.
pub fn decode_json(
    text: &str,
    expected: Option<(&TypeExpr, &TypeEnv)>,
) -> Result<ValueNode, JsonDecodeError> {
    let json: Value = serde_json::from_str(text).map_err(|e| JsonDecodeError {
        path: Path::root(),
        reason: e.to_string(),
    })?;
    from_json(&json, expected)
}

/// Converts an already-parsed JSON value.
pub fn from_json(
    json: &Value,
    expected: Option<(&TypeExpr, &TypeEnv)>,
) -> Result<ValueNode, JsonDecodeError> {
    let mut d = Decoder {
        env: expected.map(|(_, env)| env),
        path: Path::root(),
    };
    d.node(json, expected.map(|(t, _)| t), 0)
}

struct Decoder<'a> {
    env: Option<&'a TypeEnv>,
    path: Path,
}

impl<'a> Decoder<'a> {
    fn fail<T>(&self, reason: impl Into<String>) -> Result<T, JsonDecodeError> {
        Err(JsonDecodeError {
            path: self.path.clone(),
            reason: reason.into(),
        })
    }

    /// Root kind and field types of the expected type, when known.
    fn shape(
        &self,
        ty: Option<&'a TypeExpr>,
    ) -> (
        Option<BasicKind>,
        Option<&'a IndexMap<String, crate::values::FieldType>>,
    ) {
        let (Some(ty), Some(env)) = (ty, self.env) else {
            return (None, None);
        };
        match resolve(ty, env) {
            Ok(TypeExpr::Basic(k)) => (Some(*k), None),
            Ok(TypeExpr::Node { root, fields }) => (Some(*root), Some(fields)),
            _ => (None, None),
        }
    }

    fn node(
        &mut self,
        json: &Value,
        ty: Option<&'a TypeExpr>,
        depth: usize,
    ) -> Result<ValueNode, JsonDecodeError> {
        if depth > MAX_DEPTH {
            return self.fail("nesting too deep");
        }
        let (root_kind, fields) = self.shape(ty);
        let Value::Object(obj) = json else {
            return Ok(ValueNode::leaf(self.scalar(json, root_kind)?));
        };
        let mut node = ValueNode::void();
        for (key, v) in obj {
            if key == ROOT_KEY {
                if v.is_object() || v.is_array() {
                    return self.fail("`$` must hold a scalar");
                }
                node.set_root(self.scalar(v, root_kind)?);
                continue;
            }
            let field_ty = fields.and_then(|f| f.get(key)).map(|f| &f.ty);
            let items: &[Value] = match v {
                Value::Array(items) => items,
                other => std::slice::from_ref(other),
            };
            let mut elems = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                self.path.push(key.clone(), i);
                let elem = self.node(item, field_ty, depth + 1)?;
                self.path.pop();
                elems.push(elem);
            }
            if !elems.is_empty() {
                node.set_children(key.clone(), elems);
            }
        }
        Ok(node)
    }

    fn scalar(&self, v: &Value, kind: Option<BasicKind>) -> Result<BasicValue, JsonDecodeError> {
        Ok(match v {
            Value::Null => BasicValue::Void,
            Value::Bool(b) => BasicValue::Bool(*b),
            Value::String(s) => BasicValue::String(s.clone()),
            Value::Number(n) => match (n.as_i64(), kind) {
                (Some(i), Some(BasicKind::Double)) => BasicValue::Double(i as f64),
                (Some(i), _) => BasicValue::Int(i),
                (None, _) => match n.as_f64() {
                    Some(d) => BasicValue::Double(d),
                    None => return self.fail(format!("number {n} out of range")),
                },
            },
            Value::Array(_) => return self.fail("unexpected array"),
            Value::Object(_) => unreachable!("objects are nodes"),
        })
    }
}
