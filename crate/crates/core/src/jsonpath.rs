//! JSONPath subset: read and write over JSON trees.
//!
//! Supported syntax is exactly what transformation rules need: root `$`,
//! dot children `.field`, bracket indices `[0]`, wildcards `[*]` / `.*`,
//! and single-clause equality filters `[?(@.field == 'literal')]`. No
//! recursive descent, no slices, no arithmetic.
//!
//! `get` returns all matches in document order. `set` is persistent:
//! it leaves the input untouched and returns a new document, creating
//! intermediate containers along the way.

use serde_json::{Map, Number, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("path syntax error at byte {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("cannot set through a wildcard segment")]
    SetOnWildcard,
    #[error("type conflict at '{at}': cannot write {wanted} into {found}")]
    TypeConflict {
        at: String,
        wanted: &'static str,
        found: &'static str,
    },
}

/// Literal on the right-hand side of an equality filter. The paper's rules
/// use single-quoted strings; bare numbers are accepted as well.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterLiteral {
    Str(String),
    Num(Number),
}

impl FilterLiteral {
    fn matches(&self, value: &Value) -> bool {
        match (self, value) {
            (FilterLiteral::Str(s), Value::String(v)) => s == v,
            (FilterLiteral::Num(n), Value::Number(v)) => n.as_f64() == v.as_f64(),
            _ => false,
        }
    }

    fn to_value(&self) -> Value {
        match self {
            FilterLiteral::Str(s) => Value::String(s.clone()),
            FilterLiteral::Num(n) => Value::Number(n.clone()),
        }
    }
}

impl std::fmt::Display for FilterLiteral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FilterLiteral::Str(s) => write!(f, "'{s}'"),
            FilterLiteral::Num(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Segment {
    Root,
    Child(String),
    Index(usize),
    Wildcard,
    /// `[?(@.field == literal)]` — equality is the only comparator.
    Filter {
        field: String,
        literal: FilterLiteral,
    },
}

/// A parsed path expression. The first segment is always [`Segment::Root`].
#[derive(Debug, Clone, PartialEq)]
pub struct PathExpr {
    segments: Vec<Segment>,
}

impl PathExpr {
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_wildcard_free(&self) -> bool {
        !self.segments.iter().any(|s| matches!(s, Segment::Wildcard))
    }

    /// Renders the expression back to path text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for segment in &self.segments {
            match segment {
                Segment::Root => out.push('$'),
                Segment::Child(name) => {
                    out.push('.');
                    out.push_str(name);
                }
                Segment::Index(i) => {
                    out.push_str(&format!("[{i}]"));
                }
                Segment::Wildcard => out.push_str("[*]"),
                Segment::Filter { field, literal } => {
                    out.push_str(&format!("[?(@.{field} == {literal})]"));
                }
            }
        }
        out
    }
}

impl std::fmt::Display for PathExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.render())
    }
}

impl std::str::FromStr for PathExpr {
    type Err = PathError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_path(s)
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            bytes: text.as_bytes(),
            pos: 0,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek();
        if b.is_some() {
            self.pos += 1;
        }
        b
    }

    fn expect(&mut self, byte: u8, expected: &str) -> Result<(), PathError> {
        if self.peek() == Some(byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(expected))
        }
    }

    fn err(&self, expected: &str) -> PathError {
        PathError::Syntax {
            offset: self.pos,
            expected: expected.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.peek() == Some(b' ') {
            self.pos += 1;
        }
    }

    fn ident(&mut self) -> Result<String, PathError> {
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b.is_ascii_alphanumeric() || b == b'_' || b == b'-' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.pos == start {
            return Err(self.err("field name"));
        }
        Ok(std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii ident")
            .to_string())
    }

    fn number_literal(&mut self) -> Result<FilterLiteral, PathError> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        while let Some(b) = self.peek() {
            if b.is_ascii_digit() || b == b'.' || b == b'e' || b == b'E' || b == b'+' || b == b'-' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii number");
        let num: Number = text.parse::<serde_json::Number>().map_err(|_| PathError::Syntax {
            offset: start,
            expected: "numeric literal".to_string(),
        })?;
        Ok(FilterLiteral::Num(num))
    }

    fn string_literal(&mut self) -> Result<FilterLiteral, PathError> {
        self.expect(b'\'', "opening single quote")?;
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b == b'\'' {
                let text = std::str::from_utf8(&self.bytes[start..self.pos])
                    .map_err(|_| self.err("utf-8 string literal"))?
                    .to_string();
                self.pos += 1;
                return Ok(FilterLiteral::Str(text));
            }
            self.pos += 1;
        }
        Err(self.err("closing single quote"))
    }

    fn bracket(&mut self) -> Result<Segment, PathError> {
        match self.peek() {
            Some(b'*') => {
                self.pos += 1;
                self.expect(b']', "']'")?;
                Ok(Segment::Wildcard)
            }
            Some(b'?') => {
                self.pos += 1;
                self.expect(b'(', "'('")?;
                self.expect(b'@', "'@'")?;
                self.expect(b'.', "'.'")?;
                let field = self.ident()?;
                self.skip_ws();
                self.expect(b'=', "'=='")?;
                self.expect(b'=', "'=='")?;
                self.skip_ws();
                let literal = match self.peek() {
                    Some(b'\'') => self.string_literal()?,
                    Some(b) if b.is_ascii_digit() || b == b'-' => self.number_literal()?,
                    _ => return Err(self.err("string or numeric literal")),
                };
                self.skip_ws();
                self.expect(b')', "')'")?;
                self.expect(b']', "']'")?;
                Ok(Segment::Filter { field, literal })
            }
            Some(b) if b.is_ascii_digit() => {
                let start = self.pos;
                while matches!(self.peek(), Some(d) if d.is_ascii_digit()) {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("digits");
                let index: usize = text.parse().map_err(|_| PathError::Syntax {
                    offset: start,
                    expected: "array index".to_string(),
                })?;
                self.expect(b']', "']'")?;
                Ok(Segment::Index(index))
            }
            _ => Err(self.err("'*', '?(', or array index")),
        }
    }
}

/// Parses path text into a [`PathExpr`], rejecting unsupported syntax with
/// the byte offset of the problem.
pub fn parse_path(text: &str) -> Result<PathExpr, PathError> {
    let mut parser = Parser::new(text);
    parser.expect(b'$', "'$' root")?;
    let mut segments = vec![Segment::Root];
    loop {
        match parser.bump() {
            None => break,
            Some(b'.') => {
                if parser.peek() == Some(b'.') {
                    return Err(PathError::Syntax {
                        offset: parser.pos - 1,
                        expected: "child name (recursive descent is unsupported)".to_string(),
                    });
                }
                if parser.peek() == Some(b'*') {
                    parser.pos += 1;
                    segments.push(Segment::Wildcard);
                } else {
                    segments.push(Segment::Child(parser.ident()?));
                }
            }
            Some(b'[') => segments.push(parser.bracket()?),
            Some(_) => {
                return Err(PathError::Syntax {
                    offset: parser.pos - 1,
                    expected: "'.' or '['".to_string(),
                })
            }
        }
    }
    Ok(PathExpr { segments })
}

/// Evaluates a path against a document, returning all matches in document
/// order. No match is an empty list, never an error.
pub fn get<'a>(doc: &'a Value, path: &PathExpr) -> Vec<&'a Value> {
    let mut current: Vec<&'a Value> = vec![doc];
    for segment in path.segments() {
        match segment {
            Segment::Root => {}
            Segment::Child(name) => {
                current = current
                    .iter()
                    .filter_map(|v| v.as_object().and_then(|o| o.get(name.as_str())))
                    .collect();
            }
            Segment::Index(i) => {
                current = current
                    .iter()
                    .filter_map(|v| v.as_array().and_then(|a| a.get(*i)))
                    .collect();
            }
            Segment::Wildcard => {
                let mut next = Vec::new();
                for v in current {
                    match v {
                        Value::Array(items) => next.extend(items.iter()),
                        Value::Object(map) => next.extend(map.values()),
                        _ => {}
                    }
                }
                current = next;
            }
            Segment::Filter { field, literal } => {
                let mut next = Vec::new();
                for v in current {
                    if let Value::Array(items) = v {
                        for item in items {
                            if let Some(candidate) = item.as_object().and_then(|o| o.get(field.as_str())) {
                                if literal.matches(candidate) {
                                    next.push(item);
                                }
                            }
                        }
                    }
                }
                current = next;
            }
        }
        if current.is_empty() {
            break;
        }
    }
    current
}

fn type_name(value: Option<&Value>) -> &'static str {
    match value {
        None | Some(Value::Null) => "null",
        Some(Value::Bool(_)) => "boolean",
        Some(Value::Number(_)) => "number",
        Some(Value::String(_)) => "string",
        Some(Value::Array(_)) => "array",
        Some(Value::Object(_)) => "object",
    }
}

/// Writes `value` at `path`, returning a new document. Intermediate objects
/// and arrays are created as needed; a filter over a missing or non-matching
/// array creates the element `{field: literal}` and writes into it.
pub fn set(doc: &Value, path: &PathExpr, value: &Value) -> Result<Value, PathError> {
    if !path.is_wildcard_free() {
        return Err(PathError::SetOnWildcard);
    }
    let segments = path.segments();
    debug_assert!(matches!(segments.first(), Some(Segment::Root)));
    set_inner(Some(doc), &segments[1..], value, "$")
}

fn set_inner(
    node: Option<&Value>,
    rest: &[Segment],
    value: &Value,
    at: &str,
) -> Result<Value, PathError> {
    let Some((segment, tail)) = rest.split_first() else {
        return Ok(value.clone());
    };
    match segment {
        Segment::Root => set_inner(node, tail, value, at),
        Segment::Child(name) => {
            let mut map = match node {
                None | Some(Value::Null) => Map::new(),
                Some(Value::Object(m)) => m.clone(),
                other => {
                    return Err(PathError::TypeConflict {
                        at: at.to_string(),
                        wanted: "object",
                        found: type_name(other),
                    })
                }
            };
            let child = set_inner(map.get(name.as_str()), tail, value, &format!("{at}.{name}"))?;
            map.insert(name.clone(), child);
            Ok(Value::Object(map))
        }
        Segment::Index(i) => {
            let mut items = match node {
                None | Some(Value::Null) => Vec::new(),
                Some(Value::Array(a)) => a.clone(),
                other => {
                    return Err(PathError::TypeConflict {
                        at: at.to_string(),
                        wanted: "array",
                        found: type_name(other),
                    })
                }
            };
            while items.len() <= *i {
                items.push(Value::Null);
            }
            items[*i] = set_inner(Some(&items[*i]), tail, value, &format!("{at}[{i}]"))?;
            Ok(Value::Array(items))
        }
        Segment::Filter { field, literal } => {
            let mut items = match node {
                None | Some(Value::Null) => Vec::new(),
                Some(Value::Array(a)) => a.clone(),
                other => {
                    return Err(PathError::TypeConflict {
                        at: at.to_string(),
                        wanted: "array",
                        found: type_name(other),
                    })
                }
            };
            let found = items.iter().position(|item| {
                item.as_object()
                    .and_then(|o| o.get(field.as_str()))
                    .is_some_and(|v| literal.matches(v))
            });
            let idx = match found {
                Some(idx) => idx,
                None => {
                    let mut seed = Map::new();
                    seed.insert(field.clone(), literal.to_value());
                    items.push(Value::Object(seed));
                    items.len() - 1
                }
            };
            let at = format!("{at}[?(@.{field} == {literal})]");
            items[idx] = set_inner(Some(&items[idx]), tail, value, &at)?;
            Ok(Value::Array(items))
        }
        Segment::Wildcard => Err(PathError::SetOnWildcard),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn p(text: &str) -> PathExpr {
        parse_path(text).unwrap()
    }

    #[test]
    fn parses_dot_chain() {
        let path = p("$.sensor_data.Accelerometer.timestamp");
        assert_eq!(
            path.segments(),
            &[
                Segment::Root,
                Segment::Child("sensor_data".into()),
                Segment::Child("Accelerometer".into()),
                Segment::Child("timestamp".into()),
            ]
        );
    }

    #[test]
    fn parses_filter_expression() {
        let path = p("$[?(@.name == 'Accelerometer')].time");
        assert_eq!(
            path.segments(),
            &[
                Segment::Root,
                Segment::Filter {
                    field: "name".into(),
                    literal: FilterLiteral::Str("Accelerometer".into()),
                },
                Segment::Child("time".into()),
            ]
        );
    }

    #[test]
    fn parses_bare_root() {
        assert_eq!(p("$").segments(), &[Segment::Root]);
    }

    #[test]
    fn parses_index_and_wildcard() {
        let path = p("$[3].values[*]");
        assert_eq!(
            path.segments(),
            &[
                Segment::Root,
                Segment::Index(3),
                Segment::Child("values".into()),
                Segment::Wildcard,
            ]
        );
    }

    #[test]
    fn rejects_unsupported_syntax_with_offset() {
        let err = parse_path("$..x").unwrap_err();
        match err {
            PathError::Syntax { offset, .. } => assert_eq!(offset, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_path("").is_err());
        assert!(parse_path("$.a[1:2]").is_err());
        assert!(parse_path("$[?(@.a > 3)]").is_err());
        assert!(parse_path("$[?(@.a == \"x\")]").is_err(), "double quotes unsupported");
    }

    #[test]
    fn get_single_child_chain() {
        let doc = json!({"a": {"b": 1}});
        assert_eq!(get(&doc, &p("$.a.b")), vec![&json!(1)]);
    }

    #[test]
    fn get_filter_over_root_array() {
        let doc = json!([{"name": "Accelerometer", "time": 5}]);
        assert_eq!(
            get(&doc, &p("$[?(@.name == 'Accelerometer')].time")),
            vec![&json!(5)]
        );
    }

    #[test]
    fn get_no_match_is_empty() {
        let doc = json!({"a": 1});
        assert!(get(&doc, &p("$.zzz")).is_empty());
    }

    #[test]
    fn get_wildcard_document_order() {
        let doc = json!([10, 20, 30]);
        assert_eq!(get(&doc, &p("$[*]")), vec![&json!(10), &json!(20), &json!(30)]);
    }

    #[test]
    fn set_vivifies_objects() {
        let out = set(&json!({}), &p("$.a.b"), &json!(7)).unwrap();
        assert_eq!(out, json!({"a": {"b": 7}}));
    }

    #[test]
    fn set_filter_creates_matching_element() {
        let out = set(
            &json!([]),
            &p("$[?(@.name == 'Accelerometer')].time"),
            &json!(5),
        )
        .unwrap();
        assert_eq!(out, json!([{"name": "Accelerometer", "time": 5}]));
        // get-after-set sees exactly the written value
        assert_eq!(
            get(&out, &p("$[?(@.name == 'Accelerometer')].time")),
            vec![&json!(5)]
        );
    }

    #[test]
    fn set_overwrites_scalar() {
        let out = set(&json!({"a": 1}), &p("$.a"), &json!(2)).unwrap();
        assert_eq!(out, json!({"a": 2}));
    }

    #[test]
    fn set_leaves_input_untouched() {
        let doc = json!({"a": {"b": 1}});
        let copy = doc.clone();
        let _ = set(&doc, &p("$.a.b"), &json!(99)).unwrap();
        assert_eq!(doc, copy);
    }

    #[test]
    fn set_type_conflict_on_scalar() {
        let err = set(&json!({"a": 1}), &p("$.a.b"), &json!(2)).unwrap_err();
        assert!(matches!(err, PathError::TypeConflict { .. }));
    }

    #[test]
    fn set_rejects_wildcard() {
        let err = set(&json!({}), &p("$.a[*]"), &json!(1)).unwrap_err();
        assert!(matches!(err, PathError::SetOnWildcard));
    }

    #[test]
    fn set_index_pads_with_null() {
        let out = set(&json!([]), &p("$[2]"), &json!("x")).unwrap();
        assert_eq!(out, json!([null, null, "x"]));
    }

    #[test]
    fn render_round_trips() {
        for text in [
            "$",
            "$.a.b",
            "$[0].x",
            "$[*]",
            "$.a[*].b",
            "$[?(@.name == 'Accelerometer')].time",
            "$[?(@.id == 3)].v",
        ] {
            let parsed = p(text);
            let rendered = parsed.render();
            assert_eq!(parse_path(&rendered).unwrap(), parsed, "{text}");
        }
    }
}
