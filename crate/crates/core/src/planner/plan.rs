//! Plan text format.
//!
//! ```text
//! 1. scan_and_update_coordinates_in_scene_graph(targets_to_scan=[apple, yarn])
//! 2. get_a_specific_coordinate_point_using_vlm(prompt_to_vlm="between apple and yarn")
//! 3. add_object_to_scenegraph(object_name=target_spot, coordinates=$step2.out)  # remember the point
//! 4. pick_object(object_name=orange)
//! ```
//!
//! Numbered lines are steps and must parse; steps are numbered 1, 2, 3, ...
//! Every other line is rationale. Values are bare words, quoted strings,
//! numbers, `[lists]`, `None`/`null`, `true`/`false`, or placeholders
//! `$stepK.out(.field)*` naming the result of an earlier step. The full
//! grammar is in `grammar/plan.ebnf`.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("plan line {line}: {message}")]
pub struct PlanParseError {
    pub line: usize,
    pub message: String,
}

/// Reference to the result of an earlier step (1-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placeholder {
    pub step: usize,
    pub path: Vec<String>,
}

impl Placeholder {
    pub fn render(&self) -> String {
        let mut s = format!("$step{}.out", self.step);
        for p in &self.path {
            s.push('.');
            s.push_str(p);
        }
        s
    }

    /// Walks `path` into a step payload; numeric segments index arrays.
    pub fn resolve<'a>(&self, payload: &'a Value) -> Option<&'a Value> {
        self.path.iter().try_fold(payload, |v, seg| match v {
            Value::Object(m) => m.get(seg),
            Value::Array(a) => seg.parse::<usize>().ok().and_then(|i| a.get(i)),
            _ => None,
        })
    }

    pub fn parse(text: &str) -> Option<Placeholder> {
        let rest = text.strip_prefix("$step")?;
        let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
        let step = digits.parse().ok()?;
        let rest = rest[digits.len()..].strip_prefix(".out")?;
        let mut path = Vec::new();
        let mut r = rest;
        while let Some(tail) = r.strip_prefix('.') {
            let seg: String = tail.chars().take_while(|c| c.is_ascii_alphanumeric() || *c == '_').collect();
            if seg.is_empty() {
                return None;
            }
            r = &tail[seg.len()..];
            path.push(seg);
        }
        r.is_empty().then_some(Placeholder { step, path })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArgValue {
    Null,
    Bool(bool),
    Number(f64),
    Text(String),
    List(Vec<ArgValue>),
    Placeholder(Placeholder),
}

impl ArgValue {
    pub fn text(s: impl Into<String>) -> Self {
        ArgValue::Text(s.into())
    }

    pub fn list<S: Into<String>>(items: impl IntoIterator<Item = S>) -> Self {
        ArgValue::List(items.into_iter().map(|s| ArgValue::Text(s.into())).collect())
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            ArgValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn placeholders(&self) -> Vec<&Placeholder> {
        match self {
            ArgValue::Placeholder(p) => vec![p],
            ArgValue::List(items) => items.iter().flat_map(|i| i.placeholders()).collect(),
            _ => vec![],
        }
    }

    /// JSON form used in tool calls; placeholders become `"$stepK.out..."`
    /// strings to be resolved at execution time.
    pub fn to_json(&self) -> Value {
        match self {
            ArgValue::Null => Value::Null,
            ArgValue::Bool(b) => Value::Bool(*b),
            ArgValue::Number(n) => serde_json::Number::from_f64(*n).map(Value::Number).unwrap_or(Value::Null),
            ArgValue::Text(s) => Value::String(s.clone()),
            ArgValue::List(items) => Value::Array(items.iter().map(ArgValue::to_json).collect()),
            ArgValue::Placeholder(p) => Value::String(p.render()),
        }
    }

    pub fn from_json(v: &Value) -> ArgValue {
        match v {
            Value::Null => ArgValue::Null,
            Value::Bool(b) => ArgValue::Bool(*b),
            Value::Number(n) => ArgValue::Number(n.as_f64().unwrap_or(f64::NAN)),
            Value::String(s) => Placeholder::parse(s).map(ArgValue::Placeholder).unwrap_or_else(|| ArgValue::Text(s.clone())),
            Value::Array(a) => ArgValue::List(a.iter().map(ArgValue::from_json).collect()),
            Value::Object(_) => ArgValue::Text(v.to_string()),
        }
    }

    fn render_into(&self, out: &mut String) {
        match self {
            ArgValue::Null => out.push_str("None"),
            ArgValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            ArgValue::Number(n) => out.push_str(&ArgValue::Number(*n).to_json().to_string()),
            ArgValue::Text(s) if is_bareword(s) => out.push_str(s),
            ArgValue::Text(s) => out.push_str(&Value::String(s.clone()).to_string()),
            ArgValue::List(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.render_into(out);
                }
                out.push(']');
            }
            ArgValue::Placeholder(p) => out.push_str(&p.render()),
        }
    }
}

const KEYWORDS: [&str; 7] = ["None", "null", "true", "false", "True", "False", "none"];

fn is_bareword(s: &str) -> bool {
    let mut chars = s.chars();
    let first_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    first_ok && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') && !KEYWORDS.contains(&s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub tool: String,
    pub args: IndexMap<String, ArgValue>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl PlanStep {
    pub fn new(tool: &str) -> Self {
        Self { tool: tool.to_string(), args: IndexMap::new(), note: String::new() }
    }

    pub fn arg(mut self, name: &str, value: ArgValue) -> Self {
        self.args.insert(name.to_string(), value);
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn text_arg(&self, name: &str) -> Option<&str> {
        self.args.get(name).and_then(ArgValue::as_text)
    }

    pub fn args_json(&self) -> serde_json::Map<String, Value> {
        self.args.iter().map(|(k, v)| (k.clone(), v.to_json())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    #[serde(default)]
    pub rationale: String,
}

impl Plan {
    pub fn new(steps: Vec<PlanStep>, rationale: impl Into<String>) -> Self {
        Self { steps, rationale: rationale.into() }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in self.rationale.lines() {
            out.push_str(line);
            out.push('\n');
        }
        for (i, step) in self.steps.iter().enumerate() {
            let _ = write!(out, "{}. {}(", i + 1, step.tool);
            for (j, (k, v)) in step.args.iter().enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                out.push_str(k);
                out.push('=');
                v.render_into(&mut out);
            }
            out.push(')');
            if !step.note.is_empty() {
                out.push_str("  # ");
                out.push_str(&step.note.replace('\n', " "));
            }
            out.push('\n');
        }
        out
    }
}

pub fn parse_plan(text: &str) -> Result<Plan, PlanParseError> {
    let mut steps = Vec::new();
    let mut rationale = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        let digits: String = line.chars().take_while(|c| c.is_ascii_digit()).collect();
        let is_step = !digits.is_empty() && line[digits.len()..].starts_with(". ");
        if !is_step {
            if !line.is_empty() {
                rationale.push(line.to_string());
            }
            continue;
        }
        let err = |message: String| PlanParseError { line: line_no, message };
        let number: usize = digits.parse().map_err(|_| err("step number too large".into()))?;
        if number != steps.len() + 1 {
            return Err(err(format!("expected step {}, found {number}", steps.len() + 1)));
        }
        let mut p = Parser { s: line[digits.len() + 2..].trim_start().as_bytes(), i: 0 };
        let step = p.step().map_err(|m| err(m))?;
        for ph in step.args.values().flat_map(|v| v.placeholders()) {
            if ph.step == 0 || ph.step >= number {
                return Err(err(format!("step {number} refers to $step{}, which is not an earlier step", ph.step)));
            }
        }
        steps.push(step);
    }
    Ok(Plan { steps, rationale: rationale.join("\n") })
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.i).copied()
    }

    fn ws(&mut self) {
        while self.peek().is_some_and(|c| c == b' ' || c == b'\t') {
            self.i += 1;
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), String> {
        self.ws();
        if self.peek() == Some(c) {
            self.i += 1;
            Ok(())
        } else {
            Err(format!("expected '{}' at column {}", c as char, self.i + 1))
        }
    }

    fn ident(&mut self) -> Result<String, String> {
        self.ws();
        let start = self.i;
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'-') {
            self.i += 1;
        }
        if start == self.i || self.s[start].is_ascii_digit() {
            return Err(format!("expected a name at column {}", start + 1));
        }
        Ok(String::from_utf8_lossy(&self.s[start..self.i]).into_owned())
    }

    fn step(&mut self) -> Result<PlanStep, String> {
        let tool = self.ident()?;
        self.expect(b'(')?;
        let mut args = IndexMap::new();
        self.ws();
        if self.peek() == Some(b')') {
            self.i += 1;
        } else {
            loop {
                let name = self.ident()?;
                self.expect(b'=')?;
                let value = self.value()?;
                if args.insert(name.clone(), value).is_some() {
                    return Err(format!("argument '{name}' given twice"));
                }
                self.ws();
                match self.peek() {
                    Some(b',') => self.i += 1,
                    Some(b')') => {
                        self.i += 1;
                        break;
                    }
                    _ => return Err(format!("expected ',' or ')' at column {}", self.i + 1)),
                }
            }
        }
        self.ws();
        let rest = String::from_utf8_lossy(&self.s[self.i..]).into_owned();
        let note = match rest.strip_prefix('#') {
            Some(n) => n.trim().to_string(),
            None if rest.is_empty() => String::new(),
            None => return Err(format!("unexpected text after step: '{rest}'")),
        };
        Ok(PlanStep { tool, args, note })
    }

    fn value(&mut self) -> Result<ArgValue, String> {
        self.ws();
        match self.peek() {
            Some(b'"') => self.string().map(ArgValue::Text),
            Some(b'[') => {
                self.i += 1;
                let mut items = Vec::new();
                self.ws();
                if self.peek() == Some(b']') {
                    self.i += 1;
                    return Ok(ArgValue::List(items));
                }
                loop {
                    items.push(self.value()?);
                    self.ws();
                    match self.peek() {
                        Some(b',') => self.i += 1,
                        Some(b']') => {
                            self.i += 1;
                            return Ok(ArgValue::List(items));
                        }
                        _ => return Err(format!("expected ',' or ']' at column {}", self.i + 1)),
                    }
                }
            }
            Some(b'$') => {
                let start = self.i;
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'.' || c == b'$') {
                    self.i += 1;
                }
                let text = String::from_utf8_lossy(&self.s[start..self.i]).into_owned();
                Placeholder::parse(&text)
                    .map(ArgValue::Placeholder)
                    .ok_or_else(|| format!("malformed placeholder '{text}'"))
            }
            Some(c) if c == b'-' || c.is_ascii_digit() => {
                let start = self.i;
                while self.peek().is_some_and(|c| c.is_ascii_digit() || b"+-.eE".contains(&c)) {
                    self.i += 1;
                }
                let text = std::str::from_utf8(&self.s[start..self.i]).unwrap_or("");
                text.parse::<f64>()
                    .ok()
                    .filter(|n| n.is_finite())
                    .map(ArgValue::Number)
                    .ok_or_else(|| format!("malformed number '{text}'"))
            }
            Some(_) => {
                let word = self.ident()?;
                Ok(match word.as_str() {
                    "None" | "none" | "null" => ArgValue::Null,
                    "true" | "True" => ArgValue::Bool(true),
                    "false" | "False" => ArgValue::Bool(false),
                    _ => ArgValue::Text(word),
                })
            }
            None => Err("missing value".into()),
        }
    }

    fn string(&mut self) -> Result<String, String> {
        let start = self.i;
        self.i += 1;
        let mut escaped = false;
        while let Some(c) = self.peek() {
            self.i += 1;
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, b'\\') => escaped = true,
                (false, b'"') => {
                    let lit = std::str::from_utf8(&self.s[start..self.i]).map_err(|e| e.to_string())?;
                    return serde_json::from_str(lit).map_err(|e| format!("bad string literal: {e}"));
                }
                _ => {}
            }
        }
        Err("unterminated string".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step() {
        let p = parse_plan("1. pick_object(object_name=apple)").unwrap();
        assert_eq!(p.steps.len(), 1);
        assert_eq!(p.steps[0].text_arg("object_name"), Some("apple"));
    }

    #[test]
    fn forward_reference_rejected() {
        let text = "1. pick_object(object_name=apple)\n2. edit_scenegraph(node_name=apple, attribute_name=coordinates, value=$step3.out)\n3. place_object(place_position_name=box)";
        assert_eq!(parse_plan(text).unwrap_err().line, 2);
    }

    #[test]
    fn values_and_notes() {
        let text = "Plan for the task.\n1. add_object_to_scenegraph(object_name=spot, affordance=[\"place here\", x], coordinates=$step0.out)";
        assert!(parse_plan(text).is_err());
        let text = "Plan for the task.\n1. ask_vqa_vlm(query_to_vlm=\"is it \\\"red\\\"?\")  # check colour\n2. edit_scenegraph(node_name=a, attribute_name=coordinates, value=[0.1, -2e-3, 3])\n3. edit_scenegraph(node_name=a, attribute_name=contains, value=None)\nDone.";
        let p = parse_plan(text).unwrap();
        assert_eq!(p.rationale, "Plan for the task.\nDone.");
        assert_eq!(p.steps[0].text_arg("query_to_vlm"), Some("is it \"red\"?"));
        assert_eq!(p.steps[0].note, "check colour");
        assert_eq!(
            p.steps[1].args["value"],
            ArgValue::List(vec![ArgValue::Number(0.1), ArgValue::Number(-0.002), ArgValue::Number(3.0)])
        );
        assert_eq!(p.steps[2].args["value"], ArgValue::Null);
        assert_eq!(parse_plan(&p.render()).unwrap(), p);
    }

    #[test]
    fn numbering_and_syntax_errors() {
        assert_eq!(parse_plan("1. pick_object(object_name=a)\n3. place_object(place_position_name=b)").unwrap_err().line, 2);
        assert_eq!(parse_plan("1. pick_object(object_name=a").unwrap_err().line, 1);
        assert_eq!(parse_plan("intro\n\n1. pick_object(object_name=a) trailing").unwrap_err().line, 3);
    }

    #[test]
    fn placeholder_resolution() {
        let p = Placeholder::parse("$step2.out.tag_3.1").unwrap();
        assert_eq!(p, Placeholder { step: 2, path: vec!["tag_3".into(), "1".into()] });
        let payload = serde_json::json!({"tag_3": [0.1, 0.2, 0.3]});
        assert_eq!(p.resolve(&payload), Some(&serde_json::json!(0.2)));
        assert!(Placeholder::parse("$step.out").is_none());
        assert!(Placeholder::parse("$step2.outx").is_none());
    }
}
