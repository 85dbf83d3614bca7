//! Vision-model reply grammars. Every reply, scripted or remote, passes
//! through these parsers before perception sees it.

use super::BackendError;
use crate::geometry::BBox;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Presence replies are exactly one character, `1` or `0` (surrounding
/// whitespace allowed).
pub fn parse_presence(text: &str) -> Result<bool, BackendError> {
    match text.trim() {
        "1" => Ok(true),
        "0" => Ok(false),
        other => Err(BackendError::MalformedResponse(format!("presence reply must be 1 or 0, got '{other}'"))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct WireBox {
    bbox_2d: [i64; 4],
    label: String,
}

/// Strips one surrounding Markdown code fence, if any.
fn unfence(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphanumeric());
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

/// `[{"bbox_2d": [x1, y1, x2, y2], "label": "name"}, ...]`; `x2`/`y2` are
/// exclusive.
pub fn parse_bboxes(text: &str) -> Result<Vec<BBox>, BackendError> {
    let body = unfence(text);
    let raw: Value = serde_json::from_str(body).map_err(|e| BackendError::ParseError(format!("bbox reply is not JSON: {e}")))?;
    let items: Vec<WireBox> =
        serde_json::from_value(raw).map_err(|e| BackendError::ParseError(format!("bbox reply has the wrong shape: {e}")))?;
    items
        .into_iter()
        .map(|b| {
            let [x1, y1, x2, y2] = b.bbox_2d;
            let fits = |v: i64| i32::try_from(v).ok();
            match (fits(x1), fits(y1), fits(x2), fits(y2)) {
                (Some(x1), Some(y1), Some(x2), Some(y2)) => BBox::new(b.label.clone(), x1, y1, x2, y2)
                    .map_err(|_| BackendError::ParseError(format!("degenerate box for '{}'", b.label))),
                _ => Err(BackendError::ParseError(format!("box for '{}' is out of range", b.label))),
            }
        })
        .collect()
}

pub fn format_bboxes(boxes: &[BBox]) -> String {
    let wire: Vec<WireBox> = boxes
        .iter()
        .map(|b| WireBox {
            bbox_2d: [b.x_min as i64, b.y_min as i64, b.x_max as i64, b.y_max as i64],
            label: b.label.clone(),
        })
        .collect();
    serde_json::to_string(&wire).expect("boxes serialize")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointReply {
    pub u: f64,
    pub v: f64,
    pub label: String,
}

/// Exactly one `<points x y>label</points>` element.
pub fn parse_point(text: &str) -> Result<PointReply, BackendError> {
    let re = Regex::new(r"<points\s+(-?[0-9]+(?:\.[0-9]+)?)\s+(-?[0-9]+(?:\.[0-9]+)?)\s*>([^<]*)</points>")
        .expect("static regex");
    let open = text.matches("<points").count();
    let found: Vec<_> = re.captures_iter(text).collect();
    match (open, found.as_slice()) {
        (1, [c]) => Ok(PointReply {
            u: c[1].parse().expect("regex digits"),
            v: c[2].parse().expect("regex digits"),
            label: c[3].trim().to_string(),
        }),
        (0, _) => Err(BackendError::ParseError("no <points> element in reply".into())),
        (n, _) if n > 1 => Err(BackendError::ParseError(format!("expected one point, got {n}"))),
        _ => Err(BackendError::ParseError("malformed <points> element".into())),
    }
}

pub fn format_point(u: f64, v: f64, label: &str) -> String {
    format!("<points {} {}>{label}</points>", u.round() as i64, v.round() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presence() {
        assert!(parse_presence("1").unwrap());
        assert!(!parse_presence(" 0\n").unwrap());
        assert!(matches!(parse_presence("yes"), Err(BackendError::MalformedResponse(_))));
    }

    #[test]
    fn boxes() {
        let b = parse_bboxes(r#"[{"bbox_2d": [10, 20, 30, 40], "label": "apple"}]"#).unwrap();
        assert_eq!(b, vec![BBox::new("apple", 10, 20, 30, 40).unwrap()]);
        assert_eq!(parse_bboxes("```json\n[]\n```").unwrap(), vec![]);
        assert!(parse_bboxes(r#"[{"bbox_2d": [30, 20, 10, 40], "label": "apple"}]"#).is_err());
        assert!(parse_bboxes(r#"[{"bbox_2d": [1, 2, 3], "label": "apple"}]"#).is_err());
        assert!(parse_bboxes("apple at 10,20").is_err());
        assert_eq!(parse_bboxes(&format_bboxes(&b)).unwrap(), b);
    }

    #[test]
    fn points() {
        let p = parse_point("Sure. <points 150 151>spot</points>").unwrap();
        assert_eq!((p.u, p.v, p.label.as_str()), (150.0, 151.0, "spot"));
        assert!(parse_point("<points 1 2>a</points><points 3 4>b</points>").is_err());
        assert!(parse_point("150, 150").is_err());
        assert!(parse_point("<points 1>a</points>").is_err());
    }
}
