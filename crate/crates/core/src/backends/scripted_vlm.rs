use super::edt::distance_transform;
use super::wire::{format_bboxes, format_point};
use super::{BackendError, VlmBackend, VlmKind, VlmQuery};
use crate::geometry::BBox;
use crate::sim::{rng, CaptureResult, WorldState, NO_HIT};
use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VlmNoise {
    /// Each box edge moves by a uniform integer in `[-jitter_px, jitter_px]`.
    pub jitter_px: i32,
    pub presence_false_negative: f64,
    pub presence_false_positive: f64,
    /// Clearance required around a "near X" spot, meters.
    pub near_clearance: f64,
}

impl Default for VlmNoise {
    fn default() -> Self {
        Self { jitter_px: 3, presence_false_negative: 0.0, presence_false_positive: 0.0, near_clearance: 0.045 }
    }
}

/// Vision model answering from simulator ground truth. Replies are wire
/// text; answers depend only on the world, the capture and the query.
#[derive(Debug, Clone, Default)]
pub struct ScriptedVlm {
    pub noise: VlmNoise,
}

const COLORS: [&str; 12] =
    ["red", "orange", "yellow", "green", "blue", "purple", "white", "black", "brown", "grey", "gray", "pink"];

enum PointPrompt {
    Between(String, String),
    Free,
    Near(String),
    Center(String),
}

impl ScriptedVlm {
    pub fn new(noise: VlmNoise) -> Self {
        Self { noise }
    }

    fn presence(&self, name: &str, world: &WorldState, cap: &CaptureResult) -> String {
        let truth = cap.is_visible(name);
        let u = rng::unit(world.seed(), &[rng::PRESENCE, cap.id, rng::name_tag(name)]);
        let flip = if truth { u < self.noise.presence_false_negative } else { u < self.noise.presence_false_positive };
        if truth != flip { "1" } else { "0" }.to_string()
    }

    fn bboxes(&self, names: &[&str], world: &WorldState, cap: &CaptureResult) -> String {
        let (w, h) = (cap.depth.width() as i32, cap.depth.height() as i32);
        let j = self.noise.jitter_px.max(0);
        let boxes: Vec<BBox> = names
            .iter()
            .filter_map(|n| cap.bbox(n))
            .map(|b| {
                let mut r = rng::stream(world.seed(), &[rng::BBOX_JITTER, cap.id, rng::name_tag(&b.label)]);
                let mut d = || if j == 0 { 0 } else { r.random_range(-j..=j) };
                let (dx0, dy0, dx1, dy1) = (d(), d(), d(), d());
                let x0 = (b.x_min + dx0).clamp(0, w - 1);
                let y0 = (b.y_min + dy0).clamp(0, h - 1);
                let x1 = (b.x_max + dx1).clamp(x0 + 1, w);
                let y1 = (b.y_max + dy1).clamp(y0 + 1, h);
                BBox { label: b.label.clone(), x_min: x0, y_min: y0, x_max: x1, y_max: y1 }
            })
            .collect();
        format_bboxes(&boxes)
    }

    fn resolve_name(world: &WorldState, raw: &str) -> Option<String> {
        let n = raw.trim().replace(' ', "_");
        world.objects.contains_key(&n).then_some(n)
    }

    fn parse_point_prompt(text: &str, world: &WorldState) -> Result<PointPrompt, BackendError> {
        let t = text.trim().trim_end_matches(['.', '?', '!']).to_lowercase();
        let t = t.strip_prefix("the ").unwrap_or(&t).to_string();
        let obj = r"([a-z0-9_ ]+?)";
        let between = Regex::new(&format!(r"^(?:(?:a |the )?(?:point|spot|location) )?between (?:the )?{obj} and (?:the )?{obj}$"))
            .expect("static regex");
        let free = Regex::new(
            r"^(?:a |an )?(?:(?:free|empty|open|clear) (?:spot|space|area|location|place)|temporary (?:location|spot|place))(?: on the table)?$",
        )
        .expect("static regex");
        let near = Regex::new(&format!(
            r"^(?:a |an )?(?:(?:free|empty|open|clear) )?(?:(?:spot|space|area|location|place) )?(?:near|next to|beside) (?:the )?{obj}$"
        ))
        .expect("static regex");
        let center = Regex::new(&format!(r"^(?:center|centre|middle|knob|handle|top) of (?:the )?{obj}$")).expect("static regex");
        let unknown = |n: &str| BackendError::UnsupportedPrompt(format!("unknown object '{n}' in '{text}'"));
        let name = |n: &str| Self::resolve_name(world, n).ok_or_else(|| unknown(n));
        if let Some(c) = between.captures(&t) {
            return Ok(PointPrompt::Between(name(&c[1])?, name(&c[2])?));
        }
        if free.is_match(&t) {
            return Ok(PointPrompt::Free);
        }
        if let Some(c) = near.captures(&t) {
            return Ok(PointPrompt::Near(name(&c[1])?));
        }
        if let Some(c) = center.captures(&t) {
            return Ok(PointPrompt::Center(name(&c[1])?));
        }
        if let Some(n) = Self::resolve_name(world, &t) {
            return Ok(PointPrompt::Center(n));
        }
        Err(BackendError::UnsupportedPrompt(text.to_string()))
    }

    fn center_of(cap: &CaptureResult, name: &str) -> Result<(f64, f64), BackendError> {
        cap.bbox(name).map(BBox::center).ok_or_else(|| BackendError::MissingLabel(name.to_string()))
    }

    /// Per-pixel clearance (pixels) to the nearest object, the table edge or
    /// the image border.
    fn clearance(cap: &CaptureResult) -> Vec<f64> {
        let (w, h) = (cap.depth.width(), cap.depth.height());
        let mask: Vec<bool> = cap.ids.iter().map(|&i| i >= 0 || i == NO_HIT).collect();
        let d2 = distance_transform(&mask, w, h);
        d2.iter()
            .enumerate()
            .map(|(k, v)| {
                let (x, y) = ((k % w) as f64, (k / w) as f64);
                v.sqrt().min(x + 1.0).min(y + 1.0).min(w as f64 - x).min(h as f64 - y)
            })
            .collect()
    }

    fn meters_per_pixel(world: &WorldState, cap: &CaptureResult) -> f64 {
        let intr = cap.depth.intrinsics;
        let range = (cap.pose.translation().z - world.table_z).abs().max(1e-6);
        range / intr.fx
    }

    fn point(&self, prompt: &str, world: &WorldState, cap: &CaptureResult) -> Result<String, BackendError> {
        let p = Self::parse_point_prompt(prompt, world)?;
        let (w, _) = (cap.depth.width(), cap.depth.height());
        let intr = cap.depth.intrinsics;
        let (ccx, ccy) = (intr.cx, intr.cy);
        let pick = |score: &dyn Fn(usize) -> Option<f64>| -> Option<usize> {
            let mut best: Option<(f64, usize)> = None;
            for k in 0..cap.ids.len() {
                if let Some(s) = score(k) {
                    if best.is_none_or(|(b, _)| s < b) {
                        best = Some((s, k));
                    }
                }
            }
            best.map(|(_, k)| k)
        };
        let pix = |k: usize| ((k % w) as f64, (k / w) as f64);
        let (u, v, label) = match p {
            PointPrompt::Between(a, b) => {
                let (ua, va) = Self::center_of(cap, &a)?;
                let (ub, vb) = Self::center_of(cap, &b)?;
                ((ua + ub) / 2.0, (va + vb) / 2.0, format!("between {a} and {b}"))
            }
            PointPrompt::Center(n) => {
                let (u, v) = Self::center_of(cap, &n)?;
                (u, v, n)
            }
            PointPrompt::Free => {
                let clear = Self::clearance(cap);
                let best = clear.iter().copied().fold(0.0, f64::max);
                let tie = |k: usize| {
                    let (x, y) = pix(k);
                    (clear[k] == best && cap.ids[k] != NO_HIT).then(|| (x - ccx).powi(2) + (y - ccy).powi(2))
                };
                let k = pick(&tie).ok_or_else(|| BackendError::UnsupportedPrompt("no free space on the table".into()))?;
                let (x, y) = pix(k);
                (x, y, "free spot".to_string())
            }
            PointPrompt::Near(n) => {
                let (ua, va) = Self::center_of(cap, &n)?;
                let clear = Self::clearance(cap);
                let need = self.noise.near_clearance / Self::meters_per_pixel(world, cap);
                let score = |k: usize| {
                    let (x, y) = pix(k);
                    (clear[k] >= need && cap.ids[k] != NO_HIT).then(|| (x - ua).powi(2) + (y - va).powi(2))
                };
                let k = pick(&score).ok_or_else(|| BackendError::UnsupportedPrompt(format!("no free space near {n}")))?;
                let (x, y) = pix(k);
                (x, y, format!("spot near {n}"))
            }
        };
        Ok(format_point(u, v, &label))
    }

    fn vqa(&self, question: &str, world: &WorldState, cap: &CaptureResult) -> Result<String, BackendError> {
        let q = question.trim().trim_end_matches(['?', '.']).to_lowercase();
        let visible: Vec<&str> = cap.visible.iter().map(String::as_str).collect();
        let see = Regex::new(r"^(?:do|can) you see (?:some|any|a|an|the)?\s*([a-z_ ]+?)(?: (?:object|objects|thing|things|item|items))?$")
            .expect("static regex");
        let count = Regex::new(r"^how many ([a-z_]+?)s? (?:are|do you see|can you see|are there)").expect("static regex");
        let list = Regex::new(r"^what (?:objects|things|items) (?:are visible|do you see|can you see|are on the table)")
            .expect("static regex");
        let is_visible = Regex::new(r"^is (?:there )?(?:a |an |the )?([a-z_ ]+?) (?:visible|on the table)$").expect("static regex");
        if let Some(c) = count.captures(&q) {
            let cat = c[1].trim_end_matches('s');
            let n = visible
                .iter()
                .filter(|v| world.objects.get(**v).and_then(|o| o.category.as_deref()).is_some_and(|k| k == cat))
                .count();
            return Ok(n.to_string());
        }
        if list.is_match(&q) {
            return Ok(visible.join(", "));
        }
        if let Some(c) = see.captures(&q) {
            let what = c[1].trim();
            if COLORS.contains(&what) {
                let hits: Vec<&str> = visible
                    .iter()
                    .copied()
                    .filter(|v| world.objects.get(*v).is_some_and(|o| o.color == what))
                    .collect();
                return Ok(if hits.is_empty() { "no".into() } else { format!("yes: {}", hits.join(", ")) });
            }
            if let Some(n) = Self::resolve_name(world, what) {
                return Ok(if cap.is_visible(&n) { "yes" } else { "no" }.into());
            }
        }
        if let Some(c) = is_visible.captures(&q) {
            if let Some(n) = Self::resolve_name(world, &c[1]) {
                return Ok(if cap.is_visible(&n) { "yes" } else { "no" }.into());
            }
        }
        Err(BackendError::UnsupportedPrompt(question.to_string()))
    }
}

impl VlmBackend for ScriptedVlm {
    fn query(&mut self, q: &VlmQuery, world: &WorldState, capture: &CaptureResult) -> Result<String, BackendError> {
        match q.kind {
            VlmKind::Presence => Ok(self.presence(q.payload.trim(), world, capture)),
            VlmKind::Bboxes => Ok(self.bboxes(&q.names(), world, capture)),
            VlmKind::Point => self.point(&q.payload, world, capture),
            VlmKind::Vqa => self.vqa(&q.payload, world, capture),
        }
    }
}
