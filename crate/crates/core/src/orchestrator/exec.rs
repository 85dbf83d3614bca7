//! Tool dispatch: binds every catalog tool to the simulator, perception,
//! the scene graph and the planner.

use super::trace::EventKind;
use crate::backends::{wire, BackendError, PlannerBackend, ToolCall, ToolResult, VlmBackend, VlmKind, VlmQuery};
use crate::geometry::{GeometryError, PerceptionConfig, SegmentedScene};
use crate::planner::{parse_plan, validate_plan_for, Placeholder, Plan};
use crate::scene_graph::{SceneGraph, SceneNode, ROOT};
use crate::sim::{CaptureResult, SimError, Support, WorldState};
use crate::tools::{self, ToolMode};
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;

/// How a failed call should be handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    GraspMissed,
    CaptureDropout,
    /// Localization or grounding failed; worth another look.
    Perception,
    /// The object is not in view; only the operator can help.
    NotVisible,
    /// Question answering failed; execution carries on.
    Informational,
    /// A model endpoint is down; the trial is excluded.
    Unavailable,
    Fatal,
}

impl FailureKind {
    pub fn retryable(self) -> bool {
        matches!(self, FailureKind::GraspMissed | FailureKind::CaptureDropout | FailureKind::Perception)
    }
}

#[derive(Debug, Clone)]
pub struct ExecOutcome {
    pub result: ToolResult,
    pub failure: Option<FailureKind>,
    /// Object the call was about, for rescans and repositioning.
    pub subject: Option<String>,
}

struct Failure {
    kind: FailureKind,
    reason: String,
    subject: Option<String>,
}

impl Failure {
    fn new(kind: FailureKind, reason: impl Into<String>) -> Self {
        Self { kind, reason: reason.into(), subject: None }
    }

    fn about(mut self, subject: &str) -> Self {
        self.subject = Some(subject.to_string());
        self
    }
}

fn sim_failure(e: SimError) -> Failure {
    let kind = match e {
        SimError::GraspMissed { .. } => FailureKind::GraspMissed,
        SimError::CaptureDropout => FailureKind::CaptureDropout,
        _ => FailureKind::Fatal,
    };
    let label = match &e {
        SimError::GraspMissed { .. } => "GraspMissed",
        SimError::CaptureDropout => "CaptureDropout",
        SimError::PlacementCollision(_) => "PlacementCollision",
        SimError::GripperOccupiedDuringCapture => "GripperOccupied",
        SimError::OutOfWorkspace { .. } => "OutOfWorkspace",
        SimError::ObjectCovered { .. } => "ObjectCovered",
        SimError::ObjectInsideClosedContainer { .. } => "ObjectInsideClosedContainer",
        _ => "SimError",
    };
    Failure::new(kind, format!("{label}: {e}"))
}

fn geometry_failure(e: GeometryError) -> Failure {
    let label = match e {
        GeometryError::EmptyCloud => "EmptyCloud",
        GeometryError::NoMatch { .. } => "NoMatch",
        _ => "GeometryError",
    };
    Failure::new(FailureKind::Perception, format!("{label}: {e}"))
}

fn backend_failure(e: BackendError) -> Failure {
    let kind = match e {
        BackendError::BackendUnavailable(_) | BackendError::AuthError(_) => FailureKind::Unavailable,
        BackendError::UnsupportedPrompt(_) | BackendError::Planning(_) => FailureKind::Fatal,
        _ => FailureKind::Perception,
    };
    let label = match e {
        BackendError::BackendUnavailable(_) => "BackendUnavailable",
        BackendError::AuthError(_) => "AuthError",
        BackendError::MalformedResponse(_) => "MalformedResponse",
        BackendError::MalformedToolCall(_) => "MalformedToolCall",
        BackendError::UnsupportedPrompt(_) => "UnsupportedPrompt",
        BackendError::ParseError(_) => "ParseError",
        BackendError::MissingLabel(_) => "MissingLabel",
        BackendError::Planning(_) => "PlanningFailed",
    };
    Failure::new(kind, format!("{label}: {e}"))
}

/// Simulated wall-clock cost of a tool, seconds.
pub fn tool_seconds(tool: &str) -> f64 {
    match tool {
        tools::PICK | tools::PLACE => 8.0,
        tools::SCAN => 6.0,
        tools::POINT => 3.0,
        tools::VQA => 2.0,
        tools::APRILTAGS => 1.0,
        tools::PLAN => 10.0,
        _ => 0.1,
    }
}

/// Inset of the corner returned by a failed pointing query, meters.
const CORNER_INSET: f64 = 0.05;

/// Executes tool calls against one world and one scene graph.
pub struct Executor {
    pub world: WorldState,
    pub graph: SceneGraph,
    pub mode: ToolMode,
    pub perception: PerceptionConfig,
    /// Noise-free perception: scans write true centroids and pointing uses
    /// clean captures without faults. Used for plan dry runs.
    pub oracle: bool,
    pub vlm: Box<dyn VlmBackend>,
    pub planner: Box<dyn PlannerBackend>,
    /// Latest successful payload per plan step, for placeholders.
    pub results: BTreeMap<usize, Value>,
    /// Most recent plan returned by the planning tool.
    pub plan: Option<Plan>,
    events: Vec<(EventKind, Value)>,
}

impl Executor {
    pub fn new(
        world: WorldState,
        graph: SceneGraph,
        mode: ToolMode,
        vlm: Box<dyn VlmBackend>,
        planner: Box<dyn PlannerBackend>,
    ) -> Self {
        Self {
            world,
            graph,
            mode,
            perception: PerceptionConfig::default(),
            oracle: false,
            vlm,
            planner,
            results: BTreeMap::new(),
            plan: None,
            events: Vec::new(),
        }
    }

    /// Side events (model queries, graph deltas) produced since the last
    /// call, in order.
    pub fn drain_events(&mut self) -> Vec<(EventKind, Value)> {
        std::mem::take(&mut self.events)
    }

    /// Replaces `$stepK.out...` strings with the referenced payloads.
    pub fn resolve_placeholders(&self, args: &Map<String, Value>) -> Result<Map<String, Value>, String> {
        fn walk(v: &Value, results: &BTreeMap<usize, Value>) -> Result<Value, String> {
            match v {
                Value::String(s) => match Placeholder::parse(s) {
                    Some(p) => results
                        .get(&p.step)
                        .and_then(|payload| p.resolve(payload))
                        .cloned()
                        .ok_or_else(|| format!("UnresolvedPlaceholder: {s} has no value")),
                    None => Ok(v.clone()),
                },
                Value::Array(a) => a.iter().map(|x| walk(x, results)).collect::<Result<Vec<_>, _>>().map(Value::Array),
                _ => Ok(v.clone()),
            }
        }
        args.iter().map(|(k, v)| Ok((k.clone(), walk(v, &self.results)?))).collect()
    }

    fn check_schema(&self, call: &ToolCall) -> Result<(), Failure> {
        let registry = tools::registry(self.mode);
        let def = registry
            .iter()
            .find(|t| t.name == call.name)
            .ok_or_else(|| Failure::new(FailureKind::Fatal, format!("UnknownTool: {}", call.name)))?;
        for k in call.arguments.keys() {
            if def.param(k).is_none() {
                return Err(Failure::new(FailureKind::Fatal, format!("ArgSchemaError: {} has no parameter {k}", call.name)));
            }
        }
        for p in &def.params {
            match call.arguments.get(p.name) {
                None if p.required => {
                    return Err(Failure::new(
                        FailureKind::Fatal,
                        format!("ArgSchemaError: {} needs {}", call.name, p.name),
                    ))
                }
                Some(v) if !p.ty.accepts(v) => {
                    return Err(Failure::new(
                        FailureKind::Fatal,
                        format!("ArgSchemaError: {}.{} has the wrong type", call.name, p.name),
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Runs one call whose arguments may still hold placeholders. The
    /// returned result carries the resolved arguments in `resolved`.
    pub fn execute(&mut self, call: &ToolCall) -> (ExecOutcome, Map<String, Value>) {
        let resolved = match self.resolve_placeholders(&call.arguments) {
            Ok(a) => a,
            Err(reason) => {
                let out = ExecOutcome {
                    result: ToolResult::failure(&call.id, reason),
                    failure: Some(FailureKind::Fatal),
                    subject: None,
                };
                return (out, call.arguments.clone());
            }
        };
        let bound = ToolCall::new(call.id.clone(), call.name.clone(), resolved.clone());
        (self.execute_resolved(&bound), resolved)
    }

    pub fn execute_resolved(&mut self, call: &ToolCall) -> ExecOutcome {
        let before = self.graph.clone();
        let outcome = self.check_schema(call).and_then(|_| self.dispatch(call));
        let delta = before.diff(&self.graph);
        if !delta.is_empty() {
            self.events.push((EventKind::GraphDelta, json!({"call_id": call.id, "delta": delta})));
        }
        match outcome {
            Ok(payload) => {
                if let Some(k) = crate::backends::step_of_call(&call.id) {
                    self.results.insert(k, payload.clone());
                }
                ExecOutcome { result: ToolResult::success(&call.id, payload), failure: None, subject: None }
            }
            Err(mut f) => {
                if call.name == tools::VQA && f.kind != FailureKind::Unavailable {
                    f.kind = FailureKind::Informational;
                }
                ExecOutcome { result: ToolResult::failure(&call.id, f.reason), failure: Some(f.kind), subject: f.subject }
            }
        }
    }

    fn text<'a>(call: &'a ToolCall, name: &str) -> &'a str {
        call.arguments.get(name).and_then(Value::as_str).unwrap_or_default()
    }

    fn dispatch(&mut self, call: &ToolCall) -> Result<Value, Failure> {
        match call.name.as_str() {
            tools::PICK => self.pick(Self::text(call, "object_name")),
            tools::PLACE => self.place(Self::text(call, "place_position_name")),
            tools::SCAN => {
                let targets: Vec<String> = call.arguments["targets_to_scan"]
                    .as_array()
                    .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
                    .unwrap_or_default();
                self.scan(&targets)
            }
            tools::POINT => self.point(Self::text(call, "prompt_to_vlm")),
            tools::VQA => self.vqa(Self::text(call, "query_to_vlm")),
            tools::APRILTAGS => self.apriltags(),
            tools::ADD => self.add(call),
            tools::EDIT => {
                let node = Self::text(call, "node_name");
                let attr = Self::text(call, "attribute_name");
                self.graph = self
                    .graph
                    .edit_attribute_json(node, attr, &call.arguments["value"])
                    .map_err(|e| Failure::new(FailureKind::Fatal, format!("GraphError: {e}")))?;
                Ok(json!({"edited": node, "attribute": attr}))
            }
            tools::PLAN => self.plan(Self::text(call, "request_from_user")),
            other => Err(Failure::new(FailureKind::Fatal, format!("UnknownTool: {other}"))),
        }
    }

    fn coordinates_of(&self, name: &str) -> Result<[f64; 3], Failure> {
        let node = self
            .graph
            .get(name)
            .ok_or_else(|| Failure::new(FailureKind::Fatal, format!("UnknownNode: {name} is not in the scene graph")))?;
        node.coordinates.ok_or_else(|| {
            Failure::new(FailureKind::Perception, format!("NoCoordinates: {name} has no current coordinates")).about(name)
        })
    }

    fn pick(&mut self, name: &str) -> Result<Value, Failure> {
        let at = self.coordinates_of(name)?;
        self.world.pick(name, at).map_err(|e| sim_failure(e).about(name))?;
        Ok(json!({"picked": name}))
    }

    fn place(&mut self, target: &str) -> Result<Value, Failure> {
        let at = self.coordinates_of(target)?;
        let out = self.world.place(at).map_err(sim_failure)?;
        let support = match &out.support {
            Support::Table => "table".to_string(),
            Support::On(s) | Support::In(s) => s.clone(),
        };
        Ok(json!({"placed": out.object, "position": out.position, "support": support}))
    }

    fn ask(&mut self, kind: VlmKind, payload: &str, capture: &CaptureResult) -> Result<String, Failure> {
        let q = VlmQuery::new(kind, payload, capture.id);
        let reply = self.vlm.query(&q, &self.world, capture);
        let logged = match &reply {
            Ok(r) => json!({"kind": kind, "payload": payload, "image_ref": capture.id, "reply": r}),
            Err(e) => json!({"kind": kind, "payload": payload, "image_ref": capture.id, "error": e}),
        };
        self.events.push((EventKind::VlmQuery, logged));
        reply.map_err(backend_failure)
    }

    fn top_capture(&mut self) -> Result<CaptureResult, Failure> {
        if self.oracle { self.world.capture_clean(0) } else { self.world.capture(0) }.map_err(sim_failure)
    }

    fn scan(&mut self, targets: &[String]) -> Result<Value, Failure> {
        if targets.is_empty() {
            return Err(Failure::new(FailureKind::Fatal, "ArgSchemaError: nothing to scan"));
        }
        if self.oracle {
            return self.oracle_scan(targets);
        }
        let mut views = Vec::new();
        for v in 0..self.world.config.views {
            views.push(self.world.capture(v).map_err(sim_failure)?);
        }
        let top = views[0].clone();
        let mut failed: Vec<Failure> = Vec::new();
        let mut present = Vec::new();
        for t in targets {
            let reply = self.ask(VlmKind::Presence, t, &top)?;
            match wire::parse_presence(&reply) {
                Ok(true) => present.push(t.clone()),
                Ok(false) => failed.push(Failure::new(FailureKind::NotVisible, format!("NotVisible: {t} is not in view")).about(t)),
                Err(e) => failed.push(backend_failure(e).about(t)),
            }
        }
        let mut updated = Map::new();
        if !present.is_empty() {
            let reply = self.ask(VlmKind::Bboxes, &present.join(", "), &top)?;
            let boxes = wire::parse_bboxes(&reply).map_err(|e| backend_failure(e).about(&present[0]))?;
            let pairs: Vec<_> = views.iter().map(|c| (c.depth.clone(), c.pose.clone())).collect();
            let scene = SegmentedScene::build(&pairs, self.world.table_z, &self.perception).map_err(geometry_failure)?;
            let bias = self.world.faults.localization_bias();
            for t in &present {
                let Some(b) = boxes.iter().find(|b| &b.label == t) else {
                    failed.push(backend_failure(BackendError::MissingLabel(t.clone())).about(t));
                    continue;
                };
                match scene.localize(b, &pairs[0], &self.perception) {
                    Ok(c) => {
                        let xyz = [c.x + bias[0], c.y + bias[1], c.z + bias[2]];
                        self.write_coordinates(t, xyz)?;
                        updated.insert(t.clone(), json!(xyz));
                    }
                    Err(e) => failed.push(geometry_failure(e).about(t)),
                }
            }
        }
        Self::scan_result(updated, failed)
    }

    fn write_coordinates(&mut self, name: &str, xyz: [f64; 3]) -> Result<(), Failure> {
        self.graph = self
            .graph
            .set_coordinates(name, xyz)
            .map_err(|e| Failure::new(FailureKind::Fatal, format!("GraphError: {e}")))?;
        Ok(())
    }

    fn scan_result(updated: Map<String, Value>, mut failed: Vec<Failure>) -> Result<Value, Failure> {
        if failed.is_empty() {
            return Ok(json!({"updated": updated}));
        }
        // Report the most actionable failure; the rest ride along.
        failed.sort_by_key(|f| match f.kind {
            FailureKind::NotVisible => 0,
            FailureKind::Fatal => 1,
            _ => 2,
        });
        let reasons: Vec<String> = failed.iter().map(|f| f.reason.clone()).collect();
        let mut first = failed.remove(0);
        first.reason = if updated.is_empty() {
            reasons.join("; ")
        } else {
            let names: Vec<&String> = updated.keys().collect();
            format!("{} (updated: {})", reasons.join("; "), names.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "))
        };
        Err(first)
    }

    fn oracle_scan(&mut self, targets: &[String]) -> Result<Value, Failure> {
        let top = self.world.capture_clean(0).map_err(sim_failure)?;
        let mut updated = Map::new();
        let mut failed = Vec::new();
        for t in targets {
            let truth = top
                .is_visible(t)
                .then(|| self.world.visible_surface_centroid(t, self.perception.voxel, self.perception.z_epsilon))
                .flatten();
            match truth {
                Some(xyz) => {
                    self.write_coordinates(t, xyz)?;
                    updated.insert(t.clone(), json!(xyz));
                }
                None => failed.push(Failure::new(FailureKind::NotVisible, format!("NotVisible: {t} is not in view")).about(t)),
            }
        }
        Self::scan_result(updated, failed)
    }

    fn point(&mut self, prompt: &str) -> Result<Value, Failure> {
        let cap = self.top_capture()?;
        let reply = self.ask(VlmKind::Point, prompt, &cap)?;
        let p = wire::parse_point(&reply).map_err(backend_failure)?;
        let (u, v) = (p.u.round(), p.v.round());
        if u < 0.0 || v < 0.0 {
            return Err(geometry_failure(GeometryError::OutOfBounds { u, v }));
        }
        let xyz = cap.depth.deproject_pixel(u as usize, v as usize, &cap.pose).map_err(geometry_failure)?;
        let mut xyz = [xyz.x, xyz.y, xyz.z];
        if !self.oracle && self.world.faults.draw_point_failure() {
            xyz = self.far_corner(xyz);
        }
        Ok(json!(xyz))
    }

    /// Table corner (inset) farthest from `p`: what a useless pointing
    /// answer looks like.
    fn far_corner(&self, p: [f64; 3]) -> [f64; 3] {
        let e = self.world.table_extent;
        let xs = [e.x[0] + CORNER_INSET, e.x[1] - CORNER_INSET];
        let ys = [e.y[0] + CORNER_INSET, e.y[1] - CORNER_INSET];
        let mut best = [xs[0], ys[0], self.world.table_z];
        let mut best_d = -1.0;
        for &x in &xs {
            for &y in &ys {
                let d = (x - p[0]).powi(2) + (y - p[1]).powi(2);
                if d > best_d {
                    best_d = d;
                    best = [x, y, self.world.table_z];
                }
            }
        }
        best
    }

    fn vqa(&mut self, question: &str) -> Result<Value, Failure> {
        let cap = self.top_capture()?;
        Ok(Value::String(self.ask(VlmKind::Vqa, question, &cap)?))
    }

    fn apriltags(&mut self) -> Result<Value, Failure> {
        let tags = self.world.read_apriltags().map_err(sim_failure)?;
        let bias = if self.oracle { [0.0; 3] } else { self.world.faults.localization_bias() };
        let map: Map<String, Value> = tags
            .into_iter()
            .map(|(id, p)| (format!("tag_{id}"), json!([p[0] + bias[0], p[1] + bias[1], p[2] + bias[2]])))
            .collect();
        Ok(Value::Object(map))
    }

    fn add(&mut self, call: &ToolCall) -> Result<Value, Failure> {
        let name = Self::text(call, "object_name");
        let mut node = SceneNode::new(name);
        let a = &call.arguments;
        if let Some(list) = a.get("affordance").and_then(Value::as_array) {
            node = node.with_affordance(list.iter().filter_map(Value::as_str));
        }
        if let Some(s) = a.get("position_in_cartesian_space").and_then(Value::as_str) {
            node = node.with_position(s);
        }
        if let Some(s) = a.get("things_to_know").and_then(Value::as_str) {
            node = node.with_things_to_know(s);
        }
        if let Some(c) = a.get("coordinates").and_then(Value::as_array).filter(|c| c.len() == 3) {
            let xyz: Vec<f64> = c.iter().filter_map(Value::as_f64).collect();
            node = node.with_coordinates([xyz[0], xyz[1], xyz[2]]);
        }
        if let Some(list) = a.get("contains").and_then(Value::as_array) {
            node = node.with_contains(list.iter().filter_map(Value::as_str));
        }
        let parent = if self.graph.contains_node("table") { "table" } else { ROOT };
        self.graph = self
            .graph
            .add_object(node, parent)
            .map_err(|e| Failure::new(FailureKind::Fatal, format!("GraphError: {e}")))?;
        Ok(json!({"added": name, "parent": parent}))
    }

    fn plan(&mut self, request: &str) -> Result<Value, Failure> {
        let text = self.planner.plan(request, &self.graph, self.mode).map_err(backend_failure)?;
        let plan = parse_plan(&text).map_err(|e| Failure::new(FailureKind::Fatal, format!("PlanParseError: {e}")))?;
        let violations = validate_plan_for(&plan, &self.graph, self.mode);
        let steps = plan.steps.len();
        self.plan = Some(plan);
        Ok(json!({"plan": text, "steps": steps, "violations": violations}))
    }

    /// Coordinates of `subject`'s tag in an AprilTag readout.
    pub fn tag_coordinates(&self, subject: &str, tags: &Value) -> Option<Value> {
        let tag = self.world.objects.get(subject)?.tag?;
        tags.get(format!("tag_{tag}")).cloned()
    }
}
