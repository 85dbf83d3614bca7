//! Built-in symbolic planners. They read everything they need from the
//! scene graph text (names, `things_to_know`, affordances, position notes)
//! and emit plans that pass the validator by construction.

use super::hanoi::{solve_hanoi_setup, HanoiSetup};
use super::plan::{ArgValue, Placeholder, Plan, PlanStep};
use super::PlannerError;
use crate::scene_graph::{SceneGraph, SceneNode};
use crate::tools;
use regex::Regex;
use std::collections::HashSet;

/// Step-list builder that tracks which nodes have current coordinates and
/// what each container holds, so emitted plans stay consistent.
struct Builder {
    steps: Vec<PlanStep>,
    fresh: HashSet<String>,
    contents: Vec<(String, Vec<String>)>,
}

impl Builder {
    fn new(graph: &SceneGraph) -> Self {
        let fresh = graph.nodes().filter(|n| n.coordinates.is_some()).map(|n| n.name.clone()).collect();
        let contents = graph.nodes().map(|n| (n.name.clone(), n.contains.clone())).collect();
        Self { steps: Vec::new(), fresh, contents }
    }

    fn push(&mut self, step: PlanStep) -> usize {
        self.steps.push(step);
        self.steps.len()
    }

    /// One batched scan for every listed node without current coordinates.
    fn scan_stale(&mut self, names: &[&str]) {
        let stale: Vec<&str> = names.iter().copied().filter(|n| !self.fresh.contains(*n)).collect();
        if stale.is_empty() {
            return;
        }
        self.push(PlanStep::new(tools::SCAN).arg("targets_to_scan", ArgValue::list(stale.iter().copied())));
        self.fresh.extend(stale.iter().map(|s| s.to_string()));
    }

    fn point(&mut self, prompt: &str) -> usize {
        self.push(PlanStep::new(tools::POINT).arg("prompt_to_vlm", ArgValue::text(prompt)))
    }

    fn add_spot(&mut self, name: &str, from_step: usize, note: &str) {
        self.push(
            PlanStep::new(tools::ADD)
                .arg("object_name", ArgValue::text(name))
                .arg("affordance", ArgValue::list(["place location"]))
                .arg("position_in_cartesian_space", ArgValue::text(note))
                .arg("coordinates", out(from_step)),
        );
        self.fresh.insert(name.to_string());
    }

    fn edit(&mut self, node: &str, attribute: &str, value: ArgValue) {
        if attribute == "coordinates" {
            if matches!(value, ArgValue::Null) {
                self.fresh.remove(node);
            } else {
                self.fresh.insert(node.to_string());
            }
        }
        self.push(
            PlanStep::new(tools::EDIT)
                .arg("node_name", ArgValue::text(node))
                .arg("attribute_name", ArgValue::text(attribute))
                .arg("value", value),
        );
    }

    fn pick(&mut self, object: &str) {
        self.push(PlanStep::new(tools::PICK).arg("object_name", ArgValue::text(object)));
        self.fresh.remove(object);
    }

    fn place(&mut self, target: &str) {
        self.push(PlanStep::new(tools::PLACE).arg("place_position_name", ArgValue::text(target)));
    }

    fn contents_of(&mut self, container: &str) -> &mut Vec<String> {
        match self.contents.iter().position(|(c, _)| c == container) {
            Some(i) => &mut self.contents[i].1,
            None => {
                self.contents.push((container.to_string(), Vec::new()));
                &mut self.contents.last_mut().expect("just pushed").1
            }
        }
    }

    /// Pick `item`, drop it into `container`, and record the move.
    fn move_into(&mut self, item: &str, container: &str) {
        for (_, list) in self.contents.iter_mut() {
            list.retain(|c| c != item);
        }
        self.pick(item);
        self.place(container);
        let list = {
            let l = self.contents_of(container);
            l.retain(|c| c != item);
            l.push(item.to_string());
            l.clone()
        };
        self.edit(container, "contains", ArgValue::list(list));
        self.edit(item, "position_in_cartesian_space", ArgValue::text(format!("inside {container}")));
        self.edit(item, "coordinates", ArgValue::Null);
    }

    fn finish(self, rationale: impl Into<String>) -> Plan {
        Plan::new(self.steps, rationale)
    }
}

fn out(step: usize) -> ArgValue {
    ArgValue::Placeholder(Placeholder { step, path: vec![] })
}

fn lower(s: &str) -> String {
    s.to_lowercase()
}

fn node_text(n: &SceneNode) -> String {
    lower(&format!("{} {} {}", n.name.replace('_', " "), n.things_to_know, n.position_descriptor))
}

fn has_word(text: &str, word: &str) -> bool {
    text.split(|c: char| !c.is_ascii_alphanumeric()).any(|w| w == word)
}

/// Food category from the node's notes.
pub fn food_category(n: &SceneNode) -> Option<&'static str> {
    let t = lower(&n.things_to_know);
    if t.contains("vegetable") {
        Some("vegetable")
    } else if t.contains("fruit") {
        Some("fruit")
    } else {
        None
    }
}

/// Coarse category used when organizing: food vs tools.
fn broad_category(n: &SceneNode) -> Option<&'static str> {
    let t = lower(&n.things_to_know);
    if food_category(n).is_some() || t.contains("food") || n.affordance.iter().any(|a| a == "edible") {
        Some("food")
    } else if t.contains("tool") {
        Some("tool")
    } else {
        None
    }
}

fn is_container(n: &SceneNode) -> bool {
    n.affordance.iter().any(|a| lower(a) == "container")
        || (food_category(n).is_none() && {
            let t = node_text(n);
            has_word(&t, "box") || has_word(&t, "container")
        })
}

fn is_lid(n: &SceneNode) -> bool {
    n.affordance.iter().any(|a| lower(a) == "lid") || has_word(&lower(&n.name.replace('_', " ")), "lid")
}

/// +1 for large, -1 for small, from names and notes.
pub fn size_rank(n: &SceneNode) -> i32 {
    let t = node_text(n);
    let large = ["large", "larger", "big", "bigger"].iter().filter(|w| has_word(&t, w)).count() as i32;
    let small = ["small", "smaller"].iter().filter(|w| has_word(&t, w)).count() as i32;
    large - small
}

fn table_items(g: &SceneGraph) -> Vec<&SceneNode> {
    g.get("table")
        .map(|t| t.contains.iter().filter_map(|c| g.get(c)).collect())
        .unwrap_or_default()
}

fn pickable(n: &SceneNode) -> bool {
    n.affordance.iter().any(|a| lower(a) == "pickable")
}

fn dist_xy(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Fruits into the larger container, vegetables into the smaller one (the
/// larger group always gets the larger container).
pub fn solve_sorting(g: &SceneGraph) -> Result<Plan, PlannerError> {
    let items = table_items(g);
    let mut groups: Vec<(&str, Vec<&str>)> = Vec::new();
    for n in &items {
        if let Some(cat) = food_category(n) {
            match groups.iter_mut().find(|(c, _)| *c == cat) {
                Some((_, v)) => v.push(&n.name),
                None => groups.push((cat, vec![&n.name])),
            }
        }
    }
    if groups.is_empty() {
        return Err(PlannerError::InfeasibleGoal("no categorized items on the table".into()));
    }
    let mut containers: Vec<&SceneNode> = g.nodes().filter(|n| is_container(n) && !is_lid(n)).collect();
    if containers.len() < groups.len() {
        return Err(PlannerError::InfeasibleGoal(format!("{} groups but {} containers", groups.len(), containers.len())));
    }
    containers.sort_by(|a, b| size_rank(b).cmp(&size_rank(a)).then(a.name.cmp(&b.name)));
    groups.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(b.0)));
    let assign: Vec<(&str, &str)> = groups
        .iter()
        .zip(&containers)
        .flat_map(|((_, members), c)| members.iter().map(move |m| (*m, c.name.as_str())))
        .collect();

    let mut b = Builder::new(g);
    let names: Vec<&str> = items.iter().map(|n| n.name.as_str()).filter(|n| assign.iter().any(|(m, _)| m == n)).collect();
    b.scan_stale(&names);
    for item in &names {
        let container = assign.iter().find(|(m, _)| m == item).expect("assigned").1;
        b.move_into(item, container);
    }
    let summary: Vec<String> =
        groups.iter().zip(&containers).map(|((cat, m), c)| format!("{} {cat} item(s) -> {}", m.len(), c.name)).collect();
    Ok(b.finish(format!("Sort by category: {}.", summary.join("; "))))
}

fn parse_size_cm(text: &str) -> Option<f64> {
    let re = Regex::new(r"(\d+(?:\.\d+)?)\s*cm").expect("static regex");
    re.captures(text).and_then(|c| c[1].parse().ok())
}

/// Stack every block; the one nearest the middle of the table is the base,
/// the rest go on top, largest first.
pub fn solve_stacking(g: &SceneGraph) -> Result<Plan, PlannerError> {
    let blocks: Vec<&SceneNode> =
        table_items(g).into_iter().filter(|n| has_word(&node_text(n), "block") && n.coordinates.is_some()).collect();
    if blocks.len() < 2 {
        return Err(PlannerError::InfeasibleGoal("need at least two localized blocks".into()));
    }
    let cx = blocks.iter().map(|n| n.coordinates.unwrap()[0]).sum::<f64>() / blocks.len() as f64;
    let cy = blocks.iter().map(|n| n.coordinates.unwrap()[1]).sum::<f64>() / blocks.len() as f64;
    let centre = [cx, cy, 0.0];
    let base = blocks
        .iter()
        .min_by(|a, b| {
            dist_xy(a.coordinates.unwrap(), centre)
                .total_cmp(&dist_xy(b.coordinates.unwrap(), centre))
                .then(a.name.cmp(&b.name))
        })
        .expect("non-empty");
    let mut rest: Vec<&SceneNode> = blocks.iter().copied().filter(|n| n.name != base.name).collect();
    rest.sort_by(|a, b| {
        let sa = parse_size_cm(&a.things_to_know).unwrap_or(0.0);
        let sb = parse_size_cm(&b.things_to_know).unwrap_or(0.0);
        sb.total_cmp(&sa).then(a.name.cmp(&b.name))
    });

    let mut b = Builder::new(g);
    let mut top = base.name.as_str();
    for (i, blk) in rest.iter().enumerate() {
        b.scan_stale(&[top, &blk.name]);
        b.pick(&blk.name);
        b.place(top);
        b.edit(top, "contains", ArgValue::list([blk.name.as_str()]));
        b.edit(&blk.name, "position_in_cartesian_space", ArgValue::text(format!("on top of {top}")));
        if i + 1 == rest.len() {
            b.edit(&blk.name, "coordinates", ArgValue::Null);
        }
        top = &blk.name;
    }
    Ok(b.finish(format!("Base {}; stack order by size.", base.name)))
}

/// Lid node for `container`, found through "lid of <container>" notes or a
/// `<container>_lid` name.
fn lid_for<'a>(g: &'a SceneGraph, container: &str) -> Option<&'a SceneNode> {
    let re = Regex::new(r"lid of (?:the )?([a-z0-9_]+)").expect("static regex");
    g.nodes().filter(|n| is_lid(n)).find(|n| {
        n.name == format!("{container}_lid")
            || re.captures(&lower(&n.things_to_know)).is_some_and(|c| &c[1] == container)
    })
}

fn lid_is_closed(lid: &SceneNode, container: &str) -> bool {
    let p = lower(&lid.position_descriptor);
    p.contains(&format!("on top of {container}")) || p.contains(&format!("closing {container}"))
}

/// Organize into category containers: first pull out misplaced items, then
/// put away loose ones, and finally close every box with its lid. Closed
/// boxes are opened first, their lid parked at a free spot.
pub fn solve_organize(g: &SceneGraph) -> Result<Plan, PlannerError> {
    let containers: Vec<&SceneNode> = g.nodes().filter(|n| is_container(n) && !is_lid(n)).collect();
    if containers.is_empty() {
        return Err(PlannerError::InfeasibleGoal("no containers".into()));
    }
    let accepts = |c: &SceneNode, cat: &str| {
        let t = lower(&c.things_to_know);
        match cat {
            "food" => t.contains("food") || t.contains("fruit") || t.contains("vegetable"),
            other => t.contains(other),
        }
    };
    let target_for = |item: &SceneNode| -> Option<&str> {
        let cat = broad_category(item)?;
        containers.iter().find(|c| accepts(c, cat)).map(|c| c.name.as_str())
    };

    let mut b = Builder::new(g);

    // Open closed boxes.
    for c in &containers {
        let Some(lid) = lid_for(g, &c.name) else { continue };
        if !lid_is_closed(lid, &c.name) {
            continue;
        }
        let knob = b.point(&format!("knob of {}", lid.name));
        b.edit(&lid.name, "coordinates", out(knob));
        let spot_name = format!("temporary_spot_for_{}", lid.name);
        let spot = b.point("temporary location on the table");
        b.add_spot(&spot_name, spot, "free spot on the table");
        b.pick(&lid.name);
        b.place(&spot_name);
        b.edit(&lid.name, "coordinates", out(spot));
        b.edit(&lid.name, "position_in_cartesian_space", ArgValue::text(format!("on the table at {spot_name}")));
    }

    let mut misplaced = Vec::new();
    for c in &containers {
        for child in c.contains.iter().filter_map(|n| g.get(n)) {
            if let Some(t) = target_for(child) {
                if t != c.name {
                    misplaced.push((child.name.as_str(), t));
                }
            }
        }
    }
    let loose: Vec<(&str, &str)> = table_items(g)
        .into_iter()
        .filter(|n| pickable(n) && !is_container(n) && !is_lid(n))
        .filter_map(|n| target_for(n).map(|t| (n.name.as_str(), t)))
        .collect();
    let todo: Vec<(&str, &str)> = misplaced.iter().chain(&loose).copied().collect();
    let names: Vec<&str> = todo.iter().map(|(n, _)| *n).collect();
    b.scan_stale(&names);
    for (item, container) in &todo {
        b.move_into(item, container);
    }

    // Close every box that has a lid.
    for c in &containers {
        let Some(lid) = lid_for(g, &c.name) else { continue };
        if !b.fresh.contains(&lid.name) {
            let knob = b.point(&format!("knob of {}", lid.name));
            b.edit(&lid.name, "coordinates", out(knob));
        }
        b.pick(&lid.name);
        b.place(&c.name);
        b.edit(&lid.name, "position_in_cartesian_space", ArgValue::text(format!("on top of {}, closing it", c.name)));
        b.edit(&lid.name, "coordinates", ArgValue::Null);
    }
    Ok(b.finish(format!(
        "{} misplaced, {} loose item(s); containers closed last.",
        misplaced.len(),
        loose.len()
    )))
}

fn node_or_err<'a>(g: &'a SceneGraph, name: &str) -> Result<&'a SceneNode, PlannerError> {
    g.get(name).ok_or_else(|| PlannerError::InfeasibleGoal(format!("'{name}' is not in the scene graph")))
}

/// Put `object` at a point the vision model picks between `a` and `b`.
pub fn solve_between(g: &SceneGraph, object: &str, a: &str, b_: &str) -> Result<Plan, PlannerError> {
    for n in [object, a, b_] {
        node_or_err(g, n)?;
    }
    let mut b = Builder::new(g);
    b.scan_stale(&[object]);
    let p = b.point(&format!("between {a} and {b_}"));
    let spot = format!("between_{a}_and_{b_}");
    b.add_spot(&spot, p, &format!("between {a} and {b_}"));
    b.pick(object);
    b.place(&spot);
    b.edit(object, "coordinates", out(p));
    b.edit(object, "position_in_cartesian_space", ArgValue::text(format!("between {a} and {b_}")));
    Ok(b.finish(format!("Ask for the point between {a} and {b_}, then move {object} there.")))
}

/// Bring the member of `category` farthest from its peers next to the
/// nearest peer.
pub fn solve_isolated(g: &SceneGraph, category: &str) -> Result<Plan, PlannerError> {
    let members: Vec<&SceneNode> = table_items(g)
        .into_iter()
        .filter(|n| food_category(n) == Some(category) && n.coordinates.is_some())
        .collect();
    if members.len() < 2 {
        return Err(PlannerError::InfeasibleGoal(format!("fewer than two localized {category} items")));
    }
    let nearest = |n: &SceneNode| {
        members
            .iter()
            .filter(|m| m.name != n.name)
            .map(|m| (dist_xy(n.coordinates.unwrap(), m.coordinates.unwrap()), m.name.as_str()))
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(y.1)))
            .expect("two members")
    };
    let lone = members
        .iter()
        .max_by(|a, b| nearest(a).0.total_cmp(&nearest(b).0).then(b.name.cmp(&a.name)))
        .expect("non-empty");
    let anchor = nearest(lone).1;

    let mut b = Builder::new(g);
    let p = b.point(&format!("free spot near {anchor}"));
    let spot = format!("spot_near_{anchor}");
    b.add_spot(&spot, p, &format!("free spot next to {anchor}"));
    b.scan_stale(&[&lone.name]);
    b.pick(&lone.name);
    b.place(&spot);
    b.edit(&lone.name, "coordinates", out(p));
    b.edit(&lone.name, "position_in_cartesian_space", ArgValue::text(format!("next to {anchor}")));
    Ok(b.finish(format!("{} is the isolated {category}; move it next to {anchor}.", lone.name)))
}

fn the_container(g: &SceneGraph) -> Result<&SceneNode, PlannerError> {
    let cs: Vec<&SceneNode> = table_items(g).into_iter().filter(|n| is_container(n) && !is_lid(n)).collect();
    match cs.as_slice() {
        [one] => Ok(one),
        [] => Err(PlannerError::InfeasibleGoal("no container".into())),
        _ => Err(PlannerError::InfeasibleGoal("more than one container".into())),
    }
}

/// The one item whose affordances differ from all the others goes into the
/// container.
pub fn solve_odd_one_out(g: &SceneGraph) -> Result<Plan, PlannerError> {
    let container = the_container(g)?;
    let items: Vec<&SceneNode> =
        table_items(g).into_iter().filter(|n| pickable(n) && !is_container(n) && !is_lid(n)).collect();
    let key = |n: &SceneNode| {
        let mut a: Vec<String> = n.affordance.iter().map(|s| lower(s)).collect();
        a.sort();
        a
    };
    let odd: Vec<&&SceneNode> =
        items.iter().filter(|n| items.iter().filter(|m| key(m) == key(n)).count() == 1).collect();
    let [odd] = odd.as_slice() else {
        return Err(PlannerError::InfeasibleGoal("no single mismatched item".into()));
    };
    let mut b = Builder::new(g);
    b.scan_stale(&[&odd.name]);
    b.move_into(&odd.name, &container.name);
    Ok(b.finish(format!("{} is the only item unlike the rest.", odd.name)))
}

/// Every item whose notes mention `dish` goes into the container.
pub fn solve_recipe(g: &SceneGraph, dish: &str) -> Result<Plan, PlannerError> {
    let container = the_container(g)?;
    let dish = lower(dish);
    let items: Vec<&str> = table_items(g)
        .into_iter()
        .filter(|n| pickable(n) && lower(&n.things_to_know).contains(&dish))
        .map(|n| n.name.as_str())
        .collect();
    if items.is_empty() {
        return Err(PlannerError::InfeasibleGoal(format!("no ingredients for {dish}")));
    }
    let mut b = Builder::new(g);
    b.scan_stale(&items);
    for item in &items {
        b.move_into(item, &container.name);
    }
    Ok(b.finish(format!("Ingredients for {dish}: {}.", items.join(", "))))
}

/// Hanoi with pegs named in the request ("from X to Y"); the spare peg is
/// the remaining base, and the disc count comes from the graph.
pub fn solve_hanoi_request(g: &SceneGraph, request: &str) -> Result<Plan, PlannerError> {
    let re = Regex::new(r"from (?:the )?([a-z0-9_]+) to (?:the )?([a-z0-9_]+)").expect("static regex");
    let req = lower(request);
    let caps = re
        .captures(&req)
        .ok_or_else(|| PlannerError::InvalidConfiguration("request names no source and target peg".into()))?;
    let (from, to) = (caps[1].to_string(), caps[2].to_string());
    let bases: Vec<&str> = table_items(g)
        .into_iter()
        .filter(|n| n.name.starts_with("base"))
        .map(|n| n.name.as_str())
        .collect();
    let spare = bases
        .iter()
        .find(|b| **b != from && **b != to)
        .ok_or_else(|| PlannerError::InvalidConfiguration("no spare peg".into()))?;
    let disc_re = Regex::new(r"^disc_(\d+)$").expect("static regex");
    let mut discs: Vec<(String, u32)> = g
        .names()
        .filter_map(|n| disc_re.captures(n).and_then(|c| c[1].parse().ok()).map(|k| (n.to_string(), k)))
        .collect();
    discs.sort_by_key(|d| d.1);
    solve_hanoi_setup(&HanoiSetup { discs, pegs: [from, to, spare.to_string()] })
}

/// Picks a solver from the wording of the request.
pub fn solve_request(g: &SceneGraph, request: &str) -> Result<Plan, PlannerError> {
    let req = lower(request);
    if req.contains("hanoi") {
        return solve_hanoi_request(g, request);
    }
    let between = Regex::new(r"move (?:the )?([a-z0-9_]+) between (?:the )?([a-z0-9_]+) and (?:the )?([a-z0-9_]+)")
        .expect("static regex");
    if let Some(c) = between.captures(&req) {
        return solve_between(g, &c[1], &c[2], &c[3]);
    }
    if req.contains("isolated") || req.contains("lone") {
        let named = Regex::new(r"\b(?:lone|isolated|one)\s+(?:isolated\s+)?(fruit|vegetable)\b").expect("static regex");
        let cat = match named.captures(&req) {
            Some(c) if &c[1] == "vegetable" => "vegetable",
            Some(_) => "fruit",
            None if req.contains("vegetable") && !req.contains("fruit") => "vegetable",
            None => "fruit",
        };
        return solve_isolated(g, cat);
    }
    if req.contains("mismatch") || req.contains("odd one") || req.contains("does not belong") {
        return solve_odd_one_out(g);
    }
    let recipe = Regex::new(r"ingredients (?:for|of) (.+?) (?:in)?to ").expect("static regex");
    if let Some(c) = recipe.captures(&req) {
        return solve_recipe(g, c[1].trim());
    }
    if req.contains("stack") {
        return solve_stacking(g);
    }
    if req.contains("organize the table") || req.contains("organise the table") || req.contains("tidy") {
        return solve_organize(g);
    }
    if req.contains("box") || req.contains("sort") {
        return solve_sorting(g);
    }
    Err(PlannerError::InfeasibleGoal(format!("no built-in solver for '{request}'")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{has_errors, validate_plan};

    fn fixture() -> SceneGraph {
        SceneGraph::deserialize(include_str!("../../tests/fixtures/iii_a_initial.json")).unwrap()
    }

    #[test]
    fn sorting_routes_by_size() {
        let g = fixture();
        let p = solve_request(&g, "Put the objects into boxes in an organized manner.").unwrap();
        assert!(!has_errors(&validate_plan(&p, &g)), "{}", p.render());
        let placed: Vec<(&str, &str)> = p
            .steps
            .windows(2)
            .filter(|w| w[0].tool == tools::PICK)
            .map(|w| (w[0].text_arg("object_name").unwrap(), w[1].text_arg("place_position_name").unwrap()))
            .collect();
        assert_eq!(
            placed,
            vec![
                ("orange", "large_box"),
                ("apple", "large_box"),
                ("lemon", "large_box"),
                ("garlic", "small_box"),
                ("red_onion", "small_box")
            ]
        );
        assert_eq!(p.steps.iter().filter(|s| s.tool == tools::SCAN).count(), 1);
    }

    #[test]
    fn size_keywords() {
        let g = fixture();
        assert!(size_rank(g.get("large_box").unwrap()) > size_rank(g.get("small_box").unwrap()));
    }
}
