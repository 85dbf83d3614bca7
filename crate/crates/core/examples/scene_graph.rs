//! Build a scene graph, edit it, and diff two versions.
//!
//! `cargo run --example scene_graph`

use lta::scene_graph::{Attribute, AttributeValue, SceneGraph, SceneNode, ROOT};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let before = SceneGraph::new()
        .add_object(SceneNode::new("basket").with_affordance(["container"]).with_coordinates([0.2, -0.6, 0.05]), ROOT)?
        .add_object(SceneNode::new("apple").with_affordance(["pickable"]), ROOT)?
        .add_object(SceneNode::new("pear").with_affordance(["pickable"]), ROOT)?;

    // Every edit returns a new graph; `before` is untouched.
    let after = before
        .edit_attribute("basket", Attribute::Contains, AttributeValue::List(vec!["apple".into()]))?
        .edit_attribute("pear", Attribute::ThingsToKnow, AttributeValue::Text("bruised on one side".into()))?
        .set_coordinates("pear", [-0.1, -0.5, 0.04])?;

    println!("parent of apple: {:?}", after.parent_of("apple"));
    println!("{}", after.render_for_prompt());

    let delta = before.diff(&after);
    println!("{}", serde_json::to_string_pretty(&delta)?);
    assert_eq!(before.apply(&delta)?, after);

    // The file format round-trips byte for byte.
    let text = after.serialize();
    assert_eq!(SceneGraph::deserialize(&text)?.serialize(), text);
    Ok(())
}
