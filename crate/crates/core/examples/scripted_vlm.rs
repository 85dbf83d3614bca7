//! Ask the deterministic vision model the four kinds of question.
//!
//! `cargo run --example scripted_vlm`

use lta::backends::wire::{parse_bboxes, parse_point};
use lta::backends::{ScriptedVlm, VlmBackend, VlmKind, VlmNoise, VlmQuery};
use lta::eval::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/i_a.json").as_ref())?;
    let mut world = sc.world.build(sc.seed, false, &[])?;
    let cap = world.capture(0)?;
    let mut vlm = ScriptedVlm::new(VlmNoise::default());

    for (kind, text) in [
        (VlmKind::Vqa, "How many fruits are on the table?"),
        (VlmKind::Vqa, "Do you see any red objects?"),
        (VlmKind::Presence, cap.visible[0].as_str()),
        (VlmKind::Bboxes, cap.visible.join(", ").as_str()),
        (VlmKind::Point, "a free spot on the table"),
    ] {
        let q = VlmQuery::new(kind, text, cap.id);
        match vlm.query(&q, &world, &cap) {
            Ok(reply) => {
                println!("{kind:?} {text:?} -> {reply}");
                match kind {
                    VlmKind::Bboxes => println!("  parsed {} boxes", parse_bboxes(&reply)?.len()),
                    VlmKind::Point => println!("  parsed {:?}", parse_point(&reply)?),
                    _ => {}
                }
            }
            Err(e) => println!("{kind:?} {text:?} -> error: {e}"),
        }
    }
    Ok(())
}
