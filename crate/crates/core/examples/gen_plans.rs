//! Regenerates `plans/buffer{1,2,3}.json`.
use mpsqd_core::multiprog::{generate_bundled_plan, layout_distance};

fn main() {
    for buffer in 1..=3 {
        let plan = generate_bundled_plan(buffer).expect("plan");
        eprintln!(
            "buffer {buffer}: {:?} / {:?} distance {:?}",
            plan.layouts[0],
            plan.layouts[1],
            layout_distance(&plan.map, &plan.layouts[0], &plan.layouts[1])
        );
        let path = format!("{}/plans/buffer{buffer}.json", env!("CARGO_MANIFEST_DIR"));
        std::fs::write(path, serde_json::to_string_pretty(&plan).unwrap() + "\n").unwrap();
    }
}
