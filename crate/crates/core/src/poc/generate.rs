use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::{resolve_instruction, DetectedObject, OfficerSignal, PocCommand, PocScene};
use crate::generate::stream_rng;

pub const DEFAULT_POC_COUNT: usize = 20;

/// Colour vocabulary for generated objects and the resolver.
pub const POC_COLORS: &[&str] = &[
    "red", "blue", "yellow", "green", "orange", "white", "purple", "pink",
];

const SUPERLATIVES: &[&str] = &["leftmost", "rightmost", "middle", "nearest", "farthest"];

fn noun(category: &str) -> &str {
    if category == "color cone" {
        "color cone"
    } else {
        category
    }
}

fn instruction<R: Rng>(rng: &mut R, objects: &[DetectedObject]) -> Option<String> {
    let target = objects.choose(rng).expect("scenes have objects");
    let roll: f64 = rng.random();
    let text = if roll < 0.08 {
        return None;
    } else if roll < 0.13 {
        "Stop here, please.".to_string()
    } else if roll < 0.38 {
        format!(
            "Please go to the {} {}",
            target.color,
            noun(&target.category)
        )
    } else if roll < 0.45 {
        let absent: Vec<&&str> = POC_COLORS
            .iter()
            .filter(|c| objects.iter().all(|o| o.color != **c))
            .collect();
        let color = absent.choose(rng).map(|c| **c).unwrap_or("green");
        format!("Go to the {color} cone")
    } else if roll < 0.80 {
        let sup = SUPERLATIVES.choose(rng).expect("non-empty");
        let phrase = [
            "Head towards the {} color cone",
            "Go to the {} one",
            "Drive to the {} cone",
        ]
        .choose(rng)
        .expect("non-empty");
        phrase.replace("{}", sup)
    } else if roll < 0.92 {
        let side = ["left", "right"].choose(rng).expect("non-empty");
        format!("Please go to the {side} color cone")
    } else {
        let sup = SUPERLATIVES.choose(rng).expect("non-empty");
        format!("Go to the {sup} {}", noun(&target.category))
    };
    Some(text)
}

fn scene<R: Rng>(rng: &mut R, id: String, seed: u64) -> PocScene {
    let n = rng.random_range(2..=5usize);
    let mut colors = POC_COLORS.to_vec();
    colors.shuffle(rng);
    let objects: Vec<DetectedObject> = (0..n)
        .map(|i| DetectedObject {
            id: i as u32 + 1,
            category: if rng.random_bool(0.2) {
                "box"
            } else {
                "color cone"
            }
            .to_string(),
            color: colors[i].to_string(),
            x: rng.random_range(-8..=8) as f64 * 0.5,
            y: rng.random_range(6..=40) as f64 * 0.5,
        })
        .collect();
    let officer = match rng.random_range(0..4u8) {
        0 => OfficerSignal::Stop,
        1 => OfficerSignal::Go,
        _ => OfficerSignal::Absent,
    };
    let instruction = instruction(rng, &objects);
    let mut scene = PocScene {
        id,
        objects,
        officer,
        instruction,
        ground_truth: PocCommand::Stop,
        seed,
    };
    scene.ground_truth = resolve_instruction(&scene);
    scene
}

/// Three cones of distinct colours at distinct lateral offsets, with no
/// officer and no instruction: the starting field for interactive use.
pub fn three_cone_scene(seed: u64) -> PocScene {
    let mut rng = stream_rng(seed, 0);
    let mut colors = POC_COLORS.to_vec();
    colors.shuffle(&mut rng);
    let mut xs: Vec<i32> = (-8..=8).collect();
    xs.shuffle(&mut rng);
    let objects = (0..3)
        .map(|i| DetectedObject {
            id: i as u32 + 1,
            category: "color cone".into(),
            color: colors[i].to_string(),
            x: xs[i] as f64 * 0.5,
            y: rng.random_range(6..=40) as f64 * 0.5,
        })
        .collect();
    PocScene {
        id: format!("cones-s{seed}"),
        objects,
        officer: OfficerSignal::Absent,
        instruction: None,
        ground_truth: PocCommand::Stop,
        seed,
    }
}

/// Seeded cone-field scenes labeled by the resolver.
pub fn generate_poc_dataset(count: usize, seed: u64) -> Vec<PocScene> {
    (0..count)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            scene(&mut rng, format!("poc-s{seed}-{i:04}"), seed)
        })
        .collect()
}
