//! Writes the demo images and the mock replies that answer them.
//!
//! From crates/core: cargo run -p dermacen-core --example demo_fixtures -- fixtures/demo

use std::path::PathBuf;

use dermacen_core::orchestrator::{demo_cases, demo_mock};
use dermacen_core::segmentation::GrabCutParams;

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures/demo".into()));
    let mock_dir = out.join("mock");
    let image_dir = out.join("images");
    let _ = std::fs::remove_dir_all(&mock_dir);
    std::fs::create_dir_all(&image_dir).unwrap();
    for case in demo_cases() {
        std::fs::write(image_dir.join(format!("{}.png", case.name)), &case.png).unwrap();
    }
    let mock = demo_mock(&GrabCutParams::default()).unwrap();
    mock.write_dir(&mock_dir).unwrap();
    println!("wrote {} fixtures to {}", mock.len(), mock_dir.display());
}
