//! Regenerates the checked-in example problem files.
//!
//! Usage: cargo run --example gen_models [out_dir]

use mdpsynth::ingest::{canonical_json, gen_beetle};

fn main() -> std::io::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "models".into());
    let dir = std::path::Path::new(&out);
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("beetle-single.json"), canonical_json(&gen_beetle(false)))?;
    std::fs::write(dir.join("beetle-multi.json"), canonical_json(&gen_beetle(true)))?;
    Ok(())
}
