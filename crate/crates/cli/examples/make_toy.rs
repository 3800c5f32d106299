//! Regenerates the bundled toy data: `cargo run -p vocadapt-cli --example make_toy [DIR]`.

use std::path::PathBuf;

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/toy")));
    if let Err(e) = vocadapt_cli::toy::write_toy_data(&dir) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
    println!("toy data written to {}", dir.display());
}
