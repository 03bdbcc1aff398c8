//! Write the synthetic urban and highway datasets used by the tests.
//!
//! `cargo run -p bevtraj --example synth -- <out dir>` creates
//! `<out dir>/urban` (rounD layout) and `<out dir>/highway` (highD layout).

use std::path::PathBuf;

use bevtraj::synth::{write_highway, write_urban, UrbanSpec};

fn main() -> bevtraj::Result<()> {
    let out: PathBuf = std::env::args_os().nth(1).map(PathBuf::from).unwrap_or_else(|| "synthetic".into());
    write_urban(&out.join("urban"), &UrbanSpec::default())?;
    write_highway(&out.join("highway"))?;
    println!("wrote {}", out.display());
    Ok(())
}
