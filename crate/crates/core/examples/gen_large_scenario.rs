//! Regenerate the bundled large-scale catalog and cluster files.
//!
//! ```sh
//! cargo run -p failsim --example gen_large_scenario -- scenarios/large
//! ```
//!
//! The output is a pure function of `SynthSpec::large_scale()` and
//! `LARGE_SCALE_SEED`; a unit test fails if the committed files drift.

use failsim::synth::{instance_toml, SynthSpec, LARGE_SCALE_SEED};

fn main() -> std::io::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "scenarios/large".into());
    let dir = std::path::Path::new(&out);
    std::fs::create_dir_all(dir)?;
    let (catalog, cluster) = instance_toml(LARGE_SCALE_SEED, &SynthSpec::large_scale());
    std::fs::write(dir.join("catalog.toml"), &catalog)?;
    std::fs::write(dir.join("cluster.toml"), &cluster)?;
    println!(
        "wrote {} ({} bytes) and {} ({} bytes)",
        dir.join("catalog.toml").display(),
        catalog.len(),
        dir.join("cluster.toml").display(),
        cluster.len(),
    );
    Ok(())
}
