// Run an experiment from a TOML config and read back its manifest.

use kdvlab::lab::{run, ExperimentConfig, RunOptions};

const CONFIG: &str = r#"
schema_version = 1
experiment = "spectrum"
seed = 11

[initial]
source = "gaussian_h"
m = 12
amplitude = 0.2

[spectrum]
gaps = 5
"#;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    cfg.validate()?;
    let dir = std::env::temp_dir().join(format!("kdvlab-example-{}", std::process::id()));
    let manifest = run(
        &cfg,
        &RunOptions {
            out: Some(dir.clone()),
            force: true,
            jobs: Some(1),
        },
    )?;
    println!("digest {}", manifest.config_digest);
    for a in &manifest.artifacts {
        println!("{}  {}", a.sha256, a.path);
    }
    print!("{}", std::fs::read_to_string(dir.join("spectrum.csv"))?);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
