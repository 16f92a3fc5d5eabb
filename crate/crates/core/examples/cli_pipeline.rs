//! Drives the command line in-process on a tiny config: data generation,
//! one training epoch per model and evaluation, then lists the artifacts
//! recorded in the evaluation manifest.
//!
//! `cargo run --release --example cli_pipeline -- [run_dir]`

use std::path::PathBuf;
use std::process::ExitCode;

use woplab::cli::{manifest_name, run, RunManifest};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

const CONFIG: &str = r#"{
  "data": { "counts": { "train": 64, "val": 16, "id_test": 16, "ood_freq": 16, "ood_smooth": 16 } },
  "fno": { "width": 16, "modes": 8 },
  "train": { "max_epochs": 1, "patience": 1 }
}"#;

fn main() -> Result<ExitCode, Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("woplab_cli"));
    std::fs::create_dir_all(&dir)?;
    let config = dir.join("config.json");
    std::fs::write(&config, CONFIG)?;
    let out_dir = format!("out_dir=\"{}\"", dir.join("run").display());

    let steps: [&[&str]; 4] = [
        &["gen-data"],
        &["train", "--model", "fno"],
        &["train", "--model", "deeponet"],
        &["evaluate"],
    ];
    for step in steps {
        let mut args = vec!["woplab"];
        args.extend_from_slice(step);
        args.extend(["-q", "-c", config.to_str().unwrap(), "--set", &out_dir]);
        println!("$ {}", args.join(" "));
        let code = run(&args);
        if code != ExitCode::SUCCESS {
            return Ok(code);
        }
    }

    let eval = dir.join("run").join("eval");
    let manifest = RunManifest::read(&eval.join(manifest_name("evaluate")))?;
    for a in &manifest.artifacts {
        println!("{:<36} {:>8} bytes  {}", a.path.display(), a.bytes, &a.sha256[..12]);
    }
    assert!(manifest.stale_artifacts(&eval).is_empty());
    Ok(ExitCode::SUCCESS)
}
