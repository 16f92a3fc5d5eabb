//! Generates a small copy of the five splits, writes them in the binary
//! dataset format, reads one back, and exports a few samples as CSV.
//!
//! `cargo run --release --example generate_data -- [out_dir] [train_count]`

use std::path::PathBuf;

use woplab::data::{
    export_samples_csv, generate_all, read_dataset, write_dataset, DataConfig, SolverPolicy, Split, SplitCounts,
};
use woplab::solver::Grid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("woplab_data"));
    let train: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200);

    let grid = Grid::new(128)?;
    let held_out = (train / 10).max(1);
    let cfg = DataConfig {
        counts: SplitCounts {
            train,
            val: held_out,
            id_test: held_out,
            ood_freq: held_out,
            ood_smooth: held_out,
        },
        ..DataConfig::default()
    };
    let splits = generate_all(&cfg, &grid, &SolverPolicy::default(), 1)?;

    std::fs::create_dir_all(&out)?;
    for split in Split::ALL {
        let ds = splits.get(split);
        let path = out.join(split.file_name());
        write_dataset(ds, &path)?;
        let peak = ds.samples.iter().map(|s| s.ut.max_abs()).fold(0.0, f64::max);
        let c_min = ds.samples.iter().map(|s| s.c.min()).fold(f64::INFINITY, f64::min);
        let k_max = ds.samples.iter().map(|s| s.meta.k_max).max().unwrap_or(0);
        println!(
            "{:<10} {:>5} samples  max |u(T)| {peak:.3}  min c {c_min:.3}  top mode {k_max:>2}  -> {}",
            split.name(),
            ds.len(),
            path.display()
        );
    }

    let back = read_dataset(&out.join(Split::OodFreq.file_name()))?;
    assert_eq!(&back, splits.get(Split::OodFreq));
    let csv = out.join("ood_freq_samples.csv");
    export_samples_csv(&back, &[0, 1], &csv)?;
    println!("first two ood_freq samples in {}", csv.display());
    Ok(())
}
