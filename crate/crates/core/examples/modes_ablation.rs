//! Retained-modes ablation on a reduced budget: one FNO per setting, same
//! data and seed, errors tabulated per split.
//!
//! `cargo run --release --example modes_ablation -- [train_count] [epochs]`

use woplab::data::{generate_all, DataConfig, SolverPolicy, SplitCounts};
use woplab::evaluation::{modes_ablation, write_ablation_csv, ABLATION_MODES};
use woplab::operators::FnoConfig;
use woplab::solver::Grid;
use woplab::trainer::TrainConfig;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let train: usize = arg(1, 300);
    let epochs: usize = arg(2, 10);

    let grid = Grid::new(128)?;
    let held_out = (train / 5).max(8);
    let data = DataConfig {
        counts: SplitCounts {
            train,
            val: held_out,
            id_test: held_out,
            ood_freq: held_out,
            ood_smooth: held_out,
        },
        ..DataConfig::default()
    };
    let splits = generate_all(&data, &grid, &SolverPolicy::default(), 1)?;
    let base = FnoConfig {
        width: 32,
        ..FnoConfig::default()
    };
    let train_cfg = TrainConfig {
        max_epochs: epochs,
        patience: epochs.min(5),
        ..TrainConfig::default()
    };

    let outcome = modes_ablation(&ABLATION_MODES, &base, &splits, &train_cfg, |modes, r| {
        eprintln!("modes {modes:>2}  epoch {:>3}  val {:.4}", r.epoch, r.val_loss);
    })?;

    println!(
        "{:>5} {:>8} {:>8} {:>9} {:>10}",
        "modes", "val", "id", "ood_freq", "ood_smooth"
    );
    for r in &outcome.rows {
        println!(
            "{:>5} {:>8.4} {:>8.4} {:>9.4} {:>10.4}",
            r.modes, r.val, r.id, r.ood_freq, r.ood_smooth
        );
    }
    let path = std::env::temp_dir().join("woplab_ablation.csv");
    write_ablation_csv(&outcome.rows, &path)?;
    println!("table written to {}", path.display());
    Ok(())
}
