//! Trains a reduced FNO on a few hundred freshly generated samples and
//! reports the relative L2 error on each evaluated split.
//!
//! `cargo run --release --example train_fno -- [train_count] [epochs] [modes]`

use woplab::data::{generate_all, DataConfig, SolverPolicy, SplitCounts};
use woplab::operators::{init_fno, FnoConfig};
use woplab::solver::Grid;
use woplab::trainer::{evaluate_split, fit_with, TrainConfig};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let train: usize = arg(1, 400);
    let epochs: usize = arg(2, 15);
    let modes: usize = arg(3, 16);

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

    let cfg = FnoConfig {
        modes,
        width: 32,
        ..FnoConfig::default()
    };
    println!("fno: {} parameters, {modes} retained modes", cfg.parameter_count());
    let model = init_fno(&cfg, 2026)?;
    let train_cfg = TrainConfig {
        max_epochs: epochs,
        patience: epochs.min(5),
        ..TrainConfig::default()
    };
    let (model, log) = fit_with(model, &splits.train, &splits.val, &train_cfg, |r| {
        println!(
            "epoch {:>3}  train {:.4}  val {:.4}  ({:.1}s)",
            r.epoch, r.train_loss, r.val_loss, r.seconds
        );
    })?;
    println!("kept epoch {} ({:?})", log.best_epoch, log.stop_reason);

    for (split, ds) in splits.evaluated() {
        println!("{:<10} {:.4}", split.name(), evaluate_split(&model, ds)?);
    }
    Ok(())
}
