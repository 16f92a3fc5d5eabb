//! Where the error lives in frequency: trains a small FNO, then compares
//! the per-mode sine spectrum of its error on in-distribution and
//! high-frequency inputs. Also prints the energy diagnostic of the
//! predictions against the solver.
//!
//! `cargo run --release --example spectral_error -- [train_count] [epochs]`

use woplab::data::{generate_all, DataConfig, SolverPolicy, Split, SplitCounts};
use woplab::evaluation::{modal_error_curve, split_metrics};
use woplab::operators::{init_fno, FnoConfig};
use woplab::solver::Grid;
use woplab::trainer::{fit, TrainConfig};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let train: usize = arg(1, 400);
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
    let cfg = FnoConfig {
        width: 32,
        ..FnoConfig::default()
    };
    let train_cfg = TrainConfig {
        max_epochs: epochs,
        patience: epochs.min(5),
        ..TrainConfig::default()
    };
    let (model, _) = fit(init_fno(&cfg, 2026)?, &splits.train, &splits.val, &train_cfg)?;

    let modes = 24;
    let id = modal_error_curve(&model, &splits.id_test, &grid, modes)?;
    let ood = modal_error_curve(&model, &splits.ood_freq, &grid, modes)?;
    println!("{:>4} {:>12} {:>12}", "k", "id", "ood_freq");
    for k in id.modes() {
        let mark = if ood.mse[k - 1] > id.mse[k - 1] { "*" } else { "" };
        println!("{k:>4} {:>12.3e} {:>12.3e} {mark}", id.mse[k - 1], ood.mse[k - 1]);
    }
    let above = (7..=20).filter(|&k| ood.mse[k - 1] > id.mse[k - 1]).count();
    println!("ood_freq above id at {above} of 14 modes in 7..=20");

    for split in [Split::IdTest, Split::OodFreq] {
        let m = split_metrics(&model, split, splits.get(split))?;
        println!(
            "{:<10} mean {:.4}  std {:.4}  energy discrepancy {:.4}",
            split.name(),
            m.mean,
            m.std,
            m.energy_discrepancy
        );
    }
    Ok(())
}
