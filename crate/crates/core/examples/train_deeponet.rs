//! Trains a DeepONet on a small dataset, then saves it as a checkpoint and
//! checks that the reloaded model predicts the same values.
//!
//! `cargo run --release --example train_deeponet -- [train_count] [epochs]`

use woplab::autodiff::{read_checkpoint, write_checkpoint};
use woplab::data::{generate_all, DataConfig, SolverPolicy, SplitCounts};
use woplab::operators::{init_deeponet, AnyModel, Batch, DeepOnetConfig, ModelConfig, OperatorModel};
use woplab::solver::Grid;
use woplab::trainer::{evaluate_split, fit, TrainConfig};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let train: usize = arg(1, 800);
    let epochs: usize = arg(2, 30);

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

    let cfg = DeepOnetConfig::default();
    let model = init_deeponet(&cfg, 7)?;
    let train_cfg = TrainConfig {
        max_epochs: epochs,
        patience: epochs.min(10),
        ..TrainConfig::default()
    };
    let (model, log) = fit(model, &splits.train, &splits.val, &train_cfg)?;
    println!(
        "deeponet: {} parameters, best val {:.4} at epoch {} of {}",
        cfg.parameter_count(),
        log.best_val_loss,
        log.best_epoch,
        log.epochs.len()
    );
    for (split, ds) in splits.evaluated() {
        println!("{:<10} {:.4}", split.name(), evaluate_split(&model, ds)?);
    }

    let path = std::env::temp_dir().join("woplab_deeponet.wopm");
    let model = AnyModel::DeepOnet(model);
    write_checkpoint(&path, &model.to_checkpoint())?;
    let back = AnyModel::from_checkpoint(&ModelConfig::DeepOnet(cfg), read_checkpoint(&path)?)?;
    let batch = Batch::from_samples(&splits.id_test.samples[..4], grid.n_points())?;
    assert_eq!(model.predict(&batch)?, back.predict(&batch)?);
    println!("checkpoint {} reloads to identical predictions", path.display());
    Ok(())
}
