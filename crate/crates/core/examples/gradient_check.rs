//! Finite-difference check of the reverse-mode gradients of both operators
//! on toy-sized networks.

use woplab::data::{generate_split, DataConfig, SolverPolicy, Split};
use woplab::operators::{
    check_model_gradients, init_deeponet, init_fno, AnyModel, Batch, DeepOnetConfig, FnoConfig, OperatorModel,
};
use woplab::solver::Grid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 16;
    let grid = Grid::new(n)?;
    let mut manifest = DataConfig::default().manifest(Split::Train);
    manifest.count = 3;
    let ds = generate_split(&manifest, &grid, &SolverPolicy::default(), 1)?;
    let batch = Batch::from_samples(&ds.samples, n)?;

    let models = [
        AnyModel::Fno(init_fno(&FnoConfig::toy(n), 11)?),
        AnyModel::DeepOnet(init_deeponet(&DeepOnetConfig::toy(n), 11)?),
    ];
    for model in &models {
        let report = check_model_gradients(model, &batch, 1e-6, 1e-4)?;
        println!(
            "{:<9} {:>4} entries  worst relative discrepancy {:.2e} at {:?}  {}",
            model.kind().name(),
            report.entries_checked,
            report.max_rel_discrepancy,
            report.worst,
            if report.passed { "ok" } else { "FAILED" }
        );
    }
    Ok(())
}
