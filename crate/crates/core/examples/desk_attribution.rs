// Real models on a tiny grid: the full experiment loop, persisted and re-read.

use epicast::harness::{
    attribution_report, read_records, run_experiment, ExperimentGrid, ModelForecaster, Quantity, RunOptions, RunStore,
};
use epicast::sarima;
use epicast::seir;
use epicast::synth::synthetic_snapshot;
use epicast::task::{Region, TaskKind};

pub fn run_example() -> epicast::Result<()> {
    let snap = synthetic_snapshot(11);
    let grid = ExperimentGrid {
        sarima: sarima::reduced_space()[..2].to_vec(),
        seir: seir::reduced_grid()[..2].to_vec(),
        acts: vec![(100, 8, 0.01)],
    };
    let forecaster = ModelForecaster {
        sarima_max_iter: 60,
        seir_max_iter: 60,
    };
    let regions = [Region::CA, Region::HI];
    let kinds = [TaskKind::ALL[0]];

    let dir = std::env::temp_dir().join(format!("desk_attribution_{}", std::process::id()));
    let store = RunStore::create(&dir)?;
    let jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let out = run_experiment(
        &snap,
        &grid,
        &kinds,
        &regions,
        &forecaster,
        &RunOptions::new(jobs, 7),
        Some(&store),
    )?;
    store.finalize(&out.records)?;
    let records = read_records(&dir)?;
    std::fs::remove_dir_all(&dir)?;

    for r in &records {
        println!("{:<40} {:?}", r.key(), r.status);
    }
    let report = attribution_report(&records)?;
    print!("{}", report.table(&kinds[0].code(), "ALL", Quantity::Improvement));
    Ok(())
}

fn main() -> epicast::Result<()> {
    run_example()
}
