// Calibrate SEIR-HCD to cumulative curves and forecast a week ahead.

use epicast::seir::{self, FitContext, SeirFitOptions, SeirHcdParams};

pub fn run_example() -> epicast::Result<()> {
    let truth = SeirHcdParams::from_slice(&[3.6, 7.0, 6.2, 8.0, 9.0, 0.8, 0.3, 0.5]);
    let pop = 1_500_000;
    let ctx = FitContext::new(pop);
    let traj = seir::simulate(&truth, ctx.initial_state(), 67, seir::DEFAULT_STEP)?;
    let (conf, death) = seir::observe(&traj, pop as f64);
    let (c_train, d_train) = (&conf[..=60], &death[..=60]);

    let fit = seir::fit(
        c_train,
        d_train,
        &ctx,
        &seir::reduced_grid(),
        &SeirFitOptions::default(),
    )?;
    println!(
        "loss {:.3e} converged {} from {} starts",
        fit.loss,
        fit.converged,
        fit.start_losses.len()
    );
    println!("fitted {:?}", fit.params.to_vec());
    let (fc, fd) = seir::forecast(&fit.params, fit.final_state, pop, 7)?;
    // forecasts are daily counts
    for k in 0..7 {
        let (tc, td) = (conf[61 + k] - conf[60 + k], death[61 + k] - death[60 + k]);
        println!(
            "day +{} confirmed {:>8.1} (true {:>8.1})  deaths {:>6.2} (true {:>6.2})",
            k + 1,
            fc[k],
            tc,
            fd[k],
            td
        );
    }
    Ok(())
}

fn main() -> epicast::Result<()> {
    run_example()
}
