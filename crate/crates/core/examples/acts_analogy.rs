// Train ACTS on two regions where one leads the other, then save and reload the model.

use epicast::acts::{self, ActsData, ActsHyper, ActsModel};
use epicast::metrics::evaluate;
use epicast::synth::delayed_analogy;

pub fn run_example() -> epicast::Result<()> {
    let (len, h) = (120, 7);
    let [lagging, leading] = delayed_analogy(len + h, h, 4);
    let data = ActsData::new(vec![lagging[..len].to_vec(), leading[..len].to_vec()]);
    let model = acts::train(&data, &ActsHyper::new(400, 16, 0.005, h).with_seed(1))?;
    let n = model.history.len();
    println!(
        "train MAE epoch 0 {:.3}, final {:.3}",
        model.history[0],
        model.history[n - 1]
    );

    let fc = acts::forecast(&model, &data, 0)?;
    let trend = acts::detrend(&model.holt()[0], &data.series[0], h)?.trend_forecast;
    let truth = &lagging[len..];
    println!(
        "MAE with attention {:.3}, Holt alone {:.3}",
        evaluate(truth, &fc)?.mae,
        evaluate(truth, &trend)?.mae
    );

    let path = std::env::temp_dir().join(format!("acts_analogy_{}.json", std::process::id()));
    model.save(&path)?;
    let back = ActsModel::load(&path)?;
    std::fs::remove_file(&path)?;
    assert_eq!(acts::forecast(&back, &data, 0)?, fc);
    println!("checkpoint round trip ok");
    Ok(())
}

fn main() -> epicast::Result<()> {
    run_example()
}
