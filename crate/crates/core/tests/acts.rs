use epicast::acts::{self, ActsData, ActsHyper, ActsModel};
use epicast::synth::sine_trend_regions;

fn toy() -> ActsData {
    ActsData::new(sine_trend_regions(3, 60, 5))
}

#[test]
fn every_grid_point_trains_to_finite_forecasts() {
    let data = toy();
    let space = acts::full_space();
    assert_eq!(space.len(), 18);
    for (e, d, r) in space {
        let model = acts::train(&data, &ActsHyper::new(e, d, r, 7).with_seed(3)).unwrap();
        assert_eq!(model.history.len(), e + 1);
        assert!(model.history.iter().all(|v| v.is_finite()), "({e},{d},{r}) loss");
        for i in 0..data.len() {
            let fc = acts::forecast(&model, &data, i).unwrap();
            assert_eq!(fc.len(), 7);
            assert!(
                fc.iter().all(|v| v.is_finite() && *v >= 0.0),
                "({e},{d},{r}) region {i}: {fc:?}"
            );
        }
    }
}

#[test]
fn same_seed_same_model() {
    let data = toy();
    let h = ActsHyper::new(50, 8, 0.01, 7).with_seed(9);
    let a = acts::train(&data, &h).unwrap();
    let b = acts::train(&data, &h).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let c = acts::train(&data, &h.with_seed(10)).unwrap();
    assert_ne!(a.to_json().unwrap(), c.to_json().unwrap());
}

#[test]
fn checkpoint_restores_forecasts() {
    let data = toy();
    let model = acts::train(&data, &ActsHyper::new(30, 8, 0.01, 7).with_seed(1)).unwrap();
    let back = ActsModel::from_json(&model.to_json().unwrap()).unwrap();
    for i in 0..data.len() {
        assert_eq!(
            acts::forecast(&model, &data, i).unwrap(),
            acts::forecast(&back, &data, i).unwrap()
        );
    }
}
