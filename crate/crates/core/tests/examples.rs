// Every crate example runs as part of the test suite.

macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!("../examples/", stringify!($name), ".rs"));
        }

        #[test]
        fn $name() {
            $name::run_example().unwrap();
        }
    };
}

example!(ingest_snapshot);
example!(metrics_report);
example!(stationarity);
example!(sarima_forecast);
example!(seir_fit);
example!(acts_analogy);
example!(attribution_stub);
example!(desk_attribution);
