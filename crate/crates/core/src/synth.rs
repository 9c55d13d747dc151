//! Seeded synthetic data: ARMA processes and JHU-format snapshots.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Zero-mean ARMA sample `w_t = Σ ar_i w_{t-i} + ε_t + Σ ma_j ε_{t-j}` after a burn-in.
pub fn arma_series(ar: &[f64], ma: &[f64], sigma: f64, n: usize, seed: u64) -> Vec<f64> {
    let burn = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let total = n + burn;
    let eps: Vec<f64> = (0..total).map(|_| normal.sample(&mut rng)).collect();
    let mut w = vec![0.0; total];
    for t in 0..total {
        let mut v = eps[t];
        for (i, a) in ar.iter().enumerate() {
            if t > i {
                v += a * w[t - i - 1];
            }
        }
        for (j, b) in ma.iter().enumerate() {
            if t > j {
                v += b * eps[t - j - 1];
            }
        }
        w[t] = v;
    }
    w.split_off(burn)
}

/// Noise-free sinusoid-plus-trend regions with distinct levels, slopes, periods and phases.
pub fn sine_trend_regions(regions: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let periods = [14.0, 21.0, 10.0, 28.0, 7.0];
    (0..regions)
        .map(|i| {
            let level = rng.gen_range(50.0..150.0);
            let slope = rng.gen_range(0.2..1.0);
            let amp = rng.gen_range(10.0..30.0);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let period = periods[i % periods.len()];
            (0..len)
                .map(|t| {
                    let t = t as f64;
                    level + slope * t + amp * (std::f64::consts::TAU * t / period + phase).sin()
                })
                .collect()
        })
        .collect()
}

/// Two regions where the first repeats the second `delay` days later, so the second's
/// recent history is the first's future. Each is `len` long.
pub fn delayed_analogy(len: usize, delay: usize, seed: u64) -> [Vec<f64>; 2] {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = len + delay;
    let bumps: Vec<(f64, f64, f64)> = (0..total / 20 + 2)
        .map(|k| {
            let centre = k as f64 * 20.0 + rng.gen_range(-4.0..4.0);
            (centre, rng.gen_range(20.0..80.0), rng.gen_range(3.0..7.0))
        })
        .collect();
    let f: Vec<f64> = (0..total)
        .map(|t| {
            let t = t as f64;
            100.0
                + 0.3 * t
                + bumps
                    .iter()
                    .map(|(c, a, w)| a * (-(t - c).powi(2) / (2.0 * w * w)).exp())
                    .sum::<f64>()
        })
        .collect();
    [f[..len].to_vec(), f[delay..].to_vec()]
}

/// Reference populations used by [`jhu_snapshot`], split evenly over two counties.
pub const SYNTHETIC_POPULATION: [(crate::task::Region, u64); 5] = [
    (crate::task::Region::CA, 39_512_223),
    (crate::task::Region::NY, 19_453_561),
    (crate::task::Region::TX, 28_995_881),
    (crate::task::Region::MN, 5_639_632),
    (crate::task::Region::HI, 1_415_872),
];

/// A seeded stand-in for the JHU CSSE US confirmed and death files, covering
/// 2020-01-22 through 2021-06-30 for the five study states. Daily cases follow three
/// epidemic waves with a weekly reporting cycle; deaths lag cases by two weeks.
pub fn jhu_snapshot(seed: u64) -> (String, String) {
    use crate::task::{first_case_date, Target};
    use chrono::{Duration, NaiveDate};
    use rand::Rng;
    use std::fmt::Write;

    let start = NaiveDate::from_ymd_opt(2020, 1, 22).expect("date");
    let end = NaiveDate::from_ymd_opt(2021, 6, 30).expect("date");
    let days = (end - start).num_days() as usize + 1;
    let dates: Vec<NaiveDate> = (0..days).map(|i| start + Duration::days(i as i64)).collect();
    let header_dates: String = dates.iter().map(|d| format!(",{}", d.format("%-m/%-d/%y"))).collect();
    let mut conf =
        format!("UID,iso2,iso3,code3,FIPS,Admin2,Province_State,Country_Region,Lat,Long_,Combined_Key{header_dates}\n");
    let mut death = format!(
        "UID,iso2,iso3,code3,FIPS,Admin2,Province_State,Country_Region,Lat,Long_,Combined_Key,Population{header_dates}\n"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.08).expect("sigma");
    for (ri, (region, pop)) in SYNTHETIC_POPULATION.iter().enumerate() {
        let first_c = (first_case_date(*region, Target::Confirmed) - start).num_days() as usize;
        let first_d = (first_case_date(*region, Target::Death) - start).num_days() as usize;
        let waves: Vec<(f64, f64, f64)> = [(70.0, 25.0, 0.3), (190.0, 30.0, 0.6), (345.0, 35.0, 1.0)]
            .iter()
            .map(|&(c, w, a)| {
                (
                    c + rng.gen_range(-15.0..15.0),
                    w * rng.gen_range(0.8..1.2),
                    a * rng.gen_range(0.7..1.3),
                )
            })
            .collect();
        let peak = *pop as f64 * 1.2e-3;
        let mut daily_c = vec![0.0; days];
        for (t, v) in daily_c.iter_mut().enumerate().skip(first_c) {
            let wave: f64 = waves
                .iter()
                .map(|(c, w, a)| a * (-((t as f64 - c) / w).powi(2)).exp())
                .sum();
            let weekly = 1.0 + 0.15 * (2.0 * std::f64::consts::PI * (t + ri) as f64 / 7.0).sin();
            let mean = (peak * (wave + 0.02) * weekly).max(1.0);
            *v = (mean * (1.0 + noise.sample(&mut rng))).max(0.0).round();
        }
        daily_c[first_c] = daily_c[first_c].max(1.0);
        let mut daily_d = vec![0.0; days];
        for t in first_d..days {
            let src = daily_c[t.saturating_sub(14)];
            daily_d[t] = (0.015 * src * (1.0 + noise.sample(&mut rng))).max(0.0).round();
        }
        daily_d[first_d] = daily_d[first_d].max(1.0);
        let county_pop = [pop / 2, pop - pop / 2];
        for (k, cp) in county_pop.iter().enumerate() {
            let split = |daily: &[f64]| -> String {
                let mut acc = 0.0;
                let mut s = String::new();
                for v in daily {
                    let part = if k == 0 {
                        (v / 2.0).floor()
                    } else {
                        v - (v / 2.0).floor()
                    };
                    acc += part;
                    let _ = write!(s, ",{acc}");
                }
                s
            };
            let name = crate::task::Region::state_name(*region);
            let prefix = format!(
                "{uid},US,USA,840,{fips}.0,County{k},{name},US,0.0,0.0,\"County{k}, {name}, US\"",
                uid = 84000000 + ri * 100 + k,
                fips = ri * 1000 + k + 1,
            );
            let _ = writeln!(conf, "{prefix}{}", split(&daily_c));
            let _ = writeln!(death, "{prefix},{cp}{}", split(&daily_d));
        }
    }
    (conf, death)
}

/// [`jhu_snapshot`] parsed into a [`crate::ingest::Snapshot`].
pub fn synthetic_snapshot(seed: u64) -> crate::ingest::Snapshot {
    let (c, d) = jhu_snapshot(seed);
    crate::ingest::Snapshot::from_texts(&c, &d).expect("synthetic snapshot parses")
}

/// Writes [`jhu_snapshot`] under the standard file names.
pub fn write_jhu_snapshot(dir: &std::path::Path, seed: u64) -> crate::Result<()> {
    let (c, d) = jhu_snapshot(seed);
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(crate::ingest::CONFIRMED_FILE), c)?;
    std::fs::write(dir.join(crate::ingest::DEATHS_FILE), d)?;
    Ok(())
}
