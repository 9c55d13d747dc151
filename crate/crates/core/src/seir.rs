//! Seven-compartment SEIR-HCD epidemic model: ODE right-hand side, fixed-step RK4
//! integration, weighted log-error calibration under box bounds, and daily forecasts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{self, Bounds, LbfgsOptions};

/// Listed values per parameter, in the order R0, t_inc, t_inf, t_hosp, t_crt, β, γ, δ.
pub const START_VALUES: [&[f64]; 8] = [
    &[1.2, 3.6, 7.0],
    &[4.0, 7.0, 14.0],
    &[2.9, 6.2, 10.1],
    &[4.0, 12.0],
    &[5.0, 14.0],
    &[0.7, 0.9],
    &[0.1, 0.6],
    &[0.3, 0.8],
];

pub const DEFAULT_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeirHcdParams {
    pub r0: f64,
    pub t_inc: f64,
    pub t_inf: f64,
    pub t_hosp: f64,
    pub t_crt: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl SeirHcdParams {
    pub fn to_vec(&self) -> [f64; 8] {
        [
            self.r0,
            self.t_inc,
            self.t_inf,
            self.t_hosp,
            self.t_crt,
            self.beta,
            self.gamma,
            self.delta,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            r0: v[0],
            t_inc: v[1],
            t_inf: v[2],
            t_hosp: v[3],
            t_crt: v[4],
            beta: v[5],
            gamma: v[6],
            delta: v[7],
        }
    }

    /// Per-field `[min, max]` of the listed values.
    pub fn bounds() -> Bounds {
        let lower = START_VALUES
            .iter()
            .map(|v| v.iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        let upper = START_VALUES
            .iter()
            .map(|v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        Bounds::new(lower, upper)
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.to_vec();
        if v[..5].iter().any(|x| !(*x > 0.0)) || v[5..].iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Invalid(format!("invalid SEIR-HCD parameters {self:?}")));
        }
        Ok(())
    }

    /// Middle-of-the-table default: R0 = 3.6, t_inc = 7, t_inf = 6.2 and the first listed
    /// value of the rest.
    pub fn default_point() -> Self {
        Self::from_slice(&[3.6, 7.0, 6.2, 4.0, 5.0, 0.7, 0.1, 0.3])
    }
}

/// Cartesian product of the listed values: 864 points, lexicographic in parameter order.
pub fn full_grid() -> Vec<SeirHcdParams> {
    let mut out = vec![Vec::new()];
    for values in START_VALUES {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out.iter().map(|v| SeirHcdParams::from_slice(v)).collect()
}

/// 32-point subset: R0, t_inc and t_inf at their middle values, the two-valued fields varied.
pub fn reduced_grid() -> Vec<SeirHcdParams> {
    full_grid()
        .into_iter()
        .filter(|p| p.r0 == 3.6 && p.t_inc == 7.0 && p.t_inf == 6.2)
        .collect()
}

/// Population fractions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CompartmentState {
    pub s: f64,
    pub e: f64,
    pub i: f64,
    pub r: f64,
    pub h: f64,
    pub c: f64,
    pub d: f64,
}

impl CompartmentState {
    pub fn initial(population: f64, n_inf: f64) -> Self {
        Self {
            s: (population - n_inf) / population,
            i: n_inf / population,
            ..Self::default()
        }
    }

    pub fn total(&self) -> f64 {
        self.s + self.e + self.i + self.r + self.h + self.c + self.d
    }

    pub fn min_component(&self) -> f64 {
        [self.s, self.e, self.i, self.r, self.h, self.c, self.d]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    fn axpy(&self, k: f64, other: &Self) -> Self {
        Self {
            s: self.s + k * other.s,
            e: self.e + k * other.e,
            i: self.i + k * other.i,
            r: self.r + k * other.r,
            h: self.h + k * other.h,
            c: self.c + k * other.c,
            d: self.d + k * other.d,
        }
    }
}

/// Time derivatives of all compartments.
pub fn derivative(x: &CompartmentState, p: &SeirHcdParams) -> CompartmentState {
    let infection = p.r0 * x.i * x.s / p.t_inf;
    let incubated = x.e / p.t_inc;
    let recovered_i = x.i / p.t_inf;
    let leave_h = x.h / p.t_hosp;
    let leave_c = x.c / p.t_crt;
    CompartmentState {
        s: -infection,
        e: infection - incubated,
        i: incubated - recovered_i,
        r: p.beta * recovered_i + (1.0 - p.gamma) * leave_h,
        h: (1.0 - p.beta) * recovered_i + (1.0 - p.delta) * leave_c - leave_h,
        c: p.gamma * leave_h - leave_c,
        d: p.delta * leave_c,
    }
}

fn rk4_step(x: &CompartmentState, p: &SeirHcdParams, dt: f64) -> CompartmentState {
    let k1 = derivative(x, p);
    let k2 = derivative(&x.axpy(dt / 2.0, &k1), p);
    let k3 = derivative(&x.axpy(dt / 2.0, &k2), p);
    let k4 = derivative(&x.axpy(dt, &k3), p);
    CompartmentState {
        s: x.s + dt / 6.0 * (k1.s + 2.0 * k2.s + 2.0 * k3.s + k4.s),
        e: x.e + dt / 6.0 * (k1.e + 2.0 * k2.e + 2.0 * k3.e + k4.e),
        i: x.i + dt / 6.0 * (k1.i + 2.0 * k2.i + 2.0 * k3.i + k4.i),
        r: x.r + dt / 6.0 * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r),
        h: x.h + dt / 6.0 * (k1.h + 2.0 * k2.h + 2.0 * k3.h + k4.h),
        c: x.c + dt / 6.0 * (k1.c + 2.0 * k2.c + 2.0 * k3.c + k4.c),
        d: x.d + dt / 6.0 * (k1.d + 2.0 * k2.d + 2.0 * k3.d + k4.d),
    }
}

/// Classical RK4 with a fixed step; returns `days + 1` daily states starting with `init`.
pub fn simulate(
    params: &SeirHcdParams,
    init: CompartmentState,
    days: usize,
    step: f64,
) -> Result<Vec<CompartmentState>> {
    if !(step > 0.0) {
        return Err(Error::Invalid("integration step must be positive".into()));
    }
    let per_day = (1.0 / step).round() as usize;
    if per_day == 0 || ((per_day as f64) * step - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(format!("step {step} does not divide one day")));
    }
    let dt = 1.0 / per_day as f64;
    let mut out = Vec::with_capacity(days + 1);
    let mut x = init;
    out.push(x);
    for _ in 0..days {
        for _ in 0..per_day {
            x = rk4_step(&x, params, dt);
        }
        out.push(x);
    }
    Ok(out)
}

/// Cumulative confirmed `N (I+R+H+C+D)` and cumulative deaths `N D`.
pub fn observe(trajectory: &[CompartmentState], population: f64) -> (Vec<f64>, Vec<f64>) {
    trajectory
        .iter()
        .map(|x| (population * (x.i + x.r + x.h + x.c + x.d), population * x.d))
        .unzip()
}

/// Calibration settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitContext {
    pub population: u64,
    pub n_inf: f64,
    pub window: usize,
    /// Non-decreasing, summing to one; the last weight belongs to the final training day.
    pub weights: Vec<f64>,
    pub step: f64,
}

impl FitContext {
    /// 21-day window with linear ramp weights `w_k ∝ k`.
    pub fn new(population: u64) -> Self {
        let window = 21;
        let total = (window * (window + 1) / 2) as f64;
        Self {
            population,
            n_inf: 1.0,
            window,
            weights: (1..=window).map(|k| k as f64 / total).collect(),
            step: DEFAULT_STEP,
        }
    }

    /// Custom weights, normalized to sum one.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.is_empty() || weights.iter().any(|w| *w < 0.0) || !(sum > 0.0) {
            return Err(Error::Invalid(
                "weights must be non-negative with a positive sum".into(),
            ));
        }
        self.window = weights.len();
        self.weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(self)
    }

    pub fn initial_state(&self) -> CompartmentState {
        CompartmentState::initial(self.population as f64, self.n_inf)
    }
}

/// Weighted squared log error over the last `ctx.window` days of the observed cumulative series.
pub fn weighted_msle(
    fitted_conf: &[f64],
    fitted_death: &[f64],
    observed_conf: &[f64],
    observed_death: &[f64],
    weights: &[f64],
) -> f64 {
    let n = observed_conf.len();
    let k0 = n - weights.len();
    let sq = |a: f64, b: f64| (a.max(0.0).ln_1p() - b.max(0.0).ln_1p()).powi(2);
    weights
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let t = k0 + k;
            w * (sq(fitted_conf[t], observed_conf[t]) + sq(fitted_death[t], observed_death[t])) / 2.0
        })
        .sum()
}

/// Calibration loss of `params` against cumulative observations starting at day 0.
pub fn loss(params: &SeirHcdParams, ctx: &FitContext, observed_conf: &[f64], observed_death: &[f64]) -> Result<f64> {
    check_observations(ctx, observed_conf, observed_death)?;
    let traj = simulate(params, ctx.initial_state(), observed_conf.len() - 1, ctx.step)?;
    let (c, d) = observe(&traj, ctx.population as f64);
    Ok(weighted_msle(&c, &d, observed_conf, observed_death, &ctx.weights))
}

fn check_observations(ctx: &FitContext, conf: &[f64], death: &[f64]) -> Result<()> {
    if conf.len() != death.len() {
        return Err(Error::Mismatch {
            left: conf.len(),
            right: death.len(),
        });
    }
    if conf.len() < ctx.window || ctx.weights.len() != ctx.window {
        return Err(Error::Length {
            needed: ctx.window,
            got: conf.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeirFit {
    pub params: SeirHcdParams,
    pub loss: f64,
    /// State on the last training day.
    pub final_state: CompartmentState,
    pub population: u64,
    pub converged: bool,
    /// Loss at each multistart initialization.
    pub start_losses: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SeirFitOptions {
    pub max_iter: usize,
    pub parallel: bool,
}

impl Default for SeirFitOptions {
    fn default() -> Self {
        Self {
            max_iter: 300,
            parallel: true,
        }
    }
}

struct StartResult {
    x: Vec<f64>,
    loss: f64,
    converged: bool,
    start_loss: f64,
}

/// Bounded quasi-Newton calibration from every start; the lowest final loss wins, with
/// converged points preferred and ties broken by parameter order.
pub fn fit(
    observed_conf: &[f64],
    observed_death: &[f64],
    ctx: &FitContext,
    starts: &[SeirHcdParams],
    opts: &SeirFitOptions,
) -> Result<SeirFit> {
    check_observations(ctx, observed_conf, observed_death)?;
    if starts.is_empty() {
        return Err(Error::Empty("SEIR-HCD multistart set".into()));
    }
    let bounds = SeirHcdParams::bounds();
    let lbfgs = LbfgsOptions {
        max_iter: opts.max_iter,
        grad_tol: 1e-12,
        f_tol: 1e-15,
        ..LbfgsOptions::default()
    };
    let objective = |v: &[f64]| -> f64 {
        match loss(&SeirHcdParams::from_slice(v), ctx, observed_conf, observed_death) {
            Ok(l) if l.is_finite() => l,
            _ => f64::INFINITY,
        }
    };
    let run = |start: &SeirHcdParams| -> StartResult {
        let x0 = start.to_vec();
        let start_loss = objective(&x0);
        let m = optim::minimize(
            |x| {
                let mut f = objective;
                let fx = f(x);
                let g = optim::forward_gradient(&mut f, x, fx, 1e-6, Some(&bounds));
                (fx, g)
            },
            &x0,
            Some(&bounds),
            &lbfgs,
        );
        StartResult {
            converged: m.termination.converged(),
            x: m.x,
            loss: m.f,
            start_loss,
        }
    };
    let results: Vec<StartResult> = if opts.parallel {
        starts.par_iter().map(run).collect()
    } else {
        starts.iter().map(run).collect()
    };
    let start_losses = results.iter().map(|r| r.start_loss).collect();
    let best = results
        .iter()
        .filter(|r| r.loss.is_finite())
        .min_by(|a, b| {
            b.converged
                .cmp(&a.converged)
                .then(a.loss.total_cmp(&b.loss))
                .then_with(|| {
                    a.x.iter()
                        .zip(&b.x)
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
        })
        .ok_or_else(|| Error::FitFailed("SEIR-HCD loss is non-finite at every start".into()))?;
    // Prefer a lower non-converged point only if no converged point comes close.
    let lowest = results
        .iter()
        .filter(|r| r.loss.is_finite())
        .min_by(|a, b| a.loss.total_cmp(&b.loss))
        .expect("best exists");
    let chosen = if best.converged && lowest.loss < best.loss - 1e-12 {
        lowest
    } else {
        best
    };

    let params = SeirHcdParams::from_slice(&chosen.x);
    let traj = simulate(&params, ctx.initial_state(), observed_conf.len() - 1, ctx.step)?;
    Ok(SeirFit {
        params,
        loss: chosen.loss,
        final_state: *traj.last().expect("non-empty trajectory"),
        population: ctx.population,
        converged: chosen.converged,
        start_losses,
    })
}

/// Daily confirmed and death forecasts for the `h` days after the final state.
pub fn forecast(
    params: &SeirHcdParams,
    final_state: CompartmentState,
    population: u64,
    h: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if h == 0 {
        return Err(Error::Invalid("forecast horizon must be at least one day".into()));
    }
    let traj = simulate(params, final_state, h, DEFAULT_STEP)?;
    let (c, d) = observe(&traj, population as f64);
    let daily = |v: &[f64]| v.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect::<Vec<f64>>();
    Ok((daily(&c), daily(&d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn truth() -> SeirHcdParams {
        SeirHcdParams::from_slice(&[3.6, 7.0, 6.2, 8.0, 9.0, 0.8, 0.3, 0.5])
    }

    #[test]
    fn grid_sizes_and_bounds() {
        assert_eq!(full_grid().len(), 864);
        assert_eq!(reduced_grid().len(), 32);
        let b = SeirHcdParams::bounds();
        assert_eq!(b.lower, vec![1.2, 4.0, 2.9, 4.0, 5.0, 0.7, 0.1, 0.3]);
        assert_eq!(b.upper, vec![7.0, 14.0, 10.1, 12.0, 14.0, 0.9, 0.6, 0.8]);
    }

    #[test]
    fn hand_evaluated_derivative() {
        let x = CompartmentState {
            s: 0.99,
            i: 0.01,
            ..Default::default()
        };
        let ds = derivative(&x, &truth()).s;
        assert!((ds - (-3.6 * 0.01 * 0.99 / 6.2)).abs() < 1e-15);
        assert!((ds + 5.748e-3).abs() < 1e-6);
    }

    #[test]
    fn disease_free_is_constant() {
        let x = CompartmentState {
            s: 0.7,
            r: 0.2,
            d: 0.1,
            ..Default::default()
        };
        let dx = derivative(&x, &truth());
        assert_eq!(dx, CompartmentState::default());
        let traj = simulate(&truth(), x, 30, 0.1).unwrap();
        assert!(traj.iter().all(|y| *y == x));
        let (c, d) = forecast(&truth(), x, 1000, 5).unwrap();
        assert!(c.iter().chain(&d).all(|v| *v == 0.0));
    }

    #[test]
    fn conservation_and_positivity_sweep() {
        let b = SeirHcdParams::bounds();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let v: Vec<f64> = (0..8).map(|i| rng.gen_range(b.lower[i]..=b.upper[i])).collect();
            let p = SeirHcdParams::from_slice(&v);
            let init = CompartmentState::initial(1e6, 1.0);
            let traj = simulate(&p, init, 365, 0.1).unwrap();
            let mut prev_d = 0.0;
            for x in &traj {
                assert!((x.total() - 1.0).abs() < 1e-6);
                assert!(x.min_component() > -1e-9);
                assert!(x.d >= prev_d);
                prev_d = x.d;
                let dx = derivative(x, &p);
                assert!(dx.total().abs() < 1e-15);
            }
            let (c, _) = observe(&traj, 1e6);
            assert!(c.windows(2).all(|w| w[1] >= w[0] - 1e-9));
            assert!((c[0] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn step_halving() {
        let init = CompartmentState {
            s: 0.9,
            e: 0.05,
            i: 0.05,
            ..Default::default()
        };
        let a = simulate(&truth(), init, 1, 0.1).unwrap()[1];
        let b = simulate(&truth(), init, 1, 0.01).unwrap()[1];
        let diff = [
            a.s - b.s,
            a.e - b.e,
            a.i - b.i,
            a.r - b.r,
            a.h - b.h,
            a.c - b.c,
            a.d - b.d,
        ]
        .into_iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(diff < 1e-6, "{diff}");
        assert!(simulate(&truth(), init, 1, 0.0).is_err());
    }

    #[test]
    fn single_day_weights() {
        let mut w = vec![0.0; 21];
        w[20] = 1.0;
        let ctx = FitContext::new(1000).with_weights(w).unwrap();
        let traj = simulate(&truth(), ctx.initial_state(), 29, 0.1).unwrap();
        let (c, d) = observe(&traj, 1000.0);
        let oc: Vec<f64> = c.iter().map(|v| v * 1.3).collect();
        let od: Vec<f64> = d.iter().map(|v| v + 2.0).collect();
        let l = loss(&truth(), &ctx, &oc, &od).unwrap();
        let hand = ((c[29].ln_1p() - oc[29].ln_1p()).powi(2) + (d[29].ln_1p() - od[29].ln_1p()).powi(2)) / 2.0;
        assert!((l - hand).abs() < 1e-15);
    }

    #[test]
    fn weight_permutation_invariance() {
        let ctx = FitContext::new(5000);
        let traj = simulate(&truth(), ctx.initial_state(), 24, 0.1).unwrap();
        let (c, d) = observe(&traj, 5000.0);
        let oc: Vec<f64> = c.iter().enumerate().map(|(t, v)| v * (1.0 + 0.01 * t as f64)).collect();
        let od: Vec<f64> = d.iter().map(|v| v * 0.9).collect();
        let base = weighted_msle(&c, &d, &oc, &od, &ctx.weights);
        // Reverse the window and the weights together.
        let k0 = c.len() - 21;
        let rev = |v: &[f64]| {
            let mut out = v.to_vec();
            out[k0..].reverse();
            out
        };
        let mut w = ctx.weights.clone();
        w.reverse();
        let perm = weighted_msle(&rev(&c), &rev(&d), &rev(&oc), &rev(&od), &w);
        assert!((base - perm).abs() < 1e-15);
    }

    #[test]
    fn self_consistent_fit_recovers_forecasts() {
        let pop = 1_000_000u64;
        let ctx = FitContext::new(pop);
        let days = 60;
        let traj = simulate(&truth(), ctx.initial_state(), days + 7, 0.1).unwrap();
        let (c, d) = observe(&traj, pop as f64);
        let (oc, od) = (&c[..=days], &d[..=days]);
        let f = fit(oc, od, &ctx, &reduced_grid(), &SeirFitOptions::default()).unwrap();
        let at_truth = loss(&truth(), &ctx, oc, od).unwrap();
        assert!(f.loss <= at_truth + 1e-8, "{} vs {}", f.loss, at_truth);
        for l in &f.start_losses {
            assert!(f.loss <= *l + 1e-15);
        }
        let (fc, fd) = forecast(&f.params, f.final_state, pop, 7).unwrap();
        let (tc, td) = forecast(&truth(), traj[days], pop, 7).unwrap();
        for k in 0..7 {
            assert!(
                (fc[k] - tc[k]).abs() <= 0.01 * tc[k],
                "conf day {k}: {} vs {}",
                fc[k],
                tc[k]
            );
            assert!(
                (fd[k] - td[k]).abs() <= 0.01 * td[k],
                "death day {k}: {} vs {}",
                fd[k],
                td[k]
            );
        }
    }
}
