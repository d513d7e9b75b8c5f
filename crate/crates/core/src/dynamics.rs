//! Time integration of the patch system.
//!
//! An explicit Dormand–Prince 5(4) pair with step rejection on loss of
//! positivity. Clipping negative components would quietly inject mass, and
//! the conserved total is the main correctness probe here, so steps are
//! shortened instead.

use nalgebra::DVector;

use crate::equilibria::EquilibriumSolution;
use crate::error::{Error, Result};
use crate::linalg::ConnectivityMatrix;
use crate::model::Model;

pub const DEFAULT_RTOL: f64 = 1e-8;
pub const DEFAULT_ATOL: f64 = 1e-10;
pub const DEFAULT_SAMPLES: usize = 200;
/// Horizon used when no linearization rate is known.
pub const FALLBACK_HORIZON: f64 = 500.0;
/// Relative tolerance on `sum(S0 + I0) = N`.
pub const INITIAL_MASS_TOL: f64 = 1e-9;
/// Trajectories within `CONVERGENCE_TOL * N` of the target count as converged.
pub const CONVERGENCE_TOL: f64 = 1e-6;

const MAX_STEPS: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: DEFAULT_RTOL, atol: DEFAULT_ATOL }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub horizon: f64,
    /// Number of stored states, including `t = 0` and `t = horizon`.
    pub samples: usize,
    pub tolerances: Tolerances,
}

impl SimulationOptions {
    pub fn new(horizon: f64) -> Self {
        SimulationOptions { horizon, samples: DEFAULT_SAMPLES, tolerances: Tolerances::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<(DVector<f64>, DVector<f64>)>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest `|sum(S + I) - N|` over the stored states.
    pub max_conservation_drift: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &(DVector<f64>, DVector<f64>) {
        self.states.last().expect("trajectory has at least one state")
    }
}

/// `50 / |sigma|` for a known linearization rate, otherwise 500.
pub fn default_horizon(rate: Option<f64>) -> f64 {
    match rate {
        Some(s) if s.is_finite() && s != 0.0 => 50.0 / s.abs(),
        _ => FALLBACK_HORIZON,
    }
}

fn check_initial(m: &Model, s0: &DVector<f64>, i0: &DVector<f64>) -> Result<()> {
    let n = m.n();
    if s0.len() != n || i0.len() != n {
        return Err(Error::InvalidInitialData(format!(
            "expected vectors of length {n}, got {} and {}",
            s0.len(),
            i0.len()
        )));
    }
    for (name, v) in [("S0", s0), ("I0", i0)] {
        if let Some(j) = v.iter().position(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidInitialData(format!("{name}[{j}] = {} is not a nonnegative number", v[j])));
        }
    }
    let mass = s0.sum() + i0.sum();
    if (mass - m.total()).abs() > INITIAL_MASS_TOL * m.total() {
        return Err(Error::InvalidInitialData(format!("total population {mass} differs from N = {}", m.total())));
    }
    Ok(())
}

/// Right-hand side on the stacked state `(S, I)`.
fn rhs(m: &Model, y: &DVector<f64>) -> DVector<f64> {
    let n = m.n();
    let s = y.rows(0, n);
    let i = y.rows(n, n);
    let ls = m.l() * s;
    let li = m.l() * i;
    let mut out = DVector::zeros(2 * n);
    for j in 0..n {
        let infection = m.beta()[j] * s[j] * i[j];
        let recovery = m.gamma()[j] * i[j];
        out[j] = m.ds() * ls[j] - infection + recovery;
        out[n + j] = m.di() * li[j] + infection - recovery;
    }
    out
}

/// Integrates the model from `(S0, I0)` on `[0, horizon]`.
pub fn simulate(m: &Model, s0: &DVector<f64>, i0: &DVector<f64>, opts: &SimulationOptions) -> Result<Trajectory> {
    check_initial(m, s0, i0)?;
    if !(opts.horizon > 0.0) || !opts.horizon.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {}", opts.horizon)));
    }
    let n = m.n();
    let mut y0 = DVector::zeros(2 * n);
    y0.rows_mut(0, n).copy_from(s0);
    y0.rows_mut(n, n).copy_from(i0);
    let run = integrate(|y| rhs(m, y), y0, opts.horizon, opts.samples, opts.tolerances, true)?;

    let total = m.total();
    let mut drift = 0.0f64;
    let states: Vec<_> = run
        .states
        .into_iter()
        .map(|y| {
            drift = drift.max((y.sum() - total).abs());
            (y.rows(0, n).into_owned(), y.rows(n, n).into_owned())
        })
        .collect();
    Ok(Trajectory {
        times: run.times,
        states,
        accepted_steps: run.accepted,
        rejected_steps: run.rejected,
        max_conservation_drift: drift,
    })
}

pub(crate) struct Run {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub accepted: usize,
    pub rejected: usize,
}

// Dormand–Prince 5(4) tableau; the system is autonomous so the nodes are
// not needed. Row 6 doubles as the 5th-order weights (FSAL).
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

fn error_norm(err: &DVector<f64>, y: &DVector<f64>, y_new: &DVector<f64>, tol: Tolerances) -> f64 {
    let n = err.len() as f64;
    let sum: f64 = (0..err.len())
        .map(|k| {
            let sc = tol.atol + tol.rtol * y[k].abs().max(y_new[k].abs());
            (err[k] / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step(f0: &DVector<f64>, y0: &DVector<f64>, horizon: f64, tol: Tolerances) -> f64 {
    let scale = y0.map(|v| tol.atol + tol.rtol * v.abs());
    let d0 = (y0.component_div(&scale).norm_squared() / y0.len() as f64).sqrt();
    let d1 = (f0.component_div(&scale).norm_squared() / y0.len() as f64).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(0.1 * horizon)
}

pub(crate) fn integrate(
    f: impl Fn(&DVector<f64>) -> DVector<f64>,
    y0: DVector<f64>,
    horizon: f64,
    samples: usize,
    tol: Tolerances,
    keep_positive: bool,
) -> Result<Run> {
    let samples = samples.max(2);
    let outputs: Vec<f64> = (0..samples)
        .map(|k| if k + 1 == samples { horizon } else { horizon * k as f64 / (samples - 1) as f64 })
        .collect();
    let mut times = vec![0.0];
    let mut states = vec![y0.clone()];
    let mut next_out = 1;

    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = f(&y);
    let mut h = initial_step(&k1, &y, horizon, tol);
    let h_min = 1e-14 * horizon;
    let (mut accepted, mut rejected) = (0usize, 0usize);
    let mut last_rejected = false;
    let mut stages: Vec<DVector<f64>> = Vec::with_capacity(7);

    while next_out < outputs.len() {
        if accepted + rejected > MAX_STEPS {
            return Err(Error::NoConvergence { routine: "time integration", iterations: MAX_STEPS });
        }
        let target = outputs[next_out];
        let mut step = h.min(target - t);
        // avoid a sliver step just before an output time
        if target - t - step < 1e-3 * step {
            step = target - t;
        }
        if step < h_min && target - t >= h_min {
            return Err(Error::StepUnderflow { t, h: step });
        }

        stages.clear();
        stages.push(k1.clone());
        for row in &A[1..7] {
            let mut ys = y.clone();
            for (a, k) in row.iter().zip(&stages) {
                if *a != 0.0 {
                    ys.axpy(step * a, k, 1.0);
                }
            }
            stages.push(f(&ys));
        }
        // the last stage was evaluated at the proposed solution
        let mut y_new = y.clone();
        for (j, k) in stages.iter().take(6).enumerate() {
            if A[6][j] != 0.0 {
                y_new.axpy(step * A[6][j], k, 1.0);
            }
        }
        let mut err = DVector::zeros(y.len());
        for (j, k) in stages.iter().enumerate() {
            if E[j] != 0.0 {
                err.axpy(step * E[j], k, 1.0);
            }
        }
        let en = error_norm(&err, &y, &y_new, tol);
        let finite = y_new.iter().all(|v| v.is_finite()) && en.is_finite();
        let negative = keep_positive && y_new.iter().any(|&v| v < 0.0);

        if !finite || negative {
            rejected += 1;
            h = 0.5 * step;
            last_rejected = true;
            continue;
        }
        if en > 1.0 {
            rejected += 1;
            h = step * (0.9 * en.powf(-0.2)).clamp(0.2, 1.0);
            last_rejected = true;
            continue;
        }

        accepted += 1;
        t = if step == target - t { target } else { t + step };
        y = y_new;
        k1 = stages.pop().expect("seven stages");
        let grow = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        let grow = if last_rejected { grow.min(1.0) } else { grow };
        last_rejected = false;
        // keep the proposed step when it was only shortened to hit an output
        h = (step * grow).max(if step < h { h.min(step * 5.0) } else { 0.0 });

        if t == target {
            times.push(t);
            states.push(y.clone());
            next_out += 1;
        }
    }
    Ok(Run { times, states, accepted, rejected })
}

/// Distance of the tail of a trajectory to an equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Largest infinity-norm distance over the last `window` states.
    pub residual: f64,
    /// Distance of the final state.
    pub final_distance: f64,
    pub converged: bool,
}

/// Infinity-norm distance of the last `window` stored states to `target`;
/// converged when all are within `1e-6 N`.
pub fn detect_convergence(traj: &Trajectory, target: &EquilibriumSolution, window: usize) -> ConvergenceReport {
    let total = target.s.sum() + target.i.sum();
    let dist = |(s, i): &(DVector<f64>, DVector<f64>)| (s - &target.s).amax().max((i - &target.i).amax());
    let window = window.clamp(1, traj.states.len().max(1));
    let tail = &traj.states[traj.states.len().saturating_sub(window)..];
    let residual = tail.iter().map(dist).fold(0.0, f64::max);
    let final_distance = traj.states.last().map(dist).unwrap_or(f64::INFINITY);
    ConvergenceReport { residual, final_distance, converged: residual <= CONVERGENCE_TOL * total }
}

/// Smallest infected density over the states after the first `burn_in`
/// fraction of the horizon.
pub fn persistence_floor(traj: &Trajectory, burn_in: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&burn_in) {
        return Err(Error::InvalidArgument(format!("burn-in fraction must lie in [0, 0.5], got {burn_in}")));
    }
    let horizon = *traj.times.last().ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    let start = burn_in * horizon;
    Ok(traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| **t >= start)
        .map(|(_, (_, i))| i.min())
        .fold(f64::INFINITY, f64::min))
}

/// Integrates the pure dispersal `X' = d L X` to time `horizon` and returns
/// `|X(T) - sum(X0) alpha|_1`.
pub fn drift_projection_check(conn: &ConnectivityMatrix, d: f64, x0: &DVector<f64>, horizon: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::NonPositiveParameter { name: "d".into(), value: d });
    }
    if x0.len() != conn.n() {
        return Err(Error::DimensionMismatch(format!("X0 has length {}, expected {}", x0.len(), conn.n())));
    }
    let target = conn.alpha() * x0.sum();
    if horizon <= 0.0 {
        return Ok((x0 - &target).abs().sum());
    }
    let l = conn.matrix() * d;
    let tol = Tolerances { rtol: 1e-12, atol: 1e-14 };
    let run = integrate(|x| &l * x, x0.clone(), horizon, 2, tol, false)?;
    let end = run.states.last().expect("final state");
    Ok((end - target).abs().sum())
}
