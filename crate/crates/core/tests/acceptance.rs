//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Reference values are computed here from closed forms or with
//! nalgebra directly rather than through the library's own routines.

use std::cell::RefCell;
use std::process::ExitCode;

use nalgebra::{DMatrix, DVector};
use patchsis::asymptotics;
use patchsis::dynamics::{self, SimulationOptions, Trajectory};
use patchsis::equilibria::{self, EquilibriumSolution};
use patchsis::model::{self, Model};
use patchsis::sampling;
use patchsis::{build_model, Result};

type Outcome = std::result::Result<String, String>;
type Criterion = (usize, &'static str, fn() -> Outcome);

struct SimLog {
    runs: usize,
    worst_drift: f64,
    worst_min: f64,
}

thread_local! {
    static LOG: RefCell<SimLog> = const { RefCell::new(SimLog { runs: 0, worst_drift: 0.0, worst_min: f64::INFINITY }) };
}

/// Simulates and records conservation and positivity for the final check.
fn simulate(m: &Model, s0: &DVector<f64>, i0: &DVector<f64>, horizon: f64) -> Result<Trajectory> {
    let traj = dynamics::simulate(m, s0, i0, &SimulationOptions::new(horizon))?;
    let mut drift = 0.0f64;
    let mut lowest = f64::INFINITY;
    for (s, i) in &traj.states {
        drift = drift.max((s.sum() + i.sum() - m.total()).abs() / m.total());
        lowest = lowest.min(s.min()).min(i.min());
    }
    LOG.with(|log| {
        let mut log = log.borrow_mut();
        log.runs += 1;
        log.worst_drift = log.worst_drift.max(drift);
        log.worst_min = log.worst_min.min(lowest);
    });
    Ok(traj)
}

fn dist(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

fn state_dist(x: &(DVector<f64>, DVector<f64>), s: &DVector<f64>, i: &DVector<f64>) -> f64 {
    dist(&x.0, s).max(dist(&x.1, i))
}

fn two_patch(beta: [f64; 2], gamma: [f64; 2], ds: f64, di: f64, total: f64) -> Model {
    let raw = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
    build_model(&raw, DVector::from_row_slice(&beta), DVector::from_row_slice(&gamma), ds, di, total)
        .expect("valid instance")
}

fn multi_ee(ds: f64, di: f64, total: f64) -> Model {
    two_patch([6.0, 1.5], [4.0, 1.0], ds, di, total)
}

fn symmetric(beta: [f64; 2], gamma: [f64; 2], ds: f64, di: f64, total: f64) -> Model {
    let raw = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    build_model(&raw, DVector::from_row_slice(&beta), DVector::from_row_slice(&gamma), ds, di, total)
        .expect("valid instance")
}

/// Largest real part of the spectrum, straight from nalgebra's eigenvalues.
fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn ngm_oracle(m: &Model) -> f64 {
    let f = DMatrix::from_diagonal(&(m.alpha().component_mul(m.beta()) * m.total()));
    let v = DMatrix::from_diagonal(m.gamma()) - m.l() * m.di();
    spectral_radius(&(f * v.try_inverse().expect("V invertible")))
}

fn monotone_decreasing(errs: &[f64]) -> bool {
    errs.windows(2).all(|w| w[1] < w[0])
}

fn fmt_errs(errs: &[f64]) -> String {
    errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", ")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib<T>(r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| format!("library error: {e}"))
}

fn ac1() -> Outcome {
    let m = symmetric([1.0, 1.0], [1.0, 1.0], 1.0, 1.0, 4.0);
    let r0 = lib(model::r0(&m))?;
    ensure((r0 - 2.0).abs() <= 1e-8, || format!("r0 = {r0}"))?;
    let ones = DVector::from_element(2, 1.0);
    let eqs = lib(equilibria::find_endemic_equilibria(&m))?;
    ensure(eqs.len() == 1, || format!("{} endemic equilibria", eqs.len()))?;
    let e = &eqs[0];
    let err = dist(&e.s, &ones).max(dist(&e.i, &ones));
    ensure(err <= 1e-8, || format!("EE error {err:.2e}"))?;
    let mut rng = sampling::rng(1);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (s0, i0) = sampling::random_interior_state(&mut rng, &m);
        let traj = lib(simulate(&m, &s0, &i0, 200.0))?;
        worst = worst.max(state_dist(traj.final_state(), &ones, &ones));
    }
    ensure(worst <= 1e-6, || format!("simulation distance {worst:.2e} at T = 200"))?;
    Ok(format!("r0 = {r0:.12}, EE error {err:.1e}, worst simulation distance {worst:.1e}"))
}

fn ac2() -> Outcome {
    let mut rng = sampling::rng(2);
    let band = model::THRESHOLD_DEADBAND;
    let mut checked = 0;
    for k in 0..100 {
        let n = 2 + k % 5;
        let m = sampling::random_model(&mut rng, n);
        let r0 = lib(model::r0(&m))?;
        let f = DMatrix::from_diagonal(&(m.alpha().component_mul(m.beta()) * m.total()));
        let v = DMatrix::from_diagonal(m.gamma()) - m.l() * m.di();
        let sigma = spectral_abscissa(&(f - v));
        if (r0 - 1.0).abs() <= band || sigma.abs() <= band {
            continue;
        }
        ensure((r0 > 1.0) == (sigma > 0.0), || format!("model {k}: r0 = {r0}, sigma = {sigma}"))?;
        checked += 1;
    }
    Ok(format!("{checked}/100 models outside the dead-band agree"))
}

fn ac3() -> Outcome {
    let mut rng = sampling::rng(3);
    let mut worst = 0.0f64;
    for n in [2, 4, 6] {
        let m = sampling::random_model(&mut rng, n);
        let grid: Vec<f64> = (0..20).map(|k| 10f64.powf(-6.0 + 12.0 * k as f64 / 19.0)).collect();
        let mut values = Vec::new();
        for &di in &grid {
            values.push(lib(model::r0(&m.with_di(di)))?);
        }
        ensure(values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), || {
            format!("n = {n}: r0 not monotone: {values:?}")
        })?;
        let (a, b, g) = (m.alpha(), m.beta(), m.gamma());
        let low = m.total() * (0..n).map(|j| a[j] * b[j] / g[j]).fold(0.0, f64::max);
        let high = m.total() * (0..n).map(|j| a[j] * a[j] * b[j]).sum::<f64>() / a.dot(g);
        let e0 = (values[0] - low).abs() / low;
        let e1 = (values[19] - high).abs() / high;
        ensure(e0 <= 0.02 && e1 <= 0.02, || format!("n = {n}: endpoint errors {e0:.2e}, {e1:.2e}"))?;
        worst = worst.max(e0).max(e1);
    }
    Ok(format!("3 models monotone, worst endpoint error {worst:.1e}"))
}

fn dfe_convergence(m: &Model, seed: u64) -> std::result::Result<f64, String> {
    let (s_dfe, i_dfe) = model::dfe(m);
    let mut rng = sampling::rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (s0, i0) = sampling::random_interior_state(&mut rng, m);
        let traj = lib(simulate(m, &s0, &i0, 2000.0))?;
        worst = worst.max(state_dist(traj.final_state(), &s_dfe, &i_dfe));
    }
    Ok(worst)
}

fn ac5() -> Outcome {
    let cases = [
        ("i", two_patch([1.0, 2.0], [3.0, 4.0], 0.5, 2.0, 1.0)),
        ("iii", two_patch([1.0, 2.0], [2.0, 3.0], 0.8, 0.8, 1.0)),
        ("iv", two_patch([3.0, 1.5], [1.0, 1.0], 0.3, 2.0, 0.9)),
    ];
    let mut notes = Vec::new();
    for (tag, m) in &cases {
        let cls = lib(model::classify_dfe_global_stability(m))?;
        let holds = match *tag {
            "i" => cls.condition_i,
            "iii" => cls.condition_iii,
            _ => cls.condition_iv.is_some(),
        };
        ensure(holds, || format!("condition ({tag}) does not hold: {cls:?}"))?;
        let worst = dfe_convergence(m, 50)?;
        ensure(worst <= 1e-6, || format!("condition ({tag}): distance {worst:.2e} to the DFE"))?;
        notes.push(format!("({tag}) {worst:.1e}"));
    }
    Ok(format!("distances to the DFE: {}", notes.join(", ")))
}

fn ac6() -> Outcome {
    let di = 100.0;
    let m = multi_ee(1e-3, di, 1.45);
    let r0 = lib(model::r0(&m))?;
    let r0_oracle = ngm_oracle(&m);
    ensure((r0 - r0_oracle).abs() <= 1e-10 * r0_oracle, || format!("r0 {r0} vs oracle {r0_oracle}"))?;
    ensure(r0 < 1.0, || format!("r0 = {r0}"))?;
    let sum_r = m.r().sum();
    ensure((sum_r - 4.0 / 3.0).abs() < 1e-12 && sum_r < m.total(), || format!("sum r = {sum_r}"))?;
    let mut grid: Vec<f64> = (0..13).map(|k| 10f64.powf(-4.0 + k as f64 / 3.0)).collect();
    let dstar = di * r0;
    grid.extend([dstar * 1.0001, dstar * 2.0, dstar * 10.0]);
    let sweep = lib(equilibria::bifurcation_sweep_ds(&m, &grid))?;
    let small = &sweep.points[0];
    ensure(small.count >= 2, || format!("{} EE at dS = {}", small.count, small.ds))?;
    for p in sweep.points.iter().filter(|p| p.ds >= dstar) {
        ensure(p.count == 0, || format!("{} EE at dS = {} >= dI r0", p.count, p.ds))?;
    }
    let (d1, d2) = (sweep.d1_star, sweep.d2_star);
    match (d1, d2) {
        (Some(a), Some(b)) => ensure(a <= b, || format!("d1* = {a} > d2* = {b}"))?,
        _ => return Err(format!("thresholds missing: {d1:?}, {d2:?}")),
    }
    let counts: Vec<usize> = sweep.points.iter().map(|p| p.count).collect();
    Ok(format!("r0 = {r0:.6}, counts {counts:?}, d1* = {:.4e} <= d2* = {:.4e}", d1.unwrap(), d2.unwrap()))
}

fn max_branch(m: &Model) -> std::result::Result<EquilibriumSolution, String> {
    let eqs = lib(equilibria::find_endemic_equilibria(m))?;
    eqs.into_iter()
        .max_by(|a, b| a.l.partial_cmp(&b.l).expect("finite l"))
        .ok_or_else(|| format!("no endemic equilibrium at dS = {}, dI = {}", m.ds(), m.di()))
}

fn ac7() -> Outcome {
    let total = 2.0;
    let alpha = DVector::from_vec(vec![1.0 / 3.0, 2.0 / 3.0]);
    let r = DVector::from_vec(vec![4.0 / 6.0, 1.0 / 1.5]);
    let i_lim = &alpha * (total - r.sum());
    let mut errs = Vec::new();
    for ds in [1e-2, 1e-3, 1e-4] {
        let e = max_branch(&multi_ee(ds, 100.0, total))?;
        errs.push(dist(&e.s, &r).max(dist(&e.i, &i_lim)));
    }
    ensure(monotone_decreasing(&errs) && errs[2] <= 2e-2, || format!("errors {}", fmt_errs(&errs)))?;
    Ok(format!("errors {}", fmt_errs(&errs)))
}

fn ac8() -> Outcome {
    // r / alpha = (2, 1): the highest-risk set is the second patch.
    let alpha = DVector::from_vec(vec![1.0 / 3.0, 2.0 / 3.0]);
    let mut s_errs = Vec::new();
    let mut off = Vec::new();
    for di in [1e-2, 1e-3, 1e-4] {
        let e = max_branch(&multi_ee(1.0, di, 2.0))?;
        s_errs.push(dist(&e.s, &alpha));
        off.push(e.i[0]);
    }
    ensure(s_errs[2] <= 2e-2, || format!("S errors {}", fmt_errs(&s_errs)))?;
    ensure(off[2] <= 2e-2, || format!("off-set infected mass {}", fmt_errs(&off)))?;
    Ok(format!("S errors {}, off-set infected mass {}", fmt_errs(&s_errs), fmt_errs(&off)))
}

fn ac9() -> Outcome {
    let mut notes = Vec::new();
    for sigma in [0.5, 1.0, 2.0] {
        let target = lib(asymptotics::sigma_profile(&multi_ee(1.0, 1.0, 2.0), sigma))?;
        let mut errs = Vec::new();
        for eps in [1e-2, 1e-3, 1e-4] {
            let e = max_branch(&multi_ee(eps / sigma, eps, 2.0))?;
            errs.push(dist(&e.s, &target.s_limit).max(dist(&e.i, &target.i_limit)));
        }
        ensure(monotone_decreasing(&errs) && errs[2] <= 2e-2, || {
            format!("sigma = {sigma}: errors {}", fmt_errs(&errs))
        })?;
        notes.push(format!("sigma {sigma}: {}", fmt_errs(&errs)));
    }
    // Symmetric network with r = (1, 2), N = 4, sigma = 1.
    let worked = symmetric([1.0, 1.0], [1.0, 2.0], 1.0, 1.0, 4.0);
    let p = lib(asymptotics::sigma_profile(&worked, 1.0))?;
    let err = (p.l_sigma - 1.0)
        .abs()
        .max(dist(&p.s_limit, &DVector::from_vec(vec![1.0, 2.0])))
        .max(dist(&p.i_limit, &DVector::from_vec(vec![1.0, 0.0])));
    ensure(err <= 1e-12, || format!("worked example off by {err:.2e}: {p:?}"))?;
    Ok(format!("{}; worked example exact", notes.join("; ")))
}

fn ac10() -> Outcome {
    let mut rng = sampling::rng(10);
    let mut worst_k = 0.0f64;
    let mut worst_lim = 0.0f64;
    for k in 0..50 {
        let n = 2 + k % 5;
        let m = sampling::random_model(&mut rng, n);
        let r0 = lib(model::r0(&m))?;
        let t = 10f64.powf(-3.0 + 6.0 * (k as f64 / 49.0));
        let l = (1.0 + t) / r0;
        let fam = lib(equilibria::solve_family(&m, l))?;
        let na = m.alpha() * m.total();
        let ratio: Vec<f64> = (0..n).map(|j| m.gamma()[j] / (m.beta()[j] * m.alpha()[j])).collect();
        let lo = ratio.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratio.iter().copied().fold(0.0, f64::max);
        for j in 0..n {
            let du = m.di() * fam.u[j];
            let slack = 1e-10 * na[j];
            ensure(du > 0.0 && du < na[j], || format!("pair {k}: dI U[{j}] = {du} vs N alpha = {}", na[j]))?;
            let z = l * (na[j] - du);
            let (zlo, zhi) = (lo * m.alpha()[j], hi * m.alpha()[j]);
            ensure(z >= zlo - slack && z <= zhi + slack, || format!("pair {k}: Z[{j}] = {z} outside [{zlo}, {zhi}]"))?;
        }
        let mut prev = fam.u.clone();
        for step in 1..=6 {
            let next = lib(equilibria::solve_family(&m, l * 2f64.powi(step)))?;
            ensure(next.u.iter().zip(prev.iter()).all(|(a, b)| *a >= *b * (1.0 - 1e-10)), || {
                format!("pair {k}: U not monotone in l")
            })?;
            prev = next.u;
        }
        let kval = lib(equilibria::sensitivity_k(&m, l))?;
        let h = 1e-5 * l;
        let up = lib(equilibria::solve_family_from(&m, l + h, Some(&fam.u)))?;
        let down = lib(equilibria::solve_family_from(&m, l - h, Some(&fam.u)))?;
        let fd = l * (up.u.sum() - down.u.sum()) / (2.0 * h) + fam.u.sum();
        let rel = (kval - fd).abs() / fd.abs();
        ensure(rel <= 1e-6, || format!("pair {k}: K = {kval}, finite difference {fd}"))?;
        worst_k = worst_k.max(rel);
        let far = lib(equilibria::sensitivity_k(&m, 1e4 / r0))?;
        let lim = m.total() / m.di();
        let rel_lim = (far - lim).abs() / lim;
        ensure(rel_lim <= 0.01, || format!("pair {k}: K(1e4/r0) = {far}, N/dI = {lim}"))?;
        worst_lim = worst_lim.max(rel_lim);
    }
    Ok(format!("50 pairs; K vs finite difference {worst_k:.1e}, K(1e4/r0) vs N/dI {worst_lim:.1e}"))
}

fn ac11() -> Outcome {
    let mut rng = sampling::rng(11);
    let mut floors = Vec::new();
    for k in 0..5 {
        let m = sampling::random_supercritical_model(&mut rng, 2 + k);
        let (s0, i0) = sampling::random_interior_state(&mut rng, &m);
        let traj = lib(simulate(&m, &s0, &i0, 300.0))?;
        let floor = lib(dynamics::persistence_floor(&traj, 0.5))?;
        ensure(floor > 0.0, || format!("instance {k}: floor {floor}"))?;
        floors.push(floor);
    }
    Ok(format!("floors {}", fmt_errs(&floors)))
}

fn ac4() -> Outcome {
    LOG.with(|log| {
        let log = log.borrow();
        ensure(log.runs > 0, || "no simulations recorded".into())?;
        ensure(log.worst_drift <= 1e-8, || format!("relative mass drift {:.2e}", log.worst_drift))?;
        ensure(log.worst_min >= 0.0, || format!("negative component {:.2e}", log.worst_min))?;
        Ok(format!(
            "{} simulations, worst relative drift {:.1e}, smallest component {:.1e}",
            log.runs, log.worst_drift, log.worst_min
        ))
    })
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "homogeneous oracle", ac1),
        (2, "threshold sign consistency", ac2),
        (3, "R0 monotone in dI with limits", ac3),
        (5, "DFE global stability", ac5),
        (6, "multiple EE below threshold", ac6),
        (7, "dS -> 0 profile", ac7),
        (8, "dI -> 0 profile", ac8),
        (9, "sigma profile", ac9),
        (10, "family invariants", ac10),
        (11, "persistence", ac11),
    ];
    let mut results: Vec<(usize, &str, Outcome)> = criteria.iter().map(|&(k, name, f)| (k, name, f())).collect();
    // conservation is judged over every simulation above
    results.push((4, "conservation and positivity", ac4()));
    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (k, name, outcome) in &results {
        match outcome {
            Ok(msg) => println!("PASS AC{k} {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL AC{k} {name}: {msg}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
