//! Browser bindings. Each export takes a scenario in the CLI's JSON format and
//! returns a JSON document for the page to plot.

use patchsis::asymptotics;
use patchsis::cli::{to_json_string, ScenarioConfig};
use patchsis::dynamics::{self, SimulationOptions};
use patchsis::equilibria;
use patchsis::Model;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn load(config: &str) -> Result<(ScenarioConfig, Model), String> {
    let cfg = ScenarioConfig::from_json(config).map_err(|e| e.to_string())?;
    let m = cfg.model().map_err(|e| e.to_string())?;
    Ok((cfg, m))
}

pub fn simulate(config: &str, horizon: f64, samples: usize, seed: u64) -> Result<String, String> {
    let (cfg, m) = load(config)?;
    let (s0, i0) = cfg.initial_state(&m, seed).map_err(|e| e.to_string())?;
    let mut opts = SimulationOptions::new(horizon);
    opts.samples = samples.max(2);
    let traj = dynamics::simulate(&m, &s0, &i0, &opts).map_err(|e| e.to_string())?;
    let s: Vec<&[f64]> = traj.states.iter().map(|(s, _)| s.as_slice()).collect();
    let i: Vec<&[f64]> = traj.states.iter().map(|(_, i)| i.as_slice()).collect();
    Ok(to_json_string(&json!({ "t": traj.times, "S": s, "I": i })))
}

/// Equilibrium counts on `points` log-spaced dS values in `[from, to]`.
pub fn sweep(config: &str, from: f64, to: f64, points: usize) -> Result<String, String> {
    let (_, m) = load(config)?;
    if !(from > 0.0 && to > from) {
        return Err(format!("need 0 < from < to, got {from} and {to}"));
    }
    let k = points.max(2);
    let grid: Vec<f64> = (0..k).map(|j| from * (to / from).powf(j as f64 / (k - 1) as f64)).collect();
    let res = equilibria::bifurcation_sweep_ds(&m, &grid).map_err(|e| e.to_string())?;
    let rows: Vec<_> = res
        .points
        .iter()
        .map(|p| {
            let tags: Vec<&str> = p.stability.iter().map(|s| s.as_str()).collect();
            json!({ "dS": p.ds, "count": p.count, "l": p.l_roots, "stability": tags })
        })
        .collect();
    Ok(to_json_string(&json!({ "points": rows, "d1_star": res.d1_star, "d2_star": res.d2_star })))
}

pub fn sigma_profile(config: &str, sigma: f64) -> Result<String, String> {
    let (_, m) = load(config)?;
    let p = asymptotics::sigma_profile(&m, sigma).map_err(|e| e.to_string())?;
    Ok(to_json_string(&json!({
        "sigma": p.sigma,
        "l_sigma": p.l_sigma,
        "S": p.s_limit.as_slice(),
        "I": p.i_limit.as_slice(),
    })))
}

#[wasm_bindgen]
pub fn simulate_json(config: &str, horizon: f64, samples: usize, seed: u64) -> Result<String, JsError> {
    simulate(config, horizon, samples, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sweep_json(config: &str, from: f64, to: f64, points: usize) -> Result<String, JsError> {
    sweep(config, from, to, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sigma_profile_json(config: &str, sigma: f64) -> Result<String, JsError> {
    sigma_profile(config, sigma).map_err(|e| JsError::new(&e))
}
