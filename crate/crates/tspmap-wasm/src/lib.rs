//! Browser bindings: a thin JSON-over-strings facade over the core crate so
//! a static page can generate instances, build heat maps, and solve them.
//! Only the deterministic restart budget is exposed; wall-clock budgets need
//! a monotonic clock the wasm sandbox does not guarantee.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use tspmap::instance::{generate_instance, seeded_rng, tour_length};
use tspmap::mcts::{solve, Budget, Params};
use tspmap::sampling::{build_global_heatmap, default_m};
use tspmap::{Instance, SurrogateProvider};

#[derive(Serialize)]
struct InstanceOut {
    coords: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct HeatMapOut {
    edges: Vec<(u32, u32, f64)>,
}

#[derive(Serialize)]
struct SolveOut {
    order: Vec<u32>,
    length: f64,
    restarts: u64,
    actions: u64,
}

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn parse_coords(json: &str) -> Result<Instance, JsValue> {
    let coords: Vec<(f64, f64)> = serde_json::from_str(json).map_err(err)?;
    Instance::from_coords(coords).map_err(err)
}

/// Uniform random unit-square instance as `{"coords": [[x, y], ...]}`.
#[wasm_bindgen]
pub fn wasm_generate(n: usize, seed: u64) -> Result<String, JsValue> {
    let inst = generate_instance(n, &mut seeded_rng(seed)).map_err(err)?;
    serde_json::to_string(&InstanceOut {
        coords: inst.coords().to_vec(),
    })
    .map_err(err)
}

/// Runs the sampling pipeline with the surrogate provider over coordinates
/// given as `[[x, y], ...]`; returns `{"edges": [[i, j, p], ...]}`.
#[wasm_bindgen]
pub fn wasm_heatmap(
    coords_json: &str,
    kappa: usize,
    omega: u32,
    seed: u64,
) -> Result<String, JsValue> {
    let inst = parse_coords(coords_json)?;
    let provider = SurrogateProvider { kappa };
    let m = default_m(inst.n());
    let hm = build_global_heatmap(&inst, &provider, m, omega, &mut seeded_rng(seed))
        .map_err(err)?;
    serde_json::to_string(&HeatMapOut { edges: hm.edges() }).map_err(err)
}

/// Builds a heat map and searches for `rounds` restarts; returns the best
/// tour as `{"order": [...], "length": ..., "restarts": ..., "actions": ...}`.
#[wasm_bindgen]
pub fn wasm_solve(
    coords_json: &str,
    kappa: usize,
    omega: u32,
    rounds: u64,
    seed: u64,
) -> Result<String, JsValue> {
    let inst = parse_coords(coords_json)?;
    let provider = SurrogateProvider { kappa };
    let m = default_m(inst.n());
    let hm = build_global_heatmap(&inst, &provider, m, omega, &mut seeded_rng(seed ^ 1))
        .map_err(err)?;
    let outcome = solve(
        &inst,
        &hm,
        &Params::default(),
        Budget::Restarts(rounds.max(1)),
        &mut seeded_rng(seed),
    );
    let length = tour_length(&inst, outcome.tour.order()).map_err(err)?;
    serde_json::to_string(&SolveOut {
        order: outcome.tour.order().to_vec(),
        length,
        restarts: outcome.stats.restarts,
        actions: outcome.stats.examined,
    })
    .map_err(err)
}
